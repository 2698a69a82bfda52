//! Observables of the two-sublattice ansatz on a chosen backend.

use crate::exact::{Chain, EnvOptions, Environment};
use crate::insertion::{OpSpec, Product};
use crate::lattice::{unit, Coord};
use crate::series::{self, enumerate_counting_factors, truncation_error};
use crate::{Error, Result, Sublattice, VariationalParams, C64};

/// Regime threshold on `|S_N - S_(N-1)|` of the density series.
pub const REGIME_THRESHOLD: f64 = 1e-3;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact1d,
    Cylinder { circumference: usize },
    Series { order: usize },
}

impl Backend {
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Backend::Exact1d,
            2 => Backend::Cylinder { circumference: 10 },
            _ => Backend::Series { order: series::DEFAULT_ORDER_3D },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Backend::Exact1d => "exact1d".into(),
            Backend::Cylinder { circumference } => format!("cylinder{circumference}"),
            Backend::Series { order } => format!("series{order}"),
        }
    }
}

/// Terms of the per-site leakage rate, indexed by sublattice.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct LeakageTerms {
    /// `<prod_{j in N(c)} P_j>`
    pub projector: [f64; 2],
    /// `sum_{r = +-e_k} <sx_c P_{c,c+r} sx_{c+r}>`
    pub nearest: [f64; 2],
    /// `sum_{k != l} <sx_c sx_{c+e_k-e_l}>`: pairs sharing an upstream site
    pub diagonal: [f64; 2],
    pub gram: [f64; 2],
}

impl LeakageTerms {
    /// `gamma^2` for velocities `(dtheta_A, dtheta_B)`; `diagonal_weight`
    /// scales the diagonal-pair term (1 counts every ordered pair once).
    pub fn gamma_squared(&self, velocity: [f64; 2], diagonal_weight: f64) -> f64 {
        (0..2)
            .map(|c| {
                0.5 * (self.projector[c] + self.nearest[c] + diagonal_weight * self.diagonal[c])
                    - 0.5 * velocity[c] * velocity[c] * self.gram[c]
            })
            .sum()
    }
}

fn idx(s: Sublattice) -> usize {
    match s {
        Sublattice::A => 0,
        Sublattice::B => 1,
    }
}

/// Evaluates observables at one parameter point. The exact backends build
/// their transfer-matrix environment once.
#[derive(Clone, Debug)]
pub struct Evaluator {
    dim: usize,
    backend: Backend,
    params: VariationalParams,
    env: Option<Environment>,
}

impl Evaluator {
    pub fn new(dim: usize, backend: Backend, params: &VariationalParams) -> Result<Self> {
        Self::with_warm_start(dim, backend, params, None)
    }

    /// Reuses the environment of `prev` as the starting vector.
    pub fn with_warm_start(dim: usize, backend: Backend, params: &VariationalParams, prev: Option<&Evaluator>) -> Result<Self> {
        let start = prev.and_then(|e| e.env.as_ref());
        let env = match (backend, dim) {
            (Backend::Exact1d, 1) => Some(Environment::with_start(&Chain::line(), params, &EnvOptions::default(), start)?),
            (Backend::Cylinder { circumference }, 2) => {
                Some(Environment::with_start(&Chain::cylinder(circumference)?, params, &EnvOptions::default(), start)?)
            }
            (Backend::Series { .. }, 1..=3) => None,
            _ => return Err(Error::BackendUnavailable(format!("{} in {dim}D", backend.name()))),
        };
        Ok(Self { dim, backend, params: *params, env })
    }

    pub fn dim(&self) -> usize { self.dim }

    pub fn backend(&self) -> Backend { self.backend }

    pub fn params(&self) -> &VariationalParams { &self.params }

    pub fn environment(&self) -> Option<&Environment> { self.env.as_ref() }

    fn product(&self, p: &Product, anchor: Sublattice) -> Result<C64> {
        match (&self.env, self.backend) {
            (Some(env), _) => env.expect_product(p, anchor),
            (None, Backend::Series { order }) => series::expect_product(self.dim, p, &self.params, anchor, order),
            _ => unreachable!(),
        }
    }

    pub fn expect(&self, spec: &OpSpec, anchor: Sublattice) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for (c, p) in &spec.terms {
            total += c * self.product(p, anchor)?;
        }
        Ok(total)
    }

    /// Real value of a Hermitian expectation; fails on an imaginary residue.
    pub fn real(&self, spec: &OpSpec, anchor: Sublattice) -> Result<f64> {
        let v = self.expect(spec, anchor)?;
        if v.im.abs() > 1e-10 * v.re.abs().max(1.0) {
            return Err(Error::NotReal(v.im));
        }
        Ok(v.re)
    }

    /// Imaginary part of a value that must be purely imaginary.
    pub fn imaginary(&self, spec: &OpSpec, anchor: Sublattice) -> Result<f64> {
        let v = self.expect(spec, anchor)?;
        if v.re.abs() > 1e-10 * v.im.abs().max(1.0) {
            return Err(Error::NotImaginary(v.re));
        }
        Ok(v.im)
    }

    /// Whether the density series is converged at this point; always true
    /// for the exact backends.
    pub fn in_regime(&self) -> Result<bool> {
        match self.backend {
            Backend::Series { order } => {
                let t = enumerate_counting_factors(self.dim, order)?;
                let (a, b) = (self.params.theta(Sublattice::A), self.params.theta(Sublattice::B));
                Ok(truncation_error(&t, a, b) < REGIME_THRESHOLD && truncation_error(&t, b, a) < REGIME_THRESHOLD)
            }
            _ => Ok(true),
        }
    }

    pub fn density(&self, anchor: Sublattice) -> Result<f64> {
        self.real(&OpSpec::number(), anchor)
    }

    pub fn sigma_x(&self, anchor: Sublattice) -> Result<f64> {
        self.real(&OpSpec::sigma_x(), anchor)
    }

    /// `<n_0 n_r>` with the origin on `anchor`.
    pub fn pair(&self, r: Coord, anchor: Sublattice) -> Result<f64> {
        self.real(&OpSpec::number_pair(r), anchor)
    }

    pub fn two_point_connected(&self, r: Coord, anchor: Sublattice) -> Result<f64> {
        let dist = r.iter().map(|a| a.unsigned_abs() as usize).sum::<usize>();
        if let Backend::Series { order } = self.backend {
            if order < dist {
                return Err(Error::OrderTooLow { required: dist });
            }
        }
        let other = if dist % 2 == 0 { anchor } else { anchor.other() };
        Ok(self.pair(r, anchor)? - self.density(anchor)? * self.density(other)?)
    }

    /// `<d_c psi|d_c psi>`
    pub fn gram(&self, anchor: Sublattice) -> Result<f64> {
        self.real(&OpSpec::gram(), anchor)
    }

    /// `<d_c psi| sx_c |psi>`
    pub fn k_term(&self, anchor: Sublattice) -> Result<C64> {
        self.expect(&OpSpec::k_term(), anchor)
    }

    /// `sum_k <d_c psi| sx_{c - e_k} |psi>` over the upstream neighbours.
    pub fn s_term(&self, anchor: Sublattice) -> Result<C64> {
        self.axis_sum(|k| OpSpec::s_term(k), anchor)
    }

    fn axis_sum(&self, op: impl Fn(usize) -> OpSpec, anchor: Sublattice) -> Result<C64> {
        match self.backend {
            // all axes are equivalent for the infinite lattice
            Backend::Series { .. } => Ok(self.expect(&op(0), anchor)? * self.dim as f64),
            _ => (0..self.dim).map(|k| self.expect(&op(k), anchor)).sum(),
        }
    }

    pub fn leakage_terms(&self) -> Result<LeakageTerms> {
        let mut t = LeakageTerms::default();
        for s in [Sublattice::A, Sublattice::B] {
            let c = idx(s);
            t.projector[c] = self.real(&OpSpec::neighbour_projector(self.dim), s)?;
            t.gram[c] = self.gram(s)?;
        }
        // <sx_c P sx_{c-e}> equals <sx_c' P sx_{c'+e}> anchored on the other sublattice
        let forward = |s: Sublattice| -> Result<f64> {
            Ok(self.axis_sum(|k| OpSpec::sigma_x_projected_pair(unit(k)), s)?.re)
        };
        let (fa, fb) = (forward(Sublattice::A)?, forward(Sublattice::B)?);
        t.nearest = [fa + fb, fa + fb];
        for s in [Sublattice::A, Sublattice::B] {
            let mut total = 0.0;
            match self.backend {
                Backend::Series { .. } if self.dim > 1 => {
                    let r = [1, -1, 0];
                    total = (self.dim * (self.dim - 1)) as f64 * self.real(&OpSpec::sigma_x_pair(r), s)?;
                }
                _ => {
                    for k in 0..self.dim {
                        for l in 0..self.dim {
                            if k != l {
                                let (ek, el) = (unit(k), unit(l));
                                let r = [ek[0] - el[0], ek[1] - el[1], ek[2] - el[2]];
                                total += self.real(&OpSpec::sigma_x_pair(r), s)?;
                            }
                        }
                    }
                }
            }
            t.diagonal[idx(s)] = total;
        }
        Ok(t)
    }
}

/// Exponential fit `f(r) = A exp(-r / xi)` of the connected density
/// correlator along the first axis.
#[derive(Clone, Debug)]
pub struct CorrelationFit {
    pub xi: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub points: Vec<(usize, f64)>,
    pub monotonic: bool,
}

pub const NOISE_FLOOR: f64 = 1e-12;

pub fn correlation_length(ev: &Evaluator, r_min: usize, r_max: usize) -> Result<CorrelationFit> {
    let mut points = Vec::new();
    for r in r_min..=r_max {
        let f = ev.two_point_connected([r as i64, 0, 0], Sublattice::A)?;
        if f.abs() > NOISE_FLOOR {
            points.push((r, f));
        }
    }
    if points.len() < 4 {
        return Err(Error::Fit(format!("only {} separations above the noise floor", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::Fit("correlator does not decay".into()));
    }
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let monotonic = points.windows(2).all(|w| w[1].1.abs() < w[0].1.abs());
    Ok(CorrelationFit { xi: -1.0 / slope, amplitude: (my - slope * mx).exp(), r_squared, points, monotonic })
}
