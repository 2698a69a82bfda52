//! Variational energy at `phi_A = phi_B = pi/2`, its minimization and the
//! phase-diagram scans built on it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::expectation::{Backend, Evaluator};
use crate::lattice::{nnn_half_displacements, Coord};
use crate::optimize::{brent_min, brent_root, nelder_mead_multi};
use crate::series::{enumerate_counting_factors, CountingTable};
use crate::{Error, Result, Sublattice, VariationalParams};

pub const GRID: usize = 60;
/// Asymmetry `|theta_A - theta_B|` above which a minimum counts as ordered.
pub const ORDER_EPS: f64 = 1e-4;
pub const JUMP_THRESHOLD: f64 = 0.05;
/// Loose series-convergence cut for line searches; optima are checked
/// against the regime mask separately.
pub const LINE_TRUNCATION: f64 = 0.05;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub delta: f64,
    pub v: f64,
}

impl ModelParams {
    pub fn new(dim: usize, delta: f64, v: f64) -> Self {
        Self { dim, delta, v }
    }
}

/// Which next-nearest-neighbour pairs carry the coupling `V`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NnnPairs {
    /// every pair at distance `2a` (1D) or `sqrt(2) a`: 1, 2, 6 per site
    Geometric,
    /// one diagonal per coordinate plane: 1, 1, 3 per site
    PerPlane,
}

/// `(theta, phi)`-independent pieces of the energy at one point.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EnergyParts {
    /// `(F(A,B) + F(B,A)) / 2`
    pub hopping: f64,
    /// `(n_A + n_B) / 2`
    pub density: f64,
    /// NNN pair sum per site
    pub nnn: f64,
    pub n: [f64; 2],
}

impl EnergyParts {
    pub fn energy(&self, delta: f64, v: f64) -> f64 {
        self.hopping - delta * self.density + v * self.nnn
    }
}

/// Energy landscape of one dimension and backend. Parts are memoized, so
/// scans over `(Delta, V)` reuse earlier evaluations.
pub struct Landscape {
    pub dim: usize,
    pub backend: Backend,
    nnn: Vec<(Coord, f64)>,
    table: Option<CountingTable>,
    regime_threshold: f64,
    enforce_regime: bool,
    memo: RefCell<HashMap<(u64, u64), Option<EnergyParts>>>,
    last: RefCell<Option<Evaluator>>,
}

fn nnn_weights(dim: usize, backend: Backend, pairs: NnnPairs) -> Vec<(Coord, f64)> {
    let mut all = nnn_half_displacements(dim);
    if pairs == NnnPairs::PerPlane && dim > 1 {
        // keep the (e_k - e_l) diagonals, which share an upstream site
        all.retain(|r| r.iter().any(|&x| x < 0));
    }
    match backend {
        Backend::Series { .. } => {
            // axis permutations map every diagonal to one of two shapes
            let mut out: Vec<(Coord, f64)> = Vec::new();
            for r in all {
                let shape: Coord = if dim == 1 {
                    r
                } else if r.iter().any(|&x| x < 0) {
                    [1, -1, 0]
                } else {
                    [1, 1, 0]
                };
                match out.iter_mut().find(|(c, _)| *c == shape) {
                    Some(e) => e.1 += 1.0,
                    None => out.push((shape, 1.0)),
                }
            }
            out
        }
        _ => all.into_iter().map(|r| (r, 1.0)).collect(),
    }
}

impl Landscape {
    pub fn new(dim: usize, backend: Backend) -> Result<Self> {
        Self::with_pairs(dim, backend, NnnPairs::Geometric)
    }

    pub fn with_pairs(dim: usize, backend: Backend, pairs: NnnPairs) -> Result<Self> {
        let table = match backend {
            Backend::Series { order } => Some(enumerate_counting_factors(dim, order)?),
            _ => None,
        };
        // probe the backend once so dimension mismatches surface here
        Evaluator::new(dim, backend, &VariationalParams::real(0.1, 0.2))?;
        Ok(Self {
            dim,
            backend,
            nnn: nnn_weights(dim, backend, pairs),
            table,
            regime_threshold: crate::expectation::REGIME_THRESHOLD,
            enforce_regime: true,
            memo: RefCell::new(HashMap::new()),
            last: RefCell::new(None),
        })
    }

    /// Evaluates the series outside its convergent region as well; callers
    /// check the optimum with [`Landscape::in_regime`].
    pub fn without_regime_wall(mut self) -> Self {
        self.enforce_regime = false;
        self
    }

    /// `|S_N - S_(N-1)|` of the density series at both anchors (0 for the
    /// exact backends).
    pub fn truncation(&self, ta: f64, tb: f64) -> f64 {
        match &self.table {
            Some(t) => crate::series::truncation_error(t, ta, tb).max(crate::series::truncation_error(t, tb, ta)),
            None => 0.0,
        }
    }

    /// Bracket of the disordered symmetric minimum: the negative-theta side,
    /// where the hopping term lowers the energy, cut for the series where the
    /// density series is far from converged.
    pub fn line_bracket(&self) -> (f64, f64) {
        let mut lo = -PI + 1e-3;
        if self.table.is_some() {
            while lo < -0.05 && self.truncation(lo, lo) > LINE_TRUNCATION {
                lo += 0.01;
            }
        }
        (lo, 0.5)
    }

    pub fn in_regime(&self, ta: f64, tb: f64) -> bool {
        match &self.table {
            Some(t) => {
                crate::series::truncation_error(t, ta, tb) < self.regime_threshold
                    && crate::series::truncation_error(t, tb, ta) < self.regime_threshold
            }
            None => true,
        }
    }

    fn compute(&self, ta: f64, tb: f64) -> Result<EnergyParts> {
        if self.enforce_regime && !self.in_regime(ta, tb) {
            return Err(Error::OutsideRegime(ta, tb));
        }
        let p = VariationalParams::new(ta, tb, PI / 2.0, PI / 2.0);
        let prev = self.last.borrow_mut().take();
        let ev = Evaluator::with_warm_start(self.dim, self.backend, &p, prev.as_ref())?;
        let (a, b) = (Sublattice::A, Sublattice::B);
        let n = [ev.density(a)?, ev.density(b)?];
        let hopping = 0.5 * (ev.sigma_x(a)? + ev.sigma_x(b)?);
        let mut nnn = 0.0;
        for (r, w) in &self.nnn {
            nnn += w * 0.5 * (ev.pair(*r, a)? + ev.pair(*r, b)?);
        }
        *self.last.borrow_mut() = Some(ev);
        Ok(EnergyParts { hopping, density: 0.5 * (n[0] + n[1]), nnn, n })
    }

    pub fn parts(&self, ta: f64, tb: f64) -> Result<EnergyParts> {
        let key = (ta.to_bits(), tb.to_bits());
        if let Some(v) = self.memo.borrow().get(&key) {
            return v.ok_or(Error::OutsideRegime(ta, tb));
        }
        let r = self.compute(ta, tb);
        let stored = match &r {
            Ok(p) => Some(*p),
            Err(Error::OutsideRegime(..)) | Err(Error::Degenerate { .. }) => None,
            Err(_) => return r,
        };
        self.memo.borrow_mut().insert(key, stored);
        r
    }

    /// Energy per site.
    pub fn energy(&self, ta: f64, tb: f64, delta: f64, v: f64) -> Result<f64> {
        Ok(self.parts(ta, tb)?.energy(delta, v))
    }

    /// Energy with failures mapped to `+inf`, for the optimizers.
    fn penalized(&self, ta: f64, tb: f64, delta: f64, v: f64) -> f64 {
        self.energy(ta, tb, delta, v).unwrap_or(f64::INFINITY)
    }

    /// Cell centres of the seed grid over `[-pi, pi)`.
    pub fn grid_axis() -> Vec<f64> {
        (0..GRID).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / GRID as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub model: ModelParams,
    /// optimum with `theta_A >= theta_B`; the mirror image is degenerate
    pub theta: (f64, f64),
    pub energy: f64,
    /// `<sz_A> - <sz_B>`
    pub order_parameter: f64,
    pub ordered: bool,
    pub converged: bool,
}

impl PhasePoint {
    pub fn symmetric_pair(&self) -> [(f64, f64); 2] {
        [self.theta, (self.theta.1, self.theta.0)]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.theta.0 - self.theta.1).abs()
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Global minimum: seed grid, then simplex refinement of the best seeds.
pub fn minimize(land: &Landscape, delta: f64, v: f64) -> Result<PhasePoint> {
    let axis = Landscape::grid_axis();
    let mut seeds: Vec<(f64, f64, f64)> = Vec::new();
    for (i, &a) in axis.iter().enumerate() {
        for &b in &axis[..=i] {
            let e = land.penalized(a, b, delta, v);
            if e.is_finite() {
                seeds.push((e, a, b));
            }
        }
    }
    if seeds.is_empty() {
        return Err(Error::Optimizer("no admissible seed point".into()));
    }
    seeds.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let starts: Vec<Vec<f64>> = seeds.iter().take(4).map(|s| vec![s.1, s.2]).collect();
    let f = |x: &[f64]| land.penalized(x[0], x[1], delta, v);
    let m = nelder_mead_multi(f, &starts, 0.05, 1e-12, 4000)?;
    let sym = symmetric_minimum(land, delta, v, m.x[0].min(m.x[1]) - 0.3, m.x[0].max(m.x[1]) + 0.3);
    let (mut ta, mut tb, mut e) = (wrap(m.x[0]), wrap(m.x[1]), m.value);
    // a symmetric optimum is resolved more accurately on the diagonal
    if let Ok((t, es)) = sym {
        if es <= e + 1e-12 {
            ta = t;
            tb = t;
            e = es;
        }
    }
    if ta < tb {
        std::mem::swap(&mut ta, &mut tb);
    }
    let parts = land.parts(ta, tb)?;
    let ordered = (ta - tb).abs() > ORDER_EPS;
    Ok(PhasePoint {
        model: ModelParams::new(land.dim, delta, v),
        theta: (ta, tb),
        energy: e,
        order_parameter: if ordered { 2.0 * (parts.n[0] - parts.n[1]).abs() } else { 0.0 },
        ordered,
        converged: m.converged,
    })
}

/// Grid scan of `f` on `[lo, hi]` followed by Brent refinement around the
/// best finite sample; tolerates `+inf` outside the admissible region.
fn scan_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<(f64, f64)> {
    let step = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|i| lo + step * i as f64)
        .map(|x| (x, f(x)))
        .filter(|p| p.1.is_finite())
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or_else(|| Error::Optimizer("no admissible point on the line".into()))?;
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    if !(f(a).is_finite() && f(b).is_finite()) {
        return Ok(best);
    }
    let r = brent_min(&f, a, b, 1e-10)?;
    Ok(if r.1 <= best.1 { r } else { best })
}

/// Minimum along `theta_A = theta_B` in `[lo, hi]`.
pub fn symmetric_minimum(land: &Landscape, delta: f64, v: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    scan_min(|t| land.penalized(t, t, delta, v), lo.max(-PI), hi.min(PI), 64)
}

/// `E_min(zeta) = min_t E(t + zeta/2, t - zeta/2)` near the symmetric optimum `t0`.
pub fn constrained_minimum(land: &Landscape, delta: f64, v: f64, zeta: f64, t0: f64) -> Result<f64> {
    let h = 0.5 * zeta;
    Ok(scan_min(|t| land.penalized(t + h, t - h, delta, v), t0 - 0.2, t0 + 0.2, 16)?.1)
}

/// Landau coefficients `E_min(zeta) = E_0 + a2 zeta^2 + a4 zeta^4 + ...`
/// about the symmetric branch.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Landau {
    pub t0: f64,
    pub e0: f64,
    pub a2: f64,
    pub a4: f64,
}


pub fn landau(land: &Landscape, delta: f64, v: f64, h: f64) -> Result<Landau> {
    let (lo, hi) = land.line_bracket();
    let (t0, e0) = symmetric_minimum(land, delta, v, lo, hi)?;
    // exact fit of a2, a4, a6 to zeta = h, 2h, 3h
    let mut d = [0.0; 3];
    for (k, dk) in d.iter_mut().enumerate() {
        let z = (k + 1) as f64 * h;
        *dk = (constrained_minimum(land, delta, v, z, t0)? - e0) / (z * z);
    }
    let h2 = h * h;
    let a4 = (-13.0 * d[0] + 16.0 * d[1] - 3.0 * d[2]) / (24.0 * h2);
    let a2 = 1.5 * d[0] - 0.6 * d[1] + 0.1 * d[2];
    Ok(Landau { t0, e0, a2, a4 })
}

const LANDAU_STEP: f64 = 0.04;

/// `Delta` where the symmetric branch loses stability (`a2 = 0`).
pub fn spinodal(land: &Landscape, v: f64, lo: f64, hi: f64) -> Result<f64> {
    let a2 = |d: f64| landau(land, d, v, LANDAU_STEP).map(|l| l.a2).unwrap_or(f64::NAN);
    let (fa, fb) = (a2(lo), a2(hi));
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::NoTransition);
    }
    brent_root(a2, lo, hi, 1e-9)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TransitionOrder {
    Second,
    First,
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub v: f64,
    pub delta_c: f64,
    pub order: TransitionOrder,
    /// `|theta_A - theta_B|` just above `delta_c`
    pub jump: f64,
    pub a4: f64,
}

/// Whether the global minimum is ordered at `delta`.
fn ordered_at(land: &Landscape, delta: f64, v: f64) -> Result<(bool, f64)> {
    let p = minimize(land, delta, v)?;
    Ok((p.ordered, p.asymmetry()))
}

/// Locates the transition at fixed `V` inside `[lo, hi]` and classifies it.
pub fn transition_scan(land: &Landscape, v: f64, lo: f64, hi: f64) -> Result<Transition> {
    let (o_lo, _) = ordered_at(land, lo, v)?;
    let (o_hi, _) = ordered_at(land, hi, v)?;
    if o_lo || !o_hi {
        return Err(Error::NoTransition);
    }
    // first point where the global minimum is ordered
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-5 {
        let m = 0.5 * (a + b);
        if ordered_at(land, m, v)?.0 { b = m } else { a = m }
    }
    let (_, jump) = ordered_at(land, b, v)?;
    // a first-order switch happens while the symmetric branch is still
    // locally stable; a continuous one starts exactly at the spinodal
    let l = landau(land, a, v, LANDAU_STEP)?;
    if l.a2 > 0.0 && jump > JUMP_THRESHOLD {
        return Ok(Transition { v, delta_c: 0.5 * (a + b), order: TransitionOrder::First, jump, a4: l.a4 });
    }
    let dc = spinodal(land, v, a - 0.05, b + 0.05).unwrap_or(0.5 * (a + b));
    let a4 = landau(land, dc, v, LANDAU_STEP)?.a4;
    Ok(Transition { v, delta_c: dc, order: TransitionOrder::Second, jump, a4 })
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Tricritical {
    pub v: f64,
    pub delta: f64,
}

/// Quartic coefficient on the spinodal line.
pub fn quartic_on_spinodal(land: &Landscape, v: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let d = spinodal(land, v, lo, hi)?;
    Ok((d, landau(land, d, v, LANDAU_STEP)?.a4))
}

/// Tricritical point: the `V` where the quartic coefficient on the spinodal
/// changes sign. `delta_range` must bracket the spinodal for every `V`.
pub fn tricritical_scan(land: &Landscape, v_lo: f64, v_hi: f64, delta_range: (f64, f64)) -> Result<Tricritical> {
    let q = |v: f64| quartic_on_spinodal(land, v, delta_range.0, delta_range.1).map(|x| x.1).unwrap_or(f64::NAN);
    let (qa, qb) = (q(v_lo), q(v_hi));
    if !(qa.is_finite() && qb.is_finite()) || qa.signum() == qb.signum() {
        return Err(Error::NoTransition);
    }
    let v = brent_root(q, v_lo, v_hi, 1e-6)?;
    let (d, _) = quartic_on_spinodal(land, v, delta_range.0, delta_range.1)?;
    Ok(Tricritical { v, delta: d })
}

#[derive(Clone, Debug)]
pub struct ExponentFit {
    pub beta: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Power-law fit `|theta_A - theta_B| ~ (Delta - Delta_c)^beta` over the
/// distances `offsets` above `delta_c`.
pub fn critical_exponent(land: &Landscape, v: f64, delta_c: f64, offsets: &[f64]) -> Result<ExponentFit> {
    if offsets.len() < 6 {
        return Err(Error::Fit(format!("{} points, at least 6 needed", offsets.len())));
    }
    let mut points = Vec::new();
    for &x in offsets {
        let p = minimize(land, delta_c + x, v)?;
        if p.asymmetry() > 0.0 {
            points.push((x, p.asymmetry()));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = sxy * sxy / (sxx * syy);
    let fit = ExponentFit { beta: sxy / sxx, r_squared, points };
    if r_squared < 0.99 {
        return Err(Error::Fit(format!("power law R^2 = {r_squared:.4}")));
    }
    Ok(fit)
}
