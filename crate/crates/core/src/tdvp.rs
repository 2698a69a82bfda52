//! Time-dependent variational dynamics of the PXP model on the `phi = 0`
//! slice: velocities, trajectories, revival periods and leakage rates.

use std::f64::consts::PI;

use crate::expectation::{Backend, Evaluator, LeakageTerms};
use crate::series::{enumerate_counting_factors, truncation_error, CountingTable};
use crate::{Error, Result, Sublattice, VariationalParams};

pub const DEFAULT_DT: f64 = 1e-3;
/// Round-off allowance for negative `gamma^2`.
pub const GAMMA_CLIP: f64 = 1e-10;
const SINGULAR_GRAM: f64 = 1e-14;
const LIMIT_STEP: f64 = 1e-5;
const LIMIT_GRAM: f64 = 1e-10;
const ROUNDOFF: f64 = 1e3 * f64::EPSILON;

/// `theta_dot_A` of the 1D chain in closed form; `theta_dot_B` follows by
/// exchanging the arguments. Singular on `theta_B = +-pi` unless
/// `sin(theta_A) = 0`; use the numeric backend close to those lines.
pub fn closed_form_1d(ta: f64, tb: f64) -> f64 {
    let (sa, ca) = (ta / 2.0).sin_cos();
    2.0 * ((tb / 2.0).cos() + sa * ca * ca * (tb / 2.0).tan())
}

/// Velocities on the axis `(theta, 0)`.
pub fn axis_velocity(dim: usize, theta: f64) -> [f64; 2] {
    [2.0, 2.0 * (theta / 2.0).cos().powi(dim as i32)]
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Distance on the torus of angles.
pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

/// Velocity field and leakage on one backend.
pub struct Flow {
    pub dim: usize,
    pub backend: Backend,
    /// weight of the diagonal `sx sx` pairs in `gamma^2`
    pub diagonal_weight: f64,
    table: Option<CountingTable>,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub velocity: [f64; 2],
    pub gram: [f64; 2],
    pub gamma: Option<f64>,
}

impl Flow {
    pub fn new(dim: usize, backend: Backend) -> Result<Self> {
        Evaluator::new(dim, backend, &VariationalParams::dynamical(0.1, 0.2))?;
        let table = match backend {
            Backend::Series { order } => Some(enumerate_counting_factors(dim, order)?),
            _ => None,
        };
        Ok(Self { dim, backend, diagonal_weight: 1.0, table })
    }

    pub fn with_diagonal_weight(mut self, w: f64) -> Self {
        self.diagonal_weight = w;
        self
    }

    /// Series truncation at a point; 0 on the exact backends.
    pub fn truncation(&self, ta: f64, tb: f64) -> f64 {
        match &self.table {
            Some(t) => truncation_error(t, ta, tb).max(truncation_error(t, tb, ta)),
            None => 0.0,
        }
    }

    fn evaluator(&self, ta: f64, tb: f64) -> Result<Evaluator> {
        Evaluator::new(self.dim, self.backend, &VariationalParams::dynamical(ta, tb))
    }

    /// Velocities and Gram elements; a component whose Gram element
    /// vanishes is `None`.
    fn raw(ev: &Evaluator) -> Result<([Option<f64>; 2], [f64; 2])> {
        let mut v = [None; 2];
        let mut g = [0.0; 2];
        for (i, s) in [Sublattice::A, Sublattice::B].into_iter().enumerate() {
            g[i] = ev.gram(s)?;
            if g[i] < SINGULAR_GRAM {
                continue;
            }
            let w = ev.k_term(s)? + ev.s_term(s)?;
            if w.re.abs() > 1e-10 * w.im.abs().max(1.0) {
                return Err(Error::NotImaginary(w.re));
            }
            // theta_dot = -i <d psi|H|psi> / G
            v[i] = Some(w.im / g[i]);
        }
        Ok((v, g))
    }

    /// On the lines where a Gram element vanishes the velocity is the
    /// symmetric limit from the neighbouring points.
    fn velocities(&self, ev: &Evaluator) -> Result<([f64; 2], [f64; 2])> {
        let (v, g) = Self::raw(ev)?;
        let (ta, tb) = (ev.params().theta(Sublattice::A), ev.params().theta(Sublattice::B));
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = match v[i] {
                Some(x) => x,
                None => {
                    // G_A vanishes with theta_B = +-pi and vice versa
                    let side = |d: f64| -> Result<f64> {
                        let (a, b) = if i == 0 { (ta, tb + d) } else { (ta + d, tb) };
                        Self::raw(&self.evaluator(a, b)?)?.0[i].ok_or(Error::SingularGram(a, b))
                    };
                    // G ~ (eps/2)^(2D) near the line: keep it well above the floor
                    let eps = LIMIT_STEP.max(2.0 * LIMIT_GRAM.powf(0.5 / self.dim as f64));
                    let avg = |e: f64| -> Result<f64> { Ok(0.5 * (side(e)? + side(-e)?)) };
                    // Richardson: removes the O(eps^2) term of the average
                    (4.0 * avg(eps)? - avg(2.0 * eps)?) / 3.0
                }
            };
        }
        Ok((out, g))
    }

    pub fn velocity(&self, ta: f64, tb: f64) -> Result<[f64; 2]> {
        Ok(self.velocities(&self.evaluator(ta, tb)?)?.0)
    }

    pub fn point(&self, ta: f64, tb: f64, leakage: bool) -> Result<FlowPoint> {
        let ev = self.evaluator(ta, tb)?;
        let (velocity, gram) = self.velocities(&ev)?;
        let gamma = if leakage { Some(gamma_from(&ev.leakage_terms()?, velocity, self.diagonal_weight)?) } else { None };
        Ok(FlowPoint { velocity, gram, gamma })
    }

    pub fn gamma(&self, ta: f64, tb: f64) -> Result<f64> {
        Ok(self.point(ta, tb, true)?.gamma.unwrap())
    }
}

/// `gamma` from the leakage terms, clipping round-off below zero.
pub fn gamma_from(t: &LeakageTerms, velocity: [f64; 2], diagonal_weight: f64) -> Result<f64> {
    let g2 = t.gamma_squared(velocity, diagonal_weight);
    if g2 < -GAMMA_CLIP {
        return Err(Error::NegativeLeakage(g2));
    }
    // gamma^2 is a difference of O(1) terms; below this it is round-off
    let scale: f64 = (0..2)
        .map(|c| {
            t.projector[c].abs()
                + t.nearest[c].abs()
                + (diagonal_weight * t.diagonal[c]).abs()
                + (velocity[c] * velocity[c] * t.gram[c]).abs()
        })
        .sum();
    if g2 < ROUNDOFF * scale {
        return Ok(0.0);
    }
    Ok(g2.sqrt())
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub gamma: Vec<f64>,
    /// trapezoidal integral of `gamma` over the recorded samples
    pub integrated_leakage: f64,
    pub period: Option<f64>,
    /// set when the run stopped early on a backend failure
    pub truncated: Option<String>,
}

fn rk4(flow: &Flow, y: [f64; 2], dt: f64) -> Result<[f64; 2]> {
    let f = |y: [f64; 2]| flow.velocity(y[0], y[1]);
    let k1 = f(y)?;
    let k2 = f([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]])?;
    let k3 = f([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]])?;
    let k4 = f([y[0] + dt * k3[0], y[1] + dt * k3[1]])?;
    Ok([
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Fixed-step RK4 from `start` until `t_max` or until `stop(t, state)`.
/// `gamma` is recorded every `leak_every` steps when nonzero.
pub fn integrate(
    flow: &Flow,
    start: [f64; 2],
    dt: f64,
    t_max: f64,
    leak_every: usize,
    mut stop: impl FnMut(f64, [f64; 2]) -> bool,
) -> Result<Trajectory> {
    if dt <= 0.0 {
        return Err(Error::Fit("time step must be positive".into()));
    }
    let mut tr = Trajectory::default();
    let mut y = start;
    let n = (t_max / dt).round() as usize;
    let mut gamma_samples: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        let t = i as f64 * dt;
        tr.times.push(t);
        tr.states.push(y);
        if leak_every > 0 && i % leak_every == 0 {
            match flow.gamma(y[0], y[1]) {
                Ok(g) => gamma_samples.push((t, g)),
                Err(e) => {
                    tr.truncated = Some(e.to_string());
                    break;
                }
            }
        }
        if i == n || stop(t, y) {
            break;
        }
        match rk4(flow, y, dt) {
            Ok(next) => y = next,
            Err(e) => {
                tr.truncated = Some(e.to_string());
                break;
            }
        }
    }
    tr.gamma = gamma_samples.iter().map(|p| p.1).collect();
    tr.integrated_leakage = gamma_samples.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Ok(tr)
}

/// Time of closest return to `states[0]` after leaving its neighbourhood,
/// refined by a parabola through the squared distances.
pub fn closest_return(tr: &Trajectory, min_time: f64) -> Option<(f64, f64)> {
    let s0 = tr.states[0];
    let d2: Vec<f64> = tr.states.iter().map(|s| torus_distance(*s, s0).powi(2)).collect();
    let mut best: Option<usize> = None;
    for i in 1..d2.len().saturating_sub(1) {
        if tr.times[i] < min_time {
            continue;
        }
        if d2[i] <= d2[i - 1] && d2[i] <= d2[i + 1] {
            if best.map_or(true, |b| d2[i] < d2[b]) {
                best = Some(i);
            }
        }
    }
    let i = best?;
    let h = tr.times[i + 1] - tr.times[i];
    let (a, b, c) = (d2[i - 1], d2[i], d2[i + 1]);
    let curv = a - 2.0 * b + c;
    let off = if curv > 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
    let dmin = (b - 0.125 * (a - c) * (a - c) / curv.max(f64::MIN_POSITIVE)).max(0.0);
    Some((tr.times[i] + off * h, dmin.sqrt()))
}

#[derive(Clone, Debug)]
pub struct OrbitReport {
    pub period: f64,
    /// time at which the orbit reaches `|Z2'>`
    pub half_period: f64,
    /// distance of the half-way point from `|Z2'>` at `(0, pi)`
    pub closure: f64,
    pub integrated_leakage: f64,
    /// the half orbit from `|Z2>` to `|Z2'>`
    pub trajectory: Trajectory,
}

/// Largest accepted distance of the half-way point from `|Z2'>`.
pub const CLOSURE_TOLERANCE: f64 = 1e-2;

/// Revival period and integrated leakage of the orbit through `|Z2>`.
///
/// The orbit starts at `(-pi, 0)` and reaches `|Z2'> = (0, pi)` after half
/// a period; the way back is the sublattice-exchanged image of the way
/// there, so period and leakage are twice those of the first half. For
/// `D > 1` the ansatz has period `4 pi` in each angle, and `(pi, 0)`, which
/// is the same state, is not on the orbit.
pub fn z2_orbit(flow: &Flow, dt: f64, t_max: f64, leak_every: usize) -> Result<OrbitReport> {
    let start = [-PI, 0.0];
    let tr = integrate(flow, start, dt, t_max, leak_every, |_, y| y[1] >= PI)?;
    if let Some(msg) = &tr.truncated {
        return Err(Error::Fit(format!("orbit integration stopped: {msg}")));
    }
    let n = tr.states.len();
    if n < 2 || tr.states[n - 1][1] < PI {
        return Err(Error::NoClosure(t_max));
    }
    let (y0, y1) = (tr.states[n - 2], tr.states[n - 1]);
    let (t0, t1) = (tr.times[n - 2], tr.times[n - 1]);
    let w = (PI - y0[1]) / (y1[1] - y0[1]);
    let half = t0 + w * (t1 - t0);
    let theta_a = y0[0] + w * (y1[0] - y0[0]);
    let closure = theta_a.abs();
    if closure > CLOSURE_TOLERANCE {
        return Err(Error::NoClosure(t_max));
    }
    let integrated_leakage = if leak_every > 0 { 2.0 * leakage_until(&tr, leak_every, half) } else { 0.0 };
    let mut trajectory = tr;
    trajectory.period = Some(2.0 * half);
    trajectory.integrated_leakage = integrated_leakage / 2.0;
    Ok(OrbitReport { period: 2.0 * half, half_period: half, closure, integrated_leakage, trajectory })
}

// trapezoid over the gamma samples, cut at `t_end`
fn leakage_until(tr: &Trajectory, leak_every: usize, t_end: f64) -> f64 {
    let ts: Vec<f64> = (0..tr.gamma.len()).map(|k| tr.times[k * leak_every]).collect();
    let mut total = 0.0;
    for k in 1..ts.len() {
        let (a, b) = (ts[k - 1], ts[k].min(t_end));
        if b > a {
            // linear interpolation of gamma on a partial interval
            let gb = tr.gamma[k - 1] + (tr.gamma[k] - tr.gamma[k - 1]) * (b - a) / (ts[k] - a);
            total += 0.5 * (tr.gamma[k - 1] + gb) * (b - a);
        }
    }
    total
}

/// Radius around `(pi, pi)` at which the diagonal path counts as arrived.
/// In 1D the corner is an attracting fixed point reached only as
/// `t -> infinity`, so the path needs a finite end.
pub const ARRIVAL_RADIUS: f64 = 0.06;

/// Integrated leakage along the path from the origin to `(pi, pi)`, ended
/// at `ARRIVAL_RADIUS`.
pub fn diagonal_path_leakage(flow: &Flow, dt: f64, leak_every: usize) -> Result<(f64, Trajectory)> {
    let corner = |y: [f64; 2]| (PI - y[0]).hypot(PI - y[1]);
    let tr = integrate(flow, [0.0, 0.0], dt, 20.0, leak_every, |_, y| corner(y) <= ARRIVAL_RADIUS || y[0] >= PI)?;
    if let Some(msg) = &tr.truncated {
        return Err(Error::Fit(format!("diagonal path stopped: {msg}")));
    }
    let n = tr.states.len();
    let (d1, d0) = (corner(tr.states[n - 1]), corner(tr.states[n - 2]));
    if d1 > ARRIVAL_RADIUS && tr.states[n - 1][0] < PI {
        return Err(Error::NoClosure(20.0));
    }
    // the last step overshoots the end point; trim it linearly
    let (t0, t1) = (tr.times[n - 2], tr.times[n - 1]);
    let t_end = if tr.states[n - 1][0] >= PI {
        let (y0, y1) = (tr.states[n - 2][0], tr.states[n - 1][0]);
        t0 + (PI - y0) / (y1 - y0) * (t1 - t0)
    } else {
        t0 + (d0 - ARRIVAL_RADIUS) / (d0 - d1) * (t1 - t0)
    };
    let total = leakage_until(&tr, leak_every.max(1), t_end);
    Ok((total, tr))
}

#[derive(Clone, Debug)]
pub struct FlowField {
    pub axis: Vec<f64>,
    /// `points[i][j]` at `(axis[i], axis[j])`; `None` where the backend fails
    pub points: Vec<Vec<Option<FlowPoint>>>,
}

/// Velocities and leakage on an `n x n` grid of cell centres over `[-pi, pi)`.
pub fn flow_field(flow: &Flow, n: usize, leakage: bool) -> FlowField {
    let axis: Vec<f64> = (0..n).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / n as f64).collect();
    let points = axis
        .iter()
        .map(|&a| axis.iter().map(|&b| flow.point(a, b, leakage).ok()).collect())
        .collect();
    FlowField { axis, points }
}
