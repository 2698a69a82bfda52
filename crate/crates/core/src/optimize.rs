//! Thin wrappers around the argmin solvers used for minimization and root
//! finding.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::brent::{BrentOpt, BrentRoot};
use argmin::solver::neldermead::NelderMead;

use crate::{Error, Result};

struct Cost<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Cost<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

struct Scalar<F>(F);

impl<F: Fn(f64) -> f64> CostFunction for Scalar<F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(*p))
    }
}

fn opt_err(e: argmin::core::Error) -> Error {
    Error::Optimizer(e.to_string())
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex of size `step`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iters: u64,
) -> Result<Minimum> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(tol).map_err(opt_err)?;
    let res = Executor::new(Cost(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(opt_err)?;
    let state = res.state();
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    let x = state.get_best_param().cloned().ok_or_else(|| Error::Optimizer("no iterate".into()))?;
    Ok(Minimum { x, value: state.get_best_cost(), converged })
}

/// Nelder-Mead from several starting points; returns the best result.
pub fn nelder_mead_multi(
    f: impl Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    step: f64,
    tol: f64,
    max_iters: u64,
) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    for x0 in starts {
        let m = nelder_mead(&f, x0, step, tol, max_iters)?;
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    best.ok_or_else(|| Error::Optimizer("no starting point".into()))
}

/// Root of `f` in `[a, b]`; the signs at the ends must differ.
pub fn brent_root(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Optimizer(format!("root not bracketed in [{a}, {b}]")));
    }
    let res = Executor::new(Scalar(f), BrentRoot::new(a, b, tol))
        .configure(|s| s.param(0.5 * (a + b)).max_iters(200))
        .run()
        .map_err(opt_err)?;
    res.state().get_best_param().copied().ok_or_else(|| Error::Optimizer("no root".into()))
}

/// Minimum of `f` on `[a, b]`.
pub fn brent_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let solver = BrentOpt::new(a, b).set_tolerance(tol, 1e-14);
    let res = Executor::new(Scalar(f), solver)
        .configure(|s| s.max_iters(500))
        .run()
        .map_err(opt_err)?;
    let state = res.state();
    let x = state.get_best_param().copied().ok_or_else(|| Error::Optimizer("no minimum".into()))?;
    Ok((x, state.get_best_cost()))
}

/// Brackets sign changes of `f` on a uniform grid and refines each root.
pub fn all_roots(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        if ys[i] == 0.0 {
            roots.push(xs[i]);
        } else if ys[i].signum() != ys[i + 1].signum() && ys[i + 1] != 0.0 {
            roots.push(brent_root(&f, xs[i], xs[i + 1], tol)?);
        }
    }
    Ok(roots)
}
