//! Exact diagonalization of the blockade-constrained spin model on small
//! finite lattices.
//!
//! Hamiltonian: `H = sum_i (prod_{j in N(i)} P_j) sx_i - Delta sum_i n_i
//! + V sum_<<ij>> n_i n_j` with `P = |down><down|` and `n = |up><up|`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use pxp_core::lattice::{Lattice, SiteGraph};
use pxp_core::Sublattice;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rustc_hash::FxHashMap;

pub mod revival;

pub use revival::{fidelity_maxima, revival_period, Revival, REVIVAL_THRESHOLD};

/// Default cap on the number of constrained basis states.
pub const BASIS_BUDGET: usize = 5_000_000;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("basis exceeds budget {budget}: about {estimate:.2e} states on {sites} sites")]
    Budget { budget: usize, estimate: f64, sites: usize },
    #[error("vector length {got} does not match basis size {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("eigensolver not converged after {restarts} restarts (residual {residual:.2e})")]
    NotConverged { restarts: usize, residual: f64 },
    #[error("no fidelity maximum above {threshold} before t = {t_max}")]
    NoRevival { threshold: f64, t_max: f64 },
    #[error("{0}")]
    Lattice(#[from] pxp_core::Error),
    #[error("lattice of {0} sites is too large for 64-bit configurations")]
    TooManySites(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Model {
    pub delta: f64,
    pub v: f64,
}

impl Model {
    pub const PXP: Model = Model { delta: 0.0, v: 0.0 };

    pub fn new(delta: f64, v: f64) -> Self {
        Self { delta, v }
    }
}

/// Admissible configurations: bit `i` set means site `i` is up.
#[derive(Clone, Debug)]
pub struct ConstrainedBasis {
    graph: SiteGraph,
    states: Vec<u64>,
    index: FxHashMap<u64, usize>,
    masks: Vec<u64>,
}

pub fn build_basis(lattice: &Lattice) -> Result<ConstrainedBasis> {
    build_basis_with_budget(&lattice.graph()?, BASIS_BUDGET)
}

/// Depth-first enumeration in site order; a site may be up only if no
/// earlier neighbour is up.
pub fn build_basis_with_budget(graph: &SiteGraph, budget: usize) -> Result<ConstrainedBasis> {
    let n = graph.n_sites();
    if n > 64 {
        return Err(Error::TooManySites(n));
    }
    let masks: Vec<u64> = graph.neighbors.iter().map(|ns| ns.iter().fold(0, |m, &j| m | 1 << j)).collect();
    let mut states = Vec::new();
    let mut stack = vec![(0usize, 0u64)];
    while let Some((site, cfg)) = stack.pop() {
        if site == n {
            states.push(cfg);
            if states.len() > budget {
                let estimate = estimate_basis_size(graph, ESTIMATE_PATHS).max(states.len() as f64);
                return Err(Error::Budget { budget, estimate, sites: n });
            }
            continue;
        }
        stack.push((site + 1, cfg));
        if cfg & masks[site] == 0 {
            stack.push((site + 1, cfg | 1 << site));
        }
    }
    states.sort_unstable();
    let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    Ok(ConstrainedBasis { graph: graph.clone(), states, index, masks })
}

const ESTIMATE_PATHS: usize = 4096;

/// Knuth's estimate of the number of leaves of the enumeration tree: the
/// mean over random root-to-leaf paths of the product of branching factors.
pub fn estimate_basis_size(graph: &SiteGraph, paths: usize) -> f64 {
    let masks: Vec<u64> = graph.neighbors.iter().map(|ns| ns.iter().fold(0, |m, &j| m | 1 << j)).collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut total = 0.0;
    for _ in 0..paths {
        let (mut cfg, mut w) = (0u64, 1.0);
        for (site, &mask) in masks.iter().enumerate() {
            if cfg & mask == 0 {
                w *= 2.0;
                if rng.gen::<bool>() {
                    cfg |= 1 << site;
                }
            }
        }
        total += w;
    }
    total / paths.max(1) as f64
}

impl ConstrainedBasis {
    pub fn len(&self) -> usize { self.states.len() }

    pub fn is_empty(&self) -> bool { self.states.is_empty() }

    pub fn n_sites(&self) -> usize { self.graph.n_sites() }

    pub fn graph(&self) -> &SiteGraph { &self.graph }

    pub fn states(&self) -> &[u64] { &self.states }

    pub fn index_of(&self, cfg: u64) -> Option<usize> {
        self.index.get(&cfg).copied()
    }

    pub fn is_admissible(&self, cfg: u64) -> bool {
        (0..self.n_sites()).all(|i| cfg >> i & 1 == 0 || cfg & self.masks[i] == 0)
    }

    /// Product state with every site of `up` excited.
    pub fn z2(&self, up: Sublattice) -> Vec<f64> {
        let cfg = (0..self.n_sites()).filter(|&i| self.graph.sublattice[i] == up).fold(0u64, |m, i| m | 1 << i);
        let mut v = vec![0.0; self.len()];
        v[self.index_of(cfg).expect("Neel state is admissible")] = 1.0;
        v
    }

    /// `(|Z2> + |Z2'>) / sqrt 2`
    pub fn cat_state(&self) -> Vec<f64> {
        let a = self.z2(Sublattice::A);
        let b = self.z2(Sublattice::B);
        a.iter().zip(&b).map(|(x, y)| (x + y) * FRAC_1_SQRT_2).collect()
    }

    pub fn vacuum(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[self.index_of(0).unwrap()] = 1.0;
        v
    }
}

/// Hamiltonian on a constrained basis. Flip targets are resolved once; the
/// action itself is matrix-free over these lists.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    diag: Vec<f64>,
    flips: Vec<Vec<u32>>,
}

impl Hamiltonian {
    pub fn new(basis: &ConstrainedBasis, model: Model) -> Self {
        let g = basis.graph();
        let (diag, flips) = basis
            .states
            .par_iter()
            .map(|&s| {
                let ups = s.count_ones() as f64;
                let nnn = g.nnn_pairs.iter().filter(|&&(i, j)| s >> i & 1 == 1 && s >> j & 1 == 1).count() as f64;
                let mut row = Vec::new();
                for i in 0..g.n_sites() {
                    if s & basis.masks[i] == 0 {
                        let t = s ^ 1 << i;
                        // closure of the constrained space under the PXP move
                        let j = basis.index_of(t).expect("flip left the constrained space");
                        row.push(j as u32);
                    }
                }
                (-model.delta * ups + model.v * nnn, row)
            })
            .unzip();
        Self { diag, flips }
    }

    pub fn dim(&self) -> usize { self.diag.len() }

    pub fn diagonal(&self) -> &[f64] { &self.diag }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(self.act(v))
    }

    pub fn apply_complex(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check(v.len())?;
        Ok(self.act(v))
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got });
        }
        Ok(())
    }

    fn act<T>(&self, v: &[T]) -> Vec<T>
    where
        T: Copy + Send + Sync + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        (0..self.dim())
            .into_par_iter()
            .map(|i| self.flips[i].iter().fold(v[i] * self.diag[i], |acc, &j| acc + v[j as usize]))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    /// Second Ritz value; a near-degenerate pair is flagged when the gap is
    /// below `DEGENERACY_GAP`.
    pub next: f64,
    pub degenerate: bool,
    pub residual: f64,
}

pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Copy, Clone, Debug)]
pub struct LanczosOptions {
    pub krylov: usize,
    pub restarts: usize,
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { krylov: 60, restarts: 200, tol: 1e-11 }
    }
}

/// Restarted Lanczos with full reorthogonalization; each restart begins from
/// the current lowest Ritz vector.
pub fn ground_state(h: &Hamiltonian, opts: &LanczosOptions) -> Result<GroundState> {
    let n = h.dim();
    if n == 1 {
        return Ok(GroundState { energy: h.diag[0], vector: vec![1.0], next: f64::INFINITY, degenerate: false, residual: 0.0 });
    }
    // deterministic start with weight on every state
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    normalize(&mut x);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.restarts {
        let m = opts.krylov.min(n);
        let mut basis = vec![x.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for k in 0..m {
            let mut w = h.act(&basis[k]);
            alpha.push(dot(&w, &basis[k]));
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let b = dot(&w, &w).sqrt();
            if k + 1 == m || b < 1e-14 {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|a| *a /= b);
            basis.push(w);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| match i as i64 - j as i64 {
            0 => alpha[i],
            1 => beta[j],
            -1 => beta[i],
            _ => 0.0,
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (lo, next) = (order[0], order.get(1).copied());
        let mut y = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            let c = eig.eigenvectors[(j, lo)];
            y.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
        }
        normalize(&mut y);
        let e = eig.eigenvalues[lo];
        let hy = h.act(&y);
        residual = hy.iter().zip(&y).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        x = y;
        if residual < opts.tol {
            let next = next.map_or(f64::INFINITY, |j| eig.eigenvalues[j]);
            return Ok(GroundState { energy: e, vector: x, next, degenerate: next - e < DEGENERACY_GAP, residual });
        }
    }
    Err(Error::NotConverged { restarts: opts.restarts, residual })
}

/// `F = (1 - |<GS(Delta)|GS(Delta + d)>|) / d^2`
pub fn fidelity_susceptibility(basis: &ConstrainedBasis, model: Model, d: f64) -> Result<f64> {
    let opts = LanczosOptions::default();
    let a = ground_state(&Hamiltonian::new(basis, model), &opts)?;
    let b = ground_state(&Hamiltonian::new(basis, Model { delta: model.delta + d, ..model }), &opts)?;
    Ok((1.0 - dot(&a.vector, &b.vector).abs()) / (d * d))
}

#[derive(Copy, Clone, Debug)]
pub struct KrylovOptions {
    pub min_dim: usize,
    pub max_dim: usize,
    /// Local error bound per step.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { min_dim: 20, max_dim: 40, tol: 1e-10 }
    }
}

/// `exp(-i H dt) v` by a Lanczos projection. Returns the propagated vector
/// and the a posteriori error estimate.
fn krylov_step(h: &Hamiltonian, v: &[C64], dt: f64, dim: usize) -> (Vec<C64>, f64) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|z| z / norm).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut tail = 0.0;
    for k in 0..dim {
        let mut w = h.act(&basis[k]);
        let a: C64 = w.iter().zip(&basis[k]).map(|(x, y)| y.conj() * x).sum();
        alpha.push(a.re);
        for q in &basis {
            let c: C64 = w.iter().zip(q).map(|(x, y)| y.conj() * x).sum();
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if b < 1e-13 {
            break;
        }
        if k + 1 == dim {
            tail = b;
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| match i as i64 - j as i64 {
        0 => alpha[i],
        1 => beta[j],
        -1 => beta[i],
        _ => 0.0,
    });
    let eig = SymmetricEigen::new(t);
    // c = exp(-i T dt) e_1
    let c: Vec<C64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| eig.eigenvectors[(i, j)] * eig.eigenvectors[(0, j)] * C64::from_polar(1.0, -eig.eigenvalues[j] * dt))
                .sum()
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (cj, q) in c.iter().zip(&basis) {
        out.iter_mut().zip(q).for_each(|(x, y)| *x += cj * y * norm);
    }
    (out, tail * c[m - 1].norm() * norm)
}

/// Propagates `v` by `t` with adaptive substeps so that every substep meets
/// the local error bound.
pub fn evolve(h: &Hamiltonian, v: &[C64], t: f64, opts: &KrylovOptions) -> Result<Vec<C64>> {
    h.check(v.len())?;
    let mut state = v.to_vec();
    let mut done = 0.0;
    let mut dt = t;
    while done < t - 1e-15 {
        dt = dt.min(t - done);
        let mut accepted = None;
        for dim in [opts.min_dim, opts.max_dim] {
            let (next, err) = krylov_step(h, &state, dt, dim.min(h.dim()));
            if err < opts.tol {
                accepted = Some(next);
                break;
            }
        }
        match accepted {
            Some(next) => {
                state = next;
                done += dt;
            }
            None => dt *= 0.5,
        }
    }
    Ok(state)
}

/// `|<psi0|psi(t)>|` and the norm of `psi(t)` on an increasing time grid,
/// both relative to the norm of `psi0`.
#[derive(Clone, Debug)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub norm: Vec<f64>,
}

pub fn time_evolve(h: &Hamiltonian, initial: &[f64], times: &[f64], opts: &KrylovOptions) -> Result<FidelitySeries> {
    h.check(initial.len())?;
    let psi0: Vec<C64> = initial.iter().map(|&x| C64::new(x, 0.0)).collect();
    let n0: f64 = initial.iter().map(|x| x * x).sum();
    let mut state = psi0.clone();
    let mut now = 0.0;
    let mut out = FidelitySeries { times: times.to_vec(), fidelity: Vec::new(), norm: Vec::new() };
    for &t in times {
        if t > now {
            state = evolve(h, &state, t - now, opts)?;
            now = t;
        }
        let ov: C64 = psi0.iter().zip(&state).map(|(a, b)| a.conj() * b).sum();
        out.fidelity.push(ov.norm() / n0);
        out.norm.push((state.iter().map(|z| z.norm_sqr()).sum::<f64>() / n0).sqrt());
    }
    Ok(out)
}
