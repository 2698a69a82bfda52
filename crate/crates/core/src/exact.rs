//! Exact contraction of the ansatz on the infinite chain and on the infinite
//! helical cylinder, plus brute-force tools for small finite lattices.
//!
//! Sites are visited along a single index `k`. In 1D the upstream neighbour
//! of `k` is `k - 1`; on a helical cylinder of circumference `L` the upstream
//! neighbours are `k - 1` and `k - (L - 1)`, so that a displacement `(dx, dy)`
//! maps to the index shift `dx (L - 1) + dy`. The transfer state is the ket
//! and bra spins of the last `W` sites, `W` being the largest offset.

use nalgebra::{DMatrix, DVector};

use crate::insertion::{OpSpec, Product, SiteFactors, SiteOp};
use crate::lattice::{Coord, SiteGraph};
use crate::optimize::nelder_mead_multi;
use crate::tensors::site_tensor;
use crate::{Error, Result, Sublattice, VariationalParams, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

pub const MIN_CIRCUMFERENCE: usize = 4;
pub const MAX_CIRCUMFERENCE: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    offsets: Vec<usize>,
    circumference: Option<usize>,
}

impl Chain {
    pub fn line() -> Self {
        Self { offsets: vec![1], circumference: None }
    }

    pub fn cylinder(l: usize) -> Result<Self> {
        if l % 2 == 1 || !(MIN_CIRCUMFERENCE..=MAX_CIRCUMFERENCE).contains(&l) {
            return Err(Error::InvalidLattice(format!(
                "circumference must be even and in [{MIN_CIRCUMFERENCE}, {MAX_CIRCUMFERENCE}], got {l}"
            )));
        }
        Ok(Self { offsets: vec![1, l - 1], circumference: Some(l) })
    }

    pub fn dim(&self) -> usize {
        if self.circumference.is_some() { 2 } else { 1 }
    }

    pub fn offsets(&self) -> &[usize] { &self.offsets }

    pub fn circumference(&self) -> Option<usize> { self.circumference }

    /// Number of frontier spins carried by the transfer state.
    pub fn width(&self) -> usize {
        *self.offsets.iter().max().unwrap()
    }

    fn mask(&self) -> u32 {
        (1u32 << self.width()) - 1
    }

    fn up_mask(&self) -> u32 {
        self.offsets.iter().fold(0, |m, &o| m | 1 << (o - 1))
    }

    pub fn index_offset(&self, r: &Coord) -> Result<i64> {
        match self.circumference {
            None if r[1] == 0 && r[2] == 0 => Ok(r[0]),
            Some(l) if r[2] == 0 => Ok(r[0] * (l as i64 - 1) + r[1]),
            _ => Err(Error::UnsupportedDimension(3)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnvOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Upper bound in bytes on a single transfer vector.
    pub memory_budget: u64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_sweeps: 100_000, memory_budget: 1 << 28 }
    }
}

/// Transfer operator of one two-site unit cell acting on frontier
/// distributions from the left.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    chain: Chain,
    factors: [SiteFactors; 2],
}

impl TransferMatrix {
    pub fn new(chain: &Chain, params: &VariationalParams) -> Self {
        Self { chain: chain.clone(), factors: SiteFactors::pair(params) }
    }

    pub fn dimension(&self) -> usize {
        1 << self.chain.width()
    }

    fn site_step(&self, v: &[f64], out: &mut [f64], sub: usize) {
        let (mask, up) = (self.chain.mask(), self.chain.up_mask());
        let m = &self.factors[sub].markov;
        out.fill(0.0);
        for (f, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = m[(f as u32 & up != 0) as usize];
            let base = ((f as u32) << 1 & mask) as usize;
            out[base] += w * row[0];
            out[base | 1] += w * row[1];
        }
    }

    /// `v T_A T_B`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut tmp = vec![0.0; v.len()];
        let mut out = vec![0.0; v.len()];
        self.site_step(v, &mut tmp, 0);
        self.site_step(&tmp, &mut out, 1);
        out
    }

    /// Dense matrix `T[f][g]` of the unit cell; small widths only.
    pub fn dense(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dimension();
        if n > 1 << 10 {
            return Err(Error::SizeGuard { what: "dense transfer matrix", size: n as u64, limit: 1 << 10 });
        }
        Ok((0..n)
            .map(|f| {
                let mut e = vec![0.0; n];
                e[f] = 1.0;
                self.apply(&e)
            })
            .collect())
    }
}

/// Stationary left environment of the transfer matrix, ready for
/// operator insertions.
#[derive(Clone, Debug)]
pub struct Environment {
    chain: Chain,
    factors: [SiteFactors; 2],
    left: Vec<f64>,
    /// Modulus of the subleading eigenvalue of the two-site transfer matrix.
    pub lambda2: f64,
    pub sweeps: usize,
}

fn seeded_zero_sum(n: usize) -> Vec<f64> {
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|a| *a -= mean);
    v
}

/// Gap below which the power iteration hands over to a dense solve.
const SLOW_GAP: f64 = 1e-4;

/// Stationary left vector from `pi (T - 1) = 0`, `sum pi = 1`. `None` when
/// the fixed point is not unique.
fn stationary_dense(tm: &TransferMatrix) -> Option<Vec<f64>> {
    let t = tm.dense().ok()?;
    let n = t.len();
    // row f of `dense` is e_f T, so the transposed system is M[g][f] = T[f][g] - delta
    let mut m = DMatrix::from_fn(n, n, |g, f| t[f][g] - if f == g { 1.0 } else { 0.0 });
    for f in 0..n {
        m[(n - 1, f)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = m.clone().full_piv_lu();
    let pi = lu.solve(&rhs)?;
    let res = (&m * &pi - &rhs).amax();
    let diag = lu.u().diagonal().amin();
    if res > 1e-10 || diag < 1e-13 || pi.iter().any(|&p| p < -1e-10) {
        return None;
    }
    Some(pi.iter().map(|&p| p.max(0.0)).collect())
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

impl Environment {
    pub fn new(chain: &Chain, params: &VariationalParams, opts: &EnvOptions) -> Result<Self> {
        Self::with_start(chain, params, opts, None)
    }

    /// As [`Environment::new`], starting the power iteration from `start`
    /// (usually the environment at nearby parameters).
    pub fn with_start(
        chain: &Chain,
        params: &VariationalParams,
        opts: &EnvOptions,
        start: Option<&Environment>,
    ) -> Result<Self> {
        let n = 1usize << chain.width();
        let bytes = (n as u64) * 16;
        if bytes > opts.memory_budget {
            return Err(Error::SizeGuard { what: "transfer vector bytes", size: bytes, limit: opts.memory_budget });
        }
        let tm = TransferMatrix::new(chain, params);
        if n == 2 {
            // two-state chain: stationary vector and gap in closed form
            let t = tm.dense()?;
            let lambda2 = t[0][0] + t[1][1] - 1.0;
            if lambda2.abs() > 1.0 - 1e-12 {
                return Err(Error::Degenerate { lambda1: 1.0, lambda2 });
            }
            let z = t[0][1] + t[1][0];
            let left = vec![t[1][0] / z, t[0][1] / z];
            return Ok(Self { chain: chain.clone(), factors: tm.factors, left, lambda2: lambda2.abs(), sweeps: 0 });
        }
        let mut pi = match start {
            Some(e) if e.chain == *chain => e.left.clone(),
            _ => vec![1.0 / n as f64; n],
        };
        let mut w = seeded_zero_sum(n);
        let wn = l1(&w);
        w.iter_mut().for_each(|a| *a /= wn);
        let mut log_ratios: Vec<f64> = Vec::new();
        let mut rho = 0.0;
        let mut dead = false;
        for sweep in 1..=opts.max_sweeps {
            let next = tm.apply(&pi);
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            let norm: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|a| *a /= norm);

            w = tm.apply(&w);
            let drift: f64 = w.iter().sum();
            w.iter_mut().zip(&pi).for_each(|(a, p)| *a -= drift * p);
            let wn = l1(&w);
            if wn < 1e-13 {
                dead = true;
            }
            if dead {
                rho = 0.0;
            } else {
                w.iter_mut().for_each(|a| *a /= wn);
                log_ratios.push(wn.ln());
                let tail = &log_ratios[log_ratios.len().saturating_sub(16)..];
                rho = (tail.iter().sum::<f64>() / tail.len() as f64).exp();
            }
            let settled = sweep >= 16 + chain.width() && (dead || log_ratios.len() >= 16);
            if settled && rho > 1.0 - SLOW_GAP {
                // too slow to iterate; solve for the fixed point directly
                let left = stationary_dense(&tm).ok_or(Error::Degenerate { lambda1: 1.0, lambda2: rho })?;
                return Ok(Self { chain: chain.clone(), factors: tm.factors, left, lambda2: rho, sweeps: sweep });
            }
            if settled && diff <= opts.tol * (1.0 - rho).max(1e-6) {
                return Ok(Self { chain: chain.clone(), factors: tm.factors, left: pi, lambda2: rho, sweeps: sweep });
            }
        }
        let left = stationary_dense(&tm).ok_or(Error::Degenerate { lambda1: 1.0, lambda2: rho })?;
        Ok(Self { chain: chain.clone(), factors: tm.factors, left, lambda2: rho, sweeps: opts.max_sweeps })
    }

    pub fn chain(&self) -> &Chain { &self.chain }

    pub fn left(&self) -> &[f64] { &self.left }

    /// Correlation length in two-site steps along the transfer direction.
    pub fn correlation_length(&self) -> f64 {
        if self.lambda2 <= 0.0 { 0.0 } else { -1.0 / self.lambda2.ln() }
    }

    pub fn expect(&self, spec: &OpSpec, anchor: Sublattice) -> Result<C64> {
        let mut total = ZERO;
        for (c, p) in &spec.terms {
            total += c * self.expect_product(p, anchor)?;
        }
        Ok(total)
    }

    pub fn expect_product(&self, p: &Product, anchor: Sublattice) -> Result<C64> {
        let (specials, _) = place(&self.chain, p, anchor, 0)?;
        let end = specials.last().map_or(0, |s| s.0) + self.chain.width();
        let init = vec![(0u32, self.left.iter().map(|&a| C64::new(a, 0.0)).collect::<Vec<_>>())];
        let states = run(&self.chain, &self.factors, &specials, init, 0, end + 1);
        Ok(states.iter().flat_map(|(_, v)| v.iter()).sum())
    }
}

/// Positions of the product's sites on the index line, sorted, with the
/// anchor parity fixed by its sublattice and the smallest position
/// `>= lowest`.
fn place(chain: &Chain, p: &Product, anchor: Sublattice, lowest: i64) -> Result<(Vec<(usize, SiteOp)>, i64)> {
    let mut idx = Vec::with_capacity(p.sites.len());
    for (r, op) in &p.sites {
        idx.push((chain.index_offset(r)?, *op));
    }
    idx.sort_by_key(|a| a.0);
    if idx.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidLattice("two insertion sites coincide on the helix".into()));
    }
    let min = idx.first().map_or(0, |a| a.0);
    let par = match anchor { Sublattice::A => 0, Sublattice::B => 1 };
    let mut base = lowest - min;
    if (base - par).rem_euclid(2) == 1 {
        base += 1;
    }
    Ok((idx.into_iter().map(|(k, op)| ((k + base) as usize, op)).collect(), base))
}

type States = Vec<(u32, Vec<C64>)>;

/// Advances ket/bra transfer states over sites `from..to`. A state is keyed
/// by `d = ket XOR bra` frontier bits and stores a dense vector over the ket
/// frontier.
fn run(chain: &Chain, factors: &[SiteFactors; 2], specials: &[(usize, SiteOp)], mut states: States, from: usize, to: usize) -> States {
    let (mask, up) = (chain.mask(), chain.up_mask());
    let n = 1usize << chain.width();
    let mut sp = specials.iter().peekable();
    for k in from..to {
        while sp.peek().is_some_and(|s| s.0 < k) {
            sp.next();
        }
        let op = sp.peek().filter(|s| s.0 == k).map(|s| &s.1);
        let fac = &factors[k % 2];
        let mut next: States = Vec::with_capacity(states.len() * 2);
        let slot = |nd: u32, next: &mut States| -> usize {
            match next.iter().position(|s| s.0 == nd) {
                Some(i) => i,
                None => {
                    next.push((nd, vec![ZERO; n]));
                    next.len() - 1
                }
            }
        };
        for (d, v) in &states {
            let d = *d;
            let shifted = (d << 1) & mask;
            for (fx, &w) in v.iter().enumerate() {
                if w == ZERO {
                    continue;
                }
                let fx = fx as u32;
                let fy = fx ^ d;
                let xb = fx & up != 0;
                let yb = fy & up != 0;
                let base = (fx << 1) & mask;
                match op {
                    None => {
                        let i = slot(shifted, &mut next);
                        for z in 0..2u32 {
                            let wt = fac.weight(None, z, z, xb, yb);
                            if wt != ZERO {
                                next[i].1[(base | z) as usize] += w * wt;
                            }
                        }
                    }
                    Some(o) => {
                        for x in 0..2u32 {
                            for y in 0..2u32 {
                                let wt = fac.weight(Some(o), x, y, xb, yb);
                                if wt == ZERO {
                                    continue;
                                }
                                let i = slot(shifted | (x ^ y), &mut next);
                                next[i].1[(base | x) as usize] += w * wt;
                            }
                        }
                    }
                }
            }
        }
        states = next;
    }
    states
}

/// Expectation value on a finite ring of `n` sites with the same helical
/// connectivity, as a ratio of traces.
pub fn ring_expectation(n: usize, chain: &Chain, params: &VariationalParams, spec: &OpSpec, anchor: Sublattice) -> Result<C64> {
    let w = chain.width();
    if n % 2 == 1 || n < 2 * w + 2 {
        return Err(Error::InvalidLattice(format!("ring of {n} sites too small for frontier {w}")));
    }
    let factors = SiteFactors::pair(params);
    let trace = |specials: &[(usize, SiteOp)]| -> C64 {
        let mut t = ZERO;
        for f0 in 0..1usize << w {
            let mut v = vec![ZERO; 1 << w];
            v[f0] = C64::new(1.0, 0.0);
            let out = run(chain, &factors, specials, vec![(0, v)], 0, n);
            t += out.iter().filter(|s| s.0 == 0).map(|s| s.1[f0]).sum::<C64>();
        }
        t
    };
    let norm = trace(&[]);
    let mut total = ZERO;
    for (c, p) in &spec.terms {
        let (specials, _) = place(chain, p, anchor, 0)?;
        if specials.last().is_some_and(|s| s.0 + w >= n) {
            return Err(Error::InvalidLattice("insertion does not fit on the ring".into()));
        }
        total += c * trace(&specials);
    }
    Ok(total / norm)
}

pub fn expect_1d(spec: &OpSpec, params: &VariationalParams) -> Result<C64> {
    Environment::new(&Chain::line(), params, &EnvOptions::default())?.expect(spec, Sublattice::A)
}

pub fn expect_2d_cylinder(spec: &OpSpec, params: &VariationalParams, l: usize) -> Result<C64> {
    Environment::new(&Chain::cylinder(l)?, params, &EnvOptions::default())?.expect(spec, Sublattice::A)
}

pub const MAX_ORACLE_BONDS: usize = 24;
pub const MAX_STATE_SITES: usize = 24;

fn site_params(g: &SiteGraph, params: &VariationalParams) -> Vec<(f64, f64)> {
    g.sublattice.iter().map(|&s| (params.theta(s), params.phi(s))).collect()
}

/// Amplitude of `config` (bit `i` = spin of site `i`) from an explicit sum
/// over every virtual bond configuration.
pub fn amplitude_oracle(g: &SiteGraph, site: &[(f64, f64)], config: u64) -> Result<C64> {
    let bonds = g.bonds();
    if bonds.len() > MAX_ORACLE_BONDS {
        return Err(Error::SizeGuard { what: "oracle bonds", size: bonds.len() as u64, limit: MAX_ORACLE_BONDS as u64 });
    }
    let mut tensors = Vec::with_capacity(g.n_sites());
    let mut legs = Vec::with_capacity(g.n_sites());
    for i in 0..g.n_sites() {
        let dim = g.up[i].len();
        if g.down[i].len() != dim {
            return Err(Error::InvalidLattice(format!("site {i} has unequal in and out degree")));
        }
        tensors.push(site_tensor(site[i].0, site[i].1, dim)?);
        let ins: Vec<usize> = g.up[i].iter().map(|&u| bonds.iter().position(|&b| b == (u, i)).unwrap()).collect();
        let outs: Vec<usize> = g.down[i].iter().map(|&d| bonds.iter().position(|&b| b == (i, d)).unwrap()).collect();
        legs.push((ins, outs));
    }
    let mut total = ZERO;
    for b in 0u64..1 << bonds.len() {
        let mut a = C64::new(1.0, 0.0);
        for (i, t) in tensors.iter().enumerate() {
            let (ins, outs) = &legs[i];
            let inn = ins.iter().enumerate().fold(0, |m, (k, &e)| m | (((b >> e) & 1) as usize) << k);
            let out = outs.iter().enumerate().fold(0, |m, (k, &e)| m | (((b >> e) & 1) as usize) << k);
            a *= t.get(((config >> i) & 1) as usize, inn, out);
            if a == ZERO {
                break;
            }
        }
        total += a;
    }
    Ok(total)
}

/// Amplitude of `config` from the product of local amplitudes.
pub fn ansatz_amplitude(g: &SiteGraph, site_amps: &[crate::LocalAmplitudes64], config: u64) -> C64 {
    let mut a = C64::new(1.0, 0.0);
    for i in 0..g.n_sites() {
        let z = ((config >> i) & 1) as u32;
        let blocked = g.up[i].iter().any(|&u| (config >> u) & 1 == 1);
        a *= site_amps[i].amp(z, blocked);
        if a == ZERO {
            break;
        }
    }
    a
}

/// Configurations of `g` with no two neighbouring up spins, in increasing order.
pub fn blockade_configs(g: &SiteGraph) -> Result<Vec<u64>> {
    let n = g.n_sites();
    if n > MAX_STATE_SITES {
        return Err(Error::SizeGuard { what: "state sites", size: n as u64, limit: MAX_STATE_SITES as u64 });
    }
    let nb: Vec<u64> = (0..n).map(|i| g.neighbors[i].iter().fold(0, |m, &j| m | 1 << j)).collect();
    let mut out = Vec::new();
    let mut stack = vec![(0usize, 0u64)];
    while let Some((i, c)) = stack.pop() {
        if i == n {
            out.push(c);
            continue;
        }
        stack.push((i + 1, c));
        if c & nb[i] == 0 {
            stack.push((i + 1, c | 1 << i));
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    v
}

/// Normalized ansatz amplitudes over the whole `2^N` basis.
pub fn state_vector_small(g: &SiteGraph, params: &VariationalParams) -> Result<Vec<C64>> {
    let n = g.n_sites();
    if n > MAX_STATE_SITES {
        return Err(Error::SizeGuard { what: "state sites", size: n as u64, limit: MAX_STATE_SITES as u64 });
    }
    let amps: Vec<_> = site_params(g, params).iter().map(|&(t, p)| crate::LocalAmplitudes64::ansatz(t, p)).collect();
    let v = (0u64..1 << n).map(|c| ansatz_amplitude(g, &amps, c)).collect();
    Ok(normalized(v))
}

/// Per-sublattice coherent-state angles of a projected product state.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PpsParams {
    pub vartheta: [f64; 2],
    pub varphi: [f64; 2],
}

fn pps_amplitude(g: &SiteGraph, pps: &PpsParams, config: u64) -> C64 {
    let mut a = C64::new(1.0, 0.0);
    for i in 0..g.n_sites() {
        let s = g.sublattice[i] as usize;
        let h = 0.5 * pps.vartheta[s];
        a *= if (config >> i) & 1 == 1 {
            C64::new(0.0, -1.0) * C64::from_polar(1.0, pps.varphi[s]) * h.sin()
        } else {
            C64::new(h.cos(), 0.0)
        };
    }
    a
}

/// Blockade projection of a product of spin coherent states, normalized.
pub fn projected_product_state_vector(g: &SiteGraph, pps: &PpsParams) -> Result<Vec<C64>> {
    let n = g.n_sites();
    let mut v = vec![ZERO; 1 << n];
    for c in blockade_configs(g)? {
        v[c as usize] = pps_amplitude(g, pps, c);
    }
    Ok(normalized(v))
}

#[derive(Clone, Debug)]
pub struct OverlapReport {
    pub overlap: f64,
    pub deficit: f64,
    pub params: VariationalParams,
    pub converged: bool,
}

/// Largest overlap `|<psi(theta, phi)|PPS>|` over the two-sublattice
/// ansatz manifold.
pub fn manifold_overlap_gap(g: &SiteGraph, pps: &PpsParams) -> Result<OverlapReport> {
    let configs = blockade_configs(g)?;
    let target: Vec<C64> = configs.iter().map(|&c| pps_amplitude(g, pps, c)).collect();
    let tn = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let overlap = |x: &[f64]| -> f64 {
        let p = VariationalParams::unwrapped(x[0], x[1], x[2], x[3]);
        let amps: Vec<_> = site_params(g, &p).iter().map(|&(t, f)| crate::LocalAmplitudes64::ansatz(t, f)).collect();
        let mut dot = ZERO;
        let mut nn = 0.0;
        for (c, t) in configs.iter().zip(&target) {
            let a = ansatz_amplitude(g, &amps, *c);
            dot += a.conj() * t;
            nn += a.norm_sqr();
        }
        if nn == 0.0 { 0.0 } else { dot.norm() / (nn.sqrt() * tn) }
    };
    let guess = [pps.vartheta[0], pps.vartheta[1], pps.varphi[0], pps.varphi[1]];
    let mut starts = vec![guess.to_vec()];
    for (da, db) in [(0.3, 0.3), (-0.3, 0.2), (0.5, -0.4), (1.0, 1.0)] {
        starts.push(vec![guess[0] + da, guess[1] + db, guess[2], guess[3]]);
    }
    let m = nelder_mead_multi(|x| 1.0 - overlap(x), &starts, 0.2, 1e-13, 20_000)?;
    // polish from the best point
    let m = nelder_mead_multi(|x| 1.0 - overlap(x), &[m.x.clone()], 0.02, 1e-15, 20_000)?;
    let best = overlap(&m.x);
    Ok(OverlapReport {
        overlap: best,
        deficit: 1.0 - best,
        params: VariationalParams::unwrapped(m.x[0], m.x[1], m.x[2], m.x[3]),
        converged: m.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cylinder_bounds() {
        assert!(Chain::cylinder(3).is_err());
        assert!(Chain::cylinder(16).is_err());
        let c = Chain::cylinder(10).unwrap();
        assert_eq!(c.width(), 9);
        assert_eq!(c.index_offset(&[1, 0, 0]).unwrap(), 9);
        assert_eq!(c.index_offset(&[0, -1, 0]).unwrap(), -1);
        assert!(c.index_offset(&[0, 0, 1]).is_err());
    }

    #[test]
    fn one_d_transfer_matrix_is_stochastic() {
        let tm = TransferMatrix::new(&Chain::line(), &VariationalParams::real(1.1, -0.4));
        for row in tm.dense().unwrap() {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn product_state_density() {
        let p = VariationalParams::real(std::f64::consts::FRAC_PI_2, 0.0);
        let n = expect_1d(&OpSpec::number(), &p).unwrap();
        assert_abs_diff_eq!(n.re, 0.5, epsilon = 1e-12);
        let p = VariationalParams::real(std::f64::consts::PI, 0.0);
        assert_abs_diff_eq!(expect_1d(&OpSpec::number(), &p).unwrap().re, 1.0, epsilon = 1e-12);
        let nb = Environment::new(&Chain::line(), &p, &EnvOptions::default())
            .unwrap()
            .expect(&OpSpec::number(), Sublattice::B)
            .unwrap();
        assert_abs_diff_eq!(nb.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_point_is_reported() {
        let p = VariationalParams::real(std::f64::consts::PI, std::f64::consts::PI);
        match Environment::new(&Chain::line(), &p, &EnvOptions::default()) {
            Err(Error::Degenerate { lambda1, lambda2 }) => {
                assert_eq!(lambda1, 1.0);
                assert!(lambda2 > 0.999);
            }
            other => panic!("expected a degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn memory_guard() {
        let opts = EnvOptions { memory_budget: 1024, ..Default::default() };
        let r = Environment::new(&Chain::cylinder(10).unwrap(), &VariationalParams::real(0.5, 0.5), &opts);
        assert!(matches!(r, Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn blockade_configs_of_ring() {
        // Lucas numbers
        for (n, l) in [(4, 7), (6, 18), (8, 47)] {
            let g = SiteGraph::circulant(n, &[1]).unwrap();
            assert_eq!(blockade_configs(&g).unwrap().len(), l);
        }
    }
}
