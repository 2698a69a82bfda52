//! Series expansion of expectation values in `s = sin^2(theta/2)`.
//!
//! Away from the sites touched by an operator, every double-layer site
//! tensor reduces to `p - s q`. Expanding the product, only sets `J` of
//! `q` tensors in which every `q` has a downstream neighbour in `J` or in the
//! operator region survive. Such sets are enumerated once per region
//! geometry and binned by how many `q`s sit on each sublattice. The binned
//! integer counts are independent of the angles, which enter only through a
//! small brute-force sum over the region's spins.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Float;
use rustc_hash::FxHashMap;

use crate::insertion::{Product, SiteFactors, SiteOp};
use crate::lattice::{unit, Coord, MAX_DIM};
use crate::{Error, Result, Sublattice, VariationalParams, C64};

pub const DEFAULT_ORDER_1D: usize = 24;
pub const DEFAULT_ORDER_2D: usize = 12;
pub const DEFAULT_ORDER_3D: usize = 9;
/// Largest region the signature bookkeeping supports.
pub const MAX_REGION: usize = 10;

pub fn default_order(dim: usize) -> usize {
    match dim {
        1 => DEFAULT_ORDER_1D,
        2 => DEFAULT_ORDER_2D,
        _ => DEFAULT_ORDER_3D,
    }
}

/// Largest order enumerated without an explicit override.
pub fn order_budget(dim: usize) -> usize {
    default_order(dim)
}

/// Sites excluded from the `p - s q` expansion: the operator support plus
/// the downstream neighbours of every spin-flipping site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    dim: usize,
    sites: Vec<Coord>,
}

impl Region {
    pub fn of_product(dim: usize, p: &Product) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut sites: Vec<Coord> = Vec::new();
        for (r, op) in &p.sites {
            if r[dim..].iter().any(|&a| a != 0) {
                return Err(Error::SiteOutOfRange(*r));
            }
            sites.push(*r);
            if !op.is_diagonal() {
                for k in 0..dim {
                    let e = unit(k);
                    sites.push([r[0] + e[0], r[1] + e[1], r[2] + e[2]]);
                }
            }
        }
        sites.sort_unstable();
        sites.dedup();
        if sites.len() > MAX_REGION {
            return Err(Error::SizeGuard { what: "operator region sites", size: sites.len() as u64, limit: MAX_REGION as u64 });
        }
        Ok(Self { dim, sites })
    }

    pub fn single(dim: usize) -> Self {
        Self { dim, sites: vec![[0; MAX_DIM]] }
    }

    pub fn dim(&self) -> usize { self.dim }

    pub fn sites(&self) -> &[Coord] { &self.sites }

    fn key(&self) -> String {
        let mut s = format!("d{}", self.dim);
        for c in &self.sites {
            let _ = write!(s, "_{}.{}.{}", c[0], c[1], c[2]);
        }
        s.replace('-', "m")
    }
}

/// Integer coefficients of the expansion, keyed by the region constraint:
/// `zero` marks region sites that must emit spin down, `blocked` marks region
/// sites that see an up spin arriving from outside the region.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub region: Region,
    pub order: usize,
    /// `(zero, blocked, counts)` with `counts[n * (order + 1) + m]`.
    pub entries: Vec<(u16, u16, Vec<i64>)>,
    /// Number of admissible `q` sets enumerated.
    pub sets: u64,
}

struct Grid {
    lo: [i64; MAX_DIM],
    stride: [usize; MAX_DIM],
    len: usize,
}

impl Grid {
    fn idx(&self, c: &Coord) -> usize {
        (0..MAX_DIM).map(|k| (c[k] - self.lo[k]) as usize * self.stride[k]).sum()
    }

    fn parity(&self, mut i: usize) -> usize {
        let mut s = 0i64;
        for k in (0..MAX_DIM).rev() {
            let q = i / self.stride[k];
            i %= self.stride[k];
            s += q as i64 + self.lo[k];
        }
        s.rem_euclid(2) as usize
    }
}

struct Enumerator {
    dim: usize,
    order: usize,
    grid: Grid,
    /// 0 free, 1 in J, 2 in the region
    kind: Vec<u8>,
    seen: Vec<bool>,
    region_idx: Vec<u8>,
    parity: Vec<u8>,
    set: Vec<usize>,
    counts: [usize; 2],
    sigs: FxHashMap<Vec<u16>, Vec<u64>>,
    key: Vec<u16>,
    masks: Vec<u16>,
    sets: u64,
}

impl Enumerator {
    fn new(region: &Region, order: usize) -> Self {
        let dim = region.dim;
        let mut lo = [0; MAX_DIM];
        let mut ext = [1; MAX_DIM];
        for k in 0..dim {
            let min = region.sites.iter().map(|c| c[k]).min().unwrap();
            let max = region.sites.iter().map(|c| c[k]).max().unwrap();
            lo[k] = min - order as i64 - 1;
            ext[k] = max + 1 - lo[k] + 1;
        }
        let mut stride = [0; MAX_DIM];
        let mut acc = 1usize;
        for k in 0..MAX_DIM {
            stride[k] = acc;
            acc *= ext[k] as usize;
        }
        let grid = Grid { lo, stride, len: acc };
        let mut kind = vec![0u8; grid.len];
        let mut region_idx = vec![u8::MAX; grid.len];
        for (j, c) in region.sites.iter().enumerate() {
            let i = grid.idx(c);
            kind[i] = 2;
            region_idx[i] = j as u8;
        }
        let parity = (0..grid.len).map(|i| grid.parity(i) as u8).collect();
        Self {
            dim,
            order,
            seen: kind.iter().map(|&k| k == 2).collect(),
            grid,
            kind,
            region_idx,
            parity,
            set: Vec::with_capacity(order),
            counts: [0; 2],
            sigs: FxHashMap::default(),
            key: Vec::new(),
            masks: Vec::new(),
            sets: 0,
        }
    }

    fn run(&mut self) {
        let mut untried = Vec::new();
        let region: Vec<usize> = (0..self.grid.len).filter(|&i| self.kind[i] == 2).collect();
        for r in region {
            self.push_upstream(r, &mut untried);
        }
        self.record();
        if self.order > 0 {
            self.grow(untried);
        }
    }

    fn push_upstream(&mut self, v: usize, out: &mut Vec<usize>) {
        for k in 0..self.dim {
            let u = v - self.grid.stride[k];
            if !self.seen[u] {
                self.seen[u] = true;
                out.push(u);
            }
        }
    }

    fn grow(&mut self, mut untried: Vec<usize>) {
        while let Some(v) = untried.pop() {
            self.kind[v] = 1;
            self.set.push(v);
            self.counts[self.parity[v] as usize] += 1;
            self.record();
            if self.set.len() < self.order {
                let mut next = untried.clone();
                let start = next.len();
                self.push_upstream(v, &mut next);
                let added: Vec<usize> = next[start..].to_vec();
                self.grow(next);
                for u in added {
                    self.seen[u] = false;
                }
            }
            self.counts[self.parity[v] as usize] -= 1;
            self.set.pop();
            self.kind[v] = 0;
        }
    }

    fn record(&mut self) {
        self.sets += 1;
        let mut zero = 0u16;
        self.masks.clear();
        for &q in &self.set {
            let mut down_q = false;
            let mut mask = 0u16;
            for k in 0..self.dim {
                let d = q + self.grid.stride[k];
                match self.kind[d] {
                    1 => down_q = true,
                    2 => mask |= 1 << self.region_idx[d],
                    _ => {}
                }
                let u = q - self.grid.stride[k];
                if self.kind[u] == 2 {
                    zero |= 1 << self.region_idx[u];
                }
            }
            if !down_q {
                debug_assert!(mask != 0, "q set not anchored to the region");
                self.masks.push(mask);
            }
        }
        self.masks.sort_unstable();
        self.masks.dedup();
        self.key.clear();
        self.key.push(zero);
        for (i, &m) in self.masks.iter().enumerate() {
            if !self.masks[..i].iter().any(|&o| o & m == o) {
                self.key.push(m);
            }
        }
        let side = self.order + 1;
        let (n, m) = (self.counts[1], self.counts[0]);
        if let Some(t) = self.sigs.get_mut(self.key.as_slice()) {
            t[n * side + m] += 1;
        } else {
            let mut t = vec![0u64; side * side];
            t[n * side + m] = 1;
            self.sigs.insert(self.key.clone(), t);
        }
    }
}

/// Converts "no external blocker may lie inside `b`" indicators into
/// coefficients of "exactly the sites `b` are blocked from outside".
fn blocked_coefficients(n_region: usize, minimal: &[u16]) -> Vec<i64> {
    let size = 1usize << n_region;
    let mut c: Vec<i64> = (0..size)
        .map(|b| (!minimal.iter().any(|&m| m & !(b as u16) == 0)) as i64)
        .collect();
    for i in 0..n_region {
        for b in 0..size {
            if b & 1 << i != 0 {
                c[b] -= c[b ^ 1 << i];
            }
        }
    }
    c
}

impl SeriesTable {
    pub fn enumerate(region: &Region, order: usize) -> Self {
        let mut e = Enumerator::new(region, order);
        e.run();
        let side = order + 1;
        let nr = region.sites.len();
        let mut acc: HashMap<(u16, u16), Vec<i64>> = HashMap::new();
        for (key, counts) in &e.sigs {
            let coef = blocked_coefficients(nr, &key[1..]);
            for (b, &c) in coef.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let t = acc.entry((key[0], b as u16)).or_insert_with(|| vec![0; side * side]);
                for (x, &y) in t.iter_mut().zip(counts) {
                    *x += c * y as i64;
                }
            }
        }
        let mut entries: Vec<(u16, u16, Vec<i64>)> = acc
            .into_iter()
            .filter(|(_, t)| t.iter().any(|&x| x != 0))
            .map(|((z, b), t)| (z, b, t))
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        Self { region: region.clone(), order, entries, sets: e.sets }
    }

    fn truncated(&self, order: usize) -> Self {
        let (old, new) = (self.order + 1, order + 1);
        let entries = self
            .entries
            .iter()
            .map(|(z, b, t)| {
                let mut u = vec![0; new * new];
                for n in 0..new {
                    for m in 0..new - n {
                        u[n * new + m] = t[n * old + m];
                    }
                }
                (*z, *b, u)
            })
            .filter(|e| e.2.iter().any(|&x| x != 0))
            .collect();
        Self { region: self.region.clone(), order, entries, sets: 0 }
    }

    fn to_text(&self) -> String {
        let mut s = String::from("# pxp counting table v1\n");
        let _ = writeln!(s, "dim {}", self.region.dim);
        let _ = writeln!(s, "order {}", self.order);
        let _ = writeln!(s, "region {}", self.region.sites.len());
        for c in &self.region.sites {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        let side = self.order + 1;
        let nz: usize = self.entries.iter().map(|e| e.2.iter().filter(|&&x| x != 0).count()).sum();
        let _ = writeln!(s, "entries {nz}");
        for (z, b, t) in &self.entries {
            for (i, &x) in t.iter().enumerate() {
                if x != 0 {
                    let _ = writeln!(s, "{z} {b} {} {} {x}", i / side, i % side);
                }
            }
        }
        s
    }

    fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Cache(m.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let mut field = |name: &str| -> Result<usize> {
            let l = lines.next().ok_or_else(|| bad("truncated header"))?;
            let v = l.strip_prefix(name).ok_or_else(|| bad(&format!("expected {name}")))?;
            v.trim().parse().map_err(|_| bad(&format!("bad {name}")))
        };
        let dim = field("dim")?;
        let order = field("order")?;
        let nr = field("region")?;
        drop(field);
        let mut lines = text.lines().filter(|l| !l.starts_with('#')).skip(3);
        let mut sites = Vec::with_capacity(nr);
        for _ in 0..nr {
            let v: Vec<i64> = lines
                .next()
                .ok_or_else(|| bad("truncated region"))?
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad("bad coordinate"));
            }
            sites.push([v[0], v[1], v[2]]);
        }
        let ne: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("entries"))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("bad entry count"))?;
        let side = order + 1;
        let mut acc: HashMap<(u16, u16), Vec<i64>> = HashMap::new();
        for _ in 0..ne {
            let v: Vec<i64> = lines
                .next()
                .ok_or_else(|| bad("truncated entries"))?
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad entry")))
                .collect::<Result<_>>()?;
            if v.len() != 5 || v[2] as usize + v[3] as usize > order {
                return Err(bad("bad entry"));
            }
            let t = acc.entry((v[0] as u16, v[1] as u16)).or_insert_with(|| vec![0; side * side]);
            t[v[2] as usize * side + v[3] as usize] = v[4];
        }
        let mut entries: Vec<_> = acc.into_iter().map(|((z, b), t)| (z, b, t)).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        Ok(Self { region: Region { dim, sites }, order, entries, sets: 0 })
    }

    /// Contributions of each order `0..=order` to `<O>`, with the anchor
    /// (the origin) on sublattice `anchor`.
    pub fn order_terms(&self, p: &Product, params: &VariationalParams, anchor: Sublattice) -> Result<Vec<C64>> {
        let region = &self.region;
        let nr = region.sites.len();
        let mut ops: Vec<Option<SiteOp>> = vec![None; nr];
        for (r, op) in &p.sites {
            let i = region.sites.iter().position(|c| c == r).ok_or(Error::SiteOutOfRange(*r))?;
            ops[i] = Some(*op);
        }
        let sub = |c: &Coord| if (c[0] + c[1] + c[2]).rem_euclid(2) == 0 { anchor } else { anchor.other() };
        let factors: Vec<SiteFactors> =
            region.sites.iter().map(|c| SiteFactors::new(params.theta(sub(c)), params.phi(sub(c)))).collect();
        let ups: Vec<u16> = region
            .sites
            .iter()
            .map(|c| {
                (0..region.dim).fold(0u16, |m, k| {
                    let e = unit(k);
                    let u = [c[0] - e[0], c[1] - e[1], c[2] - e[2]];
                    match region.sites.iter().position(|x| *x == u) {
                        Some(j) => m | 1 << j,
                        None => m,
                    }
                })
            })
            .collect();
        let offd: u16 = ops
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_some_and(|o| !o.is_diagonal()))
            .fold(0, |m, (i, _)| m | 1 << i);

        // region weight for every needed (zero, blocked) pair
        let mut u_cache: HashMap<(u16, u16), C64> = HashMap::new();
        for (z, b, _) in &self.entries {
            if u_cache.contains_key(&(*z, *b)) {
                continue;
            }
            let mut total = C64::new(0.0, 0.0);
            for x in 0u16..1 << nr {
                if x & z != 0 {
                    continue;
                }
                let mut d = offd;
                loop {
                    let y = x ^ d;
                    if y & z == 0 {
                        let mut w = C64::new(1.0, 0.0);
                        for i in 0..nr {
                            let xb = (x & ups[i] != 0) || (b >> i) & 1 == 1;
                            let yb = (y & ups[i] != 0) || (b >> i) & 1 == 1;
                            w *= factors[i].weight(ops[i].as_ref(), ((x >> i) & 1) as u32, ((y >> i) & 1) as u32, xb, yb);
                            if w == C64::new(0.0, 0.0) {
                                break;
                            }
                        }
                        total += w;
                    }
                    if d == 0 {
                        break;
                    }
                    d = (d - 1) & offd;
                }
            }
            u_cache.insert((*z, *b), total);
        }

        let so = -params.s2(anchor.other());
        let sa = -params.s2(anchor);
        let side = self.order + 1;
        let pow = |x: f64| (0..side).scan(1.0, move |a, _| { let r = *a; *a *= x; Some(r) }).collect::<Vec<f64>>();
        let (po, pa) = (pow(so), pow(sa));
        let mut terms = vec![C64::new(0.0, 0.0); side];
        for (z, b, t) in &self.entries {
            let u = u_cache[&(*z, *b)];
            for n in 0..side {
                for m in 0..side - n {
                    let c = t[n * side + m];
                    if c != 0 {
                        terms[n + m] += u * (c as f64 * po[n] * pa[m]);
                    }
                }
            }
        }
        Ok(terms)
    }

    pub fn evaluate(&self, p: &Product, params: &VariationalParams, anchor: Sublattice) -> Result<C64> {
        Ok(self.order_terms(p, params, anchor)?.iter().sum())
    }
}

fn memory_cache() -> &'static Mutex<HashMap<Region, Arc<SeriesTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<Region, Arc<SeriesTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Directory of the on-disk table cache: `PXP_CACHE_DIR` or a folder in the
/// system temporary directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("PXP_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pxp-cache"))
}

/// Counting table of `region` to at least `order`, from memory, disk or a
/// fresh enumeration. Orders above the default budget need `allow_large`.
pub fn table_for(region: &Region, order: usize, allow_large: bool) -> Result<Arc<SeriesTable>> {
    let limit = order_budget(region.dim);
    if order > limit && !allow_large {
        return Err(Error::OrderExceeded { requested: order, limit });
    }
    if let Some(t) = memory_cache().lock().unwrap().get(region) {
        if t.order >= order {
            return Ok(if t.order == order { t.clone() } else { Arc::new(t.truncated(order)) });
        }
    }
    let path = cache_dir().join(format!("{}.txt", region.key()));
    let from_disk = std::fs::read_to_string(&path)
        .ok()
        .and_then(|s| SeriesTable::from_text(&s).ok())
        .filter(|t| t.region == *region && t.order >= order);
    let table = match from_disk {
        Some(t) => Arc::new(t),
        None => {
            let t = Arc::new(SeriesTable::enumerate(region, order));
            if std::fs::create_dir_all(cache_dir()).is_ok() {
                // unique per writer, threads of one process included
                static WRITES: AtomicUsize = AtomicUsize::new(0);
                let n = WRITES.fetch_add(1, Ordering::Relaxed);
                let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
                if std::fs::write(&tmp, t.to_text()).is_ok() {
                    let _ = std::fs::rename(&tmp, &path);
                }
            }
            t
        }
    };
    memory_cache().lock().unwrap().insert(region.clone(), table.clone());
    Ok(if table.order == order { table } else { Arc::new(table.truncated(order)) })
}

/// Series value of a single product at the given order.
pub fn expect_product(dim: usize, p: &Product, params: &VariationalParams, anchor: Sublattice, order: usize) -> Result<C64> {
    let region = Region::of_product(dim, p)?;
    table_for(&region, order, false)?.evaluate(p, params, anchor)
}

/// Per-order contributions of a single product.
pub fn product_order_terms(dim: usize, p: &Product, params: &VariationalParams, anchor: Sublattice, order: usize) -> Result<Vec<C64>> {
    let region = Region::of_product(dim, p)?;
    table_for(&region, order, false)?.order_terms(p, params, anchor)
}

/// Counting factors `f[n][m]` of the density operator: the number of
/// admissible `q` sets with `n` sites on the sublattice opposite the anchor
/// and `m` on the anchor's sublattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountingTable {
    pub dim: usize,
    pub order: usize,
    pub f: Vec<Vec<u64>>,
}

impl CountingTable {
    pub fn get(&self, n: usize, m: usize) -> u64 {
        self.f.get(n).and_then(|r| r.get(m)).copied().unwrap_or(0)
    }

    /// `f_k = sum_{n + m = k} f[n][m]`
    pub fn totals(&self) -> Vec<u64> {
        (0..=self.order).map(|k| (0..=k).map(|n| self.get(n, k - n)).sum()).collect()
    }
}

pub fn enumerate_counting_factors(dim: usize, order: usize) -> Result<CountingTable> {
    let t = table_for(&Region::single(dim), order, false)?;
    let side = order + 1;
    let mut f = vec![vec![0u64; side]; side];
    // the density vanishes whenever an up spin arrives from outside, so the
    // unblocked coefficient alone carries the count of every set
    for (z, b, c) in &t.entries {
        if *z == 0 && *b == 0 {
            for n in 0..side {
                for m in 0..side - n {
                    f[n][m] = c[n * side + m] as u64;
                }
            }
        }
    }
    Ok(CountingTable { dim, order, f })
}

/// `Sigma = sum_{n,m} (-1)^(n+m) f[n][m] s_opp^n s_anchor^m` truncated at `order`.
pub fn series_sum<T: Float>(table: &CountingTable, theta_anchor: T, theta_opp: T, order: usize) -> T {
    partial_sums(table, theta_anchor, theta_opp).into_iter().nth(order.min(table.order)).unwrap()
}

/// `S_0, S_1, ..., S_order`
pub fn partial_sums<T: Float>(table: &CountingTable, theta_anchor: T, theta_opp: T) -> Vec<T> {
    let half = T::from(0.5).unwrap();
    let sa = -(theta_anchor * half).sin().powi(2);
    let so = -(theta_opp * half).sin().powi(2);
    let mut out = Vec::with_capacity(table.order + 1);
    let mut acc = T::zero();
    for k in 0..=table.order {
        for n in 0..=k {
            let f = table.get(n, k - n);
            if f != 0 {
                acc = acc + T::from(f).unwrap() * so.powi(n as i32) * sa.powi((k - n) as i32);
            }
        }
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RegimeMap {
    pub theta_a: Vec<f64>,
    pub theta_b: Vec<f64>,
    /// `delta[i][j] = |S_N - S_(N-1)|` at `(theta_a[i], theta_b[j])`.
    pub delta: Vec<Vec<f64>>,
    pub inside: Vec<Vec<bool>>,
}

pub fn regime_map(table: &CountingTable, theta_a: &[f64], theta_b: &[f64], threshold: f64) -> RegimeMap {
    assert!(threshold > 0.0, "threshold must be positive");
    let delta: Vec<Vec<f64>> = theta_a
        .iter()
        .map(|&a| theta_b.iter().map(|&b| truncation_error(table, a, b)).collect())
        .collect();
    let inside = delta.iter().map(|r| r.iter().map(|&d| d < threshold).collect()).collect();
    RegimeMap { theta_a: theta_a.to_vec(), theta_b: theta_b.to_vec(), delta, inside }
}

/// `|S_N - S_(N-1)|` of the density series at the table's order.
pub fn truncation_error(table: &CountingTable, theta_a: f64, theta_b: f64) -> f64 {
    let s = partial_sums(table, theta_a, theta_b);
    if s.len() < 2 { 0.0 } else { (s[s.len() - 1] - s[s.len() - 2]).abs() }
}

/// Checks `f_(k+1) > sqrt(k) f_k` for every `k >= 1` with both totals
/// available and nonzero. Returns the list of failing `k` alongside.
pub fn superexponential_check(table: &CountingTable) -> (bool, Vec<usize>) {
    let f = table.totals();
    let mut failing = Vec::new();
    for k in 1..f.len().saturating_sub(1) {
        if f[k] == 0 || f[k + 1] == 0 {
            continue;
        }
        if (f[k + 1] as f64) <= (k as f64).sqrt() * f[k] as f64 {
            failing.push(k);
        }
    }
    (failing.is_empty(), failing)
}
