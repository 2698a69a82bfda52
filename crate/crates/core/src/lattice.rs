//! Hypercubic lattice geometry.
//!
//! Sites carry integer coordinates; unused axes are zero. The orientation of
//! every nearest-neighbour bond is fixed along the positive axes: the
//! *downstream* neighbours of `s` are `s + e_k` and the *upstream* neighbours
//! are `s - e_k`.

use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Integer lattice coordinates, padded with zeros beyond the lattice dimension.
pub type Coord = [i64; MAX_DIM];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn other(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
        }
    }

    /// Sublattice of a coordinate on the infinite lattice.
    pub fn of_coord(c: &Coord) -> Self {
        if (c[0] + c[1] + c[2]).rem_euclid(2) == 0 { Self::A } else { Self::B }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
    /// Infinite and translation invariant; no extents.
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    extents: [usize; MAX_DIM],
    boundary: Boundary,
}

/// Unit vector along `axis`.
pub fn unit(axis: usize) -> Coord {
    let mut c = [0; MAX_DIM];
    c[axis] = 1;
    c
}

pub fn add(a: &Coord, b: &Coord) -> Coord {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Coord, b: &Coord) -> Coord {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Next-nearest-neighbour displacements with each unordered pair listed once:
/// `2 e_x` in 1D, `e_k + e_l` and `e_k - e_l` (k < l) in higher dimensions.
pub fn nnn_half_displacements(dim: usize) -> Vec<Coord> {
    if dim == 1 {
        return vec![[2, 0, 0]];
    }
    let mut out = Vec::new();
    for k in 0..dim {
        for l in k + 1..dim {
            out.push(add(&unit(k), &unit(l)));
            out.push(sub(&unit(k), &unit(l)));
        }
    }
    out
}

impl Lattice {
    pub fn new(dim: usize, extents: &[usize], boundary: Boundary) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut ext = [1; MAX_DIM];
        if boundary != Boundary::Infinite {
            if extents.len() != dim {
                return Err(Error::InvalidLattice(format!(
                    "expected {dim} extents, got {}", extents.len())));
            }
            for (k, &e) in extents.iter().enumerate() {
                if e == 0 {
                    return Err(Error::InvalidLattice("zero extent".into()));
                }
                if boundary == Boundary::Periodic && e % 2 == 1 {
                    return Err(Error::InvalidLattice(format!(
                        "periodic extent {e} along axis {k} is odd; no bipartition")));
                }
                ext[k] = e;
            }
        }
        Ok(Self { dim, extents: ext, boundary })
    }

    pub fn infinite(dim: usize) -> Result<Self> {
        Self::new(dim, &[], Boundary::Infinite)
    }

    pub fn periodic(extents: &[usize]) -> Result<Self> {
        Self::new(extents.len(), extents, Boundary::Periodic)
    }

    pub fn open(extents: &[usize]) -> Result<Self> {
        Self::new(extents.len(), extents, Boundary::Open)
    }

    pub fn dim(&self) -> usize { self.dim }

    pub fn boundary(&self) -> Boundary { self.boundary }

    pub fn extents(&self) -> &[usize] { &self.extents[..self.dim] }

    pub fn n_sites(&self) -> Option<usize> {
        match self.boundary {
            Boundary::Infinite => None,
            _ => Some(self.extents().iter().product()),
        }
    }

    pub fn contains(&self, c: &Coord) -> bool {
        if c[self.dim..].iter().any(|&x| x != 0) {
            return false;
        }
        match self.boundary {
            Boundary::Infinite => true,
            _ => (0..self.dim).all(|k| c[k] >= 0 && (c[k] as usize) < self.extents[k]),
        }
    }

    fn check(&self, c: &Coord) -> Result<()> {
        if self.contains(c) { Ok(()) } else { Err(Error::SiteOutOfRange(*c)) }
    }

    pub fn sublattice_of(&self, c: &Coord) -> Result<Sublattice> {
        self.check(c)?;
        Ok(Sublattice::of_coord(c))
    }

    /// Map a displaced coordinate back into the lattice; `None` when it falls
    /// off an open edge.
    fn wrap(&self, c: Coord) -> Option<Coord> {
        match self.boundary {
            Boundary::Infinite => Some(c),
            Boundary::Periodic => {
                let mut w = c;
                for k in 0..self.dim {
                    w[k] = c[k].rem_euclid(self.extents[k] as i64);
                }
                Some(w)
            }
            Boundary::Open => self.contains(&c).then_some(c),
        }
    }

    fn displaced(&self, c: &Coord, disps: impl IntoIterator<Item = Coord>, dedup: bool) -> Vec<Coord> {
        let mut out: Vec<Coord> = Vec::new();
        for d in disps {
            if let Some(w) = self.wrap(add(c, &d)) {
                if w == *c || (dedup && out.contains(&w)) {
                    continue;
                }
                out.push(w);
            }
        }
        out
    }

    pub fn downstream(&self, c: &Coord) -> Vec<Coord> {
        self.displaced(c, (0..self.dim).map(unit), false)
    }

    pub fn upstream(&self, c: &Coord) -> Vec<Coord> {
        self.displaced(c, (0..self.dim).map(|k| sub(&[0; MAX_DIM], &unit(k))), false)
    }

    /// Nearest neighbours at unit distance.
    pub fn neighbors(&self, c: &Coord) -> Vec<Coord> {
        let disps = (0..self.dim).flat_map(|k| {
            let e = unit(k);
            [e, sub(&[0; MAX_DIM], &e)]
        });
        self.displaced(c, disps, true)
    }

    /// Next-nearest neighbours: distance 2 along the chain in 1D, distance
    /// sqrt(2) in higher dimensions.
    pub fn next_nearest(&self, c: &Coord) -> Vec<Coord> {
        let disps = nnn_half_displacements(self.dim)
            .into_iter()
            .flat_map(|d| [d, sub(&[0; MAX_DIM], &d)]);
        self.displaced(c, disps, true)
    }

    /// Row-major ordinal of a site on a finite lattice (axis 0 fastest).
    pub fn index(&self, c: &Coord) -> Option<usize> {
        if self.boundary == Boundary::Infinite || !self.contains(c) {
            return None;
        }
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.extents[k] + c[k] as usize;
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Coord {
        let mut c = [0; MAX_DIM];
        for k in 0..self.dim {
            c[k] = (idx % self.extents[k]) as i64;
            idx /= self.extents[k];
        }
        c
    }

    /// Index-based adjacency of a finite lattice.
    pub fn graph(&self) -> Result<SiteGraph> {
        let n = self.n_sites().ok_or_else(|| {
            Error::InvalidLattice("infinite lattice has no finite graph".into())
        })?;
        let idx = |c: &Coord| self.index(c).expect("wrapped site lies in lattice");
        let mut g = SiteGraph::with_sites(n);
        for i in 0..n {
            let c = self.site(i);
            g.sublattice[i] = Sublattice::of_coord(&c);
            g.up[i] = self.upstream(&c).iter().map(idx).collect();
            g.down[i] = self.downstream(&c).iter().map(idx).collect();
            g.neighbors[i] = self.neighbors(&c).iter().map(idx).collect();
            for d in nnn_half_displacements(self.dim) {
                if let Some(w) = self.wrap(add(&c, &d)) {
                    let j = idx(&w);
                    let pair = (i.min(j), i.max(j));
                    if j != i && !g.nnn_pairs.contains(&pair) {
                        g.nnn_pairs.push(pair);
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Finite directed site graph: the form consumed by brute-force state
/// construction and exact diagonalization.
#[derive(Clone, Debug, Default)]
pub struct SiteGraph {
    pub up: Vec<Vec<usize>>,
    pub down: Vec<Vec<usize>>,
    pub neighbors: Vec<Vec<usize>>,
    pub sublattice: Vec<Sublattice>,
    pub nnn_pairs: Vec<(usize, usize)>,
}

impl SiteGraph {
    fn with_sites(n: usize) -> Self {
        Self {
            up: vec![Vec::new(); n],
            down: vec![Vec::new(); n],
            neighbors: vec![Vec::new(); n],
            sublattice: vec![Sublattice::A; n],
            nnn_pairs: Vec::new(),
        }
    }

    /// Ring of `n` sites where site `i` has upstream neighbours `i - o` for
    /// every offset `o`. With offsets `[1, L - 1]` this is a helically wrapped
    /// square lattice of circumference `L`.
    pub fn circulant(n: usize, offsets: &[usize]) -> Result<Self> {
        if n % 2 == 1 || offsets.iter().any(|&o| o % 2 == 0 || o >= n) {
            return Err(Error::InvalidLattice(
                "circulant ring needs even size and odd offsets".into()));
        }
        let mut g = Self::with_sites(n);
        for i in 0..n {
            g.sublattice[i] = if i % 2 == 0 { Sublattice::A } else { Sublattice::B };
            for &o in offsets {
                let u = (i + n - o) % n;
                let d = (i + o) % n;
                g.up[i].push(u);
                g.down[i].push(d);
                for j in [u, d] {
                    if !g.neighbors[i].contains(&j) {
                        g.neighbors[i].push(j);
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn n_sites(&self) -> usize { self.up.len() }

    /// Directed bonds `(from, to)` along the orientation.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        self.down
            .iter()
            .enumerate()
            .flat_map(|(i, ds)| ds.iter().map(move |&j| (i, j)))
            .collect()
    }
}
