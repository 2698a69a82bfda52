//! Operator insertions: products of single-site operators placed at lattice
//! displacements from an anchor site, and linear combinations of them.
//!
//! A site operator is stored as `op[bra][ket]`. Derivative flags replace the
//! ket or bra ansatz amplitude at that site by its `theta` derivative.

use crate::lattice::{unit, Coord, MAX_DIM};
use crate::tensors::{double_tensor, reduce, LocalAmplitudes, VariationalParams};
use crate::{Sublattice, C64};

pub type Op2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SiteOp {
    pub op: Op2,
    pub d_ket: bool,
    pub d_bra: bool,
}

impl SiteOp {
    pub const fn new(op: Op2) -> Self {
        Self { op, d_ket: false, d_bra: false }
    }

    pub const fn identity() -> Self { Self::new([[ONE, ZERO], [ZERO, ONE]]) }

    pub const fn number() -> Self { Self::new([[ZERO, ZERO], [ZERO, ONE]]) }

    pub const fn sigma_x() -> Self { Self::new([[ZERO, ONE], [ONE, ZERO]]) }

    /// Projector on spin down.
    pub const fn down() -> Self { Self::new([[ONE, ZERO], [ZERO, ZERO]]) }

    /// `|down><up|`
    pub const fn lowering() -> Self { Self::new([[ZERO, ONE], [ZERO, ZERO]]) }

    /// `|up><down|`
    pub const fn raising() -> Self { Self::new([[ZERO, ZERO], [ONE, ZERO]]) }

    pub fn d_ket(mut self) -> Self {
        self.d_ket = true;
        self
    }

    pub fn d_bra(mut self) -> Self {
        self.d_bra = true;
        self
    }

    /// True when the operator never changes the spin.
    pub fn is_diagonal(&self) -> bool {
        self.op[0][1] == ZERO && self.op[1][0] == ZERO
    }
}

/// Product of site operators at distinct displacements from the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct Product {
    pub sites: Vec<(Coord, SiteOp)>,
}

impl Product {
    pub fn new(sites: Vec<(Coord, SiteOp)>) -> Self {
        debug_assert!(
            sites.iter().enumerate().all(|(i, a)| sites[..i].iter().all(|b| b.0 != a.0)),
            "duplicate site in product"
        );
        Self { sites }
    }

    pub fn single(op: SiteOp) -> Self {
        Self::new(vec![([0; MAX_DIM], op)])
    }

    pub fn has_derivative(&self) -> bool {
        self.sites.iter().any(|(_, s)| s.d_ket || s.d_bra)
    }
}

/// Linear combination of products, anchored on an A site by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct OpSpec {
    pub label: String,
    pub terms: Vec<(C64, Product)>,
}

impl OpSpec {
    pub fn product(label: impl Into<String>, p: Product) -> Self {
        Self { label: label.into(), terms: vec![(ONE, p)] }
    }

    pub fn identity() -> Self {
        Self::product("identity", Product::single(SiteOp::identity()))
    }

    pub fn number() -> Self {
        Self::product("n", Product::single(SiteOp::number()))
    }

    pub fn sigma_x() -> Self {
        Self::product("sx", Product::single(SiteOp::sigma_x()))
    }

    /// `n_0 n_r`
    pub fn number_pair(r: Coord) -> Self {
        Self::product(
            format!("nn{r:?}"),
            Product::new(vec![([0; MAX_DIM], SiteOp::number()), (r, SiteOp::number())]),
        )
    }

    /// `<d psi|d psi>` with the derivative on the anchor.
    pub fn gram() -> Self {
        Self::product("gram", Product::single(SiteOp::identity().d_ket().d_bra()))
    }

    /// Derivative on the anchor in the bra, on site `r` in the ket.
    pub fn cross_gram(r: Coord) -> Self {
        Self::product(
            format!("xgram{r:?}"),
            Product::new(vec![([0; MAX_DIM], SiteOp::identity().d_bra()), (r, SiteOp::identity().d_ket())]),
        )
    }

    /// `<d_0 psi| sigma_x_0 |psi>`
    pub fn k_term() -> Self {
        Self::product("kterm", Product::single(SiteOp::sigma_x().d_bra()))
    }

    /// `<d_0 psi| sigma_x_{r} |psi>` for an arbitrary displacement `r`.
    pub fn derivative_sigma_x(r: Coord) -> Self {
        Self::product(
            format!("dsx{r:?}"),
            Product::new(vec![([0; MAX_DIM], SiteOp::identity().d_bra()), (r, SiteOp::sigma_x())]),
        )
    }

    /// `<d_0 psi| sigma_x_{-e_axis} |psi>`: spin flip on the upstream
    /// neighbour along `axis`.
    pub fn s_term(axis: usize) -> Self {
        let mut r = [0; MAX_DIM];
        r[axis] = -1;
        let mut spec = Self::derivative_sigma_x(r);
        spec.label = format!("sterm{axis}");
        spec
    }

    /// Product of down projectors on every nearest neighbour of the anchor.
    pub fn neighbour_projector(dim: usize) -> Self {
        let mut sites = Vec::new();
        for k in 0..dim {
            let e = unit(k);
            sites.push((e, SiteOp::down()));
            sites.push(([-e[0], -e[1], -e[2]], SiteOp::down()));
        }
        Self::product("nbrproj", Product::new(sites))
    }

    /// `sigma_x_0 sigma_x_r`
    pub fn sigma_x_pair(r: Coord) -> Self {
        Self::product(
            format!("sxsx{r:?}"),
            Product::new(vec![([0; MAX_DIM], SiteOp::sigma_x()), (r, SiteOp::sigma_x())]),
        )
    }

    /// `sigma_x_0 P_{0r} sigma_x_r` with the pair projector `1 - n_0 n_r`.
    pub fn sigma_x_projected_pair(r: Coord) -> Self {
        let o = [0; MAX_DIM];
        Self {
            label: format!("sxpsx{r:?}"),
            terms: vec![
                (ONE, Product::new(vec![(o, SiteOp::sigma_x()), (r, SiteOp::sigma_x())])),
                (-ONE, Product::new(vec![(o, SiteOp::lowering()), (r, SiteOp::raising())])),
            ],
        }
    }
}

/// Amplitudes and norm-transfer weights of one sublattice.
#[derive(Copy, Clone, Debug)]
pub struct SiteFactors {
    pub amp: LocalAmplitudes<f64>,
    pub damp: LocalAmplitudes<f64>,
    /// `markov[blocked][z]`: reduced-tensor weight of emitting `z`.
    pub markov: [[f64; 2]; 2],
}

impl SiteFactors {
    pub fn new(theta: f64, phi: f64) -> Self {
        let t = reduce(&double_tensor(theta, 1).expect("dimension 1"));
        let mut markov = [[0.0; 2]; 2];
        for (b, row) in markov.iter_mut().enumerate() {
            for (z, w) in row.iter_mut().enumerate() {
                *w = t.transition(z, b == 1).re;
            }
        }
        Self {
            amp: LocalAmplitudes::ansatz(theta, phi),
            damp: LocalAmplitudes::ansatz_derivative(theta, phi),
            markov,
        }
    }

    pub fn pair(params: &VariationalParams) -> [Self; 2] {
        [
            Self::new(params.theta(Sublattice::A), params.phi(Sublattice::A)),
            Self::new(params.theta(Sublattice::B), params.phi(Sublattice::B)),
        ]
    }

    /// Weight of a site carrying spin `x` in the ket and `y` in the bra.
    #[inline]
    pub fn weight(&self, op: Option<&SiteOp>, x: u32, y: u32, x_blocked: bool, y_blocked: bool) -> C64 {
        match op {
            None => {
                if x != y {
                    ZERO
                } else if x_blocked == y_blocked {
                    C64::new(self.markov[x_blocked as usize][x as usize], 0.0)
                } else {
                    self.amp.amp(y, y_blocked).conj() * self.amp.amp(x, x_blocked)
                }
            }
            Some(s) => {
                let m = s.op[y as usize][x as usize];
                if m == ZERO {
                    return ZERO;
                }
                let ket = if s.d_ket { &self.damp } else { &self.amp };
                let bra = if s.d_bra { &self.damp } else { &self.amp };
                bra.amp(y, y_blocked).conj() * m * ket.amp(x, x_blocked)
            }
        }
    }
}
