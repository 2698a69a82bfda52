//! Dense site tensors of the ansatz and their double-layer forms.
//!
//! Leg ordering is `(physical; in_x, in_y, in_z; out_x, out_y, out_z)`. A set
//! of `D` virtual legs of dimension two is packed into an integer whose bit
//! `k` is the leg along axis `k`. Double-layer legs have dimension four and
//! carry `2 * ket + bra`; a set of them is packed base four, digit `k` for
//! axis `k`. Physical index 0 is spin down, 1 is spin up.
//!
//! Everything here is generic over the real scalar so the tensor algebra can
//! be checked in single and double precision alike.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Float;

use crate::{Error, Result, Sublattice};

/// Two-sublattice parameters of the manifold.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VariationalParams {
    pub theta_a: f64,
    pub theta_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

fn wrap_theta(t: f64) -> f64 {
    (t + PI).rem_euclid(2.0 * PI) - PI
}

fn wrap_phi(p: f64) -> f64 {
    p.rem_euclid(2.0 * PI)
}

impl VariationalParams {
    /// Angles reduced to `theta in [-pi, pi)` and `phi in [0, 2 pi)`.
    pub fn new(theta_a: f64, theta_b: f64, phi_a: f64, phi_b: f64) -> Self {
        Self {
            theta_a: wrap_theta(theta_a),
            theta_b: wrap_theta(theta_b),
            phi_a: wrap_phi(phi_a),
            phi_b: wrap_phi(phi_b),
        }
    }

    /// Angles kept as given. The manifold has period `4 pi` in each `theta`,
    /// so trajectories leaving the principal window must not be wrapped.
    pub fn unwrapped(theta_a: f64, theta_b: f64, phi_a: f64, phi_b: f64) -> Self {
        Self { theta_a, theta_b, phi_a, phi_b }
    }

    /// Real states used for energy minimization, `phi = pi/2` on both sublattices.
    pub fn real(theta_a: f64, theta_b: f64) -> Self {
        Self::unwrapped(theta_a, theta_b, PI / 2.0, PI / 2.0)
    }

    /// States visited by the dynamics, `phi = 0` on both sublattices.
    pub fn dynamical(theta_a: f64, theta_b: f64) -> Self {
        Self::unwrapped(theta_a, theta_b, 0.0, 0.0)
    }

    pub fn theta(&self, s: Sublattice) -> f64 {
        match s {
            Sublattice::A => self.theta_a,
            Sublattice::B => self.theta_b,
        }
    }

    pub fn phi(&self, s: Sublattice) -> f64 {
        match s {
            Sublattice::A => self.phi_a,
            Sublattice::B => self.phi_b,
        }
    }

    /// Exchange the roles of the two sublattices.
    pub fn swapped(&self) -> Self {
        Self { theta_a: self.theta_b, theta_b: self.theta_a, phi_a: self.phi_b, phi_b: self.phi_a }
    }

    /// `sin^2(theta/2)` on the given sublattice.
    pub fn s2(&self, s: Sublattice) -> f64 {
        (self.theta(s) / 2.0).sin().powi(2)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) { Ok(()) } else { Err(Error::UnsupportedDimension(dim)) }
}

fn c<T: Float>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn half<T: Float>() -> T {
    T::one() / (T::one() + T::one())
}

/// Ansatz tensor `M` with one physical and `2D` virtual legs.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Float> SiteTensor<T> {
    fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex::new(T::zero(), T::zero()); 2 << (2 * dim)] }
    }

    pub fn dim(&self) -> usize { self.dim }

    fn idx(&self, phys: usize, inn: usize, out: usize) -> usize {
        (phys << (2 * self.dim)) | (inn << self.dim) | out
    }

    pub fn get(&self, phys: usize, inn: usize, out: usize) -> Complex<T> {
        self.data[self.idx(phys, inn, out)]
    }

    fn set(&mut self, phys: usize, inn: usize, out: usize, v: Complex<T>) {
        let i = self.idx(phys, inn, out);
        self.data[i] = v;
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|v| !v.re.is_zero() || !v.im.is_zero()).count()
    }
}

/// Double-layer tensor with legs of dimension four.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleTensor<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Float> DoubleTensor<T> {
    pub fn dim(&self) -> usize { self.dim }

    pub fn get(&self, inn: usize, out: usize) -> Complex<T> {
        self.data[(inn << (2 * self.dim)) | out]
    }

    /// Element with ket and bra leg bits given separately.
    pub fn get_split(&self, ket_in: usize, bra_in: usize, ket_out: usize, bra_out: usize) -> Complex<T> {
        self.get(pair_index(ket_in, bra_in, self.dim), pair_index(ket_out, bra_out, self.dim))
    }
}

/// Bond-dimension-two tensor obtained from the diagonal slice of a double tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTensor<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Float> ReducedTensor<T> {
    pub fn dim(&self) -> usize { self.dim }

    pub fn get(&self, inn: usize, out: usize) -> Complex<T> {
        self.data[(inn << self.dim) | out]
    }

    fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex<T>) -> Self {
        let n = 1 << dim;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for o in 0..n {
                data.push(f(i, o));
            }
        }
        Self { dim, data }
    }

    pub fn scale_add(&self, a: T, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(x, y)| *x + *y * a).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (*x - *y).norm())
            .fold(T::zero(), T::max)
    }

    /// Weight of emitting `z` on every outgoing leg given whether any
    /// incoming leg carries 1.
    pub fn transition(&self, z: usize, in_nonzero: bool) -> Complex<T> {
        let out = if z == 1 { (1 << self.dim) - 1 } else { 0 };
        self.get(if in_nonzero { 1 } else { 0 }, out)
    }
}

/// Pack per-axis ket and bra bits into a double-layer leg index.
pub fn pair_index(ket: usize, bra: usize, dim: usize) -> usize {
    (0..dim).fold(0, |acc, k| acc | ((2 * ((ket >> k) & 1) + ((bra >> k) & 1)) << (2 * k)))
}

/// The ansatz tensor: a down spin passes `cos(theta/2)` when every incoming
/// leg is 0 and 1 otherwise, emitting 0 on all outgoing legs; an up spin
/// requires all-zero input, emits 1 on all outgoing legs and carries
/// `-i e^{i phi} sin(theta/2)`.
pub fn site_tensor<T: Float>(theta: T, phi: T, dim: usize) -> Result<SiteTensor<T>> {
    check_dim(dim)?;
    let h = theta * half();
    let mut m = SiteTensor::zeros(dim);
    let all = (1 << dim) - 1;
    m.set(0, 0, 0, c(h.cos(), T::zero()));
    for inn in 1..=all {
        m.set(0, inn, 0, c(T::one(), T::zero()));
    }
    // -i e^{i phi} = sin(phi) - i cos(phi)
    m.set(1, 0, all, c(phi.sin() * h.sin(), -phi.cos() * h.sin()));
    Ok(m)
}

/// Derivative of [`site_tensor`] with respect to `theta`.
pub fn d_site_tensor<T: Float>(theta: T, phi: T, dim: usize) -> Result<SiteTensor<T>> {
    check_dim(dim)?;
    let h = theta * half();
    let mut m = SiteTensor::zeros(dim);
    let all = (1 << dim) - 1;
    m.set(0, 0, 0, c(-h.sin() * half(), T::zero()));
    m.set(1, 0, all, c(phi.sin() * h.cos() * half(), -phi.cos() * h.cos() * half()));
    Ok(m)
}

/// Contract a single-site operator between a bra tensor and a ket tensor,
/// `op[bra][ket]`, leaving the virtual legs paired.
pub fn sandwich<T: Float>(bra: &SiteTensor<T>, op: &[[Complex<T>; 2]; 2], ket: &SiteTensor<T>) -> DoubleTensor<T> {
    let dim = ket.dim;
    let n = 1 << dim;
    let mut data = vec![Complex::new(T::zero(), T::zero()); 1 << (4 * dim)];
    for ki in 0..n {
        for bi in 0..n {
            for ko in 0..n {
                for bo in 0..n {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for sb in 0..2 {
                        for sk in 0..2 {
                            acc = acc + bra.get(sb, bi, bo).conj() * op[sb][sk] * ket.get(sk, ki, ko);
                        }
                    }
                    let i = pair_index(ki, bi, dim);
                    let o = pair_index(ko, bo, dim);
                    data[(i << (2 * dim)) | o] = acc;
                }
            }
        }
    }
    DoubleTensor { dim, data }
}

pub fn identity_op<T: Float>() -> [[Complex<T>; 2]; 2] {
    let (o, z) = (c(T::one(), T::zero()), c(T::zero(), T::zero()));
    [[o, z], [z, o]]
}

pub fn sigma_x_op<T: Float>() -> [[Complex<T>; 2]; 2] {
    let (o, z) = (c(T::one(), T::zero()), c(T::zero(), T::zero()));
    [[z, o], [o, z]]
}

pub fn number_op<T: Float>() -> [[Complex<T>; 2]; 2] {
    let (o, z) = (c(T::one(), T::zero()), c(T::zero(), T::zero()));
    [[z, z], [z, o]]
}

/// Norm tensor `T = <M|M>`; independent of `phi`.
pub fn double_tensor<T: Float>(theta: T, dim: usize) -> Result<DoubleTensor<T>> {
    let m = site_tensor(theta, T::zero(), dim)?;
    Ok(sandwich(&m, &identity_op(), &m))
}

/// Keep only the elements whose paired legs agree in ket and bra.
pub fn reduce<T: Float>(t: &DoubleTensor<T>) -> ReducedTensor<T> {
    let dim = t.dim;
    ReducedTensor::from_fn(dim, |i, o| t.get_split(i, i, o, o))
}

/// `p = |alpha><0|`: emits 0 and accepts any input.
pub fn p_tensor<T: Float>(dim: usize) -> ReducedTensor<T> {
    ReducedTensor::from_fn(dim, |_, o| {
        if o == 0 { c(T::one(), T::zero()) } else { c(T::zero(), T::zero()) }
    })
}

/// `q = |0><0| - |0><1|`: requires all-zero input.
pub fn q_tensor<T: Float>(dim: usize) -> ReducedTensor<T> {
    let all = (1 << dim) - 1;
    ReducedTensor::from_fn(dim, |i, o| match (i, o) {
        (0, 0) => c(T::one(), T::zero()),
        (0, x) if x == all => c(-T::one(), T::zero()),
        _ => c(T::zero(), T::zero()),
    })
}

/// Reduced tensor in its `p - sin^2(theta/2) q` form.
pub fn reduced_from_pq<T: Float>(theta: T, dim: usize) -> ReducedTensor<T> {
    let s = (theta * half()).sin().powi(2);
    p_tensor(dim).scale_add(-s, &q_tensor(dim))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `sigma_x` between two ansatz layers.
    S,
    /// `n` between two ansatz layers.
    J,
    /// `sigma_x` with the derivative in the bra layer.
    K,
    /// Derivative in both layers.
    G,
    /// Derivative of the site tensor.
    DM,
    /// Norm tensor with the derivative in the ket layer.
    DT,
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Self::S),
            "J" | "j" => Ok(Self::J),
            "K" | "k" => Ok(Self::K),
            "g" | "G" => Ok(Self::G),
            "dM" | "dm" => Ok(Self::DM),
            "dT" | "dt" => Ok(Self::DT),
            other => Err(Error::InvalidKind(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorTensor<T> {
    Site(SiteTensor<T>),
    Double(DoubleTensor<T>),
    Reduced(ReducedTensor<T>),
}

/// Insertion tensors. Those whose outgoing legs stay diagonal are returned
/// reduced; `S` and `K` carry mixed outgoing pairs and stay double-layer.
pub fn operator_tensor<T: Float>(kind: OperatorKind, theta: T, phi: T, dim: usize) -> Result<OperatorTensor<T>> {
    let m = site_tensor(theta, phi, dim)?;
    let dm = d_site_tensor(theta, phi, dim)?;
    Ok(match kind {
        OperatorKind::S => OperatorTensor::Double(sandwich(&m, &sigma_x_op(), &m)),
        OperatorKind::J => OperatorTensor::Reduced(reduce(&sandwich(&m, &number_op(), &m))),
        OperatorKind::K => OperatorTensor::Double(sandwich(&dm, &sigma_x_op(), &m)),
        OperatorKind::G => OperatorTensor::Reduced(reduce(&sandwich(&dm, &identity_op(), &dm))),
        OperatorKind::DM => OperatorTensor::Site(dm),
        OperatorKind::DT => OperatorTensor::Reduced(reduce(&sandwich(&m, &identity_op(), &dm))),
    })
}

/// Per-site amplitudes read off a site tensor: `up` (all inputs 0),
/// `down_open` (all inputs 0) and `down_blocked` (some input 1).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LocalAmplitudes<T> {
    pub up: Complex<T>,
    pub down_open: Complex<T>,
    pub down_blocked: Complex<T>,
}

impl<T: Float> LocalAmplitudes<T> {
    pub fn from_tensor(m: &SiteTensor<T>) -> Self {
        let all = (1 << m.dim) - 1;
        Self { up: m.get(1, 0, all), down_open: m.get(0, 0, 0), down_blocked: m.get(0, 1, 0) }
    }

    /// Amplitude of emitting spin `z` given whether any upstream spin is up.
    #[inline]
    pub fn amp(&self, z: u32, blocked: bool) -> Complex<T> {
        match (z, blocked) {
            (0, false) => self.down_open,
            (0, true) => self.down_blocked,
            (_, false) => self.up,
            (_, true) => Complex::new(T::zero(), T::zero()),
        }
    }
}

impl LocalAmplitudes<f64> {
    pub fn ansatz(theta: f64, phi: f64) -> Self {
        Self::from_tensor(&site_tensor(theta, phi, 1).expect("dimension 1"))
    }

    pub fn ansatz_derivative(theta: f64, phi: f64) -> Self {
        Self::from_tensor(&d_site_tensor(theta, phi, 1).expect("dimension 1"))
    }
}
