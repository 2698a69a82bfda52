use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use pxp_core::lattice::{Lattice, SiteGraph};
use pxp_core::Sublattice;
use pxp_ed::*;
use rand::{Rng, SeedableRng};

fn basis(ext: &[usize]) -> ConstrainedBasis {
    build_basis(&Lattice::periodic(ext).unwrap()).unwrap()
}

fn admissible(g: &SiteGraph, c: u64) -> bool {
    (0..g.n_sites()).all(|i| c >> i & 1 == 0 || g.neighbors[i].iter().all(|&j| c >> j & 1 == 0))
}

// dense Hamiltonian written straight from the bitstring definition
fn dense(g: &SiteGraph, model: Model) -> (Vec<u64>, DMatrix<f64>) {
    let n = g.n_sites();
    let states: Vec<u64> = (0..1u64 << n).filter(|&c| admissible(g, c)).collect();
    let mut h = DMatrix::zeros(states.len(), states.len());
    for (a, &c) in states.iter().enumerate() {
        let ups = c.count_ones() as f64;
        let pairs = g.nnn_pairs.iter().filter(|&&(i, j)| c >> i & 1 == 1 && c >> j & 1 == 1).count() as f64;
        h[(a, a)] = -model.delta * ups + model.v * pairs;
        for i in 0..n {
            let d = c ^ 1 << i;
            if admissible(g, d) {
                let b = states.binary_search(&d).unwrap();
                h[(b, a)] = 1.0;
            }
        }
    }
    (states, h)
}

fn dense_ground(g: &SiteGraph, model: Model) -> (f64, Vec<f64>) {
    let (_, h) = dense(g, model);
    let eig = SymmetricEigen::new(h);
    let k = eig.eigenvalues.imin();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

fn peak(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let i = (1..n).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
    let h = xs[1] - xs[0];
    xs[i] + 0.5 * h * (ys[i - 1] - ys[i + 1]) / (ys[i - 1] - 2.0 * ys[i] + ys[i + 1])
}

#[test]
fn fibonacci_and_lucas_counts() {
    assert_eq!(build_basis(&Lattice::open(&[5]).unwrap()).unwrap().len(), 13);
    assert_eq!(basis(&[8]).len(), 47);
    let (mut f, mut l) = ((1usize, 2usize), (2usize, 1usize));
    for n in 1..=20 {
        // open: F(n+2); periodic: L(n)
        assert_eq!(build_basis(&Lattice::open(&[n]).unwrap()).unwrap().len(), f.1);
        f = (f.1, f.0 + f.1);
        l = (l.1, l.0 + l.1);
        if n >= 4 && n % 2 == 0 {
            assert_eq!(basis(&[n]).len(), l.0, "N={n}");
        }
    }
}

#[test]
fn square_count_matches_exhaustive() {
    let b = basis(&[4, 4]);
    let g = b.graph().clone();
    let want: Vec<u64> = (0..1u64 << 16).filter(|&c| admissible(&g, c)).collect();
    assert_eq!(b.states(), &want[..]);
    assert_eq!(b.len(), 743);
    assert!(b.states().iter().enumerate().all(|(i, &c)| b.index_of(c) == Some(i) && b.is_admissible(c)));
}

#[test]
fn budget_is_enforced() {
    let g = Lattice::periodic(&[6, 6]).unwrap().graph().unwrap();
    match build_basis_with_budget(&g, 1000) {
        Err(Error::Budget { budget, estimate, sites }) => {
            assert_eq!((budget, sites), (1000, 36));
            assert!(estimate > 1000.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn size_estimate_is_close() {
    for ext in [vec![20usize], vec![4, 6]] {
        let b = basis(&ext);
        let est = estimate_basis_size(b.graph(), 4096);
        assert!((est / b.len() as f64 - 1.0).abs() < 0.1, "{ext:?}: {est} vs {}", b.len());
    }
}

#[test]
fn vacuum_action() {
    let b = basis(&[10]);
    let h = Hamiltonian::new(&b, Model::PXP);
    let out = h.apply(&b.vacuum()).unwrap();
    for (i, &c) in b.states().iter().enumerate() {
        let want = if c.count_ones() == 1 { 1.0 } else { 0.0 };
        assert_eq!(out[i], want);
    }
}

#[test]
fn z2_diagonal() {
    for ext in [vec![12usize], vec![4, 4]] {
        let b = basis(&ext);
        let (delta, v) = (0.7, -0.4);
        let h = Hamiltonian::new(&b, Model::new(delta, v));
        let z2 = b.z2(Sublattice::A);
        let hz = h.apply(&z2).unwrap();
        let g = b.graph();
        let intra = g.nnn_pairs.iter().filter(|&&(i, j)| g.sublattice[i] == Sublattice::A && g.sublattice[j] == Sublattice::A).count();
        let n = b.n_sites() as f64;
        let want = -delta * n / 2.0 + v * intra as f64;
        let got: f64 = z2.iter().zip(&hz).map(|(a, b)| a * b).sum();
        assert!((got - want).abs() < 1e-12, "{ext:?}: {got} {want}");
    }
}

#[test]
fn dimension_mismatch() {
    let b = basis(&[8]);
    let h = Hamiltonian::new(&b, Model::PXP);
    assert!(matches!(h.apply(&[0.0; 3]), Err(Error::Dimension { expected: 47, got: 3 })));
}

#[test]
fn matches_dense_matrix() {
    for ext in [vec![10usize], vec![4, 4]] {
        let b = basis(&ext);
        let model = Model::new(-0.3, 0.8);
        let (states, m) = dense(b.graph(), model);
        assert_eq!(states, b.states());
        let h = Hamiltonian::new(&b, model);
        for k in 0..b.len() {
            let mut e = vec![0.0; b.len()];
            e[k] = 1.0;
            let col = h.apply(&e).unwrap();
            for (i, x) in col.iter().enumerate() {
                assert!((x - m[(i, k)]).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn ground_state_matches_dense() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for ext in [vec![12usize], vec![4, 4]] {
        let b = basis(&ext);
        for _ in 0..4 {
            let model = Model::new(rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0));
            let gs = ground_state(&Hamiltonian::new(&b, model), &LanczosOptions::default()).unwrap();
            let (e, v) = dense_ground(b.graph(), model);
            assert!((gs.energy - e).abs() < 1e-9, "{ext:?} {model:?}: {} {e}", gs.energy);
            let ov: f64 = gs.vector.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!(gs.degenerate || (ov.abs() - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn fidelity_susceptibility_matches_dense() {
    let b = basis(&[4, 4]);
    let d = 1e-3;
    for delta in [-0.5, 0.15, 1.0] {
        let (_, a) = dense_ground(b.graph(), Model::new(delta, 0.0));
        let (_, c) = dense_ground(b.graph(), Model::new(delta + d, 0.0));
        let ov: f64 = a.iter().zip(&c).map(|(x, y)| x * y).sum();
        let want = (1.0 - ov.abs()) / (d * d);
        let got = fidelity_susceptibility(&b, Model::new(delta, 0.0), d).unwrap();
        assert!((got - want).abs() < 1e-3 * want.max(1.0), "{delta}: {got} {want}");
    }
}

// finite-size peaks lie above the infinite-lattice transition and move down
#[test]
fn square_susceptibility_peak() {
    let small = basis(&[4, 4]);
    let p16 = peak(|x| fidelity_susceptibility(&small, Model::new(x, 0.0), 1e-3).unwrap(), -0.6, 0.6, 12);
    assert!((p16 - 0.14).abs() < 0.03, "{p16}");
    let large = basis(&[4, 6]);
    let p24 = peak(|x| fidelity_susceptibility(&large, Model::new(x, 0.0), 1e-3).unwrap(), -0.2, 0.4, 6);
    assert!(p24 < p16 && p24 > -0.19, "{p24}");
    let deep = fidelity_susceptibility(&small, Model::new(-10.0, 0.0), 1e-3).unwrap();
    assert!(deep < 1e-3, "{deep}");
}

#[test]
fn chain_susceptibility_peak() {
    let (b16, b20) = (basis(&[16]), basis(&[20]));
    let p16 = peak(|x| fidelity_susceptibility(&b16, Model::new(x, 0.0), 1e-3).unwrap(), 1.0, 1.6, 6);
    let p20 = peak(|x| fidelity_susceptibility(&b20, Model::new(x, 0.0), 1e-3).unwrap(), 1.0, 1.6, 6);
    assert!(p16 < p20 && (p20 - 1.31).abs() < 0.05, "{p16} {p20}");
}

#[test]
fn evolution_matches_dense_exponential() {
    let b = basis(&[12]);
    let (_, m) = dense(b.graph(), Model::new(0.4, 0.3));
    let eig = SymmetricEigen::new(m);
    let h = Hamiltonian::new(&b, Model::new(0.4, 0.3));
    let psi0 = b.z2(Sublattice::B);
    let t = 1.7;
    let c0 = eig.eigenvectors.transpose() * DMatrix::from_column_slice(b.len(), 1, &psi0);
    let want: Vec<C64> = (0..b.len())
        .map(|i| (0..b.len()).map(|k| eig.eigenvectors[(i, k)] * c0[k] * C64::from_polar(1.0, -eig.eigenvalues[k] * t)).sum())
        .collect();
    let v: Vec<C64> = psi0.iter().map(|&x| C64::new(x, 0.0)).collect();
    let got = evolve(&h, &v, t, &KrylovOptions::default()).unwrap();
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn fidelity_series_basics() {
    let b = basis(&[14]);
    let h = Hamiltonian::new(&b, Model::PXP);
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let s = time_evolve(&h, &b.cat_state(), &times, &KrylovOptions::default()).unwrap();
    assert_eq!(s.fidelity[0], 1.0);
    assert!(s.norm.iter().all(|n| (n - 1.0).abs() < 1e-9));
}

#[test]
fn chain_revival() {
    let b = basis(&[18]);
    let h = Hamiltonian::new(&b, Model::PXP);
    let times: Vec<f64> = (0..=600).map(|i| i as f64 * 0.01).collect();
    let s = time_evolve(&h, &b.cat_state(), &times, &KrylovOptions::default()).unwrap();
    let r = revival_period(&s).unwrap();
    assert!((r.period - 4.79).abs() < 0.02, "{r:?}");
    // the first maximum sits halfway
    assert!((2.0 * r.half - r.period).abs() < 0.05, "{r:?}");
}

#[test]
fn square_revival_and_quasi_two_dimensional_cube() {
    let times: Vec<f64> = (0..=600).map(|i| i as f64 * 0.01).collect();
    let run = |ext: &[usize]| {
        let b = basis(ext);
        let h = Hamiltonian::new(&b, Model::PXP);
        (b.len(), revival_period(&time_evolve(&h, &b.cat_state(), &times, &KrylovOptions::default()).unwrap()).unwrap())
    };
    let (n2, sq) = run(&[4, 4]);
    assert!((sq.period - 5.15).abs() < 0.02, "{sq:?}");
    let (n3, cube) = run(&[2, 2, 4]);
    assert_eq!(n2, n3);
    assert!((cube.period - sq.period).abs() < 1e-6, "{cube:?} {sq:?}");
}

#[test]
fn no_revival_is_an_error() {
    let b = basis(&[10]);
    let h = Hamiltonian::new(&b, Model::PXP);
    let s = time_evolve(&h, &b.cat_state(), &[0.0, 0.1, 0.2], &KrylovOptions::default()).unwrap();
    assert!(matches!(revival_period(&s), Err(Error::NoRevival { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian(seed in any::<u64>(), delta in -3.0f64..3.0, v in -2.0f64..2.0) {
        let b = basis(&[4, 4]);
        let h = Hamiltonian::new(&b, Model::new(delta, v));
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let x: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (hx, hy) = (h.apply(&x).unwrap(), h.apply(&y).unwrap());
        let a: f64 = y.iter().zip(&hx).map(|(p, q)| p * q).sum();
        let c: f64 = hy.iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn norm_is_conserved(delta in -2.0f64..2.0, v in -1.0f64..1.0, t in 0.0f64..5.0) {
        let b = basis(&[12]);
        let h = Hamiltonian::new(&b, Model::new(delta, v));
        let psi: Vec<C64> = b.z2(Sublattice::A).iter().map(|&x| C64::new(x, 0.0)).collect();
        let out = evolve(&h, &psi, t, &KrylovOptions::default()).unwrap();
        let n: f64 = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-9);
    }
}
