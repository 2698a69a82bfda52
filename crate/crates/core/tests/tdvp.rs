use std::f64::consts::PI;

use proptest::prelude::*;
use pxp_core::exact::state_vector_small;
use pxp_core::expectation::Backend;
use pxp_core::lattice::SiteGraph;
use pxp_core::tdvp::*;
use pxp_core::{VariationalParams, C64};

// brute-force TDVP velocities on a ring: finite-difference tangent vectors
// of the full normalized state and the PXP Hamiltonian on bitstrings
fn pxp(g: &SiteGraph, psi: &[C64]) -> Vec<C64> {
    let n = g.n_sites();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for c in 0..psi.len() {
        if psi[c].norm() == 0.0 {
            continue;
        }
        for i in 0..n {
            if g.neighbors[i].iter().all(|&j| (c >> j) & 1 == 0) {
                out[c ^ (1 << i)] += psi[c];
            }
        }
    }
    out
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn brute_velocity(g: &SiteGraph, ta: f64, tb: f64) -> [f64; 2] {
    let h = 1e-5;
    let psi = state_vector_small(g, &VariationalParams::dynamical(ta, tb)).unwrap();
    let d = |da: f64, db: f64| -> Vec<C64> {
        let p = state_vector_small(g, &VariationalParams::dynamical(ta + da, tb + db)).unwrap();
        let m = state_vector_small(g, &VariationalParams::dynamical(ta - da, tb - db)).unwrap();
        p.iter().zip(&m).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    };
    let (da, db) = (d(h, 0.0), d(0.0, h));
    let hp = pxp(g, &psi);
    let gm = [[dot(&da, &da).re, dot(&da, &db).re], [dot(&db, &da).re, dot(&db, &db).re]];
    let b = [dot(&da, &hp).im, dot(&db, &hp).im];
    let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
    [(gm[1][1] * b[0] - gm[0][1] * b[1]) / det, (gm[0][0] * b[1] - gm[1][0] * b[0]) / det]
}

fn chain() -> Flow {
    Flow::new(1, Backend::Exact1d).unwrap()
}

// the ring converges to the infinite chain exponentially in its length
#[test]
fn chain_matches_brute_force_ring() {
    let flow = chain();
    let err = |n: usize, a: f64, b: f64| {
        let g = SiteGraph::circulant(n, &[1]).unwrap();
        let v = flow.velocity(a, b).unwrap();
        let w = brute_velocity(&g, a, b);
        (v[0] - w[0]).abs().max((v[1] - w[1]).abs())
    };
    for (a, b) in [(0.5, 2.5), (1.3, -0.7), (2.2, 1.1)] {
        let (e18, e22) = (err(18, a, b), err(22, a, b));
        assert!(e22 < 1e-4, "{a} {b}: {e22}");
        assert!(e22 < 0.5 * e18 || e22 < 1e-8, "{a} {b}: {e18} {e22}");
    }
}

#[test]
fn closed_form_at_reference_point() {
    // 2 (cos(pi/6) + sin(pi/4) cos^2(pi/4) tan(pi/6))
    let want = 2.0 * (3f64.sqrt() / 2.0 + 0.5f64.sqrt() * 0.5 / 3f64.sqrt());
    assert!((closed_form_1d(PI / 2.0, PI / 3.0) - want).abs() < 1e-14);
    assert!((want - 2.14030).abs() < 1e-5);
}

#[test]
fn closed_form_matches_numeric_grid() {
    let flow = chain();
    let n = 50;
    let axis: Vec<f64> = (0..n).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / n as f64).collect();
    let mut worst: f64 = 0.0;
    for &a in &axis {
        for &b in &axis {
            if (b.abs() - PI).abs() < 1e-3 || (a.abs() - PI).abs() < 1e-3 {
                continue;
            }
            let v = flow.velocity(a, b).unwrap();
            worst = worst.max((v[0] - closed_form_1d(a, b)).abs()).max((v[1] - closed_form_1d(b, a)).abs());
        }
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn axis_velocities_in_each_dimension() {
    for dim in 1..=3 {
        let flow = Flow::new(dim, Backend::default_for(dim)).unwrap();
        for theta in [-2.5, -1.0, 0.3, 1.7, 2.9] {
            let v = flow.velocity(theta, 0.0).unwrap();
            let want = axis_velocity(dim, theta);
            let tol = if dim == 3 { 1e-6 } else { 1e-9 };
            assert!((v[0] - want[0]).abs() < tol && (v[1] - want[1]).abs() < tol, "D={dim} {theta}: {v:?}");
            let u = flow.velocity(0.0, theta).unwrap();
            assert!((u[0] - want[1]).abs() < tol && (u[1] - want[0]).abs() < tol, "D={dim} {theta}: {u:?}");
        }
    }
}

#[test]
fn leakage_vanishes_on_axes() {
    for dim in 1..=3 {
        let flow = Flow::new(dim, Backend::default_for(dim)).unwrap();
        for theta in [-2.7, -1.2, 0.0, 0.4, 1.9, 3.0] {
            assert!(flow.gamma(theta, 0.0).unwrap() < 1e-8, "D={dim} ({theta}, 0)");
            assert!(flow.gamma(0.0, theta).unwrap() < 1e-8, "D={dim} (0, {theta})");
        }
    }
}

#[test]
fn leakage_is_largest_near_diagonal_corners() {
    let flow = chain();
    let corner = flow.gamma(2.5, 2.5).unwrap();
    let off = flow.gamma(2.5, 0.3).unwrap();
    assert!(corner > 10.0 * off, "{corner} {off}");
}

#[test]
fn chain_orbit() {
    let r = z2_orbit(&chain(), DEFAULT_DT, 7.0, 5).unwrap();
    assert!((r.period - 4.820).abs() < 5e-3, "{}", r.period);
    assert!((r.integrated_leakage - 0.17).abs() < 1e-2, "{}", r.integrated_leakage);
    assert!(r.closure < 1e-6);
    // in one dimension the orbit also closes on itself
    let start = [-PI, 0.0];
    let tr = integrate(&chain(), start, DEFAULT_DT, 6.0, 0, |_, _| false).unwrap();
    let (t, d) = closest_return(&tr, 1.0).unwrap();
    assert!((t - r.period).abs() < 1e-3 && d < 1e-4, "{t} {d}");
}

#[test]
fn square_orbit() {
    let flow = Flow::new(2, Backend::default_for(2)).unwrap();
    let r = z2_orbit(&flow, 1e-2, 7.0, 2).unwrap();
    assert!((r.period - 5.168).abs() < 5e-3, "{}", r.period);
    assert!((r.integrated_leakage - 0.16).abs() < 1e-2, "{}", r.integrated_leakage);
}

#[test]
fn chain_diagonal_path() {
    let (leak, tr) = diagonal_path_leakage(&chain(), DEFAULT_DT, 1).unwrap();
    assert!((leak - 1.28).abs() < 0.02, "{leak}");
    // the path stays on the diagonal
    assert!(tr.states.iter().all(|s| (s[0] - s[1]).abs() < 1e-9));
}

#[test]
fn flow_field_covers_grid() {
    let f = flow_field(&chain(), 8, true);
    assert_eq!(f.axis.len(), 8);
    assert!(f.points.iter().flatten().filter(|p| p.is_some()).count() >= 56);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exchange_symmetry(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let flow = chain();
        let v = flow.velocity(a, b).unwrap();
        let w = flow.velocity(b, a).unwrap();
        prop_assert!((v[0] - w[1]).abs() < 1e-9 && (v[1] - w[0]).abs() < 1e-9);
    }

    #[test]
    fn time_reversal_symmetry(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let flow = chain();
        let v = flow.velocity(a, b).unwrap();
        let w = flow.velocity(-a, -b).unwrap();
        prop_assert!((v[0] - w[0]).abs() < 1e-9 && (v[1] - w[1]).abs() < 1e-9);
    }

    #[test]
    fn leakage_is_finite_and_nonnegative(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = chain().gamma(a, b).unwrap();
        prop_assert!(g.is_finite() && g >= 0.0);
    }
}

