use edgewave::flatlab::*;
use edgewave::ops::MediumParams;
use edgewave::C64;
use proptest::prelude::*;

mod common;

use common::{one_mass_fft_gap, point_trace, two_mass_fft_gap};

#[test]
fn inverse_symbol_on_dense_grid() {
    let (m, e) = (2.0, 1.0);
    let mut worst = 0.0f64;
    let mut amin = f64::INFINITY;
    for k in 0..10_000 {
        let xi = -50.0 + 100.0 * k as f64 / 9_999.0;
        let a = symbol_a(xi, m, e);
        worst = worst.max((a * symbol_a_inv(xi, m, e) - 1.0).norm());
        amin = amin.min(a.norm());
    }
    assert!(worst <= 1e-13, "{worst}");
    assert!(amin > 0.05, "{amin}");
    let far = symbol_a(1e4 * m, m, e);
    assert!((far - 1.0).norm() < 1e-3);
}

#[test]
fn symbol_limit_at_energy_matches_product_form() {
    // product form straight from the factorization, away from the 0/0 point
    let (m, e) = (2.0f64, 1.0f64);
    let w = (m * m - e * e).sqrt();
    let product = |xi: f64| {
        (1.0 - m / xi.hypot(w)) * (C64::new(1.0, 0.0) - C64::new(0.0, 2.0 * m * m) / (xi * xi - e * e))
    };
    for xi in [0.0, 0.5, 0.9, 1.3, 4.0, -2.2] {
        assert!((symbol_a(xi, m, e) - product(xi)).norm() < 1e-12);
    }
    for d in [1e-3, 1e-4, 1e-5] {
        assert!((product(e + d) - C64::new(0.0, -1.0)).norm() < 10.0 * d);
    }
}

#[test]
fn r_vanishes_at_energy_and_is_monotone() {
    let p = MediumParams::new(2.0, 3.0, 1.0).unwrap();
    assert!(symbol_r(1.0, &p).abs() <= 1e-12);
    assert!(symbol_r(-1.0, &p).abs() <= 1e-12);
    let xs: Vec<f64> = (0..=4000).map(|k| -20.0 + 40.0 * k as f64 / 4000.0).collect();
    for w in xs.windows(2) {
        let d = symbol_r(w[1], &p) - symbol_r(w[0], &p);
        // maximum at 0, tending to -1 at infinity
        if w[1] <= 0.0 {
            assert!(d > 0.0);
        } else if w[0] >= 0.0 {
            assert!(d < 0.0);
        }
    }
    // det of the L2 symbol is -R
    for xi in [0.0, 0.7, 2.0, -5.0] {
        let a = two_mass_matrix(xi, &p);
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!((det + symbol_r(xi, &p)).norm() < 1e-14);
    }
}

#[test]
fn null_vector_at_energy() {
    let p = MediumParams::new(2.0, 3.0, 1.0).unwrap();
    let v = null_vector(&p);
    for xi in [1.0, -1.0] {
        let a = two_mass_matrix(xi, &p);
        for row in a {
            let r = row[0] * v[0] + row[1] * v[1];
            assert!(r.norm() <= 1e-10, "{r}");
        }
    }
}

#[test]
fn stable_p2_symbol_matches_naive_product_off_energy() {
    let p = MediumParams::new(2.0, 3.0, 1.0).unwrap();
    let (d, det, mb) = (p.d(), p.det_v(), p.mbar());
    for xi in [0.0, 0.4, 1.7, -3.0, 12.0] {
        let q = C64::new(0.0, -2.0 * mb * mb) / (xi * xi - 1.0);
        // P2 = I + q v (1, -d)/det with v = (-1, d)
        let p2 = [[1.0 - q / det, q * d / det], [q * d / det, 1.0 - q * d * d / det]];
        let m = two_mass_matrix(xi, &p);
        let want: Vec<C64> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| m[i][0] * p2[0][j] + m[i][1] * p2[1][j])
            .collect();
        let got = two_mass_p2_matrix(xi, &p);
        for (k, w) in want.iter().enumerate() {
            assert!((got[k / 2][k % 2] - w).norm() < 1e-12 * (1.0 + w.norm()));
        }
    }
    // finite and invertible across ±E
    for xi in [1.0, -1.0, 1.0 + 1e-9] {
        let a = two_mass_p2_matrix(xi, &p);
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!(det.norm() > 1e-3 && det.is_finite());
    }
}

#[test]
fn zero_trace_gives_zero_density() {
    let g = FlatGrid::centered(0.1, 256);
    let rho = flat_solve_fft(&vec![C64::new(0.0, 0.0); 256], &g, 2.0, 1.0).unwrap();
    assert!(rho.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn gaussian_round_trip() {
    let (m, e) = (2.0, 1.0);
    let g = FlatGrid::centered(0.05, 2048);
    let trace: Vec<C64> = g.points().iter().map(|x| C64::new((-x * x).exp(), 0.3 * x * (-x * x).exp())).collect();
    let rho = flat_solve_fft(&trace, &g, m, e).unwrap();
    let back = apply_symbol(&rho, &g, |xi| symbol_a(xi, m, e));
    for (b, t) in back.iter().zip(&trace) {
        assert!((b - t * (2.0 * m)).norm() <= 1e-10);
    }
}

#[test]
fn undecayed_trace_is_rejected() {
    let g = FlatGrid::centered(0.1, 128);
    let trace = vec![C64::new(1.0, 0.0); 128];
    assert!(flat_solve_fft(&trace, &g, 2.0, 1.0).is_err());
}

#[test]
fn fft_solution_is_grid_converged() {
    let (m, e, src) = (2.0, 1.0, [0.0, 2.5]);
    let g1 = FlatGrid::centered(0.1, 2048);
    let g2 = FlatGrid::centered(0.05, 4096);
    let r1 = flat_solve_fft(&point_trace(m, e, src, &g1), &g1, m, e).unwrap();
    let r2 = flat_solve_fft(&point_trace(m, e, src, &g2), &g2, m, e).unwrap();
    let worst = (0..2048).map(|k| (r1[k] - r2[2 * k]).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn fft_density_matches_curved_solver_on_flat_line() {
    let err = one_mass_fft_gap(2.0, 1.0, [0.0, 2.5]);
    println!("flat one-mass density L2 rel {err:e}");
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn fft_two_mass_density_matches_curved_solver() {
    let err = two_mass_fft_gap(MediumParams::new(2.0, 3.0, 1.0).unwrap(), [0.0, 2.5]);
    println!("flat two-mass density L2 rel {err:e}");
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn sommerfeld_mirror_symmetry() {
    for (x, y) in [(1.0, 1.0), (2.5, -0.7), (0.3, 4.0)] {
        let a = sommerfeld_field([x, y], [0.0, 2.5], 2.0, 1.0).unwrap();
        let b = sommerfeld_field([-x, y], [0.0, 2.5], 2.0, 1.0).unwrap();
        assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-3), "{a} {b}");
    }
}

#[test]
fn sommerfeld_far_source_is_incident() {
    // ω·dist ≥ 30: surface contribution below e^{-30}
    let (m, e) = (2.0, 1.0);
    let w = 3f64.sqrt();
    let src = [0.0, 30.0 / w + 0.5];
    let x = [0.3, src[1] - 0.2];
    let us = sommerfeld_scattered(x, src, m, e, 1).unwrap();
    assert!(us.norm() <= (-30.0f64).exp(), "{us}");
}

#[test]
fn sommerfeld_rejects_points_on_interface() {
    assert!(sommerfeld_field([1.0, 0.0], [0.0, 2.5], 2.0, 1.0).is_err());
    assert!(sommerfeld_field([1.0, 1.0], [0.0, 2.5], 1.0, 2.0).is_err());
}

#[test]
fn probe_fixture_matches_oracle() {
    let text = include_str!("fixtures/flat_probes.json");
    let table: ProbeTable = serde_json::from_str(text).unwrap();
    for pr in &table.probes {
        let u = sommerfeld_field([pr[0], pr[1]], table.src, table.m, table.e).unwrap();
        let want = C64::new(pr[2], pr[3]);
        assert!((u - want).norm() <= 1e-9 * want.norm(), "{u} {want}");
        // doubled contour resolution agrees with the stored value
        let inc = edgewave::specfun::bessel_k0((3f64).sqrt() * (pr[0].hypot(pr[1] - table.src[1]))).unwrap()
            / (2.0 * std::f64::consts::PI);
        let fine = sommerfeld_scattered([pr[0], pr[1]], table.src, table.m, table.e, 4).unwrap() + inc;
        assert!((fine - want).norm() <= 1e-9 * want.norm());
    }
}

proptest! {
    #[test]
    fn symbol_inverse_identity(xi in -200.0f64..200.0, m in 0.5f64..5.0, frac in 0.05f64..0.95) {
        let e = frac * m;
        let a = symbol_a(xi, m, e);
        prop_assert!((a * symbol_a_inv(xi, m, e) - 1.0).norm() < 1e-12);
        prop_assert!(a.norm() > 0.0);
    }

    #[test]
    fn r_has_roots_only_at_energy(xi in -50.0f64..50.0, m1 in 1.0f64..4.0, dm in 0.0f64..3.0, frac in 0.1f64..0.9) {
        let p = MediumParams::new(m1, m1 + dm, frac * m1).unwrap();
        let e = p.energy;
        prop_assume!((xi.abs() - e).abs() > 1e-3);
        let r = symbol_r(xi, &p);
        // negative inside (-E, E), positive outside
        let sign_ok = if xi.abs() < e { r > 0.0 } else { r < 0.0 };
        prop_assert!(sign_ok || r.abs() < 1e-12);
    }
}
