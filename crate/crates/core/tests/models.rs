use bandflow::analytics::spinboson_fnx;
use bandflow::flow::mielke_rhs;
use bandflow::models::*;
use bandflow::ode::Tolerance;
use bandflow::oracle::eigenvalues_tridiag;
use bandflow::{integrate_flow, BandMatrix, Config};
use proptest::prelude::*;

fn spectrum(h: &BandMatrix) -> Vec<f64> {
    let off = if h.dim() > 1 { h.band(1).to_vec() } else { Vec::new() };
    eigenvalues_tridiag(h.diagonal(), &off).unwrap().eigenvalues
}

fn lipkin_spectrum(p: &LipkinParams<f64>) -> Vec<f64> {
    let (a, b) = build_lipkin_blocks(p).unwrap();
    let mut all = spectrum(&a);
    all.extend(spectrum(&b));
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all
}

#[test]
fn lipkin_parity_rule() {
    for two_j in 1..=40u32 {
        let (a, b) = lipkin_block_dims(two_j);
        assert_eq!(a + b, two_j as usize + 1);
        if two_j % 2 == 0 {
            assert_eq!((a, b), (two_j as usize / 2 + 1, two_j as usize / 2));
        } else {
            assert_eq!(a, b);
        }
        let p = LipkinParams::<f64>::new(1.0, 0.1, two_j).unwrap();
        let (ha, hb) = build_lipkin_blocks(&p).unwrap();
        assert_eq!((ha.dim(), hb.dim()), (a, b));
    }
}

#[test]
fn lipkin_j1_spectrum() {
    let (xi0, v0) = (1.3, 0.45);
    let s = lipkin_spectrum(&LipkinParams::<f64>::new(xi0, v0, 2).unwrap());
    let r = (xi0 * xi0 + 4.0 * v0 * v0).sqrt();
    for (got, want) in s.iter().zip([-r, 0.0, r]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn lipkin_matches_dense_pseudo_spin_matrix() {
    // xi0 J_z + V0 (J_+^2 + J_-^2) built directly in the |J, m> basis
    for two_j in [3u32, 6, 9] {
        let (xi0, v0) = (0.8, 0.07);
        let j = two_j as f64 / 2.0;
        let dim = two_j as usize + 1;
        let mut rows = vec![vec![0.0; dim]; dim];
        for k in 0..dim {
            let m = -j + k as f64;
            rows[k][k] = xi0 * m;
            if k + 2 < dim {
                let c = ((j * (j + 1.0) - m * (m + 1.0)) * (j * (j + 1.0) - (m + 1.0) * (m + 2.0))).sqrt();
                rows[k][k + 2] = v0 * c;
                rows[k + 2][k] = v0 * c;
            }
        }
        let dense = bandflow::DenseMatrix::from_rows(&rows).unwrap();
        let want = bandflow::oracle::eigenvalues_dense(&dense).unwrap().eigenvalues;
        let got = lipkin_spectrum(&LipkinParams::<f64>::new(xi0, v0, two_j).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-11, "2J={two_j}: {g} vs {w}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lipkin_spectrum_even_in_v0(xi0 in 0.1..3.0f64, v0 in 0.0..0.5f64, two_j in 1u32..30) {
        let plus = lipkin_spectrum(&LipkinParams::<f64>::new(xi0, v0, two_j).unwrap());
        let minus = lipkin_spectrum(&LipkinParams::<f64>::new(xi0, -v0, two_j).unwrap());
        let scale = plus.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in plus.iter().zip(&minus) {
            prop_assert!((a - b).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn spinboson_entries_match_formula(
        delta in 0.0..6.0f64,
        lambda in 0.0..5.0f64,
        omega in 0.1..3.0f64,
        plus in any::<bool>(),
        n_trunc in 2usize..60,
    ) {
        let branch = if plus { Branch::Plus } else { Branch::Minus };
        let s = if plus { 1.0 } else { -1.0 };
        let h = build_spinboson(&SpinBosonParams::<f64>::new(delta, lambda, omega, branch, n_trunc).unwrap()).unwrap();
        prop_assert_eq!(h.dim(), n_trunc);
        prop_assert_eq!(h.bandwidth(), 1);
        for n in 0..n_trunc {
            let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert_eq!(h.get(n, n), n as f64 * omega + s * parity * delta * 0.5);
            if n + 1 < n_trunc {
                prop_assert_eq!(h.get(n, n + 1), 0.5 * lambda * ((n + 1) as f64).sqrt());
            }
        }
    }

    #[test]
    fn lipkin_reduced_conservation(xi0 in 0.5..2.0f64, frac in 0.0..0.95f64, two_j in 2u32..200) {
        let j = two_j as f64 / 2.0;
        let v0 = frac * xi0 / (4.0 * j);
        let p = LipkinParams::<f64>::new(xi0, v0, two_j).unwrap();
        let tol = Tolerance { rel: 1e-13, abs: 1e-15 };
        for block in [LipkinBlock::A, LipkinBlock::B] {
            let flow = integrate_lipkin_reduced(&p, block, 1e4, tol).unwrap();
            let s0 = LipkinReducedState::initial(&p, block);
            let c0 = lipkin_conserved(&s0, &p);
            let a0sq = s0.a * s0.a;
            for (_, s) in &flow.trajectory {
                prop_assert!((lipkin_conserved(s, &p) - c0).abs() <= 1e-10 * a0sq);
                prop_assert!(s.f >= 0.0 && s.f <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn lipkin_reduced_reaches_rpa_slope() {
    let p = LipkinParams::<f64>::new(1.0, 0.004, 100).unwrap();
    let flow = integrate_lipkin_reduced(&p, LipkinBlock::A, 1e4, Tolerance { rel: 1e-13, abs: 1e-15 }).unwrap();
    assert!(flow.converged);
    let want = (4.0f64 - 64.0 * 0.004f64.powi(2) * 2500.0).sqrt();
    assert!((flow.last().a - want).abs() < 1e-8, "{} vs {want}", flow.last().a);
}

#[test]
fn delta0_closed_form_solves_the_flow() {
    let p = SpinBosonParams::<f64>::new(0.0, 1.7, 0.9, Branch::Plus, 40).unwrap();
    let h = 1e-5;
    for n in 1..8 {
        for ell in [0.1, 0.5, 1.3, 4.0] {
            let (e_plus, _) = spinboson_delta0_flow(n, ell + h, &p).unwrap();
            let (e_minus, _) = spinboson_delta0_flow(n, ell - h, &p).unwrap();
            let de = (e_plus - e_minus) / (2.0 * h);
            let (_, d_n) = spinboson_delta0_flow(n, ell, &p).unwrap();
            let (_, d_prev) = spinboson_delta0_flow(n - 1, ell, &p).unwrap();
            assert!((de - (-2.0 * d_n * d_n + 2.0 * d_prev * d_prev)).abs() < 1e-8);
        }
    }
}

#[test]
fn delta0_closed_form_matches_integrated_flow() {
    let p = SpinBosonParams::<f64>::new(0.0, 1.0, 1.0, Branch::Plus, 60).unwrap();
    let h = build_spinboson(&p).unwrap();
    let ells = vec![0.5, 1.0, 2.0];
    let r = integrate_flow(&h, &Config::default().with_snapshots(ells)).unwrap();
    for snap in &r.snapshots {
        for n in 0..10 {
            let (e, d) = spinboson_delta0_flow(n, snap.ell, &p).unwrap();
            assert!((snap.matrix.get(n, n) - e).abs() < 1e-8);
            assert!((snap.matrix.get(n, n + 1) - d).abs() < 1e-8);
        }
    }
}

/// The ansatz `eps_n = n w - (l^2/4w)(1 - e^{-2wl}) + s(-1)^n (D/2) f_n`,
/// `delta_n^2 = (l^2/4)(n+1) e^{-2wl} + s(-1)^n (D/2) g_n` is exact, so the
/// reduced right-hand side must reproduce the full flow at any point.
#[test]
fn reduced_spinboson_rhs_reproduces_full_flow() {
    for branch in Branch::both() {
        let p = SpinBosonParams::<f64>::new(1.3, 0.9, 1.1, branch, 24).unwrap();
        let h0 = build_spinboson(&p).unwrap();
        let r = integrate_flow(&h0, &Config::default().with_snapshots(vec![0.0, 0.2, 0.7, 1.5])).unwrap();
        let (w, l, d) = (p.omega, p.lambda, p.delta);
        for snap in &r.snapshots {
            let hm = &snap.matrix;
            let ell = snap.ell;
            let x = 1.0 - (-2.0 * w * ell).exp();
            let len = hm.dim() - 1;
            let mut f = Vec::new();
            let mut g = Vec::new();
            for n in 0..len {
                let k = p.parity_sign(n) * 0.5 * d;
                let e0 = n as f64 * w - l * l / (4.0 * w) * x;
                f.push((hm.get(n, n) - e0) / k);
                let dn = hm.get(n, n + 1);
                g.push((dn * dn - 0.25 * l * l * (n + 1) as f64 * (1.0 - x)) / k);
            }
            let state = SpinBosonReducedState { n_lo: 0, x, f, g: g.clone() };
            let (df_dx, dg_dx) = spinboson_reduced_rhs(&state, &p).unwrap();

            let full = mielke_rhs(hm);
            let dl_dx = 1.0 / (2.0 * w * (1.0 - x));
            // the last level sees the closure instead of f_{n+1}
            for n in 0..len - 1 {
                let k = p.parity_sign(n) * 0.5 * d;
                let de0 = -0.5 * l * l * (1.0 - x);
                let df = (full.get(n, n) - de0) / k * dl_dx;
                let dn = hm.get(n, n + 1);
                let dd2 = 2.0 * dn * full.get(n, n + 1);
                let dg = (dd2 + 0.5 * l * l * (n + 1) as f64 * w * (1.0 - x)) / k * dl_dx;
                assert!((df_dx[n] - df).abs() < 1e-9 * (1.0 + df.abs()), "f', n={n}, l={ell}");
                assert!((dg_dx[n] - dg).abs() < 1e-9 * (1.0 + dg.abs()), "g', n={n}, l={ell}");
            }
        }
    }
}

#[test]
fn reduced_spinboson_without_coupling_stays_put() {
    let p = SpinBosonParams::<f64>::new(2.0, 0.0, 1.0, Branch::Plus, 10).unwrap();
    let xs = [0.0, 0.5, 0.99];
    let sol = integrate_spinboson_reduced(5, &p, DEFAULT_HALF_WIDTH, &xs, Tolerance { rel: 1e-12, abs: 1e-14 }).unwrap();
    assert_eq!((sol.n_lo, sol.n_hi), (0, 15));
    for (_, f) in &sol.samples {
        assert!((f - 1.0).abs() < 1e-14);
    }
    assert!((sol.f_at_one - 1.0).abs() < 1e-12);
}

#[test]
fn reduced_spinboson_rejects_the_endpoint() {
    let p = SpinBosonParams::<f64>::new(1.0, 1.0, 1.0, Branch::Plus, 10).unwrap();
    let tol = Tolerance { rel: 1e-10, abs: 1e-12 };
    let err = integrate_spinboson_reduced(5, &p, 3, &[1.0], tol).unwrap_err();
    assert!(matches!(err, ModelError::XTooClose { .. }));
}

/// Large-n agreement with the Bessel-function solution. The approximation
/// behind the closed form drops terms of relative order `lambda / (omega sqrt(n))`,
/// so the deviation is a few 1e-3 at n = 200 rather than integrator noise.
#[test]
fn reduced_spinboson_tracks_bessel_form_at_large_n() {
    let p = SpinBosonParams::<f64>::new(0.5, 1.0, 1.0, Branch::Plus, 400).unwrap();
    let xs: Vec<f64> = (0..=100).map(|i| 0.999 * i as f64 / 100.0).collect();
    let tol = Tolerance { rel: 1e-11, abs: 1e-13 };
    let sol = integrate_spinboson_reduced(200, &p, DEFAULT_HALF_WIDTH, &xs, tol).unwrap();
    let mut worst = 0.0f64;
    for &(x, f) in &sol.samples {
        worst = worst.max((f - spinboson_fnx(200, x, &p).unwrap()).abs());
    }
    assert!(worst < 5e-2, "sup deviation {worst}");
    assert!((sol.f_at_one - spinboson_fnx(200, 1.0, &p).unwrap()).abs() < 5e-2);
}

#[test]
fn truncation_rule_is_stable_under_doubling() {
    for (lambda, n_target) in [(0.5, 5), (1.0, 10), (2.0, 10), (4.0, 20)] {
        for delta in [0.0, 2.5, 5.0] {
            let n = default_truncation(n_target, lambda, 1.0);
            let p = SpinBosonParams::<f64>::new(delta, lambda, 1.0, Branch::Plus, n).unwrap();
            let a = spectrum(&build_spinboson(&p).unwrap());
            let b = spectrum(&build_spinboson(&p.with_n_trunc(2 * n)).unwrap());
            for k in 0..n / 4 {
                assert!((a[k] - b[k]).abs() < 1e-8, "lambda={lambda} delta={delta} k={k}");
            }
        }
    }
}

#[test]
fn spinboson_branches_together_give_the_full_spectrum() {
    // -(delta/2) sigma_x + (lambda/2) sigma_z (b + b^+) + omega b^+ b in the
    // sigma_z x Fock basis, index 2 n + s
    let (delta, lambda, omega, nb) = (0.9, 1.3, 1.1, 60);
    let dim = 2 * nb;
    let mut rows = vec![vec![0.0; dim]; dim];
    for n in 0..nb {
        for s in 0..2 {
            let i = 2 * n + s;
            rows[i][i] = omega * n as f64;
            rows[i][2 * n + 1 - s] = -delta / 2.0;
            if n + 1 < nb {
                let sz = if s == 0 { 1.0 } else { -1.0 };
                let v = 0.5 * lambda * sz * ((n + 1) as f64).sqrt();
                rows[i][i + 2] = v;
                rows[i + 2][i] = v;
            }
        }
    }
    let full = bandflow::oracle::eigenvalues_dense(&bandflow::DenseMatrix::from_rows(&rows).unwrap())
        .unwrap()
        .eigenvalues;
    let mut union = Vec::new();
    for branch in Branch::both() {
        let p = SpinBosonParams::<f64>::new(delta, lambda, omega, branch, nb).unwrap();
        union.extend(spectrum(&build_spinboson(&p).unwrap()));
    }
    union.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in full.iter().zip(&union).take(20) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}
