use mdcert_core::iqc::{
    check_frequency_condition, combined_pi, dt_sector_filter, dt_weighted_off_by_one_filter, MultiplierParams,
};
use mdcert_core::lure::{
    build_ct_state_space, build_dt_state_space, delta_apply, transfer_function, Complex64, MdNonlinearity,
};
use mdcert_core::problem::{
    conjugate_params, default_stepsize, make_quadratic_instance, sector_qc_residual, FunctionClassParams,
};
use mdcert_core::{ProblemData, TestFunction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn moduli() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..5.0, 1.0f64..20.0).prop_map(|(mu, ratio)| (mu, mu * ratio))
}

fn point(d: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-5.0f64..5.0, d).prop_map(DVector::from_vec)
}

fn instances(f: FunctionClassParams, d: usize) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::extremal_quadratic(f, d).unwrap()];
    out.push(TestFunction::huber(f, d, 0.7).unwrap());
    if d >= 2 {
        let mut spectrum: Vec<f64> = (0..d).map(|i| f.mu() + (f.l() - f.mu()) * i as f64 / (d - 1) as f64).collect();
        // pin the top entry; the interpolation can overshoot L by an ulp
        spectrum[d - 1] = f.l();
        spectrum.reverse();
        out.push(make_quadratic_instance(f, d, &spectrum).unwrap());
    }
    out
}

/// Independent closed form of the continuous plant's transfer function.
fn closed_form_tf(p: &ProblemData, s: Complex64) -> DMatrix<Complex64> {
    let (eta, mf, mc) = (p.eta(), p.f().mu(), p.phi_conj().mu());
    let scale = Complex64::new(1.0, 0.0) / (s + eta * mf * mc);
    let core = [[Complex64::new(-eta * mc, 0.0), s], [Complex64::new(-eta, 0.0), Complex64::new(-eta * mf, 0.0)]];
    let d = p.dim();
    let mut g = DMatrix::zeros(2 * d, 2 * d);
    for (r, row) in core.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            for k in 0..d {
                g[(r * d + k, c * d + k)] = v * scale;
            }
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_is_an_involution((mu, l) in moduli()) {
        let p = FunctionClassParams::new(mu, l).unwrap();
        let back = conjugate_params(conjugate_params(p).unwrap()).unwrap();
        prop_assert!(((back.mu() - mu) / mu).abs() <= 1e-12);
        prop_assert!(((back.l() - l) / l).abs() <= 1e-12);
    }

    #[test]
    fn stepsize_decreases_in_smoothness((mu, l) in moduli(), bump in 1.01f64..3.0) {
        let f = FunctionClassParams::new(mu, l).unwrap();
        let c = FunctionClassParams::new(1.0, 2.0).unwrap();
        let c2 = FunctionClassParams::new(1.0, 2.0 * bump).unwrap();
        let a = default_stepsize(&ProblemData::from_conjugate(f, c, 1.0, 1).unwrap());
        let b = default_stepsize(&ProblemData::from_conjugate(f, c2, 1.0, 1).unwrap());
        prop_assert!(b < a);
    }

    #[test]
    fn unit_condition_number_iff_degenerate((mu, l) in moduli(), (mc, lc) in moduli(), equal in any::<bool>()) {
        let (l, lc) = if equal { (mu, mc) } else { (l, lc) };
        let f = FunctionClassParams::new(mu, l).unwrap();
        let c = FunctionClassParams::new(mc, lc).unwrap();
        let p = ProblemData::from_conjugate(f, c, 1.0, 1).unwrap();
        let degenerate = l == mu && lc == mc;
        prop_assert_eq!((p.condition_number() - 1.0).abs() < 1e-15, degenerate);
    }

    #[test]
    fn plant_eigenvalues_closed_form((mu, l) in moduli(), eta in 0.01f64..2.0, d in 1usize..4) {
        let f = FunctionClassParams::new(mu, l).unwrap();
        let p = ProblemData::from_conjugate(f, f, eta, d).unwrap();
        let ct = build_ct_state_space(&p);
        let dt = build_dt_state_space(&p);
        for e in ct.eigenvalues() {
            prop_assert!((e.re + eta * mu * mu).abs() < 1e-12 && e.im == 0.0);
        }
        for e in dt.eigenvalues() {
            prop_assert!((e.re - (1.0 - eta * mu * mu)).abs() < 1e-12 && e.im == 0.0);
        }
    }

    #[test]
    fn transfer_function_matches_closed_form(
        (mu, l) in moduli(), (mc, lc) in moduli(), eta in 0.05f64..2.0,
        re in -3.0f64..3.0, im in -3.0f64..3.0, d in 1usize..3,
    ) {
        let pole = -eta * mu * mc;
        prop_assume!(((re - pole).powi(2) + im * im).sqrt() > 1e-2);
        let f = FunctionClassParams::new(mu, l).unwrap();
        let c = FunctionClassParams::new(mc, lc).unwrap();
        let p = ProblemData::from_conjugate(f, c, eta, d).unwrap();
        let s = Complex64::new(re, im);
        let g = transfer_function(&build_ct_state_space(&p), s).unwrap();
        let want = closed_form_tf(&p, s);
        let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in g.iter().zip(want.iter()) {
            prop_assert!((a - b).norm() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn sector_residual_nonnegative((mu, l) in moduli(), d in 1usize..4, seed in point(8), other in point(8)) {
        let f = FunctionClassParams::new(mu, l).unwrap();
        for inst in instances(f, d) {
            let x = DVector::from_iterator(d, seed.iter().take(d).copied());
            let y = DVector::from_iterator(d, other.iter().take(d).copied());
            prop_assert!(sector_qc_residual(&inst, &x, &y).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn delta_is_slope_restricted(
        (mu, l) in moduli(), (mc, lc) in moduli(), a in point(4), b in point(4), huber in any::<bool>(),
    ) {
        let d = 2;
        let fp = FunctionClassParams::new(mu, l).unwrap();
        let cp = FunctionClassParams::new(mc, lc).unwrap();
        let p = ProblemData::from_conjugate(fp, cp, 0.5, d).unwrap();
        let (f, c) = if huber {
            (TestFunction::huber(fp, d, 0.4).unwrap(), TestFunction::huber(cp, d, 1.3).unwrap())
        } else {
            (TestFunction::extremal_quadratic(fp, d).unwrap(), TestFunction::extremal_quadratic(cp, d).unwrap())
        };
        let da = delta_apply(&p, &f, &c, &a).unwrap();
        let db = delta_apply(&p, &f, &c, &b).unwrap();
        let widths = [l - mu, lc - mc];
        for ch in 0..2 {
            let r = ch * d..(ch + 1) * d;
            let dy = a.rows(r.start, d) - b.rows(r.start, d);
            let du = da.rows(r.start, d) - db.rows(r.start, d);
            let n2 = dy.norm_squared();
            prop_assume!(n2 > 1e-8);
            let q = du.dot(&dy) / n2;
            prop_assert!(q >= -1e-9 && q <= widths[ch] + 1e-9, "channel {} quotient {}", ch, q);
        }
    }

    #[test]
    fn loop_resolves_without_iteration((mu, l) in moduli(), zt in point(2)) {
        let fp = FunctionClassParams::new(mu, l).unwrap();
        let p = ProblemData::from_conjugate(fp, fp, 0.3, 2).unwrap();
        let f = TestFunction::huber(fp, 2, 0.5).unwrap();
        let nl = MdNonlinearity::new(&p, &f, &f).unwrap();
        let ss = build_ct_state_space(&p);
        let (y, u) = nl.close_loop(&ss, &zt).unwrap();
        // the returned pair is a fixed point of y = C zt + D u, u = Delta(y)
        let y_again = ss.c() * &zt + ss.d() * &u;
        let u_again = nl.apply(&y).unwrap();
        prop_assert!((&y - y_again).amax() < 1e-12);
        prop_assert!((&u - u_again).amax() < 1e-12);
    }

    #[test]
    fn combined_multiplier_structure(
        (mu, l) in moduli(), a1 in 0.0f64..3.0, a2 in 0.0f64..3.0, gamma in 0.0f64..3.0, omega in -50.0f64..50.0,
    ) {
        let fp = FunctionClassParams::new(mu, l).unwrap();
        let p = ProblemData::from_conjugate(fp, fp, 1.0, 2).unwrap();
        let mp = MultiplierParams::new([a1, a2], [0.0, gamma], gamma).unwrap();
        let pi = combined_pi(&p, &mp, omega);
        prop_assert!((&pi - pi.adjoint()).iter().all(|v| v.norm() < 1e-14));
        let neg = combined_pi(&p, &mp, -omega);
        prop_assert!((&neg - pi.conjugate()).iter().all(|v| v.norm() < 1e-14));
        let n = 4;
        let yy = pi.view((0, 0), (n, n)).into_owned();
        let uu = pi.view((n, n), (n, n)).into_owned();
        prop_assert!(mdcert_core::iqc::hermitian_max_eigenvalue(&(-yy)) <= 1e-12);
        prop_assert!(mdcert_core::iqc::hermitian_max_eigenvalue(&uu) <= 1e-12);
    }

    #[test]
    fn filtered_iqcs_hold_on_sector_signals(
        (mu, l) in moduli(), (mc, lc) in moduli(), ys in proptest::collection::vec(point(2), 1..20),
        rho in 0.3f64..1.0, a in 0.0f64..2.0, b in 0.0f64..2.0,
    ) {
        let fp = FunctionClassParams::new(mu, l).unwrap();
        let cp = FunctionClassParams::new(mc, lc).unwrap();
        let p = ProblemData::from_conjugate(fp, cp, 0.5, 1).unwrap();
        let f = TestFunction::huber(fp, 1, 0.6).unwrap();
        let c = TestFunction::extremal_quadratic(cp, 1).unwrap();
        let us: Vec<DVector<f64>> = ys.iter().map(|y| delta_apply(&p, &f, &c, y).unwrap()).collect();
        let sec = dt_sector_filter(&p, [a, b]).unwrap();
        prop_assert!(sec.weighted_sum(&ys, &us, rho).unwrap() >= -1e-9);
        let obo = dt_weighted_off_by_one_filter(&p, rho, [a, b]).unwrap();
        prop_assert!(obo.weighted_sum(&ys, &us, rho).unwrap() >= -1e-9);
    }

    #[test]
    fn frequency_check_monotone_in_eps((mu, l) in moduli(), a1 in 0.1f64..3.0, a2 in 0.1f64..3.0, eps in 1e-6f64..1.0) {
        let fp = FunctionClassParams::new(mu, l).unwrap();
        let p = ProblemData::from_conjugate(fp, fp, 1.0, 1).unwrap();
        let ss = build_ct_state_space(&p);
        let mp = MultiplierParams::sector([a1, a2]).unwrap();
        let grid = mdcert_core::iqc::log_grid(1e-2, 1e2, 40).unwrap();
        let pi = |w: f64| combined_pi(&p, &mp, w);
        let hi = check_frequency_condition(&ss, pi, &grid, eps).unwrap();
        let lo = check_frequency_condition(&ss, pi, &grid, eps * 0.5).unwrap();
        prop_assert!(!hi.passed || lo.passed);
    }
}

#[test]
fn thousand_pairs_per_bundled_instance() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let f = FunctionClassParams::new(0.5, 6.0).unwrap();
    for d in [1, 3] {
        for inst in instances(f, d) {
            for _ in 0..1000 {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-4.0..4.0));
                let y = DVector::from_fn(d, |_, _| rng.gen_range(-4.0..4.0));
                assert!(sector_qc_residual(&inst, &x, &y).unwrap() >= -1e-9);
            }
        }
    }
}
