//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::Instant;

use mdcert_cli::experiments::{self, Engine};
use mdcert_cli::grid::parse_kappa_grid;
use mdcert_cli::tables::Verdict;
use mdcert_core::iqc::{check_frequency_condition, combined_pi, default_frequency_grid, MultiplierParams};
use mdcert_core::lmi::{assemble_ct_lmi, assemble_dt_lmi_with, dt_lmi_matrix, Assignment};
use mdcert_core::lure::{build_ct_state_space, residual_dynamics_check, MdNonlinearity};
use mdcert_core::problem::make_quadratic_instance;
use mdcert_core::sdp::{FeasibilitySolver, InteriorPoint};
use mdcert_core::sim::{default_ct_step, default_initial_state, envelope_ratio, lyapunov_trace, simulate_ct};
use mdcert_core::{FunctionClassParams, ProblemData, TestFunction, TimeDomain};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG2_PROBE: f64 = 1e-5;
const RATE_TOL: f64 = 2e-3;
const ENVELOPE_TOL: f64 = 1e-3;
const FREQ_MARGIN: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-10;
const BACKSUB_TOL: f64 = 1e-7;
const DT_KAPPAS: [f64; 6] = [1.5, 2.0, 4.0, 9.0, 25.0, 100.0];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("{} criterion {id} ({name}): {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Continuous-time rate LMI for the scalar problem, built here from the loop
/// equations `x = mu_c z + u2`, `z' = -eta (mu_f x + u1)` with outputs
/// `y = (x, z)` and slopes `L - mu` on each channel.
fn ct_oracle(p: &ProblemData, rho: f64, a: &Assignment) -> DMatrix<f64> {
    let (eta, mf, mc) = (p.eta(), p.f().mu(), p.phi_conj().mu());
    let k = [p.f().l() - mf, p.phi_conj().l() - mc];
    let pm = a.p[(0, 0)];
    let (a1, a2, g) = (a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2"), a.scalar_or_zero("gamma"));
    let am = -eta * mf * mc;
    let b = DMatrix::from_row_slice(1, 2, &[-eta, -eta * mf]);
    let c = DMatrix::from_row_slice(2, 1, &[mc, 1.0]);
    let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let alpha = DMatrix::from_diagonal(&DVector::from_vec(vec![a1, a2]));
    let gamma = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, g]));
    let kinv = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / k[0], 1.0 / k[1]]));
    let bt = -&b;
    let ct = (&alpha + &gamma * rho) * &c + &gamma * &c * am;
    let dt = -(&alpha * &d) + &alpha * &kinv - &gamma * &c * &b;
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 0)] = 2.0 * am * pm + 2.0 * rho * pm;
    let off = &bt * pm - ct.transpose();
    m.view_mut((0, 1), (1, 2)).copy_from(&off);
    m.view_mut((1, 0), (2, 1)).copy_from(&off.transpose());
    m.view_mut((1, 1), (2, 2)).copy_from(&-(&dt + dt.transpose()));
    (&m + m.transpose()) * 0.5
}

/// Largest eigenvalue over the certificate's constraints: the rate LMI,
/// `eps I - P` and the negated multipliers.
fn backsub(p: &ProblemData, domain: TimeDomain, rho: f64, a: &Assignment) -> f64 {
    let lmi = match domain {
        TimeDomain::Continuous => ct_oracle(p, rho, a),
        TimeDomain::Discrete => {
            let alpha = [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")];
            let beta = [a.scalar_or_zero("beta1"), a.scalar_or_zero("beta2")];
            dt_lmi_matrix(p, rho, &a.p, alpha, beta).expect("valid certificate dimensions")
        }
    };
    let scalars = a.scalars.iter().map(|(_, v)| -v).fold(f64::NEG_INFINITY, f64::max);
    max_eig(&lmi).max(-min_eig(&a.p)).max(scalars)
}

fn main() {
    let mut report = Report { failures: 0 };
    let engine = Engine::default();
    let mut certificates: Vec<(ProblemData, TimeDomain, f64, Assignment)> = Vec::new();

    // 1: sector-only cliff
    let t = Instant::now();
    let grid = parse_kappa_grid("2..100").unwrap();
    let rows = experiments::fig2(&engine, &grid, 1.0, FIG2_PROBE).expect("fig2 sweep");
    let secs = t.elapsed().as_secs_f64();
    let below = rows.iter().filter(|r| r.kappa <= 32.0).all(|r| r.feasible_sector == Verdict::Feasible);
    let above = rows.iter().filter(|r| r.kappa >= 36.0).all(|r| r.feasible_sector == Verdict::Infeasible);
    let cliff = experiments::cliff(&rows);
    let after_cliff =
        rows.iter().filter(|r| cliff.is_some_and(|c| r.kappa >= c)).all(|r| r.feasible_sector == Verdict::Infeasible);
    let in_band = cliff.is_some_and(|c| (33.0..=35.0).contains(&c));
    report.line(
        1,
        "sector-only cliff",
        below && above && after_cliff && in_band && secs < 60.0,
        format!("feasible <= 32: {below}, infeasible >= 36: {above}, cliff {cliff:?}, {secs:.2} s (< 60 s)"),
    );

    // 2: Popov combination on a log grid up to 1e4
    let t = Instant::now();
    let grid = parse_kappa_grid("log:2:10000:10").unwrap();
    let rows = experiments::fig2(&engine, &grid, 1.0, FIG2_PROBE).expect("popov sweep");
    let secs = t.elapsed().as_secs_f64();
    let bad: Vec<f64> = rows.iter().filter(|r| r.feasible_popov != Verdict::Feasible).map(|r| r.kappa).collect();
    report.line(
        2,
        "Popov certifies arbitrary kappa",
        bad.is_empty() && secs < 30.0,
        format!("{} points feasible at rho = {FIG2_PROBE:e}, failures {bad:?}, {secs:.2} s (< 30 s)", rows.len()),
    );

    // 3: discrete rate on the curve
    let t = Instant::now();
    let mut worst = 0.0_f64;
    let mut rates = Vec::new();
    let mut all_certified = true;
    for kappa in DT_KAPPAS {
        let p = ProblemData::balanced(kappa, None, 1).unwrap();
        let r = engine.certify(&p, TimeDomain::Discrete, true).expect("discrete certification");
        match (r.rate, r.certificate) {
            (Some(rate), Some(cert)) => {
                worst = worst.max((rate - experiments::curve_rate(kappa)).abs());
                certificates.push((p, TimeDomain::Discrete, rate, cert));
                rates.push((p, rate));
            }
            _ => all_certified = false,
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report.line(
        3,
        "discrete rate matches (kappa-1)/(kappa+1)",
        all_certified && worst <= RATE_TOL && secs < 60.0,
        format!("max deviation {worst:.3e} (<= {RATE_TOL}), {secs:.2} s (< 60 s)"),
    );

    // 4: soundness and tightness against simulation
    let t = Instant::now();
    let mut ok = all_certified;
    let mut detail = Vec::new();
    for (p, rate) in &rates {
        let est = experiments::extremal_discrete_rate(p, *rate).expect("extremal simulation");
        ok &= est.rho_hat <= rate + RATE_TOL && est.rho_hat >= rate - RATE_TOL;
        detail.push(format!("{:.4}/{:.4}", est.rho_hat, rate));
    }
    let secs = t.elapsed().as_secs_f64();
    report.line(
        4,
        "empirical rate within 2e-3 of certified",
        ok && secs < 10.0,
        format!("empirical/certified [{}], {secs:.2} s (< 10 s)", detail.join(", ")),
    );

    // 5: Lyapunov envelope in continuous time
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for kappa in [4.0, 16.0] {
        let p = ProblemData::balanced(kappa, Some(1.0), 2).unwrap();
        let r = engine.certify(&p, TimeDomain::Continuous, true).expect("continuous certification");
        let (Some(rho), Some(cert)) = (r.rate, r.certificate) else {
            ok = false;
            continue;
        };
        let f = TestFunction::extremal_quadratic(p.f(), 2).unwrap();
        let c = TestFunction::extremal_quadratic(p.phi_conj(), 2).unwrap();
        let z_opt = MdNonlinearity::new(&p, &f, &c).unwrap().z_opt().clone();
        let traj = simulate_ct(&p, &f, &c, &default_initial_state(&z_opt), 5.0 / rho, default_ct_step(&p)).unwrap();
        let v = lyapunov_trace(&traj, &cert, &c).unwrap();
        let ratio = envelope_ratio(&traj.times, &v, rho);
        ok &= ratio <= 1.0 + ENVELOPE_TOL;
        detail.push(format!("kappa {kappa}: rho {rho:.5}, max ratio {ratio:.6}"));
        certificates.push((p.with_dim(1).unwrap(), TimeDomain::Continuous, rho, cert));
    }
    let secs = t.elapsed().as_secs_f64();
    report.line(5, "Lyapunov envelope", ok && secs < 20.0, format!("{}, {secs:.2} s (< 20 s)", detail.join("; ")));

    // 6: LMI certificates satisfy the frequency-domain condition
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let omegas = default_frequency_grid();
    let (mut checked, mut ok, mut worst) = (0, true, f64::NEG_INFINITY);
    for _ in 0..10 {
        let mf = rng.gen_range(0.5..2.0);
        let mc = rng.gen_range(0.5..2.0);
        let f = FunctionClassParams::new(mf, mf * rng.gen_range(1.2..20.0)).unwrap();
        let c = FunctionClassParams::new(mc, mc * rng.gen_range(1.2..20.0)).unwrap();
        let p = ProblemData::from_conjugate(f, c, rng.gen_range(0.2..2.0), 1).unwrap();
        let use_popov = rng.gen_bool(0.7);
        let r = InteriorPoint::default().solve(&assemble_ct_lmi(&p, 0.0, use_popov).unwrap()).unwrap();
        if !r.is_feasible() {
            continue;
        }
        let a = r.assignment.unwrap();
        certificates.push((p, TimeDomain::Continuous, 0.0, a.clone()));
        let mp = MultiplierParams::from_lmi_multipliers(
            &p,
            [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")],
            a.scalar_or_zero("gamma"),
        )
        .unwrap();
        let fc =
            check_frequency_condition(&build_ct_state_space(&p), |w| combined_pi(&p, &mp, w), &omegas, FREQ_MARGIN)
                .unwrap();
        checked += 1;
        ok &= fc.passed && fc.worst_eigenvalue <= -FREQ_MARGIN;
        worst = worst.max(fc.worst_eigenvalue);
    }
    report.line(
        6,
        "frequency condition from LMI multipliers",
        ok && checked > 0,
        format!("{checked}/10 feasible at rho = 0, worst eigenvalue {worst:.3e} (<= -{FREQ_MARGIN:e})"),
    );

    // 7: Lur'e reformulation against the direct recursion
    let instances = bundled_instances();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (p, f, c) in &instances {
        for i in 0..200 {
            let z = DVector::from_fn(p.dim(), |_, _| rng.gen_range(-5.0..5.0));
            let domain = if i % 2 == 0 { TimeDomain::Continuous } else { TimeDomain::Discrete };
            worst = worst.max(residual_dynamics_check(p, f, c, &z, domain).unwrap());
            count += 1;
        }
    }
    report.line(
        7,
        "reformulation matches direct recursion",
        worst <= RESIDUAL_TOL && count == 1000,
        format!("{count} states over {} instances, max residual {worst:.3e} (<= {RESIDUAL_TOL:e})", instances.len()),
    );

    // 8: every feasible result survives back-substitution
    for kappa in [2.0, 10.0, 33.0, 50.0, 1000.0] {
        let p = ProblemData::balanced(kappa, Some(1.0), 1).unwrap();
        for rho in [0.0, FIG2_PROBE, 0.5, 0.99] {
            for use_popov in [false, true] {
                let r = InteriorPoint::default().solve(&assemble_ct_lmi(&p, rho, use_popov).unwrap()).unwrap();
                if let (true, Some(a)) = (r.is_feasible(), r.assignment) {
                    certificates.push((p, TimeDomain::Continuous, rho, a));
                }
            }
        }
    }
    for kappa in [1.5, 4.0, 25.0, 100.0] {
        let p = ProblemData::balanced(kappa, None, 1).unwrap();
        for rho in [experiments::curve_rate(kappa) + 1e-3, 0.99, 1.0] {
            for off_by_one in [false, true] {
                let r = InteriorPoint::default().solve(&assemble_dt_lmi_with(&p, rho, off_by_one).unwrap()).unwrap();
                if let (true, Some(a)) = (r.is_feasible(), r.assignment) {
                    certificates.push((p, TimeDomain::Discrete, rho, a));
                }
            }
        }
    }
    let worst = certificates.iter().map(|(p, d, rho, a)| backsub(p, *d, *rho, a)).fold(f64::NEG_INFINITY, f64::max);
    let passed = certificates.iter().filter(|(p, d, rho, a)| backsub(p, *d, *rho, a) <= BACKSUB_TOL).count();
    report.line(
        8,
        "feasible results pass back-substitution",
        passed == certificates.len() && !certificates.is_empty(),
        format!("{passed}/{} certificates, worst eigenvalue {worst:.3e} (<= {BACKSUB_TOL:e})", certificates.len()),
    );

    if report.failures > 0 {
        println!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn bundled_instances() -> Vec<(ProblemData, TestFunction, TestFunction)> {
    let class = |mu, l| FunctionClassParams::new(mu, l).unwrap();
    let mut out = Vec::new();

    let p = ProblemData::balanced(9.0, None, 2).unwrap();
    out.push((
        p,
        TestFunction::extremal_quadratic(p.f(), 2).unwrap(),
        TestFunction::extremal_quadratic(p.phi_conj(), 2).unwrap(),
    ));

    let p = ProblemData::balanced(40.0, Some(0.3), 3).unwrap();
    out.push((
        p,
        TestFunction::huber(p.f(), 3, 0.5).unwrap().with_center(DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap(),
        TestFunction::extremal_quadratic(p.phi_conj(), 3).unwrap(),
    ));

    let (f, c) = (class(0.5, 4.0), class(2.0, 3.0));
    let p = ProblemData::with_default_stepsize(f, c, 2).unwrap();
    out.push((
        p,
        make_quadratic_instance(f, 2, &[4.0, 0.5]).unwrap().with_center(DVector::from_vec(vec![3.0, -1.0])).unwrap(),
        TestFunction::huber(c, 2, 1.5).unwrap(),
    ));

    let (f, c) = (class(1.0, 10.0), class(0.2, 1.0));
    let p = ProblemData::from_conjugate(f, c, 0.7, 1).unwrap();
    out.push((p, TestFunction::huber(f, 1, 0.2).unwrap(), TestFunction::huber(c, 1, 2.0).unwrap()));

    let (f, c) = (class(3.0, 3.0), class(1.0, 6.0));
    let p = ProblemData::from_conjugate(f, c, 0.1, 4).unwrap();
    out.push((
        p,
        make_quadratic_instance(f, 4, &[3.0; 4]).unwrap(),
        make_quadratic_instance(c, 4, &[1.0, 2.0, 5.0, 6.0]).unwrap(),
    ));
    out
}
