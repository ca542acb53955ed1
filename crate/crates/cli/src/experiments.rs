//! Batch experiments: feasibility sweeps, rate curves and simulations of the
//! extremal quadratic instance.

use anyhow::Result;
use mdcert_core::lmi::assemble_ct_lmi;
use mdcert_core::lure::MdNonlinearity;
use mdcert_core::sdp::{certify_rate_with, CertificationResult, CertifyOptions, FeasibilitySolver, InteriorPoint};
use mdcert_core::sim::{default_initial_state, empirical_rate, simulate_dt, RateEstimate};
use mdcert_core::{Error, ProblemData, TestFunction, TimeDomain};
use rayon::prelude::*;

use crate::tables::{Fig2Row, Fig3Row, SweepRow, Verdict};

pub const FIG2_GRID: &str = "2..100";
pub const FIG2_PROBE_RATE: f64 = 1e-5;
pub const FIG3_GRID: &str = "1.5,2,4,9,16,25,49,100";
pub const SWEEP_GRID: &str = "log:1:100:9";

/// Stop the extremal simulation once the distance has shrunk by this factor.
const SIM_REDUCTION: f64 = 1e-11;
const SIM_MIN_STEPS: usize = 20;
const SIM_MAX_STEPS: usize = 20_000;
const SIM_DIM: usize = 2;

#[derive(Debug, Clone, Copy, Default)]
pub struct Engine {
    pub solver: InteriorPoint,
    pub certify: CertifyOptions,
}

impl Engine {
    pub fn certify(&self, p: &ProblemData, domain: TimeDomain, use_popov: bool) -> Result<CertificationResult> {
        Ok(certify_rate_with(&self.solver, p, domain, use_popov, &self.certify)?)
    }

    /// Single continuous-time solve at a fixed rate.
    pub fn probe_ct(&self, p: &ProblemData, rho: f64, use_popov: bool) -> Result<(Verdict, f64)> {
        match assemble_ct_lmi(p, rho, use_popov) {
            Ok(lmi) => {
                let r = self.solver.solve(&lmi)?;
                Ok((r.status.into(), r.margin))
            }
            // Linear loop: the closed form decides.
            Err(Error::DegenerateSlope { .. }) if p.slopes().iter().all(|k| *k < mdcert_core::lmi::EPS_SLOPE) => {
                let r = self.certify(p, TimeDomain::Continuous, use_popov)?;
                let ok = r.rate.is_some_and(|v| v >= rho);
                Ok((if ok { Verdict::Feasible } else { Verdict::Infeasible }, r.margin))
            }
            Err(e) => Err(e.into()),
        }
    }
}

pub fn curve_rate(kappa: f64) -> f64 {
    (kappa - 1.0) / (kappa + 1.0)
}

/// Sector-only and Popov feasibility at a small fixed rate for each
/// condition number. Grid points run in parallel; rows keep grid order.
pub fn fig2(engine: &Engine, grid: &[f64], eta: f64, probe: f64) -> Result<Vec<Fig2Row>> {
    grid.par_iter()
        .map(|&kappa| {
            let p = ProblemData::balanced(kappa, Some(eta), 1)?;
            let (feasible_sector, margin_sector) = engine.probe_ct(&p, probe, false)?;
            let (feasible_popov, margin_popov) = engine.probe_ct(&p, probe, true)?;
            Ok(Fig2Row {
                kappa,
                feasible_sector,
                feasible_popov,
                margin_sector: Some(margin_sector),
                margin_popov: Some(margin_popov),
            })
        })
        .collect()
}

/// Smallest grid value where the sector-only verdict is infeasible.
pub fn cliff(rows: &[Fig2Row]) -> Option<f64> {
    rows.iter().find(|r| r.feasible_sector == Verdict::Infeasible).map(|r| r.kappa)
}

/// Per-step rate of mirror descent on the two-dimensional extremal quadratic
/// instance, run long enough to shrink the distance by about `1e-11`.
/// `expected` only sizes the run.
pub fn extremal_discrete_rate(p: &ProblemData, expected: f64) -> Result<RateEstimate> {
    let p = (*p).with_dim(SIM_DIM)?;
    let f = TestFunction::extremal_quadratic(p.f(), SIM_DIM)?;
    let c = TestFunction::extremal_quadratic(p.phi_conj(), SIM_DIM)?;
    let steps = if expected > 0.0 && expected < 1.0 {
        (SIM_REDUCTION.ln() / expected.ln()).ceil() as usize
    } else {
        SIM_MAX_STEPS
    };
    let steps = steps.clamp(SIM_MIN_STEPS, SIM_MAX_STEPS);
    let z_opt = MdNonlinearity::new(&p, &f, &c)?.z_opt().clone();
    let traj = simulate_dt(&p, &f, &c, &default_initial_state(&z_opt), steps)?;
    Ok(empirical_rate(&traj)?)
}

/// Certified discrete rate, the reference curve and the empirical rate for
/// each condition number; `eta = None` uses the default stepsize.
pub fn fig3(engine: &Engine, grid: &[f64], eta: Option<f64>) -> Result<Vec<Fig3Row>> {
    grid.par_iter()
        .map(|&kappa| {
            let p = ProblemData::balanced(kappa, eta, 1)?;
            let cert = engine.certify(&p, TimeDomain::Discrete, true)?;
            let curve = curve_rate(kappa);
            let empirical = match extremal_discrete_rate(&p, cert.rate.unwrap_or(curve)) {
                Ok(r) => Some(r.rho_hat),
                // Too few samples above the rounding floor (e.g. one-step convergence).
                Err(e) if matches!(e.downcast_ref::<Error>(), Some(Error::DegenerateWindow(_))) => None,
                Err(e) => return Err(e),
            };
            Ok(Fig3Row { kappa, rho_certified: cert.rate, rho_curve: curve, rho_empirical: empirical })
        })
        .collect()
}

/// Bisected rate for each condition number in the balanced setting.
pub fn sweep(
    engine: &Engine,
    grid: &[f64],
    domain: TimeDomain,
    use_popov: bool,
    eta: Option<f64>,
) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .map(|&kappa| {
            let p = ProblemData::balanced(kappa, eta, 1)?;
            let r = engine.certify(&p, domain, use_popov)?;
            Ok(SweepRow {
                kappa,
                feasible: r.status.into(),
                rate: r.rate,
                margin: r.margin,
                solves: r.diagnostics.solves,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cliff_picks_first_infeasible() {
        let row = |kappa, s| Fig2Row {
            kappa,
            feasible_sector: s,
            feasible_popov: Verdict::Feasible,
            margin_sector: None,
            margin_popov: None,
        };
        let rows = [row(2.0, Verdict::Feasible), row(3.0, Verdict::NumericalFailure), row(4.0, Verdict::Infeasible)];
        assert_eq!(cliff(&rows), Some(4.0));
        assert_eq!(cliff(&rows[..2]), None);
    }

    #[test]
    fn unit_condition_probe_uses_closed_form() {
        let p = ProblemData::balanced(1.0, Some(1.0), 1).unwrap();
        let (v, _) = Engine::default().probe_ct(&p, FIG2_PROBE_RATE, false).unwrap();
        assert_eq!(v, Verdict::Feasible);
    }

    #[test]
    fn extremal_rate_matches_curve() {
        let p = ProblemData::balanced(9.0, None, 1).unwrap();
        let r = extremal_discrete_rate(&p, 0.8).unwrap();
        assert!((r.rho_hat - 0.8).abs() < 1e-3, "{r:?}");
    }
}
