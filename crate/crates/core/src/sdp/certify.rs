use super::{FeasibilityResult, FeasibilitySolver, FeasibilityStatus, InteriorPoint};
use crate::error::{Error, Result};
use crate::lmi::{assemble_ct_lmi, assemble_dt_lmi_with, Assignment, EPS_SLOPE};
use crate::lure::TimeDomain;
use crate::problem::ProblemData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Width of the final bisection bracket.
    pub tol: f64,
    pub max_bisections: usize,
    /// Continuous-time search stops doubling the rate here.
    pub rate_cap: f64,
    /// Extra solves on the feasible side of the bracket to confirm that
    /// feasibility is monotone in the rate.
    pub monotonicity_probes: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_bisections: 60, rate_cap: 1e3, monotonicity_probes: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    Lmi,
    /// Both slope widths vanish and the closed-loop map is linear.
    ClosedForm,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub solves: usize,
    pub ipm_iterations: usize,
    pub numerical_failures: usize,
    pub bisections: usize,
    /// Final `(infeasible side, feasible side)` pair for discrete time and
    /// `(feasible side, infeasible side)` for continuous time.
    pub bracket: (f64, f64),
    pub capped: bool,
    /// `Some(false)` if a probe on the feasible side of the bracket failed.
    pub monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationResult {
    pub domain: TimeDomain,
    pub use_popov: bool,
    pub status: FeasibilityStatus,
    /// Certified rate: exponential decay rate in continuous time, contraction
    /// factor in discrete time.
    pub rate: Option<f64>,
    /// Certificate for the scalar (`d = 1`) problem; see [`Assignment::lift`].
    pub certificate: Option<Assignment>,
    pub margin: f64,
    pub method: RateMethod,
    pub diagnostics: Diagnostics,
}

impl CertificationResult {
    pub fn feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

pub fn certify_rate(p: &ProblemData, domain: TimeDomain, use_popov: bool, tol: f64) -> Result<CertificationResult> {
    certify_rate_with(&InteriorPoint::default(), p, domain, use_popov, &CertifyOptions { tol, ..Default::default() })
}

struct Search<'a, S: FeasibilitySolver> {
    solver: &'a S,
    p: ProblemData,
    domain: TimeDomain,
    use_popov: bool,
    diag: Diagnostics,
}

impl<S: FeasibilitySolver> Search<'_, S> {
    fn check(&mut self, rho: f64) -> Result<FeasibilityResult> {
        let lmi = match self.domain {
            TimeDomain::Continuous => assemble_ct_lmi(&self.p, rho, self.use_popov)?,
            TimeDomain::Discrete => assemble_dt_lmi_with(&self.p, rho, self.use_popov)?,
        };
        let r = self.solver.solve(&lmi)?;
        self.diag.solves += 1;
        self.diag.ipm_iterations += r.iterations;
        if r.status == FeasibilityStatus::NumericalFailure {
            self.diag.numerical_failures += 1;
        }
        Ok(r)
    }

    fn finish(self, best: FeasibilityResult, rate: f64) -> CertificationResult {
        CertificationResult {
            domain: self.domain,
            use_popov: self.use_popov,
            status: FeasibilityStatus::Feasible,
            rate: Some(rate),
            certificate: best.assignment,
            margin: best.margin,
            method: RateMethod::Lmi,
            diagnostics: self.diag,
        }
    }

    fn fail(self, r: FeasibilityResult) -> CertificationResult {
        CertificationResult {
            domain: self.domain,
            use_popov: self.use_popov,
            status: r.status,
            rate: None,
            certificate: None,
            margin: r.margin,
            method: RateMethod::Lmi,
            diagnostics: self.diag,
        }
    }

    fn probe(&mut self, points: impl Iterator<Item = f64>) -> Result<()> {
        let mut ok = true;
        for rho in points {
            ok &= self.check(rho)?.is_feasible();
        }
        self.diag.monotone = Some(ok);
        Ok(())
    }
}

/// Best certifiable rate by bisection, using any [`FeasibilitySolver`].
///
/// Continuous time: the largest certified decay rate, searched upward from
/// zero. Discrete time: the smallest certified contraction factor in (0, 1].
/// Only feasible endpoints are ever returned, so the reported certificate
/// always matches the reported rate.
pub fn certify_rate_with<S: FeasibilitySolver>(
    solver: &S,
    p: &ProblemData,
    domain: TimeDomain,
    use_popov: bool,
    opts: &CertifyOptions,
) -> Result<CertificationResult> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive (tol = {})", opts.tol)));
    }
    let scalar = (*p).with_dim(1)?;
    let slopes = scalar.slopes();
    let contraction = scalar.eta() * scalar.f().mu() * scalar.phi_conj().mu();
    if slopes.iter().all(|&k| k < EPS_SLOPE) {
        let rate = match domain {
            TimeDomain::Continuous => contraction,
            TimeDomain::Discrete => (1.0 - contraction).abs(),
        };
        let stable = match domain {
            TimeDomain::Continuous => rate > 0.0,
            TimeDomain::Discrete => rate < 1.0,
        };
        return Ok(CertificationResult {
            domain,
            use_popov,
            status: if stable { FeasibilityStatus::Feasible } else { FeasibilityStatus::Infeasible },
            rate: stable.then_some(rate),
            certificate: None,
            margin: f64::INFINITY,
            method: RateMethod::ClosedForm,
            diagnostics: Diagnostics::default(),
        });
    }

    let mut s = Search { solver, p: scalar, domain, use_popov, diag: Diagnostics::default() };
    match domain {
        TimeDomain::Continuous => {
            let r0 = s.check(0.0)?;
            if !r0.is_feasible() {
                return Ok(s.fail(r0));
            }
            let mut lo = 0.0;
            let mut best = r0;
            let mut hi = contraction.max(opts.tol);
            loop {
                let r = s.check(hi)?;
                if !r.is_feasible() {
                    break;
                }
                lo = hi;
                best = r;
                if hi >= opts.rate_cap {
                    s.diag.capped = true;
                    break;
                }
                hi = (2.0 * hi).min(opts.rate_cap);
            }
            while !s.diag.capped && hi - lo > opts.tol && s.diag.bisections < opts.max_bisections {
                let mid = 0.5 * (lo + hi);
                s.diag.bisections += 1;
                let r = s.check(mid)?;
                if r.is_feasible() {
                    lo = mid;
                    best = r;
                } else {
                    hi = mid;
                }
            }
            s.diag.bracket = (lo, hi);
            let n = opts.monotonicity_probes;
            if n > 0 && lo > 0.0 {
                s.probe((1..=n).map(|i| lo * i as f64 / (n + 1) as f64))?;
            }
            Ok(s.finish(best, lo))
        }
        TimeDomain::Discrete => {
            let r1 = s.check(1.0)?;
            if !r1.is_feasible() {
                return Ok(s.fail(r1));
            }
            let mut hi = 1.0;
            let mut best = r1;
            let mut lo = opts.tol.min(1.0);
            let r = s.check(lo)?;
            if r.is_feasible() {
                s.diag.bracket = (0.0, lo);
                return Ok(s.finish(r, lo));
            }
            while hi - lo > opts.tol && s.diag.bisections < opts.max_bisections {
                let mid = 0.5 * (lo + hi);
                s.diag.bisections += 1;
                let r = s.check(mid)?;
                if r.is_feasible() {
                    hi = mid;
                    best = r;
                } else {
                    lo = mid;
                }
            }
            s.diag.bracket = (lo, hi);
            let n = opts.monotonicity_probes;
            if n > 0 && hi < 1.0 {
                s.probe((1..=n).map(|i| hi + (1.0 - hi) * i as f64 / (n + 1) as f64))?;
            }
            Ok(s.finish(best, hi))
        }
    }
}
