//! Feasibility of rate LMIs and bisection on the rate.
//!
//! A problem `F_j(x) <= 0` is solved as `maximize t` subject to
//! `F_j(x) + t I <= 0`, `eps_p I <= P <= bound I` and `0 <= s <= bound` for each
//! scalar multiplier. The box only normalises the homogeneous problem. The
//! verdict never trusts the solver: the returned point is substituted back
//! into the constraints and the largest eigenvalue decides.

mod certify;
pub mod ipm;

pub use certify::{certify_rate, certify_rate_with, CertificationResult, CertifyOptions, Diagnostics, RateMethod};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lmi::{max_eigenvalue, min_eigenvalue, triangle_index, Assignment, LmiProblem};
use ipm::{BlockSdp, IpmOptions, IpmStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// A point counts as a certificate when every constraint has largest
    /// eigenvalue below `-margin_tol`.
    pub margin_tol: f64,
    pub variable_bound: f64,
    /// A solve that stopped short of convergence still yields an infeasible
    /// verdict when its relative gap and residuals are below this.
    pub accuracy_for_infeasible: f64,
    pub ipm: IpmOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { margin_tol: 1e-8, variable_bound: 1e3, accuracy_for_infeasible: 1e-9, ipm: IpmOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    /// `min_j -lambda_max(F_j)` at the returned point after back-substitution.
    pub margin: f64,
    pub assignment: Option<Assignment>,
    pub iterations: usize,
    /// Optimal `t` reported by the solver.
    pub solver_objective: f64,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

/// Anything able to decide feasibility of an [`LmiProblem`].
pub trait FeasibilitySolver {
    fn solve(&self, lmi: &LmiProblem) -> Result<FeasibilityResult>;
}

/// The built-in interior-point solver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InteriorPoint {
    pub options: SolverOptions,
}

pub fn solve_feasibility(lmi: &LmiProblem) -> Result<FeasibilityResult> {
    InteriorPoint::default().solve(lmi)
}

fn unit_symmetric(n: usize, (i, j): (usize, usize), sign: f64) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(i, j)] = sign;
    e[(j, i)] = sign;
    e
}

fn to_block_sdp(lmi: &LmiProblem, bound: f64) -> BlockSdp {
    let n_vars = lmi.n_vars();
    let n_p = lmi.n_p_vars();
    let pd = lmi.p_dim();
    let m = n_vars + 1;
    let mut c = Vec::new();
    let mut a: Vec<Vec<Option<DMatrix<f64>>>> = vec![Vec::new(); m];

    for con in lmi.constraints() {
        c.push(-&con.constant);
        for (i, coeff) in con.coefficients.iter().enumerate() {
            a[i].push(coeff.clone());
        }
        a[n_vars].push(Some(DMatrix::identity(con.size(), con.size())));
    }
    if pd > 0 {
        // P - eps I >= 0 and bound I - P >= 0
        c.push(DMatrix::identity(pd, pd) * -lmi.eps_p());
        c.push(DMatrix::identity(pd, pd) * bound);
        for (i, ai) in a.iter_mut().enumerate() {
            if i < n_p {
                let idx = triangle_index(pd, i);
                ai.push(Some(unit_symmetric(pd, idx, -1.0)));
                ai.push(Some(unit_symmetric(pd, idx, 1.0)));
            } else {
                ai.push(None);
                ai.push(None);
            }
        }
    }
    for s in n_p..n_vars {
        c.push(DMatrix::zeros(1, 1));
        c.push(DMatrix::from_element(1, 1, bound));
        for (i, ai) in a.iter_mut().enumerate() {
            if i == s {
                ai.push(Some(DMatrix::from_element(1, 1, -1.0)));
                ai.push(Some(DMatrix::from_element(1, 1, 1.0)));
            } else {
                ai.push(None);
                ai.push(None);
            }
        }
    }
    let mut b = DVector::zeros(m);
    b[n_vars] = 1.0;
    BlockSdp { c, a, b }
}

/// Back-substitution margin of an assignment: the smallest `-lambda_max` over
/// all constraints, evaluated through the coefficient form and, when
/// available, directly from the plant matrices.
pub fn verified_margin(lmi: &LmiProblem, a: &Assignment) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for f in lmi.evaluate(a)? {
        margin = margin.min(-max_eigenvalue(&f));
    }
    if let Some(direct) = lmi.evaluate_direct(a) {
        for f in direct? {
            margin = margin.min(-max_eigenvalue(&f));
        }
    }
    Ok(margin)
}

impl FeasibilitySolver for InteriorPoint {
    fn solve(&self, lmi: &LmiProblem) -> Result<FeasibilityResult> {
        let opts = &self.options;
        let sdp = to_block_sdp(lmi, opts.variable_bound);
        let sol = ipm::solve(&sdp, &opts.ipm).map_err(Error::NumericalFailure)?;
        let n_vars = lmi.n_vars();
        let t = sol.y[n_vars];

        if sol.y.iter().any(|v| !v.is_finite()) {
            return Ok(FeasibilityResult {
                status: FeasibilityStatus::NumericalFailure,
                margin: f64::NAN,
                assignment: None,
                iterations: sol.iterations,
                solver_objective: t,
            });
        }

        let mut x: Vec<f64> = sol.y.iter().take(n_vars).copied().collect();
        for v in x.iter_mut().skip(lmi.n_p_vars()) {
            *v = v.max(0.0);
        }
        let assignment = lmi.from_vector(&x)?;
        let margin = verified_margin(lmi, &assignment)?;
        let p_ok = lmi.p_dim() == 0 || min_eigenvalue(&assignment.p) >= lmi.eps_p() - 1e-9;

        let status = if margin > opts.margin_tol && p_ok {
            FeasibilityStatus::Feasible
        } else if sol.status == IpmStatus::Converged || sol.merit <= opts.accuracy_for_infeasible {
            FeasibilityStatus::Infeasible
        } else {
            FeasibilityStatus::NumericalFailure
        };
        Ok(FeasibilityResult {
            status,
            margin,
            assignment: Some(assignment),
            iterations: sol.iterations,
            solver_objective: t,
        })
    }
}
