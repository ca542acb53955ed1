//! Linear matrix inequalities in one symmetric matrix `P` and a few
//! nonnegative scalar multipliers.
//!
//! An [`LmiProblem`] is stored in coefficient form: every constraint is
//! `F0 + sum_i x_i F_i <= 0`, with `x` ranging over the upper triangle of `P`
//! followed by the named scalars. Problems built by [`assemble_ct_lmi`] and
//! [`assemble_dt_lmi`] also remember how to evaluate themselves directly from
//! the plant matrices, which gives a check of any certificate that does not go
//! through the coefficient form.

mod ct;
mod dt;
mod lyapunov;

pub use ct::{assemble_ct_lmi, ct_lmi_matrix};
pub use dt::{assemble_dt_lmi, assemble_dt_lmi_with, dt_lmi_matrix, hat_matrices, HatMatrices};
pub use lyapunov::{bregman_divergence, lyapunov_value};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::ProblemData;

/// Lower bound imposed on the eigenvalues of `P`.
pub const EPS_P: f64 = 1e-6;

/// Smallest slope width `L - mu` accepted by the continuous-time LMI.
pub const EPS_SLOPE: f64 = 1e-9;

/// Values for the decision variables of an LMI.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub p: DMatrix<f64>,
    pub scalars: Vec<(String, f64)>,
}

impl Assignment {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Scalar value, or zero when the variable is not part of the problem.
    pub fn scalar_or_zero(&self, name: &str) -> f64 {
        self.scalar(name).unwrap_or(0.0)
    }

    /// `P (x) I_factor`. Certificates computed for `d = 1` apply to any
    /// dimension this way since every plant block is a multiple of `I_d`.
    pub fn lift(&self, factor: usize) -> Assignment {
        let n = self.p.nrows();
        let mut p = DMatrix::zeros(n * factor, n * factor);
        for i in 0..n {
            for j in 0..n {
                for k in 0..factor {
                    p[(i * factor + k, j * factor + k)] = self.p[(i, j)];
                }
            }
        }
        Assignment { p, scalars: self.scalars.clone() }
    }
}

/// What an [`LmiProblem`] was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub enum LmiOrigin {
    Continuous { problem: ProblemData, rho: f64, use_popov: bool },
    Discrete { problem: ProblemData, rho: f64 },
    Custom,
}

/// `F0 + sum_i x_i F_i`, symmetric for every `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSymmetric {
    pub constant: DMatrix<f64>,
    /// One coefficient per decision variable; `None` where it is identically zero.
    pub coefficients: Vec<Option<DMatrix<f64>>>,
}

impl AffineSymmetric {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (xi, coeff) in x.iter().zip(&self.coefficients) {
            if let Some(c) = coeff {
                out += c * *xi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    p_dim: usize,
    scalar_names: Vec<String>,
    constraints: Vec<AffineSymmetric>,
    eps_p: f64,
    origin: LmiOrigin,
}

impl LmiProblem {
    /// Extracts coefficient matrices from an affine matrix-valued map by
    /// evaluating it at zero and at every basis assignment. Each returned
    /// matrix is one constraint `F(x) <= 0`.
    pub fn from_affine_map<F>(p_dim: usize, scalar_names: &[&str], eps_p: f64, map: F) -> Result<Self>
    where
        F: Fn(&Assignment) -> Result<Vec<DMatrix<f64>>>,
    {
        let names: Vec<String> = scalar_names.iter().map(|s| s.to_string()).collect();
        let zero =
            Assignment { p: DMatrix::zeros(p_dim, p_dim), scalars: names.iter().map(|n| (n.clone(), 0.0)).collect() };
        let base = map(&zero)?;
        if base.is_empty() {
            return Err(Error::InvalidParameter("an LMI needs at least one constraint".into()));
        }
        let n_vars = p_dim * (p_dim + 1) / 2 + names.len();
        let mut constraints: Vec<AffineSymmetric> = base
            .iter()
            .map(|f0| Ok(AffineSymmetric { constant: symmetrized(f0)?, coefficients: Vec::with_capacity(n_vars) }))
            .collect::<Result<_>>()?;

        for var in 0..n_vars {
            let mut unit = zero.clone();
            set_variable(&mut unit, p_dim, var, 1.0);
            let value = map(&unit)?;
            if value.len() != base.len() {
                return Err(Error::InvalidParameter("affine map changed its number of blocks".into()));
            }
            for ((c, f1), f0) in constraints.iter_mut().zip(&value).zip(&base) {
                let diff = symmetrized(&(f1 - f0))?;
                let coeff = if diff.iter().all(|v| *v == 0.0) { None } else { Some(diff) };
                c.coefficients.push(coeff);
            }
        }
        if !(eps_p >= 0.0) {
            return Err(Error::InvalidParameter("eps_p must be nonnegative".into()));
        }
        Ok(Self { p_dim, scalar_names: names, constraints, eps_p, origin: LmiOrigin::Custom })
    }

    pub(crate) fn with_origin(mut self, origin: LmiOrigin) -> Self {
        self.origin = origin;
        self
    }

    pub fn p_dim(&self) -> usize {
        self.p_dim
    }

    pub fn scalar_names(&self) -> &[String] {
        &self.scalar_names
    }

    pub fn constraints(&self) -> &[AffineSymmetric] {
        &self.constraints
    }

    pub fn eps_p(&self) -> f64 {
        self.eps_p
    }

    pub fn origin(&self) -> &LmiOrigin {
        &self.origin
    }

    pub fn n_p_vars(&self) -> usize {
        self.p_dim * (self.p_dim + 1) / 2
    }

    pub fn n_vars(&self) -> usize {
        self.n_p_vars() + self.scalar_names.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.constraints.iter().map(|c| c.size()).collect()
    }

    pub fn to_vector(&self, a: &Assignment) -> Result<Vec<f64>> {
        if a.p.nrows() != self.p_dim || a.p.ncols() != self.p_dim {
            return Err(Error::DimensionMismatch { expected: self.p_dim, got: a.p.nrows() });
        }
        let mut x = Vec::with_capacity(self.n_vars());
        for i in 0..self.p_dim {
            for j in i..self.p_dim {
                x.push(0.5 * (a.p[(i, j)] + a.p[(j, i)]));
            }
        }
        for name in &self.scalar_names {
            x.push(a.scalar(name).ok_or_else(|| Error::InvalidParameter(format!("missing scalar {name}")))?);
        }
        Ok(x)
    }

    pub fn from_vector(&self, x: &[f64]) -> Result<Assignment> {
        if x.len() != self.n_vars() {
            return Err(Error::DimensionMismatch { expected: self.n_vars(), got: x.len() });
        }
        let mut a = Assignment {
            p: DMatrix::zeros(self.p_dim, self.p_dim),
            scalars: self.scalar_names.iter().map(|n| (n.clone(), 0.0)).collect(),
        };
        for (var, &v) in x.iter().enumerate() {
            set_variable(&mut a, self.p_dim, var, v);
        }
        Ok(a)
    }

    /// Constraint values through the stored coefficients.
    pub fn evaluate(&self, a: &Assignment) -> Result<Vec<DMatrix<f64>>> {
        let x = self.to_vector(a)?;
        Ok(self.constraints.iter().map(|c| c.evaluate(&x)).collect())
    }

    /// Constraint values recomputed from the plant and filter matrices,
    /// bypassing the coefficient form. `None` for custom problems.
    pub fn evaluate_direct(&self, a: &Assignment) -> Option<Result<Vec<DMatrix<f64>>>> {
        match &self.origin {
            LmiOrigin::Continuous { problem, rho, use_popov } => {
                let gamma = if *use_popov { a.scalar_or_zero("gamma") } else { 0.0 };
                let alpha = [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")];
                Some(ct_lmi_matrix(problem, *rho, &a.p, alpha, gamma).map(|m| vec![m]))
            }
            LmiOrigin::Discrete { problem, rho } => {
                let alpha = [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")];
                let beta = [a.scalar_or_zero("beta1"), a.scalar_or_zero("beta2")];
                Some(dt_lmi_matrix(problem, *rho, &a.p, alpha, beta).map(|m| vec![m]))
            }
            LmiOrigin::Custom => None,
        }
    }
}

/// Writes decision variable `var` (upper triangle of `P` row by row, then
/// scalars) into an assignment.
fn set_variable(a: &mut Assignment, p_dim: usize, var: usize, value: f64) {
    let n_p = p_dim * (p_dim + 1) / 2;
    if var < n_p {
        let (i, j) = triangle_index(p_dim, var);
        a.p[(i, j)] = value;
        a.p[(j, i)] = value;
    } else {
        a.scalars[var - n_p].1 = value;
    }
}

/// Position of the `k`-th entry of the row-major upper triangle.
pub(crate) fn triangle_index(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    unreachable!("triangle index out of range")
}

fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!("constraint is not symmetric (asymmetry {asym:e})")));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}
