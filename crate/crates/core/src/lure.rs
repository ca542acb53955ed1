//! Lur'e form of mirror descent.
//!
//! The composition `grad f o grad phi*` is rewritten as the feedback
//! interconnection of a linear block `(A, B, C, D)` with the direct sum of the
//! two shifted gradients
//!
//! ```text
//! u1 = grad f(y1)     - mu_f    y1
//! u2 = grad phi*(y2)  - mu_phi* y2
//! ```
//!
//! Channel order everywhere is `(f, phi*)`, each channel `d` wide.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{check_dim, ProblemData, TestFunction};

pub type Complex64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

impl std::fmt::Display for TimeDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeDomain::Continuous => write!(f, "continuous"),
            TimeDomain::Discrete => write!(f, "discrete"),
        }
    }
}

/// Dense real state-space realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: TimeDomain,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>, domain: TimeDomain) -> Result<Self> {
        let n = a.nrows();
        check_dim(n, a.ncols())?;
        check_dim(n, b.nrows())?;
        check_dim(n, c.ncols())?;
        check_dim(c.nrows(), d.nrows())?;
        check_dim(b.ncols(), d.ncols())?;
        Ok(Self { a, b, c, d, domain })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        if self.n_states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// Largest real part (continuous) or modulus (discrete) over the spectrum of `A`.
    pub fn stability_measure(&self) -> f64 {
        let eigs = self.eigenvalues();
        match self.domain {
            TimeDomain::Continuous => eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max),
            TimeDomain::Discrete => eigs.iter().map(|e| e.norm()).fold(0.0, f64::max),
        }
    }

    pub fn is_stable(&self) -> bool {
        match self.domain {
            TimeDomain::Continuous => self.stability_measure() < 0.0,
            TimeDomain::Discrete => self.stability_measure() < 1.0,
        }
    }

    /// `C (freq I - A)^{-1} B + D`.
    pub fn transfer(&self, freq: Complex64) -> Result<DMatrix<Complex64>> {
        transfer_function(self, freq)
    }

    /// Transfer matrix on the stability boundary: `s = j omega` or `z = e^{j omega}`.
    pub fn frequency_response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let point = match self.domain {
            TimeDomain::Continuous => Complex64::new(0.0, omega),
            TimeDomain::Discrete => Complex64::new(omega.cos(), omega.sin()),
        };
        transfer_function(self, point)
    }
}

/// `G(freq) = C (freq I - A)^{-1} B + D`.
pub fn transfer_function(ss: &StateSpace, freq: Complex64) -> Result<DMatrix<Complex64>> {
    let n = ss.n_states();
    let d = ss.d.map(|v| Complex64::new(v, 0.0));
    if n == 0 {
        return Ok(d);
    }
    let resolvent = DMatrix::<Complex64>::identity(n, n) * freq - ss.a.map(|v| Complex64::new(v, 0.0));
    let scale = resolvent.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let lu = resolvent.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(Error::Pole { re: freq.re, im: freq.im });
    }
    let b = ss.b.map(|v| Complex64::new(v, 0.0));
    let x = lu.solve(&b).ok_or(Error::Pole { re: freq.re, im: freq.im })?;
    Ok(ss.c.map(|v| Complex64::new(v, 0.0)) * x + d)
}

fn plant_io(p: &ProblemData) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = p.dim();
    let eta = p.eta();
    let mu_f = p.f().mu();
    let mu_c = p.phi_conj().mu();
    let eye = DMatrix::<f64>::identity(n, n);

    let mut b = DMatrix::zeros(n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&(&eye * -eta));
    b.view_mut((0, n), (n, n)).copy_from(&(&eye * (-eta * mu_f)));

    let mut c = DMatrix::zeros(2 * n, n);
    c.view_mut((0, 0), (n, n)).copy_from(&(&eye * mu_c));
    c.view_mut((n, 0), (n, n)).copy_from(&eye);

    let mut d = DMatrix::zeros(2 * n, 2 * n);
    d.view_mut((0, n), (n, n)).copy_from(&eye);
    (b, c, d)
}

/// Continuous-time plant: `A = -eta mu_f mu_phi* I`.
pub fn build_ct_state_space(p: &ProblemData) -> StateSpace {
    let n = p.dim();
    let a = DMatrix::identity(n, n) * (-p.eta() * p.f().mu() * p.phi_conj().mu());
    let (b, c, d) = plant_io(p);
    StateSpace { a, b, c, d, domain: TimeDomain::Continuous }
}

/// Discrete-time plant: `A = (1 - eta mu_f mu_phi*) I`, same `B, C, D`.
pub fn build_dt_state_space(p: &ProblemData) -> StateSpace {
    let n = p.dim();
    let a = DMatrix::identity(n, n) * (1.0 - p.eta() * p.f().mu() * p.phi_conj().mu());
    let (b, c, d) = plant_io(p);
    StateSpace { a, b, c, d, domain: TimeDomain::Discrete }
}

pub fn build_state_space(p: &ProblemData, domain: TimeDomain) -> StateSpace {
    match domain {
        TimeDomain::Continuous => build_ct_state_space(p),
        TimeDomain::Discrete => build_dt_state_space(p),
    }
}

/// `x -> (grad(x + anchor) - shift (x + anchor)) - (grad(anchor) - shift anchor)`.
///
/// Vanishes at zero and is slope restricted to `[0, L - shift]` when
/// `shift = mu`.
#[derive(Debug, Clone)]
pub struct ShiftedNonlinearity {
    base: TestFunction,
    shift: f64,
    anchor: DVector<f64>,
    offset: DVector<f64>,
}

impl ShiftedNonlinearity {
    pub fn new(base: TestFunction, shift: f64, anchor: DVector<f64>) -> Result<Self> {
        let offset = base.gradient(&anchor)? - &anchor * shift;
        Ok(Self { base, shift, anchor, offset })
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let point = x + &self.anchor;
        Ok(self.base.gradient(&point)? - point * self.shift - &self.offset)
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }
}

/// The stacked nonlinearity `Delta = (Delta_1, Delta_2)` of the error system,
/// anchored at the optimum of a concrete instance.
#[derive(Debug, Clone)]
pub struct MdNonlinearity {
    delta_f: ShiftedNonlinearity,
    delta_phi: ShiftedNonlinearity,
    x_opt: DVector<f64>,
    z_opt: DVector<f64>,
}

impl MdNonlinearity {
    /// Uses the known minimiser `x_opt` of `f` and `z_opt = grad phi(x_opt)`,
    /// obtained as the gradient inverse of `phi*`.
    pub fn new(p: &ProblemData, f: &TestFunction, phi_conj: &TestFunction) -> Result<Self> {
        check_oracles(p, f, phi_conj)?;
        let x_opt = f.minimizer().clone();
        let z_opt = phi_conj.gradient_inverse(&x_opt)?;
        // y1_opt = mu_phi* z_opt + u2_opt = grad phi*(z_opt) = x_opt; y2_opt = z_opt.
        let delta_f = ShiftedNonlinearity::new(f.clone(), p.f().mu(), x_opt.clone())?;
        let delta_phi = ShiftedNonlinearity::new(phi_conj.clone(), p.phi_conj().mu(), z_opt.clone())?;
        Ok(Self { delta_f, delta_phi, x_opt, z_opt })
    }

    pub fn x_opt(&self) -> &DVector<f64> {
        &self.x_opt
    }

    pub fn z_opt(&self) -> &DVector<f64> {
        &self.z_opt
    }

    pub fn dim(&self) -> usize {
        self.z_opt.len()
    }

    pub fn channel(&self, i: usize) -> &ShiftedNonlinearity {
        match i {
            0 => &self.delta_f,
            _ => &self.delta_phi,
        }
    }

    /// `(Delta_1(y1), Delta_2(y2))` for a stacked input of length `2d`.
    pub fn apply(&self, ytilde: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        check_dim(2 * n, ytilde.len())?;
        let u1 = self.delta_f.apply(&ytilde.rows(0, n).into_owned())?;
        let u2 = self.delta_phi.apply(&ytilde.rows(n, n).into_owned())?;
        Ok(stack(&u1, &u2))
    }

    /// Solves the algebraic loop `y = C z + D u, u = Delta(y)` for a given error
    /// state. Only `D12` is nonzero, so channel 2 is evaluated first and then
    /// fed through to channel 1. Returns `(y, u)`.
    pub fn close_loop(&self, ss: &StateSpace, ztilde: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        check_dim(n, ztilde.len())?;
        check_dim(2 * n, ss.n_outputs())?;
        let cz = ss.c() * ztilde;
        let y2 = cz.rows(n, n).into_owned();
        let u2 = self.delta_phi.apply(&y2)?;
        let y1 = cz.rows(0, n) + ss.d().view((0, n), (n, n)) * &u2;
        let u1 = self.delta_f.apply(&y1)?;
        Ok((stack(&y1, &y2), stack(&u1, &u2)))
    }
}

/// `(Delta_1(ytilde_1), Delta_2(ytilde_2))` anchored at the instance optimum.
pub fn delta_apply(
    p: &ProblemData,
    f: &TestFunction,
    phi_conj: &TestFunction,
    ytilde: &DVector<f64>,
) -> Result<DVector<f64>> {
    MdNonlinearity::new(p, f, phi_conj)?.apply(ytilde)
}

/// Distance between the Lur'e right-hand side and the direct mirror descent
/// update at state `z`.
///
/// Continuous: `|A zt + B ut - (-eta grad f(grad phi*(z)))|`.
/// Discrete: `|z_opt + A zt + B ut - (z - eta grad f(grad phi*(z)))|`.
pub fn residual_dynamics_check(
    p: &ProblemData,
    f: &TestFunction,
    phi_conj: &TestFunction,
    z: &DVector<f64>,
    domain: TimeDomain,
) -> Result<f64> {
    let nl = MdNonlinearity::new(p, f, phi_conj)?;
    let ss = build_state_space(p, domain);
    let ztilde = z - nl.z_opt();
    let (_, utilde) = nl.close_loop(&ss, &ztilde)?;
    let lure = ss.a() * &ztilde + ss.b() * &utilde;
    let step = f.gradient(&phi_conj.gradient(z)?)? * p.eta();
    let diff = match domain {
        TimeDomain::Continuous => lure + step,
        TimeDomain::Discrete => lure + nl.z_opt() - (z - step),
    };
    Ok(diff.norm())
}

pub(crate) fn check_oracles(p: &ProblemData, f: &TestFunction, phi_conj: &TestFunction) -> Result<()> {
    check_dim(p.dim(), f.dim())?;
    check_dim(p.dim(), phi_conj.dim())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let fp = f.params();
    let cp = phi_conj.params();
    if !(close(fp.mu(), p.f().mu()) && close(fp.l(), p.f().l())) {
        return Err(Error::InvalidParameter("objective oracle moduli do not match the problem data".into()));
    }
    if !(close(cp.mu(), p.phi_conj().mu()) && close(cp.l(), p.phi_conj().l())) {
        return Err(Error::InvalidParameter("conjugate DGF oracle moduli do not match the problem data".into()));
    }
    Ok(())
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}
