//! Problem parameters and bundled test functions.
//!
//! The objective `f` lives in `S(mu_f, L_f)` and the distance generating
//! function `phi` in `S(mu_phi, L_phi)`. The analysis works with the convex
//! conjugate `phi_conj`, whose moduli are the reciprocals of `phi`'s with the
//! roles swapped.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Strong convexity and smoothness moduli of a function class `S(mu, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionClassParams {
    mu: f64,
    l: f64,
}

impl FunctionClassParams {
    pub fn new(mu: f64, l: f64) -> Result<Self> {
        if !mu.is_finite() || !l.is_finite() {
            return Err(Error::InvalidParameter(format!("moduli must be finite (mu = {mu}, L = {l})")));
        }
        if mu <= 0.0 {
            return Err(Error::InvalidParameter(format!("strong convexity modulus must be positive (mu = {mu})")));
        }
        if l < mu {
            return Err(Error::InvalidParameter(format!(
                "smoothness modulus must satisfy L >= mu (mu = {mu}, L = {l})"
            )));
        }
        Ok(Self { mu, l })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn condition_number(&self) -> f64 {
        self.l / self.mu
    }

    /// Width `L - mu` of the slope sector left after removing `mu/2 |x|^2`.
    pub fn slope_width(&self) -> f64 {
        self.l - self.mu
    }

    pub fn contains_slope(&self, slope: f64) -> bool {
        slope >= self.mu && slope <= self.l
    }
}

/// Moduli of the convex conjugate: `mu* = 1/L`, `L* = 1/mu`.
pub fn conjugate_params(phi: FunctionClassParams) -> Result<FunctionClassParams> {
    FunctionClassParams::new(1.0 / phi.l, 1.0 / phi.mu)
}

/// Everything the certification needs to know about one mirror descent run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemData {
    f: FunctionClassParams,
    phi: FunctionClassParams,
    phi_conj: FunctionClassParams,
    eta: f64,
    dim: usize,
}

impl ProblemData {
    pub fn new(f: FunctionClassParams, phi: FunctionClassParams, eta: f64, dim: usize) -> Result<Self> {
        let phi_conj = conjugate_params(phi)?;
        Self::assemble(f, phi, phi_conj, eta, dim)
    }

    /// Builds the data from the conjugate DGF moduli, which is how the
    /// experiments are parameterised.
    pub fn from_conjugate(f: FunctionClassParams, phi_conj: FunctionClassParams, eta: f64, dim: usize) -> Result<Self> {
        let phi = conjugate_params(phi_conj)?;
        Self::assemble(f, phi, phi_conj, eta, dim)
    }

    /// Same as [`ProblemData::from_conjugate`] with `eta = 2/(L_f L_phi* + mu_f mu_phi*)`.
    pub fn with_default_stepsize(f: FunctionClassParams, phi_conj: FunctionClassParams, dim: usize) -> Result<Self> {
        let eta = 2.0 / (f.l * phi_conj.l + f.mu * phi_conj.mu);
        Self::from_conjugate(f, phi_conj, eta, dim)
    }

    /// The experimental setting used throughout: `mu_f = mu_phi* = 1` and
    /// `L_f = L_phi* = sqrt(kappa)`. `eta = None` selects the default stepsize.
    pub fn balanced(kappa: f64, eta: Option<f64>, dim: usize) -> Result<Self> {
        if !kappa.is_finite() || kappa < 1.0 {
            return Err(Error::InvalidParameter(format!("composite condition number must be >= 1 (kappa = {kappa})")));
        }
        let side = FunctionClassParams::new(1.0, kappa.sqrt())?;
        match eta {
            Some(eta) => Self::from_conjugate(side, side, eta, dim),
            None => Self::with_default_stepsize(side, side, dim),
        }
    }

    fn assemble(
        f: FunctionClassParams,
        phi: FunctionClassParams,
        phi_conj: FunctionClassParams,
        eta: f64,
        dim: usize,
    ) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter(format!("stepsize must be positive (eta = {eta})")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { f, phi, phi_conj, eta, dim })
    }

    /// Copy with a different stepsize. Zero is accepted here so that the
    /// frozen-dynamics limit can be inspected; certification rejects it.
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("stepsize must be nonnegative (eta = {eta})")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn f(&self) -> FunctionClassParams {
        self.f
    }

    pub fn phi(&self) -> FunctionClassParams {
        self.phi
    }

    pub fn phi_conj(&self) -> FunctionClassParams {
        self.phi_conj
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slope widths `(L_f - mu_f, L_phi* - mu_phi*)` of the shifted nonlinearities.
    pub fn slopes(&self) -> [f64; 2] {
        [self.f.slope_width(), self.phi_conj.slope_width()]
    }

    pub fn condition_number(&self) -> f64 {
        composite_condition_number(self)
    }

    pub fn default_stepsize(&self) -> f64 {
        default_stepsize(self)
    }
}

/// `kappa = kappa_f * kappa_phi* = L_f L_phi* / (mu_f mu_phi*)`.
pub fn composite_condition_number(p: &ProblemData) -> f64 {
    p.f.condition_number() * p.phi_conj.condition_number()
}

/// `eta = 2 / (L_f L_phi* + mu_f mu_phi*)`.
pub fn default_stepsize(p: &ProblemData) -> f64 {
    2.0 / (p.f.l * p.phi_conj.l + p.f.mu * p.phi_conj.mu)
}

/// Curvature profile of a bundled test function.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `1/2 sum_i h_i (x_i - c_i)^2`.
    Quadratic { hessian: Vec<f64> },
    /// Separable Huber-like profile: slope `L` within `knee` of the centre and
    /// slope `mu` beyond it, in every coordinate.
    Huber { knee: f64 },
}

/// A member of `S(mu, L)` with exact gradient, potential and gradient inverse.
///
/// The minimiser is `center` and the potential is normalised to zero there.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    params: FunctionClassParams,
    shape: Shape,
    center: DVector<f64>,
}

/// Diagonal quadratic with Hessian `spectrum`, minimised at the origin.
pub fn make_quadratic_instance(params: FunctionClassParams, d: usize, spectrum: &[f64]) -> Result<TestFunction> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if spectrum.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: spectrum.len() });
    }
    if let Some(bad) = spectrum.iter().find(|&&h| !params.contains_slope(h)) {
        return Err(Error::InvalidParameter(format!("spectrum entry {bad} outside [{}, {}]", params.mu, params.l)));
    }
    if d >= 2 {
        let hits_mu = spectrum.contains(&params.mu);
        let hits_l = spectrum.contains(&params.l);
        if !hits_mu || !hits_l {
            return Err(Error::InvalidParameter("spectrum must attain both mu and L when d >= 2".into()));
        }
    }
    Ok(TestFunction { params, shape: Shape::Quadratic { hessian: spectrum.to_vec() }, center: DVector::zeros(d) })
}

impl TestFunction {
    /// Quadratic whose spectrum runs from `mu` to `L` (evenly spaced in between).
    /// For `d = 1` the single eigenvalue is `mu`.
    pub fn extremal_quadratic(params: FunctionClassParams, d: usize) -> Result<Self> {
        let spectrum: Vec<f64> =
            match d {
                0 => return Err(Error::InvalidParameter("dimension must be at least 1".into())),
                1 => vec![params.mu],
                _ => (0..d)
                    .map(|i| {
                        if i + 1 == d {
                            params.l
                        } else {
                            params.mu + (params.l - params.mu) * i as f64 / (d - 1) as f64
                        }
                    })
                    .collect(),
            };
        make_quadratic_instance(params, d, &spectrum)
    }

    pub fn huber(params: FunctionClassParams, d: usize, knee: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(knee.is_finite() && knee > 0.0) {
            return Err(Error::InvalidParameter(format!("knee must be positive (knee = {knee})")));
        }
        Ok(Self { params, shape: Shape::Huber { knee }, center: DVector::zeros(d) })
    }

    /// Moves the minimiser to `center`.
    pub fn with_center(mut self, center: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), center.len())?;
        self.center = center;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn params(&self) -> FunctionClassParams {
        self.params
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.shape, Shape::Quadratic { .. })
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let r = x - &self.center;
        Ok(match &self.shape {
            Shape::Quadratic { hessian } => {
                DVector::from_iterator(r.len(), r.iter().zip(hessian).map(|(ri, h)| h * ri))
            }
            Shape::Huber { knee } => r.map(|ri| huber_slope(self.params, *knee, ri)),
        })
    }

    /// Potential value, zero at the minimiser.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let r = x - &self.center;
        Ok(match &self.shape {
            Shape::Quadratic { hessian } => 0.5 * r.iter().zip(hessian).map(|(ri, h)| h * ri * ri).sum::<f64>(),
            Shape::Huber { knee } => r.iter().map(|&ri| huber_value(self.params, *knee, ri)).sum(),
        })
    }

    /// Inverse of the gradient map, i.e. the gradient of the convex conjugate.
    pub fn gradient_inverse(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), g.len())?;
        let r = match &self.shape {
            Shape::Quadratic { hessian } => {
                DVector::from_iterator(g.len(), g.iter().zip(hessian).map(|(gi, h)| gi / h))
            }
            Shape::Huber { knee } => g.map(|gi| huber_inverse(self.params, *knee, gi)),
        };
        Ok(r + &self.center)
    }
}

fn huber_slope(p: FunctionClassParams, knee: f64, r: f64) -> f64 {
    if r.abs() <= knee {
        p.l * r
    } else {
        r.signum() * (p.l * knee + p.mu * (r.abs() - knee))
    }
}

fn huber_value(p: FunctionClassParams, knee: f64, r: f64) -> f64 {
    if r.abs() <= knee {
        0.5 * p.l * r * r
    } else {
        let excess = r.abs() - knee;
        0.5 * p.l * knee * knee + p.l * knee * excess + 0.5 * p.mu * excess * excess
    }
}

fn huber_inverse(p: FunctionClassParams, knee: f64, g: f64) -> f64 {
    let corner = p.l * knee;
    if g.abs() <= corner {
        g / p.l
    } else {
        g.signum() * (knee + (g.abs() - corner) / p.mu)
    }
}

/// Value of the co-coercivity quadratic form for the pair `(x, y)`:
///
/// `-2 mu L |y-x|^2 + 2 (L+mu) (y-x)'(g_y-g_x) - 2 |g_y-g_x|^2`,
///
/// which is nonnegative for every genuine member of `S(mu, L)`.
pub fn sector_qc_residual(fun: &TestFunction, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let dx = y - x;
    let dg = fun.gradient(y)? - fun.gradient(x)?;
    let (mu, l) = (fun.params.mu, fun.params.l);
    Ok(-2.0 * mu * l * dx.norm_squared() + 2.0 * (l + mu) * dx.dot(&dg) - 2.0 * dg.norm_squared())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
