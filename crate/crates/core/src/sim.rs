//! Mirror descent trajectories, empirical rates and Lyapunov traces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lmi::{lyapunov_value, Assignment};
use crate::lure::{MdNonlinearity, TimeDomain};
use crate::problem::{ProblemData, TestFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub domain: TimeDomain,
    /// Iteration indices (discrete) or times (continuous).
    pub times: Vec<f64>,
    /// Mirror-space iterates.
    pub z: Vec<DVector<f64>>,
    /// Primal iterates `x = grad phi*(z)`.
    pub x: Vec<DVector<f64>>,
    pub dist: Vec<f64>,
    pub z_opt: DVector<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// Per-step factor (discrete) or decay exponent (continuous).
    pub rho_hat: f64,
    /// RMS residual of the log-distance fit.
    pub residual: f64,
    /// Half-open sample range used by the fit.
    pub window: (usize, usize),
    pub reliable: bool,
}

/// Residual above which a fit is flagged unreliable.
pub const RESIDUAL_LIMIT: f64 = 0.1;
const MIN_FIT_SAMPLES: usize = 10;

/// `z -> -eta grad f(grad phi*(z))`.
fn md_field(p: &ProblemData, f: &TestFunction, phi_conj: &TestFunction, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(f.gradient(&phi_conj.gradient(z)?)? * -p.eta())
}

fn recorder(domain: TimeDomain, z_opt: DVector<f64>, cap: usize) -> Trajectory {
    Trajectory {
        domain,
        times: Vec::with_capacity(cap),
        z: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        dist: Vec::with_capacity(cap),
        z_opt,
    }
}

fn record(traj: &mut Trajectory, phi_conj: &TestFunction, t: f64, z: DVector<f64>) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { index: traj.len() });
    }
    traj.x.push(phi_conj.gradient(&z)?);
    traj.dist.push((&z - &traj.z_opt).norm());
    traj.z.push(z);
    traj.times.push(t);
    Ok(())
}

/// Mirror descent `z+ = z - eta grad f(grad phi*(z))`, `steps` iterations;
/// the trajectory holds `steps + 1` samples.
pub fn simulate_dt(
    p: &ProblemData,
    f: &TestFunction,
    phi_conj: &TestFunction,
    z0: &DVector<f64>,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let nl = MdNonlinearity::new(p, f, phi_conj)?;
    crate::problem::check_dim(nl.dim(), z0.len())?;
    let mut traj = recorder(TimeDomain::Discrete, nl.z_opt().clone(), steps + 1);
    let mut z = z0.clone();
    record(&mut traj, phi_conj, 0.0, z.clone())?;
    for k in 1..=steps {
        z += md_field(p, f, phi_conj, &z)?;
        record(&mut traj, phi_conj, k as f64, z.clone())?;
    }
    Ok(traj)
}

/// Default integration step `0.01 / (eta L_f L_phi*)`.
pub fn default_ct_step(p: &ProblemData) -> f64 {
    0.01 / (p.eta() * p.f().l() * p.phi_conj().l())
}

/// Largest accepted integration step `0.1 / (eta L_f L_phi*)`.
pub fn max_ct_step(p: &ProblemData) -> f64 {
    0.1 / (p.eta() * p.f().l() * p.phi_conj().l())
}

/// Mirror descent flow `z' = -eta grad f(grad phi*(z))` by classical RK4 on
/// `[0, t_end]`. The step is shrunk uniformly so the grid ends at `t_end`.
pub fn simulate_ct(
    p: &ProblemData,
    f: &TestFunction,
    phi_conj: &TestFunction,
    z0: &DVector<f64>,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive (t_end = {t_end})")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive (h = {h})")));
    }
    let h_max = max_ct_step(p);
    if h > h_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("step {h} exceeds the stability limit {h_max}")));
    }
    let nl = MdNonlinearity::new(p, f, phi_conj)?;
    crate::problem::check_dim(nl.dim(), z0.len())?;
    let n = (t_end / h - 1e-9).ceil().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut traj = recorder(TimeDomain::Continuous, nl.z_opt().clone(), n + 1);
    let mut z = z0.clone();
    record(&mut traj, phi_conj, 0.0, z.clone())?;
    let field = |z: &DVector<f64>| md_field(p, f, phi_conj, z);
    for k in 1..=n {
        let k1 = field(&z)?;
        let k2 = field(&(&z + &k1 * (0.5 * dt)))?;
        let k3 = field(&(&z + &k2 * (0.5 * dt)))?;
        let k4 = field(&(&z + &k3 * dt))?;
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t = if k == n { t_end } else { k as f64 * dt };
        record(&mut traj, phi_conj, t, z.clone())?;
    }
    Ok(traj)
}

/// Fits `log dist` against time on the tail of the trajectory.
///
/// Samples are used up to the first one at or below `1e3 eps dist_0`; the fit
/// covers the last half of those (at least ten).
pub fn empirical_rate(traj: &Trajectory) -> Result<RateEstimate> {
    let d0 = traj.dist.first().copied().unwrap_or(0.0);
    if !(d0 > 0.0) {
        return Err(Error::DegenerateWindow("trajectory starts at the optimum".into()));
    }
    let floor = 1e3 * f64::EPSILON * d0;
    let usable = traj.dist.iter().position(|&d| !(d > floor)).unwrap_or(traj.dist.len());
    if usable < MIN_FIT_SAMPLES {
        return Err(Error::DegenerateWindow(format!(
            "only {usable} samples above the noise floor, need {MIN_FIT_SAMPLES}"
        )));
    }
    let start = usable - (usable / 2).max(MIN_FIT_SAMPLES);
    let ts = &traj.times[start..usable];
    let ls: Vec<f64> = traj.dist[start..usable].iter().map(|d| d.ln()).collect();
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let lm = ls.iter().sum::<f64>() / n;
    let stt: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let stl: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let slope = stl / stt;
    let residual = (ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| {
            let r = l - (lm + slope * (t - tm));
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let rho_hat = match traj.domain {
        TimeDomain::Discrete => slope.exp(),
        TimeDomain::Continuous => -slope,
    };
    Ok(RateEstimate { rho_hat, residual, window: (start, usable), reliable: residual <= RESIDUAL_LIMIT })
}

/// Lyapunov function of a continuous-time certificate along a trajectory. A
/// certificate for the scalar problem is lifted to the trajectory dimension.
pub fn lyapunov_trace(traj: &Trajectory, certificate: &Assignment, phi_conj: &TestFunction) -> Result<Vec<f64>> {
    let d = traj.z_opt.len();
    let pmat: DMatrix<f64> = match certificate.p.nrows() {
        n if n == d => certificate.p.clone(),
        1 => certificate.lift(d).p,
        n => return Err(Error::DimensionMismatch { expected: d, got: n }),
    };
    let gamma = certificate.scalar_or_zero("gamma");
    traj.z.iter().map(|z| lyapunov_value(&pmat, gamma, z, &traj.z_opt, phi_conj)).collect()
}

/// Largest `V(t) / (V(0) e^{-2 rho t})` over the trajectory; the envelope
/// holds with tolerance `tol` when this is at most `1 + tol`.
pub fn envelope_ratio(times: &[f64], v: &[f64], rho: f64) -> f64 {
    let v0 = v.first().copied().unwrap_or(0.0);
    if v0 <= 0.0 {
        return if v.iter().all(|x| *x <= 0.0) { 0.0 } else { f64::INFINITY };
    }
    times.iter().zip(v).map(|(t, vt)| vt / (v0 * (-2.0 * rho * t).exp())).fold(0.0, f64::max)
}

/// Fixed point of the mirror descent map found by iteration; an independent
/// route to `z_opt` for instances without a closed-form gradient inverse.
pub fn optimum_by_iteration(
    p: &ProblemData,
    f: &TestFunction,
    phi_conj: &TestFunction,
    z0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let mut z = z0.clone();
    for k in 0..max_iter {
        let step = md_field(p, f, phi_conj, &z)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { index: k });
        }
        z += &step;
        if step.norm() <= tol * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::NumericalFailure(format!("no fixed point within {max_iter} iterations")))
}

/// Start point with every coordinate one unit away from `z_opt`.
pub fn default_initial_state(z_opt: &DVector<f64>) -> DVector<f64> {
    z_opt.add_scalar(1.0)
}
