//! Integral quadratic constraints for the shifted gradient nonlinearity.
//!
//! Signals are ordered `(y1, y2, u1, u2)`, each block `d` wide, so every
//! multiplier is a `4d x 4d` matrix. Per-channel weights are replicated
//! across the `d` coordinates of their channel.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lure::{Complex64, StateSpace, TimeDomain};
use crate::problem::{check_dim, ProblemData};

/// Nonnegative IQC weights: sector `alpha`, Popov / off-by-one `beta`, and
/// the continuous-time Popov weight `gamma` of `Gamma = diag(0, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiplierParams {
    alpha: [f64; 2],
    beta: [f64; 2],
    gamma: f64,
}

impl MultiplierParams {
    pub fn new(alpha: [f64; 2], beta: [f64; 2], gamma: f64) -> Result<Self> {
        let all = [alpha[0], alpha[1], beta[0], beta[1], gamma];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("multiplier weights must be finite and nonnegative: {all:?}")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn sector(alpha: [f64; 2]) -> Result<Self> {
        Self::new(alpha, [0.0; 2], 0.0)
    }

    /// Frequency-domain weights equivalent to a continuous-time LMI
    /// certificate: the LMI's `alpha_i` multiplies `K^{-1}` while the
    /// sector multiplier multiplies `K`, hence `alpha_i / k_i`; the Popov
    /// weight on the second channel is `gamma`.
    pub fn from_lmi_multipliers(p: &ProblemData, alpha: [f64; 2], gamma: f64) -> Result<Self> {
        let k = p.slopes();
        if k.iter().any(|&ki| ki <= 0.0) {
            return Err(Error::InvalidParameter("degenerate slope has no sector multiplier".into()));
        }
        Self::new([alpha[0] / k[0], alpha[1] / k[1]], [0.0, gamma], gamma)
    }

    pub fn alpha(&self) -> [f64; 2] {
        self.alpha
    }

    pub fn beta(&self) -> [f64; 2] {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `diag(w1, w2) (x) I_d`.
pub fn channel_diag(w: [f64; 2], d: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(2 * d, (0..2 * d).map(|i| if i < d { w[0] } else { w[1] })))
}

/// `K = diag(L_f - mu_f, L_phi* - mu_phi*) (x) I_d`.
pub fn slope_matrix(p: &ProblemData) -> DMatrix<f64> {
    channel_diag(p.slopes(), p.dim())
}

/// Static sector multiplier.
pub fn sector_pi(p: &ProblemData, mp: &MultiplierParams) -> DMatrix<f64> {
    let d = p.dim();
    let k = p.slopes();
    let mut pi = DMatrix::zeros(4 * d, 4 * d);
    for ch in 0..2 {
        for i in 0..d {
            let y = ch * d + i;
            let u = 2 * d + ch * d + i;
            pi[(y, u)] = mp.alpha[ch] * k[ch];
            pi[(u, y)] = mp.alpha[ch] * k[ch];
            pi[(u, u)] = -2.0 * mp.alpha[ch];
        }
    }
    pi
}

/// Popov multiplier at frequency `omega`: `-j omega beta_i` in the
/// `(y_i, u_i)` block and its conjugate in `(u_i, y_i)`. The `+` orientation
/// of the Popov sign freedom is the one used here.
pub fn popov_pi(p: &ProblemData, mp: &MultiplierParams, omega: f64) -> DMatrix<Complex64> {
    let d = p.dim();
    let mut pi = DMatrix::from_element(4 * d, 4 * d, Complex64::new(0.0, 0.0));
    for ch in 0..2 {
        for i in 0..d {
            let y = ch * d + i;
            let u = 2 * d + ch * d + i;
            pi[(y, u)] = Complex64::new(0.0, -omega * mp.beta[ch]);
            pi[(u, y)] = Complex64::new(0.0, omega * mp.beta[ch]);
        }
    }
    pi
}

/// Conic combination of the sector and Popov multipliers.
pub fn combined_pi(p: &ProblemData, mp: &MultiplierParams, omega: f64) -> DMatrix<Complex64> {
    sector_pi(p, mp).map(|v| Complex64::new(v, 0.0)) + popov_pi(p, mp, omega)
}

/// Logarithmically spaced frequencies.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidParameter(format!("bad log grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect())
}

/// 400 points over `[1e-3, 1e3]` rad/s.
pub fn default_frequency_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 400).expect("static grid")
}

/// Outcome of a frequency sweep of `[G; I]* Pi [G; I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCheck {
    pub passed: bool,
    /// Largest eigenvalue found over the grid.
    pub worst_eigenvalue: f64,
    pub worst_omega: f64,
}

/// Largest eigenvalue of a Hermitian matrix, via its real symmetric embedding
/// `[[Re, -Im], [Im, Re]]` (same spectrum, each eigenvalue doubled).
pub fn hermitian_max_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    let mut real = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            // symmetrise to absorb rounding
            let v = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            real[(i, j)] = v.re;
            real[(i + n, j + n)] = v.re;
            real[(i, j + n)] = -v.im;
            real[(i + n, j)] = v.im;
        }
    }
    real.symmetric_eigenvalues().max()
}

/// Grid check of the strict frequency-domain IQC condition
/// `[G; I]* Pi [G; I] <= -eps I`. A pass on a grid is evidence, not proof.
pub fn check_frequency_condition<F>(ss: &StateSpace, pi: F, omega_grid: &[f64], eps: f64) -> Result<FrequencyCheck>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    if omega_grid.is_empty() {
        return Err(Error::InvalidParameter("frequency grid is empty".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive (eps = {eps})")));
    }
    if !ss.is_stable() {
        return Err(Error::Unstable(ss.stability_measure()));
    }
    let (l, m) = (ss.n_outputs(), ss.n_inputs());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_omega = omega_grid[0];
    for &omega in omega_grid {
        let g = ss.frequency_response(omega)?;
        let mut w = DMatrix::from_element(l + m, m, Complex64::new(0.0, 0.0));
        w.view_mut((0, 0), (l, m)).copy_from(&g);
        for i in 0..m {
            w[(l + i, i)] = Complex64::new(1.0, 0.0);
        }
        let pi_w = pi(omega);
        check_dim(l + m, pi_w.nrows())?;
        let h = w.adjoint() * pi_w * &w;
        let top = hermitian_max_eigenvalue(&h);
        if top > worst {
            worst = top;
            worst_omega = omega;
        }
    }
    Ok(FrequencyCheck { passed: worst <= -eps, worst_eigenvalue: worst, worst_omega })
}

/// A factorised multiplier `Pi = Psi* M Psi`, with `Psi` driven by the
/// stacked signal `(y, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredIqc {
    psi: StateSpace,
    m: DMatrix<f64>,
}

impl FilteredIqc {
    pub fn new(psi: StateSpace, m: DMatrix<f64>) -> Result<Self> {
        check_dim(psi.n_outputs(), m.nrows())?;
        check_dim(psi.n_outputs(), m.ncols())?;
        Ok(Self { psi, m })
    }

    pub fn psi(&self) -> &StateSpace {
        &self.psi
    }

    pub fn middle(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Runs the filter from rest on `(y_k, u_k)` and returns
    /// `sum_k rho^{-2k} v_k' M v_k`, `v_k` being the filter output.
    pub fn weighted_sum(&self, ys: &[DVector<f64>], us: &[DVector<f64>], rho: f64) -> Result<f64> {
        check_dim(ys.len(), us.len())?;
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter("weighting rate must be positive".into()));
        }
        let mut state = DVector::zeros(self.psi.n_states());
        let mut total = 0.0;
        let mut weight = 1.0;
        for (y, u) in ys.iter().zip(us) {
            let input = DVector::from_iterator(y.len() + u.len(), y.iter().chain(u.iter()).copied());
            check_dim(self.psi.n_inputs(), input.len())?;
            let out = self.psi.c() * &state + self.psi.d() * &input;
            total += weight * out.dot(&(&self.m * &out));
            state = self.psi.a() * &state + self.psi.b() * &input;
            weight /= rho * rho;
        }
        Ok(total)
    }
}

fn filter_blocks(p: &ProblemData) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = 2 * p.dim();
    let k = slope_matrix(p);
    let eye = DMatrix::<f64>::identity(n, n);
    // outputs (K y - u, u)
    let mut d_out = DMatrix::zeros(2 * n, 2 * n);
    d_out.view_mut((0, 0), (n, n)).copy_from(&k);
    d_out.view_mut((0, n), (n, n)).copy_from(&(-&eye));
    d_out.view_mut((n, n), (n, n)).copy_from(&eye);
    (k, eye, d_out)
}

pub(crate) fn middle_matrix(w: [f64; 2], d: usize) -> DMatrix<f64> {
    let n = 2 * d;
    let wd = channel_diag(w, d);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&wd);
    m.view_mut((n, 0), (n, n)).copy_from(&wd);
    m
}

/// Static sector filter `Psi_s` (outputs `(K y - u, u)`, zero dynamics on a
/// `2d` state) with `M_s = [[0, alpha], [alpha, 0]]`.
pub fn dt_sector_filter(p: &ProblemData, alpha: [f64; 2]) -> Result<FilteredIqc> {
    MultiplierParams::sector(alpha)?;
    let n = 2 * p.dim();
    let (_, _, d_out) = filter_blocks(p);
    let psi = StateSpace::new(
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, 2 * n),
        DMatrix::zeros(2 * n, n),
        d_out,
        TimeDomain::Discrete,
    )?;
    FilteredIqc::new(psi, middle_matrix(alpha, p.dim()))
}

/// Weighted off-by-one filter `Psi_w`: state `xi+ = -K y + u`, outputs
/// `(rho_bar^2 xi + K y - u, u)`, with `M_w = [[0, beta], [beta, 0]]`.
pub fn dt_weighted_off_by_one_filter(p: &ProblemData, rho_bar: f64, beta: [f64; 2]) -> Result<FilteredIqc> {
    if !(0.0..=1.0).contains(&rho_bar) {
        return Err(Error::InvalidParameter(format!("rho_bar must lie in [0, 1] (rho_bar = {rho_bar})")));
    }
    MultiplierParams::new([0.0; 2], beta, 0.0)?;
    let n = 2 * p.dim();
    let (k, eye, d_out) = filter_blocks(p);
    let mut b = DMatrix::zeros(n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&(-&k));
    b.view_mut((0, n), (n, n)).copy_from(&eye);
    let mut c = DMatrix::zeros(2 * n, n);
    c.view_mut((0, 0), (n, n)).copy_from(&(&eye * (rho_bar * rho_bar)));
    let psi = StateSpace::new(DMatrix::zeros(n, n), b, c, d_out, TimeDomain::Discrete)?;
    FilteredIqc::new(psi, middle_matrix(beta, p.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lure::build_ct_state_space;
    use crate::problem::FunctionClassParams;
    use approx::assert_relative_eq;

    fn problem(d: usize, lf: f64, lc: f64) -> ProblemData {
        let f = FunctionClassParams::new(1.0, lf).unwrap();
        let c = FunctionClassParams::new(1.0, lc).unwrap();
        ProblemData::from_conjugate(f, c, 1.0, d).unwrap()
    }

    #[test]
    fn multiplier_validation() {
        assert!(MultiplierParams::new([1.0, -1.0], [0.0; 2], 0.0).is_err());
        assert!(MultiplierParams::new([1.0, 1.0], [0.0; 2], f64::NAN).is_err());
        assert!(MultiplierParams::new([1.0, 1.0], [2.0; 2], 3.0).is_ok());
    }

    #[test]
    fn sector_pi_examples() {
        let p = problem(1, 3.0, 3.0);
        assert_eq!(sector_pi(&p, &MultiplierParams::default()), DMatrix::zeros(4, 4));

        let pi = sector_pi(&p, &MultiplierParams::sector([1.0, 1.0]).unwrap());
        assert_eq!(pi[(0, 2)], 2.0);
        assert_eq!(pi[(2, 0)], 2.0);
        assert_eq!(pi[(1, 3)], 2.0);
        assert_eq!(pi[(3, 1)], 2.0);
        assert_eq!(pi[(2, 2)], -2.0);
        assert_eq!(pi[(3, 3)], -2.0);
        assert_eq!(pi.view((0, 0), (2, 2)), DMatrix::<f64>::zeros(2, 2));
    }

    #[test]
    fn popov_pi_examples() {
        let p = problem(1, 3.0, 3.0);
        let mp = MultiplierParams::new([0.0; 2], [1.0, 0.0], 0.0).unwrap();
        assert!(popov_pi(&p, &mp, 0.0).iter().all(|v| v.norm() == 0.0));
        let pi = popov_pi(&p, &mp, 1.0);
        assert_eq!(pi[(0, 2)], Complex64::new(0.0, -1.0));
        assert_eq!(pi[(2, 0)], Complex64::new(0.0, 1.0));
        assert!(pi[(1, 3)].norm() == 0.0);
    }

    #[test]
    fn combined_pi_examples() {
        let p = problem(1, 3.0, 3.0);
        let mp = MultiplierParams::new([1.0; 2], [1.0; 2], 1.0).unwrap();
        let pi = combined_pi(&p, &mp, 2.0);
        assert_eq!(pi[(0, 2)], Complex64::new(2.0, -2.0));

        let sector_only = MultiplierParams::sector([0.3, 0.7]).unwrap();
        let s = sector_pi(&p, &sector_only).map(|v| Complex64::new(v, 0.0));
        assert_eq!(combined_pi(&p, &sector_only, 5.0), s);

        let popov_only = MultiplierParams::new([0.0; 2], [0.2, 0.9], 0.0).unwrap();
        assert_eq!(combined_pi(&p, &popov_only, 5.0), popov_pi(&p, &popov_only, 5.0));
    }

    #[test]
    fn zero_multiplier_fails_strict_condition() {
        let p = problem(1, 2.0, 2.0);
        let ss = build_ct_state_space(&p);
        let grid = default_frequency_grid();
        let check =
            check_frequency_condition(&ss, |w| combined_pi(&p, &MultiplierParams::default(), w), &grid, 1e-9).unwrap();
        assert!(!check.passed);
        assert_eq!(check.worst_eigenvalue, 0.0);
    }

    #[test]
    fn frequency_check_preconditions() {
        let p = problem(1, 2.0, 2.0);
        let ss = build_ct_state_space(&p);
        let zero = |_w: f64| DMatrix::from_element(4, 4, Complex64::new(0.0, 0.0));
        assert!(check_frequency_condition(&ss, zero, &[], 1e-9).is_err());
        assert!(check_frequency_condition(&ss, zero, &[1.0], 0.0).is_err());
        let frozen = build_ct_state_space(&p.with_eta(0.0).unwrap());
        assert!(matches!(check_frequency_condition(&frozen, zero, &[1.0], 1e-9), Err(Error::Unstable(_))));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_frequency_grid();
        assert_eq!(g.len(), 400);
        assert_relative_eq!(g[0], 1e-3, max_relative = 1e-12);
        assert_relative_eq!(g[399], 1e3, max_relative = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sector_filter_structure() {
        let p = problem(1, 3.0, 2.0);
        let f = dt_sector_filter(&p, [1.0, 1.0]).unwrap();
        let d = f.psi().d();
        assert_eq!(d.view((0, 0), (2, 2)), slope_matrix(&p));
        assert_eq!(d.view((2, 0), (2, 2)), DMatrix::<f64>::zeros(2, 2));
        assert!(f.psi().c().iter().all(|v| *v == 0.0));

        let zero = dt_sector_filter(&p, [0.0, 0.0]).unwrap();
        let y = vec![DVector::from_vec(vec![0.3, -1.0])];
        let u = vec![DVector::from_vec(vec![0.5, 2.0])];
        assert_eq!(zero.weighted_sum(&y, &u, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn off_by_one_filter_structure() {
        let p = problem(1, 3.0, 2.0);
        let f = dt_weighted_off_by_one_filter(&p, 0.5, [1.0, 1.0]).unwrap();
        assert_eq!(f.psi().n_states(), 2);
        assert_eq!(f.psi().n_outputs(), 4);
        assert_eq!(f.psi().c()[(0, 0)], 0.25);
        assert!(dt_weighted_off_by_one_filter(&p, 1.5, [1.0, 1.0]).is_err());
        assert!(dt_weighted_off_by_one_filter(&p, -0.1, [1.0, 1.0]).is_err());

        // rho_bar = 0 decouples the output from the state.
        let flat = dt_weighted_off_by_one_filter(&p, 0.0, [1.0, 1.0]).unwrap();
        let sector = dt_sector_filter(&p, [1.0, 1.0]).unwrap();
        assert!(flat.psi().c().iter().all(|v| *v == 0.0));
        assert_eq!(flat.psi().d(), sector.psi().d());
        assert_eq!(flat.middle(), sector.middle());

        let zero = dt_weighted_off_by_one_filter(&p, 0.7, [0.0, 0.0]).unwrap();
        let y = vec![DVector::from_vec(vec![0.3, -1.0]); 3];
        let u = vec![DVector::from_vec(vec![0.5, 2.0]); 3];
        assert_eq!(zero.weighted_sum(&y, &u, 0.7).unwrap(), 0.0);
    }
}
