use nalgebra::DMatrix;

use super::{LmiOrigin, LmiProblem, EPS_P, EPS_SLOPE};
use crate::error::{Error, Result};
use crate::iqc::channel_diag;
use crate::lure::build_ct_state_space;
use crate::problem::ProblemData;

/// Continuous-time rate LMI at decay rate `rho`, evaluated at a given `P`,
/// sector weights `alpha` and Popov weight `gamma` (applied to the mirror
/// channel only). The certificate is valid when the result is negative
/// semidefinite, `P` is positive definite and the weights are nonnegative.
pub fn ct_lmi_matrix(
    p: &ProblemData,
    rho: f64,
    pmat: &DMatrix<f64>,
    alpha: [f64; 2],
    gamma: f64,
) -> Result<DMatrix<f64>> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be finite and nonnegative (rho = {rho})")));
    }
    let d = p.dim();
    if pmat.nrows() != d || pmat.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: pmat.nrows() });
    }
    let k = p.slopes();
    for (channel, &slope) in k.iter().enumerate() {
        if slope < EPS_SLOPE {
            return Err(Error::DegenerateSlope { channel: channel + 1, slope });
        }
    }

    let ss = build_ct_state_space(p);
    let (a, b, c, dd) = (ss.a(), ss.b(), ss.c(), ss.d());
    let popov = channel_diag([0.0, gamma], d);
    let sector = channel_diag(alpha, d);
    let k_inv = channel_diag([1.0 / k[0], 1.0 / k[1]], d);

    let b_t = -b;
    let c_t = (&sector + &popov * rho) * c + &popov * c * a;
    let d_t = -(&sector * dd) + &sector * &k_inv - &popov * c * b;

    let top_left = pmat * a + a.transpose() * pmat + pmat * (2.0 * rho);
    let off = pmat * &b_t - c_t.transpose();
    let bottom = -(&d_t + d_t.transpose());

    let mut m = DMatrix::zeros(3 * d, 3 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&top_left);
    m.view_mut((0, d), (d, 2 * d)).copy_from(&off);
    m.view_mut((d, 0), (2 * d, d)).copy_from(&off.transpose());
    m.view_mut((d, d), (2 * d, 2 * d)).copy_from(&bottom);
    Ok((&m + m.transpose()) * 0.5)
}

/// Feasibility problem for the continuous-time rate `rho`. Decision variables
/// are `P` (size `d`), `alpha1`, `alpha2` and, with `use_popov`, `gamma`.
pub fn assemble_ct_lmi(p: &ProblemData, rho: f64, use_popov: bool) -> Result<LmiProblem> {
    // Surface parameter errors before building the coefficient form.
    ct_lmi_matrix(p, rho, &DMatrix::zeros(p.dim(), p.dim()), [0.0; 2], 0.0)?;
    let names: &[&str] = if use_popov { &["alpha1", "alpha2", "gamma"] } else { &["alpha1", "alpha2"] };
    let lmi = LmiProblem::from_affine_map(p.dim(), names, EPS_P, |a| {
        let gamma = if use_popov { a.scalar_or_zero("gamma") } else { 0.0 };
        let alpha = [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")];
        Ok(vec![ct_lmi_matrix(p, rho, &a.p, alpha, gamma)?])
    })?;
    Ok(lmi.with_origin(LmiOrigin::Continuous { problem: *p, rho, use_popov }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{max_eigenvalue, Assignment};
    use crate::problem::FunctionClassParams;
    use approx::assert_relative_eq;

    fn problem(lf: f64, lc: f64) -> ProblemData {
        let f = FunctionClassParams::new(1.0, lf).unwrap();
        let c = FunctionClassParams::new(1.0, lc).unwrap();
        ProblemData::from_conjugate(f, c, 1.0, 1).unwrap()
    }

    #[test]
    fn hand_computed_entries() {
        // d = 1, mu = 1, L_f = 3, L_c = 2, eta = 1:
        // A = -1, B = [-1, -1], C = [1; 1], D = [[0, 1], [0, 0]], k = (2, 1).
        let p = problem(3.0, 2.0);
        let pm = DMatrix::from_element(1, 1, 2.0);
        let m = ct_lmi_matrix(&p, 0.5, &pm, [1.0, 3.0], 0.5).unwrap();
        // Ct = (alpha + rho Gamma) C + Gamma C A = [1; 3.25 - 0.5] = [1; 2.75]
        // PBt - Ct' = [2 - 1, 2 - 2.75]
        assert_relative_eq!(m[(0, 0)], -4.0 + 2.0, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 2)], -0.75, epsilon = 1e-14);
        // Dt = -alpha D + alpha K^-1 - Gamma C B = [[0.5, -1], [0.5, 3.5]]
        assert_relative_eq!(m[(1, 1)], -1.0, epsilon = 1e-14);
        assert_relative_eq!(m[(1, 2)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(m[(2, 2)], -7.0, epsilon = 1e-14);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn coefficient_form_matches_direct_evaluation() {
        let p = problem(4.0, 2.5).with_dim(2).unwrap();
        let lmi = assemble_ct_lmi(&p, 0.3, true).unwrap();
        assert_eq!(lmi.n_vars(), 3 + 3);
        let a = Assignment {
            p: DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.7]),
            scalars: vec![("alpha1".into(), 0.4), ("alpha2".into(), 1.1), ("gamma".into(), 0.25)],
        };
        let coef = &lmi.evaluate(&a).unwrap()[0];
        let direct = &lmi.evaluate_direct(&a).unwrap().unwrap()[0];
        assert!((coef - direct).amax() < 1e-13);
    }

    #[test]
    fn sector_only_drops_popov_variable() {
        let lmi = assemble_ct_lmi(&problem(4.0, 2.0), 0.0, false).unwrap();
        assert_eq!(lmi.scalar_names(), &["alpha1".to_string(), "alpha2".to_string()]);
    }

    #[test]
    fn degenerate_slope_is_reported() {
        let f = FunctionClassParams::new(1.0, 1.0).unwrap();
        let c = FunctionClassParams::new(1.0, 2.0).unwrap();
        let p = ProblemData::from_conjugate(f, c, 1.0, 1).unwrap();
        assert!(matches!(assemble_ct_lmi(&p, 0.0, true), Err(Error::DegenerateSlope { channel: 1, .. })));
    }

    #[test]
    fn rejects_negative_rate() {
        assert!(assemble_ct_lmi(&problem(2.0, 2.0), -0.1, true).is_err());
    }

    #[test]
    fn known_certificate_for_small_condition_number() {
        // For kappa = 4 (L = 2 on both channels) a diagonal certificate exists
        // at rho = 0: P = 1, alpha = (1, 1).
        let p = problem(2.0, 2.0);
        let m = ct_lmi_matrix(&p, 0.0, &DMatrix::from_element(1, 1, 1.0), [1.0, 1.0], 0.0).unwrap();
        assert!(max_eigenvalue(&m) < 0.0, "{m}");
    }
}
