use nalgebra::DMatrix;

use super::{LmiOrigin, LmiProblem, EPS_P};
use crate::error::{Error, Result};
use crate::iqc::{dt_sector_filter, dt_weighted_off_by_one_filter, middle_matrix};
use crate::lure::build_dt_state_space;
use crate::problem::ProblemData;

/// Plant augmented with the sector and off-by-one filters. The state is
/// `(plant, sector filter, off-by-one filter)`, `5d` in total; the output
/// stacks both filter outputs (`8d`).
#[derive(Debug, Clone, PartialEq)]
pub struct HatMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

pub fn hat_matrices(p: &ProblemData, rho_bar: f64) -> Result<HatMatrices> {
    let d = p.dim();
    let n = 2 * d;
    let plant = build_dt_state_space(p);
    let sec = dt_sector_filter(p, [0.0; 2])?;
    let obo = dt_weighted_off_by_one_filter(p, rho_bar, [0.0; 2])?;
    let (s, w) = (sec.psi(), obo.psi());

    let split = |m: &DMatrix<f64>| (m.columns(0, n).into_owned(), m.columns(n, n).into_owned());
    let (bs_y, bs_u) = split(s.b());
    let (bw_y, bw_u) = split(w.b());
    let (ds_y, ds_u) = split(s.d());
    let (dw_y, dw_u) = split(w.d());
    let (a, b, c, dd) = (plant.a(), plant.b(), plant.c(), plant.d());

    let ns = d + 2 * n;
    let mut a_hat = DMatrix::zeros(ns, ns);
    a_hat.view_mut((0, 0), (d, d)).copy_from(a);
    a_hat.view_mut((d, 0), (n, d)).copy_from(&(&bs_y * c));
    a_hat.view_mut((d, d), (n, n)).copy_from(s.a());
    a_hat.view_mut((d + n, 0), (n, d)).copy_from(&(&bw_y * c));
    a_hat.view_mut((d + n, d + n), (n, n)).copy_from(w.a());

    let mut b_hat = DMatrix::zeros(ns, n);
    b_hat.view_mut((0, 0), (d, n)).copy_from(b);
    b_hat.view_mut((d, 0), (n, n)).copy_from(&(&bs_y * dd + &bs_u));
    b_hat.view_mut((d + n, 0), (n, n)).copy_from(&(&bw_y * dd + &bw_u));

    let no = 2 * n;
    let mut c_hat = DMatrix::zeros(2 * no, ns);
    c_hat.view_mut((0, 0), (no, d)).copy_from(&(&ds_y * c));
    c_hat.view_mut((0, d), (no, n)).copy_from(s.c());
    c_hat.view_mut((no, 0), (no, d)).copy_from(&(&dw_y * c));
    c_hat.view_mut((no, d + n), (no, n)).copy_from(w.c());

    let mut d_hat = DMatrix::zeros(2 * no, n);
    d_hat.view_mut((0, 0), (no, n)).copy_from(&(&ds_y * dd + &ds_u));
    d_hat.view_mut((no, 0), (no, n)).copy_from(&(&dw_y * dd + &dw_u));

    Ok(HatMatrices { a: a_hat, b: b_hat, c: c_hat, d: d_hat })
}

/// Discrete-time rate LMI at rate `rho` (also used as the off-by-one filter
/// weight), evaluated at `P` (size `5d`), sector weights `alpha` and
/// off-by-one weights `beta`.
pub fn dt_lmi_matrix(
    p: &ProblemData,
    rho: f64,
    pmat: &DMatrix<f64>,
    alpha: [f64; 2],
    beta: [f64; 2],
) -> Result<DMatrix<f64>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("discrete rate must lie in (0, 1] (rho = {rho})")));
    }
    let h = hat_matrices(p, rho)?;
    let ns = h.a.nrows();
    if pmat.nrows() != ns || pmat.ncols() != ns {
        return Err(Error::DimensionMismatch { expected: ns, got: pmat.nrows() });
    }
    let ni = h.b.ncols();
    let nt = ns + ni;

    let mut ab = DMatrix::zeros(ns, nt);
    ab.view_mut((0, 0), (ns, ns)).copy_from(&h.a);
    ab.view_mut((0, ns), (ns, ni)).copy_from(&h.b);
    let mut cd = DMatrix::zeros(h.c.nrows(), nt);
    cd.view_mut((0, 0), (h.c.nrows(), ns)).copy_from(&h.c);
    cd.view_mut((0, ns), (h.c.nrows(), ni)).copy_from(&h.d);

    let d = p.dim();
    let no = 4 * d;
    let mut mid = DMatrix::zeros(2 * no, 2 * no);
    mid.view_mut((0, 0), (no, no)).copy_from(&middle_matrix(alpha, d));
    mid.view_mut((no, no), (no, no)).copy_from(&middle_matrix(beta, d));

    let mut out = ab.transpose() * pmat * &ab + cd.transpose() * mid * &cd;
    let mut shrink = out.view_mut((0, 0), (ns, ns));
    shrink -= pmat * (rho * rho);
    Ok((&out + out.transpose()) * 0.5)
}

/// Feasibility problem for the discrete-time rate `rho`. Decision variables
/// are `P` (size `5d`), `alpha1`, `alpha2`, `beta1`, `beta2`.
pub fn assemble_dt_lmi(p: &ProblemData, rho: f64) -> Result<LmiProblem> {
    assemble_dt_lmi_with(p, rho, true)
}

/// As [`assemble_dt_lmi`]; without the off-by-one multiplier the `beta`
/// variables are dropped (held at zero).
pub fn assemble_dt_lmi_with(p: &ProblemData, rho: f64, use_off_by_one: bool) -> Result<LmiProblem> {
    let ns = 5 * p.dim();
    dt_lmi_matrix(p, rho, &DMatrix::zeros(ns, ns), [0.0; 2], [0.0; 2])?;
    let names: &[&str] = if use_off_by_one { &["alpha1", "alpha2", "beta1", "beta2"] } else { &["alpha1", "alpha2"] };
    let lmi = LmiProblem::from_affine_map(ns, names, EPS_P, |a| {
        let alpha = [a.scalar_or_zero("alpha1"), a.scalar_or_zero("alpha2")];
        let beta = [a.scalar_or_zero("beta1"), a.scalar_or_zero("beta2")];
        Ok(vec![dt_lmi_matrix(p, rho, &a.p, alpha, beta)?])
    })?;
    Ok(lmi.with_origin(LmiOrigin::Discrete { problem: *p, rho }))
}
