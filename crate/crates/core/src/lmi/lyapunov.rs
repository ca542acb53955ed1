use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{check_dim, TestFunction};

/// `phi(y) - phi(x) - <grad phi(x), y - x>`.
pub fn bregman_divergence(phi: &TestFunction, y: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    check_dim(phi.dim(), y.len())?;
    check_dim(phi.dim(), x.len())?;
    let g = phi.gradient(x)?;
    Ok(phi.value(y)? - phi.value(x)? - g.dot(&(y - x)))
}

/// Lyapunov function of a continuous-time certificate at `z`:
/// `1/2 e' P e + gamma (D(z, z_opt) - mu/2 |e|^2)` with `e = z - z_opt`,
/// where `D` is the Bregman divergence of the mirror conjugate and `mu` its
/// strong convexity modulus. `pmat` must already be lifted to the state
/// dimension.
pub fn lyapunov_value(
    pmat: &DMatrix<f64>,
    gamma: f64,
    z: &DVector<f64>,
    z_opt: &DVector<f64>,
    phi_conj: &TestFunction,
) -> Result<f64> {
    let d = z.len();
    check_dim(d, z_opt.len())?;
    if pmat.nrows() != d || pmat.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: pmat.nrows() });
    }
    let e = z - z_opt;
    let quad = 0.5 * e.dot(&(pmat * &e));
    if gamma == 0.0 {
        return Ok(quad);
    }
    let div = bregman_divergence(phi_conj, z, z_opt)?;
    Ok(quad + gamma * (div - 0.5 * phi_conj.params().mu() * e.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_quadratic_instance, FunctionClassParams};
    use approx::assert_relative_eq;

    #[test]
    fn bregman_of_quadratic_is_half_weighted_norm() {
        let params = FunctionClassParams::new(1.0, 4.0).unwrap();
        let q = make_quadratic_instance(params, 2, &[1.0, 4.0]).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.0]);
        let y = DVector::from_vec(vec![1.5, 1.0]);
        // 1/2 (1 * 1^2 + 4 * 2^2) = 8.5
        assert_relative_eq!(bregman_divergence(&q, &y, &x).unwrap(), 8.5, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_without_popov_is_quadratic() {
        let params = FunctionClassParams::new(1.0, 2.0).unwrap();
        let q = make_quadratic_instance(params, 1, &[2.0]).unwrap();
        let p = DMatrix::from_element(1, 1, 3.0);
        let z = DVector::from_element(1, 2.0);
        let zo = DVector::from_element(1, 1.0);
        assert_relative_eq!(lyapunov_value(&p, 0.0, &z, &zo, &q).unwrap(), 1.5);
        // gamma term: D = 1/2 * 2 * 1 = 1, minus mu/2 = 0.5 -> 0.5 * gamma
        assert_relative_eq!(lyapunov_value(&p, 2.0, &z, &zo, &q).unwrap(), 2.5);
    }

    #[test]
    fn zero_at_optimum() {
        let params = FunctionClassParams::new(1.0, 2.0).unwrap();
        let q = make_quadratic_instance(params, 1, &[1.5]).unwrap();
        let p = DMatrix::from_element(1, 1, 3.0);
        let zo = DVector::from_element(1, 0.3);
        assert_eq!(lyapunov_value(&p, 1.0, &zo, &zo, &q).unwrap(), 0.0);
    }
}
