//! Dense primal-dual interior-point method for block-diagonal SDPs in the
//! dual form
//!
//! ```text
//! maximize  b'y   subject to   Z = C - sum_i y_i A_i >= 0,
//! ```
//!
//! paired with the primal `minimize <C, X>` over `<A_i, X> = b_i`, `X >= 0`.
//! Search directions are HKM with a Mehrotra predictor-corrector; the start is
//! infeasible (`X = xi I`, `Z = zeta I`, `y = 0`).

use nalgebra::{DMatrix, DVector};

/// Problem data. `a[i][k]` is the `k`-th block of `A_i` (`None` if zero).
#[derive(Debug, Clone)]
pub struct BlockSdp {
    pub c: Vec<DMatrix<f64>>,
    pub a: Vec<Vec<Option<DMatrix<f64>>>>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub max_iterations: usize,
    /// Relative duality gap and infeasibility target.
    pub tolerance: f64,
    /// Iterations without a tenfold improvement before giving up.
    pub stall_window: usize,
    pub step_fraction: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-10, stall_window: 50, step_fraction: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Converged,
    /// Progress stopped; the last iterate is still returned.
    Stalled,
    IterationLimit,
    /// A factorisation failed.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub status: IpmStatus,
    pub y: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// Largest of relative gap, primal and dual infeasibility at the last iterate.
    pub merit: f64,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl BlockSdp {
    fn n_blocks(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// `A(X)_i = <A_i, X>`.
    fn op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a
                .iter()
                .map(|ai| ai.iter().zip(x).map(|(aik, xk)| aik.as_ref().map_or(0.0, |m| inner(m, xk))).sum::<f64>()),
        )
    }

    /// `sum_i y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.c.iter().map(|c| DMatrix::zeros(c.nrows(), c.ncols())).collect();
        for (ai, yi) in self.a.iter().zip(y.iter()) {
            for (aik, ok) in ai.iter().zip(out.iter_mut()) {
                if let Some(m) = aik {
                    *ok += m * *yi;
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), String> {
        for (k, c) in self.c.iter().enumerate() {
            if c.nrows() != c.ncols() {
                return Err(format!("block {k} is not square"));
            }
        }
        if self.a.len() != self.m() {
            return Err("constraint count does not match objective length".into());
        }
        for ai in &self.a {
            if ai.len() != self.n_blocks() {
                return Err("constraint matrix has wrong number of blocks".into());
            }
            for (aik, ck) in ai.iter().zip(&self.c) {
                if let Some(m) = aik {
                    if m.shape() != ck.shape() {
                        return Err("constraint block has wrong size".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Largest `alpha` with `X + alpha dX >= 0` over all blocks (capped at a
/// large value). `l_inv` holds inverse Cholesky factors of `X`.
fn max_step(l_inv: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (li, d) in l_inv.iter().zip(dx) {
        if li.nrows() == 0 {
            continue;
        }
        let w = sym(li * d * li.transpose());
        let lmin = w.symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

fn inverse_cholesky_factors(blocks: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    blocks
        .iter()
        .map(|m| {
            if m.nrows() == 0 {
                return Some(m.clone());
            }
            let l = m.clone().cholesky()?.l();
            l.try_inverse()
        })
        .collect()
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
}

pub fn solve(sdp: &BlockSdp, opts: &IpmOptions) -> Result<IpmSolution, String> {
    sdp.validate()?;
    let m = sdp.m();
    let sizes: Vec<usize> = sdp.c.iter().map(|c| c.nrows()).collect();
    let n_total: usize = sizes.iter().sum();
    let nf = n_total as f64;

    let a_norm =
        sdp.a.iter().map(|ai| ai.iter().flatten().map(|m| m.norm_squared()).sum::<f64>().sqrt()).collect::<Vec<_>>();
    let c_norm = sdp.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let b_norm = sdp.b.norm();

    let mut xi = 10f64.max(nf.sqrt());
    let mut zeta = 10f64.max(nf.sqrt()).max(c_norm);
    for (i, an) in a_norm.iter().enumerate() {
        xi = xi.max(nf * (1.0 + sdp.b[i].abs()) / (1.0 + an));
        zeta = zeta.max(*an);
    }
    let mut x: Vec<DMatrix<f64>> = sizes.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = sizes.iter().map(|&n| DMatrix::identity(n, n) * zeta).collect();
    let mut y = DVector::zeros(m);

    let mut best_merit = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut status = IpmStatus::IterationLimit;
    let mut iter = 0usize;
    let mut stats = (0.0, 0.0, 0.0, 0.0, f64::INFINITY);
    let mut short_steps = 0usize;

    while iter <= opts.max_iterations {
        let aty = sdp.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = sdp.c.iter().zip(&z).zip(&aty).map(|((c, zk), ak)| c - zk - ak).collect();
        let rp = &sdp.b - sdp.op(&x);
        let pobj: f64 = sdp.c.iter().zip(&x).map(|(c, xk)| inner(c, xk)).sum();
        let dobj = sdp.b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm);
        let gap = x.iter().zip(&z).map(|(xk, zk)| inner(xk, zk)).sum::<f64>();
        let rel_gap = (pobj - dobj).abs().max(gap) / (1.0 + pobj.abs() + dobj.abs());
        let merit = rel_gap.max(pinf).max(dinf);
        stats = (pobj, dobj, pinf, dinf, merit);
        if merit < opts.tolerance {
            status = IpmStatus::Converged;
            break;
        }
        if merit < 0.1 * best_merit {
            best_merit = merit;
            last_improvement = iter;
        } else if iter - last_improvement >= opts.stall_window {
            status = IpmStatus::Stalled;
            break;
        }
        if iter == opts.max_iterations {
            break;
        }

        let mu = gap / nf;
        let z_inv: Option<Vec<DMatrix<f64>>> = z
            .iter()
            .map(|zk| if zk.nrows() == 0 { Some(zk.clone()) } else { zk.clone().cholesky().map(|c| c.inverse()) })
            .collect();
        let Some(z_inv) = z_inv else {
            status = IpmStatus::Breakdown;
            break;
        };

        // Schur complement M_ij = <A_i, X A_j Z^-1>.
        let xaz: Vec<Vec<Option<DMatrix<f64>>>> = sdp
            .a
            .iter()
            .map(|aj| {
                aj.iter().zip(&x).zip(&z_inv).map(|((ajk, xk), zik)| ajk.as_ref().map(|a| xk * a * zik)).collect()
            })
            .collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for k in 0..sizes.len() {
                    if let (Some(ai), Some(g)) = (&sdp.a[i][k], &xaz[j][k]) {
                        s += inner(ai, g);
                    }
                }
                schur[(i, j)] = s;
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[(i, j)] = schur[(j, i)];
            }
        }
        let solver = match factor_schur(&schur) {
            Some(s) => s,
            None => {
                status = IpmStatus::Breakdown;
                break;
            }
        };

        let x_rd_zinv: Vec<DMatrix<f64>> = x.iter().zip(&rd).zip(&z_inv).map(|((xk, rk), zik)| xk * rk * zik).collect();
        let base_rhs = &sdp.b + sdp.op(&x_rd_zinv);

        let direction = |target: f64, corr: Option<&[DMatrix<f64>]>| -> Direction {
            // G = (target I - corr) Z^-1
            let g: Vec<DMatrix<f64>> = z_inv
                .iter()
                .enumerate()
                .map(|(k, zik)| {
                    let mut gk = zik * target;
                    if let Some(c) = corr {
                        gk -= &c[k] * zik;
                    }
                    gk
                })
                .collect();
            let rhs = &base_rhs - sdp.op(&g);
            let dy = solver.solve(&rhs);
            let ady = sdp.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
            let dx: Vec<DMatrix<f64>> =
                (0..sizes.len()).map(|k| sym(&g[k] - &x[k] - &x[k] * &dz[k] * &z_inv[k])).collect();
            Direction { dx, dy, dz }
        };

        let (Some(lx), Some(lz)) = (inverse_cholesky_factors(&x), inverse_cholesky_factors(&z)) else {
            status = IpmStatus::Breakdown;
            break;
        };

        let pred = direction(0.0, None);
        let ap = max_step(&lx, &pred.dx).min(1.0);
        let ad = max_step(&lz, &pred.dz).min(1.0);
        let mu_aff: f64 =
            (0..sizes.len()).map(|k| inner(&(&x[k] + &pred.dx[k] * ap), &(&z[k] + &pred.dz[k] * ad))).sum::<f64>() / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr: Vec<DMatrix<f64>> = pred.dx.iter().zip(&pred.dz).map(|(a, b)| a * b).collect();
        let dir = direction(sigma * mu, Some(&corr));

        let ap = (opts.step_fraction * max_step(&lx, &dir.dx)).min(1.0);
        let ad = (opts.step_fraction * max_step(&lz, &dir.dz)).min(1.0);
        if ap.max(ad) < 1e-8 {
            short_steps += 1;
            if short_steps >= 5 {
                status = IpmStatus::Stalled;
                break;
            }
        } else {
            short_steps = 0;
        }
        for k in 0..sizes.len() {
            x[k] += &dir.dx[k] * ap;
            z[k] += &dir.dz[k] * ad;
        }
        y += &dir.dy * ad;
        iter += 1;
    }

    Ok(IpmSolution {
        status,
        y,
        x,
        z,
        iterations: iter,
        primal_objective: stats.0,
        dual_objective: stats.1,
        primal_infeasibility: stats.2,
        dual_infeasibility: stats.3,
        merit: stats.4,
    })
}

enum SchurSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurSolver {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurSolver::Cholesky(c) => c.solve(rhs),
            SchurSolver::Lu(lu) => lu.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }
}

fn factor_schur(m: &DMatrix<f64>) -> Option<SchurSolver> {
    if let Some(c) = m.clone().cholesky() {
        return Some(SchurSolver::Cholesky(c));
    }
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut reg = m.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-13 * scale;
    }
    if let Some(c) = reg.cholesky() {
        return Some(SchurSolver::Cholesky(c));
    }
    let lu = m.clone().lu();
    if lu.is_invertible() {
        Some(SchurSolver::Lu(lu))
    } else {
        None
    }
}
