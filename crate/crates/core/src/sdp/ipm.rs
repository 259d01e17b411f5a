//! Infeasible-start primal-dual interior-point method for conic programs
//! over a product of complex Hermitian PSD blocks and a nonnegative orthant.
//!
//! Primal: `min <C, X>  s.t.  A(X) = b,  X in K`.
//! Dual:   `max b^T y   s.t.  A*(y) + Z = C,  Z in K`.
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector
//! step. `<A, X> = Re Tr(A X)` throughout, so Hermitian blocks stay complex
//! instead of being embedded as real symmetric matrices of twice the size.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::linalg::{hermitian_part, trace_inner, CMat};

/// Data of one conic program.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub block_dims: Vec<usize>,
    pub lp_dim: usize,
    /// `a_blocks[i][b]`: coefficient of block `b` in constraint `i`.
    pub a_blocks: Vec<Vec<CMat>>,
    /// `a_lp[i]`: orthant coefficients of constraint `i`.
    pub a_lp: Vec<DVector<f64>>,
    pub b: DVector<f64>,
    pub c_blocks: Vec<CMat>,
    pub c_lp: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct ConeIterate {
    pub x_blocks: Vec<CMat>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub z_blocks: Vec<CMat>,
    pub z_lp: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeStatus {
    Optimal,
    PrimalInfeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct ConeResult {
    pub status: ConeStatus,
    pub iterate: ConeIterate,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
}

impl ConeProgram {
    fn num_constraints(&self) -> usize {
        self.b.len()
    }

    fn nu(&self) -> f64 {
        (self.block_dims.iter().sum::<usize>() + self.lp_dim) as f64
    }

    fn apply(&self, x_blocks: &[CMat], x_lp: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.num_constraints(), |i, _| {
            let mut v = self.a_lp[i].dot(x_lp);
            for (a, x) in self.a_blocks[i].iter().zip(x_blocks) {
                v += trace_inner(a, x);
            }
            v
        })
    }

    fn adjoint(&self, y: &DVector<f64>) -> (Vec<CMat>, DVector<f64>) {
        let mut blocks: Vec<CMat> = self.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        let mut lp = DVector::zeros(self.lp_dim);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (acc, a) in blocks.iter_mut().zip(&self.a_blocks[i]) {
                *acc += a * Complex64::new(yi, 0.0);
            }
            lp.axpy(yi, &self.a_lp[i], 1.0);
        }
        (blocks, lp)
    }

    fn primal_objective(&self, it: &ConeIterate) -> f64 {
        let mut v = self.c_lp.dot(&it.x_lp);
        for (c, x) in self.c_blocks.iter().zip(&it.x_blocks) {
            v += trace_inner(c, x);
        }
        v
    }
}

fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn block_norm(blocks: &[CMat], lp: &DVector<f64>) -> f64 {
    (blocks.iter().map(|b| frob(b).powi(2)).sum::<f64>() + lp.norm_squared()).sqrt()
}

/// Largest feasible step `t` with `X + t dX` PSD, capped at `cap`.
fn max_step_psd(chol_l: &CMat, dx: &CMat, cap: f64) -> f64 {
    let t = chol_l.solve_lower_triangular(dx).expect("Cholesky factor is nonsingular");
    let k = chol_l.solve_lower_triangular(&t.adjoint()).expect("Cholesky factor is nonsingular");
    let lam = SymmetricEigen::new(hermitian_part(&k)).eigenvalues.min();
    if lam >= 0.0 {
        cap
    } else {
        (-1.0 / lam).min(cap)
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>, cap: f64) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, &d)| d < 0.0).map(|(&v, &d)| -v / d).fold(cap, f64::min)
}

fn chol_factor(a: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    Cholesky::new(hermitian_part(a))
}

struct Direction {
    dx_blocks: Vec<CMat>,
    dx_lp: DVector<f64>,
    dy: DVector<f64>,
    dz_blocks: Vec<CMat>,
    dz_lp: DVector<f64>,
}

/// Solves the HKM Newton system for the given complementarity targets
/// `rc_blocks = sigma mu I - X Z - corr`, `rc_lp` likewise.
#[allow(clippy::too_many_arguments)]
fn solve_direction(
    prog: &ConeProgram,
    it: &ConeIterate,
    z_inv: &[CMat],
    schur: &Cholesky<f64, Dyn>,
    r_p: &DVector<f64>,
    rd_blocks: &[CMat],
    rd_lp: &DVector<f64>,
    rc_blocks: &[CMat],
    rc_lp: &DVector<f64>,
) -> Direction {
    // rhs = r_p - A(Rc Z^-1) + A(X Rd Z^-1)
    let mut t_blocks = Vec::with_capacity(prog.block_dims.len());
    for b in 0..prog.block_dims.len() {
        let t = (&rc_blocks[b] - &it.x_blocks[b] * &rd_blocks[b]) * &z_inv[b];
        t_blocks.push(t);
    }
    let t_lp = DVector::from_fn(prog.lp_dim, |l, _| (rc_lp[l] - it.x_lp[l] * rd_lp[l]) / it.z_lp[l]);
    let rhs = r_p - prog.apply(&t_blocks, &t_lp);
    let dy = schur.solve(&rhs);

    let (ay_blocks, ay_lp) = prog.adjoint(&dy);
    let dz_blocks: Vec<CMat> = rd_blocks.iter().zip(&ay_blocks).map(|(r, a)| r - a).collect();
    let dz_lp = rd_lp - ay_lp;
    let dx_blocks = (0..prog.block_dims.len())
        .map(|b| {
            let d = (&rc_blocks[b] - &it.x_blocks[b] * &dz_blocks[b]) * &z_inv[b];
            hermitian_part(&d)
        })
        .collect();
    let dx_lp = DVector::from_fn(prog.lp_dim, |l, _| (rc_lp[l] - it.x_lp[l] * dz_lp[l]) / it.z_lp[l]);
    Direction { dx_blocks, dx_lp, dy, dz_blocks, dz_lp }
}

pub fn solve(prog: &ConeProgram, settings: IpmSettings) -> ConeResult {
    let m = prog.num_constraints();
    let nb = prog.block_dims.len();
    let nu = prog.nu();

    let a_norms: Vec<f64> = (0..m)
        .map(|i| (prog.a_blocks[i].iter().map(|a| frob(a).powi(2)).sum::<f64>() + prog.a_lp[i].norm_squared()).sqrt())
        .collect();
    let c_norm = block_norm(&prog.c_blocks, &prog.c_lp);
    let b_norm = prog.b.norm();
    let n_max = prog.block_dims.iter().copied().max().unwrap_or(1).max(1) as f64;

    let xi = (0..m)
        .map(|i| n_max * (1.0 + prog.b[i].abs()) / (1.0 + a_norms[i]))
        .fold(10f64.max(n_max.sqrt()), f64::max);
    let zeta = a_norms.iter().copied().fold(10f64.max(n_max.sqrt()).max(c_norm), f64::max);

    let mut it = ConeIterate {
        x_blocks: prog.block_dims.iter().map(|&n| CMat::identity(n, n) * Complex64::new(xi, 0.0)).collect(),
        x_lp: DVector::from_element(prog.lp_dim, xi),
        y: DVector::zeros(m),
        z_blocks: prog.block_dims.iter().map(|&n| CMat::identity(n, n) * Complex64::new(zeta, 0.0)).collect(),
        z_lp: DVector::from_element(prog.lp_dim, zeta),
    };

    let mut status = ConeStatus::MaxIter;
    let mut iterations = 0;
    let (mut pres, mut dres, mut gap);

    loop {
        let ax = prog.apply(&it.x_blocks, &it.x_lp);
        let r_p = &prog.b - &ax;
        let (aty_blocks, aty_lp) = prog.adjoint(&it.y);
        let rd_blocks: Vec<CMat> = (0..nb).map(|b| &prog.c_blocks[b] - &it.z_blocks[b] - &aty_blocks[b]).collect();
        let rd_lp = &prog.c_lp - &it.z_lp - &aty_lp;

        let pobj = prog.primal_objective(&it);
        let dobj = prog.b.dot(&it.y);
        pres = r_p.norm() / (1.0 + b_norm);
        let rd_norm = block_norm(&rd_blocks, &rd_lp);
        dres = rd_norm / (1.0 + c_norm);
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if pres < settings.tol_feas && dres < settings.tol_feas && gap < settings.tol_gap {
            status = ConeStatus::Optimal;
            break;
        }
        // Dual improving ray: b^T y grows while A*(y) stays nearly nonpositive.
        if dobj > 0.0 && (c_norm + rd_norm) / dobj < 1e-9 {
            status = ConeStatus::PrimalInfeasible;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let mu = (it.x_blocks.iter().zip(&it.z_blocks).map(|(x, z)| trace_inner(x, z)).sum::<f64>()
            + it.x_lp.dot(&it.z_lp))
            / nu;

        let z_chol: Option<Vec<_>> = it.z_blocks.iter().map(chol_factor).collect();
        let Some(z_chol) = z_chol else { break };
        let z_inv: Vec<CMat> = z_chol.iter().map(|c| hermitian_part(&c.inverse())).collect();

        // Schur complement M_ij = <A_i, X A_j Z^-1> + sum_l a_il x_l / z_l a_jl
        let mut schur = DMatrix::<f64>::zeros(m, m);
        let d_lp = it.x_lp.component_div(&it.z_lp);
        for j in 0..m {
            let p: Vec<CMat> = (0..nb).map(|b| &it.x_blocks[b] * &prog.a_blocks[j][b] * &z_inv[b]).collect();
            let scaled_lp = prog.a_lp[j].component_mul(&d_lp);
            for i in 0..m {
                let mut v = prog.a_lp[i].dot(&scaled_lp);
                for b in 0..nb {
                    v += trace_inner(&prog.a_blocks[i][b], &p[b]);
                }
                schur[(i, j)] = v;
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let diag_max = schur.diagonal().amax().max(1e-300);
        let schur_chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut reg = schur;
                for i in 0..m {
                    reg[(i, i)] += 1e-12 * diag_max;
                }
                match Cholesky::new(reg) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let xz: Vec<CMat> = (0..nb).map(|b| &it.x_blocks[b] * &it.z_blocks[b]).collect();
        let rc_aff: Vec<CMat> = xz.iter().map(|p| -p).collect();
        let rc_aff_lp = -it.x_lp.component_mul(&it.z_lp);
        let aff = solve_direction(prog, &it, &z_inv, &schur_chol, &r_p, &rd_blocks, &rd_lp, &rc_aff, &rc_aff_lp);

        let x_chol: Option<Vec<_>> = it.x_blocks.iter().map(chol_factor).collect();
        let Some(x_chol) = x_chol else { break };
        let step = |dir: &Direction| -> (f64, f64) {
            let mut ap = max_step_lp(&it.x_lp, &dir.dx_lp, 1.0);
            let mut ad = max_step_lp(&it.z_lp, &dir.dz_lp, 1.0);
            for b in 0..nb {
                ap = ap.min(max_step_psd(&x_chol[b].l(), &dir.dx_blocks[b], 1.0));
                ad = ad.min(max_step_psd(&z_chol[b].l(), &dir.dz_blocks[b], 1.0));
            }
            (ap, ad)
        };
        let (ap_aff, ad_aff) = step(&aff);
        let mut mu_aff = 0.0;
        for b in 0..nb {
            let x = &it.x_blocks[b] + &aff.dx_blocks[b] * Complex64::new(ap_aff, 0.0);
            let z = &it.z_blocks[b] + &aff.dz_blocks[b] * Complex64::new(ad_aff, 0.0);
            mu_aff += trace_inner(&x, &z);
        }
        mu_aff += (&it.x_lp + &aff.dx_lp * ap_aff).dot(&(&it.z_lp + &aff.dz_lp * ad_aff));
        mu_aff /= nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let target = Complex64::new(sigma * mu, 0.0);
        let rc: Vec<CMat> = (0..nb)
            .map(|b| {
                let n = prog.block_dims[b];
                CMat::identity(n, n) * target - &xz[b] - &aff.dx_blocks[b] * &aff.dz_blocks[b]
            })
            .collect();
        let rc_lp = DVector::from_fn(prog.lp_dim, |l, _| {
            sigma * mu - it.x_lp[l] * it.z_lp[l] - aff.dx_lp[l] * aff.dz_lp[l]
        });
        let dir = solve_direction(prog, &it, &z_inv, &schur_chol, &r_p, &rd_blocks, &rd_lp, &rc, &rc_lp);
        let (ap, ad) = step(&dir);
        let tau = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);

        for b in 0..nb {
            it.x_blocks[b] = hermitian_part(&(&it.x_blocks[b] + &dir.dx_blocks[b] * Complex64::new(ap, 0.0)));
            it.z_blocks[b] = hermitian_part(&(&it.z_blocks[b] + &dir.dz_blocks[b] * Complex64::new(ad, 0.0)));
        }
        it.x_lp.axpy(ap, &dir.dx_lp, 1.0);
        it.z_lp.axpy(ad, &dir.dz_lp, 1.0);
        it.y.axpy(ad, &dir.dy, 1.0);

        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
    }

    ConeResult {
        status,
        iterate: it,
        primal_res: pres,
        dual_res: dres,
        gap,
        iterations,
    }
}
