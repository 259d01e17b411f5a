//! Trace-constrained complex SDPs in the transmit beamformer `W` and the
//! sensing covariance `S`, plus the rank-one extraction helpers used after
//! relaxation.

mod ipm;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{complex_normal_vec, hermitian_defect, hermitian_part, outer, quad_form, trace_inner, trace_re, CMat, CVec};

pub const DEFAULT_TOL_FEAS: f64 = 1e-8;
pub const DEFAULT_TOL_GAP: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Geq,
    Leq,
}

/// `Re Tr(coeff_w W) + Re Tr(coeff_s S)  (>= | <=)  rhs`.
#[derive(Debug, Clone)]
pub struct TraceConstraint {
    pub coeff_w: CMat,
    pub coeff_s: CMat,
    pub sense: Sense,
    pub rhs: f64,
}

impl TraceConstraint {
    pub fn geq(coeff_w: CMat, coeff_s: CMat, rhs: f64) -> Self {
        Self { coeff_w, coeff_s, sense: Sense::Geq, rhs }
    }

    pub fn leq(coeff_w: CMat, coeff_s: CMat, rhs: f64) -> Self {
        Self { coeff_w, coeff_s, sense: Sense::Leq, rhs }
    }

    pub fn lhs(&self, w: &CMat, s: &CMat) -> f64 {
        trace_inner(&self.coeff_w, w) + trace_inner(&self.coeff_s, s)
    }

    /// Violation relative to `|rhs| + ||A_W|| ||W|| + ||A_S|| ||S||`, zero when satisfied.
    pub fn relative_violation(&self, w: &CMat, s: &CMat) -> f64 {
        let lhs = self.lhs(w, s);
        let short = match self.sense {
            Sense::Geq => self.rhs - lhs,
            Sense::Leq => lhs - self.rhs,
        };
        if short <= 0.0 {
            return 0.0;
        }
        let scale = self.rhs.abs() + self.coeff_w.norm() * w.norm() + self.coeff_s.norm() * s.norm();
        short / scale.max(f64::MIN_POSITIVE)
    }
}

/// `min Tr(W) + Tr(S)` over Hermitian PSD `W` (and `S` when enabled).
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub dim: usize,
    pub constraints: Vec<TraceConstraint>,
    pub with_covariance: bool,
}

impl SdpProblem {
    pub fn new(dim: usize, with_covariance: bool) -> Self {
        Self { dim, constraints: Vec::new(), with_covariance }
    }

    pub fn push(&mut self, c: TraceConstraint) {
        self.constraints.push(c);
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Dimension("SDP dimension must be positive".into()));
        }
        for (j, c) in self.constraints.iter().enumerate() {
            for a in [&c.coeff_w, &c.coeff_s] {
                if a.shape() != (self.dim, self.dim) {
                    return Err(Error::Dimension(format!(
                        "constraint {j}: coefficient is {}x{}, expected {}x{}",
                        a.nrows(),
                        a.ncols(),
                        self.dim,
                        self.dim
                    )));
                }
                if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Domain(format!("constraint {j}: non-finite coefficient")));
                }
                if a.norm() > 0.0 {
                    let d = hermitian_defect(a);
                    if d > 1e-9 {
                        return Err(Error::NotHermitian(d));
                    }
                }
            }
            if !c.rhs.is_finite() {
                return Err(Error::Domain(format!("constraint {j}: non-finite rhs")));
            }
        }
        Ok(())
    }

    /// Largest relative violation of `(W, S)` over all constraints.
    pub fn max_violation(&self, w: &CMat, s: &CMat) -> f64 {
        self.constraints.iter().map(|c| c.relative_violation(w, s)).fold(0.0, f64::max)
    }

    /// Plain-text dump: a header, then each coefficient as `dim` rows of `re im` pairs.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "covariance {}", self.with_covariance)?;
        writeln!(out, "constraints {}", self.constraints.len())?;
        for (j, c) in self.constraints.iter().enumerate() {
            let sense = match c.sense {
                Sense::Geq => "geq",
                Sense::Leq => "leq",
            };
            writeln!(out, "constraint {j} {sense} {:e}", c.rhs)?;
            for (label, a) in [("W", &c.coeff_w), ("S", &c.coeff_s)] {
                writeln!(out, "{label}")?;
                for r in 0..self.dim {
                    let row: Vec<String> = (0..self.dim).map(|k| format!("{:e} {:e}", a[(r, k)].re, a[(r, k)].im)).collect();
                    writeln!(out, "{}", row.join(" "))?;
                }
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("malformed SDP dump: {msg}"));
        let mut lines = input.lines();
        let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("unexpected end"))?.map_err(Error::from) };
        let field = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key).map(|v| v.trim().to_string()).ok_or_else(|| bad(key))
        };
        let dim: usize = field(next()?, "dim")?.parse().map_err(|_| bad("dim"))?;
        let with_covariance: bool = field(next()?, "covariance")?.parse().map_err(|_| bad("covariance"))?;
        let count: usize = field(next()?, "constraints")?.parse().map_err(|_| bad("constraints"))?;
        let mut problem = Self::new(dim, with_covariance);
        for _ in 0..count {
            let head = next()?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "constraint" {
                return Err(bad("constraint header"));
            }
            let sense = match parts[2] {
                "geq" => Sense::Geq,
                "leq" => Sense::Leq,
                _ => return Err(bad("sense")),
            };
            let rhs: f64 = parts[3].parse().map_err(|_| bad("rhs"))?;
            let mut coeffs = Vec::with_capacity(2);
            for label in ["W", "S"] {
                if next()?.trim() != label {
                    return Err(bad("block label"));
                }
                let mut a = CMat::zeros(dim, dim);
                for r in 0..dim {
                    let vals: Vec<f64> = next()?
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| bad("entry")))
                        .collect::<Result<_>>()?;
                    if vals.len() != 2 * dim {
                        return Err(bad("row length"));
                    }
                    for k in 0..dim {
                        a[(r, k)] = Complex64::new(vals[2 * k], vals[2 * k + 1]);
                    }
                }
                coeffs.push(a);
            }
            let coeff_s = coeffs.pop().expect("two blocks read");
            let coeff_w = coeffs.pop().expect("two blocks read");
            problem.push(TraceConstraint { coeff_w, coeff_s, sense, rhs });
        }
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub w: CMat,
    pub s: CMat,
    pub objective_value: f64,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the SDP with a primal-dual interior-point method.
///
/// Rows are normalized to unit Frobenius norm and the variables rescaled so
/// the largest right-hand side is one; tolerances apply to that scaled
/// problem. `W` and `S` are returned in the original units.
pub fn solve_sdp(problem: &SdpProblem, tol_feas: f64, tol_gap: f64, max_iter: usize) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.dim;
    let zero = CMat::zeros(n, n);
    let infeasible = || SdpSolution {
        w: zero.clone(),
        s: zero.clone(),
        objective_value: f64::INFINITY,
        status: SdpStatus::Infeasible,
        primal_residual: f64::INFINITY,
        dual_residual: 0.0,
        gap: f64::INFINITY,
        iterations: 0,
    };

    let mut rows = Vec::new();
    for c in &problem.constraints {
        let a_s = if problem.with_covariance { c.coeff_s.clone() } else { zero.clone() };
        let norm = (c.coeff_w.norm_squared() + a_s.norm_squared()).sqrt();
        if norm == 0.0 {
            let ok = match c.sense {
                Sense::Geq => c.rhs <= 0.0,
                Sense::Leq => c.rhs >= 0.0,
            };
            if !ok {
                return Ok(infeasible());
            }
            continue;
        }
        rows.push((hermitian_part(&c.coeff_w) / Complex64::new(norm, 0.0), hermitian_part(&a_s) / Complex64::new(norm, 0.0), c.sense, c.rhs / norm));
    }
    let scale = rows.iter().map(|r| r.3.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let m = rows.len();
    let blocks = if problem.with_covariance { 2 } else { 1 };
    let prog = ipm::ConeProgram {
        block_dims: vec![n; blocks],
        lp_dim: m,
        a_blocks: rows
            .iter()
            .map(|r| if blocks == 2 { vec![r.0.clone(), r.1.clone()] } else { vec![r.0.clone()] })
            .collect(),
        a_lp: rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut e = DVector::zeros(m);
                e[i] = if r.2 == Sense::Geq { -1.0 } else { 1.0 };
                e
            })
            .collect(),
        b: DVector::from_iterator(m, rows.iter().map(|r| r.3 / scale)),
        c_blocks: vec![CMat::identity(n, n); blocks],
        c_lp: DVector::zeros(m),
    };
    let res = ipm::solve(&prog, ipm::IpmSettings { tol_feas, tol_gap, max_iter });
    let status = match res.status {
        ipm::ConeStatus::Optimal => SdpStatus::Optimal,
        ipm::ConeStatus::PrimalInfeasible => SdpStatus::Infeasible,
        ipm::ConeStatus::MaxIter => SdpStatus::MaxIter,
    };
    if status == SdpStatus::Infeasible {
        let mut out = infeasible();
        out.iterations = res.iterations;
        return Ok(out);
    }
    let k = Complex64::new(scale, 0.0);
    let w = hermitian_part(&res.iterate.x_blocks[0]) * k;
    let s = if blocks == 2 { hermitian_part(&res.iterate.x_blocks[1]) * k } else { zero };
    Ok(SdpSolution {
        objective_value: trace_re(&w) + trace_re(&s),
        w,
        s,
        status,
        primal_residual: res.primal_res,
        dual_residual: res.dual_res,
        gap: res.gap,
        iterations: res.iterations,
    })
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(a: &CMat) -> Result<(DVector<f64>, CMat)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    if a.norm() > 0.0 {
        let d = hermitian_defect(a);
        if d > 1e-9 {
            return Err(Error::NotHermitian(d));
        }
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMat::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    Ok((values, vectors))
}

/// Smallest `beta >= 0` with `beta * a_i + b_i (>= | <=) rhs_i` for every row,
/// or `None` when the rows admit no common `beta`.
pub fn scale_interval(rows: &[(f64, f64, Sense, f64)]) -> Option<f64> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for &(a, b, sense, rhs) in rows {
        // Normalize to `a' beta >= r'`.
        let (a, r) = match sense {
            Sense::Geq => (a, rhs - b),
            Sense::Leq => (-a, b - rhs),
        };
        let tol = 1e-12 * (r.abs() + b.abs());
        if a > 0.0 {
            lo = lo.max(r / a);
        } else if a < 0.0 {
            hi = hi.min(r / a);
        } else if r > tol {
            return None;
        }
    }
    (lo <= hi * (1.0 + 1e-12)).then_some(lo)
}

/// Smallest `beta >= 0` such that `(beta D, S)` meets every constraint, with
/// `S` held fixed.
pub fn min_feasible_scale(d: &CMat, s: &CMat, constraints: &[TraceConstraint]) -> Option<f64> {
    let rows: Vec<_> = constraints.iter().map(|c| (trace_inner(&c.coeff_w, d), trace_inner(&c.coeff_s, s), c.sense, c.rhs)).collect();
    scale_interval(&rows)
}

#[derive(Debug, Clone, Copy)]
pub struct RandomizationOptions {
    pub trials: usize,
    /// Eigenvalue ratio `lambda_2 / lambda_1` below which the principal
    /// eigenvector is used directly; `None` always randomizes.
    pub rank_one_tol: Option<f64>,
}

impl Default for RandomizationOptions {
    fn default() -> Self {
        Self { trials: 1000, rank_one_tol: Some(1e-6) }
    }
}

#[derive(Debug, Clone)]
pub struct RankOneCandidate {
    pub w: CVec,
    pub power: f64,
    pub from_rank_one_branch: bool,
}

fn scaled_candidate(d: &CVec, s: &CMat, constraints: &[TraceConstraint]) -> Option<(f64, f64)> {
    let rows: Vec<_> = constraints.iter().map(|c| (quad_form(&c.coeff_w, d), trace_inner(&c.coeff_s, s), c.sense, c.rhs)).collect();
    let beta = scale_interval(&rows)?;
    Some((beta, beta * d.norm_squared() + trace_re(s)))
}

/// The principal eigenvector of `w_star`, rescaled to the cheapest feasible point.
pub fn principal_candidate(w_star: &CMat, s: &CMat, constraints: &[TraceConstraint]) -> Result<Option<RankOneCandidate>> {
    let (vals, vecs) = hermitian_eig(w_star)?;
    let n = vals.len();
    let d = vecs.column(n - 1).into_owned() * Complex64::new(vals[n - 1].max(0.0).sqrt(), 0.0);
    Ok(scaled_candidate(&d, s, constraints).map(|(beta, power)| RankOneCandidate {
        w: d * Complex64::new(beta.sqrt(), 0.0),
        power,
        from_rank_one_branch: true,
    }))
}

/// Rank-one `W = beta d d^H` from `w_star` by Gaussian randomization with
/// `d ~ CN(0, w_star)`, holding `s` fixed. Each draw is rescaled to its
/// cheapest feasible multiple and the lowest-power draw is kept.
pub fn gaussian_randomization<R: Rng + ?Sized>(
    w_star: &CMat,
    s: &CMat,
    constraints: &[TraceConstraint],
    opts: RandomizationOptions,
    rng: &mut R,
) -> Result<RankOneCandidate> {
    let (vals, vecs) = hermitian_eig(w_star)?;
    let n = vals.len();
    let top = vals[n - 1];
    if top <= 0.0 {
        return Err(Error::NoFeasibleCandidate);
    }
    if let Some(tol) = opts.rank_one_tol {
        let second = if n > 1 { vals[n - 2].max(0.0) } else { 0.0 };
        if second / top < tol {
            return principal_candidate(w_star, s, constraints)?.ok_or(Error::NoFeasibleCandidate);
        }
    }

    let root = DMatrix::from_fn(n, n, |r, k| vecs[(r, k)] * vals[k].max(0.0).sqrt());
    let seeds: Vec<u64> = (0..opts.trials).map(|_| rng.next_u64()).collect();
    let best = seeds
        .par_iter()
        .enumerate()
        .filter_map(|(idx, &seed)| {
            let mut trial_rng = ChaCha8Rng::seed_from_u64(seed);
            let d = &root * complex_normal_vec(n, &mut trial_rng);
            scaled_candidate(&d, s, constraints).map(|(beta, power)| (power, idx, d, beta))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match best {
        Some((power, _, d, beta)) => Ok(RankOneCandidate { w: d * Complex64::new(beta.sqrt(), 0.0), power, from_rank_one_branch: false }),
        None => Err(Error::NoFeasibleCandidate),
    }
}

/// Splits `W` into the rank-one `W f f^H W / (f^H W f)` and moves the rest into
/// `S`; every quadratic form in `W + S` and `f^H W f` are preserved.
pub fn rank_one_reconstruction(w: &CMat, s: &CMat, f: &CVec) -> Result<(CMat, CMat)> {
    let wf = w * f;
    let denom = f.dotc(&wf).re;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Domain("f^H W f must be positive".into()));
    }
    let w_bar = outer(&wf) / Complex64::new(denom, 0.0);
    let s_bar = hermitian_part(&(s + w - &w_bar));
    Ok((w_bar, s_bar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v, 0.0))))
    }

    fn tol() -> (f64, f64, usize) {
        (DEFAULT_TOL_FEAS, DEFAULT_TOL_GAP, DEFAULT_MAX_ITER)
    }

    #[test]
    fn diagonal_toy_problem() {
        let mut p = SdpProblem::new(2, false);
        p.push(TraceConstraint::geq(diag(&[1.0, 2.0]), CMat::zeros(2, 2), 1.0));
        let (a, b, it) = tol();
        let sol = solve_sdp(&p, a, b, it).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective_value - 0.5).abs() < 1e-6, "{}", sol.objective_value);
        assert!((sol.w - diag(&[0.0, 0.5])).norm() < 1e-4);
    }

    #[test]
    fn matched_filter_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [1usize, 2, 4, 8] {
            let f = complex_normal_vec(m, &mut rng) * c(1e-5, 0.0);
            let gamma = 3.0;
            let sigma2 = 4e-13;
            let mut p = SdpProblem::new(m, false);
            p.push(TraceConstraint::geq(outer(&f), CMat::zeros(m, m), gamma * sigma2));
            let (a, b, it) = tol();
            let sol = solve_sdp(&p, a, b, it).unwrap();
            let expect = gamma * sigma2 / f.norm_squared();
            assert_eq!(sol.status, SdpStatus::Optimal);
            assert!((sol.objective_value / expect - 1.0).abs() < 1e-6, "m={m}: {} vs {expect}", sol.objective_value);
        }
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new(3, true);
        p.push(TraceConstraint::leq(CMat::identity(3, 3), CMat::zeros(3, 3), -1.0));
        let (a, b, it) = tol();
        assert_eq!(solve_sdp(&p, a, b, it).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn contradictory_pair_is_infeasible() {
        let mut p = SdpProblem::new(2, false);
        let a = diag(&[1.0, 1.0]);
        p.push(TraceConstraint::geq(a.clone(), CMat::zeros(2, 2), 2.0));
        p.push(TraceConstraint::leq(a, CMat::zeros(2, 2), 1.0));
        let (x, y, it) = tol();
        assert_eq!(solve_sdp(&p, x, y, it).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn covariance_block_participates() {
        // Tr(W) + Tr(S) with the constraint only through S: all energy goes to S.
        let mut p = SdpProblem::new(2, true);
        p.push(TraceConstraint::geq(CMat::zeros(2, 2), diag(&[1.0, 0.0]), 2.0));
        let (a, b, it) = tol();
        let sol = solve_sdp(&p, a, b, it).unwrap();
        assert!((sol.objective_value - 2.0).abs() < 1e-6);
        assert!(trace_re(&sol.w) < 1e-6);
    }

    #[test]
    fn min_scale_interval() {
        assert_eq!(scale_interval(&[(2.0, 0.0, Sense::Geq, 1.0)]), Some(0.5));
        // [0.3, inf) meets [0, 0.8]
        let rows = [(1.0, 0.0, Sense::Geq, 0.3), (1.0, 0.0, Sense::Leq, 0.8)];
        assert_eq!(scale_interval(&rows), Some(0.3));
        let bad = [(2.0, 0.0, Sense::Geq, 4.0), (1.0, 0.0, Sense::Leq, 1.0)];
        assert_eq!(scale_interval(&bad), None);
        assert_eq!(scale_interval(&[(0.0, 1.0, Sense::Geq, 2.0)]), None);
        assert_eq!(scale_interval(&[(-1.0, 0.5, Sense::Geq, 1.0)]), None);
        // vacuous rows leave beta at zero
        assert_eq!(scale_interval(&[(1.0, 0.0, Sense::Geq, -1.0)]), Some(0.0));
    }

    #[test]
    fn min_scale_on_matrices() {
        let d = outer(&CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]));
        let cons = [TraceConstraint::geq(diag(&[1.0, 1.0]), diag(&[1.0, 0.0]), 3.0)];
        // beta * 2 + 1 >= 3
        assert_eq!(min_feasible_scale(&d, &diag(&[1.0, 0.0]), &cons), Some(1.0));
    }

    #[test]
    fn eig_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = {
            let x = CMat::from_fn(4, 4, |_, _| crate::linalg::complex_normal(&mut rng));
            hermitian_part(&x)
        };
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        assert!(vals.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let rec = &vecs * diag(vals.as_slice()) * vecs.adjoint();
        assert!((rec - &a).norm() < 1e-10);
        assert!((&a * &vecs - &vecs * diag(vals.as_slice())).norm() <= 1e-9 * a.norm());
        assert!((vecs.adjoint() * &vecs - CMat::identity(4, 4)).norm() < 1e-9);

        let (ones, _) = hermitian_eig(&CMat::identity(3, 3)).unwrap();
        assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let f = complex_normal_vec(3, &mut rng);
        let (vals, _) = hermitian_eig(&outer(&f)).unwrap();
        assert!((vals[2] - f.norm_squared()).abs() < 1e-12);
        assert!(vals[0].abs() < 1e-12 && vals[1].abs() < 1e-12);

        let non_herm = CMat::from_fn(2, 2, |r, k| c((r * 2 + k) as f64, 0.0));
        assert!(matches!(hermitian_eig(&non_herm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn randomization_rank_one_branch_is_exact() {
        let f = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let w_star = outer(&f) * c(0.5, 0.0);
        let cons = [TraceConstraint::geq(outer(&f), CMat::zeros(2, 2), 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cand = gaussian_randomization(&w_star, &CMat::zeros(2, 2), &cons, RandomizationOptions::default(), &mut rng).unwrap();
        assert!(cand.from_rank_one_branch);
        assert!((cand.power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn randomization_without_feasible_draw() {
        // A Leq row that no positive multiple of any nonzero d can meet together with the Geq row.
        let cons = [
            TraceConstraint::geq(CMat::identity(2, 2), CMat::zeros(2, 2), 1.0),
            TraceConstraint::leq(CMat::identity(2, 2), CMat::zeros(2, 2), 0.5),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = RandomizationOptions { trials: 50, rank_one_tol: None };
        let r = gaussian_randomization(&CMat::identity(2, 2), &CMat::zeros(2, 2), &cons, opts, &mut rng);
        assert!(matches!(r, Err(Error::NoFeasibleCandidate)));
    }

    #[test]
    fn randomization_is_seed_deterministic() {
        let cons = [
            TraceConstraint::geq(diag(&[1.0, 0.0, 0.0]), CMat::zeros(3, 3), 1.0),
            TraceConstraint::geq(diag(&[0.0, 1.0, 0.0]), CMat::zeros(3, 3), 1.0),
        ];
        let w = diag(&[1.0, 1.0, 0.2]);
        let opts = RandomizationOptions { trials: 200, rank_one_tol: Some(1e-6) };
        let a = gaussian_randomization(&w, &CMat::zeros(3, 3), &cons, opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = gaussian_randomization(&w, &CMat::zeros(3, 3), &cons, opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.power, b.power);
        assert!(a.power >= 2.0 - 1e-12);
        for con in &cons {
            assert!(con.relative_violation(&outer(&a.w), &CMat::zeros(3, 3)) < 1e-12);
        }
    }

    #[test]
    fn reconstruction_preserves_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = CMat::from_fn(3, 3, |_, _| crate::linalg::complex_normal(&mut rng));
        let w = &x * x.adjoint();
        let s = diag(&[0.1, 0.2, 0.3]);
        let f = complex_normal_vec(3, &mut rng);
        let (wb, sb) = rank_one_reconstruction(&w, &s, &f).unwrap();
        assert!((quad_form(&wb, &f) - quad_form(&w, &f)).abs() < 1e-10);
        assert!((&wb + &sb - &w - &s).norm() < 1e-10);
        let (vals, _) = hermitian_eig(&wb).unwrap();
        assert!(vals[1].abs() < 1e-10 * vals[2]);
        let (svals, _) = hermitian_eig(&sb).unwrap();
        assert!(svals[0] > -1e-10);
    }

    #[test]
    fn text_dump_round_trip() {
        let mut p = SdpProblem::new(2, true);
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, -0.25), c(0.5, 0.25), c(2.0, 0.0)]);
        p.push(TraceConstraint::geq(a.clone(), CMat::identity(2, 2), 1e-13));
        p.push(TraceConstraint::leq(CMat::zeros(2, 2), a, 3.0));
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        let q = SdpProblem::read_text(buf.as_slice()).unwrap();
        assert_eq!(q.constraints.len(), 2);
        assert_eq!(q.constraints[0].coeff_w, p.constraints[0].coeff_w);
        assert_eq!(q.constraints[1].sense, Sense::Leq);
        assert_eq!(q.constraints[0].rhs, 1e-13);
    }

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMat {
        (0..rank).map(|_| outer(&complex_normal_vec(n, rng))).fold(CMat::zeros(n, n), |a, b| a + b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn optimal_solutions_are_feasible_psd(seed in any::<u64>(), n in 2usize..5, m in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = SdpProblem::new(n, seed % 2 == 0);
            for _ in 0..m {
                let aw = random_psd(n, 1 + (rng.next_u64() % n as u64) as usize, &mut rng);
                let as_ = random_psd(n, 1, &mut rng);
                let rhs = rng.random_range(0.1..2.0);
                p.push(TraceConstraint::geq(aw, as_, rhs));
            }
            let sol = solve_sdp(&p, DEFAULT_TOL_FEAS, DEFAULT_TOL_GAP, DEFAULT_MAX_ITER).unwrap();
            prop_assert_eq!(sol.status, SdpStatus::Optimal);
            prop_assert!(p.max_violation(&sol.w, &sol.s) <= 1e-6);
            for x in [&sol.w, &sol.s] {
                let (vals, _) = hermitian_eig(x).unwrap();
                prop_assert!(vals[0] >= -1e-8 * vals[n - 1].abs().max(1e-300));
            }
        }

        #[test]
        fn randomized_candidates_are_feasible(seed in any::<u64>(), n in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cons: Vec<_> = (0..3)
                .map(|_| TraceConstraint::geq(random_psd(n, 1, &mut rng), CMat::zeros(n, n), 1.0))
                .collect();
            let w = random_psd(n, n, &mut rng);
            let opts = RandomizationOptions { trials: 64, rank_one_tol: None };
            let cand = gaussian_randomization(&w, &CMat::zeros(n, n), &cons, opts, &mut rng).unwrap();
            for con in &cons {
                prop_assert!(con.relative_violation(&outer(&cand.w), &CMat::zeros(n, n)) < 1e-12);
            }
            prop_assert!((cand.power - cand.w.norm_squared()).abs() <= 1e-12 * cand.power);
        }
    }
}
