//! Alternating optimization of receive filters, transmit covariance and
//! reflection coefficients for minimum transmit power.

use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use num_complex::Complex64;
use rand::Rng;

use crate::benchmarks::{mf_receivers, zf_receivers, Scheme, SchemeConfig, SchemeFlags};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{outer, quad_form, trace_re, CMat, CVec};
use crate::metrics::{BeamformingSolution, SystemParams};
use crate::sdp::{
    gaussian_randomization, hermitian_eig, principal_candidate, rank_one_reconstruction, scale_interval, solve_sdp,
    RandomizationOptions, SdpProblem, SdpStatus, TraceConstraint, DEFAULT_MAX_ITER, DEFAULT_TOL_FEAS, DEFAULT_TOL_GAP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AoConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub randomization_trials: usize,
    /// Trials for one extra randomization pass after the loop; 0 skips it.
    pub final_randomization_trials: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha_bounds: (f64, f64),
    /// Extract `w` from the relaxed `W` by moving the residual rank into `S`
    /// whenever `S` is a variable, instead of randomizing.
    pub exact_rank_one: bool,
    pub sdp_tol_feas: f64,
    pub sdp_tol_gap: f64,
    pub sdp_max_iter: usize,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iter: 20,
            randomization_trials: 1000,
            final_randomization_trials: 100_000,
            lambda1: 1.0,
            lambda2: 1.0,
            alpha_bounds: (1e-3, 1.0 - 1e-3),
            exact_rank_one: true,
            sdp_tol_feas: DEFAULT_TOL_FEAS,
            sdp_tol_gap: DEFAULT_TOL_GAP,
            sdp_max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_bounds;
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("alpha bounds ({lo}, {hi}) must satisfy 0 < min < max < 1")));
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::Config("slack weights must be positive".into()));
        }
        if self.max_iter == 0 || self.randomization_trials == 0 {
            return Err(Error::Config("max_iter and randomization_trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoStatus {
    Converged,
    MaxIter,
    /// A later sub-problem failed; the best earlier iterate is returned.
    SubproblemInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// Transmit power after the initial point and after every iteration.
    pub objective_per_iter: Vec<f64>,
    pub status: AoStatus,
    pub iterations: usize,
    /// Accumulated receiver, transmit and reflection stage time (ms).
    pub stage_ms: [f64; 3],
    /// Iterations whose objective rose by more than `1e-6` relative.
    pub monotonicity_violations: usize,
    /// No rank-one beamformer could be recovered from some relaxed solution.
    pub high_rank: bool,
}

/// `R_x = w w^H + S`.
fn covariance(w: &CVec, s: &CMat) -> CMat {
    outer(w) + s
}

/// Receive filters maximizing each sensing SINR for fixed transmit and
/// reflection variables. Residual self-interference adds `lambda_si |f^H w|^2`
/// to the white part of the interference covariance.
pub fn mmse_receivers(ch: &ChannelSet, w: &CVec, s: &CMat, alpha: &[f64], sigma2: f64, lambda_si: f64) -> Result<Vec<CVec>> {
    let k_tags = ch.num_tags();
    let n = ch.num_rx();
    if alpha.len() != k_tags || w.len() != ch.num_tx() || s.shape() != (w.len(), w.len()) {
        return Err(Error::Dimension("receiver update inputs do not match the channel set".into()));
    }
    let r_x = covariance(w, s);
    let s_eq = equivalent_sensing_vector(s)?;
    let white = sigma2 + lambda_si * ch.f.dotc(w).norm_sqr();
    let echo: Vec<f64> = (0..k_tags).map(|i| quad_form(&r_x, &ch.g_f[i])).collect();
    (0..k_tags)
        .map(|k| {
            let mut q = CMat::identity(n, n) * Complex64::new(white, 0.0);
            for i in (0..k_tags).filter(|&i| i != k) {
                q += outer(&ch.g_b[i]) * Complex64::new(alpha[i] * echo[i], 0.0);
            }
            let chol = q.cholesky().ok_or_else(|| Error::Domain("interference covariance is not positive definite".into()))?;
            let drive = ch.g_f[k].dotc(&(w + &s_eq)) * alpha[k].sqrt();
            let g_tilde = &ch.g_b[k] * drive;
            let mut u = chol.solve(&g_tilde);
            if !(u.norm() > 0.0 && u.norm().is_finite()) {
                // G_k R_x G_k^H is proportional to g_b g_b^H, so this is the same direction.
                u = chol.solve(&ch.g_b[k]);
            }
            let nu = u.norm();
            if !(nu > 0.0) {
                return Err(Error::Domain(format!("backward channel of tag {k} is zero")));
            }
            Ok(u / Complex64::new(nu, 0.0))
        })
        .collect()
}

/// Principal eigenvector of `S` scaled by the square root of its eigenvalue.
fn equivalent_sensing_vector(s: &CMat) -> Result<CVec> {
    let m = s.nrows();
    if trace_re(s) <= 0.0 {
        return Ok(CVec::zeros(m));
    }
    let (vals, vecs) = hermitian_eig(s)?;
    Ok(vecs.column(m - 1).into_owned() * Complex64::new(vals[m - 1].max(0.0).sqrt(), 0.0))
}

/// The relaxed transmit problem for fixed receivers and reflection coefficients.
pub fn build_transmit_sdp(ch: &ChannelSet, u: &[CVec], alpha: &[f64], flags: &SchemeFlags, params: &SystemParams) -> Result<SdpProblem> {
    let m = ch.num_tx();
    let k_tags = ch.num_tags();
    let th = &params.thresholds;
    th.validate(k_tags)?;
    if alpha.len() != k_tags || (flags.sensing_sinr && u.len() != k_tags) {
        return Err(Error::Dimension("one receiver and one reflection coefficient per tag".into()));
    }
    let s2 = params.sigma2;
    let zero = || CMat::zeros(m, m);
    let re = |x: f64| Complex64::new(x, 0.0);
    let ff = outer(&ch.f);
    let hh: Vec<CMat> = ch.h.iter().map(outer).collect();
    let mut p = SdpProblem::new(m, flags.sensing_covariance);

    if flags.sensing_sinr {
        let gg: Vec<CMat> = ch.g_f.iter().map(outer).collect();
        for k in 0..k_tags {
            let mut a = zero();
            for i in 0..k_tags {
                let gain = u[k].dotc(&ch.g_b[i]).norm_sqr();
                let weight = if i == k { alpha[k] } else { -th.upsilon[k] * alpha[i] };
                a += &gg[i] * re(weight * gain);
            }
            let a_w = &a - &ff * re(th.upsilon[k] * th.lambda_si);
            p.push(TraceConstraint::geq(a_w, a, th.upsilon[k] * s2));
        }
    }
    if flags.user_sinr {
        // Multiplied through by the thresholds so a zero target stays well posed.
        let comm = |others: &mut dyn Iterator<Item = usize>, gain: f64| {
            let mut interf = zero();
            for i in others {
                interf += &hh[i] * re(alpha[i]);
            }
            let a_s = &interf * re(-gain);
            TraceConstraint::geq(&ff + &a_s, a_s, gain * s2)
        };
        if flags.tag_sinr && k_tags > 0 {
            for k in 0..k_tags {
                p.push(comm(&mut (0..k_tags).filter(|&i| i != k), th.gamma_u * (1.0 + th.gamma_t[k])));
            }
        } else {
            p.push(comm(&mut (0..k_tags), th.gamma_u));
        }
    }
    if flags.eh && k_tags > 0 {
        let need = params.eh.activation_input()?;
        for k in 0..k_tags {
            let a = outer(&ch.g_f[k]) * re(1.0 - alpha[k]);
            p.push(TraceConstraint::geq(a.clone(), a, need));
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionUpdate {
    pub alpha: Vec<f64>,
    /// Sensing residual in units of `sigma2`.
    pub t1: f64,
    /// Harvesting residual in units of the activation input power.
    pub t2: f64,
}

/// Reflection coefficients maximizing the weighted sensing and harvesting
/// residuals for fixed transmit variables and receivers.
#[allow(clippy::too_many_arguments)]
pub fn solve_reflection_lp(
    ch: &ChannelSet,
    w: &CVec,
    s: &CMat,
    u: &[CVec],
    flags: &SchemeFlags,
    params: &SystemParams,
    weights: (f64, f64),
    alpha_bounds: (f64, f64),
) -> Result<ReflectionUpdate> {
    let k_tags = ch.num_tags();
    let th = &params.thresholds;
    let s2 = params.sigma2;
    let r_x = covariance(w, s);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let alpha: Vec<_> = (0..k_tags).map(|_| lp.add_var(0.0, alpha_bounds)).collect();
    let t1 = flags.sensing_sinr.then(|| lp.add_var(weights.0, (0.0, f64::INFINITY)));
    let t2 = (flags.eh && k_tags > 0).then(|| lp.add_var(weights.1, (0.0, f64::INFINITY)));

    // Rows are scaled to unit largest magnitude before handing them over.
    let mut add = |terms: Vec<(microlp::Variable, f64)>, op: ComparisonOp, rhs: f64| {
        let scale = terms.iter().map(|t| t.1.abs()).fold(rhs.abs(), f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let terms: Vec<_> = terms.into_iter().map(|(v, c)| (v, c / scale)).collect();
        lp.add_constraint(&terms, op, rhs / scale);
    };

    let si = th.lambda_si * ch.f.dotc(w).norm_sqr();
    if let Some(t1) = t1 {
        let echo: Vec<f64> = (0..k_tags).map(|i| quad_form(&r_x, &ch.g_f[i])).collect();
        for k in 0..k_tags {
            let mut terms = Vec::with_capacity(k_tags + 1);
            for i in 0..k_tags {
                let n_ki = u[k].dotc(&ch.g_b[i]).norm_sqr() * echo[i];
                terms.push((alpha[i], if i == k { n_ki } else { -th.upsilon[k] * n_ki }));
            }
            terms.push((t1, -s2));
            add(terms, ComparisonOp::Ge, th.upsilon[k] * (s2 + si));
        }
    }
    if flags.user_sinr && k_tags > 0 {
        let signal = ch.f.dotc(w).norm_sqr();
        let m_i: Vec<f64> = (0..k_tags).map(|i| ch.h[i].dotc(w).norm_sqr() + quad_form(s, &ch.h[i])).collect();
        let mut row = |skip: Option<usize>, gain: f64| {
            let terms: Vec<_> = (0..k_tags).filter(|&i| Some(i) != skip).map(|i| (alpha[i], gain * m_i[i])).collect();
            add(terms, ComparisonOp::Le, signal - gain * s2);
        };
        if flags.tag_sinr {
            for k in 0..k_tags {
                row(Some(k), th.gamma_u * (1.0 + th.gamma_t[k]));
            }
        } else {
            row(None, th.gamma_u);
        }
    }
    if let Some(t2) = t2 {
        let need = params.eh.activation_input()?;
        for k in 0..k_tags {
            let p_in = quad_form(&r_x, &ch.g_f[k]);
            add(vec![(alpha[k], -p_in), (t2, -need)], ComparisonOp::Ge, need - p_in);
        }
    }

    let sol = lp
        .solve()
        .map_err(|e| Error::Infeasible(format!("reflection LP: {e}")))?
        .into_solution()
        .map_err(|_| Error::Infeasible("reflection LP interrupted".into()))?;
    let (lo, hi) = alpha_bounds;
    Ok(ReflectionUpdate {
        alpha: alpha.iter().map(|&a| sol.var_value(a).clamp(lo, hi)).collect(),
        t1: t1.map_or(0.0, |v| sol.var_value(v).max(0.0)),
        t2: t2.map_or(0.0, |v| sol.var_value(v).max(0.0)),
    })
}

/// Smallest common scaling of `(w, S)` meeting every constraint.
fn snap(problem: &SdpProblem, w: &CVec, s: &CMat) -> Option<(CVec, CMat)> {
    let ww = outer(w);
    let rows: Vec<_> = problem.constraints.iter().map(|c| (c.lhs(&ww, s), 0.0, c.sense, c.rhs)).collect();
    let beta = scale_interval(&rows)?;
    if !beta.is_finite() {
        return None;
    }
    Some((w * Complex64::new(beta.sqrt(), 0.0), s * Complex64::new(beta, 0.0)))
}

fn power(w: &CVec, s: &CMat) -> f64 {
    w.norm_squared() + trace_re(s)
}

struct TransmitStage {
    w: CVec,
    s: CMat,
    high_rank: bool,
}

/// Solves the relaxed transmit problem and returns the cheaper of the
/// recovered rank-one point and the incumbent, or `None` if neither exists.
fn transmit_stage<R: Rng + ?Sized>(
    ch: &ChannelSet,
    problem: &SdpProblem,
    incumbent: Option<(&CVec, &CMat)>,
    cfg: &AoConfig,
    trials: usize,
    rng: &mut R,
) -> Result<Option<TransmitStage>> {
    let m = problem.dim;
    let sdp = solve_sdp(problem, cfg.sdp_tol_feas, cfg.sdp_tol_gap, cfg.sdp_max_iter)?;
    let mut high_rank = false;
    let mut best: Option<(CVec, CMat)> = None;
    let consider = |cand: Option<(CVec, CMat)>, best: &mut Option<(CVec, CMat)>| {
        if let Some((w, s)) = cand {
            if best.as_ref().is_none_or(|(bw, bs)| power(&w, &s) < power(bw, bs)) {
                *best = Some((w, s));
            }
        }
    };

    if sdp.status != SdpStatus::Infeasible {
        let s_star = if problem.with_covariance { sdp.s.clone() } else { CMat::zeros(m, m) };
        if problem.with_covariance && cfg.exact_rank_one {
            let fwf = quad_form(&sdp.w, &ch.f);
            let (w_bar, s_bar) = if fwf > 1e-12 * trace_re(&sdp.w).max(f64::MIN_POSITIVE) * ch.f.norm_squared() {
                rank_one_reconstruction(&sdp.w, &s_star, &ch.f)?
            } else {
                (CMat::zeros(m, m), &s_star + &sdp.w)
            };
            let w = if trace_re(&w_bar) > 0.0 {
                let (vals, vecs) = hermitian_eig(&w_bar)?;
                vecs.column(m - 1).into_owned() * Complex64::new(vals[m - 1].max(0.0).sqrt(), 0.0)
            } else {
                CVec::zeros(m)
            };
            consider(snap(problem, &w, &s_bar), &mut best);
        } else {
            let opts = RandomizationOptions { trials, rank_one_tol: Some(1e-6) };
            match gaussian_randomization(&sdp.w, &s_star, &problem.constraints, opts, rng) {
                Ok(c) => consider(snap(problem, &c.w, &s_star), &mut best),
                Err(Error::NoFeasibleCandidate) => {}
                Err(e) => return Err(e),
            }
            if let Some(c) = principal_candidate(&sdp.w, &s_star, &problem.constraints)? {
                consider(snap(problem, &c.w, &s_star), &mut best);
            }
            high_rank = best.is_none();
        }
    }
    if let Some((w, s)) = incumbent {
        consider(snap(problem, w, s), &mut best);
    }
    Ok(best.map(|(w, s)| TransmitStage { w, s, high_rank }))
}

fn initial_alpha<R: Rng + ?Sized>(scheme: Scheme, k: usize, bounds: (f64, f64), rng: &mut R) -> Vec<f64> {
    match scheme {
        Scheme::Isac => vec![1.0; k],
        Scheme::RandomAlpha => (0..k).map(|_| rng.random_range(bounds.0..=bounds.1)).collect(),
        _ => vec![0.5; k],
    }
}

/// Alternating optimization for one scheme on one channel realization.
///
/// Returns an error when no feasible starting point exists. Failures in
/// later iterations keep the best earlier iterate and report
/// [`AoStatus::SubproblemInfeasible`].
pub fn ao_solve<R: Rng + ?Sized>(
    ch: &ChannelSet,
    scheme: &SchemeConfig,
    params: &SystemParams,
    cfg: &AoConfig,
    rng: &mut R,
) -> Result<(BeamformingSolution, ConvergenceTrace)> {
    cfg.validate()?;
    scheme.validate()?;
    let flags = scheme.flags;
    let k = ch.num_tags();
    params.thresholds.validate(k)?;
    let lambda_si = params.thresholds.lambda_si;

    let mut alpha = initial_alpha(scheme.scheme, k, cfg.alpha_bounds, rng);
    let mut u = match scheme.scheme {
        Scheme::ZfReceiver => zf_receivers(ch)?,
        _ => mf_receivers(ch)?,
    };
    let mut stage_ms = [0.0; 3];
    let mut high_rank = false;
    let use_randomization = !(flags.sensing_covariance && cfg.exact_rank_one);

    let t0 = Instant::now();
    let mut problem = build_transmit_sdp(ch, &u, &alpha, &flags, params)?;
    let mut init = transmit_stage(ch, &problem, None, cfg, cfg.randomization_trials, rng)?;
    // Matched filters cannot separate tags at nearby angles; when the
    // receivers are free, retry from zero-forcing ones.
    if init.is_none() && flags.optimize_receivers && flags.sensing_sinr && scheme.scheme != Scheme::ZfReceiver {
        if let Ok(zf) = zf_receivers(ch) {
            u = zf;
            problem = build_transmit_sdp(ch, &u, &alpha, &flags, params)?;
            init = transmit_stage(ch, &problem, None, cfg, cfg.randomization_trials, rng)?;
        }
    }
    stage_ms[1] += t0.elapsed().as_secs_f64() * 1e3;
    let Some(init) = init else {
        return Err(Error::Infeasible(format!(
            "{}: no feasible initial transmit point ({} constraints, {} tags)",
            scheme.scheme,
            problem.constraints.len(),
            k
        )));
    };
    high_rank |= init.high_rank;
    let (mut w, mut s) = (init.w, init.s);
    let mut objective = vec![power(&w, &s)];
    let mut status = AoStatus::MaxIter;
    let mut violations = 0;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let t = Instant::now();
        if flags.optimize_receivers && flags.sensing_sinr && k > 0 {
            u = mmse_receivers(ch, &w, &s, &alpha, params.sigma2, lambda_si)?;
        }
        stage_ms[0] += t.elapsed().as_secs_f64() * 1e3;

        let t = Instant::now();
        let problem = build_transmit_sdp(ch, &u, &alpha, &flags, params)?;
        let stage = transmit_stage(ch, &problem, Some((&w, &s)), cfg, cfg.randomization_trials, rng)?;
        stage_ms[1] += t.elapsed().as_secs_f64() * 1e3;
        let Some(stage) = stage else {
            status = AoStatus::SubproblemInfeasible;
            break;
        };
        high_rank |= stage.high_rank;
        (w, s) = (stage.w, stage.s);

        let t = Instant::now();
        if flags.optimize_alpha && k > 0 {
            match solve_reflection_lp(ch, &w, &s, &u, &flags, params, (cfg.lambda1, cfg.lambda2), cfg.alpha_bounds) {
                Ok(upd) => alpha = upd.alpha,
                Err(Error::Infeasible(_)) => {
                    stage_ms[2] += t.elapsed().as_secs_f64() * 1e3;
                    objective.push(power(&w, &s));
                    status = AoStatus::SubproblemInfeasible;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        stage_ms[2] += t.elapsed().as_secs_f64() * 1e3;

        let prev = *objective.last().expect("initial objective recorded");
        let f = power(&w, &s);
        objective.push(f);
        if f > prev * (1.0 + 1e-6) {
            violations += 1;
        }
        // A reflection update shows up in the objective one iteration later.
        let lagged = flags.optimize_alpha && k > 0 && iterations == 1;
        if !lagged && (f - prev).abs() < cfg.epsilon * f {
            status = AoStatus::Converged;
            break;
        }
    }

    if use_randomization && cfg.final_randomization_trials > 0 && status != AoStatus::SubproblemInfeasible {
        let t = Instant::now();
        let problem = build_transmit_sdp(ch, &u, &alpha, &flags, params)?;
        if let Some(stage) = transmit_stage(ch, &problem, Some((&w, &s)), cfg, cfg.final_randomization_trials, rng)? {
            if power(&stage.w, &stage.s) < power(&w, &s) {
                (w, s) = (stage.w, stage.s);
                *objective.last_mut().expect("objective recorded") = power(&w, &s);
            }
        }
        stage_ms[1] += t.elapsed().as_secs_f64() * 1e3;
    }

    let sol = BeamformingSolution { w, s, u: if k > 0 { u } else { Vec::new() }, alpha };
    let trace = ConvergenceTrace { objective_per_iter: objective, status, iterations, stage_ms, monotonicity_violations: violations, high_rank };
    Ok((sol, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::verify_solution;
    use crate::channel::{build_channel_set, stream_rng, FadingSpec, Scenario};
    use crate::linalg::{c, complex_normal_vec};
    use crate::metrics::{sensing_sinr, Thresholds};
    use nalgebra::DVector;

    fn table2(m: usize, k: usize, seed: u64) -> ChannelSet {
        let mut rng = stream_rng(seed, 0);
        let sc = Scenario::table2(m, m, k, &mut rng).unwrap();
        build_channel_set(&sc, FadingSpec::RAYLEIGH, &mut rng).unwrap()
    }

    fn quick() -> AoConfig {
        AoConfig { randomization_trials: 200, final_randomization_trials: 0, ..AoConfig::default() }
    }

    #[test]
    fn table2_builds_nine_constraints() {
        let ch = table2(8, 3, 1);
        let u = mf_receivers(&ch).unwrap();
        let p = build_transmit_sdp(&ch, &u, &[0.5; 3], &SchemeFlags::for_scheme(Scheme::IsabcPassive), &SystemParams::table2(3)).unwrap();
        assert_eq!(p.constraints.len(), 9);
        assert!(p.with_covariance);
    }

    #[test]
    fn vacuous_thresholds_give_zero_power() {
        let ch = table2(4, 2, 2);
        let mut params = SystemParams::table2(2);
        params.thresholds = Thresholds::from_rates(0.0, 0.0, 0.0, 2);
        let mut flags = SchemeFlags::for_scheme(Scheme::IsabcActive);
        flags.eh = false;
        let p = build_transmit_sdp(&ch, &mf_receivers(&ch).unwrap(), &[0.5; 2], &flags, &params).unwrap();
        let sol = solve_sdp(&p, 1e-8, 1e-8, 200).unwrap();
        assert!(sol.objective_value.abs() < 1e-9, "{}", sol.objective_value);
    }

    /// Principal generalized eigenvector of `(a, q)` via `q^{-1/2} a q^{-1/2}`.
    fn gen_eig_oracle(a: &CMat, q: &CMat) -> CVec {
        let (qv, qu) = hermitian_eig(q).unwrap();
        let inv_sqrt = &qu * CMat::from_diagonal(&DVector::from_iterator(qv.len(), qv.iter().map(|&x| c(1.0 / x.sqrt(), 0.0)))) * qu.adjoint();
        let b = &inv_sqrt * a * &inv_sqrt;
        let (bv, bu) = hermitian_eig(&crate::linalg::hermitian_part(&b)).unwrap();
        let top = bu.column(bv.len() - 1).into_owned();
        let x = &inv_sqrt * top;
        let n = x.norm();
        x / c(n, 0.0)
    }

    #[test]
    fn mmse_matches_generalized_eigenvector() {
        let mut rng = stream_rng(9, 1);
        for seed in 0..20 {
            let ch = table2(4, 3, seed);
            let w = complex_normal_vec(4, &mut rng) * c(1e-1, 0.0);
            let x = CMat::from_fn(4, 2, |_, _| crate::linalg::complex_normal(&mut rng)) * c(0.1, 0.0);
            let s = &x * x.adjoint();
            let alpha = [0.3, 0.6, 0.8];
            let sigma2 = 4e-13;
            let u = mmse_receivers(&ch, &w, &s, &alpha, sigma2, 0.0).unwrap();
            let r_x = covariance(&w, &s);
            for k in 0..3 {
                let a = outer(&ch.g_b[k]) * c(alpha[k] * quad_form(&r_x, &ch.g_f[k]), 0.0);
                let mut q = CMat::identity(4, 4) * c(sigma2, 0.0);
                for i in (0..3).filter(|&i| i != k) {
                    q += outer(&ch.g_b[i]) * c(alpha[i] * quad_form(&r_x, &ch.g_f[i]), 0.0);
                }
                let oracle = gen_eig_oracle(&a, &q);
                assert!((u[k].dotc(&oracle).norm() - 1.0).abs() < 1e-8, "seed {seed} tag {k}");
                let sol = BeamformingSolution { w: w.clone(), s: s.clone(), u: u.clone(), alpha: alpha.to_vec() };
                let best = sensing_sinr(&ch, &sol, k, sigma2, 0.0);
                for _ in 0..100 {
                    let v = complex_normal_vec(4, &mut rng);
                    let v = &v / c(v.norm(), 0.0);
                    let mut uu = u.clone();
                    uu[k] = v;
                    let other = BeamformingSolution { u: uu, ..sol.clone() };
                    assert!(sensing_sinr(&ch, &other, k, sigma2, 0.0) <= best * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn mmse_single_tag_is_matched_filter() {
        let ch = table2(4, 1, 4);
        let w = ch.g_f[0].clone();
        let u = mmse_receivers(&ch, &w, &CMat::zeros(4, 4), &[0.5], 1.0, 0.0).unwrap();
        let mf = mf_receivers(&ch).unwrap();
        assert!((u[0].dotc(&mf[0]).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mmse_direction_stable_under_common_alpha_scaling() {
        let ch = table2(4, 3, 6);
        let mut rng = stream_rng(1, 1);
        let w = complex_normal_vec(4, &mut rng);
        let a = [0.4, 0.5, 0.6];
        let b: Vec<f64> = a.iter().map(|x| 0.999 * x).collect();
        let ua = mmse_receivers(&ch, &w, &CMat::zeros(4, 4), &a, 1e-13, 0.0).unwrap();
        let ub = mmse_receivers(&ch, &w, &CMat::zeros(4, 4), &b, 1e-13, 0.0).unwrap();
        for k in 0..3 {
            assert!(1.0 - ua[k].dotc(&ub[k]).norm() < 1e-3);
        }
    }

    /// Sensing and EH rows for one tag, no comm constraint.
    fn one_tag(n11: f64, p_in: f64) -> (ChannelSet, CVec) {
        let one = CVec::from_element(1, c(1.0, 0.0));
        let ch = ChannelSet::from_links(
            CVec::from_element(1, c(0.0, 0.0)),
            vec![CVec::from_element(1, c(p_in.sqrt(), 0.0))],
            vec![CVec::from_element(1, c((n11 / p_in).sqrt(), 0.0))],
            vec![c(1.0, 0.0)],
            vec![0.0],
        )
        .unwrap();
        (ch, one)
    }

    #[test]
    fn reflection_lp_matches_grid_search() {
        let mut params = SystemParams::table2(1);
        params.sigma2 = 1.0;
        params.thresholds.upsilon = vec![1.0];
        let need = params.eh.activation_input().unwrap();
        let p_in = 4.0 * need;
        let (ch, w) = one_tag(50.0, p_in);
        let flags = SchemeFlags { user_sinr: false, tag_sinr: false, ..SchemeFlags::for_scheme(Scheme::SensingOnly) };
        let u = vec![CVec::from_element(1, c(1.0, 0.0))];
        let bounds = (1e-3, 1.0 - 1e-3);
        let upd = solve_reflection_lp(&ch, &w, &CMat::zeros(1, 1), &u, &flags, &params, (1.0, 1.0), bounds).unwrap();
        // objective of a given alpha: both residuals at their largest feasible values
        let obj = |a: f64| {
            let t1 = a * 50.0 - 1.0;
            let t2 = ((1.0 - a) * p_in - need) / need;
            (t1 >= 0.0 && t2 >= 0.0).then_some(t1 + t2)
        };
        let (mut best_a, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..10_000 {
            let a = bounds.0 + (bounds.1 - bounds.0) * i as f64 / 9_999.0;
            if let Some(v) = obj(a) {
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
        }
        // the objective is 54-Lipschitz in alpha, so the grid is within 54 steps of the optimum
        let step = (bounds.1 - bounds.0) / 9_999.0;
        let lp_obj = upd.t1 + upd.t2;
        assert!(lp_obj >= best - 1e-9 && lp_obj - best <= 54.0 * step, "{upd:?} best {best} at {best_a}");
        assert!((upd.alpha[0] - best_a).abs() <= step, "{} vs {best_a}", upd.alpha[0]);
    }

    #[test]
    fn reflection_lp_tight_instance() {
        let mut params = SystemParams::table2(1);
        params.sigma2 = 1.0;
        params.thresholds.upsilon = vec![1.0];
        let need = params.eh.activation_input().unwrap();
        // alpha* = 0.4 satisfies both rows with equality
        let a_star = 0.4;
        let p_in = need / (1.0 - a_star);
        let (ch, w) = one_tag(1.0 / a_star, p_in);
        let flags = SchemeFlags { user_sinr: false, tag_sinr: false, ..SchemeFlags::for_scheme(Scheme::SensingOnly) };
        let u = vec![CVec::from_element(1, c(1.0, 0.0))];
        let upd = solve_reflection_lp(&ch, &w, &CMat::zeros(1, 1), &u, &flags, &params, (1.0, 1.0), (1e-3, 0.999)).unwrap();
        assert!((upd.alpha[0] - a_star).abs() < 1e-7);
    }

    #[test]
    fn reflection_lp_symmetric_tags() {
        let g = |x: f64, y: f64| CVec::from_vec(vec![c(x, 0.0), c(y, 0.0)]);
        let ch = ChannelSet::from_links(
            g(0.0, 0.0),
            vec![g(1e-2, 0.0), g(0.0, 1e-2)],
            vec![g(1.0, 0.0), g(0.0, 1.0)],
            vec![c(1.0, 0.0); 2],
            vec![0.0; 2],
        )
        .unwrap();
        let mut params = SystemParams::table2(2);
        params.sigma2 = 1e-8;
        let flags = SchemeFlags { user_sinr: false, tag_sinr: false, ..SchemeFlags::for_scheme(Scheme::SensingOnly) };
        let w = g(300.0, 300.0);
        let u = mf_receivers(&ch).unwrap();
        let upd = solve_reflection_lp(&ch, &w, &CMat::zeros(2, 2), &u, &flags, &params, (1.0, 1.0), (1e-3, 0.999)).unwrap();
        assert!((upd.alpha[0] - upd.alpha[1]).abs() < 1e-6, "{:?}", upd.alpha);
    }

    #[test]
    fn com_only_is_matched_filter() {
        let ch = table2(6, 3, 3).without_tags();
        let mut params = SystemParams::table2(0);
        params.thresholds = Thresholds::from_rates(1.0, 1.0, 1.0, 0);
        let cfg = SchemeConfig::new(Scheme::CommOnly);
        let (sol, trace) = ao_solve(&ch, &cfg, &params, &quick(), &mut stream_rng(0, 1)).unwrap();
        let expect = params.thresholds.gamma_u * params.sigma2 / ch.f.norm_squared();
        assert!((sol.transmit_power() / expect - 1.0).abs() < 1e-6);
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.status, AoStatus::Converged);
        assert!((sol.w.dotc(&ch.f).norm() / (sol.w.norm() * ch.f.norm()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn table2_run_is_monotone_and_feasible() {
        let params = SystemParams::table2(3);
        for seed in 0..3 {
            let ch = table2(8, 3, seed);
            let cfg = SchemeConfig::new(Scheme::IsabcPassive);
            let (sol, trace) = ao_solve(&ch, &cfg, &params, &quick(), &mut stream_rng(seed, 1)).unwrap();
            assert_eq!(trace.monotonicity_violations, 0, "{:?}", trace.objective_per_iter);
            assert!(verify_solution(&ch, &sol, &cfg, &params, 1e-6));
            sol.validate().unwrap();
        }
    }
}
