//! SINRs, incident and harvested power, rates and unit conversions.
//!
//! `sigma2` is always the per-antenna noise power in watts.

use nalgebra::SymmetricEigen;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::linalg::{complex_normal, outer, quad_form, trace_re, CMat, CVec};
use crate::{Error, Result};

/// Transmit beamformer, sensing covariance, receive filters and reflection
/// coefficients of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub w: CVec,
    pub s: CMat,
    pub u: Vec<CVec>,
    pub alpha: Vec<f64>,
}

impl BeamformingSolution {
    /// Transmit covariance `w w^H + S`.
    pub fn covariance(&self) -> CMat {
        outer(&self.w) + &self.s
    }

    /// `||w||^2 + Tr(S)` in watts.
    pub fn transmit_power(&self) -> f64 {
        self.w.norm_squared() + trace_re(&self.s)
    }

    /// Scales the transmit power by `factor` (w by its square root).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            w: self.w.scale(factor.sqrt()),
            s: self.s.scale(factor),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.w.len();
        if self.s.shape() != (m, m) {
            return Err(Error::Dimension(format!("S is {:?}, expected {m}x{m}", self.s.shape())));
        }
        if self.u.len() != self.alpha.len() {
            return Err(Error::Dimension("one receive filter per reflection coefficient".into()));
        }
        let tr = trace_re(&self.s).max(0.0);
        let defect = crate::linalg::hermitian_defect(&self.s);
        if tr > 0.0 && defect > 1e-9 {
            return Err(Error::NotHermitian(defect));
        }
        if tr > 0.0 {
            let min_eig = SymmetricEigen::new(crate::linalg::hermitian_part(&self.s))
                .eigenvalues
                .min();
            if min_eig < -1e-9 * tr {
                return Err(Error::Domain(format!("S is not PSD (min eigenvalue {min_eig:.3e})")));
            }
        }
        for (k, u) in self.u.iter().enumerate() {
            if (u.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("receive filter {k} is not unit norm")));
            }
        }
        // Fixed full reflection (alpha = 1) is how conventional radar targets are modelled.
        if self.alpha.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::Domain("reflection coefficients must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhModel {
    Nonlinear,
    Linear,
}

/// Energy-harvesting circuit parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhParams {
    /// Saturation power `M_NL` (W).
    pub m_nl: f64,
    pub a_nl: f64,
    /// Logistic midpoint `b_NL` (W).
    pub b_nl: f64,
    /// Activation threshold (W).
    pub p_b: f64,
    pub eta_linear: f64,
    pub model: EhModel,
}

impl Default for EhParams {
    fn default() -> Self {
        Self { m_nl: 20e-3, a_nl: 6400.0, b_nl: 0.003, p_b: dbm_to_watt(-20.0), eta_linear: 1.0, model: EhModel::Nonlinear }
    }
}

impl EhParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_b > 0.0 && self.p_b < self.m_nl) {
            return Err(Error::Domain("activation threshold must lie in (0, M_NL)".into()));
        }
        if !(self.a_nl > 0.0 && self.b_nl > 0.0) {
            return Err(Error::Domain("logistic constants must be positive".into()));
        }
        if !(self.eta_linear > 0.0 && self.eta_linear <= 1.0) {
            return Err(Error::Domain("conversion efficiency must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Zero-input offset of the logistic curve.
    pub fn omega(&self) -> f64 {
        1.0 / (1.0 + (self.a_nl * self.b_nl).exp())
    }

    /// Standard logistic `psi(p)` before the zero-offset correction.
    pub fn logistic(&self, p: f64) -> f64 {
        self.m_nl * (1.0 / (1.0 + (-self.a_nl * (p - self.b_nl)).exp()))
    }

    /// Minimum split-off input power that activates the tag.
    pub fn activation_input(&self) -> Result<f64> {
        eh_inverse(self.p_b, self)
    }
}

/// Harvested power for a split-off input power.
pub fn eh_forward(p: f64, params: &EhParams) -> f64 {
    match params.model {
        EhModel::Linear => params.eta_linear * p,
        EhModel::Nonlinear => {
            let omega = params.omega();
            (params.logistic(p) - params.m_nl * omega) / (1.0 - omega)
        }
    }
}

/// Required input for a target harvested power. The nonlinear branch is the
/// inverse of the plain logistic, as used in the activation constraint.
pub fn eh_inverse(p_target: f64, params: &EhParams) -> Result<f64> {
    match params.model {
        EhModel::Linear => {
            if !(p_target > 0.0) {
                return Err(Error::Domain("target harvested power must be positive".into()));
            }
            Ok(p_target / params.eta_linear)
        }
        EhModel::Nonlinear => {
            if !(p_target > 0.0 && p_target < params.m_nl) {
                return Err(Error::Domain(format!(
                    "target {p_target:.3e} W outside (0, M_NL = {:.3e} W)",
                    params.m_nl
                )));
            }
            Ok(params.b_nl - ((params.m_nl - p_target) / p_target).ln() / params.a_nl)
        }
    }
}

/// Receiver bandwidth, noise figure and thermal noise density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub n0_dbm_per_hz: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { bandwidth_hz: 10e6, noise_figure_db: 10.0, n0_dbm_per_hz: -174.0 }
    }
}

pub fn noise_power_dbm(spec: &NoiseSpec) -> f64 {
    spec.n0_dbm_per_hz + 10.0 * spec.bandwidth_hz.log10() + spec.noise_figure_db
}

pub fn noise_power(spec: &NoiseSpec) -> f64 {
    dbm_to_watt(noise_power_dbm(spec))
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> Result<f64> {
    if !(watt > 0.0) {
        return Err(Error::Domain(format!("power must be positive to express in dBm, got {watt}")));
    }
    Ok(10.0 * watt.log10() + 30.0)
}

/// Shannon mapping of a rate target (bps/Hz) to a linear SINR threshold.
pub fn rate_to_sinr(rate: f64) -> f64 {
    2f64.powf(rate) - 1.0
}

pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr.max(0.0)).log2()
}

/// Linear SINR thresholds and the residual self-interference coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub gamma_u: f64,
    pub gamma_t: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub lambda_si: f64,
}

impl Thresholds {
    /// Every threshold from a common rate target in bps/Hz.
    pub fn from_rates(user_bps: f64, tag_bps: f64, sensing_bps: f64, num_tags: usize) -> Self {
        Self {
            gamma_u: rate_to_sinr(user_bps),
            gamma_t: vec![rate_to_sinr(tag_bps); num_tags],
            upsilon: vec![rate_to_sinr(sensing_bps); num_tags],
            lambda_si: 0.0,
        }
    }

    pub fn validate(&self, num_tags: usize) -> Result<()> {
        if self.gamma_t.len() != num_tags || self.upsilon.len() != num_tags {
            return Err(Error::Dimension(format!("thresholds sized for {} tags, channel has {num_tags}", self.gamma_t.len())));
        }
        if !(0.0..=1.0).contains(&self.lambda_si) {
            return Err(Error::Domain("residual SI coefficient must lie in [0, 1]".into()));
        }
        if self.gamma_u < 0.0 || self.gamma_t.iter().chain(&self.upsilon).any(|&g| g < 0.0) {
            return Err(Error::Domain("SINR thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything the optimizer needs besides channels and the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub sigma2: f64,
    pub thresholds: Thresholds,
    pub eh: EhParams,
}

impl SystemParams {
    /// Reference-scenario values for `num_tags` tags.
    pub fn table2(num_tags: usize) -> Self {
        Self {
            sigma2: noise_power(&NoiseSpec::default()),
            thresholds: Thresholds::from_rates(1.0, 1.0, 1.0, num_tags),
            eh: EhParams::default(),
        }
    }
}

/// Power tag `i` reflects toward the user, `|h_i^H w|^2 + h_i^H S h_i`.
pub fn reflected_power(ch: &ChannelSet, sol: &BeamformingSolution, i: usize) -> f64 {
    ch.h[i].dotc(&sol.w).norm_sqr() + quad_form(&sol.s, &ch.h[i])
}

pub fn user_sinr(ch: &ChannelSet, sol: &BeamformingSolution, sigma2: f64) -> f64 {
    let signal = ch.f.dotc(&sol.w).norm_sqr();
    let interference: f64 = (0..sol.alpha.len()).map(|k| sol.alpha[k] * reflected_power(ch, sol, k)).sum();
    signal / (interference + sigma2)
}

pub fn tag_sinr(ch: &ChannelSet, sol: &BeamformingSolution, k: usize, sigma2: f64) -> f64 {
    let signal = sol.alpha[k] * reflected_power(ch, sol, k);
    let interference: f64 = (0..sol.alpha.len())
        .filter(|&i| i != k)
        .map(|i| sol.alpha[i] * reflected_power(ch, sol, i))
        .sum();
    signal / (interference + sigma2)
}

/// `u^H G_i R_x G_i^H u`, exploiting the rank-one structure of `G_i`.
fn echo_power(ch: &ChannelSet, r_x: &CMat, u: &CVec, i: usize) -> f64 {
    u.dotc(&ch.g_b[i]).norm_sqr() * quad_form(r_x, &ch.g_f[i])
}

/// Sensing SINR of tag `k` at the BS with residual self-interference
/// `lambda_si |f^H w|^2` in the denominator.
pub fn sensing_sinr(ch: &ChannelSet, sol: &BeamformingSolution, k: usize, sigma2: f64, lambda_si: f64) -> f64 {
    let r_x = sol.covariance();
    let u = &sol.u[k];
    let signal = sol.alpha[k] * echo_power(ch, &r_x, u, k);
    let interference: f64 = (0..sol.alpha.len())
        .filter(|&i| i != k)
        .map(|i| sol.alpha[i] * echo_power(ch, &r_x, u, i))
        .sum();
    let si = lambda_si * ch.f.dotc(&sol.w).norm_sqr();
    signal / (interference + sigma2 * u.norm_squared() + si)
}

/// RF power incident on tag `k`.
pub fn incident_power(ch: &ChannelSet, sol: &BeamformingSolution, k: usize) -> f64 {
    ch.g_f[k].dotc(&sol.w).norm_sqr() + quad_form(&sol.s, &ch.g_f[k])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub user_rate: f64,
    pub tag_rates: Vec<f64>,
    pub sensing_rates: Vec<f64>,
    pub sum_rate: f64,
}

impl RateSummary {
    pub fn sum_tag_rate(&self) -> f64 {
        self.tag_rates.iter().sum()
    }

    pub fn sum_sensing_rate(&self) -> f64 {
        self.sensing_rates.iter().sum()
    }
}

pub fn rate_summary(ch: &ChannelSet, sol: &BeamformingSolution, sigma2: f64, lambda_si: f64) -> RateSummary {
    let k = sol.alpha.len();
    let user_rate = rate(user_sinr(ch, sol, sigma2));
    let tag_rates: Vec<f64> = (0..k).map(|i| rate(tag_sinr(ch, sol, i, sigma2))).collect();
    let sensing_rates: Vec<f64> = (0..k).map(|i| rate(sensing_sinr(ch, sol, i, sigma2, lambda_si))).collect();
    let sum_rate = user_rate + tag_rates.iter().sum::<f64>() + sensing_rates.iter().sum::<f64>();
    RateSummary { user_rate, tag_rates, sensing_rates, sum_rate }
}

/// Ratio-of-means estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Default)]
struct RatioAcc {
    n: f64,
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

impl RatioAcc {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }

    fn finish(&self) -> Estimate {
        let ma = self.sa / self.n;
        let mb = self.sb / self.n;
        let r = ma / mb;
        let var_a = self.saa / self.n - ma * ma;
        let var_b = self.sbb / self.n - mb * mb;
        let cov = self.sab / self.n - ma * mb;
        let var_r = (var_a - 2.0 * r * cov + r * r * var_b).max(0.0) / (mb * mb * self.n);
        Estimate { value: r, std_err: var_r.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSinr {
    pub user: Estimate,
    pub tag: Vec<Estimate>,
    pub sensing: Vec<Estimate>,
}

/// Square root factor `L` with `L L^H = S` for a PSD `S`.
fn psd_sqrt(s: &CMat) -> CMat {
    let eig = SymmetricEigen::new(crate::linalg::hermitian_part(s));
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let root = lam.max(0.0).sqrt();
        for i in 0..l.nrows() {
            l[(i, j)] *= root;
        }
    }
    l
}

/// Sample-level SINR estimates from the received-signal models.
///
/// Draws Gaussian data symbols, tag symbols, sensing waveforms and noise,
/// forms the user signal after sensing-waveform removal, the post-SIC tag
/// signal and the filtered BS echoes, and returns averaged signal over
/// interference-plus-noise power ratios.
pub fn empirical_sinr<R: Rng + ?Sized>(
    ch: &ChannelSet,
    sol: &BeamformingSolution,
    sigma2: f64,
    lambda_si: f64,
    n_samples: usize,
    rng: &mut R,
) -> EmpiricalSinr {
    let k_tags = sol.alpha.len();
    let m = sol.w.len();
    let l = psd_sqrt(&sol.s);
    let sqrt_alpha: Vec<f64> = sol.alpha.iter().map(|a| a.sqrt()).collect();
    let fw = ch.f.dotc(&sol.w);
    let noise = sigma2.sqrt();

    // Channel projections independent of the sample: h_k^H w, h_k^H L, u_k^H g_b,i, g_f,i^H w, g_f,i^H L.
    let hw: Vec<_> = ch.h.iter().map(|h| h.dotc(&sol.w)).collect();
    let hl: Vec<_> = ch.h.iter().map(|h| h.adjoint() * &l).collect();
    let gw: Vec<_> = ch.g_f.iter().map(|g| g.dotc(&sol.w)).collect();
    let gl: Vec<_> = ch.g_f.iter().map(|g| g.adjoint() * &l).collect();
    let ug: Vec<Vec<_>> = sol.u.iter().map(|u| ch.g_b.iter().map(|g| u.dotc(g)).collect()).collect();

    let mut user = RatioAcc::default();
    let mut tag: Vec<RatioAcc> = (0..k_tags).map(|_| RatioAcc::default()).collect();
    let mut sens: Vec<RatioAcc> = (0..k_tags).map(|_| RatioAcc::default()).collect();

    let mut cs = vec![num_complex::Complex64::default(); k_tags];
    let mut refl_user = vec![num_complex::Complex64::default(); k_tags];
    let mut refl_bs = vec![num_complex::Complex64::default(); k_tags];
    let mut z = CVec::zeros(m);
    let mut zb = CVec::zeros(ch.num_rx());

    for _ in 0..n_samples {
        let xd = complex_normal(rng);
        for zi in z.iter_mut() {
            *zi = complex_normal(rng);
        }
        for c in cs.iter_mut() {
            *c = complex_normal(rng);
        }
        let zu = complex_normal(rng) * noise;
        for zk in zb.iter_mut() {
            *zk = complex_normal(rng) * noise;
        }
        let si = complex_normal(rng);

        for i in 0..k_tags {
            let hs = (&hl[i] * &z)[0];
            refl_user[i] = (hw[i] * xd + hs) * cs[i] * sqrt_alpha[i];
            let gs = (&gl[i] * &z)[0];
            refl_bs[i] = (gw[i] * xd + gs) * cs[i] * sqrt_alpha[i];
        }

        let backscatter: num_complex::Complex64 = refl_user.iter().sum();
        let desired = fw * xd;
        let rest = backscatter + zu;
        user.push(desired.norm_sqr(), rest.norm_sqr());

        for k in 0..k_tags {
            let own = refl_user[k];
            let others = backscatter - own + zu;
            tag[k].push(own.norm_sqr(), others.norm_sqr());

            let own_echo = ug[k][k] * refl_bs[k];
            let mut other_echo = sol.u[k].dotc(&zb) + si * (lambda_si.sqrt() * fw.norm());
            for i in 0..k_tags {
                if i != k {
                    other_echo += ug[k][i] * refl_bs[i];
                }
            }
            sens[k].push(own_echo.norm_sqr(), other_echo.norm_sqr());
        }
    }

    EmpiricalSinr {
        user: user.finish(),
        tag: tag.iter().map(RatioAcc::finish).collect(),
        sensing: sens.iter().map(RatioAcc::finish).collect(),
    }
}

/// Per-run outcome recorded by the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub power_w: f64,
    pub power_dbm: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub rates: RateSummary,
    pub alpha: Vec<f64>,
    /// Wall time of the receiver, transmit and reflection stages (ms).
    pub stage_ms: [f64; 3],
    pub feasible: bool,
}
