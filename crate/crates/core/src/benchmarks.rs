//! Comparison schemes as constraint/variable configurations of the same
//! alternating optimizer, plus the fixed MF and ZF receivers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::ao::{ao_solve, AoConfig, ConvergenceTrace};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::metrics::{
    eh_forward, incident_power, rate_summary, reflected_power, sensing_sinr, user_sinr, watt_to_dbm, BeamformingSolution,
    MetricsReport, SystemParams, Thresholds,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    IsabcPassive,
    IsabcActive,
    Isac,
    BackCom,
    CommOnly,
    SensingOnly,
    RandomAlpha,
    MfReceiver,
    ZfReceiver,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::IsabcPassive,
        Scheme::IsabcActive,
        Scheme::Isac,
        Scheme::BackCom,
        Scheme::CommOnly,
        Scheme::SensingOnly,
        Scheme::RandomAlpha,
        Scheme::MfReceiver,
        Scheme::ZfReceiver,
    ];

    /// Stable CLI identifier.
    pub fn name(self) -> &'static str {
        match self {
            Scheme::IsabcPassive => "isabc-p",
            Scheme::IsabcActive => "isabc-a",
            Scheme::Isac => "isac",
            Scheme::BackCom => "backcom",
            Scheme::CommOnly => "com-only",
            Scheme::SensingOnly => "sensing-only",
            Scheme::RandomAlpha => "random-alpha",
            Scheme::MfReceiver => "mf",
            Scheme::ZfReceiver => "zf",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Which constraint families and optimization blocks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeFlags {
    pub user_sinr: bool,
    pub tag_sinr: bool,
    pub sensing_sinr: bool,
    pub eh: bool,
    pub optimize_alpha: bool,
    pub optimize_receivers: bool,
    pub sensing_covariance: bool,
}

impl SchemeFlags {
    const ALL_ON: SchemeFlags = SchemeFlags {
        user_sinr: true,
        tag_sinr: true,
        sensing_sinr: true,
        eh: true,
        optimize_alpha: true,
        optimize_receivers: true,
        sensing_covariance: true,
    };

    pub fn for_scheme(scheme: Scheme) -> Self {
        let on = Self::ALL_ON;
        match scheme {
            Scheme::IsabcPassive => on,
            Scheme::IsabcActive => SchemeFlags { eh: false, ..on },
            Scheme::Isac => SchemeFlags { tag_sinr: false, eh: false, optimize_alpha: false, ..on },
            Scheme::BackCom => SchemeFlags { sensing_sinr: false, optimize_receivers: false, sensing_covariance: false, ..on },
            Scheme::CommOnly => SchemeFlags {
                user_sinr: true,
                tag_sinr: false,
                sensing_sinr: false,
                eh: false,
                optimize_alpha: false,
                optimize_receivers: false,
                sensing_covariance: false,
            },
            Scheme::SensingOnly => SchemeFlags { user_sinr: false, tag_sinr: false, ..on },
            Scheme::RandomAlpha => SchemeFlags { optimize_alpha: false, ..on },
            Scheme::MfReceiver | Scheme::ZfReceiver => SchemeFlags { optimize_receivers: false, ..on },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub flags: SchemeFlags,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, flags: SchemeFlags::for_scheme(scheme) }
    }

    /// A scheme with overridden flags; overrides that contradict what defines
    /// the scheme are rejected.
    pub fn with_flags(scheme: Scheme, flags: SchemeFlags) -> Result<Self> {
        let cfg = Self { scheme, flags };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.flags;
        let bad = |msg: &str| Err(Error::Config(format!("{}: {msg}", self.scheme)));
        if !(f.user_sinr || f.sensing_sinr || f.eh) {
            return bad("no constraint family enabled");
        }
        if f.tag_sinr && !f.user_sinr {
            return bad("tag SINR is combined with the user SINR constraint and needs it");
        }
        match self.scheme {
            Scheme::Isac if f.optimize_alpha || f.eh || f.tag_sinr => bad("targets reflect fully and harvest nothing"),
            Scheme::CommOnly if f != SchemeFlags::for_scheme(Scheme::CommOnly) => bad("only the user SINR constraint applies"),
            Scheme::BackCom if f.sensing_sinr || f.sensing_covariance => bad("the BS does not sense"),
            Scheme::RandomAlpha if f.optimize_alpha => bad("reflection coefficients are drawn, not optimized"),
            Scheme::MfReceiver | Scheme::ZfReceiver if f.optimize_receivers => bad("receivers are fixed"),
            _ => Ok(()),
        }
    }

    /// Whether the scheme ignores the tags entirely.
    pub fn drops_tags(&self) -> bool {
        self.scheme == Scheme::CommOnly
    }
}

/// `u_k = g_{b,k} / ||g_{b,k}||`.
pub fn mf_receivers(ch: &ChannelSet) -> Result<Vec<CVec>> {
    ch.g_b
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let n = g.norm();
            if n > 0.0 {
                Ok(g / Complex64::new(n, 0.0))
            } else {
                Err(Error::Domain(format!("backward channel of tag {k} is zero")))
            }
        })
        .collect()
}

/// Normalized columns of `H_b (H_b^H H_b)^{-1}`.
pub fn zf_receivers(ch: &ChannelSet) -> Result<Vec<CVec>> {
    let k = ch.num_tags();
    if k == 0 {
        return Ok(Vec::new());
    }
    let hb = CMat::from_columns(&ch.g_b);
    if k > hb.nrows() {
        return Err(Error::RankDeficient(f64::INFINITY));
    }
    let sv = hb.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond < 1e8) {
        return Err(Error::RankDeficient(cond));
    }
    let gram = hb.adjoint() * &hb;
    let inv = gram.try_inverse().ok_or(Error::RankDeficient(cond))?;
    let z: DMatrix<Complex64> = &hb * inv;
    Ok(z.column_iter().map(|c| c.into_owned() / Complex64::new(c.norm(), 0.0)).collect())
}

/// Re-checks every active constraint family of `cfg` through the metrics
/// module. Each inequality may fall short by at most `tol` relative.
pub fn verify_solution(ch: &ChannelSet, sol: &BeamformingSolution, cfg: &SchemeConfig, params: &SystemParams, tol: f64) -> bool {
    let f = cfg.flags;
    let th = &params.thresholds;
    let s2 = params.sigma2;
    let k = ch.num_tags();
    if f.user_sinr {
        if f.tag_sinr && k > 0 {
            let signal = ch.f.dotc(&sol.w).norm_sqr();
            for j in 0..k {
                let interference: f64 = (0..k).filter(|&i| i != j).map(|i| sol.alpha[i] * reflected_power(ch, sol, i)).sum();
                let need = th.gamma_u * (1.0 + th.gamma_t[j]) * (interference + s2);
                if signal < need * (1.0 - tol) {
                    return false;
                }
            }
        } else if user_sinr(ch, sol, s2) < th.gamma_u * (1.0 - tol) {
            return false;
        }
    }
    if f.sensing_sinr {
        for j in 0..k {
            if sensing_sinr(ch, sol, j, s2, th.lambda_si) < th.upsilon[j] * (1.0 - tol) {
                return false;
            }
        }
    }
    if f.eh {
        for j in 0..k {
            let harvested_in = (1.0 - sol.alpha[j]) * incident_power(ch, sol, j) * (1.0 + tol);
            if eh_forward(harvested_in, &params.eh) < params.eh.p_b {
                return false;
            }
        }
    }
    true
}

/// Relative shortfall allowed by [`verify_solution`] after optimization.
pub const VERIFY_TOL: f64 = 1e-6;

/// Runs one scheme end to end and summarizes the outcome.
pub fn run_scheme<R: Rng + ?Sized>(
    cfg: &SchemeConfig,
    ch: &ChannelSet,
    params: &SystemParams,
    ao_cfg: &AoConfig,
    rng: &mut R,
) -> Result<(BeamformingSolution, ConvergenceTrace, MetricsReport)> {
    cfg.validate()?;
    let (ch, params) = if cfg.drops_tags() {
        let th = Thresholds { gamma_t: Vec::new(), upsilon: Vec::new(), ..params.thresholds.clone() };
        (ch.without_tags(), SystemParams { thresholds: th, ..params.clone() })
    } else {
        (ch.clone(), params.clone())
    };
    let (sol, trace) = ao_solve(&ch, cfg, &params, ao_cfg, rng)?;
    let power = sol.transmit_power();
    let report = MetricsReport {
        power_w: power,
        power_dbm: watt_to_dbm(power).unwrap_or(f64::NEG_INFINITY),
        objective_trace: trace.objective_per_iter.clone(),
        iterations: trace.iterations,
        converged: trace.status == crate::ao::AoStatus::Converged,
        rates: rate_summary(&ch, &sol, params.sigma2, params.thresholds.lambda_si),
        alpha: sol.alpha.clone(),
        stage_ms: trace.stage_ms,
        feasible: trace.status != crate::ao::AoStatus::SubproblemInfeasible && verify_solution(&ch, &sol, cfg, &params, VERIFY_TOL),
    };
    Ok((sol, trace, report))
}
