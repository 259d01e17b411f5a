//! CSI error, residual self-interference and Rician presets, and the power
//! restoration step for designs computed on estimated channels.

use rand::Rng;

use crate::ao::AoConfig;
use crate::benchmarks::{run_scheme, verify_solution, SchemeConfig, VERIFY_TOL};
use crate::channel::{apply_csi_error, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::{BeamformingSolution, MetricsReport, SystemParams};

/// Residual self-interference levels for -80, -90 and -110 dB and perfect cancellation.
pub const LAMBDA_PRESETS: [f64; 4] = [1e-8, 1e-9, 1e-11, 0.0];

/// Largest power restoration factor tried before declaring an outage.
pub const MAX_RESTORE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentSpec {
    pub csi_eta: f64,
    pub residual_si_lambda: f64,
    pub rician_kappa: Option<f64>,
}

impl ImpairmentSpec {
    pub const PERFECT: ImpairmentSpec = ImpairmentSpec { csi_eta: 0.0, residual_si_lambda: 0.0, rician_kappa: None };

    pub fn validate(&self) -> Result<()> {
        if !(self.csi_eta >= 0.0) {
            return Err(Error::Domain(format!("CSI error coefficient must be non-negative, got {}", self.csi_eta)));
        }
        if !(0.0..=1.0).contains(&self.residual_si_lambda) {
            return Err(Error::Domain(format!("residual SI must lie in [0, 1], got {}", self.residual_si_lambda)));
        }
        if let Some(k) = self.rician_kappa {
            if !(k >= 0.0) {
                return Err(Error::Domain(format!("Rician factor must be non-negative, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ImpairedOutcome {
    /// The restored solution, already scaled by `rho`.
    pub solution: BeamformingSolution,
    /// Report of the run on the estimated channels.
    pub nominal: MetricsReport,
    pub rho: f64,
    pub reported_power: f64,
}

/// Outcome of one impaired trial; `Outage` when no design restores feasibility.
#[derive(Debug, Clone)]
pub enum Impaired {
    Served(Box<ImpairedOutcome>),
    Outage(String),
}

/// Smallest `rho` in `[1, MAX_RESTORE]` making `sol.scaled(rho)` feasible on
/// `ch_true`, bisected to `1e-4` relative.
pub fn restore_factor(ch_true: &ChannelSet, sol: &BeamformingSolution, scheme: &SchemeConfig, params: &SystemParams) -> Option<f64> {
    let ok = |rho: f64| verify_solution(ch_true, &sol.scaled(rho), scheme, params, VERIFY_TOL);
    if ok(1.0) {
        return Some(1.0);
    }
    if !ok(MAX_RESTORE) {
        return None;
    }
    let (mut lo, mut hi) = (1.0, MAX_RESTORE);
    while hi / lo - 1.0 > 1e-4 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Optimizes on estimated channels, then restores feasibility on the true
/// ones by a common power scaling. The CSI error is drawn first from `rng`,
/// even for `eta = 0`, so every scheme sees the same estimate.
pub fn optimize_with_impairments<R: Rng + ?Sized>(
    ch_true: &ChannelSet,
    spec: &ImpairmentSpec,
    scheme: &SchemeConfig,
    params: &SystemParams,
    ao_cfg: &AoConfig,
    rng: &mut R,
) -> Result<Impaired> {
    spec.validate()?;
    let ch_est = apply_csi_error(ch_true, spec.csi_eta, rng)?;
    let mut params = params.clone();
    params.thresholds.lambda_si = spec.residual_si_lambda;
    let (sol, _, nominal) = match run_scheme(scheme, &ch_est, &params, ao_cfg, rng) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => return Ok(Impaired::Outage(msg)),
        Err(e) => return Err(e),
    };
    let (ch_check, params_check) = if scheme.drops_tags() {
        let mut p = params.clone();
        p.thresholds.gamma_t.clear();
        p.thresholds.upsilon.clear();
        (ch_true.without_tags(), p)
    } else {
        (ch_true.clone(), params.clone())
    };
    match restore_factor(&ch_check, &sol, scheme, &params_check) {
        Some(rho) => {
            let solution = sol.scaled(rho);
            let reported_power = solution.transmit_power();
            Ok(Impaired::Served(Box::new(ImpairedOutcome { solution, nominal, rho, reported_power })))
        }
        None => Ok(Impaired::Outage(format!("no restoration factor up to {MAX_RESTORE}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Scheme;
    use crate::channel::{build_channel_set, stream_rng, FadingSpec, Scenario};

    fn table2(seed: u64) -> ChannelSet {
        let mut rng = stream_rng(seed, 0);
        let sc = Scenario::table2(8, 8, 3, &mut rng).unwrap();
        build_channel_set(&sc, FadingSpec::RAYLEIGH, &mut rng).unwrap()
    }

    fn quick() -> AoConfig {
        AoConfig { randomization_trials: 100, final_randomization_trials: 0, ..AoConfig::default() }
    }

    #[test]
    fn spec_validation() {
        assert!(ImpairmentSpec { csi_eta: -1.0, ..ImpairmentSpec::PERFECT }.validate().is_err());
        assert!(ImpairmentSpec { residual_si_lambda: 2.0, ..ImpairmentSpec::PERFECT }.validate().is_err());
        assert!(ImpairmentSpec { rician_kappa: Some(-1.0), ..ImpairmentSpec::PERFECT }.validate().is_err());
        ImpairmentSpec::PERFECT.validate().unwrap();
    }

    #[test]
    fn perfect_csi_needs_no_restoration() {
        let ch = table2(1);
        let params = SystemParams::table2(3);
        let cfg = SchemeConfig::new(Scheme::IsabcActive);
        let out = optimize_with_impairments(&ch, &ImpairmentSpec::PERFECT, &cfg, &params, &quick(), &mut stream_rng(1, 1)).unwrap();
        let Impaired::Served(out) = out else { panic!("outage") };
        assert_eq!(out.rho, 1.0);
        let (_, _, nominal) = run_scheme(&cfg, &ch, &params, &quick(), &mut {
            let mut r = stream_rng(1, 1);
            // same draws as the impaired path
            apply_csi_error(&ch, 0.0, &mut r).unwrap();
            r
        })
        .unwrap();
        assert_eq!(out.reported_power, nominal.power_w);
    }

    #[test]
    fn restoration_is_at_least_one() {
        let params = SystemParams::table2(3);
        for seed in 0..3 {
            let ch = table2(seed);
            let spec = ImpairmentSpec { csi_eta: 0.5, ..ImpairmentSpec::PERFECT };
            let cfg = SchemeConfig::new(Scheme::IsabcActive);
            if let Impaired::Served(out) = optimize_with_impairments(&ch, &spec, &cfg, &params, &quick(), &mut stream_rng(seed, 1)).unwrap() {
                assert!(out.rho >= 1.0);
                assert!(verify_solution(&ch, &out.solution, &cfg, &params, VERIFY_TOL));
            }
        }
    }
}
