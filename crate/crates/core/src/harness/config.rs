//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::ao::AoConfig;
use crate::benchmarks::Scheme;
use crate::error::{Error, Result};
use crate::impairments::ImpairmentSpec;
use crate::metrics::{dbm_to_watt, noise_power, EhModel, EhParams, NoiseSpec, SystemParams, Thresholds};

/// The dimension an experiment varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Antennas,
    Tags,
    UserThreshold,
    CsiEta,
    ResidualSi,
    RicianKappa,
    Convergence,
    Beampattern,
    Runtime,
}

impl Sweep {
    pub const ALL: [Sweep; 9] = [
        Sweep::Antennas,
        Sweep::Tags,
        Sweep::UserThreshold,
        Sweep::CsiEta,
        Sweep::ResidualSi,
        Sweep::RicianKappa,
        Sweep::Convergence,
        Sweep::Beampattern,
        Sweep::Runtime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Antennas => "antennas",
            Sweep::Tags => "tags",
            Sweep::UserThreshold => "user-threshold",
            Sweep::CsiEta => "csi-eta",
            Sweep::ResidualSi => "residual-si",
            Sweep::RicianKappa => "rician-kappa",
            Sweep::Convergence => "convergence",
            Sweep::Beampattern => "beampattern",
            Sweep::Runtime => "runtime",
        }
    }

    fn check_value(self, v: f64) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{} sweep value {v}: {what}", self.name())));
        let is_count = v >= 1.0 && v.fract() == 0.0;
        match self {
            Sweep::Antennas | Sweep::Tags | Sweep::Runtime if !is_count => bad("expected a positive integer"),
            Sweep::Beampattern if !(v >= 0.0 && v.fract() == 0.0) => bad("expected a trial index"),
            Sweep::UserThreshold | Sweep::CsiEta | Sweep::RicianKappa if !(v >= 0.0) => bad("expected a non-negative number"),
            Sweep::ResidualSi if !(0.0..=1.0).contains(&v) => bad("expected a value in [0, 1]"),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sweep::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep '{s}'")))
    }
}

/// Everything one experiment needs. Physical defaults follow the reference
/// setup; run-size defaults are desk scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub fc_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub gamma_u_bpshz: f64,
    pub gamma_t_bpshz: f64,
    pub upsilon_bpshz: f64,
    pub pb_dbm: f64,
    pub m_nl_w: f64,
    pub a_nl: f64,
    pub b_nl: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub schemes: Vec<Scheme>,
    pub sweep: Sweep,
    /// Empty means a single cell at the configured value.
    pub sweep_values: Vec<f64>,
    pub out_dir: PathBuf,
    pub csi_eta: f64,
    pub lambda_si: f64,
    pub rician_kappa: Option<f64>,
    pub randomization_trials: usize,
    pub final_randomization_trials: usize,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fc_hz: 3.0e9,
            bandwidth_hz: 10e6,
            noise_figure_db: 10.0,
            m: 8,
            n: 8,
            k: 3,
            gamma_u_bpshz: 1.0,
            gamma_t_bpshz: 1.0,
            upsilon_bpshz: 1.0,
            pb_dbm: -20.0,
            m_nl_w: 20e-3,
            a_nl: 6400.0,
            b_nl: 0.003,
            trials: 100,
            base_seed: 0,
            schemes: vec![Scheme::IsabcPassive],
            sweep: Sweep::Antennas,
            sweep_values: Vec::new(),
            out_dir: PathBuf::from("out"),
            csi_eta: 0.0,
            lambda_si: 0.0,
            rician_kappa: None,
            randomization_trials: 1000,
            final_randomization_trials: 0,
            epsilon: 1e-3,
            max_iter: 20,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const KEYS: [&str; 26] = [
    "fc_hz",
    "bandwidth_hz",
    "noise_figure_db",
    "m",
    "n",
    "k",
    "gamma_u_bpshz",
    "gamma_t_bpshz",
    "upsilon_bpshz",
    "pb_dbm",
    "m_nl_w",
    "a_nl",
    "b_nl",
    "trials",
    "base_seed",
    "scheme",
    "sweep",
    "sweep_values",
    "out_dir",
    "csi_eta",
    "lambda_si",
    "rician_kappa",
    "randomization_trials",
    "final_randomization_trials",
    "epsilon",
    "max_iter",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

/// Comma-separated numbers; an empty string gives an empty list.
pub fn parse_values(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

/// Comma-separated scheme names, or `all`.
pub fn parse_schemes(v: &str) -> Result<Vec<Scheme>> {
    if v.trim() == "all" {
        return Ok(Scheme::ALL.to_vec());
    }
    let out: Vec<Scheme> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("unknown scheme '{s}'"))))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config("scheme list is empty".into()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Parses a config file body. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "fc_hz" => self.fc_hz = num(key, v)?,
            "bandwidth_hz" => self.bandwidth_hz = num(key, v)?,
            "noise_figure_db" => self.noise_figure_db = num(key, v)?,
            "m" => self.m = num(key, v)?,
            "n" => self.n = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "gamma_u_bpshz" => self.gamma_u_bpshz = num(key, v)?,
            "gamma_t_bpshz" => self.gamma_t_bpshz = num(key, v)?,
            "upsilon_bpshz" => self.upsilon_bpshz = num(key, v)?,
            "pb_dbm" => self.pb_dbm = num(key, v)?,
            "m_nl_w" => self.m_nl_w = num(key, v)?,
            "a_nl" => self.a_nl = num(key, v)?,
            "b_nl" => self.b_nl = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "base_seed" => self.base_seed = num(key, v)?,
            "scheme" => self.schemes = parse_schemes(v)?,
            "sweep" => self.sweep = v.parse()?,
            "sweep_values" => self.sweep_values = parse_values(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "csi_eta" => self.csi_eta = num(key, v)?,
            "lambda_si" => self.lambda_si = num(key, v)?,
            "rician_kappa" => {
                self.rician_kappa = match v {
                    "" | "none" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "randomization_trials" => self.randomization_trials = num(key, v)?,
            "final_randomization_trials" => self.final_randomization_trials = num(key, v)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "max_iter" => self.max_iter = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Full-size runs: 1000 trials and a final randomization pass of 10^5.
    pub fn paper_scale(&mut self) {
        self.trials = 1000;
        self.final_randomization_trials = 100_000;
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.m < 1 || self.n < 1 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no scheme selected".into()));
        }
        if !(self.fc_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::Config("carrier and bandwidth must be positive".into()));
        }
        for v in &self.sweep_values {
            self.sweep.check_value(*v)?;
        }
        self.impairments().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.params().eh.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.ao_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// The configured value along the sweep dimension.
    pub fn base_value(&self) -> f64 {
        match self.sweep {
            Sweep::Antennas => self.m as f64,
            Sweep::Tags | Sweep::Runtime | Sweep::Convergence => self.k as f64,
            Sweep::UserThreshold => self.gamma_u_bpshz,
            Sweep::CsiEta => self.csi_eta,
            Sweep::ResidualSi => self.lambda_si,
            Sweep::RicianKappa => self.rician_kappa.unwrap_or(0.0),
            Sweep::Beampattern => 0.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.sweep_values.is_empty() {
            vec![self.base_value()]
        } else {
            self.sweep_values.clone()
        }
    }

    /// The config of one sweep cell.
    pub fn cell(&self, value: f64) -> Self {
        let mut c = self.clone();
        match self.sweep {
            Sweep::Antennas => {
                c.m = value as usize;
                c.n = value as usize;
            }
            Sweep::Tags | Sweep::Runtime => c.k = value as usize,
            Sweep::UserThreshold => c.gamma_u_bpshz = value,
            Sweep::CsiEta => c.csi_eta = value,
            Sweep::ResidualSi => c.lambda_si = value,
            Sweep::RicianKappa => c.rician_kappa = Some(value),
            Sweep::Convergence | Sweep::Beampattern => {}
        }
        c
    }

    pub fn params(&self) -> SystemParams {
        let noise = NoiseSpec { bandwidth_hz: self.bandwidth_hz, noise_figure_db: self.noise_figure_db, ..NoiseSpec::default() };
        let mut thresholds =
            Thresholds::from_rates(self.gamma_u_bpshz, self.gamma_t_bpshz, self.upsilon_bpshz, self.k);
        thresholds.lambda_si = self.lambda_si;
        SystemParams {
            sigma2: noise_power(&noise),
            thresholds,
            eh: EhParams {
                m_nl: self.m_nl_w,
                a_nl: self.a_nl,
                b_nl: self.b_nl,
                p_b: dbm_to_watt(self.pb_dbm),
                eta_linear: 1.0,
                model: EhModel::Nonlinear,
            },
        }
    }

    pub fn impairments(&self) -> ImpairmentSpec {
        ImpairmentSpec { csi_eta: self.csi_eta, residual_si_lambda: self.lambda_si, rician_kappa: self.rician_kappa }
    }

    pub fn ao_config(&self) -> AoConfig {
        AoConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            randomization_trials: self.randomization_trials,
            final_randomization_trials: self.final_randomization_trials,
            ..AoConfig::default()
        }
    }

    /// Renders the config in the file format; `parse(render())` is the identity.
    pub fn render(&self) -> String {
        let schemes: Vec<&str> = self.schemes.iter().map(|s| s.name()).collect();
        let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
        let kappa = self.rician_kappa.map_or("none".to_string(), |k| k.to_string());
        [
            ("fc_hz", self.fc_hz.to_string()),
            ("bandwidth_hz", self.bandwidth_hz.to_string()),
            ("noise_figure_db", self.noise_figure_db.to_string()),
            ("m", self.m.to_string()),
            ("n", self.n.to_string()),
            ("k", self.k.to_string()),
            ("gamma_u_bpshz", self.gamma_u_bpshz.to_string()),
            ("gamma_t_bpshz", self.gamma_t_bpshz.to_string()),
            ("upsilon_bpshz", self.upsilon_bpshz.to_string()),
            ("pb_dbm", self.pb_dbm.to_string()),
            ("m_nl_w", self.m_nl_w.to_string()),
            ("a_nl", self.a_nl.to_string()),
            ("b_nl", self.b_nl.to_string()),
            ("trials", self.trials.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("scheme", schemes.join(",")),
            ("sweep", self.sweep.name().to_string()),
            ("sweep_values", values.join(",")),
            ("out_dir", self.out_dir.display().to_string()),
            ("csi_eta", self.csi_eta.to_string()),
            ("lambda_si", self.lambda_si.to_string()),
            ("rician_kappa", kappa),
            ("randomization_trials", self.randomization_trials.to_string()),
            ("final_randomization_trials", self.final_randomization_trials.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("max_iter", self.max_iter.to_string()),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_with_comments() {
        let cfg = ExperimentConfig::parse("# header\nm = 10\nn=10 # trailing\n\nscheme = isabc-a, isac\nsweep = tags\nsweep_values = 3,6,9\n").unwrap();
        assert_eq!((cfg.m, cfg.n), (10, 10));
        assert_eq!(cfg.schemes, vec![Scheme::IsabcActive, Scheme::Isac]);
        assert_eq!(cfg.sweep, Sweep::Tags);
        assert_eq!(cfg.values(), vec![3.0, 6.0, 9.0]);
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = ExperimentConfig { rician_kappa: Some(10.0), sweep_values: vec![0.0, 0.5], ..Default::default() };
        cfg.schemes = Scheme::ALL.to_vec();
        cfg.sweep = Sweep::CsiEta;
        assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("m").is_err());
        assert!(ExperimentConfig::parse("m = eight").is_err());
        assert!(ExperimentConfig::parse("trials = 0").is_err());
        assert!(ExperimentConfig::parse("scheme = isabc").is_err());
        assert!(ExperimentConfig::parse("sweep = tags\nsweep_values = 2.5").is_err());
        assert!(ExperimentConfig::parse("sweep = residual-si\nsweep_values = 2").is_err());
        assert!(ExperimentConfig::parse("pb_dbm = 20").is_err());
    }

    #[test]
    fn cells_apply_the_sweep() {
        let cfg = ExperimentConfig { sweep: Sweep::Antennas, ..Default::default() };
        let c = cfg.cell(20.0);
        assert_eq!((c.m, c.n, c.k), (20, 20, 3));
        let cfg = ExperimentConfig { sweep: Sweep::ResidualSi, ..Default::default() };
        assert_eq!(cfg.cell(1e-9).lambda_si, 1e-9);
        assert_eq!(cfg.values(), vec![0.0]);
    }

    #[test]
    fn table2_params() {
        let p = ExperimentConfig::default().params();
        assert_eq!(p, SystemParams::table2(3));
    }
}
