//! Seeded Monte Carlo trials, aggregation and CSV output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Sweep};
use crate::beampattern::{joint_beampattern, rx_beampattern, tx_beampattern, write_pattern_csv, AngleGrid};
use crate::benchmarks::{run_scheme, Scheme, SchemeConfig};
use crate::channel::{build_channel_set, stream_rng, trial_seed, ChannelSet, FadingSpec, Scenario};
use crate::error::{Error, Result};
use crate::impairments::{optimize_with_impairments, Impaired};
use crate::metrics::{rate_summary, watt_to_dbm, BeamformingSolution};

pub const RESULTS_HEADER: &str = "trial,seed,scheme,sweep_value,power_w,power_dbm,iters,converged,user_rate,sum_tag_rate,sum_sensing_rate,feasible,stage1_ms,stage2_ms,stage3_ms";
pub const SUMMARY_HEADER: &str = "sweep_value,scheme,trials,feasible,infeasible_frac,mean_power_w,mean_power_dbm,mean_of_dbm,std_dbm,mean_iters,mean_user_rate,mean_sum_tag_rate,mean_sum_sensing_rate,mean_total_ms";

/// Cells with more infeasible trials than this fraction fail the run.
pub const MAX_INFEASIBLE_FRACTION: f64 = 0.5;

/// One row of `results.csv` plus the in-memory extras.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub power_w: f64,
    pub power_dbm: f64,
    pub iters: usize,
    pub converged: bool,
    pub user_rate: f64,
    pub sum_tag_rate: f64,
    pub sum_sensing_rate: f64,
    pub feasible: bool,
    pub stage_ms: [f64; 3],
    pub objective_trace: Vec<f64>,
    pub rho: f64,
    pub solution: Option<BeamformingSolution>,
    pub diagnostic: Option<String>,
}

impl TrialRecord {
    fn failed(trial: usize, seed: u64, scheme: Scheme, sweep_value: f64, why: String) -> Self {
        Self {
            trial,
            seed,
            scheme,
            sweep_value,
            power_w: f64::NAN,
            power_dbm: f64::NAN,
            iters: 0,
            converged: false,
            user_rate: f64::NAN,
            sum_tag_rate: f64::NAN,
            sum_sensing_rate: f64::NAN,
            feasible: false,
            stage_ms: [0.0; 3],
            objective_trace: Vec::new(),
            rho: f64::NAN,
            solution: None,
            diagnostic: Some(why),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3}",
            self.trial,
            self.seed,
            self.scheme,
            self.sweep_value,
            self.power_w,
            self.power_dbm,
            self.iters,
            self.converged,
            self.user_rate,
            self.sum_tag_rate,
            self.sum_sensing_rate,
            self.feasible,
            self.stage_ms[0],
            self.stage_ms[1],
            self.stage_ms[2],
        )
    }
}

/// Channels of one trial, drawn from stream 0 of the trial seed.
pub fn draw_channels(cell: &ExperimentConfig, seed: u64) -> Result<ChannelSet> {
    let mut rng = stream_rng(seed, 0);
    let mut sc = Scenario::table2(cell.m, cell.n, cell.k, &mut rng)?;
    sc.carrier_freq_hz = cell.fc_hz;
    let fading = cell.rician_kappa.map_or(FadingSpec::RAYLEIGH, FadingSpec::rician);
    build_channel_set(&sc, fading, &mut rng)
}

/// Runs one scheme on trial `trial` of a cell. The seed depends only on the
/// base seed and the trial index, so every scheme and sweep value sees
/// matched realizations.
pub fn run_trial(cell: &ExperimentConfig, scheme: Scheme, trial: usize, sweep_value: f64) -> TrialRecord {
    let seed = trial_seed(cell.base_seed, trial as u64);
    match try_trial(cell, scheme, seed) {
        Ok(Ok(mut rec)) => {
            rec.trial = trial;
            rec.sweep_value = sweep_value;
            rec
        }
        Ok(Err(why)) => TrialRecord::failed(trial, seed, scheme, sweep_value, why),
        Err(e) => TrialRecord::failed(trial, seed, scheme, sweep_value, e.to_string()),
    }
}

fn try_trial(cell: &ExperimentConfig, scheme: Scheme, seed: u64) -> Result<std::result::Result<TrialRecord, String>> {
    let ch = draw_channels(cell, seed)?;
    let params = cell.params();
    let sc = SchemeConfig::new(scheme);
    let mut rng = stream_rng(seed, 1);
    let out = match optimize_with_impairments(&ch, &cell.impairments(), &sc, &params, &cell.ao_config(), &mut rng)? {
        Impaired::Served(out) => out,
        Impaired::Outage(why) => return Ok(Err(why)),
    };
    let ch_true = if sc.drops_tags() { ch.without_tags() } else { ch };
    let rates = rate_summary(&ch_true, &out.solution, params.sigma2, cell.lambda_si);
    let nominal = &out.nominal;
    Ok(Ok(TrialRecord {
        trial: 0,
        seed,
        scheme,
        sweep_value: 0.0,
        power_w: out.reported_power,
        power_dbm: watt_to_dbm(out.reported_power).unwrap_or(f64::NEG_INFINITY),
        iters: nominal.iterations,
        converged: nominal.converged,
        user_rate: rates.user_rate,
        sum_tag_rate: rates.sum_tag_rate(),
        sum_sensing_rate: rates.sum_sensing_rate(),
        feasible: nominal.feasible,
        stage_ms: nominal.stage_ms,
        objective_trace: nominal.objective_trace.clone(),
        rho: out.rho,
        solution: Some(out.solution),
        diagnostic: None,
    }))
}

/// Worker pool honouring `ISABC_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ISABC_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("ISABC_THREADS: cannot parse '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Every (sweep value, scheme, trial) record, in that nesting order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(f64, Scheme, usize)> = cfg
        .values()
        .into_iter()
        .flat_map(|v| cfg.schemes.iter().flat_map(move |&s| (0..cfg.trials).map(move |t| (v, s, t))))
        .collect();
    let cells: Vec<(f64, ExperimentConfig)> = cfg.values().into_iter().map(|v| (v, cfg.cell(v))).collect();
    let cell_of = |v: f64| &cells.iter().find(|c| c.0 == v).expect("cell exists").1;
    let pool = thread_pool()?;
    Ok(pool.install(|| jobs.par_iter().map(|&(v, s, t)| run_trial(cell_of(v), s, t, v)).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub feasible: usize,
    /// Linear-watt mean over feasible trials.
    pub mean_power_w: f64,
    pub mean_power_dbm: f64,
    /// Mean and standard deviation of the per-trial dBm values.
    pub mean_of_dbm: f64,
    pub std_dbm: f64,
    pub mean_iters: f64,
    pub mean_user_rate: f64,
    pub mean_sum_tag_rate: f64,
    pub mean_sum_sensing_rate: f64,
    pub mean_total_ms: f64,
}

impl CellSummary {
    pub fn infeasible_fraction(&self) -> f64 {
        1.0 - self.feasible as f64 / self.trials as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.sweep_value,
            self.scheme,
            self.trials,
            self.feasible,
            self.infeasible_fraction(),
            self.mean_power_w,
            self.mean_power_dbm,
            self.mean_of_dbm,
            self.std_dbm,
            self.mean_iters,
            self.mean_user_rate,
            self.mean_sum_tag_rate,
            self.mean_sum_sensing_rate,
            self.mean_total_ms,
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; zero for a single sample.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return if xs.is_empty() { f64::NAN } else { 0.0 };
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Per-cell statistics over feasible trials, in first-seen cell order.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, Scheme)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.sweep_value, r.scheme)) {
            keys.push((r.sweep_value, r.scheme));
        }
    }
    keys.into_iter()
        .map(|(v, s)| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_value == v && r.scheme == s).collect();
            let ok: Vec<&TrialRecord> = cell.iter().copied().filter(|r| r.feasible).collect();
            let col = |f: &dyn Fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let dbm = col(&|r| r.power_dbm);
            let mean_power_w = mean(&col(&|r| r.power_w));
            CellSummary {
                sweep_value: v,
                scheme: s,
                trials: cell.len(),
                feasible: ok.len(),
                mean_power_w,
                mean_power_dbm: watt_to_dbm(mean_power_w).unwrap_or(f64::NAN),
                mean_of_dbm: mean(&dbm),
                std_dbm: std_dev(&dbm),
                mean_iters: mean(&col(&|r| r.iters as f64)),
                mean_user_rate: mean(&col(&|r| r.user_rate)),
                mean_sum_tag_rate: mean(&col(&|r| r.sum_tag_rate)),
                mean_sum_sensing_rate: mean(&col(&|r| r.sum_sensing_rate)),
                mean_total_ms: mean(&col(&|r| r.stage_ms.iter().sum())),
            }
        })
        .collect()
}

/// Mean objective per AO iteration for each (sweep value, scheme); traces
/// that stop early are extended with their final value.
pub fn mean_traces(records: &[TrialRecord]) -> Vec<(f64, Scheme, Vec<f64>)> {
    summarize(records)
        .into_iter()
        .map(|c| {
            let traces: Vec<&Vec<f64>> = records
                .iter()
                .filter(|r| r.sweep_value == c.sweep_value && r.scheme == c.scheme && r.feasible && !r.objective_trace.is_empty())
                .map(|r| &r.objective_trace)
                .collect();
            let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
            let avg = (0..len)
                .map(|i| mean(&traces.iter().map(|t| *t.get(i).unwrap_or(t.last().expect("non-empty"))).collect::<Vec<_>>()))
                .collect();
            (c.sweep_value, c.scheme, avg)
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_results<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(mut out: W, cells: &[CellSummary]) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for c in cells {
        writeln!(out, "{}", c.csv_row())?;
    }
    Ok(())
}

pub fn write_convergence<W: Write>(mut out: W, traces: &[(f64, Scheme, Vec<f64>)]) -> Result<()> {
    writeln!(out, "sweep_value,scheme,iteration,mean_objective_w,mean_objective_dbm")?;
    for (v, s, t) in traces {
        for (i, f) in t.iter().enumerate() {
            writeln!(out, "{v},{s},{i},{f},{}", watt_to_dbm(*f).unwrap_or(f64::NAN))?;
        }
    }
    Ok(())
}

/// Plain-text table of the cell summaries.
pub fn render_summary(sweep: Sweep, cells: &[CellSummary]) -> String {
    let mut s = format!("{:>14} {:>13} {:>9} {:>13} {:>11} {:>8} {:>7}\n", sweep.name(), "scheme", "feasible", "mean dBm", "std dB", "iters", "ms");
    for c in cells {
        s += &format!(
            "{:>14} {:>13} {:>4}/{:<4} {:>13.3} {:>11.3} {:>8.2} {:>7.1}\n",
            c.sweep_value, c.scheme.name(), c.feasible, c.trials, c.mean_power_dbm, c.std_dbm, c.mean_iters, c.mean_total_ms
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub scheme: Scheme,
    pub k: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

/// Wall time of the whole optimization per trial, run one trial at a time
/// so timings do not compete for cores.
pub fn measure_runtime(cfg: &ExperimentConfig) -> Result<Vec<RuntimeRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for v in cfg.values() {
        let cell = cfg.cell(v);
        let params = cell.params();
        for &scheme in &cfg.schemes {
            let sc = SchemeConfig::new(scheme);
            let mut times = Vec::with_capacity(cfg.trials);
            for t in 0..cfg.trials {
                let seed = trial_seed(cfg.base_seed, t as u64);
                let ch = draw_channels(&cell, seed)?;
                let mut rng = stream_rng(seed, 1);
                let start = Instant::now();
                let _ = run_scheme(&sc, &ch, &params, &cell.ao_config(), &mut rng);
                times.push(start.elapsed().as_secs_f64() * 1e3);
            }
            rows.push(RuntimeRow { scheme, k: cell.k, trials: cfg.trials, mean_ms: mean(&times), std_ms: std_dev(&times) });
        }
    }
    Ok(rows)
}

pub fn write_runtime<W: Write>(mut out: W, rows: &[RuntimeRow]) -> Result<()> {
    writeln!(out, "scheme,k,trials,mean_ms,std_ms")?;
    for r in rows {
        writeln!(out, "{},{},{},{:.3},{:.3}", r.scheme, r.k, r.trials, r.mean_ms, r.std_ms)?;
    }
    Ok(())
}

/// Writes tx, rx and joint patterns of one solution plus its tag angles.
fn write_beampatterns(dir: &Path, rec: &TrialRecord, ch: &ChannelSet) -> Result<()> {
    let Some(sol) = &rec.solution else { return Ok(()) };
    let grid = AngleGrid::broadside(0.5)?;
    let stem = format!("{}_trial{}", rec.scheme, rec.trial);
    write_pattern_csv(create(&dir.join(format!("{stem}_tx.csv")))?, &tx_beampattern(sol, &grid, sol.w.len()))?;
    let n = ch.num_rx();
    for k in 0..sol.u.len() {
        write_pattern_csv(create(&dir.join(format!("{stem}_rx{k}.csv")))?, &rx_beampattern(sol, k, &grid, n)?)?;
        write_pattern_csv(create(&dir.join(format!("{stem}_joint{k}.csv")))?, &joint_beampattern(sol, k, &grid)?)?;
    }
    let mut tags = create(&dir.join(format!("{stem}_tags.csv")))?;
    writeln!(tags, "k,theta_deg")?;
    for k in 0..sol.u.len() {
        writeln!(tags, "{k},{:.4}", ch.theta[k].to_degrees())?;
    }
    Ok(())
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// 0 on success, 2 when some cell has more than half its trials infeasible.
    pub exit_code: i32,
    pub summary: String,
    pub records: Vec<TrialRecord>,
}

/// Runs the configured experiment and writes its files under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.txt"), cfg.render())?;

    if cfg.sweep == Sweep::Runtime {
        let rows = measure_runtime(cfg)?;
        write_runtime(create(&cfg.out_dir.join("runtime.csv"))?, &rows)?;
        let mut summary = String::from("scheme k mean_ms std_ms\n");
        for r in &rows {
            summary += &format!("{} {} {:.3} {:.3}\n", r.scheme, r.k, r.mean_ms, r.std_ms);
        }
        fs::write(cfg.out_dir.join("summary.txt"), &summary)?;
        return Ok(RunOutcome { exit_code: 0, summary, records: Vec::new() });
    }

    let records = if cfg.sweep == Sweep::Beampattern {
        let values = if cfg.sweep_values.is_empty() { vec![0.0] } else { cfg.sweep_values.clone() };
        let dir = cfg.out_dir.join("beampattern");
        fs::create_dir_all(&dir)?;
        let mut out = Vec::new();
        for v in values {
            let t = v as usize;
            let ch = draw_channels(cfg, trial_seed(cfg.base_seed, t as u64))?;
            for &s in &cfg.schemes {
                let rec = run_trial(cfg, s, t, v);
                let ch = if SchemeConfig::new(s).drops_tags() { ch.without_tags() } else { ch.clone() };
                write_beampatterns(&dir, &rec, &ch)?;
                out.push(rec);
            }
        }
        out
    } else {
        run_trials(cfg)?
    };

    for r in records.iter().filter(|r| r.diagnostic.is_some()) {
        eprintln!("trial {} ({}, {} = {}): {}", r.trial, r.scheme, cfg.sweep, r.sweep_value, r.diagnostic.as_deref().unwrap_or(""));
    }
    write_results(create(&cfg.out_dir.join("results.csv"))?, &records)?;
    let cells = summarize(&records);
    write_summary(create(&cfg.out_dir.join("summary.csv"))?, &cells)?;
    if cfg.sweep == Sweep::Convergence {
        write_convergence(create(&cfg.out_dir.join("convergence.csv"))?, &mean_traces(&records))?;
    }
    let summary = render_summary(cfg.sweep, &cells);
    fs::write(cfg.out_dir.join("summary.txt"), &summary)?;
    let exit_code = if cells.iter().any(|c| c.infeasible_fraction() > MAX_INFEASIBLE_FRACTION) { 2 } else { 0 };
    Ok(RunOutcome { exit_code, summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig { m: 4, n: 4, k: 2, trials: 3, randomization_trials: 50, ..Default::default() }
    }

    #[test]
    fn trial_seeds_ignore_the_sweep_value() {
        let cfg = ExperimentConfig { sweep: Sweep::Antennas, ..small() };
        let a = run_trial(&cfg.cell(4.0), Scheme::IsabcActive, 1, 4.0);
        let b = run_trial(&cfg.cell(6.0), Scheme::IsabcActive, 1, 6.0);
        assert_eq!(a.seed, b.seed);
        let ca = draw_channels(&cfg.cell(4.0), a.seed).unwrap();
        let cb = draw_channels(&cfg.cell(6.0), b.seed).unwrap();
        assert_eq!(ca.theta, cb.theta);
    }

    #[test]
    fn summary_statistics() {
        let mut recs: Vec<TrialRecord> = (0..3).map(|t| TrialRecord::failed(t, 0, Scheme::Isac, 1.0, String::new())).collect();
        for (r, p) in recs.iter_mut().zip([1e-3, 1e-2]) {
            r.feasible = true;
            r.power_w = p;
            r.power_dbm = watt_to_dbm(p).unwrap();
            r.iters = 2;
        }
        let c = &summarize(&recs)[0];
        assert_eq!((c.trials, c.feasible), (3, 2));
        assert!((c.infeasible_fraction() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.mean_power_w - 5.5e-3).abs() < 1e-15);
        assert!((c.mean_power_dbm - watt_to_dbm(5.5e-3).unwrap()).abs() < 1e-12);
        assert!((c.mean_of_dbm - 5.0).abs() < 1e-12);
        assert!((c.std_dbm - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn results_rows_match_the_header() {
        let cfg = small();
        let recs = run_trials(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        let cols = RESULTS_HEADER.split(',').count();
        for r in &recs {
            assert_eq!(r.csv_row().split(',').count(), cols);
        }
        let cells = summarize(&recs);
        assert_eq!(cells[0].csv_row().split(',').count(), SUMMARY_HEADER.split(',').count());
    }

    #[test]
    fn traces_are_padded() {
        let mut a = TrialRecord::failed(0, 0, Scheme::Isac, 0.0, String::new());
        a.feasible = true;
        a.objective_trace = vec![4.0, 2.0];
        let mut b = a.clone();
        b.objective_trace = vec![4.0, 3.0, 1.0];
        let t = mean_traces(&[a, b]);
        assert_eq!(t[0].2, vec![4.0, 2.5, 1.5]);
    }
}
