//! Sweeps over one scenario parameter.

use crate::BenchError;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use symbiosr_core::rng::derive_seed;
use symbiosr_core::scenario::{dbm_to_watts, synthesize_channels};
use symbiosr_core::signal::build_codebook;
use symbiosr_core::ScenarioConfig;
use symbiosr_sca::sca::{meets_ser, random_phases};
use symbiosr_sca::{run_model, Model, ScaOptions, ScaOutcome, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    PeMax,
    /// Grid values in dBm.
    PMax,
    NTx,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::PeMax => "p_e_max",
            Param::PMax => "p_max_dbm",
            Param::NTx => "n_tx",
        }
    }

    /// `config` with the swept parameter set to `value`.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = config.clone();
        match self {
            Param::PeMax => c.p_e_max = value,
            Param::PMax => c.p_max = dbm_to_watts(value),
            Param::NTx => c.n_tx = value as usize,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: Param,
    pub grid: Vec<f64>,
    pub n_realizations: usize,
    pub schemes: Vec<Scheme>,
    pub out: PathBuf,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Spec(m.to_string()));
        if self.grid.is_empty() {
            return bad("grid is empty");
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("grid must be strictly increasing");
        }
        if self.n_realizations == 0 {
            return bad("need at least one realization");
        }
        if self.schemes.is_empty() {
            return bad("no schemes requested");
        }
        if self.param == Param::NTx && self.grid.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return bad("antenna counts must be positive integers");
        }
        Ok(())
    }
}

/// Seed of realization `r` under `root`.
pub fn realization_seed(root: u64, r: usize) -> u64 {
    derive_seed(root, &format!("realization/{r}"))
}

/// One run. A failed run has `verdict == "failed"` and a NaN rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scheme: Scheme,
    pub param: Param,
    pub value: f64,
    pub realization: usize,
    pub sum_rate: f64,
    /// Whether the run meets the SER target at this grid value.
    pub feasible: bool,
    pub iterations: usize,
    pub newton_steps: usize,
    pub ser_bound: f64,
    pub verdict: String,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.verdict == "failed"
    }

    /// Rate after the zero-rate penalty. The all-on bound is exempt.
    pub fn scored(&self) -> f64 {
        if self.feasible || self.scheme == Scheme::AllOnUpper {
            self.sum_rate
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub param: Param,
    pub value: f64,
    pub realizations: usize,
    pub failed: usize,
    pub mean: f64,
    pub std_error: f64,
    pub feasible_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
    pub seconds: f64,
}

struct Job {
    scheme: Scheme,
    /// Grid values this run stands for. Schemes that ignore `P_e^max` run
    /// once per realization in a `P_e^max` sweep.
    values: Vec<f64>,
    realization: usize,
}

fn scheme_rank(s: Scheme) -> usize {
    Scheme::ALL.iter().position(|&t| t == s).unwrap_or(usize::MAX)
}

fn jobs(spec: &SweepSpec) -> Vec<Job> {
    let mut out = Vec::new();
    for &scheme in &spec.schemes {
        for r in 0..spec.n_realizations {
            if spec.param == Param::PeMax && !scheme.has_qos() {
                out.push(Job { scheme, values: spec.grid.clone(), realization: r });
            } else {
                out.extend(spec.grid.iter().map(|&v| Job { scheme, values: vec![v], realization: r }));
            }
        }
    }
    out
}

fn run_job(spec: &SweepSpec, config: &ScenarioConfig, opts: &ScaOptions, root: u64, job: &Job) -> Vec<Row> {
    let seed = realization_seed(root, job.realization);
    let first = spec.param.apply(config, job.values[0]);
    let failed = |value: f64, why: String| {
        eprintln!(
            "warning: {} at {} = {value}, realization {} failed: {why}",
            job.scheme.name(),
            spec.param.name(),
            job.realization
        );
        Row {
            scheme: job.scheme,
            param: spec.param,
            value,
            realization: job.realization,
            sum_rate: f64::NAN,
            feasible: false,
            iterations: 0,
            newton_steps: 0,
            ser_bound: f64::NAN,
            verdict: "failed".into(),
        }
    };
    let setup = synthesize_channels(&first, seed).map_err(|e| e.to_string()).and_then(|ch| {
        build_codebook(first.n_irs, first.n_ice, &first.ice_indices)
            .map(|cb| (ch, cb))
            .map_err(|e| e.to_string())
    });
    let (ch, codebook) = match setup {
        Ok(s) => s,
        Err(e) => return job.values.iter().map(|&v| failed(v, e.clone())).collect(),
    };
    let phases = random_phases(ch.seed, first.n_irs);
    let model = Model::new(&first, &ch, &codebook, job.scheme, Some(&phases));
    let opts = ScaOptions { seed, ..*opts };
    let outcome: ScaOutcome = match run_model(&model, &opts) {
        Ok(o) => o,
        Err(e) => return job.values.iter().map(|&v| failed(v, e.to_string())).collect(),
    };
    job.values
        .iter()
        .map(|&value| {
            // The SER bound of the returned point does not depend on the
            // target, so reused runs only need the check redone.
            let feasible = match job.scheme {
                Scheme::AllOnUpper => true,
                _ if job.values.len() == 1 => outcome.meets_ser,
                _ => meets_ser(&model, &outcome.point, value),
            };
            Row {
                scheme: job.scheme,
                param: spec.param,
                value,
                realization: job.realization,
                sum_rate: outcome.sum_rate,
                feasible,
                iterations: outcome.iterations,
                newton_steps: outcome.newton_steps,
                ser_bound: outcome.ser_bound,
                verdict: outcome.verdict.name().to_string(),
            }
        })
        .collect()
}

/// Runs every (scheme, grid value, realization) cell of `spec` on a worker
/// pool. `opts.seed` is replaced by each realization's seed.
pub fn run_sweep(spec: &SweepSpec, config: &ScenarioConfig, opts: &ScaOptions, root: u64) -> Result<SweepResult, BenchError> {
    spec.validate()?;
    for &v in &spec.grid {
        spec.param.apply(config, v).validate()?;
    }
    let start = std::time::Instant::now();
    let jobs = jobs(spec);
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let mut rows: Vec<Row> = jobs
        .par_iter()
        .flat_map_iter(|job| {
            let rows = run_job(spec, config, opts, root, job);
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            eprintln!(
                "[{n}/{total}] {} realization {} at {} = {}",
                job.scheme.name(),
                job.realization,
                spec.param.name(),
                job.values[0]
            );
            rows
        })
        .collect();
    sort_rows(&mut rows);
    let summary = aggregate(&rows);
    Ok(SweepResult { rows, summary, seconds: start.elapsed().as_secs_f64() })
}

pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        scheme_rank(a.scheme)
            .cmp(&scheme_rank(b.scheme))
            .then(a.value.total_cmp(&b.value))
            .then(a.realization.cmp(&b.realization))
    });
}

/// Per-cell mean with the zero-rate penalty, standard error of the mean and
/// feasible fraction. Failed runs are left out of all three.
pub fn aggregate(rows: &[Row]) -> Vec<SummaryRow> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out: Vec<SummaryRow> = Vec::new();
    for cell in sorted.chunk_by(|a, b| a.scheme == b.scheme && a.value == b.value) {
        let ok: Vec<&Row> = cell.iter().filter(|r| !r.failed()).collect();
        let n = ok.len();
        let scores: Vec<f64> = ok.iter().map(|r| r.scored()).collect();
        let mean = if n == 0 { 0.0 } else { scores.iter().sum::<f64>() / n as f64 };
        let std_error = if n < 2 {
            0.0
        } else {
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        let feasible = ok.iter().filter(|r| r.feasible).count();
        out.push(SummaryRow {
            scheme: cell[0].scheme,
            param: cell[0].param,
            value: cell[0].value,
            realizations: n,
            failed: cell.len() - n,
            mean,
            std_error,
            feasible_fraction: if n == 0 { 0.0 } else { feasible as f64 / n as f64 },
        });
    }
    out
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.9e}")
    }
}

pub fn write_rows<W: std::io::Write>(rows: &[Row], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scheme",
        "swept_param",
        "value",
        "realization",
        "sum_rate",
        "feasible",
        "iterations",
        "newton_steps",
        "ser_bound",
        "verdict",
    ])?;
    for r in rows {
        out.write_record([
            r.scheme.name().to_string(),
            r.param.name().to_string(),
            r.value.to_string(),
            r.realization.to_string(),
            num(r.sum_rate),
            r.feasible.to_string(),
            r.iterations.to_string(),
            r.newton_steps.to_string(),
            num(r.ser_bound),
            r.verdict.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scheme",
        "swept_param",
        "value",
        "realizations",
        "failed",
        "mean_sum_rate",
        "std_error",
        "feasible_fraction",
    ])?;
    for r in rows {
        out.write_record([
            r.scheme.name().to_string(),
            r.param.name().to_string(),
            r.value.to_string(),
            r.realizations.to_string(),
            r.failed.to_string(),
            num(r.mean),
            num(r.std_error),
            num(r.feasible_fraction),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Paths of the two CSVs for a sweep named `stem`.
pub fn output_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}_runs.csv")), dir.join(format!("{stem}_summary.csv")))
}

/// Writes `<stem>_runs.csv` and `<stem>_summary.csv` under `spec.out`.
pub fn write_outputs(spec: &SweepSpec, result: &SweepResult, stem: &str) -> Result<(PathBuf, PathBuf), BenchError> {
    std::fs::create_dir_all(&spec.out)?;
    let (runs, summary) = output_paths(&spec.out, stem);
    write_rows(&result.rows, std::fs::File::create(&runs)?)?;
    write_summary(&result.summary, std::fs::File::create(&summary)?)?;
    Ok((runs, summary))
}

/// Run manifest: the scenario, the sweep, the seeds and the versions.
pub fn manifest(
    command: &str,
    profile: &str,
    spec: &SweepSpec,
    config: &ScenarioConfig,
    opts: &ScaOptions,
    root: u64,
    result: &SweepResult,
) -> serde_json::Value {
    let failed = result.rows.iter().filter(|r| r.failed()).count();
    serde_json::json!({
        "tool": "symbiosr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "profile": profile,
        "swept_param": spec.param.name(),
        "grid": spec.grid,
        "realizations": spec.n_realizations,
        "schemes": spec.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "root_seed": root,
        "realization_seeds": (0..spec.n_realizations).map(|r| realization_seed(root, r)).collect::<Vec<_>>(),
        "scenario": config,
        "options": format!("{opts:?}"),
        "rows": result.rows.len(),
        "failed_rows": failed,
        "wall_seconds": result.seconds,
    })
}
