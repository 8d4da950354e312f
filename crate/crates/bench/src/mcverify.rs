//! Monte Carlo check of the SER bound at optimizer outputs.

use crate::sweep::realization_seed;
use crate::BenchError;
use std::path::Path;
use symbiosr_core::mc::{erlang_gof, estimate_ser, write_histogram_csv, EnergySimulator};
use symbiosr_core::rng::{derive_seed, stream};
use symbiosr_core::scenario::synthesize_channels;
use symbiosr_core::ser::{build_detector, ser_upper_bound};
use symbiosr_core::signal::{build_codebook, hypothesis_powers};
use symbiosr_core::ScenarioConfig;
use symbiosr_sca::init::primary_start;
use symbiosr_sca::{initialize_feasible, run_model, InitVerdict, Model, ScaOptions, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub realization: usize,
    pub ser_bound: f64,
    pub ser_hat: f64,
    pub std_error: f64,
    /// Every level's simulated energies pass the Erlang KS test at 1%.
    pub erlang_pass: bool,
}

impl McRow {
    /// Empirical SER within three standard errors of the bound or below it.
    pub fn dominated(&self) -> bool {
        self.ser_hat <= self.ser_bound + 3.0 * self.std_error
    }
}

/// For each realization, takes the proposed scheme's start point (or its
/// optimized point when `solve` is set), then compares the MAP detector's
/// simulated SER with the union bound and checks the energy law.
pub fn mc_verify(
    config: &ScenarioConfig,
    opts: &ScaOptions,
    root: u64,
    n_realizations: usize,
    frames: usize,
    solve: bool,
    dump: Option<&Path>,
) -> Result<Vec<McRow>, BenchError> {
    config.validate()?;
    let codebook = build_codebook(config.n_irs, config.n_ice, &config.ice_indices)
        .map_err(|e| BenchError::Spec(e.to_string()))?;
    if let Some(d) = dump {
        std::fs::create_dir_all(d)?;
    }
    let mut rows = Vec::with_capacity(n_realizations);
    for r in 0..n_realizations {
        let seed = realization_seed(root, r);
        let ch = synthesize_channels(config, seed)?;
        let model = Model::new(config, &ch, &codebook, Scheme::Proposed, None);
        let opts = ScaOptions { seed, ..*opts };
        let point = if solve {
            run_model(&model, &opts).map_err(|e| BenchError::Spec(e.to_string()))?.point
        } else {
            match initialize_feasible(&model, &opts).map_err(|e| BenchError::Spec(e.to_string()))? {
                InitVerdict::Feasible(p) | InitVerdict::InfeasibleAtInit(Some(p)) => p,
                InitVerdict::InfeasibleAtInit(None) => primary_start(&model, seed),
            }
        };
        let sol = model.to_solution(&point);
        let powers = hypothesis_powers(&ch, &sol, &codebook, config.noise_su);
        let spec = build_detector(&powers, config.frame_len);
        let bound = ser_upper_bound(&spec).upper_bound;
        let mc = estimate_ser(&ch, &sol, &codebook, &spec, frames, derive_seed(seed, "mc-verify"));

        let mut erlang_pass = true;
        let n_draws = frames.min(20_000);
        for (q, pattern) in codebook.patterns.iter().enumerate() {
            let sim = EnergySimulator::new(&ch, &sol, pattern, config.noise_su);
            let lambda = 1.0 / (sim.power() + config.noise_su);
            let mut rng = stream(seed, &format!("mc-verify/energy/{q}"));
            let e: Vec<f64> = (0..n_draws).map(|_| sim.draw(config.frame_len, &mut rng)).collect();
            erlang_pass &= erlang_gof(&e, lambda, config.frame_len).pass;
            if let Some(d) = dump {
                write_histogram_csv(&e, 50, std::fs::File::create(d.join(format!("energy_r{r}_q{q}.csv")))?)?;
            }
        }
        if let Some(d) = dump {
            mc.write_confusion_csv(std::fs::File::create(d.join(format!("confusion_r{r}.csv")))?)?;
        }
        rows.push(McRow { realization: r, ser_bound: bound, ser_hat: mc.ser_hat, std_error: mc.std_error(), erlang_pass });
    }
    Ok(rows)
}

pub fn write_mc_rows<W: std::io::Write>(rows: &[McRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["realization", "ser_bound", "ser_mc", "std_error", "bound_dominates", "erlang_fit"])?;
    for r in rows {
        out.write_record([
            r.realization.to_string(),
            format!("{:.9e}", r.ser_bound),
            format!("{:.9e}", r.ser_hat),
            format!("{:.9e}", r.std_error),
            r.dominated().to_string(),
            r.erlang_pass.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
