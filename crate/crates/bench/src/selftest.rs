//! Quick end-to-end check: analytic identities, then a tiny sweep run twice
//! and compared byte for byte.

use crate::sweep::{run_sweep, write_rows, write_summary, Param, SweepSpec};
use crate::BenchError;
use std::path::Path;
use symbiosr_core::ser::{lower_gamma_int, upper_gamma_int, upper_bound_from_powers};
use symbiosr_core::ScenarioConfig;
use symbiosr_sca::{ScaOptions, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn gamma_identity() -> Check {
    let mut worst: f64 = 0.0;
    for l in [1usize, 2, 5, 30] {
        let full = (1..l).map(|k| k as f64).product::<f64>();
        for i in 0..100 {
            let x = 10.0 * l as f64 * i as f64 / 99.0;
            let s = lower_gamma_int(l, x) + upper_gamma_int(l, x);
            worst = worst.max((s - full).abs() / full);
        }
    }
    Check { name: "gamma identity", pass: worst <= 1e-12, detail: format!("max relative error {worst:.2e}") }
}

fn equal_levels() -> Check {
    let mut worst: f64 = 0.0;
    for q in [1usize, 3] {
        let b = upper_bound_from_powers(&vec![0.3; q + 1], 1.0, 30);
        worst = worst.max((b - q as f64 / (q + 1) as f64).abs());
    }
    Check { name: "equal levels give Q/(Q+1)", pass: worst <= 1e-15, detail: format!("max error {worst:.2e}") }
}

fn tiny() -> (ScenarioConfig, ScaOptions, SweepSpec) {
    let config = ScenarioConfig { n_irs: 8, n_tx: 3, ..ScenarioConfig::default() };
    let opts = ScaOptions { tau_max: 4, restarts: 4, restore_iters: 4, ..ScaOptions::default() };
    let spec = SweepSpec {
        param: Param::PeMax,
        grid: vec![0.2, 0.5],
        n_realizations: 2,
        schemes: Scheme::ALL.to_vec(),
        out: Default::default(),
    };
    (config, opts, spec)
}

fn sweep_bytes(root: u64) -> Result<(Vec<u8>, Vec<u8>), BenchError> {
    let (config, opts, spec) = tiny();
    let res = run_sweep(&spec, &config, &opts, root)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_rows(&res.rows, &mut a)?;
    write_summary(&res.summary, &mut b)?;
    Ok((a, b))
}

/// Runs every check. When `out` is given the tiny sweep's CSVs are written
/// there as `selftest_runs.csv` and `selftest_summary.csv`.
pub fn selftest(root: u64, out: Option<&Path>) -> Result<Vec<Check>, BenchError> {
    let mut checks = vec![gamma_identity(), equal_levels()];
    let first = sweep_bytes(root)?;
    let second = sweep_bytes(root)?;
    let rows = first.0.iter().filter(|&&c| c == b'\n').count().saturating_sub(1);
    let failed = String::from_utf8_lossy(&first.0).matches(",failed").count();
    checks.push(Check {
        name: "tiny sweep completes",
        pass: rows == 16 && failed == 0,
        detail: format!("{rows} rows, {failed} failed"),
    });
    checks.push(Check {
        name: "rerun is byte identical",
        pass: first == second,
        detail: format!("{} + {} bytes", first.0.len(), first.1.len()),
    });
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("selftest_runs.csv"), &first.0)?;
        std::fs::write(dir.join("selftest_summary.csv"), &first.1)?;
    }
    Ok(checks)
}
