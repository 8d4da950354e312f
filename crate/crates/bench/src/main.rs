use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use symbiosr_bench::mcverify::{mc_verify, write_mc_rows};
use symbiosr_bench::selftest::selftest;
use symbiosr_bench::sweep::{manifest, write_outputs};
use symbiosr_bench::{run_sweep, BenchError, Param, Profile, SweepSpec};
use symbiosr_core::scenario::load_config_file;
use symbiosr_core::ScenarioConfig;
use symbiosr_sca::sca::{random_phases, ScaState};
use symbiosr_sca::subproblem::{assemble_subproblem, AssembleOptions, Goal, Linearization};
use symbiosr_sca::{initialize_feasible, InitVerdict, Model, ScaOptions, Scheme};

#[derive(Parser)]
#[command(name = "symbiosr", version, about = "Sum-rate sweeps for IRS symbiotic radio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); defaults to the built-in scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; defaults to the scenario's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, default_value = "full", value_parser = ["full", "ci"])]
    profile: String,
    /// Write the first subproblem of realization 0 per scheme as text.
    #[arg(long)]
    dump_subproblem: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sum rate against the SER target.
    SweepSer {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `P_e^max` grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Sum rate against the power budget, optionally also against the
    /// number of AP antennas.
    SweepPower {
        #[command(flatten)]
        common: Common,
        /// Comma-separated power budgets in dBm.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Antenna counts for a second sweep at the configured budget.
        #[arg(long, value_delimiter = ',')]
        n_tx_grid: Option<Vec<usize>>,
        /// SER target of the power sweep; defaults to the scenario's.
        #[arg(long)]
        p_e_max: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Simulated SER against the union bound at optimizer outputs.
    McVerify {
        #[command(flatten)]
        common: Common,
        /// Frames per realization; defaults to the scenario's `mc_frames`.
        #[arg(long)]
        frames: Option<usize>,
        /// Optimize before simulating instead of using the start point.
        #[arg(long)]
        solve: bool,
        /// Write confusion matrices and energy histograms here.
        #[arg(long)]
        dump_mc: Option<PathBuf>,
    },
    /// Analytic identities and a tiny sweep run twice for determinism.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Setup {
    profile: Profile,
    config: ScenarioConfig,
    opts: ScaOptions,
    root: u64,
    realizations: usize,
}

fn setup(c: &Common) -> Result<Setup, BenchError> {
    let profile = Profile::parse(&c.profile).expect("checked by clap");
    let base = match &c.config {
        Some(p) => load_config_file(p)?,
        None => ScenarioConfig::default(),
    };
    let config = profile.scenario(base);
    config.validate()?;
    Ok(Setup {
        root: c.seed.unwrap_or(config.rng_seed),
        realizations: c.realizations.unwrap_or(profile.realizations()),
        opts: profile.options(),
        profile,
        config,
    })
}

fn schemes(names: &Option<Vec<String>>, default: &[Scheme]) -> Result<Vec<Scheme>, BenchError> {
    match names {
        None => Ok(default.to_vec()),
        Some(v) => v
            .iter()
            .map(|s| Scheme::parse(s).ok_or_else(|| BenchError::Spec(format!("unknown scheme `{s}`"))))
            .collect(),
    }
}

fn dump_subproblems(dir: &Path, s: &Setup, config: &ScenarioConfig, list: &[Scheme]) -> Result<(), BenchError> {
    use symbiosr_core::scenario::synthesize_channels;
    use symbiosr_core::signal::build_codebook;
    std::fs::create_dir_all(dir)?;
    let seed = symbiosr_bench::sweep::realization_seed(s.root, 0);
    let ch = synthesize_channels(config, seed)?;
    let cb = build_codebook(config.n_irs, config.n_ice, &config.ice_indices).map_err(|e| BenchError::Spec(e.to_string()))?;
    for &scheme in list {
        let model = Model::new(config, &ch, &cb, scheme, Some(&random_phases(ch.seed, config.n_irs)));
        let opts = ScaOptions { seed, ..s.opts };
        let start = match initialize_feasible(&model, &opts).map_err(|e| BenchError::Spec(e.to_string()))? {
            InitVerdict::Feasible(p) => p,
            _ => {
                eprintln!("warning: no feasible start for {}; subproblem not written", scheme.name());
                continue;
            }
        };
        let state = ScaState::new(&model, start, opts.lift);
        let lin = Linearization::new(&model, &state.point, &state.aux);
        let assemble = AssembleOptions { goal: Goal::SumRate, lift: opts.lift, rho: opts.rho_init, p_target: model.p_e_max };
        let sp = assemble_subproblem(&model, &lin, assemble).map_err(|e| BenchError::Spec(e.to_string()))?;
        std::fs::write(dir.join(format!("{}_subproblem.txt", scheme.name())), sp.program.to_string())?;
    }
    Ok(())
}

fn sweep(
    command: &str,
    stem: &str,
    s: &Setup,
    config: &ScenarioConfig,
    spec: &SweepSpec,
    dump: &Option<PathBuf>,
) -> Result<bool, BenchError> {
    if let Some(dir) = dump {
        dump_subproblems(dir, s, &spec.param.apply(config, spec.grid[0]), &spec.schemes)?;
    }
    let result = run_sweep(spec, config, &s.opts, s.root)?;
    let (runs, summary) = write_outputs(spec, &result, stem)?;
    let m = manifest(command, s.profile.name(), spec, config, &s.opts, s.root, &result);
    let path = spec.out.join(format!("{stem}_manifest.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
    for r in &result.summary {
        println!(
            "{:<13} {} = {:<8} mean {:.4} ± {:.4}  feasible {:.2}{}",
            r.scheme.name(),
            r.param.name(),
            r.value,
            r.mean,
            r.std_error,
            r.feasible_fraction,
            if r.failed > 0 { format!("  ({} failed)", r.failed) } else { String::new() }
        );
    }
    println!("wrote {}, {}, {}", runs.display(), summary.display(), path.display());
    Ok(result.summary.iter().all(|r| r.realizations > 0))
}

fn run(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::SweepSer { common, grid, schemes: names } => {
            let s = setup(&common)?;
            let spec = SweepSpec {
                param: Param::PeMax,
                grid: grid.unwrap_or_else(|| s.profile.ser_grid()),
                n_realizations: s.realizations,
                schemes: schemes(&names, &Scheme::ALL)?,
                out: common.out.clone(),
            };
            sweep("sweep-ser", "ser", &s, &s.config, &spec, &common.dump_subproblem)
        }
        Command::SweepPower { common, grid, n_tx_grid, p_e_max, schemes: names } => {
            let s = setup(&common)?;
            let config = ScenarioConfig { p_e_max: p_e_max.unwrap_or(s.config.p_e_max), ..s.config.clone() };
            let list = schemes(&names, &Scheme::ALL)?;
            let spec = SweepSpec {
                param: Param::PMax,
                grid: grid.unwrap_or_else(|| s.profile.power_grid()),
                n_realizations: s.realizations,
                schemes: list.clone(),
                out: common.out.clone(),
            };
            let mut ok = sweep("sweep-power", "power", &s, &config, &spec, &common.dump_subproblem)?;
            if let Some(nt) = n_tx_grid {
                let spec = SweepSpec { param: Param::NTx, grid: nt.iter().map(|&n| n as f64).collect(), ..spec };
                ok &= sweep("sweep-power", "antennas", &s, &config, &spec, &None)?;
            }
            Ok(ok)
        }
        Command::McVerify { common, frames, solve, dump_mc } => {
            let s = setup(&common)?;
            let frames = frames.unwrap_or(s.config.mc_frames);
            let rows = mc_verify(&s.config, &s.opts, s.root, s.realizations, frames, solve, dump_mc.as_deref())?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("mc_verify.csv");
            write_mc_rows(&rows, std::fs::File::create(&path)?)?;
            let dominated = rows.iter().filter(|r| r.dominated()).count();
            let fit = rows.iter().filter(|r| r.erlang_pass).count();
            println!("bound dominates simulation on {dominated}/{} realizations", rows.len());
            println!("energies fit the Erlang law on {fit}/{} realizations", rows.len());
            println!("wrote {}", path.display());
            Ok(dominated == rows.len())
        }
        Command::Selftest { seed, out } => {
            let checks = selftest(seed.unwrap_or(ScenarioConfig::default().rng_seed), out.as_deref())?;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
