//! Named bundles of scenario overrides, solver settings and sweep defaults.

use symbiosr_conic::SolverOptions;
use symbiosr_core::ScenarioConfig;
use symbiosr_sca::ScaOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Scenario as configured, default tolerances, 100 realizations.
    Full,
    /// `M = 16`, 5 realizations and loose tolerances. Shows the trends in
    /// minutes; the numbers are not comparable to full scale.
    Ci,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Profile::Full),
            "ci" => Some(Profile::Ci),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Full => "full",
            Profile::Ci => "ci",
        }
    }

    pub fn realizations(self) -> usize {
        match self {
            Profile::Full => 100,
            Profile::Ci => 5,
        }
    }

    /// Applies the profile's size overrides to `config`.
    pub fn scenario(self, mut config: ScenarioConfig) -> ScenarioConfig {
        if self == Profile::Ci {
            config.n_irs = 16;
        }
        config
    }

    pub fn options(self) -> ScaOptions {
        match self {
            Profile::Full => ScaOptions::default(),
            Profile::Ci => ScaOptions {
                solver: SolverOptions { feas_tol: 1e-6, kkt_tol: 1e-6, ..SolverOptions::default() },
                tau_max: 15,
                rel_tol: 1e-3,
                restarts: 8,
                restore_iters: 8,
                ..ScaOptions::default()
            },
        }
    }

    pub fn ser_grid(self) -> Vec<f64> {
        vec![1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
    }

    /// Power budgets in dBm.
    pub fn power_grid(self) -> Vec<f64> {
        vec![20.0, 25.0, 30.0, 35.0, 40.0]
    }
}
