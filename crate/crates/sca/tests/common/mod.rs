#![allow(dead_code)]

use symbiosr_core::scenario::{synthesize_channels, ChannelRealization, ScenarioConfig};
use symbiosr_core::signal::{build_codebook, IrsCodebook};
use symbiosr_sca::sca::random_phases;
use symbiosr_sca::{Model, Scheme};

/// Default geometry with the dimensions overridden.
pub fn config(k: usize, q: usize, m: usize, nt: usize, l: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.n_pu = k;
    c.n_ice = q;
    c.n_irs = m;
    c.n_tx = nt;
    c.frame_len = l;
    c.pu_pos = match k {
        1 => vec![[65.0, 0.0]],
        _ => (0..k).map(|i| [65.0, 2.0 - 4.0 * i as f64 / (k - 1) as f64]).collect(),
    };
    c.alpha_ip = vec![2.2; k];
    c.beta_ip = vec![3.0; k];
    c.noise_pu = vec![c.noise_su; k];
    c.ice_indices = (0..q).collect();
    c
}

pub struct Instance {
    pub config: ScenarioConfig,
    pub ch: ChannelRealization,
    pub codebook: IrsCodebook,
}

impl Instance {
    pub fn new(config: ScenarioConfig, seed: u64) -> Self {
        let ch = synthesize_channels(&config, seed).unwrap();
        let codebook = build_codebook(config.n_irs, config.n_ice, &config.ice_indices).unwrap();
        Instance { config, ch, codebook }
    }

    pub fn model(&self, scheme: Scheme) -> Model {
        let phases = random_phases(self.ch.seed, self.config.n_irs);
        Model::new(&self.config, &self.ch, &self.codebook, scheme, Some(&phases))
    }
}
