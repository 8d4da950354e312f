//! Deployment configuration and Rician channel synthesis.
//!
//! Distances are in meters on a 2-D plane, powers in Watts and gains linear.
//! dBm and dB only appear in the TOML document and in reports.
//!
//! ```
//! use symbiosr_core::scenario::{load_config, synthesize_channels};
//! let cfg = load_config("").unwrap();
//! assert_eq!((cfg.n_pu, cfg.n_ice, cfg.n_tx, cfg.n_irs, cfg.frame_len), (2, 3, 4, 30, 30));
//! let ch = synthesize_channels(&cfg, 11).unwrap();
//! assert_eq!(ch.g.shape(), (30, 4));
//! ```

use crate::rng::{self, complex_normal};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

/// Gain at the 1 m reference distance, in dB.
pub const DEFAULT_C0_DB: f64 = -30.0;
/// Reference distance of the path-loss law, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("configuration document is not valid TOML: {0}")]
    Syntax(String),
    #[error("configuration key `{key}` has the wrong type (expected {expected})")]
    IllTyped { key: String, expected: &'static str },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("distance {0} m is below the 1 m reference distance")]
    BelowReference(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scenario parameters. Powers are stored in Watts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub n_pu: usize,
    pub n_ice: usize,
    pub n_tx: usize,
    pub n_irs: usize,
    pub frame_len: usize,
    pub ap_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub su_pos: [f64; 2],
    pub pu_pos: Vec<[f64; 2]>,
    pub carrier_hz: f64,
    pub alpha_ai: f64,
    pub alpha_is: f64,
    pub alpha_ip: Vec<f64>,
    pub beta_ai: f64,
    pub beta_is: f64,
    pub beta_ip: Vec<f64>,
    pub c0_db: f64,
    pub spacing_wavelengths: f64,
    pub ap_axis_deg: f64,
    pub irs_axis_deg: f64,
    pub p_max: f64,
    pub noise_pu: Vec<f64>,
    pub noise_su: f64,
    pub p_e_max: f64,
    pub rng_seed: u64,
    pub mc_frames: usize,
    pub ice_indices: Vec<usize>,
}

/// Evenly spaced primary users on the line x = 65 m, y in [-2, 2].
fn default_pu_positions(k: usize) -> Vec<[f64; 2]> {
    if k == 1 {
        return vec![[65.0, 0.0]];
    }
    (0..k)
        .map(|i| [65.0, 2.0 - 4.0 * i as f64 / (k - 1) as f64])
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let k = 2;
        let q = 3;
        Self {
            n_pu: k,
            n_ice: q,
            n_tx: 4,
            n_irs: 30,
            frame_len: 30,
            ap_pos: [0.0, 0.0],
            irs_pos: [15.0, 10.0],
            su_pos: [20.0, 2.0],
            pu_pos: default_pu_positions(k),
            carrier_hz: 2.4e9,
            alpha_ai: 2.2,
            alpha_is: 2.2,
            alpha_ip: vec![2.2; k],
            beta_ai: 3.0,
            beta_is: 3.0,
            beta_ip: vec![3.0; k],
            c0_db: DEFAULT_C0_DB,
            spacing_wavelengths: 0.5,
            ap_axis_deg: 0.0,
            irs_axis_deg: 90.0,
            p_max: dbm_to_watts(30.0),
            noise_pu: vec![dbm_to_watts(-100.0); k],
            noise_su: dbm_to_watts(-100.0),
            p_e_max: 0.01,
            rng_seed: 2021,
            mc_frames: 100_000,
            ice_indices: (0..q).collect(),
        }
    }
}

fn ill(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::IllTyped { key: key.to_string(), expected }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ill(key, "number")),
    }
}

fn as_count(key: &str, v: &Value) -> Result<usize, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(ill(key, "nonnegative integer")),
    }
}

fn as_point(key: &str, v: &Value) -> Result<[f64; 2], ConfigError> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok([as_f64(key, &a[0])?, as_f64(key, &a[1])?]),
        _ => Err(ill(key, "[x, y] pair of numbers")),
    }
}

/// A number broadcast to every primary user, or one number per user.
fn as_per_pu(key: &str, v: &Value) -> Result<Vec<f64>, ConfigError> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        other => Ok(vec![as_f64(key, other)?]),
    }
}

fn broadcast(key: &str, v: Vec<f64>, k: usize) -> Result<Vec<f64>, ConfigError> {
    match v.len() {
        1 => Ok(vec![v[0]; k]),
        n if n == k => Ok(v),
        n => Err(ConfigError::Validation(format!(
            "`{key}` has {n} entries but n_pu = {k}"
        ))),
    }
}

/// Parses a TOML document; absent keys take the default scenario values.
pub fn load_config(source: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: Table = source
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    config_from_table(&table)
}

/// Reads and parses a TOML file.
pub fn load_config_file(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Syntax(format!("{}: {e}", path.display())))?;
    load_config(&text)
}

fn config_from_table(table: &Table) -> Result<ScenarioConfig, ConfigError> {
    let mut c = ScenarioConfig::default();
    let mut pu_pos = None;
    let mut alpha_ip = None;
    let mut beta_ip = None;
    let mut noise_pu = None;
    let mut ice = None;
    for (key, v) in table {
        let k = key.as_str();
        match k {
            "n_pu" => c.n_pu = as_count(k, v)?,
            "n_ice" => c.n_ice = as_count(k, v)?,
            "n_tx" => c.n_tx = as_count(k, v)?,
            "n_irs" => c.n_irs = as_count(k, v)?,
            "frame_len" => c.frame_len = as_count(k, v)?,
            "ap_position" => c.ap_pos = as_point(k, v)?,
            "irs_position" => c.irs_pos = as_point(k, v)?,
            "su_position" => c.su_pos = as_point(k, v)?,
            "pu_positions" => match v {
                Value::Array(a) => {
                    pu_pos = Some(a.iter().map(|p| as_point(k, p)).collect::<Result<Vec<_>, _>>()?)
                }
                _ => return Err(ill(k, "array of [x, y] pairs")),
            },
            "carrier_hz" => c.carrier_hz = as_f64(k, v)?,
            "pathloss_exponent_ai" => c.alpha_ai = as_f64(k, v)?,
            "pathloss_exponent_is" => c.alpha_is = as_f64(k, v)?,
            "pathloss_exponent_ip" => alpha_ip = Some(as_per_pu(k, v)?),
            "rician_factor_ai" => c.beta_ai = as_f64(k, v)?,
            "rician_factor_is" => c.beta_is = as_f64(k, v)?,
            "rician_factor_ip" => beta_ip = Some(as_per_pu(k, v)?),
            "c0_db" => c.c0_db = as_f64(k, v)?,
            "antenna_spacing_wavelengths" => c.spacing_wavelengths = as_f64(k, v)?,
            "ap_axis_deg" => c.ap_axis_deg = as_f64(k, v)?,
            "irs_axis_deg" => c.irs_axis_deg = as_f64(k, v)?,
            "p_max_dbm" => c.p_max = dbm_to_watts(as_f64(k, v)?),
            "noise_pu_dbm" => noise_pu = Some(as_per_pu(k, v)?.into_iter().map(dbm_to_watts).collect()),
            "noise_su_dbm" => c.noise_su = dbm_to_watts(as_f64(k, v)?),
            "p_e_max" => c.p_e_max = as_f64(k, v)?,
            "rng_seed" => {
                c.rng_seed = match v {
                    Value::Integer(i) if *i >= 0 => *i as u64,
                    _ => return Err(ill(k, "nonnegative integer")),
                }
            }
            "mc_frames" => c.mc_frames = as_count(k, v)?,
            "ice_indices" => match v {
                Value::Array(a) => {
                    ice = Some(a.iter().map(|x| as_count(k, x)).collect::<Result<Vec<_>, _>>()?)
                }
                _ => return Err(ill(k, "array of element indices")),
            },
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }
    let kpu = c.n_pu;
    c.pu_pos = pu_pos.unwrap_or_else(|| default_pu_positions(kpu.max(1)));
    c.alpha_ip = broadcast("pathloss_exponent_ip", alpha_ip.unwrap_or(vec![2.2]), kpu)?;
    c.beta_ip = broadcast("rician_factor_ip", beta_ip.unwrap_or(vec![3.0]), kpu)?;
    c.noise_pu = broadcast(
        "noise_pu_dbm",
        noise_pu.unwrap_or(vec![dbm_to_watts(-100.0)]),
        kpu,
    )?;
    c.ice_indices = ice.unwrap_or_else(|| (0..c.n_ice).collect());
    c.validate()?;
    Ok(c)
}

impl ScenarioConfig {
    /// Checks every invariant of the configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Validation(m));
        if self.n_pu < 1 {
            return bad("n_pu must be at least 1".into());
        }
        if self.n_ice < 1 || self.n_irs <= self.n_ice {
            return bad(format!(
                "need n_irs > n_ice >= 1 (n_irs = {}, n_ice = {})",
                self.n_irs, self.n_ice
            ));
        }
        if !(self.n_ice + 1).is_power_of_two() {
            return bad(format!("n_ice + 1 = {} is not a power of two", self.n_ice + 1));
        }
        if self.n_tx < 1 || self.frame_len < 1 {
            return bad("n_tx and frame_len must be at least 1".into());
        }
        if self.pu_pos.len() != self.n_pu {
            return bad(format!(
                "`pu_positions` has {} entries but n_pu = {}",
                self.pu_pos.len(),
                self.n_pu
            ));
        }
        for (name, v) in [
            ("pathloss_exponent_ip", &self.alpha_ip),
            ("rician_factor_ip", &self.beta_ip),
            ("noise_pu_dbm", &self.noise_pu),
        ] {
            if v.len() != self.n_pu {
                return bad(format!("`{name}` has {} entries but n_pu = {}", v.len(), self.n_pu));
            }
        }
        let positive = [self.p_max, self.noise_su, self.carrier_hz, self.spacing_wavelengths];
        if positive.iter().chain(&self.noise_pu).any(|p| !(*p > 0.0 && p.is_finite())) {
            return bad("powers, carrier and antenna spacing must be positive and finite".into());
        }
        let betas = [self.beta_ai, self.beta_is];
        if betas.iter().chain(&self.beta_ip).any(|b| !(*b >= 0.0)) {
            return bad("Rician factors must be nonnegative".into());
        }
        let alphas = [self.alpha_ai, self.alpha_is];
        if alphas.iter().chain(&self.alpha_ip).any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad("path-loss exponents must be nonnegative".into());
        }
        if !(self.p_e_max > 0.0 && self.p_e_max < 1.0) {
            return bad(format!("p_e_max = {} is outside (0, 1)", self.p_e_max));
        }
        if self.ice_indices.len() != self.n_ice {
            return bad(format!(
                "`ice_indices` has {} entries but n_ice = {}",
                self.ice_indices.len(),
                self.n_ice
            ));
        }
        let mut seen = vec![false; self.n_irs];
        for &i in &self.ice_indices {
            if i >= self.n_irs || seen[i] {
                return bad(format!("`ice_indices` entry {i} is out of range or repeated"));
            }
            seen[i] = true;
        }
        let links = [
            distance(self.ap_pos, self.irs_pos),
            distance(self.irs_pos, self.su_pos),
        ];
        let pu = self.pu_pos.iter().map(|p| distance(self.irs_pos, *p));
        if links.into_iter().chain(pu).any(|d| d < REFERENCE_DISTANCE_M) {
            return bad("every link must be at least 1 m long".into());
        }
        Ok(())
    }

    /// Linear gain at the reference distance.
    pub fn c0(&self) -> f64 {
        db_to_linear(self.c0_db)
    }

    pub fn wavelength(&self) -> f64 {
        299_792_458.0 / self.carrier_hz
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance-dependent path gain `c0 · d^(−α)`.
pub fn path_gain(distance_m: f64, exponent: f64, c0: f64) -> Result<f64, ScenarioError> {
    if !(distance_m >= REFERENCE_DISTANCE_M) {
        return Err(ScenarioError::BelowReference(distance_m));
    }
    Ok(c0 * distance_m.powf(-exponent))
}

/// Steering vector of an `n`-element uniform linear array whose axis points
/// at `axis_deg`, towards the unit direction `dir`.
pub fn ula_steering(n: usize, spacing_wavelengths: f64, axis_deg: f64, dir: [f64; 2]) -> DVector<Complex64> {
    let ax = axis_deg.to_radians();
    let cos_psi = ax.cos() * dir[0] + ax.sin() * dir[1];
    let k = std::f64::consts::TAU * spacing_wavelengths * cos_psi;
    DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, k * i as f64))
}

fn unit(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let d = distance(from, to);
    [(to[0] - from[0]) / d, (to[1] - from[1]) / d]
}

/// Channel matrices of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// AP to IRS, `M × N_t`.
    pub g: DMatrix<Complex64>,
    /// IRS to each primary user, length `M`.
    pub h_pu: Vec<DVector<Complex64>>,
    /// IRS to the secondary user, length `M`.
    pub h_su: DVector<Complex64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn n_irs(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_pu(&self) -> usize {
        self.h_pu.len()
    }

    /// `diag(hᴴ) G`, the per-element cascaded channel seen through vector `h`.
    pub fn cascade(&self, h: &DVector<Complex64>) -> DMatrix<Complex64> {
        let mut c = self.g.clone();
        for (m, mut row) in c.row_iter_mut().enumerate() {
            row *= h[m].conj();
        }
        c
    }

    /// Cascaded channel of primary user `k`.
    pub fn cascade_pu(&self, k: usize) -> DMatrix<Complex64> {
        self.cascade(&self.h_pu[k])
    }

    /// Cascaded channel of the secondary user.
    pub fn cascade_su(&self) -> DMatrix<Complex64> {
        self.cascade(&self.h_su)
    }
}

fn rician_weights(beta: f64) -> (f64, f64) {
    if beta.is_infinite() {
        (1.0, 0.0)
    } else {
        ((beta / (1.0 + beta)).sqrt(), (1.0 / (1.0 + beta)).sqrt())
    }
}

fn rician_matrix(
    los: &DMatrix<Complex64>,
    gain: f64,
    beta: f64,
    rng: &mut rng::Stream,
) -> DMatrix<Complex64> {
    let (wl, wn) = rician_weights(beta);
    let s = gain.sqrt();
    // Column-major fill keeps the draw order independent of the LoS values.
    DMatrix::from_fn(los.nrows(), los.ncols(), |i, j| {
        let nlos = complex_normal(rng);
        (los[(i, j)] * wl + nlos * wn) * s
    })
}

/// Draws one channel realization. The same `(config, seed)` always gives
/// the same matrices, bit for bit.
pub fn synthesize_channels(config: &ScenarioConfig, seed: u64) -> Result<ChannelRealization, ScenarioError> {
    config.validate()?;
    let m = config.n_irs;
    let nt = config.n_tx;
    let c0 = config.c0();
    let sp = config.spacing_wavelengths;

    let d_ai = distance(config.ap_pos, config.irs_pos);
    let ap_to_irs = unit(config.ap_pos, config.irs_pos);
    let irs_to_ap = unit(config.irs_pos, config.ap_pos);
    let a_ap = ula_steering(nt, sp, config.ap_axis_deg, ap_to_irs);
    let a_irs = ula_steering(m, sp, config.irs_axis_deg, irs_to_ap);
    let los_g = &a_irs * a_ap.adjoint();
    let gain_ai = path_gain(d_ai, config.alpha_ai, c0)?;
    let g = rician_matrix(&los_g, gain_ai, config.beta_ai, &mut rng::stream(seed, "link/ai"));

    let irs_link = |to: [f64; 2], alpha: f64, beta: f64, label: &str| {
        let d = distance(config.irs_pos, to);
        let los = ula_steering(m, sp, config.irs_axis_deg, unit(config.irs_pos, to));
        let gain = path_gain(d, alpha, c0)?;
        let los = DMatrix::from_column_slice(m, 1, los.as_slice());
        let h = rician_matrix(&los, gain, beta, &mut rng::stream(seed, label));
        Ok::<_, ScenarioError>(DVector::from_column_slice(h.as_slice()))
    };
    let h_su = irs_link(config.su_pos, config.alpha_is, config.beta_is, "link/is")?;
    let h_pu = (0..config.n_pu)
        .map(|k| irs_link(config.pu_pos[k], config.alpha_ip[k], config.beta_ip[k], &format!("link/ip/{k}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChannelRealization { g, h_pu, h_su, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-28);
        assert!((watts_to_dbm(1e-3) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn steering_has_unit_entries() {
        let a = ula_steering(8, 0.5, 90.0, [0.6, 0.8]);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        assert!((a[1].arg() - std::f64::consts::PI * 0.8).abs() < 1e-12);
    }

    #[test]
    fn default_pu_layout() {
        assert_eq!(default_pu_positions(2), vec![[65.0, 2.0], [65.0, -2.0]]);
        assert_eq!(default_pu_positions(1), vec![[65.0, 0.0]]);
    }
}
