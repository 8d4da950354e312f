//! On/off codebook, received powers and primary-user rates.
//!
//! Level `q` (1-based) of the codebook switches on `q − 1` of the `Q`
//! information-carrying elements (ICEs), filling from the last ICE backward.
//! All other elements are reflection elements that stay on.
//!
//! ```
//! use symbiosr_core::signal::build_codebook;
//! let cb = build_codebook(4, 3, &[0, 1, 2]).unwrap();
//! let ice_rows: Vec<Vec<u8>> = cb
//!     .patterns
//!     .iter()
//!     .map(|p| cb.ice_indices.iter().map(|&i| p[i] as u8).collect())
//!     .collect();
//! assert_eq!(ice_rows, vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 1]]);
//! ```

use crate::scenario::ChannelRealization;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("Q + 1 = {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("expected {expected} ICE indices, got {got}")]
    IceCount { expected: usize, got: usize },
    #[error("ICE index {0} is out of range or repeated")]
    BadIndex(usize),
}

/// The `Q + 1` on/off patterns over `M` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsCodebook {
    pub n_irs: usize,
    pub ice_indices: Vec<usize>,
    pub patterns: Vec<Vec<bool>>,
}

impl IrsCodebook {
    pub fn n_levels(&self) -> usize {
        self.patterns.len()
    }

    pub fn n_ice(&self) -> usize {
        self.ice_indices.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.patterns.len().trailing_zeros()
    }

    /// Indices of the always-on reflection elements.
    pub fn re_indices(&self) -> Vec<usize> {
        (0..self.n_irs).filter(|m| !self.ice_indices.contains(m)).collect()
    }

    /// A single all-on pattern; the surface reflects without modulating.
    pub fn all_on(n_irs: usize) -> Self {
        Self { n_irs, ice_indices: Vec::new(), patterns: vec![vec![true; n_irs]] }
    }

    /// Writes one row per level with a 0/1 column per element.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["level".to_string()];
        header.extend((0..self.n_irs).map(|m| format!("e{m}")));
        out.write_record(&header)?;
        for (q, p) in self.patterns.iter().enumerate() {
            let mut row = vec![(q + 1).to_string()];
            row.extend(p.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the thermometer codebook.
pub fn build_codebook(m: usize, q: usize, ice_indices: &[usize]) -> Result<IrsCodebook, SignalError> {
    if !(q + 1).is_power_of_two() {
        return Err(SignalError::NotPowerOfTwo(q + 1));
    }
    if ice_indices.len() != q {
        return Err(SignalError::IceCount { expected: q, got: ice_indices.len() });
    }
    let mut seen = vec![false; m];
    for &i in ice_indices {
        if i >= m || seen[i] {
            return Err(SignalError::BadIndex(i));
        }
        seen[i] = true;
    }
    let patterns = (0..=q)
        .map(|level| {
            let mut p = vec![true; m];
            for (pos, &i) in ice_indices.iter().enumerate() {
                p[i] = pos >= q - level;
            }
            p
        })
        .collect();
    Ok(IrsCodebook { n_irs: m, ice_indices: ice_indices.to_vec(), patterns })
}

/// Precoders and IRS phases.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub precoders: Vec<DVector<Complex64>>,
    /// Phases in `[0, 2π)`.
    pub phases: Vec<f64>,
}

impl BeamformingSolution {
    pub fn new(precoders: Vec<DVector<Complex64>>, phases: Vec<f64>) -> Self {
        let phases = phases.into_iter().map(|t| t.rem_euclid(std::f64::consts::TAU)).collect();
        Self { precoders, phases }
    }

    /// `diag(Φ)`, the unit-modulus reflection coefficients.
    pub fn phase_vector(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.phases.len(), self.phases.iter().map(|&t| Complex64::from_polar(1.0, t)))
    }

    pub fn phase_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.phase_vector())
    }

    pub fn total_power(&self) -> f64 {
        self.precoders.iter().map(|w| w.norm_squared()).sum()
    }
}

/// Effective secondary-user powers, one per codebook level.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPowers {
    pub p_sq: Vec<f64>,
    pub sigma_su: f64,
}

/// `sᵀ Φ C w` for a cascaded channel `C = diag(hᴴ) G`.
pub fn pattern_amplitude(
    cascade: &DMatrix<Complex64>,
    phi: &DVector<Complex64>,
    pattern: &[bool],
    w: &DVector<Complex64>,
) -> Complex64 {
    let a = cascade * w;
    a.iter()
        .zip(phi.iter())
        .zip(pattern)
        .filter(|(_, &on)| on)
        .map(|((a, p), _)| a * p)
        .sum()
}

/// `Σ_k |s_qᵀ Φ H_S G w_k|²`.
pub fn effective_power_su(ch: &ChannelRealization, sol: &BeamformingSolution, pattern: &[bool]) -> f64 {
    let c = ch.cascade_su();
    let phi = sol.phase_vector();
    sol.precoders
        .iter()
        .map(|w| pattern_amplitude(&c, &phi, pattern, w).norm_sqr())
        .sum()
}

pub fn hypothesis_powers(
    ch: &ChannelRealization,
    sol: &BeamformingSolution,
    codebook: &IrsCodebook,
    sigma_su: f64,
) -> HypothesisPowers {
    let c = ch.cascade_su();
    let phi = sol.phase_vector();
    let p_sq = codebook
        .patterns
        .iter()
        .map(|p| {
            sol.precoders
                .iter()
                .map(|w| pattern_amplitude(&c, &phi, p, w).norm_sqr())
                .sum()
        })
        .collect();
    HypothesisPowers { p_sq, sigma_su }
}

/// Rate of primary user `k` under one pattern, in bits/s/Hz.
pub fn rate_pu(
    ch: &ChannelRealization,
    sol: &BeamformingSolution,
    pattern: &[bool],
    k: usize,
    sigma2: f64,
) -> f64 {
    let c = ch.cascade_pu(k);
    rate_with_cascade(&c, &sol.phase_vector(), &sol.precoders, pattern, k, sigma2)
}

fn rate_with_cascade(
    c: &DMatrix<Complex64>,
    phi: &DVector<Complex64>,
    precoders: &[DVector<Complex64>],
    pattern: &[bool],
    k: usize,
    sigma2: f64,
) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, w) in precoders.iter().enumerate() {
        let p = pattern_amplitude(c, phi, pattern, w).norm_sqr();
        if j == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    (1.0 + signal / (interference + sigma2)).log2()
}

/// Mean of [`rate_pu`] over the equiprobable codebook levels.
pub fn average_rate_pu(
    ch: &ChannelRealization,
    sol: &BeamformingSolution,
    codebook: &IrsCodebook,
    k: usize,
    sigma2: f64,
) -> f64 {
    let c = ch.cascade_pu(k);
    let phi = sol.phase_vector();
    let total: f64 = codebook
        .patterns
        .iter()
        .map(|p| rate_with_cascade(&c, &phi, &sol.precoders, p, k, sigma2))
        .sum();
    total / codebook.patterns.len() as f64
}

/// Sum over primary users of the average rates.
pub fn sum_rate(ch: &ChannelRealization, sol: &BeamformingSolution, codebook: &IrsCodebook, sigma2: &[f64]) -> f64 {
    (0..ch.n_pu()).map(|k| average_rate_pu(ch, sol, codebook, k, sigma2[k])).sum()
}
