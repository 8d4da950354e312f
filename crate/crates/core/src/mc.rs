//! Monte Carlo simulation of the secondary-user receive chain.
//!
//! Each frame draws the primary symbols `c_k(l) ~ CN(0, 1)` and receiver
//! noise, forms `y(l) = sᵀ Φ H_S G Σ_k w_k c_k(l) + n(l)` and sums `|y(l)|²`
//! over the `L` frames. Frames are simulated in fixed-size batches, each on
//! its own labeled stream, so results do not depend on scheduling.

use crate::rng::{self, complex_normal};
use crate::scenario::ChannelRealization;
use crate::ser::{erlang_cdf, map_detect, DetectorSpec};
use crate::signal::{pattern_amplitude, BeamformingSolution, IrsCodebook};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;

const BATCH: usize = 4096;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Energy statistic generator for one pattern.
#[derive(Debug, Clone)]
pub struct EnergySimulator {
    /// `sᵀ Φ H_S G w_k` for each precoder.
    pub amplitudes: Vec<Complex64>,
    pub sigma2: f64,
}

impl EnergySimulator {
    pub fn new(ch: &ChannelRealization, sol: &BeamformingSolution, pattern: &[bool], sigma2: f64) -> Self {
        let c = ch.cascade_su();
        let phi = sol.phase_vector();
        let amplitudes = sol
            .precoders
            .iter()
            .map(|w| pattern_amplitude(&c, &phi, pattern, w))
            .collect();
        Self { amplitudes, sigma2 }
    }

    /// Effective power `Σ_k |a_k|²`.
    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, frame_len: usize, rng: &mut R) -> f64 {
        let sn = self.sigma2.sqrt();
        (0..frame_len)
            .map(|_| {
                let mut y = complex_normal(rng) * sn;
                for a in &self.amplitudes {
                    y += a * complex_normal(rng);
                }
                y.norm_sqr()
            })
            .sum()
    }
}

/// One energy statistic `Σ_{l=1}^{L} |y(l)|²`.
pub fn simulate_energy<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    sol: &BeamformingSolution,
    pattern: &[bool],
    frame_len: usize,
    sigma2: f64,
    rng: &mut R,
) -> f64 {
    EnergySimulator::new(ch, sol, pattern, sigma2).draw(frame_len, rng)
}

/// Empirical error rate of the MAP energy detector.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub ser_hat: f64,
    pub half_width_95: f64,
    /// Wilson 95% interval.
    pub interval_95: (f64, f64),
    pub n_frames: usize,
    /// `confusion[sent][decided]`, codebook order.
    pub confusion: Vec<Vec<u64>>,
}

impl McResult {
    /// Binomial standard error of `ser_hat`.
    pub fn std_error(&self) -> f64 {
        (self.ser_hat * (1.0 - self.ser_hat) / self.n_frames as f64).sqrt()
    }

    pub fn write_confusion_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.confusion.len();
        let mut header = vec!["sent".to_string()];
        header.extend((0..n).map(|d| format!("decided_{d}")));
        out.write_record(&header)?;
        for (s, row) in self.confusion.iter().enumerate() {
            let mut r = vec![s.to_string()];
            r.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Simulates `n_frames` equiprobable symbols and decodes them with the MAP
/// rule of `spec`.
pub fn estimate_ser(
    ch: &ChannelRealization,
    sol: &BeamformingSolution,
    codebook: &IrsCodebook,
    spec: &DetectorSpec,
    n_frames: usize,
    seed: u64,
) -> McResult {
    let sims: Vec<EnergySimulator> = codebook
        .patterns
        .iter()
        .map(|p| EnergySimulator::new(ch, sol, p, spec.powers.sigma_su))
        .collect();
    estimate_ser_with(&sims, spec, n_frames, seed, |e| map_detect(e, spec))
}

/// Same as [`estimate_ser`] but with pre-built simulators and any decision rule.
pub fn estimate_ser_with<F>(
    sims: &[EnergySimulator],
    spec: &DetectorSpec,
    n_frames: usize,
    seed: u64,
    decide: F,
) -> McResult
where
    F: Fn(f64) -> usize + Sync,
{
    let n = sims.len();
    let n_batches = n_frames.div_ceil(BATCH);
    let confusion = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, &format!("mc/batch/{b}"));
            let frames = BATCH.min(n_frames - b * BATCH);
            let mut local = vec![vec![0u64; n]; n];
            for _ in 0..frames {
                let q = rng.random_range(0..n);
                let e = sims[q].draw(spec.frame_len, &mut rng);
                local[q][decide(e)] += 1;
            }
            local
        })
        .reduce(
            || vec![vec![0u64; n]; n],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                a
            },
        );
    let errors: u64 = (0..n)
        .flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| (s, d)))
        .map(|(s, d)| confusion[s][d])
        .sum();
    let ser_hat = errors as f64 / n_frames as f64;
    let interval_95 = wilson_interval(errors, n_frames as u64, Z95);
    McResult {
        ser_hat,
        half_width_95: 0.5 * (interval_95.1 - interval_95.0),
        interval_95,
        n_frames,
        confusion,
    }
}

/// Kolmogorov–Smirnov test against an Erlang law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub ks_stat: f64,
    pub critical_1pct: f64,
    pub pass: bool,
}

/// Asymptotic 1% critical value of the one-sample KS statistic is
/// `sqrt(ln(2 / 0.01) / 2) / sqrt(n)`.
pub fn erlang_gof(samples: &[f64], lambda: f64, frame_len: usize) -> GofResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = erlang_cdf(frame_len, lambda, x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let critical = (200f64.ln() / 2.0).sqrt() / n.sqrt();
    GofResult { ks_stat: d, critical_1pct: critical, pass: d < critical }
}

/// Histogram of energies as CSV rows `(bin_lo, bin_hi, count)`.
pub fn write_histogram_csv<W: Write>(samples: &[f64], bins: usize, w: W) -> csv::Result<()> {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_lo", "bin_hi", "count"])?;
    for (b, c) in counts.iter().enumerate() {
        let a = lo + b as f64 * width;
        out.write_record([format!("{a:.9e}"), format!("{:.9e}", a + width), c.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
