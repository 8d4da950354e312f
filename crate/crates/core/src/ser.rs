//! Energy detection of the IRS symbol and its symbol-error union bound.
//!
//! Under hypothesis `q` the energy `E = Σ_l |y(l)|²` over `L` frames is
//! Erlang with shape `L` and rate `λ_q = 1 / (P_q + σ²)`. The MAP rule picks
//! the largest Erlang density. The union bound sums, for every level, the
//! probability of crossing the threshold towards each neighbour.
//!
//! ```
//! use symbiosr_core::ser::{build_detector, ser_upper_bound};
//! use symbiosr_core::signal::HypothesisPowers;
//! let equal = HypothesisPowers { p_sq: vec![2.0; 4], sigma_su: 1.0 };
//! let rep = ser_upper_bound(&build_detector(&equal, 30));
//! assert!((rep.upper_bound - 0.75).abs() < 1e-15);
//! ```

use crate::signal::HypothesisPowers;

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_{l<L} x^l / l!`, the logarithm of the truncated exponential series.
pub fn ln_partial_exp_sum(l: usize, x: f64) -> f64 {
    assert!(l >= 1 && x >= 0.0, "need L >= 1 and x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    let lx = x.ln();
    let mut lf = 0.0;
    let terms: Vec<f64> = (0..l)
        .map(|i| {
            if i > 0 {
                lf += (i as f64).ln();
            }
            i as f64 * lx - lf
        })
        .collect();
    log_sum_exp(terms.into_iter())
}

/// `ln Q(L, x)`, the log of the regularized upper incomplete gamma function.
pub fn ln_reg_upper_gamma(l: usize, x: f64) -> f64 {
    ln_partial_exp_sum(l, x) - x
}

/// `ln P(L, x)`, the log of the regularized lower incomplete gamma function.
pub fn ln_reg_lower_gamma(l: usize, x: f64) -> f64 {
    assert!(l >= 1 && x >= 0.0, "need L >= 1 and x >= 0");
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= l as f64 {
        return (-reg_upper_gamma(l, x)).ln_1p();
    }
    // Tail series e^{-x} Σ_{i≥L} x^i/i!, factored as the first term times a
    // sum of ratios that converges geometrically because x < L.
    let head = l as f64 * x.ln() - x - ln_factorial(l);
    let mut ratio = 1.0;
    let mut sum = 1.0;
    let mut i = l;
    loop {
        i += 1;
        ratio *= x / i as f64;
        sum += ratio;
        if ratio < 1e-17 * sum {
            break;
        }
    }
    head + sum.ln()
}

/// Regularized lower incomplete gamma `P(L, x) = γ(L, x) / (L − 1)!`.
pub fn reg_lower_gamma(l: usize, x: f64) -> f64 {
    ln_reg_lower_gamma(l, x).exp()
}

/// Regularized upper incomplete gamma `Q(L, x) = Γ(L, x) / (L − 1)!`.
pub fn reg_upper_gamma(l: usize, x: f64) -> f64 {
    ln_reg_upper_gamma(l, x).exp()
}

/// `γ(L, x) = (L − 1)! (1 − e^{−x} Σ_{l<L} x^l / l!)`.
pub fn lower_gamma_int(l: usize, x: f64) -> f64 {
    (ln_factorial(l - 1) + ln_reg_lower_gamma(l, x)).exp()
}

/// `Γ(L, x) = (L − 1)! e^{−x} Σ_{l<L} x^l / l!`.
pub fn upper_gamma_int(l: usize, x: f64) -> f64 {
    (ln_factorial(l - 1) + ln_reg_upper_gamma(l, x)).exp()
}

/// Erlang density with shape `L` and rate `λ` at `e`.
pub fn erlang_pdf(l: usize, lambda: f64, e: f64) -> f64 {
    if e <= 0.0 {
        return if l == 1 { lambda } else { 0.0 };
    }
    (l as f64 * lambda.ln() + (l as f64 - 1.0) * e.ln() - lambda * e - ln_factorial(l - 1)).exp()
}

/// Erlang CDF, `γ(L, λe) / (L − 1)!`.
pub fn erlang_cdf(l: usize, lambda: f64, e: f64) -> f64 {
    if e <= 0.0 {
        0.0
    } else {
        reg_lower_gamma(l, lambda * e)
    }
}

/// How the threshold between adjacent levels is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdVariant {
    /// `d_q = (P_{q+1} − P_q) / 2`.
    #[default]
    HalfGap,
    /// `d_q = (P_q + P_{q+1}) / 2 + σ²`, halfway between the mean energies per frame.
    Midpoint,
}

/// Everything the detector and the bound need, with levels sorted by power.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub powers: HypothesisPowers,
    pub frame_len: usize,
    /// `order[i]` is the codebook index of the `i`-th smallest power.
    pub order: Vec<usize>,
    pub sorted_powers: Vec<f64>,
    /// Rates in sorted order, nonincreasing.
    pub lambdas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub thresholds_mid: Vec<f64>,
    pub variant: ThresholdVariant,
    /// Two levels coincide exactly.
    pub degenerate: bool,
}

pub fn build_detector(powers: &HypothesisPowers, frame_len: usize) -> DetectorSpec {
    build_detector_with(powers, frame_len, ThresholdVariant::HalfGap)
}

pub fn build_detector_with(powers: &HypothesisPowers, frame_len: usize, variant: ThresholdVariant) -> DetectorSpec {
    assert!(frame_len >= 1);
    let mut order: Vec<usize> = (0..powers.p_sq.len()).collect();
    order.sort_by(|&a, &b| powers.p_sq[a].total_cmp(&powers.p_sq[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| powers.p_sq[i]).collect();
    let s2 = powers.sigma_su;
    let lambdas = sorted.iter().map(|p| 1.0 / (p + s2)).collect();
    let thresholds = sorted.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect();
    let thresholds_mid = sorted.windows(2).map(|w| 0.5 * (w[0] + w[1]) + s2).collect();
    let degenerate = sorted.windows(2).any(|w| w[0] == w[1]);
    DetectorSpec {
        powers: powers.clone(),
        frame_len,
        order,
        sorted_powers: sorted,
        lambdas,
        thresholds,
        thresholds_mid,
        variant,
        degenerate,
    }
}

impl DetectorSpec {
    pub fn n_levels(&self) -> usize {
        self.order.len()
    }

    /// Thresholds of the active variant.
    pub fn active_thresholds(&self) -> &[f64] {
        match self.variant {
            ThresholdVariant::HalfGap => &self.thresholds,
            ThresholdVariant::Midpoint => &self.thresholds_mid,
        }
    }

    /// Energy levels at which adjacent sorted MAP densities cross.
    pub fn map_crossovers(&self) -> Vec<f64> {
        let l = self.frame_len as f64;
        self.lambdas
            .windows(2)
            .map(|w| l * (w[0] / w[1]).ln() / (w[0] - w[1]))
            .collect()
    }

    /// The MAP decision written as a threshold rule on the crossovers.
    pub fn crossover_detect(&self, energy: f64) -> usize {
        let cross = self.map_crossovers();
        let i = cross.iter().take_while(|&&c| energy > c).count();
        self.order[i]
    }
}

/// MAP decision, returned as a codebook index. Equal densities resolve to
/// the smaller codebook index.
pub fn map_detect(energy_sum: f64, spec: &DetectorSpec) -> usize {
    let l = spec.frame_len as f64;
    let s2 = spec.powers.sigma_su;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    // The (L − 1) ln E and factorial terms are common to every level; at
    // E = 0 the remaining score L ln λ picks the largest rate, which is the
    // limit of the density ratio as E → 0⁺.
    for (q, p) in spec.powers.p_sq.iter().enumerate() {
        let lambda = 1.0 / (p + s2);
        let score = l * lambda.ln() - lambda * energy_sum;
        if score > best_score {
            best_score = score;
            best = q;
        }
    }
    best
}

/// Union-bound summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SerReport {
    pub upper_bound: f64,
    /// Error probability of each level, in codebook order.
    pub per_hypothesis_error: Vec<f64>,
    /// Monte Carlo estimate and its 95% half-width, when one was run.
    pub mc_estimate: Option<(f64, f64)>,
}

/// Lower and upper tail arguments `L λ d` for each sorted level.
pub fn tail_arguments(spec: &DetectorSpec) -> (Vec<f64>, Vec<f64>) {
    let l = spec.frame_len as f64;
    let d = spec.active_thresholds();
    let n = spec.n_levels();
    let lower = (1..n).map(|i| l * spec.lambdas[i] * d[i - 1]).collect();
    let upper = (0..n - 1).map(|i| l * spec.lambdas[i] * d[i]).collect();
    (lower, upper)
}

pub fn ser_upper_bound(spec: &DetectorSpec) -> SerReport {
    let n = spec.n_levels();
    let l = spec.frame_len;
    let (lower, upper) = tail_arguments(spec);
    let mut sorted_err = vec![0.0; n];
    for i in 1..n {
        sorted_err[i] += reg_lower_gamma(l, lower[i - 1]);
    }
    for i in 0..n - 1 {
        sorted_err[i] += reg_upper_gamma(l, upper[i]);
    }
    let mut per = vec![0.0; n];
    for (i, &q) in spec.order.iter().enumerate() {
        per[q] = sorted_err[i];
    }
    let upper_bound = sorted_err.iter().sum::<f64>() / n as f64;
    SerReport { upper_bound, per_hypothesis_error: per, mc_estimate: None }
}

/// Half-gap bound straight from a list of powers.
pub fn upper_bound_from_powers(p_sq: &[f64], sigma_su: f64, frame_len: usize) -> f64 {
    let hp = HypothesisPowers { p_sq: p_sq.to_vec(), sigma_su };
    ser_upper_bound(&build_detector(&hp, frame_len)).upper_bound
}
