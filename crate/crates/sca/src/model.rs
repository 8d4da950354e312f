//! Normalized link model shared by every scheme.
//!
//! Each cascaded channel `diag(hᴴ) G` is divided by its root-mean-square row
//! norm, and precoders are expressed as fractions of the power budget, so
//! `Σ‖w_k‖² ≤ 1`. A link then has per-element gains of order one and a
//! noise level `ν = σ² / κ`, with `κ = p_max · mean_m ‖row_m‖²`. Rates and
//! SER depend on powers only through ratios to the noise, so nothing is lost.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use symbiosr_core::scenario::{ChannelRealization, ScenarioConfig};
use symbiosr_core::ser::upper_bound_from_powers;
use symbiosr_core::signal::{BeamformingSolution, IrsCodebook};

/// Which optimization problem a run solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Joint precoding and phases under the SER constraint.
    Proposed,
    /// Same as [`Scheme::Proposed`] without any secondary-user constraint.
    NoQos,
    /// Phases drawn at random and frozen; precoders optimized under the SER constraint.
    RandomPhase,
    /// Every element on, no secondary user. Never penalized.
    AllOnUpper,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::NoQos, Scheme::RandomPhase, Scheme::AllOnUpper];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoQos => "no-qos",
            Scheme::RandomPhase => "random-phase",
            Scheme::AllOnUpper => "all-on-upper",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether the SER constraint is part of the optimization.
    pub fn has_qos(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::RandomPhase)
    }

    /// Whether a run that misses the SER target scores zero.
    pub fn penalized(self) -> bool {
        self != Scheme::AllOnUpper
    }
}

/// Storage of the products `U = f fᴴ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ULift {
    /// `M × M` matrices, bordered blocks of size `M + 1`.
    Full,
    /// Projection onto the group indicators (reflecting group plus each
    /// information-carrying element). Objective and SER rows only see
    /// `Tᵀ U T`.
    Compact,
}

/// Storage of `A = Φ Φᴴ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ALift {
    Full,
    Diagonal,
}

/// Form of the `[[D, E], [Eᴴ, I]] ⪰ 0` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurForm {
    /// One `(2M + 1)`-dimensional block per product.
    Block,
    /// `M` blocks of size 3 with `c` split across them. Needs a diagonal `A`.
    Chordal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftOptions {
    pub u: ULift,
    pub a: ALift,
    pub schur: SchurForm,
}

impl LiftOptions {
    /// Structure exactly as written: full `U` and `A`, `(2M+1)` blocks.
    pub fn full() -> Self {
        Self { u: ULift::Full, a: ALift::Full, schur: SchurForm::Block }
    }

    pub fn compact() -> Self {
        Self { u: ULift::Compact, a: ALift::Diagonal, schur: SchurForm::Chordal }
    }
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self::compact()
    }
}

/// Normalized precoders and reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    /// One precoder per primary user, `Σ‖w_k‖² ≤ 1`.
    pub w: Vec<DVector<C64>>,
    /// Diagonal of `Φ`.
    pub phi: Vec<C64>,
}

impl Point {
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    /// Forces `|φ_m| = 1`; zero entries get phase zero.
    pub fn unit_modulus(mut self) -> Self {
        for p in &mut self.phi {
            let r = p.norm();
            *p = if r > 0.0 { *p / r } else { C64::new(1.0, 0.0) };
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub scheme: Scheme,
    pub n_pu: usize,
    pub n_irs: usize,
    pub n_tx: usize,
    pub frame_len: usize,
    /// Normalized PU cascades, `M × N_t`.
    pub c_pu: Vec<DMatrix<C64>>,
    pub nu_pu: Vec<f64>,
    pub kappa_pu: Vec<f64>,
    pub c_su: DMatrix<C64>,
    pub nu_su: f64,
    pub kappa_su: f64,
    /// Patterns averaged in the objective.
    pub patterns: Vec<Vec<bool>>,
    /// Codebook seen by the secondary user (used for the SER bound even
    /// when the optimization ignores it).
    pub su_patterns: Vec<Vec<bool>>,
    /// Group of every element; elements switch together.
    pub group: Vec<usize>,
    pub group_sizes: Vec<usize>,
    /// `levels[q][r]`: group `r` is on under pattern `q`.
    pub levels: Vec<Vec<bool>>,
    pub su_levels: Vec<Vec<bool>>,
    pub su_group: Vec<usize>,
    pub p_max: f64,
    pub p_e_max: f64,
    /// Phases held fixed by [`Scheme::RandomPhase`].
    pub fixed_phi: Option<Vec<C64>>,
}

fn normalize(c: DMatrix<C64>, p_max: f64) -> (DMatrix<C64>, f64) {
    let m = c.nrows() as f64;
    let mean_row = c.norm_squared() / m;
    let s = mean_row.sqrt();
    (c / C64::new(s, 0.0), p_max * mean_row)
}

/// Groups elements with identical on/off columns, in order of first appearance.
fn grouping(patterns: &[Vec<bool>], m: usize) -> (Vec<usize>, Vec<Vec<bool>>) {
    let mut keys: Vec<Vec<bool>> = Vec::new();
    let mut group = vec![0; m];
    for (e, g) in group.iter_mut().enumerate() {
        let col: Vec<bool> = patterns.iter().map(|p| p[e]).collect();
        *g = match keys.iter().position(|k| *k == col) {
            Some(i) => i,
            None => {
                keys.push(col);
                keys.len() - 1
            }
        };
    }
    let levels = (0..patterns.len())
        .map(|q| keys.iter().map(|k| k[q]).collect())
        .collect();
    (group, levels)
}

impl Model {
    /// Builds the model of `scheme`. `fixed_phases` is required by
    /// [`Scheme::RandomPhase`] and ignored otherwise.
    pub fn new(
        config: &ScenarioConfig,
        ch: &ChannelRealization,
        codebook: &IrsCodebook,
        scheme: Scheme,
        fixed_phases: Option<&[f64]>,
    ) -> Self {
        let m = ch.n_irs();
        let (c_pu, kappa_pu): (Vec<_>, Vec<_>) =
            (0..ch.n_pu()).map(|k| normalize(ch.cascade_pu(k), config.p_max)).unzip();
        let nu_pu = kappa_pu.iter().zip(&config.noise_pu).map(|(k, s)| s / k).collect();
        let (c_su, kappa_su) = normalize(ch.cascade_su(), config.p_max);
        let patterns = if scheme == Scheme::AllOnUpper {
            IrsCodebook::all_on(m).patterns
        } else {
            codebook.patterns.clone()
        };
        let (group, levels) = grouping(&patterns, m);
        let n_groups = levels[0].len();
        let mut group_sizes = vec![0; n_groups];
        for &g in &group {
            group_sizes[g] += 1;
        }
        let (su_group, su_levels) = grouping(&codebook.patterns, m);
        let fixed_phi = match scheme {
            Scheme::RandomPhase => {
                let t = fixed_phases.expect("random-phase needs fixed phases");
                Some(t.iter().map(|&a| C64::from_polar(1.0, a)).collect())
            }
            _ => None,
        };
        Model {
            scheme,
            n_pu: ch.n_pu(),
            n_irs: m,
            n_tx: ch.n_tx(),
            frame_len: config.frame_len,
            c_pu,
            nu_pu,
            kappa_pu,
            c_su,
            nu_su: config.noise_su / kappa_su,
            kappa_su,
            su_patterns: codebook.patterns.clone(),
            patterns,
            group,
            group_sizes,
            levels,
            su_levels,
            su_group,
            p_max: config.p_max,
            p_e_max: config.p_e_max,
            fixed_phi,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Number of SER pairs `(q, q + 1)` in the secondary-user codebook.
    pub fn n_pairs(&self) -> usize {
        self.su_patterns.len() - 1
    }

    pub fn optimizes_phases(&self) -> bool {
        self.fixed_phi.is_none()
    }

    pub fn has_su(&self) -> bool {
        self.scheme.has_qos()
    }

    /// `C w`, per element.
    pub fn amplitudes(c: &DMatrix<C64>, w: &DVector<C64>) -> Vec<C64> {
        (c * w).iter().copied().collect()
    }

    /// `f = Φ C w`.
    pub fn product(phi: &[C64], c: &DMatrix<C64>, w: &DVector<C64>) -> Vec<C64> {
        Self::amplitudes(c, w).iter().zip(phi).map(|(b, p)| b * p).collect()
    }

    /// `Tᵀ f`, sums over groups.
    pub fn group_sums(&self, f: &[C64]) -> Vec<C64> {
        let mut g = vec![C64::new(0.0, 0.0); self.n_groups()];
        for (m, v) in f.iter().enumerate() {
            g[self.group[m]] += v;
        }
        g
    }

    fn level_power(g: &[C64], on: &[bool]) -> f64 {
        g.iter().zip(on).filter(|p| *p.1).map(|p| *p.0).sum::<C64>().norm_sqr()
    }

    /// `P_{q,k,j}` in the normalization of user `k`.
    pub fn pu_power(&self, point: &Point, q: usize, k: usize, j: usize) -> f64 {
        let f = Self::product(&point.phi, &self.c_pu[k], &point.w[j]);
        Self::level_power(&self.group_sums(&f), &self.levels[q])
    }

    /// Secondary-user powers per codebook level, normalized.
    pub fn su_powers(&self, point: &Point) -> Vec<f64> {
        let n_groups = self.su_levels[0].len();
        let mut out = vec![0.0; self.su_levels.len()];
        for w in &point.w {
            let f = Self::product(&point.phi, &self.c_su, w);
            let mut g = vec![C64::new(0.0, 0.0); n_groups];
            for (m, v) in f.iter().enumerate() {
                g[self.su_group[m]] += v;
            }
            for (q, on) in self.su_levels.iter().enumerate() {
                out[q] += Self::level_power(&g, on);
            }
        }
        out
    }

    /// Average sum rate over the objective's patterns, bits/s/Hz.
    pub fn sum_rate(&self, point: &Point) -> f64 {
        let k = self.n_pu;
        let mut total = 0.0;
        for q in 0..self.n_patterns() {
            for u in 0..k {
                let p: Vec<f64> = (0..k).map(|j| self.pu_power(point, q, u, j)).collect();
                let interference: f64 = (0..k).filter(|&j| j != u).map(|j| p[j]).sum();
                total += (1.0 + p[u] / (interference + self.nu_pu[u])).log2();
            }
        }
        total / self.n_patterns() as f64
    }

    /// Union bound on the secondary user's SER at `point`.
    pub fn ser_bound(&self, point: &Point) -> f64 {
        upper_bound_from_powers(&self.su_powers(point), self.nu_su, self.frame_len)
    }

    pub fn to_solution(&self, point: &Point) -> BeamformingSolution {
        let s = C64::new(self.p_max.sqrt(), 0.0);
        BeamformingSolution::new(
            point.w.iter().map(|w| w * s).collect(),
            point.phi.iter().map(|p| p.arg()).collect(),
        )
    }

    pub fn from_solution(&self, sol: &BeamformingSolution) -> Point {
        let s = C64::new(1.0 / self.p_max.sqrt(), 0.0);
        Point { w: sol.precoders.iter().map(|w| w * s).collect(), phi: sol.phase_vector().iter().copied().collect() }
    }
}
