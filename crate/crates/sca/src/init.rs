//! Feasible starting points.
//!
//! The SER rows are written for consecutive codebook levels, so a usable
//! start needs levels that increase in codebook order as well as a bound
//! under the target. Random phases with maximum-ratio precoding toward the
//! secondary user are tried first. When none of them qualifies, phases are
//! built directly: the reflecting elements are steered to a chosen resultant
//! and every information-carrying element gets a chosen angle relative to
//! it, which places the levels wherever the bound is smallest.

use crate::model::{Model, Point};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::Rng;
use symbiosr_core::rng::{stream, uniform_phase};
use symbiosr_core::ser::upper_bound_from_powers;

/// How many draws the structured search makes before polishing.
const SEARCH_SAMPLES: usize = 3000;
/// Amplitude ratios between successive information-carrying elements tried
/// by the shaped precoders.
const GEOMETRIC_RATIOS: [f64; 5] = [1.25, 1.5, 1.75, 2.0, 2.5];
/// Structured attempts: one principal direction, the shaped precoders and
/// a few random directions.
pub const STRUCTURED_ATTEMPTS: usize = 1 + GEOMETRIC_RATIOS.len() + 3;

/// Whether the secondary-user levels increase along the codebook.
pub fn codebook_monotone(powers: &[f64]) -> bool {
    powers.windows(2).all(|w| w[1] > w[0])
}

/// A start point with its true SER bound.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub point: Point,
    pub bound: f64,
    pub monotone: bool,
}

impl Candidate {
    pub fn new(model: &Model, point: Point) -> Self {
        let p = model.su_powers(&point);
        Candidate { bound: model.ser_bound(&point), monotone: codebook_monotone(&p), point }
    }

    pub fn meets(&self, target: f64) -> bool {
        self.monotone && self.bound <= target
    }
}

fn normalized(v: DVector<C64>) -> DVector<C64> {
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        let mut e = DVector::zeros(v.len());
        e[0] = C64::new(1.0, 0.0);
        e
    }
}

/// Every user gets the same direction at `1/K` of the power.
fn split(v: &DVector<C64>, k: usize) -> Vec<DVector<C64>> {
    let s = C64::new(1.0 / (k as f64).sqrt(), 0.0);
    (0..k).map(|_| v * s).collect()
}

/// Maximum-ratio precoding toward the all-on cascade `Σ_m φ_m c_m`.
fn mrt(c: &nalgebra::DMatrix<C64>, phi: &[C64]) -> DVector<C64> {
    let row = DVector::from_iterator(phi.len(), phi.iter().copied());
    normalized((c.transpose() * row).conjugate())
}

/// Random phases (or the frozen ones) with maximum-ratio precoding toward
/// the secondary user, `restarts` draws.
pub fn spec_pool(model: &Model, root: u64, restarts: usize) -> Vec<Candidate> {
    (0..restarts)
        .map(|r| {
            let mut rng = stream(root, &format!("init/{r}"));
            let phi: Vec<C64> = match &model.fixed_phi {
                Some(p) => p.clone(),
                None => (0..model.n_irs).map(|_| C64::from_polar(1.0, uniform_phase(&mut rng))).collect(),
            };
            let v = mrt(&model.c_su, &phi);
            Candidate::new(model, Point { w: split(&v, model.n_pu), phi })
        })
        .collect()
}

/// Greedy two-way split of `a` into sides of nearly equal sum.
fn partition(a: &[f64]) -> (Vec<f64>, f64, f64) {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    let mut side = vec![1.0; a.len()];
    let (mut s1, mut s2) = (0.0, 0.0);
    for &i in &order {
        if s1 <= s2 {
            s1 += a[i];
        } else {
            s2 += a[i];
            side[i] = -1.0;
        }
    }
    (side, s1, s2)
}

/// Smallest resultant of unit phasors weighted by `a`.
pub fn min_magnitude(a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    let max = a.iter().cloned().fold(0.0, f64::max);
    (2.0 * max - total).max(0.0)
}

/// Angles `θ_m` with `Σ a_m e^{iθ_m} = n1` for `n1` between [`min_magnitude`]
/// and `Σ a_m`. A balanced two-way split covers the upper part of the range
/// in closed form; below it a minimum-norm Gauss–Newton fit starting from
/// random angles closes the gap.
pub fn steer_to_magnitude(a: &[f64], n1: f64) -> Option<Vec<f64>> {
    let (side, s1, s2) = partition(a);
    if n1 > (s1 + s2) * (1.0 + 1e-12) || n1 < min_magnitude(a) {
        return None;
    }
    if n1 >= (s1 - s2).abs() {
        return Some(split_angles(&side, s1, s2, n1));
    }
    let mut rng = stream(a.len() as u64, "init/steer");
    for _ in 0..20 {
        let mut th: Vec<f64> = (0..a.len()).map(|_| uniform_phase(&mut rng)).collect();
        for _ in 0..200 {
            let z: C64 = a.iter().zip(&th).map(|(x, t)| C64::from_polar(*x, *t)).sum();
            let r = z - n1;
            if r.norm() <= 1e-12 * (1.0 + n1) {
                return Some(th);
            }
            // J = [[-a sinθ], [a cosθ]], step = -Jᵀ (J Jᵀ)⁻¹ r.
            let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
            for (x, t) in a.iter().zip(&th) {
                let (s, c) = t.sin_cos();
                j11 += x * x * s * s;
                j12 += -x * x * s * c;
                j22 += x * x * c * c;
            }
            let det = j11 * j22 - j12 * j12;
            if det.abs() < 1e-14 {
                break;
            }
            let y1 = (j22 * r.re - j12 * r.im) / det;
            let y2 = (-j12 * r.re + j11 * r.im) / det;
            for (x, t) in a.iter().zip(th.iter_mut()) {
                let (s, c) = t.sin_cos();
                *t -= -x * s * y1 + x * c * y2;
            }
        }
    }
    None
}

fn split_angles(side: &[f64], s1: f64, s2: f64, n1: f64) -> Vec<f64> {
    // |s1 e^{iδ} + s2 e^{-iδ}| falls from s1 + s2 at δ = 0 to |s1 − s2| at π/2.
    let mag = |d: f64| C64::new((s1 + s2) * d.cos(), (s1 - s2) * d.sin()).norm();
    let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mag(mid) > n1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = 0.5 * (lo + hi);
    let sum = C64::new((s1 + s2) * d.cos(), (s1 - s2) * d.sin());
    let rot = -sum.arg();
    side.iter().map(|s| s * d + rot).collect()
}

/// Order in which the information-carrying elements switch on along the
/// codebook, when every level adds exactly one element to the previous one.
fn switch_order(on: &[Vec<bool>]) -> Option<Vec<usize>> {
    if on.first()?.iter().any(|&b| b) {
        return None;
    }
    let mut order = Vec::with_capacity(on.len() - 1);
    for w in on.windows(2) {
        let added: Vec<usize> = (0..w[0].len()).filter(|&i| w[1][i] && !w[0][i]).collect();
        let removed = (0..w[0].len()).any(|i| w[0][i] && !w[1][i]);
        if added.len() != 1 || removed {
            return None;
        }
        order.push(added[0]);
    }
    Some(order)
}

/// Adding a phasor of length `a` to a resultant of length `r` reaches any
/// length in `[|r − a|, r + a]`; `t ∈ [0, 1]` picks one.
fn reach(r: f64, a: f64, t: f64) -> f64 {
    let lo = (r - a).abs();
    lo + t * (r + a - lo)
}

/// Level amplitudes `A_0 = n1`, `A_{q+1} = reach(A_q, a_q, t_q)`, squared.
fn chain_levels(n1: f64, amp: &[f64], t: &[f64]) -> Vec<f64> {
    let mut a = n1;
    let mut out = vec![a * a];
    for (x, y) in amp.iter().zip(t) {
        a = reach(a, *x, *y);
        out.push(a * a);
    }
    out
}

fn chain_score(model: &Model, n1: f64, amp: &[f64], t: &[f64]) -> f64 {
    let p = chain_levels(n1, amp, t);
    if !codebook_monotone(&p) {
        return f64::INFINITY;
    }
    upper_bound_from_powers(&p, model.nu_su, model.frame_len)
}

/// Angles `ψ_q` with `|z_q + a_q e^{iψ_q}| = A_{q+1}`, `z_0 = n1`, by the
/// law of cosines.
fn chain_angles(n1: f64, amp: &[f64], t: &[f64]) -> Vec<f64> {
    let mut z = C64::new(n1, 0.0);
    let mut out = Vec::with_capacity(amp.len());
    for (a, y) in amp.iter().zip(t) {
        let r = z.norm();
        let target = reach(r, *a, *y);
        let cos = if r > 0.0 && *a > 0.0 { ((target * target - r * r - a * a) / (2.0 * r * a)).clamp(-1.0, 1.0) } else { 1.0 };
        let psi = z.arg() + cos.acos();
        z += C64::from_polar(*a, psi);
        out.push(psi);
    }
    out
}

/// Phases built around one precoding direction toward the secondary user,
/// with the reflecting resultant and the level increments chosen to
/// minimize the bound. Needs a codebook that switches one element on per
/// level.
pub fn structured_candidate(model: &Model, root: u64, attempt: usize) -> Option<Candidate> {
    if !model.optimizes_phases() {
        return None;
    }
    let ice: Vec<usize> = (0..model.n_irs).filter(|&m| model.su_patterns.iter().any(|p| !p[m])).collect();
    let re: Vec<usize> = (0..model.n_irs).filter(|m| !ice.contains(m)).collect();
    let on: Vec<Vec<bool>> = model.su_patterns.iter().map(|p| ice.iter().map(|&m| p[m]).collect()).collect();
    let order = switch_order(&on)?;
    let mut rng = stream(root, &format!("init/structured/{attempt}"));
    let v = match attempt {
        0 => {
            let svd = model.c_su.clone().svd(false, true);
            let vt = svd.v_t.expect("right singular vectors");
            let i = svd.singular_values.imax();
            normalized(vt.row(i).adjoint())
        }
        a if a <= GEOMETRIC_RATIOS.len() => {
            // Amplitudes growing along the switch order leave room for the
            // power ratios the bound needs between consecutive levels.
            let r = GEOMETRIC_RATIOS[a - 1];
            let rows: Vec<usize> = order.iter().map(|&i| ice[i]).collect();
            let c = nalgebra::DMatrix::from_fn(rows.len(), model.n_tx, |i, j| model.c_su[(rows[i], j)]);
            let target = DVector::from_iterator(rows.len(), (0..rows.len()).map(|i| C64::new(r.powi(i as i32), 0.0)));
            let pinv = c.pseudo_inverse(1e-12).ok()?;
            normalized(pinv * target)
        }
        _ => {
            let v = DVector::from_iterator(model.n_tx, (0..model.n_tx).map(|_| symbiosr_core::rng::complex_normal(&mut rng)));
            normalized(v)
        }
    };
    let e: Vec<C64> = (0..model.n_irs).map(|m| (model.c_su.row(m) * &v)[0]).collect();
    let re_amp: Vec<f64> = re.iter().map(|&m| e[m].norm()).collect();
    let amp: Vec<f64> = order.iter().map(|&i| e[ice[i]].norm()).collect();
    let s_re: f64 = re_amp.iter().sum();

    // Random search over the resultant magnitude (log-uniform, since the
    // useful range sits near the noise floor) and the increments, then a
    // coordinate polish.
    let n1_max = 0.98 * s_re;
    let n1_min = min_magnitude(&re_amp).max(1e-4 * s_re);
    if n1_min >= n1_max {
        return None;
    }
    let (ln_lo, ln_hi) = (n1_min.ln(), n1_max.ln());
    let q = amp.len();
    let mut best = (f64::INFINITY, n1_min, vec![1.0; q]);
    for _ in 0..SEARCH_SAMPLES {
        let n1 = (ln_lo + rng.random::<f64>() * (ln_hi - ln_lo)).exp();
        let t: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        let s = chain_score(model, n1, &amp, &t);
        if s < best.0 {
            best = (s, n1, t);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let mut step: (f64, f64) = (0.3, 0.2);
    for _ in 0..80 {
        let mut improved = false;
        for coord in 0..=q {
            for sign in [-1.0, 1.0] {
                let (mut n1, mut t) = (best.1, best.2.clone());
                if coord == 0 {
                    n1 = (n1 * (sign * step.0).exp()).clamp(n1_min, n1_max);
                } else {
                    t[coord - 1] = (t[coord - 1] + sign * step.1).clamp(0.0, 1.0);
                }
                let s = chain_score(model, n1, &amp, &t);
                if s < best.0 {
                    best = (s, n1, t);
                    improved = true;
                }
            }
        }
        if !improved {
            step = (0.5 * step.0, 0.5 * step.1);
        }
    }

    let (_, n1, t) = best;
    let re_theta = steer_to_magnitude(&re_amp, n1)?;
    let psi = chain_angles(n1, &amp, &t);
    let mut phi = vec![C64::new(1.0, 0.0); model.n_irs];
    for (i, &m) in re.iter().enumerate() {
        phi[m] = C64::from_polar(1.0, re_theta[i] - e[m].arg());
    }
    for (k, &i) in order.iter().enumerate() {
        let m = ice[i];
        phi[m] = C64::from_polar(1.0, psi[k] - e[m].arg());
    }
    Some(Candidate::new(model, Point { w: split(&v, model.n_pu), phi }))
}

/// Power ratios tried between consecutive levels when the phases are frozen.
const FIXED_PHASE_RATIOS: [f64; 6] = [1.5, 2.0, 3.0, 4.0, 6.0, 10.0];

/// With frozen phases each level amplitude is linear in the precoder,
/// `a_q = g_qᵀ w`, so a least-squares fit puts the level powers on a
/// geometric ladder in codebook order.
pub fn fixed_phase_candidates(model: &Model) -> Vec<Candidate> {
    let Some(phi) = &model.fixed_phi else {
        return Vec::new();
    };
    let g = nalgebra::DMatrix::from_fn(model.su_patterns.len(), model.n_tx, |q, j| {
        (0..model.n_irs).filter(|&m| model.su_patterns[q][m]).map(|m| phi[m] * model.c_su[(m, j)]).sum::<C64>()
    });
    let Ok(pinv) = g.clone().pseudo_inverse(1e-12) else {
        return Vec::new();
    };
    FIXED_PHASE_RATIOS
        .iter()
        .map(|r| {
            let target = DVector::from_iterator(g.nrows(), (0..g.nrows()).map(|q| C64::new(r.sqrt().powi(q as i32), 0.0)));
            let v = normalized(&pinv * target);
            Candidate::new(model, Point { w: split(&v, model.n_pu), phi: phi.clone() })
        })
        .collect()
}

/// Start for schemes without the SER constraint: random phases and
/// maximum-ratio precoding toward each primary user.
pub fn primary_start(model: &Model, root: u64) -> Point {
    let mut rng = stream(root, "init/primary");
    let phi: Vec<C64> = match &model.fixed_phi {
        Some(p) => p.clone(),
        None => (0..model.n_irs).map(|_| C64::from_polar(1.0, uniform_phase(&mut rng))).collect(),
    };
    let s = C64::new(1.0 / (model.n_pu as f64).sqrt(), 0.0);
    let w = (0..model.n_pu).map(|k| mrt(&model.c_pu[k], &phi) * s).collect();
    Point { w, phi }
}

/// Best candidate: feasible ones first, then monotone ones by bound.
pub fn best_candidate(cands: &[Candidate], target: f64) -> Option<&Candidate> {
    cands
        .iter()
        .filter(|c| c.monotone)
        .min_by(|a, b| (!a.meets(target)).cmp(&!b.meets(target)).then(a.bound.total_cmp(&b.bound)))
}
