//! Auxiliary variables of the lifted problem.

use crate::model::{LiftOptions, Model, Point, SchurForm, ULift};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use symbiosr_core::ser::{ln_partial_exp_sum, ln_reg_upper_gamma, reg_lower_gamma, reg_upper_gamma};

/// Lift of one product `f = Φ C w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLift {
    /// `f`, one entry per element.
    pub f: Vec<C64>,
    /// `U`, either `M × M` or projected onto the groups.
    pub u: DMatrix<C64>,
    /// `c`: one entry for the full block, one per element when split.
    pub c: Vec<f64>,
}

/// Tail variables of the SER constraint. Entry `h` belongs to the pair of
/// codebook levels `(h, h + 1)`: the `γ` family bounds the lower tail of
/// level `h + 1`, the `Γ` family the upper tail of level `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SerAux {
    pub gamma: Vec<f64>,
    pub ln_xi_gamma: Vec<f64>,
    pub eps_gamma1: Vec<f64>,
    pub eps_gamma2: Vec<f64>,
    pub big_gamma: Vec<f64>,
    pub ln_xi_big: Vec<f64>,
    pub eps_big1: Vec<f64>,
    pub eps_big2: Vec<f64>,
}

impl SerAux {
    /// Values that make every SER row hold with equality, from the
    /// normalized level powers.
    pub fn consistent(powers: &[f64], nu: f64, frame_len: usize) -> Self {
        let l = frame_len as f64;
        let n = powers.len() - 1;
        let mut out = SerAux {
            gamma: Vec::with_capacity(n),
            ln_xi_gamma: Vec::with_capacity(n),
            eps_gamma1: Vec::with_capacity(n),
            eps_gamma2: Vec::with_capacity(n),
            big_gamma: Vec::with_capacity(n),
            ln_xi_big: Vec::with_capacity(n),
            eps_big1: Vec::with_capacity(n),
            eps_big2: Vec::with_capacity(n),
        };
        for h in 0..n {
            let gap = (powers[h + 1] - powers[h]).max(0.0);
            let eg = gap / (2.0 * (powers[h + 1] + nu));
            let eb = gap / (2.0 * (powers[h] + nu));
            out.gamma.push(reg_lower_gamma(frame_len, l * eg));
            out.ln_xi_gamma.push(ln_partial_exp_sum(frame_len, l * eg));
            out.eps_gamma1.push(eg);
            out.eps_gamma2.push(eg);
            out.big_gamma.push(reg_upper_gamma(frame_len, l * eb));
            out.ln_xi_big.push(ln_partial_exp_sum(frame_len, l * eb));
            out.eps_big1.push(eb);
            out.eps_big2.push(eb);
        }
        out
    }

    /// `Σγ + ΣΓ`, which the SER constraint caps at `(Q + 1) P_e^max`.
    pub fn tail_sum(&self) -> f64 {
        self.gamma.iter().sum::<f64>() + self.big_gamma.iter().sum::<f64>()
    }
}

/// All auxiliary variables for one point of the lifted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    pub lift: LiftOptions,
    /// Primary-user lifts, indexed `k * K + j`.
    pub pu: Vec<LinkLift>,
    /// Secondary-user lifts, one per precoder; empty without SER constraint.
    pub su: Vec<LinkLift>,
    /// `A`; diagonal when the lift stores only its diagonal.
    pub a: DMatrix<C64>,
    pub ser: Option<SerAux>,
}

fn outer(v: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
}

/// `Φ Φᴴ = diag(|φ_m|²)`.
fn phase_gram(phi: &[C64]) -> DMatrix<C64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(phi.len(), phi.iter().map(|p| C64::new(p.norm_sqr(), 0.0))))
}

fn link(model: &Model, lift: LiftOptions, phi: &[C64], b: Vec<C64>, groups: bool) -> LinkLift {
    let f: Vec<C64> = b.iter().zip(phi).map(|(b, p)| b * p).collect();
    let u = match lift.u {
        ULift::Full => outer(&f),
        ULift::Compact if groups => outer(&model.group_sums(&f)),
        ULift::Compact => {
            let mut g = vec![C64::new(0.0, 0.0); model.su_levels[0].len()];
            for (m, v) in f.iter().enumerate() {
                g[model.su_group[m]] += v;
            }
            outer(&g)
        }
    };
    let c = match lift.schur {
        SchurForm::Block => vec![b.iter().map(|v| v.norm_sqr()).sum()],
        SchurForm::Chordal => b.iter().map(|v| v.norm_sqr()).collect(),
    };
    LinkLift { f, u, c }
}

/// `Σ_{r,r' on} U_{r r'}`, the power of one level.
pub fn level_power(u: &DMatrix<C64>, on: &[bool]) -> f64 {
    let mut s = 0.0;
    for (r, &a) in on.iter().enumerate() {
        if !a {
            continue;
        }
        for (c, &b) in on.iter().enumerate() {
            if b {
                s += u[(r, c)].re;
            }
        }
    }
    s
}

/// Maximum relative and absolute gaps between a lift and its rank-one target.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiftResiduals {
    /// `max ‖U − g gᴴ‖_F / ‖U‖_F` over every product.
    pub u_rel: f64,
    /// `‖A − Φ Φᴴ‖_F`.
    pub a_abs: f64,
    /// `max ‖f − Φ C w‖ / ‖Φ C w‖`.
    pub f_rel: f64,
}

impl AuxiliarySet {
    /// Auxiliary values computed from `(W, Φ)`, so every lifted equality
    /// holds exactly.
    pub fn consistent(model: &Model, point: &Point, lift: LiftOptions) -> Self {
        let k = model.n_pu;
        let mut pu = Vec::with_capacity(k * k);
        for u in 0..k {
            for j in 0..k {
                let b = Model::amplitudes(&model.c_pu[u], &point.w[j]);
                pu.push(link(model, lift, &point.phi, b, true));
            }
        }
        let (su, ser) = if model.has_su() {
            let su: Vec<LinkLift> = point
                .w
                .iter()
                .map(|w| link(model, lift, &point.phi, Model::amplitudes(&model.c_su, w), false))
                .collect();
            let powers = model.su_powers(point);
            (su, Some(SerAux::consistent(&powers, model.nu_su, model.frame_len)))
        } else {
            (Vec::new(), None)
        };
        // Φ is diagonal, so A = Φ Φᴴ is too whichever way it is stored.
        let a = phase_gram(&point.phi);
        AuxiliarySet { lift, pu, su, a, ser }
    }

    fn projected(&self, model: &Model, f: &[C64], su: bool) -> Vec<C64> {
        match self.lift.u {
            ULift::Full => f.to_vec(),
            ULift::Compact if !su => model.group_sums(f),
            ULift::Compact => {
                let mut g = vec![C64::new(0.0, 0.0); model.su_levels[0].len()];
                for (m, v) in f.iter().enumerate() {
                    g[model.su_group[m]] += v;
                }
                g
            }
        }
    }

    /// Level indicators matching the storage of `U`.
    fn indicator(&self, model: &Model, q: usize, su: bool) -> Vec<bool> {
        match (self.lift.u, su) {
            (ULift::Compact, false) => model.levels[q].clone(),
            (ULift::Compact, true) => model.su_levels[q].clone(),
            (ULift::Full, false) => model.patterns[q].clone(),
            (ULift::Full, true) => model.su_patterns[q].clone(),
        }
    }

    /// Lifted `P_{q,k,j}` read from `U`.
    pub fn pu_power(&self, model: &Model, q: usize, k: usize, j: usize) -> f64 {
        level_power(&self.pu[k * model.n_pu + j].u, &self.indicator(model, q, false))
    }

    /// Lifted secondary-user level powers read from `U`.
    pub fn su_powers(&self, model: &Model) -> Vec<f64> {
        (0..model.su_patterns.len())
            .map(|q| {
                let on = self.indicator(model, q, true);
                self.su.iter().map(|l| level_power(&l.u, &on)).sum()
            })
            .collect()
    }

    pub fn lift_residuals(&self, model: &Model, point: &Point) -> LiftResiduals {
        let mut r = LiftResiduals::default();
        let links = self
            .pu
            .iter()
            .enumerate()
            .map(|(i, l)| (l, &model.c_pu[i / model.n_pu], &point.w[i % model.n_pu], false))
            .chain(self.su.iter().enumerate().map(|(k, l)| (l, &model.c_su, &point.w[k], true)));
        for (l, c, w, su) in links {
            let g = self.projected(model, &l.f, su);
            let d = &l.u - outer(&g);
            let nu = l.u.norm();
            if nu > 0.0 {
                r.u_rel = r.u_rel.max(d.norm() / nu);
            } else if d.norm() > 0.0 {
                r.u_rel = f64::INFINITY;
            }
            let target = Model::product(&point.phi, c, w);
            let tn: f64 = target.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let dn: f64 = target.iter().zip(&l.f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if tn > 0.0 {
                r.f_rel = r.f_rel.max(dn / tn);
            }
        }
        if model.optimizes_phases() {
            r.a_abs = (&self.a - phase_gram(&point.phi)).norm();
        }
        r
    }

    /// Violations of the SER rows in their original, unlinearized form,
    /// evaluated at these values. Positive entries are violations.
    pub fn original_ser_violations(&self, model: &Model, p_target: f64) -> Vec<(String, f64)> {
        let Some(s) = &self.ser else { return Vec::new() };
        let l = model.frame_len as f64;
        let p = self.su_powers(model);
        let nu = model.nu_su;
        let mut out = vec![("C2a".to_string(), s.tail_sum() - p.len() as f64 * p_target)];
        for h in 0..s.gamma.len() {
            let (lo, hi) = (p[h], p[h + 1]);
            let ln_one_minus = (1.0 - s.gamma[h]).ln();
            out.push((format!("C2b1[{h}]"), ln_one_minus - (-l * s.eps_gamma1[h] + s.ln_xi_gamma[h])));
            let bound = ln_partial_exp_sum(model.frame_len, l * s.eps_gamma2[h].max(0.0));
            out.push((format!("C2b2[{h}]"), s.ln_xi_gamma[h] - bound));
            let e1 = s.eps_gamma1[h];
            out.push((format!("C2b3[{h}]"), hi - lo + (e1 - hi - nu).powi(2) - e1 * e1 - (hi + nu).powi(2)));
            let e2 = s.eps_gamma2[h];
            out.push((format!("C2b4[{h}]"), -(hi - lo - (e2 + hi + nu).powi(2) + e2 * e2 + (hi + nu).powi(2))));
            out.push((
                format!("C2c1[{h}]"),
                -l * s.eps_big1[h] + s.ln_xi_big[h] - s.big_gamma[h].ln(),
            ));
            let poly = ln_partial_exp_sum(model.frame_len, l * s.eps_big2[h].max(0.0));
            out.push((format!("C2c2[{h}]"), poly - s.ln_xi_big[h]));
            let e1 = s.eps_big1[h];
            out.push((format!("C2c3[{h}]"), -(hi - lo - (e1 + lo + nu).powi(2) + e1 * e1 + (lo + nu).powi(2))));
            let e2 = s.eps_big2[h];
            out.push((format!("C2c4[{h}]"), hi - lo + (e2 - lo - nu).powi(2) - e2 * e2 - (lo + nu).powi(2)));
        }
        out
    }
}

/// `ln(1 − γ)` at a consistent point, stable for `γ` near one.
pub fn ln_one_minus_gamma(frame_len: usize, eps: f64) -> f64 {
    ln_reg_upper_gamma(frame_len, frame_len as f64 * eps)
}
