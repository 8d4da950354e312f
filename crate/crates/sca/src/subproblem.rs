//! Convex subproblem around an anchor point.

use crate::lifted::{AuxiliarySet, LinkLift, SerAux};
use crate::model::{ALift, LiftOptions, Model, Point, SchurForm, ULift};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use symbiosr_conic::{CExpr, ConicError, ConicProgram, LinExpr, Var};
use symbiosr_core::ser::{ln_factorial, ln_partial_exp_sum};

/// What the subproblem optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    /// Average sum rate of the primary users.
    SumRate,
    /// Smallest tail sum of the secondary user, ignoring the primary users.
    Restore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    pub goal: Goal,
    pub lift: LiftOptions,
    /// Weight of the slack penalty on the rank-one rows.
    pub rho: f64,
    /// SER target used by the tail-sum cap.
    pub p_target: f64,
}

const TINY: f64 = 1e-12;
/// Floor on the anchor value of an upper tail used as its unit.
const TAIL_FLOOR: f64 = 1e-250;

/// Constants of the first-order expansions at an anchor.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub point: Point,
    pub aux: AuxiliarySet,
    /// Anchor `P_{q,k,j}`, indexed `[q][k][j]`.
    pub pu_power: Vec<Vec<Vec<f64>>>,
    pub su_power: Vec<f64>,
    pub frame_len: usize,
}

impl Linearization {
    pub fn new(model: &Model, point: &Point, aux: &AuxiliarySet) -> Self {
        let k = model.n_pu;
        let pu_power = (0..model.n_patterns())
            .map(|q| (0..k).map(|u| (0..k).map(|j| aux.pu_power(model, q, u, j)).collect()).collect())
            .collect();
        let su_power = if aux.su.is_empty() { Vec::new() } else { aux.su_powers(model) };
        Linearization { point: point.clone(), aux: aux.clone(), pu_power, su_power, frame_len: model.frame_len }
    }

    fn ser(&self) -> &SerAux {
        self.aux.ser.as_ref().expect("anchor has no SER variables")
    }

    /// Tangent of `ln(1 − γ)` at the anchor of pair `h`, evaluated at `gamma`.
    pub fn upsilon(&self, h: usize, gamma: f64) -> f64 {
        let (c, slope) = self.upsilon_coeffs(h);
        c + slope * gamma
    }

    /// `(constant, slope)` of the tangent, so that `Υ(γ) = constant + slope·γ`.
    fn upsilon_coeffs(&self, h: usize) -> (f64, f64) {
        let s = self.ser();
        let g0 = s.gamma[h];
        let q0 = 1.0 - g0;
        let ln_q0 = crate::lifted::ln_one_minus_gamma(self.frame_len, s.eps_gamma1[h]);
        // The stable logarithm and the direct complement agree unless γ is close to one.
        let q0 = if q0 > 1e-300 { q0 } else { ln_q0.exp().max(1e-300) };
        (ln_q0 + g0 / q0, -1.0 / q0)
    }

    /// Lower tangent of `Σ_{l<L} (Lε)^l / l!` at the anchor of pair `h`,
    /// in units of its anchor value.
    pub fn c2b2_rhs(&self, h: usize, eps: f64) -> f64 {
        let (c, slope) = self.c2b2_coeffs(h);
        c + slope * eps
    }

    fn c2b2_coeffs(&self, h: usize) -> (f64, f64) {
        let s = self.ser();
        let l = self.frame_len as f64;
        let e0 = s.eps_gamma2[h].max(0.0);
        let ratio = if self.frame_len > 1 {
            (ln_partial_exp_sum(self.frame_len - 1, l * e0) - ln_partial_exp_sum(self.frame_len, l * e0)).exp()
        } else {
            0.0
        };
        // ξ̂ ≤ 1 + ratio · L (ε − ε0), with ξ measured against S(Lε0).
        let ln_s0 = ln_partial_exp_sum(self.frame_len, l * e0);
        let rel = (ln_s0 - s.ln_xi_gamma[h]).exp();
        (rel * (1.0 - ratio * l * e0), rel * ratio * l)
    }
}

#[derive(Debug, Clone)]
struct LinkVars {
    f: Vec<CExpr>,
    f_var: Option<Var>,
    u: Var,
    c: Option<Var>,
}

#[derive(Debug, Clone)]
struct SerVars {
    gamma: Var,
    xi_g: Var,
    eg1: Var,
    eg2: Var,
    big: Var,
    xi_b: Var,
    eb1: Var,
    eb2: Var,
    /// Anchor values: `ln ξ^γ`, `ln ξ^Γ`, and the scale of `Γ`.
    ln_xi_g0: Vec<f64>,
    ln_xi_b0: Vec<f64>,
    big_scale: Vec<f64>,
}

/// Assembled program plus the handles needed to read a solution back.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub goal: Goal,
    lift: LiftOptions,
    w: Var,
    phi: Option<Var>,
    a: Option<Var>,
    pu: Vec<LinkVars>,
    su: Vec<LinkVars>,
    t: Option<Var>,
    ser: Option<SerVars>,
    slacks: Vec<Var>,
    fixed_phi: Vec<C64>,
}

fn cvec(x: &[f64], v: &Var) -> Vec<C64> {
    v.complex_value(x)
}

fn level_expr(u: &Var, on: &[bool]) -> LinExpr {
    let mut e = LinExpr::zero();
    for (r, &a) in on.iter().enumerate() {
        if !a {
            continue;
        }
        e += u.herm(r, r).re;
        for (s, &b) in on.iter().enumerate().skip(r + 1) {
            if b {
                e += u.herm(r, s).re * 2.0;
            }
        }
    }
    e
}

fn sq_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

struct Builder<'a> {
    model: &'a Model,
    lin: &'a Linearization,
    opts: AssembleOptions,
    p: ConicProgram,
    slacks: Vec<Var>,
    penalty: LinExpr,
}

impl<'a> Builder<'a> {
    /// `C w_j` as expressions.
    fn amplitudes(&self, w: &Var, c: &DMatrix<C64>, j: usize) -> Vec<CExpr> {
        let n = self.model.n_tx;
        (0..c.nrows())
            .map(|m| (0..n).map(|t| w.entry(j * n + t).scale(c[(m, t)])).sum())
            .collect()
    }

    fn slack(&mut self, name: &str) -> Result<LinExpr, ConicError> {
        let s = self.p.add_scalar(name)?;
        self.p.add_nonneg(&format!("{name}.slack"), s.scalar())?;
        self.slacks.push(s);
        self.penalty += s.scalar();
        Ok(s.scalar())
    }

    /// Lift of one product with its bordered blocks and trace rows.
    /// `labels` names the four row families in order.
    #[allow(clippy::too_many_arguments)]
    fn link(
        &mut self,
        tag: &str,
        labels: [&str; 4],
        b: &[CExpr],
        b0: &[C64],
        phi: Option<&Var>,
        groups: &[usize],
        n_groups: usize,
        anchor: &LinkLift,
    ) -> Result<LinkVars, ConicError> {
        let m = self.model.n_irs;
        let lift = self.opts.lift;
        let (f, f_var) = match phi {
            Some(_) => {
                let v = self.p.add_complex_vector(&format!("f{tag}"), m)?;
                ((0..m).map(|i| v.entry(i)).collect::<Vec<_>>(), Some(v))
            }
            None => {
                let phi0 = self.model.fixed_phi.as_ref().expect("fixed phases");
                (b.iter().zip(phi0).map(|(e, p)| e.scale(*p)).collect(), None)
            }
        };
        let dim = match lift.u {
            ULift::Full => m,
            ULift::Compact => n_groups,
        };
        let u = self.p.add_hermitian(&format!("U{tag}"), dim)?;
        let g: Vec<CExpr> = match lift.u {
            ULift::Full => f.clone(),
            ULift::Compact => {
                let mut g = vec![CExpr::zero(); n_groups];
                for (i, e) in f.iter().enumerate() {
                    g[groups[i]] += e;
                }
                g
            }
        };
        let one = CExpr::real(LinExpr::constant(1.0));
        self.p.add_psd(&format!("{}{tag}", labels[0]), dim + 1, |i, j| {
            if j < dim {
                u.herm(i, j)
            } else if i < dim {
                g[i].clone()
            } else {
                one.clone()
            }
        })?;

        // Tr(U) ≤ −‖f0‖² + 2 Re⟨f0, f⟩ + scale · s
        let f0 = &anchor.f;
        let scale = sq_norm(f0).max(TINY);
        let mut lhs = LinExpr::zero();
        let mut terms = Vec::new();
        match lift.u {
            ULift::Full => {
                for i in 0..dim {
                    lhs += u.herm(i, i).re;
                }
            }
            ULift::Compact => {
                let mut sizes = vec![0usize; n_groups];
                for &r in groups {
                    sizes[r] += 1;
                }
                for (r, &n) in sizes.iter().enumerate() {
                    lhs += u.herm(r, r).re * (1.0 / n as f64);
                }
                // Energy of f orthogonal to the group indicators.
                for i in 0..m {
                    let r = groups[i];
                    if sizes[r] < 2 {
                        continue;
                    }
                    let mut d = f[i].clone();
                    for (l, e) in f.iter().enumerate() {
                        if groups[l] == r {
                            d = d - e.clone() * (1.0 / sizes[r] as f64);
                        }
                    }
                    terms.push(d.re);
                    terms.push(d.im);
                }
            }
        }
        let mut rhs = LinExpr::constant(-sq_norm(f0));
        for (e, z) in f.iter().zip(f0) {
            rhs += e.re_dot(*z) * 2.0;
        }
        let label = format!("{}{tag}", labels[1]);
        let s = self.slack(&label)?;
        rhs += s * scale;
        if terms.is_empty() {
            self.p.add_le(&label, lhs, rhs)?;
        } else {
            self.p.add_quad_le(&label, terms, rhs - lhs)?;
        }

        let c = match phi {
            Some(phi) => Some(self.schur(tag, [labels[2], labels[3]], &f, b, b0, phi)?),
            None => None,
        };
        Ok(LinkVars { f, f_var, u, c })
    }

    /// `[[A, f, Φ], [fᴴ, c, bᴴ], [Φᴴ, b, I]] ⪰ 0` and its trace row.
    fn schur(
        &mut self,
        tag: &str,
        labels: [&str; 2],
        f: &[CExpr],
        b: &[CExpr],
        b0: &[C64],
        phi: &Var,
    ) -> Result<Var, ConicError> {
        let m = self.model.n_irs;
        let lift = self.opts.lift;
        let a = self.a_var();
        let a_entry = |i: usize, j: usize| -> CExpr {
            match lift.a {
                ALift::Full => a.herm(i, j),
                ALift::Diagonal if i == j => CExpr::real(a.at(i)),
                ALift::Diagonal => CExpr::zero(),
            }
        };
        let zero = CExpr::zero();
        let one = CExpr::real(LinExpr::constant(1.0));
        let c = match lift.schur {
            SchurForm::Block => {
                let c = self.p.add_scalar(&format!("c{tag}"))?;
                let n = 2 * m + 1;
                self.p.add_psd(&format!("{}{tag}", labels[0]), n, |i, j| {
                    if i < m {
                        if j < m {
                            a_entry(i, j)
                        } else if j == m {
                            f[i].clone()
                        } else if j - m - 1 == i {
                            phi.entry(i)
                        } else {
                            zero.clone()
                        }
                    } else if i == m {
                        if j == m {
                            CExpr::real(c.scalar())
                        } else {
                            b[j - m - 1].clone().conj()
                        }
                    } else if i == j {
                        one.clone()
                    } else {
                        zero.clone()
                    }
                })?;
                c
            }
            SchurForm::Chordal => {
                assert!(lift.a == ALift::Diagonal, "the split blocks need a diagonal A");
                let c = self.p.add_real_vector(&format!("c{tag}"), m)?;
                for i in 0..m {
                    let entries = [
                        a_entry(i, i),
                        f[i].clone(),
                        phi.entry(i),
                        CExpr::real(c.at(i)),
                        b[i].clone().conj(),
                        one.clone(),
                    ];
                    self.p.add_psd(&format!("{}{tag}[{i}]", labels[0]), 3, |r, s| {
                        let k = match (r, s) {
                            (0, 0) => 0,
                            (0, 1) => 1,
                            (0, 2) => 2,
                            (1, 1) => 3,
                            (1, 2) => 4,
                            _ => 5,
                        };
                        entries[k].clone()
                    })?;
                }
                c
            }
        };

        // Tr(A) + c ≤ −‖E0‖² + 2 Re⟨E0, E⟩ + scale · s, E = [Φ; bᴴ]
        let lin = self.lin;
        let phi0 = &lin.point.phi;
        let e0 = sq_norm(phi0) + sq_norm(b0);
        let mut lhs = LinExpr::zero();
        for i in 0..m {
            lhs += a_entry(i, i).re;
        }
        match lift.schur {
            SchurForm::Block => lhs += c.scalar(),
            SchurForm::Chordal => {
                for i in 0..m {
                    lhs += c.at(i);
                }
            }
        }
        let mut rhs = LinExpr::constant(-e0);
        for i in 0..m {
            rhs += phi.entry(i).re_dot(phi0[i]) * 2.0;
            rhs += b[i].re_dot(b0[i]) * 2.0;
        }
        let label = format!("{}{tag}", labels[1]);
        let s = self.slack(&label)?;
        rhs += s * e0.max(TINY);
        self.p.add_le(&label, lhs, rhs)?;
        Ok(c)
    }

    fn a_var(&mut self) -> Var {
        let m = self.model.n_irs;
        match self.p.var("A") {
            Some(v) => v,
            None => {
                let v = match self.opts.lift.a {
                    ALift::Full => self.p.add_hermitian("A", m),
                    ALift::Diagonal => self.p.add_real_vector("A", m),
                }
                .expect("fresh name");
                for i in 0..m {
                    let d = match self.opts.lift.a {
                        ALift::Full => v.herm(i, i).re,
                        ALift::Diagonal => v.at(i),
                    };
                    self.p.add_le(&format!("C3b[{i}]"), LinExpr::constant(1.0), d).expect("valid row");
                }
                v
            }
        }
    }
}

/// Builds the convex subproblem around `lin`.
pub fn assemble_subproblem(model: &Model, lin: &Linearization, opts: AssembleOptions) -> Result<Subproblem, ConicError> {
    assert_eq!(lin.aux.lift, opts.lift, "anchor lift differs from the requested one");
    let mut b = Builder { model, lin, opts, p: ConicProgram::new(), slacks: Vec::new(), penalty: LinExpr::zero() };
    let k = model.n_pu;
    let m = model.n_irs;
    let n = model.n_tx;

    let w = b.p.add_complex_vector("w", k * n)?;
    let mut stacked = Vec::with_capacity(2 * k * n);
    for i in 0..k * n {
        let e = w.entry(i);
        stacked.push(e.re);
        stacked.push(e.im);
    }
    b.p.add_soc("C1", LinExpr::constant(1.0), stacked)?;

    let phi = if model.optimizes_phases() {
        let v = b.p.add_complex_vector("phi", m)?;
        for i in 0..m {
            let e = v.entry(i);
            b.p.add_soc(&format!("C3a[{i}]"), LinExpr::constant(1.0), vec![e.re, e.im])?;
        }
        Some(v)
    } else {
        None
    };

    let mut pu = Vec::new();
    if opts.goal == Goal::SumRate {
        for u in 0..k {
            for j in 0..k {
                let amp = b.amplitudes(&w, &model.c_pu[u], j);
                let b0 = Model::amplitudes(&model.c_pu[u], &lin.point.w[j]);
                let anchor = &lin.aux.pu[u * k + j];
                let tag = format!("[{u},{j}]");
                let labels = ["C4a", "C4b", "C4c", "C4d"];
                pu.push(b.link(&tag, labels, &amp, &b0, phi.as_ref(), &model.group, model.n_groups(), anchor)?);
            }
        }
    }

    let mut su = Vec::new();
    let mut ser = None;
    if model.has_su() {
        let n_groups = model.su_levels[0].len();
        for j in 0..k {
            let amp = b.amplitudes(&w, &model.c_su, j);
            let b0 = Model::amplitudes(&model.c_su, &lin.point.w[j]);
            let anchor = &lin.aux.su[j];
            let labels = ["C2d1", "C2d2", "C2d3", "C2d4"];
            su.push(b.link(&format!("[{j}]"), labels, &amp, &b0, phi.as_ref(), &model.su_group, n_groups, anchor)?);
        }
        ser = Some(ser_rows(&mut b, model, lin, &su)?);
    }

    let t = if opts.goal == Goal::SumRate {
        let npat = model.n_patterns();
        let t = b.p.add_real_vector("t", npat * k)?;
        let mut obj = LinExpr::zero();
        let ln2 = std::f64::consts::LN_2;
        for q in 0..npat {
            let on = match opts.lift.u {
                ULift::Full => &model.patterns[q],
                ULift::Compact => &model.levels[q],
            };
            for u in 0..k {
                let nu = model.nu_pu[u];
                let mut total = LinExpr::constant(nu);
                let mut interference = LinExpr::zero();
                let mut i0 = 0.0;
                for j in 0..k {
                    let p = level_expr(&pu[u * k + j].u, on);
                    total += &p;
                    if j != u {
                        interference += p;
                        i0 += lin.pu_power[q][u][j];
                    }
                }
                b.p.add_log_hypo(&format!("rate[{q},{u}]"), t.at(q * k + u), total)?;
                let d = i0 + nu;
                obj += t.at(q * k + u) * (1.0 / ln2);
                obj += -d.log2();
                obj += (interference - i0) * (-1.0 / (ln2 * d));
            }
        }
        let obj = obj * (1.0 / npat as f64) - b.penalty.clone() * opts.rho;
        b.p.maximize(obj)?;
        Some(t)
    } else {
        let s = ser.as_ref().expect("restoration needs the SER rows");
        let mut tail = LinExpr::zero();
        for h in 0..model.n_pairs() {
            tail += s.gamma.at(h);
            tail += s.big.at(h) * s.big_scale[h];
        }
        let obj = -tail - b.penalty.clone() * opts.rho;
        b.p.maximize(obj)?;
        None
    };

    let fixed_phi = model.fixed_phi.clone().unwrap_or_default();
    let a = b.p.var("A");
    let mut sp = Subproblem {
        program: b.p,
        goal: opts.goal,
        lift: opts.lift,
        w,
        phi,
        a,
        pu,
        su,
        t,
        ser,
        slacks: b.slacks,
        fixed_phi,
    };
    let x0 = sp.anchor_values(model, lin);
    sp.program.set_warm_start(x0)?;
    Ok(sp)
}

fn ser_rows(b: &mut Builder, model: &Model, lin: &Linearization, su: &[LinkVars]) -> Result<SerVars, ConicError> {
    let nh = model.n_pairs();
    let s0 = lin.ser().clone();
    let lf = model.frame_len;
    let l = lf as f64;
    let nu = model.nu_su;
    let lift_u = b.opts.lift.u;
    let on = |q: usize| match lift_u {
        ULift::Full => model.su_patterns[q].clone(),
        ULift::Compact => model.su_levels[q].clone(),
    };
    let level = |q: usize| -> LinExpr { su.iter().map(|v| level_expr(&v.u, &on(q))).sum() };
    let p0 = &lin.su_power;
    let goal = b.opts.goal;
    let p_target = b.opts.p_target;

    let p = &mut b.p;
    let gamma = p.add_real_vector("gamma", nh)?;
    let xi_g = p.add_real_vector("xi_gamma", nh)?;
    let eg1 = p.add_real_vector("eps_gamma1", nh)?;
    let eg2 = p.add_real_vector("eps_gamma2", nh)?;
    let big = p.add_real_vector("Gamma", nh)?;
    let xi_b = p.add_real_vector("xi_Gamma", nh)?;
    let eb1 = p.add_real_vector("eps_Gamma1", nh)?;
    let eb2 = p.add_real_vector("eps_Gamma2", nh)?;
    // The scale also bounds how far the variable can run before the tail
    // cap notices it, so it never drops far below the target.
    let big_floor = (1e-6 * p_target).max(TAIL_FLOOR);
    let big_scale: Vec<f64> = s0.big_gamma.iter().map(|g| g.max(big_floor)).collect();

    let mut tail = LinExpr::zero();
    for h in 0..nh {
        tail += gamma.at(h);
        tail += big.at(h) * big_scale[h];
    }
    if goal == Goal::SumRate {
        // Never tighter than the anchor itself, so the anchor stays feasible
        // after the target has been shrunk.
        let cap = ((nh + 1) as f64 * p_target).max(s0.tail_sum());
        p.add_le("C2a", tail, LinExpr::constant(cap))?;
    }

    for h in 0..nh {
        let lo = level(h);
        let hi = level(h + 1);
        let (lo0, hi0) = (p0[h], p0[h + 1]);
        let gap = hi.clone() - lo.clone();

        // γ family: lower tail of level h + 1.
        let (uc, us) = lin.upsilon_coeffs(h);
        let t1 = eg1.at(h) * l - s0.ln_xi_gamma[h] + (gamma.at(h) * us + uc);
        p.add_log_hypo(&format!("C2b1[{h}]"), t1, xi_g.at(h))?;
        let (cc, cs) = lin.c2b2_coeffs(h);
        p.add_le(&format!("C2b2[{h}]"), xi_g.at(h), eg2.at(h) * cs + cc)?;
        let a0 = hi0 + nu;
        let sa = a0.sqrt();
        let e0 = s0.eps_gamma1[h];
        let rhs = (-gap.clone() + e0 * e0 + (eg1.at(h) - e0) * (2.0 * e0) + a0 * a0 + (hi.clone() - hi0) * (2.0 * a0)) * (1.0 / a0);
        p.add_quad_le(&format!("C2b3[{h}]"), vec![(eg1.at(h) - hi.clone() - nu) * (1.0 / sa)], rhs)?;
        let e0 = s0.eps_gamma2[h];
        let rhs = (gap.clone() + e0 * e0 + (eg2.at(h) - e0) * (2.0 * e0) + a0 * a0 + (hi.clone() - hi0) * (2.0 * a0)) * (1.0 / a0);
        p.add_quad_le(&format!("C2b4[{h}]"), vec![(eg2.at(h) + hi.clone() + nu) * (1.0 / sa)], rhs)?;

        // Γ family: upper tail of level h, Γ stored in units of its anchor.
        let ln_s = big_scale[h].ln();
        let t1 = eb1.at(h) * (-l) + s0.ln_xi_big[h] + xi_b.at(h) - 1.0 - ln_s;
        p.add_log_hypo(&format!("C2c1[{h}]"), t1, big.at(h))?;
        let coeffs: Vec<f64> = (0..lf).map(|i| i as f64 * l.ln() - ln_factorial(i) - s0.ln_xi_big[h]).collect();
        p.add_poly_epi(&format!("C2c2[{h}]"), coeffs, eb2.at(h), xi_b.at(h))?;
        let b0 = lo0 + nu;
        let sb = b0.sqrt();
        let e0 = s0.eps_big1[h];
        let rhs = (gap.clone() + e0 * e0 + (eb1.at(h) - e0) * (2.0 * e0) + b0 * b0 + (lo.clone() - lo0) * (2.0 * b0)) * (1.0 / b0);
        p.add_quad_le(&format!("C2c3[{h}]"), vec![(eb1.at(h) + lo.clone() + nu) * (1.0 / sb)], rhs)?;
        let e0 = s0.eps_big2[h];
        let rhs = (-gap + e0 * e0 + (eb2.at(h) - e0) * (2.0 * e0) + b0 * b0 + (lo.clone() - lo0) * (2.0 * b0)) * (1.0 / b0);
        p.add_quad_le(&format!("C2c4[{h}]"), vec![(eb2.at(h) - lo - nu) * (1.0 / sb)], rhs)?;

        for (name, v) in [("C2b", &eg1), ("C2b", &eg2), ("C2c", &eb1), ("C2c", &eb2)] {
            p.add_nonneg(&format!("{name}.eps[{h}]"), v.at(h))?;
        }
    }
    Ok(SerVars {
        gamma,
        xi_g,
        eg1,
        eg2,
        big,
        xi_b,
        eb1,
        eb2,
        ln_xi_g0: s0.ln_xi_gamma.clone(),
        ln_xi_b0: s0.ln_xi_big.clone(),
        big_scale,
    })
}

impl Subproblem {
    /// Point of the program matching the anchor: slacks zero, every lifted
    /// row tight.
    pub fn anchor_values(&self, model: &Model, lin: &Linearization) -> Vec<f64> {
        let mut x = vec![0.0; self.program.n_real()];
        let wv: Vec<C64> = lin.point.w.iter().flat_map(|w| w.iter().copied()).collect();
        self.w.set_complex(&mut x, &wv);
        if let Some(phi) = &self.phi {
            phi.set_complex(&mut x, &lin.point.phi);
        }
        if let Some(a) = &self.a {
            match self.lift.a {
                ALift::Full => a.set_hermitian(&mut x, &lin.aux.a),
                ALift::Diagonal => {
                    for i in 0..a.len() {
                        x[a.offset + i] = lin.aux.a[(i, i)].re;
                    }
                }
            }
        }
        let set_link = |x: &mut Vec<f64>, v: &LinkVars, l: &LinkLift| {
            if let Some(f) = &v.f_var {
                f.set_complex(x, &l.f);
            }
            v.u.set_hermitian(x, &l.u);
            if let Some(c) = &v.c {
                for (i, val) in l.c.iter().enumerate() {
                    x[c.offset + i] = *val;
                }
            }
        };
        for (v, l) in self.pu.iter().zip(&lin.aux.pu) {
            set_link(&mut x, v, l);
        }
        for (v, l) in self.su.iter().zip(&lin.aux.su) {
            set_link(&mut x, v, l);
        }
        if let (Some(s), Some(a)) = (&self.ser, &lin.aux.ser) {
            for h in 0..a.gamma.len() {
                x[s.gamma.offset + h] = a.gamma[h];
                x[s.xi_g.offset + h] = 1.0;
                x[s.eg1.offset + h] = a.eps_gamma1[h];
                x[s.eg2.offset + h] = a.eps_gamma2[h];
                x[s.big.offset + h] = a.big_gamma[h] / s.big_scale[h];
                x[s.xi_b.offset + h] = 1.0;
                x[s.eb1.offset + h] = a.eps_big1[h];
                x[s.eb2.offset + h] = a.eps_big2[h];
            }
        }
        if let Some(t) = &self.t {
            let k = model.n_pu;
            for q in 0..model.n_patterns() {
                for u in 0..k {
                    let total: f64 = lin.pu_power[q][u].iter().sum::<f64>() + model.nu_pu[u];
                    x[t.offset + q * k + u] = total.ln();
                }
            }
        }
        x
    }

    /// Sum of the penalty slacks at `x`.
    pub fn slack_total(&self, x: &[f64]) -> f64 {
        self.slacks.iter().map(|s| s.scalar().eval(x)).sum()
    }

    /// Reads precoders and coefficients back; magnitudes are left as solved.
    pub fn extract_point(&self, model: &Model, x: &[f64]) -> Point {
        let n = model.n_tx;
        let wv = cvec(x, &self.w);
        let w = (0..model.n_pu).map(|j| DVector::from_column_slice(&wv[j * n..(j + 1) * n])).collect();
        let phi = match &self.phi {
            Some(v) => cvec(x, v),
            None => self.fixed_phi.clone(),
        };
        Point { w, phi }
    }

    /// Auxiliary values as solved.
    pub fn extract_aux(&self, model: &Model, x: &[f64]) -> AuxiliarySet {
        let m = model.n_irs;
        let read = |v: &LinkVars| LinkLift {
            f: v.f.iter().map(|e| e.eval(x)).collect(),
            u: v.u.hermitian_value(x),
            c: match &v.c {
                Some(c) => (0..c.len()).map(|i| c.at(i).eval(x)).collect(),
                None => Vec::new(),
            },
        };
        let a = match (&self.a, self.lift.a) {
            (Some(a), ALift::Full) => a.hermitian_value(x),
            (Some(a), ALift::Diagonal) => {
                DMatrix::from_diagonal(&DVector::from_iterator(m, (0..m).map(|i| C64::new(x[a.offset + i], 0.0))))
            }
            (None, _) => {
                let p = &self.fixed_phi;
                DMatrix::from_fn(m, m, |i, j| p[i] * p[j].conj())
            }
        };
        let ser = self.ser.as_ref().map(|s| {
            let nh = s.big_scale.len();
            let get = |v: &Var| -> Vec<f64> { (0..nh).map(|h| x[v.offset + h]).collect() };
            SerAux {
                gamma: get(&s.gamma),
                ln_xi_gamma: get(&s.xi_g).iter().zip(&s.ln_xi_g0).map(|(v, l)| v.ln() + l).collect(),
                eps_gamma1: get(&s.eg1),
                eps_gamma2: get(&s.eg2),
                big_gamma: get(&s.big).iter().zip(&s.big_scale).map(|(v, c)| v * c).collect(),
                ln_xi_big: get(&s.xi_b).iter().zip(&s.ln_xi_b0).map(|(v, l)| v.ln() + l).collect(),
                eps_big1: get(&s.eb1),
                eps_big2: get(&s.eb2),
            }
        });
        AuxiliarySet { lift: self.lift, pu: self.pu.iter().map(read).collect(), su: self.su.iter().map(read).collect(), a, ser }
    }
}
