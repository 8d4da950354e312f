//! Random mixed-cone programs with an optimum certified by hand-built KKT
//! multipliers, plus a central-cut ellipsoid method used as a slow reference.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symbiosr_conic::{CExpr, ConeKind, ConicProgram, LinExpr};

pub const N: usize = 20;

pub struct Instance {
    pub program: ConicProgram,
    pub x_star: Vec<f64>,
    pub optimum: f64,
    pub box_radius: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller keeps the generator self-contained.
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn affine(a: &[f64], b: f64) -> LinExpr {
    let mut e = LinExpr::constant(b);
    for (i, &c) in a.iter().enumerate() {
        e.add_term(i, c);
    }
    e
}

fn axpy(acc: &mut [f64], s: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

/// Builds instance `seed`. The objective `c` is assembled from multipliers
/// on the active constraints so that `x_star` satisfies the KKT conditions.
pub fn kkt_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = rand_vec(&mut rng, N).iter().map(|v| 0.5 * v).collect();
    let mut p = ConicProgram::new();
    p.add_real_vector("v", 12).unwrap();
    p.add_complex_vector("z", 4).unwrap();
    // c = Σ μ_i ∇(−g_i) for g_i ≤ 0 written as cone constraints; the sign is
    // fixed per family below.
    let mut c = vec![0.0; N];
    let mult = |rng: &mut ChaCha8Rng| 0.5 + 1.5 * rng.random::<f64>();

    // Linear inequalities aᵀx ≤ b.
    for k in 0..3 {
        let a = rand_vec(&mut rng, N);
        let active = k < 2;
        let b = dot(&a, &xs) + if active { 0.0 } else { 0.5 + rng.random::<f64>() };
        p.add_nonneg(&format!("lin{k}"), affine(&a, 0.0) * -1.0 + b).unwrap();
        if active {
            axpy(&mut c, -mult(&mut rng), &a);
        }
    }

    // One equality.
    let e = rand_vec(&mut rng, N);
    let eb = dot(&e, &xs);
    p.add_eq("eq", affine(&e, -eb)).unwrap();
    axpy(&mut c, normal(&mut rng), &e);

    // Second-order cones ‖B x + d‖ ≤ fᵀx + h.
    for k in 0..2 {
        let m = 3 + k;
        let rows: Vec<Vec<f64>> = (0..m).map(|_| rand_vec(&mut rng, N)).collect();
        let d = rand_vec(&mut rng, m);
        let f = rand_vec(&mut rng, N);
        let bx: Vec<f64> = rows.iter().zip(&d).map(|(r, di)| dot(r, &xs) + di).collect();
        let nrm = bx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let active = k == 0;
        let h = nrm - dot(&f, &xs) + if active { 0.0 } else { 1.0 };
        p.add_soc(&format!("soc{k}"), affine(&f, h), rows.iter().zip(&d).map(|(r, di)| affine(r, *di)).collect())
            .unwrap();
        if active {
            let mu = mult(&mut rng);
            let mut grad = vec![0.0; N];
            for (r, v) in rows.iter().zip(&bx) {
                axpy(&mut grad, v / nrm, r);
            }
            axpy(&mut grad, -1.0, &f);
            axpy(&mut c, -mu, &grad);
        }
    }

    // Convex quadratic ‖F x + h‖² ≤ gᵀx + k, active.
    {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, N).iter().map(|v| 0.5 * v).collect()).collect();
        let h = rand_vec(&mut rng, 3);
        let g = rand_vec(&mut rng, N);
        let fx: Vec<f64> = rows.iter().zip(&h).map(|(r, hi)| dot(r, &xs) + hi).collect();
        let k = fx.iter().map(|v| v * v).sum::<f64>() - dot(&g, &xs);
        p.add_quad_le("quad", rows.iter().zip(&h).map(|(r, hi)| affine(r, *hi)).collect(), affine(&g, k)).unwrap();
        let mut grad = vec![0.0; N];
        for (r, v) in rows.iter().zip(&fx) {
            axpy(&mut grad, 2.0 * v, r);
        }
        axpy(&mut grad, -1.0, &g);
        axpy(&mut c, -mult(&mut rng), &grad);
    }

    // Log hypograph aᵀx + α ≤ ln(bᵀx + β), active.
    {
        let a = rand_vec(&mut rng, N);
        let b: Vec<f64> = rand_vec(&mut rng, N).iter().map(|v| 0.3 * v).collect();
        let arg = 0.5 + 2.0 * rng.random::<f64>();
        let beta = arg - dot(&b, &xs);
        let alpha = arg.ln() - dot(&a, &xs);
        p.add_log_hypo("log", affine(&a, alpha), affine(&b, beta)).unwrap();
        let mut grad = a.clone();
        axpy(&mut grad, -1.0 / arg, &b);
        axpy(&mut c, -mult(&mut rng), &grad);
    }

    // Polynomial epigraph Σ u^l / l! ≤ hᵀx + k with u = aᵀx + b > 0, active.
    {
        let lc: Vec<f64> = (0..7).map(|l| -(1..=l).map(|i| (i as f64).ln()).sum::<f64>()).collect();
        let a: Vec<f64> = rand_vec(&mut rng, N).iter().map(|v| 0.3 * v).collect();
        let u0 = 0.2 + 1.3 * rng.random::<f64>();
        let b = u0 - dot(&a, &xs);
        let hv = rand_vec(&mut rng, N);
        let pu: f64 = lc.iter().enumerate().map(|(l, c)| (c + l as f64 * u0.ln()).exp()).sum();
        let dp: f64 = lc.iter().enumerate().skip(1).map(|(l, c)| l as f64 * (c + (l as f64 - 1.0) * u0.ln()).exp()).sum();
        let k = pu - dot(&hv, &xs);
        p.add_poly_epi("poly", lc, affine(&a, b), affine(&hv, k)).unwrap();
        let mut grad = a.iter().map(|v| dp * v).collect::<Vec<_>>();
        axpy(&mut grad, -1.0, &hv);
        axpy(&mut c, -mult(&mut rng), &grad);
    }

    // Hermitian LMI X0 + Σ_{i∈S} x_i A_i ⪰ 0, singular at x_star.
    {
        let n = 3;
        let support: Vec<usize> = (0..5).map(|k| (3 * k + seed as usize) % N).collect();
        let herm = |rng: &mut ChaCha8Rng| {
            let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(normal(rng), normal(rng)));
            (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
        };
        let mats: Vec<DMatrix<Complex64>> = support.iter().map(|_| herm(&mut rng)).collect();
        let q = DMatrix::from_fn(n, n, |_, _| Complex64::new(normal(&mut rng), normal(&mut rng))).qr().q();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5 + rng.random::<f64>(), 0.0),
            Complex64::new(0.5 + rng.random::<f64>(), 0.0),
        ]));
        let x_at = &q * diag * q.adjoint();
        let mut x0 = x_at.clone();
        for (m, &i) in mats.iter().zip(&support) {
            x0 -= m * Complex64::new(xs[i], 0.0);
        }
        p.add_psd("lmi", n, |r, col| {
            let mut e = CExpr::constant(x0[(r, col)]);
            for (m, &i) in mats.iter().zip(&support) {
                e.re.add_term(i, m[(r, col)].re);
                e.im.add_term(i, m[(r, col)].im);
            }
            if r == col {
                e.im = LinExpr::zero();
            }
            e
        })
        .unwrap();
        let v = q.column(0).into_owned();
        let mu = mult(&mut rng);
        for (m, &i) in mats.iter().zip(&support) {
            c[i] += mu * (v.adjoint() * m * &v)[(0, 0)].re;
        }
    }

    // Inactive ball keeping the feasible set bounded.
    let box_radius = (dot(&xs, &xs) + 25.0).sqrt();
    p.add_quad_le("ball", (0..N).map(LinExpr::var).collect(), LinExpr::constant(box_radius * box_radius)).unwrap();

    p.minimize(affine(&c, 0.0)).unwrap();
    let optimum = dot(&c, &xs);
    Instance { program: p, x_star: xs, optimum, box_radius }
}

fn grad_of(e: &LinExpr, n: usize) -> DVector<f64> {
    let mut g = DVector::zeros(n);
    for &(i, c) in &e.terms {
        g[i] += c;
    }
    g
}

/// Largest constraint violation and a subgradient of the violated constraint.
fn worst_cut(program: &ConicProgram, x: &[f64]) -> (f64, DVector<f64>) {
    let n = x.len();
    let mut worst = (f64::NEG_INFINITY, DVector::zeros(n));
    for con in program.constraints() {
        let (val, g) = match &con.kind {
            ConeKind::Zero(_) => continue,
            ConeKind::NonNeg(e) => (-e.eval(x), -grad_of(e, n)),
            ConeKind::Soc { t, x: v } => {
                let vals: Vec<f64> = v.iter().map(|e| e.eval(x)).collect();
                let nrm = vals.iter().map(|a| a * a).sum::<f64>().sqrt();
                let mut g = -grad_of(t, n);
                if nrm > 0.0 {
                    for (e, a) in v.iter().zip(&vals) {
                        g += grad_of(e, n) * (a / nrm);
                    }
                }
                (nrm - t.eval(x), g)
            }
            ConeKind::Quad { terms, rhs } => {
                let mut g = -grad_of(rhs, n);
                let mut s = 0.0;
                for e in terms {
                    let a = e.eval(x);
                    s += a * a;
                    g += grad_of(e, n) * (2.0 * a);
                }
                (s - rhs.eval(x), g)
            }
            ConeKind::LogHypo { t, x: arg } => {
                let a = arg.eval(x);
                if a <= 1e-12 {
                    (1e-12 - a, -grad_of(arg, n))
                } else {
                    (t.eval(x) - a.ln(), grad_of(t, n) - grad_of(arg, n) / a)
                }
            }
            ConeKind::PolyEpi { log_coeffs, u, bound } => {
                let uv = u.eval(x);
                if uv < 0.0 {
                    (-uv, -grad_of(u, n))
                } else {
                    let pv: f64 = log_coeffs.iter().enumerate().map(|(l, c)| (c + l as f64 * uv.ln()).exp()).sum();
                    let dp: f64 = log_coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(l, c)| l as f64 * (c + (l as f64 - 1.0) * uv.ln()).exp())
                        .sum();
                    (pv - bound.eval(x), grad_of(u, n) * dp - grad_of(bound, n))
                }
            }
            ConeKind::Psd { n: m, upper } => {
                let mut mat = DMatrix::<Complex64>::zeros(*m, *m);
                let mut k = 0;
                for i in 0..*m {
                    for j in i..*m {
                        let z = upper[k].eval(x);
                        mat[(i, j)] = z;
                        mat[(j, i)] = z.conj();
                        k += 1;
                    }
                }
                let eig = mat.symmetric_eigen();
                let (imin, lmin) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |b, (i, &l)| if l < b.1 { (i, l) } else { b });
                let v = eig.eigenvectors.column(imin).into_owned();
                // d(vᴴXv)/dx_p = Re Σ_ij conj(v_i) ∂X_ij v_j.
                let mut g = DVector::zeros(n);
                let mut k = 0;
                for i in 0..*m {
                    for j in i..*m {
                        let w = v[i].conj() * v[j];
                        let scale = if i == j { 1.0 } else { 2.0 };
                        for &(p, a) in &upper[k].re.terms {
                            g[p] -= scale * a * w.re;
                        }
                        if i != j {
                            for &(p, a) in &upper[k].im.terms {
                                g[p] += scale * a * w.im;
                            }
                        }
                        k += 1;
                    }
                }
                (-lmin, g)
            }
        };
        if val > worst.0 {
            worst = (val, g);
        }
    }
    worst
}

/// Central-cut ellipsoid method on the affine hull of the equalities.
/// Returns the best objective over iterates that violate no constraint by
/// more than `feas_tol`.
pub fn ellipsoid_reference(inst: &Instance, iterations: usize, feas_tol: f64) -> f64 {
    let p = &inst.program;
    let n = p.n_real();
    let eqs: Vec<&LinExpr> = p
        .constraints()
        .iter()
        .filter_map(|c| match &c.kind {
            ConeKind::Zero(e) => Some(e),
            _ => None,
        })
        .collect();
    let e = DMatrix::from_fn(eqs.len(), n, |k, j| grad_of(eqs[k], n)[j]);
    let rhs = DVector::from_fn(eqs.len(), |k, _| -eqs[k].constant);
    let svd = e.clone().svd(true, true);
    let xp = svd.solve(&rhs, 1e-12).unwrap();
    let vt = svd.v_t.unwrap();
    // Full SVD basis for the null space.
    let full = DMatrix::from_fn(n, n, |i, j| if i < vt.nrows() { vt[(i, j)] } else { 0.0 });
    let qr = full.transpose().qr();
    let q = qr.q();
    let basis = {
        let mut b = DMatrix::<f64>::zeros(n, n);
        let _ = &mut b;
        // Complete the row space of E to an orthonormal basis of ℝⁿ.
        let mut extended = DMatrix::<f64>::zeros(n, n);
        for i in 0..vt.nrows() {
            extended.set_column(i, &vt.row(i).transpose());
        }
        let mut seed = ChaCha8Rng::seed_from_u64(7);
        for i in vt.nrows()..n {
            extended.set_column(i, &DVector::from_fn(n, |_, _| normal(&mut seed)));
        }
        let _ = q;
        let qf = extended.qr().q();
        qf.columns(vt.nrows(), n - vt.nrows()).into_owned()
    };
    let d = basis.ncols();
    let c = grad_of(p.objective(), n);
    let cy = basis.transpose() * &c;
    let mut y = DVector::<f64>::zeros(d);
    let mut pm = DMatrix::<f64>::identity(d, d) * (inst.box_radius * inst.box_radius);
    let mut best = f64::INFINITY;
    let dd = d as f64;
    for _ in 0..iterations {
        let x = &xp + &basis * &y;
        let xs = x.as_slice();
        let (viol, g) = worst_cut(p, xs);
        let gy = if viol > feas_tol {
            basis.transpose() * g
        } else {
            best = best.min(c.dot(&x));
            cy.clone()
        };
        let pg = &pm * &gy;
        let denom = gy.dot(&pg);
        if denom <= 0.0 {
            break;
        }
        let gt = pg / denom.sqrt();
        y -= &gt * (1.0 / (dd + 1.0));
        pm = (&pm - (&gt * gt.transpose()) * (2.0 / (dd + 1.0))) * (dd * dd / (dd * dd - 1.0));
        pm = (&pm + pm.transpose()) * 0.5;
    }
    best
}
