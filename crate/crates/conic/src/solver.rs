//! Primal barrier path-following.
//!
//! Phase I minimizes a common shift `s` added to every cone until the point
//! is strictly feasible; phase II follows the central path of
//! `t · cᵀx + Σ φ_i(x)` with damped Newton steps. Equalities are kept exact
//! by projecting the start point and solving the Newton system through a
//! Schur complement on the equality rows. The Hessian is assembled into a
//! fixed sparse pattern and factored with a symbolic analysis done once.

use crate::barrier::Cone;
use crate::program::{ConeKind, ConicProgram, Sense};
use crate::expr::LinExpr;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub kkt_tol: f64,
    /// Cap on Newton steps over both phases.
    pub max_iter: usize,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-7, kkt_tol: 1e-7, max_iter: 200, mu: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Objective in the program's own sense.
    pub objective: f64,
    /// Bound on the optimal value from the barrier gap: below the objective
    /// when minimizing, above it when maximizing.
    pub dual_bound: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    /// Newton steps over both phases.
    pub iterations: usize,
    pub phase1_iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// One cone constraint compiled to a dense local affine map.
#[derive(Debug, Clone)]
struct Block {
    cone: Cone,
    support: Vec<usize>,
    /// `d × |support|`, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    d: usize,
    /// Positions of the lower-triangle entries `(i ≥ j)` of `support × support`
    /// in the CSC value array, row-major over local pairs.
    pos: Vec<usize>,
    /// For wide quadratic cones, `Aᵀ M A` over the same local pairs as
    /// `pos`, where the cone Hessian is a scalar times the constant `M` plus
    /// a rank-one term.
    gram: Option<Vec<f64>>,
    /// Nonzeros of every row of `a` as `(local column, value)`.
    nz: Vec<Vec<(usize, f64)>>,
}

impl Block {
    fn from_rows(cone: Cone, rows: &[&LinExpr]) -> Block {
        let rows: Vec<LinExpr> = rows.iter().map(|r| r.canonical()).collect();
        let mut support: Vec<usize> = rows.iter().flat_map(|r| r.terms.iter().map(|p| p.0)).collect();
        support.sort_unstable();
        support.dedup();
        let d = rows.len();
        let w = support.len();
        let mut a = vec![0.0; d * w];
        let mut b = vec![0.0; d];
        for (i, r) in rows.iter().enumerate() {
            for &(j, c) in &r.terms {
                let k = support.binary_search(&j).unwrap();
                a[i * w + k] += c;
            }
            b[i] = r.constant;
        }
        Block { cone, support, a, b, d, pos: Vec::new(), gram: None, nz: Vec::new() }.with_gram()
    }

    fn with_gram(mut self) -> Block {
        let weight = |i: usize| match (&self.cone, i) {
            (Cone::Soc, 0) => 1.0,
            (Cone::Soc, _) => -1.0,
            (Cone::Quad, 0) => 0.0,
            (Cone::Quad, _) => 1.0,
            _ => unreachable!(),
        };
        let w = self.support.len();
        self.nz = (0..self.d)
            .map(|i| (0..w).filter_map(|k| (self.a[i * w + k] != 0.0).then(|| (k, self.a[i * w + k]))).collect())
            .collect();
        if !matches!(self.cone, Cone::Soc | Cone::Quad) || self.d < 4 {
            return self;
        }
        let mut g = Vec::with_capacity(w * (w + 1) / 2);
        for ia in 0..w {
            for ib in 0..=ia {
                g.push((0..self.d).map(|i| weight(i) * self.a[i * w + ia] * self.a[i * w + ib]).sum());
            }
        }
        self.gram = Some(g);
        self
    }

    /// Adds `Aᵀ ∇φ` to `grad` and `Aᵀ ∇²φ A` to `hess` through the Gram
    /// form; returns the barrier value, or `None` outside the cone.
    fn add_quadratic(&self, y: &[f64], gram: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Option<f64> {
        let w = self.support.len();
        let tail: f64 = y[1..].iter().map(|v| v * v).sum();
        // Local gradient g = coef_y ⊙ y plus an offset in slot 0, and the
        // Hessian `α M + g gᵀ / β`.
        let (u, gy, alpha, beta): (f64, Vec<f64>, f64, f64) = match self.cone {
            Cone::Soc => {
                let u = y[0] * y[0] - tail;
                if y[0] <= 0.0 || u <= 0.0 {
                    return None;
                }
                let mut g: Vec<f64> = y.iter().map(|v| 2.0 * v / u).collect();
                g[0] = -g[0];
                (u, g, -2.0 / u, 1.0)
            }
            Cone::Quad => {
                let u = y[0] - tail;
                if u <= 0.0 {
                    return None;
                }
                let mut g: Vec<f64> = y.iter().map(|v| 2.0 * v / u).collect();
                g[0] = -1.0 / u;
                (u, g, 2.0 / u, 1.0)
            }
            _ => unreachable!(),
        };
        let mut v = vec![0.0; w];
        for (i, gi) in gy.iter().enumerate() {
            if *gi == 0.0 {
                continue;
            }
            for (vk, a) in v.iter_mut().zip(&self.a[i * w..(i + 1) * w]) {
                *vk += gi * a;
            }
        }
        for (k, &j) in self.support.iter().enumerate() {
            grad[j] += v[k];
        }
        let mut p = 0;
        for ia in 0..w {
            for ib in 0..=ia {
                hess[self.pos[p]] += alpha * gram[p] + v[ia] * v[ib] / beta;
                p += 1;
            }
        }
        Some(-u.ln())
    }

    /// Copy with the phase-I shift variable appended as the last column.
    fn with_shift(&self, s_index: usize) -> Block {
        let w = self.support.len();
        let sh = self.cone.shift(self.d);
        let mut a = Vec::with_capacity(self.d * (w + 1));
        for i in 0..self.d {
            a.extend_from_slice(&self.a[i * w..(i + 1) * w]);
            a.push(sh[i]);
        }
        let mut support = self.support.clone();
        support.push(s_index);
        Block { cone: self.cone.clone(), support, a, b: self.b.clone(), d: self.d, pos: Vec::new(), gram: None, nz: Vec::new() }.with_gram()
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        let w = self.support.len();
        (0..self.d)
            .map(|i| {
                self.b[i]
                    + self.a[i * w..(i + 1) * w]
                        .iter()
                        .zip(&self.support)
                        .map(|(c, &j)| c * x[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

fn compile(program: &ConicProgram) -> (Vec<Block>, Vec<LinExpr>) {
    let mut blocks = Vec::new();
    let mut eqs = Vec::new();
    for c in program.constraints() {
        match &c.kind {
            ConeKind::Zero(e) => eqs.push(e.canonical()),
            ConeKind::NonNeg(e) => blocks.push(Block::from_rows(Cone::NonNeg, &[e])),
            ConeKind::Soc { t, x } => {
                let rows: Vec<&LinExpr> = std::iter::once(t).chain(x.iter()).collect();
                blocks.push(Block::from_rows(Cone::Soc, &rows));
            }
            ConeKind::Quad { terms, rhs } => {
                let rows: Vec<&LinExpr> = std::iter::once(rhs).chain(terms.iter()).collect();
                blocks.push(Block::from_rows(Cone::Quad, &rows));
            }
            ConeKind::LogHypo { t, x } => blocks.push(Block::from_rows(Cone::LogHypo, &[t, x])),
            ConeKind::PolyEpi { log_coeffs, u, bound } => {
                blocks.push(Block::from_rows(Cone::PolyEpi(log_coeffs.clone()), &[u, bound, u]))
            }
            ConeKind::Psd { n, upper } => {
                let n = *n;
                let mut rows: Vec<&LinExpr> = Vec::with_capacity(n * n);
                // Upper entries are stored row by row with the diagonal first in each row.
                let mut start = Vec::with_capacity(n);
                let mut k = 0;
                for i in 0..n {
                    start.push(k);
                    k += n - i;
                }
                for &s in &start {
                    rows.push(&upper[s].re);
                }
                for i in 0..n {
                    for j in i + 1..n {
                        let e = &upper[start[i] + (j - i)];
                        rows.push(&e.re);
                        rows.push(&e.im);
                    }
                }
                blocks.push(Block::from_rows(Cone::Psd(n), &rows));
            }
        }
    }
    (blocks, eqs)
}

/// Sparse lower-triangle Hessian pattern shared by all Newton steps of a phase.
struct Pattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    llt: SymbolicLlt<usize>,
    diag: Vec<usize>,
    /// Row and column of every stored entry.
    coords: Vec<(usize, usize)>,
    nnz: usize,
}

impl Pattern {
    fn build(n: usize, blocks: &mut [Block]) -> Option<Pattern> {
        let mut trips: Vec<Triplet<usize, usize, f64>> = (0..n).map(|i| Triplet::new(i, i, 1.0)).collect();
        for b in blocks.iter() {
            for (ia, &ra) in b.support.iter().enumerate() {
                for &rb in &b.support[..=ia] {
                    trips.push(Triplet::new(ra, rb, 1.0));
                }
            }
        }
        let m = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).ok()?;
        let symbolic = m.symbolic().to_owned().ok()?;
        let col_ptr = symbolic.col_ptr().to_vec();
        let row_idx = symbolic.row_idx().to_vec();
        let find = |r: usize, c: usize| -> usize {
            let s = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + s.binary_search(&r).expect("pattern entry")
        };
        let diag = (0..n).map(|i| find(i, i)).collect();
        for b in blocks.iter_mut() {
            let w = b.support.len();
            let mut pos = Vec::with_capacity(w * (w + 1) / 2);
            for ia in 0..w {
                for ib in 0..=ia {
                    pos.push(find(b.support[ia], b.support[ib]));
                }
            }
            b.pos = pos;
        }
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower).ok()?;
        let nnz = row_idx.len();
        let mut coords = Vec::with_capacity(nnz);
        for c in 0..n {
            for &r in &row_idx[col_ptr[c]..col_ptr[c + 1]] {
                coords.push((r, c));
            }
        }
        Some(Pattern { n, symbolic, llt, diag, coords, nnz })
    }
}

/// Barrier state for one phase.
struct Phase<'a> {
    blocks: &'a [Block],
    pattern: &'a Pattern,
    c: Vec<f64>,
    /// Dense equality rows `E x = e`.
    e_mat: DMatrix<f64>,
    nu: f64,
    /// `½ w ‖x − x₀‖²` over the first coordinates, keeping phase I bounded
    /// along directions where the shifted cones recede.
    prox: Option<(Vec<f64>, f64)>,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

enum StepError {
    Numerical,
}

impl Phase<'_> {
    fn prox_value(&self, x: &[f64]) -> f64 {
        match &self.prox {
            Some((x0, w)) => 0.5 * w * x0.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum::<f64>(),
            None => 0.0,
        }
    }

    fn barrier_value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.prox_value(x);
        for b in self.blocks {
            v += b.cone.value(&b.local(x))?;
        }
        Some(v)
    }

    fn barrier_derivatives(&self, x: &[f64]) -> Option<Eval> {
        let n = self.pattern.n;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; self.pattern.nnz];
        let mut value = self.prox_value(x);
        if let Some((x0, w)) = &self.prox {
            for (i, a) in x0.iter().enumerate() {
                grad[i] += w * (x[i] - a);
                hess[self.pattern.diag[i]] += w;
            }
        }
        let mut gy = Vec::new();
        let mut hy = Vec::new();
        let mut tmp = Vec::new();
        for b in self.blocks {
            let y = b.local(x);
            if let Some(gram) = &b.gram {
                value += b.add_quadratic(&y, gram, &mut grad, &mut hess)?;
                continue;
            }
            let d = b.d;
            let w = b.support.len();
            gy.resize(d, 0.0);
            hy.resize(d * d, 0.0);
            value += b.cone.derivatives(&y, &mut gy, &mut hy)?;
            for (row, g) in b.nz.iter().zip(&gy) {
                for &(k, a) in row {
                    grad[b.support[k]] += a * g;
                }
            }
            // tmp_i = Σ_l H_il A_l, then A_iᵀ tmp_i scattered into the lower
            // triangle, both over the sparse rows.
            tmp.clear();
            tmp.resize(d * w, 0.0);
            for i in 0..d {
                let trow = &mut tmp[i * w..(i + 1) * w];
                for (l, row) in b.nz.iter().enumerate() {
                    let h = hy[i * d + l];
                    if h == 0.0 {
                        continue;
                    }
                    for &(k, a) in row {
                        trow[k] += h * a;
                    }
                }
            }
            for (i, row) in b.nz.iter().enumerate() {
                let trow = &tmp[i * w..(i + 1) * w];
                for &(ia, a) in row {
                    let base = ia * (ia + 1) / 2;
                    for (ib, t) in trow[..=ia].iter().enumerate() {
                        hess[b.pos[base + ib]] += a * t;
                    }
                }
            }
        }
        Some(Eval { value, grad, hess })
    }

    /// Solves `H dx + Eᵀ ν = −r`, `E dx = 0`. Returns `(dx, ν)`.
    fn newton_system(&self, hess: &[f64], r: &[f64]) -> Result<(Vec<f64>, Vec<f64>), StepError> {
        let n = self.pattern.n;
        // Symmetric Jacobi scaling H = D⁻¹ H̃ D⁻¹ with unit diagonal in H̃; the
        // barrier Hessian spans many orders of magnitude near the optimum.
        let scale: Vec<f64> = self
            .pattern
            .diag
            .iter()
            .map(|&p| if hess[p] > 0.0 { 1.0 / hess[p].sqrt() } else { 1.0 })
            .collect();
        let scaled: Vec<f64> = hess
            .iter()
            .zip(&self.pattern.coords)
            .map(|(h, &(r, c))| h * scale[r] * scale[c])
            .collect();
        let mut delta = 0.0;
        let mut vals = scaled.clone();
        let llt = loop {
            vals.copy_from_slice(&scaled);
            for &p in &self.pattern.diag {
                vals[p] += delta;
            }
            let mat = SparseColMatRef::new(self.pattern.symbolic.as_ref(), &vals);
            match Llt::try_new_with_symbolic(self.pattern.llt.clone(), mat, Side::Lower) {
                Ok(l) => break l,
                Err(_) => {
                    delta = if delta == 0.0 { 1e-14 } else { delta * 100.0 };
                    if delta > 1e-2 {
                        return Err(StepError::Numerical);
                    }
                }
            }
        };
        let hsolve = |b: &Mat<f64>| -> Mat<f64> {
            let mut sb = b.clone();
            for j in 0..sb.ncols() {
                for i in 0..n {
                    sb[(i, j)] *= scale[i];
                }
            }
            let mut x = llt.solve(&sb);
            for j in 0..x.ncols() {
                for i in 0..n {
                    x[(i, j)] *= scale[i];
                }
            }
            x
        };
        let me = self.e_mat.nrows();
        let mut et = Mat::<f64>::zeros(n, me);
        for i in 0..n {
            for k in 0..me {
                et[(i, k)] = self.e_mat[(k, i)];
            }
        }
        let x2 = if me > 0 {
            let sol = hsolve(&et);
            DMatrix::from_fn(n, me, |i, k| sol[(i, k)])
        } else {
            DMatrix::zeros(n, 0)
        };
        let schur = &self.e_mat * &x2;
        // H dx + Eᵀν = −f, E dx = g.
        let solve_kkt = |f: &[f64], g: &DVector<f64>| -> Option<(Vec<f64>, DVector<f64>)> {
            let mut rhs = Mat::<f64>::zeros(n, 1);
            for i in 0..n {
                rhs[(i, 0)] = f[i];
            }
            let sol = hsolve(&rhs);
            let x1 = DVector::from_fn(n, |i, _| sol[(i, 0)]);
            if me == 0 {
                return Some(((-x1).as_slice().to_vec(), DVector::zeros(0)));
            }
            let nu = -solve_small(&schur, &(g + &self.e_mat * &x1))?;
            let dx = -(x1 + &x2 * &nu);
            Some((dx.as_slice().to_vec(), nu))
        };
        let (mut dx, mut nu) = solve_kkt(r, &DVector::zeros(me)).ok_or(StepError::Numerical)?;
        // Iterative refinement against the unregularized matrix.
        for _ in 0..2 {
            let mut r1 = self.hess_mul(hess, &dx);
            for i in 0..n {
                r1[i] += r[i];
            }
            if me > 0 {
                let etn = self.e_mat.tr_mul(&nu);
                for i in 0..n {
                    r1[i] += etn[i];
                }
            }
            let r2 = &self.e_mat * DVector::from_column_slice(&dx);
            let Some((cx, cn)) = solve_kkt(&r1, &(-r2)) else { break };
            for i in 0..n {
                dx[i] += cx[i];
            }
            nu += cn;
        }
        Ok((dx, nu.as_slice().to_vec()))
    }
}

impl Phase<'_> {
    /// `H v` with `H` stored as its lower triangle.
    fn hess_mul(&self, hess: &[f64], v: &[f64]) -> Vec<f64> {
        let sym = self.pattern.symbolic.as_ref();
        let cp = sym.col_ptr();
        let ri = sym.row_idx();
        let mut out = vec![0.0; v.len()];
        for c in 0..v.len() {
            for p in cp[c]..cp[c + 1] {
                let r = ri[p];
                out[r] += hess[p] * v[c];
                if r != c {
                    out[c] += hess[p] * v[r];
                }
            }
        }
        out
    }
}

fn solve_small(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    let svd = a.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    svd.solve(b, tol).ok()
}

struct PathResult {
    x: Vec<f64>,
    status: Option<SolveStatus>,
    kkt: f64,
    /// Bound on `cᵀx − p*` at the returned point.
    gap: f64,
}

/// Equality rows as a dense matrix and right-hand side, over `n` columns.
fn equality_system(eqs: &[LinExpr], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut e = DMatrix::zeros(eqs.len(), n);
    let mut rhs = DVector::zeros(eqs.len());
    for (k, q) in eqs.iter().enumerate() {
        for &(j, c) in &q.terms {
            e[(k, j)] += c;
        }
        rhs[k] = -q.constant;
    }
    (e, rhs)
}

/// Closest point to `x0` on `E x = e` in the Euclidean norm.
fn project(e: &DMatrix<f64>, rhs: &DVector<f64>, x0: &[f64]) -> Vec<f64> {
    if e.nrows() == 0 {
        return x0.to_vec();
    }
    let x = DVector::from_column_slice(x0);
    let r = rhs - e * &x;
    let eet = e * e.transpose();
    let svd = eet.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(1e-300);
    match svd.solve(&r, tol) {
        Ok(y) => (x + e.transpose() * y).as_slice().to_vec(),
        Err(_) => x0.to_vec(),
    }
}

struct Counter {
    steps: usize,
    max: usize,
}

/// Initial barrier weight balancing the objective against the barrier gradient.
fn initial_t(c: &[f64], g: &[f64], nu: f64, obj: f64) -> f64 {
    let cc: f64 = c.iter().map(|v| v * v).sum();
    let cg: f64 = c.iter().zip(g).map(|(a, b)| a * b).sum();
    let t = if cc > 0.0 { -cg / cc } else { 1.0 };
    let floor = nu / (1.0 + obj.abs()) * 1e-3;
    if t.is_finite() && t > floor {
        t.min(1e6)
    } else {
        floor.max(1e-8)
    }
}

/// The `t` minimizing the Newton decrement `‖t c + g‖` in the local norm
/// `H⁻¹` (restricted to the equality null space), so the first centering
/// starts as close to the path as the current point allows.
fn local_t(phase: &Phase<'_>, hess: &[f64], g: &[f64]) -> Option<f64> {
    let (dc, _) = phase.newton_system(hess, &phase.c).ok()?;
    let (dg, _) = phase.newton_system(hess, g).ok()?;
    let chc: f64 = -phase.c.iter().zip(&dc).map(|(a, b)| a * b).sum::<f64>();
    let chg: f64 = -phase.c.iter().zip(&dg).map(|(a, b)| a * b).sum::<f64>();
    let t = -chg / chc;
    (chc > 0.0 && t.is_finite() && t > 0.0).then(|| t.clamp(1e-8, 1e6))
}

/// Runs the barrier method from a strictly feasible `x`. `stop` is checked
/// after every accepted step and ends the run early when it returns true.
///
/// At each iterate the Newton system supplies the multiplier estimate
/// `z = −(∇φ + ∇²φ dx) / t`, which satisfies stationarity up to the linear
/// solve error and lies in the dual cone whenever the Newton decrement `λ`
/// is below one; its duality gap is at most `(ν + λ√ν) / t`. The KKT
/// residual is the larger of the scaled solve error and that relative gap.
fn follow_path(
    phase: &Phase<'_>,
    mut x: Vec<f64>,
    opts: &SolverOptions,
    counter: &mut Counter,
    stop: &dyn Fn(&[f64], f64) -> bool,
) -> PathResult {
    let n = phase.pattern.n;
    let obj = |x: &[f64]| phase.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let Some(ev0) = phase.barrier_derivatives(&x) else {
        return PathResult { x, status: Some(SolveStatus::NumericalFailure), kkt: f64::INFINITY, gap: f64::INFINITY };
    };
    let mut t = local_t(phase, &ev0.hess, &ev0.grad).unwrap_or_else(|| initial_t(&phase.c, &ev0.grad, phase.nu, obj(&x)));
    let c_inf = phase.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut kkt = f64::INFINITY;
    let mut gap = f64::INFINITY;
    loop {
        let final_stage = phase.nu / t <= 0.5 * opts.kkt_tol * obj(&x).abs().max(1.0);
        loop {
            if counter.steps >= counter.max {
                return PathResult { x, status: Some(SolveStatus::MaxIter), kkt, gap };
            }
            let Some(ev) = phase.barrier_derivatives(&x) else {
                return PathResult { x, status: Some(SolveStatus::NumericalFailure), kkt, gap };
            };
            let r: Vec<f64> = (0..n).map(|i| t * phase.c[i] + ev.grad[i]).collect();
            let Ok((dx, nu)) = phase.newton_system(&ev.hess, &r) else {
                return PathResult { x, status: Some(SolveStatus::NumericalFailure), kkt, gap };
            };
            let lambda2: f64 = -r.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
            if !lambda2.is_finite() {
                return PathResult { x, status: Some(SolveStatus::NumericalFailure), kkt, gap };
            }
            let lambda = lambda2.max(0.0).sqrt();
            let mut resid = phase.hess_mul(&ev.hess, &dx);
            for i in 0..n {
                resid[i] += r[i];
            }
            for (k, v) in nu.iter().enumerate() {
                for (i, ri) in resid.iter_mut().enumerate() {
                    *ri += v * phase.e_mat[(k, i)];
                }
            }
            let stat = resid.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (t * (1.0 + c_inf));
            gap = if lambda < 1.0 { (phase.nu + lambda * phase.nu.sqrt()) / t } else { f64::INFINITY };
            kkt = stat.max(gap / (1.0 + obj(&x).abs()));
            if lambda2 <= 2e-8 || (final_stage && lambda < 0.5 && kkt <= 0.5 * opts.kkt_tol) {
                break;
            }
            let f0 = t * obj(&x) + ev.value;
            let mut step = 1.0;
            let mut accepted = None;
            let mut stalled = false;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                if let Some(bv) = phase.barrier_value(&xn) {
                    let f1 = t * obj(&xn) + bv;
                    // Inside the quadratic-convergence region the full step is
                    // taken as long as it stays in the domain; rounding in f
                    // would otherwise stall the Armijo test.
                    if lambda2 < 0.04 || f1 <= f0 - 0.01 * step * lambda2 {
                        stalled = lambda2 < 1e-3 && (f0 - f1) <= 1e-14 * (1.0 + f0.abs());
                        accepted = Some(xn);
                        break;
                    }
                }
                step *= 0.5;
            }
            counter.steps += 1;
            match accepted {
                Some(xn) => x = xn,
                None => break,
            }
            // Rounding has taken over: the barrier value no longer moves.
            if stalled {
                break;
            }
            if stop(&x, t) {
                return PathResult { x, status: None, kkt, gap };
            }
        }
        if final_stage {
            return PathResult { x, status: Some(SolveStatus::Optimal), kkt, gap };
        }
        t *= opts.mu;
    }
}

/// Solves `program` with the given options.
pub fn solve(program: &ConicProgram, opts: &SolverOptions) -> SolveReport {
    let n = program.n_real();
    let (blocks2, eqs) = compile(program);
    let sign = match program.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; n];
    for &(j, v) in &program.objective().canonical().terms {
        c[j] += sign * v;
    }
    let (e_mat, e_rhs) = equality_system(&eqs, n);
    let x0 = program.warm_start().map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut x = project(&e_mat, &e_rhs, &x0);
    let mut counter = Counter { steps: 0, max: opts.max_iter };

    let finish = |x: Vec<f64>, status: SolveStatus, kkt: f64, gap: f64, steps: usize, p1: usize| {
        let objective = program.objective_value(&x);
        let rep = crate::program::verify_point(program, &x).expect("point length");
        let max_violation = rep.max_violation.max(0.0).max(if rep.per_constraint.is_empty() { 0.0 } else { f64::NEG_INFINITY });
        let dual_bound = objective - sign * gap;
        let mut status = status;
        if status == SolveStatus::Optimal && (max_violation > opts.feas_tol || kkt > opts.kkt_tol) {
            status = SolveStatus::NumericalFailure;
        }
        SolveReport { status, x, objective, dual_bound, max_violation, kkt_residual: kkt, iterations: steps, phase1_iterations: p1 }
    };

    let eq_resid = if eqs.is_empty() {
        0.0
    } else {
        (&e_mat * DVector::from_column_slice(&x) - &e_rhs).amax()
    };
    if eq_resid > opts.feas_tol * (1.0 + e_rhs.amax()) {
        return finish(x, SolveStatus::Infeasible, f64::INFINITY, f64::INFINITY, 0, 0);
    }

    let nu2: f64 = blocks2.iter().map(|b| b.cone.nu()).sum();
    let required = blocks2
        .iter()
        .map(|b| b.cone.required_shift(&b.local(&x)))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut p1_steps = 0;
    if required >= 0.0 {
        // Phase I over (x, s).
        let mut blocks1: Vec<Block> = blocks2.iter().map(|b| b.with_shift(n)).collect();
        let floor = LinExpr::var(n) + 1.0;
        blocks1.push(Block::from_rows(Cone::NonNeg, &[&floor]));
        let Some(pattern1) = Pattern::build(n + 1, &mut blocks1) else {
            return finish(x, SolveStatus::NumericalFailure, f64::INFINITY, f64::INFINITY, 0, 0);
        };
        let mut c1 = vec![0.0; n + 1];
        c1[n] = 1.0;
        let e1 = e_mat.clone().insert_column(n, 0.0);
        let nu1 = nu2 + 1.0;
        let prox = Some((x.clone(), 1.0));
        let phase1 = Phase { blocks: &blocks1, pattern: &pattern1, c: c1, e_mat: e1, nu: nu1, prox };
        let mut x1 = x.clone();
        x1.push(required + required.abs().max(1.0));
        let stop = |x: &[f64], _t: f64| x[n] < 0.0;
        let res = follow_path(&phase1, x1, opts, &mut counter, &stop);
        p1_steps = counter.steps;
        let s = res.x[n];
        x = res.x[..n].to_vec();
        if s >= 0.0 {
            // The proximal term perturbs the phase-I bound by O(‖x − x₀‖² / t),
            // which is negligible once the path has converged.
            let status = match res.status {
                Some(SolveStatus::MaxIter) => SolveStatus::MaxIter,
                Some(SolveStatus::Optimal) => SolveStatus::Infeasible,
                _ if s - res.gap > opts.feas_tol => SolveStatus::Infeasible,
                _ => SolveStatus::NumericalFailure,
            };
            return finish(x, status, res.kkt, f64::INFINITY, counter.steps, p1_steps);
        }
    }

    let mut blocks2 = blocks2;
    let Some(pattern2) = Pattern::build(n, &mut blocks2) else {
        return finish(x, SolveStatus::NumericalFailure, f64::INFINITY, f64::INFINITY, counter.steps, p1_steps);
    };
    let phase2 = Phase { blocks: &blocks2, pattern: &pattern2, c, e_mat, nu: nu2, prox: None };
    let never = |_: &[f64], _: f64| false;
    let res = follow_path(&phase2, x, opts, &mut counter, &never);
    let status = res.status.unwrap_or(SolveStatus::NumericalFailure);
    finish(res.x, status, res.kkt, res.gap, counter.steps, p1_steps)
}
