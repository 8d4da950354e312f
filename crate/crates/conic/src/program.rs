//! Program registry: variables, objective and constraints.

use crate::expr::{CExpr, LinExpr};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("variable name `{0}` is already registered")]
    DuplicateName(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("constraint `{label}` references coordinate {index} but the program has {n}")]
    UnknownVariable { label: String, index: usize, n: usize },
    #[error("PSD block `{0}` has a diagonal entry with a nonzero imaginary part")]
    NonRealDiagonal(String),
}

/// Shape of a registered variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Real(usize),
    Complex(usize),
    /// `n × n` Hermitian matrix stored as `n` diagonal reals followed by
    /// `(re, im)` pairs of the strict upper triangle in row order.
    Hermitian(usize),
}

impl Shape {
    pub fn real_len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Real(n) => n,
            Shape::Complex(n) => 2 * n,
            Shape::Hermitian(n) => n * n,
        }
    }
}

/// Handle to a registered variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    pub offset: usize,
    pub shape: Shape,
}

/// Position of the pair `(i, j)`, `i < j`, among the strict upper triangle.
fn upper_pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl Var {
    pub fn len(&self) -> usize {
        match self.shape {
            Shape::Scalar => 1,
            Shape::Real(n) | Shape::Complex(n) | Shape::Hermitian(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scalar(&self) -> LinExpr {
        assert!(matches!(self.shape, Shape::Scalar | Shape::Real(1)), "not a scalar");
        LinExpr::var(self.offset)
    }

    /// Entry `i` of a real vector.
    pub fn at(&self, i: usize) -> LinExpr {
        match self.shape {
            Shape::Real(n) if i < n => LinExpr::var(self.offset + i),
            Shape::Scalar if i == 0 => LinExpr::var(self.offset),
            _ => panic!("index {i} invalid for {:?}", self.shape),
        }
    }

    /// Entry `i` of a complex vector.
    pub fn entry(&self, i: usize) -> CExpr {
        match self.shape {
            Shape::Complex(n) if i < n => {
                CExpr::new(LinExpr::var(self.offset + 2 * i), LinExpr::var(self.offset + 2 * i + 1))
            }
            _ => panic!("index {i} invalid for {:?}", self.shape),
        }
    }

    /// Entry `(i, j)` of a Hermitian matrix.
    pub fn herm(&self, i: usize, j: usize) -> CExpr {
        let Shape::Hermitian(n) = self.shape else {
            panic!("not a Hermitian matrix: {:?}", self.shape)
        };
        assert!(i < n && j < n);
        if i == j {
            CExpr::real(LinExpr::var(self.offset + i))
        } else if i < j {
            let p = self.offset + n + 2 * upper_pair_index(n, i, j);
            CExpr::new(LinExpr::var(p), LinExpr::var(p + 1))
        } else {
            self.herm(j, i).conj()
        }
    }

    /// Real coordinate range of the variable.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.shape.real_len()
    }

    /// Reads a complex vector from a point.
    pub fn complex_value(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.entry(i).eval(x)).collect()
    }

    /// Reads a Hermitian matrix from a point.
    pub fn hermitian_value(&self, x: &[f64]) -> DMatrix<Complex64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.herm(i, j).eval(x))
    }

    /// Writes a complex vector into a point.
    pub fn set_complex(&self, x: &mut [f64], v: &[Complex64]) {
        for (i, z) in v.iter().enumerate() {
            x[self.offset + 2 * i] = z.re;
            x[self.offset + 2 * i + 1] = z.im;
        }
    }

    /// Writes a Hermitian matrix (upper triangle read) into a point.
    pub fn set_hermitian(&self, x: &mut [f64], m: &DMatrix<Complex64>) {
        let n = self.len();
        for i in 0..n {
            x[self.offset + i] = m[(i, i)].re;
            for j in i + 1..n {
                let p = self.offset + n + 2 * upper_pair_index(n, i, j);
                x[p] = m[(i, j)].re;
                x[p + 1] = m[(i, j)].im;
            }
        }
    }
}

/// Constraint kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeKind {
    /// `expr = 0`.
    Zero(LinExpr),
    /// `expr ≥ 0`.
    NonNeg(LinExpr),
    /// `‖x‖₂ ≤ t`.
    Soc { t: LinExpr, x: Vec<LinExpr> },
    /// `Σ terms² ≤ rhs`.
    Quad { terms: Vec<LinExpr>, rhs: LinExpr },
    /// Hermitian matrix with the given upper-triangle entries (row order,
    /// diagonal included) is positive semidefinite.
    Psd { n: usize, upper: Vec<CExpr> },
    /// `t ≤ ln x`.
    LogHypo { t: LinExpr, x: LinExpr },
    /// `Σ_l exp(log_coeffs[l]) · u^l ≤ bound` together with `u ≥ 0`.
    PolyEpi { log_coeffs: Vec<f64>, u: LinExpr, bound: LinExpr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub kind: ConeKind,
}

impl ConeKind {
    fn name(&self) -> &'static str {
        match self {
            ConeKind::Zero(_) => "zero",
            ConeKind::NonNeg(_) => "nonneg",
            ConeKind::Soc { .. } => "soc",
            ConeKind::Quad { .. } => "quad",
            ConeKind::Psd { .. } => "psd",
            ConeKind::LogHypo { .. } => "loghypo",
            ConeKind::PolyEpi { .. } => "polyepi",
        }
    }

    pub(crate) fn exprs(&self) -> Vec<&LinExpr> {
        match self {
            ConeKind::Zero(e) | ConeKind::NonNeg(e) => vec![e],
            ConeKind::Soc { t, x } => std::iter::once(t).chain(x.iter()).collect(),
            ConeKind::Quad { terms, rhs } => std::iter::once(rhs).chain(terms.iter()).collect(),
            ConeKind::Psd { upper, .. } => upper.iter().flat_map(|c| [&c.re, &c.im]).collect(),
            ConeKind::LogHypo { t, x } => vec![t, x],
            ConeKind::PolyEpi { u, bound, .. } => vec![u, bound],
        }
    }
}

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
struct VarInfo {
    name: String,
    var: Var,
}

/// A mixed-cone program over real coordinates.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    vars: Vec<VarInfo>,
    names: HashMap<String, usize>,
    n: usize,
    pub(crate) objective: LinExpr,
    pub(crate) sense: Sense,
    pub(crate) constraints: Vec<Constraint>,
    warm_start: Option<Vec<f64>>,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            names: HashMap::new(),
            n: 0,
            objective: LinExpr::zero(),
            sense: Sense::Minimize,
            constraints: Vec::new(),
            warm_start: None,
        }
    }

    /// Number of real coordinates.
    pub fn n_real(&self) -> usize {
        self.n
    }

    pub fn add_var(&mut self, name: &str, shape: Shape) -> Result<Var, ConicError> {
        if self.names.contains_key(name) {
            return Err(ConicError::DuplicateName(name.to_string()));
        }
        let var = Var { offset: self.n, shape };
        self.n += shape.real_len();
        self.names.insert(name.to_string(), self.vars.len());
        self.vars.push(VarInfo { name: name.to_string(), var });
        Ok(var)
    }

    pub fn add_scalar(&mut self, name: &str) -> Result<Var, ConicError> {
        self.add_var(name, Shape::Scalar)
    }

    pub fn add_real_vector(&mut self, name: &str, n: usize) -> Result<Var, ConicError> {
        self.add_var(name, Shape::Real(n))
    }

    pub fn add_complex_vector(&mut self, name: &str, n: usize) -> Result<Var, ConicError> {
        self.add_var(name, Shape::Complex(n))
    }

    pub fn add_hermitian(&mut self, name: &str, n: usize) -> Result<Var, ConicError> {
        self.add_var(name, Shape::Hermitian(n))
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.names.get(name).map(|&i| self.vars[i].var)
    }

    /// Registered variables in registration order.
    pub fn variables(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|v| (v.name.as_str(), v.var))
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn minimize(&mut self, e: LinExpr) -> Result<(), ConicError> {
        self.check("objective", &[&e])?;
        self.objective = e;
        self.sense = Sense::Minimize;
        Ok(())
    }

    pub fn maximize(&mut self, e: LinExpr) -> Result<(), ConicError> {
        self.check("objective", &[&e])?;
        self.objective = e;
        self.sense = Sense::Maximize;
        Ok(())
    }

    fn check(&self, label: &str, exprs: &[&LinExpr]) -> Result<(), ConicError> {
        for e in exprs {
            if let Some(i) = e.max_index() {
                if i >= self.n {
                    return Err(ConicError::UnknownVariable { label: label.to_string(), index: i, n: self.n });
                }
            }
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, label: &str, kind: ConeKind) -> Result<usize, ConicError> {
        self.check(label, &kind.exprs())?;
        match &kind {
            ConeKind::Psd { n, upper } => {
                if upper.len() != n * (n + 1) / 2 {
                    return Err(ConicError::ShapeMismatch(format!(
                        "PSD block `{label}` of size {n} needs {} upper entries, got {}",
                        n * (n + 1) / 2,
                        upper.len()
                    )));
                }
                let mut k = 0;
                for i in 0..*n {
                    let d = &upper[k].im.canonical();
                    if !d.terms.is_empty() || d.constant != 0.0 {
                        return Err(ConicError::NonRealDiagonal(label.to_string()));
                    }
                    k += n - i;
                }
            }
            ConeKind::PolyEpi { log_coeffs, .. } if log_coeffs.is_empty() => {
                return Err(ConicError::ShapeMismatch(format!("polynomial `{label}` has no coefficients")));
            }
            _ => {}
        }
        self.constraints.push(Constraint { label: label.to_string(), kind });
        Ok(self.constraints.len() - 1)
    }

    pub fn add_eq(&mut self, label: &str, e: LinExpr) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::Zero(e))
    }

    /// `e ≥ 0`.
    pub fn add_nonneg(&mut self, label: &str, e: LinExpr) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::NonNeg(e))
    }

    /// `lhs ≤ rhs`.
    pub fn add_le(&mut self, label: &str, lhs: LinExpr, rhs: LinExpr) -> Result<usize, ConicError> {
        self.add_nonneg(label, rhs - lhs)
    }

    pub fn add_soc(&mut self, label: &str, t: LinExpr, x: Vec<LinExpr>) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::Soc { t, x })
    }

    /// `Σ terms² ≤ rhs`.
    pub fn add_quad_le(&mut self, label: &str, terms: Vec<LinExpr>, rhs: LinExpr) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::Quad { terms, rhs })
    }

    /// `X ⪰ 0` where `X[i][j] = entry(i, j)` for `i ≤ j`.
    pub fn add_psd<F>(&mut self, label: &str, n: usize, mut entry: F) -> Result<usize, ConicError>
    where
        F: FnMut(usize, usize) -> CExpr,
    {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(entry(i, j));
            }
        }
        self.add_constraint(label, ConeKind::Psd { n, upper })
    }

    /// `t ≤ ln x`.
    pub fn add_log_hypo(&mut self, label: &str, t: LinExpr, x: LinExpr) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::LogHypo { t, x })
    }

    /// `Σ exp(log_coeffs[l]) u^l ≤ bound`, `u ≥ 0`.
    pub fn add_poly_epi(&mut self, label: &str, log_coeffs: Vec<f64>, u: LinExpr, bound: LinExpr) -> Result<usize, ConicError> {
        self.add_constraint(label, ConeKind::PolyEpi { log_coeffs, u, bound })
    }

    pub fn set_warm_start(&mut self, x: Vec<f64>) -> Result<(), ConicError> {
        if x.len() != self.n {
            return Err(ConicError::ShapeMismatch(format!("warm start has {} entries, program has {}", x.len(), self.n)));
        }
        self.warm_start = Some(x);
        Ok(())
    }

    pub fn warm_start(&self) -> Option<&[f64]> {
        self.warm_start.as_deref()
    }

    /// Objective value at `x`, in the program's own sense.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Number of constraints of each kind, keyed by kind name.
    pub fn census(&self) -> Vec<(&'static str, usize)> {
        let mut out: Vec<(&'static str, usize)> = Vec::new();
        for c in &self.constraints {
            let k = c.kind.name();
            match out.iter_mut().find(|p| p.0 == k) {
                Some(p) => p.1 += 1,
                None => out.push((k, 1)),
            }
        }
        out
    }

    /// Sizes of all PSD blocks, in constraint order.
    pub fn psd_sizes(&self) -> Vec<usize> {
        self.constraints
            .iter()
            .filter_map(|c| match c.kind {
                ConeKind::Psd { n, .. } => Some(n),
                _ => None,
            })
            .collect()
    }
}

pub(crate) fn psd_matrix(n: usize, upper: &[CExpr], x: &[f64]) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let z = upper[k].eval(x);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 1;
        }
    }
    m
}

/// Polynomial value in log-coefficient form, extended linearly below zero.
pub(crate) fn poly_value(log_coeffs: &[f64], u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        let c0 = log_coeffs[0].exp();
        let c1 = log_coeffs.get(1).map_or(0.0, |c| c.exp());
        return (c0 + c1 * u, c1, 0.0);
    }
    let lu = u.ln();
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (l, &lc) in log_coeffs.iter().enumerate() {
        if lc == f64::NEG_INFINITY {
            continue;
        }
        let lf = l as f64;
        v += (lc + lf * lu).exp();
        if l >= 1 {
            d1 += lf * (lc + (lf - 1.0) * lu).exp();
        }
        if l >= 2 {
            d2 += lf * (lf - 1.0) * (lc + (lf - 2.0) * lu).exp();
        }
    }
    (v, d1, d2)
}

/// Signed violation of each constraint at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    /// `(label, violation)`; positive values are violations.
    pub per_constraint: Vec<(String, f64)>,
    pub max_violation: f64,
}

impl ViolationReport {
    /// Labels of constraints violated by more than `tol`.
    pub fn flagged(&self, tol: f64) -> Vec<&str> {
        self.per_constraint.iter().filter(|p| p.1 > tol).map(|p| p.0.as_str()).collect()
    }
}

pub(crate) fn constraint_violation(kind: &ConeKind, x: &[f64]) -> f64 {
    match kind {
        ConeKind::Zero(e) => e.eval(x).abs(),
        ConeKind::NonNeg(e) => -e.eval(x),
        ConeKind::Soc { t, x: v } => v.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt() - t.eval(x),
        ConeKind::Quad { terms, rhs } => terms.iter().map(|e| e.eval(x).powi(2)).sum::<f64>() - rhs.eval(x),
        ConeKind::Psd { n, upper } => {
            let m = psd_matrix(*n, upper, x);
            let eig = m.symmetric_eigenvalues();
            -eig.iter().cloned().fold(f64::INFINITY, f64::min)
        }
        ConeKind::LogHypo { t, x: arg } => {
            let a = arg.eval(x);
            if a <= 0.0 {
                f64::INFINITY
            } else {
                t.eval(x) - a.ln()
            }
        }
        ConeKind::PolyEpi { log_coeffs, u, bound } => {
            let uv = u.eval(x);
            let g = poly_value(log_coeffs, uv.max(0.0)).0;
            (g - bound.eval(x)).max(-uv)
        }
    }
}

/// Evaluates every constraint at `point`. `tol` only feeds [`ViolationReport::flagged`] callers.
pub fn verify_point(program: &ConicProgram, point: &[f64]) -> Result<ViolationReport, ConicError> {
    if point.len() != program.n {
        return Err(ConicError::ShapeMismatch(format!("point has {} entries, program has {}", point.len(), program.n)));
    }
    let per: Vec<(String, f64)> = program
        .constraints
        .iter()
        .map(|c| (c.label.clone(), constraint_violation(&c.kind, point)))
        .collect();
    let max_violation = per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ViolationReport { per_constraint: per, max_violation })
}

fn fmt_expr(f: &mut fmt::Formatter<'_>, e: &LinExpr) -> fmt::Result {
    let c = e.canonical();
    for (i, a) in &c.terms {
        write!(f, " {a:+.17e}*x{i}")?;
    }
    write!(f, " {:+.17e}", c.constant)
}

/// Plain-text standard-form listing.
impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# variables: {} real coordinates", self.n)?;
        for v in &self.vars {
            writeln!(f, "var {} {:?} x{}..x{}", v.name, v.var.shape, v.var.offset, v.var.offset + v.var.shape.real_len())?;
        }
        let dir = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        write!(f, "{dir}")?;
        fmt_expr(f, &self.objective)?;
        writeln!(f)?;
        for c in &self.constraints {
            write!(f, "con {} {}", c.kind.name(), c.label)?;
            match &c.kind {
                ConeKind::Psd { n, .. } => write!(f, " n={n}")?,
                ConeKind::PolyEpi { log_coeffs, .. } => write!(f, " degree={}", log_coeffs.len() - 1)?,
                _ => {}
            }
            writeln!(f)?;
            for e in c.kind.exprs() {
                write!(f, "  row")?;
                fmt_expr(f, e)?;
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_layout_round_trip() {
        let mut p = ConicProgram::new();
        let h = p.add_hermitian("H", 3).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new(i as f64 + 1.0, 0.0)
            } else if i < j {
                Complex64::new(i as f64 + 0.5, j as f64 - 0.25)
            } else {
                Complex64::new(j as f64 + 0.5, -(i as f64 - 0.25))
            }
        });
        let mut x = vec![0.0; p.n_real()];
        h.set_hermitian(&mut x, &m);
        assert_eq!(h.hermitian_value(&x), m);
        assert_eq!(p.n_real(), 9);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ConicProgram::new();
        p.add_scalar("t").unwrap();
        assert_eq!(p.add_scalar("t"), Err(ConicError::DuplicateName("t".into())));
    }

    #[test]
    fn out_of_range_reference_rejected() {
        let mut p = ConicProgram::new();
        p.add_scalar("t").unwrap();
        let e = p.add_nonneg("bad", LinExpr::var(4)).unwrap_err();
        assert!(matches!(e, ConicError::UnknownVariable { index: 4, .. }));
    }
}
