//! Self-concordant barriers in the local coordinates of one constraint block.
//!
//! A block maps the global point through a dense affine map `y = A x_S + b`
//! onto the coordinates its cone understands; the kernels below only ever
//! see `y`.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Cone {
    /// `y0 > 0`.
    NonNeg,
    /// `y0 > ‖y[1..]‖`.
    Soc,
    /// `y0 > Σ y[1..]²`.
    Quad,
    /// `y = [t, x]`, `t < ln x`.
    LogHypo,
    /// `y = [u, b, v]`, `b > g(u)`, `v > 0`.
    PolyEpi(Vec<f64>),
    /// Hermitian `n × n` in the variable layout: diagonal, then `(re, im)` pairs.
    Psd(usize),
}

impl Cone {
    /// Barrier parameter.
    pub fn nu(&self) -> f64 {
        match self {
            Cone::NonNeg | Cone::Quad => 1.0,
            Cone::Soc | Cone::LogHypo | Cone::PolyEpi(_) => 2.0,
            Cone::Psd(n) => *n as f64,
        }
    }

    /// Phase-I shift direction: adding `s · shift` to `y` enlarges the cone.
    pub fn shift(&self, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        match self {
            Cone::NonNeg | Cone::Soc | Cone::Quad => v[0] = 1.0,
            Cone::LogHypo => {
                v[0] = -1.0;
                v[1] = 1.0;
            }
            Cone::PolyEpi(_) => {
                v[1] = 1.0;
                v[2] = 1.0;
            }
            Cone::Psd(n) => v[..*n].iter_mut().for_each(|x| *x = 1.0),
        }
        v
    }

    /// Smallest `s` for which `y + s · shift` lies in the cone (the block is
    /// strictly inside for every larger `s`).
    pub fn required_shift(&self, y: &[f64]) -> f64 {
        match self {
            Cone::NonNeg => -y[0],
            Cone::Soc => y[1..].iter().map(|v| v * v).sum::<f64>().sqrt() - y[0],
            Cone::Quad => y[1..].iter().map(|v| v * v).sum::<f64>() - y[0],
            Cone::LogHypo => log_hypo_shift(y[0], y[1]),
            Cone::PolyEpi(c) => (poly(c, y[0]).0 - y[1]).max(-y[2]),
            Cone::Psd(n) => {
                let m = hermitian_from_params(*n, y);
                -m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Barrier value, or `None` outside the open cone.
    pub fn value(&self, y: &[f64]) -> Option<f64> {
        match self {
            Cone::NonNeg => (y[0] > 0.0).then(|| -y[0].ln()),
            Cone::Soc => {
                let u = y[0] * y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
                (y[0] > 0.0 && u > 0.0).then(|| -u.ln())
            }
            Cone::Quad => {
                let u = y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
                (u > 0.0).then(|| -u.ln())
            }
            Cone::LogHypo => {
                if y[1] <= 0.0 {
                    return None;
                }
                let u = y[1].ln() - y[0];
                (u > 0.0).then(|| -u.ln() - y[1].ln())
            }
            Cone::PolyEpi(c) => {
                let w = y[1] - poly(c, y[0]).0;
                (w > 0.0 && y[2] > 0.0).then(|| -w.ln() - y[2].ln())
            }
            Cone::Psd(n) => {
                let l = cholesky(&hermitian_from_params(*n, y))?;
                Some(-2.0 * (0..*n).map(|i| l[(i, i)].re.ln()).sum::<f64>())
            }
        }
    }

    /// Value, gradient and Hessian (row-major `d × d`) at `y`.
    pub fn derivatives(&self, y: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Option<f64> {
        let d = y.len();
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        match self {
            Cone::NonNeg => {
                if y[0] <= 0.0 {
                    return None;
                }
                grad[0] = -1.0 / y[0];
                hess[0] = 1.0 / (y[0] * y[0]);
                Some(-y[0].ln())
            }
            Cone::Soc => {
                let u = y[0] * y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
                if y[0] <= 0.0 || u <= 0.0 {
                    return None;
                }
                // ∇u = 2Jy, ∇²u = 2J with J = diag(1, -1, ..., -1).
                let jy: Vec<f64> = (0..d).map(|i| if i == 0 { y[0] } else { -y[i] }).collect();
                for i in 0..d {
                    grad[i] = -2.0 * jy[i] / u;
                    for j in 0..d {
                        hess[i * d + j] = 4.0 * jy[i] * jy[j] / (u * u);
                    }
                    hess[i * d + i] -= if i == 0 { 2.0 / u } else { -2.0 / u };
                }
                Some(-u.ln())
            }
            Cone::Quad => {
                let u = y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
                if u <= 0.0 {
                    return None;
                }
                let du: Vec<f64> = (0..d).map(|i| if i == 0 { 1.0 } else { -2.0 * y[i] }).collect();
                for i in 0..d {
                    grad[i] = -du[i] / u;
                    for j in 0..d {
                        hess[i * d + j] = du[i] * du[j] / (u * u);
                    }
                    if i > 0 {
                        hess[i * d + i] += 2.0 / u;
                    }
                }
                Some(-u.ln())
            }
            Cone::LogHypo => {
                let (t, x) = (y[0], y[1]);
                if x <= 0.0 {
                    return None;
                }
                let u = x.ln() - t;
                if u <= 0.0 {
                    return None;
                }
                let du = [-1.0, 1.0 / x];
                grad[0] = -du[0] / u;
                grad[1] = -du[1] / u - 1.0 / x;
                for i in 0..2 {
                    for j in 0..2 {
                        hess[i * 2 + j] = du[i] * du[j] / (u * u);
                    }
                }
                // −∇²u / u plus the Hessian of −ln x.
                hess[3] += 1.0 / (x * x * u) + 1.0 / (x * x);
                Some(-u.ln() - x.ln())
            }
            Cone::PolyEpi(c) => {
                let (g, g1, g2) = poly(c, y[0]);
                let w = y[1] - g;
                if w <= 0.0 || y[2] <= 0.0 {
                    return None;
                }
                let dw = [-g1, 1.0];
                grad[0] = -dw[0] / w;
                grad[1] = -dw[1] / w;
                grad[2] = -1.0 / y[2];
                for i in 0..2 {
                    for j in 0..2 {
                        hess[i * 3 + j] = dw[i] * dw[j] / (w * w);
                    }
                }
                hess[0] += g2 / w;
                hess[8] = 1.0 / (y[2] * y[2]);
                Some(-w.ln() - y[2].ln())
            }
            Cone::Psd(n) => psd_derivatives(*n, y, grad, hess),
        }
    }
}

/// Smallest `s` with `t − s < ln(x + s)`; the left side falls and the right
/// side rises in `s`, so the root is bracketed and found by bisection.
fn log_hypo_shift(t: f64, x: f64) -> f64 {
    let h = |s: f64| (x + s).ln() - t + s;
    let mut lo = -x;
    let mut hi = (1.0 - x).max(-x + 1.0);
    let mut step = 1.0;
    while h(hi) <= 0.0 {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `Σ exp(c_l) u^l` with first and second derivatives; below zero the
/// polynomial continues along its tangent at the origin.
pub(crate) fn poly(c: &[f64], u: f64) -> (f64, f64, f64) {
    crate::program::poly_value(c, u)
}

pub(crate) fn hermitian_from_params(n: usize, y: &[f64]) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(y[i], 0.0);
    }
    let mut p = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(y[p], y[p + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            p += 2;
        }
    }
    m
}

/// Lower Cholesky factor of a Hermitian matrix, `None` unless it is
/// positive definite. The complex factorization in nalgebra takes complex
/// square roots of negative pivots, so the pivot test is done here.
pub(crate) fn cholesky(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = m.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut piv = m[(j, j)].re;
        for k in 0..j {
            piv -= l[(j, k)].norm_sqr();
        }
        if !(piv > 0.0) || !piv.is_finite() {
            return None;
        }
        let d = piv.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / d;
        }
    }
    Some(l)
}

/// `(L Lᴴ)⁻¹` from the factor.
fn inverse_from_cholesky(l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = l.nrows();
    // Forward substitution for L⁻¹, column by column.
    let mut li = DMatrix::<Complex64>::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut v = if i == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in c..i {
                v -= l[(i, k)] * li[(k, c)];
            }
            li[(i, c)] = v / l[(i, i)];
        }
    }
    li.adjoint() * li
}

/// Basis matrices of the parameter layout as sparse `(coef, row, col)` lists.
fn psd_basis(n: usize) -> Vec<Vec<(Complex64, usize, usize)>> {
    let one = Complex64::new(1.0, 0.0);
    let i1 = Complex64::new(0.0, 1.0);
    let mut b: Vec<Vec<(Complex64, usize, usize)>> = (0..n).map(|i| vec![(one, i, i)]).collect();
    for i in 0..n {
        for j in i + 1..n {
            b.push(vec![(one, i, j), (one, j, i)]);
            b.push(vec![(i1, i, j), (-i1, j, i)]);
        }
    }
    b
}

/// `−ln det X` with gradient `−tr(Y B_p)` and Hessian `tr(Y B_p Y B_q)`,
/// `Y = X⁻¹`, using `tr(Y E_ab Y E_cd) = Y_da Y_bc`.
fn psd_derivatives(n: usize, y: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Option<f64> {
    let l = cholesky(&hermitian_from_params(n, y))?;
    let value = -2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    let yinv = inverse_from_cholesky(&l);
    let basis = psd_basis(n);
    let d = n * n;
    for (p, bp) in basis.iter().enumerate() {
        let tr: Complex64 = bp.iter().map(|&(a, r, c)| a * yinv[(c, r)]).sum();
        grad[p] = -tr.re;
    }
    for p in 0..d {
        for q in 0..=p {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(al, a, b) in &basis[p] {
                for &(be, c, dd) in &basis[q] {
                    acc += al * be * yinv[(dd, a)] * yinv[(b, c)];
                }
            }
            hess[p * d + q] = acc.re;
            hess[q * d + p] = acc.re;
        }
    }
    Some(value)
}
