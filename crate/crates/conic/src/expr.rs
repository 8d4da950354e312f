//! Affine expressions over the real coordinates of a program.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// `Σ coef · x[index] + constant`. Repeated indices are allowed and summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn term(index: usize, coef: f64) -> Self {
        Self { terms: vec![(index, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, index: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Merges repeated indices and drops zero coefficients.
    pub fn canonical(&self) -> Self {
        let mut t = self.terms.clone();
        t.sort_by_key(|p| p.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|p| p.0).max()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        *self += &rhs;
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend(rhs.terms.iter().map(|&(i, c)| (i, -c)));
        self.constant -= rhs.constant;
    }
}

impl SubAssign for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        *self -= &rhs;
    }
}

impl AddAssign<f64> for LinExpr {
    fn add_assign(&mut self, rhs: f64) {
        self.constant += rhs;
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self -= &rhs;
        self
    }
}

impl Sub<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: &LinExpr) -> LinExpr {
        self -= rhs;
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scale(rhs)
    }
}

impl Mul<LinExpr> for f64 {
    type Output = LinExpr;
    fn mul(self, rhs: LinExpr) -> LinExpr {
        rhs.scale(self)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

impl std::iter::Sum for LinExpr {
    fn sum<I: Iterator<Item = LinExpr>>(iter: I) -> LinExpr {
        let mut acc = LinExpr::zero();
        for e in iter {
            acc += &e;
        }
        acc
    }
}

/// A complex affine expression, kept as real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(re: LinExpr, im: LinExpr) -> Self {
        Self { re, im }
    }

    pub fn real(re: LinExpr) -> Self {
        Self { re, im: LinExpr::zero() }
    }

    pub fn constant(z: Complex64) -> Self {
        Self { re: LinExpr::constant(z.re), im: LinExpr::constant(z.im) }
    }

    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    /// `z · self`.
    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            re: self.re.clone() * z.re - self.im.clone() * z.im,
            im: self.im.clone() * z.re + self.re.clone() * z.im,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }

    /// `Re(conj(z) · self)`, the real inner product with a constant.
    pub fn re_dot(&self, z: Complex64) -> LinExpr {
        self.re.clone() * z.re + self.im.clone() * z.im
    }
}

impl Add for CExpr {
    type Output = CExpr;
    fn add(self, rhs: CExpr) -> CExpr {
        CExpr { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for CExpr {
    type Output = CExpr;
    fn sub(self, rhs: CExpr) -> CExpr {
        CExpr { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl AddAssign<&CExpr> for CExpr {
    fn add_assign(&mut self, rhs: &CExpr) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Mul<f64> for CExpr {
    type Output = CExpr;
    fn mul(self, rhs: f64) -> CExpr {
        CExpr { re: self.re * rhs, im: self.im * rhs }
    }
}

impl Mul<Complex64> for CExpr {
    type Output = CExpr;
    fn mul(self, rhs: Complex64) -> CExpr {
        self.scale(rhs)
    }
}

impl std::iter::Sum for CExpr {
    fn sum<I: Iterator<Item = CExpr>>(iter: I) -> CExpr {
        let mut acc = CExpr::zero();
        for e in iter {
            acc += &e;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_merges() {
        let e = LinExpr::var(3) + LinExpr::term(1, 2.0) - LinExpr::var(3) + 4.0;
        let c = e.canonical();
        assert_eq!(c.terms, vec![(1, 2.0)]);
        assert_eq!(c.constant, 4.0);
    }

    #[test]
    fn complex_scaling() {
        let x = [1.5, -0.5];
        let e = CExpr::new(LinExpr::var(0), LinExpr::var(1));
        let z = Complex64::new(0.3, 2.0);
        let got = e.scale(z).eval(&x);
        let want = z * Complex64::new(1.5, -0.5);
        assert!((got - want).norm() < 1e-15);
        assert!((e.re_dot(z).eval(&x) - (z.conj() * Complex64::new(1.5, -0.5)).re).abs() < 1e-15);
    }
}
