//! Dense complex polynomials in the monomial basis.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Polynomial with complex coefficients, stored lowest degree first.
#[derive(Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// `s + a`.
    pub fn shifted_var(a: f64) -> Self {
        Self::from_real(&[a, 1.0])
    }

    /// `(c0 + c1 s)^k`.
    pub fn linear_pow(c0: f64, c1: f64, k: u32) -> Self {
        let base = Self::from_real(&[c0, c1]);
        base.pow(k)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    fn trim(&mut self) {
        while let Some(c) = self.coeffs.last() {
            if *c == Complex64::new(0.0, 0.0) {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| c * j as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(Complex64::new(k, 0.0))
    }

    /// The polynomial `s -> p(c s)`.
    pub fn compose_scale(&self, c: f64) -> Self {
        let mut f = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&a| {
                let v = a * f;
                f *= c;
                v
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Synthetic division by `(s - r)`, dropping the remainder.
    pub fn deflate(&self, r: Complex64) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return Self::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n - 1];
        let mut carry = Complex64::new(0.0, 0.0);
        for j in (1..n).rev() {
            carry = self.coeffs[j] + carry * r;
            out[j - 1] = carry;
        }
        Self::new(out)
    }

    /// True when every coefficient is real to within `tol` of its modulus.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.im.abs() <= tol * (1.0 + c.norm()))
    }

    /// Fujiwara's bound: every root has modulus at most this value.
    pub fn root_bound(&self) -> f64 {
        let n = self.degree();
        if n == 0 {
            return 0.0;
        }
        let lead = self.leading().norm();
        (1..=n)
            .map(|k| {
                let c = self.coeffs[n - k].norm() / lead;
                let c = if k == n { c / 2.0 } else { c };
                c.powf(1.0 / k as f64)
            })
            .fold(0.0, f64::max)
            * 2.0
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|j| {
                    self.coeffs.get(j).copied().unwrap_or(zero)
                        + rhs.coeffs.get(j).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| -c).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn horner_and_product() {
        let p = Poly::from_real(&[1.0, -3.0, 2.0]); // (1-s)(1-2s)
        assert_eq!(p.eval(c(1.0)), c(0.0));
        assert_eq!(p.eval(c(0.5)), c(0.0));
        let q = &Poly::from_real(&[1.0, -1.0]) * &Poly::from_real(&[1.0, -2.0]);
        assert_eq!(p, q);
    }

    #[test]
    fn derivative_of_cubic() {
        let p = Poly::from_real(&[5.0, 0.0, 0.0, 2.0]);
        assert_eq!(p.derivative(), Poly::from_real(&[0.0, 0.0, 6.0]));
        assert!(Poly::from_real(&[7.0]).derivative().is_zero());
    }

    #[test]
    fn deflation_removes_root() {
        let p = Poly::linear_pow(-2.0, 1.0, 3); // (s-2)^3
        let q = p.deflate(c(2.0));
        assert_eq!(q.degree(), 2);
        assert!((q.eval(c(3.0)) - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn compose_scale_matches_direct() {
        let p = Poly::from_real(&[1.0, 2.0, 3.0]);
        let q = p.compose_scale(0.5);
        let s = Complex64::new(0.3, -1.2);
        assert!((q.eval(s) - p.eval(s * 0.5)).norm() < 1e-14);
    }

    #[test]
    fn root_bound_contains_roots() {
        let p = &Poly::linear_pow(-3.0, 1.0, 2) * &Poly::shifted_var(10.0);
        assert!(p.root_bound() >= 10.0);
    }
}
