//! Service and arrival laws whose densities are finite sums of `y^k e^{-a y}`
//! terms, together with their exact rational Laplace transforms.
//!
//! Two transforms matter for the solvers: the LST `phi(s) = E e^{-sS}` and the
//! FGM kernel transform `g*(s)`, the Laplace transform of `f(y)(1 - 2F(y))`.
//! Both are kept as a numerator polynomial over a factored denominator
//! `prod (s + a_j)^{m_j}`, which keeps derivatives exact and cheap.

use crate::error::{Error, Result};
use crate::poly::Poly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Cap on numerator degree produced by repeated differentiation.
pub const DEFAULT_DEGREE_CAP: usize = 512;
/// Largest derivative order accepted by [`RationalTransform::derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 64;

const RATE_MERGE_TOL: f64 = 1e-12;

/// One term `coef * y^power * exp(-rate * y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub power: u32,
    pub rate: f64,
}

/// Finite sum of [`ExpTerm`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpPoly {
    pub terms: Vec<ExpTerm>,
}

impl ExpPoly {
    pub fn eval(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * y.powi(t.power as i32) * (-t.rate * y).exp())
            .sum()
    }

    pub fn scale(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.coef *= k;
        }
        self
    }

    pub fn add(mut self, other: &ExpPoly) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn mul(&self, other: &ExpPoly) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(ExpTerm {
                    coef: a.coef * b.coef,
                    power: a.power + b.power,
                    rate: a.rate + b.rate,
                });
            }
        }
        Self { terms }
    }

    /// Exact Laplace transform `sum coef * power! / (s + rate)^(power + 1)`.
    pub fn laplace(&self) -> RationalTransform {
        let mut poles = PoleSet::default();
        for t in &self.terms {
            poles.insert(t.rate, t.power + 1);
        }
        let mut num = Poly::zero();
        for t in &self.terms {
            let mut other = poles.clone();
            other.remove(t.rate, t.power + 1);
            let c = t.coef * factorial(t.power);
            num = &num + &other.to_poly().scale_real(c);
        }
        RationalTransform::new(num, poles)
    }
}

/// Factored denominator `prod (s + rate)^mult`; all rates positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoleSet {
    factors: Vec<(f64, u32)>,
}

impl PoleSet {
    pub fn factors(&self) -> &[(f64, u32)] {
        &self.factors
    }

    fn position(&self, rate: f64) -> Option<usize> {
        self.factors
            .iter()
            .position(|&(a, _)| (a - rate).abs() <= RATE_MERGE_TOL * a.abs().max(rate.abs()).max(1.0))
    }

    /// Raises the multiplicity of `rate` to at least `mult` (lcm semantics).
    pub fn insert(&mut self, rate: f64, mult: u32) {
        match self.position(rate) {
            Some(i) => self.factors[i].1 = self.factors[i].1.max(mult),
            None => self.factors.push((rate, mult)),
        }
    }

    /// Lowers the multiplicity of `rate` by `mult`.
    fn remove(&mut self, rate: f64, mult: u32) {
        if let Some(i) = self.position(rate) {
            self.factors[i].1 -= mult.min(self.factors[i].1);
        }
    }

    pub fn lcm(&self, other: &PoleSet) -> PoleSet {
        let mut out = self.clone();
        for &(a, m) in &other.factors {
            out.insert(a, m);
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|&(_, m)| m as usize).sum()
    }

    pub fn to_poly(&self) -> Poly {
        self.factors
            .iter()
            .fold(Poly::one(), |acc, &(a, m)| &acc * &Poly::linear_pow(a, 1.0, m))
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &(a, m)| acc * (s + a).powu(m))
    }

    /// The polynomial `self / sub`; `sub` must divide `self`.
    pub fn quotient_poly(&self, sub: &PoleSet) -> Poly {
        let mut q = self.clone();
        for &(a, m) in &sub.factors {
            q.remove(a, m);
        }
        q.to_poly()
    }
}

/// `numerator(s) / prod (s + a_j)^{m_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransform {
    num: Poly,
    poles: PoleSet,
}

impl RationalTransform {
    pub fn new(num: Poly, poles: PoleSet) -> Self {
        Self { num, poles }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn poles(&self) -> &PoleSet {
        &self.poles
    }

    pub fn denominator(&self) -> Poly {
        self.poles.to_poly()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.poles.eval(s)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    /// Numerator once the transform is written over `target`, which must be a
    /// multiple of this transform's own denominator.
    pub fn numerator_over(&self, target: &PoleSet) -> Poly {
        &self.num * &target.quotient_poly(&self.poles)
    }

    /// The transform `s -> t(c s)` for `c > 0`.
    pub fn compose_scale(&self, c: f64) -> Self {
        let mut poles = PoleSet::default();
        for &(a, m) in &self.poles.factors {
            poles.insert(a / c, m);
        }
        let k = c.powi(-(self.poles.degree() as i32));
        Self::new(self.num.compose_scale(c).scale_real(k), poles)
    }

    fn derivative_once(&self) -> Self {
        // (N/Q)' = (N' R - N sum_j m_j R/(s+a_j)) / (Q R), R = prod (s + a_j)
        let linear: Vec<Poly> = self
            .poles
            .factors
            .iter()
            .map(|&(a, _)| Poly::shifted_var(a))
            .collect();
        let r = linear.iter().fold(Poly::one(), |acc, p| &acc * p);
        let mut num = &self.num.derivative() * &r;
        for (j, &(_, m)) in self.poles.factors.iter().enumerate() {
            let others = linear
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .fold(Poly::one(), |acc, (_, p)| &acc * p);
            num = &num - &(&self.num * &others).scale_real(m as f64);
        }
        let mut poles = self.poles.clone();
        for f in &mut poles.factors {
            f.1 += 1;
        }
        Self::new(num, poles)
    }

    /// Exact `k`-th derivative.
    pub fn derivative(&self, k: usize) -> Result<Self> {
        self.derivative_capped(k, DEFAULT_DEGREE_CAP)
    }

    pub fn derivative_capped(&self, k: usize, cap: usize) -> Result<Self> {
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::Domain(format!(
                "derivative order {k} exceeds {MAX_DERIVATIVE_ORDER}"
            )));
        }
        let mut t = self.clone();
        for _ in 0..k {
            t = t.derivative_once();
            if t.num.degree() > cap {
                return Err(Error::DegreeOverflow {
                    degree: t.num.degree(),
                    cap,
                });
            }
        }
        Ok(t)
    }

    /// Values `t(x), t'(x), ..., t^{(k)}(x)` at a real point.
    pub fn derivatives_at(&self, x: f64, k: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k + 1);
        let mut t = self.clone();
        out.push(t.eval_real(x));
        for _ in 0..k {
            t = t.derivative_once();
            if t.num.degree() > DEFAULT_DEGREE_CAP {
                return Err(Error::DegreeOverflow {
                    degree: t.num.degree(),
                    cap: DEFAULT_DEGREE_CAP,
                });
            }
            out.push(t.eval_real(x));
        }
        Ok(out)
    }
}

/// Parametric service or arrival law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Hyperexponential { weights: Vec<f64>, rates: Vec<f64> },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn erlang(shape: u32, rate: f64) -> Self {
        Self::Erlang { shape, rate }
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Self {
        Self::Hyperexponential { weights, rates }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_rate = |r: f64| !(r.is_finite() && r > 0.0);
        match self {
            Self::Exponential { rate } | Self::Erlang { rate, .. } if bad_rate(*rate) => Err(
                Error::Domain(format!("rate must be positive and finite, got {rate}")),
            ),
            Self::Erlang { shape: 0, .. } => Err(Error::Domain("erlang shape must be >= 1".into())),
            Self::Hyperexponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::Domain(
                        "hyperexponential weights and rates must be non-empty and equally long"
                            .into(),
                    ));
                }
                if let Some(r) = rates.iter().find(|&&r| bad_rate(r)) {
                    return Err(Error::Domain(format!(
                        "rate must be positive and finite, got {r}"
                    )));
                }
                if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                    return Err(Error::Domain("weights must lie in [0, 1]".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("weights sum to {total}, not 1")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Density as an exp-polynomial.
    pub fn density_terms(&self) -> ExpPoly {
        let terms = match self {
            Self::Exponential { rate } => vec![ExpTerm {
                coef: *rate,
                power: 0,
                rate: *rate,
            }],
            Self::Erlang { shape, rate } => vec![ExpTerm {
                coef: rate.powi(*shape as i32) / factorial(shape - 1),
                power: shape - 1,
                rate: *rate,
            }],
            Self::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(&p, &r)| ExpTerm {
                    coef: p * r,
                    power: 0,
                    rate: r,
                })
                .collect(),
        };
        ExpPoly { terms }
    }

    /// Survival function `1 - F` as an exp-polynomial.
    pub fn survival_terms(&self) -> ExpPoly {
        let terms = match self {
            Self::Exponential { rate } => vec![ExpTerm {
                coef: 1.0,
                power: 0,
                rate: *rate,
            }],
            Self::Erlang { shape, rate } => (0..*shape)
                .map(|j| ExpTerm {
                    coef: rate.powi(j as i32) / factorial(j),
                    power: j,
                    rate: *rate,
                })
                .collect(),
            Self::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(&p, &r)| ExpTerm {
                    coef: p,
                    power: 0,
                    rate: r,
                })
                .collect(),
        };
        ExpPoly { terms }
    }

    /// The FGM kernel `g(y) = f(y)(1 - 2F(y)) = 2 f(y) S(y) - f(y)`.
    pub fn g_terms(&self) -> ExpPoly {
        let f = self.density_terms();
        f.mul(&self.survival_terms()).scale(2.0).add(&f.clone().scale(-1.0))
    }

    pub fn lst(&self) -> RationalTransform {
        self.density_terms().laplace()
    }

    pub fn g_transform(&self) -> RationalTransform {
        self.g_terms().laplace()
    }

    /// Raw moment `E(S^r)`.
    pub fn moment(&self, r: u32) -> f64 {
        match self {
            Self::Exponential { rate } => factorial(r) / rate.powi(r as i32),
            Self::Erlang { shape, rate } => {
                (0..r).map(|j| (shape + j) as f64).product::<f64>() / rate.powi(r as i32)
            }
            Self::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(&p, &mu)| p * factorial(r) / mu.powi(r as i32))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => rate * (-rate * y).exp(),
            Self::Erlang { shape, rate } => {
                if y == 0.0 {
                    return if *shape == 1 { *rate } else { 0.0 };
                }
                let k = *shape as f64;
                (k * rate.ln() + (k - 1.0) * y.ln() - rate * y - ln_factorial(shape - 1)).exp()
            }
            Self::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(&p, &mu)| p * mu * (-mu * y).exp())
                .sum(),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -(-rate * y).exp_m1(),
            Self::Erlang { shape, rate } => {
                let x = rate * y;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..*shape {
                    term *= x / j as f64;
                    sum += term;
                }
                // small x: use the series of the lower incomplete gamma
                if x < 0.5 {
                    lower_gamma_series(*shape, x)
                } else {
                    1.0 - (-x).exp() * sum
                }
            }
            Self::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(&p, &mu)| -p * (-mu * y).exp_m1())
                .sum(),
        }
    }

    pub fn survival(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }

    /// Inverse cdf. Closed form for the exponential law, bracketed Newton
    /// (tolerance 1e-12 in probability) otherwise.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level {p} outside [0, 1)")));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match self {
            Self::Exponential { rate } => -(-p).ln_1p() / rate,
            _ if p == 0.0 => 0.0,
            Self::Erlang { shape, rate } => unit_erlang_quantile(*shape, p) / rate,
            _ => {
                let guess = self.mean() * (-(-p).ln_1p()).max(1e-3);
                newton_quantile(self, p, guess)
            }
        }
    }
}

/// Acklam's rational approximation to the standard normal quantile
/// (relative error about 1e-9); only used as a starting point.
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2,
        1.383577518672690e2, -3.066479806614716e1, 2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2,
        6.680131188771972e1, -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838,
        -2.549732539343734, 4.374664141464968, 2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (-p).ln_1p()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile of Erlang(k, 1): Halley iteration from the Wilson-Hilferty guess.
fn unit_erlang_quantile(k: u32, p: f64) -> f64 {
    if k == 1 {
        return -(-p).ln_1p();
    }
    let kf = k as f64;
    let c = 1.0 / (9.0 * kf);
    let wh = 1.0 - c + normal_quantile_guess(p) * c.sqrt();
    let mut x = if wh > 0.2 {
        kf * wh.powi(3)
    } else {
        // F(x) ~ x^k / k! near zero
        (p * factorial(k)).powf(1.0 / kf)
    };
    let upper = p > 0.5;
    let q = 1.0 - p;
    for _ in 0..60 {
        let e = (-x).exp();
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..k {
            term *= x / j as f64;
            sum += term;
        }
        let g = if upper {
            q - e * sum
        } else if x < 0.5 {
            lower_gamma_series(k, x) - p
        } else {
            (1.0 - e * sum) - p
        };
        let d1 = e * term;
        if d1 <= 0.0 || !d1.is_finite() {
            break;
        }
        let d2 = d1 * ((kf - 1.0) / x - 1.0);
        let step = 2.0 * g * d1 / (2.0 * d1 * d1 - g * d2);
        let mut next = x - step;
        if !(next > 0.0) {
            next = 0.5 * x;
        }
        let done = (next - x).abs() <= 1e-14 * x;
        x = next;
        if done {
            break;
        }
    }
    x
}

fn lower_gamma_series(shape: u32, x: f64) -> f64 {
    // P(k, x) = x^k e^{-x} / k! * sum_{n>=0} x^n / ((k+1)...(k+n))
    let k = shape as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..200 {
        term *= x / (k + n as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    (k * x.ln() - x - ln_factorial(shape)).exp() * sum
}

fn newton_quantile(d: &DistributionSpec, p: f64, guess: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = guess.max(1e-12);
    while d.cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..100 {
        let fx = d.cdf(x) - p;
        if fx.abs() <= 1e-12 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = d.pdf(x);
        let mut next = if dens > 0.0 { x - fx / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|j| (j as f64).ln()).sum()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}
