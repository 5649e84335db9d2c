//! Characteristic roots in the right half plane.
//!
//! Roots are located as eigenvalues of the companion matrix of the
//! denominator-cleared characteristic polynomial, polished by Newton's method,
//! and their number is confirmed independently by the argument principle on
//! the evaluable (uncleared) characteristic function.

use crate::distlib::{binomial, PoleSet};
use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use crate::poly::Poly;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

/// Roots with real part above this (times the model scale) count as
/// right-half-plane roots; anything below is the structural root at 0.
pub const POSITIVE_RE_THRESHOLD: f64 = 1e-9;
/// Roots closer than this (relative) are merged and counted with multiplicity.
pub const DEDUP_TOL: f64 = 1e-8;
const CONTOUR_RETRIES: usize = 3;

type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Evaluable characteristic function `D(s)` plus its cleared polynomial form.
#[derive(Clone)]
pub struct CharacteristicFunction {
    eval: ComplexFn,
    poly: Option<Poly>,
    scale: f64,
    contour_radius: f64,
}

impl fmt::Debug for CharacteristicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharacteristicFunction")
            .field("poly", &self.poly)
            .field("scale", &self.scale)
            .field("contour_radius", &self.contour_radius)
            .finish()
    }
}

impl CharacteristicFunction {
    pub fn new<F>(eval: F, poly: Option<Poly>, scale: f64, contour_radius: f64) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            poly,
            scale,
            contour_radius,
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.eval)(s)
    }

    pub fn poly(&self) -> Option<&Poly> {
        self.poly.as_ref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn contour_radius(&self) -> f64 {
        self.contour_radius
    }

    fn derivative(&self, s: Complex64) -> Complex64 {
        let h = 1e-6 * self.scale.max(s.norm());
        (self.eval(s + h) - self.eval(s - h)) / (2.0 * h)
    }
}

/// Right-half-plane roots, verified against the winding number.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    pub verified_count: i64,
    /// `|D(r)| / (1 + |D'(r)|)` per root.
    pub residuals: Vec<f64>,
}

impl RootSet {
    pub fn count(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// The roots repeated by multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&r, &m)| std::iter::repeat_n(r, m))
            .collect()
    }
}

/// All roots of a polynomial via companion-matrix eigenvalues.
pub fn polynomial_roots(p: &Poly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if p.is_zero() {
        return Err(Error::Domain("roots of the zero polynomial".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // rescale s = c z so the coefficients are balanced around |z| ~ 1
    let lead = p.leading().norm();
    let low = p.coeffs().iter().position(|a| a.norm() > 0.0).unwrap_or(0);
    let c = if low < n {
        (p.coeffs()[low].norm() / lead).powf(1.0 / (n - low) as f64)
    } else {
        1.0
    };
    let c = if c > 0.0 && c.is_finite() { c } else { 1.0 };
    let q = p.compose_scale(c);
    let lead = q.leading();
    let monic: Vec<Complex64> = q.coeffs()[..n].iter().map(|&a| a / lead).collect();

    let raw: Vec<Complex64> = if q.is_real(1e-14) {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for (i, a) in monic.iter().enumerate() {
            m[(i, n - 1)] = -a.re;
        }
        nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
        let schur = Schur::try_new(m, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EvaluationFailure("companion Schur did not converge".into()))?;
        schur.complex_eigenvalues().iter().copied().collect()
    } else {
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for (i, &a) in monic.iter().enumerate() {
            m[(i, n - 1)] = -a;
        }
        let schur = Schur::try_new(m, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EvaluationFailure("companion Schur did not converge".into()))?;
        schur
            .eigenvalues()
            .ok_or_else(|| Error::EvaluationFailure("complex Schur form not triangular".into()))?
            .iter()
            .copied()
            .collect()
    };
    let dp = p.derivative();
    Ok(raw.into_iter().map(|z| newton_polish(p, &dp, z * c)).collect())
}

fn newton_polish(p: &Poly, dp: &Poly, mut z: Complex64) -> Complex64 {
    let mut best = p.eval(z).norm();
    for _ in 0..8 {
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - p.eval(z) / d;
        let r = p.eval(next).norm();
        if !(r < best) {
            break;
        }
        best = r;
        z = next;
    }
    z
}

/// Number of zeros of `f` inside the right half-disk of the given radius,
/// bounded by the segment `Re(s) = eps` and the semicircle centered at `eps`.
pub fn winding_count<F>(f: F, radius: f64) -> Result<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    winding_count_offset(f, radius, 1e-9 * radius.max(1.0))
}

pub fn winding_count_offset<F>(f: F, radius: f64, eps: f64) -> Result<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    let too_close = Error::ContourTooClose { radius };
    let arc = |t: f64| Complex64::new(eps, 0.0) + Complex64::from_polar(radius, PI * (t - 0.5));
    let seg = |t: f64| Complex64::new(eps, radius * (1.0 - 2.0 * t));
    let min_len = 2.5e-7 * radius.max(1.0);
    let mut total = 0.0;
    for path in [&arc as &dyn Fn(f64) -> Complex64, &seg] {
        const N0: usize = 1024;
        let mut t0 = 0.0;
        let mut f0 = f(path(0.0));
        if !finite_nonzero(f0) {
            return Err(too_close);
        }
        for k in 1..=N0 {
            let t1 = k as f64 / N0 as f64;
            let f1 = f(path(t1));
            if !finite_nonzero(f1) {
                return Err(too_close);
            }
            total += phase_increment(&f, path, (t0, f0), (t1, f1), min_len, 0)
                .ok_or(Error::ContourTooClose { radius })?;
            t0 = t1;
            f0 = f1;
        }
    }
    let turns = total / (2.0 * PI);
    let n = turns.round();
    if (turns - n).abs() > 0.1 {
        return Err(too_close);
    }
    Ok(n as i64)
}

fn finite_nonzero(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite() && z.norm() > 0.0
}

fn phase_increment<F>(
    f: &F,
    path: &dyn Fn(f64) -> Complex64,
    (t0, f0): (f64, Complex64),
    (t1, f1): (f64, Complex64),
    min_len: f64,
    depth: u32,
) -> Option<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let d = (f1 / f0).arg();
    if d.abs() < FRAC_PI_4 {
        return Some(d);
    }
    if depth > 48 || (path(t1) - path(t0)).norm() < min_len {
        return None;
    }
    let tm = 0.5 * (t0 + t1);
    let fm = f(path(tm));
    if !finite_nonzero(fm) {
        return None;
    }
    Some(
        phase_increment(f, path, (t0, f0), (tm, fm), min_len, depth + 1)?
            + phase_increment(f, path, (tm, fm), (t1, f1), min_len, depth + 1)?,
    )
}

/// Winding count of `D(s)/s`, with radius grown on near-contour zeros.
fn verified_winding(cf: &CharacteristicFunction, radius: f64) -> Result<i64> {
    let mut r = radius;
    let mut last = Error::ContourTooClose { radius: r };
    for _ in 0..=CONTOUR_RETRIES {
        match winding_count_offset(|s| cf.eval(s) / s, r, 1e-7 * cf.scale) {
            Ok(n) => return Ok(n),
            Err(e @ Error::ContourTooClose { .. }) => {
                last = e;
                r *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Roots of `cf` with positive real part, checked against `expected` and
/// against the winding number.
pub fn find_positive_roots(cf: &CharacteristicFunction, expected: usize) -> Result<RootSet> {
    let poly = cf
        .poly()
        .ok_or_else(|| Error::Unsupported("root finding needs a polynomial form".into()))?;
    let scale = cf.scale;
    let mut positive: Vec<Complex64> = polynomial_roots(poly)?
        .into_iter()
        .filter(|z| z.re > POSITIVE_RE_THRESHOLD * scale)
        .collect();
    positive.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let mut roots: Vec<Complex64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for z in positive {
        match roots
            .iter()
            .position(|r| (r - z).norm() <= DEDUP_TOL * scale.max(z.norm()))
        {
            Some(i) => mult[i] += 1,
            None => {
                roots.push(z);
                mult.push(1);
            }
        }
    }
    if poly.is_real(1e-14) {
        symmetrize_conjugates(&mut roots, scale);
    }

    // the coefficient bound guarantees every root lies inside the contour
    let radius = cf.contour_radius.max(1.05 * poly.root_bound());
    let winding = verified_winding(cf, radius)?;
    let found: usize = mult.iter().sum();
    if found != expected || winding != expected as i64 {
        return Err(Error::RootCountMismatch {
            expected,
            found,
            winding,
        });
    }
    let residuals = roots
        .iter()
        .map(|&r| cf.eval(r).norm() / (1.0 + cf.derivative(r).norm()))
        .collect();
    Ok(RootSet {
        roots,
        multiplicities: mult,
        verified_count: winding,
        residuals,
    })
}

fn symmetrize_conjugates(roots: &mut [Complex64], scale: f64) {
    let n = roots.len();
    for i in 0..n {
        if roots[i].im.abs() <= 1e-9 * scale.max(roots[i].norm()) {
            roots[i].im = 0.0;
            continue;
        }
        if roots[i].im < 0.0 {
            continue;
        }
        if let Some(j) = (0..n).find(|&j| j != i && (roots[j] - roots[i].conj()).norm() <= 1e-6 * scale.max(roots[i].norm())) {
            let avg = 0.5 * (roots[i] + roots[j].conj());
            roots[i] = avg;
            roots[j] = avg.conj();
        }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `D(s) = (2l - s)(l - s) - l (2l - s) phi(s) + theta s l g*(s)`.
pub fn mg1_characteristic(model: &QueueModel) -> Result<CharacteristicFunction> {
    if model.family != Family::Mg1 {
        return Err(Error::Unsupported("mg1_characteristic needs the M/G/1 family".into()));
    }
    model.require_stable()?;
    let lam = model.lambda;
    let theta = model.theta.value();
    let phi = model.service.lst();
    let g = model.service.g_transform();
    let poles = phi.poles().lcm(g.poles());
    let q = poles.to_poly();
    let two = Poly::from_real(&[2.0 * lam, -1.0]);
    let one = Poly::from_real(&[lam, -1.0]);
    let s_poly = Poly::from_real(&[0.0, 1.0]);
    let poly = &(&(&two * &one) * &q) - &(&two * &phi.numerator_over(&poles)).scale_real(lam);
    let poly = &poly + &(&s_poly * &g.numerator_over(&poles)).scale_real(theta * lam);
    let eval = move |s: Complex64| {
        (2.0 * lam - s) * (lam - s) - lam * (2.0 * lam - s) * phi.eval(s) + theta * s * lam * g.eval(s)
    };
    Ok(CharacteristicFunction::new(eval, Some(poly), lam, 20.0 * lam))
}

/// The unique right-half-plane root of the M/G/1 characteristic function.
pub fn find_tau1(model: &QueueModel) -> Result<Complex64> {
    let cf = mg1_characteristic(model)?;
    Ok(find_positive_roots(&cf, 1)?.roots[0])
}

/// Cleared characteristic function for Erlang(n, lambda) arrivals:
/// `(l-s)^n (2l-s)^{2n-1} - l^n [(2l-s)^{2n-1} phi(s)
///   + theta g*(s) (2 sum_i C(n+i-1, i) l^i (l-s)^n (2l-s)^{n-i-1} - (2l-s)^{2n-1})]`.
pub fn erlang_characteristic(model: &QueueModel) -> Result<CharacteristicFunction> {
    let n = match model.family {
        Family::Erlang { n } => n,
        _ => return Err(Error::Unsupported("erlang_characteristic needs Erlang arrivals".into())),
    };
    model.require_stable()?;
    let lam = model.lambda;
    let theta = model.theta.value();
    let phi = model.service.lst();
    let g = model.service.g_transform();
    let poles = phi.poles().lcm(g.poles());
    let q = poles.to_poly();
    let one = Poly::from_real(&[lam, -1.0]);
    let two = Poly::from_real(&[2.0 * lam, -1.0]);
    let two_pow = two.pow(2 * n - 1);
    let one_pow = one.pow(n);
    let mix = (0..n).fold(Poly::zero(), |acc, i| {
        let term = (&one_pow * &two.pow(n - i - 1)).scale_real(2.0 * binomial(n + i - 1, i) * lam.powi(i as i32));
        &acc + &term
    });
    let bracket = &mix - &two_pow;
    let lam_n = lam.powi(n as i32);
    let inner = &(&two_pow * &phi.numerator_over(&poles)) + &(&bracket * &g.numerator_over(&poles)).scale_real(theta);
    let poly = &(&(&one_pow * &two_pow) * &q) - &inner.scale_real(lam_n);
    let eval = move |s: Complex64| {
        let a = c(lam) - s;
        let b = c(2.0 * lam) - s;
        let b_pow = b.powu(2 * n - 1);
        let mix: Complex64 = (0..n)
            .map(|i| 2.0 * binomial(n + i - 1, i) * lam.powi(i as i32) * a.powu(n) * b.powu(n - i - 1))
            .sum();
        a.powu(n) * b_pow - lam_n * (b_pow * phi.eval(s) + theta * g.eval(s) * (mix - b_pow))
    };
    let radius = 10.0 * (n as f64 + 1.0) * lam;
    Ok(CharacteristicFunction::new(eval, Some(poly), lam, radius))
}

/// Independent-input reduction `(l-s)^n - l^n phi(s)` of the Erlang
/// characteristic function (the `(2l-s)^{2n-1}` factor divided out).
pub fn erlang_independent_characteristic(model: &QueueModel) -> Result<CharacteristicFunction> {
    let n = match model.family {
        Family::Erlang { n } => n,
        _ => return Err(Error::Unsupported("needs Erlang arrivals".into())),
    };
    model.require_stable()?;
    let lam = model.lambda;
    let phi = model.service.lst();
    let poles = phi.poles().clone();
    let one_pow = Poly::from_real(&[lam, -1.0]).pow(n);
    let lam_n = lam.powi(n as i32);
    let poly = &(&one_pow * &poles.to_poly()) - &phi.numerator_over(&poles).scale_real(lam_n);
    let eval = move |s: Complex64| (c(lam) - s).powu(n) - lam_n * phi.eval(s);
    let radius = 10.0 * (n as f64 + 1.0) * lam;
    Ok(CharacteristicFunction::new(eval, Some(poly), lam, radius))
}

/// Cleared bracket of the proportional family:
/// `(l-s)(2l-s) - sum_i p_i [l (2l-s) phi(a_i' s) - theta s l g*(a_i' s)]`, `a_i' = 1 - a_i`.
pub fn proportional_characteristic(model: &QueueModel) -> Result<CharacteristicFunction> {
    let atoms = match &model.family {
        Family::Proportional { atoms } => atoms.clone(),
        _ => return Err(Error::Unsupported("needs the proportional family".into())),
    };
    model.require_stable()?;
    let lam = model.lambda;
    let theta = model.theta.value();
    let scaled: Vec<_> = atoms
        .atoms()
        .iter()
        .map(|at| {
            let abar = 1.0 - at.a;
            (at.p, model.service.lst().compose_scale(abar), model.service.g_transform().compose_scale(abar))
        })
        .collect();
    let poles = scaled
        .iter()
        .fold(PoleSet::default(), |acc, (_, phi, g)| acc.lcm(phi.poles()).lcm(g.poles()));
    let one = Poly::from_real(&[lam, -1.0]);
    let two = Poly::from_real(&[2.0 * lam, -1.0]);
    let s_poly = Poly::from_real(&[0.0, 1.0]);
    let mut poly = &(&one * &two) * &poles.to_poly();
    for (p, phi, g) in &scaled {
        let t = &(&two * &phi.numerator_over(&poles)).scale_real(lam)
            - &(&s_poly * &g.numerator_over(&poles)).scale_real(theta * lam);
        poly = &poly - &t.scale_real(*p);
    }
    let eval = move |s: Complex64| {
        let mut d = (lam - s) * (2.0 * lam - s);
        for (p, phi, g) in &scaled {
            d -= *p * (lam * (2.0 * lam - s) * phi.eval(s) - theta * s * lam * g.eval(s));
        }
        d
    };
    Ok(CharacteristicFunction::new(eval, Some(poly), lam, 20.0 * lam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlib::DistributionSpec;

    fn ci(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_count(|s| s - 1.0, 2.0).unwrap(), 1);
        let f = |s: Complex64| (s - 1.0) * (s - ci(1.0, 2.0)) * (s + 3.0);
        assert_eq!(winding_count(f, 5.0).unwrap(), 2);
        assert_eq!(winding_count(|s| s + 1.0, 3.0).unwrap(), 0);
    }

    #[test]
    fn winding_detects_near_contour_zero() {
        let f = |s: Complex64| s - ci(1e-12 + 1e-9, 0.5);
        assert!(matches!(
            winding_count_offset(f, 2.0, 1e-9),
            Err(Error::ContourTooClose { .. })
        ));
    }

    #[test]
    fn companion_roots_of_known_polynomial() {
        let p = &(&Poly::linear_pow(-1.0, 1.0, 1) * &Poly::linear_pow(-2.0, 1.0, 1))
            * &Poly::from_real(&[5.0, 2.0, 1.0]); // roots 1, 2, -1 +- 2i
        let mut r = polynomial_roots(&p).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let want = [ci(-1.0, -2.0), ci(-1.0, 2.0), ci(1.0, 0.0), ci(2.0, 0.0)];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mg1_characteristic_properties() {
        let m = QueueModel::mg1(0.5, 0.0, DistributionSpec::exponential(1.0)).unwrap();
        let cf = mg1_characteristic(&m).unwrap();
        assert!(cf.eval(c(0.0)).norm() < 1e-15);
        assert!(cf.eval(c(1.0)).norm() < 1e-15);
        // theta = 0 factorisation (2l - s)[(l - s) - l phi(s)]
        let phi = m.service.lst();
        for k in 0..10 {
            let s = ci(0.3 * k as f64, 0.7 - 0.2 * k as f64);
            let want = (1.0 - s) * ((0.5 - s) - 0.5 * phi.eval(s));
            assert!((cf.eval(s) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn polynomial_form_agrees_with_evaluable_form() {
        let service = DistributionSpec::hyperexponential(vec![0.4, 0.6], vec![1.5, 4.0]);
        let models = [
            QueueModel::mg1(0.4, 0.7, service.clone()).unwrap(),
            QueueModel::erlang(3, 1.2, -0.6, service.clone()).unwrap(),
            QueueModel::proportional(
                vec![
                    crate::model::OmegaAtom { a: 0.2, p: 0.3 },
                    crate::model::OmegaAtom { a: 0.7, p: 0.7 },
                ],
                0.8,
                0.9,
                service,
            )
            .unwrap(),
        ];
        for m in &models {
            let cf = match m.family {
                Family::Mg1 => mg1_characteristic(m),
                Family::Erlang { .. } => erlang_characteristic(m),
                Family::Proportional { .. } => proportional_characteristic(m),
            }
            .unwrap();
            let poly = cf.poly().unwrap();
            let den = |s: Complex64| {
                let phi = m.service.lst();
                let g = m.service.g_transform();
                match &m.family {
                    Family::Proportional { atoms } => atoms.atoms().iter().fold(PoleSet::default(), |acc, at| {
                        acc.lcm(phi.compose_scale(1.0 - at.a).poles())
                            .lcm(g.compose_scale(1.0 - at.a).poles())
                    }),
                    _ => phi.poles().lcm(g.poles()),
                }
                .eval(s)
            };
            for k in 0..20 {
                let s = ci(0.1 + 0.37 * k as f64, -2.0 + 0.29 * k as f64);
                let a = poly.eval(s);
                let b = cf.eval(s) * den(s);
                assert!((a - b).norm() <= 1e-9 * a.norm().max(b.norm()), "{m:?} at {s}");
            }
        }
    }

    #[test]
    fn tau1_is_two_lambda_when_independent() {
        for service in [
            DistributionSpec::exponential(1.0),
            DistributionSpec::erlang(2, 3.0),
            DistributionSpec::hyperexponential(vec![0.2, 0.8], vec![0.5, 3.0]),
        ] {
            let m = QueueModel::mg1(0.3, 0.0, service).unwrap();
            let tau = find_tau1(&m).unwrap();
            assert!((tau - c(0.6)).norm() < 1e-10, "{tau}");
        }
    }

    #[test]
    fn count_mismatch_carries_both_counts() {
        let m = QueueModel::erlang(2, 1.0, 0.5, DistributionSpec::exponential(3.0)).unwrap();
        let cf = erlang_characteristic(&m).unwrap();
        match find_positive_roots(&cf, 3) {
            Err(Error::RootCountMismatch {
                expected: 3,
                found: 4,
                winding: 4,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn erlang_n1_matches_mg1_roots() {
        let s = DistributionSpec::erlang(2, 2.5);
        let e = QueueModel::erlang(1, 0.6, 0.8, s.clone()).unwrap();
        let m = QueueModel::mg1(0.6, 0.8, s).unwrap();
        let re = find_positive_roots(&erlang_characteristic(&e).unwrap(), 1).unwrap();
        let tau = find_tau1(&m).unwrap();
        assert!((re.roots[0] - tau).norm() < 1e-10);
    }
}
