//! Erlang(n, lambda) interarrival times.
//!
//! The waiting transform is `w*(s) = RHS(s) / B(s)` where `RHS` is linear in
//! the `3n - 1` boundary unknowns `w*^(k)(lambda)`, `k < n`, and
//! `w*^(k)(2 lambda)`, `k <= 2n - 2`. One equation per right-half-plane zero
//! of `B` plus `w*(0) = 1` pins them down.

use super::mg1::combine;
use super::{
    check_probability, reference, solve_dense, Analysis, Boundary, LstFn, OverlapKind, OverlapLaw,
    SolverDiagnostics, WaitingSolution,
};
use crate::distlib::{binomial, factorial, RationalTransform};
use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use crate::numeric::{cauchy_derivatives, eval_removable};
use crate::roots::{
    erlang_characteristic, erlang_independent_characteristic, find_positive_roots, CharacteristicFunction,
    RootSet,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_MAX_SHAPE: u32 = 8;
const SPLUS_CHECK_TOL: f64 = 1e-6;
const SPLUS_CHECK_POINTS: [f64; 5] = [0.3, 0.7, 1.3, 2.6, 5.0];

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct ErlangOptions {
    pub max_shape: u32,
}

impl Default for ErlangOptions {
    fn default() -> Self {
        Self {
            max_shape: DEFAULT_MAX_SHAPE,
        }
    }
}

/// Derivatives of the waiting transform at `lambda` (`k = 0..n-1`) and at
/// `2 lambda` (`k = 0..2n-2`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryVector {
    pub at_lambda: Vec<f64>,
    pub at_two_lambda: Vec<f64>,
}

impl BoundaryVector {
    /// `(-1)^k w*^(k) > 0` for every entry.
    pub fn signs_alternate(&self) -> bool {
        let ok = |v: &[f64]| v.iter().enumerate().all(|(k, &x)| (-1f64).powi(k as i32) * x > 0.0);
        ok(&self.at_lambda) && ok(&self.at_two_lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiForm {
    /// `(1 - L^n) sum (s - l)^k / k! phi^(k)(l)`.
    Factored,
    /// `sum [(-l)^k - L^n (s - l)^k] / k! phi^(k)(l)`.
    Kernel,
}

/// One reading of the `[S - A]^+` transform: the form of the `phi` block and
/// the signs in front of the `L^n g*(s)` term and the `g*^(k)(lambda)` sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplusVariant {
    pub phi_form: PhiForm,
    pub g_s_sign: i8,
    pub g_lambda_sign: i8,
}

impl SplusVariant {
    pub const AS_WRITTEN: SplusVariant = SplusVariant {
        phi_form: PhiForm::Factored,
        g_s_sign: 1,
        g_lambda_sign: 1,
    };

    pub fn all() -> Vec<SplusVariant> {
        let mut out = Vec::with_capacity(8);
        for phi_form in [PhiForm::Factored, PhiForm::Kernel] {
            for g_s_sign in [1, -1] {
                for g_lambda_sign in [1, -1] {
                    out.push(SplusVariant {
                        phi_form,
                        g_s_sign,
                        g_lambda_sign,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for SplusVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |x: i8| if x > 0 { '+' } else { '-' };
        write!(
            f,
            "phi={:?} g(s){} g(l){}",
            self.phi_form,
            sign(self.g_s_sign),
            sign(self.g_lambda_sign)
        )
    }
}

/// Outcome of checking every variant against quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplusResolution {
    pub selected: SplusVariant,
    /// `(variant, max abs error over the check points, passed)`.
    pub candidates: Vec<(SplusVariant, f64, bool)>,
}

impl SplusResolution {
    pub fn passing(&self) -> usize {
        self.candidates.iter().filter(|c| c.2).count()
    }
}

/// Per-model constants: exact derivatives of the service transforms.
#[derive(Debug, Clone)]
pub(crate) struct ErlangParts {
    n: u32,
    lam: f64,
    theta: f64,
    phi: RationalTransform,
    g: RationalTransform,
    dphi: Vec<f64>,
    dgl: Vec<f64>,
    dg2: Vec<f64>,
}

impl ErlangParts {
    pub(crate) fn new(model: &QueueModel) -> Result<Self> {
        let n = shape(model)?;
        let lam = model.lambda;
        let phi = model.service.lst();
        let g = model.service.g_transform();
        let k = n as usize - 1;
        Ok(Self {
            n,
            lam,
            theta: model.theta.value(),
            dphi: phi.derivatives_at(lam, k)?,
            dgl: g.derivatives_at(lam, k)?,
            dg2: g.derivatives_at(2.0 * lam, 2 * k)?,
            phi,
            g,
        })
    }

    fn l_pow(&self, s: Complex64, m: u32) -> Complex64 {
        (self.lam / (c(self.lam) - s)).powu(m)
    }

    fn m_pow(&self, s: Complex64, m: u32) -> Complex64 {
        (self.lam / (c(2.0 * self.lam) - s)).powu(m)
    }

    /// `[(-l)^k - L^n (s - l)^k] / k!`.
    fn kernel_lambda(&self, k: u32, s: Complex64) -> Complex64 {
        let lam = self.lam;
        ((-lam).powi(k as i32) - self.l_pow(s, self.n) * (s - lam).powu(k)) / factorial(k)
    }

    /// `[2^-m (-2l)^k - M^m (s - 2l)^k] / k!`.
    fn kernel_two(&self, m: u32, k: u32, s: Complex64) -> Complex64 {
        let lam = self.lam;
        (0.5f64.powi(m as i32) * (-2.0 * lam).powi(k as i32) - self.m_pow(s, m) * (s - 2.0 * lam).powu(k))
            / factorial(k)
    }

    fn splus_variant_raw(&self, s: Complex64, v: SplusVariant) -> Complex64 {
        let n = self.n;
        let ln = self.l_pow(s, n);
        let mut out = ln * self.phi.eval(s);
        out += match v.phi_form {
            PhiForm::Factored => {
                (1.0 - ln)
                    * (0..n)
                        .map(|k| (s - self.lam).powu(k) / factorial(k) * self.dphi[k as usize])
                        .sum::<Complex64>()
            }
            PhiForm::Kernel => (0..n).map(|k| self.kernel_lambda(k, s) * self.dphi[k as usize]).sum(),
        };
        if self.theta != 0.0 {
            let mut mix = c(0.0);
            let mut two_sum = c(0.0);
            for i in 0..n {
                let m = n + i;
                let b = binomial(m - 1, i);
                mix += 2.0 * b * self.m_pow(s, m);
                let inner: Complex64 = (0..m).map(|k| self.kernel_two(m, k, s) * self.dg2[k as usize]).sum();
                two_sum += 2.0 * b * inner;
            }
            let lam_sum: Complex64 = (0..n).map(|k| self.kernel_lambda(k, s) * self.dgl[k as usize]).sum();
            let gs = self.g.eval(s) * (mix + f64::from(v.g_s_sign) * ln);
            out += self.theta * (gs + two_sum + f64::from(v.g_lambda_sign) * lam_sum);
        }
        out
    }

    fn splus_variant(&self, s: Complex64, v: SplusVariant) -> Complex64 {
        let poles = [c(self.lam), c(2.0 * self.lam)];
        eval_removable(|z| self.splus_variant_raw(z, v), s, &poles, self.lam)
    }

    /// Limit of `splus` as `s -> infinity`, which is `P(S <= A)`.
    fn splus_at_infinity(&self) -> f64 {
        let lam = self.lam;
        let n = self.n;
        let phi_part: f64 = (0..n)
            .map(|k| (-lam).powi(k as i32) / factorial(k) * self.dphi[k as usize])
            .sum();
        let gl_part: f64 = (0..n)
            .map(|k| (-lam).powi(k as i32) / factorial(k) * self.dgl[k as usize])
            .sum();
        let g2_part: f64 = (0..n)
            .map(|i| {
                let m = n + i;
                2.0 * binomial(m - 1, i)
                    * 0.5f64.powi(m as i32)
                    * (0..m)
                        .map(|k| (-2.0 * lam).powi(k as i32) / factorial(k) * self.dg2[k as usize])
                        .sum::<f64>()
            })
            .sum();
        phi_part + self.theta * (g2_part - gl_part)
    }

    /// Cleared coefficients `(l - s)^n (2l - s)^{2n-1} d RHS / d u_j`. For
    /// `theta = 0` only the `n` leading coefficients are returned and the
    /// `(2l - s)^{2n-1}` factor is left out.
    fn cleared_row(&self, s: Complex64) -> Vec<Complex64> {
        let independent = self.theta == 0.0;
        let n = self.n;
        let lam = self.lam;
        let th = self.theta;
        let a = c(lam) - s;
        let b = c(2.0 * lam) - s;
        let a_n = a.powu(n);
        let b_pow = if independent { c(1.0) } else { b.powu(2 * n - 1) };
        let lam_n = lam.powi(n as i32);
        let width = if independent { n } else { 3 * n - 1 };
        let mut row = vec![c(0.0); width as usize];
        for j in 0..n {
            let mut acc = c(0.0);
            for k in j..n {
                let ker = ((-lam).powi(k as i32) * a_n - lam_n * (s - lam).powu(k)) / factorial(k);
                let d = (k - j) as usize;
                acc += ker * binomial(k, j) * (self.dphi[d] - th * self.dgl[d]);
            }
            row[j as usize] = acc * b_pow;
        }
        if !independent {
            for j in 0..(2 * n - 1) {
                let mut acc = c(0.0);
                for i in 0..n {
                    let m = n + i;
                    let bin = binomial(m - 1, i);
                    for k in j..m {
                        let ker = (0.5f64.powi(m as i32) * (-2.0 * lam).powi(k as i32) * b_pow
                            - lam.powi(m as i32) * b.powu(n - 1 - i) * (s - 2.0 * lam).powu(k))
                            / factorial(k);
                        acc += bin * ker * binomial(k, j) * self.dg2[(k - j) as usize];
                    }
                }
                row[(n + j) as usize] = 2.0 * th * acc * a_n;
            }
        }
        row
    }

    /// `d/ds RHS(0)` coefficients and `B'(0)`.
    fn normalization_row(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.n;
        let lam = self.lam;
        let th = self.theta;
        let mut row = vec![0.0; (3 * n - 1) as usize];
        for j in 0..n {
            row[j as usize] = (j..n)
                .map(|k| {
                    let d = (k - j) as usize;
                    (n - k) as f64 * (-lam).powi(k as i32 - 1) / factorial(k)
                        * binomial(k, j)
                        * (self.dphi[d] - th * self.dgl[d])
                })
                .sum();
        }
        let mut mix0 = 0.0;
        let mut mix1 = 0.0;
        for i in 0..n {
            let m = n + i;
            let bin = binomial(m - 1, i);
            mix0 += 2.0 * bin * 0.5f64.powi(m as i32);
            mix1 += 2.0 * bin * m as f64 * 0.5f64.powi(m as i32) / (2.0 * lam);
            if th == 0.0 {
                continue;
            }
            for j in 0..m {
                row[(n + j) as usize] += (j..m)
                    .map(|k| {
                        2.0 * th
                            * bin
                            * 0.5f64.powi(m as i32)
                            * (m - k) as f64
                            * (-2.0 * lam).powi(k as i32 - 1)
                            / factorial(k)
                            * binomial(k, j)
                            * self.dg2[(k - j) as usize]
                    })
                    .sum::<f64>();
            }
        }
        let phi01 = self.phi.derivatives_at(0.0, 1)?;
        let g01 = self.g.derivatives_at(0.0, 1)?;
        let nl = n as f64 / lam;
        let b_prime = -nl * phi01[0] - phi01[1] - th * (g01[1] * (mix0 - 1.0) + g01[0] * (mix1 - nl));
        let row = if th == 0.0 { row[..n as usize].to_vec() } else { row };
        Ok((row, b_prime))
    }
}

fn shape(model: &QueueModel) -> Result<u32> {
    match model.family {
        Family::Erlang { n } => Ok(n),
        _ => Err(Error::Unsupported("needs Erlang arrivals".into())),
    }
}

/// Where a row of the boundary system comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowSource {
    /// Real part of `RHS(root) = 0`.
    RootReal { re: f64, im: f64 },
    /// Imaginary part of `RHS(root) = 0` for a non-real root.
    RootImag { re: f64, im: f64 },
    Normalization,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub rows: Vec<RowSource>,
}

struct Setup {
    parts: ErlangParts,
    cf: CharacteristicFunction,
    roots: RootSet,
    system: LinearSystem,
}

fn setup(model: &QueueModel, opts: ErlangOptions) -> Result<Setup> {
    let n = shape(model)?;
    if n > opts.max_shape {
        return Err(Error::Unsupported(format!(
            "Erlang shape {n} exceeds the configured cap {}",
            opts.max_shape
        )));
    }
    model.require_stable()?;
    let parts = ErlangParts::new(model)?;
    let independent = model.theta.is_independent();
    let (cf, expected) = if independent {
        (erlang_independent_characteristic(model)?, n as usize - 1)
    } else {
        (erlang_characteristic(model)?, 3 * n as usize - 2)
    };
    let roots = if expected == 0 {
        RootSet {
            roots: vec![],
            multiplicities: vec![],
            verified_count: 0,
            residuals: vec![],
        }
    } else {
        find_positive_roots(&cf, expected)?
    };
    if roots.multiplicities.iter().any(|&m| m > 1) {
        return Err(Error::SingularSystem("repeated right-half-plane root".into()));
    }
    let width = if independent { n as usize } else { 3 * n as usize - 1 };
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(width);
    let mut rhs = Vec::with_capacity(width);
    let mut rows = Vec::with_capacity(width);
    for &r in &roots.roots {
        if r.im < 0.0 {
            continue;
        }
        let full = parts.cleared_row(r);
        let scale = full.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        data.push(full.iter().map(|z| z.re / scale).collect());
        rhs.push(0.0);
        rows.push(RowSource::RootReal { re: r.re, im: r.im });
        if r.im > 0.0 {
            data.push(full.iter().map(|z| z.im / scale).collect());
            rhs.push(0.0);
            rows.push(RowSource::RootImag { re: r.re, im: r.im });
        }
    }
    let (norm_row, b_prime) = parts.normalization_row()?;
    data.push(norm_row);
    rhs.push(b_prime);
    rows.push(RowSource::Normalization);
    if data.len() != width {
        return Err(Error::SingularSystem(format!(
            "{} equations for {width} unknowns",
            data.len()
        )));
    }
    let matrix = DMatrix::from_fn(width, width, |i, j| data[i][j]);
    let system = LinearSystem {
        matrix,
        rhs: DVector::from_vec(rhs),
        rows,
    };
    Ok(Setup {
        parts,
        cf,
        roots,
        system,
    })
}

/// Boundary system for the waiting transform (root rows plus normalization).
pub fn assemble_system(model: &QueueModel) -> Result<LinearSystem> {
    Ok(setup(model, ErlangOptions::default())?.system)
}

fn evaluator(parts: Arc<ErlangParts>, cf: CharacteristicFunction, unknowns: Vec<f64>, roots: &RootSet) -> LstFn {
    let lam = parts.lam;
    let mut points = vec![c(0.0)];
    points.extend(roots.expanded());
    let raw = move |s: Complex64| {
        let row = parts.cleared_row(s);
        let num: Complex64 = row.iter().zip(&unknowns).map(|(a, &u)| a * u).sum();
        num / cf.eval(s)
    };
    Arc::new(move |s| eval_removable(&raw, s, &points, lam))
}

/// Solves the boundary system and returns the waiting transform.
pub fn solve_waiting_erlang(model: &QueueModel, opts: ErlangOptions) -> Result<WaitingSolution> {
    let Setup {
        parts,
        cf,
        roots,
        system,
    } = setup(model, opts)?;
    let n = parts.n as usize;
    let independent = model.theta.is_independent();
    let rhs_norm = system.rhs.norm();
    let (x, residual, cond) = solve_dense(system.matrix, system.rhs)?;
    if residual > 1e-8 * (1.0 + rhs_norm) {
        return Err(Error::SingularSystem(format!("residual {residual:e} after solve")));
    }
    if cond > 1e12 {
        log::warn!("Erlang boundary system is ill-conditioned (cond = {cond:e})");
    }
    let unknowns: Vec<f64> = x.iter().copied().collect();
    let lam = parts.lam;
    let lst = evaluator(Arc::new(parts), cf, unknowns.clone(), &roots);
    let at_lambda = unknowns[..n].to_vec();
    let at_two_lambda = if independent {
        cauchy_derivatives(&*lst, 2.0 * lam, lam, 2 * n - 2, 64)
    } else {
        unknowns[n..].to_vec()
    };
    let root_residual = roots.residuals.iter().copied().fold(0.0, f64::max);
    let diagnostics = SolverDiagnostics {
        system_residual: residual,
        condition_number: cond,
        closed_form_gap: None,
        independent_branch: independent,
        root_residual,
    };
    let boundary = Boundary::Erlang(BoundaryVector {
        at_lambda,
        at_two_lambda,
    });
    Ok(WaitingSolution::new(model.clone(), roots, boundary, diagnostics, lst))
}

/// Evaluates `w*(s) = RHS(s) / B(s)` for given boundary values.
pub fn waiting_lst_erlang(model: &QueueModel, boundary: &BoundaryVector, s: Complex64) -> Result<Complex64> {
    let parts = ErlangParts::new(model)?;
    let n = parts.n as usize;
    if boundary.at_lambda.len() != n || boundary.at_two_lambda.len() != 2 * n - 1 {
        return Err(Error::Domain("boundary vector has the wrong length".into()));
    }
    let cf = if model.theta.is_independent() {
        erlang_independent_characteristic(model)?
    } else {
        erlang_characteristic(model)?
    };
    let mut u = boundary.at_lambda.clone();
    u.extend(&boundary.at_two_lambda);
    let raw = |z: Complex64| {
        let row = parts.cleared_row(z);
        row.iter().zip(&u).map(|(a, &b)| a * b).sum::<Complex64>() / cf.eval(z)
    };
    Ok(eval_removable(raw, s, &[c(0.0)], parts.lam))
}

/// Checks every `[S - A]^+` variant against quadrature and keeps the best
/// passing one.
pub fn resolve_splus(model: &QueueModel) -> Result<SplusResolution> {
    let parts = ErlangParts::new(model)?;
    resolve_with(&parts, model)
}

fn resolve_with(parts: &ErlangParts, model: &QueueModel) -> Result<SplusResolution> {
    let refs: Vec<(f64, f64)> = SPLUS_CHECK_POINTS
        .iter()
        .map(|&k| {
            let s = k * parts.lam;
            reference::splus_quadrature(model, s).map(|v| (s, v))
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<(SplusVariant, f64, bool)> = SplusVariant::all()
        .into_iter()
        .map(|v| {
            let err = refs
                .iter()
                .map(|&(s, want)| (parts.splus_variant(c(s), v) - want).norm())
                .fold(0.0, f64::max);
            (v, err, err <= SPLUS_CHECK_TOL)
        })
        .collect();
    for (v, err, ok) in &candidates {
        log::debug!("[S-A]^+ variant {v}: max error {err:.3e} {}", if *ok { "pass" } else { "fail" });
    }
    let best = candidates
        .iter()
        .filter(|c| c.2)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| {
            let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            Error::OracleMismatch(format!(
                "no [S-A]^+ variant matches quadrature (best error {best:e})"
            ))
        })?;
    if best.0 != SplusVariant::AS_WRITTEN {
        log::info!("[S-A]^+ transform: using variant {} (as-written form fails quadrature)", best.0);
    }
    Ok(SplusResolution {
        selected: best.0,
        candidates,
    })
}

/// `E e^{-s [S - A]^+}` for Erlang arrivals, using the quadrature-validated
/// variant.
pub fn splus_lst_erlang(model: &QueueModel, s: Complex64) -> Result<Complex64> {
    let parts = ErlangParts::new(model)?;
    let res = resolve_with(&parts, model)?;
    Ok(parts.splus_variant(s, res.selected))
}

/// `P(S > A) = 1 - lim_{s -> inf} E e^{-s [S - A]^+}`.
pub fn prob_s_gt_a(model: &QueueModel) -> Result<f64> {
    let parts = ErlangParts::new(model)?;
    check_probability("P(S > A)", 1.0 - parts.splus_at_infinity())
}

/// Full analysis with a configurable shape cap.
pub fn analyze_with(model: &QueueModel, opts: ErlangOptions) -> Result<(Analysis, SplusResolution)> {
    let waiting = solve_waiting_erlang(model, opts)?;
    let parts = Arc::new(ErlangParts::new(model)?);
    let resolution = resolve_with(&parts, model)?;
    let variant = resolution.selected;
    let lam = model.lambda;
    let p1 = Arc::clone(&parts);
    let splus_fn: LstFn = Arc::new(move |s| p1.splus_variant(s, variant));
    let splus = OverlapLaw::with_derived_mean(OverlapKind::SplusPart, Arc::clone(&splus_fn), lam);
    let r0 = 2.0 - splus.eval_real(0.0);
    if (r0 - 1.0).abs() > 1e-9 {
        return Err(Error::EvaluationFailure(format!("min-overlap factor r(0) = {r0}")));
    }
    let min_factor: LstFn = Arc::new(move |s| 2.0 - splus_fn(s));
    let waiting_law = waiting.law();
    let (max_overlap, min_overlap) = combine(&waiting_law, &splus, min_factor);
    let prob = check_probability("P(S > A)", 1.0 - parts.splus_at_infinity())?;
    Ok((
        Analysis {
            waiting,
            waiting_law,
            splus,
            max_overlap,
            min_overlap,
            prob_s_gt_a: prob,
        },
        resolution,
    ))
}

pub(crate) fn analyze(model: &QueueModel) -> Result<Analysis> {
    Ok(analyze_with(model, ErlangOptions::default())?.0)
}

pub fn max_overlap_erlang(model: &QueueModel) -> Result<OverlapLaw> {
    Ok(analyze(model)?.max_overlap)
}

pub fn min_overlap_erlang(model: &QueueModel) -> Result<OverlapLaw> {
    Ok(analyze(model)?.min_overlap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlib::DistributionSpec;
    use crate::solver::mg1;

    fn model(n: u32, lam: f64, theta: f64, svc: DistributionSpec) -> QueueModel {
        QueueModel::erlang(n, lam, theta, svc).unwrap()
    }

    #[test]
    fn system_shape_for_two_stages() {
        let m = model(2, 1.0, 0.5, DistributionSpec::exponential(3.0));
        let sys = assemble_system(&m).unwrap();
        assert_eq!(sys.matrix.shape(), (5, 5));
        let roots = sys
            .rows
            .iter()
            .filter(|r| !matches!(r, RowSource::Normalization))
            .count();
        assert_eq!(roots, 4);
    }

    #[test]
    fn single_stage_matches_poisson() {
        let svc = DistributionSpec::hyperexponential(vec![0.4, 0.6], vec![1.0, 3.0]);
        for th in [-0.9, 0.0, 0.6] {
            let e = model(1, 0.7, th, svc.clone());
            let m = QueueModel::mg1(0.7, th, svc.clone()).unwrap();
            let (ae, _) = analyze_with(&e, ErlangOptions::default()).unwrap();
            let am = mg1::analyze(&m).unwrap();
            assert!((ae.waiting.boundary.w_lambda() - am.waiting.boundary.w_lambda()).abs() < 1e-8);
            assert!((ae.waiting.boundary.w_two_lambda() - am.waiting.boundary.w_two_lambda()).abs() < 1e-8);
            for k in 0..10 {
                let z = c(0.15 + 0.5 * k as f64);
                assert!((ae.waiting.eval(z) - am.waiting.eval(z)).norm() < 1e-8);
                assert!((ae.splus.eval(z) - am.splus.eval(z)).norm() < 1e-9);
                assert!((ae.max_overlap.eval(z) - am.max_overlap.eval(z)).norm() < 1e-8);
                assert!((ae.min_overlap.eval(z) - am.min_overlap.eval(z)).norm() < 1e-8);
            }
            assert!((ae.prob_s_gt_a - am.prob_s_gt_a).abs() < 1e-12);
        }
    }

    /// Erlang(n, l) arrivals, independent Exp(mu) service: `W` is zero with
    /// probability `1 - sigma` and otherwise Exp(mu (1 - sigma)), where
    /// `sigma` solves `sigma = (l / (l + mu (1 - sigma)))^n`.
    fn gi_m_1(n: u32, lam: f64, mu: f64, s: f64) -> f64 {
        let mut sigma = 0.5;
        for _ in 0..200 {
            sigma = (lam / (lam + mu * (1.0 - sigma))).powi(n as i32);
        }
        let rate = mu * (1.0 - sigma);
        1.0 - sigma + sigma * rate / (rate + s)
    }

    #[test]
    fn independent_matches_gi_m_1() {
        for n in [2, 3] {
            let m = model(n, 1.5, 0.0, DistributionSpec::exponential(1.0));
            let sol = solve_waiting_erlang(&m, ErlangOptions::default()).unwrap();
            for s in [0.5, 1.0, 2.0] {
                assert!((sol.eval_real(s) - gi_m_1(n, 1.5, 1.0, s)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn boundary_vector_consistent_with_evaluator() {
        for (n, th, svc) in [
            (2, 0.5, DistributionSpec::exponential(3.0)),
            (3, -1.0, DistributionSpec::erlang(2, 5.0)),
            (2, 1.0, DistributionSpec::erlang(2, 4.0)),
            (3, -0.5, DistributionSpec::exponential(2.0)),
        ] {
            let m = model(n, 1.0, th, svc);
            let sol = solve_waiting_erlang(&m, ErlangOptions::default()).unwrap();
            let b = match &sol.boundary {
                Boundary::Erlang(b) => b.clone(),
                _ => unreachable!(),
            };
            assert!(b.signs_alternate(), "{b:?}");
            let f = sol.evaluator();
            let dl = cauchy_derivatives(&*f, 1.0, 0.5, n as usize - 1, 64);
            let d2 = cauchy_derivatives(&*f, 2.0, 1.0, 2 * n as usize - 2, 64);
            for (a, b) in dl.iter().zip(&b.at_lambda).chain(d2.iter().zip(&b.at_two_lambda)) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
            assert!((sol.eval_real(0.0) - 1.0).abs() < 1e-9);
            assert!(sol.diagnostics.system_residual < 1e-8);
            let w = waiting_lst_erlang(&m, &b, c(0.8)).unwrap();
            assert!((w - sol.eval(c(0.8))).norm() < 1e-10);
        }
    }

    #[test]
    fn exactly_one_splus_variant_survives() {
        let m = model(2, 1.0, 0.5, DistributionSpec::exponential(3.0));
        let res = resolve_splus(&m).unwrap();
        assert_eq!(res.passing(), 1, "{res:?}");
        assert_ne!(res.selected, SplusVariant::AS_WRITTEN);
        let m = model(3, 2.0, -0.8, DistributionSpec::erlang(2, 3.0));
        assert_eq!(resolve_splus(&m).unwrap().passing(), 1);
    }

    #[test]
    fn min_factor_matches_quadrature() {
        let m = model(2, 1.0, 0.7, DistributionSpec::exponential(2.0));
        let (a, _) = analyze_with(&m, ErlangOptions::default()).unwrap();
        for s in [0.3, 1.7] {
            let r = a.min_overlap.eval_real(s) / a.waiting.eval_real(s);
            let want = reference::min_factor_quadrature(&m, s).unwrap();
            assert!((r - want).abs() < 1e-6);
        }
        assert!((a.prob_s_gt_a - reference::prob_quadrature(&m).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn ordering_and_normalization() {
        for th in [-1.0, -0.5, 0.5, 1.0] {
            let m = model(2, 1.0, th, DistributionSpec::erlang(2, 4.0));
            let a = analyze(&m).unwrap();
            for law in [&a.waiting_law, &a.max_overlap, &a.min_overlap] {
                assert!((law.eval_real(0.0) - 1.0).abs() < 1e-9);
                let v: Vec<f64> = (1..=30).map(|k| law.eval_real(0.2 * k as f64)).collect();
                assert!(v.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
            }
            assert!(a.min_overlap.mean <= a.waiting_law.mean);
            assert!(a.waiting_law.mean <= a.max_overlap.mean);
        }
    }

    #[test]
    fn shape_cap_is_enforced() {
        let m = model(9, 10.0, 0.5, DistributionSpec::exponential(1.0));
        assert!(matches!(
            solve_waiting_erlang(&m, ErlangOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
