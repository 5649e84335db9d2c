//! Analytic solutions: waiting-time, maximum-overlap and minimum-overlap
//! transforms for the three model families.

pub mod erlang;
pub mod mg1;
pub mod prop;
pub mod reference;

use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use crate::numeric::{mean_step, richardson_derivative};
use crate::roots::RootSet;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub use erlang::BoundaryVector;

/// Shared, thread-safe transform evaluator.
pub type LstFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapKind {
    MaxOverlap,
    MinOverlap,
    Waiting,
    SplusPart,
}

/// A solved transform `E e^{-sX}` together with `E(X)`.
#[derive(Clone)]
pub struct OverlapLaw {
    pub kind: OverlapKind,
    lst: LstFn,
    pub mean: f64,
}

impl fmt::Debug for OverlapLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OverlapLaw")
            .field("kind", &self.kind)
            .field("mean", &self.mean)
            .finish()
    }
}

impl OverlapLaw {
    pub(crate) fn new(kind: OverlapKind, lst: LstFn, mean: f64) -> Self {
        Self { kind, lst, mean }
    }

    /// Builds the law and its mean `-d/ds LST(0)`.
    pub(crate) fn with_derived_mean(kind: OverlapKind, lst: LstFn, lambda: f64) -> Self {
        let mean = lst_mean(&*lst, lambda);
        Self { kind, lst, mean }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.lst)(s)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    pub fn evaluator(&self) -> LstFn {
        Arc::clone(&self.lst)
    }
}

/// `-d/ds f(0)` by Richardson-extrapolated central differences.
pub fn lst_mean<F: Fn(Complex64) -> Complex64 + ?Sized>(f: &F, lambda: f64) -> f64 {
    -richardson_derivative(|x| f(Complex64::new(x, 0.0)).re, 0.0, mean_step(lambda))
}

/// Solved boundary unknowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// `w*(lambda)` and `w*(2 lambda)` (M/G/1 and proportional families).
    Pair { w_lambda: f64, w_two_lambda: f64 },
    Erlang(BoundaryVector),
}

impl Boundary {
    pub fn w_lambda(&self) -> f64 {
        match self {
            Boundary::Pair { w_lambda, .. } => *w_lambda,
            Boundary::Erlang(b) => b.at_lambda[0],
        }
    }

    pub fn w_two_lambda(&self) -> f64 {
        match self {
            Boundary::Pair { w_two_lambda, .. } => *w_two_lambda,
            Boundary::Erlang(b) => b.at_two_lambda[0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    /// Max absolute residual of the boundary linear system.
    pub system_residual: f64,
    /// 2-norm condition number of the boundary linear system.
    pub condition_number: f64,
    /// Max gap between the linear solve and the closed-form boundary values,
    /// when closed forms exist.
    pub closed_form_gap: Option<f64>,
    /// True when the independent-input (theta = 0) branch was used.
    pub independent_branch: bool,
    /// Max root residual `|D(r)| / (1 + |D'(r)|)`.
    pub root_residual: f64,
}

/// Solved waiting-time transform.
#[derive(Clone)]
pub struct WaitingSolution {
    pub model: QueueModel,
    pub roots: RootSet,
    pub boundary: Boundary,
    pub diagnostics: SolverDiagnostics,
    lst: LstFn,
}

impl fmt::Debug for WaitingSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaitingSolution")
            .field("model", &self.model)
            .field("roots", &self.roots)
            .field("boundary", &self.boundary)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl WaitingSolution {
    pub(crate) fn new(
        model: QueueModel,
        roots: RootSet,
        boundary: Boundary,
        diagnostics: SolverDiagnostics,
        lst: LstFn,
    ) -> Self {
        Self {
            model,
            roots,
            boundary,
            diagnostics,
            lst,
        }
    }

    /// `w*(s)` for `Re(s) >= 0`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.lst)(s)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    pub fn evaluator(&self) -> LstFn {
        Arc::clone(&self.lst)
    }

    /// The single right-half-plane root for the M/G/1 and proportional families.
    pub fn tau1(&self) -> Option<Complex64> {
        match (&self.model.family, self.roots.roots.as_slice()) {
            (Family::Erlang { .. }, _) => None,
            (_, [r]) => Some(*r),
            _ => None,
        }
    }

    pub fn law(&self) -> OverlapLaw {
        OverlapLaw::with_derived_mean(OverlapKind::Waiting, self.evaluator(), self.model.lambda)
    }
}

/// `E(W) = -w*'(0)`.
pub fn waiting_mean(sol: &WaitingSolution) -> f64 {
    lst_mean(&*sol.lst, sol.model.lambda)
}

/// Full analytic picture of one model.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub waiting: WaitingSolution,
    pub waiting_law: OverlapLaw,
    pub splus: OverlapLaw,
    pub max_overlap: OverlapLaw,
    pub min_overlap: OverlapLaw,
    pub prob_s_gt_a: f64,
}

impl Analysis {
    pub fn model(&self) -> &QueueModel {
        &self.waiting.model
    }
}

/// Solves any supported model.
pub fn analyze(model: &QueueModel) -> Result<Analysis> {
    model.require_stable()?;
    match &model.family {
        Family::Mg1 => mg1::analyze(model),
        Family::Erlang { .. } => erlang::analyze(model),
        Family::Proportional { .. } => prop::analyze(model),
    }
}

pub(crate) fn check_probability(what: &'static str, p: f64) -> Result<f64> {
    if (-1e-9..=1.0 + 1e-9).contains(&p) {
        Ok(p)
    } else {
        Err(Error::RangeViolation { what, value: p })
    }
}

/// `P(S > A)` for any family.
pub fn prob_s_gt_a(model: &QueueModel) -> Result<f64> {
    match &model.family {
        Family::Mg1 => mg1::prob_s_gt_a(model),
        Family::Erlang { .. } => erlang::prob_s_gt_a(model),
        Family::Proportional { .. } => prop::prob_s_gt_a(model),
    }
}

/// Solves a small dense real system, returning the solution, the max
/// residual and the 2-norm condition number.
pub(crate) fn solve_dense(
    a: nalgebra::DMatrix<f64>,
    b: nalgebra::DVector<f64>,
) -> Result<(nalgebra::DVector<f64>, f64, f64)> {
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= f64::EPSILON * smax * 1e-2 || !smin.is_finite() {
        return Err(Error::SingularSystem(format!(
            "singular values span [{smin:e}, {smax:e}]"
        )));
    }
    let cond = smax / smin;
    let x = a
        .clone()
        .full_piv_lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularSystem("LU solve failed".into()))?;
    let residual = (&a * &x - &b).amax();
    Ok((x, residual, cond))
}
