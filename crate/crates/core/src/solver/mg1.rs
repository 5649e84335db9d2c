//! Poisson arrivals. The two-boundary-unknown machinery here is shared with
//! the proportional family, of which M/G/1 is the single-atom case `a = 0`.

use super::{
    check_probability, lst_mean, solve_dense, Analysis, Boundary, LstFn, OverlapKind, OverlapLaw,
    SolverDiagnostics, WaitingSolution,
};
use crate::distlib::RationalTransform;
use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use crate::numeric::eval_removable;
use crate::roots::{find_positive_roots, mg1_characteristic, proportional_characteristic, RootSet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Transform pieces for arrivals `A = Omega S + J`, `J ~ Exp(lambda)`;
/// M/G/1 is the single atom `abar = 1`.
#[derive(Debug, Clone)]
pub(crate) struct TwoPoint {
    lam: f64,
    theta: f64,
    load: f64,
    /// `(p_i, abar_i, phi(abar_i lambda), g*(abar_i lambda), g*(2 abar_i lambda))`.
    atoms: Vec<(f64, f64, f64, f64, f64)>,
    phi: RationalTransform,
    g: RationalTransform,
}

impl TwoPoint {
    pub(crate) fn new(model: &QueueModel) -> Self {
        let lam = model.lambda;
        let phi = model.service.lst();
        let g = model.service.g_transform();
        let weights: Vec<(f64, f64)> = match &model.family {
            Family::Proportional { atoms } => atoms.atoms().iter().map(|at| (at.p, 1.0 - at.a)).collect(),
            _ => vec![(1.0, 1.0)],
        };
        let atoms = weights
            .into_iter()
            .map(|(p, ab)| {
                (
                    p,
                    ab,
                    phi.eval_real(ab * lam),
                    g.eval_real(ab * lam),
                    g.eval_real(2.0 * ab * lam),
                )
            })
            .collect();
        Self {
            lam,
            theta: model.theta.value(),
            load: model.load(),
            atoms,
            phi,
            g,
        }
    }

    /// Coefficient of `w*(lambda)`: `sum p (theta g*(abar l) - phi(abar l))`.
    fn a_coef(&self) -> f64 {
        self.atoms
            .iter()
            .map(|&(p, _, phl, gl, _)| p * (self.theta * gl - phl))
            .sum()
    }

    /// Coefficient of `w*(2 lambda)`: `theta sum p g*(2 abar l)`.
    fn b_coef(&self) -> f64 {
        self.theta * self.atoms.iter().map(|&(p, _, _, _, g2)| p * g2).sum::<f64>()
    }

    fn phi_sum_at_lambda(&self) -> f64 {
        self.atoms.iter().map(|&(p, _, phl, _, _)| p * phl).sum()
    }

    pub(crate) fn characteristic(&self, s: Complex64) -> Complex64 {
        let lam = self.lam;
        let mut d = (lam - s) * (2.0 * lam - s);
        for &(p, ab, ..) in &self.atoms {
            let z = s * ab;
            d -= p * (lam * (2.0 * lam - s) * self.phi.eval(z) - self.theta * s * lam * self.g.eval(z));
        }
        d
    }

    /// `E e^{-s [S - A]^+}` as written, singular at `lambda` and `2 lambda`.
    fn splus_raw(&self, s: Complex64) -> Complex64 {
        let lam = self.lam;
        let (l1, l2) = (c(lam) - s, c(2.0 * lam) - s);
        self.atoms
            .iter()
            .map(|&(p, ab, phl, gl, g2)| {
                let z = s * ab;
                let dep = gl / l1 - g2 / l2 - lam * self.g.eval(z) / (l1 * l2);
                p * (lam / l1 * self.phi.eval(z) - s / l1 * phl + self.theta * s * dep)
            })
            .sum()
    }

    /// Minimum-overlap factor `r(s)` as written.
    fn min_raw(&self, s: Complex64) -> Complex64 {
        let lam = self.lam;
        let (l1, l2) = (c(lam) - s, c(2.0 * lam) - s);
        let sum: Complex64 = self
            .atoms
            .iter()
            .map(|&(p, ab, phl, gl, g2)| {
                let z = s * ab;
                let dep = lam * self.g.eval(z) / (l1 * l2) + g2 / l2 - gl / l1;
                p * (phl * s / l1 - lam / l1 * self.phi.eval(z) + self.theta * s * dep)
            })
            .sum();
        2.0 + sum
    }

    fn poles(&self) -> [Complex64; 2] {
        [c(self.lam), c(2.0 * self.lam)]
    }

    pub(crate) fn splus(&self, s: Complex64) -> Complex64 {
        eval_removable(|z| self.splus_raw(z), s, &self.poles(), self.lam)
    }

    pub(crate) fn min_factor(&self, s: Complex64) -> Complex64 {
        eval_removable(|z| self.min_raw(z), s, &self.poles(), self.lam)
    }

    pub(crate) fn prob_s_gt_a(&self) -> Result<f64> {
        let p = self
            .atoms
            .iter()
            .map(|&(p, _, phl, gl, g2)| p * (1.0 - phl + self.theta * (gl - g2)))
            .sum();
        check_probability("P(S > A)", p)
    }

    /// Solves for `w*(lambda)`, `w*(2 lambda)` given the root set.
    pub(crate) fn solve(self, model: &QueueModel, roots: RootSet) -> Result<WaitingSolution> {
        let lam = self.lam;
        let rho = self.load;
        let root_residual = roots.residuals.iter().copied().fold(0.0, f64::max);
        let this = Arc::new(self);

        if model.theta.is_independent() {
            let t = Arc::clone(&this);
            let raw = move |s: Complex64| {
                let sum: Complex64 = t.atoms.iter().map(|&(p, ab, ..)| p * t.phi.eval(s * ab)).sum();
                (1.0 - rho) * s / (s - lam + lam * sum)
            };
            let lst: LstFn = Arc::new(move |s| eval_removable(&raw, s, &[c(0.0)], lam));
            let w_lambda = (1.0 - rho) / this.phi_sum_at_lambda();
            let w_two_lambda = lst(c(2.0 * lam)).re;
            let boundary = Boundary::Pair {
                w_lambda,
                w_two_lambda,
            };
            let diagnostics = SolverDiagnostics {
                system_residual: 0.0,
                condition_number: 1.0,
                closed_form_gap: None,
                independent_branch: true,
                root_residual,
            };
            return Ok(WaitingSolution::new(model.clone(), roots, boundary, diagnostics, lst));
        }

        let tau = match roots.roots.as_slice() {
            [r] if r.im == 0.0 => r.re,
            [r] => {
                return Err(Error::EvaluationFailure(format!(
                    "right-half-plane root {r} is not real"
                )))
            }
            _ => {
                return Err(Error::RootCountMismatch {
                    expected: 1,
                    found: roots.count(),
                    winding: roots.verified_count,
                })
            }
        };
        let a = this.a_coef();
        let b = this.b_coef();
        let m = DMatrix::from_row_slice(2, 2, &[2.0 * a, -b, (2.0 * lam - tau) * a, -(lam - tau) * b]);
        let rhs = DVector::from_column_slice(&[-2.0 * (1.0 - rho), 0.0]);
        let (x, system_residual, condition_number) = solve_dense(m, rhs)?;
        let (w_lambda, w_two_lambda) = (x[0], x[1]);
        let closed_lambda = 2.0 * (1.0 - rho) * (lam - tau) / (tau * a);
        let closed_two = 2.0 * (1.0 - rho) * (2.0 * lam - tau) / (tau * b);
        let gap = (closed_lambda - w_lambda).abs().max((closed_two - w_two_lambda).abs());
        if condition_number > 1e12 {
            log::warn!("boundary system is ill-conditioned (cond = {condition_number:e})");
        }

        let t = Arc::clone(&this);
        let raw = move |s: Complex64| {
            let num = s * ((2.0 * lam - s) * a * w_lambda - (lam - s) * b * w_two_lambda);
            num / t.characteristic(s)
        };
        let lst: LstFn = Arc::new(move |s| eval_removable(&raw, s, &[c(0.0), c(tau)], lam));
        let diagnostics = SolverDiagnostics {
            system_residual,
            condition_number,
            closed_form_gap: Some(gap),
            independent_branch: false,
            root_residual,
        };
        let boundary = Boundary::Pair {
            w_lambda,
            w_two_lambda,
        };
        Ok(WaitingSolution::new(model.clone(), roots, boundary, diagnostics, lst))
    }

    /// Assembles waiting, splus, maximum and minimum laws.
    pub(crate) fn analyze(self, model: &QueueModel, roots: RootSet) -> Result<Analysis> {
        let lam = self.lam;
        let parts = Arc::new(self.clone());
        let prob = parts.prob_s_gt_a()?;
        let waiting = self.solve(model, roots)?;
        let waiting_law = waiting.law();
        let p1 = Arc::clone(&parts);
        let splus = OverlapLaw::with_derived_mean(OverlapKind::SplusPart, Arc::new(move |s| p1.splus(s)), lam);
        let (max_overlap, min_overlap) = combine(&waiting_law, &splus, {
            let p2 = Arc::clone(&parts);
            Arc::new(move |s| p2.min_factor(s))
        });
        Ok(Analysis {
            waiting,
            waiting_law,
            splus,
            max_overlap,
            min_overlap,
            prob_s_gt_a: prob,
        })
    }
}

/// `M = W + [S - A]^+` and `V = W * r`; `E(V) = E(W) - E[S - A]^+` because
/// `r = 2 - splus`.
pub(crate) fn combine(waiting: &OverlapLaw, splus: &OverlapLaw, min_factor: LstFn) -> (OverlapLaw, OverlapLaw) {
    let (w1, s1) = (waiting.evaluator(), splus.evaluator());
    let max = OverlapLaw::new(
        OverlapKind::MaxOverlap,
        Arc::new(move |s| w1(s) * s1(s)),
        waiting.mean + splus.mean,
    );
    let w2 = waiting.evaluator();
    let min = OverlapLaw::new(
        OverlapKind::MinOverlap,
        Arc::new(move |s| w2(s) * min_factor(s)),
        waiting.mean - splus.mean,
    );
    (max, min)
}

fn require_mg1(model: &QueueModel) -> Result<()> {
    match model.family {
        Family::Mg1 => Ok(()),
        _ => Err(Error::Unsupported("needs the M/G/1 family".into())),
    }
}

pub(crate) fn roots_for(model: &QueueModel) -> Result<RootSet> {
    let cf = match model.family {
        Family::Mg1 => mg1_characteristic(model)?,
        _ => proportional_characteristic(model)?,
    };
    find_positive_roots(&cf, 1)
}

/// `E e^{-s [S - A]^+}` for Poisson arrivals.
pub fn splus_lst(model: &QueueModel, s: Complex64) -> Result<Complex64> {
    require_mg1(model)?;
    Ok(TwoPoint::new(model).splus(s))
}

/// Solved waiting-time transform for Poisson arrivals.
pub fn solve_waiting(model: &QueueModel) -> Result<WaitingSolution> {
    require_mg1(model)?;
    model.require_stable()?;
    let roots = roots_for(model)?;
    TwoPoint::new(model).solve(model, roots)
}

pub(crate) fn analyze(model: &QueueModel) -> Result<Analysis> {
    require_mg1(model)?;
    model.require_stable()?;
    let roots = roots_for(model)?;
    TwoPoint::new(model).analyze(model, roots)
}

pub fn max_overlap(model: &QueueModel) -> Result<OverlapLaw> {
    Ok(analyze(model)?.max_overlap)
}

pub fn min_overlap(model: &QueueModel) -> Result<OverlapLaw> {
    Ok(analyze(model)?.min_overlap)
}

/// `P(S > A) = 1 - phi(l) + theta (g*(l) - g*(2l))`.
pub fn prob_s_gt_a(model: &QueueModel) -> Result<f64> {
    require_mg1(model)?;
    TwoPoint::new(model).prob_s_gt_a()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFormulaDiagnostic {
    pub formula_value: f64,
    pub derivative_value: f64,
    pub discrepancy: f64,
}

/// Closed-form expression for `E(M)` taken literally (with `g'(0)` read as
/// `g*'(0)` and `w(lambda)` as `w*(lambda)`), next to the derivative value.
/// Only a cross-check; the derivative value is authoritative.
pub fn mean_max_formula_diagnostic(model: &QueueModel) -> Result<MeanFormulaDiagnostic> {
    let a = analyze(model)?;
    let lam = model.lambda;
    let th = model.theta.value();
    let svc = &model.service;
    let rho = model.load();
    let es2 = svc.moment(2);
    let phi_l = svc.lst().eval_real(lam);
    let g = svc.g_transform();
    let (gl, g2) = (g.eval_real(lam), g.eval_real(2.0 * lam));
    let gp0 = g.derivative(1)?.eval_real(0.0);
    let base = lam * es2 / (2.0 * (1.0 - rho)) + svc.mean() - (1.0 - phi_l) / lam;
    let extra = if th == 0.0 {
        0.0
    } else {
        let wl = a.waiting.boundary.w_lambda();
        let w2 = a.waiting.boundary.w_two_lambda();
        let num = g2 * w2 * (1.0 - rho - lam * th * gp0 + lam * lam * es2)
            + 2.0 * lam * wl * (gl * (th * gp0 + lam * es2) - th * gp0 * phi_l);
        let big_g = num / (4.0 * lam * (1.0 - rho).powi(2)) + (g2 - 2.0 * gl) / (2.0 * lam);
        th * big_g
    };
    let formula_value = base + extra;
    let derivative_value = a.max_overlap.mean;
    Ok(MeanFormulaDiagnostic {
        formula_value,
        derivative_value,
        discrepancy: (formula_value - derivative_value).abs(),
    })
}

/// `E[S - A]^+ = -d/ds splus(0)`.
pub fn positive_part_mean(model: &QueueModel) -> Result<f64> {
    require_mg1(model)?;
    let t = TwoPoint::new(model);
    Ok(lst_mean(&|s| t.splus(s), model.lambda))
}
