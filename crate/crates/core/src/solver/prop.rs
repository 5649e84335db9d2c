//! Interarrival times `A = Omega S + J` with `Omega` discrete on `(0, 1)` and
//! `J ~ Exp(lambda)` FGM-coupled to `S`.

use super::mg1::{roots_for, TwoPoint};
use super::{Analysis, OverlapLaw, WaitingSolution};
use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use num_complex::Complex64;

fn require_prop(model: &QueueModel) -> Result<()> {
    match model.family {
        Family::Proportional { .. } => Ok(()),
        _ => Err(Error::Unsupported("needs the proportional family".into())),
    }
}

/// `E e^{-s [S - A]^+} = sum_i p_i E e^{-s [abar_i S - J]^+}`.
pub fn splus_lst_prop(model: &QueueModel, s: Complex64) -> Result<Complex64> {
    require_prop(model)?;
    model.require_stable()?;
    Ok(TwoPoint::new(model).splus(s))
}

/// Minimum-overlap factor `r(s)`.
pub fn min_factor_prop(model: &QueueModel, s: Complex64) -> Result<Complex64> {
    require_prop(model)?;
    Ok(TwoPoint::new(model).min_factor(s))
}

pub fn solve_waiting_prop(model: &QueueModel) -> Result<WaitingSolution> {
    require_prop(model)?;
    model.require_stable()?;
    let roots = roots_for(model)?;
    TwoPoint::new(model).solve(model, roots)
}

/// `(max overlap, min overlap)` laws.
pub fn overlap_laws_prop(model: &QueueModel) -> Result<(OverlapLaw, OverlapLaw)> {
    let a = analyze(model)?;
    Ok((a.max_overlap, a.min_overlap))
}

pub(crate) fn analyze(model: &QueueModel) -> Result<Analysis> {
    require_prop(model)?;
    model.require_stable()?;
    let roots = roots_for(model)?;
    TwoPoint::new(model).analyze(model, roots)
}

/// `sum_i p_i [1 - phi(abar_i l) + theta (g*(abar_i l) - g*(2 abar_i l))]`.
pub fn prob_s_gt_a(model: &QueueModel) -> Result<f64> {
    require_prop(model)?;
    TwoPoint::new(model).prob_s_gt_a()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlib::DistributionSpec;
    use crate::model::OmegaAtom;
    use crate::solver::{mg1, reference};

    fn two_atoms(theta: f64) -> QueueModel {
        let atoms = vec![OmegaAtom { a: 0.3, p: 0.5 }, OmegaAtom { a: 0.6, p: 0.5 }];
        QueueModel::proportional(atoms, 1.0, theta, DistributionSpec::exponential(2.0)).unwrap()
    }

    #[test]
    fn splus_matches_quadrature() {
        let m = two_atoms(0.5);
        assert!((splus_lst_prop(&m, Complex64::new(0.0, 0.0)).unwrap().re - 1.0).abs() < 1e-12);
        for s in [0.4, 1.0, 2.0, 3.3] {
            let want = reference::splus_quadrature(&m, s).unwrap();
            let got = splus_lst_prop(&m, Complex64::new(s, 0.0)).unwrap().re;
            assert!((got - want).abs() < 1e-6, "s={s}: {got} vs {want}");
        }
        let p = prob_s_gt_a(&m).unwrap();
        assert!((p - reference::prob_quadrature(&m).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn degenerate_atom_reduces_to_poisson() {
        let svc = DistributionSpec::hyperexponential(vec![0.3, 0.7], vec![0.5, 2.0]);
        for th in [0.0, -0.7, 0.9] {
            let p = QueueModel::proportional(vec![OmegaAtom { a: 1e-12, p: 1.0 }], 0.6, th, svc.clone()).unwrap();
            let m = QueueModel::mg1(0.6, th, svc.clone()).unwrap();
            let (ap, am) = (analyze(&p).unwrap(), mg1::analyze(&m).unwrap());
            for s in [0.2, 0.6, 1.7, 4.0] {
                let z = Complex64::new(s, 0.0);
                assert!((ap.splus.eval(z) - am.splus.eval(z)).norm() < 1e-9);
                assert!((ap.waiting.eval(z) - am.waiting.eval(z)).norm() < 1e-8);
                assert!((ap.max_overlap.eval(z) - am.max_overlap.eval(z)).norm() < 1e-8);
                assert!((ap.min_overlap.eval(z) - am.min_overlap.eval(z)).norm() < 1e-8);
            }
            assert!((ap.max_overlap.mean - am.max_overlap.mean).abs() < 1e-8);
        }
    }

    #[test]
    fn invariants_hold() {
        for th in [-1.0, 0.0, 0.5, 1.0] {
            let a = analyze(&two_atoms(th)).unwrap();
            assert_eq!(a.waiting.roots.verified_count, 1);
            for law in [&a.waiting_law, &a.max_overlap, &a.min_overlap] {
                assert!((law.eval_real(0.0) - 1.0).abs() < 1e-9);
            }
            assert!(a.min_overlap.mean <= a.waiting_law.mean);
            assert!(a.waiting_law.mean <= a.max_overlap.mean);
            let r = min_factor_prop(&two_atoms(th), Complex64::new(0.0, 0.0)).unwrap();
            assert!((r.re - 1.0).abs() < 1e-12);
        }
    }
}
