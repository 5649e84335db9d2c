//! Direct two-dimensional quadrature of `E k([S - A]^+)` against the FGM
//! joint density. Slow, but independent of every transform formula.

use crate::copula::{joint_density_sa, joint_density_sj};
use crate::error::Result;
use crate::model::{Family, QueueModel};
use crate::quad::integrate;

const TAIL: f64 = 1e-14;

/// `E k(D)` where `D = S - A` (or `(1 - Omega) S - J` in the proportional
/// family). `k` may have a kink at 0.
pub fn expect_difference<K: Fn(f64) -> f64>(model: &QueueModel, k: K, tol: f64) -> Result<f64> {
    let ty = model.service.quantile(1.0 - TAIL)?;
    match &model.family {
        Family::Mg1 | Family::Erlang { .. } => {
            let tx = model.arrival_spec()?.quantile(1.0 - TAIL)?;
            let dens = |y: f64, x: f64| joint_density_sa(y, x, model).unwrap_or(0.0);
            Ok(double(&dens, &k, 1.0, ty, tx, tol))
        }
        Family::Proportional { atoms } => {
            let tx = crate::distlib::DistributionSpec::exponential(model.lambda).quantile(1.0 - TAIL)?;
            let dens = |y: f64, x: f64| joint_density_sj(y, x, model);
            Ok(atoms
                .atoms()
                .iter()
                .map(|at| at.p * double(&dens, &k, 1.0 - at.a, ty, tx, tol))
                .sum())
        }
    }
}

fn double<D, K>(dens: &D, k: &K, c: f64, ty: f64, tx: f64, tol: f64) -> f64
where
    D: Fn(f64, f64) -> f64,
    K: Fn(f64) -> f64,
{
    let inner = |y: f64| {
        let cut = (c * y).min(tx);
        let f = |x: f64| k(c * y - x) * dens(y, x);
        integrate(f, 0.0, cut, 0.1 * tol) + integrate(f, cut, tx, 0.1 * tol)
    };
    integrate(inner, 0.0, ty, tol)
}

/// `E e^{-s [S - A]^+}` for real `s >= 0`.
pub fn splus_quadrature(model: &QueueModel, s: f64) -> Result<f64> {
    expect_difference(model, |d| (-s * d.max(0.0)).exp(), 1e-11)
}

/// Minimum-overlap factor `r(s) = 1 + P(S > A) - E e^{-s (S - A)} 1(S > A)`.
pub fn min_factor_quadrature(model: &QueueModel, s: f64) -> Result<f64> {
    let p = prob_quadrature(model)?;
    let tail = expect_difference(model, |d| if d > 0.0 { (-s * d).exp() } else { 0.0 }, 1e-11)?;
    Ok(1.0 + p - tail)
}

/// `P(S > A)`.
pub fn prob_quadrature(model: &QueueModel) -> Result<f64> {
    expect_difference(model, |d| if d > 0.0 { 1.0 } else { 0.0 }, 1e-11)
}

/// `E [S - A]^+`.
pub fn positive_part_mean_quadrature(model: &QueueModel) -> Result<f64> {
    expect_difference(model, |d| d.max(0.0), 1e-11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distlib::DistributionSpec;

    #[test]
    fn independent_exponential_closed_forms() {
        // S ~ Exp(1), A ~ Exp(1/2): P(S > A) = 1/3, E[S-A]^+ = 1/3,
        // E e^{-s[S-A]^+} = 1 - 1/3 + (1/3)/(1+s)
        let m = QueueModel::mg1(0.5, 0.0, DistributionSpec::exponential(1.0)).unwrap();
        assert!((prob_quadrature(&m).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        assert!((positive_part_mean_quadrature(&m).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        let s = 0.7;
        let want = 2.0 / 3.0 + (1.0 / 3.0) / (1.0 + s);
        assert!((splus_quadrature(&m, s).unwrap() - want).abs() < 1e-10);
    }
}
