//! Numerical inversion of Laplace-Stieltjes transforms to distribution
//! functions, by the Euler-summation (Abate-Whitt) Bromwich algorithm.

use crate::distlib::binomial;
use crate::error::{Error, Result};
use crate::par::{map_slice, Execution};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Discretization parameter; the aliasing error is about `exp(-A)`.
pub const EULER_A: f64 = 18.4;
/// Terms before averaging.
pub const EULER_N: u32 = 16;
/// Binomial averaging depth.
pub const EULER_M: u32 = 16;
/// `F(0)` is read off the transform at `s = ATOM_PROBE * scale`.
pub const ATOM_PROBE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfGrid {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    /// Estimate of `P(X = 0)`.
    pub atom: f64,
    /// Largest adjustment made by clipping to `[0, 1]` and enforcing monotonicity.
    pub max_clip: f64,
}

impl CdfGrid {
    /// `sup_t |F(t) - G(t)|` against values on the same grid.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.f
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `F(t) = P(X <= t)` at a single `t > 0` from `lst(s) = E e^{-sX}`.
pub fn invert_at<F>(lst: &F, t: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64 + ?Sized,
{
    if !(t > 0.0) {
        return Err(Error::Domain(format!("inversion point must be positive, got {t}")));
    }
    let transform = |s: Complex64| lst(s) / s;
    let a = EULER_A;
    let scale = (a / 2.0).exp() / t;
    let total = (EULER_N + EULER_M) as usize;
    let mut partial = Vec::with_capacity(total + 1);
    let first = transform(Complex64::new(a / (2.0 * t), 0.0));
    check_finite(first, t)?;
    let mut sum = 0.5 * scale * first.re;
    partial.push(sum);
    for k in 1..=total {
        let s = Complex64::new(a, 2.0 * PI * k as f64) / (2.0 * t);
        let v = transform(s);
        check_finite(v, t)?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * scale * v.re;
        partial.push(sum);
    }
    let n = EULER_N as usize;
    let m = EULER_M;
    let avg: f64 = (0..=m)
        .map(|k| binomial(m, k) * partial[n + k as usize])
        .sum::<f64>()
        / 2f64.powi(m as i32);
    Ok(avg)
}

fn check_finite(v: Complex64, t: f64) -> Result<()> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(())
    } else {
        Err(Error::EvaluationFailure(format!(
            "transform is not finite on the inversion contour for t = {t}"
        )))
    }
}

/// Distribution function on `t_grid` (nondecreasing, `t >= 0`). Values are
/// clipped to `[0, 1]` and made monotone; `t = 0` maps to the atom at zero.
pub fn invert_cdf<F>(lst: &F, t_grid: &[f64], scale: f64, exec: Execution) -> Result<CdfGrid>
where
    F: Fn(Complex64) -> Complex64 + Sync + ?Sized,
{
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(Error::Domain("time grid must be finite, nonnegative and increasing".into()));
    }
    let atom = lst(Complex64::new(ATOM_PROBE * scale.max(1e-300), 0.0)).re;
    let raw: Vec<Result<f64>> = map_slice(exec, t_grid, |&t| if t == 0.0 { Ok(atom) } else { invert_at(lst, t) });
    let raw: Vec<f64> = raw.into_iter().collect::<Result<_>>()?;
    let mut f = Vec::with_capacity(raw.len());
    let mut running = 0.0f64;
    let mut max_clip = 0.0f64;
    for &v in &raw {
        let clipped = v.clamp(0.0, 1.0).max(running);
        max_clip = max_clip.max((clipped - v).abs());
        running = clipped;
        f.push(clipped);
    }
    if max_clip > 1e-3 {
        log::warn!("inversion ripple: clipped by up to {max_clip:.2e}");
    } else {
        log::debug!("inversion clip magnitude {max_clip:.2e}");
    }
    Ok(CdfGrid {
        t: t_grid.to_vec(),
        f,
        atom: atom.clamp(0.0, 1.0),
        max_clip,
    })
}
