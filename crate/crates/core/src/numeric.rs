//! Small numerical helpers shared by the solvers.

use num_complex::Complex64;

/// Relative radius (in units of the model scale) inside which a removable
/// singularity is bridged by interpolation.
pub const REMOVABLE_RADIUS: f64 = 1e-6;
/// Relative node spacing of the bridging interpolant.
pub const REMOVABLE_STEP: f64 = 1e-3;

/// Evaluates `f(s)`, replacing the value near any of `points` by a cubic
/// Lagrange interpolant through `p + h {-2, -1, 1, 2}`.
pub fn eval_removable<F>(f: F, s: Complex64, points: &[Complex64], scale: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let radius = REMOVABLE_RADIUS * scale;
    match points.iter().find(|&&p| (s - p).norm() < radius) {
        None => f(s),
        Some(&p) => {
            let h = REMOVABLE_STEP * scale;
            let nodes: [Complex64; 4] = [-2.0, -1.0, 1.0, 2.0].map(|k| p + h * k);
            let values = nodes.map(&f);
            lagrange(&nodes, &values, s)
        }
    }
}

fn lagrange(nodes: &[Complex64], values: &[Complex64], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, (&xi, &yi)) in nodes.iter().zip(values).enumerate() {
        let mut w = Complex64::new(1.0, 0.0);
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                w *= (s - xj) / (xi - xj);
            }
        }
        acc += w * yi;
    }
    acc
}

/// Central-difference derivative at `x`, Richardson-extrapolated over the
/// steps `h, h/2, h/4`.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let (d1, d2, d4) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Standard step for mean computations: `1e-3 max(1, lambda)`.
pub fn mean_step(lambda: f64) -> f64 {
    1e-3 * lambda.max(1.0)
}

/// `f(a), f'(a), ..., f^{(k)}(a)` from the Cauchy integral on the circle of
/// radius `r` about real `a`, trapezoid rule with `nodes` points. `f` must be
/// analytic on the closed disc.
pub fn cauchy_derivatives<F>(f: F, a: f64, r: f64, k: usize, nodes: usize) -> Vec<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let values: Vec<(Complex64, Complex64)> = (0..nodes)
        .map(|j| {
            let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / nodes as f64);
            (e, f(a + r * e))
        })
        .collect();
    let mut fact = 1.0;
    (0..=k)
        .map(|m| {
            if m > 0 {
                fact *= m as f64;
            }
            let sum: Complex64 = values.iter().map(|&(e, v)| v * e.powi(-(m as i32))).sum();
            (sum / nodes as f64).re * fact / r.powi(m as i32)
        })
        .collect()
}
