//! Farlie-Gumbel-Morgenstern copula primitives.

use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Below this |b| the conditional inverse is the identity.
const INDEPENDENCE_EPS: f64 = 1e-12;

/// FGM dependence parameter, always in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Theta(f64);

impl Theta {
    pub fn new(value: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("theta must lie in [-1, 1], got {value}")))
        }
    }

    pub const INDEPENDENT: Theta = Theta(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_independent(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for Theta {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Theta::new(v)
    }
}

impl From<Theta> for f64 {
    fn from(t: Theta) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPair {
    pub u1: f64,
    pub u2: f64,
}

impl UnitPair {
    pub fn new(u1: f64, u2: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&u1) && (0.0..=1.0).contains(&u2) {
            Ok(Self { u1, u2 })
        } else {
            Err(Error::Domain(format!("({u1}, {u2}) outside the unit square")))
        }
    }
}

pub fn fgm_cdf(u: UnitPair, theta: Theta) -> f64 {
    let (a, b) = (u.u1, u.u2);
    a * b + theta.0 * a * b * (1.0 - a) * (1.0 - b)
}

pub fn fgm_density(u: UnitPair, theta: Theta) -> f64 {
    1.0 + theta.0 * (1.0 - 2.0 * u.u1) * (1.0 - 2.0 * u.u2)
}

/// Solves `(1+b) u2 - b u2^2 = v` for `u2` in `[0, 1]`, `b = theta (1 - 2 u1)`.
pub fn conditional_inverse(u1: f64, v: f64, theta: Theta) -> f64 {
    let b = theta.0 * (1.0 - 2.0 * u1);
    if b.abs() < INDEPENDENCE_EPS || v == 0.0 {
        return v;
    }
    let a = 1.0 + b;
    (2.0 * v / (a + (a * a - 4.0 * b * v).max(0.0).sqrt())).clamp(0.0, 1.0)
}

/// One draw from the FGM copula by conditional inversion. Consumes exactly
/// two uniforms from `rng`.
pub fn sample_pair<R: Rng + ?Sized>(theta: Theta, rng: &mut R) -> UnitPair {
    let u1: f64 = rng.random();
    let v: f64 = rng.random();
    UnitPair {
        u1,
        u2: conditional_inverse(u1, v, theta),
    }
}

/// Population Kendall's tau and Spearman's rho of the FGM copula.
pub fn rank_correlations(theta: Theta) -> (f64, f64) {
    (2.0 * theta.0 / 9.0, theta.0 / 3.0)
}

/// Joint density of (service, interarrival) at `(y, x)`.
///
/// Only the exponential and Erlang interarrival families have a joint density
/// of this form; the proportional family couples `S` with the exponential
/// component `J` instead (see [`joint_density_sj`]).
pub fn joint_density_sa(y: f64, x: f64, model: &QueueModel) -> Result<f64> {
    let arrival = match &model.family {
        Family::Mg1 | Family::Erlang { .. } => model.arrival_spec()?,
        Family::Proportional { .. } => {
            return Err(Error::Unsupported(
                "the proportional family has no closed-form (S, A) density; use joint_density_sj"
                    .into(),
            ))
        }
    };
    Ok(fgm_joint(y, x, model, &arrival))
}

/// Joint density of `(S, J)` for the proportional family, `J ~ Exp(lambda)`.
pub fn joint_density_sj(y: f64, x: f64, model: &QueueModel) -> f64 {
    let arrival = crate::distlib::DistributionSpec::exponential(model.lambda);
    fgm_joint(y, x, model, &arrival)
}

fn fgm_joint(y: f64, x: f64, model: &QueueModel, arrival: &crate::distlib::DistributionSpec) -> f64 {
    if x < 0.0 || y < 0.0 {
        return 0.0;
    }
    let s = &model.service;
    let fs = s.pdf(y);
    let fa = arrival.pdf(x);
    let gs = fs * (1.0 - 2.0 * s.cdf(y));
    fs * fa + model.theta.value() * gs * fa * (2.0 * arrival.survival(x) - 1.0)
}
