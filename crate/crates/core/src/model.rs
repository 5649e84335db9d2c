//! Queue model families.

use crate::copula::Theta;
use crate::distlib::DistributionSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Probability mass `p` at proportion `a` of the random proportion `Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaAtom {
    pub a: f64,
    pub p: f64,
}

/// Support and weights of `Omega`, kept sorted by `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<OmegaAtom>", into = "Vec<OmegaAtom>")]
pub struct OmegaAtoms(Vec<OmegaAtom>);

impl OmegaAtoms {
    pub fn new(mut atoms: Vec<OmegaAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("omega needs at least one atom".into()));
        }
        for at in &atoms {
            if !(at.a > 0.0 && at.a < 1.0) {
                return Err(Error::Domain(format!("omega atom a = {} outside (0, 1)", at.a)));
            }
            if !(0.0..=1.0).contains(&at.p) {
                return Err(Error::Domain(format!("omega atom p = {} outside [0, 1]", at.p)));
            }
        }
        let total: f64 = atoms.iter().map(|at| at.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("omega probabilities sum to {total}, not 1")));
        }
        atoms.sort_by(|x, y| x.a.total_cmp(&y.a));
        if atoms.windows(2).any(|w| w[0].a == w[1].a) {
            return Err(Error::Domain("omega atoms must be distinct".into()));
        }
        Ok(Self(atoms))
    }

    pub fn atoms(&self) -> &[OmegaAtom] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|at| at.a * at.p).sum()
    }
}

impl TryFrom<Vec<OmegaAtom>> for OmegaAtoms {
    type Error = Error;
    fn try_from(v: Vec<OmegaAtom>) -> Result<Self> {
        OmegaAtoms::new(v)
    }
}

impl From<OmegaAtoms> for Vec<OmegaAtom> {
    fn from(o: OmegaAtoms) -> Self {
        o.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Poisson arrivals with rate `lambda`.
    Mg1,
    /// Erlang(n, lambda) interarrival times.
    Erlang { n: u32 },
    /// `A = Omega S + J` with `J ~ Exp(lambda)` FGM-coupled to `S`.
    Proportional { atoms: OmegaAtoms },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueModel {
    pub family: Family,
    /// Arrival (stage) rate.
    pub lambda: f64,
    pub theta: Theta,
    pub service: DistributionSpec,
}

impl QueueModel {
    /// Validates parameters. Stability is checked separately by
    /// [`QueueModel::require_stable`], since the simulator accepts unstable models.
    pub fn new(family: Family, lambda: f64, theta: Theta, service: DistributionSpec) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if let Family::Erlang { n: 0 } = family {
            return Err(Error::Domain("erlang arrival shape n must be >= 1".into()));
        }
        service.validate()?;
        Ok(Self {
            family,
            lambda,
            theta,
            service,
        })
    }

    pub fn mg1(lambda: f64, theta: f64, service: DistributionSpec) -> Result<Self> {
        Self::new(Family::Mg1, lambda, Theta::new(theta)?, service)
    }

    pub fn erlang(n: u32, lambda: f64, theta: f64, service: DistributionSpec) -> Result<Self> {
        Self::new(Family::Erlang { n }, lambda, Theta::new(theta)?, service)
    }

    pub fn proportional(
        atoms: Vec<OmegaAtom>,
        lambda: f64,
        theta: f64,
        service: DistributionSpec,
    ) -> Result<Self> {
        Self::new(
            Family::Proportional {
                atoms: OmegaAtoms::new(atoms)?,
            },
            lambda,
            Theta::new(theta)?,
            service,
        )
    }

    pub fn with_theta(&self, theta: Theta) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    /// Same model with `lambda` chosen so that `E(S) / E(A) = rho`.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        let es = self.service.mean();
        let lambda = match &self.family {
            Family::Mg1 => rho / es,
            Family::Erlang { n } => *n as f64 * rho / es,
            Family::Proportional { atoms } => {
                let inv = es * (1.0 / rho - atoms.mean());
                if inv <= 0.0 {
                    return Err(Error::Domain(format!(
                        "rho = {rho} is unreachable: E(A) >= E(Omega) E(S) for every lambda"
                    )));
                }
                1.0 / inv
            }
        };
        Self::new(self.family.clone(), lambda, self.theta, self.service.clone())
    }

    pub fn mean_interarrival(&self) -> f64 {
        match &self.family {
            Family::Mg1 => 1.0 / self.lambda,
            Family::Erlang { n } => *n as f64 / self.lambda,
            Family::Proportional { atoms } => atoms.mean() * self.service.mean() + 1.0 / self.lambda,
        }
    }

    /// Traffic intensity `E(S) / E(A)`.
    pub fn rho(&self) -> f64 {
        self.service.mean() / self.mean_interarrival()
    }

    /// `rho` in the form that appears in the waiting-time normalization:
    /// `lambda E(S)` (M/G/1), `lambda E(S) / n` (Erlang), and
    /// `lambda E(S) (1 - E(Omega))` (proportional).
    pub fn load(&self) -> f64 {
        let es = self.service.mean();
        match &self.family {
            Family::Mg1 => self.lambda * es,
            Family::Erlang { n } => self.lambda * es / *n as f64,
            Family::Proportional { atoms } => self.lambda * es * (1.0 - atoms.mean()),
        }
    }

    pub fn require_stable(&self) -> Result<()> {
        let load = self.load();
        if load < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable { rho: load })
        }
    }

    /// Interarrival law for the families where `A` has a parametric form.
    pub fn arrival_spec(&self) -> Result<DistributionSpec> {
        match &self.family {
            Family::Mg1 => Ok(DistributionSpec::exponential(self.lambda)),
            Family::Erlang { n } => Ok(DistributionSpec::erlang(*n, self.lambda)),
            Family::Proportional { .. } => Err(Error::Unsupported(
                "the proportional family has no parametric interarrival law".into(),
            )),
        }
    }

    /// Scale used for relative tolerances in the `s` plane.
    pub fn scale(&self) -> f64 {
        self.lambda.max(1e-300)
    }
}
