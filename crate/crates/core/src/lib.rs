//! Steady-state waiting, maximum-overlap and minimum-overlap times of
//! single-server queues whose service and interarrival times are coupled by a
//! Farlie-Gumbel-Morgenstern copula.
//!
//! The analytic side ([`solver`]) produces Laplace-Stieltjes transforms and
//! means; [`invert`] recovers distribution functions; [`sim`] is a Lindley
//! recursion Monte Carlo used as ground truth.

pub mod cli;
pub mod copula;
pub mod distlib;
pub mod error;
pub mod invert;
pub mod model;
pub mod numeric;
pub mod par;
pub mod poly;
pub mod quad;
pub mod roots;
pub mod sim;
pub mod solver;
pub mod stats;

pub use copula::Theta;
pub use distlib::{DistributionSpec, RationalTransform};
pub use error::{Error, Result};
pub use model::{Family, OmegaAtom, OmegaAtoms, QueueModel};
pub use num_complex::Complex64;
