//! PAC-Bayesian domain-adaptation bounds for weighted majority votes over a
//! finite set of voters.
//!
//! * [`exact`]: risks, disagreements, joint errors, `λ_ρ` and `χ²` computed
//!   exactly on finite domains.
//! * [`estimators`]: the same quantities estimated from a labeled source
//!   sample and an unlabeled target sample.
//! * [`bounds`]: term-by-term bound evaluators and a Monte Carlo coverage check.
//! * [`learner`]: exponentiated-gradient minimization of the PAC-Bayesian bound.
//! * [`datagen`]: seeded instance, dataset and stump-pool generators.
//! * [`campaign`]: randomized verification campaigns over generated instances.
//! * [`cli`]: the `dabound` command-line front end.

pub mod bounds;
pub mod campaign;
pub mod cli;
pub mod datagen;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod learner;

pub use domain::{FiniteDomain, Label, Marginal, PairMatrix, Posterior, VoterMatrix};
pub use error::{Error, Result};
