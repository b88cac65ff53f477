//! Bayesian nonparametric inference for panels of Markov-switching GARCH
//! series.
//!
//! The crate provides:
//! - the panel MS-GARCH model objects and exact likelihood computations
//!   ([`model`]),
//! - Pitman-Yor process machinery with the analytic cluster-count prior
//!   ([`pyp`]),
//! - a synthetic-panel simulator and the full prior-predictive sampler
//!   ([`dgp`]),
//! - the six-block Gibbs sampler over sticks/slices, transition rows, atoms,
//!   unit parameters, hidden paths and allocations ([`gibbs`]),
//! - posterior clustering analytics: cluster-count posteriors, co-clustering
//!   matrices, spectral reordering, variation of information ([`analysis`]),
//! - CSV ingestion, rolling descriptive statistics, and chain-directory
//!   formats backing the CLI ([`io`]).
//!
//! The numeric core is generic over the [`scalar::Scalar`] trait; the aliases
//! below fix the concrete scalar used by the command-line tool and the file
//! formats.

pub mod analysis;
pub mod dgp;
pub mod dist;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pyp;
pub mod rng;
pub mod scalar;

/// Scalar type used by the CLI and the on-disk formats.
pub type Real = f64;

pub type Panel = model::Panel<Real>;
pub type RegimeParams = model::RegimeParams<Real>;
pub type TransitionMatrix = model::TransitionMatrix<Real>;
pub type Hyperparameters = model::Hyperparameters<Real>;
pub type Atom = pyp::Atom<Real>;
pub type ClusterPrior = pyp::ClusterPrior<Real>;
