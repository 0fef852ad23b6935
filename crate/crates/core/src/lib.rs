//! Pairwise binary Markov networks (Ising models) for inferring discrete
//! component states.
//!
//! The crate covers the model itself ([`mrf`]), exact inference by
//! enumeration and variable elimination ([`exact`]), loopy belief
//! propagation and Gibbs sampling ([`approx`]), accuracy and classification
//! metrics ([`metrics`]) and the data-driven construction of node and edge
//! potentials from feature measurements ([`potentials`]).
//!
//! Every state variable takes values in `{-1, +1}` (`-1` intact, `+1`
//! damaged) and a model assigns
//! `p(θ) ∝ exp(-Σ_{(i,j)} ω_ij θ_i θ_j - Σ_i b_i θ_i)`.

pub mod approx;
pub mod exact;
pub mod marginals;
pub mod metrics;
pub mod mrf;
pub mod potentials;
pub mod rng;

pub use marginals::{MarginalSet, NodeMarginal};
pub use mrf::{Assignment, Graph, GraphSpec, IsingModel, MrfError};
