//! Contrastive successor features on synthetic partially observed worlds.
//!
//! The crate builds a small laboratory around one question: do the features
//! learned by an inner-product contrastive critic recover the world's true
//! latent state up to a linear map? Everything needed to answer it lives
//! here: directional statistics on the hypersphere, a ground-truth latent
//! random walk with an injective observation generator, a from-scratch MLP
//! with exact gradients, the contrastive training loop, scripted and greedy
//! skill-conditioned policies, and the evaluation stack (linear probes,
//! coverage, oracle return, feature-geometry diagnostics).

pub mod bessel;
pub mod csf;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
