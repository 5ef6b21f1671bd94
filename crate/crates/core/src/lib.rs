//! Multiscale shear-flow diffusion.
//!
//! A tracer follows `dy = dω − ∇Γ(y) dt` where the skew stream matrix has
//! `Γ₁₂ = h(y₁)` and `h = Σ γ_n h_n(x/R_n)` stacks geometrically separated
//! periodic scales. The crate builds such fields ([`profiles`]), computes
//! their exact homogenized diffusivities and brackets ([`homogenization`]),
//! evaluates the Brownian mixing functional exactly ([`spectral`]), estimates
//! the displacement law by reproducible Monte Carlo ([`simulator`]) and checks
//! measurements against predicted brackets and exponents ([`analysis`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod homogenization;
pub mod profiles;
mod quad;
pub mod rng;
pub mod spectral;
pub mod simulator;
pub mod trig;

pub use error::{Error, Result};
