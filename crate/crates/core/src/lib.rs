//! Compile hardwired feed-forward neural networks into deterministic
//! mass-action chemical reaction networks, simulate the resulting ODEs and
//! check that their steady states reproduce the network's activations.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the MNIST IDX
//! loader and the command-line tool live in the `neurocrn` companion crate.
//!
//! Module map:
//!
//! - [`reaction_net`]: species, complexes, reactions, network unions and the
//!   mass-action right-hand side.
//! - [`neural_net`]: architectures, activations (including the implicitly
//!   defined q-root family), forward pass, quadratic cost and backprop.
//! - [`compiler`]: one reaction gadget per edge, unioned per node and per
//!   network.
//! - [`integrator`]: adaptive Dormand–Prince 5(4) with steady-state detection.
//! - [`verify`]: empirical checks of the implementation contract, exponential
//!   reliability and convergence from infinity.
//! - [`training`]: target encoding, minibatch SGD and evaluation.
#![cfg_attr(not(test), no_std)]
// NaN must fail these checks, so `!(x > 0.0)` is written on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod compiler;
mod error;
pub mod integrator;
pub(crate) mod math;
pub mod neural_net;
pub mod reaction_net;
pub mod training;
pub mod verify;

pub use error::{Error, Result};

/// The portable, seedable generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
