//! Surrogate modeling of two-phase reservoir flow with lifted linear
//! (Koopman-style) latent dynamics.
//!
//! The crate bundles everything the pipeline needs:
//!
//! * [`numerics`] — dense tensors, a reverse-mode gradient tape, Adam
//! * [`sim`] — an incompressible two-phase waterflood simulator (IMPES)
//!   used as the ground-truth data generator
//! * [`dataset`] — trajectory files, normalization, k-step windows, splits
//! * [`model`] — encoder/decoder, lift network, Koopman matrices and the
//!   locally linear one-step baseline
//! * [`training`] — the three loss terms and the optimization loop
//! * [`eval`] — long-horizon rollouts, error statistics, model comparison

pub mod dataset;
pub mod model;
pub mod numerics;
pub mod sim;
pub mod units;
