//! Nonlinear model order reduction for parametric functions and PDEs with
//! transformed networks of pre-trained collocation solvers.
//!
//! The crate builds everything from first principles on top of a small
//! automatic-differentiation core:
//!
//! * [`jet`] / [`mlp`] — dense networks with exact input-derivative jets and
//!   exact parameter gradients of jet-dependent losses.
//! * [`tape`] — a scalar reverse-mode tape for arbitrary loss compositions.
//! * [`adam`] — the optimizer driving both training stages.
//! * [`problems`] — the parametric function families and PDEs with their
//!   residual operators and exact solutions.
//! * [`sampling`] — collocation sets, including the discontinuity-
//!   concentrated sampler for the transport equation.
//! * [`pinn`] — the offline snapshot solver (full network training at a
//!   fixed parameter, with optional shock-capturing weight).
//! * [`metanet`] — the transform layer and the reduced meta-network whose
//!   neurons are pre-trained snapshots; online training of its few
//!   parameters.
//! * [`greedy`] — the offline greedy loop growing the meta-network one
//!   snapshot at a time.
//! * [`eim`] — the empirical interpolation baseline for comparison.
//! * [`runs`] / [`config`] — experiment configuration, run directories and
//!   CSV emission used by the `tgpt` binary and the examples.

pub mod adam;
pub mod config;
pub mod eim;
pub mod error;
pub mod greedy;
pub mod jet;
pub mod metanet;
pub mod mlp;
pub mod net;
pub mod pinn;
pub mod problems;
pub mod runs;
pub mod sampling;
pub mod scalar;
pub mod tape;

pub use error::{Error, Result};
pub use jet::Jet;
pub use net::{Activation, Checkpoint, NetworkSpec};

/// Initialize the global thread pool from `TGPT_THREADS` (defaults to the
/// machine parallelism). Safe to call more than once; later calls are no-ops.
pub fn init_threads() {
    let threads = std::env::var("TGPT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
