//! Meta-learning of initializations by shaping gradient descent paths.
//!
//! The core idea: an initialization transfers well to a family of tasks when
//! the gradient descent path from it across each task's loss surface is short
//! (in cumulative chordal length, `p = 1`) or low-energy (`p = 2`). This
//! crate implements that principle end to end:
//!
//! * [`tasks`] — synthetic task families (quadratic bowls, sinusoid
//!   regression with a small MLP, two-class Gaussian blob classification)
//!   with exact analytic gradients and per-task deterministic datasets.
//! * [`training`] — inner-loop gradient descent: update rules (learning rate
//!   schedules, diagonal preconditioners), recorded paths and a streaming
//!   walker with identical numerics.
//! * [`geometry`] — path length/energy on the graph of the loss, the frozen
//!   forward-point surrogate and its pull-forward gradient increments.
//! * [`meta`] — the meta loop that descends the expected path measure, plus
//!   first-order baselines (interpolation toward inner-loop endpoints,
//!   held-out-batch first-order gradients), transfer evaluation and
//!   checkpointing.
//! * [`verify`] — independent oracles: finite-difference segment gradients,
//!   update-operator products against closed forms, brute-force grid
//!   minimizers, monotonicity and feasibility checks, and the ablation grid.
//!
//! Batches of tasks, evaluation seeds and grid cells run data-parallel via
//! [`execution`] (rayon behind the default `parallel` feature) with
//! index-ordered reductions, so results are bitwise independent of thread
//! count.

pub mod error;
pub mod execution;
pub mod geometry;
pub mod linalg;
pub mod meta;
pub mod rng;
pub mod tasks;
pub mod training;
pub mod verify;

pub use error::{LeapError, Result};
