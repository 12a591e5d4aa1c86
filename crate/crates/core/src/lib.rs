//! Latent-state decoding for hard-exploration reinforcement learning.
//!
//! The crate couples three ingredients and the machinery between them:
//!
//! * combination-lock environments with rich observations ([`lock`]),
//! * unsupervised decoding oracles fit on unlabeled observation batches
//!   ([`ulo`]),
//! * no-regret tabular learners ([`learner`]),
//!
//! joined by the trajectory-sampling loop in [`url`], which lets a
//! tabular learner run on a rich-observation environment as if the
//! latent states were visible. The [`harness`] module adds seeded,
//! replicated experiments with CSV learning curves; the `decode-rl`
//! binary exposes them on the command line.

pub mod env;
pub mod error;
pub mod harness;
pub mod latent;
pub mod learner;
pub mod lock;
pub mod perm;
pub mod policy;
pub mod rng;
pub mod stats;
pub mod textio;
pub mod trajectory;
pub mod ulo;
pub mod url;

pub use error::{Error, Result};
