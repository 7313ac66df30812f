//! Simulator and optimization library for handover-aware power minimization
//! in networked LEO satellite downlinks.
//!
//! The crate is organized around a per-frame pipeline:
//!
//! 1. [`orbits`] generates a Walker-Delta constellation, propagates it, and
//!    produces per-frame link geometry ([`orbits::FrameSnapshot`]).
//! 2. [`channel`] turns geometry into statistical CSI
//!    ([`channel::ChannelStats`]): Rician moments, array responses, and the
//!    per-user second-moment matrices used by the rate bound.
//! 3. [`metrics`] evaluates hardening-bound and segmented rates and the
//!    handover-aware power model.
//! 4. [`conic`] is a cone-program container (linear objective, equalities,
//!    second-order and exponential cones) with an interior-point backend.
//! 5. [`optimizer`] implements the joint cooperative beamforming and implicit
//!    scheduling algorithm (reweighted l2 outer loop, FP inner loop).
//! 6. [`baselines`] provides pre-fixed scheduling rules and the cooperative /
//!    non-cooperative reference designs.
//! 7. [`harness`] runs seeded multi-frame Monte-Carlo experiments and emits
//!    CSV output; it also backs the `leocoop` CLI.

pub mod baselines;
pub mod channel;
pub mod conic;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod orbits;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
