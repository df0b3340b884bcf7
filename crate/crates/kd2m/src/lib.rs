//! Knowledge distillation through distribution matching.
//!
//! A student network is trained to match a frozen teacher's feature
//! distribution under a pluggable family of distribution metrics: empirical
//! optimal transport (W2, class-conditional W2, joint W2) and closed-form
//! Gaussian discrepancies (W2/Bures, KL). The crate also measures the
//! theoretical bound relating feature-space Wasserstein distance to the
//! L2 distance between encoder networks.
//!
//! Start with the runnable programs in `examples/`; the `kd2m` binary wraps
//! the same library functions behind subcommands.

pub mod bench;
pub mod config;
pub mod data;
pub mod distill;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod ot;
pub mod plot;
pub mod theory;

pub use error::{Error, Result};
