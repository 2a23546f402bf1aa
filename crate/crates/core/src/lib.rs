//! Average age of information (AAoI) for multi-source M/G/1 status-update
//! queues whose server breaks down while serving and is repaired under a
//! preemptive-resume discipline.
//!
//! The crate has two independent routes to the same numbers:
//!
//! * [`transforms`] and [`aoi`] evaluate the closed forms (idle probability,
//!   availability, sojourn-time LST, queue pgfs, conditional-expectation
//!   terms and the per-source AAoI).
//! * [`des`] simulates the queue event by event and integrates the AoI
//!   sawtooth exactly, producing replication-level confidence intervals for
//!   every quantity the closed forms predict.
//!
//! [`dists`] holds the service and repair laws both routes share.

pub mod aoi;
pub mod des;
pub mod dists;
pub mod error;
pub mod numdiff;
pub mod stats;
pub mod transforms;

pub use aoi::{AaoiResult, AnalyticReport, EventProbs, LemmaTerms, SourceAaoi};
pub use dists::DistributionSpec;
pub use error::{Error, Result};
pub use transforms::{CompletionMoments, SourceParams, SteadyState, SystemParams};
