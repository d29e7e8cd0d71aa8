//! Worst-case delay bounds for wormhole networks-on-chip.
//!
//! Bounds are built from leaky-bucket arrival curves and rate-latency
//! service curves in exact rational arithmetic. Indirect blocking through
//! backpressure is bounded either with a subpath fixed point ([`bata`]) or
//! with an interference graph that stays safe when packets of one flow queue
//! back to back ([`gbata`]). [`wormsim`] replays configurations flit by flit
//! to check the bounds.

pub mod analyzer;
pub mod bata;
pub mod error;
pub mod fixtures;
pub mod gbata;
pub mod generate;
pub mod interference;
pub mod netcalc;
pub mod platform;
pub mod report;
pub mod wormsim;

pub use analyzer::{analyze_all, analyze_flow, AnalysisOptions, AnalysisReport, BoundDecomposition, Method};
pub use error::AnalysisError;
pub use netcalc::Rational;
pub use platform::{validate, Config, Flow, FlowId, NocModel, NodeId, NodeParams, Port};
