//! Achievable rates of guessing random additive noise decoders.
//!
//! The crate computes the generalized mutual information of ORBGRAND and
//! SGRAND over memoryless binary-input channels, decomposes BICM schemes into
//! their bit channels, and implements the decoders themselves on random
//! linear codes so the rate formulas can be checked against simulation.

pub mod bicm;
pub mod error;
pub mod experiments;
pub mod grand;
pub mod llr_channel;
pub mod numeric;
pub mod rates;
pub mod stats;

pub use error::{Error, Result};
pub use llr_channel::{BitChannel, LlrEnsemble, Polarity, ReliabilityCdf};
pub use rates::{rate_report, RateConfig, RateReport};
