//! Guessing random additive noise decoding.
//!
//! A received LLR vector is hard-decided and then perturbed by a stream of
//! putative error patterns until the syndrome vanishes. The three decoders
//! differ only in the order of that stream: Hamming weight (GRAND), cumulative
//! `|llr|` (SGRAND) or the sum of reliability ranks (ORBGRAND).

mod code;
mod decoder;
mod patterns;
mod simulate;

pub use code::{LinearCode, Word, MAX_LENGTH};
pub use decoder::{
    grand_decode, hard_decision, metric_eval, metric_eval_word, DecodeOutcome, DecodeResult,
    QueryPlan, Weighting, DEFAULT_MAX_QUERIES,
};
pub use patterns::{
    rank_reliabilities, ErrorPattern, HammingPatterns, OrbPatterns, SoftPatterns,
};
pub use simulate::{noisy_codeword, simulate_bler, simulate_metric_statistics, BlerReport, MetricStatistics};
