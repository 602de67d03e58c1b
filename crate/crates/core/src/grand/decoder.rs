//! Syndrome-checked query loop and the metric form of the decoding rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llr_channel::Polarity;

use super::code::{LinearCode, Word};
use super::patterns::{rank_reliabilities, ErrorPattern, HammingPatterns, OrbPatterns, SoftPatterns};

pub const DEFAULT_MAX_QUERIES: u64 = 1_000_000;

/// Per-position weight `γ_n` of the decoding metric, which fixes the query order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `γ_n = 1`: plain GRAND, patterns by Hamming weight.
    Unit,
    /// `γ_n = |t_n|`: SGRAND, maximum-likelihood order.
    AbsLlr,
    /// `γ_n = r_n / N`: ORBGRAND, patterns by rank sum.
    RankOverN,
}

impl Weighting {
    pub const ALL: [Weighting; 3] = [Weighting::Unit, Weighting::AbsLlr, Weighting::RankOverN];

    pub fn name(self) -> &'static str {
        match self {
            Weighting::Unit => "unit",
            Weighting::AbsLlr => "abs_llr",
            Weighting::RankOverN => "rank_over_n",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" | "grand" => Ok(Weighting::Unit),
            "abs_llr" | "abs-llr" | "sgrand" => Ok(Weighting::AbsLlr),
            "rank_over_n" | "rank-over-n" | "orbgrand" => Ok(Weighting::RankOverN),
            other => Err(Error::invalid(
                "weighting",
                format!("unknown weighting `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub weighting: Weighting,
    pub max_queries: u64,
}

impl QueryPlan {
    pub fn new(weighting: Weighting, max_queries: u64) -> Result<Self> {
        if max_queries == 0 {
            return Err(Error::invalid("max_queries", "must be at least 1"));
        }
        Ok(QueryPlan {
            weighting,
            max_queries,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodeResult {
    Codeword { word: Word, queries_used: u64 },
    Abandoned { queries_used: u64 },
}

impl DecodeResult {
    pub fn queries_used(&self) -> u64 {
        match *self {
            DecodeResult::Codeword { queries_used, .. } | DecodeResult::Abandoned { queries_used } => {
                queries_used
            }
        }
    }

    pub fn codeword(&self) -> Option<Word> {
        match *self {
            DecodeResult::Codeword { word, .. } => Some(word),
            DecodeResult::Abandoned { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub result: DecodeResult,
    /// Decoding metric at the returned codeword; absent when abandoned.
    pub metric_value: Option<f64>,
}

/// Hard decision with `sgn(0) = +1`; bit `1` stands for `+1`.
pub fn hard_decision(llrs: &[f64]) -> Word {
    Word::from_bits(&llrs.iter().map(|&t| Polarity::hard_decision(t).bit()).collect::<Vec<_>>())
}

fn pattern_stream(llrs: &[f64], weighting: Weighting) -> Result<Box<dyn Iterator<Item = ErrorPattern>>> {
    Ok(match weighting {
        Weighting::Unit => Box::new(HammingPatterns::new(llrs.len())?),
        Weighting::AbsLlr => Box::new(SoftPatterns::new(llrs)?),
        Weighting::RankOverN => Box::new(OrbPatterns::from_llrs(llrs)?),
    })
}

/// Flips putative error patterns into the hard decision until a codeword
/// appears or `max_queries` patterns have been tried.
pub fn grand_decode(llrs: &[f64], code: &LinearCode, plan: &QueryPlan) -> Result<DecodeOutcome> {
    if llrs.len() != code.n {
        return Err(Error::DimensionMismatch {
            expected: code.n,
            actual: llrs.len(),
        });
    }
    if plan.max_queries == 0 {
        return Err(Error::invalid("max_queries", "must be at least 1"));
    }
    let hard = hard_decision(llrs);
    let target = code.syndrome(hard);
    let mut queries = 0u64;
    for pattern in pattern_stream(llrs, plan.weighting)? {
        if queries == plan.max_queries {
            break;
        }
        queries += 1;
        if code.syndrome_of_mask(pattern.mask) == target {
            let word = hard.flip(pattern.mask);
            let metric = metric_eval_word(word, llrs, plan.weighting)?;
            return Ok(DecodeOutcome {
                result: DecodeResult::Codeword {
                    word,
                    queries_used: queries,
                },
                metric_value: Some(metric),
            });
        }
    }
    Ok(DecodeOutcome {
        result: DecodeResult::Abandoned {
            queries_used: queries,
        },
        metric_value: None,
    })
}

/// `(1/N) Σ_n γ_n 1(sgn(t_n) x_n < 0)` for the candidate `x` given as bits.
pub fn metric_eval(candidate: &[bool], llrs: &[f64], weighting: Weighting) -> Result<f64> {
    if candidate.len() != llrs.len() {
        return Err(Error::DimensionMismatch {
            expected: llrs.len(),
            actual: candidate.len(),
        });
    }
    if llrs.is_empty() {
        return Err(Error::invalid("llrs", "must be nonempty"));
    }
    let n = llrs.len() as f64;
    let ranks = match weighting {
        Weighting::RankOverN => {
            let abs: Vec<f64> = llrs.iter().map(|t| t.abs()).collect();
            rank_reliabilities(&abs)
        }
        _ => Vec::new(),
    };
    let wrong = candidate
        .iter()
        .zip(llrs)
        .enumerate()
        .filter(|&(_, (&bit, &t))| Polarity::from_bit(bit).disagrees_with(t));
    Ok(match weighting {
        Weighting::Unit => wrong.count() as f64 / n,
        Weighting::AbsLlr => wrong.map(|(_, (_, &t))| t.abs()).sum::<f64>() / n,
        Weighting::RankOverN => wrong.map(|(j, _)| ranks[j] as u64).sum::<u64>() as f64 / (n * n),
    })
}

pub fn metric_eval_word(word: Word, llrs: &[f64], weighting: Weighting) -> Result<f64> {
    metric_eval(&word.to_bits(llrs.len()), llrs, weighting)
}
