//! Monte Carlo drivers: decoding-metric statistics and block error rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llr_channel::{BitChannel, Polarity};
use crate::numeric::derive_seed;
use crate::rates::delta_log_mgf_estimator;
use crate::stats::{sample_variance, Estimate};

use super::code::{LinearCode, Word};
use super::decoder::{grand_decode, metric_eval, DecodeResult, QueryPlan, Weighting};
use super::patterns::rank_reliabilities;

/// Statistics of the ORBGRAND metric `D` at the transmitted word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStatistics {
    pub n: usize,
    pub trials: usize,
    pub mean_d1: f64,
    pub var_d1: f64,
    /// Standard error of `mean_d1`.
    pub se_mean: f64,
    pub thetas: Vec<f64>,
    /// `delta_samples[i][trial]` is the rank-based log-MGF estimate at `thetas[i]`.
    pub delta_samples: Vec<Vec<f64>>,
}

impl MetricStatistics {
    pub fn delta_mean(&self, i: usize) -> f64 {
        let xs = &self.delta_samples[i];
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn draw_block(ch: &BitChannel, bits: &[bool], rng: &mut ChaCha8Rng) -> Vec<f64> {
    bits.iter()
        .map(|&b| ch.sample_llr(Polarity::from_bit(b), rng))
        .collect()
}

/// Sends `trials` uniformly random words of length `n` and records `D` at the
/// sent word together with the rank-based log-MGF estimates.
pub fn simulate_metric_statistics(
    ch: &BitChannel,
    n: usize,
    trials: usize,
    thetas: &[f64],
    seed: u64,
) -> Result<MetricStatistics> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2"));
    }
    let per_trial: Vec<(f64, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(f64, Vec<f64>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[trial as u64]));
            let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let llrs = draw_block(ch, &bits, &mut rng);
            let d1 = metric_eval(&bits, &llrs, Weighting::RankOverN)?;
            let abs: Vec<f64> = llrs.iter().map(|t| t.abs()).collect();
            let ranks = rank_reliabilities(&abs);
            let deltas = thetas
                .iter()
                .map(|&th| delta_log_mgf_estimator(&ranks, th))
                .collect::<Result<Vec<_>>>()?;
            Ok((d1, deltas))
        })
        .collect::<Result<_>>()?;
    let d1: Vec<f64> = per_trial.iter().map(|(d, _)| *d).collect();
    let est = Estimate::of_samples(&d1);
    let delta_samples = (0..thetas.len())
        .map(|i| per_trial.iter().map(|(_, ds)| ds[i]).collect())
        .collect();
    Ok(MetricStatistics {
        n,
        trials,
        mean_d1: est.value,
        var_d1: sample_variance(&d1),
        se_mean: est.std_error,
        thetas: thetas.to_vec(),
        delta_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerReport {
    pub n: usize,
    pub k: usize,
    pub weighting: Weighting,
    pub max_queries: u64,
    pub trials: usize,
    /// Decoded word differs from the sent one, abandonments included.
    pub block_errors: usize,
    pub abandonments: usize,
    pub mean_queries: f64,
    pub bler: f64,
    pub std_error: f64,
    pub seed: u64,
}

/// A uniformly random codeword of `code` and its LLRs after `ch`.
pub fn noisy_codeword(code: &LinearCode, ch: &BitChannel, seed: u64) -> (Word, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let message = rng.random::<u128>() & ((1u128 << code.k) - 1);
    let sent = code.encode(message);
    let llrs = draw_block(ch, &sent.to_bits(code.n), &mut rng);
    (sent, llrs)
}

/// Block error rate of `code` over `ch`, one random message per trial.
pub fn simulate_bler(
    code: &LinearCode,
    ch: &BitChannel,
    plan: &QueryPlan,
    trials: usize,
    seed: u64,
) -> Result<BlerReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let outcomes: Vec<(bool, bool, u64)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(bool, bool, u64)> {
            let (sent, llrs) = noisy_codeword(code, ch, derive_seed(seed, &[trial as u64]));
            let out = grand_decode(&llrs, code, plan)?;
            let queries = out.result.queries_used();
            Ok(match out.result {
                DecodeResult::Codeword { word, .. } => (word != sent, false, queries),
                DecodeResult::Abandoned { .. } => (true, true, queries),
            })
        })
        .collect::<Result<_>>()?;
    let block_errors = outcomes.iter().filter(|o| o.0).count();
    let abandonments = outcomes.iter().filter(|o| o.1).count();
    let total_queries: u64 = outcomes.iter().map(|o| o.2).sum();
    let bler = block_errors as f64 / trials as f64;
    Ok(BlerReport {
        n: code.n,
        k: code.k,
        weighting: plan.weighting,
        max_queries: plan.max_queries,
        trials,
        block_errors,
        abandonments,
        mean_queries: total_queries as f64 / trials as f64,
        bler,
        std_error: (bler * (1.0 - bler) / trials as f64).sqrt(),
        seed,
    })
}
