//! Named self-checks of the rate formulas and decoders, run as one report.

use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bicm::{bicm_rate, bicm_reports, bit_channel, make_constellation, Fading, FadingModel, Labeling, RateKind, Scheme};
use crate::error::Result;
use crate::grand::{
    grand_decode, metric_eval_word, simulate_metric_statistics, LinearCode, OrbPatterns, QueryPlan,
    SoftPatterns, Weighting,
};
use crate::llr_channel::{psi_cdf, BitChannel, LlrEnsemble, Polarity};
use crate::numeric::derive_seed;
use crate::rates::{
    delta_limit, error_budget, logistic_integral, orbgrand_gmi, orbgrand_linear_term, rate_report,
    RateConfig, RateReport, DEFAULT_SAMPLES, DEFAULT_SEED,
};
use crate::stats::{ks_critical_value, ks_test};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Monte Carlo draws per rate evaluation.
    pub samples: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// Outcome of one named check. `measured` is compared against `threshold`
/// in the direction stated by `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub samples: usize,
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

fn entry(name: &str, passed: bool, measured: f64, threshold: f64, detail: impl Into<String>) -> ValidationEntry {
    ValidationEntry {
        name: name.to_string(),
        passed,
        measured,
        threshold,
        detail: detail.into(),
    }
}

fn failed(name: &str, err: impl std::fmt::Display) -> ValidationEntry {
    entry(name, false, f64::NAN, f64::NAN, format!("error: {err}"))
}

/// Runs a suite, turning an error into a failed entry under `name`.
fn guarded(name: &str, out: &mut Vec<ValidationEntry>, suite: impl FnOnce() -> Result<Vec<ValidationEntry>>) {
    match suite() {
        Ok(es) => out.extend(es),
        Err(e) => out.push(failed(name, e)),
    }
}

/// Runs every suite. Failures and internal errors become report entries.
pub fn validate_all(cfg: &ValidationConfig) -> ValidationReport {
    let rc = |tag: u64| RateConfig::with_samples(cfg.samples, derive_seed(cfg.seed, &[tag]));
    let mut entries = Vec::new();
    guarded("sgrand_vs_mi", &mut entries, || sgrand_mi_suite(&rc(1)));
    guarded("awgn_near_tightness", &mut entries, || tightness_suite(&rc(2)));
    guarded("bsc_oracle", &mut entries, || bsc_oracle_suite(&rc(3)));
    guarded("uniformity", &mut entries, || uniformity_suite(derive_seed(cfg.seed, &[4])));
    guarded("metric_limits", &mut entries, || metric_limit_suite(&rc(5)));
    guarded("pattern_streams", &mut entries, || pattern_suite(derive_seed(cfg.seed, &[6])));
    guarded("decoder_oracles", &mut entries, || decoder_suite(derive_seed(cfg.seed, &[7])));
    guarded("bicm_structure", &mut entries, || bicm_suite(&rc(8)));
    ValidationReport {
        seed: cfg.seed,
        samples: cfg.samples,
        entries,
    }
}

/// Channels on which SGRAND must reproduce the mutual information.
pub(crate) fn mi_check_channels() -> Result<Vec<(String, BitChannel)>> {
    let mut out = Vec::new();
    for snr in [0.0, 3.0, 6.0] {
        out.push((format!("bpsk-awgn {snr} dB"), BitChannel::bpsk_awgn(snr)?));
        out.push((format!("bpsk-rayleigh {snr} dB"), BitChannel::bpsk_rayleigh(snr)?));
    }
    out.push(("bsc 0.11".to_string(), BitChannel::bsc(0.11)?));
    let model = FadingModel::new(Fading::Awgn, 6.0)?;
    for scheme in Scheme::ALL {
        for labeling in Labeling::ALL {
            let c = make_constellation(scheme, labeling);
            for level in 1..=scheme.bits_per_symbol() {
                out.push((
                    format!("{scheme}/{labeling} level {level} 6 dB"),
                    bit_channel(&c, level, model)?,
                ));
            }
        }
    }
    Ok(out)
}

fn sgrand_mi_suite(cfg: &RateConfig) -> Result<Vec<ValidationEntry>> {
    let mut worst_eq = (f64::NEG_INFINITY, 0.0, 0.0, String::new());
    let mut worst_order = (f64::NEG_INFINITY, 0.0, 0.0, String::new());
    let mut eq_ok = true;
    let mut order_ok = true;
    for (i, (name, ch)) in mi_check_channels()?.into_iter().enumerate() {
        let c = RateConfig {
            seed: derive_seed(cfg.seed, &[i as u64]),
            ..*cfg
        };
        let r = rate_report(&ch, &c)?;
        let budget = r.error_budget();
        let diff = (r.i_sgrand - r.i_mi).abs();
        eq_ok &= diff <= budget;
        if diff / budget > worst_eq.0 {
            worst_eq = (diff / budget, diff, budget, name.clone());
        }
        let excess = r.i_orbgrand - r.i_sgrand.min(r.i_mi);
        order_ok &= excess <= budget;
        if excess / budget > worst_order.0 {
            worst_order = (excess / budget, excess, budget, name);
        }
    }
    Ok(vec![
        entry(
            "sgrand_equals_mi",
            eq_ok,
            worst_eq.1,
            worst_eq.2,
            format!("|i_sgrand - i_mi| <= error budget; worst channel {}", worst_eq.3),
        ),
        entry(
            "orbgrand_below_sgrand_and_mi",
            order_ok,
            worst_order.1,
            worst_order.2,
            format!(
                "i_orbgrand - min(i_sgrand, i_mi) <= error budget; worst channel {}",
                worst_order.3
            ),
        ),
    ])
}

fn tightness_suite(cfg: &RateConfig) -> Result<Vec<ValidationEntry>> {
    let mut worst = (f64::NEG_INFINITY, 0.0);
    let mut awgn3 = None;
    for (i, snr) in (-5..=10).map(f64::from).enumerate() {
        let c = RateConfig {
            seed: derive_seed(cfg.seed, &[i as u64]),
            ..*cfg
        };
        let r = rate_report(&BitChannel::bpsk_awgn(snr)?, &c)?;
        let gap = r.i_mi - r.i_orbgrand;
        if gap > worst.0 {
            worst = (gap, snr);
        }
        if snr == 3.0 {
            awgn3 = Some(gap);
        }
    }
    let ray = rate_report(
        &BitChannel::bpsk_rayleigh(3.0)?,
        &RateConfig {
            seed: derive_seed(cfg.seed, &[99]),
            ..*cfg
        },
    )?;
    let awgn3 = awgn3.expect("3 dB is on the grid");
    let ray_gap = ray.i_mi - ray.i_orbgrand;
    Ok(vec![
        entry(
            "awgn_gap_below_0.01",
            worst.0 <= 0.01,
            worst.0,
            0.01,
            format!("max over -5..10 dB of i_mi - i_orbgrand (at {} dB)", worst.1),
        ),
        entry(
            "rayleigh_gap_exceeds_awgn_at_3db",
            ray_gap > awgn3,
            ray_gap,
            awgn3,
            "Rayleigh gap must exceed the AWGN gap",
        ),
    ])
}

/// `ln2 - min_θ {∫₀¹ ln(1+e^{θt})dt - θp}` over `points` evenly spaced θ in
/// `[-200, -1e-4]`.
pub fn bsc_grid_oracle(p: f64, points: usize) -> Result<f64> {
    let (lo, hi) = (-200.0, -1e-4);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = f64::INFINITY;
    for i in 0..points {
        let theta = lo + step * i as f64;
        best = best.min(logistic_integral(theta)? - theta * p);
    }
    Ok(LN_2 - best)
}

fn bsc_oracle_suite(cfg: &RateConfig) -> Result<Vec<ValidationEntry>> {
    let mut worst: f64 = 0.0;
    for p in [0.01, 0.05, 0.11, 0.2] {
        let rate = orbgrand_gmi(&BitChannel::bsc(p)?, cfg)?.rate;
        worst = worst.max((rate - bsc_grid_oracle(p, 100_000)?).abs());
    }
    Ok(vec![entry(
        "bsc_orbgrand_matches_grid_oracle",
        worst <= 1e-5,
        worst,
        1e-5,
        "max over p in {0.01, 0.05, 0.11, 0.2} of |orbgrand - grid oracle|",
    )])
}

/// `Ψ(|T|)` for `n` draws of `T` under equiprobable inputs.
pub fn reliability_transform_samples(ch: &BitChannel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let psi = psi_cdf(ch, n.max(10_000), derive_seed(seed, &[1]))?;
    let ens = LlrEnsemble::draw(ch, n, derive_seed(seed, &[2]))?;
    let LlrEnsemble::Sampled { plus, minus } = ens else {
        return Ok(Vec::new());
    };
    Ok(plus.iter().chain(&minus).map(|t| psi.eval(t.abs())).collect())
}

fn uniformity_suite(seed: u64) -> Result<Vec<ValidationEntry>> {
    let n = 100_000;
    let crit = ks_critical_value(n, 0.01);
    let mut out = Vec::new();
    for (name, ch) in [
        ("uniformity_bpsk_awgn_3db", BitChannel::bpsk_awgn(3.0)?),
        ("uniformity_bpsk_rayleigh_3db", BitChannel::bpsk_rayleigh(3.0)?),
    ] {
        let u = reliability_transform_samples(&ch, n, derive_seed(seed, &[out.len() as u64]))?;
        let ks = ks_test(&u, |x| x.clamp(0.0, 1.0));
        out.push(entry(
            name,
            ks.passes(0.01),
            ks.statistic,
            crit,
            format!("KS statistic vs 1% critical value, p = {:.4}", ks.p_value),
        ));
    }
    Ok(out)
}

fn metric_limit_suite(cfg: &RateConfig) -> Result<Vec<ValidationEntry>> {
    let ch = BitChannel::bpsk_awgn(3.0)?;
    let trials = 500;
    let thetas = [-1.0, -5.0, -20.0];
    let big = simulate_metric_statistics(&ch, 4096, trials, &thetas, derive_seed(cfg.seed, &[1]))?;
    let psi = psi_cdf(&ch, cfg.psi_samples, cfg.seed)?;
    let lin = orbgrand_linear_term(&ch, &psi, cfg.samples, derive_seed(cfg.seed, &[2]))?;
    let combined = big.se_mean.hypot(lin.std_error);
    let dev = (big.mean_d1 - lin.value).abs();
    let mut out = vec![entry(
        "mean_metric_limit",
        dev <= 3.0 * combined,
        dev,
        3.0 * combined,
        format!("|mean D(1) - linear term| at n=4096 ({} vs {})", big.mean_d1, lin.value),
    )];
    let small = simulate_metric_statistics(&ch, 128, trials, &[], derive_seed(cfg.seed, &[3]))?;
    let mid = simulate_metric_statistics(&ch, 2048, trials, &[], derive_seed(cfg.seed, &[4]))?;
    out.push(entry(
        "metric_variance_shrinks",
        mid.var_d1 < small.var_d1,
        mid.var_d1,
        small.var_d1,
        "var D(1) at n=2048 below var at n=128",
    ));
    for (i, &theta) in thetas.iter().enumerate() {
        let dev = (big.delta_mean(i) - delta_limit(theta)?).abs();
        out.push(entry(
            &format!("log_mgf_limit_theta_{theta}"),
            dev <= 1e-3,
            dev,
            1e-3,
            "|estimator - limit| at n=4096",
        ));
    }
    Ok(out)
}

fn pattern_suite(seed: u64) -> Result<Vec<ValidationEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orb_bad = 0usize;
    let mut soft_bad = 0usize;
    for n in 1..=12usize {
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(&mut rng);
        let mut seen = vec![false; 1 << n];
        let mut last = -1.0;
        let mut count = 0;
        for p in OrbPatterns::new(&ranks)? {
            let sum: usize = p.positions().iter().map(|&j| ranks[j]).sum();
            let m = p.mask as usize;
            if seen[m] || p.score < last || p.score != sum as f64 {
                orb_bad += 1;
            }
            seen[m] = true;
            last = p.score;
            count += 1;
        }
        if count != 1 << n {
            orb_bad += 1;
        }

        let llrs: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mut all: Vec<f64> = (0..1usize << n)
            .map(|m| (0..n).filter(|j| m >> j & 1 == 1).map(|j| llrs[j].abs()).sum())
            .collect();
        all.sort_by(f64::total_cmp);
        let streamed: Vec<f64> = SoftPatterns::new(&llrs)?.map(|p| p.score).collect();
        let mut seen = vec![false; 1 << n];
        for p in SoftPatterns::new(&llrs)? {
            if std::mem::replace(&mut seen[p.mask as usize], true) {
                soft_bad += 1;
            }
        }
        if streamed.len() != all.len()
            || streamed.windows(2).any(|w| w[1] < w[0])
            || streamed.iter().zip(&all).any(|(a, b)| (a - b).abs() > 1e-9)
        {
            soft_bad += 1;
        }
    }
    Ok(vec![
        entry(
            "orbgrand_stream_bijection",
            orb_bad == 0,
            orb_bad as f64,
            0.0,
            "violations over N = 1..12 (duplicates, order, missing subsets)",
        ),
        entry(
            "sgrand_stream_likelihood_order",
            soft_bad == 0,
            soft_bad as f64,
            0.0,
            "violations over N = 1..12 against sorting all subsets",
        ),
    ])
}

fn noisy_codeword(code: &LinearCode, ch: &BitChannel, rng: &mut ChaCha8Rng) -> (u128, Vec<f64>) {
    let msg = rng.random::<u128>() & ((1u128 << code.k) - 1);
    let cw = code.encode(msg);
    let llrs = (0..code.n)
        .map(|j| ch.sample_llr(Polarity::from_bit(cw.bit(j)), rng))
        .collect();
    (cw.0, llrs)
}

fn decoder_suite(seed: u64) -> Result<Vec<ValidationEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let code = LinearCode::random(12, 6, derive_seed(seed, &[1]))?;
    let ch = BitChannel::bpsk_awgn(1.0)?;
    let plan = QueryPlan::new(Weighting::AbsLlr, 1 << 12)?;
    let codewords: Vec<_> = code.codewords().collect();
    let mut ml_mismatch = 0usize;
    for _ in 0..500 {
        let (_, llrs) = noisy_codeword(&code, &ch, &mut rng);
        let ml = codewords
            .iter()
            .map(|&w| (metric_eval_word(w, &llrs, Weighting::AbsLlr).unwrap(), w))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, w)| w);
        if grand_decode(&llrs, &code, &plan)?.result.codeword() != ml {
            ml_mismatch += 1;
        }
    }

    let code = LinearCode::random(16, 8, derive_seed(seed, &[2]))?;
    let ch = BitChannel::bpsk_awgn(6.0)?;
    let plan = QueryPlan::new(Weighting::RankOverN, 1 << 16)?;
    let codewords: Vec<_> = code.codewords().collect();
    let (mut argmin_mismatch, mut ties) = (0usize, 0usize);
    for _ in 0..200 {
        let (_, llrs) = noisy_codeword(&code, &ch, &mut rng);
        let mut scored: Vec<(f64, _)> = codewords
            .iter()
            .map(|&w| (metric_eval_word(w, &llrs, Weighting::RankOverN).unwrap(), w))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        if scored[1].0 - scored[0].0 < 1e-12 {
            ties += 1;
            continue;
        }
        if grand_decode(&llrs, &code, &plan)?.result.codeword() != Some(scored[0].1) {
            argmin_mismatch += 1;
        }
    }
    Ok(vec![
        entry(
            "sgrand_equals_ml",
            ml_mismatch == 0,
            ml_mismatch as f64,
            0.0,
            "mismatches vs exhaustive ML over 500 trials, n=12, k=6",
        ),
        entry(
            "orbgrand_equals_metric_argmin",
            argmin_mismatch == 0,
            argmin_mismatch as f64,
            0.0,
            format!("mismatches over tie-free trials of 200 (n=16, k=8); {ties} tied trials skipped"),
        ),
    ])
}

fn bicm_suite(cfg: &RateConfig) -> Result<Vec<ValidationEntry>> {
    let mut out = Vec::new();
    let qpsk = make_constellation(Scheme::Qpsk, Labeling::Gray);
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for (i, snr) in [0.0, 3.0, 6.0].into_iter().enumerate() {
        let c = RateConfig {
            seed: derive_seed(cfg.seed, &[1, i as u64]),
            ..*cfg
        };
        let q = bicm_rate(&qpsk, FadingModel::new(Fading::Awgn, snr)?, RateKind::Mi, &c)?;
        let b: RateReport = rate_report(&BitChannel::bpsk_awgn(snr)?, &c)?;
        let budget = q.error_budget() + 2.0 * error_budget(b.mc_std_error, 0.0);
        let diff = (q.total - 2.0 * b.i_mi).abs();
        if diff / budget > worst.0 {
            worst = (diff / budget, diff, budget);
        }
    }
    out.push(entry(
        "qpsk_gray_is_two_bpsk",
        worst.0 <= 1.0,
        worst.1,
        worst.2,
        "|I_qpsk - 2 I_bpsk| <= error budget at 0, 3, 6 dB",
    ));

    let mut sat_worst: f64 = 0.0;
    let mut sat_ok = true;
    let mut exact_worst: f64 = 0.0;
    for scheme in Scheme::ALL {
        let m = scheme.bits_per_symbol() as f64;
        let tol = if scheme == Scheme::Qam16 { 0.05 } else { 0.01 };
        for labeling in Labeling::ALL {
            let c = make_constellation(scheme, labeling);
            for (snr, exact) in [(20.0, false), (30.0, true)] {
                let reports = bicm_reports(&c, FadingModel::new(Fading::Awgn, snr)?, cfg)?;
                let totals = [
                    reports.iter().map(|r| r.i_mi).sum::<f64>(),
                    reports.iter().map(|r| r.i_orbgrand).sum::<f64>(),
                    reports.iter().map(|r| r.i_sgrand).sum::<f64>(),
                ];
                for total in totals {
                    let gap = m * LN_2 - total;
                    if exact {
                        exact_worst = exact_worst.max(gap.abs());
                    } else {
                        sat_ok &= gap <= tol;
                        sat_worst = sat_worst.max(gap / tol);
                    }
                }
            }
        }
    }
    out.push(entry(
        "bicm_saturation_20db",
        sat_ok,
        sat_worst,
        1.0,
        "worst (m ln2 - rate) / tolerance over AWGN schemes, labelings and rates (0.01; 16QAM 0.05)",
    ));
    out.push(entry(
        "bicm_saturation_30db",
        exact_worst <= 1e-6,
        exact_worst,
        1e-6,
        "max |m ln2 - rate| at 30 dB",
    ));

    let mut order_ok = true;
    let mut worst_deficit = f64::NEG_INFINITY;
    for scheme in Scheme::ALL {
        let gray = make_constellation(scheme, Labeling::Gray);
        let sp = make_constellation(scheme, Labeling::SetPartitioning);
        for snr in (6..=20).step_by(2).map(f64::from) {
            let model = FadingModel::new(Fading::Awgn, snr)?;
            let g = bicm_rate(&gray, model, RateKind::Mi, cfg)?;
            let s = bicm_rate(&sp, model, RateKind::Mi, cfg)?;
            let deficit = s.total - g.total;
            order_ok &= deficit <= g.error_budget() + s.error_budget();
            worst_deficit = worst_deficit.max(deficit);
        }
    }
    out.push(entry(
        "gray_at_least_sp_from_6db",
        order_ok,
        worst_deficit,
        0.0,
        "max of I_sp - I_gray over 6..20 dB (pass within error budget)",
    ));
    Ok(out)
}
