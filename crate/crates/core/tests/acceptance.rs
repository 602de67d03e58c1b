//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Most criteria run in a single test so their lines come out in order; it
//! fails when any of them fails, after every line has been printed. The BLER
//! criterion runs on its own.

use std::collections::HashSet;
use std::f64::consts::{LN_2, PI};
use std::fs;
use std::io::Write;
use std::time::Instant;

use grandrate::bicm::{
    bicm_rate, bicm_reports, bit_channel, make_constellation, Fading, FadingModel, Labeling, RateKind, Scheme,
};
use grandrate::experiments::{run_sweep, Scenario, SweepSpec};
use grandrate::grand::{
    grand_decode, metric_eval_word, noisy_codeword, simulate_bler, simulate_metric_statistics, LinearCode,
    OrbPatterns, QueryPlan, Weighting, Word,
};
use grandrate::llr_channel::{psi_cdf, BitChannel, Polarity};
use grandrate::numeric::derive_seed;
use grandrate::rates::{orbgrand_gmi, orbgrand_linear_term, rate_report, RateConfig, DEFAULT_SAMPLES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5EED_ACCE;

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, o: &Outcome, secs: f64) {
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {id} {verdict} {name} ({secs:.1} s): {}", o.detail);
}

fn cfg(tag: u64) -> RateConfig {
    RateConfig::with_samples(DEFAULT_SAMPLES, derive_seed(SEED, &[tag]))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `∫₀¹ ln(1+e^{θt}) dt`: dilogarithm series for θ <= -1, Simpson otherwise.
fn logistic_oracle(theta: f64) -> f64 {
    if theta <= -1.0 {
        let x = theta.exp();
        let li2: f64 = (1..200).map(|k| (-x).powi(k) / (k as f64).powi(2)).sum();
        (-PI * PI / 12.0 - li2) / theta
    } else {
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |t: f64| softplus(theta * t);
        let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h)).sum();
        (f(0.0) + f(1.0) + inner) * h / 3.0
    }
}

fn sgrand_matches_mi() -> Outcome {
    let start = Instant::now();
    let mut channels = Vec::new();
    for snr in [0.0, 3.0, 6.0] {
        channels.push((format!("awgn {snr} dB"), BitChannel::bpsk_awgn(snr).unwrap()));
        channels.push((format!("rayleigh {snr} dB"), BitChannel::bpsk_rayleigh(snr).unwrap()));
    }
    channels.push(("bsc 0.11".into(), BitChannel::bsc(0.11).unwrap()));
    let model = FadingModel::new(Fading::Awgn, 6.0).unwrap();
    for scheme in Scheme::ALL {
        for labeling in Labeling::ALL {
            let c = make_constellation(scheme, labeling);
            for level in 1..=scheme.bits_per_symbol() {
                channels.push((
                    format!("{scheme}/{labeling}/{level}"),
                    bit_channel(&c, level, model).unwrap(),
                ));
            }
        }
    }
    let mut failures = Vec::new();
    let mut worst = (0.0, String::new());
    let mut max_budget: f64 = 0.0;
    for (i, (name, ch)) in channels.iter().enumerate() {
        let r = rate_report(ch, &cfg(100 + i as u64)).unwrap();
        let diff = (r.i_sgrand - r.i_mi).abs();
        let budget = r.error_budget();
        max_budget = max_budget.max(budget);
        if diff / budget > worst.0 {
            worst = (diff / budget, name.clone());
        }
        if diff > budget {
            failures.push(format!("{name}: {diff:.3e} > {budget:.3e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 300.0,
        format!(
            "{} channels, worst |i_sgrand - i_mi| / budget = {:.3} ({}), largest budget {:.2e} nats, {secs:.0} s of 300 s{}",
            channels.len(),
            worst.0,
            worst.1,
            max_budget,
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn near_tightness() -> Outcome {
    let mut worst = (f64::NEG_INFINITY, 0.0);
    let mut awgn3 = 0.0;
    for snr in -5..=10 {
        let r = rate_report(&BitChannel::bpsk_awgn(snr as f64).unwrap(), &cfg(200 + (snr + 5) as u64)).unwrap();
        let gap = r.i_mi - r.i_orbgrand;
        if gap > worst.0 {
            worst = (gap, snr as f64);
        }
        if snr == 3 {
            awgn3 = gap;
        }
    }
    let ray = rate_report(&BitChannel::bpsk_rayleigh(3.0).unwrap(), &cfg(299)).unwrap();
    let ray_gap = ray.i_mi - ray.i_orbgrand;
    outcome(
        worst.0 <= 0.01 && ray_gap > awgn3,
        format!(
            "max AWGN gap {:.3e} nats at {} dB (limit 0.01); gap at 3 dB: Rayleigh {ray_gap:.3e} vs AWGN {awgn3:.3e}",
            worst.0, worst.1
        ),
    )
}

fn bsc_oracle() -> Outcome {
    let grid: Vec<(f64, f64)> = (0..100_000)
        .map(|i| -200.0 + i as f64 * (200.0 - 1e-4) / 99_999.0)
        .map(|th| (th, logistic_oracle(th)))
        .collect();
    let mut worst: f64 = 0.0;
    for p in [0.01, 0.05, 0.11, 0.2] {
        let oracle = LN_2 - grid.iter().map(|&(th, li)| li - th * p).fold(f64::INFINITY, f64::min);
        let got = orbgrand_gmi(&BitChannel::bsc(p).unwrap(), &cfg(300)).unwrap().rate;
        worst = worst.max((got - oracle).abs());
    }
    outcome(worst <= 1e-5, format!("max |orbgrand - grid oracle| = {worst:.3e} nats (limit 1e-5)"))
}

fn metric_limits() -> Outcome {
    let ch = BitChannel::bpsk_awgn(3.0).unwrap();
    let thetas = [-1.0, -5.0, -20.0];
    let big = simulate_metric_statistics(&ch, 4096, 500, &thetas, derive_seed(SEED, &[400])).unwrap();
    let psi = psi_cdf(&ch, 0, 0).unwrap();
    let lin = orbgrand_linear_term(&ch, &psi, DEFAULT_SAMPLES, derive_seed(SEED, &[401])).unwrap();
    let combined = big.se_mean.hypot(lin.std_error);
    let dev1 = (big.mean_d1 - lin.value).abs();
    let small = simulate_metric_statistics(&ch, 128, 500, &[], derive_seed(SEED, &[402])).unwrap();
    let mid = simulate_metric_statistics(&ch, 2048, 500, &[], derive_seed(SEED, &[403])).unwrap();
    let dev3: Vec<f64> = thetas
        .iter()
        .enumerate()
        .map(|(i, &th)| (big.delta_mean(i) - (logistic_oracle(th) - LN_2)).abs())
        .collect();
    let worst3 = dev3.iter().copied().fold(0.0, f64::max);
    outcome(
        dev1 <= 3.0 * combined && mid.var_d1 < small.var_d1 && worst3 <= 1e-3,
        format!(
            "mean D(1) off by {dev1:.3e} (limit {:.3e}); var D(1) {:.3e} at n=2048 vs {:.3e} at n=128; max log-MGF deviation {worst3:.3e} (limit 1e-3)",
            3.0 * combined,
            mid.var_d1,
            small.var_d1
        ),
    )
}

fn uniformity() -> Outcome {
    let n = 100_000;
    // Asymptotic Kolmogorov critical value at the 1% level.
    let crit = 1.6276 / (n as f64).sqrt();
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (name, ch)) in [
        ("awgn", BitChannel::bpsk_awgn(3.0).unwrap()),
        ("rayleigh", BitChannel::bpsk_rayleigh(3.0).unwrap()),
    ]
    .into_iter()
    .enumerate()
    {
        let psi = psi_cdf(&ch, 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[500 + i as u64]));
        let mut u: Vec<f64> = (0..n)
            .map(|j| {
                let x = if j % 2 == 0 { Polarity::Plus } else { Polarity::Minus };
                psi.eval(ch.sample_llr(x, &mut rng).abs())
            })
            .collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(k, &v)| ((k + 1) as f64 / n as f64 - v).max(v - k as f64 / n as f64))
            .fold(0.0, f64::max);
        ok &= d < crit;
        parts.push(format!("{name} D = {d:.3e}"));
    }
    outcome(ok, format!("{} (1% critical value {crit:.3e}, n = {n})", parts.join(", ")))
}

fn log_likelihood(word: Word, llrs: &[f64]) -> f64 {
    llrs.iter()
        .enumerate()
        .map(|(j, &t)| if word.bit(j) { t } else { -t })
        .sum::<f64>()
        / 2.0
}

fn decoder_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[600]));
    let mut stream_bad = 0;
    for n in 1..=12usize {
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(&mut rng);
        let masks: Vec<u128> = OrbPatterns::new(&ranks).unwrap().map(|p| p.mask).collect();
        let sums: Vec<usize> = masks
            .iter()
            .map(|&m| (0..n).filter(|&j| m >> j & 1 == 1).map(|j| ranks[j]).sum())
            .collect();
        let distinct: HashSet<u128> = masks.iter().copied().collect();
        if masks.len() != 1 << n || distinct.len() != 1 << n || sums.windows(2).any(|w| w[0] > w[1]) {
            stream_bad += 1;
        }
    }

    let code = LinearCode::random(12, 6, derive_seed(SEED, &[601])).unwrap();
    let book: Vec<Word> = code.codewords().collect();
    let ch = BitChannel::bpsk_awgn(1.0).unwrap();
    let sgrand = QueryPlan::new(Weighting::AbsLlr, 1 << 12).unwrap();
    let orb = QueryPlan::new(Weighting::RankOverN, 1 << 12).unwrap();
    let mut ml_mismatch = 0;
    let mut argmin_mismatch = 0;
    let mut tie_free = 0;
    for trial in 0..500 {
        let (_, llrs) = noisy_codeword(&code, &ch, derive_seed(SEED, &[602, trial]));
        let best_ll = book.iter().map(|&w| log_likelihood(w, &llrs)).fold(f64::NEG_INFINITY, f64::max);
        let got = grand_decode(&llrs, &code, &sgrand).unwrap().result.codeword().unwrap();
        if (log_likelihood(got, &llrs) - best_ll).abs() > 1e-9 {
            ml_mismatch += 1;
        }
        let metrics: Vec<f64> = book
            .iter()
            .map(|&w| metric_eval_word(w, &llrs, Weighting::RankOverN).unwrap())
            .collect();
        let best = metrics.iter().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<Word> = book.iter().zip(&metrics).filter(|(_, &m)| m == best).map(|(&w, _)| w).collect();
        if winners.len() == 1 {
            tie_free += 1;
            let got = grand_decode(&llrs, &code, &orb).unwrap().result.codeword();
            if got != Some(winners[0]) {
                argmin_mismatch += 1;
            }
        }
    }
    outcome(
        stream_bad == 0 && ml_mismatch == 0 && argmin_mismatch == 0 && tie_free > 0,
        format!(
            "bad streams {stream_bad}/12; SGRAND vs ML mismatches {ml_mismatch}/500; ORBGRAND vs metric argmin mismatches {argmin_mismatch}/{tie_free} tie-free trials (n=12, k=6)"
        ),
    )
}

fn directional_bler() -> Outcome {
    let n = 128;
    let trials = 10_000;
    let ch = BitChannel::bpsk_awgn(6.0).unwrap();
    let i_orb = orbgrand_gmi(&ch, &cfg(700)).unwrap().rate;
    let plan = QueryPlan::new(Weighting::RankOverN, 1_000_000).unwrap();
    let k_lo = (0.85 * i_orb / LN_2 * n as f64).floor() as usize;
    let k_hi = (1.15 * i_orb / LN_2 * n as f64).ceil() as usize;
    let run = |k: usize, tag: u64| {
        let code = LinearCode::random(n, k, derive_seed(SEED, &[tag])).unwrap();
        simulate_bler(&code, &ch, &plan, trials, derive_seed(SEED, &[tag, 1])).unwrap()
    };
    let lo = run(k_lo, 701);
    let lo_ok = lo.bler < 1e-2;
    let mut detail = format!(
        "I_ORBGRAND = {i_orb:.5} nats; k = {k_lo} (rate {:.4} nats): BLER {:.4} ({} abandonments) vs < 0.01 {}",
        k_lo as f64 / n as f64 * LN_2,
        lo.bler,
        lo.abandonments,
        if lo_ok { "ok" } else { "missed" }
    );
    let hi_ok = if k_hi < n {
        let hi = run(k_hi, 702);
        detail += &format!("; k = {k_hi}: BLER {:.4} vs > 0.1", hi.bler);
        hi.bler > 0.1
    } else {
        let top = run(n - 1, 702);
        detail += &format!(
            "; 1.15 x I_ORBGRAND needs k = {k_hi} > n - 1 = {}, no binary code of that rate exists (BLER at k = {} for reference: {:.4})",
            n - 1,
            n - 1,
            top.bler
        );
        false
    };
    outcome(lo_ok && hi_ok, detail)
}

fn bicm_structure() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let qpsk = make_constellation(Scheme::Qpsk, Labeling::Gray);
    let mut worst_q: f64 = 0.0;
    for (i, snr) in [0.0, 3.0, 6.0].into_iter().enumerate() {
        let c = cfg(800 + i as u64);
        let q = bicm_rate(&qpsk, FadingModel::new(Fading::Awgn, snr).unwrap(), RateKind::Mi, &c).unwrap();
        let b = rate_report(&BitChannel::bpsk_awgn(snr).unwrap(), &c).unwrap();
        let dev = (q.total - 2.0 * b.i_mi).abs();
        let budget = q.error_budget() + 2.0 * b.error_budget();
        ok &= dev <= budget;
        worst_q = worst_q.max(dev / budget);
    }
    notes.push(format!("QPSK vs 2 x BPSK worst deviation/budget {worst_q:.3}"));

    let mut worst20: f64 = 0.0;
    let mut worst30: f64 = 0.0;
    for scheme in Scheme::ALL {
        let m = scheme.bits_per_symbol() as f64;
        let tol20 = if scheme == Scheme::Qam16 { 0.05 } else { 0.01 };
        for labeling in Labeling::ALL {
            let c = make_constellation(scheme, labeling);
            for (snr, tag) in [(20.0, 810), (30.0, 811)] {
                let reports = bicm_reports(&c, FadingModel::new(Fading::Awgn, snr).unwrap(), &cfg(tag)).unwrap();
                for total in [
                    reports.iter().map(|r| r.i_mi).sum::<f64>(),
                    reports.iter().map(|r| r.i_sgrand).sum::<f64>(),
                    reports.iter().map(|r| r.i_orbgrand).sum::<f64>(),
                ] {
                    let short = m * LN_2 - total;
                    if snr == 20.0 {
                        ok &= short <= tol20;
                        worst20 = worst20.max(short / tol20);
                    } else {
                        ok &= short.abs() <= 1e-6;
                        worst30 = worst30.max(short.abs());
                    }
                }
            }
        }
    }
    notes.push(format!("20 dB shortfall/tolerance {worst20:.3}, 30 dB max shortfall {worst30:.1e}"));

    let ordering_cfg = RateConfig::with_samples(200_000, derive_seed(SEED, &[820]));
    let mut violations = Vec::new();
    for fading in Fading::ALL {
        for scheme in Scheme::ALL {
            let gray = make_constellation(scheme, Labeling::Gray);
            let sp = make_constellation(scheme, Labeling::SetPartitioning);
            for snr in (6..=20).step_by(2).map(f64::from) {
                let model = FadingModel::new(fading, snr).unwrap();
                let g = bicm_rate(&gray, model, RateKind::Mi, &ordering_cfg).unwrap();
                let s = bicm_rate(&sp, model, RateKind::Mi, &ordering_cfg).unwrap();
                if s.total - g.total > g.error_budget() + s.error_budget() {
                    violations.push(format!("{scheme} {fading} {snr} dB"));
                }
            }
        }
    }
    ok &= violations.is_empty();
    notes.push(format!("Gray below SP at {} of 48 points {violations:?}", violations.len()));
    outcome(ok, notes.join("; "))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.csv"));
        let spec = SweepSpec {
            seed: SEED,
            samples: 20_000,
            psi_samples: 20_000,
            output: Some(path.clone()),
            ..SweepSpec::new(Scenario::BicmRayleighGray, vec![0.0, 5.0, 10.0])
        };
        run_sweep(&spec).unwrap();
        bytes.push(fs::read(&path).unwrap());
    }
    let same = bytes[0] == bytes[1];
    outcome(same, format!("two sweeps wrote {} and {} bytes, identical: {same}", bytes[0].len(), bytes[1].len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        (1, "sgrand_equals_mutual_information", sgrand_matches_mi),
        (2, "awgn_near_tightness", near_tightness),
        (3, "bsc_grid_oracle", bsc_oracle),
        (4, "metric_limits", metric_limits),
        (5, "reliability_uniformity", uniformity),
        (6, "decoder_equivalence", decoder_equivalence),
        (8, "bicm_structure", bicm_structure),
        (9, "sweep_reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        report(id, name, &o, start.elapsed().as_secs_f64());
        if !o.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn rate_decoder_direction() {
    let start = Instant::now();
    let o = directional_bler();
    report(7, "rate_decoder_direction", &o, start.elapsed().as_secs_f64());
    assert!(o.passed, "{}", o.detail);
}
