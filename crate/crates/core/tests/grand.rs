//! Codes, pattern streams and decoders against exhaustive oracles.

use std::collections::HashSet;

use grandrate::grand::{
    grand_decode, hard_decision, metric_eval, metric_eval_word, noisy_codeword, rank_reliabilities,
    simulate_metric_statistics, DecodeResult, HammingPatterns, LinearCode, OrbPatterns, QueryPlan,
    SoftPatterns, Weighting, Word,
};
use grandrate::llr_channel::BitChannel;
use grandrate::numeric::derive_seed;
use grandrate::rates::logistic_integral;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: u128, b: u128) -> bool {
    (a & b).count_ones() % 2 == 1
}

fn random_llrs(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()
}

/// Log-likelihood of `word` up to a constant: `Σ x_n t_n / 2` with `x = ±1`.
fn log_likelihood(word: Word, llrs: &[f64]) -> f64 {
    llrs.iter()
        .enumerate()
        .map(|(j, &t)| if word.bit(j) { t / 2.0 } else { -t / 2.0 })
        .sum()
}

#[test]
fn degenerate_dimensions_are_rejected() {
    assert!(LinearCode::random(4, 4, 0).is_err());
    assert!(LinearCode::random(4, 0, 0).is_err());
    assert!(LinearCode::random(129, 64, 0).is_err());
}

#[test]
fn generator_is_orthogonal_to_parity_check() {
    for (n, k, seed) in [(8, 4, 1), (16, 9, 2), (64, 32, 3), (128, 99, 4)] {
        let code = LinearCode::random(n, k, seed).unwrap();
        for &g in code.generator_rows() {
            for &h in code.parity_check_rows() {
                assert!(!dot(g, h));
            }
        }
        assert_eq!(code.parity_check_rank(), n - k);
    }
}

#[test]
fn syndrome_check_separates_codewords_exhaustively() {
    for (n, k, seed) in [(8, 4, 1), (12, 6, 7), (16, 8, 11)] {
        let code = LinearCode::random(n, k, seed).unwrap();
        let mut book = HashSet::new();
        for m in 0..(1u128 << k) {
            let mut w = 0u128;
            for (i, &g) in code.generator_rows().iter().enumerate() {
                if m >> i & 1 == 1 {
                    w ^= g;
                }
            }
            assert_eq!(code.encode(m).0, w);
            book.insert(w);
        }
        assert_eq!(book.len(), 1 << k);
        let accepted = (0..(1u128 << n)).filter(|&w| code.is_codeword(Word(w))).count();
        assert_eq!(accepted, 1 << k);
        for w in 0..(1u128 << n) {
            assert_eq!(code.is_codeword(Word(w)), book.contains(&w));
        }
    }
}

#[test]
fn rank_examples() {
    assert_eq!(rank_reliabilities(&[0.5, 0.1, 0.9]), vec![2, 1, 3]);
    assert_eq!(rank_reliabilities(&[0.7, 0.7, 0.7]), vec![1, 2, 3]);
}

#[test]
fn orbgrand_identity_example() {
    let got: Vec<Vec<usize>> = OrbPatterns::new(&[1, 2, 3])
        .unwrap()
        .map(|p| p.positions().iter().map(|j| j + 1).collect())
        .collect();
    let want: Vec<Vec<usize>> = vec![
        vec![],
        vec![1],
        vec![2],
        vec![3],
        vec![1, 2],
        vec![1, 3],
        vec![2, 3],
        vec![1, 2, 3],
    ];
    assert_eq!(got, want);
}

fn rank_sum(mask: u128, ranks: &[usize]) -> usize {
    (0..ranks.len()).filter(|&j| mask >> j & 1 == 1).map(|j| ranks[j]).sum()
}

#[test]
fn orbgrand_stream_is_sorted_power_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 1..=12usize {
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(&mut rng);
        let masks: Vec<u128> = OrbPatterns::new(&ranks).unwrap().map(|p| p.mask).collect();
        assert_eq!(masks.len(), 1 << n);
        assert_eq!(masks[0], 0);
        let distinct: HashSet<u128> = masks.iter().copied().collect();
        assert_eq!(distinct.len(), 1 << n);
        let sums: Vec<usize> = masks.iter().map(|&m| rank_sum(m, &ranks)).collect();
        assert!(sums.windows(2).all(|w| w[0] <= w[1]), "n={n}");
    }
}

#[test]
fn sgrand_stream_follows_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=12usize {
        let llrs = random_llrs(n, &mut rng);
        let cost = |m: u128| -> f64 { (0..n).filter(|&j| m >> j & 1 == 1).map(|j| llrs[j].abs()).sum() };
        let masks: Vec<u128> = SoftPatterns::new(&llrs).unwrap().map(|p| p.mask).collect();
        assert_eq!(masks.len(), 1 << n);
        assert_eq!(masks.iter().copied().collect::<HashSet<_>>().len(), 1 << n);
        let mut sorted: Vec<f64> = (0..(1u128 << n)).map(cost).collect();
        sorted.sort_by(f64::total_cmp);
        for (i, &m) in masks.iter().enumerate() {
            assert!((cost(m) - sorted[i]).abs() < 1e-9, "n={n} i={i}");
        }
    }
}

#[test]
fn hamming_stream_is_weight_ordered() {
    let masks: Vec<u128> = HammingPatterns::new(10).unwrap().map(|p| p.mask).collect();
    assert_eq!(masks.len(), 1024);
    assert!(masks.windows(2).all(|w| w[0].count_ones() <= w[1].count_ones()));
}

#[test]
fn clean_input_decodes_in_one_query() {
    let code = LinearCode::random(64, 32, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for w in Weighting::ALL {
        let sent = code.encode(rng.random::<u128>() & 0xffff_ffff);
        let llrs: Vec<f64> = (0..64)
            .map(|j| {
                let mag = rng.random_range(0.01..9.0);
                if sent.bit(j) { mag } else { -mag }
            })
            .collect();
        let out = grand_decode(&llrs, &code, &QueryPlan::new(w, 10).unwrap()).unwrap();
        assert_eq!(out.result, DecodeResult::Codeword { word: sent, queries_used: 1 });
        assert_eq!(out.metric_value, Some(0.0));
    }
}

#[test]
fn decoder_rejects_bad_inputs() {
    let code = LinearCode::random(16, 8, 1).unwrap();
    let plan = QueryPlan::new(Weighting::RankOverN, 8).unwrap();
    assert!(grand_decode(&[0.5; 15], &code, &plan).is_err());
    assert!(QueryPlan::new(Weighting::Unit, 0).is_err());
}

#[test]
fn sgrand_equals_maximum_likelihood() {
    let code = LinearCode::random(12, 6, 31).unwrap();
    let ch = BitChannel::bpsk_awgn(1.0).unwrap();
    let plan = QueryPlan::new(Weighting::AbsLlr, 1 << 12).unwrap();
    let book: Vec<Word> = code.codewords().collect();
    for trial in 0..500 {
        let (_, llrs) = noisy_codeword(&code, &ch, derive_seed(32, &[trial]));
        let ml = *book
            .iter()
            .max_by(|a, b| log_likelihood(**a, &llrs).total_cmp(&log_likelihood(**b, &llrs)))
            .unwrap();
        let got = grand_decode(&llrs, &code, &plan).unwrap().result.codeword().unwrap();
        let gap = log_likelihood(ml, &llrs) - log_likelihood(got, &llrs);
        assert!(gap.abs() < 1e-9, "trial {trial}: gap {gap}");
    }
}

#[test]
fn orbgrand_returns_metric_argmin() {
    let code = LinearCode::random(16, 8, 41).unwrap();
    let ch = BitChannel::bpsk_awgn(6.0).unwrap();
    let plan = QueryPlan::new(Weighting::RankOverN, 1 << 16).unwrap();
    let book: Vec<Word> = code.codewords().collect();
    let mut tie_free = 0;
    for trial in 0..200 {
        let (_, llrs) = noisy_codeword(&code, &ch, derive_seed(42, &[trial]));
        let metrics: Vec<f64> = book
            .iter()
            .map(|&w| metric_eval_word(w, &llrs, Weighting::RankOverN).unwrap())
            .collect();
        let best = metrics.iter().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<Word> = book
            .iter()
            .zip(&metrics)
            .filter(|&(_, &m)| m == best)
            .map(|(&w, _)| w)
            .collect();
        let out = grand_decode(&llrs, &code, &plan).unwrap();
        let got = out.result.codeword().unwrap();
        assert_eq!(out.metric_value, Some(best), "trial {trial}");
        if winners.len() == 1 {
            tie_free += 1;
            assert_eq!(got, winners[0], "trial {trial}");
        } else {
            assert!(winners.contains(&got));
        }
    }
    assert!(tie_free > 100, "{tie_free}");
}

#[test]
fn raising_the_query_budget_only_resolves_abandonments() {
    let code = LinearCode::random(32, 20, 51).unwrap();
    let ch = BitChannel::bpsk_awgn(2.0).unwrap();
    for w in Weighting::ALL {
        let mut converted = 0;
        for trial in 0..60 {
            let (_, llrs) = noisy_codeword(&code, &ch, derive_seed(52, &[trial]));
            let small = grand_decode(&llrs, &code, &QueryPlan::new(w, 16).unwrap()).unwrap();
            let large = grand_decode(&llrs, &code, &QueryPlan::new(w, 1 << 14).unwrap()).unwrap();
            assert!(small.result.queries_used() <= 16);
            match small.result {
                DecodeResult::Codeword { .. } => assert_eq!(small, large),
                DecodeResult::Abandoned { queries_used } => {
                    assert_eq!(queries_used, 16);
                    if large.result.codeword().is_some() {
                        converted += 1;
                    }
                }
            }
        }
        assert!(converted > 0, "{}", w.name());
    }
}

#[test]
fn orbgrand_all_disagree_metric() {
    for n in [1usize, 7, 64] {
        let llrs: Vec<f64> = (0..n).map(|j| 0.1 + j as f64 * 0.37 * if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let flipped: Vec<bool> = hard_decision(&llrs).to_bits(n).iter().map(|b| !b).collect();
        let got = metric_eval(&flipped, &llrs, Weighting::RankOverN).unwrap();
        let want = (n as f64 + 1.0) / (2.0 * n as f64);
        assert!((got - want).abs() < 1e-14);
    }
}

#[test]
fn equal_rank_sums_give_equal_metrics() {
    for n in 3..=40usize {
        let llrs: Vec<f64> = (0..n).map(|j| 0.05 * (j + 1) as f64).collect();
        let hard = hard_decision(&llrs).to_bits(n);
        let flip = |positions: &[usize]| -> Vec<bool> {
            let mut c = hard.clone();
            for &j in positions {
                c[j] = !c[j];
            }
            c
        };
        let a = metric_eval(&flip(&[2]), &llrs, Weighting::RankOverN).unwrap();
        let b = metric_eval(&flip(&[0, 1]), &llrs, Weighting::RankOverN).unwrap();
        assert_eq!(a, b, "n={n}");
    }
}

#[test]
fn metric_statistics_follow_the_log_mgf_limit() {
    let ch = BitChannel::bpsk_awgn(3.0).unwrap();
    let s = simulate_metric_statistics(&ch, 2048, 40, &[-5.0], 3).unwrap();
    let limit = logistic_integral(-5.0).unwrap() - std::f64::consts::LN_2;
    assert!((s.delta_mean(0) - limit).abs() < 2e-3, "{} vs {limit}", s.delta_mean(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_agree_with_naive_sort(xs in prop::collection::vec(0.0f64..10.0, 1..60)) {
        let ranks = rank_reliabilities(&xs);
        let mut seen = ranks.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (1..=xs.len()).collect::<Vec<_>>());
        for i in 0..xs.len() {
            let naive = 1 + (0..xs.len()).filter(|&j| xs[j] < xs[i] || (xs[j] == xs[i] && j < i)).count();
            prop_assert_eq!(ranks[i], naive);
        }
    }

    #[test]
    fn unit_metric_is_hamming_distance(
        llrs in prop::collection::vec(-5.0f64..5.0, 1..100),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cand: Vec<bool> = (0..llrs.len()).map(|_| rng.random()).collect();
        let hard = hard_decision(&llrs).to_bits(llrs.len());
        let dist = cand.iter().zip(&hard).filter(|(a, b)| a != b).count();
        let m = metric_eval(&cand, &llrs, Weighting::Unit).unwrap();
        prop_assert!((m * llrs.len() as f64 - dist as f64).abs() < 1e-9);
        prop_assert_eq!(metric_eval(&hard, &llrs, Weighting::RankOverN).unwrap(), 0.0);
    }

    #[test]
    fn orbgrand_stream_n10_is_a_bijection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ranks: Vec<usize> = (1..=10).collect();
        ranks.shuffle(&mut rng);
        let masks: Vec<u128> = OrbPatterns::new(&ranks).unwrap().map(|p| p.mask).collect();
        prop_assert_eq!(masks.len(), 1024);
        prop_assert_eq!(masks.iter().copied().collect::<HashSet<_>>().len(), 1024);
        prop_assert!(masks.windows(2).all(|w| rank_sum(w[0], &ranks) <= rank_sum(w[1], &ranks)));
    }
}
