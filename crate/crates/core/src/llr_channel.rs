//! Binary-input bit channels described through their log-likelihood ratio.
//!
//! Every channel in this crate, whether a BPSK link, a binary symmetric
//! channel or one label position of a BICM constellation, is consumed only
//! through draws of `T = ln q+(Y)/q-(Y)` under a chosen input polarity. The
//! rate formulas are all conditional expectations of functions of `T`, so this
//! is the single interface the rest of the crate needs.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bicm::BicmBitChannel;
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, normal_cdf, par_draws, par_moments};
use crate::stats::Estimate;

/// Smallest sample count accepted for an empirical reliability cdf.
pub const MIN_EMPIRICAL_SAMPLES: usize = 10_000;

/// Antipodal channel input. Bit `1` is sent as `+1`, bit `0` as `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Plus,
    Minus,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Plus => 1.0,
            Polarity::Minus => -1.0,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Polarity::Plus
        } else {
            Polarity::Minus
        }
    }

    pub fn bit(self) -> bool {
        self == Polarity::Plus
    }

    /// Hard decision on an LLR with `sgn(0) = +1`.
    pub fn hard_decision(t: f64) -> Self {
        if t >= 0.0 {
            Polarity::Plus
        } else {
            Polarity::Minus
        }
    }

    /// True when the hard decision on `t` disagrees with this input.
    #[inline]
    pub fn disagrees_with(self, t: f64) -> bool {
        match self {
            Polarity::Plus => t < 0.0,
            Polarity::Minus => t >= 0.0,
        }
    }
}

/// BPSK over real AWGN: `y = x + n`, `n ~ N(0, sigma^2)`, `sigma^2 = 10^(-snr/10)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpskAwgn {
    pub snr_db: f64,
    pub noise_var: f64,
}

impl BpskAwgn {
    pub fn llr(&self, y: f64) -> f64 {
        2.0 * y / self.noise_var
    }

    /// Mean of `T` given `X = +1`.
    pub fn llr_mean(&self) -> f64 {
        2.0 / self.noise_var
    }

    /// Standard deviation of `T` under either input.
    pub fn llr_std(&self) -> f64 {
        2.0 / self.noise_var.sqrt()
    }
}

/// Binary symmetric channel with crossover probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bsc {
    pub p: f64,
    /// `ln((1-p)/p)`
    pub llr_magnitude: f64,
}

impl Bsc {
    /// LLR of a received antipodal symbol.
    pub fn llr(&self, received: Polarity) -> f64 {
        received.sign() * self.llr_magnitude
    }
}

/// BPSK over flat Rayleigh fading with perfect CSI at the receiver.
///
/// `y = h x + z` with `h ~ CN(0, 1)` and `z ~ CN(0, 2 sigma^2)`, where
/// `sigma^2 = 10^(-snr/10)` is the noise variance in the real dimension that
/// carries the signal. With `|h| = 1` the LLR law coincides with [`BpskAwgn`]
/// at the same SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpskRayleigh {
    pub snr_db: f64,
    /// Total variance `E|z|^2` of the complex noise.
    pub noise_var: f64,
}

impl BpskRayleigh {
    /// Matched-filter LLR `4 Re(conj(h) y) / E|z|^2`.
    pub fn llr(&self, y: Complex64, h: Complex64) -> f64 {
        4.0 * (h.conj() * y).re / self.noise_var
    }

    /// Decay rates `(alpha, beta)` of the asymmetric Laplace law of `T | X=+1`:
    /// density `c e^{alpha t}` for `t < 0` and `c e^{-beta t}` for `t >= 0`,
    /// with `alpha - beta = 1`.
    pub fn laplace_rates(&self) -> (f64, f64) {
        let s2 = 0.5 * self.noise_var;
        let beta = s2 / ((1.0 + 2.0 * s2).sqrt() + 1.0);
        (beta + 1.0, beta)
    }
}

/// A channel known only through stored LLR draws under each input.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalChannel {
    pub plus: Arc<[f64]>,
    pub minus: Arc<[f64]>,
}

/// The LLR of `inner` with its magnitude replaced by `psi(|T|)`. Not an LLR
/// of any physical channel; used to relate the SGRAND and ORBGRAND formulas.
#[derive(Debug, Clone)]
pub struct ReliabilityMapped {
    pub inner: Box<BitChannel>,
    pub psi: Arc<ReliabilityCdf>,
}

/// A received channel output together with any side information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelOutput {
    Real(f64),
    Hard(Polarity),
    /// Complex observation with the channel gain revealed to the receiver.
    Faded { y: Complex64, h: Complex64 },
}

/// A memoryless binary-input channel exposed through its LLR.
#[derive(Debug, Clone)]
pub enum BitChannel {
    BpskAwgn(BpskAwgn),
    Bsc(Bsc),
    BpskRayleigh(BpskRayleigh),
    Bicm(BicmBitChannel),
    Empirical(EmpiricalChannel),
    ReliabilityMapped(ReliabilityMapped),
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

fn check_snr(snr_db: f64) -> Result<()> {
    if snr_db.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("snr_db", format!("must be finite, got {snr_db}")))
    }
}

impl BitChannel {
    pub fn bpsk_awgn(snr_db: f64) -> Result<Self> {
        check_snr(snr_db)?;
        Ok(BitChannel::BpskAwgn(BpskAwgn {
            snr_db,
            noise_var: 10f64.powf(-snr_db / 10.0),
        }))
    }

    pub fn bsc(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::invalid(
                "p",
                format!("crossover probability must lie in (0, 0.5), got {p}"),
            ));
        }
        Ok(BitChannel::Bsc(Bsc {
            p,
            llr_magnitude: ((1.0 - p) / p).ln(),
        }))
    }

    pub fn bpsk_rayleigh(snr_db: f64) -> Result<Self> {
        check_snr(snr_db)?;
        Ok(BitChannel::BpskRayleigh(BpskRayleigh {
            snr_db,
            noise_var: 2.0 * 10f64.powf(-snr_db / 10.0),
        }))
    }

    pub fn empirical(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.is_empty() || minus.is_empty() {
            return Err(Error::invalid("samples", "empirical channel needs draws under both inputs"));
        }
        Ok(BitChannel::Empirical(EmpiricalChannel {
            plus: plus.into(),
            minus: minus.into(),
        }))
    }

    pub fn reliability_mapped(inner: BitChannel, psi: Arc<ReliabilityCdf>) -> Self {
        BitChannel::ReliabilityMapped(ReliabilityMapped {
            inner: Box::new(inner),
            psi,
        })
    }

    /// Short name used in reports.
    pub fn kind_name(&self) -> &'static str {
        match self {
            BitChannel::BpskAwgn(_) => "bpsk-awgn",
            BitChannel::Bsc(_) => "bsc",
            BitChannel::BpskRayleigh(_) => "bpsk-rayleigh",
            BitChannel::Bicm(_) => "bicm",
            BitChannel::Empirical(_) => "empirical",
            BitChannel::ReliabilityMapped(_) => "reliability-mapped",
        }
    }

    /// Draws one LLR value given input `x`.
    pub fn sample_llr<R: Rng + ?Sized>(&self, x: Polarity, rng: &mut R) -> f64 {
        match self {
            BitChannel::BpskAwgn(c) => {
                let n: f64 = rng.sample(StandardNormal);
                c.llr(x.sign() + c.noise_var.sqrt() * n)
            }
            BitChannel::Bsc(c) => {
                let flipped = rng.random::<f64>() < c.p;
                let received = if flipped {
                    Polarity::from_bit(!x.bit())
                } else {
                    x
                };
                c.llr(received)
            }
            BitChannel::BpskRayleigh(c) => {
                let h = complex_normal(rng, 1.0);
                let z = complex_normal(rng, c.noise_var);
                c.llr(h * x.sign() + z, h)
            }
            BitChannel::Bicm(c) => c.sample_llr(x, rng),
            BitChannel::Empirical(c) => {
                let pool = match x {
                    Polarity::Plus => &c.plus,
                    Polarity::Minus => &c.minus,
                };
                pool[rng.random_range(0..pool.len())]
            }
            BitChannel::ReliabilityMapped(c) => {
                let t = c.inner.sample_llr(x, rng);
                if t >= 0.0 {
                    c.psi.eval(t)
                } else {
                    -c.psi.eval(-t)
                }
            }
        }
    }

    /// Maps a raw output to its LLR, when the channel has a physical output.
    pub fn llr_of_output(&self, output: &ChannelOutput) -> Option<f64> {
        match (self, output) {
            (BitChannel::BpskAwgn(c), ChannelOutput::Real(y)) => Some(c.llr(*y)),
            (BitChannel::Bsc(c), ChannelOutput::Hard(r)) => Some(c.llr(*r)),
            (BitChannel::BpskRayleigh(c), ChannelOutput::Faded { y, h }) => Some(c.llr(*y, *h)),
            (BitChannel::Bicm(c), ChannelOutput::Faded { y, h }) => Some(c.llr(*y, *h)),
            _ => None,
        }
    }
}

/// Closed-form reliability cdfs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyticPsi {
    /// `|T|` with `T ~ N(mean, std^2)`.
    FoldedGaussian { mean: f64, std: f64 },
    /// `|T|` with `T` asymmetric Laplace (decay `alpha` on the left, `beta` on the right).
    AsymmetricLaplace { alpha: f64, beta: f64 },
    /// `|T|` almost surely equal to `at`.
    Point { at: f64 },
}

impl AnalyticPsi {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            AnalyticPsi::FoldedGaussian { mean, std } => {
                (normal_cdf((t - mean) / std) - normal_cdf((-t - mean) / std)).clamp(0.0, 1.0)
            }
            AnalyticPsi::AsymmetricLaplace { alpha, beta } => {
                let v = -(alpha * (-beta * t).exp_m1() + beta * (-alpha * t).exp_m1()) / (alpha + beta);
                v.clamp(0.0, 1.0)
            }
            AnalyticPsi::Point { at } => {
                if t >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// The cdf `Psi(t) = P(|T| <= t)` of the LLR magnitude under equiprobable inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum ReliabilityCdf {
    Analytic(AnalyticPsi),
    /// Right-continuous step cdf over sorted `|t|` draws.
    Empirical(Vec<f64>),
}

impl ReliabilityCdf {
    /// Builds the empirical form from arbitrary `|t|` draws.
    pub fn from_magnitudes(mut magnitudes: Vec<f64>) -> Self {
        magnitudes.sort_by(f64::total_cmp);
        ReliabilityCdf::Empirical(magnitudes)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ReliabilityCdf::Analytic(a) => a.eval(t),
            ReliabilityCdf::Empirical(sorted) => {
                let count = sorted.partition_point(|&s| s <= t);
                count as f64 / sorted.len() as f64
            }
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, ReliabilityCdf::Analytic(_))
    }
}

/// Closed-form reliability cdf of a channel, when one is known.
pub fn analytic_psi(ch: &BitChannel) -> Option<AnalyticPsi> {
    match ch {
        BitChannel::BpskAwgn(c) => Some(AnalyticPsi::FoldedGaussian {
            mean: c.llr_mean(),
            std: c.llr_std(),
        }),
        BitChannel::BpskRayleigh(c) => {
            let (alpha, beta) = c.laplace_rates();
            Some(AnalyticPsi::AsymmetricLaplace { alpha, beta })
        }
        BitChannel::Bsc(c) => Some(AnalyticPsi::Point {
            at: c.llr_magnitude,
        }),
        _ => None,
    }
}

/// Empirical reliability cdf from `n_samples` draws of `|T|` (half under each input).
pub fn empirical_psi(ch: &BitChannel, n_samples: usize, seed: u64) -> Result<ReliabilityCdf> {
    if n_samples < MIN_EMPIRICAL_SAMPLES {
        return Err(Error::invalid(
            "n_samples",
            format!("empirical cdf needs at least {MIN_EMPIRICAL_SAMPLES} draws, got {n_samples}"),
        ));
    }
    let (plus, minus) = draw_conditional(ch, n_samples, seed);
    let mags = plus.into_iter().chain(minus).map(f64::abs).collect();
    Ok(ReliabilityCdf::from_magnitudes(mags))
}

/// Reliability cdf of `ch`: analytic when a closed form is known, otherwise
/// empirical from `n_samples` draws seeded by `seed`.
pub fn psi_cdf(ch: &BitChannel, n_samples: usize, seed: u64) -> Result<ReliabilityCdf> {
    match analytic_psi(ch) {
        Some(a) => Ok(ReliabilityCdf::Analytic(a)),
        None => empirical_psi(ch, n_samples, seed),
    }
}

fn draw_conditional(ch: &BitChannel, n_samples: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let n_plus = n_samples.div_ceil(2);
    let n_minus = n_samples / 2;
    let plus = par_draws(n_plus, derive_seed(seed, &[1]), |rng, _| {
        ch.sample_llr(Polarity::Plus, rng)
    });
    let minus = par_draws(n_minus, derive_seed(seed, &[2]), |rng, _| {
        ch.sample_llr(Polarity::Minus, rng)
    });
    (plus, minus)
}

/// The joint law of `(X, T)` under equiprobable inputs, either as Monte Carlo
/// draws or, for channels with finitely many LLR values, as exact atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum LlrEnsemble {
    Sampled { plus: Vec<f64>, minus: Vec<f64> },
    /// `(t, probability)` atoms under each input.
    Exact {
        plus: Vec<(f64, f64)>,
        minus: Vec<(f64, f64)>,
    },
}

impl LlrEnsemble {
    /// Draws `n_samples` LLRs from `ch`, half under each input. Channels with a
    /// finite LLR alphabet return their exact law instead.
    pub fn draw(ch: &BitChannel, n_samples: usize, seed: u64) -> Result<Self> {
        if let BitChannel::Bsc(c) = ch {
            let l = c.llr_magnitude;
            return Ok(LlrEnsemble::Exact {
                plus: vec![(l, 1.0 - c.p), (-l, c.p)],
                minus: vec![(-l, 1.0 - c.p), (l, c.p)],
            });
        }
        if n_samples < 2 {
            return Err(Error::invalid("n_samples", "need at least one draw per input"));
        }
        let (plus, minus) = draw_conditional(ch, n_samples, seed);
        Ok(LlrEnsemble::Sampled { plus, minus })
    }

    /// Number of stored draws (or atoms).
    pub fn len(&self) -> usize {
        match self {
            LlrEnsemble::Sampled { plus, minus } => plus.len() + minus.len(),
            LlrEnsemble::Exact { plus, minus } => plus.len() + minus.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, LlrEnsemble::Exact { .. })
    }

    /// `E[f(T, X)]` with `X` uniform on `{+1, -1}`.
    pub fn expect<F>(&self, f: F) -> Estimate
    where
        F: Fn(f64, Polarity) -> f64 + Sync,
    {
        match self {
            LlrEnsemble::Sampled { plus, minus } => {
                let (sp, qp) = par_moments(plus, |t| f(t, Polarity::Plus));
                let (sm, qm) = par_moments(minus, |t| f(t, Polarity::Minus));
                let ep = Estimate::from_moments(sp, qp, plus.len());
                let em = Estimate::from_moments(sm, qm, minus.len());
                Estimate {
                    value: 0.5 * (ep.value + em.value),
                    std_error: 0.5 * ep.std_error.hypot(em.std_error),
                }
            }
            LlrEnsemble::Exact { plus, minus } => {
                let ep: f64 = plus.iter().map(|&(t, w)| w * f(t, Polarity::Plus)).sum();
                let em: f64 = minus.iter().map(|&(t, w)| w * f(t, Polarity::Minus)).sum();
                Estimate::exact(0.5 * (ep + em))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn awgn_llr_symmetry() {
        let BitChannel::BpskAwgn(c) = BitChannel::bpsk_awgn(3.0).unwrap() else {
            unreachable!()
        };
        assert_eq!(c.llr(0.0), 0.0);
        for y in [0.1, 0.7, 2.5, -1.3] {
            assert_eq!(c.llr(-y), -c.llr(y));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BitChannel::bsc(0.0).is_err());
        assert!(BitChannel::bsc(0.5).is_err());
        assert!(BitChannel::bsc(0.7).is_err());
        assert!(BitChannel::bsc(f64::NAN).is_err());
        assert!(BitChannel::bpsk_awgn(f64::INFINITY).is_err());
        assert!(BitChannel::bpsk_rayleigh(f64::NAN).is_err());
    }

    #[test]
    fn bsc_llr_values() {
        let ch = BitChannel::bsc(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut wrong = 0;
        for _ in 0..n {
            let t = ch.sample_llr(Polarity::Plus, &mut rng);
            assert!((t.abs() - 9f64.ln()).abs() < 1e-15);
            if t < 0.0 {
                wrong += 1;
            }
        }
        let rate = wrong as f64 / n as f64;
        assert!((rate - 0.1).abs() < 4.0 * (0.09f64 / n as f64).sqrt());
    }

    #[test]
    fn bsc_llr_vanishes_near_half() {
        let BitChannel::Bsc(c) = BitChannel::bsc(0.5 - 1e-9).unwrap() else {
            unreachable!()
        };
        assert!(c.llr_magnitude < 1e-8);
    }

    #[test]
    fn rayleigh_without_gain_carries_no_information() {
        let BitChannel::BpskRayleigh(c) = BitChannel::bpsk_rayleigh(3.0).unwrap() else {
            unreachable!()
        };
        let t = c.llr(Complex64::new(0.8, -2.0), Complex64::new(0.0, 0.0));
        assert_eq!(t, 0.0);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let ch = BitChannel::bpsk_rayleigh(1.0).unwrap();
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..100).map(|_| ch.sample_llr(Polarity::Minus, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..100).map(|_| ch.sample_llr(Polarity::Minus, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn psi_forms() {
        let awgn = psi_cdf(&BitChannel::bpsk_awgn(3.0).unwrap(), 0, 0).unwrap();
        assert!(awgn.is_analytic());
        assert_eq!(awgn.eval(0.0), 0.0);
        assert!(awgn.eval(1e3) > 1.0 - 1e-12);

        let l = 9f64.ln();
        let bsc = psi_cdf(&BitChannel::bsc(0.1).unwrap(), 0, 0).unwrap();
        assert_eq!(bsc.eval(l - 1e-9), 0.0);
        assert_eq!(bsc.eval(l), 1.0);
        assert_eq!(bsc.eval(l + 1.0), 1.0);
    }

    #[test]
    fn empirical_psi_is_right_continuous_step() {
        let psi = ReliabilityCdf::from_magnitudes(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(psi.eval(0.5), 0.0);
        assert_eq!(psi.eval(1.0), 0.25);
        assert_eq!(psi.eval(1.999), 0.25);
        assert_eq!(psi.eval(2.0), 0.75);
        assert_eq!(psi.eval(10.0), 1.0);
    }

    #[test]
    fn empirical_psi_needs_enough_draws() {
        let ch = BitChannel::bpsk_awgn(0.0).unwrap();
        assert!(empirical_psi(&ch, 9_999, 1).is_err());
        assert!(empirical_psi(&ch, 10_000, 1).is_ok());
    }

    #[test]
    fn rayleigh_laplace_rates_satisfy_consistency() {
        for snr in [-5.0, 0.0, 3.0, 10.0, 30.0] {
            let BitChannel::BpskRayleigh(c) = BitChannel::bpsk_rayleigh(snr).unwrap() else {
                unreachable!()
            };
            let (alpha, beta) = c.laplace_rates();
            assert!((alpha - beta - 1.0).abs() < 1e-12);
            assert!(beta > 0.0);
        }
    }

    #[test]
    fn exact_ensemble_for_bsc() {
        let e = LlrEnsemble::draw(&BitChannel::bsc(0.2).unwrap(), 0, 0).unwrap();
        assert!(e.is_exact());
        let wrong = e.expect(|t, x| if x.disagrees_with(t) { 1.0 } else { 0.0 });
        assert!((wrong.value - 0.2).abs() < 1e-15);
        assert_eq!(wrong.std_error, 0.0);
    }

    #[test]
    fn hard_decision_convention() {
        assert_eq!(Polarity::hard_decision(0.0), Polarity::Plus);
        assert!(Polarity::Minus.disagrees_with(0.0));
        assert!(!Polarity::Plus.disagrees_with(0.0));
    }
}
