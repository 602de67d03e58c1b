//! Bit-interleaved coded modulation as a set of parallel bit channels.
//!
//! A constellation with `m` bits per label is split, under ideal
//! interleaving, into `m` binary-input channels. Level `i` (1-based, level 1
//! being the most significant label bit) sends `+1` as a point whose `i`-th
//! label bit is 1 and `-1` as a point whose `i`-th bit is 0.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llr_channel::{complex_normal, BitChannel, Polarity};
use crate::numeric::derive_seed;
use crate::rates::{
    error_budget, mutual_information_of, orbgrand_gmi_of, rate_report_of, sgrand_gmi_of, RateConfig,
    RateReport,
};
use crate::llr_channel::{psi_cdf, LlrEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Qpsk,
    Psk8,
    Qam16,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Qpsk, Scheme::Psk8, Scheme::Qam16];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Qpsk => 2,
            Scheme::Psk8 => 3,
            Scheme::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Qpsk => "qpsk",
            Scheme::Psk8 => "psk8",
            Scheme::Qam16 => "qam16",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    Gray,
    SetPartitioning,
}

impl Labeling {
    pub const ALL: [Labeling; 2] = [Labeling::Gray, Labeling::SetPartitioning];

    pub fn name(self) -> &'static str {
        match self {
            Labeling::Gray => "gray",
            Labeling::SetPartitioning => "sp",
        }
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    /// `H ≡ 1`
    Awgn,
    /// `H ~ CN(0, 1)`, known to the receiver.
    RayleighCsi,
}

impl Fading {
    pub const ALL: [Fading; 2] = [Fading::Awgn, Fading::RayleighCsi];

    pub fn name(self) -> &'static str {
        match self {
            Fading::Awgn => "awgn",
            Fading::RayleighCsi => "rayleigh",
        }
    }
}

impl fmt::Display for Fading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Y = H S + Z` with `E|S|^2 = 1` and `Z ~ CN(0, 10^(-snr/10))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    pub fading: Fading,
    pub snr_db: f64,
}

impl FadingModel {
    pub fn new(fading: Fading, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::invalid("snr_db", format!("must be finite, got {snr_db}")));
        }
        Ok(FadingModel { fading, snr_db })
    }

    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match self.fading {
            Fading::Awgn => Complex64::new(1.0, 0.0),
            Fading::RayleighCsi => complex_normal(rng, 1.0),
        }
    }
}

/// Unit-energy constellation points with their bit labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub scheme: Scheme,
    pub labeling: Labeling,
    pub points: Vec<Complex64>,
    /// `labels[j]` is the label of `points[j]`.
    pub labels: Vec<u32>,
    pub bits_per_symbol: usize,
}

impl Constellation {
    /// Bit `level` (1-based, MSB first) of `label`.
    pub fn label_bit(&self, label: u32, level: usize) -> bool {
        (label >> (self.bits_per_symbol - level)) & 1 == 1
    }

    /// Points whose label bit at `level` equals `bit`.
    pub fn subset(&self, level: usize, bit: bool) -> Vec<Complex64> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| self.label_bit(l, level) == bit)
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn point_of_label(&self, label: u32) -> Option<Complex64> {
        self.labels.iter().position(|&l| l == label).map(|j| self.points[j])
    }
}

fn reverse_bits(v: u32, width: usize) -> u32 {
    v.reverse_bits() >> (32 - width)
}

fn gray(v: u32) -> u32 {
    v ^ (v >> 1)
}

/// Builds one of the supported constellations with its pinned labeling.
pub fn make_constellation(scheme: Scheme, labeling: Labeling) -> Constellation {
    let (points, labels): (Vec<Complex64>, Vec<u32>) = match scheme {
        Scheme::Qpsk => {
            // Counter-clockwise from 45°.
            const GRAY: [u32; 4] = [0b00, 0b01, 0b11, 0b10];
            (0..4u32)
                .map(|k| {
                    let p = Complex64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0);
                    let label = match labeling {
                        Labeling::Gray => GRAY[k as usize],
                        Labeling::SetPartitioning => reverse_bits(k, 2),
                    };
                    (p, label)
                })
                .unzip()
        }
        Scheme::Psk8 => (0..8u32)
            .map(|k| {
                let p = Complex64::from_polar(1.0, k as f64 * PI / 4.0);
                let label = match labeling {
                    Labeling::Gray => gray(k),
                    Labeling::SetPartitioning => reverse_bits(k, 3),
                };
                (p, label)
            })
            .unzip(),
        Scheme::Qam16 => {
            let scale = 10f64.sqrt().recip();
            let mut pts = Vec::with_capacity(16);
            // Row-major from the top row (largest quadrature component).
            for q in (0..4u32).rev() {
                for i in 0..4u32 {
                    let p = Complex64::new((2.0 * i as f64 - 3.0) * scale, (2.0 * q as f64 - 3.0) * scale);
                    let label = match labeling {
                        Labeling::Gray => gray(i) << 2 | gray(q),
                        Labeling::SetPartitioning => {
                            let checker = (i + q) & 1;
                            let sub = i & 1;
                            let row = u32::from(q < 2);
                            let col = u32::from(i >= 2);
                            checker << 3 | sub << 2 | row << 1 | col
                        }
                    };
                    pts.push((p, label));
                }
            }
            pts.into_iter().unzip()
        }
    };
    // QPSK points sit exactly at (±1 ± j)/√2.
    let points = if scheme == Scheme::Qpsk {
        points
            .into_iter()
            .map(|p: Complex64| Complex64::new(p.re.signum() * FRAC_1_SQRT_2, p.im.signum() * FRAC_1_SQRT_2))
            .collect()
    } else {
        points
    };
    Constellation {
        scheme,
        labeling,
        points,
        labels,
        bits_per_symbol: scheme.bits_per_symbol(),
    }
}

/// One label position of a constellation seen as a binary-input channel.
#[derive(Debug, Clone)]
pub struct BicmBitChannel {
    pub constellation: Arc<Constellation>,
    pub level: usize,
    pub model: FadingModel,
    ones: Vec<Complex64>,
    zeros: Vec<Complex64>,
    noise_var: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl BicmBitChannel {
    /// `ln Σ_{s∈X₁} e^{-|y-hs|²/σ²} - ln Σ_{s∈X₀} e^{-|y-hs|²/σ²}`
    pub fn llr(&self, y: Complex64, h: Complex64) -> f64 {
        let metric = |s: &Complex64| -(y - h * s).norm_sqr() / self.noise_var;
        log_sum_exp(self.ones.iter().map(metric)) - log_sum_exp(self.zeros.iter().map(metric))
    }

    pub fn sample_llr<R: Rng + ?Sized>(&self, x: Polarity, rng: &mut R) -> f64 {
        let subset = match x {
            Polarity::Plus => &self.ones,
            Polarity::Minus => &self.zeros,
        };
        let s = subset[rng.random_range(0..subset.len())];
        let h = self.model.draw_gain(rng);
        let z = complex_normal(rng, self.noise_var);
        self.llr(h * s + z, h)
    }
}

/// The bit channel of label position `level` (1-based).
pub fn bit_channel(c: &Constellation, level: usize, model: FadingModel) -> Result<BitChannel> {
    if level == 0 || level > c.bits_per_symbol {
        return Err(Error::invalid(
            "level",
            format!("must lie in 1..={}, got {level}", c.bits_per_symbol),
        ));
    }
    Ok(BitChannel::Bicm(BicmBitChannel {
        constellation: Arc::new(c.clone()),
        level,
        model,
        ones: c.subset(level, true),
        zeros: c.subset(level, false),
        noise_var: model.noise_var(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Orbgrand,
    Sgrand,
    Mi,
}

/// Rate of one BICM level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRate {
    pub level: usize,
    pub rate: f64,
    pub std_error: f64,
    pub integration_abs_err: f64,
    pub theta_star: Option<f64>,
    pub bracket_edge: bool,
}

/// Sum rate over all levels with the per-level breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicmRate {
    pub total: f64,
    pub levels: Vec<LevelRate>,
    pub bracket_edge: bool,
}

impl BicmRate {
    /// Sum of the per-level error budgets.
    pub fn error_budget(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| error_budget(l.std_error, l.integration_abs_err))
            .sum()
    }

    pub fn std_error(&self) -> f64 {
        self.levels.iter().map(|l| l.std_error.powi(2)).sum::<f64>().sqrt()
    }
}

/// Per-level configuration: each level gets its own seed stream.
pub fn level_config(cfg: &RateConfig, level: usize) -> RateConfig {
    RateConfig {
        seed: derive_seed(cfg.seed, &[level as u64]),
        ..*cfg
    }
}

/// Sum over levels of the requested rate.
pub fn bicm_rate(c: &Constellation, model: FadingModel, which: RateKind, cfg: &RateConfig) -> Result<BicmRate> {
    cfg.validate()?;
    let mut levels = Vec::with_capacity(c.bits_per_symbol);
    for level in 1..=c.bits_per_symbol {
        let ch = bit_channel(c, level, model)?;
        let lcfg = level_config(cfg, level);
        let ens = LlrEnsemble::draw(&ch, lcfg.samples, lcfg.main_seed())?;
        let lr = match which {
            RateKind::Mi => {
                let mi = mutual_information_of(&ens);
                LevelRate {
                    level,
                    rate: mi.value.clamp(0.0, std::f64::consts::LN_2),
                    std_error: mi.std_error,
                    integration_abs_err: 0.0,
                    theta_star: None,
                    bracket_edge: false,
                }
            }
            RateKind::Sgrand | RateKind::Orbgrand => {
                let g = if which == RateKind::Sgrand {
                    sgrand_gmi_of(&ens, &lcfg)?
                } else {
                    let psi = psi_cdf(&ch, lcfg.psi_samples, lcfg.psi_seed())?;
                    orbgrand_gmi_of(&ens, &psi, &lcfg)?
                };
                LevelRate {
                    level,
                    rate: g.rate,
                    std_error: g.std_error,
                    integration_abs_err: g.integration_abs_err,
                    theta_star: Some(g.theta_star),
                    bracket_edge: g.bracket_edge,
                }
            }
        };
        levels.push(lr);
    }
    Ok(BicmRate {
        total: levels.iter().map(|l| l.rate).sum(),
        bracket_edge: levels.iter().any(|l| l.bracket_edge),
        levels,
    })
}

/// Full rate reports for every level, each on a shared per-level sample set.
pub fn bicm_reports(c: &Constellation, model: FadingModel, cfg: &RateConfig) -> Result<Vec<RateReport>> {
    cfg.validate()?;
    (1..=c.bits_per_symbol)
        .map(|level| {
            let ch = bit_channel(c, level, model)?;
            let lcfg = level_config(cfg, level);
            let psi = psi_cdf(&ch, lcfg.psi_samples, lcfg.psi_seed())?;
            let ens = LlrEnsemble::draw(&ch, lcfg.samples, lcfg.main_seed())?;
            let name = format!(
                "bicm/{}/{}/{}/level{}",
                c.scheme, c.labeling, model.fading, level
            );
            rate_report_of(&name, &ens, &psi, &lcfg)
        })
        .collect()
}
