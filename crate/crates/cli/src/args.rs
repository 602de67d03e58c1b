use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grandrate::bicm::{Fading, Labeling, Scheme};
use grandrate::grand::Weighting;
use grandrate::rates::{DEFAULT_SAMPLES, DEFAULT_SEED};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "grandrate", version, about = "Achievable rates and simulation of GRAND-family decoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ORBGRAND, SGRAND and mutual-information rates of one channel, as JSON.
    Rate(RateArgs),
    /// Reliability cdf of a channel on a grid of t.
    Psi(PsiArgs),
    /// Decode one noisy codeword (or given LLRs) of a random linear code.
    Decode(DecodeArgs),
    /// Block error rate of a random linear code.
    Bler(BlerArgs),
    /// Run a sweep described by a JSON file and write CSV.
    Sweep(SweepArgs),
    /// Points and labels of a constellation.
    ConstellationDump(ConstellationArgs),
    /// Run the built-in validation suites.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    BpskAwgn,
    BpskRayleigh,
    Bsc,
    Bicm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Qpsk,
    Psk8,
    Qam16,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Qpsk => Scheme::Qpsk,
            SchemeArg::Psk8 => Scheme::Psk8,
            SchemeArg::Qam16 => Scheme::Qam16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelingArg {
    Gray,
    Sp,
}

impl From<LabelingArg> for Labeling {
    fn from(l: LabelingArg) -> Self {
        match l {
            LabelingArg::Gray => Labeling::Gray,
            LabelingArg::Sp => Labeling::SetPartitioning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingArg {
    Awgn,
    Rayleigh,
}

impl From<FadingArg> for Fading {
    fn from(f: FadingArg) -> Self {
        match f {
            FadingArg::Awgn => Fading::Awgn,
            FadingArg::Rayleigh => Fading::RayleighCsi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Unit,
    AbsLlr,
    RankOverN,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Unit => Weighting::Unit,
            WeightingArg::AbsLlr => Weighting::AbsLlr,
            WeightingArg::RankOverN => Weighting::RankOverN,
        }
    }
}

/// Channel selection shared by the commands that need one.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChannelArgs {
    #[arg(long, value_enum)]
    pub channel: ChannelKind,
    /// Es/N0 in dB (all channels except bsc).
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Crossover probability of the bsc, in (0, 0.5).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value = "qpsk")]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "gray")]
    pub labeling: LabelingArg,
    #[arg(long, value_enum, default_value = "awgn")]
    pub fading: FadingArg,
    /// BICM bit level, 1 = most significant; all levels when omitted.
    #[arg(long)]
    pub level: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Draws for an empirical reliability cdf; defaults to --samples.
    #[arg(long)]
    pub psi_samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "nats")]
    pub units: Units,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PsiArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 12.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub t_step: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CodeArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long, default_value_t = 1, value_parser = parse_u64)]
    pub code_seed: u64,
    #[arg(long, value_enum, default_value = "rank-over-n")]
    pub weighting: WeightingArg,
    #[arg(long, default_value_t = grandrate::grand::DEFAULT_MAX_QUERIES)]
    pub max_queries: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Bit channel for the noise; bsc, bpsk-awgn or bpsk-rayleigh.
    #[arg(long, value_enum, default_value = "bpsk-awgn")]
    pub channel: ChannelKind,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub snr: f64,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated LLRs to decode instead of a random noisy codeword.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub llrs: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BlerArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long, value_enum, default_value = "bpsk-awgn")]
    pub channel: ChannelKind,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub snr: f64,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// JSON sweep description.
    #[arg(long)]
    pub spec: PathBuf,
    /// CSV destination; overrides the file's `output`. Stdout when neither is set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot `.dat` file next to the CSV.
    #[arg(long)]
    pub gnuplot: bool,
    /// Overrides the seed in the spec file.
    #[arg(long, value_parser = parse_u64)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConstellationArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "gray")]
    pub labeling: LabelingArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Accepts decimal or `0x`-prefixed hexadecimal.
fn parse_u64(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("`{s}` is not a 64-bit unsigned integer: {e}"))
}
