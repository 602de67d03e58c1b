use std::f64::consts::LN_2;
use std::fmt;
use std::io::Write;
use std::path::Path;

use grandrate::bicm::{bit_channel, level_config, make_constellation, FadingModel, Scheme};
use grandrate::experiments::{
    config_digest, csv_text, run_sweep, validate_all, write_atomic, SweepSpec, ValidationConfig,
};
use grandrate::grand::{
    grand_decode, hard_decision, noisy_codeword, simulate_bler, BlerReport, DecodeResult, LinearCode,
    QueryPlan, Weighting, Word,
};
use grandrate::llr_channel::{psi_cdf, BitChannel};
use grandrate::rates::{error_budget, rate_report, RateConfig, RateReport};
use serde::{Deserialize, Serialize};

use crate::args::{
    BlerArgs, ChannelArgs, ChannelKind, Command, ConstellationArgs, DecodeArgs, PsiArgs, RateArgs,
    SweepArgs, Units, ValidateArgs,
};

pub enum Status {
    Clean,
    Flagged(String),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(grandrate::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl From<grandrate::Error> for CliError {
    fn from(e: grandrate::Error) -> Self {
        CliError::Library(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(command: Command) -> CliResult<Status> {
    match command {
        Command::Rate(a) => rate(&a),
        Command::Psi(a) => psi(&a),
        Command::Decode(a) => decode(&a),
        Command::Bler(a) => bler(&a),
        Command::Sweep(a) => sweep(&a),
        Command::ConstellationDump(a) => constellation_dump(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            let written = out
                .write_all(text.as_bytes())
                .and_then(|()| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .and_then(|()| out.flush());
            match written {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(grandrate::Error::Io {
                        path: "<stdout>".into(),
                        source: e,
                    }
                    .into())
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(grandrate::Error::from)?;
    emit(&text, output)
}

fn require_snr(snr: Option<f64>, kind: &str) -> CliResult<f64> {
    snr.ok_or_else(|| usage(format!("--snr is required for --channel {kind}")))
}

fn scalar_channel(kind: ChannelKind, snr: Option<f64>, p: Option<f64>) -> CliResult<(String, BitChannel)> {
    Ok(match kind {
        ChannelKind::BpskAwgn => {
            let snr = require_snr(snr, "bpsk-awgn")?;
            (format!("bpsk-awgn {snr} dB"), BitChannel::bpsk_awgn(snr)?)
        }
        ChannelKind::BpskRayleigh => {
            let snr = require_snr(snr, "bpsk-rayleigh")?;
            (format!("bpsk-rayleigh {snr} dB"), BitChannel::bpsk_rayleigh(snr)?)
        }
        ChannelKind::Bsc => {
            let p = p.ok_or_else(|| usage("--p is required for --channel bsc"))?;
            (format!("bsc p={p}"), BitChannel::bsc(p)?)
        }
        ChannelKind::Bicm => return Err(usage("this command takes a scalar channel, not bicm")),
    })
}

/// The bit channels selected by the flags, with their BICM level (1 for
/// scalar channels).
fn channels(a: &ChannelArgs) -> CliResult<Vec<(String, usize, BitChannel)>> {
    if a.channel != ChannelKind::Bicm {
        if a.level.is_some_and(|l| l != 1) {
            return Err(usage("--level only applies to --channel bicm"));
        }
        let (name, ch) = scalar_channel(a.channel, a.snr, a.p)?;
        return Ok(vec![(name, 1, ch)]);
    }
    let snr = require_snr(a.snr, "bicm")?;
    let scheme: Scheme = a.scheme.into();
    let c = make_constellation(scheme, a.labeling.into());
    let model = FadingModel::new(a.fading.into(), snr)?;
    let m = scheme.bits_per_symbol();
    let levels: Vec<usize> = match a.level {
        Some(l) if (1..=m).contains(&l) => vec![l],
        Some(l) => return Err(usage(format!("--level must lie in 1..={m} for {scheme}, got {l}"))),
        None => (1..=m).collect(),
    };
    levels
        .into_iter()
        .map(|level| {
            let name = format!("bicm {scheme}/{}/{} {snr} dB level {level}", c.labeling, model.fading);
            Ok((name, level, bit_channel(&c, level, model)?))
        })
        .collect()
}

/// Rate results as printed by `rate`, in the requested units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateOutput {
    pub channel: String,
    pub units: Units,
    /// Sums over `levels` for BICM; the single channel's rates otherwise.
    pub i_orbgrand: f64,
    pub i_sgrand: f64,
    pub i_mi: f64,
    pub theta_star_orb: Option<f64>,
    pub theta_star_sgrand: Option<f64>,
    pub mc_std_error: f64,
    pub integration_abs_err: f64,
    pub error_budget: f64,
    pub bracket_edge: bool,
    pub levels: Vec<RateReport>,
    pub samples: usize,
    pub seed: u64,
    pub config_hash: String,
}

fn in_units(mut r: RateReport, units: Units) -> RateReport {
    if units == Units::Bits {
        r.i_orbgrand /= LN_2;
        r.i_sgrand /= LN_2;
        r.i_mi /= LN_2;
        r.mc_std_error /= LN_2;
        r.integration_abs_err /= LN_2;
    }
    r
}

fn rate(a: &RateArgs) -> CliResult<Status> {
    let cfg = RateConfig {
        samples: a.samples,
        psi_samples: a.psi_samples.unwrap_or(a.samples),
        seed: a.seed,
        ..RateConfig::default()
    };
    cfg.validate()?;
    let chans = channels(&a.channel)?;
    let bicm = a.channel.channel == ChannelKind::Bicm;
    let mut reports = Vec::with_capacity(chans.len());
    for (name, level, ch) in &chans {
        let c = if bicm { level_config(&cfg, *level) } else { cfg };
        let mut r = rate_report(ch, &c)?;
        r.channel = name.clone();
        reports.push(r);
    }
    let divisor = if a.units == Units::Bits { LN_2 } else { 1.0 };
    let sum = |f: fn(&RateReport) -> f64| reports.iter().map(f).sum::<f64>();
    let single = reports.len() == 1;
    let out = RateOutput {
        channel: if single {
            reports[0].channel.clone()
        } else {
            chans[0].0.rsplit_once(" level").map_or_else(String::new, |(s, _)| s.to_string())
        },
        units: a.units,
        i_orbgrand: sum(|r| r.i_orbgrand) / divisor,
        i_sgrand: sum(|r| r.i_sgrand) / divisor,
        i_mi: sum(|r| r.i_mi) / divisor,
        theta_star_orb: single.then(|| reports[0].theta_star_orb),
        theta_star_sgrand: single.then(|| reports[0].theta_star_sgrand),
        mc_std_error: sum(|r| r.mc_std_error.powi(2)).sqrt() / divisor,
        integration_abs_err: sum(|r| r.integration_abs_err) / divisor,
        error_budget: sum(|r| error_budget(r.mc_std_error, r.integration_abs_err)) / divisor,
        bracket_edge: reports.iter().any(RateReport::bracket_edge),
        levels: reports.into_iter().map(|r| in_units(r, a.units)).collect(),
        samples: a.samples,
        seed: a.seed,
        config_hash: config_digest(a),
    };
    emit_json(&out, a.output.as_deref())?;
    Ok(if out.bracket_edge {
        Status::Flagged("θ optimizer stopped at the bracket edge; the rate is a lower bound".into())
    } else {
        Status::Clean
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiPoint {
    pub t: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiOutput {
    pub channel: String,
    pub form: String,
    pub points: Vec<PsiPoint>,
    pub seed: u64,
    pub config_hash: String,
}

fn psi(a: &PsiArgs) -> CliResult<Status> {
    if !(a.t_step > 0.0 && a.t_max >= 0.0 && a.t_max.is_finite()) {
        return Err(usage("--t-step must be positive and --t-max finite and >= 0"));
    }
    let steps = (a.t_max / a.t_step + 1e-9).floor() as usize;
    if steps > 1_000_000 {
        return Err(usage("t grid exceeds 10^6 points"));
    }
    let mut chans = channels(&a.channel)?;
    if chans.len() != 1 {
        return Err(usage("--level is required for psi with --channel bicm"));
    }
    let (name, _, ch) = chans.pop().expect("one channel");
    let cdf = psi_cdf(&ch, a.samples, a.seed)?;
    let points = (0..=steps)
        .map(|i| {
            let t = i as f64 * a.t_step;
            PsiPoint { t, psi: cdf.eval(t) }
        })
        .collect();
    let out = PsiOutput {
        channel: name,
        form: if cdf.is_analytic() { "analytic" } else { "empirical" }.into(),
        points,
        seed: a.seed,
        config_hash: config_digest(a),
    };
    emit_json(&out, a.output.as_deref())?;
    Ok(Status::Clean)
}

fn bits_string(w: Word, n: usize) -> String {
    w.to_bits(n).iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub n: usize,
    pub k: usize,
    pub weighting: Weighting,
    pub max_queries: u64,
    /// Bit strings list position 0 first.
    pub sent: Option<String>,
    pub hard_decision: String,
    pub result: String,
    pub decoded: Option<String>,
    pub queries_used: u64,
    pub metric_value: Option<f64>,
    pub correct: Option<bool>,
    pub seed: u64,
    pub config_hash: String,
}

fn code_and_plan(c: &crate::args::CodeArgs) -> CliResult<(LinearCode, QueryPlan)> {
    Ok((
        LinearCode::random(c.n, c.k, c.code_seed)?,
        QueryPlan::new(c.weighting.into(), c.max_queries)?,
    ))
}

fn decode(a: &DecodeArgs) -> CliResult<Status> {
    let (code, plan) = code_and_plan(&a.code)?;
    let (sent, llrs) = match &a.llrs {
        Some(llrs) => {
            if llrs.len() != code.n {
                return Err(usage(format!("--llrs has {} values, the code has n = {}", llrs.len(), code.n)));
            }
            (None, llrs.clone())
        }
        None => {
            let (_, ch) = scalar_channel(a.channel, Some(a.snr), a.p)?;
            let (w, llrs) = noisy_codeword(&code, &ch, a.seed);
            (Some(w), llrs)
        }
    };
    let out = grand_decode(&llrs, &code, &plan)?;
    let decoded = out.result.codeword();
    let report = DecodeOutput {
        n: code.n,
        k: code.k,
        weighting: plan.weighting,
        max_queries: plan.max_queries,
        sent: sent.map(|w| bits_string(w, code.n)),
        hard_decision: bits_string(hard_decision(&llrs), code.n),
        result: match out.result {
            DecodeResult::Codeword { .. } => "codeword",
            DecodeResult::Abandoned { .. } => "abandoned",
        }
        .into(),
        decoded: decoded.map(|w| bits_string(w, code.n)),
        queries_used: out.result.queries_used(),
        metric_value: out.metric_value,
        correct: sent.map(|s| decoded == Some(s)),
        seed: a.seed,
        config_hash: config_digest(a),
    };
    emit_json(&report, a.output.as_deref())?;
    Ok(Status::Clean)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlerOutput {
    pub channel: String,
    #[serde(flatten)]
    pub report: BlerReport,
    pub config_hash: String,
}

fn bler(a: &BlerArgs) -> CliResult<Status> {
    let (code, plan) = code_and_plan(&a.code)?;
    let (name, ch) = scalar_channel(a.channel, Some(a.snr), a.p)?;
    let report = simulate_bler(&code, &ch, &plan, a.trials, a.seed)?;
    emit_json(
        &BlerOutput {
            channel: name,
            report,
            config_hash: config_digest(a),
        },
        a.output.as_deref(),
    )?;
    Ok(Status::Clean)
}

fn sweep(a: &SweepArgs) -> CliResult<Status> {
    let mut spec = SweepSpec::from_file(&a.spec)?;
    if let Some(out) = &a.output {
        spec.output = Some(out.clone());
    }
    if a.gnuplot {
        spec.gnuplot = true;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if spec.gnuplot && spec.output.is_none() {
        return Err(usage("--gnuplot needs an output path"));
    }
    let rows = run_sweep(&spec)?;
    match &spec.output {
        Some(path) => eprintln!("wrote {} rows to {}", rows.len(), path.display()),
        None => emit(&csv_text(&rows)?, None)?,
    }
    let flagged = rows
        .iter()
        .filter(|r| r.metric.starts_with("bracket_edge") && r.value != 0.0)
        .count();
    Ok(if flagged > 0 {
        Status::Flagged(format!("{flagged} rate evaluations stopped at the θ bracket edge"))
    } else {
        Status::Clean
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationPoint {
    pub index: usize,
    pub label: u32,
    /// Label bits, most significant (level 1) first.
    pub bits: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationOutput {
    pub scheme: String,
    pub labeling: String,
    pub bits_per_symbol: usize,
    pub points: Vec<ConstellationPoint>,
}

fn constellation_dump(a: &ConstellationArgs) -> CliResult<Status> {
    let c = make_constellation(a.scheme.into(), a.labeling.into());
    let m = c.bits_per_symbol;
    let out = ConstellationOutput {
        scheme: c.scheme.to_string(),
        labeling: c.labeling.to_string(),
        bits_per_symbol: m,
        points: c
            .points
            .iter()
            .zip(&c.labels)
            .enumerate()
            .map(|(index, (p, &label))| ConstellationPoint {
                index,
                label,
                bits: format!("{label:0m$b}"),
                re: p.re,
                im: p.im,
            })
            .collect(),
    };
    emit_json(&out, a.output.as_deref())?;
    Ok(Status::Clean)
}

fn validate(a: &ValidateArgs) -> CliResult<Status> {
    RateConfig::with_samples(a.samples, a.seed).validate()?;
    let report = validate_all(&ValidationConfig {
        seed: a.seed,
        samples: a.samples,
    });
    for e in &report.entries {
        eprintln!(
            "{} {}: measured {:.6e}, threshold {:.6e} ({})",
            if e.passed { "PASS" } else { "FAIL" },
            e.name,
            e.measured,
            e.threshold,
            e.detail
        );
    }
    emit_json(&report, a.output.as_deref())?;
    let failed = report.entries.iter().filter(|e| !e.passed).count();
    Ok(if failed > 0 {
        Status::Flagged(format!("{failed} validation checks failed"))
    } else {
        Status::Clean
    })
}
