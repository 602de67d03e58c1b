//! Parameter sweeps with CSV persistence, and the bundled validation suite.

mod validation;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bicm::{bicm_reports, make_constellation, Fading, FadingModel, Labeling, Scheme};
use crate::error::{Error, Result};
use crate::grand::{simulate_bler, LinearCode, QueryPlan, Weighting, DEFAULT_MAX_QUERIES};
use crate::llr_channel::{psi_cdf, BitChannel, MIN_EMPIRICAL_SAMPLES};
use crate::numeric::derive_seed;
use crate::rates::{rate_report, RateConfig, RateReport, DEFAULT_SAMPLES, DEFAULT_SEED};

pub use validation::{validate_all, ValidationConfig, ValidationEntry, ValidationReport};

/// Fewest Monte Carlo draws a sweep accepts per rate evaluation.
pub const MIN_SWEEP_SAMPLES: usize = 1_000;

pub const CSV_HEADER: [&str; 11] = [
    "scenario",
    "scheme",
    "labeling",
    "fading",
    "snr_db",
    "level",
    "metric",
    "value",
    "std_error",
    "seed",
    "config_hash",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Reliability cdf of BPSK over AWGN and Rayleigh fading on a grid of `t`.
    PsiCurves,
    /// The three rates of BPSK over AWGN and Rayleigh fading.
    BpskRates,
    BicmAwgnGray,
    BicmAwgnSp,
    BicmRayleighGray,
    BicmRayleighSp,
    /// Block error rate of a random linear code over BPSK-AWGN.
    Bler,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::PsiCurves,
        Scenario::BpskRates,
        Scenario::BicmAwgnGray,
        Scenario::BicmAwgnSp,
        Scenario::BicmRayleighGray,
        Scenario::BicmRayleighSp,
        Scenario::Bler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PsiCurves => "psi_curves",
            Scenario::BpskRates => "bpsk_rates",
            Scenario::BicmAwgnGray => "bicm_awgn_gray",
            Scenario::BicmAwgnSp => "bicm_awgn_sp",
            Scenario::BicmRayleighGray => "bicm_rayleigh_gray",
            Scenario::BicmRayleighSp => "bicm_rayleigh_sp",
            Scenario::Bler => "bler",
        }
    }

    fn index(self) -> u64 {
        Scenario::ALL.iter().position(|&s| s == self).unwrap() as u64
    }

    fn bicm(self) -> Option<(Fading, Labeling)> {
        match self {
            Scenario::BicmAwgnGray => Some((Fading::Awgn, Labeling::Gray)),
            Scenario::BicmAwgnSp => Some((Fading::Awgn, Labeling::SetPartitioning)),
            Scenario::BicmRayleighGray => Some((Fading::RayleighCsi, Labeling::Gray)),
            Scenario::BicmRayleighSp => Some((Fading::RayleighCsi, Labeling::SetPartitioning)),
            _ => None,
        }
    }

    /// Default SNR grid of this scenario.
    pub fn default_grid(self) -> Vec<f64> {
        let (lo, hi) = match self {
            Scenario::PsiCurves => (3, 3),
            Scenario::BpskRates | Scenario::Bler => (-5, 10),
            _ => (-5, 20),
        };
        (lo..=hi).map(f64::from).collect()
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlerParams {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    #[serde(default = "default_max_queries")]
    pub max_queries: u64,
    #[serde(default = "default_weighting")]
    pub weighting: Weighting,
    /// Seed of the random code; the noise uses the sweep seed.
    #[serde(default)]
    pub code_seed: u64,
}

fn default_max_queries() -> u64 {
    DEFAULT_MAX_QUERIES
}

fn default_weighting() -> Weighting {
    Weighting::RankOverN
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

/// A sweep description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_samples")]
    pub psi_samples: usize,
    /// Values of `t` for `psi_curves`; defaults to `0, 0.25, ..., 12`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bler: Option<BlerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot-ready `.dat` file next to the CSV.
    #[serde(default)]
    pub gnuplot: bool,
}

impl SweepSpec {
    pub fn new(scenario: Scenario, snr_grid_db: Vec<f64>) -> Self {
        SweepSpec {
            scenario,
            snr_grid_db,
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            psi_samples: DEFAULT_SAMPLES,
            psi_t_grid: None,
            bler: None,
            output: None,
            gnuplot: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::invalid("snr_grid_db", "must not be empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_grid_db", "values must be finite"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("snr_grid_db", "must be strictly increasing"));
        }
        if self.samples < MIN_SWEEP_SAMPLES {
            return Err(Error::invalid(
                "samples",
                format!("need at least {MIN_SWEEP_SAMPLES}, got {}", self.samples),
            ));
        }
        if self.psi_samples < MIN_EMPIRICAL_SAMPLES {
            return Err(Error::invalid(
                "psi_samples",
                format!("need at least {MIN_EMPIRICAL_SAMPLES}, got {}", self.psi_samples),
            ));
        }
        if let Some(ts) = &self.psi_t_grid {
            if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::invalid(
                    "psi_t_grid",
                    "must be a nonempty list of finite values >= 0",
                ));
            }
        }
        if self.scenario == Scenario::Bler {
            let Some(b) = &self.bler else {
                return Err(Error::invalid("bler", "required for the bler scenario"));
            };
            LinearCode::random(b.n, b.k, b.code_seed)?;
            QueryPlan::new(b.weighting, b.max_queries)?;
            if b.trials == 0 {
                return Err(Error::invalid("bler.trials", "must be positive"));
            }
        }
        Ok(())
    }

    /// Digest of the spec without its output settings, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let canonical = SweepSpec {
            output: None,
            gnuplot: false,
            ..self.clone()
        };
        config_digest(&canonical)
    }

    fn t_grid(&self) -> Vec<f64> {
        self.psi_t_grid
            .clone()
            .unwrap_or_else(|| (0..=48).map(|i| i as f64 * 0.25).collect())
    }
}

/// First 16 hex digits of the SHA-256 of `value`'s compact JSON encoding.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("configuration serializes");
    Sha256::digest(json.as_bytes())[..8]
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// One CSV line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub scheme: String,
    pub labeling: String,
    pub fading: String,
    pub snr_db: f64,
    /// Bit level (1 = most significant), `sum`, or `block` for BLER rows.
    pub level: String,
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
    /// Seed of the grid point that produced this row.
    pub seed: u64,
    pub config_hash: String,
}

impl ResultRow {
    fn record(&self) -> [String; 11] {
        [
            self.scenario.name().to_string(),
            self.scheme.clone(),
            self.labeling.clone(),
            self.fading.clone(),
            format_float(self.snr_db),
            self.level.clone(),
            self.metric.clone(),
            format_float(self.value),
            format_float(self.std_error),
            self.seed.to_string(),
            self.config_hash.clone(),
        ]
    }
}

/// Decimal rendering with 17 significant digits, so every value round-trips.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-6..=16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

struct RowContext<'a> {
    scenario: Scenario,
    scheme: &'a str,
    labeling: &'a str,
    fading: &'a str,
    snr_db: f64,
    seed: u64,
    hash: &'a str,
}

impl RowContext<'_> {
    fn row(&self, level: impl Into<String>, metric: impl Into<String>, value: f64, std_error: f64) -> ResultRow {
        ResultRow {
            scenario: self.scenario,
            scheme: self.scheme.to_string(),
            labeling: self.labeling.to_string(),
            fading: self.fading.to_string(),
            snr_db: self.snr_db,
            level: level.into(),
            metric: metric.into(),
            value,
            std_error,
            seed: self.seed,
            config_hash: self.hash.to_string(),
        }
    }

    fn report_rows(&self, level: &str, r: &RateReport, out: &mut Vec<ResultRow>) {
        let se = r.mc_std_error;
        out.push(self.row(level, "i_orbgrand", r.i_orbgrand, se));
        out.push(self.row(level, "i_sgrand", r.i_sgrand, se));
        out.push(self.row(level, "i_mi", r.i_mi, se));
        out.push(self.row(level, "theta_star_orb", r.theta_star_orb, 0.0));
        out.push(self.row(level, "theta_star_sgrand", r.theta_star_sgrand, 0.0));
        out.push(self.row(level, "bracket_edge_orb", f64::from(u8::from(r.bracket_edge_orb)), 0.0));
        out.push(self.row(
            level,
            "bracket_edge_sgrand",
            f64::from(u8::from(r.bracket_edge_sgrand)),
            0.0,
        ));
    }
}

enum Point {
    Bpsk { fading: Fading, snr_db: f64 },
    Bicm { scheme: Scheme, labeling: Labeling, fading: Fading, snr_db: f64 },
    Bler { snr_db: f64 },
}

fn grid_points(spec: &SweepSpec) -> Vec<Point> {
    let mut points = Vec::new();
    for &snr_db in &spec.snr_grid_db {
        match spec.scenario {
            Scenario::PsiCurves | Scenario::BpskRates => {
                for fading in Fading::ALL {
                    points.push(Point::Bpsk { fading, snr_db });
                }
            }
            Scenario::Bler => points.push(Point::Bler { snr_db }),
            s => {
                let (fading, labeling) = s.bicm().expect("bicm scenario");
                for scheme in Scheme::ALL {
                    points.push(Point::Bicm {
                        scheme,
                        labeling,
                        fading,
                        snr_db,
                    });
                }
            }
        }
    }
    points
}

fn bpsk_channel(fading: Fading, snr_db: f64) -> Result<BitChannel> {
    match fading {
        Fading::Awgn => BitChannel::bpsk_awgn(snr_db),
        Fading::RayleighCsi => BitChannel::bpsk_rayleigh(snr_db),
    }
}

fn run_point(spec: &SweepSpec, hash: &str, point: &Point) -> Result<Vec<ResultRow>> {
    let scenario = spec.scenario;
    let (scheme_idx, fading_idx, snr_db) = match *point {
        Point::Bpsk { fading, snr_db } => (0, fading as u64, snr_db),
        Point::Bicm {
            scheme,
            fading,
            snr_db,
            ..
        } => (1 + scheme as u64, fading as u64, snr_db),
        Point::Bler { snr_db } => (0, 0, snr_db),
    };
    let seed = derive_seed(
        spec.seed,
        &[scenario.index(), scheme_idx, fading_idx, snr_db.to_bits()],
    );
    let cfg = RateConfig {
        samples: spec.samples,
        psi_samples: spec.psi_samples,
        seed,
        ..RateConfig::default()
    };
    let mut rows = Vec::new();
    match *point {
        Point::Bpsk { fading, snr_db } => {
            let ctx = RowContext {
                scenario,
                scheme: "bpsk",
                labeling: "none",
                fading: fading.name(),
                snr_db,
                seed,
                hash,
            };
            let ch = bpsk_channel(fading, snr_db)?;
            if scenario == Scenario::PsiCurves {
                let psi = psi_cdf(&ch, spec.psi_samples, seed)?;
                let se_of = |p: f64| {
                    if psi.is_analytic() {
                        0.0
                    } else {
                        (p * (1.0 - p) / spec.psi_samples as f64).sqrt()
                    }
                };
                for t in spec.t_grid() {
                    let p = psi.eval(t);
                    rows.push(ctx.row("1", format!("psi_at_{t}"), p, se_of(p)));
                }
            } else {
                let r = rate_report(&ch, &cfg)?;
                ctx.report_rows("1", &r, &mut rows);
            }
        }
        Point::Bicm {
            scheme,
            labeling,
            fading,
            snr_db,
        } => {
            let ctx = RowContext {
                scenario,
                scheme: scheme.name(),
                labeling: labeling.name(),
                fading: fading.name(),
                snr_db,
                seed,
                hash,
            };
            let c = make_constellation(scheme, labeling);
            let reports = bicm_reports(&c, FadingModel::new(fading, snr_db)?, &cfg)?;
            for (i, r) in reports.iter().enumerate() {
                ctx.report_rows(&(i + 1).to_string(), r, &mut rows);
            }
            let se = reports.iter().map(|r| r.mc_std_error.powi(2)).sum::<f64>().sqrt();
            let sum = |f: fn(&RateReport) -> f64| reports.iter().map(f).sum::<f64>();
            rows.push(ctx.row("sum", "i_orbgrand", sum(|r| r.i_orbgrand), se));
            rows.push(ctx.row("sum", "i_sgrand", sum(|r| r.i_sgrand), se));
            rows.push(ctx.row("sum", "i_mi", sum(|r| r.i_mi), se));
        }
        Point::Bler { snr_db } => {
            let b = spec.bler.as_ref().expect("validated bler parameters");
            let ctx = RowContext {
                scenario,
                scheme: "bpsk",
                labeling: "none",
                fading: "awgn",
                snr_db,
                seed,
                hash,
            };
            let code = LinearCode::random(b.n, b.k, b.code_seed)?;
            let plan = QueryPlan::new(b.weighting, b.max_queries)?;
            let ch = BitChannel::bpsk_awgn(snr_db)?;
            let rep = simulate_bler(&code, &ch, &plan, b.trials, seed)?;
            let t = rep.trials as f64;
            let ab = rep.abandonments as f64 / t;
            rows.push(ctx.row("block", "bler", rep.bler, rep.std_error));
            rows.push(ctx.row("block", "abandon_rate", ab, (ab * (1.0 - ab) / t).sqrt()));
            rows.push(ctx.row("block", "mean_queries", rep.mean_queries, 0.0));
            rows.push(ctx.row(
                "block",
                "code_rate",
                b.k as f64 / b.n as f64 * std::f64::consts::LN_2,
                0.0,
            ));
        }
    }
    Ok(rows)
}

/// Runs every grid point and, when the spec names an output path, writes the
/// CSV (and optionally the gnuplot file) atomically.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let hash = spec.config_hash();
    let points = grid_points(spec);
    let per_point: Vec<Vec<ResultRow>> = points
        .par_iter()
        .map(|p| run_point(spec, &hash, p))
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_point.into_iter().flatten().collect();
    if let Some(path) = &spec.output {
        write_csv(path, &rows)?;
        if spec.gnuplot {
            write_atomic(&path.with_extension("dat"), gnuplot_text(&rows).as_bytes())?;
        }
    }
    Ok(rows)
}

/// CSV text of `rows` with the fixed header, LF line endings.
pub fn csv_text(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |source| Error::Csv {
        path: PathBuf::from("<memory>"),
        source,
    };
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in rows {
        w.write_record(r.record()).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv {
        path: PathBuf::from("<memory>"),
        source: e.into_error().into(),
    })?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_atomic(path, csv_text(rows)?.as_bytes())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("output", format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// `(x, value, std_error)`
type PlotPoint = (f64, f64, f64);

/// Columnar text for gnuplot: one indexable block per series, separated by
/// two blank lines. Psi curves use `t` as the abscissa, everything else SNR.
pub fn gnuplot_text(rows: &[ResultRow]) -> String {
    let mut series: Vec<(String, Vec<PlotPoint>)> = Vec::new();
    for r in rows {
        let (key, x) = match r.metric.strip_prefix("psi_at_") {
            Some(t) => (
                format!("{} {} {} snr={} psi", r.scheme, r.labeling, r.fading, r.snr_db),
                t.parse().unwrap_or(f64::NAN),
            ),
            None => (
                format!("{} {} {} level={} {}", r.scheme, r.labeling, r.fading, r.level, r.metric),
                r.snr_db,
            ),
        };
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((x, r.value, r.std_error)),
            None => series.push((key, vec![(x, r.value, r.std_error)])),
        }
    }
    let mut out = String::new();
    for (i, (key, pts)) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {key}");
        for (x, v, se) in pts {
            let _ = writeln!(out, "{} {} {}", format_float(*x), format_float(*v), format_float(*se));
        }
    }
    out
}
