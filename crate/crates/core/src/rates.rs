//! Achievable rates of GRAND-family decoders on a bit channel.
//!
//! All three rates are computed from one [`LlrEnsemble`]:
//!
//! * the channel mutual information `ln2 - E[ln(1 + e^{-xT})]`;
//! * the SGRAND GMI, `ln2 - inf_{θ<0} { E ln(1+e^{θ|T|}) - θ E[|T| 1(wrong)] }`;
//! * the ORBGRAND GMI, where `|T|` is replaced by the reliability cdf
//!   `Ψ(|T|)`, whose log-MGF term becomes `∫₀¹ ln(1+e^{θt}) dt`.
//!
//! "wrong" is the event that the hard decision on `T` disagrees with the input.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llr_channel::{psi_cdf, BitChannel, LlrEnsemble, Polarity, ReliabilityCdf};
use crate::numeric::{derive_seed, golden_section, integrate, softplus, Quadrature};
use crate::stats::Estimate;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 0xC0FFEE;
/// Slack added to every equality tolerance for the θ optimizer.
pub const OPTIMIZER_SLACK: f64 = 1e-6;

const LOGISTIC_ABS_TOL: f64 = 1e-12;
const MAIN_STREAM: u64 = 0x6d61_696e;
const PSI_STREAM: u64 = 0x0070_7369;

/// Sample counts and optimizer settings for the rate computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub samples: usize,
    /// Draws for an empirical reliability cdf (independent of `samples`).
    pub psi_samples: usize,
    pub seed: u64,
    /// θ is searched over `[-theta_max, -theta_min]`.
    pub theta_max: f64,
    pub theta_min: f64,
    pub theta_rel_tol: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            samples: DEFAULT_SAMPLES,
            psi_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            theta_max: 500.0,
            theta_min: 1e-6,
            theta_rel_tol: 1e-8,
        }
    }
}

impl RateConfig {
    pub fn with_samples(samples: usize, seed: u64) -> Self {
        RateConfig {
            samples,
            psi_samples: samples,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::invalid("samples", "need at least 2 draws"));
        }
        if !(self.theta_max > self.theta_min && self.theta_min > 0.0) {
            return Err(Error::invalid(
                "theta bracket",
                format!("need theta_max > theta_min > 0, got [{}, {}]", self.theta_max, self.theta_min),
            ));
        }
        if self.theta_rel_tol.is_nan() || self.theta_rel_tol <= 0.0 {
            return Err(Error::invalid("theta_rel_tol", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn main_seed(&self) -> u64 {
        derive_seed(self.seed, &[MAIN_STREAM])
    }

    pub(crate) fn psi_seed(&self) -> u64 {
        derive_seed(self.seed, &[PSI_STREAM])
    }
}

/// A GMI value with the optimizer's diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmiEstimate {
    /// nats per channel use
    pub rate: f64,
    pub theta_star: f64,
    pub iterations: u32,
    /// θ* landed within 1% of `-theta_max`; the bracket should be widened.
    pub bracket_edge: bool,
    /// Monte Carlo standard error of the objective at θ*.
    pub std_error: f64,
    pub integration_abs_err: f64,
}

/// `θ ↦ log_mgf_term(θ) - θ · linear_coefficient`, convex in θ.
pub struct GmiObjective<F> {
    pub linear_coefficient: f64,
    log_mgf_term: F,
}

/// Minimizer of a [`GmiObjective`] over the configured θ bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveMinimum {
    pub theta: f64,
    pub value: f64,
    pub iterations: u32,
    pub bracket_edge: bool,
}

impl<F: Fn(f64) -> f64> GmiObjective<F> {
    pub fn new(linear_coefficient: f64, log_mgf_term: F) -> Self {
        GmiObjective {
            linear_coefficient,
            log_mgf_term,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (self.log_mgf_term)(theta) - theta * self.linear_coefficient
    }

    /// Golden-section search on `[-theta_max, -theta_min]`.
    ///
    /// With a zero linear coefficient the objective is nonincreasing as
    /// θ → -∞, so the infimum is its limit there. That limit is returned as
    /// the value, θ is reported at the bracket edge, and nothing is flagged.
    pub fn minimize(&self, cfg: &RateConfig) -> ObjectiveMinimum {
        let lo = -cfg.theta_max;
        if self.linear_coefficient <= 0.0 {
            return ObjectiveMinimum {
                theta: lo,
                value: (self.log_mgf_term)(f64::NEG_INFINITY),
                iterations: 0,
                bracket_edge: false,
            };
        }
        let m = golden_section(|t| self.eval(t), lo, -cfg.theta_min, cfg.theta_rel_tol);
        ObjectiveMinimum {
            theta: m.x,
            value: m.value,
            iterations: m.iterations,
            bracket_edge: m.x <= 0.99 * lo,
        }
    }
}

fn clamp_rate(r: f64) -> f64 {
    r.clamp(0.0, LN_2)
}

/// `∫₀¹ ln(1 + e^{θt}) dt` with its quadrature error estimate.
pub fn logistic_integral_quadrature(theta: f64) -> Result<Quadrature> {
    if theta.is_nan() || theta > 0.0 {
        return Err(Error::invalid("theta", format!("must be <= 0, got {theta}")));
    }
    if theta == f64::NEG_INFINITY {
        return Ok(Quadrature {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    // Past t = 40/|θ| the integrand is below e^{-40}; integrate the two
    // pieces separately so the bisection starts near the feature.
    let knee = (40.0 / theta.abs()).min(1.0);
    let f = |t: f64| softplus(theta * t);
    let mut q = integrate(f, 0.0, knee, LOGISTIC_ABS_TOL);
    if knee < 1.0 {
        let tail = integrate(f, knee, 1.0, LOGISTIC_ABS_TOL);
        q.value += tail.value;
        q.abs_err += tail.abs_err;
    }
    Ok(q)
}

/// `∫₀¹ ln(1 + e^{θt}) dt` for `θ <= 0`.
pub fn logistic_integral(theta: f64) -> Result<f64> {
    logistic_integral_quadrature(theta).map(|q| q.value)
}

/// Monte Carlo estimate of the ORBGRAND linear coefficient
/// `½E[Ψ(|T|)1(T<0)|X=+1] + ½E[Ψ(|T|)1(T≥0)|X=-1]`.
pub fn orbgrand_linear_term(
    ch: &BitChannel,
    psi: &ReliabilityCdf,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let ens = LlrEnsemble::draw(ch, n_samples, seed)?;
    Ok(orbgrand_linear_term_of(&ens, psi))
}

pub fn orbgrand_linear_term_of(ens: &LlrEnsemble, psi: &ReliabilityCdf) -> Estimate {
    ens.expect(|t, x| if x.disagrees_with(t) { psi.eval(t.abs()) } else { 0.0 })
}

/// ORBGRAND GMI from a frozen ensemble and reliability cdf.
pub fn orbgrand_gmi_of(ens: &LlrEnsemble, psi: &ReliabilityCdf, cfg: &RateConfig) -> Result<GmiEstimate> {
    cfg.validate()?;
    let linear = orbgrand_linear_term_of(ens, psi);
    let objective = GmiObjective::new(linear.value, |theta| {
        logistic_integral(theta).expect("θ is inside the nonpositive bracket")
    });
    let m = objective.minimize(cfg);
    let q = logistic_integral_quadrature(m.theta)?;
    Ok(GmiEstimate {
        rate: clamp_rate(LN_2 - m.value),
        theta_star: m.theta,
        iterations: m.iterations,
        bracket_edge: m.bracket_edge,
        std_error: m.theta.abs() * linear.std_error,
        integration_abs_err: q.abs_err,
    })
}

/// ORBGRAND GMI of `ch`. Uses the analytic reliability cdf when one exists,
/// otherwise an empirical one built from an independent draw.
pub fn orbgrand_gmi(ch: &BitChannel, cfg: &RateConfig) -> Result<GmiEstimate> {
    cfg.validate()?;
    let psi = psi_cdf(ch, cfg.psi_samples, cfg.psi_seed())?;
    let ens = LlrEnsemble::draw(ch, cfg.samples, cfg.main_seed())?;
    orbgrand_gmi_of(&ens, &psi, cfg)
}

/// `ln(1 + e^{θa})` for `a >= 0`, with `θ = -∞` allowed.
fn scaled_softplus(theta: f64, a: f64) -> f64 {
    if a == 0.0 {
        LN_2
    } else {
        softplus(theta * a)
    }
}

fn sgrand_linear(t: f64, x: Polarity) -> f64 {
    if x.disagrees_with(t) {
        t.abs()
    } else {
        0.0
    }
}

/// SGRAND GMI from a frozen ensemble.
pub fn sgrand_gmi_of(ens: &LlrEnsemble, cfg: &RateConfig) -> Result<GmiEstimate> {
    cfg.validate()?;
    let linear = ens.expect(sgrand_linear);
    let objective = GmiObjective::new(linear.value, |theta| {
        ens.expect(|t, _| scaled_softplus(theta, t.abs())).value
    });
    let m = objective.minimize(cfg);
    let theta = m.theta;
    let at_optimum = ens.expect(|t, x| softplus(theta * t.abs()) - theta * sgrand_linear(t, x));
    Ok(GmiEstimate {
        rate: clamp_rate(LN_2 - m.value),
        theta_star: m.theta,
        iterations: m.iterations,
        bracket_edge: m.bracket_edge,
        std_error: at_optimum.std_error,
        integration_abs_err: 0.0,
    })
}

pub fn sgrand_gmi(ch: &BitChannel, cfg: &RateConfig) -> Result<GmiEstimate> {
    cfg.validate()?;
    let ens = LlrEnsemble::draw(ch, cfg.samples, cfg.main_seed())?;
    sgrand_gmi_of(&ens, cfg)
}

/// Mutual information `ln2 - E[ln(1 + e^{-xT})]` from a frozen ensemble.
pub fn mutual_information_of(ens: &LlrEnsemble) -> Estimate {
    let loss = ens.expect(|t, x| softplus(-x.sign() * t));
    Estimate {
        value: LN_2 - loss.value,
        std_error: loss.std_error,
    }
}

/// Mutual information of `ch` under equiprobable inputs.
pub fn mutual_information(ch: &BitChannel, n_samples: usize, seed: u64) -> Result<Estimate> {
    let ens = LlrEnsemble::draw(ch, n_samples, seed)?;
    Ok(mutual_information_of(&ens))
}

/// `(1/N) Σ_n ln(½(1 + e^{θ r_n / N}))` for a rank permutation `r`.
pub fn delta_log_mgf_estimator(ranks: &[usize], theta: f64) -> Result<f64> {
    let n = ranks.len();
    let mut seen = vec![false; n];
    for &r in ranks {
        if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
            return Err(Error::NotAPermutation(n));
        }
    }
    if n == 0 {
        return Err(Error::NotAPermutation(0));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta", "must be finite"));
    }
    let nf = n as f64;
    let sum: f64 = ranks
        .iter()
        .map(|&r| softplus(theta * r as f64 / nf) - LN_2)
        .sum();
    Ok(sum / nf)
}

/// `Δ(θ) = ∫₀¹ ln(1+e^{θt}) dt - ln 2`, the large-N limit of
/// [`delta_log_mgf_estimator`].
pub fn delta_limit(theta: f64) -> Result<f64> {
    Ok(logistic_integral(theta)? - LN_2)
}

/// The three rates of one channel, computed on a shared sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub channel: String,
    pub i_orbgrand: f64,
    pub i_mi: f64,
    pub i_sgrand: f64,
    pub theta_star_orb: f64,
    pub theta_star_sgrand: f64,
    pub iterations_orb: u32,
    pub iterations_sgrand: u32,
    pub bracket_edge_orb: bool,
    pub bracket_edge_sgrand: bool,
    pub mc_std_error: f64,
    pub integration_abs_err: f64,
    pub psi_form: String,
    pub samples: usize,
    pub seed: u64,
}

impl RateReport {
    /// `3·mc_std_error + integration_abs_err + optimizer slack`.
    pub fn error_budget(&self) -> f64 {
        error_budget(self.mc_std_error, self.integration_abs_err)
    }

    pub fn bracket_edge(&self) -> bool {
        self.bracket_edge_orb || self.bracket_edge_sgrand
    }
}

pub fn error_budget(mc_std_error: f64, integration_abs_err: f64) -> f64 {
    3.0 * mc_std_error + integration_abs_err + OPTIMIZER_SLACK
}

/// All three rates from one ensemble (common random numbers) and `psi`.
pub fn rate_report_of(
    channel: &str,
    ens: &LlrEnsemble,
    psi: &ReliabilityCdf,
    cfg: &RateConfig,
) -> Result<RateReport> {
    let mi = mutual_information_of(ens);
    let orb = orbgrand_gmi_of(ens, psi, cfg)?;
    let sg = sgrand_gmi_of(ens, cfg)?;
    Ok(RateReport {
        channel: channel.to_string(),
        i_orbgrand: orb.rate,
        i_mi: clamp_rate(mi.value),
        i_sgrand: sg.rate,
        theta_star_orb: orb.theta_star,
        theta_star_sgrand: sg.theta_star,
        iterations_orb: orb.iterations,
        iterations_sgrand: sg.iterations,
        bracket_edge_orb: orb.bracket_edge,
        bracket_edge_sgrand: sg.bracket_edge,
        mc_std_error: mi.std_error.max(orb.std_error).max(sg.std_error),
        integration_abs_err: orb.integration_abs_err,
        psi_form: if psi.is_analytic() { "analytic" } else { "empirical" }.to_string(),
        samples: ens.len(),
        seed: cfg.seed,
    })
}

pub fn rate_report(ch: &BitChannel, cfg: &RateConfig) -> Result<RateReport> {
    cfg.validate()?;
    let psi = psi_cdf(ch, cfg.psi_samples, cfg.psi_seed())?;
    let ens = LlrEnsemble::draw(ch, cfg.samples, cfg.main_seed())?;
    rate_report_of(ch.kind_name(), &ens, &psi, cfg)
}
