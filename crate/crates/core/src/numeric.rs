//! Scalar numerics shared by the rate computations: adaptive Gauss-Kronrod
//! quadrature, golden-section minimization, the standard normal cdf and
//! reproducible chunked Monte Carlo reductions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Kronrod abscissae on [0, 1] for the 15-point rule (the last one is the centre).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Cap on the number of subintervals kept by [`integrate`].
const MAX_INTERVALS: usize = 2000;

/// Result of a quadrature: the value and an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive G7-K15 quadrature of `f` over the finite interval `[a, b]`.
///
/// The subinterval with the largest error estimate is bisected until the
/// summed estimate drops below `abs_tol` or the interval budget runs out.
/// The returned error is that sum, a conservative bound for smooth integrands.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Quadrature {
    let (v, e) = gauss_kronrod_15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut abs_err = e;
    while abs_err > abs_tol && pieces.len() < MAX_INTERVALS {
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (lo, hi, _, err) = pieces[worst];
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            break;
        }
        let (lv, le) = gauss_kronrod_15(&f, lo, mid);
        let (rv, re) = gauss_kronrod_15(&f, mid, hi);
        pieces[worst] = (lo, mid, lv, le);
        pieces.push((mid, hi, rv, re));
        abs_err += le + re - err;
    }
    let mut value = 0.0;
    let mut abs_err = 0.0;
    for &(_, _, v, e) in &pieces {
        value += v;
        abs_err += e;
    }
    Quadrature { value, abs_err }
}

/// Minimizer found by [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: u32,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol * |x|` (with a floor of
/// `rel_tol * 1e-12` so that a minimizer at zero terminates).
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Minimum {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > rel_tol * (0.5 * (a.abs() + b.abs())).max(1e-12) && iterations < 500 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Minimum {
        x,
        value,
        iterations,
    }
}

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mixes a master seed with a path of coordinates into a derived seed
/// (splitmix64 finalizer applied per coordinate).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Draws per Monte Carlo chunk. Each chunk owns an independent ChaCha stream,
/// so the sample set depends only on the seed, never on the worker count.
pub const MC_CHUNK: usize = 8192;

/// Fills a vector of `n` draws in parallel; `draw(rng, index)` produces the
/// value for global position `index`.
pub fn par_draws<F>(n: usize, seed: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, usize) -> f64 + Sync,
{
    let mut out = vec![0.0; n];
    out.par_chunks_mut(MC_CHUNK)
        .enumerate()
        .for_each(|(chunk, slot)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let base = chunk * MC_CHUNK;
            for (i, v) in slot.iter_mut().enumerate() {
                *v = draw(&mut rng, base + i);
            }
        });
    out
}

/// Returns `(Σ f(x), Σ f(x)²)` over `xs`, reduced chunk by chunk in a fixed
/// order so the floating-point result is independent of scheduling.
pub fn par_moments<F>(xs: &[f64], f: F) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync,
{
    let partials: Vec<(f64, f64)> = xs
        .par_chunks(MC_CHUNK)
        .map(|chunk| {
            chunk.iter().fold((0.0, 0.0), |(s, q), &x| {
                let v = f(x);
                (s + v, q + v * v)
            })
        })
        .collect();
    partials
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (ps, pq)| (s + ps, q + pq))
}
