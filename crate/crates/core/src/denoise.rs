//! Complex soft thresholding with per-subband thresholds tuned by complex SURE.

use serde::{Deserialize, Serialize};

use crate::aliasing::TauMap;
use crate::array::C64;
use crate::error::{Error, Result};
use crate::wavelet::{SubbandMap, WaveletCoeffs};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `lambda_j = t_b * sqrt(tau_j)`.
    #[default]
    TauScaled,
    /// `lambda_j = t_b` for every coefficient of band `b`.
    FlatPerBand,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSearch {
    /// Global minimum of the piecewise-quadratic cSURE curve.
    #[default]
    Exact,
    /// 50 golden-section steps on `[0, t_max]`, then the best of that,
    /// `t = 0` and `t = t_max`.
    GoldenSection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub mode: ThresholdMode,
    pub search: ThresholdSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub t: Vec<f64>,
    pub mode: ThresholdMode,
}

impl ThresholdSet {
    pub fn lambdas(&self, tau: &[f64], map: &SubbandMap) -> Vec<f64> {
        let mut out = vec![0.0; map.len()];
        for (b, band) in map.bands().iter().enumerate() {
            for j in band.range.clone() {
                out[j] = match self.mode {
                    ThresholdMode::TauScaled => self.t[b] * tau[j].sqrt(),
                    ThresholdMode::FlatPerBand => self.t[b],
                };
            }
        }
        out
    }
}

/// Soft-thresholded coefficients and the per-coefficient divergence
/// `1/2 (dRe f/dRe r + dIm f/dIm r)`.
#[derive(Clone, Debug)]
pub struct Shrinkage {
    pub w_hat: WaveletCoeffs,
    pub div: Vec<f64>,
    /// `1 - div_j`, computed without cancellation.
    pub slack: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DenoiseResult {
    pub thresholds: ThresholdSet,
    pub w_hat: WaveletCoeffs,
    pub div: Vec<f64>,
    /// Band mean of `div`.
    pub alpha: Vec<f64>,
    /// Band mean of `1 - div`.
    pub one_minus_alpha: Vec<f64>,
    pub csure: Vec<f64>,
}

pub fn soft_threshold_scalar(r: C64, lambda: f64) -> (C64, f64, f64) {
    if lambda == 0.0 {
        return (r, 1.0, 0.0);
    }
    let mag = r.norm();
    if mag > lambda {
        let ratio = lambda / mag;
        (r * (1.0 - ratio), 1.0 - 0.5 * ratio, 0.5 * ratio)
    } else {
        (C64::default(), 0.0, 1.0)
    }
}

pub fn soft_threshold(r: &WaveletCoeffs, lambdas: &[f64]) -> Result<Shrinkage> {
    if lambdas.len() != r.data.len() {
        return Err(Error::shape("one threshold per coefficient is required"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::arg("thresholds must be nonnegative"));
    }
    let n = r.data.len();
    let mut data = Vec::with_capacity(n);
    let mut div = Vec::with_capacity(n);
    let mut slack = Vec::with_capacity(n);
    for (&z, &l) in r.data.iter().zip(lambdas) {
        let (w, d, s) = soft_threshold_scalar(z, l);
        data.push(w);
        div.push(d);
        slack.push(s);
    }
    Ok(Shrinkage { w_hat: WaveletCoeffs { data, map: r.map.clone() }, div, slack })
}

/// `sum_j |w_hat_j - r_j|^2 + tau_j (2 div_j - 1)`: total and per band.
pub fn csure(w_hat: &WaveletCoeffs, r: &WaveletCoeffs, div: &[f64], tau: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = r.data.len();
    if w_hat.data.len() != n || div.len() != n || tau.len() != n {
        return Err(Error::shape("cSURE inputs have different lengths"));
    }
    let per_band: Vec<f64> = r
        .map
        .bands()
        .iter()
        .map(|b| {
            b.range
                .clone()
                .map(|j| (w_hat.data[j] - r.data[j]).norm_sqr() + tau[j] * (2.0 * div[j] - 1.0))
                .sum()
        })
        .collect();
    Ok((per_band.iter().sum(), per_band))
}

/// Per-band mean of `div`.
pub fn subband_divergence(div: &[f64], map: &SubbandMap) -> Vec<f64> {
    map.band_means(div)
}

/// Per-coefficient pieces of the band cSURE as a function of the band
/// multiplier `t`: the coefficient is zeroed once `t >= knot`; above the knot
/// it contributes `a t^2 - b t + c`, below it contributes `d`.
struct Piece {
    knot: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

fn pieces(r: &[C64], tau: &[f64], mode: ThresholdMode) -> Vec<Piece> {
    r.iter()
        .zip(tau)
        .map(|(z, &t)| {
            let mag = z.norm();
            let d = mag * mag - t;
            match mode {
                ThresholdMode::TauScaled => {
                    if t <= 0.0 {
                        Piece { knot: f64::INFINITY, a: 0.0, b: 0.0, c: 0.0, d }
                    } else {
                        let b = if mag > 0.0 { t * t.sqrt() / mag } else { 0.0 };
                        Piece { knot: mag / t.sqrt(), a: t, b, c: t, d }
                    }
                }
                ThresholdMode::FlatPerBand => {
                    let b = if mag > 0.0 { t / mag } else { 0.0 };
                    Piece { knot: mag, a: 1.0, b, c: t, d }
                }
            }
        })
        .collect()
}

/// Direct evaluation of a band's cSURE at multiplier `t`.
pub fn band_csure(r: &[C64], tau: &[f64], t: f64, mode: ThresholdMode) -> f64 {
    r.iter()
        .zip(tau)
        .map(|(&z, &tj)| {
            let lambda = match mode {
                ThresholdMode::TauScaled => t * tj.sqrt(),
                ThresholdMode::FlatPerBand => t,
            };
            let (w, div, _) = soft_threshold_scalar(z, lambda);
            (w - z).norm_sqr() + tj * (2.0 * div - 1.0)
        })
        .sum()
}

fn t_max(r: &[C64], tau: &[f64], mode: ThresholdMode) -> f64 {
    pieces(r, tau, mode).iter().map(|p| p.knot).filter(|k| k.is_finite()).fold(0.0, f64::max)
}

fn exact_minimizer(r: &[C64], tau: &[f64], mode: ThresholdMode) -> f64 {
    let mut ps = pieces(r, tau, mode);
    ps.sort_by(|x, y| x.knot.total_cmp(&y.knot));
    let finite = ps.iter().take_while(|p| p.knot.is_finite()).count();
    // Suffix sums over "still above threshold" coefficients.
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in &ps {
        a += p.a;
        b += p.b;
        c += p.c;
    }
    let mut below = 0.0;
    let mut best = (c, 0.0);
    let mut lo = 0.0;
    let mut k = 0;
    loop {
        let hi = if k < finite { ps[k].knot } else { f64::INFINITY };
        if hi > lo && a > 0.0 {
            let vertex = b / (2.0 * a);
            if vertex > lo && vertex < hi {
                let v = a * vertex * vertex - b * vertex + c + below;
                if v < best.0 {
                    best = (v, vertex);
                }
            }
        }
        if k >= finite {
            break;
        }
        // Cross every coefficient whose knot equals `hi`.
        while k < finite && ps[k].knot == hi {
            a -= ps[k].a;
            b -= ps[k].b;
            c -= ps[k].c;
            below += ps[k].d;
            k += 1;
        }
        let v = a * hi * hi - b * hi + c + below;
        // At t = 0 the threshold is zero and nothing is shrunk.
        if hi > 0.0 && v < best.0 {
            best = (v, hi);
        }
        lo = hi;
    }
    best.1
}

fn golden_section(r: &[C64], tau: &[f64], mode: ThresholdMode) -> f64 {
    let top = t_max(r, tau, mode);
    let f = |t: f64| band_csure(r, tau, t, mode);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, top);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..50 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [mid, 0.0, top]
        .into_iter()
        .map(|t| (f(t), t))
        .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 { v } else { acc })
        .1
}

/// Chooses one multiplier per band by minimizing that band's cSURE.
pub fn tune_thresholds(r: &WaveletCoeffs, tau: &TauMap, cfg: &DenoiserConfig) -> Result<ThresholdSet> {
    if tau.tau.len() != r.data.len() {
        return Err(Error::shape("tau and coefficients have different lengths"));
    }
    let floor = tau.floor();
    let t = r
        .map
        .bands()
        .iter()
        .map(|band| {
            let rb = &r.data[band.range.clone()];
            let tb = &tau.tau[band.range.clone()];
            if tb.iter().all(|&v| v <= floor) {
                return 0.0;
            }
            match cfg.search {
                ThresholdSearch::Exact => exact_minimizer(rb, tb, cfg.mode),
                ThresholdSearch::GoldenSection => golden_section(rb, tb, cfg.mode),
            }
        })
        .collect();
    Ok(ThresholdSet { t, mode: cfg.mode })
}

/// Tune, shrink, and collect the Onsager ingredients.
pub fn denoise(r: &WaveletCoeffs, tau: &TauMap, cfg: &DenoiserConfig) -> Result<DenoiseResult> {
    let thresholds = tune_thresholds(r, tau, cfg)?;
    let lambdas = thresholds.lambdas(&tau.tau, &r.map);
    let shrunk = soft_threshold(r, &lambdas)?;
    let (_, per_band) = csure(&shrunk.w_hat, r, &shrunk.div, &tau.tau)?;
    let alpha = subband_divergence(&shrunk.div, &r.map);
    let one_minus_alpha = r.map.band_means(&shrunk.slack);
    Ok(DenoiseResult {
        thresholds,
        w_hat: shrunk.w_hat,
        div: shrunk.div,
        alpha,
        one_minus_alpha,
        csure: per_band,
    })
}
