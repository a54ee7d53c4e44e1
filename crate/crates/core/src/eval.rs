//! Image-quality metrics and state-evolution diagnostics.
//!
//! All image metrics compare magnitude images.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::aliasing::normalized_residual;
use crate::array::C64;
use crate::error::{Error, Result};
use crate::solver::{IterateTrace, Snapshot};
use crate::wavelet::{SubbandMap, WaveletCoeffs};

pub const DEFAULT_SUPPORT_FRACTION: f64 = 0.05;
/// Reported in place of `-inf` for an exact match.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `|x_ref| >= fraction * max |x_ref|`.
pub fn support_mask(x_ref: &ArrayView2<C64>, fraction: f64) -> Array2<bool> {
    let peak = x_ref.iter().map(|z| z.norm()).fold(0.0, f64::max);
    x_ref.map(|z| z.norm() >= fraction * peak)
}

fn check_pair(a: &ArrayView2<C64>, b: &ArrayView2<C64>, mask: Option<&Array2<bool>>) -> Result<()> {
    if a.dim() != b.dim() || mask.is_some_and(|m| m.dim() != a.dim()) {
        return Err(Error::shape("metric inputs differ in shape"));
    }
    Ok(())
}

/// `10 log10(||mask (|x_hat| - |x_ref|)||^2 / ||mask |x_ref|||^2)`.
pub fn nmse(x_hat: &ArrayView2<C64>, x_ref: &ArrayView2<C64>, mask: Option<&Array2<bool>>) -> Result<f64> {
    check_pair(x_hat, x_ref, mask)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((idx, a), b) in x_hat.indexed_iter().zip(x_ref.iter()) {
        if mask.is_none_or(|m| m[idx]) {
            num += (a.norm() - b.norm()).powi(2);
            den += b.norm_sqr();
        }
    }
    if !(den > 0.0) {
        return Err(Error::arg("reference has no energy inside the mask"));
    }
    Ok(if num == 0.0 { NMSE_FLOOR_DB } else { (10.0 * (num / den).log10()).max(NMSE_FLOOR_DB) })
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Half-sample symmetric extension: `d c b a | a b c d | d c b a`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn separable_filter(x: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = x.dim();
    let half = (k.len() / 2) as isize;
    let rows: Array2<f64> = Array2::from_shape_fn((h, w), |(i, j)| {
        k.iter().enumerate().map(|(t, &kv)| kv * x[[i, reflect(j as isize + t as isize - half, w)]]).sum::<f64>()
    });
    Array2::from_shape_fn((h, w), |(i, j)| {
        k.iter().enumerate().map(|(t, &kv)| kv * rows[[reflect(i as isize + t as isize - half, h), j]]).sum::<f64>()
    })
}

/// Mean SSIM over `mask` (all pixels when `None`) of magnitude images scaled
/// by `max |x_ref|`; 11x11 Gaussian window with sigma 1.5, K1 = 0.01,
/// K2 = 0.03.
pub fn ssim(x_hat: &ArrayView2<C64>, x_ref: &ArrayView2<C64>, mask: Option<&Array2<bool>>) -> Result<f64> {
    check_pair(x_hat, x_ref, mask)?;
    let peak = x_ref.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::arg("reference is identically zero"));
    }
    let a = x_hat.map(|z| z.norm() / peak);
    let b = x_ref.map(|z| z.norm() / peak);
    let win = gaussian_window(11, 1.5);
    let mu_a = separable_filter(&a, &win);
    let mu_b = separable_filter(&b, &win);
    let aa = separable_filter(&(&a * &a), &win);
    let bb = separable_filter(&(&b * &b), &win);
    let ab = separable_filter(&(&a * &b), &win);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (mut sum, mut n) = (0.0, 0usize);
    for (idx, &ma) in mu_a.indexed_iter() {
        if mask.is_some_and(|m| !m[idx]) {
            continue;
        }
        let mb = mu_b[idx];
        let va = aa[idx] - ma * ma;
        let vb = bb[idx] - mb * mb;
        let cov = ab[idx] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        n += 1;
    }
    if n == 0 {
        return Err(Error::arg("SSIM mask is empty"));
    }
    Ok(sum / n as f64)
}

/// 15x15 Laplacian of Gaussian with sigma 1.5, shifted to zero sum.
pub fn log_kernel() -> Array2<f64> {
    let (size, sigma) = (15usize, 1.5f64);
    let c = (size / 2) as f64;
    let s2 = sigma * sigma;
    let g = Array2::from_shape_fn((size, size), |(i, j)| {
        let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
        (-r2 / (2.0 * s2)).exp()
    });
    let gs = g.sum();
    let mut k = Array2::from_shape_fn((size, size), |(i, j)| {
        let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
        g[[i, j]] * (r2 - 2.0 * s2) / (s2 * s2 * gs)
    });
    let mean = k.mean().expect("kernel is nonempty");
    k.mapv_inplace(|v| v - mean);
    k
}

fn circular_filter(x: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
    let (h, w) = x.dim();
    let (kh, kw) = k.dim();
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut acc = 0.0;
        for ((a, b), &kv) in k.indexed_iter() {
            let ii = (i as isize - a as isize + ch).rem_euclid(h as isize) as usize;
            let jj = (j as isize - b as isize + cw).rem_euclid(w as isize) as usize;
            acc += kv * x[[ii, jj]];
        }
        acc
    })
}

/// `||LoG * (|x_hat| - |x_ref|)||_2 / ||x_ref||_2`, circular convolution over
/// the whole image.
pub fn hfen(x_hat: &ArrayView2<C64>, x_ref: &ArrayView2<C64>) -> Result<f64> {
    check_pair(x_hat, x_ref, None)?;
    let norm_ref = x_ref.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm_ref > 0.0) {
        return Err(Error::arg("reference is identically zero"));
    }
    let diff = Array2::from_shape_fn(x_hat.dim(), |idx| x_hat[idx].norm() - x_ref[idx].norm());
    let f = circular_filter(&diff, &log_kernel());
    Ok(f.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_ref)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmse_db: f64,
    pub ssim: f64,
    pub hfen: f64,
    /// Fraction of pixels inside the support mask.
    pub mask_fraction: f64,
}

/// NMSE and SSIM inside the 5% support of `x_ref`, HFEN over the full image.
pub fn evaluate(x_hat: &ArrayView2<C64>, x_ref: &ArrayView2<C64>) -> Result<MetricsReport> {
    let support = support_mask(x_ref, DEFAULT_SUPPORT_FRACTION);
    let report = MetricsReport {
        nmse_db: nmse(x_hat, x_ref, Some(&support))?,
        ssim: ssim(x_hat, x_ref, Some(&support))?,
        hfen: hfen(x_hat, x_ref)?,
        mask_fraction: support.iter().filter(|&&b| b).count() as f64 / support.len() as f64,
    };
    if !(report.nmse_db.is_finite() && report.ssim.is_finite() && report.hfen.is_finite()) {
        return Err(Error::NonFinite("metrics"));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeBounds {
    /// Allowed `|var(Re eta) - 0.5|` and `|var(Im eta) - 0.5|`.
    pub var_tol: f64,
    /// Allowed `|excess kurtosis|` of the real and imaginary parts.
    pub kurt_tol: f64,
}

impl SeBounds {
    pub const STRICT: SeBounds = SeBounds { var_tol: 0.05, kurt_tol: 0.3 };
    pub const RELAXED: SeBounds = SeBounds { var_tol: 0.1, kurt_tol: 0.5 };
}

impl Default for SeBounds {
    fn default() -> Self {
        Self::STRICT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub n: usize,
    pub var_re: f64,
    pub var_im: f64,
    pub kurt_re: f64,
    pub kurt_im: f64,
    pub mean_re: f64,
    pub mean_im: f64,
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { f64::NAN };
    (mean, m2, kurt)
}

impl MomentStats {
    pub fn of(samples: &[C64]) -> Self {
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let (mean_re, var_re, kurt_re) = moments(&re);
        let (mean_im, var_im, kurt_im) = moments(&im);
        Self { n: samples.len(), var_re, var_im, kurt_re, kurt_im, mean_re, mean_im }
    }

    /// NaN statistics (empty or constant samples) fail.
    pub fn passes(&self, b: &SeBounds) -> bool {
        self.n > 0
            && (self.var_re - 0.5).abs() <= b.var_tol
            && (self.var_im - 0.5).abs() <= b.var_tol
            && self.kurt_re.abs() <= b.kurt_tol
            && self.kurt_im.abs() <= b.kurt_tol
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandGaussianity {
    pub band: usize,
    pub stats: MomentStats,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationGaussianity {
    pub k: usize,
    /// All coefficients above the tau floor pooled together; this decides
    /// `pass`.
    pub pooled: MomentStats,
    pub pass: bool,
    pub bands: Vec<BandGaussianity>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub bounds: SeBounds,
    pub iterations: Vec<IterationGaussianity>,
    pub pass: bool,
}

/// Moment checks on normalized residuals, one entry of `etas` per
/// iteration; `None` marks coefficients excluded by the tau floor.
pub fn se_report(etas: &[Vec<Option<C64>>], map: &SubbandMap, bounds: SeBounds) -> Result<GaussianityReport> {
    let mut iterations = Vec::with_capacity(etas.len());
    for (k, eta) in etas.iter().enumerate() {
        if eta.len() != map.len() {
            return Err(Error::shape("eta length does not match the subband map"));
        }
        let pooled_samples: Vec<C64> = eta.iter().flatten().copied().collect();
        let pooled = MomentStats::of(&pooled_samples);
        let bands = map
            .bands()
            .iter()
            .map(|b| {
                let s: Vec<C64> = eta[b.range.clone()].iter().flatten().copied().collect();
                let stats = MomentStats::of(&s);
                BandGaussianity { band: b.id, pass: stats.passes(&bounds), stats }
            })
            .collect();
        iterations.push(IterationGaussianity { k, pass: pooled.passes(&bounds), pooled, bands });
    }
    let pass = !iterations.is_empty() && iterations.iter().all(|i| i.pass);
    Ok(GaussianityReport { bounds, iterations, pass })
}

/// `se_report` on the `(r_k, tau_k)` snapshots of a solve against `Psi x0`.
pub fn se_report_from_snapshots(snapshots: &[Snapshot], w_true: &WaveletCoeffs, bounds: SeBounds) -> Result<GaussianityReport> {
    let etas: Vec<Vec<Option<C64>>> = snapshots
        .iter()
        .map(|s| {
            if s.r.data.len() != w_true.data.len() {
                return Err(Error::shape("snapshot and reference coefficients differ in length"));
            }
            Ok(normalized_residual(&s.r, w_true, &s.tau))
        })
        .collect::<Result<_>>()?;
    se_report(&etas, &w_true.map, bounds)
}

/// One CSV row per iteration: `k,mean_tau,nmse_db,elapsed_s`.
pub fn trace_csv(trace: &IterateTrace) -> String {
    let mut out = String::from("k,mean_tau,nmse_db,elapsed_s\n");
    for r in &trace.records {
        let nmse = r.nmse_db.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.k, r.mean_tau, nmse, r.elapsed_s));
    }
    out
}
