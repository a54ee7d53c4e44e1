use std::sync::Arc;

use ndarray::{Array2, ArrayView3};

use super::{check_problem, residual, Clock, IterateTrace, IterationRecord, ReconResult, SolverConfig, StopReason, TraceOptions};
use crate::aliasing::TauMap;
use crate::array::{norm2, ComplexImage, C64};
use crate::coil::{adjoint_weighted, CoilSet};
use crate::denoise::denoise;
use crate::error::{Error, Result};
use crate::sampling::SamplingMask;
use crate::wavelet::{dwt2_with, idwt2, Orientation, SubbandMap, WaveletCoeffs};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mad(v: &[f64]) -> f64 {
    let m = median(v.to_vec());
    median(v.iter().map(|x| (x - m).abs()).collect())
}

/// Complex noise variance from the finest diagonal band:
/// `(MAD(Re)/0.6745)^2 + (MAD(Im)/0.6745)^2`.
pub fn mad_variance(w: &WaveletCoeffs) -> f64 {
    let band = w
        .map
        .bands()
        .iter()
        .find(|b| b.scale == 1 && b.orientation == Orientation::HH)
        .expect("every map has a finest diagonal band");
    let vals = &w.data[band.range.clone()];
    let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
    let im: Vec<f64> = vals.iter().map(|v| v.im).collect();
    (mad(&re) / 0.6745).powi(2) + (mad(&im) / 0.6745).powi(2)
}

pub fn sure_it(y: &ArrayView3<C64>, mask: &SamplingMask, coils: &CoilSet, cfg: &SolverConfig) -> Result<ReconResult> {
    sure_it_traced(y, mask, coils, cfg, &TraceOptions::default())
}

/// FISTA-style iteration whose per-band thresholds are tuned by cSURE under a
/// white error model with one variance for all coefficients.
pub fn sure_it_traced(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    cfg: &SolverConfig,
    opts: &TraceOptions,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_problem(y, mask, coils, opts.reference.as_ref())?;
    let clock = Clock::start();
    let map = Arc::new(SubbandMap::new(coils.shape(), cfg.levels)?);

    let mut x: Array2<C64> = Array2::zeros(coils.shape());
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut trace = IterateTrace::default();
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        let z = residual(y, &v.view(), coils, mask);
        let g = dwt2_with(&(v + adjoint_weighted(&z.view(), coils, None)).view(), &map);
        let sigma2 = mad_variance(&g);
        let tau = TauMap { tau: vec![sigma2; map.len()], map: map.clone(), clamped: 0 };
        let den = denoise(&g, &tau, &cfg.denoiser)?;
        let next = idwt2(&den.w_hat)?;
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("SURE-IT iterate"));
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &next + &((&next - &x) * C64::from((t - 1.0) / t_next));
        let step = norm2((&next - &x).iter());
        let change = if step == 0.0 { 0.0 } else { step / norm2(x.iter()) };
        t = t_next;
        x = next;

        let nmse_db = opts.nmse(|| Ok(x.clone()))?;
        trace.records.push(IterationRecord {
            k,
            mean_tau: sigma2,
            band_tau: vec![sigma2; map.n_bands()],
            t: den.thresholds.t,
            alpha: den.alpha,
            csure: den.csure,
            nmse_db,
            elapsed_s: clock.elapsed(),
        });
        if change < cfg.eps_stop {
            stop = StopReason::IterateChange;
            break;
        }
    }

    Ok(ReconResult { x_hat: ComplexImage::new(x)?, iterations_run: trace.records.len(), stop_reason: stop, trace })
}
