use std::sync::Arc;

use ndarray::{Array2, ArrayView3};

use super::{
    check_problem, inverse_density, onsager, residual, Clock, IterateTrace, IterationRecord, OutputMode, ReconResult,
    Snapshot, SolverConfig, StopReason, TraceOptions,
};
use crate::aliasing::{AliasingModel, NoiseCov};
use crate::array::{ComplexImage, C64};
use crate::coil::{adjoint_weighted, CoilSet};
use crate::denoise::denoise;
use crate::error::{Error, Result};
use crate::sampling::{DensityMap, SamplingMask};
use crate::wavelet::{dwt2_with, idwt2, SubbandMap, WaveletCoeffs};

/// Density-compensated coil-combined estimate `sum_c S_c^H F^H P^-1 y_c`.
pub fn zero_filled(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    density: &DensityMap,
    coils: &CoilSet,
) -> Result<ComplexImage> {
    check_problem(y, mask, coils, None)?;
    let inv = inverse_density(mask, density)?;
    ComplexImage::new(adjoint_weighted(y, coils, Some(&inv)))
}

pub fn pvdamp(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    density: &DensityMap,
    coils: &CoilSet,
    noise: &NoiseCov,
    cfg: &SolverConfig,
) -> Result<ReconResult> {
    pvdamp_traced(y, mask, density, coils, noise, cfg, &TraceOptions::default())
}

struct State {
    r: WaveletCoeffs,
    w_hat: WaveletCoeffs,
}

pub fn pvdamp_traced(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    density: &DensityMap,
    coils: &CoilSet,
    noise: &NoiseCov,
    cfg: &SolverConfig,
    opts: &TraceOptions,
) -> Result<ReconResult> {
    cfg.validate()?;
    check_problem(y, mask, coils, opts.reference.as_ref())?;
    if noise.n_coils() != coils.n_coils() {
        return Err(Error::shape("noise covariance coil count does not match k-space"));
    }
    let clock = Clock::start();
    let inv = inverse_density(mask, density)?;
    let map = Arc::new(SubbandMap::new(coils.shape(), cfg.levels)?);
    let model = AliasingModel::new(coils, &map)?;

    let output = |s: &State| -> Result<Array2<C64>> {
        match cfg.output_mode {
            OutputMode::Unbiased => idwt2(&s.r),
            OutputMode::Pvdamp => {
                let x = idwt2(&s.w_hat)?;
                let z = residual(y, &x.view(), coils, mask);
                Ok(x + adjoint_weighted(&z.view(), coils, None))
            }
        }
    };

    let mut trace = IterateTrace::default();
    let mut r_tilde = WaveletCoeffs::zeros(map.clone());
    let mut prev: Option<State> = None;
    let mut prev_tau = f64::NAN;
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        let x_tilde = idwt2(&r_tilde)?;
        let z = residual(y, &x_tilde.view(), coils, mask);
        let grad = dwt2_with(&adjoint_weighted(&z.view(), coils, Some(&inv)).view(), &map);
        let mut r = r_tilde;
        r.data.iter_mut().zip(&grad.data).for_each(|(a, b)| *a += b);
        let tau = model.tau_update(&z.view(), mask, density, noise)?;
        let mean_tau = tau.mean();
        if !mean_tau.is_finite() || r.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("P-VDAMP iterate"));
        }

        if k > 0 && mean_tau > prev_tau {
            stop = StopReason::TauRise;
            break;
        }

        let den = denoise(&r, &tau, &cfg.denoiser)?;
        let (w_hat, alpha, one_minus_alpha) = match &prev {
            Some(p) if k > 0 => {
                let rho = cfg.rho;
                let mut w = den.w_hat;
                w.data.iter_mut().zip(&p.w_hat.data).for_each(|(g, old)| *g = *g * rho + *old * (1.0 - rho));
                let alpha: Vec<f64> = den.alpha.iter().map(|a| rho * a).collect();
                let slack: Vec<f64> = den.one_minus_alpha.iter().map(|s| (1.0 - rho) + rho * s).collect();
                (w, alpha, slack)
            }
            _ => (den.w_hat, den.alpha, den.one_minus_alpha),
        };

        let state = State { r, w_hat };
        let nmse_db = opts.nmse(|| output(&state))?;
        trace.records.push(IterationRecord {
            k,
            mean_tau,
            band_tau: tau.band_means(),
            t: den.thresholds.t,
            alpha: alpha.clone(),
            csure: den.csure,
            nmse_db,
            elapsed_s: clock.elapsed(),
        });
        if opts.keep_snapshots {
            trace.snapshots.push(Snapshot { r: state.r.clone(), tau });
        }

        let plateau = mean_tau == 0.0 || (k > 0 && (mean_tau - prev_tau).abs() / prev_tau < cfg.eps_stop);
        if plateau {
            prev = Some(state);
            stop = StopReason::TauPlateau;
            break;
        }
        if let Some((band, &s)) = one_minus_alpha.iter().enumerate().find(|(_, &s)| s <= 1e-9) {
            return Err(Error::OnsagerDegenerate { band, alpha: 1.0 - s });
        }
        r_tilde = onsager(&state.w_hat, &state.r, &alpha, &one_minus_alpha);
        prev = Some(state);
        prev_tau = mean_tau;
    }

    let last = prev.expect("max_iters >= 1 and k = 0 never stops on a rise");
    Ok(ReconResult {
        x_hat: ComplexImage::new(output(&last)?)?,
        iterations_run: trace.records.len(),
        stop_reason: stop,
        trace,
    })
}
