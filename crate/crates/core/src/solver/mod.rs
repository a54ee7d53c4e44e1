//! Reconstruction algorithms: P-VDAMP and the FISTA-family baselines.

mod fista;
mod pvdamp;
mod sure_it;

use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::aliasing::TauMap;
use crate::array::{ComplexImage, C64};
use crate::coil::CoilSet;
use crate::denoise::{DenoiserConfig, ThresholdMode};
use crate::error::{Error, Result};
use crate::eval;
use crate::sampling::{DensityMap, SamplingMask};
use crate::wavelet::{WaveletCoeffs, DEFAULT_LEVELS};

pub use fista::{default_lambda_grid, fista, fista_traced, fista_objective, tune_fista_lambda, LambdaSweep};
pub use pvdamp::{pvdamp, pvdamp_traced, zero_filled};
pub use sure_it::{mad_variance, sure_it, sure_it_traced};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Denoised estimate followed by one plain data-consistency gradient step.
    #[default]
    Pvdamp,
    /// The unbiased estimate `Psi^H r`.
    Unbiased,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub eps_stop: f64,
    pub max_iters: usize,
    pub levels: usize,
    pub output_mode: OutputMode,
    pub denoiser: DenoiserConfig,
    /// FISTA only: reject steps that increase the objective.
    pub monotone: bool,
}

impl SolverConfig {
    pub fn pvdamp() -> Self {
        Self {
            rho: 0.75,
            eps_stop: 1e-3,
            max_iters: 50,
            levels: DEFAULT_LEVELS,
            output_mode: OutputMode::Pvdamp,
            denoiser: DenoiserConfig::default(),
            monotone: false,
        }
    }

    pub fn fista() -> Self {
        Self { max_iters: 200, eps_stop: 1e-4, ..Self::pvdamp() }
    }

    pub fn with_denoiser_mode(mut self, mode: ThresholdMode) -> Self {
        self.denoiser.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::arg(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::arg("eps_stop must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::pvdamp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TauRise,
    TauPlateau,
    /// FISTA family: relative iterate change fell below `eps_stop`.
    IterateChange,
    MaxIters,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Mean of the aliasing variance (P-VDAMP) or white variance estimate
    /// (SURE-IT); zero for FISTA.
    pub mean_tau: f64,
    pub band_tau: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha: Vec<f64>,
    pub csure: Vec<f64>,
    pub nmse_db: Option<f64>,
    pub elapsed_s: f64,
}

/// Intermediate `r_k` and `tau_k`, kept for state-evolution diagnostics.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub r: WaveletCoeffs,
    pub tau: TauMap,
}

#[derive(Clone, Debug, Default)]
pub struct IterateTrace {
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl IterateTrace {
    pub fn mean_tau(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_tau).collect()
    }

    pub fn nmse_db(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.nmse_db).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ReconResult {
    pub x_hat: ComplexImage,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub trace: IterateTrace,
}

/// Extra bookkeeping requested by the caller.
#[derive(Clone, Debug, Default)]
pub struct TraceOptions {
    /// Ground truth for per-iteration NMSE.
    pub reference: Option<Array2<C64>>,
    pub keep_snapshots: bool,
}

impl TraceOptions {
    pub fn with_reference(reference: &ComplexImage) -> Self {
        Self { reference: Some(reference.as_array().clone()), keep_snapshots: false }
    }

    fn nmse(&self, x: impl FnOnce() -> Result<Array2<C64>>) -> Result<Option<f64>> {
        match &self.reference {
            None => Ok(None),
            Some(r) => {
                let support = eval::support_mask(&r.view(), eval::DEFAULT_SUPPORT_FRACTION);
                Ok(Some(eval::nmse(&x()?.view(), &r.view(), Some(&support))?))
            }
        }
    }
}

struct Clock(Instant);

impl Clock {
    fn start() -> Self {
        Self(Instant::now())
    }

    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn check_problem(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    reference: Option<&Array2<C64>>,
) -> Result<()> {
    let (nc, h, w) = y.dim();
    if nc != coils.n_coils() {
        return Err(Error::shape(format!("{nc} data coils vs {} sensitivity maps", coils.n_coils())));
    }
    if coils.shape() != (h, w) || mask.shape() != (h, w) {
        return Err(Error::shape("k-space, mask and coil shapes differ"));
    }
    if let Some(r) = reference {
        if r.dim() != (h, w) {
            return Err(Error::shape("reference does not match the k-space shape"));
        }
    }
    Ok(())
}

/// `m_i / p_i`, failing on sampled locations with zero probability.
pub(crate) fn inverse_density(mask: &SamplingMask, density: &DensityMap) -> Result<Array2<f64>> {
    if density.shape() != mask.shape() {
        return Err(Error::shape("density does not match mask"));
    }
    let (_, w) = mask.shape();
    let mut out = Array2::zeros(mask.shape());
    for ((i, j), &m) in mask.m.indexed_iter() {
        if m != 0.0 {
            let p = density.p[[i, j]];
            if !(p > 0.0) {
                return Err(Error::ZeroDensity { index: i * w + j });
            }
            out[[i, j]] = m / p;
        }
    }
    Ok(out)
}

/// `y - M F S x` per coil.
pub(crate) fn residual(y: &ArrayView3<C64>, x: &ArrayView2<C64>, coils: &CoilSet, mask: &SamplingMask) -> Array3<C64> {
    let mut z = crate::coil::forward_masked(x, coils, &mask.m);
    z.zip_mut_with(y, |a, &b| *a = b - *a);
    z
}

/// `(w_hat - alpha_b r) / (1 - alpha_b)` per band.
pub(crate) fn onsager(w_hat: &WaveletCoeffs, r: &WaveletCoeffs, alpha: &[f64], one_minus_alpha: &[f64]) -> WaveletCoeffs {
    let mut out = w_hat.clone();
    for (b, band) in r.map.bands().iter().enumerate() {
        let (a, s) = (alpha[b], one_minus_alpha[b]);
        for j in band.range.clone() {
            out.data[j] = (w_hat.data[j] - r.data[j] * a) / s;
        }
    }
    out
}
