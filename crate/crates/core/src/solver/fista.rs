use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayView3};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_problem, residual, Clock, IterateTrace, IterationRecord, ReconResult, SolverConfig, StopReason, TraceOptions};
use crate::array::{norm2, ComplexImage, C64};
use crate::coil::{adjoint_weighted, CoilSet};
use crate::denoise::soft_threshold;
use crate::error::{Error, Result};
use crate::eval;
use crate::sampling::SamplingMask;
use crate::wavelet::{dwt2_with, idwt2, SubbandMap};

/// `1/2 sum_c ||y_c - M F S_c x||^2 + lambda ||Psi x||_1`.
pub fn fista_objective(
    x: &ArrayView2<C64>,
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    lambda: f64,
    levels: usize,
) -> Result<f64> {
    check_problem(y, mask, coils, None)?;
    let map = Arc::new(SubbandMap::new(coils.shape(), levels)?);
    Ok(objective(x, y, mask, coils, lambda, &map))
}

fn objective(x: &ArrayView2<C64>, y: &ArrayView3<C64>, mask: &SamplingMask, coils: &CoilSet, lambda: f64, map: &Arc<SubbandMap>) -> f64 {
    let z = residual(y, x, coils, mask);
    let l1: f64 = dwt2_with(x, map).data.iter().map(|v| v.norm()).sum();
    0.5 * norm2(z.iter()).powi(2) + lambda * l1
}

pub fn fista(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<ReconResult> {
    fista_traced(y, mask, coils, lambda, cfg, &TraceOptions::default())
}

pub fn fista_traced(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    lambda: f64,
    cfg: &SolverConfig,
    opts: &TraceOptions,
) -> Result<ReconResult> {
    cfg.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::arg(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    check_problem(y, mask, coils, opts.reference.as_ref())?;
    let clock = Clock::start();
    let map = Arc::new(SubbandMap::new(coils.shape(), cfg.levels)?);
    let lambdas = vec![lambda; map.len()];

    let mut x: Array2<C64> = Array2::zeros(coils.shape());
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut f_x = cfg.monotone.then(|| objective(&x.view(), y, mask, coils, lambda, &map));
    let mut trace = IterateTrace::default();
    let mut stop = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        let z = residual(y, &v.view(), coils, mask);
        let g = v + adjoint_weighted(&z.view(), coils, None);
        let shrunk = soft_threshold(&dwt2_with(&g.view(), &map), &lambdas)?;
        let candidate = idwt2(&shrunk.w_hat)?;

        let next = match f_x {
            Some(f_old) => {
                let f_new = objective(&candidate.view(), y, mask, coils, lambda, &map);
                if f_new <= f_old {
                    f_x = Some(f_new);
                    candidate.clone()
                } else {
                    x.clone()
                }
            }
            None => candidate.clone(),
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &next + &((&candidate - &next) * C64::from(t / t_next)) + &((&next - &x) * C64::from((t - 1.0) / t_next));

        let step = norm2((&candidate - &x).iter());
        let base = norm2(x.iter());
        let change = if step == 0.0 { 0.0 } else { step / base };
        t = t_next;
        x = next;
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("FISTA iterate"));
        }

        let nmse_db = opts.nmse(|| Ok(x.clone()))?;
        trace.records.push(IterationRecord {
            k,
            mean_tau: 0.0,
            band_tau: Vec::new(),
            t: vec![lambda; map.n_bands()],
            alpha: map.band_means(&shrunk.div),
            csure: Vec::new(),
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

const GRID_POINTS: usize = 21;
const GRID_DECADES: f64 = 5.0;

/// Log-spaced values spanning five decades below the largest wavelet
/// magnitude of `A^H y`, above which the solution is zero.
pub fn default_lambda_grid(y: &ArrayView3<C64>, coils: &CoilSet, levels: usize) -> Result<Vec<f64>> {
    let map = Arc::new(SubbandMap::new(coils.shape(), levels)?);
    let back = adjoint_weighted(y, coils, None);
    let lambda_max = dwt2_with(&back.view(), &map).data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::arg("cannot anchor a lambda grid on all-zero data"));
    }
    Ok((0..GRID_POINTS)
        .map(|i| lambda_max * 10f64.powf(-GRID_DECADES * (1.0 - i as f64 / (GRID_POINTS - 1) as f64)))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaSweep {
    pub lambda_star: f64,
    /// `(lambda, NMSE dB)` for every grid point.
    pub curve: Vec<(f64, f64)>,
    #[serde(skip)]
    pub result: ReconResult,
}

/// Exhaustive search for the lambda that minimizes NMSE against `x_ref`.
pub fn tune_fista_lambda(
    y: &ArrayView3<C64>,
    mask: &SamplingMask,
    coils: &CoilSet,
    x_ref: &ComplexImage,
    grid: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<LambdaSweep> {
    let grid = match grid {
        Some(g) if g.is_empty() => return Err(Error::arg("lambda grid is empty")),
        Some(g) => g.to_vec(),
        None => default_lambda_grid(y, coils, cfg.levels)?,
    };
    let support = eval::support_mask(&x_ref.view(), eval::DEFAULT_SUPPORT_FRACTION);
    let runs: Vec<(f64, ReconResult)> = grid
        .par_iter()
        .map(|&lambda| {
            let res = fista(y, mask, coils, lambda, cfg)?;
            let e = eval::nmse(&res.x_hat.view(), &x_ref.view(), Some(&support))?;
            Ok((e, res))
        })
        .collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = grid.iter().zip(&runs).map(|(&l, (e, _))| (l, *e)).collect();
    let best = (0..runs.len()).fold(0, |b, i| if runs[i].0 < runs[b].0 { i } else { b });
    let result = runs.into_iter().nth(best).map(|(_, r)| r).expect("grid is nonempty");
    Ok(LambdaSweep { lambda_star: grid[best], curve, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coil::{forward, simulate_sensitivities};
    use crate::data::{make_phantom, PhantomKind};
    use crate::sampling::{draw_mask, make_density};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64) -> (ndarray::Array3<C64>, SamplingMask, CoilSet, ComplexImage) {
        let x0 = make_phantom((32, 32), seed, PhantomKind::Ellipses).x0;
        let coils = simulate_sensitivities((32, 32), 3, 0.4, seed).unwrap();
        let density = make_density((32, 32), 4.0, (6, 6), 4.0).unwrap();
        let mask = draw_mask(&density, seed);
        let y = forward(&x0.view(), &coils, &mask).unwrap();
        (y, mask, coils, x0)
    }

    #[test]
    fn zero_lambda_full_sampling_recovers_exactly() {
        let x0 = make_phantom((16, 16), 2, PhantomKind::Ellipses).x0;
        let coils = simulate_sensitivities((16, 16), 2, 0.4, 1).unwrap();
        let mask = SamplingMask::full((16, 16));
        let y = forward(&x0.view(), &coils, &mask).unwrap();
        let out = fista(&y.view(), &mask, &coils, 0.0, &SolverConfig::fista()).unwrap();
        assert!((out.x_hat.as_array() - x0.as_array()).iter().all(|d| d.norm() < 1e-8));
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let (y, mask, coils, _) = problem(3);
        let out = fista(&y.view(), &mask, &coils, 1e6, &SolverConfig::fista()).unwrap();
        assert!(out.x_hat.as_array().iter().all(|v| *v == C64::default()));
        assert!(fista(&y.view(), &mask, &coils, -1.0, &SolverConfig::fista()).is_err());
    }

    #[test]
    fn monotone_variant_never_increases_the_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut y, mask, coils, _) = problem(4);
        for mut coil in y.outer_iter_mut() {
            coil.zip_mut_with(&mask.m, |v, &m| {
                if m != 0.0 {
                    *v += C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.05;
                }
            });
        }
        let lambda = 0.01;
        let mut last = f64::INFINITY;
        for iters in [1usize, 2, 5, 10, 25, 50, 100, 200] {
            let cfg = SolverConfig { max_iters: iters, eps_stop: 1e-300, monotone: true, ..SolverConfig::fista() };
            let out = fista(&y.view(), &mask, &coils, lambda, &cfg).unwrap();
            let f = fista_objective(&out.x_hat.view(), &y.view(), &mask, &coils, lambda, cfg.levels).unwrap();
            assert!(f <= last + 1e-10, "{iters}: {f} > {last}");
            last = f;
        }
    }

    #[test]
    fn single_point_grid_returns_its_lambda() {
        let (y, mask, coils, x0) = problem(5);
        let sweep = tune_fista_lambda(&y.view(), &mask, &coils, &x0, Some(&[0.003]), &SolverConfig::fista()).unwrap();
        assert_eq!(sweep.lambda_star, 0.003);
        assert_eq!(sweep.curve.len(), 1);
    }

    #[test]
    fn tuned_lambda_is_the_grid_argmin() {
        let (y, mask, coils, x0) = problem(6);
        let cfg = SolverConfig { max_iters: 60, ..SolverConfig::fista() };
        let sweep = tune_fista_lambda(&y.view(), &mask, &coils, &x0, None, &cfg).unwrap();
        assert_eq!(sweep.curve.len(), GRID_POINTS);
        let best = sweep.curve.iter().find(|c| c.0 == sweep.lambda_star).unwrap().1;
        assert!(sweep.curve.iter().all(|c| best <= c.1));
    }
}
