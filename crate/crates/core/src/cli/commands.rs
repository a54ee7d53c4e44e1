use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Ix2, Ix3};
use serde_json::json;

use super::manifest::{Artifact, RunManifest};
use super::trace_io::{read_trace, write_trace};
use super::{
    AcquireArgs, Algo, BoundsArg, CoilsArgs, EvaluateArgs, MaskArgs, PhantomArgs, ReconstructArgs, SeCheckArgs,
    SolverArgs,
};
use crate::aliasing::NoiseCov;
use crate::array::{ComplexImage, C64};
use crate::coil::{normalize_sensitivities, simulate_sensitivities_with, CoilSet, SensitivityConfig};
use crate::data::{acquire as simulate_acquisition, make_noise_cov, try_make_phantom};
use crate::error::{Error, Result};
use crate::eval::{self, SeBounds};
use crate::io::{load_complex, load_real, save_complex, save_real};
use crate::sampling::{draw_mask, make_density_with, DensityConfig, DensityMap, SamplingMask};
use crate::solver::{
    fista_traced, pvdamp_traced, sure_it_traced, tune_fista_lambda, OutputMode, ReconResult, SolverConfig,
    TraceOptions,
};
use crate::wavelet::dwt2;

pub(super) fn pair(v: &[usize], what: &str) -> Result<(usize, usize)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidArgument(format!("{what} needs two values"))),
    }
}

fn dims<D: ndarray::Dimension>(a: ndarray::ArrayD<C64>, what: &str) -> Result<ndarray::Array<C64, D>> {
    a.into_dimensionality::<D>().map_err(|_| Error::Shape(format!("{what} has the wrong number of axes")))
}

pub(super) fn load_image(path: &Path) -> Result<ComplexImage> {
    ComplexImage::new(dims::<Ix2>(load_complex(path)?, "image")?)
}

pub(super) fn load_coils(path: &Path) -> Result<CoilSet> {
    normalize_sensitivities(dims::<Ix3>(load_complex(path)?, "coil maps")?)
}

fn load_real2(path: &Path, what: &str) -> Result<Array2<f64>> {
    load_real(path)?.into_dimensionality::<Ix2>().map_err(|_| Error::Shape(format!("{what} must be 2-D")))
}

pub(super) fn load_mask(path: &Path) -> Result<SamplingMask> {
    SamplingMask::from_values(load_real2(path, "mask")?, 0)
}

fn noise_path(y: &Path) -> PathBuf {
    let mut s = y.with_extension("").into_os_string();
    if y.extension().and_then(|e| e.to_str()).is_some_and(|e| e != "json" && e != "bin") {
        s = y.as_os_str().to_owned();
    }
    s.push(".noise");
    s.into()
}

/// Covariance as `(N_c, N_c, 2)` float64.
fn save_noise(path: &Path, cov: &NoiseCov) -> Result<()> {
    match cov {
        NoiseCov::Shared(m) => {
            let n = m.nrows();
            let packed = Array3::from_shape_fn((n, n, 2), |(a, b, k)| if k == 0 { m[[a, b]].re } else { m[[a, b]].im });
            save_real(path, &packed)
        }
        NoiseCov::PerLocation(_) => Err(Error::InvalidArgument("per-location covariance cannot be saved".into())),
    }
}

fn load_noise(path: &Path) -> Result<NoiseCov> {
    let a = load_real(path)?.into_dimensionality::<Ix3>().map_err(|_| Error::Shape("noise covariance must be (Nc, Nc, 2)".into()))?;
    let (n, m, two) = a.dim();
    if n != m || two != 2 {
        return Err(Error::Shape("noise covariance must be (Nc, Nc, 2)".into()));
    }
    NoiseCov::shared(Array2::from_shape_fn((n, n), |(i, j)| C64::new(a[[i, j, 0]], a[[i, j, 1]])))
}

fn finish(command: &str, config: serde_json::Value, inputs: &[Artifact], outputs: &[Artifact], primary: &Path) -> Result<()> {
    let m = RunManifest::new(command, config, inputs, outputs)?;
    let path = m.write(primary)?;
    eprintln!("wrote {} (manifest {})", primary.display(), path.display());
    Ok(())
}

pub(super) fn phantom(a: PhantomArgs) -> Result<()> {
    let shape = pair(&a.shape, "--shape")?;
    let p = try_make_phantom(shape, a.seed, a.kind.into())?;
    save_complex(&a.out, p.x0.as_array())?;
    let mut desc = a.out.clone().into_os_string();
    desc.push(".descriptor.json");
    let desc = PathBuf::from(desc);
    fs::write(&desc, serde_json::to_vec_pretty(&p.descriptor)?)?;
    let config = json!({ "shape": shape, "kind": p.descriptor.kind, "seed": a.seed });
    finish("phantom", config, &[], &[Artifact::Array(a.out.clone()), Artifact::File(desc)], &a.out)
}

pub(super) fn coils(a: CoilsArgs) -> Result<()> {
    let shape = pair(&a.shape, "--shape")?;
    let cfg = SensitivityConfig { n_coils: a.n_coils, width: a.width, phase_strength: a.phase_strength, seed: a.seed };
    let coils = simulate_sensitivities_with(shape, &cfg)?;
    save_complex(&a.out, coils.as_array())?;
    finish("coils", json!({ "shape": shape, "coils": cfg }), &[], &[Artifact::Array(a.out.clone())], &a.out)
}

pub(super) fn mask(a: MaskArgs) -> Result<()> {
    let shape = pair(&a.shape, "--shape")?;
    let calib = pair(&a.calib, "--calib")?;
    let cfg = DensityConfig { decay: a.decay, p_min: a.p_min, mode: a.mode.into(), ..DensityConfig::new(shape, a.accel, calib) };
    let density = make_density_with(&cfg)?;
    let mask = draw_mask(&density, a.seed);
    save_real(&a.out, &mask.m)?;
    save_real(&a.density_out, &density.p)?;
    let config = json!({
        "density": cfg,
        "seed": a.seed,
        "expected_samples": density.expected_samples(),
        "realized_samples": mask.count(),
    });
    finish("mask", config, &[], &[Artifact::Array(a.out.clone()), Artifact::Array(a.density_out.clone())], &a.out)
}

pub(super) fn acquire(a: AcquireArgs) -> Result<()> {
    let x0 = load_image(&a.x0)?;
    let coils = load_coils(&a.coils)?;
    let mask = load_mask(&a.mask)?;
    let noise = make_noise_cov(&x0, &coils, a.snr_db, a.seed, a.noise_mode.into())?;
    let y = simulate_acquisition(&x0, &coils, &mask, &noise.cov, a.seed.wrapping_add(1))?;
    save_complex(&a.out, y.as_array())?;
    let npath = noise_path(&a.out);
    save_noise(&npath, &noise.cov)?;
    let config = json!({ "snr_db": a.snr_db, "seed": a.seed, "noise_mode": noise.mode, "per_coil_noise_power": noise.c2 });
    let inputs = [Artifact::Array(a.x0), Artifact::Array(a.coils), Artifact::Array(a.mask)];
    finish("acquire", config, &inputs, &[Artifact::Array(a.out.clone()), Artifact::Array(npath)], &a.out)
}

pub(super) fn solver_config(algo: Algo, s: &SolverArgs) -> SolverConfig {
    let base = match algo {
        Algo::Pvdamp | Algo::PvdampUnbiased => SolverConfig { rho: s.rho, ..SolverConfig::pvdamp() },
        _ => SolverConfig { monotone: s.monotone, ..SolverConfig::fista() },
    };
    let mut cfg = SolverConfig { levels: s.levels, ..base }.with_denoiser_mode(s.threshold_mode.into());
    if let Some(k) = s.max_iters {
        cfg.max_iters = k;
    }
    if let Some(e) = s.eps {
        cfg.eps_stop = e;
    }
    if algo == Algo::PvdampUnbiased {
        cfg.output_mode = OutputMode::Unbiased;
    }
    cfg
}

pub(super) struct Problem<'a> {
    pub y: &'a ndarray::Array3<C64>,
    pub mask: &'a SamplingMask,
    pub density: Option<&'a DensityMap>,
    pub coils: &'a CoilSet,
    pub noise: &'a NoiseCov,
    pub reference: Option<&'a ComplexImage>,
}

pub(super) struct Solved {
    pub result: ReconResult,
    pub lambda: Option<f64>,
    pub curve: Option<Vec<(f64, f64)>>,
}

pub(super) fn solve(algo: Algo, p: &Problem, lambda: Option<f64>, cfg: &SolverConfig, keep_snapshots: bool) -> Result<Solved> {
    let opts = TraceOptions { reference: p.reference.map(|r| r.as_array().clone()), keep_snapshots };
    let y = p.y.view();
    let need = |what: &str| Error::InvalidArgument(format!("{} requires {what}", algo.name()));
    let plain = |result| Solved { result, lambda: None, curve: None };
    Ok(match algo {
        Algo::Pvdamp | Algo::PvdampUnbiased => {
            let density = p.density.ok_or_else(|| need("a density map"))?;
            plain(pvdamp_traced(&y, p.mask, density, p.coils, p.noise, cfg, &opts)?)
        }
        Algo::Fista => {
            let lambda = lambda.ok_or_else(|| need("--lambda"))?;
            Solved { result: fista_traced(&y, p.mask, p.coils, lambda, cfg, &opts)?, lambda: Some(lambda), curve: None }
        }
        Algo::FistaOpt => {
            let reference = p.reference.ok_or_else(|| need("--ref"))?;
            let sweep = tune_fista_lambda(&y, p.mask, p.coils, reference, None, cfg)?;
            let result = fista_traced(&y, p.mask, p.coils, sweep.lambda_star, cfg, &opts)?;
            Solved { result, lambda: Some(sweep.lambda_star), curve: Some(sweep.curve) }
        }
        Algo::SureIt => plain(sure_it_traced(&y, p.mask, p.coils, cfg, &opts)?),
    })
}

pub(super) fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let y = dims::<Ix3>(load_complex(&a.y)?, "k-space")?;
    let mask = load_mask(&a.mask)?;
    let coils = load_coils(&a.coils)?;
    let density = match &a.density {
        Some(p) => Some(DensityMap::from_probabilities(load_real2(p, "density")?)?),
        None => None,
    };
    let noise_file = a.noise.clone().or_else(|| {
        let p = noise_path(&a.y);
        crate::io::file_pair(&p).0.exists().then_some(p)
    });
    let noise = match &noise_file {
        Some(p) => load_noise(p)?,
        None => {
            if matches!(a.algo, Algo::Pvdamp | Algo::PvdampUnbiased) {
                eprintln!("warning: no noise covariance found; assuming noiseless data");
            }
            NoiseCov::zeros(y.dim().0)
        }
    };
    let reference = match &a.reference {
        Some(p) => Some(load_image(p)?),
        None => None,
    };
    let cfg = solver_config(a.algo, &a.solver);
    let problem = Problem { y: &y, mask: &mask, density: density.as_ref(), coils: &coils, noise: &noise, reference: reference.as_ref() };
    let keep = a.trace.is_some() && matches!(a.algo, Algo::Pvdamp | Algo::PvdampUnbiased);
    let solved = solve(a.algo, &problem, a.lambda, &cfg, keep)?;

    save_complex(&a.out, solved.result.x_hat.as_array())?;
    let mut outputs = vec![Artifact::Array(a.out.clone())];
    if let Some(t) = &a.trace {
        outputs.extend(write_trace(t, a.algo.name(), cfg.levels, &solved.result)?.into_iter().map(Artifact::File));
    }
    let mut inputs = vec![Artifact::Array(a.y.clone()), Artifact::Array(a.mask.clone()), Artifact::Array(a.coils.clone())];
    inputs.extend(a.density.iter().chain(&noise_file).chain(&a.reference).cloned().map(Artifact::Array));
    let config = json!({
        "algo": a.algo.name(),
        "solver": cfg,
        "lambda": solved.lambda,
        "lambda_curve": solved.curve,
        "iterations_run": solved.result.iterations_run,
        "stop_reason": solved.result.stop_reason,
        "final_nmse_db": solved.result.trace.records.last().and_then(|r| r.nmse_db),
    });
    finish("reconstruct", config, &inputs, &outputs, &a.out)
}

pub(super) fn evaluate(a: EvaluateArgs) -> Result<()> {
    let x_hat = load_image(&a.xhat)?;
    let x_ref = load_image(&a.reference)?;
    let report = eval::evaluate(&x_hat.view(), &x_ref.view())?;
    fs::write(&a.out, serde_json::to_vec_pretty(&report)?)?;
    println!("{}", serde_json::to_string(&report)?);
    let inputs = [Artifact::Array(a.xhat), Artifact::Array(a.reference)];
    finish("evaluate", json!({}), &inputs, &[Artifact::File(a.out.clone())], &a.out)
}

pub(super) fn se_check(a: SeCheckArgs) -> Result<()> {
    let trace = read_trace(&a.trace)?;
    if trace.snapshots.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no snapshots (only P-VDAMP traces carry them)", a.trace.display())));
    }
    let x0 = load_image(&a.reference)?;
    let w_true = dwt2(&x0.view(), trace.map.levels())?;
    let bounds = match a.bounds {
        BoundsArg::Strict => SeBounds::STRICT,
        BoundsArg::Relaxed => SeBounds::RELAXED,
    };
    let report = eval::se_report_from_snapshots(&trace.snapshots, &w_true, bounds)?;
    fs::write(&a.out, serde_json::to_vec_pretty(&report)?)?;
    println!("state evolution {} over {} iterations", if report.pass { "holds" } else { "fails" }, report.iterations.len());
    let inputs = [Artifact::File(a.trace), Artifact::Array(a.reference)];
    finish("se-check", json!({ "bounds": bounds, "algo": trace.algo }), &inputs, &[Artifact::File(a.out.clone())], &a.out)
}
