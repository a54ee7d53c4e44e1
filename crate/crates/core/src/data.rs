//! Synthetic phantoms, measurement noise and simulated acquisition.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aliasing::NoiseCov;
use crate::array::{ComplexImage, MultiCoilKSpace, C64};
use crate::coil::{simulate_sensitivities_with, CoilSet, SensitivityConfig};
use crate::error::{Error, Result};
use crate::fft;
use crate::sampling::{draw_mask, make_density_with, DensityConfig, DensityMap, SamplingMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Ellipses,
    BlobsAndVessels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    pub angle: f64,
    pub intensity: f64,
}

/// Quadratic Bezier centre line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vessel {
    pub control: [[f64; 2]; 3],
    pub width_px: f64,
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomDescriptor {
    pub shape: (usize, usize),
    pub seed: u64,
    pub kind: PhantomKind,
    pub ellipses: Vec<Ellipse>,
    pub blobs: Vec<Ellipse>,
    pub vessels: Vec<Vessel>,
    /// Coefficients of `u, v, u^2, uv, v^2` in the phase map (radians).
    pub phase: [f64; 5],
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub x0: ComplexImage,
    pub descriptor: PhantomDescriptor,
}

/// Pixel centre in `[-1, 1)` coordinates, `u` along columns, `v` along rows.
fn coords(i: usize, j: usize, (h, w): (usize, usize)) -> (f64, f64) {
    ((2 * j + 1) as f64 / w as f64 - 1.0, (2 * i + 1) as f64 / h as f64 - 1.0)
}

fn inside(e: &Ellipse, u: f64, v: f64) -> f64 {
    let (s, c) = e.angle.sin_cos();
    let (du, dv) = (u - e.center[0], v - e.center[1]);
    let a = (c * du + s * dv) / e.axes[0];
    let b = (-s * du + c * dv) / e.axes[1];
    a * a + b * b
}

fn describe(shape: (usize, usize), seed: u64, kind: PhantomKind) -> PhantomDescriptor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uni = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();

    let mut ellipses = vec![
        Ellipse { center: [0.0, 0.0], axes: [0.70, 0.90], angle: 0.0, intensity: 1.0 },
        Ellipse { center: [0.0, -0.02], axes: [0.64, 0.84], angle: 0.0, intensity: -0.6 },
    ];
    for _ in 0..7 {
        let r = uni(0.0, 0.45);
        let th = uni(0.0, 2.0 * PI);
        ellipses.push(Ellipse {
            center: [r * th.cos(), r * th.sin()],
            axes: [uni(0.06, 0.25), uni(0.06, 0.25)],
            angle: uni(0.0, PI),
            intensity: if uni(0.0, 1.0) < 0.6 { uni(0.1, 0.35) } else { -uni(0.05, 0.2) },
        });
    }
    let phase = [uni(-1.0, 1.0), uni(-1.0, 1.0), uni(-0.5, 0.5), uni(-0.5, 0.5), uni(-0.5, 0.5)];

    let (mut blobs, mut vessels) = (Vec::new(), Vec::new());
    if kind == PhantomKind::BlobsAndVessels {
        for _ in 0..4 {
            let r = uni(0.0, 0.4);
            let th = uni(0.0, 2.0 * PI);
            blobs.push(Ellipse {
                center: [r * th.cos(), r * th.sin()],
                axes: [uni(0.04, 0.12), uni(0.04, 0.12)],
                angle: 0.0,
                intensity: uni(0.2, 0.4),
            });
        }
        for _ in 0..5 {
            let mut pt = || {
                let r = uni(0.0, 0.55);
                let th = uni(0.0, 2.0 * PI);
                [r * th.cos(), r * th.sin()]
            };
            let control = [pt(), pt(), pt()];
            vessels.push(Vessel { control, width_px: uni(1.0, 2.0), intensity: uni(0.6, 0.9) });
        }
    }
    PhantomDescriptor { shape, seed, kind, ellipses, blobs, vessels, phase }
}

pub fn render(d: &PhantomDescriptor) -> Result<ComplexImage> {
    let (h, w) = d.shape;
    let mut mag = Array2::<f64>::zeros((h, w));
    for ((i, j), m) in mag.indexed_iter_mut() {
        let (u, v) = coords(i, j, d.shape);
        for e in &d.ellipses {
            if inside(e, u, v) <= 1.0 {
                *m += e.intensity;
            }
        }
        for b in &d.blobs {
            *m += b.intensity * (-inside(b, u, v)).exp();
        }
    }
    for vessel in &d.vessels {
        let [p0, p1, p2] = vessel.control;
        let steps = 8 * (h + w);
        let radius = 0.5 * vessel.width_px;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let a = (1.0 - t) * (1.0 - t);
            let b = 2.0 * t * (1.0 - t);
            let c = t * t;
            let u = a * p0[0] + b * p1[0] + c * p2[0];
            let v = a * p0[1] + b * p1[1] + c * p2[1];
            // Back to fractional pixel indices.
            let (pi, pj) = ((v + 1.0) * h as f64 / 2.0 - 0.5, (u + 1.0) * w as f64 / 2.0 - 0.5);
            let lo_i = (pi - radius).ceil().max(0.0) as usize;
            let lo_j = (pj - radius).ceil().max(0.0) as usize;
            let hi_i = ((pi + radius).floor() as usize).min(h - 1);
            let hi_j = ((pj + radius).floor() as usize).min(w - 1);
            for i in lo_i..=hi_i {
                for j in lo_j..=hi_j {
                    if (i as f64 - pi).hypot(j as f64 - pj) <= radius {
                        mag[[i, j]] = mag[[i, j]].max(vessel.intensity);
                    }
                }
            }
        }
    }
    let [a1, a2, a3, a4, a5] = d.phase;
    let mut x = Array2::from_shape_fn((h, w), |(i, j)| {
        let (u, v) = coords(i, j, d.shape);
        let phi = a1 * u + a2 * v + a3 * u * u + a4 * u * v + a5 * v * v;
        C64::from_polar(mag[[i, j]].max(0.0), phi)
    });
    let peak = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        x.mapv_inplace(|z| z / peak);
    }
    ComplexImage::new(x)
}

/// Deterministic per `(shape, seed, kind)`; `max |x0| = 1`.
pub fn make_phantom(shape: (usize, usize), seed: u64, kind: PhantomKind) -> Phantom {
    let descriptor = describe(shape, seed, kind);
    let x0 = render(&descriptor).expect("phantom shapes are validated by ComplexImage");
    Phantom { x0, descriptor }
}

pub fn try_make_phantom(shape: (usize, usize), seed: u64, kind: PhantomKind) -> Result<Phantom> {
    crate::array::check_even(shape.0, shape.1)?;
    if shape.0 < 8 || shape.1 < 8 {
        return Err(Error::shape("phantoms need at least 8x8 pixels"));
    }
    Ok(make_phantom(shape, seed, kind))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `Sigma = c^2 I`.
    #[default]
    Diagonal,
    /// `Sigma = v v^H + 0.01 c^2 I`.
    Correlated,
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub cov: NoiseCov,
    /// Per-coil noise power.
    pub c2: f64,
    /// Constant-modulus draw with `|v_c| = c`.
    pub v: Vec<C64>,
    pub snr_db: f64,
    pub mode: NoiseMode,
}

/// Mean over coils of `||F S_c x0||^2 / N`.
pub fn signal_power(x0: &ComplexImage, coils: &CoilSet) -> Result<f64> {
    if x0.shape() != coils.shape() {
        return Err(Error::shape("phantom and coils differ in shape"));
    }
    let total: f64 = coils.as_array().outer_iter().map(|s| (&s * x0.as_array()).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
    Ok(total / (coils.n_coils() * x0.len()) as f64)
}

/// Noise covariance with per-coil power `signal_power / 10^(snr_db / 10)`.
pub fn noise_cov_from_power(n_coils: usize, signal_power: f64, snr_db: f64, seed: u64, mode: NoiseMode) -> Result<NoiseModel> {
    if !(snr_db > 0.0) || !snr_db.is_finite() {
        return Err(Error::arg(format!("snr_db must be positive, got {snr_db}")));
    }
    if n_coils == 0 || !(signal_power > 0.0) {
        return Err(Error::arg("noise needs at least one coil and positive signal power"));
    }
    let c2 = signal_power / 10f64.powf(snr_db / 10.0);
    let c = c2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..n_coils)
        .map(|_| loop {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if z.norm() > 0.0 {
                break z * (c / z.norm());
            }
        })
        .collect();
    let sigma = match mode {
        NoiseMode::Diagonal => Array2::from_diag_elem(n_coils, C64::new(c2, 0.0)),
        NoiseMode::Correlated => Array2::from_shape_fn((n_coils, n_coils), |(a, b)| {
            v[a] * v[b].conj() + if a == b { C64::new(0.01 * c2, 0.0) } else { C64::default() }
        }),
    };
    Ok(NoiseModel { cov: NoiseCov::shared(sigma)?, c2, v, snr_db, mode })
}

pub fn make_noise_cov(x0: &ComplexImage, coils: &CoilSet, snr_db: f64, seed: u64, mode: NoiseMode) -> Result<NoiseModel> {
    noise_cov_from_power(coils.n_coils(), signal_power(x0, coils)?, snr_db, seed, mode)
}

/// `L` with `L L^H = sigma`, from the Hermitian eigendecomposition.
fn factor(sigma: &ndarray::ArrayView2<C64>) -> Vec<C64> {
    let n = sigma.nrows();
    let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_fn(n, n, |i, j| sigma[[i, j]]));
    let mut l = vec![C64::default(); n * n];
    for a in 0..n {
        for k in 0..n {
            l[a * n + k] = eig.eigenvectors[(a, k)] * eig.eigenvalues[k].max(0.0).sqrt();
        }
    }
    l
}

/// `y_c = M (fft2c(S_c x0) + eps_c)` with `eps_i ~ CN(0, Sigma_i)`.
///
/// Noise is drawn at every location before masking, so the realisation at a
/// sampled location does not depend on the mask.
pub fn acquire(x0: &ComplexImage, coils: &CoilSet, mask: &SamplingMask, noise: &NoiseCov, seed: u64) -> Result<MultiCoilKSpace> {
    let (h, w) = x0.shape();
    let nc = coils.n_coils();
    if coils.shape() != (h, w) || mask.shape() != (h, w) {
        return Err(Error::shape("phantom, coils and mask differ in shape"));
    }
    if noise.n_coils() != nc {
        return Err(Error::shape("noise covariance coil count differs from coils"));
    }
    let mut y = Array3::<C64>::zeros((nc, h, w));
    for (c, mut out) in y.axis_iter_mut(Axis(0)).enumerate() {
        out.assign(&(&coils.coil(c) * x0.as_array()));
        let mut k = out.to_owned();
        fft::transform_inplace(&mut k, false);
        out.assign(&k);
    }
    if !noise.is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = match noise {
            NoiseCov::Shared(s) => Some(factor(&s.view())),
            NoiseCov::PerLocation(_) => None,
        };
        let h2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut g = vec![C64::default(); nc];
        for i in 0..h {
            for j in 0..w {
                for gc in g.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *gc = C64::new(re * h2, im * h2);
                }
                let local;
                let l = match (&shared, noise) {
                    (Some(l), _) => l,
                    (None, NoiseCov::PerLocation(cov)) => {
                        local = factor(&cov.index_axis(Axis(0), i * w + j));
                        &local
                    }
                    _ => unreachable!(),
                };
                for a in 0..nc {
                    let eps: C64 = (0..nc).map(|k| l[a * nc + k] * g[k]).sum();
                    y[[a, i, j]] += eps;
                }
            }
        }
    }
    for mut coil in y.axis_iter_mut(Axis(0)) {
        coil.zip_mut_with(&mask.m, |v, &m| {
            if m == 0.0 {
                *v = C64::default();
            }
        });
    }
    MultiCoilKSpace::new(y)
}

/// Everything needed to build a seeded synthetic acquisition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub shape: (usize, usize),
    pub kind: PhantomKind,
    pub coils: SensitivityConfig,
    pub density: DensityConfig,
    pub snr_db: f64,
    pub noise_mode: NoiseMode,
    /// Phantom seed; coils, mask, covariance and noise use `seed + 1..=4`
    /// unless the coil config carries its own.
    pub seed: u64,
}

impl ScenarioConfig {
    /// Blobs-and-vessels phantom, 4 coils, default density, 30 dB.
    pub fn new(shape: (usize, usize), accel: f64, calib: (usize, usize), seed: u64) -> Self {
        Self {
            shape,
            kind: PhantomKind::BlobsAndVessels,
            coils: SensitivityConfig::new(4, seed + 1),
            density: DensityConfig::new(shape, accel, calib),
            snr_db: 30.0,
            noise_mode: NoiseMode::Diagonal,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub x0: ComplexImage,
    pub coils: CoilSet,
    pub density: DensityMap,
    pub mask: SamplingMask,
    pub noise: NoiseModel,
    pub y: MultiCoilKSpace,
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let x0 = try_make_phantom(cfg.shape, cfg.seed, cfg.kind)?.x0;
    let coils = simulate_sensitivities_with(cfg.shape, &cfg.coils)?;
    let density = make_density_with(&DensityConfig { shape: cfg.shape, ..cfg.density.clone() })?;
    let mask = draw_mask(&density, cfg.seed + 2);
    let noise = make_noise_cov(&x0, &coils, cfg.snr_db, cfg.seed + 3, cfg.noise_mode)?;
    let y = acquire(&x0, &coils, &mask, &noise.cov, cfg.seed + 4)?;
    Ok(Scenario { x0, coils, density, mask, noise, y })
}
