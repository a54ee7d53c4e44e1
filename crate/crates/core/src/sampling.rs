//! Variable-density maps and Bernoulli k-space masks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DECAY: f64 = 4.0;
pub const DEFAULT_P_MIN: f64 = 1e-3;

/// How sampling decisions are grouped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Every k-space location is an independent Bernoulli draw.
    #[default]
    Points,
    /// One draw per column; whole columns are sampled (fully sampled readout
    /// along axis 0).
    Columns,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityConfig {
    pub shape: (usize, usize),
    pub accel: f64,
    pub calib: (usize, usize),
    pub decay: f64,
    pub p_min: f64,
    pub mode: MaskMode,
}

impl DensityConfig {
    pub fn new(shape: (usize, usize), accel: f64, calib: (usize, usize)) -> Self {
        Self { shape, accel, calib, decay: DEFAULT_DECAY, p_min: DEFAULT_P_MIN, mode: MaskMode::Points }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    pub p: Array2<f64>,
    pub calib: (usize, usize),
    pub target_r: f64,
    pub mode: MaskMode,
}

impl DensityMap {
    /// Wraps an existing probability map (e.g. loaded from disk).
    pub fn from_probabilities(p: Array2<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::arg("sampling probabilities must lie in (0, 1]"));
        }
        let target_r = p.len() as f64 / p.sum();
        Ok(Self { p, calib: (0, 0), target_r, mode: MaskMode::Points })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.p.dim()
    }

    pub fn expected_samples(&self) -> f64 {
        self.p.sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    /// 0.0 / 1.0 entries.
    pub m: Array2<f64>,
    pub seed: u64,
}

impl SamplingMask {
    pub fn from_values(m: Array2<f64>, seed: u64) -> Result<Self> {
        if m.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::arg("mask entries must be 0 or 1"));
        }
        Ok(Self { m, seed })
    }

    pub fn full(shape: (usize, usize)) -> Self {
        Self { m: Array2::ones(shape), seed: 0 }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.dim()
    }

    pub fn count(&self) -> usize {
        self.m.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn is_sampled(&self, idx: (usize, usize)) -> bool {
        self.m[idx] != 0.0
    }
}

fn calib_range(n: usize, c: usize) -> std::ops::Range<usize> {
    let start = n / 2 - c / 2;
    start..start + c
}

pub fn make_density(shape: (usize, usize), accel: f64, calib: (usize, usize), decay: f64) -> Result<DensityMap> {
    make_density_with(&DensityConfig { decay, ..DensityConfig::new(shape, accel, calib) })
}

/// Builds `p_j = clamp(c (1 - r_j)^d, p_min, 1)` with `r_j` the normalized
/// infinity-norm distance from the k-space centre, the calibration block
/// forced to 1, and `c` solved by bisection so that `sum p = N / R`.
pub fn make_density_with(cfg: &DensityConfig) -> Result<DensityMap> {
    let (h, w) = cfg.shape;
    let (ch, cw) = cfg.calib;
    if h == 0 || w == 0 {
        return Err(Error::shape("empty density shape"));
    }
    if !(cfg.accel >= 1.0) || !cfg.accel.is_finite() {
        return Err(Error::arg(format!("acceleration must be >= 1, got {}", cfg.accel)));
    }
    if ch > h || cw > w {
        return Err(Error::arg(format!("calibration block {ch}x{cw} does not fit in {h}x{w}")));
    }
    if !(cfg.p_min > 0.0 && cfg.p_min <= 1.0) || !(cfg.decay >= 0.0) {
        return Err(Error::arg("p_min must lie in (0, 1] and decay must be nonnegative"));
    }
    let n = (h * w) as f64;
    let mode = cfg.mode;
    if cfg.accel == 1.0 {
        return Ok(DensityMap { p: Array2::ones(cfg.shape), calib: cfg.calib, target_r: 1.0, mode });
    }

    let (rows, cols) = match mode {
        MaskMode::Points => (calib_range(h, ch), calib_range(w, cw)),
        MaskMode::Columns => (0..h, calib_range(w, cw)),
    };
    let in_calib = |i: usize, j: usize| rows.contains(&i) && cols.contains(&j) && !rows.is_empty() && !cols.is_empty();
    let radius = |i: usize, j: usize| {
        let rj = (j as f64 - (w / 2) as f64).abs() / (w as f64 / 2.0);
        match mode {
            MaskMode::Points => rj.max((i as f64 - (h / 2) as f64).abs() / (h as f64 / 2.0)),
            MaskMode::Columns => rj,
        }
    };
    let profile = Array2::from_shape_fn(cfg.shape, |(i, j)| {
        if in_calib(i, j) {
            f64::INFINITY
        } else {
            (1.0 - radius(i, j)).max(0.0).powf(cfg.decay)
        }
    });
    let density = |c: f64| profile.mapv(|v| if v.is_infinite() { 1.0 } else { (c * v).clamp(cfg.p_min, 1.0) });
    let total = |c: f64| density(c).sum();

    let target = n / cfg.accel;
    let lowest = total(0.0);
    if lowest > target * (1.0 + 1e-12) {
        return Err(Error::InfeasibleAcceleration { requested: cfg.accel, minimal: n / lowest });
    }
    let highest = profile.iter().map(|&v| if v > 0.0 { 1.0 } else { cfg.p_min }).sum::<f64>();
    if highest < target {
        return Err(Error::InfeasibleAcceleration { requested: cfg.accel, minimal: n / highest });
    }

    let mut hi = 1.0;
    while total(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    let p = density(0.5 * (lo + hi));
    Ok(DensityMap { p, calib: cfg.calib, target_r: cfg.accel, mode })
}

/// Independent Bernoulli draws with `P(m_j = 1) = p_j`, deterministic in `seed`.
pub fn draw_mask(density: &DensityMap, seed: u64) -> SamplingMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = match density.mode {
        MaskMode::Points => density.p.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }),
        MaskMode::Columns => {
            let keep: Vec<bool> = density.p.row(0).iter().map(|&p| rng.random::<f64>() < p).collect();
            Array2::from_shape_fn(density.shape(), |(_, j)| if keep[j] { 1.0 } else { 0.0 })
        }
    };
    SamplingMask { m, seed }
}

/// `N / #sampled`.
pub fn realized_acceleration(mask: &SamplingMask) -> f64 {
    mask.m.len() as f64 / mask.count() as f64
}
