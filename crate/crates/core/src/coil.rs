//! Coil sensitivities, the flat-sensitivity coefficients `xi`, PCA virtual
//! coils, and the multi-coil forward/adjoint operators.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{all_finite, C64};
use crate::error::{Error, Result};
use crate::fft;
use crate::sampling::SamplingMask;
use crate::wavelet::{squared_filter_dwt2_with, SubbandMap};
use crate::MultiCoilKSpace;

/// Sensitivity maps, shape `(coils, rows, cols)`, with unit root-sum-of-squares
/// at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilSet {
    s: Array3<C64>,
}

impl CoilSet {
    pub fn n_coils(&self) -> usize {
        self.s.dim().0
    }

    pub fn shape(&self) -> (usize, usize) {
        let (_, h, w) = self.s.dim();
        (h, w)
    }

    pub fn coil(&self, c: usize) -> ArrayView2<'_, C64> {
        self.s.index_axis(Axis(0), c)
    }

    pub fn as_array(&self) -> &Array3<C64> {
        &self.s
    }

    /// Single coil with unit sensitivity everywhere.
    pub fn flat(shape: (usize, usize)) -> Self {
        Self { s: Array3::from_elem((1, shape.0, shape.1), C64::new(1.0, 0.0)) }
    }
}

/// Divides each pixel's coil vector by its l2 norm.
pub fn normalize_sensitivities(raw: Array3<C64>) -> Result<CoilSet> {
    let (nc, h, w) = raw.dim();
    if nc == 0 {
        return Err(Error::shape("no coils"));
    }
    if !all_finite(raw.iter()) {
        return Err(Error::NonFinite("coil sensitivities"));
    }
    let mut s = raw;
    for i in 0..h {
        for j in 0..w {
            let mut lane = s.slice_mut(ndarray::s![.., i, j]);
            let norm = lane.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroSensitivity { row: i, col: j });
            }
            lane.mapv_inplace(|z| z / norm);
        }
    }
    Ok(CoilSet { s })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub n_coils: usize,
    /// Gaussian bump width as a fraction of the larger image dimension.
    pub width: f64,
    /// Peak-to-peak scale of the smooth phase polynomial, in radians.
    pub phase_strength: f64,
    pub seed: u64,
}

impl SensitivityConfig {
    pub fn new(n_coils: usize, seed: u64) -> Self {
        Self { n_coils, width: 1.0, phase_strength: 0.3, seed }
    }
}

pub fn simulate_sensitivities(shape: (usize, usize), n_coils: usize, width: f64, seed: u64) -> Result<CoilSet> {
    simulate_sensitivities_with(shape, &SensitivityConfig { width, ..SensitivityConfig::new(n_coils, seed) })
}

/// Surface-coil-like maps: a Gaussian magnitude bump centred on the image
/// border per coil, times a smooth quadratic phase, then normalized.
pub fn simulate_sensitivities_with(shape: (usize, usize), cfg: &SensitivityConfig) -> Result<CoilSet> {
    if cfg.n_coils == 0 {
        return Err(Error::arg("at least one coil is required"));
    }
    if !(cfg.width > 0.0) {
        return Err(Error::arg("coil width must be positive"));
    }
    let (h, w) = shape;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offset = rng.random::<f64>() * 2.0 * PI;
    let sigma = cfg.width;
    let mut raw = Array3::<C64>::zeros((cfg.n_coils, h, w));
    for (c, mut map) in raw.axis_iter_mut(Axis(0)).enumerate() {
        let theta = offset + 2.0 * PI * c as f64 / cfg.n_coils as f64;
        let (cy, cx) = (0.5 * theta.sin(), 0.5 * theta.cos());
        let a: [f64; 6] = std::array::from_fn(|k| {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            if k == 0 { PI * u } else { cfg.phase_strength * u }
        });
        for ((i, j), v) in map.indexed_iter_mut() {
            let y = (i as f64 + 0.5) / h as f64 - 0.5;
            let x = (j as f64 + 0.5) / w as f64 - 0.5;
            let (sy, sx) = (y * h as f64 / h.max(w) as f64, x * w as f64 / h.max(w) as f64);
            let d2 = (sy - cy).powi(2) + (sx - cx).powi(2);
            let mag = (-d2 / (2.0 * sigma * sigma)).exp();
            let phase = a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y + a[5] * y * y;
            *v = C64::from_polar(mag, phase);
        }
    }
    normalize_sensitivities(raw)
}

/// `xi[c, j] = <|Psi_j|^2, conj(S_c)>`: each coil's conjugate sensitivity
/// averaged over the squared footprint of wavelet atom `j`.
#[derive(Clone, Debug)]
pub struct XiMap {
    /// Shape `(coils, N)`.
    pub xi: Array2<C64>,
    pub map: Arc<SubbandMap>,
}

pub fn compute_xi(coils: &CoilSet, map: &Arc<SubbandMap>) -> Result<XiMap> {
    if coils.shape() != map.shape() {
        return Err(Error::shape(format!(
            "coil shape {:?} does not match wavelet shape {:?}",
            coils.shape(),
            map.shape()
        )));
    }
    let rows: Vec<Vec<C64>> = (0..coils.n_coils())
        .into_par_iter()
        .map(|c| {
            let conj = coils.coil(c).mapv(|z| z.conj());
            squared_filter_dwt2_with(&conj.view(), map).data
        })
        .collect();
    let n = map.len();
    let xi = Array2::from_shape_fn((coils.n_coils(), n), |(c, j)| rows[c][j]);
    Ok(XiMap { xi, map: map.clone() })
}

/// Coil-by-sample matrix of the centred `rows x cols` calibration block.
pub fn calibration_samples(ksp: &MultiCoilKSpace, calib: (usize, usize)) -> Array2<C64> {
    let (h, w) = ksp.shape();
    let (r0, c0) = (h / 2 - calib.0 / 2, w / 2 - calib.1 / 2);
    let nc = ksp.n_coils();
    let mut out = Array2::zeros((nc, calib.0 * calib.1));
    for c in 0..nc {
        let coil = ksp.coil(c);
        for i in 0..calib.0 {
            for j in 0..calib.1 {
                out[[c, i * calib.1 + j]] = coil[[r0 + i, c0 + j]];
            }
        }
    }
    out
}

/// Virtual-coil basis from the calibration samples.
#[derive(Clone, Debug)]
pub struct PcaCompression {
    /// `(physical coils, virtual coils)`, orthonormal columns.
    pub basis: Array2<C64>,
    /// All singular values of the calibration matrix, descending.
    pub singular_values: Vec<f64>,
}

impl PcaCompression {
    pub fn n_virtual(&self) -> usize {
        self.basis.ncols()
    }

    /// Share of calibration energy kept by the first `k` components.
    pub fn retained_energy(&self, k: usize) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let kept: f64 = self.singular_values.iter().take(k).map(|s| s * s).sum();
        if total == 0.0 { 1.0 } else { kept / total }
    }

    /// Projects coil-indexed data of shape `(coils, ...)` onto the basis.
    pub fn project(&self, data: &ArrayView3<C64>) -> Array3<C64> {
        let (nc, h, w) = data.dim();
        assert_eq!(nc, self.basis.nrows());
        let nv = self.n_virtual();
        let mut out = Array3::zeros((nv, h, w));
        for v in 0..nv {
            let mut dst = out.index_axis_mut(Axis(0), v);
            for c in 0..nc {
                let weight = self.basis[[c, v]].conj();
                Zip::from(&mut dst).and(&data.index_axis(Axis(0), c)).for_each(|d, &s| *d += weight * s);
            }
        }
        out
    }

    /// Maps virtual-coil data back into the physical coil space.
    pub fn expand(&self, virt: &ArrayView3<C64>) -> Array3<C64> {
        let (nv, h, w) = virt.dim();
        assert_eq!(nv, self.n_virtual());
        let nc = self.basis.nrows();
        let mut out = Array3::zeros((nc, h, w));
        for c in 0..nc {
            let mut dst = out.index_axis_mut(Axis(0), c);
            for v in 0..nv {
                let weight = self.basis[[c, v]];
                Zip::from(&mut dst).and(&virt.index_axis(Axis(0), v)).for_each(|d, &s| *d += weight * s);
            }
        }
        out
    }

    /// Sensitivities seen by the virtual coils, renormalized.
    pub fn compress_sensitivities(&self, coils: &CoilSet) -> Result<CoilSet> {
        normalize_sensitivities(self.project(&coils.as_array().view()))
    }
}

pub fn pca_basis(calib: &Array2<C64>, n_virtual: usize) -> Result<PcaCompression> {
    let nc = calib.nrows();
    if n_virtual == 0 || n_virtual > nc {
        return Err(Error::arg(format!("cannot keep {n_virtual} virtual coils out of {nc}")));
    }
    let a = DMatrix::from_fn(nc, calib.ncols(), |i, j| calib[[i, j]]);
    let gram = &a * a.adjoint();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..nc).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let singular_values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let basis = Array2::from_shape_fn((nc, n_virtual), |(c, v)| eig.eigenvectors[(c, order[v])]);
    Ok(PcaCompression { basis, singular_values })
}

/// Derives the virtual-coil basis from `calib` (coils x samples) and projects
/// all of `full` onto it.
pub fn pca_compress(
    calib: &Array2<C64>,
    full: &MultiCoilKSpace,
    n_virtual: usize,
) -> Result<(MultiCoilKSpace, PcaCompression)> {
    if calib.nrows() != full.n_coils() {
        return Err(Error::shape("calibration and full data have different coil counts"));
    }
    let pca = pca_basis(calib, n_virtual)?;
    let out = MultiCoilKSpace::new(pca.project(&full.as_array().view()))?;
    Ok((out, pca))
}

fn check_shapes(img: (usize, usize), coils: &CoilSet) -> Result<()> {
    if img != coils.shape() {
        return Err(Error::shape(format!("image {img:?} vs coils {:?}", coils.shape())));
    }
    Ok(())
}

/// Per coil `M * fft2c(S_c * x)`.
pub fn forward(x: &ArrayView2<C64>, coils: &CoilSet, mask: &SamplingMask) -> Result<Array3<C64>> {
    check_shapes(x.dim(), coils)?;
    if mask.shape() != coils.shape() {
        return Err(Error::shape("mask does not match coils"));
    }
    Ok(forward_masked(x, coils, &mask.m))
}

/// `sum_c conj(S_c) * ifft2c(y_c)`.
pub fn adjoint(y: &ArrayView3<C64>, coils: &CoilSet) -> Result<Array2<C64>> {
    let (nc, h, w) = y.dim();
    if nc != coils.n_coils() {
        return Err(Error::shape(format!("{nc} data coils vs {} sensitivity maps", coils.n_coils())));
    }
    check_shapes((h, w), coils)?;
    Ok(adjoint_weighted(y, coils, None))
}

pub(crate) fn forward_masked(x: &ArrayView2<C64>, coils: &CoilSet, mask: &Array2<f64>) -> Array3<C64> {
    let (h, w) = x.dim();
    let per_coil: Vec<Array2<C64>> = (0..coils.n_coils())
        .into_par_iter()
        .map(|c| {
            let mut k = &coils.coil(c) * x;
            fft::transform_inplace(&mut k, false);
            Zip::from(&mut k).and(mask).for_each(|v, &m| {
                if m == 0.0 {
                    *v = C64::default();
                }
            });
            k
        })
        .collect();
    let mut out = Array3::zeros((coils.n_coils(), h, w));
    for (c, k) in per_coil.into_iter().enumerate() {
        out.index_axis_mut(Axis(0), c).assign(&k);
    }
    out
}

/// `sum_c conj(S_c) ifft2c(weights * y_c)`; `weights` is applied in k-space.
pub(crate) fn adjoint_weighted(y: &ArrayView3<C64>, coils: &CoilSet, weights: Option<&Array2<f64>>) -> Array2<C64> {
    let parts: Vec<Array2<C64>> = (0..coils.n_coils())
        .into_par_iter()
        .map(|c| {
            let mut k = y.index_axis(Axis(0), c).to_owned();
            if let Some(wt) = weights {
                Zip::from(&mut k).and(wt).for_each(|v, &s| *v *= s);
            }
            fft::transform_inplace(&mut k, true);
            Zip::from(&mut k).and(&coils.coil(c)).for_each(|v, s| *v *= s.conj());
            k
        })
        .collect();
    let mut out = Array2::zeros(coils.shape());
    for p in parts {
        out += &p;
    }
    out
}
