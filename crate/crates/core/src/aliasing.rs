//! Wavelet-domain aliasing variance model.
//!
//! `tau_j = v_j^H M_b v_j` with `v_j = conj(xi_j)` and one `N_c x N_c` moment
//! matrix per subband,
//!
//! `M_b = sum_i P_b(w_i) (m_i / p_i) [ ((1 - p_i) / p_i) z_i z_i^H + Sigma_i ]`,
//!
//! where `P_b` is the band's k-space power spectrum. Rows of `Psi F^H` within
//! a band share one power spectrum, which is what reduces the per-coefficient
//! sum over k-space to a single matrix per band.
//!
//! The error of coefficient `j` is `sum_c xi_cj q_ci` summed against the band
//! spectrum, so its second moment is `xi_j^T E[q q^H] conj(xi_j)`; that is
//! the quadratic form in `conj(xi_j)`.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView3, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::array::C64;
use crate::coil::{compute_xi, CoilSet, XiMap};
use crate::error::{Error, Result};
use crate::sampling::{DensityMap, SamplingMask};
use crate::wavelet::{subband_power_spectra, SubbandMap, WaveletCoeffs};

/// Measurement-noise covariance `E[eps_i eps_i^H]` across coils.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseCov {
    /// One `(N_c, N_c)` matrix for every k-space location.
    Shared(Array2<C64>),
    /// `(H, W, N_c, N_c)` flattened to `(H*W, N_c, N_c)`, row-major locations.
    PerLocation(Array3<C64>),
}

impl NoiseCov {
    pub fn zeros(n_coils: usize) -> Self {
        NoiseCov::Shared(Array2::zeros((n_coils, n_coils)))
    }

    pub fn white(n_coils: usize, variance: f64) -> Self {
        NoiseCov::Shared(Array2::from_diag_elem(n_coils, C64::new(variance, 0.0)))
    }

    pub fn shared(sigma2: Array2<C64>) -> Result<Self> {
        check_hermitian_psd(&sigma2)?;
        Ok(NoiseCov::Shared(sigma2))
    }

    pub fn n_coils(&self) -> usize {
        match self {
            NoiseCov::Shared(m) => m.nrows(),
            NoiseCov::PerLocation(m) => m.dim().1,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseCov::Shared(m) => m.iter().all(|z| *z == C64::default()),
            NoiseCov::PerLocation(m) => m.iter().all(|z| *z == C64::default()),
        }
    }
}

fn check_hermitian_psd(m: &Array2<C64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::shape("noise covariance must be square"));
    }
    for i in 0..n {
        for j in 0..n {
            if (m[[i, j]] - m[[j, i]].conj()).norm() > 1e-12 * (1.0 + m[[i, j]].norm()) {
                return Err(Error::arg("noise covariance is not Hermitian"));
            }
        }
    }
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(mat);
    if eig.eigenvalues.iter().any(|&v| v < -1e-12) {
        return Err(Error::arg("noise covariance is not positive semidefinite"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TauMap {
    pub tau: Vec<f64>,
    pub map: Arc<SubbandMap>,
    /// Number of coefficients whose quadratic form came out negative and was
    /// clamped to zero.
    pub clamped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BandTau {
    pub band: usize,
    pub mean_tau: f64,
    pub n: usize,
}

impl TauMap {
    pub fn mean(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }

    pub fn band_means(&self) -> Vec<f64> {
        self.map.band_means(&self.tau)
    }

    pub fn summary(&self) -> Vec<BandTau> {
        self.band_means()
            .into_iter()
            .zip(self.map.bands())
            .map(|(mean_tau, b)| BandTau { band: b.id, mean_tau, n: b.len() })
            .collect()
    }

    /// Coefficients at or below `1e-14 * max tau` are treated as noiseless.
    pub fn floor(&self) -> f64 {
        1e-14 * self.tau.iter().copied().fold(0.0, f64::max)
    }
}

/// Everything `tau_update` needs that does not change between iterations.
#[derive(Clone, Debug)]
pub struct AliasingModel {
    pub map: Arc<SubbandMap>,
    pub spectra: Vec<Array2<f64>>,
    pub xi: XiMap,
}

impl AliasingModel {
    pub fn new(coils: &CoilSet, map: &Arc<SubbandMap>) -> Result<Self> {
        Ok(Self { map: map.clone(), spectra: subband_power_spectra(map), xi: compute_xi(coils, map)? })
    }

    pub fn tau_update(
        &self,
        z: &ArrayView3<C64>,
        mask: &SamplingMask,
        density: &DensityMap,
        noise: &NoiseCov,
    ) -> Result<TauMap> {
        tau_update(z, mask, density, noise, &self.xi, &self.spectra)
    }
}

/// One Hermitian `N_c x N_c` matrix per band, stored row-major.
pub fn band_moments(
    z: &ArrayView3<C64>,
    mask: &SamplingMask,
    density: &DensityMap,
    noise: &NoiseCov,
    spectra: &[Array2<f64>],
) -> Result<Vec<Vec<C64>>> {
    let (nc, h, w) = z.dim();
    if mask.shape() != (h, w) || density.shape() != (h, w) {
        return Err(Error::shape("mask/density shape does not match k-space"));
    }
    if noise.n_coils() != nc {
        return Err(Error::shape("noise covariance coil count does not match k-space"));
    }
    if spectra.iter().any(|s| s.dim() != (h, w)) {
        return Err(Error::shape("power spectra shape does not match k-space"));
    }

    // Per sampled location: flat index, 1/p, (1-p)/p and z_i.
    let mut sampled = Vec::new();
    let mut zs = Vec::new();
    for i in 0..h {
        for j in 0..w {
            if mask.m[[i, j]] == 0.0 {
                continue;
            }
            let p = density.p[[i, j]];
            if !(p > 0.0) {
                return Err(Error::ZeroDensity { index: i * w + j });
            }
            sampled.push((i * w + j, 1.0 / p, (1.0 - p) / p));
            zs.extend((0..nc).map(|c| z[[c, i, j]]));
        }
    }

    let moments = spectra
        .par_iter()
        .map(|spec| {
            let spec = spec.as_slice().expect("spectra are contiguous");
            let mut m = vec![C64::default(); nc * nc];
            let mut noise_weight = 0.0;
            for (k, &(idx, inv_p, odds)) in sampled.iter().enumerate() {
                let weight = spec[idx] * inv_p;
                if weight == 0.0 {
                    continue;
                }
                let zi = &zs[k * nc..(k + 1) * nc];
                let sw = weight * odds;
                if sw != 0.0 {
                    for a in 0..nc {
                        let za = zi[a] * sw;
                        for b in 0..nc {
                            m[a * nc + b] += za * zi[b].conj();
                        }
                    }
                }
                match noise {
                    NoiseCov::Shared(_) => noise_weight += weight,
                    NoiseCov::PerLocation(cov) => {
                        let s = cov.index_axis(Axis(0), idx);
                        for a in 0..nc {
                            for b in 0..nc {
                                m[a * nc + b] += s[[a, b]] * weight;
                            }
                        }
                    }
                }
            }
            if let NoiseCov::Shared(s) = noise {
                for a in 0..nc {
                    for b in 0..nc {
                        m[a * nc + b] += s[[a, b]] * noise_weight;
                    }
                }
            }
            m
        })
        .collect();
    Ok(moments)
}

/// `Re(v^H M v)` with `v = conj(xi)`, i.e. `Re(sum_ab xi_a M_ab conj(xi_b))`.
pub(crate) fn quadratic_form(xi: impl Fn(usize) -> C64, m: &[C64], nc: usize) -> f64 {
    let mut acc = C64::default();
    for a in 0..nc {
        let xa = xi(a);
        let mut row = C64::default();
        for b in 0..nc {
            row += m[a * nc + b] * xi(b).conj();
        }
        acc += xa * row;
    }
    acc.re
}

pub fn tau_update(
    z: &ArrayView3<C64>,
    mask: &SamplingMask,
    density: &DensityMap,
    noise: &NoiseCov,
    xi: &XiMap,
    spectra: &[Array2<f64>],
) -> Result<TauMap> {
    let map = &xi.map;
    if spectra.len() != map.n_bands() {
        return Err(Error::shape("one power spectrum per band is required"));
    }
    let nc = z.dim().0;
    if xi.xi.nrows() != nc {
        return Err(Error::shape("xi coil count does not match k-space"));
    }
    let moments = band_moments(z, mask, density, noise, spectra)?;
    let mut tau = vec![0.0; map.len()];
    let mut clamped = 0;
    for (band, m) in map.bands().iter().zip(&moments) {
        for j in band.range.clone() {
            let t = quadratic_form(|c| xi.xi[[c, j]], m, nc);
            if t < 0.0 {
                clamped += 1;
            }
            tau[j] = t.max(0.0);
        }
    }
    Ok(TauMap { tau, map: map.clone(), clamped })
}

/// `|r_j - w_j|^2` per coefficient plus per-band means.
pub fn empirical_error(r: &WaveletCoeffs, w_true: &WaveletCoeffs) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(r.data.len(), w_true.data.len());
    let err: Vec<f64> = r.data.iter().zip(&w_true.data).map(|(a, b)| (a - b).norm_sqr()).collect();
    let means = r.map.band_means(&err);
    (err, means)
}

/// `(r_j - w_j) / sqrt(tau_j)`, or `None` where `tau_j` is at or below the
/// floor.
pub fn normalized_residual(r: &WaveletCoeffs, w_true: &WaveletCoeffs, tau: &TauMap) -> Vec<Option<C64>> {
    assert_eq!(r.data.len(), tau.tau.len());
    let floor = tau.floor();
    r.data
        .iter()
        .zip(&w_true.data)
        .zip(&tau.tau)
        .map(|((a, b), &t)| if t > floor && t > 0.0 { Some((a - b) / t.sqrt()) } else { None })
        .collect()
}
