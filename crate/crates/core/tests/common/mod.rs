//! Explicit-matrix oracles and shared fixtures for the integration tests.
//!
//! Everything here is written from the textbook definitions with dense
//! matrices, without going through the library's fast paths.

#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use pvdamp::coil::{simulate_sensitivities_with, CoilSet, SensitivityConfig};
use pvdamp::data::{build_scenario, PhantomKind, Scenario, ScenarioConfig};
use pvdamp::sampling::{make_density_with, DensityConfig, DensityMap};
use pvdamp::C64;

/// Daubechies-4 (eight-tap) low-pass analysis filter, table order; the
/// analysis correlates: `a[k] = sum_t h[t] x[(2k + t) mod n]`.
pub const DB4: [f64; 8] = [
    0.2303778133088964,
    0.7148465705529154,
    0.6308807679298587,
    -0.0279837694168599,
    -0.1870348117190931,
    0.0308413818355607,
    0.0328830116668852,
    -0.0105974017850690,
];

/// Centered unitary DFT: `F[k, n] = exp(-2 pi i (k - N/2)(n - N/2) / N) / sqrt(N)`.
pub fn centered_dft(n: usize) -> Array2<C64> {
    let c = (n / 2) as f64;
    let s = 1.0 / (n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(k, m)| {
        let ph = -2.0 * PI * (k as f64 - c) * (m as f64 - c) / n as f64;
        C64::from_polar(s, ph)
    })
}

pub fn kron<T: Copy + std::ops::Mul<Output = T>>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// 2-D centered DFT acting on row-major flattened images.
pub fn dft2_matrix(h: usize, w: usize) -> Array2<C64> {
    kron(&centered_dft(h), &centered_dft(w))
}

/// One periodic analysis level on length `n`: the first `n/2` rows are the
/// low-pass outputs, the rest high-pass.
pub fn dwt_level_1d(n: usize) -> Array2<f64> {
    let g: Vec<f64> = (0..8).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 } * DB4[7 - t]).collect();
    let mut a = Array2::zeros((n, n));
    for k in 0..n / 2 {
        for t in 0..8 {
            a[[k, (2 * k + t) % n]] += DB4[t];
            a[[n / 2 + k, (2 * k + t) % n]] += g[t];
        }
    }
    a
}

/// Pyramid positions `(row, col)` of every coefficient in flat band order:
/// coarsest LL, then LH, HL, HH from the finest scale to the coarsest.
pub fn band_order(h: usize, w: usize, levels: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(h * w);
    let block = |r0: usize, c0: usize, rows: usize, cols: usize, out: &mut Vec<(usize, usize)>| {
        for i in 0..rows {
            for j in 0..cols {
                out.push((r0 + i, c0 + j));
            }
        }
    };
    block(0, 0, h >> levels, w >> levels, &mut out);
    for s in 1..=levels {
        let (rs, cs) = (h >> s, w >> s);
        block(0, cs, rs, cs, &mut out);
        block(rs, 0, rs, cs, &mut out);
        block(rs, cs, rs, cs, &mut out);
    }
    out
}

/// Dense `N x N` analysis matrix `Psi` with rows in flat band order.
pub fn dwt_matrix(h: usize, w: usize, levels: usize) -> Array2<f64> {
    let n = h * w;
    let mut total = Array2::<f64>::eye(n);
    for l in 0..levels {
        let (rh, rw) = (h >> l, w >> l);
        let local = kron(&dwt_level_1d(rh), &dwt_level_1d(rw));
        let mut step = Array2::<f64>::eye(n);
        for p in 0..rh {
            for q in 0..rw {
                let row = p * w + q;
                step[[row, row]] = 0.0;
                for pp in 0..rh {
                    for qq in 0..rw {
                        step[[row, pp * w + qq]] = local[[p * rw + q, pp * rw + qq]];
                    }
                }
            }
        }
        total = step.dot(&total);
    }
    let order = band_order(h, w, levels);
    Array2::from_shape_fn((n, n), |(j, i)| {
        let (p, q) = order[j];
        total[[p * w + q, i]]
    })
}

pub fn matvec(m: &Array2<C64>, x: &[C64]) -> Vec<C64> {
    m.dot(&Array1::from(x.to_vec())).to_vec()
}

pub fn real_matvec(m: &Array2<f64>, x: &[C64]) -> Vec<C64> {
    m.rows().into_iter().map(|row| row.iter().zip(x).map(|(a, b)| b * *a).sum()).collect()
}

pub fn flat(img: &Array2<C64>) -> Vec<C64> {
    img.iter().copied().collect()
}

/// `|Psi F^H|^2`: row `j` is the k-space power spectrum of atom `j`.
pub fn spectrum_matrix(psi: &Array2<f64>, h: usize, w: usize) -> Array2<f64> {
    let psi_c = psi.mapv(|v| C64::new(v, 0.0));
    let f_h = dft2_matrix(h, w).t().mapv(|z| z.conj());
    psi_c.dot(&f_h).mapv(|z| z.norm_sqr())
}

/// `xi[c, j] = sum_n |Psi_jn|^2 conj(S_c(n))`.
pub fn xi_oracle(psi: &Array2<f64>, coils: &CoilSet) -> Array2<C64> {
    let sq = psi.mapv(|v| v * v);
    let n = psi.nrows();
    let mut xi = Array2::zeros((coils.n_coils(), n));
    for c in 0..coils.n_coils() {
        let s: Vec<C64> = coils.coil(c).iter().map(|z| z.conj()).collect();
        for (j, v) in real_matvec(&sq, &s).into_iter().enumerate() {
            xi[[c, j]] = v;
        }
    }
    xi
}

/// Expected aliasing variance of coefficient `j` over masks and noise:
/// `v^H (sum_i |Psi_hat_ji|^2 [((1 - p_i)/p_i) y0_i y0_i^H + Sigma / p_i]) v`
/// with `v = conj(xi_j)`.
pub fn expected_tau(
    spec: &Array2<f64>,
    xi: &Array2<C64>,
    y0: &ndarray::Array3<C64>,
    p: &Array2<f64>,
    sigma: &Array2<C64>,
) -> Vec<f64> {
    let (nc, h, w) = y0.dim();
    let n = h * w;
    let pf: Vec<f64> = p.iter().copied().collect();
    (0..n)
        .map(|j| {
            let mut m = Array2::<C64>::zeros((nc, nc));
            for i in 0..n {
                let wgt = spec[[j, i]];
                let (a, b) = (i / w, i % w);
                let odds = (1.0 - pf[i]) / pf[i];
                for c in 0..nc {
                    for d in 0..nc {
                        m[[c, d]] += (y0[[c, a, b]] * y0[[d, a, b]].conj() * odds + sigma[[c, d]] / pf[i]) * wgt;
                    }
                }
            }
            let v: Vec<C64> = (0..nc).map(|c| xi[[c, j]].conj()).collect();
            let mut acc = C64::default();
            for c in 0..nc {
                for d in 0..nc {
                    acc += v[c].conj() * m[[c, d]] * v[d];
                }
            }
            acc.re
        })
        .collect()
}

/// Smooth coils with a mild phase, matching the solver fixtures.
pub fn smooth_coils(n_coils: usize, seed: u64) -> SensitivityConfig {
    SensitivityConfig { n_coils, width: 1.0, phase_strength: 0.3, seed }
}

pub const ACCEPT_SHAPE: (usize, usize) = (64, 64);
pub const ACCEPT_R: f64 = 5.0;
pub const ACCEPT_CALIB: (usize, usize) = (8, 8);
pub const ACCEPT_P_MIN: f64 = 0.05;

/// The 64x64, 4-coil, R = 5 acquisition shared by the end-to-end checks.
pub fn acceptance_config(seed: u64, snr_db: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(ACCEPT_SHAPE, ACCEPT_R, ACCEPT_CALIB, seed);
    cfg.kind = PhantomKind::BlobsAndVessels;
    cfg.density.p_min = ACCEPT_P_MIN;
    cfg.snr_db = snr_db;
    cfg
}

pub fn acceptance_scenario(seed: u64, snr_db: f64) -> Scenario {
    build_scenario(&acceptance_config(seed, snr_db)).expect("acceptance scenario")
}

/// 16x16, 2 coils, R = 4 fixture for the Monte-Carlo checks.
pub struct SmallSetup {
    pub x0: pvdamp::ComplexImage,
    pub coils: CoilSet,
    pub density: DensityMap,
}

pub fn small_setup(seed: u64) -> SmallSetup {
    let shape = (16, 16);
    let x0 = pvdamp::data::make_phantom(shape, seed, PhantomKind::BlobsAndVessels).x0;
    let coils = simulate_sensitivities_with(shape, &smooth_coils(2, seed + 1)).expect("coils");
    let density = make_density_with(&DensityConfig { p_min: ACCEPT_P_MIN, ..DensityConfig::new(shape, 4.0, (4, 4)) })
        .expect("density");
    SmallSetup { x0, coils, density }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
