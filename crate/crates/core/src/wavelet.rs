//! Orthogonal 2-D Daubechies-4 (8-tap) wavelet transform with periodic
//! boundaries.
//!
//! Coefficients are stored flat, band by band, in the order given by
//! [`SubbandMap`]: the coarsest `LL` band first, then `(LH, HL, HH)` for
//! scale 1 (finest), scale 2, ..., up to the coarsest scale. Each band is
//! row-major. `LH` is low-pass along rows (axis 0) and high-pass along
//! columns (axis 1); `HL` is the reverse.

use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, ArrayViewMut1, Axis};
use serde::Serialize;

use crate::array::{check_even, C64};
use crate::error::{Error, Result};
use crate::fft;

/// Analysis low-pass taps of the 8-tap Daubechies wavelet (4 vanishing moments).
pub const DB4_LO: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Quadrature-mirror high-pass: `g[t] = (-1)^t h[L-1-t]`.
pub fn db4_hi() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (t, v) in g.iter_mut().enumerate() {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4_LO[7 - t];
    }
    g
}

pub const DEFAULT_LEVELS: usize = 4;
pub const MAX_LEVELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Orientation {
    LL,
    LH,
    HL,
    HH,
}

impl Orientation {
    /// (high-pass along axis 0, high-pass along axis 1)
    fn highs(self) -> (bool, bool) {
        match self {
            Orientation::LL => (false, false),
            Orientation::LH => (false, true),
            Orientation::HL => (true, false),
            Orientation::HH => (true, true),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Band {
    pub id: usize,
    pub orientation: Orientation,
    /// 1 is the finest scale.
    pub scale: usize,
    pub range: Range<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl Band {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    /// Top-left corner of the band in the in-place pyramid layout.
    fn pyramid_origin(&self) -> (usize, usize) {
        let (hi0, hi1) = self.orientation.highs();
        (if hi0 { self.rows } else { 0 }, if hi1 { self.cols } else { 0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubbandMap {
    shape: (usize, usize),
    levels: usize,
    bands: Vec<Band>,
    #[serde(skip)]
    band_of: Vec<u16>,
}

impl SubbandMap {
    pub fn new(shape: (usize, usize), levels: usize) -> Result<Self> {
        let (h, w) = shape;
        if !(1..=MAX_LEVELS).contains(&levels) {
            return Err(Error::arg(format!("wavelet levels must be in 1..={MAX_LEVELS}, got {levels}")));
        }
        let block = 1usize << levels;
        if h == 0 || w == 0 || h % block != 0 || w % block != 0 {
            return Err(Error::shape(format!(
                "{h}x{w} is not divisible by 2^{levels} = {block}"
            )));
        }
        let mut bands = Vec::with_capacity(3 * levels + 1);
        let mut start = 0;
        let mut push = |orientation, scale: usize, bands: &mut Vec<Band>| {
            let (rows, cols) = (h >> scale, w >> scale);
            let id = bands.len();
            bands.push(Band { id, orientation, scale, range: start..start + rows * cols, rows, cols });
            start += rows * cols;
        };
        push(Orientation::LL, levels, &mut bands);
        for scale in 1..=levels {
            for o in [Orientation::LH, Orientation::HL, Orientation::HH] {
                push(o, scale, &mut bands);
            }
        }
        let mut band_of = vec![0u16; h * w];
        for b in &bands {
            band_of[b.range.clone()].fill(b.id as u16);
        }
        Ok(Self { shape, levels, bands, band_of })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Total number of coefficients.
    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn band_of(&self, j: usize) -> usize {
        self.band_of[j] as usize
    }

    /// Expands one value per band into one value per coefficient.
    pub fn broadcast(&self, per_band: &[f64]) -> Vec<f64> {
        assert_eq!(per_band.len(), self.n_bands());
        self.band_of.iter().map(|&b| per_band[b as usize]).collect()
    }

    /// Mean of `values` over each band.
    pub fn band_means(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        self.bands
            .iter()
            .map(|b| values[b.range.clone()].iter().sum::<f64>() / b.len() as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs {
    pub data: Vec<C64>,
    pub map: Arc<SubbandMap>,
}

impl WaveletCoeffs {
    pub fn zeros(map: Arc<SubbandMap>) -> Self {
        Self { data: vec![C64::default(); map.len()], map }
    }

    pub fn band(&self, b: usize) -> &[C64] {
        &self.data[self.map.bands[b].range.clone()]
    }

    pub fn norm(&self) -> f64 {
        crate::array::norm2(self.data.iter())
    }
}

fn analyze_lane(mut lane: ArrayViewMut1<C64>, lo: &[f64], hi: &[f64], buf: &mut Vec<C64>) {
    let n = lane.len();
    let half = n / 2;
    buf.clear();
    buf.extend(lane.iter().copied());
    for k in 0..half {
        let (mut a, mut d) = (C64::default(), C64::default());
        for t in 0..lo.len() {
            let x = buf[(2 * k + t) % n];
            a += x * lo[t];
            d += x * hi[t];
        }
        lane[k] = a;
        lane[half + k] = d;
    }
}

fn synthesize_lane(mut lane: ArrayViewMut1<C64>, lo: &[f64], hi: &[f64], buf: &mut Vec<C64>) {
    let n = lane.len();
    let half = n / 2;
    buf.clear();
    buf.extend(lane.iter().copied());
    lane.fill(C64::default());
    for k in 0..half {
        let (a, d) = (buf[k], buf[half + k]);
        for t in 0..lo.len() {
            lane[(2 * k + t) % n] += a * lo[t] + d * hi[t];
        }
    }
}

/// Forward transform into the in-place pyramid layout.
fn pyramid_forward(grid: &mut Array2<C64>, levels: usize) {
    let (h, w) = grid.dim();
    let hi = db4_hi();
    let mut buf = Vec::with_capacity(h.max(w));
    for l in 0..levels {
        let (rh, rw) = (h >> l, w >> l);
        let mut region = grid.slice_mut(s![..rh, ..rw]);
        for row in region.axis_iter_mut(Axis(0)) {
            analyze_lane(row, &DB4_LO, &hi, &mut buf);
        }
        for col in region.axis_iter_mut(Axis(1)) {
            analyze_lane(col, &DB4_LO, &hi, &mut buf);
        }
    }
}

fn pyramid_inverse(grid: &mut Array2<C64>, levels: usize) {
    let (h, w) = grid.dim();
    let hi = db4_hi();
    let mut buf = Vec::with_capacity(h.max(w));
    for l in (0..levels).rev() {
        let (rh, rw) = (h >> l, w >> l);
        let mut region = grid.slice_mut(s![..rh, ..rw]);
        for col in region.axis_iter_mut(Axis(1)) {
            synthesize_lane(col, &DB4_LO, &hi, &mut buf);
        }
        for row in region.axis_iter_mut(Axis(0)) {
            synthesize_lane(row, &DB4_LO, &hi, &mut buf);
        }
    }
}

fn flatten(grid: &Array2<C64>, map: &SubbandMap) -> Vec<C64> {
    let mut out = Vec::with_capacity(map.len());
    for b in &map.bands {
        let (r0, c0) = b.pyramid_origin();
        out.extend(grid.slice(s![r0..r0 + b.rows, c0..c0 + b.cols]).iter().copied());
    }
    out
}

fn unflatten(data: &[C64], map: &SubbandMap) -> Array2<C64> {
    let mut grid = Array2::zeros(map.shape);
    for b in &map.bands {
        let (r0, c0) = b.pyramid_origin();
        let src = ArrayView2::from_shape((b.rows, b.cols), &data[b.range.clone()]).unwrap();
        grid.slice_mut(s![r0..r0 + b.rows, c0..c0 + b.cols]).assign(&src);
    }
    grid
}

pub fn dwt2(img: &ArrayView2<C64>, levels: usize) -> Result<WaveletCoeffs> {
    let map = Arc::new(SubbandMap::new(img.dim(), levels)?);
    Ok(dwt2_with(img, &map))
}

/// Analysis with a prebuilt map; the image shape must match the map.
pub fn dwt2_with(img: &ArrayView2<C64>, map: &Arc<SubbandMap>) -> WaveletCoeffs {
    assert_eq!(img.dim(), map.shape, "image shape does not match subband map");
    let mut grid = img.to_owned();
    pyramid_forward(&mut grid, map.levels);
    WaveletCoeffs { data: flatten(&grid, map), map: map.clone() }
}

pub fn idwt2(coeffs: &WaveletCoeffs) -> Result<Array2<C64>> {
    if coeffs.data.len() != coeffs.map.len() {
        return Err(Error::shape(format!(
            "{} coefficients for a {}-coefficient subband map",
            coeffs.data.len(),
            coeffs.map.len()
        )));
    }
    let mut grid = unflatten(&coeffs.data, &coeffs.map);
    pyramid_inverse(&mut grid, coeffs.map.levels);
    Ok(grid)
}

/// One-dimensional atom of a band type at `scale`, for translate index 0,
/// periodized on length `n`. Translate `k` is this atom shifted by `2^scale * k`.
pub fn atom_1d(n: usize, scale: usize, high: bool) -> Vec<f64> {
    let hi = db4_hi();
    let mut lane = vec![C64::default(); n];
    let m = n >> scale;
    lane[if high { m } else { 0 }] = C64::new(1.0, 0.0);
    let mut buf = Vec::with_capacity(n);
    let mut arr = ndarray::Array1::from(lane);
    for l in (0..scale).rev() {
        let len = n >> l;
        synthesize_lane(arr.slice_mut(s![..len]), &DB4_LO, &hi, &mut buf);
    }
    arr.iter().map(|z| z.re).collect()
}

/// Applies a periodic, stride-`2^scale` correlation with a nonnegative
/// weight atom along one axis: `out[k] = sum_p atom[(p - 2^scale k) mod n] x[p]`.
fn correlate_axis(x: &Array2<C64>, atom: &[f64], scale: usize, axis: Axis) -> Array2<C64> {
    let n = x.len_of(axis);
    let m = n >> scale;
    let step = 1usize << scale;
    let support: Vec<(usize, f64)> = atom.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
    let mut shape = [x.nrows(), x.ncols()];
    shape[axis.index()] = m;
    let mut out = Array2::<C64>::zeros((shape[0], shape[1]));
    for (src, mut dst) in x.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        for k in 0..m {
            let mut acc = C64::default();
            for &(off, v) in &support {
                acc += src[(off + step * k) % n] * v;
            }
            dst[k] = acc;
        }
    }
    out
}

/// Applies the entrywise-squared analysis matrix: output `j` is
/// `sum_i |Psi_ji|^2 img_i`.
///
/// Every 2-D atom is a tensor product of two periodized 1-D atoms at the same
/// scale, so `|Psi_j|^2` factors into squared 1-D atoms and the product is a
/// separable strided correlation per band.
pub fn squared_filter_dwt2(img: &ArrayView2<C64>, levels: usize) -> Result<WaveletCoeffs> {
    let map = Arc::new(SubbandMap::new(img.dim(), levels)?);
    Ok(squared_filter_dwt2_with(img, &map))
}

pub fn squared_filter_dwt2_with(img: &ArrayView2<C64>, map: &Arc<SubbandMap>) -> WaveletCoeffs {
    assert_eq!(img.dim(), map.shape, "image shape does not match subband map");
    let (h, w) = map.shape;
    let img = img.to_owned();
    let mut data = Vec::with_capacity(map.len());
    for b in &map.bands {
        let (hi0, hi1) = b.orientation.highs();
        let sq = |a: Vec<f64>| a.into_iter().map(|v| v * v).collect::<Vec<_>>();
        let atom0 = sq(atom_1d(h, b.scale, hi0));
        let atom1 = sq(atom_1d(w, b.scale, hi1));
        let partial = correlate_axis(&img, &atom1, b.scale, Axis(1));
        let out = correlate_axis(&partial, &atom0, b.scale, Axis(0));
        data.extend(out.iter().copied());
    }
    WaveletCoeffs { data, map: map.clone() }
}

/// The 2-D atom for translate 0 of band `b`.
pub fn band_atom(map: &SubbandMap, b: usize) -> Array2<f64> {
    let band = &map.bands[b];
    let (h, w) = map.shape;
    let (hi0, hi1) = band.orientation.highs();
    let a0 = atom_1d(h, band.scale, hi0);
    let a1 = atom_1d(w, band.scale, hi1);
    Array2::from_shape_fn((h, w), |(p, q)| a0[p] * a1[q])
}

/// Per-band k-space power spectrum `|fft2c(atom_b)|^2`, one `(H, W)` map per
/// band. Every coefficient of a band shares its band's spectrum because the
/// band's atoms are translates of one another.
pub fn subband_power_spectra(map: &SubbandMap) -> Vec<Array2<f64>> {
    check_even(map.shape.0, map.shape.1).expect("subband maps have even shapes");
    (0..map.n_bands())
        .map(|b| {
            let mut atom = band_atom(map, b).mapv(|v| C64::new(v, 0.0));
            fft::transform_inplace(&mut atom, false);
            atom.mapv(|z| z.norm_sqr())
        })
        .collect()
}
