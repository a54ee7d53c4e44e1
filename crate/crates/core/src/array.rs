//! Dense complex containers for image-domain and multi-coil k-space data.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Validated complex image: finite entries, both dimensions even and at least 8.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage(Array2<C64>);

impl ComplexImage {
    pub fn new(data: Array2<C64>) -> Result<Self> {
        let (h, w) = data.dim();
        check_image_dims(h, w)?;
        if !all_finite(data.iter()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Self(data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_image_dims(rows, cols)?;
        Ok(Self(Array2::zeros((rows, cols))))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(self.0.iter())
    }
}

/// Per-coil frequency-domain data, shape `(coils, rows, cols)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCoilKSpace(Array3<C64>);

impl MultiCoilKSpace {
    pub fn new(data: Array3<C64>) -> Result<Self> {
        let (nc, h, w) = data.dim();
        if nc == 0 {
            return Err(Error::shape("multi-coil data needs at least one coil"));
        }
        check_even(h, w)?;
        if !all_finite(data.iter()) {
            return Err(Error::NonFinite("k-space"));
        }
        Ok(Self(data))
    }

    pub fn n_coils(&self) -> usize {
        self.0.dim().0
    }

    pub fn shape(&self) -> (usize, usize) {
        let (_, h, w) = self.0.dim();
        (h, w)
    }

    pub fn coil(&self, c: usize) -> ArrayView2<'_, C64> {
        self.0.index_axis(Axis(0), c)
    }

    pub fn as_array(&self) -> &Array3<C64> {
        &self.0
    }

    pub fn into_inner(self) -> Array3<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(self.0.iter())
    }
}

pub(crate) fn check_even(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::shape(format!("dimensions must be even and nonzero, got {h}x{w}")));
    }
    Ok(())
}

fn check_image_dims(h: usize, w: usize) -> Result<()> {
    check_even(h, w)?;
    if h < 8 || w < 8 {
        return Err(Error::shape(format!("image dimensions must be at least 8, got {h}x{w}")));
    }
    Ok(())
}

pub fn norm2<'a>(it: impl IntoIterator<Item = &'a C64>) -> f64 {
    it.into_iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inner product `<a, b> = sum conj(a_i) b_i`.
pub fn inner<'a>(
    a: impl IntoIterator<Item = &'a C64>,
    b: impl IntoIterator<Item = &'a C64>,
) -> C64 {
    a.into_iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
