//! Centered, unitary 2-D discrete Fourier transforms.
//!
//! DC sits at index `(H/2, W/2)` and both directions are scaled by
//! `1/sqrt(H*W)`, so `ifft2c` is both the inverse and the adjoint of `fft2c`.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut1, Axis};
use rustfft::{Fft, FftPlanner};

use crate::array::{all_finite, check_even, C64};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

pub fn fft2c(x: &ArrayView2<C64>) -> Result<Array2<C64>> {
    checked(x, false)
}

pub fn ifft2c(x: &ArrayView2<C64>) -> Result<Array2<C64>> {
    checked(x, true)
}

fn checked(x: &ArrayView2<C64>, inverse: bool) -> Result<Array2<C64>> {
    let (h, w) = x.dim();
    check_even(h, w)?;
    if !all_finite(x.iter()) {
        return Err(Error::NonFinite("fft input"));
    }
    let mut out = x.to_owned();
    transform_inplace(&mut out, inverse);
    Ok(out)
}

/// Unchecked in-place centered transform; dimensions must be even.
pub(crate) fn transform_inplace(x: &mut Array2<C64>, inverse: bool) {
    let (h, w) = x.dim();
    debug_assert!(h % 2 == 0 && w % 2 == 0);
    let scale = 1.0 / ((h * w) as f64).sqrt();

    let row_fft = plan(w, inverse);
    let mut line = vec![C64::default(); w.max(h)];
    let mut scratch = vec![C64::default(); row_fft.get_inplace_scratch_len()];
    for row in x.axis_iter_mut(Axis(0)) {
        shifted_fft(row, &*row_fft, &mut line, &mut scratch, 1.0);
    }

    let col_fft = plan(h, inverse);
    scratch.resize(col_fft.get_inplace_scratch_len(), C64::default());
    for col in x.axis_iter_mut(Axis(1)) {
        shifted_fft(col, &*col_fft, &mut line, &mut scratch, scale);
    }
}

// Even n makes fftshift and ifftshift the same half-length rotation.
fn shifted_fft(
    mut lane: ArrayViewMut1<C64>,
    fft: &dyn Fft<f64>,
    line: &mut [C64],
    scratch: &mut [C64],
    scale: f64,
) {
    let n = lane.len();
    let half = n / 2;
    let buf = &mut line[..n];
    for i in 0..n {
        buf[(i + half) % n] = lane[i];
    }
    fft.process_with_scratch(buf, scratch);
    for i in 0..n {
        lane[i] = buf[(i + half) % n] * scale;
    }
}
