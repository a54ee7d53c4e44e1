//! Centered FFT and Daubechies-4 wavelet transform: round trips, energy
//! preservation and the subband layout.

use ndarray::Array2;
use pvdamp::data::{make_phantom, PhantomKind};
use pvdamp::fft::{fft2c, ifft2c};
use pvdamp::wavelet::{dwt2, idwt2};
use pvdamp::C64;

fn energy<'a>(it: impl IntoIterator<Item = &'a C64>) -> f64 {
    it.into_iter().map(|z| z.norm_sqr()).sum()
}

fn main() -> pvdamp::Result<()> {
    let x = make_phantom((64, 64), 3, PhantomKind::Ellipses).x0;

    let k = fft2c(&x.view())?;
    let back = ifft2c(&k.view())?;
    let err = (&back - x.as_array()).iter().map(|d| d.norm()).fold(0.0, f64::max);
    println!("fft2c: image energy {:.6}, k-space energy {:.6}, round-trip error {err:.1e}", energy(x.as_array()), energy(&k));
    println!("DC sample sits at (32, 32): {:.4}", k[[32, 32]]);

    let w = dwt2(&x.view(), 4)?;
    let back = idwt2(&w)?;
    let err = (&back - x.as_array()).iter().map(|d| d.norm()).fold(0.0, f64::max);
    println!("dwt2: coefficient energy {:.6}, round-trip error {err:.1e}", energy(&w.data));

    println!("\nband  orient  scale  size   energy share");
    let total = energy(&w.data);
    for b in w.map.bands() {
        println!(
            "{:>4}  {:>6?}  {:>5}  {:>2}x{:<2}  {:>7.3}%",
            b.id,
            b.orientation,
            b.scale,
            b.rows,
            b.cols,
            100.0 * energy(w.band(b.id)) / total
        );
    }

    let mut sorted: Vec<f64> = w.data.iter().map(|z| z.norm_sqr()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sorted[..sorted.len() / 20].iter().sum();
    println!("\nlargest 5% of coefficients hold {:.2}% of the energy", 100.0 * top / total);

    let impulse = Array2::from_shape_fn((16, 16), |(i, j)| if (i, j) == (8, 8) { C64::new(1.0, 0.0) } else { C64::default() });
    let flat = fft2c(&impulse.view())?;
    println!("centered impulse has a flat spectrum of magnitude {:.4} (1/16)", flat[[0, 0]].norm());
    Ok(())
}
