//! Simulated receive coils: normalization, the per-coefficient flat-coil
//! constants xi, and PCA compression to virtual coils.

use std::sync::Arc;

use pvdamp::coil::{calibration_samples, compute_xi, pca_compress, simulate_sensitivities_with, SensitivityConfig};
use pvdamp::data::{acquire, make_phantom, PhantomKind};
use pvdamp::aliasing::NoiseCov;
use pvdamp::sampling::SamplingMask;
use pvdamp::wavelet::SubbandMap;

fn main() -> pvdamp::Result<()> {
    let shape = (64, 64);
    let coils = simulate_sensitivities_with(shape, &SensitivityConfig::new(8, 4))?;
    let sos_max = (0..64 * 64)
        .map(|p| (0..8).map(|c| coils.coil(c)[[p / 64, p % 64]].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    println!("8 coils, max sum of squared sensitivities {sos_max:.6}");

    let map = Arc::new(SubbandMap::new(shape, 4)?);
    let xi = compute_xi(&coils, &map)?;
    for b in [0, 1, map.n_bands() - 1] {
        let band = &map.bands()[b];
        let j = band.range.start + band.len() / 2;
        let mass: f64 = (0..8).map(|c| xi.xi[[c, j]].norm_sqr()).sum();
        println!("band {b:>2} ({:?}, scale {}): sum_c |xi_c|^2 = {mass:.4} at its middle coefficient", band.orientation, band.scale);
    }

    let x0 = make_phantom(shape, 2, PhantomKind::BlobsAndVessels).x0;
    let full = acquire(&x0, &coils, &SamplingMask::full(shape), &NoiseCov::zeros(8), 0)?;
    let calib = calibration_samples(&full, (16, 16));
    let (virt, pca) = pca_compress(&calib, &full, 4)?;
    println!("\nPCA: singular values {:?}", pca.singular_values.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>());
    for k in 1..=8 {
        println!("  {k} virtual coils keep {:.2}% of calibration energy", 100.0 * pca.retained_energy(k));
    }
    let kept = virt.norm().powi(2) / full.norm().powi(2);
    println!("4 virtual coils keep {:.2}% of the full k-space energy", 100.0 * kept);
    let vcoils = pca.compress_sensitivities(&coils)?;
    println!("compressed sensitivity set has {} coils", vcoils.n_coils());
    Ok(())
}
