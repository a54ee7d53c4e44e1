//! The on-disk array format (a JSON header beside a raw little-endian
//! payload) and run manifests.

use ndarray::{Array2, ArrayD};
use pvdamp::cli::manifest::{Artifact, RunManifest};
use pvdamp::io::{file_pair, load_array, load_complex, save_complex, save_real};
use pvdamp::C64;

fn main() -> pvdamp::Result<()> {
    let dir = std::env::temp_dir().join("pvdamp-array-io");
    std::fs::create_dir_all(&dir)?;

    let img = Array2::from_shape_fn((4, 6), |(i, j)| C64::new(i as f64, -(j as f64) * 0.5));
    let path = dir.join("img");
    save_complex(&path, &img)?;
    let (json, bin) = file_pair(&path);
    println!("header {}:\n{}", json.display(), std::fs::read_to_string(&json)?);
    println!("payload {} bytes", std::fs::metadata(&bin)?.len());

    let raw = load_array(&path)?;
    println!("dtype {:?}, shape {:?}", raw.dtype(), raw.shape());
    let back: ArrayD<C64> = load_complex(&path)?;
    let err = back.iter().zip(img.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("round-trip error {err:.1e}");

    save_real(dir.join("density"), &Array2::from_elem((4, 6), 0.25))?;
    let m = RunManifest::new(
        "example",
        serde_json::json!({ "note": "two arrays" }),
        &[Artifact::Array(path.clone())],
        &[Artifact::Array(dir.join("density"))],
    )?;
    let written = m.write(&dir.join("density"))?;
    println!("manifest {}:\n{}", written.display(), std::fs::read_to_string(&written)?);
    Ok(())
}
