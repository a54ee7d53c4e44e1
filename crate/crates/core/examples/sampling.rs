//! Variable-density sampling: density construction, Bernoulli mask draws
//! and the realized acceleration.

use pvdamp::sampling::{draw_mask, make_density_with, realized_acceleration, DensityConfig, MaskMode};

fn main() -> pvdamp::Result<()> {
    let shape = (64, 64);
    for (decay, p_min) in [(4.0, 1e-3), (4.0, 0.05), (1.0, 0.05)] {
        let cfg = DensityConfig { decay, p_min, ..DensityConfig::new(shape, 5.0, (8, 8)) };
        let density = make_density_with(&cfg)?;
        let lo = density.p.iter().copied().fold(1.0, f64::min);
        let rs: Vec<String> = (0..5).map(|s| format!("{:.2}", realized_acceleration(&draw_mask(&density, s)))).collect();
        println!(
            "decay {decay}, p_min {p_min}: expected samples {:.1} (N/R = {:.1}), min p {lo:.3}, realized R over 5 masks [{}]",
            density.expected_samples(),
            4096.0 / 5.0,
            rs.join(", ")
        );
    }

    let density = make_density_with(&DensityConfig::new(shape, 5.0, (8, 8)))?;
    let mask = draw_mask(&density, 0);
    println!("\ncentral row of one mask (# = sampled):");
    let row: String = (0..64).map(|j| if mask.m[[32, j]] != 0.0 { '#' } else { '.' }).collect();
    println!("{row}");
    println!("calibration block fully sampled: {}", (28..36).all(|i| (28..36).all(|j| mask.is_sampled((i, j)))));

    let cols = make_density_with(&DensityConfig { mode: MaskMode::Columns, ..DensityConfig::new(shape, 4.0, (64, 8)) })?;
    let m = draw_mask(&cols, 1);
    println!("column mode keeps {} whole columns, R = {:.2}", m.count() / 64, realized_acceleration(&m));
    Ok(())
}
