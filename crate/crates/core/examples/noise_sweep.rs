//! Reconstruction quality against input SNR for the two P-VDAMP outputs.

use pvdamp::data::{build_scenario, ScenarioConfig};
use pvdamp::eval::evaluate;
use pvdamp::solver::{pvdamp, OutputMode, SolverConfig};
use rayon::prelude::*;

fn main() -> pvdamp::Result<()> {
    let snrs = [10.0, 20.0, 30.0, 40.0];
    println!("SNR dB  pvdamp output  unbiased output  (median NMSE dB over 3 seeds)");
    for snr in snrs {
        let rows: Vec<(f64, f64)> = (1..=3u64)
            .into_par_iter()
            .map(|seed| {
                let mut cfg = ScenarioConfig::new((64, 64), 5.0, (8, 8), seed);
                cfg.density.p_min = 0.05;
                cfg.snr_db = snr;
                let sc = build_scenario(&cfg)?;
                let y = sc.y.as_array();
                let run = |mode| -> pvdamp::Result<f64> {
                    let cfg = SolverConfig { output_mode: mode, ..SolverConfig::pvdamp() };
                    let out = pvdamp(&y.view(), &sc.mask, &sc.density, &sc.coils, &sc.noise.cov, &cfg)?;
                    Ok(evaluate(&out.x_hat.view(), &sc.x0.view())?.nmse_db)
                };
                Ok((run(OutputMode::Pvdamp)?, run(OutputMode::Unbiased)?))
            })
            .collect::<pvdamp::Result<_>>()?;
        let mut a: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut b: Vec<f64> = rows.iter().map(|r| r.1).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        println!("{snr:>6}  {:>13.2}  {:>15.2}", a[1], b[1]);
    }
    Ok(())
}
