use std::fmt::Write as _;
use std::fs;

use rayon::prelude::*;
use serde_json::json;

use super::commands::{pair, solve, solver_config, Problem};
use super::manifest::{Artifact, RunManifest};
use super::{Algo, SweepArgs, Vary};
use crate::data::{build_scenario, ScenarioConfig};
use crate::error::Result;
use crate::eval;

struct Row {
    value: f64,
    seed: u64,
    algo: Algo,
    lambda: Option<f64>,
    lines: Vec<String>,
}

pub(super) fn sweep(a: SweepArgs) -> Result<()> {
    let shape = pair(&a.shape, "--shape")?;
    let calib = pair(&a.calib, "--calib")?;
    let algos: Vec<Algo> = if a.vary == Vary::Lambda { vec![Algo::Fista] } else { a.algos.clone() };
    let mut points = Vec::new();
    for &v in &a.values {
        for &s in &a.seeds {
            points.extend(algos.iter().map(|&al| (v, s, al)));
        }
    }

    let rows: Vec<Row> = points
        .par_iter()
        .map(|&(value, seed, algo)| -> Result<Row> {
            let mut cfg = ScenarioConfig::new(shape, a.accel, calib, seed);
            cfg.kind = a.kind.into();
            cfg.coils.n_coils = a.n_coils;
            cfg.density.decay = a.decay;
            cfg.density.p_min = a.p_min;
            cfg.snr_db = a.snr_db;
            match a.vary {
                Vary::Snr => cfg.snr_db = value,
                Vary::Accel => cfg.density.accel = value,
                Vary::Lambda => {}
            }
            let sc = build_scenario(&cfg)?;
            let lambda = if a.vary == Vary::Lambda { Some(value) } else { a.lambda };
            let y = sc.y.as_array().clone();
            let problem = Problem {
                y: &y,
                mask: &sc.mask,
                density: Some(&sc.density),
                coils: &sc.coils,
                noise: &sc.noise.cov,
                reference: Some(&sc.x0),
            };
            let scfg = solver_config(algo, &a.solver);
            let solved = solve(algo, &problem, lambda, &scfg, false)?;
            let res = &solved.result;
            let lines = if a.per_iteration {
                res.trace
                    .records
                    .iter()
                    .map(|r| format!("{},{:.6},{}", r.k, r.elapsed_s, r.nmse_db.map_or(String::new(), |v| format!("{v:.6}"))))
                    .collect()
            } else {
                let m = eval::evaluate(&res.x_hat.view(), &sc.x0.view())?;
                vec![format!(
                    "{:.6},{:.6},{:.6},{},{:?}",
                    m.nmse_db, m.ssim, m.hfen, res.iterations_run, res.stop_reason
                )]
            };
            Ok(Row { value, seed, algo, lambda: solved.lambda, lines })
        })
        .collect::<Result<_>>()?;

    let vary = match a.vary {
        Vary::Snr => "snr_db",
        Vary::Accel => "R",
        Vary::Lambda => "lambda",
    };
    let mut csv = if a.per_iteration {
        format!("{vary},seed,algo,lambda,k,elapsed_s,nmse_db\n")
    } else {
        format!("{vary},seed,algo,lambda,nmse_db,ssim,hfen,iterations,stop_reason\n")
    };
    for r in &rows {
        let lambda = r.lambda.map_or(String::new(), |l| format!("{l:.6e}"));
        for line in &r.lines {
            let _ = writeln!(csv, "{},{},{},{},{}", r.value, r.seed, r.algo.name(), lambda, line);
        }
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, csv)?;
    let config = json!({
        "vary": vary,
        "values": a.values,
        "seeds": a.seeds,
        "algos": algos.iter().map(|x| x.name()).collect::<Vec<_>>(),
        "shape": shape,
        "R": a.accel,
        "calib": calib,
        "decay": a.decay,
        "p_min": a.p_min,
        "n_coils": a.n_coils,
        "snr_db": a.snr_db,
        "per_iteration": a.per_iteration,
    });
    let m = RunManifest::new("sweep", config, &[], &[Artifact::File(a.out.clone())])?;
    m.write(&a.out)?;
    eprintln!("wrote {} ({} rows)", a.out.display(), rows.iter().map(|r| r.lines.len()).sum::<usize>());
    Ok(())
}
