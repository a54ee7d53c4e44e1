//! The aliasing model at the first iteration: predicted per-band error
//! variance against the actual error of the density-compensated estimate,
//! and a Gaussianity check of the normalized error.

use std::sync::Arc;

use pvdamp::aliasing::{empirical_error, normalized_residual, AliasingModel};
use pvdamp::data::{build_scenario, ScenarioConfig};
use pvdamp::eval::{se_report, SeBounds};
use pvdamp::solver::zero_filled;
use pvdamp::wavelet::{dwt2_with, SubbandMap};

fn main() -> pvdamp::Result<()> {
    let mut cfg = ScenarioConfig::new((64, 64), 5.0, (8, 8), 1);
    cfg.density.p_min = 0.05;
    let sc = build_scenario(&cfg)?;
    let y = sc.y.as_array();

    let map = Arc::new(SubbandMap::new((64, 64), 4)?);
    let model = AliasingModel::new(&sc.coils, &map)?;
    let tau = model.tau_update(&y.view(), &sc.mask, &sc.density, &sc.noise.cov)?;
    let r0 = dwt2_with(&zero_filled(&y.view(), &sc.mask, &sc.density, &sc.coils)?.view(), &map);
    let w0 = dwt2_with(&sc.x0.view(), &map);
    let (_, actual) = empirical_error(&r0, &w0);

    println!("band  orient  scale  coeffs  model tau   actual err  ratio");
    for (b, band) in map.bands().iter().enumerate() {
        let model_tau = tau.band_means()[b];
        println!(
            "{b:>4}  {:>6?}  {:>5}  {:>6}  {model_tau:.3e}  {:.3e}  {:.2}",
            band.orientation,
            band.scale,
            band.len(),
            actual[b],
            actual[b] / model_tau
        );
    }

    let eta = normalized_residual(&r0, &w0, &tau);
    let report = se_report(&[eta], &map, SeBounds::STRICT)?;
    let p = &report.iterations[0].pooled;
    println!(
        "\nnormalized error over {} coefficients: var {:.3}/{:.3} (0.5 expected), excess kurtosis {:.3}/{:.3}, strict bounds {}",
        p.n,
        p.var_re,
        p.var_im,
        p.kurt_re,
        p.kurt_im,
        if report.pass { "hold" } else { "fail" }
    );
    Ok(())
}
