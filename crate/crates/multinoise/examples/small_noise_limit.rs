//! Small-noise MAP consistency for the mixed Gaussian model.
//!
//! Data yₙ = (𝟏 + ηᵐ/n)𝒢(u†) + ηᵃ/n is generated with both noises shrunk
//! by 1/n; the MAP estimator uₙ minimizes
//! ½‖u‖²_E + (n²/2)|𝒢(u) − yₙ|²_{Γ(u)} + ½ log det Γ(u). The forward values
//! 𝒢(uₙ) approach 𝒢(u†) at rate 1/n (the squared weighted misfit is
//! bounded by (‖u†‖²_E + K)/n²).
//!
//! Run with: cargo run --example small_noise_limit

use multinoise::consistency::{small_noise_experiment, SmallNoiseOptions};
use multinoise::forward::ForwardMap;
use multinoise::noise::MixedGaussianNoise;
use multinoise::prior::{GaussianPrior, TruthSpec};
use multinoise::stats::ls_slope;
use nalgebra::DMatrix;

fn main() -> multinoise::Result<()> {
    let n_dim = 4;
    let j = 6;
    let prior = GaussianPrior::matern_like(n_dim, 1.0, 1.5)?;
    let matrix = DMatrix::from_fn(j, n_dim, |r, c| 0.5 * ((1 + r + 3 * c) as f64).sin());
    let forward = ForwardMap::exp_affine(matrix, 0.05, 100.0)?;
    let noise = MixedGaussianNoise::isotropic(j, 0.4, 0.25)?;
    let truth = TruthSpec::new(vec![0.7, -0.4, 0.2, 0.1], true)?;

    let n_list = [2, 4, 8, 16, 32, 64];
    let run = small_noise_experiment(
        &truth,
        &forward,
        &noise,
        &prior,
        &n_list,
        &SmallNoiseOptions::default(),
        2024,
    )?;

    println!(
        "{:>6} {:>14} {:>14} {:>12} {:>10}",
        "n", "|G(un)-G(ud)|", "weighted", "objective", "converged"
    );
    for rec in &run.records {
        println!(
            "{:>6} {:>14.6} {:>14.6} {:>12.4} {:>10}",
            rec.n, rec.misfit_y, rec.misfit_gamma, rec.map.value, rec.map.converged
        );
    }
    let xs: Vec<f64> = run.records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = run.records.iter().map(|r| r.misfit_y.ln()).collect();
    println!(
        "\nlog-log misfit slope for this seed: {:.3} (theory: −1)",
        ls_slope(&xs, &ys)
    );
    Ok(())
}
