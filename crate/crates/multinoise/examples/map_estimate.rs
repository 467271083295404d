//! MAP estimation for a nonlinear forward map under mixed Gaussian noise.
//!
//! Builds a small exp-affine problem, synthesizes data from a known truth,
//! minimizes the Onsager–Machlup functional from several starts, and prints
//! the per-start landscape (the objective is non-convex even for linear
//! maps, so distinct local optima are expected).
//!
//! Run with: cargo run --example map_estimate

use multinoise::forward::ForwardMap;
use multinoise::lbfgs::minimize;
use multinoise::noise::MixedGaussianNoise;
use multinoise::objective::{MinimizeOptions, NoiseModel, ObjectiveSpec, Potential};
use multinoise::prior::{GaussianPrior, StateVector};
use multinoise::config::synthesize_data;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> multinoise::Result<()> {
    let n = 4;
    let j = 6;
    let prior = GaussianPrior::matern_like(n, 1.0, 1.5)?;
    let matrix = DMatrix::from_fn(j, n, |r, c| 0.6 * ((1 + r * n + c) as f64).sin());
    let forward = ForwardMap::exp_affine(matrix, 0.05, 100.0)?;
    let noise = MixedGaussianNoise::isotropic(j, 0.02, 0.05)?;

    // Truth and synthetic data.
    let truth = StateVector::new(vec![0.8, -0.5, 0.3, 0.1])?;
    let g_truth = forward.apply(&truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let data = synthesize_data(
        &g_truth,
        &NoiseModel::MixedGaussian(noise.clone()),
        &mut rng,
    )?;
    println!("truth forward values : {:.4?}", g_truth.values.as_slice());
    println!("observed data        : {:.4?}", data.values.as_slice());

    let spec = ObjectiveSpec::new(
        Potential::new(forward.clone(), NoiseModel::MixedGaussian(noise), data)?,
        prior.clone(),
        1.0,
    )?;

    // Multi-start: the origin, the truth, and prior draws.
    let mut starts = vec![DVector::zeros(n), truth.coeffs.clone()];
    for _ in 0..8 {
        starts.push(prior.sample(&mut rng).coeffs);
    }
    let result = minimize(&spec, &starts, &MinimizeOptions::default())?;

    println!("\nper-start outcomes:");
    for s in &result.starts {
        println!(
            "  start {:2}: value = {:10.5}  |grad| = {:9.2e}  iters = {:3}  {}",
            s.start_index, s.value, s.grad_norm, s.iterations, s.stop_reason
        );
    }
    println!("\nbest value     : {:.6}", result.value);
    println!("converged      : {}", result.converged);
    println!("MAP estimate   : {:.4?}", result.minimizer.coeffs.as_slice());
    println!("truth          : {:.4?}", truth.coeffs.as_slice());
    let g_map = forward.apply(&result.minimizer)?;
    println!(
        "forward misfit |G(u_map) - G(u_truth)| = {:.4}",
        (g_map.values - g_truth.values).norm()
    );
    Ok(())
}
