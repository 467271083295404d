//! Empirical well-posedness: Hellinger distance under data perturbations.
//!
//! The posterior is continuous in the data with
//! d_Hell(μʸ, μʸ′) ≤ C|y − y′| on bounded data sets. The example estimates
//! the distance by prior importance sampling for a ladder of perturbation
//! sizes and fits the slope (an empirical C), first for the mixed model and
//! then for a purely multiplicative one, where perturbations must stay
//! inside the noise support.
//!
//! Run with: cargo run --example hellinger_wellposedness

use multinoise::forward::{DataVector, ForwardMap};
use multinoise::hellinger::{hellinger_estimate, wellposedness_sweep};
use multinoise::noise::{ComponentDensity, MixedGaussianNoise, MultiplicativeDensity};
use multinoise::objective::{NoiseModel, Potential};
use multinoise::prior::GaussianPrior;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> multinoise::Result<()> {
    // Analytic sanity check: two Gaussian posteriors N(0,1) and N(1,1) have
    // squared Hellinger distance 1 − exp(−1/8).
    let prior = GaussianPrior::new(vec![2.0])?;
    let make = |y: f64| {
        Potential::new(
            ForwardMap::linear(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap(),
            NoiseModel::MixedGaussian(MixedGaussianNoise::isotropic(1, 2.0, 0.0).unwrap()),
            DataVector::new(vec![y]).unwrap(),
        )
        .unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let est = hellinger_estimate(&make(0.0), &make(2.0), &prior, 100_000, &mut rng)?;
    let exact_sq: f64 = 1.0 - (-1.0f64 / 8.0).exp();
    println!(
        "Gaussian pair: d² = {:.5} ± {:.5} (exact {:.5}), ESS = ({:.0}, {:.0})",
        est.value_sq, est.sq_std_err, exact_sq, est.ess.0, est.ess.1
    );

    // Sweep for the mixed model on a 2-D nonlinear problem.
    let n = 2;
    let j = 2;
    let prior = GaussianPrior::matern_like(n, 1.0, 1.0)?;
    let matrix = DMatrix::from_row_slice(j, n, &[0.7, -0.2, 0.3, 0.8]);
    let forward = ForwardMap::exp_affine(matrix, 0.1, 50.0)?;
    let noise = MixedGaussianNoise::isotropic(j, 0.2, 0.1)?;
    let base_y = DataVector::new(vec![1.4, 1.0])?;
    let factory = {
        let forward = forward.clone();
        move |y: DataVector| {
            Potential::new(forward.clone(), NoiseModel::MixedGaussian(noise.clone()), y)
        }
    };
    let deltas = [0.0, 0.04, 0.08, 0.16, 0.32];
    let sweep = wellposedness_sweep(
        &base_y,
        &DataVector::new(vec![1.0, -1.0])?,
        &deltas,
        factory,
        &prior,
        100_000,
        &mut rng,
    )?;
    println!("\nmixed model sweep:");
    println!("{:>10} {:>12} {:>12}", "|y - y'|", "d_Hell", "stderr");
    for row in &sweep.rows {
        println!(
            "{:>10.3} {:>12.5} {:>12.5}",
            row.data_distance, row.hellinger, row.std_err
        );
    }
    println!("fitted slope (empirical C): {:.4}", sweep.slope);

    // The multiplicative model restricts data to the support interior;
    // perturbations crossing out are a domain error, not a number.
    let dens = MultiplicativeDensity::iid(ComponentDensity::Gamma { alpha: 4.0 }, 1)?;
    let factory = |y: DataVector| {
        Potential::new(
            ForwardMap::exp_affine(DMatrix::zeros(1, 1), 0.5, 10.0).unwrap(),
            NoiseModel::Multiplicative(dens.clone()),
            y,
        )
    };
    let err = wellposedness_sweep(
        &DataVector::new(vec![0.3])?,
        &DataVector::new(vec![-1.0])?,
        &[0.1, 0.5],
        factory,
        &GaussianPrior::new(vec![1.0])?,
        10_000,
        &mut rng,
    )
    .unwrap_err();
    println!("\nmultiplicative model, y' leaving the support: {err}");
    Ok(())
}
