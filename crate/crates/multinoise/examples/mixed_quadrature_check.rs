//! Quadrature evaluation of the mixed-noise likelihood against the closed
//! form available when both noises are Gaussian.
//!
//! The marginal density of y given u is a one-dimensional integral per
//! component; Gauss–Hermite handles Gaussian multiplicative factors and
//! Gauss–Legendre on a truncated support handles Gamma factors. Potentials
//! are only defined up to data-only constants, so the comparison differences
//! two states.
//!
//! Run with: cargo run --example mixed_quadrature_check

use multinoise::forward::DataVector;
use multinoise::noise::{
    phi_mixed_gaussian, AdditiveDensity, ComponentDensity, MixedGaussianNoise, MixedQuadrature,
    MultiplicativeDensity,
};

fn main() -> multinoise::Result<()> {
    let j = 3;
    let var_a = 0.25;
    let var_m = 0.16;

    let quad = MixedQuadrature::new(
        AdditiveDensity::isotropic_gaussian(j, var_a)?,
        MultiplicativeDensity::iid(ComponentDensity::Gaussian { var: var_m }, j)?,
        40,
    )?;
    let closed = MixedGaussianNoise::isotropic(j, var_a, var_m)?;

    let y = DataVector::new(vec![1.1, 0.7, 1.4])?;
    let g1 = DataVector::new(vec![1.0, 0.9, 1.2])?;
    let g2 = DataVector::new(vec![1.3, 0.5, 1.6])?;

    let dq = quad.phi(&g1, &y)? - quad.phi(&g2, &y)?;
    let dc = phi_mixed_gaussian(&closed, &g1, &y)? - phi_mixed_gaussian(&closed, &g2, &y)?;
    println!("Gauss-Hermite (40 nodes) state difference : {dq:.12}");
    println!("closed-form state difference              : {dc:.12}");
    println!("absolute deviation                        : {:.3e}", (dq - dc).abs());

    // Node-doubling self-convergence for a Gamma multiplicative factor,
    // where no closed form exists.
    println!("\nGamma multiplicative factor, node-doubling:");
    let additive = AdditiveDensity::isotropic_gaussian(2, 0.3)?;
    let mult = MultiplicativeDensity::iid(ComponentDensity::Gamma { alpha: 3.0 }, 2)?;
    let g = DataVector::new(vec![1.2, 0.8])?;
    let yv = DataVector::new(vec![1.0, 1.1])?;
    let mut prev: Option<f64> = None;
    for nodes in [10, 20, 40, 80, 160] {
        let phi = MixedQuadrature::new(additive.clone(), mult.clone(), nodes)?.phi(&g, &yv)?;
        match prev {
            Some(p) => println!("  nodes {nodes:>4}: phi = {phi:.12}  |Δ| = {:.3e}", (phi - p).abs()),
            None => println!("  nodes {nodes:>4}: phi = {phi:.12}"),
        }
        prev = Some(phi);
    }
    Ok(())
}
