//! Runtime checks of the regularity contracts the theory rests on.
//!
//! The multiplicative model needs a forward map that is polynomially
//! bounded, Lipschitz on bounded sets, and bounded away from zero on the
//! admissible set; the noise density must integrate to one with mean one
//! and decay no faster than a power at the origin. All of these are
//! measurable on a concrete configuration, which is what this example does.
//!
//! Run with: cargo run --example assumption_probes

use multinoise::forward::{probes, ForwardMap};
use multinoise::noise::{ComponentDensity, MultiplicativeDensity};
use multinoise::prior::{GaussianPrior, StateVector};
use multinoise::stats::ls_slope;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> multinoise::Result<()> {
    let n = 4;
    let j = 5;
    let prior = GaussianPrior::matern_like(n, 1.0, 1.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Polynomial bound |G(u)| ≤ C(1 + |u|^p) for the linear map: p ≤ 1.
    let linear = ForwardMap::linear(
        DMatrix::from_fn(j, n, |r, c| 0.4 * ((r * n + c) as f64 + 1.0).ln()),
        nalgebra::DVector::from_element(j, 0.3),
    )?;
    let scales = [0.5, 1.0, 4.0, 16.0, 64.0, 256.0];
    let (c, p) = probes::fit_polynomial_bound(&linear, &prior, &scales, 50, &mut rng)?;
    println!("linear map polynomial bound : C = {c:.3}, p = {p:.3}");

    // Positivity of the exp-affine map inside the admissible ball.
    let radius = 8.0;
    let exp_map = ForwardMap::exp_affine(
        DMatrix::from_fn(j, n, |r, c| 0.5 * ((r + 2 * c) as f64).cos()),
        0.2,
        radius,
    )?;
    let mut min_component = f64::INFINITY;
    for _ in 0..1000 {
        let mut u = prior.sample(&mut rng);
        let norm = u.x_norm();
        if norm > radius {
            u.coeffs *= radius / norm;
        }
        let g = exp_map.apply(&u)?;
        min_component = min_component.min(g.values.min());
    }
    println!(
        "exp-affine positivity       : min over 1000 draws = {min_component:.4} (ε = {})",
        exp_map.eps_lower()
    );

    // Local Lipschitz constant on a ball.
    let l = probes::empirical_lipschitz(&exp_map, &prior, radius, 500, &mut rng)?;
    println!("exp-affine Lipschitz L(r=8) : {l:.3}");

    // A state outside the ball is rejected, not clamped.
    let outside = StateVector::new(vec![10.0, 0.0, 0.0, 0.0])?;
    println!(
        "outside the ball            : {}",
        exp_map.apply(&outside).unwrap_err()
    );

    // Noise density contracts: unit mass, unit mean, power-law behaviour
    // near the origin (slope α − 1 for the Gamma factor).
    println!("\nnoise density spot checks (mass, mean):");
    for comp in [
        ComponentDensity::Gamma { alpha: 2.5 },
        ComponentDensity::LogNormal { sigma2: 0.4 },
        ComponentDensity::Gaussian { var: 0.3 },
    ] {
        let dens = MultiplicativeDensity::new(vec![comp.clone()])?;
        let (mass, mean) = dens.spot_check(200)[0];
        println!("  {comp:?}: ({mass:.8}, {mean:.8})");
    }
    let alpha = 2.5;
    let gamma = ComponentDensity::Gamma { alpha };
    let rs: Vec<f64> = (1..=20).map(|i| 1e-4 * i as f64).collect();
    let slope = ls_slope(
        &rs.iter().map(|r| r.ln()).collect::<Vec<_>>(),
        &rs.iter().map(|&r| gamma.log_pdf(r)).collect::<Vec<_>>(),
    );
    println!(
        "  Gamma small-argument exponent: {slope:.3} (α − 1 = {:.1})",
        alpha - 1.0
    );
    Ok(())
}
