//! The unknown state and its Gaussian prior.
//!
//! States are truncated Karhunen–Loève coordinate vectors: the prior is a
//! zero-mean Gaussian with diagonal covariance `diag(λ₁, …, λₙ)` in this
//! basis, so drawing a sample is `coeffs[k] ~ N(0, λₖ)` independently. Two
//! norms matter: the Euclidean state-space norm `|u|`, and the Cameron–Martin
//! norm `‖u‖²_E = Σ coeffs[k]²/λₖ` that weights coordinates by the inverse
//! prior variance and acts as the regularizer in MAP estimation.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// KL coordinates of the unknown state `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub coeffs: DVector<f64>,
}

impl StateVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "state coefficients must be finite".into(),
            ));
        }
        Ok(Self {
            coeffs: DVector::from_vec(coeffs),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: DVector::zeros(n),
        }
    }

    pub fn from_vector(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Euclidean state-space norm `|u|`.
    pub fn x_norm(&self) -> f64 {
        self.coeffs.norm()
    }
}

/// Zero-mean Gaussian prior described by its KL variance spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianPrior {
    eigenvalues: Vec<f64>,
}

impl GaussianPrior {
    /// Construct from an explicit spectrum. The variances must be positive
    /// and non-increasing.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("prior dimension must be ≥ 1".into()));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter(
                "prior eigenvalues must be positive and finite".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "prior eigenvalues must be non-increasing".into(),
            ));
        }
        Ok(Self { eigenvalues })
    }

    /// Matérn-like spectrum `λₖ = (τ² + k²)^(−s)`, k = 1..n.
    pub fn matern_like(n: usize, tau: f64, s: f64) -> Result<Self> {
        if s < 0.0 || !tau.is_finite() || !s.is_finite() {
            return Err(Error::InvalidParameter(
                "matern-like spectrum needs finite τ and s ≥ 0".into(),
            ));
        }
        let eigenvalues = (1..=n)
            .map(|k| (tau * tau + (k * k) as f64).powf(-s))
            .collect();
        Self::new(eigenvalues)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn check_dim(&self, u: &StateVector) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(())
    }

    /// Draw `u ~ μ₀`: independent `coeffs[k] ~ N(0, λₖ)`. Deterministic for
    /// a fixed generator state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> StateVector {
        let coeffs = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let xi: f64 = StandardNormal.sample(rng);
                l.sqrt() * xi
            })
            .collect::<Vec<_>>();
        StateVector {
            coeffs: DVector::from_vec(coeffs),
        }
    }

    /// Squared Cameron–Martin norm `‖u‖²_E = Σ coeffs[k]²/λₖ`.
    pub fn cm_norm_sq(&self, u: &StateVector) -> Result<f64> {
        self.check_dim(u)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(u.coeffs.iter())
            .map(|(&l, &c)| c * c / l)
            .sum())
    }

    /// Gradient of `½‖u‖²_E`, i.e. `C₀⁻¹u`.
    pub fn cm_grad(&self, u: &StateVector) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        Ok(DVector::from_iterator(
            u.dim(),
            self.eigenvalues
                .iter()
                .zip(u.coeffs.iter())
                .map(|(&l, &c)| c / l),
        ))
    }
}

/// The true state `u†` an experiment synthesizes data from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSpec {
    pub state: StateVector,
    /// Whether `u†` is treated as Cameron–Martin-regular. With a finite
    /// spectrum every vector has finite E-norm; the flag records which
    /// asymptotic regime an experiment is meant to represent.
    pub in_cameron_martin: bool,
}

impl TruthSpec {
    pub fn new(coeffs: Vec<f64>, in_cameron_martin: bool) -> Result<Self> {
        Ok(Self {
            state: StateVector::new(coeffs)?,
            in_cameron_martin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_nonpositive_eigenvalues() {
        assert!(GaussianPrior::new(vec![0.0, 0.0]).is_err());
        assert!(GaussianPrior::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn rejects_increasing_spectrum() {
        assert!(GaussianPrior::new(vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let prior = GaussianPrior::matern_like(16, 1.0, 1.5).unwrap();
        let a = prior.sample(&mut ChaCha8Rng::seed_from_u64(7));
        let b = prior.sample(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn unit_spectrum_sample_variance_near_one() {
        // Law of large numbers: n = 10⁴ iid N(0,1) coordinates.
        let prior = GaussianPrior::new(vec![1.0; 10_000]).unwrap();
        let u = prior.sample(&mut ChaCha8Rng::seed_from_u64(3));
        let var = u.coeffs.iter().map(|c| c * c).sum::<f64>() / 10_000.0;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn cm_norm_direct_arithmetic() {
        let prior = GaussianPrior::new(vec![1.0, 0.25]).unwrap();
        let u = StateVector::new(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(prior.cm_norm_sq(&u).unwrap(), 5.0);
        assert_eq!(prior.cm_norm_sq(&StateVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn cm_norm_dominates_x_norm_for_small_eigenvalues() {
        let prior = GaussianPrior::new(vec![1.0, 0.5, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u = prior.sample(&mut rng);
            let cm = prior.cm_norm_sq(&u).unwrap().sqrt();
            assert!(cm >= u.x_norm() - 1e-12);
        }
    }

    #[test]
    fn x_norm_examples() {
        assert_eq!(StateVector::zeros(3).x_norm(), 0.0);
        let u = StateVector::new(vec![3.0, 4.0]).unwrap();
        assert_relative_eq!(u.x_norm(), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let prior = GaussianPrior::new(vec![1.0, 1.0]).unwrap();
        let u = StateVector::zeros(3);
        assert!(prior.cm_norm_sq(&u).is_err());
    }

    #[test]
    fn prior_sample_covariance_matches_spectrum() {
        // Empirical variance of ≥10⁵ samples per coordinate within 3σ of λₖ.
        // Var of a sample variance of N(0,λ) over N draws is 2λ²/N.
        let prior = GaussianPrior::matern_like(4, 1.0, 1.0).unwrap();
        let n_samples = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sums = vec![0.0; 4];
        let mut sq = vec![0.0; 4];
        for _ in 0..n_samples {
            let u = prior.sample(&mut rng);
            for k in 0..4 {
                sums[k] += u.coeffs[k];
                sq[k] += u.coeffs[k] * u.coeffs[k];
            }
        }
        for k in 0..4 {
            let lam = prior.eigenvalues()[k];
            let mean = sums[k] / n_samples as f64;
            let var = sq[k] / n_samples as f64 - mean * mean;
            let sigma_var = (2.0 * lam * lam / n_samples as f64).sqrt();
            assert!(
                (var - lam).abs() < 3.0 * sigma_var,
                "coordinate {k}: var {var} vs λ {lam}"
            );
        }
    }

    proptest! {
        #[test]
        fn cm_norm_triangle_inequality(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
        ) {
            let prior = GaussianPrior::matern_like(5, 0.5, 1.0).unwrap();
            let ua = StateVector::new(a.clone()).unwrap();
            let ub = StateVector::new(b.clone()).unwrap();
            let sum = StateVector::new(
                a.iter().zip(&b).map(|(x, y)| x + y).collect(),
            ).unwrap();
            let na = prior.cm_norm_sq(&ua).unwrap().sqrt();
            let nb = prior.cm_norm_sq(&ub).unwrap().sqrt();
            let ns = prior.cm_norm_sq(&sum).unwrap().sqrt();
            prop_assert!(ns <= na + nb + 1e-9);
        }

        #[test]
        fn x_norm_is_homogeneous(
            v in proptest::collection::vec(-5.0f64..5.0, 4),
            c in -3.0f64..3.0,
        ) {
            let u = StateVector::new(v.clone()).unwrap();
            let cu = StateVector::new(v.iter().map(|x| c * x).collect()).unwrap();
            prop_assert!((cu.x_norm() - c.abs() * u.x_norm()).abs() < 1e-9);
        }
    }
}
