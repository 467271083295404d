//! The Onsager–Machlup objective I(u) = c·(Φ(u; y) + ½‖u‖²_E).
//!
//! MAP estimators are computed as minimizers of this functional over the
//! Cameron–Martin space; the scale c > 0 covers the rescaled functionals of
//! the asymptotic experiments and never moves the argmin. Domain violations
//! (states outside the admissible ball, data ratios outside the noise
//! support) evaluate to +∞, the extended-value convention the optimizer's
//! line search understands.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DataVector, ForwardMap};
use crate::noise::{
    dphi_mixed_gaussian_dg, dphi_multiplicative_dg, phi_gamma, phi_mixed_gaussian,
    phi_multiplicative, MixedGaussianNoise, MixedQuadrature, MultiplicativeDensity,
};
use crate::prior::{GaussianPrior, StateVector};

/// A likelihood family, evaluated at forward values g and data y.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// Φ ≡ 0: the posterior equals the prior. Useful as a stub and for
    /// sampler validation.
    Zero,
    /// Purely multiplicative noise with a factored density.
    Multiplicative(MultiplicativeDensity),
    /// Purely multiplicative Gamma noise in misfit form,
    /// Φ = α Σ (log gⱼ + yⱼ/gⱼ).
    Gamma { alpha: f64 },
    /// Mixed Gaussian noise with closed-form potential.
    MixedGaussian(MixedGaussianNoise),
    /// Factored mixed noise integrated by quadrature.
    MixedQuadrature(MixedQuadrature),
}

impl NoiseModel {
    pub fn phi(&self, g: &DataVector, y: &DataVector) -> Result<f64> {
        match self {
            NoiseModel::Zero => Ok(0.0),
            NoiseModel::Multiplicative(dens) => phi_multiplicative(dens, g, y),
            NoiseModel::Gamma { alpha } => phi_gamma(*alpha, g, y),
            NoiseModel::MixedGaussian(noise) => phi_mixed_gaussian(noise, g, y),
            NoiseModel::MixedQuadrature(quad) => quad.phi(g, y),
        }
    }

    pub fn dphi_dg(&self, g: &DataVector, y: &DataVector) -> Result<DVector<f64>> {
        match self {
            NoiseModel::Zero => Ok(DVector::zeros(g.dim())),
            NoiseModel::Multiplicative(dens) => dphi_multiplicative_dg(dens, g, y),
            NoiseModel::Gamma { alpha } => {
                let mut grad = DVector::zeros(g.dim());
                for j in 0..g.dim() {
                    let (gj, yj) = (g.values[j], y.values[j]);
                    if gj <= 0.0 {
                        return Err(Error::NonPositiveForward { index: j, value: gj });
                    }
                    grad[j] = alpha * (1.0 / gj - yj / (gj * gj));
                }
                Ok(grad)
            }
            NoiseModel::MixedGaussian(noise) => dphi_mixed_gaussian_dg(noise, g, y),
            NoiseModel::MixedQuadrature(quad) => quad.dphi_dg(g, y),
        }
    }
}

/// Φ(u; y) bound to a forward map, a noise model and observed data.
#[derive(Debug, Clone)]
pub struct Potential {
    pub forward: ForwardMap,
    pub noise: NoiseModel,
    pub data: DataVector,
}

impl Potential {
    pub fn new(forward: ForwardMap, noise: NoiseModel, data: DataVector) -> Result<Self> {
        if forward.output_dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: forward.output_dim(),
                got: data.dim(),
            });
        }
        Ok(Self {
            forward,
            noise,
            data,
        })
    }

    pub fn phi(&self, u: &StateVector) -> Result<f64> {
        let g = self.forward.apply(u)?;
        self.noise.phi(&g, &self.data)
    }

    /// Extended-value potential: domain violations become +∞, anything else
    /// stays an error.
    pub fn phi_extended(&self, u: &StateVector) -> Result<f64> {
        match self.phi(u) {
            Ok(v) => Ok(v),
            Err(e) if e.is_domain_violation() => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// ∇Φ(u) = J(u)ᵀ · dΦ/dg.
    pub fn grad(&self, u: &StateVector) -> Result<DVector<f64>> {
        let g = self.forward.apply(u)?;
        let dphi = self.noise.dphi_dg(&g, &self.data)?;
        let jac = self.forward.jacobian(u)?;
        Ok(jac.transpose() * dphi)
    }
}

/// Stopping and line-search parameters for the quasi-Newton minimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Convergence when ‖∇I‖ ≤ grad_tol · max(1, |I|).
    pub grad_tol: f64,
    /// Secant pairs kept by the limited-memory update.
    pub memory: usize,
    /// Backtracking contraction factor.
    pub ls_shrink: f64,
    /// Sufficient-decrease constant.
    pub ls_c1: f64,
    pub max_line_search_steps: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tol: 1e-8,
            memory: 10,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            max_line_search_steps: 60,
        }
    }
}

/// Anything the minimizer can descend: an extended-value objective with a
/// gradient available at finite points.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Ok(+∞) marks an infeasible point; Err is a hard failure.
    fn value(&self, u: &DVector<f64>) -> Result<f64>;
    fn value_grad(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

/// The Onsager–Machlup functional bound to a potential, a prior and an
/// overall scale.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub potential: Potential,
    pub prior: GaussianPrior,
    pub scale: f64,
}

impl ObjectiveSpec {
    pub fn new(potential: Potential, prior: GaussianPrior, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(
                "objective scale must be positive".into(),
            ));
        }
        if potential.forward.input_dim() != prior.dim() {
            return Err(Error::DimensionMismatch {
                expected: potential.forward.input_dim(),
                got: prior.dim(),
            });
        }
        Ok(Self {
            potential,
            prior,
            scale,
        })
    }

    /// I(u) = c·(Φ(u) + ½‖u‖²_E); +∞ on domain violations.
    pub fn objective(&self, u: &StateVector) -> Result<f64> {
        let phi = self.potential.phi_extended(u)?;
        Ok(self.scale * (phi + 0.5 * self.prior.cm_norm_sq(u)?))
    }

    /// ∇I(u) = c·(J(u)ᵀ dΦ/dg + C₀⁻¹ u).
    pub fn gradient(&self, u: &StateVector) -> Result<DVector<f64>> {
        let phi_grad = self.potential.grad(u)?;
        let prior_grad = self.prior.cm_grad(u)?;
        Ok(self.scale * (phi_grad + prior_grad))
    }

    /// Central finite-difference gradient of the objective; the independent
    /// check of the analytic path.
    pub fn gradient_fd(&self, u: &StateVector, h: f64) -> Result<DVector<f64>> {
        let mut grad = DVector::zeros(u.dim());
        let mut probe = u.clone();
        for k in 0..u.dim() {
            probe.coeffs[k] = u.coeffs[k] + h;
            let fp = self.objective(&probe)?;
            probe.coeffs[k] = u.coeffs[k] - h;
            let fm = self.objective(&probe)?;
            probe.coeffs[k] = u.coeffs[k];
            grad[k] = (fp - fm) / (2.0 * h);
        }
        Ok(grad)
    }
}

impl Objective for ObjectiveSpec {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn value(&self, u: &DVector<f64>) -> Result<f64> {
        self.objective(&StateVector::from_vector(u.clone()))
    }

    fn value_grad(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let state = StateVector::from_vector(u.clone());
        let value = self.objective(&state)?;
        if !value.is_finite() {
            return Err(Error::Other(
                "gradient requested at an infeasible point".into(),
            ));
        }
        Ok((value, self.gradient(&state)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_stub_spec(n: usize) -> ObjectiveSpec {
        let forward =
            ForwardMap::linear(DMatrix::identity(n, n), DVector::zeros(n)).unwrap();
        let potential = Potential::new(
            forward,
            NoiseModel::Zero,
            DataVector::new(vec![0.0; n]).unwrap(),
        )
        .unwrap();
        ObjectiveSpec::new(potential, GaussianPrior::matern_like(n, 1.0, 1.0).unwrap(), 1.0)
            .unwrap()
    }

    #[test]
    fn zero_potential_objective_is_prior_energy() {
        let spec = zero_stub_spec(3);
        assert_eq!(spec.objective(&StateVector::zeros(3)).unwrap(), 0.0);
        let u = StateVector::new(vec![0.5, -1.0, 2.0]).unwrap();
        assert_relative_eq!(
            spec.objective(&u).unwrap(),
            0.5 * spec.prior.cm_norm_sq(&u).unwrap(),
            epsilon = 1e-14
        );
        assert_eq!(
            spec.gradient(&StateVector::zeros(3)).unwrap(),
            DVector::zeros(3)
        );
    }

    #[test]
    fn tikhonov_oracle_for_linear_additive_gaussian() {
        // Γᵐ = 0 degenerates to the classic regularized least squares
        // objective ½|Au + b − y|²_Γᵃ + ½‖u‖²_E (+ const), computed here
        // directly.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 1.2]);
        let b = DVector::from_vec(vec![0.1, -0.2]);
        let y = DataVector::new(vec![0.7, 0.4]).unwrap();
        let noise = MixedGaussianNoise::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25])),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let prior = GaussianPrior::new(vec![1.0, 0.5]).unwrap();
        let forward = ForwardMap::linear(a.clone(), b.clone()).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(forward, NoiseModel::MixedGaussian(noise), y.clone()).unwrap(),
            prior.clone(),
            1.0,
        )
        .unwrap();

        let u = StateVector::new(vec![0.3, -0.6]).unwrap();
        let r = &a * &u.coeffs + &b - &y.values;
        let tikhonov = 0.5 * (r[0] * r[0] / 0.5 + r[1] * r[1] / 0.25)
            + 0.5 * (u.coeffs[0] * u.coeffs[0] / 1.0 + u.coeffs[1] * u.coeffs[1] / 0.5);
        let logdet_const = 0.5 * (0.5f64 * 0.25).ln();
        assert_relative_eq!(
            spec.objective(&u).unwrap(),
            tikhonov + logdet_const,
            epsilon = 1e-12
        );
    }

    #[test]
    fn analytic_gradient_matches_fd_for_mixed_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3;
        let j = 4;
        let a = DMatrix::from_fn(j, n, |r, c| 0.4 * ((r * 3 + c) as f64).sin());
        let forward = ForwardMap::exp_affine(a, 0.05, 100.0).unwrap();
        let noise = MixedGaussianNoise::isotropic(j, 0.3, 0.2).unwrap();
        let prior = GaussianPrior::matern_like(n, 1.0, 1.0).unwrap();
        let y = DataVector::new(vec![1.2, 0.8, 1.5, 1.0]).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(forward, NoiseModel::MixedGaussian(noise), y).unwrap(),
            prior.clone(),
            1.0,
        )
        .unwrap();
        for _ in 0..5 {
            let u = prior.sample(&mut rng);
            let analytic = spec.gradient(&u).unwrap();
            let fd = spec.gradient_fd(&u, 1e-6).unwrap();
            let rel = (&analytic - &fd).norm() / analytic.norm().max(1e-12);
            assert!(rel <= 1e-5, "relative gradient error {rel}");
        }
    }

    #[test]
    fn gradient_scales_linearly_with_objective_scale() {
        let spec = zero_stub_spec(2);
        let mut scaled = spec.clone();
        scaled.scale = 7.5;
        let u = StateVector::new(vec![1.0, -2.0]).unwrap();
        let g1 = spec.gradient(&u).unwrap();
        let g2 = scaled.gradient(&u).unwrap();
        assert_relative_eq!((g2 - 7.5 * g1).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_violations_give_infinite_objective() {
        let forward = ForwardMap::exp_affine(DMatrix::identity(1, 1), 0.1, 1.0).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(
                forward,
                NoiseModel::Gamma { alpha: 1.0 },
                DataVector::new(vec![1.0]).unwrap(),
            )
            .unwrap(),
            GaussianPrior::new(vec![1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let outside = StateVector::new(vec![5.0]).unwrap();
        assert_eq!(spec.objective(&outside).unwrap(), f64::INFINITY);
    }
}
