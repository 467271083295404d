//! Asymptotic MAP experiments for the mixed Gaussian model: the small-noise
//! limit, the large-data limit functional, and the effect of dropping the
//! log-determinant term.
//!
//! Small noise: data yₙ = (𝟏 + ηᵐ/n)𝒢(u†) + ηᵃ/n with both noise
//! covariances shrunk by 1/n², so the MAP functional is
//!
//! ```text
//! Iₙ(u) = ½‖u‖²_E + (n²/2)|𝒢(u) − yₙ|²_{Γ(u)} + ½ log det Γ(u),
//! ```
//!
//! whose minimizers' forward values converge to 𝒢(u†).
//!
//! Large data: n independent observations y_k = (𝟏 + ηᵐ_k)𝒢(u†) + ηᵃ_k give
//!
//! ```text
//! Jₙ(u) = (1/n)‖u‖²_E + (1/n)Σ_k |𝒢(u) − y_k|²_{Γ(u)} + log det Γ(u)
//! ```
//!
//! with almost-sure limit
//!
//! ```text
//! 𝒥(u) = |𝒢(u†) − 𝒢(u)|²_{Γ(u)} + tr(Γ(u†)Γ(u)⁻¹) + log det Γ(u),
//! ```
//!
//! minimized exactly on the fiber 𝒢(u) = 𝒢(u†). Omitting the log-det from
//! Jₙ moves the minimizer off that fiber, which the experiment exposes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{DataVector, ForwardMap};
use crate::lbfgs::{minimize, MapResult};
use crate::noise::{gamma_u, mixed_gaussian_weighted, MixedGaussianNoise};
use crate::objective::{MinimizeOptions, Objective};
use crate::prior::{GaussianPrior, StateVector, TruthSpec};

/// A weighted mixed-Gaussian variational functional,
///
/// ```text
/// F(u) = prior_w·‖u‖²_E + misfit_w·( |𝒢(u) − y|²_{Γ(u)} + tr(Γ(u)⁻¹ S) )
///        + logdet_w·log det Γ(u),
/// ```
///
/// covering the plain potential (½, ½), the small-noise Iₙ (½, n²/2, ½),
/// its 2/n² rescaling, the large-data Jₙ (1/n, 1, 1) with scatter S, and the
/// log-det-omitted variant (logdet_w = 0).
#[derive(Debug, Clone)]
pub struct MixedGaussianFunctional {
    pub forward: ForwardMap,
    pub noise: MixedGaussianNoise,
    pub prior: GaussianPrior,
    pub y_center: DataVector,
    pub scatter: Option<DMatrix<f64>>,
    pub prior_w: f64,
    pub misfit_w: f64,
    pub logdet_w: f64,
}

impl MixedGaussianFunctional {
    fn terms(&self, u: &StateVector) -> Result<Option<(f64, DataVector)>> {
        let g = match self.forward.apply(u) {
            Ok(g) => g,
            Err(e) if e.is_domain_violation() => return Ok(None),
            Err(e) => return Err(e),
        };
        let (misfit, _) = mixed_gaussian_weighted(
            &self.noise,
            &g,
            &self.y_center,
            self.scatter.as_ref(),
            self.misfit_w,
            self.logdet_w,
        )?;
        Ok(Some((misfit, g)))
    }
}

impl Objective for MixedGaussianFunctional {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn value(&self, u: &DVector<f64>) -> Result<f64> {
        let state = StateVector::from_vector(u.clone());
        match self.terms(&state)? {
            None => Ok(f64::INFINITY),
            Some((misfit, _)) => {
                Ok(self.prior_w * self.prior.cm_norm_sq(&state)? + misfit)
            }
        }
    }

    fn value_grad(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let state = StateVector::from_vector(u.clone());
        let g = self.forward.apply(&state)?;
        let (misfit, grad_g) = mixed_gaussian_weighted(
            &self.noise,
            &g,
            &self.y_center,
            self.scatter.as_ref(),
            self.misfit_w,
            self.logdet_w,
        )?;
        let value = self.prior_w * self.prior.cm_norm_sq(&state)? + misfit;
        let jac = self.forward.jacobian(&state)?;
        let grad =
            2.0 * self.prior_w * self.prior.cm_grad(&state)? + jac.transpose() * grad_g;
        Ok((value, grad))
    }
}

/// One draw yₙ = (𝟏 + ηᵐ/n)𝒢(u†) + ηᵃ/n. Deterministic for a fixed
/// generator state; both covariances must be strictly positive definite.
pub fn gen_small_noise_data<R: Rng>(
    g_truth: &DataVector,
    noise: &MixedGaussianNoise,
    n: u32,
    rng: &mut R,
) -> Result<DataVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("noise level index n must be ≥ 1".into()));
    }
    crate::linalg::SpdMatrix::new(noise.gamma_m().clone())
        .map_err(|_| Error::NotSpd("small-noise data model needs Γᵐ ≻ 0".into()))?;
    let (eta_a, eta_m) = noise.sample_noises(rng);
    let scale = 1.0 / n as f64;
    let values = &g_truth.values
        + scale * eta_m.component_mul(&g_truth.values)
        + scale * eta_a;
    Ok(DataVector::from_vector(values))
}

/// Per-level record of a small-noise run.
#[derive(Debug, Clone, Serialize)]
pub struct SmallNoiseRecord {
    pub n: u32,
    pub data: Vec<f64>,
    pub map: MapResult,
    /// |𝒢(uₙ) − 𝒢(u†)|.
    pub misfit_y: f64,
    /// |𝒢(uₙ) − 𝒢(u†)|_{Γ(uₙ)}.
    pub misfit_gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallNoiseRun {
    pub records: Vec<SmallNoiseRecord>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SmallNoiseOptions {
    pub n_prior_starts: usize,
    pub minimize: MinimizeOptions,
    /// Force both noises to zero, so yₙ = 𝒢(u†) exactly.
    pub zero_noise: bool,
}

impl Default for SmallNoiseOptions {
    fn default() -> Self {
        Self {
            n_prior_starts: 4,
            minimize: MinimizeOptions::default(),
            zero_noise: false,
        }
    }
}

fn build_starts<R: Rng>(
    prior: &GaussianPrior,
    truth: Option<&StateVector>,
    n_prior_starts: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let mut starts = vec![DVector::zeros(prior.dim())];
    if let Some(t) = truth {
        starts.push(t.coeffs.clone());
    }
    for _ in 0..n_prior_starts {
        starts.push(prior.sample(rng).coeffs);
    }
    starts
}

/// Minimize Iₙ over the levels in `n_list` (strictly increasing), recording
/// forward misfits against the truth. Non-converged levels are recorded and
/// the run continues.
pub fn small_noise_experiment(
    truth: &TruthSpec,
    forward: &ForwardMap,
    noise: &MixedGaussianNoise,
    prior: &GaussianPrior,
    n_list: &[u32],
    opts: &SmallNoiseOptions,
    seed: u64,
) -> Result<SmallNoiseRun> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "noise levels must be strictly increasing".into(),
        ));
    }
    let g_truth = forward.apply(&truth.state)?;
    let mut records = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let data = if opts.zero_noise {
            g_truth.clone()
        } else {
            gen_small_noise_data(&g_truth, noise, n, &mut rng)?
        };
        let functional = MixedGaussianFunctional {
            forward: forward.clone(),
            noise: noise.clone(),
            prior: prior.clone(),
            y_center: data.clone(),
            scatter: None,
            prior_w: 0.5,
            misfit_w: 0.5 * (n as f64) * (n as f64),
            logdet_w: 0.5,
        };
        let starts = build_starts(prior, Some(&truth.state), opts.n_prior_starts, &mut rng);
        let map = minimize(&functional, &starts, &opts.minimize)?;
        let g_map = forward.apply(&map.minimizer)?;
        let r = &g_map.values - &g_truth.values;
        let gamma = gamma_u(noise, &g_map)?;
        records.push(SmallNoiseRecord {
            n,
            data: data.values.as_slice().to_vec(),
            misfit_y: r.norm(),
            misfit_gamma: gamma.inv_quadratic_form(&r).sqrt(),
            map,
        });
    }
    Ok(SmallNoiseRun { records, seed })
}

/// Large-data limit functional
/// 𝒥(u) = |𝒢(u†) − 𝒢(u)|²_{Γ(u)} + tr(Γ(u†)Γ(u)⁻¹) + log det Γ(u),
/// evaluated from the two forward values. The trace uses triangular solves
/// against the columns of Γ(u†); no inverse is formed.
pub fn limit_functional_j(
    g_u: &DataVector,
    g_truth: &DataVector,
    noise: &MixedGaussianNoise,
) -> Result<f64> {
    let gamma = gamma_u(noise, g_u)?;
    let gamma_truth = gamma_u(noise, g_truth)?;
    let r = &g_truth.values - &g_u.values;
    Ok(gamma.inv_quadratic_form(&r)
        + gamma.trace_inv_times(gamma_truth.matrix())
        + gamma.log_det())
}

/// Per-n record of a large-data run.
#[derive(Debug, Clone, Serialize)]
pub struct LargeDataRecord {
    pub n: usize,
    /// Jₙ at each probe state.
    pub jn_at_probes: Vec<f64>,
    /// 𝒥 at each probe state.
    pub limit_at_probes: Vec<f64>,
    pub map: MapResult,
    pub misfit_y: f64,
    /// The same minimization without the log-det term, when requested.
    pub map_no_logdet: Option<MapResult>,
    pub misfit_no_logdet: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LargeDataRun {
    pub records: Vec<LargeDataRecord>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LargeDataOptions {
    pub n_prior_starts: usize,
    pub minimize: MinimizeOptions,
    /// Also minimize the variant without log det Γ(u).
    pub with_logdet_omitted: bool,
}

impl Default for LargeDataOptions {
    fn default() -> Self {
        Self {
            n_prior_starts: 4,
            minimize: MinimizeOptions::default(),
            with_logdet_omitted: false,
        }
    }
}

/// Draw n observation batches, reduce them to mean and scatter, and study
/// Jₙ: its values at probe states against 𝒥, and its minimizer's forward
/// misfit (optionally also for the log-det-omitted functional).
pub fn large_data_experiment(
    truth: &TruthSpec,
    forward: &ForwardMap,
    noise: &MixedGaussianNoise,
    prior: &GaussianPrior,
    n_list: &[usize],
    probes: &[StateVector],
    opts: &LargeDataOptions,
    seed: u64,
) -> Result<LargeDataRun> {
    let g_truth = forward.apply(&truth.state)?;
    let j = g_truth.dim();
    let mut records = Vec::with_capacity(n_list.len());

    for (idx, &n) in n_list.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidParameter("observation count must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64 + 1);

        // One pass over the synthetic observations accumulates the
        // sufficient statistics (mean, scatter) that Jₙ depends on.
        let mut sum = DVector::zeros(j);
        let mut outer = DMatrix::zeros(j, j);
        for _ in 0..n {
            let (eta_a, eta_m) = noise.sample_noises(&mut rng);
            let y_k = &g_truth.values + eta_m.component_mul(&g_truth.values) + eta_a;
            outer += &y_k * y_k.transpose();
            sum += y_k;
        }
        let ybar = sum / n as f64;
        let mut scatter = outer / n as f64 - &ybar * ybar.transpose();
        // Enforce exact symmetry lost to accumulation order.
        for r in 0..j {
            for c in 0..r {
                let s = 0.5 * (scatter[(r, c)] + scatter[(c, r)]);
                scatter[(r, c)] = s;
                scatter[(c, r)] = s;
            }
        }
        let y_center = DataVector::from_vector(ybar);

        let functional = MixedGaussianFunctional {
            forward: forward.clone(),
            noise: noise.clone(),
            prior: prior.clone(),
            y_center: y_center.clone(),
            scatter: Some(scatter.clone()),
            prior_w: 1.0 / n as f64,
            misfit_w: 1.0,
            logdet_w: 1.0,
        };

        let mut jn_at_probes = Vec::with_capacity(probes.len());
        let mut limit_at_probes = Vec::with_capacity(probes.len());
        for probe in probes {
            jn_at_probes.push(functional.value(&probe.coeffs)?);
            let g_probe = forward.apply(probe)?;
            limit_at_probes.push(limit_functional_j(&g_probe, &g_truth, noise)?);
        }

        let starts = build_starts(prior, Some(&truth.state), opts.n_prior_starts, &mut rng);
        let map = minimize(&functional, &starts, &opts.minimize)?;
        let misfit_y = (forward.apply(&map.minimizer)?.values - &g_truth.values).norm();

        let (map_no_logdet, misfit_no_logdet) = if opts.with_logdet_omitted {
            let mut omitted = functional.clone();
            omitted.logdet_w = 0.0;
            let m = minimize(&omitted, &starts, &opts.minimize)?;
            let mis = (forward.apply(&m.minimizer)?.values - &g_truth.values).norm();
            (Some(m), Some(mis))
        } else {
            (None, None)
        };

        records.push(LargeDataRecord {
            n,
            jn_at_probes,
            limit_at_probes,
            map,
            misfit_y,
            map_no_logdet,
            misfit_no_logdet,
        });
    }
    Ok(LargeDataRun { records, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn identity_forward(n: usize) -> ForwardMap {
        ForwardMap::linear(DMatrix::identity(n, n), DVector::zeros(n)).unwrap()
    }

    #[test]
    fn zero_noise_data_equals_truth_forward() {
        let noise = MixedGaussianNoise::isotropic(2, 0.1, 0.1).unwrap();
        let truth = TruthSpec::new(vec![0.4, -0.6], true).unwrap();
        let forward = identity_forward(2);
        let prior = GaussianPrior::matern_like(2, 1.0, 1.0).unwrap();
        let run = small_noise_experiment(
            &truth,
            &forward,
            &noise,
            &prior,
            &[2, 4],
            &SmallNoiseOptions {
                zero_noise: true,
                ..Default::default()
            },
            7,
        )
        .unwrap();
        let g_truth = forward.apply(&truth.state).unwrap();
        for rec in &run.records {
            for (a, b) in rec.data.iter().zip(g_truth.values.iter()) {
                assert_eq!(a, b);
            }
        }
        // With exact data the misfit shrinks as the noise level drops.
        assert!(run.records[1].misfit_y <= run.records[0].misfit_y + 1e-12);
    }

    #[test]
    fn small_noise_data_moments_match_model() {
        // Mean ≈ 𝒢(u†) and covariance ≈ Γ(u†)/n² over replicates.
        use rand::SeedableRng;
        let noise = MixedGaussianNoise::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.05, 0.05, 0.2]),
        )
        .unwrap();
        let g_truth = DataVector::new(vec![1.5, -0.7]).unwrap();
        let n = 2u32;
        let reps = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sum = DVector::zeros(2);
        let mut outer = DMatrix::zeros(2, 2);
        for _ in 0..reps {
            let y = gen_small_noise_data(&g_truth, &noise, n, &mut rng).unwrap();
            sum += &y.values;
            outer += &y.values * y.values.transpose();
        }
        let mean = sum / reps as f64;
        let cov = outer / reps as f64 - &mean * mean.transpose();
        let expected = gamma_u(&noise, &g_truth).unwrap().matrix() / (n as f64 * n as f64);
        for i in 0..2 {
            // 3σ for a Gaussian mean estimate.
            let sd = (expected[(i, i)] / reps as f64).sqrt();
            assert!(
                (mean[i] - g_truth.values[i]).abs() < 3.0 * sd,
                "mean[{i}] = {} vs {}",
                mean[i],
                g_truth.values[i]
            );
            for j in 0..2 {
                // Var of a Gaussian covariance entry ≈ (ΓᵢᵢΓⱼⱼ + Γᵢⱼ²)/N.
                let var = (expected[(i, i)] * expected[(j, j)]
                    + expected[(i, j)] * expected[(i, j)])
                    / reps as f64;
                assert!(
                    (cov[(i, j)] - expected[(i, j)]).abs() < 3.0 * var.sqrt(),
                    "cov[{i},{j}] = {} vs {}",
                    cov[(i, j)],
                    expected[(i, j)]
                );
            }
        }
    }

    #[test]
    fn limit_functional_on_the_truth_fiber() {
        let noise = MixedGaussianNoise::isotropic(3, 0.4, 0.2).unwrap();
        let g = DataVector::new(vec![1.0, -0.5, 2.0]).unwrap();
        let gamma = gamma_u(&noise, &g).unwrap();
        assert_relative_eq!(
            limit_functional_j(&g, &g, &noise).unwrap(),
            3.0 + gamma.log_det(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn limit_functional_scalar_hand_value() {
        // Γ(u) = 2, Γ(u†) = 1 with equal forward values: the excess over the
        // minimum is t − log t − 1 at t = 1/2.
        let noise = MixedGaussianNoise::isotropic(1, 1.0, 1.0).unwrap();
        // g = 0 gives Γ = 1; g = 1 gives Γ = 2.
        let g_truth = DataVector::new(vec![0.0]).unwrap();
        let g_u = DataVector::new(vec![1.0]).unwrap();
        let j_u = limit_functional_j(&g_u, &g_truth, &noise).unwrap();
        let j_star = limit_functional_j(&g_truth, &g_truth, &noise).unwrap();
        let t: f64 = 0.5;
        // The misfit term |𝒢(u†) − 𝒢(u)|²_{Γ(u)} = 1/2 also enters.
        let expect = (t - t.ln() - 1.0) + 0.5;
        assert_relative_eq!(j_u - j_star, expect, epsilon = 1e-12);
    }

    #[test]
    fn limit_functional_excess_decomposition_is_nonnegative() {
        // 𝒥(u) − 𝒥(u*) = misfit + Σ(λᵢ − log λᵢ − 1) with the eigenvalues of
        // Γ(u†)Γ(u)⁻¹, each term nonnegative.
        use rand::{Rng, SeedableRng};
        let noise = MixedGaussianNoise::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.6]),
        )
        .unwrap();
        let g_truth = DataVector::new(vec![1.2, -0.8]).unwrap();
        let j_star = limit_functional_j(&g_truth, &g_truth, &noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let g = DataVector::new(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                .unwrap();
            let excess = limit_functional_j(&g, &g_truth, &noise).unwrap() - j_star;
            assert!(excess >= -1e-10, "excess {excess}");

            let gamma = gamma_u(&noise, &g).unwrap();
            let gamma_truth = gamma_u(&noise, &g_truth).unwrap();
            let eigs = gamma.eigenvalues_of_inv_times(gamma_truth.matrix());
            let mut term_sum = 0.0;
            for l in eigs {
                let term = l - l.ln() - 1.0;
                assert!(term >= -1e-12, "eigenvalue term {term}");
                term_sum += term;
            }
            let r = &g_truth.values - &g.values;
            let misfit = gamma.inv_quadratic_form(&r);
            assert_relative_eq!(excess, misfit + term_sum, epsilon = 1e-8);
        }
    }

    #[test]
    fn small_noise_identity_map_misfit_shrinks() {
        let n_dim = 3;
        let truth = TruthSpec::new(vec![0.5, -0.3, 0.8], true).unwrap();
        let forward = identity_forward(n_dim);
        let noise = MixedGaussianNoise::isotropic(n_dim, 0.5, 0.3).unwrap();
        let prior = GaussianPrior::matern_like(n_dim, 1.0, 1.0).unwrap();
        let run = small_noise_experiment(
            &truth,
            &forward,
            &noise,
            &prior,
            &[2, 64],
            &SmallNoiseOptions::default(),
            3,
        )
        .unwrap();
        assert!(
            run.records[1].misfit_y < run.records[0].misfit_y,
            "{} !< {}",
            run.records[1].misfit_y,
            run.records[0].misfit_y
        );
    }

    #[test]
    fn rescaled_small_noise_functional_keeps_the_argmin() {
        let n_dim = 2;
        let forward = identity_forward(n_dim);
        let noise = MixedGaussianNoise::isotropic(n_dim, 0.4, 0.2).unwrap();
        let prior = GaussianPrior::matern_like(n_dim, 1.0, 1.0).unwrap();
        let y = DataVector::new(vec![0.9, -0.2]).unwrap();
        let level = 8.0f64;
        let base = MixedGaussianFunctional {
            forward,
            noise,
            prior,
            y_center: y,
            scatter: None,
            prior_w: 0.5,
            misfit_w: 0.5 * level * level,
            logdet_w: 0.5,
        };
        let mut rescaled = base.clone();
        let c = 2.0 / (level * level);
        rescaled.prior_w *= c;
        rescaled.misfit_w *= c;
        rescaled.logdet_w *= c;
        let opts = MinimizeOptions::default();
        let start = [DVector::zeros(n_dim)];
        let a = minimize(&base, &start, &opts).unwrap();
        let b = minimize(&rescaled, &start, &opts).unwrap();
        assert!(
            (a.minimizer.coeffs - b.minimizer.coeffs).amax() < 1e-5,
            "argmins differ"
        );
    }

    #[test]
    fn large_data_probe_values_approach_the_limit() {
        let n_dim = 2;
        let truth = TruthSpec::new(vec![0.6, -0.4], true).unwrap();
        let forward = identity_forward(n_dim);
        let noise = MixedGaussianNoise::isotropic(n_dim, 0.3, 0.2).unwrap();
        let prior = GaussianPrior::matern_like(n_dim, 1.0, 1.0).unwrap();
        let probes = vec![
            StateVector::new(vec![0.0, 0.0]).unwrap(),
            StateVector::new(vec![1.0, 0.5]).unwrap(),
        ];
        let run = large_data_experiment(
            &truth,
            &forward,
            &noise,
            &prior,
            &[100, 10_000],
            &probes,
            &LargeDataOptions::default(),
            5,
        )
        .unwrap();
        for p in 0..probes.len() {
            let err_small = (run.records[0].jn_at_probes[p] - run.records[0].limit_at_probes[p])
                .abs();
            let err_large = (run.records[1].jn_at_probes[p] - run.records[1].limit_at_probes[p])
                .abs();
            assert!(
                err_large < err_small,
                "probe {p}: {err_large} !< {err_small}"
            );
        }
        assert!(run.records[1].misfit_y < 0.2, "{}", run.records[1].misfit_y);
    }
}
