//! Limited-memory quasi-Newton minimization with backtracking line search.
//!
//! The search direction comes from the standard two-loop recursion over a
//! short history of secant pairs; the step length backtracks until the
//! Armijo sufficient-decrease condition holds. Infinite objective values
//! (domain violations under the extended-value convention) simply fail the
//! decrease test, so the iterates never leave the feasible region. Curvature
//! pairs with non-positive sᵀy are skipped rather than forced.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::objective::{MinimizeOptions, Objective};
use crate::prior::StateVector;

/// Outcome of one start of the minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct StartReport {
    pub start_index: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Why the run stopped: "gradient", "max-iterations", "line-search",
    /// "infeasible-start".
    pub stop_reason: String,
}

/// Best minimizer over all starts, with per-start diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct MapResult {
    pub minimizer: StateVector,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    pub starts: Vec<StartReport>,
}

struct SingleRun {
    point: DVector<f64>,
    report: StartReport,
}

fn lbfgs_single<O: Objective>(
    obj: &O,
    start_index: usize,
    start: &DVector<f64>,
    opts: &MinimizeOptions,
) -> Result<SingleRun> {
    let mut x = start.clone();
    let f0 = obj.value(&x)?;
    if !f0.is_finite() {
        return Ok(SingleRun {
            point: x,
            report: StartReport {
                start_index,
                value: f64::INFINITY,
                grad_norm: f64::INFINITY,
                iterations: 0,
                converged: false,
                stop_reason: "infeasible-start".into(),
            },
        });
    }

    let (mut f, mut grad) = obj.value_grad(&x)?;
    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> =
        VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut stop_reason = "max-iterations".to_string();
    let mut converged = false;
    let mut no_progress = 0usize;

    for iter in 0..opts.max_iterations {
        iterations = iter;
        if grad.norm() <= opts.grad_tol * f.abs().max(1.0) {
            converged = true;
            stop_reason = "gradient".into();
            break;
        }

        let direction = two_loop_direction(&grad, &history);
        let mut descent = grad.dot(&direction);
        // Stale secant pairs can turn the model direction nearly orthogonal
        // to the gradient, stalling the line search on zero-progress steps;
        // reset to steepest descent when the angle degenerates.
        let direction = if descent >= -1e-10 * grad.norm() * direction.norm() {
            history.clear();
            descent = -grad.norm_squared();
            -&grad
        } else {
            direction
        };

        // Backtracking Armijo search; infinite values shrink the step.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_line_search_steps {
            let candidate = &x + t * &direction;
            let fc = obj.value(&candidate)?;
            if fc.is_finite() && fc <= f + opts.ls_c1 * t * descent {
                accepted = Some((candidate, fc));
                break;
            }
            t *= opts.ls_shrink;
        }
        let Some((x_new, _)) = accepted else {
            stop_reason = "line-search".into();
            break;
        };

        let (f_new, grad_new) = obj.value_grad(&x_new)?;
        // Once decreases drop below floating-point resolution, further
        // iterations only wander; stop after a few such steps.
        if f - f_new <= 1e-15 * f.abs().max(1.0) {
            no_progress += 1;
        } else {
            no_progress = 0;
        }
        let s = &x_new - &x;
        let yv = &grad_new - &grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, yv, sy));
        }
        x = x_new;
        f = f_new;
        grad = grad_new;
        if no_progress >= 3 {
            stop_reason = "no-progress".into();
            break;
        }
    }

    if !converged && grad.norm() <= opts.grad_tol * f.abs().max(1.0) {
        converged = true;
        stop_reason = "gradient".into();
    }

    Ok(SingleRun {
        report: StartReport {
            start_index,
            value: f,
            grad_norm: grad.norm(),
            iterations,
            converged,
            stop_reason,
        },
        point: x,
    })
}

fn two_loop_direction(
    grad: &DVector<f64>,
    history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
) -> DVector<f64> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, sy) in history.iter().rev() {
        let alpha = s.dot(&q) / sy;
        q -= alpha * y;
        alphas.push(alpha);
    }
    // Initial Hessian scaling from the most recent pair.
    if let Some((_, y, sy)) = history.back() {
        q *= sy / y.norm_squared();
    }
    for ((s, y, sy), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = y.dot(&q) / sy;
        q += (alpha - beta) * s;
    }
    -q
}

/// Minimize from several starts in parallel and keep the best finite result;
/// ties and ordering are resolved deterministically by (value, start index).
///
/// If every start fails (infeasible or stalled before producing a finite
/// value) the result reports `converged = false` with per-start diagnostics
/// rather than a fabricated answer.
pub fn minimize<O: Objective>(
    obj: &O,
    starts: &[DVector<f64>],
    opts: &MinimizeOptions,
) -> Result<MapResult> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    for s in starts {
        if s.len() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                got: s.len(),
            });
        }
    }

    let runs: Vec<Result<SingleRun>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| lbfgs_single(obj, i, s, opts))
        .collect();
    let mut completed = Vec::with_capacity(runs.len());
    for r in runs {
        completed.push(r?);
    }

    // Deterministic merge by (value, start index), where values within
    // floating-point resolution of the minimum count as ties and a
    // converged run wins the tie.
    let min_value = completed
        .iter()
        .map(|r| r.report.value)
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let tie_band = 1e-12 * min_value.abs().max(1.0);
    let best = completed
        .iter()
        .filter(|r| r.report.value.is_finite() && r.report.value <= min_value + tie_band)
        .min_by_key(|r| (!r.report.converged, r.report.start_index));

    let result = match best {
        Some(best) => MapResult {
            minimizer: StateVector::from_vector(best.point.clone()),
            value: best.report.value,
            grad_norm: best.report.grad_norm,
            iterations: best.report.iterations,
            converged: best.report.converged,
            restarts: starts.len(),
            starts: completed.iter().map(|r| r.report.clone()).collect(),
        },
        None => MapResult {
            minimizer: StateVector::from_vector(starts[0].clone()),
            value: f64::INFINITY,
            grad_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
            restarts: starts.len(),
            starts: completed.iter().map(|r| r.report.clone()).collect(),
        },
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{DataVector, ForwardMap};
    use crate::noise::MixedGaussianNoise;
    use crate::objective::{NoiseModel, ObjectiveSpec, Potential};
    use crate::prior::GaussianPrior;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_spec(n: usize) -> ObjectiveSpec {
        let forward = ForwardMap::linear(DMatrix::identity(n, n), DVector::zeros(n)).unwrap();
        ObjectiveSpec::new(
            Potential::new(
                forward,
                NoiseModel::Zero,
                DataVector::new(vec![0.0; n]).unwrap(),
            )
            .unwrap(),
            GaussianPrior::matern_like(n, 1.0, 1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn pure_quadratic_minimizes_at_zero() {
        let spec = quadratic_spec(4);
        let start = DVector::from_vec(vec![3.0, -2.0, 1.0, 0.5]);
        let result = minimize(&spec, &[start], &MinimizeOptions::default()).unwrap();
        assert!(result.converged);
        assert!(result.minimizer.x_norm() < 1e-6, "{:?}", result.minimizer);
    }

    #[test]
    fn conjugate_map_matches_normal_equations() {
        // Linear forward, additive Gaussian noise: the minimizer solves
        // (AᵀΓᵃ⁻¹A + C₀⁻¹) u = AᵀΓᵃ⁻¹(y − b).
        let n = 5;
        let j = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(j, n, |r, c| {
            use rand::Rng;
            let _ = (r, c);
            rng.gen_range(-1.0..1.0)
        });
        let b = DVector::from_vec(vec![0.1; j]);
        let y = DataVector::new((0..j).map(|i| 0.3 + 0.1 * i as f64).collect()).unwrap();
        let var_a = 0.2;
        let noise = MixedGaussianNoise::isotropic(j, var_a, 0.0).unwrap();
        let prior = GaussianPrior::matern_like(n, 1.0, 1.0).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(
                ForwardMap::linear(a.clone(), b.clone()).unwrap(),
                NoiseModel::MixedGaussian(noise),
                y.clone(),
            )
            .unwrap(),
            prior.clone(),
            1.0,
        )
        .unwrap();

        let mut normal = a.transpose() * &a / var_a;
        for k in 0..n {
            normal[(k, k)] += 1.0 / prior.eigenvalues()[k];
        }
        let rhs = a.transpose() * (&y.values - &b) / var_a;
        let exact = normal.lu().solve(&rhs).unwrap();

        let result = minimize(
            &spec,
            &[DVector::zeros(n)],
            &MinimizeOptions::default(),
        )
        .unwrap();
        assert!(result.converged);
        let err = (&result.minimizer.coeffs - &exact).amax();
        assert!(err <= 1e-6, "max deviation {err}");
    }

    #[test]
    fn multistart_beats_or_ties_single_start() {
        let n = 2;
        let j = 2;
        let a = DMatrix::from_row_slice(j, n, &[0.9, -0.4, 0.2, 1.1]);
        let noise = MixedGaussianNoise::isotropic(j, 0.05, 0.4).unwrap();
        let prior = GaussianPrior::matern_like(n, 1.0, 1.0).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(
                ForwardMap::exp_affine(a, 0.05, 50.0).unwrap(),
                NoiseModel::MixedGaussian(noise),
                DataVector::new(vec![1.8, 0.6]).unwrap(),
            )
            .unwrap(),
            prior.clone(),
            1.0,
        )
        .unwrap();
        let opts = MinimizeOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let single = minimize(&spec, &[DVector::zeros(n)], &opts).unwrap();
        let mut starts = vec![DVector::zeros(n)];
        for _ in 0..8 {
            starts.push(prior.sample(&mut rng).coeffs);
        }
        let multi = minimize(&spec, &starts, &opts).unwrap();
        assert!(multi.value <= single.value + 1e-12);
        assert_eq!(multi.starts.len(), 9);
    }

    #[test]
    fn infeasible_starts_are_reported_not_silently_fixed() {
        let forward = ForwardMap::exp_affine(DMatrix::identity(2, 2), 0.1, 1.0).unwrap();
        let spec = ObjectiveSpec::new(
            Potential::new(
                forward,
                NoiseModel::Gamma { alpha: 1.0 },
                DataVector::new(vec![1.0, 1.0]).unwrap(),
            )
            .unwrap(),
            GaussianPrior::new(vec![1.0, 1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let outside = DVector::from_vec(vec![5.0, 5.0]);
        let result = minimize(&spec, &[outside], &MinimizeOptions::default()).unwrap();
        assert!(!result.converged);
        assert_eq!(result.starts[0].stop_reason, "infeasible-start");
        assert_eq!(result.value, f64::INFINITY);
    }

    #[test]
    fn objective_scale_does_not_move_the_argmin() {
        let base = quadratic_spec(3);
        let mut scaled = base.clone();
        scaled.scale = 2.0 / 64.0;
        let start = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let opts = MinimizeOptions::default();
        let a = minimize(&base, &[start.clone()], &opts).unwrap();
        let b = minimize(&scaled, &[start], &opts).unwrap();
        assert!((a.minimizer.coeffs - b.minimizer.coeffs).amax() < 1e-6);
    }
}
