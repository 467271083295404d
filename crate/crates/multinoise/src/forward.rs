//! Forward maps 𝒢: ℝⁿ → ℝᴶ and their regularity probes.
//!
//! Three map families are provided:
//!
//! * `linear` — 𝒢(u) = A u + b;
//! * `exp-affine` — 𝒢ⱼ(u) = ε + exp((A u)ⱼ), positive and bounded away from
//!   zero by construction, for the purely multiplicative noise model;
//! * `elliptic-1d` — observations of the solution of
//!   −(e^{w(x)} p′(x))′ = f(x) on [0,1] with p(0) = p(1) = 0, where w is the
//!   KL sine field built from the state coefficients. No positivity holds or
//!   is needed here; the mixed noise model accepts it as-is.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{GaussianPrior, StateVector};

/// Observation vector y ∈ ℝᴶ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataVector {
    pub values: DVector<f64>,
}

impl DataVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "data entries must be finite".into(),
            ));
        }
        Ok(Self {
            values: DVector::from_vec(values),
        })
    }

    pub fn from_vector(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

/// G(u) = diag(𝒢ⱼ(u)) as a dense matrix.
pub fn diag_matrix(g: &DataVector) -> DMatrix<f64> {
    DMatrix::from_diagonal(&g.values)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ForwardKind {
    /// A u + b.
    Linear { matrix: DMatrix<f64>, offset: DVector<f64> },
    /// ε + exp(A u), componentwise.
    ExpAffine { matrix: DMatrix<f64>, eps: f64 },
    /// FD solve of −(e^w p′)′ = f with J equispaced interior observations.
    Elliptic1d { grid_points: usize, observations: usize },
}

/// A forward map with its positivity metadata and admissible ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardMap {
    kind: ForwardKind,
    output_dim: usize,
    input_dim: usize,
    is_positive: bool,
    eps_lower: f64,
    /// Radius of the admissible ball {|u| ≤ R}; positive maps reject states
    /// outside it.
    ball_radius: f64,
}

pub const DEFAULT_BALL_RADIUS: f64 = 1e3;

impl ForwardMap {
    pub fn linear(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: offset.len(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("output dimension must be ≥ 1".into()));
        }
        Ok(Self {
            output_dim: matrix.nrows(),
            input_dim: matrix.ncols(),
            kind: ForwardKind::Linear { matrix, offset },
            is_positive: false,
            eps_lower: 0.0,
            ball_radius: f64::INFINITY,
        })
    }

    pub fn exp_affine(matrix: DMatrix<f64>, eps: f64, ball_radius: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(
                "exp-affine lower bound ε must be positive".into(),
            ));
        }
        if !(ball_radius > 0.0) {
            return Err(Error::InvalidParameter(
                "admissible ball radius must be positive".into(),
            ));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("output dimension must be ≥ 1".into()));
        }
        Ok(Self {
            output_dim: matrix.nrows(),
            input_dim: matrix.ncols(),
            kind: ForwardKind::ExpAffine { matrix, eps },
            is_positive: true,
            eps_lower: eps,
            ball_radius,
        })
    }

    pub fn elliptic_1d(input_dim: usize, grid_points: usize, observations: usize) -> Result<Self> {
        if grid_points < 3 {
            return Err(Error::InvalidParameter(
                "elliptic grid needs at least 3 interior points".into(),
            ));
        }
        if observations == 0 {
            return Err(Error::InvalidParameter("output dimension must be ≥ 1".into()));
        }
        Ok(Self {
            kind: ForwardKind::Elliptic1d {
                grid_points,
                observations,
            },
            output_dim: observations,
            input_dim,
            is_positive: false,
            eps_lower: 0.0,
            ball_radius: f64::INFINITY,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn is_positive(&self) -> bool {
        self.is_positive
    }

    pub fn eps_lower(&self) -> f64 {
        self.eps_lower
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    fn check_admissible(&self, u: &StateVector) -> Result<()> {
        if u.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: u.dim(),
            });
        }
        if self.is_positive {
            let norm = u.x_norm();
            if norm > self.ball_radius {
                return Err(Error::OutsideAdmissibleBall {
                    norm,
                    radius: self.ball_radius,
                });
            }
        }
        Ok(())
    }

    /// Evaluate 𝒢(u). Overflowing outputs (e.g. the exponential of an
    /// extreme state) are reported as domain violations so optimizers can
    /// back off rather than abort.
    pub fn apply(&self, u: &StateVector) -> Result<DataVector> {
        self.check_admissible(u)?;
        let values = match &self.kind {
            ForwardKind::Linear { matrix, offset } => matrix * &u.coeffs + offset,
            ForwardKind::ExpAffine { matrix, eps } => {
                (matrix * &u.coeffs).map(|t| eps + t.exp())
            }
            ForwardKind::Elliptic1d {
                grid_points,
                observations,
            } => solve_elliptic(&u.coeffs, *grid_points, *observations, unit_source)?,
        };
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteForward { index });
        }
        Ok(DataVector::from_vector(values))
    }

    /// Jacobian of 𝒢 at u: analytic for the linear and exp-affine maps,
    /// finite differences for the PDE map.
    pub fn jacobian(&self, u: &StateVector) -> Result<DMatrix<f64>> {
        self.check_admissible(u)?;
        match &self.kind {
            ForwardKind::Linear { matrix, .. } => Ok(matrix.clone()),
            ForwardKind::ExpAffine { matrix, .. } => {
                let t = (matrix * &u.coeffs).map(f64::exp);
                let mut jac = matrix.clone();
                for (i, row) in t.iter().enumerate() {
                    for j in 0..jac.ncols() {
                        jac[(i, j)] *= row;
                    }
                }
                Ok(jac)
            }
            ForwardKind::Elliptic1d { .. } => self.jacobian_fd(u, default_fd_step(u)),
        }
    }

    /// Central finite-difference Jacobian: column k is
    /// (𝒢(u + h eₖ) − 𝒢(u − h eₖ)) / 2h.
    pub fn jacobian_fd(&self, u: &StateVector, h: f64) -> Result<DMatrix<f64>> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("FD step must be positive".into()));
        }
        let n = u.dim();
        let mut jac = DMatrix::zeros(self.output_dim, n);
        let mut probe = u.clone();
        for k in 0..n {
            probe.coeffs[k] = u.coeffs[k] + h;
            let plus = self.apply(&probe)?;
            probe.coeffs[k] = u.coeffs[k] - h;
            let minus = self.apply(&probe)?;
            probe.coeffs[k] = u.coeffs[k];
            let col = (&plus.values - &minus.values) / (2.0 * h);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }
}

/// Default FD step: 10⁻⁵ · max(1, |u|).
pub fn default_fd_step(u: &StateVector) -> f64 {
    1e-5 * u.x_norm().max(1.0)
}

fn unit_source(_x: f64) -> f64 {
    1.0
}

/// KL sine field w(x) = Σₖ cₖ √2 sin(kπx).
pub fn kl_field(coeffs: &DVector<f64>, x: f64) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * sqrt2 * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
        .sum()
}

/// Second-order FD solve of −(a p′)′ = f with a = e^w on m interior grid
/// points, returning p at `observations` equispaced interior points by
/// linear interpolation.
fn solve_elliptic(
    coeffs: &DVector<f64>,
    m: usize,
    observations: usize,
    f: fn(f64) -> f64,
) -> Result<DVector<f64>> {
    let h = 1.0 / (m + 1) as f64;
    // Conductivity at half-grid points a_{i+1/2}, i = 0..m. Overflow or
    // underflow of e^w degenerates the operator; report it as a domain
    // violation so callers can back off.
    let mut a_half = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let a = kl_field(coeffs, (i as f64 + 0.5) * h).exp();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::NonFiniteForward { index: i });
        }
        a_half.push(a);
    }
    let rhs: Vec<f64> = (1..=m).map(|i| f(i as f64 * h) * h * h).collect();

    // Thomas algorithm on the tridiagonal system
    //   -a_{i-1/2} p_{i-1} + (a_{i-1/2}+a_{i+1/2}) p_i - a_{i+1/2} p_{i+1} = h² f_i.
    let mut diag: Vec<f64> = (0..m).map(|i| a_half[i] + a_half[i + 1]).collect();
    let mut rhs = rhs;
    for i in 1..m {
        let sub = -a_half[i];
        if diag[i - 1].abs() < 1e-300 {
            return Err(Error::SingularSystem("elliptic-1d tridiagonal solve".into()));
        }
        let w = sub / diag[i - 1];
        // super-diagonal entry above row i is -a_half[i] as well
        diag[i] -= w * -a_half[i];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut p = vec![0.0; m];
    if diag[m - 1].abs() < 1e-300 {
        return Err(Error::SingularSystem("elliptic-1d tridiagonal solve".into()));
    }
    p[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        p[i] = (rhs[i] + a_half[i + 1] * p[i + 1]) / diag[i];
    }

    // Observe at x_j = j/(J+1) by linear interpolation on the padded grid.
    let grid_value = |idx: isize| -> f64 {
        if idx <= 0 || idx as usize > m {
            0.0
        } else {
            p[idx as usize - 1]
        }
    };
    let obs = (1..=observations)
        .map(|j| {
            let x = j as f64 / (observations + 1) as f64;
            let t = x / h;
            let i0 = t.floor() as isize;
            let frac = t - i0 as f64;
            grid_value(i0) * (1.0 - frac) + grid_value(i0 + 1) * frac
        })
        .collect::<Vec<_>>();
    Ok(DVector::from_vec(obs))
}

/// Empirical regularity probes backing the polynomial-bound and Lipschitz
/// contracts. These report fitted constants; tests assert against them.
pub mod probes {
    use super::*;

    /// Fit |𝒢(u)| ≤ C(1 + |u|ᵖ) on prior samples rescaled across decades of
    /// |u|. Returns (C, p) with p the log-log slope at the large-norm end.
    pub fn fit_polynomial_bound<R: Rng>(
        map: &ForwardMap,
        prior: &GaussianPrior,
        scales: &[f64],
        samples_per_scale: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let mut points = Vec::new();
        for &scale in scales {
            for _ in 0..samples_per_scale {
                let mut u = prior.sample(rng);
                let norm = u.x_norm();
                if norm == 0.0 {
                    continue;
                }
                u.coeffs *= scale / norm;
                let g = map.apply(&u)?;
                points.push((u.x_norm(), g.norm()));
            }
        }
        // Slope of log|𝒢| against log|u| over the upper half of the scales.
        let logs: Vec<(f64, f64)> = points
            .iter()
            .filter(|(n, g)| *n > 0.0 && *g > 0.0)
            .map(|(n, g)| (n.ln(), g.ln()))
            .collect();
        let cutoff = {
            let mut norms: Vec<f64> = logs.iter().map(|p| p.0).collect();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            norms[norms.len() / 2]
        };
        let upper: Vec<(f64, f64)> = logs.iter().copied().filter(|p| p.0 >= cutoff).collect();
        let p_exp = ls_slope(&upper).max(0.0);
        let c = points
            .iter()
            .map(|(n, g)| g / (1.0 + n.powf(p_exp.max(1.0))))
            .fold(0.0f64, f64::max);
        Ok((c, p_exp))
    }

    /// Largest observed ratio |𝒢(u₁)−𝒢(u₂)| / |u₁−u₂| over random pairs in
    /// the ball of radius r.
    pub fn empirical_lipschitz<R: Rng>(
        map: &ForwardMap,
        prior: &GaussianPrior,
        radius: f64,
        pairs: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let mut u1 = prior.sample(rng);
            let mut u2 = prior.sample(rng);
            for u in [&mut u1, &mut u2] {
                let norm = u.x_norm();
                if norm > radius {
                    u.coeffs *= radius / norm;
                }
            }
            let du = (&u1.coeffs - &u2.coeffs).norm();
            if du < 1e-12 {
                continue;
            }
            let dg = (map.apply(&u1)?.values - map.apply(&u2)?.values).norm();
            worst = worst.max(dg / du);
        }
        Ok(worst)
    }

    fn ls_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_linear(n: usize) -> ForwardMap {
        ForwardMap::linear(DMatrix::identity(n, n), DVector::zeros(n)).unwrap()
    }

    #[test]
    fn linear_identity_is_identity() {
        let map = identity_linear(2);
        let u = StateVector::new(vec![1.0, 2.0]).unwrap();
        let g = map.apply(&u).unwrap();
        assert_eq!(g.values.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn exp_affine_constant_case() {
        // A = 0 makes every component ε + e⁰ = 1.1.
        let map = ForwardMap::exp_affine(DMatrix::zeros(3, 2), 0.1, 10.0).unwrap();
        let g = map.apply(&StateVector::new(vec![0.3, -0.2]).unwrap()).unwrap();
        for v in g.values.iter() {
            assert_relative_eq!(*v, 1.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn exp_affine_rejects_states_outside_ball() {
        let map = ForwardMap::exp_affine(DMatrix::identity(2, 2), 0.1, 1.0).unwrap();
        let err = map.apply(&StateVector::new(vec![2.0, 0.0]).unwrap()).unwrap_err();
        assert!(err.is_domain_violation());
    }

    #[test]
    fn diag_matrix_examples() {
        let ones = DataVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(diag_matrix(&ones), DMatrix::identity(2, 2));

        let g = DataVector::new(vec![2.0, 3.0]).unwrap();
        let d = diag_matrix(&g);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!((&d * v).as_slice(), &[2.0, 3.0]);
        assert_relative_eq!(d.determinant(), 6.0, epsilon = 1e-14);
    }

    #[test]
    fn elliptic_flat_field_matches_analytic_solution() {
        // w ≡ 0, f ≡ 1: p(x) = x(1−x)/2.
        let map = ForwardMap::elliptic_1d(3, 199, 7).unwrap();
        let g = map.apply(&StateVector::zeros(3)).unwrap();
        let m_inv_sq = 1.0 / (200.0 * 200.0);
        for (j, v) in g.values.iter().enumerate() {
            let x = (j + 1) as f64 / 8.0;
            let exact = x * (1.0 - x) / 2.0;
            assert!(
                (v - exact).abs() <= 10.0 * m_inv_sq,
                "x = {x}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn elliptic_converges_second_order() {
        // Richardson step-halving on a rough field: error(m) / error(2m) ≈ 4
        // is over-strict with interpolation in play, so assert a healthy
        // contraction instead.
        let coeffs = DVector::from_vec(vec![0.4, -0.3, 0.2]);
        let u = StateVector::from_vector(coeffs);
        let obs = 5;
        let fine = ForwardMap::elliptic_1d(3, 3199, obs)
            .unwrap()
            .apply(&u)
            .unwrap();
        let errs: Vec<f64> = [99usize, 199, 399]
            .iter()
            .map(|&m| {
                let g = ForwardMap::elliptic_1d(3, m, obs).unwrap().apply(&u).unwrap();
                (g.values - &fine.values).norm()
            })
            .collect();
        assert!(errs[1] < errs[0] / 2.5, "{errs:?}");
        assert!(errs[2] < errs[1] / 2.5, "{errs:?}");
    }

    #[test]
    fn fd_jacobian_recovers_linear_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
        let map = ForwardMap::linear(a.clone(), DVector::zeros(2)).unwrap();
        let u = StateVector::new(vec![0.3, -0.7, 1.1]).unwrap();
        let jac = map.jacobian_fd(&u, 1e-4).unwrap();
        assert!((jac - a).amax() <= 1e-10);
    }

    #[test]
    fn fd_jacobian_matches_calculus_for_exp() {
        // n = J = 1, A = I, u = 0: d/du (ε + e^u) = 1 at u = 0.
        let map = ForwardMap::exp_affine(DMatrix::identity(1, 1), 1e-9, 10.0).unwrap();
        let jac = map
            .jacobian_fd(&StateVector::zeros(1), 1e-5)
            .unwrap();
        assert_relative_eq!(jac[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_jacobian_agrees_with_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prior = GaussianPrior::matern_like(4, 1.0, 1.0).unwrap();
        let a = DMatrix::from_fn(3, 4, |i, j| ((i * 7 + j * 3) as f64).sin() * 0.5);
        let map = ForwardMap::exp_affine(a, 0.05, 50.0).unwrap();
        for _ in 0..10 {
            let u = prior.sample(&mut rng);
            let analytic = map.jacobian(&u).unwrap();
            let fd = map.jacobian_fd(&u, default_fd_step(&u)).unwrap();
            assert!((analytic - fd).amax() < 1e-7);
        }
    }

    #[test]
    fn elliptic_fd_jacobian_richardson_consistency() {
        // Halving h should shrink the FD truncation error ~4x; compare both
        // against a tiny-step reference.
        let map = ForwardMap::elliptic_1d(2, 99, 4).unwrap();
        let u = StateVector::new(vec![0.3, -0.1]).unwrap();
        let reference = map.jacobian_fd(&u, 1e-6).unwrap();
        let coarse = (map.jacobian_fd(&u, 2e-2).unwrap() - &reference).amax();
        let fine = (map.jacobian_fd(&u, 1e-2).unwrap() - &reference).amax();
        assert!(fine < coarse / 2.0, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn positivity_contract_on_prior_samples() {
        // Every component of the exp-affine map stays ≥ ε over ≥10³ draws
        // projected into the admissible ball.
        let prior = GaussianPrior::matern_like(4, 1.0, 1.0).unwrap();
        let a = DMatrix::from_fn(5, 4, |i, j| ((i + 2 * j) as f64).cos());
        let map = ForwardMap::exp_affine(a, 0.2, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let mut u = prior.sample(&mut rng);
            let norm = u.x_norm();
            if norm > 8.0 {
                u.coeffs *= 8.0 / norm;
            }
            let g = map.apply(&u).unwrap();
            for v in g.values.iter() {
                assert!(*v >= 0.2);
            }
        }
    }

    #[test]
    fn polynomial_bound_exponent_for_linear_map() {
        let prior = GaussianPrior::matern_like(3, 1.0, 1.0).unwrap();
        let map = ForwardMap::linear(
            DMatrix::from_row_slice(2, 3, &[1.0, 0.2, -0.3, 0.5, -1.0, 0.8]),
            DVector::from_vec(vec![0.5, -0.2]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scales = [0.5, 1.0, 4.0, 16.0, 64.0, 256.0];
        let (c, p) = probes::fit_polynomial_bound(&map, &prior, &scales, 40, &mut rng).unwrap();
        assert!(p <= 1.05, "fitted exponent {p}");
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn local_lipschitz_constant_is_finite() {
        let prior = GaussianPrior::matern_like(3, 1.0, 1.0).unwrap();
        let a = DMatrix::from_fn(4, 3, |i, j| 0.3 * ((i + j) as f64 + 1.0).ln());
        let map = ForwardMap::exp_affine(a, 0.1, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l = probes::empirical_lipschitz(&map, &prior, 5.0, 200, &mut rng).unwrap();
        assert!(l.is_finite() && l > 0.0);
    }
}
