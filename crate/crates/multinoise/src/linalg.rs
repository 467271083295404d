//! Symmetric positive-definite matrices with a cached Cholesky factor.
//!
//! Log-determinants and quadratic forms always go through the factor; the
//! explicit inverse is formed only where a formula genuinely needs it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// A dense SPD matrix together with its Cholesky factorization.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Factorize a symmetric positive-definite matrix. Fails if the matrix
    /// is not symmetric (to `1e-12` relative) or the factorization breaks
    /// down.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSpd("matrix is not square".into()));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSpd(format!(
                        "asymmetry at ({i},{j}): {} vs {}",
                        matrix[(i, j)],
                        matrix[(j, i)]
                    )));
                }
            }
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        Ok(Self { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor L with A = LLᵀ.
    pub fn factor_l(&self) -> &DMatrix<f64> {
        self.chol.l_dirty()
    }

    /// log det A, summed from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Solve A X = B column-wise.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Quadratic form rᵀ A⁻¹ r.
    pub fn inv_quadratic_form(&self, r: &DVector<f64>) -> f64 {
        self.solve(r).dot(r)
    }

    /// tr(A⁻¹ B) by column solves; no inverse is formed.
    pub fn trace_inv_times(&self, b: &DMatrix<f64>) -> f64 {
        self.solve_matrix(b).trace()
    }

    /// Explicit inverse. Used only where a formula needs inverse entries
    /// themselves (e.g. Hadamard products with the inverse).
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Draw z ~ N(0, A) as L·ξ with ξ standard normal.
    pub fn sample_zero_mean<R: rand::Rng>(&self, rng: &mut R) -> DVector<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let xi = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z
            }),
        );
        self.chol.l_dirty().lower_triangle() * xi
    }

    /// Extreme eigenvalues (λ_min, λ_max) via a symmetric eigensolver.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let eig = self.matrix.symmetric_eigenvalues();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &l in eig.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
        (lo, hi)
    }

    /// Eigenvalues of A⁻¹ B for symmetric B, computed on the symmetric
    /// congruence L⁻¹ B L⁻ᵀ so they come out real.
    pub fn eigenvalues_of_inv_times(&self, b: &DMatrix<f64>) -> Vec<f64> {
        let l = self.chol.l_dirty().lower_triangle();
        // L⁻¹ B: forward-solve each column, then (L⁻¹ B) L⁻ᵀ as transposed solve.
        let lb = l
            .clone()
            .solve_lower_triangular(b)
            .expect("factor diagonal is positive");
        let m = l
            .solve_lower_triangular(&lb.transpose())
            .expect("factor diagonal is positive");
        // m = L⁻¹ Bᵀ L⁻ᵀ = L⁻¹ B L⁻ᵀ for symmetric B.
        m.symmetric_eigenvalues().iter().copied().collect()
    }
}

/// Reconstruction check: ‖LLᵀ − A‖ relative to ‖A‖.
pub fn reconstruction_error(spd: &SpdMatrix) -> f64 {
    let l = spd.factor_l().lower_triangle();
    let rec = &l * l.transpose();
    (rec - spd.matrix()).norm() / spd.matrix().norm().max(1e-300)
}
