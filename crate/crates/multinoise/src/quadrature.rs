//! Gaussian quadrature rules via the Golub–Welsch eigenvalue method.
//!
//! Nodes are the eigenvalues of the symmetric Jacobi matrix of the orthogonal
//! polynomial family; the weight attached to a node is proportional to the
//! squared first component of its normalized eigenvector.

use nalgebra::DMatrix;

/// A one-dimensional quadrature rule: Σ wᵢ f(xᵢ).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn golub_welsch(diag: &[f64], off_diag: &[f64], weight_mass: f64) -> QuadratureRule {
    let n = diag.len();
    let mut jacobi = DMatrix::zeros(n, n);
    for (i, &d) in diag.iter().enumerate() {
        jacobi[(i, i)] = d;
    }
    for (i, &b) in off_diag.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], weight_mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Hermite rule for ∫ f(t) e^{−t²} dt (physicists' weight).
pub fn gauss_hermite(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature needs at least one node");
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&diag, &off, std::f64::consts::PI.sqrt())
}

/// Gauss–Legendre rule for ∫_{−1}^{1} f(t) dt.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature needs at least one node");
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&diag, &off, 2.0)
}

/// Gauss–Legendre rule rescaled to the interval [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> QuadratureRule {
    let base = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    QuadratureRule {
        nodes: base.nodes.iter().map(|t| mid + half * t).collect(),
        weights: base.weights.iter().map(|w| w * half).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(20);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        // ∫ e^{−t²} = √π, ∫ t² e^{−t²} = √π/2, ∫ t⁴ e^{−t²} = 3√π/4.
        assert_relative_eq!(rule.integrate(|_| 1.0), sqrt_pi, epsilon = 1e-12);
        assert_relative_eq!(rule.integrate(|t| t * t), sqrt_pi / 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            rule.integrate(|t| t.powi(4)),
            0.75 * sqrt_pi,
            epsilon = 1e-12
        );
    }

    #[test]
    fn hermite_is_exact_for_high_degree() {
        // n nodes integrate polynomials up to degree 2n−1 exactly.
        let rule = gauss_hermite(5);
        // ∫ t⁸ e^{−t²} = (7!!/2⁴)√π = 105/16 √π.
        assert_relative_eq!(
            rule.integrate(|t| t.powi(8)),
            105.0 / 16.0 * std::f64::consts::PI.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn legendre_polynomials_and_interval_map() {
        let rule = gauss_legendre(8);
        assert_relative_eq!(rule.integrate(|_| 1.0), 2.0, epsilon = 1e-13);
        assert_relative_eq!(rule.integrate(|t| t * t), 2.0 / 3.0, epsilon = 1e-13);

        let shifted = gauss_legendre_on(16, 0.0, 2.0);
        assert_relative_eq!(shifted.integrate(|x| x * x), 8.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(
            shifted.integrate(|x: f64| x.exp()),
            2.0f64.exp() - 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_density_integrates_to_one_under_hermite() {
        // ∫ N(x; 1, σ²) dx with x = 1 + √2 σ t: (1/√π) Σ wᵢ = 1.
        let rule = gauss_hermite(40);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(
            total / std::f64::consts::PI.sqrt(),
            1.0,
            epsilon = 1e-12
        );
    }
}
