//! Likelihood potentials for multiplicative and mixed observation noise.
//!
//! Purely multiplicative data y = η_m 𝒢(u) with factored noise density ρ_m
//! has negative log-likelihood
//!
//! ```text
//! Φ(u; y) = Σⱼ ( log 𝒢ⱼ(u) − log ρ_mʲ(yⱼ / 𝒢ⱼ(u)) ),
//! ```
//!
//! defined for positive forward values and data inside the support of the
//! noise. Mixed data y = η_m 𝒢(u) + η_a with both noises Gaussian
//! (η_a ~ N(0, Γᵃ), η_m ~ N(𝟏, Γᵐ)) is again Gaussian given u, with the
//! state-dependent covariance
//!
//! ```text
//! Γ(u) = Γᵃ + 𝒢(u)𝒢(u)* ∘ Γᵐ        (∘ = Hadamard product)
//! ```
//!
//! and potential Φ = ½|𝒢(u) − y|²_{Γ(u)} + ½ log det Γ(u). For non-Gaussian
//! factored mixed noise the marginal density is a one-dimensional integral
//! per component, evaluated here by Gaussian quadrature in log space.
//!
//! All potentials are defined up to additive data-only constants; callers
//! comparing different evaluation routes difference two states so the
//! constants cancel.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::forward::DataVector;
use crate::linalg::SpdMatrix;
use crate::quadrature::{gauss_hermite, gauss_legendre_on};
use crate::stats::log_sum_exp;

/// Support of a one-dimensional noise density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Real,
    NonNegative,
    NonPositive,
}

impl Support {
    /// Whether z lies in the interior of the support.
    pub fn contains_interior(self, z: f64) -> bool {
        match self {
            Support::Real => z.is_finite(),
            Support::NonNegative => z > 0.0,
            Support::NonPositive => z < 0.0,
        }
    }
}

/// One factor of a factored multiplicative noise density, mean 1 by
/// construction.
#[derive(Clone, Serialize, Deserialize)]
pub enum ComponentDensity {
    /// Gamma with shape = rate = α (mean 1, precision α), support [0, ∞).
    Gamma { alpha: f64 },
    /// Log-normal with log-variance σ² and log-mean −σ²/2 (mean 1),
    /// support [0, ∞).
    LogNormal { sigma2: f64 },
    /// N(1, var), support ℝ.
    Gaussian { var: f64 },
    /// User-supplied log-density on the given support. The mean-1 contract
    /// is the caller's responsibility; `spot_check` verifies it numerically.
    #[serde(skip)]
    Custom {
        log_pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support: Support,
    },
}

impl fmt::Debug for ComponentDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentDensity::Gamma { alpha } => write!(f, "Gamma {{ alpha: {alpha} }}"),
            ComponentDensity::LogNormal { sigma2 } => {
                write!(f, "LogNormal {{ sigma2: {sigma2} }}")
            }
            ComponentDensity::Gaussian { var } => write!(f, "Gaussian {{ var: {var} }}"),
            ComponentDensity::Custom { support, .. } => {
                write!(f, "Custom {{ support: {support:?} }}")
            }
        }
    }
}

impl ComponentDensity {
    pub fn support(&self) -> Support {
        match self {
            ComponentDensity::Gamma { .. } | ComponentDensity::LogNormal { .. } => {
                Support::NonNegative
            }
            ComponentDensity::Gaussian { .. } => Support::Real,
            ComponentDensity::Custom { support, .. } => *support,
        }
    }

    /// log ρ(z); −∞ outside the support.
    pub fn log_pdf(&self, z: f64) -> f64 {
        match self {
            ComponentDensity::Gamma { alpha } => {
                if z <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    alpha * alpha.ln() - ln_gamma(*alpha) + (alpha - 1.0) * z.ln() - alpha * z
                }
            }
            ComponentDensity::LogNormal { sigma2 } => {
                if z <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let mu = -sigma2 / 2.0;
                    let d = z.ln() - mu;
                    -z.ln() - 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln()
                        - d * d / (2.0 * sigma2)
                }
            }
            ComponentDensity::Gaussian { var } => {
                let d = z - 1.0;
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
            }
            ComponentDensity::Custom { log_pdf, support } => {
                if support.contains_interior(z) {
                    log_pdf(z)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// d/dz log ρ(z) on the interior of the support. Central differences
    /// for custom densities.
    pub fn dlog_pdf(&self, z: f64) -> f64 {
        match self {
            ComponentDensity::Gamma { alpha } => (alpha - 1.0) / z - alpha,
            ComponentDensity::LogNormal { sigma2 } => {
                let mu = -sigma2 / 2.0;
                -1.0 / z - (z.ln() - mu) / (sigma2 * z)
            }
            ComponentDensity::Gaussian { var } => -(z - 1.0) / var,
            ComponentDensity::Custom { log_pdf, .. } => {
                let h = 1e-6 * z.abs().max(1e-3);
                (log_pdf(z + h) - log_pdf(z - h)) / (2.0 * h)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ComponentDensity::Gamma { alpha } if !(*alpha > 0.0) => Err(Error::InvalidParameter(
                "Gamma precision α must be positive".into(),
            )),
            ComponentDensity::LogNormal { sigma2 } if !(*sigma2 > 0.0) => Err(
                Error::InvalidParameter("log-normal σ² must be positive".into()),
            ),
            ComponentDensity::Gaussian { var } if !(*var > 0.0) => Err(Error::InvalidParameter(
                "Gaussian variance must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Factored multiplicative noise density ρ_m = Π ρ_mʲ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicativeDensity {
    components: Vec<ComponentDensity>,
}

impl MultiplicativeDensity {
    pub fn new(components: Vec<ComponentDensity>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("density needs ≥ 1 component".into()));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    /// Same density in every component.
    pub fn iid(component: ComponentDensity, j: usize) -> Result<Self> {
        Self::new(vec![component; j])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentDensity] {
        &self.components
    }

    /// Numerical contract check per component: ∫ρ ≈ 1 and ∫zρ ≈ 1.
    /// Returns (mass, mean) pairs.
    pub fn spot_check(&self, nodes: usize) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .map(|c| {
                let (lo, hi) = truncation_interval(c);
                let rule = gauss_legendre_on(nodes, lo, hi);
                let mass = rule.integrate(|z| c.log_pdf(z).exp());
                let mean = rule.integrate(|z| z * c.log_pdf(z).exp());
                (mass, mean)
            })
            .collect()
    }
}

/// Interval outside which ρ drops below 10⁻¹⁶ of its peak; quadrature over
/// a factored mixed model is restricted to it. For densities unbounded at
/// the origin (Gamma with α < 1) the left end is the origin itself and the
/// singularity is integrable; accuracy is then limited by the rule order.
fn truncation_interval(dens: &ComponentDensity) -> (f64, f64) {
    const REL_LOG: f64 = -36.85; // ln(1e-16)
    match dens.support() {
        Support::Real => {
            // Symmetric scan around the peak.
            let peak = find_peak(dens, -50.0, 50.0, 2000);
            let target = dens.log_pdf(peak) + REL_LOG;
            let hi = grow_until_below(dens, peak, 1.0, target);
            let lo = grow_until_below(dens, peak, -1.0, target);
            (lo, hi)
        }
        Support::NonNegative => {
            let peak = find_peak_log(dens, 1e-8, 1e4, 2000);
            let peak_log = dens.log_pdf(peak).min(dens.log_pdf(1.0) - REL_LOG);
            let target = peak_log + REL_LOG;
            let hi = grow_until_below(dens, peak.max(1.0), 1.0, target);
            let lo = if dens.log_pdf(1e-300) < target {
                shrink_until_below(dens, peak.min(1.0), target)
            } else {
                0.0
            };
            (lo, hi)
        }
        Support::NonPositive => {
            let mirrored = ComponentDensity::Custom {
                log_pdf: {
                    let d = dens.clone();
                    Arc::new(move |z: f64| d.log_pdf(-z))
                },
                support: Support::NonNegative,
            };
            let (lo, hi) = truncation_interval(&mirrored);
            (-hi, -lo)
        }
    }
}

fn find_peak(dens: &ComponentDensity, lo: f64, hi: f64, steps: usize) -> f64 {
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=steps {
        let z = lo + (hi - lo) * i as f64 / steps as f64;
        let v = dens.log_pdf(z);
        if v > best.0 {
            best = (v, z);
        }
    }
    best.1
}

fn find_peak_log(dens: &ComponentDensity, lo: f64, hi: f64, steps: usize) -> f64 {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=steps {
        let z = (llo + (lhi - llo) * i as f64 / steps as f64).exp();
        let v = dens.log_pdf(z);
        if v > best.0 {
            best = (v, z);
        }
    }
    best.1
}

fn grow_until_below(dens: &ComponentDensity, start: f64, direction: f64, target: f64) -> f64 {
    let mut step = 1.0;
    let mut z = start;
    for _ in 0..200 {
        let probe = z + direction * step;
        if dens.log_pdf(probe) < target {
            // Bisect between z and probe.
            let (mut a, mut b) = (z, probe);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if dens.log_pdf(mid) < target {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return b;
        }
        z = probe;
        step *= 2.0;
    }
    z
}

fn shrink_until_below(dens: &ComponentDensity, start: f64, target: f64) -> f64 {
    let mut z = start;
    for _ in 0..400 {
        let probe = z / 2.0;
        if dens.log_pdf(probe) < target {
            let (mut a, mut b) = (probe, z);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if dens.log_pdf(mid) < target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return a;
        }
        z = probe;
    }
    0.0
}

fn check_dims(g: &DataVector, y: &DataVector, j: usize) -> Result<()> {
    if g.dim() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            got: g.dim(),
        });
    }
    if y.dim() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            got: y.dim(),
        });
    }
    Ok(())
}

/// Potential of the purely multiplicative model,
/// Φ = Σⱼ (log gⱼ − log ρ_mʲ(yⱼ/gⱼ)).
///
/// Requires every gⱼ > 0 and every ratio yⱼ/gⱼ in the interior of the
/// component support; data outside is a domain error, matching the
/// restriction of the posterior to the support interior.
pub fn phi_multiplicative(
    dens: &MultiplicativeDensity,
    g: &DataVector,
    y: &DataVector,
) -> Result<f64> {
    check_dims(g, y, dens.dim())?;
    let mut phi = 0.0;
    for (j, c) in dens.components.iter().enumerate() {
        let gj = g.values[j];
        if gj <= 0.0 {
            return Err(Error::NonPositiveForward {
                index: j,
                value: gj,
            });
        }
        let z = y.values[j] / gj;
        if !c.support().contains_interior(z) {
            return Err(Error::SupportViolation { index: j, value: z });
        }
        phi += gj.ln() - c.log_pdf(z);
    }
    Ok(phi)
}

/// dΦ/dg of the purely multiplicative potential:
/// 1/gⱼ + (log ρ_mʲ)′(yⱼ/gⱼ)·yⱼ/gⱼ².
pub fn dphi_multiplicative_dg(
    dens: &MultiplicativeDensity,
    g: &DataVector,
    y: &DataVector,
) -> Result<DVector<f64>> {
    check_dims(g, y, dens.dim())?;
    let mut grad = DVector::zeros(dens.dim());
    for (j, c) in dens.components.iter().enumerate() {
        let gj = g.values[j];
        if gj <= 0.0 {
            return Err(Error::NonPositiveForward {
                index: j,
                value: gj,
            });
        }
        let z = y.values[j] / gj;
        if !c.support().contains_interior(z) {
            return Err(Error::SupportViolation { index: j, value: z });
        }
        grad[j] = 1.0 / gj + c.dlog_pdf(z) * y.values[j] / (gj * gj);
    }
    Ok(grad)
}

/// Gamma-noise misfit Φ = α Σⱼ (log gⱼ + yⱼ/gⱼ). Equals
/// `phi_multiplicative` with iid Gamma(α) components up to a data-only
/// constant.
pub fn phi_gamma(alpha: f64, g: &DataVector, y: &DataVector) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "Gamma precision α must be positive".into(),
        ));
    }
    check_dims(g, y, g.dim())?;
    let mut sum = 0.0;
    for j in 0..g.dim() {
        let (gj, yj) = (g.values[j], y.values[j]);
        if gj <= 0.0 {
            return Err(Error::NonPositiveForward {
                index: j,
                value: gj,
            });
        }
        if yj <= 0.0 {
            return Err(Error::SupportViolation {
                index: j,
                value: yj,
            });
        }
        sum += gj.ln() + yj / gj;
    }
    Ok(alpha * sum)
}

/// Mixed Gaussian noise: additive covariance Γᵃ ≻ 0, multiplicative
/// covariance Γᵐ ⪰ 0.
#[derive(Debug, Clone)]
pub struct MixedGaussianNoise {
    gamma_a: SpdMatrix,
    gamma_m: DMatrix<f64>,
}

impl MixedGaussianNoise {
    pub fn new(gamma_a: DMatrix<f64>, gamma_m: DMatrix<f64>) -> Result<Self> {
        let j = gamma_a.nrows();
        if gamma_m.nrows() != j || gamma_m.ncols() != j {
            return Err(Error::DimensionMismatch {
                expected: j,
                got: gamma_m.nrows(),
            });
        }
        let gamma_a = SpdMatrix::new(gamma_a)?;
        let scale = gamma_m.amax().max(1.0);
        for i in 0..j {
            for k in (i + 1)..j {
                if (gamma_m[(i, k)] - gamma_m[(k, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd("Γᵐ is not symmetric".into()));
                }
            }
        }
        let min_eig = gamma_m
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 * scale {
            return Err(Error::NotSpd(format!(
                "Γᵐ has negative eigenvalue {min_eig}"
            )));
        }
        Ok(Self { gamma_a, gamma_m })
    }

    /// Diagonal covariances diag(γ²ₐⱼ), diag(γ²ₘⱼ).
    pub fn diagonal(vars_a: &[f64], vars_m: &[f64]) -> Result<Self> {
        if vars_a.len() != vars_m.len() {
            return Err(Error::DimensionMismatch {
                expected: vars_a.len(),
                got: vars_m.len(),
            });
        }
        Self::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(vars_a)),
            DMatrix::from_diagonal(&DVector::from_row_slice(vars_m)),
        )
    }

    /// γ²ₐ·I and γ²ₘ·I.
    pub fn isotropic(j: usize, var_a: f64, var_m: f64) -> Result<Self> {
        Self::diagonal(&vec![var_a; j], &vec![var_m; j])
    }

    pub fn dim(&self) -> usize {
        self.gamma_a.dim()
    }

    pub fn gamma_a(&self) -> &SpdMatrix {
        &self.gamma_a
    }

    pub fn gamma_m(&self) -> &DMatrix<f64> {
        &self.gamma_m
    }

    /// Scale both covariances by c (the small-noise data model uses c = 1/n²).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.gamma_a.matrix() * c, &self.gamma_m * c)
    }

    /// Draw (η_a, η_m − 𝟏) ~ N(0, Γᵃ) × N(0, Γᵐ). The Γᵐ draw uses a
    /// spectral square root so it also covers the semi-definite case.
    pub fn sample_noises<R: rand::Rng>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        use rand_distr::{Distribution, StandardNormal};
        let a = self.gamma_a.sample_zero_mean(rng);
        let eig = self.gamma_m.clone().symmetric_eigen();
        let xi = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        }));
        let scaled = DVector::from_iterator(
            self.dim(),
            eig.eigenvalues
                .iter()
                .zip(xi.iter())
                .map(|(&l, &x)| l.max(0.0).sqrt() * x),
        );
        let m = &eig.eigenvectors * scaled;
        (a, m)
    }
}

/// State-dependent covariance Γ(u) = Γᵃ + g g* ∘ Γᵐ, with entries
/// Γᵢⱼ = Γᵃᵢⱼ + gᵢ gⱼ Γᵐᵢⱼ. Positive definite for every g because Γᵃ ≻ 0
/// and the Hadamard term is positive semi-definite.
pub fn gamma_u(noise: &MixedGaussianNoise, g: &DataVector) -> Result<SpdMatrix> {
    let j = noise.dim();
    if g.dim() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            got: g.dim(),
        });
    }
    let mut m = noise.gamma_a.matrix().clone();
    for r in 0..j {
        for c in 0..j {
            m[(r, c)] += g.values[r] * g.values[c] * noise.gamma_m[(r, c)];
            if !m[(r, c)].is_finite() {
                return Err(Error::CovarianceOverflow { row: r, col: c });
            }
        }
    }
    SpdMatrix::new(m)
}

/// Mixed Gaussian potential Φ = ½|g − y|²_{Γ(u)} + ½ log det Γ(u).
pub fn phi_mixed_gaussian(
    noise: &MixedGaussianNoise,
    g: &DataVector,
    y: &DataVector,
) -> Result<f64> {
    check_dims(g, y, noise.dim())?;
    let gamma = gamma_u(noise, g)?;
    let r = &g.values - &y.values;
    Ok(0.5 * gamma.inv_quadratic_form(&r) + 0.5 * gamma.log_det())
}

/// Weighted mixed-Gaussian objective pieces shared by the potential, the
/// small-noise functional and the large-data functional:
///
/// ```text
/// value = misfit_w · ( rᵀΓ(g)⁻¹r + tr(Γ(g)⁻¹ S) ) + logdet_w · log det Γ(g)
/// ```
///
/// with r = g − y_center and S an optional scatter matrix. Returns the value
/// and its gradient in g.
pub fn mixed_gaussian_weighted(
    noise: &MixedGaussianNoise,
    g: &DataVector,
    y_center: &DataVector,
    scatter: Option<&DMatrix<f64>>,
    misfit_w: f64,
    logdet_w: f64,
) -> Result<(f64, DVector<f64>)> {
    check_dims(g, y_center, noise.dim())?;
    let gamma = gamma_u(noise, g)?;
    let r = &g.values - &y_center.values;
    let w = gamma.solve(&r);

    let mut value = misfit_w * w.dot(&r) + logdet_w * gamma.log_det();

    // Gradient: 2a·w − 2a·w∘(Γᵐ(g∘w)) − 2a·(M∘Γᵐ)g + 2b·(Γ⁻¹∘Γᵐ)g,
    // M = Γ⁻¹SΓ⁻¹.
    let gm = noise.gamma_m();
    let gw = gm * g.values.component_mul(&w);
    let mut grad = 2.0 * misfit_w * (&w - w.component_mul(&gw));

    let inv = gamma.inverse();
    if logdet_w != 0.0 {
        grad += 2.0 * logdet_w * (inv.component_mul(gm) * &g.values);
    }
    if let Some(s) = scatter {
        let sinv = gamma.solve_matrix(s);
        value += misfit_w * sinv.trace();
        let m = &inv * sinv; // Γ⁻¹ S Γ⁻¹
        grad -= 2.0 * misfit_w * (m.component_mul(gm) * &g.values);
    }
    Ok((value, grad))
}

/// dΦ/dg of the mixed Gaussian potential.
pub fn dphi_mixed_gaussian_dg(
    noise: &MixedGaussianNoise,
    g: &DataVector,
    y: &DataVector,
) -> Result<DVector<f64>> {
    Ok(mixed_gaussian_weighted(noise, g, y, None, 0.5, 0.5)?.1)
}

/// Extreme eigenvalues (λ_min, λ_max) of Γ(u).
pub fn eig_bounds(noise: &MixedGaussianNoise, g: &DataVector) -> Result<(f64, f64)> {
    Ok(gamma_u(noise, g)?.extreme_eigenvalues())
}

/// Factored additive noise density for the quadrature-based mixed model.
#[derive(Clone)]
pub enum AdditiveDensity {
    /// Independent N(0, σⱼ²) components.
    Gaussian { vars: Vec<f64> },
    /// User-supplied per-component log-density.
    Custom {
        log_pdfs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    },
}

impl fmt::Debug for AdditiveDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdditiveDensity::Gaussian { vars } => write!(f, "Gaussian {{ vars: {vars:?} }}"),
            AdditiveDensity::Custom { log_pdfs } => {
                write!(f, "Custom {{ components: {} }}", log_pdfs.len())
            }
        }
    }
}

impl AdditiveDensity {
    pub fn isotropic_gaussian(j: usize, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::InvalidParameter(
                "additive variance must be positive".into(),
            ));
        }
        Ok(AdditiveDensity::Gaussian { vars: vec![var; j] })
    }

    pub fn dim(&self) -> usize {
        match self {
            AdditiveDensity::Gaussian { vars } => vars.len(),
            AdditiveDensity::Custom { log_pdfs } => log_pdfs.len(),
        }
    }

    fn log_pdf(&self, j: usize, z: f64) -> f64 {
        match self {
            AdditiveDensity::Gaussian { vars } => {
                let v = vars[j];
                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - z * z / (2.0 * v)
            }
            AdditiveDensity::Custom { log_pdfs } => log_pdfs[j](z),
        }
    }
}

/// Precomputed per-component quadrature scheme for the factored mixed model
/// ρ(y|u) = Πⱼ ∫ ρₐʲ(yⱼ − gⱼ x) ρ_mʲ(x) dx.
#[derive(Debug, Clone)]
pub struct MixedQuadrature {
    additive: AdditiveDensity,
    multiplicative: MultiplicativeDensity,
    nodes: usize,
    /// Per component: quadrature abscissae xᵢ and log(weightᵢ·ρ_m-factorᵢ),
    /// so that log ∫ = logsumexp(log_wᵢ + log ρₐ(y − g·xᵢ)).
    schemes: Vec<ComponentScheme>,
}

#[derive(Debug, Clone)]
struct ComponentScheme {
    abscissae: Vec<f64>,
    log_weights: Vec<f64>,
}

impl MixedQuadrature {
    /// Gauss–Hermite for Gaussian multiplicative factors, Gauss–Legendre on
    /// the truncated support otherwise.
    pub fn new(
        additive: AdditiveDensity,
        multiplicative: MultiplicativeDensity,
        nodes: usize,
    ) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least 2 nodes".into(),
            ));
        }
        if additive.dim() != multiplicative.dim() {
            return Err(Error::DimensionMismatch {
                expected: multiplicative.dim(),
                got: additive.dim(),
            });
        }
        let schemes = multiplicative
            .components()
            .iter()
            .map(|c| match c {
                ComponentDensity::Gaussian { var } => {
                    // x = 1 + √(2 var) t folds the density into the rule:
                    // ∫ f(x) N(x; 1, var) dx = (1/√π) Σ wᵢ f(xᵢ).
                    let rule = gauss_hermite(nodes);
                    let spread = (2.0 * var).sqrt();
                    ComponentScheme {
                        abscissae: rule.nodes.iter().map(|t| 1.0 + spread * t).collect(),
                        log_weights: rule
                            .weights
                            .iter()
                            .map(|w| w.ln() - 0.5 * std::f64::consts::PI.ln())
                            .collect(),
                    }
                }
                other => {
                    let (lo, hi) = truncation_interval(other);
                    let rule = gauss_legendre_on(nodes, lo, hi);
                    ComponentScheme {
                        abscissae: rule.nodes.clone(),
                        log_weights: rule
                            .nodes
                            .iter()
                            .zip(&rule.weights)
                            .map(|(&x, &w)| w.ln() + other.log_pdf(x))
                            .collect(),
                    }
                }
            })
            .collect();
        Ok(Self {
            additive,
            multiplicative,
            nodes,
            schemes,
        })
    }

    pub fn dim(&self) -> usize {
        self.multiplicative.dim()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    fn log_marginal(&self, j: usize, g: f64, y: f64) -> f64 {
        let scheme = &self.schemes[j];
        let terms: Vec<f64> = scheme
            .abscissae
            .iter()
            .zip(&scheme.log_weights)
            .map(|(&x, &lw)| lw + self.additive.log_pdf(j, y - g * x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Φ = −Σⱼ log ∫ ρₐʲ(yⱼ − gⱼ x) ρ_mʲ(x) dx, each integral in log space.
    pub fn phi(&self, g: &DataVector, y: &DataVector) -> Result<f64> {
        check_dims(g, y, self.dim())?;
        let mut phi = 0.0;
        for j in 0..self.dim() {
            let lm = self.log_marginal(j, g.values[j], y.values[j]);
            if !lm.is_finite() {
                return Err(Error::QuadratureUnderflow { index: j });
            }
            phi -= lm;
        }
        Ok(phi)
    }

    /// dΦ/dg by per-component central differences (each integral depends on
    /// one gⱼ only).
    pub fn dphi_dg(&self, g: &DataVector, y: &DataVector) -> Result<DVector<f64>> {
        check_dims(g, y, self.dim())?;
        let mut grad = DVector::zeros(self.dim());
        for j in 0..self.dim() {
            let gj = g.values[j];
            let h = 1e-6 * gj.abs().max(1e-2);
            let lp = self.log_marginal(j, gj + h, y.values[j]);
            let lmns = self.log_marginal(j, gj - h, y.values[j]);
            if !lp.is_finite() || !lmns.is_finite() {
                return Err(Error::QuadratureUnderflow { index: j });
            }
            grad[j] = -(lp - lmns) / (2.0 * h);
        }
        Ok(grad)
    }
}

/// One-shot form of the quadrature potential.
pub fn phi_mixed_quadrature(
    additive: &AdditiveDensity,
    multiplicative: &MultiplicativeDensity,
    g: &DataVector,
    y: &DataVector,
    nodes: usize,
) -> Result<f64> {
    MixedQuadrature::new(additive.clone(), multiplicative.clone(), nodes)?.phi(g, y)
}

/// Gaussian moments of ν^{y,A}(dx) ∝ ρₐ(y − Ax) ρ_m(x) dx for diagonal A:
/// Σ = (Γᵐ⁻¹ + AΓᵃ⁻¹A)⁻¹ and m = Σ(AΓᵃ⁻¹y + Γᵐ⁻¹𝟏). Requires Γᵐ ≻ 0.
pub fn nu_posterior_moments(
    y: &DataVector,
    a_diag: &DVector<f64>,
    noise: &MixedGaussianNoise,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let j = noise.dim();
    if y.dim() != j || a_diag.len() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            got: y.dim().max(a_diag.len()),
        });
    }
    let gamma_m = SpdMatrix::new(noise.gamma_m().clone())
        .map_err(|_| Error::SingularSystem("ν^{y,A} moments need Γᵐ ≻ 0".into()))?;
    let gm_inv = gamma_m.inverse();
    let ga_inv = noise.gamma_a().inverse();

    // A M A for diagonal A scales rows and columns.
    let mut a_ga_a = ga_inv.clone();
    for r in 0..j {
        for c in 0..j {
            a_ga_a[(r, c)] *= a_diag[r] * a_diag[c];
        }
    }
    let precision = SpdMatrix::new(&gm_inv + a_ga_a)?;
    let sigma = precision.inverse();

    let ones = DVector::from_element(j, 1.0);
    let rhs = {
        let mut v = &ga_inv * &y.values;
        for r in 0..j {
            v[r] *= a_diag[r];
        }
        v + &gm_inv * ones
    };
    let mean = &sigma * rhs;
    Ok((mean, sigma))
}

/// Kummer ₁F₁(−½, ½, −x) for x ≥ 0 via the closed identity
/// e^{−x} + erf(√x)·√(πx).
pub fn kummer_m_half(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    (-x).exp() + erf(x.sqrt()) * (std::f64::consts::PI * x).sqrt()
}

/// E|X| for X ~ N(mean, var), evaluated as
/// √(2 var/π) · ₁F₁(−½, ½, −mean²/(2 var)).
pub fn abs_first_moment(mean: f64, var: f64) -> f64 {
    assert!(var > 0.0, "variance must be positive");
    let x = mean * mean / (2.0 * var);
    (2.0 * var / std::f64::consts::PI).sqrt() * kummer_m_half(x)
}
