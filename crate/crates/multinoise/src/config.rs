//! Experiment configuration: TOML on disk, validated in aggregate.
//!
//! Parsing reports TOML syntax errors with position information; semantic
//! validation runs every check and reports the full list of problems at
//! once instead of stopping at the first.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DataVector, ForwardMap, DEFAULT_BALL_RADIUS};
use crate::noise::{
    AdditiveDensity, ComponentDensity, MixedGaussianNoise, MixedQuadrature,
    MultiplicativeDensity,
};
use crate::objective::{MinimizeOptions, NoiseModel};
use crate::prior::{GaussianPrior, StateVector, TruthSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every component derives its own substream from it.
    /// Defaults to 0 (the default is recorded in the run manifest).
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub prior: PriorConfig,
    pub forward: ForwardConfig,
    pub noise: NoiseConfig,
    pub data: DataConfig,
    pub experiment: ExperimentKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub n: usize,
    pub tau: Option<f64>,
    pub s: Option<f64>,
    /// Explicit spectrum; overrides (tau, s).
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    /// "linear" | "exp-affine" | "elliptic-1d".
    pub kind: String,
    /// Output dimension J.
    pub j: usize,
    /// Dense matrix (row major), for linear and exp-affine kinds.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Seed for a random Gaussian matrix when no explicit one is given.
    pub matrix_seed: Option<u64>,
    pub matrix_scale: Option<f64>,
    /// Offset b for the linear kind.
    pub offset: Option<Vec<f64>>,
    /// Lower bound ε for the exp-affine kind.
    pub eps: Option<f64>,
    /// Admissible ball radius for positive maps.
    pub ball_radius: Option<f64>,
    /// Interior grid points for elliptic-1d.
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// "gamma" | "lognormal" | "gaussian-mult" | "mixed-gaussian" |
    /// "mixed-quadrature".
    pub kind: String,
    pub alpha: Option<f64>,
    pub sigma2: Option<f64>,
    pub var: Option<f64>,
    pub gamma_a: Option<CovarianceSpec>,
    pub gamma_m: Option<CovarianceSpec>,
    /// Quadrature nodes for mixed-quadrature.
    pub nodes: Option<usize>,
    /// Additive Gaussian variance for mixed-quadrature.
    pub add_var: Option<f64>,
    /// Multiplicative factor for mixed-quadrature:
    /// "gamma" | "lognormal" | "gaussian".
    pub mult_kind: Option<String>,
}

/// Covariance matrix given as a scalar multiple of the identity, a diagonal,
/// or a dense matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub scalar: Option<f64>,
    pub diagonal: Option<Vec<f64>>,
    pub dense: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// "synthesize" draws y from the noise model at 𝒢(u†); "file" reads a
    /// CSV with one value per line.
    pub source: String,
    pub truth: Option<Vec<f64>>,
    /// Whether u† is treated as Cameron–Martin-regular (metadata for the
    /// consistency experiments).
    pub truth_in_cm: Option<bool>,
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ExperimentKind {
    #[serde(rename = "map")]
    Map {
        n_starts: Option<usize>,
        grad_tol: Option<f64>,
        max_iterations: Option<usize>,
    },
    #[serde(rename = "sample")]
    Sample {
        n_samples: usize,
        beta: Option<f64>,
        burn_in: Option<usize>,
    },
    #[serde(rename = "hellinger")]
    Hellinger {
        n_samples: usize,
        deltas: Vec<f64>,
        direction: Option<Vec<f64>>,
    },
    #[serde(rename = "small-noise")]
    SmallNoise {
        n_list: Vec<u32>,
        n_starts: Option<usize>,
        zero_noise: Option<bool>,
    },
    #[serde(rename = "large-data")]
    LargeData {
        n_list: Vec<usize>,
        n_probes: Option<usize>,
        n_starts: Option<usize>,
        logdet_omitted: Option<bool>,
    },
    #[serde(rename = "verify-appendix")]
    VerifyAppendix {
        mc_samples: Option<usize>,
        grid: Option<usize>,
    },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Map { .. } => "map",
            ExperimentKind::Sample { .. } => "sample",
            ExperimentKind::Hellinger { .. } => "hellinger",
            ExperimentKind::SmallNoise { .. } => "small-noise",
            ExperimentKind::LargeData { .. } => "large-data",
            ExperimentKind::VerifyAppendix { .. } => "verify-appendix",
        }
    }
}

/// Parse and fully validate a config file. Semantic problems are aggregated
/// into one error listing every offending field.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(vec![format!("parse error in {}: {e}", path.display())]))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Run every structural check, collecting all failures.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();

        if let Err(e) = self.prior() {
            errors.push(format!("prior: {e}"));
        }
        match self.forward() {
            Err(e) => errors.push(format!("forward: {e}")),
            Ok(fwd) => {
                if fwd.input_dim() != self.prior.n {
                    errors.push(format!(
                        "forward: input dimension {} does not match prior.n = {}",
                        fwd.input_dim(),
                        self.prior.n
                    ));
                }
                if let Err(e) = self.noise_model(fwd.output_dim()) {
                    errors.push(format!("noise: {e}"));
                }
            }
        }
        match self.data.source.as_str() {
            "synthesize" => match &self.data.truth {
                None => errors.push("data: synthesize requires a truth vector".into()),
                Some(t) if t.len() != self.prior.n => errors.push(format!(
                    "data: truth length {} does not match prior.n = {}",
                    t.len(),
                    self.prior.n
                )),
                _ => {}
            },
            "file" => {
                if self.data.file.is_none() {
                    errors.push("data: file source requires a path".into());
                }
            }
            other => errors.push(format!("data: unknown source '{other}'")),
        }
        if let ExperimentKind::Hellinger { deltas, direction, .. } = &self.experiment {
            if deltas.is_empty() {
                errors.push("experiment: hellinger needs at least one delta".into());
            }
            if let Some(d) = direction {
                if d.iter().all(|x| *x == 0.0) {
                    errors.push("experiment: hellinger direction must be nonzero".into());
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn prior(&self) -> Result<GaussianPrior> {
        match &self.prior.eigenvalues {
            Some(eigs) => {
                if eigs.len() != self.prior.n {
                    return Err(Error::InvalidParameter(format!(
                        "eigenvalues length {} does not match n = {}",
                        eigs.len(),
                        self.prior.n
                    )));
                }
                GaussianPrior::new(eigs.clone())
            }
            None => {
                let tau = self.prior.tau.unwrap_or(1.0);
                let s = self.prior.s.unwrap_or(1.0);
                GaussianPrior::matern_like(self.prior.n, tau, s)
            }
        }
    }

    fn dense_matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        match &self.forward.matrix {
            Some(m) => {
                if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidParameter(format!(
                        "matrix must be {rows}×{cols}"
                    )));
                }
                Ok(DMatrix::from_fn(rows, cols, |r, c| m[r][c]))
            }
            None => {
                let seed = self.forward.matrix_seed.unwrap_or(1);
                let scale = self.forward.matrix_scale.unwrap_or(1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(0x666f7277); // "forw"
                use rand_distr::{Distribution, StandardNormal};
                Ok(DMatrix::from_fn(rows, cols, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                }))
            }
        }
    }

    pub fn forward(&self) -> Result<ForwardMap> {
        let n = self.prior.n;
        let j = self.forward.j;
        match self.forward.kind.as_str() {
            "linear" => {
                let matrix = self.dense_matrix(j, n)?;
                let offset = match &self.forward.offset {
                    Some(b) => {
                        if b.len() != j {
                            return Err(Error::InvalidParameter(format!(
                                "offset length {} does not match j = {j}",
                                b.len()
                            )));
                        }
                        DVector::from_row_slice(b)
                    }
                    None => DVector::zeros(j),
                };
                ForwardMap::linear(matrix, offset)
            }
            "exp-affine" => {
                let matrix = self.dense_matrix(j, n)?;
                let eps = self.forward.eps.unwrap_or(0.1);
                let radius = self.forward.ball_radius.unwrap_or(DEFAULT_BALL_RADIUS);
                ForwardMap::exp_affine(matrix, eps, radius)
            }
            "elliptic-1d" => {
                let m = self.forward.grid_points.unwrap_or(199);
                ForwardMap::elliptic_1d(n, m, j)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown forward kind '{other}'"
            ))),
        }
    }

    fn covariance(&self, spec: &CovarianceSpec, j: usize, name: &str) -> Result<DMatrix<f64>> {
        let given = [
            spec.scalar.is_some(),
            spec.diagonal.is_some(),
            spec.dense.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if given != 1 {
            return Err(Error::InvalidParameter(format!(
                "{name}: exactly one of scalar, diagonal, dense must be given"
            )));
        }
        if let Some(s) = spec.scalar {
            return Ok(DMatrix::identity(j, j) * s);
        }
        if let Some(d) = &spec.diagonal {
            if d.len() != j {
                return Err(Error::InvalidParameter(format!(
                    "{name}: diagonal length {} does not match J = {j}",
                    d.len()
                )));
            }
            return Ok(DMatrix::from_diagonal(&DVector::from_row_slice(d)));
        }
        let dense = spec.dense.as_ref().unwrap();
        if dense.len() != j || dense.iter().any(|r| r.len() != j) {
            return Err(Error::InvalidParameter(format!(
                "{name}: dense matrix must be {j}×{j}"
            )));
        }
        let m = DMatrix::from_fn(j, j, |r, c| dense[r][c]);
        for r in 0..j {
            for c in (r + 1)..j {
                if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name}: matrix is not symmetric at ({r},{c})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn mixed_noise(&self, j: usize) -> Result<MixedGaussianNoise> {
        let ga = self
            .noise
            .gamma_a
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("gamma_a is required".into()))?;
        let gm = self
            .noise
            .gamma_m
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("gamma_m is required".into()))?;
        MixedGaussianNoise::new(
            self.covariance(ga, j, "gamma_a")?,
            self.covariance(gm, j, "gamma_m")?,
        )
    }

    fn quadrature_mult_component(&self) -> Result<ComponentDensity> {
        match self.noise.mult_kind.as_deref().unwrap_or("gaussian") {
            "gamma" => Ok(ComponentDensity::Gamma {
                alpha: self
                    .noise
                    .alpha
                    .ok_or_else(|| Error::InvalidParameter("gamma needs alpha".into()))?,
            }),
            "lognormal" => Ok(ComponentDensity::LogNormal {
                sigma2: self
                    .noise
                    .sigma2
                    .ok_or_else(|| Error::InvalidParameter("lognormal needs sigma2".into()))?,
            }),
            "gaussian" => Ok(ComponentDensity::Gaussian {
                var: self
                    .noise
                    .var
                    .ok_or_else(|| Error::InvalidParameter("gaussian needs var".into()))?,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown mult_kind '{other}'"
            ))),
        }
    }

    pub fn noise_model(&self, j: usize) -> Result<NoiseModel> {
        match self.noise.kind.as_str() {
            "gamma" => {
                let alpha = self
                    .noise
                    .alpha
                    .ok_or_else(|| Error::InvalidParameter("gamma noise needs alpha".into()))?;
                Ok(NoiseModel::Multiplicative(MultiplicativeDensity::iid(
                    ComponentDensity::Gamma { alpha },
                    j,
                )?))
            }
            "lognormal" => {
                let sigma2 = self.noise.sigma2.ok_or_else(|| {
                    Error::InvalidParameter("lognormal noise needs sigma2".into())
                })?;
                Ok(NoiseModel::Multiplicative(MultiplicativeDensity::iid(
                    ComponentDensity::LogNormal { sigma2 },
                    j,
                )?))
            }
            "gaussian-mult" => {
                let var = self.noise.var.ok_or_else(|| {
                    Error::InvalidParameter("gaussian-mult noise needs var".into())
                })?;
                Ok(NoiseModel::Multiplicative(MultiplicativeDensity::iid(
                    ComponentDensity::Gaussian { var },
                    j,
                )?))
            }
            "mixed-gaussian" => Ok(NoiseModel::MixedGaussian(self.mixed_noise(j)?)),
            "mixed-quadrature" => {
                let add_var = self.noise.add_var.ok_or_else(|| {
                    Error::InvalidParameter("mixed-quadrature needs add_var".into())
                })?;
                let nodes = self.noise.nodes.unwrap_or(40);
                let additive = AdditiveDensity::isotropic_gaussian(j, add_var)?;
                let mult = MultiplicativeDensity::iid(self.quadrature_mult_component()?, j)?;
                Ok(NoiseModel::MixedQuadrature(MixedQuadrature::new(
                    additive, mult, nodes,
                )?))
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown noise kind '{other}'"
            ))),
        }
    }

    pub fn truth(&self) -> Result<TruthSpec> {
        let coeffs = self
            .data
            .truth
            .clone()
            .ok_or_else(|| Error::InvalidParameter("config has no truth vector".into()))?;
        TruthSpec::new(coeffs, self.data.truth_in_cm.unwrap_or(true))
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let mut opts = MinimizeOptions::default();
        if let ExperimentKind::Map {
            grad_tol,
            max_iterations,
            ..
        } = &self.experiment
        {
            if let Some(t) = grad_tol {
                opts.grad_tol = *t;
            }
            if let Some(m) = max_iterations {
                opts.max_iterations = *m;
            }
        }
        opts
    }

    /// Observed data: read from file, or synthesized from the truth through
    /// the configured noise model with the given RNG.
    pub fn observed_data<R: Rng>(
        &self,
        forward: &ForwardMap,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<DataVector> {
        match self.data.source.as_str() {
            "file" => {
                let path = self
                    .data
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("data.file missing".into()))?;
                read_data_csv(Path::new(path), forward.output_dim())
            }
            "synthesize" => {
                let truth = self.truth()?;
                let g = forward.apply(&truth.state)?;
                synthesize_data(&g, noise, rng)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown data source '{other}'"
            ))),
        }
    }
}

/// Draw one observation from the noise model at forward value g.
pub fn synthesize_data<R: Rng>(
    g: &DataVector,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DataVector> {
    use rand_distr::{Distribution, Gamma as GammaDist, LogNormal as LogNormalDist, Normal};
    let j = g.dim();
    let values = match noise {
        NoiseModel::Zero => g.values.clone(),
        NoiseModel::Gamma { alpha } => {
            let d = GammaDist::new(*alpha, 1.0 / alpha)
                .map_err(|e| Error::InvalidParameter(format!("gamma sampler: {e}")))?;
            DVector::from_iterator(j, g.values.iter().map(|&gj| gj * d.sample(rng)))
        }
        NoiseModel::Multiplicative(dens) => {
            let mut v = DVector::zeros(j);
            for (jj, c) in dens.components().iter().enumerate() {
                let eta = match c {
                    ComponentDensity::Gamma { alpha } => GammaDist::new(*alpha, 1.0 / alpha)
                        .map_err(|e| Error::InvalidParameter(format!("gamma sampler: {e}")))?
                        .sample(rng),
                    ComponentDensity::LogNormal { sigma2 } => {
                        LogNormalDist::new(-sigma2 / 2.0, sigma2.sqrt())
                            .map_err(|e| {
                                Error::InvalidParameter(format!("lognormal sampler: {e}"))
                            })?
                            .sample(rng)
                    }
                    ComponentDensity::Gaussian { var } => Normal::new(1.0, var.sqrt())
                        .map_err(|e| Error::InvalidParameter(format!("normal sampler: {e}")))?
                        .sample(rng),
                    ComponentDensity::Custom { .. } => {
                        return Err(Error::InvalidParameter(
                            "cannot synthesize from a custom density".into(),
                        ))
                    }
                };
                v[jj] = g.values[jj] * eta;
            }
            v
        }
        NoiseModel::MixedGaussian(noise) => {
            let (eta_a, eta_m) = noise.sample_noises(rng);
            &g.values + eta_m.component_mul(&g.values) + eta_a
        }
        NoiseModel::MixedQuadrature(_) => {
            return Err(Error::InvalidParameter(
                "synthesize data with the matching mixed-gaussian model instead".into(),
            ))
        }
    };
    Ok(DataVector::from_vector(values))
}

fn read_data_csv(path: &Path, j: usize) -> Result<DataVector> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Other(format!("csv: {e}")))?;
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Other(format!("csv value '{field}': {e}")))?;
            values.push(v);
        }
    }
    if values.len() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            got: values.len(),
        });
    }
    DataVector::new(values)
}

/// A prior draw used as the configured truth when experiments need one but
/// the config synthesizes it (kept here so the CLI and tests agree on it).
pub fn probe_states(prior: &GaussianPrior, count: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x70726f62); // "prob"
    (0..count).map(|_| prior.sample(&mut rng)).collect()
}
