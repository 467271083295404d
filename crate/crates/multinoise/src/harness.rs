//! Experiment runner: wires config, seeding, persistence and reproducibility.
//!
//! One master seed is split into named substreams (data synthesis, optimizer
//! starts, chains, estimators), so adding one experiment to a config never
//! perturbs another's random numbers. Numeric outputs (CSV for bulk rows,
//! JSON for summaries) are byte-identical across runs of the same (config,
//! seed, version); wall-clock timestamps live only in the manifest.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{parse_config, probe_states, ExperimentConfig, ExperimentKind};
use crate::consistency::{
    large_data_experiment, small_noise_experiment, LargeDataOptions, SmallNoiseOptions,
};
use crate::error::{Error, Result};
use crate::forward::DataVector;
use crate::hellinger::wellposedness_sweep;
use crate::lbfgs::minimize;
use crate::noise::{abs_first_moment, nu_posterior_moments, MixedGaussianNoise};
use crate::objective::{NoiseModel, ObjectiveSpec, Potential};
use crate::pcn::{pcn_sample, PcnOptions};
use crate::stats::{ls_slope, mean, variance};

/// Derive a reproducible substream seed from the master seed and a stable
/// label.
pub fn substream_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub experiment: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<String>,
    pub status: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
    /// Failed checks in a verify-appendix run; zero otherwise.
    pub check_failures: usize,
}

/// How to launch a run: the config plus CLI-level overrides.
#[derive(Debug, Default)]
pub struct RunRequest {
    pub config_path: PathBuf,
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    /// When launched from a subcommand, the experiment kind it names; a
    /// mismatch with the config is a validation error.
    pub expected_kind: Option<String>,
}

/// Environment variable overriding the output directory (weaker than the
/// explicit CLI flag).
pub const OUT_ENV_VAR: &str = "MULTINOISE_OUT";

struct OutputSink {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputSink {
    fn create(dir: PathBuf, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        let sink = Self { dir, manifest };
        sink.write_manifest()?;
        Ok(sink)
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.dir.join("manifest.json");
        let mut file = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, &self.manifest)
            .map_err(|e| Error::Other(format!("manifest: {e}")))?;
        file.write_all(b"\n")?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut file = fs::File::create(self.dir.join(name))?;
        serde_json::to_writer_pretty(&mut file, value)
            .map_err(|e| Error::Other(format!("{name}: {e}")))?;
        file.write_all(b"\n")?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut writer = csv::Writer::from_path(self.dir.join(name))?;
        writer
            .write_record(header)
            .map_err(|e| Error::Other(format!("{name}: {e}")))?;
        for row in rows {
            writer
                .write_record(row)
                .map_err(|e| Error::Other(format!("{name}: {e}")))?;
        }
        writer
            .flush()
            .map_err(|e| Error::Other(format!("{name}: {e}")))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn finalize(&mut self, status: &str) -> Result<()> {
        self.manifest.status = status.to_string();
        self.manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
        self.write_manifest()
    }
}

fn resolve_output_dir(req: &RunRequest, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &req.out_override {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(OUT_ENV_VAR) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(config.output_dir.clone().unwrap_or_else(|| "out".into()))
}

/// Load, validate and execute the configured experiment. Artifacts land in
/// the resolved output directory; the manifest is written up front and
/// finalized on the way out, including on failure.
pub fn run(req: &RunRequest) -> Result<RunOutcome> {
    let config = parse_config(&req.config_path)?;
    if let Some(expected) = &req.expected_kind {
        if expected != config.experiment.name() {
            return Err(Error::Config(vec![format!(
                "subcommand '{expected}' does not match configured experiment '{}'",
                config.experiment.name()
            )]));
        }
    }
    let seed = req.seed_override.unwrap_or_else(|| config.seed());
    let config_bytes = fs::read(&req.config_path)?;
    let config_hash = format!("{:x}", Sha256::digest(&config_bytes));

    let out_dir = resolve_output_dir(req, &config);
    let manifest = RunManifest {
        config_hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        experiment: config.experiment.name().to_string(),
        started_at: chrono::Utc::now().to_rfc3339(),
        finished_at: None,
        outputs: Vec::new(),
        status: "running".into(),
    };
    let mut sink = OutputSink::create(out_dir.clone(), manifest)?;

    let result = dispatch(&config, seed, &mut sink);
    match result {
        Ok(check_failures) => {
            sink.finalize(if check_failures == 0 { "ok" } else { "checks-failed" })?;
            Ok(RunOutcome {
                manifest: sink.manifest,
                output_dir: out_dir,
                check_failures,
            })
        }
        Err(e) => {
            sink.finalize("failed")?;
            Err(e)
        }
    }
}

fn dispatch(config: &ExperimentConfig, seed: u64, sink: &mut OutputSink) -> Result<usize> {
    match &config.experiment {
        ExperimentKind::Map { n_starts, .. } => {
            run_map(config, seed, n_starts.unwrap_or(8), sink)?;
            Ok(0)
        }
        ExperimentKind::Sample {
            n_samples,
            beta,
            burn_in,
        } => {
            run_sample(config, seed, *n_samples, *beta, *burn_in, sink)?;
            Ok(0)
        }
        ExperimentKind::Hellinger {
            n_samples,
            deltas,
            direction,
        } => {
            run_hellinger(config, seed, *n_samples, deltas, direction.as_deref(), sink)?;
            Ok(0)
        }
        ExperimentKind::SmallNoise {
            n_list,
            n_starts,
            zero_noise,
        } => {
            run_small_noise(
                config,
                seed,
                n_list,
                n_starts.unwrap_or(4),
                zero_noise.unwrap_or(false),
                sink,
            )?;
            Ok(0)
        }
        ExperimentKind::LargeData {
            n_list,
            n_probes,
            n_starts,
            logdet_omitted,
        } => {
            run_large_data(
                config,
                seed,
                n_list,
                n_probes.unwrap_or(5),
                n_starts.unwrap_or(4),
                logdet_omitted.unwrap_or(false),
                sink,
            )?;
            Ok(0)
        }
        ExperimentKind::VerifyAppendix { mc_samples, grid } => run_verify_appendix(
            seed,
            mc_samples.unwrap_or(200_000),
            grid.unwrap_or(5),
            sink,
        ),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
struct MapRunOutput<'a> {
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    restarts: usize,
    minimizer: Vec<f64>,
    starts: &'a [crate::lbfgs::StartReport],
}

fn run_map(
    config: &ExperimentConfig,
    seed: u64,
    n_starts: usize,
    sink: &mut OutputSink,
) -> Result<()> {
    let prior = config.prior()?;
    let forward = config.forward()?;
    let noise = config.noise_model(forward.output_dim())?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "data"));
    let data = config.observed_data(&forward, &noise, &mut data_rng)?;
    let spec = ObjectiveSpec::new(Potential::new(forward, noise, data)?, prior.clone(), 1.0)?;

    let mut starts = vec![DVector::zeros(prior.dim())];
    if let Ok(truth) = config.truth() {
        starts.push(truth.state.coeffs.clone());
    }
    let mut start_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "map-starts"));
    for _ in 0..n_starts {
        starts.push(prior.sample(&mut start_rng).coeffs);
    }

    let result = minimize(&spec, &starts, &config.minimize_options())?;
    let output = MapRunOutput {
        value: result.value,
        grad_norm: result.grad_norm,
        iterations: result.iterations,
        converged: result.converged,
        restarts: result.restarts,
        minimizer: result.minimizer.coeffs.as_slice().to_vec(),
        starts: &result.starts,
    };
    sink.write_json("map_result.json", &output)
}

#[derive(Serialize)]
struct SampleSummary {
    n_samples: usize,
    acceptance_rate: f64,
    beta: f64,
    seed: u64,
    component_means: Vec<f64>,
    component_vars: Vec<f64>,
}

fn run_sample(
    config: &ExperimentConfig,
    seed: u64,
    n_samples: usize,
    beta: Option<f64>,
    burn_in: Option<usize>,
    sink: &mut OutputSink,
) -> Result<()> {
    let prior = config.prior()?;
    let forward = config.forward()?;
    let noise = config.noise_model(forward.output_dim())?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "data"));
    let data = config.observed_data(&forward, &noise, &mut data_rng)?;
    let potential = Potential::new(forward, noise, data)?;

    let mut opts = PcnOptions::new(n_samples);
    opts.beta = beta;
    opts.burn_in = burn_in;
    let chain = pcn_sample(&potential, &prior, &opts, substream_seed(seed, "chain"))?;

    let n = prior.dim();
    let header: Vec<String> = std::iter::once("sample".to_string())
        .chain((0..n).map(|k| format!("coeff_{k}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = chain
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            std::iter::once(i.to_string())
                .chain(s.coeffs.iter().map(|v| fmt(*v)))
                .collect()
        })
        .collect();
    sink.write_csv("chain.csv", &header_refs, &rows)?;

    let mut means = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for k in 0..n {
        let xs: Vec<f64> = chain.samples.iter().map(|s| s.coeffs[k]).collect();
        means.push(mean(&xs));
        vars.push(variance(&xs));
    }
    sink.write_json(
        "sample_summary.json",
        &SampleSummary {
            n_samples,
            acceptance_rate: chain.acceptance_rate,
            beta: chain.beta,
            seed: chain.seed,
            component_means: means,
            component_vars: vars,
        },
    )
}

#[derive(Serialize)]
struct HellingerSummary {
    slope: f64,
    n_samples: usize,
}

fn run_hellinger(
    config: &ExperimentConfig,
    seed: u64,
    n_samples: usize,
    deltas: &[f64],
    direction: Option<&[f64]>,
    sink: &mut OutputSink,
) -> Result<()> {
    let prior = config.prior()?;
    let forward = config.forward()?;
    let noise = config.noise_model(forward.output_dim())?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "data"));
    let base_y = config.observed_data(&forward, &noise, &mut data_rng)?;
    let j = base_y.dim();
    let dir = DataVector::new(match direction {
        Some(d) => d.to_vec(),
        None => vec![1.0; j],
    })?;

    let factory = {
        let forward = forward.clone();
        let noise = noise.clone();
        move |y: DataVector| Potential::new(forward.clone(), noise.clone(), y)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "hellinger"));
    let sweep = wellposedness_sweep(&base_y, &dir, deltas, factory, &prior, n_samples, &mut rng)?;

    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| vec![fmt(r.data_distance), fmt(r.hellinger), fmt(r.std_err)])
        .collect();
    sink.write_csv(
        "hellinger_sweep.csv",
        &["data_distance", "hellinger", "std_err"],
        &rows,
    )?;
    sink.write_json(
        "hellinger_summary.json",
        &HellingerSummary {
            slope: sweep.slope,
            n_samples,
        },
    )
}

#[derive(Serialize)]
struct SmallNoiseSummary {
    seed: u64,
    loglog_slope: f64,
    misfits: Vec<f64>,
}

fn run_small_noise(
    config: &ExperimentConfig,
    seed: u64,
    n_list: &[u32],
    n_starts: usize,
    zero_noise: bool,
    sink: &mut OutputSink,
) -> Result<()> {
    let prior = config.prior()?;
    let forward = config.forward()?;
    let noise = match config.noise_model(forward.output_dim())? {
        NoiseModel::MixedGaussian(n) => n,
        _ => {
            return Err(Error::Config(vec![
                "small-noise experiment requires mixed-gaussian noise".into(),
            ]))
        }
    };
    let truth = config.truth()?;
    let opts = SmallNoiseOptions {
        n_prior_starts: n_starts,
        minimize: config.minimize_options(),
        zero_noise,
    };
    let run = small_noise_experiment(
        &truth,
        &forward,
        &noise,
        &prior,
        n_list,
        &opts,
        substream_seed(seed, "small-noise"),
    )?;

    let rows: Vec<Vec<String>> = run
        .records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                run.seed.to_string(),
                fmt(r.misfit_y),
                fmt(r.misfit_gamma),
                fmt(r.map.value),
                r.map.converged.to_string(),
            ]
        })
        .collect();
    sink.write_csv(
        "small_noise.csv",
        &["n", "seed", "misfit_y", "misfit_gamma", "objective", "converged"],
        &rows,
    )?;

    let xs: Vec<f64> = run.records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = run
        .records
        .iter()
        .map(|r| r.misfit_y.max(1e-300).ln())
        .collect();
    sink.write_json(
        "small_noise_summary.json",
        &SmallNoiseSummary {
            seed: run.seed,
            loglog_slope: ls_slope(&xs, &ys),
            misfits: run.records.iter().map(|r| r.misfit_y).collect(),
        },
    )
}

#[derive(Serialize)]
struct LargeDataSummary {
    seed: u64,
    loglog_slope: f64,
    map_misfits: Vec<f64>,
    map_misfits_no_logdet: Vec<Option<f64>>,
}

fn run_large_data(
    config: &ExperimentConfig,
    seed: u64,
    n_list: &[usize],
    n_probes: usize,
    n_starts: usize,
    logdet_omitted: bool,
    sink: &mut OutputSink,
) -> Result<()> {
    let prior = config.prior()?;
    let forward = config.forward()?;
    let noise = match config.noise_model(forward.output_dim())? {
        NoiseModel::MixedGaussian(n) => n,
        _ => {
            return Err(Error::Config(vec![
                "large-data experiment requires mixed-gaussian noise".into(),
            ]))
        }
    };
    let truth = config.truth()?;
    let probes = probe_states(&prior, n_probes, substream_seed(seed, "probes"));
    let opts = LargeDataOptions {
        n_prior_starts: n_starts,
        minimize: config.minimize_options(),
        with_logdet_omitted: logdet_omitted,
    };
    let run = large_data_experiment(
        &truth,
        &forward,
        &noise,
        &prior,
        n_list,
        &probes,
        &opts,
        substream_seed(seed, "large-data"),
    )?;

    let mut probe_rows = Vec::new();
    for rec in &run.records {
        for (p, (jn, lim)) in rec
            .jn_at_probes
            .iter()
            .zip(&rec.limit_at_probes)
            .enumerate()
        {
            probe_rows.push(vec![
                rec.n.to_string(),
                p.to_string(),
                fmt(*jn),
                fmt(*lim),
                fmt((jn - lim).abs()),
            ]);
        }
    }
    sink.write_csv(
        "large_data_probes.csv",
        &["n", "probe", "jn", "limit", "abs_err"],
        &probe_rows,
    )?;

    let map_rows: Vec<Vec<String>> = run
        .records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt(r.misfit_y),
                r.misfit_no_logdet.map(fmt).unwrap_or_default(),
                r.map.converged.to_string(),
            ]
        })
        .collect();
    sink.write_csv(
        "large_data_map.csv",
        &["n", "misfit_y", "misfit_no_logdet", "converged"],
        &map_rows,
    )?;

    // Slope of the mean probe error against n.
    let xs: Vec<f64> = run.records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = run
        .records
        .iter()
        .map(|r| {
            let errs: Vec<f64> = r
                .jn_at_probes
                .iter()
                .zip(&r.limit_at_probes)
                .map(|(a, b)| (a - b).abs())
                .collect();
            mean(&errs).max(1e-300).ln()
        })
        .collect();
    sink.write_json(
        "large_data_summary.json",
        &LargeDataSummary {
            seed: run.seed,
            loglog_slope: ls_slope(&xs, &ys),
            map_misfits: run.records.iter().map(|r| r.misfit_y).collect(),
            map_misfits_no_logdet: run.records.iter().map(|r| r.misfit_no_logdet).collect(),
        },
    )
}

#[derive(Serialize)]
struct CheckReport {
    check: String,
    pass: bool,
    detail: String,
}

fn run_verify_appendix(
    seed: u64,
    mc_samples: usize,
    grid: usize,
    sink: &mut OutputSink,
) -> Result<usize> {
    use rand_distr::{Distribution, Normal};
    let mut reports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "verify"));

    // 1. Closed-form E|N(m, s)| against Monte Carlo over an (m, s) grid.
    {
        let mut worst: f64 = 0.0;
        let mut pass = true;
        for i in 0..grid {
            for k in 0..grid {
                let m = -2.0 + 4.0 * i as f64 / (grid - 1).max(1) as f64;
                let s = 0.2 + 1.8 * k as f64 / (grid - 1).max(1) as f64;
                let normal = Normal::new(m, s.sqrt()).unwrap();
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for _ in 0..mc_samples {
                    let v: f64 = normal.sample(&mut rng);
                    sum += v.abs();
                    sumsq += v * v;
                }
                let mc = sum / mc_samples as f64;
                let sd = ((sumsq / mc_samples as f64 - mc * mc) / mc_samples as f64).sqrt();
                let closed = abs_first_moment(m, s);
                let z = (closed - mc).abs() / sd.max(1e-12);
                worst = worst.max(z);
                if z > 3.0 {
                    pass = false;
                }
            }
        }
        reports.push(CheckReport {
            check: "abs-first-moment-vs-monte-carlo".into(),
            pass,
            detail: format!("worst |z| = {worst:.3} over {grid}x{grid} grid"),
        });
    }

    // 2. ν^{y,A} moments against self-normalized importance sampling.
    {
        let noise = MixedGaussianNoise::diagonal(&[0.6, 0.9], &[0.5, 0.4])?;
        let y = DataVector::new(vec![1.2, 0.5])?;
        let a = DVector::from_vec(vec![0.8, 1.4]);
        let (mean_v, _) = nu_posterior_moments(&y, &a, &noise)?;
        let n_batches = 40;
        let batch = (mc_samples / n_batches).max(100);
        let prop = [
            Normal::new(1.0, 0.5f64.sqrt()).unwrap(),
            Normal::new(1.0, 0.4f64.sqrt()).unwrap(),
        ];
        let mut batch_means = vec![Vec::new(); 2];
        for _ in 0..n_batches {
            let mut wsum = 0.0;
            let mut wx = [0.0, 0.0];
            for _ in 0..batch {
                let x = [prop[0].sample(&mut rng), prop[1].sample(&mut rng)];
                let r0 = y.values[0] - a[0] * x[0];
                let r1 = y.values[1] - a[1] * x[1];
                let w = (-0.5 * (r0 * r0 / 0.6 + r1 * r1 / 0.9)).exp();
                wsum += w;
                wx[0] += w * x[0];
                wx[1] += w * x[1];
            }
            for i in 0..2 {
                batch_means[i].push(wx[i] / wsum);
            }
        }
        let mut pass = true;
        let mut detail = String::new();
        for i in 0..2 {
            let est = mean(&batch_means[i]);
            let se = (variance(&batch_means[i]) / n_batches as f64).sqrt();
            let z = (est - mean_v[i]).abs() / se.max(1e-12);
            detail.push_str(&format!("m[{i}]: |z| = {z:.3}; "));
            if z > 3.0 {
                pass = false;
            }
        }
        reports.push(CheckReport {
            check: "nu-moments-vs-importance-sampling".into(),
            pass,
            detail,
        });
    }

    // 3. E|Xᵢ| ≤ C(1 + yᵢ⁴ + Aᵢᵢ⁴): C fitted on one grid, asserted on a
    //    disjoint offset grid with a 10% margin.
    {
        let noise = MixedGaussianNoise::diagonal(&[0.7], &[0.6])?;
        let ratio = |y: f64, a: f64| -> Result<f64> {
            let (m, s) = nu_posterior_moments(
                &DataVector::new(vec![y])?,
                &DVector::from_vec(vec![a]),
                &noise,
            )?;
            Ok(abs_first_moment(m[0], s[(0, 0)]) / (1.0 + y.powi(4) + a.powi(4)))
        };
        let mut c_fit: f64 = 0.0;
        for i in 0..grid {
            for k in 0..grid {
                let y = -3.0 + 6.0 * i as f64 / (grid - 1).max(1) as f64;
                let a = -2.0 + 4.0 * k as f64 / (grid - 1).max(1) as f64;
                c_fit = c_fit.max(ratio(y, a)?);
            }
        }
        let c_bound = 1.1 * c_fit;
        let mut worst: f64 = 0.0;
        let mut pass = true;
        for i in 0..grid {
            for k in 0..grid {
                let y = -2.7 + 6.0 * i as f64 / (grid - 1).max(1) as f64;
                let a = -1.8 + 4.0 * k as f64 / (grid - 1).max(1) as f64;
                let r = ratio(y, a)?;
                worst = worst.max(r / c_bound);
                if r > c_bound {
                    pass = false;
                }
            }
        }
        reports.push(CheckReport {
            check: "abs-moment-polynomial-bound".into(),
            pass,
            detail: format!("fitted C = {c_fit:.4}, worst fresh ratio = {worst:.3} of bound"),
        });
    }

    let failures = reports.iter().filter(|r| !r.pass).count();
    sink.write_json("verify_appendix.json", &reports)?;
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_stable_and_distinct() {
        assert_eq!(substream_seed(7, "data"), substream_seed(7, "data"));
        assert_ne!(substream_seed(7, "data"), substream_seed(7, "chain"));
        assert_ne!(substream_seed(7, "data"), substream_seed(8, "data"));
    }

    #[test]
    fn run_writes_manifest_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(
            &config_path,
            r#"
seed = 3

[prior]
n = 2

[forward]
kind = "linear"
j = 2
matrix = [[1.0, 0.0], [0.0, 1.0]]

[noise]
kind = "mixed-gaussian"
gamma_a = { scalar = 0.1 }
gamma_m = { scalar = 0.05 }

[data]
source = "synthesize"
truth = [0.5, -0.5]

[experiment]
kind = "map"
"#,
        )
        .unwrap();
        let out = dir.path().join("results");
        let outcome = run(&RunRequest {
            config_path: config_path.clone(),
            seed_override: None,
            out_override: Some(out.clone()),
            expected_kind: Some("map".into()),
        })
        .unwrap();
        assert_eq!(outcome.manifest.status, "ok");
        assert_eq!(outcome.manifest.seed, 3);
        assert!(out.join("manifest.json").exists());
        assert!(out.join("map_result.json").exists());
        // Every output file the run created is listed in the manifest.
        for name in &outcome.manifest.outputs {
            assert!(out.join(name).exists(), "missing {name}");
        }
    }

    #[test]
    fn mismatched_subcommand_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(
            &config_path,
            r#"
[prior]
n = 1

[forward]
kind = "linear"
j = 1
matrix = [[1.0]]

[noise]
kind = "mixed-gaussian"
gamma_a = { scalar = 0.1 }
gamma_m = { scalar = 0.0 }

[data]
source = "synthesize"
truth = [0.2]

[experiment]
kind = "map"
"#,
        )
        .unwrap();
        let err = run(&RunRequest {
            config_path,
            seed_override: None,
            out_override: Some(dir.path().join("o")),
            expected_kind: Some("sample".into()),
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn identical_seeds_give_byte_identical_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(
            &config_path,
            r#"
seed = 11

[prior]
n = 2

[forward]
kind = "linear"
j = 2
matrix = [[1.0, 0.0], [0.0, 1.0]]

[noise]
kind = "mixed-gaussian"
gamma_a = { scalar = 0.2 }
gamma_m = { scalar = 0.0 }

[data]
source = "synthesize"
truth = [0.4, -0.1]

[experiment]
kind = "sample"
n_samples = 500
beta = 0.6
"#,
        )
        .unwrap();
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        for out in [&out1, &out2] {
            run(&RunRequest {
                config_path: config_path.clone(),
                seed_override: None,
                out_override: Some(out.clone()),
                expected_kind: None,
            })
            .unwrap();
        }
        let a = std::fs::read(out1.join("chain.csv")).unwrap();
        let b = std::fs::read(out2.join("chain.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_appendix_passes_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(
            &config_path,
            r#"
[prior]
n = 1

[forward]
kind = "linear"
j = 1
matrix = [[1.0]]

[noise]
kind = "mixed-gaussian"
gamma_a = { scalar = 0.5 }
gamma_m = { scalar = 0.3 }

[data]
source = "synthesize"
truth = [0.3]

[experiment]
kind = "verify-appendix"
mc_samples = 40000
grid = 3
"#,
        )
        .unwrap();
        let outcome = run(&RunRequest {
            config_path,
            seed_override: Some(5),
            out_override: Some(dir.path().join("v")),
            expected_kind: Some("verify-appendix".into()),
        })
        .unwrap();
        assert_eq!(outcome.check_failures, 0, "appendix checks failed");
        assert_eq!(outcome.manifest.status, "ok");
    }
}
