//! Implementations of the pipeline subcommands. Each artifact-producing
//! command returns the manifest it wrote, so re-runs can be verified.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use clickcascade_core::analysis::{
    bootstrap_final_entropy, feature_frequency_series, final_feature_distribution,
    first_ranked_series, gini, polyfit_r2, shannon_entropy, BootstrapSummary,
};
use clickcascade_core::bayes_ab::{self, ArmStats, ZTestOutcome};
use clickcascade_core::cascade::{
    self, DecisionModel, ProbabilityMapping, SimConfig, DEFAULT_PROBABILITY_FLOOR,
};
use clickcascade_core::io::{
    load_lexicon_dir, load_packages_csv, write_atomic, write_feature_matrix_csv,
    write_round_log_csv, ExperimentResults, FittedModelFile, LdaModelFile,
};
use clickcascade_core::lasso::{
    cross_validate, lambda_grid, lambda_max, LambdaRule, RegressionProblem, DEFAULT_MAX_SWEEPS,
};
use clickcascade_core::textfeat::build_matrix;
use clickcascade_core::topics::{build_documents, default_alpha, fit_lda, topic_columns};

use crate::manifest::{digest_file, CommandSpec, Manifest};

/// Where the decision model driving a simulation comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ModelSource {
    /// Seeded synthetic model (see `DecisionModel::synthetic`).
    Synthetic { seed: u64 },
    /// A fitted model JSON written by `clickcascade fit`; the path is
    /// resolved relative to the config file.
    File { path: PathBuf },
}

/// The simulate config file: the full simulation recipe plus the model
/// source and optional probability-mapping overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub sim: SimConfig,
    pub decision_model: ModelSource,
    #[serde(default)]
    pub probability_floor: Option<f64>,
    #[serde(default)]
    pub mapping: Option<ProbabilityMapping>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&raw)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        if config.schema_version != 1 {
            bail!("unsupported config schema_version {}", config.schema_version);
        }
        Ok(config)
    }

    /// Builds the decision model, resolving a model file relative to the
    /// config's directory.
    pub fn resolve_model(&self, config_path: &Path) -> Result<DecisionModel> {
        let mut model = match &self.decision_model {
            ModelSource::Synthetic { seed } => DecisionModel::synthetic(
                self.sim.feature_universe,
                self.sim.n_features_per_package,
                *seed,
            ),
            ModelSource::File { path } => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    config_path.parent().unwrap_or(Path::new(".")).join(path)
                };
                let file = FittedModelFile::load(&resolved)
                    .map_err(|e| anyhow::anyhow!("cannot load model {}: {e}", resolved.display()))?;
                DecisionModel::new(
                    file.w0,
                    file.weights,
                    DEFAULT_PROBABILITY_FLOOR,
                    ProbabilityMapping::ClippedLinear,
                )?
            }
        };
        if let Some(floor) = self.probability_floor {
            model = DecisionModel::new(model.w0, model.weights, floor, model.mapping)?;
        }
        if let Some(mapping) = self.mapping {
            model.mapping = mapping;
        }
        Ok(model)
    }
}

pub fn run_extract(
    input: &Path,
    lexicons: &Path,
    topic_model: Option<&Path>,
    output: &Path,
) -> Result<Manifest> {
    let records = load_packages_csv(input)
        .map_err(|e| anyhow::anyhow!("cannot load packages {}: {e}", input.display()))?;
    let lexicon_tables = load_lexicon_dir(lexicons)
        .map_err(|e| anyhow::anyhow!("cannot load lexicons from {}: {e}", lexicons.display()))?;
    log::info!(
        "extracting features for {} packages with {} lexicons",
        records.len(),
        lexicon_tables.len()
    );

    let topics = match topic_model {
        Some(path) => {
            let model = LdaModelFile::load(path)
                .map_err(|e| anyhow::anyhow!("cannot load topic model {}: {e}", path.display()))?
                .into_model()?;
            Some(topic_columns(&model, &records))
        }
        None => None,
    };
    let matrix = build_matrix(&records, &lexicon_tables, topics.as_ref())?;

    let mut buf = Vec::new();
    write_feature_matrix_csv(&matrix, &mut buf)?;
    write_atomic(output, &buf)?;

    let mut inputs = vec![digest_file(input)?];
    if let Some(path) = topic_model {
        inputs.push(digest_file(path)?);
    }
    let manifest = Manifest::new(
        CommandSpec::Extract {
            input: input.to_path_buf(),
            lexicons: lexicons.to_path_buf(),
            topic_model: topic_model.map(Path::to_path_buf),
            output: output.to_path_buf(),
        },
        inputs,
        vec![digest_file(output)?],
    );
    manifest.save(&manifest_path_for(output))?;
    Ok(manifest)
}

#[allow(clippy::too_many_arguments)]
pub fn run_topics(
    input: &Path,
    k_topics: usize,
    alpha: Option<f64>,
    beta: f64,
    iterations: usize,
    seed: u64,
    min_doc_freq: usize,
    output: &Path,
) -> Result<Manifest> {
    let records = load_packages_csv(input)
        .map_err(|e| anyhow::anyhow!("cannot load packages {}: {e}", input.display()))?;
    let alpha = alpha.unwrap_or_else(|| default_alpha(k_topics));
    let set = build_documents(&records, min_doc_freq)?;
    if !set.dropped.is_empty() {
        log::warn!("{} stories dropped before fitting", set.dropped.len());
    }
    log::info!(
        "fitting {k_topics} topics on {} documents ({} terms)",
        set.documents.len(),
        set.vocab.len()
    );
    let model = fit_lda(&set, k_topics, alpha, beta, iterations, seed)?;
    LdaModelFile::from_model(&model).save(output)?;

    let manifest = Manifest::new(
        CommandSpec::Topics {
            input: input.to_path_buf(),
            k_topics,
            alpha,
            beta,
            iterations,
            seed,
            min_doc_freq,
            output: output.to_path_buf(),
        },
        vec![digest_file(input)?],
        vec![digest_file(output)?],
    );
    manifest.save(&manifest_path_for(output))?;
    Ok(manifest)
}

#[allow(clippy::too_many_arguments)]
pub fn run_fit(
    features: &Path,
    k_folds: usize,
    grid_size: usize,
    grid_ratio: f64,
    rule: LambdaRule,
    seed: u64,
    output: &Path,
) -> Result<Manifest> {
    let table = clickcascade_core::io::read_feature_matrix_csv(
        fs::File::open(features)
            .with_context(|| format!("cannot open features file {}", features.display()))?,
    )?;
    let problem = RegressionProblem::new(table.rows, table.outcomes, true)?;
    if !problem.excluded_columns.is_empty() {
        let names: Vec<&str> = problem
            .excluded_columns
            .iter()
            .map(|&j| table.names[j].as_str())
            .collect();
        log::warn!("excluded zero-variance columns: {names:?}");
    }
    let lmax = lambda_max(&problem)?;
    let grid = lambda_grid(lmax, grid_size, grid_ratio)?;
    let report = cross_validate(&problem, &grid, k_folds, seed)?;
    let (lambda, fitted) = clickcascade_core::lasso::select_lambda(&problem, &report, rule)?;
    if !fitted.converged {
        log::warn!("final fit did not converge within {DEFAULT_MAX_SWEEPS} sweeps");
    }
    let nonzero = fitted.weights.iter().filter(|&&w| w != 0.0).count();
    log::info!(
        "selected lambda {lambda:.6e} ({nonzero}/{} nonzero weights)",
        fitted.weights.len()
    );
    FittedModelFile::new(table.names, &fitted, &report, rule, grid_ratio).save(output)?;

    let rule_name = match rule {
        LambdaRule::Min => "min",
        LambdaRule::OneSe => "one_se",
    };
    let manifest = Manifest::new(
        CommandSpec::Fit {
            features: features.to_path_buf(),
            k_folds,
            grid_size,
            grid_ratio,
            rule: rule_name.to_string(),
            seed,
            output: output.to_path_buf(),
        },
        vec![digest_file(features)?],
        vec![digest_file(output)?],
    );
    manifest.save(&manifest_path_for(output))?;
    Ok(manifest)
}

pub fn run_simulate(config_path: &Path, output_dir: &Path) -> Result<Manifest> {
    let config = ExperimentConfig::load(config_path)?;
    let model = config.resolve_model(config_path)?;
    config.sim.validate_with_model(&model)?;
    fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create output dir {}", output_dir.display()))?;

    log::info!(
        "running {} replicas of {:?} on {} agents",
        config.sim.n_replicas,
        config.sim.scenario,
        config.sim.n_agents
    );
    let replicas = cascade::run_experiment(&config.sim, &model)?;
    let results = ExperimentResults::new(config.sim.clone(), model, replicas);

    let results_path = output_dir.join("results.json");
    results.save(&results_path)?;
    let rounds_path = output_dir.join("rounds.csv");
    let mut csv_buf = Vec::new();
    write_round_log_csv(&results.replicas, &mut csv_buf)?;
    write_atomic(&rounds_path, &csv_buf)?;

    let manifest = Manifest::new(
        CommandSpec::Simulate {
            config: config_path.to_path_buf(),
            output_dir: output_dir.to_path_buf(),
        },
        vec![digest_file(config_path)?],
        vec![digest_file(&results_path)?, digest_file(&rounds_path)?],
    );
    manifest.save(&output_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// One scenario's analysis block in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub label: String,
    pub scenario: String,
    pub n_replicas: usize,
    pub rounds: usize,
    pub final_entropy: f64,
    pub final_gini: f64,
    pub entropy_bootstrap: BootstrapSummary,
    pub final_distribution: Vec<f64>,
    pub first_ranked_series: Vec<f64>,
    /// R^2 per requested degree, in request order.
    pub trend_r2: Vec<(usize, f64)>,
    /// R^2 gain of the highest requested degree over the lowest.
    pub delta_r2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub scenarios: Vec<ScenarioReport>,
    /// Present when exactly two inputs are analyzed.
    pub comparison: Option<serde_json::Value>,
}

pub fn run_analyze(
    inputs: &[PathBuf],
    output: &Path,
    bootstrap_resamples: usize,
    bootstrap_seed: u64,
    degrees: &[usize],
) -> Result<Manifest> {
    if inputs.is_empty() {
        bail!("analyze needs at least one input directory");
    }
    let mut scenarios = Vec::new();
    let mut input_digests = Vec::new();
    for dir in inputs {
        let results_path = dir.join("results.json");
        let results = ExperimentResults::load(&results_path)
            .map_err(|e| anyhow::anyhow!("cannot load {}: {e}", results_path.display()))?;
        input_digests.push(digest_file(&results_path)?);

        let m = results.config.feature_universe;
        let dist = final_feature_distribution(&results.replicas, m)?;
        let series = feature_frequency_series(&results.replicas, m)?;
        let trace = first_ranked_series(&series);
        let mut trend_r2 = Vec::new();
        for &degree in degrees {
            trend_r2.push((degree, polyfit_r2(&trace, degree)?.r_squared));
        }
        let delta_r2 = if trend_r2.len() < 2 {
            0.0
        } else {
            let lowest = trend_r2.iter().min_by_key(|t| t.0).unwrap().1;
            let highest = trend_r2.iter().max_by_key(|t| t.0).unwrap().1;
            highest - lowest
        };
        scenarios.push(ScenarioReport {
            label: dir
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_else(|| dir.display().to_string()),
            scenario: format!("{:?}", results.config.scenario).to_lowercase(),
            n_replicas: results.replicas.len(),
            rounds: results.config.n_rounds() as usize,
            final_entropy: shannon_entropy(&dist)?,
            final_gini: gini(&dist)?,
            entropy_bootstrap: bootstrap_final_entropy(
                &results.replicas,
                m,
                bootstrap_resamples,
                bootstrap_seed,
            )?,
            final_distribution: dist.values.clone(),
            first_ranked_series: trace,
            trend_r2,
            delta_r2,
        });
    }

    let comparison = (scenarios.len() == 2).then(|| {
        let (a, b) = (&scenarios[0], &scenarios[1]);
        let disjoint = a.entropy_bootstrap.ci_high < b.entropy_bootstrap.ci_low
            || b.entropy_bootstrap.ci_high < a.entropy_bootstrap.ci_low;
        json!({
            "labels": [a.label, b.label],
            "entropy_diff": a.final_entropy - b.final_entropy,
            "lower_entropy": if a.final_entropy < b.final_entropy { &a.label } else { &b.label },
            "entropy_cis_disjoint": disjoint,
            "delta_r2": { &a.label: a.delta_r2, &b.label: b.delta_r2 },
            "larger_delta_r2": if a.delta_r2 > b.delta_r2 { &a.label } else { &b.label },
        })
    });

    let report = AnalysisReport {
        schema_version: 1,
        bootstrap_resamples,
        bootstrap_seed,
        scenarios,
        comparison,
    };
    write_atomic(output, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;

    let manifest = Manifest::new(
        CommandSpec::Analyze {
            inputs: inputs.to_vec(),
            output: output.to_path_buf(),
            bootstrap_resamples,
            bootstrap_seed,
            degrees: degrees.to_vec(),
        },
        input_digests,
        vec![digest_file(output)?],
    );
    manifest.save(&manifest_path_for(output))?;
    Ok(manifest)
}

pub enum AbMethod {
    Bayes,
    ZTest { significance: f64 },
}

/// One-shot A/B calculator; prints a single JSON object on stdout.
pub fn run_abtest(
    clicks_a: u64,
    impressions_a: u64,
    clicks_b: u64,
    impressions_b: u64,
    threshold: f64,
    method: AbMethod,
) -> Result<serde_json::Value> {
    let stats_a = ArmStats::from_impressions(clicks_a, impressions_a)?;
    let stats_b = ArmStats::from_impressions(clicks_b, impressions_b)?;
    let value = match method {
        AbMethod::Bayes => {
            let decision = bayes_ab::decide(stats_a, stats_b, threshold)?;
            json!({
                "method": "bayes",
                "clicks_a": clicks_a,
                "impressions_a": impressions_a,
                "clicks_b": clicks_b,
                "impressions_b": impressions_b,
                "probability_b_beats_a": decision.probability_b_beats_a,
                "uplift": decision.uplift,
                "threshold": decision.threshold,
                "decision": match decision.action {
                    bayes_ab::AbAction::PromoteVariant => "promote_variant",
                    bayes_ab::AbAction::KeepControl => "keep_control",
                },
            })
        }
        AbMethod::ZTest { significance } => {
            let outcome = bayes_ab::z_test(stats_a, stats_b, significance)?;
            let uplift = match (stats_a.ctr(), stats_b.ctr()) {
                (Some(a), Some(b)) if a > 0.0 => Some((b - a) / a),
                _ => None,
            };
            json!({
                "method": "ztest",
                "clicks_a": clicks_a,
                "impressions_a": impressions_a,
                "clicks_b": clicks_b,
                "impressions_b": impressions_b,
                "significance": significance,
                "uplift": uplift,
                "significant_b_better": outcome == ZTestOutcome::SignificantBBetter,
                "decision": match outcome {
                    ZTestOutcome::SignificantBBetter => "promote_variant",
                    ZTestOutcome::NotSignificant => "keep_control",
                },
            })
        }
    };
    Ok(value)
}

/// Re-executes the command recorded in a manifest.
pub fn run_rerun(manifest_path: &Path) -> Result<Manifest> {
    let manifest = Manifest::load(manifest_path)?;
    match manifest.command {
        CommandSpec::Extract { input, lexicons, topic_model, output } => {
            run_extract(&input, &lexicons, topic_model.as_deref(), &output)
        }
        CommandSpec::Topics {
            input,
            k_topics,
            alpha,
            beta,
            iterations,
            seed,
            min_doc_freq,
            output,
        } => run_topics(
            &input,
            k_topics,
            Some(alpha),
            beta,
            iterations,
            seed,
            min_doc_freq,
            &output,
        ),
        CommandSpec::Fit { features, k_folds, grid_size, grid_ratio, rule, seed, output } => {
            let rule = match rule.as_str() {
                "min" => LambdaRule::Min,
                "one_se" => LambdaRule::OneSe,
                other => bail!("unknown rule {other:?} in manifest"),
            };
            run_fit(&features, k_folds, grid_size, grid_ratio, rule, seed, &output)
        }
        CommandSpec::Simulate { config, output_dir } => run_simulate(&config, &output_dir),
        CommandSpec::Analyze { inputs, output, bootstrap_resamples, bootstrap_seed, degrees } => {
            run_analyze(&inputs, &output, bootstrap_resamples, bootstrap_seed, &degrees)
        }
    }
}

/// `foo.csv` -> `foo.manifest.json`, next to the artifact.
fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "output".to_string());
    output.with_file_name(format!("{stem}.manifest.json"))
}
