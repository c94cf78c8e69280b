//! Subcommand implementations. Each one reads inputs, calls the library, and
//! writes a deterministic artifact: JSON to `--out` (or stdout), tables and
//! tree listings for humans.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vinestress::bicop::{default_candidates, empirical_upper_tail_dep, independence_test_tau};
use vinestress::regimes::{assign_clusters, fit_tcop_mixture, kernel_pca_first_component, rank_uniforms, Kernel};
use vinestress::resample::{bootstrap_scenario_ci, BootstrapPlan, CiReport, ScenarioBootstrapConfig};
use vinestress::rvine::{fit_rvine, JointVineModel, RVineModel, VineFitConfig};
use vinestress::scenario::{
    estimate_cm1, estimate_cm2, estimate_cm3, estimate_gkk, OptimizerConfig, ScenarioEstimate,
    ScenarioMethod, ScenarioProblem,
};
use vinestress::simstudy::{run_study, StudyConfig, StudyGenerator};
use vinestress::univariate::{MarginalKind, MarginalModel};

use crate::data::ingest;
use crate::plot::render_scatter;
use crate::{CliError, DataArgs, KernelArg, KindArg, MethodArg, SearchArgs, ThresholdArgs};

/// Write `text` to `out`, or to stdout when no path is given.
fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))
}

fn to_json_line<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

impl KindArg {
    fn to_kind(self) -> MarginalKind {
        match self {
            KindArg::SkewT => MarginalKind::SkewT,
            KindArg::Hybrid => MarginalKind::Hybrid,
        }
    }
}

impl MethodArg {
    fn to_method(self) -> ScenarioMethod {
        match self {
            MethodArg::Cm1 => ScenarioMethod::Cm1,
            MethodArg::Cm2 => ScenarioMethod::Cm2,
            MethodArg::Cm3 => ScenarioMethod::Cm3,
            MethodArg::Gkk => ScenarioMethod::Gkk,
        }
    }
}

/// Empirical quantile with the usual linear interpolation of order
/// statistics (type 7).
fn empirical_quantile(sample: &[f64], level: f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resolve the stress threshold: an absolute override, or the empirical
/// (1-p)-quantile of the observed losses at exceedance level p.
fn resolve_threshold(args: &ThresholdArgs, losses: &[f64]) -> Result<f64, CliError> {
    if let Some(t) = args.threshold {
        if !t.is_finite() {
            return Err(CliError::User("--threshold must be finite".into()));
        }
        return Ok(t);
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::User(format!(
            "--level must lie in (0, 1), got {}",
            args.level
        )));
    }
    Ok(empirical_quantile(losses, 1.0 - args.level))
}

fn search_config(search: &SearchArgs, seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        population_size: search.de_population,
        iterations: search.de_iterations,
        restarts: search.de_restarts,
        seed,
        ..OptimizerConfig::default()
    }
}

fn default_vine_config() -> VineFitConfig {
    VineFitConfig { candidates: default_candidates(), ..VineFitConfig::default() }
}

/// The loss column is fitted alongside the factors under this name.
const LOSS_NAME: &str = "loss";

// ---------------------------------------------------------------------------
// fit-marginals

#[derive(Serialize, Deserialize)]
struct NamedMarginal {
    name: String,
    model: MarginalModel,
}

fn parse_kind(text: &str) -> Result<MarginalKind, CliError> {
    match text {
        "skew_t" => Ok(MarginalKind::SkewT),
        "hybrid" => Ok(MarginalKind::Hybrid),
        other => Err(CliError::User(format!(
            "unknown marginal family {other:?}; expected \"skew_t\" or \"hybrid\""
        ))),
    }
}

pub fn fit_marginals(
    data: &DataArgs,
    kind: KindArg,
    spec: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    if data.names.iter().any(|n| n == LOSS_NAME) {
        return Err(CliError::User(format!(
            "a factor is named {LOSS_NAME:?}, which collides with the loss column"
        )));
    }
    let mut kinds: BTreeMap<String, MarginalKind> = BTreeMap::new();
    if let Some(path) = spec {
        let table: BTreeMap<String, String> = toml::from_str(&read_to_string(path)?)
            .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
        for (name, family) in &table {
            if name != LOSS_NAME && !data.names.contains(name) {
                return Err(CliError::User(format!(
                    "{}: column {name:?} does not exist in the data",
                    path.display()
                )));
            }
            kinds.insert(name.clone(), parse_kind(family)?);
        }
    }

    let mut fitted = Vec::with_capacity(data.dimension() + 1);
    for (j, name) in data.names.iter().enumerate() {
        let pick = kinds.get(name).copied().unwrap_or(kind.to_kind());
        let model = MarginalModel::fit(pick, &data.column(j))
            .map_err(|e| CliError::User(format!("fitting {name}: {e}")))?;
        fitted.push(NamedMarginal { name: name.clone(), model });
    }
    let pick = kinds.get(LOSS_NAME).copied().unwrap_or(kind.to_kind());
    let model = MarginalModel::fit(pick, &data.losses)
        .map_err(|e| CliError::User(format!("fitting {LOSS_NAME}: {e}")))?;
    fitted.push(NamedMarginal { name: LOSS_NAME.into(), model });

    emit(&to_json_line(&fitted)?, out)
}

// ---------------------------------------------------------------------------
// fit-vine

#[derive(Serialize, Deserialize)]
struct VineArtifact {
    /// Variable order of the vine: factor names, then the loss.
    names: Vec<String>,
    model: RVineModel,
    log_likelihood: f64,
    aic: f64,
    bic: f64,
}

fn family_label(copula: &vinestress::bicop::BivariateCopula) -> String {
    use vinestress::bicop::{BicopFamily, Rotation};
    let family = match copula.family() {
        BicopFamily::Independence => "independence",
        BicopFamily::Gaussian => "gaussian",
        BicopFamily::StudentT => "student_t",
        BicopFamily::Clayton => "clayton",
        BicopFamily::Frank => "frank",
        BicopFamily::Bb1 => "bb1",
    };
    match copula.rotation() {
        Rotation::R0 => family.to_owned(),
        Rotation::R90 => format!("{family} r90"),
        Rotation::R180 => format!("{family} r180"),
        Rotation::R270 => format!("{family} r270"),
    }
}

/// Human-readable listing of the selected trees, one line per edge.
fn tree_listing(names: &[String], model: &RVineModel) -> String {
    let mut text = String::new();
    for (t, tree) in model.structure().trees().iter().enumerate() {
        let _ = writeln!(text, "tree {}", t + 1);
        for (e, edge) in tree.iter().enumerate() {
            let (a, b) = edge.conditioned;
            let cond = if edge.conditioning.is_empty() {
                String::new()
            } else {
                let given: Vec<&str> =
                    edge.conditioning.iter().map(|&v| names[v].as_str()).collect();
                format!(" | {}", given.join(","))
            };
            let copula = model.copula(t, e);
            let params = copula
                .parameters()
                .iter()
                .map(|p| format!("{p:.3}"))
                .collect::<Vec<_>>()
                .join(", ");
            let shape = if params.is_empty() {
                family_label(copula)
            } else {
                format!("{}({params})", family_label(copula))
            };
            let _ = writeln!(
                text,
                "  {},{}{cond}  {shape}  tau={:.3}",
                names[a], names[b], copula.tau()
            );
        }
    }
    text
}

pub fn fit_vine(data: &DataArgs, marginals: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let fitted: Vec<NamedMarginal> = serde_json::from_str(&read_to_string(marginals)?)
        .map_err(|e| CliError::User(format!("{}: {e}", marginals.display())))?;
    let by_name: BTreeMap<&str, &MarginalModel> =
        fitted.iter().map(|m| (m.name.as_str(), &m.model)).collect();

    let mut names: Vec<String> = data.names.clone();
    names.push(LOSS_NAME.into());
    let mut models = Vec::with_capacity(names.len());
    for name in &names {
        let model = by_name.get(name.as_str()).ok_or_else(|| {
            CliError::User(format!(
                "{}: no marginal model for column {name:?}",
                marginals.display()
            ))
        })?;
        models.push((*model).clone());
    }

    let rows = data.rows_with_loss();
    let pit_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&models).map(|(&x, m)| m.pit(x)).collect())
        .collect();
    let fit = fit_rvine(&pit_rows, &default_vine_config())?;

    eprint!("{}", tree_listing(&names, &fit.model));
    let artifact = VineArtifact {
        names,
        log_likelihood: fit.log_likelihood,
        aic: fit.aic,
        bic: fit.bic,
        model: fit.model,
    };
    emit(&to_json_line(&artifact)?, out)
}

// ---------------------------------------------------------------------------
// dependence

#[derive(Serialize, Deserialize)]
struct DependenceRow {
    name: String,
    /// Kendall rank correlation with the loss.
    tau: f64,
    /// Normal test statistic for tau = 0.
    statistic: f64,
    /// Whether independence is rejected at the 5% level.
    reject: bool,
    /// Empirical upper tail dependence with the loss; the factor is negated
    /// first when the association is negative, so large losses pair with the
    /// factor's harmful direction.
    lambda: f64,
    negated: bool,
}

pub fn dependence(
    data: &DataArgs,
    tail_threshold: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let mut table = Vec::with_capacity(data.dimension());
    for (j, name) in data.names.iter().enumerate() {
        let x = data.column(j);
        let test = independence_test_tau(&x, &data.losses)?;
        let negated = test.tau < 0.0;
        let oriented: Vec<f64> = if negated { x.iter().map(|v| -v).collect() } else { x };
        let lambda = empirical_upper_tail_dep(&oriented, &data.losses, tail_threshold)?;
        table.push(DependenceRow {
            name: name.clone(),
            tau: test.tau,
            statistic: test.statistic,
            reject: test.reject,
            lambda,
            negated,
        });
    }

    let mut text = String::new();
    let width = table.iter().map(|r| r.name.len()).max().unwrap_or(6).max(6);
    let _ = writeln!(
        text,
        "{:width$}  {:>8}  {:>9}  {:>6}  {:>7}  negated",
        "factor", "tau", "statistic", "reject", "lambda"
    );
    for row in &table {
        let _ = writeln!(
            text,
            "{:width$}  {:>8.4}  {:>9.3}  {:>6}  {:>7.4}  {}",
            row.name,
            row.tau,
            row.statistic,
            if row.reject { "yes" } else { "no" },
            row.lambda,
            if row.negated { "yes" } else { "no" }
        );
    }
    print!("{text}");
    if out.is_some() {
        emit(&to_json_line(&table)?, out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster

pub fn cluster(
    data: &DataArgs,
    kernel: KernelArg,
    bandwidth: Option<f64>,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let kernel = match kernel {
        KernelArg::Linear => {
            if bandwidth.is_some() {
                return Err(CliError::User(
                    "--bandwidth applies only to the gaussian kernel".into(),
                ));
            }
            Kernel::Linear
        }
        KernelArg::Gaussian => Kernel::Gaussian { bandwidth },
    };
    let scores = kernel_pca_first_component(&data.factors, kernel)?;
    let u = rank_uniforms(&scores);
    let v = rank_uniforms(&data.losses);
    let pairs: Vec<(f64, f64)> = u.into_iter().zip(v).collect();
    let params = fit_tcop_mixture(&pairs, seed)?;
    let assignment = assign_clusters(&pairs, &params)?;

    eprint!("{}", to_json_line(&params)?);
    let mut csv = String::from("date,score,loss,posterior1,posterior2,label\n");
    for (t, date) in data.dates.iter().enumerate() {
        let (p1, p2) = assignment.posterior[t];
        let _ = writeln!(
            csv,
            "{date},{:.6},{:.6},{:.6},{:.6},{}",
            scores[t], data.losses[t], p1, p2, assignment.labels[t]
        );
    }
    emit(&csv, out)
}

// ---------------------------------------------------------------------------
// estimate

/// Scenario estimate with enough context to plot and compare it.
#[derive(Serialize, Deserialize)]
pub struct EstimateArtifact {
    pub names: Vec<String>,
    pub threshold: f64,
    pub estimate: ScenarioEstimate,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate(
    data: &DataArgs,
    method: MethodArg,
    threshold: &ThresholdArgs,
    kind: KindArg,
    screen: bool,
    seed: u64,
    search: &SearchArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let threshold = resolve_threshold(threshold, &data.losses)?;
    let estimate = match method {
        MethodArg::Gkk => estimate_gkk(&data.factors, &data.losses, threshold)?,
        _ => {
            let rows = data.rows_with_loss();
            let kinds = vec![kind.to_kind(); data.dimension() + 1];
            let problem =
                ScenarioProblem::from_data(&rows, &kinds, threshold, screen, &default_vine_config())?;
            let opt = search_config(search, seed);
            match method {
                MethodArg::Cm1 => estimate_cm1(&problem, &opt)?,
                MethodArg::Cm2 => estimate_cm2(&problem, &opt)?,
                MethodArg::Cm3 => estimate_cm3(&problem, &opt)?,
                MethodArg::Gkk => unreachable!("handled above"),
            }
        }
    };
    let artifact = EstimateArtifact { names: data.names, threshold, estimate };
    emit(&to_json_line(&artifact)?, out)
}

// ---------------------------------------------------------------------------
// bootstrap-ci

#[derive(Serialize, Deserialize)]
struct IntervalArtifact {
    names: Vec<String>,
    threshold: f64,
    report: CiReport,
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci(
    data: &DataArgs,
    method: MethodArg,
    threshold: &ThresholdArgs,
    kind: KindArg,
    screen: bool,
    replications: usize,
    mean_block: Option<f64>,
    interval_level: f64,
    freeze_structure: bool,
    seed: u64,
    search: &SearchArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let threshold = resolve_threshold(threshold, &data.losses)?;
    let rows = data.rows_with_loss();

    let mut plan = BootstrapPlan::new(rows.len(), seed);
    plan.replications = replications;
    plan.interval_level = interval_level;
    if let Some(block) = mean_block {
        plan.mean_block = block;
    }

    let cfg = ScenarioBootstrapConfig {
        method: method.to_method(),
        kinds: vec![kind.to_kind(); data.dimension() + 1],
        vine: default_vine_config(),
        optimizer: search_config(search, seed),
        threshold,
        screen_independent: screen,
        freeze_structure,
    };
    let report = bootstrap_scenario_ci(&rows, &cfg, &plan)?;
    let artifact = IntervalArtifact { names: data.names, threshold, report };
    emit(&to_json_line(&artifact)?, out)
}

// ---------------------------------------------------------------------------
// simulate-study

/// On-disk study description. Mirrors the library's study configuration,
/// except that a vine generator points at a model file instead of inlining
/// the model.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    generator: GeneratorFile,
    replications: usize,
    seed: u64,
    sample_size: Option<usize>,
    quantile_level: Option<f64>,
    estimators: Option<Vec<ScenarioMethod>>,
    marginal_kind: Option<MarginalKind>,
    screen_independent: Option<bool>,
    optimizer: Option<OptimizerConfig>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GeneratorFile {
    MultivariateT {
        nu: f64,
        sigma: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    MetaVine {
        /// Joint vine model JSON, relative to the config file.
        model_file: std::path::PathBuf,
        coefficients: Vec<f64>,
    },
}

impl GeneratorFile {
    fn into_generator(self, config_dir: &Path) -> Result<StudyGenerator, CliError> {
        Ok(match self {
            GeneratorFile::MultivariateT { nu, sigma, weights } => {
                StudyGenerator::MultivariateT { nu, sigma, weights }
            }
            GeneratorFile::MetaVine { model_file, coefficients } => {
                let path = config_dir.join(model_file);
                let model: JointVineModel = serde_json::from_str(&read_to_string(&path)?)
                    .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
                StudyGenerator::MetaVine { model, coefficients }
            }
        })
    }
}

pub fn simulate_study(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let file: StudyFile = toml::from_str(&read_to_string(config)?)
        .map_err(|e| CliError::User(format!("{}: {e}", config.display())))?;
    let config_dir = config.parent().unwrap_or_else(|| Path::new("."));
    let generator = file.generator.into_generator(config_dir)?;

    let mut study = StudyConfig::new(generator, file.replications, file.seed);
    if let Some(n) = file.sample_size {
        study.sample_size = n;
    }
    if let Some(q) = file.quantile_level {
        study.quantile_level = q;
    }
    if let Some(estimators) = file.estimators {
        study.estimators = estimators;
    }
    if let Some(kind) = file.marginal_kind {
        study.marginal_kind = kind;
    }
    if let Some(screen) = file.screen_independent {
        study.screen_independent = screen;
    }
    if let Some(optimizer) = file.optimizer {
        study.optimizer = optimizer;
    }
    study.vine = default_vine_config();

    let report = run_study(&study)?;
    print!("{}", report.table());
    if out.is_some() {
        emit(&to_json_line(&report)?, out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// plot

pub fn plot(data: &DataArgs, estimates: &[std::path::PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let data = ingest(&data.rates, &data.values)?;
    let mut artifacts = Vec::with_capacity(estimates.len());
    for path in estimates {
        let artifact: EstimateArtifact = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
        artifacts.push(artifact);
    }
    let svg = render_scatter(&data, &artifacts)?;
    emit(&svg, out)
}
