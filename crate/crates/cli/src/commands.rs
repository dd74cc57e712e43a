//! Subcommand implementations.

use serde::Serialize;

use redda_core::mlsubset::{fit_ml_subset, MlSubsetConfig, SStepStrategy};
use redda_core::nalgebra::DMatrix;
use redda_core::pattern::PatternedModel;
use redda_core::redda::{
    fit_redda, outlier_score, predict_map, reassign_trimmed, ReddaConfig, ReddaFit,
};
use redda_core::simlab::{
    aggregate, gamma_monitor, run_replication, ExperimentConfig, ExperimentReport,
    GammaMonitorReport, SelectorKind,
};
use redda_core::tbic::{greedy_select, SelectionResult, StepKind, TbicConfig};
use redda_core::LabeledDataset;

use crate::dataio::{load_dataset, LoadedData};
use crate::error::{CliError, Result};
use crate::report::{dataset_summary, variable_refs, RunReport, VariableRef};
use crate::{
    DetectOutliersArgs, FitArgs, MonitorGammaArgs, PredictArgs, SelectMlsubsetArgs, SelectTbicArgs,
    SimulateArgs,
};

fn parse_model(code: &str) -> Result<PatternedModel> {
    PatternedModel::parse(code).map_err(Into::into)
}

fn parse_gamma(gamma: f64) -> Result<f64> {
    if (0.0..0.5).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(CliError::validation(format!(
            "trimming level must lie in [0, 0.5), got {gamma}"
        )))
    }
}

/// Restricts a loaded dataset to the requested variables, returning the
/// kept column indices (all columns when `vars` is absent).
fn restricted_columns(data: &LoadedData, vars: Option<&str>) -> Result<Vec<usize>> {
    match vars {
        Some(spec) => data.resolve_variables(spec),
        None => Ok((0..data.feature_names.len()).collect()),
    }
}

// ---------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ClassSummary {
    class: String,
    proportion: f64,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ReassignedRow {
    row: String,
    class: String,
}

#[derive(Serialize)]
struct FitPayload {
    variables: Vec<VariableRef>,
    model: String,
    gamma: f64,
    trimmed_loglik: f64,
    n_iterations: usize,
    converged: bool,
    classes: Vec<ClassSummary>,
    trimmed_rows: Vec<String>,
    reassigned: Vec<ReassignedRow>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn fit_payload(
    fit: &ReddaFit,
    sub: &LabeledDataset,
    data: &LoadedData,
    cols: &[usize],
) -> Result<FitPayload> {
    let classes = (0..fit.params.n_classes())
        .map(|g| ClassSummary {
            class: data.class_names[g].clone(),
            proportion: fit.params.tau[g],
            mean: fit.params.mu[g].iter().copied().collect(),
            covariance: matrix_rows(&fit.params.sigma[g]),
        })
        .collect();
    let trimmed_rows = fit
        .trimming
        .trimmed_indices()
        .iter()
        .map(|&i| data.row_ids[i].clone())
        .collect();
    let reassigned = reassign_trimmed(fit, sub)?
        .into_iter()
        .map(|(row, class)| ReassignedRow {
            row: data.row_ids[row].clone(),
            class: data.class_names[class].clone(),
        })
        .collect();
    Ok(FitPayload {
        variables: variable_refs(cols, &data.feature_names),
        model: fit.model.code().to_owned(),
        gamma: fit.trimming.gamma(),
        trimmed_loglik: fit.trimmed_loglik,
        n_iterations: fit.n_iterations,
        converged: fit.converged,
        classes,
        trimmed_rows,
        reassigned,
    })
}

pub fn fit(args: FitArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let gamma = parse_gamma(args.gamma)?;
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let cols = restricted_columns(&data, args.vars.as_deref())?;
    let sub = data.dataset()?.select_columns(&cols)?;
    let config = ReddaConfig {
        model,
        gamma,
        n_start: args.n_start,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let fit = fit_redda(&sub, &config)?;
    let payload = fit_payload(&fit, &sub, &data, &cols)?;
    RunReport::new("fit", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .write(args.out.as_deref())
}

// ---------------------------------------------------------------------
// select-tbic
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct StepReport {
    stage: usize,
    kind: &'static str,
    proposal: VariableRef,
    context: Vec<VariableRef>,
    tbic_grouping: f64,
    tbic_nogrouping: f64,
    evidence: f64,
    accepted: bool,
    regressors: Vec<VariableRef>,
    grouping_trimmed_rows: Vec<String>,
    nogrouping_trimmed_rows: Vec<String>,
    evaluations: Vec<EvaluationReport>,
}

#[derive(Serialize)]
struct EvaluationReport {
    variable: VariableRef,
    tbic_grouping: f64,
    tbic_nogrouping: f64,
}

#[derive(Serialize)]
struct TbicPayload {
    selected: Vec<VariableRef>,
    steps: Vec<StepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn tbic_payload(result: &SelectionResult, data: &LoadedData) -> TbicPayload {
    let names = &data.feature_names;
    let steps = result
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepReport {
            stage: i + 1,
            kind: match s.kind {
                StepKind::Addition => "addition",
                StepKind::Removal => "removal",
            },
            proposal: variable_refs(&[s.proposal], names).remove(0),
            context: variable_refs(&s.context, names),
            tbic_grouping: s.tbic_grouping,
            tbic_nogrouping: s.tbic_nogrouping,
            evidence: s.tbic_grouping - s.tbic_nogrouping,
            accepted: s.accepted,
            regressors: variable_refs(&s.regressors, names),
            grouping_trimmed_rows: s
                .grouping_trimmed
                .iter()
                .map(|&i| data.row_ids[i].clone())
                .collect(),
            nogrouping_trimmed_rows: s
                .nogrouping_trimmed
                .iter()
                .map(|&i| data.row_ids[i].clone())
                .collect(),
            evaluations: s
                .evaluations
                .iter()
                .map(|e| EvaluationReport {
                    variable: variable_refs(&[e.variable], names).remove(0),
                    tbic_grouping: e.tbic_grouping,
                    tbic_nogrouping: e.tbic_nogrouping,
                })
                .collect(),
        })
        .collect();
    TbicPayload {
        selected: variable_refs(&result.selected, names),
        steps,
        note: result.note.clone(),
    }
}

pub fn select_tbic(args: SelectTbicArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let gamma = parse_gamma(args.gamma)?;
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let dataset = data.dataset()?;
    let config = TbicConfig {
        model,
        gamma,
        n_start: args.n_start,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let result = greedy_select(&dataset, &config)?;
    let payload = tbic_payload(&result, &data);
    RunReport::new("select-tbic", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .write(args.out.as_deref())
}

// ---------------------------------------------------------------------
// select-mlsubset
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct MlSubsetPayload {
    selected: Vec<VariableRef>,
    objective: f64,
    n_iterations: usize,
    n_init_used: usize,
    converged: bool,
    trimmed_rows: Vec<String>,
}

pub fn select_mlsubset(args: SelectMlsubsetArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let gamma = parse_gamma(args.gamma)?;
    let strategy = match args.strategy.to_ascii_lowercase().as_str() {
        "auto" => SStepStrategy::Auto,
        "exhaustive" => SStepStrategy::Exhaustive,
        "genetic" => SStepStrategy::Genetic,
        other => {
            return Err(CliError::validation(format!(
                "unknown strategy {other:?}; use auto, exhaustive or genetic"
            )))
        }
    };
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let dataset = data.dataset()?;
    let config = MlSubsetConfig {
        p: args.p,
        gamma,
        model,
        n_init: args.n_init,
        max_iter: args.max_iter,
        seed: args.seed,
        strategy,
        ..MlSubsetConfig::new(args.p, gamma)
    };
    let fit = fit_ml_subset(&dataset, &config)?;
    let payload = MlSubsetPayload {
        selected: variable_refs(fit.partition.relevant(), &data.feature_names),
        objective: fit.objective,
        n_iterations: fit.n_iterations,
        n_init_used: fit.n_init_used,
        converged: fit.converged,
        trimmed_rows: fit
            .trimming
            .trimmed_indices()
            .iter()
            .map(|&i| data.row_ids[i].clone())
            .collect(),
    };
    RunReport::new("select-mlsubset", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .write(args.out.as_deref())
}

// ---------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct PredictionRow {
    row: String,
    label: String,
    posterior: Vec<f64>,
}

#[derive(Serialize)]
struct PredictPayload {
    variables: Vec<VariableRef>,
    classes: Vec<String>,
    predictions: Vec<PredictionRow>,
    trimmed_rows: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reassigned: Option<Vec<ReassignedRow>>,
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let gamma = parse_gamma(args.gamma)?;
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let test = load_dataset(&args.test, None, args.train.id_col.as_deref())?;
    let cols = restricted_columns(&data, args.vars.as_deref())?;
    let sub = data.dataset()?.select_columns(&cols)?;

    // the test file must cover the training columns by name
    let test_cols: Vec<usize> = cols
        .iter()
        .map(|&c| {
            let name = &data.feature_names[c];
            test.feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CliError::validation(format!("test file lacks column {name:?}")))
        })
        .collect::<Result<_>>()?;

    let config = ReddaConfig {
        model,
        gamma,
        n_start: args.n_start,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let fit = fit_redda(&sub, &config)?;
    let test_matrix = DMatrix::from_fn(test.matrix.nrows(), test_cols.len(), |i, j| {
        test.matrix[(i, test_cols[j])]
    });
    let (posterior, labels) = predict_map(&fit, &test_matrix)?;

    let predictions = (0..test_matrix.nrows())
        .map(|i| PredictionRow {
            row: test.row_ids[i].clone(),
            label: data.class_names[labels[i]].clone(),
            posterior: (0..posterior.ncols()).map(|g| posterior[(i, g)]).collect(),
        })
        .collect();
    let reassigned = if args.reassign {
        Some(
            reassign_trimmed(&fit, &sub)?
                .into_iter()
                .map(|(row, class)| ReassignedRow {
                    row: data.row_ids[row].clone(),
                    class: data.class_names[class].clone(),
                })
                .collect(),
        )
    } else {
        None
    };
    let payload = PredictPayload {
        variables: variable_refs(&cols, &data.feature_names),
        classes: data.class_names.clone(),
        predictions,
        trimmed_rows: fit
            .trimming
            .trimmed_indices()
            .iter()
            .map(|&i| data.row_ids[i].clone())
            .collect(),
        reassigned,
    };
    RunReport::new("predict", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .with_test_dataset(dataset_summary(&args.test, &test))
        .write(args.out.as_deref())
}

// ---------------------------------------------------------------------
// detect-outliers
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct ScoreRow {
    row: String,
    score: f64,
    /// 1 = most suspicious (lowest marginal density).
    rank: usize,
    flagged: bool,
}

#[derive(Serialize)]
struct DetectPayload {
    variables: Vec<VariableRef>,
    scores: Vec<ScoreRow>,
    /// Row identifiers in ascending density order.
    ranking: Vec<String>,
}

pub fn detect_outliers(args: DetectOutliersArgs) -> Result<()> {
    let model = parse_model(&args.model)?;
    let gamma = parse_gamma(args.gamma)?;
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let test = load_dataset(&args.test, None, args.train.id_col.as_deref())?;
    let dataset = data.dataset()?;

    let cols: Vec<usize> = match args.select.to_ascii_lowercase().as_str() {
        "none" => (0..data.feature_names.len()).collect(),
        "tbic" => {
            let config = TbicConfig {
                model,
                gamma,
                n_start: args.n_start,
                max_iter: 100,
                seed: args.seed,
            };
            let mut selected = greedy_select(&dataset, &config)?.selected;
            selected.sort_unstable();
            if selected.is_empty() {
                return Err(CliError::Estimation(
                    "selection kept no variables; nothing to score".to_string(),
                ));
            }
            selected
        }
        "mlsubset" => {
            let p = args
                .p
                .ok_or_else(|| CliError::validation("--p is required with --select mlsubset"))?;
            let config = MlSubsetConfig {
                model,
                n_init: args.n_init,
                seed: args.seed,
                ..MlSubsetConfig::new(p, gamma)
            };
            fit_ml_subset(&dataset, &config)?
                .partition
                .relevant()
                .to_vec()
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown selector {other:?}; use none, tbic or mlsubset"
            )))
        }
    };

    let test_cols: Vec<usize> = cols
        .iter()
        .map(|&c| {
            let name = &data.feature_names[c];
            test.feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CliError::validation(format!("test file lacks column {name:?}")))
        })
        .collect::<Result<_>>()?;

    let fit = fit_redda(
        &dataset.select_columns(&cols)?,
        &ReddaConfig {
            model,
            gamma,
            n_start: args.n_start.max(20),
            max_iter: 200,
            seed: args.seed,
        },
    )?;
    let test_matrix = DMatrix::from_fn(test.matrix.nrows(), test_cols.len(), |i, j| {
        test.matrix[(i, test_cols[j])]
    });
    let (scores, ranking) = outlier_score(&fit.params, &test_matrix)?;

    let k = args.top_k.unwrap_or(0);
    let mut rank_of = vec![0usize; scores.len()];
    for (rank, &row) in ranking.iter().enumerate() {
        rank_of[row] = rank + 1;
    }
    let payload = DetectPayload {
        variables: variable_refs(&cols, &data.feature_names),
        scores: (0..scores.len())
            .map(|i| ScoreRow {
                row: test.row_ids[i].clone(),
                score: scores[i],
                rank: rank_of[i],
                flagged: rank_of[i] <= k,
            })
            .collect(),
        ranking: ranking.iter().map(|&i| test.row_ids[i].clone()).collect(),
    };
    RunReport::new("detect-outliers", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .with_test_dataset(dataset_summary(&args.test, &test))
        .write(args.out.as_deref())
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read {path}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("bad experiment config: {e}")))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(b) = args.b {
        config.replications = b;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if config.replications == 0 || config.scenarios.is_empty() || config.methods.is_empty() {
        return Err(CliError::validation(
            "experiment needs at least one replication, scenario and method",
        ));
    }

    let report = run_grid(&config, args.threads.max(1))?;
    RunReport::new("simulate", &args, report).write(args.out.as_deref())
}

/// Runs the experiment grid on up to `threads` workers. Every cell's seed
/// is derived from the master seed, so the report is identical to the
/// sequential run regardless of the worker count.
fn run_grid(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let jobs: Vec<(usize, usize, usize)> = (0..config.scenarios.len())
        .flat_map(|s| {
            (0..config.methods.len())
                .flat_map(move |m| (0..config.replications).map(move |r| (s, m, r)))
        })
        .collect();

    let records = if threads <= 1 || jobs.len() <= 1 {
        jobs.iter()
            .map(|&(s, m, r)| run_replication(config, s, m, r))
            .collect()
    } else {
        let workers = threads.min(jobs.len());
        let mut slots: Vec<Option<redda_core::simlab::ReplicationRecord>> =
            (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let jobs = &jobs;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    for (idx, &(s, m, r)) in jobs.iter().enumerate() {
                        if idx % workers == w {
                            out.push((idx, run_replication(config, s, m, r)));
                        }
                    }
                    out
                }));
            }
            for h in handles {
                for (idx, record) in h.join().expect("worker panicked") {
                    slots[idx] = Some(record);
                }
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("all jobs completed"))
            .collect::<Vec<_>>()
    };

    let aggregates = aggregate(config, &records);
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        aggregates,
    })
}

// ---------------------------------------------------------------------
// monitor-gamma
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct MonitorPayload {
    gammas: Vec<f64>,
    subsets: Vec<Vec<VariableRef>>,
    distances: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_unstable_gamma: Option<f64>,
}

fn monitor_payload(report: &GammaMonitorReport, data: &LoadedData) -> MonitorPayload {
    MonitorPayload {
        gammas: report.gammas.clone(),
        subsets: report
            .subsets
            .iter()
            .map(|s| variable_refs(s, &data.feature_names))
            .collect(),
        distances: report.distances.clone(),
        first_unstable_gamma: report.first_unstable_gamma,
    }
}

pub fn monitor_gamma(args: MonitorGammaArgs) -> Result<()> {
    let data = load_dataset(
        &args.train.train,
        Some(&args.train.label_col),
        args.train.id_col.as_deref(),
    )?;
    let dataset = data.dataset()?;
    let grid: Vec<f64> = args
        .gamma_grid
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::validation(format!("bad grid entry {t:?}")))
        })
        .collect::<Result<_>>()?;
    let selector = match args.method.to_ascii_lowercase().as_str() {
        "tbic" => SelectorKind::Tbic,
        "mlsubset" => {
            let p = args
                .p
                .ok_or_else(|| CliError::validation("--p is required with --method mlsubset"))?;
            SelectorKind::MlSubset { p }
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown method {other:?}; use tbic or mlsubset"
            )))
        }
    };
    let report = gamma_monitor(
        &dataset,
        &grid,
        &selector,
        args.n_start,
        args.n_init,
        args.seed,
    )?;
    let payload = monitor_payload(&report, &data);
    RunReport::new("monitor-gamma", &args, payload)
        .with_dataset(dataset_summary(&args.train.train, &data))
        .write(args.out.as_deref())
}
