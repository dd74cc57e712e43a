//! Simulation laboratory: synthetic contaminated benchmarks and seeded
//! experiment runners.
//!
//! The data generating process has four classes over sixteen variables:
//! the first three carry the class structure, the next four are noisy
//! linear images of variables 1 and 3, and the last nine are independent
//! of everything. Contamination adds label noise (class-4 rows relabeled
//! as class 3) and uniform outliers constrained to lie far from every
//! class in all three variable blocks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chi2::chi_square_quantile;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mlsubset::{fit_ml_subset, MlSubsetConfig};
use crate::pattern::PatternedModel;
use crate::redda::{fit_redda, predict_map, ReddaConfig};
use crate::seed;
use crate::tbic::{greedy_select, TbicConfig};

/// Parameters of the synthetic data generating process.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DgpSpec {
    /// Class prior probabilities.
    pub tau: Vec<f64>,
    /// Class means on the three relevant variables.
    pub mu: Vec<Vec<f64>>,
    /// Per-class autocorrelation of the relevant block:
    /// `Sigma_g[i, j] = rho_g^|i - j|`.
    pub rho: Vec<f64>,
    /// 2 x 4 coefficient matrix linking variables 1 and 3 to the
    /// redundant block.
    pub b: Vec<Vec<f64>>,
    /// Means of the nine independent variables.
    pub eta: Vec<f64>,
    /// Variances of the nine independent variables.
    pub delta: Vec<f64>,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            tau: vec![0.15, 0.3, 0.2, 0.35],
            mu: vec![
                vec![1.5, -1.5, 1.5],
                vec![-1.5, 1.5, 1.5],
                vec![1.5, -1.5, -1.5],
                vec![-1.5, 1.5, -1.5],
            ],
            rho: vec![0.85, 0.1, 0.65, 0.5],
            b: vec![vec![1.0, 0.0, -1.0, 0.0], vec![0.0, -2.0, 2.0, 1.0]],
            eta: vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
            delta: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.25, 1.0, 0.75, 0.5],
        }
    }
}

/// Variables carrying the class structure (0-based columns).
pub const RELEVANT_VARIABLES: [usize; 3] = [0, 1, 2];

impl DgpSpec {
    pub fn n_classes(&self) -> usize {
        self.tau.len()
    }

    /// Total dimension: relevant + redundant + independent variables.
    pub fn dim(&self) -> usize {
        3 + self.b.first().map_or(0, Vec::len) + self.eta.len()
    }

    /// Covariance of the relevant block for class `g`.
    pub fn relevant_sigma(&self, g: usize) -> DMatrix<f64> {
        let rho = self.rho[g];
        DMatrix::from_fn(3, 3, |i, j| {
            libm::pow(rho, (i as i64 - j as i64).abs() as f64)
        })
    }

    /// Mean of the redundant block conditional on the relevant values
    /// `(x_1, x_3)`.
    fn redundant_mean(&self, x1: f64, x3: f64) -> Vec<f64> {
        (0..self.b[0].len())
            .map(|j| x1 * self.b[0][j] + x3 * self.b[1][j])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let g = self.tau.len();
        if g == 0 || self.mu.len() != g || self.rho.len() != g {
            return Err(Error::validation("class counts of tau, mu, rho differ"));
        }
        if (self.tau.iter().sum::<f64>() - 1.0).abs() > 1e-12 || self.tau.iter().any(|t| *t <= 0.0)
        {
            return Err(Error::validation(
                "class proportions must be positive and sum to one",
            ));
        }
        if self.mu.iter().any(|m| m.len() != 3) {
            return Err(Error::validation("class means must have length 3"));
        }
        if self.rho.iter().any(|r| r.abs() >= 1.0) {
            return Err(Error::validation("autocorrelations must lie in (-1, 1)"));
        }
        if self.b.len() != 2 {
            return Err(Error::validation("link matrix must have two rows"));
        }
        if self.b[0].len() != self.b[1].len() {
            return Err(Error::validation("link matrix rows must have equal length"));
        }
        if self.delta.len() != self.eta.len() || self.delta.iter().any(|d| *d <= 0.0) {
            return Err(Error::validation(
                "independent-block variances must be positive",
            ));
        }
        Ok(())
    }
}

/// Draws a labeled training or test set of `n` rows from the process.
/// Bit-identical for a fixed seed.
pub fn generate_clean(n: usize, spec: &DgpSpec, seed_value: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::validation("need at least one row"));
    }
    spec.validate()?;
    let g = spec.n_classes();
    let p = spec.dim();
    let n_red = spec.b[0].len();
    let n_ind = spec.eta.len();
    let chols: Vec<DMatrix<f64>> = (0..g)
        .map(|cls| {
            nalgebra::Cholesky::new(spec.relevant_sigma(cls))
                .map(|c| c.l())
                .ok_or_else(|| Error::validation("relevant covariance not positive definite"))
        })
        .collect::<Result<_>>()?;

    let mut rng = seed::rng(seed_value, &[0xd9f]);
    let mut x = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // label from the categorical prior
        let u: f64 = rng.random();
        let mut cls = g - 1;
        let mut acc = 0.0;
        for (k, &t) in spec.tau.iter().enumerate() {
            acc += t;
            if u < acc {
                cls = k;
                break;
            }
        }
        labels.push(cls);

        let z = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rel = DVector::from_column_slice(&spec.mu[cls]) + &chols[cls] * z;
        for j in 0..3 {
            x[(i, j)] = rel[j];
        }
        let red_mean = spec.redundant_mean(rel[0], rel[2]);
        for j in 0..n_red {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, 3 + j)] = red_mean[j] + z;
        }
        for j in 0..n_ind {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, 3 + n_red + j)] = spec.eta[j] + libm::sqrt(spec.delta[j]) * z;
        }
    }
    LabeledDataset::new(x, labels, g)
}

/// Contamination plan: label noise plus constrained uniform outliers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContaminationSpec {
    /// Class-4 rows relabeled as class 3.
    pub n_label_noise: usize,
    /// Uniform rows appended to the training set.
    pub n_outliers: usize,
    /// Probability level of the chi-square distance constraints.
    pub chi2_prob: f64,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn new(n_label_noise: usize, n_outliers: usize, seed: u64) -> Self {
        Self {
            n_label_noise,
            n_outliers,
            chi2_prob: 0.975,
            seed,
        }
    }
}

/// Ground-truth adulteration bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantedIndices {
    /// Rows whose label was flipped (original row indices).
    pub relabeled: Vec<usize>,
    /// Appended outlier rows.
    pub outliers: Vec<usize>,
}

impl PlantedIndices {
    pub fn all(&self) -> Vec<usize> {
        let mut v = self.relabeled.clone();
        v.extend_from_slice(&self.outliers);
        v
    }

    pub fn count(&self) -> usize {
        self.relabeled.len() + self.outliers.len()
    }
}

const MAX_REJECTION_DRAWS: usize = 1_000_000;

/// Applies label noise and appends constrained uniform outliers.
///
/// The last `n_label_noise` class-4 rows (in generation order) are
/// relabeled as class 3; feature values are never altered. Outliers are
/// drawn uniformly on the per-column data range widened by 20% and
/// accepted only when their squared Mahalanobis distances clear the
/// chi-square quantile in all three blocks against every class; their
/// labels are uniform over the classes.
pub fn contaminate(
    data: &LabeledDataset,
    spec: &ContaminationSpec,
    dgp: &DgpSpec,
) -> Result<(LabeledDataset, PlantedIndices)> {
    dgp.validate()?;
    let g = dgp.n_classes();
    if data.n_classes() != g || data.p() != dgp.dim() {
        return Err(Error::validation(
            "dataset does not match the generating process",
        ));
    }
    let n = data.n();
    let n_red = dgp.b[0].len();
    let n_ind = dgp.eta.len();

    // label noise: the last class-4 rows in generation order
    let class4 = data.class_rows(3);
    if class4.len() < spec.n_label_noise {
        return Err(Error::validation(format!(
            "class 4 has {} rows, cannot relabel {}",
            class4.len(),
            spec.n_label_noise
        )));
    }
    let relabeled: Vec<usize> = class4[class4.len() - spec.n_label_noise..].to_vec();
    let mut labels = data.labels().to_vec();
    for &i in &relabeled {
        labels[i] = 2;
    }

    // quantile thresholds for the three blocks
    let q_rel = chi_square_quantile(3, spec.chi2_prob)?;
    let q_red = chi_square_quantile(n_red, spec.chi2_prob)?;
    let q_ind = chi_square_quantile(n_ind, spec.chi2_prob)?;
    let rel_inv: Vec<DMatrix<f64>> = (0..g)
        .map(|cls| crate::linalg::spd_inverse(&dgp.relevant_sigma(cls), "relevant covariance"))
        .collect::<Result<_>>()?;
    let red_means: Vec<Vec<f64>> = (0..g)
        .map(|cls| dgp.redundant_mean(dgp.mu[cls][0], dgp.mu[cls][2]))
        .collect();

    // proposal box: per-column range widened by 20%
    let mut lo = vec![f64::INFINITY; data.p()];
    let mut hi = vec![f64::NEG_INFINITY; data.p()];
    for i in 0..n {
        for j in 0..data.p() {
            lo[j] = lo[j].min(data.x()[(i, j)]);
            hi[j] = hi[j].max(data.x()[(i, j)]);
        }
    }
    for j in 0..data.p() {
        let width = hi[j] - lo[j];
        lo[j] -= 0.1 * width;
        hi[j] += 0.1 * width;
    }

    let mut rng = seed::rng(spec.seed, &[0xc0a7]);
    let mut outlier_rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n_outliers);
    let mut outlier_labels: Vec<usize> = Vec::with_capacity(spec.n_outliers);
    for _ in 0..spec.n_outliers {
        let mut accepted = None;
        for _ in 0..MAX_REJECTION_DRAWS {
            let row: Vec<f64> = (0..data.p())
                .map(|j| lo[j] + (hi[j] - lo[j]) * rng.random::<f64>())
                .collect();
            if outlier_constraints_hold(&row, dgp, &rel_inv, &red_means, q_rel, q_red, q_ind) {
                accepted = Some(row);
                break;
            }
        }
        let row = accepted.ok_or_else(|| {
            Error::estimation(
                "rejection sampling exhausted; the proposal box is too tight for the \
                 distance constraints",
            )
        })?;
        outlier_rows.push(row);
        outlier_labels.push(rng.random_range(0..g));
    }

    let total = n + spec.n_outliers;
    let mut x = DMatrix::zeros(total, data.p());
    for i in 0..n {
        for j in 0..data.p() {
            x[(i, j)] = data.x()[(i, j)];
        }
    }
    for (k, row) in outlier_rows.iter().enumerate() {
        for j in 0..data.p() {
            x[(n + k, j)] = row[j];
        }
    }
    labels.extend_from_slice(&outlier_labels);
    let planted = PlantedIndices {
        relabeled,
        outliers: (n..total).collect(),
    };
    Ok((LabeledDataset::new(x, labels, g)?, planted))
}

/// Squared Mahalanobis distance checks of one candidate outlier row
/// against every class in all three blocks.
fn outlier_constraints_hold(
    row: &[f64],
    dgp: &DgpSpec,
    rel_inv: &[DMatrix<f64>],
    red_means: &[Vec<f64>],
    q_rel: f64,
    q_red: f64,
    q_ind: f64,
) -> bool {
    let g = dgp.n_classes();
    let n_red = dgp.b[0].len();
    for cls in 0..g {
        let d = DVector::from_fn(3, |k, _| row[k] - dgp.mu[cls][k]);
        let d2 = (&rel_inv[cls] * &d).dot(&d);
        if d2 <= q_rel {
            return false;
        }
    }
    for cls in 0..g {
        let mut d2 = 0.0;
        for j in 0..n_red {
            let r = row[3 + j] - red_means[cls][j];
            d2 += r * r;
        }
        if d2 <= q_red {
            return false;
        }
    }
    let mut d2 = 0.0;
    for j in 0..dgp.eta.len() {
        let r = row[3 + n_red + j] - dgp.eta[j];
        d2 += r * r / dgp.delta[j];
    }
    d2 > q_ind
}

/// Fraction of the selected variables that are truly relevant; zero for
/// an empty selection.
pub fn selection_precision(selected: &[usize], relevant: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let hits = selected.iter().filter(|v| relevant.contains(v)).count();
    hits as f64 / selected.len() as f64
}

/// Fraction of mismatched labels.
pub fn misclassification_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::validation(format!(
            "{} predictions against {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::validation("cannot score an empty prediction"));
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / predicted.len() as f64)
}

/// Variable-selection procedure run inside an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SelectorKind {
    /// Greedy stepwise search scored by trimmed BIC.
    Tbic,
    /// Maximum-likelihood subset selector with fixed subset size.
    MlSubset { p: usize },
    /// Keep every variable (classifier baseline).
    NoSelection,
}

/// One method column of an experiment: a selector plus its trimming level
/// and restart budgets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodSpec {
    pub label: String,
    pub selector: SelectorKind,
    pub gamma: f64,
    /// Concentration restarts (classifier and stepwise fits).
    pub n_start: usize,
    /// Restarts of the subset-selector cycle.
    pub n_init: usize,
}

impl MethodSpec {
    pub fn tbic(label: &str, gamma: f64) -> Self {
        Self {
            label: String::from(label),
            selector: SelectorKind::Tbic,
            gamma,
            n_start: 8,
            n_init: 10,
        }
    }

    pub fn ml_subset(label: &str, p: usize, gamma: f64) -> Self {
        Self {
            label: String::from(label),
            selector: SelectorKind::MlSubset { p },
            gamma,
            n_start: 8,
            n_init: 10,
        }
    }

    pub fn no_selection(label: &str, gamma: f64) -> Self {
        Self {
            label: String::from(label),
            selector: SelectorKind::NoSelection,
            gamma,
            n_start: 8,
            n_init: 10,
        }
    }
}

/// Contamination scenario of an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioSpec {
    pub n_label_noise: usize,
    pub n_outliers: usize,
}

impl ScenarioSpec {
    pub fn new(n_label_noise: usize, n_outliers: usize) -> Self {
        Self {
            n_label_noise,
            n_outliers,
        }
    }

    /// True contamination rate once outliers are appended to `n` rows.
    pub fn contamination_rate(&self, n: usize) -> f64 {
        (self.n_label_noise + self.n_outliers) as f64 / (n + self.n_outliers) as f64
    }
}

/// Full experiment grid: scenarios x methods x replications.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExperimentConfig {
    pub replications: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub scenarios: Vec<ScenarioSpec>,
    pub methods: Vec<MethodSpec>,
    pub seed: u64,
    pub dgp: DgpSpec,
    /// Ground-truth relevant variables for the precision metric.
    pub relevant: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            replications: 20,
            n_train: 500,
            n_test: 2000,
            scenarios: vec![ScenarioSpec::new(20, 5)],
            methods: vec![
                MethodSpec::tbic("tbic", 0.05),
                MethodSpec::ml_subset("ml-subset-p3", 3, 0.05),
            ],
            seed: 17,
            dgp: DgpSpec::default(),
            relevant: RELEVANT_VARIABLES.to_vec(),
        }
    }
}

/// Outcome of one (scenario, method, replication) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationRecord {
    pub scenario: usize,
    pub method: usize,
    pub replication: usize,
    /// Selected variables, sorted ascending (all variables for the
    /// no-selection baseline).
    pub selected: Vec<usize>,
    pub precision: Option<f64>,
    pub test_error: Option<f64>,
    /// Planted adulterated rows among the classifier's trimmed rows.
    pub planted_trimmed: Option<usize>,
    pub planted_total: usize,
    pub failure: Option<String>,
}

/// Mean/standard-deviation summary of one (scenario, method) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateRow {
    pub scenario: usize,
    pub method: usize,
    pub n_completed: usize,
    pub n_failed: usize,
    pub mean_test_error: Option<f64>,
    pub sd_test_error: Option<f64>,
    pub mean_precision: Option<f64>,
    pub sd_precision: Option<f64>,
}

/// Experiment output: the configuration echo, every per-replication
/// record, and the aggregate table recomputable from the records.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn run_replication_inner(
    config: &ExperimentConfig,
    scenario_idx: usize,
    method_idx: usize,
    rep: usize,
) -> Result<(Vec<usize>, f64, f64, usize, usize)> {
    let scenario = &config.scenarios[scenario_idx];
    let method = &config.methods[method_idx];
    let s = scenario_idx as u64;
    let r = rep as u64;
    let m = method_idx as u64;

    // data seeds do not involve the method index: every method sees the
    // same replication data
    let train = generate_clean(
        config.n_train,
        &config.dgp,
        seed::derive(config.seed, &[1, s, r]),
    )?;
    let test = generate_clean(
        config.n_test,
        &config.dgp,
        seed::derive(config.seed, &[2, s, r]),
    )?;
    let cspec = ContaminationSpec::new(
        scenario.n_label_noise,
        scenario.n_outliers,
        seed::derive(config.seed, &[3, s, r]),
    );
    let (ctrain, planted) = contaminate(&train, &cspec, &config.dgp)?;

    let select_seed = seed::derive(config.seed, &[4, s, r, m]);
    let mut selected: Vec<usize> = match &method.selector {
        SelectorKind::Tbic => {
            let cfg = TbicConfig::new(method.gamma)
                .with_seed(select_seed)
                .with_starts(method.n_start);
            greedy_select(&ctrain, &cfg)?.selected
        }
        SelectorKind::MlSubset { p } => {
            let cfg = MlSubsetConfig::new(*p, method.gamma)
                .with_seed(select_seed)
                .with_inits(method.n_init);
            fit_ml_subset(&ctrain, &cfg)?.partition.relevant().to_vec()
        }
        SelectorKind::NoSelection => (0..ctrain.p()).collect(),
    };
    selected.sort_unstable();
    if selected.is_empty() {
        return Err(Error::estimation("selector returned an empty subset"));
    }

    let fit = fit_redda(
        &ctrain.select_columns(&selected)?,
        &ReddaConfig {
            model: PatternedModel::Vvv,
            gamma: method.gamma,
            n_start: method.n_start,
            max_iter: 200,
            seed: seed::derive(config.seed, &[5, s, r, m]),
        },
    )?;
    let (_, pred) = predict_map(&fit, test.select_columns(&selected)?.x())?;
    let error = misclassification_error(&pred, test.labels())?;
    let precision = selection_precision(&selected, &config.relevant);
    let planted_all = planted.all();
    let planted_trimmed = fit
        .trimming
        .trimmed_indices()
        .iter()
        .filter(|i| planted_all.contains(i))
        .count();
    Ok((selected, precision, error, planted_trimmed, planted.count()))
}

/// Runs one cell of the experiment grid. Failures are reported in the
/// record, never panicked.
pub fn run_replication(
    config: &ExperimentConfig,
    scenario_idx: usize,
    method_idx: usize,
    rep: usize,
) -> ReplicationRecord {
    match run_replication_inner(config, scenario_idx, method_idx, rep) {
        Ok((selected, precision, error, planted_trimmed, planted_total)) => ReplicationRecord {
            scenario: scenario_idx,
            method: method_idx,
            replication: rep,
            selected,
            precision: Some(precision),
            test_error: Some(error),
            planted_trimmed: Some(planted_trimmed),
            planted_total,
            failure: None,
        },
        Err(e) => ReplicationRecord {
            scenario: scenario_idx,
            method: method_idx,
            replication: rep,
            selected: Vec::new(),
            precision: None,
            test_error: None,
            planted_trimmed: None,
            planted_total: 0,
            failure: Some(format!("{e}")),
        },
    }
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(libm::sqrt(var)))
}

/// Aggregates per-replication records into the (scenario, method) table.
pub fn aggregate(config: &ExperimentConfig, records: &[ReplicationRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for s in 0..config.scenarios.len() {
        for m in 0..config.methods.len() {
            let cell: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.scenario == s && r.method == m)
                .collect();
            let errors: Vec<f64> = cell.iter().filter_map(|r| r.test_error).collect();
            let precisions: Vec<f64> = cell.iter().filter_map(|r| r.precision).collect();
            let (mean_test_error, sd_test_error) = mean_sd(&errors);
            let (mean_precision, sd_precision) = mean_sd(&precisions);
            rows.push(AggregateRow {
                scenario: s,
                method: m,
                n_completed: errors.len(),
                n_failed: cell.len() - errors.len(),
                mean_test_error,
                sd_test_error,
                mean_precision,
                sd_precision,
            });
        }
    }
    rows
}

/// Runs the full grid sequentially in replication-major order. The
/// per-cell seeds are derived from the master seed, so any other
/// execution order (including a parallel one) produces the identical
/// report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.replications == 0 || config.scenarios.is_empty() || config.methods.is_empty() {
        return Err(Error::validation(
            "experiment needs at least one replication, scenario and method",
        ));
    }
    let mut records = Vec::new();
    for s in 0..config.scenarios.len() {
        for m in 0..config.methods.len() {
            for rep in 0..config.replications {
                records.push(run_replication(config, s, m, rep));
            }
        }
    }
    let aggregates = aggregate(config, &records);
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        aggregates,
    })
}

/// Levenshtein distance between two index sequences.
fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Stability report of a selector over a descending trimming grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaMonitorReport {
    pub gammas: Vec<f64>,
    /// Subset retained at each grid point (inclusion order for the
    /// stepwise selector, ascending for the subset selector).
    pub subsets: Vec<Vec<usize>>,
    /// Distance between consecutive subsets: symmetric-difference size
    /// for the fixed-size selector, length-normalized edit distance for
    /// the stepwise one.
    pub distances: Vec<f64>,
    /// First grid point (the lower trimming level of the first changing
    /// pair) where the retained subset moves.
    pub first_unstable_gamma: Option<f64>,
}

/// Monitors the retained subset while the trimming level decreases from
/// `gamma_max`: a change between consecutive grid points signals that
/// contamination may have entered the fit.
pub fn gamma_monitor(
    data: &LabeledDataset,
    grid: &[f64],
    selector: &SelectorKind,
    n_start: usize,
    n_init: usize,
    seed_value: u64,
) -> Result<GammaMonitorReport> {
    if grid.is_empty() {
        return Err(Error::validation("trimming grid must not be empty"));
    }
    for pair in grid.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::validation(
                "trimming grid must be strictly descending",
            ));
        }
    }
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(grid.len());
    for (k, &gamma) in grid.iter().enumerate() {
        let run_seed = seed::derive(seed_value, &[6, k as u64]);
        let subset = match selector {
            SelectorKind::Tbic => {
                let cfg = TbicConfig::new(gamma)
                    .with_seed(run_seed)
                    .with_starts(n_start);
                greedy_select(data, &cfg)?.selected
            }
            SelectorKind::MlSubset { p } => {
                let cfg = MlSubsetConfig::new(*p, gamma)
                    .with_seed(run_seed)
                    .with_inits(n_init);
                fit_ml_subset(data, &cfg)?.partition.relevant().to_vec()
            }
            SelectorKind::NoSelection => {
                return Err(Error::validation("nothing to monitor without a selector"))
            }
        };
        subsets.push(subset);
    }
    let mut distances = Vec::with_capacity(grid.len().saturating_sub(1));
    let mut first_unstable_gamma = None;
    for k in 1..subsets.len() {
        let d = match selector {
            SelectorKind::MlSubset { .. } => {
                let a = &subsets[k - 1];
                let b = &subsets[k];
                let shared = a.iter().filter(|v| b.contains(v)).count();
                (a.len() + b.len() - 2 * shared) as f64
            }
            _ => {
                let len = subsets[k - 1].len().max(subsets[k].len());
                if len == 0 {
                    0.0
                } else {
                    levenshtein(&subsets[k - 1], &subsets[k]) as f64 / len as f64
                }
            }
        };
        if d > 0.0 && first_unstable_gamma.is_none() {
            first_unstable_gamma = Some(grid[k]);
        }
        distances.push(d);
    }
    Ok(GammaMonitorReport {
        gammas: grid.to_vec(),
        subsets,
        distances,
        first_unstable_gamma,
    })
}
