//! Stepwise variable selection scored by trimmed BIC.
//!
//! Each candidate variable is judged by comparing two factorizations of
//! the joint density. Under the *grouping* model the candidate carries
//! class information together with the already-included variables; under
//! the *no-grouping* model it is a linear regression on a subset of the
//! included ones and carries no extra class information. Both maximized
//! likelihoods are trimmed, with each model running its own concentration
//! steps, so outliers and mislabeled rows do not drive the comparison.
//! At `gamma = 0` both scores reduce to the classical BIC factorizations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::gaussian::GaussianDensity;
use crate::pattern::{estimate_class_params, ClassParams, PatternedModel};
use crate::redda;
use crate::regression::{self, RegressionParams, SIGMA2_FLOOR};
use crate::seed;
use crate::trimming::TrimmingState;

/// Configuration of the stepwise search and of the fits inside it.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TbicConfig {
    /// Covariance constraint for the classification factors.
    pub model: PatternedModel,
    /// Trimming level shared by both competing models.
    pub gamma: f64,
    /// Random restarts per fitted model inside the search.
    pub n_start: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl TbicConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            model: PatternedModel::Vvv,
            gamma,
            n_start: 10,
            max_iter: 100,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_starts(mut self, n_start: usize) -> Self {
        self.n_start = n_start;
        self
    }

    pub fn with_model(mut self, model: PatternedModel) -> Self {
        self.model = model;
        self
    }
}

/// One scored model fit inside the stepwise search.
#[derive(Debug, Clone)]
pub struct TbicOutcome {
    /// Penalized score: `2 * trimmed log-likelihood - v * ln(N*)`.
    pub score: f64,
    pub trimmed_loglik: f64,
    /// Parameter count `v` entering the penalty.
    pub penalty_params: usize,
    /// Kept-row count `N*`.
    pub n_star: usize,
    pub trimming: TrimmingState,
    /// Regression fit of the proposal (no-grouping model only).
    pub regression: Option<RegressionParams>,
}

/// Trimmed BIC of the grouping model: a robust classifier fitted on the
/// included variables plus the proposal, concentration driven by the
/// own-class density of that joint vector.
pub fn tbic_grouping(
    data: &LabeledDataset,
    included: &[usize],
    p_var: usize,
    config: &TbicConfig,
) -> Result<TbicOutcome> {
    let mut cols: Vec<usize> = included.to_vec();
    cols.push(p_var);
    let sub = data.select_columns(&cols)?;
    let fit = redda::fit_redda(
        &sub,
        &redda::ReddaConfig {
            model: config.model,
            gamma: config.gamma,
            n_start: config.n_start,
            max_iter: config.max_iter,
            seed: config.seed,
        },
    )?;
    let n_star = fit.trimming.kept_count();
    let v = config.model.param_count(cols.len(), data.n_classes());
    Ok(TbicOutcome {
        score: 2.0 * fit.trimmed_loglik - v as f64 * libm::log(n_star as f64),
        trimmed_loglik: fit.trimmed_loglik,
        penalty_params: v,
        n_star,
        trimming: fit.trimming,
        regression: None,
    })
}

struct NoGroupingState {
    regression: RegressionParams,
    trimming: TrimmingState,
    loglik: f64,
}

/// Own-class log-density of every row on the included columns.
fn class_log_densities(sub: &LabeledDataset, params: &ClassParams) -> Result<Vec<f64>> {
    let dens: Vec<DVector<f64>> = params
        .mu
        .iter()
        .zip(&params.sigma)
        .map(|(mu, sigma)| GaussianDensity::new(mu.clone(), sigma)?.log_densities(sub.x()))
        .collect::<Result<_>>()?;
    Ok((0..sub.n()).map(|i| dens[sub.labels()[i]][i]).collect())
}

/// Regression of the proposal on the chosen regressors over the kept
/// rows, with the maximum-likelihood variance on those rows.
fn regression_on_kept(
    data: &LabeledDataset,
    y: &DVector<f64>,
    regressors: &[usize],
    keep: &TrimmingState,
) -> Result<RegressionParams> {
    let rows = keep.kept_indices();
    let design = DMatrix::from_fn(data.n(), regressors.len(), |i, j| {
        data.x()[(i, regressors[j])]
    });
    let (intercept, coefficients) = regression::ols_kept(y, &design, &rows)?;
    let mut rss = 0.0;
    for &i in &rows {
        let mut m = intercept;
        for (c, coef) in coefficients.iter().enumerate() {
            m += coef * design[(i, c)];
        }
        let r = y[i] - m;
        rss += r * r;
    }
    let sigma2 = (rss / rows.len() as f64).max(SIGMA2_FLOOR);
    Ok(RegressionParams {
        intercept,
        coefficients,
        sigma2,
        regressors: regressors.to_vec(),
    })
}

fn nogrouping_loglik(
    sub: &LabeledDataset,
    data: &LabeledDataset,
    y: &DVector<f64>,
    params: &ClassParams,
    reg: &RegressionParams,
    keep: &TrimmingState,
) -> Result<f64> {
    let class_part = redda::trimmed_loglik(params, sub, keep)?;
    let mut reg_part = 0.0;
    for i in 0..sub.n() {
        if keep.is_kept(i) {
            let row: Vec<f64> = reg.regressors.iter().map(|&c| data.x()[(i, c)]).collect();
            reg_part += reg.log_density(y[i], &row);
        }
    }
    Ok(class_part + reg_part)
}

fn nogrouping_start(
    data: &LabeledDataset,
    sub: &LabeledDataset,
    y: &DVector<f64>,
    included: &[usize],
    p_var: usize,
    config: &TbicConfig,
    start: usize,
) -> Result<NoGroupingState> {
    let mut rng = seed::rng(config.seed, &[0x7b1c, start as u64]);
    // a random (|c| + 2)-subset per class seeds the first estimates
    let target = included.len() + 2;
    let mut mask = alloc::vec![false; data.n()];
    for g in 0..data.n_classes() {
        let rows = data.class_rows(g);
        if rows.is_empty() {
            return Err(Error::estimation(format!("class {} has no rows", g + 1)));
        }
        let take = target.min(rows.len());
        for idx in sample(&mut rng, rows.len(), take) {
            mask[rows[idx]] = true;
        }
    }
    let init = TrimmingState::from_mask(mask, 0.0)?;

    // joint estimates on a keep set
    let fit = |keep: &TrimmingState| -> Result<(ClassParams, RegressionParams)> {
        let params = estimate_class_params(sub, keep, config.model)?;
        let regressors = regression::select_regressors(p_var, included, data.x(), keep)?;
        let reg = regression_on_kept(data, y, &regressors, keep)?;
        Ok((params, reg))
    };
    // re-trim by the no-grouping criterion: own-class density on the
    // included columns plus the conditional density of the proposal; the
    // proportions do not enter
    let retrim = |params: &ClassParams, reg: &RegressionParams| -> Result<TrimmingState> {
        let class_dens = class_log_densities(sub, params)?;
        let scores: Vec<f64> = (0..sub.n())
            .map(|i| {
                let row: Vec<f64> = reg.regressors.iter().map(|&c| data.x()[(i, c)]).collect();
                class_dens[i] + reg.log_density(y[i], &row)
            })
            .collect();
        TrimmingState::discard_lowest(&scores, config.gamma)
    };

    let (init_params, init_reg) = fit(&init)?;
    let mut trimming = retrim(&init_params, &init_reg)?;
    let (mut params, mut reg) = fit(&trimming)?;
    let mut loglik = nogrouping_loglik(sub, data, y, &params, &reg, &trimming)?;

    // as in the classifier loop, a proposal is accepted only when it
    // improves the joint trimmed log-likelihood
    for _ in 2..=config.max_iter {
        let proposal = retrim(&params, &reg)?;
        if proposal.trimmed_indices() == trimming.trimmed_indices() {
            break;
        }
        let (new_params, new_reg) = fit(&proposal)?;
        let ll = nogrouping_loglik(sub, data, y, &new_params, &new_reg, &proposal)?;
        if ll > loglik {
            trimming = proposal;
            params = new_params;
            reg = new_reg;
            loglik = ll;
        } else {
            break;
        }
    }
    Ok(NoGroupingState {
        regression: reg,
        trimming,
        loglik,
    })
}

/// Trimmed BIC of the no-grouping model: a robust classifier on the
/// included columns jointly with a trimmed regression of the proposal on
/// an automatically chosen regressor subset.
pub fn tbic_nogrouping(
    data: &LabeledDataset,
    included: &[usize],
    p_var: usize,
    config: &TbicConfig,
) -> Result<TbicOutcome> {
    if included.contains(&p_var) {
        return Err(Error::validation(format!(
            "proposal {p_var} is already among the included variables"
        )));
    }
    let sub = data.select_columns(included)?;
    let y = DVector::from_fn(data.n(), |i, _| data.x()[(i, p_var)]);
    let n_start = if config.gamma == 0.0 {
        1
    } else {
        config.n_start.max(1)
    };

    let mut best: Option<NoGroupingState> = None;
    let mut last_err: Option<Error> = None;
    for start in 0..n_start {
        match nogrouping_start(data, &sub, &y, included, p_var, config, start) {
            Ok(state) => {
                if best.as_ref().map_or(true, |b| state.loglik > b.loglik) {
                    best = Some(state);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let state = match best {
        Some(s) => s,
        None => {
            return Err(
                last_err.unwrap_or_else(|| Error::estimation("all no-grouping starts failed"))
            )
        }
    };

    let n_star = state.trimming.kept_count();
    let v_c = config.model.param_count(included.len(), data.n_classes());
    let v_p = state.regression.regressors.len() + 2;
    Ok(TbicOutcome {
        score: 2.0 * state.loglik - (v_c + v_p) as f64 * libm::log(n_star as f64),
        trimmed_loglik: state.loglik,
        penalty_params: v_c + v_p,
        n_star,
        trimming: state.trimming,
        regression: Some(state.regression),
    })
}

/// Stage kind in the stepwise search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StepKind {
    Addition,
    Removal,
}

/// Scores of one evaluated candidate within a stage.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandidateEvaluation {
    pub variable: usize,
    pub tbic_grouping: f64,
    pub tbic_nogrouping: f64,
}

/// Full record of one stage decision, sufficient to replay the scores.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub kind: StepKind,
    /// The proposed variable (best addition / weakest inclusion).
    pub proposal: usize,
    /// Included set playing the role of `x^c` in the comparison.
    pub context: Vec<usize>,
    pub tbic_grouping: f64,
    pub tbic_nogrouping: f64,
    pub accepted: bool,
    /// Rows discarded by the winning grouping fit.
    pub grouping_trimmed: Vec<usize>,
    /// Rows discarded by the winning no-grouping fit.
    pub nogrouping_trimmed: Vec<usize>,
    /// Regressor subset chosen for the proposal under no-grouping.
    pub regressors: Vec<usize>,
    /// Scores of every candidate evaluated in this stage.
    pub evaluations: Vec<CandidateEvaluation>,
}

/// Result of the stepwise search.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionResult {
    /// Selected variables in inclusion order.
    pub selected: Vec<usize>,
    pub steps: Vec<StepRecord>,
    /// Diagnostic note (e.g. empty selection, stage cap reached).
    pub note: Option<String>,
}

fn evaluate_candidate(
    data: &LabeledDataset,
    context: &[usize],
    candidate: usize,
    config: &TbicConfig,
    stage: usize,
) -> Result<(TbicOutcome, TbicOutcome)> {
    let child = TbicConfig {
        seed: seed::derive(config.seed, &[stage as u64, candidate as u64]),
        ..config.clone()
    };
    let gr = tbic_grouping(data, context, candidate, &child)?;
    let ng = tbic_nogrouping(data, context, candidate, &child)?;
    if gr.n_star != ng.n_star {
        return Err(Error::estimation(format!(
            "kept counts diverged between competing models: {} vs {}",
            gr.n_star, ng.n_star
        )));
    }
    Ok((gr, ng))
}

/// Greedy stepwise search: addition stages propose the candidate with the
/// largest `TBIC(GR) - TBIC(NG)` evidence (accepted when positive),
/// removal stages propose the included variable with the smallest
/// evidence (removed when negative). The search stops after two
/// consecutive rejected stages, or at a hard cap of `2 P` stages.
pub fn greedy_select(data: &LabeledDataset, config: &TbicConfig) -> Result<SelectionResult> {
    let p = data.p();
    let mut included: Vec<usize> = Vec::new();
    let mut candidates: Vec<usize> = (0..p).collect();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut consecutive_rejections = 0usize;
    let mut stage = 0usize;
    let mut note = None;

    'outer: loop {
        for kind in [StepKind::Addition, StepKind::Removal] {
            if consecutive_rejections >= 2 {
                break 'outer;
            }
            if stage >= 2 * p {
                note = Some(String::from("stage cap reached before double rejection"));
                break 'outer;
            }
            stage += 1;

            let pool: Vec<usize> = match kind {
                StepKind::Addition => candidates.clone(),
                StepKind::Removal => included.clone(),
            };
            if pool.is_empty() {
                consecutive_rejections += 1;
                continue;
            }

            let mut evaluations = Vec::with_capacity(pool.len());
            let mut outcomes: Vec<(TbicOutcome, TbicOutcome)> = Vec::with_capacity(pool.len());
            let mut contexts: Vec<Vec<usize>> = Vec::with_capacity(pool.len());
            for &var in &pool {
                let context: Vec<usize> = match kind {
                    StepKind::Addition => included.clone(),
                    StepKind::Removal => included.iter().copied().filter(|&v| v != var).collect(),
                };
                let (gr, ng) = evaluate_candidate(data, &context, var, config, stage)?;
                evaluations.push(CandidateEvaluation {
                    variable: var,
                    tbic_grouping: gr.score,
                    tbic_nogrouping: ng.score,
                });
                outcomes.push((gr, ng));
                contexts.push(context);
            }

            // addition proposes the largest evidence, removal the
            // smallest; ties resolve to the lowest variable index
            let mut pick = 0usize;
            for i in 1..pool.len() {
                let diff_i = evaluations[i].tbic_grouping - evaluations[i].tbic_nogrouping;
                let diff_p = evaluations[pick].tbic_grouping - evaluations[pick].tbic_nogrouping;
                let better = match kind {
                    StepKind::Addition => diff_i > diff_p,
                    StepKind::Removal => diff_i < diff_p,
                };
                if better || (diff_i == diff_p && pool[i] < pool[pick]) {
                    pick = i;
                }
            }
            let proposal = pool[pick];
            let (gr, ng) = &outcomes[pick];
            let diff = gr.score - ng.score;
            let accepted = match kind {
                StepKind::Addition => diff > 0.0,
                StepKind::Removal => diff < 0.0,
            };

            steps.push(StepRecord {
                kind,
                proposal,
                context: contexts[pick].clone(),
                tbic_grouping: gr.score,
                tbic_nogrouping: ng.score,
                accepted,
                grouping_trimmed: gr.trimming.trimmed_indices(),
                nogrouping_trimmed: ng.trimming.trimmed_indices(),
                regressors: ng
                    .regression
                    .as_ref()
                    .map(|r| r.regressors.clone())
                    .unwrap_or_default(),
                evaluations,
            });

            if accepted {
                consecutive_rejections = 0;
                match kind {
                    StepKind::Addition => {
                        included.push(proposal);
                        candidates.retain(|&v| v != proposal);
                    }
                    StepKind::Removal => {
                        included.retain(|&v| v != proposal);
                        // the removed variable re-enters the candidate pool
                        candidates.push(proposal);
                        candidates.sort_unstable();
                    }
                }
            } else {
                consecutive_rejections += 1;
            }
        }
    }

    if included.is_empty() && note.is_none() {
        note = Some(String::from("no variable showed grouping evidence"));
    }
    Ok(SelectionResult {
        selected: included,
        steps,
        note,
    })
}

/// Recomputes both scores of a logged stage from its trimming states.
/// Returns `(TBIC(GR), TBIC(NG))`; estimation on a converged kept set is
/// a fixed point, so the values reproduce the logged ones.
pub fn replay_step(
    data: &LabeledDataset,
    config: &TbicConfig,
    step: &StepRecord,
) -> Result<(f64, f64)> {
    let g = data.n_classes();
    // grouping side
    let mut cols = step.context.clone();
    cols.push(step.proposal);
    let sub_cp = data.select_columns(&cols)?;
    let keep_gr =
        TrimmingState::from_trimmed_indices(data.n(), &step.grouping_trimmed, config.gamma)?;
    let params_gr = estimate_class_params(&sub_cp, &keep_gr, config.model)?;
    let ll_gr = redda::trimmed_loglik(&params_gr, &sub_cp, &keep_gr)?;
    let v_cp = config.model.param_count(cols.len(), g);
    let n_star = keep_gr.kept_count();
    let score_gr = 2.0 * ll_gr - v_cp as f64 * libm::log(n_star as f64);

    // no-grouping side
    let sub_c = data.select_columns(&step.context)?;
    let keep_ng =
        TrimmingState::from_trimmed_indices(data.n(), &step.nogrouping_trimmed, config.gamma)?;
    let params_c = estimate_class_params(&sub_c, &keep_ng, config.model)?;
    let y = DVector::from_fn(data.n(), |i, _| data.x()[(i, step.proposal)]);
    let reg = regression_on_kept(data, &y, &step.regressors, &keep_ng)?;
    let ll_ng = nogrouping_loglik(&sub_c, data, &y, &params_c, &reg, &keep_ng)?;
    let v_c = config.model.param_count(step.context.len(), g);
    let v_p = step.regressors.len() + 2;
    let score_ng = 2.0 * ll_ng - (v_c + v_p) as f64 * libm::log(keep_ng.kept_count() as f64);

    Ok((score_gr, score_ng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trimming::TrimmingState;
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    /// Two well-separated classes on column 0; column 1 pure noise;
    /// column 2 a noisy copy of column 0 (redundant).
    fn three_var_fixture(seed: u64, n_per: usize) -> LabeledDataset {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for g in 0..2usize {
            let center = if g == 0 { -3.0 } else { 3.0 };
            for _ in 0..n_per {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x0 = center + z0;
                rows.push(x0);
                rows.push(z1 * 1.3);
                rows.push(0.8 * x0 + 0.5 * z2);
                labels.push(g);
            }
        }
        LabeledDataset::new(DMatrix::from_row_slice(2 * n_per, 3, &rows), labels, 2).unwrap()
    }

    /// Classical BIC of the grouping factorization computed independently
    /// (closed-form MLE plus penalty), for the gamma = 0 reduction check.
    fn classical_bic_grouping(data: &LabeledDataset, cols: &[usize], model: PatternedModel) -> f64 {
        let sub = data.select_columns(cols).unwrap();
        let keep = TrimmingState::keep_all(sub.n());
        let params = estimate_class_params(&sub, &keep, model).unwrap();
        let ll = redda::trimmed_loglik(&params, &sub, &keep).unwrap();
        let v = model.param_count(cols.len(), data.n_classes());
        2.0 * ll - v as f64 * libm::log(sub.n() as f64)
    }

    #[test]
    fn gamma_zero_grouping_equals_classical_bic() {
        let data = three_var_fixture(5, 40);
        let config = TbicConfig::new(0.0).with_seed(3);
        for (included, p_var) in [
            (alloc::vec![], 0usize),
            (alloc::vec![0], 2),
            (alloc::vec![0, 2], 1),
        ] {
            let got = tbic_grouping(&data, &included, p_var, &config).unwrap();
            let mut cols = included.clone();
            cols.push(p_var);
            let expect = classical_bic_grouping(&data, &cols, config.model);
            assert_relative_eq!(got.score, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_zero_nogrouping_equals_classical_bic() {
        let data = three_var_fixture(7, 40);
        let config = TbicConfig::new(0.0).with_seed(3);
        let included = alloc::vec![0];
        let p_var = 2;
        let got = tbic_nogrouping(&data, &included, p_var, &config).unwrap();

        // independent computation: closed-form classifier on x^c plus the
        // BIC-chosen regression of the proposal
        let keep = TrimmingState::keep_all(data.n());
        let sub = data.select_columns(&included).unwrap();
        let params = estimate_class_params(&sub, &keep, config.model).unwrap();
        let class_ll = redda::trimmed_loglik(&params, &sub, &keep).unwrap();
        let regressors = regression::select_regressors(p_var, &included, data.x(), &keep).unwrap();
        let y = DVector::from_fn(data.n(), |i, _| data.x()[(i, p_var)]);
        let reg = regression_on_kept(&data, &y, &regressors, &keep).unwrap();
        let mut reg_ll = 0.0;
        for i in 0..data.n() {
            let row: Vec<f64> = regressors.iter().map(|&c| data.x()[(i, c)]).collect();
            reg_ll += reg.log_density(y[i], &row);
        }
        let v = config.model.param_count(1, 2) + regressors.len() + 2;
        let expect = 2.0 * (class_ll + reg_ll) - v as f64 * libm::log(data.n() as f64);
        assert_relative_eq!(got.score, expect, epsilon = 1e-10);
        assert_eq!(got.regression.unwrap().regressors, regressors);
    }

    #[test]
    fn single_variable_two_class_score_by_hand() {
        // two unit-variance classes at +-3, equal sizes, gamma = 0: the
        // grouping score is reproducible from hand-computed Gaussian
        // likelihoods
        use rand::Rng;
        let n_per = 30;
        let data = {
            let mut rng = crate::seed::rng(11, &[]);
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for g in 0..2usize {
                let c = if g == 0 { -3.0 } else { 3.0 };
                for _ in 0..n_per {
                    let z: f64 = rng.sample(StandardNormal);
                    rows.push(c + z);
                    labels.push(g);
                }
            }
            LabeledDataset::new(DMatrix::from_column_slice(2 * n_per, 1, &rows), labels, 2).unwrap()
        };
        let got = tbic_grouping(&data, &[], 0, &TbicConfig::new(0.0)).unwrap();

        // hand evaluation: per-class sample means/variances, Gaussian
        // log-likelihood, penalty (1 proportion + 2 means + 2 variances)
        let n = data.n() as f64;
        let mut ll = 0.0;
        for g in 0..2 {
            let rows = data.class_rows(g);
            let ng = rows.len() as f64;
            let mean = rows.iter().map(|&i| data.x()[(i, 0)]).sum::<f64>() / ng;
            let var = rows
                .iter()
                .map(|&i| (data.x()[(i, 0)] - mean) * (data.x()[(i, 0)] - mean))
                .sum::<f64>()
                / ng;
            for &i in &rows {
                let r = data.x()[(i, 0)] - mean;
                ll += (ng / n).ln()
                    - 0.5 * (2.0 * core::f64::consts::PI * var).ln()
                    - 0.5 * r * r / var;
            }
        }
        let expect = 2.0 * ll - 5.0 * n.ln();
        assert_relative_eq!(got.score, expect, epsilon = 1e-8);
    }

    #[test]
    fn penalty_shift_between_models_on_mirrored_data() {
        // class 2 is an exact translate of class 1, so per-class MLE
        // covariances coincide with the pooled one and VVV / EEE attain
        // the same maximized likelihood; the scores then differ exactly by
        // (v_vvv - v_eee) ln N*
        use rand::Rng;
        let mut rng = crate::seed::rng(23, &[]);
        let n_per = 25;
        let mut rows: Vec<f64> = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n_per {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.push(a);
            rows.push(0.4 * a + b);
            labels.push(0);
        }
        for i in 0..n_per {
            rows.push(rows[2 * i] + 5.0);
            rows.push(rows[2 * i + 1] - 2.0);
            labels.push(1);
        }
        let data =
            LabeledDataset::new(DMatrix::from_row_slice(2 * n_per, 2, &rows), labels, 2).unwrap();

        let vvv = tbic_grouping(&data, &[0], 1, &TbicConfig::new(0.0)).unwrap();
        let eee = tbic_grouping(
            &data,
            &[0],
            1,
            &TbicConfig::new(0.0).with_model(PatternedModel::Eee),
        )
        .unwrap();
        assert_relative_eq!(vvv.trimmed_loglik, eee.trimmed_loglik, epsilon = 1e-8);
        let dv =
            (PatternedModel::Vvv.param_count(2, 2) - PatternedModel::Eee.param_count(2, 2)) as f64;
        assert_relative_eq!(
            eee.score - vvv.score,
            dv * (data.n() as f64).ln(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn greedy_keeps_the_discriminating_variable() {
        let data = three_var_fixture(29, 60);
        let config = TbicConfig::new(0.05).with_seed(17).with_starts(5);
        let result = greedy_select(&data, &config).unwrap();
        assert!(
            result.selected.contains(&0),
            "selected {:?}",
            result.selected
        );
        assert!(
            !result.selected.contains(&1),
            "noise column crept in: {:?}",
            result.selected
        );
        // kept counts agree between the two models at every step
        for step in &result.steps {
            assert_eq!(step.grouping_trimmed.len(), step.nogrouping_trimmed.len());
        }
    }

    #[test]
    fn single_column_dataset_degenerates_to_one_comparison() {
        use rand::Rng;
        let mut rng = crate::seed::rng(31, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for g in 0..2usize {
            for _ in 0..25 {
                let z: f64 = rng.sample(StandardNormal);
                rows.push(if g == 0 { -2.5 } else { 2.5 } + z);
                labels.push(g);
            }
        }
        let data =
            LabeledDataset::new(DMatrix::from_column_slice(50, 1, &rows), labels, 2).unwrap();
        let result = greedy_select(&data, &TbicConfig::new(0.05).with_starts(4)).unwrap();
        assert_eq!(result.selected, alloc::vec![0]);
    }

    #[test]
    fn step_log_replay_reproduces_scores_and_decisions() {
        let data = three_var_fixture(37, 50);
        let config = TbicConfig::new(0.08).with_seed(41).with_starts(5);
        let result = greedy_select(&data, &config).unwrap();
        assert!(!result.steps.is_empty());
        for step in &result.steps {
            let (gr, ng) = replay_step(&data, &config, step).unwrap();
            assert_relative_eq!(gr, step.tbic_grouping, epsilon = 1e-8);
            assert_relative_eq!(ng, step.tbic_nogrouping, epsilon = 1e-8);
            let diff = gr - ng;
            let accepted = match step.kind {
                StepKind::Addition => diff > 0.0,
                StepKind::Removal => diff < 0.0,
            };
            assert_eq!(accepted, step.accepted);
        }
    }

    #[test]
    fn irrelevant_proposal_prefers_nogrouping() {
        // proposal independent of the classes while the included variable
        // discriminates: NG should win in a majority of seeds
        let mut wins = 0;
        for s in 0..5u64 {
            let data = three_var_fixture(100 + s, 50);
            let config = TbicConfig::new(0.05).with_seed(s).with_starts(4);
            let gr = tbic_grouping(&data, &[0], 1, &config).unwrap();
            let ng = tbic_nogrouping(&data, &[0], 1, &config).unwrap();
            if ng.score > gr.score {
                wins += 1;
            }
        }
        assert!(wins >= 3, "no-grouping preferred in {wins}/5 seeds");
    }

    #[test]
    fn proposal_already_included_is_rejected() {
        let data = three_var_fixture(3, 20);
        let err = tbic_nogrouping(&data, &[0], 0, &TbicConfig::new(0.0)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
