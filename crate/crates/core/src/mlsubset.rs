//! Maximum-likelihood subset selector.
//!
//! The relevant index set `F` (of fixed size `p`) is treated as a model
//! parameter of a joint density over all `P` variables: the restriction
//! to `F` follows the patterned classifier, while the complement `E` is
//! linked to `F` by a single class-independent Gaussian regression. The
//! trimmed likelihood is maximized by a robust initialization followed by
//! cycles of
//!
//! * an M-step (full-dimension constrained estimates plus pooled moments),
//! * an S-step (discrete choice of `F`, by closed forms, exhaustive
//!   enumeration or a fixed-size genetic search), and
//! * a T-step (conditional regression link from pooled moments plus
//!   re-trimming by the joint criterion),
//!
//! until the discarded rows repeat on consecutive iterations.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand_chacha::ChaCha12Rng;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::gaussian::GaussianDensity;
use crate::linalg;
use crate::pattern::{
    estimate_class_params, pooled_covariance, pooled_mean, ClassParams, PatternedModel,
};
use crate::seed;
use crate::subsetga::{self, GaParams};
use crate::trimming::TrimmingState;

/// Search strategy for the S-step. Diagonal models (VVI, EEI) always use
/// their exact index rankings; the strategy governs the remaining codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SStepStrategy {
    /// Exhaustive enumeration up to [`EXHAUSTIVE_SUBSET_LIMIT`]
    /// combinations, genetic search beyond.
    Auto,
    Exhaustive,
    Genetic,
}

/// Exhaustive S-step enumeration bound on `C(P, p)`.
pub const EXHAUSTIVE_SUBSET_LIMIT: u128 = 20_000;

/// Fitting configuration.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlSubsetConfig {
    /// Size of the relevant subset (a model hyper-parameter).
    pub p: usize,
    pub gamma: f64,
    pub model: PatternedModel,
    /// Random restarts of the whole cycle.
    pub n_init: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub strategy: SStepStrategy,
    pub ga: GaParams,
}

impl MlSubsetConfig {
    pub fn new(p: usize, gamma: f64) -> Self {
        Self {
            p,
            gamma,
            model: PatternedModel::Vvv,
            n_init: 20,
            max_iter: 100,
            seed: 0,
            strategy: SStepStrategy::Auto,
            ga: GaParams::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_inits(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

/// Relevant/irrelevant split of the variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsetPartition {
    relevant: Vec<usize>,
    complement: Vec<usize>,
}

impl SubsetPartition {
    /// Builds the partition of `0..total` from the relevant set.
    pub fn new(mut relevant: Vec<usize>, total: usize) -> Result<Self> {
        relevant.sort_unstable();
        relevant.dedup();
        if relevant.is_empty() {
            return Err(Error::validation("relevant subset must not be empty"));
        }
        if let Some(&bad) = relevant.iter().find(|&&v| v >= total) {
            return Err(Error::validation(format!(
                "variable {bad} out of range for {total} columns"
            )));
        }
        let complement = (0..total).filter(|v| !relevant.contains(v)).collect();
        Ok(Self {
            relevant,
            complement,
        })
    }

    pub fn relevant(&self) -> &[usize] {
        &self.relevant
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn p(&self) -> usize {
        self.relevant.len()
    }

    pub fn total(&self) -> usize {
        self.relevant.len() + self.complement.len()
    }
}

/// Class-independent regression link of the complement on the relevant
/// subset.
#[derive(Debug, Clone)]
pub struct ConditionalLink {
    /// `(P - p) x p` coefficient matrix.
    pub coefficients: DMatrix<f64>,
    /// Conditional intercept vector, length `P - p`.
    pub intercept: DVector<f64>,
    /// Conditional covariance, `(P - p) x (P - p)`, possibly singular.
    pub covariance: DMatrix<f64>,
}

/// Fitted subset selector.
#[derive(Debug, Clone)]
pub struct MlSubsetFit {
    pub partition: SubsetPartition,
    /// Full-dimension class parameters including pooled moments.
    pub params: ClassParams,
    pub link: ConditionalLink,
    pub trimming: TrimmingState,
    /// Joint trimmed log-likelihood of the stored fields.
    pub objective: f64,
    /// Restarts that completed without an estimation failure.
    pub n_init_used: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    /// Whether any restriction needed eigenvalue flooring inside the
    /// S-step objective.
    pub h_regularized: bool,
}

/// Per-row joint score: own-class log density (with proportion) on the
/// relevant columns plus the conditional log density of the complement
/// residual. This is both the T-step trimming criterion and the integrand
/// of the joint trimmed log-likelihood.
fn joint_row_scores(
    data: &LabeledDataset,
    partition: &SubsetPartition,
    params: &ClassParams,
    link: &ConditionalLink,
) -> Result<Vec<f64>> {
    let f_set = partition.relevant();
    let e_set = partition.complement();
    let x_f = DMatrix::from_fn(data.n(), f_set.len(), |i, j| data.x()[(i, f_set[j])]);
    let x_e = DMatrix::from_fn(data.n(), e_set.len(), |i, j| data.x()[(i, e_set[j])]);

    let class_dens: Vec<DVector<f64>> = (0..params.n_classes())
        .map(|g| {
            let mu = linalg::restrict_vec(&params.mu[g], f_set);
            let sigma = linalg::restrict(&params.sigma[g], f_set);
            GaussianDensity::new(mu, &sigma)?.log_densities(&x_f)
        })
        .collect::<Result<_>>()?;

    // residuals of the complement after removing the linear part
    let residuals = &x_e - &x_f * link.coefficients.transpose();
    let cond = GaussianDensity::new(link.intercept.clone(), &link.covariance)?
        .log_densities(&residuals)?;

    Ok((0..data.n())
        .map(|i| {
            let g = data.labels()[i];
            libm::log(params.tau[g]) + class_dens[g][i] + cond[i]
        })
        .collect())
}

/// Joint trimmed log-likelihood of the partitioned model: kept rows
/// contribute the classification term on the relevant columns and the
/// conditional regression term on the complement.
pub fn joint_trimmed_loglik(
    data: &LabeledDataset,
    partition: &SubsetPartition,
    params: &ClassParams,
    link: &ConditionalLink,
    keep: &TrimmingState,
) -> Result<f64> {
    if keep.n() != data.n() {
        return Err(Error::validation(
            "keep vector length does not match dataset",
        ));
    }
    if partition.total() != data.p() {
        return Err(Error::validation(
            "partition does not cover the dataset columns",
        ));
    }
    let scores = joint_row_scores(data, partition, params, link)?;
    Ok((0..data.n())
        .filter(|&i| keep.is_kept(i))
        .map(|i| scores[i])
        .sum())
}

/// Robust initialization. When `N` is large compared to `P` and `G`
/// (`N > 2 G (P + 1)`), a random `(P + 1)`-subset per class seeds the
/// first M-step and no initial subset is drawn. Otherwise a
/// `(p + 1)`-subset per class and a random starting subset are drawn,
/// restricted parameters estimated, and the trimming immediately
/// re-derived from the restricted own-class log-densities.
pub fn robust_init(
    data: &LabeledDataset,
    p: usize,
    gamma: f64,
    model: PatternedModel,
    rng: &mut ChaCha12Rng,
) -> Result<(TrimmingState, Option<Vec<usize>>)> {
    let n = data.n();
    let g = data.n_classes();
    let big_p = data.p();
    let large_n = n > 2 * g * (big_p + 1);

    let subset_size = if large_n { big_p + 1 } else { p + 1 };
    let mut mask = alloc::vec![false; n];
    for cls in 0..g {
        let rows = data.class_rows(cls);
        if !large_n && rows.len() < p + 1 {
            return Err(Error::Initialization(format!(
                "class {} has {} rows, need at least {}",
                cls + 1,
                rows.len(),
                p + 1
            )));
        }
        if rows.len() < 2 {
            return Err(Error::Initialization(format!(
                "class {} has fewer than two rows",
                cls + 1
            )));
        }
        let take = subset_size.min(rows.len());
        for idx in sample(rng, rows.len(), take) {
            mask[rows[idx]] = true;
        }
    }
    let mask = TrimmingState::from_mask(mask, 0.0)?;

    if large_n {
        return Ok((mask, None));
    }

    // small-N branch: restricted estimates on a random starting subset,
    // then a full re-trim by the restricted own-class log-density
    let f0: Vec<usize> = {
        let mut v: Vec<usize> = sample(rng, big_p, p).into_vec();
        v.sort_unstable();
        v
    };
    let sub = data.select_columns(&f0)?;
    let params = estimate_class_params(&sub, &mask, model)?;
    let dens: Vec<DVector<f64>> = params
        .mu
        .iter()
        .zip(&params.sigma)
        .map(|(mu, sigma)| GaussianDensity::new(mu.clone(), sigma)?.log_densities(sub.x()))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = (0..n).map(|i| dens[data.labels()[i]][i]).collect();
    let state = TrimmingState::discard_lowest(&scores, gamma)?;
    Ok((state, Some(f0)))
}

/// M-step at full dimension: constrained class parameters on the kept
/// rows plus the pooled mean and pooled covariance in the form implied by
/// the model code.
pub fn m_step(
    data: &LabeledDataset,
    keep: &TrimmingState,
    model: PatternedModel,
) -> Result<ClassParams> {
    let mut params = estimate_class_params(data, keep, model)?;
    params.pooled_mu = Some(pooled_mean(data.x(), keep)?);
    params.pooled_sigma = Some(pooled_covariance(data.x(), keep, model)?);
    Ok(params)
}

/// S-step objective: the gap between the mixture of restricted class
/// log-volumes and the restricted pooled log-volume,
/// `sum_g tau_g log det Sigma_{g,F} - log det Sigma_F`.
///
/// Returns the value and whether any restriction needed eigenvalue
/// flooring.
pub fn h_objective(params: &ClassParams, f_set: &[usize]) -> Result<(f64, bool)> {
    let pooled = params
        .pooled_sigma
        .as_ref()
        .ok_or_else(|| Error::validation("pooled covariance missing; run the M-step first"))?;
    let mut flagged = false;
    let mut value = 0.0;
    for g in 0..params.n_classes() {
        let (ld, reg) = linalg::log_det_floored(&linalg::restrict(&params.sigma[g], f_set));
        flagged |= reg;
        value += params.tau[g] * ld;
    }
    let (ld_pooled, reg) = linalg::log_det_floored(&linalg::restrict(pooled, f_set));
    flagged |= reg;
    Ok((value - ld_pooled, flagged))
}

/// Exact S-step rankings for the diagonal models: per-index scores whose
/// `p` smallest entries minimize `h`.
fn diagonal_scores(params: &ClassParams, model: PatternedModel) -> Option<Vec<f64>> {
    let pooled = params.pooled_sigma.as_ref()?;
    let dim = params.dim();
    match model {
        PatternedModel::Vvi => Some(
            (0..dim)
                .map(|k| {
                    (0..params.n_classes())
                        .map(|g| {
                            params.tau[g] * libm::log(params.sigma[g][(k, k)] / pooled[(k, k)])
                        })
                        .sum()
                })
                .collect(),
        ),
        // all class covariances coincide for EEI; the quotient of the
        // within-class diagonal over the pooled diagonal ranks the indices
        PatternedModel::Eei => Some(
            (0..dim)
                .map(|k| params.sigma[0][(k, k)] / pooled[(k, k)])
                .collect(),
        ),
        _ => None,
    }
}

/// S-step: minimizes [`h_objective`] over all size-`p` subsets. Diagonal
/// models use their exact index rankings; otherwise the search is
/// exhaustive when `C(P, p)` is no larger than
/// [`EXHAUSTIVE_SUBSET_LIMIT`] (or strategy demands it) and genetic
/// beyond.
pub fn s_step(
    params: &ClassParams,
    p: usize,
    model: PatternedModel,
    strategy: SStepStrategy,
    ga: &GaParams,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<usize>> {
    let dim = params.dim();
    if p > dim || p == 0 {
        return Err(Error::validation(format!(
            "subset size {p} out of range for {dim} variables"
        )));
    }
    if p == dim {
        return Ok((0..dim).collect());
    }
    if let Some(scores) = diagonal_scores(params, model) {
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut f: Vec<usize> = order.into_iter().take(p).collect();
        f.sort_unstable();
        return Ok(f);
    }

    let objective = |subset: &[usize]| -> f64 {
        h_objective(params, subset)
            .map(|(v, _)| v)
            .unwrap_or(f64::INFINITY)
    };
    let exhaustive = match strategy {
        SStepStrategy::Exhaustive => true,
        SStepStrategy::Genetic => false,
        SStepStrategy::Auto => subsetga::binomial(dim, p) <= EXHAUSTIVE_SUBSET_LIMIT,
    };
    if exhaustive {
        Ok(subsetga::exhaustive_minimum(dim, p, objective))
    } else {
        Ok(subsetga::minimize_subset(dim, p, ga, rng, objective))
    }
}

/// T-step: conditional regression link of the complement on the relevant
/// subset from the pooled moments, followed by a re-trim of the
/// `floor(N * gamma)` rows with the lowest joint criterion.
pub fn t_step(
    data: &LabeledDataset,
    params: &ClassParams,
    f_set: &[usize],
    gamma: f64,
) -> Result<(ConditionalLink, TrimmingState)> {
    let partition = SubsetPartition::new(f_set.to_vec(), data.p())?;
    let pooled_mu = params
        .pooled_mu
        .as_ref()
        .ok_or_else(|| Error::validation("pooled mean missing; run the M-step first"))?;
    let pooled = params
        .pooled_sigma
        .as_ref()
        .ok_or_else(|| Error::validation("pooled covariance missing; run the M-step first"))?;

    let f = partition.relevant();
    let e = partition.complement();
    let sigma_f = linalg::floor_eigenvalues(&linalg::restrict(pooled, f)).0;
    let sigma_f_inv = linalg::spd_inverse(&sigma_f, "pooled restriction")?;
    let sigma_ef = linalg::cross_block(pooled, e, f);
    let sigma_e = linalg::restrict(pooled, e);

    let coefficients = &sigma_ef * &sigma_f_inv;
    let mu_f = linalg::restrict_vec(pooled_mu, f);
    let mu_e = linalg::restrict_vec(pooled_mu, e);
    let intercept = &mu_e - &coefficients * &mu_f;
    let covariance = linalg::symmetrize(&(&sigma_e - &coefficients * sigma_ef.transpose()));

    let link = ConditionalLink {
        coefficients,
        intercept,
        covariance,
    };
    let scores = joint_row_scores(data, &partition, params, &link)?;
    let state = TrimmingState::discard_lowest(&scores, gamma)?;
    Ok((link, state))
}

struct InitOutcome {
    partition: SubsetPartition,
    params: ClassParams,
    link: ConditionalLink,
    trimming: TrimmingState,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    h_regularized: bool,
}

fn run_init(data: &LabeledDataset, config: &MlSubsetConfig, init: usize) -> Result<InitOutcome> {
    let mut rng = seed::rng(config.seed, &[0x517, init as u64]);
    let (init_keep, _f0) = robust_init(data, config.p, config.gamma, config.model, &mut rng)?;

    let mut h_regularized = false;
    // one M -> S -> T cycle from a keep set
    let cycle = |keep: &TrimmingState,
                 rng: &mut ChaCha12Rng,
                 flagged: &mut bool|
     -> Result<(
        ClassParams,
        SubsetPartition,
        ConditionalLink,
        TrimmingState,
        f64,
    )> {
        let params = m_step(data, keep, config.model)?;
        let f = s_step(
            &params,
            config.p,
            config.model,
            config.strategy,
            &config.ga,
            rng,
        )?;
        let (_, reg) = h_objective(&params, &f)?;
        *flagged |= reg;
        let (link, state) = t_step(data, &params, &f, config.gamma)?;
        let partition = SubsetPartition::new(f, data.p())?;
        let objective = joint_trimmed_loglik(data, &partition, &params, &link, &state)?;
        Ok((params, partition, link, state, objective))
    };

    let (mut params, mut partition, mut link, mut trimming, mut objective) =
        cycle(&init_keep, &mut rng, &mut h_regularized)?;
    let mut history = alloc::vec![objective];
    let mut converged = false;
    let mut iterations = 1;

    // a cycle is accepted only when it improves the joint objective; the
    // stationary discarded set ends the restart either way
    for iter in 2..=config.max_iter {
        let (new_params, new_partition, new_link, new_state, new_objective) =
            cycle(&trimming, &mut rng, &mut h_regularized)?;
        if new_state.trimmed_indices() == trimming.trimmed_indices() {
            // same discarded rows on two consecutive iterations: keep the
            // refreshed estimates, which are now a fixed point
            params = new_params;
            partition = new_partition;
            link = new_link;
            trimming = new_state;
            objective = new_objective;
            if history.last().is_none_or(|l| objective > *l) {
                history.push(objective);
            }
            converged = true;
            iterations = iter;
            break;
        }
        if new_objective > objective {
            params = new_params;
            partition = new_partition;
            link = new_link;
            trimming = new_state;
            objective = new_objective;
            history.push(objective);
            iterations = iter;
        } else {
            converged = true;
            break;
        }
    }

    Ok(InitOutcome {
        partition,
        params,
        link,
        trimming,
        objective,
        iterations,
        converged,
        history,
        h_regularized,
    })
}

/// Fits the subset selector: best of `n_init` restarts by the joint
/// trimmed log-likelihood, deterministic for a fixed seed.
pub fn fit_ml_subset(data: &LabeledDataset, config: &MlSubsetConfig) -> Result<MlSubsetFit> {
    if config.p == 0 || config.p > data.p() {
        return Err(Error::validation(format!(
            "subset size {} out of range for {} columns",
            config.p,
            data.p()
        )));
    }
    if !(0.0..0.5).contains(&config.gamma) {
        return Err(Error::validation(format!(
            "trimming level must lie in [0, 0.5), got {}",
            config.gamma
        )));
    }
    // at gamma = 0 the cycle reaches the same full-data fixed point from
    // every start
    let n_init = if config.gamma == 0.0 {
        1
    } else {
        config.n_init.max(1)
    };

    let mut best: Option<InitOutcome> = None;
    let mut n_init_used = 0usize;
    let mut last_err: Option<Error> = None;
    for init in 0..n_init {
        match run_init(data, config, init) {
            Ok(outcome) => {
                n_init_used += 1;
                if best
                    .as_ref()
                    .map_or(true, |b| outcome.objective > b.objective)
                {
                    best = Some(outcome);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(outcome) => Ok(MlSubsetFit {
            partition: outcome.partition,
            params: outcome.params,
            link: outcome.link,
            trimming: outcome.trimming,
            objective: outcome.objective,
            n_init_used,
            n_iterations: outcome.iterations,
            converged: outcome.converged,
            objective_history: outcome.history,
            h_regularized: outcome.h_regularized,
        }),
        None => Err(last_err
            .unwrap_or_else(|| Error::estimation("all restarts of the subset selector failed"))),
    }
}
