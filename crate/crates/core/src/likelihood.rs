//! Conditional log-likelihood, its analytic score and Hessian, and a
//! full-joint-probability oracle with explicit heterogeneity and feedback
//! kernel for factorization testing.
//!
//! The conditional objective never sees `alpha` or the kernel: an
//! observation in block `D_s` contributes
//! `theta . t_obs - logsumexp_{m in D_s} theta . t_m`
//! where `t = (t_rho, t_beta)`. The joint oracle `joint_prob_full` is the
//! only place the nuisance parameters appear.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::enumeration::{
    enumerate_paths_with_budget, partition_blocks, Block, EnumerationError,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::model::{FeedbackSpec, InitialCondition, PanelDataset, Path, Rational, Support, Theta};
use crate::stats::{sufficient_statistic, SufficientStatistic};

/// Row-sum tolerance for feedback kernels.
pub const KERNEL_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LikelihoodError {
    #[error("kernel/spec mismatch: {0}")]
    KernelSpecMismatch(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("path outside context")]
    PathOutsideContext,
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

/// `ln(1 + exp(u))` without overflow.
pub fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// The standard logistic CDF.
pub fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Max-shifted log-sum-exp over a nonempty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("rational convertible to f64")
}

/// Conditioning key of one kernel row: `(x_{t-1}, y_{t-1})` under Spec1,
/// `y_{t-1}` under Spec2.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KernelRowKey {
    PrevXY { x: Rational, y: u8 },
    PrevY { y: u8 },
}

/// An individual Markov feedback kernel: one strictly positive probability
/// vector over the support per conditioning key.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackKernel {
    spec: FeedbackSpec,
    support: Support,
    rows: BTreeMap<KernelRowKey, Vec<f64>>,
}

/// Every row key a kernel for `(spec, support)` must carry, in `Ord` order.
pub fn kernel_row_keys(spec: FeedbackSpec, support: &Support) -> Vec<KernelRowKey> {
    match spec {
        FeedbackSpec::Spec1 => {
            let mut keys = Vec::with_capacity(2 * support.len());
            for x in support.values() {
                for y in 0..=1u8 {
                    keys.push(KernelRowKey::PrevXY { x: x.clone(), y });
                }
            }
            keys
        }
        FeedbackSpec::Spec2 => vec![KernelRowKey::PrevY { y: 0 }, KernelRowKey::PrevY { y: 1 }],
    }
}

impl FeedbackKernel {
    pub fn new(
        spec: FeedbackSpec,
        support: Support,
        rows: BTreeMap<KernelRowKey, Vec<f64>>,
    ) -> Result<Self, LikelihoodError> {
        let expected = kernel_row_keys(spec, &support);
        if rows.len() != expected.len() || expected.iter().any(|k| !rows.contains_key(k)) {
            return Err(LikelihoodError::InvalidKernel(format!(
                "expected exactly {} rows keyed by the conditioning set",
                expected.len()
            )));
        }
        for (key, row) in &rows {
            if row.len() != support.len() {
                return Err(LikelihoodError::InvalidKernel(format!(
                    "row {key:?} has {} entries, support has {}",
                    row.len(),
                    support.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p <= 0.0) {
                return Err(LikelihoodError::InvalidKernel(format!(
                    "row {key:?} must lie in the interior of the simplex"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > KERNEL_ROW_TOL {
                return Err(LikelihoodError::InvalidKernel(format!(
                    "row {key:?} sums to {sum}, not 1"
                )));
            }
        }
        Ok(FeedbackKernel {
            spec,
            support,
            rows,
        })
    }

    /// The uniform kernel over the support.
    pub fn uniform(spec: FeedbackSpec, support: Support) -> Self {
        let p = 1.0 / support.len() as f64;
        let rows = kernel_row_keys(spec, &support)
            .into_iter()
            .map(|k| (k, vec![p; support.len()]))
            .collect();
        FeedbackKernel {
            spec,
            support,
            rows,
        }
    }

    pub fn spec(&self) -> FeedbackSpec {
        self.spec
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn row(&self, key: &KernelRowKey) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    /// Transition probability to `x_to` from the given conditioning key.
    pub fn prob(&self, key: &KernelRowKey, x_to: &Rational) -> Result<f64, LikelihoodError> {
        let row = self.rows.get(key).ok_or_else(|| {
            LikelihoodError::KernelSpecMismatch(format!("no kernel row for {key:?}"))
        })?;
        let idx = self.support.index_of(x_to).ok_or_else(|| {
            LikelihoodError::KernelSpecMismatch(format!(
                "value {} outside kernel support",
                crate::model::rational_to_string(x_to)
            ))
        })?;
        Ok(row[idx])
    }
}

/// Joint probability of a path given `(init, alpha, G; theta)` under the full
/// data-generating process, with `F` the standard logistic CDF.
pub fn joint_prob_full(
    p: &Path,
    theta: Theta,
    alpha: f64,
    kernel: &FeedbackKernel,
) -> Result<f64, LikelihoodError> {
    let spec = p.init.implied_spec();
    if kernel.spec() != spec {
        return Err(LikelihoodError::KernelSpecMismatch(format!(
            "kernel is for {:?}, path implies {:?}",
            kernel.spec(),
            spec
        )));
    }
    let horizon = p.horizon();
    let mut log_prob = 0.0;
    for t in 1..=horizon {
        let index =
            theta.rho * f64::from(p.y_at(t - 1)) + theta.beta * rational_to_f64(p.x_at(t)) + alpha;
        log_prob += if p.y_at(t) == 1 {
            -log1p_exp(-index)
        } else {
            -log1p_exp(index)
        };
    }
    match spec {
        FeedbackSpec::Spec1 => {
            for t in 2..=horizon {
                let key = KernelRowKey::PrevXY {
                    x: p.x_at(t - 1).clone(),
                    y: p.y_at(t - 1),
                };
                log_prob += kernel.prob(&key, p.x_at(t))?.ln();
            }
        }
        FeedbackSpec::Spec2 => {
            for t in 1..=horizon {
                let key = KernelRowKey::PrevY { y: p.y_at(t - 1) };
                log_prob += kernel.prob(&key, p.x_at(t))?.ln();
            }
        }
    }
    Ok(log_prob.exp())
}

/// One cached conditioning block: member statistics as floats.
#[derive(Debug, Clone)]
pub struct BlockTerms {
    pub init: InitialCondition,
    pub stat: SufficientStatistic,
    /// `(t_rho, t_beta)` per member, in member order.
    pub members: Vec<[f64; 2]>,
    /// No within-block variation in either statistic.
    pub degenerate: bool,
}

/// Cached evaluation state for the conditional likelihood of one dataset:
/// the realized blocks with float member statistics, the per-block
/// observation counts, and the sum of observed statistics.
#[derive(Debug, Clone)]
pub struct CondLikContext {
    pub spec: FeedbackSpec,
    pub support: Support,
    pub horizon: usize,
    pub n_obs: usize,
    blocks: Vec<BlockTerms>,
    obs_counts: Vec<u64>,
    stat_sum: [f64; 2],
}

impl CondLikContext {
    /// Build the context for a dataset by enumerating the universe of each
    /// realized initial condition and caching the realized blocks.
    pub fn for_dataset(ds: &PanelDataset) -> Result<Self, LikelihoodError> {
        CondLikContext::for_dataset_with_budget(ds, DEFAULT_ENUMERATION_BUDGET)
    }

    pub fn for_dataset_with_budget(
        ds: &PanelDataset,
        budget: u64,
    ) -> Result<Self, LikelihoodError> {
        let mut inits: Vec<InitialCondition> =
            ds.individuals.iter().map(|p| p.init.clone()).collect();
        inits.sort();
        inits.dedup();

        let mut universe: Vec<Block> = Vec::new();
        for init in &inits {
            let paths =
                enumerate_paths_with_budget(ds.horizon, &ds.support, ds.spec, init, budget)?;
            universe.extend(partition_blocks(paths));
        }
        let universe_index: BTreeMap<(&InitialCondition, &SufficientStatistic), &Block> =
            universe.iter().map(|b| ((&b.init, &b.stat), b)).collect();
        let mut index: BTreeMap<(InitialCondition, SufficientStatistic), usize> = BTreeMap::new();
        let mut blocks = Vec::new();
        let mut obs_counts = Vec::new();
        let mut stat_sum = [0.0, 0.0];
        for p in &ds.individuals {
            let stat = sufficient_statistic(p);
            let key = (p.init.clone(), stat);
            let slot = match index.get(&key) {
                Some(&i) => i,
                None => {
                    let block = universe_index
                        .get(&(&key.0, &key.1))
                        .ok_or(LikelihoodError::PathOutsideContext)?;
                    let members: Vec<[f64; 2]> = block
                        .members
                        .iter()
                        .map(|(_, ts)| [f64::from(ts.t_rho), rational_to_f64(&ts.t_beta)])
                        .collect();
                    blocks.push(BlockTerms {
                        init: block.init.clone(),
                        stat: block.stat.clone(),
                        members,
                        degenerate: block.is_degenerate(),
                    });
                    obs_counts.push(0);
                    let i = blocks.len() - 1;
                    index.insert(key, i);
                    i
                }
            };
            obs_counts[slot] += 1;
            let ts = crate::stats::target_stats(p);
            stat_sum[0] += f64::from(ts.t_rho);
            stat_sum[1] += rational_to_f64(&ts.t_beta);
        }
        Ok(CondLikContext {
            spec: ds.spec,
            support: ds.support.clone(),
            horizon: ds.horizon,
            n_obs: ds.n(),
            blocks,
            obs_counts,
            stat_sum,
        })
    }

    pub fn blocks(&self) -> &[BlockTerms] {
        &self.blocks
    }

    /// Sum of observed `(t_rho, t_beta)` over the dataset.
    pub fn stat_sum(&self) -> [f64; 2] {
        self.stat_sum
    }

    pub fn obs_count(&self, block_index: usize) -> u64 {
        self.obs_counts[block_index]
    }

    /// Realized blocks that carry information about theta.
    pub fn n_informative_blocks(&self) -> usize {
        self.blocks
            .iter()
            .zip(&self.obs_counts)
            .filter(|(b, &n)| n > 0 && !b.degenerate)
            .count()
    }

    fn covers(&self, ds: &PanelDataset) -> bool {
        self.spec == ds.spec
            && self.support == ds.support
            && self.horizon == ds.horizon
            && self.n_obs == ds.n()
    }

    /// Conditional log-likelihood at `theta`.
    pub fn log_lik(&self, theta: Theta) -> f64 {
        let mut value = theta.dot(self.stat_sum[0], self.stat_sum[1]);
        for (block, &n) in self.blocks.iter().zip(&self.obs_counts) {
            if n == 0 {
                continue;
            }
            let weights: Vec<f64> = block
                .members
                .iter()
                .map(|t| theta.dot(t[0], t[1]))
                .collect();
            value -= n as f64 * log_sum_exp(&weights);
        }
        value
    }

    /// Analytic score (gradient in `(rho, beta)`) at `theta`.
    pub fn score(&self, theta: Theta) -> [f64; 2] {
        let mut g = self.stat_sum;
        for (block, &n) in self.blocks.iter().zip(&self.obs_counts) {
            if n == 0 {
                continue;
            }
            let (mean, _) = block_moments(block, theta);
            g[0] -= n as f64 * mean[0];
            g[1] -= n as f64 * mean[1];
        }
        g
    }

    /// Analytic Hessian at `theta`: minus the sum of conditional covariance
    /// matrices of the identifying statistics, so negative semi-definite.
    pub fn hessian(&self, theta: Theta) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for (block, &n) in self.blocks.iter().zip(&self.obs_counts) {
            if n == 0 {
                continue;
            }
            let (_, cov) = block_moments(block, theta);
            for r in 0..2 {
                for c in 0..2 {
                    h[r][c] -= n as f64 * cov[r][c];
                }
            }
        }
        h
    }
}

// Softmax mean and covariance of the member statistics of one block.
fn block_moments(block: &BlockTerms, theta: Theta) -> ([f64; 2], [[f64; 2]; 2]) {
    let weights: Vec<f64> = block
        .members
        .iter()
        .map(|t| theta.dot(t[0], t[1]))
        .collect();
    let m = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| (w - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut mean = [0.0; 2];
    for (t, e) in block.members.iter().zip(&exps) {
        let p = e / total;
        mean[0] += p * t[0];
        mean[1] += p * t[1];
    }
    let mut cov = [[0.0; 2]; 2];
    for (t, e) in block.members.iter().zip(&exps) {
        let p = e / total;
        let d = [t[0] - mean[0], t[1] - mean[1]];
        for r in 0..2 {
            for c in 0..2 {
                cov[r][c] += p * d[r] * d[c];
            }
        }
    }
    (mean, cov)
}

/// Conditional log-likelihood of the dataset at `theta` under the cached
/// context. Finite for every finite `theta`.
pub fn cond_log_lik(
    theta: Theta,
    ds: &PanelDataset,
    ctx: &CondLikContext,
) -> Result<f64, LikelihoodError> {
    if !ctx.covers(ds) {
        return Err(LikelihoodError::PathOutsideContext);
    }
    Ok(ctx.log_lik(theta))
}

/// Analytic score of `cond_log_lik` in `(rho, beta)`.
pub fn score(
    theta: Theta,
    ds: &PanelDataset,
    ctx: &CondLikContext,
) -> Result<[f64; 2], LikelihoodError> {
    if !ctx.covers(ds) {
        return Err(LikelihoodError::PathOutsideContext);
    }
    Ok(ctx.score(theta))
}

/// Analytic Hessian of `cond_log_lik` in `(rho, beta)`.
pub fn hessian(
    theta: Theta,
    ds: &PanelDataset,
    ctx: &CondLikContext,
) -> Result<[[f64; 2]; 2], LikelihoodError> {
    if !ctx.covers(ds) {
        return Err(LikelihoodError::PathOutsideContext);
    }
    Ok(ctx.hessian(theta))
}

/// Eigenvalues of a symmetric 2x2 matrix, descending.
pub fn sym_eigenvalues(h: &[[f64; 2]; 2]) -> [f64; 2] {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}
