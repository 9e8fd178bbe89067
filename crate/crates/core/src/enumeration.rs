//! Exhaustive enumeration of covariate/outcome sequences for a given
//! horizon, support, feedback spec, and initial condition, and their
//! partition into conditioning blocks (the sets `D_s`).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{FeedbackSpec, InitialCondition, Path, Support};
use crate::stats::{sufficient_statistic, target_stats, SufficientStatistic, TargetStats};

/// Default cap on the number of sequences a single enumeration may produce.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration of {required} sequences exceeds the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("path outside enumeration universe")]
    PathOutsideUniverse,
    #[error("initial condition does not match feedback spec")]
    InitSpecMismatch,
}

/// A conditioning block: all sequences sharing an initial condition and a
/// sufficient-statistic value, with their identifying statistics attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub init: InitialCondition,
    pub stat: SufficientStatistic,
    pub members: Vec<(Path, TargetStats)>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// A degenerate block carries no information about theta: every member
    /// shares the same `(t_rho, t_beta)`.
    pub fn is_degenerate(&self) -> bool {
        !self.t_rho_varies() && !self.t_beta_varies()
    }

    pub fn t_rho_varies(&self) -> bool {
        self.members
            .iter()
            .any(|(_, ts)| ts.t_rho != self.members[0].1.t_rho)
    }

    pub fn t_beta_varies(&self) -> bool {
        self.members
            .iter()
            .any(|(_, ts)| ts.t_beta != self.members[0].1.t_beta)
    }
}

/// Number of sequences `enumerate_paths` would produce:
/// `2^T * |X|^(T-1)` under Spec1 and `2^T * |X|^T` under Spec2.
pub fn sequence_count(horizon: usize, support_len: usize, spec: FeedbackSpec) -> u128 {
    let x_len = match spec {
        FeedbackSpec::Spec1 => horizon - 1,
        FeedbackSpec::Spec2 => horizon,
    };
    let mut total: u128 = 1u128 << horizon.min(127);
    for _ in 0..x_len {
        total = total.saturating_mul(support_len as u128);
    }
    total
}

/// Enumerate every path for the given initial condition, in lexicographic
/// order of the `(x, y)` encoding, using the default budget.
pub fn enumerate_paths(
    horizon: usize,
    support: &Support,
    spec: FeedbackSpec,
    init: &InitialCondition,
) -> Result<Vec<Path>, EnumerationError> {
    enumerate_paths_with_budget(horizon, support, spec, init, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_paths_with_budget(
    horizon: usize,
    support: &Support,
    spec: FeedbackSpec,
    init: &InitialCondition,
    budget: u64,
) -> Result<Vec<Path>, EnumerationError> {
    assert!(horizon >= 1, "horizon must be at least 1");
    if init.implied_spec() != spec {
        return Err(EnumerationError::InitSpecMismatch);
    }
    let total = sequence_count(horizon, support.len(), spec);
    if total > budget as u128 {
        return Err(EnumerationError::BudgetExceeded {
            required: total,
            budget,
        });
    }
    let x_len = match spec {
        FeedbackSpec::Spec1 => horizon - 1,
        FeedbackSpec::Spec2 => horizon,
    };
    let base = support.len();
    let n_x: usize = base.pow(x_len as u32);
    let n_y: usize = 1usize << horizon;

    let mut paths = Vec::with_capacity(n_x * n_y);
    let mut x_digits = vec![0usize; x_len];
    loop {
        let x_values: Vec<_> = x_digits.iter().map(|&d| support.value(d).clone()).collect();
        let mut y_digits = vec![0u8; horizon];
        loop {
            paths.push(Path {
                init: init.clone(),
                x: x_values.clone(),
                y: y_digits.clone(),
            });
            if !increment(&mut y_digits, 2) {
                break;
            }
        }
        if !increment_usize(&mut x_digits, base) {
            break;
        }
    }
    debug_assert_eq!(paths.len() as u128, total);
    Ok(paths)
}

// Odometer increment, most significant digit first. Returns false on wrap.
fn increment(digits: &mut [u8], base: u8) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn increment_usize(digits: &mut [usize], base: usize) -> bool {
    if digits.is_empty() {
        return false;
    }
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Partition paths into blocks keyed by `(initial condition, statistic)`.
/// Members are sorted lexicographically in the `(x, y)` encoding; blocks are
/// returned in `(init, stat)` order.
pub fn partition_blocks(paths: Vec<Path>) -> Vec<Block> {
    let mut groups: BTreeMap<(InitialCondition, SufficientStatistic), Vec<(Path, TargetStats)>> =
        BTreeMap::new();
    for p in paths {
        let stat = sufficient_statistic(&p);
        let ts = target_stats(&p);
        groups
            .entry((p.init.clone(), stat))
            .or_default()
            .push((p, ts));
    }
    groups
        .into_iter()
        .map(|((init, stat), mut members)| {
            members.sort_by(|a, b| (&a.0.x, &a.0.y).cmp(&(&b.0.x, &b.0.y)));
            Block {
                init,
                stat,
                members,
            }
        })
        .collect()
}

/// Locate the unique block whose `(init, stat)` matches the given path.
pub fn block_of<'a>(p: &Path, blocks: &'a [Block]) -> Result<&'a Block, EnumerationError> {
    let stat = sufficient_statistic(p);
    blocks
        .iter()
        .find(|b| b.init == p.init && b.stat == stat)
        .ok_or(EnumerationError::PathOutsideUniverse)
}

/// All initial conditions of a model class, in deterministic order:
/// `y0` ascending, then `x1` ascending over the support (Spec1 only).
pub fn all_initial_conditions(spec: FeedbackSpec, support: &Support) -> Vec<InitialCondition> {
    match spec {
        FeedbackSpec::Spec1 => {
            let mut inits = Vec::with_capacity(2 * support.len());
            for y0 in 0..=1u8 {
                for x1 in support.values() {
                    inits.push(InitialCondition::spec1(y0, x1.clone()));
                }
            }
            inits
        }
        FeedbackSpec::Spec2 => vec![InitialCondition::spec2(0), InitialCondition::spec2(1)],
    }
}

/// Enumerate and partition the full universe across all initial conditions,
/// concatenated in initial-condition order.
pub fn enumerate_universe(
    horizon: usize,
    support: &Support,
    spec: FeedbackSpec,
    budget: u64,
) -> Result<Vec<Block>, EnumerationError> {
    let mut blocks = Vec::new();
    for init in all_initial_conditions(spec, support) {
        let paths = enumerate_paths_with_budget(horizon, support, spec, &init, budget)?;
        blocks.extend(partition_blocks(paths));
    }
    Ok(blocks)
}
