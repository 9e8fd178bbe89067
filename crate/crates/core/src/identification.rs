//! Decides, by exact arithmetic over enumerated blocks, which components of
//! theta are identified via conditional likelihood.
//!
//! Two criteria are implemented. `PerStatistic` asks whether some block shows
//! variation in the component's own statistic (`t_rho` for rho, `t_beta` for
//! beta). `Span` treats each within-block pair difference
//! `(t_rho(A)-t_rho(B), t_beta(A)-t_beta(B))` as a vector and declares a
//! component identified iff its unit vector lies in the exact linear span of
//! all difference vectors: theta_1 is observationally equivalent to theta_0
//! exactly when their difference is orthogonal to every difference vector.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::enumeration::{
    all_initial_conditions, enumerate_paths_with_budget, partition_blocks, Block, EnumerationError,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::model::Path;
use crate::model::{FeedbackSpec, InitialCondition, PanelDataset, Rational, Support};
use crate::stats::{sufficient_statistic, SufficientStatistic, TargetStats};

/// Which identification condition to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Variation in each component's own statistic within some block.
    PerStatistic,
    /// Unit-vector membership in the exact span of all difference vectors.
    Span,
}

impl Criterion {
    pub fn token(&self) -> &'static str {
        match self {
            Criterion::PerStatistic => "per-stat",
            Criterion::Span => "span",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "per-stat" => Some(Criterion::PerStatistic),
            "span" => Some(Criterion::Span),
            _ => None,
        }
    }
}

/// A nonzero within-block difference of identifying statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceVector {
    pub d_rho: i64,
    pub d_beta: Rational,
}

/// A block member pair exhibiting variation in one statistic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub init: InitialCondition,
    pub stat: SufficientStatistic,
    pub member_a: (Path, TargetStats),
    pub member_b: (Path, TargetStats),
}

/// Per-initial-condition diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitSummary {
    pub init: InitialCondition,
    /// Sequences enumerated (for `check_identification`) or observations
    /// (for `dataset_identification`) under this initial condition.
    pub n_paths: usize,
    pub n_blocks: usize,
    pub n_informative_blocks: usize,
    pub t_rho_varies: bool,
    pub t_beta_varies: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentificationReport {
    pub spec: FeedbackSpec,
    pub horizon: usize,
    pub support: Support,
    pub criterion: Criterion,
    pub rho_identified: bool,
    pub beta_identified: bool,
    /// Exact rank of the set of difference vectors, in {0, 1, 2}.
    pub span_rank: usize,
    pub rho_witness: Option<Witness>,
    pub beta_witness: Option<Witness>,
    pub per_init: Vec<InitSummary>,
}

/// All nonzero pairwise difference vectors over the given blocks,
/// deduplicated up to sign and scaling, in exact arithmetic.
pub fn difference_vectors(blocks: &[Block]) -> Vec<DifferenceVector> {
    let mut seen: BTreeSet<(Rational, Rational)> = BTreeSet::new();
    let mut out = Vec::new();
    for block in blocks {
        for i in 0..block.members.len() {
            for j in (i + 1)..block.members.len() {
                let a = &block.members[i].1;
                let b = &block.members[j].1;
                let d_rho = i64::from(a.t_rho) - i64::from(b.t_rho);
                let d_beta = &a.t_beta - &b.t_beta;
                if d_rho == 0 && d_beta.is_zero() {
                    continue;
                }
                if seen.insert(canonical_direction(d_rho, &d_beta)) {
                    out.push(DifferenceVector { d_rho, d_beta });
                }
            }
        }
    }
    out
}

// Scale so the first nonzero coordinate is 1; collapses sign and scaling.
fn canonical_direction(d_rho: i64, d_beta: &Rational) -> (Rational, Rational) {
    let one = Rational::from_integer(1.into());
    if d_rho != 0 {
        let scale = Rational::from_integer(d_rho.into());
        (one, d_beta / scale)
    } else {
        (Rational::zero(), one)
    }
}

/// Exact rank of a matrix of rationals via fraction-based Gaussian
/// elimination. Rows may have any common width.
pub fn rational_rank(rows: &[Vec<Rational>]) -> usize {
    let mut mat: Vec<Vec<Rational>> = rows.to_vec();
    let ncols = mat.first().map_or(0, Vec::len);
    let nrows = mat.len();
    let mut rank = 0;
    for col in 0..ncols {
        let pivot = (rank..nrows).find(|&r| !mat[r][col].is_zero());
        let Some(pivot) = pivot else { continue };
        mat.swap(rank, pivot);
        for r in (rank + 1)..nrows {
            if mat[r][col].is_zero() {
                continue;
            }
            let factor = &mat[r][col] / &mat[rank][col];
            for c in col..ncols {
                let delta = &factor * &mat[rank][c];
                mat[r][c] -= delta;
            }
        }
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Whether `target` lies in the exact linear span of `rows`.
pub fn rational_in_span(rows: &[Vec<Rational>], target: &[Rational]) -> bool {
    let base = rational_rank(rows);
    let mut extended = rows.to_vec();
    extended.push(target.to_vec());
    rational_rank(&extended) == base
}

fn vectors_as_rows(vectors: &[DifferenceVector]) -> Vec<Vec<Rational>> {
    vectors
        .iter()
        .map(|v| vec![Rational::from_integer(v.d_rho.into()), v.d_beta.clone()])
        .collect()
}

fn unit_vector(component: usize) -> Vec<Rational> {
    let mut e = vec![Rational::zero(), Rational::zero()];
    e[component] = Rational::from_integer(1.into());
    e
}

// First member pair of the first block differing in the chosen statistic.
fn find_witness(blocks: &[Block], want_rho: bool) -> Option<Witness> {
    for block in blocks {
        for i in 0..block.members.len() {
            for j in (i + 1)..block.members.len() {
                let a = &block.members[i].1;
                let b = &block.members[j].1;
                let differs = if want_rho {
                    a.t_rho != b.t_rho
                } else {
                    a.t_beta != b.t_beta
                };
                if differs {
                    return Some(Witness {
                        init: block.init.clone(),
                        stat: block.stat.clone(),
                        member_a: block.members[i].clone(),
                        member_b: block.members[j].clone(),
                    });
                }
            }
        }
    }
    None
}

fn summarize_blocks(
    blocks: &[Block],
    criterion: Criterion,
) -> (bool, bool, usize, Option<Witness>, Option<Witness>) {
    let vectors = difference_vectors(blocks);
    let rows = vectors_as_rows(&vectors);
    let span_rank = rational_rank(&rows);
    let (rho_identified, beta_identified) = match criterion {
        Criterion::PerStatistic => (
            blocks.iter().any(Block::t_rho_varies),
            blocks.iter().any(Block::t_beta_varies),
        ),
        Criterion::Span => (
            rational_in_span(&rows, &unit_vector(0)),
            rational_in_span(&rows, &unit_vector(1)),
        ),
    };
    let rho_witness = if rho_identified {
        find_witness(blocks, true)
    } else {
        None
    };
    let beta_witness = if beta_identified {
        find_witness(blocks, false)
    } else {
        None
    };
    (
        rho_identified,
        beta_identified,
        span_rank,
        rho_witness,
        beta_witness,
    )
}

fn init_summary(init: &InitialCondition, blocks: &[Block], n_paths: usize) -> InitSummary {
    InitSummary {
        init: init.clone(),
        n_paths,
        n_blocks: blocks.len(),
        n_informative_blocks: blocks.iter().filter(|b| !b.is_degenerate()).count(),
        t_rho_varies: blocks.iter().any(|b| b.t_rho_varies()),
        t_beta_varies: blocks.iter().any(|b| b.t_beta_varies()),
    }
}

/// Decide identification for a model class `(T, support, spec)` by
/// enumerating every initial condition and aggregating all blocks.
pub fn check_identification(
    horizon: usize,
    support: &Support,
    spec: FeedbackSpec,
    criterion: Criterion,
) -> Result<IdentificationReport, EnumerationError> {
    check_identification_with_budget(
        horizon,
        support,
        spec,
        criterion,
        DEFAULT_ENUMERATION_BUDGET,
    )
}

pub fn check_identification_with_budget(
    horizon: usize,
    support: &Support,
    spec: FeedbackSpec,
    criterion: Criterion,
    budget: u64,
) -> Result<IdentificationReport, EnumerationError> {
    let mut all_blocks = Vec::new();
    let mut per_init = Vec::new();
    for init in all_initial_conditions(spec, support) {
        let paths = enumerate_paths_with_budget(horizon, support, spec, &init, budget)?;
        let n_paths = paths.len();
        let blocks = partition_blocks(paths);
        per_init.push(init_summary(&init, &blocks, n_paths));
        all_blocks.extend(blocks);
    }
    let (rho_identified, beta_identified, span_rank, rho_witness, beta_witness) =
        summarize_blocks(&all_blocks, criterion);
    Ok(IdentificationReport {
        spec,
        horizon,
        support: support.clone(),
        criterion,
        rho_identified,
        beta_identified,
        span_rank,
        rho_witness,
        beta_witness,
        per_init,
    })
}

/// Same verdict semantics as `check_identification`, but difference vectors
/// come only from blocks containing at least one sampled path. Used by the
/// estimator to refuse non-identified fits; applies the `Span` criterion.
pub fn dataset_identification(ds: &PanelDataset) -> Result<IdentificationReport, EnumerationError> {
    dataset_identification_with_budget(ds, DEFAULT_ENUMERATION_BUDGET)
}

pub fn dataset_identification_with_budget(
    ds: &PanelDataset,
    budget: u64,
) -> Result<IdentificationReport, EnumerationError> {
    let realized = realized_blocks(ds, budget)?;
    let mut per_init = Vec::new();
    for init in all_initial_conditions(ds.spec, &ds.support) {
        let n_obs = ds.individuals.iter().filter(|p| p.init == init).count();
        if n_obs == 0 {
            continue;
        }
        let init_blocks: Vec<Block> = realized
            .iter()
            .filter(|b| b.init == init)
            .cloned()
            .collect();
        per_init.push(init_summary(&init, &init_blocks, n_obs));
    }
    let (rho_identified, beta_identified, span_rank, rho_witness, beta_witness) =
        summarize_blocks(&realized, Criterion::Span);
    Ok(IdentificationReport {
        spec: ds.spec,
        horizon: ds.horizon,
        support: ds.support.clone(),
        criterion: Criterion::Span,
        rho_identified,
        beta_identified,
        span_rank,
        rho_witness,
        beta_witness,
        per_init,
    })
}

/// The distinct blocks of the enumeration universe that contain at least one
/// observation of `ds`, in `(init, stat)` order.
pub fn realized_blocks(ds: &PanelDataset, budget: u64) -> Result<Vec<Block>, EnumerationError> {
    let mut inits: Vec<InitialCondition> = ds.individuals.iter().map(|p| p.init.clone()).collect();
    inits.sort();
    inits.dedup();
    let mut realized_keys: BTreeSet<(InitialCondition, SufficientStatistic)> = BTreeSet::new();
    for p in &ds.individuals {
        realized_keys.insert((p.init.clone(), sufficient_statistic(p)));
    }
    let mut out = Vec::new();
    for init in inits {
        let paths = enumerate_paths_with_budget(ds.horizon, &ds.support, ds.spec, &init, budget)?;
        for block in partition_blocks(paths) {
            if realized_keys.contains(&(block.init.clone(), block.stat.clone())) {
                out.push(block);
            }
        }
    }
    Ok(out)
}
