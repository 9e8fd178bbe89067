//! Sufficient statistics for the nuisance parameters (individual
//! heterogeneity and feedback kernel) and the identifying statistics
//! `(t_rho, t_beta)` that enter the conditional likelihood.

use std::collections::BTreeMap;

use crate::model::{FeedbackSpec, Path, Rational};

/// One transition count key.
///
/// Under Spec1 the counted event is the triple `(X_t, Y_t, X_{t+1})` for
/// `t = 1..T-1`; under Spec2 it is the pair `(Y_{t-1}, X_t)` for `t = 1..T`.
/// The derived ordering is lexicographic in the listed field order, which is
/// the iteration order promised by `SufficientStatistic::counts`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionKey {
    Triple {
        x_from: Rational,
        y: u8,
        x_to: Rational,
    },
    Pair {
        y: u8,
        x: Rational,
    },
}

/// The minimal sufficient statistic `S = (n_y, transition counts)`.
///
/// Keys with zero count are never stored, so equality of statistics is plain
/// structural equality and statistics can serve directly as grouping keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SufficientStatistic {
    pub spec: FeedbackSpec,
    /// `sum_{t=1..T} y_t`.
    pub n_y: u32,
    pub counts: BTreeMap<TransitionKey, u32>,
}

impl SufficientStatistic {
    /// Total number of counted transitions: `T - 1` under Spec1, `T` under Spec2.
    pub fn total_transitions(&self) -> u32 {
        self.counts.values().sum()
    }
}

/// The statistics whose within-block variation drives identification:
/// `t_rho = sum_{t=1..T} y_{t-1} y_t` and `t_beta = sum_{t=1..T} x_t y_t`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TargetStats {
    pub t_rho: u32,
    pub t_beta: Rational,
}

/// Compute the sufficient statistic of a valid path.
pub fn sufficient_statistic(p: &Path) -> SufficientStatistic {
    let t_max = p.horizon();
    let spec = p.init.implied_spec();
    let mut counts: BTreeMap<TransitionKey, u32> = BTreeMap::new();
    match spec {
        FeedbackSpec::Spec1 => {
            for t in 1..t_max {
                let key = TransitionKey::Triple {
                    x_from: p.x_at(t).clone(),
                    y: p.y_at(t),
                    x_to: p.x_at(t + 1).clone(),
                };
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        FeedbackSpec::Spec2 => {
            for t in 1..=t_max {
                let key = TransitionKey::Pair {
                    y: p.y_at(t - 1),
                    x: p.x_at(t).clone(),
                };
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    SufficientStatistic {
        spec,
        n_y: p.y.iter().map(|&y| u32::from(y)).sum(),
        counts,
    }
}

/// Compute `(t_rho, t_beta)` for a valid path. The `t = 1` terms use the
/// initial condition: `y_0 y_1` and, under Spec1, `x_1 y_1` with `x_1` taken
/// from the initial condition.
pub fn target_stats(p: &Path) -> TargetStats {
    let t_max = p.horizon();
    let mut t_rho: u32 = 0;
    let mut t_beta = Rational::from_integer(0.into());
    for t in 1..=t_max {
        t_rho += u32::from(p.y_at(t - 1) & p.y_at(t));
        if p.y_at(t) == 1 {
            t_beta += p.x_at(t);
        }
    }
    TargetStats { t_rho, t_beta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rational_from_int, validate_path, InitialCondition, Support};

    fn r(n: i64) -> Rational {
        rational_from_int(n)
    }

    /// Spec1 worked sequence A: y0=0, (x,y) = (1,0),(1,1),(1,1).
    fn spec1_seq_a() -> Path {
        Path {
            init: InitialCondition::spec1(0, r(1)),
            x: vec![r(1), r(1)],
            y: vec![0, 1, 1],
        }
    }

    /// Spec1 worked sequence B: y0=0, (x,y) = (1,1),(1,0),(1,1).
    fn spec1_seq_b() -> Path {
        Path {
            init: InitialCondition::spec1(0, r(1)),
            x: vec![r(1), r(1)],
            y: vec![1, 0, 1],
        }
    }

    #[test]
    fn spec1_sequence_a_statistic() {
        let p = spec1_seq_a();
        assert!(validate_path(&p, &Support::canonical(2).unwrap(), FeedbackSpec::Spec1).is_valid());
        let s = sufficient_statistic(&p);
        assert_eq!(s.n_y, 2);
        let mut expected = BTreeMap::new();
        expected.insert(
            TransitionKey::Triple {
                x_from: r(1),
                y: 0,
                x_to: r(1),
            },
            1,
        );
        expected.insert(
            TransitionKey::Triple {
                x_from: r(1),
                y: 1,
                x_to: r(1),
            },
            1,
        );
        assert_eq!(s.counts, expected);
        assert_eq!(s.total_transitions(), 2);
    }

    #[test]
    fn spec2_sequence_a_statistic() {
        // Worked example for T=2: y0=1, (x,y) = (1,1),(0,0).
        let p = Path {
            init: InitialCondition::spec2(1),
            x: vec![r(1), r(0)],
            y: vec![1, 0],
        };
        let s = sufficient_statistic(&p);
        assert_eq!(s.n_y, 1);
        let mut expected = BTreeMap::new();
        expected.insert(TransitionKey::Pair { y: 1, x: r(1) }, 1);
        expected.insert(TransitionKey::Pair { y: 1, x: r(0) }, 1);
        assert_eq!(s.counts, expected);
    }

    #[test]
    fn constant_zero_path_statistic() {
        for t_max in 1..=5 {
            let p = Path {
                init: InitialCondition::spec2(0),
                x: vec![r(0); t_max],
                y: vec![0; t_max],
            };
            let s = sufficient_statistic(&p);
            assert_eq!(s.n_y, 0);
            assert_eq!(s.counts.len(), 1);
            assert_eq!(
                s.counts[&TransitionKey::Pair { y: 0, x: r(0) }],
                t_max as u32
            );
        }
    }

    #[test]
    fn spec1_target_stats_match_worked_example() {
        let a = target_stats(&spec1_seq_a());
        let b = target_stats(&spec1_seq_b());
        assert_eq!(a.t_rho, 1);
        assert_eq!(b.t_rho, 0);
        // Hand sum of x_t y_t is 2 for both sequences.
        assert_eq!(a.t_beta, r(2));
        assert_eq!(b.t_beta, r(2));
    }

    #[test]
    fn transition_counts_sum_to_horizon() {
        // Spec1 counts T-1 triples, Spec2 counts T pairs.
        let s1 = sufficient_statistic(&spec1_seq_a());
        assert_eq!(s1.total_transitions(), 2);
        let p2 = Path {
            init: InitialCondition::spec2(0),
            x: vec![r(1), r(0), r(1)],
            y: vec![1, 1, 0],
        };
        let s2 = sufficient_statistic(&p2);
        assert_eq!(s2.total_transitions(), 3);
    }

    #[test]
    fn counts_iterate_in_lexicographic_key_order() {
        let p = Path {
            init: InitialCondition::spec2(1),
            x: vec![r(1), r(0), r(1), r(0)],
            y: vec![0, 1, 1, 0],
        };
        let s = sufficient_statistic(&p);
        let keys: Vec<_> = s.counts.keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
