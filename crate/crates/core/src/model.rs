//! Core domain vocabulary: parameters, feedback specifications, covariate
//! supports, initial conditions, paths, and panel datasets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

/// Exact rational scalar used for covariate values and covariate statistics.
///
/// Covariates are kept exact end to end so that statements like "these two
/// sequences have the same value of `sum x_t y_t`" are decidable equalities
/// rather than float comparisons.
pub type Rational = BigRational;

/// Parse a rational literal: an integer (`3`, `-2`) or a fraction (`p/q`).
pub fn parse_rational(s: &str) -> Result<Rational, ModelError> {
    let s = s.trim();
    let bad = || ModelError::BadRational(s.to_string());
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (
            n.trim().parse::<BigInt>().map_err(|_| bad())?,
            d.trim().parse::<BigInt>().map_err(|_| bad())?,
        ),
        None => (s.parse::<BigInt>().map_err(|_| bad())?, BigInt::from(1)),
    };
    if denom.is_zero() {
        return Err(ModelError::BadRational(s.to_string()));
    }
    Ok(Rational::new(numer, denom))
}

/// Render a rational as the literal `parse_rational` accepts (`3` or `p/q`).
pub fn rational_to_string(r: &Rational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_from_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Errors raised when constructing core domain values.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid rational literal `{0}` (expected an integer or p/q)")]
    BadRational(String),
    #[error("support must contain at least two values, got {0}")]
    SupportTooSmall(usize),
    #[error("support values must be strictly increasing")]
    SupportNotIncreasing,
    #[error("panel must contain at least one individual")]
    EmptyPanel,
    #[error("panel paths must share a common horizon (found {0} and {1})")]
    MixedHorizon(usize, usize),
    #[error("invalid path for individual {id}: {violations}")]
    InvalidPath { id: String, violations: String },
    #[error("individual ids must be unique and match the number of paths")]
    BadIds,
}

/// The structural parameter pair of the binary choice equation: `rho` on the
/// lagged outcome, `beta` on the covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub rho: f64,
    pub beta: f64,
}

impl Theta {
    pub fn new(rho: f64, beta: f64) -> Self {
        Theta { rho, beta }
    }

    /// Inner product with a statistic pair `(t_rho, t_beta)`.
    pub fn dot(&self, t_rho: f64, t_beta: f64) -> f64 {
        self.rho * t_rho + self.beta * t_beta
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.beta.is_finite()
    }
}

/// Which first-order Markov feedback process generates the covariate.
///
/// Under `Spec1` the kernel conditions on the previous covariate and outcome
/// `(x_{t-1}, y_{t-1})`; under `Spec2` it conditions on `y_{t-1}` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeedbackSpec {
    Spec1,
    Spec2,
}

impl FeedbackSpec {
    /// Numeric tag used on the command line and in reports.
    pub fn tag(&self) -> u8 {
        match self {
            FeedbackSpec::Spec1 => 1,
            FeedbackSpec::Spec2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(FeedbackSpec::Spec1),
            2 => Some(FeedbackSpec::Spec2),
            _ => None,
        }
    }
}

/// Finite, strictly increasing covariate support.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Support {
    values: Vec<Rational>,
}

impl Support {
    pub fn new(values: Vec<Rational>) -> Result<Self, ModelError> {
        if values.len() < 2 {
            return Err(ModelError::SupportTooSmall(values.len()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::SupportNotIncreasing);
        }
        Ok(Support { values })
    }

    /// The default support `{0, 1, ..., size-1}`.
    pub fn canonical(size: usize) -> Result<Self, ModelError> {
        Support::new((0..size).map(|k| rational_from_int(k as i64)).collect())
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: &Rational) -> bool {
        self.index_of(v).is_some()
    }

    pub fn index_of(&self, v: &Rational) -> Option<usize> {
        self.values.binary_search(v).ok()
    }

    pub fn value(&self, index: usize) -> &Rational {
        &self.values[index]
    }
}

/// The conditioning information observed before period 1: always the initial
/// outcome `y0`, plus the first covariate `x1` when the feedback kernel
/// conditions on the lagged covariate (`Spec1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InitialCondition {
    pub y0: u8,
    pub x1: Option<Rational>,
}

impl InitialCondition {
    pub fn spec2(y0: u8) -> Self {
        InitialCondition { y0, x1: None }
    }

    pub fn spec1(y0: u8, x1: Rational) -> Self {
        InitialCondition { y0, x1: Some(x1) }
    }

    /// The spec this initial condition is shaped for.
    pub fn implied_spec(&self) -> FeedbackSpec {
        if self.x1.is_some() {
            FeedbackSpec::Spec1
        } else {
            FeedbackSpec::Spec2
        }
    }
}

/// One individual's realized history.
///
/// `y` covers periods `1..=T`. `x` covers periods `2..=T` when the initial
/// condition carries `x1` (Spec1) and periods `1..=T` otherwise (Spec2). The
/// initial-condition period 0 is not counted toward the horizon `T`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub init: InitialCondition,
    pub x: Vec<Rational>,
    pub y: Vec<u8>,
}

impl Path {
    /// The horizon `T` (number of modeled periods after the initial one).
    pub fn horizon(&self) -> usize {
        self.y.len()
    }

    /// Covariate at period `t` for `t` in `1..=T`, resolving `x1` from the
    /// initial condition under Spec1.
    pub fn x_at(&self, t: usize) -> &Rational {
        debug_assert!(t >= 1 && t <= self.horizon());
        match &self.init.x1 {
            Some(x1) => {
                if t == 1 {
                    x1
                } else {
                    &self.x[t - 2]
                }
            }
            None => &self.x[t - 1],
        }
    }

    /// Outcome at period `t` for `t` in `0..=T`.
    pub fn y_at(&self, t: usize) -> u8 {
        if t == 0 {
            self.init.y0
        } else {
            self.y[t - 1]
        }
    }
}

/// Outcome of validating a path against a support and feedback spec.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationVerdict {
    pub violations: Vec<String>,
}

impl ValidationVerdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every structural invariant of a path; total function, never errors.
pub fn validate_path(p: &Path, support: &Support, spec: FeedbackSpec) -> ValidationVerdict {
    let mut violations = Vec::new();
    let t = p.horizon();
    if t < 1 {
        violations.push("horizon must be at least 1".to_string());
    }
    match spec {
        FeedbackSpec::Spec1 => {
            if p.init.x1.is_none() {
                violations.push("x1 required under Spec1".to_string());
            }
            if t >= 1 && p.x.len() != t - 1 {
                violations.push(format!(
                    "expected {} covariate values for periods 2..=T, got {}",
                    t - 1,
                    p.x.len()
                ));
            }
        }
        FeedbackSpec::Spec2 => {
            if p.init.x1.is_some() {
                violations.push("x1 must be absent under Spec2".to_string());
            }
            if p.x.len() != t {
                violations.push(format!(
                    "expected {} covariate values for periods 1..=T, got {}",
                    t,
                    p.x.len()
                ));
            }
        }
    }
    if p.init.y0 > 1 {
        violations.push(format!("initial outcome {} is not binary", p.init.y0));
    }
    for (k, y) in p.y.iter().enumerate() {
        if *y > 1 {
            violations.push(format!("outcome {} at period {} is not binary", y, k + 1));
        }
    }
    if let Some(x1) = &p.init.x1 {
        if !support.contains(x1) {
            violations.push(format!(
                "covariate off support: x1 = {}",
                rational_to_string(x1)
            ));
        }
    }
    for (k, v) in p.x.iter().enumerate() {
        if !support.contains(v) {
            violations.push(format!(
                "covariate off support: x at position {} = {}",
                k,
                rational_to_string(v)
            ));
        }
    }
    ValidationVerdict { violations }
}

/// A balanced panel: `N` individuals observed over the same horizon, sharing
/// one feedback spec and one covariate support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelDataset {
    pub spec: FeedbackSpec,
    pub support: Support,
    pub horizon: usize,
    pub ids: Vec<String>,
    pub individuals: Vec<Path>,
}

impl PanelDataset {
    /// Build a dataset with ids `1..=N`, validating every path.
    pub fn new(
        spec: FeedbackSpec,
        support: Support,
        individuals: Vec<Path>,
    ) -> Result<Self, ModelError> {
        let ids = (1..=individuals.len()).map(|i| i.to_string()).collect();
        PanelDataset::with_ids(spec, support, ids, individuals)
    }

    pub fn with_ids(
        spec: FeedbackSpec,
        support: Support,
        ids: Vec<String>,
        individuals: Vec<Path>,
    ) -> Result<Self, ModelError> {
        if individuals.is_empty() {
            return Err(ModelError::EmptyPanel);
        }
        if ids.len() != individuals.len() {
            return Err(ModelError::BadIds);
        }
        {
            let mut seen = ids.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != ids.len() {
                return Err(ModelError::BadIds);
            }
        }
        let horizon = individuals[0].horizon();
        for (id, p) in ids.iter().zip(&individuals) {
            if p.horizon() != horizon {
                return Err(ModelError::MixedHorizon(horizon, p.horizon()));
            }
            let verdict = validate_path(p, &support, spec);
            if !verdict.is_valid() {
                return Err(ModelError::InvalidPath {
                    id: id.clone(),
                    violations: verdict.violations.join("; "),
                });
            }
        }
        Ok(PanelDataset {
            spec,
            support,
            horizon,
            ids,
            individuals,
        })
    }

    pub fn n(&self) -> usize {
        self.individuals.len()
    }
}
