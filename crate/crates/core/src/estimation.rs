//! Conditional maximum likelihood estimation: safeguarded Newton ascent over
//! the identified parameter subspace, Wald standard errors from the
//! conditional observed information, and profile likelihood curves.

use thiserror::Error;

use crate::enumeration::EnumerationError;
use crate::identification::{dataset_identification, IdentificationReport};
use crate::likelihood::{sym_eigenvalues, CondLikContext, LikelihoodError};
use crate::model::{PanelDataset, Theta};

/// Condition-number ceiling beyond which the restricted information matrix
/// is treated as singular.
pub const SE_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Rho,
    Beta,
}

impl Component {
    pub fn token(&self) -> &'static str {
        match self {
            Component::Rho => "rho",
            Component::Beta => "beta",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "rho" => Some(Component::Rho),
            "beta" => Some(Component::Beta),
            _ => None,
        }
    }

    fn index(&self) -> usize {
        match self {
            Component::Rho => 0,
            Component::Beta => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence tolerance on the gradient norm over free components.
    pub tol: f64,
    pub max_iter: usize,
    /// Half-width of the compact parameter box.
    pub box_bound: f64,
    /// Start point; the objective is concave, so this affects only the
    /// iteration count.
    pub start: Theta,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-10,
            max_iter: 100,
            box_bound: 20.0,
            start: Theta::new(0.0, 0.0),
        }
    }
}

/// A fitted model. Non-identified components are reported as absent and are
/// held at zero inside the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub rho_std_err: Option<f64>,
    pub beta_std_err: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub n_informative_blocks: usize,
    /// Some free component ended on the boundary of the parameter box.
    pub at_boundary: bool,
    pub log_lik: f64,
}

impl FitResult {
    /// The point estimate with absent components at their pinned value 0.
    pub fn theta(&self) -> Theta {
        Theta::new(self.rho.unwrap_or(0.0), self.beta.unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimationError {
    #[error("no identified parameters in sample")]
    NoIdentifiedParameters,
    #[error("not converged after {} iterations (gradient norm {})", .0.iterations, .0.final_grad_norm)]
    NotConverged(Box<FitResult>),
    #[error("singular information (condition number {condition:e})")]
    SingularInformation { condition: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

struct InnerFit {
    theta: Theta,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    at_boundary: bool,
}

fn get(theta: Theta, k: usize) -> f64 {
    if k == 0 {
        theta.rho
    } else {
        theta.beta
    }
}

fn set(theta: &mut Theta, k: usize, v: f64) {
    if k == 0 {
        theta.rho = v;
    } else {
        theta.beta = v;
    }
}

// Newton ascent with backtracking (halving) line search under the Armijo
// condition, restricted to the `free` components; the others stay at their
// value in `start`. Steps are projected into the parameter box.
fn maximize(ctx: &CondLikContext, free: [bool; 2], start: Theta, opts: &FitOptions) -> InnerFit {
    let bound = opts.box_bound;
    let clamp = |mut th: Theta| {
        for k in 0..2 {
            if free[k] {
                let v = get(th, k).clamp(-bound, bound);
                set(&mut th, k, v);
            }
        }
        th
    };
    let mut theta = clamp(start);
    let mut value = ctx.log_lik(theta);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let g_full = ctx.score(theta);
        let g = [
            if free[0] { g_full[0] } else { 0.0 },
            if free[1] { g_full[1] } else { 0.0 },
        ];
        let grad_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if grad_norm <= opts.tol {
            converged = true;
            return finish(theta, value, grad_norm, iterations, converged, free, bound);
        }
        if iterations >= opts.max_iter {
            return finish(theta, value, grad_norm, iterations, converged, free, bound);
        }
        let h = ctx.hessian(theta);
        let mut dir = newton_direction(&g, &h, free);
        let mut slope = dir[0] * g[0] + dir[1] * g[1];
        if slope.is_nan() || slope <= 0.0 || !dir.iter().all(|d| d.is_finite()) {
            // Hessian numerically flat: fall back to steepest ascent.
            dir = g;
            slope = grad_norm * grad_norm;
        }
        // Near the maximizer the predicted gain drops below the rounding
        // resolution of the objective; the Armijo test is therefore relaxed
        // by the objective's evaluation noise floor so the (damped) Newton
        // step still goes through and the gradient keeps contracting. The
        // objective is a difference of terms of magnitude ~|theta . stat_sum|,
        // which sets the floor, not the final value.
        let ss = ctx.stat_sum();
        let noise = 4.0 * f64::EPSILON * (1.0 + value.abs() + theta.dot(ss[0], ss[1]).abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = theta;
            for k in 0..2 {
                if free[k] {
                    set(&mut cand, k, get(theta, k) + step * dir[k]);
                }
            }
            let cand = clamp(cand);
            if cand.rho == theta.rho && cand.beta == theta.beta {
                step *= 0.5;
                continue;
            }
            let cand_value = ctx.log_lik(cand);
            if cand_value >= value + 1e-4 * step * slope - noise {
                theta = cand;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // Line search stalled (typically pinned at the box boundary).
            return finish(theta, value, grad_norm, iterations, converged, free, bound);
        }
    }
}

fn finish(
    theta: Theta,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    free: [bool; 2],
    bound: f64,
) -> InnerFit {
    let at_boundary = (0..2).any(|k| free[k] && get(theta, k).abs() >= bound - 1e-9);
    InnerFit {
        theta,
        value,
        grad_norm,
        iterations,
        converged,
        at_boundary,
    }
}

// Solve H d = -g on the free subspace of the (concave) objective.
fn newton_direction(g: &[f64; 2], h: &[[f64; 2]; 2], free: [bool; 2]) -> [f64; 2] {
    match (free[0], free[1]) {
        (true, true) => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det.abs() < 1e-300 {
                return [f64::NAN, f64::NAN];
            }
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        }
        (true, false) => [
            if h[0][0] != 0.0 {
                -g[0] / h[0][0]
            } else {
                f64::NAN
            },
            0.0,
        ],
        (false, true) => [
            0.0,
            if h[1][1] != 0.0 {
                -g[1] / h[1][1]
            } else {
                f64::NAN
            },
        ],
        (false, false) => [0.0, 0.0],
    }
}

/// Maximize the conditional log-likelihood over the components identified in
/// the sample, holding the others at zero.
pub fn fit_cmle(ds: &PanelDataset, opts: &FitOptions) -> Result<FitResult, EstimationError> {
    let report = dataset_identification(ds)?;
    fit_cmle_with_report(ds, opts, &report)
}

/// Variant that reuses an already-computed identification report.
pub fn fit_cmle_with_report(
    ds: &PanelDataset,
    opts: &FitOptions,
    report: &IdentificationReport,
) -> Result<FitResult, EstimationError> {
    let free = [report.rho_identified, report.beta_identified];
    if !free[0] && !free[1] {
        return Err(EstimationError::NoIdentifiedParameters);
    }
    let ctx = CondLikContext::for_dataset(ds)?;
    let mut start = opts.start;
    for k in 0..2 {
        if !free[k] {
            set(&mut start, k, 0.0);
        }
    }
    let inner = maximize(&ctx, free, start, opts);
    let mut fit = FitResult {
        rho: free[0].then_some(inner.theta.rho),
        beta: free[1].then_some(inner.theta.beta),
        rho_std_err: None,
        beta_std_err: None,
        converged: inner.converged,
        iterations: inner.iterations,
        final_grad_norm: inner.grad_norm,
        n_informative_blocks: ctx.n_informative_blocks(),
        at_boundary: inner.at_boundary,
        log_lik: inner.value,
    };
    if fit.converged {
        // A singular information matrix leaves the standard errors absent
        // without failing the fit.
        if let Ok((rho_se, beta_se)) = std_errors(&fit, ds, &ctx) {
            fit.rho_std_err = rho_se;
            fit.beta_std_err = beta_se;
        }
        Ok(fit)
    } else {
        Err(EstimationError::NotConverged(Box::new(fit)))
    }
}

/// Wald standard errors: square roots of the diagonal of the inverse
/// negative Hessian restricted to the free components.
pub fn std_errors(
    fit: &FitResult,
    ds: &PanelDataset,
    ctx: &CondLikContext,
) -> Result<(Option<f64>, Option<f64>), EstimationError> {
    if !fit.converged {
        return Err(EstimationError::NotConverged(Box::new(fit.clone())));
    }
    let h = crate::likelihood::hessian(fit.theta(), ds, ctx)?;
    let free = [fit.rho.is_some(), fit.beta.is_some()];
    match (free[0], free[1]) {
        (true, true) => {
            let info = [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]];
            let eig = sym_eigenvalues(&info);
            let condition = if eig[1] > 0.0 {
                eig[0] / eig[1]
            } else {
                f64::INFINITY
            };
            if eig[1].is_nan() || eig[1] <= 0.0 || condition > SE_CONDITION_LIMIT {
                return Err(EstimationError::SingularInformation { condition });
            }
            let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
            Ok((
                Some((info[1][1] / det).sqrt()),
                Some((info[0][0] / det).sqrt()),
            ))
        }
        (true, false) | (false, true) => {
            let k = usize::from(free[1]);
            let a = -h[k][k];
            if a.is_nan() || a <= 0.0 || !a.is_finite() {
                return Err(EstimationError::SingularInformation {
                    condition: f64::INFINITY,
                });
            }
            let se = Some(1.0 / a.sqrt());
            Ok(if k == 0 { (se, None) } else { (None, se) })
        }
        (false, false) => Err(EstimationError::NoIdentifiedParameters),
    }
}

/// Profile likelihood of one component over a grid: at each grid value the
/// other component is re-maximized, or held at zero when it is itself
/// non-identified in the sample.
pub fn profile(
    ds: &PanelDataset,
    component: Component,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, EstimationError> {
    profile_with_options(ds, component, grid, &FitOptions::default())
}

pub fn profile_with_options(
    ds: &PanelDataset,
    component: Component,
    grid: &[f64],
    opts: &FitOptions,
) -> Result<Vec<(f64, f64)>, EstimationError> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    for v in grid {
        if !v.is_finite() || v.abs() > opts.box_bound {
            return Err(EstimationError::InvalidGrid(format!(
                "grid value {v} outside the parameter box [{}, {}]",
                -opts.box_bound, opts.box_bound
            )));
        }
    }
    let report = dataset_identification(ds)?;
    let ctx = CondLikContext::for_dataset(ds)?;
    let this = component.index();
    let other = 1 - this;
    let other_free = if other == 0 {
        report.rho_identified
    } else {
        report.beta_identified
    };
    let mut out = Vec::with_capacity(grid.len());
    for &v in grid {
        let mut start = Theta::new(0.0, 0.0);
        set(&mut start, this, v);
        let value = if other_free {
            let mut free = [false, false];
            free[other] = true;
            maximize(&ctx, free, start, opts).value
        } else {
            ctx.log_lik(start)
        };
        out.push((v, value));
    }
    Ok(out)
}
