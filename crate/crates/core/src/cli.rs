//! Command-line dispatch.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error, 3
//! non-convergence. Reports are canonical JSON on stdout unless `--out` is
//! given; `simulate` writes the panel CSV to `--out` and its report to
//! stdout. The environment variable `CONDPANEL_SEED` overrides the config
//! seed for `simulate` and `mc`.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::estimation::{fit_cmle, profile, Component, EstimationError, FitOptions};
use crate::identification::{check_identification, Criterion};
use crate::io::{load_panel_from_reader, parse_dgp_config};
use crate::model::{parse_rational, rational_to_string, FeedbackSpec, Support};
use crate::report::{
    fit_payload, identification_payload, monte_carlo_payload, profile_payload, sha256_hex,
    simulate_payload, ReportEnvelope,
};
use crate::simulation::{monte_carlo, simulate_panel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

pub const SEED_ENV_VAR: &str = "CONDPANEL_SEED";

#[derive(Parser)]
#[command(
    name = "condpanel",
    version,
    about = "Identification checks, conditional maximum likelihood estimation, and \
             simulation for dynamic panel logit models with Markov feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide which parameters are identified for a model class.
    Identify {
        /// Feedback spec: 1 (kernel on x and y) or 2 (kernel on y only).
        #[arg(long)]
        spec: u8,
        /// Horizon (periods after the initial condition).
        #[arg(long = "T")]
        t: usize,
        /// Comma-separated covariate support (integers or p/q rationals).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        support: Vec<String>,
        /// Identification criterion: per-stat or span.
        #[arg(long, default_value = "span")]
        criterion: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the conditional maximum likelihood estimator to a panel CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spec: u8,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        support: Vec<String>,
        /// Gradient-norm convergence tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile the conditional log-likelihood in one component.
    Profile {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spec: u8,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        support: Vec<String>,
        /// Component to profile: rho or beta.
        #[arg(long)]
        component: String,
        /// Grid as a:b:step (inclusive).
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a panel from a JSON DGP config; writes CSV to --out.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo study: repeated simulate + fit.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    NonConvergence(String),
}

impl Failure {
    fn validation(err: impl std::fmt::Display) -> Self {
        Failure::Validation(err.to_string())
    }

    fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::NonConvergence(_) => EXIT_NONCONVERGENCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::NonConvergence(m) => m,
        }
    }
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Identify {
            spec,
            t,
            support,
            criterion,
            out,
        } => {
            let spec = parse_spec(spec)?;
            let support = parse_support(&support)?;
            let criterion = Criterion::from_token(&criterion).ok_or_else(|| {
                Failure::Validation(format!(
                    "unknown criterion `{criterion}` (expected per-stat or span)"
                ))
            })?;
            if t < 1 {
                return Err(Failure::Validation("T must be at least 1".into()));
            }
            let report =
                check_identification(t, &support, spec, criterion).map_err(Failure::validation)?;
            let digest = sha256_hex(&[describe_identify(spec, t, &support, criterion).as_bytes()]);
            emit(
                ReportEnvelope::new("identify", digest, identification_payload(&report)),
                out.as_deref(),
            )
        }
        Command::Fit {
            data,
            spec,
            support,
            tol,
            out,
        } => {
            let spec = parse_spec(spec)?;
            let support = parse_support(&support)?;
            if tol.is_nan() || tol <= 0.0 || !tol.is_finite() {
                return Err(Failure::Validation(format!(
                    "tolerance must be positive, got {tol}"
                )));
            }
            let bytes = fs::read(&data).map_err(Failure::validation)?;
            let ds = load_panel_from_reader(bytes.as_slice(), spec, &support)
                .map_err(Failure::validation)?;
            let opts = FitOptions {
                tol,
                ..FitOptions::default()
            };
            let fit = match fit_cmle(&ds, &opts) {
                Ok(fit) => fit,
                Err(e @ EstimationError::NotConverged(_)) => {
                    return Err(Failure::NonConvergence(e.to_string()));
                }
                Err(e) => return Err(Failure::validation(e)),
            };
            let digest = sha256_hex(&[
                describe_fit(spec, &support, tol).as_bytes(),
                bytes.as_slice(),
            ]);
            emit(
                ReportEnvelope::new("fit", digest, fit_payload(&fit, &ds)),
                out.as_deref(),
            )
        }
        Command::Profile {
            data,
            spec,
            support,
            component,
            grid,
            out,
        } => {
            let spec = parse_spec(spec)?;
            let support = parse_support(&support)?;
            let component = Component::from_token(&component).ok_or_else(|| {
                Failure::Validation(format!(
                    "unknown component `{component}` (expected rho or beta)"
                ))
            })?;
            let grid_values = parse_grid(&grid).map_err(Failure::Validation)?;
            let bytes = fs::read(&data).map_err(Failure::validation)?;
            let ds = load_panel_from_reader(bytes.as_slice(), spec, &support)
                .map_err(Failure::validation)?;
            let points = match profile(&ds, component, &grid_values) {
                Ok(points) => points,
                Err(e @ EstimationError::NotConverged(_)) => {
                    return Err(Failure::NonConvergence(e.to_string()));
                }
                Err(e) => return Err(Failure::validation(e)),
            };
            let digest = sha256_hex(&[
                describe_profile(spec, &support, component, &grid).as_bytes(),
                bytes.as_slice(),
            ]);
            emit(
                ReportEnvelope::new("profile", digest, profile_payload(&ds, component, &points)),
                out.as_deref(),
            )
        }
        Command::Simulate { config, out } => {
            let bytes = fs::read(&config).map_err(Failure::validation)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Failure::Validation("config is not UTF-8".into()))?;
            let mut cfg = parse_dgp_config(&text).map_err(Failure::validation)?;
            apply_seed_override(&mut cfg.seed)?;
            let ds = simulate_panel(&cfg).map_err(Failure::validation)?;
            let csv = crate::io::panel_to_csv_string(&ds);
            fs::write(&out, &csv).map_err(Failure::validation)?;
            let digest = sha256_hex(&[
                b"simulate\n",
                bytes.as_slice(),
                format!("\nseed={}", cfg.seed).as_bytes(),
            ]);
            let payload = simulate_payload(&ds, cfg.seed, &sha256_hex(&[csv.as_bytes()]));
            emit(ReportEnvelope::new("simulate", digest, payload), None)
        }
        Command::Mc { config, reps, out } => {
            let bytes = fs::read(&config).map_err(Failure::validation)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Failure::Validation("config is not UTF-8".into()))?;
            let mut cfg = parse_dgp_config(&text).map_err(Failure::validation)?;
            apply_seed_override(&mut cfg.seed)?;
            let summary =
                monte_carlo(&cfg, reps, &FitOptions::default()).map_err(Failure::validation)?;
            let digest = sha256_hex(&[
                b"mc\n",
                bytes.as_slice(),
                format!("\nreps={}\nseed={}", reps, cfg.seed).as_bytes(),
            ]);
            emit(
                ReportEnvelope::new("mc", digest, monte_carlo_payload(&summary)),
                out.as_deref(),
            )
        }
    }
}

fn parse_spec(tag: u8) -> Result<FeedbackSpec, Failure> {
    FeedbackSpec::from_tag(tag)
        .ok_or_else(|| Failure::Validation(format!("spec must be 1 or 2, got {tag}")))
}

fn parse_support(tokens: &[String]) -> Result<Support, Failure> {
    let values = tokens
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::validation)?;
    Support::new(values).map_err(Failure::validation)
}

/// Inclusive grid `a:b:step`.
fn parse_grid(grid: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be a:b:step, got `{grid}`"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| format!("invalid grid number `{p}`"))
        })
        .collect::<Result<_, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !a.is_finite() || !b.is_finite() || !step.is_finite() || step <= 0.0 {
        return Err("grid bounds must be finite with a positive step".into());
    }
    if b < a {
        return Err("grid upper bound is below the lower bound".into());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| a + step * k as f64).collect())
}

fn apply_seed_override(seed: &mut u64) -> Result<(), Failure> {
    if let Ok(text) = std::env::var(SEED_ENV_VAR) {
        *seed = text.trim().parse::<u64>().map_err(|_| {
            Failure::Validation(format!(
                "{SEED_ENV_VAR} must be an unsigned integer, got `{text}`"
            ))
        })?;
    }
    Ok(())
}

fn describe_identify(
    spec: FeedbackSpec,
    t: usize,
    support: &Support,
    criterion: Criterion,
) -> String {
    format!(
        "identify\nspec={}\nT={}\nsupport={}\ncriterion={}",
        spec.tag(),
        t,
        support_tokens(support),
        criterion.token()
    )
}

fn describe_fit(spec: FeedbackSpec, support: &Support, tol: f64) -> String {
    format!(
        "fit\nspec={}\nsupport={}\ntol={}\n",
        spec.tag(),
        support_tokens(support),
        crate::report::format_float(tol)
    )
}

fn describe_profile(
    spec: FeedbackSpec,
    support: &Support,
    component: Component,
    grid: &str,
) -> String {
    format!(
        "profile\nspec={}\nsupport={}\ncomponent={}\ngrid={}\n",
        spec.tag(),
        support_tokens(support),
        component.token(),
        grid
    )
}

fn support_tokens(support: &Support) -> String {
    support
        .values()
        .iter()
        .map(rational_to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn emit(envelope: ReportEnvelope, out: Option<&std::path::Path>) -> Result<(), Failure> {
    let mut text = envelope.to_canonical_json();
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(Failure::validation),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_is_inclusive() {
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("-1:1:1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }
}
