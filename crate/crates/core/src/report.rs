//! Machine-readable report envelopes with canonical JSON emission: sorted
//! keys, fixed float formatting with 17 significant digits, no whitespace.
//! Identical inputs produce byte-identical reports.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::estimation::FitResult;
use crate::identification::{IdentificationReport, InitSummary, Witness};
use crate::model::{rational_to_string, InitialCondition, PanelDataset, Support};
use crate::simulation::{ComponentSummary, FlatnessSummary, MonteCarloSummary};
use crate::stats::{SufficientStatistic, TargetStats, TransitionKey};

/// Versioned wrapper around one command's payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportEnvelope {
    pub tool_version: String,
    pub command: String,
    pub input_digest: String,
    /// Taken from `SOURCE_DATE_EPOCH` when set (seconds since the epoch);
    /// absent otherwise so reports stay byte-reproducible.
    pub timestamp: Option<String>,
    pub payload: Value,
}

impl ReportEnvelope {
    pub fn new(command: &str, input_digest: String, payload: Value) -> Self {
        ReportEnvelope {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input_digest,
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            payload,
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "tool_version": self.tool_version,
            "command": self.command,
            "input_digest": self.input_digest,
            "timestamp": self.timestamp,
            "payload": self.payload,
        })
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(&self.to_value())
    }
}

/// SHA-256 over the concatenation of the given byte chunks, hex-encoded.
pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

/// Fixed float formatting: 17 significant digits in scientific notation,
/// which round-trips every finite f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Serialize a JSON value canonically: object keys sorted, floats through
/// `format_float`, integers verbatim, compact separators.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                match n.as_f64() {
                    Some(f) if f.is_finite() => out.push_str(&format_float(f)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serialization"));
                out.push(':');
                write_value(out, &map[*key]);
            }
            out.push('}');
        }
    }
}

fn opt_f64(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => Value::Null,
    }
}

fn support_value(support: &Support) -> Value {
    Value::Array(
        support
            .values()
            .iter()
            .map(|v| Value::String(rational_to_string(v)))
            .collect(),
    )
}

fn init_value(init: &InitialCondition) -> Value {
    json!({
        "y0": init.y0,
        "x1": init.x1.as_ref().map(rational_to_string),
    })
}

fn stat_value(stat: &SufficientStatistic) -> Value {
    let counts: Vec<Value> = stat
        .counts
        .iter()
        .map(|(key, count)| {
            let key_value = match key {
                TransitionKey::Triple { x_from, y, x_to } => {
                    json!([rational_to_string(x_from), y, rational_to_string(x_to)])
                }
                TransitionKey::Pair { y, x } => json!([y, rational_to_string(x)]),
            };
            json!({"key": key_value, "count": count})
        })
        .collect();
    json!({"n_y": stat.n_y, "counts": counts})
}

fn member_value(path: &crate::model::Path, stats: &TargetStats) -> Value {
    json!({
        "x": (1..=path.horizon()).map(|t| rational_to_string(path.x_at(t))).collect::<Vec<_>>(),
        "y": path.y.clone(),
        "t_rho": stats.t_rho,
        "t_beta": rational_to_string(&stats.t_beta),
    })
}

fn witness_value(witness: &Option<Witness>) -> Value {
    match witness {
        None => Value::Null,
        Some(w) => json!({
            "init": init_value(&w.init),
            "stat": stat_value(&w.stat),
            "member_a": member_value(&w.member_a.0, &w.member_a.1),
            "member_b": member_value(&w.member_b.0, &w.member_b.1),
        }),
    }
}

fn init_summary_value(summary: &InitSummary) -> Value {
    json!({
        "init": init_value(&summary.init),
        "n_paths": summary.n_paths,
        "n_blocks": summary.n_blocks,
        "n_informative_blocks": summary.n_informative_blocks,
        "t_rho_varies": summary.t_rho_varies,
        "t_beta_varies": summary.t_beta_varies,
    })
}

pub fn identification_payload(report: &IdentificationReport) -> Value {
    json!({
        "spec": report.spec.tag(),
        "T": report.horizon,
        "support": support_value(&report.support),
        "criterion": report.criterion.token(),
        "rho_identified": report.rho_identified,
        "beta_identified": report.beta_identified,
        "span_rank": report.span_rank,
        "witnesses": {
            "rho": witness_value(&report.rho_witness),
            "beta": witness_value(&report.beta_witness),
        },
        "per_init": report.per_init.iter().map(init_summary_value).collect::<Vec<_>>(),
    })
}

pub fn fit_payload(fit: &FitResult, ds: &PanelDataset) -> Value {
    json!({
        "spec": ds.spec.tag(),
        "T": ds.horizon,
        "N": ds.n(),
        "support": support_value(&ds.support),
        "rho": opt_f64(fit.rho),
        "beta": opt_f64(fit.beta),
        "rho_std_err": opt_f64(fit.rho_std_err),
        "beta_std_err": opt_f64(fit.beta_std_err),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "final_grad_norm": fit.final_grad_norm,
        "n_informative_blocks": fit.n_informative_blocks,
        "at_boundary": fit.at_boundary,
        "log_lik": fit.log_lik,
        "se_method": "wald_conditional_information",
    })
}

pub fn profile_payload(
    ds: &PanelDataset,
    component: crate::estimation::Component,
    points: &[(f64, f64)],
) -> Value {
    json!({
        "spec": ds.spec.tag(),
        "T": ds.horizon,
        "N": ds.n(),
        "component": component.token(),
        "points": points
            .iter()
            .map(|(v, ll)| json!({"value": v, "log_lik": ll}))
            .collect::<Vec<_>>(),
    })
}

fn component_summary_value(summary: &Option<ComponentSummary>) -> Value {
    match summary {
        None => Value::Null,
        Some(s) => json!({
            "n_estimated": s.n_estimated,
            "bias": s.bias,
            "rmse": s.rmse,
            "median_abs_error": s.median_abs_error,
            "mean_std_err": opt_f64(s.mean_std_err),
            "coverage95": opt_f64(s.coverage95),
        }),
    }
}

fn flatness_value(summary: &Option<FlatnessSummary>) -> Value {
    match summary {
        None => Value::Null,
        Some(s) => json!({
            "n_absent": s.n_absent,
            "max_abs_score": s.max_abs_score,
        }),
    }
}

pub fn monte_carlo_payload(summary: &MonteCarloSummary) -> Value {
    json!({
        "theta0": {"rho": summary.theta0.rho, "beta": summary.theta0.beta},
        "reps": summary.reps,
        "n_converged": summary.n_converged,
        "n_not_converged": summary.n_not_converged,
        "n_no_identification": summary.n_no_identification,
        "rho": component_summary_value(&summary.rho),
        "beta": component_summary_value(&summary.beta),
        "rho_flatness": flatness_value(&summary.rho_flatness),
        "beta_flatness": flatness_value(&summary.beta_flatness),
        "settings_source": "user_config",
    })
}

pub fn simulate_payload(ds: &PanelDataset, seed: u64, dataset_digest: &str) -> Value {
    json!({
        "spec": ds.spec.tag(),
        "T": ds.horizon,
        "N": ds.n(),
        "seed": seed,
        "dataset_digest": dataset_digest,
        "settings_source": "user_config",
    })
}
