//! Panel CSV ingestion and emission, and JSON configuration loading for the
//! simulator.
//!
//! Panel format: columns `id,t,x,y`, one row per (individual, period) for
//! `t = 0..=T`. `x` is empty at `t = 0` and a rational literal (integer or
//! `p/q`) on the declared support elsewhere; `y` is 0 or 1. The horizon is
//! inferred and must be uniform across individuals.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path as FsPath;

use serde::Deserialize;
use thiserror::Error;

use crate::likelihood::{kernel_row_keys, FeedbackKernel, KernelRowKey};
use crate::model::{
    parse_rational, rational_to_string, FeedbackSpec, InitialCondition, ModelError, PanelDataset,
    Path, Rational, Support,
};
use crate::simulation::{DGPConfig, Heterogeneity, KernelLaw};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("line {line}: covariate off support: {value}")]
    OffSupport { line: u64, value: String },
    #[error("line {line}: y must be 0 or 1, got `{value}`")]
    NonBinaryY { line: u64, value: String },
    #[error("ragged panel: {0}")]
    RaggedPanel(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct RowData {
    x: Option<Rational>,
    y: u8,
}

/// Load a panel CSV against a declared spec and support.
pub fn load_panel(
    path: &FsPath,
    spec: FeedbackSpec,
    support: &Support,
) -> Result<PanelDataset, IoError> {
    let file = fs::File::open(path)?;
    load_panel_from_reader(file, spec, support)
}

pub fn load_panel_from_reader<R: Read>(
    reader: R,
    spec: FeedbackSpec,
    support: &Support,
) -> Result<PanelDataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = rdr.headers()?;
        let expected = ["id", "t", "x", "y"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(IoError::MalformedRow {
                line: 1,
                msg: format!(
                    "expected header `id,t,x,y`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, BTreeMap<usize, RowData>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(IoError::MalformedRow {
                line,
                msg: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(IoError::MalformedRow {
                line,
                msg: "empty id".into(),
            });
        }
        let t: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| IoError::MalformedRow {
                line,
                msg: format!("invalid period `{}`", &record[1]),
            })?;
        let x_field = record[2].trim();
        let x = if t == 0 {
            if !x_field.is_empty() {
                return Err(IoError::MalformedRow {
                    line,
                    msg: "x must be empty at t = 0".into(),
                });
            }
            None
        } else {
            if x_field.is_empty() {
                return Err(IoError::MalformedRow {
                    line,
                    msg: format!("missing covariate at t = {t}"),
                });
            }
            let value = parse_rational(x_field).map_err(|e| IoError::MalformedRow {
                line,
                msg: e.to_string(),
            })?;
            if !support.contains(&value) {
                return Err(IoError::OffSupport {
                    line,
                    value: x_field.to_string(),
                });
            }
            Some(value)
        };
        let y: u8 = match record[3].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(IoError::NonBinaryY {
                    line,
                    value: other.to_string(),
                });
            }
        };
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        let individual = rows.entry(id.clone()).or_default();
        if individual.insert(t, RowData { x, y }).is_some() {
            return Err(IoError::MalformedRow {
                line,
                msg: format!("duplicate row for id `{id}`, t = {t}"),
            });
        }
    }

    if order.is_empty() {
        return Err(IoError::RaggedPanel("no data rows".into()));
    }
    let horizon = *rows[&order[0]].keys().max().unwrap();
    if horizon == 0 {
        return Err(IoError::RaggedPanel(format!(
            "individual `{}` has only the initial-condition period",
            order[0]
        )));
    }

    let mut ids = Vec::with_capacity(order.len());
    let mut paths = Vec::with_capacity(order.len());
    for id in order {
        let individual = &rows[&id];
        let max_t = *individual.keys().max().unwrap();
        if max_t != horizon {
            return Err(IoError::RaggedPanel(format!(
                "individual `{id}` observed through t = {max_t}, expected t = {horizon}"
            )));
        }
        for t in 0..=horizon {
            if !individual.contains_key(&t) {
                return Err(IoError::RaggedPanel(format!(
                    "individual `{id}` is missing period t = {t}"
                )));
            }
        }
        let y0 = individual[&0].y;
        let init = match spec {
            FeedbackSpec::Spec1 => {
                InitialCondition::spec1(y0, individual[&1].x.clone().expect("validated above"))
            }
            FeedbackSpec::Spec2 => InitialCondition::spec2(y0),
        };
        let x_start = match spec {
            FeedbackSpec::Spec1 => 2,
            FeedbackSpec::Spec2 => 1,
        };
        let x: Vec<Rational> = (x_start..=horizon)
            .map(|t| individual[&t].x.clone().expect("validated above"))
            .collect();
        let y: Vec<u8> = (1..=horizon).map(|t| individual[&t].y).collect();
        ids.push(id);
        paths.push(Path { init, x, y });
    }
    Ok(PanelDataset::with_ids(spec, support.clone(), ids, paths)?)
}

/// Serialize a dataset in the panel CSV format.
pub fn panel_to_csv_string(ds: &PanelDataset) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["id", "t", "x", "y"])
        .expect("in-memory write");
    for (id, p) in ds.ids.iter().zip(&ds.individuals) {
        wtr.write_record([id.as_str(), "0", "", &p.init.y0.to_string()])
            .expect("in-memory write");
        for t in 1..=ds.horizon {
            wtr.write_record([
                id.as_str(),
                &t.to_string(),
                &rational_to_string(p.x_at(t)),
                &p.y_at(t).to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(wtr.into_inner().expect("in-memory write")).expect("utf8")
}

pub fn write_panel(ds: &PanelDataset, path: &FsPath) -> Result<(), IoError> {
    fs::write(path, panel_to_csv_string(ds))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// DGP configuration (JSON)

#[derive(Deserialize)]
#[serde(untagged)]
enum RationalLit {
    Int(i64),
    Str(String),
}

impl RationalLit {
    fn parse(&self) -> Result<Rational, IoError> {
        match self {
            RationalLit::Int(n) => Ok(crate::model::rational_from_int(*n)),
            RationalLit::Str(s) => parse_rational(s).map_err(|e| IoError::Config(e.to_string())),
        }
    }
}

#[derive(Deserialize)]
struct ThetaCfg {
    rho: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct InitCfg {
    y0: u8,
    #[serde(default)]
    x1: Option<RationalLit>,
}

impl InitCfg {
    fn parse(&self) -> Result<InitialCondition, IoError> {
        Ok(InitialCondition {
            y0: self.y0,
            x1: self.x1.as_ref().map(RationalLit::parse).transpose()?,
        })
    }
}

#[derive(Deserialize)]
struct InitProbCfg {
    init: InitCfg,
    prob: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InitLawCfg {
    Keyword(String),
    List(Vec<InitProbCfg>),
}

#[derive(Deserialize, Clone)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DistCfg {
    PointMass { c: f64 },
    Normal { mu: f64, sigma: f64 },
    TwoPoint { a: f64, b: f64, p: f64 },
}

impl DistCfg {
    fn parse(&self) -> Heterogeneity {
        match self {
            DistCfg::PointMass { c } => Heterogeneity::PointMass { c: *c },
            DistCfg::Normal { mu, sigma } => Heterogeneity::Normal {
                mu: *mu,
                sigma: *sigma,
            },
            DistCfg::TwoPoint { a, b, p } => Heterogeneity::TwoPoint {
                a: *a,
                b: *b,
                p: *p,
            },
        }
    }
}

#[derive(Deserialize)]
struct InitDistCfg {
    init: InitCfg,
    #[serde(flatten)]
    dist: DistCfg,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HeterogeneityCfg {
    Shared(DistCfg),
    PerInit(Vec<InitDistCfg>),
}

#[derive(Deserialize)]
struct KernelRowCfg {
    #[serde(default)]
    x: Option<RationalLit>,
    y: u8,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum KernelLawCfg {
    Dirichlet { concentration: Vec<f64> },
    Fixed { rows: Vec<KernelRowCfg> },
}

#[derive(Deserialize)]
struct DgpConfigFile {
    theta0: ThetaCfg,
    spec: u8,
    support: Vec<RationalLit>,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "N")]
    n: usize,
    init_law: InitLawCfg,
    heterogeneity: HeterogeneityCfg,
    kernel_law: KernelLawCfg,
    seed: u64,
}

/// Parse a DGP configuration from its JSON text. `init_law` may be the
/// keyword `"uniform"` or an explicit `{init, prob}` list; `heterogeneity`
/// may be one shared distribution or a per-init list.
pub fn parse_dgp_config(json: &str) -> Result<DGPConfig, IoError> {
    let file: DgpConfigFile =
        serde_json::from_str(json).map_err(|e| IoError::Config(e.to_string()))?;
    let spec = FeedbackSpec::from_tag(file.spec)
        .ok_or_else(|| IoError::Config(format!("spec must be 1 or 2, got {}", file.spec)))?;
    let support = Support::new(
        file.support
            .iter()
            .map(RationalLit::parse)
            .collect::<Result<Vec<_>, _>>()?,
    )?;

    let init_law: Vec<(InitialCondition, f64)> = match &file.init_law {
        InitLawCfg::Keyword(word) if word == "uniform" => {
            let inits = crate::enumeration::all_initial_conditions(spec, &support);
            let p = 1.0 / inits.len() as f64;
            inits.into_iter().map(|i| (i, p)).collect()
        }
        InitLawCfg::Keyword(word) => {
            return Err(IoError::Config(format!(
                "unknown init_law keyword `{word}` (expected \"uniform\" or a list)"
            )));
        }
        InitLawCfg::List(entries) => entries
            .iter()
            .map(|e| Ok((e.init.parse()?, e.prob)))
            .collect::<Result<Vec<_>, IoError>>()?,
    };

    let heterogeneity: Vec<(InitialCondition, Heterogeneity)> = match &file.heterogeneity {
        HeterogeneityCfg::Shared(dist) => init_law
            .iter()
            .map(|(init, _)| (init.clone(), dist.parse()))
            .collect(),
        HeterogeneityCfg::PerInit(entries) => entries
            .iter()
            .map(|e| Ok((e.init.parse()?, e.dist.parse())))
            .collect::<Result<Vec<_>, IoError>>()?,
    };

    let kernel_law = match &file.kernel_law {
        KernelLawCfg::Dirichlet { concentration } => KernelLaw::Dirichlet {
            concentration: concentration.clone(),
        },
        KernelLawCfg::Fixed { rows } => {
            let mut map = BTreeMap::new();
            for row in rows {
                let key = match (spec, &row.x) {
                    (FeedbackSpec::Spec1, Some(x)) => KernelRowKey::PrevXY {
                        x: x.parse()?,
                        y: row.y,
                    },
                    (FeedbackSpec::Spec1, None) => {
                        return Err(IoError::Config(
                            "fixed kernel rows need an `x` entry under spec 1".into(),
                        ));
                    }
                    (FeedbackSpec::Spec2, None) => KernelRowKey::PrevY { y: row.y },
                    (FeedbackSpec::Spec2, Some(_)) => {
                        return Err(IoError::Config(
                            "fixed kernel rows must not carry `x` under spec 2".into(),
                        ));
                    }
                };
                if map.insert(key, row.probs.clone()).is_some() {
                    return Err(IoError::Config("duplicate fixed kernel row".into()));
                }
            }
            let expected = kernel_row_keys(spec, &support).len();
            if map.len() != expected {
                return Err(IoError::Config(format!(
                    "fixed kernel needs {expected} rows, got {}",
                    map.len()
                )));
            }
            KernelLaw::Fixed(
                FeedbackKernel::new(spec, support.clone(), map)
                    .map_err(|e| IoError::Config(e.to_string()))?,
            )
        }
    };

    Ok(DGPConfig {
        theta0: crate::model::Theta::new(file.theta0.rho, file.theta0.beta),
        spec,
        support,
        horizon: file.horizon,
        n: file.n,
        init_law,
        heterogeneity,
        kernel_law,
        seed: file.seed,
    })
}

pub fn load_dgp_config(path: &FsPath) -> Result<DGPConfig, IoError> {
    let text = fs::read_to_string(path)?;
    parse_dgp_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identification::dataset_identification;
    use crate::model::rational_from_int;
    use proptest::prelude::*;

    fn support01() -> Support {
        Support::canonical(2).unwrap()
    }

    #[test]
    fn well_formed_panel_loads() {
        let csv = "id,t,x,y\n\
                   a,0,,0\na,1,0,0\na,2,1,1\n\
                   b,0,,1\nb,1,1,1\nb,2,0,0\n";
        let ds = load_panel_from_reader(csv.as_bytes(), FeedbackSpec::Spec2, &support01()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.horizon, 2);
        assert_eq!(ds.ids, vec!["a", "b"]);
    }

    #[test]
    fn non_binary_y_names_the_line() {
        let csv = "id,t,x,y\na,0,,0\na,1,0,2\n";
        let err =
            load_panel_from_reader(csv.as_bytes(), FeedbackSpec::Spec2, &support01()).unwrap_err();
        match err {
            IoError::NonBinaryY { line, value } => {
                assert_eq!(line, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn off_support_and_structural_errors_are_reported() {
        let off = "id,t,x,y\na,0,,0\na,1,5,1\n";
        assert!(matches!(
            load_panel_from_reader(off.as_bytes(), FeedbackSpec::Spec2, &support01()),
            Err(IoError::OffSupport { line: 3, .. })
        ));
        let x_at_zero = "id,t,x,y\na,0,1,0\na,1,0,1\n";
        assert!(matches!(
            load_panel_from_reader(x_at_zero.as_bytes(), FeedbackSpec::Spec2, &support01()),
            Err(IoError::MalformedRow { line: 2, .. })
        ));
        let ragged = "id,t,x,y\na,0,,0\na,1,0,1\nb,0,,0\nb,1,1,1\nb,2,1,0\n";
        assert!(matches!(
            load_panel_from_reader(ragged.as_bytes(), FeedbackSpec::Spec2, &support01()),
            Err(IoError::RaggedPanel(_))
        ));
        let dup = "id,t,x,y\na,0,,0\na,1,0,1\na,1,1,1\n";
        assert!(matches!(
            load_panel_from_reader(dup.as_bytes(), FeedbackSpec::Spec2, &support01()),
            Err(IoError::MalformedRow { line: 4, .. })
        ));
        let missing = "id,t,x,y\na,0,,0\na,2,1,1\n";
        assert!(matches!(
            load_panel_from_reader(missing.as_bytes(), FeedbackSpec::Spec2, &support01()),
            Err(IoError::RaggedPanel(_))
        ));
    }

    #[test]
    fn worked_sequences_realize_the_expected_block() {
        // The two T=2 sequences that identify beta, as two individuals.
        let csv = "id,t,x,y\n\
                   1,0,,1\n1,1,1,1\n1,2,0,0\n\
                   2,0,,1\n2,1,0,1\n2,2,1,0\n";
        let ds = load_panel_from_reader(csv.as_bytes(), FeedbackSpec::Spec2, &support01()).unwrap();
        let report = dataset_identification(&ds).unwrap();
        assert!(report.beta_identified);
        assert!(!report.rho_identified);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let csv = "id,t,x,y\n\
                   a,0,,0\na,1,1/3,0\na,2,7/2,1\n\
                   b,0,,1\nb,1,0,1\nb,2,1/3,0\n";
        let sup = Support::new(vec![
            rational_from_int(0),
            parse_rational("1/3").unwrap(),
            parse_rational("7/2").unwrap(),
        ])
        .unwrap();
        let ds = load_panel_from_reader(csv.as_bytes(), FeedbackSpec::Spec2, &sup).unwrap();
        let text = panel_to_csv_string(&ds);
        let ds2 = load_panel_from_reader(text.as_bytes(), FeedbackSpec::Spec2, &sup).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(text, panel_to_csv_string(&ds2));
    }

    #[test]
    fn dgp_config_parses_all_shapes() {
        let json = r#"{
            "theta0": {"rho": 0.5, "beta": 1.0},
            "spec": 2,
            "support": [0, 1],
            "T": 3,
            "N": 100,
            "init_law": "uniform",
            "heterogeneity": {"type": "normal", "mu": 0.0, "sigma": 1.0},
            "kernel_law": {"type": "dirichlet", "concentration": [1.0, 1.0]},
            "seed": 42
        }"#;
        let cfg = parse_dgp_config(json).unwrap();
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.init_law.len(), 2);
        assert!((cfg.init_law[0].1 - 0.5).abs() < 1e-15);
        cfg.validate().unwrap();

        let json = r#"{
            "theta0": {"rho": -0.2, "beta": 0.7},
            "spec": 1,
            "support": ["0", "1/2"],
            "T": 2,
            "N": 10,
            "init_law": [
                {"init": {"y0": 0, "x1": "0"}, "prob": 0.5},
                {"init": {"y0": 1, "x1": "1/2"}, "prob": 0.5}
            ],
            "heterogeneity": [
                {"init": {"y0": 0, "x1": "0"}, "type": "point_mass", "c": -0.5},
                {"init": {"y0": 1, "x1": "1/2"}, "type": "two_point", "a": -1.0, "b": 1.0, "p": 0.3}
            ],
            "kernel_law": {"type": "fixed", "rows": [
                {"x": "0", "y": 0, "probs": [0.4, 0.6]},
                {"x": "0", "y": 1, "probs": [0.5, 0.5]},
                {"x": "1/2", "y": 0, "probs": [0.25, 0.75]},
                {"x": "1/2", "y": 1, "probs": [0.9, 0.1]}
            ]},
            "seed": 7
        }"#;
        let cfg = parse_dgp_config(json).unwrap();
        cfg.validate().unwrap();
        assert!(matches!(cfg.kernel_law, KernelLaw::Fixed(_)));

        assert!(parse_dgp_config("{").is_err());
        assert!(parse_dgp_config("{\"spec\": 3}").is_err());
    }

    proptest! {
        #[test]
        fn random_panels_round_trip(seed in 0u64..500) {
            use rand::{rngs::StdRng, Rng, SeedableRng};
            let mut rng = StdRng::seed_from_u64(seed);
            let spec = if rng.random::<bool>() { FeedbackSpec::Spec1 } else { FeedbackSpec::Spec2 };
            let sup = Support::new(vec![
                parse_rational("-1/2").unwrap(),
                rational_from_int(0),
                parse_rational("5/3").unwrap(),
            ]).unwrap();
            let horizon = rng.random_range(1..=3);
            let n = rng.random_range(1..=5);
            let paths: Vec<Path> = (0..n).map(|_| {
                let y0 = rng.random_range(0..=1u8);
                let init = match spec {
                    FeedbackSpec::Spec1 => InitialCondition::spec1(y0, sup.value(rng.random_range(0..3)).clone()),
                    FeedbackSpec::Spec2 => InitialCondition::spec2(y0),
                };
                let x_len = match spec { FeedbackSpec::Spec1 => horizon - 1, FeedbackSpec::Spec2 => horizon };
                Path {
                    init,
                    x: (0..x_len).map(|_| sup.value(rng.random_range(0..3)).clone()).collect(),
                    y: (0..horizon).map(|_| rng.random_range(0..=1u8)).collect(),
                }
            }).collect();
            let ds = PanelDataset::new(spec, sup.clone(), paths).unwrap();
            let text = panel_to_csv_string(&ds);
            let back = load_panel_from_reader(text.as_bytes(), spec, &sup).unwrap();
            prop_assert_eq!(&ds, &back);
            prop_assert_eq!(text, panel_to_csv_string(&back));
        }
    }
}
