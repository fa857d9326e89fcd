//! Scenario files: a JSON document plus optional CSV tables.
//!
//! ```json
//! {
//!   "name": "two blocks",
//!   "blocks": [{"id": "a", "k": 4, "mu": 1.0, "lambda": 2.0}],
//!   "blocks_csv": "blocks.csv",
//!   "edges": [{"from": "a", "to": "b"}],
//!   "edges_csv": "edges.csv",
//!   "elasticity": {"elasticity": -0.21, "reference_price": 3.0, "reference_occupancy": 0.8},
//!   "price_bounds": {"p_min": 0.0},
//!   "objective": "stall_weighted",
//!   "sim": {"horizon": 5000, "seed": 1}
//! }
//! ```
//!
//! `blocks.csv` has the header `id,k,mu,lambda,observed_u,price,through_traffic,cap`,
//! optionally followed by `alpha`, `p_min`, `p_max` columns. `edges.csv` has
//! `from,to,weight`. Blank cells mean "unknown", never zero. Relative CSV
//! paths resolve against the scenario file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss_queue::QueueParams;
use crate::network::{self, BlockFace, Edge, GraphIssue, Network, StreetGraph};
use crate::pricing::{ElasticityModel, Objective, PricedBlock, PricingProblem};
use crate::simulate::SimConfig;

pub const BLOCK_COLUMNS: [&str; 8] = [
    "id",
    "k",
    "mu",
    "lambda",
    "observed_u",
    "price",
    "through_traffic",
    "cap",
];
pub const OPTIONAL_BLOCK_COLUMNS: [&str; 3] = ["alpha", "p_min", "p_max"];
pub const EDGE_COLUMNS: [&str; 3] = ["from", "to", "weight"];

/// How price slopes are obtained for blocks that do not give `alpha`.
///
/// Either a direct slope, or a point elasticity (percentage change in
/// occupancy per percentage change in price, normally negative) with a
/// reference point. Without a global reference each block's own `price` and
/// `observed_u` are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_occupancy: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
}

/// Slope assigned to a block while loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub block: String,
    pub alpha: f64,
    pub reference_price: Option<f64>,
    pub reference_occupancy: Option<f64>,
    pub elasticity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default)]
    pub blocks: Vec<BlockFace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks_csv: Option<PathBuf>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<ElasticitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_bounds: Option<PriceBounds>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    /// Non-fatal findings from validation. Not part of the file format.
    #[serde(skip)]
    pub findings: Vec<GraphIssue>,
    #[serde(skip)]
    pub calibration: Vec<Calibration>,
}

/// A pricing problem built from a scenario, with the blocks left out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPricing {
    pub problem: PricingProblem,
    /// Price each block is posted at before optimization.
    pub baseline_prices: Vec<f64>,
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn graph(&self) -> StreetGraph {
        StreetGraph::new(
            self.blocks.iter().map(|b| b.id.clone()).collect(),
            self.edges.clone(),
        )
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(&self.graph(), &self.blocks)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn warnings(&self) -> Vec<String> {
        self.findings.iter().map(|f| f.to_string()).collect()
    }

    /// Pricing inputs for every block with a positive slope, `None` when no
    /// block has one.
    pub fn pricing(&self) -> Result<Option<ScenarioPricing>> {
        let bounds = self.price_bounds.unwrap_or_default();
        let mut blocks = Vec::new();
        let mut baseline_prices = Vec::new();
        let mut excluded = Vec::new();
        let mut warnings = Vec::new();
        for b in &self.blocks {
            let alpha = match b.alpha {
                Some(0.0) => {
                    warnings.push(format!(
                        "block {}: zero price slope, excluded from pricing",
                        b.id
                    ));
                    excluded.push(b.id.clone());
                    continue;
                }
                Some(a) => a,
                None => {
                    excluded.push(b.id.clone());
                    continue;
                }
            };
            let p_min = b.p_min.or(bounds.p_min).unwrap_or(0.0);
            let p_max = b.p_max.or(bounds.p_max).unwrap_or(1.0 / alpha);
            let model = ElasticityModel::new(alpha, p_min, p_max)
                .map_err(|e| Error::invalid(format!("block {}: {e}", b.id)))?;
            let baseline = match (b.price, b.observed_u) {
                (Some(p), _) => p,
                (None, Some(u)) => model.price_for_occupancy(u),
                (None, None) => p_min,
            };
            if let Some(cap) = b.congestion_cap {
                if !(cap >= 0.0) {
                    return Err(Error::Schema {
                        field: format!("blocks[{}].congestion_cap", b.id),
                        message: format!("must be non-negative, got {cap}"),
                    });
                }
            }
            blocks.push(PricedBlock {
                id: b.id.clone(),
                params: b.params,
                model,
                cap: b.congestion_cap.unwrap_or(f64::INFINITY),
            });
            baseline_prices.push(baseline);
        }
        if blocks.is_empty() {
            return Ok(None);
        }
        if !excluded.is_empty() && warnings.len() < excluded.len() {
            warnings.push(format!(
                "{} block(s) without a price slope excluded from pricing",
                excluded.len() - warnings.len()
            ));
        }
        Ok(Some(ScenarioPricing {
            problem: PricingProblem {
                blocks,
                objective: self.objective,
                ..Default::default()
            },
            baseline_prices,
            excluded,
            warnings,
        }))
    }

    /// Fill missing block slopes from the elasticity spec.
    fn calibrate(&mut self) -> Result<()> {
        let Some(spec) = self.elasticity.clone() else {
            return Ok(());
        };
        for b in self.blocks.iter_mut().filter(|b| b.alpha.is_none()) {
            let (alpha, p0, u0) = if let Some(a) = spec.alpha {
                (a, None, None)
            } else if let Some(e) = spec.elasticity {
                let p0 = spec.reference_price.or(b.price);
                let u0 = spec.reference_occupancy.or(b.observed_u);
                match (p0, u0) {
                    (Some(p0), Some(u0)) => {
                        let a = ElasticityModel::slope_from_elasticity(e, p0, u0)
                            .map_err(|err| Error::invalid(format!("block {}: {err}", b.id)))?;
                        (a, Some(p0), Some(u0))
                    }
                    _ => continue,
                }
            } else {
                continue;
            };
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(Error::Schema {
                    field: "elasticity".into(),
                    message: format!(
                        "block {}: calibrated slope {alpha} must be non-negative (elasticity should be negative)",
                        b.id
                    ),
                });
            }
            b.alpha = Some(alpha);
            self.calibration.push(Calibration {
                block: b.id.clone(),
                alpha,
                reference_price: p0,
                reference_occupancy: u0,
                elasticity: spec.elasticity,
            });
        }
        Ok(())
    }

    /// Resolve companion tables, calibrate and validate. Idempotent.
    pub fn resolve(mut self, base: &Path) -> Result<Self> {
        if let Some(rel) = self.blocks_csv.take() {
            let rows = read_blocks_csv(&base.join(rel))?;
            self.blocks.extend(rows);
        }
        if let Some(rel) = self.edges_csv.take() {
            let rows = read_edges_csv(&base.join(rel))?;
            self.edges.extend(rows);
        }
        self.calibrate()?;
        let report = network::validate_graph(&self.graph());
        if report.has_errors() {
            let msg: Vec<String> = report.errors().map(|e| e.to_string()).collect();
            return Err(Error::Graph(msg.join("; ")));
        }
        self.findings = report.warnings().cloned().collect();
        Ok(self)
    }
}

/// Parse a scenario JSON file and everything it references.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: None,
        field: None,
        message: e.to_string(),
    })?;
    let scenario = parse_scenario(&text, path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    scenario.resolve(base)
}

fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        let message = e.to_string();
        match e.classify() {
            Category::Data => Error::Schema {
                field: backticked(&message).unwrap_or_else(|| "scenario".into()),
                message: format!("{} (line {})", message, e.line()),
            },
            _ => Error::Parse {
                file: path.to_path_buf(),
                line: Some(e.line() as u64),
                field: None,
                message,
            },
        }
    })
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

fn parse_err(file: &Path, line: Option<u64>, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        field: Some(field.to_string()),
        message: message.into(),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            line: None,
            field: None,
            message: e.to_string(),
        })
}

fn optional_f64(
    rec: &csv::StringRecord,
    idx: Option<usize>,
    file: &Path,
    line: Option<u64>,
    field: &str,
) -> Result<Option<f64>> {
    let Some(idx) = idx else { return Ok(None) };
    let raw = rec.get(idx).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(file, line, field, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(file, line, field, format!("`{raw}` is not finite")));
    }
    Ok(Some(v))
}

fn non_negative(v: Option<f64>, file: &Path, line: Option<u64>, field: &str) -> Result<Option<f64>> {
    match v {
        Some(x) if x < 0.0 => Err(parse_err(
            file,
            line,
            field,
            format!("must be non-negative, got {x}"),
        )),
        other => Ok(other),
    }
}

pub fn read_blocks_csv(path: &Path) -> Result<Vec<BlockFace>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < BLOCK_COLUMNS.len() || names[..BLOCK_COLUMNS.len()] != BLOCK_COLUMNS {
        return Err(Error::Schema {
            field: "blocks_csv".into(),
            message: format!(
                "{}: header must start with `{}`, found `{}`",
                path.display(),
                BLOCK_COLUMNS.join(","),
                names.join(",")
            ),
        });
    }
    for extra in &names[BLOCK_COLUMNS.len()..] {
        if !OPTIONAL_BLOCK_COLUMNS.contains(extra) {
            return Err(Error::Schema {
                field: "blocks_csv".into(),
                message: format!("{}: unknown column `{extra}`", path.display()),
            });
        }
    }
    let col = |name: &str| names.iter().position(|n| *n == name);

    let mut blocks = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        let id = rec.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(parse_err(path, line, "id", "block id is empty"));
        }
        let k_raw = rec.get(1).unwrap_or("");
        let k: i64 = k_raw
            .parse()
            .map_err(|_| parse_err(path, line, "k", format!("`{k_raw}` is not an integer")))?;
        if k < 1 || k > i64::from(u32::MAX) {
            return Err(parse_err(
                path,
                line,
                "k",
                format!("stall count must be a positive integer, got {k}"),
            ));
        }
        let mu = optional_f64(&rec, Some(2), path, line, "mu")?
            .ok_or_else(|| parse_err(path, line, "mu", "service rate is required"))?;
        let params = QueueParams::new(k as u32, mu)
            .map_err(|e| parse_err(path, line, "mu", e.to_string()))?;
        let mut b = BlockFace::new(id, params);
        b.lambda = non_negative(optional_f64(&rec, col("lambda"), path, line, "lambda")?, path, line, "lambda")?;
        b.observed_u = optional_f64(&rec, col("observed_u"), path, line, "observed_u")?;
        if let Some(u) = b.observed_u {
            if !(0.0..=1.0).contains(&u) {
                return Err(parse_err(path, line, "observed_u", format!("must lie in [0, 1], got {u}")));
            }
        }
        b.price = non_negative(optional_f64(&rec, col("price"), path, line, "price")?, path, line, "price")?;
        b.through_traffic = non_negative(
            optional_f64(&rec, col("through_traffic"), path, line, "through_traffic")?,
            path,
            line,
            "through_traffic",
        )?;
        b.congestion_cap = non_negative(optional_f64(&rec, col("cap"), path, line, "cap")?, path, line, "cap")?;
        b.alpha = non_negative(optional_f64(&rec, col("alpha"), path, line, "alpha")?, path, line, "alpha")?;
        b.p_min = non_negative(optional_f64(&rec, col("p_min"), path, line, "p_min")?, path, line, "p_min")?;
        b.p_max = non_negative(optional_f64(&rec, col("p_max"), path, line, "p_max")?, path, line, "p_max")?;
        blocks.push(b);
    }
    Ok(blocks)
}

pub fn read_edges_csv(path: &Path) -> Result<Vec<Edge>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != EDGE_COLUMNS {
        return Err(Error::Schema {
            field: "edges_csv".into(),
            message: format!(
                "{}: header must be `{}`, found `{}`",
                path.display(),
                EDGE_COLUMNS.join(","),
                names.join(",")
            ),
        });
    }
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        let from = rec.get(0).unwrap_or("");
        let to = rec.get(1).unwrap_or("");
        if from.is_empty() {
            return Err(parse_err(path, line, "from", "endpoint is empty"));
        }
        if to.is_empty() {
            return Err(parse_err(path, line, "to", "endpoint is empty"));
        }
        let weight = optional_f64(&rec, Some(2), path, line, "weight")?;
        edges.push(Edge {
            from: from.to_string(),
            to: to.to_string(),
            weight,
        });
    }
    Ok(edges)
}
