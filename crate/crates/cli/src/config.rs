//! Experiment configuration: a single TOML file with nested blocks, strictly
//! validated before anything is allocated. Validation errors carry the
//! dotted path of the offending field.

use serde::Deserialize;
use std::collections::BTreeMap;

use hhlab_core::lattice::LatticeGraph;
use hhlab_core::model::{Coupling, CouplingSpec};

#[derive(Debug)]
pub struct ConfigInvalid {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigInvalid {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigInvalid {
    ConfigInvalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeBlock,
    pub couplings: CouplingsBlock,
    #[serde(default)]
    pub truncation: TruncationBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub budget: BudgetBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LatticeBlock {
    pub kind: String,
    pub l: Option<usize>,
    pub d: Option<usize>,
    pub vertices: Option<usize>,
    pub edges: Option<Vec<(usize, usize)>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CouplingField {
    /// Bare number: uniform hopping for `t`, on-site value for `u` and `g`.
    Scalar(f64),
    Structured(CouplingInput),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingInput {
    Uniform { value: f64 },
    Onsite { value: f64 },
    Nearest { onsite: f64, neighbor: f64 },
    Table { entries: Vec<TableEntry> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub diff: Vec<i64>,
    pub value: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsBlock {
    pub t: CouplingField,
    pub u: CouplingField,
    pub g: CouplingField,
    pub omega0: f64,
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TruncationBlock {
    pub n_max: Option<usize>,
    pub n_q: Option<usize>,
    pub q_max: Option<f64>,
    /// Cutoff ladder for convergence-gated tasks.
    pub ladder: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub task: String,
    #[serde(default)]
    pub beta: Vec<f64>,
    pub sectors: Option<Vec<i64>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    /// `"all"` or explicit momentum vectors.
    pub momenta: Option<toml::Value>,
    /// graph-check: largest vertex count of the exhaustive sweep.
    pub max_vertices: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<String>,
    pub formats: Option<Vec<String>>,
    /// Base file name; defaults to `<task>-<unix-millis>`.
    pub basename: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetBlock {
    pub max_dense_dim: usize,
    pub max_sparse_dim: usize,
    pub max_sweep_points: usize,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        BudgetBlock {
            max_dense_dim: 4000,
            max_sparse_dim: 3_000_000,
            max_sweep_points: 4096,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `couplings.g.value`.
    pub path: String,
    pub values: Vec<f64>,
}

pub const TASKS: &[&str] = &[
    "graph-check",
    "ground-state",
    "correlations",
    "susceptibility",
    "gaussian-domination",
    "cone-check",
    "fk-check",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<(ExperimentConfig, toml::Value), ConfigInvalid> {
        let value: toml::Value = toml::from_str(text)
            .map_err(|e| invalid("<document>", format!("TOML parse error: {e}")))?;
        let config: ExperimentConfig = ExperimentConfig::deserialize(value.clone())
            .map_err(|e| invalid("<document>", e.to_string()))?;
        config.validate()?;
        Ok((config, value))
    }

    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        match self.lattice.kind.as_str() {
            "hypercubic" => {
                let l = self.lattice.l.ok_or_else(|| invalid("lattice.l", "required"))?;
                let d = self.lattice.d.ok_or_else(|| invalid("lattice.d", "required"))?;
                if l < 1 || d < 1 {
                    return Err(invalid("lattice.l", "l and d must be ≥ 1"));
                }
                if (2 * l).pow(d as u32) > 16 {
                    return Err(invalid("lattice.l", "vertex count above the laboratory cap 16"));
                }
            }
            "custom" => {
                let v = self
                    .lattice
                    .vertices
                    .ok_or_else(|| invalid("lattice.vertices", "required for custom graphs"))?;
                if v == 0 || v > 16 {
                    return Err(invalid("lattice.vertices", "must be in 1..=16"));
                }
                if self.lattice.edges.is_none() {
                    return Err(invalid("lattice.edges", "required for custom graphs"));
                }
            }
            other => {
                return Err(invalid(
                    "lattice.kind",
                    format!("unknown kind `{other}` (hypercubic | custom)"),
                ))
            }
        }
        if !self.couplings.omega0.is_finite() || self.couplings.omega0 <= 0.0 {
            return Err(invalid("couplings.omega0", "must be a positive number"));
        }
        if !TASKS.contains(&self.run.task.as_str()) {
            return Err(invalid(
                "run.task",
                format!("unknown task `{}` ({})", self.run.task, TASKS.join(" | ")),
            ));
        }
        let needs_beta = matches!(
            self.run.task.as_str(),
            "susceptibility" | "gaussian-domination" | "cone-check"
        );
        if needs_beta && self.run.beta.is_empty() {
            return Err(invalid("run.beta", "must be a nonempty list for this task"));
        }
        for (i, b) in self.run.beta.iter().enumerate() {
            if !b.is_finite() || *b <= 0.0 {
                return Err(invalid(
                    "run.beta",
                    format!("entry {i} = {b} must be a positive number"),
                ));
            }
        }
        if let Some(ladder) = &self.truncation.ladder {
            if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("truncation.ladder", "must be strictly increasing"));
            }
        }
        if let Some(n_q) = self.truncation.n_q {
            if n_q < 3 || n_q % 2 == 0 {
                return Err(invalid("truncation.n_q", "must be an odd integer ≥ 3"));
            }
        }
        if let Some(e) = self.run.epsilon {
            if !e.is_finite() || e <= 0.0 {
                return Err(invalid("run.epsilon", "must be a positive number"));
            }
        }
        if let Some(fmts) = &self.output.formats {
            for f in fmts {
                if f != "json" && f != "csv" {
                    return Err(invalid("output.formats", format!("unknown format `{f}`")));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            let mut points = 1usize;
            for (i, axis) in sweep.axes.iter().enumerate() {
                points = points.saturating_mul(axis.values.len());
                if axis.path.is_empty() {
                    return Err(invalid(&format!("sweep.axes[{i}].path"), "must be nonempty"));
                }
            }
            if points > self.budget.max_sweep_points {
                return Err(invalid(
                    "sweep.axes",
                    format!(
                        "grid has {points} points, budget allows {}",
                        self.budget.max_sweep_points
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<LatticeGraph, ConfigInvalid> {
        match self.lattice.kind.as_str() {
            "hypercubic" => Ok(LatticeGraph::hypercubic(
                self.lattice.l.unwrap(),
                self.lattice.d.unwrap(),
            )),
            _ => LatticeGraph::from_edges(
                self.lattice.vertices.unwrap(),
                self.lattice.edges.as_deref().unwrap(),
            )
            .map_err(|e| invalid("lattice.edges", e.to_string())),
        }
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec, ConfigInvalid> {
        let t = resolve(&self.couplings.t, ScalarMeaning::Uniform, "couplings.t")?;
        let u = resolve(&self.couplings.u, ScalarMeaning::Onsite, "couplings.u")?;
        let g = resolve(&self.couplings.g, ScalarMeaning::Onsite, "couplings.g")?;
        Ok(CouplingSpec {
            hopping: t,
            coulomb: u,
            eph: g,
            omega0: self.couplings.omega0,
        })
    }

    pub fn n_max(&self) -> usize {
        self.truncation.n_max.unwrap_or(2)
    }

    pub fn ladder(&self) -> Vec<usize> {
        self.truncation
            .ladder
            .clone()
            .unwrap_or_else(|| vec![self.n_max()])
    }

    pub fn n_q(&self) -> usize {
        self.truncation.n_q.unwrap_or(15)
    }

    pub fn q_max(&self) -> f64 {
        self.truncation
            .q_max
            .unwrap_or(6.0 / self.couplings.omega0.sqrt())
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.run.samples.unwrap_or(50)
    }

    pub fn sectors(&self, graph: &LatticeGraph) -> Vec<i64> {
        match &self.run.sectors {
            Some(list) => list.clone(),
            None => {
                let half = (graph.vertex_count() / 2) as i64;
                (-half..=half).collect()
            }
        }
    }

    /// Explicit momentum list, or `None` for the whole reciprocal grid.
    pub fn momenta(&self) -> Result<Option<Vec<Vec<f64>>>, ConfigInvalid> {
        match &self.run.momenta {
            None => Ok(None),
            Some(toml::Value::String(s)) if s == "all" => Ok(None),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let arr = item.as_array().ok_or_else(|| {
                        invalid("run.momenta", format!("entry {i} must be a vector"))
                    })?;
                    let mut p = Vec::new();
                    for c in arr {
                        let v = c
                            .as_float()
                            .or_else(|| c.as_integer().map(|n| n as f64))
                            .ok_or_else(|| {
                                invalid("run.momenta", format!("entry {i} has a non-numeric part"))
                            })?;
                        p.push(v);
                    }
                    out.push(p);
                }
                Ok(Some(out))
            }
            Some(_) => Err(invalid("run.momenta", "must be \"all\" or a list of vectors")),
        }
    }

    pub fn formats(&self) -> (bool, bool) {
        match &self.output.formats {
            None => (true, true),
            Some(list) => (
                list.iter().any(|f| f == "json"),
                list.iter().any(|f| f == "csv"),
            ),
        }
    }
}

enum ScalarMeaning {
    Uniform,
    Onsite,
}

fn resolve(
    field: &CouplingField,
    scalar_meaning: ScalarMeaning,
    path: &str,
) -> Result<Coupling, ConfigInvalid> {
    let structured = match field {
        CouplingField::Scalar(v) => {
            return Ok(match scalar_meaning {
                ScalarMeaning::Uniform => Coupling::Uniform(*v),
                ScalarMeaning::Onsite => Coupling::OnSite(*v),
            })
        }
        CouplingField::Structured(s) => s,
    };
    Ok(match structured {
        CouplingInput::Uniform { value } => Coupling::Uniform(*value),
        CouplingInput::Onsite { value } => Coupling::OnSite(*value),
        CouplingInput::Nearest { onsite, neighbor } => Coupling::NearestNeighbor {
            onsite: *onsite,
            neighbor: *neighbor,
        },
        CouplingInput::Table { entries } => {
            let mut map = BTreeMap::new();
            for (i, e) in entries.iter().enumerate() {
                if map.insert(e.diff.clone(), e.value).is_some() {
                    return Err(invalid(
                        &format!("{path}.entries[{i}]"),
                        format!("duplicate difference vector {:?}", e.diff),
                    ));
                }
            }
            Coupling::Table(map)
        }
    })
}

/// Apply a float override at a dotted path inside a TOML document.
pub fn set_by_path(doc: &mut toml::Value, path: &str, value: f64) -> Result<(), ConfigInvalid> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cursor = doc;
    for (i, part) in parts.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| invalid(path, "path traverses a non-table value"))?;
        if i + 1 == parts.len() {
            table.insert((*part).to_string(), toml::Value::Float(value));
            return Ok(());
        }
        cursor = table
            .entry((*part).to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Err(invalid(path, "empty path"))
}
