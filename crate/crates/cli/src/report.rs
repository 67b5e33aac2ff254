//! Machine-readable run reports: deterministic JSON (byte-identical for a
//! given config and seed) plus CSV tables with RFC-4180 quoting. Wall-clock
//! timing lives in a sidecar file so the canonical report stays
//! reproducible.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

#[derive(Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: String,
    pub seed: u64,
    /// Echo of the effective configuration (key-sorted).
    pub config: serde_json::Value,
    pub checks: Vec<CheckLine>,
    pub tables: BTreeMap<String, Table>,
    pub all_passed: bool,
}

/// One pass/fail line; `assertion` cites the library assertion it reflects.
#[derive(Serialize, Clone)]
pub struct CheckLine {
    pub name: String,
    pub assertion: String,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Serialize, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<serde_json::Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

impl RunReport {
    pub fn new(task: &str, seed: u64, config_echo: serde_json::Value) -> RunReport {
        RunReport {
            tool: "hhlab",
            version: env!("CARGO_PKG_VERSION"),
            task: task.to_string(),
            seed,
            config: config_echo,
            checks: Vec::new(),
            tables: BTreeMap::new(),
            all_passed: true,
        }
    }

    pub fn check(&mut self, name: &str, assertion: &str, passed: bool, lhs: f64, rhs: f64) {
        self.all_passed &= passed;
        self.checks.push(CheckLine {
            name: name.to_string(),
            assertion: assertion.to_string(),
            passed,
            lhs,
            rhs,
            margin: rhs - lhs,
        });
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serialization");
        bytes.push(b'\n');
        bytes
    }
}

/// Convert a TOML document to key-sorted JSON for the deterministic echo.
pub fn config_echo(doc: &toml::Value) -> serde_json::Value {
    serde_json::to_value(doc).expect("config echo")
}

/// RFC-4180 quoting: fields containing commas, quotes, or line breaks are
/// wrapped in double quotes with embedded quotes doubled.
pub fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn cell_to_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn table_to_csv(table: &Table) -> String {
    let mut out = String::new();
    out.push_str(
        &table
            .columns
            .iter()
            .map(|c| csv_escape(c))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in &table.rows {
        out.push_str(
            &row.iter()
                .map(|v| csv_escape(&cell_to_string(v)))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

/// Where a run's artifacts go and under which base name.
pub struct OutputTarget {
    pub directory: PathBuf,
    pub basename: String,
}

impl OutputTarget {
    pub fn resolve(
        cli_out: Option<&str>,
        config_dir: Option<&str>,
        basename: Option<&str>,
        task: &str,
    ) -> OutputTarget {
        let directory = cli_out
            .map(PathBuf::from)
            .or_else(|| config_dir.map(PathBuf::from))
            .or_else(|| std::env::var("HHLAB_OUT").ok().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let basename = basename.map(|s| s.to_string()).unwrap_or_else(|| {
            let millis = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0);
            format!("{task}-{millis}")
        });
        OutputTarget {
            directory,
            basename,
        }
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.directory.join(format!("{}{suffix}", self.basename))
    }
}

/// Write the report (and its tables, and the timing sidecar) according to
/// the selected formats; returns the list of files written.
pub fn write_report(
    report: &RunReport,
    target: &OutputTarget,
    json: bool,
    csv: bool,
    wall_ms: u128,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&target.directory)?;
    let mut written = Vec::new();
    if json {
        let path = target.path(".json");
        std::fs::write(&path, report.to_json_bytes())?;
        written.push(path);
    }
    if csv {
        for (name, table) in &report.tables {
            let path = target.path(&format!("-{name}.csv"));
            std::fs::write(&path, table_to_csv(table))?;
            written.push(path);
        }
    }
    // wall-clock sidecar, excluded from the determinism guarantee
    let timing_path = target.path("-timing.json");
    let mut f = std::fs::File::create(&timing_path)?;
    writeln!(f, "{{\"task\":\"{}\",\"wall_ms\":{wall_ms}}}", report.task)?;
    written.push(timing_path);
    Ok(written)
}
