//! `hhlab` — config-driven experiment runner.
//!
//! Subcommands:
//! - `run --config FILE`: execute the configured task, write a JSON report
//!   and CSV tables.
//! - `sweep --config FILE`: run the task over a parameter grid and write one
//!   report per point plus a summary CSV.
//! - `validate --config FILE`: parse and validate only.
//!
//! Exit codes: 0 all checks passed, 1 at least one check failed, 2 invalid
//! configuration or budget, 3 runtime error.

mod config;
mod report;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{set_by_path, ExperimentConfig};
use report::{config_echo, write_report, OutputTarget, Table};
use tasks::{run_task, TaskError};

#[derive(Parser)]
#[command(name = "hhlab", version, about = "Holstein-Hubbard model laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured task and write reports.
    Run(CommonArgs),
    /// Execute the task over the configured parameter grid.
    Sweep(CommonArgs),
    /// Parse and validate the configuration, then exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config and HHLAB_OUT).
    #[arg(long)]
    out: Option<String>,
    /// Random seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and inner parallel loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Report format: json | csv | both.
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(TaskError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(TaskError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, TaskError> {
    match cli.command {
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| TaskError::Runtime(format!("{}: {e}", config.display())))?;
            ExperimentConfig::parse(&text)?;
            println!("configuration OK");
            Ok(true)
        }
        Command::Run(args) => {
            let (cfg, doc) = load(&args)?;
            init_threads(args.threads);
            let start = Instant::now();
            let (report, _) = run_task(&cfg, config_echo(&doc))?;
            let wall_ms = start.elapsed().as_millis();
            let (json_fmt, csv_fmt) = formats(&args, &cfg)?;
            let target = OutputTarget::resolve(
                args.out.as_deref(),
                cfg.output.directory.as_deref(),
                cfg.output.basename.as_deref(),
                &cfg.run.task,
            );
            let files = write_report(&report, &target, json_fmt, csv_fmt, wall_ms)
                .map_err(|e| TaskError::Runtime(e.to_string()))?;
            for check in &report.checks {
                println!(
                    "[{}] {} — {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.assertion
                );
            }
            for f in &files {
                println!("wrote {}", f.display());
            }
            Ok(report.all_passed)
        }
        Command::Sweep(args) => {
            let (cfg, doc) = load(&args)?;
            init_threads(args.threads);
            let fmt_override = formats(&args, &cfg)?;
            sweep(&cfg, &doc, &args, fmt_override)
        }
    }
}

fn load(args: &CommonArgs) -> Result<(ExperimentConfig, toml::Value), TaskError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| TaskError::Runtime(format!("{}: {e}", args.config.display())))?;
    let (_, mut doc) = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        let run = doc
            .as_table_mut()
            .and_then(|t| t.get_mut("run"))
            .and_then(|r| r.as_table_mut())
            .expect("validated config has a run table");
        run.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let cfg = serde::Deserialize::deserialize(doc.clone())
        .map_err(|e| TaskError::Runtime(format!("re-deserialize: {e}")))?;
    Ok((cfg, doc))
}

fn formats(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<(bool, bool), TaskError> {
    match args.format.as_deref() {
        None => Ok(cfg.formats()),
        Some("json") => Ok((true, false)),
        Some("csv") => Ok((false, true)),
        Some("both") => Ok((true, true)),
        Some(other) => Err(TaskError::Config(config::ConfigInvalid {
            field: "--format".into(),
            message: format!("unknown format `{other}` (json | csv | both)"),
        })),
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn sweep(
    cfg: &ExperimentConfig,
    doc: &toml::Value,
    args: &CommonArgs,
    formats: (bool, bool),
) -> Result<bool, TaskError> {
    let axes = cfg
        .sweep
        .as_ref()
        .map(|s| s.axes.clone())
        .unwrap_or_default();
    let target = OutputTarget::resolve(
        args.out.as_deref(),
        cfg.output.directory.as_deref(),
        cfg.output.basename.as_deref(),
        &format!("{}-sweep", cfg.run.task),
    );

    // cartesian product of axis values
    let mut points: Vec<Vec<(String, f64)>> = vec![vec![]];
    for axis in &axes {
        let mut next = Vec::new();
        for point in &points {
            for &v in &axis.values {
                let mut p = point.clone();
                p.push((axis.path.clone(), v));
                next.push(p);
            }
        }
        points = next;
    }
    if axes.iter().any(|a| a.values.is_empty()) {
        points.clear();
    }

    let mut columns: Vec<String> = vec!["point".into()];
    columns.extend(axes.iter().map(|a| a.path.clone()));
    columns.extend(
        [
            "all_passed",
            "e0_min",
            "gap_min",
            "chi_u_max",
            "z_ratio_max",
            "ue_psd",
            "ue_pd",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let mut summary = Table {
        columns,
        rows: Vec::new(),
    };

    use rayon::prelude::*;
    let results: Vec<Result<(usize, bool, Vec<serde_json::Value>), TaskError>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, overrides)| {
            let mut point_doc = doc.clone();
            for (path, value) in overrides {
                set_by_path(&mut point_doc, path, *value).map_err(TaskError::Config)?;
            }
            let point_cfg: ExperimentConfig =
                serde::Deserialize::deserialize(point_doc.clone()).map_err(|e| {
                    TaskError::Config(config::ConfigInvalid {
                        field: format!("sweep point {idx}"),
                        message: e.to_string(),
                    })
                })?;
            point_cfg.validate().map_err(TaskError::Config)?;
            let start = Instant::now();
            let (report, headline) = run_task(&point_cfg, config_echo(&point_doc))?;
            let wall_ms = start.elapsed().as_millis();
            let point_target = OutputTarget {
                directory: target.directory.clone(),
                basename: format!("{}-p{idx:04}", target.basename),
            };
            let (json_fmt, csv_fmt) = formats;
            write_report(&report, &point_target, json_fmt, csv_fmt, wall_ms)
                .map_err(|e| TaskError::Runtime(e.to_string()))?;

            // definiteness flags of the point's effective Coulomb matrix
            let graph = point_cfg.graph().map_err(TaskError::Config)?;
            let couplings = point_cfg.coupling_spec().map_err(TaskError::Config)?;
            let ue = hhlab_core::model::effective_coulomb(&graph, &couplings)
                .map_err(|e| TaskError::Runtime(e.to_string()))?;

            let mut row: Vec<serde_json::Value> = vec![json!(idx)];
            row.extend(overrides.iter().map(|(_, v)| json!(v)));
            row.push(json!(report.all_passed));
            row.push(opt_json(headline.e0_min));
            row.push(opt_json(headline.gap_min));
            row.push(opt_json(headline.chi_u_max));
            row.push(opt_json(headline.z_ratio_max));
            row.push(json!(ue.psd));
            row.push(json!(ue.pd));
            Ok((idx, report.all_passed, row))
        })
        .collect();

    let mut all_passed = true;
    let mut rows: Vec<(usize, Vec<serde_json::Value>)> = Vec::new();
    for r in results {
        let (idx, passed, row) = r?;
        all_passed &= passed;
        rows.push((idx, row));
    }
    rows.sort_by_key(|(idx, _)| *idx);
    for (_, row) in rows {
        summary.push(row);
    }

    std::fs::create_dir_all(&target.directory).map_err(|e| TaskError::Runtime(e.to_string()))?;
    let summary_path = target.path("-summary.csv");
    std::fs::write(&summary_path, report::table_to_csv(&summary))
        .map_err(|e| TaskError::Runtime(e.to_string()))?;
    println!(
        "wrote {} ({} point{})",
        summary_path.display(),
        summary.rows.len(),
        if summary.rows.len() == 1 { "" } else { "s" }
    );
    Ok(all_passed)
}

fn opt_json(v: Option<f64>) -> serde_json::Value {
    match v {
        Some(x) => json!(x),
        None => serde_json::Value::Null,
    }
}
