use std::fmt::Write;
use std::fs;

use csma_eai::netgen::{run_error_experiment, ExperimentConfig, ExperimentReport};

use crate::commands::to_json;
use crate::{exit_code, ExperimentArgs, Failure, Format};

fn percent(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |e| format!("{:.4}", 100.0 * e))
}

pub fn csv(report: &ExperimentReport) -> String {
    let mut s = String::from("mean_degree,runs_ok,runs_failed,mean_relative_error,mean_relative_error_percent\n");
    for cell in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            cell.mean_degree,
            cell.runs_ok,
            cell.runs_failed,
            cell.mean_relative_error.map_or(String::new(), |e| e.to_string()),
            percent(cell.mean_relative_error),
        );
    }
    s
}

fn human(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let c = &report.config;
    let _ = writeln!(s, "links: {}  rho: {}  horizon: {}  seed: {}", c.num_links, c.rho, c.horizon, c.seed);
    let _ = writeln!(s, "degree  runs  failed  mean error (%)");
    for cell in &report.cells {
        let _ = writeln!(
            s,
            "{:<7} {:<5} {:<7} {}",
            cell.mean_degree,
            cell.runs_ok,
            cell.runs_failed,
            percent(cell.mean_relative_error)
        );
        for run in cell.runs.iter().filter(|r| r.failure.is_some()) {
            let _ = writeln!(s, "  run {} failed: {}", run.run, run.failure.as_deref().unwrap_or(""));
        }
    }
    s
}

pub fn run(args: &ExperimentArgs) -> Result<String, Failure> {
    let config = ExperimentConfig {
        degrees: args.degrees.clone(),
        runs_per_degree: args.runs,
        num_links: args.links,
        rho: args.rho,
        horizon: args.horizon,
        seed: args.seed,
    };
    let report = run_error_experiment(&config)?;
    if let Some(path) = &args.csv {
        fs::write(path, csv(&report)).map_err(|e| Failure::new(5, format!("cannot write {}: {e}", path.display())))?;
    }
    let output = match args.format {
        Format::Json => to_json(&report),
        Format::Human => human(&report),
    };
    for cell in &report.cells {
        if cell.runs_failed > 0 {
            eprintln!("warning: degree {}: {} of {} runs failed", cell.mean_degree, cell.runs_failed, cell.runs.len());
        }
    }
    if let Some(cell) = report.cells.iter().find(|c| c.runs_ok == 0) {
        let code = cell.first_error().map_or(1, exit_code);
        let mut failure = Failure::new(code, format!("no successful run for mean degree {}", cell.mean_degree));
        failure.output = Some(output);
        return Err(failure);
    }
    Ok(output)
}
