use std::fmt::Write;
use std::fs;
use std::path::Path;

use serde::Serialize;

use csma_eai::eai::{compute_and_compare, OfferedLoad};
use csma_eai::format::{parse_graph, parse_values, write_graph};
use csma_eai::graph::enumerate_independent_sets;
use csma_eai::icn::{link_throughputs, partition_function, AccessIntensities};
use csma_eai::netgen::random_contention_graph;
use csma_eai::sim::{replicate, SimConfig, SimMode, TransmissionDistribution};
use csma_eai::ContentionGraph;

use crate::{exit_code, AnalyzeArgs, Failure, Format, GenArgs, IntensityArgs, ModeArg, SaturatedArgs, SimulateArgs, TransmissionArg};

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> Result<ContentionGraph, Failure> {
    parse_graph(&read(path)?).map_err(|e| Failure::new(exit_code(&e), format!("{}: {e}", path.display())))
}

fn load_values(path: &Path) -> Result<Vec<f64>, Failure> {
    parse_values(&read(path)?).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

pub fn load_intensities(args: &IntensityArgs, num_links: usize) -> Result<AccessIntensities<f64>, Failure> {
    let rho = match (&args.rho, &args.rho_file) {
        (Some(r), _) => AccessIntensities::uniform(num_links, *r)?,
        (None, Some(path)) => {
            let values = load_values(path)?;
            if values.len() != num_links {
                return Err(Failure::new(
                    2,
                    format!("{}: {} intensities for {num_links} links", path.display(), values.len()),
                ));
            }
            AccessIntensities::new(values)?
        }
        (None, None) => return Err(Failure::new(2, "one of --rho or --rho-file is required")),
    };
    Ok(rho)
}

fn load_loads(path: &Path, num_links: usize) -> Result<OfferedLoad<f64>, Failure> {
    let values = load_values(path)?;
    if values.len() != num_links {
        return Err(Failure::new(2, format!("{}: {} loads for {num_links} links", path.display(), values.len())));
    }
    Ok(OfferedLoad::new(values)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn fmt4(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct SaturatedOutput {
    num_links: usize,
    num_states: usize,
    partition_value: f64,
    throughputs: Vec<f64>,
}

pub fn saturated(args: &SaturatedArgs) -> Result<String, Failure> {
    let graph = load_graph(&args.graph)?;
    let rho = load_intensities(&args.intensities, graph.num_links())?;
    let space = enumerate_independent_sets(&graph)?;
    let out = SaturatedOutput {
        num_links: graph.num_links(),
        num_states: space.len(),
        partition_value: partition_function(&space, &rho)?,
        throughputs: link_throughputs(&space, &rho)?.0,
    };
    Ok(match args.format {
        Format::Json => to_json(&out),
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "links: {}  states: {}  Z: {:.4}", out.num_links, out.num_states, out.partition_value);
            let _ = writeln!(s, "link  throughput");
            for (i, th) in out.throughputs.iter().enumerate() {
                let _ = writeln!(s, "{:<5} {th:.4}", i + 1);
            }
            s
        }
    })
}

pub fn analyze(args: &AnalyzeArgs) -> Result<String, Failure> {
    let graph = load_graph(&args.graph)?;
    let rho = load_intensities(&args.intensities, graph.num_links())?;
    let loads = load_loads(&args.loads, graph.num_links())?;
    let solution = compute_and_compare(&graph, &rho, &loads).map_err(|failure| Failure {
        code: exit_code(&failure.error),
        message: failure.error.to_string(),
        detail: (!failure.trace.is_empty()).then(|| format!("trace:\n{}", to_json(&failure.trace))),
        output: None,
    })?;
    Ok(match args.format {
        Format::Json => to_json(&solution),
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "network_saturated: {}", solution.network_saturated);
            let _ = writeln!(s, "states: {}  iterations: {}", solution.num_states, solution.iterations);
            let _ = writeln!(s, "saturated links: {}", solution.saturated_set);
            let _ = writeln!(s, "unsaturated links: {}", solution.unsaturated_set);
            let _ = writeln!(s, "link  load    throughput  equivalent_rho");
            for i in 0..graph.num_links() {
                let _ = writeln!(
                    s,
                    "{:<5} {:.4}  {:.4}      {:.4}",
                    i + 1,
                    loads.as_slice()[i],
                    solution.throughputs[i],
                    solution.equivalent_intensities[i]
                );
            }
            if args.trace {
                let _ = writeln!(s, "saturated throughputs: [{}]", fmt4(&solution.saturated_throughputs));
                for record in &solution.trace {
                    let _ = writeln!(s, "iteration {}", record.iteration);
                    for solve in &record.solves {
                        let _ = writeln!(
                            s,
                            "  solve S={} U={} rho=[{}] overshoot={}",
                            solve.saturated_set,
                            solve.unsaturated_set,
                            fmt4(&solve.equivalent_intensities),
                            solve.overshoot
                        );
                    }
                    let _ = writeln!(s, "  S={} U={}", record.saturated_set, record.unsaturated_set);
                    let _ = writeln!(s, "  rho=[{}]", fmt4(&record.equivalent_intensities));
                    let _ = writeln!(s, "  th=[{}]", fmt4(&record.throughputs));
                }
            }
            s
        }
    })
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    mode: &'static str,
    transmission: TransmissionDistribution,
    horizon: f64,
    warmup: f64,
    seed: u64,
    reps: usize,
    mean_airtime: &'a [f64],
    std_airtime: &'a [f64],
    standard_error: Vec<f64>,
    runs: &'a [csma_eai::sim::SimResult],
}

pub fn simulate(args: &SimulateArgs) -> Result<String, Failure> {
    let graph = load_graph(&args.graph)?;
    let rho = load_intensities(&args.intensities, graph.num_links())?;
    let mode = match (args.mode, &args.loads) {
        (Some(ModeArg::Saturated), _) | (None, None) => SimMode::Saturated,
        (Some(ModeArg::Offered), Some(path)) | (None, Some(path)) => SimMode::OfferedLoad(load_loads(path, graph.num_links())?),
        (Some(ModeArg::Offered), None) => return Err(Failure::new(5, "offered mode needs --loads")),
    };
    let transmission = match args.transmission {
        TransmissionArg::Exponential => TransmissionDistribution::Exponential,
        TransmissionArg::Uniform => TransmissionDistribution::Uniform,
        TransmissionArg::Constant => TransmissionDistribution::Constant,
    };
    let mode_name = if matches!(mode, SimMode::Saturated) { "saturated" } else { "offered" };
    let config = SimConfig { mode, rho, transmission, horizon: args.horizon, warmup: args.warmup, seed: args.seed };
    let rep = replicate(&graph, &config, args.reps)?;
    let out = SimulateOutput {
        mode: mode_name,
        transmission,
        horizon: args.horizon,
        warmup: args.warmup,
        seed: args.seed,
        reps: args.reps,
        mean_airtime: &rep.mean_airtime,
        std_airtime: &rep.std_airtime,
        standard_error: rep.standard_error(),
        runs: &rep.runs,
    };
    Ok(match args.format {
        Format::Json => to_json(&out),
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "mode: {mode_name}  reps: {}  horizon: {}  warmup: {}", args.reps, args.horizon, args.warmup);
            let _ = writeln!(s, "link  airtime  std");
            for i in 0..graph.num_links() {
                let _ = writeln!(s, "{:<5} {:.4}   {:.4}", i + 1, rep.mean_airtime[i], rep.std_airtime[i]);
            }
            s
        }
    })
}

pub fn gen(args: &GenArgs) -> Result<String, Failure> {
    let graph = random_contention_graph(args.links, args.mean_degree, args.seed)?;
    let text = write_graph(&graph);
    match &args.out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| Failure::new(5, format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}
