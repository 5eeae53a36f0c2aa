//! Random topologies, the odd/even offered-load recipe, and error summaries.

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eai::{compute_and_compare, OfferedLoad};
use crate::error::{Error, Result};
use crate::graph::ContentionGraph;
use crate::icn::{saturated_throughputs, AccessIntensities};
use crate::sim::{run_icn_simulation, SimConfig};

/// Links whose analytic throughput is below this are reported only in
/// absolute terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-9;

/// Uniform simple graph with `round(n * mean_degree / 2)` edges (G(n, m)).
pub fn random_contention_graph(n: usize, mean_degree: f64, seed: u64) -> Result<ContentionGraph> {
    if n == 0 {
        return Err(Error::NoLinks);
    }
    if !(mean_degree.is_finite() && mean_degree > 0.0) {
        return Err(Error::InvalidConfig(format!("mean degree {mean_degree} must be positive")));
    }
    let max = n * (n - 1) / 2;
    let half = n as f64 * mean_degree / 2.0;
    if half.ceil() > max as f64 {
        return Err(Error::TooManyEdges { links: n, edges: half.ceil() as usize, max });
    }
    let m = half.round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, max, m).into_vec();
    chosen.sort_unstable();
    let edges: Vec<(usize, usize)> = chosen.into_iter().map(|k| unrank_pair(k, n)).collect();
    ContentionGraph::new(n, &edges)
}

/// Maps `k` in `0..n(n-1)/2` to the k-th pair `(u, v)`, 1-based, `u < v`,
/// in row-major order.
fn unrank_pair(mut k: usize, n: usize) -> (usize, usize) {
    for u in 0..n {
        let row = n - 1 - u;
        if k < row {
            return (u + 1, u + 2 + k);
        }
        k -= row;
    }
    unreachable!("pair rank out of range")
}

/// Odd-labelled links demand exactly their saturated throughput; even ones
/// demand 0.1 less, floored at zero.
pub fn unsaturated_load_recipe(graph: &ContentionGraph, rho: &AccessIntensities<f64>) -> Result<OfferedLoad<f64>> {
    let th0 = saturated_throughputs(graph, rho)?;
    let f = th0
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &th)| if i % 2 == 0 { th } else { (th - 0.1).max(0.0) })
        .collect();
    OfferedLoad::new(f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `|sim - eai| / eai`; `None` where `eai` is below the floor.
    pub per_link_relative_error: Vec<Option<f64>>,
    pub per_link_absolute_error: Vec<f64>,
    /// Mean over links with a relative error; `None` when there are none.
    pub mean_error: Option<f64>,
}

impl ErrorReport {
    fn included(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_link_relative_error.iter().flatten().copied()
    }

    /// Mean relative error over every included link of every report.
    pub fn aggregate_mean(reports: &[ErrorReport]) -> Option<f64> {
        let (sum, count) = reports
            .iter()
            .flat_map(|r| r.included())
            .fold((0.0, 0usize), |(s, c), e| (s + e, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

pub fn throughput_error_report(eai: &[f64], sim: &[f64]) -> Result<ErrorReport> {
    if eai.len() != sim.len() {
        return Err(Error::LengthMismatch { expected: eai.len(), actual: sim.len() });
    }
    let absolute: Vec<f64> = eai.iter().zip(sim).map(|(a, s)| (s - a).abs()).collect();
    let relative: Vec<Option<f64>> =
        eai.iter().zip(&absolute).map(|(&a, &d)| (a >= RELATIVE_ERROR_FLOOR).then(|| d / a)).collect();
    let included: Vec<f64> = relative.iter().flatten().copied().collect();
    let mean_error = (!included.is_empty()).then(|| included.iter().sum::<f64>() / included.len() as f64);
    Ok(ErrorReport { per_link_relative_error: relative, per_link_absolute_error: absolute, mean_error })
}

/// Random-network comparison of EAI against simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub degrees: Vec<f64>,
    pub runs_per_degree: usize,
    pub num_links: usize,
    pub rho: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            degrees: vec![2.0, 3.0, 4.0],
            runs_per_degree: 10,
            num_links: 20,
            rho: crate::RHO_80211B,
            horizon: 1e6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub graph_seed: u64,
    pub sim_seed: u64,
    pub num_edges: Option<usize>,
    pub num_states: Option<usize>,
    pub iterations: Option<usize>,
    pub unsaturated_links: Option<usize>,
    pub mean_error: Option<f64>,
    pub max_error: Option<f64>,
    pub per_link_relative_error: Vec<Option<f64>>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeCell {
    pub mean_degree: f64,
    pub runs_ok: usize,
    pub runs_failed: usize,
    /// Mean relative error over all links of all successful runs.
    pub mean_relative_error: Option<f64>,
    pub runs: Vec<RunRecord>,
}

impl DegreeCell {
    pub fn first_error(&self) -> Option<&Error> {
        self.runs.iter().find_map(|r| r.error.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<DegreeCell>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one (degree, run, purpose) cell of an experiment.
pub fn derive_seed(master: u64, degree_index: usize, run: usize, purpose: u64) -> u64 {
    let mut h = splitmix64(master);
    for part in [degree_index as u64, run as u64, purpose] {
        h = splitmix64(h ^ part);
    }
    h
}

fn run_cell(config: &ExperimentConfig, degree_index: usize, run: usize) -> RunRecord {
    let graph_seed = derive_seed(config.seed, degree_index, run, 0);
    let sim_seed = derive_seed(config.seed, degree_index, run, 1);
    let mut record = RunRecord {
        run,
        graph_seed,
        sim_seed,
        num_edges: None,
        num_states: None,
        iterations: None,
        unsaturated_links: None,
        mean_error: None,
        max_error: None,
        per_link_relative_error: Vec::new(),
        failure: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let graph = random_contention_graph(config.num_links, config.degrees[degree_index], graph_seed)?;
        record.num_edges = Some(graph.num_edges());
        let rho = AccessIntensities::uniform(config.num_links, config.rho)?;
        let loads = unsaturated_load_recipe(&graph, &rho)?;
        let solution = compute_and_compare(&graph, &rho, &loads).map_err(|f| f.error)?;
        record.num_states = Some(solution.num_states);
        record.iterations = Some(solution.iterations);
        record.unsaturated_links = Some(solution.unsaturated_set.len());
        let sim = run_icn_simulation(&graph, &SimConfig::offered_load(rho, loads, config.horizon, sim_seed))?;
        let report = throughput_error_report(solution.throughputs.as_slice(), &sim.airtime_fraction)?;
        record.mean_error = report.mean_error;
        record.max_error = report.per_link_relative_error.iter().flatten().copied().reduce(f64::max);
        record.per_link_relative_error = report.per_link_relative_error;
        Ok(())
    })();
    if let Err(e) = outcome {
        record.failure = Some(e.to_string());
        record.error = Some(e);
    }
    record
}

/// Generates `runs_per_degree` graphs per mean degree, loads them with the
/// odd/even recipe, and compares EAI throughputs with one simulation each.
/// Failed runs are recorded and left out of the cell mean.
pub fn run_error_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.runs_per_degree == 0 || config.degrees.is_empty() {
        return Err(Error::InvalidConfig("need at least one degree and one run".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..config.degrees.len())
        .flat_map(|d| (0..config.runs_per_degree).map(move |r| (d, r)))
        .collect();
    let records: Vec<RunRecord> = jobs.par_iter().map(|&(d, r)| run_cell(config, d, r)).collect();
    let mut records = records.into_iter();
    let cells = config
        .degrees
        .iter()
        .map(|&mean_degree| {
            let runs: Vec<RunRecord> = records.by_ref().take(config.runs_per_degree).collect();
            let errors: Vec<f64> = runs.iter().flat_map(|r| r.per_link_relative_error.iter().flatten().copied()).collect();
            let runs_failed = runs.iter().filter(|r| r.failure.is_some()).count();
            DegreeCell {
                mean_degree,
                runs_ok: runs.len() - runs_failed,
                runs_failed,
                mean_relative_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
                runs,
            }
        })
        .collect();
    Ok(ExperimentReport { config: config.clone(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_edge_counts() {
        let g = random_contention_graph(20, 2.0, 1).unwrap();
        assert_eq!(g.num_edges(), 20);
        let g = random_contention_graph(20, 3.0, 7).unwrap();
        assert_eq!(g.num_edges(), 30);
        let mean: f64 = (0..20).map(|i| g.degree(i) as f64).sum::<f64>() / 20.0;
        assert_eq!(mean, 3.0);
    }

    #[test]
    fn forced_and_impossible() {
        assert_eq!(random_contention_graph(2, 1.0, 99).unwrap().edges(), vec![(0, 1)]);
        assert!(matches!(random_contention_graph(3, 10.0, 0), Err(Error::TooManyEdges { .. })));
    }

    #[test]
    fn unrank_covers_all_pairs() {
        let n = 6;
        let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|k| unrank_pair(k, n)).collect();
        let mut expected = Vec::new();
        for u in 1..=n {
            for v in u + 1..=n {
                expected.push((u, v));
            }
        }
        assert_eq!(pairs, expected);
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(random_contention_graph(20, 4.0, 5).unwrap(), random_contention_graph(20, 4.0, 5).unwrap());
        assert_ne!(random_contention_graph(20, 4.0, 5).unwrap(), random_contention_graph(20, 4.0, 6).unwrap());
    }

    #[test]
    fn edge_sets_are_uniform() {
        // n = 4, m = 2: C(6, 2) = 15 equally likely edge sets.
        let mut counts = std::collections::HashMap::new();
        let trials = 15_000;
        for seed in 0..trials {
            let g = random_contention_graph(4, 1.0, seed).unwrap();
            *counts.entry(g.edges()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 15);
        let expected = trials as f64 / 15.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 14 degrees of freedom; 0.999 quantile is about 36.1
        assert!(chi2 < 36.1, "chi2 = {chi2}");
    }

    #[test]
    fn experiment_smoke() {
        let cfg = ExperimentConfig { degrees: vec![2.0, 10.0], runs_per_degree: 1, num_links: 4, horizon: 1e4, ..Default::default() };
        let report = run_error_experiment(&cfg).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert_eq!(report.cells[0].runs_ok, 1);
        assert!(report.cells[0].mean_relative_error.is_some());
        assert_eq!(report.cells[1].runs_failed, 1);
        assert!(matches!(report.cells[1].first_error(), Some(Error::TooManyEdges { .. })));
        assert_eq!(run_error_experiment(&cfg).unwrap(), report);
    }

    #[test]
    fn load_recipe() {
        let fig = ContentionGraph::new(4, &[(1, 3), (1, 4), (2, 3), (2, 4)]).unwrap();
        let f = unsaturated_load_recipe(&fig, &AccessIntensities::uniform(4, 5.3548).unwrap()).unwrap();
        let f = f.as_slice();
        assert!((f[0] - 0.4266).abs() < 5e-5 && (f[2] - 0.4266).abs() < 5e-5);
        assert!((f[1] - 0.3266).abs() < 5e-5 && (f[3] - 0.3266).abs() < 5e-5);

        let one = ContentionGraph::new(1, &[]).unwrap();
        let f = unsaturated_load_recipe(&one, &AccessIntensities::uniform(1, 1.0).unwrap()).unwrap();
        assert_eq!(f.as_slice(), &[0.5]);

        let two = ContentionGraph::new(2, &[]).unwrap();
        let f = unsaturated_load_recipe(&two, &AccessIntensities::uniform(2, 1.0).unwrap()).unwrap();
        assert_eq!(f.as_slice()[0], 0.5);
        assert!((f.as_slice()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn error_reports() {
        let r = throughput_error_report(&[0.3877], &[0.3779]).unwrap();
        assert!((r.mean_error.unwrap() - 0.0253).abs() < 1e-4);

        let same = throughput_error_report(&[0.2, 0.4], &[0.2, 0.4]).unwrap();
        assert_eq!(same.mean_error, Some(0.0));

        let zero = throughput_error_report(&[0.0, 0.4], &[0.0, 0.4]).unwrap();
        assert_eq!(zero.per_link_relative_error, vec![None, Some(0.0)]);
        assert_eq!(zero.per_link_absolute_error, vec![0.0, 0.0]);

        let three = throughput_error_report(&[0.1, 0.2, 0.4], &[0.11, 0.19, 0.44]).unwrap();
        let hand = (0.1 + 0.05 + 0.1) / 3.0;
        assert!((three.mean_error.unwrap() - hand).abs() < 1e-12);

        assert!(throughput_error_report(&[0.1], &[0.1, 0.2]).is_err());
        assert_eq!(ErrorReport::aggregate_mean(&[r.clone(), same]), Some((r.mean_error.unwrap() + 0.0) / 3.0));
    }
}
