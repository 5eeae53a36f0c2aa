//! Equivalent access intensities for networks with finite offered load.
//!
//! An unsaturated link spends part of its time with an empty buffer. Folding
//! that idle time into a longer backoff countdown gives the link a smaller
//! *equivalent* access intensity, after which the network can be analyzed as
//! if saturated. [`compute_and_compare`] finds which links are unsaturated and
//! what their equivalent intensities are.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{enumerate_independent_sets_capped, remove_zero_load_links, ContentionGraph, LinkSet, StateSpace, DEFAULT_STATE_CAP};
use crate::icn::{evaluate, AccessIntensities, ThroughputVector};
use crate::scalar::Scalar;

/// Normalized airtime demand per link; with unit mean transmission time this
/// equals the Poisson packet arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct OfferedLoad<T>(Vec<T>);

impl<T: Scalar> OfferedLoad<T> {
    /// Every entry must lie in `[0, 1)`.
    pub fn new(f: Vec<T>) -> Result<Self> {
        for (i, &x) in f.iter().enumerate() {
            if !(x >= T::zero() && x < T::one()) {
                return Err(Error::InvalidLoad { link: i + 1, value: x.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok(OfferedLoad(f))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Settings for the target-throughput solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on `max |th_i - f_i|` over target links.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Non-improving multiplicative sweeps tolerated before switching to Newton.
    pub stall_sweeps: usize,
    /// Relative intensity perturbation for the finite-difference Jacobian.
    pub jacobian_step: f64,
    /// Intensity beyond which a target is declared unreachable.
    pub intensity_ceiling: f64,
}

impl SolverOptions {
    /// Defaults suited to the precision of `T`.
    pub fn for_scalar<T: Scalar>() -> Self {
        let eps = T::epsilon().to_f64().unwrap_or(f64::EPSILON);
        SolverOptions { tolerance: 1e-8f64.max(100.0 * eps), ..Self::default() }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-8,
            max_sweeps: 100_000,
            stall_sweeps: 1_000,
            jacobian_step: 1e-6,
            intensity_ceiling: 1e6,
        }
    }
}

/// Settings for [`compute_and_compare_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct EaiOptions {
    pub solver: SolverOptions,
    /// Dead band for load/throughput comparisons when classifying links.
    pub classification_tolerance: f64,
    pub state_cap: usize,
    /// Outer-iteration guard; `None` means ten times the link count.
    pub max_iterations: Option<usize>,
}

impl EaiOptions {
    pub fn for_scalar<T: Scalar>() -> Self {
        EaiOptions { solver: SolverOptions::for_scalar::<T>(), ..Self::default() }
    }
}

impl Default for EaiOptions {
    fn default() -> Self {
        EaiOptions {
            solver: SolverOptions::default(),
            classification_tolerance: 5e-5,
            state_cap: DEFAULT_STATE_CAP,
            max_iterations: None,
        }
    }
}

/// Outcome of comparing offered loads against saturated throughputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    NetworkSaturated,
    Partition { saturated: LinkSet, unsaturated: LinkSet },
}

/// Links with `f_i >= th_i` (within `tolerance`) are saturated. The network
/// is saturated when all links are.
pub fn compare_load_vs_saturated<T: Scalar>(loads: &[T], saturated: &[T], tolerance: f64) -> Result<Comparison> {
    if loads.len() != saturated.len() {
        return Err(Error::LengthMismatch { expected: saturated.len(), actual: loads.len() });
    }
    let tol = T::lit(tolerance);
    let sat: LinkSet = (0..loads.len()).filter(|&i| loads[i] >= saturated[i] - tol).collect();
    let all = LinkSet::full(loads.len());
    if sat == all {
        Ok(Comparison::NetworkSaturated)
    } else {
        Ok(Comparison::Partition { saturated: sat, unsaturated: all.difference(sat) })
    }
}

/// Solves for intensities of the `targets` links so that each reaches its
/// target throughput, with the `fixed` links held at the given intensity.
///
/// Keys are 0-based link indices and together must cover every link once.
/// Target links start from the isolated-link solution `f / (1 - f)`.
pub fn solve_target_throughputs<T: Scalar>(
    space: &StateSpace,
    fixed: &BTreeMap<usize, T>,
    targets: &BTreeMap<usize, T>,
    options: &SolverOptions,
) -> Result<AccessIntensities<T>> {
    let n = space.num_links();
    let mut initial = vec![T::nan(); n];
    for (&i, &r) in fixed {
        if i >= n {
            return Err(Error::InvalidTargets(format!("fixed link {} out of range", i + 1)));
        }
        initial[i] = r;
    }
    for (&i, &f) in targets {
        if i >= n {
            return Err(Error::InvalidTargets(format!("target link {} out of range", i + 1)));
        }
        if fixed.contains_key(&i) {
            return Err(Error::InvalidTargets(format!("link {} is both fixed and targeted", i + 1)));
        }
        initial[i] = f / (T::one() - f);
    }
    if let Some(i) = initial.iter().position(|x| x.is_nan()) {
        return Err(Error::InvalidTargets(format!("link {} is neither fixed nor targeted", i + 1)));
    }
    let initial = AccessIntensities::new(initial)?;
    solve_target_throughputs_from(space, &initial, targets, options)
}

/// Like [`solve_target_throughputs`], starting from `initial`. Links absent
/// from `targets` keep their `initial` intensity.
///
/// A damped multiplicative update `rho_i <- rho_i * (f_i / th_i)^alpha` runs
/// first; after [`SolverOptions::stall_sweeps`] sweeps without a new best
/// residual the solver switches to Newton steps on log-intensities with a
/// finite-difference Jacobian and a backtracking line search.
pub fn solve_target_throughputs_from<T: Scalar>(
    space: &StateSpace,
    initial: &AccessIntensities<T>,
    targets: &BTreeMap<usize, T>,
    options: &SolverOptions,
) -> Result<AccessIntensities<T>> {
    let n = space.num_links();
    if initial.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: initial.len() });
    }
    for (&i, &f) in targets {
        if i >= n {
            return Err(Error::InvalidTargets(format!("target link {} out of range", i + 1)));
        }
        if !(f > T::zero() && f < T::one()) {
            return Err(Error::InvalidTargets(format!("target {f} for link {} outside (0, 1)", i + 1)));
        }
    }
    let mut rho = initial.as_slice().to_vec();
    if targets.is_empty() {
        return Ok(AccessIntensities::from_raw(rho));
    }
    let links: Vec<usize> = targets.keys().copied().collect();
    let goal: Vec<T> = targets.values().copied().collect();
    let tol = T::lit(options.tolerance);
    let ceiling = T::lit(options.intensity_ceiling);

    let residual = |th: &[T]| -> T {
        links.iter().zip(&goal).map(|(&i, &f)| (th[i] - f).abs()).fold(T::zero(), T::max)
    };
    let over_ceiling = |rho: &[T]| -> Option<Error> {
        let over: Vec<usize> = links.iter().filter(|&&i| rho[i] > ceiling).map(|&i| i + 1).collect();
        (!over.is_empty()).then_some(Error::InfeasibleTarget { links: over })
    };

    let mut alpha = T::one();
    let alpha_min = T::lit(1.0 / 1024.0);
    let mut best = T::infinity();
    let mut previous = T::infinity();
    let mut stalled = 0usize;
    let mut sweeps = 0usize;

    while sweeps < options.max_sweeps {
        let th = evaluate(space, &rho)?.throughputs;
        let r = residual(&th);
        if r <= tol {
            return Ok(AccessIntensities::from_raw(rho));
        }
        if let Some(err) = over_ceiling(&rho) {
            return Err(err);
        }
        if r < best {
            best = r;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= options.stall_sweeps {
                break;
            }
        }
        if r > previous {
            alpha = (alpha * T::lit(0.5)).max(alpha_min);
        } else {
            alpha = (alpha * T::lit(1.1)).min(T::one());
        }
        previous = r;
        for (&i, &f) in links.iter().zip(&goal) {
            rho[i] = rho[i] * (f / th[i]).powf(alpha);
        }
        sweeps += 1;
    }

    // Newton on x = ln(rho) over the target links.
    let h = T::lit(options.jacobian_step);
    let k = links.len();
    let mut best = T::infinity();
    while sweeps < options.max_sweeps {
        let th = evaluate(space, &rho)?.throughputs;
        let r: Vec<T> = links.iter().zip(&goal).map(|(&i, &f)| th[i] - f).collect();
        let rmax = r.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        best = best.min(rmax);
        if rmax <= tol {
            return Ok(AccessIntensities::from_raw(rho));
        }
        if let Some(err) = over_ceiling(&rho) {
            return Err(err);
        }
        let mut jacobian = vec![vec![T::zero(); k]; k];
        for (col, &j) in links.iter().enumerate() {
            let mut bumped = rho.clone();
            bumped[j] = bumped[j] * (T::one() + h);
            let th_b = evaluate(space, &bumped)?.throughputs;
            let dx = (T::one() + h).ln();
            for (row, &i) in links.iter().enumerate() {
                jacobian[row][col] = (th_b[i] - th[i]) / dx;
            }
        }
        let rhs: Vec<T> = r.iter().map(|&x| -x).collect();
        let step = match solve_linear(&jacobian, &rhs) {
            Some(s) => s,
            None => break,
        };
        let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
        let r0 = norm(&r);
        let mut t = T::one();
        let mut accepted = false;
        while t > T::lit(1e-10) {
            let trial: Vec<T> = {
                let mut v = rho.clone();
                for (&i, &d) in links.iter().zip(&step) {
                    v[i] = v[i] * (t * d).exp();
                }
                v
            };
            let th_t = evaluate(space, &trial)?.throughputs;
            let r_t: Vec<T> = links.iter().zip(&goal).map(|(&i, &f)| th_t[i] - f).collect();
            if norm(&r_t) < r0 * (T::one() - T::lit(1e-4) * t) {
                rho = trial;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        sweeps += 1;
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence { sweeps, residual: best.to_f64().unwrap_or(f64::NAN) })
}

/// Solves `a x = b` by LU decomposition in double precision; `None` when singular.
fn solve_linear<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |r, c| a[r][c].to_f64().unwrap_or(f64::NAN));
    let v = DVector::from_iterator(n, b.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)));
    let x = m.lu().solve(&v)?;
    x.iter().all(|x| x.is_finite()).then(|| x.iter().map(|&x| T::lit(x)).collect())
}

/// Links in `unsaturated` whose solved intensity exceeds the saturated one
/// move to the saturated set.
pub fn reclassify_overshoot<T: Scalar>(
    rho_tilde: &[T],
    rho: &[T],
    saturated: LinkSet,
    unsaturated: LinkSet,
) -> (LinkSet, LinkSet, bool) {
    let overshoot: LinkSet = unsaturated.iter().filter(|&i| rho_tilde[i] > rho[i]).collect();
    (saturated.union(overshoot), unsaturated.difference(overshoot), !overshoot.is_empty())
}

/// One target-throughput solve inside an iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRecord<T> {
    pub saturated_set: LinkSet,
    pub unsaturated_set: LinkSet,
    pub equivalent_intensities: Vec<T>,
    /// Unsaturated links found to need more than their saturated intensity.
    pub overshoot: LinkSet,
}

/// State at the end of one outer iteration, in original link indexing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub solves: Vec<SolveRecord<T>>,
    pub saturated_set: LinkSet,
    pub unsaturated_set: LinkSet,
    pub equivalent_intensities: Vec<T>,
    pub throughputs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EaiSolution<T> {
    pub throughputs: ThroughputVector<T>,
    /// Equal to the saturated intensity on saturated links; zero on links
    /// with no load.
    pub equivalent_intensities: Vec<T>,
    /// Additional mean countdown `1/rho_tilde - 1/rho`; `None` for zero-load links.
    pub extra_countdown: Vec<Option<T>>,
    pub saturated_set: LinkSet,
    pub unsaturated_set: LinkSet,
    pub iterations: usize,
    pub network_saturated: bool,
    /// Throughputs with every loaded link saturated.
    pub saturated_throughputs: Vec<T>,
    pub num_states: usize,
    pub trace: Vec<IterationRecord<T>>,
}

/// An analysis failure with the iterations completed before it.
#[derive(Debug, Clone, PartialEq)]
pub struct EaiFailure<T> {
    pub error: Error,
    pub trace: Vec<IterationRecord<T>>,
}

impl<T> From<Error> for EaiFailure<T> {
    fn from(error: Error) -> Self {
        EaiFailure { error, trace: Vec::new() }
    }
}

impl<T> std::fmt::Display for EaiFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: std::fmt::Debug> std::error::Error for EaiFailure<T> {}

pub fn compute_and_compare<T: Scalar>(
    graph: &ContentionGraph,
    rho: &AccessIntensities<T>,
    loads: &OfferedLoad<T>,
) -> Result<EaiSolution<T>, EaiFailure<T>> {
    compute_and_compare_with(graph, rho, loads, &EaiOptions::for_scalar::<T>())
}

/// The compute-and-compare procedure.
///
/// Zero-load links are removed first and reported as unsaturated with zero
/// throughput. If
/// every remaining link demands at least its saturated throughput the
/// saturated solution is returned. Otherwise each iteration solves for the
/// unsaturated links' intensities, moves links whose intensity would exceed
/// the saturated value to the saturated set, recomputes throughputs and
/// repartitions, until the saturated set repeats.
pub fn compute_and_compare_with<T: Scalar>(
    graph: &ContentionGraph,
    rho: &AccessIntensities<T>,
    loads: &OfferedLoad<T>,
    options: &EaiOptions,
) -> Result<EaiSolution<T>, EaiFailure<T>> {
    let n = graph.num_links();
    if rho.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: rho.len() }.into());
    }
    if loads.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: loads.len() }.into());
    }
    let reduced = remove_zero_load_links(graph, loads.as_slice())?;
    let m = reduced.graph.num_links();
    let space = enumerate_independent_sets_capped(&reduced.graph, options.state_cap)?;
    let rho_r = reduced.restrict(rho.as_slice());
    let f_r = reduced.restrict(loads.as_slice());
    let zero = T::zero();
    let idle: LinkSet = reduced.removed.iter().copied().collect();

    let finish = |th: Vec<T>, rho_tilde: Vec<T>, sat: LinkSet, unsat: LinkSet, iterations: usize, network_saturated: bool, th0: &[T], trace: Vec<IterationRecord<T>>| {
        let equivalent = reduced.expand(&rho_tilde, zero, n);
        let extra_countdown = (0..n)
            .map(|i| (equivalent[i] > zero).then(|| T::one() / equivalent[i] - T::one() / rho[i]))
            .collect();
        EaiSolution {
            throughputs: ThroughputVector(reduced.expand(&th, zero, n)),
            equivalent_intensities: equivalent,
            extra_countdown,
            saturated_set: reduced.expand_set(sat),
            unsaturated_set: reduced.expand_set(unsat).union(idle),
            iterations,
            network_saturated,
            saturated_throughputs: reduced.expand(th0, zero, n),
            num_states: space.len(),
            trace,
        }
    };

    if m == 0 {
        return Ok(finish(Vec::new(), Vec::new(), LinkSet::EMPTY, LinkSet::EMPTY, 0, false, &[], Vec::new()));
    }

    let th0 = evaluate(&space, &rho_r)?.throughputs;
    let (mut sat, mut unsat) = match compare_load_vs_saturated(&f_r, &th0, options.classification_tolerance)? {
        Comparison::NetworkSaturated => {
            return Ok(finish(th0.clone(), rho_r.clone(), LinkSet::full(m), LinkSet::EMPTY, 0, true, &th0, Vec::new()));
        }
        Comparison::Partition { saturated, unsaturated } => (saturated, unsaturated),
    };

    let guard = options.max_iterations.unwrap_or(10 * n).max(1);
    let expand = |v: &[T]| reduced.expand(v, zero, n);
    let tol = T::lit(options.classification_tolerance);
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut iteration = 1usize;
    let base = AccessIntensities::from_raw(rho_r.clone());

    let mut last_settled: Option<LinkSet> = None;
    let (th, rho_tilde, (sat, unsat)) = loop {
        if iteration > guard {
            return Err(EaiFailure { error: Error::IterationLimitExceeded(guard), trace });
        }
        let mut solves = Vec::new();
        let rho_tilde = loop {
            let targets: BTreeMap<usize, T> = unsat.iter().map(|i| (i, f_r[i])).collect();
            let solved = match solve_target_throughputs_from(&space, &base, &targets, &options.solver) {
                Ok(r) => r.into_vec(),
                // rho_tilde would exceed the ceiling, hence rho: saturated
                Err(Error::InfeasibleTarget { links }) => {
                    let over: LinkSet = links.iter().map(|&l| l - 1).collect();
                    solves.push(SolveRecord {
                        saturated_set: reduced.expand_set(sat),
                        unsaturated_set: reduced.expand_set(unsat),
                        equivalent_intensities: Vec::new(),
                        overshoot: reduced.expand_set(over),
                    });
                    sat = sat.union(over);
                    unsat = unsat.difference(over);
                    continue;
                }
                Err(error) => {
                    return Err(EaiFailure { error, trace });
                }
            };
            let (s2, u2, changed) = reclassify_overshoot(&solved, &rho_r, sat, unsat);
            solves.push(SolveRecord {
                saturated_set: reduced.expand_set(sat),
                unsaturated_set: reduced.expand_set(unsat),
                equivalent_intensities: expand(&solved),
                overshoot: reduced.expand_set(s2.difference(sat)),
            });
            sat = s2;
            unsat = u2;
            if !changed {
                break solved;
            }
        };
        let th = evaluate(&space, &rho_tilde).map_err(|error| EaiFailure { error, trace: trace.clone() })?.throughputs;
        trace.push(IterationRecord {
            iteration,
            solves,
            saturated_set: reduced.expand_set(sat),
            unsaturated_set: reduced.expand_set(unsat),
            equivalent_intensities: expand(&rho_tilde),
            throughputs: expand(&th),
        });
        let settled = (sat, unsat);
        let repeated = last_settled == Some(sat);
        last_settled = Some(sat);
        let next: LinkSet = (0..m).filter(|&i| f_r[i] > th[i] + tol).collect();
        iteration += 1;
        // The second test catches links on the saturation boundary that the
        // repartition marks unsaturated and the overshoot check sends back.
        if next == sat || repeated {
            break (th, rho_tilde, settled);
        }
        sat = next;
        unsat = LinkSet::full(m).difference(next);
    };
    Ok(finish(th, rho_tilde, sat, unsat, iteration - 1, false, &th0, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::enumerate_independent_sets;
    use crate::icn::link_throughputs;

    const RHO0: f64 = 5.3548;

    fn square() -> ContentionGraph {
        ContentionGraph::new(4, &[(1, 3), (1, 4), (2, 3), (2, 4)]).unwrap()
    }

    fn set(labels: &[usize]) -> LinkSet {
        labels.iter().map(|l| l - 1).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn comparison_on_square() {
        let th0 = [0.4266011948589332; 4];
        let got = compare_load_vs_saturated(&[0.2, 0.4, 0.4266, 0.4266], &th0, 5e-5).unwrap();
        assert_eq!(got, Comparison::Partition { saturated: set(&[3, 4]), unsaturated: set(&[1, 2]) });
        assert_eq!(
            compare_load_vs_saturated(&[0.5; 4], &th0, 5e-5).unwrap(),
            Comparison::NetworkSaturated
        );
        assert_eq!(compare_load_vs_saturated(&th0, &th0, 0.0).unwrap(), Comparison::NetworkSaturated);
        assert!(compare_load_vs_saturated(&[0.1], &th0, 0.0).is_err());
    }

    #[test]
    fn solver_square_first_step() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let fixed = BTreeMap::from([(2, RHO0), (3, RHO0)]);
        let targets = BTreeMap::from([(0, 0.2), (1, 0.4)]);
        let rho = solve_target_throughputs(&space, &fixed, &targets, &SolverOptions::default()).unwrap();
        assert!(close(rho.as_slice(), &[0.8798, 14.6341, RHO0, RHO0], 1e-3), "{rho:?}");
        let th = link_throughputs(&space, &rho).unwrap();
        assert!((th[0] - 0.2).abs() < 1e-8 && (th[1] - 0.4).abs() < 1e-8);
    }

    #[test]
    fn solver_square_resolve() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let fixed = BTreeMap::from([(1, RHO0), (2, RHO0), (3, RHO0)]);
        let targets = BTreeMap::from([(0, 0.2)]);
        let rho = solve_target_throughputs(&space, &fixed, &targets, &SolverOptions::default()).unwrap();
        assert!((rho[0] - 1.7994).abs() < 1e-3, "{rho:?}");
        let th = link_throughputs(&space, &rho).unwrap();
        assert!(close(th.as_slice(), &[0.2, 0.2622, 0.5952, 0.5952], 1e-4), "{th:?}");
    }

    #[test]
    fn solver_single_link_closed_form() {
        let g = ContentionGraph::new(1, &[]).unwrap();
        let space = enumerate_independent_sets(&g).unwrap();
        let targets = BTreeMap::from([(0, 0.3)]);
        // from a far starting point to exercise the iteration
        let start = AccessIntensities::new(vec![50.0f64]).unwrap();
        let rho = solve_target_throughputs_from(&space, &start, &targets, &SolverOptions::default()).unwrap();
        assert!((rho[0] - 0.3 / 0.7).abs() < 1e-7);
    }

    #[test]
    fn solver_detects_infeasible_targets() {
        // K2 cannot carry 0.6 + 0.6 of airtime.
        let g = ContentionGraph::new(2, &[(1, 2)]).unwrap();
        let space = enumerate_independent_sets(&g).unwrap();
        let fixed = BTreeMap::new();
        let targets = BTreeMap::from([(0, 0.6), (1, 0.6)]);
        let err = solve_target_throughputs(&space, &fixed, &targets, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleTarget { .. }), "{err:?}");
    }

    #[test]
    fn solver_newton_fallback_converges() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let targets = BTreeMap::from([(0, 0.2), (1, 0.4)]);
        let opts = SolverOptions { stall_sweeps: 1, ..SolverOptions::default() };
        let initial = AccessIntensities::new(vec![1.0, 1.0, RHO0, RHO0]).unwrap();
        let rho = solve_target_throughputs_from(&space, &initial, &targets, &opts).unwrap();
        assert!(close(rho.as_slice(), &[0.8798, 14.6341, RHO0, RHO0], 1e-3), "{rho:?}");
    }

    #[test]
    fn solver_budget_exhaustion() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let fixed = BTreeMap::from([(2, RHO0), (3, RHO0)]);
        let targets = BTreeMap::from([(0, 0.2), (1, 0.4)]);
        let opts = SolverOptions { max_sweeps: 2, ..SolverOptions::default() };
        let err = solve_target_throughputs(&space, &fixed, &targets, &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { sweeps: 2, .. }), "{err:?}");
    }

    #[test]
    fn solver_rejects_bad_problems() {
        let space = enumerate_independent_sets(&square()).unwrap();
        let opts = SolverOptions::default();
        let fixed = BTreeMap::from([(0, RHO0), (1, RHO0), (2, RHO0)]);
        assert!(matches!(
            solve_target_throughputs(&space, &fixed, &BTreeMap::new(), &opts),
            Err(Error::InvalidTargets(_))
        ));
        let both = BTreeMap::from([(0, 0.1), (1, 0.1), (2, 0.1), (3, 0.1)]);
        assert!(solve_target_throughputs(&space, &fixed, &both, &opts).is_err());
        let fixed3 = BTreeMap::from([(1, RHO0), (2, RHO0), (3, RHO0)]);
        let bad = BTreeMap::from([(0, 1.0)]);
        assert!(solve_target_throughputs(&space, &fixed3, &bad, &opts).is_err());
    }

    #[test]
    fn reclassification() {
        let rho = [RHO0; 4];
        let tilde = [0.8798, 14.6341, RHO0, RHO0];
        assert_eq!(
            reclassify_overshoot(&tilde, &rho, set(&[3, 4]), set(&[1, 2])),
            (set(&[2, 3, 4]), set(&[1]), true)
        );
        let low = [1.0, 1.0, RHO0, RHO0];
        assert_eq!(reclassify_overshoot(&low, &rho, set(&[3, 4]), set(&[1, 2])), (set(&[3, 4]), set(&[1, 2]), false));
        assert_eq!(reclassify_overshoot(&tilde, &rho, LinkSet::full(4), LinkSet::EMPTY), (LinkSet::full(4), LinkSet::EMPTY, false));
    }

    #[test]
    fn square_end_to_end() {
        let rho = AccessIntensities::uniform(4, RHO0).unwrap();
        let f = OfferedLoad::new(vec![0.2, 0.4, 0.4266, 0.4266]).unwrap();
        let sol = compute_and_compare(&square(), &rho, &f).unwrap();
        assert!(!sol.network_saturated);
        assert!(close(sol.throughputs.as_slice(), &[0.2, 0.3877, 0.4266, 0.4266], 1e-4), "{:?}", sol.throughputs);
        assert!(close(&sol.equivalent_intensities, &[0.7688, RHO0, 2.7667, 2.7667], 1e-3), "{:?}", sol.equivalent_intensities);
        assert_eq!(sol.saturated_set, set(&[2]));
        assert_eq!(sol.unsaturated_set, set(&[1, 3, 4]));
        assert_eq!(sol.iterations, 2);
        assert_eq!(sol.equivalent_intensities[1], RHO0);

        let first = &sol.trace[0];
        assert!(close(&first.solves[0].equivalent_intensities, &[0.8798, 14.6341, RHO0, RHO0], 1e-3));
        assert_eq!(first.solves[0].overshoot, set(&[2]));
        assert!((first.equivalent_intensities[0] - 1.7994).abs() < 1e-3);
        assert!(close(&first.throughputs, &[0.2, 0.2622, 0.5952, 0.5952], 1e-4));
    }

    #[test]
    fn saturated_network_short_circuits() {
        let rho = AccessIntensities::uniform(4, RHO0).unwrap();
        let f = OfferedLoad::new(vec![0.5; 4]).unwrap();
        let sol = compute_and_compare(&square(), &rho, &f).unwrap();
        assert!(sol.network_saturated);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.throughputs.as_slice(), sol.saturated_throughputs.as_slice());
        assert!(sol.extra_countdown.iter().all(|d| *d == Some(0.0)));
    }

    #[test]
    fn single_link_unsaturated() {
        let g = ContentionGraph::new(1, &[]).unwrap();
        let rho = AccessIntensities::uniform(1, 1.0f64).unwrap();
        let f = OfferedLoad::new(vec![0.3f64]).unwrap();
        let sol = compute_and_compare(&g, &rho, &f).unwrap();
        assert!((sol.throughputs[0] - 0.3).abs() < 1e-8);
        assert!((sol.equivalent_intensities[0] - 0.3 / 0.7).abs() < 1e-6);
        assert_eq!(sol.unsaturated_set, set(&[1]));
    }

    #[test]
    fn zero_loads_are_back_filled() {
        let rho = AccessIntensities::uniform(4, RHO0).unwrap();
        let f = OfferedLoad::new(vec![0.0, 0.2, 0.0, 0.0]).unwrap();
        let sol = compute_and_compare(&square(), &rho, &f).unwrap();
        assert!(close(sol.throughputs.as_slice(), &[0.0, 0.2, 0.0, 0.0], 1e-8));
        assert_eq!(sol.extra_countdown[0], None);
        assert_eq!(sol.unsaturated_set, set(&[1, 2, 3, 4]));
        assert!(sol.saturated_set.is_empty());

        let none = OfferedLoad::new(vec![0.0; 4]).unwrap();
        let sol = compute_and_compare(&square(), &rho, &none).unwrap();
        assert_eq!(sol.throughputs.as_slice(), &[0.0; 4]);
        assert_eq!(sol.num_states, 1);
    }

    #[test]
    fn iteration_guard_carries_trace() {
        let rho = AccessIntensities::uniform(4, RHO0).unwrap();
        let f = OfferedLoad::new(vec![0.2, 0.4, 0.4266, 0.4266]).unwrap();
        let opts = EaiOptions { max_iterations: Some(1), ..EaiOptions::default() };
        let err = compute_and_compare_with(&square(), &rho, &f, &opts).unwrap_err();
        assert_eq!(err.error, Error::IterationLimitExceeded(1));
        assert_eq!(err.trace.len(), 1);
    }

    #[test]
    fn single_precision_square() {
        let rho = AccessIntensities::uniform(4, RHO0 as f32).unwrap();
        let f = OfferedLoad::new(vec![0.2f32, 0.4, 0.4266, 0.4266]).unwrap();
        let sol = compute_and_compare(&square(), &rho, &f).unwrap();
        let th: Vec<f64> = sol.throughputs.as_slice().iter().map(|&x| x as f64).collect();
        assert!(close(&th, &[0.2, 0.3877, 0.4266, 0.4266], 1e-3), "{th:?}");
    }

    #[test]
    fn loads_are_validated() {
        assert!(OfferedLoad::new(vec![1.0]).is_err());
        assert!(OfferedLoad::new(vec![-0.1]).is_err());
        assert!(OfferedLoad::new(vec![f64::NAN]).is_err());
        assert!(OfferedLoad::new(vec![0.0, 0.99]).is_ok());
    }
}
