//! Exact analysis of the saturated ideal CSMA network.
//!
//! With mean transmission time normalized to 1, link `i` starts transmitting at
//! rate `rho_i` whenever none of its neighbors is busy. The resulting chain is
//! reversible and the probability of state `s` is proportional to the product
//! of `rho_i` over links transmitting in `s`.

use std::ops::Index;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{enumerate_independent_sets, ContentionGraph, StateSpace};
use crate::scalar::Scalar;

/// Ratio of mean transmission duration to mean backoff countdown, per link.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AccessIntensities<T>(Vec<T>);

impl<T: Scalar> AccessIntensities<T> {
    /// Every entry must be finite and strictly positive.
    pub fn new(rho: Vec<T>) -> Result<Self> {
        for (i, &r) in rho.iter().enumerate() {
            if !(r.is_finite() && r > T::zero()) {
                return Err(Error::InvalidIntensity { link: i + 1, value: r.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok(AccessIntensities(rho))
    }

    pub fn uniform(num_links: usize, rho: T) -> Result<Self> {
        Self::new(vec![rho; num_links])
    }

    /// Wraps values without validation; zero marks a link that never
    /// contends.
    pub(crate) fn from_raw(rho: Vec<T>) -> Self {
        AccessIntensities(rho)
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

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T> Index<usize> for AccessIntensities<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Stationary probabilities aligned with the state-space order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution<T> {
    pub probabilities: Vec<T>,
    pub partition_value: T,
}

/// Normalized per-link throughput: the fraction of time a link transmits.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ThroughputVector<T>(pub Vec<T>);

impl<T: Copy> ThroughputVector<T> {
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

impl<T> Index<usize> for ThroughputVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

fn check_len<T>(space: &StateSpace, rho: &AccessIntensities<T>) -> Result<()> {
    if rho.0.len() == space.num_links() {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected: space.num_links(), actual: rho.0.len() })
    }
}

fn weight_unchecked<T: Scalar>(space: &StateSpace, rho: &[T], index: usize) -> T {
    space.state(index).iter().fold(T::one(), |w, i| w * rho[i])
}

/// Product of the intensities of the links transmitting in a state.
pub fn state_weight<T: Scalar>(space: &StateSpace, rho: &AccessIntensities<T>, state_index: usize) -> Result<T> {
    check_len(space, rho)?;
    if state_index >= space.len() {
        return Err(Error::StateOutOfRange { index: state_index, len: space.len() });
    }
    let w = weight_unchecked(space, &rho.0, state_index);
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::Overflow("state weight"))
    }
}

/// Weights, partition value and throughputs from a single pass.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation<T> {
    pub weights: Vec<T>,
    pub partition_value: T,
    pub throughputs: Vec<T>,
}

pub(crate) fn evaluate<T: Scalar>(space: &StateSpace, rho: &[T]) -> Result<Evaluation<T>> {
    let weights: Vec<T> = (0..space.len()).map(|s| weight_unchecked(space, rho, s)).collect();
    let mut z = T::zero();
    for &w in &weights {
        z = z + w;
    }
    if !z.is_finite() {
        return Err(Error::Overflow("partition function"));
    }
    let throughputs = (0..space.num_links())
        .map(|i| {
            let mut acc = T::zero();
            for &s in space.states_with(i) {
                acc = acc + weights[s as usize];
            }
            acc / z
        })
        .collect();
    Ok(Evaluation { weights, partition_value: z, throughputs })
}

/// Sum of state weights over all feasible states.
pub fn partition_function<T: Scalar>(space: &StateSpace, rho: &AccessIntensities<T>) -> Result<T> {
    check_len(space, rho)?;
    let mut z = T::zero();
    for s in 0..space.len() {
        z = z + weight_unchecked(space, &rho.0, s);
    }
    if z.is_finite() {
        Ok(z)
    } else {
        Err(Error::Overflow("partition function"))
    }
}

pub fn stationary_distribution<T: Scalar>(
    space: &StateSpace,
    rho: &AccessIntensities<T>,
) -> Result<StationaryDistribution<T>> {
    check_len(space, rho)?;
    let eval = evaluate(space, &rho.0)?;
    let z = eval.partition_value;
    Ok(StationaryDistribution {
        probabilities: eval.weights.into_iter().map(|w| w / z).collect(),
        partition_value: z,
    })
}

/// Fraction of time each link spends transmitting.
pub fn link_throughputs<T: Scalar>(space: &StateSpace, rho: &AccessIntensities<T>) -> Result<ThroughputVector<T>> {
    check_len(space, rho)?;
    Ok(ThroughputVector(evaluate(space, &rho.0)?.throughputs))
}

/// Throughputs with every link saturated.
pub fn saturated_throughputs<T: Scalar>(
    graph: &ContentionGraph,
    rho: &AccessIntensities<T>,
) -> Result<ThroughputVector<T>> {
    let space = enumerate_independent_sets(graph)?;
    link_throughputs(&space, rho)
}
