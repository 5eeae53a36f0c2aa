//! Throughput computation for CSMA wireless networks with finite offered load.
//!
//! The crate models a network as a contention graph whose vertices are links
//! and whose edges join links that carrier-sense each other. Saturated
//! throughputs follow from the product-form stationary distribution of the
//! ideal CSMA network (ICN) over the independent sets of that graph. Finite
//! offered loads are handled by the equivalent access intensity (EAI) method:
//! links that cannot use all their channel share have their access intensity
//! lowered until their throughput equals their load, and the set of such links
//! is refined by a compute-and-compare loop.
//!
//! An event-driven ICN simulator ([`sim`]) and a random-topology harness
//! ([`netgen`]) are provided to validate the analysis.
//!
//! The analytic modules are generic over the floating-point type; the aliases
//! at the crate root fix it to `f64`.

pub mod eai;
pub mod error;
pub mod format;
pub mod graph;
pub mod icn;
pub mod netgen;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{ContentionGraph, LinkSet, LinkState, StateSpace};
pub use scalar::Scalar;

/// Per-link access intensities in double precision.
pub type Intensities = icn::AccessIntensities<f64>;
/// Per-link offered loads in double precision.
pub type Loads = eai::OfferedLoad<f64>;
/// Per-link throughputs in double precision.
pub type Throughputs = icn::ThroughputVector<f64>;
/// Stationary distribution in double precision.
pub type Distribution = icn::StationaryDistribution<f64>;
/// Result of the compute-and-compare procedure in double precision.
pub type Solution = eai::EaiSolution<f64>;

/// Access intensity of a typical 802.11b link.
pub const RHO_80211B: f64 = 5.3548;
