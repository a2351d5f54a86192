//! Vehicular ad hoc network analysis toolkit.
//!
//! The pipeline runs GPS trace ingestion ([`trace`]), construction of the
//! impedance-weighted communication graph ([`graph`]), complex-network
//! statistics ([`metrics`]), and three optimization models on top of the graph:
//! base-station clustering ([`clustering`]), V2V traffic allocation
//! ([`traffic`]) and information-source selection ([`sources`]). The dense LP
//! and log-barrier solvers shared by the last two live in [`optim`].

pub mod clustering;
pub mod graph;
pub mod metrics;
pub mod optim;
pub mod sources;
pub mod trace;
pub mod traffic;

pub use clustering::{ClusterConfig, ClusterResult};
pub use graph::{ImpedanceParams, ThroughputParams, VanetGraph};
pub use metrics::{DegreeDistribution, MetricsSummary};
pub use optim::{BarrierOptions, BarrierProblem, LinearProgram, SolveReport, SolveStatus};
pub use sources::{PassMatrix, SourceProblem, SourceSolution};
pub use trace::{BoundingBox, GpsRecord, VehicleSnapshot};
pub use traffic::{Allocation, TrafficProblem};
