//! Rail special-event crowd analytics.
//!
//! The pipeline reconstructs, from fare-gate entry/exit data, how a rail
//! system served an event crowd: baseline station signatures isolate event
//! riders, departure-time inference and clustering assign riders to trains,
//! a FIFO boarding simulation estimates congestion and effective train
//! capacity, and regression models forecast ridership so that
//! demand-matched schedules can be proposed and compared.
//!
//! Continuous math is generic over the [`num::Scalar`] floating type; the
//! aliases below fix the default precision used by the CLI and tests.

pub mod boardsim;
pub mod capacity;
pub mod ingest;
pub mod num;
pub mod predict;
pub mod scheduleopt;
pub mod signatures;
pub mod stats;
pub mod synthgen;
pub mod traincluster;

/// Default scalar for all pipelines.
pub type Real = f64;

pub type Signature = signatures::StationSignature<Real>;
pub type RidershipEstimate = signatures::EventRidershipEstimate<Real>;
pub type Throughput = signatures::ThroughputCurve<Real>;
pub type Capacity = capacity::CapacityEstimate<Real>;
pub type Stability = capacity::StabilityReport<Real>;
pub type Forecast = scheduleopt::ArrivalForecast<Real>;
pub type Comparison = scheduleopt::ComparisonReport<Real>;
pub type Linear = predict::LinearModel<Real>;
pub type Forest = predict::ForestModel<Real>;
pub type Combined = predict::CombinedModel<Real>;
pub type Metrics = predict::MetricsReport<Real>;
pub type Waits = boardsim::WaitStats<Real>;
