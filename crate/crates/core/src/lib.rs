//! System-level simulator and optimizer for task offloading from clustered
//! IoMT devices to a three-layer non-terrestrial edge-computing network
//! (UAV / HAPS / LEO).
//!
//! The crate models the access and feeder channels, all delay components of
//! a task's lifetime, the closed-form computing-resource allocation, and the
//! greedy joint subchannel-allocation and offloading-decision algorithm with
//! dynamic resource initialization, plus the benchmark variants (no LEO, no
//! HAPS, non-adaptive initialization). Desk-scale ground truth lives in
//! [`oracle`]; Monte-Carlo sweeps in [`harness`].
//!
//! The numeric core is generic over the scalar type via [`scalar::Float`]
//! (`f32` or `f64`); the aliases below fix `f64` for ordinary use.

pub mod allocation;
pub mod channel;
pub mod compute_alloc;
pub mod delay;
pub mod harness;
pub mod oracle;
pub mod qtcajosa;
pub mod scalar;
pub mod scenario;

pub use scalar::{Float, SPEED_OF_LIGHT};

/// `f64` aliases for the generic core types.
pub type Scenario = scenario::Scenario<f64>;
pub type CapacityTable = channel::CapacityTable<f64>;
pub type Allocation = allocation::Allocation<f64>;
pub type DelayReport = delay::DelayReport<f64>;
pub type Solution = qtcajosa::Solution<f64>;
pub type DecisionState = qtcajosa::DecisionState<f64>;
pub type ComputeRequest = compute_alloc::ComputeRequest<f64>;
pub type ComputeAllocation = compute_alloc::ComputeAllocation<f64>;
pub type OracleResult = oracle::OracleResult<f64>;
