//! Simulation of scheduler-induced timing side channels between users of a
//! shared server.
//!
//! A shared single server processes jobs from several users. One user
//! (the attacker) issues small probe jobs and infers another user's arrival
//! counts from probe delays. Schedulers differ in how much they leak and in
//! the delay they impose.

pub mod analysis;
pub mod arrivals;
pub mod attacker;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod timebase;

pub use arrivals::{ArrivalTrace, ClockBinning, PoissonSource, UserId};
pub use engine::{run, Job, SimulationResult};
pub use error::{Error, Result};
pub use policy::{PolicyConfig, PolicyKind};
pub use timebase::{TickDuration, TickScale, TickTime};
