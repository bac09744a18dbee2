//! Exact simulation of preemptive single-machine schedulers that only see
//! estimated processing times.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod invariants;
pub mod metrics;
pub mod model;
pub mod rational;
pub mod schedulers;

pub use engine::{simulate, Scheduler, Trace};
pub use error::{Error, Result};
pub use model::{Instance, Job, JobId};
pub use rational::{Rational, TimeValue};
