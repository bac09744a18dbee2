//! The scheduling policies.

mod book;
mod dl;
mod sept;
mod sr;
mod srpt;
mod zigzag;

pub use book::ClassBook;
pub use dl::Dl;
pub use sept::Sept;
pub use sr::SpecialRule;
pub use srpt::{srpt_choose, Srpt};
pub use zigzag::{PartialType, ZigZag};

use crate::engine::{Annotation, MarkKind, Scheduler};
use crate::error::{Error, Result};
use crate::model::JobId;

/// Keys accepted by [`scheduler_by_key`].
pub const ALL_KEYS: [&str; 5] = ["srpt", "sept", "sr", "zigzag", "dl"];

/// Keys of the schedulers that never look at true processing times.
pub const NON_CLAIRVOYANT_KEYS: [&str; 4] = ["sept", "sr", "zigzag", "dl"];

/// A single move of a marking scheduler's decision loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Process(JobId),
    Mark(JobId, MarkKind),
    Morph(JobId),
    Sigma(i32),
}

impl Step {
    /// Trace annotation for a non-process step.
    pub fn annotation(&self) -> Annotation {
        match *self {
            Step::Mark(job, kind) => Annotation::MarkPartial { job, kind },
            Step::Morph(job) => Annotation::Morph { job },
            Step::Sigma(value) => Annotation::SigmaUpdate { value },
            Step::Process(job) => panic!("processing job {job} is not an annotation"),
        }
    }
}

pub fn scheduler_by_key(key: &str) -> Result<Box<dyn Scheduler + Send>> {
    Ok(match key {
        "srpt" => Box::new(Srpt::new()),
        "sept" => Box::new(Sept::new()),
        "sr" => Box::new(SpecialRule::new()),
        "zigzag" => Box::new(ZigZag::new()),
        "dl" => Box::new(Dl::new()),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown scheduler {other:?}; expected one of {}",
                ALL_KEYS.join(", ")
            )))
        }
    })
}
