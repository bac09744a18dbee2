use crate::model::{AdaptiveSpec, Instance, Job};
use crate::rational::{Rational, TimeValue};

/// Answer to "when does this job next need attention?", in processed amount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Threshold {
    /// The job completes once its processed amount reaches this value.
    Complete(TimeValue),
    /// The job will not complete before this processed amount; ask again there.
    NotBefore(TimeValue),
}

impl Threshold {
    pub fn amount(&self) -> &TimeValue {
        match self {
            Threshold::Complete(a) | Threshold::NotBefore(a) => a,
        }
    }
}

/// Decides completions. Thresholds for a job are nondecreasing in its
/// processed amount, and a completed job stays completed.
pub trait CompletionOracle {
    fn threshold(&self, job: &Job, processed: &TimeValue) -> Threshold;

    /// Absolute time at which the oracle must observe every job's processed
    /// amount, if it still needs to.
    fn next_checkpoint(&self) -> Option<TimeValue> {
        None
    }

    fn checkpoint(&mut self, _now: &TimeValue, _processed: &[TimeValue]) {}

    /// True processing time once known.
    fn realized(&self, job: &Job) -> TimeValue;
}

/// Completion at the job's recorded true processing time.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedOracle;

impl CompletionOracle for FixedOracle {
    fn threshold(&self, job: &Job, _processed: &TimeValue) -> Threshold {
        Threshold::Complete(job.p_true.clone())
    }

    fn realized(&self, job: &Job) -> TimeValue {
        job.p_true.clone()
    }
}

/// The deterministic lower-bound adversary: before the snapshot a job only
/// completes after `mu` units; at the snapshot each job with processed amount
/// `x` is fixed to `min(x + 1, mu)`.
#[derive(Debug, Clone)]
pub struct SnapshotCapOracle {
    mu: Rational,
    snapshot: TimeValue,
    realized: Option<Vec<TimeValue>>,
}

impl SnapshotCapOracle {
    pub fn new(mu: Rational, snapshot: TimeValue) -> Self {
        SnapshotCapOracle { mu, snapshot, realized: None }
    }

    pub fn is_realized(&self) -> bool {
        self.realized.is_some()
    }
}

impl CompletionOracle for SnapshotCapOracle {
    fn threshold(&self, job: &Job, _processed: &TimeValue) -> Threshold {
        match &self.realized {
            Some(p) => Threshold::Complete(p[job.id].clone()),
            None => Threshold::Complete(self.mu.clone()),
        }
    }

    fn next_checkpoint(&self) -> Option<TimeValue> {
        self.realized.is_none().then(|| self.snapshot.clone())
    }

    fn checkpoint(&mut self, _now: &TimeValue, processed: &[TimeValue]) {
        if self.realized.is_none() {
            let one = Rational::one();
            self.realized = Some(
                processed
                    .iter()
                    .map(|x| (x + &one).min(self.mu.clone()))
                    .collect(),
            );
        }
    }

    fn realized(&self, job: &Job) -> TimeValue {
        match &self.realized {
            Some(p) => p[job.id].clone(),
            None => self.mu.clone(),
        }
    }
}

pub fn oracle_for(instance: &Instance) -> Box<dyn CompletionOracle> {
    match &instance.adaptive {
        None => Box::new(FixedOracle),
        Some(AdaptiveSpec::CapAfterSnapshot { mu, snapshot }) => {
            Box::new(SnapshotCapOracle::new(mu.clone(), snapshot.clone()))
        }
    }
}
