//! Event-driven preemptive single-machine simulator.
//!
//! Time jumps from one decision event to the next: a release, a completion,
//! an oracle threshold, an oracle checkpoint, or a wakeup requested by the
//! scheduler. Between two events exactly one job runs (or the machine idles
//! because nothing is pending), so the jump is exact.
//!
//! Within one timestamp the engine delivers all releases in input order, then
//! the completion that ended the previous stretch, then any oracle checkpoint,
//! and finally asks the scheduler for one decision.

mod oracle;
mod timeline;
mod trace;

pub use oracle::{oracle_for, CompletionOracle, FixedOracle, SnapshotCapOracle, Threshold};
pub use timeline::{pending_at, pending_at_least, total_flow_time, JobRecord, Timeline};
pub use trace::{EventKind, Trace, TraceEvent, TraceHeader};

use crate::error::{Error, Result};
use crate::model::{Instance, Job, JobId};
use crate::rational::TimeValue;

/// What a scheduler learns about a job on release. There is deliberately no
/// true processing time here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobView {
    pub id: JobId,
    pub release: TimeValue,
    pub p_est: TimeValue,
    pub class: i32,
}

impl From<&Job> for JobView {
    fn from(job: &Job) -> Self {
        JobView { id: job.id, release: job.release.clone(), p_est: job.p_est.clone(), class: job.class() }
    }
}

/// Read-only machine state offered at a decision point.
pub struct Machine<'a> {
    pub now: &'a TimeValue,
    /// Job that ran right up to `now`, if it is still pending.
    pub running: Option<JobId>,
    processed: &'a [TimeValue],
    remaining: Option<&'a [TimeValue]>,
}

impl<'a> Machine<'a> {
    pub fn new(
        now: &'a TimeValue,
        running: Option<JobId>,
        processed: &'a [TimeValue],
        remaining: Option<&'a [TimeValue]>,
    ) -> Self {
        Machine { now, running, processed, remaining }
    }

    /// Amount the job has been processed so far.
    pub fn processed(&self, job: JobId) -> &TimeValue {
        &self.processed[job]
    }

    /// True remaining volume; only offered to clairvoyant schedulers.
    pub fn remaining(&self, job: JobId) -> Option<&TimeValue> {
        self.remaining.map(|r| &r[job])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkKind {
    Plain,
    Zig,
    Zag,
}

impl MarkKind {
    pub fn tag(self) -> &'static str {
        match self {
            MarkKind::Plain => "plain",
            MarkKind::Zig => "zig",
            MarkKind::Zag => "zag",
        }
    }
}

/// Bookkeeping a scheduler reports while deciding; recorded in the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotation {
    MarkPartial { job: JobId, kind: MarkKind },
    /// A zag job turned zigzag.
    Morph { job: JobId },
    SigmaUpdate { value: i32 },
}

pub trait Scheduler {
    /// Selection key, e.g. `"zigzag"`.
    fn key(&self) -> &'static str;

    fn clairvoyant(&self) -> bool {
        false
    }

    /// Called once before a run. None of the bundled schedulers randomize;
    /// one that does should derive a `ChaCha8Rng` from this seed.
    fn reseed(&mut self, _seed: u64) {}

    fn on_release(&mut self, job: JobView);

    fn on_complete(&mut self, job: JobId, now: &TimeValue);

    /// Pick the job to run from `now` on. Must return a pending job whenever
    /// one exists.
    fn choose(&mut self, machine: &Machine<'_>, notes: &mut Vec<Annotation>) -> Option<JobId>;

    /// Absolute time, later than `now`, at which the scheduler wants control
    /// back while `job` keeps running.
    fn wakeup(&self, _machine: &Machine<'_>, _job: JobId) -> Option<TimeValue> {
        None
    }
}

fn annotation_event(now: &TimeValue, note: Annotation) -> TraceEvent {
    match note {
        Annotation::MarkPartial { job, kind } => {
            TraceEvent::new(now.clone(), EventKind::MarkPartial, Some(job), Some(kind.tag().to_string()))
        }
        Annotation::Morph { job } => {
            TraceEvent::new(now.clone(), EventKind::Morph, Some(job), Some("zigzag".to_string()))
        }
        Annotation::SigmaUpdate { value } => {
            TraceEvent::new(now.clone(), EventKind::SigmaUpdate, None, Some(value.to_string()))
        }
    }
}

/// Run `scheduler` on `instance` until every job completes.
pub fn simulate(instance: &Instance, scheduler: &mut dyn Scheduler, seed: u64) -> Result<Trace> {
    instance.validate()?;
    if scheduler.clairvoyant() && instance.adaptive.is_some() {
        return Err(Error::InvalidInput(
            "a clairvoyant scheduler cannot run on an adaptive instance; realize it first".into(),
        ));
    }
    scheduler.reseed(seed);

    let jobs = &instance.jobs;
    let n = jobs.len();
    let mut oracle = oracle_for(instance);
    let mut processed = vec![TimeValue::zero(); n];
    let mut remaining: Option<Vec<TimeValue>> =
        scheduler.clairvoyant().then(|| jobs.iter().map(|j| j.p_true.clone()).collect());
    let mut pending = vec![false; n];
    let mut pending_count = 0usize;
    let mut next_release = 0usize;
    let mut now = TimeValue::zero();
    let mut running: Option<JobId> = None;
    let mut just_completed: Option<JobId> = None;
    let mut events = Vec::new();
    let mut notes = Vec::new();

    loop {
        while next_release < n && jobs[next_release].release <= now {
            let job = &jobs[next_release];
            events.push(TraceEvent::new(now.clone(), EventKind::Release, Some(job.id), None));
            pending[job.id] = true;
            pending_count += 1;
            scheduler.on_release(JobView::from(job));
            next_release += 1;
        }
        if let Some(id) = just_completed.take() {
            events.push(TraceEvent::new(now.clone(), EventKind::Complete, Some(id), None));
            scheduler.on_complete(id, &now);
        }
        if oracle.next_checkpoint().is_some_and(|cp| cp <= now) {
            oracle.checkpoint(&now, &processed);
            events.push(TraceEvent::new(now.clone(), EventKind::Snapshot, None, None));
        }

        if pending_count == 0 {
            running = None;
            if next_release == n {
                break;
            }
            let mut target = jobs[next_release].release.clone();
            if let Some(cp) = oracle.next_checkpoint() {
                if cp > now && cp < target {
                    target = cp;
                }
            }
            now = target;
            continue;
        }

        let machine = Machine::new(&now, running, &processed, remaining.as_deref());
        let choice = scheduler.choose(&machine, &mut notes);
        let wake = choice.and_then(|id| scheduler.wakeup(&machine, id));
        events.extend(notes.drain(..).map(|note| annotation_event(&now, note)));
        let chosen = match choice {
            Some(id) if id < n && pending[id] => id,
            Some(id) => {
                return Err(Error::ContractViolation {
                    time: now,
                    detail: format!("{} chose job {id}, which is not pending", scheduler.key()),
                })
            }
            None => {
                return Err(Error::ContractViolation {
                    time: now,
                    detail: format!("{} idled with {pending_count} pending jobs", scheduler.key()),
                })
            }
        };
        if running != Some(chosen) {
            if let Some(prev) = running {
                events.push(TraceEvent::new(now.clone(), EventKind::Preempt, Some(prev), None));
            }
            events.push(TraceEvent::new(now.clone(), EventKind::Start, Some(chosen), None));
            running = Some(chosen);
        }

        let threshold = oracle.threshold(&jobs[chosen], &processed[chosen]);
        if *threshold.amount() <= processed[chosen] {
            return Err(Error::ContractViolation {
                time: now,
                detail: format!("oracle threshold for job {chosen} is not ahead of its processed amount"),
            });
        }
        let mut target = &now + &(threshold.amount() - &processed[chosen]);
        let mut consider = |t: TimeValue| {
            if t > now && t < target {
                target = t;
            }
        };
        if next_release < n {
            consider(jobs[next_release].release.clone());
        }
        if let Some(t) = wake {
            consider(t);
        }
        if let Some(t) = oracle.next_checkpoint() {
            consider(t);
        }

        let dt = &target - &now;
        processed[chosen] += &dt;
        if let Some(rem) = remaining.as_mut() {
            rem[chosen] -= &dt;
        }
        now = target;
        if let Threshold::Complete(amount) = &threshold {
            if processed[chosen] == *amount {
                pending[chosen] = false;
                pending_count -= 1;
                running = None;
                just_completed = Some(chosen);
            }
        }
    }

    // An adversary that never reached its checkpoint still has to commit.
    if oracle.next_checkpoint().is_some() {
        oracle.checkpoint(&now, &processed);
    }
    let mut realized = instance.clone();
    realized.adaptive = None;
    for job in &mut realized.jobs {
        job.p_true = oracle.realized(job);
    }
    Ok(Trace { scheduler: scheduler.key().to_string(), seed, instance: realized, events })
}

#[cfg(test)]
mod tests;
