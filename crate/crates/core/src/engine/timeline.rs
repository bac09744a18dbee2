use crate::engine::trace::{EventKind, Trace};
use crate::error::{Error, Result};
use crate::model::JobId;
use crate::rational::TimeValue;

#[derive(Debug, Clone)]
pub struct JobRecord {
    pub release: TimeValue,
    pub p_true: TimeValue,
    pub class: i32,
    pub completion: Option<TimeValue>,
    /// Processing intervals `[start, end)` in time order.
    pub intervals: Vec<(TimeValue, TimeValue)>,
    /// `prefix[m]` is the total length of the first `m` intervals.
    prefix: Vec<TimeValue>,
}

impl JobRecord {
    pub fn processed_by(&self, t: &TimeValue) -> TimeValue {
        let k = self.intervals.partition_point(|(s, _)| s < t);
        if k == 0 {
            return TimeValue::zero();
        }
        let (s, e) = &self.intervals[k - 1];
        let upto = if e < t { e } else { t };
        &self.prefix[k - 1] + &(upto - s)
    }

    pub fn remaining_at(&self, t: &TimeValue) -> TimeValue {
        &self.p_true - &self.processed_by(t)
    }

    /// Released at or before `t` and not completed by `t`.
    pub fn is_pending(&self, t: &TimeValue) -> bool {
        self.release <= *t && self.completion.as_ref().is_none_or(|c| c > t)
    }
}

/// Per-job view of a trace: release, completion and processing intervals.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub jobs: Vec<JobRecord>,
    pub end: TimeValue,
}

impl Timeline {
    pub fn new(trace: &Trace) -> Result<Timeline> {
        let mut jobs: Vec<JobRecord> = trace
            .instance
            .jobs
            .iter()
            .map(|j| JobRecord {
                release: j.release.clone(),
                p_true: j.p_true.clone(),
                class: j.class(),
                completion: None,
                intervals: Vec::new(),
                prefix: vec![TimeValue::zero()],
            })
            .collect();
        let mut open: Vec<Option<TimeValue>> = vec![None; jobs.len()];
        let n = jobs.len();
        let job_of = |id: Option<JobId>, kind: EventKind| -> Result<JobId> {
            match id {
                Some(id) if id < n => Ok(id),
                _ => Err(Error::MalformedTrace(format!("{kind} event with missing or unknown job"))),
            }
        };
        for ev in &trace.events {
            match ev.kind {
                EventKind::Start => {
                    let id = job_of(ev.job, ev.kind)?;
                    open[id] = Some(ev.time.clone());
                }
                EventKind::Preempt | EventKind::Complete => {
                    let id = job_of(ev.job, ev.kind)?;
                    if let Some(start) = open[id].take() {
                        if start < ev.time {
                            jobs[id].intervals.push((start, ev.time.clone()));
                        }
                    }
                    if ev.kind == EventKind::Complete {
                        jobs[id].completion = Some(ev.time.clone());
                    }
                }
                _ => {}
            }
        }
        let end = trace.end_time();
        for (id, start) in open.into_iter().enumerate() {
            if let Some(start) = start {
                if start < end {
                    jobs[id].intervals.push((start, end.clone()));
                }
            }
        }
        for job in &mut jobs {
            let mut acc = TimeValue::zero();
            for (s, e) in &job.intervals {
                acc += e - s;
                job.prefix.push(acc.clone());
            }
        }
        Ok(Timeline { jobs, end })
    }

    pub fn pending_at(&self, t: &TimeValue) -> usize {
        self.jobs.iter().filter(|j| j.is_pending(t)).count()
    }

    pub fn pending_at_least(&self, t: &TimeValue, x: &TimeValue) -> usize {
        self.jobs
            .iter()
            .filter(|j| j.is_pending(t) && j.remaining_at(t) >= *x)
            .count()
    }

    pub fn total_flow_time(&self) -> Result<TimeValue> {
        let mut total = TimeValue::zero();
        for (id, j) in self.jobs.iter().enumerate() {
            let c = j.completion.as_ref().ok_or(Error::IncompleteTrace(id))?;
            total += c - &j.release;
        }
        Ok(total)
    }
}

/// Exact sum of `completion - release` over all jobs.
pub fn total_flow_time(trace: &Trace) -> Result<TimeValue> {
    Timeline::new(trace)?.total_flow_time()
}

/// Number of jobs released by `t` and not yet completed at `t`.
pub fn pending_at(trace: &Trace, t: &TimeValue) -> Result<usize> {
    Ok(Timeline::new(trace)?.pending_at(t))
}

/// Pending jobs at `t` whose remaining volume is at least `x`.
pub fn pending_at_least(trace: &Trace, t: &TimeValue, x: &TimeValue) -> Result<usize> {
    Ok(Timeline::new(trace)?.pending_at_least(t, x))
}
