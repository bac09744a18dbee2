use std::collections::{BTreeSet, HashMap};

use crate::engine::{Annotation, JobView, Machine, Scheduler};
use crate::model::JobId;
use crate::rational::TimeValue;

/// Clairvoyant shortest remaining processing time. Serves as the optimum:
/// it minimizes total flow time and, at every instant, the pending count.
#[derive(Debug, Default)]
pub struct Srpt {
    releases: HashMap<JobId, TimeValue>,
    fresh: Vec<JobId>,
    /// Pending jobs other than `current`, keyed (remaining, release, id).
    waiting: BTreeSet<(TimeValue, TimeValue, JobId)>,
    current: Option<JobId>,
}

impl Srpt {
    pub fn new() -> Self {
        Srpt::default()
    }
}

/// Pure form of the SRPT rule over `(id, remaining, release)` triples:
/// least remaining, then the running job, then earliest release, then id.
pub fn srpt_choose(pending: &[(JobId, TimeValue, TimeValue)], running: Option<JobId>) -> Option<JobId> {
    pending
        .iter()
        .min_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| (Some(b.0) == running).cmp(&(Some(a.0) == running)))
                .then_with(|| a.2.cmp(&b.2))
                .then_with(|| a.0.cmp(&b.0))
        })
        .map(|p| p.0)
}

impl Scheduler for Srpt {
    fn key(&self) -> &'static str {
        "srpt"
    }

    fn clairvoyant(&self) -> bool {
        true
    }

    fn on_release(&mut self, job: JobView) {
        self.releases.insert(job.id, job.release);
        self.fresh.push(job.id);
    }

    fn on_complete(&mut self, job: JobId, _now: &TimeValue) {
        if self.current == Some(job) {
            self.current = None;
        }
        self.releases.remove(&job);
    }

    fn choose(&mut self, machine: &Machine<'_>, _notes: &mut Vec<Annotation>) -> Option<JobId> {
        let remaining = |id: JobId| machine.remaining(id).expect("srpt runs clairvoyant").clone();
        for id in self.fresh.drain(..) {
            self.waiting.insert((remaining(id), self.releases[&id].clone(), id));
        }
        let best = self.waiting.first().cloned();
        match (self.current, best) {
            (Some(cur), Some(cand)) if cand.0 < remaining(cur) => {
                self.waiting.remove(&cand);
                self.waiting.insert((remaining(cur), self.releases[&cur].clone(), cur));
                self.current = Some(cand.2);
            }
            (Some(_), _) => {}
            (None, Some(cand)) => {
                self.waiting.remove(&cand);
                self.current = Some(cand.2);
            }
            (None, None) => {}
        }
        self.current
    }
}
