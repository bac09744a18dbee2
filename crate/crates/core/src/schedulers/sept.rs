use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::engine::{Annotation, JobView, Machine, MarkKind, Scheduler};
use crate::model::JobId;
use crate::rational::TimeValue;

#[derive(Debug, Default, Clone)]
struct ClassQueue {
    partial: BTreeSet<(TimeValue, JobId)>,
    full: BTreeSet<(TimeValue, JobId)>,
}

/// Shortest estimated processing time: always a job of the minimum estimate
/// class, preferring one that was already started.
#[derive(Debug, Default)]
pub struct Sept {
    classes: BTreeMap<i32, ClassQueue>,
    index: HashMap<JobId, (i32, TimeValue)>,
}

impl Sept {
    pub fn new() -> Self {
        Sept::default()
    }

    /// Pick from the minimum class; a full pick becomes partial.
    pub fn sept_choose(&mut self, notes: &mut Vec<Annotation>) -> Option<JobId> {
        let queue = self.classes.values_mut().next()?;
        if let Some((_, id)) = queue.partial.first() {
            return Some(*id);
        }
        let key = queue.full.pop_first()?;
        let id = key.1;
        queue.partial.insert(key);
        notes.push(Annotation::MarkPartial { job: id, kind: MarkKind::Plain });
        Some(id)
    }
}

impl Scheduler for Sept {
    fn key(&self) -> &'static str {
        "sept"
    }

    fn on_release(&mut self, job: JobView) {
        self.classes
            .entry(job.class)
            .or_default()
            .full
            .insert((job.release.clone(), job.id));
        self.index.insert(job.id, (job.class, job.release));
    }

    fn on_complete(&mut self, job: JobId, _now: &TimeValue) {
        let Some((class, release)) = self.index.remove(&job) else { return };
        if let Some(queue) = self.classes.get_mut(&class) {
            let key = (release, job);
            if !queue.partial.remove(&key) {
                queue.full.remove(&key);
            }
            if queue.partial.is_empty() && queue.full.is_empty() {
                self.classes.remove(&class);
            }
        }
    }

    fn choose(&mut self, _machine: &Machine<'_>, notes: &mut Vec<Annotation>) -> Option<JobId> {
        self.sept_choose(notes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn view(id: JobId, release: i128, est: i128) -> JobView {
        let p_est = q(est, 1);
        JobView { id, release: q(release, 1), class: p_est.floor_log2().unwrap(), p_est }
    }

    #[test]
    fn newly_released_lower_class_job_takes_over() {
        let mut s = Sept::new();
        let mut notes = Vec::new();
        s.on_release(view(0, 0, 16));
        assert_eq!(s.sept_choose(&mut notes), Some(0));
        s.on_release(view(1, 1, 8));
        notes.clear();
        assert_eq!(s.sept_choose(&mut notes), Some(1));
        assert_eq!(notes, vec![Annotation::MarkPartial { job: 1, kind: MarkKind::Plain }]);
    }

    #[test]
    fn prefers_partial_within_class() {
        let mut s = Sept::new();
        let mut notes = Vec::new();
        s.on_release(view(0, 0, 4));
        assert_eq!(s.sept_choose(&mut notes), Some(0));
        s.on_release(view(1, 0, 5));
        notes.clear();
        assert_eq!(s.sept_choose(&mut notes), Some(0));
        assert!(notes.is_empty());
    }

    #[test]
    fn earliest_release_breaks_ties() {
        let mut s = Sept::new();
        let mut notes = Vec::new();
        s.on_release(view(3, 0, 1));
        s.on_release(view(1, 2, 1));
        assert_eq!(s.sept_choose(&mut notes), Some(3));
    }
}
