use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::engine::JobView;
use crate::model::JobId;
use crate::rational::TimeValue;

/// Pending jobs bucketed by class: full jobs ordered by (release, id) inside
/// each class, and at most one partial job per class.
#[derive(Debug, Default, Clone)]
pub struct ClassBook {
    views: HashMap<JobId, JobView>,
    full: BTreeMap<i32, BTreeSet<(TimeValue, JobId)>>,
    partial: BTreeMap<i32, JobId>,
}

impl ClassBook {
    pub fn insert_full(&mut self, view: JobView) {
        self.full
            .entry(view.class)
            .or_default()
            .insert((view.release.clone(), view.id));
        self.views.insert(view.id, view);
    }

    pub fn view(&self, id: JobId) -> &JobView {
        &self.views[&id]
    }

    pub fn class_of(&self, id: JobId) -> i32 {
        self.views[&id].class
    }

    pub fn is_partial(&self, id: JobId) -> bool {
        let c = self.class_of(id);
        self.partial.get(&c) == Some(&id)
    }

    pub fn remove(&mut self, id: JobId) {
        let Some(view) = self.views.remove(&id) else { return };
        if self.partial.get(&view.class) == Some(&id) {
            self.partial.remove(&view.class);
        } else if let Some(set) = self.full.get_mut(&view.class) {
            set.remove(&(view.release, id));
            if set.is_empty() {
                self.full.remove(&view.class);
            }
        }
    }

    /// Minimum-class full job; ties by earliest release, then smallest id.
    pub fn min_full(&self) -> Option<JobId> {
        self.full.values().next().and_then(|s| s.first()).map(|(_, id)| *id)
    }

    pub fn min_full_class(&self) -> Option<i32> {
        self.full.keys().next().copied()
    }

    /// Number of full jobs with class `< bound`, counting no further than `cap`.
    pub fn count_full_below(&self, bound: i32, cap: usize) -> usize {
        let mut n = 0;
        for set in self.full.range(..bound).map(|(_, s)| s) {
            n += set.len();
            if n >= cap {
                return cap;
            }
        }
        n
    }

    pub fn any_full_in(&self, lo: i32, hi: i32) -> bool {
        lo <= hi && self.full.range(lo..=hi).next().is_some()
    }

    /// Turn a full job into the partial job of its class.
    pub fn mark_partial(&mut self, id: JobId) {
        let view = &self.views[&id];
        let class = view.class;
        let key = (view.release.clone(), id);
        let set = self.full.get_mut(&class).expect("marked job is full");
        assert!(set.remove(&key), "marked job is full");
        if set.is_empty() {
            self.full.remove(&class);
        }
        let prev = self.partial.insert(class, id);
        assert!(prev.is_none(), "second partial job in class {class}");
    }

    pub fn has_partial(&self) -> bool {
        !self.partial.is_empty()
    }

    pub fn min_partial(&self) -> Option<(i32, JobId)> {
        self.partial.iter().next().map(|(&c, &id)| (c, id))
    }

    /// Partial job of the smallest class strictly above `class`.
    pub fn next_partial_above(&self, class: i32) -> Option<(i32, JobId)> {
        use std::ops::Bound::{Excluded, Unbounded};
        self.partial
            .range((Excluded(class), Unbounded))
            .next()
            .map(|(&c, &id)| (c, id))
    }

    pub fn partials(&self) -> impl Iterator<Item = (i32, JobId)> + '_ {
        self.partial.iter().map(|(&c, &id)| (c, id))
    }

    pub fn full_count(&self) -> usize {
        self.full.values().map(BTreeSet::len).sum()
    }
}
