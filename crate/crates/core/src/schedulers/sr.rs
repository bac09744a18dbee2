use crate::engine::{Annotation, JobView, Machine, MarkKind, Scheduler};
use crate::model::JobId;
use crate::rational::TimeValue;
use crate::schedulers::book::ClassBook;
use crate::schedulers::Step;

/// The special-rule algorithm for semi-clairvoyant scheduling: keep working on
/// the minimum-class partial job `q` until two full jobs exist, one of class
/// at most `c(q)` and another of class strictly below `c(q)`.
#[derive(Debug, Default)]
pub struct SpecialRule {
    book: ClassBook,
}

impl SpecialRule {
    pub fn new() -> Self {
        SpecialRule::default()
    }

    pub fn book(&self) -> &ClassBook {
        &self.book
    }

    /// One iteration of the decision loop.
    pub fn sr_step(&mut self) -> Option<Step> {
        if !self.book.has_partial() {
            let id = self.book.min_full()?;
            self.book.mark_partial(id);
            return Some(Step::Mark(id, MarkKind::Plain));
        }
        let (c, q) = self.book.min_partial()?;
        // Every other job of class <= c(q) is full: q is the lowest partial.
        if self.book.count_full_below(c, 1) >= 1 && self.book.count_full_below(c + 1, 2) >= 2 {
            let id = self.book.min_full().expect("a full job exists");
            self.book.mark_partial(id);
            return Some(Step::Mark(id, MarkKind::Plain));
        }
        Some(Step::Process(q))
    }
}

impl Scheduler for SpecialRule {
    fn key(&self) -> &'static str {
        "sr"
    }

    fn on_release(&mut self, job: JobView) {
        self.book.insert_full(job);
    }

    fn on_complete(&mut self, job: JobId, _now: &TimeValue) {
        self.book.remove(job);
    }

    fn choose(&mut self, _machine: &Machine<'_>, notes: &mut Vec<Annotation>) -> Option<JobId> {
        loop {
            match self.sr_step()? {
                Step::Process(id) => return Some(id),
                step => notes.push(step.annotation()),
            }
        }
    }
}
