use crate::engine::{Annotation, JobView, Machine, MarkKind, Scheduler};
use crate::model::JobId;
use crate::rational::{Rational, TimeValue};
use crate::schedulers::book::ClassBook;
use crate::schedulers::Step;

/// Distortion-learning special rule. Like SR, but the second witness may sit
/// up to `σ̂ - 1` classes above `c(q)`, where `σ̂` grows each time a job is
/// seen running past `2^i` times its estimate.
#[derive(Debug)]
pub struct Dl {
    book: ClassBook,
    sigma_hat: i32,
}

impl Default for Dl {
    fn default() -> Self {
        Dl { book: ClassBook::default(), sigma_hat: 2 }
    }
}

/// Largest `i` with `processed >= 2^i * est`, if any `i >= 0` qualifies.
fn overrun_exponent(processed: &TimeValue, est: &TimeValue) -> Option<i32> {
    if processed < est {
        return None;
    }
    (processed / est).floor_log2().ok()
}

impl Dl {
    pub fn new() -> Self {
        Dl::default()
    }

    pub fn sigma_hat(&self) -> i32 {
        self.sigma_hat
    }

    pub fn book(&self) -> &ClassBook {
        &self.book
    }

    /// One iteration of the decision loop. A job sitting exactly on an
    /// overrun threshold counts as past it when it is about to keep running.
    pub fn dl_step(&mut self, machine: &Machine<'_>) -> Option<Step> {
        if !self.book.has_partial() {
            let id = self.book.min_full()?;
            self.book.mark_partial(id);
            return Some(Step::Mark(id, MarkKind::Plain));
        }
        let (c, q) = self.book.min_partial()?;
        if self.book.count_full_below(c, 1) >= 1 && self.book.count_full_below(c + self.sigma_hat, 2) >= 2 {
            let id = self.book.min_full().expect("a full job exists");
            self.book.mark_partial(id);
            return Some(Step::Mark(id, MarkKind::Plain));
        }
        if let Some(i) = overrun_exponent(machine.processed(q), &self.book.view(q).p_est) {
            if i + 2 > self.sigma_hat {
                self.sigma_hat = i + 2;
                return Some(Step::Sigma(self.sigma_hat));
            }
        }
        Some(Step::Process(q))
    }
}

impl Scheduler for Dl {
    fn key(&self) -> &'static str {
        "dl"
    }

    fn on_release(&mut self, job: JobView) {
        self.book.insert_full(job);
    }

    fn on_complete(&mut self, job: JobId, _now: &TimeValue) {
        self.book.remove(job);
    }

    fn choose(&mut self, machine: &Machine<'_>, notes: &mut Vec<Annotation>) -> Option<JobId> {
        loop {
            match self.dl_step(machine)? {
                Step::Process(id) => return Some(id),
                step => notes.push(step.annotation()),
            }
        }
    }

    /// Next time the running job crosses a threshold that would raise `σ̂`.
    fn wakeup(&self, machine: &Machine<'_>, job: JobId) -> Option<TimeValue> {
        let processed = machine.processed(job);
        let est = &self.book.view(job).p_est;
        let mut i = (self.sigma_hat - 1).max(0);
        if let Some(seen) = overrun_exponent(processed, est) {
            i = i.max(seen + 1);
        }
        let bound = Rational::pow2(i) * est;
        Some(machine.now + &(bound - processed))
    }
}
