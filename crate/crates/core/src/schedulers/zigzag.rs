//! The zig/zag/zigzag marking algorithm.
//!
//! Only the minimum-class partial job `q` is ever processed. What `q` does
//! about lower-class full jobs depends on its type:
//!
//! * zig: appoints the minimum-class job at once and marks it zag;
//! * zag: first morphs into zigzag if a full job sits in the class range
//!   `[c(q), c(q̂)]` up to the next partial job `q̂`; otherwise appoints the
//!   minimum-class job as zig only when two jobs of class below `c(q)` exist;
//! * zigzag: appoints the minimum-class job at once and marks it zig.

use std::collections::HashMap;

use crate::engine::{Annotation, JobView, Machine, MarkKind, Scheduler};
use crate::model::JobId;
use crate::rational::TimeValue;
use crate::schedulers::book::ClassBook;
use crate::schedulers::Step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartialType {
    Zig,
    Zag,
    ZigZag,
}

#[derive(Debug, Default)]
pub struct ZigZag {
    book: ClassBook,
    types: HashMap<JobId, PartialType>,
}

impl ZigZag {
    pub fn new() -> Self {
        ZigZag::default()
    }

    pub fn book(&self) -> &ClassBook {
        &self.book
    }

    pub fn partial_type(&self, id: JobId) -> Option<PartialType> {
        self.types.get(&id).copied()
    }

    fn appoint(&mut self, id: JobId, ty: PartialType) -> Step {
        self.book.mark_partial(id);
        self.types.insert(id, ty);
        let kind = if ty == PartialType::Zag { MarkKind::Zag } else { MarkKind::Zig };
        Step::Mark(id, kind)
    }

    /// One iteration of the decision loop.
    pub fn zigzag_step(&mut self) -> Option<Step> {
        let Some((c, q)) = self.book.min_partial() else {
            let id = self.book.min_full()?;
            return Some(self.appoint(id, PartialType::Zig));
        };
        // The minimum-class job overall; when its class is below c(q) it is full.
        let lower = self.book.min_full_class().filter(|&m| m < c);
        match self.types[&q] {
            PartialType::Zig => {
                if lower.is_some() {
                    let id = self.book.min_full().expect("lower full job exists");
                    return Some(self.appoint(id, PartialType::Zag));
                }
            }
            PartialType::Zag => {
                let (above, _) = self
                    .book
                    .next_partial_above(c)
                    .expect("a zag job always has a higher-class partial job");
                if self.book.any_full_in(c, above) {
                    self.types.insert(q, PartialType::ZigZag);
                    return Some(Step::Morph(q));
                }
                if self.book.count_full_below(c, 2) >= 2 {
                    let id = self.book.min_full().expect("lower full job exists");
                    return Some(self.appoint(id, PartialType::Zig));
                }
            }
            PartialType::ZigZag => {
                if lower.is_some() {
                    let id = self.book.min_full().expect("lower full job exists");
                    return Some(self.appoint(id, PartialType::Zig));
                }
            }
        }
        Some(Step::Process(q))
    }
}

impl Scheduler for ZigZag {
    fn key(&self) -> &'static str {
        "zigzag"
    }

    fn on_release(&mut self, job: JobView) {
        self.book.insert_full(job);
    }

    fn on_complete(&mut self, job: JobId, _now: &TimeValue) {
        self.book.remove(job);
        self.types.remove(&job);
    }

    fn choose(&mut self, _machine: &Machine<'_>, notes: &mut Vec<Annotation>) -> Option<JobId> {
        loop {
            match self.zigzag_step()? {
                Step::Process(id) => return Some(id),
                step => notes.push(step.annotation()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, Rational};

    fn release(z: &mut ZigZag, id: JobId, class: i32) {
        z.on_release(JobView { id, release: q(id as i128, 1), p_est: Rational::pow2(class), class });
    }

    fn settle(z: &mut ZigZag) -> (Vec<Step>, JobId) {
        let mut steps = Vec::new();
        loop {
            match z.zigzag_step().unwrap() {
                Step::Process(id) => return (steps, id),
                s => steps.push(s),
            }
        }
    }

    /// Replays the four-job evolution: q1 zig, q2 appointed zag, q3 ignored,
    /// q4 turns q2 into zigzag which then appoints q3 as zig.
    #[test]
    fn four_job_evolution() {
        let mut z = ZigZag::new();
        release(&mut z, 1, 6);
        let (steps, run) = settle(&mut z);
        assert_eq!(steps, vec![Step::Mark(1, MarkKind::Zig)]);
        assert_eq!(run, 1);

        release(&mut z, 2, 4);
        let (steps, run) = settle(&mut z);
        assert_eq!(steps, vec![Step::Mark(2, MarkKind::Zag)]);
        assert_eq!(run, 2);

        release(&mut z, 3, 1);
        let (steps, run) = settle(&mut z);
        assert!(steps.is_empty());
        assert_eq!(run, 2);

        release(&mut z, 4, 5);
        let (steps, run) = settle(&mut z);
        assert_eq!(steps, vec![Step::Morph(2), Step::Mark(3, MarkKind::Zig)]);
        assert_eq!(run, 3);
        assert_eq!(z.partial_type(2), Some(PartialType::ZigZag));
        assert_eq!(z.partial_type(3), Some(PartialType::Zig));
    }

    /// Zig job of class 6 with a zag job of class 4 below it.
    fn zig_over_zag() -> ZigZag {
        let mut z = ZigZag::new();
        release(&mut z, 1, 6);
        settle(&mut z);
        release(&mut z, 2, 4);
        settle(&mut z);
        assert_eq!(z.partial_type(2), Some(PartialType::Zag));
        z
    }

    #[test]
    fn morph_range_is_inclusive_at_both_ends() {
        for class in [4, 5, 6] {
            let mut z = zig_over_zag();
            release(&mut z, 3, class);
            let (steps, run) = settle(&mut z);
            assert_eq!(steps, vec![Step::Morph(2)], "full job of class {class}");
            assert_eq!(run, 2);
        }
        let mut z = zig_over_zag();
        release(&mut z, 3, 7);
        let (steps, _) = settle(&mut z);
        assert!(steps.is_empty());
    }

    #[test]
    fn zag_appoints_with_two_lower_jobs() {
        let mut z = zig_over_zag();
        release(&mut z, 3, 2);
        release(&mut z, 4, 1);
        let (steps, run) = settle(&mut z);
        assert_eq!(steps, vec![Step::Mark(4, MarkKind::Zig)]);
        assert_eq!(run, 4);
    }

    #[test]
    fn bootstrap_picks_minimum_class() {
        let mut z = ZigZag::new();
        release(&mut z, 1, 6);
        release(&mut z, 2, 4);
        let (steps, run) = settle(&mut z);
        assert_eq!(steps, vec![Step::Mark(2, MarkKind::Zig)]);
        assert_eq!(run, 2);
    }
}
