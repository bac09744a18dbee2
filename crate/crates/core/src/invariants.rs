//! Replays a trace event by event and checks the structural properties the
//! schedulers promise, reporting the first witness of every violated check.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::engine::{EventKind, Timeline, Trace};
use crate::error::Result;
use crate::metrics::{far_behind_from_profiles, FarBehindReport, PendingSweep, VolumeProfile};
use crate::model::{distortion_of, separator_sigma, JobId};
use crate::rational::TimeValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    WellFormed,
    MachineExclusive,
    WorkConserving,
    ProcessedMatchesSize,
    OnePartialPerClass,
    ZigZagAlternation,
    ZagHasHigherPartial,
    ClassBarrier,
    AtMostOneBelowProcessed,
    ZigZagPartialBound,
    SigmaHatMonotone,
    SigmaHatBounded,
    DlPartialBound,
    SparsifiedGap,
    SparsifiedSize,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::WellFormed => "well-formed",
            Check::MachineExclusive => "machine-exclusive",
            Check::WorkConserving => "work-conserving",
            Check::ProcessedMatchesSize => "processed-matches-size",
            Check::OnePartialPerClass => "one-partial-per-class",
            Check::ZigZagAlternation => "zigzag-alternation",
            Check::ZagHasHigherPartial => "zag-has-higher-partial",
            Check::ClassBarrier => "class-barrier",
            Check::AtMostOneBelowProcessed => "at-most-one-below-processed",
            Check::ZigZagPartialBound => "zigzag-partial-bound",
            Check::SigmaHatMonotone => "sigma-hat-monotone",
            Check::SigmaHatBounded => "sigma-hat-bounded",
            Check::DlPartialBound => "dl-partial-bound",
            Check::SparsifiedGap => "sparsified-gap",
            Check::SparsifiedSize => "sparsified-size",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub t: TimeValue,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    /// Event times (or events) at which the check failed.
    pub violations: usize,
    pub first: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub scheduler: String,
    pub sigma: i32,
    pub outcomes: Vec<CheckOutcome>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.violations == 0)
    }

    pub fn outcome(&self, check: Check) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.check == check)
    }

    pub fn violations(&self) -> usize {
        self.outcomes.iter().map(|o| o.violations).sum()
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            match &o.first {
                None => writeln!(f, "PASS {}", o.check)?,
                Some(w) => writeln!(f, "FAIL {} ({} violations; first at t={}: {})", o.check, o.violations, w.t, w.detail)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Plain,
    Zig,
    Zag,
    ZigZag,
}

impl Kind {
    fn from_tag(tag: Option<&str>) -> Kind {
        match tag {
            Some("zig") => Kind::Zig,
            Some("zag") => Kind::Zag,
            Some("zigzag") => Kind::ZigZag,
            _ => Kind::Plain,
        }
    }
}

struct Tally {
    outcomes: BTreeMap<Check, CheckOutcome>,
}

impl Tally {
    fn new(checks: &[Check]) -> Self {
        let outcomes = checks.iter().map(|&c| (c, CheckOutcome { check: c, violations: 0, first: None })).collect();
        Tally { outcomes }
    }

    fn fail(&mut self, check: Check, t: &TimeValue, detail: impl FnOnce() -> String) {
        let o = self.outcomes.get_mut(&check).expect("check enabled");
        o.violations += 1;
        if o.first.is_none() {
            o.first = Some(Witness { t: t.clone(), detail: detail() });
        }
    }

    fn expect(&mut self, check: Check, ok: bool, t: &TimeValue, detail: impl FnOnce() -> String) {
        if self.outcomes.contains_key(&check) && !ok {
            self.fail(check, t, detail);
        }
    }
}

fn marking(key: &str) -> bool {
    matches!(key, "sr" | "zigzag" | "dl")
}

/// Class separation used for DL and the sparsification checks. `σ̂` starts
/// at 2, so 2 is the floor even for undistorted inputs.
pub fn effective_sigma(trace: &Trace) -> i32 {
    let mu = distortion_of(&trace.instance).mu;
    separator_sigma(&mu).expect("distortion is at least 1").max(2)
}

/// Run every check that applies to the trace's scheduler. Passing the SRPT
/// trace of the same instance as `opt` enables the far-behind checks.
pub fn check_trace(trace: &Trace, opt: Option<&Trace>) -> Result<InvariantReport> {
    let key = trace.scheduler.as_str();
    let mut checks = vec![Check::WellFormed, Check::MachineExclusive, Check::WorkConserving, Check::ProcessedMatchesSize];
    if marking(key) {
        checks.push(Check::OnePartialPerClass);
    }
    if key == "zigzag" {
        checks.extend([
            Check::ZigZagAlternation,
            Check::ZagHasHigherPartial,
            Check::ClassBarrier,
            Check::AtMostOneBelowProcessed,
            Check::ZigZagPartialBound,
        ]);
    }
    if key == "dl" {
        checks.extend([Check::SigmaHatMonotone, Check::SigmaHatBounded, Check::DlPartialBound]);
    }
    let far_behind = opt.filter(|_| matches!(key, "zigzag" | "dl"));
    if far_behind.is_some() {
        checks.extend([Check::SparsifiedGap, Check::SparsifiedSize]);
    }
    let mut tally = Tally::new(&checks);
    let sigma = effective_sigma(trace);
    let timeline = Timeline::new(trace)?;

    replay(trace, &timeline, sigma, &mut tally);
    check_intervals(trace, &timeline, &mut tally);
    if let Some(opt) = far_behind {
        check_far_behind(trace, opt, &timeline, sigma, &mut tally)?;
    }

    Ok(InvariantReport {
        scheduler: trace.scheduler.clone(),
        sigma,
        outcomes: tally.outcomes.into_values().collect(),
    })
}

struct State {
    pending: BTreeSet<JobId>,
    released: Vec<bool>,
    completed: Vec<bool>,
    running: Option<JobId>,
    partial: HashMap<JobId, Kind>,
    sigma_hat: i32,
}

impl State {
    fn dump(&self, classes: &[i32]) -> String {
        let mut partial: Vec<_> = self.partial.iter().map(|(&id, k)| (classes[id], id, *k)).collect();
        partial.sort();
        let partial: Vec<String> = partial.iter().map(|(c, id, k)| format!("{id}@{c}:{k:?}")).collect();
        format!(
            "running={:?} pending={} partial=[{}]",
            self.running,
            self.pending.len(),
            partial.join(" ")
        )
    }

    /// Pending partial jobs by decreasing class.
    fn partials_desc(&self, classes: &[i32]) -> Vec<(i32, JobId, Kind)> {
        let mut v: Vec<_> = self.partial.iter().map(|(&id, &k)| (classes[id], id, k)).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}

impl PartialOrd for Kind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Kind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

fn replay(trace: &Trace, timeline: &Timeline, sigma: i32, tally: &mut Tally) {
    let jobs = &trace.instance.jobs;
    let n = jobs.len();
    let classes: Vec<i32> = jobs.iter().map(|j| j.class()).collect();
    let mut st = State {
        pending: BTreeSet::new(),
        released: vec![false; n],
        completed: vec![false; n],
        running: None,
        partial: HashMap::new(),
        sigma_hat: 2,
    };
    let events = &trace.events;
    let mut idx = 0;
    let mut prev_time: Option<TimeValue> = None;
    while idx < events.len() {
        let t = events[idx].time.clone();
        if prev_time.as_ref().is_some_and(|p| *p > t) {
            tally.fail(Check::WellFormed, &t, || "events out of time order".into());
        }
        while idx < events.len() && events[idx].time == t {
            apply(&events[idx], &mut st, jobs, &classes, sigma, tally);
            idx += 1;
        }
        settle_checks(&t, &st, &classes, sigma, timeline, tally);
        prev_time = Some(t);
    }
    let end = trace.end_time();
    for id in 0..n {
        tally.expect(Check::WellFormed, st.released[id] && st.completed[id], &end, || {
            format!("job {id} released={} completed={}", st.released[id], st.completed[id])
        });
    }
}

fn apply(
    ev: &crate::engine::TraceEvent,
    st: &mut State,
    jobs: &[crate::model::Job],
    classes: &[i32],
    sigma: i32,
    tally: &mut Tally,
) {
    let t = &ev.time;
    let job = match (ev.kind, ev.job) {
        (EventKind::SigmaUpdate | EventKind::Snapshot, _) => None,
        (_, Some(id)) if id < jobs.len() => Some(id),
        (kind, id) => {
            tally.fail(Check::WellFormed, t, || format!("{kind} event names unknown job {id:?}"));
            return;
        }
    };
    match ev.kind {
        EventKind::Release => {
            let id = job.expect("checked above");
            tally.expect(Check::WellFormed, !st.released[id] && jobs[id].release == *t, t, || {
                format!("job {id} released twice or at the wrong time")
            });
            st.released[id] = true;
            st.pending.insert(id);
        }
        EventKind::Start => {
            let id = job.expect("checked above");
            tally.expect(Check::MachineExclusive, st.running.is_none(), t, || {
                format!("job {id} started while job {:?} runs", st.running)
            });
            tally.expect(Check::WellFormed, st.pending.contains(&id), t, || format!("job {id} started while not pending"));
            st.running = Some(id);
        }
        EventKind::Preempt => {
            let id = job.expect("checked above");
            tally.expect(Check::WellFormed, st.running == Some(id), t, || format!("job {id} preempted while not running"));
            st.running = None;
        }
        EventKind::Complete => {
            let id = job.expect("checked above");
            tally.expect(Check::WellFormed, st.pending.contains(&id) && st.running == Some(id), t, || {
                format!("job {id} completed while not running")
            });
            st.completed[id] = true;
            st.pending.remove(&id);
            st.partial.remove(&id);
            if st.running == Some(id) {
                st.running = None;
            }
        }
        EventKind::MarkPartial => {
            let id = job.expect("checked above");
            tally.expect(Check::WellFormed, st.pending.contains(&id) && !st.partial.contains_key(&id), t, || {
                format!("job {id} marked while not a pending full job")
            });
            let c = classes[id];
            if tally.outcomes.contains_key(&Check::OnePartialPerClass) {
                let clash = st.partial.keys().find(|&&q| classes[q] == c).copied();
                tally.expect(Check::OnePartialPerClass, clash.is_none(), t, || {
                    format!("job {id} marked in class {c} which already holds partial job {clash:?}; {}", st.dump(classes))
                });
            }
            if tally.outcomes.contains_key(&Check::ClassBarrier) {
                let blocker = st.partial.keys().find(|&&q| classes[q] <= c).copied();
                tally.expect(Check::ClassBarrier, blocker.is_none(), t, || {
                    format!("job {id} of class {c} marked while partial job {blocker:?} is not above it")
                });
            }
            st.partial.insert(id, Kind::from_tag(ev.tag.as_deref()));
        }
        EventKind::Morph => {
            let id = job.expect("checked above");
            let ok = st.partial.get(&id) == Some(&Kind::Zag);
            tally.expect(Check::WellFormed, ok, t, || format!("job {id} morphed but is not a zag job"));
            if ok {
                st.partial.insert(id, Kind::ZigZag);
            }
        }
        EventKind::SigmaUpdate => {
            let value: Option<i32> = ev.tag.as_deref().and_then(|s| s.parse().ok());
            match value {
                Some(v) => {
                    if tally.outcomes.contains_key(&Check::SigmaHatMonotone) {
                        tally.expect(Check::SigmaHatMonotone, v > st.sigma_hat, t, || {
                            format!("sigma-hat went from {} to {v}", st.sigma_hat)
                        });
                        tally.expect(Check::SigmaHatBounded, v <= sigma, t, || format!("sigma-hat {v} exceeds sigma {sigma}"));
                    }
                    st.sigma_hat = st.sigma_hat.max(v);
                }
                None => tally.fail(Check::WellFormed, t, || "sigma update without a numeric value".into()),
            }
        }
        EventKind::Snapshot => {}
    }
}

/// Checks on the state that holds from `t` until the next event time.
fn settle_checks(t: &TimeValue, st: &State, classes: &[i32], sigma: i32, timeline: &Timeline, tally: &mut Tally) {
    tally.expect(Check::WorkConserving, st.pending.is_empty() || st.running.is_some(), t, || {
        format!("machine idles with {} pending jobs", st.pending.len())
    });
    let dp = st.partial.len();
    let df = st.pending.len() - dp;
    if tally.outcomes.contains_key(&Check::ZigZagAlternation) {
        let desc = st.partials_desc(classes);
        for (pos, &(c, id, kind)) in desc.iter().enumerate() {
            let zig_slot = pos % 2 == 0;
            let ok = if zig_slot { kind == Kind::Zig } else { matches!(kind, Kind::Zag | Kind::ZigZag) };
            tally.expect(Check::ZigZagAlternation, ok, t, || {
                format!("partial job {id} of class {c} is {kind:?} at position {}; {}", pos + 1, st.dump(classes))
            });
            if kind == Kind::Zag {
                tally.expect(Check::ZagHasHigherPartial, pos > 0, t, || format!("zag job {id} has no higher partial job"));
            }
        }
        if let Some(r) = st.running {
            let c = classes[r];
            let higher_ok = desc.iter().all(|&(qc, q, _)| q == r || qc > c);
            tally.expect(Check::ClassBarrier, higher_ok, t, || {
                format!("running job {r} of class {c} is not below every other partial job; {}", st.dump(classes))
            });
            if st.partial.contains_key(&r) {
                let below = st.pending.iter().filter(|&&j| classes[j] < c).count();
                tally.expect(Check::AtMostOneBelowProcessed, below <= 1, t, || {
                    format!("partial job {r} of class {c} runs with {below} pending jobs below it")
                });
            }
        }
        tally.expect(Check::ZigZagPartialBound, dp <= 4 * df + 3, t, || format!("partial {dp} > 4 * full {df} + 3"));
    }
    if tally.outcomes.contains_key(&Check::OnePartialPerClass) {
        let distinct: BTreeSet<i32> = st.partial.keys().map(|&q| classes[q]).collect();
        tally.expect(Check::OnePartialPerClass, distinct.len() == dp, t, || st.dump(classes));
    }
    if tally.outcomes.contains_key(&Check::DlPartialBound) {
        let bound = (sigma as usize + 2) * df + 1;
        tally.expect(Check::DlPartialBound, dp <= bound, t, || {
            format!("partial {dp} > (sigma + 2) * full {df} + 1 with sigma {sigma}")
        });
    }
    if let Some(r) = st.running {
        let started_ok = timeline.jobs[r].release <= *t;
        tally.expect(Check::WellFormed, started_ok, t, || format!("job {r} runs before its release"));
    }
}

fn check_intervals(trace: &Trace, timeline: &Timeline, tally: &mut Tally) {
    let mut all: Vec<(&TimeValue, &TimeValue, JobId)> = Vec::new();
    for (id, rec) in timeline.jobs.iter().enumerate() {
        for (s, e) in &rec.intervals {
            all.push((s, e, id));
        }
        let done = rec.completion.clone().unwrap_or_else(|| trace.end_time());
        let processed = rec.processed_by(&done);
        tally.expect(Check::ProcessedMatchesSize, rec.completion.is_none() || processed == rec.p_true, &done, || {
            format!("job {id} completed after {processed} of {}", rec.p_true)
        });
        if let (Some((s, _)), Some((_, e))) = (rec.intervals.first(), rec.intervals.last()) {
            let in_window = *s >= rec.release && rec.completion.as_ref().is_none_or(|c| e <= c);
            tally.expect(Check::WellFormed, in_window, s, || format!("job {id} processed outside its lifetime"));
        }
    }
    all.sort();
    for w in all.windows(2) {
        let ((_, e0, a), (s1, _, b)) = (w[0], w[1]);
        tally.expect(Check::MachineExclusive, e0 <= s1, s1, || format!("jobs {a} and {b} overlap"));
    }
}

fn check_far_behind(trace: &Trace, opt: &Trace, timeline: &Timeline, sigma: i32, tally: &mut Tally) -> Result<()> {
    if trace.instance.jobs != opt.instance.jobs {
        return Err(crate::error::Error::MismatchedInstances);
    }
    let Some(range) = trace.instance.class_range() else { return Ok(()) };
    let mu2 = distortion_of(&trace.instance).mu2;
    let opt_tl = Timeline::new(opt)?;
    let (mut sa, mut so) = (PendingSweep::new(timeline), PendingSweep::new(&opt_tl));
    for t in crate::metrics::joint_event_times(trace, opt) {
        let pa = VolumeProfile::from_pending(timeline, sa.advance_to(&t), &t);
        let po = VolumeProfile::from_pending(&opt_tl, so.advance_to(&t), &t);
        let report = FarBehindReport::new(t.clone(), sigma, far_behind_from_profiles(&pa, &po, range, &mu2));
        tally.expect(Check::SparsifiedGap, report.gaps_hold(), &t, || format!("{:?}", report.s_prime));
        tally.expect(Check::SparsifiedSize, report.size_holds(), &t, || format!("|S|={} |S'|={}", report.s.len(), report.s_prime.len()));
    }
    Ok(())
}

/// Event times at which `δ^p(t) > (σ + 2) δ^f(t)` for a DL trace, with no
/// additive slack. Informational: a lone pending partial job already breaks it.
pub fn dl_strict_partial_bound_failures(trace: &Trace) -> Result<Vec<(TimeValue, usize, usize)>> {
    let sigma = effective_sigma(trace);
    let marks = crate::metrics::mark_times(trace)?;
    let timeline = Timeline::new(trace)?;
    let mut sweep = PendingSweep::new(&timeline);
    let mut out = Vec::new();
    for t in trace.event_times() {
        let (dp, df) = crate::metrics::split_partial(sweep.advance_to(&t), &marks, &t);
        if dp > (sigma as usize + 2) * df {
            out.push((t, dp, df));
        }
    }
    Ok(out)
}
