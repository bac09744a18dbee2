//! Quantities measured on finished traces: pending counts, per-class
//! remaining volume, far-behind classes, partial/full counts and ratios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::engine::{EventKind, Timeline, Trace};
use crate::error::{Error, Result};
use crate::model::JobId;
use crate::rational::{Rational, TimeValue};

/// Walks nondecreasing times and keeps the set of pending jobs current.
pub struct PendingSweep<'a> {
    timeline: &'a Timeline,
    completions: Vec<(TimeValue, JobId)>,
    next_release: usize,
    next_completion: usize,
    active: BTreeSet<JobId>,
    last: Option<TimeValue>,
}

impl<'a> PendingSweep<'a> {
    pub fn new(timeline: &'a Timeline) -> Self {
        let mut completions: Vec<(TimeValue, JobId)> = timeline
            .jobs
            .iter()
            .enumerate()
            .filter_map(|(id, j)| j.completion.clone().map(|c| (c, id)))
            .collect();
        completions.sort();
        PendingSweep { timeline, completions, next_release: 0, next_completion: 0, active: BTreeSet::new(), last: None }
    }

    /// Jobs pending at `t`. Panics if `t` is earlier than a previous call.
    pub fn advance_to(&mut self, t: &TimeValue) -> &BTreeSet<JobId> {
        assert!(self.last.as_ref().is_none_or(|l| l <= t), "sweep times must not decrease");
        let jobs = &self.timeline.jobs;
        while self.next_release < jobs.len() && jobs[self.next_release].release <= *t {
            self.active.insert(self.next_release);
            self.next_release += 1;
        }
        while self.next_completion < self.completions.len() && self.completions[self.next_completion].0 <= *t {
            self.active.remove(&self.completions[self.next_completion].1);
            self.next_completion += 1;
        }
        self.last = Some(t.clone());
        &self.active
    }
}

/// Remaining volume of pending jobs at one time, by class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VolumeProfile {
    pub by_class: BTreeMap<i32, TimeValue>,
}

impl VolumeProfile {
    pub fn from_pending(timeline: &Timeline, pending: &BTreeSet<JobId>, t: &TimeValue) -> Self {
        let mut by_class: BTreeMap<i32, TimeValue> = BTreeMap::new();
        for &id in pending {
            let job = &timeline.jobs[id];
            *by_class.entry(job.class).or_default() += &job.remaining_at(t);
        }
        VolumeProfile { by_class }
    }

    /// `V_{=i}`.
    pub fn exactly(&self, class: i32) -> TimeValue {
        self.by_class.get(&class).cloned().unwrap_or_default()
    }

    /// `V_{<=i}`.
    pub fn at_most(&self, class: i32) -> TimeValue {
        self.by_class.range(..=class).map(|(_, v)| v.clone()).sum()
    }

    pub fn total(&self) -> TimeValue {
        self.by_class.values().cloned().sum()
    }
}

pub fn volume_profile(trace: &Trace, t: &TimeValue) -> Result<VolumeProfile> {
    let tl = Timeline::new(trace)?;
    let pending = PendingSweep::new(&tl).advance_to(t).clone();
    Ok(VolumeProfile::from_pending(&tl, &pending, t))
}

fn same_instance(alg: &Trace, opt: &Trace) -> Result<()> {
    if alg.instance.jobs != opt.instance.jobs {
        return Err(Error::MismatchedInstances);
    }
    Ok(())
}

/// Classes `i` in `range` with `V_alg,<=i - V_opt,<=i >= 2^i / mu2`.
pub fn far_behind_from_profiles(
    alg: &VolumeProfile,
    opt: &VolumeProfile,
    range: (i32, i32),
    mu2: &Rational,
) -> BTreeSet<i32> {
    let mut out = BTreeSet::new();
    let mut va = TimeValue::zero();
    let mut vo = TimeValue::zero();
    for i in range.0..=range.1 {
        va += &alg.exactly(i);
        vo += &opt.exactly(i);
        if &va - &vo >= &Rational::pow2(i) / mu2 {
            out.insert(i);
        }
    }
    out
}

pub fn far_behind_set(alg: &Trace, opt: &Trace, t: &TimeValue, mu2: &Rational) -> Result<BTreeSet<i32>> {
    same_instance(alg, opt)?;
    let Some(range) = alg.instance.class_range() else { return Ok(BTreeSet::new()) };
    let pa = volume_profile(alg, t)?;
    let po = volume_profile(opt, t)?;
    Ok(far_behind_from_profiles(&pa, &po, range, mu2))
}

/// Greedy thinning: keep the smallest class, then each next class at least
/// `2 * sigma` above the last kept one.
pub fn sparsify(s: &BTreeSet<i32>, sigma: i32) -> Vec<i32> {
    let mut kept: Vec<i32> = Vec::new();
    for &i in s {
        if kept.last().is_none_or(|&last| i - last >= 2 * sigma) {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FarBehindReport {
    pub t: TimeValue,
    pub sigma: i32,
    pub s: BTreeSet<i32>,
    pub s_prime: Vec<i32>,
}

impl FarBehindReport {
    pub fn new(t: TimeValue, sigma: i32, s: BTreeSet<i32>) -> Self {
        let s_prime = sparsify(&s, sigma);
        FarBehindReport { t, sigma, s, s_prime }
    }

    /// Adjacent kept classes are at least `2 sigma` apart.
    pub fn gaps_hold(&self) -> bool {
        self.s_prime.windows(2).all(|w| w[1] - w[0] >= 2 * self.sigma)
    }

    /// `|S| <= 2 sigma |S'|`.
    pub fn size_holds(&self) -> bool {
        self.s.len() <= 2 * self.sigma as usize * self.s_prime.len()
    }
}

/// First `mark_partial` time of every job in a trace.
pub fn mark_times(trace: &Trace) -> Result<Vec<Option<TimeValue>>> {
    if !trace.has_marks() && !trace.instance.is_empty() {
        return Err(Error::UnsupportedTrace(format!(
            "{} trace has no partial marks",
            trace.scheduler
        )));
    }
    let mut marks = vec![None; trace.instance.len()];
    for e in &trace.events {
        if e.kind == EventKind::MarkPartial {
            if let Some(id) = e.job.filter(|&id| id < marks.len()) {
                marks[id].get_or_insert_with(|| e.time.clone());
            }
        }
    }
    Ok(marks)
}

/// `(δ^p, δ^f)`: pending jobs marked partial by `t`, and the rest.
pub fn partial_full_counts(trace: &Trace, t: &TimeValue) -> Result<(usize, usize)> {
    let marks = mark_times(trace)?;
    let tl = Timeline::new(trace)?;
    let pending = PendingSweep::new(&tl).advance_to(t).clone();
    Ok(split_partial(&pending, &marks, t))
}

pub fn split_partial(pending: &BTreeSet<JobId>, marks: &[Option<TimeValue>], t: &TimeValue) -> (usize, usize) {
    let partial = pending.iter().filter(|&&id| marks[id].as_ref().is_some_and(|m| m <= t)).count();
    (partial, pending.len() - partial)
}

/// A ratio that may be infinite.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CompetitiveRatio {
    Finite(Rational),
    Infinite,
}

impl CompetitiveRatio {
    pub fn to_f64(&self) -> f64 {
        match self {
            CompetitiveRatio::Finite(r) => r.to_f64(),
            CompetitiveRatio::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            CompetitiveRatio::Finite(r) => Some(r),
            CompetitiveRatio::Infinite => None,
        }
    }
}

impl fmt::Display for CompetitiveRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompetitiveRatio::Finite(r) => write!(f, "{}", r.to_fraction_string()),
            CompetitiveRatio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for CompetitiveRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `alg / opt`; two zero flows count as ratio 1.
pub fn competitive_ratio(alg_flow: &TimeValue, opt_flow: &TimeValue) -> CompetitiveRatio {
    match (alg_flow.is_zero(), opt_flow.is_zero()) {
        (true, true) => CompetitiveRatio::Finite(Rational::one()),
        (false, true) => CompetitiveRatio::Infinite,
        _ => CompetitiveRatio::Finite(alg_flow / opt_flow),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSample {
    pub t: TimeValue,
    pub delta_alg: usize,
    pub delta_opt: usize,
    pub ratio: CompetitiveRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalRatioReport {
    pub samples: Vec<LocalSample>,
    pub max_ratio: CompetitiveRatio,
    pub witness_t: Option<TimeValue>,
    /// Times at which the optimum had nothing pending but the algorithm did.
    pub violations: Vec<TimeValue>,
}

/// Union of the event times of both traces.
pub fn joint_event_times(a: &Trace, b: &Trace) -> Vec<TimeValue> {
    let mut times: BTreeSet<TimeValue> = a.event_times().into_iter().collect();
    times.extend(b.event_times());
    times.into_iter().collect()
}

fn local_ratio(delta_alg: usize, delta_opt: usize) -> CompetitiveRatio {
    match (delta_alg, delta_opt) {
        (0, 0) => CompetitiveRatio::Finite(Rational::zero()),
        (_, 0) => CompetitiveRatio::Infinite,
        (a, o) => CompetitiveRatio::Finite(Rational::new(a as i128, o as i128).expect("nonzero count")),
    }
}

/// `δ_alg(t) / δ_opt(t)` at each sample time; defaults to all event times.
pub fn local_ratio_report(alg: &Trace, opt: &Trace, sample_times: Option<&[TimeValue]>) -> Result<LocalRatioReport> {
    same_instance(alg, opt)?;
    let default_times;
    let times = match sample_times {
        Some(ts) => ts,
        None => {
            default_times = joint_event_times(alg, opt);
            &default_times
        }
    };
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].cmp(&times[b]));
    let (ta, to) = (Timeline::new(alg)?, Timeline::new(opt)?);
    let (mut sa, mut so) = (PendingSweep::new(&ta), PendingSweep::new(&to));
    let mut samples = vec![None; times.len()];
    for idx in order {
        let t = &times[idx];
        let delta_alg = sa.advance_to(t).len();
        let delta_opt = so.advance_to(t).len();
        samples[idx] = Some(LocalSample { t: t.clone(), delta_alg, delta_opt, ratio: local_ratio(delta_alg, delta_opt) });
    }
    let samples: Vec<LocalSample> = samples.into_iter().map(|s| s.expect("every sample visited")).collect();
    let mut max_ratio = CompetitiveRatio::Finite(Rational::zero());
    let mut witness_t = None;
    let mut violations = Vec::new();
    for s in &samples {
        if s.delta_opt == 0 && s.delta_alg > 0 {
            violations.push(s.t.clone());
        }
        if s.ratio > max_ratio || (witness_t.is_none() && s.ratio == max_ratio) {
            max_ratio = s.ratio.clone();
            witness_t = Some(s.t.clone());
        }
    }
    Ok(LocalRatioReport { samples, max_ratio, witness_t, violations })
}

/// Largest `δ(t, x)` over the sample times, with its first witness.
pub fn max_pending_at_least(trace: &Trace, times: &[TimeValue], x: &TimeValue) -> Result<(usize, Option<TimeValue>)> {
    let tl = Timeline::new(trace)?;
    let mut sorted = times.to_vec();
    sorted.sort();
    let mut sweep = PendingSweep::new(&tl);
    let mut best = (0, None);
    for t in &sorted {
        let n = sweep.advance_to(t).iter().filter(|&&id| tl.jobs[id].remaining_at(t) >= *x).count();
        if n > best.0 || best.1.is_none() {
            best = (n, Some(t.clone()));
        }
    }
    Ok(best)
}

/// Histogram of `|S|` over the sample times.
pub fn far_behind_histogram(
    alg: &Trace,
    opt: &Trace,
    times: &[TimeValue],
    mu2: &Rational,
) -> Result<BTreeMap<usize, usize>> {
    same_instance(alg, opt)?;
    let mut hist = BTreeMap::new();
    let Some(range) = alg.instance.class_range() else { return Ok(hist) };
    let (ta, to) = (Timeline::new(alg)?, Timeline::new(opt)?);
    let (mut sa, mut so) = (PendingSweep::new(&ta), PendingSweep::new(&to));
    let mut sorted = times.to_vec();
    sorted.sort();
    for t in &sorted {
        let pa = VolumeProfile::from_pending(&ta, sa.advance_to(t), t);
        let po = VolumeProfile::from_pending(&to, so.advance_to(t), t);
        *hist.entry(far_behind_from_profiles(&pa, &po, range, mu2).len()).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Decimal rendering rounded to 12 significant digits.
pub fn approx_decimal(x: f64) -> String {
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "nan".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// CSV with exact `num/den` columns and an approximate decimal ratio.
pub fn write_ratio_csv<W: Write>(report: &LocalRatioReport, mut out: W) -> Result<()> {
    writeln!(out, "t_num,t_den,delta_alg,delta_opt,ratio_num,ratio_den,ratio_approx")?;
    for s in &report.samples {
        let (rn, rd) = match &s.ratio {
            CompetitiveRatio::Finite(r) => (r.numer(), r.denom()),
            CompetitiveRatio::Infinite => (1, 0),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t.numer(),
            s.t.denom(),
            s.delta_alg,
            s.delta_opt,
            rn,
            rd,
            approx_decimal(s.ratio.to_f64())
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub max_ratio: CompetitiveRatio,
    pub witness_t: Option<TimeValue>,
    pub far_behind_hist: Option<BTreeMap<usize, usize>>,
}

impl RatioSummary {
    pub fn new(report: &LocalRatioReport, far_behind_hist: Option<BTreeMap<usize, usize>>) -> Self {
        RatioSummary { max_ratio: report.max_ratio.clone(), witness_t: report.witness_t.clone(), far_behind_hist }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
