use super::*;
use crate::model::AdaptiveSpec;
use crate::rational::q;
use crate::schedulers::{scheduler_by_key, Dl, Sept, Srpt, NON_CLAIRVOYANT_KEYS};

fn inst(rows: &[(i128, i128, i128)]) -> Instance {
    Instance::from_triples(rows.iter().map(|&(r, p, e)| (q(r, 1), q(p, 1), q(e, 1)))).unwrap()
}

fn run(instance: &Instance, key: &str) -> Trace {
    let mut s = scheduler_by_key(key).unwrap();
    simulate(instance, s.as_mut(), 7).unwrap()
}

/// Minimum total flow time over all unit-granularity preemptive schedules,
/// by exhaustive search. Integer releases and sizes only.
fn brute_force_flow(jobs: &[(i64, i64)]) -> i64 {
    fn go(t: i64, rem: &mut Vec<i64>, jobs: &[(i64, i64)]) -> i64 {
        if rem.iter().all(|&r| r == 0) {
            return 0;
        }
        let alive: i64 = jobs.iter().zip(rem.iter()).filter(|(j, &r)| j.0 <= t && r > 0).count() as i64;
        let unreleased = jobs.iter().zip(rem.iter()).any(|(j, &r)| j.0 > t && r > 0);
        let mut best = i64::MAX;
        let mut any = false;
        for i in 0..jobs.len() {
            if jobs[i].0 <= t && rem[i] > 0 {
                any = true;
                rem[i] -= 1;
                best = best.min(alive + go(t + 1, rem, jobs));
                rem[i] += 1;
            }
        }
        if !any && unreleased {
            best = go(t + 1, rem, jobs);
        }
        best
    }
    let mut rem: Vec<i64> = jobs.iter().map(|j| j.1).collect();
    go(0, &mut rem, jobs)
}

#[test]
fn single_job_completes_at_its_size() {
    let instance = inst(&[(0, 3, 3)]);
    for key in crate::schedulers::ALL_KEYS {
        let trace = run(&instance, key);
        assert_eq!(trace.end_time(), q(3, 1), "{key}");
        assert_eq!(total_flow_time(&trace).unwrap(), q(3, 1), "{key}");
    }
}

#[test]
fn srpt_matches_brute_force_optimum() {
    let instance = inst(&[(0, 2, 2), (1, 1, 1)]);
    assert_eq!(brute_force_flow(&[(0, 2), (1, 1)]), 4);
    assert_eq!(total_flow_time(&run(&instance, "srpt")).unwrap(), q(4, 1));

    let cases: &[&[(i64, i64)]] = &[
        &[(0, 3), (1, 1), (2, 2)],
        &[(0, 4), (0, 1), (2, 2), (3, 1)],
        &[(1, 2), (1, 3), (4, 1), (5, 2)],
        &[(0, 5), (2, 2), (2, 2), (6, 1)],
    ];
    for jobs in cases {
        let rows: Vec<_> = jobs.iter().map(|&(r, p)| (r as i128, p as i128, p as i128)).collect();
        let flow = total_flow_time(&run(&inst(&rows), "srpt")).unwrap();
        assert_eq!(flow, q(brute_force_flow(jobs) as i128, 1), "{jobs:?}");
    }
}

#[test]
fn sept_bad_case_leaves_unit_remainders() {
    let instance = inst(&[(0, 17, 17), (16, 9, 9), (24, 5, 5)]);
    let trace = run(&instance, "sept");
    let tl = Timeline::new(&trace).unwrap();
    let t = q(28, 1);
    for job in &tl.jobs {
        assert_eq!(job.remaining_at(&t), q(1, 1));
    }
    assert_eq!(tl.pending_at_least(&t, &q(1, 1)), 3);
    assert_eq!(pending_at(&run(&instance, "srpt"), &t).unwrap(), 1);
}

#[test]
fn pending_counts_at_edges() {
    let instance = inst(&[(2, 3, 3), (2, 1, 1)]);
    let trace = run(&instance, "srpt");
    assert_eq!(pending_at(&trace, &q(1, 1)).unwrap(), 0);
    assert_eq!(pending_at(&trace, &q(2, 1)).unwrap(), 2);
    assert_eq!(pending_at(&trace, &trace.end_time()).unwrap(), 0);
    assert_eq!(pending_at(&trace, &q(100, 1)).unwrap(), 0);
}

#[test]
fn empty_instance_has_zero_flow() {
    let trace = run(&Instance::empty(), "zigzag");
    assert!(trace.events.is_empty());
    assert_eq!(total_flow_time(&trace).unwrap(), q(0, 1));
}

struct Idler;

impl Scheduler for Idler {
    fn key(&self) -> &'static str {
        "idler"
    }
    fn on_release(&mut self, _job: JobView) {}
    fn on_complete(&mut self, _job: JobId, _now: &TimeValue) {}
    fn choose(&mut self, _m: &Machine<'_>, _n: &mut Vec<Annotation>) -> Option<JobId> {
        None
    }
}

struct Stubborn;

impl Scheduler for Stubborn {
    fn key(&self) -> &'static str {
        "stubborn"
    }
    fn on_release(&mut self, _job: JobView) {}
    fn on_complete(&mut self, _job: JobId, _now: &TimeValue) {}
    fn choose(&mut self, _m: &Machine<'_>, _n: &mut Vec<Annotation>) -> Option<JobId> {
        Some(0)
    }
}

#[test]
fn contract_violations_are_reported() {
    let instance = inst(&[(0, 1, 1), (0, 1, 1)]);
    assert!(matches!(simulate(&instance, &mut Idler, 0), Err(Error::ContractViolation { .. })));
    match simulate(&instance, &mut Stubborn, 0) {
        Err(Error::ContractViolation { time, .. }) => assert_eq!(time, q(1, 1)),
        other => panic!("expected contract violation, got {other:?}"),
    }
}

#[test]
fn simulation_is_deterministic() {
    let instance = inst(&[(0, 9, 5), (1, 2, 3), (1, 7, 16), (4, 1, 1), (6, 30, 8), (6, 3, 2)]);
    for key in crate::schedulers::ALL_KEYS {
        assert_eq!(run(&instance, key).to_jsonl(), run(&instance, key).to_jsonl(), "{key}");
    }
}

#[test]
fn decisions_ignore_true_sizes_until_completion() {
    let base = [(0, 9, 5), (1, 2, 3), (1, 7, 16), (4, 1, 1), (6, 30, 8), (6, 3, 2), (11, 4, 4)];
    let a = inst(&base);
    let mut longer = base;
    longer[2].1 = 70;
    let b = inst(&longer);
    for key in NON_CLAIRVOYANT_KEYS {
        let ta = run(&a, key);
        let tb = run(&b, key);
        let cutoff = Timeline::new(&ta).unwrap().jobs[2].completion.clone().unwrap();
        let prefix = |t: &Trace| -> Vec<TraceEvent> {
            t.events.iter().filter(|e| e.time < cutoff).cloned().collect()
        };
        assert!(!prefix(&ta).is_empty());
        assert_eq!(prefix(&ta), prefix(&tb), "{key}");
    }
}

#[test]
fn machine_runs_one_job_at_a_time_without_idling() {
    let instance = inst(&[(0, 9, 5), (1, 2, 3), (1, 7, 16), (4, 1, 1), (30, 3, 8), (31, 3, 2)]);
    for key in crate::schedulers::ALL_KEYS {
        let trace = run(&instance, key);
        let tl = Timeline::new(&trace).unwrap();
        let mut all: Vec<_> = tl.jobs.iter().flat_map(|j| j.intervals.iter().cloned()).collect();
        all.sort();
        for w in all.windows(2) {
            assert!(w[0].1 <= w[1].0, "{key}: overlapping intervals");
        }
        let busy: TimeValue = all.iter().map(|(s, e)| e - s).sum();
        // Releases at 0 and 30 with 19 units of work before 30: idle on [19, 30).
        assert_eq!(busy, trace.end_time() - q(11, 1), "{key}");
        for (job, rec) in instance.jobs.iter().zip(&tl.jobs) {
            assert_eq!(rec.processed_by(&trace.end_time()), job.p_true, "{key}");
        }
    }
}

#[test]
fn adaptive_oracle_caps_untouched_jobs() {
    let mut instance = inst(&vec![(0, 16, 1); 16]);
    instance.adaptive = Some(AdaptiveSpec::CapAfterSnapshot { mu: q(16, 1), snapshot: q(128, 1) });
    let trace = simulate(&instance, &mut Sept::new(), 0).unwrap();
    let snapshots: Vec<_> = trace.events.iter().filter(|e| e.kind == EventKind::Snapshot).collect();
    assert_eq!(snapshots.len(), 1);
    assert_eq!(snapshots[0].time, q(128, 1));
    let sizes: Vec<_> = trace.instance.jobs.iter().map(|j| j.p_true.clone()).collect();
    assert_eq!(&sizes[..8], &vec![q(16, 1); 8][..]);
    assert_eq!(&sizes[8..], &vec![q(1, 1); 8][..]);
    assert!(trace.instance.adaptive.is_none());
    assert_eq!(trace.end_time(), q(136, 1));
    assert!(simulate(&instance, &mut Srpt::new(), 0).is_err());
}

#[test]
fn adaptive_oracle_realizes_partial_work_plus_one() {
    let mut instance = inst(&[(0, 16, 1)]);
    instance.adaptive = Some(AdaptiveSpec::CapAfterSnapshot { mu: q(16, 1), snapshot: q(5, 1) });
    let trace = simulate(&instance, &mut Sept::new(), 0).unwrap();
    assert_eq!(trace.instance.jobs[0].p_true, q(6, 1));
    assert_eq!(trace.end_time(), q(6, 1));
}

#[test]
fn dl_wakeups_update_sigma_mid_run() {
    let instance = inst(&[(0, 100, 4), (1, 2, 2), (1, 32, 32)]);
    let trace = simulate(&instance, &mut Dl::new(), 0).unwrap();
    let updates: Vec<_> = trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::SigmaUpdate)
        .map(|e| (e.time.clone(), e.tag.clone().unwrap()))
        .collect();
    assert_eq!(updates[..2], [(q(8, 1), "3".to_string()), (q(16, 1), "4".to_string())]);
    let first_mark_of_1 = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::MarkPartial && e.job == Some(1))
        .unwrap();
    assert_eq!(first_mark_of_1.time, q(16, 1));
}

#[test]
fn trace_jsonl_round_trip() {
    let instance = inst(&[(0, 9, 5), (1, 2, 3), (1, 7, 16)]);
    let trace = run(&instance, "zigzag");
    let text = trace.to_jsonl();
    let back = Trace::read_jsonl(text.as_bytes(), trace.instance.clone()).unwrap();
    assert_eq!(back.events, trace.events);
    let other = inst(&[(0, 1, 1)]);
    assert!(matches!(Trace::read_jsonl(text.as_bytes(), other), Err(Error::MismatchedInstances)));
}
