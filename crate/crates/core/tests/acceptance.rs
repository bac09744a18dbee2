//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use flowlab::engine::{pending_at, pending_at_least, simulate, total_flow_time, EventKind, Trace};
use flowlab::experiment::{run_lowerbound, LbFamily};
use flowlab::generators::{bombard, random_distorted, regenerate, sept_bad_case, sr_bad_case, GeneratorSpec};
use flowlab::invariants::{check_trace, dl_strict_partial_bound_failures};
use flowlab::metrics::{competitive_ratio, local_ratio_report, CompetitiveRatio};
use flowlab::model::{distortion_of, separator_sigma};
use flowlab::rational::q;
use flowlab::schedulers::{scheduler_by_key, ALL_KEYS};
use flowlab::{Instance, Rational};
use rayon::prelude::*;

/// Written to the process's stdout directly so the line survives the test
/// harness's output capture.
fn report(criterion: &str, ok: bool, detail: impl AsRef<str>) -> bool {
    let line = format!("criterion {criterion}: {} | {}\n", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).and_then(|()| out.flush()).expect("stdout is writable");
    ok
}

fn run(instance: &Instance, key: &str) -> Trace {
    simulate(instance, scheduler_by_key(key).unwrap().as_mut(), 0).unwrap()
}

fn calibration(name: &str) -> Rational {
    let text = include_str!("fixtures/calibration.json");
    let map: BTreeMap<String, String> = serde_json::from_str(text).unwrap();
    map[name].parse().unwrap()
}

fn max_local(alg: &Trace, opt: &Trace) -> CompetitiveRatio {
    local_ratio_report(alg, opt, None).unwrap().max_ratio
}

/// Minimum total flow time over unit-step schedules, by memoized search over
/// the vector of remaining sizes. Integer data only.
fn dp_optimum(jobs: &[(i64, i64)]) -> i64 {
    fn go(t: i64, rem: Vec<i64>, jobs: &[(i64, i64)], memo: &mut HashMap<(i64, Vec<i64>), i64>) -> i64 {
        if rem.iter().all(|&r| r == 0) {
            return 0;
        }
        if let Some(&v) = memo.get(&(t, rem.clone())) {
            return v;
        }
        let alive: Vec<usize> = (0..jobs.len()).filter(|&i| jobs[i].0 <= t && rem[i] > 0).collect();
        let best = if alive.is_empty() {
            go(t + 1, rem.clone(), jobs, memo)
        } else {
            alive
                .iter()
                .map(|&i| {
                    let mut next = rem.clone();
                    next[i] -= 1;
                    alive.len() as i64 + go(t + 1, next, jobs, memo)
                })
                .min()
                .unwrap()
        };
        memo.insert((t, rem), best);
        best
    }
    go(0, jobs.iter().map(|j| j.1).collect(), jobs, &mut HashMap::new())
}

#[test]
fn criterion_1_srpt_matches_exhaustive_optimum() {
    let start = Instant::now();
    let singles: Vec<(i64, i64)> = (0..=3).flat_map(|r| (1..=4).map(move |p| (r, p))).collect();
    let mut instances: Vec<Vec<(i64, i64)>> = Vec::new();
    for a in &singles {
        instances.push(vec![*a]);
        for b in &singles {
            instances.push(vec![*a, *b]);
            for c in &singles {
                instances.push(vec![*a, *b, *c]);
            }
        }
    }
    let mismatches: Vec<_> = instances
        .par_iter()
        .filter(|jobs| {
            let inst = Instance::from_triples(jobs.iter().map(|&(r, p)| (q(r as i128, 1), q(p as i128, 1), q(p as i128, 1)))).unwrap();
            total_flow_time(&run(&inst, "srpt")).unwrap() != q(dp_optimum(jobs) as i128, 1)
        })
        .collect();
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(60);
    let detail = format!("{} instances, {} mismatches, {:.2?}", instances.len(), mismatches.len(), elapsed);
    assert!(report("1 (SRPT equals brute-force optimum)", ok, detail), "{mismatches:?}");
}

#[test]
fn criterion_2_sept_bad_case() {
    let start = Instant::now();
    let inst = sept_bad_case(40).unwrap();
    let t = inst.snapshot_time().unwrap();
    let sept = run(&inst, "sept");
    let opt = run(&inst, "srpt");
    let d_alg = pending_at_least(&sept, &t, &q(1, 1)).unwrap();
    let d_opt = pending_at(&opt, &t).unwrap();
    let elapsed = start.elapsed();
    let zz = max_local(&run(&inst, "zigzag"), &opt);
    let c_zz = calibration("sept_bad_case_40_zigzag_max_local_ratio");
    let ok = d_alg == 21 && d_opt == 1 && zz <= CompetitiveRatio::Finite(c_zz.clone()) && elapsed < Duration::from_secs(1);
    let detail = format!("SEPT delta(t,1)={d_alg}, SRPT delta(t)={d_opt}, ZigZag max local ratio {zz} <= {c_zz}, {elapsed:.2?}");
    assert!(report("2 (SEPT bad case, i=40)", ok, detail));
}

#[test]
fn criterion_3_sr_bad_case() {
    let start = Instant::now();
    let inst = sr_bad_case(30).unwrap();
    let t = inst.snapshot_time().unwrap();
    let sr = run(&inst, "sr");
    let opt = run(&inst, "srpt");
    let d_alg = pending_at_least(&sr, &t, &q(1, 1)).unwrap();
    let d_opt = pending_at(&opt, &t).unwrap();
    let elapsed = start.elapsed();
    let dist = distortion_of(&inst);
    let bound = CompetitiveRatio::Finite(calibration("sr_bad_case_30_zigzag_dl_max_local_ratio"));
    let zz = max_local(&run(&inst, "zigzag"), &opt);
    let dl = max_local(&run(&inst, "dl"), &opt);
    let ok = d_alg >= 30
        && d_opt == 1
        && dist.mu1 == q(4, 1)
        && dist.mu2 == q(1, 1)
        && zz <= bound
        && dl <= bound
        && elapsed < Duration::from_secs(1);
    let detail = format!(
        "SR delta(t,1)={d_alg}, SRPT delta(t)={d_opt}, mu1={} mu2={}, max local ZigZag {zz} DL {dl} <= {bound}, {elapsed:.2?}",
        dist.mu1, dist.mu2
    );
    assert!(report("3 (SR bad case, i=30)", ok, detail));
}

#[test]
fn criterion_4_randomized_lower_bound() {
    let keys = ["sept", "zigzag", "dl"];
    let mut ratios = Vec::new();
    let mut means_ok = true;
    let mut lines = Vec::new();
    for k in [256u64, 1024, 4096] {
        let results = run_lowerbound(&keys, &LbFamily::Prime { k }, 200, 2024).unwrap();
        // All three see identical unit estimates; the trend uses SEPT's ratio.
        ratios.push(results[0].ratio);
        for r in &results {
            if k == 4096 {
                means_ok &= r.mean_alg >= 486.4;
            }
            lines.push(format!("k={k} {} mean {:.2} (se {:.2}) vs SRPT {:.2}", r.scheduler, r.mean_alg, r.stderr_alg.unwrap(), r.mean_opt));
        }
    }
    let increasing = ratios.windows(2).all(|w| w[0] < w[1]);
    let detail = format!("{}; ratios {ratios:.3?}", lines.join("; "));
    assert!(report("4 (randomized lower bound)", means_ok && increasing, detail));
}

fn bombarded_ratio(i: u32, m: u64) -> (Rational, Rational, usize, usize) {
    let base = sept_bad_case(i).unwrap();
    let t = base.snapshot_time().unwrap();
    let d_alg = pending_at_least(&run(&base, "sept"), &t, &q(1, 1)).unwrap();
    let d_opt = pending_at(&run(&base, "srpt"), &t).unwrap();
    let inst = bombard(&base, &t, m).unwrap();
    let alg = total_flow_time(&run(&inst, "sept")).unwrap();
    let opt = total_flow_time(&run(&inst, "srpt")).unwrap();
    (alg, opt, d_alg, d_opt)
}

#[test]
fn criterion_5_bombardment_literal() {
    let start = Instant::now();
    let (alg, opt, d_alg, d_opt) = bombarded_ratio(20, 100_000);
    let ratio = competitive_ratio(&alg, &opt);
    let measured = ratio.to_f64();
    let target = (d_alg as f64 + 1.0) / (d_opt as f64 + 1.0);
    let elapsed = start.elapsed();
    let ok = measured >= 5.0 && (measured - 5.5).abs() <= 0.55 && elapsed < Duration::from_secs(30);
    let detail = format!(
        "flow ratio {ratio} = {measured:.4} (needs >= 5 and within 10% of 11/2); base delta(t,1)={d_alg}, delta*(t)={d_opt}, (d+1)/(d*+1)={target:.3}, {elapsed:.2?}"
    );
    assert!(report("5 (bombardment, i=20, M=1e5)", ok, detail));
}

#[test]
fn criterion_5_bombardment_small_base() {
    let (alg, opt, d_alg, d_opt) = bombarded_ratio(8, 100_000);
    let measured = competitive_ratio(&alg, &opt).to_f64();
    let target = (d_alg as f64 + 1.0) / (d_opt as f64 + 1.0);
    let ok = (measured - target).abs() <= 0.1 * target;
    let detail = format!("i=8: flow ratio {measured:.4} vs (delta(t,1)+1)/(delta*(t)+1) = {target:.4}");
    assert!(report("5b (bombardment limit, small base)", ok, detail));
}

/// Workload parameters for suite seed `seed`: even seeds have `mu2 = 1`.
fn suite_params(seed: u64) -> (usize, i128, i128) {
    let n = 2 + (seed as usize * 37) % 99;
    let mu1 = 1 + (seed as i128 * 7) % 16;
    let mu2 = if seed.is_multiple_of(2) { 1 } else { 1 + (seed as i128 / 2 * 5) % 16 };
    (n, mu1, mu2)
}

#[derive(Default)]
struct SuiteOutcome {
    workloads: usize,
    violations: BTreeMap<String, usize>,
    first_failure: Option<String>,
    checks_run: usize,
    strict_dl_failures: usize,
    sigma_hat_over_sigma: usize,
    /// Largest `mu` among workloads counted in `sigma_hat_over_sigma`.
    sigma_hat_over_sigma_max_mu: f64,
    /// Worst `ratio / (mu (log2 mu + 1))` and where.
    worst_normalized: f64,
    worst_at: String,
    elapsed: Duration,
}

fn suite() -> &'static SuiteOutcome {
    static SUITE: OnceLock<SuiteOutcome> = OnceLock::new();
    SUITE.get_or_init(|| {
        let start = Instant::now();
        let per_seed: Vec<SuiteOutcome> = (0..1000u64)
            .into_par_iter()
            .map(|seed| {
                let (n, mu1, mu2) = suite_params(seed);
                let inst = random_distorted(n, &q(mu1, 1), &q(mu2, 1), (0, 6), seed).unwrap();
                let opt = run(&inst, "srpt");
                let mut out = SuiteOutcome { workloads: 1, ..Default::default() };
                for key in ["sr", "zigzag", "dl"] {
                    let trace = run(&inst, key);
                    let rep = check_trace(&trace, Some(&opt)).unwrap();
                    out.checks_run += rep.outcomes.len();
                    for o in rep.outcomes.iter().filter(|o| o.violations > 0) {
                        *out.violations.entry(format!("{key}/{}", o.check)).or_default() += o.violations;
                        out.first_failure.get_or_insert_with(|| format!("seed {seed} {key}: {:?}", o.first));
                    }
                    if key == "dl" && mu2 == 1 {
                        out.strict_dl_failures += dl_strict_partial_bound_failures(&trace).unwrap().len();
                        let sigma = separator_sigma(&distortion_of(&inst).mu).unwrap();
                        let top = trace
                            .events
                            .iter()
                            .filter(|e| e.kind == EventKind::SigmaUpdate)
                            .filter_map(|e| e.tag.as_deref()?.parse::<i32>().ok())
                            .fold(2, i32::max);
                        if top > sigma {
                            out.sigma_hat_over_sigma += 1;
                            out.sigma_hat_over_sigma_max_mu = distortion_of(&inst).mu.to_f64();
                        }
                    }
                    if key == "zigzag" {
                        let mu = distortion_of(&inst).mu.to_f64();
                        let ratio = max_local(&trace, &opt).to_f64();
                        out.worst_normalized = ratio / (mu * (mu.log2() + 1.0));
                        out.worst_at = format!("seed {seed} (mu={mu:.3}, ratio {ratio})");
                    }
                }
                out
            })
            .collect();
        let mut total = SuiteOutcome::default();
        for o in per_seed {
            total.workloads += o.workloads;
            total.checks_run += o.checks_run;
            total.strict_dl_failures += o.strict_dl_failures;
            total.sigma_hat_over_sigma += o.sigma_hat_over_sigma;
            total.sigma_hat_over_sigma_max_mu = total.sigma_hat_over_sigma_max_mu.max(o.sigma_hat_over_sigma_max_mu);
            for (k, v) in o.violations {
                *total.violations.entry(k).or_default() += v;
            }
            if total.first_failure.is_none() {
                total.first_failure = o.first_failure;
            }
            if o.worst_normalized > total.worst_normalized {
                total.worst_normalized = o.worst_normalized;
                total.worst_at = o.worst_at;
            }
        }
        total.elapsed = start.elapsed();
        total
    })
}

#[test]
fn criterion_6_invariant_suite() {
    let s = suite();
    let ok = s.violations.is_empty() && s.elapsed < Duration::from_secs(300);
    let detail = format!(
        "{} workloads, {} check runs, violations {:?}, first {:?}, {:.2?}; DL bound checked as partial <= (sigma+2) full + 1 with sigma >= 2",
        s.workloads, s.checks_run, s.violations, s.first_failure, s.elapsed
    );
    assert!(report("6 (invariant suite)", ok, detail));
}

/// The DL bounds exactly as worded: no additive slack on the partial count
/// and `σ̂ ≤ ⌈log₂ μ⌉ + 1` even when that is below the initial `σ̂ = 2`.
#[test]
fn criterion_6_literal_dl_bounds() {
    let s = suite();
    let ok = s.strict_dl_failures == 0 && s.sigma_hat_over_sigma == 0;
    let detail = format!(
        "event times with partial > (sigma+2) full: {}; mu2=1 workloads with sigma-hat > ceil(log2 mu)+1: {} (largest such mu {})",
        s.strict_dl_failures, s.sigma_hat_over_sigma, s.sigma_hat_over_sigma_max_mu
    );
    assert!(report("6-literal (DL bounds as worded)", ok, detail));
}

#[test]
fn criterion_7_local_competitiveness() {
    let s = suite();
    let c = calibration("local_competitiveness_c").to_f64();
    let ok = s.worst_normalized <= c;
    let detail = format!("worst ratio / (mu (log2 mu + 1)) = {:.4} at {} <= C = {c}", s.worst_normalized, s.worst_at);
    assert!(report("7 (local competitiveness regression)", ok, detail));
}

#[test]
fn criterion_8_determinism_and_format() {
    let specs = vec![
        GeneratorSpec::BadcaseSept { i: 10 },
        GeneratorSpec::BadcaseSr { i: 6 },
        GeneratorSpec::LbPrime { k: 64, seed: 9 },
        GeneratorSpec::LbCapped { mu: q(8, 1), k: 16, seed: 4 },
        GeneratorSpec::Random { n: 60, mu1: q(5, 1), mu2: q(3, 1), class_lo: -2, class_hi: 5, seed: 17 },
    ];
    let dir = std::env::temp_dir().join(format!("flowlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut failures = Vec::new();
    let mut checked = 0;
    for spec in &specs {
        let a = regenerate(spec).unwrap();
        let b = regenerate(spec).unwrap();
        if a.to_json() != b.to_json() {
            failures.push(format!("{} generator", spec.key()));
        }
        let path = dir.join(format!("{}.json", spec.key()));
        a.save(&path).unwrap();
        let back = Instance::load(&path).unwrap();
        if back != a || back.to_json() != a.to_json() {
            failures.push(format!("{} round trip", spec.key()));
        }
        for key in ALL_KEYS {
            let x = simulate(&a, scheduler_by_key(key).unwrap().as_mut(), 5).unwrap().to_jsonl();
            let y = simulate(&back, scheduler_by_key(key).unwrap().as_mut(), 5).unwrap().to_jsonl();
            checked += 1;
            if x != y {
                failures.push(format!("{} {key} trace", spec.key()));
            }
        }
    }
    let base = sept_bad_case(6).unwrap();
    let t = base.snapshot_time().unwrap();
    if bombard(&base, &t, 50).unwrap().to_json() != bombard(&base, &t, 50).unwrap().to_json() {
        failures.push("bombard generator".into());
    }
    std::fs::remove_dir_all(&dir).ok();
    let detail = format!("{} generators, {checked} traces compared, failures {failures:?}", specs.len() + 1);
    assert!(report("8 (determinism and round trip)", failures.is_empty(), detail));
}
