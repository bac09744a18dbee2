//! Instance constructors. Each generated instance carries its
//! [`GeneratorSpec`] under `meta["generator"]`, and the time of interest, when
//! there is one, under `meta["snapshot_t"]`.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdaptiveSpec, Instance, Job, Meta};
use crate::rational::{Rational, TimeValue};

/// Whole-instance redraws allowed before conditioning gives up.
const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    BadcaseSept {
        i: u32,
    },
    BadcaseSr {
        i: u32,
    },
    Bombard {
        t: TimeValue,
        m: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<Box<serde_json::Value>>,
    },
    LbPrime {
        k: u64,
        seed: u64,
    },
    LbCapped {
        mu: Rational,
        k: u64,
        seed: u64,
    },
    DetLb {
        n: usize,
        mu: Rational,
    },
    Random {
        n: usize,
        mu1: Rational,
        mu2: Rational,
        class_lo: i32,
        class_hi: i32,
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn key(&self) -> &'static str {
        match self {
            GeneratorSpec::BadcaseSept { .. } => "badcase-sept",
            GeneratorSpec::BadcaseSr { .. } => "badcase-sr",
            GeneratorSpec::Bombard { .. } => "bombard",
            GeneratorSpec::LbPrime { .. } => "lb-prime",
            GeneratorSpec::LbCapped { .. } => "lb-capped",
            GeneratorSpec::DetLb { .. } => "det-lb",
            GeneratorSpec::Random { .. } => "random",
        }
    }

    fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("generator spec serializes")
    }
}

/// Generator recorded in an instance, if any.
pub fn spec_of(instance: &Instance) -> Option<GeneratorSpec> {
    serde_json::from_value(instance.meta.get("generator")?.clone()).ok()
}

fn finish(jobs: Vec<Job>, spec: &GeneratorSpec, snapshot: Option<&TimeValue>) -> Instance {
    let mut meta = Meta::new();
    meta.insert("generator".into(), spec.to_value());
    if let Some(t) = snapshot {
        meta.insert("snapshot_t".into(), t.to_string().into());
    }
    Instance { meta, jobs, adaptive: None }
}

fn push(jobs: &mut Vec<Job>, release: TimeValue, p_true: TimeValue, p_est: TimeValue) {
    let id = jobs.len();
    jobs.push(Job { id, release, p_true, p_est });
}

/// Releases jobs of size `2^j + 1` for `j = i, …, i/2`, each `2^j` after the
/// previous one. SEPT keeps abandoning the current job one unit short.
pub fn sept_bad_case(i: u32) -> Result<Instance> {
    if i < 2 || i % 2 == 1 || i > 120 {
        return Err(Error::InvalidInput(format!("sept bad case needs an even i in [2, 120], got {i}")));
    }
    let mut jobs = Vec::new();
    let mut clock = Rational::zero();
    for j in (i / 2..=i).rev() {
        let step = Rational::pow2(j as i32);
        let size = &step + &Rational::one();
        push(&mut jobs, clock.clone(), size.clone(), size);
        clock += &step;
    }
    Ok(finish(jobs, &GeneratorSpec::BadcaseSept { i }, Some(&clock)))
}

/// Underestimated jobs `q_j` (estimate `2^j`, size `2^(j+2)`) paired with
/// exact jobs `r_j` of size `2^(j+2)`, fed in decreasing class order.
///
/// `q_i` must already be partial when the first pair shows up, so the pairs
/// start one time unit after it. Released together, the pair's `q_(i-1)`
/// would be picked first and the cascade never builds up.
pub fn sr_bad_case(i: u32) -> Result<Instance> {
    if !(1..=120).contains(&i) {
        return Err(Error::InvalidInput(format!("sr bad case needs i in [1, 120], got {i}")));
    }
    let mut jobs = Vec::new();
    push(&mut jobs, Rational::zero(), Rational::pow2(i as i32 + 2), Rational::pow2(i as i32));
    let mut clock = Rational::one();
    for j in (0..i as i32).rev() {
        push(&mut jobs, clock.clone(), Rational::pow2(j + 2), Rational::pow2(j));
        push(&mut jobs, clock.clone(), Rational::pow2(j + 2), Rational::pow2(j + 2));
        clock += &Rational::pow2(j + 3);
    }
    Ok(finish(jobs, &GeneratorSpec::BadcaseSr { i }, Some(&clock)))
}

/// Appends `m` unit jobs released at `t, t + 1, …, t + m - 1`.
pub fn bombard(base: &Instance, t: &TimeValue, m: u64) -> Result<Instance> {
    if m < 1 {
        return Err(Error::InvalidInput("bombardment needs m >= 1".into()));
    }
    if t.is_negative() || base.last_release().is_some_and(|r| r > t) {
        return Err(Error::InvalidInput(format!("bombardment time {t} precedes a release of the base instance")));
    }
    if base.adaptive.is_some() {
        return Err(Error::InvalidInput("cannot bombard an unrealized adaptive instance".into()));
    }
    let mut jobs = base.jobs.clone();
    jobs.reserve(m as usize);
    let one = Rational::one();
    let mut clock = t.clone();
    for _ in 0..m {
        push(&mut jobs, clock.clone(), one.clone(), one.clone());
        clock += &one;
    }
    let spec = GeneratorSpec::Bombard {
        t: t.clone(),
        m,
        base: base.meta.get("generator").cloned().map(Box::new),
    };
    Ok(finish(jobs, &spec, Some(t)))
}

/// `floor(k^(3/4))`, exactly.
pub fn floor_three_quarter_power(k: u64) -> u64 {
    let cube = (k as u128).pow(3);
    let mut lo = 0u128;
    let mut hi = (k as u128) + 1;
    // Invariant: lo^4 <= k^3 < hi^4.
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if mid.checked_pow(4).is_some_and(|v| v <= cube) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo as u64
}

/// Snapshot time `2(k - floor(k^(3/4)))` of the randomized lower bound.
pub fn lb_snapshot(k: u64) -> TimeValue {
    Rational::from_integer(2 * (k - floor_three_quarter_power(k)) as i128)
}

fn geometric_sizes(k: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let geo = Geometric::new(0.5).expect("valid success probability");
    (0..k).map(|_| geo.sample(rng) + 1).collect()
}

fn unit_estimate_jobs(sizes: &[u64]) -> Vec<Job> {
    let zero = Rational::zero();
    let one = Rational::one();
    let mut jobs = Vec::with_capacity(sizes.len());
    for &p in sizes {
        push(&mut jobs, zero.clone(), Rational::from_integer(p as i128), one.clone());
    }
    jobs
}

/// `k` jobs at time zero with unit estimates and i.i.d. sizes on
/// `{1, 2, …}` with `Pr[p = j] = 2^-j`.
pub fn lb_prime(k: u64, seed: u64) -> Result<(Instance, TimeValue)> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("lower bound needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = lb_snapshot(k);
    let jobs = unit_estimate_jobs(&geometric_sizes(k, &mut rng));
    Ok((finish(jobs, &GeneratorSpec::LbPrime { k, seed }, Some(&t)), t))
}

/// `floor(2^(mu/2))`, exactly.
pub fn capped_job_count(mu: &Rational) -> Result<u64> {
    if *mu < 2 {
        return Err(Error::InvalidInput(format!("capped lower bound needs mu >= 2, got {mu}")));
    }
    // k <= 2^(a/2b)  <=>  k^(2b) <= 2^a  for mu = a/b.
    let (a, b) = (mu.numer(), mu.denom());
    if a / b > 124 || b > 1024 {
        return Err(Error::InvalidInput(format!("mu = {mu} is too large or too finely divided")));
    }
    let limit = BigUint::from(1u8) << (a as usize);
    let fits = |k: u64| BigUint::from(k).pow(2 * b as u32) <= limit;
    let mut lo = 1u64;
    let mut hi = 1u64 << (a / b / 2 + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The lower-bound distribution conditioned on every size being at most
/// `mu`, by redrawing the whole instance. `k` defaults to `floor(2^(mu/2))`.
pub fn lb_capped(mu: &Rational, seed: u64, k: Option<u64>) -> Result<(Instance, TimeValue)> {
    let k = match k {
        Some(k) => k,
        None => capped_job_count(mu)?,
    };
    if k < 2 || *mu < 2 {
        return Err(Error::InvalidInput(format!("capped lower bound needs k >= 2 and mu >= 2, got k={k}, mu={mu}")));
    }
    let cap = mu.floor() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let sizes = geometric_sizes(k, &mut rng);
        if sizes.iter().all(|&p| p <= cap) {
            let t = lb_snapshot(k);
            let spec = GeneratorSpec::LbCapped { mu: mu.clone(), k, seed };
            return Ok((finish(unit_estimate_jobs(&sizes), &spec, Some(&t)), t));
        }
    }
    Err(Error::InvalidInput(format!(
        "no draw with all sizes <= {mu} in {MAX_REJECTIONS} attempts; k={k} is too large for this mu"
    )))
}

/// `n` unit-estimate jobs at time zero whose sizes an adversary fixes at
/// `t = n * mu / 2` from the work each received.
pub fn adaptive_det_lb(n: usize, mu: &Rational) -> Result<Instance> {
    if n < 1 || *mu < 16 {
        return Err(Error::InvalidInput(format!("deterministic lower bound needs n >= 1 and mu >= 16, got n={n}, mu={mu}")));
    }
    let snapshot = &(mu * &Rational::from_integer(n as i128)) / &Rational::from_integer(2);
    let zero = Rational::zero();
    let one = Rational::one();
    let mut jobs = Vec::with_capacity(n);
    for _ in 0..n {
        push(&mut jobs, zero.clone(), mu.clone(), one.clone());
    }
    let mut inst = finish(jobs, &GeneratorSpec::DetLb { n, mu: mu.clone() }, Some(&snapshot));
    inst.adaptive = Some(AdaptiveSpec::CapAfterSnapshot { mu: mu.clone(), snapshot });
    Ok(inst)
}

/// Random workload of distortion exactly `(mu1, mu2)`.
///
/// Estimates are `2^c * (16 + m) / 16` with `c` uniform over the class range
/// and `m` uniform in `0..16`. Sizes are `p_est * f`, where `f` moves in 64
/// even steps from `1 / mu2` to `mu1`; one job is pinned at each end. Release
/// gaps are Poisson with mean near the mean estimate.
pub fn random_distorted(n: usize, mu1: &Rational, mu2: &Rational, classes: (i32, i32), seed: u64) -> Result<Instance> {
    let (lo, hi) = classes;
    if n < 1 || *mu1 < 1 || *mu2 < 1 || lo > hi || lo < -40 || hi > 40 {
        return Err(Error::InvalidInput(format!(
            "random workload needs n >= 1, mu1, mu2 >= 1 and a class range within [-40, 40], got n={n}, mu1={mu1}, mu2={mu2}, classes={lo}..={hi}"
        )));
    }
    let pins: Vec<u32> = [(mu1 > &Rational::one(), 64), (mu2 > &Rational::one(), 0)]
        .into_iter()
        .filter_map(|(needed, u)| needed.then_some(u))
        .collect();
    if pins.len() > n {
        return Err(Error::InvalidInput("a single job cannot attain both distortion extremes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_est: f64 = (lo..=hi).map(|c| 1.5 * 2f64.powi(c)).sum::<f64>() / f64::from(hi - lo + 1);
    let gaps = Poisson::new(mean_est.max(0.05)).expect("positive rate");

    let mut steps: Vec<u32> = (0..n).map(|_| rng.random_range(0..=64)).collect();
    let mut slots: Vec<usize> = (0..n).collect();
    for (pinned, u) in pins.into_iter().enumerate() {
        let pick = rng.random_range(pinned..n);
        slots.swap(pinned, pick);
        steps[slots[pinned]] = u;
    }

    let scale = &(mu1 * mu2) - &Rational::one();
    let denom = &Rational::from_integer(64) * mu2;
    let mut jobs = Vec::with_capacity(n);
    let mut clock = Rational::zero();
    for (pos, &u) in steps.iter().enumerate() {
        if pos > 0 {
            let gap: f64 = gaps.sample(&mut rng);
            clock += &Rational::from_integer(gap as i128);
        }
        let class = rng.random_range(lo..=hi);
        let m = rng.random_range(0..16);
        let p_est = Rational::pow2(class) * Rational::new(16 + m, 16)?;
        let u = Rational::from_integer(u as i128);
        let f = &(&Rational::from_integer(64) + &(&scale * &u)) / &denom;
        let p_true = &p_est * &f;
        push(&mut jobs, clock.clone(), p_true, p_est);
    }
    let spec = GeneratorSpec::Random { n, mu1: mu1.clone(), mu2: mu2.clone(), class_lo: lo, class_hi: hi, seed };
    Ok(finish(jobs, &spec, None))
}

/// Rebuild an instance from its recorded generator, if it has one that does
/// not depend on an external base file.
pub fn regenerate(spec: &GeneratorSpec) -> Result<Instance> {
    match spec {
        GeneratorSpec::BadcaseSept { i } => sept_bad_case(*i),
        GeneratorSpec::BadcaseSr { i } => sr_bad_case(*i),
        GeneratorSpec::LbPrime { k, seed } => Ok(lb_prime(*k, *seed)?.0),
        GeneratorSpec::LbCapped { mu, k, seed } => Ok(lb_capped(mu, *seed, Some(*k))?.0),
        GeneratorSpec::DetLb { n, mu } => adaptive_det_lb(*n, mu),
        GeneratorSpec::Random { n, mu1, mu2, class_lo, class_hi, seed } => {
            random_distorted(*n, mu1, mu2, (*class_lo, *class_hi), *seed)
        }
        GeneratorSpec::Bombard { t, m, base } => {
            let base_spec: GeneratorSpec = base
                .as_deref()
                .cloned()
                .map(serde_json::from_value)
                .transpose()?
                .ok_or_else(|| Error::InvalidInput("bombardment without a recorded base generator".into()))?;
            bombard(&regenerate(&base_spec)?, t, *m)
        }
    }
}
