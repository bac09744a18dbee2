//! Monte Carlo runs of the randomized lower-bound distributions.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{pending_at, pending_at_least, simulate, Trace};
use crate::error::{Error, Result};
use crate::generators::{lb_capped, lb_prime};
use crate::model::Instance;
use crate::rational::{Rational, TimeValue};
use crate::schedulers::{scheduler_by_key, Srpt};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LbFamily {
    /// Geometric sizes on `k` unit-estimate jobs.
    Prime { k: u64 },
    /// The same, conditioned on every size being at most `mu`.
    Capped { mu: Rational, k: Option<u64> },
}

impl LbFamily {
    pub fn draw(&self, seed: u64) -> Result<(Instance, TimeValue)> {
        match self {
            LbFamily::Prime { k } => lb_prime(*k, seed),
            LbFamily::Capped { mu, k } => lb_capped(mu, seed, *k),
        }
    }
}

/// Seed of trial `trial` under master seed `seed`.
pub fn derive_seed(seed: u64, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundResult {
    pub scheduler: String,
    pub family: LbFamily,
    pub trials: u64,
    pub jobs: usize,
    pub snapshot: TimeValue,
    /// Sum over trials of pending jobs with remaining work at least 1.
    pub sum_alg: u64,
    /// Sum over trials of SRPT's pending count.
    pub sum_opt: u64,
    pub mean_alg: f64,
    pub mean_opt: f64,
    /// `mean_alg / mean_opt`; infinite when SRPT never has a pending job.
    pub ratio: f64,
    /// Standard errors of the means. `None` with a single trial.
    pub stderr_alg: Option<f64>,
    pub stderr_opt: Option<f64>,
}

struct Sample {
    alg: Vec<u64>,
    opt: u64,
    jobs: usize,
    snapshot: TimeValue,
}

fn stderr(xs: &[u64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mean = xs.iter().sum::<u64>() as f64 / n as f64;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((var / n as f64).sqrt())
}

fn one_trial(keys: &[&str], family: &LbFamily, seed: u64) -> Result<Sample> {
    let (instance, t) = family.draw(seed)?;
    let one = Rational::one();
    let opt: Trace = simulate(&instance, &mut Srpt::new(), seed)?;
    let mut alg = Vec::with_capacity(keys.len());
    for key in keys {
        let mut s = scheduler_by_key(key)?;
        let trace = simulate(&instance, s.as_mut(), seed)?;
        alg.push(pending_at_least(&trace, &t, &one)? as u64);
    }
    Ok(Sample { alg, opt: pending_at(&opt, &t)? as u64, jobs: instance.len(), snapshot: t })
}

/// Mean `δ(t, 1)` of each scheduler against SRPT's mean `δ*(t)` over
/// `trials` independent draws. Trials run in parallel; the result does not
/// depend on thread count.
pub fn run_lowerbound(keys: &[&str], family: &LbFamily, trials: u64, seed: u64) -> Result<Vec<LowerBoundResult>> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    for key in keys {
        if scheduler_by_key(key)?.clairvoyant() {
            return Err(Error::InvalidInput(format!("{key} sees true sizes; the lower bound only applies to non-clairvoyant schedulers")));
        }
    }
    let samples: Vec<Sample> = (0..trials)
        .into_par_iter()
        .map(|trial| one_trial(keys, family, derive_seed(seed, trial)))
        .collect::<Result<_>>()?;

    let opts: Vec<u64> = samples.iter().map(|s| s.opt).collect();
    let sum_opt: u64 = opts.iter().sum();
    let mean_opt = sum_opt as f64 / trials as f64;
    let first = &samples[0];
    Ok(keys
        .iter()
        .enumerate()
        .map(|(idx, key)| {
            let xs: Vec<u64> = samples.iter().map(|s| s.alg[idx]).collect();
            let sum_alg: u64 = xs.iter().sum();
            let mean_alg = sum_alg as f64 / trials as f64;
            LowerBoundResult {
                scheduler: key.to_string(),
                family: family.clone(),
                trials,
                jobs: first.jobs,
                snapshot: first.snapshot.clone(),
                sum_alg,
                sum_opt,
                mean_alg,
                mean_opt,
                ratio: if sum_opt == 0 { f64::INFINITY } else { sum_alg as f64 / sum_opt as f64 },
                stderr_alg: stderr(&xs),
                stderr_opt: stderr(&opts),
            }
        })
        .collect())
}
