//! Job and instance model, estimate classes and distortion.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{Rational, TimeValue};

pub type JobId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub release: TimeValue,
    /// True processing time (volume). Hidden from non-clairvoyant schedulers.
    pub p_true: TimeValue,
    /// Estimated processing time given to the scheduler on release.
    pub p_est: TimeValue,
}

impl Job {
    pub fn class(&self) -> i32 {
        job_class(&self.p_est).expect("validated estimate is positive")
    }
}

/// Descriptor for instances whose true processing times are fixed online by
/// an adversary reacting to the algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdaptiveSpec {
    /// Until `snapshot` a job only completes once processed for `mu`; at
    /// `snapshot` every job with processed amount `x` gets `p = min(x + 1, mu)`.
    CapAfterSnapshot { mu: Rational, snapshot: TimeValue },
}

pub type Meta = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default)]
    pub meta: Meta,
    pub jobs: Vec<Job>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveSpec>,
}

impl Instance {
    pub fn empty() -> Self {
        Instance { meta: Meta::new(), jobs: Vec::new(), adaptive: None }
    }

    /// Build from `(release, p_true, p_est)` triples. Jobs are stably sorted
    /// by release and numbered in that order, so equal-release jobs keep
    /// their input order.
    pub fn from_triples<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TimeValue, TimeValue, TimeValue)>,
    {
        let mut rows: Vec<_> = triples.into_iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let jobs = rows
            .into_iter()
            .enumerate()
            .map(|(id, (release, p_true, p_est))| Job { id, release, p_true, p_est })
            .collect();
        let inst = Instance { meta: Meta::new(), jobs, adaptive: None };
        inst.validate()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (pos, job) in self.jobs.iter().enumerate() {
            if job.id != pos {
                return Err(Error::InvalidInput(format!(
                    "job ids must be dense and in order: position {pos} holds id {}",
                    job.id
                )));
            }
            if job.release.is_negative() {
                return Err(Error::InvalidInput(format!("job {} has negative release", job.id)));
            }
            if !job.p_true.is_positive() || !job.p_est.is_positive() {
                return Err(Error::InvalidInput(format!(
                    "job {} needs positive processing time and estimate",
                    job.id
                )));
            }
            if pos > 0 && self.jobs[pos - 1].release > job.release {
                return Err(Error::InvalidInput(format!(
                    "jobs must be sorted by release: job {} released before job {}",
                    job.id,
                    pos - 1
                )));
            }
        }
        if let Some(AdaptiveSpec::CapAfterSnapshot { mu, snapshot }) = &self.adaptive {
            if *mu < 1 || snapshot.is_negative() {
                return Err(Error::InvalidInput("adaptive spec needs mu >= 1 and snapshot >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn class_range(&self) -> Option<(i32, i32)> {
        let mut classes = self.jobs.iter().map(Job::class);
        let first = classes.next()?;
        Some(classes.fold((first, first), |(lo, hi), c| (lo.min(c), hi.max(c))))
    }

    pub fn last_release(&self) -> Option<&TimeValue> {
        self.jobs.last().map(|j| &j.release)
    }

    /// Time recorded by a generator as the interesting snapshot point.
    pub fn snapshot_time(&self) -> Option<TimeValue> {
        self.meta.get("snapshot_t")?.as_str()?.parse().ok()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Instance::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// SHA-256 over the compact canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Distortion measured over a realized instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionStats {
    /// Largest underestimation factor `p_true / p_est`, at least 1.
    pub mu1: Rational,
    /// Largest overestimation factor `p_est / p_true`, at least 1.
    pub mu2: Rational,
    pub mu: Rational,
}

/// The unique `i` with `2^i <= p_est < 2^(i+1)`.
pub fn job_class(p_est: &TimeValue) -> Result<i32> {
    if !p_est.is_positive() {
        return Err(Error::InvalidInput(format!("estimate must be positive, got {p_est}")));
    }
    p_est.floor_log2()
}

pub fn distortion_of(instance: &Instance) -> DistortionStats {
    let one = Rational::one();
    let (mu1, mu2) = instance.jobs.iter().fold((one.clone(), one), |(m1, m2), job| {
        (m1.max(&job.p_true / &job.p_est), m2.max(&job.p_est / &job.p_true))
    });
    let mu = &mu1 * &mu2;
    DistortionStats { mu1, mu2, mu }
}

/// Class separation `ceil(log2 mu) + 1`.
pub fn separator_sigma(mu: &Rational) -> Result<i32> {
    if *mu < 1 {
        return Err(Error::InvalidInput(format!("distortion must be at least 1, got {mu}")));
    }
    Ok(mu.ceil_log2()? + 1)
}
