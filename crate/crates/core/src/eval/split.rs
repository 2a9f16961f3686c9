use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Fraction of the target dataset held out for testing.
pub const TEST_FRACTION: f64 = 0.2;
/// Fraction of the training pool held out for validation.
pub const VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Train, validate and test on one dataset.
    #[default]
    Canonical,
    /// Canonical plus every auxiliary dataset in the training pool.
    Augmented,
    /// Auxiliary datasets only; the target is seen at test time alone.
    Transfer,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Canonical => "canonical",
            Setting::Augmented => "augmented",
            Setting::Transfer => "transfer",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Setting::Canonical),
            "augmented" => Ok(Setting::Augmented),
            "transfer" => Ok(Setting::Transfer),
            other => Err(Error::Config(format!("unknown setting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VideoRef {
    pub dataset: String,
    pub id: String,
}

impl VideoRef {
    pub fn new(dataset: &str, id: &str) -> Self {
        Self {
            dataset: dataset.to_string(),
            id: id.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub setting: Setting,
    /// Dataset the test videos come from.
    pub target: String,
    pub train: Vec<VideoRef>,
    pub val: Vec<VideoRef>,
    pub test: Vec<VideoRef>,
    pub seed: u64,
}

fn share(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

fn refs(ds: &Dataset) -> Vec<VideoRef> {
    ds.videos.iter().map(|v| VideoRef::new(&ds.name, &v.id)).collect()
}

impl SplitSpec {
    /// Seeded split. The test set is the same 20% of the target for every
    /// setting and seed, so settings can be compared on equal terms; the
    /// remaining pool is shuffled and 20% of it becomes validation.
    pub fn generate(setting: Setting, target: &str, datasets: &[Dataset], seed: u64) -> Result<Self> {
        let tgt = datasets
            .iter()
            .find(|d| d.name == target)
            .ok_or_else(|| Error::Config(format!("target dataset '{target}' not loaded")))?;
        if tgt.videos.len() < 2 && setting != Setting::Transfer {
            return Err(Error::InsufficientData(format!(
                "dataset '{target}' needs at least 2 videos for a held-out test set"
            )));
        }
        if tgt.videos.is_empty() {
            return Err(Error::InsufficientData(format!("dataset '{target}' is empty")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut target_refs = refs(tgt);
        target_refs.shuffle(&mut rng);
        let n_test = if tgt.videos.len() == 1 {
            1
        } else {
            share(tgt.videos.len(), TEST_FRACTION)
        };
        let rest = target_refs.split_off(n_test);
        let test = target_refs;

        let mut pool = match setting {
            Setting::Canonical => rest,
            Setting::Augmented => {
                let mut p = rest;
                p.extend(datasets.iter().filter(|d| d.name != target).flat_map(refs));
                p
            }
            Setting::Transfer => datasets
                .iter()
                .filter(|d| d.name != target)
                .flat_map(refs)
                .collect(),
        };
        if pool.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{setting} split needs at least 2 videos to train and validate, found {}",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        let train = pool.split_off(share(pool.len(), VAL_FRACTION));
        let split = Self {
            setting,
            target: target.to_string(),
            train,
            val: pool,
            test,
            seed,
        };
        split.validate()?;
        Ok(split)
    }

    /// Structural checks: disjoint test set, non-empty parts, and the
    /// dataset rules of the setting.
    pub fn validate(&self) -> Result<()> {
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if part.is_empty() {
                return Err(Error::Config(format!("split has an empty {name} set")));
            }
        }
        let seen: HashSet<&VideoRef> = self.train.iter().chain(&self.val).collect();
        if let Some(v) = self.test.iter().find(|v| seen.contains(v)) {
            return Err(Error::Config(format!(
                "test video {}/{} also appears in train or val",
                v.dataset, v.id
            )));
        }
        if let Some(v) = self.test.iter().find(|v| v.dataset != self.target) {
            return Err(Error::Config(format!(
                "test video {}/{} is not from the target",
                v.dataset, v.id
            )));
        }
        let fitting = self.train.iter().chain(&self.val);
        match self.setting {
            Setting::Canonical => {
                if let Some(v) = fitting.clone().find(|v| v.dataset != self.target) {
                    return Err(Error::Config(format!(
                        "canonical split uses {}/{} from another dataset",
                        v.dataset, v.id
                    )));
                }
            }
            Setting::Transfer => {
                if let Some(v) = fitting.clone().find(|v| v.dataset == self.target) {
                    return Err(Error::Config(format!(
                        "transfer split trains on target video {}",
                        v.id
                    )));
                }
            }
            Setting::Augmented => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn corpus(name: &str, n: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            name: name.into(),
            n_videos: n,
            min_frames: 20,
            max_frames: 30,
            feature_dim: 3,
            teacher_hidden: 3,
            video_seed: seed,
            ..SyntheticConfig::default()
        })
        .unwrap()
        .dataset
    }

    #[test]
    fn canonical_proportions() {
        let ds = vec![corpus("a", 50, 0)];
        let s = SplitSpec::generate(Setting::Canonical, "a", &ds, 3).unwrap();
        assert_eq!((s.test.len(), s.val.len(), s.train.len()), (10, 8, 32));
        assert_eq!(s, SplitSpec::generate(Setting::Canonical, "a", &ds, 3).unwrap());
    }

    #[test]
    fn settings_respect_dataset_rules() {
        let ds = vec![corpus("a", 10, 0), corpus("b", 6, 1), corpus("c", 4, 2)];
        let canon = SplitSpec::generate(Setting::Canonical, "a", &ds, 1).unwrap();
        let aug = SplitSpec::generate(Setting::Augmented, "a", &ds, 1).unwrap();
        let tr = SplitSpec::generate(Setting::Transfer, "a", &ds, 1).unwrap();
        assert_eq!(canon.test, aug.test);
        assert_eq!(canon.test, tr.test);
        assert_eq!(aug.train.len() + aug.val.len(), 8 + 10);
        assert!(tr.train.iter().chain(&tr.val).all(|v| v.dataset != "a"));
        assert_eq!(tr.train.len() + tr.val.len(), 10);
    }

    #[test]
    fn overlapping_test_is_rejected() {
        let ds = vec![corpus("a", 10, 0)];
        let mut s = SplitSpec::generate(Setting::Canonical, "a", &ds, 1).unwrap();
        s.train = s.test.clone();
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut t = SplitSpec::generate(
            Setting::Transfer,
            "a",
            &[corpus("a", 10, 0), corpus("b", 5, 1)],
            1,
        )
        .unwrap();
        t.val.push(VideoRef::new("a", "x"));
        assert!(matches!(t.validate(), Err(Error::Config(_))));
    }
}
