use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::Keyshots;

/// How scores against several reference summaries are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "max" => Ok(Self::Max),
            other => Err(Error::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean in percent.
    pub f_score: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f_score = if precision + recall > 0.0 {
            200.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_user: Vec<Prf>,
}

impl From<Prf> for EvalReport {
    fn from(p: Prf) -> Self {
        Self {
            precision: p.precision,
            recall: p.recall,
            f_score: p.f_score,
            per_user: Vec::new(),
        }
    }
}

/// Precision, recall and F of candidate `a` against reference `b`,
/// measured in overlapping frames.
pub fn overlap_prf(a: &Keyshots, b: &Keyshots, frames: usize) -> Prf {
    let ma = a.mask(frames);
    let mb = b.mask(frames);
    let overlap = ma.iter().zip(&mb).filter(|(x, y)| **x && **y).count() as f64;
    let da = ma.iter().filter(|x| **x).count() as f64;
    let db = mb.iter().filter(|x| **x).count() as f64;
    let ratio = |d: f64| if d > 0.0 { overlap / d } else { 0.0 };
    Prf::from_pr(ratio(da), ratio(db))
}

/// Scores `candidate` against every reference and aggregates P, R and F
/// independently by `mode`.
pub fn eval_multi_user(
    candidate: &Keyshots,
    refs: &[Keyshots],
    frames: usize,
    mode: Aggregation,
) -> Result<EvalReport> {
    if refs.is_empty() {
        return Err(Error::contract("evaluation needs at least one reference"));
    }
    let per_user: Vec<Prf> = refs.iter().map(|r| overlap_prf(candidate, r, frames)).collect();
    let agg = |f: fn(&Prf) -> f64| -> f64 {
        let it = per_user.iter().map(f);
        match mode {
            Aggregation::Mean => it.sum::<f64>() / per_user.len() as f64,
            Aggregation::Max => it.fold(f64::NEG_INFINITY, f64::max),
        }
    };
    Ok(EvalReport {
        precision: agg(|p| p.precision),
        recall: agg(|p| p.recall),
        f_score: agg(|p| p.f_score),
        per_user,
    })
}
