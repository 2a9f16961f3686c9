use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::dpp::{map_greedy, DppKernel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::temporal::{budget_frames, keyframes_to, select_by_scores, KeyframeSet, Keyshots, Segmentation};

use super::nets::Model;

static SUMMARIES_CHECKED: AtomicUsize = AtomicUsize::new(0);

/// Number of summaries built (and budget-checked) in this process.
pub fn summaries_checked() -> usize {
    SUMMARIES_CHECKED.load(Ordering::Relaxed)
}

/// A budgeted selection of keyshots. Construction fails when the shots
/// exceed the budget, so every value of this type is within budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    frames: usize,
    budget: usize,
    keyshots: Keyshots,
    keyframes: KeyframeSet,
}

impl Summary {
    pub fn new(frames: usize, budget: usize, keyshots: Keyshots, keyframes: KeyframeSet) -> Result<Self> {
        let keyshots = Keyshots::new(keyshots.as_slice().to_vec(), frames)?;
        let keyframes = KeyframeSet::new(keyframes.as_slice().to_vec(), frames)?;
        SUMMARIES_CHECKED.fetch_add(1, Ordering::Relaxed);
        let duration = keyshots.duration();
        if duration > budget {
            return Err(Error::Budget { duration, budget });
        }
        Ok(Self {
            frames,
            budget,
            keyshots,
            keyframes,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn keyshots(&self) -> &Keyshots {
        &self.keyshots
    }

    pub fn keyframes(&self) -> &KeyframeSet {
        &self.keyframes
    }

    pub fn duration(&self) -> usize {
        self.keyshots.duration()
    }
}

/// Frames allowed for a summary of `frames` frames.
pub fn summary_budget(budget_fraction: f64, frames: usize) -> Result<usize> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::contract(format!(
            "budget fraction must lie in (0, 1], got {budget_fraction}"
        )));
    }
    Ok(budget_frames(budget_fraction, frames))
}

fn check_seg(seg: &Segmentation, frames: usize) -> Result<()> {
    if seg.is_empty() || seg.frames() != frames {
        return Err(Error::contract(format!(
            "segmentation covers {} frames, sequence has {frames}",
            seg.frames()
        )));
    }
    Ok(())
}

/// Knapsack over segments valued by their mean frame score.
pub fn summarize_scores(scores: &[f64], seg: &Segmentation, budget_fraction: f64) -> Result<Summary> {
    check_seg(seg, scores.len())?;
    let budget = summary_budget(budget_fraction, scores.len())?;
    let (shots, keyframes) = select_by_scores(scores, seg, budget, |_| true)?;
    Summary::new(scores.len(), budget, shots, keyframes)
}

/// Greedy MAP keyframes, expanded to their segments under the budget, then
/// topped up with the best remaining segments by `fill_scores`.
pub fn summarize_dpp(
    kernel: &DppKernel,
    fill_scores: &[f64],
    seg: &Segmentation,
    budget_fraction: f64,
) -> Result<Summary> {
    let frames = kernel.size();
    check_seg(seg, frames)?;
    if fill_scores.len() != frames {
        return Err(Error::shape("fill-in scores do not match the kernel"));
    }
    let budget = summary_budget(budget_fraction, frames)?;
    let map = KeyframeSet::new(map_greedy(kernel).into_vec(), frames)?;
    let (shots, _) = keyframes_to(&map, seg, budget)?;
    let mask = shots.mask(frames);
    let mut keyframes: Vec<usize> = map.as_slice().iter().copied().filter(|&k| mask[k]).collect();

    let used = shots.duration();
    let mut all_shots = shots.as_slice().to_vec();
    if used < budget {
        let (extra, extra_kf) = select_by_scores(fill_scores, seg, budget - used, |iv| !mask[iv.start])?;
        all_shots.extend_from_slice(extra.as_slice());
        keyframes.extend_from_slice(extra_kf.as_slice());
    }
    Summary::new(
        frames,
        budget,
        Keyshots::new(all_shots, frames)?,
        KeyframeSet::new(keyframes, frames)?,
    )
}

impl Model {
    /// Budgeted summary of one sequence.
    pub fn summarize(&self, x: &Matrix, seg: &Segmentation, budget_fraction: f64) -> Result<Summary> {
        check_seg(seg, x.rows())?;
        match self {
            Model::VsLstm(m) => summarize_scores(m.predict(x)?.as_slice(), seg, budget_fraction),
            Model::Mlp(m) => summarize_scores(&m.frame_scores(x, seg)?, seg, budget_fraction),
            Model::DppLstm(m) => {
                let (y, phi) = m.heads(x)?;
                let kernel = super::nets::quality_diversity_kernel(&y, &phi)?;
                summarize_dpp(&kernel, &y, seg, budget_fraction)
            }
            Model::DppLstmSingle(m) => {
                let kernel = m.build_kernel(x)?;
                let diag = kernel.matrix().diagonal();
                summarize_dpp(&kernel, &diag, seg, budget_fraction)
            }
        }
    }
}
