//! Temporal structure of a sequence: change-point segmentation, the three
//! annotation formats (keyframes, keyshots, importance curves), conversions
//! between them, and budgeted interval selection.
//!
//! All frame indices are 0-based and intervals are inclusive on both ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default summary budget as a fraction of the sequence length.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.15;
/// Default mean segment length in frames (about 5 s at 2 fps).
pub const DEFAULT_SEGMENT_LEN: usize = 10;

const VALUE_RTOL: f64 = 1e-12;
const KTS_TOLERANCE: f64 = 0.25;
const KTS_BISECTION_STEPS: usize = 100;

/// `floor(fraction * frames)`, robust to representation error in the
/// product (e.g. `0.15 * 60`).
pub fn budget_frames(fraction: f64, frames: usize) -> usize {
    (fraction * frames as f64 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }

    /// The middle frame, rounding up on even lengths.
    pub fn middle(&self) -> usize {
        (self.start + self.end).div_ceil(2)
    }
}

/// Partition of `0..frames` into consecutive intervals, stored as the
/// start index of each interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    boundaries: Vec<usize>,
    frames: usize,
}

impl Segmentation {
    pub fn new(boundaries: Vec<usize>, frames: usize) -> Result<Self> {
        if frames == 0 || boundaries.is_empty() {
            return Err(Error::contract("segmentation must cover at least one frame"));
        }
        if boundaries[0] != 0 {
            return Err(Error::contract("segmentation must start at frame 0"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("segment starts must be strictly increasing"));
        }
        if *boundaries.last().unwrap() >= frames {
            return Err(Error::contract(format!(
                "segment start {} out of range for {frames} frames",
                boundaries.last().unwrap()
            )));
        }
        Ok(Self { boundaries, frames })
    }

    pub fn single(frames: usize) -> Result<Self> {
        Self::new(vec![0], frames)
    }

    /// Fixed-length segments, the last one possibly shorter.
    pub fn uniform(frames: usize, len: usize) -> Result<Self> {
        Self::new((0..frames).step_by(len.max(1)).collect(), frames)
    }

    pub fn from_intervals(intervals: &[Interval], frames: usize) -> Result<Self> {
        let mut expected = 0;
        for iv in intervals {
            if iv.start != expected || iv.end < iv.start {
                return Err(Error::contract("intervals must tile the sequence in order"));
            }
            expected = iv.end + 1;
        }
        if expected != frames {
            return Err(Error::contract(format!(
                "intervals cover {expected} of {frames} frames"
            )));
        }
        Self::new(intervals.iter().map(|iv| iv.start).collect(), frames)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.boundaries
            .iter()
            .enumerate()
            .map(|(k, &start)| {
                let end = self.boundaries.get(k + 1).map_or(self.frames, |&b| b) - 1;
                Interval::new(start, end)
            })
            .collect()
    }

    /// Index of the interval containing `frame`.
    pub fn segment_of(&self, frame: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= frame) - 1
    }
}

/// Sorted distinct keyframe indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeyframeSet(Vec<usize>);

impl KeyframeSet {
    pub fn new(mut indices: Vec<usize>, frames: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&max) = indices.last() {
            if max >= frames {
                return Err(Error::contract(format!(
                    "keyframe {max} out of range for {frames} frames"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Keyframes from a 0/1 indicator vector.
    pub fn from_indicator(indicator: &[f64]) -> Self {
        Self(
            indicator
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.5)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indicator(&self, frames: usize) -> Vec<f64> {
        let mut v = vec![0.0; frames];
        for &i in &self.0 {
            if i < frames {
                v[i] = 1.0;
            }
        }
        v
    }
}

/// Disjoint, sorted, non-empty intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Keyshots(Vec<Interval>);

impl Keyshots {
    pub fn new(mut shots: Vec<Interval>, frames: usize) -> Result<Self> {
        shots.sort();
        for s in &shots {
            if s.end < s.start || s.end >= frames {
                return Err(Error::contract(format!(
                    "keyshot {}-{} invalid for {frames} frames",
                    s.start, s.end
                )));
            }
        }
        if shots.windows(2).any(|w| w[1].start <= w[0].end) {
            return Err(Error::contract("keyshots overlap"));
        }
        Ok(Self(shots))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Maximal runs of non-zero entries of an indicator vector.
    pub fn from_indicator(indicator: &[f64]) -> Self {
        let mut shots = Vec::new();
        let mut start = None;
        for (i, &v) in indicator.iter().enumerate() {
            match (v > 0.5, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    shots.push(Interval::new(s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            shots.push(Interval::new(s, indicator.len() - 1));
        }
        Self(shots)
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn duration(&self) -> usize {
        self.0.iter().map(Interval::len).sum()
    }

    pub fn indicator(&self, frames: usize) -> Vec<f64> {
        let mut v = vec![0.0; frames];
        for s in &self.0 {
            for f in s.start..=s.end.min(frames.saturating_sub(1)) {
                v[f] = 1.0;
            }
        }
        v
    }

    pub fn mask(&self, frames: usize) -> Vec<bool> {
        self.indicator(frames).into_iter().map(|v| v > 0.5).collect()
    }

    /// Union of two keyshot sets; touching or overlapping shots merge.
    pub fn union(&self, other: &Keyshots, frames: usize) -> Keyshots {
        let mut ind = self.indicator(frames);
        for (a, b) in ind.iter_mut().zip(other.indicator(frames)) {
            *a = a.max(b);
        }
        Keyshots::from_indicator(&ind)
    }
}

/// Per-frame importance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceCurve(Vec<f64>);

impl ImportanceCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::contract(format!(
                "importance score {v} at frame {i} outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Budgeted selection

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackItem {
    pub value: f64,
    pub duration: usize,
}

#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    duration: usize,
}

fn values_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// `a` strictly better than `b`: more value, or equal value in less time.
fn better(a: Best, b: Best) -> bool {
    if values_equal(a.value, b.value) {
        a.duration < b.duration
    } else {
        a.value > b.value
    }
}

/// Exact 0/1 knapsack over integer durations.
///
/// Maximizes total value with total duration at most `budget`. Among
/// equal-value solutions the shorter one wins, then the lexicographically
/// smallest index set. Returns sorted item indices.
pub fn knapsack_select(items: &[KnapsackItem], budget: usize) -> Vec<usize> {
    let n = items.len();
    let width = budget + 1;
    let empty = Best {
        value: 0.0,
        duration: 0,
    };
    // best[i][w]: optimum over items i.. with capacity w
    let mut best = vec![empty; (n + 1) * width];
    for i in (0..n).rev() {
        let item = items[i];
        for w in 0..width {
            let skip = best[(i + 1) * width + w];
            let mut pick = skip;
            if item.duration <= w {
                let rest = best[(i + 1) * width + w - item.duration];
                let take = Best {
                    value: rest.value + item.value,
                    duration: rest.duration + item.duration,
                };
                if better(take, skip) {
                    pick = take;
                }
            }
            best[i * width + w] = pick;
        }
    }

    let mut chosen = Vec::new();
    let mut w = budget;
    for (i, item) in items.iter().enumerate() {
        if item.duration > w {
            continue;
        }
        let target = best[i * width + w];
        let rest = best[(i + 1) * width + w - item.duration];
        let take_value = rest.value + item.value;
        let take_duration = rest.duration + item.duration;
        if values_equal(take_value, target.value) && take_duration == target.duration {
            chosen.push(i);
            w -= item.duration;
        }
    }
    chosen
}

// ---------------------------------------------------------------------------
// Format conversions

/// Keyframes to keyshots: intervals holding at least one keyframe are
/// candidates, valued by keyframe density, and chosen by knapsack under
/// `budget`. Also returns the indicator curve of the chosen shots.
pub fn keyframes_to(
    keyframes: &KeyframeSet,
    seg: &Segmentation,
    budget: usize,
) -> Result<(Keyshots, ImportanceCurve)> {
    let frames = seg.frames();
    if keyframes.as_slice().last().is_some_and(|&k| k >= frames) {
        return Err(Error::contract("keyframe beyond the segmented range"));
    }
    let intervals = seg.intervals();
    let mut counts = vec![0usize; intervals.len()];
    for &k in keyframes.as_slice() {
        counts[seg.segment_of(k)] += 1;
    }
    let candidates: Vec<usize> = (0..intervals.len()).filter(|&i| counts[i] > 0).collect();
    let items: Vec<KnapsackItem> = candidates
        .iter()
        .map(|&i| KnapsackItem {
            value: counts[i] as f64 / intervals[i].len() as f64,
            duration: intervals[i].len(),
        })
        .collect();
    let shots: Vec<Interval> = knapsack_select(&items, budget)
        .into_iter()
        .map(|k| intervals[candidates[k]])
        .collect();
    let shots = Keyshots::new(shots, frames)?;
    let curve = ImportanceCurve::new(shots.indicator(frames))?;
    Ok((shots, curve))
}

/// Keyshots to keyframes (the middle frame of each shot, rounding up) and
/// to an indicator curve.
pub fn keyshots_to(shots: &Keyshots, frames: usize) -> Result<(KeyframeSet, ImportanceCurve)> {
    // re-validate, the caller may have built the set for another length
    let shots = Keyshots::new(shots.as_slice().to_vec(), frames)?;
    let keyframes = KeyframeSet::new(shots.as_slice().iter().map(Interval::middle).collect(), frames)?;
    let curve = ImportanceCurve::new(shots.indicator(frames))?;
    Ok((keyframes, curve))
}

/// Mean score of every interval of `seg`.
pub fn interval_means(scores: &[f64], seg: &Segmentation) -> Vec<f64> {
    seg.intervals()
        .iter()
        .map(|iv| scores[iv.start..=iv.end].iter().sum::<f64>() / iv.len() as f64)
        .collect()
}

/// Scores to keyshots and keyframes: intervals are valued by their mean
/// score and chosen by knapsack under `budget`; each chosen shot
/// contributes its highest-scoring frame (earliest on ties).
pub fn scores_to(scores: &[f64], seg: &Segmentation, budget: usize) -> Result<(Keyshots, KeyframeSet)> {
    select_by_scores(scores, seg, budget, |_| true)
}

/// Like [`scores_to`], restricted to intervals accepted by `allow`.
pub fn select_by_scores(
    scores: &[f64],
    seg: &Segmentation,
    budget: usize,
    allow: impl Fn(&Interval) -> bool,
) -> Result<(Keyshots, KeyframeSet)> {
    let frames = seg.frames();
    if scores.len() != frames {
        return Err(Error::contract(format!(
            "{} scores for a segmentation of {frames} frames",
            scores.len()
        )));
    }
    let intervals = seg.intervals();
    let means = interval_means(scores, seg);
    let candidates: Vec<usize> = (0..intervals.len()).filter(|&i| allow(&intervals[i])).collect();
    let items: Vec<KnapsackItem> = candidates
        .iter()
        .map(|&i| KnapsackItem {
            value: means[i].max(0.0),
            duration: intervals[i].len(),
        })
        .collect();
    let chosen: Vec<Interval> = knapsack_select(&items, budget)
        .into_iter()
        .map(|k| intervals[candidates[k]])
        .collect();
    let keyframes = chosen
        .iter()
        .map(|iv| {
            (iv.start..=iv.end).fold(
                iv.start,
                |best, f| if scores[f] > scores[best] { f } else { best },
            )
        })
        .collect();
    Ok((
        Keyshots::new(chosen, frames)?,
        KeyframeSet::new(keyframes, frames)?,
    ))
}

// ---------------------------------------------------------------------------
// Kernel temporal segmentation

/// Optimal segmentations for every segment count up to a limit, under the
/// within-segment scatter of a linear kernel.
pub struct SegmentationCosts {
    frames: usize,
    /// `cost[m - 1][t]`: best cost of splitting `0..t` into `m` segments
    cost: Vec<Vec<f64>>,
    /// `back[m - 1][t]`: start of the last segment in that optimum
    back: Vec<Vec<usize>>,
    energy: f64,
}

/// Within-segment scatter `sum |x_i|^2 - |sum x_i|^2 / n` for every
/// segment `[a, b)`, stored densely as `scatter[a * (T + 1) + b]`.
fn scatter_table(x: &Matrix) -> Vec<f64> {
    let t_len = x.rows();
    let d = x.cols();
    let w = t_len + 1;
    let mut table = vec![0.0; w * w];
    let mut sum = vec![0.0; d];
    for a in 0..t_len {
        sum.iter_mut().for_each(|s| *s = 0.0);
        let mut sq = 0.0;
        for b in (a + 1)..=t_len {
            let row = x.row(b - 1);
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            sq += row.iter().map(|v| v * v).sum::<f64>();
            let n = (b - a) as f64;
            let mean_sq = sum.iter().map(|v| v * v).sum::<f64>() / n;
            table[a * w + b] = (sq - mean_sq).max(0.0);
        }
    }
    table
}

impl SegmentationCosts {
    pub fn compute(x: &Matrix, max_segments: usize) -> Result<Self> {
        let t_len = x.rows();
        if t_len == 0 {
            return Err(Error::EmptyInput("cannot segment an empty sequence".into()));
        }
        let max_m = max_segments.clamp(1, t_len);
        let w = t_len + 1;
        let scatter = scatter_table(x);
        let mut cost = vec![vec![f64::INFINITY; w]; max_m];
        let mut back = vec![vec![0usize; w]; max_m];
        for t in 1..=t_len {
            cost[0][t] = scatter[t];
        }
        for m in 2..=max_m {
            for t in m..=t_len {
                let mut best = f64::INFINITY;
                let mut arg = m - 1;
                for s in (m - 1)..t {
                    let c = cost[m - 2][s] + scatter[s * w + t];
                    if c < best {
                        best = c;
                        arg = s;
                    }
                }
                cost[m - 1][t] = best;
                back[m - 1][t] = arg;
            }
        }
        let energy = x.as_slice().iter().map(|v| v * v).sum();
        Ok(Self {
            frames: t_len,
            cost,
            back,
            energy,
        })
    }

    pub fn max_segments(&self) -> usize {
        self.cost.len()
    }

    /// Optimal cost with exactly `m` segments.
    pub fn cost(&self, m: usize) -> f64 {
        self.cost[m - 1][self.frames]
    }

    /// The optimal segmentation with exactly `m` segments.
    pub fn segmentation(&self, m: usize) -> Result<Segmentation> {
        let mut starts = Vec::with_capacity(m);
        let mut t = self.frames;
        for k in (1..=m).rev() {
            let s = if k == 1 { 0 } else { self.back[k - 1][t] };
            starts.push(s);
            t = s;
        }
        starts.reverse();
        Segmentation::new(starts, self.frames)
    }

    /// Segment count minimizing `cost(m) + penalty * m` (ties to fewer).
    pub fn best_count(&self, penalty: f64) -> usize {
        let mut best_m = 1;
        let mut best = self.cost(1) + penalty;
        for m in 2..=self.max_segments() {
            let c = self.cost(m) + penalty * m as f64;
            if c < best {
                best = c;
                best_m = m;
            }
        }
        best_m
    }
}

/// Change-point segmentation with a per-segment penalty.
pub fn kts_penalized(x: &Matrix, penalty: f64, max_segments: usize) -> Result<Segmentation> {
    let costs = SegmentationCosts::compute(x, max_segments)?;
    costs.segmentation(costs.best_count(penalty))
}

/// Kernel temporal segmentation. Minimizes total within-segment scatter
/// of a linear kernel plus `penalty * segments`, with the penalty chosen
/// by bisection so the mean segment length lands within 25% of
/// `target_mean_len`. When no penalty achieves that, the reachable count
/// closest to the target is used.
pub fn kts_segment(x: &Matrix, target_mean_len: usize, max_segments: usize) -> Result<Segmentation> {
    if target_mean_len == 0 {
        return Err(Error::contract("target segment length must be >= 1"));
    }
    let costs = SegmentationCosts::compute(x, max_segments)?;
    let frames = costs.frames as f64;
    let target = target_mean_len as f64;
    let lo_len = (1.0 - KTS_TOLERANCE) * target;
    let hi_len = (1.0 + KTS_TOLERANCE) * target;

    let scale = costs.energy.max(f64::MIN_POSITIVE);
    let mut lo = 1e-12 * scale;
    let mut hi = costs.cost(1) + scale;
    let mut best_m = costs.best_count(hi);
    let distance = |m: usize| (frames / m as f64 - target).abs();
    let consider = |m: usize, best_m: &mut usize| {
        let (d, db) = (distance(m), distance(*best_m));
        if d < db || (d == db && m < *best_m) {
            *best_m = m;
        }
    };
    consider(costs.best_count(lo), &mut best_m);

    for _ in 0..KTS_BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        let m = costs.best_count(mid);
        let mean = frames / m as f64;
        consider(m, &mut best_m);
        if mean < lo_len {
            lo = mid;
        } else if mean > hi_len {
            hi = mid;
        } else {
            best_m = m;
            break;
        }
    }
    costs.segmentation(best_m)
}

/// Default segment-count ceiling for a sequence, comfortably above what the
/// length calibration can ask for.
pub fn default_max_segments(frames: usize, target_mean_len: usize) -> usize {
    (2 * frames).div_ceil(target_mean_len.max(1)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table2_seg() -> Segmentation {
        Segmentation::new(vec![0, 2, 4], 6).unwrap()
    }

    #[test]
    fn segmentation_validation() {
        assert!(Segmentation::new(vec![], 3).is_err());
        assert!(Segmentation::new(vec![1], 3).is_err());
        assert!(Segmentation::new(vec![0, 0], 3).is_err());
        assert!(Segmentation::new(vec![0, 3], 3).is_err());
        let s = table2_seg();
        assert_eq!(
            s.intervals(),
            vec![Interval::new(0, 1), Interval::new(2, 3), Interval::new(4, 5)]
        );
        assert_eq!(s.segment_of(3), 1);
        assert_eq!(Segmentation::from_intervals(&s.intervals(), 6).unwrap(), s);
    }

    #[test]
    fn keyshots_reject_overlap() {
        let err = Keyshots::new(vec![Interval::new(0, 2), Interval::new(2, 3)], 6).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert!(Keyshots::new(vec![Interval::new(4, 6)], 6).is_err());
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(budget_frames(0.15, 60), 9);
        assert_eq!(budget_frames(0.15, 100), 15);
        assert_eq!(budget_frames(0.15, 6), 0);
        assert_eq!(budget_frames(1.0, 7), 7);
    }

    #[test]
    fn table2_keyframes() {
        let kf = KeyframeSet::from_indicator(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (shots, curve) = keyframes_to(&kf, &table2_seg(), 5).unwrap();
        assert_eq!(shots.indicator(6), vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(curve.as_slice(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn table2_keyshots() {
        let shots = Keyshots::from_indicator(&[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let (kf, curve) = keyshots_to(&shots, 6).unwrap();
        assert_eq!(kf.indicator(6), vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(curve.as_slice(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn table2_scores() {
        let scores = [0.5, 0.9, 0.1, 0.2, 0.7, 0.8];
        let (shots, kf) = scores_to(&scores, &table2_seg(), 5).unwrap();
        assert_eq!(shots.indicator(6), vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kf.indicator(6), vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn table2_round_trip() {
        let kf = KeyframeSet::from_indicator(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (shots, _) = keyframes_to(&kf, &table2_seg(), 5).unwrap();
        let (back, _) = keyshots_to(&shots, 6).unwrap();
        assert_eq!(back, kf);
    }

    #[test]
    fn conversion_edge_cases() {
        let seg = table2_seg();
        let (shots, curve) = keyframes_to(&KeyframeSet::empty(), &seg, 5).unwrap();
        assert!(shots.is_empty());
        assert!(curve.as_slice().iter().all(|&v| v == 0.0));

        let all = KeyframeSet::new((0..6).collect(), 6).unwrap();
        let (shots, _) = keyframes_to(&all, &seg, 6).unwrap();
        assert_eq!(shots.len(), 3);

        let full = Keyshots::new(vec![Interval::new(0, 6)], 7).unwrap();
        let (kf, _) = keyshots_to(&full, 7).unwrap();
        assert_eq!(kf.as_slice(), &[3]);
        let (kf, curve) = keyshots_to(&Keyshots::empty(), 4).unwrap();
        assert!(kf.is_empty());
        assert_eq!(curve.as_slice(), &[0.0; 4]);

        let (shots, kf) = scores_to(&[0.3; 6], &seg, 0).unwrap();
        assert!(shots.is_empty() && kf.is_empty());
    }

    #[test]
    fn equal_scores_follow_tie_break() {
        let seg = table2_seg();
        let (shots, _) = scores_to(&[0.4; 6], &seg, 5).unwrap();
        assert_eq!(shots.as_slice(), &[Interval::new(0, 1), Interval::new(2, 3)]);
        assert!(shots.duration() <= 5);
    }

    #[test]
    fn knapsack_fixtures() {
        let items = [
            KnapsackItem {
                value: 0.7,
                duration: 2,
            },
            KnapsackItem {
                value: 0.15,
                duration: 2,
            },
            KnapsackItem {
                value: 0.75,
                duration: 2,
            },
        ];
        assert_eq!(knapsack_select(&items, 5), vec![0, 2]);
        assert!(knapsack_select(&items, 0).is_empty());
        // shorter wins at equal value, then lexicographic order
        let items = [
            KnapsackItem {
                value: 1.0,
                duration: 3,
            },
            KnapsackItem {
                value: 1.0,
                duration: 2,
            },
            KnapsackItem {
                value: 1.0,
                duration: 2,
            },
        ];
        assert_eq!(knapsack_select(&items, 3), vec![1]);
    }

    fn brute_force(items: &[KnapsackItem], budget: usize) -> Vec<usize> {
        let n = items.len();
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for mask in 0u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let dur: usize = idx.iter().map(|&i| items[i].duration).sum();
            if dur > budget {
                continue;
            }
            let val: f64 = idx.iter().map(|&i| items[i].value).sum();
            let replace = match &best {
                None => true,
                Some((bv, bd, bi)) => {
                    if values_equal(val, *bv) {
                        dur < *bd || (dur == *bd && idx < *bi)
                    } else {
                        val > *bv
                    }
                }
            };
            if replace {
                best = Some((val, dur, idx));
            }
        }
        best.unwrap().2
    }

    #[test]
    fn knapsack_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let n = rng.random_range(0..=12);
            let items: Vec<KnapsackItem> = (0..n)
                .map(|_| KnapsackItem {
                    value: rng.random_range(0.0..1.0),
                    duration: rng.random_range(1..=8),
                })
                .collect();
            let budget = rng.random_range(0..=30);
            assert_eq!(knapsack_select(&items, budget), brute_force(&items, budget));
        }
    }

    #[test]
    fn kts_constant_features_single_segment() {
        let x = Matrix::from_vec(40, 3, vec![0.7; 120]).unwrap();
        let seg = kts_segment(&x, 10, 20).unwrap();
        assert_eq!(seg.len(), 1);
        let zeros = Matrix::zeros(15, 2);
        assert_eq!(kts_segment(&zeros, 5, 10).unwrap().len(), 1);
    }

    #[test]
    fn kts_empty_input() {
        assert!(matches!(
            kts_segment(&Matrix::zeros(0, 3), 10, 5).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    fn step_signal(t_len: usize, k: usize) -> Matrix {
        let data = (0..t_len)
            .flat_map(|t| if t < k { [1.0, -2.0] } else { [4.0, 0.5] })
            .collect();
        Matrix::from_vec(t_len, 2, data).unwrap()
    }

    #[test]
    fn kts_finds_single_step() {
        for k in 3..17 {
            let x = step_signal(20, k);
            let seg = kts_segment(&x, 10, 10).unwrap();
            assert_eq!(seg.boundaries(), &[0, k], "step at {k}");
        }
    }

    /// Every way of cutting `0..t_len` into at most `max_m` segments.
    fn all_segmentations(t_len: usize, max_m: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![0]];
        if max_m >= 2 {
            for a in 1..t_len {
                out.push(vec![0, a]);
                if max_m >= 3 {
                    for b in (a + 1)..t_len {
                        out.push(vec![0, a, b]);
                    }
                }
            }
        }
        out
    }

    fn direct_cost(x: &Matrix, starts: &[usize]) -> f64 {
        let t_len = x.rows();
        let mut total = 0.0;
        for (k, &s) in starts.iter().enumerate() {
            let e = starts.get(k + 1).copied().unwrap_or(t_len);
            let n = (e - s) as f64;
            for c in 0..x.cols() {
                let mean = (s..e).map(|t| x[(t, c)]).sum::<f64>() / n;
                total += (s..e).map(|t| (x[(t, c)] - mean).powi(2)).sum::<f64>();
            }
        }
        total
    }

    #[test]
    fn kts_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let data = (0..10)
                .flat_map(|t| {
                    let level = if (t + trial) % 7 < 4 { 1.0 } else { -1.0 };
                    [level + rng.random_range(-0.3..0.3)]
                })
                .collect();
            let x = Matrix::from_vec(10, 1, data).unwrap();
            let costs = SegmentationCosts::compute(&x, 3).unwrap();
            for m in 1..=3 {
                let oracle = all_segmentations(10, 3)
                    .into_iter()
                    .filter(|s| s.len() == m)
                    .map(|s| direct_cost(&x, &s))
                    .fold(f64::INFINITY, f64::min);
                assert!((costs.cost(m) - oracle).abs() < 1e-9);
            }
            let penalty = 0.2;
            let best = all_segmentations(10, 3)
                .into_iter()
                .min_by(|a, b| {
                    let ca = direct_cost(&x, a) + penalty * a.len() as f64;
                    let cb = direct_cost(&x, b) + penalty * b.len() as f64;
                    ca.total_cmp(&cb)
                })
                .unwrap();
            let seg = kts_penalized(&x, penalty, 3).unwrap();
            assert_eq!(seg.boundaries(), best.as_slice());
        }
    }

    #[test]
    fn kts_mean_length_near_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut rows = Vec::new();
        while rows.len() < 150 {
            let len = rng.random_range(5..=20);
            let level: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            for _ in 0..len {
                rows.push(
                    level
                        .iter()
                        .map(|v| v + rng.random_range(-0.05..0.05))
                        .collect::<Vec<_>>(),
                );
            }
        }
        rows.truncate(150);
        let x = Matrix::from_rows(&rows);
        let seg = kts_segment(&x, 10, default_max_segments(150, 10)).unwrap();
        let mean = 150.0 / seg.len() as f64;
        assert!((7.5..=12.5).contains(&mean), "mean {mean}");
    }

    #[test]
    fn kts_respects_max_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let x = Matrix::from_vec(60, 2, (0..120).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let seg = kts_segment(&x, 2, 4).unwrap();
        assert!(seg.len() <= 4);
    }
}
