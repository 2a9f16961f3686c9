use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TrainingVideo;
use crate::temporal::{
    budget_frames, default_max_segments, keyframes_to, kts_segment, scores_to, ImportanceCurve, KeyframeSet,
    Keyshots, Segmentation, DEFAULT_BUDGET_FRACTION, DEFAULT_SEGMENT_LEN,
};

use super::records::{AnnotationTrack, VideoRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareOptions {
    /// Target mean segment length for change-point segmentation.
    pub segment_len: usize,
    /// Budget used when converting annotations into keyshots.
    pub budget_fraction: f64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            segment_len: DEFAULT_SEGMENT_LEN,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
        }
    }
}

/// Change-point segmentation of a record's features.
pub fn segment_record(record: &VideoRecord, segment_len: usize) -> Result<Segmentation> {
    kts_segment(
        &record.features,
        segment_len,
        default_max_segments(record.frames(), segment_len),
    )
}

/// Frames chosen by at least half of the keyframe tracks.
pub fn consensus_keyframes(tracks: &[KeyframeSet], frames: usize) -> Result<KeyframeSet> {
    let mut votes = vec![0usize; frames];
    for t in tracks {
        for &k in t.as_slice() {
            votes[k] += 1;
        }
    }
    KeyframeSet::new(
        (0..frames)
            .filter(|&f| votes[f] > 0 && 2 * votes[f] >= tracks.len())
            .collect(),
        frames,
    )
}

fn mean_curve(curves: &[Vec<f64>]) -> Result<ImportanceCurve> {
    let n = curves.len() as f64;
    let frames = curves[0].len();
    ImportanceCurve::new(
        (0..frames)
            .map(|t| (curves.iter().map(|c| c[t]).sum::<f64>() / n).clamp(0.0, 1.0))
            .collect(),
    )
}

fn peak_frame(target: &ImportanceCurve, frames: usize) -> Result<KeyframeSet> {
    let best =
        target
            .as_slice()
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, f64)>, (t, &v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ if v > 0.0 => Some((t, v)),
                _ => acc,
            });
    KeyframeSet::new(best.map(|(t, _)| t).into_iter().collect(), frames)
}

/// Builds training targets and evaluation references from a record.
///
/// Regression target: mean of the score tracks, else the mean keyshot
/// indicator, else the consensus keyframes expanded to keyshots. Target
/// subset: consensus of the keyframe tracks, else the keyframes derived
/// from the regression target; when that is empty, the first frame of
/// peak importance. References: the keyshot tracks, else the
/// score tracks converted to keyshots, else the keyframe tracks converted.
pub fn prepare_video(record: &VideoRecord, opts: &PrepareOptions) -> Result<TrainingVideo> {
    record.validate()?;
    let frames = record.frames();
    let id = &record.id;
    if record.annotations.is_empty() {
        return Err(Error::Config(format!("video {id} has no annotations")));
    }
    let seg = segment_record(record, opts.segment_len)?;
    let budget = budget_frames(opts.budget_fraction, frames);

    let mut scores = Vec::new();
    let mut shots = Vec::new();
    let mut keyframes = Vec::new();
    for track in &record.annotations {
        match track {
            AnnotationTrack::Scores { .. } => scores.push(track.scores(frames).unwrap()?),
            AnnotationTrack::Keyshots { .. } => shots.push(track.keyshots(frames).unwrap()?),
            AnnotationTrack::Keyframes { .. } => keyframes.push(track.keyframes(frames).unwrap()?),
        }
    }

    let consensus = if keyframes.is_empty() {
        None
    } else {
        Some(consensus_keyframes(&keyframes, frames)?)
    };
    let target = if !scores.is_empty() {
        mean_curve(&scores.iter().map(|c| c.as_slice().to_vec()).collect::<Vec<_>>())?
    } else if !shots.is_empty() {
        mean_curve(&shots.iter().map(|s| s.indicator(frames)).collect::<Vec<_>>())?
    } else {
        keyframes_to(consensus.as_ref().unwrap(), &seg, budget)?.1
    };
    let subset = match consensus {
        Some(c) => c,
        None => scores_to(target.as_slice(), &seg, budget)?.1,
    };
    // No segment fits the budget, or the annotators never agree: keep the
    // single most important frame so likelihood training has a target.
    let subset = if subset.is_empty() {
        peak_frame(&target, frames)?
    } else {
        subset
    };
    let references: Vec<Keyshots> = if !shots.is_empty() {
        shots
    } else if !scores.is_empty() {
        scores
            .iter()
            .map(|c| scores_to(c.as_slice(), &seg, budget).map(|r| r.0))
            .collect::<Result<_>>()?
    } else {
        keyframes
            .iter()
            .map(|k| keyframes_to(k, &seg, budget).map(|r| r.0))
            .collect::<Result<_>>()?
    };
    Ok(TrainingVideo {
        id: id.clone(),
        features: record.features.clone(),
        seg,
        target,
        keyframes: subset,
        references,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn record(annotations: Vec<AnnotationTrack>) -> VideoRecord {
        let data = (0..40)
            .map(|t| if (t / 5) % 2 == 0 { 0.0 } else { 3.0 })
            .collect();
        VideoRecord {
            id: "v".into(),
            fps: 2.0,
            features: Matrix::from_vec(40, 1, data).unwrap(),
            annotations,
            source_dataset: "d".into(),
        }
    }

    #[test]
    fn consensus_rule() {
        let t = |v: Vec<usize>| KeyframeSet::new(v, 10).unwrap();
        let c =
            consensus_keyframes(&[t(vec![1, 2]), t(vec![2, 5]), t(vec![2, 5, 7]), t(vec![9])], 10).unwrap();
        assert_eq!(c.as_slice(), &[2, 5]);
    }

    #[test]
    fn target_priorities() {
        let scores: Vec<f64> = (0..40).map(|t| if t >= 30 { 0.9 } else { 0.1 }).collect();
        let v = prepare_video(
            &record(vec![
                AnnotationTrack::Keyframes { indices: vec![3] },
                AnnotationTrack::Scores {
                    scores: scores.clone(),
                },
            ]),
            &PrepareOptions::default(),
        )
        .unwrap();
        assert_eq!(v.target.as_slice(), scores.as_slice());
        assert_eq!(v.keyframes.as_slice(), &[3]);
        assert_eq!(v.references.len(), 1);
        assert!(v.references[0].duration() <= 6);

        let v = prepare_video(
            &record(vec![AnnotationTrack::Keyshots { shots: vec![[2, 5]] }]),
            &PrepareOptions::default(),
        )
        .unwrap();
        assert_eq!(v.target.as_slice()[2..=5], [1.0; 4]);
        assert_eq!(v.references[0].as_slice().len(), 1);
        assert!(!v.keyframes.is_empty());

        let v = prepare_video(
            &record(vec![
                AnnotationTrack::Keyframes { indices: vec![] },
                AnnotationTrack::Scores {
                    scores: (0..40)
                        .map(|t| if t == 17 || t == 30 { 0.8 } else { 0.2 })
                        .collect(),
                },
            ]),
            &PrepareOptions::default(),
        )
        .unwrap();
        assert_eq!(v.keyframes.as_slice(), &[17]);

        let err = prepare_video(&record(vec![]), &PrepareOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
