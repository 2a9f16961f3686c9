use crate::error::{Error, Result};
use crate::temporal::{KeyframeSet, Keyshots};

use super::records::{AnnotationTrack, VideoRecord};

/// Keeps every `floor(fps / target_fps)`-th frame starting at frame 0 and
/// maps every annotation track onto the kept grid: keyframes snap to the
/// nearest kept frame, shots keep the kept frames they contain (or their
/// snapped midpoint when they contain none), curves are sampled.
pub fn subsample(record: &VideoRecord, target_fps: f64) -> Result<VideoRecord> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::contract(format!(
            "target fps must be > 0, got {target_fps}"
        )));
    }
    if target_fps > record.fps * (1.0 + 1e-12) {
        return Err(Error::contract(format!(
            "cannot raise frame rate from {} to {target_fps}",
            record.fps
        )));
    }
    let stride = ((record.fps / target_fps) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    let t_len = record.frames();
    let kept = t_len.div_ceil(stride);
    let snap = |i: usize| ((i + stride / 2) / stride).min(kept.saturating_sub(1));

    let rows: Vec<Vec<f64>> = (0..kept)
        .map(|k| record.features.row(k * stride).to_vec())
        .collect();
    let features = crate::linalg::Matrix::from_rows(&rows);

    let annotations = record
        .annotations
        .iter()
        .map(|track| -> Result<AnnotationTrack> {
            Ok(match track {
                AnnotationTrack::Keyframes { indices } => AnnotationTrack::from_keyframes(&KeyframeSet::new(
                    indices.iter().map(|&i| snap(i)).collect(),
                    kept,
                )?),
                AnnotationTrack::Keyshots { shots } => {
                    let mut mask = vec![0.0; kept];
                    for &[s, e] in shots {
                        let (lo, hi) = (s.div_ceil(stride), e / stride);
                        if lo <= hi {
                            mask[lo..=hi.min(kept - 1)].fill(1.0);
                        } else {
                            mask[snap((s + e) / 2)] = 1.0;
                        }
                    }
                    AnnotationTrack::from_keyshots(&Keyshots::from_indicator(&mask))
                }
                AnnotationTrack::Scores { scores } => AnnotationTrack::Scores {
                    scores: (0..kept).map(|k| scores[k * stride]).collect(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let out = VideoRecord {
        id: record.id.clone(),
        fps: record.fps / stride as f64,
        features,
        annotations,
        source_dataset: record.source_dataset.clone(),
    };
    out.validate()?;
    Ok(out)
}
