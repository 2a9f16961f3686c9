use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::temporal::{ImportanceCurve, Interval, KeyframeSet, Keyshots};

use super::features::{read_features, write_features};
use super::io::{read_string, write_atomic};

/// One annotator's ground truth in one of the three formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum AnnotationTrack {
    Keyframes { indices: Vec<usize> },
    Keyshots { shots: Vec<[usize; 2]> },
    Scores { scores: Vec<f64> },
}

impl AnnotationTrack {
    pub fn from_keyframes(k: &KeyframeSet) -> Self {
        Self::Keyframes {
            indices: k.as_slice().to_vec(),
        }
    }

    pub fn from_keyshots(k: &Keyshots) -> Self {
        Self::Keyshots {
            shots: k.as_slice().iter().map(|iv| [iv.start, iv.end]).collect(),
        }
    }

    pub fn from_scores(c: &ImportanceCurve) -> Self {
        Self::Scores {
            scores: c.as_slice().to_vec(),
        }
    }

    pub fn format_name(&self) -> &'static str {
        match self {
            Self::Keyframes { .. } => "keyframes",
            Self::Keyshots { .. } => "keyshots",
            Self::Scores { .. } => "scores",
        }
    }

    pub fn keyframes(&self, frames: usize) -> Option<Result<KeyframeSet>> {
        match self {
            Self::Keyframes { indices } => Some(KeyframeSet::new(indices.clone(), frames)),
            _ => None,
        }
    }

    pub fn keyshots(&self, frames: usize) -> Option<Result<Keyshots>> {
        match self {
            Self::Keyshots { shots } => Some(
                shots
                    .iter()
                    .map(|&[s, e]| {
                        if s > e {
                            Err(Error::contract(format!("keyshot {s}-{e} ends before it starts")))
                        } else {
                            Ok(Interval::new(s, e))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
                    .and_then(|v| Keyshots::new(v, frames)),
            ),
            _ => None,
        }
    }

    pub fn scores(&self, frames: usize) -> Option<Result<ImportanceCurve>> {
        match self {
            Self::Scores { scores } => Some(if scores.len() != frames {
                Err(Error::contract(format!(
                    "{} scores for {frames} frames",
                    scores.len()
                )))
            } else {
                ImportanceCurve::new(scores.clone())
            }),
            _ => None,
        }
    }

    /// Checks the track against a sequence of `frames` frames.
    pub fn validate(&self, frames: usize) -> Result<()> {
        match self {
            Self::Keyframes { .. } => self.keyframes(frames).expect("keyframes").map(drop),
            Self::Keyshots { .. } => self.keyshots(frames).expect("keyshots").map(drop),
            Self::Scores { .. } => self.scores(frames).expect("scores").map(drop),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str, context: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(e, context))
    }
}

pub(crate) fn toml_error(e: toml::de::Error, context: &str) -> Error {
    Error::Parse {
        context: context.to_string(),
        offset: e.span().map_or(0, |s| s.start),
        message: e.message().to_string(),
    }
}

pub fn read_annotation(path: impl AsRef<Path>) -> Result<AnnotationTrack> {
    let path = path.as_ref();
    AnnotationTrack::from_toml(&read_string(path)?, &path.display().to_string())
}

pub fn write_annotation(path: impl AsRef<Path>, track: &AnnotationTrack) -> Result<()> {
    write_atomic(path, track.to_toml()?.as_bytes())
}

/// A video: its frame features and every annotation track.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub fps: f64,
    pub features: Matrix,
    pub annotations: Vec<AnnotationTrack>,
    pub source_dataset: String,
}

impl VideoRecord {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    /// Full validation battery: frames present, features finite, every
    /// track consistent with the length.
    pub fn validate(&self) -> Result<()> {
        let id = &self.id;
        if self.frames() == 0 {
            return Err(Error::record(id, "features", "no frames"));
        }
        if !self.features.is_finite() {
            return Err(Error::record(id, "features", "non-finite value"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::record(id, "fps", format!("must be > 0, got {}", self.fps)));
        }
        for (i, track) in self.annotations.iter().enumerate() {
            track
                .validate(self.frames())
                .map_err(|e| Error::record(id, &format!("annotations[{i}]"), e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub fps: f64,
    pub features: PathBuf,
    #[serde(default)]
    pub annotations: Vec<PathBuf>,
    pub source_dataset: String,
}

/// Index of a dataset on disk; paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub feature_dim: usize,
    #[serde(default)]
    pub videos: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_dim: usize,
    pub videos: Vec<VideoRecord>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for v in &self.videos {
            v.validate()?;
            if v.features.cols() != self.feature_dim {
                return Err(Error::record(
                    &v.id,
                    "features",
                    format!(
                        "{} columns, dataset declares {}",
                        v.features.cols(),
                        self.feature_dim
                    ),
                ));
            }
        }
        let mut ids: Vec<&str> = self.videos.iter().map(|v| v.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::record(w[0], "id", "duplicate video id"));
        }
        Ok(())
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.id == id)
    }
}

fn load_entry(base: &Path, entry: &ManifestEntry) -> Result<VideoRecord> {
    let wrap = |field: &str| {
        let id = entry.id.clone();
        let field = field.to_string();
        move |e: Error| Error::record(&id, &field, e.to_string())
    };
    let features = read_features(base.join(&entry.features)).map_err(wrap("features"))?;
    let annotations = entry
        .annotations
        .iter()
        .enumerate()
        .map(|(i, p)| read_annotation(base.join(p)).map_err(wrap(&format!("annotations[{i}]"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoRecord {
        id: entry.id.clone(),
        fps: entry.fps,
        features,
        annotations,
        source_dataset: entry.source_dataset.clone(),
    })
}

/// Reads a manifest and every file it references, then validates the
/// records.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let path = manifest_path.as_ref();
    let manifest: DatasetManifest =
        toml::from_str(&read_string(path)?).map_err(|e| toml_error(e, &path.display().to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let videos = manifest
        .videos
        .par_iter()
        .map(|entry| load_entry(base, entry))
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset {
        name: manifest.name,
        feature_dim: manifest.feature_dim,
        videos,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset as `manifest.toml` plus `features/` and
/// `annotations/` under `dir`. Returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<PathBuf> {
    ds.validate()?;
    let dir = dir.as_ref();
    let mut entries = Vec::with_capacity(ds.videos.len());
    for v in &ds.videos {
        let feat = PathBuf::from("features").join(format!("{}.vsft", v.id));
        write_features(dir.join(&feat), &v.features)?;
        let mut annotations = Vec::new();
        for (i, track) in v.annotations.iter().enumerate() {
            let p = PathBuf::from("annotations").join(format!("{}.{i}.{}.toml", v.id, track.format_name()));
            write_annotation(dir.join(&p), track)?;
            annotations.push(p);
        }
        entries.push(ManifestEntry {
            id: v.id.clone(),
            fps: v.fps,
            features: feat,
            annotations,
            source_dataset: v.source_dataset.clone(),
        });
    }
    let manifest = DatasetManifest {
        name: ds.name.clone(),
        feature_dim: ds.feature_dim,
        videos: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("manifest.toml");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
