use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};
use crate::models::{ModelConfig, ModelKind, VsLstmModel};
use crate::temporal::{
    budget_frames, scores_to, ImportanceCurve, DEFAULT_BUDGET_FRACTION, DEFAULT_SEGMENT_LEN,
};

use super::prepare::segment_record;
use super::records::{AnnotationTrack, Dataset, VideoRecord};

const MIN_SEGMENT: usize = 5;
const MAX_SEGMENT: usize = 20;
const SHIFT_STREAM: u64 = 0x5348_4946_5400_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub name: String,
    pub n_videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub feature_dim: usize,
    pub n_clusters: usize,
    pub teacher_hidden: usize,
    /// Weight scale of the teacher; larger values give sharper curves.
    pub teacher_init_scale: f64,
    pub noise_sigma: f64,
    /// Strength of a fixed random linear distortion applied to the
    /// features after labelling; 0 leaves them untouched.
    pub domain_shift: f64,
    /// Seeds the teacher and the cluster centroids.
    pub seed: u64,
    /// Seeds video lengths, segment layout, noise and the distortion.
    pub video_seed: u64,
    pub fps: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_videos: 50,
            min_frames: 60,
            max_frames: 200,
            feature_dim: 16,
            n_clusters: 8,
            teacher_hidden: 16,
            teacher_init_scale: 1.0,
            noise_sigma: 0.1,
            domain_shift: 0.0,
            seed: 0,
            video_seed: 0,
            fps: 2.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_videos", self.n_videos),
            ("min_frames", self.min_frames),
            ("feature_dim", self.feature_dim),
            ("n_clusters", self.n_clusters),
            ("teacher_hidden", self.teacher_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        if self.max_frames < self.min_frames {
            return Err(Error::Config("max_frames < min_frames".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.domain_shift >= 0.0) {
            return Err(Error::Config("noise_sigma and domain_shift must be >= 0".into()));
        }
        if !(self.fps > 0.0) || !(self.teacher_init_scale >= 0.0) {
            return Err(Error::Config("fps must be > 0 and teacher scale >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub teacher: VsLstmModel,
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize, sigma: f64) -> Matrix {
    let dist = Normal::new(0.0, sigma).expect("sigma >= 0");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect()).expect("sized")
}

/// Builds the teacher that labels every corpus generated with `cfg.seed`.
pub fn synthetic_teacher(cfg: &SyntheticConfig) -> (VsLstmModel, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model_cfg = ModelConfig {
        hidden: cfg.teacher_hidden,
        mlp_hidden: cfg.teacher_hidden,
        init_scale: cfg.teacher_init_scale,
        ..ModelConfig::new(ModelKind::VsLstm)
    };
    let teacher = VsLstmModel::new(cfg.feature_dim, &model_cfg, &mut rng);
    let centroids = normal_matrix(&mut rng, cfg.n_clusters, cfg.feature_dim, 1.0);
    (teacher, centroids)
}

fn rescale(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 0.0 {
        raw.iter()
            .map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.5; raw.len()]
    }
}

/// Piecewise-constant cluster features labelled by a frozen random
/// vsLSTM. Each video carries three tracks: the teacher curve rescaled to
/// `[0, 1]`, and the keyshots and keyframes derived from it at the
/// default budget.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let (teacher, centroids) = synthetic_teacher(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.video_seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma >= 0");
    let d = cfg.feature_dim;
    let distortion = if cfg.domain_shift > 0.0 {
        let mut shift_rng = ChaCha8Rng::seed_from_u64(cfg.video_seed ^ SHIFT_STREAM);
        let r = normal_matrix(&mut shift_rng, d, d, cfg.domain_shift / (d as f64).sqrt());
        Some(Matrix::identity(d).add(&r)?)
    } else {
        None
    };

    let mut videos = Vec::with_capacity(cfg.n_videos);
    for i in 0..cfg.n_videos {
        let t_len = rng.random_range(cfg.min_frames..=cfg.max_frames);
        let mut data = Vec::with_capacity(t_len * d);
        let mut t = 0;
        while t < t_len {
            let len = rng.random_range(MIN_SEGMENT..=MAX_SEGMENT).min(t_len - t);
            let c = rng.random_range(0..cfg.n_clusters);
            for _ in 0..len {
                data.extend(centroids.row(c).iter().map(|v| v + noise.sample(&mut rng)));
            }
            t += len;
        }
        let clean = Matrix::from_vec(t_len, d, data)?;
        let curve = ImportanceCurve::new(rescale(teacher.predict(&clean)?.as_slice()))?;
        let features = match &distortion {
            Some(a) => matmul(&clean, a)?,
            None => clean,
        };
        let mut record = VideoRecord {
            id: format!("{}-{i:03}", cfg.name),
            fps: cfg.fps,
            features,
            annotations: Vec::new(),
            source_dataset: cfg.name.clone(),
        };
        let seg = segment_record(&record, DEFAULT_SEGMENT_LEN)?;
        let budget = budget_frames(DEFAULT_BUDGET_FRACTION, t_len);
        let (shots, keyframes) = scores_to(curve.as_slice(), &seg, budget)?;
        record.annotations = vec![
            AnnotationTrack::from_scores(&curve),
            AnnotationTrack::from_keyshots(&shots),
            AnnotationTrack::from_keyframes(&keyframes),
        ];
        record.validate()?;
        videos.push(record);
    }
    Ok(SyntheticCorpus {
        dataset: Dataset {
            name: cfg.name.clone(),
            feature_dim: d,
            videos,
        },
        teacher,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_videos: 4,
            min_frames: 30,
            max_frames: 60,
            feature_dim: 4,
            n_clusters: 3,
            teacher_hidden: 4,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticConfig {
            video_seed: 1,
            ..small()
        })
        .unwrap();
        assert_ne!(a.dataset, c.dataset);
        assert_eq!(a.teacher, c.teacher);
    }

    #[test]
    fn annotations_are_self_consistent() {
        let corpus = generate_synthetic(&small()).unwrap();
        for v in &corpus.dataset.videos {
            let t = v.frames();
            assert!((30..=60).contains(&t));
            let curve = v.annotations[0].scores(t).unwrap().unwrap();
            let shots = v.annotations[1].keyshots(t).unwrap().unwrap();
            let kf = v.annotations[2].keyframes(t).unwrap().unwrap();
            let seg = segment_record(v, DEFAULT_SEGMENT_LEN).unwrap();
            let (s2, k2) = scores_to(curve.as_slice(), &seg, budget_frames(0.15, t)).unwrap();
            assert_eq!((s2, k2), (shots.clone(), kf));
            assert!(shots.duration() <= budget_frames(0.15, t));
            let lo = curve.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = curve.as_slice().iter().cloned().fold(0.0, f64::max);
            assert_eq!((lo, hi), (0.0, 1.0));
        }
    }

    #[test]
    fn constant_corpus() {
        let cfg = SyntheticConfig {
            noise_sigma: 0.0,
            n_clusters: 1,
            ..small()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        for v in &corpus.dataset.videos {
            let first = v.features.row(0).to_vec();
            assert!((0..v.frames()).all(|t| v.features.row(t) == first.as_slice()));
            assert_eq!(segment_record(v, DEFAULT_SEGMENT_LEN).unwrap().len(), 1);
        }
    }

    #[test]
    fn domain_shift_changes_features_only() {
        let base = generate_synthetic(&small()).unwrap();
        let shifted = generate_synthetic(&SyntheticConfig {
            domain_shift: 0.8,
            ..small()
        })
        .unwrap();
        for (a, b) in base.dataset.videos.iter().zip(&shifted.dataset.videos) {
            assert_eq!(a.frames(), b.frames());
            assert_eq!(a.annotations[0], b.annotations[0]);
            assert_ne!(a.features, b.features);
        }
    }
}
