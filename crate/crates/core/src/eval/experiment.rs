use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{apply_transform, default_ridge, fit_align, LinearTransform};
use crate::data::{prepare_video, Dataset, PrepareOptions, VideoRecord};
use crate::error::{Error, Result};
use crate::linalg::{covariance, Matrix};
use crate::models::{
    summarize_scores, train_model, Model, ModelConfig, TrainOptions, TrainReport, TrainingVideo,
};

use super::metrics::{eval_multi_user, EvalReport};
use super::split::{Setting, SplitSpec, VideoRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainOptions,
    pub prepare: PrepareOptions,
    /// Independent training runs; run `r` uses seed `train.sgd.seed + r`.
    pub runs: usize,
    /// Align auxiliary datasets to the target before training.
    pub adapt: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainOptions::default(),
            prepare: PrepareOptions::default(),
            runs: 5,
            adapt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub dataset: String,
    pub id: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Mean precision, recall and F over a set of test videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub videos: Vec<VideoScore>,
}

impl TestSummary {
    /// Means over the per-video scores.
    pub fn from_scores(videos: Vec<VideoScore>) -> Self {
        let n = videos.len().max(1) as f64;
        let mean = |f: fn(&EvalReport) -> f64| videos.iter().map(|v| f(&v.report)).sum::<f64>() / n;
        Self {
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f_score: mean(|r| r.f_score),
            videos,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub test: TestSummary,
    pub training: TrainReport,
    #[serde(skip)]
    pub model: Model,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub split: SplitSpec,
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    /// Mean test F over runs.
    pub mean_f: f64,
    /// Sample standard deviation of test F over runs (0 for one run).
    pub std_f: f64,
    /// Uniform random scores through the same summarizer.
    pub random_baseline: TestSummary,
    /// One transform per auxiliary dataset when adaptation is on.
    pub transforms: BTreeMap<String, LinearTransform>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn lookup<'a>(datasets: &'a [Dataset], r: &VideoRef) -> Result<&'a VideoRecord> {
    datasets
        .iter()
        .find(|d| d.name == r.dataset)
        .and_then(|d| d.video(&r.id))
        .ok_or_else(|| Error::Config(format!("split refers to unknown video {}/{}", r.dataset, r.id)))
}

fn stack(records: &[&VideoRecord]) -> Result<Matrix> {
    let d = records[0].features.cols();
    let data: Vec<f64> = records
        .iter()
        .flat_map(|r| r.features.as_slice().iter().copied())
        .collect();
    Matrix::from_vec(data.len() / d.max(1), d, data)
}

/// Fits one transform per auxiliary dataset in the training pool, mapping
/// its features onto the covariance of the target's training videos.
pub fn fit_transforms(split: &SplitSpec, datasets: &[Dataset]) -> Result<BTreeMap<String, LinearTransform>> {
    let fitting: Vec<&VideoRef> = split.train.iter().chain(&split.val).collect();
    let mut anchor: Vec<&VideoRecord> = fitting
        .iter()
        .filter(|r| r.dataset == split.target)
        .map(|r| lookup(datasets, r))
        .collect::<Result<_>>()?;
    if anchor.is_empty() {
        // Transfer: only the unlabeled test features are available.
        anchor = split
            .test
            .iter()
            .map(|r| lookup(datasets, r))
            .collect::<Result<_>>()?;
    }
    let target = stack(&anchor)?;
    let mut out = BTreeMap::new();
    let aux: Vec<&str> = {
        let mut names: Vec<&str> = fitting
            .iter()
            .map(|r| r.dataset.as_str())
            .filter(|n| *n != split.target)
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    };
    for name in aux {
        let records: Vec<&VideoRecord> = fitting
            .iter()
            .filter(|r| r.dataset == name)
            .map(|r| lookup(datasets, r))
            .collect::<Result<_>>()?;
        let source = stack(&records)?;
        let mut t = fit_align(&source, &target, default_ridge(&covariance(&source)?))?;
        t.fitted_on = vec![name.to_string(), split.target.clone()];
        out.insert(name.to_string(), t);
    }
    Ok(out)
}

fn prepare_refs(
    refs: &[VideoRef],
    datasets: &[Dataset],
    transforms: &BTreeMap<String, LinearTransform>,
    opts: &PrepareOptions,
) -> Result<Vec<TrainingVideo>> {
    refs.par_iter()
        .map(|r| {
            let record = lookup(datasets, r)?;
            let mut v = prepare_video(record, opts)?;
            if let Some(t) = transforms.get(&r.dataset) {
                v.features = apply_transform(t, &v.features)?;
            }
            Ok(v)
        })
        .collect()
}

fn score_videos(
    refs: &[VideoRef],
    videos: &[TrainingVideo],
    opts: &TrainOptions,
    scores: impl Fn(usize, &TrainingVideo) -> Result<crate::models::Summary> + Sync,
) -> Result<TestSummary> {
    let per: Vec<VideoScore> = videos
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let summary = scores(i, v)?;
            let report = eval_multi_user(summary.keyshots(), &v.references, v.frames(), opts.aggregation)?;
            Ok(VideoScore {
                dataset: refs[i].dataset.clone(),
                id: refs[i].id.clone(),
                report,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TestSummary::from_scores(per))
}

/// Mean test scores of `model` over prepared videos.
pub fn evaluate_model(
    model: &Model,
    refs: &[VideoRef],
    videos: &[TrainingVideo],
    opts: &TrainOptions,
) -> Result<TestSummary> {
    score_videos(refs, videos, opts, |_, v| {
        model.summarize(&v.features, &v.seg, opts.budget_fraction)
    })
}

/// Scores drawn uniformly from `[0, 1)`, one seeded stream per video.
pub fn random_baseline(
    refs: &[VideoRef],
    videos: &[TrainingVideo],
    opts: &TrainOptions,
    seed: u64,
) -> Result<TestSummary> {
    score_videos(refs, videos, opts, |i, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let scores: Vec<f64> = (0..v.frames()).map(|_| rng.random::<f64>()).collect();
        summarize_scores(&scores, &v.seg, opts.budget_fraction)
    })
}

/// Trains `cfg.runs` models on the split and reports test F as mean and
/// sample standard deviation across runs.
pub fn run_experiment(
    split: &SplitSpec,
    datasets: &[Dataset],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    split.validate()?;
    cfg.model.validate()?;
    if cfg.runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    let feature_dim = datasets
        .iter()
        .find(|d| d.name == split.target)
        .map(|d| d.feature_dim)
        .ok_or_else(|| Error::Config(format!("target dataset '{}' not loaded", split.target)))?;
    let transforms = if cfg.adapt && split.setting != Setting::Canonical {
        fit_transforms(split, datasets)?
    } else {
        BTreeMap::new()
    };
    let train = prepare_refs(&split.train, datasets, &transforms, &cfg.prepare)?;
    let val = prepare_refs(&split.val, datasets, &transforms, &cfg.prepare)?;
    let test = prepare_refs(&split.test, datasets, &transforms, &cfg.prepare)?;

    let mut runs = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let seed = cfg.train.sgd.seed.wrapping_add(run as u64);
        let mut opts = cfg.train.clone();
        opts.sgd.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = Model::init(feature_dim, &cfg.model, &mut rng)?;
        let (model, training) = train_model(init, &train, &val, &opts)?;
        let summary = evaluate_model(&model, &split.test, &test, &opts)?;
        runs.push(RunResult {
            run,
            seed,
            test: summary,
            training,
            model,
        });
    }
    let fs: Vec<f64> = runs.iter().map(|r| r.test.f_score).collect();
    let (mean_f, std_f) = mean_std(&fs);
    let random_baseline = random_baseline(&split.test, &test, &cfg.train, split.seed)?;
    Ok(ExperimentReport {
        split: split.clone(),
        config: cfg.clone(),
        runs,
        mean_f,
        std_f,
        random_baseline,
        transforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::SgdConfig;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::models::ModelKind;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn tiny(name: &str, n: usize, shift: f64) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            name: name.into(),
            n_videos: n,
            min_frames: 30,
            max_frames: 40,
            feature_dim: 4,
            teacher_hidden: 4,
            domain_shift: shift,
            video_seed: n as u64,
            ..SyntheticConfig::default()
        })
        .unwrap()
        .dataset
    }

    fn quick(kind: ModelKind) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelConfig {
                hidden: 4,
                mlp_hidden: 4,
                embed_dim: 4,
                ..ModelConfig::new(kind)
            },
            train: TrainOptions {
                sgd: SgdConfig {
                    epochs_max: 2,
                    ..SgdConfig::default()
                },
                ..TrainOptions::default()
            },
            runs: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn runs_every_kind_deterministically() {
        let ds = vec![tiny("a", 10, 0.0)];
        let split = SplitSpec::generate(Setting::Canonical, "a", &ds, 0).unwrap();
        for kind in ModelKind::ALL {
            let a = run_experiment(&split, &ds, &quick(kind)).unwrap();
            let b = run_experiment(&split, &ds, &quick(kind)).unwrap();
            assert_eq!(a.runs.len(), 2);
            assert_eq!(a.runs[0].test, b.runs[0].test, "{kind}");
            assert_eq!((a.mean_f, a.std_f), (b.mean_f, b.std_f));
            assert!((0.0..=100.0).contains(&a.mean_f));
        }
    }

    #[test]
    fn adaptation_fits_one_transform_per_auxiliary_dataset() {
        let ds = vec![tiny("a", 10, 0.0), tiny("b", 6, 0.7), tiny("c", 5, 0.3)];
        let split = SplitSpec::generate(Setting::Augmented, "a", &ds, 0).unwrap();
        let cfg = ExperimentConfig {
            adapt: true,
            runs: 1,
            ..quick(ModelKind::VsLstm)
        };
        let r = run_experiment(&split, &ds, &cfg).unwrap();
        assert_eq!(r.transforms.keys().collect::<Vec<_>>(), ["b", "c"]);
        assert_eq!(r.transforms["b"].fitted_on, ["b", "a"]);
        let canon = SplitSpec::generate(Setting::Canonical, "a", &ds, 0).unwrap();
        assert!(run_experiment(&canon, &ds, &cfg).unwrap().transforms.is_empty());
    }

    #[test]
    fn missing_annotations_are_a_configuration_error() {
        let mut ds = vec![tiny("a", 6, 0.0)];
        let split = SplitSpec::generate(Setting::Canonical, "a", &ds, 0).unwrap();
        let victim = split.train[0].id.clone();
        ds[0]
            .videos
            .iter_mut()
            .find(|v| v.id == victim)
            .unwrap()
            .annotations
            .clear();
        let err = run_experiment(&split, &ds, &quick(ModelKind::VsLstm)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
