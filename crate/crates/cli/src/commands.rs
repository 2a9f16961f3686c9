use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use vidsum::adapt::{apply_transform, default_ridge, fit_align, LinearTransform};
use vidsum::data::{
    generate_synthetic, prepare_video, read_annotation, save_checkpoint, segment_record, write_annotation,
    write_dataset, AnnotationTrack, CheckpointInfo, Dataset, ModelCheckpoint, PrepareOptions,
    SyntheticConfig,
};
use vidsum::eval::report::{
    experiment_epochs_csv, experiment_jsonl, experiment_text, summary_csv, summary_jsonl, summary_text,
};
use vidsum::eval::{eval_multi_user, run_experiment, ExperimentConfig, SplitSpec, TestSummary, VideoScore};
use vidsum::linalg::{covariance, Matrix};
use vidsum::models::{summary_budget, Model, ModelConfig, Summary, TrainOptions};
use vidsum::temporal::{
    keyframes_to, keyshots_to, scores_to, ImportanceCurve, Segmentation, DEFAULT_SEGMENT_LEN,
};

use crate::run::{load_at_rate, run_dir, write_json, write_options, write_text};
use crate::{AdaptArgs, ConvertArgs, EvalArgs, Format, SummarizeArgs, Switch, SynthArgs, TrainArgs};

/// What `summarize` writes per video and `eval` reads back.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub dataset: String,
    pub id: String,
    pub summary: Summary,
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        name: a.name.clone(),
        n_videos: a.videos,
        min_frames: a.min_frames,
        max_frames: a.max_frames,
        feature_dim: a.dim,
        n_clusters: a.clusters,
        teacher_hidden: a.teacher_hidden,
        noise_sigma: a.noise,
        domain_shift: a.domain_shift,
        seed: a.seed,
        video_seed: a.video_seed.unwrap_or(a.seed),
        fps: a.fps,
        ..SyntheticConfig::default()
    };
    let corpus = generate_synthetic(&cfg)?;
    let dir = run_dir("synth", a.seed, a.out.as_deref())?;
    let manifest = write_dataset(dir.join("corpus"), &corpus.dataset)?;
    save_checkpoint(
        dir.join("teacher.vsck"),
        &ModelCheckpoint {
            model: Model::VsLstm(corpus.teacher),
            info: CheckpointInfo {
                seed: a.seed,
                ..CheckpointInfo::default()
            },
        },
    )?;
    write_options(&dir, "synth", &cfg)?;
    println!("{}", manifest.display());
    Ok(())
}

fn load_all(manifests: &[PathBuf], fps: f64) -> Result<Vec<Dataset>> {
    let datasets: Vec<Dataset> = manifests
        .iter()
        .map(|m| load_at_rate(m, fps))
        .collect::<Result<_>>()?;
    for (i, d) in datasets.iter().enumerate() {
        if datasets[..i].iter().any(|e| e.name == d.name) {
            bail!("dataset name '{}' appears twice", d.name);
        }
    }
    Ok(datasets)
}

fn experiment_config(a: &TrainArgs) -> ExperimentConfig {
    let mut model = ModelConfig::new(a.model);
    if let Some(h) = a.hidden {
        model.hidden = h;
        model.mlp_hidden = h;
    }
    let mut train = TrainOptions {
        budget_fraction: a.budget,
        aggregation: a.agg,
        ..TrainOptions::default()
    };
    train.sgd.seed = a.seed;
    if let Some(e) = a.epochs {
        train.sgd.epochs_max = e;
    }
    if let Some(p) = a.patience {
        train.sgd.patience_k = p;
    }
    if let Some(lr) = a.lr {
        train.sgd.learning_rate = lr;
    }
    if let Some(m) = a.momentum {
        train.sgd.momentum = m;
    }
    ExperimentConfig {
        model,
        train,
        prepare: PrepareOptions {
            segment_len: a.segment_len.unwrap_or(DEFAULT_SEGMENT_LEN),
            budget_fraction: a.budget,
        },
        runs: a.runs,
        adapt: a.adapt == Switch::On,
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let datasets = load_all(&a.manifests, a.fps)?;
    let target = a.target.clone().unwrap_or_else(|| datasets[0].name.clone());
    ensure!(
        datasets.iter().any(|d| d.name == target),
        "target dataset '{target}' is not among the manifests"
    );
    let split = match &a.split {
        Some(p) => {
            let split = read_split(p)?;
            ensure!(
                split.target == target && split.setting == a.setting,
                "split {} is for {} on {}, not {} on {target}",
                p.display(),
                split.setting,
                split.target,
                a.setting
            );
            split
        }
        None => SplitSpec::generate(a.setting, &target, &datasets, a.seed)?,
    };
    let cfg = experiment_config(a);
    let report = run_experiment(&split, &datasets, &cfg)?;

    let dir = run_dir("train", a.seed, a.out.as_deref())?;
    write_options(&dir, "train", a)?;
    write_json(dir.join("split.json"), &split)?;
    write_json(dir.join("train_report.json"), &report)?;
    write_text(dir.join("report.txt"), &experiment_text(&report))?;
    write_text(dir.join("report.jsonl"), &experiment_jsonl(&report)?)?;
    write_text(dir.join("epochs.csv"), &experiment_epochs_csv(&report))?;
    std::fs::create_dir_all(dir.join("checkpoints"))?;
    let mut best: Option<(usize, f64)> = None;
    for run in &report.runs {
        let val_f = run.training.best_val_f();
        save_checkpoint(
            dir.join("checkpoints").join(format!("run-{}.vsck", run.run)),
            &ModelCheckpoint {
                model: run.model.clone(),
                info: CheckpointInfo {
                    epoch: run.training.best_epoch,
                    val_f,
                    seed: run.seed,
                },
            },
        )?;
        let v = val_f.unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((run.run, v));
        }
    }
    let (best_run, _) = best.ok_or_else(|| anyhow!("no runs completed"))?;
    std::fs::copy(
        dir.join("checkpoints").join(format!("run-{best_run}.vsck")),
        dir.join("model.vsck"),
    )?;
    if !report.transforms.is_empty() {
        std::fs::create_dir_all(dir.join("transforms"))?;
        for (name, t) in &report.transforms {
            t.save(dir.join("transforms").join(format!("{name}.json")))?;
        }
    }
    print!("{}", experiment_text(&report));
    println!("{}", dir.display());
    Ok(())
}

fn read_split(path: &Path) -> Result<SplitSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let split: SplitSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing split {}", path.display()))?;
    split.validate()?;
    Ok(split)
}

pub fn summarize(a: &SummarizeArgs) -> Result<()> {
    let ck = vidsum::data::load_checkpoint(&a.checkpoint)?;
    let ds = load_at_rate(&a.manifest, a.fps)?;
    let transform = a.transform.as_ref().map(LinearTransform::load).transpose()?;
    let ids: Vec<String> = match &a.split {
        Some(p) => read_split(p)?
            .test
            .into_iter()
            .filter(|r| r.dataset == ds.name)
            .map(|r| r.id)
            .collect(),
        None => ds.videos.iter().map(|v| v.id.clone()).collect(),
    };
    ensure!(!ids.is_empty(), "no videos of '{}' to summarize", ds.name);
    let segment_len = a.segment_len.unwrap_or(DEFAULT_SEGMENT_LEN);

    let dir = run_dir("summarize", a.seed, a.out.as_deref())?;
    let out = dir.join("summaries");
    std::fs::create_dir_all(&out)?;
    for id in &ids {
        let record = ds
            .video(id)
            .ok_or_else(|| anyhow!("video {id} not in dataset '{}'", ds.name))?;
        let seg = segment_record(record, segment_len)?;
        let x = match &transform {
            Some(t) => apply_transform(t, &record.features)?,
            None => record.features.clone(),
        };
        let summary = ck
            .model
            .summarize(&x, &seg, a.budget)
            .with_context(|| format!("summarizing {id}"))?;
        write_json(
            out.join(format!("{id}.json")),
            &SummaryFile {
                dataset: ds.name.clone(),
                id: id.clone(),
                summary,
            },
        )?;
    }
    write_options(&dir, "summarize", a)?;
    println!("{}", out.display());
    Ok(())
}

fn summary_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = if dir.join("summaries").is_dir() {
        dir.join("summaries")
    } else {
        dir.to_path_buf()
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    ensure!(!files.is_empty(), "no summaries in {}", dir.display());
    Ok(files)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let ds = load_at_rate(&a.manifest, a.fps)?;
    let prepare = PrepareOptions {
        segment_len: a.segment_len.unwrap_or(DEFAULT_SEGMENT_LEN),
        budget_fraction: a.budget,
    };
    let mut videos = Vec::new();
    for path in summary_files(&a.summaries)? {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: SummaryFile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        ensure!(
            file.dataset == ds.name,
            "{} belongs to dataset '{}', not '{}'",
            path.display(),
            file.dataset,
            ds.name
        );
        let record = ds
            .video(&file.id)
            .ok_or_else(|| anyhow!("video {} not in dataset '{}'", file.id, ds.name))?;
        let frames = record.frames();
        let s = &file.summary;
        ensure!(
            s.frames() == frames,
            "summary of {} covers {} frames, the video has {frames}",
            file.id,
            s.frames()
        );
        let allowed = summary_budget(a.budget, frames)?;
        ensure!(
            s.budget() <= allowed,
            "summary of {} claims a {}-frame budget, at most {allowed} allowed",
            file.id,
            s.budget()
        );
        let s = Summary::new(frames, s.budget(), s.keyshots().clone(), s.keyframes().clone())
            .with_context(|| format!("summary of {}", file.id))?;
        let v = prepare_video(record, &prepare)?;
        let report = eval_multi_user(s.keyshots(), &v.references, frames, a.agg)?;
        videos.push(VideoScore {
            dataset: file.dataset,
            id: file.id,
            report,
        });
    }
    let summary = TestSummary::from_scores(videos);
    let dir = run_dir("eval", a.seed, a.out.as_deref())?;
    write_options(&dir, "eval", a)?;
    let title = format!("{} summaries on {}", summary.videos.len(), ds.name);
    write_text(dir.join("eval.txt"), &summary_text(&title, &summary))?;
    write_text(dir.join("eval.csv"), &summary_csv(&summary))?;
    write_text(dir.join("eval.jsonl"), &summary_jsonl(&summary)?)?;
    print!("{}", summary_text(&title, &summary));
    Ok(())
}

fn frame_count(track: &AnnotationTrack, frames: Option<usize>) -> Result<usize> {
    match (track, frames) {
        (AnnotationTrack::Scores { scores }, Some(f)) => {
            ensure!(
                scores.len() == f,
                "--frames {f} but the input holds {} scores",
                scores.len()
            );
            Ok(f)
        }
        (AnnotationTrack::Scores { scores }, None) => Ok(scores.len()),
        (_, Some(f)) => Ok(f),
        (_, None) => bail!("--frames is required for {} input", track.format_name()),
    }
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    let track = read_annotation(&a.input)?;
    let frames = frame_count(&track, a.frames)?;
    track.validate(frames)?;
    let budget = match a.budget_frames {
        Some(b) => b,
        None => summary_budget(a.budget, frames)?,
    };
    let segmentation = || -> Result<Segmentation> {
        match (&a.boundaries, a.segment_len) {
            (Some(b), _) => Ok(Segmentation::new(b.clone(), frames)?),
            (None, Some(len)) => Ok(Segmentation::uniform(frames, len)?),
            (None, None) => bail!("--boundaries or --segment-len is required for this conversion"),
        }
    };
    let out = match (&track, a.to) {
        (AnnotationTrack::Keyframes { .. }, Format::Keyframes)
        | (AnnotationTrack::Keyshots { .. }, Format::Keyshots)
        | (AnnotationTrack::Scores { .. }, Format::Scores) => track.clone(),
        (AnnotationTrack::Keyframes { .. }, to) => {
            let k = track.keyframes(frames).unwrap()?;
            let (shots, curve) = keyframes_to(&k, &segmentation()?, budget)?;
            if to == Format::Keyshots {
                AnnotationTrack::from_keyshots(&shots)
            } else {
                AnnotationTrack::from_scores(&curve)
            }
        }
        (AnnotationTrack::Keyshots { .. }, to) => {
            let s = track.keyshots(frames).unwrap()?;
            let (k, curve) = keyshots_to(&s, frames)?;
            if to == Format::Keyframes {
                AnnotationTrack::from_keyframes(&k)
            } else {
                AnnotationTrack::from_scores(&curve)
            }
        }
        (AnnotationTrack::Scores { scores }, to) => {
            let curve = ImportanceCurve::new(scores.clone())?;
            let (shots, k) = scores_to(curve.as_slice(), &segmentation()?, budget)?;
            if to == Format::Keyshots {
                AnnotationTrack::from_keyshots(&shots)
            } else {
                AnnotationTrack::from_keyframes(&k)
            }
        }
    };
    write_annotation(&a.output, &out)?;
    Ok(())
}

fn stacked(ds: &Dataset) -> Result<Matrix> {
    ensure!(!ds.videos.is_empty(), "dataset '{}' has no videos", ds.name);
    let data: Vec<f64> = ds
        .videos
        .iter()
        .flat_map(|v| v.features.as_slice().iter().copied())
        .collect();
    Ok(Matrix::from_vec(
        data.len() / ds.feature_dim,
        ds.feature_dim,
        data,
    )?)
}

pub fn adapt(a: &AdaptArgs) -> Result<()> {
    let source = load_at_rate(&a.source, a.fps)?;
    let target = load_at_rate(&a.target, a.fps)?;
    ensure!(
        source.feature_dim == target.feature_dim,
        "feature dimensions differ: {} vs {}",
        source.feature_dim,
        target.feature_dim
    );
    let xs = stacked(&source)?;
    let xt = stacked(&target)?;
    let ridge = match a.ridge {
        Some(r) => r,
        None => default_ridge(&covariance(&xs)?),
    };
    let mut t = fit_align(&xs, &xt, ridge)?;
    t.fitted_on = vec![source.name.clone(), target.name.clone()];
    let dir = run_dir("adapt", a.seed, a.out.as_deref())?;
    t.save(dir.join("transform.json"))?;
    write_options(&dir, "adapt", a)?;
    println!("{}", dir.join("transform.json").display());
    Ok(())
}
