//! Plain-text, line-delimited JSON and CSV renderings of evaluation results.

use std::fmt::Write;

use serde_json::json;

use crate::error::{Error, Result};
use crate::models::TrainReport;

use super::experiment::{ExperimentReport, TestSummary};

pub fn summary_text(title: &str, s: &TestSummary) -> String {
    let mut out = String::new();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "videos     {}", s.videos.len()).unwrap();
    writeln!(out, "precision  {:.4}", s.precision).unwrap();
    writeln!(out, "recall     {:.4}", s.recall).unwrap();
    writeln!(out, "F-score    {:.2}", s.f_score).unwrap();
    for v in &s.videos {
        writeln!(
            out,
            "  {}/{}  P {:.4}  R {:.4}  F {:.2}",
            v.dataset, v.id, v.report.precision, v.report.recall, v.report.f_score
        )
        .unwrap();
    }
    out
}

/// `dataset,id,precision,recall,f_score`, one row per video.
pub fn summary_csv(s: &TestSummary) -> String {
    let mut out = String::from("dataset,id,precision,recall,f_score\n");
    for v in &s.videos {
        writeln!(
            out,
            "{},{},{},{},{}",
            v.dataset, v.id, v.report.precision, v.report.recall, v.report.f_score
        )
        .unwrap();
    }
    out
}

fn push_epochs(out: &mut String, run: usize, stage: &str, r: &TrainReport) {
    for (e, (loss, f)) in r.train_loss.iter().zip(&r.val_f).enumerate() {
        writeln!(out, "{run},{stage},{},{loss},{f}", e + 1).unwrap();
    }
}

/// Per-epoch training loss and validation F: `run,stage,epoch,train_loss,val_f`.
pub fn training_csv(reports: &[(usize, &TrainReport)]) -> String {
    let mut out = String::from("run,stage,epoch,train_loss,val_f\n");
    for (run, r) in reports {
        if let Some(pre) = &r.stage1 {
            push_epochs(&mut out, *run, "1", pre);
            push_epochs(&mut out, *run, "2", r);
        } else {
            push_epochs(&mut out, *run, "1", r);
        }
    }
    out
}

pub fn experiment_epochs_csv(r: &ExperimentReport) -> String {
    training_csv(
        &r.runs
            .iter()
            .map(|run| (run.run, &run.training))
            .collect::<Vec<_>>(),
    )
}

pub fn experiment_text(r: &ExperimentReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{} {} on {} (seed {})",
        r.config.model.kind, r.split.setting, r.split.target, r.split.seed
    )
    .unwrap();
    writeln!(
        out,
        "train {}  val {}  test {}",
        r.split.train.len(),
        r.split.val.len(),
        r.split.test.len()
    )
    .unwrap();
    for run in &r.runs {
        writeln!(
            out,
            "run {}  seed {}  best epoch {}  test F {:.2}",
            run.run, run.seed, run.training.best_epoch, run.test.f_score
        )
        .unwrap();
    }
    writeln!(
        out,
        "test F {:.2} +- {:.2} over {} runs",
        r.mean_f,
        r.std_f,
        r.runs.len()
    )
    .unwrap();
    writeln!(out, "random-score baseline F {:.2}", r.random_baseline.f_score).unwrap();
    for (name, t) in &r.transforms {
        writeln!(out, "aligned {name} to {} (ridge {:e})", r.split.target, t.ridge).unwrap();
    }
    out
}

/// One JSON object per line: per-video scores, per-run summaries, then
/// the aggregate.
pub fn experiment_jsonl(r: &ExperimentReport) -> Result<String> {
    let mut lines = Vec::new();
    for run in &r.runs {
        for v in &run.test.videos {
            lines.push(json!({
                "record": "video",
                "run": run.run,
                "dataset": v.dataset,
                "id": v.id,
                "precision": v.report.precision,
                "recall": v.report.recall,
                "f_score": v.report.f_score,
            }));
        }
        lines.push(json!({
            "record": "run",
            "run": run.run,
            "seed": run.seed,
            "best_epoch": run.training.best_epoch,
            "stopped_epoch": run.training.stopped_epoch,
            "precision": run.test.precision,
            "recall": run.test.recall,
            "f_score": run.test.f_score,
        }));
    }
    lines.push(json!({
        "record": "aggregate",
        "model": r.config.model.kind,
        "setting": r.split.setting,
        "target": r.split.target,
        "runs": r.runs.len(),
        "mean_f": r.mean_f,
        "std_f": r.std_f,
        "random_f": r.random_baseline.f_score,
    }));
    to_lines(lines)
}

/// Per-video records followed by one aggregate record.
pub fn summary_jsonl(s: &TestSummary) -> Result<String> {
    let mut lines: Vec<serde_json::Value> = s
        .videos
        .iter()
        .map(|v| {
            json!({
                "record": "video",
                "dataset": v.dataset,
                "id": v.id,
                "precision": v.report.precision,
                "recall": v.report.recall,
                "f_score": v.report.f_score,
            })
        })
        .collect();
    lines.push(json!({
        "record": "aggregate",
        "videos": s.videos.len(),
        "precision": s.precision,
        "recall": s.recall,
        "f_score": s.f_score,
    }));
    to_lines(lines)
}

fn to_lines(lines: Vec<serde_json::Value>) -> Result<String> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(&l).map_err(|e| Error::Config(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{EvalReport, VideoScore};

    fn summary() -> TestSummary {
        TestSummary {
            precision: 0.5,
            recall: 0.25,
            f_score: 100.0 / 3.0,
            videos: vec![VideoScore {
                dataset: "d".into(),
                id: "v1".into(),
                report: EvalReport {
                    precision: 0.5,
                    recall: 0.25,
                    f_score: 100.0 / 3.0,
                    per_user: Vec::new(),
                },
            }],
        }
    }

    #[test]
    fn csv_rows() {
        let csv = summary_csv(&summary());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("d,v1,0.5,0.25,33.3"));
        assert!(summary_text("t", &summary()).contains("F-score    33.33"));
        let jl = summary_jsonl(&summary()).unwrap();
        assert_eq!(jl.lines().count(), 2);
        assert!(jl.lines().last().unwrap().contains("\"record\":\"aggregate\""));
    }
}
