use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sgd_update, GradientBundle, ParamSet, SgdConfig, SgdState};
use crate::dpp::SubsetIndex;
use crate::error::{Error, Result};
use crate::eval::metrics::{eval_multi_user, Aggregation};
use crate::linalg::Matrix;
use crate::temporal::{ImportanceCurve, KeyframeSet, Keyshots, Segmentation, DEFAULT_BUDGET_FRACTION};

use super::nets::Model;
use super::summary::{summarize_scores, Summary};

/// One video prepared for training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingVideo {
    pub id: String,
    pub features: Matrix,
    pub seg: Segmentation,
    /// Frame-level regression target.
    pub target: ImportanceCurve,
    /// Target subset for likelihood training.
    pub keyframes: KeyframeSet,
    /// Reference summaries for F-score evaluation.
    pub references: Vec<Keyshots>,
}

impl TrainingVideo {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    /// F-score of `summary` against the references.
    pub fn score(&self, summary: &Summary, agg: Aggregation) -> Result<f64> {
        Ok(eval_multi_user(summary.keyshots(), &self.references, self.frames(), agg)?.f_score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub sgd: SgdConfig,
    pub budget_fraction: f64,
    pub aggregation: Aggregation,
    /// Second-stage learning rate as a multiple of `sgd.learning_rate`.
    pub stage2_lr_scale: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            aggregation: Aggregation::Mean,
            stage2_lr_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Mean training loss over the full training set after each epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation F after each epoch.
    pub val_f: Vec<f64>,
    pub stopped_epoch: usize,
    /// 1-based epoch of the best checkpoint; 0 when no epoch ran.
    pub best_epoch: usize,
    #[serde(skip)]
    pub best_checkpoint: Model,
    /// Report of the pre-training stage of two-stage models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<Box<TrainReport>>,
}

impl TrainReport {
    pub fn best_val_f(&self) -> Option<f64> {
        self.best_epoch.checked_sub(1).map(|e| self.val_f[e])
    }
}

struct Stage<G, L, S> {
    lr: f64,
    seed: u64,
    grad: G,
    loss: L,
    summarize: S,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Epoch loop shared by every model: one shuffled video per step, full-set
/// loss and validation F after each epoch, stop once validation F has
/// fallen `patience_k` epochs in a row (`patience_k = 0` disables this).
fn run_stage<M, G, L, S>(
    init: M,
    train: &[TrainingVideo],
    val: &[TrainingVideo],
    opts: &TrainOptions,
    stage: Stage<G, L, S>,
    wrap: impl Fn(M) -> Model,
) -> Result<(M, TrainReport)>
where
    M: ParamSet + Clone + Sync,
    G: Fn(&M, usize) -> Result<(f64, GradientBundle)>,
    L: Fn(&M, usize) -> Result<f64> + Sync,
    S: Fn(&M, &TrainingVideo) -> Result<Summary> + Sync,
{
    let cfg = SgdConfig {
        learning_rate: stage.lr,
        ..opts.sgd.clone()
    };
    cfg.validate()?;
    let mut model = init;
    let mut best = model.clone();
    let mut state = SgdState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(stage.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut train_loss = Vec::new();
    let mut val_f = Vec::new();
    let mut best_epoch = 0;
    let mut falling = 0;

    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grads) = (stage.grad)(&model, i).map_err(|e| annotate(e, &train[i].id))?;
            sgd_update(&mut model, &grads, &mut state, &cfg)?;
        }
        let losses: Vec<f64> = (0..train.len())
            .into_par_iter()
            .map(|i| (stage.loss)(&model, i))
            .collect::<Result<_>>()?;
        let scores: Vec<f64> = val
            .par_iter()
            .map(|v| v.score(&(stage.summarize)(&model, v)?, opts.aggregation))
            .collect::<Result<_>>()?;
        let f = mean(&scores);
        train_loss.push(mean(&losses));

        if val_f.last().is_some_and(|&prev| f < prev) {
            falling += 1;
        } else {
            falling = 0;
        }
        if best_epoch == 0 || f > val_f[best_epoch - 1] {
            best_epoch = epoch;
            best = model.clone();
        }
        val_f.push(f);
        if cfg.patience_k > 0 && falling >= cfg.patience_k {
            break;
        }
    }

    let report = TrainReport {
        stopped_epoch: val_f.len(),
        train_loss,
        val_f,
        best_epoch,
        best_checkpoint: wrap(best.clone()),
        stage1: None,
    };
    Ok((best, report))
}

fn annotate(e: Error, id: &str) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("video {id}: {m}")),
        Error::InvalidTarget(m) => Error::InvalidTarget(format!("video {id}: {m}")),
        other => other,
    }
}

fn check_sets(train: &[TrainingVideo], val: &[TrainingVideo]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::InsufficientData("no training videos".into()));
    }
    if val.is_empty() {
        return Err(Error::InsufficientData("no validation videos".into()));
    }
    Ok(())
}

fn subset(v: &TrainingVideo) -> Result<SubsetIndex> {
    if v.keyframes.is_empty() {
        return Err(Error::InvalidTarget(format!("video {} has no keyframes", v.id)));
    }
    SubsetIndex::new(v.keyframes.as_slice().to_vec())
}

/// Trains `model` on `train`, early-stopping on validation F, and returns
/// the best checkpoint with its report. Two-stage models run square-loss
/// pre-training of the importance path first, then likelihood training of
/// all parameters at a reduced rate.
pub fn train_model(
    model: Model,
    train: &[TrainingVideo],
    val: &[TrainingVideo],
    opts: &TrainOptions,
) -> Result<(Model, TrainReport)> {
    check_sets(train, val)?;
    let bf = opts.budget_fraction;
    let lr = opts.sgd.learning_rate;
    let seed = opts.sgd.seed;
    match model {
        Model::VsLstm(m) => {
            let stage = Stage {
                lr,
                seed,
                grad: |m: &super::VsLstmModel, i: usize| {
                    m.square_loss_grad(&train[i].features, train[i].target.as_slice())
                },
                loss: |m: &super::VsLstmModel, i: usize| {
                    m.square_loss(&train[i].features, train[i].target.as_slice())
                },
                summarize: |m: &super::VsLstmModel, v: &TrainingVideo| {
                    summarize_scores(m.predict(&v.features)?.as_slice(), &v.seg, bf)
                },
            };
            let (best, report) = run_stage(m, train, val, opts, stage, Model::VsLstm)?;
            Ok((Model::VsLstm(best), report))
        }
        Model::Mlp(m) => {
            let stage = Stage {
                lr,
                seed,
                grad: |m: &super::MlpBaseline, i: usize| {
                    let v = &train[i];
                    m.square_loss_grad(&v.features, &v.seg, v.target.as_slice())
                },
                loss: |m: &super::MlpBaseline, i: usize| {
                    let v = &train[i];
                    m.square_loss(&v.features, &v.seg, v.target.as_slice())
                },
                summarize: |m: &super::MlpBaseline, v: &TrainingVideo| {
                    summarize_scores(&m.frame_scores(&v.features, &v.seg)?, &v.seg, bf)
                },
            };
            let (best, report) = run_stage(m, train, val, opts, stage, Model::Mlp)?;
            Ok((Model::Mlp(best), report))
        }
        Model::DppLstm(m) => {
            let targets = train.iter().map(subset).collect::<Result<Vec<_>>>()?;
            let pre = Stage {
                lr,
                seed,
                grad: |m: &super::DppLstmModel, i: usize| {
                    m.square_loss_grad(&train[i].features, train[i].target.as_slice())
                },
                loss: |m: &super::DppLstmModel, i: usize| {
                    m.square_loss(&train[i].features, train[i].target.as_slice())
                },
                summarize: |m: &super::DppLstmModel, v: &TrainingVideo| {
                    summarize_scores(m.predict(&v.features)?.as_slice(), &v.seg, bf)
                },
            };
            let (pretrained, stage1) = run_stage(m, train, val, opts, pre, Model::DppLstm)?;
            let (best, mut report) =
                dpp_stage(pretrained, train, val, &targets, opts, lr * opts.stage2_lr_scale)?;
            report.stage1 = Some(Box::new(stage1));
            Ok((Model::DppLstm(best), report))
        }
        Model::DppLstmSingle(m) => {
            let targets = train.iter().map(subset).collect::<Result<Vec<_>>>()?;
            let stage = Stage {
                lr,
                seed,
                grad: |m: &super::DppLstmSingle, i: usize| m.nll_grad(&train[i].features, &targets[i]),
                loss: |m: &super::DppLstmSingle, i: usize| m.nll(&train[i].features, &targets[i]),
                summarize: |m: &super::DppLstmSingle, v: &TrainingVideo| {
                    Model::DppLstmSingle(m.clone()).summarize(&v.features, &v.seg, bf)
                },
            };
            let (best, report) = run_stage(m, train, val, opts, stage, Model::DppLstmSingle)?;
            Ok((Model::DppLstmSingle(best), report))
        }
    }
}

/// Likelihood stage of the two-stage model, starting from `model`.
pub fn dpp_stage(
    model: super::DppLstmModel,
    train: &[TrainingVideo],
    val: &[TrainingVideo],
    targets: &[SubsetIndex],
    opts: &TrainOptions,
    lr: f64,
) -> Result<(super::DppLstmModel, TrainReport)> {
    check_sets(train, val)?;
    if targets.len() != train.len() {
        return Err(Error::contract("one target subset per training video required"));
    }
    let bf = opts.budget_fraction;
    let stage = Stage {
        lr,
        seed: opts.sgd.seed.wrapping_add(1),
        grad: |m: &super::DppLstmModel, i: usize| m.nll_grad(&train[i].features, &targets[i]),
        loss: |m: &super::DppLstmModel, i: usize| m.nll(&train[i].features, &targets[i]),
        summarize: |m: &super::DppLstmModel, v: &TrainingVideo| {
            let (y, phi) = m.heads(&v.features)?;
            let kernel = super::nets::quality_diversity_kernel(&y, &phi)?;
            super::summary::summarize_dpp(&kernel, &y, &v.seg, bf)
        },
    };
    run_stage(model, train, val, opts, stage, Model::DppLstm)
}
