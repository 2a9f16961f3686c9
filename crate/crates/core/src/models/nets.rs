use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::layers::INIT_SCALE;
use crate::autodiff::params::prefixed;
use crate::autodiff::{
    backprop, bilstm_forward, Activation, BiLstmParams, BiLstmVars, GradientBundle, Mlp, ParamSet, Tape, Var,
};
use crate::dpp::{DppKernel, SubsetIndex};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, DEFAULT_JITTER};
use crate::temporal::{interval_means, ImportanceCurve, Segmentation};

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "vslstm")]
    VsLstm,
    #[serde(rename = "dpplstm")]
    DppLstm,
    #[serde(rename = "dpplstm-single")]
    DppLstmSingle,
    #[serde(rename = "mlp-shot")]
    MlpShot,
    #[serde(rename = "mlp-frame")]
    MlpFrame,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::VsLstm,
        ModelKind::DppLstm,
        ModelKind::DppLstmSingle,
        ModelKind::MlpShot,
        ModelKind::MlpFrame,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::VsLstm => "vslstm",
            ModelKind::DppLstm => "dpplstm",
            ModelKind::DppLstmSingle => "dpplstm-single",
            ModelKind::MlpShot => "mlp-shot",
            ModelKind::MlpFrame => "mlp-frame",
        }
    }

    /// Whether training consumes keyframe subsets.
    pub fn needs_keyframes(self) -> bool {
        matches!(self, ModelKind::DppLstm | ModelKind::DppLstmSingle)
    }

    /// Whether training consumes frame-level importance targets.
    pub fn needs_scores(self) -> bool {
        !matches!(self, ModelKind::DppLstmSingle)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// Architecture sizes. The feature dimension comes from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub embed_dim: usize,
    /// Frame window of the MLP-Frame baseline.
    pub window_k: usize,
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::VsLstm,
            hidden: DEFAULT_HIDDEN,
            mlp_hidden: DEFAULT_HIDDEN,
            embed_dim: DEFAULT_HIDDEN,
            window_k: DEFAULT_WINDOW,
            init_scale: INIT_SCALE,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.mlp_hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("layer sizes must be >= 1".into()));
        }
        if self.window_k % 2 == 0 {
            return Err(Error::Config(format!(
                "frame window must be odd, got {}",
                self.window_k
            )));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::Config("init scale must be >= 0".into()));
        }
        Ok(())
    }
}

fn check_features(bilstm: &BiLstmParams, x: &Matrix) -> Result<()> {
    if x.cols() != bilstm.input_dim() {
        return Err(Error::shape(format!(
            "model expects {}-dim features, got {}",
            bilstm.input_dim(),
            x.cols()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyInput("feature sequence has no frames".into()));
    }
    Ok(())
}

pub(crate) fn concat_cols(parts: &[&Matrix]) -> Result<Matrix> {
    let rows = parts.first().map_or(0, |m| m.rows());
    if parts.iter().any(|m| m.rows() != rows) {
        return Err(Error::shape("row counts differ in column concatenation"));
    }
    let cols: usize = parts.iter().map(|m| m.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for m in parts {
            data.extend_from_slice(m.row(r));
        }
    }
    Matrix::from_vec(rows, cols, data)
}

/// `[h_fwd, h_bwd, x_t]` for every frame.
fn head_input(bilstm: &BiLstmParams, x: &Matrix) -> Result<Matrix> {
    check_features(bilstm, x)?;
    let (fwd, bwd) = bilstm_forward(bilstm, x)?;
    concat_cols(&[&fwd, &bwd, x])
}

fn head_input_var(bilstm: &BiLstmParams, vars: &BiLstmVars, tape: &mut Tape, x: &Matrix) -> Result<Var> {
    check_features(bilstm, x)?;
    let (fwd, bwd) = vars.forward(tape, x)?;
    let xin = tape.input(x.clone());
    tape.concat_cols(&[fwd, bwd, xin])
}

fn square_loss_var(tape: &mut Tape, y: Var, target: &[f64]) -> Result<Var> {
    let rows = tape.value(y).rows();
    if rows != target.len() {
        return Err(Error::shape(format!(
            "{} predictions against {} targets",
            rows,
            target.len()
        )));
    }
    let t = tape.input(Matrix::column_vector(target));
    let d = tape.sub(y, t)?;
    let sq = tape.mul(d, d)?;
    let s = tape.sum(sq);
    Ok(tape.scale(s, 1.0 / target.len() as f64))
}

fn square_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "{} predictions against {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

fn score_head(input: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Mlp {
    Mlp::uniform(
        &[input, cfg.mlp_hidden, 1],
        Activation::Sigmoid,
        Activation::Sigmoid,
        cfg.init_scale,
        rng,
    )
}

fn embed_head(input: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Mlp {
    Mlp::uniform(
        &[input, cfg.mlp_hidden, cfg.embed_dim],
        Activation::Sigmoid,
        Activation::Linear,
        cfg.init_scale,
        rng,
    )
}

// ---------------------------------------------------------------------------

/// Bidirectional LSTM with a per-frame importance head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsLstmModel {
    pub bilstm: BiLstmParams,
    pub f_i: Mlp,
}

impl VsLstmModel {
    pub fn new(feature_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let bilstm = BiLstmParams::uniform(feature_dim, cfg.hidden, cfg.init_scale, rng);
        let f_i = score_head(2 * cfg.hidden + feature_dim, cfg, rng);
        Self { bilstm, f_i }
    }

    pub fn zeros(feature_dim: usize, cfg: &ModelConfig) -> Self {
        let input = 2 * cfg.hidden + feature_dim;
        Self {
            bilstm: BiLstmParams::zeros(feature_dim, cfg.hidden),
            f_i: Mlp::zeros(
                &[input, cfg.mlp_hidden, 1],
                Activation::Sigmoid,
                Activation::Sigmoid,
            ),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.bilstm.input_dim()
    }

    pub fn predict(&self, x: &Matrix) -> Result<ImportanceCurve> {
        let h = head_input(&self.bilstm, x)?;
        ImportanceCurve::new(self.f_i.forward_batch(&h)?.into_vec())
    }

    /// Mean squared error against `target`.
    pub fn square_loss(&self, x: &Matrix, target: &[f64]) -> Result<f64> {
        square_loss(self.predict(x)?.as_slice(), target)
    }

    pub fn square_loss_grad(&self, x: &Matrix, target: &[f64]) -> Result<(f64, GradientBundle)> {
        let mut tape = Tape::new();
        let bi = self.bilstm.bind(&mut tape);
        let fi = self.f_i.bind(&mut tape);
        let h = head_input_var(&self.bilstm, &bi, &mut tape, x)?;
        let y = fi.forward(&mut tape, h)?;
        let loss = square_loss_var(&mut tape, y, target)?;
        Ok((tape.value(loss)[(0, 0)], backprop(&tape, loss)?))
    }
}

impl ParamSet for VsLstmModel {
    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("bilstm", self.bilstm.params());
        out.extend(prefixed("f_i", self.f_i.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.bilstm.params_mut();
        out.extend(self.f_i.params_mut());
        out
    }
}

// ---------------------------------------------------------------------------

/// vsLSTM plus a similarity-embedding head; frames are scored jointly by
/// the kernel `L = (y y^T) .* (Phi Phi^T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppLstmModel {
    pub bilstm: BiLstmParams,
    pub f_i: Mlp,
    pub f_s: Mlp,
}

impl DppLstmModel {
    pub fn new(feature_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let bilstm = BiLstmParams::uniform(feature_dim, cfg.hidden, cfg.init_scale, rng);
        let input = 2 * cfg.hidden + feature_dim;
        let f_i = score_head(input, cfg, rng);
        let f_s = embed_head(input, cfg, rng);
        Self { bilstm, f_i, f_s }
    }

    pub fn zeros(feature_dim: usize, cfg: &ModelConfig) -> Self {
        let input = 2 * cfg.hidden + feature_dim;
        Self {
            bilstm: BiLstmParams::zeros(feature_dim, cfg.hidden),
            f_i: Mlp::zeros(
                &[input, cfg.mlp_hidden, 1],
                Activation::Sigmoid,
                Activation::Sigmoid,
            ),
            f_s: Mlp::zeros(
                &[input, cfg.mlp_hidden, cfg.embed_dim],
                Activation::Sigmoid,
                Activation::Linear,
            ),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.bilstm.input_dim()
    }

    /// Per-frame quality `y` and embeddings `Phi` (one row per frame).
    pub fn heads(&self, x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let h = head_input(&self.bilstm, x)?;
        Ok((
            self.f_i.forward_batch(&h)?.into_vec(),
            self.f_s.forward_batch(&h)?,
        ))
    }

    pub fn predict(&self, x: &Matrix) -> Result<ImportanceCurve> {
        let h = head_input(&self.bilstm, x)?;
        ImportanceCurve::new(self.f_i.forward_batch(&h)?.into_vec())
    }

    pub fn build_kernel(&self, x: &Matrix) -> Result<DppKernel> {
        let (y, phi) = self.heads(x)?;
        quality_diversity_kernel(&y, &phi)
    }

    pub fn square_loss(&self, x: &Matrix, target: &[f64]) -> Result<f64> {
        square_loss(self.predict(x)?.as_slice(), target)
    }

    pub fn square_loss_grad(&self, x: &Matrix, target: &[f64]) -> Result<(f64, GradientBundle)> {
        let mut tape = Tape::new();
        let bi = self.bilstm.bind(&mut tape);
        let fi = self.f_i.bind(&mut tape);
        let _fs = self.f_s.bind(&mut tape);
        let h = head_input_var(&self.bilstm, &bi, &mut tape, x)?;
        let y = fi.forward(&mut tape, h)?;
        let loss = square_loss_var(&mut tape, y, target)?;
        Ok((tape.value(loss)[(0, 0)], backprop(&tape, loss)?))
    }

    /// Negative log-likelihood of the target subset.
    pub fn nll(&self, x: &Matrix, z: &SubsetIndex) -> Result<f64> {
        let (y, phi) = self.heads(x)?;
        let k = quality_diversity_kernel(&y, &phi)?;
        Ok(-crate::dpp::dpp_log_prob_factored(&k, &y, &phi, z)?)
    }

    pub fn nll_grad(&self, x: &Matrix, z: &SubsetIndex) -> Result<(f64, GradientBundle)> {
        let mut tape = Tape::new();
        let bi = self.bilstm.bind(&mut tape);
        let fi = self.f_i.bind(&mut tape);
        let fs = self.f_s.bind(&mut tape);
        let h = head_input_var(&self.bilstm, &bi, &mut tape, x)?;
        let y = fi.forward(&mut tape, h)?;
        let phi = fs.forward(&mut tape, h)?;
        let yy = tape.matmul_t(y, y)?;
        let gram = tape.matmul_t(phi, phi)?;
        let l = tape.mul(yy, gram)?;
        let loss = tape.dpp_nll(l, z, DEFAULT_JITTER)?;
        Ok((tape.value(loss)[(0, 0)], backprop(&tape, loss)?))
    }
}

impl ParamSet for DppLstmModel {
    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("bilstm", self.bilstm.params());
        out.extend(prefixed("f_i", self.f_i.params()));
        out.extend(prefixed("f_s", self.f_s.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.bilstm.params_mut();
        out.extend(self.f_i.params_mut());
        out.extend(self.f_s.params_mut());
        out
    }
}

/// `L[t][u] = y_t y_u <phi_t, phi_u>`.
pub fn quality_diversity_kernel(y: &[f64], phi: &Matrix) -> Result<DppKernel> {
    if y.len() != phi.rows() {
        return Err(Error::shape("quality and embedding counts differ"));
    }
    let gram = phi.matmul_t(phi)?;
    let n = y.len();
    let mut l = Matrix::zeros(n, n);
    for t in 0..n {
        for u in 0..n {
            l.as_mut_slice()[t * n + u] = y[t] * y[u] * gram[(t, u)];
        }
    }
    DppKernel::new(l)
}

// ---------------------------------------------------------------------------

/// Ablation with only the embedding head: `L = Phi Phi^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppLstmSingle {
    pub bilstm: BiLstmParams,
    pub f_s: Mlp,
}

impl DppLstmSingle {
    pub fn new(feature_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let bilstm = BiLstmParams::uniform(feature_dim, cfg.hidden, cfg.init_scale, rng);
        let f_s = embed_head(2 * cfg.hidden + feature_dim, cfg, rng);
        Self { bilstm, f_s }
    }

    pub fn zeros(feature_dim: usize, cfg: &ModelConfig) -> Self {
        Self {
            bilstm: BiLstmParams::zeros(feature_dim, cfg.hidden),
            f_s: Mlp::zeros(
                &[2 * cfg.hidden + feature_dim, cfg.mlp_hidden, cfg.embed_dim],
                Activation::Sigmoid,
                Activation::Linear,
            ),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.bilstm.input_dim()
    }

    pub fn embeddings(&self, x: &Matrix) -> Result<Matrix> {
        self.f_s.forward_batch(&head_input(&self.bilstm, x)?)
    }

    pub fn build_kernel(&self, x: &Matrix) -> Result<DppKernel> {
        let phi = self.embeddings(x)?;
        DppKernel::new(phi.matmul_t(&phi)?)
    }

    pub fn nll(&self, x: &Matrix, z: &SubsetIndex) -> Result<f64> {
        let phi = self.embeddings(x)?;
        let k = DppKernel::new(phi.matmul_t(&phi)?)?;
        Ok(-crate::dpp::dpp_log_prob_factored(
            &k,
            &vec![1.0; phi.rows()],
            &phi,
            z,
        )?)
    }

    pub fn nll_grad(&self, x: &Matrix, z: &SubsetIndex) -> Result<(f64, GradientBundle)> {
        let mut tape = Tape::new();
        let bi = self.bilstm.bind(&mut tape);
        let fs = self.f_s.bind(&mut tape);
        let h = head_input_var(&self.bilstm, &bi, &mut tape, x)?;
        let phi = fs.forward(&mut tape, h)?;
        let l = tape.matmul_t(phi, phi)?;
        let loss = tape.dpp_nll(l, z, DEFAULT_JITTER)?;
        Ok((tape.value(loss)[(0, 0)], backprop(&tape, loss)?))
    }
}

impl ParamSet for DppLstmSingle {
    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("bilstm", self.bilstm.params());
        out.extend(prefixed("f_s", self.f_s.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.bilstm.params_mut();
        out.extend(self.f_s.params_mut());
        out
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineVariant {
    /// One score per segment from the segment's mean feature.
    Shot,
    /// One score per frame from a centred window of frames.
    Frame,
}

/// Two-hidden-layer perceptron scoring shots or frame windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBaseline {
    pub variant: BaselineVariant,
    pub window_k: usize,
    pub net: Mlp,
}

impl MlpBaseline {
    fn sizes(variant: BaselineVariant, feature_dim: usize, cfg: &ModelConfig) -> [usize; 4] {
        let input = match variant {
            BaselineVariant::Shot => feature_dim,
            BaselineVariant::Frame => cfg.window_k * feature_dim,
        };
        [input, cfg.mlp_hidden, cfg.mlp_hidden, 1]
    }

    fn window(variant: BaselineVariant, cfg: &ModelConfig) -> usize {
        match variant {
            BaselineVariant::Shot => 1,
            BaselineVariant::Frame => cfg.window_k,
        }
    }

    pub fn new(variant: BaselineVariant, feature_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        Self {
            variant,
            window_k: Self::window(variant, cfg),
            net: Mlp::uniform(
                &Self::sizes(variant, feature_dim, cfg),
                Activation::Sigmoid,
                Activation::Sigmoid,
                cfg.init_scale,
                rng,
            ),
        }
    }

    pub fn zeros(variant: BaselineVariant, feature_dim: usize, cfg: &ModelConfig) -> Self {
        Self {
            variant,
            window_k: Self::window(variant, cfg),
            net: Mlp::zeros(
                &Self::sizes(variant, feature_dim, cfg),
                Activation::Sigmoid,
                Activation::Sigmoid,
            ),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.net.input_dim() / self.window_k.max(1)
    }

    /// Network inputs: segment means (shot) or edge-replicated windows
    /// (frame).
    pub fn inputs(&self, x: &Matrix, seg: &Segmentation) -> Result<Matrix> {
        let t_len = x.rows();
        if t_len == 0 {
            return Err(Error::EmptyInput("feature sequence has no frames".into()));
        }
        if x.cols() != self.feature_dim() {
            return Err(Error::shape(format!(
                "model expects {}-dim features, got {}",
                self.feature_dim(),
                x.cols()
            )));
        }
        match self.variant {
            BaselineVariant::Shot => {
                if seg.frames() != t_len {
                    return Err(Error::contract("segmentation does not match the sequence"));
                }
                let rows: Vec<Vec<f64>> = seg
                    .intervals()
                    .iter()
                    .map(|iv| {
                        let mut mean = vec![0.0; x.cols()];
                        for t in iv.start..=iv.end {
                            for (m, v) in mean.iter_mut().zip(x.row(t)) {
                                *m += v;
                            }
                        }
                        mean.iter_mut().for_each(|m| *m /= iv.len() as f64);
                        mean
                    })
                    .collect();
                Ok(Matrix::from_rows(&rows))
            }
            BaselineVariant::Frame => {
                let half = (self.window_k / 2) as isize;
                let last = t_len as isize - 1;
                let rows: Vec<Vec<f64>> = (0..t_len as isize)
                    .map(|t| {
                        (t - half..=t + half)
                            .flat_map(|s| x.row(s.clamp(0, last) as usize).to_vec())
                            .collect()
                    })
                    .collect();
                Ok(Matrix::from_rows(&rows))
            }
        }
    }

    /// Raw outputs: one per segment (shot) or per frame (frame).
    pub fn predict(&self, x: &Matrix, seg: &Segmentation) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(&self.inputs(x, seg)?)?.into_vec())
    }

    /// Outputs broadcast to frames.
    pub fn frame_scores(&self, x: &Matrix, seg: &Segmentation) -> Result<Vec<f64>> {
        let raw = self.predict(x, seg)?;
        Ok(match self.variant {
            BaselineVariant::Frame => raw,
            BaselineVariant::Shot => {
                let mut out = vec![0.0; x.rows()];
                for (iv, s) in seg.intervals().iter().zip(&raw) {
                    out[iv.start..=iv.end].fill(*s);
                }
                out
            }
        })
    }

    /// Training targets matching [`MlpBaseline::predict`]: segment means of
    /// the curve for shots, the curve itself for frames.
    pub fn targets(&self, curve: &[f64], seg: &Segmentation) -> Result<Vec<f64>> {
        if curve.len() != seg.frames() {
            return Err(Error::shape("curve does not match the segmentation"));
        }
        Ok(match self.variant {
            BaselineVariant::Shot => interval_means(curve, seg),
            BaselineVariant::Frame => curve.to_vec(),
        })
    }

    pub fn square_loss(&self, x: &Matrix, seg: &Segmentation, curve: &[f64]) -> Result<f64> {
        square_loss(&self.predict(x, seg)?, &self.targets(curve, seg)?)
    }

    pub fn square_loss_grad(
        &self,
        x: &Matrix,
        seg: &Segmentation,
        curve: &[f64],
    ) -> Result<(f64, GradientBundle)> {
        let target = self.targets(curve, seg)?;
        let mut tape = Tape::new();
        let net = self.net.bind(&mut tape);
        let input = tape.input(self.inputs(x, seg)?);
        let y = net.forward(&mut tape, input)?;
        let loss = square_loss_var(&mut tape, y, &target)?;
        Ok((tape.value(loss)[(0, 0)], backprop(&tape, loss)?))
    }
}

impl ParamSet for MlpBaseline {
    fn params(&self) -> Vec<(String, &Matrix)> {
        prefixed("net", self.net.params())
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.net.params_mut()
    }
}

// ---------------------------------------------------------------------------

/// Any of the trainable summarizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Model {
    #[serde(rename = "vslstm")]
    VsLstm(VsLstmModel),
    #[serde(rename = "dpplstm")]
    DppLstm(DppLstmModel),
    #[serde(rename = "dpplstm-single")]
    DppLstmSingle(DppLstmSingle),
    #[serde(rename = "mlp")]
    Mlp(MlpBaseline),
}

impl Model {
    pub fn init(feature_dim: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        if feature_dim == 0 {
            return Err(Error::Config("feature dimension must be >= 1".into()));
        }
        Ok(match cfg.kind {
            ModelKind::VsLstm => Model::VsLstm(VsLstmModel::new(feature_dim, cfg, rng)),
            ModelKind::DppLstm => Model::DppLstm(DppLstmModel::new(feature_dim, cfg, rng)),
            ModelKind::DppLstmSingle => Model::DppLstmSingle(DppLstmSingle::new(feature_dim, cfg, rng)),
            ModelKind::MlpShot => Model::Mlp(MlpBaseline::new(BaselineVariant::Shot, feature_dim, cfg, rng)),
            ModelKind::MlpFrame => {
                Model::Mlp(MlpBaseline::new(BaselineVariant::Frame, feature_dim, cfg, rng))
            }
        })
    }

    pub fn zeros(feature_dim: usize, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            ModelKind::VsLstm => Model::VsLstm(VsLstmModel::zeros(feature_dim, cfg)),
            ModelKind::DppLstm => Model::DppLstm(DppLstmModel::zeros(feature_dim, cfg)),
            ModelKind::DppLstmSingle => Model::DppLstmSingle(DppLstmSingle::zeros(feature_dim, cfg)),
            ModelKind::MlpShot => Model::Mlp(MlpBaseline::zeros(BaselineVariant::Shot, feature_dim, cfg)),
            ModelKind::MlpFrame => Model::Mlp(MlpBaseline::zeros(BaselineVariant::Frame, feature_dim, cfg)),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::VsLstm(_) => ModelKind::VsLstm,
            Model::DppLstm(_) => ModelKind::DppLstm,
            Model::DppLstmSingle(_) => ModelKind::DppLstmSingle,
            Model::Mlp(m) => match m.variant {
                BaselineVariant::Shot => ModelKind::MlpShot,
                BaselineVariant::Frame => ModelKind::MlpFrame,
            },
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Model::VsLstm(m) => m.feature_dim(),
            Model::DppLstm(m) => m.feature_dim(),
            Model::DppLstmSingle(m) => m.feature_dim(),
            Model::Mlp(m) => m.feature_dim(),
        }
    }

    /// Architecture sizes recovered from the parameter shapes.
    pub fn config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.kind());
        let head_hidden = |m: &Mlp| m.layers.first().map_or(0, |l| l.output_dim());
        match self {
            Model::VsLstm(m) => {
                cfg.hidden = m.bilstm.hidden();
                cfg.mlp_hidden = head_hidden(&m.f_i);
            }
            Model::DppLstm(m) => {
                cfg.hidden = m.bilstm.hidden();
                cfg.mlp_hidden = head_hidden(&m.f_i);
                cfg.embed_dim = m.f_s.output_dim();
            }
            Model::DppLstmSingle(m) => {
                cfg.hidden = m.bilstm.hidden();
                cfg.mlp_hidden = head_hidden(&m.f_s);
                cfg.embed_dim = m.f_s.output_dim();
            }
            Model::Mlp(m) => {
                cfg.mlp_hidden = head_hidden(&m.net);
                if m.variant == BaselineVariant::Frame {
                    cfg.window_k = m.window_k;
                }
            }
        }
        cfg
    }

    /// Per-frame scores used for score-based selection: importance for
    /// the LSTM heads and baselines, `L_tt` for the single-head ablation.
    pub fn frame_scores(&self, x: &Matrix, seg: &Segmentation) -> Result<Vec<f64>> {
        match self {
            Model::VsLstm(m) => Ok(m.predict(x)?.into_vec()),
            Model::DppLstm(m) => Ok(m.predict(x)?.into_vec()),
            Model::DppLstmSingle(m) => Ok(m.build_kernel(x)?.matrix().diagonal()),
            Model::Mlp(m) => m.frame_scores(x, seg),
        }
    }
}

impl ParamSet for Model {
    fn params(&self) -> Vec<(String, &Matrix)> {
        match self {
            Model::VsLstm(m) => m.params(),
            Model::DppLstm(m) => m.params(),
            Model::DppLstmSingle(m) => m.params(),
            Model::Mlp(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Model::VsLstm(m) => m.params_mut(),
            Model::DppLstm(m) => m.params_mut(),
            Model::DppLstmSingle(m) => m.params_mut(),
            Model::Mlp(m) => m.params_mut(),
        }
    }
}
