//! Dense layers, MLPs and LSTM cells, each with a plain inference path and
//! a tape path for training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::params::{prefixed, ParamSet};
use super::tape::{Tape, Var};

/// Default half-width of the uniform weight initializer.
pub const INIT_SCALE: f64 = 0.05;
/// Initial value of the forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

const ACTIVATION_CLAMP: f64 = 30.0;

pub fn clamped_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-ACTIVATION_CLAMP, ACTIVATION_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

pub fn clamped_tanh(x: f64) -> f64 {
    x.clamp(-ACTIVATION_CLAMP, ACTIVATION_CLAMP).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => clamped_sigmoid(x),
            Activation::Tanh => clamped_tanh(x),
            Activation::Linear => x,
        }
    }

    fn apply_tape(self, tape: &mut Tape, v: Var) -> Var {
        match self {
            Activation::Sigmoid => tape.sigmoid(v),
            Activation::Tanh => tape.tanh(v),
            Activation::Linear => v,
        }
    }
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            if scale > 0.0 {
                rng.random_range(-scale..=scale)
            } else {
                0.0
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

/// `act(W x + b)` with `W` stored `out x in` and `b` as a `1 x out` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayerParams {
    pub weight: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

impl DenseLayerParams {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: Matrix::zeros(1, output),
            activation,
        }
    }

    pub fn uniform<R: Rng>(
        input: usize,
        output: usize,
        activation: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: uniform_matrix(output, input, scale, rng),
            bias: uniform_matrix(1, output, scale, rng),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Rows of `input` are independent samples.
    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        let mut z = input.matmul_t(&self.weight)?;
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(self.bias.as_slice()) {
                *v = self.activation.apply(*v + b);
            }
        }
        Ok(z)
    }
}

impl ParamSet for DenseLayerParams {
    fn params(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayerParams>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; every hidden layer uses `hidden_act`.
    pub fn uniform<R: Rng>(
        sizes: &[usize],
        hidden_act: Activation,
        output_act: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                DenseLayerParams::uniform(sizes[i], sizes[i + 1], act, scale, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize], hidden_act: Activation, output_act: Activation) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                DenseLayerParams::zeros(sizes[i], sizes[i + 1], act)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        mlp_forward(&self.layers, input)
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        check_chain(&self.layers, input.cols())?;
        let mut a = input.clone();
        for layer in &self.layers {
            a = layer.forward_batch(&a)?;
        }
        Ok(a)
    }

    pub fn bind(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| DenseVars {
                    weight: tape.param(&l.weight),
                    bias: tape.param(&l.bias),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl ParamSet for Mlp {
    fn params(&self) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

fn check_chain(layers: &[DenseLayerParams], input: usize) -> Result<()> {
    let mut width = input;
    for (i, l) in layers.iter().enumerate() {
        if l.input_dim() != width {
            return Err(Error::shape(format!(
                "layer {i} expects {} inputs, got {width}",
                l.input_dim()
            )));
        }
        if l.bias.shape() != (1, l.output_dim()) {
            return Err(Error::shape(format!("layer {i} bias has the wrong shape")));
        }
        width = l.output_dim();
    }
    Ok(())
}

/// Feed-forward evaluation of one input vector.
pub fn mlp_forward(layers: &[DenseLayerParams], input: &[f64]) -> Result<Vec<f64>> {
    check_chain(layers, input.len())?;
    let out = Mlp {
        layers: layers.to_vec(),
    }
    .forward_batch(&Matrix::row_vector(input))?;
    Ok(out.into_vec())
}

#[derive(Debug, Clone)]
pub struct DenseVars {
    weight: Var,
    bias: Var,
    activation: Activation,
}

#[derive(Debug, Clone)]
pub struct MlpVars {
    layers: Vec<DenseVars>,
}

impl MlpVars {
    /// Applies the network to every row of `input`.
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let mut a = input;
        for l in &self.layers {
            let z = tape.matmul_t(a, l.weight)?;
            let z = tape.add_row(z, l.bias)?;
            a = l.activation.apply_tape(tape, z);
        }
        Ok(a)
    }
}

/// One LSTM unit. Each gate matrix is `hidden x (input + hidden + 1)`,
/// acting on `[x_t, h_{t-1}, 1]`; the last column is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_c: Matrix,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let z = Matrix::zeros(hidden, input + hidden + 1);
        Self {
            w_i: z.clone(),
            w_f: z.clone(),
            w_o: z.clone(),
            w_c: z,
        }
    }

    /// Uniform weights in `[-scale, scale]`, forget bias set to
    /// [`FORGET_BIAS_INIT`].
    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let cols = input + hidden + 1;
        let mut cell = Self {
            w_i: uniform_matrix(hidden, cols, scale, rng),
            w_f: uniform_matrix(hidden, cols, scale, rng),
            w_o: uniform_matrix(hidden, cols, scale, rng),
            w_c: uniform_matrix(hidden, cols, scale, rng),
        };
        for j in 0..hidden {
            cell.w_f[(j, cols - 1)] = FORGET_BIAS_INIT;
        }
        cell
    }

    pub fn hidden(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols() - self.hidden() - 1
    }

    fn check(&self) -> Result<()> {
        let shape = self.w_i.shape();
        if [&self.w_f, &self.w_o, &self.w_c]
            .iter()
            .any(|m| m.shape() != shape)
            || shape.1 < shape.0 + 1
        {
            return Err(Error::shape("LSTM gate matrices disagree in shape"));
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape) -> LstmCellVars {
        LstmCellVars {
            w_i: tape.param(&self.w_i),
            w_f: tape.param(&self.w_f),
            w_o: tape.param(&self.w_o),
            w_c: tape.param(&self.w_c),
            hidden: self.hidden(),
        }
    }
}

impl ParamSet for LstmCellParams {
    fn params(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("w_i".into(), &self.w_i),
            ("w_f".into(), &self.w_f),
            ("w_o".into(), &self.w_o),
            ("w_c".into(), &self.w_c),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_c]
    }
}

fn gate(w: &Matrix, z: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    (0..w.rows())
        .map(|j| act(w.row(j).iter().zip(z).map(|(a, b)| a * b).sum()))
        .collect()
}

/// One LSTM time step:
///
/// ```text
/// i = sigmoid(W_i z)   f = sigmoid(W_f z)   o = sigmoid(W_o z)
/// c = i * tanh(W_c z) + f * c_prev
/// h = o * tanh(c)          where z = [x_t, h_prev, 1]
/// ```
pub fn lstm_step(
    cell: &LstmCellParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    cell.check()?;
    let hidden = cell.hidden();
    if x_t.len() != cell.input_dim() || h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(Error::shape(format!(
            "lstm_step: cell is {}->{hidden}, got x {} h {} c {}",
            cell.input_dim(),
            x_t.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = Vec::with_capacity(x_t.len() + hidden + 1);
    z.extend_from_slice(x_t);
    z.extend_from_slice(h_prev);
    z.push(1.0);

    let i = gate(&cell.w_i, &z, clamped_sigmoid);
    let f = gate(&cell.w_f, &z, clamped_sigmoid);
    let o = gate(&cell.w_o, &z, clamped_sigmoid);
    let g = gate(&cell.w_c, &z, clamped_tanh);
    let c: Vec<f64> = (0..hidden).map(|j| i[j] * g[j] + f[j] * c_prev[j]).collect();
    let h = (0..hidden).map(|j| o[j] * clamped_tanh(c[j])).collect();
    Ok((h, c))
}

#[derive(Debug, Clone)]
pub struct LstmCellVars {
    w_i: Var,
    w_f: Var,
    w_o: Var,
    w_c: Var,
    hidden: usize,
}

impl LstmCellVars {
    /// Tape version of [`lstm_step`]; `one` is a `1 x 1` constant holding 1.
    pub fn step(&self, tape: &mut Tape, x_t: Var, h: Var, c: Var, one: Var) -> Result<(Var, Var)> {
        let z = tape.concat_cols(&[x_t, h, one])?;
        let i = tape.matmul_t(z, self.w_i)?;
        let i = tape.sigmoid(i);
        let f = tape.matmul_t(z, self.w_f)?;
        let f = tape.sigmoid(f);
        let o = tape.matmul_t(z, self.w_o)?;
        let o = tape.sigmoid(o);
        let g = tape.matmul_t(z, self.w_c)?;
        let g = tape.tanh(g);
        let ig = tape.mul(i, g)?;
        let fc = tape.mul(f, c)?;
        let c_next = tape.add(ig, fc)?;
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

/// Two independent LSTM chains, one reading forward and one backward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub forward_cell: LstmCellParams,
    pub backward_cell: LstmCellParams,
}

impl BiLstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward_cell: LstmCellParams::zeros(input, hidden),
            backward_cell: LstmCellParams::zeros(input, hidden),
        }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            forward_cell: LstmCellParams::uniform(input, hidden, scale, rng),
            backward_cell: LstmCellParams::uniform(input, hidden, scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward_cell.hidden()
    }

    pub fn input_dim(&self) -> usize {
        self.forward_cell.input_dim()
    }

    pub fn bind(&self, tape: &mut Tape) -> BiLstmVars {
        BiLstmVars {
            forward_cell: self.forward_cell.bind(tape),
            backward_cell: self.backward_cell.bind(tape),
        }
    }
}

impl ParamSet for BiLstmParams {
    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("forward", self.forward_cell.params());
        out.extend(prefixed("backward", self.backward_cell.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.forward_cell.params_mut();
        out.extend(self.backward_cell.params_mut());
        out
    }
}

/// Hidden states of both chains for a `T x d` sequence. Row `t` of the
/// forward matrix has consumed `x_0..=x_t`; row `t` of the backward matrix
/// has consumed `x_{T-1}` down to `x_t`. Both chains start from zeros.
pub fn bilstm_forward(params: &BiLstmParams, x: &Matrix) -> Result<(Matrix, Matrix)> {
    let t_len = x.rows();
    if t_len == 0 {
        return Err(Error::EmptyInput("bilstm_forward on an empty sequence".into()));
    }
    if params.backward_cell.hidden() != params.hidden() {
        return Err(Error::shape("forward and backward cells differ in hidden size"));
    }
    let hidden = params.hidden();
    let run = |cell: &LstmCellParams, order: &mut dyn Iterator<Item = usize>| -> Result<Matrix> {
        let mut out = Matrix::zeros(t_len, hidden);
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        for t in order {
            let (h_next, c_next) = lstm_step(cell, x.row(t), &h, &c)?;
            out.row_mut(t).copy_from_slice(&h_next);
            h = h_next;
            c = c_next;
        }
        Ok(out)
    };
    let fwd = run(&params.forward_cell, &mut (0..t_len))?;
    let bwd = run(&params.backward_cell, &mut (0..t_len).rev())?;
    Ok((fwd, bwd))
}

#[derive(Debug, Clone)]
pub struct BiLstmVars {
    forward_cell: LstmCellVars,
    backward_cell: LstmCellVars,
}

impl BiLstmVars {
    /// Tape version of [`bilstm_forward`]; returns the two `T x hidden`
    /// state matrices.
    pub fn forward(&self, tape: &mut Tape, x: &Matrix) -> Result<(Var, Var)> {
        let t_len = x.rows();
        if t_len == 0 {
            return Err(Error::EmptyInput("bilstm_forward on an empty sequence".into()));
        }
        let one = tape.input(Matrix::row_vector(&[1.0]));
        let rows: Vec<Var> = (0..t_len)
            .map(|t| tape.input(Matrix::row_vector(x.row(t))))
            .collect();
        let mut chain = |cell: &LstmCellVars, order: Vec<usize>| -> Result<Var> {
            let hidden = cell.hidden;
            let mut h = tape.input(Matrix::zeros(1, hidden));
            let mut c = tape.input(Matrix::zeros(1, hidden));
            let mut states = vec![h; t_len];
            for t in order {
                (h, c) = cell.step(tape, rows[t], h, c, one)?;
                states[t] = h;
            }
            tape.stack_rows(&states)
        };
        let fwd = chain(&self.forward_cell, (0..t_len).collect())?;
        let bwd = chain(&self.backward_cell, (0..t_len).rev().collect())?;
        Ok((fwd, bwd))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{check_gradients, GradCheckConfig};
    use crate::autodiff::tape::backprop;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_weight_step() {
        let cell = LstmCellParams::zeros(3, 2);
        let c_prev = [0.8, -1.2];
        let (h, c) = lstm_step(&cell, &[1.0, 2.0, 3.0], &[0.3, 0.1], &c_prev).unwrap();
        for j in 0..2 {
            assert_eq!(c[j], 0.5 * c_prev[j]);
            assert_eq!(h[j], 0.5 * (0.5 * c_prev[j]).tanh());
        }
        let (h, _) = lstm_step(&cell, &[1.0, 2.0, 3.0], &[0.3, 0.1], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn step_shape_error() {
        let cell = LstmCellParams::zeros(3, 2);
        assert!(matches!(
            lstm_step(&cell, &[1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap_err(),
            Error::Shape(_)
        ));
    }

    #[test]
    fn step_gradient_of_hidden_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cell = LstmCellParams::uniform(4, 3, 0.8, &mut rng);
        let x = rand_vec(&mut rng, 4);
        let h0 = rand_vec(&mut rng, 3);
        let c0 = rand_vec(&mut rng, 3);

        let mut tape = Tape::new();
        let vars = cell.bind(&mut tape);
        let xv = tape.input(Matrix::row_vector(&x));
        let hv = tape.input(Matrix::row_vector(&h0));
        let cv = tape.input(Matrix::row_vector(&c0));
        let one = tape.input(Matrix::row_vector(&[1.0]));
        let (h, _) = vars.step(&mut tape, xv, hv, cv, one).unwrap();
        let loss = tape.sum(h);
        let grads = backprop(&tape, loss).unwrap();

        let plain = lstm_step(&cell, &x, &h0, &c0).unwrap().0;
        assert_eq!(tape.value(h).as_slice(), plain.as_slice());

        let report = check_gradients(
            &cell,
            &grads,
            |p| Ok(lstm_step(p, &x, &h0, &c0)?.0.iter().sum()),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn hidden_states_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let cell = LstmCellParams::uniform(3, 4, 3.0, &mut rng);
        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        for _ in 0..50 {
            let x = rand_vec(&mut rng, 3).iter().map(|v| v * 10.0).collect::<Vec<_>>();
            (h, c) = lstm_step(&cell, &x, &h, &c).unwrap();
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn bilstm_single_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let params = BiLstmParams::uniform(3, 2, 0.5, &mut rng);
        let x = Matrix::row_vector(&[0.1, -0.4, 0.9]);
        let (f, b) = bilstm_forward(&params, &x).unwrap();
        let z = [0.0, 0.0];
        assert_eq!(
            f.row(0),
            lstm_step(&params.forward_cell, x.row(0), &z, &z).unwrap().0
        );
        assert_eq!(
            b.row(0),
            lstm_step(&params.backward_cell, x.row(0), &z, &z).unwrap().0
        );
    }

    #[test]
    fn bilstm_reversal_swaps_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let cell = LstmCellParams::uniform(3, 4, 0.7, &mut rng);
        let params = BiLstmParams {
            forward_cell: cell.clone(),
            backward_cell: cell,
        };
        let t_len = 6;
        let x = Matrix::from_vec(t_len, 3, rand_vec(&mut rng, t_len * 3)).unwrap();
        let mut rev = Matrix::zeros(t_len, 3);
        for t in 0..t_len {
            rev.row_mut(t).copy_from_slice(x.row(t_len - 1 - t));
        }
        let (_, bwd) = bilstm_forward(&params, &x).unwrap();
        let (fwd_rev, _) = bilstm_forward(&params, &rev).unwrap();
        for t in 0..t_len {
            assert_eq!(fwd_rev.row(t), bwd.row(t_len - 1 - t));
        }
    }

    #[test]
    fn bilstm_zero_weights_and_empty() {
        let params = BiLstmParams::zeros(2, 3);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let (f, b) = bilstm_forward(&params, &x).unwrap();
        // zero weights keep c at 0.5 * 0 forever, so every state is 0
        assert_eq!(f, Matrix::zeros(2, 3));
        assert_eq!(b, Matrix::zeros(2, 3));
        assert!(matches!(
            bilstm_forward(&params, &Matrix::zeros(0, 2)).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    #[test]
    fn bilstm_tape_matches_plain_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let params = BiLstmParams::uniform(3, 4, 0.6, &mut rng);
        let x = Matrix::from_vec(5, 3, rand_vec(&mut rng, 15)).unwrap();
        let (f, b) = bilstm_forward(&params, &x).unwrap();
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let (fv, bv) = vars.forward(&mut tape, &x).unwrap();
        assert_eq!(tape.value(fv), &f);
        assert_eq!(tape.value(bv), &b);
    }

    #[test]
    fn mlp_fixtures() {
        let sig = Mlp::zeros(&[4, 3, 1], Activation::Sigmoid, Activation::Sigmoid);
        assert_eq!(sig.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.5]);
        let lin = Mlp::zeros(&[4, 3, 1], Activation::Sigmoid, Activation::Linear);
        assert_eq!(lin.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0]);
        assert!(matches!(sig.forward(&[1.0]).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn mlp_matches_per_neuron_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let net = Mlp::uniform(&[5, 4, 2], Activation::Sigmoid, Activation::Linear, 1.0, &mut rng);
        let x = rand_vec(&mut rng, 5);
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let hidden: Vec<f64> = (0..4)
            .map(|j| {
                let l = &net.layers[0];
                let mut s = l.bias[(0, j)];
                for k in 0..5 {
                    s += l.weight[(j, k)] * x[k];
                }
                sigmoid(s)
            })
            .collect();
        let out: Vec<f64> = (0..2)
            .map(|j| {
                let l = &net.layers[1];
                let mut s = l.bias[(0, j)];
                for k in 0..4 {
                    s += l.weight[(j, k)] * hidden[k];
                }
                s
            })
            .collect();
        let got = net.forward(&x).unwrap();
        for (a, b) in got.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
