use crate::dpp::{self, DppKernel, SubsetIndex};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

use super::layers::{clamped_sigmoid, clamped_tanh};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a + 1 row`, the row broadcast down every row of `a`
    AddRow(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    Row(Var, usize),
    Sum(Var),
    /// `-ln P(z; L)` with `L` the operand
    DppNll(Var, SubsetIndex, f64),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Records matrix-valued operations so a scalar result can be
/// differentiated in one reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_shapes: Vec<(usize, usize)>,
}

/// Partial derivatives of a scalar loss, one matrix per parameter in the
/// order the parameters were bound to the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub grads: Vec<Matrix>,
}

impl GradientBundle {
    pub fn zeros_like(shapes: &[(usize, usize)]) -> Self {
        Self {
            grads: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.as_slice())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.grads
            .iter()
            .flat_map(|g| g.as_slice().iter().copied())
            .collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    /// A learnable leaf. Slots are numbered in binding order.
    pub fn param(&mut self, value: &Matrix) -> Var {
        let slot = self.param_shapes.len();
        self.param_shapes.push(value.shape());
        self.push(value.clone(), Op::Param(slot))
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes.len()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = linalg::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(v, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(Error::shape(format!(
                "add_row: {:?} + {:?}",
                av.shape(),
                rv.shape()
            )));
        }
        let mut v = av.clone();
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(rv.as_slice()) {
                *x += b;
            }
        }
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(clamped_sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(clamped_tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::shape("concat_cols: row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let v = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.value(p).cols());
        if parts.iter().any(|&p| self.value(p).cols() != cols) {
            return Err(Error::shape("stack_rows: column counts differ"));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            data.extend_from_slice(self.value(p).as_slice());
            rows += self.value(p).rows();
        }
        let v = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(v, Op::StackRows(parts.to_vec())))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let av = self.value(a);
        if i >= av.rows() {
            return Err(Error::shape(format!("row {i} of {:?}", av.shape())));
        }
        let v = Matrix::row_vector(av.row(i));
        Ok(self.push(v, Op::Row(a, i)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().sum();
        self.push(Matrix::row_vector(&[s]), Op::Sum(a))
    }

    /// Negative DPP log-likelihood of the target subset under kernel `l`.
    pub fn dpp_nll(&mut self, l: Var, z: &SubsetIndex, jitter: f64) -> Result<Var> {
        let kernel = DppKernel::with_jitter(linalg::symmetrize(self.value(l)), jitter)?;
        let nll = -dpp::dpp_log_prob(&kernel, z)?;
        Ok(self.push(Matrix::row_vector(&[nll]), Op::DppNll(l, z.clone(), jitter)))
    }
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(g) => {
            for (a, b) in g.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

/// Reverse sweep from a scalar node. Returns the gradient of `loss` with
/// respect to every parameter bound on the tape; unused parameters get
/// zeros.
pub fn backprop(tape: &Tape, loss: Var) -> Result<GradientBundle> {
    let shape = tape.value(loss).shape();
    if shape != (1, 1) {
        return Err(Error::contract(format!(
            "backprop needs a scalar loss, got a {}x{} node",
            shape.0, shape.1
        )));
    }
    let mut adj: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
    adj[loss.0] = Some(Matrix::row_vector(&[1.0]));
    let mut out = GradientBundle::zeros_like(&tape.param_shapes);

    for idx in (0..=loss.0).rev() {
        let Some(g) = adj[idx].take() else { continue };
        let node = &tape.nodes[idx];
        match &node.op {
            Op::Input => {}
            Op::Param(slot) => {
                let dst = &mut out.grads[*slot];
                for (a, b) in dst.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *a += b;
                }
            }
            Op::MatMul(a, b) => {
                let da = g.matmul_t(tape.value(*b))?;
                let db = linalg::matmul(&tape.value(*a).transpose(), &g)?;
                accumulate(&mut adj[a.0], da);
                accumulate(&mut adj[b.0], db);
            }
            Op::MatMulT(a, b) => {
                let da = linalg::matmul(&g, tape.value(*b))?;
                let db = linalg::matmul(&g.transpose(), tape.value(*a))?;
                accumulate(&mut adj[a.0], da);
                accumulate(&mut adj[b.0], db);
            }
            Op::Add(a, b) => {
                accumulate(&mut adj[a.0], g.clone());
                accumulate(&mut adj[b.0], g);
            }
            Op::Sub(a, b) => {
                accumulate(&mut adj[a.0], g.clone());
                accumulate(&mut adj[b.0], g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                let da = g.hadamard(tape.value(*b))?;
                let db = g.hadamard(tape.value(*a))?;
                accumulate(&mut adj[a.0], da);
                accumulate(&mut adj[b.0], db);
            }
            Op::AddRow(a, row) => {
                let mut dr = Matrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (d, v) in dr.as_mut_slice().iter_mut().zip(g.row(i)) {
                        *d += v;
                    }
                }
                accumulate(&mut adj[a.0], g);
                accumulate(&mut adj[row.0], dr);
            }
            Op::Scale(a, s) => accumulate(&mut adj[a.0], g.scale(*s)),
            Op::Sigmoid(a) => {
                let d = node.value.map(|y| y * (1.0 - y)).hadamard(&g)?;
                accumulate(&mut adj[a.0], d);
            }
            Op::Tanh(a) => {
                let d = node.value.map(|y| 1.0 - y * y).hadamard(&g)?;
                accumulate(&mut adj[a.0], d);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, cols) = tape.value(*p).shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        d.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + cols]);
                    }
                    offset += cols;
                    accumulate(&mut adj[p.0], d);
                }
            }
            Op::StackRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, cols) = tape.value(*p).shape();
                    let slice = g.as_slice()[offset * cols..(offset + rows) * cols].to_vec();
                    offset += rows;
                    accumulate(&mut adj[p.0], Matrix::from_vec(rows, cols, slice)?);
                }
            }
            Op::Row(a, i) => {
                let (rows, cols) = tape.value(*a).shape();
                let mut d = Matrix::zeros(rows, cols);
                d.row_mut(*i).copy_from_slice(g.as_slice());
                accumulate(&mut adj[a.0], d);
            }
            Op::Sum(a) => {
                let (rows, cols) = tape.value(*a).shape();
                let s = g.as_slice()[0];
                accumulate(&mut adj[a.0], Matrix::from_vec(rows, cols, vec![s; rows * cols])?);
            }
            Op::DppNll(l, z, jitter) => {
                let kernel = DppKernel::with_jitter(linalg::symmetrize(tape.value(*l)), *jitter)?;
                let d = dpp::dpp_nll_grad(&kernel, z)?.scale(g.as_slice()[0]);
                accumulate(&mut adj[l.0], d);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(&Matrix::from_rows(&[[1.0, 2.0]]));
        let c = tape.input(Matrix::row_vector(&[3.0]));
        let loss = tape.sum(c);
        let g = backprop(&tape, loss).unwrap();
        assert_eq!(g.grads.len(), 1);
        assert_eq!(g.grads[0], Matrix::zeros(1, 2));
        let _ = w;
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(&Matrix::identity(2));
        assert!(matches!(backprop(&tape, w).unwrap_err(), Error::Contract(_)));
    }

    #[test]
    fn quadratic_form_gradient() {
        // loss = |W x|^2 / 2  =>  dW = W x x^T
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = Matrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let wv = tape.param(&w);
        let xv = tape.input(Matrix::column_vector(&x));
        let wx = tape.matmul(wv, xv).unwrap();
        let sq = tape.mul(wx, wx).unwrap();
        let s = tape.sum(sq);
        let loss = tape.scale(s, 0.5);
        let g = backprop(&tape, loss).unwrap();

        let xc = Matrix::column_vector(&x);
        let expected = linalg::matmul(&linalg::matmul(&w, &xc).unwrap(), &xc.transpose()).unwrap();
        assert!(g.grads[0].sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn shared_operand_accumulates() {
        // d/da sum(a * a) = 2a, d/da sum(a + a) = 2
        let a = Matrix::row_vector(&[1.5, -2.0]);
        let mut tape = Tape::new();
        let av = tape.param(&a);
        let sq = tape.mul(av, av).unwrap();
        let tw = tape.add(av, av).unwrap();
        let both = tape.add(sq, tw).unwrap();
        let loss = tape.sum(both);
        let g = backprop(&tape, loss).unwrap();
        assert_eq!(g.grads[0], Matrix::row_vector(&[5.0, -2.0]));
    }

    #[test]
    fn structural_ops_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.param(&Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let b = tape.param(&Matrix::from_rows(&[[5.0], [6.0]]));
        let cat = tape.concat_cols(&[a, b]).unwrap();
        let r1 = tape.row(cat, 1).unwrap();
        let r0 = tape.row(cat, 0).unwrap();
        let stacked = tape.stack_rows(&[r1, r0, r1]).unwrap();
        let bias = tape.param(&Matrix::row_vector(&[0.0, 0.0, 0.0]));
        let shifted = tape.add_row(stacked, bias).unwrap();
        let loss = tape.sum(shifted);
        let g = backprop(&tape, loss).unwrap();
        assert_eq!(g.grads[0], Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]));
        assert_eq!(g.grads[1], Matrix::from_rows(&[[1.0], [2.0]]));
        assert_eq!(g.grads[2], Matrix::row_vector(&[3.0, 3.0, 3.0]));
    }
}
