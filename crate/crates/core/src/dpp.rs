//! Determinantal point processes over the frames of one sequence.
//!
//! `P(z) = det(L_z) / det(L + I)`. Everything here works in the log domain
//! except the exhaustive routines, which exist to check the fast paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, DEFAULT_JITTER};

/// Value reported for `ln 0`, so training never sees a non-finite loss.
pub const LOG_ZERO_FLOOR: f64 = -1e18;

/// A pivot smaller than this fraction of the largest diagonal entry marks
/// a principal minor as singular.
const SINGULAR_PIVOT_RTOL: f64 = 1e-12;

const EXHAUSTIVE_MAP_LIMIT: usize = 20;
const NORMALIZATION_LIMIT: usize = 16;
const TIE_RTOL: f64 = 1e-12;

/// Symmetric PSD kernel `L` over `T` items.
#[derive(Debug, Clone)]
pub struct DppKernel {
    l: Matrix,
    jitter: f64,
}

impl DppKernel {
    pub fn new(l: Matrix) -> Result<Self> {
        Self::with_jitter(l, DEFAULT_JITTER)
    }

    pub fn with_jitter(l: Matrix, jitter: f64) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::shape(format!(
                "DPP kernel must be square, got {:?}",
                l.shape()
            )));
        }
        if !l.is_finite() {
            return Err(Error::Numeric("DPP kernel has non-finite entries".into()));
        }
        if !l.is_symmetric() {
            return Err(Error::shape("DPP kernel is not symmetric"));
        }
        Ok(Self { l, jitter })
    }

    /// Like [`DppKernel::new`], additionally requiring every eigenvalue to
    /// be at least `-1e-9`.
    pub fn new_checked(l: Matrix) -> Result<Self> {
        let k = Self::new(l)?;
        let (values, _) = linalg::sym_eig(&k.l)?;
        if let Some(&min) = values.last() {
            if min < -1e-9 {
                return Err(Error::NotPsd { max_jitter: 0.0 });
            }
        }
        Ok(k)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn size(&self) -> usize {
        self.l.rows()
    }
}

/// Sorted, distinct item indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct SubsetIndex(Vec<usize>);

impl SubsetIndex {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("subset indices must be distinct"));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    fn check_range(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= n => Err(Error::contract(format!(
                "subset index {max} out of range for {n} items"
            ))),
            _ => Ok(()),
        }
    }
}

/// `ln det(m)`, or [`LOG_ZERO_FLOOR`] when `m` is numerically singular.
fn log_det_or_floor(m: &Matrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    let max_diag = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    let factor = match linalg::cholesky_psd(m, 0.0) {
        Ok(f) => f,
        Err(_) => return LOG_ZERO_FLOOR,
    };
    let min_pivot = factor
        .lower
        .diagonal()
        .iter()
        .map(|d| d * d)
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= SINGULAR_PIVOT_RTOL * max_diag {
        return LOG_ZERO_FLOOR;
    }
    factor.log_det()
}

/// `ln det(L_z) - ln det(L + I)`, floored at [`LOG_ZERO_FLOOR`].
pub fn dpp_log_prob(k: &DppKernel, z: &SubsetIndex) -> Result<f64> {
    z.check_range(k.size())?;
    let numerator = log_det_or_floor(&k.l.principal_minor(z.as_slice()));
    if numerator == LOG_ZERO_FLOOR {
        return Ok(LOG_ZERO_FLOOR);
    }
    let denominator = linalg::logdet_psd(&k.l.add_diagonal(1.0), k.jitter)?;
    Ok((numerator - denominator).max(LOG_ZERO_FLOOR))
}

/// [`dpp_log_prob`] for a kernel known to be `diag(q) phi phi^T diag(q)`.
/// The numerator comes from the factor, which is markedly more accurate
/// when the target frames are nearly redundant.
pub fn dpp_log_prob_factored(k: &DppKernel, quality: &[f64], phi: &Matrix, z: &SubsetIndex) -> Result<f64> {
    z.check_range(k.size())?;
    if quality.len() != k.size() || phi.rows() != k.size() {
        return Err(Error::shape("factor does not match the kernel"));
    }
    let idx = z.as_slice();
    let rows: Vec<&[f64]> = idx.iter().map(|&i| phi.row(i)).collect();
    let pivots = linalg::gram_pivots(&Matrix::from_rows(&rows));
    let max_diag = idx.iter().map(|&i| k.l[(i, i)]).fold(0.0f64, f64::max);
    let mut numerator = 0.0;
    for (&i, p) in idx.iter().zip(pivots) {
        let pivot = quality[i] * quality[i] * p;
        if !(pivot > SINGULAR_PIVOT_RTOL * max_diag) {
            return Ok(LOG_ZERO_FLOOR);
        }
        numerator += pivot.ln();
    }
    let denominator = linalg::logdet_psd(&k.l.add_diagonal(1.0), k.jitter)?;
    Ok((numerator - denominator).max(LOG_ZERO_FLOOR))
}

/// Gradient of the negative log-likelihood with respect to the kernel:
/// `(L + I)^{-1} - pad(L_z^{-1})`, symmetrized.
pub fn dpp_nll_grad(k: &DppKernel, z: &SubsetIndex) -> Result<Matrix> {
    z.check_range(k.size())?;
    let mut grad = linalg::inverse_psd(&k.l.add_diagonal(1.0), k.jitter)?;
    if !z.is_empty() {
        let minor = k.l.principal_minor(z.as_slice());
        let inv = linalg::inverse_psd(&minor, k.jitter)
            .map_err(|e| Error::Numeric(format!("target minor is singular even after jitter: {e}")))?;
        for (a, &i) in z.as_slice().iter().enumerate() {
            for (b, &j) in z.as_slice().iter().enumerate() {
                grad[(i, j)] -= inv[(a, b)];
            }
        }
    }
    Ok(linalg::symmetrize(&grad))
}

/// Greedy approximate MAP: starting from the empty set, repeatedly add the
/// item with the largest positive gain in `ln det(L_z)`; ties go to the
/// smallest index.
///
/// Gains are tracked with an incremental Cholesky factor, so each step
/// costs `O(T |z|)`.
pub fn map_greedy(k: &DppKernel) -> SubsetIndex {
    let mut selected: Vec<usize> = map_greedy_steps(k).into_iter().map(|s| s.index).collect();
    selected.sort_unstable();
    SubsetIndex(selected)
}

/// One accepted greedy step: the item added and its `ln det` gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyStep {
    pub index: usize,
    pub gain: f64,
}

/// The greedy MAP selection in the order items were added.
pub fn map_greedy_steps(k: &DppKernel) -> Vec<GreedyStep> {
    let n = k.size();
    let l = &k.l;
    // residual variance of each candidate given the current selection
    let mut residual: Vec<f64> = l.diagonal();
    let mut proj: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut chosen = vec![false; n];
    let mut selected = Vec::new();

    loop {
        let mut best: Option<usize> = None;
        for j in 0..n {
            if chosen[j] || residual[j] <= 1.0 {
                continue;
            }
            if best.is_none_or(|b| residual[j] > residual[b]) {
                best = Some(j);
            }
        }
        let Some(pick) = best else { break };
        chosen[pick] = true;
        selected.push(GreedyStep {
            index: pick,
            gain: residual[pick].ln(),
        });

        let pivot = residual[pick].sqrt();
        let pick_proj = proj[pick].clone();
        for j in 0..n {
            if chosen[j] {
                continue;
            }
            let dot: f64 = proj[j].iter().zip(&pick_proj).map(|(a, b)| a * b).sum();
            let e = (l[(j, pick)] - dot) / pivot;
            proj[j].push(e);
            residual[j] -= e * e;
        }
    }
    selected
}

fn mask_to_indices(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

fn minor_det(l: &Matrix, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(1.0);
    }
    linalg::det(&l.principal_minor(idx))
}

/// Exact MAP by enumerating all `2^T` subsets; `det(L_empty) = 1`. Ties
/// resolve to the lexicographically smallest subset. Limited to `T <= 20`.
pub fn map_exhaustive(k: &DppKernel) -> Result<SubsetIndex> {
    let n = k.size();
    if n > EXHAUSTIVE_MAP_LIMIT {
        return Err(Error::SizeGuard(format!(
            "exhaustive MAP over {n} items exceeds the limit of {EXHAUSTIVE_MAP_LIMIT}"
        )));
    }
    let mut best_det = 1.0f64;
    let mut best: Vec<usize> = Vec::new();
    for mask in 1u64..(1u64 << n) {
        let idx = mask_to_indices(mask, n);
        let d = minor_det(&k.l, &idx)?;
        let tol = TIE_RTOL * best_det.abs().max(f64::MIN_POSITIVE);
        if d > best_det + tol || ((d - best_det).abs() <= tol && idx < best) {
            best_det = d;
            best = idx;
        }
    }
    Ok(SubsetIndex(best))
}

/// `|sum_z det(L_z) - det(L + I)| / det(L + I)`, by enumeration. Limited
/// to `T <= 16`.
pub fn normalization_check(k: &DppKernel) -> Result<f64> {
    let n = k.size();
    if n > NORMALIZATION_LIMIT {
        return Err(Error::SizeGuard(format!(
            "normalization check over {n} items exceeds the limit of {NORMALIZATION_LIMIT}"
        )));
    }
    let mut total = 0.0;
    for mask in 0u64..(1u64 << n) {
        total += minor_det(&k.l, &mask_to_indices(mask, n))?;
    }
    let norm = linalg::det(&k.l.add_diagonal(1.0))?;
    Ok((total - norm).abs() / norm)
}

/// `det(L_z)` for a subset; convenience for comparing MAP solutions.
pub fn subset_det(k: &DppKernel, z: &SubsetIndex) -> Result<f64> {
    z.check_range(k.size())?;
    minor_det(&k.l, z.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let g = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        linalg::symmetrize(&matmul(&g, &g.transpose()).unwrap())
    }

    fn subset(v: &[usize]) -> SubsetIndex {
        SubsetIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn log_prob_identity() {
        let k = DppKernel::new(Matrix::identity(3)).unwrap();
        let v = dpp_log_prob(&k, &subset(&[1])).unwrap();
        assert!((v + 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((v + 2.0794).abs() < 1e-4);
    }

    #[test]
    fn log_prob_duplicate_rows_hit_floor() {
        let l = Matrix::from_rows(&[[1.0, 1.0, 0.2], [1.0, 1.0, 0.2], [0.2, 0.2, 1.0]]);
        let k = DppKernel::new(l).unwrap();
        assert_eq!(dpp_log_prob(&k, &subset(&[0, 1])).unwrap(), LOG_ZERO_FLOOR);
        assert!(dpp_log_prob(&k, &subset(&[0, 2])).unwrap() > LOG_ZERO_FLOOR);
    }

    #[test]
    fn log_prob_out_of_range() {
        let k = DppKernel::new(Matrix::identity(2)).unwrap();
        assert!(matches!(
            dpp_log_prob(&k, &subset(&[2])).unwrap_err(),
            Error::Contract(_)
        ));
    }

    #[test]
    fn log_prob_matches_determinant_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = random_psd(&mut rng, 8);
        let k = DppKernel::new(l.clone()).unwrap();
        let z = subset(&[0, 3, 5]);
        let ratio = linalg::det(&l.principal_minor(z.as_slice())).unwrap()
            / linalg::det(&l.add_diagonal(1.0)).unwrap();
        let p = dpp_log_prob(&k, &z).unwrap().exp();
        assert!(((p - ratio) / ratio).abs() < 1e-8);
    }

    #[test]
    fn nll_grad_hand_cases() {
        let k = DppKernel::new(Matrix::identity(2)).unwrap();
        let g = dpp_nll_grad(&k, &subset(&[0])).unwrap();
        let expected = Matrix::from_rows(&[[-0.5, 0.0], [0.0, 0.5]]);
        assert!(g.sub(&expected).unwrap().max_abs() < 1e-15);
        let g = dpp_nll_grad(&k, &subset(&[0, 1])).unwrap();
        let expected = Matrix::identity(2).scale(-0.5);
        assert!(g.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn nll_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = random_psd(&mut rng, 6).add_diagonal(0.2);
        let z = subset(&[1, 2, 4]);
        let g = dpp_nll_grad(&DppKernel::new(l.clone()).unwrap(), &z).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            for j in i..6 {
                // symmetric perturbation of (i, j) and (j, i)
                let bump = |s: f64| {
                    let mut m = l.clone();
                    m[(i, j)] += s;
                    if i != j {
                        m[(j, i)] += s;
                    }
                    -dpp_log_prob(&DppKernel::new(m).unwrap(), &z).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] };
                let rel = (fd - analytic).abs() / analytic.abs().max(fd.abs()).max(1e-12);
                assert!(
                    rel < 1e-5 || (fd - analytic).abs() < 1e-9,
                    "({i},{j}) {fd} {analytic}"
                );
            }
        }
    }

    #[test]
    fn nll_grad_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let l = random_psd(&mut rng, 7).add_diagonal(0.1);
        let g = dpp_nll_grad(&DppKernel::new(l).unwrap(), &subset(&[0, 6])).unwrap();
        assert!(g.sub(&g.transpose()).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn greedy_hand_cases() {
        let k = DppKernel::new(Matrix::diag(&[3.0, 0.5, 2.0])).unwrap();
        assert_eq!(map_greedy(&k), subset(&[0, 2]));
        let k = DppKernel::new(Matrix::identity(4)).unwrap();
        assert_eq!(map_greedy(&k), SubsetIndex::empty());
    }

    #[test]
    fn greedy_gains_are_positive_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let n = rng.random_range(1..=10);
            let l = random_psd(&mut rng, n).scale(2.0);
            let k = DppKernel::new(l.clone()).unwrap();
            let mut current: Vec<usize> = Vec::new();
            for step in map_greedy_steps(&k) {
                assert!(step.gain > 0.0);
                let before = minor_det(&l, &current).unwrap();
                current.push(step.index);
                current.sort_unstable();
                let after = minor_det(&l, &current).unwrap();
                assert!((step.gain - (after / before).ln()).abs() < 1e-8);
            }
            assert_eq!(map_greedy(&k).as_slice(), current.as_slice());
        }
    }

    #[test]
    fn exhaustive_hand_cases() {
        let k = DppKernel::new(Matrix::diag(&[3.0, 0.5, 2.0])).unwrap();
        assert_eq!(map_exhaustive(&k).unwrap(), subset(&[0, 2]));
        let k = DppKernel::new(Matrix::identity(3)).unwrap();
        assert_eq!(map_exhaustive(&k).unwrap(), SubsetIndex::empty());
        let k = DppKernel::new(Matrix::from_rows(&[[2.0, 1.9], [1.9, 2.0]])).unwrap();
        assert_eq!(map_exhaustive(&k).unwrap(), subset(&[0]));
    }

    #[test]
    fn exhaustive_size_guard() {
        let k = DppKernel::new(Matrix::identity(21)).unwrap();
        assert!(matches!(map_exhaustive(&k).unwrap_err(), Error::SizeGuard(_)));
        let k = DppKernel::new(Matrix::identity(17)).unwrap();
        assert!(matches!(
            normalization_check(&k).unwrap_err(),
            Error::SizeGuard(_)
        ));
    }

    #[test]
    fn normalization_fixtures() {
        let k = DppKernel::new(Matrix::identity(3)).unwrap();
        assert!(normalization_check(&k).unwrap() < 1e-15);
        let k = DppKernel::new(Matrix::diag(&[0.7, 2.5])).unwrap();
        assert!(normalization_check(&k).unwrap() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = DppKernel::new(random_psd(&mut rng, 10)).unwrap();
        assert!(normalization_check(&k).unwrap() < 1e-8);
    }

    #[test]
    fn checked_kernel_rejects_indefinite() {
        assert!(DppKernel::new_checked(Matrix::diag(&[1.0, -0.5])).is_err());
        assert!(DppKernel::new_checked(Matrix::diag(&[1.0, 0.0])).is_ok());
    }

    #[test]
    fn factored_log_prob_matches_kernel_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..8 {
            let phi =
                Matrix::from_vec(n, 5, (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let l = Matrix::from_vec(
                n,
                n,
                (0..n * n)
                    .map(|e| {
                        let (i, j) = (e / n, e % n);
                        q[i] * q[j] * phi.row(i).iter().zip(phi.row(j)).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect(),
            )
            .unwrap();
            let k = DppKernel::new(linalg::symmetrize(&l)).unwrap();
            for z in [vec![0], vec![0, n - 1], (0..n.min(4)).collect()] {
                let z = subset(&z);
                let a = dpp_log_prob(&k, &z).unwrap();
                let b = dpp_log_prob_factored(&k, &q, &phi, &z).unwrap();
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "n={n}: {a} vs {b}");
            }
        }
        // more frames than embedding dimensions: the minor is singular
        let phi = Matrix::from_rows(&[[1.0], [2.0]]);
        let k = DppKernel::new(phi.matmul_t(&phi).unwrap()).unwrap();
        let v = dpp_log_prob_factored(&k, &[1.0, 1.0], &phi, &subset(&[0, 1])).unwrap();
        assert_eq!(v, LOG_ZERO_FLOOR);
    }

    #[test]
    fn gram_pivots_give_the_gram_determinant() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, 1.0, -1.0]]);
        let gram = a.matmul_t(&a).unwrap();
        let prod: f64 = linalg::gram_pivots(&a).iter().product();
        assert!((prod - linalg::det(&gram).unwrap()).abs() < 1e-12);
        assert_eq!(linalg::gram_pivots(&Matrix::from_rows(&[[3.0], [1.0]]))[1], 0.0);
    }
}
