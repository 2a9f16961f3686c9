//! Second-order feature alignment between datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::io::{read_string, write_atomic};
use crate::error::{Error, Result};
use crate::linalg::{covariance, eig_reconstruct, matmul, sym_eig, Matrix};

pub const TRANSFORM_VERSION: u32 = 1;
const RIDGE_FRACTION: f64 = 1e-3;

/// Maps a source row vector `v` to `v * matrix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTransform {
    pub matrix: Matrix,
    /// Source and target dataset names, in that order.
    pub fitted_on: Vec<String>,
    pub ridge: f64,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    version: u32,
    #[serde(flatten)]
    transform: LinearTransform,
}

impl LinearTransform {
    pub fn identity(d: usize) -> Self {
        Self {
            matrix: Matrix::identity(d),
            fitted_on: Vec::new(),
            ridge: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn validate(&self) -> Result<()> {
        let (r, c) = self.matrix.shape();
        if r != c || self.matrix.as_slice().len() != r * c {
            return Err(Error::shape(format!(
                "transform matrix is {r}x{c}, expected square"
            )));
        }
        if !self.matrix.is_finite() {
            return Err(Error::Numeric("transform matrix has non-finite entries".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let stored = Stored {
            version: TRANSFORM_VERSION,
            transform: self.clone(),
        };
        serde_json::to_string_pretty(&stored).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            offset: line_col_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != TRANSFORM_VERSION {
            return Err(Error::Version {
                context: context.to_string(),
                found,
                expected: TRANSFORM_VERSION,
            });
        }
        let stored: Stored = serde_json::from_value(value).map_err(|e| Error::Parse {
            context: context.to_string(),
            offset: 0,
            message: e.to_string(),
        })?;
        stored.transform.validate()?;
        Ok(stored.transform)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&read_string(path)?, &path.display().to_string())
    }
}

fn line_col_offset(text: &str, line: usize, col: usize) -> usize {
    let before: usize = text
        .lines()
        .take(line.saturating_sub(1))
        .map(|l| l.len() + 1)
        .sum();
    before + col.saturating_sub(1)
}

/// `1e-3 * trace(C) / d`.
pub fn default_ridge(cov: &Matrix) -> f64 {
    RIDGE_FRACTION * cov.trace() / cov.rows().max(1) as f64
}

fn check_pair(source: &Matrix, target: &Matrix) -> Result<()> {
    if source.cols() != target.cols() {
        return Err(Error::shape(format!(
            "source has {} feature columns, target has {}",
            source.cols(),
            target.cols()
        )));
    }
    Ok(())
}

/// `(C_s + ridge I)^{-1/2} (C_t + ridge I)^{1/2}` from sample covariances.
pub fn fit_align(source: &Matrix, target: &Matrix, ridge: f64) -> Result<LinearTransform> {
    check_pair(source, target)?;
    fit_align_cov(&covariance(source)?, &covariance(target)?, ridge)
}

pub fn fit_align_cov(cs: &Matrix, ct: &Matrix, ridge: f64) -> Result<LinearTransform> {
    if cs.shape() != ct.shape() || !cs.is_square() {
        return Err(Error::shape("covariances must be square and of equal size"));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Config(format!("ridge must be >= 0, got {ridge}")));
    }
    let (ls, vs) = sym_eig(&cs.add_diagonal(ridge))?;
    let (lt, vt) = sym_eig(&ct.add_diagonal(ridge))?;
    if let Some(&min) = ls.iter().min_by(|a, b| a.total_cmp(b)) {
        if min <= 0.0 {
            return Err(Error::Numeric(format!(
                "source covariance is singular (smallest eigenvalue {min:e}); use a positive ridge"
            )));
        }
    }
    let inv_sqrt = eig_reconstruct(&ls, &vs, |l| 1.0 / l.sqrt());
    let sqrt = eig_reconstruct(&lt, &vt, |l| l.max(0.0).sqrt());
    let transform = LinearTransform {
        matrix: matmul(&inv_sqrt, &sqrt)?,
        fitted_on: Vec::new(),
        ridge,
    };
    transform.validate()?;
    Ok(transform)
}

/// Multiplies every feature row by the transform matrix.
pub fn apply_transform(t: &LinearTransform, x: &Matrix) -> Result<Matrix> {
    if x.cols() != t.dim() {
        return Err(Error::shape(format!(
            "features have {} columns, transform expects {}",
            x.cols(),
            t.dim()
        )));
    }
    matmul(x, &t.matrix)
}
