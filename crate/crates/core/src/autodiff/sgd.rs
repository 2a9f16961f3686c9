use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::params::ParamSet;
use super::tape::GradientBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs_max: usize,
    /// Stop after this many consecutive epochs of falling validation F.
    pub patience_k: usize,
    pub momentum: f64,
    /// Gradients are rescaled to at most this global L2 norm.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            epochs_max: 200,
            patience_k: 5,
            momentum: 0.9,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config(format!(
                "gradient clip must be > 0, got {}",
                self.grad_clip
            )));
        }
        Ok(())
    }
}

/// Momentum buffers, one per parameter matrix. Created lazily on the first
/// update.
#[derive(Debug, Clone, Default)]
pub struct SgdState {
    velocity: Vec<Matrix>,
}

impl SgdState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One momentum-SGD step: clip `grads` to `grad_clip` global norm, then
/// `v = momentum * v + g` and `p -= learning_rate * v`.
pub fn sgd_update<P: ParamSet + ?Sized>(
    params: &mut P,
    grads: &GradientBundle,
    state: &mut SgdState,
    cfg: &SgdConfig,
) -> Result<()> {
    let named = params.params();
    if named.len() != grads.grads.len() {
        return Err(Error::shape(format!(
            "{} parameters but {} gradients",
            named.len(),
            grads.grads.len()
        )));
    }
    for ((name, p), g) in named.iter().zip(&grads.grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!(
                "gradient for {name} is {:?}, parameter is {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if let Some(pos) = g.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in {name} at flat index {pos}"
            )));
        }
    }
    if state.velocity.is_empty() {
        state.velocity = grads
            .grads
            .iter()
            .map(|g| Matrix::zeros(g.rows(), g.cols()))
            .collect();
    }

    let norm = grads.global_norm();
    let clip = if norm > cfg.grad_clip {
        cfg.grad_clip / norm
    } else {
        1.0
    };
    for ((p, g), v) in params
        .params_mut()
        .into_iter()
        .zip(&grads.grads)
        .zip(state.velocity.iter_mut())
    {
        for ((pv, gv), vv) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(v.as_mut_slice())
        {
            *vv = cfg.momentum * *vv + clip * gv;
            *pv -= cfg.learning_rate * *vv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(Matrix);

    impl ParamSet for Scalar {
        fn params(&self) -> Vec<(String, &Matrix)> {
            vec![("p".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.0]
        }
    }

    fn bundle(v: f64) -> GradientBundle {
        GradientBundle {
            grads: vec![Matrix::row_vector(&[v])],
        }
    }

    fn plain(lr: f64) -> SgdConfig {
        SgdConfig {
            learning_rate: lr,
            momentum: 0.0,
            ..SgdConfig::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Scalar(Matrix::row_vector(&[1.25]));
        sgd_update(&mut p, &bundle(0.0), &mut SgdState::new(), &SgdConfig::default()).unwrap();
        assert_eq!(p.0[(0, 0)], 1.25);
    }

    #[test]
    fn unit_rate_subtracts_gradient() {
        let mut p = Scalar(Matrix::row_vector(&[1.0]));
        sgd_update(&mut p, &bundle(0.75), &mut SgdState::new(), &plain(1.0)).unwrap();
        assert_eq!(p.0[(0, 0)], 0.25);
    }

    #[test]
    fn quadratic_contracts() {
        let mut p = Scalar(Matrix::row_vector(&[0.0]));
        let mut state = SgdState::new();
        for _ in 0..20 {
            let g = p.0[(0, 0)] - 3.0;
            sgd_update(&mut p, &bundle(g), &mut state, &plain(0.5)).unwrap();
        }
        assert!((p.0[(0, 0)] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn clipping_limits_step() {
        let mut p = Scalar(Matrix::row_vector(&[0.0]));
        sgd_update(&mut p, &bundle(100.0), &mut SgdState::new(), &plain(1.0)).unwrap();
        assert_eq!(p.0[(0, 0)], -5.0);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = Scalar(Matrix::row_vector(&[0.0]));
        let err = sgd_update(&mut p, &bundle(f64::NAN), &mut SgdState::new(), &plain(1.0)).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains('p')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig::default().validate().is_ok());
        assert!(plain(0.0).validate().is_err());
        let bad = SgdConfig {
            momentum: 1.0,
            ..SgdConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
