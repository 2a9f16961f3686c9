use crate::error::{Error, Result};

use super::params::ParamSet;
use super::tape::GradientBundle;

const ROUNDING_ULPS: f64 = 8.0;

/// Tolerances for comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    /// Absolute tolerance used when both derivatives are below
    /// `small_threshold`, or below what the step can resolve given the
    /// rounding error of the loss, in magnitude.
    pub abs_tol: f64,
    pub small_threshold: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-7,
            small_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Absolute tolerance applied to entries too small for a relative test.
    pub rounding_floor: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }
}

/// Compares `analytic` against central finite differences of `loss`,
/// perturbing every scalar parameter of `params` in turn.
pub fn check_gradients<P, F>(
    params: &P,
    analytic: &GradientBundle,
    loss: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    P: ParamSet + Clone,
    F: Fn(&P) -> Result<f64>,
{
    let names: Vec<String> = params.params().into_iter().map(|(n, _)| n).collect();
    if names.len() != analytic.grads.len() {
        return Err(Error::shape(format!(
            "{} parameters but {} gradients",
            names.len(),
            analytic.grads.len()
        )));
    }
    // Central differences cannot resolve derivatives below the rounding
    // error of the two loss evaluations, roughly eps * |f| / step.
    let f0 = loss(params)?;
    let floor = cfg
        .abs_tol
        .max(ROUNDING_ULPS * f64::EPSILON * f0.abs().max(1.0) / cfg.step);
    let threshold = cfg.small_threshold.max(floor / cfg.rel_tol);
    let mut report = GradCheckReport {
        rounding_floor: floor,
        ..GradCheckReport::default()
    };
    let mut probe = params.clone();
    for (slot, name) in names.iter().enumerate() {
        let len = analytic.grads[slot].as_slice().len();
        for idx in 0..len {
            let original = probe.params_mut()[slot].as_slice()[idx];
            probe.params_mut()[slot].as_mut_slice()[idx] = original + cfg.step;
            let up = loss(&probe)?;
            probe.params_mut()[slot].as_mut_slice()[idx] = original - cfg.step;
            let down = loss(&probe)?;
            probe.params_mut()[slot].as_mut_slice()[idx] = original;

            let numeric = (up - down) / (2.0 * cfg.step);
            let a = analytic.grads[slot].as_slice()[idx];
            let diff = (a - numeric).abs();
            let ok = if a.abs().max(numeric.abs()) < threshold {
                diff < floor
            } else {
                let rel = diff / a.abs().max(numeric.abs());
                report.max_rel_err = report.max_rel_err.max(rel);
                rel < cfg.rel_tol
            };
            report.checked += 1;
            if !ok {
                report.failures.push(GradMismatch {
                    param: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[derive(Clone)]
    struct Pair(Matrix);

    impl ParamSet for Pair {
        fn params(&self) -> Vec<(String, &Matrix)> {
            vec![("p".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.0]
        }
    }

    // f(a, b) = offset + a^3 + 1e-3 b
    fn loss(p: &Pair, offset: f64) -> Result<f64> {
        let v = p.0.as_slice();
        Ok(offset + v[0].powi(3) + 1e-3 * v[1])
    }

    fn grads(a: f64, db: f64) -> GradientBundle {
        GradientBundle {
            grads: vec![Matrix::row_vector(&[3.0 * a * a, db])],
        }
    }

    #[test]
    fn accepts_exact_and_rejects_wrong_gradients() {
        let p = Pair(Matrix::row_vector(&[0.7, 2.0]));
        let cfg = GradCheckConfig::default();
        let ok = check_gradients(&p, &grads(0.7, 1e-3), |q| loss(q, 0.0), &cfg).unwrap();
        assert!(ok.passed(), "{:?}", ok.failures);
        assert!(ok.max_rel_err < 1e-8);
        let bad = check_gradients(&p, &grads(0.7, 1.01e-3), |q| loss(q, 0.0), &cfg).unwrap();
        assert_eq!(bad.failures.len(), 1);
        assert_eq!(bad.failures[0].index, 1);
    }

    #[test]
    fn rounding_floor_scales_with_the_loss() {
        let p = Pair(Matrix::row_vector(&[0.7, 2.0]));
        let cfg = GradCheckConfig::default();
        let small = check_gradients(&p, &grads(0.7, 1e-3), |q| loss(q, 0.0), &cfg).unwrap();
        let large = check_gradients(&p, &grads(0.7, 1e-3), |q| loss(q, 1e6), &cfg).unwrap();
        assert!(large.rounding_floor > 1e3 * small.rounding_floor);
        // a 1e-3 derivative on top of a 1e6 loss is below what a 1e-5 step resolves
        assert!(large.passed());
    }
}
