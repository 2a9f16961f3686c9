use crate::linalg::Matrix;

/// A fixed, ordered collection of learnable matrices.
///
/// The order of [`ParamSet::params`] must match the order in which the
/// owner binds its matrices to a tape, so gradient bundles line up.
pub trait ParamSet {
    fn params(&self) -> Vec<(String, &Matrix)>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|(_, m)| m.shape()).collect()
    }

    fn scalar_count(&self) -> usize {
        self.params().iter().map(|(_, m)| m.as_slice().len()).sum()
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, params: Vec<(String, &'a Matrix)>) -> Vec<(String, &'a Matrix)> {
    params
        .into_iter()
        .map(|(name, m)| (format!("{prefix}.{name}"), m))
        .collect()
}
