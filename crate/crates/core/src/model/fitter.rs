use super::glm::fit_glm;
use super::linear::ReducedGaussian;
use super::{Dataset, Family, FittedModel, ModelSpec};
use crate::error::Result;

/// Fits arbitrary submodels of one dataset.
///
/// Gaussian fits reuse a single orthogonal factorisation of the full design;
/// GLM fits run IRLS per submodel. Shareable across threads.
#[derive(Debug, Clone)]
pub struct ModelFitter<'a> {
    data: &'a Dataset,
    gaussian: Option<ReducedGaussian>,
}

impl<'a> ModelFitter<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let gaussian = (data.family() == Family::Gaussian).then(|| ReducedGaussian::new(data));
        Self { data, gaussian }
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn fit(&self, spec: &ModelSpec) -> Result<FittedModel> {
        match &self.gaussian {
            Some(reduced) => reduced.fit(self.data, spec),
            None => fit_glm(self.data, spec),
        }
    }
}
