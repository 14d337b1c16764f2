//! Posterior mixtures of univariate Gaussians.

use crate::algebra::density::normal_pdf;
use crate::model::VarId;

/// One mixture component, labeled by the discrete configuration it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
    /// Sorted (variable, state) pairs of the surviving conditioning set.
    pub label: Vec<(VarId, usize)>,
}

/// A weighted mixture of univariate normals; weights sum to one and
/// components are ordered lexicographically by label.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    /// Normalize weights and drop zero-weight components. Errors if the
    /// total weight is not positive and finite.
    pub fn new(mut components: Vec<MixtureComponent>) -> Result<GaussianMixture, String> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(format!("mixture weight total {total} is not normalizable"));
        }
        components.retain(|c| c.weight > 0.0);
        for c in &mut components {
            c.weight /= total;
        }
        components.sort_by(|a, b| a.label.cmp(&b.label));
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal_pdf(y, c.mean, c.variance))
            .sum()
    }

    /// Overall mean of the mixture (weak-marginal convenience).
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    /// Overall variance of the mixture.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + c.mean * c.mean))
            .sum::<f64>()
            - m * m
    }

    /// Merge components whose means and variances agree within `tol`,
    /// summing weights. Labels collapse to the first representative's.
    pub fn collapse(&self, tol: f64) -> GaussianMixture {
        let mut merged: Vec<MixtureComponent> = Vec::new();
        for c in &self.components {
            match merged
                .iter_mut()
                .find(|m| (m.mean - c.mean).abs() <= tol && (m.variance - c.variance).abs() <= tol)
            {
                Some(m) => m.weight += c.weight,
                None => merged.push(c.clone()),
            }
        }
        GaussianMixture { components: merged }
    }
}
