//! Which modalities the graph explainer picks, bucketed by how many
//! features an explanation selects.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::explain::GraphExplanation;
use crate::features::{FeatureLayout, ModalityTag};

/// Tag counts and their relative frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalityCounts {
    pub n_explanations: usize,
    pub n_features: usize,
    pub metadata: usize,
    pub graph: usize,
    pub text: usize,
    pub noise: usize,
}

impl ModalityCounts {
    fn add(&mut self, tag: ModalityTag) {
        self.n_features += 1;
        match tag {
            ModalityTag::Metadata => self.metadata += 1,
            ModalityTag::Structural => self.graph += 1,
            ModalityTag::Text => self.text += 1,
            ModalityTag::Noise => self.noise += 1,
        }
    }

    pub fn count(&self, tag: ModalityTag) -> usize {
        match tag {
            ModalityTag::Metadata => self.metadata,
            ModalityTag::Structural => self.graph,
            ModalityTag::Text => self.text,
            ModalityTag::Noise => self.noise,
        }
    }

    /// Share of selected features with `tag`; zero for an empty bucket.
    pub fn frequency(&self, tag: ModalityTag) -> f64 {
        if self.n_features == 0 {
            0.0
        } else {
            self.count(tag) as f64 / self.n_features as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    /// Explanations that selected nothing.
    pub n_empty: usize,
    pub one: ModalityCounts,
    pub two: ModalityCounts,
    pub three: ModalityCounts,
    /// More than three selected features.
    pub more: ModalityCounts,
    pub overall: ModalityCounts,
}

impl ModalityReport {
    pub fn buckets(&self) -> [(&'static str, &ModalityCounts); 5] {
        [
            ("1", &self.one),
            ("2", &self.two),
            ("3", &self.three),
            (">3", &self.more),
            ("all", &self.overall),
        ]
    }
}

pub fn modality_distribution(explanations: &[GraphExplanation], layout: &FeatureLayout) -> Result<ModalityReport, EvalError> {
    let mut r = ModalityReport::default();
    for e in explanations {
        let mismatch = || EvalError::LayoutMismatch { target: e.target.clone() };
        if e.beta.len() != layout.total_dim {
            return Err(mismatch());
        }
        let tags: Vec<ModalityTag> = e
            .selected
            .iter()
            .map(|s| match layout.tag(s.dim) {
                Some(t) if t == s.modality => Ok(t),
                _ => Err(mismatch()),
            })
            .collect::<Result<_, _>>()?;
        let bucket = match tags.len() {
            0 => {
                r.n_empty += 1;
                continue;
            }
            1 => &mut r.one,
            2 => &mut r.two,
            3 => &mut r.three,
            _ => &mut r.more,
        };
        bucket.n_explanations += 1;
        r.overall.n_explanations += 1;
        for &t in &tags {
            bucket.add(t);
            r.overall.add(t);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::SelectedFeature;
    use crate::features::Modality;
    use alloc::vec;

    fn expl(layout: &FeatureLayout, dims: &[usize]) -> GraphExplanation {
        let mut beta = vec![0.0; layout.total_dim];
        let selected = dims
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                beta[d] = 1.0 / (i + 1) as f64;
                SelectedFeature {
                    dim: d,
                    modality: layout.tag(d).unwrap(),
                    beta: beta[d],
                }
            })
            .collect();
        GraphExplanation {
            target: "t".into(),
            k: 2,
            rho: 0.0,
            beta,
            selected,
            n_neighbors: 3,
            converged: true,
            sweeps: 1,
        }
    }

    #[test]
    fn single_metadata_bucket() {
        let l = FeatureLayout::new(Modality::Multimodal, 4, 0);
        let ex: Vec<_> = (0..5).map(|i| expl(&l, &[i % 3])).collect();
        let r = modality_distribution(&ex, &l).unwrap();
        assert_eq!(r.one.n_explanations, 5);
        assert_eq!(r.one.frequency(ModalityTag::Metadata), 1.0);
        assert_eq!(r.two, ModalityCounts::default());
    }

    #[test]
    fn empty_list() {
        let l = FeatureLayout::new(Modality::Graph, 0, 0);
        assert_eq!(modality_distribution(&[], &l).unwrap(), ModalityReport::default());
    }

    #[test]
    fn layout_mismatch() {
        let l = FeatureLayout::new(Modality::Multimodal, 4, 0);
        let other = FeatureLayout::new(Modality::Graph, 0, 0);
        let e = expl(&l, &[12]);
        assert!(matches!(
            modality_distribution(&[e], &other),
            Err(EvalError::LayoutMismatch { .. })
        ));
    }
}
