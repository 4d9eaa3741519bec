use crate::augment::Image;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::Labeler;

use super::mlp::MlpModel;

/// Nearest-class-mean classifier over embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeClassifier {
    prototypes: Vec<Vec<f64>>,
}

impl PrototypeClassifier {
    /// One mean embedding per class; every class needs at least one example.
    pub fn fit(embeddings: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::Dimension("embeddings and labels differ in length".into()));
        }
        let dim = embeddings.first().map_or(0, Vec::len);
        if embeddings.iter().any(|e| e.len() != dim) {
            return Err(Error::Dimension("ragged embeddings".into()));
        }
        let mut sums = vec![vec![0.0; dim]; num_classes];
        let mut counts = vec![0usize; num_classes];
        for (e, &y) in embeddings.iter().zip(labels) {
            if y >= num_classes {
                return Err(Error::InvalidLabel { label: y, num_classes });
            }
            counts[y] += 1;
            for (s, v) in sums[y].iter_mut().zip(e) {
                *s += v;
            }
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Coverage(c));
        }
        for (s, &n) in sums.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
        Ok(Self { prototypes: sums })
    }

    pub fn prototypes(&self) -> &[Vec<f64>] {
        &self.prototypes
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.len()
    }

    /// Nearest prototype in Euclidean distance; ties go to the lowest class.
    pub fn classify(&self, embedding: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, p) in self.prototypes.iter().enumerate() {
            let d: f64 = p.iter().zip(embedding).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }
}

/// An encoder whose embeddings are read out by a prototype classifier.
#[derive(Debug, Clone)]
pub struct AlignedModel {
    encoder: MlpModel,
    prototypes: PrototypeClassifier,
}

impl AlignedModel {
    pub fn prototypes(&self) -> &PrototypeClassifier {
        &self.prototypes
    }

    pub fn encoder(&self) -> &MlpModel {
        &self.encoder
    }
}

impl Labeler for AlignedModel {
    fn predict(&self, img: &Image) -> usize {
        self.prototypes.classify(&self.encoder.embed(img))
    }
}

/// Aligns `encoder` to the target classes through per-class mean
/// embeddings of the labeled set.
pub fn build_prototype_classifier(encoder: &MlpModel, labeled: &Dataset) -> Result<AlignedModel> {
    let labels = labeled.require_labels()?;
    let embeddings: Vec<Vec<f64>> = labeled.images().iter().map(|i| encoder.embed(i)).collect();
    let prototypes = PrototypeClassifier::fit(&embeddings, labels, labeled.num_classes())?;
    Ok(AlignedModel {
        encoder: encoder.clone(),
        prototypes,
    })
}
