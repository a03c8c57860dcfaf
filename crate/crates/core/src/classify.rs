//! Softmax margin routing with a weighted k-nearest-neighbour fallback.

use crate::error::{Error, Result};
use crate::net::{embed, NetworkConfig, NetworkParams, SampleFeatures, Tensor};
use crate::par;

pub const GALLERY_EMBEDDINGS: &str = "gallery.embeddings";
pub const GALLERY_LABELS: &str = "gallery.labels";

/// Training embeddings and their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Gallery {
    embeddings: Vec<Vec<f64>>,
    labels: Vec<usize>,
    dim: usize,
}

impl Gallery {
    pub fn new(embeddings: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} embeddings but {} labels",
                embeddings.len(),
                labels.len()
            )));
        }
        let dim = embeddings.first().map_or(0, Vec::len);
        if let Some(i) = embeddings.iter().position(|e| e.len() != dim) {
            return Err(Error::Dimension(format!(
                "embedding {i} has {} values, expected {dim}",
                embeddings[i].len()
            )));
        }
        Ok(Gallery {
            embeddings,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let flat = self.embeddings.iter().flatten().copied().collect();
        vec![
            (
                GALLERY_EMBEDDINGS.to_string(),
                Tensor::from_vec(&[self.len(), self.dim], flat).unwrap(),
            ),
            (
                GALLERY_LABELS.to_string(),
                Tensor::from_vec(&[self.len()], self.labels.iter().map(|&l| l as f64).collect()).unwrap(),
            ),
        ]
    }

    pub fn from_tensors(embeddings: &Tensor, labels: &Tensor) -> Result<Self> {
        let (&[n, dim], &[m]) = (embeddings.shape(), labels.shape()) else {
            return Err(Error::Data(format!(
                "gallery tensors have shapes {:?} and {:?}",
                embeddings.shape(),
                labels.shape()
            )));
        };
        if n != m {
            return Err(Error::Data(format!("gallery has {n} embeddings but {m} labels")));
        }
        let labels = labels
            .data()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(Error::Data(format!("invalid gallery label {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let embeddings = if dim == 0 {
            vec![Vec::new(); n]
        } else {
            embeddings.data().chunks(dim).map(<[f64]>::to_vec).collect()
        };
        Gallery::new(embeddings, labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnParams {
    pub k: usize,
    /// Minimum top-2 Softmax margin for accepting the argmax.
    pub margin_tau: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 10,
            margin_tau: 0.15,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.margin_tau) {
            return Err(Error::Param(format!("margin_tau {} outside [0, 1]", self.margin_tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Softmax,
    Knn,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Softmax => "softmax",
            Route::Knn => "knn",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub label: usize,
    /// The Softmax vector when routed; for a bare [`knn_predict`] call, the
    /// normalized neighbour votes.
    pub probabilities: Vec<f64>,
    pub route: Route,
    /// Gallery indices of the voting neighbours (KNN route only).
    pub neighbor_ids: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftmaxOutcome {
    Accept(usize),
    Ambiguous,
}

/// Lowest index among the maxima.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_decide(probs: &[f64], params: &KnnParams) -> Result<SoftmaxOutcome> {
    if probs.is_empty() {
        return Err(Error::Param("empty probability vector".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Param(format!("probabilities are not normalized (sum {sum})")));
    }
    let top = argmax(probs);
    let second = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &p)| p)
        .fold(0.0, f64::max);
    if probs[top] - second < params.margin_tau {
        Ok(SoftmaxOutcome::Ambiguous)
    } else {
        Ok(SoftmaxOutcome::Accept(top))
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Weighted vote of the `k` nearest gallery points.
///
/// Distances are divided by the `(k+1)`-th nearest distance (the `k`-th when
/// the gallery has no more points) and each neighbour votes with the inverse
/// square of its normalized distance. A neighbour at distance zero decides
/// alone.
pub fn knn_predict(gallery: &Gallery, query: &[f64], params: &KnnParams) -> Result<Decision> {
    params.validate()?;
    if gallery.is_empty() {
        return Err(Error::Param("empty gallery".into()));
    }
    if query.len() != gallery.dim {
        return Err(Error::Dimension(format!(
            "query has {} values, gallery dimension is {}",
            query.len(),
            gallery.dim
        )));
    }
    let classes = gallery.num_classes();
    let mut order: Vec<(f64, usize, usize)> = gallery
        .embeddings
        .iter()
        .zip(&gallery.labels)
        .enumerate()
        .map(|(i, (e, &l))| (distance(e, query), l, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut votes = vec![0.0; classes];
    if order[0].0 == 0.0 {
        let (_, label, id) = order[0];
        votes[label] = 1.0;
        return Ok(Decision {
            label,
            probabilities: votes,
            route: Route::Knn,
            neighbor_ids: Some(vec![id]),
        });
    }
    let k = params.k.min(order.len());
    let scale = order[k.min(order.len() - 1)].0;
    for &(d, label, _) in &order[..k] {
        let dn = d / scale;
        votes[label] += 1.0 / (dn * dn);
    }
    let label = argmax(&votes);
    let total: f64 = votes.iter().sum();
    for v in &mut votes {
        *v /= total;
    }
    Ok(Decision {
        label,
        probabilities: votes,
        route: Route::Knn,
        neighbor_ids: Some(order[..k].iter().map(|o| o.2).collect()),
    })
}

/// One embedding per training sample, rounded to `f32` like the checkpoint.
pub fn build_gallery(
    config: &NetworkConfig,
    params: &NetworkParams,
    samples: &[SampleFeatures],
    labels: &[usize],
) -> Result<Gallery> {
    if samples.is_empty() {
        return Err(Error::Param("cannot build a gallery from an empty set".into()));
    }
    if samples.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let embeddings = par::try_map(samples, |s| {
        embed(config, params, s).map(|e| e.into_iter().map(|v| v as f32 as f64).collect())
    })?;
    Gallery::new(embeddings, labels.to_vec())
}

/// Accepts the Softmax argmax when its margin is wide enough, otherwise
/// defers to the gallery vote.
pub fn route(probs: &[f64], embedding: &[f64], gallery: &Gallery, params: &KnnParams) -> Result<Decision> {
    match softmax_decide(probs, params)? {
        SoftmaxOutcome::Accept(label) => Ok(Decision {
            label,
            probabilities: probs.to_vec(),
            route: Route::Softmax,
            neighbor_ids: None,
        }),
        SoftmaxOutcome::Ambiguous => {
            let d = knn_predict(gallery, embedding, params)?;
            Ok(Decision {
                probabilities: probs.to_vec(),
                ..d
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tau(t: f64) -> KnnParams {
        KnnParams { k: 10, margin_tau: t }
    }

    #[test]
    fn margin_rule() {
        assert_eq!(
            softmax_decide(&[0.9, 0.05, 0.05], &tau(0.15)).unwrap(),
            SoftmaxOutcome::Accept(0)
        );
        assert_eq!(
            softmax_decide(&[0.45, 0.40, 0.15], &tau(0.15)).unwrap(),
            SoftmaxOutcome::Ambiguous
        );
        assert_eq!(softmax_decide(&[0.5, 0.5], &tau(0.0)).unwrap(), SoftmaxOutcome::Accept(0));
        assert!(softmax_decide(&[0.5, 0.6], &tau(0.1)).is_err());
    }

    #[test]
    fn single_point_and_exact_match() {
        let g = Gallery::new(vec![vec![1.0, 2.0]], vec![2]).unwrap();
        assert_eq!(knn_predict(&g, &[5.0, 5.0], &tau(0.1)).unwrap().label, 2);
        let g = Gallery::new(
            vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![3.0, 3.0]],
            vec![0, 0, 0, 1],
        )
        .unwrap();
        let d = knn_predict(&g, &[3.0, 3.0], &tau(0.1)).unwrap();
        assert_eq!((d.label, d.neighbor_ids), (1, Some(vec![3])));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Gallery::new(vec![], vec![]).unwrap();
        assert!(knn_predict(&g, &[], &tau(0.1)).is_err());
        let g = Gallery::new(vec![vec![1.0]], vec![0]).unwrap();
        assert!(knn_predict(&g, &[1.0, 2.0], &tau(0.1)).is_err());
        assert!(Gallery::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
        assert!(Gallery::new(vec![vec![1.0]], vec![0, 1]).is_err());
    }

    #[test]
    fn tensor_round_trip() {
        let g = Gallery::new(vec![vec![1.5, -2.0], vec![0.25, 4.0]], vec![1, 0]).unwrap();
        let t = g.to_tensors();
        assert_eq!(Gallery::from_tensors(&t[0].1, &t[1].1).unwrap(), g);
    }

    proptest! {
        #[test]
        fn scale_and_permutation_invariant(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..3), 2..20),
            q in (-5.0f64..5.0, -5.0f64..5.0),
            k in 1usize..6,
            c in 0.1f64..10.0,
        ) {
            let p = KnnParams { k, margin_tau: 0.15 };
            let g = Gallery::new(pts.iter().map(|t| vec![t.0, t.1]).collect(), pts.iter().map(|t| t.2).collect()).unwrap();
            let base = knn_predict(&g, &[q.0, q.1], &p).unwrap().label;
            let scaled = Gallery::new(pts.iter().map(|t| vec![c * t.0, c * t.1]).collect(), g.labels().to_vec()).unwrap();
            prop_assert_eq!(knn_predict(&scaled, &[c * q.0, c * q.1], &p).unwrap().label, base);
            let rev = Gallery::new(g.embeddings().iter().rev().cloned().collect(), g.labels().iter().rev().copied().collect()).unwrap();
            prop_assert_eq!(knn_predict(&rev, &[q.0, q.1], &p).unwrap().label, base);
        }

        #[test]
        fn zero_tau_never_ambiguous(raw in proptest::collection::vec(0.0f64..1.0, 2..6)) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let probs: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let fixed: Vec<f64> = { let t: f64 = probs.iter().sum(); probs.iter().map(|v| v / t).collect() };
            prop_assert!(matches!(softmax_decide(&fixed, &tau(0.0)).unwrap(), SoftmaxOutcome::Accept(_)));
        }
    }
}
