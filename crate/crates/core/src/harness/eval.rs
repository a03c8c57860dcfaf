use std::fmt::Write as _;

use crate::classify::{Decision, KnnParams, Route};
use crate::error::Result;
use crate::net::SampleFeatures;
use crate::par;

use super::model::Model;
use super::preprocess::require_nonempty;

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Diagonal over row sum; `None` for classes without samples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let n: usize = r.iter().sum();
                (n > 0).then(|| r[i] as f64 / n as f64)
            })
            .collect()
    }

    /// Header row of class names; one row per true class.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header).unwrap();
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub samples: usize,
    pub accuracy: f64,
    pub per_class: Vec<(String, Option<f64>)>,
    pub softmax_routed: usize,
    pub knn_routed: usize,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix, decisions: &[Decision]) -> Self {
        let knn = decisions.iter().filter(|d| d.route == Route::Knn).count();
        Metrics {
            samples: cm.total(),
            accuracy: cm.accuracy(),
            per_class: cm
                .class_names
                .iter()
                .cloned()
                .zip(cm.per_class_accuracy())
                .collect(),
            softmax_routed: decisions.len() - knn,
            knn_routed: knn,
        }
    }

    /// One `key value` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples {}", self.samples);
        let _ = writeln!(s, "accuracy {:.6}", self.accuracy);
        let _ = writeln!(s, "softmax_routed {}", self.softmax_routed);
        let _ = writeln!(s, "knn_routed {}", self.knn_routed);
        for (name, acc) in &self.per_class {
            match acc {
                Some(a) => {
                    let _ = writeln!(s, "accuracy.{name} {a:.6}");
                }
                None => {
                    let _ = writeln!(s, "accuracy.{name} n/a");
                }
            }
        }
        s
    }
}

/// Routes every sample through the Softmax margin test and KNN fallback.
pub fn evaluate(
    model: &Model,
    knn: &KnnParams,
    test_set: &[(SampleFeatures, usize)],
) -> Result<(Metrics, ConfusionMatrix, Vec<Decision>)> {
    require_nonempty(test_set, "test set")?;
    let decisions = par::try_map(test_set, |(x, _)| model.predict(x, knn))?;
    let mut cm = ConfusionMatrix::new(model.class_names.clone());
    for (d, (_, y)) in decisions.iter().zip(test_set) {
        cm.record(*y, d.label);
    }
    Ok((Metrics::from_confusion(&cm, &decisions), cm, decisions))
}
