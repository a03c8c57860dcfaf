use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Train / validation / test fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Param(format!(
                "split ratios must all be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Per-class part sizes; every part gets at least one sample.
    fn allocate(&self, n: usize) -> Option<[usize; 3]> {
        if n < 3 {
            return None;
        }
        let mut train = ((n as f64 * self.train).round() as usize).max(1);
        let mut val = ((n as f64 * self.val).round() as usize).max(1);
        while train + val > n - 1 {
            if train >= val {
                train -= 1;
            } else {
                val -= 1;
            }
        }
        Some([train, val, n - train - val])
    }
}

/// Stratified, seeded split into (train, val, test).
pub fn split_dataset(
    ds: &Dataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for class in 0..ds.num_classes() {
        let mut members: Vec<usize> = ds
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let sizes = ratios.allocate(members.len()).ok_or_else(|| {
            Error::Stratification(format!(
                "class {:?} has {} samples, fewer than the 3 split parts",
                ds.class_names[class],
                members.len()
            ))
        })?;
        members.shuffle(&mut rng);
        let mut rest = members.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (take, tail) = rest.split_at(size);
            part.extend_from_slice(take);
            rest = tail;
        }
    }
    let build = |idx: &mut Vec<usize>| {
        idx.sort_unstable();
        Dataset {
            samples: idx.iter().map(|&i| ds.samples[i].clone()).collect(),
            class_names: ds.class_names.clone(),
        }
    };
    let [mut a, mut b, mut c] = parts;
    Ok((build(&mut a), build(&mut b), build(&mut c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Frame, FrameSequence, LabeledSample};

    fn toy(per_class: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (label, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                let frames =
                    FrameSequence::new(vec![Frame::filled(2, 2, 0)], format!("{label}/{i}"), 25.0)
                        .unwrap();
                samples.push(LabeledSample {
                    frames,
                    skeleton: None,
                    label,
                });
            }
        }
        let names = (0..per_class.len()).map(|c| format!("c{c}")).collect();
        Dataset::new(samples, names).unwrap()
    }

    #[test]
    fn sixty_twenty_twenty() {
        let (tr, va, te) = split_dataset(&toy(&[10, 10, 10]), SplitRatios::default(), 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (18, 6, 6));
        assert_eq!(tr.class_counts(), vec![6, 6, 6]);
        assert_eq!(va.class_counts(), vec![2, 2, 2]);
        assert_eq!(te.class_counts(), vec![2, 2, 2]);
    }

    #[test]
    fn zero_ratio_and_bad_sum_rejected() {
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
        assert!(SplitRatios::new(0.5, 0.2, 0.2).is_err());
        let bad = SplitRatios {
            train: 1.0,
            val: 0.0,
            test: 0.0,
        };
        assert!(matches!(
            split_dataset(&toy(&[5]), bad, 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn tiny_class_fails_stratification() {
        let err = split_dataset(&toy(&[10, 2]), SplitRatios::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Stratification(_)));
    }

    #[test]
    fn deterministic() {
        let ds = toy(&[7, 9, 12]);
        let a = split_dataset(&ds, SplitRatios::default(), 42).unwrap();
        let b = split_dataset(&ds, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
    }
}
