//! Windowed datasets and the sequence-level train/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::sigproc::{standardize, ChannelLayout, ChannelStats, WindowedSample};
use crate::{Error, Result};

/// Labeled `N×T` windows sharing one channel layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub layout: ChannelLayout,
    pub window: usize,
    pub classes: usize,
    pub samples: Vec<WindowedSample>,
}

impl Dataset {
    pub fn new(
        layout: ChannelLayout,
        window: usize,
        classes: usize,
        samples: Vec<WindowedSample>,
    ) -> Result<Self> {
        let n = layout.channels() * window;
        for (i, s) in samples.iter().enumerate() {
            if s.values.len() != n {
                return Err(Error::shape(format!(
                    "sample {i} has {} values, layout expects {}x{window}",
                    s.values.len(),
                    layout.channels()
                )));
            }
            if s.label >= classes {
                return Err(Error::invalid(format!(
                    "sample {i} has label {} but only {classes} classes exist",
                    s.label
                )));
            }
        }
        Ok(Self {
            layout,
            window,
            classes,
            samples,
        })
    }

    pub fn channels(&self) -> usize {
        self.layout.channels()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }

    /// Stacks the selected samples into a `[B, N, T]` tensor.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let per = self.channels() * self.window;
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &self.samples[i];
            data.extend_from_slice(&s.values);
            labels.push(s.label);
        }
        let t = Tensor::new(vec![indices.len(), self.channels(), self.window], data)?;
        Ok((t, labels))
    }

    /// Sorted ids of the sequences the windows came from.
    pub fn sequence_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.samples.iter().map(|s| s.source_sequence).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn subset(&self, keep: impl Fn(&WindowedSample) -> bool) -> Dataset {
        Dataset {
            layout: self.layout.clone(),
            window: self.window,
            classes: self.classes,
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}

/// Splits by sequence: within every class, `test_fraction` of its sequences
/// (rounded, at least one when the class has two or more) go to the test
/// set. Windows of one sequence never straddle the split.
pub fn stratified_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::config(
            "test_fraction",
            format!("must lie in [0, 1), got {test_fraction}"),
        ));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in &data.samples {
        let ids = by_class.entry(s.label).or_default();
        if !ids.contains(&s.source_sequence) {
            ids.push(s.source_sequence);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids = Vec::new();
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let mut n = (ids.len() as f64 * test_fraction).round() as usize;
        if test_fraction > 0.0 && n == 0 && ids.len() >= 2 {
            n = 1;
        }
        test_ids.extend_from_slice(&ids[..n.min(ids.len().saturating_sub(1))]);
    }
    test_ids.sort_unstable();
    let train = data.subset(|s| test_ids.binary_search(&s.source_sequence).is_err());
    let test = data.subset(|s| test_ids.binary_search(&s.source_sequence).is_ok());
    Ok((train, test))
}

/// Standardizes `train` in place with its own statistics and applies the
/// same statistics to `test`.
pub fn standardize_split(train: &mut Dataset, test: &mut Dataset) -> Result<ChannelStats> {
    if train.channels() != test.channels() || train.window != test.window {
        return Err(Error::shape("train and test layouts differ"));
    }
    let (n, t) = (train.channels(), train.window);
    standardize(&mut train.samples, &mut [&mut test.samples], n, t)
}
