//! Retraining the model for each sensor subset.

use serde::{Deserialize, Serialize};

use super::data::{standardize_split, stratified_split, Dataset};
use super::train::{train, RunReport, TrainConfig};
use crate::model::{ArchitectureSpec, MarsModel};
use crate::motiongen::RawCorpus;
use crate::sigproc::{preprocess, sensor_set, ChannelLayout, PreprocessOptions};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct AblationSettings {
    pub preprocess: PreprocessOptions,
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Layer plan template; its channel count is replaced per sensor set.
    pub architecture: ArchitectureSpec,
    pub training: TrainConfig,
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sensor_set: String,
    pub sensors: Vec<String>,
    pub channels: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub report: RunReport,
}

/// Windowed, split and standardized data for one sensor set.
pub(crate) fn prepare(
    corpus: &RawCorpus,
    sensors: &[&str],
    settings: &AblationSettings,
) -> Result<(Dataset, Dataset)> {
    let layout = ChannelLayout::new(sensors)?;
    let samples = preprocess(corpus, &layout, &settings.preprocess)?;
    let data = Dataset::new(
        layout,
        settings.preprocess.window,
        corpus.taxonomy.len(),
        samples,
    )?;
    let (mut tr, mut te) = stratified_split(&data, settings.test_fraction, settings.split_seed)?;
    standardize_split(&mut tr, &mut te)?;
    Ok((tr, te))
}

/// Trains a fresh model for every named sensor set and reports each run.
/// The split and the training seed are shared by all sets, so every set
/// sees the same windows.
pub fn ablate_sensors<S: AsRef<str>>(
    corpus: &RawCorpus,
    sets: &[S],
    settings: &AblationSettings,
) -> Result<Vec<AblationRow>> {
    let resolved: Vec<(String, Vec<&str>)> = sets
        .iter()
        .map(|s| Ok((s.as_ref().to_string(), sensor_set(s.as_ref())?)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(resolved.len());
    for (name, sensors) in resolved {
        let (train_set, test_set) = prepare(corpus, &sensors, settings)?;
        let spec = ArchitectureSpec {
            channels: train_set.channels(),
            ..settings.architecture.clone()
        };
        let cfg = &settings.training;
        let mut model = MarsModel::new(spec, cfg.fusion, train_set.classes, cfg.seed)?;
        let report = train(&mut model, &train_set, Some(&test_set), cfg)?;
        rows.push(AblationRow {
            sensor_set: name,
            sensors: sensors.iter().map(|s| s.to_string()).collect(),
            channels: train_set.channels(),
            train_samples: train_set.len(),
            test_samples: test_set.len(),
            report,
        });
    }
    Ok(rows)
}
