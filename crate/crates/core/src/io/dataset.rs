//! A split, standardized dataset on disk: `windows.bin` in the windowed
//! format plus the `windows.toml` sidecar with layout, statistics and split
//! membership.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::windows::{read_windows_file, write_windows};
use crate::pipeline::Dataset;
use crate::sigproc::{ChannelLayout, ChannelStats, PreprocessOptions, WindowedSample};
use crate::{Error, Result};

pub const WINDOWS_FILE: &str = "windows.bin";
pub const WINDOWS_SIDECAR: &str = "windows.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub sensors: Vec<String>,
    pub channel_names: Vec<String>,
    pub class_names: Vec<String>,
    pub window: usize,
    pub preprocess: PreprocessOptions,
    pub stats: ChannelStats,
    pub train_sequences: Vec<usize>,
    pub test_sequences: Vec<usize>,
    /// Per stored sample, in file order.
    pub sample_sequence: Vec<usize>,
    pub sample_start: Vec<usize>,
}

/// Writes `train` followed by `test` and the sidecar into `dir`.
pub fn write_dataset(
    dir: &Path,
    train: &Dataset,
    test: &Dataset,
    class_names: &[String],
    preprocess: &PreprocessOptions,
    stats: &ChannelStats,
) -> Result<DatasetManifest> {
    if train.layout != test.layout || train.window != test.window || train.classes != test.classes {
        return Err(Error::shape("train and test sets disagree on layout"));
    }
    let all: Vec<&WindowedSample> = train.samples.iter().chain(&test.samples).collect();
    write_windows(
        File::create(dir.join(WINDOWS_FILE))?,
        train.channels(),
        train.window,
        train.classes,
        all.iter().map(|s| (s.label, s.values.as_slice())),
    )?;
    let manifest = DatasetManifest {
        format: "MARSWIN1".into(),
        sensors: train.layout.sensors().to_vec(),
        channel_names: train.layout.channel_names(),
        class_names: class_names.to_vec(),
        window: train.window,
        preprocess: preprocess.clone(),
        stats: stats.clone(),
        train_sequences: train.sequence_ids(),
        test_sequences: test.sequence_ids(),
        sample_sequence: all.iter().map(|s| s.source_sequence).collect(),
        sample_start: all.iter().map(|s| s.start_frame).collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::format("dataset sidecar", e.to_string()))?;
    fs::write(dir.join(WINDOWS_SIDECAR), text)?;
    Ok(manifest)
}

pub fn read_dataset_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(dir.join(WINDOWS_SIDECAR))?;
    toml::from_str(&text).map_err(|e| Error::format("dataset sidecar", e.message().to_string()))
}

/// Reads the train and test sets of a dataset directory.
pub fn read_dataset(dir: &Path) -> Result<(Dataset, Dataset, DatasetManifest)> {
    let mut manifest = read_dataset_manifest(dir)?;
    manifest.train_sequences.sort_unstable();
    manifest.test_sequences.sort_unstable();
    let file = read_windows_file(&dir.join(WINDOWS_FILE))?;
    let layout = ChannelLayout::new(&manifest.sensors)?;
    let h = file.header;
    let bad = |detail: String| Error::format("dataset sidecar", detail);
    if h.channels != layout.channels() || h.window != manifest.window {
        return Err(bad(format!(
            "file holds {}x{} windows, sidecar describes {}x{}",
            h.channels,
            h.window,
            layout.channels(),
            manifest.window
        )));
    }
    if h.classes != manifest.class_names.len() {
        return Err(bad(format!(
            "file has {} classes, sidecar names {}",
            h.classes,
            manifest.class_names.len()
        )));
    }
    if manifest.sample_sequence.len() != h.samples || manifest.sample_start.len() != h.samples {
        return Err(bad(format!("sidecar describes a different number of samples than the {} stored", h.samples)));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, (label, values)) in file.labels.into_iter().zip(file.values).enumerate() {
        let seq = manifest.sample_sequence[i];
        let sample = WindowedSample {
            values,
            label,
            source_sequence: seq,
            start_frame: manifest.sample_start[i],
        };
        if manifest.test_sequences.binary_search(&seq).is_ok() {
            test.push(sample);
        } else if manifest.train_sequences.binary_search(&seq).is_ok() {
            train.push(sample);
        } else {
            return Err(bad(format!("sample {i} belongs to unlisted sequence {seq}")));
        }
    }
    let train = Dataset::new(layout.clone(), h.window, h.classes, train)?;
    let test = Dataset::new(layout, h.window, h.classes, test)?;
    Ok((train, test, manifest))
}
