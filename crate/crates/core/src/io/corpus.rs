//! Raw corpus directory: `corpus.toml` plus one CSV per sequence with one row
//! per frame and, per sensor, nine orientation then three acceleration
//! columns.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kinematics::{Mat3, VirtualImuSample};
use crate::motiongen::{ActivityClass, CorpusSpec, RawCorpus, RawSequence};
use crate::{Error, Result};

pub const CORPUS_MANIFEST: &str = "corpus.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub file: String,
    pub id: usize,
    pub label: usize,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub taxonomy: Vec<ActivityClass>,
    pub sensors: Vec<String>,
    pub frame_rate: f64,
    pub spec: CorpusSpec,
    pub sequences: Vec<SequenceEntry>,
}

fn header(sensors: &[String]) -> Vec<String> {
    let mut h = Vec::with_capacity(sensors.len() * 12);
    for s in sensors {
        for r in 1..=3 {
            for c in 1..=3 {
                h.push(format!("{s}_r{r}{c}"));
            }
        }
        for a in ["x", "y", "z"] {
            h.push(format!("{s}_a{a}"));
        }
    }
    h
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format("corpus sequence", format!("{other:?}")),
    }
}

/// Writes every sequence and the manifest into `dir` (which must exist).
pub fn write_corpus(dir: &Path, corpus: &RawCorpus, spec: &CorpusSpec) -> Result<CorpusManifest> {
    let head = header(&corpus.sensors);
    let mut entries = Vec::with_capacity(corpus.sequences.len());
    for seq in &corpus.sequences {
        let file = format!("seq_{:05}.csv", seq.id);
        let mut w = csv::Writer::from_path(dir.join(&file)).map_err(csv_err)?;
        w.write_record(&head).map_err(csv_err)?;
        let mut row = Vec::with_capacity(head.len());
        for t in 0..seq.frames() {
            row.clear();
            for stream in &seq.streams {
                let s = &stream[t];
                row.extend(s.orientation.flatten().iter().map(|v| v.to_string()));
                row.extend(s.acceleration.iter().map(|v| v.to_string()));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        entries.push(SequenceEntry {
            file,
            id: seq.id,
            label: seq.label,
            frames: seq.frames(),
        });
    }
    let manifest = CorpusManifest {
        taxonomy: corpus.taxonomy.clone(),
        sensors: corpus.sensors.clone(),
        frame_rate: corpus.frame_rate,
        spec: spec.clone(),
        sequences: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::format("corpus manifest", e.to_string()))?;
    fs::write(dir.join(CORPUS_MANIFEST), text)?;
    Ok(manifest)
}

pub fn read_corpus_manifest(dir: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(dir.join(CORPUS_MANIFEST))?;
    toml::from_str(&text).map_err(|e| Error::format("corpus manifest", e.message().to_string()))
}

/// Reads a corpus written by [`write_corpus`]; values round-trip exactly.
pub fn read_corpus(dir: &Path) -> Result<(RawCorpus, CorpusManifest)> {
    let manifest = read_corpus_manifest(dir)?;
    let head = header(&manifest.sensors);
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for entry in &manifest.sequences {
        if entry.label >= manifest.taxonomy.len() {
            return Err(Error::format(
                "corpus manifest",
                format!("sequence {} has label {}", entry.id, entry.label),
            ));
        }
        let mut r = csv::Reader::from_path(dir.join(&entry.file)).map_err(csv_err)?;
        let got: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if got != head {
            return Err(Error::format(
                "corpus sequence",
                format!("{}: unexpected columns", entry.file),
            ));
        }
        let mut streams = vec![Vec::with_capacity(entry.frames); manifest.sensors.len()];
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::format("corpus sequence", format!("{}: bad number `{v}`", entry.file))
                    })
                })
                .collect::<Result<_>>()?;
            for (s, stream) in streams.iter_mut().enumerate() {
                let v = &vals[s * 12..(s + 1) * 12];
                stream.push(VirtualImuSample {
                    orientation: Mat3::from_flat(&v[..9]),
                    acceleration: [v[9], v[10], v[11]],
                });
            }
        }
        if streams[0].len() != entry.frames {
            return Err(Error::format(
                "corpus sequence",
                format!("{}: {} rows, manifest says {}", entry.file, streams[0].len(), entry.frames),
            ));
        }
        sequences.push(RawSequence {
            id: entry.id,
            label: entry.label,
            streams,
        });
    }
    let corpus = RawCorpus {
        taxonomy: manifest.taxonomy.clone(),
        sensors: manifest.sensors.clone(),
        frame_rate: manifest.frame_rate,
        sequences,
    };
    Ok((corpus, manifest))
}
