//! Procedural labeled motion corpora.
//!
//! Each activity class has its own parametric joint-angle script with seeded
//! amplitude, frequency, phase and heading jitter. A corpus is a set of such
//! sequences passed through the virtual IMU model and, optionally, a sensor
//! noise model.

mod scripts;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{
    sample_virtual_imus, ImuOptions, Mat3, MotionSequence, Skeleton, VirtualImuSample,
};
use crate::{Error, Result};

use scripts::{animate, Script};


#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityClass {
    pub id: usize,
    pub name: String,
}

impl ActivityClass {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
        }
    }
}

/// Names of the five target-domain classes, in label order.
pub const TARGET_CLASSES: [&str; 5] = [
    "Upper Body",
    "Lower Body",
    "Locomotion",
    "Jumping",
    "Computer Works",
];

/// Names of the extra classes only present in the source domain.
pub const SOURCE_EXTRA_CLASSES: [&str; 3] = ["Running", "Sit Stand", "Bending"];

/// Every class name a script exists for.
pub fn known_class_names() -> impl Iterator<Item = &'static str> {
    TARGET_CLASSES.into_iter().chain(SOURCE_EXTRA_CLASSES)
}

/// The five-class target taxonomy.
pub fn target_taxonomy() -> Vec<ActivityClass> {
    TARGET_CLASSES
        .iter()
        .enumerate()
        .map(|(i, n)| ActivityClass::new(i, *n))
        .collect()
}

/// The eight-class source taxonomy; the first five ids match the target.
pub fn source_taxonomy() -> Vec<ActivityClass> {
    known_class_names()
        .enumerate()
        .map(|(i, n)| ActivityClass::new(i, n))
        .collect()
}

/// Builds a taxonomy from class names, assigning ids in order.
pub fn taxonomy_from_names<S: AsRef<str>>(names: &[S]) -> Result<Vec<ActivityClass>> {
    let mut out = Vec::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        let n = n.as_ref();
        if Script::from_name(n).is_none() {
            return Err(Error::invalid(format!("unknown activity class `{n}`")));
        }
        if out.iter().any(|c: &ActivityClass| c.name == n) {
            return Err(Error::invalid(format!("activity class `{n}` listed twice")));
        }
        out.push(ActivityClass::new(i, n));
    }
    Ok(out)
}

/// Sensor noise applied to target-style corpora.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation of additive Gaussian acceleration noise, m/s².
    pub accel_std: f64,
    /// Per-axis standard deviation of the orientation perturbation, radians.
    pub orientation_jitter: f64,
    /// Constant offset added to every acceleration axis, m/s².
    pub bias: f64,
}

impl NoiseModel {
    /// Defaults for the small noisy target corpus.
    pub fn target_default() -> Self {
        Self {
            accel_std: 0.5,
            orientation_jitter: 0.02,
            bias: 0.1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.accel_std == 0.0 && self.orientation_jitter == 0.0 && self.bias == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("accel_std", self.accel_std),
            ("orientation_jitter", self.orientation_jitter),
            ("bias", self.bias),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub taxonomy: Vec<ActivityClass>,
    pub sequences_per_class: usize,
    /// Inclusive duration range in seconds.
    pub duration_range: (f64, f64),
    pub frame_rate: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl CorpusSpec {
    /// Large clean corpus: 8 classes × 150 sequences of about 6 s at 60 Hz.
    pub fn source_default() -> Self {
        Self {
            taxonomy: source_taxonomy(),
            sequences_per_class: 150,
            duration_range: (5.5, 6.5),
            frame_rate: 60.0,
            noise: NoiseModel::default(),
            seed: 1,
        }
    }

    /// Small noisy corpus: 5 classes × 30 sequences of 10 to 12 s at 60 Hz.
    pub fn target_default() -> Self {
        Self {
            taxonomy: target_taxonomy(),
            sequences_per_class: 30,
            duration_range: (10.0, 12.0),
            frame_rate: 60.0,
            noise: NoiseModel::target_default(),
            seed: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taxonomy.is_empty() {
            return Err(Error::config("taxonomy", "at least one activity class is required"));
        }
        for (i, c) in self.taxonomy.iter().enumerate() {
            if c.id != i {
                return Err(Error::config(
                    "taxonomy",
                    format!("class `{}` has id {}, expected {i}", c.name, c.id),
                ));
            }
            if Script::from_name(&c.name).is_none() {
                return Err(Error::config(
                    "taxonomy",
                    format!("unknown activity class `{}`", c.name),
                ));
            }
        }
        if self.sequences_per_class == 0 {
            return Err(Error::config("sequences_per_class", "must be at least 1"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::config("frame_rate", "must be positive"));
        }
        let (lo, hi) = self.duration_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo * self.frame_rate >= 3.0) {
            return Err(Error::config(
                "duration_range",
                format!("need 3/frame_rate <= min <= max, got ({lo}, {hi})"),
            ));
        }
        self.noise.validate()
    }
}

/// Generates one labeled motion sequence. Deterministic in all arguments.
pub fn generate_motion(
    class: &ActivityClass,
    duration: f64,
    frame_rate: f64,
    seed: u64,
) -> Result<MotionSequence> {
    let script = Script::from_name(&class.name)
        .ok_or_else(|| Error::invalid(format!("unknown activity class `{}`", class.name)))?;
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
    }
    if !duration.is_finite() || duration * frame_rate < 3.0 {
        return Err(Error::invalid(format!(
            "duration {duration} s is shorter than 3 frames at {frame_rate} Hz"
        )));
    }
    let frames = (duration * frame_rate).round() as usize;
    let poses = animate(script, frames, frame_rate, mix(seed, class.id as u64));
    MotionSequence::new(poses, frame_rate, class.id)
}

/// One synthesized recording: a stream of samples per sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence {
    pub id: usize,
    pub label: usize,
    /// `streams[s][t]` is sensor `s` at interior frame `t`.
    pub streams: Vec<Vec<VirtualImuSample>>,
}

impl RawSequence {
    pub fn frames(&self) -> usize {
        self.streams.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawCorpus {
    pub taxonomy: Vec<ActivityClass>,
    pub sensors: Vec<String>,
    pub frame_rate: f64,
    pub sequences: Vec<RawSequence>,
}

impl RawCorpus {
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.taxonomy.len()];
        for s in &self.sequences {
            h[s.label] += 1;
        }
        h
    }

    /// Copy restricted to the named sensors, in the given order.
    pub fn select_sensors<S: AsRef<str>>(&self, names: &[S]) -> Result<RawCorpus> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.sensors
                    .iter()
                    .position(|s| s == n)
                    .ok_or_else(|| Error::invalid(format!("corpus has no sensor `{n}`")))
            })
            .collect::<Result<_>>()?;
        Ok(RawCorpus {
            taxonomy: self.taxonomy.clone(),
            sensors: idx.iter().map(|&i| self.sensors[i].clone()).collect(),
            frame_rate: self.frame_rate,
            sequences: self
                .sequences
                .iter()
                .map(|s| RawSequence {
                    id: s.id,
                    label: s.label,
                    streams: idx.iter().map(|&i| s.streams[i].clone()).collect(),
                })
                .collect(),
        })
    }
}

/// SplitMix64-style seed derivation.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Synthesizes `sequences_per_class` recordings for every class, sampled at
/// the named sensor sites. Sequences are ordered by class, then index.
pub fn build_corpus<S: AsRef<str> + Sync>(
    spec: &CorpusSpec,
    skeleton: &Skeleton,
    sensors: &[S],
) -> Result<RawCorpus> {
    if spec.taxonomy.is_empty() {
        return Err(Error::invalid("corpus taxonomy is empty"));
    }
    spec.validate()?;
    let names: Vec<&str> = sensors.iter().map(AsRef::as_ref).collect();
    for n in &names {
        skeleton.sensor_index(n)?;
    }
    let jobs: Vec<(usize, usize)> = spec
        .taxonomy
        .iter()
        .flat_map(|c| (0..spec.sequences_per_class).map(move |k| (c.id, k)))
        .collect();
    let sequences = jobs
        .par_iter()
        .enumerate()
        .map(|(id, &(class, k))| {
            let seq_seed = mix(mix(spec.seed, class as u64), k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seq_seed);
            let (lo, hi) = spec.duration_range;
            let duration = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let motion = generate_motion(&spec.taxonomy[class], duration, spec.frame_rate, seq_seed)?;
            let mut streams = sample_virtual_imus(&motion, skeleton, &names, ImuOptions::default())?;
            if !spec.noise.is_zero() {
                apply_noise(&mut streams, &spec.noise, mix(seq_seed, 0x006e_6f69_7365))?;
            }
            Ok(RawSequence {
                id,
                label: class,
                streams,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawCorpus {
        taxonomy: spec.taxonomy.clone(),
        sensors: names.iter().map(|s| s.to_string()).collect(),
        frame_rate: spec.frame_rate,
        sequences,
    })
}

/// Adds Gaussian acceleration noise plus `bias` to every axis, and perturbs
/// every orientation by a small random rotation re-projected onto the
/// rotation group.
pub fn apply_noise(
    streams: &mut [Vec<VirtualImuSample>],
    noise: &NoiseModel,
    seed: u64,
) -> Result<()> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let accel = Normal::new(0.0, noise.accel_std).map_err(|e| Error::invalid(e.to_string()))?;
    let jitter =
        Normal::new(0.0, noise.orientation_jitter).map_err(|e| Error::invalid(e.to_string()))?;
    for stream in streams.iter_mut() {
        for s in stream.iter_mut() {
            for a in s.acceleration.iter_mut() {
                *a += noise.bias + accel.sample(&mut rng);
            }
            if noise.orientation_jitter > 0.0 {
                let w = [0; 3].map(|_| jitter.sample(&mut rng));
                s.orientation = (s.orientation * Mat3::from_axis_angle(w)).orthonormalize();
            }
        }
    }
    Ok(())
}
