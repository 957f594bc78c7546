//! Raw sensor streams to standardized, windowed network inputs.
//!
//! Every sensor contributes twelve consecutive channels: three acceleration
//! axes followed by the nine entries of its orientation matrix in row-major
//! order. Multi-channel signals are stored channel-major.

mod filter;

use serde::{Deserialize, Serialize};

use crate::kinematics::{Mat3, VirtualImuSample};
use crate::motiongen::RawCorpus;
use crate::{Error, Result};

pub use filter::Biquad;

/// Channels contributed by one sensor.
pub const CHANNELS_PER_SENSOR: usize = 12;

/// Sensor names of the ablation sets, in channel order.
pub fn sensor_set(name: &str) -> Result<Vec<&'static str>> {
    Ok(match name {
        "3" => vec!["head", "l_wrist", "r_knee"],
        "4" => vec!["head", "l_wrist", "r_knee", "spine"],
        "5-knee" => vec!["head", "l_wrist", "r_knee", "spine", "l_knee"],
        "5-wrist" => vec!["head", "l_wrist", "r_knee", "spine", "r_wrist"],
        "6" => vec!["head", "l_wrist", "r_knee", "spine", "l_knee", "r_wrist"],
        other => {
            return Err(Error::invalid(format!(
                "unknown sensor set `{other}`, expected 3, 4, 5-knee, 5-wrist or 6"
            )))
        }
    })
}

/// Names of all sensor sets, in ablation order.
pub const SENSOR_SETS: [&str; 5] = ["3", "4", "5-knee", "5-wrist", "6"];

/// Placement of each sensor's channels in an `N`-channel signal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    sensors: Vec<String>,
}

impl ChannelLayout {
    pub fn new<S: AsRef<str>>(sensors: &[S]) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::invalid("a channel layout needs at least one sensor"));
        }
        let sensors: Vec<String> = sensors.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, s) in sensors.iter().enumerate() {
            if sensors[..i].contains(s) {
                return Err(Error::invalid(format!("sensor `{s}` listed twice")));
            }
        }
        Ok(Self { sensors })
    }

    pub fn sensors(&self) -> &[String] {
        &self.sensors
    }

    pub fn channels(&self) -> usize {
        self.sensors.len() * CHANNELS_PER_SENSOR
    }

    pub fn position(&self, sensor: &str) -> Option<usize> {
        self.sensors.iter().position(|s| s == sensor)
    }

    /// Zero-based acceleration channels of sensor `i`.
    pub fn accel_span(&self, i: usize) -> std::ops::Range<usize> {
        let base = i * CHANNELS_PER_SENSOR;
        base..base + 3
    }

    /// Zero-based orientation channels of sensor `i`.
    pub fn orient_span(&self, i: usize) -> std::ops::Range<usize> {
        let base = i * CHANNELS_PER_SENSOR;
        base + 3..base + CHANNELS_PER_SENSOR
    }

    /// Human-readable channel names, e.g. `Acc_head_x`, `Ori_head_12`.
    pub fn channel_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.channels());
        for s in &self.sensors {
            for axis in ["x", "y", "z"] {
                out.push(format!("Acc_{s}_{axis}"));
            }
            for r in 1..=3 {
                for c in 1..=3 {
                    out.push(format!("Ori_{s}_{r}{c}"));
                }
            }
        }
        out
    }
}

/// A channel-major multi-channel time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl Signal {
    pub fn new(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::shape(format!(
                "{} values for {channels} channels of length {len}",
                data.len()
            )));
        }
        Ok(Self { channels, len, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }
}

/// Places every sensor's readings at its layout span.
pub fn assemble(layout: &ChannelLayout, streams: &[Vec<VirtualImuSample>]) -> Result<Signal> {
    if streams.len() != layout.sensors().len() {
        return Err(Error::invalid(format!(
            "{} sensor streams for a {}-sensor layout",
            streams.len(),
            layout.sensors().len()
        )));
    }
    let len = streams[0].len();
    if let Some(bad) = streams.iter().position(|s| s.len() != len) {
        return Err(Error::invalid(format!(
            "stream of sensor `{}` has {} frames, expected {len}",
            layout.sensors()[bad],
            streams[bad].len()
        )));
    }
    let mut data = vec![0.0; layout.channels() * len];
    for (i, stream) in streams.iter().enumerate() {
        let acc = layout.accel_span(i).start;
        let ori = layout.orient_span(i).start;
        for (t, s) in stream.iter().enumerate() {
            for k in 0..3 {
                data[(acc + k) * len + t] = s.acceleration[k];
            }
            for (k, v) in s.orientation.flatten().into_iter().enumerate() {
                data[(ori + k) * len + t] = v;
            }
        }
    }
    Signal::new(layout.channels(), len, data)
}

/// Inverse of [`assemble`].
pub fn disassemble(layout: &ChannelLayout, signal: &Signal) -> Result<Vec<Vec<VirtualImuSample>>> {
    if signal.channels() != layout.channels() {
        return Err(Error::shape(format!(
            "signal has {} channels, layout has {}",
            signal.channels(),
            layout.channels()
        )));
    }
    let len = signal.len();
    let d = signal.data();
    Ok((0..layout.sensors().len())
        .map(|i| {
            let acc = layout.accel_span(i).start;
            let ori = layout.orient_span(i).start;
            (0..len)
                .map(|t| {
                    let flat: [f64; 9] = std::array::from_fn(|k| d[(ori + k) * len + t]);
                    VirtualImuSample {
                        orientation: Mat3::from_flat(&flat),
                        acceleration: std::array::from_fn(|k| d[(acc + k) * len + t]),
                    }
                })
                .collect()
        })
        .collect())
}

/// Applies the low-pass filter to every channel independently.
pub fn lowpass_filter(signal: &Signal, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Signal> {
    let f = Biquad::lowpass(cutoff_hz, sample_rate_hz)?;
    let mut out = vec![0.0; signal.data.len()];
    for c in 0..signal.channels {
        let span = c * signal.len..(c + 1) * signal.len;
        f.run_settled(&signal.data[span.clone()], &mut out[span]);
    }
    Signal::new(signal.channels, signal.len, out)
}

/// Expresses every sensor relative to sensor `root`: orientations become
/// `R_rootᵀ·R_s`, accelerations `R_rootᵀ·a`. The root's own orientation is
/// set to exactly the identity.
pub fn normalize_to_root(
    streams: &[Vec<VirtualImuSample>],
    root: usize,
) -> Result<Vec<Vec<VirtualImuSample>>> {
    let root_stream = streams.get(root).ok_or_else(|| {
        Error::invalid(format!("root sensor {root} missing from {} streams", streams.len()))
    })?;
    if let Some(bad) = streams.iter().position(|s| s.len() != root_stream.len()) {
        return Err(Error::invalid(format!(
            "stream {bad} has {} frames, root has {}",
            streams[bad].len(),
            root_stream.len()
        )));
    }
    Ok(streams
        .iter()
        .enumerate()
        .map(|(i, stream)| {
            stream
                .iter()
                .zip(root_stream)
                .map(|(s, r)| {
                    let rt = r.orientation.transpose();
                    VirtualImuSample {
                        orientation: if i == root {
                            Mat3::IDENTITY
                        } else {
                            rt * s.orientation
                        },
                        acceleration: rt.apply(s.acceleration),
                    }
                })
                .collect()
        })
        .collect())
}

/// A fixed-length labeled slice of a signal, `N×T` channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedSample {
    pub values: Vec<f64>,
    pub label: usize,
    pub source_sequence: usize,
    pub start_frame: usize,
}

/// Windows of length `t` starting at `0, stride, 2·stride, …`.
pub fn window(
    signal: &Signal,
    t: usize,
    stride: usize,
    label: usize,
    source_sequence: usize,
) -> Result<Vec<WindowedSample>> {
    if t == 0 || stride == 0 {
        return Err(Error::invalid(format!(
            "window length and stride must be >= 1, got {t} and {stride}"
        )));
    }
    if signal.len < t {
        return Ok(Vec::new());
    }
    let count = (signal.len - t) / stride + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * stride;
            let mut values = Vec::with_capacity(signal.channels * t);
            for c in 0..signal.channels {
                values.extend_from_slice(&signal.channel(c)[start..start + t]);
            }
            WindowedSample {
                values,
                label,
                source_sequence,
                start_frame: start,
            }
        })
        .collect())
}

/// Per-channel z-score statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Lower bound applied to standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

impl ChannelStats {
    /// Population mean and standard deviation of every channel over all
    /// values of all `samples`, each `channels × t` channel-major.
    pub fn fit(samples: &[&[f64]], channels: usize, t: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot fit statistics on an empty set"));
        }
        if let Some(bad) = samples.iter().position(|s| s.len() != channels * t) {
            return Err(Error::shape(format!(
                "sample {bad} has {} values, expected {}",
                samples[bad].len(),
                channels * t
            )));
        }
        let n = (samples.len() * t) as f64;
        let mut mean = vec![0.0; channels];
        for s in samples {
            for (c, m) in mean.iter_mut().enumerate() {
                *m += s[c * t..(c + 1) * t].iter().sum::<f64>();
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; channels];
        for s in samples {
            for (c, v) in var.iter_mut().enumerate() {
                *v += s[c * t..(c + 1) * t]
                    .iter()
                    .map(|x| (x - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `(x − mean)/std` in place for one `channels × t` sample.
    pub fn apply(&self, values: &mut [f64]) -> Result<()> {
        let channels = self.channels();
        if channels == 0 || !values.len().is_multiple_of(channels) {
            return Err(Error::shape(format!(
                "{} values do not split into {channels} channels",
                values.len()
            )));
        }
        let t = values.len() / channels;
        for (c, chunk) in values.chunks_mut(t).enumerate() {
            for v in chunk {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        Ok(())
    }
}

/// Fits statistics on `train` and applies them to `train` and every set in
/// `others`. Returns the statistics.
pub fn standardize(
    train: &mut [WindowedSample],
    others: &mut [&mut [WindowedSample]],
    channels: usize,
    t: usize,
) -> Result<ChannelStats> {
    if train.is_empty() {
        return Err(Error::invalid("cannot standardize an empty training split"));
    }
    let refs: Vec<&[f64]> = train.iter().map(|s| s.values.as_slice()).collect();
    let stats = ChannelStats::fit(&refs, channels, t)?;
    for s in train.iter_mut() {
        stats.apply(&mut s.values)?;
    }
    for set in others.iter_mut() {
        for s in set.iter_mut() {
            stats.apply(&mut s.values)?;
        }
    }
    Ok(stats)
}

/// Settings turning a raw corpus into windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    /// Low-pass cutoff in Hz; `None` disables filtering.
    pub cutoff_hz: Option<f64>,
    /// Express all sensors relative to the first sensor of the layout.
    pub root_normalize: bool,
    pub window: usize,
    pub stride: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            cutoff_hz: Some(10.0),
            root_normalize: true,
            window: 60,
            stride: 30,
        }
    }
}

/// Windows of a whole corpus for the sensors of `layout`, in sequence order.
pub fn preprocess(
    corpus: &RawCorpus,
    layout: &ChannelLayout,
    options: &PreprocessOptions,
) -> Result<Vec<WindowedSample>> {
    let selected = corpus.select_sensors(layout.sensors())?;
    let mut out = Vec::new();
    for seq in &selected.sequences {
        let streams = if options.root_normalize {
            normalize_to_root(&seq.streams, 0)?
        } else {
            seq.streams.clone()
        };
        let mut signal = assemble(layout, &streams)?;
        if let Some(cutoff) = options.cutoff_hz {
            signal = lowpass_filter(&signal, cutoff, corpus.frame_rate)?;
        }
        out.extend(window(&signal, options.window, options.stride, seq.label, seq.id)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: f64) -> VirtualImuSample {
        VirtualImuSample {
            orientation: Mat3::from_axis_angle([seed, 0.5 * seed, -0.2]),
            acceleration: [seed, 2.0 * seed, -seed],
        }
    }

    #[test]
    fn three_sensor_layout_spans() {
        let l = ChannelLayout::new(&sensor_set("3").unwrap()).unwrap();
        assert_eq!(l.channels(), 36);
        assert_eq!(l.accel_span(0), 0..3);
        assert_eq!(l.orient_span(0), 3..12);
        assert_eq!(l.accel_span(1), 12..15);
        assert_eq!(l.orient_span(2), 27..36);
        let names = l.channel_names();
        assert_eq!(names[0], "Acc_head_x");
        assert_eq!(names[35], "Ori_r_knee_33");
    }

    #[test]
    fn sensor_set_channel_counts() {
        let n: Vec<usize> = SENSOR_SETS
            .iter()
            .map(|s| ChannelLayout::new(&sensor_set(s).unwrap()).unwrap().channels())
            .collect();
        assert_eq!(n, [36, 48, 60, 60, 72]);
        assert!(sensor_set("7").is_err());
    }

    #[test]
    fn assemble_rejects_length_mismatch() {
        let l = ChannelLayout::new(&["a", "b"]).unwrap();
        let streams = vec![vec![sample(0.1); 4], vec![sample(0.2); 3]];
        assert!(assemble(&l, &streams).is_err());
    }

    #[test]
    fn window_counts() {
        let s = Signal::new(2, 120, (0..240).map(f64::from).collect()).unwrap();
        let w = window(&s, 60, 30, 3, 9).unwrap();
        let starts: Vec<_> = w.iter().map(|x| x.start_frame).collect();
        assert_eq!(starts, [0, 30, 60]);
        assert_eq!(w[1].values[0], 30.0);
        assert_eq!(w[1].values[60], 150.0);
        assert!(w.iter().all(|x| x.label == 3 && x.source_sequence == 9));
        let one = Signal::new(1, 60, vec![0.0; 60]).unwrap();
        assert_eq!(window(&one, 60, 30, 0, 0).unwrap().len(), 1);
        let short = Signal::new(1, 59, vec![0.0; 59]).unwrap();
        assert!(window(&short, 60, 30, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn normalization_of_shared_orientation_is_identity() {
        let streams = vec![vec![sample(0.3); 5], vec![sample(0.3); 5]];
        let n = normalize_to_root(&streams, 0).unwrap();
        for s in n.iter().flatten() {
            for (a, b) in s.orientation.flatten().iter().zip(Mat3::IDENTITY.flatten()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(normalize_to_root(&streams, 2).is_err());
    }

    #[test]
    fn constant_channel_standardizes_to_zero() {
        let a = vec![5.0; 6];
        let b = vec![5.0; 6];
        let stats = ChannelStats::fit(&[&a, &b], 2, 3).unwrap();
        assert_eq!(stats.std, vec![STD_FLOOR; 2]);
        let mut x = a.clone();
        stats.apply(&mut x).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
        assert!(ChannelStats::fit(&[], 2, 3).is_err());
    }
}
