use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dLayer {
    pub out_channels: usize,
    /// (time, channel) extent.
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
}

/// Layer plan for both pathways and the fusion head.
///
/// The 1-D pathway convolves along time with the `channels` sensor channels
/// as input channels. The 2-D pathway sees the window as a single-channel
/// `window × channels` plane. Decoders mirror the encoders with transposed
/// convolutions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub channels: usize,
    pub window: usize,
    pub conv1d: Vec<Conv1dLayer>,
    pub conv2d: Vec<Conv2dLayer>,
    pub fusion_dim: usize,
}

/// Every intermediate size implied by an [`ArchitectureSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapePlan {
    /// `(channels, length)` after the input and after every 1-D layer.
    pub stages_1d: Vec<(usize, usize)>,
    /// `(channels, height, width)` after the input and after every 2-D layer.
    pub stages_2d: Vec<(usize, usize, usize)>,
    pub latent_1d: usize,
    pub latent_2d: usize,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        let spec = Self::standard(36);
        debug_assert_eq!(spec.plan().map(|p| (p.latent_1d, p.latent_2d)).ok(), Some((6144, 672)));
        spec
    }
}

impl ArchitectureSpec {
    /// The standard layer plan for `channels` sensor channels over a 60-frame
    /// window: four stride-1 kernel-4 1-D layers (60→48, 36→128 channels)
    /// and 2-D layers (2, 2×2), (2, 2×2), (1, 5×5), (1, 5×5) taking 60×36 to
    /// 7×1 with 1→96 channels.
    pub fn standard(channels: usize) -> Self {
        let c1 = |out_channels| Conv1dLayer {
            out_channels,
            kernel: 4,
            stride: 1,
        };
        let c2 = |out_channels, k, s| Conv2dLayer {
            out_channels,
            kernel: [k, k],
            stride: [s, s],
        };
        Self {
            channels,
            window: 60,
            conv1d: vec![c1(64), c1(96), c1(112), c1(128)],
            conv2d: vec![c2(24, 2, 2), c2(48, 2, 2), c2(72, 5, 1), c2(96, 5, 1)],
            fusion_dim: 256,
        }
    }

    /// A small plan over a 12×16 window, used for whole-model gradient checks.
    pub fn shrunken() -> Self {
        let c1 = |out_channels| Conv1dLayer {
            out_channels,
            kernel: 4,
            stride: 1,
        };
        let c2 = |out_channels, k, s| Conv2dLayer {
            out_channels,
            kernel: [k, k],
            stride: [s, s],
        };
        Self {
            channels: 12,
            window: 16,
            conv1d: vec![c1(6), c1(6), c1(8), c1(8)],
            conv2d: vec![c2(3, 2, 2), c2(4, 2, 2), c2(4, 2, 1), c2(5, 2, 1)],
            fusion_dim: 6,
        }
    }

    /// Walks the layer stacks and returns every stage size, rejecting plans
    /// whose kernels do not fit.
    pub fn plan(&self) -> Result<ShapePlan> {
        if self.channels == 0 || self.window == 0 || self.fusion_dim == 0 {
            return Err(Error::shape("channels, window and fusion_dim must be >= 1"));
        }
        if self.conv1d.is_empty() || self.conv2d.is_empty() {
            return Err(Error::shape("both pathways need at least one layer"));
        }
        let mut stages_1d = vec![(self.channels, self.window)];
        for (i, l) in self.conv1d.iter().enumerate() {
            let (_, len) = *stages_1d.last().unwrap();
            if l.kernel == 0 || l.stride == 0 || l.out_channels == 0 || len < l.kernel {
                return Err(Error::shape(format!(
                    "1-D layer {i}: kernel {} does not fit length {len}",
                    l.kernel
                )));
            }
            stages_1d.push((l.out_channels, (len - l.kernel) / l.stride + 1));
        }
        let mut stages_2d = vec![(1, self.window, self.channels)];
        for (i, l) in self.conv2d.iter().enumerate() {
            let (_, h, w) = *stages_2d.last().unwrap();
            let [kh, kw] = l.kernel;
            let [sh, sw] = l.stride;
            if kh == 0 || kw == 0 || sh == 0 || sw == 0 || l.out_channels == 0 || h < kh || w < kw {
                return Err(Error::shape(format!(
                    "2-D layer {i}: kernel {kh}x{kw} does not fit {h}x{w}"
                )));
            }
            stages_2d.push((l.out_channels, (h - kh) / sh + 1, (w - kw) / sw + 1));
        }
        // Transposed layers must land exactly on the encoder input sizes.
        for (i, l) in self.conv1d.iter().enumerate() {
            let (_, before) = stages_1d[i];
            let (_, after) = stages_1d[i + 1];
            if (after - 1) * l.stride + l.kernel != before {
                return Err(Error::shape(format!(
                    "1-D layer {i}: transposed layer cannot restore length {before}"
                )));
            }
        }
        for (i, l) in self.conv2d.iter().enumerate() {
            let (_, bh, bw) = stages_2d[i];
            let (_, ah, aw) = stages_2d[i + 1];
            if (ah - 1) * l.stride[0] + l.kernel[0] != bh || (aw - 1) * l.stride[1] + l.kernel[1] != bw {
                return Err(Error::shape(format!(
                    "2-D layer {i}: transposed layer cannot restore {bh}x{bw}"
                )));
            }
        }
        let (c1, l1) = *stages_1d.last().unwrap();
        let (c2, h2, w2) = *stages_2d.last().unwrap();
        Ok(ShapePlan {
            latent_1d: c1 * l1,
            latent_2d: c2 * h2 * w2,
            stages_1d,
            stages_2d,
        })
    }
}

/// Which fusion head joins the two pathways.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionVariant {
    /// Concatenation of both latents into one classifier (feature level).
    V1,
    /// Sigmoid-gated sum of projected latents (decision level).
    V2,
    /// V2 plus a symmetric KL penalty between the pathway feature
    /// distributions.
    V3,
}

impl FusionVariant {
    pub const ALL: [FusionVariant; 3] = [FusionVariant::V1, FusionVariant::V2, FusionVariant::V3];

    /// Run label, e.g. `MARS-v2`.
    pub fn label(self) -> String {
        format!("MARS-{self}")
    }
}

impl fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionVariant::V1 => "v1",
            FusionVariant::V2 => "v2",
            FusionVariant::V3 => "v3",
        })
    }
}

impl FromStr for FusionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(FusionVariant::V1),
            "v2" => Ok(FusionVariant::V2),
            "v3" => Ok(FusionVariant::V3),
            other => Err(Error::config("fusion", format!("expected v1|v2|v3, got `{other}`"))),
        }
    }
}

/// How the reconstruction error enters the training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Squared errors summed over the batch and every window value.
    Sum,
    /// The summed error divided by the number of values in the batch
    /// (`B·N·T`).
    #[default]
    Mean,
}

/// Weights of the auxiliary objective terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub weight_decay: f64,
    /// Only used by [`FusionVariant::V3`].
    pub fairness: f64,
    #[serde(default)]
    pub reconstruction_reduction: Reduction,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            reconstruction: 1.0,
            weight_decay: 1e-4,
            fairness: 0.1,
            reconstruction_reduction: Reduction::Mean,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("reconstruction", self.reconstruction),
            ("weight_decay", self.weight_decay),
            ("fairness", self.fairness),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("loss weight must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}
