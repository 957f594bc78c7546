//! Skeleton definition: joint tree, sensor sites and skin weights.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::rotation::{add, Mat3, Vec3};
use crate::{Error, Result};

const DEFAULT_SKELETON: &str = include_str!("../../data/skeleton_default.toml");

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3,
}

/// A point on the skin carrying a virtual IMU.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorVertex {
    pub name: String,
    pub rest_position: Vec3,
    /// `(joint index, weight)` pairs, non-negative and summing to one.
    pub weights: Vec<(usize, f64)>,
    /// Fixed rotation from the sensor frame to the carrying joint's frame.
    pub mount: Mat3,
}

impl SensorVertex {
    /// Joint with the largest skin weight; ties resolve to the lowest index.
    pub fn dominant_joint(&self) -> usize {
        let mut best = self.weights[0];
        for &(j, w) in &self.weights[1..] {
            if w > best.1 || (w == best.1 && j < best.0) {
                best = (j, w);
            }
        }
        best.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
    sensors: Vec<SensorVertex>,
    rest_joint_positions: Vec<Vec3>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    joint: Vec<JointEntry>,
    #[serde(default)]
    sensor: Vec<SensorEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    parent: Option<String>,
    offset: Vec3,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorEntry {
    name: String,
    rest_position: Vec3,
    weights: BTreeMap<String, f64>,
    /// Axis-angle mount rotation in radians.
    #[serde(default)]
    mount: Option<Vec3>,
}

impl Skeleton {
    /// Validates and builds a skeleton. Joints must be stored parents-first.
    pub fn new(joints: Vec<Joint>, sensors: Vec<SensorVertex>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("skeleton has no joints"));
        }
        let roots = joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(Error::invalid(format!("skeleton must have exactly one root, found {roots}")));
        }
        if joints[0].parent.is_some() {
            return Err(Error::invalid("the root joint must be stored first"));
        }
        if joints[0].offset != [0.0; 3] {
            return Err(Error::invalid(
                "the root joint defines the origin and must have a zero offset",
            ));
        }
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= i {
                    return Err(Error::invalid(format!(
                        "joint `{}` (index {i}) has parent index {p}; parents must precede children",
                        j.name
                    )));
                }
            }
            if j.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("joint `{}` has a non-finite offset", j.name)));
            }
        }
        for (i, j) in joints.iter().enumerate() {
            if joints[..i].iter().any(|k| k.name == j.name) {
                return Err(Error::invalid(format!("duplicate joint name `{}`", j.name)));
            }
        }
        for (i, s) in sensors.iter().enumerate() {
            if sensors[..i].iter().any(|k| k.name == s.name) {
                return Err(Error::invalid(format!("duplicate sensor name `{}`", s.name)));
            }
            if s.weights.is_empty() {
                return Err(Error::invalid(format!("sensor `{}` references no joint", s.name)));
            }
            let mut total = 0.0;
            for &(j, w) in &s.weights {
                if j >= joints.len() {
                    return Err(Error::invalid(format!("sensor `{}` references joint {j}", s.name)));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!("sensor `{}` has negative weight {w}", s.name)));
                }
                total += w;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "skin weights of sensor `{}` sum to {total}, expected 1",
                    s.name
                )));
            }
            if !s.mount.is_rotation() {
                return Err(Error::invalid(format!("sensor `{}` mount is not a rotation", s.name)));
            }
        }
        let mut rest_joint_positions: Vec<Vec3> = Vec::with_capacity(joints.len());
        for j in &joints {
            let base = j.parent.map_or([0.0; 3], |p| rest_joint_positions[p]);
            rest_joint_positions.push(add(base, j.offset));
        }
        Ok(Self {
            joints,
            sensors,
            rest_joint_positions,
        })
    }

    /// Parses the TOML skeleton format (`[[joint]]` and `[[sensor]]` tables).
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SkeletonFile =
            toml::from_str(text).map_err(|e| Error::format("skeleton", e.message().to_string()))?;
        let mut joints: Vec<Joint> = Vec::with_capacity(file.joint.len());
        for entry in file.joint {
            let parent = match entry.parent {
                None => None,
                Some(p) => Some(joints.iter().position(|j| j.name == p).ok_or_else(|| {
                    Error::invalid(format!(
                        "joint `{}` names parent `{p}` which is not defined before it",
                        entry.name
                    ))
                })?),
            };
            joints.push(Joint {
                name: entry.name,
                parent,
                offset: entry.offset,
            });
        }
        let mut sensors = Vec::with_capacity(file.sensor.len());
        for entry in file.sensor {
            let mut weights = Vec::with_capacity(entry.weights.len());
            for (joint, w) in entry.weights {
                let idx = joints.iter().position(|j| j.name == joint).ok_or_else(|| {
                    Error::invalid(format!("sensor `{}` weights unknown joint `{joint}`", entry.name))
                })?;
                weights.push((idx, w));
            }
            weights.sort_by_key(|&(j, _)| j);
            sensors.push(SensorVertex {
                name: entry.name,
                rest_position: entry.rest_position,
                weights,
                mount: entry.mount.map_or(Mat3::IDENTITY, Mat3::from_axis_angle),
            });
        }
        Self::new(joints, sensors)
    }

    /// The shipped 24-joint body with six sensor sites.
    pub fn standard() -> Self {
        Self::from_toml(DEFAULT_SKELETON).expect("bundled skeleton is valid")
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn sensors(&self) -> &[SensorVertex] {
        &self.sensors
    }

    pub fn rest_joint_positions(&self) -> &[Vec3] {
        &self.rest_joint_positions
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn sensor_index(&self, name: &str) -> Result<usize> {
        self.sensors
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown sensor vertex `{name}`")))
    }

    pub fn sensor(&self, name: &str) -> Result<&SensorVertex> {
        Ok(&self.sensors[self.sensor_index(name)?])
    }

    /// Copy with every rest offset and sensor rest position multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let joints = self
            .joints
            .iter()
            .map(|j| Joint {
                offset: j.offset.map(|v| v * s),
                ..j.clone()
            })
            .collect();
        let sensors = self
            .sensors
            .iter()
            .map(|v| SensorVertex {
                rest_position: v.rest_position.map(|c| c * s),
                ..v.clone()
            })
            .collect();
        Self::new(joints, sensors)
    }
}
