//! Articulated skeleton forward model and virtual IMU synthesis.

mod rotation;
mod skeleton;

pub use rotation::{add, norm, scale, sub, Mat3, Vec3, ROTATION_TOL};
pub use skeleton::{Joint, SensorVertex, Skeleton};

use crate::{Error, Result};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;

/// One frame of body pose. Joint rotations are local to the parent joint;
/// the root joint's own local rotation is applied after `root_orientation`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseFrame {
    pub joint_rotations: Vec<Mat3>,
    pub root_orientation: Mat3,
    pub root_translation: Vec3,
    pub time_index: usize,
}

impl PoseFrame {
    /// Rest pose at the origin.
    pub fn identity(joints: usize, time_index: usize) -> Self {
        Self {
            joint_rotations: vec![Mat3::IDENTITY; joints],
            root_orientation: Mat3::IDENTITY,
            root_translation: [0.0; 3],
            time_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.root_orientation.is_rotation() {
            return Err(Error::invalid(format!(
                "frame {}: root orientation is not a rotation",
                self.time_index
            )));
        }
        if let Some(j) = self.joint_rotations.iter().position(|r| !r.is_rotation()) {
            return Err(Error::invalid(format!(
                "frame {}: rotation of joint {j} is not orthonormal",
                self.time_index
            )));
        }
        if self.root_translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "frame {}: non-finite root translation",
                self.time_index
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<PoseFrame>,
    pub frame_rate: f64,
    pub label: usize,
}

impl MotionSequence {
    pub fn new(frames: Vec<PoseFrame>, frame_rate: f64, label: usize) -> Result<Self> {
        let seq = Self {
            frames,
            frame_rate,
            label,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "frame rate must be positive, got {}",
                self.frame_rate
            )));
        }
        if self.frames.len() < 3 {
            return Err(Error::invalid(format!(
                "a motion sequence needs at least 3 frames, got {}",
                self.frames.len()
            )));
        }
        for pair in self.frames.windows(2) {
            if pair[1].time_index != pair[0].time_index + 1 {
                return Err(Error::invalid(format!(
                    "frames are not consecutive: {} followed by {}",
                    pair[0].time_index, pair[1].time_index
                )));
            }
        }
        Ok(())
    }
}

/// Rigid transform `x ↦ rotation·x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Transform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(self.rotation.apply(p), self.translation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirtualImuSample {
    /// Sensor frame to global frame.
    pub orientation: Mat3,
    /// Global-frame acceleration in m/s².
    pub acceleration: Vec3,
}

/// Options for [`sample_virtual_imus`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImuOptions {
    /// Report specific force (coordinate acceleration plus `GRAVITY·e_z`)
    /// instead of pure coordinate acceleration.
    pub include_gravity: bool,
}

/// Global transform of every joint for one pose.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &PoseFrame) -> Result<Vec<Transform>> {
    let joints = skeleton.joints();
    if pose.joint_rotations.len() != joints.len() {
        return Err(Error::invalid(format!(
            "pose has {} joint rotations, skeleton has {} joints",
            pose.joint_rotations.len(),
            joints.len()
        )));
    }
    pose.validate()?;
    let mut out: Vec<Transform> = Vec::with_capacity(joints.len());
    for (joint, &local) in joints.iter().zip(&pose.joint_rotations) {
        let t = match joint.parent {
            None => Transform {
                rotation: pose.root_orientation * local,
                translation: pose.root_translation,
            },
            Some(p) => {
                let parent = out[p];
                Transform {
                    rotation: parent.rotation * local,
                    translation: parent.apply(joint.offset),
                }
            }
        };
        out.push(t);
    }
    Ok(out)
}

/// Linear-blend-skinned world position of a sensor vertex.
pub fn skin_position(skeleton: &Skeleton, globals: &[Transform], vertex: &str) -> Result<Vec3> {
    let idx = skeleton.sensor_index(vertex)?;
    skin_vertex(skeleton, globals, idx)
}

fn skin_vertex(skeleton: &Skeleton, globals: &[Transform], idx: usize) -> Result<Vec3> {
    if globals.len() != skeleton.joint_count() {
        return Err(Error::invalid(format!(
            "{} transforms for {} joints",
            globals.len(),
            skeleton.joint_count()
        )));
    }
    let v = &skeleton.sensors()[idx];
    let rest = skeleton.rest_joint_positions();
    // Accumulated as a displacement from the rest position; since the
    // weights sum to one this equals the plain blend and is exact at rest.
    let mut shift = [0.0; 3];
    for &(j, w) in &v.weights {
        let local = sub(v.rest_position, rest[j]);
        let moved = add(
            sub(globals[j].rotation.apply(local), local),
            sub(globals[j].translation, rest[j]),
        );
        shift = add(shift, scale(moved, w));
    }
    Ok(add(v.rest_position, shift))
}

/// Second central difference `(p_prev + p_next − 2·p_cur)/dt²`.
pub fn virtual_acceleration(p_prev: Vec3, p_cur: Vec3, p_next: Vec3, dt: f64) -> Result<Vec3> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let inv = 1.0 / (dt * dt);
    Ok(std::array::from_fn(|k| {
        (p_prev[k] + p_next[k] - 2.0 * p_cur[k]) * inv
    }))
}

/// Per-sensor series of virtual IMU readings for the interior frames of
/// `seq` (the first and last frame are dropped).
pub fn sample_virtual_imus(
    seq: &MotionSequence,
    skeleton: &Skeleton,
    sensors: &[&str],
    options: ImuOptions,
) -> Result<Vec<Vec<VirtualImuSample>>> {
    seq.validate()?;
    let idx: Vec<usize> = sensors
        .iter()
        .map(|s| skeleton.sensor_index(s))
        .collect::<Result<_>>()?;
    let mut positions = vec![Vec::with_capacity(seq.len()); idx.len()];
    let mut orientations = vec![Vec::with_capacity(seq.len()); idx.len()];
    for frame in &seq.frames {
        let globals = forward_kinematics(skeleton, frame)?;
        for (k, &i) in idx.iter().enumerate() {
            positions[k].push(skin_vertex(skeleton, &globals, i)?);
            let v = &skeleton.sensors()[i];
            orientations[k].push(globals[v.dominant_joint()].rotation * v.mount);
        }
    }
    let dt = seq.dt();
    let mut out = Vec::with_capacity(idx.len());
    for (pos, ori) in positions.iter().zip(&orientations) {
        let mut series = Vec::with_capacity(seq.len() - 2);
        for t in 1..seq.len() - 1 {
            let mut acceleration = virtual_acceleration(pos[t - 1], pos[t], pos[t + 1], dt)?;
            if options.include_gravity {
                acceleration[2] += GRAVITY;
            }
            series.push(VirtualImuSample {
                orientation: ori[t],
                acceleration,
            });
        }
        out.push(series);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Skeleton {
        let joints = (0..n)
            .map(|i| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: if i == 0 {
                    [0.0; 3]
                } else {
                    [0.1 * i as f64, 0.2, -0.05]
                },
            })
            .collect();
        let sensors = vec![SensorVertex {
            name: "tip".into(),
            rest_position: [0.4, 0.5, 0.1],
            weights: vec![(n - 1, 1.0)],
            mount: Mat3::IDENTITY,
        }];
        Skeleton::new(joints, sensors).unwrap()
    }

    #[test]
    fn identity_pose_places_joints_at_rest() {
        let s = Skeleton::standard();
        let g = forward_kinematics(&s, &PoseFrame::identity(24, 0)).unwrap();
        for (t, r) in g.iter().zip(s.rest_joint_positions()) {
            for (a, b) in t.translation.iter().zip(r.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_joint_count_mismatch_and_bad_rotation() {
        let s = chain(3);
        assert!(forward_kinematics(&s, &PoseFrame::identity(2, 0)).is_err());
        let mut p = PoseFrame::identity(3, 0);
        p.joint_rotations[1].0[0][0] = 1.1;
        assert!(forward_kinematics(&s, &p).is_err());
    }

    #[test]
    fn identity_pose_skins_to_rest_position() {
        let s = Skeleton::standard();
        let g = forward_kinematics(&s, &PoseFrame::identity(24, 0)).unwrap();
        for v in s.sensors() {
            let p = skin_position(&s, &g, &v.name).unwrap();
            assert_eq!(p, v.rest_position);
        }
        assert!(skin_position(&s, &g, "nose").is_err());
    }

    #[test]
    fn acceleration_of_constant_and_quadratic() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(virtual_acceleration(p, p, p, 0.1).unwrap(), [0.0; 3]);
        let dt = 1.0 / 60.0;
        let z = |t: f64| [0.0, 0.0, 0.5 * GRAVITY * (t * dt).powi(2)];
        let a = virtual_acceleration(z(4.0), z(5.0), z(6.0), dt).unwrap();
        assert!((a[2] - GRAVITY).abs() < 1e-9);
        assert!(virtual_acceleration(p, p, p, 0.0).is_err());
        assert!(virtual_acceleration(p, p, p, -1.0).is_err());
    }

    #[test]
    fn short_or_gapped_sequences_are_rejected() {
        let frames = vec![PoseFrame::identity(3, 0), PoseFrame::identity(3, 1)];
        assert!(MotionSequence::new(frames.clone(), 60.0, 0).is_err());
        let mut gapped = frames;
        gapped.push(PoseFrame::identity(3, 3));
        assert!(MotionSequence::new(gapped, 60.0, 0).is_err());
    }

    #[test]
    fn gravity_switch_adds_vertical_offset() {
        let frames = (0..5).map(|t| PoseFrame::identity(3, t)).collect();
        let seq = MotionSequence::new(frames, 60.0, 0).unwrap();
        let s = chain(3);
        let plain = sample_virtual_imus(&seq, &s, &["tip"], ImuOptions::default()).unwrap();
        let grav = sample_virtual_imus(
            &seq,
            &s,
            &["tip"],
            ImuOptions {
                include_gravity: true,
            },
        )
        .unwrap();
        assert_eq!(plain[0].len(), 3);
        for (a, b) in plain[0].iter().zip(&grav[0]) {
            assert_eq!(a.acceleration, [0.0; 3]);
            assert_eq!(b.acceleration, [0.0, 0.0, GRAVITY]);
        }
    }
}
