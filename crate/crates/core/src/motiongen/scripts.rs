//! Parametric joint-angle scripts, one per activity class.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kinematics::{Mat3, PoseFrame, Vec3};

/// Standing pelvis height of the bundled skeleton in metres.
const STAND_HEIGHT: f64 = 0.93;
const SIT_HEIGHT: f64 = 0.50;
const ARM_DOWN: f64 = 1.35;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Script {
    UpperBody,
    LowerBody,
    Locomotion,
    Jumping,
    ComputerWorks,
    Running,
    SitStand,
    Bending,
}

impl Script {
    pub(crate) fn from_name(name: &str) -> Option<Script> {
        Some(match name {
            "Upper Body" => Script::UpperBody,
            "Lower Body" => Script::LowerBody,
            "Locomotion" => Script::Locomotion,
            "Jumping" => Script::Jumping,
            "Computer Works" => Script::ComputerWorks,
            "Running" => Script::Running,
            "Sit Stand" => Script::SitStand,
            "Bending" => Script::Bending,
            _ => return None,
        })
    }
}

// Joint indices of the bundled skeleton.
const PELVIS: usize = 0;
const L_HIP: usize = 1;
const R_HIP: usize = 2;
const SPINE1: usize = 3;
const L_KNEE: usize = 4;
const R_KNEE: usize = 5;
const SPINE2: usize = 6;
const L_ANKLE: usize = 7;
const R_ANKLE: usize = 8;
const SPINE3: usize = 9;
const NECK: usize = 12;
const HEAD: usize = 15;
const L_SHOULDER: usize = 16;
const R_SHOULDER: usize = 17;
const L_ELBOW: usize = 18;
const R_ELBOW: usize = 19;
const L_WRIST: usize = 20;
const R_WRIST: usize = 21;
pub(crate) const JOINTS: usize = 24;

/// Seeded jitter shared by all scripts.
#[derive(Clone, Copy, Debug)]
struct Params {
    amp: f64,
    freq: f64,
    phase: f64,
    heading: f64,
    speed: f64,
    variant: bool,
    tremor_freq: f64,
    tremor_phase: f64,
}

impl Params {
    fn draw(script: Script, rng: &mut ChaCha8Rng) -> Self {
        let (lo, hi) = match script {
            Script::UpperBody => (0.3, 0.7),
            Script::LowerBody => (0.5, 0.9),
            Script::Locomotion => (0.8, 1.0),
            Script::Jumping => (1.2, 1.6),
            Script::ComputerWorks => (0.1, 0.3),
            Script::Running => (1.3, 1.5),
            Script::SitStand => (0.15, 0.25),
            Script::Bending => (0.2, 0.4),
        };
        let speed = match script {
            Script::Locomotion => rng.random_range(1.0..1.5),
            Script::Running => rng.random_range(2.5..3.5),
            _ => 0.0,
        };
        Self {
            amp: rng.random_range(0.8..1.2),
            freq: rng.random_range(lo..hi),
            phase: rng.random_range(0.0..TAU),
            heading: rng.random_range(0.0..TAU),
            speed,
            variant: rng.random_bool(0.5),
            tremor_freq: rng.random_range(3.0..5.0),
            tremor_phase: rng.random_range(0.0..TAU),
        }
    }
}

fn rx(a: f64) -> Mat3 {
    Mat3::rot_x(a)
}

fn ry(a: f64) -> Mat3 {
    Mat3::rot_y(a)
}

fn rz(a: f64) -> Mat3 {
    Mat3::rot_z(a)
}

/// Raised-cosine cycle in `[0, 1]`, zero at `u = 0`.
fn cycle(u: f64) -> f64 {
    0.5 * (1.0 - u.cos())
}

struct Body {
    rot: Vec<Mat3>,
    height: f64,
    /// Root offset in the heading frame (x left, y forward).
    shift: [f64; 2],
    yaw: f64,
}

impl Body {
    fn standing() -> Self {
        let mut rot = vec![Mat3::IDENTITY; JOINTS];
        rot[L_SHOULDER] = ry(ARM_DOWN);
        rot[R_SHOULDER] = ry(-ARM_DOWN);
        Self {
            rot,
            height: STAND_HEIGHT,
            shift: [0.0, 0.0],
            yaw: 0.0,
        }
    }

    /// Shoulder flexion (forward raise) and elbow flexion for one arm.
    fn arm(&mut self, left: bool, flex: f64, elbow: f64) {
        if left {
            self.rot[L_SHOULDER] = rx(flex) * ry(ARM_DOWN);
            self.rot[L_ELBOW] = rz(elbow);
        } else {
            self.rot[R_SHOULDER] = rx(flex) * ry(-ARM_DOWN);
            self.rot[R_ELBOW] = rz(-elbow);
        }
    }

    /// Hip flexion and knee flexion for one leg (both angles positive).
    fn leg(&mut self, left: bool, hip: f64, knee: f64) {
        let (h, k, a) = if left {
            (L_HIP, L_KNEE, L_ANKLE)
        } else {
            (R_HIP, R_KNEE, R_ANKLE)
        };
        self.rot[h] = rx(hip);
        self.rot[k] = rx(-knee);
        self.rot[a] = rx(0.3 * knee - 0.3 * hip);
    }

    /// Forward trunk flexion spread over the three spine joints.
    fn trunk(&mut self, bend: f64, twist: f64) {
        for j in [SPINE1, SPINE2, SPINE3] {
            self.rot[j] = rz(twist / 3.0) * rx(-bend / 3.0);
        }
    }

    fn into_frame(self, heading: f64, time_index: usize) -> PoseFrame {
        let yaw = heading + self.yaw;
        let (s, c) = heading.sin_cos();
        // Heading frame: x left, y forward, rotated about z.
        let [dx, dy] = self.shift;
        let translation: Vec3 = [c * dx - s * dy, s * dx + c * dy, self.height];
        PoseFrame {
            joint_rotations: self.rot,
            root_orientation: rz(yaw),
            root_translation: translation,
            time_index,
        }
    }
}

/// Builds `frames` poses of `script` sampled at `frame_rate`.
pub(crate) fn animate(script: Script, frames: usize, frame_rate: f64, seed: u64) -> Vec<PoseFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Params::draw(script, &mut rng);
    (0..frames)
        .map(|i| {
            let t = i as f64 / frame_rate;
            pose(script, &p, t).into_frame(p.heading, i)
        })
        .collect()
}

fn pose(script: Script, p: &Params, t: f64) -> Body {
    let u = TAU * p.freq * t + p.phase;
    let a = p.amp;
    let mut b = Body::standing();
    match script {
        Script::UpperBody => {
            // Forward arm raises, either together or alternating.
            let other = if p.variant { u } else { u + PI };
            b.arm(true, 2.2 * a * cycle(u), 0.6 * a * cycle(u));
            b.arm(false, 2.2 * a * cycle(other), 0.6 * a * cycle(other));
            b.trunk(0.1 * a * cycle(u), 0.25 * a * u.sin());
            b.rot[NECK] = rx(-0.15 * a * cycle(u));
        }
        Script::LowerBody => {
            // Alternating knee raises on the spot.
            let l = u.sin().max(0.0);
            let r = (-u.sin()).max(0.0);
            let hip = if p.variant { 1.4 } else { 1.0 };
            b.leg(true, hip * a * l, 1.6 * a * l);
            b.leg(false, hip * a * r, 1.6 * a * r);
            b.arm(true, -0.2 * l, 0.3);
            b.arm(false, -0.2 * r, 0.3);
            b.yaw = 0.05 * u.sin();
        }
        Script::Locomotion => {
            let s = u.sin();
            b.leg(true, 0.4 * a * s, 0.1 + 0.6 * a * (u - 0.6).sin().max(0.0));
            b.leg(false, -0.4 * a * s, 0.1 + 0.6 * a * (-(u - 0.6).sin()).max(0.0));
            b.arm(true, -0.35 * a * s, 0.2);
            b.arm(false, 0.35 * a * s, 0.2);
            b.trunk(0.05, 0.1 * s);
            b.height = STAND_HEIGHT - 0.02 * cycle(2.0 * u);
            b.shift = [0.0, p.speed * t];
        }
        Script::Jumping => {
            let up = cycle(u);
            let crouch = 1.0 - up;
            b.leg(true, 0.6 * a * crouch, 1.0 * a * crouch);
            b.leg(false, 0.6 * a * crouch, 1.0 * a * crouch);
            let arms = if p.variant { 2.6 * up } else { 1.2 * up };
            b.arm(true, a * arms, 0.2);
            b.arm(false, a * arms, 0.2);
            b.trunk(0.4 * a * crouch, 0.0);
            b.height = STAND_HEIGHT - 0.2 * a * crouch + 0.25 * a * up * up;
        }
        Script::ComputerWorks => {
            // Seated, forearms on a desk, typing tremor and occasional
            // glances.
            b.leg(true, 1.5, 1.5);
            b.leg(false, 1.5, 1.5);
            b.height = SIT_HEIGHT;
            let tremor = (TAU * p.tremor_freq * t + p.tremor_phase).sin();
            b.arm(true, 0.5 + 0.03 * tremor, 1.3 + 0.05 * tremor);
            b.arm(false, 0.5 - 0.03 * tremor, 1.3 - 0.05 * tremor);
            b.rot[L_WRIST] = rx(0.12 * a * tremor);
            b.rot[R_WRIST] = rx(-0.12 * a * tremor);
            b.trunk(0.15, 0.0);
            b.rot[HEAD] = rz(0.3 * a * u.sin()) * rx(0.1 * (0.5 * u).sin());
            b.shift = [0.003 * u.sin(), 0.003 * u.cos()];
        }
        Script::Running => {
            let s = u.sin();
            b.leg(true, 0.7 * a * s, 0.3 + 1.1 * a * (u - 0.8).sin().max(0.0));
            b.leg(false, -0.7 * a * s, 0.3 + 1.1 * a * (-(u - 0.8).sin()).max(0.0));
            b.arm(true, -0.6 * a * s, 1.5);
            b.arm(false, 0.6 * a * s, 1.5);
            b.trunk(0.2, 0.15 * s);
            b.height = STAND_HEIGHT - 0.04 + 0.06 * (2.0 * u).sin().abs();
            b.shift = [0.0, p.speed * t];
        }
        Script::SitStand => {
            let s = cycle(u);
            b.leg(true, 1.5 * s, 1.5 * s);
            b.leg(false, 1.5 * s, 1.5 * s);
            b.height = STAND_HEIGHT - (STAND_HEIGHT - SIT_HEIGHT) * s;
            b.shift = [0.0, -0.15 * s];
            b.trunk(0.5 * a * (PI * s).sin(), 0.0);
            b.arm(true, 0.3 * s, 0.8 * s);
            b.arm(false, 0.3 * s, 0.8 * s);
        }
        Script::Bending => {
            let s = cycle(u);
            b.trunk(1.4 * a * s, if p.variant { 0.3 * s } else { 0.0 });
            b.leg(true, -0.1 * s, 0.15 * s);
            b.leg(false, -0.1 * s, 0.15 * s);
            b.arm(true, 0.4 * s, 0.1);
            b.arm(false, 0.4 * s, 0.1);
            b.shift = [0.0, -0.1 * s];
        }
    }
    b.rot[PELVIS] = Mat3::IDENTITY;
    b
}
