//! Small fixed-size 3-D linear algebra.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

/// Tolerance for orthonormality and determinant checks.
pub const ROTATION_TOL: f64 = 1e-6;

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Default for Mat3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Row-major flattening.
    pub fn flatten(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn from_flat(v: &[f64]) -> Mat3 {
        Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    /// Rodrigues' formula for a rotation of `|w|` radians about `w/|w|`.
    pub fn from_axis_angle(w: Vec3) -> Mat3 {
        let theta = norm(w);
        if theta < 1e-15 {
            return Mat3::IDENTITY;
        }
        let [x, y, z] = scale(w, 1.0 / theta);
        let (s, c) = theta.sin_cos();
        let t = 1.0 - c;
        Mat3([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    pub fn rot_x(a: f64) -> Mat3 {
        Mat3::from_axis_angle([a, 0.0, 0.0])
    }

    pub fn rot_y(a: f64) -> Mat3 {
        Mat3::from_axis_angle([0.0, a, 0.0])
    }

    pub fn rot_z(a: f64) -> Mat3 {
        Mat3::from_axis_angle([0.0, 0.0, a])
    }

    /// `max |RᵀR − I|` entry.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - e).abs());
            }
        }
        worst
    }

    pub fn is_rotation(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
            && self.orthonormality_error() <= ROTATION_TOL
            && (self.det() - 1.0).abs() <= ROTATION_TOL
    }

    /// Nearest rotation by Newton iteration on the polar decomposition,
    /// `R ← ½(R + R⁻ᵀ)`. Suitable for matrices close to a rotation.
    pub fn orthonormalize(&self) -> Mat3 {
        let mut r = *self;
        for _ in 0..30 {
            let inv_t = match r.inverse() {
                Some(inv) => inv.transpose(),
                None => return Mat3::IDENTITY,
            };
            let mut next = Mat3([[0.0; 3]; 3]);
            for i in 0..3 {
                for j in 0..3 {
                    next.0[i][j] = 0.5 * (r.0[i][j] + inv_t.0[i][j]);
                }
            }
            let delta = next
                .0
                .iter()
                .flatten()
                .zip(r.0.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            r = next;
            if delta < 1e-15 {
                break;
            }
        }
        r
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return None;
        }
        let m = &self.0;
        let c = |a: usize, b: usize, e: usize, f: usize| m[a][b] * m[e][f] - m[a][f] * m[e][b];
        let adj = [
            [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
            [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
            [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
        ];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = adj[i][j] / d;
            }
        }
        Some(Mat3(out))
    }
}

impl Mul for Mat3 {
    type Output = Mat3;

    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        Mat3(out)
    }
}
