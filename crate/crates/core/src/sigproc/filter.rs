//! Second-order recursive low-pass filter.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

/// Normalized biquad coefficients (`a0 = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth-Q low-pass via the bilinear transform.
    pub fn lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
            return Err(Error::invalid(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                sample_rate_hz / 2.0
            )));
        }
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - c) / a0;
        Ok(Self {
            b: [0.5 * b1, b1, 0.5 * b1],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        })
    }

    /// `|H(e^{jω})|` at frequency `f_hz`.
    pub fn magnitude(&self, f_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let z = |k: f64| ((k * w).cos(), -(k * w).sin());
        let (c1, s1) = z(1.0);
        let (c2, s2) = z(2.0);
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    /// Direct form I recursion from rest.
    pub fn run(&self, x: &[f64], y: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for (xi, yi) in x.iter().zip(y.iter_mut()) {
            let out = self.b[0] * xi + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *xi;
            y2 = y1;
            y1 = out;
            *yi = out;
        }
    }

    /// Filters one channel as if it had held its first value forever, so a
    /// constant channel passes through unchanged.
    pub fn run_settled(&self, x: &[f64], y: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let shifted: Vec<f64> = x.iter().map(|v| v - x0).collect();
        self.run(&shifted, y);
        for v in y.iter_mut() {
            *v += x0;
        }
    }
}
