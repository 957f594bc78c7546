//! im2col-based kernels for valid (unpadded) strided convolution and its
//! transpose. One-dimensional variants run through the same code with a unit
//! height.

use rayon::prelude::*;

use super::gemm::gemm;
use crate::{Error, Result};

// Samples per GEMM. Fixed, so the summation order does not depend on the
// batch split or the thread count.
const CHUNK: usize = 4;

/// Geometry of a valid strided cross-correlation from `cin×h×w` to
/// `cout×oh×ow`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(
        cin: usize,
        cout: usize,
        (h, w): (usize, usize),
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
    ) -> Result<Self> {
        if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
            return Err(Error::shape("kernel and stride must be >= 1"));
        }
        if h < kh || w < kw {
            return Err(Error::shape(format!(
                "input {h}x{w} smaller than kernel {kh}x{kw}"
            )));
        }
        Ok(Self {
            cin,
            cout,
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            oh: (h - kh) / sh + 1,
            ow: (w - kw) / sw + 1,
        })
    }

    /// Geometry whose forward pass is the adjoint of a transposed convolution
    /// taking `cin×ih×iw` to `cout×((ih−1)·sh+kh)×((iw−1)·sw+kw)`.
    pub fn for_transpose(
        cin: usize,
        cout: usize,
        (ih, iw): (usize, usize),
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
    ) -> Result<Self> {
        if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
            return Err(Error::shape("kernel and stride must be >= 1"));
        }
        let h = (ih - 1) * sh + kh;
        let w = (iw - 1) * sw + kw;
        let g = Self::new(cout, cin, (h, w), (kh, kw), (sh, sw))?;
        debug_assert_eq!((g.oh, g.ow), (ih, iw));
        Ok(g)
    }

    /// Rows of the unrolled patch matrix.
    pub fn patch_len(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    pub fn in_len(&self) -> usize {
        self.cin * self.h * self.w
    }

    pub fn out_positions(&self) -> usize {
        self.oh * self.ow
    }

    pub fn out_len(&self) -> usize {
        self.cout * self.oh * self.ow
    }
}

/// Unrolls the patches of a batch into one `patch_len × (batch·positions)`
/// matrix: row `(ci, ki, kj)` holds, sample after sample, the input value
/// under that kernel tap at every output position.
fn im2col(x: &[f64], batch: usize, g: &ConvGeom) -> Vec<f64> {
    let (k, p) = (g.patch_len(), g.out_positions());
    let bp = batch * p;
    let mut cols = vec![0.0; k * bp];
    cols.par_chunks_mut(bp).enumerate().for_each(|(row, dst)| {
        let (ci, ki, kj) = (row / (g.kh * g.kw), (row / g.kw) % g.kh, row % g.kw);
        for n in 0..batch {
            let plane = &x[n * g.in_len() + ci * g.h * g.w..][..g.h * g.w];
            for oy in 0..g.oh {
                let src = &plane[(oy * g.sh + ki) * g.w + kj..];
                let out = &mut dst[n * p + oy * g.ow..][..g.ow];
                if g.sw == 1 {
                    out.copy_from_slice(&src[..g.ow]);
                } else {
                    for (ox, v) in out.iter_mut().enumerate() {
                        *v = src[ox * g.sw];
                    }
                }
            }
        }
    });
    cols
}

/// Adjoint of [`im2col`]: scatters every column entry back onto the input
/// position it was read from, accumulating into `x`.
fn col2im_add(cols: &[f64], batch: usize, g: &ConvGeom, x: &mut [f64]) {
    let (k, p) = (g.patch_len(), g.out_positions());
    let bp = batch * p;
    x.par_chunks_mut(g.in_len()).enumerate().for_each(|(n, xn)| {
        for row in 0..k {
            let (ci, ki, kj) = (row / (g.kh * g.kw), (row / g.kw) % g.kh, row % g.kw);
            let plane = &mut xn[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            let src = &cols[row * bp + n * p..][..p];
            for oy in 0..g.oh {
                let base = (oy * g.sh + ki) * g.w + kj;
                for (ox, v) in src[oy * g.ow..(oy + 1) * g.ow].iter().enumerate() {
                    plane[base + ox * g.sw] += v;
                }
            }
        }
    });
}

/// `[batch, channels, p]` to `[channels, batch·p]`.
fn channel_major(x: &[f64], batch: usize, channels: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (n, sample) in x.chunks(channels * p).enumerate().take(batch) {
        for (c, row) in sample.chunks(p).enumerate() {
            out[(c * batch + n) * p..][..p].copy_from_slice(row);
        }
    }
    out
}

/// `[channels, batch·p]` to `[batch, channels, p]`.
fn batch_major(x: &[f64], batch: usize, channels: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (c, rows) in x.chunks(batch * p).enumerate().take(channels) {
        for (n, row) in rows.chunks(p).enumerate() {
            out[(n * channels + c) * p..][..p].copy_from_slice(row);
        }
    }
    out
}

/// `aᵀ·b` when `trans_a`, else `a·b`; `c` is `m×n`.
fn matmul(m: usize, k: usize, n: usize, a: &[f64], trans_a: bool, b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, a, trans_a, b, false, 0.0, &mut c);
    c
}

/// Forward convolution over a batch, processed `CHUNK` samples at a time.
/// With `keep_cols` the per-chunk patch matrices are returned back to back
/// for the weight gradient.
pub(crate) fn conv_forward(
    batch: usize,
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    g: &ConvGeom,
    keep_cols: bool,
) -> (Vec<f64>, Vec<f64>) {
    let (k, p) = (g.patch_len(), g.out_positions());
    let mut y = vec![0.0; batch * g.out_len()];
    let mut kept = Vec::with_capacity(if keep_cols { k * batch * p } else { 0 });
    for (xs, ys) in x.chunks(CHUNK * g.in_len()).zip(y.chunks_mut(CHUNK * g.out_len())) {
        let nb = xs.len() / g.in_len();
        let cols = im2col(xs, nb, g);
        let mut yc = matmul(g.cout, k, nb * p, weight, false, &cols);
        for (row, b) in yc.chunks_mut(nb * p).zip(bias) {
            for v in row {
                *v += b;
            }
        }
        ys.copy_from_slice(&batch_major(&yc, nb, g.cout, p));
        if keep_cols {
            kept.extend_from_slice(&cols);
        }
    }
    (y, kept)
}

pub(crate) struct ConvGrads {
    pub dx: Option<Vec<f64>>,
    pub dw: Option<Vec<f64>>,
    pub db: Vec<f64>,
}

/// Backward pass of [`conv_forward`]. The weight gradient is produced only
/// when the kept patch matrices are supplied.
pub(crate) fn conv_backward(
    batch: usize,
    cols: Option<&[f64]>,
    weight: &[f64],
    g: &ConvGeom,
    dy: &[f64],
    need_dx: bool,
) -> ConvGrads {
    let (k, p) = (g.patch_len(), g.out_positions());
    let mut dw = cols.map(|_| vec![0.0; g.cout * k]);
    let mut dx = need_dx.then(|| vec![0.0; batch * g.in_len()]);
    for (c, dys) in dy.chunks(CHUNK * g.out_len()).enumerate() {
        let nb = dys.len() / g.out_len();
        let dyc = channel_major(dys, nb, g.cout, p);
        if let (Some(dw), Some(cols)) = (dw.as_mut(), cols) {
            let cc = &cols[c * CHUNK * k * p..][..k * nb * p];
            gemm(g.cout, nb * p, k, &dyc, false, cc, true, 1.0, dw);
        }
        if let Some(dx) = dx.as_mut() {
            let dcols = matmul(k, g.cout, nb * p, weight, true, &dyc);
            let xs = &mut dx[c * CHUNK * g.in_len()..][..nb * g.in_len()];
            col2im_add(&dcols, nb, g, xs);
        }
    }
    let db = channel_sums(batch, g.cout, p, dy);
    ConvGrads { dx, dw, db }
}

/// Transposed convolution. `g` is the adjoint geometry: its `cin×h×w` is the
/// output and its `cout×oh×ow` the input. The weight is laid out
/// `g.cout × g.cin × kh × kw`, i.e. (input channels, output channels, kernel).
pub(crate) fn deconv_forward(
    batch: usize,
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    g: &ConvGeom,
) -> Vec<f64> {
    let (k, p) = (g.patch_len(), g.out_positions());
    let plane = g.h * g.w;
    let mut y = vec![0.0; batch * g.in_len()];
    for sample in y.chunks_mut(g.in_len()) {
        for (chunk, b) in sample.chunks_mut(plane).zip(bias) {
            chunk.fill(*b);
        }
    }
    for (xs, ys) in x.chunks(CHUNK * g.out_len()).zip(y.chunks_mut(CHUNK * g.in_len())) {
        let nb = xs.len() / g.out_len();
        let xc = channel_major(xs, nb, g.cout, p);
        let cols = matmul(k, g.cout, nb * p, weight, true, &xc);
        col2im_add(&cols, nb, g, ys);
    }
    y
}

pub(crate) fn deconv_backward(
    batch: usize,
    x: &[f64],
    weight: &[f64],
    g: &ConvGeom,
    dy: &[f64],
    need_dx: bool,
) -> ConvGrads {
    let (k, p) = (g.patch_len(), g.out_positions());
    let mut dw = vec![0.0; g.cout * k];
    let mut dx = need_dx.then(|| vec![0.0; batch * g.out_len()]);
    for (c, dys) in dy.chunks(CHUNK * g.in_len()).enumerate() {
        let nb = dys.len() / g.in_len();
        let dcols = im2col(dys, nb, g);
        let xs = &x[c * CHUNK * g.out_len()..][..nb * g.out_len()];
        let xc = channel_major(xs, nb, g.cout, p);
        gemm(g.cout, nb * p, k, &xc, false, &dcols, true, 1.0, &mut dw);
        if let Some(dx) = dx.as_mut() {
            let dxc = matmul(g.cout, k, nb * p, weight, false, &dcols);
            dx[c * CHUNK * g.out_len()..][..nb * g.out_len()]
                .copy_from_slice(&batch_major(&dxc, nb, g.cout, p));
        }
    }
    let db = channel_sums(batch, g.cin, g.h * g.w, dy);
    ConvGrads { dx, dw: Some(dw), db }
}

fn channel_sums(batch: usize, channels: usize, plane: usize, dy: &[f64]) -> Vec<f64> {
    let mut db = vec![0.0; channels];
    for n in 0..batch {
        for (c, acc) in db.iter_mut().enumerate() {
            let start = (n * channels + c) * plane;
            *acc += dy[start..start + plane].iter().sum::<f64>();
        }
    }
    db
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], w: &[f64], b: &[f64], g: &ConvGeom) -> Vec<f64> {
        let mut y = vec![0.0; g.out_len()];
        for co in 0..g.cout {
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut s = b[co];
                    for ci in 0..g.cin {
                        for ki in 0..g.kh {
                            for kj in 0..g.kw {
                                s += w[((co * g.cin + ci) * g.kh + ki) * g.kw + kj]
                                    * x[(ci * g.h + oy * g.sh + ki) * g.w + ox * g.sw + kj];
                            }
                        }
                    }
                    y[(co * g.oh + oy) * g.ow + ox] = s;
                }
            }
        }
        y
    }

    #[test]
    fn im2col_conv_matches_direct_loops() {
        let g = ConvGeom::new(3, 4, (9, 7), (3, 2), (2, 1)).unwrap();
        let x: Vec<f64> = (0..2 * g.in_len()).map(|i| (i as f64 * 0.13).sin()).collect();
        let w: Vec<f64> = (0..g.cout * g.patch_len()).map(|i| (i as f64 * 0.7).cos()).collect();
        let b = vec![0.1, -0.2, 0.3, 0.0];
        let (y, _) = conv_forward(2, &x, &w, &b, &g, false);
        for n in 0..2 {
            let want = naive_conv(&x[n * g.in_len()..(n + 1) * g.in_len()], &w, &b, &g);
            for (a, e) in y[n * g.out_len()..(n + 1) * g.out_len()].iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_geometry_inverts_output_size() {
        let g = ConvGeom::for_transpose(96, 72, (7, 1), (5, 5), (1, 1)).unwrap();
        assert_eq!((g.h, g.w), (11, 5));
        let g = ConvGeom::for_transpose(48, 24, (15, 9), (2, 2), (2, 2)).unwrap();
        assert_eq!((g.h, g.w), (30, 18));
    }

    #[test]
    fn kernel_larger_than_input_is_rejected() {
        assert!(ConvGeom::new(1, 1, (3, 3), (4, 1), (1, 1)).is_err());
        assert!(ConvGeom::new(1, 1, (3, 3), (1, 1), (0, 1)).is_err());
    }
}
