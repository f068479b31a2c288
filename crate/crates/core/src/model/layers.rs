//! Slice kernels for one sample: strided 1-D convolution, its transpose and
//! dense layers, forward and backward. Activations are channel-major
//! (`[channel][time]`). Backward kernels accumulate into their outputs.

/// Sizes of a convolution (or of the transposed convolution it mirrors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub len_in: usize,
    pub len_out: usize,
}

/// Iteration indices `it` in `0..n_iter` for which `it·stride + tap − padding`
/// lands in `0..n_target`.
#[inline]
fn valid_range(tap: usize, stride: usize, padding: usize, n_iter: usize, n_target: usize) -> (usize, usize) {
    let lo = if padding > tap {
        (padding - tap).div_ceil(stride)
    } else {
        0
    };
    let reach = n_target + padding;
    let hi = if reach <= tap {
        0
    } else {
        ((reach - 1 - tap) / stride + 1).min(n_iter)
    };
    (lo, hi.max(lo))
}

/// `out[o][t] = b[o] + Σ_c Σ_j w[o][c][j]·x[c][t·s + j − p]`.
pub fn conv1d_forward(d: &ConvDims, w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let (k, s, p) = (d.kernel, d.stride, d.padding);
    for o in 0..d.c_out {
        let row = &mut out[o * d.len_out..(o + 1) * d.len_out];
        row.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..d.c_in {
            let xc = &x[c * d.len_in..(c + 1) * d.len_in];
            for j in 0..k {
                let wv = w[(o * d.c_in + c) * k + j];
                let (lo, hi) = valid_range(j, s, p, d.len_out, d.len_in);
                for t in lo..hi {
                    row[t] += wv * xc[t * s + j - p];
                }
            }
        }
    }
}

pub fn conv1d_backward(
    d: &ConvDims,
    w: &[f64],
    x: &[f64],
    grad_out: &[f64],
    mut grad_w: Option<&mut [f64]>,
    mut grad_b: Option<&mut [f64]>,
    mut grad_x: Option<&mut [f64]>,
) {
    let (k, s, p) = (d.kernel, d.stride, d.padding);
    for o in 0..d.c_out {
        let g = &grad_out[o * d.len_out..(o + 1) * d.len_out];
        if let Some(gb) = grad_b.as_deref_mut() {
            gb[o] += g.iter().sum::<f64>();
        }
        for c in 0..d.c_in {
            let xc = &x[c * d.len_in..(c + 1) * d.len_in];
            for j in 0..k {
                let widx = (o * d.c_in + c) * k + j;
                let (lo, hi) = valid_range(j, s, p, d.len_out, d.len_in);
                if let Some(gw) = grad_w.as_deref_mut() {
                    let mut acc = 0.0;
                    for t in lo..hi {
                        acc += g[t] * xc[t * s + j - p];
                    }
                    gw[widx] += acc;
                }
                if let Some(gx) = grad_x.as_deref_mut() {
                    let wv = w[widx];
                    let gxc = &mut gx[c * d.len_in..(c + 1) * d.len_in];
                    for t in lo..hi {
                        gxc[t * s + j - p] += wv * g[t];
                    }
                }
            }
        }
    }
}

/// Transposed convolution, weights `[c_in][c_out][kernel]`:
/// `out[o][i·s + j − p] += w[c][o][j]·x[c][i]`, plus `b[o]`.
pub fn conv_transpose1d_forward(d: &ConvDims, w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let (k, s, p) = (d.kernel, d.stride, d.padding);
    for o in 0..d.c_out {
        out[o * d.len_out..(o + 1) * d.len_out]
            .iter_mut()
            .for_each(|v| *v = b[o]);
    }
    for c in 0..d.c_in {
        let xc = &x[c * d.len_in..(c + 1) * d.len_in];
        for o in 0..d.c_out {
            let row = &mut out[o * d.len_out..(o + 1) * d.len_out];
            for j in 0..k {
                let wv = w[(c * d.c_out + o) * k + j];
                let (lo, hi) = valid_range(j, s, p, d.len_in, d.len_out);
                for i in lo..hi {
                    row[i * s + j - p] += wv * xc[i];
                }
            }
        }
    }
}

pub fn conv_transpose1d_backward(
    d: &ConvDims,
    w: &[f64],
    x: &[f64],
    grad_out: &[f64],
    mut grad_w: Option<&mut [f64]>,
    mut grad_b: Option<&mut [f64]>,
    mut grad_x: Option<&mut [f64]>,
) {
    let (k, s, p) = (d.kernel, d.stride, d.padding);
    if let Some(gb) = grad_b.as_deref_mut() {
        for o in 0..d.c_out {
            gb[o] += grad_out[o * d.len_out..(o + 1) * d.len_out].iter().sum::<f64>();
        }
    }
    for c in 0..d.c_in {
        let xc = &x[c * d.len_in..(c + 1) * d.len_in];
        for o in 0..d.c_out {
            let g = &grad_out[o * d.len_out..(o + 1) * d.len_out];
            for j in 0..k {
                let widx = (c * d.c_out + o) * k + j;
                let (lo, hi) = valid_range(j, s, p, d.len_in, d.len_out);
                if let Some(gw) = grad_w.as_deref_mut() {
                    let mut acc = 0.0;
                    for i in lo..hi {
                        acc += xc[i] * g[i * s + j - p];
                    }
                    gw[widx] += acc;
                }
                if let Some(gx) = grad_x.as_deref_mut() {
                    let wv = w[widx];
                    let gxc = &mut gx[c * d.len_in..(c + 1) * d.len_in];
                    for i in lo..hi {
                        gxc[i] += wv * g[i * s + j - p];
                    }
                }
            }
        }
    }
}

/// `y = W·x + b` with `W` row-major `[out][in]`.
pub fn dense_forward(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *yo = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    grad_y: &[f64],
    mut grad_w: Option<&mut [f64]>,
    mut grad_b: Option<&mut [f64]>,
    mut grad_x: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, g) in grad_y.iter().enumerate() {
        if let Some(gb) = grad_b.as_deref_mut() {
            gb[o] += g;
        }
        if let Some(gw) = grad_w.as_deref_mut() {
            for (gwv, xv) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                *gwv += g * xv;
            }
        }
        if let Some(gx) = grad_x.as_deref_mut() {
            for (gxv, wv) in gx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *gxv += g * wv;
            }
        }
    }
}
