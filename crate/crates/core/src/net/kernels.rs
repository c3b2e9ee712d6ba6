//! Row-level dense kernels. Each output row depends only on its own input
//! row, so batching never changes results.

pub(crate) const LN_EPS: f64 = 1e-5;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += k·x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], k: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += k * b;
    }
}

/// `out = W·x + b` for row-major `W` of shape `(out.len(), x.len())`.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, slot) in out.iter_mut().enumerate() {
        *slot = b[o] + dot(&w[o * n..(o + 1) * n], x);
    }
}

/// Backward of [`affine`]: accumulates `dW += dy ⊗ x`, `db += dy` and, when
/// requested, `dx += Wᵀ·dy`.
pub(crate) fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n = x.len();
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        axpy(&mut dw[o * n..(o + 1) * n], g, x);
    }
    if let Some(dx) = dx {
        for (o, &g) in dy.iter().enumerate() {
            axpy(dx, g, &w[o * n..(o + 1) * n]);
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Parameter-free layer normalization; returns `1/σ`.
pub(crate) fn layer_norm(x: &[f64], out: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - mean) * rstd;
    }
    rstd
}

/// Adds the input gradient of [`layer_norm`] to `dx`.
pub(crate) fn layer_norm_backward(normed: &[f64], rstd: f64, dy: &[f64], dx: &mut [f64]) {
    let n = dy.len() as f64;
    let mean_dy = dy.iter().sum::<f64>() / n;
    let mean_dyn = dy.iter().zip(normed).map(|(a, b)| a * b).sum::<f64>() / n;
    for ((d, g), y) in dx.iter_mut().zip(dy).zip(normed) {
        *d += rstd * (g - mean_dy - y * mean_dyn);
    }
}

/// Sinusoidal features of `u ∈ [0, 1]` on the `1000·u` scale, `dim` even.
pub(crate) fn time_embedding(u: f64, dim: usize, out: &mut [f64]) {
    let half = dim / 2;
    let tau = 1000.0 * u;
    for j in 0..half {
        let freq = (-(10_000f64).ln() * j as f64 / half as f64).exp();
        let arg = tau * freq;
        out[j] = arg.sin();
        out[half + j] = arg.cos();
    }
}
