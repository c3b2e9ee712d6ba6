#![allow(dead_code)]

use ase::net::{NetOutput, NetOutputGrad, ScoreNetwork};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Overwrites every parameter, head and biases included, with uniform noise
/// so that no gradient is zero by construction.
pub fn scramble(net: &mut ScoreNetwork, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in net.params_mut().tensors_mut() {
        for x in &mut t.data {
            *x = rng.gen_range(-0.6..0.6);
        }
    }
}

fn weights(rows: usize, cols: usize, salt: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37 + salt).sin())
}

/// Smooth scalar loss: a fixed linear functional of ε̂ plus a quadratic in v.
pub fn probe_loss(out: &NetOutput) -> (f64, NetOutputGrad) {
    let we = weights(out.eps.nrows(), out.eps.ncols(), 0.1);
    let mut l = (&out.eps * &we).sum();
    let v_grad = out.v.as_ref().map(|v| {
        l += v.mapv(|a| a * a).sum();
        v.mapv(|a| 2.0 * a)
    });
    (l, NetOutputGrad { eps: we, v: v_grad })
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub nonzero: usize,
}

/// Analytic gradients against central differences with step `h`, one row
/// per entry of `depths`. Pairs where both values are below 1e-7 in
/// magnitude are compared absolutely.
pub fn grad_check(net: &ScoreNetwork, depths: &[usize], h: f64) -> GradCheck {
    let in_dim = net.config().in_dim;
    let x = Array2::from_shape_fn((depths.len(), in_dim), |(i, j)| 0.8 * ((i + 2 * j) as f64).cos());
    let t: Vec<usize> = (0..depths.len()).map(|i| 1 + 317 * i % 1000).collect();
    let (_, grads) = net.param_gradients(x.view(), &t, depths, |o| Ok(probe_loss(o))).unwrap();
    let value = |n: &ScoreNetwork, x: ArrayView2<f64>| probe_loss(&n.forward_depths(x, &t, depths).unwrap()).0;
    let mut probe = net.clone();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, nonzero: 0 };
    for (ti, tensor) in net.params().tensors().iter().enumerate() {
        for k in 0..tensor.data.len() {
            let orig = tensor.data[k];
            probe.params_mut().tensors_mut()[ti].data[k] = orig + h;
            let up = value(&probe, x.view());
            probe.params_mut().tensors_mut()[ti].data[k] = orig - h;
            let down = value(&probe, x.view());
            probe.params_mut().tensors_mut()[ti].data[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grads.tensors()[ti].data[k];
            let scale = an.abs().max(fd.abs());
            let err = if scale < 1e-7 { (an - fd).abs() } else { (an - fd).abs() / scale };
            out.max_rel_error = out.max_rel_error.max(err);
            out.checked += 1;
            if an != 0.0 {
                out.nonzero += 1;
            }
        }
    }
    out
}
