//! Score network with two block topologies and time-dependent early exit.
//!
//! Every block is a pre-normalized two-layer feedforward with a residual add
//! and an additive time-conditioning shift:
//!
//! ```text
//! a   = LN(h) + W_s·emb(u) + b_s
//! h' = h + W_2·silu(W_1·a + b_1) + b_2
//! ```
//!
//! `Stack` runs `blocks` of these in sequence. `USkip` runs `encoder`
//! blocks, one mid block and `decoder` blocks; decoder block `j` first merges
//! the running hidden state with the output of encoder block
//! `encoder − 1 − j` through a linear map on their concatenation. The head
//! reads the residual stream directly, without a final normalization, so
//! `ε̂` can grow linearly with `x` where `ε* ≈ x` near the prior.
//!
//! Early exit at depth `S`:
//! - `Stack` runs blocks `1..=S` and goes straight to the head.
//! - `USkip` always runs encoder and mid; decoder blocks `1..=S` run in full,
//!   the remaining decoder blocks only apply their merge map.

mod kernels;
mod params;

pub use params::{ParamSet, Tensor};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use kernels::*;

/// Block layout of a score network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    /// DiT-like sequence of `blocks` identical blocks.
    Stack { blocks: usize },
    /// U-ViT-like encoder / mid / decoder with long skip connections.
    USkip { encoder: usize, decoder: usize },
}

impl Architecture {
    /// 28-block DiT-XL/2 layout.
    pub const PAPER_DIT: Architecture = Architecture::Stack { blocks: 28 };
    /// U-ViT-S/4 layout: 6 encoder, 1 mid, 6 decoder blocks.
    pub const PAPER_UVIT: Architecture = Architecture::USkip { encoder: 6, decoder: 6 };

    /// Largest admissible retained-block count `S`.
    pub fn block_limit(&self) -> usize {
        match *self {
            Architecture::Stack { blocks } => blocks,
            Architecture::USkip { decoder, .. } => decoder,
        }
    }

    pub fn is_stack(&self) -> bool {
        matches!(self, Architecture::Stack { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Architecture::Stack { blocks } if blocks == 0 => config("stack needs at least one block"),
            Architecture::USkip { encoder, decoder } if encoder == 0 || decoder == 0 => {
                config("u_skip needs at least one encoder and one decoder block")
            }
            Architecture::USkip { encoder, decoder } if encoder != decoder => {
                config(format!("u_skip requires encoder == decoder, got {encoder} vs {decoder}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub arch: Architecture,
    pub width: usize,
    pub in_dim: usize,
    #[serde(default = "default_time_embed_dim")]
    pub time_embed_dim: usize,
    #[serde(default)]
    pub learned_variance: bool,
    /// `T`, used to map steps onto `u = t/T` for the time embedding.
    #[serde(default = "default_diffusion_steps")]
    pub diffusion_steps: usize,
}

fn default_time_embed_dim() -> usize {
    16
}
fn default_diffusion_steps() -> usize {
    1000
}

impl NetworkConfig {
    pub fn new(arch: Architecture, width: usize, in_dim: usize) -> Self {
        Self {
            arch,
            width,
            in_dim,
            time_embed_dim: default_time_embed_dim(),
            learned_variance: false,
            diffusion_steps: default_diffusion_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.width == 0 || self.in_dim == 0 || self.diffusion_steps == 0 {
            return config("network dimensions must be >= 1");
        }
        if self.time_embed_dim == 0 || self.time_embed_dim % 2 != 0 {
            return config(format!("time_embed_dim must be even and >= 2, got {}", self.time_embed_dim));
        }
        Ok(())
    }

    pub fn out_dim(&self) -> usize {
        if self.learned_variance {
            2 * self.in_dim
        } else {
            self.in_dim
        }
    }
}

/// Network output for a batch: `ε̂` and, with learned variance, the
/// interpolation weight `v ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub eps: Array2<f64>,
    pub v: Option<Array2<f64>>,
}

/// Loss gradient with respect to a [`NetOutput`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutputGrad {
    pub eps: Array2<f64>,
    pub v: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

impl Linear {
    fn macs(&self) -> u64 {
        (self.inp * self.out) as u64
    }
}

#[derive(Debug, Clone)]
struct Block {
    shift: Linear,
    fc1: Linear,
    fc2: Linear,
    merge: Option<Linear>,
}

#[derive(Debug, Clone)]
struct Layout {
    input: Linear,
    time: Linear,
    blocks: Vec<Block>,
    head: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Full(usize),
    MergeOnly(usize),
}

#[derive(Debug, Clone)]
pub struct ScoreNetwork {
    config: NetworkConfig,
    params: ParamSet,
    layout: Layout,
}

/// Deterministic initialization: fan-in scaled uniform weights, zero biases
/// and a zero output head so that a fresh network predicts `ε̂ = 0`.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<ScoreNetwork> {
    ScoreNetwork::new(config.clone(), seed)
}

impl ScoreNetwork {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut net = Self::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_w = net.layout.head.w;
        for (idx, t) in net.params.tensors_mut().iter_mut().enumerate() {
            if t.shape.len() != 2 || idx == head_w {
                continue;
            }
            let bound = 1.0 / (t.shape[1] as f64).sqrt();
            for x in &mut t.data {
                *x = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Network with every parameter zero; used as a template for loading.
    pub fn zeroed(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (params, layout) = build_layout(&config);
        Ok(Self { config, params, layout })
    }

    /// Rebuilds a network from a parameter set with the matching layout.
    pub fn from_params(config: NetworkConfig, params: ParamSet) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        if !net.params.same_layout(&params) {
            return config_err("parameter names or shapes do not match the network config");
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.arch
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.num_scalars()
    }

    /// Maximum retained-block count.
    pub fn max_depth(&self) -> usize {
        self.config.arch.block_limit()
    }

    /// Tensor-name prefix of the block at position `depth` (1-based) in drop order:
    /// `blocks.{i}` for stacks, `decoder.{i}` for u-skip nets.
    pub fn block_prefix(&self, depth: usize) -> String {
        match self.config.arch {
            Architecture::Stack { .. } => format!("blocks.{}.", depth - 1),
            Architecture::USkip { .. } => format!("decoder.{}.", depth - 1),
        }
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth == 0 || depth > self.max_depth() {
            return contract(format!("retained blocks {depth} outside 1..={}", self.max_depth()));
        }
        Ok(())
    }

    fn plan(&self, depth: usize) -> Vec<Op> {
        match self.config.arch {
            Architecture::Stack { .. } => (0..depth).map(Op::Full).collect(),
            Architecture::USkip { encoder, decoder } => {
                let mut ops: Vec<Op> = (0..=encoder).map(Op::Full).collect();
                for j in 0..decoder {
                    let idx = encoder + 1 + j;
                    ops.push(if j < depth { Op::Full(idx) } else { Op::MergeOnly(idx) });
                }
                ops
            }
        }
    }

    /// Multiply-accumulate count of one forward pass (linear maps only).
    pub fn flop_count(&self, depth: usize) -> Result<u64> {
        self.check_depth(depth)?;
        let l = &self.layout;
        let mut total = l.input.macs() + l.time.macs() + l.head.macs();
        for op in self.plan(depth) {
            match op {
                Op::Full(i) => {
                    let b = &l.blocks[i];
                    total += b.shift.macs() + b.fc1.macs() + b.fc2.macs();
                    total += b.merge.map_or(0, |m| m.macs());
                }
                Op::MergeOnly(i) => total += l.blocks[i].merge.map_or(0, |m| m.macs()),
            }
        }
        Ok(total)
    }

    pub fn forward_full(&self, x: ArrayView2<f64>, t: &[usize]) -> Result<NetOutput> {
        self.forward_early_exit(x, t, self.max_depth())
    }

    pub fn forward_early_exit(&self, x: ArrayView2<f64>, t: &[usize], depth: usize) -> Result<NetOutput> {
        let depths = vec![depth; t.len()];
        self.forward_depths(x, t, &depths)
    }

    /// Forward pass with an individual step and retained-block count per row.
    pub fn forward_depths(&self, x: ArrayView2<f64>, t: &[usize], depths: &[usize]) -> Result<NetOutput> {
        self.check_batch(x, t, depths)?;
        let mut ws = Workspace::new(&self.config);
        let mut raw = Array2::zeros((x.nrows(), self.config.out_dim()));
        let mut plans: Vec<Option<Vec<Op>>> = vec![None; self.max_depth() + 1];
        for i in 0..x.nrows() {
            let plan = plans[depths[i]].get_or_insert_with(|| self.plan(depths[i]));
            ws.x.iter_mut().zip(x.row(i)).for_each(|(d, s)| *d = *s);
            self.run_row(&mut ws, t[i], plan, None);
            raw.row_mut(i).iter_mut().zip(&ws.out).for_each(|(d, s)| *d = *s);
        }
        Ok(self.split_output(raw))
    }

    fn check_batch(&self, x: ArrayView2<f64>, t: &[usize], depths: &[usize]) -> Result<()> {
        if x.ncols() != self.config.in_dim {
            return contract(format!("input dim {} != {}", x.ncols(), self.config.in_dim));
        }
        if t.len() != x.nrows() || depths.len() != x.nrows() {
            return contract("one step and one depth per input row required");
        }
        for &d in depths {
            self.check_depth(d)?;
        }
        if let Some(&bad) = t.iter().find(|&&s| s == 0 || s > self.config.diffusion_steps) {
            return contract(format!("step {bad} outside 1..={}", self.config.diffusion_steps));
        }
        Ok(())
    }

    fn split_output(&self, raw: Array2<f64>) -> NetOutput {
        if !self.config.learned_variance {
            return NetOutput { eps: raw, v: None };
        }
        let d = self.config.in_dim;
        let eps = raw.slice(ndarray::s![.., ..d]).to_owned();
        let v = raw.slice(ndarray::s![.., d..]).mapv(sigmoid);
        NetOutput { eps, v: Some(v) }
    }

    /// Loss value and exact parameter gradients via reverse-mode
    /// differentiation. `loss` maps the batch output to the scalar loss and
    /// its gradient with respect to that output. Parameters of blocks skipped
    /// by early exit receive exactly zero gradient.
    pub fn param_gradients<F>(
        &self,
        x: ArrayView2<f64>,
        t: &[usize],
        depths: &[usize],
        loss: F,
    ) -> Result<(f64, ParamSet)>
    where
        F: FnOnce(&NetOutput) -> Result<(f64, NetOutputGrad)>,
    {
        self.check_batch(x, t, depths)?;
        let n = x.nrows();
        let mut ws = Workspace::new(&self.config);
        let mut raw = Array2::zeros((n, self.config.out_dim()));
        let mut caches = Vec::with_capacity(n);
        let plans: Vec<Vec<Op>> = (0..=self.max_depth()).map(|d| if d == 0 { vec![] } else { self.plan(d) }).collect();
        for i in 0..n {
            ws.x.iter_mut().zip(x.row(i)).for_each(|(d, s)| *d = *s);
            let mut cache = RowCache::default();
            self.run_row(&mut ws, t[i], &plans[depths[i]], Some(&mut cache));
            raw.row_mut(i).iter_mut().zip(&ws.out).for_each(|(d, s)| *d = *s);
            caches.push(cache);
        }
        let out = self.split_output(raw);
        let (value, grad) = loss(&out)?;
        if grad.eps.dim() != out.eps.dim() {
            return contract("loss gradient shape differs from output");
        }
        let d = self.config.in_dim;
        let mut grads = self.params.zeros_like();
        let mut d_out = vec![0.0; self.config.out_dim()];
        for i in 0..n {
            d_out[..d].iter_mut().zip(grad.eps.row(i)).for_each(|(a, b)| *a = *b);
            if let (Some(v), Some(dv)) = (&out.v, &grad.v) {
                for j in 0..d {
                    let s = v[[i, j]];
                    d_out[d + j] = dv[[i, j]] * s * (1.0 - s);
                }
            }
            self.backward_row(&caches[i], &plans[depths[i]], &d_out, &mut grads);
        }
        Ok((value, grads))
    }

    fn lin(&self, l: Linear) -> (&[f64], &[f64]) {
        (self.params.data(l.w), self.params.data(l.b))
    }

    fn run_row(&self, ws: &mut Workspace, t: usize, plan: &[Op], mut cache: Option<&mut RowCache>) {
        let l = &self.layout;
        let w = self.config.width;
        let u = t as f64 / self.config.diffusion_steps as f64;
        time_embedding(u, self.config.time_embed_dim, &mut ws.emb);
        let (tw, tb) = self.lin(l.time);
        affine(tw, tb, &ws.emb, &mut ws.time_pre);
        let (iw, ib) = self.lin(l.input);
        affine(iw, ib, &ws.x, &mut ws.h);
        for (h, p) in ws.h.iter_mut().zip(&ws.time_pre) {
            *h += silu(*p);
        }
        if let Some(c) = cache.as_deref_mut() {
            c.x = ws.x.clone();
            c.emb = ws.emb.clone();
            c.time_pre = ws.time_pre.clone();
        }
        let encoder = match self.config.arch {
            Architecture::USkip { encoder, .. } => encoder,
            Architecture::Stack { .. } => 0,
        };
        ws.skips.clear();
        for op in plan {
            let idx = match *op {
                Op::Full(i) | Op::MergeOnly(i) => i,
            };
            let blk = &l.blocks[idx];
            let mut merge_in = Vec::new();
            if let Some(m) = blk.merge {
                let skip = &ws.skips[encoder - 1 - (idx - encoder - 1)];
                ws.cat[..w].copy_from_slice(&ws.h);
                ws.cat[w..].copy_from_slice(skip);
                let (mw, mb) = self.lin(m);
                affine(mw, mb, &ws.cat, &mut ws.h);
                if cache.is_some() {
                    merge_in = ws.cat.clone();
                }
            }
            if let Op::MergeOnly(_) = op {
                if let Some(c) = cache.as_deref_mut() {
                    c.blocks.push(BlockCache { merge_in, ..Default::default() });
                }
                continue;
            }
            let rstd = layer_norm(&ws.h, &mut ws.normed);
            let (sw, sb) = self.lin(blk.shift);
            affine(sw, sb, &ws.emb, &mut ws.a);
            for (a, n) in ws.a.iter_mut().zip(&ws.normed) {
                *a += n;
            }
            let (w1, b1) = self.lin(blk.fc1);
            affine(w1, b1, &ws.a, &mut ws.z);
            for (g, z) in ws.g.iter_mut().zip(&ws.z) {
                *g = silu(*z);
            }
            let (w2, b2) = self.lin(blk.fc2);
            affine(w2, b2, &ws.g, &mut ws.tmp);
            for (h, d) in ws.h.iter_mut().zip(&ws.tmp) {
                *h += d;
            }
            if idx < encoder {
                ws.skips.push(ws.h.clone());
            }
            if let Some(c) = cache.as_deref_mut() {
                c.blocks.push(BlockCache {
                    merge_in,
                    normed: ws.normed.clone(),
                    rstd,
                    a: ws.a.clone(),
                    z: ws.z.clone(),
                    g: ws.g.clone(),
                });
            }
        }
        let (hw, hb) = self.lin(l.head);
        affine(hw, hb, &ws.h, &mut ws.out);
        if let Some(c) = cache {
            c.final_h = ws.h.clone();
        }
    }

    fn backward_row(&self, c: &RowCache, plan: &[Op], d_out: &[f64], grads: &mut ParamSet) {
        let l = &self.layout;
        let w = self.config.width;
        let encoder = match self.config.arch {
            Architecture::USkip { encoder, .. } => encoder,
            Architecture::Stack { .. } => 0,
        };
        let mut dh = vec![0.0; w];
        self.lin_backward(l.head, &c.final_h, d_out, grads, Some(&mut dh));
        let mut dskips = vec![vec![0.0; w]; encoder];
        let mut dg = vec![0.0; w];
        let mut da = vec![0.0; w];
        let mut dcat = vec![0.0; 2 * w];
        for (op, bc) in plan.iter().zip(&c.blocks).rev() {
            let idx = match *op {
                Op::Full(i) | Op::MergeOnly(i) => i,
            };
            let blk = &l.blocks[idx];
            if let Op::Full(_) = op {
                if idx < encoder {
                    axpy(&mut dh, 1.0, &dskips[idx]);
                }
                dg.fill(0.0);
                self.lin_backward(blk.fc2, &bc.g, &dh, grads, Some(&mut dg));
                for (d, z) in dg.iter_mut().zip(&bc.z) {
                    *d *= silu_grad(*z);
                }
                da.fill(0.0);
                self.lin_backward(blk.fc1, &bc.a, &dg, grads, Some(&mut da));
                self.lin_backward(blk.shift, &c.emb, &da, grads, None);
                layer_norm_backward(&bc.normed, bc.rstd, &da, &mut dh);
            }
            if let Some(m) = blk.merge {
                dcat.fill(0.0);
                self.lin_backward(m, &bc.merge_in, &dh, grads, Some(&mut dcat));
                dh.copy_from_slice(&dcat[..w]);
                let j = encoder - 1 - (idx - encoder - 1);
                axpy(&mut dskips[j], 1.0, &dcat[w..]);
            }
        }
        self.lin_backward(l.input, &c.x, &dh, grads, None);
        for (d, p) in dh.iter_mut().zip(&c.time_pre) {
            *d *= silu_grad(*p);
        }
        self.lin_backward(l.time, &c.emb, &dh, grads, None);
    }

    fn lin_backward(&self, l: Linear, x: &[f64], dy: &[f64], grads: &mut ParamSet, dx: Option<&mut [f64]>) {
        let w = self.params.data(l.w);
        // weight and bias live in distinct tensors; split the borrow through a temporary
        let mut db = std::mem::take(&mut grads.tensors_mut()[l.b].data);
        affine_backward(w, x, dy, grads.data_mut(l.w), &mut db, dx);
        grads.tensors_mut()[l.b].data = db;
    }
}

fn config_err<T>(msg: &str) -> Result<T> {
    config(msg)
}

fn build_layout(cfg: &NetworkConfig) -> (ParamSet, Layout) {
    let mut ps = ParamSet::default();
    let w = cfg.width;
    let e = cfg.time_embed_dim;
    let linear = |ps: &mut ParamSet, name: &str, inp: usize, out: usize| Linear {
        w: ps.push(Tensor::zeros(format!("{name}.weight"), vec![out, inp])),
        b: ps.push(Tensor::zeros(format!("{name}.bias"), vec![out])),
        inp,
        out,
    };
    let input = linear(&mut ps, "input", cfg.in_dim, w);
    let time = linear(&mut ps, "time", e, w);
    let block = |ps: &mut ParamSet, prefix: &str, merge: bool| Block {
        merge: merge.then(|| linear(ps, &format!("{prefix}.merge"), 2 * w, w)),
        shift: linear(ps, &format!("{prefix}.shift"), e, w),
        fc1: linear(ps, &format!("{prefix}.fc1"), w, w),
        fc2: linear(ps, &format!("{prefix}.fc2"), w, w),
    };
    let mut blocks = Vec::new();
    match cfg.arch {
        Architecture::Stack { blocks: n } => {
            for i in 0..n {
                blocks.push(block(&mut ps, &format!("blocks.{i}"), false));
            }
        }
        Architecture::USkip { encoder, decoder } => {
            for i in 0..encoder {
                blocks.push(block(&mut ps, &format!("encoder.{i}"), false));
            }
            blocks.push(block(&mut ps, "mid", false));
            for i in 0..decoder {
                blocks.push(block(&mut ps, &format!("decoder.{i}"), true));
            }
        }
    }
    let head = linear(&mut ps, "head", w, cfg.out_dim());
    (ps, Layout { input, time, blocks, head })
}

struct Workspace {
    x: Vec<f64>,
    emb: Vec<f64>,
    time_pre: Vec<f64>,
    h: Vec<f64>,
    normed: Vec<f64>,
    a: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
    tmp: Vec<f64>,
    cat: Vec<f64>,
    out: Vec<f64>,
    skips: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(cfg: &NetworkConfig) -> Self {
        let w = cfg.width;
        Self {
            x: vec![0.0; cfg.in_dim],
            emb: vec![0.0; cfg.time_embed_dim],
            time_pre: vec![0.0; w],
            h: vec![0.0; w],
            normed: vec![0.0; w],
            a: vec![0.0; w],
            z: vec![0.0; w],
            g: vec![0.0; w],
            tmp: vec![0.0; w],
            cat: vec![0.0; 2 * w],
            out: vec![0.0; cfg.out_dim()],
            skips: Vec::new(),
        }
    }
}

#[derive(Default)]
struct BlockCache {
    merge_in: Vec<f64>,
    normed: Vec<f64>,
    rstd: f64,
    a: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Default)]
struct RowCache {
    x: Vec<f64>,
    emb: Vec<f64>,
    time_pre: Vec<f64>,
    blocks: Vec<BlockCache>,
    final_h: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn stack(n: usize, w: usize) -> NetworkConfig {
        NetworkConfig::new(Architecture::Stack { blocks: n }, w, 2)
    }

    #[test]
    fn init_is_deterministic_and_predicts_zero() {
        let cfg = stack(3, 8);
        let a = ScoreNetwork::new(cfg.clone(), 7).unwrap();
        let b = ScoreNetwork::new(cfg, 7).unwrap();
        assert_eq!(a.params(), b.params());
        let x = array![[0.3, -2.0], [5.0, 1.0]];
        let out = a.forward_full(x.view(), &[1, 999]).unwrap();
        assert!(out.eps.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn param_count_stack_closed_form() {
        let net = ScoreNetwork::new(stack(8, 64), 0).unwrap();
        // input 2·64+64, time 16·64+64, 8 blocks of (16·64+64 + 2·(64·64+64)), head 64·2+2
        let per_block = (16 * 64 + 64) + 2 * (64 * 64 + 64);
        let expect = (2 * 64 + 64) + (16 * 64 + 64) + 8 * per_block + (64 * 2 + 2);
        assert_eq!(net.param_count(), expect);
        assert_eq!(expect, 76674);
    }

    #[test]
    fn invalid_configs() {
        assert!(ScoreNetwork::new(stack(0, 8), 0).is_err());
        assert!(ScoreNetwork::new(stack(2, 0), 0).is_err());
        let mut c = stack(2, 8);
        c.time_embed_dim = 3;
        assert!(ScoreNetwork::new(c, 0).is_err());
        let u = NetworkConfig::new(Architecture::USkip { encoder: 2, decoder: 3 }, 8, 2);
        assert!(ScoreNetwork::new(u, 0).is_err());
    }

    #[test]
    fn depth_bounds() {
        let net = ScoreNetwork::new(stack(3, 8), 1).unwrap();
        let x = array![[0.1, 0.2]];
        assert!(net.forward_early_exit(x.view(), &[5], 0).is_err());
        assert!(net.forward_early_exit(x.view(), &[5], 4).is_err());
        assert!(net.forward_early_exit(x.view(), &[0], 2).is_err());
    }

    #[test]
    fn flop_counts() {
        let net = ScoreNetwork::new(stack(4, 8), 0).unwrap();
        // hand count: input 2·8, time 16·8, head 8·2, block 16·8 + 2·64
        let base = 16 + 128 + 16;
        let block = 128 + 128;
        for s in 1..=4 {
            assert_eq!(net.flop_count(s).unwrap(), (base + s * block) as u64);
        }
        let u = ScoreNetwork::new(NetworkConfig::new(Architecture::USkip { encoder: 2, decoder: 2 }, 8, 2), 0).unwrap();
        let merge = 16 * 8;
        // 2 encoder + mid full, decoder: S full (+merge), rest merge only
        assert_eq!(u.flop_count(2).unwrap(), (base + 5 * block + 2 * merge) as u64);
        assert_eq!(u.flop_count(1).unwrap(), (base + 4 * block + 2 * merge) as u64);
    }
}
