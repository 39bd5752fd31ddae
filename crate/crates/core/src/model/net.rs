//! The recurrent U-Net: a time-shared convolutional encoder with a learnable
//! carry of the previous step's state, temporally max-pooled skips and a 2D
//! decoder ending in a single logistic map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::batch::{BatchTensor, ProbMap};
use super::config::{CarryKind, ModelConfig};
use super::kernels::{self as k, Real};
use super::params::{Group, Param, ParameterSet, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`, for kernels followed by ReLU.
    FanIn(usize),
    /// Uniform in `±sqrt(3 / fan_in)`, for kernels with a linear or logistic output.
    FanInLinear(usize),
    Zero,
    One,
}

struct LayoutEntry {
    path: String,
    group: Group,
    layer: usize,
    shape: Vec<usize>,
    init: Init,
}

#[derive(Debug, Clone, Copy)]
struct EncIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    carry: usize,
}

#[derive(Debug, Clone, Copy)]
struct DecIdx {
    up_w: usize,
    up_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    enc: [Option<EncIdx>; MAX_LEVELS],
    dec: [Option<DecIdx>; MAX_LEVELS],
    head_w: usize,
    head_b: usize,
}

const MAX_LEVELS: usize = 16;

/// Network definition for one [`ModelConfig`]; parameters are passed per call.
#[derive(Debug, Clone)]
pub struct RecurrentUNet {
    cfg: ModelConfig,
}

/// Builds a freshly initialised parameter set for `config`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<ParameterSet> {
    RecurrentUNet::new(config.clone())?.init(seed)
}

struct EncStep<R> {
    col1: Vec<R>,
    z: Vec<R>,
    col2: Vec<R>,
    h: Vec<R>,
    mask: Option<Vec<R>>,
    pool_arg: Vec<u32>,
}

struct EncLevel<R> {
    steps: Vec<EncStep<R>>,
    skip_arg: Vec<u32>,
}

struct DecLevel<R> {
    up_in: Vec<R>,
    col1: Vec<R>,
    d1: Vec<R>,
    col2: Vec<R>,
    d2: Vec<R>,
}

struct Trace<R> {
    enc: Vec<EncLevel<R>>,
    dec: Vec<DecLevel<R>>,
    logits: Vec<R>,
}

impl RecurrentUNet {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.depth + 1 > MAX_LEVELS {
            return Err(Error::Config(format!("depth {} too large", cfg.depth)));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn layout(&self) -> Vec<LayoutEntry> {
        let cfg = &self.cfg;
        let d = cfg.depth;
        let p = cfg.pooled_steps();
        let mut out = Vec::new();
        let mut push = |path: String, group, layer, shape: Vec<usize>, init| {
            out.push(LayoutEntry {
                path,
                group,
                layer,
                shape,
                init,
            })
        };
        for l in 0..=d {
            let c = cfg.level_channels(l);
            let cin = if l == 0 {
                cfg.in_channels
            } else {
                cfg.level_channels(l - 1)
            };
            let e = Group::Encoder;
            push(format!("encoder.{l}.conv1.weight"), e, 2 * l, vec![c, cin, 3, 3], Init::FanIn(cin * 9));
            push(format!("encoder.{l}.conv1.bias"), e, 2 * l, vec![c], Init::Zero);
            push(format!("encoder.{l}.conv2.weight"), e, 2 * l + 1, vec![c, c, 3, 3], Init::FanIn(c * 9));
            push(format!("encoder.{l}.conv2.bias"), e, 2 * l + 1, vec![c], Init::Zero);
            let carry = match cfg.carry {
                CarryKind::PerChannel => c,
                CarryKind::Scalar => 1,
            };
            push(format!("encoder.{l}.carry"), e, 2 * l + 1, vec![carry], Init::One);
        }
        for j in 0..d {
            let l = d - 1 - j;
            let c = cfg.level_channels(l);
            let cin = if j == 0 {
                cfg.level_channels(d) * p
            } else {
                cfg.level_channels(l + 1)
            };
            let g = Group::Decoder;
            push(format!("decoder.{j}.up.weight"), g, 3 * j, vec![cin, c, 2, 2], Init::FanInLinear(cin));
            push(format!("decoder.{j}.up.bias"), g, 3 * j, vec![c], Init::Zero);
            let cat = c + c * p;
            push(format!("decoder.{j}.conv1.weight"), g, 3 * j + 1, vec![c, cat, 3, 3], Init::FanIn(cat * 9));
            push(format!("decoder.{j}.conv1.bias"), g, 3 * j + 1, vec![c], Init::Zero);
            push(format!("decoder.{j}.conv2.weight"), g, 3 * j + 2, vec![c, c, 3, 3], Init::FanIn(c * 9));
            push(format!("decoder.{j}.conv2.bias"), g, 3 * j + 2, vec![c], Init::Zero);
        }
        let c0 = cfg.level_channels(0);
        push("decoder.head.weight".into(), Group::Decoder, 3 * d, vec![1, c0, 1, 1], Init::Zero);
        push("decoder.head.bias".into(), Group::Decoder, 3 * d, vec![1], Init::Zero);
        out
    }

    /// Fresh parameters: fan-in uniform kernels, zero biases and head, unit carries.
    pub fn init(&self, seed: u64) -> Result<ParameterSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        for e in self.layout() {
            let n: usize = e.shape.iter().product();
            let values = match e.init {
                Init::Zero => vec![0.0; n],
                Init::One => vec![1.0; n],
                Init::FanIn(fan_in) | Init::FanInLinear(fan_in) => {
                    let gain = if matches!(e.init, Init::FanIn(_)) { 6.0 } else { 3.0 };
                    let bound = (gain / fan_in as f64).sqrt() as f32;
                    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
                }
            };
            params.insert(
                e.path,
                Param {
                    group: e.group,
                    layer: e.layer,
                    shape: e.shape,
                    values,
                },
            );
        }
        Ok(params)
    }

    /// Checks `params` against this config's layout.
    pub fn check_params<R: Real>(&self, params: &Params<R>) -> Result<()> {
        self.bind(params).map(|_| ())
    }

    fn bind<R: Real>(&self, params: &Params<R>) -> Result<Bound> {
        let layout = self.layout();
        if params.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "parameter set has {} entries, config expects {}",
                params.len(),
                layout.len()
            )));
        }
        for e in &layout {
            let p = params
                .get(&e.path)
                .ok_or_else(|| Error::Dimension(format!("missing parameter `{}`", e.path)))?;
            if p.shape != e.shape || p.values.len() != p.numel() {
                return Err(Error::Dimension(format!(
                    "parameter `{}` has shape {:?}, config expects {:?}",
                    e.path, p.shape, e.shape
                )));
            }
        }
        let idx = |path: String| params.index_of(&path).expect("checked above");
        let mut enc = [None; MAX_LEVELS];
        for (l, slot) in enc.iter_mut().enumerate().take(self.cfg.depth + 1) {
            *slot = Some(EncIdx {
                w1: idx(format!("encoder.{l}.conv1.weight")),
                b1: idx(format!("encoder.{l}.conv1.bias")),
                w2: idx(format!("encoder.{l}.conv2.weight")),
                b2: idx(format!("encoder.{l}.conv2.bias")),
                carry: idx(format!("encoder.{l}.carry")),
            });
        }
        let mut dec = [None; MAX_LEVELS];
        for (j, slot) in dec.iter_mut().enumerate().take(self.cfg.depth) {
            *slot = Some(DecIdx {
                up_w: idx(format!("decoder.{j}.up.weight")),
                up_b: idx(format!("decoder.{j}.up.bias")),
                w1: idx(format!("decoder.{j}.conv1.weight")),
                b1: idx(format!("decoder.{j}.conv1.bias")),
                w2: idx(format!("decoder.{j}.conv2.weight")),
                b2: idx(format!("decoder.{j}.conv2.bias")),
            });
        }
        Ok(Bound {
            enc,
            dec,
            head_w: idx("decoder.head.weight".into()),
            head_b: idx("decoder.head.bias".into()),
        })
    }

    fn check_batch<R: Real>(&self, batch: &BatchTensor<R>) -> Result<()> {
        let [_, t, c, h, w] = batch.shape();
        let cfg = &self.cfg;
        if t != cfg.time_steps || c != cfg.in_channels || h != cfg.patch_size || w != cfg.patch_size {
            return Err(Error::Dimension(format!(
                "batch [_, {t}, {c}, {h}, {w}] does not match model [_, {}, {}, {}, {}]",
                cfg.time_steps, cfg.in_channels, cfg.patch_size, cfg.patch_size
            )));
        }
        if batch.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("batch contains non-finite values".into()));
        }
        Ok(())
    }

    /// Inference-mode probabilities `[batch, H, W]`.
    pub fn forward<R: Real>(&self, params: &Params<R>, batch: &BatchTensor<R>) -> Result<ProbMap<R>> {
        let bound = self.bind(params)?;
        self.check_batch(batch)?;
        let hw = self.cfg.patch_size * self.cfg.patch_size;
        let per_sample: Vec<Vec<R>> = (0..batch.batch())
            .into_par_iter()
            .map(|i| {
                let trace = self.run(params, &bound, batch.sample(i), None);
                trace.logits.into_iter().map(k::sigmoid).collect()
            })
            .collect();
        let mut values = Vec::with_capacity(batch.batch() * hw);
        for v in per_sample {
            values.extend(v);
        }
        Ok(ProbMap {
            shape: [batch.batch(), self.cfg.patch_size, self.cfg.patch_size],
            values,
        })
    }

    /// Prediction from the first `t_avail` steps only (later steps zero-padded).
    pub fn forward_early<R: Real>(
        &self,
        params: &Params<R>,
        batch: &BatchTensor<R>,
        t_avail: usize,
    ) -> Result<ProbMap<R>> {
        let t = self.cfg.time_steps;
        if t_avail == 0 || t_avail > t {
            return Err(Error::Argument(format!("t_avail {t_avail} outside 1..={t}")));
        }
        if t_avail == t {
            return self.forward(params, batch);
        }
        self.forward(params, &batch.truncated(t_avail)?)
    }

    /// Weighted BCE (mean over all pixels of the batch) and its gradient.
    ///
    /// `dropout_seed = Some(s)` runs in training mode with masks drawn from `s`.
    pub fn loss_and_grad<R: Real>(
        &self,
        params: &Params<R>,
        batch: &BatchTensor<R>,
        labels: &[u8],
        pos_weight: f64,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Params<R>)> {
        let bound = self.bind(params)?;
        self.check_batch(batch)?;
        let hw = self.cfg.patch_size * self.cfg.patch_size;
        let b = batch.batch();
        if labels.len() != b * hw {
            return Err(Error::Dimension(format!(
                "{} labels for {} pixels",
                labels.len(),
                b * hw
            )));
        }
        let norm = R::c(1.0 / (b * hw) as f64);
        let w = R::c(pos_weight);
        let parts: Vec<(f64, Params<R>)> = (0..b)
            .into_par_iter()
            .map(|i| {
                let mut rng = dropout_seed
                    .map(|s| ChaCha8Rng::seed_from_u64(s ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
                let trace = self.run(params, &bound, batch.sample(i), rng.as_mut());
                let y = &labels[i * hw..(i + 1) * hw];
                let mut loss = 0.0f64;
                let mut dlogit = vec![R::zero(); hw];
                for ((g, &z), &yi) in dlogit.iter_mut().zip(&trace.logits).zip(y) {
                    let p = k::sigmoid(z);
                    if yi != 0 {
                        // -w log p = w softplus(-z)
                        loss += pos_weight * softplus(-z.to_f64().unwrap());
                        *g = w * (p - R::one()) * norm;
                    } else {
                        loss += softplus(z.to_f64().unwrap());
                        *g = p * norm;
                    }
                }
                let mut grad = params.zeros_like();
                self.backward(params, &bound, &trace, &dlogit, &mut grad);
                (loss, grad)
            })
            .collect();
        let mut total = 0.0;
        let mut grad = params.zeros_like();
        for (l, g) in parts {
            total += l;
            grad.axpy(R::one(), &g);
        }
        Ok((total / (b * hw) as f64, grad))
    }

    fn run<R: Real>(
        &self,
        params: &Params<R>,
        bound: &Bound,
        sample: &[R],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Trace<R> {
        let cfg = &self.cfg;
        let t_len = cfg.time_steps;
        let window = cfg.temporal_pool_window;
        let pooled = cfg.pooled_steps();
        let keep = 1.0 - cfg.dropout_rate;
        let scale = R::c(1.0 / keep);

        let mut enc = Vec::with_capacity(cfg.depth + 1);
        let mut skips: Vec<Vec<R>> = Vec::with_capacity(cfg.depth + 1);
        // Per-step inputs of the current level.
        let s0 = cfg.patch_size * cfg.patch_size;
        let step_len = cfg.in_channels * s0;
        let mut inputs: Vec<Vec<R>> = (0..t_len)
            .map(|t| sample[t * step_len..(t + 1) * step_len].to_vec())
            .collect();
        let mut pool_args: Vec<Vec<u32>> = vec![Vec::new(); t_len];

        for l in 0..=cfg.depth {
            let ix = bound.enc[l].unwrap();
            let c = cfg.level_channels(l);
            let cin = if l == 0 {
                cfg.in_channels
            } else {
                cfg.level_channels(l - 1)
            };
            let side = cfg.level_size(l);
            let hw = side * side;
            let w1 = &params.at(ix.w1).values;
            let b1 = &params.at(ix.b1).values;
            let w2 = &params.at(ix.w2).values;
            let b2 = &params.at(ix.b2).values;
            let carry = &params.at(ix.carry).values;

            let mut steps: Vec<EncStep<R>> = Vec::with_capacity(t_len);
            let mut outputs: Vec<Vec<R>> = Vec::with_capacity(t_len);
            for (t, input) in inputs.iter().enumerate() {
                let mut col1 = vec![R::zero(); cin * 9 * hw];
                k::im2col3(input, cin, side, side, &mut col1);
                let mut z = vec![R::zero(); c * hw];
                k::matmul(c, cin * 9, hw, w1, &col1, &mut z, false);
                k::add_bias(&mut z, b1, hw);
                k::relu_inplace(&mut z);

                let mut col2 = vec![R::zero(); c * 9 * hw];
                k::im2col3(&z, c, side, side, &mut col2);
                let mut h = vec![R::zero(); c * hw];
                k::matmul(c, c * 9, hw, w2, &col2, &mut h, false);
                k::add_bias(&mut h, b2, hw);
                if t > 0 {
                    let prev = &steps[t - 1].h;
                    add_carry(&mut h, prev, carry, hw);
                }
                k::relu_inplace(&mut h);

                let (out, mask) = match rng.as_deref_mut() {
                    Some(rng) if cfg.dropout_rate > 0.0 => {
                        let mask: Vec<R> = (0..c * hw)
                            .map(|_| if rng.gen::<f64>() < keep { scale } else { R::zero() })
                            .collect();
                        let out = h.iter().zip(&mask).map(|(&a, &m)| a * m).collect();
                        (out, Some(mask))
                    }
                    _ => (h.clone(), None),
                };
                outputs.push(out);
                steps.push(EncStep {
                    col1,
                    z,
                    col2,
                    h,
                    mask,
                    pool_arg: std::mem::take(&mut pool_args[t]),
                });
            }

            let (skip, skip_arg) = pool_time(&outputs, window, pooled);
            skips.push(skip);
            enc.push(EncLevel { steps, skip_arg });

            if l < cfg.depth {
                let mut next = Vec::with_capacity(t_len);
                for (t, out) in outputs.iter().enumerate() {
                    let (p, arg) = k::maxpool2(out, c, side, side);
                    next.push(p);
                    pool_args[t] = arg;
                }
                inputs = next;
            }
        }

        let mut dec = Vec::with_capacity(cfg.depth);
        let mut cur = skips.pop().expect("bottleneck");
        let mut cur_ch = cfg.level_channels(cfg.depth) * pooled;
        for j in 0..cfg.depth {
            let ix = bound.dec[j].unwrap();
            let l = cfg.depth - 1 - j;
            let c = cfg.level_channels(l);
            let side = cfg.level_size(l);
            let hw = side * side;
            let in_side = cfg.level_size(l + 1);
            let up = k::up2_forward(
                &cur,
                cur_ch,
                in_side,
                in_side,
                &params.at(ix.up_w).values,
                &params.at(ix.up_b).values,
                c,
            );
            let skip = skips.pop().expect("skip per level");
            let cat_ch = c + c * pooled;
            let mut cat = up;
            cat.extend_from_slice(&skip);

            let mut col1 = vec![R::zero(); cat_ch * 9 * hw];
            k::im2col3(&cat, cat_ch, side, side, &mut col1);
            let mut d1 = vec![R::zero(); c * hw];
            k::matmul(c, cat_ch * 9, hw, &params.at(ix.w1).values, &col1, &mut d1, false);
            k::add_bias(&mut d1, &params.at(ix.b1).values, hw);
            k::relu_inplace(&mut d1);

            let mut col2 = vec![R::zero(); c * 9 * hw];
            k::im2col3(&d1, c, side, side, &mut col2);
            let mut d2 = vec![R::zero(); c * hw];
            k::matmul(c, c * 9, hw, &params.at(ix.w2).values, &col2, &mut d2, false);
            k::add_bias(&mut d2, &params.at(ix.b2).values, hw);
            k::relu_inplace(&mut d2);

            dec.push(DecLevel {
                up_in: std::mem::replace(&mut cur, d2.clone()),
                col1,
                d1,
                col2,
                d2,
            });
            cur_ch = c;
        }

        let hw0 = cfg.patch_size * cfg.patch_size;
        let mut logits = vec![R::zero(); hw0];
        k::matmul(1, cur_ch, hw0, &params.at(bound.head_w).values, &cur, &mut logits, false);
        let hb = params.at(bound.head_b).values[0];
        for v in &mut logits {
            *v = *v + hb;
        }
        Trace { enc, dec, logits }
    }

    fn backward<R: Real>(
        &self,
        params: &Params<R>,
        bound: &Bound,
        trace: &Trace<R>,
        dlogit: &[R],
        grad: &mut Params<R>,
    ) {
        let cfg = &self.cfg;
        let d = cfg.depth;
        let pooled = cfg.pooled_steps();
        let t_len = cfg.time_steps;
        let hw0 = cfg.patch_size * cfg.patch_size;
        let c0 = cfg.level_channels(0);

        // Head.
        let last = &trace.dec[d - 1].d2;
        k::matmul_nt(1, hw0, c0, dlogit, last, &mut grad.at_mut(bound.head_w).values, true);
        let gb: R = dlogit.iter().copied().sum();
        grad.at_mut(bound.head_b).values[0] = grad.at(bound.head_b).values[0] + gb;
        let mut g_cur = vec![R::zero(); c0 * hw0];
        k::matmul_tn(c0, 1, hw0, &params.at(bound.head_w).values, dlogit, &mut g_cur, false);

        // Decoder, last block first.
        let mut g_skips: Vec<Vec<R>> = vec![Vec::new(); d + 1];
        for j in (0..d).rev() {
            let ix = bound.dec[j].unwrap();
            let cache = &trace.dec[j];
            let l = d - 1 - j;
            let c = cfg.level_channels(l);
            let side = cfg.level_size(l);
            let hw = side * side;
            let cat_ch = c + c * pooled;

            let mut g2 = g_cur;
            k::relu_backward(&cache.d2, &mut g2);
            let g_d1 = conv3_backward(
                &g2,
                c,
                c,
                side,
                &cache.col2,
                &params.at(ix.w2).values,
                grad,
                ix.w2,
                ix.b2,
            );
            let mut g1 = g_d1;
            k::relu_backward(&cache.d1, &mut g1);
            let g_cat = conv3_backward(
                &g1,
                c,
                cat_ch,
                side,
                &cache.col1,
                &params.at(ix.w1).values,
                grad,
                ix.w1,
                ix.b1,
            );
            let (g_up, g_skip) = g_cat.split_at(c * hw);
            g_skips[l] = g_skip.to_vec();

            let in_ch = if j == 0 {
                cfg.level_channels(d) * pooled
            } else {
                cfg.level_channels(l + 1)
            };
            let in_side = cfg.level_size(l + 1);
            let (gw, gb) = two_mut(grad, ix.up_w, ix.up_b);
            g_cur = k::up2_backward(
                &cache.up_in,
                in_ch,
                in_side,
                in_side,
                &params.at(ix.up_w).values,
                c,
                g_up,
                gw,
                gb,
            );
            // Decoder block 0 consumes the flattened bottleneck skip.
            if j == 0 {
                g_skips[d] = std::mem::take(&mut g_cur);
            }
        }

        // Encoder, bottleneck first. `g_next_in[t]` is dL/d(input of level l + 1 at t).
        let mut g_next_in: Vec<Vec<R>> = Vec::new();
        for l in (0..=d).rev() {
            let ix = bound.enc[l].unwrap();
            let level = &trace.enc[l];
            let c = cfg.level_channels(l);
            let cin = if l == 0 {
                cfg.in_channels
            } else {
                cfg.level_channels(l - 1)
            };
            let side = cfg.level_size(l);
            let hw = side * side;
            let n = c * hw;

            // dL/d(level output o_t).
            let mut g_out: Vec<Vec<R>> = vec![vec![R::zero(); n]; t_len];
            let g_skip = &g_skips[l];
            for (pos, &t) in level.skip_arg.iter().enumerate() {
                let e = pos % n;
                g_out[t as usize][e] = g_out[t as usize][e] + g_skip[pos];
            }
            if l < d {
                for (t, g_in) in g_next_in.iter().enumerate() {
                    k::maxpool2_backward(g_in, &trace.enc[l + 1].steps[t].pool_arg, &mut g_out[t]);
                }
            }

            let carry = &params.at(ix.carry).values;
            let scalar_carry = carry.len() == 1;
            let mut g_carry = vec![R::zero(); carry.len()];
            let mut g_h_next = vec![R::zero(); n];
            let mut g_inputs: Vec<Vec<R>> = vec![Vec::new(); t_len];
            for t in (0..t_len).rev() {
                let step = &level.steps[t];
                let mut g_h = std::mem::take(&mut g_out[t]);
                if let Some(mask) = &step.mask {
                    for (g, &m) in g_h.iter_mut().zip(mask) {
                        *g = *g * m;
                    }
                }
                for (g, &gn) in g_h.iter_mut().zip(&g_h_next) {
                    *g = *g + gn;
                }
                let mut g_v = g_h;
                k::relu_backward(&step.h, &mut g_v);

                if t > 0 {
                    let prev = &level.steps[t - 1].h;
                    let mut g_prev = vec![R::zero(); n];
                    for ch in 0..c {
                        let a = if scalar_carry { carry[0] } else { carry[ch] };
                        let mut acc = R::zero();
                        for px in ch * hw..(ch + 1) * hw {
                            acc = acc + g_v[px] * prev[px];
                            g_prev[px] = a * g_v[px];
                        }
                        let slot = if scalar_carry { 0 } else { ch };
                        g_carry[slot] = g_carry[slot] + acc;
                    }
                    g_h_next = g_prev;
                } else {
                    g_h_next = vec![R::zero(); n];
                }

                let g_z = conv3_backward(
                    &g_v,
                    c,
                    c,
                    side,
                    &step.col2,
                    &params.at(ix.w2).values,
                    grad,
                    ix.w2,
                    ix.b2,
                );
                let mut g_u = g_z;
                k::relu_backward(&step.z, &mut g_u);
                if l > 0 {
                    g_inputs[t] = conv3_backward(
                        &g_u,
                        c,
                        cin,
                        side,
                        &step.col1,
                        &params.at(ix.w1).values,
                        grad,
                        ix.w1,
                        ix.b1,
                    );
                } else {
                    conv3_weight_grad(&g_u, c, cin, side, &step.col1, grad, ix.w1, ix.b1);
                }
            }
            let gc = &mut grad.at_mut(ix.carry).values;
            for (g, v) in gc.iter_mut().zip(g_carry) {
                *g = *g + v;
            }
            g_next_in = g_inputs;
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn add_carry<R: Real>(h: &mut [R], prev: &[R], carry: &[R], hw: usize) {
    for (ch, (hc, pc)) in h.chunks_exact_mut(hw).zip(prev.chunks_exact(hw)).enumerate() {
        let a = if carry.len() == 1 { carry[0] } else { carry[ch] };
        for (x, &p) in hc.iter_mut().zip(pc) {
            *x = *x + a * p;
        }
    }
}

/// Temporal max over non-overlapping windows; returns `[pooled, n]` and the source step per element.
fn pool_time<R: Real>(steps: &[Vec<R>], window: usize, pooled: usize) -> (Vec<R>, Vec<u32>) {
    let n = steps[0].len();
    let mut out = vec![R::zero(); pooled * n];
    let mut arg = vec![0u32; pooled * n];
    for kk in 0..pooled {
        let dst = &mut out[kk * n..(kk + 1) * n];
        let darg = &mut arg[kk * n..(kk + 1) * n];
        dst.copy_from_slice(&steps[kk * window]);
        darg.fill((kk * window) as u32);
        for t in kk * window + 1..(kk + 1) * window {
            for ((o, a), &v) in dst.iter_mut().zip(darg.iter_mut()).zip(&steps[t]) {
                if v > *o {
                    *o = v;
                    *a = t as u32;
                }
            }
        }
    }
    (out, arg)
}

fn two_mut<R: Real>(grad: &mut Params<R>, a: usize, b: usize) -> (&mut [R], &mut [R]) {
    let [pa, pb] = grad.pair_mut(a, b);
    (pa.values.as_mut_slice(), pb.values.as_mut_slice())
}

#[allow(clippy::too_many_arguments)]
fn conv3_weight_grad<R: Real>(
    g_out: &[R],
    cout: usize,
    cin: usize,
    side: usize,
    col: &[R],
    grad: &mut Params<R>,
    w_idx: usize,
    b_idx: usize,
) {
    let hw = side * side;
    let (gw, gb) = two_mut(grad, w_idx, b_idx);
    k::matmul_nt(cout, hw, cin * 9, g_out, col, gw, true);
    k::bias_grad(g_out, hw, gb);
}

/// Accumulates weight/bias gradients and returns dL/d(input).
#[allow(clippy::too_many_arguments)]
fn conv3_backward<R: Real>(
    g_out: &[R],
    cout: usize,
    cin: usize,
    side: usize,
    col: &[R],
    weight: &[R],
    grad: &mut Params<R>,
    w_idx: usize,
    b_idx: usize,
) -> Vec<R> {
    let hw = side * side;
    conv3_weight_grad(g_out, cout, cin, side, col, grad, w_idx, b_idx);
    let mut g_col = vec![R::zero(); cin * 9 * hw];
    k::matmul_tn(cin * 9, cout, hw, weight, g_out, &mut g_col, false);
    let mut g_in = vec![R::zero(); cin * hw];
    k::col2im3(&g_col, cin, side, side, &mut g_in);
    g_in
}
