//! Forward pass recorded on a [`Tape`].
//!
//! Patch tokens live as `[B, T, N, D]` between submodules; the cls token
//! is carried separately as `[B, D]`.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::Tensor;

use super::config::{ModelConfig, Residual};
use super::params::{Attention, Layer, ModelParams, Norm};

/// Output of one attention unit and its softmax weights
/// `[groups·heads, queries, keys]`.
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    pub out: Var,
    pub weights: Var,
}

/// Put every parameter on `tape` as a trainable leaf.
pub fn leaves<S: Scalar>(tape: &mut Tape<S>, params: &ModelParams<Tensor<S>>) -> ModelParams<Var> {
    params.map(|_, t| Ok(tape.leaf(t.clone()))).expect("infallible")
}

/// Put every parameter on `tape` as a constant (inference).
pub fn constants<S: Scalar>(tape: &mut Tape<S>, params: &ModelParams<Tensor<S>>) -> ModelParams<Var> {
    params.map(|_, t| Ok(tape.constant(t.clone()))).expect("infallible")
}

fn dims<const K: usize, S: Scalar>(tape: &Tape<S>, v: Var, op: &'static str) -> Result<[usize; K]> {
    tape.shape(v)
        .try_into()
        .map_err(|_| Error::dim(op, tape.shape(v), &[K]))
}

/// `[G, S, D] -> [G·h, S, D/h]`
fn split_heads<S: Scalar>(tape: &mut Tape<S>, x: Var, heads: usize) -> Result<Var> {
    let [g, s, d] = dims(tape, x, "split_heads")?;
    if heads == 1 {
        return Ok(x);
    }
    let x = tape.reshape(x, &[g, s, heads, d / heads])?;
    let x = tape.permute(x, &[0, 2, 1, 3])?;
    tape.reshape(x, &[g * heads, s, d / heads])
}

/// `[G·h, S, d] -> [G, S, h·d]`
fn merge_heads<S: Scalar>(tape: &mut Tape<S>, x: Var, heads: usize) -> Result<Var> {
    let [gh, s, dh] = dims(tape, x, "merge_heads")?;
    if heads == 1 {
        return Ok(x);
    }
    let x = tape.reshape(x, &[gh / heads, heads, s, dh])?;
    let x = tape.permute(x, &[0, 2, 1, 3])?;
    tape.reshape(x, &[gh / heads, s, heads * dh])
}

/// Multi-head scaled dot-product attention of `q_in` `[G, Sq, D]` over
/// `kv_in` `[G, Sk, D]`, scale `1/√(D/heads)`, followed by the output
/// projection.
pub fn attend<S: Scalar>(
    tape: &mut Tape<S>,
    q_in: Var,
    kv_in: Var,
    p: &Attention<Var>,
    heads: usize,
) -> Result<Attended> {
    let d = *tape.shape(q_in).last().unwrap_or(&0);
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!("width {d} not divisible by {heads} heads")));
    }
    let q = tape.linear(q_in, p.wq, p.bq)?;
    let k = tape.linear(kv_in, p.wk, p.bk)?;
    let v = tape.linear(kv_in, p.wv, p.bv)?;
    let (q, k, v) = (
        split_heads(tape, q, heads)?,
        split_heads(tape, k, heads)?,
        split_heads(tape, v, heads)?,
    );
    let scores = tape.bmm(q, k, true)?;
    let scores = tape.scale(scores, S::of(1.0 / ((d / heads) as f64).sqrt()));
    let weights = tape.softmax(scores, 2)?;
    let o = tape.bmm(weights, v, false)?;
    let o = merge_heads(tape, o, heads)?;
    let out = tape.linear(o, p.wo, p.bo)?;
    Ok(Attended { out, weights })
}

/// Attention over the `N` patches of each frame: `[(B·T), N, D]`.
pub fn spatial_attention<S: Scalar>(tape: &mut Tape<S>, z: Var, p: &Attention<Var>, heads: usize) -> Result<Attended> {
    let [b, t, n, d] = dims(tape, z, "spatial_attention")?;
    let x = tape.reshape(z, &[b * t, n, d])?;
    let a = attend(tape, x, x, p, heads)?;
    let out = tape.reshape(a.out, &[b, t, n, d])?;
    Ok(Attended { out, ..a })
}

/// Attention over the `T` frames at each patch position: `[(B·N), T, D]`.
pub fn temporal_attention<S: Scalar>(tape: &mut Tape<S>, z: Var, p: &Attention<Var>, heads: usize) -> Result<Attended> {
    let [b, t, n, d] = dims(tape, z, "temporal_attention")?;
    let x = tape.permute(z, &[0, 2, 1, 3])?;
    let x = tape.reshape(x, &[b * n, t, d])?;
    let a = attend(tape, x, x, p, heads)?;
    let out = tape.reshape(a.out, &[b, n, t, d])?;
    let out = tape.permute(out, &[0, 2, 1, 3])?;
    Ok(Attended { out, ..a })
}

/// Single-head attention among the `C` channel-tokens of width `D/C`
/// inside each patch token: `[(B·T·N), C, D/C]`.
pub fn feature_attention<S: Scalar>(
    tape: &mut Tape<S>,
    z: Var,
    p: &Attention<Var>,
    channels: usize,
) -> Result<Attended> {
    let [b, t, n, d] = dims(tape, z, "feature_attention")?;
    if channels == 0 || d % channels != 0 {
        return Err(Error::Config(format!("dim {d} not divisible by {channels} channels")));
    }
    let x = tape.reshape(z, &[b * t * n, channels, d / channels])?;
    let a = attend(tape, x, x, p, 1)?;
    let out = tape.reshape(a.out, &[b, t, n, d])?;
    Ok(Attended { out, ..a })
}

fn norm<S: Scalar>(tape: &mut Tape<S>, x: Var, n: &Norm<Var>) -> Result<Var> {
    tape.layer_norm(x, n.gamma, n.beta)
}

/// Patch embedding. Returns the cls token `[B, D]` (seed plus positional
/// row 0) and patch tokens `[B, T, N, D]` (projection plus rows `1..`).
/// Patches are flattened channel-major: `(c, dy, dx)`.
pub fn embed_patches<S: Scalar>(
    tape: &mut Tape<S>,
    cfg: &ModelConfig,
    p: &ModelParams<Var>,
    x: Var,
) -> Result<(Var, Var)> {
    let [b, t, c, h, w] = dims(tape, x, "embed_patches")?;
    if [t, c, h, w] != [cfg.frames, cfg.channels, cfg.height, cfg.width] {
        return Err(Error::Config(format!(
            "input {:?} does not match config [B, {}, {}, {}, {}]",
            tape.shape(x),
            cfg.frames,
            cfg.channels,
            cfg.height,
            cfg.width
        )));
    }
    let ps = cfg.patch;
    let (hp, wp) = (h / ps, w / ps);
    let n = hp * wp;
    let x = tape.reshape(x, &[b, t, c, hp, ps, wp, ps])?;
    let x = tape.permute(x, &[0, 1, 3, 5, 2, 4, 6])?;
    let x = tape.reshape(x, &[b, t, n, cfg.patch_len()])?;
    let tokens = tape.linear(x, p.embed_w, p.embed_b)?;
    let rows = tape.slice(p.pos, 0, 1, t * n)?;
    let rows = tape.reshape(rows, &[t, n, cfg.dim])?;
    let tokens = tape.add_suffix(tokens, rows)?;

    let row0 = tape.slice(p.pos, 0, 0, 1)?;
    let row0 = tape.reshape(row0, &[cfg.dim])?;
    let seed = tape.add(p.cls, row0)?;
    let zeros = tape.constant(Tensor::zeros(&[b, cfg.dim]));
    let cls = tape.add_suffix(zeros, seed)?;
    Ok((cls, tokens))
}

/// One encoder block. Returns updated `(cls, patches)`.
pub fn encoder_block<S: Scalar>(
    tape: &mut Tape<S>,
    cfg: &ModelConfig,
    layer: &Layer<Var>,
    cls: Var,
    z: Var,
) -> Result<(Var, Var)> {
    let z = match cfg.residual {
        Residual::Literal => {
            let sa = spatial_attention(tape, z, &layer.spatial, cfg.heads)?.out;
            let z = tape.add(sa, z)?;
            let mut z = temporal_attention(tape, z, &layer.temporal, cfg.heads)?.out;
            if let Some(fa) = &layer.feature {
                z = feature_attention(tape, z, fa, cfg.channels)?.out;
            }
            norm(tape, z, &layer.norms[0])?
        }
        Residual::PreLn => {
            let x = norm(tape, z, &layer.norms[0])?;
            let sa = spatial_attention(tape, x, &layer.spatial, cfg.heads)?.out;
            let z = tape.add(z, sa)?;
            let x = norm(tape, z, &layer.norms[1])?;
            let ta = temporal_attention(tape, x, &layer.temporal, cfg.heads)?.out;
            let mut z = tape.add(z, ta)?;
            if let Some(fa) = &layer.feature {
                let x = norm(tape, z, &layer.norms[2])?;
                let f = feature_attention(tape, x, fa, cfg.channels)?.out;
                z = tape.add(z, f)?;
            }
            z
        }
    };
    let cls = cls_update(tape, layer, cls, z)?;
    Ok((cls, z))
}

/// Single-head cross-attention from the cls token to every patch token of
/// the block output, then residual and LN.
fn cls_update<S: Scalar>(tape: &mut Tape<S>, layer: &Layer<Var>, cls: Var, z: Var) -> Result<Var> {
    let [b, t, n, d] = dims(tape, z, "cls_update")?;
    let q = tape.reshape(cls, &[b, 1, d])?;
    let kv = tape.reshape(z, &[b, t * n, d])?;
    let a = attend(tape, q, kv, &layer.cls_attn, 1)?;
    let upd = tape.reshape(a.out, &[b, d])?;
    let cls = tape.add(cls, upd)?;
    norm(tape, cls, &layer.cls_norm)
}

/// `σ(W₂·GELU(W₁·cls + b₁) + b₂)` per batch row, shape `[B]`.
pub fn head<S: Scalar>(tape: &mut Tape<S>, p: &ModelParams<Var>, cls: Var) -> Result<Var> {
    let b = tape.shape(cls)[0];
    let hdn = tape.linear(cls, p.head_w1, p.head_b1)?;
    let hdn = tape.gelu(hdn);
    let logit = tape.linear(hdn, p.head_w2, p.head_b2)?;
    let y = tape.sigmoid(logit);
    tape.reshape(y, &[b])
}

/// Full model: `x` `[B, T, C, H, W]` to victory probabilities `[B]`.
pub fn forward<S: Scalar>(tape: &mut Tape<S>, cfg: &ModelConfig, p: &ModelParams<Var>, x: Var) -> Result<Var> {
    let (mut cls, mut z) = embed_patches(tape, cfg, p, x)?;
    for layer in &p.layers {
        (cls, z) = encoder_block(tape, cfg, layer, cls, z)?;
    }
    head(tape, p, cls)
}

/// Inference without gradients.
pub fn predict<S: Scalar>(cfg: &ModelConfig, params: &ModelParams<Tensor<S>>, x: &Tensor<S>) -> Result<Vec<S>> {
    let mut tape = Tape::new();
    let p = constants(&mut tape, params);
    let xv = tape.constant(x.clone());
    let y = forward(&mut tape, cfg, &p, xv)?;
    Ok(tape.value(y).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check;
    use crate::model::config::Variant;
    use crate::rng::SplitMix64;

    fn rand(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = SplitMix64::new(seed);
        Tensor::from_fn(shape, |_| r.normal())
    }

    fn small() -> ModelConfig {
        ModelConfig {
            layers: 2,
            dim: 10,
            heads: 5,
            channels: 5,
            frames: 2,
            patch: 4,
            height: 8,
            width: 8,
            variant: Variant::Tstf,
            residual: Residual::Literal,
        }
    }

    fn init(cfg: &ModelConfig, seed: u64) -> ModelParams<Tensor<f64>> {
        ModelParams::init(cfg, seed).unwrap()
    }

    /// `(x·wv + bv)·wo + bo` computed directly on tensors.
    fn value_path(x: &Tensor<f64>, a: &Attention<Tensor<f64>>) -> Tensor<f64> {
        let v = x.matmul(&a.wv).unwrap().add_suffix(&a.bv).unwrap();
        v.matmul(&a.wo).unwrap().add_suffix(&a.bo).unwrap()
    }

    fn random_attention(w: usize, seed: u64) -> Attention<Tensor<f64>> {
        let m = |s| rand(&[w, w], seed * 16 + s);
        let v = |s| rand(&[w], seed * 16 + s);
        Attention {
            wq: m(0),
            bq: v(1),
            wk: m(2),
            bk: v(3),
            wv: m(4),
            bv: v(5),
            wo: m(6),
            bo: v(7),
        }
    }

    fn run_attention(
        f: impl Fn(&mut Tape<f64>, Var, &Attention<Var>) -> Result<Attended>,
        z: &Tensor<f64>,
        a: &Attention<Tensor<f64>>,
    ) -> (Tensor<f64>, Tensor<f64>) {
        let mut tape = Tape::new();
        let pv = a.clone();
        let p = Attention {
            wq: tape.constant(pv.wq),
            bq: tape.constant(pv.bq),
            wk: tape.constant(pv.wk),
            bk: tape.constant(pv.bk),
            wv: tape.constant(pv.wv),
            bv: tape.constant(pv.bv),
            wo: tape.constant(pv.wo),
            bo: tape.constant(pv.bo),
        };
        let zv = tape.constant(z.clone());
        let out = f(&mut tape, zv, &p).unwrap();
        (tape.value(out.out).clone(), tape.value(out.weights).clone())
    }

    fn assert_close(a: &Tensor<f64>, b: &Tensor<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }

    fn rows_sum_to_one(w: &Tensor<f64>) {
        let k = *w.shape().last().unwrap();
        for row in w.data().chunks(k) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singleton_axes_reduce_to_value_path() {
        let a = random_attention(10, 1);
        // N = 1
        let z = rand(&[2, 3, 1, 10], 2);
        let (out, w) = run_attention(|t, z, p| spatial_attention(t, z, p, 5), &z, &a);
        assert!(w.data().iter().all(|&x| x == 1.0));
        assert_close(&out, &value_path(&z, &a), 1e-12);
        // T = 1
        let z = rand(&[2, 1, 4, 10], 3);
        let (out, w) = run_attention(|t, z, p| temporal_attention(t, z, p, 5), &z, &a);
        assert!(w.data().iter().all(|&x| x == 1.0));
        assert_close(&out, &value_path(&z, &a), 1e-12);
        // C = 1
        let z = rand(&[1, 2, 4, 10], 4);
        let (out, w) = run_attention(|t, z, p| feature_attention(t, z, p, 1), &z, &a);
        assert!(w.data().iter().all(|&x| x == 1.0));
        assert_close(&out, &value_path(&z, &a), 1e-12);
    }

    #[test]
    fn attention_rows_are_stochastic() {
        let z = rand(&[2, 3, 4, 10], 5);
        let a = random_attention(10, 6);
        let (_, w) = run_attention(|t, z, p| spatial_attention(t, z, p, 5), &z, &a);
        assert_eq!(w.shape(), &[2 * 3 * 5, 4, 4]);
        rows_sum_to_one(&w);
        let (_, w) = run_attention(|t, z, p| temporal_attention(t, z, p, 5), &z, &a);
        assert_eq!(w.shape(), &[2 * 4 * 5, 3, 3]);
        rows_sum_to_one(&w);
        let f = random_attention(2, 7);
        let (_, w) = run_attention(|t, z, p| feature_attention(t, z, p, 5), &z, &f);
        assert_eq!(w.shape(), &[2 * 3 * 4, 5, 5]);
        rows_sum_to_one(&w);
    }

    /// Reorder axis `axis` of a `[B, T, N, D]` tensor by `perm`.
    fn permute_axis(z: &Tensor<f64>, axis: usize, perm: &[usize]) -> Tensor<f64> {
        let parts: Vec<Tensor<f64>> = perm.iter().map(|&i| z.slice(axis, i, 1).unwrap()).collect();
        let refs: Vec<&Tensor<f64>> = parts.iter().collect();
        Tensor::concat(&refs, axis).unwrap()
    }

    #[test]
    fn spatial_and_temporal_equivariance() {
        let z = rand(&[2, 3, 4, 10], 8);
        let a = random_attention(10, 9);
        let perm = [2, 0, 3, 1];
        let sa = |t: &mut Tape<f64>, z, p: &Attention<Var>| spatial_attention(t, z, p, 5);
        let (base, _) = run_attention(sa, &z, &a);
        let (moved, _) = run_attention(sa, &permute_axis(&z, 2, &perm), &a);
        assert_close(&moved, &permute_axis(&base, 2, &perm), 1e-9);
        let ta = |t: &mut Tape<f64>, z, p: &Attention<Var>| temporal_attention(t, z, p, 5);
        let perm = [1, 2, 0];
        let (base, _) = run_attention(ta, &z, &a);
        let (moved, _) = run_attention(ta, &permute_axis(&z, 1, &perm), &a);
        assert_close(&moved, &permute_axis(&base, 1, &perm), 1e-9);
    }

    #[test]
    fn embedding_lays_out_tokens() {
        let cfg = ModelConfig {
            frames: 3,
            ..small()
        };
        let mut p = init(&cfg, 1);
        let mut tape = Tape::new();
        let pv = constants(&mut tape, &p);
        let x = tape.constant(Tensor::zeros(&cfg.input_shape(1)));
        let (cls, tok) = embed_patches(&mut tape, &cfg, &pv, x).unwrap();
        assert_eq!(tape.shape(tok), &[1, 3, 4, 10]);
        assert_eq!(cfg.seq_len(), 13);
        let pos = &p.pos;
        assert_eq!(tape.value(tok).data(), &pos.data()[10..]);
        let expect: Vec<f64> = (0..10).map(|i| p.cls.data()[i] + pos.data()[i]).collect();
        assert_eq!(tape.value(cls).data(), &expect[..]);

        // A single hot input cell lands in the right patch slot.
        p.embed_w = Tensor::from_fn(&[cfg.patch_len(), 10], |i| (i / 10) as f64);
        p.pos = Tensor::zeros(p.pos.shape());
        let mut xs = Tensor::zeros(&cfg.input_shape(1));
        // frame 1, channel 2, row 5, col 2 -> patch (1, 0) = 2, offset 2·16 + 1·4 + 2
        let idx = ((1 * 5 + 2) * 8 + 5) * 8 + 2;
        xs.data_mut()[idx] = 1.0;
        let mut tape = Tape::new();
        let pv = constants(&mut tape, &p);
        let x = tape.constant(xs);
        let (_, tok) = embed_patches(&mut tape, &cfg, &pv, x).unwrap();
        let v = tape.value(tok);
        let at = |t: usize, n: usize| v.data()[(t * 4 + n) * 10];
        assert_eq!(at(1, 2), 38.0);
        assert_eq!(v.sum(), 380.0);
    }

    #[test]
    fn rejects_mismatched_input() {
        let cfg = small();
        let p = init(&cfg, 1);
        let x = Tensor::zeros(&[1, 3, 5, 8, 8]);
        assert!(matches!(predict(&cfg, &p, &x), Err(Error::Config(_))));
        let x = Tensor::zeros(&[1, 2, 5, 8]);
        assert!(predict(&cfg, &p, &x).is_err());
    }

    #[test]
    fn zero_head_gives_sigmoid_of_bias() {
        let cfg = small();
        let mut p = init(&cfg, 2);
        p.head_w1 = Tensor::zeros(p.head_w1.shape());
        p.head_w2 = Tensor::zeros(p.head_w2.shape());
        let x = rand(&cfg.input_shape(2), 3);
        assert_eq!(predict(&cfg, &p, &x).unwrap(), vec![0.5, 0.5]);
        p.head_b2 = Tensor::new(&[1], vec![1.5]).unwrap();
        let want = 1.0 / (1.0 + (-1.5f64).exp());
        for y in predict(&cfg, &p, &x).unwrap() {
            assert!((y - want).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_outputs_are_probabilities() {
        for residual in [Residual::Literal, Residual::PreLn] {
            for variant in [Variant::Tstf, Variant::SpaceTimeOnly] {
                let cfg = ModelConfig {
                    residual,
                    variant,
                    ..ModelConfig::desk()
                };
                let y = predict(&cfg, &init(&cfg, 4), &rand(&cfg.input_shape(2), 5).map(f64::abs)).unwrap();
                assert_eq!(y.len(), 2);
                assert!(y.iter().all(|&p| p > 0.0 && p < 1.0));
            }
        }
    }

    fn zero_values(a: &mut Attention<Tensor<f64>>) {
        a.wv = Tensor::zeros(a.wv.shape());
        a.bv = Tensor::zeros(a.bv.shape());
        a.bo = Tensor::zeros(a.bo.shape());
    }

    fn block_output(cfg: &ModelConfig, p: &ModelParams<Tensor<f64>>, z: &Tensor<f64>) -> Tensor<f64> {
        let mut tape = Tape::new();
        let pv = constants(&mut tape, p);
        let zv = tape.constant(z.clone());
        let cls = tape.constant(rand(&[z.shape()[0], cfg.dim], 77));
        let (_, out) = encoder_block(&mut tape, cfg, &pv.layers[0], cls, zv).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn zeroed_values_trace_the_block_composition() {
        let z = rand(&[1, 2, 4, 10], 6);
        // Literal: SA contributes 0, so TA sees z, outputs 0; FA outputs 0;
        // LN of zeros is beta.
        let cfg = small();
        let mut p = init(&cfg, 3);
        let l = &mut p.layers[0];
        zero_values(&mut l.spatial);
        zero_values(&mut l.temporal);
        zero_values(l.feature.as_mut().unwrap());
        l.norms[0].beta = rand(&[10], 8);
        let beta = l.norms[0].beta.clone();
        let out = block_output(&cfg, &p, &z);
        for tok in out.data().chunks(10) {
            assert_close(&Tensor::new(&[10], tok.to_vec()).unwrap(), &beta, 1e-12);
        }
        // Pre-LN: every residual branch is zero, so the block is identity.
        let cfg = ModelConfig {
            residual: Residual::PreLn,
            ..small()
        };
        let mut p = init(&cfg, 3);
        let l = &mut p.layers[0];
        zero_values(&mut l.spatial);
        zero_values(&mut l.temporal);
        zero_values(l.feature.as_mut().unwrap());
        assert_close(&block_output(&cfg, &p, &z), &z, 1e-12);
    }

    #[test]
    fn identity_feature_attention_matches_ablation() {
        let tstf = ModelConfig {
            channels: 1,
            ..small()
        };
        let mut p = init(&tstf, 5);
        for l in &mut p.layers {
            let f = l.feature.as_mut().unwrap();
            f.wv = Tensor::eye(10);
            f.wo = Tensor::eye(10);
            f.bv = Tensor::zeros(&[10]);
            f.bo = Tensor::zeros(&[10]);
        }
        let ablated_cfg = ModelConfig {
            variant: Variant::SpaceTimeOnly,
            ..tstf.clone()
        };
        let mut ablated = p.clone();
        ablated.layers.iter_mut().for_each(|l| l.feature = None);
        let x = rand(&tstf.input_shape(2), 6);
        let a = predict(&tstf, &p, &x).unwrap();
        let b = predict(&ablated_cfg, &ablated, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    /// Swap whole patch blocks (spatial) or frames (temporal) in the raw
    /// input; with a zero positional table the prediction must not move.
    #[test]
    fn prediction_invariant_to_patch_and_frame_order_without_positions() {
        let cfg = small();
        let mut p = init(&cfg, 7);
        p.pos = Tensor::zeros(p.pos.shape());
        let x = rand(&cfg.input_shape(1), 8);
        let base = predict(&cfg, &p, &x).unwrap()[0];
        // Swap frames.
        let swapped = permute_axis(&x, 1, &[1, 0]);
        assert!((predict(&cfg, &p, &swapped).unwrap()[0] - base).abs() < 1e-9);
        // Swap the left and right 4-column halves of the map.
        let halves = permute_axis(&x.reshape(&[1, 2, 5 * 8, 2, 4]).unwrap(), 3, &[1, 0]);
        let halves = halves.reshape(&cfg.input_shape(1)).unwrap();
        assert!((predict(&cfg, &p, &halves).unwrap()[0] - base).abs() < 1e-9);
        p.pos = rand(p.pos.shape(), 9);
        assert!((predict(&cfg, &p, &swapped).unwrap()[0] - predict(&cfg, &p, &x).unwrap()[0]).abs() > 1e-9);
    }

    fn model_grad_check(cfg: &ModelConfig, seed: u64) {
        let params = init(cfg, seed);
        let x = rand(&cfg.input_shape(1), seed + 100).map(|v| v.abs().min(1.0));
        let labels = [1.0];
        let template = params.clone();
        let leaves: Vec<Tensor<f64>> = params.refs().into_iter().cloned().collect();
        let report = grad_check(
            |tape, vars| {
                let p = template.with_leaves(vars.to_vec())?;
                let xv = tape.constant(x.clone());
                let y = forward(tape, cfg, &p, xv)?;
                tape.bce(y, &labels)
            },
            &leaves,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.checked, count_total(cfg));
    }

    fn count_total(cfg: &ModelConfig) -> usize {
        crate::model::params::count_params(cfg).total()
    }

    #[test]
    fn small_model_gradients() {
        model_grad_check(&small(), 11);
    }

    #[test]
    fn small_model_gradients_pre_ln_and_ablation() {
        let cfg = ModelConfig {
            residual: Residual::PreLn,
            layers: 1,
            ..small()
        };
        model_grad_check(&cfg, 12);
        let cfg = ModelConfig {
            variant: Variant::SpaceTimeOnly,
            layers: 1,
            ..small()
        };
        model_grad_check(&cfg, 13);
    }
}
