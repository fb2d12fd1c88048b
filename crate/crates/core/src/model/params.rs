use std::fmt;

use crate::checkpoint::TensorMap;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

use super::config::ModelConfig;

/// Query/key/value/output projections of one attention unit. Weights are
/// stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub wq: T,
    pub bq: T,
    pub wk: T,
    pub bk: T,
    pub wv: T,
    pub bv: T,
    pub wo: T,
    pub bo: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub gamma: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spatial: Attention<T>,
    pub temporal: Attention<T>,
    /// Absent for the space-time-only variant.
    pub feature: Option<Attention<T>>,
    /// One LN in literal mode; one per attention unit in pre-LN mode.
    pub norms: Vec<Norm<T>>,
    pub cls_attn: Attention<T>,
    pub cls_norm: Norm<T>,
}

/// All learnable arrays of the model, generic over the leaf type so the
/// same structure holds stored tensors, tape variables or optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// Patch embedding `[C·patch², D]`.
    pub embed_w: T,
    pub embed_b: T,
    /// Positional table `[T·N + 1, D]`; row 0 belongs to the cls token.
    pub pos: T,
    pub cls: T,
    pub layers: Vec<Layer<T>>,
    /// Head `[D, 4D]`, `[4D]`, `[4D, 1]`, `[1]`.
    pub head_w1: T,
    pub head_b1: T,
    pub head_w2: T,
    pub head_b2: T,
}

type Visit<'a, T, U> = dyn FnMut(&str, &T) -> Result<U> + 'a;

impl<T> Attention<T> {
    fn map<U>(&self, prefix: &str, f: &mut Visit<'_, T, U>) -> Result<Attention<U>> {
        let n = |s: &str| format!("{prefix}.{s}");
        Ok(Attention {
            wq: f(&n("wq"), &self.wq)?,
            bq: f(&n("bq"), &self.bq)?,
            wk: f(&n("wk"), &self.wk)?,
            bk: f(&n("bk"), &self.bk)?,
            wv: f(&n("wv"), &self.wv)?,
            bv: f(&n("bv"), &self.bv)?,
            wo: f(&n("wo"), &self.wo)?,
            bo: f(&n("bo"), &self.bo)?,
        })
    }

    fn refs<'a>(&'a self, out: &mut Vec<&'a T>) {
        out.extend([&self.wq, &self.bq, &self.wk, &self.bk, &self.wv, &self.bv, &self.wo, &self.bo]);
    }

    fn refs_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        out.extend([
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
        ]);
    }
}

impl<T> Norm<T> {
    fn map<U>(&self, prefix: &str, f: &mut Visit<'_, T, U>) -> Result<Norm<U>> {
        Ok(Norm {
            gamma: f(&format!("{prefix}.gamma"), &self.gamma)?,
            beta: f(&format!("{prefix}.beta"), &self.beta)?,
        })
    }
}

impl<T> Layer<T> {
    fn map<U>(&self, prefix: &str, f: &mut Visit<'_, T, U>) -> Result<Layer<U>> {
        Ok(Layer {
            spatial: self.spatial.map(&format!("{prefix}.spatial"), f)?,
            temporal: self.temporal.map(&format!("{prefix}.temporal"), f)?,
            feature: match &self.feature {
                Some(a) => Some(a.map(&format!("{prefix}.feature"), f)?),
                None => None,
            },
            norms: self
                .norms
                .iter()
                .enumerate()
                .map(|(i, n)| n.map(&format!("{prefix}.norm{i}"), f))
                .collect::<Result<_>>()?,
            cls_attn: self.cls_attn.map(&format!("{prefix}.cls_attn"), f)?,
            cls_norm: self.cls_norm.map(&format!("{prefix}.cls_norm"), f)?,
        })
    }

    fn refs<'a>(&'a self, out: &mut Vec<&'a T>) {
        self.spatial.refs(out);
        self.temporal.refs(out);
        if let Some(a) = &self.feature {
            a.refs(out);
        }
        for n in &self.norms {
            out.extend([&n.gamma, &n.beta]);
        }
        self.cls_attn.refs(out);
        out.extend([&self.cls_norm.gamma, &self.cls_norm.beta]);
    }

    fn refs_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        self.spatial.refs_mut(out);
        self.temporal.refs_mut(out);
        if let Some(a) = &mut self.feature {
            a.refs_mut(out);
        }
        for n in &mut self.norms {
            out.extend([&mut n.gamma, &mut n.beta]);
        }
        self.cls_attn.refs_mut(out);
        out.extend([&mut self.cls_norm.gamma, &mut self.cls_norm.beta]);
    }
}

impl<T> ModelParams<T> {
    /// Structure-preserving map; `f` sees each leaf with its checkpoint
    /// name, in [`ModelParams::refs`] order.
    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> Result<U>) -> Result<ModelParams<U>> {
        let f: &mut Visit<'_, T, U> = &mut f;
        Ok(ModelParams {
            embed_w: f("embed.w", &self.embed_w)?,
            embed_b: f("embed.b", &self.embed_b)?,
            pos: f("pos", &self.pos)?,
            cls: f("cls", &self.cls)?,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.map(&format!("layers.{i}"), f))
                .collect::<Result<_>>()?,
            head_w1: f("head.w1", &self.head_w1)?,
            head_b1: f("head.b1", &self.head_b1)?,
            head_w2: f("head.w2", &self.head_w2)?,
            head_b2: f("head.b2", &self.head_b2)?,
        })
    }

    /// Leaves in a fixed order (the order of [`ModelParams::names`]).
    pub fn refs(&self) -> Vec<&T> {
        let mut out = vec![&self.embed_w, &self.embed_b, &self.pos, &self.cls];
        for l in &self.layers {
            l.refs(&mut out);
        }
        out.extend([&self.head_w1, &self.head_b1, &self.head_w2, &self.head_b2]);
        out
    }

    pub fn refs_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.embed_w, &mut self.embed_b, &mut self.pos, &mut self.cls];
        for l in &mut self.layers {
            l.refs_mut(&mut out);
        }
        out.extend([&mut self.head_w1, &mut self.head_b1, &mut self.head_w2, &mut self.head_b2]);
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.map(|n, _| {
            names.push(n.to_string());
            Ok(())
        })
        .expect("infallible visitor");
        names
    }

    /// Rebuild from leaves listed in [`ModelParams::refs`] order, using
    /// `self` only as a structural template.
    pub fn with_leaves<U>(&self, leaves: Vec<U>) -> Result<ModelParams<U>> {
        let expected = self.refs().len();
        if leaves.len() != expected {
            return Err(Error::Contract(format!("expected {expected} leaves, got {}", leaves.len())));
        }
        let mut it = leaves.into_iter();
        self.map(|_, _| Ok(it.next().expect("length checked")))
    }
}

/// Shape of every parameter, in the same structure.
pub fn param_shapes(cfg: &ModelConfig) -> ModelParams<Vec<usize>> {
    let d = cfg.dim;
    let attn = |w: usize| Attention {
        wq: vec![w, w],
        bq: vec![w],
        wk: vec![w, w],
        bk: vec![w],
        wv: vec![w, w],
        bv: vec![w],
        wo: vec![w, w],
        bo: vec![w],
    };
    let norm = || Norm {
        gamma: vec![d],
        beta: vec![d],
    };
    ModelParams {
        embed_w: vec![cfg.patch_len(), d],
        embed_b: vec![d],
        pos: vec![cfg.seq_len(), d],
        cls: vec![d],
        layers: (0..cfg.layers)
            .map(|_| Layer {
                spatial: attn(d),
                temporal: attn(d),
                feature: cfg.has_feature_attention().then(|| attn(cfg.feature_dim())),
                norms: (0..cfg.norms_per_layer()).map(|_| norm()).collect(),
                cls_attn: attn(d),
                cls_norm: norm(),
            })
            .collect(),
        head_w1: vec![d, cfg.hidden()],
        head_b1: vec![cfg.hidden()],
        head_w2: vec![cfg.hidden(), 1],
        head_b2: vec![1],
    }
}

/// Standard deviation of the positional table and cls seed at init.
pub const EMBED_INIT_STD: f64 = 0.02;

impl<S: Scalar> ModelParams<Tensor<S>> {
    /// Seeded initialisation: matrices `N(0, 1/√fan_in)`, biases and LN
    /// shifts 0, LN gains 1, positional table and cls `N(0, 0.02)`.
    /// Leaves are drawn in checkpoint-name order from one generator.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SplitMix64::new(seed);
        param_shapes(cfg).map(|name, shape| {
            let leaf = name.rsplit('.').next().unwrap_or(name);
            let t = if name == "pos" || name == "cls" {
                Tensor::from_fn(shape, |_| S::of(EMBED_INIT_STD * rng.normal()))
            } else if leaf == "gamma" {
                Tensor::ones(shape)
            } else if shape.len() == 2 {
                let std = 1.0 / (shape[0] as f64).sqrt();
                Tensor::from_fn(shape, |_| S::of(std * rng.normal()))
            } else {
                Tensor::zeros(shape)
            };
            Ok(t)
        })
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_, t| Ok(Tensor::zeros(t.shape()))).expect("infallible")
    }

    pub fn num_params(&self) -> usize {
        self.refs().iter().map(|t| t.numel()).sum()
    }

    pub fn to_map(&self) -> TensorMap<S> {
        let mut out = TensorMap::new();
        self.map(|n, t| {
            out.insert(n.to_string(), t.clone());
            Ok(())
        })
        .expect("infallible visitor");
        out
    }

    /// Pull every parameter out of `map`, checking names and shapes against
    /// `cfg`. Extra entries are rejected.
    pub fn from_map(cfg: &ModelConfig, map: &TensorMap<S>) -> Result<Self> {
        cfg.validate()?;
        let shapes = param_shapes(cfg);
        let out = shapes.map(|name, shape| {
            let t = map
                .get(name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter `{name}`")))?;
            if t.shape() != &shape[..] {
                return Err(Error::Format(format!(
                    "parameter `{name}` has shape {:?}, config expects {shape:?}",
                    t.shape()
                )));
            }
            Ok(t.clone())
        })?;
        let expected = shapes.refs().len();
        if map.len() != expected {
            let known = shapes.names();
            let extra = map.keys().find(|k| !known.contains(k)).cloned().unwrap_or_default();
            return Err(Error::Format(format!("checkpoint has unexpected parameter `{extra}`")));
        }
        Ok(out)
    }
}

/// Parameter count split into groups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamBreakdown {
    pub embedding: usize,
    pub positional: usize,
    pub cls: usize,
    pub spatial: usize,
    pub temporal: usize,
    pub feature: usize,
    pub norm: usize,
    pub cls_attn: usize,
    pub head: usize,
}

impl ParamBreakdown {
    pub fn total(&self) -> usize {
        self.embedding + self.positional + self.cls + self.layer_local() + self.head
    }

    /// Everything inside the encoder blocks.
    pub fn layer_local(&self) -> usize {
        self.spatial + self.temporal + self.feature + self.norm + self.cls_attn
    }

    pub fn groups(&self) -> [(&'static str, usize); 9] {
        [
            ("embedding", self.embedding),
            ("positional", self.positional),
            ("cls", self.cls),
            ("spatial_attention", self.spatial),
            ("temporal_attention", self.temporal),
            ("feature_attention", self.feature),
            ("layer_norm", self.norm),
            ("cls_cross_attention", self.cls_attn),
            ("head", self.head),
        ]
    }
}

impl fmt::Display for ParamBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, n) in self.groups() {
            writeln!(f, "{name:<20} {n:>10}")?;
        }
        write!(f, "{:<20} {:>10}", "total", self.total())
    }
}

/// Exact parameter count of `cfg`, from the shape table.
pub fn count_params(cfg: &ModelConfig) -> ParamBreakdown {
    let shapes = param_shapes(cfg);
    let mut b = ParamBreakdown::default();
    shapes
        .map(|name, shape| {
            let n: usize = shape.iter().product();
            let group = match name.split('.').collect::<Vec<_>>()[..] {
                ["embed", _] => &mut b.embedding,
                ["pos"] => &mut b.positional,
                ["cls"] => &mut b.cls,
                ["head", _] => &mut b.head,
                ["layers", _, "spatial", _] => &mut b.spatial,
                ["layers", _, "temporal", _] => &mut b.temporal,
                ["layers", _, "feature", _] => &mut b.feature,
                ["layers", _, "cls_attn", _] => &mut b.cls_attn,
                _ => &mut b.norm,
            };
            *group += n;
            Ok(())
        })
        .expect("infallible visitor");
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{Residual, Variant};

    #[test]
    fn full_scale_breakdown_matches_shape_algebra() {
        let b = count_params(&ModelConfig::preset("tstf-8").unwrap());
        let (d, dp) = (155usize, 31usize);
        let attn = 4 * (d * d + d);
        assert_eq!(b.embedding, 80 * d + d);
        assert_eq!(b.positional, 8001 * d);
        assert_eq!(b.cls, d);
        assert_eq!(b.spatial, 8 * attn);
        assert_eq!(b.temporal, 8 * attn);
        assert_eq!(b.feature, 8 * 4 * (dp * dp + dp));
        assert_eq!(b.norm, 8 * 2 * 2 * d);
        assert_eq!(b.cls_attn, 8 * attn);
        assert_eq!(b.head, d * 4 * d + 4 * d + 4 * d + 1);
        assert_eq!(b.total(), 3_708_190);
    }

    #[test]
    fn ablation_has_no_feature_scope() {
        let cfg = ModelConfig {
            variant: Variant::SpaceTimeOnly,
            ..ModelConfig::desk()
        };
        let b = count_params(&cfg);
        assert_eq!(b.feature, 0);
        let p = ModelParams::<Tensor<f64>>::init(&cfg, 1).unwrap();
        assert!(p.names().iter().all(|n| !n.contains("feature")));
        assert_eq!(p.num_params(), b.total());
    }

    #[test]
    fn monotone_in_depth() {
        for v in [Variant::Tstf, Variant::SpaceTimeOnly] {
            let six = count_params(&ModelConfig::full_scale(6, v)).total();
            let eight = count_params(&ModelConfig::full_scale(8, v)).total();
            assert!(eight > six);
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = ModelConfig::desk();
        let a = ModelParams::<Tensor<f64>>::init(&cfg, 9).unwrap();
        let b = ModelParams::<Tensor<f64>>::init(&cfg, 9).unwrap();
        let c = ModelParams::<Tensor<f64>>::init(&cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.num_params(), count_params(&cfg).total());
        assert!(a.layers[0].norms[0].gamma.data().iter().all(|&g| g == 1.0));
        assert!(a.head_b2.data().iter().all(|&g| g == 0.0));
        let names = a.names();
        let mut uniq = names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), names.len());
    }

    #[test]
    fn init_scale() {
        let cfg = ModelConfig::preset("tstf-6").unwrap();
        let cfg = ModelConfig { frames: 2, ..cfg };
        let p = ModelParams::<Tensor<f64>>::init(&cfg, 3).unwrap();
        let std = |t: &Tensor<f64>| (t.data().iter().map(|v| v * v).sum::<f64>() / t.numel() as f64).sqrt();
        assert!((std(&p.layers[0].spatial.wq) - 1.0 / 155f64.sqrt()).abs() < 0.005);
        assert!((std(&p.pos) - 0.02).abs() < 0.002);
    }

    #[test]
    fn map_round_trip_validates_shapes() {
        let cfg = ModelConfig {
            residual: Residual::PreLn,
            ..ModelConfig::desk()
        };
        let p = ModelParams::<Tensor<f64>>::init(&cfg, 2).unwrap();
        let m = p.to_map();
        assert_eq!(ModelParams::from_map(&cfg, &m).unwrap(), p);
        let mut bad = m.clone();
        bad.insert("head.b2".into(), Tensor::zeros(&[2]));
        assert!(matches!(ModelParams::from_map(&cfg, &bad), Err(Error::Format(_))));
        let mut extra = m.clone();
        extra.insert("bogus".into(), Tensor::zeros(&[1]));
        assert!(ModelParams::from_map(&cfg, &extra).is_err());
        let other = ModelConfig { layers: 3, ..cfg };
        assert!(ModelParams::from_map(&other, &m).is_err());
    }

    #[test]
    fn with_leaves_preserves_order() {
        let p = ModelParams::<Tensor<f64>>::init(&ModelConfig::desk(), 0).unwrap();
        let sizes: Vec<usize> = p.refs().iter().map(|t| t.numel()).collect();
        let q = p.with_leaves(sizes.clone()).unwrap();
        assert_eq!(q.refs().into_iter().copied().collect::<Vec<_>>(), sizes);
        assert!(p.with_leaves(vec![0usize; 3]).is_err());
    }
}
