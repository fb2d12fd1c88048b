//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tstf::baselines::EvalWeights;
use tstf::evaluation::{validate_fractions, DEFAULT_FRACTIONS};
use tstf::model::{ModelConfig, Residual, Variant};
use tstf::sim::{strategy_by_name, Layout, LabelRule, MatchOptions, Rules, DEFAULT_SPLIT_RATIOS, ROSTER};
use tstf::train::TrainConfig;

use crate::fail::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Seeds the tournament, the split shuffle, initialisation and batch
    /// order.
    pub seed: u64,
    pub threads: Option<usize>,
    pub generate: GenerateSection,
    pub rules: Rules,
    pub layout: Layout,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
            generate: GenerateSection::default(),
            rules: Rules::default(),
            layout: Layout::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    /// Strategy names; repeats are allowed and count as distinct entries.
    pub roster: Vec<String>,
    pub rounds_per_pair: u32,
    pub max_steps: u32,
    pub cadence: u32,
    pub label_rule: LabelRule,
    /// training : test : validation
    pub split: [f64; 3],
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            roster: ROSTER.iter().map(|s| s.to_string()).collect(),
            rounds_per_pair: 10,
            max_steps: 1000,
            cadence: 2,
            label_rule: LabelRule::Outcome,
            split: DEFAULT_SPLIT_RATIOS,
        }
    }
}

/// A named preset with optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub preset: String,
    pub residual: Residual,
    pub layers: Option<usize>,
    pub dim: Option<usize>,
    pub heads: Option<usize>,
    pub frames: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: "desk".into(),
            residual: Residual::Literal,
            layers: None,
            dim: None,
            heads: None,
            frames: None,
        }
    }
}

/// Optimiser and loop settings. The batch order is seeded by the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Defaults to the preset's batch size.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub threshold: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            weight_decay: t.weight_decay,
            batch_size: None,
            epochs: t.epochs,
            threshold: t.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub fractions: Vec<f64>,
    pub match_id: Option<u32>,
    pub weights: EvalWeights,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            match_id: None,
            weights: EvalWeights::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub fractions: Option<Vec<f64>>,
    pub match_id: Option<u32>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Config(format!("config: {}", e.to_string().trim_end())))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Missing(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|f| f.context(&path.display().to_string()))
    }

    pub fn resolve(path: Option<&Path>, o: Overrides) -> Result<Self, Failure> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = o.out {
            cfg.out = v;
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.preset {
            cfg.model.preset = v;
        }
        if let Some(v) = o.fractions {
            cfg.eval.fractions = v;
        }
        if let Some(v) = o.match_id {
            cfg.eval.match_id = Some(v);
        }
        if let Some(v) = o.threads {
            cfg.threads = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let g = &self.generate;
        if g.roster.len() < 2 {
            return Err(Failure::Config(format!("roster needs at least 2 strategies, got {}", g.roster.len())));
        }
        if let Some(bad) = g.roster.iter().find(|n| strategy_by_name(n).is_none()) {
            return Err(Failure::Config(format!(
                "unknown strategy `{bad}` (known: {})",
                ROSTER.join(", ")
            )));
        }
        if g.rounds_per_pair == 0 || g.rounds_per_pair % 2 != 0 {
            return Err(Failure::Config(format!(
                "rounds_per_pair must be a positive even number, got {}",
                g.rounds_per_pair
            )));
        }
        if g.cadence == 0 {
            return Err(Failure::Config("cadence must be at least 1".into()));
        }
        if g.split.iter().any(|r| !r.is_finite() || *r < 0.0) || g.split.iter().sum::<f64>() <= 0.0 {
            return Err(Failure::Config(format!("split ratios {:?} must be non-negative with a positive sum", g.split)));
        }
        if self.threads == Some(0) {
            return Err(Failure::Config("threads must be at least 1".into()));
        }
        self.model_config(Variant::Tstf)?;
        self.train_config()?.validate()?;
        validate_fractions(&self.eval.fractions)?;
        self.eval.weights.validate()?;
        Ok(())
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            max_steps: self.generate.max_steps,
            cadence: self.generate.cadence,
            rules: self.rules.clone(),
            layout: self.layout.clone(),
        }
    }

    /// The preset with overrides applied, forced to `variant`.
    pub fn model_config(&self, variant: Variant) -> Result<ModelConfig, Failure> {
        let m = &self.model;
        let mut cfg = ModelConfig::preset(&m.preset)?;
        cfg.residual = m.residual;
        cfg.variant = variant;
        cfg.layers = m.layers.unwrap_or(cfg.layers);
        cfg.dim = m.dim.unwrap_or(cfg.dim);
        cfg.heads = m.heads.unwrap_or(cfg.heads);
        cfg.frames = m.frames.unwrap_or(cfg.frames);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig, Failure> {
        let t = &self.train;
        let batch_size = t
            .batch_size
            .or_else(|| ModelConfig::preset_batch_size(&self.model.preset))
            .unwrap_or(2);
        Ok(TrainConfig {
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            weight_decay: t.weight_decay,
            batch_size,
            epochs: t.epochs,
            seed: self.seed,
            threshold: t.threshold,
        })
    }
}

/// `tstf-L` for the full model, `timesformer-L` for the ablation.
pub fn model_name(cfg: &ModelConfig) -> String {
    match cfg.variant {
        Variant::Tstf => format!("tstf-{}", cfg.layers),
        Variant::SpaceTimeOnly => format!("timesformer-{}", cfg.layers),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[train]\nlearning_rate = 0.1\n").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("learning_rate"), "{err}");
        let err = RunConfig::parse("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::parse(
            r#"
seed = 9
[generate]
roster = ["PassiveLite", "WorkerRushLite"]
rounds_per_pair = 2
label_rule = "survivors"
[rules]
carry_capacity = 2
[layout]
start_store = 7
[model]
preset = "tstf-8"
residual = "pre_ln"
[train]
lr = 1e-3
epochs = 3
[eval]
fractions = [0.5, 1.0]
[eval.weights]
w_res = 1.0
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.generate.label_rule, LabelRule::Survivors);
        assert_eq!(cfg.rules.carry_capacity, 2);
        assert_eq!(cfg.layout.start_store, 7);
        assert_eq!(cfg.model_config(Variant::Tstf).unwrap().layers, 8);
        assert_eq!(cfg.train_config().unwrap().batch_size, 1);
        assert_eq!(cfg.eval.weights.w_res, 1.0);
        assert_eq!(cfg.eval.weights.w_unit, EvalWeights::default().w_unit);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(4),
            preset: Some("tstf-6".into()),
            fractions: Some(vec![1.0]),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(None, o).unwrap();
        assert_eq!((cfg.seed, cfg.model.preset.as_str(), cfg.eval.fractions.as_slice()), (4, "tstf-6", &[1.0][..]));
    }

    #[test]
    fn violations_are_config_errors() {
        let bad = [
            "[generate]\nrounds_per_pair = 3\n",
            "[generate]\nroster = [\"Nobody\", \"PassiveLite\"]\n",
            "[model]\npreset = \"huge\"\n",
            "[eval]\nfractions = [0.0]\n",
            "[train]\nlr = -1.0\n",
            "[model]\nheads = 3\n",
        ];
        for text in bad {
            let err = RunConfig::parse(text).and_then(|c| c.validate()).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{text}: {err}");
        }
    }

    #[test]
    fn names() {
        let cfg = RunConfig::default();
        assert_eq!(model_name(&cfg.model_config(Variant::Tstf).unwrap()), "tstf-2");
        assert_eq!(model_name(&cfg.model_config(Variant::SpaceTimeOnly).unwrap()), "timesformer-2");
    }
}
