//! Progress-stratified evaluation, OP stability and per-match prediction
//! timelines, shared by neural and classical assessors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{predict_winner_classical, EvalWeights, Evaluator, Prediction};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics_with_ties, population_std, MetricsReport};
use crate::model::Model;
use crate::num::Scalar;
use crate::sim::{decode_frame, prefix_len, prefix_limit, sample_timeline_until, MatchRecord};

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.04, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Fractions at or below this belong to the early phase.
pub const PHASE_SPLIT: f64 = 0.4;

pub fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::Config("fraction list is empty".into()));
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::Config(format!("fraction {f} outside (0, 1]")));
    }
    Ok(())
}

/// Anything that turns a match prefix into a verdict.
pub enum Assessor<'a, S> {
    /// Victory probability `y` for player 1, reported as `(y, 1 − y)`.
    Neural {
        name: String,
        model: &'a Model<S>,
        threshold: f64,
    },
    /// Weighted score of the last state in the prefix.
    Classical {
        evaluator: Evaluator,
        weights: &'a EvalWeights,
    },
}

/// Scores for each side and the resulting call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub p1: f64,
    pub p2: f64,
    pub prediction: Prediction,
}

impl<S: Scalar> Assessor<'_, S> {
    pub fn name(&self) -> String {
        match self {
            Assessor::Neural { name, .. } => name.clone(),
            Assessor::Classical { evaluator, .. } => evaluator.name().to_string(),
        }
    }

    /// Assess the prefix of `rec` made of frames at or before step `limit`.
    pub fn assess_until(&self, rec: &MatchRecord, limit: u32) -> Result<Assessment> {
        match self {
            Assessor::Neural { model, threshold, .. } => {
                let x = sample_timeline_until::<S>(rec, model.config.frames, limit)?;
                let mut shape = vec![1];
                shape.extend_from_slice(x.shape());
                let y = model.predict(&x.reshape(&shape)?)?[0].as_f64();
                Ok(Assessment {
                    p1: y,
                    p2: 1.0 - y,
                    prediction: if y >= *threshold { Prediction::P1 } else { Prediction::P2 },
                })
            }
            Assessor::Classical { evaluator, weights } => {
                let frame = rec
                    .frames
                    .get(prefix_len(rec, limit) - 1)
                    .ok_or_else(|| Error::Contract(format!("record {} has no frames", rec.id)))?;
                let state = decode_frame(frame);
                let (p1, p2) = evaluator.scores(&state, weights);
                Ok(Assessment {
                    p1,
                    p2,
                    prediction: predict_winner_classical(&state, *evaluator, weights),
                })
            }
        }
    }

    pub fn assess(&self, rec: &MatchRecord, rho: f64) -> Result<Assessment> {
        self.assess_until(rec, prefix_limit(rec, rho)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedRow {
    pub model: String,
    pub fraction: f64,
    pub report: MetricsReport,
}

pub const STRATIFIED_HEADER: &str = "model,fraction,accuracy,precision,recall,f1,op";

impl StratifiedRow {
    pub fn csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.model, self.fraction, r.accuracy, r.precision, r.recall, r.f1, r.op
        )
    }
}

fn labels(records: &[&MatchRecord]) -> Result<Vec<bool>> {
    if records.is_empty() {
        return Err(Error::Contract("empty dataset".into()));
    }
    records
        .iter()
        .map(|r| {
            r.winner
                .label()
                .ok_or_else(|| Error::Contract(format!("match {} is a draw and has no label", r.id)))
        })
        .collect()
}

/// One [`MetricsReport`] per fraction, scored against each match's final
/// winner. Undecided classical calls count as wrong.
pub fn progress_stratified_eval<S: Scalar>(
    assessor: &Assessor<'_, S>,
    records: &[&MatchRecord],
    fractions: &[f64],
) -> Result<Vec<StratifiedRow>> {
    validate_fractions(fractions)?;
    let truth = labels(records)?;
    fractions
        .iter()
        .map(|&rho| {
            let preds: Vec<Option<bool>> = records
                .par_iter()
                .map(|r| assessor.assess(r, rho).map(|a| a.prediction.label()))
                .collect::<Result<_>>()?;
            Ok(StratifiedRow {
                model: assessor.name(),
                fraction: rho,
                report: compute_metrics_with_ties(&preds, &truth)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Early,
    Late,
}

impl Phase {
    pub fn of(fraction: f64) -> Phase {
        if fraction <= PHASE_SPLIT {
            Phase::Early
        } else {
            Phase::Late
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Early => "early",
            Phase::Late => "late",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub model: String,
    pub phase: Phase,
    /// Population standard deviation of OP; `None` with fewer than two
    /// fractions in the phase.
    pub op_std: Option<f64>,
}

pub const STABILITY_HEADER: &str = "model,phase,op_std,source";

/// OP standard deviation per model and phase. A phase with fewer than two
/// points yields `None` and a warning.
pub fn op_stability(tables: &[Vec<StratifiedRow>]) -> Vec<StabilityRow> {
    let mut out = Vec::new();
    for table in tables {
        let Some(model) = table.first().map(|r| r.model.clone()) else {
            continue;
        };
        for phase in [Phase::Early, Phase::Late] {
            let ops: Vec<f64> = table
                .iter()
                .filter(|r| Phase::of(r.fraction) == phase)
                .map(|r| r.report.op)
                .collect();
            let op_std = population_std(&ops);
            if op_std.is_none() {
                log::warn!(
                    "{model}: {} phase has {} point(s); OP deviation omitted",
                    phase.name(),
                    ops.len()
                );
            }
            out.push(StabilityRow {
                model: model.clone(),
                phase,
                op_std,
            });
        }
    }
    out
}

impl StabilityRow {
    pub fn csv(&self) -> String {
        let v = self.op_std.map(|s| format!("{s:.6}")).unwrap_or_default();
        format!("{},{},{v},ours", self.model, self.phase.name())
    }
}

/// Published full-scale figures: `(model, fraction, accuracy, precision,
/// recall)`. Comparison context only; not reproduced at desk scale.
pub const PAPER_ACCURACY: [(&str, f64, f64, Option<f64>, Option<f64>); 9] = [
    ("tstf-8", 0.04, 0.587, None, None),
    ("tstf-8", 0.2, 0.833, Some(0.829), Some(0.827)),
    ("tstf-8", 0.4, 0.976, None, None),
    ("timesformer-12", 0.04, 0.418, None, None),
    ("timesformer-12", 0.2, 0.773, None, None),
    ("timesformer-12", 0.4, 0.962, None, None),
    ("tstf-6", 0.04, 0.582, None, None),
    ("tstf-6", 0.2, 0.782, None, None),
    ("tstf-6", 0.4, 0.938, None, None),
];

/// Published OP standard deviations `(model, early, late)`.
pub const PAPER_OP_STD: [(&str, f64, f64); 5] = [
    ("tstf-8", 0.947, 0.114),
    ("timesformer-12", 1.842, 0.186),
    ("tstf-6", 1.253, 0.167),
    ("simple", 0.324, 0.283),
    ("lanchester", 0.298, 0.271),
];

/// Published parameter counts `(preset, total)`.
pub const PAPER_PARAM_COUNTS: [(&str, usize); 3] = [
    ("timesformer-12", 5_542_146),
    ("tstf-6", 3_565_314),
    ("tstf-8", 4_750_082),
];

/// Reference rows in [`STRATIFIED_HEADER`] layout; model names carry a
/// `paper:` prefix and unpublished cells are empty.
pub fn paper_reference_rows() -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    PAPER_ACCURACY
        .iter()
        .map(|(m, f, acc, p, r)| format!("paper:{m},{f},{acc},{},{},,", opt(*p), opt(*r)))
        .collect()
}

/// Reference rows in [`STABILITY_HEADER`] layout.
pub fn paper_stability_rows() -> Vec<String> {
    PAPER_OP_STD
        .iter()
        .flat_map(|(m, e, l)| [format!("paper:{m},early,{e},paper"), format!("paper:{m},late,{l},paper")])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub step: u32,
    pub evaluator: String,
    pub assessment: Assessment,
}

pub const TIMELINE_HEADER: &str = "step,evaluator,p1_score,p2_score,predicted_winner,label";

impl TimelineRow {
    pub fn csv(&self, label: &str) -> String {
        let a = &self.assessment;
        let w = match a.prediction {
            Prediction::P1 => "p1",
            Prediction::P2 => "p2",
            Prediction::Tie => "tie",
        };
        format!("{},{},{:.6},{:.6},{w},{label}", self.step, self.evaluator, a.p1, a.p2)
    }
}

/// Every assessor's verdict at every captured frame of `rec`, ordered by
/// step then assessor.
pub fn prediction_timeline<S: Scalar>(assessors: &[Assessor<'_, S>], rec: &MatchRecord) -> Result<Vec<TimelineRow>> {
    let per_step: Vec<Vec<TimelineRow>> = rec
        .frames
        .par_iter()
        .map(|f| {
            assessors
                .iter()
                .map(|a| {
                    Ok(TimelineRow {
                        step: f.step,
                        evaluator: a.name(),
                        assessment: a.assess_until(rec, f.step)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_step.into_iter().flatten().collect())
}
