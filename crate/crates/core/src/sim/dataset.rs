//! Match datasets: line-delimited JSON storage, timeline sampling and
//! train/test/validation splitting.
//!
//! File layout: the first line is a [`DatasetHeader`] object; every
//! following line is one [`MatchRecord`]. Frames are stored as raw
//! (unnormalised) integer planes nested `[plane][row][column]`;
//! normalisation happens when a timeline is sampled.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encode::{normalize_frame, PLANES};
use super::engine::{MatchOptions, MatchRecord, Winner};
use super::{Player, MAP_SIZE};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub const DATASET_FORMAT: &str = "tstf-dataset";
pub const DATASET_VERSION: u32 = 1;
/// training : test : validation
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [10.0, 5.0, 2.5];

/// How match records are labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// The simulator's verdict (base destruction, else survivor count).
    #[default]
    Outcome,
    /// The side with more units in the final captured frame; equal counts
    /// are a draw.
    Survivors,
}

impl LabelRule {
    pub fn apply(self, rec: &mut MatchRecord) {
        if self == LabelRule::Survivors {
            let f = rec.final_frame();
            let (a, b) = (f.survivors(Player::P1), f.survivors(Player::P2));
            rec.winner = match a.cmp(&b) {
                std::cmp::Ordering::Greater => Winner::P1,
                std::cmp::Ordering::Less => Winner::P2,
                std::cmp::Ordering::Equal => Winner::Draw,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub map_size: [usize; 2],
    pub channels: usize,
    pub cadence: u32,
    pub max_steps: u32,
    pub seed: u64,
    pub roster: Vec<String>,
    pub rounds_per_pair: u32,
    pub label_rule: LabelRule,
}

impl DatasetHeader {
    pub fn new(opts: &MatchOptions, seed: u64, roster: &[String], rounds_per_pair: u32, label_rule: LabelRule) -> Self {
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            map_size: [MAP_SIZE, MAP_SIZE],
            channels: PLANES,
            cadence: opts.cadence,
            max_steps: opts.max_steps,
            seed,
            roster: roster.to_vec(),
            rounds_per_pair,
            label_rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<MatchRecord>,
}

impl Dataset {
    pub fn draws(&self) -> usize {
        self.records.iter().filter(|r| r.winner == Winner::Draw).count()
    }

    pub fn by_id(&self, id: u32) -> Option<&MatchRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let parse_err = |line: usize, e: serde_json::Error| Error::Format(format!("dataset line {}: {e}", line + 1));
        let io_err = |e: std::io::Error| Error::Format(format!("dataset read: {e}"));
        let (n, first) = lines.next().ok_or_else(|| Error::Format("dataset is empty (no header)".into()))?;
        let header: DatasetHeader = serde_json::from_str(&first.map_err(io_err)?).map_err(|e| parse_err(n, e))?;
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset {} v{}",
                header.format, header.version
            )));
        }
        if header.map_size != [MAP_SIZE, MAP_SIZE] || header.channels != PLANES {
            return Err(Error::Format(format!(
                "dataset geometry {:?}×{} does not match {MAP_SIZE}×{MAP_SIZE}×{PLANES}",
                header.map_size, header.channels
            )));
        }
        let mut records = Vec::new();
        for (n, line) in lines {
            let rec: MatchRecord = serde_json::from_str(&line.map_err(io_err)?).map_err(|e| parse_err(n, e))?;
            if rec.frames.is_empty() || rec.frames.windows(2).any(|w| w[0].step >= w[1].step) {
                return Err(Error::Format(format!("record {} has empty or unordered frames", rec.id)));
            }
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

/// Frame indices for `t` evenly spaced samples over `p` available frames:
/// `round(i·(p−1)/(t−1))`, or `[p−1]` when `t == 1`.
pub fn sample_indices(p: usize, t: usize) -> Vec<usize> {
    if t == 1 {
        return vec![p - 1];
    }
    (0..t)
        .map(|i| ((i * (p - 1)) as f64 / (t - 1) as f64).round() as usize)
        .collect()
}

/// Step bound of the progress-`rho` prefix: `ceil(rho · duration)`.
pub fn prefix_limit(rec: &MatchRecord, rho: f64) -> Result<u32> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Contract(format!("progress {rho} outside (0, 1]")));
    }
    Ok((rho * rec.duration as f64).ceil() as u32)
}

/// Number of frames captured at or before step `limit` (at least 1).
pub fn prefix_len(rec: &MatchRecord, limit: u32) -> usize {
    rec.frames.iter().take_while(|f| f.step <= limit).count().max(1)
}

/// `[t, PLANES, MAP_SIZE, MAP_SIZE]` normalised input built from the frames
/// recorded up to step `ceil(progress · duration)`.
pub fn sample_timeline<S: Scalar>(rec: &MatchRecord, t: usize, progress: f64) -> Result<Tensor<S>> {
    let limit = prefix_limit(rec, progress)?;
    sample_timeline_until(rec, t, limit)
}

/// Same as [`sample_timeline`] with the prefix given as a step bound.
pub fn sample_timeline_until<S: Scalar>(rec: &MatchRecord, t: usize, limit: u32) -> Result<Tensor<S>> {
    if t < 1 {
        return Err(Error::Contract("timeline length must be at least 1".into()));
    }
    if rec.frames.is_empty() {
        return Err(Error::Contract(format!("record {} has no frames", rec.id)));
    }
    let p = prefix_len(rec, limit);
    let frames: Vec<Tensor<S>> = sample_indices(p, t)
        .into_iter()
        .map(|i| normalize_frame(&rec.frames[i]))
        .collect();
    let refs: Vec<&Tensor<S>> = frames.iter().collect();
    Tensor::concat(&refs, 0)?.reshape(&[t, PLANES, MAP_SIZE, MAP_SIZE])
}

/// Integer sizes proportional to `ratios` summing to `n`: floor each
/// quota, then hand the remainder to the largest fractional parts (earlier
/// entries win ties).
pub fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let total: f64 = ratios.iter().sum();
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Disjoint record indices for training, test and validation. Draws are
/// removed first and counted in `draws`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub draws: usize,
}

pub fn split_dataset(records: &[MatchRecord], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if records.is_empty() {
        return Err(Error::Contract("cannot split an empty dataset".into()));
    }
    let mut idx: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].winner != Winner::Draw)
        .collect();
    let draws = records.len() - idx.len();
    SplitMix64::new(seed).shuffle(&mut idx);
    let sizes = largest_remainder(idx.len(), &ratios);
    let test_at = sizes[0];
    let val_at = sizes[0] + sizes[1];
    Ok(Split {
        train: idx[..test_at].to_vec(),
        test: idx[test_at..val_at].to_vec(),
        validation: idx[val_at..].to_vec(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::encode::Frame;
    use crate::sim::{GameState, Pos, Unit, UnitKind};

    fn record(n_frames: u32, winner: Winner) -> MatchRecord {
        let frames = (0..n_frames)
            .map(|i| {
                let mut s = GameState::empty();
                s.step = i * 2;
                // Mark the frame index in the hp plane of cell 0.
                let mut u = Unit::new(UnitKind::Base, Player::P1);
                u.hp = i as u8 % 11;
                s.place(Pos::new(0, 0), u);
                Frame::capture(&s)
            })
            .collect();
        MatchRecord {
            id: 0,
            strategy_a: "a".into(),
            strategy_b: "b".into(),
            seed: 0,
            winner,
            duration: (n_frames - 1) * 2,
            frames,
        }
    }

    fn frame_ids(t: &Tensor<f64>) -> Vec<usize> {
        let per = PLANES * MAP_SIZE * MAP_SIZE;
        (0..t.shape()[0])
            .map(|i| (t.data()[i * per + MAP_SIZE * MAP_SIZE] * 10.0).round() as usize)
            .collect()
    }

    #[test]
    fn index_formula() {
        assert_eq!(sample_indices(10, 5), vec![0, 2, 5, 7, 9]);
        assert_eq!(sample_indices(10, 1), vec![9]);
        assert_eq!(sample_indices(6, 6), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(sample_indices(2, 4), vec![0, 0, 1, 1]);
    }

    #[test]
    fn timeline_selection() {
        let rec = record(10, Winner::P1);
        let full = sample_timeline::<f64>(&rec, 10, 1.0).unwrap();
        assert_eq!(full.shape(), &[10, PLANES, MAP_SIZE, MAP_SIZE]);
        assert_eq!(frame_ids(&full), (0..10).collect::<Vec<_>>());
        assert_eq!(frame_ids(&sample_timeline(&rec, 5, 1.0).unwrap()), vec![0, 2, 5, 7, 9]);
        // duration 18, ρ=0.5 → limit step 9 → frames at steps 0..=8 (5 frames).
        assert_eq!(frame_ids(&sample_timeline(&rec, 1, 0.5).unwrap()), vec![4]);
        assert!(matches!(sample_timeline::<f64>(&rec, 0, 1.0), Err(Error::Contract(_))));
        assert!(sample_timeline::<f64>(&rec, 2, 0.0).is_err());
    }

    #[test]
    fn split_sizes() {
        assert_eq!(largest_remainder(3150, &DEFAULT_SPLIT_RATIOS), vec![1800, 900, 450]);
        assert_eq!(largest_remainder(7, &DEFAULT_SPLIT_RATIOS), vec![4, 2, 1]);
        assert_eq!(largest_remainder(10, &DEFAULT_SPLIT_RATIOS), vec![6, 3, 1]);
        assert_eq!(largest_remainder(0, &DEFAULT_SPLIT_RATIOS), vec![0, 0, 0]);
    }

    #[test]
    fn split_excludes_draws_and_is_seeded() {
        let mut recs: Vec<MatchRecord> = (0..20)
            .map(|i| record(2, if i % 5 == 0 { Winner::Draw } else { Winner::P2 }))
            .collect();
        for (i, r) in recs.iter_mut().enumerate() {
            r.id = i as u32;
        }
        let a = split_dataset(&recs, DEFAULT_SPLIT_RATIOS, 4).unwrap();
        let b = split_dataset(&recs, DEFAULT_SPLIT_RATIOS, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws, 4);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).chain(&a.validation).copied().collect();
        all.sort();
        assert_eq!(all.len(), 16);
        all.dedup();
        assert_eq!(all.len(), 16);
        assert!(all.iter().all(|&i| recs[i].winner != Winner::Draw));
        assert!(split_dataset(&[], DEFAULT_SPLIT_RATIOS, 0).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_header_checks() {
        let opts = MatchOptions::default();
        let ds = Dataset {
            header: DatasetHeader::new(&opts, 3, &["a".into(), "b".into()], 2, LabelRule::Outcome),
            records: vec![record(3, Winner::P1), record(2, Winner::Draw)],
        };
        let text = ds.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        let back = Dataset::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.draws(), 1);
        let bad = text.replacen("\"channels\":5", "\"channels\":72", 1);
        assert!(Dataset::read_jsonl(bad.as_bytes()).is_err());
        assert!(Dataset::read_jsonl("".as_bytes()).is_err());
    }

    #[test]
    fn survivor_relabel() {
        let mut rec = record(2, Winner::P2);
        LabelRule::Survivors.apply(&mut rec);
        assert_eq!(rec.winner, Winner::P1);
        let mut rec = record(2, Winner::P2);
        LabelRule::Outcome.apply(&mut rec);
        assert_eq!(rec.winner, Winner::P2);
    }
}
