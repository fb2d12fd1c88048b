use rayon::prelude::*;

use super::dataset::{Dataset, DatasetHeader, LabelRule};
use super::engine::{run_match, MatchOptions};
use super::strategy::strategy_by_name;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// One scheduled game of a round-robin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchSpec {
    pub id: u32,
    pub pair: u32,
    pub round: u32,
    /// Roster index playing as player 1.
    pub p1: usize,
    /// Roster index playing as player 2.
    pub p2: usize,
    pub seed: u64,
}

/// Round-robin schedule over `n` roster entries.
///
/// Pairs `(i, j)` with `i < j` are enumerated in lexicographic order; each
/// pair plays `rounds_per_pair` games, the first half with `i` as player 1
/// and the second half with sides swapped. Seeds derive from
/// `(seed, pair, round)`.
pub fn schedule(n: usize, rounds_per_pair: u32, seed: u64) -> Result<Vec<MatchSpec>> {
    if n < 2 {
        return Err(Error::Contract(format!("round-robin needs at least 2 strategies, got {n}")));
    }
    if rounds_per_pair == 0 || rounds_per_pair % 2 != 0 {
        return Err(Error::Contract(format!(
            "rounds_per_pair must be a positive even number, got {rounds_per_pair}"
        )));
    }
    let half = rounds_per_pair / 2;
    let mut out = Vec::with_capacity(n * (n - 1) / 2 * rounds_per_pair as usize);
    let mut pair = 0u32;
    for i in 0..n {
        for j in i + 1..n {
            for round in 0..rounds_per_pair {
                let (p1, p2) = if round < half { (i, j) } else { (j, i) };
                out.push(MatchSpec {
                    id: out.len() as u32,
                    pair,
                    round,
                    p1,
                    p2,
                    seed: SplitMix64::derive(seed, &[pair as u64, round as u64]).next_u64(),
                });
            }
            pair += 1;
        }
    }
    Ok(out)
}

/// Play the full schedule. Matches run in parallel on the current rayon
/// pool; records come back in schedule order.
pub fn run_tournament(
    roster: &[String],
    rounds_per_pair: u32,
    seed: u64,
    opts: &MatchOptions,
    label_rule: LabelRule,
) -> Result<Dataset> {
    let strategies = roster
        .iter()
        .map(|name| strategy_by_name(name).ok_or_else(|| Error::Config(format!("unknown strategy `{name}`"))))
        .collect::<Result<Vec<_>>>()?;
    let specs = schedule(roster.len(), rounds_per_pair, seed)?;
    let records = specs
        .par_iter()
        .map(|spec| {
            let mut rec = run_match(strategies[spec.p1].as_ref(), strategies[spec.p2].as_ref(), spec.seed, opts);
            rec.id = spec.id;
            label_rule.apply(&mut rec);
            rec
        })
        .collect();
    Ok(Dataset {
        header: DatasetHeader::new(opts, seed, roster, rounds_per_pair, label_rule),
        records,
    })
}
