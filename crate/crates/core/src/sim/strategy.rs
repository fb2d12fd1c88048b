//! Scripted players. Each strategy maps a state snapshot to one action per
//! unit it wants to command; the engine validates and resolves them.

use super::{GameState, Player, Pos, Rules, Unit, UnitKind};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Move(Pos),
    Harvest(Pos),
    Return(Pos),
    Build { at: Pos, kind: UnitKind },
    Train { at: Pos, kind: UnitKind },
    Attack(Pos),
}

/// Order for the unit standing at `unit` in the snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub unit: Pos,
    pub kind: ActionKind,
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn act(&self, state: &GameState, me: Player, rules: &Rules, rng: &mut SplitMix64) -> Vec<Action>;
}

/// Registered strategy names.
pub const ROSTER: [&str; 7] = [
    "RandomBiasedLite",
    "WorkerRushLite",
    "LightRushLite",
    "HeavyRushLite",
    "RangedRushLite",
    "EconomyRushLite",
    "PassiveLite",
];

pub fn strategy_by_name(name: &str) -> Option<Box<dyn Strategy>> {
    let rush = |name, army, harvesters, worker_target, attack_at| -> Box<dyn Strategy> {
        Box::new(Scripted {
            name,
            army,
            harvesters,
            worker_target,
            attack_at,
        })
    };
    Some(match name {
        "RandomBiasedLite" => Box::new(RandomBiased),
        "WorkerRushLite" => rush("WorkerRushLite", None, 1, usize::MAX, 1),
        "LightRushLite" => rush("LightRushLite", Some(UnitKind::Light), 2, 2, 2),
        "HeavyRushLite" => rush("HeavyRushLite", Some(UnitKind::Heavy), 2, 2, 2),
        "RangedRushLite" => rush("RangedRushLite", Some(UnitKind::Ranged), 2, 2, 2),
        "EconomyRushLite" => rush("EconomyRushLite", Some(UnitKind::Light), 3, 4, 4),
        "PassiveLite" => Box::new(Passive),
        _ => return None,
    })
}

/// Does nothing.
pub struct Passive;

impl Strategy for Passive {
    fn name(&self) -> &'static str {
        "PassiveLite"
    }

    fn act(&self, _: &GameState, _: Player, _: &Rules, _: &mut SplitMix64) -> Vec<Action> {
        Vec::new()
    }
}

/// Greedy step from `from` toward `target` over cells free in `state`;
/// ties between equally good cells are broken by `rng`.
fn step_toward(state: &GameState, from: Pos, target: Pos, rng: &mut SplitMix64) -> Option<Pos> {
    let here = from.dist(target);
    let mut best: Vec<Pos> = Vec::new();
    let mut best_d = usize::MAX;
    for n in from.neighbors().filter(|&n| state.is_free(n)) {
        let d = n.dist(target);
        if d < best_d {
            best_d = d;
            best.clear();
        }
        if d == best_d {
            best.push(n);
        }
    }
    if best.is_empty() || best_d > here {
        return None;
    }
    Some(best[rng.below(best.len())])
}

fn nearest<'a>(from: Pos, it: impl Iterator<Item = (Pos, &'a Unit)>) -> Option<Pos> {
    it.min_by_key(|(p, _)| (p.dist(from), p.index())).map(|(p, _)| p)
}

fn free_neighbor(state: &GameState, p: Pos, taken: &[Pos]) -> Option<Pos> {
    p.neighbors().find(|n| state.is_free(*n) && !taken.contains(n))
}

/// Worker economy loop: return cargo, otherwise harvest the nearest
/// resource.
fn harvest(state: &GameState, me: Player, pos: Pos, unit: &Unit, rules: &Rules, rng: &mut SplitMix64) -> Option<Action> {
    let base = nearest(pos, state.units_of(me).filter(|(_, u)| u.kind == UnitKind::Base));
    if unit.resources > 0 {
        let base = base?;
        if pos.dist(base) == 1 {
            return Some(Action {
                unit: pos,
                kind: ActionKind::Return(base),
            });
        }
        if unit.resources >= rules.carry_capacity {
            return step_toward(state, pos, base, rng).map(|to| Action {
                unit: pos,
                kind: ActionKind::Move(to),
            });
        }
    }
    let res = nearest(pos, state.units().filter(|(_, u)| u.kind == UnitKind::Resource))?;
    if pos.dist(res) == 1 {
        Some(Action {
            unit: pos,
            kind: ActionKind::Harvest(res),
        })
    } else {
        step_toward(state, pos, res, rng).map(|to| Action {
            unit: pos,
            kind: ActionKind::Move(to),
        })
    }
}

/// Attack the nearest enemy in range, otherwise close in on `target`.
fn fight(state: &GameState, me: Player, pos: Pos, unit: &Unit, target: Pos, rules: &Rules, rng: &mut SplitMix64) -> Option<Action> {
    let range = rules.stats(unit.kind).range as usize;
    let in_range = nearest(
        pos,
        state
            .units_of(me.opponent())
            .filter(|(p, _)| p.dist(pos) <= range),
    );
    if let Some(t) = in_range {
        return Some(Action {
            unit: pos,
            kind: ActionKind::Attack(t),
        });
    }
    step_toward(state, pos, target, rng).map(|to| Action {
        unit: pos,
        kind: ActionKind::Move(to),
    })
}

/// Parameterised rush script shared by the worker/light/heavy/ranged and
/// economy analogs.
struct Scripted {
    name: &'static str,
    /// Unit trained at the barracks; `None` means workers do the fighting.
    army: Option<UnitKind>,
    harvesters: usize,
    worker_target: usize,
    /// Army size at which fighters leave home.
    attack_at: usize,
}

impl Strategy for Scripted {
    fn name(&self) -> &'static str {
        self.name
    }

    fn act(&self, state: &GameState, me: Player, rules: &Rules, rng: &mut SplitMix64) -> Vec<Action> {
        let mut out = Vec::new();
        let mut spawn_cells: Vec<Pos> = Vec::new();
        let mut budget = state.store_of(me) as i32;
        let workers = state.count(me, UnitKind::Worker);
        let has_barracks = state.count(me, UnitKind::Barracks) > 0;
        let home = state
            .units_of(me)
            .find(|(_, u)| u.kind == UnitKind::Base)
            .map(|(p, _)| p);
        let enemy_target = |from: Pos| nearest(from, state.units_of(me.opponent()));
        let threat = home.is_some_and(|h| state.units_of(me.opponent()).any(|(p, u)| u.kind.is_mobile() && p.dist(h) <= 4));

        let saving_for_barracks = self.army.is_some() && !has_barracks && workers >= self.harvesters.min(2);
        let mut built = false;
        let mut harvesters = 0;
        let mut fighters: Vec<Pos> = Vec::new();

        for (pos, unit) in state.units_of(me) {
            if unit.cooldown > 0 {
                if unit.kind == UnitKind::Worker {
                    harvesters += 1;
                }
                continue;
            }
            match unit.kind {
                UnitKind::Base => {
                    let cost = rules.cost(UnitKind::Worker) as i32;
                    let reserve = if saving_for_barracks { rules.cost(UnitKind::Barracks) as i32 } else { 0 };
                    if workers < self.worker_target && budget - reserve >= cost {
                        if let Some(at) = free_neighbor(state, pos, &spawn_cells) {
                            spawn_cells.push(at);
                            budget -= cost;
                            out.push(Action {
                                unit: pos,
                                kind: ActionKind::Train {
                                    at,
                                    kind: UnitKind::Worker,
                                },
                            });
                        }
                    }
                }
                UnitKind::Barracks => {
                    if let Some(kind) = self.army {
                        let cost = rules.cost(kind) as i32;
                        if budget >= cost {
                            if let Some(at) = free_neighbor(state, pos, &spawn_cells) {
                                spawn_cells.push(at);
                                budget -= cost;
                                out.push(Action {
                                    unit: pos,
                                    kind: ActionKind::Train { at, kind },
                                });
                            }
                        }
                    }
                }
                UnitKind::Worker => {
                    let adjacent_enemy = state.units_of(me.opponent()).any(|(p, _)| p.dist(pos) == 1);
                    if harvesters < self.harvesters && !adjacent_enemy {
                        harvesters += 1;
                        let cost = rules.cost(UnitKind::Barracks) as i32;
                        if self.army.is_some() && !has_barracks && !built && budget >= cost {
                            if let Some(at) = free_neighbor(state, pos, &spawn_cells) {
                                spawn_cells.push(at);
                                built = true;
                                budget -= cost;
                                out.push(Action {
                                    unit: pos,
                                    kind: ActionKind::Build {
                                        at,
                                        kind: UnitKind::Barracks,
                                    },
                                });
                                continue;
                            }
                        }
                        out.extend(harvest(state, me, pos, unit, rules, rng));
                    } else if self.army.is_none() || adjacent_enemy {
                        fighters.push(pos);
                    } else {
                        out.extend(harvest(state, me, pos, unit, rules, rng));
                    }
                }
                UnitKind::Light | UnitKind::Heavy | UnitKind::Ranged => fighters.push(pos),
                UnitKind::Resource => {}
            }
        }

        let attacking = fighters.len() >= self.attack_at || threat;
        for pos in fighters {
            let unit = state.get(pos).expect("fighter listed from snapshot");
            let target = if attacking {
                enemy_target(pos)
            } else {
                home.and_then(|h| free_neighbor(state, h, &[]).or(Some(h)))
            };
            if let Some(t) = target {
                out.extend(fight(state, me, pos, unit, t, rules, rng));
            }
        }
        out
    }
}

/// Random player biased toward sensible choices: attack when something is
/// in range, keep workers harvesting, occasionally produce.
pub struct RandomBiased;

impl Strategy for RandomBiased {
    fn name(&self) -> &'static str {
        "RandomBiasedLite"
    }

    fn act(&self, state: &GameState, me: Player, rules: &Rules, rng: &mut SplitMix64) -> Vec<Action> {
        let mut out = Vec::new();
        let mut spawn_cells: Vec<Pos> = Vec::new();
        let mut budget = state.store_of(me) as i32;
        for (pos, unit) in state.units_of(me) {
            if unit.cooldown > 0 {
                continue;
            }
            let random_move = |rng: &mut SplitMix64| {
                let free: Vec<Pos> = pos.neighbors().filter(|n| state.is_free(*n)).collect();
                (!free.is_empty()).then(|| Action {
                    unit: pos,
                    kind: ActionKind::Move(free[rng.below(free.len())]),
                })
            };
            let produce = |kind: UnitKind, budget: &mut i32, spawn_cells: &mut Vec<Pos>| {
                let cost = rules.cost(kind) as i32;
                if *budget < cost {
                    return None;
                }
                let at = free_neighbor(state, pos, spawn_cells)?;
                spawn_cells.push(at);
                *budget -= cost;
                Some(at)
            };
            match unit.kind {
                UnitKind::Base => {
                    if rng.chance(0.3) {
                        if let Some(at) = produce(UnitKind::Worker, &mut budget, &mut spawn_cells) {
                            out.push(Action {
                                unit: pos,
                                kind: ActionKind::Train {
                                    at,
                                    kind: UnitKind::Worker,
                                },
                            });
                        }
                    }
                }
                UnitKind::Barracks => {
                    if rng.chance(0.3) {
                        let kind = [UnitKind::Light, UnitKind::Heavy, UnitKind::Ranged][rng.below(3)];
                        if let Some(at) = produce(kind, &mut budget, &mut spawn_cells) {
                            out.push(Action {
                                unit: pos,
                                kind: ActionKind::Train { at, kind },
                            });
                        }
                    }
                }
                UnitKind::Worker | UnitKind::Light | UnitKind::Heavy | UnitKind::Ranged => {
                    let range = rules.stats(unit.kind).range as usize;
                    let target = nearest(pos, state.units_of(me.opponent()).filter(|(p, _)| p.dist(pos) <= range));
                    if let (Some(t), true) = (target, rng.chance(0.85)) {
                        out.push(Action {
                            unit: pos,
                            kind: ActionKind::Attack(t),
                        });
                        continue;
                    }
                    if unit.kind == UnitKind::Worker {
                        if rng.chance(0.05) {
                            if let Some(at) = produce(UnitKind::Barracks, &mut budget, &mut spawn_cells) {
                                out.push(Action {
                                    unit: pos,
                                    kind: ActionKind::Build {
                                        at,
                                        kind: UnitKind::Barracks,
                                    },
                                });
                                continue;
                            }
                        }
                        if rng.chance(0.8) {
                            out.extend(harvest(state, me, pos, unit, rules, rng));
                            continue;
                        }
                    } else if rng.chance(0.6) {
                        if let Some(t) = nearest(pos, state.units_of(me.opponent())) {
                            out.extend(step_toward(state, pos, t, rng).map(|to| Action {
                                unit: pos,
                                kind: ActionKind::Move(to),
                            }));
                            continue;
                        }
                    }
                    out.extend(random_move(rng));
                }
                UnitKind::Resource => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_resolves() {
        for name in ROSTER {
            let s = strategy_by_name(name).unwrap();
            assert_eq!(s.name(), name);
        }
        assert!(strategy_by_name("CRush_V1").is_none());
    }

    #[test]
    fn step_toward_reduces_distance() {
        let s = GameState::empty();
        let mut rng = SplitMix64::new(1);
        let to = step_toward(&s, Pos::new(3, 3), Pos::new(10, 3), &mut rng).unwrap();
        assert_eq!(to, Pos::new(4, 3));
    }
}
