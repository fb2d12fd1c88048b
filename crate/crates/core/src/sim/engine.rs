use serde::{Deserialize, Serialize};

use super::encode::{encode_state, Frame};
use super::strategy::{Action, ActionKind, Strategy};
use super::{GameState, Layout, Player, Pos, Rules, Unit, UnitKind, MAX_RESOURCES};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    P1,
    P2,
    Draw,
}

impl Winner {
    /// Binary label (`p1 -> 1`, `p2 -> 0`); draws have none.
    pub fn label(self) -> Option<bool> {
        match self {
            Winner::P1 => Some(true),
            Winner::P2 => Some(false),
            Winner::Draw => None,
        }
    }

    fn by_survivors(state: &GameState) -> Winner {
        let (a, b) = (state.survivors(Player::P1), state.survivors(Player::P2));
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Winner::P1,
            std::cmp::Ordering::Less => Winner::P2,
            std::cmp::Ordering::Equal => Winner::Draw,
        }
    }
}

/// Observable outcome of one resolved action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Spawned { player: Player, kind: UnitKind, cost: u8 },
    Died { owner: Player, kind: UnitKind },
    Harvested { player: Player },
    Depleted { at: Pos },
    Returned { player: Player, amount: u8 },
}

/// Resolve both players' orders against `state` and return the successor.
///
/// Resolution order: units with a pending cooldown skip their orders and
/// tick down; all attacks land simultaneously against the snapshot; then
/// the remaining orders run player by player, with player 1 first on even
/// steps and player 2 first on odd steps. Each unit acts at most once;
/// orders that are illegal at resolution time are dropped.
pub fn apply_actions(state: &GameState, orders: [&[Action]; 2], rules: &Rules) -> (GameState, Vec<Event>) {
    let mut next = state.clone();
    let mut events = Vec::new();
    let mut acted = vec![false; super::CELLS];

    for (p, u) in state.units() {
        if u.cooldown > 0 {
            acted[p.index()] = true;
            next.get_mut(p).unwrap().cooldown -= 1;
        }
    }

    let players = [Player::P1, Player::P2];
    // First order per unit wins.
    let mut queued: [Vec<Action>; 2] = [Vec::new(), Vec::new()];
    for (pi, list) in orders.iter().enumerate() {
        let mut seen = vec![false; super::CELLS];
        for a in list.iter() {
            let ok = state
                .get(a.unit)
                .is_some_and(|u| u.owned_by(players[pi]) && !acted[a.unit.index()]);
            if !ok || std::mem::replace(&mut seen[a.unit.index()], true) {
                log::debug!("dropping order {a:?} for {:?}", players[pi]);
                continue;
            }
            queued[pi].push(*a);
        }
    }

    // Simultaneous attacks.
    let mut damage = vec![0u32; super::CELLS];
    for (pi, list) in queued.iter().enumerate() {
        for a in list {
            if let ActionKind::Attack(target) = a.kind {
                let attacker = state.get(a.unit).unwrap();
                let stats = rules.stats(attacker.kind);
                let valid = stats.damage > 0
                    && a.unit.dist(target) <= stats.range as usize
                    && state.get(target).is_some_and(|t| t.owned_by(players[pi].opponent()));
                if valid {
                    damage[target.index()] += stats.damage as u32;
                } else {
                    log::debug!("dropping attack {a:?}");
                }
                acted[a.unit.index()] = true;
            }
        }
    }
    for (i, &d) in damage.iter().enumerate() {
        if d == 0 {
            continue;
        }
        let p = Pos::from_index(i);
        let u = next.get_mut(p).unwrap();
        u.hp = (u.hp as u32).saturating_sub(d) as u8;
        if u.hp == 0 {
            let dead = next.remove(p).unwrap();
            events.push(Event::Died {
                owner: dead.owner.unwrap(),
                kind: dead.kind,
            });
        }
    }

    let first = if state.step % 2 == 0 { 0 } else { 1 };
    for pi in [first, 1 - first] {
        let me = players[pi];
        for a in &queued[pi] {
            if acted[a.unit.index()] {
                continue;
            }
            let snapshot = state.get(a.unit).unwrap();
            // The unit may have died in the attack phase; a cell entered
            // this step is already marked as acted.
            let alive = next
                .get(a.unit)
                .is_some_and(|u| u.kind == snapshot.kind && u.owned_by(me));
            if !alive {
                continue;
            }
            acted[a.unit.index()] = true;
            if !resolve(&mut next, me, a, rules, &mut events, &mut acted) {
                log::debug!("dropping order {a:?} for {me:?}");
            }
        }
    }

    next.step += 1;
    (next, events)
}

fn resolve(
    next: &mut GameState,
    me: Player,
    a: &Action,
    rules: &Rules,
    events: &mut Vec<Event>,
    acted: &mut [bool],
) -> bool {
    let unit = *next.get(a.unit).unwrap();
    match a.kind {
        ActionKind::Move(to) => {
            if !unit.kind.is_mobile() || a.unit.dist(to) != 1 || !next.is_free(to) {
                return false;
            }
            let u = next.remove(a.unit).unwrap();
            next.place(to, u);
            acted[to.index()] = true;
        }
        ActionKind::Harvest(at) => {
            let ok = unit.kind == UnitKind::Worker
                && a.unit.dist(at) == 1
                && unit.resources < rules.carry_capacity.min(MAX_RESOURCES)
                && next.get(at).is_some_and(|r| r.kind == UnitKind::Resource && r.resources > 0);
            if !ok {
                return false;
            }
            next.get_mut(a.unit).unwrap().resources += 1;
            let r = next.get_mut(at).unwrap();
            r.resources -= 1;
            events.push(Event::Harvested { player: me });
            if r.resources == 0 {
                next.remove(at);
                events.push(Event::Depleted { at });
            }
        }
        ActionKind::Return(at) => {
            let ok = unit.kind == UnitKind::Worker
                && unit.resources > 0
                && a.unit.dist(at) == 1
                && next.get(at).is_some_and(|b| b.kind == UnitKind::Base && b.owned_by(me));
            if !ok {
                return false;
            }
            let amount = unit.resources;
            next.set_store(me, next.store_of(me) as u32 + amount as u32);
            next.get_mut(a.unit).unwrap().resources = 0;
            events.push(Event::Returned { player: me, amount });
        }
        ActionKind::Build { at, kind } | ActionKind::Train { at, kind } => {
            let producer_ok = match (a.kind, unit.kind, kind) {
                (ActionKind::Build { .. }, UnitKind::Worker, UnitKind::Barracks) => true,
                (ActionKind::Train { .. }, UnitKind::Base, UnitKind::Worker) => true,
                (ActionKind::Train { .. }, UnitKind::Barracks, UnitKind::Light | UnitKind::Heavy | UnitKind::Ranged) => {
                    true
                }
                _ => false,
            };
            let cost = rules.cost(kind);
            if !producer_ok || a.unit.dist(at) != 1 || !next.is_free(at) || next.store_of(me) < cost {
                return false;
            }
            next.store[me.index()] -= cost;
            next.place(at, Unit::new(kind, me));
            acted[at.index()] = true;
            next.get_mut(a.unit).unwrap().cooldown = rules.stats(kind).produce_time;
            events.push(Event::Spawned { player: me, kind, cost });
        }
        ActionKind::Attack(_) => return false,
    }
    true
}

/// Advance one step with both strategies acting on the same snapshot.
/// Player 1 draws from `rng` before player 2.
pub fn step(
    state: &GameState,
    p1: &dyn Strategy,
    p2: &dyn Strategy,
    rules: &Rules,
    rng: &mut SplitMix64,
) -> (GameState, Vec<Event>) {
    let a1 = p1.act(state, Player::P1, rules, rng);
    let a2 = p2.act(state, Player::P2, rules, rng);
    apply_actions(state, [&a1, &a2], rules)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchOptions {
    pub max_steps: u32,
    /// A frame is captured every `cadence` steps, plus the final state.
    pub cadence: u32,
    pub rules: Rules,
    pub layout: Layout,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            cadence: 2,
            rules: Rules::default(),
            layout: Layout::default(),
        }
    }
}

/// One played match: metadata, outcome and the captured raw frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub id: u32,
    pub strategy_a: String,
    pub strategy_b: String,
    pub seed: u64,
    pub winner: Winner,
    pub duration: u32,
    pub frames: Vec<Frame>,
}

impl MatchRecord {
    pub fn final_frame(&self) -> &Frame {
        self.frames.last().expect("match records hold at least one frame")
    }
}

fn decided(state: &GameState) -> Option<Winner> {
    let b1 = state.count(Player::P1, UnitKind::Base);
    let b2 = state.count(Player::P2, UnitKind::Base);
    match (b1, b2) {
        (0, 0) => Some(Winner::by_survivors(state)),
        (0, _) => Some(Winner::P2),
        (_, 0) => Some(Winner::P1),
        _ => None,
    }
}

/// Play `a` (player 1) against `b` (player 2) from the layout's start
/// until a base falls or `max_steps` elapse. On timeout the side with more
/// surviving units wins; equal counts are a draw.
pub fn run_match(a: &dyn Strategy, b: &dyn Strategy, seed: u64, opts: &MatchOptions) -> MatchRecord {
    let mut rng = SplitMix64::new(seed);
    let mut state = opts.layout.initial_state();
    let cadence = opts.cadence.max(1);
    let mut frames = vec![Frame::capture(&state)];
    let mut winner = decided(&state);
    while winner.is_none() && state.step < opts.max_steps {
        state = step(&state, a, b, &opts.rules, &mut rng).0;
        if state.step % cadence == 0 {
            frames.push(Frame::capture(&state));
        }
        winner = decided(&state);
    }
    if frames.last().unwrap().step != state.step {
        frames.push(Frame {
            step: state.step,
            planes: encode_state(&state),
        });
    }
    MatchRecord {
        id: 0,
        strategy_a: a.name().to_string(),
        strategy_b: b.name().to_string(),
        seed,
        winner: winner.unwrap_or_else(|| Winner::by_survivors(&state)),
        duration: state.step,
        frames,
    }
}
