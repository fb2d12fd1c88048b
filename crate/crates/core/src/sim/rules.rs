use serde::{Deserialize, Serialize};

use super::{GameState, Player, Pos, Unit, UnitKind, MAX_RESOURCES};

/// Combat and production stats of one unit kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitStats {
    pub cost: u8,
    pub damage: u8,
    pub range: u8,
    /// Producer (or builder) cooldown after creating this kind.
    pub produce_time: u8,
}

/// Rule table. Hit points are fixed by [`UnitKind::max_hp`]; everything
/// here is tunable.
///
/// | kind     | cost | damage | range | produce_time |
/// |----------|------|--------|-------|--------------|
/// | base     | 10   | 0      | 0     | 0            |
/// | barracks | 4    | 0      | 0     | 5            |
/// | resource | 0    | 0      | 0     | 0            |
/// | worker   | 1    | 1      | 1     | 2            |
/// | light    | 2    | 2      | 1     | 3            |
/// | heavy    | 3    | 4      | 1     | 4            |
/// | ranged   | 2    | 1      | 3     | 3            |
///
/// Mobile units move one cell per step and attack at most once per step.
/// Workers harvest one resource per step up to `carry_capacity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rules {
    pub base: UnitStats,
    pub barracks: UnitStats,
    pub resource: UnitStats,
    pub worker: UnitStats,
    pub light: UnitStats,
    pub heavy: UnitStats,
    pub ranged: UnitStats,
    pub carry_capacity: u8,
}

impl Default for Rules {
    fn default() -> Self {
        let s = |cost, damage, range, produce_time| UnitStats {
            cost,
            damage,
            range,
            produce_time,
        };
        Self {
            base: s(10, 0, 0, 0),
            barracks: s(4, 0, 0, 5),
            resource: s(0, 0, 0, 0),
            worker: s(1, 1, 1, 2),
            light: s(2, 2, 1, 3),
            heavy: s(3, 4, 1, 4),
            ranged: s(2, 1, 3, 3),
            carry_capacity: 1,
        }
    }
}

impl Rules {
    pub fn stats(&self, kind: UnitKind) -> &UnitStats {
        match kind {
            UnitKind::Base => &self.base,
            UnitKind::Barracks => &self.barracks,
            UnitKind::Resource => &self.resource,
            UnitKind::Worker => &self.worker,
            UnitKind::Light => &self.light,
            UnitKind::Heavy => &self.heavy,
            UnitKind::Ranged => &self.ranged,
        }
    }

    pub fn cost(&self, kind: UnitKind) -> u8 {
        self.stats(kind).cost
    }
}

/// Starting position, described for player 1 and point-mirrored for
/// player 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Layout {
    pub base: (usize, usize),
    pub workers: Vec<(usize, usize)>,
    pub resources: Vec<(usize, usize)>,
    pub resource_stock: u8,
    pub start_store: u8,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            base: (2, 2),
            workers: vec![(3, 3)],
            resources: vec![(0, 0), (1, 0), (0, 1)],
            resource_stock: 10,
            start_store: 5,
        }
    }
}

impl Layout {
    pub fn initial_state(&self) -> GameState {
        let mut s = GameState::empty();
        for player in [Player::P1, Player::P2] {
            let at = |(x, y): (usize, usize)| {
                let p = Pos::new(x, y);
                if player == Player::P1 {
                    p
                } else {
                    p.mirror()
                }
            };
            s.place(at(self.base), Unit::new(UnitKind::Base, player));
            for &w in &self.workers {
                s.place(at(w), Unit::new(UnitKind::Worker, player));
            }
            for &r in &self.resources {
                s.place(at(r), Unit::resource(self.resource_stock));
            }
            s.store[player.index()] = self.start_store.min(MAX_RESOURCES);
        }
        s
    }
}
