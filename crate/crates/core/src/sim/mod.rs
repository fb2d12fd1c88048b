//! Deterministic 16×16 micro-RTS engine, scripted strategies, tournament
//! runner and the labelled match dataset they produce.
//!
//! Coordinates are `(x, y)` with `x` the column; cells are stored row-major
//! (`y * MAP_SIZE + x`). Adjacency and attack range use Manhattan distance.

mod dataset;
mod encode;
mod engine;
mod rules;
mod strategy;
mod tournament;

pub use dataset::{
    largest_remainder, prefix_len, prefix_limit, sample_indices, sample_timeline, sample_timeline_until, split_dataset, Dataset, DatasetHeader, LabelRule, Split,
    DATASET_FORMAT, DATASET_VERSION, DEFAULT_SPLIT_RATIOS,
};
pub use encode::{decode_frame, encode_state, normalize_frame, Frame, NORMALIZERS, PLANES};
pub use engine::{apply_actions, run_match, step, Event, MatchOptions, MatchRecord, Winner};
pub use rules::{Layout, Rules, UnitStats};
pub use strategy::{strategy_by_name, Action, ActionKind, Strategy, ROSTER};
pub use tournament::{run_tournament, schedule, MatchSpec};

use serde::{Deserialize, Serialize};

pub const MAP_SIZE: usize = 16;
pub const CELLS: usize = MAP_SIZE * MAP_SIZE;
/// Upper bound of every resource quantity (stores, stocks, carried).
pub const MAX_RESOURCES: u8 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum UnitKind {
    Base = 1,
    Barracks = 2,
    Resource = 3,
    Worker = 4,
    Light = 5,
    Heavy = 6,
    Ranged = 7,
}

impl UnitKind {
    pub const ALL: [UnitKind; 7] = [
        UnitKind::Base,
        UnitKind::Barracks,
        UnitKind::Resource,
        UnitKind::Worker,
        UnitKind::Light,
        UnitKind::Heavy,
        UnitKind::Ranged,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Health on creation; fixed by the feature-plane encoding.
    pub fn max_hp(self) -> u8 {
        match self {
            UnitKind::Base => 10,
            UnitKind::Barracks => 4,
            UnitKind::Resource => 1,
            UnitKind::Worker => 1,
            UnitKind::Light => 4,
            UnitKind::Heavy => 8,
            UnitKind::Ranged => 1,
        }
    }

    pub fn is_mobile(self) -> bool {
        matches!(self, UnitKind::Worker | UnitKind::Light | UnitKind::Heavy | UnitKind::Ranged)
    }

    pub fn is_structure(self) -> bool {
        matches!(self, UnitKind::Base | UnitKind::Barracks)
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub fn index(self) -> usize {
        match self {
            Player::P1 => 0,
            Player::P2 => 1,
        }
    }

    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }

    pub fn from_code(code: u8) -> Option<Player> {
        match code {
            1 => Some(Player::P1),
            2 => Some(Player::P2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn from_index(i: usize) -> Self {
        Self::new(i % MAP_SIZE, i / MAP_SIZE)
    }

    pub fn index(self) -> usize {
        self.y * MAP_SIZE + self.x
    }

    pub fn dist(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// Point reflection through the map centre.
    pub fn mirror(self) -> Pos {
        Pos::new(MAP_SIZE - 1 - self.x, MAP_SIZE - 1 - self.y)
    }

    /// In-bounds 4-neighbours in the fixed order up, left, right, down.
    pub fn neighbors(self) -> impl Iterator<Item = Pos> {
        let Pos { x, y } = self;
        [
            (y > 0).then(|| Pos::new(x, y - 1)),
            (x > 0).then(|| Pos::new(x - 1, y)),
            (x + 1 < MAP_SIZE).then(|| Pos::new(x + 1, y)),
            (y + 1 < MAP_SIZE).then(|| Pos::new(x, y + 1)),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Unit {
    pub kind: UnitKind,
    pub hp: u8,
    /// `None` for neutral resource cells.
    pub owner: Option<Player>,
    /// Stock for resource cells, carried load for workers, 0 otherwise.
    pub resources: u8,
    /// Steps left before the unit may act again.
    pub cooldown: u8,
}

impl Unit {
    pub fn new(kind: UnitKind, owner: Player) -> Self {
        Self {
            kind,
            hp: kind.max_hp(),
            owner: Some(owner),
            resources: 0,
            cooldown: 0,
        }
    }

    pub fn resource(stock: u8) -> Self {
        Self {
            kind: UnitKind::Resource,
            hp: UnitKind::Resource.max_hp(),
            owner: None,
            resources: stock.min(MAX_RESOURCES),
            cooldown: 0,
        }
    }

    pub fn owned_by(&self, p: Player) -> bool {
        self.owner == Some(p)
    }
}

/// Complete simulator state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    cells: Vec<Option<Unit>>,
    /// Per-player stored resources, clamped to `0..=25`.
    pub store: [u8; 2],
    pub step: u32,
}

impl Default for GameState {
    fn default() -> Self {
        Self::empty()
    }
}

impl GameState {
    pub fn empty() -> Self {
        Self {
            cells: vec![None; CELLS],
            store: [0, 0],
            step: 0,
        }
    }

    pub fn get(&self, p: Pos) -> Option<&Unit> {
        self.cells[p.index()].as_ref()
    }

    pub fn get_mut(&mut self, p: Pos) -> Option<&mut Unit> {
        self.cells[p.index()].as_mut()
    }

    pub fn is_free(&self, p: Pos) -> bool {
        self.cells[p.index()].is_none()
    }

    /// Place `unit`, replacing whatever occupied the cell.
    pub fn place(&mut self, p: Pos, unit: Unit) {
        self.cells[p.index()] = Some(unit);
    }

    pub fn remove(&mut self, p: Pos) -> Option<Unit> {
        self.cells[p.index()].take()
    }

    pub fn set_store(&mut self, player: Player, amount: u32) {
        self.store[player.index()] = amount.min(MAX_RESOURCES as u32) as u8;
    }

    pub fn store_of(&self, player: Player) -> u8 {
        self.store[player.index()]
    }

    /// Occupied cells in row-major scan order.
    pub fn units(&self) -> impl Iterator<Item = (Pos, &Unit)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|u| (Pos::from_index(i), u)))
    }

    pub fn units_of(&self, player: Player) -> impl Iterator<Item = (Pos, &Unit)> {
        self.units().filter(move |(_, u)| u.owned_by(player))
    }

    pub fn count(&self, player: Player, kind: UnitKind) -> usize {
        self.units_of(player).filter(|(_, u)| u.kind == kind).count()
    }

    /// Units owned by `player`, structures included.
    pub fn survivors(&self, player: Player) -> usize {
        self.units_of(player).count()
    }

    /// Point-reflected copy with the players' roles swapped.
    pub fn mirrored(&self) -> GameState {
        let mut out = GameState::empty();
        for (p, u) in self.units() {
            let mut m = *u;
            m.owner = u.owner.map(Player::opponent);
            out.place(p.mirror(), m);
        }
        out.store = [self.store[1], self.store[0]];
        out.step = self.step;
        out
    }
}
