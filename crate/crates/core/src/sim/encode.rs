//! Feature-plane encoding of game states.
//!
//! A frame holds `PLANES` raw integer planes of `MAP_SIZE × MAP_SIZE`
//! values, plane-major then row-major:
//!
//! | plane | content                                    | raw range | divisor |
//! |-------|--------------------------------------------|-----------|---------|
//! | 0     | unit kind code (base 1 … ranged 7)         | 0..=7     | 7       |
//! | 1     | hit points                                 | 0..=10    | 10      |
//! | 2     | owner (1 or 2; neutral 0)                  | 0..=2     | 2       |
//! | 3     | neutral resources: resource stock, or the  | 0..=25    | 25      |
//! |       | load carried by a worker                   |           |         |
//! | 4     | owner's stored resources, written on each  | 0..=25    | 25      |
//! |       | of that owner's base cells                 |           |         |
//!
//! Empty cells are zero in every plane. These are five integer-valued
//! planes rather than a one-hot expansion, so the model sees `C = 5`
//! channels.

use serde::{Deserialize, Serialize};

use super::{GameState, Player, Pos, Unit, UnitKind, CELLS, MAP_SIZE};
use crate::num::Scalar;
use crate::tensor::Tensor;

pub const PLANES: usize = 5;
/// Per-plane normalisation divisors.
pub const NORMALIZERS: [f64; PLANES] = [7.0, 10.0, 2.0, 25.0, 25.0];

/// Raw planes captured at one simulator step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FrameRepr", into = "FrameRepr")]
pub struct Frame {
    pub step: u32,
    /// `PLANES * CELLS` raw values.
    pub planes: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct FrameRepr {
    step: u32,
    planes: Vec<Vec<Vec<u8>>>,
}

impl From<Frame> for FrameRepr {
    fn from(f: Frame) -> Self {
        let planes = f
            .planes
            .chunks(CELLS)
            .map(|p| p.chunks(MAP_SIZE).map(<[u8]>::to_vec).collect())
            .collect();
        FrameRepr { step: f.step, planes }
    }
}

impl TryFrom<FrameRepr> for Frame {
    type Error = String;

    fn try_from(r: FrameRepr) -> Result<Self, String> {
        let ok = r.planes.len() == PLANES
            && r
                .planes
                .iter()
                .all(|p| p.len() == MAP_SIZE && p.iter().all(|row| row.len() == MAP_SIZE));
        if !ok {
            return Err(format!("frame at step {} is not {PLANES}×{MAP_SIZE}×{MAP_SIZE}", r.step));
        }
        Ok(Frame {
            step: r.step,
            planes: r.planes.into_iter().flatten().flatten().collect(),
        })
    }
}

impl Frame {
    pub fn capture(state: &GameState) -> Self {
        Frame {
            step: state.step,
            planes: encode_state(state),
        }
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        &self.planes[c * CELLS..(c + 1) * CELLS]
    }

    /// Units owned by `player` (any kind).
    pub fn survivors(&self, player: Player) -> usize {
        self.plane(2).iter().filter(|&&o| o == player.code()).count()
    }
}

pub fn encode_state(state: &GameState) -> Vec<u8> {
    let mut planes = vec![0u8; PLANES * CELLS];
    for (p, u) in state.units() {
        let i = p.index();
        planes[i] = u.kind.code();
        planes[CELLS + i] = u.hp;
        planes[2 * CELLS + i] = u.owner.map_or(0, Player::code);
        if matches!(u.kind, UnitKind::Resource | UnitKind::Worker) {
            planes[3 * CELLS + i] = u.resources;
        }
        if let (UnitKind::Base, Some(owner)) = (u.kind, u.owner) {
            planes[4 * CELLS + i] = state.store_of(owner);
        }
    }
    planes
}

/// Normalised `[PLANES, MAP_SIZE, MAP_SIZE]` tensor with values in `[0, 1]`.
pub fn normalize_frame<S: Scalar>(frame: &Frame) -> Tensor<S> {
    Tensor::from_fn(&[PLANES, MAP_SIZE, MAP_SIZE], |i| {
        S::of(frame.planes[i] as f64 / NORMALIZERS[i / CELLS])
    })
}

/// Rebuild a state from raw planes. Kind, hit points, owner, resource
/// stocks and carried loads are exact; stores are recovered from base
/// cells (zero for a player without a base); cooldowns are not encoded.
pub fn decode_frame(frame: &Frame) -> GameState {
    let mut s = GameState::empty();
    s.step = frame.step;
    for i in 0..CELLS {
        let Some(kind) = UnitKind::from_code(frame.planes[i]) else {
            continue;
        };
        let owner = Player::from_code(frame.planes[2 * CELLS + i]);
        let unit = Unit {
            kind,
            hp: frame.planes[CELLS + i],
            owner,
            resources: frame.planes[3 * CELLS + i],
            cooldown: 0,
        };
        s.place(Pos::from_index(i), unit);
        if let (UnitKind::Base, Some(p)) = (kind, owner) {
            let v = frame.planes[4 * CELLS + i];
            s.store[p.index()] = s.store[p.index()].max(v);
        }
    }
    s
}
