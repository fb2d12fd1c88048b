//! Reference implementations written against the raw feature planes and
//! the confusion-matrix definitions, sharing no code with the library.
//! Included by path from other crates' tests, so keep it self-contained.

#![allow(dead_code)]

use tstf::rng::SplitMix64;
use tstf::sim::{Frame, GameState, Player, Pos, Unit, UnitKind, CELLS};

// Indexed by kind code 1..=7 (slot 0 unused).
const MAX_HP: [f64; 8] = [0.0, 10.0, 4.0, 1.0, 1.0, 4.0, 8.0, 1.0];
const COST: [f64; 8] = [0.0, 10.0, 4.0, 0.0, 1.0, 2.0, 3.0, 2.0];
const ALPHA: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 1.0, 4.0, 8.0, 2.0];
const W_RES: f64 = 20.0;
const W_WORK: f64 = 10.0;
const W_UNIT: f64 = 40.0;
const W_BASE: f64 = 50.0;
const W_BARRACKS: f64 = 25.0;
const EXPONENT: f64 = 0.7;

const KIND: usize = 0;
const HP: usize = 1;
const OWNER: usize = 2;
const CARRY: usize = 3;
const STORE: usize = 4;

fn at(f: &Frame, plane: usize, cell: usize) -> u8 {
    f.planes[plane * CELLS + cell]
}

/// Per-side totals gathered in one row-major pass.
#[derive(Default, Clone, Copy)]
struct Side {
    store: f64,
    carried: f64,
    unit_value: f64,
    structures: f64,
    alpha_hp: f64,
    mobile: usize,
}

fn tally(f: &Frame) -> [Side; 2] {
    let mut sides = [Side::default(); 2];
    for cell in 0..CELLS {
        let code = at(f, KIND, cell) as usize;
        let owner = at(f, OWNER, cell) as usize;
        if code == 0 || owner == 0 {
            continue;
        }
        let s = &mut sides[owner - 1];
        let ratio = at(f, HP, cell) as f64 / MAX_HP[code];
        s.unit_value += COST[code] * ratio;
        match code {
            1 => {
                s.store = at(f, STORE, cell) as f64;
                s.structures += W_BASE * ratio;
            }
            2 => s.structures += W_BARRACKS * ratio,
            4..=7 => {
                if code == 4 {
                    s.carried += at(f, CARRY, cell) as f64;
                }
                s.alpha_hp += ALPHA[code] * ratio;
                s.mobile += 1;
            }
            _ => {}
        }
    }
    sides
}

/// Simple evaluator scores `(P1, P2)` with default weights.
pub fn simple(f: &Frame) -> (f64, f64) {
    let t = tally(f);
    let e = |s: &Side| W_RES * s.store + W_WORK * s.carried + W_UNIT * s.unit_value;
    (e(&t[0]), e(&t[1]))
}

pub fn combat(f: &Frame) -> (f64, f64) {
    let t = tally(f);
    let c = |s: &Side| s.alpha_hp * (s.mobile as f64).powf(EXPONENT);
    (c(&t[0]), c(&t[1]))
}

/// Lanchester evaluator scores `(P1, P2)` with default weights.
pub fn lanchester(f: &Frame) -> (f64, f64) {
    let t = tally(f);
    let e = |s: &Side| {
        W_RES * s.store + W_WORK * s.carried + s.structures + s.alpha_hp * (s.mobile as f64).powf(EXPONENT)
    };
    (e(&t[0]), e(&t[1]))
}

/// A random state on the full map with one base per player, up to
/// `extra` further units and random stores.
pub fn random_state(rng: &mut SplitMix64, extra: usize) -> GameState {
    let mut s = GameState::empty();
    let mut free: Vec<usize> = (0..CELLS).collect();
    rng.shuffle(&mut free);
    let mut cells = free.into_iter();
    for p in [Player::P1, Player::P2] {
        let mut base = Unit::new(UnitKind::Base, p);
        base.hp = 1 + rng.below(10) as u8;
        s.place(Pos::from_index(cells.next().unwrap()), base);
        s.set_store(p, rng.below(26) as u32);
    }
    for _ in 0..rng.below(extra + 1) {
        let kind = UnitKind::ALL[1 + rng.below(6)];
        let cell = Pos::from_index(cells.next().unwrap());
        if kind == UnitKind::Resource {
            s.place(cell, Unit::resource(rng.below(26) as u8));
            continue;
        }
        let owner = if rng.chance(0.5) { Player::P1 } else { Player::P2 };
        let mut u = Unit::new(kind, owner);
        u.hp = 1 + rng.below(kind.max_hp() as usize) as u8;
        if kind == UnitKind::Worker {
            u.resources = rng.below(3) as u8;
        }
        s.place(cell, u);
    }
    s
}

/// Confusion counts `(tp, fp, fn, tn)` by direct enumeration.
pub fn confusion(pred: &[bool], truth: &[bool]) -> (usize, usize, usize, usize) {
    let count = |p: bool, t: bool| pred.iter().zip(truth).filter(|(&a, &b)| a == p && b == t).count();
    (count(true, true), count(true, false), count(false, true), count(false, false))
}

/// `(accuracy, precision, recall, f1)` from counts, zero on empty
/// denominators.
pub fn metrics(c: (usize, usize, usize, usize)) -> (f64, f64, f64, f64) {
    let (tp, fp, fn_, tn) = (c.0 as f64, c.1 as f64, c.2 as f64, c.3 as f64);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let p = div(tp, tp + fp);
    let r = div(tp, tp + fn_);
    (div(tp + tn, tp + fp + fn_ + tn), p, r, div(2.0 * p * r, p + r))
}
