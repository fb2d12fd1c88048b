//! Weighted-sum state evaluators: a linear "simple" score and a
//! Lanchester-style score with force concentration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{GameState, Player, Rules, UnitKind};

/// One value per unit kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerKind {
    pub base: f64,
    pub barracks: f64,
    pub resource: f64,
    pub worker: f64,
    pub light: f64,
    pub heavy: f64,
    pub ranged: f64,
}

impl Default for PerKind {
    fn default() -> Self {
        Self {
            base: 0.0,
            barracks: 0.0,
            resource: 0.0,
            worker: 0.0,
            light: 0.0,
            heavy: 0.0,
            ranged: 0.0,
        }
    }
}

impl PerKind {
    pub fn get(&self, kind: UnitKind) -> f64 {
        match kind {
            UnitKind::Base => self.base,
            UnitKind::Barracks => self.barracks,
            UnitKind::Resource => self.resource,
            UnitKind::Worker => self.worker,
            UnitKind::Light => self.light,
            UnitKind::Heavy => self.heavy,
            UnitKind::Ranged => self.ranged,
        }
    }

    fn values(&self) -> [f64; 7] {
        UnitKind::ALL.map(|k| self.get(k))
    }

    /// Unit costs from a simulator rule table.
    pub fn costs(rules: &Rules) -> Self {
        Self {
            base: rules.cost(UnitKind::Base) as f64,
            barracks: rules.cost(UnitKind::Barracks) as f64,
            resource: rules.cost(UnitKind::Resource) as f64,
            worker: rules.cost(UnitKind::Worker) as f64,
            light: rules.cost(UnitKind::Light) as f64,
            heavy: rules.cost(UnitKind::Heavy) as f64,
            ranged: rules.cost(UnitKind::Ranged) as f64,
        }
    }
}

/// Evaluator weights. Defaults: `w_res = 20`, `w_work = 10`,
/// `w_unit = 40`, `w_base = 50`, `w_barracks = 25`,
/// `alpha = {worker 1, light 4, heavy 8, ranged 2}`, exponent 0.7 and unit
/// costs from the default rule table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalWeights {
    pub w_res: f64,
    pub w_work: f64,
    pub w_unit: f64,
    pub w_base: f64,
    pub w_barracks: f64,
    pub alpha: PerKind,
    pub lanchester_exponent: f64,
    pub unit_cost: PerKind,
}

impl Default for EvalWeights {
    fn default() -> Self {
        Self {
            w_res: 20.0,
            w_work: 10.0,
            w_unit: 40.0,
            w_base: 50.0,
            w_barracks: 25.0,
            alpha: PerKind {
                worker: 1.0,
                light: 4.0,
                heavy: 8.0,
                ranged: 2.0,
                ..PerKind::default()
            },
            lanchester_exponent: 0.7,
            unit_cost: PerKind::costs(&Rules::default()),
        }
    }
}

impl EvalWeights {
    pub fn validate(&self) -> Result<()> {
        let scalars = [self.w_res, self.w_work, self.w_unit, self.w_base, self.w_barracks];
        let all = scalars
            .iter()
            .chain(&self.alpha.values())
            .chain(&self.unit_cost.values())
            .copied()
            .collect::<Vec<_>>();
        if let Some(bad) = all.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Config(format!("evaluator weight {bad} must be finite and non-negative")));
        }
        let e = self.lanchester_exponent;
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Config(format!("lanchester_exponent {e} outside (0, 1]")));
        }
        Ok(())
    }

    /// Every weight multiplied by `c`; the exponent is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        let k = |p: PerKind| PerKind {
            base: p.base * c,
            barracks: p.barracks * c,
            resource: p.resource * c,
            worker: p.worker * c,
            light: p.light * c,
            heavy: p.heavy * c,
            ranged: p.ranged * c,
        };
        Self {
            w_res: self.w_res * c,
            w_work: self.w_work * c,
            w_unit: self.w_unit * c,
            w_base: self.w_base * c,
            w_barracks: self.w_barracks * c,
            alpha: k(self.alpha),
            lanchester_exponent: self.lanchester_exponent,
            unit_cost: self.unit_cost,
        }
    }
}

fn hp_ratio(hp: u8, kind: UnitKind) -> f64 {
    hp as f64 / kind.max_hp() as f64
}

/// Stored resources plus resources carried by workers.
fn economy(state: &GameState, p: Player, w: &EvalWeights) -> f64 {
    let carried: f64 = state
        .units_of(p)
        .filter(|(_, u)| u.kind == UnitKind::Worker)
        .map(|(_, u)| u.resources as f64)
        .sum();
    w.w_res * state.store_of(p) as f64 + w.w_work * carried
}

/// `w_res·R + w_work·carried + w_unit·Σ cost·hp/max_hp` over all of
/// `p`'s units.
pub fn simple_eval(state: &GameState, p: Player, w: &EvalWeights) -> f64 {
    let units: f64 = state
        .units_of(p)
        .map(|(_, u)| w.unit_cost.get(u.kind) * hp_ratio(u.hp, u.kind))
        .sum();
    economy(state, p, w) + w.w_unit * units
}

/// Combat strength `(Σ α·hp/max_hp) · N^exponent` over `p`'s mobile units.
pub fn lanchester_combat(state: &GameState, p: Player, w: &EvalWeights) -> f64 {
    let (sum, n) = state
        .units_of(p)
        .filter(|(_, u)| u.kind.is_mobile())
        .fold((0.0, 0usize), |(s, n), (_, u)| {
            (s + w.alpha.get(u.kind) * hp_ratio(u.hp, u.kind), n + 1)
        });
    sum * (n as f64).powf(w.lanchester_exponent)
}

/// Economy terms, base and barracks health ratios, and
/// [`lanchester_combat`].
pub fn lanchester_eval(state: &GameState, p: Player, w: &EvalWeights) -> f64 {
    let structures: f64 = state
        .units_of(p)
        .map(|(_, u)| match u.kind {
            UnitKind::Base => w.w_base * hp_ratio(u.hp, u.kind),
            UnitKind::Barracks => w.w_barracks * hp_ratio(u.hp, u.kind),
            _ => 0.0,
        })
        .sum();
    economy(state, p, w) + structures + lanchester_combat(state, p, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    Simple,
    Lanchester,
}

impl Evaluator {
    pub const ALL: [Evaluator; 2] = [Evaluator::Simple, Evaluator::Lanchester];

    pub fn name(self) -> &'static str {
        match self {
            Evaluator::Simple => "simple",
            Evaluator::Lanchester => "lanchester",
        }
    }

    pub fn score(self, state: &GameState, p: Player, w: &EvalWeights) -> f64 {
        match self {
            Evaluator::Simple => simple_eval(state, p, w),
            Evaluator::Lanchester => lanchester_eval(state, p, w),
        }
    }

    /// `(E₁, E₂)`.
    pub fn scores(self, state: &GameState, w: &EvalWeights) -> (f64, f64) {
        (self.score(state, Player::P1, w), self.score(state, Player::P2, w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    P1,
    P2,
    Tie,
}

impl Prediction {
    /// Binary label (`P1 → 1`); `None` for a tie.
    pub fn label(self) -> Option<bool> {
        match self {
            Prediction::P1 => Some(true),
            Prediction::P2 => Some(false),
            Prediction::Tie => None,
        }
    }
}

/// Sign of `E₁ − E₂`.
pub fn predict_winner_classical(state: &GameState, evaluator: Evaluator, w: &EvalWeights) -> Prediction {
    let (a, b) = evaluator.scores(state, w);
    let d = a - b;
    if d > 0.0 {
        Prediction::P1
    } else if d < 0.0 {
        Prediction::P2
    } else {
        Prediction::Tie
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::sim::{Pos, Unit};
    use proptest::prelude::*;

    fn w() -> EvalWeights {
        EvalWeights::default()
    }

    #[test]
    fn empty_state_scores_zero() {
        let s = GameState::empty();
        for e in Evaluator::ALL {
            assert_eq!(e.scores(&s, &w()), (0.0, 0.0));
            assert_eq!(predict_winner_classical(&s, e, &w()), Prediction::Tie);
        }
    }

    #[test]
    fn simple_hand_example() {
        let mut s = GameState::empty();
        let mut worker = Unit::new(UnitKind::Worker, Player::P1);
        worker.resources = 3;
        s.place(Pos::new(4, 4), worker);
        s.set_store(Player::P1, 2);
        assert_eq!(simple_eval(&s, Player::P1, &w()), 110.0);
        assert_eq!(simple_eval(&s, Player::P2, &w()), 0.0);
        assert_eq!(predict_winner_classical(&s, Evaluator::Simple, &w()), Prediction::P1);
    }

    #[test]
    fn lanchester_single_light() {
        let mut s = GameState::empty();
        s.place(Pos::new(1, 1), Unit::new(UnitKind::Light, Player::P2));
        assert_eq!(lanchester_eval(&s, Player::P2, &w()), 4.0);
        let mut base_only = GameState::empty();
        base_only.place(Pos::new(1, 1), Unit::new(UnitKind::Base, Player::P1));
        assert_eq!(lanchester_combat(&base_only, Player::P1, &w()), 0.0);
        assert_eq!(lanchester_eval(&base_only, Player::P1, &w()), 50.0);
    }

    #[test]
    fn duplication_law() {
        for kind in [UnitKind::Worker, UnitKind::Light, UnitKind::Heavy, UnitKind::Ranged] {
            for k in 1..=4 {
                let mut one = GameState::empty();
                let mut two = GameState::empty();
                for i in 0..2 * k {
                    let u = Unit::new(kind, Player::P1);
                    if i < k {
                        one.place(Pos::from_index(i), u);
                    }
                    two.place(Pos::from_index(i), u);
                }
                let ratio = lanchester_combat(&two, Player::P1, &w()) / lanchester_combat(&one, Player::P1, &w());
                assert!((ratio - 2f64.powf(1.7)).abs() < 1e-9, "{kind:?} k={k}: {ratio}");
            }
        }
    }

    #[test]
    fn mirrored_layout_ties() {
        let s = crate::sim::Layout::default().initial_state();
        for e in Evaluator::ALL {
            let (a, b) = e.scores(&s, &w());
            assert_eq!(a, b);
            assert!(a > 0.0);
            assert_eq!(predict_winner_classical(&s, e, &w()), Prediction::Tie);
        }
    }

    #[test]
    fn validation() {
        w().validate().unwrap();
        let bad = EvalWeights {
            lanchester_exponent: 1.5,
            ..w()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = EvalWeights { w_res: -1.0, ..w() };
        assert!(bad.validate().is_err());
        let bad = EvalWeights {
            w_unit: f64::NAN,
            ..w()
        };
        assert!(bad.validate().is_err());
    }

    fn random_state(seed: u64, units: usize) -> GameState {
        let mut r = SplitMix64::new(seed);
        let mut s = GameState::empty();
        for _ in 0..units {
            let kind = UnitKind::ALL[r.below(7)];
            let mut u = if kind == UnitKind::Resource {
                Unit::resource(r.below(26) as u8)
            } else {
                Unit::new(kind, if r.chance(0.5) { Player::P1 } else { Player::P2 })
            };
            u.hp = 1 + r.below(kind.max_hp() as usize) as u8;
            if kind == UnitKind::Worker {
                u.resources = r.below(4) as u8;
            }
            s.place(Pos::from_index(r.below(crate::sim::CELLS)), u);
        }
        s.store = [r.below(26) as u8, r.below(26) as u8];
        s
    }

    proptest! {
        #[test]
        fn monotone_under_additions(seed in any::<u64>(), n in 0usize..12, kind_i in 0usize..7, p1 in any::<bool>()) {
            let s = random_state(seed, n);
            let p = if p1 { Player::P1 } else { Player::P2 };
            let kind = UnitKind::ALL[kind_i];
            let free = (0..crate::sim::CELLS).map(Pos::from_index).find(|&q| s.is_free(q)).unwrap();
            let mut more = s.clone();
            if kind != UnitKind::Resource {
                more.place(free, Unit::new(kind, p));
            }
            let mut richer = s.clone();
            richer.set_store(p, s.store_of(p) as u32 + 1);
            for e in Evaluator::ALL {
                prop_assert!(e.score(&more, p, &w()) >= e.score(&s, p, &w()));
                prop_assert!(e.score(&richer, p, &w()) >= e.score(&s, p, &w()));
            }
        }

        #[test]
        fn scale_invariance(seed in any::<u64>(), n in 0usize..12, c in 0.01f64..100.0) {
            let s = random_state(seed, n);
            let scaled = w().scaled(c);
            for e in Evaluator::ALL {
                let (a, b) = e.scores(&s, &w());
                let (sa, sb) = e.scores(&s, &scaled);
                prop_assert!((sa - c * a).abs() <= 1e-9 * (1.0 + (c * a).abs()));
                prop_assert!((sb - c * b).abs() <= 1e-9 * (1.0 + (c * b).abs()));
                // Exact ties stay ties only up to rounding; compare signs away from zero.
                if (a - b).abs() > 1e-9 * (1.0 + a.abs() + b.abs()) {
                    prop_assert_eq!(
                        predict_winner_classical(&s, e, &w()),
                        predict_winner_classical(&s, e, &scaled)
                    );
                }
            }
        }

        #[test]
        fn pure_functions(seed in any::<u64>(), n in 0usize..12) {
            let s = random_state(seed, n);
            let before = s.clone();
            for e in Evaluator::ALL {
                prop_assert_eq!(e.scores(&s, &w()), e.scores(&s, &w()));
            }
            prop_assert_eq!(s, before);
        }
    }
}
