mod oracle;

use tstf::baselines::{lanchester_combat, EvalWeights, Evaluator};
use tstf::metrics::compute_metrics;
use tstf::rng::SplitMix64;
use tstf::sim::{decode_frame, Frame, GameState, Player, Pos, Unit, UnitKind};

#[test]
fn evaluators_match_plane_oracle_on_random_states() {
    let w = EvalWeights::default();
    let mut rng = SplitMix64::new(2024);
    for k in 0..1000 {
        let state = oracle::random_state(&mut rng, 24);
        let frame = Frame::capture(&state);
        let decoded = decode_frame(&frame);
        for (ev, want) in [(Evaluator::Simple, oracle::simple(&frame)), (Evaluator::Lanchester, oracle::lanchester(&frame))] {
            assert_eq!(ev.scores(&state, &w), want, "state {k}, {}", ev.name());
            assert_eq!(ev.scores(&decoded, &w), want, "decoded state {k}, {}", ev.name());
        }
    }
}

#[test]
fn duplication_law() {
    let w = EvalWeights::default();
    let kinds = [UnitKind::Light, UnitKind::Heavy, UnitKind::Ranged, UnitKind::Worker];
    for k in 1..=4 {
        let mut once = GameState::empty();
        let mut twice = GameState::empty();
        for (i, &kind) in kinds.iter().take(k).enumerate() {
            let mut u = Unit::new(kind, Player::P1);
            u.hp = kind.max_hp().div_ceil(2);
            once.place(Pos::new(i, 0), u);
            twice.place(Pos::new(i, 0), u);
            twice.place(Pos::new(i, 1), u);
        }
        let a = lanchester_combat(&once, Player::P1, &w);
        let b = lanchester_combat(&twice, Player::P1, &w);
        assert!((b / a - 2f64.powf(1.7)).abs() < 1e-9, "k={k}: {}", b / a);
    }
}

#[test]
fn metrics_match_brute_force_counts() {
    let mut rng = SplitMix64::new(7);
    for _ in 0..10_000 {
        let n = 1 + rng.below(40);
        let pred: Vec<bool> = (0..n).map(|_| rng.chance(0.5)).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.chance(0.5)).collect();
        let r = compute_metrics(&pred, &truth).unwrap();
        let c = oracle::confusion(&pred, &truth);
        assert_eq!((r.confusion.tp, r.confusion.fp, r.confusion.fn_, r.confusion.tn), c);
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), oracle::metrics(c));
        assert_eq!(r.op, r.accuracy + r.precision + r.recall + r.f1);
    }
}
