use posg_core::matgame::{best_response_value, saddle_gap, solve, MatrixGame, MixedAction, Side};
use posg_core::rng::{path_rng, uniform};
use proptest::prelude::*;

fn random_game(seed: u64) -> MatrixGame {
    let mut rng = path_rng(seed, 0);
    let rows = 1 + (uniform(&mut rng) * 6.0) as usize;
    let cols = 1 + (uniform(&mut rng) * 6.0) as usize;
    let entries = (0..rows * cols).map(|_| uniform(&mut rng) * 20.0 - 10.0).collect();
    MatrixGame::new(rows, cols, entries).unwrap()
}

fn certify(game: &MatrixGame, tol: f64) {
    let sol = solve(game).unwrap();
    let row = MixedAction::new(sol.row_strategy.probs().to_vec()).unwrap();
    let col = MixedAction::new(sol.col_strategy.probs().to_vec()).unwrap();
    // the minimizer's best reply to mu* cannot push below the value, and vice versa
    let (lo, _) = best_response_value(game, &row, Side::Col);
    let (hi, _) = best_response_value(game, &col, Side::Row);
    assert!(lo >= sol.value - tol, "{:?}: {} < {}", game, lo, sol.value);
    assert!(hi <= sol.value + tol, "{:?}: {} > {}", game, hi, sol.value);
    assert!(saddle_gap(game, &sol) <= 2.0 * tol);
}

#[test]
fn five_hundred_random_games_are_certified() {
    for seed in 0..500 {
        let g = random_game(seed);
        certify(&g, 1e-8);
        let v = solve(&g).unwrap().value;
        let t = solve(&g.swap_players()).unwrap().value;
        assert!((v + t).abs() <= 1e-8, "seed {}: {} vs {}", seed, v, t);
    }
}

#[test]
fn two_by_two_closed_form() {
    // no saddle in pure strategies: v = (ad - bc) / (a + d - b - c)
    let g = MatrixGame::from_rows(&[&[3.0, 1.0], &[0.0, 2.0]]).unwrap();
    let s = solve(&g).unwrap();
    assert!((s.value - 1.5).abs() < 1e-12);
    assert!((s.row_strategy.probs()[0] - 0.5).abs() < 1e-12);
    assert!((s.col_strategy.probs()[0] - 0.25).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn affine_transforms(seed in any::<u64>(), shift in -50.0f64..50.0, scale in 0.01f64..100.0) {
        let g = random_game(seed);
        let v = solve(&g).unwrap().value;
        let moved = MatrixGame::new(
            g.rows(),
            g.cols(),
            g.entries().iter().map(|a| scale * a + shift).collect(),
        ).unwrap();
        let w = solve(&moved).unwrap().value;
        prop_assert!((w - (scale * v + shift)).abs() <= 1e-8 * (1.0 + scale * 10.0 + shift.abs()));
    }

    #[test]
    fn value_between_pure_bounds(seed in any::<u64>()) {
        let g = random_game(seed);
        let v = solve(&g).unwrap().value;
        let maxmin = (0..g.rows())
            .map(|u| (0..g.cols()).map(|c| g.get(u, c)).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        let minmax = (0..g.cols())
            .map(|c| (0..g.rows()).map(|u| g.get(u, c)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(maxmin - 1e-9 <= v && v <= minmax + 1e-9);
    }

    #[test]
    fn strategies_are_distributions(seed in any::<u64>()) {
        let s = solve(&random_game(seed)).unwrap();
        for p in [s.row_strategy.probs(), s.col_strategy.probs()] {
            prop_assert!(p.iter().all(|&q| q >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
