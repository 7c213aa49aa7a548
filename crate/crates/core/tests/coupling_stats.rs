use std::sync::Arc;

use posg_core::coupling::{
    check_value_difference_bound, estimate_coupling_time, step_split_chain, ObservationSplit, SplitChainConfig,
    SplitChainState, DEFAULT_HORIZON_CAP,
};
use posg_core::model::{canon2, patrol2};
use posg_core::rng::path_rng;
use posg_core::shapley::{extract_strategies, value_iterate};
use posg_core::stats::{chi_square_statistic, kolmogorov_survival, ks_statistic_discrete};
use posg_core::{Belief, Dims, GameModel, RawModel, Side, SimplexGrid, Strategy};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn canon2_coupling_time_is_geometric() {
    let m = canon2();
    let cfg = SplitChainConfig::full(&m).unwrap();
    assert!((cfg.delta() - 0.08).abs() <= 1e-15);
    let (a, b) = (Belief::point_mass(2, 0), Belief::point_mass(2, 1));
    let est = estimate_coupling_time(
        &m,
        &cfg,
        &a,
        &b,
        &Strategy::uniform(Side::Row),
        &Strategy::uniform(Side::Col),
        10_000,
        DEFAULT_HORIZON_CAP,
        11,
    )
    .unwrap();
    assert_eq!(est.censored, 0);
    let plus_one: Vec<u64> = est.uncensored().iter().map(|t| t + 1).collect();
    let d = ks_statistic_discrete(&plus_one, |k| 1.0 - 0.92f64.powi(k as i32));
    let p = kolmogorov_survival(d * (plus_one.len() as f64).sqrt());
    assert!(p > 0.01, "KS p-value {}", p);
    // E[tau] = (1 - delta) / delta
    assert!(est.ci_low <= 11.5 && 11.5 <= est.ci_high, "{} [{}, {}]", est.mean_tau, est.ci_low, est.ci_high);
}

/// Law of `(X_n, Y_n)` for one copy of an action-independent model.
fn copy_law(m: &GameModel, start: &[f64], n: usize) -> Vec<f64> {
    let (nx, ny) = (m.num_states(), m.num_obs());
    let mut dist = start.to_vec();
    let mut joint = vec![0.0; nx * ny];
    for step in 0..n {
        let mut next = vec![0.0; nx];
        if step + 1 == n {
            joint.iter_mut().for_each(|j| *j = 0.0);
        }
        for x in 0..nx {
            let s = m.kernel_slice(x, 0, 0);
            for z in 0..nx {
                for y in 0..ny {
                    next[z] += dist[x] * s[z * ny + y];
                    if step + 1 == n {
                        joint[z * ny + y] += dist[x] * s[z * ny + y];
                    }
                }
            }
        }
        dist = next;
    }
    joint
}

fn occupation_chi_square(m: &GameModel, cfg: &SplitChainConfig, n: usize, paths: u64, seed: u64) -> f64 {
    let (nx, ny) = (m.num_states(), m.num_obs());
    let cells = nx * ny;
    let (a, b) = (Belief::point_mass(nx, 0), Belief::uniform(nx));
    let la = copy_law(m, a.probs(), n);
    let lb = copy_law(m, b.probs(), n);
    let probs: Vec<f64> = (0..cells * cells).map(|i| la[i / cells] * lb[i % cells]).collect();
    let mut counts = vec![0u64; cells * cells];
    for p in 0..paths {
        let mut rng = path_rng(seed, p);
        let mut s = SplitChainState::initial(cfg, &a, &b, &mut rng);
        for _ in 0..n {
            s = step_split_chain(m, cfg, &s, 0, 0, &mut rng).unwrap();
        }
        let ia = s.x_hat * ny + s.y_hat.unwrap();
        let ib = s.x_tilde * ny + s.y_tilde.unwrap();
        counts[ia * cells + ib] += 1;
    }
    let stat = chi_square_statistic(&counts, &probs);
    let dof = probs.iter().filter(|&&p| p > 0.0).count() - 1;
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

#[test]
fn conditional_split_preserves_pair_law() {
    let m = canon2();
    let cfg = SplitChainConfig::full(&m).unwrap();
    assert_eq!(cfg.split(), ObservationSplit::Conditional);
    for n in [1, 3] {
        let p = occupation_chi_square(&m, &cfg, n, 20_000, 40 + n as u64);
        assert!(p > 0.01, "n={} p={}", n, p);
    }
}

/// Two states, uniform observations: the product observation split is valid.
fn noisy_chain() -> GameModel {
    let dims = Dims::new(2, 2, 1, 1);
    let p = [[0.6, 0.4], [0.5, 0.5]];
    let mut kernel = vec![0.0; dims.kernel_len()];
    for x in 0..2 {
        for z in 0..2 {
            for y in 0..2 {
                kernel[dims.kernel_index(x, 0, 0, z, y)] = p[x][z] * 0.5;
            }
        }
    }
    let raw = RawModel {
        name: "noisy".into(),
        dims,
        kernel,
        cost: vec![1.0, 0.0],
        initial_belief: vec![0.5, 0.5],
        lyapunov: None,
    };
    GameModel::new(raw).unwrap()
}

#[test]
fn product_split_preserves_pair_law() {
    let m = noisy_chain();
    let cfg = SplitChainConfig::full(&m).unwrap();
    assert_eq!(cfg.split(), ObservationSplit::Product);
    assert!((cfg.delta() - 0.32).abs() < 1e-15);
    let p = occupation_chi_square(&m, &cfg, 2, 20_000, 3);
    assert!(p > 0.01, "p={}", p);
}

#[test]
fn value_gap_bound_on_patrol() {
    let m = patrol2();
    let grid = Arc::new(SimplexGrid::build(2, 32).unwrap());
    let sol = value_iterate(&m, grid, 0.9, 1e-6, 100_000).unwrap();
    let strategies = extract_strategies(&m, &sol.table).unwrap();
    let cfg = SplitChainConfig::full(&m).unwrap();
    let (a, b) = (Belief::point_mass(2, 0), Belief::point_mass(2, 1));
    let r = check_value_difference_bound(&m, &sol, &strategies, &a, &b, &cfg, 5_000, DEFAULT_HORIZON_CAP, 5).unwrap();
    assert!(r.value_difference > 0.0);
    assert!(r.pass, "{} > {}", r.value_difference, r.bound);
}
