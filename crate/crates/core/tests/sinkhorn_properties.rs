use entmap::bench::sample_uniform_cube;
use entmap::sinkhorn::{column_marginals, row_marginals};
use entmap::{
    cost_matrix, dual_objective, marginal_violation, plan_density, primal_objective, sinkhorn_solve,
    w2_squared_empirical, PointCloud,
};
use proptest::prelude::*;

fn scaled(n: usize, d: usize, seed: u64, scale: f64) -> PointCloud {
    let x = sample_uniform_cube(n, d, seed).unwrap();
    PointCloud::from_flat(x.as_flat().iter().map(|v| v * scale).collect(), d).unwrap()
}

#[test]
fn dual_trace_is_monotone() {
    for seed in 0..10 {
        let x = scaled(25, 2, seed, 1.0);
        let y = scaled(30, 2, seed + 100, 1.5);
        let (_, rep) = sinkhorn_solve(&x, &y, 0.05, 1e-9, 5_000).unwrap();
        for w in rep.dual_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "dual decreased: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn rows_are_exact_after_every_solve() {
    for (seed, max_iter) in [(1, 1), (2, 3), (3, 50), (4, 10_000)] {
        let x = scaled(20, 3, seed, 1.0);
        let y = scaled(20, 3, seed + 7, 2.0);
        let (pot, _) = sinkhorn_solve(&x, &y, 0.1, 1e-10, max_iter).unwrap();
        for r in row_marginals(&pot, &x, &y).unwrap() {
            assert!((r - 1.0).abs() <= 1e-12, "row marginal {r}");
        }
    }
}

#[test]
fn duality_gap_closes_at_convergence() {
    for seed in 0..8 {
        let x = scaled(30, 2, seed, 1.0);
        let y = scaled(30, 2, seed + 50, 1.0);
        let (pot, rep) = sinkhorn_solve(&x, &y, 0.1, 1e-8, 10_000).unwrap();
        assert!(rep.converged);
        let dual = dual_objective(&pot, &x, &y).unwrap();
        let primal = primal_objective(&pot, &x, &y).unwrap();
        assert!((primal - dual).abs() <= 1e-6 * (1.0 + dual.abs()));
        assert!((dual - rep.dual_trace.last().unwrap()).abs() <= 1e-12 * (1.0 + dual.abs()));
        assert!(marginal_violation(&pot, &x, &y).unwrap() <= 1e-8);
    }
}

#[test]
fn converged_column_marginals_within_tolerance() {
    let x = scaled(40, 2, 3, 1.0);
    let y = scaled(40, 2, 4, 1.0);
    let (pot, rep) = sinkhorn_solve(&x, &y, 0.2, 1e-8, 10_000).unwrap();
    assert!(rep.converged && rep.marginal_violation <= 1e-8);
    let cols = column_marginals(&pot, &x, &y).unwrap();
    let tv = 0.5 * cols.iter().map(|c| (c - 1.0).abs()).sum::<f64>() / cols.len() as f64;
    assert!(tv <= 1e-8);
}

#[test]
fn entropic_value_dominates_half_w2() {
    for seed in 0..6 {
        let x = scaled(12, 2, seed, 1.0);
        let y = scaled(12, 2, seed + 30, 1.0);
        let half_w2 = 0.5 * w2_squared_empirical(&x, &y).unwrap();
        for eps in [1.0, 0.1, 0.02] {
            let (pot, _) = sinkhorn_solve(&x, &y, eps, 1e-9, 100_000).unwrap();
            assert!(dual_objective(&pot, &x, &y).unwrap() >= half_w2 - 1e-12);
            assert!(primal_objective(&pot, &x, &y).unwrap() >= half_w2 - 1e-12);
        }
    }
}

#[test]
fn gap_to_half_w2_shrinks_with_eps() {
    let x = scaled(30, 2, 11, 1.0);
    let y = scaled(30, 2, 12, 1.0);
    let half_w2 = 0.5 * w2_squared_empirical(&x, &y).unwrap();
    let mut prev = f64::INFINITY;
    for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
        // eps = 0.01 needs ~3e4 sweeps to reach 1e-6; gaps differ by ~1e-2 along the grid.
        let (pot, rep) = sinkhorn_solve(&x, &y, eps, 1e-6, 200_000).unwrap();
        assert!(rep.converged);
        let gap = dual_objective(&pot, &x, &y).unwrap() - half_w2;
        assert!(gap >= 0.0 && gap <= prev, "eps {eps}: gap {gap} after {prev}");
        prev = gap;
    }
}

#[test]
fn plan_is_shift_invariant() {
    let x = scaled(15, 3, 21, 1.0);
    let y = scaled(18, 3, 22, 1.0);
    let a = [3.0, -1.5, 0.25];
    let (xs, ys) = (x.translated(&a).unwrap(), y.translated(&a).unwrap());
    let (p, _) = sinkhorn_solve(&x, &y, 0.1, 1e-10, 10_000).unwrap();
    let (q, _) = sinkhorn_solve(&xs, &ys, 0.1, 1e-10, 10_000).unwrap();
    let (c, cs) = (cost_matrix(&x, &y).unwrap(), cost_matrix(&xs, &ys).unwrap());
    for i in 0..x.len() {
        for j in 0..y.len() {
            let a = plan_density(&p, i, j, c.get(i, j)).unwrap();
            let b = plan_density(&q, i, j, cs.get(i, j)).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a), "({i},{j}) {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solve_contracts_hold(
        n in 1usize..12,
        m in 1usize..12,
        d in 1usize..4,
        seed in any::<u64>(),
        eps in 0.05..2.0f64,
    ) {
        let x = scaled(n, d, seed, 1.0);
        let y = scaled(m, d, seed.wrapping_add(1), 1.0);
        let (pot, rep) = sinkhorn_solve(&x, &y, eps, 1e-7, 20_000).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rep.marginal_violation <= 1e-7);
        prop_assert!(pot.f.iter().sum::<f64>().abs() <= 1e-10 * (1.0 + pot.f.iter().map(|v| v.abs()).sum::<f64>()));
        for w in rep.dual_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        for r in row_marginals(&pot, &x, &y).unwrap() {
            prop_assert!((r - 1.0).abs() <= 1e-12);
        }
    }
}
