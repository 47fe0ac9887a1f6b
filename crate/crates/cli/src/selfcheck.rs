//! Cross-module invariant checks on small built-in instances (n ≤ 200).

use entmap::bench::sample_uniform_cube;
use entmap::sinkhorn::row_marginals;
use entmap::{
    cost_matrix, dual_objective, fit, hungarian, marginal_violation, primal_objective, sinkhorn_solve,
    w2_squared_empirical, Assignment, EntropicMapModel, PointCloud, Result,
};

pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, check: Result<(bool, String)>) -> Outcome {
    match check {
        Ok((passed, detail)) => Outcome { name, passed, detail },
        Err(e) => Outcome { name, passed: false, detail: format!("error: {e}") },
    }
}

fn scaled(n: usize, d: usize, seed: u64, scale: f64, shift: f64) -> Result<PointCloud> {
    let x = sample_uniform_cube(n, d, seed)?;
    PointCloud::from_flat(x.as_flat().iter().map(|v| scale * v + shift).collect(), d)
}

fn instances() -> Result<Vec<(PointCloud, PointCloud, f64)>> {
    let mut out = Vec::new();
    for (k, (n, d, eps)) in [(10, 1, 0.05), (40, 2, 0.2), (60, 3, 1.0), (25, 5, 0.5), (200, 2, 0.1)].into_iter().enumerate() {
        let seed = 1000 + 17 * k as u64;
        out.push((scaled(n, d, seed, 1.0, 0.0)?, scaled(n, d, seed + 1, 1.3, 0.2)?, eps));
    }
    Ok(out)
}

fn duality_and_marginals() -> Result<Vec<Outcome>> {
    let (mut gap, mut viol, mut row_err, mut lower) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let mut converged = true;
    for (x, y, eps) in instances()? {
        let (pot, rep) = sinkhorn_solve(&x, &y, eps, 1e-9, 100_000)?;
        converged &= rep.converged;
        let dual = dual_objective(&pot, &x, &y)?;
        let primal = primal_objective(&pot, &x, &y)?;
        gap = gap.max((primal - dual).abs() / (1.0 + dual.abs()));
        viol = viol.max(marginal_violation(&pot, &x, &y)?);
        row_err = row_marginals(&pot, &x, &y)?.iter().map(|r| (r - 1.0).abs()).fold(row_err, f64::max);
        lower = lower.min(dual - 0.5 * w2_squared_empirical(&x, &y)?);
    }
    Ok(vec![
        Outcome {
            name: "duality_gap",
            passed: converged && gap <= 1e-6,
            detail: format!("max |primal - dual|/(1+|dual|) = {gap:.3e}"),
        },
        Outcome {
            name: "marginal_feasibility",
            passed: viol <= 1e-6 && row_err <= 1e-12,
            detail: format!("max column TV = {viol:.3e}, max row error = {row_err:.3e}"),
        },
        Outcome {
            name: "entropic_lower_bound",
            passed: lower >= 0.0,
            detail: format!("min S_eps - W2^2/2 = {lower:.3e}"),
        },
    ])
}

fn brenier(cost_sign: f64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let eps = 0.1 + 0.2 * seed as f64;
        let x = scaled(20, 2, 2000 + seed, 1.0, 0.0)?;
        let y = scaled(20, 2, 3000 + seed, 1.5, 0.3)?;
        let (model, _) = fit(&x, &y, eps, 1e-8, 10_000)?;
        for q in sample_uniform_cube(10, 2, 4000 + seed)?.iter() {
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = entmap::map::DEFAULT_FD_STEP * (1.0 + norm);
            worst = worst.max(model.brenier_residual_with_cost_sign(q, h, cost_sign)?);
        }
    }
    Ok((worst <= 1e-6, format!("max residual = {worst:.3e} over 50 queries")))
}

fn degenerate_limits(cost_sign: f64) -> Result<(bool, String)> {
    let y = scaled(15, 3, 5000, 2.0, 0.5)?;
    let g: Vec<f64> = (0..15).map(|k| 0.1 * k as f64 - 0.7).collect();
    let model = EntropicMapModel::new(y.clone(), g, 1e9)?;
    let mean = y.mean();
    let mut worst = 0.0f64;
    for q in sample_uniform_cube(10, 3, 5001)?.iter() {
        let out = model.eval_with_cost_sign(q, cost_sign)?;
        worst = out.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok((worst <= 1e-6, format!("eps = 1e9 distance to target mean = {worst:.3e}")))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            go(k - 1, p, out);
            p.swap(if k.is_multiple_of(2) { i } else { 0 }, k - 1);
        }
    }
    let mut out = Vec::new();
    go(n, &mut (0..n).collect(), &mut out);
    out
}

fn hungarian_vs_brute_force() -> Result<(bool, String)> {
    let perms = permutations(6);
    let mut mismatches = 0;
    for seed in 0..20u64 {
        let x = scaled(6, 2, 6000 + seed, 1.0, 0.0)?;
        let y = scaled(6, 2, 7000 + seed, 1.0, 0.0)?;
        let c = cost_matrix(&x, &y)?;
        let best = perms.iter().map(|p| Assignment::evaluate(&c, p)).fold(f64::INFINITY, f64::min);
        if hungarian(&c)?.cost != best {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches}/20 instances differ from 720-permutation search")))
}

fn one_dimensional_sort_oracle() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let x = scaled(50, 1, 8000 + seed, 1.0, 0.0)?;
        let y = scaled(50, 1, 9000 + seed, 2.0, 1.0)?;
        let (mut a, mut b) = (x.as_flat().to_vec(), y.as_flat().to_vec());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let sorted = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / 50.0;
        worst = worst.max((w2_squared_empirical(&x, &y)? - sorted).abs() / sorted);
    }
    Ok((worst <= 1e-12, format!("max relative deviation = {worst:.3e}")))
}

/// Runs every check. `cost_sign = -1` corrupts map evaluation as a negative control.
pub fn run(cost_sign: f64) -> Vec<Outcome> {
    let mut out = duality_and_marginals().unwrap_or_else(|e| {
        vec![Outcome { name: "duality_gap", passed: false, detail: format!("error: {e}") }]
    });
    out.push(outcome("brenier_identity", brenier(cost_sign)));
    out.push(outcome("degenerate_eps_limit", degenerate_limits(cost_sign)));
    out.push(outcome("hungarian_brute_force", hungarian_vs_brute_force()));
    out.push(outcome("one_d_monotone_coupling", one_dimensional_sort_oracle()));
    out
}
