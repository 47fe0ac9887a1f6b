//! Log-domain Sinkhorn iterations for entropic OT between uniform empirical measures.
//!
//! Starting from `f = 0`, each sweep performs
//!
//! ```text
//! g_j = -eps * log (1/n) Σ_i exp((f_i - C_ij) / eps)
//! f_i = -eps * log (1/m) Σ_j exp((g_j - C_ij) / eps)
//! ```
//!
//! so the row (source) marginal of the plan is exact after every sweep. The
//! stopping metric is the total-variation distance between the column marginal
//! and the uniform weights on the targets.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, cost_matrix_capped, half_sq_dist_unchecked, log_sum_exp_by, CostMatrix, PointCloud};
use crate::geometry::DEFAULT_COST_ENTRY_CAP;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Potentials are rejected once any magnitude exceeds this multiple of `1 + max C`.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Largest marginal violation for which [`primal_objective`] is reported.
const PRIMAL_MAX_VIOLATION: f64 = 1e-3;

/// Dual potentials `f` (on the sources) and `g` (on the targets) at regularization `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: f64,
}

impl DualPotentials {
    pub fn new(f: Vec<f64>, g: Vec<f64>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(invalid("potentials must be finite"));
        }
        Ok(Self { f, g, eps })
    }

    pub fn zeros(n: usize, m: usize, eps: f64) -> Result<Self> {
        Self::new(vec![0.0; n], vec![0.0; m], eps)
    }

    fn check_shape(&self, x: &PointCloud, y: &PointCloud) -> Result<()> {
        check_dims(x.dim(), y.dim())?;
        if self.f.len() != x.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: self.f.len() });
        }
        if self.g.len() != y.len() {
            return Err(Error::LengthMismatch { expected: y.len(), got: self.g.len() });
        }
        Ok(())
    }
}

/// Diagnostics from a [`sinkhorn_solve`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Number of completed sweeps (each ends with an f-update).
    pub iterations: usize,
    /// TV distance between the plan's column marginal and uniform, at exit.
    pub marginal_violation: f64,
    /// Dual objective after each sweep.
    pub dual_trace: Vec<f64>,
    pub converged: bool,
}

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Dense cost matrices are built only when they fit under this many entries.
    pub cost_cap: usize,
}

impl SinkhornOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, cost_cap: DEFAULT_COST_ENTRY_CAP }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn cost_cap(mut self, cap: usize) -> Self {
        self.cost_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("tol must be positive and finite, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

/// Row and column access to `C_ij = ½‖X_i − Y_j‖²`, dense when it fits under the cap.
struct Costs<'a> {
    x: &'a PointCloud,
    y: &'a PointCloud,
    dense: Option<CostMatrix>,
    dense_t: Option<CostMatrix>,
}

impl<'a> Costs<'a> {
    fn new(x: &'a PointCloud, y: &'a PointCloud, cap: usize) -> Self {
        let entries = x.len().saturating_mul(y.len());
        let dense = cost_matrix_capped(x, y, cap).ok();
        // The transpose keeps column sweeps contiguous; it is dropped first under memory pressure.
        let dense_t = match &dense {
            Some(c) if entries.saturating_mul(2) <= cap => Some(c.transpose()),
            _ => None,
        };
        Self { x, y, dense, dense_t }
    }

    /// Costs from source `i` to every target.
    fn source_row(&self, i: usize) -> Cow<'_, [f64]> {
        match &self.dense {
            Some(c) => Cow::Borrowed(c.row(i)),
            None => {
                let xi = self.x.point(i);
                Cow::Owned(self.y.iter().map(|yj| half_sq_dist_unchecked(xi, yj)).collect())
            }
        }
    }

    /// Costs from every source to target `j`.
    fn target_row(&self, j: usize) -> Cow<'_, [f64]> {
        match (&self.dense_t, &self.dense) {
            (Some(ct), _) => Cow::Borrowed(ct.row(j)),
            (None, Some(c)) => Cow::Owned((0..c.rows()).map(|i| c.get(i, j)).collect()),
            (None, None) => {
                let yj = self.y.point(j);
                Cow::Owned(self.x.iter().map(|xi| half_sq_dist_unchecked(xi, yj)).collect())
            }
        }
    }

    fn max(&self) -> f64 {
        match &self.dense {
            Some(c) => c.max(),
            None => (0..self.x.len())
                .into_par_iter()
                .map(|i| self.source_row(i).iter().copied().fold(0.0, f64::max))
                .reduce(|| 0.0, f64::max),
        }
    }
}

/// `-eps * (LSE_k((p_k - c_k)/eps) - ln len)`: the soft-min update of one potential entry.
#[inline]
fn soft_min(potential: &[f64], costs: &[f64], eps: f64) -> f64 {
    let lse = log_sum_exp_by(costs.len(), |k| (potential[k] - costs[k]) / eps);
    -eps * (lse - (costs.len() as f64).ln())
}

/// Below this many cost entries a sweep runs on the calling thread.
const PARALLEL_MIN_ENTRIES: usize = 1 << 14;

/// Applies `row_update` to every index, in parallel when the problem is large enough.
/// Each entry is computed by one thread, so results do not depend on the schedule.
fn map_rows(len: usize, entries: usize, row_update: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    if entries < PARALLEL_MIN_ENTRIES {
        (0..len).map(row_update).collect()
    } else {
        (0..len).into_par_iter().map(row_update).collect()
    }
}

fn update_g(costs: &Costs<'_>, f: &[f64], m: usize, eps: f64) -> Vec<f64> {
    map_rows(m, f.len() * m, |j| soft_min(f, &costs.target_row(j), eps))
}

fn update_f(costs: &Costs<'_>, g: &[f64], n: usize, eps: f64) -> Vec<f64> {
    map_rows(n, g.len() * n, |i| soft_min(g, &costs.source_row(i), eps))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs Sinkhorn with the default cost cap.
pub fn sinkhorn_solve(
    x: &PointCloud,
    y: &PointCloud,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DualPotentials, SolveReport)> {
    sinkhorn_solve_with(x, y, &SinkhornOptions::new(eps).tol(tol).max_iter(max_iter))
}

/// Log-domain Sinkhorn between the uniform measures on `x` and `y`.
///
/// Stops once the column-marginal TV violation is at most `tol` or after
/// `max_iter` sweeps. The returned potentials come from the last completed
/// sweep (so rows are exact) and are shifted so that `mean(f) = 0`.
pub fn sinkhorn_solve_with(
    x: &PointCloud,
    y: &PointCloud,
    opts: &SinkhornOptions,
) -> Result<(DualPotentials, SolveReport)> {
    opts.validate()?;
    check_dims(x.dim(), y.dim())?;
    let (n, m, eps) = (x.len(), y.len(), opts.eps);
    let costs = Costs::new(x, y, opts.cost_cap);
    let bound = DIVERGENCE_FACTOR * (1.0 + costs.max());
    let check = |v: &[f64], which: &str, iteration: usize| -> Result<()> {
        match v.iter().find(|p| !p.is_finite() || p.abs() > bound) {
            Some(p) => Err(Error::NumericalFailure {
                iteration,
                detail: format!("{which}-potential reached {p} (bound {bound:e}); eps too small?"),
            }),
            None => Ok(()),
        }
    };

    let mut f = vec![0.0; n];
    let mut g = update_g(&costs, &f, m, eps);
    check(&g, "g", 1)?;
    let mut dual_trace = Vec::new();
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        f = update_f(&costs, &g, n, eps);
        iterations += 1;
        check(&f, "f", iterations)?;

        // The next g-update yields the current column masses for free:
        // (1/n) Σ_i exp((f_i + g_j - C_ij)/eps) = exp((g_j - g_next_j)/eps).
        let g_next = update_g(&costs, &f, m, eps);
        check(&g_next, "g", iterations + 1)?;
        let (mut mass, mut tv) = (0.0, 0.0);
        for (gj, gn) in g.iter().zip(&g_next) {
            let col = ((gj - gn) / eps).exp();
            mass += col;
            tv += (col - 1.0).abs();
        }
        mass /= m as f64;
        violation = 0.5 * tv / m as f64;
        dual_trace.push(mean(&f) + mean(&g) - eps * mass + eps);
        if !violation.is_finite() {
            return Err(Error::NumericalFailure { iteration: iterations, detail: "non-finite marginal violation".into() });
        }
        if violation <= opts.tol {
            break;
        }
        if iterations < opts.max_iter {
            g = g_next;
        }
    }

    let shift = mean(&f);
    f.iter_mut().for_each(|v| *v -= shift);
    g.iter_mut().for_each(|v| *v += shift);
    let report = SolveReport { iterations, marginal_violation: violation, dual_trace, converged: violation <= opts.tol };
    Ok((DualPotentials { f, g, eps }, report))
}

/// Plan density `exp((f_i + g_j − C_ij)/eps)` with respect to the product of the marginals.
pub fn plan_density(pot: &DualPotentials, i: usize, j: usize, cost_ij: f64) -> Result<f64> {
    let (fi, gj) = match (pot.f.get(i), pot.g.get(j)) {
        (Some(fi), Some(gj)) => (fi, gj),
        _ => {
            return Err(invalid(format!(
                "index ({i}, {j}) out of range for {}x{} potentials",
                pot.f.len(),
                pot.g.len()
            )))
        }
    };
    Ok(((fi + gj - cost_ij) / pot.eps).exp())
}

#[inline]
fn density(pot: &DualPotentials, i: usize, j: usize, c: f64) -> f64 {
    ((pot.f[i] + pot.g[j] - c) / pot.eps).exp()
}

/// `(1/m) Σ_j plan_density(i, j)` for each source `i`.
pub fn row_marginals(pot: &DualPotentials, x: &PointCloud, y: &PointCloud) -> Result<Vec<f64>> {
    pot.check_shape(x, y)?;
    let m = y.len() as f64;
    Ok((0..x.len())
        .into_par_iter()
        .map(|i| {
            let xi = x.point(i);
            y.iter().enumerate().map(|(j, yj)| density(pot, i, j, half_sq_dist_unchecked(xi, yj))).sum::<f64>() / m
        })
        .collect())
}

/// `(1/n) Σ_i plan_density(i, j)` for each target `j`.
pub fn column_marginals(pot: &DualPotentials, x: &PointCloud, y: &PointCloud) -> Result<Vec<f64>> {
    pot.check_shape(x, y)?;
    let n = x.len() as f64;
    Ok((0..y.len())
        .into_par_iter()
        .map(|j| {
            let yj = y.point(j);
            x.iter().enumerate().map(|(i, xi)| density(pot, i, j, half_sq_dist_unchecked(xi, yj))).sum::<f64>() / n
        })
        .collect())
}

/// Total-variation distance between the plan's column marginal and the uniform weights.
pub fn marginal_violation(pot: &DualPotentials, x: &PointCloud, y: &PointCloud) -> Result<f64> {
    let cols = column_marginals(pot, x, y)?;
    Ok(0.5 * cols.iter().map(|c| (c - 1.0).abs()).sum::<f64>() / cols.len() as f64)
}

/// Entropic dual `mean f + mean g − eps·mean_ij exp((f_i+g_j−C_ij)/eps) + eps`.
pub fn dual_objective(pot: &DualPotentials, x: &PointCloud, y: &PointCloud) -> Result<f64> {
    let rows = row_marginals(pot, x, y)?;
    Ok(mean(&pot.f) + mean(&pot.g) - pot.eps * mean(&rows) + pot.eps)
}

/// Entropic primal `⟨C, π⟩ + eps·KL(π ‖ P_n ⊗ Q_n)` of the plan induced by `pot`.
///
/// Only defined when the plan is close to a coupling (marginal violation ≤ 1e-3).
pub fn primal_objective(pot: &DualPotentials, x: &PointCloud, y: &PointCloud) -> Result<f64> {
    let violation = marginal_violation(pot, x, y)?;
    if violation.is_nan() || violation > PRIMAL_MAX_VIOLATION {
        return Err(Error::InvalidState(format!(
            "marginal violation {violation:e} exceeds {PRIMAL_MAX_VIOLATION:e}; potentials are not near-optimal"
        )));
    }
    let nm = (x.len() * y.len()) as f64;
    let per_row: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let xi = x.point(i);
            let mut acc = 0.0;
            for (j, yj) in y.iter().enumerate() {
                let c = half_sq_dist_unchecked(xi, yj);
                let log_density = (pot.f[i] + pot.g[j] - c) / pot.eps;
                let pi = log_density.exp() / nm;
                acc += pi * c + pot.eps * pi * log_density;
            }
            acc
        })
        .collect();
    Ok(per_row.iter().sum())
}
