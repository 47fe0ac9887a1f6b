//! The entropic map: barycentric projection of the entropic plan, extended out of sample.
//!
//! For a query `x` the map returns `Σ_j w_j(x) Y_j` with softmax weights
//! `w_j(x) ∝ exp((g_j − ½‖x − Y_j‖²)/eps)`. It is the gradient map
//! `x − ∇f(x)` of the out-of-sample potential
//! `f(x) = −eps·log (1/m) Σ_j exp((g_j − ½‖x − Y_j‖²)/eps)`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, half_sq_dist_unchecked, log_sum_exp_by, PointCloud};
use crate::sinkhorn::{sinkhorn_solve_with, SinkhornOptions, SolveReport};

/// Relative finite-difference step used by [`brenier_residual_default`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Everything needed to evaluate the entropic map: targets, their potentials and `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicMapModel {
    targets: PointCloud,
    gvals: Vec<f64>,
    eps: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    eps: f64,
    d: usize,
    targets: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl EntropicMapModel {
    pub fn new(targets: PointCloud, gvals: Vec<f64>, eps: f64) -> Result<Self> {
        if gvals.len() != targets.len() {
            return Err(Error::LengthMismatch { expected: targets.len(), got: gvals.len() });
        }
        if gvals.iter().any(|g| !g.is_finite()) {
            return Err(invalid("target potentials must be finite"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("eps must be positive and finite, got {eps}")));
        }
        Ok(Self { targets, gvals, eps })
    }

    pub fn targets(&self) -> &PointCloud {
        &self.targets
    }

    pub fn gvals(&self) -> &[f64] {
        &self.gvals
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.targets.dim()
    }

    /// `(g_j − sign·½‖x − Y_j‖²)/eps` for every target. `sign` is +1 for the real map.
    fn logits(&self, x: &[f64], cost_sign: f64) -> Result<Vec<f64>> {
        check_dims(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("query point must be finite"));
        }
        let logits: Vec<f64> = self
            .targets
            .iter()
            .zip(&self.gvals)
            .map(|(y, g)| (g - cost_sign * half_sq_dist_unchecked(x, y)) / self.eps)
            .collect();
        if let Some(l) = logits.iter().find(|l| !l.is_finite()) {
            return Err(Error::NumericalFailure { iteration: 0, detail: format!("non-finite logit {l}") });
        }
        Ok(logits)
    }

    /// Softmax weights over the targets at `x`; they sum to one.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.weights_with_cost_sign(x, 1.0)
    }

    fn weights_with_cost_sign(&self, x: &[f64], cost_sign: f64) -> Result<Vec<f64>> {
        let logits = self.logits(x, cost_sign)?;
        let lse = log_sum_exp_by(logits.len(), |j| logits[j]);
        Ok(logits.iter().map(|l| (l - lse).exp()).collect())
    }

    /// The entropic map at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_with_cost_sign(x, 1.0)
    }

    /// Map evaluation with the cost term multiplied by `cost_sign`; only `+1` is the real map.
    /// Exists so invariant checks can be run against a deliberately broken evaluator.
    #[doc(hidden)]
    pub fn eval_with_cost_sign(&self, x: &[f64], cost_sign: f64) -> Result<Vec<f64>> {
        let w = self.weights_with_cost_sign(x, cost_sign)?;
        let mut out = vec![0.0; self.dim()];
        for (wj, y) in w.iter().zip(self.targets.iter()) {
            for (o, v) in out.iter_mut().zip(y) {
                *o += wj * v;
            }
        }
        Ok(out)
    }

    /// Evaluates every query in parallel; output order matches input order.
    pub fn eval_batch(&self, queries: &PointCloud) -> Result<PointCloud> {
        check_dims(self.dim(), queries.dim())?;
        let rows: Vec<Vec<f64>> = (0..queries.len())
            .into_par_iter()
            .map(|k| self.eval(queries.point(k)))
            .collect::<Result<_>>()?;
        PointCloud::new(rows)
    }

    /// Out-of-sample source potential `f(x) = −eps·log (1/m) Σ_j exp((g_j − ½‖x − Y_j‖²)/eps)`.
    pub fn f_potential(&self, x: &[f64]) -> Result<f64> {
        let logits = self.logits(x, 1.0)?;
        let lse = log_sum_exp_by(logits.len(), |j| logits[j]);
        Ok(-self.eps * (lse - (logits.len() as f64).ln()))
    }

    /// `‖T(x) − (x − ∇f(x))‖` with `∇f` from central differences of step `h`.
    pub fn brenier_residual(&self, x: &[f64], h: f64) -> Result<f64> {
        self.brenier_residual_with_cost_sign(x, h, 1.0)
    }

    #[doc(hidden)]
    pub fn brenier_residual_with_cost_sign(&self, x: &[f64], h: f64, cost_sign: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {h}")));
        }
        let mapped = self.eval_with_cost_sign(x, cost_sign)?;
        let mut probe = x.to_vec();
        let mut sq = 0.0;
        for k in 0..x.len() {
            probe[k] = x[k] + h;
            let up = self.f_potential(&probe)?;
            probe[k] = x[k] - h;
            let down = self.f_potential(&probe)?;
            probe[k] = x[k];
            let grad = (up - down) / (2.0 * h);
            let r = mapped[k] - (x[k] - grad);
            sq += r * r;
        }
        Ok(sq.sqrt())
    }

    /// [`Self::brenier_residual`] with step `1e-5·(1 + ‖x‖)`.
    pub fn brenier_residual_default(&self, x: &[f64]) -> Result<f64> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.brenier_residual(x, DEFAULT_FD_STEP * (1.0 + norm))
    }

    /// Writes `{"eps", "d", "targets", "g"}` JSON.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let file = ModelFile { eps: self.eps, d: self.dim(), targets: self.targets.to_rows(), g: self.gvals.clone() };
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        let targets = PointCloud::new(file.targets)?;
        check_dims(file.d, targets.dim())?;
        Self::new(targets, file.g, file.eps)
    }
}

/// Solves for the target potentials and packages them as a map.
pub fn fit(
    x: &PointCloud,
    y: &PointCloud,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(EntropicMapModel, SolveReport)> {
    fit_with(x, y, &SinkhornOptions::new(eps).tol(tol).max_iter(max_iter))
}

pub fn fit_with(x: &PointCloud, y: &PointCloud, opts: &SinkhornOptions) -> Result<(EntropicMapModel, SolveReport)> {
    let (pot, report) = sinkhorn_solve_with(x, y, opts)?;
    Ok((EntropicMapModel::new(y.clone(), pot.g, pot.eps)?, report))
}
