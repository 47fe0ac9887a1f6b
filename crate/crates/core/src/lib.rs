//! Entropic optimal transport map estimation.
//!
//! Given samples `X_1..X_n ~ P` and `Y_1..Y_m ~ Q`, [`map::fit`] runs log-domain
//! Sinkhorn to obtain the target potentials `g` and returns an
//! [`EntropicMapModel`] that evaluates the barycentric projection
//!
//! ```text
//! T(x) = Σ_j Y_j exp((g_j − ½‖x − Y_j‖²)/eps) / Σ_j exp((g_j − ½‖x − Y_j‖²)/eps)
//! ```
//!
//! at any query point. [`baseline`] provides exact assignment (Hungarian) and
//! the 1-nearest-neighbor estimator built on it; [`bench`] runs synthetic
//! experiments comparing the two.
//!
//! ```
//! use entmap::{bench, map, PointCloud};
//!
//! let x = bench::sample_uniform_cube(200, 2, 1).unwrap();
//! let y = bench::make_target(&bench::sample_uniform_cube(200, 2, 2).unwrap(), bench::MapKind::ExpCoordinatewise).unwrap();
//! let eps = bench::epsilon_rule(200, 2, 3.0, 1.0).unwrap();
//! let (model, report) = map::fit(&x, &y, eps, 1e-6, 10_000).unwrap();
//! assert!(report.converged);
//! let t = model.eval(&[0.0, 0.0]).unwrap();
//! assert_eq!(t.len(), 2);
//! ```

pub mod baseline;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod map;
pub mod sinkhorn;

pub use baseline::{hungarian, one_nn_eval, one_nn_fit, w2_squared_empirical, Assignment, OneNNModel};
pub use error::{Error, Result};
pub use geometry::{cost_matrix, half_sq_dist, log_sum_exp, CostMatrix, PointCloud};
pub use map::{fit, EntropicMapModel};
pub use sinkhorn::{
    dual_objective, marginal_violation, plan_density, primal_objective, sinkhorn_solve, DualPotentials,
    SinkhornOptions, SolveReport,
};
