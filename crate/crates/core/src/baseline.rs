//! Exact empirical OT by linear assignment, and the 1-nearest-neighbor map estimator built on it.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, cost_matrix, half_sq_dist_unchecked, CostMatrix, PointCloud};

/// A perfect matching `i -> sigma[i]` and its mean matched cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub sigma: Vec<usize>,
    /// Mean over rows of `C[i][sigma[i]]`.
    pub cost: f64,
}

impl Assignment {
    /// Mean cost of `sigma` recomputed from `c`.
    pub fn evaluate(c: &CostMatrix, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>() / sigma.len() as f64
    }
}

/// Minimum-cost perfect matching on a square matrix.
///
/// Shortest augmenting paths with row/column potentials, one row at a time;
/// `O(n³)`. Ties are broken towards the lowest column index, so an all-equal
/// matrix yields the identity.
pub fn hungarian(c: &CostMatrix) -> Result<Assignment> {
    let n = c.rows();
    if c.cols() != n {
        return Err(invalid(format!("cost matrix must be square, got {}x{}", n, c.cols())));
    }
    if (0..n).any(|i| c.row(i).iter().any(|v| !v.is_finite())) {
        return Err(invalid("cost matrix has non-finite entries"));
    }

    // 1-based bookkeeping; column 0 is the virtual root of each search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let crow = c.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = crow[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[owner[j] - 1] = j - 1;
    }
    let cost = Assignment::evaluate(c, &sigma);
    Ok(Assignment { sigma, cost })
}

fn check_pair(x: &PointCloud, y: &PointCloud) -> Result<()> {
    check_dims(x.dim(), y.dim())?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    Ok(())
}

/// `W₂²(P_n, Q_n) = (1/n) Σ_i ‖X_i − Y_σ(i)‖²` at the optimal matching.
pub fn w2_squared_empirical(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_pair(x, y)?;
    Ok(2.0 * hungarian(&cost_matrix(x, y)?)?.cost)
}

/// 1-NN estimator: snap a query to its nearest source, return that source's matched target.
#[derive(Debug, Clone, PartialEq)]
pub struct OneNNModel {
    sources: PointCloud,
    targets: PointCloud,
    sigma: Vec<usize>,
}

impl OneNNModel {
    pub fn sources(&self) -> &PointCloud {
        &self.sources
    }

    pub fn targets(&self) -> &PointCloud {
        &self.targets
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    /// Index of the nearest source; ties go to the lowest index.
    pub fn nearest_source(&self, x: &[f64]) -> Result<usize> {
        check_dims(self.sources.dim(), x.len())?;
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.sources.iter().enumerate() {
            let d = half_sq_dist_unchecked(x, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let i = self.nearest_source(x)?;
        Ok(self.targets.point(self.sigma[i]).to_vec())
    }

    pub fn eval_batch(&self, queries: &PointCloud) -> Result<PointCloud> {
        check_dims(self.sources.dim(), queries.dim())?;
        let rows: Vec<Vec<f64>> = (0..queries.len())
            .into_par_iter()
            .map(|k| self.eval(queries.point(k)))
            .collect::<Result<_>>()?;
        PointCloud::new(rows)
    }
}

pub fn one_nn_fit(x: &PointCloud, y: &PointCloud) -> Result<OneNNModel> {
    check_pair(x, y)?;
    let assignment = hungarian(&cost_matrix(x, y)?)?;
    Ok(OneNNModel { sources: x.clone(), targets: y.clone(), sigma: assignment.sigma })
}

pub fn one_nn_eval(model: &OneNNModel, x: &[f64]) -> Result<Vec<f64>> {
    model.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn zero_matrix_gives_identity() {
        for n in 1..8 {
            let c = CostMatrix::from_rows(vec![vec![0.0; n]; n]).unwrap();
            let a = hungarian(&c).unwrap();
            assert_eq!(a.sigma, (0..n).collect::<Vec<_>>());
            assert_eq!(a.cost, 0.0);
        }
    }

    #[test]
    fn diagonal_dominates() {
        let c = CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(hungarian(&c).unwrap(), Assignment { sigma: vec![0, 1], cost: 0.0 });
        let c = CostMatrix::from_rows(vec![vec![5.0, 1.0], vec![1.0, 5.0]]).unwrap();
        assert_eq!(hungarian(&c).unwrap(), Assignment { sigma: vec![1, 0], cost: 1.0 });
    }

    #[test]
    fn rejects_bad_matrices() {
        let c = CostMatrix::from_rows(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]]).unwrap();
        assert!(hungarian(&c).is_err());
        let c = CostMatrix::from_rows(vec![vec![0.0, f64::NAN], vec![1.0, 0.0]]).unwrap();
        assert!(hungarian(&c).is_err());
    }

    #[test]
    fn w2_examples() {
        let x = cloud(&[&[0.0, 1.0], &[2.0, 3.0], &[-1.0, 0.5]]);
        assert_eq!(w2_squared_empirical(&x, &x).unwrap(), 0.0);
        assert_eq!(w2_squared_empirical(&cloud(&[&[0.0]]), &cloud(&[&[3.0]])).unwrap(), 9.0);
        assert!(w2_squared_empirical(&x, &cloud(&[&[0.0, 0.0]])).is_err());
    }

    #[test]
    fn one_nn_identity_snaps_to_self() {
        let x = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let model = one_nn_fit(&x, &x).unwrap();
        assert_eq!(model.sigma(), &[0, 1, 2]);
        assert_eq!(one_nn_eval(&model, &[0.9, 0.2]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn one_nn_single_point_is_constant() {
        let model = one_nn_fit(&cloud(&[&[0.0]]), &cloud(&[&[4.0]])).unwrap();
        assert_eq!(model.eval(&[-100.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn one_nn_ties_go_to_lowest_index() {
        let x = cloud(&[&[-1.0], &[1.0]]);
        let y = cloud(&[&[10.0], &[20.0]]);
        let model = one_nn_fit(&x, &y).unwrap();
        let expected = y.point(model.sigma()[0]).to_vec();
        assert_eq!(model.eval(&[0.0]).unwrap(), expected);
        assert_eq!(model.nearest_source(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn one_nn_exact_hit_and_duplicates() {
        let x = cloud(&[&[0.5], &[0.5], &[2.0]]);
        let y = cloud(&[&[1.0], &[3.0], &[5.0]]);
        let model = one_nn_fit(&x, &y).unwrap();
        assert_eq!(model.nearest_source(&[0.5]).unwrap(), 0);
        assert_eq!(model.eval(&[2.0]).unwrap(), y.point(model.sigma()[2]).to_vec());
    }
}
