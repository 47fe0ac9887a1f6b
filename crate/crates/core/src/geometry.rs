//! Point clouds, the half-squared-Euclidean cost and stable log-sum-exp.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Default ceiling on the number of entries a dense cost matrix may hold.
pub const DEFAULT_COST_ENTRY_CAP: usize = 100_000_000;

/// `n` points in `R^d`, stored row-major. Uniform weights are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    /// Builds a cloud from row vectors, rejecting empty input, ragged rows and non-finite values.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(invalid("point cloud must contain at least one point"));
        }
        let d = points[0].len();
        let mut data = Vec::with_capacity(n * d);
        for (i, p) in points.into_iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            if let Some(j) = p.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite coordinate at point {i}, axis {j}")));
            }
            data.extend(p);
        }
        Self::from_flat(data, d)
    }

    /// Builds a cloud from a row-major buffer of `n * d` coordinates.
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(invalid(format!(
                "buffer of length {} is not a nonempty multiple of d = {d}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite coordinate at point {}, axis {}", k / d, k % d)));
        }
        let n = data.len() / d;
        Ok(Self { data, n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Coordinate-wise mean of the points.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for p in self.iter() {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.n as f64);
        acc
    }

    /// Every point shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        check_dims(self.d, offset.len())?;
        let data = self
            .data
            .chunks_exact(self.d)
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Self::from_flat(data, self.d)
    }

    /// Reads a cloud from CSV. Fails on an empty file.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_points_csv(std::fs::File::open(path)?)?;
        if rows.is_empty() {
            return Err(invalid(format!("{} contains no points", path.display())));
        }
        Self::new(rows)
    }
}

#[inline]
pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `½‖x − y‖²` with no shape check. Callers guarantee equal lengths.
#[inline]
pub(crate) fn half_sq_dist_unchecked(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Half squared Euclidean distance `½ Σ_j (x_j − y_j)²`.
pub fn half_sq_dist(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite coordinate"));
    }
    Ok(half_sq_dist_unchecked(x, y))
}

/// Dense row-major `rows × cols` matrix of transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(invalid("cost matrix must be nonempty"));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dims(c, row.len())?;
            data.extend(row);
        }
        Ok(Self { data, rows: r, cols: c })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self { data, rows: self.cols, cols: self.rows }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// `C_ij = ½‖X_i − Y_j‖²`, materialized if `n·m` fits under [`DEFAULT_COST_ENTRY_CAP`].
pub fn cost_matrix(x: &PointCloud, y: &PointCloud) -> Result<CostMatrix> {
    cost_matrix_capped(x, y, DEFAULT_COST_ENTRY_CAP)
}

/// As [`cost_matrix`] with an explicit entry cap.
pub fn cost_matrix_capped(x: &PointCloud, y: &PointCloud, cap: usize) -> Result<CostMatrix> {
    check_dims(x.dim(), y.dim())?;
    let (n, m) = (x.len(), y.len());
    let entries = n
        .checked_mul(m)
        .filter(|&e| e <= cap)
        .ok_or_else(|| Error::Resource(format!("{n}x{m} cost matrix exceeds cap of {cap} entries")))?;
    let mut data = vec![0.0; entries];
    data.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let xi = x.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = half_sq_dist_unchecked(xi, y.point(j));
        }
    });
    Ok(CostMatrix { data, rows: n, cols: m })
}

/// `log Σ_i exp(v_i)` with the max subtracted before exponentiation.
///
/// Entries may be `-inf`; if all of them are, the result is `-inf`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(invalid("log_sum_exp of an empty vector"));
    }
    if v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(invalid("log_sum_exp input contains NaN or +inf"));
    }
    Ok(log_sum_exp_by(v.len(), |i| v[i]))
}

/// Two-pass stable log-sum-exp over `f(0..len)`. No input validation.
#[inline]
pub(crate) fn log_sum_exp_by(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        max = max.max(f(i));
    }
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let mut s = 0.0;
    for i in 0..len {
        s += (f(i) - max).exp();
    }
    max + s.ln()
}

/// Parses CSV points: `d` numeric fields per row, optional header.
///
/// The first row is treated as a header when any of its fields fails to parse
/// as a number. Any later non-numeric or ragged row is an error naming its line.
/// An empty input yields no rows.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => return Err(Error::Parse { line, msg: format!("non-numeric field: {e}") }),
        };
        first = false;
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: format!("non-finite value {v}") });
        }
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", prev.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes one point per line using shortest round-trip float formatting.
pub fn write_points_csv<'a, W: Write>(mut w: W, points: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
    for p in points {
        let line: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn half_sq_dist_examples() {
        assert_eq!(half_sq_dist(&[1.7, -0.3], &[1.7, -0.3]).unwrap(), 0.0);
        assert_eq!(half_sq_dist(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(half_sq_dist(&[1.0], &[-1.0]).unwrap(), 2.0);
        assert!(matches!(half_sq_dist(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cost_matrix_examples() {
        let single = cloud(&[&[0.3, 0.1]]);
        assert_eq!(cost_matrix(&single, &single).unwrap().row(0), &[0.0]);

        let x = cloud(&[&[0.0], &[1.0]]);
        let c = cost_matrix(&x, &x).unwrap();
        assert_eq!(c, CostMatrix::from_rows(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap());

        let y = cloud(&[&[0.0, 1.0]]);
        assert!(matches!(cost_matrix(&x, &y), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cost_matrix_cap_is_enforced() {
        let x = cloud(&[&[0.0], &[1.0], &[2.0]]);
        assert!(matches!(cost_matrix_capped(&x, &x, 8), Err(Error::Resource(_))));
        assert!(cost_matrix_capped(&x, &x, 9).is_ok());
    }

    #[test]
    fn log_sum_exp_examples() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[-3.25]).unwrap(), -3.25);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[f64::NEG_INFINITY, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(log_sum_exp(&[]).is_err());
        assert!(log_sum_exp(&[f64::NAN]).is_err());
        assert!(log_sum_exp(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![vec![]]).is_err());
        assert!(PointCloud::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PointCloud::new(vec![vec![f64::NAN]]).is_err());
        assert!(PointCloud::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn csv_header_detection_and_errors() {
        let rows = read_points_csv("x,y\n1,2\n3.5,-4e-1\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.5, -0.4]]);
        let rows = read_points_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(read_points_csv("".as_bytes()).unwrap().is_empty());
        match read_points_csv("1,2\n3,oops\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match read_points_csv("a,b\n1,2\n3\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_points_csv("1,nan\n".as_bytes()).is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        -1e3..1e3f64
    }

    proptest! {
        #[test]
        fn half_sq_dist_scales_quadratically(
            (x, y) in (1usize..6).prop_flat_map(|d| (prop::collection::vec(finite(), d), prop::collection::vec(finite(), d))),
            a in -10.0..10.0f64,
        ) {
            let base = half_sq_dist(&x, &y).unwrap();
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            let ay: Vec<f64> = y.iter().map(|v| a * v).collect();
            let scaled = half_sq_dist(&ax, &ay).unwrap();
            prop_assert!((scaled - a * a * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
            prop_assert_eq!(half_sq_dist(&x, &y).unwrap(), half_sq_dist(&y, &x).unwrap());
        }

        #[test]
        fn cost_matrix_transpose_symmetry(
            xs in prop::collection::vec(prop::collection::vec(finite(), 2), 1..6),
            ys in prop::collection::vec(prop::collection::vec(finite(), 2), 1..6),
        ) {
            let x = PointCloud::new(xs).unwrap();
            let y = PointCloud::new(ys).unwrap();
            let cxy = cost_matrix(&x, &y).unwrap();
            prop_assert_eq!(cxy.transpose(), cost_matrix(&y, &x).unwrap());
        }

        #[test]
        fn log_sum_exp_shift_and_bounds(v in prop::collection::vec(-50.0..50.0f64, 1..20), c in -500.0..500.0f64) {
            let base = log_sum_exp(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let s = log_sum_exp(&shifted).unwrap();
            prop_assert!((s - (base + c)).abs() <= 1e-12 * (1.0 + (base + c).abs()));
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(base >= max);
            prop_assert!(base <= max + (v.len() as f64).ln() + 1e-12);
            let mut rev = v.clone();
            rev.reverse();
            prop_assert!((log_sum_exp(&rev).unwrap() - base).abs() <= 1e-12 * (1.0 + base.abs()));
        }
    }
}
