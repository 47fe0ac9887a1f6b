//! Synthetic benchmark harness.
//!
//! Sources are uniform on `[-1, 1]^d`; targets are a second, independent
//! uniform sample pushed through a coordinate-wise monotone map. Estimators
//! are scored by Monte-Carlo MSE against the true map on fresh test points.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{one_nn_fit, OneNNModel};
use crate::error::{invalid, Error, Result};
use crate::geometry::{fmt_f64, PointCloud};
use crate::map::{fit_with, EntropicMapModel};
use crate::sinkhorn::{SinkhornOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const DEFAULT_MC_SAMPLES: usize = 10_000;
pub const DEFAULT_ALPHA_BAR: f64 = 3.0;
pub const DEFAULT_EPS_CONSTANT: f64 = 1.0;

/// Header of the per-repeat results CSV.
pub const RESULTS_HEADER: &str = "estimator,d,n,eps,repeat,mse,runtime_ms,iters,seed,status";

/// Coordinate-wise monotone ground-truth maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MapKind {
    ExpCoordinatewise,
    CubicSigned,
    Identity,
    Affine { scale: f64, shift: f64 },
}

impl MapKind {
    #[inline]
    fn apply_scalar(self, t: f64) -> f64 {
        match self {
            MapKind::ExpCoordinatewise => t.exp(),
            MapKind::CubicSigned => 3.0 * t * t * t.signum(),
            MapKind::Identity => t,
            MapKind::Affine { scale, shift } => scale * t + shift,
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::ExpCoordinatewise => f.write_str("exp"),
            MapKind::CubicSigned => f.write_str("cubic"),
            MapKind::Identity => f.write_str("identity"),
            MapKind::Affine { scale, shift } => write!(f, "affine:{}:{}", fmt_f64(*scale), fmt_f64(*shift)),
        }
    }
}

impl FromStr for MapKind {
    type Err = Error;

    /// Accepts `exp`, `cubic`, `identity`, or `affine:<scale>:<shift>` with `scale > 0`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exp" => Ok(MapKind::ExpCoordinatewise),
            "cubic" => Ok(MapKind::CubicSigned),
            "identity" => Ok(MapKind::Identity),
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["affine", scale, shift] => {
                        let scale: f64 = scale.parse().map_err(|_| invalid(format!("bad affine scale in {other:?}")))?;
                        let shift: f64 = shift.parse().map_err(|_| invalid(format!("bad affine shift in {other:?}")))?;
                        // A non-increasing affine map is not the gradient of a convex potential.
                        if !(scale > 0.0 && scale.is_finite() && shift.is_finite()) {
                            return Err(invalid(format!("affine map needs finite scale > 0, got {other:?}")));
                        }
                        Ok(MapKind::Affine { scale, shift })
                    }
                    _ => Err(invalid(format!("unknown map kind {other:?}"))),
                }
            }
        }
    }
}

impl TryFrom<String> for MapKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MapKind> for String {
    fn from(k: MapKind) -> Self {
        k.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Entropic,
    #[serde(rename = "onenn")]
    OneNN,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Entropic => "entropic",
            Estimator::OneNN => "onenn",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "entropic" => Ok(Estimator::Entropic),
            "onenn" | "1nn" => Ok(Estimator::OneNN),
            other => Err(invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// How the regularization is chosen for the entropic estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EpsRule {
    /// `c · n^{-1/(d' + alpha_bar + 1)}` with `d' = 2⌈d/2⌉`.
    Auto { alpha_bar: f64, c: f64 },
    Fixed(f64),
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::Auto { alpha_bar: DEFAULT_ALPHA_BAR, c: DEFAULT_EPS_CONSTANT }
    }
}

impl EpsRule {
    pub fn eps(&self, n: usize, d: usize) -> Result<f64> {
        match *self {
            EpsRule::Auto { alpha_bar, c } => epsilon_rule(n, d, alpha_bar, c),
            EpsRule::Fixed(v) if v > 0.0 && v.is_finite() => Ok(v),
            EpsRule::Fixed(v) => Err(invalid(format!("fixed eps must be positive and finite, got {v}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        self.eps(2, 1).map(|_| ())
    }
}

impl fmt::Display for EpsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsRule::Auto { alpha_bar, c } => write!(f, "auto:{}:{}", fmt_f64(*alpha_bar), fmt_f64(*c)),
            EpsRule::Fixed(v) => write!(f, "fixed:{}", fmt_f64(*v)),
        }
    }
}

impl FromStr for EpsRule {
    type Err = Error;

    /// `auto:<alpha_bar>:<c>`, `auto` (defaults), `fixed:<eps>` or a bare number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number {t:?} in eps rule {s:?}")));
        let parts: Vec<&str> = s.split(':').collect();
        let rule = match parts.as_slice() {
            ["auto"] => EpsRule::default(),
            ["auto", a, c] => EpsRule::Auto { alpha_bar: num(a)?, c: num(c)? },
            ["fixed", v] => EpsRule::Fixed(num(v)?),
            [v] => EpsRule::Fixed(num(v)?),
            _ => return Err(invalid(format!("unrecognized eps rule {s:?}"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl TryFrom<String> for EpsRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EpsRule> for String {
    fn from(r: EpsRule) -> Self {
        r.to_string()
    }
}

/// `d' = 2⌈d/2⌉`.
pub fn effective_dim(d: usize) -> usize {
    2 * d.div_ceil(2)
}

/// `c · n^{-1/(d' + alpha_bar + 1)}`.
pub fn epsilon_rule(n: usize, d: usize, alpha_bar: f64, c: f64) -> Result<f64> {
    if !(alpha_bar > 1.0 && alpha_bar <= 3.0) {
        return Err(invalid(format!("alpha_bar must lie in (1, 3], got {alpha_bar}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("eps constant must be positive, got {c}")));
    }
    if n < 2 || d < 1 {
        return Err(invalid(format!("epsilon rule needs n >= 2 and d >= 1, got n = {n}, d = {d}")));
    }
    let exponent = -1.0 / (effective_dim(d) as f64 + alpha_bar + 1.0);
    Ok(c * (n as f64).powf(exponent))
}

/// SplitMix64 finalizer; derives decorrelated seeds for the independent sample streams.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` i.i.d. uniform points on `[-1, 1]^d`, bit-reproducible for a given seed.
pub fn sample_uniform_cube(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 || d == 0 {
        return Err(invalid(format!("need n >= 1 and d >= 1, got n = {n}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unif = Uniform::new_inclusive(-1.0, 1.0);
    let data: Vec<f64> = (0..n * d).map(|_| unif.sample(&mut rng)).collect();
    PointCloud::from_flat(data, d)
}

/// Applies the scalar map of `kind` to each coordinate.
pub fn ground_truth_map(kind: MapKind, x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("ground-truth map needs a finite point"));
    }
    Ok(x.iter().map(|&t| kind.apply_scalar(t)).collect())
}

/// Pushes every point through the ground-truth map, preserving order.
pub fn make_target(x: &PointCloud, kind: MapKind) -> Result<PointCloud> {
    let data: Vec<f64> = x.as_flat().iter().map(|&t| kind.apply_scalar(t)).collect();
    PointCloud::from_flat(data, x.dim())
}

/// `(1/m) Σ ‖estimate(x_k) − truth(x_k)‖²` over `m` seeded uniform points on `[-1, 1]^d`.
pub fn mse_monte_carlo<E, T>(estimate: E, truth: T, d: usize, m: usize, seed: u64) -> Result<f64>
where
    E: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    T: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if m == 0 {
        return Err(invalid("Monte-Carlo sample count must be at least 1"));
    }
    let pts = sample_uniform_cube(m, d, seed)?;
    let errs: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let x = pts.point(k);
            let (a, b) = (estimate(x)?, truth(x)?);
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
            }
            Ok(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum())
        })
        .collect::<Result<_>>()?;
    // Sequential sum keeps the result independent of the thread count.
    Ok(errs.iter().sum::<f64>() / m as f64)
}

/// One benchmark cell: a data setting, an estimator and the run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: usize,
    pub map_kind: MapKind,
    pub estimator: Estimator,
    pub eps_rule: EpsRule,
    pub seed: u64,
    pub mc_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn new(d: usize, n: usize, map_kind: MapKind, estimator: Estimator) -> Self {
        Self {
            d,
            n,
            map_kind,
            estimator,
            eps_rule: EpsRule::default(),
            seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            repeats: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d < 1 || self.mc_samples < 1 || self.repeats < 1 {
            return Err(invalid("d, mc_samples and repeats must all be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iter == 0 {
            return Err(invalid("tol must be positive and max_iter at least 1"));
        }
        self.eps_rule.validate()
    }

    /// Regularization used by this cell; 0 for the 1-NN estimator.
    pub fn eps(&self) -> Result<f64> {
        match self.estimator {
            Estimator::Entropic => self.eps_rule.eps(self.n, self.d),
            Estimator::OneNN => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Sinkhorn stopped at `max_iter`; the finite-iteration map was still scored.
    Unconverged,
    Failed(String),
}

impl RunStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, RunStatus::Failed(_))
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Unconverged => f.write_str("unconverged"),
            RunStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

/// One repeat of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub estimator: Estimator,
    pub map_kind: MapKind,
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub repeat: usize,
    /// NaN for failed runs.
    pub mse: f64,
    pub runtime_ms: f64,
    pub sinkhorn_iters: usize,
    /// Per-repeat seed `config.seed ^ repeat`.
    pub seed: u64,
    pub status: RunStatus,
}

enum Fitted {
    Entropic(EntropicMapModel),
    OneNN(OneNNModel),
}

impl Fitted {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Fitted::Entropic(m) => m.eval(x),
            Fitted::OneNN(m) => m.eval(x),
        }
    }
}

fn run_repeat(cfg: &ExperimentConfig, eps: f64, repeat: usize) -> ExperimentResult {
    let seed = cfg.seed ^ repeat as u64;
    let mut row = ExperimentResult {
        estimator: cfg.estimator,
        map_kind: cfg.map_kind,
        n: cfg.n,
        d: cfg.d,
        eps,
        repeat,
        mse: f64::NAN,
        runtime_ms: 0.0,
        sinkhorn_iters: 0,
        seed,
        status: RunStatus::Ok,
    };
    let outcome = (|| -> Result<(f64, f64, usize, bool)> {
        let x = sample_uniform_cube(cfg.n, cfg.d, derive_seed(seed, 1))?;
        let y = make_target(&sample_uniform_cube(cfg.n, cfg.d, derive_seed(seed, 2))?, cfg.map_kind)?;
        let start = Instant::now();
        let (fitted, iters, converged) = match cfg.estimator {
            Estimator::Entropic => {
                let opts = SinkhornOptions::new(eps).tol(cfg.tol).max_iter(cfg.max_iter);
                let (model, report) = fit_with(&x, &y, &opts)?;
                (Fitted::Entropic(model), report.iterations, report.converged)
            }
            Estimator::OneNN => (Fitted::OneNN(one_nn_fit(&x, &y)?), 0, true),
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let kind = cfg.map_kind;
        let mse = mse_monte_carlo(
            |q| fitted.eval(q),
            |q| ground_truth_map(kind, q),
            cfg.d,
            cfg.mc_samples,
            derive_seed(seed, 3),
        )?;
        Ok((mse, runtime_ms, iters, converged))
    })();
    match outcome {
        Ok((mse, runtime_ms, iters, converged)) => {
            row.mse = mse;
            row.runtime_ms = runtime_ms;
            row.sinkhorn_iters = iters;
            if !converged {
                row.status = RunStatus::Unconverged;
            }
        }
        Err(e) => row.status = RunStatus::Failed(e.to_string()),
    }
    row
}

/// Runs every repeat of one cell. Solver failures become `Failed` rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let eps = cfg.eps()?;
    Ok((0..cfg.repeats).map(|r| run_repeat(cfg, eps, r)).collect())
}

/// Per-cell aggregate over repeats (failed repeats excluded from the statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: Estimator,
    pub map_kind: MapKind,
    pub d: usize,
    pub n: usize,
    pub eps: f64,
    pub repeats: usize,
    pub failures: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub mean_runtime_ms: f64,
    pub std_runtime_ms: f64,
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for a single value).
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[ExperimentResult]) -> CellSummary {
    let ok: Vec<&ExperimentResult> = rows.iter().filter(|r| !r.status.is_failed()).collect();
    let (mean_mse, std_mse) = mean_std(&ok.iter().map(|r| r.mse).collect::<Vec<_>>());
    let (mean_runtime_ms, std_runtime_ms) = mean_std(&ok.iter().map(|r| r.runtime_ms).collect::<Vec<_>>());
    CellSummary {
        estimator: cfg.estimator,
        map_kind: cfg.map_kind,
        d: cfg.d,
        n: cfg.n,
        eps: rows.first().map_or(0.0, |r| r.eps),
        repeats: rows.len(),
        failures: rows.len() - ok.len(),
        mean_mse,
        std_mse,
        mean_runtime_ms,
        std_runtime_ms,
    }
}

/// Every row of a grid sweep plus one summary per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub rows: Vec<ExperimentResult>,
    pub cells: Vec<CellSummary>,
}

impl GridReport {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.status.is_failed())
    }

    /// Per-repeat CSV with [`RESULTS_HEADER`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(RESULTS_HEADER.split(','))?;
        for r in &self.rows {
            wtr.write_record([
                r.estimator.to_string(),
                r.d.to_string(),
                r.n.to_string(),
                fmt_f64(r.eps),
                r.repeat.to_string(),
                fmt_f64(r.mse),
                fmt_f64(r.runtime_ms),
                r.sinkhorn_iters.to_string(),
                r.seed.to_string(),
                r.status.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON array of [`CellSummary`].
    pub fn write_summary_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.cells)?;
        Ok(())
    }
}

/// Cartesian sweep of `estimators × ds × ns × kinds` sharing the controls of `base`.
///
/// Cells run concurrently on a pool of `workers` threads. Rows come back sorted
/// by `(estimator, d, n)`, then by kind order and repeat; the output does not
/// depend on `workers` except for `runtime_ms`.
pub fn compare_grid(
    ns: &[usize],
    ds: &[usize],
    kinds: &[MapKind],
    estimators: &[Estimator],
    base: &ExperimentConfig,
    workers: usize,
) -> Result<GridReport> {
    if ns.is_empty() || ds.is_empty() || kinds.is_empty() || estimators.is_empty() {
        return Err(invalid("every grid axis needs at least one value"));
    }
    let mut cells = Vec::new();
    for &estimator in estimators {
        for &d in ds {
            for &n in ns {
                for &map_kind in kinds {
                    let cfg = ExperimentConfig { d, n, map_kind, estimator, ..base.clone() };
                    cfg.validate()?;
                    cells.push(cfg);
                }
            }
        }
    }
    // Stable: preserves kind order within (estimator, d, n).
    cells.sort_by_key(|c| (c.estimator, c.d, c.n));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let per_cell: Vec<Vec<ExperimentResult>> =
        pool.install(|| cells.par_iter().map(run_experiment).collect::<Result<_>>())?;

    let summaries = cells.iter().zip(&per_cell).map(|(c, rows)| summarize(c, rows)).collect();
    Ok(GridReport { rows: per_cell.into_iter().flatten().collect(), cells: summaries })
}

/// A whole sweep described as data (JSON config files, `key=value;...` strings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub kinds: Vec<MapKind>,
    pub estimators: Vec<Estimator>,
    pub eps_rule: EpsRule,
    pub seed: u64,
    pub mc_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub repeats: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            ns: vec![100],
            ds: vec![2],
            kinds: vec![MapKind::ExpCoordinatewise],
            estimators: vec![Estimator::Entropic, Estimator::OneNN],
            eps_rule: EpsRule::default(),
            seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            repeats: 20,
        }
    }
}

impl GridSpec {
    pub fn base_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            d: self.ds.first().copied().unwrap_or(1),
            n: self.ns.first().copied().unwrap_or(2),
            map_kind: self.kinds.first().copied().unwrap_or(MapKind::Identity),
            estimator: self.estimators.first().copied().unwrap_or(Estimator::Entropic),
            eps_rule: self.eps_rule,
            seed: self.seed,
            mc_samples: self.mc_samples,
            tol: self.tol,
            max_iter: self.max_iter,
            repeats: self.repeats,
        }
    }

    pub fn run(&self, workers: usize) -> Result<GridReport> {
        compare_grid(&self.ns, &self.ds, &self.kinds, &self.estimators, &self.base_config(), workers)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| invalid(format!("bad value {v:?} for {key}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| invalid(format!("bad value {value:?} for {key}")))
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `key=value` pairs separated by `;`, lists by `,`. Keys: `ns`, `ds`,
    /// `kinds`, `estimators`, `eps`, `seed`, `mc`, `tol`, `max_iter`, `repeats`.
    /// Unset keys keep their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = GridSpec::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got {part:?}")))?;
            let key = key.trim();
            match key {
                "ns" | "n" => spec.ns = parse_list(key, value)?,
                "ds" | "d" => spec.ds = parse_list(key, value)?,
                "kinds" | "kind" => {
                    spec.kinds = value.split(',').map(str::parse).collect::<Result<_>>()?;
                }
                "estimators" | "estimator" => {
                    spec.estimators = value.split(',').map(str::parse).collect::<Result<_>>()?;
                }
                "eps" => spec.eps_rule = value.parse()?,
                "seed" => spec.seed = parse_one(key, value)?,
                "mc" | "mc_samples" => spec.mc_samples = parse_one(key, value)?,
                "tol" => spec.tol = parse_one(key, value)?,
                "max_iter" => spec.max_iter = parse_one(key, value)?,
                "repeats" => spec.repeats = parse_one(key, value)?,
                other => return Err(invalid(format!("unknown grid key {other:?}"))),
            }
        }
        Ok(spec)
    }
}
