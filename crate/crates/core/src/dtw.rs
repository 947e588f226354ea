//! Dynamic time warping over feature-vector sequences or precomputed cost
//! matrices, plus the multilevel FastDTW approximation.
//!
//! All engines share one windowed kernel. Local steps are (1,0), (0,1) and
//! (1,1) with uniform weights; ties in the argmin prefer the diagonal, then
//! (1,0), then (0,1).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded};
use crate::model::{TimeMap, WarpingPath};

/// FastDTW corridor radius used when none is configured.
pub const DEFAULT_RADIUS: usize = 178;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtwError {
    #[error("cannot align an empty sequence")]
    EmptySequence,
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cost matrix is empty")]
    EmptyMatrix,
    #[error("cost matrix entry ({0}, {1}) is negative")]
    NegativeCost(usize, usize),
    #[error("cost matrix entry ({0}, {1}) is not finite")]
    NonFiniteCost(usize, usize),
    #[error("FastDTW radius must be at least 1")]
    InvalidRadius,
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// A distance between two equal-length feature vectors.
pub trait Metric: Sync {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

/// The seven frame distances searched by the TAFE tuning.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceFunction {
    #[default]
    Cosine,
    Euclidean,
    Manhattan,
    Canberra,
    Chebyshev,
    BrayCurtis,
    Correlation,
}

impl DistanceFunction {
    pub const ALL: [DistanceFunction; 7] = [
        DistanceFunction::Cosine,
        DistanceFunction::Euclidean,
        DistanceFunction::Manhattan,
        DistanceFunction::Canberra,
        DistanceFunction::Chebyshev,
        DistanceFunction::BrayCurtis,
        DistanceFunction::Correlation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceFunction::Cosine => "cosine",
            DistanceFunction::Euclidean => "euclidean",
            DistanceFunction::Manhattan => "manhattan",
            DistanceFunction::Canberra => "canberra",
            DistanceFunction::Chebyshev => "chebyshev",
            DistanceFunction::BrayCurtis => "braycurtis",
            DistanceFunction::Correlation => "correlation",
        }
    }
}

impl fmt::Display for DistanceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistanceFunction::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown distance function `{s}`"))
    }
}

/// 1 - cos(a, b). Two zero vectors are at distance 0, a zero vector and a
/// non-zero vector at distance 1.
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0),
    }
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter().map(|x| x - mean).collect()
}

impl Metric for DistanceFunction {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let pairs = a.iter().zip(b);
        match self {
            DistanceFunction::Cosine => cosine(a, b),
            DistanceFunction::Euclidean => pairs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceFunction::Manhattan => pairs.map(|(x, y)| (x - y).abs()).sum(),
            DistanceFunction::Canberra => pairs
                .map(|(x, y)| {
                    let den = x.abs() + y.abs();
                    if den == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() / den
                    }
                })
                .sum(),
            DistanceFunction::Chebyshev => pairs.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
            DistanceFunction::BrayCurtis => {
                let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (x, y)| {
                    (n + (x - y).abs(), d + (x + y).abs())
                });
                match (num == 0.0, den == 0.0) {
                    (true, _) => 0.0,
                    (false, true) => 1.0,
                    _ => num / den,
                }
            }
            DistanceFunction::Correlation => cosine(&centered(a), &centered(b)),
        }
    }
}

/// Sum of distances over disjoint slices of concatenated feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SummedMetric {
    pub parts: Vec<(Range<usize>, DistanceFunction)>,
}

impl Metric for SummedMetric {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.parts
            .iter()
            .map(|(r, d)| d.distance(&a[r.clone()], &b[r.clone()]))
            .sum()
    }
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "cost matrix shape mismatch");
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Element-wise sum of two equally shaped matrices.
    pub fn add(&self, other: &CostMatrix) -> CostMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CostMatrix::new(self.rows, self.cols, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub path: WarpingPath,
    pub total_cost: f64,
}

/// Per-row column ranges `lo..hi` of the cells the kernel may visit.
#[derive(Debug, Clone)]
struct Window {
    rows: Vec<(usize, usize)>,
}

impl Window {
    fn full(n: usize, m: usize) -> Self {
        Window {
            rows: vec![(0, m); n],
        }
    }

    fn cells(&self) -> u64 {
        self.rows.iter().map(|&(lo, hi)| (hi - lo) as u64).sum()
    }
}

const DIAG: u8 = 0;
const UP: u8 = 1; // from (i-1, j): a (1,0) step
const LEFT: u8 = 2; // from (i, j-1): a (0,1) step

fn dtw_windowed(
    window: &Window,
    m: usize,
    cost: impl Fn(usize, usize) -> f64,
    budget: &Budget,
) -> Result<DtwResult, DtwError> {
    let n = window.rows.len();
    let cells = window.cells();
    budget.reserve(cells * (std::mem::size_of::<f64>() as u64 + 1))?;

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for &(lo, hi) in &window.rows {
        offsets.push(offsets.last().unwrap() + (hi - lo));
    }
    let mut acc = vec![f64::INFINITY; cells as usize];
    let mut step = vec![DIAG; cells as usize];

    let at = |acc: &[f64], i: usize, j: usize| -> f64 {
        let (lo, hi) = window.rows[i];
        if j >= lo && j < hi {
            acc[offsets[i] + j - lo]
        } else {
            f64::INFINITY
        }
    };

    for i in 0..n {
        budget.check_time()?;
        let (lo, hi) = window.rows[i];
        for j in lo..hi {
            let c = cost(i, j);
            let k = offsets[i] + j - lo;
            if i == 0 && j == 0 {
                acc[k] = c;
                continue;
            }
            let diag = if i > 0 && j > 0 { at(&acc, i - 1, j - 1) } else { f64::INFINITY };
            let up = if i > 0 { at(&acc, i - 1, j) } else { f64::INFINITY };
            let left = if j > lo { acc[k - 1] } else { f64::INFINITY };
            let (best, dir) = if diag <= up && diag <= left {
                (diag, DIAG)
            } else if up <= left {
                (up, UP)
            } else {
                (left, LEFT)
            };
            acc[k] = c + best;
            step[k] = dir;
        }
    }

    let total_cost = at(&acc, n - 1, m - 1);
    debug_assert!(total_cost.is_finite(), "window does not connect the corners");
    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        pairs.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        let k = offsets[i] + j - window.rows[i].0;
        match step[k] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            _ => j -= 1,
        }
    }
    pairs.reverse();
    Ok(DtwResult {
        path: WarpingPath { pairs },
        total_cost,
    })
}

fn check_sequences(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    let dim = a[0].len();
    if let Some(v) = a.iter().chain(b).find(|v| v.len() != dim) {
        return Err(DtwError::DimensionMismatch(dim, v.len()));
    }
    Ok(())
}

/// Exact DTW over the full N×M grid.
pub fn dtw_full<M: Metric + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: &M,
) -> Result<DtwResult, DtwError> {
    dtw_full_with_budget(a, b, metric, &Budget::unlimited())
}

pub fn dtw_full_with_budget<M: Metric + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: &M,
    budget: &Budget,
) -> Result<DtwResult, DtwError> {
    check_sequences(a, b)?;
    dtw_windowed(
        &Window::full(a.len(), b.len()),
        b.len(),
        |i, j| metric.distance(&a[i], &b[j]),
        budget,
    )
}

/// Exact DTW over precomputed cell costs.
pub fn dtw_on_matrix(cost: &CostMatrix) -> Result<DtwResult, DtwError> {
    dtw_on_matrix_with_budget(cost, &Budget::unlimited())
}

pub fn dtw_on_matrix_with_budget(cost: &CostMatrix, budget: &Budget) -> Result<DtwResult, DtwError> {
    if cost.rows == 0 || cost.cols == 0 {
        return Err(DtwError::EmptyMatrix);
    }
    for (k, &c) in cost.data.iter().enumerate() {
        let (i, j) = (k / cost.cols, k % cost.cols);
        if !c.is_finite() {
            return Err(DtwError::NonFiniteCost(i, j));
        }
        if c < 0.0 {
            return Err(DtwError::NegativeCost(i, j));
        }
    }
    dtw_windowed(
        &Window::full(cost.rows, cost.cols),
        cost.cols,
        |i, j| cost.get(i, j),
        budget,
    )
}

/// Halves a sequence by averaging consecutive pairs; an odd tail is kept.
fn coarsen(seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    seq.chunks(2)
        .map(|c| match c {
            [x, y] => x.iter().zip(y).map(|(a, b)| (a + b) / 2.0).collect(),
            [x] => x.clone(),
            _ => unreachable!(),
        })
        .collect()
}

/// Projects a coarse path onto the finer grid, widened by `radius` coarse
/// cells in every direction.
fn expand_window(coarse: &WarpingPath, n: usize, m: usize, radius: usize) -> Window {
    let nc = coarse.pairs.last().map_or(0, |p| p.0 + 1);
    let mut min_j = vec![usize::MAX; nc];
    let mut max_j = vec![0usize; nc];
    for &(i, j) in &coarse.pairs {
        min_j[i] = min_j[i].min(j);
        max_j[i] = max_j[i].max(j);
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let ci = (i / 2).min(nc - 1);
        // min_j / max_j are non-decreasing along a monotone path
        let lo_c = min_j[ci.saturating_sub(radius)].saturating_sub(radius);
        let hi_c = max_j[(ci + radius).min(nc - 1)] + radius;
        let lo = 2 * lo_c;
        let hi = (2 * hi_c + 2).min(m);
        rows.push((lo.min(m - 1), hi));
    }
    rows[0].0 = 0;
    rows[n - 1].1 = m;
    for i in 1..n {
        // keep consecutive rows connected by a diagonal or vertical step
        let prev_hi = rows[i - 1].1;
        let (lo, hi) = &mut rows[i];
        *lo = (*lo).min(prev_hi);
        *hi = (*hi).max(*lo + 1);
    }
    Window { rows }
}

/// Multilevel approximate DTW searching a corridor of `radius` cells around
/// the path projected from half resolution.
pub fn fastdtw<M: Metric + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: &M,
    radius: usize,
) -> Result<DtwResult, DtwError> {
    fastdtw_with_budget(a, b, metric, radius, &Budget::unlimited())
}

pub fn fastdtw_with_budget<M: Metric + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: &M,
    radius: usize,
    budget: &Budget,
) -> Result<DtwResult, DtwError> {
    check_sequences(a, b)?;
    if radius == 0 {
        return Err(DtwError::InvalidRadius);
    }
    fastdtw_level(a, b, metric, radius, budget)
}

fn fastdtw_level<M: Metric + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: &M,
    radius: usize,
    budget: &Budget,
) -> Result<DtwResult, DtwError> {
    let (n, m) = (a.len(), b.len());
    let min_size = (radius + 2).max(10);
    let window = if n <= min_size || m <= min_size {
        Window::full(n, m)
    } else {
        let low = fastdtw_level(&coarsen(a), &coarsen(b), metric, radius, budget)?;
        expand_window(&low.path, n, m, radius)
    };
    dtw_windowed(&window, m, |i, j| metric.distance(&a[i], &b[j]), budget)
}

fn collapse_runs(points: Vec<(f64, f64)>, key_first: bool) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    let mut run: Vec<f64> = Vec::new();
    let mut key = f64::NAN;
    let flush = |out: &mut Vec<(f64, f64)>, key: f64, run: &mut Vec<f64>| {
        if !run.is_empty() {
            let mean = run.iter().sum::<f64>() / run.len() as f64;
            out.push(if key_first { (key, mean) } else { (mean, key) });
            run.clear();
        }
    };
    for (a, b) in points {
        let (k, v) = if key_first { (a, b) } else { (b, a) };
        if k != key {
            flush(&mut out, key, &mut run);
            key = k;
        }
        run.push(v);
    }
    flush(&mut out, key, &mut run);
    out
}

/// Turns a warping path into time anchors. Runs sharing an A index collapse
/// to their mean B time, then runs sharing a B time collapse to their mean A
/// time, so both coordinates end up strictly increasing.
pub fn path_to_time_map(path: &WarpingPath, period_a: f64, period_b: f64) -> TimeMap {
    let points = path
        .pairs
        .iter()
        .map(|&(i, j)| (i as f64 * period_a, j as f64 * period_b))
        .collect();
    let by_a = collapse_runs(points, true);
    let anchors = collapse_runs(by_a, false);
    TimeMap::new(anchors).expect("monotone path yields monotone anchors")
}
