//! Step tables, transfer rates, coverage and robustness ratios.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::oracle::EpisodeResult;
use crate::scalar::Real;
use crate::scene::{SceneConfig, TaskKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("table half extents must be positive")]
    EmptyTable,
    #[error("position ({x}, {y}) lies outside the table")]
    OutOfBounds { x: f64, y: f64 },
    #[error("scene {0:?} has no target object")]
    NoTarget(String),
    #[error("step counts for {policy}/{task} are not monotone: grasp {grasp}, mid {mid}, success {success}")]
    NonMonotone { policy: String, task: TaskKind, grasp: usize, mid: usize, success: usize },
}

/// Ratios of consecutive step success rates, with an implicit leading rate
/// of 1. A ratio after a zero rate is undefined.
pub fn transfer_rate<T: Real>(rates: &[T]) -> Vec<Option<T>> {
    let mut prev = T::one();
    rates
        .iter()
        .map(|&r| {
            let tr = (prev != T::zero()).then(|| r / prev);
            prev = r;
            tr
        })
        .collect()
}

/// `(variant - baseline) / baseline`; undefined for a zero baseline.
pub fn diff_metric<T: Real>(baseline: T, variant: T) -> Option<T> {
    (baseline != T::zero()).then(|| (variant - baseline) / baseline)
}

/// Mean mutated pass count over the default pass count.
pub fn mut_over_def<T: Real>(default_passes: T, mutated_passes: &[T]) -> Option<T> {
    if default_passes == T::zero() || mutated_passes.is_empty() {
        return None;
    }
    let mean = mutated_passes.iter().fold(T::zero(), |acc, &m| acc + m) / T::from_count(mutated_passes.len());
    Some(mean / default_passes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport<T: Real> {
    pub rows: usize,
    pub cols: usize,
    pub covered: usize,
    pub ratio: T,
}

impl<T: Real> CoverageReport<T> {
    pub fn total(&self) -> usize {
        self.rows * self.cols
    }
}

/// Fraction of grid cells over the table that contain at least one point.
/// Rows split the y range, columns the x range; points on the upper table
/// edge fall in the last cell.
pub fn trajectory_coverage<T: Real>(
    points: &[(T, T)],
    grid: (usize, usize),
    table_half_extents: [T; 2],
) -> Result<CoverageReport<T>, MetricError> {
    let (rows, cols) = grid;
    if rows == 0 || cols == 0 {
        return Err(MetricError::EmptyGrid);
    }
    let [hx, hy] = table_half_extents;
    if !(hx > T::zero() && hy > T::zero()) {
        return Err(MetricError::EmptyTable);
    }
    let cell = |v: T, h: T, n: usize| -> Option<usize> {
        if !(v >= -h && v <= h) {
            return None;
        }
        let i = ((v + h) / (h + h) * T::from_count(n)).floor().to_usize()?;
        Some(i.min(n - 1))
    };
    let mut cells = BTreeSet::new();
    for &(x, y) in points {
        match (cell(x, hx, cols), cell(y, hy, rows)) {
            (Some(c), Some(r)) => {
                cells.insert((r, c));
            }
            _ => return Err(MetricError::OutOfBounds { x: x.as_f64(), y: y.as_f64() }),
        }
    }
    Ok(CoverageReport { rows, cols, covered: cells.len(), ratio: T::from_count(cells.len()) / T::from_count(rows * cols) })
}

/// Coverage of the target-object positions of a suite.
pub fn suite_coverage(scenes: &[SceneConfig], grid: (usize, usize)) -> Result<CoverageReport<f64>, MetricError> {
    let Some(first) = scenes.first() else {
        return trajectory_coverage::<f64>(&[], grid, crate::scene::DEFAULT_TABLE_HALF_EXTENTS);
    };
    let points = scenes
        .iter()
        .map(|s| {
            s.target_a().map(|o| (o.pose.position.x, o.pose.position.y)).ok_or_else(|| MetricError::NoTarget(s.scene_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    trajectory_coverage(&points, grid, first.table_half_extents)
}

/// Grasp / middle step / success counts over `n` episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepCounts {
    pub n: usize,
    pub grasp: usize,
    pub mid: usize,
    pub success: usize,
}

impl StepCounts {
    pub fn add(&mut self, r: &EpisodeResult) {
        self.n += 1;
        self.grasp += r.grasp_correct as usize;
        self.mid += r.mid_step as usize;
        self.success += r.success as usize;
    }

    pub fn is_monotone(&self) -> bool {
        self.success <= self.mid && self.mid <= self.grasp && self.grasp <= self.n
    }

    /// Step rates; undefined for an empty partition.
    pub fn rates<T: Real>(&self) -> Option<[T; 3]> {
        if self.n == 0 {
            return None;
        }
        let n = T::from_count(self.n);
        Some([T::from_count(self.grasp) / n, T::from_count(self.mid) / n, T::from_count(self.success) / n])
    }
}

/// Step counts per (policy, task).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: BTreeMap<(String, TaskKind), StepCounts>,
}

impl AggregateTable {
    /// Tabulates results, rejecting any partition whose counts are not
    /// ordered success <= mid <= grasp.
    pub fn from_results<'a>(results: impl IntoIterator<Item = (&'a str, &'a EpisodeResult)>) -> Result<Self, MetricError> {
        let mut rows: BTreeMap<(String, TaskKind), StepCounts> = BTreeMap::new();
        for (policy, r) in results {
            rows.entry((policy.to_string(), r.task)).or_default().add(r);
        }
        let table = Self { rows };
        table.check()?;
        Ok(table)
    }

    pub fn check(&self) -> Result<(), MetricError> {
        for ((policy, task), c) in &self.rows {
            if !c.is_monotone() {
                return Err(MetricError::NonMonotone {
                    policy: policy.clone(),
                    task: *task,
                    grasp: c.grasp,
                    mid: c.mid,
                    success: c.success,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, policy: &str, task: TaskKind) -> Option<&StepCounts> {
        self.rows.get(&(policy.to_string(), task))
    }
}
