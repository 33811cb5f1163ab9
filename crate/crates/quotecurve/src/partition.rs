//! Time grids, refining grid sequences, and pathwise quadratic variation.
//!
//! A [`Partition`] is a strictly increasing grid `0 = t_0 < ... < t_N = T`.
//! A [`PartitionSequence`] is a list of partitions with strictly decreasing
//! mesh, the numerical stand-in for a sequence of grids tending to
//! identity. Limits along such sequences (quadratic variation, cost
//! processes, Riemann-sum integrals) are reported as the finest-level value
//! together with the gap between the two finest levels as a Cauchy-style
//! error proxy; no convergence rate is assumed.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::rng::{stream_rng, PARTITION_STREAM};

/// Validation and usage errors for grids and grid sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionError {
    /// Fewer than two grid points.
    TooFewPoints,
    /// First grid point is not zero.
    NonzeroStart(f64),
    /// Grid times are not strictly increasing or not finite.
    NotIncreasing { index: usize },
    /// Horizon must be positive and finite.
    BadHorizon(f64),
    /// Requested zero cells or zero levels.
    ZeroSize,
    /// Sequence meshes must strictly decrease from level to level.
    MeshNotDecreasing { level: usize },
    /// Limit diagnostics need at least this many levels.
    TooFewLevels { got: usize, need: usize },
}

impl fmt::Display for PartitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewPoints => write!(f, "a partition needs at least two grid points"),
            Self::NonzeroStart(t) => write!(f, "partition must start at 0, got {t}"),
            Self::NotIncreasing { index } => {
                write!(f, "grid times must be finite and strictly increasing (index {index})")
            }
            Self::BadHorizon(t) => write!(f, "horizon must be positive and finite, got {t}"),
            Self::ZeroSize => write!(f, "cell and level counts must be at least 1"),
            Self::MeshNotDecreasing { level } => {
                write!(f, "sequence mesh must strictly decrease (level {level})")
            }
            Self::TooFewLevels { got, need } => {
                write!(f, "need at least {need} levels, got {got}")
            }
        }
    }
}

impl core::error::Error for PartitionError {}

/// Strictly increasing time grid `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
    mesh: f64,
}

impl Partition {
    /// Validates and wraps an explicit grid.
    pub fn new(times: Vec<f64>) -> Result<Self, PartitionError> {
        if times.len() < 2 {
            return Err(PartitionError::TooFewPoints);
        }
        if times[0] != 0.0 {
            return Err(PartitionError::NonzeroStart(times[0]));
        }
        let mut mesh = 0.0_f64;
        for i in 1..times.len() {
            let dt = times[i] - times[i - 1];
            if !(times[i].is_finite() && dt > 0.0) {
                return Err(PartitionError::NotIncreasing { index: i });
            }
            mesh = mesh.max(dt);
        }
        Ok(Self { times, mesh })
    }

    /// Uniform grid with `cells` cells on `[0, horizon]`.
    ///
    /// Times are computed as `horizon * i / cells`; for power-of-two cell
    /// counts this makes dyadic grids nest exactly in `f64`, so a time on a
    /// coarse level compares equal to the same time on a finer level.
    pub fn uniform(horizon: f64, cells: usize) -> Result<Self, PartitionError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(PartitionError::BadHorizon(horizon));
        }
        if cells == 0 {
            return Err(PartitionError::ZeroSize);
        }
        let n = cells as f64;
        let times: Vec<f64> = (0..=cells).map(|i| horizon * (i as f64) / n).collect();
        Self::new(times)
    }

    /// Grid times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of grid points (`cells + 1`).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false; kept for the usual container contract.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    /// Final grid time `T`.
    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Largest adjacent gap.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Index of an exact grid time, if present.
    ///
    /// Lookup is by exact `f64` equality; it is meant for grids built to
    /// nest exactly (see [`Partition::uniform`] and [`make_dyadic`]).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.total_cmp(&t)).ok()
    }
}

/// Ordered list of partitions with strictly decreasing mesh.
#[derive(Debug, Clone)]
pub struct PartitionSequence {
    levels: Vec<Partition>,
}

impl PartitionSequence {
    /// Validates the mesh-decrease invariant.
    pub fn new(levels: Vec<Partition>) -> Result<Self, PartitionError> {
        if levels.is_empty() {
            return Err(PartitionError::ZeroSize);
        }
        for i in 1..levels.len() {
            if levels[i].mesh() >= levels[i - 1].mesh() {
                return Err(PartitionError::MeshNotDecreasing { level: i });
            }
        }
        Ok(Self { levels })
    }

    /// Levels from coarsest to finest.
    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    /// Finest (last) level.
    pub fn finest(&self) -> &Partition {
        &self.levels[self.levels.len() - 1]
    }
}

/// Dyadic sequence on `[0, horizon]`: level `k` has `2^k` uniform cells,
/// `k = 1 ..= levels`. Meshes halve between levels and the grids nest.
pub fn make_dyadic(horizon: f64, levels: usize) -> Result<PartitionSequence, PartitionError> {
    if levels == 0 {
        return Err(PartitionError::ZeroSize);
    }
    let mut seq = Vec::with_capacity(levels);
    for k in 1..=levels {
        seq.push(Partition::uniform(horizon, 1usize << k)?);
    }
    PartitionSequence::new(seq)
}

/// Dyadic sequence whose finest level has exactly `finest_cells` cells
/// (a power of two), spanning `levels` levels.
pub fn make_dyadic_to(
    horizon: f64,
    finest_cells: usize,
    levels: usize,
) -> Result<PartitionSequence, PartitionError> {
    if levels == 0 || finest_cells == 0 {
        return Err(PartitionError::ZeroSize);
    }
    if !finest_cells.is_power_of_two() || levels > 63 || finest_cells >> (levels - 1) == 0 {
        return Err(PartitionError::ZeroSize);
    }
    let mut seq = Vec::with_capacity(levels);
    for k in (0..levels).rev() {
        seq.push(Partition::uniform(horizon, finest_cells >> k)?);
    }
    PartitionSequence::new(seq)
}

/// Random partition: `mean_cells` interior points drawn uniformly on
/// `(0, horizon)`, sorted, with the endpoints `{0, horizon}` appended.
/// Deterministic in `seed`.
pub fn make_random(horizon: f64, mean_cells: usize, seed: u64) -> Result<Partition, PartitionError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(PartitionError::BadHorizon(horizon));
    }
    if mean_cells == 0 {
        return Err(PartitionError::ZeroSize);
    }
    let mut rng = stream_rng(seed, PARTITION_STREAM);
    let mut interior: Vec<f64> = (0..mean_cells)
        .map(|_| {
            let u: f64 = rng.random();
            horizon * u
        })
        .collect();
    interior.sort_by(|a, b| a.total_cmp(b));
    // Ties and exact endpoint hits have probability ~0 but would break the
    // strict-increase invariant; drop them.
    interior.dedup();
    let mut times = Vec::with_capacity(mean_cells + 2);
    times.push(0.0);
    times.extend(interior.into_iter().filter(|&t| t > 0.0 && t < horizon));
    times.push(horizon);
    Partition::new(times)
}

/// One level of a quadratic-variation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvLevel {
    pub cells: usize,
    pub mesh: f64,
    /// Sum of squared increments over this level's grid.
    pub qv: f64,
    /// `|qv - qv_previous_level|`; NaN on the coarsest level.
    pub gap: f64,
}

/// Per-level quadratic variation estimates with a Cauchy-gap error proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct QvReport {
    pub levels: Vec<QvLevel>,
    /// Finest-level estimate, reported as the limit.
    pub limit: f64,
    /// Absolute gap between the two finest levels.
    pub cauchy_gap: f64,
}

impl QvReport {
    /// Gap relative to the limit magnitude (absolute gap if the limit is
    /// smaller than 1).
    pub fn relative_gap(&self) -> f64 {
        self.cauchy_gap / self.limit.abs().max(1.0)
    }
}

/// Pathwise quadratic variation along a refining sequence.
///
/// `sample` must return the path value at any grid time of any level;
/// with nested levels an exact lookup table suffices. Per level the
/// estimate is `sum_i (X(t_i) - X(t_{i-1}))^2`.
pub fn quadratic_variation<F: Fn(f64) -> f64>(
    seq: &PartitionSequence,
    sample: F,
) -> Result<QvReport, PartitionError> {
    if seq.levels().len() < 2 {
        return Err(PartitionError::TooFewLevels { got: seq.levels().len(), need: 2 });
    }
    let mut levels = Vec::with_capacity(seq.levels().len());
    let mut prev: Option<f64> = None;
    for part in seq.levels() {
        let times = part.times();
        let mut qv = 0.0;
        let mut last = sample(times[0]);
        for &t in &times[1..] {
            let x = sample(t);
            let d = x - last;
            qv += d * d;
            last = x;
        }
        let gap = match prev {
            Some(p) => (qv - p).abs(),
            None => f64::NAN,
        };
        levels.push(QvLevel { cells: part.cells(), mesh: part.mesh(), qv, gap });
        prev = Some(qv);
    }
    let limit = levels[levels.len() - 1].qv;
    let cauchy_gap = levels[levels.len() - 1].gap;
    Ok(QvReport { levels, limit, cauchy_gap })
}
