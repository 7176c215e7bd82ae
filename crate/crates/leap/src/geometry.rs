//! Path geometry on the graph of the loss.
//!
//! A descent path visits points `γ^i = (θ^i, f(θ^i))` on the loss surface.
//! Its cumulative chordal measure is
//!
//! ```text
//! d_p(path) = Σ_i ‖γ^{i+1} - γ^i‖₂^p,    p = 1 (length) or p = 2 (energy)
//! ```
//!
//! Meta-training cannot differentiate `d_p` directly through the forward
//! points, so it descends a frozen forward-point surrogate instead: each
//! segment's far end `γ̄^{i+1}` is treated as a constant, and only the near
//! end `γ^i = (θ^i, f(θ^i))` carries gradients. The gradient of one frozen
//! segment with respect to `θ^i` is the *pull-forward increment*
//!
//! ```text
//! ∇_{θ^i} ‖γ̄^{i+1} - γ^i‖^p = -p · w_i · (Δθ^i + Δf^i ∇f(θ^i))
//!     Δθ^i = ψ^{i+1} - θ^i,   Δf^i = f̄(ψ^{i+1}) - f(θ^i),
//!     w_i  = 1 (p = 2)  or  1 / ‖γ̄^{i+1} - γ^i‖ (p = 1)
//! ```
//!
//! summed over segments and tasks by the meta loop, which then takes a plain
//! gradient step on the initialization. Two switches modify the increment:
//! `include_loss` drops the loss coordinate entirely, and `stabilize`
//! replaces the `Δf` *coefficient* by `-|Δf|` so that segments climbing in
//! loss still pull the initialization down the slope (the geometry itself —
//! the `w_i` weight — keeps the raw `Δf`).

use crate::error::{LeapError, Result};
use crate::training::{GradientPath, PathSegment};

/// Default guard below which a unit-normalized (`p = 1`) segment is treated
/// as zero-length and contributes nothing.
pub const DEFAULT_ZERO_NORM_EPS: f64 = 1e-12;

/// A visited point on the loss graph: parameters plus the loss there.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    pub params: Vec<f64>,
    pub loss: f64,
}

impl ManifoldPoint {
    pub fn new(params: Vec<f64>, loss: f64) -> Self {
        ManifoldPoint { params, loss }
    }
}

/// Which cumulative measure the path is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMetric {
    /// `p = 1`: cumulative chordal length.
    Length,
    /// `p = 2`: cumulative chordal energy.
    Energy,
}

impl PathMetric {
    /// The exponent `p` as a float.
    pub fn exponent(self) -> f64 {
        match self {
            PathMetric::Length => 1.0,
            PathMetric::Energy => 2.0,
        }
    }

    /// Parses `p ∈ {1, 2}`.
    pub fn from_exponent(p: u8) -> Result<Self> {
        match p {
            1 => Ok(PathMetric::Length),
            2 => Ok(PathMetric::Energy),
            other => Err(LeapError::Config(format!(
                "PathMetric: exponent must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Configuration of the path measure and its surrogate gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub metric: PathMetric,
    /// Include the loss as an extra coordinate of each path point.
    pub include_loss: bool,
    /// Replace the `Δf` coefficient by `-|Δf|` in the increment so ascending
    /// segments still push downhill.
    pub stabilize: bool,
    /// Guard for the `p = 1` normalization.
    pub zero_norm_eps: f64,
}

impl GeometryConfig {
    pub fn new(metric: PathMetric, include_loss: bool, stabilize: bool) -> Self {
        GeometryConfig {
            metric,
            include_loss,
            stabilize,
            zero_norm_eps: DEFAULT_ZERO_NORM_EPS,
        }
    }

    /// Energy measure over the full loss graph, no stabilizer.
    pub fn energy() -> Self {
        GeometryConfig::new(PathMetric::Energy, true, false)
    }

    /// Length measure over the full loss graph, no stabilizer.
    pub fn length() -> Self {
        GeometryConfig::new(PathMetric::Length, true, false)
    }

    pub fn with_stabilizer(mut self, on: bool) -> Self {
        self.stabilize = on;
        self
    }

    pub fn with_loss_dimension(mut self, on: bool) -> Self {
        self.include_loss = on;
        self
    }
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

pub(crate) fn segment_norm_raw(
    start_params: &[f64],
    start_loss: f64,
    end_params: &[f64],
    end_loss: f64,
    include_loss: bool,
) -> f64 {
    debug_assert_eq!(start_params.len(), end_params.len());
    let mut sq = 0.0;
    for (a, b) in start_params.iter().zip(end_params) {
        let d = b - a;
        sq += d * d;
    }
    if include_loss {
        let df = end_loss - start_loss;
        sq += df * df;
    }
    sq.sqrt()
}

/// Euclidean distance between two points on the loss graph, optionally
/// including the loss coordinate.
pub fn segment_norm(a: &ManifoldPoint, b: &ManifoldPoint, include_loss: bool) -> f64 {
    segment_norm_raw(&a.params, a.loss, &b.params, b.loss, include_loss)
}

/// Cumulative measure `d_p` of a recorded path.
pub fn path_distance(path: &GradientPath, cfg: &GeometryConfig) -> f64 {
    let mut total = 0.0;
    for w in path.points().windows(2) {
        let norm = segment_norm(&w[0], &w[1], cfg.include_loss);
        total += match cfg.metric {
            PathMetric::Length => norm,
            PathMetric::Energy => norm * norm,
        };
    }
    total
}

/// Frozen forward-point surrogate `d̄_p`: segment far ends come from
/// `frozen`, near ends from `current`. With `frozen` equal to `current` this
/// reproduces [`path_distance`] exactly.
pub fn surrogate_distance(
    current: &GradientPath,
    frozen: &GradientPath,
    cfg: &GeometryConfig,
) -> Result<f64> {
    if current.num_steps() != frozen.num_steps() || current.dim() != frozen.dim() {
        return Err(LeapError::DimensionMismatch {
            context: "surrogate_distance",
            expected: current.num_steps(),
            actual: frozen.num_steps(),
        });
    }
    let mut total = 0.0;
    for i in 0..current.num_steps() {
        let near = &current.points()[i];
        let far = &frozen.points()[i + 1];
        let norm = segment_norm(near, far, cfg.include_loss);
        total += match cfg.metric {
            PathMetric::Length => norm,
            PathMetric::Energy => norm * norm,
        };
    }
    Ok(total)
}

/// The stabilizer's penalty value for one segment: zero when the segment
/// descends (`loss_end <= loss_start`), `-2 (Δf)²` when it ascends. This is
/// the quantity whose gradient effect is the `Δf → -|Δf|` substitution; it is
/// reported by diagnostics rather than entering the increment directly.
pub fn stabilizer_value(loss_start: f64, loss_end: f64) -> f64 {
    let df = loss_end - loss_start;
    if df <= 0.0 {
        0.0
    } else {
        -2.0 * df * df
    }
}

// ---------------------------------------------------------------------------
// Pull-forward increments
// ---------------------------------------------------------------------------

/// Adds one segment's pull-forward increment into `acc` without allocating.
///
/// `acc` accumulates `∇_{θ^i}` of the frozen segment term; the meta loop sums
/// these over segments and tasks in a fixed order and then steps against the
/// sum. See the module docs for the formula and the two switches.
pub fn add_pull_forward_increment(
    acc: &mut [f64],
    theta_i: &[f64],
    loss_i: f64,
    grad_i: &[f64],
    psi_next: &[f64],
    loss_next: f64,
    cfg: &GeometryConfig,
) -> Result<()> {
    let n = theta_i.len();
    if acc.len() != n || grad_i.len() != n || psi_next.len() != n {
        return Err(LeapError::DimensionMismatch {
            context: "add_pull_forward_increment",
            expected: n,
            actual: acc.len().min(grad_i.len()).min(psi_next.len()),
        });
    }
    let p = cfg.metric.exponent();
    let weight = match cfg.metric {
        PathMetric::Energy => 1.0,
        PathMetric::Length => {
            let norm = segment_norm_raw(theta_i, loss_i, psi_next, loss_next, cfg.include_loss);
            if norm < cfg.zero_norm_eps {
                // Degenerate segment: the unit direction is undefined, the
                // segment contributes nothing.
                return Ok(());
            }
            1.0 / norm
        }
    };
    let df_raw = loss_next - loss_i;
    let df = if cfg.include_loss {
        if cfg.stabilize {
            -df_raw.abs()
        } else {
            df_raw
        }
    } else {
        0.0
    };
    for k in 0..n {
        let dtheta = psi_next[k] - theta_i[k];
        acc[k] += -p * weight * (dtheta + df * grad_i[k]);
    }
    Ok(())
}

/// Allocating wrapper around [`add_pull_forward_increment`] for one segment.
pub fn pull_forward_increment(
    theta_i: &[f64],
    loss_i: f64,
    grad_i: &[f64],
    psi_next: &[f64],
    loss_next: f64,
    cfg: &GeometryConfig,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; theta_i.len()];
    add_pull_forward_increment(&mut acc, theta_i, loss_i, grad_i, psi_next, loss_next, cfg)?;
    Ok(acc)
}

/// Adds the increment of a walker segment into `acc`.
pub fn add_segment_increment(
    acc: &mut [f64],
    seg: &PathSegment<'_>,
    cfg: &GeometryConfig,
) -> Result<()> {
    add_pull_forward_increment(
        acc,
        seg.start_params,
        seg.start_loss,
        seg.start_grad,
        seg.end_params,
        seg.end_loss,
        cfg,
    )
}
