//! Inner-loop training: update rules and gradient descent paths.
//!
//! The inner update is `θ^{i+1} = θ^i - α^i S^i ∇f(θ^i)` with a scalar
//! learning rate schedule `α^i` and an optional fixed diagonal preconditioner
//! `S^i = S`. One engine, [`walk_inner_path`], drives every inner run in the
//! crate: it samples a minibatch, evaluates loss and gradient, emits the
//! visited point and the completed segment through callbacks, and applies the
//! update. Recording a [`GradientPath`] and streaming accumulation are both
//! thin callback sets over this walker, which is what makes the two modes
//! bitwise identical — they execute the same float operations in the same
//! order.
//!
//! A run fails with [`LeapError::Divergence`] as soon as a minibatch loss
//! crosses [`DIVERGENCE_THRESHOLD`], and with [`LeapError::NonFinite`] if a
//! loss, gradient or parameter vector stops being finite.

use crate::error::{LeapError, Result};
use crate::geometry::ManifoldPoint;
use crate::linalg;
use crate::tasks::Task;
use rand_chacha::ChaCha8Rng;

/// A minibatch loss above this value aborts the inner run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

// ---------------------------------------------------------------------------
// Update rules
// ---------------------------------------------------------------------------

/// Learning rate schedule `α^i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// The same rate at every step.
    Constant(f64),
    /// Cosine decay from `alpha_max` at step 0 to zero at step `period`
    /// (clamped to zero beyond).
    Cosine { alpha_max: f64, period: usize },
}

/// Fixed preconditioner `S` applied to the gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Identity,
    /// Positive per-coordinate scaling.
    Diagonal(Vec<f64>),
}

/// The full inner update rule: schedule plus preconditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRule {
    schedule: Schedule,
    preconditioner: Preconditioner,
}

impl UpdateRule {
    /// Validates positivity of the schedule and of any diagonal entries.
    pub fn new(schedule: Schedule, preconditioner: Preconditioner) -> Result<Self> {
        match &schedule {
            Schedule::Constant(alpha) => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(LeapError::Config(format!(
                        "UpdateRule: learning rate must be positive and finite, got {alpha}"
                    )));
                }
            }
            Schedule::Cosine { alpha_max, period } => {
                if !(alpha_max.is_finite() && *alpha_max > 0.0) {
                    return Err(LeapError::Config(format!(
                        "UpdateRule: alpha_max must be positive and finite, got {alpha_max}"
                    )));
                }
                if *period == 0 {
                    return Err(LeapError::Config(
                        "UpdateRule: cosine period must be >= 1".into(),
                    ));
                }
            }
        }
        if let Preconditioner::Diagonal(diag) = &preconditioner {
            if diag.is_empty() {
                return Err(LeapError::Config(
                    "UpdateRule: empty diagonal preconditioner".into(),
                ));
            }
            if let Some(bad) = diag.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
                return Err(LeapError::Config(format!(
                    "UpdateRule: diagonal preconditioner entries must be positive, got {bad}"
                )));
            }
        }
        Ok(UpdateRule {
            schedule,
            preconditioner,
        })
    }

    /// Constant-rate, identity-preconditioner rule.
    pub fn constant(alpha: f64) -> Result<Self> {
        UpdateRule::new(Schedule::Constant(alpha), Preconditioner::Identity)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.preconditioner
    }

    /// Learning rate at inner step `i`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        match &self.schedule {
            Schedule::Constant(alpha) => *alpha,
            Schedule::Cosine { alpha_max, period } => {
                let progress = step.min(*period) as f64 / *period as f64;
                0.5 * alpha_max * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

/// One inner update `θ - α^i S g`. Errors on dimension mismatches between
/// the parameter vector, the gradient and any diagonal preconditioner.
pub fn inner_step(theta: &[f64], grad: &[f64], rule: &UpdateRule, step: usize) -> Result<Vec<f64>> {
    if grad.len() != theta.len() {
        return Err(LeapError::DimensionMismatch {
            context: "inner_step",
            expected: theta.len(),
            actual: grad.len(),
        });
    }
    let alpha = rule.learning_rate(step);
    match rule.preconditioner() {
        Preconditioner::Identity => {
            Ok(theta.iter().zip(grad).map(|(t, g)| t - alpha * g).collect())
        }
        Preconditioner::Diagonal(diag) => {
            if diag.len() != theta.len() {
                return Err(LeapError::DimensionMismatch {
                    context: "inner_step",
                    expected: theta.len(),
                    actual: diag.len(),
                });
            }
            Ok(theta
                .iter()
                .zip(grad)
                .zip(diag)
                .map(|((t, g), s)| t - alpha * s * g)
                .collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Path walker
// ---------------------------------------------------------------------------

/// One completed inner-step segment, borrowed from the walker's state.
#[derive(Debug)]
pub struct PathSegment<'a> {
    /// Inner step index `i` (the segment spans `θ^i → θ^{i+1}`).
    pub index: usize,
    pub start_params: &'a [f64],
    pub start_loss: f64,
    /// Minibatch gradient at the start point — the gradient that produced
    /// this segment's update.
    pub start_grad: &'a [f64],
    pub end_params: &'a [f64],
    pub end_loss: f64,
}

/// Terminal state of an inner run.
#[derive(Debug, Clone)]
pub struct FinalPoint {
    pub params: Vec<f64>,
    pub loss: f64,
}

fn check_health(step: usize, loss: f64, grad: &[f64], params: &[f64]) -> Result<()> {
    if !linalg::all_finite(params) {
        return Err(LeapError::NonFinite {
            what: "parameters",
            step,
        });
    }
    if !loss.is_finite() {
        return Err(LeapError::NonFinite { what: "loss", step });
    }
    if !linalg::all_finite(grad) {
        return Err(LeapError::NonFinite {
            what: "gradient",
            step,
        });
    }
    if loss > DIVERGENCE_THRESHOLD {
        return Err(LeapError::Divergence { step, loss });
    }
    Ok(())
}

/// Runs the inner loop of `task` from `theta0`, emitting every visited point
/// and completed segment.
///
/// * `on_point(i, params, loss, grad, batch)` fires for `i = 0..=K`: the
///   minibatch used at that step, the loss and gradient on it. The final
///   point (`i = K`) gets a freshly sampled batch and evaluated gradient like
///   any other.
/// * `on_segment` fires for each of the `K` segments once its endpoint is
///   known.
///
/// Minibatches come from `rng`; deterministic callers derive it per
/// `(data_seed, salt, step)` so the walk is a pure function of its arguments.
pub fn walk_inner_path<FP, FS>(
    task: &Task,
    theta0: &[f64],
    rng: &mut ChaCha8Rng,
    mut on_point: FP,
    mut on_segment: FS,
) -> Result<FinalPoint>
where
    FP: FnMut(usize, &[f64], f64, &[f64], &[usize]),
    FS: FnMut(&PathSegment<'_>),
{
    let mut params = theta0.to_vec();
    let mut batch = task.sample_batch(rng);
    let (mut loss, mut grad) = task.loss_and_grad(&params, &batch)?;
    check_health(0, loss, &grad, &params)?;

    for i in 0..task.step_budget() {
        on_point(i, &params, loss, &grad, &batch);
        let next_params = inner_step(&params, &grad, task.update_rule(), i)?;
        let next_batch = task.sample_batch(rng);
        let (next_loss, next_grad) = task.loss_and_grad(&next_params, &next_batch)?;
        check_health(i + 1, next_loss, &next_grad, &next_params)?;
        on_segment(&PathSegment {
            index: i,
            start_params: &params,
            start_loss: loss,
            start_grad: &grad,
            end_params: &next_params,
            end_loss: next_loss,
        });
        params = next_params;
        loss = next_loss;
        grad = next_grad;
        batch = next_batch;
    }
    on_point(task.step_budget(), &params, loss, &grad, &batch);
    Ok(FinalPoint { params, loss })
}

// ---------------------------------------------------------------------------
// Recorded paths
// ---------------------------------------------------------------------------

/// A recorded descent path: `K + 1` visited points on the loss graph and the
/// `K` minibatch gradients that moved between them.
#[derive(Debug, Clone)]
pub struct GradientPath {
    points: Vec<ManifoldPoint>,
    grads: Vec<Vec<f64>>,
}

impl GradientPath {
    /// Validates the `points.len() == grads.len() + 1` shape and dimension
    /// consistency. Useful for building hand-crafted paths in tests and
    /// oracles; real paths come from [`run_inner_training`].
    pub fn new(points: Vec<ManifoldPoint>, grads: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() || points.len() != grads.len() + 1 {
            return Err(LeapError::Config(format!(
                "GradientPath::new: need K+1 points for K gradients, got {} points and {} gradients",
                points.len(),
                grads.len()
            )));
        }
        let dim = points[0].params.len();
        let points_ok = points.iter().all(|p| p.params.len() == dim);
        let grads_ok = grads.iter().all(|g| g.len() == dim);
        if !(points_ok && grads_ok) {
            return Err(LeapError::DimensionMismatch {
                context: "GradientPath::new",
                expected: dim,
                actual: 0,
            });
        }
        Ok(GradientPath { points, grads })
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    /// Number of steps `K` (segments).
    pub fn num_steps(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].params.len()
    }

    pub fn initial(&self) -> &ManifoldPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &ManifoldPoint {
        &self.points[self.points.len() - 1]
    }

    /// Borrowed view of segment `i` in walker form.
    pub fn segment(&self, i: usize) -> PathSegment<'_> {
        PathSegment {
            index: i,
            start_params: &self.points[i].params,
            start_loss: self.points[i].loss,
            start_grad: &self.grads[i],
            end_params: &self.points[i + 1].params,
            end_loss: self.points[i + 1].loss,
        }
    }

    /// Replays every stored segment through [`inner_step`] and checks the
    /// stored successor matches within `tol` (coordinatewise). Returns the
    /// largest deviation on success.
    pub fn verify_replay(&self, rule: &UpdateRule, tol: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_steps() {
            let expected = inner_step(&self.points[i].params, &self.grads[i], rule, i)?;
            for (e, got) in expected.iter().zip(&self.points[i + 1].params) {
                worst = worst.max((e - got).abs());
            }
        }
        if worst > tol {
            return Err(LeapError::Numerical(format!(
                "path replay deviates by {worst:.3e} (tolerance {tol:.3e})"
            )));
        }
        Ok(worst)
    }

    /// Writes the path as CSV (`step,loss,grad_norm,param_norm`; the final
    /// point has no gradient record, so its `grad_norm` field is empty).
    pub fn write_trace<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,loss,grad_norm,param_norm")?;
        for (i, point) in self.points.iter().enumerate() {
            let grad_norm = self
                .grads
                .get(i)
                .map(|g| linalg::norm(g).to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{}",
                i,
                point.loss,
                grad_norm,
                linalg::norm(&point.params)
            )?;
        }
        Ok(())
    }
}

/// Runs the inner loop and records the full path.
pub fn run_inner_training(
    task: &Task,
    theta0: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<GradientPath> {
    let budget = task.step_budget();
    let mut points = Vec::with_capacity(budget + 1);
    let mut grads = Vec::with_capacity(budget);
    walk_inner_path(
        task,
        theta0,
        rng,
        |i, params, loss, grad, _batch| {
            points.push(ManifoldPoint {
                params: params.to_vec(),
                loss,
            });
            if i < budget {
                grads.push(grad.to_vec());
            }
        },
        |_segment| {},
    )?;
    GradientPath::new(points, grads)
}
