//! Meta-training: descending the expected path measure over a task
//! distribution, plus first-order baselines, transfer evaluation and
//! checkpoints.
//!
//! One meta step samples a batch of tasks, runs each task's inner loop from
//! the shared initialization `θ0`, accumulates the pull-forward increments of
//! every completed segment (see [`crate::geometry`]), averages them over the
//! surviving tasks of the batch and takes a descent step on `θ0`. Tasks whose
//! inner run diverges are dropped from their batch with a warning; a batch
//! with no survivors is an error.
//!
//! Two baselines share the loop scaffolding:
//!
//! * **endpoint interpolation** ([`reptile_meta_step`]) moves `θ0` toward the
//!   mean inner-loop endpoint: `θ0 ← θ0 + ε (E[ψ^K] - θ0)`. With the energy
//!   metric, no loss coordinate and no stabilizer, the pull-forward update
//!   telescopes to exactly this rule at `ε = 2β` — a reduction the tests pin
//!   to 1e-12.
//! * **held-out first-order gradients** ([`fomaml_meta_step`]) step `θ0`
//!   against the gradient at the inner-loop endpoint on a freshly drawn
//!   held-out batch.
//!
//! Inner-run minibatch streams derive from `(data_seed, salt, meta_step)`
//! only — never from batch position — so a task duplicated inside a batch
//! contributes exactly twice the increment, and results are independent of
//! thread count. Everything here runs in streaming mode (constant memory per
//! task) or stored-path mode; both execute the same float operations in the
//! same order and the tests assert bitwise equality.

use crate::error::{LeapError, Result};
use crate::execution;
use crate::geometry::{self, GeometryConfig};
use crate::linalg;
use crate::rng::{self, SALT_EVAL_BATCH, SALT_HELDOUT, SALT_INNER_BATCH, SALT_TASK_SAMPLE};
use crate::tasks::{sample_task_batch, SamplingMode, Task, TaskDistribution};
use crate::training::{run_inner_training, walk_inner_path};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

/// Optimizer applied to the averaged meta gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaOptimizer {
    /// Plain descent `θ0 ← θ0 - β g`.
    Sgd,
    /// Adaptive moments with bias correction.
    AdaptiveMoment {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl MetaOptimizer {
    /// Conventional adaptive-moment settings at the given learning rate.
    pub fn adaptive(lr: f64) -> Self {
        MetaOptimizer::AdaptiveMoment {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if let MetaOptimizer::AdaptiveMoment {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self
        {
            let ok = lr.is_finite()
                && *lr > 0.0
                && (0.0..1.0).contains(beta1)
                && (0.0..1.0).contains(beta2)
                && *epsilon > 0.0;
            if !ok {
                return Err(LeapError::Config(format!(
                    "MetaOptimizer: invalid adaptive-moment settings \
                     (lr {lr}, beta1 {beta1}, beta2 {beta2}, epsilon {epsilon})"
                )));
            }
        }
        Ok(())
    }
}

/// Configuration of the meta loop.
#[derive(Debug, Clone)]
pub struct MetaConfig {
    /// Path measure and surrogate-gradient switches.
    pub geometry: GeometryConfig,
    /// Meta step size `β` (scales the averaged increment under [`MetaOptimizer::Sgd`]).
    pub beta: f64,
    /// Tasks per meta batch.
    pub batch_size: usize,
    /// Number of meta steps `S`.
    pub meta_steps: usize,
    pub optimizer: MetaOptimizer,
    pub sampling: SamplingMode,
    /// Accumulate increments during the walk instead of storing paths.
    pub streaming: bool,
    /// Stop early once the meta-gradient norm falls below this threshold.
    pub early_stop_grad_norm: Option<f64>,
    /// Record `θ0` into the history every this many meta steps (0 = never).
    pub snapshot_every: usize,
}

impl MetaConfig {
    pub fn new(
        geometry: GeometryConfig,
        beta: f64,
        batch_size: usize,
        meta_steps: usize,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(LeapError::Config(format!(
                "MetaConfig: beta must be positive and finite, got {beta}"
            )));
        }
        if batch_size == 0 {
            return Err(LeapError::Config(
                "MetaConfig: batch_size must be >= 1".into(),
            ));
        }
        Ok(MetaConfig {
            geometry,
            beta,
            batch_size,
            meta_steps,
            optimizer: MetaOptimizer::Sgd,
            sampling: SamplingMode::WithReplacement,
            streaming: false,
            early_stop_grad_norm: None,
            snapshot_every: 0,
        })
    }

    pub fn with_optimizer(mut self, optimizer: MetaOptimizer) -> Result<Self> {
        optimizer.validate()?;
        self.optimizer = optimizer;
        Ok(self)
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_streaming(mut self, streaming: bool) -> Self {
        self.streaming = streaming;
        self
    }

    pub fn with_early_stop(mut self, grad_norm: Option<f64>) -> Self {
        self.early_stop_grad_norm = grad_norm;
        self
    }

    pub fn with_snapshot_every(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }
}

/// State persisted across adaptive-moment meta steps.
#[derive(Debug, Clone)]
struct MomentState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Mutable state of a meta-training run.
#[derive(Debug, Clone)]
pub struct MetaState {
    theta0: Vec<f64>,
    /// Summed pull-forward increments of the most recent batch (before the
    /// division by the number of survivors).
    accum: Vec<f64>,
    step: usize,
    moments: Option<MomentState>,
}

impl MetaState {
    pub fn new(theta0: Vec<f64>) -> Result<Self> {
        if theta0.is_empty() {
            return Err(LeapError::Config("MetaState: empty initialization".into()));
        }
        if !linalg::all_finite(&theta0) {
            return Err(LeapError::Config(
                "MetaState: non-finite initialization".into(),
            ));
        }
        let dim = theta0.len();
        Ok(MetaState {
            theta0,
            accum: vec![0.0; dim],
            step: 0,
            moments: None,
        })
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    /// Meta steps applied so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Raw summed increment of the last completed batch.
    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn apply(&mut self, mean_grad: &[f64], cfg: &MetaConfig) {
        match &cfg.optimizer {
            MetaOptimizer::Sgd => {
                linalg::axpy(&mut self.theta0, -cfg.beta, mean_grad);
            }
            MetaOptimizer::AdaptiveMoment {
                lr,
                beta1,
                beta2,
                epsilon,
            } => {
                let dim = self.theta0.len();
                let moments = self.moments.get_or_insert_with(|| MomentState {
                    m: vec![0.0; dim],
                    v: vec![0.0; dim],
                    t: 0,
                });
                moments.t += 1;
                let bias1 = 1.0 - beta1.powi(moments.t as i32);
                let bias2 = 1.0 - beta2.powi(moments.t as i32);
                for ((g, theta), (m, v)) in mean_grad
                    .iter()
                    .zip(self.theta0.iter_mut())
                    .zip(moments.m.iter_mut().zip(moments.v.iter_mut()))
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *theta -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

/// Per-step record of a meta-training run.
#[derive(Debug, Clone)]
pub struct MetaStepReport {
    /// 0-based meta step index.
    pub step: usize,
    /// Mean path measure `d_p` over the surviving tasks of the batch.
    pub mean_distance: f64,
    /// Norm of the averaged meta gradient (the applied update direction
    /// before the step size).
    pub grad_norm: f64,
    /// Mean (over tasks and inner steps) minibatch training loss.
    pub mean_loss: f64,
    /// Tasks dropped from the batch because their inner run diverged.
    pub dropped: usize,
    /// Tasks that contributed to the update.
    pub survivors: usize,
    /// Snapshot of `θ0` after this step, at the configured cadence.
    pub theta0_snapshot: Option<Vec<f64>>,
}

/// Result of a full meta-training run.
#[derive(Debug, Clone)]
pub struct MetaRun {
    /// Final initialization.
    pub theta0: Vec<f64>,
    /// One report per executed meta step (may be shorter than `meta_steps`
    /// when early stopping triggers).
    pub history: Vec<MetaStepReport>,
}

/// Uniform random initialization in `[-0.5, 0.5]^dim`.
pub fn random_init(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect()
}

// ---------------------------------------------------------------------------
// Per-task inner runs
// ---------------------------------------------------------------------------

/// Everything one surviving task contributes to a meta step.
struct TaskOutcome {
    /// Sum of pull-forward increments over the task's segments.
    increment: Vec<f64>,
    path_distance: f64,
    mean_loss: f64,
    final_params: Vec<f64>,
}

/// Runs one task's inner loop from `theta0` and folds its segments into a
/// [`TaskOutcome`]. `streaming` selects constant-memory accumulation during
/// the walk; the stored-path variant folds the identical segments in the
/// identical order, so both produce bitwise-equal outcomes.
fn leap_task_outcome(
    task: &Task,
    theta0: &[f64],
    geometry: &GeometryConfig,
    meta_step: usize,
    streaming: bool,
) -> Result<TaskOutcome> {
    let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, meta_step as u64]);
    let mut increment = vec![0.0; theta0.len()];
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    if streaming {
        let mut distance = 0.0;
        let mut callback_error: Option<LeapError> = None;
        let finish = walk_inner_path(
            task,
            theta0,
            &mut inner_rng,
            |_i, _params, loss, _grad, _batch| {
                loss_sum += loss;
                loss_count += 1;
            },
            |seg| {
                if callback_error.is_some() {
                    return;
                }
                let norm = geometry::segment_norm_raw(
                    seg.start_params,
                    seg.start_loss,
                    seg.end_params,
                    seg.end_loss,
                    geometry.include_loss,
                );
                distance += match geometry.metric {
                    geometry::PathMetric::Length => norm,
                    geometry::PathMetric::Energy => norm * norm,
                };
                if let Err(e) = geometry::add_segment_increment(&mut increment, seg, geometry) {
                    callback_error = Some(e);
                }
            },
        )?;
        if let Some(e) = callback_error {
            return Err(e);
        }
        Ok(TaskOutcome {
            increment,
            path_distance: distance,
            mean_loss: loss_sum / loss_count as f64,
            final_params: finish.params,
        })
    } else {
        let path = run_inner_training(task, theta0, &mut inner_rng)?;
        for point in path.points() {
            loss_sum += point.loss;
            loss_count += 1;
        }
        let distance = geometry::path_distance(&path, geometry);
        for i in 0..path.num_steps() {
            geometry::add_segment_increment(&mut increment, &path.segment(i), geometry)?;
        }
        Ok(TaskOutcome {
            increment,
            path_distance: distance,
            mean_loss: loss_sum / loss_count as f64,
            final_params: path.last().params.clone(),
        })
    }
}

/// Inner run that only needs the endpoint and reporting sums (baselines).
fn endpoint_outcome(
    task: &Task,
    theta0: &[f64],
    geometry: &GeometryConfig,
    meta_step: usize,
) -> Result<TaskOutcome> {
    let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, meta_step as u64]);
    let mut distance = 0.0;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let finish = walk_inner_path(
        task,
        theta0,
        &mut inner_rng,
        |_i, _params, loss, _grad, _batch| {
            loss_sum += loss;
            loss_count += 1;
        },
        |seg| {
            let norm = geometry::segment_norm_raw(
                seg.start_params,
                seg.start_loss,
                seg.end_params,
                seg.end_loss,
                geometry.include_loss,
            );
            distance += match geometry.metric {
                geometry::PathMetric::Length => norm,
                geometry::PathMetric::Energy => norm * norm,
            };
        },
    )?;
    Ok(TaskOutcome {
        increment: Vec::new(),
        path_distance: distance,
        mean_loss: loss_sum / loss_count as f64,
        final_params: finish.params,
    })
}

// ---------------------------------------------------------------------------
// Meta steps
// ---------------------------------------------------------------------------

fn check_batch(state: &MetaState, batch: &[&Task]) -> Result<()> {
    if batch.is_empty() {
        return Err(LeapError::Config("meta step: empty task batch".into()));
    }
    for task in batch {
        if task.dim() != state.dim() {
            return Err(LeapError::DimensionMismatch {
                context: "meta step",
                expected: state.dim(),
                actual: task.dim(),
            });
        }
    }
    Ok(())
}

/// Folds per-task outcomes in batch order, dropping recoverable divergences.
/// Returns `(survivor outcomes in order, dropped count)`.
fn fold_outcomes(
    results: Vec<Result<TaskOutcome>>,
    meta_step: usize,
) -> Result<(Vec<TaskOutcome>, usize)> {
    let mut survivors = Vec::with_capacity(results.len());
    let mut dropped = 0usize;
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(outcome) => survivors.push(outcome),
            Err(e) if e.is_recoverable_divergence() => {
                log::warn!("meta step {meta_step}: dropping task {i} from batch: {e}");
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if survivors.is_empty() {
        return Err(LeapError::Numerical(format!(
            "meta step {meta_step}: every task in the batch diverged"
        )));
    }
    Ok((survivors, dropped))
}

fn finish_step(
    state: &mut MetaState,
    survivors: &[TaskOutcome],
    dropped: usize,
    mean_grad: Vec<f64>,
    cfg: &MetaConfig,
) -> MetaStepReport {
    let n = survivors.len() as f64;
    let mean_distance = survivors.iter().map(|o| o.path_distance).sum::<f64>() / n;
    let mean_loss = survivors.iter().map(|o| o.mean_loss).sum::<f64>() / n;
    let grad_norm = linalg::norm(&mean_grad);
    let step = state.step;
    state.apply(&mean_grad, cfg);
    state.step += 1;
    MetaStepReport {
        step,
        mean_distance,
        grad_norm,
        mean_loss,
        dropped,
        survivors: survivors.len(),
        theta0_snapshot: None,
    }
}

/// One pull-forward meta step on `batch`.
///
/// Inner runs execute data-parallel; their increments are summed in batch
/// order, averaged over survivors, and applied through the configured
/// optimizer. `state.step` addresses the inner-run minibatch streams, making
/// the step a pure function of `(state, batch, cfg)`.
pub fn leap_meta_step(
    state: &mut MetaState,
    batch: &[&Task],
    cfg: &MetaConfig,
) -> Result<MetaStepReport> {
    check_batch(state, batch)?;
    let meta_step = state.step;
    let theta0 = state.theta0.clone();
    let results = execution::map_indexed(batch.len(), |i| {
        leap_task_outcome(batch[i], &theta0, &cfg.geometry, meta_step, cfg.streaming)
    });
    let (survivors, dropped) = fold_outcomes(results, meta_step)?;

    state.accum.fill(0.0);
    for outcome in &survivors {
        linalg::axpy(&mut state.accum, 1.0, &outcome.increment);
    }
    let inv = 1.0 / survivors.len() as f64;
    let mean_grad: Vec<f64> = state.accum.iter().map(|a| a * inv).collect();
    Ok(finish_step(state, &survivors, dropped, mean_grad, cfg))
}

/// One endpoint-interpolation meta step: `θ0 ← θ0 + ε (E[ψ^K] - θ0)`.
///
/// Reported `mean_distance` uses `cfg.geometry`; the update itself never
/// touches the geometry. `cfg.beta` and `cfg.optimizer` are ignored — the
/// interpolation rate is `epsilon`.
pub fn reptile_meta_step(
    state: &mut MetaState,
    batch: &[&Task],
    epsilon: f64,
    cfg: &MetaConfig,
) -> Result<MetaStepReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(LeapError::Config(format!(
            "reptile_meta_step: epsilon must be positive and finite, got {epsilon}"
        )));
    }
    check_batch(state, batch)?;
    let meta_step = state.step;
    let theta0 = state.theta0.clone();
    let results = execution::map_indexed(batch.len(), |i| {
        endpoint_outcome(batch[i], &theta0, &cfg.geometry, meta_step)
    });
    let (survivors, dropped) = fold_outcomes(results, meta_step)?;

    // Update direction per task: θ0 - ψ^K; the update subtracts ε times the
    // batch mean of it.
    state.accum.fill(0.0);
    for outcome in &survivors {
        for (acc, (start, end)) in state
            .accum
            .iter_mut()
            .zip(theta0.iter().zip(&outcome.final_params))
        {
            *acc += start - end;
        }
    }
    let inv = 1.0 / survivors.len() as f64;
    let mean_grad: Vec<f64> = state.accum.iter().map(|a| a * inv).collect();
    let n = survivors.len() as f64;
    let mean_distance = survivors.iter().map(|o| o.path_distance).sum::<f64>() / n;
    let mean_loss = survivors.iter().map(|o| o.mean_loss).sum::<f64>() / n;
    let grad_norm = linalg::norm(&mean_grad);
    let step = state.step;
    linalg::axpy(&mut state.theta0, -epsilon, &mean_grad);
    state.step += 1;
    Ok(MetaStepReport {
        step,
        mean_distance,
        grad_norm,
        mean_loss,
        dropped,
        survivors: survivors.len(),
        theta0_snapshot: None,
    })
}

/// One held-out first-order meta step: `θ0 ← θ0 - lr · E[∇f_heldout(ψ^K)]`.
///
/// The held-out minibatch is drawn from the task's dataset on a stream
/// addressed by `(data_seed, SALT_HELDOUT, meta_step)`; data-free tasks
/// evaluate their exact gradient.
pub fn fomaml_meta_step(
    state: &mut MetaState,
    batch: &[&Task],
    lr: f64,
    cfg: &MetaConfig,
) -> Result<MetaStepReport> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(LeapError::Config(format!(
            "fomaml_meta_step: lr must be positive and finite, got {lr}"
        )));
    }
    check_batch(state, batch)?;
    let meta_step = state.step;
    let theta0 = state.theta0.clone();
    let results = execution::map_indexed(batch.len(), |i| {
        let task = batch[i];
        let outcome = endpoint_outcome(task, &theta0, &cfg.geometry, meta_step)?;
        let mut heldout_rng = rng::stream(&[task.data_seed(), SALT_HELDOUT, meta_step as u64]);
        let heldout = task.sample_batch(&mut heldout_rng);
        let (_, grad) = task.loss_and_grad(&outcome.final_params, &heldout)?;
        if !linalg::all_finite(&grad) {
            return Err(LeapError::NonFinite {
                what: "held-out gradient",
                step: task.step_budget(),
            });
        }
        Ok(TaskOutcome {
            increment: grad,
            ..outcome
        })
    });
    let (survivors, dropped) = fold_outcomes(results, meta_step)?;

    state.accum.fill(0.0);
    for outcome in &survivors {
        linalg::axpy(&mut state.accum, 1.0, &outcome.increment);
    }
    let inv = 1.0 / survivors.len() as f64;
    let mean_grad: Vec<f64> = state.accum.iter().map(|a| a * inv).collect();
    let n = survivors.len() as f64;
    let mean_distance = survivors.iter().map(|o| o.path_distance).sum::<f64>() / n;
    let mean_loss = survivors.iter().map(|o| o.mean_loss).sum::<f64>() / n;
    let grad_norm = linalg::norm(&mean_grad);
    let step = state.step;
    linalg::axpy(&mut state.theta0, -lr, &mean_grad);
    state.step += 1;
    Ok(MetaStepReport {
        step,
        mean_distance,
        grad_norm,
        mean_loss,
        dropped,
        survivors: survivors.len(),
        theta0_snapshot: None,
    })
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

fn run_meta_loop<F>(
    dist: &TaskDistribution,
    cfg: &MetaConfig,
    theta0: Vec<f64>,
    run_seed: u64,
    mut step_fn: F,
) -> Result<MetaRun>
where
    F: FnMut(&mut MetaState, &[&Task]) -> Result<MetaStepReport>,
{
    let mut state = MetaState::new(theta0)?;
    if cfg.meta_steps > 0 && !dist.is_empty() && dist.dim() != state.dim() {
        return Err(LeapError::DimensionMismatch {
            context: "run_meta_loop",
            expected: state.dim(),
            actual: dist.dim(),
        });
    }
    let mut history = Vec::with_capacity(cfg.meta_steps);
    for s in 0..cfg.meta_steps {
        let mut sample_rng = rng::stream(&[run_seed, SALT_TASK_SAMPLE, s as u64]);
        let batch = sample_task_batch(dist, cfg.batch_size, cfg.sampling, &mut sample_rng)?;
        let mut report = step_fn(&mut state, &batch)?;
        if cfg.snapshot_every > 0 && (s + 1) % cfg.snapshot_every == 0 {
            report.theta0_snapshot = Some(state.theta0().to_vec());
        }
        let grad_norm = report.grad_norm;
        history.push(report);
        if let Some(threshold) = cfg.early_stop_grad_norm {
            if grad_norm < threshold {
                log::info!(
                    "meta loop: early stop at step {s} (grad norm {grad_norm:.3e} < {threshold:.3e})"
                );
                break;
            }
        }
    }
    Ok(MetaRun {
        theta0: state.theta0,
        history,
    })
}

/// Full pull-forward meta-training run from `theta0`. Task batches are drawn
/// on streams addressed by `(run_seed, step)`; everything else derives from
/// the tasks themselves.
pub fn run_leap(
    dist: &TaskDistribution,
    cfg: &MetaConfig,
    theta0: Vec<f64>,
    run_seed: u64,
) -> Result<MetaRun> {
    run_meta_loop(dist, cfg, theta0, run_seed, |state, batch| {
        leap_meta_step(state, batch, cfg)
    })
}

/// Full endpoint-interpolation baseline run (same sampling scaffold as
/// [`run_leap`]).
pub fn run_reptile(
    dist: &TaskDistribution,
    cfg: &MetaConfig,
    epsilon: f64,
    theta0: Vec<f64>,
    run_seed: u64,
) -> Result<MetaRun> {
    run_meta_loop(dist, cfg, theta0, run_seed, |state, batch| {
        reptile_meta_step(state, batch, epsilon, cfg)
    })
}

/// Full held-out first-order baseline run.
pub fn run_fomaml(
    dist: &TaskDistribution,
    cfg: &MetaConfig,
    lr: f64,
    theta0: Vec<f64>,
    run_seed: u64,
) -> Result<MetaRun> {
    run_meta_loop(dist, cfg, theta0, run_seed, |state, batch| {
        fomaml_meta_step(state, batch, lr, cfg)
    })
}

/// Joint fine-tuning baseline: one parameter vector trained across sampled
/// tasks round-robin (each visit continues from the current vector for the
/// task's step budget). No per-task reset, no meta gradient — the history's
/// `mean_loss` tracks the shared vector's training loss; `mean_distance` and
/// `grad_norm` are reported as NaN since no meta update exists.
pub fn run_joint_finetuning(
    dist: &TaskDistribution,
    cfg: &MetaConfig,
    theta0: Vec<f64>,
    run_seed: u64,
) -> Result<MetaRun> {
    let mut state = MetaState::new(theta0)?;
    if cfg.meta_steps > 0 && !dist.is_empty() && dist.dim() != state.dim() {
        return Err(LeapError::DimensionMismatch {
            context: "run_joint_finetuning",
            expected: state.dim(),
            actual: dist.dim(),
        });
    }
    let mut history = Vec::with_capacity(cfg.meta_steps);
    for s in 0..cfg.meta_steps {
        let mut sample_rng = rng::stream(&[run_seed, SALT_TASK_SAMPLE, s as u64]);
        let batch = sample_task_batch(dist, cfg.batch_size, cfg.sampling, &mut sample_rng)?;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for task in &batch {
            if task.dim() != state.dim() {
                return Err(LeapError::DimensionMismatch {
                    context: "run_joint_finetuning",
                    expected: state.dim(),
                    actual: task.dim(),
                });
            }
            let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, s as u64]);
            let finish = walk_inner_path(
                task,
                state.theta0(),
                &mut inner_rng,
                |_i, _params, loss, _grad, _batch| {
                    loss_sum += loss;
                    loss_count += 1;
                },
                |_seg| {},
            )?;
            state.theta0 = finish.params;
        }
        let snapshot = if cfg.snapshot_every > 0 && (s + 1) % cfg.snapshot_every == 0 {
            Some(state.theta0().to_vec())
        } else {
            None
        };
        history.push(MetaStepReport {
            step: s,
            mean_distance: f64::NAN,
            grad_norm: f64::NAN,
            mean_loss: loss_sum / loss_count.max(1) as f64,
            dropped: 0,
            survivors: batch.len(),
            theta0_snapshot: snapshot,
        });
        state.step += 1;
    }
    Ok(MetaRun {
        theta0: state.theta0,
        history,
    })
}

// ---------------------------------------------------------------------------
// Transfer evaluation
// ---------------------------------------------------------------------------

/// Area under a per-step curve by the trapezoid rule, normalized by the
/// number of intervals. A single-point curve is its own value.
pub fn auc_trapezoid(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let total: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
            total / (n - 1) as f64
        }
    }
}

/// Outcome of adapting an initialization to one held-out task.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// Index of the task in the held-out distribution.
    pub task_index: usize,
    /// Minibatch loss at each visited point (`eval_steps + 1` entries, fewer
    /// if the run diverged).
    pub losses: Vec<f64>,
    /// Training error at each visited point: 0/1 error for classification,
    /// the loss for other families.
    pub errors: Vec<f64>,
    /// Area under the error curve; scaled by 100 (percent) for
    /// classification tasks.
    pub auc: f64,
    /// The inner run crossed the divergence threshold; the curves hold the
    /// prefix recorded before the event.
    pub diverged: bool,
}

impl EvalOutcome {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }
}

/// Adapts `theta0` to every task of `heldout` for `eval_steps` inner steps
/// and records the loss / training-error curves.
///
/// `eval_salt` addresses the minibatch streams (together with each task's
/// `data_seed`), so a given `(theta0, heldout, eval_steps, eval_salt)` tuple
/// is fully deterministic. Divergence is recorded per task, not fatal.
pub fn evaluate_transfer(
    theta0: &[f64],
    heldout: &TaskDistribution,
    eval_steps: usize,
    eval_salt: u64,
) -> Result<Vec<EvalOutcome>> {
    if heldout.is_empty() {
        return Err(LeapError::Config(
            "evaluate_transfer: empty held-out distribution".into(),
        ));
    }
    if eval_steps == 0 {
        return Err(LeapError::Config(
            "evaluate_transfer: eval_steps must be >= 1".into(),
        ));
    }
    if heldout.dim() != theta0.len() {
        return Err(LeapError::DimensionMismatch {
            context: "evaluate_transfer",
            expected: theta0.len(),
            actual: heldout.dim(),
        });
    }
    let outcomes = execution::map_indexed(heldout.len(), |t| {
        let task = heldout
            .get(t)
            .expect("index in range")
            .with_step_budget(eval_steps);
        let mut rng = rng::stream(&[task.data_seed(), SALT_EVAL_BATCH, eval_salt]);
        let mut losses = Vec::with_capacity(eval_steps + 1);
        let mut errors = Vec::with_capacity(eval_steps + 1);
        let mut callback_error: Option<LeapError> = None;
        let walk = walk_inner_path(
            &task,
            theta0,
            &mut rng,
            |_i, params, loss, _grad, batch| {
                if callback_error.is_some() {
                    return;
                }
                losses.push(loss);
                match task.training_error(params, batch) {
                    Ok(err) => errors.push(err),
                    Err(e) => callback_error = Some(e),
                }
            },
            |_seg| {},
        );
        if let Some(e) = callback_error {
            return Err(e);
        }
        let diverged = match walk {
            Ok(_) => false,
            Err(e) if e.is_recoverable_divergence() => {
                log::warn!("evaluate_transfer: task {t} diverged: {e}");
                true
            }
            Err(e) => return Err(e),
        };
        let scale = if task.objective().is_classification() {
            100.0
        } else {
            1.0
        };
        Ok(EvalOutcome {
            task_index: t,
            auc: scale * auc_trapezoid(&errors),
            losses,
            errors,
            diverged,
        })
    });
    outcomes.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// File magic of the checkpoint format.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LEAPCKPT";
/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u16 = 1;

/// A persisted initialization.
///
/// Binary layout (little-endian): magic `LEAPCKPT` (8 bytes), version `u16`,
/// reserved `u16` (zero), parameter dimension `u32`, meta step `u64`, config
/// hash `u64`, then `dim` IEEE-754 `f64` parameters. 32-byte header, fixed
/// total size `32 + 8·dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub theta0: Vec<f64>,
    /// Meta step at which the snapshot was taken.
    pub meta_step: u64,
    /// Hash of the producing experiment configuration; consumers refuse to
    /// silently mix configurations (checked by the CLI, stored here).
    pub config_hash: u64,
}

/// Writes `checkpoint` at `path` (atomically via a sibling temp file).
pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    if checkpoint.theta0.is_empty() {
        return Err(LeapError::Config(
            "write_checkpoint: empty parameter vector".into(),
        ));
    }
    if checkpoint.theta0.len() > u32::MAX as usize {
        return Err(LeapError::Config(
            "write_checkpoint: dimension exceeds u32".into(),
        ));
    }
    let mut buf = Vec::with_capacity(32 + 8 * checkpoint.theta0.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(checkpoint.theta0.len() as u32).to_le_bytes());
    buf.extend_from_slice(&checkpoint.meta_step.to_le_bytes());
    buf.extend_from_slice(&checkpoint.config_hash.to_le_bytes());
    for v in &checkpoint.theta0 {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(&buf)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads and validates a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(LeapError::Checkpoint(format!(
            "file too short ({} bytes, header is 32)",
            bytes.len()
        )));
    }
    if &bytes[0..8] != CHECKPOINT_MAGIC {
        return Err(LeapError::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != CHECKPOINT_VERSION {
        return Err(LeapError::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let dim = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
    let expected_len = 32 + 8 * dim;
    if bytes.len() != expected_len {
        return Err(LeapError::Checkpoint(format!(
            "length {} does not match dimension {dim} (expected {expected_len})",
            bytes.len()
        )));
    }
    let meta_step = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let config_hash = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    let theta0: Vec<f64> = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if !linalg::all_finite(&theta0) {
        return Err(LeapError::Checkpoint("non-finite parameters".into()));
    }
    Ok(Checkpoint {
        theta0,
        meta_step,
        config_hash,
    })
}
