//! Synthetic task families and task distributions.
//!
//! A [`Task`] bundles an objective (what is being minimized), a fixed dataset
//! materialized deterministically from the task's `data_seed`, and the inner
//! training recipe (update rule, step budget, batching). Three families are
//! provided:
//!
//! * **quadratic** — `f(θ) = ½ (θ - c)ᵀ A (θ - c)` with validated symmetric
//!   positive definite `A`. Deterministic (no data), exact gradient
//!   `A (θ - c)`; the workhorse for closed-form checks and convex
//!   monotonicity experiments.
//! * **sinusoid** — regress `y = A sin(x + φ)` (plus observation noise) with
//!   a one-hidden-layer tanh MLP under half mean squared error.
//! * **classify** — two Gaussian blobs in the plane, classified by a small
//!   MLP logit under sigmoid cross entropy; training error is the 0/1 error.
//!
//! Everything downstream depends on one property established here: a task's
//! loss and gradient streams are a pure function of `(objective, data_seed)`
//! and the consumed RNG stream, never of batch position or thread schedule.

mod mlp;

use crate::error::{LeapError, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{self, SALT_DATASET, SALT_TASK_PARAMS};
use crate::training::UpdateRule;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use mlp::{sigmoid, LossKind, MlpShape};

/// Input range for sinusoid regressors.
const SINUSOID_INPUT_RANGE: (f64, f64) = (-5.0, 5.0);

// ---------------------------------------------------------------------------
// Objective definitions
// ---------------------------------------------------------------------------

/// Convex quadratic bowl `½ (θ - c)ᵀ A (θ - c)` with SPD `A`.
#[derive(Debug, Clone)]
pub struct QuadraticSpec {
    matrix: Matrix,
    center: Vec<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl QuadraticSpec {
    /// Validates symmetry and positive definiteness (via the eigensolver, so
    /// the dimension cap of [`linalg::JACOBI_MAX_DIM`] applies).
    pub fn new(matrix: Matrix, center: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != center.len() {
            return Err(LeapError::DimensionMismatch {
                context: "QuadraticSpec::new",
                expected: center.len(),
                actual: matrix.rows(),
            });
        }
        if !matrix.all_finite() || !linalg::all_finite(&center) {
            return Err(LeapError::Config(
                "QuadraticSpec::new: non-finite entries".into(),
            ));
        }
        if !matrix.is_symmetric(1e-9 * (1.0 + matrix.frobenius())) {
            return Err(LeapError::Config(format!(
                "QuadraticSpec::new: matrix is not symmetric (max asymmetry {:.3e})",
                matrix.max_asymmetry()
            )));
        }
        let eig = linalg::symmetric_eigenvalues(&matrix)?;
        let (min_eig, max_eig) = (eig[0], eig[eig.len() - 1]);
        if min_eig <= 0.0 {
            return Err(LeapError::Config(format!(
                "QuadraticSpec::new: matrix is not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(QuadraticSpec {
            matrix,
            center,
            min_eigenvalue: min_eig,
            max_eigenvalue: max_eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Smallest eigenvalue of `A` (cached at construction).
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Largest eigenvalue of `A`; `α ∈ (0, 2/λ_max)` keeps plain gradient
    /// descent on this objective a contraction.
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// `½ (θ - c)ᵀ A (θ - c)`.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        let d = linalg::sub(theta, &self.center);
        0.5 * linalg::dot(&d, &self.matrix.matvec(&d))
    }

    /// Exact gradient `A (θ - c)`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = linalg::sub(theta, &self.center);
        self.matrix.matvec(&d)
    }
}

/// Sinusoid regression target `y = amplitude · sin(x + phase)` fit by an MLP.
#[derive(Debug, Clone)]
pub struct SinusoidSpec {
    amplitude: f64,
    phase: f64,
    hidden_units: usize,
    noise_std: f64,
}

impl SinusoidSpec {
    pub fn new(amplitude: f64, phase: f64, hidden_units: usize, noise_std: f64) -> Result<Self> {
        if !(0.1..=5.0).contains(&amplitude) {
            return Err(LeapError::Config(format!(
                "SinusoidSpec::new: amplitude {amplitude} outside [0.1, 5.0]"
            )));
        }
        if !phase.is_finite() {
            return Err(LeapError::Config(
                "SinusoidSpec::new: non-finite phase".into(),
            ));
        }
        if hidden_units == 0 {
            return Err(LeapError::Config(
                "SinusoidSpec::new: hidden_units must be >= 1".into(),
            ));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(LeapError::Config(format!(
                "SinusoidSpec::new: invalid noise_std {noise_std}"
            )));
        }
        Ok(SinusoidSpec {
            amplitude,
            phase,
            hidden_units,
            noise_std,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            input: 1,
            hidden: self.hidden_units,
        }
    }

    /// Noise-free regression target at `x`.
    pub fn target(&self, x: f64) -> f64 {
        self.amplitude * (x + self.phase).sin()
    }
}

/// Two-class Gaussian blob classification in the plane.
#[derive(Debug, Clone)]
pub struct ClassifySpec {
    mean_a: [f64; 2],
    mean_b: [f64; 2],
    noise_std: f64,
    hidden_units: usize,
}

impl ClassifySpec {
    pub fn new(
        mean_a: [f64; 2],
        mean_b: [f64; 2],
        noise_std: f64,
        hidden_units: usize,
    ) -> Result<Self> {
        if !(linalg::all_finite(&mean_a) && linalg::all_finite(&mean_b)) {
            return Err(LeapError::Config(
                "ClassifySpec::new: non-finite class means".into(),
            ));
        }
        if !(noise_std.is_finite() && noise_std > 0.0) {
            return Err(LeapError::Config(format!(
                "ClassifySpec::new: noise_std must be positive and finite, got {noise_std}"
            )));
        }
        if hidden_units == 0 {
            return Err(LeapError::Config(
                "ClassifySpec::new: hidden_units must be >= 1".into(),
            ));
        }
        Ok(ClassifySpec {
            mean_a,
            mean_b,
            noise_std,
            hidden_units,
        })
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            input: 2,
            hidden: self.hidden_units,
        }
    }

    /// Distance between the two class means.
    pub fn separation(&self) -> f64 {
        linalg::distance(&self.mean_a, &self.mean_b)
    }
}

/// The objective attached to a task: which family, with which parameters.
#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic(QuadraticSpec),
    Sinusoid(SinusoidSpec),
    Classify(ClassifySpec),
}

impl Objective {
    /// Dimension of the parameter vector this objective is minimized over.
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.dim(),
            Objective::Sinusoid(s) => s.shape().param_count(),
            Objective::Classify(c) => c.shape().param_count(),
        }
    }

    /// Short stable family identifier, used in reports and CSV output.
    pub fn family(&self) -> &'static str {
        match self {
            Objective::Quadratic(_) => "quadratic",
            Objective::Sinusoid(_) => "sinusoid",
            Objective::Classify(_) => "classify",
        }
    }

    /// Whether training error means 0/1 classification error (as opposed to
    /// the loss itself).
    pub fn is_classification(&self) -> bool {
        matches!(self, Objective::Classify(_))
    }
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Fixed per-task data, materialized once from the task's `data_seed`.
#[derive(Debug, Clone)]
enum Dataset {
    /// Quadratic objectives are data-free.
    None,
    /// Scalar inputs and regression targets.
    Regression { xs: Vec<f64>, ys: Vec<f64> },
    /// Planar inputs and 0/1 labels (stored as f64 for the loss kernel).
    Classification { xs: Vec<[f64; 2]>, ys: Vec<f64> },
}

impl Dataset {
    fn len(&self) -> usize {
        match self {
            Dataset::None => 0,
            Dataset::Regression { xs, .. } => xs.len(),
            Dataset::Classification { xs, .. } => xs.len(),
        }
    }
}

fn build_dataset(objective: &Objective, data_seed: u64, size: usize) -> Dataset {
    // Draw order is part of the determinism contract: per sample, inputs
    // first, then the noise/label draws, so datasets of different sizes share
    // a prefix and streams never depend on consumer behavior.
    let mut rng = rng::stream(&[data_seed, SALT_DATASET]);
    match objective {
        Objective::Quadratic(_) => Dataset::None,
        Objective::Sinusoid(spec) => {
            let mut xs = Vec::with_capacity(size);
            let mut ys = Vec::with_capacity(size);
            for _ in 0..size {
                let x = rng.random_range(SINUSOID_INPUT_RANGE.0..SINUSOID_INPUT_RANGE.1);
                let noise: f64 = rng.sample(StandardNormal);
                xs.push(x);
                ys.push(spec.target(x) + spec.noise_std * noise);
            }
            Dataset::Regression { xs, ys }
        }
        Objective::Classify(spec) => {
            let mut xs = Vec::with_capacity(size);
            let mut ys = Vec::with_capacity(size);
            for _ in 0..size {
                let label = rng.random_range(0..2u8);
                let n1: f64 = rng.sample(StandardNormal);
                let n2: f64 = rng.sample(StandardNormal);
                let mean = if label == 1 { spec.mean_b } else { spec.mean_a };
                xs.push([mean[0] + spec.noise_std * n1, mean[1] + spec.noise_std * n2]);
                ys.push(f64::from(label));
            }
            Dataset::Classification { xs, ys }
        }
    }
}

// ---------------------------------------------------------------------------
// Inner run recipe and Task
// ---------------------------------------------------------------------------

/// The inner-loop training recipe shared by the tasks of a family: how many
/// gradient steps, with which update rule, on which batch regime.
#[derive(Debug, Clone)]
pub struct InnerRunSpec {
    pub update_rule: UpdateRule,
    /// Number of inner gradient steps `K`.
    pub step_budget: usize,
    /// Minibatch size (ignored for data-free objectives and in full-batch mode).
    pub batch_size: usize,
    /// Number of samples materialized per task (ignored for data-free objectives).
    pub dataset_size: usize,
    /// Train on the whole dataset every step instead of minibatches.
    pub full_batch: bool,
}

impl InnerRunSpec {
    pub fn new(
        update_rule: UpdateRule,
        step_budget: usize,
        batch_size: usize,
        dataset_size: usize,
    ) -> Self {
        InnerRunSpec {
            update_rule,
            step_budget,
            batch_size,
            dataset_size,
            full_batch: false,
        }
    }

    /// Switches the recipe to full-batch gradients.
    pub fn full_batch(mut self) -> Self {
        self.full_batch = true;
        self
    }
}

/// One learning problem: objective + deterministic dataset + inner recipe.
#[derive(Debug, Clone)]
pub struct Task {
    objective: Objective,
    data_seed: u64,
    update_rule: UpdateRule,
    step_budget: usize,
    batch_size: usize,
    full_batch: bool,
    dataset: Dataset,
}

impl Task {
    /// Builds the task and materializes its dataset. Data-free objectives
    /// ignore the batching fields of `inner`.
    pub fn new(objective: Objective, data_seed: u64, inner: &InnerRunSpec) -> Result<Task> {
        if inner.step_budget == 0 {
            return Err(LeapError::Config(
                "Task::new: step_budget must be >= 1".into(),
            ));
        }
        let data_free = matches!(objective, Objective::Quadratic(_));
        if !data_free {
            if inner.dataset_size == 0 {
                return Err(LeapError::Config(
                    "Task::new: dataset_size must be >= 1".into(),
                ));
            }
            if !inner.full_batch && !(1..=inner.dataset_size).contains(&inner.batch_size) {
                return Err(LeapError::Config(format!(
                    "Task::new: batch_size {} outside 1..={}",
                    inner.batch_size, inner.dataset_size
                )));
            }
        }
        let dataset = build_dataset(&objective, data_seed, inner.dataset_size);
        Ok(Task {
            objective,
            data_seed,
            update_rule: inner.update_rule.clone(),
            step_budget: inner.step_budget,
            batch_size: inner.batch_size,
            full_batch: inner.full_batch || data_free,
            dataset,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed
    }

    pub fn update_rule(&self) -> &UpdateRule {
        &self.update_rule
    }

    pub fn step_budget(&self) -> usize {
        self.step_budget
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn is_full_batch(&self) -> bool {
        self.full_batch
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn dataset_len(&self) -> usize {
        self.dataset.len()
    }

    /// Copy of the task with a different inner step budget (used when
    /// evaluation adapts for a different horizon than meta-training).
    pub fn with_step_budget(&self, step_budget: usize) -> Task {
        let mut task = self.clone();
        task.step_budget = step_budget.max(1);
        task
    }

    /// Draws the minibatch index set for one inner step. Data-free objectives
    /// return an empty batch and consume nothing from `rng`; full-batch tasks
    /// return all indices and likewise consume nothing.
    pub fn sample_batch(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let len = self.dataset.len();
        if len == 0 {
            return Vec::new();
        }
        if self.full_batch || self.batch_size >= len {
            return (0..len).collect();
        }
        index::sample(rng, len, self.batch_size).into_vec()
    }

    fn check_theta(&self, theta: &[f64], context: &'static str) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(LeapError::DimensionMismatch {
                context,
                expected: self.dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn batch_samples<'a>(
        &'a self,
        batch: &'a [usize],
        context: &'static str,
    ) -> Result<impl Iterator<Item = (&'a [f64], f64)> + 'a> {
        if batch.is_empty() {
            return Err(LeapError::Config(format!("{context}: empty minibatch")));
        }
        let len = self.dataset.len();
        if let Some(&bad) = batch.iter().find(|&&i| i >= len) {
            return Err(LeapError::Config(format!(
                "{context}: batch index {bad} out of range for dataset of {len}"
            )));
        }
        Ok(batch.iter().map(move |&i| match &self.dataset {
            Dataset::Regression { xs, ys } => (std::slice::from_ref(&xs[i]), ys[i]),
            Dataset::Classification { xs, ys } => (&xs[i][..], ys[i]),
            Dataset::None => unreachable!("data-free objectives never index a dataset"),
        }))
    }

    /// Minibatch loss and exact gradient at `theta`. For the quadratic family
    /// the batch is ignored (the objective is data-free).
    pub fn loss_and_grad(&self, theta: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_theta(theta, "Task::loss_and_grad")?;
        match &self.objective {
            Objective::Quadratic(q) => Ok((q.loss(theta), q.gradient(theta))),
            Objective::Sinusoid(s) => {
                let samples = self.batch_samples(batch, "Task::loss_and_grad")?;
                Ok(s.shape()
                    .batch_loss_grad(theta, samples, LossKind::HalfSquared))
            }
            Objective::Classify(c) => {
                let samples = self.batch_samples(batch, "Task::loss_and_grad")?;
                Ok(c.shape()
                    .batch_loss_grad(theta, samples, LossKind::Logistic))
            }
        }
    }

    /// Training error on a batch: 0/1 error for classification, the loss
    /// itself for the other families.
    pub fn training_error(&self, theta: &[f64], batch: &[usize]) -> Result<f64> {
        self.check_theta(theta, "Task::training_error")?;
        match &self.objective {
            Objective::Classify(c) => {
                let samples = self.batch_samples(batch, "Task::training_error")?;
                Ok(c.shape().batch_zero_one_error(theta, samples))
            }
            _ => Ok(self.loss_and_grad(theta, batch)?.0),
        }
    }

    /// Loss over the full dataset (the objective itself for data-free tasks).
    pub fn full_loss(&self, theta: &[f64]) -> Result<f64> {
        let batch: Vec<usize> = (0..self.dataset.len()).collect();
        Ok(self.loss_and_grad(theta, &batch)?.0)
    }
}

// ---------------------------------------------------------------------------
// Task distributions and batch sampling
// ---------------------------------------------------------------------------

/// How meta training samples task batches from the distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Independent draws; a task may appear several times in one batch.
    WithReplacement,
    /// Distinct tasks per batch; requires `batch_size <= len`.
    WithoutReplacement,
}

/// A finite collection of tasks over a shared parameter space.
#[derive(Debug, Clone)]
pub struct TaskDistribution {
    tasks: Vec<Task>,
}

impl TaskDistribution {
    /// All tasks must agree on parameter dimension.
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        if let Some(first) = tasks.first() {
            let dim = first.dim();
            for (i, task) in tasks.iter().enumerate() {
                if task.dim() != dim {
                    return Err(LeapError::DimensionMismatch {
                        context: "TaskDistribution::new",
                        expected: dim,
                        actual: tasks[i].dim(),
                    });
                }
            }
        }
        Ok(TaskDistribution { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn get(&self, index: usize) -> Option<&Task> {
        self.tasks.get(index)
    }

    /// Shared parameter dimension (0 for an empty distribution).
    pub fn dim(&self) -> usize {
        self.tasks.first().map_or(0, Task::dim)
    }
}

/// Samples a batch of task references for one meta step.
pub fn sample_task_batch<'d>(
    dist: &'d TaskDistribution,
    batch_size: usize,
    mode: SamplingMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<&'d Task>> {
    if dist.is_empty() {
        return Err(LeapError::Config(
            "sample_task_batch: empty task distribution".into(),
        ));
    }
    if batch_size == 0 {
        return Err(LeapError::Config(
            "sample_task_batch: batch_size must be >= 1".into(),
        ));
    }
    match mode {
        SamplingMode::WithReplacement => Ok((0..batch_size)
            .map(|_| &dist.tasks[rng.random_range(0..dist.len())])
            .collect()),
        SamplingMode::WithoutReplacement => {
            if batch_size > dist.len() {
                return Err(LeapError::Config(format!(
                    "sample_task_batch: batch_size {batch_size} exceeds distribution size {} \
                     without replacement",
                    dist.len()
                )));
            }
            Ok(index::sample(rng, dist.len(), batch_size)
                .iter()
                .map(|i| &dist.tasks[i])
                .collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Family generators
// ---------------------------------------------------------------------------

/// Generator for random quadratic tasks: SPD matrices with eigenvalues in
/// `eigenvalue_range`, centers uniform in a cube.
#[derive(Debug, Clone)]
pub struct QuadraticFamily {
    pub dim: usize,
    pub eigenvalue_range: (f64, f64),
    pub center_scale: f64,
}

impl Default for QuadraticFamily {
    fn default() -> Self {
        QuadraticFamily {
            dim: 5,
            eigenvalue_range: (0.5, 2.0),
            center_scale: 1.0,
        }
    }
}

impl QuadraticFamily {
    pub fn generate(
        &self,
        count: usize,
        family_seed: u64,
        inner: &InnerRunSpec,
    ) -> Result<TaskDistribution> {
        if self.dim == 0 {
            return Err(LeapError::Config(
                "QuadraticFamily: dim must be >= 1".into(),
            ));
        }
        if !(self.center_scale.is_finite() && self.center_scale >= 0.0) {
            return Err(LeapError::Config(format!(
                "QuadraticFamily: invalid center_scale {}",
                self.center_scale
            )));
        }
        let mut tasks = Vec::with_capacity(count);
        for t in 0..count as u64 {
            let mut params = rng::stream(&[family_seed, SALT_TASK_PARAMS, t]);
            let matrix = linalg::random_spd(self.dim, self.eigenvalue_range, &mut params)?;
            let center: Vec<f64> = (0..self.dim)
                .map(|_| {
                    if self.center_scale > 0.0 {
                        params.random_range(-self.center_scale..self.center_scale)
                    } else {
                        0.0
                    }
                })
                .collect();
            let objective = Objective::Quadratic(QuadraticSpec::new(matrix, center)?);
            let data_seed = rng::derive_seed(&[family_seed, SALT_DATASET, t]);
            tasks.push(Task::new(objective, data_seed, inner)?);
        }
        TaskDistribution::new(tasks)
    }
}

/// Generator for sinusoid regression tasks with amplitudes and phases drawn
/// uniformly from the given ranges.
#[derive(Debug, Clone)]
pub struct SinusoidFamily {
    pub amplitude_range: (f64, f64),
    pub phase_range: (f64, f64),
    pub hidden_units: usize,
    pub noise_std: f64,
}

impl Default for SinusoidFamily {
    fn default() -> Self {
        SinusoidFamily {
            amplitude_range: (0.1, 5.0),
            phase_range: (0.0, std::f64::consts::PI),
            hidden_units: 8,
            noise_std: 0.1,
        }
    }
}

impl SinusoidFamily {
    pub fn generate(
        &self,
        count: usize,
        family_seed: u64,
        inner: &InnerRunSpec,
    ) -> Result<TaskDistribution> {
        let (alo, ahi) = self.amplitude_range;
        if !(0.1..=5.0).contains(&alo) || !(0.1..=5.0).contains(&ahi) || ahi < alo {
            return Err(LeapError::Config(format!(
                "SinusoidFamily: amplitude_range ({alo}, {ahi}) outside [0.1, 5.0]"
            )));
        }
        let (plo, phi) = self.phase_range;
        if !(plo.is_finite() && phi.is_finite() && phi >= plo) {
            return Err(LeapError::Config(format!(
                "SinusoidFamily: invalid phase_range ({plo}, {phi})"
            )));
        }
        let mut tasks = Vec::with_capacity(count);
        for t in 0..count as u64 {
            let mut params = rng::stream(&[family_seed, SALT_TASK_PARAMS, t]);
            let amplitude = if ahi > alo {
                params.random_range(alo..ahi)
            } else {
                alo
            };
            let phase = if phi > plo {
                params.random_range(plo..phi)
            } else {
                plo
            };
            let spec = SinusoidSpec::new(amplitude, phase, self.hidden_units, self.noise_std)?;
            let data_seed = rng::derive_seed(&[family_seed, SALT_DATASET, t]);
            tasks.push(Task::new(Objective::Sinusoid(spec), data_seed, inner)?);
        }
        TaskDistribution::new(tasks)
    }
}

/// Generator for two-blob classification tasks: a random separation vector
/// per task, shared noise level and architecture.
#[derive(Debug, Clone)]
pub struct ClassifyFamily {
    pub separation_range: (f64, f64),
    pub noise_std: f64,
    pub hidden_units: usize,
}

impl Default for ClassifyFamily {
    fn default() -> Self {
        ClassifyFamily {
            separation_range: (1.0, 3.0),
            noise_std: 0.5,
            hidden_units: 6,
        }
    }
}

impl ClassifyFamily {
    pub fn generate(
        &self,
        count: usize,
        family_seed: u64,
        inner: &InnerRunSpec,
    ) -> Result<TaskDistribution> {
        let (slo, shi) = self.separation_range;
        if !(slo > 0.0 && shi >= slo && shi.is_finite()) {
            return Err(LeapError::Config(format!(
                "ClassifyFamily: invalid separation_range ({slo}, {shi})"
            )));
        }
        let mut tasks = Vec::with_capacity(count);
        for t in 0..count as u64 {
            let mut params = rng::stream(&[family_seed, SALT_TASK_PARAMS, t]);
            let angle = params.random_range(0.0..std::f64::consts::TAU);
            let separation = if shi > slo {
                params.random_range(slo..shi)
            } else {
                slo
            };
            let half = [
                0.5 * separation * angle.cos(),
                0.5 * separation * angle.sin(),
            ];
            let spec = ClassifySpec::new(
                [-half[0], -half[1]],
                half,
                self.noise_std,
                self.hidden_units,
            )?;
            let data_seed = rng::derive_seed(&[family_seed, SALT_DATASET, t]);
            tasks.push(Task::new(Objective::Classify(spec), data_seed, inner)?);
        }
        TaskDistribution::new(tasks)
    }
}
