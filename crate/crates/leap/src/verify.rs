//! Independent oracles and named verification suites.
//!
//! Everything here cross-checks the analytic machinery of the crate against
//! a second, slower derivation: central finite differences for gradients and
//! Hessians, closed-form matrix powers for linearized inner loops,
//! brute-force grid search for the multi-task trade-off point, and direct
//! re-evaluation of path measures for step feasibility. The [`run_suite`]
//! entry point exposes a fixed set of self-contained checks by name; each
//! returns a serializable [`VerifyReport`].

use crate::error::{LeapError, Result};
use crate::execution;
use crate::geometry::{self, GeometryConfig, PathMetric};
use crate::linalg::{self, Matrix};
use crate::meta::{evaluate_transfer, random_init, run_leap, run_reptile, MetaConfig};
use crate::rng::{self, SALT_INIT, SALT_INNER_BATCH};
use crate::tasks::{
    InnerRunSpec, Objective, QuadraticSpec, SamplingMode, SinusoidFamily, Task, TaskDistribution,
};
use crate::training::{run_inner_training, walk_inner_path, Preconditioner, UpdateRule};
use rand::Rng;
use serde::Serialize;

// ---------------------------------------------------------------------------
// Finite-difference oracles
// ---------------------------------------------------------------------------

/// Smallest accepted finite-difference step.
pub const FD_STEP_MIN: f64 = 1e-8;
/// Largest accepted finite-difference step.
pub const FD_STEP_MAX: f64 = 1e-4;

fn check_fd_step(h: f64) -> Result<()> {
    if !(FD_STEP_MIN..=FD_STEP_MAX).contains(&h) {
        return Err(LeapError::Config(format!(
            "finite-difference step {h:e} outside [{FD_STEP_MIN:e}, {FD_STEP_MAX:e}]"
        )));
    }
    Ok(())
}

/// Central-difference gradient of an arbitrary scalar function.
pub fn fd_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    check_fd_step(h)?;
    let mut grad = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let plus = f(&probe);
        probe[k] = theta[k] - h;
        let minus = f(&probe);
        probe[k] = theta[k];
        grad[k] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference gradient of one frozen path segment with respect to
/// its near end.
///
/// The segment term is `‖γ̄ - γ(θ)‖^p` where the far end
/// `γ̄ = (ψ_next, loss_next)` stays frozen and the near end
/// `γ(θ) = (θ, f(θ))` moves (parameters only when the loss coordinate is
/// off). This is the quantity whose analytic gradient
/// [`geometry::pull_forward_increment`] computes, so the two must agree to
/// truncation error. The stabilized variant substitutes a coefficient
/// instead of differentiating a function and therefore has no
/// finite-difference counterpart; such configurations are rejected.
pub fn fd_segment_gradient<F>(
    loss: F,
    theta_i: &[f64],
    psi_next: &[f64],
    loss_next: f64,
    cfg: &GeometryConfig,
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    check_fd_step(h)?;
    if cfg.stabilize {
        return Err(LeapError::Unsupported(
            "fd_segment_gradient: the stabilized increment replaces the descent-direction \
             coefficient analytically and is not the gradient of any function"
                .into(),
        ));
    }
    if theta_i.len() != psi_next.len() {
        return Err(LeapError::DimensionMismatch {
            context: "fd_segment_gradient",
            expected: theta_i.len(),
            actual: psi_next.len(),
        });
    }
    let segment_term = |theta: &[f64]| -> f64 {
        let f_theta = if cfg.include_loss { loss(theta) } else { 0.0 };
        let norm =
            geometry::segment_norm_raw(theta, f_theta, psi_next, loss_next, cfg.include_loss);
        match cfg.metric {
            PathMetric::Length => norm,
            PathMetric::Energy => norm * norm,
        }
    };
    fd_gradient(segment_term, theta_i, h)
}

// ---------------------------------------------------------------------------
// Linearized inner loops
// ---------------------------------------------------------------------------

/// Dimension cap for finite-difference Hessians of network tasks.
pub const JACOBIAN_FD_MAX_DIM: usize = 50;

const FD_HESSIAN_STEP: f64 = 1e-5;

/// Symmetrized finite-difference Hessian of the task loss on a fixed batch.
fn fd_hessian(task: &Task, theta: &[f64], batch: &[usize]) -> Result<Matrix> {
    let n = theta.len();
    let mut raw = Matrix::zeros(n, n);
    let mut probe = theta.to_vec();
    for k in 0..n {
        probe[k] = theta[k] + FD_HESSIAN_STEP;
        let (_, grad_plus) = task.loss_and_grad(&probe, batch)?;
        probe[k] = theta[k] - FD_HESSIAN_STEP;
        let (_, grad_minus) = task.loss_and_grad(&probe, batch)?;
        probe[k] = theta[k];
        for r in 0..n {
            raw.set(
                r,
                k,
                (grad_plus[r] - grad_minus[r]) / (2.0 * FD_HESSIAN_STEP),
            );
        }
    }
    let mut sym = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            sym.set(r, c, 0.5 * (raw.get(r, c) + raw.get(c, r)));
        }
    }
    Ok(sym)
}

/// Jacobian of the `steps`-step inner-loop map `θ0 ↦ ψ^steps`, as the
/// ordered product of per-step linearizations `I - αⁱ Sⁱ H(ψⁱ)` along the
/// actual descent path.
///
/// Quadratic tasks use their exact constant Hessian; network tasks use a
/// symmetrized finite-difference Hessian on the batch the walk drew at each
/// step (dimension capped at [`JACOBIAN_FD_MAX_DIM`]). The walk consumes the
/// minibatch stream of meta step 0.
pub fn jacobian_chain(task: &Task, theta0: &[f64], steps: usize) -> Result<Matrix> {
    let n = task.dim();
    if theta0.len() != n {
        return Err(LeapError::DimensionMismatch {
            context: "jacobian_chain",
            expected: n,
            actual: theta0.len(),
        });
    }
    if steps == 0 {
        return Ok(Matrix::identity(n));
    }
    let exact_hessian = match task.objective() {
        Objective::Quadratic(spec) => Some(spec.matrix().clone()),
        _ => {
            if n > JACOBIAN_FD_MAX_DIM {
                return Err(LeapError::Unsupported(format!(
                    "jacobian_chain: finite-difference Hessians capped at dimension \
                     {JACOBIAN_FD_MAX_DIM}, task has {n}"
                )));
            }
            None
        }
    };
    if let Preconditioner::Diagonal(d) = task.update_rule().preconditioner() {
        if d.len() != n {
            return Err(LeapError::DimensionMismatch {
                context: "jacobian_chain preconditioner",
                expected: n,
                actual: d.len(),
            });
        }
    }

    let walked = task.with_step_budget(steps);
    let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, 0]);
    let mut visited: Vec<(Vec<f64>, Vec<usize>)> = Vec::with_capacity(steps);
    walk_inner_path(
        &walked,
        theta0,
        &mut inner_rng,
        |i, params, _loss, _grad, batch| {
            if i < steps {
                visited.push((params.to_vec(), batch.to_vec()));
            }
        },
        |_seg| {},
    )?;

    let identity = Matrix::identity(n);
    let mut jacobian = Matrix::identity(n);
    for (i, (params, batch)) in visited.iter().enumerate() {
        let hessian = match &exact_hessian {
            Some(h) => h.clone(),
            None => fd_hessian(&walked, params, batch)?,
        };
        let preconditioned = match walked.update_rule().preconditioner() {
            Preconditioner::Identity => hessian,
            Preconditioner::Diagonal(d) => Matrix::from_diagonal(d).matmul(&hessian),
        };
        let alpha = walked.update_rule().learning_rate(i);
        let step_jacobian = identity.sub(&preconditioned.scale(alpha));
        jacobian = step_jacobian.matmul(&jacobian);
    }
    Ok(jacobian)
}

/// Schatten-1 contraction ratio `‖I - J‖₁ / ‖J‖₁` of an inner-loop
/// Jacobian: small when the identity approximation of the meta gradient is
/// trustworthy, large when the inner loop bends space too much.
pub fn jacobian_precision(jacobian: &Matrix) -> Result<f64> {
    if !jacobian.is_square() {
        return Err(LeapError::Config(
            "jacobian_precision: matrix must be square".into(),
        ));
    }
    let identity = Matrix::identity(jacobian.rows());
    let numerator = linalg::schatten1(&identity.sub(jacobian))?;
    let denominator = linalg::schatten1(jacobian)?;
    if denominator <= f64::EPSILON {
        return Err(LeapError::Numerical(
            "jacobian_precision: Jacobian has vanishing Schatten-1 norm".into(),
        ));
    }
    Ok(numerator / denominator)
}

// ---------------------------------------------------------------------------
// Brute-force trade-off oracle
// ---------------------------------------------------------------------------

/// Dimension cap of the grid oracle.
pub const PARETO_MAX_DIM: usize = 3;
/// Total grid-point cap of the oracle.
pub const PARETO_MAX_GRID: usize = 2_000_000;

/// Best grid point found by [`pareto_oracle`].
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub params: Vec<f64>,
    /// Task-mean path measure at that point.
    pub mean_distance: f64,
}

/// Exhaustive grid search for the initialization minimizing the task-mean
/// path measure.
///
/// Restricted to data-free quadratic tasks (deterministic inner runs) in at
/// most [`PARETO_MAX_DIM`] dimensions, so the search is an oracle rather
/// than an estimate: every grid point's measure is exact. Grid points are
/// `lower + i · resolution` per axis, inclusive of `lower`, up to `upper`.
/// Ties resolve to the lowest grid index.
pub fn pareto_oracle(
    dist: &TaskDistribution,
    lower: &[f64],
    upper: &[f64],
    resolution: f64,
    cfg: &GeometryConfig,
) -> Result<ParetoPoint> {
    if dist.is_empty() {
        return Err(LeapError::Config(
            "pareto_oracle: empty task distribution".into(),
        ));
    }
    for task in dist.tasks() {
        if !matches!(task.objective(), Objective::Quadratic(_)) {
            return Err(LeapError::Unsupported(
                "pareto_oracle: only data-free quadratic tasks have cheap exact measures".into(),
            ));
        }
    }
    let dim = dist.dim();
    if dim > PARETO_MAX_DIM {
        return Err(LeapError::Unsupported(format!(
            "pareto_oracle: grid search capped at {PARETO_MAX_DIM} dimensions, tasks have {dim}"
        )));
    }
    if lower.len() != dim || upper.len() != dim {
        return Err(LeapError::DimensionMismatch {
            context: "pareto_oracle bounds",
            expected: dim,
            actual: lower.len().min(upper.len()),
        });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(LeapError::Config(format!(
            "pareto_oracle: resolution must be positive and finite, got {resolution}"
        )));
    }
    let mut counts = vec![0usize; dim];
    let mut total = 1usize;
    for k in 0..dim {
        if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
            return Err(LeapError::Config(format!(
                "pareto_oracle: invalid bounds on axis {k}: [{}, {}]",
                lower[k], upper[k]
            )));
        }
        counts[k] = ((upper[k] - lower[k]) / resolution + 1e-9).floor() as usize + 1;
        total = total
            .checked_mul(counts[k])
            .filter(|&t| t <= PARETO_MAX_GRID)
            .ok_or_else(|| {
                LeapError::Config(format!(
                    "pareto_oracle: grid exceeds {PARETO_MAX_GRID} points"
                ))
            })?;
    }

    let decode = |mut index: usize| -> Vec<f64> {
        let mut point = vec![0.0; dim];
        for k in 0..dim {
            let i = index % counts[k];
            index /= counts[k];
            point[k] = lower[k] + i as f64 * resolution;
        }
        point
    };
    let measures: Vec<Result<f64>> = execution::map_indexed(total, |g| {
        let point = decode(g);
        let mut sum = 0.0;
        for task in dist.tasks() {
            let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, 0]);
            let path = run_inner_training(task, &point, &mut inner_rng)?;
            sum += geometry::path_distance(&path, cfg);
        }
        Ok(sum / dist.len() as f64)
    });

    let mut best_index = 0usize;
    let mut best = f64::INFINITY;
    for (g, res) in measures.into_iter().enumerate() {
        let value = res?;
        if value < best {
            best = value;
            best_index = g;
        }
    }
    Ok(ParetoPoint {
        params: decode(best_index),
        mean_distance: best,
    })
}

// ---------------------------------------------------------------------------
// Step feasibility
// ---------------------------------------------------------------------------

/// Slack allowed when comparing path measures before and after a meta step.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Verdict of [`feasibility_check`].
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub mean_before: f64,
    pub mean_after: f64,
    /// `mean_after <= mean_before + FEASIBILITY_TOL`.
    pub feasible: bool,
}

impl FeasibilityReport {
    /// Signed change of the batch-mean measure (negative is improvement).
    pub fn change(&self) -> f64 {
        self.mean_after - self.mean_before
    }
}

/// Batch-mean path measure of inner runs started at `theta0`, using the
/// minibatch streams of the given meta step.
pub fn batch_mean_distance(
    theta0: &[f64],
    batch: &[&Task],
    cfg: &GeometryConfig,
    meta_step: usize,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(LeapError::Config("batch_mean_distance: empty batch".into()));
    }
    let distances: Vec<Result<f64>> = execution::map_indexed(batch.len(), |i| {
        let task = batch[i];
        let mut inner_rng = rng::stream(&[task.data_seed(), SALT_INNER_BATCH, meta_step as u64]);
        let path = run_inner_training(task, theta0, &mut inner_rng)?;
        Ok(geometry::path_distance(&path, cfg))
    });
    let mut sum = 0.0;
    for res in distances {
        sum += res?;
    }
    Ok(sum / batch.len() as f64)
}

/// Re-evaluates the batch-mean path measure at the old and new
/// initializations of a meta step and reports whether the step descended
/// (within [`FEASIBILITY_TOL`]). Both evaluations replay the same minibatch
/// streams, so on deterministic tasks the comparison is exact.
pub fn feasibility_check(
    theta_new: &[f64],
    theta_old: &[f64],
    batch: &[&Task],
    cfg: &GeometryConfig,
    meta_step: usize,
) -> Result<FeasibilityReport> {
    let mean_before = batch_mean_distance(theta_old, batch, cfg, meta_step)?;
    let mean_after = batch_mean_distance(theta_new, batch, cfg, meta_step)?;
    Ok(FeasibilityReport {
        mean_before,
        mean_after,
        feasible: mean_after <= mean_before + FEASIBILITY_TOL,
    })
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

/// Seed-averaged outcome of one geometry configuration.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub metric: PathMetric,
    pub include_loss: bool,
    pub stabilize: bool,
    /// Seed-averaged mean training loss per meta step.
    pub mean_loss_history: Vec<f64>,
    /// Seed-averaged mean path measure per meta step.
    pub mean_distance_history: Vec<f64>,
    /// Transfer AUC per seed (task-mean area under the training-error curve).
    pub auc_per_seed: Vec<f64>,
}

impl AblationCell {
    /// Seed-averaged transfer AUC.
    pub fn mean_auc(&self) -> f64 {
        self.auc_per_seed.iter().sum::<f64>() / self.auc_per_seed.len() as f64
    }

    /// Short cell tag, e.g. `p2+loss+stab` or `p1-loss-nostab`.
    pub fn label(&self) -> String {
        format!(
            "p{}{}{}",
            self.metric.exponent(),
            if self.include_loss { "+loss" } else { "-loss" },
            if self.stabilize { "+stab" } else { "-nostab" }
        )
    }
}

/// Minimum number of seeds an ablation must average over.
pub const ABLATION_MIN_SEEDS: usize = 3;

/// Runs the full 2×2×2 geometry ablation: metric exponent × loss coordinate
/// × stabilizer.
///
/// Cells are ordered length-before-energy, loss-off-before-on,
/// stabilizer-off-before-on. Every cell meta-trains from the same per-seed
/// random initialization (derived from the seed alone), then adapts to the
/// held-out tasks. Early stopping is disabled so histories align across
/// cells and seeds. Note the stabilizer only acts on ascending segments of
/// loss-including geometries; with the loss coordinate off, paired cells
/// coincide by construction.
pub fn run_ablation(
    train: &TaskDistribution,
    heldout: &TaskDistribution,
    base: &MetaConfig,
    eval_steps: usize,
    seeds: &[u64],
) -> Result<Vec<AblationCell>> {
    if seeds.len() < ABLATION_MIN_SEEDS {
        return Err(LeapError::Config(format!(
            "run_ablation: need at least {ABLATION_MIN_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    if train.dim() != heldout.dim() {
        return Err(LeapError::DimensionMismatch {
            context: "run_ablation",
            expected: train.dim(),
            actual: heldout.dim(),
        });
    }
    let mut cells = Vec::with_capacity(8);
    for metric in [PathMetric::Length, PathMetric::Energy] {
        for include_loss in [false, true] {
            for stabilize in [false, true] {
                let mut cfg = base.clone().with_early_stop(None);
                cfg.geometry = GeometryConfig::new(metric, include_loss, stabilize);
                let mut loss_history = vec![0.0; cfg.meta_steps];
                let mut distance_history = vec![0.0; cfg.meta_steps];
                let mut auc_per_seed = Vec::with_capacity(seeds.len());
                for &seed in seeds {
                    let mut init_rng = rng::stream(&[seed, SALT_INIT]);
                    let theta0 = random_init(train.dim(), &mut init_rng);
                    let run = run_leap(train, &cfg, theta0, seed)?;
                    for (s, report) in run.history.iter().enumerate() {
                        loss_history[s] += report.mean_loss;
                        distance_history[s] += report.mean_distance;
                    }
                    let outcomes = evaluate_transfer(&run.theta0, heldout, eval_steps, seed)?;
                    let auc = outcomes.iter().map(|o| o.auc).sum::<f64>() / outcomes.len() as f64;
                    auc_per_seed.push(auc);
                }
                let inv = 1.0 / seeds.len() as f64;
                for v in loss_history.iter_mut().chain(distance_history.iter_mut()) {
                    *v *= inv;
                }
                cells.push(AblationCell {
                    metric,
                    include_loss,
                    stabilize,
                    mean_loss_history: loss_history,
                    mean_distance_history: distance_history,
                    auc_per_seed,
                });
            }
        }
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Named suites
// ---------------------------------------------------------------------------

/// Outcome of one verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub check_name: String,
    /// `"pass"` or `"fail"`.
    pub status: String,
    /// Worst observed deviation, in the units of `tolerance`.
    pub max_error: f64,
    pub tolerance: f64,
    /// Seeds the suite exercised.
    pub seeds: Vec<u64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    fn new(name: &str, passed: bool, max_error: f64, tolerance: f64, seeds: Vec<u64>) -> Self {
        VerifyReport {
            check_name: name.to_string(),
            status: if passed { "pass" } else { "fail" }.to_string(),
            max_error,
            tolerance,
            seeds,
        }
    }
}

/// Names accepted by [`run_suite`].
pub const SUITE_NAMES: [&str; 5] = [
    "gradients",
    "theorem1",
    "jacobian",
    "reptile_reduction",
    "ablation",
];

/// Runs one named verification suite.
///
/// * `gradients` — analytic pull-forward increments against central finite
///   differences over both metrics and loss-coordinate settings, on
///   quadratic and network tasks.
/// * `theorem1` — the batch-mean path measure is non-increasing along a
///   small-rate meta run on deterministic convex quadratics.
/// * `jacobian` — linearized inner-loop chains against closed-form matrix
///   powers, and monotone growth of the contraction ratio with the inner
///   rate.
/// * `reptile` — the energy metric without loss coordinate or stabilizer
///   telescopes to endpoint interpolation at twice the meta rate.
/// * `ablation` — the 2×2×2 ablation produces aligned histories and its
///   reduction cell matches an endpoint-interpolation run.
pub fn run_suite(name: &str) -> Result<VerifyReport> {
    match name {
        "gradients" => suite_gradients(),
        "theorem1" => suite_theorem1(),
        "jacobian" => suite_jacobian(),
        "reptile_reduction" => suite_reptile(),
        "ablation" => suite_ablation(),
        other => Err(LeapError::Config(format!(
            "unknown verification suite {other:?}; available: {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

/// All four differentiable geometry configurations (stabilizer off).
fn fd_checkable_configs() -> [GeometryConfig; 4] {
    [
        GeometryConfig::new(PathMetric::Length, false, false),
        GeometryConfig::new(PathMetric::Length, true, false),
        GeometryConfig::new(PathMetric::Energy, false, false),
        GeometryConfig::new(PathMetric::Energy, true, false),
    ]
}

fn suite_gradients() -> Result<VerifyReport> {
    let tolerance = 1e-5;
    let seeds: Vec<u64> = (0..5).collect();
    let mut max_error: f64 = 0.0;
    for &seed in &seeds {
        let mut tasks: Vec<(Task, Vec<usize>)> = Vec::new();

        let mut spd_rng = rng::stream(&[seed, 201]);
        let matrix = linalg::random_spd(4, (0.5, 2.0), &mut spd_rng)?;
        let center: Vec<f64> = (0..4).map(|_| spd_rng.random_range(-1.0..1.0)).collect();
        let quad = Task::new(
            Objective::Quadratic(QuadraticSpec::new(matrix, center)?),
            seed,
            &InnerRunSpec::new(UpdateRule::constant(0.1)?, 1, 1, 0),
        )?;
        tasks.push((quad, Vec::new()));

        let family = SinusoidFamily {
            hidden_units: 3,
            ..SinusoidFamily::default()
        };
        let dist = family.generate(
            1,
            seed,
            &InnerRunSpec::new(UpdateRule::constant(0.05)?, 1, 8, 40),
        )?;
        let net = dist.tasks()[0].clone();
        let mut batch_rng = rng::stream(&[seed, 202]);
        let batch = net.sample_batch(&mut batch_rng);
        tasks.push((net, batch));

        for (task, batch) in &tasks {
            let mut point_rng = rng::stream(&[seed, 203]);
            let theta_i: Vec<f64> = (0..task.dim())
                .map(|_| point_rng.random_range(-1.0..1.0))
                .collect();
            let (loss_i, grad_i) = task.loss_and_grad(&theta_i, batch)?;
            let mut psi_next = theta_i.clone();
            linalg::axpy(&mut psi_next, -0.1, &grad_i);
            let (loss_next, _) = task.loss_and_grad(&psi_next, batch)?;

            for cfg in fd_checkable_configs() {
                let analytic = geometry::pull_forward_increment(
                    &theta_i, loss_i, &grad_i, &psi_next, loss_next, &cfg,
                )?;
                let fd = fd_segment_gradient(
                    |t| task.loss_and_grad(t, batch).expect("valid probe point").0,
                    &theta_i,
                    &psi_next,
                    loss_next,
                    &cfg,
                    1e-6,
                )?;
                let rel = linalg::distance(&analytic, &fd) / linalg::norm(&fd).max(1e-12);
                max_error = max_error.max(rel);
            }
        }
    }
    Ok(VerifyReport::new(
        "gradients",
        max_error <= tolerance,
        max_error,
        tolerance,
        seeds,
    ))
}

fn suite_theorem1() -> Result<VerifyReport> {
    let tolerance = FEASIBILITY_TOL;
    let seed = 1717u64;
    let mut task_rng = rng::stream(&[seed, 301]);
    let mut tasks = Vec::new();
    for t in 0..5u64 {
        let matrix = linalg::random_spd(6, (0.5, 2.0), &mut task_rng)?;
        let center: Vec<f64> = (0..6).map(|_| task_rng.random_range(-1.5..1.5)).collect();
        tasks.push(Task::new(
            Objective::Quadratic(QuadraticSpec::new(matrix, center)?),
            t,
            &InnerRunSpec::new(UpdateRule::constant(0.4)?, 40, 1, 0),
        )?);
    }
    let dist = TaskDistribution::new(tasks)?;
    let cfg = MetaConfig::new(GeometryConfig::energy(), 1e-2, 5, 150)?
        .with_sampling(SamplingMode::WithoutReplacement);
    let mut init_rng = rng::stream(&[seed, SALT_INIT]);
    let theta0 = random_init(6, &mut init_rng);
    let run = run_leap(&dist, &cfg, theta0, seed)?;

    let measures: Vec<f64> = run.history.iter().map(|r| r.mean_distance).collect();
    let mut max_increase: f64 = 0.0;
    for w in measures.windows(2) {
        max_increase = max_increase.max(w[1] - w[0]);
    }
    let decreased = measures.last().unwrap() < measures.first().unwrap();
    Ok(VerifyReport::new(
        "theorem1",
        max_increase <= tolerance && decreased,
        max_increase,
        tolerance,
        vec![seed],
    ))
}

fn suite_jacobian() -> Result<VerifyReport> {
    let tolerance = 1e-10;
    let eigs = [0.5, 1.0, 1.5, 2.0];
    let (alpha, steps) = (0.1, 15usize);
    let task = Task::new(
        Objective::Quadratic(QuadraticSpec::new(
            Matrix::from_diagonal(&eigs),
            vec![0.0; 4],
        )?),
        0,
        &InnerRunSpec::new(UpdateRule::constant(alpha)?, steps, 1, 0),
    )?;
    let chain = jacobian_chain(&task, &[1.0, -1.0, 0.5, 2.0], steps)?;
    let closed = Matrix::identity(4)
        .sub(&Matrix::from_diagonal(&eigs).scale(alpha))
        .power(steps);
    let mut max_error: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            max_error = max_error.max((chain.get(r, c) - closed.get(r, c)).abs());
        }
    }

    // Contraction ratio of an isotropic unit-curvature bowl: closed form
    // (1 - s) / s with shrink s = (1 - α)^K; must stay below 1/4 at the
    // small rate and grow monotonically with α.
    let mut ratios = Vec::new();
    for alpha in [0.01, 0.1, 0.5] {
        let task = Task::new(
            Objective::Quadratic(QuadraticSpec::new(Matrix::identity(4), vec![0.0; 4])?),
            0,
            &InnerRunSpec::new(UpdateRule::constant(alpha)?, 20, 1, 0),
        )?;
        let chain = jacobian_chain(&task, &[0.3, -0.7, 1.1, 0.2], 20)?;
        ratios.push(jacobian_precision(&chain)?);
    }
    let shrink = 0.99f64.powi(20);
    let expected_small = (1.0 - shrink) / shrink;
    let small_ok = (ratios[0] - expected_small).abs() < 1e-9 && ratios[0] < 0.25;
    let monotone = ratios[0] < ratios[1] && ratios[1] < ratios[2];
    Ok(VerifyReport::new(
        "jacobian",
        max_error <= tolerance && small_ok && monotone,
        max_error,
        tolerance,
        vec![0],
    ))
}

fn suite_reptile() -> Result<VerifyReport> {
    let tolerance = 1e-12;
    let seeds: Vec<u64> = (0..10).collect();
    let beta = 0.05;
    let geometry = GeometryConfig::new(PathMetric::Energy, false, false);
    let mut max_error: f64 = 0.0;
    for &seed in &seeds {
        let dist = SinusoidFamily::default().generate(
            4,
            seed,
            &InnerRunSpec::new(UpdateRule::constant(0.05)?, 10, 10, 50),
        )?;
        let mut init_rng = rng::stream(&[seed, SALT_INIT]);
        let theta0 = random_init(dist.dim(), &mut init_rng);
        let cfg = MetaConfig::new(geometry.clone(), beta, 4, 1)?
            .with_sampling(SamplingMode::WithoutReplacement);
        let leap = run_leap(&dist, &cfg, theta0.clone(), seed)?;
        let reptile = run_reptile(&dist, &cfg, 2.0 * beta, theta0, seed)?;
        for (a, b) in leap.theta0.iter().zip(&reptile.theta0) {
            max_error = max_error.max((a - b).abs());
        }
    }
    Ok(VerifyReport::new(
        "reptile_reduction",
        max_error <= tolerance,
        max_error,
        tolerance,
        seeds,
    ))
}

fn suite_ablation() -> Result<VerifyReport> {
    let tolerance = 1e-10;
    let seeds: Vec<u64> = vec![0, 1, 2];
    let inner = InnerRunSpec::new(UpdateRule::constant(0.05)?, 8, 10, 50);
    let train = SinusoidFamily::default().generate(4, 31, &inner)?;
    let heldout = SinusoidFamily::default().generate(2, 32, &inner)?;
    let beta = 0.05;
    let base = MetaConfig::new(GeometryConfig::energy(), beta, 4, 5)?
        .with_sampling(SamplingMode::WithoutReplacement);
    let cells = run_ablation(&train, &heldout, &base, 8, &seeds)?;

    let shape_ok = cells.len() == 8
        && cells.iter().all(|c| {
            c.mean_loss_history.len() == 5
                && c.mean_distance_history.len() == 5
                && c.auc_per_seed.len() == seeds.len()
                && c.mean_auc().is_finite()
        });

    // The p=2, parameters-only, unstabilized cell must replicate endpoint
    // interpolation at ε = 2β.
    let mut cfg = base.clone();
    cfg.geometry = GeometryConfig::new(PathMetric::Energy, false, false);
    let mut init_rng = rng::stream(&[seeds[0], SALT_INIT]);
    let theta0 = random_init(train.dim(), &mut init_rng);
    let leap = run_leap(&train, &cfg, theta0.clone(), seeds[0])?;
    let reptile = run_reptile(&train, &cfg, 2.0 * beta, theta0, seeds[0])?;
    let mut max_error: f64 = 0.0;
    for (a, b) in leap.theta0.iter().zip(&reptile.theta0) {
        max_error = max_error.max((a - b).abs());
    }
    Ok(VerifyReport::new(
        "ablation",
        shape_ok && max_error <= tolerance,
        max_error,
        tolerance,
        seeds,
    ))
}
