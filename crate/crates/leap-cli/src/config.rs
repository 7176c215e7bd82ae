//! TOML experiment configuration: strict parsing, validation and
//! translation into library types.
//!
//! Every section rejects unknown keys, and keys that belong to a different
//! task family than the one selected are reported by name. The full parsed
//! configuration has a stable FNV-1a hash (over its canonical JSON form)
//! that checkpoints embed, so evaluation refuses to mix initializations
//! across configurations.

use leap::error::{LeapError, Result};
use leap::geometry::{GeometryConfig, PathMetric};
use leap::meta::{MetaConfig, MetaOptimizer};
use leap::tasks::{
    ClassifyFamily, InnerRunSpec, QuadraticFamily, SamplingMode, SinusoidFamily, TaskDistribution,
};
use leap::training::{Preconditioner, Schedule, UpdateRule};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// A full experiment: task distributions, inner-loop setup, meta-training
/// setup, evaluation horizon, per-method settings, seeds and method list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSection,
    /// Held-out tasks for `evaluate` and `ablate`.
    #[serde(default)]
    pub heldout: Option<DistributionSection>,
    pub inner: InnerSection,
    pub meta: MetaSection,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub reptile: Option<ReptileSection>,
    #[serde(default)]
    pub fomaml: Option<FomamlSection>,
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
}

/// One task family plus its generation parameters. Family-specific keys are
/// optional here and validated against the selected `family` during
/// [`build_distribution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    /// `quadratic`, `sinusoid` or `classify`.
    pub family: String,
    pub count: usize,
    pub seed: u64,
    // quadratic
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalue_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_scale: Option<f64>,
    // sinusoid
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_range: Option<[f64; 2]>,
    // sinusoid and classify
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_units: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    // classify
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation_range: Option<[f64; 2]>,
}

/// Inner-loop gradient descent settings, shared by every task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    pub learning_rate: f64,
    pub steps: usize,
    /// `constant` (default) or `cosine`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine_period: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_dataset_size")]
    pub dataset_size: usize,
    #[serde(default)]
    pub full_batch: bool,
}

fn default_batch_size() -> usize {
    10
}

fn default_dataset_size() -> usize {
    50
}

/// Meta-training settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    /// `length` (exponent 1) or `energy` (exponent 2).
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default = "default_true")]
    pub include_loss: bool,
    #[serde(default)]
    pub stabilize: bool,
    pub beta: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// `sgd` (default) or `adam`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_lr: Option<f64>,
    /// `with_replacement` (default) or `without_replacement`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<String>,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_grad_norm: Option<f64>,
}

fn default_metric() -> String {
    "energy".to_string()
}

fn default_true() -> bool {
    true
}

/// Transfer-evaluation settings; `steps` defaults to the inner-loop budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReptileSection {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FomamlSection {
    pub learning_rate: f64,
}

/// Meta-training method selected in the `methods` list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Leap,
    Reptile,
    Fomaml,
    Joint,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Leap,
        Method::Reptile,
        Method::Fomaml,
        Method::Joint,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Leap => "leap",
            Method::Reptile => "reptile",
            Method::Fomaml => "fomaml",
            Method::Joint => "joint",
            Method::Random => "random",
        }
    }

    fn parse(name: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| {
                let valid: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                LeapError::Config(format!(
                    "unknown method {name:?}; expected one of: {}",
                    valid.join(", ")
                ))
            })
    }

    /// Whether `train` produces a checkpoint for this method.
    pub fn trains(self) -> bool {
        !matches!(self, Method::Random)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML experiment file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            LeapError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| LeapError::Config(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(LeapError::Config(
                "config: seeds list must not be empty".into(),
            ));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(LeapError::Config(
                "config: seeds list contains duplicates".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(LeapError::Config(
                "config: methods list must not be empty".into(),
            ));
        }
        let methods = self.methods()?;
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].contains(m) {
                return Err(LeapError::Config(format!(
                    "config: method {m} listed twice"
                )));
            }
        }
        if methods.contains(&Method::Reptile) && self.reptile.is_none() {
            return Err(LeapError::Config(
                "config: method reptile requires a [reptile] section with epsilon".into(),
            ));
        }
        if methods.contains(&Method::Fomaml) && self.fomaml.is_none() {
            return Err(LeapError::Config(
                "config: method fomaml requires a [fomaml] section with learning_rate".into(),
            ));
        }
        // Surface family/key mismatches and range errors at load time.
        self.inner_spec()?;
        build_family(&self.distribution)?;
        if let Some(heldout) = &self.heldout {
            build_family(heldout)?;
        }
        self.meta_config()?;
        Ok(())
    }

    /// Parsed method list in configuration order.
    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| Method::parse(m)).collect()
    }

    pub fn inner_spec(&self) -> Result<InnerRunSpec> {
        let inner = &self.inner;
        let schedule = match inner.schedule.as_deref().unwrap_or("constant") {
            "constant" => {
                if inner.cosine_period.is_some() {
                    return Err(LeapError::Config(
                        "config: cosine_period requires schedule = \"cosine\"".into(),
                    ));
                }
                Schedule::Constant(inner.learning_rate)
            }
            "cosine" => Schedule::Cosine {
                alpha_max: inner.learning_rate,
                period: inner.cosine_period.ok_or_else(|| {
                    LeapError::Config("config: schedule \"cosine\" requires cosine_period".into())
                })?,
            },
            other => {
                return Err(LeapError::Config(format!(
                    "config: unknown schedule {other:?}; expected constant or cosine"
                )))
            }
        };
        let rule = UpdateRule::new(schedule, Preconditioner::Identity)?;
        let mut spec = InnerRunSpec::new(rule, inner.steps, inner.batch_size, inner.dataset_size);
        if inner.full_batch {
            spec = spec.full_batch();
        }
        Ok(spec)
    }

    pub fn meta_config(&self) -> Result<MetaConfig> {
        let meta = &self.meta;
        let metric = match meta.metric.as_str() {
            "length" => PathMetric::Length,
            "energy" => PathMetric::Energy,
            other => {
                return Err(LeapError::Config(format!(
                    "config: unknown metric {other:?}; expected length or energy"
                )))
            }
        };
        let geometry = GeometryConfig::new(metric, meta.include_loss, meta.stabilize);
        let mut cfg = MetaConfig::new(geometry, meta.beta, meta.batch_size, meta.steps)?;
        cfg = match meta.optimizer.as_deref().unwrap_or("sgd") {
            "sgd" => {
                if meta.adam_lr.is_some() {
                    return Err(LeapError::Config(
                        "config: adam_lr requires optimizer = \"adam\"".into(),
                    ));
                }
                cfg
            }
            "adam" => cfg.with_optimizer(MetaOptimizer::adaptive(meta.adam_lr.unwrap_or(0.01)))?,
            other => {
                return Err(LeapError::Config(format!(
                    "config: unknown optimizer {other:?}; expected sgd or adam"
                )))
            }
        };
        cfg = match meta.sampling.as_deref().unwrap_or("with_replacement") {
            "with_replacement" => cfg.with_sampling(SamplingMode::WithReplacement),
            "without_replacement" => cfg.with_sampling(SamplingMode::WithoutReplacement),
            other => {
                return Err(LeapError::Config(format!(
                    "config: unknown sampling {other:?}; expected with_replacement or \
                     without_replacement"
                )))
            }
        };
        Ok(cfg
            .with_snapshot_every(meta.snapshot_every)
            .with_early_stop(meta.early_stop_grad_norm))
    }

    /// Steps used for transfer evaluation (defaults to the inner budget).
    pub fn eval_steps(&self) -> usize {
        self.eval.as_ref().map_or(self.inner.steps, |e| e.steps)
    }

    pub fn build_train_distribution(&self) -> Result<TaskDistribution> {
        build_distribution(&self.distribution, &self.inner_spec()?)
    }

    pub fn build_heldout_distribution(&self) -> Result<TaskDistribution> {
        let section = self.heldout.as_ref().ok_or_else(|| {
            LeapError::Config(
                "config: this command needs a [heldout] section with held-out tasks".into(),
            )
        })?;
        build_distribution(section, &self.inner_spec()?)
    }
}

enum Family {
    Quadratic(QuadraticFamily),
    Sinusoid(SinusoidFamily),
    Classify(ClassifyFamily),
}

/// Rejects keys that belong to a different family than the selected one.
fn reject_foreign_keys(section: &DistributionSection, allowed: &[&str]) -> Result<()> {
    let present: [(&str, bool); 8] = [
        ("dim", section.dim.is_some()),
        ("eigenvalue_range", section.eigenvalue_range.is_some()),
        ("center_scale", section.center_scale.is_some()),
        ("amplitude_range", section.amplitude_range.is_some()),
        ("phase_range", section.phase_range.is_some()),
        ("hidden_units", section.hidden_units.is_some()),
        ("noise_std", section.noise_std.is_some()),
        ("separation_range", section.separation_range.is_some()),
    ];
    for (key, set) in present {
        if set && !allowed.contains(&key) {
            return Err(LeapError::Config(format!(
                "config: key {key:?} does not apply to family {:?}",
                section.family
            )));
        }
    }
    Ok(())
}

fn build_family(section: &DistributionSection) -> Result<Family> {
    if section.count == 0 {
        return Err(LeapError::Config("config: task count must be >= 1".into()));
    }
    match section.family.as_str() {
        "quadratic" => {
            reject_foreign_keys(section, &["dim", "eigenvalue_range", "center_scale"])?;
            let mut family = QuadraticFamily::default();
            if let Some(dim) = section.dim {
                family.dim = dim;
            }
            if let Some([lo, hi]) = section.eigenvalue_range {
                family.eigenvalue_range = (lo, hi);
            }
            if let Some(scale) = section.center_scale {
                family.center_scale = scale;
            }
            Ok(Family::Quadratic(family))
        }
        "sinusoid" => {
            reject_foreign_keys(
                section,
                &[
                    "amplitude_range",
                    "phase_range",
                    "hidden_units",
                    "noise_std",
                ],
            )?;
            let mut family = SinusoidFamily::default();
            if let Some([lo, hi]) = section.amplitude_range {
                family.amplitude_range = (lo, hi);
            }
            if let Some([lo, hi]) = section.phase_range {
                family.phase_range = (lo, hi);
            }
            if let Some(hidden) = section.hidden_units {
                family.hidden_units = hidden;
            }
            if let Some(noise) = section.noise_std {
                family.noise_std = noise;
            }
            Ok(Family::Sinusoid(family))
        }
        "classify" => {
            reject_foreign_keys(section, &["separation_range", "noise_std", "hidden_units"])?;
            let mut family = ClassifyFamily::default();
            if let Some([lo, hi]) = section.separation_range {
                family.separation_range = (lo, hi);
            }
            if let Some(noise) = section.noise_std {
                family.noise_std = noise;
            }
            if let Some(hidden) = section.hidden_units {
                family.hidden_units = hidden;
            }
            Ok(Family::Classify(family))
        }
        other => Err(LeapError::Config(format!(
            "config: unknown task family {other:?}; expected quadratic, sinusoid or classify"
        ))),
    }
}

/// Materializes the tasks of one distribution section.
pub fn build_distribution(
    section: &DistributionSection,
    inner: &InnerRunSpec,
) -> Result<TaskDistribution> {
    match build_family(section)? {
        Family::Quadratic(f) => f.generate(section.count, section.seed, inner),
        Family::Sinusoid(f) => f.generate(section.count, section.seed, inner),
        Family::Classify(f) => f.generate(section.count, section.seed, inner),
    }
}

/// FNV-1a hash of the canonical JSON form of the configuration. Stable
/// across runs and platforms; embedded in checkpoints.
pub fn config_hash(config: &ExperimentConfig) -> Result<u64> {
    let bytes = serde_json::to_vec(config)
        .map_err(|e| LeapError::Config(format!("cannot serialize config: {e}")))?;
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(hash)
}
