//! Run configuration: loading, defaulting, validation and the
//! resolution-chain arithmetic shared by all other modules.
//!
//! Configs are hierarchical TOML (top-level keys plus `[capacity]`,
//! `[dataset]` and `[sweep]` sections). Every field has a default; a config
//! file only needs to name what it overrides. `validate_config` fills the
//! defaults and rejects the first violated invariant with its field path.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::SmokeParams;
use crate::error::{Error, Result};
use crate::losses::AdvMode;
use crate::models::{generator_param_count, GeneratorSpec};

/// A quality level in the chain: level 1 is the lowest-quality input,
/// level `L + 1` the highest-quality truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityLevel {
    /// Index in `[1, L + 1]`.
    pub index: usize,
    /// Resolution multiplier over the level-1 (lowest) resolution.
    pub resolution_scale: usize,
}

/// Which experiment a sweep reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepTask {
    #[serde(rename = "sr4")]
    Sr4,
    #[serde(rename = "sr8")]
    Sr8,
    #[serde(rename = "sr4+smoke")]
    Sr4Smoke,
    #[serde(rename = "sr8+smoke")]
    Sr8Smoke,
}

impl SweepTask {
    pub fn levels(self) -> usize {
        match self {
            SweepTask::Sr4 | SweepTask::Sr4Smoke => 2,
            SweepTask::Sr8 | SweepTask::Sr8Smoke => 3,
        }
    }

    pub fn smoke(self) -> bool {
        matches!(self, SweepTask::Sr4Smoke | SweepTask::Sr8Smoke)
    }
}

/// Per-level network capacities. Entry `l - 1` describes level `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub res_blocks: Vec<usize>,
    pub channels: Vec<usize>,
    pub disc_blocks: Vec<usize>,
    pub disc_base_channels: Vec<usize>,
}

/// Dataset fabrication parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Directory holding (or receiving) the dataset, relative to the cwd
    /// unless absolute.
    pub data_dir: String,
    /// Side length of the square procedural source images.
    pub source_size: usize,
    /// Side length of the level-1 (lowest-quality) patches.
    pub patch_low: usize,
    /// Training pair counts for the intermediate levels `2..=L`
    /// (one entry per level; empty selects the defaults).
    pub train_mid: Vec<usize>,
    /// Pool of highest-level training pairs (sweeps subsample from it).
    pub train_high: usize,
    pub val: usize,
    pub test: usize,
    /// Degrade low-quality inputs with simulated smoke.
    pub smoke: bool,
    pub smoke_params: SmokeParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            source_size: 512,
            patch_low: 64,
            train_mid: Vec::new(),
            train_high: 160,
            val: 32,
            test: 128,
            smoke: false,
            smoke_params: SmokeParams::default(),
        }
    }
}

/// Data-scarcity sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Highest-quality pair counts to sweep over (ascending).
    pub high_counts: Vec<usize>,
    /// Number of intermediate-level pairs given to the multilevel model.
    pub mid_count: usize,
    /// One independent training run per seed per grid cell.
    pub seeds: Vec<u64>,
    pub task: SweepTask,
    /// Training epochs per sweep cell (kept small; full runs use `epochs`).
    pub epochs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            high_counts: vec![8, 32, 128],
            mid_count: 512,
            seeds: vec![1, 2, 3],
            task: SweepTask::Sr4,
            epochs: 40,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Number of generator/discriminator levels `L`.
    pub levels: usize,
    /// Per-level upscaling factors (empty selects all 2).
    pub per_level_scale: Vec<usize>,
    /// Per-level loss weights `lambda_l` (empty selects the defaults:
    /// 1e-4 for all but the last level, 1 for the last).
    pub lambda: Vec<f64>,
    /// Per-level adversarial weights `alpha_l` (empty selects 3e-5 each).
    pub alpha: Vec<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub initial_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fraction of `epochs` spent on each per-level initialization stage.
    pub init_epoch_fraction: f64,
    /// Generator adversarial mode; the saturating form is the literal
    /// `log(1 - D)` objective.
    pub adv_mode: AdvMode,
    /// Save a checkpoint every N epochs (0 = final checkpoint only).
    pub ckpt_every: usize,
    pub capacity: CapacityConfig,
    pub dataset: DatasetConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            per_level_scale: Vec::new(),
            lambda: Vec::new(),
            alpha: Vec::new(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            initial_lr: 0.002,
            epochs: 500,
            batch_size: 8,
            seed: 7,
            init_epoch_fraction: 0.1,
            adv_mode: AdvMode::NonSaturating,
            ckpt_every: 0,
            capacity: CapacityConfig::default(),
            dataset: DatasetConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Default generator capacity schedule: 8 blocks / 64 channels at level 1,
/// then roughly halving blocks and shrinking widths.
fn default_generator_schedule(levels: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    const BLOCKS: [usize; 4] = [8, 4, 2, 1];
    const CHANNELS: [usize; 4] = [64, 48, 32, 24];
    if levels > BLOCKS.len() {
        return Err(Error::Config(format!(
            "capacity: no default schedule for {levels} levels; set capacity.res_blocks and capacity.channels explicitly"
        )));
    }
    Ok((BLOCKS[..levels].to_vec(), CHANNELS[..levels].to_vec()))
}

fn default_disc_schedule(levels: usize) -> (Vec<usize>, Vec<usize>) {
    let blocks = (0..levels).map(|l| 4usize.saturating_sub(l).max(1)).collect();
    let base = vec![32; levels];
    (blocks, base)
}

impl RunConfig {
    /// Parses and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parses and validates TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        validate_config(cfg)
    }

    /// Serializes the fully-defaulted config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// SHA-256 of the canonical serialized config; checkpoints embed it so
    /// that a model is never restored under a different topology.
    pub fn hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        hasher.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Overall enhancement factor: product of the per-level scales.
    pub fn total_scale(&self) -> usize {
        self.per_level_scale.iter().product()
    }

    /// Resolution multiplier of quality level `index` in `[1, L + 1]` over
    /// the level-1 resolution.
    pub fn resolution_scale(&self, index: usize) -> usize {
        assert!(
            (1..=self.levels + 1).contains(&index),
            "level index {index} outside [1, {}]",
            self.levels + 1
        );
        self.per_level_scale[..index - 1].iter().product()
    }

    /// All quality levels with their resolution multipliers.
    pub fn quality_levels(&self) -> Vec<QualityLevel> {
        (1..=self.levels + 1)
            .map(|index| QualityLevel {
                index,
                resolution_scale: self.resolution_scale(index),
            })
            .collect()
    }

    /// Side length of the truth patches (level `L + 1`).
    pub fn patch_high(&self) -> usize {
        self.dataset.patch_low * self.total_scale()
    }

    /// Generator capacity of level `l` (1-based).
    pub fn generator_spec(&self, level: usize) -> GeneratorSpec {
        GeneratorSpec {
            level,
            scale: self.per_level_scale[level - 1],
            n_res_blocks: self.capacity.res_blocks[level - 1],
            n_channels: self.capacity.channels[level - 1],
        }
    }

    /// Discriminator capacity of level `l` (1-based).
    pub fn discriminator_spec(&self, level: usize) -> crate::models::DiscriminatorSpec {
        crate::models::DiscriminatorSpec {
            level,
            n_conv_blocks: self.capacity.disc_blocks[level - 1],
            base_channels: self.capacity.disc_base_channels[level - 1],
        }
    }
}

/// Spatial dimensions of every quality level for a given base size.
/// Element `m - 1` holds the dims of level `m`; strictly increasing.
pub fn resolution_chain(cfg: &RunConfig, base_h: usize, base_w: usize) -> Vec<(usize, usize)> {
    assert!(base_h >= 1 && base_w >= 1, "base dims must be >= 1");
    (1..=cfg.levels + 1)
        .map(|m| {
            let s = cfg.resolution_scale(m);
            (base_h * s, base_w * s)
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

/// Fills defaults and checks every config invariant, reporting the first
/// violation with its field path. Idempotent: validating a validated config
/// returns it unchanged.
pub fn validate_config(mut cfg: RunConfig) -> Result<RunConfig> {
    let l = cfg.levels;
    ensure(l >= 1, || format!("levels: must be >= 1, got {l}"))?;

    if cfg.per_level_scale.is_empty() {
        cfg.per_level_scale = vec![2; l];
    }
    ensure(cfg.per_level_scale.len() == l, || {
        format!(
            "per_level_scale: length {} does not match levels {l}",
            cfg.per_level_scale.len()
        )
    })?;
    for (i, &s) in cfg.per_level_scale.iter().enumerate() {
        ensure(s >= 2, || format!("per_level_scale[{i}]: must be >= 2, got {s}"))?;
    }

    if cfg.lambda.is_empty() {
        cfg.lambda = (0..l).map(|i| if i + 1 == l { 1.0 } else { 1e-4 }).collect();
    }
    ensure(cfg.lambda.len() == l, || {
        format!("lambda: length {} does not match levels {l}", cfg.lambda.len())
    })?;
    for (i, &v) in cfg.lambda.iter().enumerate() {
        ensure(v.is_finite() && v >= 0.0, || {
            format!("lambda[{i}]: must be a finite non-negative real, got {v}")
        })?;
    }

    if cfg.alpha.is_empty() {
        cfg.alpha = vec![3e-5; l];
    }
    ensure(cfg.alpha.len() == l, || {
        format!("alpha: length {} does not match levels {l}", cfg.alpha.len())
    })?;
    for (i, &v) in cfg.alpha.iter().enumerate() {
        ensure(v.is_finite() && v >= 0.0, || {
            format!("alpha[{i}]: must be a finite non-negative real, got {v}")
        })?;
    }

    ensure((0.0..1.0).contains(&cfg.adam_beta1), || {
        format!("adam_beta1: must lie in [0, 1), got {}", cfg.adam_beta1)
    })?;
    ensure((0.0..1.0).contains(&cfg.adam_beta2), || {
        format!("adam_beta2: must lie in [0, 1), got {}", cfg.adam_beta2)
    })?;
    ensure(cfg.adam_eps > 0.0, || {
        format!("adam_eps: must be positive, got {}", cfg.adam_eps)
    })?;
    ensure(cfg.initial_lr > 0.0, || {
        format!("initial_lr: must be positive, got {}", cfg.initial_lr)
    })?;
    ensure(cfg.epochs >= 1, || "epochs: must be >= 1".into())?;
    ensure(cfg.batch_size >= 1, || "batch_size: must be >= 1".into())?;
    ensure((0.0..=1.0).contains(&cfg.init_epoch_fraction), || {
        format!(
            "init_epoch_fraction: must lie in [0, 1], got {}",
            cfg.init_epoch_fraction
        )
    })?;

    // Capacity schedule.
    if cfg.capacity.res_blocks.is_empty() && cfg.capacity.channels.is_empty() {
        let (blocks, channels) = default_generator_schedule(l)?;
        cfg.capacity.res_blocks = blocks;
        cfg.capacity.channels = channels;
    }
    ensure(cfg.capacity.res_blocks.len() == l, || {
        format!(
            "capacity.res_blocks: length {} does not match levels {l}",
            cfg.capacity.res_blocks.len()
        )
    })?;
    ensure(cfg.capacity.channels.len() == l, || {
        format!(
            "capacity.channels: length {} does not match levels {l}",
            cfg.capacity.channels.len()
        )
    })?;
    for (i, &c) in cfg.capacity.channels.iter().enumerate() {
        ensure(c >= 1, || format!("capacity.channels[{i}]: must be >= 1"))?;
    }
    if cfg.capacity.disc_blocks.is_empty() && cfg.capacity.disc_base_channels.is_empty() {
        let (blocks, base) = default_disc_schedule(l);
        cfg.capacity.disc_blocks = blocks;
        cfg.capacity.disc_base_channels = base;
    }
    ensure(cfg.capacity.disc_blocks.len() == l, || {
        format!(
            "capacity.disc_blocks: length {} does not match levels {l}",
            cfg.capacity.disc_blocks.len()
        )
    })?;
    ensure(cfg.capacity.disc_base_channels.len() == l, || {
        format!(
            "capacity.disc_base_channels: length {} does not match levels {l}",
            cfg.capacity.disc_base_channels.len()
        )
    })?;
    for (i, &c) in cfg.capacity.disc_base_channels.iter().enumerate() {
        ensure(c >= 1, || {
            format!("capacity.disc_base_channels[{i}]: must be >= 1")
        })?;
    }

    // Progressively fewer generator parameters at higher levels.
    let counts: Vec<usize> = (1..=l)
        .map(|lv| generator_param_count(&cfg.generator_spec(lv), 3))
        .collect();
    for i in 1..counts.len() {
        ensure(counts[i] < counts[i - 1], || {
            format!(
                "capacity: generator parameter count must strictly decrease across levels, \
                 but level {} has {} and level {} has {}",
                i,
                counts[i - 1],
                i + 1,
                counts[i]
            )
        })?;
    }

    // Dataset geometry.
    let ds = &cfg.dataset;
    ensure(ds.patch_low >= 8, || {
        format!("dataset.patch_low: must be >= 8, got {}", ds.patch_low)
    })?;
    let patch_high = ds.patch_low * cfg.per_level_scale.iter().product::<usize>();
    ensure(ds.source_size >= 64, || {
        format!("dataset.source_size: must be >= 64, got {}", ds.source_size)
    })?;
    ensure(ds.source_size >= patch_high, || {
        format!(
            "dataset.source_size: must be >= the truth patch size {patch_high}, got {}",
            ds.source_size
        )
    })?;
    if cfg.dataset.train_mid.is_empty() {
        cfg.dataset.train_mid = vec![512; l - 1];
    }
    ensure(cfg.dataset.train_mid.len() == l - 1, || {
        format!(
            "dataset.train_mid: expected one count per intermediate level ({} entries), got {}",
            l - 1,
            cfg.dataset.train_mid.len()
        )
    })?;
    cfg.dataset.smoke_params.validate().map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("dataset.smoke_params.{msg}")),
        other => other,
    })?;

    // Discriminator inputs must survive their stride-2 stacks.
    for lv in 1..=l {
        let input = cfg.dataset.patch_low * cfg.resolution_scale(lv + 1);
        let shrink = 1usize << cfg.capacity.disc_blocks[lv - 1];
        ensure(input >= shrink, || {
            format!(
                "capacity.disc_blocks[{}]: {} stride-2 blocks need input >= {shrink}, \
                 but level-{} patches are {input} px",
                lv - 1,
                cfg.capacity.disc_blocks[lv - 1],
                lv + 1
            )
        })?;
    }

    // Sweep grid.
    ensure(!cfg.sweep.high_counts.is_empty(), || {
        "sweep.high_counts: must be non-empty".into()
    })?;
    ensure(
        cfg.sweep.high_counts.windows(2).all(|w| w[0] < w[1]),
        || "sweep.high_counts: must be strictly ascending".into(),
    )?;
    ensure(!cfg.sweep.seeds.is_empty(), || "sweep.seeds: must be non-empty".into())?;
    ensure(cfg.sweep.epochs >= 1, || "sweep.epochs: must be >= 1".into())?;

    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_default_weights_validate() {
        let cfg = validate_config(RunConfig {
            levels: 2,
            lambda: vec![1e-4, 1.0],
            alpha: vec![3e-5, 3e-5],
            ..RunConfig::default()
        })
        .unwrap();
        assert_eq!(cfg.lambda, vec![1e-4, 1.0]);
        assert_eq!(cfg.alpha, vec![3e-5, 3e-5]);
    }

    #[test]
    fn default_weight_fill_matches_reported_values() {
        let two = validate_config(RunConfig::default()).unwrap();
        assert_eq!(two.lambda, vec![1e-4, 1.0]);
        let three = validate_config(RunConfig {
            levels: 3,
            ..RunConfig::default()
        })
        .unwrap();
        assert_eq!(three.lambda, vec![1e-4, 1e-4, 1.0]);
        assert_eq!(three.alpha, vec![3e-5; 3]);
    }

    #[test]
    fn lambda_length_mismatch_is_rejected_with_field_path() {
        let err = validate_config(RunConfig {
            levels: 2,
            lambda: vec![1.0],
            ..RunConfig::default()
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda"), "unexpected message: {msg}");
    }

    #[test]
    fn single_level_baseline_config_validates() {
        let cfg = validate_config(RunConfig {
            levels: 1,
            per_level_scale: vec![4],
            ..RunConfig::default()
        })
        .unwrap();
        assert_eq!(cfg.total_scale(), 4);
        assert_eq!(cfg.lambda, vec![1.0]);
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_config(RunConfig::default()).unwrap();
        let twice = validate_config(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn resolution_chain_examples() {
        let cfg = validate_config(RunConfig::default()).unwrap();
        assert_eq!(
            resolution_chain(&cfg, 64, 64),
            vec![(64, 64), (128, 128), (256, 256)]
        );

        let cfg3 = validate_config(RunConfig {
            levels: 3,
            ..RunConfig::default()
        })
        .unwrap();
        let chain = resolution_chain(&cfg3, 16, 32);
        assert_eq!(chain.last().copied(), Some((128, 256)));

        let cfg1 = validate_config(RunConfig {
            levels: 1,
            per_level_scale: vec![4],
            ..RunConfig::default()
        })
        .unwrap();
        assert_eq!(resolution_chain(&cfg1, 10, 10), vec![(10, 10), (40, 40)]);
    }

    #[test]
    fn resolution_chain_strictly_increases() {
        for levels in 1..=3 {
            let cfg = validate_config(RunConfig {
                levels,
                ..RunConfig::default()
            })
            .unwrap();
            let chain = resolution_chain(&cfg, 8, 8);
            for win in chain.windows(2) {
                assert!(win[1].0 > win[0].0 && win[1].1 > win[0].1);
            }
        }
    }

    #[test]
    fn toml_round_trip_preserves_validated_config() {
        let cfg = validate_config(RunConfig::default()).unwrap();
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_field_is_a_config_error() {
        let err = RunConfig::from_toml_str("levls = 2\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn nondecreasing_capacity_is_rejected() {
        let err = validate_config(RunConfig {
            levels: 2,
            capacity: CapacityConfig {
                res_blocks: vec![2, 2],
                channels: vec![32, 32],
                ..CapacityConfig::default()
            },
            ..RunConfig::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("capacity"));
    }
}
