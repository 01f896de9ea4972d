//! Raw training pairs and their expansion into the per-level effective
//! training set.
//!
//! A raw pair couples the lowest-quality input with a truth image at some
//! quality level `j`. Because a level-`j` truth also supervises every level
//! below it, each raw pair expands into one instance per level `m <= j`,
//! with the target downsampled to level `m`'s resolution.

use std::collections::BTreeMap;

use crate::config::RunConfig;
use crate::degrade::antialias_downsample;
use crate::degrade::SmokeParams;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// One training pair `(low, high)` with the truth at quality level
/// `level_j` in `[2, L + 1]`.
#[derive(Debug, Clone)]
pub struct RawPair {
    pub low: ImageTensor,
    pub high: ImageTensor,
    pub level_j: usize,
}

impl RawPair {
    /// Validates the level tag and the dimension relation
    /// `high = low * resolution_scale(level_j)`.
    pub fn new(low: ImageTensor, high: ImageTensor, level_j: usize, cfg: &RunConfig) -> Result<Self> {
        if !(2..=cfg.levels + 1).contains(&level_j) {
            return Err(Error::Shape(format!(
                "pair level {level_j} outside [2, {}]",
                cfg.levels + 1
            )));
        }
        let s = cfg.resolution_scale(level_j);
        if high.height() != low.height() * s || high.width() != low.width() * s {
            return Err(Error::Shape(format!(
                "high dims {}x{} != low dims {}x{} times scale {s}",
                high.height(),
                high.width(),
                low.height(),
                low.width()
            )));
        }
        if high.channels() != low.channels() {
            return Err(Error::Shape("channel mismatch within pair".into()));
        }
        Ok(Self { low, high, level_j })
    }
}

/// Degrades a truth image down to the level-1 input: optional smoke, then
/// anti-aliased downsampling by the level's resolution scale.
pub fn make_raw_pair(
    high: &ImageTensor,
    level_j: usize,
    cfg: &RunConfig,
    smoke: Option<&SmokeParams>,
) -> Result<RawPair> {
    if !(2..=cfg.levels + 1).contains(&level_j) {
        return Err(Error::Shape(format!(
            "pair level {level_j} outside [2, {}]",
            cfg.levels + 1
        )));
    }
    let factor = cfg.resolution_scale(level_j);
    let degraded = match smoke {
        Some(p) => crate::degrade::simulate_smoke(high, p)?,
        None => high.clone(),
    };
    let low = antialias_downsample(&degraded, factor)?;
    RawPair::new(low, high.clone(), level_j, cfg)
}

/// The effective training set: per-level instance streams for levels
/// `m` in `[2, L + 1]`.
#[derive(Debug, Clone, Default)]
pub struct LevelStreams {
    streams: BTreeMap<usize, Vec<(ImageTensor, ImageTensor)>>,
}

impl LevelStreams {
    pub fn new(levels: usize) -> Self {
        let mut streams = BTreeMap::new();
        for m in 2..=levels + 1 {
            streams.insert(m, Vec::new());
        }
        Self { streams }
    }

    pub fn push(&mut self, level: usize, low: ImageTensor, target: ImageTensor) {
        self.streams.entry(level).or_default().push((low, target));
    }

    /// Instances `(X_lq, X_t)` whose target sits at quality level `m`.
    pub fn stream(&self, level: usize) -> &[(ImageTensor, ImageTensor)] {
        self.streams.get(&level).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.streams.keys().copied()
    }

    pub fn len(&self, level: usize) -> usize {
        self.stream(level).len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.values().all(Vec::is_empty)
    }

    pub fn max_len(&self) -> usize {
        self.streams.values().map(Vec::len).max().unwrap_or(0)
    }
}

/// Expands raw pairs into the effective training set: a pair at level `j`
/// contributes one instance to every stream `m` in `[2, j]`, the target
/// being the truth itself at `m = j` and an anti-aliased reduction below.
pub fn expand_to_effective_set(pairs: &[RawPair], cfg: &RunConfig) -> Result<LevelStreams> {
    let mut streams = LevelStreams::new(cfg.levels);
    for pair in pairs {
        let j = pair.level_j;
        let scale_j = cfg.resolution_scale(j);
        for m in 2..=j {
            let target = if m == j {
                pair.high.clone()
            } else {
                let factor = scale_j / cfg.resolution_scale(m);
                antialias_downsample(&pair.high, factor)?
            };
            streams.push(m, pair.low.clone(), target);
        }
    }
    Ok(streams)
}
