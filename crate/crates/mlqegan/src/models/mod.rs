//! Per-level generators and discriminators with progressively decreasing
//! capacity, and the composed multilevel forward pass.

mod discriminator;
mod generator;
mod init;
mod spec;

pub use discriminator::{Discriminator, DiscriminatorCache, DiscriminatorGrads};
pub use generator::{Generator, GeneratorCache, GeneratorGrads};
pub use spec::{
    discriminator_param_count, generator_param_count, upsample_stages, DiscriminatorSpec,
    GeneratorSpec, EPS_PROB,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{Batch, Real};
use crate::rng::{stream_rng, tag};

const GEN_STREAM: u64 = 0;
const DISC_STREAM: u64 = 1;

/// The full chain: `L` generator/discriminator pairs. Generator `l` maps
/// level-`l` resolution to level-`l+1`; discriminator `l` judges images at
/// level-`l+1` resolution.
#[derive(Debug, Clone)]
pub struct MultilevelModel<F> {
    pub generators: Vec<Generator<F>>,
    pub discriminators: Vec<Discriminator<F>>,
    pub img_channels: usize,
}

impl<F: Real> MultilevelModel<F> {
    /// Builds and deterministically initializes the chain described by a
    /// validated config. Each network draws from its own named seed stream,
    /// so adding levels never perturbs earlier levels' initializations.
    pub fn build(cfg: &RunConfig, img_channels: usize) -> Result<Self> {
        let mut generators = Vec::with_capacity(cfg.levels);
        let mut discriminators = Vec::with_capacity(cfg.levels);
        for level in 1..=cfg.levels {
            let gspec = cfg.generator_spec(level);
            let mut grng = stream_rng(cfg.seed, &[tag::INIT, GEN_STREAM, level as u64]);
            generators.push(Generator::new(gspec, img_channels, &mut grng));
            let dspec = cfg.discriminator_spec(level);
            let mut drng = stream_rng(cfg.seed, &[tag::INIT, DISC_STREAM, level as u64]);
            discriminators.push(Discriminator::new(dspec, img_channels, &mut drng));
        }
        let model = Self {
            generators,
            discriminators,
            img_channels,
        };
        model.check_capacity()?;
        Ok(model)
    }

    pub fn levels(&self) -> usize {
        self.generators.len()
    }

    /// Progressively-fewer-parameters invariant across generator levels.
    fn check_capacity(&self) -> Result<()> {
        for pair in self.generators.windows(2) {
            let lo = generator_param_count(&pair[0].spec, self.img_channels);
            let hi = generator_param_count(&pair[1].spec, self.img_channels);
            if hi >= lo {
                return Err(Error::Config(format!(
                    "capacity: level {} has {hi} generator parameters, not fewer than level {}'s {lo}",
                    pair[1].spec.level, pair[0].spec.level
                )));
            }
        }
        Ok(())
    }

    /// Applies generators `1..=upto` in sequence (inference mode).
    pub fn compose(&self, x: &Batch<F>, upto: usize) -> Result<Batch<F>> {
        if upto < 1 || upto > self.levels() {
            return Err(Error::Shape(format!(
                "compose level {upto} outside [1, {}]",
                self.levels()
            )));
        }
        let mut a = x.clone();
        for gen in &self.generators[..upto] {
            a = gen.forward(&a)?;
        }
        Ok(a)
    }

    /// Applies generators `1..=upto`, retaining every level's output and the
    /// activation caches needed to backpropagate through the whole chain in
    /// one pass.
    #[allow(clippy::type_complexity)]
    pub fn compose_cached(
        &self,
        x: &Batch<F>,
        upto: usize,
    ) -> Result<(Vec<Batch<F>>, Vec<GeneratorCache<F>>)> {
        if upto < 1 || upto > self.levels() {
            return Err(Error::Shape(format!(
                "compose level {upto} outside [1, {}]",
                self.levels()
            )));
        }
        let mut outputs = Vec::with_capacity(upto);
        let mut caches = Vec::with_capacity(upto);
        let mut a = x.clone();
        for gen in &self.generators[..upto] {
            let (out, cache) = gen.forward_cached(&a)?;
            outputs.push(out.clone());
            caches.push(cache);
            a = out;
        }
        Ok((outputs, caches))
    }

    /// Total trainable scalars per generator level, highest first checked
    /// against the analytic count.
    pub fn generator_counts(&self) -> Vec<usize> {
        self.generators.iter().map(Generator::num_params).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, CapacityConfig, RunConfig};
    use ndarray::Array4;
    use rand::Rng;

    fn toy_cfg(levels: usize) -> RunConfig {
        validate_config(RunConfig {
            levels,
            capacity: CapacityConfig {
                res_blocks: vec![1; levels],
                channels: (0..levels).map(|l| 4 - l).collect(),
                disc_blocks: vec![1; levels],
                disc_base_channels: (0..levels).map(|l| 4 - l).collect(),
            },
            dataset: crate::config::DatasetConfig {
                patch_low: 8,
                source_size: 64,
                ..Default::default()
            },
            ..RunConfig::default()
        })
        .unwrap()
    }

    fn rand_batch(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
        let mut rng = crate::rng::stream_rng(seed, &[42]);
        Array4::from_shape_fn(shape, |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn generator_upscales_by_its_factor() {
        let cfg = toy_cfg(1);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let x = rand_batch((2, 3, 64, 64), 1);
        let y = model.generators[0].forward(&x).unwrap();
        assert_eq!(y.dim(), (2, 3, 128, 128));
        for &v in &y {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn same_seed_same_initial_parameters() {
        let cfg = toy_cfg(2);
        let a = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let b = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        for (ga, gb) in a.generators.iter().zip(&b.generators) {
            for ((na, pa), (nb, pb)) in ga.param_entries().iter().zip(gb.param_entries().iter()) {
                assert_eq!(na, nb);
                assert_eq!(pa, pb);
            }
        }
    }

    #[test]
    fn analytic_count_matches_built_network() {
        let cfg = validate_config(RunConfig::default()).unwrap();
        let model = MultilevelModel::<f32>::build(&cfg, 3).unwrap();
        for gen in &model.generators {
            assert_eq!(gen.num_params(), generator_param_count(&gen.spec, 3));
        }
        for disc in &model.discriminators {
            assert_eq!(disc.num_params(), discriminator_param_count(&disc.spec, 3));
        }
    }

    #[test]
    fn default_schedule_has_strictly_decreasing_counts() {
        let cfg = validate_config(RunConfig {
            levels: 3,
            ..RunConfig::default()
        })
        .unwrap();
        let model = MultilevelModel::<f32>::build(&cfg, 3).unwrap();
        let counts = model.generator_counts();
        assert!(counts.windows(2).all(|w| w[1] < w[0]), "{counts:?}");
    }

    #[test]
    fn compose_shape_chain() {
        // three 2x levels: 16x32 -> 128x256
        let cfg = toy_cfg(3);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let x = rand_batch((1, 3, 16, 32), 2);
        let y = model.compose(&x, 3).unwrap();
        assert_eq!(y.dim(), (1, 3, 128, 256));

        // base case and definition of composition
        let y1 = model.compose(&x, 1).unwrap();
        let direct = model.generators[0].forward(&x).unwrap();
        assert_eq!(y1, direct);
        let y2 = model.compose(&x, 2).unwrap();
        let manual = model.generators[1].forward(&y1).unwrap();
        assert_eq!(y2, manual);
    }

    #[test]
    fn compose_cached_outputs_match_eval_forward() {
        let cfg = toy_cfg(2);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let x = rand_batch((2, 3, 8, 8), 3);
        let (outs, caches) = model.compose_cached(&x, 2).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(caches.len(), 2);
        assert_eq!(outs[1], model.compose(&x, 2).unwrap());
    }

    #[test]
    fn batching_invariance() {
        let cfg = toy_cfg(1);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let batch = rand_batch((3, 3, 8, 8), 4);
        let full = model.generators[0].forward(&batch).unwrap();
        for i in 0..3 {
            let single = batch
                .index_axis(ndarray::Axis(0), i)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            let out = model.generators[0].forward(&single).unwrap();
            let diff = (&out.index_axis(ndarray::Axis(0), 0)
                - &full.index_axis(ndarray::Axis(0), i))
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-6, "batch invariance violated: {diff}");
        }
    }

    #[test]
    fn discriminator_outputs_live_inside_unit_interval() {
        let cfg = toy_cfg(1);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let x = rand_batch((16, 3, 16, 16), 5);
        let p = model.discriminators[0].forward(&x).unwrap();
        for &v in &p {
            assert!(v >= EPS_PROB && v <= 1.0 - EPS_PROB);
        }
        // no saturation at init: mean response near 0.5 on noise
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        assert!((0.2..0.8).contains(&mean), "mean disc output {mean}");
        // determinism
        let p2 = model.discriminators[0].forward(&x).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn wrong_resolution_is_rejected() {
        let cfg = toy_cfg(1);
        let model = MultilevelModel::<f64>::build(&cfg, 3).unwrap();
        let tiny = rand_batch((1, 3, 4, 4), 6);
        assert!(model.generators[0].forward(&tiny).is_err());
        let wrong_channels = rand_batch((1, 1, 16, 16), 7);
        assert!(model.discriminators[0].forward(&wrong_channels).is_err());
    }
}
