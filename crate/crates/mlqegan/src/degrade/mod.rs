//! Dataset fabrication: patch extraction, anti-aliased downsampling, smoke
//! simulation, procedural toy textures, and expansion of raw pairs into the
//! per-level effective training set.

mod noise;
mod pairs;
mod patches;
mod resample;
mod smoke;
mod texture;

pub use noise::value_noise_field;
pub use pairs::{expand_to_effective_set, make_raw_pair, LevelStreams, RawPair};
pub use patches::extract_patches;
pub use resample::{
    antialias_downsample, gaussian_blur, gaussian_blur_field, gaussian_kernel, upsample_bilinear,
};
pub use smoke::{simulate_smoke, transmission_field, SmokeParams};
pub use texture::synth_texture_image;
