//! Seeded patch extraction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::{stream_rng, tag};

/// Extracts `count` square patches of side `size`.
///
/// With `non_overlapping`, patches are grid-aligned cells sampled without
/// replacement, so the request is infeasible once `count` exceeds
/// `floor(h / size) * floor(w / size)`. Otherwise patch corners are uniform
/// over all valid positions. Deterministic given `seed`.
pub fn extract_patches(
    img: &ImageTensor,
    size: usize,
    count: usize,
    non_overlapping: bool,
    seed: u64,
) -> Result<Vec<ImageTensor>> {
    let (h, w) = (img.height(), img.width());
    if size < 1 || size > h.min(w) {
        return Err(Error::Infeasible(format!(
            "patch size {size} exceeds image {h}x{w}"
        )));
    }
    let mut rng = stream_rng(seed, &[tag::PATCH]);
    let corners: Vec<(usize, usize)> = if non_overlapping {
        let cells_y = h / size;
        let cells_x = w / size;
        let total = cells_y * cells_x;
        if count > total {
            return Err(Error::Infeasible(format!(
                "{count} non-overlapping patches of size {size} requested, image holds {total}"
            )));
        }
        let mut cells: Vec<usize> = (0..total).collect();
        cells.shuffle(&mut rng);
        cells
            .into_iter()
            .take(count)
            .map(|i| ((i / cells_x) * size, (i % cells_x) * size))
            .collect()
    } else {
        (0..count)
            .map(|_| (rng.gen_range(0..=h - size), rng.gen_range(0..=w - size)))
            .collect()
    };

    corners
        .into_iter()
        .map(|(top, left)| {
            let view = img
                .data()
                .slice(ndarray::s![.., top..top + size, left..left + size]);
            ImageTensor::new(view.to_owned())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn exhaustive_grid_is_a_permutation() {
        let img = crate::degrade::synth_texture_image(1, 512, 512).unwrap();
        let patches = extract_patches(&img, 128, 16, true, 3).unwrap();
        assert_eq!(patches.len(), 16);
        // Recover the corner of each patch by matching against the source.
        let mut corners = BTreeSet::new();
        for p in &patches {
            let mut found = None;
            'scan: for cy in 0..4 {
                for cx in 0..4 {
                    let view = img
                        .data()
                        .slice(ndarray::s![.., cy * 128..(cy + 1) * 128, cx * 128..(cx + 1) * 128]);
                    if view == p.data().view() {
                        found = Some((cy, cx));
                        break 'scan;
                    }
                }
            }
            corners.insert(found.expect("patch must be one of the grid cells"));
        }
        assert_eq!(corners.len(), 16);
    }

    #[test]
    fn infeasible_count_is_rejected() {
        let img = ImageTensor::constant(1, 512, 512, 0.5).unwrap();
        assert!(extract_patches(&img, 128, 17, true, 3).is_err());
    }

    #[test]
    fn oversized_patch_is_rejected() {
        let img = ImageTensor::constant(1, 64, 64, 0.5).unwrap();
        assert!(extract_patches(&img, 65, 1, false, 0).is_err());
    }

    #[test]
    fn same_seed_same_patches() {
        let img = crate::degrade::synth_texture_image(2, 128, 128).unwrap();
        for overlap in [false, true] {
            let a = extract_patches(&img, 32, 6, overlap, 11).unwrap();
            let b = extract_patches(&img, 32, 6, overlap, 11).unwrap();
            assert_eq!(a, b);
            let c = extract_patches(&img, 32, 6, overlap, 12).unwrap();
            assert_ne!(a, c);
        }
    }
}
