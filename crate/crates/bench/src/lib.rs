//! Shared fixtures for the benchmarks.

use ashgan_core::dataset::{ImagePair, PixelDomain, PixelTensor};
use ashgan_core::nn::{seeded_rng, Tensor};
use rand::Rng as _;

/// Uniform values in [-1, 1].
pub fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let data = (0..shape.iter().product())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}

/// A normalised pair of random square images.
pub fn random_pair(size: usize, seed: u64) -> ImagePair {
    let mut rng = seeded_rng(seed);
    let mut image = || {
        let data = (0..size * size * 3)
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect();
        PixelTensor::new(size, size, data, PixelDomain::Normalized).expect("valid image")
    };
    ImagePair::new(format!("bench{seed}"), None, image(), image()).expect("matching sizes")
}
