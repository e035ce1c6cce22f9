//! Seeded standard-normal noise.
//!
//! The generator is pinned so any implementation can reproduce a preset's
//! noise from its seed:
//!
//! 1. State: xoshiro256++ seeded from the `u64` seed by SplitMix64
//!    (four successive SplitMix64 outputs fill the state words).
//! 2. Uniform: `u = ((x >> 11) as f64 + 0.5) * 2^-53`, strictly inside `(0, 1)`.
//! 3. Normal pairs via Box–Muller in f64: `r = sqrt(-2 ln u1)`,
//!    `z0 = r cos(2 pi u2)`, `z1 = r sin(2 pi u2)`; emitted `z0` then `z1`,
//!    each rounded to f32.
//! 4. A `(1, 3, H, W)` noise image is filled in row-major NCHW order.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::arch::{DOWNSAMPLE_FACTOR, IMAGE_CHANNELS};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone)]
pub struct NoiseRng {
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl NoiseRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn fill_normal(&mut self, out: &mut [f32], std: f32) {
        for v in out {
            *v = (self.next_normal() as f32) * std;
        }
    }
}

/// A `(1, 3, height, width)` tensor of i.i.d. N(0, 1) samples.
pub fn sample_noise(seed: u64, height: usize, width: usize) -> Result<Tensor> {
    if !height.is_multiple_of(DOWNSAMPLE_FACTOR)
        || !width.is_multiple_of(DOWNSAMPLE_FACTOR)
        || height == 0
        || width == 0
    {
        return Err(Error::IndivisibleDims {
            op: "sample_noise",
            height,
            width,
            factor: DOWNSAMPLE_FACTOR,
        });
    }
    let mut t = Tensor::zeros(Shape::new(1, IMAGE_CHANNELS, height, width));
    NoiseRng::new(seed).fill_normal(t.data_mut(), 1.0);
    Ok(t)
}
