//! Preset texture feature maps.
//!
//! A preset is the deep encoder's output on seeded noise. It depends only on
//! the network and the seed, never on content, so it is computed once per
//! style and fused with the shallow features of every content image.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::arch::DOWNSAMPLE_FACTOR;
use crate::error::{Error, Result};
use crate::net::{FusionConfig, Network};
use crate::noise::sample_noise;
use crate::tensor::{Shape, Tensor};

pub const PRESET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    /// `(1, C, H/4, W/4)` deep features of the source noise.
    pub features: Tensor,
    pub style_id: String,
    pub seed: u64,
    /// `(H, W)` of the noise image the features were encoded from.
    pub source_size: (usize, usize),
    pub fusion: FusionConfig,
    pub format_version: u32,
}

impl Preset {
    /// Structural checks against the network that will consume the preset.
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        if self.format_version != PRESET_FORMAT_VERSION {
            return Err(Error::InvalidPreset(format!(
                "format version {} (supported: {PRESET_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let s = self.features.shape();
        let (h, w) = self.source_size;
        let expected = Shape::new(
            1,
            net.feature_channels(),
            h / DOWNSAMPLE_FACTOR,
            w / DOWNSAMPLE_FACTOR,
        );
        if h % DOWNSAMPLE_FACTOR != 0
            || w % DOWNSAMPLE_FACTOR != 0
            || s != expected
            || s.plane() == 0
        {
            return Err(Error::InvalidPreset(format!(
                "features {s} do not fit source size {h}x{w} for a {}-channel network",
                net.feature_channels()
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::InvalidPreset(
                "features contain non-finite values".into(),
            ));
        }
        Ok(())
    }
}

/// Encode seeded noise of the given size with the deep encoder.
pub fn capture_preset(
    net: &Network,
    seed: u64,
    height: usize,
    width: usize,
    style_id: &str,
) -> Result<Preset> {
    let noise = sample_noise(seed, height, width)?;
    let features = net.enc_deep(&noise)?;
    Ok(Preset {
        features,
        style_id: style_id.into(),
        seed,
        source_size: (height, width),
        fusion: FusionConfig::default(),
        format_version: PRESET_FORMAT_VERSION,
    })
}

/// Tile the preset features periodically over `(target_h, target_w)`.
///
/// Equal sizes return the features unchanged. Tiling keeps the texture
/// scale; seams appear where the wrap is not itself periodic.
pub fn fit_preset(preset: &Preset, target_h: usize, target_w: usize) -> Result<Tensor> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidParam(
            "fit_preset target must be at least 1x1".into(),
        ));
    }
    let s = preset.features.shape();
    if (s.h, s.w) == (target_h, target_w) {
        return Ok(preset.features.clone());
    }
    if s.plane() == 0 {
        return Err(Error::InvalidPreset("empty feature map".into()));
    }
    let f = &preset.features;
    Ok(Tensor::from_fn(
        Shape::new(s.n, s.c, target_h, target_w),
        |n, c, y, x| f.get(n, c, y % s.h, x % s.w),
    ))
}

/// `Dec_f(lambda_s * Dae(Enc_s(content)) + lambda_d * preset)` without running the deep encoder.
pub fn stylize_with_preset(
    net: &Network,
    preset: &Preset,
    content: &Tensor,
    cfg: &FusionConfig,
) -> Result<Tensor> {
    preset.validate_for(net)?;
    let f_s = net.enc_shallow(content)?;
    let fs = f_s.shape();
    let tile = fit_preset(preset, fs.h, fs.w)?;
    let f_d = if fs.n == 1 {
        tile
    } else {
        let copies: Vec<Tensor> = (0..fs.n).map(|_| tile.clone()).collect();
        Tensor::concat_batch(&copies)?
    };
    net.dec_fusion(&f_s, &f_d, cfg)
}
