//! Texture transfer with preset texture feature maps.
//!
//! A small feed-forward stylization network split into a shallow branch
//! (content semantics and color) and a deep branch (texture). The deep
//! branch only ever sees standard-normal noise, so its output for a given
//! seed can be captured once as a [`Preset`] and fused with the shallow
//! features of any content image, skipping the deep encoder at inference.
//!
//! The crate is `no_std` with `alloc`. Enable `parallel` to spread kernels
//! across a rayon pool; outputs are bit-identical for any thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod arch;
mod error;
pub mod flops;
pub mod kernels;
pub mod net;
pub mod noise;
pub mod preset;
pub mod tensor;

pub use arch::{Activation, ArchSpec, LayerKind, LayerSpec, SubnetId, Variant};
pub use error::{Error, Result};
pub use flops::{count_flops, FlopPath, FlopReport, LayerFlops};
pub use kernels::{ConvParams, DwSepParams, NormParams, INSTANCE_NORM_EPS};
pub use net::{FusionConfig, Init, Layer, Network, ParamEntry, PipelineOutputs, Subnet};
pub use noise::{sample_noise, NoiseRng};
pub use preset::{capture_preset, fit_preset, stylize_with_preset, Preset, PRESET_FORMAT_VERSION};
pub use tensor::{Shape, Tensor};
