//! Layer tables for the four inference subnets and their structural rules.
//!
//! The shipped widths are chosen to land inside the parameter budgets of the
//! two variants while keeping most of the compute in the deep encoder, which
//! is the part a preset lets inference skip.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub const DOWNSAMPLE_FACTOR: usize = 4;
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Tfp,
    TfpL,
}

impl Variant {
    pub const fn name(self) -> &'static str {
        match self {
            Variant::Tfp => "TFP",
            Variant::TfpL => "TFP-L",
        }
    }

    /// Upper bound on trainable inference parameters.
    pub const fn param_budget(self) -> usize {
        match self {
            Variant::Tfp => 10_500,
            Variant::TfpL => 7_300,
        }
    }

    pub const fn code(self) -> u8 {
        match self {
            Variant::Tfp => 0,
            Variant::TfpL => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Tfp),
            1 => Some(Variant::TfpL),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    DwSep,
    /// Nearest-neighbour upsampling; `stride` holds the factor.
    Upsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    None,
    Relu,
    /// `(tanh(x) + 1) / 2`, mapping decoder output onto pixel range.
    ScaledTanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub norm: bool,
    pub activation: Activation,
}

impl LayerSpec {
    /// Conv + instance norm + ReLU, padded to keep `H / stride`.
    pub const fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    ) -> Self {
        Self {
            kind: LayerKind::Conv,
            in_channels,
            out_channels,
            kernel,
            stride,
            norm: true,
            activation: Activation::Relu,
        }
    }

    pub const fn dwsep(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    ) -> Self {
        Self {
            kind: LayerKind::DwSep,
            in_channels,
            out_channels,
            kernel,
            stride,
            norm: true,
            activation: Activation::Relu,
        }
    }

    pub const fn upsample(channels: usize, factor: usize) -> Self {
        Self {
            kind: LayerKind::Upsample,
            in_channels: channels,
            out_channels: channels,
            kernel: 1,
            stride: factor,
            norm: false,
            activation: Activation::None,
        }
    }

    /// Final decoder layer: no norm, scaled tanh.
    pub const fn output(in_channels: usize, kernel: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            in_channels,
            out_channels: IMAGE_CHANNELS,
            kernel,
            stride: 1,
            norm: false,
            activation: Activation::ScaledTanh,
        }
    }

    pub const fn padding(&self) -> usize {
        self.kernel / 2
    }

    pub fn param_count(&self) -> usize {
        let (cin, cout, kk) = (
            self.in_channels,
            self.out_channels,
            self.kernel * self.kernel,
        );
        let core = match self.kind {
            LayerKind::Conv => cin * cout * kk + cout,
            LayerKind::DwSep => cin * kk + cin + cin * cout + cout,
            LayerKind::Upsample => 0,
        };
        core + if self.norm { 2 * cout } else { 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubnetId {
    EncShallow,
    DecShallow,
    EncDeep,
    DecFusion,
    Dae,
}

impl SubnetId {
    pub const ALL: [SubnetId; 5] = [
        SubnetId::EncShallow,
        SubnetId::DecShallow,
        SubnetId::EncDeep,
        SubnetId::DecFusion,
        SubnetId::Dae,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            SubnetId::EncShallow => "enc_s",
            SubnetId::DecShallow => "dec_s",
            SubnetId::EncDeep => "enc_d",
            SubnetId::DecFusion => "dec_f",
            SubnetId::Dae => "dae",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub variant: Variant,
    pub enc_shallow: Vec<LayerSpec>,
    pub dec_shallow: Vec<LayerSpec>,
    pub enc_deep: Vec<LayerSpec>,
    pub dec_fusion: Vec<LayerSpec>,
    pub downsample_factor: usize,
}

impl ArchSpec {
    pub fn tfp() -> Self {
        Self::with_width(Variant::Tfp, 16)
    }

    pub fn tfp_l() -> Self {
        Self::with_width(Variant::TfpL, 12)
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Tfp => Self::tfp(),
            Variant::TfpL => Self::tfp_l(),
        }
    }

    fn with_width(variant: Variant, w: usize) -> Self {
        let stem = 8;
        let decoder = || {
            vec![
                LayerSpec::conv(w, w, 1, 1),
                LayerSpec::upsample(w, 2),
                LayerSpec::dwsep(w, stem, 3, 1),
                LayerSpec::upsample(stem, 2),
                LayerSpec::output(stem, 3),
            ]
        };
        Self {
            variant,
            enc_shallow: vec![
                LayerSpec::conv(IMAGE_CHANNELS, stem, 3, 2),
                LayerSpec::dwsep(stem, w, 3, 2),
                LayerSpec::conv(w, w, 1, 1),
            ],
            dec_shallow: decoder(),
            enc_deep: vec![
                LayerSpec::conv(IMAGE_CHANNELS, stem, 3, 2),
                LayerSpec::dwsep(stem, w, 3, 2),
                LayerSpec::dwsep(w, w, 3, 1),
                LayerSpec::dwsep(w, w, 3, 1),
                LayerSpec::dwsep(w, w, 3, 1),
                LayerSpec::conv(w, w, 3, 1),
                LayerSpec::conv(w, w, 3, 1),
            ],
            dec_fusion: decoder(),
            downsample_factor: DOWNSAMPLE_FACTOR,
        }
    }

    /// Layers of a convolutional subnet; empty for [`SubnetId::Dae`].
    pub fn layers(&self, id: SubnetId) -> &[LayerSpec] {
        match id {
            SubnetId::EncShallow => &self.enc_shallow,
            SubnetId::DecShallow => &self.dec_shallow,
            SubnetId::EncDeep => &self.enc_deep,
            SubnetId::DecFusion => &self.dec_fusion,
            SubnetId::Dae => &[],
        }
    }

    /// Channel count of the fused feature map (shared by both encoders).
    pub fn feature_channels(&self) -> usize {
        self.enc_shallow.last().map_or(0, |l| l.out_channels)
    }

    pub fn subnet_param_count(&self, id: SubnetId) -> usize {
        match id {
            SubnetId::Dae => {
                let c = self.feature_channels();
                c * c + c
            }
            _ => self.layers(id).iter().map(LayerSpec::param_count).sum(),
        }
    }

    pub fn param_count(&self) -> usize {
        SubnetId::ALL
            .iter()
            .map(|&id| self.subnet_param_count(id))
            .sum()
    }

    /// Structural checks plus the variant's parameter budget.
    pub fn validate(&self) -> Result<()> {
        if self.downsample_factor != DOWNSAMPLE_FACTOR {
            return Err(Error::InvalidArch(format!(
                "downsample factor must be {DOWNSAMPLE_FACTOR}, got {}",
                self.downsample_factor
            )));
        }
        let c = self.feature_channels();
        for id in [SubnetId::EncShallow, SubnetId::EncDeep] {
            self.check_encoder(id)?;
            let out = self.layers(id).last().map_or(0, |l| l.out_channels);
            if out != c {
                return Err(Error::InvalidArch(format!(
                    "{} outputs {out} channels, fusion needs {c}",
                    id.name()
                )));
            }
        }
        for id in [SubnetId::DecShallow, SubnetId::DecFusion] {
            self.check_decoder(id, c)?;
        }
        let count = self.param_count();
        let budget = self.variant.param_budget();
        if count > budget {
            return Err(Error::BudgetExceeded {
                variant: self.variant.name(),
                count,
                budget,
            });
        }
        Ok(())
    }

    fn check_chain(&self, id: SubnetId, input: usize) -> Result<()> {
        let layers = self.layers(id);
        if layers.is_empty() {
            return Err(Error::InvalidArch(format!("{} has no layers", id.name())));
        }
        let mut channels = input;
        for (i, l) in layers.iter().enumerate() {
            if l.in_channels != channels {
                return Err(Error::InvalidArch(format!(
                    "{}[{i}] expects {} input channels, previous layer gives {channels}",
                    id.name(),
                    l.in_channels
                )));
            }
            if l.in_channels == 0 || l.out_channels == 0 || l.stride == 0 {
                return Err(Error::InvalidArch(format!(
                    "{}[{i}] has a zero dimension",
                    id.name()
                )));
            }
            if l.kernel % 2 == 0 {
                return Err(Error::InvalidArch(format!(
                    "{}[{i}] kernel {} is even",
                    id.name(),
                    l.kernel
                )));
            }
            if l.kind == LayerKind::Upsample && l.in_channels != l.out_channels {
                return Err(Error::InvalidArch(format!(
                    "{}[{i}] upsample changes channels",
                    id.name()
                )));
            }
            channels = l.out_channels;
        }
        Ok(())
    }

    fn check_encoder(&self, id: SubnetId) -> Result<()> {
        self.check_chain(id, IMAGE_CHANNELS)?;
        let layers = self.layers(id);
        let name = id.name();
        if layers.len() < 3
            || layers[0].kind != LayerKind::Conv
            || layers[layers.len() - 1].kind != LayerKind::Conv
        {
            return Err(Error::InvalidArch(format!(
                "{name} must begin and end with standard convolutions"
            )));
        }
        if !layers[1..layers.len() - 1]
            .iter()
            .any(|l| l.kind == LayerKind::DwSep)
        {
            return Err(Error::InvalidArch(format!(
                "{name} needs a depthwise-separable layer in the middle"
            )));
        }
        if layers.iter().any(|l| l.kind == LayerKind::Upsample) {
            return Err(Error::InvalidArch(format!("{name} may not upsample")));
        }
        let reduction: usize = layers.iter().map(|l| l.stride).product();
        if reduction != self.downsample_factor {
            return Err(Error::InvalidArch(format!(
                "{name} reduces spatial dims by {reduction}, expected {}",
                self.downsample_factor
            )));
        }
        Ok(())
    }

    fn check_decoder(&self, id: SubnetId, channels: usize) -> Result<()> {
        self.check_chain(id, channels)?;
        let layers = self.layers(id);
        let name = id.name();
        let mut growth = 1;
        for l in layers {
            match l.kind {
                LayerKind::Upsample => growth *= l.stride,
                _ if l.stride != 1 => {
                    return Err(Error::InvalidArch(format!(
                        "{name} convolutions must have stride 1"
                    )));
                }
                _ => {}
            }
        }
        if growth != self.downsample_factor {
            return Err(Error::InvalidArch(format!(
                "{name} restores spatial dims by {growth}, expected {}",
                self.downsample_factor
            )));
        }
        let last = layers[layers.len() - 1];
        if last.kind != LayerKind::Conv
            || last.out_channels != IMAGE_CHANNELS
            || last.activation != Activation::ScaledTanh
        {
            return Err(Error::InvalidArch(format!(
                "{name} must end in a {IMAGE_CHANNELS}-channel convolution with scaled tanh"
            )));
        }
        Ok(())
    }
}
