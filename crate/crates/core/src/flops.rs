//! Multiply-add accounting for the two inference paths.
//!
//! Only convolution-like layers are counted (including the attention gate's
//! pointwise conv); each multiply-add is two FLOPs. Norms, activations,
//! upsampling and the fusion sum are elementwise and left out.

use alloc::vec::Vec;

use crate::arch::{ArchSpec, LayerKind, SubnetId, DOWNSAMPLE_FACTOR};
use crate::error::{Error, Result};
use crate::kernels::conv_output_size;
use crate::net::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlopPath {
    /// Shallow encode, deep encode of noise, gate, fusion decode.
    Full,
    /// Same output from a captured preset: the deep encoder is skipped.
    Preset,
}

impl FlopPath {
    pub fn subnets(self) -> &'static [SubnetId] {
        match self {
            FlopPath::Full => &[
                SubnetId::EncShallow,
                SubnetId::EncDeep,
                SubnetId::Dae,
                SubnetId::DecFusion,
            ],
            FlopPath::Preset => &[SubnetId::EncShallow, SubnetId::Dae, SubnetId::DecFusion],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerFlops {
    pub subnet: SubnetId,
    pub index: usize,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopReport {
    pub height: usize,
    pub width: usize,
    pub path: FlopPath,
    pub layers: Vec<LayerFlops>,
    pub subnet_totals: Vec<(SubnetId, u64)>,
    pub total: u64,
}

impl FlopReport {
    pub fn subnet_total(&self, id: SubnetId) -> u64 {
        self.subnet_totals
            .iter()
            .find(|(s, _)| *s == id)
            .map_or(0, |&(_, f)| f)
    }
}

pub fn count_flops(
    net: &Network,
    height: usize,
    width: usize,
    path: FlopPath,
) -> Result<FlopReport> {
    net.spec().count_flops(height, width, path)
}

impl ArchSpec {
    pub fn count_flops(&self, height: usize, width: usize, path: FlopPath) -> Result<FlopReport> {
        if height == 0
            || width == 0
            || !height.is_multiple_of(DOWNSAMPLE_FACTOR)
            || !width.is_multiple_of(DOWNSAMPLE_FACTOR)
        {
            return Err(Error::IndivisibleDims {
                op: "count_flops",
                height,
                width,
                factor: DOWNSAMPLE_FACTOR,
            });
        }
        let mut layers = Vec::new();
        let mut subnet_totals = Vec::new();
        for &id in path.subnets() {
            let start = layers.len();
            if id == SubnetId::Dae {
                let c = self.feature_channels() as u64;
                let px = ((height / DOWNSAMPLE_FACTOR) * (width / DOWNSAMPLE_FACTOR)) as u64;
                layers.push(LayerFlops {
                    subnet: id,
                    index: 0,
                    flops: 2 * c * c * px,
                });
            } else {
                let (mut h, mut w) = match id {
                    SubnetId::EncShallow | SubnetId::EncDeep => (height, width),
                    _ => (height / DOWNSAMPLE_FACTOR, width / DOWNSAMPLE_FACTOR),
                };
                for (index, l) in self.layers(id).iter().enumerate() {
                    let (cin, cout, kk) = (
                        l.in_channels as u64,
                        l.out_channels as u64,
                        (l.kernel * l.kernel) as u64,
                    );
                    let macs_per_px = match l.kind {
                        LayerKind::Upsample => {
                            h *= l.stride;
                            w *= l.stride;
                            layers.push(LayerFlops {
                                subnet: id,
                                index,
                                flops: 0,
                            });
                            continue;
                        }
                        LayerKind::Conv => cout * cin * kk,
                        LayerKind::DwSep => cin * kk + cin * cout,
                    };
                    h = conv_output_size(h, l.kernel, l.stride, l.padding());
                    w = conv_output_size(w, l.kernel, l.stride, l.padding());
                    layers.push(LayerFlops {
                        subnet: id,
                        index,
                        flops: 2 * macs_per_px * (h * w) as u64,
                    });
                }
            }
            subnet_totals.push((id, layers[start..].iter().map(|l| l.flops).sum()));
        }
        let total = layers.iter().map(|l| l.flops).sum();
        Ok(FlopReport {
            height,
            width,
            path,
            layers,
            subnet_totals,
            total,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_are_sums_of_parts() {
        let r = ArchSpec::tfp().count_flops(64, 32, FlopPath::Full).unwrap();
        assert_eq!(
            r.total,
            r.subnet_totals.iter().map(|&(_, f)| f).sum::<u64>()
        );
        assert_eq!(r.total, r.layers.iter().map(|l| l.flops).sum::<u64>());
    }

    #[test]
    fn first_layer_hand_count() {
        // conv3x3 3->8 stride 2 on 8x8 gives 4x4 outputs: 2 * 8*3*9 * 16.
        let r = ArchSpec::tfp().count_flops(8, 8, FlopPath::Preset).unwrap();
        assert_eq!(r.layers[0].flops, 2 * 8 * 3 * 9 * 16);
    }

    #[test]
    fn rejects_indivisible() {
        assert!(ArchSpec::tfp().count_flops(30, 32, FlopPath::Full).is_err());
    }
}
