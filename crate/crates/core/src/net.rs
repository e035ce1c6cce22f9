//! The inference network: shallow encoder/decoder, deep encoder, fusion
//! decoder and the attention gate applied to shallow features before fusion.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::arch::{
    Activation, ArchSpec, LayerKind, LayerSpec, SubnetId, DOWNSAMPLE_FACTOR, IMAGE_CHANNELS,
};
use crate::error::{Error, Result};
use crate::kernels::{
    self, conv2d, dw_separable, fuse, instance_norm_in_place, map_in_place, upsample_nearest,
    ConvParams, DwSepParams, NormParams, INSTANCE_NORM_EPS,
};
use crate::noise::NoiseRng;
use crate::tensor::{Shape, Tensor};

/// Blend strengths for `lambda_s * Dae(f_s) + lambda_d * f_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    lambda_s: f32,
    lambda_d: f32,
}

impl FusionConfig {
    pub fn new(lambda_s: f32, lambda_d: f32) -> Result<Self> {
        let ok = |v: f32| v.is_finite() && v >= 0.0;
        if !ok(lambda_s) || !ok(lambda_d) {
            return Err(Error::InvalidParam(format!(
                "fusion weights must be finite and non-negative, got {lambda_s}, {lambda_d}"
            )));
        }
        if lambda_s == 0.0 && lambda_d == 0.0 {
            return Err(Error::InvalidParam(
                "fusion weights cannot both be zero".into(),
            ));
        }
        Ok(Self { lambda_s, lambda_d })
    }

    pub fn lambda_s(&self) -> f32 {
        self.lambda_s
    }

    pub fn lambda_d(&self) -> f32 {
        self.lambda_d
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            lambda_s: 1.0,
            lambda_d: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        params: ConvParams,
        norm: Option<NormParams>,
        activation: Activation,
    },
    DwSep {
        params: DwSepParams,
        norm: Option<NormParams>,
        activation: Activation,
    },
    Upsample {
        factor: usize,
    },
}

impl Layer {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (mut y, norm, act) = match self {
            Layer::Conv {
                params,
                norm,
                activation,
            } => (conv2d(x, params)?, norm, *activation),
            Layer::DwSep {
                params,
                norm,
                activation,
            } => (dw_separable(x, params)?, norm, *activation),
            Layer::Upsample { factor } => return upsample_nearest(x, *factor),
        };
        if let Some(n) = norm {
            instance_norm_in_place(&mut y, &n.gamma, &n.beta, INSTANCE_NORM_EPS)?;
        }
        match act {
            Activation::None => {}
            Activation::Relu => map_in_place(&mut y, kernels::relu_scalar),
            Activation::ScaledTanh => map_in_place(&mut y, kernels::scaled_tanh_scalar),
        }
        Ok(y)
    }

    pub fn param_count(&self) -> usize {
        let norm = |n: &Option<NormParams>| n.as_ref().map_or(0, NormParams::param_count);
        match self {
            Layer::Conv {
                params, norm: n, ..
            } => params.param_count() + norm(n),
            Layer::DwSep {
                params, norm: n, ..
            } => params.param_count() + norm(n),
            Layer::Upsample { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subnet {
    pub layers: Vec<Layer>,
}

impl Subnet {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut layers = self.layers.iter();
        let Some(first) = layers.next() else {
            return Ok(x.clone());
        };
        let mut y = first.forward(x)?;
        for l in layers {
            y = l.forward(&y)?;
        }
        Ok(y)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }
}

/// One named parameter tensor in the canonical layout order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ParamEntry {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

impl ArchSpec {
    /// Every parameter tensor the network holds, in storage order.
    pub fn param_layout(&self) -> Vec<ParamEntry> {
        let mut out = Vec::new();
        let mut push = |name: String, dims: Vec<usize>| out.push(ParamEntry { name, dims });
        for id in [
            SubnetId::EncShallow,
            SubnetId::DecShallow,
            SubnetId::EncDeep,
            SubnetId::DecFusion,
        ] {
            for (i, l) in self.layers(id).iter().enumerate() {
                let p = format!("{}.{i}", id.name());
                let (cin, cout, k) = (l.in_channels, l.out_channels, l.kernel);
                match l.kind {
                    LayerKind::Conv => {
                        push(format!("{p}.weight"), vec![cout, cin, k, k]);
                        push(format!("{p}.bias"), vec![cout]);
                    }
                    LayerKind::DwSep => {
                        push(format!("{p}.dw_weight"), vec![cin, 1, k, k]);
                        push(format!("{p}.dw_bias"), vec![cin]);
                        push(format!("{p}.pw_weight"), vec![cout, cin, 1, 1]);
                        push(format!("{p}.pw_bias"), vec![cout]);
                    }
                    LayerKind::Upsample => continue,
                }
                if l.norm {
                    push(format!("{p}.norm.gamma"), vec![cout]);
                    push(format!("{p}.norm.beta"), vec![cout]);
                }
            }
        }
        let c = self.feature_channels();
        push("dae.weight".into(), vec![c, c, 1, 1]);
        push("dae.bias".into(), vec![c]);
        out
    }
}

/// How to populate parameters when building a [`Network`].
#[derive(Debug, Clone)]
pub enum Init {
    /// He-normal weights from the noise generator, zero biases, identity norms.
    Random { seed: u64 },
    /// One buffer per [`ArchSpec::param_layout`] entry, in order.
    FromWeights(Vec<Vec<f32>>),
}

/// Outputs of the full training-time pipeline for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutputs {
    /// Shallow decoder on content features (color transfer).
    pub cs_color: Tensor,
    /// Fusion decoder on content shallow + noise deep features.
    pub cs_tex_noise: Tensor,
    /// Fusion decoder on content shallow + content deep features.
    pub cs_tex_content: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ArchSpec,
    enc_shallow: Subnet,
    dec_shallow: Subnet,
    enc_deep: Subnet,
    dec_fusion: Subnet,
    dae: ConvParams,
}

impl Network {
    pub fn build(spec: ArchSpec, init: Init) -> Result<Self> {
        spec.validate()?;
        let layout = spec.param_layout();
        let buffers = match init {
            Init::Random { seed } => random_buffers(&layout, seed),
            Init::FromWeights(b) => b,
        };
        if buffers.len() != layout.len() {
            return Err(Error::InvalidParam(format!(
                "expected {} parameter tensors, got {}",
                layout.len(),
                buffers.len()
            )));
        }
        let mut it = layout.iter().zip(buffers);
        let mut next = |want: &str| -> Result<Tensor> {
            let (entry, data) = it
                .next()
                .ok_or_else(|| Error::InvalidParam("parameter list exhausted".into()))?;
            debug_assert!(entry.name.ends_with(want));
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "{} contains non-finite values",
                    entry.name
                )));
            }
            let d = &entry.dims;
            let shape = match d.len() {
                1 => Shape::new(d[0], 1, 1, 1),
                _ => Shape::new(d[0], d[1], d[2], d[3]),
            };
            Tensor::from_vec(shape, data).map_err(|_| {
                Error::InvalidParam(format!("{} expects {} values", entry.name, entry.numel()))
            })
        };
        let mut subnet = |layers: &[LayerSpec]| -> Result<Subnet> {
            let mut out = Vec::with_capacity(layers.len());
            for l in layers {
                let layer = match l.kind {
                    LayerKind::Conv => {
                        let w = next("weight")?;
                        let b = next("bias")?.into_vec();
                        let params = ConvParams::new(w, b, l.stride, l.padding())?;
                        Layer::Conv {
                            params,
                            norm: take_norm(l, &mut next)?,
                            activation: l.activation,
                        }
                    }
                    LayerKind::DwSep => {
                        let dw = next("dw_weight")?;
                        let dwb = next("dw_bias")?.into_vec();
                        let pw = next("pw_weight")?;
                        let pwb = next("pw_bias")?.into_vec();
                        let params = DwSepParams::new(dw, dwb, pw, pwb, l.stride)?;
                        Layer::DwSep {
                            params,
                            norm: take_norm(l, &mut next)?,
                            activation: l.activation,
                        }
                    }
                    LayerKind::Upsample => Layer::Upsample { factor: l.stride },
                };
                out.push(layer);
            }
            Ok(Subnet { layers: out })
        };
        let enc_shallow = subnet(&spec.enc_shallow)?;
        let dec_shallow = subnet(&spec.dec_shallow)?;
        let enc_deep = subnet(&spec.enc_deep)?;
        let dec_fusion = subnet(&spec.dec_fusion)?;
        let dae_w = next("dae.weight")?;
        let dae_b = next("dae.bias")?.into_vec();
        let dae = ConvParams::new(dae_w, dae_b, 1, 0)?;
        Ok(Self {
            spec,
            enc_shallow,
            dec_shallow,
            enc_deep,
            dec_fusion,
            dae,
        })
    }

    pub fn random(spec: ArchSpec, seed: u64) -> Result<Self> {
        Self::build(spec, Init::Random { seed })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn subnet(&self, id: SubnetId) -> Option<&Subnet> {
        match id {
            SubnetId::EncShallow => Some(&self.enc_shallow),
            SubnetId::DecShallow => Some(&self.dec_shallow),
            SubnetId::EncDeep => Some(&self.enc_deep),
            SubnetId::DecFusion => Some(&self.dec_fusion),
            SubnetId::Dae => None,
        }
    }

    pub fn dae_params(&self) -> &ConvParams {
        &self.dae
    }

    /// Parameter buffers in [`ArchSpec::param_layout`] order.
    pub fn param_buffers(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for net in [
            &self.enc_shallow,
            &self.dec_shallow,
            &self.enc_deep,
            &self.dec_fusion,
        ] {
            for l in &net.layers {
                let norm = match l {
                    Layer::Conv { params, norm, .. } => {
                        out.push(params.weights.data());
                        out.push(&params.bias);
                        norm
                    }
                    Layer::DwSep { params, norm, .. } => {
                        out.push(params.dw_weights.data());
                        out.push(&params.dw_bias);
                        out.push(params.pw_weights.data());
                        out.push(&params.pw_bias);
                        norm
                    }
                    Layer::Upsample { .. } => continue,
                };
                if let Some(n) = norm {
                    out.push(&n.gamma);
                    out.push(&n.beta);
                }
            }
        }
        out.push(self.dae.weights.data());
        out.push(&self.dae.bias);
        out
    }

    /// Trainable scalars on the inference path.
    pub fn count_params(&self) -> usize {
        self.enc_shallow.param_count()
            + self.dec_shallow.param_count()
            + self.enc_deep.param_count()
            + self.dec_fusion.param_count()
            + self.dae.param_count()
    }

    pub fn feature_channels(&self) -> usize {
        self.spec.feature_channels()
    }

    fn check_image(op: &'static str, image: &Tensor) -> Result<()> {
        let s = image.shape();
        if s.c != IMAGE_CHANNELS {
            return Err(Error::ChannelMismatch {
                op,
                expected: IMAGE_CHANNELS,
                actual: s.c,
            });
        }
        if s.h == 0
            || s.w == 0
            || !s.h.is_multiple_of(DOWNSAMPLE_FACTOR)
            || !s.w.is_multiple_of(DOWNSAMPLE_FACTOR)
        {
            return Err(Error::IndivisibleDims {
                op,
                height: s.h,
                width: s.w,
                factor: DOWNSAMPLE_FACTOR,
            });
        }
        Ok(())
    }

    fn check_features(&self, op: &'static str, f: &Tensor) -> Result<()> {
        let c = self.feature_channels();
        if f.shape().c != c {
            return Err(Error::ChannelMismatch {
                op,
                expected: c,
                actual: f.shape().c,
            });
        }
        Ok(())
    }

    /// Shallow features `(N, C, H/4, W/4)` of an image batch.
    pub fn enc_shallow(&self, image: &Tensor) -> Result<Tensor> {
        Self::check_image("enc_shallow", image)?;
        self.enc_shallow.forward(image)
    }

    /// Deep texture features of an image batch (noise or content).
    pub fn enc_deep(&self, image: &Tensor) -> Result<Tensor> {
        Self::check_image("enc_deep", image)?;
        self.enc_deep.forward(image)
    }

    /// `f * sigmoid(conv1x1(f))`.
    pub fn dae(&self, f: &Tensor) -> Result<Tensor> {
        self.check_features("dae", f)?;
        let mut gate = conv2d(f, &self.dae)?;
        map_in_place(&mut gate, kernels::sigmoid_scalar);
        for (g, &v) in gate.data_mut().iter_mut().zip(f.data()) {
            *g *= v;
        }
        Ok(gate)
    }

    pub fn dec_shallow(&self, f_s: &Tensor) -> Result<Tensor> {
        self.check_features("dec_shallow", f_s)?;
        self.dec_shallow.forward(f_s)
    }

    /// Decode `lambda_s * Dae(f_s) + lambda_d * f_d`.
    pub fn dec_fusion(&self, f_s: &Tensor, f_d: &Tensor, cfg: &FusionConfig) -> Result<Tensor> {
        if f_s.shape() != f_d.shape() {
            return Err(Error::ShapeMismatch {
                op: "dec_fusion",
                left: f_s.shape(),
                right: f_d.shape(),
            });
        }
        let gated = self.dae(f_s)?;
        self.dec_fusion.forward(&fuse(&gated, f_d, cfg)?)
    }

    /// Decoder on deep features alone: `Dec_f(lambda_d * f_d)`, a content-free texture image.
    pub fn dec_texture(&self, f_d: &Tensor, lambda_d: f32) -> Result<Tensor> {
        self.check_features("dec_texture", f_d)?;
        if !(lambda_d.is_finite() && lambda_d > 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda_d must be positive, got {lambda_d}"
            )));
        }
        let scaled = f_d.map(|v| lambda_d * v);
        self.dec_fusion.forward(&scaled)
    }

    /// All three outputs of the training pipeline, sharing one shallow encode.
    pub fn forward_full(
        &self,
        content: &Tensor,
        noise: &Tensor,
        cfg: &FusionConfig,
    ) -> Result<PipelineOutputs> {
        if content.shape() != noise.shape() {
            return Err(Error::ShapeMismatch {
                op: "forward_full",
                left: content.shape(),
                right: noise.shape(),
            });
        }
        let f_s = self.enc_shallow(content)?;
        let f_dn = self.enc_deep(noise)?;
        let f_dc = self.enc_deep(content)?;
        Ok(PipelineOutputs {
            cs_color: self.dec_shallow(&f_s)?,
            cs_tex_noise: self.dec_fusion(&f_s, &f_dn, cfg)?,
            cs_tex_content: self.dec_fusion(&f_s, &f_dc, cfg)?,
        })
    }
}

fn take_norm(
    l: &LayerSpec,
    next: &mut impl FnMut(&str) -> Result<Tensor>,
) -> Result<Option<NormParams>> {
    if !l.norm {
        return Ok(None);
    }
    let gamma = next("gamma")?.into_vec();
    let beta = next("beta")?.into_vec();
    Ok(Some(NormParams { gamma, beta }))
}

fn random_buffers(layout: &[ParamEntry], seed: u64) -> Vec<Vec<f32>> {
    let mut rng = NoiseRng::new(seed);
    layout
        .iter()
        .map(|e| {
            let mut buf = vec![0.0f32; e.numel()];
            if e.name.ends_with("gamma") {
                buf.fill(1.0);
            } else if e.name.ends_with("weight") {
                // He-normal over the receptive field.
                let fan_in: usize = e.dims[1..].iter().product();
                let std = libm::sqrtf(2.0 / fan_in as f32);
                rng.fill_normal(&mut buf, std);
            }
            buf
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_config_validation() {
        assert!(FusionConfig::new(0.0, 0.0).is_err());
        assert!(FusionConfig::new(-1.0, 1.0).is_err());
        assert!(FusionConfig::new(f32::NAN, 1.0).is_err());
        assert!(FusionConfig::new(0.0, 2.0).is_ok());
        assert_eq!(
            FusionConfig::default(),
            FusionConfig::new(1.0, 1.0).unwrap()
        );
    }

    #[test]
    fn layout_matches_counts() {
        for spec in [ArchSpec::tfp(), ArchSpec::tfp_l()] {
            let total: usize = spec.param_layout().iter().map(ParamEntry::numel).sum();
            assert_eq!(total, spec.param_count());
            let net = Network::random(spec.clone(), 3).unwrap();
            assert_eq!(net.count_params(), total);
            let bufs = net.param_buffers();
            assert_eq!(bufs.len(), spec.param_layout().len());
        }
    }

    #[test]
    fn rebuild_from_buffers_is_identical() {
        let net = Network::random(ArchSpec::tfp_l(), 11).unwrap();
        let bufs = net
            .param_buffers()
            .into_iter()
            .map(<[f32]>::to_vec)
            .collect();
        let again = Network::build(ArchSpec::tfp_l(), Init::FromWeights(bufs)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn build_rejects_wrong_buffer_count_and_nan() {
        let spec = ArchSpec::tfp_l();
        assert!(Network::build(spec.clone(), Init::FromWeights(vec![vec![0.0]])).is_err());
        let mut bufs: Vec<Vec<f32>> = spec
            .param_layout()
            .iter()
            .map(|e| vec![0.0; e.numel()])
            .collect();
        bufs[0][0] = f32::INFINITY;
        assert!(Network::build(spec, Init::FromWeights(bufs)).is_err());
    }

    #[test]
    fn random_init_is_seeded() {
        let a = Network::random(ArchSpec::tfp(), 5).unwrap();
        let b = Network::random(ArchSpec::tfp(), 5).unwrap();
        let c = Network::random(ArchSpec::tfp(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn encoders_reject_bad_inputs() {
        let net = Network::random(ArchSpec::tfp_l(), 1).unwrap();
        let odd = Tensor::zeros(Shape::new(1, 3, 10, 12));
        assert!(matches!(
            net.enc_shallow(&odd),
            Err(Error::IndivisibleDims { height: 10, .. })
        ));
        let gray = Tensor::zeros(Shape::new(1, 1, 8, 8));
        assert!(matches!(
            net.enc_deep(&gray),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn dae_zero_in_zero_out() {
        let net = Network::random(ArchSpec::tfp(), 1).unwrap();
        let f = Tensor::zeros(Shape::new(1, 16, 4, 4));
        let g = net.dae(&f).unwrap();
        assert_eq!(g.shape(), f.shape());
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dec_fusion_rejects_mismatch() {
        let net = Network::random(ArchSpec::tfp(), 1).unwrap();
        let a = Tensor::zeros(Shape::new(1, 16, 4, 4));
        let b = Tensor::zeros(Shape::new(1, 16, 4, 8));
        assert!(matches!(
            net.dec_fusion(&a, &b, &FusionConfig::default()),
            Err(Error::ShapeMismatch {
                op: "dec_fusion",
                ..
            })
        ));
    }
}
