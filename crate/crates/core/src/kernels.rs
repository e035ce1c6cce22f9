//! Direct f32 kernels over NCHW tensors.
//!
//! Convolutions use the cross-correlation convention (no kernel flip) with
//! zero padding. Every output plane is produced by one sequential loop, so
//! results do not depend on how planes are scheduled across threads.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::net::FusionConfig;
use crate::tensor::{Shape, Tensor};

pub const INSTANCE_NORM_EPS: f32 = 1e-5;

/// Standard convolution parameters. Weights are `(Cout, Cin, K, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Vec<f32>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Vec<f32>, stride: usize, padding: usize) -> Result<Self> {
        let s = weights.shape();
        if s.h != s.w || s.h.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "conv kernel must be square and odd, got {}x{}",
                s.h, s.w
            )));
        }
        if bias.len() != s.n {
            return Err(Error::InvalidParam(format!(
                "conv bias length {} != Cout {}",
                bias.len(),
                s.n
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidParam("conv stride must be positive".into()));
        }
        Ok(Self {
            weights,
            bias,
            stride,
            padding,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn param_count(&self) -> usize {
        self.weights.shape().numel() + self.bias.len()
    }
}

/// Depthwise 3x3 (or any odd K) followed by a 1x1 pointwise mix.
///
/// The depthwise stage pads by `K / 2` and carries the stride.
#[derive(Debug, Clone, PartialEq)]
pub struct DwSepParams {
    pub dw_weights: Tensor,
    pub dw_bias: Vec<f32>,
    pub pw_weights: Tensor,
    pub pw_bias: Vec<f32>,
    pub stride: usize,
}

impl DwSepParams {
    pub fn new(
        dw_weights: Tensor,
        dw_bias: Vec<f32>,
        pw_weights: Tensor,
        pw_bias: Vec<f32>,
        stride: usize,
    ) -> Result<Self> {
        let dw = dw_weights.shape();
        let pw = pw_weights.shape();
        if dw.c != 1 || dw.h != dw.w || dw.h.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "depthwise weights must be (C, 1, K, K) with odd K, got {dw}"
            )));
        }
        if pw.c != dw.n || pw.h != 1 || pw.w != 1 {
            return Err(Error::InvalidParam(format!(
                "pointwise weights must be (Cout, {}, 1, 1), got {pw}",
                dw.n
            )));
        }
        if dw_bias.len() != dw.n || pw_bias.len() != pw.n {
            return Err(Error::InvalidParam(
                "depthwise-separable bias length mismatch".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidParam(
                "depthwise stride must be positive".into(),
            ));
        }
        Ok(Self {
            dw_weights,
            dw_bias,
            pw_weights,
            pw_bias,
            stride,
        })
    }

    pub fn channels(&self) -> usize {
        self.dw_weights.shape().n
    }

    pub fn out_channels(&self) -> usize {
        self.pw_weights.shape().n
    }

    pub fn kernel(&self) -> usize {
        self.dw_weights.shape().h
    }

    /// `C*K*K + C + C*Cout + Cout`.
    pub fn param_count(&self) -> usize {
        self.dw_weights.shape().numel()
            + self.dw_bias.len()
            + self.pw_weights.shape().numel()
            + self.pw_bias.len()
    }
}

/// Per-channel affine parameters of an instance norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl NormParams {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: alloc::vec![1.0; channels],
            beta: alloc::vec![0.0; channels],
        }
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }
}

#[inline]
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (size + 2 * padding - kernel) / stride + 1
}

pub(crate) fn for_each_plane<F>(data: &mut [f32], plane: usize, f: F)
where
    F: Fn(usize, &mut [f32]) + Send + Sync,
{
    if plane == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, p)| f(i, p));
    }
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(plane)
        .enumerate()
        .for_each(|(i, p)| f(i, p));
}

/// Output indices `o` in `0..out_len` whose tap `t` lands inside `0..in_len`.
#[inline]
fn valid_range(
    out_len: usize,
    in_len: usize,
    tap: usize,
    stride: usize,
    pad: usize,
) -> (usize, usize) {
    let lo = if pad > tap {
        (pad - tap).div_ceil(stride)
    } else {
        0
    };
    if in_len + pad <= tap {
        return (0, 0);
    }
    let hi = ((in_len - 1 + pad - tap) / stride + 1).min(out_len);
    (lo, hi.max(lo))
}

/// Accumulate the correlation of one input plane with one `k x k` kernel into `out`.
#[allow(clippy::too_many_arguments)]
fn correlate_plane(
    out: &mut [f32],
    (oh, ow): (usize, usize),
    input: &[f32],
    (h, w): (usize, usize),
    kernel: &[f32],
    k: usize,
    stride: usize,
    pad: usize,
) {
    for ky in 0..k {
        let (oy0, oy1) = valid_range(oh, h, ky, stride, pad);
        for kx in 0..k {
            let wv = kernel[ky * k + kx];
            let (ox0, ox1) = valid_range(ow, w, kx, stride, pad);
            if ox0 >= ox1 {
                continue;
            }
            for oy in oy0..oy1 {
                let iy = oy * stride + ky - pad;
                let in_row = &input[iy * w..(iy + 1) * w];
                let out_row = &mut out[oy * ow..(oy + 1) * ow];
                if stride == 1 {
                    let ix0 = ox0 + kx - pad;
                    let src = &in_row[ix0..ix0 + (ox1 - ox0)];
                    for (o, &i) in out_row[ox0..ox1].iter_mut().zip(src) {
                        *o += wv * i;
                    }
                } else {
                    for ox in ox0..ox1 {
                        out_row[ox] += wv * in_row[ox * stride + kx - pad];
                    }
                }
            }
        }
    }
}

fn check_spatial(op: &'static str, s: Shape, k: usize, pad: usize) -> Result<()> {
    if s.h + 2 * pad < k || s.w + 2 * pad < k {
        return Err(Error::InputTooSmall {
            op,
            height: s.h,
            width: s.w,
            kernel: k,
            padding: pad,
        });
    }
    Ok(())
}

/// Direct 2-D convolution; output `(N, Cout, (H+2p-K)/s+1, (W+2p-K)/s+1)`.
pub fn conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let s = input.shape();
    let cin = p.in_channels();
    if s.c != cin {
        return Err(Error::ChannelMismatch {
            op: "conv2d",
            expected: cin,
            actual: s.c,
        });
    }
    let k = p.kernel();
    check_spatial("conv2d", s, k, p.padding)?;
    let oh = conv_output_size(s.h, k, p.stride, p.padding);
    let ow = conv_output_size(s.w, k, p.stride, p.padding);
    let cout = p.out_channels();
    let mut out = Tensor::zeros(Shape::new(s.n, cout, oh, ow));
    let weights = p.weights.data();
    let kk = k * k;
    for_each_plane(out.data_mut(), oh * ow, |idx, plane| {
        let (n, co) = (idx / cout, idx % cout);
        plane.fill(p.bias[co]);
        for ci in 0..cin {
            let kernel = &weights[(co * cin + ci) * kk..(co * cin + ci + 1) * kk];
            correlate_plane(
                plane,
                (oh, ow),
                input.plane(n, ci),
                (s.h, s.w),
                kernel,
                k,
                p.stride,
                p.padding,
            );
        }
    });
    Ok(out)
}

/// Grouped convolution with one group per channel. Weights `(C, 1, K, K)`.
pub fn depthwise_conv2d(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let s = input.shape();
    let ws = weights.shape();
    if s.c != ws.n {
        return Err(Error::ChannelMismatch {
            op: "depthwise_conv2d",
            expected: ws.n,
            actual: s.c,
        });
    }
    let k = ws.h;
    check_spatial("depthwise_conv2d", s, k, padding)?;
    let oh = conv_output_size(s.h, k, stride, padding);
    let ow = conv_output_size(s.w, k, stride, padding);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let kk = k * k;
    let wd = weights.data();
    for_each_plane(out.data_mut(), oh * ow, |idx, plane| {
        let (n, c) = (idx / s.c, idx % s.c);
        plane.fill(bias[c]);
        correlate_plane(
            plane,
            (oh, ow),
            input.plane(n, c),
            (s.h, s.w),
            &wd[c * kk..(c + 1) * kk],
            k,
            stride,
            padding,
        );
    });
    Ok(out)
}

pub fn dw_separable(input: &Tensor, p: &DwSepParams) -> Result<Tensor> {
    if input.shape().c != p.channels() {
        return Err(Error::ChannelMismatch {
            op: "dw_separable",
            expected: p.channels(),
            actual: input.shape().c,
        });
    }
    let k = p.kernel();
    let mid = depthwise_conv2d(input, &p.dw_weights, &p.dw_bias, p.stride, k / 2)?;
    pointwise(&mid, &p.pw_weights, &p.pw_bias)
}

fn pointwise(input: &Tensor, weights: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let s = input.shape();
    let cin = weights.shape().c;
    if s.c != cin {
        return Err(Error::ChannelMismatch {
            op: "pointwise",
            expected: cin,
            actual: s.c,
        });
    }
    let cout = weights.shape().n;
    let mut out = Tensor::zeros(Shape::new(s.n, cout, s.h, s.w));
    let wd = weights.data();
    for_each_plane(out.data_mut(), s.plane(), |idx, plane| {
        let (n, co) = (idx / cout, idx % cout);
        plane.fill(bias[co]);
        for ci in 0..cin {
            let wv = wd[co * cin + ci];
            for (o, &i) in plane.iter_mut().zip(input.plane(n, ci)) {
                *o += wv * i;
            }
        }
    });
    Ok(out)
}

/// Per-plane `(x - mean) / sqrt(var + eps) * gamma + beta` with population variance.
///
/// Plane statistics are accumulated in f64; the normalized values are f32.
pub fn instance_norm(input: &Tensor, gamma: &[f32], beta: &[f32], eps: f32) -> Result<Tensor> {
    let mut out = input.clone();
    instance_norm_in_place(&mut out, gamma, beta, eps)?;
    Ok(out)
}

pub(crate) fn instance_norm_in_place(
    t: &mut Tensor,
    gamma: &[f32],
    beta: &[f32],
    eps: f32,
) -> Result<()> {
    let s = t.shape();
    if gamma.len() != s.c || beta.len() != s.c {
        return Err(Error::ChannelMismatch {
            op: "instance_norm",
            expected: s.c,
            actual: gamma.len().min(beta.len()),
        });
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "instance_norm eps must be positive, got {eps}"
        )));
    }
    let count = s.plane() as f64;
    for_each_plane(t.data_mut(), s.plane(), |idx, plane| {
        let c = idx % s.c;
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / count;
        let var = plane
            .iter()
            .map(|&v| {
                let d = f64::from(v) - mean;
                d * d
            })
            .sum::<f64>()
            / count;
        let inv = 1.0 / libm::sqrt(var + f64::from(eps));
        let scale = (inv * f64::from(gamma[c])) as f32;
        let mean = mean as f32;
        let shift = beta[c];
        for v in plane.iter_mut() {
            *v = (*v - mean) * scale + shift;
        }
    });
    Ok(())
}

/// Nearest-neighbour upsampling by an integer factor on both axes.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidParam(
            "upsample factor must be positive".into(),
        ));
    }
    let s = input.shape();
    let (oh, ow) = (s.h * factor, s.w * factor);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    for_each_plane(out.data_mut(), oh * ow, |idx, plane| {
        let src = input.plane(idx / s.c, idx % s.c);
        for oy in 0..oh {
            let in_row = &src[(oy / factor) * s.w..(oy / factor + 1) * s.w];
            let out_row = &mut plane[oy * ow..(oy + 1) * ow];
            for (ox, o) in out_row.iter_mut().enumerate() {
                *o = in_row[ox / factor];
            }
        }
    });
    Ok(out)
}

/// Elementwise `lambda_s * a + lambda_d * b`.
pub fn fuse(a: &Tensor, b: &Tensor, cfg: &FusionConfig) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "fuse",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (ls, ld) = (cfg.lambda_s(), cfg.lambda_d());
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| ls * x + ld * y)
        .collect();
    Tensor::from_vec(a.shape(), data)
}

#[inline]
pub fn relu_scalar(v: f32) -> f32 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

#[inline]
pub fn tanh_out_scalar(v: f32) -> f32 {
    libm::tanhf(v)
}

/// `tanh` rescaled onto `[0, 1]`; the decoders' output activation.
#[inline]
pub fn scaled_tanh_scalar(v: f32) -> f32 {
    0.5 * (libm::tanhf(v) + 1.0)
}

#[inline]
pub fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + libm::expf(-v))
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(relu_scalar)
}

pub fn tanh_out(input: &Tensor) -> Tensor {
    input.map(tanh_out_scalar)
}

pub fn scaled_tanh(input: &Tensor) -> Tensor {
    input.map(scaled_tanh_scalar)
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

pub(crate) fn map_in_place(t: &mut Tensor, f: impl Fn(f32) -> f32 + Send + Sync) {
    let plane = t.shape().plane();
    for_each_plane(t.data_mut(), plane, |_, p| {
        p.iter_mut().for_each(|v| *v = f(*v))
    });
}
