//! Binary weight and preset files.
//!
//! All integers and reals are little-endian; reals are IEEE-754 f32.
//!
//! Weight file (`TFPW`, version 1):
//!
//! ```text
//! magic      b"TFPW"
//! version    u32
//! variant    u8          0 = TFP, 1 = TFP-L
//! reserved   u8 x 3      zero
//! downsample u32
//! 4 x subnet             enc_s, dec_s, enc_d, dec_f
//!   layers   u32
//!   layer    kind u8 (0 conv, 1 dwsep, 2 upsample), norm u8,
//!            activation u8 (0 none, 1 relu, 2 scaled tanh), reserved u8,
//!            in u32, out u32, kernel u32, stride u32
//! tensors    u32
//!   entry    name_len u32, name UTF-8, rank u32, dims u32 x rank, offset u64
//! payload    f32 x total, offsets relative to the payload start
//! ```
//!
//! Tensor entries follow `ArchSpec::param_layout` order and must match it
//! by name and shape.
//!
//! Preset file (`TFPP`, version 1):
//!
//! ```text
//! magic      b"TFPP"
//! version    u32
//! style_id   len u32, UTF-8
//! seed       u64
//! source     height u32, width u32
//! fusion     lambda_s f32, lambda_d f32
//! shape      n u32, c u32, h u32, w u32
//! payload    f32 x n*c*h*w
//! ```

use std::io::Write;
use std::path::Path;

use tfp_core::arch::{Activation, ArchSpec, LayerKind, LayerSpec, Variant};
use tfp_core::net::Init;
use tfp_core::{FusionConfig, Network, Preset, Shape, Tensor, PRESET_FORMAT_VERSION};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TFPW";
pub const PRESET_MAGIC: [u8; 4] = *b"TFPP";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("tensor {name}: expected shape {expected:?}, file has {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] tfp_core::Error),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, FormatError> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.usize()?;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| FormatError::Corrupt("string is not UTF-8".into()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| FormatError::Corrupt("tensor too large".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found = self.array::<4>()?;
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    fn version(&mut self, expected: u32) -> Result<(), FormatError> {
        let found = self.u32()?;
        if found != expected {
            return Err(FormatError::Version { found, expected });
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("value fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn kind_code(k: LayerKind) -> u8 {
    match k {
        LayerKind::Conv => 0,
        LayerKind::DwSep => 1,
        LayerKind::Upsample => 2,
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::None => 0,
        Activation::Relu => 1,
        Activation::ScaledTanh => 2,
    }
}

fn write_arch(out: &mut Vec<u8>, spec: &ArchSpec) {
    out.extend_from_slice(&[spec.variant.code(), 0, 0, 0]);
    put_u32(out, spec.downsample_factor);
    for layers in [
        &spec.enc_shallow,
        &spec.dec_shallow,
        &spec.enc_deep,
        &spec.dec_fusion,
    ] {
        put_u32(out, layers.len());
        for l in layers {
            out.extend_from_slice(&[
                kind_code(l.kind),
                u8::from(l.norm),
                activation_code(l.activation),
                0,
            ]);
            for v in [l.in_channels, l.out_channels, l.kernel, l.stride] {
                put_u32(out, v);
            }
        }
    }
}

fn read_arch(r: &mut Reader<'_>) -> Result<ArchSpec, FormatError> {
    let [code, ..] = r.array::<4>()?;
    let variant = Variant::from_code(code)
        .ok_or_else(|| FormatError::Corrupt(format!("unknown variant {code}")))?;
    let downsample_factor = r.usize()?;
    let mut subnets: Vec<Vec<LayerSpec>> = Vec::with_capacity(4);
    for _ in 0..4 {
        let count = r.usize()?;
        if count > 1024 {
            return Err(FormatError::Corrupt(format!(
                "implausible layer count {count}"
            )));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let [kind, norm, act, _] = r.array::<4>()?;
            let kind = match kind {
                0 => LayerKind::Conv,
                1 => LayerKind::DwSep,
                2 => LayerKind::Upsample,
                k => return Err(FormatError::Corrupt(format!("unknown layer kind {k}"))),
            };
            let activation = match act {
                0 => Activation::None,
                1 => Activation::Relu,
                2 => Activation::ScaledTanh,
                a => return Err(FormatError::Corrupt(format!("unknown activation {a}"))),
            };
            layers.push(LayerSpec {
                kind,
                norm: norm != 0,
                activation,
                in_channels: r.usize()?,
                out_channels: r.usize()?,
                kernel: r.usize()?,
                stride: r.usize()?,
            });
        }
        subnets.push(layers);
    }
    let mut it = subnets.into_iter();
    let mut next = || it.next().expect("four subnets");
    Ok(ArchSpec {
        variant,
        enc_shallow: next(),
        dec_shallow: next(),
        enc_deep: next(),
        dec_fusion: next(),
        downsample_factor,
    })
}

pub fn encode_weights(net: &Network) -> Vec<u8> {
    let spec = net.spec();
    let layout = spec.param_layout();
    let buffers = net.param_buffers();
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    write_arch(&mut out, spec);
    put_u32(&mut out, layout.len());
    let mut offset = 0u64;
    for entry in &layout {
        put_str(&mut out, &entry.name);
        put_u32(&mut out, entry.dims.len());
        for &d in &entry.dims {
            put_u32(&mut out, d);
        }
        out.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * entry.numel() as u64;
    }
    for buf in buffers {
        put_f32s(&mut out, buf);
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<Network, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(WEIGHTS_MAGIC)?;
    r.version(WEIGHTS_VERSION)?;
    let spec = read_arch(&mut r)?;
    spec.validate()?;
    let layout = spec.param_layout();
    let count = r.usize()?;
    if count != layout.len() {
        return Err(FormatError::Corrupt(format!(
            "{count} tensors in directory, architecture needs {}",
            layout.len()
        )));
    }
    let mut offsets = Vec::with_capacity(count);
    for entry in &layout {
        let name = r.string()?;
        if name != entry.name {
            return Err(FormatError::Corrupt(format!(
                "expected tensor {}, found {name}",
                entry.name
            )));
        }
        let rank = r.usize()?;
        if rank > 8 {
            return Err(FormatError::Corrupt(format!(
                "{name}: implausible rank {rank}"
            )));
        }
        let dims = (0..rank)
            .map(|_| r.usize())
            .collect::<Result<Vec<_>, _>>()?;
        if dims != entry.dims {
            return Err(FormatError::ShapeMismatch {
                name,
                expected: entry.dims.clone(),
                found: dims,
            });
        }
        offsets.push(r.u64()?);
    }
    let payload = &bytes[r.pos..];
    let total: usize = layout.iter().map(|e| e.numel() * 4).sum();
    if payload.len() < total {
        return Err(FormatError::Truncated {
            offset: r.pos + payload.len(),
            needed: total,
            available: payload.len(),
        });
    }
    if payload.len() > total {
        return Err(FormatError::Corrupt(format!(
            "{} trailing bytes",
            payload.len() - total
        )));
    }
    let mut buffers = Vec::with_capacity(count);
    for (entry, &offset) in layout.iter().zip(&offsets) {
        let start =
            usize::try_from(offset).map_err(|_| FormatError::Corrupt("offset overflow".into()))?;
        let mut pr = Reader::new(payload);
        pr.take(start)?;
        buffers.push(pr.f32s(entry.numel())?);
    }
    Ok(Network::build(spec, Init::FromWeights(buffers))?)
}

pub fn encode_preset(p: &Preset) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&PRESET_MAGIC);
    out.extend_from_slice(&p.format_version.to_le_bytes());
    put_str(&mut out, &p.style_id);
    out.extend_from_slice(&p.seed.to_le_bytes());
    put_u32(&mut out, p.source_size.0);
    put_u32(&mut out, p.source_size.1);
    out.extend_from_slice(&p.fusion.lambda_s().to_le_bytes());
    out.extend_from_slice(&p.fusion.lambda_d().to_le_bytes());
    for d in p.features.shape().dims() {
        put_u32(&mut out, d);
    }
    put_f32s(&mut out, p.features.data());
    out
}

pub fn decode_preset(bytes: &[u8]) -> Result<Preset, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(PRESET_MAGIC)?;
    r.version(PRESET_FORMAT_VERSION)?;
    let style_id = r.string()?;
    let seed = r.u64()?;
    let source_size = (r.usize()?, r.usize()?);
    let fusion = FusionConfig::new(r.f32()?, r.f32()?)?;
    let shape = Shape::new(r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let data = r.f32s(shape.numel())?;
    if r.pos != bytes.len() {
        return Err(FormatError::Corrupt(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Preset {
        features: Tensor::from_vec(shape, data)?,
        style_id,
        seed,
        source_size,
        fusion,
        format_version: PRESET_FORMAT_VERSION,
    })
}

/// Write through a temporary file in the target directory, then rename.
/// A failed write leaves no file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_weights(net: &Network, path: &Path) -> Result<(), FormatError> {
    Ok(write_atomic(path, &encode_weights(net))?)
}

pub fn load_weights(path: &Path) -> Result<Network, FormatError> {
    decode_weights(&std::fs::read(path)?)
}

pub fn save_preset(preset: &Preset, path: &Path) -> Result<(), FormatError> {
    Ok(write_atomic(path, &encode_preset(preset))?)
}

pub fn load_preset(path: &Path) -> Result<Preset, FormatError> {
    decode_preset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_reports_truncation_offset() {
        let mut r = Reader::new(&[1, 2, 3]);
        assert_eq!(r.take(1).unwrap(), &[1]);
        match r.u32() {
            Err(FormatError::Truncated {
                offset: 1,
                needed: 4,
                available: 2,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arch_roundtrip() {
        for spec in [ArchSpec::tfp(), ArchSpec::tfp_l()] {
            let mut out = Vec::new();
            write_arch(&mut out, &spec);
            assert_eq!(read_arch(&mut Reader::new(&out)).unwrap(), spec);
        }
    }
}
