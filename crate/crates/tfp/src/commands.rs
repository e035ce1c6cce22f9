//! The `tfp` subcommands. Each reads its inputs, never modifies them, and
//! writes its output atomically.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use tfp_core::arch::DOWNSAMPLE_FACTOR;
use tfp_core::{
    capture_preset, sample_noise, stylize_with_preset, ArchSpec, FusionConfig, Network, Preset,
    Variant,
};

use crate::bench::{run_bench, BenchConfig, BenchReport};
use crate::format::{load_preset, load_weights, save_preset, save_weights, write_atomic};
use crate::image_io::{crop, load_image, reflect_pad, save_png};

/// `HxW`, e.g. `256x256`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        let size = Size {
            height: parse(h)?,
            width: parse(w)?,
        };
        if size.height == 0 || size.width == 0 {
            return Err("size must be at least 1x1".into());
        }
        Ok(size)
    }
}

impl Size {
    fn padded(self) -> (usize, usize) {
        let up = |v: usize| v.div_ceil(DOWNSAMPLE_FACTOR) * DOWNSAMPLE_FACTOR;
        (up(self.height), up(self.width))
    }
}

/// A seed for runs that did not get one. Printed by the callers so the run can be repeated.
pub fn fresh_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos ^ (u64::from(std::process::id()) << 32)
}

fn fusion_from(
    lambda_s: Option<f32>,
    lambda_d: Option<f32>,
    default: FusionConfig,
) -> Result<FusionConfig> {
    Ok(FusionConfig::new(
        lambda_s.unwrap_or(default.lambda_s()),
        lambda_d.unwrap_or(default.lambda_d()),
    )?)
}

pub struct InitArgs {
    pub variant: Variant,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn init(args: &InitArgs) -> Result<()> {
    let net = Network::random(ArchSpec::for_variant(args.variant), args.seed)?;
    save_weights(&net, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} weights ({} params, seed {}) to {}",
        args.variant,
        net.count_params(),
        args.seed,
        args.out.display()
    );
    Ok(())
}

pub struct StylizeArgs {
    pub weights: PathBuf,
    pub preset: PathBuf,
    pub content: PathBuf,
    pub out: PathBuf,
    pub lambda_s: Option<f32>,
    pub lambda_d: Option<f32>,
}

pub fn stylize(args: &StylizeArgs) -> Result<()> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading weights {}", args.weights.display()))?;
    let preset = load_preset(&args.preset)
        .with_context(|| format!("loading preset {}", args.preset.display()))?;
    let fusion = fusion_from(args.lambda_s, args.lambda_d, preset.fusion)?;
    let content = load_image(&args.content)?;
    let s = content.shape();
    let padded = reflect_pad(&content, DOWNSAMPLE_FACTOR);
    let styled = stylize_with_preset(&net, &preset, &padded, &fusion)?;
    save_png(&crop(&styled, s.h, s.w), &args.out)?;
    Ok(())
}

pub struct TextureArgs {
    pub weights: PathBuf,
    pub seed: Option<u64>,
    pub size: Size,
    pub lambda_d: f32,
    pub out: PathBuf,
}

/// Content-free texture: the fusion decoder on deep noise features alone.
pub fn texture(args: &TextureArgs) -> Result<u64> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading weights {}", args.weights.display()))?;
    let seed = args.seed.unwrap_or_else(fresh_seed);
    let (h, w) = args.size.padded();
    let features = net.enc_deep(&sample_noise(seed, h, w)?)?;
    let img = net.dec_texture(&features, args.lambda_d)?;
    save_png(&crop(&img, args.size.height, args.size.width), &args.out)?;
    Ok(seed)
}

pub struct PresetGenArgs {
    pub weights: PathBuf,
    pub seed: Option<u64>,
    pub size: Size,
    pub style_id: String,
    pub lambda_s: Option<f32>,
    pub lambda_d: Option<f32>,
    pub out: PathBuf,
}

pub fn preset_gen(args: &PresetGenArgs) -> Result<Preset> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading weights {}", args.weights.display()))?;
    let seed = args.seed.unwrap_or_else(fresh_seed);
    let Size { height, width } = args.size;
    if height % DOWNSAMPLE_FACTOR != 0 || width % DOWNSAMPLE_FACTOR != 0 {
        bail!("preset size {height}x{width} must be a multiple of {DOWNSAMPLE_FACTOR}");
    }
    let mut preset = capture_preset(&net, seed, height, width, &args.style_id)?;
    preset.fusion = fusion_from(args.lambda_s, args.lambda_d, preset.fusion)?;
    save_preset(&preset, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(preset)
}

pub struct BenchArgs {
    pub weights: PathBuf,
    pub preset: PathBuf,
    pub content: Option<PathBuf>,
    pub size: Size,
    pub reps: usize,
    pub warmup: usize,
    pub report: Option<PathBuf>,
}

pub fn bench(args: &BenchArgs) -> Result<BenchReport> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading weights {}", args.weights.display()))?;
    let storage_bytes = std::fs::metadata(&args.weights)?.len();
    let preset = load_preset(&args.preset)
        .with_context(|| format!("loading preset {}", args.preset.display()))?;
    let (h, w) = args.size.padded();
    let content = match &args.content {
        Some(p) => {
            let img = load_image(p)?;
            reflect_pad(&img, DOWNSAMPLE_FACTOR)
        }
        // Seeded uniform pixels stand in for a photo; only shape matters for timing.
        None => sample_noise(preset.seed.wrapping_add(1), h, w)?
            .map(|v| (0.5 + 0.15 * v).clamp(0.0, 1.0)),
    };
    let cfg = BenchConfig {
        reps: args.reps,
        warmup: args.warmup,
        storage_bytes,
        fusion: preset.fusion,
    };
    let report = run_bench(&net, &preset, &content, &cfg)?;
    if let Some(path) = &args.report {
        write_atomic(path, report.to_key_values().as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report)
}
