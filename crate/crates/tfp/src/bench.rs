//! Timing the full (deep-encode every call) path against the preset path.
//!
//! Both paths produce the same image. The full path encodes the preset's
//! noise with the deep encoder on every call; the preset path reuses the
//! stored features. Noise sampling and image IO are outside the timed region.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Result};
use tfp_core::{
    count_flops, sample_noise, stylize_with_preset, FlopPath, FusionConfig, Network, Preset, Tensor,
};

pub const MIN_REPS: usize = 20;
pub const DEFAULT_WARMUP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        assert!(!samples_ms.is_empty());
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank =
            |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Self {
            mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub variant: String,
    pub params: usize,
    pub storage_bytes: u64,
    pub height: usize,
    pub width: usize,
    pub reps: usize,
    pub warmup: usize,
    pub threads: usize,
    pub flops_full: u64,
    pub flops_preset: u64,
    pub full: LatencyStats,
    pub preset: LatencyStats,
    /// `full.mean_ms / preset.mean_ms`.
    pub speedup: f64,
}

pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
    pub storage_bytes: u64,
    pub fusion: FusionConfig,
}

/// `content` must already be padded to a multiple of 4.
pub fn run_bench(
    net: &Network,
    preset: &Preset,
    content: &Tensor,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.reps < MIN_REPS {
        bail!(
            "at least {MIN_REPS} repetitions are required, got {}",
            cfg.reps
        );
    }
    preset
        .validate_for(net)
        .map_err(|e| anyhow::anyhow!("preset does not match weights: {e}"))?;
    let s = content.shape();
    let noise = sample_noise(preset.seed, s.h, s.w)?;
    let fusion = cfg.fusion;

    let full = || -> Result<Tensor> {
        let f_s = net.enc_shallow(content)?;
        let f_d = net.enc_deep(&noise)?;
        Ok(net.dec_fusion(&f_s, &f_d, &fusion)?)
    };
    let fast = || -> Result<Tensor> { Ok(stylize_with_preset(net, preset, content, &fusion)?) };

    for _ in 0..cfg.warmup {
        std::hint::black_box(full()?);
        std::hint::black_box(fast()?);
    }
    // Interleaved so drift in machine load hits both paths alike.
    let mut full_ms = Vec::with_capacity(cfg.reps);
    let mut fast_ms = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let t = Instant::now();
        std::hint::black_box(full()?);
        full_ms.push(t.elapsed().as_secs_f64() * 1e3);
        let t = Instant::now();
        std::hint::black_box(fast()?);
        fast_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let full = LatencyStats::from_samples(&full_ms);
    let preset_stats = LatencyStats::from_samples(&fast_ms);
    Ok(BenchReport {
        variant: net.spec().variant.name().to_string(),
        params: net.count_params(),
        storage_bytes: cfg.storage_bytes,
        height: s.h,
        width: s.w,
        reps: cfg.reps,
        warmup: cfg.warmup,
        threads: rayon::current_num_threads(),
        flops_full: count_flops(net, s.h, s.w, FlopPath::Full)?.total,
        flops_preset: count_flops(net, s.h, s.w, FlopPath::Preset)?.total,
        full,
        preset: preset_stats,
        speedup: full.mean_ms / preset_stats.mean_ms,
    })
}

impl BenchReport {
    /// `key=value` lines, one per field, in a fixed order.
    ///
    /// Keys: `variant params storage_bytes height width reps warmup threads
    /// flops_full flops_preset full_mean_ms full_p50_ms full_p95_ms
    /// preset_mean_ms preset_p50_ms preset_p95_ms speedup`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("write to string");
        kv("variant", self.variant.clone());
        kv("params", self.params.to_string());
        kv("storage_bytes", self.storage_bytes.to_string());
        kv("height", self.height.to_string());
        kv("width", self.width.to_string());
        kv("reps", self.reps.to_string());
        kv("warmup", self.warmup.to_string());
        kv("threads", self.threads.to_string());
        kv("flops_full", self.flops_full.to_string());
        kv("flops_preset", self.flops_preset.to_string());
        kv("full_mean_ms", format!("{:.4}", self.full.mean_ms));
        kv("full_p50_ms", format!("{:.4}", self.full.p50_ms));
        kv("full_p95_ms", format!("{:.4}", self.full.p95_ms));
        kv("preset_mean_ms", format!("{:.4}", self.preset.mean_ms));
        kv("preset_p50_ms", format!("{:.4}", self.preset.p50_ms));
        kv("preset_p95_ms", format!("{:.4}", self.preset.p95_ms));
        kv("speedup", format!("{:.4}", self.speedup));
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} at {}x{} ({} reps, {} warmup, {} threads)",
            self.variant, self.height, self.width, self.reps, self.warmup, self.threads
        );
        let _ = writeln!(out, "  params         {}", self.params);
        let _ = writeln!(out, "  storage        {} bytes", self.storage_bytes);
        let _ = writeln!(
            out,
            "  {:<8} {:>10} {:>10} {:>10} {:>10}",
            "path", "GFLOPs", "mean ms", "p50 ms", "p95 ms"
        );
        for (name, flops, st) in [
            ("full", self.flops_full, self.full),
            ("preset", self.flops_preset, self.preset),
        ] {
            let _ = writeln!(
                out,
                "  {:<8} {:>10.4} {:>10.3} {:>10.3} {:>10.3}",
                name,
                flops as f64 / 1e9,
                st.mean_ms,
                st.p50_ms,
                st.p95_ms
            );
        }
        let _ = writeln!(out, "  speedup        {:.3}x", self.speedup);
        out
    }
}
