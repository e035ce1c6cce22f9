use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tfp::bench::DEFAULT_WARMUP;
use tfp::commands::{self, Size};
use tfp_core::Variant;

#[derive(Parser)]
#[command(
    name = "tfp",
    version,
    about = "Fast texture transfer with preset texture feature maps"
)]
struct Cli {
    /// Worker threads for inference (TFP_THREADS takes precedence; 0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stylize a content image with a preset
    Stylize {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        preset: PathBuf,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shallow (content) fusion strength; defaults to the preset's recommendation
        #[arg(long)]
        lambda_s: Option<f32>,
        /// Deep (texture) fusion strength; defaults to the preset's recommendation
        #[arg(long)]
        lambda_d: Option<f32>,
    },
    /// Decode a pure texture image from seeded noise
    Texture {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "256x256")]
        size: Size,
        #[arg(long, default_value_t = 1.0)]
        lambda_d: f32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preset management
    Preset {
        #[command(subcommand)]
        command: PresetCommand,
    },
    /// Time the full path against the preset path
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        preset: PathBuf,
        /// Optional content image; seeded pixels are used otherwise
        #[arg(long)]
        content: Option<PathBuf>,
        #[arg(long, default_value = "512x512")]
        size: Size,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: usize,
        /// Write a key=value report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write randomly initialized weights
    Init {
        #[arg(long, value_enum, default_value_t = VariantArg::Tfp)]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    /// Encode seeded noise into a preset file
    Gen {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "256x256")]
        size: Size,
        #[arg(long, default_value = "style")]
        style_id: String,
        #[arg(long)]
        lambda_s: Option<f32>,
        #[arg(long)]
        lambda_d: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Tfp,
    TfpL,
}

fn thread_count(flag: usize) -> Result<usize> {
    match std::env::var("TFP_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .with_context(|| format!("TFP_THREADS={v:?}")),
        _ => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cli.threads)?)
        .build()?;
    pool.install(|| match cli.command {
        Command::Stylize {
            weights,
            preset,
            content,
            out,
            lambda_s,
            lambda_d,
        } => commands::stylize(&commands::StylizeArgs {
            weights,
            preset,
            content,
            out,
            lambda_s,
            lambda_d,
        }),
        Command::Texture {
            weights,
            seed,
            size,
            lambda_d,
            out,
        } => {
            let seed = commands::texture(&commands::TextureArgs {
                weights,
                seed,
                size,
                lambda_d,
                out,
            })?;
            println!("seed {seed}");
            Ok(())
        }
        Command::Preset {
            command:
                PresetCommand::Gen {
                    weights,
                    seed,
                    size,
                    style_id,
                    lambda_s,
                    lambda_d,
                    out,
                },
        } => {
            let p = commands::preset_gen(&commands::PresetGenArgs {
                weights,
                seed,
                size,
                style_id,
                lambda_s,
                lambda_d,
                out,
            })?;
            println!("seed {}", p.seed);
            println!("features {}", p.features.shape());
            Ok(())
        }
        Command::Bench {
            weights,
            preset,
            content,
            size,
            reps,
            warmup,
            report,
        } => {
            let r = commands::bench(&commands::BenchArgs {
                weights,
                preset,
                content,
                size,
                reps,
                warmup,
                report,
            })?;
            print!("{}", r.to_table());
            Ok(())
        }
        Command::Init { variant, seed, out } => {
            let variant = match variant {
                VariantArg::Tfp => Variant::Tfp,
                VariantArg::TfpL => Variant::TfpL,
            };
            commands::init(&commands::InitArgs { variant, seed, out })
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
