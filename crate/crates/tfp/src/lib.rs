//! Files, images, benchmarking and the command implementations behind the
//! `tfp` binary. The numerical work lives in [`tfp_core`].

pub mod bench;
pub mod commands;
pub mod format;
pub mod image_io;

pub use format::FormatError;
