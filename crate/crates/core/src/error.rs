use alloc::string::String;

use crate::tensor::Shape;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("data length {len} does not match shape {shape} ({expected} elements)")]
    DataLength {
        shape: Shape,
        len: usize,
        expected: usize,
    },

    #[error("{op}: shape mismatch, {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{op}: expected {expected} input channels, got {actual}")]
    ChannelMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error(
        "{op}: input {height}x{width} is smaller than kernel {kernel} after padding {padding}"
    )]
    InputTooSmall {
        op: &'static str,
        height: usize,
        width: usize,
        kernel: usize,
        padding: usize,
    },

    #[error(
        "{op}: spatial size {height}x{width} is not divisible by {factor}; pad the image first"
    )]
    IndivisibleDims {
        op: &'static str,
        height: usize,
        width: usize,
        factor: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("parameter budget exceeded: {count} > {budget} for {variant}")]
    BudgetExceeded {
        variant: &'static str,
        count: usize,
        budget: usize,
    },

    #[error("invalid preset: {0}")]
    InvalidPreset(String),
}
