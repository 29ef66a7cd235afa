//! Turbo-annihilation decoding of hook errors in bivariate bicycle codes.

pub mod baselines;
pub mod circuit;
pub mod code;
pub mod compile;
pub mod gf2;
pub mod scalar;
pub mod sim;
pub mod trellis;
pub mod ta;

/// Double-precision TA decoder.
pub type TaDecoderF64<'g> = ta::TaDecoder<'g, f64>;
/// Single-precision TA decoder.
pub type TaDecoderF32<'g> = ta::TaDecoder<'g, f32>;
