//! Baseband OFDM physical-layer simulation.
//!
//! The crate is organized bottom-up:
//!
//! * [`signal`]: DFT based symbol modulation, cyclic prefix, edge windowing, PAPR.
//! * [`mapping`]: Gray-labelled constellations and differential QPSK.
//! * [`coding`]: convolutional codes, Viterbi decoding and block interleaving.
//! * [`channel`]: seeded multipath, AWGN, carrier offset and timing impairments.
//! * [`sync`]: preamble based timing/CFO estimation, channel estimation and equalization.
//! * [`profiles`]: 802.11a-style, DAB and DVB-H numerology plus the end-to-end transceiver.
//! * [`harness`]: Monte Carlo BER sweeps, PAPR CCDF and spectrum estimation.
//!
//! The numerical core (`signal`, `mapping`, `channel`, `sync`) is generic over the
//! scalar type through [`Real`]; the pipeline and harness are fixed to `f64`.
//! The aliases below name the common concrete instantiations.

pub mod channel;
pub mod coding;
mod error;
pub mod fft;
pub mod harness;
pub mod mapping;
pub mod profiles;
pub mod rng;
pub mod signal;
pub mod sync;

use std::fmt::{Debug, Display};

pub use error::{Error, Result};
pub use num_complex::Complex;

/// Floating point scalar usable by the numerical core: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for constants and noise injection.
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn of_usize(x: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(x).expect("usize is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Double precision baseband sample.
pub type Sample = Complex<f64>;
/// Single precision baseband sample.
pub type Sample32 = Complex<f32>;

pub type FreqSymbol = signal::FrequencyDomainSymbol<f64>;
pub type FreqSymbol32 = signal::FrequencyDomainSymbol<f32>;
pub type TimeSymbol = signal::TimeDomainSymbol<f64>;
pub type TimeSymbol32 = signal::TimeDomainSymbol<f32>;
pub type Constellation64 = mapping::Constellation<f64>;
pub type Constellation32 = mapping::Constellation<f32>;
pub type ChannelEstimate64 = sync::ChannelEstimate<f64>;
pub type Preamble64 = sync::Preamble<f64>;
