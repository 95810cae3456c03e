//! OFDM symbol modulation primitives.
//!
//! Modulation follows the unnormalized synthesis sum
//! `x[n] = Σ_k X_k·e^{j2πkn/N}`; demodulation carries the `1/N`, so
//! `Σ|x|² = N·Σ|X|²` and a demodulate/modulate round trip is the identity.

use num_complex::Complex;

use crate::fft::{is_power_of_two, Radix2Fft};
use crate::{Error, Real, Result};

fn check_finite<T: Real>(samples: &[Complex<T>]) -> Result<()> {
    match samples
        .iter()
        .position(|s| !(s.re.is_finite() && s.im.is_finite()))
    {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_transform_size(n: usize) -> Result<()> {
    if n < 2 || !is_power_of_two(n) {
        return Err(Error::InvalidSize(format!(
            "transform size {n} is not a power of two >= 2"
        )));
    }
    Ok(())
}

/// Per-subcarrier values `X_k`, `k = 0..N-1` in natural FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDomainSymbol<T> {
    bins: Vec<Complex<T>>,
}

impl<T: Real> FrequencyDomainSymbol<T> {
    pub fn new(bins: Vec<Complex<T>>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidSize("empty frequency-domain symbol".into()));
        }
        check_finite(&bins)?;
        Ok(Self { bins })
    }

    pub fn zeros(n_fft: usize) -> Self {
        Self {
            bins: vec![Complex::new(T::zero(), T::zero()); n_fft.max(1)],
        }
    }

    pub fn n_fft(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    /// Mutable access for filling carriers. Values must stay finite.
    pub fn bins_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.bins
    }

    pub fn into_bins(self) -> Vec<Complex<T>> {
        self.bins
    }
}

/// Time-domain samples of one OFDM symbol, optionally carrying a cyclic prefix.
///
/// With a prefix the layout is `[prefix (guard_len) | body (n_fft)]` and, until a
/// window is applied, the prefix equals the last `guard_len` body samples exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainSymbol<T> {
    samples: Vec<Complex<T>>,
    n_fft: usize,
    guard_len: usize,
    has_prefix: bool,
    rolloff: usize,
}

impl<T: Real> TimeDomainSymbol<T> {
    /// A symbol body without prefix.
    pub fn new(samples: Vec<Complex<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSize("empty time-domain symbol".into()));
        }
        check_finite(&samples)?;
        Ok(Self {
            n_fft: samples.len(),
            samples,
            guard_len: 0,
            has_prefix: false,
            rolloff: 0,
        })
    }

    /// A received symbol laid out as `[prefix | body]`. The prefix content is not
    /// checked, since channels and windows legitimately break the copy relation.
    pub fn with_prefix(samples: Vec<Complex<T>>, n_fft: usize, guard_len: usize) -> Result<Self> {
        if guard_len > n_fft {
            return Err(Error::InvalidGuard { guard_len, n_fft });
        }
        if samples.len() != n_fft + guard_len || n_fft == 0 {
            return Err(Error::InvalidLength {
                expected: n_fft + guard_len,
                actual: samples.len(),
            });
        }
        check_finite(&samples)?;
        Ok(Self {
            samples,
            n_fft,
            guard_len,
            has_prefix: true,
            rolloff: 0,
        })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn guard_len(&self) -> usize {
        self.guard_len
    }

    pub fn has_prefix(&self) -> bool {
        self.has_prefix
    }

    /// Edge taper length applied by [`apply_window`], 0 if unwindowed.
    pub fn rolloff(&self) -> usize {
        self.rolloff
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cached transform for repeated modulation at one size.
#[derive(Debug, Clone)]
pub struct SymbolTransform<T> {
    plan: Radix2Fft<T>,
}

impl<T: Real> SymbolTransform<T> {
    pub fn new(n_fft: usize) -> Result<Self> {
        Ok(Self {
            plan: Radix2Fft::new(n_fft)?,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.plan.len()
    }

    /// `x[n] = Σ_k X_k·e^{j2πkn/N}`, in place.
    pub fn modulate_in_place(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.plan.inverse(buf)
    }

    /// `X_k = (1/N)·Σ_n x[n]·e^{-j2πkn/N}`, in place.
    pub fn demodulate_in_place(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.plan.forward(buf)?;
        let scale = T::one() / T::of_usize(buf.len());
        for v in buf.iter_mut() {
            *v = v.scale(scale);
        }
        Ok(())
    }

    pub fn modulate(&self, sym: &FrequencyDomainSymbol<T>) -> Result<TimeDomainSymbol<T>> {
        let mut buf = sym.bins.clone();
        self.modulate_in_place(&mut buf)?;
        TimeDomainSymbol::new(buf)
    }

    pub fn demodulate(&self, sym: &TimeDomainSymbol<T>) -> Result<FrequencyDomainSymbol<T>> {
        if sym.has_prefix {
            return Err(Error::InvalidSize(
                "symbol still carries a cyclic prefix".into(),
            ));
        }
        let mut buf = sym.samples.clone();
        self.demodulate_in_place(&mut buf)?;
        FrequencyDomainSymbol::new(buf)
    }
}

/// Synthesizes the time-domain body of one symbol (no prefix).
pub fn idft_modulate<T: Real>(sym: &FrequencyDomainSymbol<T>) -> Result<TimeDomainSymbol<T>> {
    check_transform_size(sym.n_fft())?;
    SymbolTransform::new(sym.n_fft())?.modulate(sym)
}

/// Recovers the subcarrier values from a prefix-free symbol body.
pub fn dft_demodulate<T: Real>(sym: &TimeDomainSymbol<T>) -> Result<FrequencyDomainSymbol<T>> {
    if sym.has_prefix || sym.samples.len() != sym.n_fft {
        return Err(Error::InvalidSize(format!(
            "expected a prefix-free body of {} samples, got {}",
            sym.n_fft,
            sym.samples.len()
        )));
    }
    check_transform_size(sym.n_fft)?;
    SymbolTransform::new(sym.n_fft)?.demodulate(sym)
}

/// Prepends the last `guard_len` samples of the body.
pub fn add_cyclic_prefix<T: Real>(
    sym: &TimeDomainSymbol<T>,
    guard_len: usize,
) -> Result<TimeDomainSymbol<T>> {
    if sym.has_prefix {
        return Err(Error::InvalidInput("symbol already has a prefix".into()));
    }
    let n = sym.n_fft;
    if guard_len > n {
        return Err(Error::InvalidGuard {
            guard_len,
            n_fft: n,
        });
    }
    let mut samples = Vec::with_capacity(n + guard_len);
    samples.extend_from_slice(&sym.samples[n - guard_len..]);
    samples.extend_from_slice(&sym.samples);
    Ok(TimeDomainSymbol {
        samples,
        n_fft: n,
        guard_len,
        has_prefix: true,
        rolloff: 0,
    })
}

/// Drops the prefix, returning the `n_fft`-sample body.
pub fn remove_cyclic_prefix<T: Real>(sym: &TimeDomainSymbol<T>) -> Result<TimeDomainSymbol<T>> {
    if !sym.has_prefix {
        return Err(Error::InvalidInput("symbol has no cyclic prefix".into()));
    }
    Ok(TimeDomainSymbol {
        samples: sym.samples[sym.guard_len..].to_vec(),
        n_fft: sym.n_fft,
        guard_len: 0,
        has_prefix: false,
        rolloff: 0,
    })
}

/// Raised-cosine edge weight `0.5·(1 − cos(π·(i+0.5)/R))` for `i` in `0..R`.
pub fn window_taper<T: Real>(i: usize, rolloff: usize) -> T {
    let x = std::f64::consts::PI * (i as f64 + 0.5) / rolloff as f64;
    T::of(0.5 * (1.0 - x.cos()))
}

/// Tapers the first and last `rolloff_samples` samples of the symbol.
///
/// The leading edge rises with [`window_taper`] and the trailing edge is its mirror
/// image. Interior samples are untouched; a rolloff of zero is the identity.
pub fn apply_window<T: Real>(
    sym: &TimeDomainSymbol<T>,
    rolloff_samples: usize,
) -> Result<TimeDomainSymbol<T>> {
    if rolloff_samples > sym.guard_len {
        return Err(Error::InvalidRolloff {
            rolloff: rolloff_samples,
            guard_len: sym.guard_len,
        });
    }
    let mut out = sym.clone();
    let len = out.samples.len();
    for i in 0..rolloff_samples {
        let w: T = window_taper(i, rolloff_samples);
        out.samples[i] = out.samples[i].scale(w);
        out.samples[len - 1 - i] = out.samples[len - 1 - i].scale(w);
    }
    out.rolloff = rolloff_samples;
    Ok(out)
}

/// Abutting concatenation of symbols sharing one numerology.
pub fn concatenate_symbols<T: Real>(symbols: &[TimeDomainSymbol<T>]) -> Result<Vec<Complex<T>>> {
    let Some(first) = symbols.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(symbols.len() * first.len());
    for (i, s) in symbols.iter().enumerate() {
        if s.n_fft != first.n_fft || s.guard_len != first.guard_len || s.has_prefix != first.has_prefix {
            return Err(Error::InvalidSize(format!(
                "symbol {i} has n_fft {} / guard {} but symbol 0 has n_fft {} / guard {}",
                s.n_fft, s.guard_len, first.n_fft, first.guard_len
            )));
        }
        out.extend_from_slice(&s.samples);
    }
    Ok(out)
}

/// Peak-to-average power ratio in dB.
///
/// Exactly 0 for a constant-modulus signal and strictly positive otherwise, even
/// when the excess is below floating-point resolution.
pub fn papr_db<T: Real>(samples: &[Complex<T>]) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::UndefinedPapr);
    }
    if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(Error::NonFinite(i));
    }
    // Normalize by the largest component so tiny or huge samples neither
    // underflow nor overflow when squared.
    let scale = samples
        .iter()
        .fold(T::zero(), |m, s| m.max(s.re.abs()).max(s.im.abs()));
    if scale == T::zero() {
        return Err(Error::UndefinedPapr);
    }
    let powers: Vec<T> = samples.iter().map(|s| s.unscale(scale).norm_sqr()).collect();
    let peak = powers.iter().copied().fold(T::zero(), T::max);
    if powers.iter().all(|&p| p == peak) {
        return Ok(T::zero());
    }
    let mean = powers.iter().copied().fold(T::zero(), |a, p| a + p) / T::of_usize(powers.len());
    let papr = T::of(10.0) * (peak / mean).log10();
    if papr > T::zero() {
        Ok(papr)
    } else {
        Ok(T::min_positive_value())
    }
}
