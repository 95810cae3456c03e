//! Receiver estimation: preamble timing, carrier offset, least-squares channel
//! estimation, zero-forcing equalization and pilot phase tracking.

use num_complex::Complex;

use crate::fft::{next_power_of_two, Radix2Fft};
use crate::signal::SymbolTransform;
use crate::{Error, Real, Result};

/// Number of short-block repetitions in the preamble.
pub const SHORT_REPETITIONS: usize = 10;
/// The short block is a quarter of the transform size.
pub const SHORT_BLOCK_DIVISOR: usize = 4;
/// Default normalized correlation needed to declare a preamble.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.3;

/// Maximal-length sequence from `x^7 + x^4 + 1` with an all-ones seed.
fn prbs7(len: usize) -> Vec<u8> {
    let mut state = 0x7fu8;
    (0..len)
        .map(|_| {
            let bit = ((state >> 6) ^ (state >> 3)) & 1;
            state = ((state << 1) | bit) & 0x7f;
            bit
        })
        .collect()
}

/// Known training waveform: `SHORT_REPETITIONS` copies of an `N/4`-sample block,
/// then a cyclic prefix of `guard_len` and two identical long symbols.
///
/// The short block loads every used bin whose index is a multiple of four with a
/// fixed QPSK sequence; the long symbol loads every used bin with BPSK from a
/// PRBS-7 sequence. Both parts have the mean power of a data symbol whose used
/// bins carry unit energy.
#[derive(Debug, Clone)]
pub struct Preamble<T> {
    n_fft: usize,
    guard_len: usize,
    block_len: usize,
    long_bins: Vec<Complex<T>>,
    long_body: Vec<Complex<T>>,
    samples: Vec<Complex<T>>,
}

impl<T: Real> Preamble<T> {
    /// `used_bins` are natural-order FFT indices of the occupied subcarriers.
    pub fn new(n_fft: usize, guard_len: usize, used_bins: &[usize]) -> Result<Self> {
        let transform = SymbolTransform::<T>::new(n_fft)?;
        if n_fft < 2 * SHORT_BLOCK_DIVISOR {
            return Err(Error::InvalidSize(format!("preamble needs n_fft >= 8, got {n_fft}")));
        }
        if guard_len > n_fft {
            return Err(Error::InvalidGuard { guard_len, n_fft });
        }
        if let Some(&b) = used_bins.iter().find(|&&b| b >= n_fft) {
            return Err(Error::InvalidSize(format!("used bin {b} outside {n_fft}-point transform")));
        }
        let short_loaded: Vec<usize> = used_bins
            .iter()
            .copied()
            .filter(|b| b % SHORT_BLOCK_DIVISOR == 0)
            .collect();
        if short_loaded.is_empty() || used_bins.is_empty() {
            return Err(Error::InvalidParameter(
                "no used bins available for the short training block".into(),
            ));
        }
        let zero = Complex::new(T::zero(), T::zero());

        let amp = (used_bins.len() as f64 / short_loaded.len() as f64).sqrt();
        let mut short_bins = vec![zero; n_fft];
        for (i, &b) in short_loaded.iter().enumerate() {
            // Quadratic phase index keeps the short block's PAPR low.
            let q = (i * (i + 1) / 2) % 4;
            let ph = std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_2 * q as f64;
            short_bins[b] = Complex::new(T::of(amp * ph.cos()), T::of(amp * ph.sin()));
        }
        transform.modulate_in_place(&mut short_bins)?;
        let block_len = n_fft / SHORT_BLOCK_DIVISOR;
        let block = &short_bins[..block_len];

        let signs = prbs7(used_bins.len());
        let mut long_bins = vec![zero; n_fft];
        for (&b, &s) in used_bins.iter().zip(&signs) {
            long_bins[b] = Complex::new(if s == 1 { -T::one() } else { T::one() }, T::zero());
        }
        let mut long_body = long_bins.clone();
        transform.modulate_in_place(&mut long_body)?;

        let mut samples = Vec::with_capacity(SHORT_REPETITIONS * block_len + guard_len + 2 * n_fft);
        for _ in 0..SHORT_REPETITIONS {
            samples.extend_from_slice(block);
        }
        samples.extend_from_slice(&long_body[n_fft - guard_len..]);
        samples.extend_from_slice(&long_body);
        samples.extend_from_slice(&long_body);

        Ok(Self {
            n_fft,
            guard_len,
            block_len,
            long_bins,
            long_body,
            samples,
        })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn guard_len(&self) -> usize {
        self.guard_len
    }

    /// Repetition spacing `L` of the short part.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn short_len(&self) -> usize {
        SHORT_REPETITIONS * self.block_len
    }

    /// Offset of the first long symbol body from the preamble start.
    pub fn long_offset(&self) -> usize {
        self.short_len() + self.guard_len
    }

    /// Frequency-domain training values `X_train` (natural bin order).
    pub fn long_bins(&self) -> &[Complex<T>] {
        &self.long_bins
    }

    pub fn long_body(&self) -> &[Complex<T>] {
        &self.long_body
    }
}

/// Sliding `Σ_n r[p+n]·conj(t[n])` for every `p` where the template fits.
fn cross_correlate<T: Real>(rx: &[Complex<T>], template: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let n = template.len();
    if rx.len() < n {
        return Ok(Vec::new());
    }
    let size = next_power_of_two(rx.len() + n);
    let plan = Radix2Fft::<T>::new(size)?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = rx.to_vec();
    a.resize(size, zero);
    let mut b = template.to_vec();
    b.resize(size, zero);
    plan.forward(&mut a)?;
    plan.forward(&mut b)?;
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    plan.inverse(&mut a)?;
    let scale = T::one() / T::of_usize(size);
    a.truncate(rx.len() - n + 1);
    for v in a.iter_mut() {
        *v = v.scale(scale);
    }
    Ok(a)
}

/// Preamble start index from the long-symbol correlation peak.
///
/// The metric at candidate `p` is the mean of the normalized correlation
/// magnitudes of the windows at `p` and `p + N` against the long symbol, so the
/// pair of repeated long symbols produces a single peak.
pub fn estimate_timing<T: Real>(rx: &[Complex<T>], preamble: &Preamble<T>, threshold: f64) -> Result<usize> {
    let n = preamble.n_fft;
    if rx.len() < preamble.len() {
        return Err(Error::NotFound(format!(
            "{} received samples cannot hold a {}-sample preamble",
            rx.len(),
            preamble.len()
        )));
    }
    let corr = cross_correlate(rx, &preamble.long_body)?;
    let template_energy: f64 = preamble.long_body.iter().map(|s| s.norm_sqr().to_f64().unwrap_or(0.0)).sum();
    let mut prefix = Vec::with_capacity(rx.len() + 1);
    prefix.push(0.0f64);
    for s in rx {
        let last = *prefix.last().unwrap();
        prefix.push(last + s.norm_sqr().to_f64().unwrap_or(0.0));
    }
    // Windows that barely overlap the signal would otherwise turn transform
    // round-off into spurious unit correlations.
    let window_energy = |p: usize| (prefix[p + n] - prefix[p]).max(0.0);
    let floor = 1e-6 * (0..corr.len()).map(window_energy).fold(0.0, f64::max);
    let normalized = |p: usize| -> f64 {
        let e = window_energy(p);
        if e <= floor.max(f64::MIN_POSITIVE) {
            return 0.0;
        }
        (corr[p].norm().to_f64().unwrap_or(0.0) / (e * template_energy).sqrt()).min(1.0)
    };
    let lead = preamble.long_offset();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for p in lead..corr.len().saturating_sub(n) {
        let m = 0.5 * (normalized(p) + normalized(p + n));
        if m > best.0 {
            best = (m, p);
        }
    }
    if !(best.0 >= threshold) {
        return Err(Error::NotFound(format!(
            "peak correlation {:.3} below threshold {threshold}",
            best.0.max(0.0)
        )));
    }
    Ok(best.1 - lead)
}

/// `Σ conj(r[n])·r[n+lag]` over `n` in `range`.
pub fn lag_correlation<T: Real>(rx: &[Complex<T>], range: std::ops::Range<usize>, lag: usize) -> Complex<f64> {
    rx[range.clone()]
        .iter()
        .zip(&rx[range.start + lag..range.end + lag])
        .fold(Complex::new(0.0, 0.0), |acc, (a, b)| {
            let p = a.conj() * b;
            acc + Complex::new(p.re.to_f64().unwrap_or(0.0), p.im.to_f64().unwrap_or(0.0))
        })
}

/// Offset in subcarrier spacings from a lag correlation:
/// `angle(acc)·N/(2π·lag)`, unambiguous for `|cfo| < N/(2·lag)`.
pub fn cfo_from_correlation(acc: Complex<f64>, lag: usize, n_fft: usize) -> Result<f64> {
    if !(acc.norm() > 0.0) || !acc.norm().is_finite() {
        return Err(Error::EstimationFailed("zero-energy lag correlation".into()));
    }
    Ok(acc.arg() * n_fft as f64 / (std::f64::consts::TAU * lag as f64))
}

/// Carrier offset from a preamble starting at `start`.
///
/// A coarse estimate comes from the short blocks (lag `N/4`, range ±2 spacings,
/// the first block skipped as it absorbs multipath transients). It is refined on
/// the two long symbols (lag `N`), whose ±0.5 range is centred on the coarse value.
pub fn estimate_cfo<T: Real>(rx: &[Complex<T>], preamble: &Preamble<T>, start: usize) -> Result<f64> {
    let n = preamble.n_fft;
    let l = preamble.block_len;
    if start + preamble.len() > rx.len() {
        return Err(Error::EstimationFailed(format!(
            "preamble at {start} runs past the {} received samples",
            rx.len()
        )));
    }
    let short_first = start + l;
    let short_end = start + preamble.short_len() - l;
    let coarse = cfo_from_correlation(lag_correlation(rx, short_first..short_end, l), l, n)?;

    let long_start = start + preamble.long_offset();
    let acc = lag_correlation(rx, long_start..long_start + n, n);
    if !(acc.norm() > 0.0) {
        return Err(Error::EstimationFailed("zero-energy long training symbols".into()));
    }
    let derotated = acc * Complex::from_polar(1.0, -std::f64::consts::TAU * coarse);
    Ok(coarse + derotated.arg() / std::f64::consts::TAU)
}

/// Per-subcarrier channel response on the used bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate<T> {
    h: Vec<Complex<T>>,
    defined: Vec<bool>,
    noise_var: Option<T>,
}

impl<T: Real> ChannelEstimate<T> {
    /// Wraps a known response (ideal channel knowledge).
    pub fn from_response(full: Vec<Complex<T>>, used_bins: &[usize], noise_var: Option<T>) -> Result<Self> {
        let mut defined = vec![false; full.len()];
        for &b in used_bins {
            if b >= full.len() {
                return Err(Error::InvalidSize(format!("bin {b} outside response")));
            }
            if !(full[b].re.is_finite() && full[b].im.is_finite()) {
                return Err(Error::NonFinite(b));
            }
            defined[b] = true;
        }
        Ok(Self {
            h: full,
            defined,
            noise_var,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.h.len()
    }

    pub fn get(&self, bin: usize) -> Option<Complex<T>> {
        self.defined.get(bin).copied().unwrap_or(false).then(|| self.h[bin])
    }

    /// Estimated per-bin noise variance of the received values, when available.
    pub fn noise_var(&self) -> Option<T> {
        self.noise_var
    }

    /// Erasure floor `1e-6·max|H|`.
    pub fn erasure_floor(&self) -> T {
        let peak = self
            .h
            .iter()
            .zip(&self.defined)
            .filter(|(_, d)| **d)
            .map(|(h, _)| h.norm())
            .fold(T::zero(), T::max);
        T::of(1e-6) * peak
    }
}

/// Least-squares estimate `H_k = mean_s Y_s[k] / X_train[k]` on the used bins.
///
/// With two or more training symbols the received-value noise variance is also
/// estimated from the symbol-to-symbol differences.
pub fn estimate_channel<T: Real>(
    training: &[crate::signal::FrequencyDomainSymbol<T>],
    x_train: &[Complex<T>],
    used_bins: &[usize],
) -> Result<ChannelEstimate<T>> {
    let n = x_train.len();
    if training.is_empty() {
        return Err(Error::InvalidInput("no training symbols".into()));
    }
    if let Some(s) = training.iter().find(|s| s.n_fft() != n) {
        return Err(Error::InvalidSize(format!(
            "training symbol of {} bins against {n} reference bins",
            s.n_fft()
        )));
    }
    let count = T::of_usize(training.len());
    let mut h = vec![Complex::new(T::zero(), T::zero()); n];
    for &b in used_bins {
        if b >= n {
            return Err(Error::InvalidSize(format!("bin {b} outside {n}-point reference")));
        }
        let x = x_train[b];
        if x.norm_sqr() == T::zero() {
            return Err(Error::DegenerateTraining(b));
        }
        let sum = training
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, s| acc + s.bins()[b] / x);
        h[b] = sum.unscale(count);
    }
    let noise_var = if training.len() >= 2 && !used_bins.is_empty() {
        let mut acc = T::zero();
        for pair in training.windows(2) {
            for &b in used_bins {
                acc += (pair[1].bins()[b] - pair[0].bins()[b]).norm_sqr();
            }
        }
        Some(acc / (T::of(2.0) * T::of_usize((training.len() - 1) * used_bins.len())))
    } else {
        None
    };
    ChannelEstimate::from_response(h, used_bins, noise_var)
}

/// Result of one-tap equalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized<T> {
    pub symbol: crate::signal::FrequencyDomainSymbol<T>,
    /// Bins whose `|H|` fell under the erasure floor; their values are zero.
    pub erased: Vec<bool>,
}

impl<T> Equalized<T> {
    pub fn erased_count(&self) -> usize {
        self.erased.iter().filter(|e| **e).count()
    }
}

/// Zero-forcing `Y_k / H_k` on the bins covered by the estimate.
pub fn equalize<T: Real>(
    sym: &crate::signal::FrequencyDomainSymbol<T>,
    est: &ChannelEstimate<T>,
) -> Result<Equalized<T>> {
    if sym.n_fft() != est.n_fft() {
        return Err(Error::InvalidSize(format!(
            "{}-bin symbol against a {}-bin estimate",
            sym.n_fft(),
            est.n_fft()
        )));
    }
    let floor = est.erasure_floor();
    let zero = Complex::new(T::zero(), T::zero());
    let mut bins = vec![zero; sym.n_fft()];
    let mut erased = vec![false; sym.n_fft()];
    for (b, y) in sym.bins().iter().enumerate() {
        if let Some(h) = est.get(b) {
            if h.norm() < floor || h.norm_sqr() == T::zero() {
                erased[b] = true;
            } else {
                bins[b] = y / h;
            }
        }
    }
    Ok(Equalized {
        symbol: crate::signal::FrequencyDomainSymbol::new(bins)?,
        erased,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotTracking<T> {
    pub symbol: crate::signal::FrequencyDomainSymbol<T>,
    /// Common phase removed, in radians.
    pub theta: T,
    /// True when no usable pilot was available and the symbol passed through.
    pub skipped: bool,
}

/// Removes a common phase `θ = angle(Σ_p Y_p·conj(P_p·H_p))` from every bin.
///
/// `pilots` holds `(bin, transmitted value)`. Without an estimate the symbol is
/// taken as already equalized (`H = 1`). Pilots on erased bins are ignored.
pub fn track_pilot_phase<T: Real>(
    sym: &crate::signal::FrequencyDomainSymbol<T>,
    pilots: &[(usize, Complex<T>)],
    est: Option<&ChannelEstimate<T>>,
) -> Result<PilotTracking<T>> {
    let floor = est.map(|e| e.erasure_floor()).unwrap_or(T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut used = 0;
    for &(b, p) in pilots {
        if b >= sym.n_fft() {
            return Err(Error::InvalidSize(format!("pilot bin {b} outside symbol")));
        }
        let h = match est {
            Some(e) => match e.get(b) {
                Some(h) if h.norm() >= floor && h.norm_sqr() > T::zero() => h,
                _ => continue,
            },
            None => Complex::new(T::one(), T::zero()),
        };
        acc += sym.bins()[b] * (p * h).conj();
        used += 1;
    }
    if used == 0 || acc.norm_sqr() == T::zero() {
        return Ok(PilotTracking {
            symbol: sym.clone(),
            theta: T::zero(),
            skipped: true,
        });
    }
    let theta = acc.arg();
    let rot = Complex::from_polar(T::one(), -theta);
    let bins = sym.bins().iter().map(|&y| y * rot).collect();
    Ok(PilotTracking {
        symbol: crate::signal::FrequencyDomainSymbol::new(bins)?,
        theta,
        skipped: false,
    })
}
