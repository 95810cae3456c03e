//! Channel impairments: tapped delay line, AWGN, carrier frequency offset and
//! integer timing offset. Every random draw comes from a [`SimRng`].

use num_complex::Complex;

use crate::rng::SimRng;
use crate::{Error, Real, Result, Sample};

/// One path of a tapped delay line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T> {
    pub delay: usize,
    pub gain: Complex<T>,
}

impl<T: Real> Tap<T> {
    pub fn new(delay: usize, gain: Complex<T>) -> Self {
        Self { delay, gain }
    }
}

pub fn validate_taps<T: Real>(taps: &[Tap<T>]) -> Result<()> {
    if taps.is_empty() {
        return Err(Error::InvalidChannel("at least one tap is required".into()));
    }
    for (i, w) in taps.windows(2).enumerate() {
        if w[1].delay <= w[0].delay {
            return Err(Error::InvalidChannel(format!(
                "tap delays must be strictly increasing (tap {} delay {} after {})",
                i + 1,
                w[1].delay,
                w[0].delay
            )));
        }
    }
    if taps.iter().any(|t| !(t.gain.re.is_finite() && t.gain.im.is_finite())) {
        return Err(Error::InvalidChannel("tap gains must be finite".into()));
    }
    Ok(())
}

/// Largest tap delay in samples.
pub fn delay_spread<T>(taps: &[Tap<T>]) -> usize {
    taps.iter().map(|t| t.delay).max().unwrap_or(0)
}

/// `H_k = Σ_i g_i·e^{−j2πk·d_i/N}` for `k = 0..N−1`.
pub fn frequency_response<T: Real>(taps: &[Tap<T>], n_fft: usize) -> Vec<Complex<T>> {
    (0..n_fft)
        .map(|k| {
            taps.iter().fold(Complex::new(T::zero(), T::zero()), |acc, t| {
                let turns = ((k * t.delay) % n_fft) as f64 / n_fft as f64;
                let ph = -std::f64::consts::TAU * turns;
                acc + t.gain * Complex::new(T::of(ph.cos()), T::of(ph.sin()))
            })
        })
        .collect()
}

/// Linear convolution with the tap set; the output grows by the delay spread.
pub fn apply_multipath<T: Real>(samples: &[Complex<T>], taps: &[Tap<T>]) -> Result<Vec<Complex<T>>> {
    validate_taps(taps)?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); samples.len() + delay_spread(taps)];
    for t in taps {
        for (o, &x) in out[t.delay..].iter_mut().zip(samples) {
            *o += t.gain * x;
        }
    }
    Ok(out)
}

pub fn mean_power<T: Real>(samples: &[Complex<T>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples
        .iter()
        .map(|s| s.norm_sqr().to_f64().unwrap_or(f64::NAN))
        .sum::<f64>()
        / samples.len() as f64
}

/// Adds circular complex Gaussian noise of total variance `variance`.
pub fn add_noise<T: Real>(samples: &[Complex<T>], variance: f64, rng: &mut SimRng) -> Vec<Complex<T>> {
    let sigma = (variance / 2.0).sqrt();
    samples
        .iter()
        .map(|&s| {
            let (a, b) = rng.normal_pair();
            s + Complex::new(T::of(sigma * a), T::of(sigma * b))
        })
        .collect()
}

/// Noise variance for `snr_db` relative to `signal_power`; `None` for infinite SNR.
pub fn noise_variance_for(signal_power: f64, snr_db: f64) -> Result<Option<f64>> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(None);
    }
    Ok(Some(signal_power / 10f64.powf(snr_db / 10.0)))
}

/// AWGN at `snr_db` relative to the measured input power.
pub fn apply_awgn<T: Real>(samples: &[Complex<T>], snr_db: f64, rng: &mut SimRng) -> Result<Vec<Complex<T>>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot add noise to an empty signal".into()));
    }
    match noise_variance_for(mean_power(samples), snr_db)? {
        None => Ok(samples.to_vec()),
        Some(var) => Ok(add_noise(samples, var, rng)),
    }
}

/// `y[n] = x[n]·e^{j2π·cfo·n/N}` with the offset in subcarrier spacings.
pub fn apply_cfo<T: Real>(samples: &[Complex<T>], cfo_fraction: f64, n_fft: usize) -> Vec<Complex<T>> {
    if cfo_fraction == 0.0 {
        return samples.to_vec();
    }
    samples
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let turns = (cfo_fraction * n as f64 / n_fft as f64).fract();
            let ph = std::f64::consts::TAU * turns;
            x * Complex::new(T::of(ph.cos()), T::of(ph.sin()))
        })
        .collect()
}

/// Positive offsets prepend zeros; negative offsets drop leading samples.
pub fn apply_timing_offset<T: Real>(samples: &[Complex<T>], offset: isize) -> Result<Vec<Complex<T>>> {
    if offset.unsigned_abs() >= samples.len().max(1) && offset != 0 {
        return Err(Error::InvalidOffset {
            offset,
            len: samples.len(),
        });
    }
    if offset >= 0 {
        let mut out = vec![Complex::new(T::zero(), T::zero()); offset as usize];
        out.extend_from_slice(samples);
        Ok(out)
    } else {
        Ok(samples[offset.unsigned_abs()..].to_vec())
    }
}

/// Complete impairment description for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub taps: Vec<Tap<f64>>,
    /// Per-sample SNR in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Carrier offset in units of the subcarrier spacing.
    pub cfo_fraction: f64,
    pub timing_offset: isize,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self::clean()
    }
}

/// Channel output plus the bookkeeping the receiver metrics need.
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub samples: Vec<Sample>,
    /// Mean power of the faded signal before noise and timing offset.
    pub signal_power: f64,
    /// Per-sample noise variance actually used (0 when noiseless).
    pub noise_variance: f64,
    /// Empirical power of the noise that was added.
    pub measured_noise_power: f64,
}

impl ChannelSpec {
    pub fn clean() -> Self {
        Self {
            taps: vec![Tap::new(0, Complex::new(1.0, 0.0))],
            snr_db: f64::INFINITY,
            cfo_fraction: 0.0,
            timing_offset: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_taps(&self.taps)?;
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidChannel(format!("SNR {} dB", self.snr_db)));
        }
        if !self.cfo_fraction.is_finite() {
            return Err(Error::InvalidChannel("CFO must be finite".into()));
        }
        Ok(())
    }

    pub fn delay_spread(&self) -> usize {
        delay_spread(&self.taps)
    }

    /// Multipath, then CFO, then timing offset, then AWGN.
    ///
    /// The noise level is set from the faded signal power measured before the
    /// timing offset, so leading silence does not lower the effective SNR.
    pub fn apply(&self, samples: &[Sample], n_fft: usize) -> Result<ChannelOutput> {
        self.validate()?;
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty transmit stream".into()));
        }
        let faded = apply_multipath(samples, &self.taps)?;
        let rotated = apply_cfo(&faded, self.cfo_fraction, n_fft);
        let signal_power = mean_power(&rotated);
        let shifted = apply_timing_offset(&rotated, self.timing_offset)?;
        let mut rng = SimRng::new(self.seed);
        let (samples, noise_variance, measured_noise_power) =
            match noise_variance_for(signal_power, self.snr_db)? {
                None => (shifted, 0.0, 0.0),
                Some(var) => {
                    let noisy = add_noise(&shifted, var, &mut rng);
                    let measured = noisy
                        .iter()
                        .zip(&shifted)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        / noisy.len() as f64;
                    (noisy, var, measured)
                }
            };
        Ok(ChannelOutput {
            samples,
            signal_power,
            noise_variance,
            measured_noise_power,
        })
    }
}
