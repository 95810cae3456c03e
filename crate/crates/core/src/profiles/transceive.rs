//! End-to-end link: transmitter chain, channel and receiver chain.

use num_complex::Complex;
use serde::Serialize;

use super::dab::{dab_reference_sequence, demodulate_frame, detect_null_symbol_with, modulate_frame, DEFAULT_NULL_THRESHOLD};
use super::{Framing, Modulation, OfdmProfile};
use crate::channel::{frequency_response, ChannelOutput, ChannelSpec};
use crate::coding::{conv_encode, viterbi_decode_hard, viterbi_decode_soft};
use crate::mapping::{demap_hard, demap_soft, dqpsk_decode, dqpsk_demap_soft, map_bits, Constellation};
use crate::signal::{add_cyclic_prefix, apply_window, papr_db, SymbolTransform, TimeDomainSymbol};
use crate::sync::{
    equalize, estimate_cfo, estimate_channel, estimate_timing, lag_correlation, cfo_from_correlation,
    track_pilot_phase, ChannelEstimate, Preamble, DEFAULT_DETECTION_THRESHOLD,
};
use crate::{Error, FreqSymbol, Result, Sample};

/// Source of the receiver's timing, carrier offset and channel knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knowledge {
    /// Values taken from the channel description (genie receiver).
    Perfect,
    /// Values estimated from the preamble or frame structure.
    #[default]
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransceiveOptions {
    /// Apply the profile's convolutional code.
    pub coded: bool,
    /// Soft-decision Viterbi input (otherwise hard decisions).
    pub soft: bool,
    pub knowledge: Knowledge,
    /// Taper symbol edges with the profile's rolloff.
    pub windowing: bool,
    /// Samples the DFT window is moved into the prefix. Defaults to the rolloff
    /// when windowing and, with estimated timing, to `guard/8` after a preamble
    /// or `guard/2` after a null symbol, whose detection is coarser. An early
    /// window only rotates each carrier by a fixed phase, which differential
    /// demodulation ignores.
    pub fft_backoff: Option<usize>,
    pub cfo_compensation: bool,
    /// Common phase correction from the pilots (estimated knowledge only).
    pub pilot_tracking: bool,
    pub detection_threshold: Option<f64>,
}

impl Default for TransceiveOptions {
    fn default() -> Self {
        Self {
            coded: true,
            soft: true,
            knowledge: Knowledge::Estimated,
            windowing: false,
            fft_backoff: None,
            cfo_compensation: true,
            pilot_tracking: true,
            detection_threshold: None,
        }
    }
}

impl TransceiveOptions {
    fn backoff(&self, profile: &OfdmProfile) -> Result<usize> {
        let b = self.fft_backoff.unwrap_or_else(|| {
            let w = if self.windowing { profile.window_rolloff() } else { 0 };
            let t = match self.knowledge {
                Knowledge::Estimated => match profile.framing() {
                    Framing::Preamble => profile.guard_len() / 8,
                    Framing::NullSymbol => profile.guard_len() / 2,
                },
                Knowledge::Perfect => 0,
            };
            w.max(t)
        });
        if b > profile.guard_len() {
            return Err(Error::InvalidParameter(format!(
                "DFT backoff {b} exceeds the guard of {}",
                profile.guard_len()
            )));
        }
        Ok(b)
    }

    fn rolloff(&self, profile: &OfdmProfile) -> usize {
        if self.windowing {
            profile.window_rolloff()
        } else {
            0
        }
    }
}

/// Counters for one transceive call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub bits: usize,
    pub bit_errors: usize,
    pub data_symbols: usize,
    /// Subcarrier values discarded because `|H|` fell under the erasure floor.
    pub erased_bins: usize,
    /// Signal to measured noise power, per sample; infinite when noiseless.
    pub measured_snr_db: f64,
    /// PAPR of each data symbol body.
    pub symbol_papr_db: Vec<f64>,
    /// Duration of the transmitted burst.
    pub airtime_s: f64,
    pub detected_start: usize,
    pub cfo_estimate: f64,
}

impl MetricsRecord {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }
}

/// Transmitted burst.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub samples: Vec<Sample>,
    /// Index of the first data symbol.
    pub data_start: usize,
    pub data_symbols: usize,
    /// Length of the (possibly coded) stream before zero padding.
    pub coded_len: usize,
    pub symbol_papr_db: Vec<f64>,
}

fn coded_stream(bits: &[u8], profile: &OfdmProfile, opts: &TransceiveOptions) -> Result<Vec<u8>> {
    if bits.is_empty() {
        return Err(Error::InvalidInput("no bits to transmit".into()));
    }
    if let Some(i) = bits.iter().position(|&b| b > 1) {
        return Err(Error::InvalidInput(format!("bit {i} is not 0 or 1")));
    }
    Ok(if opts.coded {
        conv_encode(bits, profile.code())
    } else {
        bits.to_vec()
    })
}

/// Runs the transmitter: code, pad with zeros to whole symbols, interleave per
/// symbol, map, insert pilots, IDFT, prefix, optional window, concatenate behind
/// the preamble (or null and reference symbols for differential profiles).
pub fn transmit(bits: &[u8], profile: &OfdmProfile, opts: &TransceiveOptions) -> Result<Transmission> {
    let coded = coded_stream(bits, profile, opts)?;
    let block = profile.coded_bits_per_symbol();
    let n_sym = coded.len().div_ceil(block);
    let mut padded = coded.clone();
    padded.resize(n_sym * block, 0);
    let il = profile.interleaver();
    let blocks = padded
        .chunks(block)
        .map(|c| il.interleave(c))
        .collect::<Result<Vec<_>>>()?;
    let rolloff = opts.rolloff(profile);

    match profile.modulation() {
        Modulation::Dqpsk => {
            let reference = dab_reference_sequence(profile.data_carriers().len());
            let (frame, paprs) = modulate_frame(profile, &reference, &blocks, rolloff)?;
            Ok(Transmission {
                samples: frame.samples(),
                data_start: 2 * profile.symbol_len(),
                data_symbols: n_sym,
                coded_len: coded.len(),
                symbol_papr_db: paprs,
            })
        }
        Modulation::Coherent(scheme) => {
            let preamble = Preamble::<f64>::new(profile.n_fft(), profile.guard_len(), &profile.used_bins())?;
            let constellation = Constellation::<f64>::new(scheme);
            let transform = SymbolTransform::<f64>::new(profile.n_fft())?;
            let data_bins = profile.data_bins();
            let pilot_bins = profile.pilot_bins();
            let mut samples = preamble.samples().to_vec();
            samples.reserve(n_sym * profile.symbol_len());
            let mut paprs = Vec::with_capacity(n_sym);
            for block in &blocks {
                let values = map_bits(block, &constellation)?;
                let mut bins = vec![Complex::new(0.0, 0.0); profile.n_fft()];
                for (&b, v) in data_bins.iter().zip(values) {
                    bins[b] = v;
                }
                for &(b, v) in &pilot_bins {
                    bins[b] = v;
                }
                transform.modulate_in_place(&mut bins)?;
                paprs.push(papr_db(&bins)?);
                let sym = add_cyclic_prefix(&TimeDomainSymbol::new(bins)?, profile.guard_len())?;
                samples.extend_from_slice(apply_window(&sym, rolloff)?.samples());
            }
            Ok(Transmission {
                samples,
                data_start: preamble.len(),
                data_symbols: n_sym,
                coded_len: coded.len(),
                symbol_papr_db: paprs,
            })
        }
    }
}

/// Receiver-side result before bit comparison.
struct Reception {
    /// Deinterleaved soft values (positive favours 1), one per coded bit.
    llrs: Vec<f64>,
    /// Deinterleaved hard decisions.
    hard: Vec<u8>,
    /// Coded bits carried on erased subcarriers.
    erased: Vec<bool>,
    erased_bins: usize,
    start: usize,
    cfo: f64,
}

fn perfect_start(spec: &ChannelSpec) -> Result<usize> {
    usize::try_from(spec.timing_offset)
        .map_err(|_| Error::NotFound("burst start was cut off by the timing offset".into()))
}

/// Removes `cfo` with phase zero at `origin`.
fn derotate(rx: &[Sample], cfo: f64, n_fft: usize, origin: usize) -> Vec<Sample> {
    if cfo == 0.0 {
        return rx.to_vec();
    }
    let w = -std::f64::consts::TAU * cfo / n_fft as f64;
    rx.iter()
        .enumerate()
        .map(|(m, &x)| x * Complex::from_polar(1.0, w * (m as f64 - origin as f64)))
        .collect()
}

fn receive_coherent(
    out: &ChannelOutput,
    spec: &ChannelSpec,
    profile: &OfdmProfile,
    opts: &TransceiveOptions,
    n_sym: usize,
) -> Result<Reception> {
    let Modulation::Coherent(scheme) = profile.modulation() else {
        unreachable!("coherent receiver on a differential profile")
    };
    let n = profile.n_fft();
    let g = profile.guard_len();
    let used = profile.used_bins();
    let preamble = Preamble::<f64>::new(n, g, &used)?;
    let backoff = opts.backoff(profile)?;
    let rx = &out.samples;

    let start = match opts.knowledge {
        Knowledge::Perfect => perfect_start(spec)?,
        Knowledge::Estimated => estimate_timing(
            rx,
            &preamble,
            opts.detection_threshold.unwrap_or(DEFAULT_DETECTION_THRESHOLD),
        )?,
    };
    let cfo = match opts.knowledge {
        Knowledge::Perfect => spec.cfo_fraction,
        Knowledge::Estimated if opts.cfo_compensation => estimate_cfo(rx, &preamble, start)?,
        Knowledge::Estimated => 0.0,
    };
    let need = start + preamble.len() + n_sym * profile.symbol_len();
    if rx.len() < need {
        return Err(Error::EstimationFailed(format!(
            "burst at {start} needs {need} samples, {} received",
            rx.len()
        )));
    }
    let rx = derotate(&rx[..need], cfo, n, start);
    let transform = SymbolTransform::<f64>::new(n)?;
    let demod = |pos: usize| -> Result<FreqSymbol> {
        let mut buf = rx[pos..pos + n].to_vec();
        transform.demodulate_in_place(&mut buf)?;
        FreqSymbol::new(buf)
    };

    let est = match opts.knowledge {
        Knowledge::Perfect => {
            let ramp = -std::f64::consts::TAU * backoff as f64 / n as f64;
            let h = frequency_response(&spec.taps, n)
                .into_iter()
                .enumerate()
                .map(|(k, h)| h * Complex::from_polar(1.0, ramp * k as f64))
                .collect();
            ChannelEstimate::from_response(h, &used, Some(out.noise_variance / n as f64))?
        }
        Knowledge::Estimated => {
            let long = start + preamble.long_offset() - backoff;
            let training = [demod(long)?, demod(long + n)?];
            estimate_channel(&training, preamble.long_bins(), &used)?
        }
    };
    let mean_h2 = used.iter().filter_map(|&b| est.get(b)).map(|h| h.norm_sqr()).sum::<f64>() / used.len() as f64;
    let n0 = est
        .noise_var()
        .unwrap_or(0.0)
        .max(1e-12 * mean_h2)
        .max(f64::MIN_POSITIVE);

    let constellation = Constellation::<f64>::new(scheme);
    let bps = scheme.bits_per_symbol();
    let data_bins = profile.data_bins();
    let pilots = profile.pilot_bins();
    let il = profile.interleaver();
    let block = profile.coded_bits_per_symbol();
    let mut rec = Reception {
        llrs: Vec::with_capacity(n_sym * block),
        hard: Vec::with_capacity(n_sym * block),
        erased: Vec::with_capacity(n_sym * block),
        erased_bins: 0,
        start,
        cfo,
    };
    let data_start = start + preamble.len();
    for i in 0..n_sym {
        let mut y = demod(data_start + i * profile.symbol_len() + g - backoff)?;
        // The genie receiver has no residual phase to track.
        if opts.pilot_tracking && opts.knowledge == Knowledge::Estimated && !pilots.is_empty() {
            y = track_pilot_phase(&y, &pilots, Some(&est))?.symbol;
        }
        let eq = equalize(&y, &est)?;
        let values: Vec<Sample> = data_bins.iter().map(|&b| eq.symbol.bins()[b]).collect();
        let mut llrs = demap_soft(&values, &constellation, 1.0)?;
        let hard = demap_hard(&values, &constellation);
        let mut erased = vec![false; block];
        for (j, &b) in data_bins.iter().enumerate() {
            let range = j * bps..(j + 1) * bps;
            if eq.erased[b] {
                rec.erased_bins += 1;
                llrs[range.clone()].iter_mut().for_each(|l| *l = 0.0);
                erased[range].iter_mut().for_each(|e| *e = true);
            } else {
                let w = est.get(b).map_or(0.0, |h| h.norm_sqr()) / n0;
                llrs[range].iter_mut().for_each(|l| *l *= w);
            }
        }
        rec.llrs.extend(il.deinterleave(&llrs)?);
        rec.hard.extend(il.deinterleave(&hard)?);
        rec.erased.extend(il.deinterleave(&erased)?);
    }
    Ok(rec)
}

fn receive_differential(
    out: &ChannelOutput,
    spec: &ChannelSpec,
    profile: &OfdmProfile,
    opts: &TransceiveOptions,
    n_sym: usize,
) -> Result<Reception> {
    let n = profile.n_fft();
    let g = profile.guard_len();
    let s = profile.symbol_len();
    let backoff = opts.backoff(profile)?;
    let rx = &out.samples;
    let start = match opts.knowledge {
        Knowledge::Perfect => perfect_start(spec)?,
        Knowledge::Estimated => detect_null_symbol_with(
            rx,
            profile,
            opts.detection_threshold.unwrap_or(DEFAULT_NULL_THRESHOLD),
        )?,
    };
    // A late start estimate may run past the end of the burst, where the
    // channel is silent.
    let need = start + s * (2 + n_sym);
    let mut rx = rx.clone();
    rx.resize(need.max(rx.len()), Complex::new(0.0, 0.0));
    let rx = &rx;
    let cfo = match opts.knowledge {
        Knowledge::Perfect => spec.cfo_fraction,
        Knowledge::Estimated if opts.cfo_compensation && g > 0 => {
            // Prefix against symbol tail, over the reference and data symbols.
            let acc = (1..2 + n_sym).fold(Complex::new(0.0, 0.0), |acc, j| {
                let p = start + j * s;
                acc + lag_correlation(rx, p..p + g, n)
            });
            cfo_from_correlation(acc, n, n)?
        }
        Knowledge::Estimated => 0.0,
    };
    let rx = derotate(&rx[..need], cfo, n, start);
    let (reference, data) = demodulate_frame(&rx, profile, start, n_sym, backoff)?;
    // Uniform LLR scaling does not change max-log Viterbi decisions.
    let llrs = dqpsk_demap_soft(&data, &reference, 1.0)?;
    let hard = dqpsk_decode(&data, &reference)?;
    let il = profile.interleaver();
    let block = profile.coded_bits_per_symbol();
    let mut rec = Reception {
        llrs: Vec::with_capacity(llrs.len()),
        hard: Vec::with_capacity(hard.len()),
        erased: vec![false; n_sym * block],
        erased_bins: 0,
        start,
        cfo,
    };
    for (l, h) in llrs.chunks(block).zip(hard.chunks(block)) {
        rec.llrs.extend(il.deinterleave(l)?);
        rec.hard.extend(il.deinterleave(h)?);
    }
    Ok(rec)
}

/// Sends `bits` through `profile` and `channel` and decodes them.
///
/// The coded stream is zero padded to whole symbols and the receiver drops the
/// padding, so any message length is accepted. Coded bits on erased subcarriers
/// enter the decoder as zero-confidence values; without coding they count as errors.
pub fn transceive(
    bits: &[u8],
    profile: &OfdmProfile,
    channel: &ChannelSpec,
    opts: &TransceiveOptions,
) -> Result<(Vec<u8>, MetricsRecord)> {
    let tx = transmit(bits, profile, opts)?;
    let out = channel.apply(&tx.samples, profile.n_fft())?;
    let mut rec = match profile.framing() {
        Framing::NullSymbol => receive_differential(&out, channel, profile, opts, tx.data_symbols)?,
        Framing::Preamble => receive_coherent(&out, channel, profile, opts, tx.data_symbols)?,
    };
    rec.llrs.truncate(tx.coded_len);
    rec.hard.truncate(tx.coded_len);
    rec.erased.truncate(tx.coded_len);

    let (decoded, errors) = if opts.coded {
        let decoded = if opts.soft {
            viterbi_decode_soft(&rec.llrs, profile.code())?
        } else {
            viterbi_decode_hard(&rec.hard, profile.code())?
        };
        let errors = decoded.iter().zip(bits).filter(|(a, b)| a != b).count();
        (decoded, errors)
    } else {
        let errors = rec
            .hard
            .iter()
            .zip(bits)
            .zip(&rec.erased)
            .filter(|((a, b), e)| **e || a != b)
            .count();
        (rec.hard, errors)
    };

    let measured_snr_db = if out.measured_noise_power > 0.0 {
        10.0 * (out.signal_power / out.measured_noise_power).log10()
    } else {
        f64::INFINITY
    };
    let metrics = MetricsRecord {
        bits: bits.len(),
        bit_errors: errors,
        data_symbols: tx.data_symbols,
        erased_bins: rec.erased_bins,
        measured_snr_db,
        symbol_papr_db: tx.symbol_papr_db,
        airtime_s: tx.samples.len() as f64 / profile.sample_rate_hz(),
        detected_start: rec.start,
        cfo_estimate: rec.cfo,
    };
    Ok((decoded, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Tap;
    use crate::profiles::{profile_80211a, profile_by_name, profile_dab, DabMode};
    use crate::rng::SimRng;

    fn c(re: f64, im: f64) -> Sample {
        Complex::new(re, im)
    }

    #[test]
    fn clean_identity_every_profile() {
        for name in crate::profiles::PROFILE_NAMES {
            let p = profile_by_name(name).unwrap();
            for coded in [true, false] {
                let opts = TransceiveOptions { coded, ..Default::default() };
                let bits = SimRng::new(7).bits(3000);
                let (out, m) = transceive(&bits, &p, &ChannelSpec::clean(), &opts).unwrap();
                assert_eq!(out, bits, "{name} coded={coded}");
                assert_eq!(m.bit_errors, 0);
                assert_eq!(m.detected_start, 0);
            }
        }
    }

    #[test]
    fn windowed_clean_identity() {
        let p = profile_80211a();
        let bits = SimRng::new(1).bits(2000);
        for knowledge in [Knowledge::Perfect, Knowledge::Estimated] {
            let opts = TransceiveOptions { windowing: true, knowledge, ..Default::default() };
            let (out, _) = transceive(&bits, &p, &ChannelSpec::clean(), &opts).unwrap();
            assert_eq!(out, bits);
        }
    }

    #[test]
    fn multipath_within_guard_is_error_free() {
        let p = profile_80211a();
        let bits = SimRng::new(2).bits(4000);
        let spec = ChannelSpec {
            taps: vec![Tap::new(0, c(1.0, 0.0)), Tap::new(5, c(0.4, -0.3)), Tap::new(12, c(0.0, 0.2))],
            timing_offset: 37,
            cfo_fraction: 0.13,
            ..ChannelSpec::clean()
        };
        for knowledge in [Knowledge::Perfect, Knowledge::Estimated] {
            let opts = TransceiveOptions { coded: false, knowledge, fft_backoff: Some(0), ..Default::default() };
            let (out, m) = transceive(&bits, &p, &spec, &opts).unwrap();
            assert_eq!(m.bit_errors, 0, "{knowledge:?}");
            assert_eq!(out, bits);
            assert_eq!(m.detected_start, 37);
        }
    }

    #[test]
    fn dab_with_offsets() {
        let p = profile_dab(DabMode::II);
        let bits = SimRng::new(3).bits(2000);
        let spec = ChannelSpec {
            taps: vec![Tap::new(0, c(1.0, 0.0)), Tap::new(30, c(0.5, 0.1))],
            timing_offset: 200,
            cfo_fraction: 0.2,
            snr_db: 15.0,
            seed: 4,
        };
        let (out, m) = transceive(&bits, &p, &spec, &TransceiveOptions::default()).unwrap();
        assert_eq!(out, bits);
        assert!((m.cfo_estimate - 0.2).abs() < 0.01);
    }

    #[test]
    fn erased_bins() {
        let p = profile_80211a();
        // H_k = 1 − exp(−j2π·16k/64) vanishes on every fourth bin: 12 data bins.
        let spec = ChannelSpec {
            taps: vec![Tap::new(0, c(1.0, 0.0)), Tap::new(16, c(-1.0, 0.0))],
            ..ChannelSpec::clean()
        };
        let bits = SimRng::new(5).bits(960);
        let uncoded = TransceiveOptions { coded: false, knowledge: Knowledge::Perfect, ..Default::default() };
        let (_, m) = transceive(&bits, &p, &spec, &uncoded).unwrap();
        assert_eq!(m.data_symbols, 10);
        assert_eq!(m.erased_bins, 120);
        assert_eq!(m.bit_errors, 240);
        let coded = TransceiveOptions { knowledge: Knowledge::Perfect, ..Default::default() };
        let (out, m) = transceive(&bits, &p, &spec, &coded).unwrap();
        assert!(m.erased_bins > 0);
        assert_eq!(out, bits);
    }

    #[test]
    fn noisy_ber_decreases_with_snr() {
        let p = profile_80211a();
        let bits = SimRng::new(6).bits(20_000);
        let ber = |snr: f64| {
            let spec = ChannelSpec { snr_db: snr, seed: 1, ..ChannelSpec::clean() };
            let opts = TransceiveOptions { coded: false, ..Default::default() };
            transceive(&bits, &p, &spec, &opts).unwrap().1.ber()
        };
        let (a, b, c) = (ber(3.0), ber(8.0), ber(13.0));
        assert!(a > b && b >= c, "{a} {b} {c}");
        assert!(a > 0.01);
    }

    #[test]
    fn metrics_bookkeeping() {
        let p = profile_80211a();
        let bits = SimRng::new(8).bits(1000);
        let (_, m) = transceive(&bits, &p, &ChannelSpec::clean(), &TransceiveOptions::default()).unwrap();
        // (1000 + 6)·2 coded bits over 96 per symbol.
        assert_eq!(m.data_symbols, 21);
        assert_eq!(m.symbol_papr_db.len(), 21);
        assert!(m.symbol_papr_db.iter().all(|&x| x > 0.0));
        assert_eq!(m.measured_snr_db, f64::INFINITY);
        let samples = 160 + 16 + 128 + 21 * 80;
        assert!((m.airtime_s - samples as f64 / 20e6).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let p = profile_80211a();
        let spec = ChannelSpec::clean();
        let opts = TransceiveOptions::default();
        assert!(matches!(transceive(&[], &p, &spec, &opts), Err(Error::InvalidInput(_))));
        assert!(matches!(transceive(&[2], &p, &spec, &opts), Err(Error::InvalidInput(_))));
        let cut = ChannelSpec { timing_offset: -5, ..ChannelSpec::clean() };
        let perfect = TransceiveOptions { knowledge: Knowledge::Perfect, ..Default::default() };
        assert!(transceive(&[1, 0, 1], &p, &cut, &perfect).unwrap_err().is_estimation_failure());
        let big = TransceiveOptions { fft_backoff: Some(17), ..Default::default() };
        assert!(transceive(&[1], &p, &spec, &big).is_err());
    }
}
