//! DAB transmission frame: null symbol, phase reference symbol, DQPSK data.

use num_complex::Complex;

use super::{profile_dab, DabMode, OfdmProfile, Rational};
use crate::coding::{conv_encode, viterbi_decode_soft};
use crate::mapping::{dqpsk_demap_soft, dqpsk_encode, DqpskReference};
use crate::signal::{add_cyclic_prefix, apply_window, papr_db, SymbolTransform, TimeDomainSymbol};
use crate::{Error, Result, Sample, TimeSymbol};

/// Largest energy ratio between the null window and the following window that
/// still counts as a null symbol.
pub const DEFAULT_NULL_THRESHOLD: f64 = 0.5;

/// Unit-modulus chirp `exp(jπk²/K)` used as the default phase reference.
pub fn dab_reference_sequence(n_carriers: usize) -> Vec<Sample> {
    let k_total = n_carriers.max(1) as f64;
    (0..n_carriers)
        .map(|k| {
            let k = k as f64;
            Complex::from_polar(1.0, std::f64::consts::PI * k * k / k_total)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DabFrame {
    /// One symbol duration (prefix included) of zeros.
    pub null_symbol: Vec<Sample>,
    pub reference_symbol: TimeSymbol,
    pub data_symbols: Vec<TimeSymbol>,
}

impl DabFrame {
    pub fn samples(&self) -> Vec<Sample> {
        let mut out = self.null_symbol.clone();
        out.extend_from_slice(self.reference_symbol.samples());
        for s in &self.data_symbols {
            out.extend_from_slice(s.samples());
        }
        out
    }

    /// Nominal frame duration: `(2 + S)` symbol times.
    pub fn duration(&self, profile: &OfdmProfile) -> Rational {
        profile.symbol_time() * Rational::from_integer(2 + self.data_symbols.len() as i64)
    }
}

fn time_symbol(
    transform: &SymbolTransform<f64>,
    profile: &OfdmProfile,
    active: &[Sample],
    rolloff: usize,
) -> Result<(TimeSymbol, f64)> {
    let mut bins = vec![Complex::new(0.0, 0.0); profile.n_fft()];
    for (b, v) in profile.data_bins().into_iter().zip(active) {
        bins[b] = *v;
    }
    transform.modulate_in_place(&mut bins)?;
    let papr = papr_db(&bins)?;
    let body = TimeDomainSymbol::new(bins)?;
    let sym = add_cyclic_prefix(&body, profile.guard_len())?;
    Ok((apply_window(&sym, rolloff)?, papr))
}

/// Modulates already interleaved per-symbol bit blocks into a frame. Returns the
/// frame and the PAPR of each data symbol body.
pub(crate) fn modulate_frame(
    profile: &OfdmProfile,
    reference: &[Sample],
    symbol_bits: &[Vec<u8>],
    rolloff: usize,
) -> Result<(DabFrame, Vec<f64>)> {
    let carriers = profile.data_carriers().len();
    if reference.len() != carriers {
        return Err(Error::MissingReference(format!(
            "reference has {} values for {carriers} carriers",
            reference.len()
        )));
    }
    let transform = SymbolTransform::new(profile.n_fft())?;
    let mut state = DqpskReference::new(reference.to_vec())?;
    let active = dqpsk_encode(symbol_bits, &mut state)?;
    let (reference_symbol, _) = time_symbol(&transform, profile, reference, rolloff)?;
    let mut data_symbols = Vec::with_capacity(active.len());
    let mut paprs = Vec::with_capacity(active.len());
    for a in &active {
        let (s, p) = time_symbol(&transform, profile, a, rolloff)?;
        data_symbols.push(s);
        paprs.push(p);
    }
    Ok((
        DabFrame {
            null_symbol: vec![Complex::new(0.0, 0.0); profile.symbol_len()],
            reference_symbol,
            data_symbols,
        },
        paprs,
    ))
}

/// Codes `bits` with the rate-1/4 code, interleaves per symbol and builds the frame.
///
/// The coded length (message plus flush) must fill whole symbols.
pub fn build_dab_frame(bits: &[u8], mode: DabMode, reference: &[Sample]) -> Result<DabFrame> {
    let profile = profile_dab(mode);
    let coded = conv_encode(bits, profile.code());
    let block = profile.coded_bits_per_symbol();
    if !coded.len().is_multiple_of(block) {
        return Err(Error::PaddingRequired {
            len: coded.len(),
            multiple: block,
        });
    }
    let il = profile.interleaver();
    let blocks = coded
        .chunks(block)
        .map(|c| il.interleave(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(modulate_frame(&profile, reference, &blocks, 0)?.0)
}

/// Active-carrier values of the reference and data symbols of a frame whose null
/// symbol starts at `start`. The DFT window begins `backoff` samples before the
/// end of each prefix.
pub(crate) fn demodulate_frame(
    rx: &[Sample],
    profile: &OfdmProfile,
    start: usize,
    n_data: usize,
    backoff: usize,
) -> Result<(Vec<Sample>, Vec<Vec<Sample>>)> {
    let n = profile.n_fft();
    let s = profile.symbol_len();
    let need = start + s * (2 + n_data);
    if rx.len() < need {
        return Err(Error::EstimationFailed(format!(
            "frame at {start} needs {need} samples, {} received",
            rx.len()
        )));
    }
    let transform = SymbolTransform::new(n)?;
    let bins = profile.data_bins();
    let mut symbols = (0..=n_data).map(|j| {
        let pos = start + s * (1 + j) + profile.guard_len() - backoff;
        let mut buf = rx[pos..pos + n].to_vec();
        transform.demodulate_in_place(&mut buf)?;
        Ok(bins.iter().map(|&b| buf[b]).collect::<Vec<_>>())
    });
    let reference = symbols.next().expect("reference symbol")?;
    let data = symbols.collect::<Result<Vec<_>>>()?;
    Ok((reference, data))
}

/// Receives a clean frame: null detection, DQPSK demapping, deinterleaving and
/// soft Viterbi decoding. The number of data symbols follows from the length.
pub fn decode_dab_frame(samples: &[Sample], mode: DabMode) -> Result<Vec<u8>> {
    let profile = profile_dab(mode);
    let start = detect_null_symbol(samples, &profile)?;
    let n_data = ((samples.len() - start) / profile.symbol_len()).saturating_sub(2);
    if n_data == 0 {
        return Err(Error::NotFound("no data symbols after the reference".into()));
    }
    let (reference, data) = demodulate_frame(samples, &profile, start, n_data, 0)?;
    let llrs = dqpsk_demap_soft(&data, &reference, 1.0)?;
    let il = profile.interleaver();
    let mut deinterleaved = Vec::with_capacity(llrs.len());
    for block in llrs.chunks(profile.coded_bits_per_symbol()) {
        deinterleaved.extend(il.deinterleave(block)?);
    }
    viterbi_decode_soft(&deinterleaved, profile.code())
}

/// Start of the null symbol, using the default threshold.
pub fn detect_null_symbol(samples: &[Sample], profile: &OfdmProfile) -> Result<usize> {
    detect_null_symbol_with(samples, profile, DEFAULT_NULL_THRESHOLD)
}

/// Start of the null symbol.
///
/// With `E(i)` the energy of the one-symbol window starting at `i`, the detector
/// minimizes `E(i) / E(i + S)`: the null window followed by the reference symbol.
/// Positions where the following window is empty are skipped, and among equal
/// minima the last is taken so that leading silence does not pull the estimate
/// early. A minimum at or above `threshold` is reported as not found.
pub fn detect_null_symbol_with(samples: &[Sample], profile: &OfdmProfile, threshold: f64) -> Result<usize> {
    let s = profile.symbol_len();
    if samples.len() < 2 * s {
        return Err(Error::NotFound(format!(
            "{} samples cannot hold a null and a reference symbol of {s}",
            samples.len()
        )));
    }
    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0f64);
    for x in samples {
        prefix.push(prefix.last().unwrap() + x.norm_sqr());
    }
    let energy = |i: usize| (prefix[i + s] - prefix[i]).max(0.0);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..=samples.len() - 2 * s {
        let next = energy(i + s);
        if next <= 0.0 {
            continue;
        }
        let ratio = energy(i) / next;
        if best.is_none_or(|(r, _)| ratio <= r) {
            best = Some((ratio, i));
        }
    }
    match best {
        Some((r, i)) if r < threshold => Ok(i),
        Some((r, _)) => Err(Error::NotFound(format!(
            "no null symbol: best energy ratio {r:.3} >= {threshold}"
        ))),
        None => Err(Error::NotFound("stream has no energy".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_awgn, apply_timing_offset};
    use crate::rng::SimRng;

    fn message_len(profile: &OfdmProfile, symbols: usize) -> usize {
        profile.coded_bits_per_symbol() * symbols / profile.code().n_out() - (profile.code().constraint_len() - 1)
    }

    #[test]
    fn frame_structure_and_round_trip() {
        for mode in DabMode::ALL {
            let p = profile_dab(mode);
            let bits = SimRng::new(mode.number() as u64).bits(message_len(&p, 3));
            let reference = dab_reference_sequence(p.data_carriers().len());
            let frame = build_dab_frame(&bits, mode, &reference).unwrap();
            assert_eq!(frame.data_symbols.len(), 3);
            assert!(frame.null_symbol.iter().all(|z| z.norm_sqr() == 0.0));
            assert_eq!(frame.null_symbol.len(), p.symbol_len());
            assert_eq!(frame.duration(&p), p.symbol_time() * Rational::from_integer(5));
            let samples = frame.samples();
            assert_eq!(samples.len(), 5 * p.symbol_len());
            assert_eq!(detect_null_symbol(&samples, &p).unwrap(), 0);
            assert_eq!(decode_dab_frame(&samples, mode).unwrap(), bits);
        }
    }

    #[test]
    fn mode_one_duration() {
        let p = profile_dab(DabMode::I);
        let bits = vec![0u8; message_len(&p, 2)];
        let frame = build_dab_frame(&bits, DabMode::I, &dab_reference_sequence(1536)).unwrap();
        assert_eq!(frame.duration(&p), Rational::new(4 * 1246, 1_000_000));
    }

    #[test]
    fn reference_is_unit_modulus_on_active_carriers() {
        let p = profile_dab(DabMode::II);
        let r = dab_reference_sequence(384);
        let frame = build_dab_frame(&vec![1u8; message_len(&p, 1)], DabMode::II, &r).unwrap();
        let body = &frame.reference_symbol.samples()[p.guard_len()..];
        let mut bins = body.to_vec();
        SymbolTransform::new(p.n_fft()).unwrap().demodulate_in_place(&mut bins).unwrap();
        for b in p.data_bins() {
            assert!((bins[b].norm() - 1.0).abs() < 1e-9);
        }
        assert!(bins[0].norm() < 1e-9);
    }

    #[test]
    fn padding_required() {
        let p = profile_dab(DabMode::III);
        let r = dab_reference_sequence(192);
        let err = build_dab_frame(&vec![0u8; message_len(&p, 1) + 1], DabMode::III, &r).unwrap_err();
        assert!(matches!(err, Error::PaddingRequired { multiple: 384, .. }));
        assert!(matches!(
            build_dab_frame(&vec![0u8; message_len(&p, 1)], DabMode::III, &r[..10]),
            Err(Error::MissingReference(_))
        ));
    }

    #[test]
    fn null_detection_offsets() {
        let p = profile_dab(DabMode::III);
        let r = dab_reference_sequence(192);
        let samples = build_dab_frame(&vec![1u8; message_len(&p, 2)], DabMode::III, &r).unwrap().samples();
        let shifted = apply_timing_offset(&samples, 500).unwrap();
        assert_eq!(detect_null_symbol(&shifted, &p).unwrap(), 500);
        assert!(matches!(detect_null_symbol(&samples[..100], &p), Err(Error::NotFound(_))));
        let flat = vec![Complex::new(1.0, 0.0); 4 * p.symbol_len()];
        assert!(matches!(detect_null_symbol(&flat, &p), Err(Error::NotFound(_))));
    }

    #[test]
    fn null_detection_at_10db() {
        for mode in [DabMode::II, DabMode::III] {
            let p = profile_dab(mode);
            let r = dab_reference_sequence(p.data_carriers().len());
            let bits = SimRng::new(9).bits(message_len(&p, 2));
            let clean = apply_timing_offset(&build_dab_frame(&bits, mode, &r).unwrap().samples(), 500).unwrap();
            let tol = p.guard_len() / 2;
            let good = (0..200)
                .filter(|&t| {
                    let noisy = apply_awgn(&clean, 10.0, &mut SimRng::new(t)).unwrap();
                    detect_null_symbol(&noisy, &p).is_ok_and(|i| i.abs_diff(500) <= tol)
                })
                .count();
            assert!(good >= 190, "{mode:?}: {good}/200");
        }
    }
}
