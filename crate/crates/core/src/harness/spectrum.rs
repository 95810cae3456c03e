//! Welch power spectral density of the transmitted data stream.

use num_complex::Complex;
use serde::Serialize;

use crate::fft::Radix2Fft;
use crate::profiles::{transmit, OfdmProfile, TransceiveOptions};
use crate::rng::SimRng;
use crate::{Error, Result, Sample};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub freq_hz: f64,
    pub psd_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending frequency, 0 dB at the mean level on the data carriers.
    pub points: Vec<SpectrumPoint>,
    /// Sum of the linear PSD over all bins.
    pub total_power: f64,
    /// Mean power of the analysed samples.
    pub time_power: f64,
    /// Spread of the PSD across the data carrier centres.
    pub in_band_ripple_db: f64,
    pub occupied_bw_20db_hz: f64,
    pub occupied_bw_30db_hz: f64,
}

/// Welch estimate with a periodic Hann window and 50% overlap, natural bin
/// order, scaled so the bins sum to the mean signal power.
pub fn welch_psd(samples: &[Sample], segment_len: usize) -> Result<Vec<f64>> {
    let fft = Radix2Fft::<f64>::new(segment_len)?;
    if samples.len() < segment_len {
        return Err(Error::InvalidInput(format!(
            "{} samples are shorter than one {segment_len}-sample segment",
            samples.len()
        )));
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|n| 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / segment_len as f64).cos()))
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let hop = segment_len / 2;
    let mut acc = vec![0.0; segment_len];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut start = 0;
    while start + segment_len <= samples.len() {
        for ((b, x), w) in buf.iter_mut().zip(&samples[start..start + segment_len]).zip(&window) {
            *b = x * w;
        }
        fft.forward(&mut buf)?;
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * segment_len as f64 * window_energy);
    Ok(acc.into_iter().map(|a| a * scale).collect())
}

fn occupied_bandwidth(psd_db: &[f64], level_db: f64, bin_hz: f64) -> f64 {
    let lo = psd_db.iter().position(|&p| p >= level_db);
    let hi = psd_db.iter().rposition(|&p| p >= level_db);
    match (lo, hi) {
        (Some(lo), Some(hi)) => (hi - lo + 1) as f64 * bin_hz,
        _ => 0.0,
    }
}

/// Spectrum of `n_symbols` uncoded random data symbols, optionally windowed.
/// Segments span four symbol transforms, so carrier `k` sits on bin `4k`.
pub fn run_spectrum(profile: &OfdmProfile, windowed: bool, n_symbols: usize, seed: u64) -> Result<Spectrum> {
    if n_symbols < 100 {
        return Err(Error::InvalidParameter(format!(
            "spectrum needs at least 100 symbols, got {n_symbols}"
        )));
    }
    let opts = TransceiveOptions {
        coded: false,
        windowing: windowed,
        ..TransceiveOptions::default()
    };
    let bits = SimRng::new(seed).bits(n_symbols * profile.coded_bits_per_symbol());
    let tx = transmit(&bits, profile, &opts)?;
    let data = &tx.samples[tx.data_start..];

    let oversample = 4;
    let seg = oversample * profile.n_fft();
    let psd = welch_psd(data, seg)?;
    let total_power: f64 = psd.iter().sum();
    let analysed = (data.len() - seg) / (seg / 2) * (seg / 2) + seg;
    let time_power = data[..analysed].iter().map(|x| x.norm_sqr()).sum::<f64>() / analysed as f64;

    // Constant pilots repeat every symbol and form spectral lines rather than a
    // smooth density, so the in-band level is taken on the data carriers.
    let centres: Vec<usize> = profile
        .data_carriers()
        .iter()
        .map(|&k| (k * oversample as i64).rem_euclid(seg as i64) as usize)
        .collect();
    let reference = centres.iter().map(|&b| psd[b]).sum::<f64>() / centres.len() as f64;
    let to_db = |p: f64| 10.0 * (p.max(1e-300) / reference).log10();
    let centre_db: Vec<f64> = centres.iter().map(|&b| to_db(psd[b])).collect();
    let ripple = centre_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - centre_db.iter().copied().fold(f64::INFINITY, f64::min);

    let bin_hz = profile.sample_rate_hz() / seg as f64;
    let half = seg / 2;
    let points: Vec<SpectrumPoint> = (0..seg)
        .map(|j| SpectrumPoint {
            freq_hz: (j as f64 - half as f64) * bin_hz,
            psd_db: to_db(psd[(j + half) % seg]),
        })
        .collect();
    let shifted: Vec<f64> = points.iter().map(|p| p.psd_db).collect();
    Ok(Spectrum {
        total_power,
        time_power,
        in_band_ripple_db: ripple,
        occupied_bw_20db_hz: occupied_bandwidth(&shifted, -20.0, bin_hz),
        occupied_bw_30db_hz: occupied_bandwidth(&shifted, -30.0, bin_hz),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::profile_80211a;

    #[test]
    fn single_tone_lands_on_its_bin() {
        let seg = 64;
        let x: Vec<Sample> = (0..seg * 20)
            .map(|n| Complex::from_polar(2.0, std::f64::consts::TAU * 8.0 * n as f64 / seg as f64))
            .collect();
        let psd = welch_psd(&x, seg).unwrap();
        let peak = (0..seg).max_by(|&a, &b| psd[a].total_cmp(&psd[b])).unwrap();
        assert_eq!(peak, 8);
        assert!((psd.iter().sum::<f64>() - 4.0).abs() < 1e-9);
        assert!(welch_psd(&x[..10], seg).is_err());
    }

    #[test]
    fn wlan_spectrum_properties() {
        let p = profile_80211a();
        let plain = run_spectrum(&p, false, 4000, 1).unwrap();
        let windowed = run_spectrum(&p, true, 4000, 1).unwrap();
        for s in [&plain, &windowed] {
            assert!((s.total_power / s.time_power - 1.0).abs() < 0.01);
            assert!(s.in_band_ripple_db < 1.0, "{}", s.in_band_ripple_db);
        }
        assert!(windowed.occupied_bw_20db_hz < plain.occupied_bw_20db_hz);
        assert!(windowed.occupied_bw_30db_hz <= plain.occupied_bw_30db_hz);
        assert!(run_spectrum(&p, false, 10, 1).is_err());
    }
}
