//! Measurement front end: BER sweeps, PAPR statistics and spectra.

mod ber;
pub mod config;
mod output;
mod papr;
mod spectrum;
pub mod theory;

pub use ber::{run_ber_sweep, BerRecord};
pub use config::{ChannelConfig, OutputFormat, SweepConfig, TapConfig};
pub use output::{write_records, write_records_to};
pub use papr::{ccdf, papr_thresholds, run_papr_ccdf, symbol_paprs, CcdfPoint};
pub use spectrum::{run_spectrum, welch_psd, Spectrum, SpectrumPoint};

/// Nearest-rank percentile (`p` in `(0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}
