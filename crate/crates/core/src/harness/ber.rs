//! Monte Carlo bit error rate sweep.

use rayon::prelude::*;
use serde::Serialize;

use super::config::SweepConfig;
use super::percentile;
use crate::profiles::{transceive, transmit, OfdmProfile};
use crate::rng::{split_seed, SimRng};
use crate::{Error, Result};

/// One sweep point. `elapsed_s` is simulated air time, not wall-clock time, so
/// that output files are a pure function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub papr_p99_db: f64,
    pub elapsed_s: f64,
}

/// Runs every SNR point of `cfg` (in parallel) and returns records in the
/// configured order.
///
/// A point keeps drawing frames until it has `min_bits` and either `max_errors`
/// errors or `max_bits` bits. Frames whose synchronization fails are counted as
/// lost: their bits are compared against an all-zero decision. A point where
/// every frame is lost is an estimation failure.
pub fn run_ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>> {
    let profile = cfg.validate()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    cfg.snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| run_point(cfg, &profile, snr, split_seed(cfg.seed, i as u64)))
        .collect()
}

fn run_point(cfg: &SweepConfig, profile: &OfdmProfile, ebn0_db: f64, seed: u64) -> Result<BerRecord> {
    let mut rng = SimRng::new(seed);
    let snr = cfg.sample_snr_db(profile, ebn0_db);
    let frame_bits = cfg.frame_bits(profile);
    let opts = cfg.options();
    let frame_airtime = transmit(&vec![0; frame_bits], profile, &opts)?.samples.len() as f64 / profile.sample_rate_hz();
    let max_bits = cfg.max_bits();

    let (mut bits, mut errors, mut frames, mut lost) = (0u64, 0u64, 0u64, 0u64);
    let mut paprs = Vec::new();
    while !(bits >= cfg.min_bits && (errors >= cfg.max_errors || bits >= max_bits)) {
        let payload = rng.bits(frame_bits);
        let spec = cfg.channel.spec(snr, rng.next_u64());
        frames += 1;
        match transceive(&payload, profile, &spec, &opts) {
            Ok((_, m)) => {
                errors += m.bit_errors as u64;
                paprs.extend(m.symbol_papr_db);
            }
            Err(e) if e.is_estimation_failure() => {
                log::debug!("frame {frames} at {ebn0_db} dB lost: {e}");
                lost += 1;
                errors += payload.iter().filter(|&&b| b == 1).count() as u64;
            }
            Err(e) => return Err(e),
        }
        bits += frame_bits as u64;
    }
    if lost == frames {
        return Err(Error::EstimationFailed(format!(
            "all {frames} frames lost synchronization at {ebn0_db} dB"
        )));
    }
    Ok(BerRecord {
        snr_db: ebn0_db,
        bits,
        errors,
        ber: errors as f64 / bits as f64,
        papr_p99_db: percentile(&paprs, 99.0).unwrap_or(f64::NAN),
        elapsed_s: frames as f64 * frame_airtime,
    })
}
