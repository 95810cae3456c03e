//! Empirical PAPR distribution of random payloads.

use serde::Serialize;

use crate::profiles::{transmit, OfdmProfile, TransceiveOptions};
use crate::rng::SimRng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfPoint {
    pub threshold_db: f64,
    /// Fraction of symbols whose PAPR exceeds the threshold.
    pub probability: f64,
}

/// 0 to 16 dB in 0.1 dB steps.
pub fn papr_thresholds() -> Vec<f64> {
    (0..=160).map(|i| f64::from(i) / 10.0).collect()
}

const CHUNK_SYMBOLS: usize = 256;

/// PAPR of `n_symbols` uncoded data symbols with uniformly random bits.
pub fn symbol_paprs(profile: &OfdmProfile, n_symbols: usize, seed: u64) -> Result<Vec<f64>> {
    if n_symbols == 0 {
        return Err(Error::InvalidParameter("need at least one symbol".into()));
    }
    let opts = TransceiveOptions {
        coded: false,
        ..TransceiveOptions::default()
    };
    let mut rng = SimRng::new(seed);
    let mut out = Vec::with_capacity(n_symbols);
    while out.len() < n_symbols {
        let count = CHUNK_SYMBOLS.min(n_symbols - out.len());
        let bits = rng.bits(count * profile.coded_bits_per_symbol());
        out.extend(transmit(&bits, profile, &opts)?.symbol_papr_db);
    }
    Ok(out)
}

/// `P(PAPR > t)` for each threshold.
pub fn ccdf(paprs: &[f64], thresholds: &[f64]) -> Vec<CcdfPoint> {
    let n = paprs.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| CcdfPoint {
            threshold_db: t,
            probability: paprs.iter().filter(|&&p| p > t).count() as f64 / n,
        })
        .collect()
}

pub fn run_papr_ccdf(profile: &OfdmProfile, n_symbols: usize, seed: u64) -> Result<Vec<CcdfPoint>> {
    if n_symbols < 1000 {
        log::warn!("{n_symbols} symbols give a coarse CCDF; 1000 or more is recommended");
    }
    Ok(ccdf(&symbol_paprs(profile, n_symbols, seed)?, &papr_thresholds()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{profile_80211a, profile_dab, DabMode};

    #[test]
    fn ccdf_shape() {
        for p in [profile_80211a(), profile_dab(DabMode::III)] {
            let c = run_papr_ccdf(&p, 1000, 3).unwrap();
            assert_eq!(c.len(), 161);
            assert_eq!(c[0].probability, 1.0);
            assert!(c.windows(2).all(|w| w[1].probability <= w[0].probability));
            assert_eq!(c.last().unwrap().probability, 0.0);
        }
    }

    #[test]
    fn exact_count_and_determinism() {
        let p = profile_80211a();
        let a = symbol_paprs(&p, 300, 9).unwrap();
        assert_eq!(a.len(), 300);
        assert_eq!(a, symbol_paprs(&p, 300, 9).unwrap());
        assert!(symbol_paprs(&p, 0, 9).is_err());
    }
}
