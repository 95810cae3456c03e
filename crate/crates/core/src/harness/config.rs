//! Sweep configuration file.
//!
//! The file is TOML. Keys (all optional except `profile` and `snr_db`):
//!
//! ```toml
//! profile = "80211a"          # 80211a, dab-1..dab-4, dvbh-2k, dvbh-4k, dvbh-8k
//! modulation = "qpsk"         # bpsk, qpsk, qam16, qam64 (coherent profiles only)
//! snr_db = [0, 2, 4, 6]       # Eb/N0 per information bit, dB
//! min_bits = 100000
//! max_errors = 100
//! max_bits = 10000000
//! frame_bits = 3072           # information bits per transceive call
//! coded = true
//! soft = true
//! knowledge = "estimated"     # or "perfect"
//! windowing = false
//! cfo_compensation = true
//! pilot_tracking = true
//! seed = 1
//! out = "ber.csv"
//! format = "csv"              # or "json"
//!
//! [channel]
//! cfo = 0.0                   # subcarrier spacings
//! timing_offset = 0           # samples
//! taps = [{ delay = 0, re = 1.0, im = 0.0 }]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::{ChannelSpec, Tap};
use crate::mapping::Scheme;
use crate::profiles::{profile_by_name, Knowledge, OfdmProfile, TransceiveOptions};
use crate::{Complex, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapConfig {
    pub delay: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub taps: Vec<TapConfig>,
    pub cfo: f64,
    pub timing_offset: isize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            taps: vec![TapConfig {
                delay: 0,
                re: 1.0,
                im: 0.0,
            }],
            cfo: 0.0,
            timing_offset: 0,
        }
    }
}

impl ChannelConfig {
    /// Channel for one frame at a per-sample SNR.
    pub fn spec(&self, snr_db: f64, seed: u64) -> ChannelSpec {
        ChannelSpec {
            taps: self
                .taps
                .iter()
                .map(|t| Tap::new(t.delay, Complex::new(t.re, t.im)))
                .collect(),
            snr_db,
            cfo_fraction: self.cfo,
            timing_offset: self.timing_offset,
            seed,
        }
    }
}

fn default_min_bits() -> u64 {
    100_000
}

fn default_max_errors() -> u64 {
    100
}

fn default_seed() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub profile: String,
    #[serde(default)]
    pub modulation: Option<Scheme>,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_bits")]
    pub min_bits: u64,
    #[serde(default = "default_max_errors")]
    pub max_errors: u64,
    /// Hard cap per point; defaults to ten times `min_bits`.
    #[serde(default)]
    pub max_bits: Option<u64>,
    #[serde(default)]
    pub frame_bits: Option<usize>,
    #[serde(default = "yes")]
    pub coded: bool,
    #[serde(default = "yes")]
    pub soft: bool,
    #[serde(default)]
    pub knowledge: Knowledge,
    #[serde(default)]
    pub windowing: bool,
    #[serde(default = "yes")]
    pub cfo_compensation: bool,
    #[serde(default = "yes")]
    pub pilot_tracking: bool,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl SweepConfig {
    /// Minimal configuration with the defaults above.
    pub fn new(profile: impl Into<String>, snr_db: Vec<f64>) -> Self {
        Self {
            profile: profile.into(),
            modulation: None,
            snr_db,
            min_bits: default_min_bits(),
            max_errors: default_max_errors(),
            max_bits: None,
            frame_bits: None,
            coded: true,
            soft: true,
            knowledge: Knowledge::default(),
            windowing: false,
            cfo_compensation: true,
            pilot_tracking: true,
            channel: ChannelConfig::default(),
            seed: default_seed(),
            out: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .message()
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<file>".into());
            Error::config(key, e.message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolved profile, with the modulation override applied.
    pub fn resolve_profile(&self) -> Result<OfdmProfile> {
        let p = profile_by_name(&self.profile).map_err(|e| Error::config("profile", e.to_string()))?;
        match self.modulation {
            Some(s) => p.with_modulation(s).map_err(|e| Error::config("modulation", e.to_string())),
            None => Ok(p),
        }
    }

    pub fn max_bits(&self) -> u64 {
        self.max_bits.unwrap_or(self.min_bits.saturating_mul(10)).max(self.min_bits)
    }

    pub fn options(&self) -> TransceiveOptions {
        TransceiveOptions {
            coded: self.coded,
            soft: self.soft,
            knowledge: self.knowledge,
            windowing: self.windowing,
            cfo_compensation: self.cfo_compensation,
            pilot_tracking: self.pilot_tracking,
            ..TransceiveOptions::default()
        }
    }

    /// Information bits per frame: 32 symbols' worth unless configured.
    pub fn frame_bits(&self, profile: &OfdmProfile) -> usize {
        self.frame_bits.unwrap_or_else(|| {
            let per_symbol = profile.coded_bits_per_symbol();
            let rate_div = if self.coded { profile.code().n_out() } else { 1 };
            (32 * per_symbol / rate_div).max(1)
        })
    }

    /// Code rate times bits per constellation point.
    pub fn info_bits_per_carrier(&self, profile: &OfdmProfile) -> f64 {
        let rate = if self.coded {
            1.0 / profile.code().n_out() as f64
        } else {
            1.0
        };
        profile.modulation().bits_per_symbol() as f64 * rate
    }

    /// Per-sample SNR that yields the requested Eb/N0 on the data carriers.
    ///
    /// Each used bin carries unit energy, so the per-sample signal power is
    /// `N_used` while the noise per bin after the `1/N` DFT is `σ²/N`.
    pub fn sample_snr_db(&self, profile: &OfdmProfile, ebn0_db: f64) -> f64 {
        let factor = self.info_bits_per_carrier(profile) * profile.used_count() as f64 / profile.n_fft() as f64;
        ebn0_db + 10.0 * factor.log10()
    }

    pub fn validate(&self) -> Result<OfdmProfile> {
        let profile = self.resolve_profile()?;
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "at least one SNR point is required"));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::config("snr_db", "SNR values must be numbers or +inf"));
        }
        if self.min_bits == 0 {
            return Err(Error::config("min_bits", "must be positive"));
        }
        if self.max_errors == 0 {
            return Err(Error::config("max_errors", "must be positive"));
        }
        if self.frame_bits == Some(0) {
            return Err(Error::config("frame_bits", "must be positive"));
        }
        if self.channel.taps.is_empty() {
            return Err(Error::config("channel.taps", "at least one tap is required"));
        }
        self.channel
            .spec(0.0, 0)
            .validate()
            .map_err(|e| Error::config("channel", e.to_string()))?;
        Ok(profile)
    }

    /// Advisory messages about statistical validity.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_bits < 10_000 {
            out.push(format!("min_bits = {} is below 10000; BER estimates will be noisy", self.min_bits));
        }
        for &snr in &self.snr_db {
            let expected = super::theory::qpsk_ber(snr);
            if expected > 0.0 && (self.min_bits as f64) < 100.0 / expected {
                out.push(format!(
                    "min_bits = {} is below 100/BER ≈ {:.0} at {snr} dB",
                    self.min_bits,
                    100.0 / expected
                ));
            }
        }
        out
    }
}
