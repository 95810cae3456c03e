//! `ofdm`: batch measurements on the OFDM simulator.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 when
//! receiver estimation fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use ofdm_core::channel::ChannelSpec;
use ofdm_core::harness::{
    run_ber_sweep, run_papr_ccdf, run_spectrum, write_records, OutputFormat, SweepConfig,
};
use ofdm_core::mapping::Scheme;
use ofdm_core::profiles::{
    build_dab_frame, dab_reference_sequence, decode_dab_frame, format_decimal, parse_decimal, profile_by_name,
    profile_dab, timeslice_power_saving, DabMode, Knowledge, OfdmProfile, TimeSliceSpec,
};
use ofdm_core::rng::SimRng;
use ofdm_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ofdm", version, about = "OFDM physical-layer measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo bit error rate sweep over Eb/N0.
    Ber(BerArgs),
    /// Empirical CCDF of the per-symbol PAPR.
    Papr(PaprArgs),
    /// Welch power spectral density of the transmitted stream.
    Spectrum(SpectrumArgs),
    /// Build, optionally impair, and decode one DAB frame.
    DabFrame(DabArgs),
    /// Receiver power saving of burst (time-sliced) reception.
    Timeslice(TimesliceArgs),
}

#[derive(Args)]
struct BerArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    modulation: Option<String>,
    /// Eb/N0 points: `start:step:stop` (inclusive), `start:stop`, or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    min_bits: Option<u64>,
    #[arg(long)]
    max_errors: Option<u64>,
    #[arg(long)]
    max_bits: Option<u64>,
    #[arg(long)]
    frame_bits: Option<usize>,
    #[arg(long)]
    uncoded: bool,
    /// Hard-decision Viterbi input.
    #[arg(long)]
    hard: bool,
    /// perfect or estimated
    #[arg(long)]
    knowledge: Option<String>,
    #[arg(long)]
    windowing: bool,
    /// Carrier offset in subcarrier spacings.
    #[arg(long, allow_hyphen_values = true)]
    cfo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    timing_offset: Option<isize>,
}

/// Keys shared by the `papr`, `spectrum` and `dab-frame` config files. Unknown
/// keys are ignored so a sweep file can be reused.
#[derive(Debug, Default, Deserialize)]
struct ToolConfig {
    profile: Option<String>,
    modulation: Option<Scheme>,
    seed: Option<u64>,
    symbols: Option<usize>,
    windowed: Option<bool>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct PaprArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    modulation: Option<String>,
    /// Number of random data symbols (default 10000).
    #[arg(long)]
    symbols: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    modulation: Option<String>,
    /// Number of random data symbols (default 1000).
    #[arg(long)]
    symbols: Option<usize>,
    /// Apply raised-cosine edge windowing.
    #[arg(long)]
    windowed: bool,
}

#[derive(Args)]
struct DabArgs {
    #[command(flatten)]
    common: Common,
    /// Transmission mode 1-4.
    #[arg(long, default_value_t = 1)]
    mode: usize,
    /// Data symbols in the frame.
    #[arg(long)]
    symbols: Option<usize>,
    /// Per-sample SNR in dB (noiseless when absent).
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    /// Leading silence in samples.
    #[arg(long, default_value_t = 0)]
    offset: usize,
}

#[derive(Args)]
struct TimesliceArgs {
    #[command(flatten)]
    common: Common,
    /// Burst duration in seconds.
    #[arg(long)]
    burst: String,
    /// Cycle period in seconds.
    #[arg(long)]
    cycle: String,
    /// Wake-up overhead per burst in seconds.
    #[arg(long, default_value = "0")]
    overhead: String,
}

fn config_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config {
        key: key.into(),
        message: e.to_string(),
    }
}

fn parse_format(text: Option<&str>, fallback: OutputFormat) -> Result<OutputFormat> {
    text.map_or(Ok(fallback), str::parse)
}

fn parse_scheme(text: &str) -> Result<Scheme> {
    text.parse().map_err(|e| config_err("modulation", e))
}

fn parse_snr_value(text: &str) -> Result<f64> {
    let t = text.trim();
    if matches!(t, "inf" | "+inf" | "infinity") {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_err("snr", format!("`{t}` is not a number")))
}

/// `start:step:stop` (inclusive), `start:stop` (step 1) or `a,b,c`.
fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let (start, step, stop) = match parts.as_slice() {
        [single] => return single.split(',').map(parse_snr_value).collect(),
        [a, b] => (parse_snr_value(a)?, 1.0, parse_snr_value(b)?),
        [a, s, b] => (parse_snr_value(a)?, parse_snr_value(s)?, parse_snr_value(b)?),
        _ => return Err(config_err("snr", format!("cannot parse range `{text}`"))),
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(config_err("snr", format!("range `{text}` needs start <= stop and a positive step")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn sweep_config(args: &BerArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.common.config {
        Some(path) => SweepConfig::load(path)?,
        None => {
            let profile = args
                .profile
                .clone()
                .ok_or_else(|| config_err("profile", "no profile given (use --profile or --config)"))?;
            let snr = args
                .snr
                .as_deref()
                .ok_or_else(|| config_err("snr", "no SNR points given (use --snr or --config)"))?;
            SweepConfig::new(profile, parse_snr_list(snr)?)
        }
    };
    if let Some(p) = &args.profile {
        cfg.profile = p.clone();
    }
    if let Some(m) = &args.modulation {
        cfg.modulation = Some(parse_scheme(m)?);
    }
    if let Some(s) = &args.snr {
        cfg.snr_db = parse_snr_list(s)?;
    }
    if let Some(v) = args.min_bits {
        cfg.min_bits = v;
    }
    if let Some(v) = args.max_errors {
        cfg.max_errors = v;
    }
    if args.max_bits.is_some() {
        cfg.max_bits = args.max_bits;
    }
    if args.frame_bits.is_some() {
        cfg.frame_bits = args.frame_bits;
    }
    if args.uncoded {
        cfg.coded = false;
    }
    if args.hard {
        cfg.soft = false;
    }
    if let Some(k) = &args.knowledge {
        cfg.knowledge = match k.to_ascii_lowercase().as_str() {
            "perfect" => Knowledge::Perfect,
            "estimated" => Knowledge::Estimated,
            other => return Err(config_err("knowledge", format!("expected perfect or estimated, got `{other}`"))),
        };
    }
    if args.windowing {
        cfg.windowing = true;
    }
    if let Some(c) = args.cfo {
        cfg.channel.cfo = c;
    }
    if let Some(t) = args.timing_offset {
        cfg.channel.timing_offset = t;
    }
    if let Some(s) = args.common.seed {
        cfg.seed = s;
    }
    if args.common.out.is_some() {
        cfg.out = args.common.out.clone();
    }
    cfg.format = parse_format(args.common.format.as_deref(), cfg.format)?;
    cfg.validate()?;
    Ok(cfg)
}

fn tool_config(common: &Common) -> Result<ToolConfig> {
    match &common.config {
        None => Ok(ToolConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| config_err("--config", e.message()))
        }
    }
}

/// Resolved output settings: flags, then config file, then defaults.
struct Output {
    path: Option<PathBuf>,
    format: OutputFormat,
    seed: u64,
}

fn output(common: &Common, file: &ToolConfig) -> Result<Output> {
    Ok(Output {
        path: common.out.clone().or_else(|| file.out.clone()),
        format: parse_format(common.format.as_deref(), file.format.unwrap_or_default())?,
        seed: common.seed.or(file.seed).unwrap_or(1),
    })
}

fn tool_profile(flag: &Option<String>, modulation: &Option<String>, file: &ToolConfig) -> Result<OfdmProfile> {
    let name = flag.clone().or_else(|| file.profile.clone()).unwrap_or_else(|| "80211a".into());
    let p = profile_by_name(&name).map_err(|e| config_err("profile", e))?;
    let scheme = match modulation {
        Some(m) => Some(parse_scheme(m)?),
        None => file.modulation,
    };
    match scheme {
        Some(s) => p.with_modulation(s).map_err(|e| config_err("modulation", e)),
        None => Ok(p),
    }
}

fn write(records: &[impl Serialize], out: &Output) -> Result<()> {
    write_records(records, out.format, out.path.as_deref())
}

fn cmd_ber(args: &BerArgs) -> Result<()> {
    let cfg = sweep_config(args)?;
    let records = run_ber_sweep(&cfg)?;
    write_records(&records, cfg.format, cfg.out.as_deref())
}

fn cmd_papr(args: &PaprArgs) -> Result<()> {
    let file = tool_config(&args.common)?;
    let out = output(&args.common, &file)?;
    let profile = tool_profile(&args.profile, &args.modulation, &file)?;
    let n = args.symbols.or(file.symbols).unwrap_or(10_000);
    if n == 0 {
        return Err(config_err("symbols", "must be positive"));
    }
    write(&run_papr_ccdf(&profile, n, out.seed)?, &out)
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<()> {
    let file = tool_config(&args.common)?;
    let out = output(&args.common, &file)?;
    let profile = tool_profile(&args.profile, &args.modulation, &file)?;
    let n = args.symbols.or(file.symbols).unwrap_or(1_000);
    if n < 100 {
        return Err(config_err("symbols", "spectrum needs at least 100 symbols"));
    }
    let windowed = args.windowed || file.windowed.unwrap_or(false);
    let s = run_spectrum(&profile, windowed, n, out.seed)?;
    eprintln!(
        "total power {:.6} (time domain {:.6}), in-band ripple {:.3} dB, occupied bandwidth {:.0} Hz at -20 dB, {:.0} Hz at -30 dB",
        s.total_power, s.time_power, s.in_band_ripple_db, s.occupied_bw_20db_hz, s.occupied_bw_30db_hz
    );
    write(&s.points, &out)
}

#[derive(Serialize)]
struct DabReport {
    mode: usize,
    data_symbols: usize,
    message_bits: usize,
    samples: usize,
    duration_s: String,
    null_start: usize,
    bit_errors: usize,
}

fn cmd_dab(args: &DabArgs) -> Result<()> {
    let file = tool_config(&args.common)?;
    let out = output(&args.common, &file)?;
    let mode = match args.mode {
        1 => DabMode::I,
        2 => DabMode::II,
        3 => DabMode::III,
        4 => DabMode::IV,
        m => return Err(config_err("mode", format!("DAB modes are 1-4, got {m}"))),
    };
    let symbols = args.symbols.or(file.symbols).unwrap_or(4);
    if symbols == 0 {
        return Err(config_err("symbols", "must be positive"));
    }
    let profile = profile_dab(mode);
    let k = profile.code().constraint_len() - 1;
    let message_bits = profile.coded_bits_per_symbol() * symbols / profile.code().n_out() - k;
    let mut rng = SimRng::new(out.seed);
    let bits = rng.bits(message_bits);
    let frame = build_dab_frame(&bits, mode, &dab_reference_sequence(profile.data_carriers().len()))?;
    let spec = ChannelSpec {
        snr_db: args.snr.unwrap_or(f64::INFINITY),
        timing_offset: args.offset as isize,
        seed: rng.next_u64(),
        ..ChannelSpec::clean()
    };
    let rx = spec.apply(&frame.samples(), profile.n_fft())?;
    let null_start = ofdm_core::profiles::detect_null_symbol(&rx.samples, &profile)?;
    let frame_len = frame.samples().len();
    let decoded = decode_dab_frame(&rx.samples[null_start..(null_start + frame_len).min(rx.samples.len())], mode)?;
    let bit_errors = decoded.iter().zip(&bits).filter(|(a, b)| a != b).count() + bits.len().saturating_sub(decoded.len());
    let report = DabReport {
        mode: args.mode,
        data_symbols: symbols,
        message_bits,
        samples: frame_len,
        duration_s: format_decimal(frame.duration(&profile)),
        null_start,
        bit_errors,
    };
    write(&[report], &out)
}

#[derive(Serialize)]
struct TimesliceReport {
    burst_s: String,
    cycle_s: String,
    overhead_s: String,
    duty_cycle: String,
    saving: String,
}

fn cmd_timeslice(args: &TimesliceArgs) -> Result<()> {
    let file = tool_config(&args.common)?;
    let out = output(&args.common, &file)?;
    let num = |key: &str, text: &str| -> Result<Ratio<i64>> { parse_decimal(text).map_err(|e| config_err(key, e)) };
    let spec = TimeSliceSpec::new(
        num("burst", &args.burst)?,
        num("cycle", &args.cycle)?,
        num("overhead", &args.overhead)?,
    )
    .map_err(|e| config_err("timeslice", e))?;
    let report = TimesliceReport {
        burst_s: format_decimal(spec.burst_duration()),
        cycle_s: format_decimal(spec.cycle_period()),
        overhead_s: format_decimal(spec.wakeup_overhead()),
        duty_cycle: format_decimal(spec.duty_cycle()),
        saving: format_decimal(timeslice_power_saving(&spec)),
    };
    write(&[report], &out)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ber(a) => cmd_ber(a),
        Command::Papr(a) => cmd_papr(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::DabFrame(a) => cmd_dab(a),
        Command::Timeslice(a) => cmd_timeslice(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_estimation_failure() { 2 } else { 1 })
        }
    }
}

