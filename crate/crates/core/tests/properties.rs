use num_complex::Complex;
use num_rational::Ratio;
use proptest::prelude::*;

use ofdm_core::channel::{apply_multipath, apply_timing_offset, frequency_response, ChannelSpec, Tap};
use ofdm_core::coding::{conv_encode, viterbi_decode_hard, viterbi_decode_soft, ConvCode, Interleaver};
use ofdm_core::mapping::{dqpsk_decode, dqpsk_encode, map_bits, Constellation, DqpskReference, Scheme};
use ofdm_core::profiles::{
    format_decimal, parse_decimal, profile_80211a, profile_by_name, timeslice_power_saving, transceive,
    TimeSliceSpec, TransceiveOptions,
};
use ofdm_core::signal::{dft_demodulate, idft_modulate, papr_db};
use ofdm_core::{FreqSymbol, Sample};

fn complex_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Sample>> {
    proptest::collection::vec((-10f64..10.0, -10f64..10.0), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex::new(re, im)).collect())
}

fn bits(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, len)
}

proptest! {
    #[test]
    fn transform_round_trip_and_parseval(log_n in 1u32..10, seed in complex_vec(512..513)) {
        let n = 1usize << log_n;
        let x: Vec<Sample> = seed[..n].to_vec();
        let t = idft_modulate(&FreqSymbol::new(x.clone()).unwrap()).unwrap();
        let back = dft_demodulate(&t).unwrap();
        for (a, b) in back.bins().iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        let time: f64 = t.samples().iter().map(|s| s.norm_sqr()).sum();
        let freq: f64 = x.iter().map(|s| s.norm_sqr()).sum();
        prop_assert!((time - n as f64 * freq).abs() <= 1e-9 * time.max(1.0));
    }

    #[test]
    fn papr_is_scale_invariant(x in complex_vec(1..100), scale in 1e-3f64..1e3) {
        let a = papr_db(&x);
        let scaled: Vec<Sample> = x.iter().map(|v| v * scale).collect();
        let b = papr_db(&scaled);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn interleaver_round_trip(rows in 1usize..17, cols in 1usize..40, data in bits(1..640)) {
        let il = Interleaver::row_column(rows, cols).unwrap();
        let block: Vec<u8> = data.iter().copied().cycle().take(rows * cols).collect();
        prop_assert_eq!(il.deinterleave(&il.interleave(&block).unwrap()).unwrap(), block);
    }

    #[test]
    fn hard_viterbi_corrects_one_error(msg in bits(1..100), flip in any::<prop::sample::Index>()) {
        for code in [ConvCode::rate_half_k7(), ConvCode::rate_quarter_k7()] {
            let mut coded = conv_encode(&msg, &code);
            let i = flip.index(coded.len());
            coded[i] ^= 1;
            prop_assert_eq!(&viterbi_decode_hard(&coded, &code).unwrap(), &msg);
            let llr: Vec<f64> = coded.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect();
            prop_assert_eq!(&viterbi_decode_soft(&llr, &code).unwrap(), &msg);
        }
    }

    #[test]
    fn coherent_points_have_unit_mean_energy(which in 0usize..4) {
        let scheme = [Scheme::Bpsk, Scheme::Qpsk, Scheme::Qam16, Scheme::Qam64][which];
        let c = Constellation::<f64>::new(scheme);
        let mean = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points().len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
        let all: Vec<u8> = (0..c.points().len())
            .flat_map(|l| (0..c.bits_per_symbol()).rev().map(move |j| ((l >> j) & 1) as u8))
            .collect();
        prop_assert_eq!(map_bits(&all, &c).unwrap().len(), c.points().len());
    }

    #[test]
    fn dqpsk_round_trip_and_unit_modulus(carriers in 1usize..40, symbols in 1usize..6, data in bits(480..481)) {
        let start: Vec<Sample> = (0..carriers).map(|k| Complex::from_polar(1.0, 0.3 * k as f64)).collect();
        let mut reference = DqpskReference::new(start.clone()).unwrap();
        let blocks: Vec<Vec<u8>> = (0..symbols)
            .map(|s| (0..2 * carriers).map(|i| data[(s * 2 * carriers + i) % data.len()]).collect())
            .collect();
        let tx = dqpsk_encode(&blocks, &mut reference).unwrap();
        for sym in &tx {
            for z in sym {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }
        // Any common rotation of the received stream cancels out.
        let rot = Complex::from_polar(1.0, 1.1);
        let rx: Vec<Vec<Sample>> = tx.iter().map(|s| s.iter().map(|z| z * rot).collect()).collect();
        let ref_rx: Vec<Sample> = start.iter().map(|z| z * rot).collect();
        prop_assert_eq!(dqpsk_decode(&rx, &ref_rx).unwrap(), blocks.concat());
    }

    #[test]
    fn multipath_matches_circular_response(taps in proptest::collection::vec((-1f64..1.0, -1f64..1.0), 1..6)) {
        let n = 64;
        let taps: Vec<Tap<f64>> = taps.iter().enumerate().map(|(d, &(re, im))| Tap::new(2 * d, Complex::new(re, im))).collect();
        let h = frequency_response(&taps, n);
        let mut impulse = vec![Complex::new(0.0, 0.0); n];
        impulse[0] = Complex::new(1.0, 0.0);
        let y = apply_multipath(&impulse, &taps).unwrap();
        let y = dft_demodulate(&ofdm_core::TimeSymbol::new(y[..n].to_vec()).unwrap()).unwrap();
        for k in 0..n {
            prop_assert!((y.bins()[k] * n as f64 - h[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn timing_offset_delays_without_distortion(x in complex_vec(31..50), offset in 0isize..30) {
        let y = apply_timing_offset(&x, offset).unwrap();
        prop_assert!(apply_timing_offset(&x, x.len() as isize).is_err());
        prop_assert_eq!(&apply_timing_offset(&x, -offset).unwrap()[..], &x[offset as usize..]);
        prop_assert_eq!(y.len(), x.len() + offset as usize);
        prop_assert_eq!(&y[offset as usize..], &x[..]);
    }

    #[test]
    fn decimal_text_round_trips(num in -1_000_000i64..1_000_000, exp in 0u32..7) {
        let r = Ratio::new(num, 10i64.pow(exp));
        prop_assert_eq!(parse_decimal(&format_decimal(r)).unwrap(), r);
    }

    #[test]
    fn timeslice_saving_is_bounded(burst in 1i64..1000, extra in 0i64..1000, overhead in 0i64..1000) {
        let cycle = Ratio::from_integer(burst + extra);
        let spec = TimeSliceSpec::new(Ratio::from_integer(burst), cycle, Ratio::from_integer(overhead)).unwrap();
        let s = timeslice_power_saving(&spec);
        prop_assert!(s >= Ratio::from_integer(0) && s < Ratio::from_integer(1));
        prop_assert_eq!(s, Ratio::from_integer(1) - spec.duty_cycle());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn impaired_link_is_error_free_without_noise(cfo in -0.45f64..0.45, offset in 0isize..300, delay in 1usize..12) {
        let p = profile_80211a();
        let spec = ChannelSpec {
            taps: vec![Tap::new(0, Complex::new(1.0, 0.0)), Tap::new(delay, Complex::new(0.3, -0.2))],
            cfo_fraction: cfo,
            timing_offset: offset,
            ..ChannelSpec::clean()
        };
        let data: Vec<u8> = (0..1500).map(|i| ((i * 7 + offset as usize) % 3 % 2) as u8).collect();
        let (out, m) = transceive(&data, &p, &spec, &TransceiveOptions::default()).unwrap();
        prop_assert_eq!(out, data);
        prop_assert_eq!(m.detected_start, offset as usize);
    }

    #[test]
    fn every_profile_survives_a_timing_offset(which in 0usize..8, offset in 0isize..200) {
        let name = ofdm_core::profiles::PROFILE_NAMES[which];
        let p = profile_by_name(name).unwrap();
        let spec = ChannelSpec { timing_offset: offset, ..ChannelSpec::clean() };
        let data: Vec<u8> = (0..800).map(|i| (i % 5 % 2) as u8).collect();
        let (out, _) = transceive(&data, &p, &spec, &TransceiveOptions::default()).unwrap();
        prop_assert_eq!(out, data);
    }
}
