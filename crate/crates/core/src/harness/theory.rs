//! Closed-form reference curves.

use statrs::function::erf::erfc;

/// `Q(x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded Gray BPSK/QPSK bit error rate `Q(√(2·Eb/N0))` at `ebn0_db`.
pub fn qpsk_ber(ebn0_db: f64) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Eb/N0 in dB where [`qpsk_ber`] equals `target` (bisection).
pub fn qpsk_ebn0_for_ber(target: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if qpsk_ber(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
