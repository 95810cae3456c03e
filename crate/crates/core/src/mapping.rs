//! Constellation mapping, hard/soft demapping and differential QPSK.
//!
//! Bit groups are read most significant first: the first bit of a group is the
//! top bit of the point label. Soft outputs are max-log LLRs with the convention
//! that a positive value favours bit 1.

use num_complex::Complex;

use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bpsk,
    Qpsk,
    #[serde(rename = "qam16", alias = "16qam")]
    Qam16,
    #[serde(rename = "qam64", alias = "64qam")]
    Qam64,
}

impl Scheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Bpsk => 1,
            Scheme::Qpsk => 2,
            Scheme::Qam16 => 4,
            Scheme::Qam64 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bpsk => "bpsk",
            Scheme::Qpsk => "qpsk",
            Scheme::Qam16 => "qam16",
            Scheme::Qam64 => "qam64",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Scheme::Bpsk),
            "qpsk" => Ok(Scheme::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Scheme::Qam16),
            "qam64" | "64qam" | "64-qam" => Ok(Scheme::Qam64),
            other => Err(Error::InvalidParameter(format!("unknown modulation `{other}`"))),
        }
    }
}

/// Binary-reflected Gray code to natural binary.
fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Per-axis Gray level in `{-(2^m - 1), .., -1, 1, .., 2^m - 1}`.
fn axis_level(bits: usize, m: usize) -> f64 {
    (2 * gray_to_binary(bits)) as f64 - ((1usize << m) - 1) as f64
}

/// A Gray-labelled, unit-average-energy point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    scheme: Scheme,
    points: Vec<Complex<T>>,
}

impl<T: Real> Constellation<T> {
    pub fn new(scheme: Scheme) -> Self {
        let bps = scheme.bits_per_symbol();
        let points = (0..1usize << bps)
            .map(|label| {
                let (re, im) = match scheme {
                    Scheme::Bpsk => (if label == 1 { 1.0 } else { -1.0 }, 0.0),
                    // b0 selects the I sign and b1 the Q sign; a zero bit is positive.
                    Scheme::Qpsk => {
                        let s = std::f64::consts::FRAC_1_SQRT_2;
                        let i = if label & 2 == 0 { s } else { -s };
                        let q = if label & 1 == 0 { s } else { -s };
                        (i, q)
                    }
                    Scheme::Qam16 | Scheme::Qam64 => {
                        let m = bps / 2;
                        let norm = if scheme == Scheme::Qam16 { 10f64 } else { 42f64 }.sqrt();
                        let i_bits = label >> m;
                        let q_bits = label & ((1 << m) - 1);
                        (axis_level(i_bits, m) / norm, axis_level(q_bits, m) / norm)
                    }
                };
                Complex::new(T::of(re), T::of(im))
            })
            .collect();
        Self { scheme, points }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex<T> {
        self.points[label]
    }

    /// Minimum distance label, ties toward the smaller label.
    pub fn nearest_label(&self, y: Complex<T>) -> usize {
        nearest(&self.points, y)
    }
}

fn nearest<T: Real>(points: &[Complex<T>], y: Complex<T>) -> usize {
    let mut best = 0;
    let mut best_d = (y - points[0]).norm_sqr();
    for (label, p) in points.iter().enumerate().skip(1) {
        let d = (y - p).norm_sqr();
        if d < best_d {
            best = label;
            best_d = d;
        }
    }
    best
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::InvalidInput(format!(
            "bit {i} has value {}, expected 0 or 1",
            bits[i]
        ))),
        None => Ok(()),
    }
}

fn push_label_bits(label: usize, bps: usize, out: &mut Vec<u8>) {
    for i in (0..bps).rev() {
        out.push(((label >> i) & 1) as u8);
    }
}

/// Max-log LLRs for one observation against an arbitrary labelled point set.
fn max_log_llrs<T: Real>(points: &[Complex<T>], bps: usize, y: Complex<T>, noise_var: T, out: &mut Vec<T>) {
    let distances: Vec<T> = points.iter().map(|p| (y - p).norm_sqr()).collect();
    for bit in (0..bps).rev() {
        let mut d0 = T::infinity();
        let mut d1 = T::infinity();
        for (label, &d) in distances.iter().enumerate() {
            if (label >> bit) & 1 == 0 {
                d0 = d0.min(d);
            } else {
                d1 = d1.min(d);
            }
        }
        out.push((d0 - d1) / noise_var);
    }
}

/// Maps consecutive `bits_per_symbol` groups to constellation points.
pub fn map_bits<T: Real>(bits: &[u8], c: &Constellation<T>) -> Result<Vec<Complex<T>>> {
    let bps = c.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::PaddingRequired {
            len: bits.len(),
            multiple: bps,
        });
    }
    check_bits(bits)?;
    Ok(bits
        .chunks_exact(bps)
        .map(|group| {
            let label = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            c.points[label]
        })
        .collect())
}

/// Minimum Euclidean distance decisions, ties broken toward the smaller label.
pub fn demap_hard<T: Real>(symbols: &[Complex<T>], c: &Constellation<T>) -> Vec<u8> {
    let bps = c.bits_per_symbol();
    let mut out = Vec::with_capacity(symbols.len() * bps);
    for &y in symbols {
        push_label_bits(c.nearest_label(y), bps, &mut out);
    }
    out
}

/// Max-log LLR per bit: `(min_{b=0} |y−s|² − min_{b=1} |y−s|²) / noise_var`.
pub fn demap_soft<T: Real>(symbols: &[Complex<T>], c: &Constellation<T>, noise_var: T) -> Result<Vec<T>> {
    if !(noise_var > T::zero()) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let bps = c.bits_per_symbol();
    let mut out = Vec::with_capacity(symbols.len() * bps);
    for &y in symbols {
        max_log_llrs(&c.points, bps, y, noise_var, &mut out);
    }
    Ok(out)
}

/// Differential phase for a dibit, Gray ordered around the circle:
/// `00 → π/4, 01 → 3π/4, 11 → 5π/4, 10 → 7π/4`.
fn dqpsk_rotation<T: Real>(b0: u8, b1: u8) -> Complex<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (re, im) = match (b0, b1) {
        (0, 0) => (s, s),
        (0, _) => (-s, s),
        (_, 1) => (-s, -s),
        _ => (s, -s),
    };
    Complex::new(T::of(re), T::of(im))
}

/// The four differential rotations indexed by dibit label.
fn dqpsk_points<T: Real>() -> [Complex<T>; 4] {
    [
        dqpsk_rotation(0, 0),
        dqpsk_rotation(0, 1),
        dqpsk_rotation(1, 0),
        dqpsk_rotation(1, 1),
    ]
}

/// Per-carrier phase state carried between consecutive DQPSK symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DqpskReference<T> {
    prev: Vec<Complex<T>>,
}

impl<T: Real> DqpskReference<T> {
    pub fn new(prev: Vec<Complex<T>>) -> Result<Self> {
        let tol = T::of(1e-12);
        if let Some(i) = prev.iter().position(|z| (z.norm() - T::one()).abs() > tol) {
            return Err(Error::InvalidParameter(format!(
                "reference carrier {i} is not unit modulus"
            )));
        }
        Ok(Self { prev })
    }

    pub fn carriers(&self) -> &[Complex<T>] {
        &self.prev
    }

    pub fn len(&self) -> usize {
        self.prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prev.is_empty()
    }
}

/// Differentially encodes one bit block per symbol (two bits per carrier).
///
/// Returns the active-carrier values of each symbol; `reference` is advanced to the
/// last emitted symbol so that encoding can continue across calls.
pub fn dqpsk_encode<T: Real>(
    symbol_bits: &[Vec<u8>],
    reference: &mut DqpskReference<T>,
) -> Result<Vec<Vec<Complex<T>>>> {
    let carriers = reference.prev.len();
    let mut out = Vec::with_capacity(symbol_bits.len());
    for (s, bits) in symbol_bits.iter().enumerate() {
        if carriers == 0 || bits.len() != 2 * carriers {
            return Err(Error::MissingReference(format!(
                "symbol {s} has {} bits but the reference covers {carriers} carriers",
                bits.len()
            )));
        }
        check_bits(bits)?;
        let next: Vec<Complex<T>> = reference
            .prev
            .iter()
            .zip(bits.chunks_exact(2))
            .map(|(&z, d)| {
                let v = z * dqpsk_rotation::<T>(d[0], d[1]);
                v.unscale(v.norm())
            })
            .collect();
        reference.prev.clone_from(&next);
        out.push(next);
    }
    Ok(out)
}

fn check_dqpsk_shapes<T>(received: &[Vec<Complex<T>>], reference: &[Complex<T>]) -> Result<()> {
    if reference.is_empty() {
        return Err(Error::MissingReference("empty reference symbol".into()));
    }
    if let Some(s) = received.iter().position(|r| r.len() != reference.len()) {
        return Err(Error::MissingReference(format!(
            "symbol {s} has {} carriers but the reference has {}",
            received[s].len(),
            reference.len()
        )));
    }
    Ok(())
}

/// Hard differential decisions from the nearest quadrant of `z(t)·conj(z(t−1))`.
///
/// `reference` is the received reference symbol (not necessarily unit modulus).
pub fn dqpsk_decode<T: Real>(received: &[Vec<Complex<T>>], reference: &[Complex<T>]) -> Result<Vec<u8>> {
    check_dqpsk_shapes(received, reference)?;
    let points = dqpsk_points::<T>();
    let mut out = Vec::with_capacity(received.len() * reference.len() * 2);
    let mut prev = reference;
    for sym in received {
        for (z, p) in sym.iter().zip(prev) {
            push_label_bits(nearest(&points, z * p.conj()), 2, &mut out);
        }
        prev = sym;
    }
    Ok(out)
}

/// Max-log LLRs of the differential products, for soft Viterbi input.
pub fn dqpsk_demap_soft<T: Real>(
    received: &[Vec<Complex<T>>],
    reference: &[Complex<T>],
    noise_var: T,
) -> Result<Vec<T>> {
    check_dqpsk_shapes(received, reference)?;
    if !(noise_var > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let points = dqpsk_points::<T>();
    let mut out = Vec::with_capacity(received.len() * reference.len() * 2);
    let mut prev = reference;
    for sym in received {
        for (z, p) in sym.iter().zip(prev) {
            max_log_llrs(&points, 2, z * p.conj(), noise_var, &mut out);
        }
        prev = sym;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const SCHEMES: [Scheme; 4] = [Scheme::Bpsk, Scheme::Qpsk, Scheme::Qam16, Scheme::Qam64];

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut r = rng(seed);
        (0..n).map(|_| r.gen_range(0..2u8)).collect()
    }

    #[test]
    fn unit_average_energy() {
        for s in SCHEMES {
            let c = Constellation::<f64>::new(s);
            let mean = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points().len() as f64;
            assert!((mean - 1.0).abs() < 1e-12, "{s:?} mean power {mean}");
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for s in SCHEMES {
            let c = Constellation::<f64>::new(s);
            let pts = c.points();
            let dmin = (0..pts.len())
                .flat_map(|a| (0..pts.len()).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| (pts[a] - pts[b]).norm())
                .fold(f64::INFINITY, f64::min);
            for a in 0..pts.len() {
                for b in 0..pts.len() {
                    if a != b && (pts[a] - pts[b]).norm() < dmin * (1.0 + 1e-9) {
                        assert_eq!((a ^ b).count_ones(), 1, "{s:?} labels {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn table_entries() {
        let q = Constellation::<f64>::new(Scheme::Qpsk);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(map_bits(&[0, 0], &q).unwrap(), vec![Complex::new(s, s)]);
        let b = Constellation::<f64>::new(Scheme::Bpsk);
        assert_eq!(
            map_bits(&[0, 1], &b).unwrap(),
            vec![Complex::new(-1.0, 0.0), Complex::new(1.0, 0.0)]
        );
        let q16 = Constellation::<f64>::new(Scheme::Qam16);
        let n = 10f64.sqrt();
        assert_eq!(map_bits(&[1, 0, 0, 1], &q16).unwrap(), vec![Complex::new(3.0 / n, -1.0 / n)]);
        let q64 = Constellation::<f64>::new(Scheme::Qam64);
        let n = 42f64.sqrt();
        assert_eq!(map_bits(&[1, 1, 0, 0, 1, 0], &q64).unwrap(), vec![Complex::new(1.0 / n, -1.0 / n)]);
    }

    #[test]
    fn map_requires_whole_groups() {
        let q = Constellation::<f64>::new(Scheme::Qam16);
        assert_eq!(
            map_bits(&[0, 1, 1], &q),
            Err(Error::PaddingRequired { len: 3, multiple: 4 })
        );
        assert!(matches!(map_bits(&[0, 2, 1, 1], &q), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn exhaustive_noiseless_round_trip() {
        for s in SCHEMES {
            let c = Constellation::<f64>::new(s);
            let bps = c.bits_per_symbol();
            let mut bits = Vec::new();
            for label in 0..c.points().len() {
                push_label_bits(label, bps, &mut bits);
            }
            let syms = map_bits(&bits, &c).unwrap();
            assert_eq!(demap_hard(&syms, &c), bits);
        }
    }

    #[test]
    fn qpsk_96_bits_round_trip() {
        let c = Constellation::<f64>::new(Scheme::Qpsk);
        let bits = random_bits(96, 11);
        let syms = map_bits(&bits, &c).unwrap();
        assert_eq!(syms.len(), 48);
        assert_eq!(demap_hard(&syms, &c), bits);
    }

    #[test]
    fn tie_breaks_to_smaller_label() {
        let q = Constellation::<f64>::new(Scheme::Qpsk);
        assert_eq!(demap_hard(&[Complex::new(0.0, 0.0)], &q), vec![0, 0]);
        let b = Constellation::<f64>::new(Scheme::Bpsk);
        assert_eq!(demap_hard(&[Complex::new(0.0, 5.0)], &b), vec![0]);
    }

    #[test]
    fn small_noise_keeps_label() {
        // Geometric oracle: any perturbation shorter than half the minimum distance
        // stays inside the decision region of the transmitted point.
        let mut r = rng(5);
        for s in SCHEMES {
            let c = Constellation::<f64>::new(s);
            let pts = c.points();
            let mut dmin = f64::INFINITY;
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    dmin = dmin.min((pts[a] - pts[b]).norm());
                }
            }
            for label in 0..pts.len() {
                for _ in 0..200 {
                    let radius = r.gen_range(0.0..0.4999) * dmin;
                    let angle = r.gen_range(0.0..std::f64::consts::TAU);
                    let y = pts[label] + Complex::from_polar(radius, angle);
                    assert_eq!(c.nearest_label(y), label);
                }
            }
        }
    }

    #[test]
    fn soft_bpsk_value_and_symmetry() {
        let b = Constellation::<f64>::new(Scheme::Bpsk);
        let llr = demap_soft(&[Complex::new(1.0, 0.0)], &b, 1.0).unwrap();
        assert!((llr[0] - 4.0).abs() < 1e-12);
        assert_eq!(demap_soft(&[Complex::new(0.0, 0.7)], &b, 2.0).unwrap(), vec![0.0]);
        let q = Constellation::<f64>::new(Scheme::Qpsk);
        let llr = demap_soft(&[Complex::new(0.0, 0.0)], &q, 0.5).unwrap();
        assert_eq!(llr, vec![0.0, 0.0]);
        assert!(matches!(demap_soft(&[Complex::new(1.0, 0.0)], &b, 0.0), Err(Error::InvalidParameter(_))));
        assert!(demap_soft(&[Complex::new(1.0, 0.0)], &b, -1.0).is_err());
    }

    #[test]
    fn soft_sign_matches_hard_decisions() {
        let mut r = rng(9);
        for s in SCHEMES {
            let c = Constellation::<f64>::new(s);
            let bits = random_bits(c.bits_per_symbol() * 500, 17);
            let noisy: Vec<_> = map_bits(&bits, &c)
                .unwrap()
                .into_iter()
                .map(|p| p + Complex::new(r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4)))
                .collect();
            let hard = demap_hard(&noisy, &c);
            let soft = demap_soft(&noisy, &c, 0.1).unwrap();
            for (h, l) in hard.iter().zip(&soft) {
                if *l != 0.0 {
                    assert_eq!(*h == 1, *l > 0.0);
                }
            }
        }
    }

    fn unit_reference(n: usize) -> DqpskReference<f64> {
        DqpskReference::new((0..n).map(|k| Complex::from_polar(1.0, 0.3 * k as f64)).collect()).unwrap()
    }

    #[test]
    fn dqpsk_repeated_zero_dibit_rotates_by_quarter_pi() {
        let mut reference = DqpskReference::new(vec![Complex::new(1.0, 0.0)]).unwrap();
        let out = dqpsk_encode(&vec![vec![0, 0]; 5], &mut reference).unwrap();
        for (t, sym) in out.iter().enumerate() {
            let expected = Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4 * (t + 1) as f64);
            assert!((sym[0] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn dqpsk_distinct_outputs_for_four_dibits() {
        let mut reference = DqpskReference::new(vec![Complex::new(1.0f64, 0.0); 4]).unwrap();
        let out = dqpsk_encode(&[vec![0, 0, 0, 1, 1, 1, 1, 0]], &mut reference).unwrap();
        let sym = &out[0];
        for a in 0..4 {
            assert!((sym[a].norm() - 1.0).abs() < 1e-12);
            for b in a + 1..4 {
                assert!((sym[a] - sym[b]).norm() > 0.5);
            }
        }
    }

    #[test]
    fn dqpsk_missing_reference() {
        let mut empty = DqpskReference::<f64>::new(vec![]).unwrap();
        assert!(matches!(dqpsk_encode(&[vec![0, 1]], &mut empty), Err(Error::MissingReference(_))));
        let mut short = unit_reference(2);
        assert!(matches!(dqpsk_encode(&[vec![0, 1]], &mut short), Err(Error::MissingReference(_))));
        assert!(matches!(dqpsk_decode::<f64>(&[vec![]], &[]), Err(Error::MissingReference(_))));
        assert!(DqpskReference::new(vec![Complex::new(0.5, 0.0)]).is_err());
    }

    #[test]
    fn dqpsk_invariant_to_common_rotation() {
        let carriers = 32;
        let frames: Vec<Vec<u8>> = (0..20).map(|s| random_bits(2 * carriers, 100 + s)).collect();
        let reference = unit_reference(carriers);
        let mut state = reference.clone();
        let tx = dqpsk_encode(&frames, &mut state).unwrap();
        for theta in [0.0, 0.3, std::f64::consts::FRAC_PI_2, 2.9] {
            let rot = Complex::from_polar(1.0, theta);
            let rx_ref: Vec<_> = reference.carriers().iter().map(|z| z * rot).collect();
            let rx: Vec<Vec<_>> = tx.iter().map(|s| s.iter().map(|z| z * rot * 0.7).collect()).collect();
            let decoded = dqpsk_decode(&rx, &rx_ref).unwrap();
            assert_eq!(decoded, frames.concat(), "theta {theta}");
            let soft = dqpsk_demap_soft(&rx, &rx_ref, 0.1).unwrap();
            let hard: Vec<u8> = soft.iter().map(|&l| u8::from(l > 0.0)).collect();
            assert_eq!(hard, frames.concat());
        }
    }

    #[test]
    fn dqpsk_outputs_stay_unit_modulus() {
        let mut reference = unit_reference(8);
        let frames: Vec<Vec<u8>> = (0..5000).map(|s| random_bits(16, s)).collect();
        let out = dqpsk_encode(&frames, &mut reference).unwrap();
        assert!(out.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn map_demap_identity(bits in proptest::collection::vec(0u8..2, 0..120), which in 0usize..4) {
            let c = Constellation::<f64>::new(SCHEMES[which]);
            let bps = c.bits_per_symbol();
            let bits = &bits[..bits.len() / bps * bps];
            prop_assert_eq!(demap_hard(&map_bits(bits, &c).unwrap(), &c), bits.to_vec());
        }
    }
}
