//! Convolutional coding, Viterbi decoding and block interleaving.
//!
//! Encoder register convention: the newest input bit occupies the most significant
//! of the `K` register bits, so an octal generator such as `133` is read MSB first
//! as the tap on the current input. The encoder starts in the zero state and is
//! flushed with `K − 1` zeros.

use std::ops::{Add, Neg};

use crate::{Error, Real, Result};

/// Binary convolutional code of rate `1/n_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCode {
    constraint_len: usize,
    generators: Vec<u32>,
}

impl ConvCode {
    /// Builds a code from `K` and `K`-bit generator masks.
    pub fn new(constraint_len: usize, generators: &[u32]) -> Result<Self> {
        if !(2..=16).contains(&constraint_len) {
            return Err(Error::InvalidCode(format!(
                "constraint length {constraint_len} outside 2..=16"
            )));
        }
        if generators.len() < 2 {
            return Err(Error::InvalidCode("at least two generators are required".into()));
        }
        let top = 1u32 << (constraint_len - 1);
        if let Some(g) = generators.iter().find(|&&g| g == 0 || g >= top << 1) {
            return Err(Error::InvalidCode(format!(
                "generator {g:o} is not a nonzero {constraint_len}-bit mask"
            )));
        }
        if !generators.iter().any(|g| g & top != 0) || !generators.iter().any(|g| g & 1 != 0) {
            return Err(Error::InvalidCode(
                "generators must use both the newest and the oldest register tap".into(),
            ));
        }
        if generators.iter().all(|&g| g == generators[0]) {
            return Err(Error::InvalidCode("all generators are identical".into()));
        }
        Ok(Self {
            constraint_len,
            generators: generators.to_vec(),
        })
    }

    /// Rate 1/2, K = 7, generators (133, 171) octal.
    pub fn rate_half_k7() -> Self {
        Self::new(7, &[0o133, 0o171]).expect("valid code")
    }

    /// Rate 1/4, K = 7, generators (133, 171, 145, 133) octal.
    pub fn rate_quarter_k7() -> Self {
        Self::new(7, &[0o133, 0o171, 0o145, 0o133]).expect("valid code")
    }

    pub fn constraint_len(&self) -> usize {
        self.constraint_len
    }

    pub fn n_out(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn n_states(&self) -> usize {
        1 << (self.constraint_len - 1)
    }

    /// Coded length for a message of `message_len` bits, flush included.
    pub fn encoded_len(&self, message_len: usize) -> usize {
        (message_len + self.constraint_len - 1) * self.n_out()
    }

    /// Output bits for `input` entering a register whose older bits are `state`.
    fn branch_output(&self, state: usize, input: u8) -> u32 {
        let reg = ((input as u32) << (self.constraint_len - 1)) | state as u32;
        self.generators
            .iter()
            .enumerate()
            .fold(0u32, |acc, (j, g)| acc | (((reg & g).count_ones() & 1) << j))
    }
}

/// Encodes `bits` and appends the `K − 1` flush steps.
pub fn conv_encode(bits: &[u8], code: &ConvCode) -> Vec<u8> {
    let k = code.constraint_len;
    let mut state = 0usize;
    let mut out = Vec::with_capacity(code.encoded_len(bits.len()));
    for &b in bits.iter().chain(std::iter::repeat_n(&0, k - 1)) {
        let b = b & 1;
        let outputs = code.branch_output(state, b);
        for j in 0..code.n_out() {
            out.push(((outputs >> j) & 1) as u8);
        }
        state = ((b as usize) << (k - 2)) | (state >> 1);
    }
    out
}

/// Additive path metric usable by the trellis search.
pub trait PathMetric: Copy + PartialOrd + Add<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
}

impl PathMetric for i64 {
    fn zero() -> Self {
        0
    }
}

impl PathMetric for f32 {
    fn zero() -> Self {
        0.0
    }
}

impl PathMetric for f64 {
    fn zero() -> Self {
        0.0
    }
}

/// Maximum-correlation trellis search over a zero-terminated code.
///
/// `metrics[i]` is positive when coded bit `i` is more likely a 1. The path that
/// maximizes `Σ ±metric` is returned; equal candidates resolve to the lower
/// numbered predecessor state.
fn trellis_search<M: PathMetric>(metrics: &[M], code: &ConvCode) -> Result<Vec<u8>> {
    let n_out = code.n_out();
    let k = code.constraint_len;
    if !metrics.len().is_multiple_of(n_out) || metrics.len() < (k - 1) * n_out {
        return Err(Error::InvalidLength {
            expected: metrics.len().max((k - 1) * n_out).div_ceil(n_out) * n_out,
            actual: metrics.len(),
        });
    }
    let steps = metrics.len() / n_out;
    let n_states = code.n_states();
    let words = n_states.div_ceil(64);

    // Branch output patterns: outputs[state][input].
    let outputs: Vec<[u32; 2]> = (0..n_states)
        .map(|s| [code.branch_output(s, 0), code.branch_output(s, 1)])
        .collect();

    let mut score = vec![M::zero(); n_states];
    let mut reachable = vec![false; n_states];
    reachable[0] = true;
    let mut next_score = score.clone();
    let mut next_reachable = reachable.clone();
    // One bit per state per step: 1 when the odd predecessor won.
    let mut decisions = vec![0u64; steps * words];
    // Correlation of each possible output pattern with this step's metrics.
    let mut pattern_gain = vec![M::zero(); 1 << n_out];

    for t in 0..steps {
        let m = &metrics[t * n_out..(t + 1) * n_out];
        for (pattern, gain) in pattern_gain.iter_mut().enumerate() {
            *gain = m.iter().enumerate().fold(M::zero(), |acc, (j, &v)| {
                if (pattern >> j) & 1 == 1 {
                    acc + v
                } else {
                    acc + (-v)
                }
            });
        }
        for ns in 0..n_states {
            let input = (ns >> (k - 2)) & 1;
            let even = (ns << 1) & (n_states - 1);
            let mut best: Option<(M, bool)> = None;
            for (odd, pred) in [(false, even), (true, even | 1)] {
                if !reachable[pred] {
                    continue;
                }
                let cand = score[pred] + pattern_gain[outputs[pred][input] as usize];
                // Strict comparison keeps the even (lower) predecessor on ties.
                if best.is_none_or(|(b, _)| cand > b) {
                    best = Some((cand, odd));
                }
            }
            match best {
                Some((s, odd)) => {
                    next_score[ns] = s;
                    next_reachable[ns] = true;
                    if odd {
                        decisions[t * words + ns / 64] |= 1 << (ns % 64);
                    }
                }
                None => next_reachable[ns] = false,
            }
        }
        std::mem::swap(&mut score, &mut next_score);
        std::mem::swap(&mut reachable, &mut next_reachable);
    }

    let mut state = 0usize;
    let mut decoded = vec![0u8; steps];
    for t in (0..steps).rev() {
        decoded[t] = ((state >> (k - 2)) & 1) as u8;
        let odd = (decisions[t * words + state / 64] >> (state % 64)) & 1;
        state = ((state << 1) & (n_states - 1)) | odd as usize;
    }
    decoded.truncate(steps - (k - 1));
    Ok(decoded)
}

/// Hard-decision decoding under the Hamming metric.
pub fn viterbi_decode_hard(coded: &[u8], code: &ConvCode) -> Result<Vec<u8>> {
    let metrics: Vec<i64> = coded.iter().map(|&b| if b & 1 == 1 { 1 } else { -1 }).collect();
    trellis_search(&metrics, code)
}

/// Soft-decision decoding of LLRs (positive favours 1) by correlation metric.
/// A zero LLR is an erasure.
pub fn viterbi_decode_soft<T: Real + PathMetric>(llrs: &[T], code: &ConvCode) -> Result<Vec<u8>> {
    if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    trellis_search(llrs, code)
}

/// Bit permutation: `out[perm[i]] = in[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(Error::InvalidPermutation(format!(
                    "entry {i} -> {p} is out of range or repeated"
                )));
            }
            inverse[p] = i;
        }
        Ok(Self { perm, inverse })
    }

    pub fn identity(size: usize) -> Self {
        Self::new((0..size).collect()).expect("identity is a bijection")
    }

    /// Writes row by row into a `rows × cols` array and reads column by column.
    pub fn row_column(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidPermutation(format!("empty {rows}x{cols} block")));
        }
        let perm = (0..rows * cols)
            .map(|i| (i % cols) * rows + i / cols)
            .collect();
        Self::new(perm)
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::InvalidLength {
                expected: self.perm.len(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn interleave<V: Copy + Default>(&self, input: &[V]) -> Result<Vec<V>> {
        self.check_len(input.len())?;
        let mut out = vec![V::default(); input.len()];
        for (i, &v) in input.iter().enumerate() {
            out[self.perm[i]] = v;
        }
        Ok(out)
    }

    pub fn deinterleave<V: Copy + Default>(&self, input: &[V]) -> Result<Vec<V>> {
        self.check_len(input.len())?;
        let mut out = vec![V::default(); input.len()];
        for (j, &v) in input.iter().enumerate() {
            out[self.inverse[j]] = v;
        }
        Ok(out)
    }
}

pub fn interleave<V: Copy + Default>(bits: &[V], il: &Interleaver) -> Result<Vec<V>> {
    il.interleave(bits)
}

pub fn deinterleave<V: Copy + Default>(bits: &[V], il: &Interleaver) -> Result<Vec<V>> {
    il.deinterleave(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| r.gen_range(0..2u8)).collect()
    }

    #[test]
    fn code_validation() {
        assert!(ConvCode::new(1, &[1, 1]).is_err());
        assert!(ConvCode::new(3, &[0o7]).is_err());
        assert!(ConvCode::new(3, &[0o7, 0o10]).is_err());
        assert!(ConvCode::new(3, &[0o7, 0o7]).is_err());
        assert!(ConvCode::new(3, &[0o3, 0o1]).is_err());
        assert!(ConvCode::new(3, &[0o7, 0o5]).is_ok());
        assert_eq!(ConvCode::rate_quarter_k7().n_out(), 4);
        assert_eq!(ConvCode::rate_half_k7().n_states(), 64);
    }

    #[test]
    fn all_zero_message() {
        let code = ConvCode::rate_half_k7();
        let out = conv_encode(&[0; 20], &code);
        assert_eq!(out.len(), 26 * 2);
        assert!(out.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_is_interleaved_taps() {
        // 133 = 1011011, 171 = 1111001 read from the newest tap.
        let code = ConvCode::rate_half_k7();
        let out = conv_encode(&[1], &code);
        assert_eq!(out, vec![1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1]);
        let quarter = conv_encode(&[1], &ConvCode::rate_quarter_k7());
        // 145 = 1100101
        let g: [[u8; 7]; 4] = [
            [1, 0, 1, 1, 0, 1, 1],
            [1, 1, 1, 1, 0, 0, 1],
            [1, 1, 0, 0, 1, 0, 1],
            [1, 0, 1, 1, 0, 1, 1],
        ];
        let expected: Vec<u8> = (0..7).flat_map(|t| g.iter().map(move |row| row[t])).collect();
        assert_eq!(quarter, expected);
    }

    #[test]
    fn noiseless_round_trip_hard_and_soft() {
        for code in [ConvCode::rate_half_k7(), ConvCode::rate_quarter_k7()] {
            for (len, seed) in [(0usize, 1u64), (1, 2), (100, 3), (10_000, 4)] {
                let msg = random_bits(len, seed);
                let coded = conv_encode(&msg, &code);
                assert_eq!(viterbi_decode_hard(&coded, &code).unwrap(), msg);
                let llrs: Vec<f64> = coded.iter().map(|&b| if b == 1 { 2.5 } else { -2.5 }).collect();
                assert_eq!(viterbi_decode_soft(&llrs, &code).unwrap(), msg);
            }
        }
    }

    #[test]
    fn length_errors() {
        let code = ConvCode::rate_half_k7();
        assert!(matches!(viterbi_decode_hard(&[0; 13], &code), Err(Error::InvalidLength { .. })));
        assert!(matches!(viterbi_decode_hard(&[0; 10], &code), Err(Error::InvalidLength { .. })));
        assert!(viterbi_decode_soft(&[f64::NAN; 14], &code).is_err());
    }

    #[test]
    fn corrects_two_scattered_errors_in_48_bit_block() {
        let code = ConvCode::rate_half_k7();
        let msg = random_bits(48, 77);
        let coded = conv_encode(&msg, &code);
        let n = coded.len();
        for a in 0..n {
            let mut one = coded.clone();
            one[a] ^= 1;
            assert_eq!(viterbi_decode_hard(&one, &code).unwrap(), msg);
            for b in a + 1..n {
                let mut two = one.clone();
                two[b] ^= 1;
                assert_eq!(viterbi_decode_hard(&two, &code).unwrap(), msg, "errors at {a},{b}");
            }
        }
    }

    #[test]
    fn hard_decoder_matches_brute_force_small_code() {
        // Exhaustive minimum-distance search over all 2^8 messages for a K=3 code.
        let code = ConvCode::new(3, &[0o7, 0o5]).unwrap();
        let k = 8;
        let codewords: Vec<Vec<u8>> = (0..1u32 << k)
            .map(|m| conv_encode(&(0..k).map(|i| ((m >> (k - 1 - i)) & 1) as u8).collect::<Vec<_>>(), &code))
            .collect();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let rx: Vec<u8> = (0..codewords[0].len()).map(|_| r.gen_range(0..2u8)).collect();
            let dist = |c: &Vec<u8>| c.iter().zip(&rx).filter(|(a, b)| a != b).count();
            let best = codewords.iter().map(dist).min().unwrap();
            let decoded = viterbi_decode_hard(&rx, &code).unwrap();
            assert_eq!(dist(&conv_encode(&decoded, &code)), best);
        }
    }

    #[test]
    fn interleaver_basics() {
        let id = Interleaver::identity(10);
        let x: Vec<u8> = (0..10).collect();
        assert_eq!(interleave(&x, &id).unwrap(), x);
        assert!(Interleaver::new(vec![0, 0]).is_err());
        assert!(Interleaver::new(vec![0, 2]).is_err());
        let rc = Interleaver::row_column(16, 9).unwrap();
        assert!(matches!(rc.interleave(&x), Err(Error::InvalidLength { expected: 144, actual: 10 })));
        assert!(rc.deinterleave(&x).is_err());
    }

    #[test]
    fn row_column_is_bijection() {
        for (r, c) in [(1, 1), (16, 9), (16, 6), (3, 7)] {
            let il = Interleaver::row_column(r, c).unwrap();
            let mut seen = vec![false; r * c];
            for &p in il.perm() {
                assert!(!seen[p]);
                seen[p] = true;
            }
        }
    }

    #[test]
    fn burst_of_eight_is_spread_at_least_nine_apart() {
        let il = Interleaver::row_column(16, 9).unwrap();
        let size = il.size();
        for start in 0..=size - 8 {
            // A burst hits interleaved positions start..start+8; see where they land.
            let mut marks = vec![0u8; size];
            marks[start..start + 8].iter_mut().for_each(|m| *m = 1);
            let spread = il.deinterleave(&marks).unwrap();
            let hits: Vec<usize> = (0..size).filter(|&i| spread[i] == 1).collect();
            assert_eq!(hits.len(), 8);
            for w in hits.windows(2) {
                assert!(w[1] - w[0] >= 9, "burst at {start}: {hits:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn encoder_is_linear(a in proptest::collection::vec(0u8..2, 0..80), seed in 0u64..1000) {
            let b = random_bits(a.len(), seed);
            let code = ConvCode::rate_half_k7();
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ea = conv_encode(&a, &code);
            let eb = conv_encode(&b, &code);
            let expected: Vec<u8> = ea.iter().zip(&eb).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(conv_encode(&sum, &code), expected);
        }

        #[test]
        fn deinterleave_inverts(x in proptest::collection::vec(any::<u8>(), 1..60), rows in 1usize..8) {
            let cols = x.len();
            let mut data = Vec::new();
            for _ in 0..rows { data.extend_from_slice(&x); }
            let il = Interleaver::row_column(rows, cols).unwrap();
            prop_assert_eq!(il.deinterleave(&il.interleave(&data).unwrap()).unwrap(), data);
        }
    }
}
