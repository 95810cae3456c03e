//! Iterative radix-2 FFT over any [`Real`] scalar.
//!
//! Both directions are unnormalized: `forward` computes `Σ x[n]·e^{-j2πkn/N}` and
//! `inverse` computes `Σ X[k]·e^{+j2πkn/N}`. Callers apply any `1/N` themselves.

use num_complex::Complex;

use crate::{Error, Real, Result};

/// Precomputed twiddles and bit-reversal table for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Radix2Fft<T> {
    n: usize,
    // e^{-j2πk/N} for k in 0..N/2
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

pub fn is_power_of_two(n: usize) -> bool {
    n >= 1 && n & (n - 1) == 0
}

impl<T: Real> Radix2Fft<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !is_power_of_two(n) {
            return Err(Error::InvalidSize(format!(
                "transform size {n} is not a power of two >= 2"
            )));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                // Evaluate the angle in f64 so that f32 plans stay accurate.
                let phase = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::of(phase.cos()), T::of(phase.sin()))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        Ok(Self {
            n,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.process(buf, false)
    }

    pub fn inverse(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.process(buf, true)
    }

    fn process(&self, buf: &mut [Complex<T>], inverse: bool) -> Result<()> {
        let n = self.n;
        if buf.len() != n {
            return Err(Error::InvalidSize(format!(
                "buffer of {} samples for a {n}-point transform",
                buf.len()
            )));
        }
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Smallest power of two `>= n` (and at least 2).
pub fn next_power_of_two(n: usize) -> usize {
    n.max(2).next_power_of_two()
}
