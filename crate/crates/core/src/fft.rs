//! Discrete Fourier transforms behind a small trait, so hosts with a faster
//! library can supply their own implementation.

use alloc::vec::Vec;

use num_complex::Complex64;

/// Unnormalized complex DFT in place. The inverse carries no `1/n` factor.
pub trait Fft: Sync {
    /// Smallest length `>= n` this implementation handles efficiently.
    fn fast_len(&self, n: usize) -> usize;

    /// Transform `buf` in place; `buf.len()` must be a value returned by
    /// [`Fft::fast_len`].
    fn process(&self, buf: &mut [Complex64], inverse: bool);
}

/// Iterative radix-2 Cooley-Tukey transform for power-of-two lengths.
#[derive(Debug, Clone, Copy, Default)]
pub struct Radix2;

impl Fft for Radix2 {
    fn fast_len(&self, n: usize) -> usize {
        n.max(1).next_power_of_two()
    }

    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        assert!(n.is_power_of_two(), "radix-2 length must be a power of two, got {n}");
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
            let twiddles: Vec<Complex64> =
                (0..half).map(|k| Complex64::from_polar(1.0, ang * k as f64)).collect();
            for chunk in buf.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for k in 0..half {
                    let t = hi[k] * twiddles[k];
                    hi[k] = lo[k] - t;
                    lo[k] += t;
                }
            }
            len *= 2;
        }
    }
}

/// Forward transform of a real signal zero-padded to `len`.
pub fn forward_real(fft: &dyn Fft, x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    fft.process(&mut buf, false);
    buf
}

/// Angular frequency in rad/s of DFT bin `k` for length `n` at `fs`, with
/// bins above `n/2` mapped to negative frequencies.
pub fn bin_omega(k: usize, n: usize, fs: f64) -> f64 {
    let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * core::f64::consts::PI * kk * fs / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v * Complex64::from_polar(1.0, sign * 2.0 * core::f64::consts::PI * (j * k) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let x: Vec<Complex64> =
            (0..64).map(|i| Complex64::new(libm::sin(i as f64 * 0.37), libm::cos(i as f64 * 1.3))).collect();
        let mut y = x.clone();
        Radix2.process(&mut y, false);
        for (a, b) in y.iter().zip(naive(&x, false)) {
            assert!((a - b).norm() < 1e-10);
        }
        Radix2.process(&mut y, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a / 64.0 - b).norm() < 1e-13);
        }
    }

    #[test]
    fn bin_frequencies_wrap() {
        assert_eq!(bin_omega(0, 8, 8.0), 0.0);
        assert!((bin_omega(7, 8, 8.0) + 2.0 * core::f64::consts::PI).abs() < 1e-12);
    }
}
