//! [`peh_core::fft::Fft`] backed by rustfft with cached mixed-radix plans.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use peh_core::num_complex::Complex64;
use rustfft::FftPlanner;

pub use peh_core::fft::Fft;

#[derive(Default)]
pub struct RustFft {
    plans: Mutex<HashMap<(usize, bool), Arc<dyn rustfft::Fft<f64>>>>,
}

impl RustFft {
    pub fn new() -> Self {
        Self::default()
    }

    fn plan(&self, len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
        let mut plans = self.plans.lock().unwrap();
        plans
            .entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) }
            })
            .clone()
    }
}

/// Smallest `2^a · 3^b · 5^c` not below `n`.
pub fn smooth_len(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

impl Fft for RustFft {
    fn fast_len(&self, n: usize) -> usize {
        smooth_len(n)
    }

    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        self.plan(buf.len(), inverse).process(buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use peh_core::fft::Radix2;

    #[test]
    fn smooth_lengths() {
        assert_eq!(smooth_len(17865), 18000);
        assert_eq!(smooth_len(1), 1);
        assert_eq!(smooth_len(7), 8);
        assert_eq!(smooth_len(11), 12);
        assert_eq!(smooth_len(1024), 1024);
    }

    #[test]
    fn agrees_with_radix2() {
        let x: Vec<Complex64> = (0..256).map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64).cos())).collect();
        let mut a = x.clone();
        let mut b = x;
        RustFft::new().process(&mut a, false);
        Radix2.process(&mut b, false);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-9);
        }
    }
}
