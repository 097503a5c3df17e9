//! Mixed-radix complex FFT for arbitrary lengths.
//!
//! Welch segments here are 200 (IMU at 200 Hz) and 250 (EMG windows at
//! 1 kHz) samples, so radix 2/5 dominate. Prime factors fall back to a direct
//! DFT butterfly, which is fine for the small primes that occur.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn expi(theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Self { re: c, im: s }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

fn smallest_factor(n: usize) -> usize {
    if n % 4 == 0 {
        return 4;
    }
    let mut f = 2;
    while f * f <= n {
        if n % f == 0 {
            return f;
        }
        f += 1;
    }
    n
}

/// Forward DFT, `X[k] = Σ x[n]·exp(−2πi·kn/N)`, computed in place.
pub fn fft_in_place(data: &mut [Complex]) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    let mut scratch = vec![Complex::ZERO; n];
    let twiddles: Vec<Complex> = (0..n)
        .map(|k| Complex::expi(-2.0 * PI * k as f64 / n as f64))
        .collect();
    recurse(data, &mut scratch, &twiddles, 1);
}

// Decimation in time. `stride` indexes the full-length twiddle table.
fn recurse(data: &mut [Complex], scratch: &mut [Complex], tw: &[Complex], stride: usize) {
    let n = data.len();
    if n == 1 {
        return;
    }
    let p = smallest_factor(n);
    let m = n / p;
    if m == 1 {
        // direct DFT of a prime-length (or 4-length) block
        for k in 0..n {
            let mut acc = Complex::ZERO;
            for (j, x) in data.iter().enumerate() {
                acc = acc + *x * tw[((j * k) % n) * stride];
            }
            scratch[k] = acc;
        }
        data.copy_from_slice(&scratch[..n]);
        return;
    }
    // split into p interleaved subsequences, each of length m
    for r in 0..p {
        for j in 0..m {
            scratch[r * m + j] = data[j * p + r];
        }
    }
    data.copy_from_slice(&scratch[..n]);
    for r in 0..p {
        let (sub, rest) = data[r * m..].split_at_mut(m);
        let _ = rest;
        recurse(sub, &mut scratch[..m], tw, stride * p);
    }
    // combine: X[k + q·m] = Σ_r W_N^{r(k+qm)} · Y_r[k]
    for k in 0..m {
        for q in 0..p {
            let out = k + q * m;
            let mut acc = Complex::ZERO;
            for r in 0..p {
                let idx = ((r * out) % n) * stride;
                acc = acc + data[r * m + k] * tw[idx];
            }
            scratch[out] = acc;
        }
    }
    data.copy_from_slice(&scratch[..n]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::ZERO, |acc, (j, v)| {
                    acc + *v * Complex::expi(-2.0 * PI * (j * k) as f64 / n as f64)
                })
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft_for_mixed_lengths() {
        for &n in &[1usize, 2, 3, 4, 5, 7, 8, 12, 25, 49, 100, 200, 250, 256] {
            let x: Vec<Complex> = (0..n)
                .map(|i| Complex::new(libm::sin(i as f64 * 0.37) + 0.1 * i as f64, libm::cos(i as f64 * 1.3)))
                .collect();
            let mut y = x.clone();
            fft_in_place(&mut y);
            let z = naive(&x);
            for (a, b) in y.iter().zip(&z) {
                assert!((a.re - b.re).abs() < 1e-8 && (a.im - b.im).abs() < 1e-8, "n={n}");
            }
        }
    }
}
