//! Mean removal, moving median and Savitzky–Golay smoothing, in offline
//! (centered, edge-aware) and streaming (causal, lagged) forms.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Subtracts the mean in place and returns it.
pub fn detrend_mean(x: &mut [f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
    m
}

fn check_window(window_len: usize) -> Result<()> {
    if window_len == 0 || window_len % 2 == 0 {
        return Err(Error::invalid("window_len", "must be odd and positive"));
    }
    Ok(())
}

fn median_small(buf: &mut [f64]) -> f64 {
    buf.sort_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Centered moving median; the window shrinks symmetrically-as-possible at
/// the edges so the output has the input's length.
pub fn moving_median(x: &[f64], window_len: usize) -> Result<Vec<f64>> {
    check_window(window_len)?;
    let half = window_len / 2;
    let mut scratch = Vec::with_capacity(window_len);
    Ok((0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            scratch.clear();
            scratch.extend_from_slice(&x[lo..hi]);
            median_small(&mut scratch)
        })
        .collect())
}

/// Least-squares polynomial smoothing weights that evaluate the local fit at
/// `offset` samples from the window center.
pub fn savitzky_golay_coefficients(window_len: usize, poly_order: usize, offset: i64) -> Result<Vec<f64>> {
    check_window(window_len)?;
    if poly_order >= window_len {
        return Err(Error::invalid("poly_order", "must be below window_len"));
    }
    let half = (window_len / 2) as i64;
    let p = poly_order + 1;
    // normal matrix G = AᵀA with A[i][j] = (i − half)^j
    let mut g = vec![0.0; p * p];
    for i in 0..window_len as i64 {
        let t = (i - half) as f64;
        for r in 0..p {
            for c in 0..p {
                g[r * p + c] += libm::pow(t, (r + c) as f64);
            }
        }
    }
    // solve G·w = a(offset); coefficients are A·w
    let mut rhs: Vec<f64> = (0..p).map(|j| libm::pow(offset as f64, j as f64)).collect();
    solve_in_place(&mut g, &mut rhs, p)?;
    Ok((0..window_len as i64)
        .map(|i| {
            let t = (i - half) as f64;
            (0..p).map(|j| rhs[j] * libm::pow(t, j as f64)).sum()
        })
        .collect())
}

fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(a[i * n + col]).total_cmp(&libm::fabs(a[j * n + col])))
            .unwrap_or(col);
        if libm::fabs(a[pivot * n + col]) < 1e-300 {
            return Err(Error::invalid("poly_order", "singular Savitzky–Golay system"));
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for c in col..n {
                a[row * n + c] -= f * a[col * n + c];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row * n + c] * b[c]).sum();
        b[row] = (b[row] - s) / a[row * n + row];
    }
    Ok(())
}

/// Centered Savitzky–Golay smoothing. Edge samples are taken from the fit of
/// the first/last full window evaluated off-center. Inputs shorter than the
/// window are returned unchanged.
pub fn savitzky_golay(x: &[f64], window_len: usize, poly_order: usize) -> Result<Vec<f64>> {
    let center = savitzky_golay_coefficients(window_len, poly_order, 0)?;
    let n = x.len();
    if n < window_len {
        return Ok(x.to_vec());
    }
    let half = window_len / 2;
    let dot = |c: &[f64], s: &[f64]| c.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&center, &x[i - half..i + half + 1]);
    }
    for i in 0..half {
        let c = savitzky_golay_coefficients(window_len, poly_order, i as i64 - half as i64)?;
        out[i] = dot(&c, &x[..window_len]);
        let c = savitzky_golay_coefficients(window_len, poly_order, half as i64 - i as i64)?;
        out[n - 1 - i] = dot(&c, &x[n - window_len..]);
    }
    Ok(out)
}

/// Streaming moving median; output lags by `window_len / 2` samples. The
/// buffer is primed with the first sample.
#[derive(Debug, Clone)]
pub struct MovingMedian {
    buf: Vec<f64>,
    head: usize,
    primed: bool,
    scratch: Vec<f64>,
}

impl MovingMedian {
    pub fn new(window_len: usize) -> Result<Self> {
        check_window(window_len)?;
        Ok(Self {
            buf: vec![0.0; window_len],
            head: 0,
            primed: false,
            scratch: Vec::with_capacity(window_len),
        })
    }

    pub fn lag(&self) -> usize {
        self.buf.len() / 2
    }

    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.buf.iter_mut().for_each(|v| *v = x);
            self.primed = true;
        }
        self.buf[self.head] = x;
        self.head = (self.head + 1) % self.buf.len();
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.buf);
        median_small(&mut self.scratch)
    }
}

/// Streaming Savitzky–Golay smoother evaluated at the window center.
#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    coeffs: Vec<f64>,
    buf: Vec<f64>,
    head: usize,
    primed: bool,
}

impl SavitzkyGolay {
    pub fn new(window_len: usize, poly_order: usize) -> Result<Self> {
        let coeffs = savitzky_golay_coefficients(window_len, poly_order, 0)?;
        Ok(Self {
            buf: vec![0.0; window_len],
            coeffs,
            head: 0,
            primed: false,
        })
    }

    pub fn lag(&self) -> usize {
        self.buf.len() / 2
    }

    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.buf.iter_mut().for_each(|v| *v = x);
            self.primed = true;
        }
        self.buf[self.head] = x;
        self.head = (self.head + 1) % self.buf.len();
        let n = self.buf.len();
        // oldest sample sits at `head`
        (0..n).map(|j| self.coeffs[j] * self.buf[(self.head + j) % n]).sum()
    }
}
