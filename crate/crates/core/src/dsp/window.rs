//! Fixed 250 ms windows advancing by 125 ms (50% overlap).

pub const WINDOW_LEN_S: f64 = 0.25;
pub const WINDOW_HOP_S: f64 = 0.125;

/// One analysis window borrowed from a contiguous sample run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub start_time_s: f64,
    pub samples: &'a [f64],
    pub sample_rate_hz: f64,
}

impl Window<'_> {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

pub(crate) fn samples_for(seconds: f64, rate_hz: f64) -> usize {
    libm::floor(seconds * rate_hz + 1e-9) as usize
}

/// Iterator over complete windows; a partial tail is dropped.
#[derive(Debug, Clone)]
pub struct WindowIter<'a> {
    samples: &'a [f64],
    rate_hz: f64,
    len: usize,
    hop: usize,
    index: usize,
}

impl<'a> WindowIter<'a> {
    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }
}

impl<'a> Iterator for WindowIter<'a> {
    type Item = Window<'a>;

    fn next(&mut self) -> Option<Window<'a>> {
        if self.len == 0 || self.hop == 0 {
            return None;
        }
        let start = self.index * self.hop;
        let end = start.checked_add(self.len)?;
        if end > self.samples.len() {
            return None;
        }
        self.index += 1;
        Some(Window {
            start_time_s: start as f64 / self.rate_hz,
            samples: &self.samples[start..end],
            sample_rate_hz: self.rate_hz,
        })
    }
}

/// Cuts `samples` (recorded at `rate_hz`) into ⌊0.25·rate⌋-sample windows
/// advancing ⌊0.125·rate⌋ samples.
pub fn windowize(samples: &[f64], rate_hz: f64) -> WindowIter<'_> {
    let (len, hop) = if rate_hz > 0.0 {
        (samples_for(WINDOW_LEN_S, rate_hz), samples_for(WINDOW_HOP_S, rate_hz))
    } else {
        (0, 0)
    };
    WindowIter {
        samples,
        rate_hz,
        len,
        hop,
        index: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn one_second_at_1khz() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let w: Vec<_> = windowize(&x, 1000.0).collect();
        assert_eq!(w.len(), 7);
        assert!(w.iter().all(|w| w.samples.len() == 250));
        let starts: Vec<f64> = w.iter().map(|w| w.start_time_s).collect();
        assert_eq!(starts, [0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75]);
    }

    #[test]
    fn short_input_yields_nothing() {
        assert_eq!(windowize(&[0.0; 200], 1000.0).count(), 0);
    }

    #[test]
    fn one_second_at_100hz() {
        let x = [0.0; 100];
        let w: Vec<_> = windowize(&x, 100.0).collect();
        assert_eq!(w.len(), 7);
        assert!(w.iter().all(|w| w.samples.len() == 25));
    }
}
