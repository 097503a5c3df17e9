use std::time::{Duration, Instant};

use tremorlab_core::assist::TickClock;

/// Wall-clock tick source. Free-running by default; with a time scale the
/// loop is paced so tick `k` starts at `k·period/scale` after the first wait.
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
    pace: Option<f64>,
    paced_from: Option<Instant>,
}

impl MonotonicClock {
    pub fn free_running() -> Self {
        Self {
            origin: Instant::now(),
            pace: None,
            paced_from: None,
        }
    }

    /// Paced at `time_scale` simulated seconds per wall second.
    pub fn paced(time_scale: f64) -> Self {
        Self {
            pace: Some(time_scale),
            ..Self::free_running()
        }
    }
}

impl TickClock for MonotonicClock {
    fn now_s(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn wait_for_tick(&mut self, tick: u64, period_s: f64) -> bool {
        let Some(scale) = self.pace else {
            return true;
        };
        let start = *self.paced_from.get_or_insert_with(Instant::now);
        let period = period_s / scale;
        let due = start + Duration::from_secs_f64(tick as f64 * period);
        let now = Instant::now();
        if now < due {
            std::thread::sleep(due - now);
            return true;
        }
        now <= due + Duration::from_secs_f64(period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paced_ticks_arrive_on_schedule() {
        let mut c = MonotonicClock::paced(1.0);
        let t0 = Instant::now();
        for k in 0..5 {
            assert!(c.wait_for_tick(k, 0.01));
        }
        let e = t0.elapsed().as_secs_f64();
        assert!((0.039..0.2).contains(&e), "{e}");
    }

    #[test]
    fn late_tick_reports_a_miss() {
        let mut c = MonotonicClock::paced(1.0);
        assert!(c.wait_for_tick(0, 0.01));
        std::thread::sleep(Duration::from_millis(40));
        assert!(!c.wait_for_tick(1, 0.01));
    }
}
