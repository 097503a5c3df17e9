use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rng::{derive, Stream};
use super::{PerCondition, SubjectProfile};
use crate::{num, Error, Result};

/// Target median and quartiles of a latent value, with hard bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub const fn new(median: f64, q1: f64, q3: f64, min: f64, max: f64) -> Self {
        Self { median, q1, q3, min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self::new(v, v, v, v, v)
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let ok = self.min <= self.q1 && self.q1 <= self.median && self.median <= self.q3 && self.q3 <= self.max;
        if !ok || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid(name, "need min ≤ q1 ≤ median ≤ q3 ≤ max, all finite"));
        }
        Ok(())
    }

    /// Quantile `u` of a split normal through the three targets, clamped to
    /// the bounds.
    fn at(&self, u: f64) -> f64 {
        let z = num::normal_quantile(u);
        let z75 = num::normal_quantile(0.75);
        let sigma = if z < 0.0 { (self.median - self.q1) / z75 } else { (self.q3 - self.median) / z75 };
        (self.median + sigma * z).clamp(self.min, self.max)
    }

    /// `n` stratified draws: one uniform per 1/n stratum, in random order.
    fn draw(&self, n: usize, rng: &mut Stream) -> Vec<f64> {
        let mut strata: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut strata);
        strata
            .into_iter()
            .map(|s| {
                let u = (s as f64 + rng.range(0.25, 0.75)) / n as f64;
                self.at(u)
            })
            .collect()
    }
}

/// Cohort targets. Spreads are for 12 subjects; the counts of adverse or
/// null responders scale with cohort size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCalibration {
    pub baseline_ti: Spread,
    pub ti_delta: Spread,
    pub baseline_rom_deg: Spread,
    pub rom_gain_frac: Spread,
    pub baseline_reps_per_min: Spread,
    pub reps_delta: Spread,
    pub baseline_fatigue_slope: Spread,
    pub fatigue_shift: Spread,
    /// Subjects whose TI worsens slightly under assistance.
    pub ti_adverse: usize,
    pub rom_negative: usize,
    pub rom_null: usize,
    pub reps_null: usize,
    pub fatigue_negative: usize,
    /// Fraction of subjects reaching the controlled-tremor threshold while
    /// assisted, and the range their assisted TI is drawn from.
    pub ti_controlled_frac: f64,
    pub ti_controlled_range: (f64, f64),
    /// Relative tolerance on cohort medians.
    pub tolerance: f64,
}

impl Default for CohortCalibration {
    fn default() -> Self {
        Self {
            baseline_ti: Spread::new(0.447, 0.425, 0.476, 0.36, 0.56),
            ti_delta: Spread::new(-0.092, -0.100, -0.085, -0.12, -0.065),
            baseline_rom_deg: Spread::new(81.53, 72.92, 87.04, 64.0, 105.0),
            rom_gain_frac: Spread::new(0.1265, 0.105, 0.145, 0.08, 0.2),
            baseline_reps_per_min: Spread::new(10.03, 9.54, 10.52, 8.0, 12.0),
            reps_delta: Spread::new(2.99, 2.7, 3.3, 2.1, 4.0),
            baseline_fatigue_slope: Spread::new(-0.45, -0.55, -0.35, -0.8, -0.1),
            fatigue_shift: Spread::new(0.100, 0.09, 0.11, 0.06, 0.14),
            ti_adverse: 1,
            rom_negative: 1,
            rom_null: 1,
            reps_null: 1,
            fatigue_negative: 2,
            ti_controlled_frac: 7.0 / 12.0,
            ti_controlled_range: (0.24, 0.28),
            tolerance: 0.05,
        }
    }
}

impl CohortCalibration {
    /// Every subject gets the same latent values.
    pub fn degenerate() -> Self {
        let d = Self::default();
        let fix = |s: Spread| Spread::fixed(s.median);
        Self {
            baseline_ti: fix(d.baseline_ti),
            ti_delta: fix(d.ti_delta),
            baseline_rom_deg: fix(d.baseline_rom_deg),
            rom_gain_frac: fix(d.rom_gain_frac),
            baseline_reps_per_min: fix(d.baseline_reps_per_min),
            reps_delta: fix(d.reps_delta),
            baseline_fatigue_slope: fix(d.baseline_fatigue_slope),
            fatigue_shift: fix(d.fatigue_shift),
            ti_adverse: 0,
            rom_negative: 0,
            rom_null: 0,
            reps_null: 0,
            fatigue_negative: 0,
            ti_controlled_frac: 0.0,
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.baseline_ti.validate("baseline_ti")?;
        self.ti_delta.validate("ti_delta")?;
        self.baseline_rom_deg.validate("baseline_rom_deg")?;
        self.rom_gain_frac.validate("rom_gain_frac")?;
        self.baseline_reps_per_min.validate("baseline_reps_per_min")?;
        self.reps_delta.validate("reps_delta")?;
        self.baseline_fatigue_slope.validate("baseline_fatigue_slope")?;
        self.fatigue_shift.validate("fatigue_shift")?;
        if !(self.baseline_ti.min > 0.0 && self.baseline_ti.max < 1.0) {
            return Err(Error::invalid("baseline_ti", "bounds must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.ti_controlled_frac) {
            return Err(Error::invalid("ti_controlled_frac", "must lie in [0, 1]"));
        }
        let (lo, hi) = self.ti_controlled_range;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::invalid("ti_controlled_range", "need 0 < low ≤ high < 1"));
        }
        if !(self.baseline_rom_deg.min > 0.0 && self.baseline_reps_per_min.min > 0.0) {
            return Err(Error::invalid("baseline_rom_deg", "ROM and rep rate bounds must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("tolerance", "must be nonnegative"));
        }
        Ok(())
    }

    fn scaled(count: usize, n: usize) -> usize {
        libm::round(count as f64 * n as f64 / 12.0) as usize
    }
}

fn pick(rng: &mut Stream, n: usize, count: usize, exclude: &[usize]) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
    rng.shuffle(&mut pool);
    pool.truncate(count);
    pool
}

/// Draws `n` subject profiles whose latent medians follow the calibration.
///
/// Each latent is drawn by stratified sampling from a split normal through
/// its median and quartiles. The prescribed numbers of adverse or null
/// subjects are then assigned at random. Finally the requested fraction of
/// subjects is moved to an assisted TI inside the controlled range: those
/// among the lowest baselines below the median rank keep their drawn change
/// and have their baseline lowered; the others keep their baseline and take
/// a larger change.
pub fn generate_cohort(n: usize, calibration: &CohortCalibration, seed: u64) -> Result<Vec<SubjectProfile>> {
    if n < 2 {
        return Err(Error::invalid("n", "cohort needs at least 2 subjects"));
    }
    calibration.validate()?;
    let c = calibration;
    let mut rng = Stream::new(derive(&[seed, 0x636f_686f_7274]));
    let mut baseline_ti = c.baseline_ti.draw(n, &mut rng);
    let mut ti_delta = c.ti_delta.draw(n, &mut rng);
    let rom = c.baseline_rom_deg.draw(n, &mut rng);
    let mut gain = c.rom_gain_frac.draw(n, &mut rng);
    let reps = c.baseline_reps_per_min.draw(n, &mut rng);
    let mut reps_delta = c.reps_delta.draw(n, &mut rng);
    let slope = c.baseline_fatigue_slope.draw(n, &mut rng);
    let mut shift = c.fatigue_shift.draw(n, &mut rng);

    let adverse = pick(&mut rng, n, CohortCalibration::scaled(c.ti_adverse, n), &[]);
    for &i in &adverse {
        ti_delta[i] = rng.range(0.003, 0.012);
    }
    let rom_neg = pick(&mut rng, n, CohortCalibration::scaled(c.rom_negative, n), &[]);
    for &i in &rom_neg {
        gain[i] = -rng.range(0.005, 0.02);
    }
    for i in pick(&mut rng, n, CohortCalibration::scaled(c.rom_null, n), &rom_neg) {
        gain[i] = 0.0;
    }
    for i in pick(&mut rng, n, CohortCalibration::scaled(c.reps_null, n), &[]) {
        reps_delta[i] = 0.0;
    }
    for i in pick(&mut rng, n, CohortCalibration::scaled(c.fatigue_negative, n), &[]) {
        shift[i] = -rng.range(0.005, 0.02);
    }

    let controlled = libm::round(c.ti_controlled_frac * n as f64) as usize;
    if controlled > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| baseline_ti[a].total_cmp(&baseline_ti[b]));
        let rank_of = |i: usize| order.iter().position(|&j| j == i).unwrap_or(0);
        let below_median = (n - 1) / 2;
        let candidates: Vec<usize> = order.iter().copied().filter(|i| !adverse.contains(i)).take(controlled).collect();
        for i in candidates {
            let target = rng.range(c.ti_controlled_range.0, c.ti_controlled_range.1);
            if rank_of(i) < below_median {
                baseline_ti[i] = target - ti_delta[i];
            } else {
                ti_delta[i] = target - baseline_ti[i];
            }
        }
    }

    let profiles: Vec<SubjectProfile> = (0..n)
        .map(|i| SubjectProfile {
            subject_id: format!("S{:02}", i + 1),
            baseline_ti: baseline_ti[i],
            ti_delta: ti_delta[i],
            baseline_rom_deg: rom[i],
            rom_gain_frac: gain[i],
            baseline_reps_per_min: reps[i],
            reps_delta: reps_delta[i],
            fatigue_slope_hz_per_min: PerCondition {
                baseline: slope[i],
                assisted: slope[i] + shift[i],
            },
            rng_seed: derive(&[seed, i as u64]),
        })
        .collect();
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}
