use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Runtime limits on the assist command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEnvelope {
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    /// Normalized torque units.
    pub torque_max: f64,
    /// Torque units per s², enforced on the discrete second difference of
    /// the command as `jerk_max·dt²`.
    pub jerk_max: f64,
    pub stall_threshold_dps: f64,
    pub stall_timeout_s: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        Self {
            angle_min_deg: 0.0,
            angle_max_deg: 150.0,
            torque_max: 1.0,
            jerk_max: 500.0,
            stall_threshold_dps: 2.0,
            stall_timeout_s: 1.0,
        }
    }
}

impl SafetyEnvelope {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_min_deg < self.angle_max_deg) {
            return Err(Error::invalid("angle_min_deg", "must be below angle_max_deg"));
        }
        for (name, v) in [
            ("torque_max", self.torque_max),
            ("jerk_max", self.jerk_max),
            ("stall_threshold_dps", self.stall_threshold_dps),
            ("stall_timeout_s", self.stall_timeout_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampFlag {
    Angle,
    Torque,
    Jerk,
    StallTimeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistCommand {
    pub tick_index: u64,
    pub commanded_torque: f64,
    pub clamped_flags: Vec<ClampFlag>,
    pub engaged: bool,
}

impl AssistCommand {
    pub fn has(&self, flag: ClampFlag) -> bool {
        self.clamped_flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub angle_deg: f64,
    pub velocity_dps: f64,
}

/// Live envelope state carried between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyState {
    pub engaged: bool,
    /// Last two emitted commands, most recent first.
    pub prev: [f64; 2],
    pub stall_ticks: u64,
    pub tick: u64,
}

impl Default for SafetyState {
    fn default() -> Self {
        Self {
            engaged: true,
            prev: [0.0; 2],
            stall_ticks: 0,
            tick: 0,
        }
    }
}

impl SafetyState {
    /// Re-arms after a disengage. The command history restarts at rest.
    pub fn reset(&mut self) {
        self.engaged = true;
        self.prev = [0.0; 2];
        self.stall_ticks = 0;
    }

    fn push(&mut self, u: f64) {
        self.prev = [u, self.prev[0]];
    }
}

/// Displacement covered while braking from per-tick rate `v` with the
/// second difference held at −`j`, counting only the steps that still move
/// forward. Zero for `v ≤ 0`.
pub fn braking_distance(v: f64, j: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let m = libm::floor(v / j);
    m * v - j * m * (m + 1.0) / 2.0
}

/// Where the command would come to rest after applying second difference
/// `a` now and braking as hard as allowed afterwards. Nondecreasing in `a`.
fn rest_point(u: f64, v: f64, a: f64, j: f64) -> f64 {
    let v1 = v + a;
    let u1 = u + v1;
    if v1 >= 0.0 {
        u1 + braking_distance(v1, j)
    } else {
        u1 - braking_distance(-v1, j)
    }
}

/// Largest `a` in `[-j, j]` with `rest_point(a) ≤ level`, or −j if none.
fn solve_at_most(u: f64, v: f64, j: f64, level: f64) -> f64 {
    if rest_point(u, v, j, j) <= level {
        return j;
    }
    if rest_point(u, v, -j, j) > level {
        return -j;
    }
    let (mut lo, mut hi) = (-j, j);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if rest_point(u, v, mid, j) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest `a` in `[-j, j]` with `rest_point(a) ≥ level`, or +j if none.
fn solve_at_least(u: f64, v: f64, j: f64, level: f64) -> f64 {
    -solve_at_most(-u, -v, j, -level)
}

/// One tick of the safety envelope.
///
/// The requested torque is saturated to ±`torque_max` and zeroed when the
/// joint sits at a bound and the torque would push further. The emitted
/// command then moves toward that target with its second difference limited
/// to `jerk_max·dt²`, planning ahead so it can always stop inside the torque
/// limits. A stall (|velocity| below threshold while the last command
/// exceeded half the torque limit) sustained beyond `stall_timeout_s`
/// disengages: the command drops to 0 and stays there until
/// [`SafetyState::reset`].
pub fn apply_envelope(
    envelope: &SafetyEnvelope,
    raw_torque: f64,
    state: &mut SafetyState,
    meas: Measurement,
    dt_s: f64,
) -> AssistCommand {
    let tick_index = state.tick;
    state.tick += 1;
    let max = envelope.torque_max;

    let off = |state: &mut SafetyState| {
        state.push(0.0);
        AssistCommand {
            tick_index,
            commanded_torque: 0.0,
            clamped_flags: alloc::vec![ClampFlag::StallTimeout],
            engaged: false,
        }
    };

    if !state.engaged {
        return off(state);
    }

    let stalled = libm::fabs(meas.velocity_dps) < envelope.stall_threshold_dps && libm::fabs(state.prev[0]) > 0.5 * max;
    state.stall_ticks = if stalled { state.stall_ticks + 1 } else { 0 };
    // Stall time is measured from the first stalled tick, so disengage lands
    // on the first tick strictly past the timeout.
    if state.stall_ticks > 1 && (state.stall_ticks - 1) as f64 * dt_s > envelope.stall_timeout_s + 1e-9 * dt_s {
        state.engaged = false;
        state.stall_ticks = 0;
        return off(state);
    }

    let mut flags = Vec::new();
    let mut target = if raw_torque.is_nan() { 0.0 } else { raw_torque };
    if libm::fabs(target) > max {
        target = target.clamp(-max, max);
        flags.push(ClampFlag::Torque);
    }
    let at_upper = meas.angle_deg >= envelope.angle_max_deg;
    let at_lower = meas.angle_deg <= envelope.angle_min_deg;
    if (at_upper && target > 0.0) || (at_lower && target < 0.0) {
        target = 0.0;
        flags.push(ClampFlag::Angle);
    }

    let j = envelope.jerk_max * dt_s * dt_s;
    let u = state.prev[0];
    let v = state.prev[0] - state.prev[1];

    // Hard limits on the rest point keep |u| ≤ max reachable forever.
    let a_hi = solve_at_most(u, v, j, max);
    let a_lo = solve_at_least(u, v, j, -max);
    // Move the rest point onto the target.
    let a_goal = if rest_point(u, v, 0.0, j) <= target {
        solve_at_most(u, v, j, target)
    } else {
        solve_at_least(u, v, j, target)
    };
    let a = if a_lo <= a_hi { a_goal.clamp(a_lo, a_hi) } else { a_hi };
    let mut cmd = u + v + a;

    if libm::fabs(target - u - v) > j * (1.0 + 1e-12) && !flags.contains(&ClampFlag::Jerk) {
        flags.push(ClampFlag::Jerk);
    }
    if libm::fabs(cmd) > max {
        cmd = cmd.clamp(-max, max);
        if !flags.contains(&ClampFlag::Torque) {
            flags.push(ClampFlag::Torque);
        }
    }
    // Settle exactly on the target once within rounding distance.
    if libm::fabs(cmd - target) < 1e-12 * max {
        cmd = target;
    }
    state.push(cmd);
    flags.sort();
    AssistCommand {
        tick_index,
        commanded_torque: cmd,
        clamped_flags: flags,
        engaged: true,
    }
}
