//! Hybrid-pressure metrics and heuristic signal controllers.
//!
//! A vehicle's hybrid pressure combines its normalized distance to the stop
//! line, its normalized speed deficit, and its waiting/driving-time ratio
//! under a log; lane pressure sums vehicles, a directed road differences its
//! arrival and departure lanes, and an intersection differences all arrival
//! and departure lanes. Controllers pick the phase with the greatest summed
//! pressure over its two controlled movements.

use crate::netmodel::{NUM_MOVEMENTS, NUM_PHASES, PHASE_TABLE};
use crate::simcore::{IntersectionObservation, VehicleObs};

/// Phase period used by the fixed-time controller and the decision cadence,
/// in seconds.
pub const PHASE_DURATION_S: u32 = 10;

/// Hybrid pressure of a single vehicle. Natural log; nonnegative by
/// construction. The driving time is clamped to one second so the ratio is
/// defined at spawn.
pub fn vehicle_hp(d: f64, v: f64, wt: f64, dt: f64, l_max: f64, v_max: f64) -> f64 {
    debug_assert!((0.0..=l_max).contains(&d), "distance {d} outside [0, {l_max}]");
    debug_assert!(v >= 0.0 && v <= v_max + 1e-9, "speed {v} outside [0, {v_max}]");
    debug_assert!(wt >= 0.0 && dt >= 0.0, "negative time accumulators");
    ((l_max - d) / l_max + (v_max - v) / v_max + wt / dt.max(1.0)).ln_1p()
}

fn obs_hp(o: &VehicleObs, l_max: f64, v_max: f64) -> f64 {
    vehicle_hp(o.dist, o.speed, o.wait_s, o.drive_s, l_max, v_max)
}

fn lane_hp(lane: &[VehicleObs], l_max: f64, v_max: f64) -> f64 {
    lane.iter().map(|o| obs_hp(o, l_max, v_max)).sum()
}

/// Hybrid pressure of directed road `m`: arrival lane minus departure lane.
pub fn road_hp(obs: &IntersectionObservation, m: usize) -> f64 {
    lane_hp(&obs.arrival[m], obs.lane_length, obs.speed_limit)
        - lane_hp(&obs.departure[m], obs.lane_length, obs.speed_limit)
}

/// Hybrid pressure of the whole intersection: all arrival lanes minus all
/// departure lanes.
pub fn intersection_hp(obs: &IntersectionObservation) -> f64 {
    let mut total = 0.0;
    for m in 0..NUM_MOVEMENTS {
        total += lane_hp(&obs.arrival[m], obs.lane_length, obs.speed_limit);
    }
    for m in 0..NUM_MOVEMENTS {
        total -= lane_hp(&obs.departure[m], obs.lane_length, obs.speed_limit);
    }
    total
}

/// Vehicle-count pressure of directed road `m`.
pub fn road_pressure(obs: &IntersectionObservation, m: usize) -> f64 {
    obs.arrival[m].len() as f64 - obs.departure[m].len() as f64
}

/// Vehicle-count pressure of the whole intersection.
pub fn intersection_pressure(obs: &IntersectionObservation) -> f64 {
    (0..NUM_MOVEMENTS).map(|m| obs.arrival[m].len() as f64).sum::<f64>()
        - (0..NUM_MOVEMENTS).map(|m| obs.departure[m].len() as f64).sum::<f64>()
}

fn argmax_phase(score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for p in 0..NUM_PHASES {
        let s: f64 = PHASE_TABLE[p].iter().map(|&m| score(m)).sum();
        if s > best_score {
            best_score = s;
            best = p;
        }
    }
    best
}

/// Greedy expert: the phase whose two controlled movements have maximal
/// summed hybrid pressure. Ties break toward the lowest phase index; right
/// turns are always authorized and never scored.
pub fn maxhp_select(obs: &IntersectionObservation) -> usize {
    argmax_phase(|m| road_hp(obs, m))
}

/// Classic max-pressure control with vehicle-count pressure.
pub fn maxpressure_select(obs: &IntersectionObservation) -> usize {
    argmax_phase(|m| road_pressure(obs, m))
}

/// Round-robin phase at time `t` seconds.
pub fn fixedtime_select(t: u32) -> usize {
    ((t / PHASE_DURATION_S) % NUM_PHASES as u32) as usize
}
