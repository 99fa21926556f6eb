//! Battery accounting for UAV nodes.
//!
//! Consumption at time `now` is the base load (hover + antenna + idle CPU)
//! over the elapsed time plus the active-CPU surcharge over the time the CPU
//! spent processing tasks:
//!
//! ```text
//! consumed(now) = (H + A + I) · h(now) + (C − I) · h(active_seconds(now))
//! remaining(now) = max(0, B − consumed(now)) / B
//! ```
//!
//! The power constants are per-hour rates and `h(x) = x / seconds_per_hour`.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Battery capacity and per-hour power draws of one UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyProfile {
    pub battery_capacity: f64,
    pub hover_power: f64,
    pub antenna_power: f64,
    pub cpu_idle_power: f64,
    pub cpu_active_power: f64,
}

impl EnergyProfile {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.battery_capacity,
            self.hover_power,
            self.antenna_power,
            self.cpu_idle_power,
            self.cpu_active_power,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("energy profile values must be finite and > 0"));
        }
        if self.cpu_active_power <= self.cpu_idle_power {
            return Err(Error::config(
                "cpu_active_power must exceed cpu_idle_power",
            ));
        }
        Ok(())
    }

    pub fn base_load(&self) -> f64 {
        self.hover_power + self.antenna_power + self.cpu_idle_power
    }

    pub fn active_surcharge(&self) -> f64 {
        self.cpu_active_power - self.cpu_idle_power
    }
}

/// Energy accumulator attached to a UAV.
#[derive(Debug, Clone)]
pub struct EnergyMeter {
    profile: EnergyProfile,
    seconds_per_hour: f64,
    /// CPU seconds of finished processing runs.
    active_seconds: f64,
    /// In-progress run: (start, duration).
    running: Option<(f64, f64)>,
    last_query: Cell<f64>,
}

impl EnergyMeter {
    pub fn new(profile: EnergyProfile, seconds_per_hour: f64) -> Self {
        EnergyMeter {
            profile,
            seconds_per_hour,
            active_seconds: 0.0,
            running: None,
            last_query: Cell::new(0.0),
        }
    }

    pub fn profile(&self) -> &EnergyProfile {
        &self.profile
    }

    /// CPU-active seconds accrued up to `now`, counting the elapsed part of
    /// an in-progress run.
    pub fn active_seconds(&self, now: f64) -> f64 {
        let partial = self
            .running
            .map_or(0.0, |(start, dur)| (now - start).clamp(0.0, dur));
        self.active_seconds + partial
    }

    /// Unclamped consumption at `now`. Does not touch the monotone-clock guard.
    pub fn consumed(&self, now: f64) -> f64 {
        let hours = |s: f64| s / self.seconds_per_hour;
        self.profile.base_load() * hours(now)
            + self.profile.active_surcharge() * hours(self.active_seconds(now))
    }

    /// Remaining battery fraction in `[0, 1]`.
    pub fn remaining_energy(&self, now: f64) -> Result<f64> {
        if !(now >= 0.0) {
            return Err(Error::contract(format!("energy query at negative time {now}")));
        }
        let last = self.last_query.get();
        if now < last {
            return Err(Error::contract(format!(
                "energy query at {now} precedes an earlier query at {last}"
            )));
        }
        self.last_query.set(now);
        Ok(self.fraction_at(now))
    }

    fn fraction_at(&self, now: f64) -> f64 {
        let cap = self.profile.battery_capacity;
        ((cap - self.consumed(now)) / cap).max(0.0)
    }

    /// Remaining fraction with the base load charged over `horizon` and the
    /// CPU surcharge over all work done by `now`. This is the end-of-mission
    /// battery level of the energy equation; work still draining after the
    /// horizon is charged, idle hovering after it is not.
    pub fn horizon_remaining(&self, horizon: f64, now: f64) -> f64 {
        let hours = |s: f64| s / self.seconds_per_hour;
        let cap = self.profile.battery_capacity;
        let used = self.profile.base_load() * hours(horizon)
            + self.profile.active_surcharge() * hours(self.active_seconds(now));
        ((cap - used) / cap).max(0.0)
    }

    pub fn is_depleted(&self, now: f64) -> bool {
        self.fraction_at(now) <= 0.0
    }

    pub(crate) fn begin_processing(&mut self, at: f64, duration: f64) {
        debug_assert!(self.running.is_none(), "CPU already busy");
        self.running = Some((at, duration));
    }

    pub(crate) fn finish_processing(&mut self) {
        if let Some((_, dur)) = self.running.take() {
            self.active_seconds += dur;
        }
    }
}

/// One CPU run recovered from an event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLogEntry {
    pub node: usize,
    pub processing: f64,
}

/// Recomputes a UAV's consumption from the event log (base load over `now`
/// plus the surcharge over every logged run on `node`) and compares it with
/// the meter's accumulator at relative tolerance 1e-9.
pub fn total_energy_identity_check(
    node: usize,
    meter: &EnergyMeter,
    now: f64,
    log: impl IntoIterator<Item = EnergyLogEntry>,
) -> bool {
    let profile = meter.profile();
    let hours = |s: f64| s / meter.seconds_per_hour;
    let logged: f64 = log
        .into_iter()
        .filter(|e| e.node == node)
        .map(|e| e.processing)
        .sum();
    let recomputed = profile.base_load() * hours(now) + profile.active_surcharge() * hours(logged);
    let accumulated = meter.consumed(now);
    let scale = recomputed.abs().max(accumulated.abs());
    (recomputed - accumulated).abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE)
        || recomputed == accumulated
}
