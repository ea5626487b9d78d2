//! Per-node energy bookkeeping and the exponentially averaged drain rate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Weight kept by the previous drain rate when blending in a new sample.
    pub alpha: f64,
    /// Sampling period T in seconds.
    pub sample_period: f64,
    /// Joules per transmitted packet.
    pub tx_cost: f64,
    /// Joules per packet received as addressee.
    pub rx_cost: f64,
    /// Joules per packet overheard by an in-range non-addressee.
    pub overhear_cost: f64,
    /// Joules per second drawn regardless of traffic.
    pub idle_rate: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            sample_period: 1.0,
            tx_cost: 0.02,
            rx_cost: 0.01,
            overhear_cost: 0.005,
            idle_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    pub residual: f64,
    /// Energy drawn since the last drain-rate sample.
    pub window_consumed: f64,
    /// Blended drain rate in J/s.
    pub drain_rate: f64,
    pub alive: bool,
}

impl EnergyState {
    /// Fresh battery; the drain rate starts at the idle floor.
    pub fn new(initial: f64, cfg: &EnergyConfig) -> Self {
        let residual = initial.max(0.0);
        Self {
            residual,
            window_consumed: 0.0,
            drain_rate: cfg.idle_rate,
            alive: residual > 0.0,
        }
    }

    /// Draws `amount` joules, clamped by what is left.
    pub fn charge(&self, amount: f64) -> EnergyState {
        debug_assert!(amount >= 0.0, "negative charge {amount}");
        let drawn = amount.max(0.0).min(self.residual);
        let residual = if drawn >= self.residual {
            0.0
        } else {
            self.residual - drawn
        };
        EnergyState {
            residual,
            window_consumed: self.window_consumed + drawn,
            drain_rate: self.drain_rate,
            alive: residual > 0.0,
        }
    }

    /// Closes the current window: `DR = α·DR_old + (1 − α)·consumed/T`.
    pub fn sample_drain_rate(&self, cfg: &EnergyConfig) -> EnergyState {
        let fresh = self.window_consumed / cfg.sample_period;
        EnergyState {
            drain_rate: blend(self.drain_rate, fresh, cfg.alpha),
            window_consumed: 0.0,
            ..*self
        }
    }
}

pub fn blend(old: f64, new: f64, alpha: f64) -> f64 {
    alpha * old + (1.0 - alpha) * new
}
