//! Link stability degree and the feasibility gate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{compute_let, KinematicsError, NodeKinematics, RadioModel};
use crate::NodeId;

/// Floor on the drain rate in the stability quotient (J/s).
pub const EPS_DRAIN_RATE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no link table row for ({0}, {1})")]
    MissingLink(NodeId, NodeId),
    #[error("link table row ({0}, {1}) has no lsd value")]
    MissingLsd(NodeId, NodeId),
    #[error("node {0} is dead or out of range")]
    Unreachable(NodeId),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Stability metrics of one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub let_value: f64,
    pub drain_rate: f64,
    pub lsd: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LsdMode {
    /// The RREQ's LSD field holds the stability of the most recent link.
    #[default]
    LastHop,
    /// The RREQ's LSD field holds the minimum over the path so far.
    Bottleneck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub lsd_threshold: f64,
    pub wait_period: f64,
    /// Collection window at the destination; defaults to twice the wait period.
    #[serde(default)]
    pub dest_window: Option<f64>,
    /// Hop cap; 0 means unlimited.
    #[serde(default)]
    pub ttl_limit: u32,
    /// Optional per-link bandwidth admission floor (Mbit/s).
    #[serde(default)]
    pub min_link_bandwidth: Option<f64>,
    #[serde(default)]
    pub lsd_mode: LsdMode,
}

impl ProtocolConfig {
    pub fn new(lsd_threshold: f64, wait_period: f64) -> Self {
        Self {
            lsd_threshold,
            wait_period,
            dest_window: None,
            ttl_limit: 0,
            min_link_bandwidth: None,
            lsd_mode: LsdMode::LastHop,
        }
    }

    pub fn dest_window(&self) -> f64 {
        self.dest_window.unwrap_or(2.0 * self.wait_period)
    }
}

/// `LSD = LET / max(DR, ε)`; an infinite LET gives an infinite LSD.
pub fn compute_lsd(let_value: f64, drain_rate: f64) -> f64 {
    if let_value.is_infinite() {
        return f64::INFINITY;
    }
    let_value / drain_rate.max(EPS_DRAIN_RATE)
}

/// A link is feasible iff its LSD is strictly above the threshold and it
/// meets the optional bandwidth floor.
pub fn link_eligible(m: &LinkMetrics, cfg: &ProtocolConfig) -> bool {
    m.lsd > cfg.lsd_threshold && cfg.min_link_bandwidth.is_none_or(|min| m.bandwidth >= min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    Computed,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRow {
    pub a: NodeId,
    pub b: NodeId,
    #[serde(default)]
    pub lsd: Option<f64>,
    pub bandwidth: f64,
}

/// Undirected per-link values supplied by a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkTable {
    rows: BTreeMap<(NodeId, NodeId), LinkRow>,
}

fn undirected(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl LinkTable {
    pub fn from_rows(rows: &[LinkRow]) -> Self {
        let rows = rows.iter().map(|r| (undirected(r.a, r.b), *r)).collect();
        Self { rows }
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<&LinkRow> {
        self.rows.get(&undirected(a, b))
    }

    pub fn contains(&self, a: NodeId, b: NodeId) -> bool {
        self.rows.contains_key(&undirected(a, b))
    }
}

/// Where link metrics come from during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSource {
    pub mode: MetricMode,
    pub table: LinkTable,
    pub radio: RadioModel,
}

/// One endpoint of a link as seen by the metric source.
#[derive(Debug, Clone, Copy)]
pub struct Endpoint {
    pub id: NodeId,
    pub kinematics: NodeKinematics,
    pub drain_rate: f64,
}

impl MetricSource {
    pub fn bandwidth(&self, a: NodeId, b: NodeId) -> Result<f64, MetricError> {
        match (self.mode, self.table.get(a, b)) {
            (_, Some(row)) => Ok(row.bandwidth),
            (MetricMode::Computed, None) => Ok(self.radio.link_bandwidth),
            (MetricMode::Tabulated, None) => Err(MetricError::MissingLink(a, b)),
        }
    }

    /// Metrics of the link `from -> to`, charged against the drain rate of
    /// `energy_of` (the receiving or evaluating node).
    pub fn link(
        &self,
        from: &Endpoint,
        to: &Endpoint,
        energy_of: &Endpoint,
    ) -> Result<LinkMetrics, MetricError> {
        let bandwidth = self.bandwidth(from.id, to.id)?;
        match self.mode {
            MetricMode::Tabulated => {
                let row = self
                    .table
                    .get(from.id, to.id)
                    .ok_or(MetricError::MissingLink(from.id, to.id))?;
                let lsd = row.lsd.ok_or(MetricError::MissingLsd(from.id, to.id))?;
                Ok(LinkMetrics {
                    let_value: f64::NAN,
                    drain_rate: energy_of.drain_rate,
                    lsd,
                    bandwidth,
                })
            }
            MetricMode::Computed => {
                let let_value = compute_let(&from.kinematics, &to.kinematics, &self.radio)?;
                Ok(LinkMetrics {
                    let_value,
                    drain_rate: energy_of.drain_rate,
                    lsd: compute_lsd(let_value, energy_of.drain_rate),
                    bandwidth,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metrics(lsd: f64, bandwidth: f64) -> LinkMetrics {
        LinkMetrics {
            let_value: f64::NAN,
            drain_rate: 0.0,
            lsd,
            bandwidth,
        }
    }

    #[test]
    fn lsd_direct_division() {
        assert_eq!(compute_lsd(10.0, 2.0), 5.0);
        assert_eq!(compute_lsd(f64::INFINITY, 3.0), f64::INFINITY);
        assert_eq!(compute_lsd(f64::INFINITY, 0.0), f64::INFINITY);
        assert_eq!(compute_lsd(2.0, 0.0), 2.0 / EPS_DRAIN_RATE);
    }

    #[test]
    fn eligibility_is_strict() {
        let cfg = ProtocolConfig::new(15.0, 5.0);
        assert!(!link_eligible(&metrics(9.0, 5.0), &cfg));
        assert!(link_eligible(&metrics(20.0, 5.0), &cfg));
        assert!(!link_eligible(&metrics(15.0, 5.0), &cfg));
        assert!(link_eligible(&metrics(f64::INFINITY, 0.0), &cfg));
    }

    #[test]
    fn bandwidth_floor() {
        let cfg = ProtocolConfig {
            min_link_bandwidth: Some(5.0),
            ..ProtocolConfig::new(15.0, 5.0)
        };
        assert!(link_eligible(&metrics(20.0, 5.0), &cfg));
        assert!(!link_eligible(&metrics(20.0, 4.9), &cfg));
    }

    fn endpoint(id: NodeId, k: NodeKinematics, dr: f64) -> Endpoint {
        Endpoint {
            id,
            kinematics: k,
            drain_rate: dr,
        }
    }

    #[test]
    fn tabulated_lookup_is_symmetric_and_verbatim() {
        let table = LinkTable::from_rows(&[
            LinkRow { a: 1, b: 7, lsd: Some(9.0), bandwidth: 5.0 },
            LinkRow { a: 4, b: 8, lsd: Some(18.0), bandwidth: 8.0 },
        ]);
        let src = MetricSource {
            mode: MetricMode::Tabulated,
            table,
            radio: RadioModel::new(100.0, 0.0),
        };
        let k = NodeKinematics::stationary(0.0, 0.0);
        let n1 = endpoint(1, k, 0.5);
        let n7 = endpoint(7, k, 0.5);
        let n4 = endpoint(4, k, 0.5);
        let n8 = endpoint(8, k, 0.5);
        assert_eq!(src.link(&n1, &n7, &n7).unwrap().lsd, 9.0);
        assert_eq!(src.link(&n8, &n4, &n4).unwrap().lsd, 18.0);
        assert_eq!(
            src.link(&n1, &n4, &n4),
            Err(MetricError::MissingLink(1, 4))
        );
    }

    #[test]
    fn computed_comoving_at_floor_is_infinite() {
        let src = MetricSource {
            mode: MetricMode::Computed,
            table: LinkTable::default(),
            radio: RadioModel::new(100.0, 0.0),
        };
        let a = endpoint(1, NodeKinematics::new(0.0, 0.0, 3.0, 1.0), EPS_DRAIN_RATE);
        let b = endpoint(2, NodeKinematics::new(10.0, 0.0, 3.0, 1.0), EPS_DRAIN_RATE);
        let m = src.link(&a, &b, &b).unwrap();
        assert_eq!(m.lsd, f64::INFINITY);
        assert_eq!(m.bandwidth, 1.0);
    }

    #[test]
    fn computed_out_of_range_is_error() {
        let src = MetricSource {
            mode: MetricMode::Computed,
            table: LinkTable::default(),
            radio: RadioModel::new(10.0, 0.0),
        };
        let a = endpoint(1, NodeKinematics::stationary(0.0, 0.0), 1.0);
        let b = endpoint(2, NodeKinematics::stationary(50.0, 0.0), 1.0);
        assert!(matches!(
            src.link(&a, &b, &b),
            Err(MetricError::Kinematics(KinematicsError::OutOfRange { .. }))
        ));
    }

    proptest! {
        #[test]
        fn lsd_monotone(let_a in 0.0..1e4f64, let_b in 0.0..1e4f64, dr_a in 1e-5..10.0f64, dr_b in 1e-5..10.0f64) {
            prop_assume!(let_a != let_b && dr_a != dr_b);
            let (lo, hi) = if let_a < let_b { (let_a, let_b) } else { (let_b, let_a) };
            prop_assert!(compute_lsd(lo, dr_a) < compute_lsd(hi, dr_a));
            let (dlo, dhi) = if dr_a < dr_b { (dr_a, dr_b) } else { (dr_b, dr_a) };
            prop_assume!(hi > 0.0);
            prop_assert!(compute_lsd(hi, dlo) > compute_lsd(hi, dhi));
        }

        #[test]
        fn eligibility_monotone(lsd in 0.0..100.0f64, bump in 0.0..100.0f64, thr in 0.1..100.0f64) {
            let cfg = ProtocolConfig::new(thr, 1.0);
            if link_eligible(&metrics(lsd, 1.0), &cfg) {
                prop_assert!(link_eligible(&metrics(lsd + bump, 1.0), &cfg));
            }
        }
    }
}
