//! Scenario files: node placement, radio, protocol and energy settings,
//! link metrics and the traffic workload.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyConfig;
use crate::kinematics::{in_range, NodeKinematics, RadioModel};
use crate::stability::{LinkRow, LinkTable, MetricMode, ProtocolConfig};
use crate::NodeId;

/// The bundled seven-link-table example network (source 1, destination 6).
pub const FIGURE4_JSON: &str = include_str!("../../../scenarios/figure4.json");
/// Same topology driven by kinematics and energy, with scripted drains on
/// nodes 9 and 3 that force route maintenance.
pub const MAINTENANCE_JSON: &str = include_str!("../../../scenarios/maintenance.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub speed: f64,
    pub heading: f64,
}

/// Extra constant drain applied over `[start, end)`, on top of traffic and
/// idle consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrainSpan {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub heading: f64,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Waypoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_drain: Vec<DrainSpan>,
}

impl NodeSpec {
    pub fn new(id: NodeId, x: f64, y: f64, energy: f64) -> Self {
        Self {
            id,
            x,
            y,
            speed: 0.0,
            heading: 0.0,
            energy,
            waypoints: Vec::new(),
            extra_drain: Vec::new(),
        }
    }

    pub fn kinematics(&self) -> NodeKinematics {
        NodeKinematics::new(self.x, self.y, self.speed, self.heading)
    }
}

/// A traffic demand. `rate` is data packets per second; zero means the flow
/// only triggers route discovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub time: f64,
    pub source: NodeId,
    pub destination: NodeId,
    #[serde(default)]
    pub rate: f64,
    /// Upper bound of the uniform random delay added to each inter-packet gap.
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub radio: RadioModel,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    pub metric_mode: MetricMode,
    #[serde(default)]
    pub link_table: Vec<LinkRow>,
    #[serde(default)]
    pub workload: Vec<Flow>,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("malformed scenario: {0}")]
    Malformed(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node {id}: {field} must be {rule}, got {value}")]
    NodeField {
        id: NodeId,
        field: &'static str,
        rule: &'static str,
        value: f64,
    },
    #[error("{field} must be {rule}, got {value}")]
    Field {
        field: &'static str,
        rule: &'static str,
        value: f64,
    },
    #[error("workload entry {index}: unknown node {node}")]
    UnknownFlowNode { index: usize, node: NodeId },
    #[error("workload entry {index}: source and destination are both {node}")]
    SelfFlow { index: usize, node: NodeId },
    #[error("link table row ({a}, {b}): {problem}")]
    LinkRow {
        a: NodeId,
        b: NodeId,
        problem: &'static str,
    },
    #[error("tabulated mode: no link table row for in-range pair ({0}, {1})")]
    MissingLinkRow(NodeId, NodeId),
}

fn check(
    errors: &mut Vec<ValidationError>,
    ok: bool,
    field: &'static str,
    rule: &'static str,
    value: f64,
) {
    if !ok {
        errors.push(ValidationError::Field { field, rule, value });
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ValidationError> {
        serde_json::from_str(text).map_err(|e| ValidationError::Malformed(e.to_string()))
    }

    pub fn figure4() -> Scenario {
        Scenario::from_json(FIGURE4_JSON).expect("bundled scenario parses")
    }

    pub fn maintenance() -> Scenario {
        Scenario::from_json(MAINTENANCE_JSON).expect("bundled scenario parses")
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Collects every violation; never panics.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();

        let mut seen = BTreeSet::new();
        let mut reported = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) && reported.insert(n.id) {
                errors.push(ValidationError::DuplicateNode(n.id));
            }
            let mut node_check = |ok: bool, field, rule, value| {
                if !ok {
                    errors.push(ValidationError::NodeField {
                        id: n.id,
                        field,
                        rule,
                        value,
                    });
                }
            };
            node_check(n.x.is_finite(), "x", "finite", n.x);
            node_check(n.y.is_finite(), "y", "finite", n.y);
            node_check(n.speed.is_finite() && n.speed >= 0.0, "speed", ">= 0", n.speed);
            node_check(n.heading.is_finite(), "heading", "finite", n.heading);
            node_check(n.energy.is_finite() && n.energy >= 0.0, "energy", ">= 0", n.energy);
            for w in &n.waypoints {
                node_check(w.time >= 0.0, "waypoint time", ">= 0", w.time);
                node_check(w.speed.is_finite() && w.speed >= 0.0, "waypoint speed", ">= 0", w.speed);
                node_check(w.heading.is_finite(), "waypoint heading", "finite", w.heading);
            }
            for d in &n.extra_drain {
                node_check(d.start >= 0.0, "extra_drain start", ">= 0", d.start);
                node_check(d.end >= d.start, "extra_drain end", ">= start", d.end);
                node_check(d.rate.is_finite() && d.rate >= 0.0, "extra_drain rate", ">= 0", d.rate);
            }
        }

        let r = &self.radio;
        check(&mut errors, r.range > 0.0 && r.range.is_finite(), "radio.range", "> 0", r.range);
        check(&mut errors, r.hop_delay >= 0.0 && r.hop_delay.is_finite(), "radio.hop_delay", ">= 0", r.hop_delay);
        check(&mut errors, r.link_bandwidth >= 0.0, "radio.link_bandwidth", ">= 0", r.link_bandwidth);

        let p = &self.protocol;
        check(&mut errors, p.lsd_threshold > 0.0, "protocol.lsd_threshold", "> 0", p.lsd_threshold);
        check(&mut errors, p.wait_period > 0.0 && p.wait_period.is_finite(), "protocol.wait_period", "> 0", p.wait_period);
        if let Some(w) = p.dest_window {
            check(&mut errors, w > 0.0 && w.is_finite(), "protocol.dest_window", "> 0", w);
        }
        if let Some(b) = p.min_link_bandwidth {
            check(&mut errors, b >= 0.0, "protocol.min_link_bandwidth", ">= 0", b);
        }

        let e = &self.energy;
        check(&mut errors, (0.0..=1.0).contains(&e.alpha), "energy.alpha", "within [0, 1]", e.alpha);
        check(&mut errors, e.sample_period > 0.0 && e.sample_period.is_finite(), "energy.sample_period", "> 0", e.sample_period);
        check(&mut errors, e.tx_cost >= 0.0, "energy.tx_cost", ">= 0", e.tx_cost);
        check(&mut errors, e.rx_cost >= 0.0, "energy.rx_cost", ">= 0", e.rx_cost);
        check(&mut errors, e.overhear_cost >= 0.0, "energy.overhear_cost", ">= 0", e.overhear_cost);
        check(&mut errors, e.idle_rate >= 0.0, "energy.idle_rate", ">= 0", e.idle_rate);

        check(&mut errors, self.duration > 0.0 && self.duration.is_finite(), "duration", "> 0", self.duration);

        for (index, f) in self.workload.iter().enumerate() {
            for node in [f.source, f.destination] {
                if !seen.contains(&node) {
                    errors.push(ValidationError::UnknownFlowNode { index, node });
                }
            }
            if f.source == f.destination {
                errors.push(ValidationError::SelfFlow {
                    index,
                    node: f.source,
                });
            }
            check(&mut errors, f.time >= 0.0, "workload.time", ">= 0", f.time);
            check(&mut errors, f.rate >= 0.0 && f.rate.is_finite(), "workload.rate", ">= 0", f.rate);
            check(&mut errors, f.jitter >= 0.0, "workload.jitter", ">= 0", f.jitter);
        }

        let mut rows = BTreeSet::new();
        for row in &self.link_table {
            let mut bad = |problem| {
                errors.push(ValidationError::LinkRow {
                    a: row.a,
                    b: row.b,
                    problem,
                })
            };
            if row.a == row.b {
                bad("self link");
            }
            if !seen.contains(&row.a) || !seen.contains(&row.b) {
                bad("unknown node");
            }
            if !(row.bandwidth >= 0.0) {
                bad("bandwidth must be >= 0");
            }
            match row.lsd {
                Some(lsd) if !(lsd >= 0.0) => bad("lsd must be >= 0"),
                None if self.metric_mode == MetricMode::Tabulated => {
                    bad("tabulated mode requires an lsd value")
                }
                _ => {}
            }
            if !rows.insert((row.a.min(row.b), row.a.max(row.b))) {
                bad("duplicate row");
            }
        }

        if self.metric_mode == MetricMode::Tabulated && errors.is_empty() {
            errors.extend(self.coverage_errors());
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// In-range pairs reachable from any workload source that lack a table row.
    fn coverage_errors(&self) -> Vec<ValidationError> {
        let table = LinkTable::from_rows(&self.link_table);
        let kin: BTreeMap<NodeId, NodeKinematics> =
            self.nodes.iter().map(|n| (n.id, n.kinematics())).collect();
        let neighbors = |id: NodeId| -> Vec<NodeId> {
            kin.iter()
                .filter(|(&other, k)| other != id && in_range(&kin[&id], k, &self.radio))
                .map(|(&other, _)| other)
                .collect()
        };
        let mut reached = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = self.workload.iter().map(|f| f.source).collect();
        while let Some(n) = queue.pop_front() {
            if reached.insert(n) {
                queue.extend(neighbors(n));
            }
        }
        let mut missing = Vec::new();
        for &a in &reached {
            for b in neighbors(a) {
                if a < b && !table.contains(a, b) {
                    missing.push(ValidationError::MissingLinkRow(a, b));
                }
            }
        }
        missing
    }
}
