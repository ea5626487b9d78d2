//! Run summaries, built by replaying trace records.
//!
//! The engine feeds every record it emits through [`ReportBuilder`]; feeding
//! a parsed trace file through the same builder must reproduce the report
//! byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::RoundKey;
use crate::trace::{parse_path, trace_time, TraceRecord};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedRoute {
    pub path: Vec<NodeId>,
    pub bandwidth: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestReport {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u32,
    pub started_at: f64,
    /// Time from discovery start to the first installed route.
    pub latency: Option<f64>,
    pub failed: bool,
    /// Routes kept by the destination.
    pub accepted: Vec<ReportedRoute>,
    /// Routes installed at the source, in arrival order.
    pub installed: Vec<ReportedRoute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub node: NodeId,
    pub initial: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub rreq: u64,
    pub rrep: u64,
    pub nodeoff: u64,
    pub routedisable: u64,
    pub data_sent: u64,
    pub data_delivered: u64,
    pub overheard: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteLifetime {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u32,
    pub path: Vec<NodeId>,
    pub installed_at: f64,
    pub disabled_at: Option<f64>,
    /// Until disabled, or until the end of the run.
    pub lifetime: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub requests: Vec<RequestReport>,
    pub final_energy: Vec<NodeEnergy>,
    /// Sum of every window's consumption plus unsampled remainders.
    pub energy_charged: f64,
    pub counts: MessageCounts,
    pub route_lifetimes: Vec<RouteLifetime>,
    pub end_time: f64,
}

impl RunReport {
    pub fn from_trace(records: &[TraceRecord]) -> RunReport {
        let mut b = ReportBuilder::default();
        for r in records {
            b.observe(r);
        }
        b.finish()
    }

    pub fn total_initial(&self) -> f64 {
        self.final_energy.iter().map(|n| n.initial).sum()
    }

    pub fn total_residual(&self) -> f64 {
        self.final_energy.iter().map(|n| n.residual).sum()
    }
}

#[derive(Debug, Default)]
pub struct ReportBuilder {
    requests: BTreeMap<RoundKey, RequestReport>,
    lifetimes: Vec<RouteLifetime>,
    final_energy: Vec<NodeEnergy>,
    charged: f64,
    counts: MessageCounts,
    end_time: f64,
}

fn key_of(r: &TraceRecord) -> Option<RoundKey> {
    Some(RoundKey {
        source: r.detail.i64("sa")?.try_into().ok()?,
        destination: r.detail.i64("da")?.try_into().ok()?,
        request_id: r.detail.i64("id")?.try_into().ok()?,
    })
}

fn route_of(r: &TraceRecord) -> Option<ReportedRoute> {
    Some(ReportedRoute {
        path: parse_path(r.detail.str("path")?)?,
        bandwidth: r.detail.f64("bw")?,
        status: r.detail.str("status").unwrap_or("").to_owned(),
    })
}

impl ReportBuilder {
    pub fn observe(&mut self, r: &TraceRecord) {
        let t = trace_time(r.time);
        match r.event.as_str() {
            "RREQ_SEND" => self.counts.rreq += 1,
            "RREP_SEND" => self.counts.rrep += 1,
            "NODEOFF_SEND" => self.counts.nodeoff += 1,
            "ROUTEDISABLE_SEND" => self.counts.routedisable += 1,
            "DATA_SEND" => self.counts.data_sent += 1,
            "DATA_DELIVER" => self.counts.data_delivered += 1,
            "OVERHEAR" => self.counts.overheard += 1,
            "DISCOVERY_START" => {
                if let Some(k) = key_of(r) {
                    self.requests.insert(
                        k,
                        RequestReport {
                            source: k.source,
                            destination: k.destination,
                            request_id: k.request_id,
                            started_at: t,
                            latency: None,
                            failed: false,
                            accepted: Vec::new(),
                            installed: Vec::new(),
                        },
                    );
                }
            }
            "DISCOVERY_FAIL" => {
                if let Some(req) = key_of(r).and_then(|k| self.requests.get_mut(&k)) {
                    req.failed = true;
                }
            }
            "ROUTE_ACCEPT" => {
                if let (Some(req), Some(route)) =
                    (key_of(r).and_then(|k| self.requests.get_mut(&k)), route_of(r))
                {
                    req.accepted.push(route);
                }
            }
            "ROUTE_INSTALL" => {
                let (Some(k), Some(route)) = (key_of(r), route_of(r)) else {
                    return;
                };
                if let Some(req) = self.requests.get_mut(&k) {
                    if req.latency.is_none() {
                        req.latency = Some(t - req.started_at);
                    }
                    req.installed.push(route.clone());
                }
                self.lifetimes.push(RouteLifetime {
                    source: k.source,
                    destination: k.destination,
                    request_id: k.request_id,
                    path: route.path,
                    installed_at: t,
                    disabled_at: None,
                    lifetime: 0.0,
                });
            }
            "ROUTE_DISABLE" => {
                let (Some(k), Some(path)) = (key_of(r), r.detail.str("path").and_then(parse_path))
                else {
                    return;
                };
                if let Some(l) = self.lifetimes.iter_mut().find(|l| {
                    l.disabled_at.is_none()
                        && l.source == k.source
                        && l.destination == k.destination
                        && l.request_id == k.request_id
                        && l.path == path
                }) {
                    l.disabled_at = Some(t);
                }
            }
            "ENERGY_SAMPLE" => self.charged += r.detail.f64("consumed").unwrap_or(0.0),
            "ENERGY_FINAL" => {
                self.charged += r.detail.f64("pending").unwrap_or(0.0);
                if let (Some(node), Some(initial), Some(residual)) = (
                    r.detail.i64("node").and_then(|n| NodeId::try_from(n).ok()),
                    r.detail.f64("initial"),
                    r.detail.f64("residual"),
                ) {
                    self.final_energy.push(NodeEnergy {
                        node,
                        initial,
                        residual,
                    });
                }
            }
            "RUN_END" => self.end_time = t,
            _ => {}
        }
    }

    pub fn finish(self) -> RunReport {
        let end = self.end_time;
        let route_lifetimes = self
            .lifetimes
            .into_iter()
            .map(|mut l| {
                l.lifetime = l.disabled_at.unwrap_or(end) - l.installed_at;
                l
            })
            .collect();
        RunReport {
            requests: self.requests.into_values().collect(),
            final_energy: self.final_energy,
            energy_charged: self.charged,
            counts: self.counts,
            route_lifetimes,
            end_time: end,
        }
    }
}
