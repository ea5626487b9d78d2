#![allow(dead_code)]

use std::collections::BTreeMap;

use ndmlnr::energy::EnergyConfig;
use ndmlnr::kinematics::RadioModel;
use ndmlnr::scenario::{Flow, NodeSpec, Scenario};
use ndmlnr::stability::{LinkRow, MetricMode, ProtocolConfig};
use ndmlnr::trace::{parse_path, TraceRecord};
use ndmlnr::NodeId;
use rand::Rng;

pub fn events<'a>(trace: &'a [TraceRecord], event: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
    trace.iter().filter(move |r| r.event == event)
}

pub fn path_of(r: &TraceRecord) -> Vec<NodeId> {
    parse_path(r.detail.str("path").expect("record has a path")).expect("well-formed path")
}

pub fn key_of(r: &TraceRecord) -> (i64, i64, i64) {
    (
        r.detail.i64("sa").unwrap(),
        r.detail.i64("da").unwrap(),
        r.detail.i64("id").unwrap(),
    )
}

/// Nodes in a random unit-disk layout, regenerated until connected.
pub fn random_connected_layout<R: Rng>(rng: &mut R, n: usize, range: f64) -> Vec<(f64, f64)> {
    let side = range * (n as f64).sqrt() * 0.9;
    loop {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
            .collect();
        if connected(&pts, range) {
            return pts;
        }
    }
}

pub fn connected(pts: &[(f64, f64)], range: f64) -> bool {
    let n = pts.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let d = (pts[u].0 - pts[v].0).hypot(pts[u].1 - pts[v].1);
            if !seen[v] && d <= range {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A tabulated-mode scenario: node `i` of `pts` gets id `i + 1`, and every
/// in-range pair gets a row from `row_for`.
pub fn tabulated_scenario(
    pts: &[(f64, f64)],
    range: f64,
    hop_delay: f64,
    wait: f64,
    mut row_for: impl FnMut(NodeId, NodeId) -> (f64, f64),
    workload: Vec<Flow>,
    duration: f64,
) -> Scenario {
    let nodes: Vec<NodeSpec> = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| NodeSpec::new(i as NodeId + 1, x, y, 1e6))
        .collect();
    let mut link_table = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            if d <= range {
                let (a, b) = (i as NodeId + 1, j as NodeId + 1);
                let (lsd, bandwidth) = row_for(a, b);
                link_table.push(LinkRow {
                    a,
                    b,
                    lsd: Some(lsd),
                    bandwidth,
                });
            }
        }
    }
    Scenario {
        nodes,
        radio: RadioModel::new(range, hop_delay),
        protocol: ProtocolConfig::new(15.0, wait),
        energy: EnergyConfig::default(),
        metric_mode: MetricMode::Tabulated,
        link_table,
        workload,
        duration,
        seed: 0,
    }
}

/// Undirected lookup over a scenario's link table.
pub fn table_of(s: &Scenario) -> BTreeMap<(NodeId, NodeId), (f64, f64)> {
    let mut t = BTreeMap::new();
    for r in &s.link_table {
        let v = (r.lsd.unwrap_or(f64::NAN), r.bandwidth);
        t.insert((r.a, r.b), v);
        t.insert((r.b, r.a), v);
    }
    t
}
