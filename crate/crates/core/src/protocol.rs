//! Per-node routing state machine.
//!
//! A discovery round floods stability-gated route requests. Every
//! intermediate node buffers the copies it hears in its neighbor information
//! table (NIT) for one wait period, then forwards exactly one of them. The
//! destination collects arrivals for a window, keeps a node-disjoint subset
//! ranked by cumulative bandwidth and answers each kept path with a route
//! reply. Nodes on an installed route watch their own stability and report
//! degradation upstream, which disables the route at the source and fails
//! over to a backup.
//!
//! Handlers never touch the network directly: they read link state through
//! [`NetworkView`] and return [`Output`]s for the engine to apply.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kinematics::NodeKinematics;
use crate::stability::{link_eligible, LinkMetrics, LsdMode, MetricError, ProtocolConfig};
use crate::trace::{path_string, Detail};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("source and destination are both node {0}")]
    SelfDiscovery(NodeId),
}

/// Identifies one discovery round: (SA, DA, ID).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoundKey {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u32,
}

impl RoundKey {
    pub fn detail(&self) -> Detail {
        Detail::new()
            .with("sa", self.source)
            .with("da", self.destination)
            .with("id", self.request_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRequest {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u32,
    /// Remaining hop budget; 0 when unlimited.
    pub ttl: u32,
    pub hops: u32,
    /// Cumulative bandwidth of the links traversed so far (Mbit/s).
    pub bandwidth: f64,
    pub lsd: f64,
    pub path: Vec<NodeId>,
    pub fwd_velocity: f64,
    pub fwd_heading: f64,
    pub fwd_position: (f64, f64),
}

impl RouteRequest {
    pub fn key(&self) -> RoundKey {
        RoundKey {
            source: self.source,
            destination: self.destination,
            request_id: self.request_id,
        }
    }

    pub fn forwarder(&self) -> NodeId {
        *self.path.last().expect("route request path is never empty")
    }

    pub fn forwarder_kinematics(&self) -> NodeKinematics {
        NodeKinematics::new(
            self.fwd_position.0,
            self.fwd_position.1,
            self.fwd_velocity,
            self.fwd_heading,
        )
    }

    fn stamp_forwarder(&mut self, k: &NodeKinematics) {
        self.fwd_velocity = k.speed;
        self.fwd_heading = k.heading;
        self.fwd_position = (k.x, k.y);
    }
}

/// One NIT row. `path` is the request's path as it arrived (ending at
/// `previous_hop`); `hops`, `lsd` and `bandwidth` already account for the
/// incoming link.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborInfoEntry {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u32,
    pub hops: u32,
    pub lsd: f64,
    pub bandwidth: f64,
    pub previous_hop: NodeId,
    pub arrival_seq: u64,
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RouteStatus {
    Primary,
    Backup,
    Disabled,
}

impl RouteStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RouteStatus::Primary => "primary",
            RouteStatus::Backup => "backup",
            RouteStatus::Disabled => "disabled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "primary" => Some(RouteStatus::Primary),
            "backup" => Some(RouteStatus::Backup),
            "disabled" => Some(RouteStatus::Disabled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub key: RoundKey,
    pub path: Vec<NodeId>,
    pub bandwidth: f64,
    pub status: RouteStatus,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.path.iter().position(|&n| n == node)
    }

    pub fn detail(&self) -> Detail {
        self.key
            .detail()
            .with("path", path_string(&self.path))
            .with("bw", self.bandwidth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Rrep,
    NodeOff,
    RouteDisable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMessage {
    pub kind: ControlKind,
    pub route: Route,
    pub reporter: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub key: RoundKey,
    pub path: Vec<NodeId>,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    Rreq(RouteRequest),
    Control(ControlMessage),
    Data(DataPacket),
}

impl Packet {
    /// Trace token for this packet kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Packet::Rreq(_) => "RREQ",
            Packet::Control(c) => match c.kind {
                ControlKind::Rrep => "RREP",
                ControlKind::NodeOff => "NODEOFF",
                ControlKind::RouteDisable => "ROUTEDISABLE",
            },
            Packet::Data(_) => "DATA",
        }
    }

    pub fn detail(&self) -> Detail {
        match self {
            Packet::Rreq(r) => r
                .key()
                .detail()
                .with("hops", r.hops)
                .with("bw", r.bandwidth)
                .with("lsd", r.lsd)
                .with("path", path_string(&r.path)),
            Packet::Control(c) => c.route.detail().with("reporter", c.reporter),
            Packet::Data(d) => d
                .key
                .detail()
                .with("path", path_string(&d.path))
                .with("seq", d.seq),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timer {
    /// NIT arbitration at an intermediate node.
    Wait(RoundKey),
    /// Candidate collection at the destination.
    Window(RoundKey),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Broadcast {
        packet: Packet,
        addressees: Vec<NodeId>,
    },
    Unicast {
        to: NodeId,
        packet: Packet,
    },
    StartTimer {
        delay: f64,
        timer: Timer,
    },
    Trace {
        event: &'static str,
        detail: Detail,
    },
}

/// Read-only access to link state, as seen by a node.
pub trait NetworkView {
    /// Alive nodes currently within radio range of `node`, ascending by id.
    fn neighbors(&self, node: NodeId) -> Vec<NodeId>;

    fn kinematics(&self, node: NodeId) -> NodeKinematics;

    /// Link `from -> to` charged against the receiver's drain rate.
    fn outgoing(&self, from: NodeId, to: NodeId) -> Result<LinkMetrics, MetricError>;

    /// Link from a forwarder, using the kinematics it advertised, as judged
    /// by the receiver.
    fn incoming(
        &self,
        forwarder: NodeId,
        advertised: &NodeKinematics,
        receiver: NodeId,
    ) -> Result<LinkMetrics, MetricError>;

    /// Link between `node` and `other` charged against `node`'s own drain rate.
    fn own_link(&self, node: NodeId, other: NodeId) -> Result<LinkMetrics, MetricError>;
}

/// NIT arbitration order: higher LSD, then fewer hops, then higher bandwidth,
/// then earlier arrival. `Less` means `a` is preferred.
pub fn rreq_preference(a: &NeighborInfoEntry, b: &NeighborInfoEntry) -> Ordering {
    b.lsd
        .total_cmp(&a.lsd)
        .then(a.hops.cmp(&b.hops))
        .then(b.bandwidth.total_cmp(&a.bandwidth))
        .then(a.arrival_seq.cmp(&b.arrival_seq))
}

/// Picks the request to forward at the end of a wait period.
pub fn select_rreq(entries: &[NeighborInfoEntry]) -> Option<&NeighborInfoEntry> {
    entries.iter().min_by(|a, b| rreq_preference(a, b))
}

/// A complete source-to-destination path as it reached the destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub path: Vec<NodeId>,
    pub bandwidth: f64,
    pub arrival_seq: u64,
}

impl Candidate {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn intermediates(&self) -> &[NodeId] {
        match self.path.len() {
            0..=2 => &[],
            n => &self.path[1..n - 1],
        }
    }
}

/// Destination-side ranking: higher bandwidth, fewer hops, earlier arrival.
pub fn candidate_preference(a: &Candidate, b: &Candidate) -> Ordering {
    b.bandwidth
        .total_cmp(&a.bandwidth)
        .then(a.hops().cmp(&b.hops()))
        .then(a.arrival_seq.cmp(&b.arrival_seq))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    /// Kept paths, best first.
    pub accepted: Vec<Candidate>,
    /// Dropped paths with the first intermediate node they share with an
    /// already accepted path.
    pub rejected: Vec<(Candidate, NodeId)>,
}

/// Greedy node-disjoint selection over the ranked candidates.
pub fn destination_collect(candidates: &[Candidate]) -> Selection {
    let mut ranked: Vec<&Candidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| candidate_preference(a, b));
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut selection = Selection::default();
    for cand in ranked {
        match cand.intermediates().iter().find(|n| used.contains(n)) {
            Some(&shared) => selection.rejected.push((cand.clone(), shared)),
            None => {
                used.extend(cand.intermediates());
                selection.accepted.push(cand.clone());
            }
        }
    }
    selection
}

#[derive(Debug, Clone)]
struct Membership {
    key: RoundKey,
    path: Vec<NodeId>,
    active: bool,
}

#[derive(Debug, Clone, Default)]
struct SourceState {
    routes: Vec<Route>,
    /// Outstanding discovery round.
    pending: Option<u32>,
    data_seq: u64,
}

impl SourceState {
    fn primary(&self) -> Option<&Route> {
        self.routes.iter().find(|r| r.status == RouteStatus::Primary)
    }

    fn best_backup(&mut self) -> Option<&mut Route> {
        self.routes
            .iter_mut()
            .filter(|r| r.status == RouteStatus::Backup)
            .min_by(|a, b| {
                b.bandwidth
                    .total_cmp(&a.bandwidth)
                    .then(a.hops().cmp(&b.hops()))
            })
    }
}

fn trace(out: &mut Vec<Output>, event: &'static str, detail: Detail) {
    out.push(Output::Trace { event, detail });
}

/// Protocol state owned by one node.
#[derive(Debug, Clone)]
pub struct ProtocolNode {
    pub id: NodeId,
    cfg: ProtocolConfig,
    nit: BTreeMap<RoundKey, Vec<NeighborInfoEntry>>,
    forwarded: BTreeSet<RoundKey>,
    arrival_seq: u64,
    windows: BTreeMap<RoundKey, Vec<Candidate>>,
    closed: BTreeSet<RoundKey>,
    memberships: Vec<Membership>,
    flows: BTreeMap<NodeId, SourceState>,
    next_request_id: u32,
}

impl ProtocolNode {
    pub fn new(id: NodeId, cfg: ProtocolConfig) -> Self {
        Self {
            id,
            cfg,
            nit: BTreeMap::new(),
            forwarded: BTreeSet::new(),
            arrival_seq: 0,
            windows: BTreeMap::new(),
            closed: BTreeSet::new(),
            memberships: Vec::new(),
            flows: BTreeMap::new(),
            next_request_id: 1,
        }
    }

    pub fn nit_entries(&self, key: &RoundKey) -> &[NeighborInfoEntry] {
        self.nit.get(key).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn has_forwarded(&self, key: &RoundKey) -> bool {
        self.forwarded.contains(key)
    }

    /// Routes installed at this node (as a source) toward `destination`.
    pub fn routes_to(&self, destination: NodeId) -> &[Route] {
        self.flows
            .get(&destination)
            .map(|s| s.routes.as_slice())
            .unwrap_or_default()
    }

    pub fn active_memberships(&self) -> usize {
        self.memberships.iter().filter(|m| m.active).count()
    }

    fn eligible_addressees(&self, env: &dyn NetworkView, exclude: &[NodeId]) -> Vec<NodeId> {
        env.neighbors(self.id)
            .into_iter()
            .filter(|n| *n != self.id && !exclude.contains(n))
            .filter(|&n| {
                env.outgoing(self.id, n)
                    .map(|m| link_eligible(&m, &self.cfg))
                    .unwrap_or(false)
            })
            .collect()
    }

    /// Starts a fresh discovery round toward `destination`.
    pub fn originate_discovery(
        &mut self,
        destination: NodeId,
        env: &dyn NetworkView,
    ) -> Result<Vec<Output>, ProtocolError> {
        if destination == self.id {
            return Err(ProtocolError::SelfDiscovery(self.id));
        }
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        let mut rreq = RouteRequest {
            source: self.id,
            destination,
            request_id,
            ttl: self.cfg.ttl_limit,
            hops: 0,
            bandwidth: 0.0,
            lsd: 0.0,
            path: vec![self.id],
            fwd_velocity: 0.0,
            fwd_heading: 0.0,
            fwd_position: (0.0, 0.0),
        };
        rreq.stamp_forwarder(&env.kinematics(self.id));
        let key = rreq.key();
        self.forwarded.insert(key);

        let mut out = Vec::new();
        trace(&mut out, "DISCOVERY_START", key.detail());
        let addressees = self.eligible_addressees(env, &rreq.path);
        let flow = self.flows.entry(destination).or_default();
        if addressees.is_empty() {
            flow.pending = None;
            trace(
                &mut out,
                "DISCOVERY_FAIL",
                key.detail().with("reason", "no_eligible_neighbor"),
            );
        } else {
            flow.pending = Some(request_id);
            out.push(Output::Broadcast {
                packet: Packet::Rreq(rreq),
                addressees,
            });
        }
        Ok(out)
    }

    /// Records an incoming route request in the NIT (or, at the
    /// destination, as a candidate path).
    pub fn handle_rreq(&mut self, rreq: &RouteRequest, env: &dyn NetworkView) -> Vec<Output> {
        let mut out = Vec::new();
        let key = rreq.key();
        let from = rreq.forwarder();
        let drop = |out: &mut Vec<Output>, reason: &str| {
            trace(
                out,
                "RREQ_DROP",
                key.detail().with("from", from).with("reason", reason),
            );
        };

        let at_destination = self.id == rreq.destination;
        if rreq.path.contains(&self.id) {
            drop(&mut out, "loop");
            return out;
        }
        if at_destination && self.closed.contains(&key) {
            drop(&mut out, "window_closed");
            return out;
        }
        if !at_destination && self.forwarded.contains(&key) {
            drop(&mut out, "already_forwarded");
            return out;
        }
        if self.cfg.ttl_limit > 0 && rreq.hops >= self.cfg.ttl_limit {
            drop(&mut out, "ttl");
            return out;
        }
        let link = match env.incoming(from, &rreq.forwarder_kinematics(), self.id) {
            Ok(link) => link,
            Err(e) => {
                drop(&mut out, &format!("metric: {e}"));
                return out;
            }
        };
        if !link_eligible(&link, &self.cfg) {
            drop(&mut out, "ineligible");
            return out;
        }

        let hops = rreq.hops + 1;
        let bandwidth = rreq.bandwidth + link.bandwidth;
        let lsd = match self.cfg.lsd_mode {
            LsdMode::LastHop => link.lsd,
            LsdMode::Bottleneck if rreq.hops == 0 => link.lsd,
            LsdMode::Bottleneck => rreq.lsd.min(link.lsd),
        };
        self.arrival_seq += 1;
        let seq = self.arrival_seq;
        let detail = key
            .detail()
            .with("from", from)
            .with("hops", hops)
            .with("link_lsd", link.lsd)
            .with("lsd", lsd)
            .with("bw", bandwidth)
            .with("path", path_string(&rreq.path))
            .with("seq", seq);
        trace(&mut out, "RREQ_RECV", detail);

        if at_destination {
            let mut path = rreq.path.clone();
            path.push(self.id);
            let window = self.windows.entry(key).or_default();
            let first = window.is_empty();
            window.push(Candidate {
                path,
                bandwidth,
                arrival_seq: seq,
            });
            if first {
                out.push(Output::StartTimer {
                    delay: self.cfg.dest_window(),
                    timer: Timer::Window(key),
                });
            }
        } else {
            let entries = self.nit.entry(key).or_default();
            let first = entries.is_empty();
            entries.push(NeighborInfoEntry {
                source: key.source,
                destination: key.destination,
                request_id: key.request_id,
                hops,
                lsd,
                bandwidth,
                previous_hop: from,
                arrival_seq: seq,
                path: rreq.path.clone(),
            });
            if first {
                out.push(Output::StartTimer {
                    delay: self.cfg.wait_period,
                    timer: Timer::Wait(key),
                });
            }
        }
        out
    }

    pub fn on_timer(&mut self, timer: Timer, env: &dyn NetworkView) -> Vec<Output> {
        match timer {
            Timer::Wait(key) => self.on_wait_expired(key, env),
            Timer::Window(key) => self.on_window_close(key),
        }
    }

    fn on_wait_expired(&mut self, key: RoundKey, env: &dyn NetworkView) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(entries) = self.nit.remove(&key) else {
            return out;
        };
        let Some(winner) = select_rreq(&entries).cloned() else {
            return out;
        };
        self.forwarded.insert(key);
        trace(
            &mut out,
            "NIT_SELECT",
            key.detail()
                .with("entries", entries.len())
                .with("from", winner.previous_hop)
                .with("hops", winner.hops)
                .with("lsd", winner.lsd)
                .with("bw", winner.bandwidth)
                .with("seq", winner.arrival_seq),
        );
        out.extend(self.forward_rreq(&winner, env));
        out
    }

    /// Rebroadcasts the winning request with this node appended.
    pub fn forward_rreq(&self, winner: &NeighborInfoEntry, env: &dyn NetworkView) -> Vec<Output> {
        let mut path = winner.path.clone();
        path.push(self.id);
        let mut rreq = RouteRequest {
            source: winner.source,
            destination: winner.destination,
            request_id: winner.request_id,
            ttl: if self.cfg.ttl_limit > 0 {
                self.cfg.ttl_limit.saturating_sub(winner.hops)
            } else {
                0
            },
            hops: winner.hops,
            bandwidth: winner.bandwidth,
            lsd: winner.lsd,
            path,
            fwd_velocity: 0.0,
            fwd_heading: 0.0,
            fwd_position: (0.0, 0.0),
        };
        rreq.stamp_forwarder(&env.kinematics(self.id));
        let addressees = self.eligible_addressees(env, &rreq.path);
        if addressees.is_empty() {
            let mut out = Vec::new();
            trace(&mut out, "RREQ_DEAD_END", rreq.key().detail());
            return out;
        }
        vec![Output::Broadcast {
            packet: Packet::Rreq(rreq),
            addressees,
        }]
    }

    fn on_window_close(&mut self, key: RoundKey) -> Vec<Output> {
        let mut out = Vec::new();
        self.closed.insert(key);
        let candidates = self.windows.remove(&key).unwrap_or_default();
        for c in &candidates {
            trace(
                &mut out,
                "CANDIDATE",
                key.detail()
                    .with("path", path_string(&c.path))
                    .with("bw", c.bandwidth)
                    .with("hops", c.hops())
                    .with("seq", c.arrival_seq),
            );
        }
        let selection = destination_collect(&candidates);
        for (c, shared) in &selection.rejected {
            trace(
                &mut out,
                "ROUTE_REJECT",
                key.detail()
                    .with("path", path_string(&c.path))
                    .with("bw", c.bandwidth)
                    .with("shared", *shared),
            );
        }
        trace(
            &mut out,
            "WINDOW_CLOSE",
            key.detail()
                .with("candidates", candidates.len())
                .with("accepted", selection.accepted.len()),
        );
        let routes: Vec<Route> = selection
            .accepted
            .iter()
            .enumerate()
            .map(|(i, c)| Route {
                key,
                path: c.path.clone(),
                bandwidth: c.bandwidth,
                status: if i == 0 {
                    RouteStatus::Primary
                } else {
                    RouteStatus::Backup
                },
            })
            .collect();
        for r in &routes {
            trace(
                &mut out,
                "ROUTE_ACCEPT",
                r.detail().with("status", r.status.as_str()),
            );
        }
        out.extend(self.issue_rrep(&routes));
        out
    }

    /// One reply per accepted route, sent back along the reversed path. The
    /// route's status carries the destination's primary/backup designation.
    pub fn issue_rrep(&self, accepted: &[Route]) -> Vec<Output> {
        accepted
            .iter()
            .filter(|r| r.path.len() >= 2)
            .map(|r| Output::Unicast {
                to: r.path[r.path.len() - 2],
                packet: Packet::Control(ControlMessage {
                    kind: ControlKind::Rrep,
                    route: r.clone(),
                    reporter: self.id,
                }),
            })
            .collect()
    }

    pub fn handle_control(&mut self, msg: &ControlMessage, env: &dyn NetworkView) -> Vec<Output> {
        match msg.kind {
            ControlKind::Rrep => self.handle_rrep(msg),
            ControlKind::NodeOff => self.handle_nodeoff(msg, env),
            ControlKind::RouteDisable => self.handle_route_disable(msg, env),
        }
    }

    fn upstream(&self, route: &Route) -> Option<NodeId> {
        route
            .position(self.id)
            .filter(|&i| i > 0)
            .map(|i| route.path[i - 1])
    }

    fn handle_rrep(&mut self, msg: &ControlMessage) -> Vec<Output> {
        let route = &msg.route;
        if route.key.source == self.id {
            return self.install_route(route);
        }
        let Some(prev) = self.upstream(route) else {
            return Vec::new();
        };
        self.memberships.push(Membership {
            key: route.key,
            path: route.path.clone(),
            active: true,
        });
        vec![Output::Unicast {
            to: prev,
            packet: Packet::Control(msg.clone()),
        }]
    }

    fn install_route(&mut self, route: &Route) -> Vec<Output> {
        let mut out = Vec::new();
        let flow = self.flows.entry(route.key.destination).or_default();
        let status = if route.status == RouteStatus::Primary && flow.primary().is_none() {
            RouteStatus::Primary
        } else {
            RouteStatus::Backup
        };
        let installed = Route {
            status,
            ..route.clone()
        };
        if flow.pending == Some(route.key.request_id) {
            flow.pending = None;
        }
        trace(
            &mut out,
            "ROUTE_INSTALL",
            installed.detail().with("status", status.as_str()),
        );
        flow.routes.push(installed);
        out
    }

    fn deactivate(&mut self, route: &Route) {
        for m in &mut self.memberships {
            if m.key == route.key && m.path == route.path {
                m.active = false;
            }
        }
    }

    /// A downstream node reported degradation: invalidate the route toward
    /// the source.
    pub fn handle_nodeoff(&mut self, msg: &ControlMessage, env: &dyn NetworkView) -> Vec<Output> {
        self.deactivate(&msg.route);
        if msg.route.key.source == self.id {
            return self.disable_at_source(&msg.route, env);
        }
        match self.upstream(&msg.route) {
            Some(prev) => vec![Output::Unicast {
                to: prev,
                packet: Packet::Control(ControlMessage {
                    kind: ControlKind::RouteDisable,
                    route: msg.route.clone(),
                    reporter: self.id,
                }),
            }],
            None => Vec::new(),
        }
    }

    fn handle_route_disable(&mut self, msg: &ControlMessage, env: &dyn NetworkView) -> Vec<Output> {
        self.deactivate(&msg.route);
        if msg.route.key.source == self.id {
            return self.disable_at_source(&msg.route, env);
        }
        match self.upstream(&msg.route) {
            Some(prev) => vec![Output::Unicast {
                to: prev,
                packet: Packet::Control(msg.clone()),
            }],
            None => Vec::new(),
        }
    }

    /// Marks a route disabled and fails over to the best backup. With no
    /// usable route left, a new discovery round starts.
    fn disable_at_source(&mut self, route: &Route, env: &dyn NetworkView) -> Vec<Output> {
        let mut out = Vec::new();
        let destination = route.key.destination;
        let flow = self.flows.entry(destination).or_default();
        let Some(existing) = flow
            .routes
            .iter_mut()
            .find(|r| r.key == route.key && r.path == route.path && r.status != RouteStatus::Disabled)
        else {
            trace(&mut out, "ROUTEDISABLE_IGNORED", route.detail());
            return out;
        };
        let was = existing.status;
        existing.status = RouteStatus::Disabled;
        trace(
            &mut out,
            "ROUTE_DISABLE",
            existing.detail().with("was", was.as_str()),
        );
        if was == RouteStatus::Primary {
            if let Some(backup) = flow.best_backup() {
                backup.status = RouteStatus::Primary;
                trace(&mut out, "ROUTE_PROMOTE", backup.detail());
            }
        }
        let usable = flow.routes.iter().any(|r| r.status != RouteStatus::Disabled);
        if !usable && flow.pending.is_none() {
            // only fails for a self-addressed flow, which installs no routes
            if let Ok(more) = self.originate_discovery(destination, env) {
                out.extend(more);
            }
        }
        out
    }

    /// Workload tick at the source: send on the primary (promoting a backup
    /// if needed) or start a discovery when nothing is usable.
    pub fn on_data_emit(
        &mut self,
        destination: NodeId,
        send_data: bool,
        env: &dyn NetworkView,
    ) -> Result<Vec<Output>, ProtocolError> {
        let mut out = Vec::new();
        let flow = self.flows.entry(destination).or_default();
        if flow.primary().is_none() {
            if let Some(backup) = flow.best_backup() {
                backup.status = RouteStatus::Primary;
                let d = backup.detail();
                trace(&mut out, "ROUTE_PROMOTE", d);
            }
        }
        if let Some((key, path)) = flow.primary().map(|p| (p.key, p.path.clone())) {
            if send_data {
                flow.data_seq += 1;
                let packet = DataPacket {
                    key,
                    path,
                    seq: flow.data_seq,
                };
                out.push(Output::Unicast {
                    to: packet.path[1],
                    packet: Packet::Data(packet),
                });
            }
            return Ok(out);
        }
        if flow.pending.is_some() {
            if send_data {
                trace(
                    &mut out,
                    "DATA_HOLD",
                    Detail::new()
                        .with("da", destination)
                        .with("reason", "discovery_pending"),
                );
            }
            return Ok(out);
        }
        out.extend(self.originate_discovery(destination, env)?);
        Ok(out)
    }

    pub fn handle_data(&mut self, pkt: &DataPacket) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(i) = pkt.path.iter().position(|&n| n == self.id) else {
            return out;
        };
        if i + 1 == pkt.path.len() {
            trace(
                &mut out,
                "DATA_DELIVER",
                pkt.key
                    .detail()
                    .with("path", path_string(&pkt.path))
                    .with("seq", pkt.seq),
            );
        } else {
            out.push(Output::Unicast {
                to: pkt.path[i + 1],
                packet: Packet::Data(pkt.clone()),
            });
        }
        out
    }

    /// Periodic self-check on every route this node relays. Stability is the
    /// minimum LSD over the node's adjacent links on that route, charged
    /// against its own drain rate; an unusable link counts as zero.
    pub fn monitor_node_stability(&mut self, env: &dyn NetworkView) -> Vec<Output> {
        let mut out = Vec::new();
        let id = self.id;
        let threshold = self.cfg.lsd_threshold;
        for m in self.memberships.iter_mut().filter(|m| m.active) {
            let Some(i) = m.path.iter().position(|&n| n == id) else {
                continue;
            };
            if i == 0 || i + 1 >= m.path.len() {
                continue;
            }
            let link_lsd = |other| env.own_link(id, other).map(|l| l.lsd).unwrap_or(0.0);
            let pred_lsd = link_lsd(m.path[i - 1]);
            let succ_lsd = link_lsd(m.path[i + 1]);
            let lsd = pred_lsd.min(succ_lsd);
            if lsd < threshold {
                m.active = false;
                let route = Route {
                    key: m.key,
                    path: m.path.clone(),
                    bandwidth: 0.0,
                    status: RouteStatus::Disabled,
                };
                trace(
                    &mut out,
                    "STABILITY_LOW",
                    m.key
                        .detail()
                        .with("path", path_string(&m.path))
                        .with("lsd", lsd)
                        .with("pred_lsd", pred_lsd)
                        .with("succ_lsd", succ_lsd),
                );
                out.push(Output::Unicast {
                    to: m.path[i - 1],
                    packet: Packet::Control(ControlMessage {
                        kind: ControlKind::NodeOff,
                        route,
                        reporter: id,
                    }),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(lsd: f64, hops: u32, bw: f64, seq: u64) -> NeighborInfoEntry {
        NeighborInfoEntry {
            source: 1,
            destination: 6,
            request_id: 1,
            hops,
            lsd,
            bandwidth: bw,
            previous_hop: 0,
            arrival_seq: seq,
            path: vec![1],
        }
    }

    fn cand(path: &[NodeId], bw: f64, seq: u64) -> Candidate {
        Candidate {
            path: path.to_vec(),
            bandwidth: bw,
            arrival_seq: seq,
        }
    }

    #[test]
    fn select_prefers_higher_lsd() {
        let e = [entry(20.0, 1, 7.0, 1), entry(17.0, 2, 13.0, 2)];
        assert_eq!(select_rreq(&e).unwrap().lsd, 20.0);
        let e = [entry(16.0, 3, 22.0, 1), entry(18.0, 3, 21.0, 2)];
        assert_eq!(select_rreq(&e).unwrap().lsd, 18.0);
    }

    #[test]
    fn select_tie_breaks() {
        let e = [entry(12.0, 3, 50.0, 1), entry(12.0, 2, 9.0, 2)];
        assert_eq!(select_rreq(&e).unwrap().hops, 2);
        let e = [entry(12.0, 2, 8.0, 1), entry(12.0, 2, 9.0, 2)];
        assert_eq!(select_rreq(&e).unwrap().bandwidth, 9.0);
        let e = [entry(12.0, 2, 9.0, 5), entry(12.0, 2, 9.0, 3)];
        assert_eq!(select_rreq(&e).unwrap().arrival_seq, 3);
        assert!(select_rreq(&[]).is_none());
    }

    #[test]
    fn collect_worked_example() {
        let s = destination_collect(&[
            cand(&[1, 2, 3, 6], 17.0, 1),
            cand(&[1, 4, 5, 6], 19.0, 2),
            cand(&[1, 4, 8, 9, 6], 28.0, 3),
        ]);
        let kept: Vec<_> = s.accepted.iter().map(|c| c.path.clone()).collect();
        assert_eq!(kept, vec![vec![1, 4, 8, 9, 6], vec![1, 2, 3, 6]]);
        assert_eq!(s.rejected.len(), 1);
        assert_eq!(s.rejected[0].0.path, vec![1, 4, 5, 6]);
        assert_eq!(s.rejected[0].1, 4);
    }

    #[test]
    fn collect_single_and_empty() {
        let s = destination_collect(&[cand(&[1, 2, 6], 3.0, 1)]);
        assert_eq!(s.accepted.len(), 1);
        assert!(destination_collect(&[]).accepted.is_empty());
    }

    #[test]
    fn collect_tie_break_chain() {
        // equal bandwidth, shared node 2: fewer hops wins
        let s = destination_collect(&[cand(&[1, 2, 3, 6], 5.0, 1), cand(&[1, 2, 6], 5.0, 2)]);
        assert_eq!(s.accepted[0].path, vec![1, 2, 6]);
        assert_eq!(s.accepted.len(), 1);
        // equal bandwidth and hops: earlier arrival wins
        let s = destination_collect(&[cand(&[1, 3, 2, 6], 5.0, 2), cand(&[1, 2, 4, 6], 5.0, 1)]);
        assert_eq!(s.accepted[0].path, vec![1, 2, 4, 6]);
        assert_eq!(s.rejected[0].1, 2);
    }

    #[test]
    fn direct_paths_never_conflict() {
        let s = destination_collect(&[cand(&[1, 6], 1.0, 1), cand(&[1, 2, 6], 9.0, 2)]);
        assert_eq!(s.accepted.len(), 2);
    }
}
