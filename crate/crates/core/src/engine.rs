//! Deterministic discrete-event core.
//!
//! Events pop in ascending `(time, kind, seq)`. At equal timestamps packet
//! deliveries run before wait timers, which run before destination windows,
//! then energy sampling, motion, and workload emission. `seq` is a global
//! insertion counter, so ties within a kind resolve in scheduling order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{EnergyConfig, EnergyState};
use crate::kinematics::{advance, in_range, NodeKinematics};
use crate::protocol::{NetworkView, Output, Packet, ProtocolNode, Timer};
use crate::report::{ReportBuilder, RunReport};
use crate::scenario::{DrainSpan, Flow, Scenario, ValidationError, Waypoint};
use crate::stability::{Endpoint, LinkMetrics, LinkTable, MetricError, MetricSource};
use crate::trace::{Detail, TraceRecord};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Delivery,
    WaitTimer,
    WindowClose,
    SampleTick,
    MotionTick,
    DataEmit,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Delivery {
        from: NodeId,
        to: NodeId,
        packet: Arc<Packet>,
        addressed: bool,
    },
    Timer {
        node: NodeId,
        timer: Timer,
    },
    /// Periodic tick number `k`, firing at `k * sample_period`.
    Tick(u64),
    Data {
        flow: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    fn order_key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.order_key(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key(other)
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind, payload: Payload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event {
            time,
            kind,
            seq,
            payload,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone)]
struct NodePhys {
    id: NodeId,
    kin: NodeKinematics,
    energy: EnergyState,
    initial: f64,
    waypoints: Vec<Waypoint>,
    next_waypoint: usize,
    extra_drain: Vec<DrainSpan>,
}

struct View<'a> {
    phys: &'a [NodePhys],
    index: &'a BTreeMap<NodeId, usize>,
    metrics: &'a MetricSource,
}

impl View<'_> {
    fn node(&self, id: NodeId) -> &NodePhys {
        &self.phys[self.index[&id]]
    }

    fn endpoint(&self, id: NodeId) -> Endpoint {
        let n = self.node(id);
        Endpoint {
            id,
            kinematics: n.kin,
            drain_rate: n.energy.drain_rate,
        }
    }

    fn reachable(&self, a: NodeId, b: NodeId) -> bool {
        let (na, nb) = (self.node(a), self.node(b));
        na.energy.alive && nb.energy.alive && in_range(&na.kin, &nb.kin, &self.metrics.radio)
    }
}

impl NetworkView for View<'_> {
    fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let me = self.node(node);
        self.phys
            .iter()
            .filter(|n| n.id != node && n.energy.alive)
            .filter(|n| in_range(&me.kin, &n.kin, &self.metrics.radio))
            .map(|n| n.id)
            .collect()
    }

    fn kinematics(&self, node: NodeId) -> NodeKinematics {
        self.node(node).kin
    }

    fn outgoing(&self, from: NodeId, to: NodeId) -> Result<LinkMetrics, MetricError> {
        if !self.reachable(from, to) {
            return Err(MetricError::Unreachable(to));
        }
        let receiver = self.endpoint(to);
        self.metrics.link(&self.endpoint(from), &receiver, &receiver)
    }

    fn incoming(
        &self,
        forwarder: NodeId,
        advertised: &NodeKinematics,
        receiver: NodeId,
    ) -> Result<LinkMetrics, MetricError> {
        let from = Endpoint {
            kinematics: *advertised,
            ..self.endpoint(forwarder)
        };
        let to = self.endpoint(receiver);
        self.metrics.link(&from, &to, &to)
    }

    fn own_link(&self, node: NodeId, other: NodeId) -> Result<LinkMetrics, MetricError> {
        if !self.reachable(node, other) {
            return Err(MetricError::Unreachable(other));
        }
        let me = self.endpoint(node);
        self.metrics.link(&self.endpoint(other), &me, &me)
    }
}

/// Trace plus summary of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub report: RunReport,
}

impl RunOutput {
    pub fn trace_text(&self) -> String {
        crate::trace::render(&self.trace)
    }
}

pub struct Engine {
    duration: f64,
    energy_cfg: EnergyConfig,
    workload: Vec<Flow>,
    metrics: MetricSource,
    phys: Vec<NodePhys>,
    protos: Vec<ProtocolNode>,
    index: BTreeMap<NodeId, usize>,
    queue: EventQueue,
    now: f64,
    trace: Vec<TraceRecord>,
    report: ReportBuilder,
    rng: ChaCha8Rng,
    processed: u64,
    finished: bool,
}

/// Validates and runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, Vec<ValidationError>> {
    let mut engine = Engine::new(scenario)?;
    engine.run_to_end();
    Ok(engine.into_output())
}

impl Engine {
    pub fn new(scenario: &Scenario) -> Result<Engine, Vec<ValidationError>> {
        scenario.validate()?;
        let energy_cfg = scenario.energy;
        let mut specs = scenario.nodes.clone();
        specs.sort_by_key(|n| n.id);
        let mut phys = Vec::with_capacity(specs.len());
        let mut protos = Vec::with_capacity(specs.len());
        let mut index = BTreeMap::new();
        for (i, spec) in specs.iter().enumerate() {
            let mut waypoints = spec.waypoints.clone();
            waypoints.sort_by(|a, b| a.time.total_cmp(&b.time));
            let mut kin = spec.kinematics();
            let mut next_waypoint = 0;
            while next_waypoint < waypoints.len() && waypoints[next_waypoint].time <= 0.0 {
                let w = waypoints[next_waypoint];
                kin = kin.with_velocity(w.speed, w.heading);
                next_waypoint += 1;
            }
            phys.push(NodePhys {
                id: spec.id,
                kin,
                energy: EnergyState::new(spec.energy, &energy_cfg),
                initial: spec.energy,
                waypoints,
                next_waypoint,
                extra_drain: spec.extra_drain.clone(),
            });
            protos.push(ProtocolNode::new(spec.id, scenario.protocol));
            index.insert(spec.id, i);
        }
        let metrics = MetricSource {
            mode: scenario.metric_mode,
            table: LinkTable::from_rows(&scenario.link_table),
            radio: scenario.radio,
        };
        let mut engine = Engine {
            duration: scenario.duration,
            energy_cfg,
            workload: scenario.workload.clone(),
            metrics,
            phys,
            protos,
            index,
            queue: EventQueue::default(),
            now: 0.0,
            trace: Vec::new(),
            report: ReportBuilder::default(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            processed: 0,
            finished: false,
        };
        engine.start();
        Ok(engine)
    }

    fn start(&mut self) {
        for i in 0..self.phys.len() {
            let n = &self.phys[i];
            let detail = Detail::new()
                .with("x", n.kin.x)
                .with("y", n.kin.y)
                .with("speed", n.kin.speed)
                .with("heading", n.kin.heading)
                .with("energy", n.energy.residual);
            self.emit(Some(n.id), "NODE_INIT", detail);
        }
        if self.tick_time(1) < self.duration {
            self.queue.push(self.tick_time(1), EventKind::SampleTick, Payload::Tick(1));
            self.queue.push(self.tick_time(1), EventKind::MotionTick, Payload::Tick(1));
        }
        for (flow, f) in self.workload.iter().enumerate() {
            if f.time <= self.duration {
                self.queue
                    .push(f.time, EventKind::DataEmit, Payload::Data { flow });
            }
        }
    }

    fn tick_time(&self, k: u64) -> f64 {
        k as f64 * self.energy_cfg.sample_period
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn energy(&self, id: NodeId) -> Option<EnergyState> {
        self.index.get(&id).map(|&i| self.phys[i].energy)
    }

    pub fn kinematics(&self, id: NodeId) -> Option<NodeKinematics> {
        self.index.get(&id).map(|&i| self.phys[i].kin)
    }

    pub fn protocol(&self, id: NodeId) -> Option<&ProtocolNode> {
        self.index.get(&id).map(|&i| &self.protos[i])
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    fn emit(&mut self, node: Option<NodeId>, event: &str, detail: Detail) {
        let record = TraceRecord::new(self.now, node, event, detail);
        self.report.observe(&record);
        self.trace.push(record);
    }

    fn alive(&self, id: NodeId) -> bool {
        self.phys[self.index[&id]].energy.alive
    }

    fn charge(&mut self, id: NodeId, amount: f64) {
        let i = self.index[&id];
        let before = self.phys[i].energy;
        if !before.alive {
            return;
        }
        let after = before.charge(amount);
        self.phys[i].energy = after;
        if !after.alive {
            self.emit(Some(id), "NODE_DEAD", Detail::new());
        }
    }

    /// Alive nodes within range of `sender`, ascending by id.
    fn hearers(&self, sender: NodeId) -> Vec<NodeId> {
        let me = self.phys[self.index[&sender]].kin;
        self.phys
            .iter()
            .filter(|n| n.id != sender && n.energy.alive)
            .filter(|n| in_range(&me, &n.kin, &self.metrics.radio))
            .map(|n| n.id)
            .collect()
    }

    fn transmit(&mut self, sender: NodeId, packet: Packet, addressees: &[NodeId]) {
        let hearers = self.hearers(sender);
        self.charge(sender, self.energy_cfg.tx_cost);
        let at = self.now + self.metrics.radio.hop_delay;
        let packet = Arc::new(packet);
        for to in hearers {
            self.queue.push(
                at,
                EventKind::Delivery,
                Payload::Delivery {
                    from: sender,
                    to,
                    packet: Arc::clone(&packet),
                    addressed: addressees.contains(&to),
                },
            );
        }
    }

    /// Sends `packet` to every node in range; `addressees` process it, the
    /// rest only pay the overhearing cost.
    pub fn broadcast(&mut self, sender: NodeId, packet: Packet, addressees: &[NodeId]) {
        if !self.alive(sender) {
            self.emit(Some(sender), "TX_SUPPRESSED", Detail::new().with("kind", packet.kind()));
            return;
        }
        let to = addressees
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let event = format!("{}_SEND", packet.kind());
        self.emit(Some(sender), &event, packet.detail().with("to", to));
        self.transmit(sender, packet, addressees);
    }

    pub fn unicast(&mut self, sender: NodeId, to: NodeId, packet: Packet) {
        if !self.alive(sender) {
            self.emit(Some(sender), "TX_SUPPRESSED", Detail::new().with("kind", packet.kind()));
            return;
        }
        let reachable = self.index.contains_key(&to) && self.alive(to) && {
            let a = self.phys[self.index[&sender]].kin;
            let b = self.phys[self.index[&to]].kin;
            in_range(&a, &b, &self.metrics.radio)
        };
        if !reachable {
            let event = format!("{}_DROP", packet.kind());
            self.emit(
                Some(sender),
                &event,
                packet.detail().with("to", to).with("reason", "next_hop_unreachable"),
            );
            return;
        }
        let event = format!("{}_SEND", packet.kind());
        self.emit(Some(sender), &event, packet.detail().with("to", to));
        self.transmit(sender, packet, &[to]);
    }

    fn apply(&mut self, node: NodeId, outputs: Vec<Output>) {
        for out in outputs {
            match out {
                Output::Trace { event, detail } => self.emit(Some(node), event, detail),
                Output::StartTimer { delay, timer } => {
                    let kind = match timer {
                        Timer::Wait(_) => EventKind::WaitTimer,
                        Timer::Window(_) => EventKind::WindowClose,
                    };
                    self.queue
                        .push(self.now + delay, kind, Payload::Timer { node, timer });
                }
                Output::Broadcast { packet, addressees } => {
                    self.broadcast(node, packet, &addressees)
                }
                Output::Unicast { to, packet } => self.unicast(node, to, packet),
            }
        }
    }

    /// Runs `f` against one node's protocol state with a read-only view of
    /// the network, then applies what it produced.
    fn with_protocol<F>(&mut self, node: NodeId, f: F)
    where
        F: FnOnce(&mut ProtocolNode, &dyn NetworkView) -> Vec<Output>,
    {
        let i = self.index[&node];
        let view = View {
            phys: &self.phys,
            index: &self.index,
            metrics: &self.metrics,
        };
        let outputs = f(&mut self.protos[i], &view);
        self.apply(node, outputs);
    }

    /// Processes the next event. Returns false once the run is over.
    pub fn step(&mut self) -> bool {
        if self.finished {
            return false;
        }
        let Some(event) = self.queue.pop() else {
            self.finish();
            return false;
        };
        if event.time > self.duration {
            self.finish();
            return false;
        }
        debug_assert!(event.time >= self.now, "event time went backwards");
        self.now = event.time;
        self.processed += 1;
        match event.payload {
            Payload::Delivery {
                from,
                to,
                packet,
                addressed,
            } => self.deliver(from, to, &packet, addressed),
            Payload::Timer { node, timer } => {
                if self.alive(node) {
                    self.with_protocol(node, |p, v| p.on_timer(timer, v));
                }
            }
            Payload::Tick(k) => match event.kind {
                EventKind::SampleTick => self.sample_tick(k),
                _ => self.motion_tick(k),
            },
            Payload::Data { flow } => self.data_emit(flow),
        }
        true
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    pub fn into_output(mut self) -> RunOutput {
        self.run_to_end();
        RunOutput {
            trace: self.trace,
            report: self.report.finish(),
        }
    }

    fn deliver(&mut self, from: NodeId, to: NodeId, packet: &Packet, addressed: bool) {
        if !self.alive(to) {
            return;
        }
        let cost = if addressed {
            self.energy_cfg.rx_cost
        } else {
            self.energy_cfg.overhear_cost
        };
        self.charge(to, cost);
        if !self.alive(to) {
            return;
        }
        if !addressed {
            self.emit(
                Some(to),
                "OVERHEAR",
                Detail::new().with("from", from).with("kind", packet.kind()),
            );
            return;
        }
        match packet {
            Packet::Rreq(rreq) => self.with_protocol(to, |p, v| p.handle_rreq(rreq, v)),
            Packet::Control(msg) => {
                let event = format!("{}_RECV", packet.kind());
                self.emit(Some(to), &event, packet.detail().with("from", from));
                self.with_protocol(to, |p, v| p.handle_control(msg, v));
            }
            Packet::Data(data) => {
                self.emit(Some(to), "DATA_RECV", packet.detail().with("from", from));
                self.with_protocol(to, |p, _| p.handle_data(data));
            }
        }
    }

    fn sample_tick(&mut self, k: u64) {
        let period = self.energy_cfg.sample_period;
        let window_end = self.tick_time(k);
        let window_start = self.tick_time(k - 1);
        for i in 0..self.phys.len() {
            let id = self.phys[i].id;
            if !self.phys[i].energy.alive {
                continue;
            }
            let extra: f64 = self.phys[i]
                .extra_drain
                .iter()
                .map(|d| {
                    let overlap = d.end.min(window_end) - d.start.max(window_start);
                    overlap.max(0.0) * d.rate
                })
                .sum();
            self.charge(id, self.energy_cfg.idle_rate * period + extra);
            let n = &mut self.phys[i];
            if !n.energy.alive {
                continue;
            }
            let consumed = n.energy.window_consumed;
            n.energy = n.energy.sample_drain_rate(&self.energy_cfg);
            let detail = Detail::new()
                .with("residual", n.energy.residual)
                .with("consumed", consumed)
                .with("dr", n.energy.drain_rate);
            self.emit(Some(id), "ENERGY_SAMPLE", detail);
        }
        for i in 0..self.phys.len() {
            let id = self.phys[i].id;
            if self.phys[i].energy.alive && self.protos[i].active_memberships() > 0 {
                self.with_protocol(id, |p, v| p.monitor_node_stability(v));
            }
        }
        if self.tick_time(k + 1) < self.duration {
            self.queue
                .push(self.tick_time(k + 1), EventKind::SampleTick, Payload::Tick(k + 1));
        }
    }

    fn motion_tick(&mut self, k: u64) {
        let period = self.energy_cfg.sample_period;
        let now = self.tick_time(k);
        for i in 0..self.phys.len() {
            if !self.phys[i].energy.alive {
                continue;
            }
            let id = self.phys[i].id;
            let kin = self.phys[i].kin;
            if kin.speed > 0.0 {
                let moved = advance(&kin, period).expect("sample period is positive");
                self.phys[i].kin = moved;
                self.emit(Some(id), "MOTION", Detail::new().with("x", moved.x).with("y", moved.y));
            }
            let n = &mut self.phys[i];
            let mut changed = false;
            while n.next_waypoint < n.waypoints.len() && n.waypoints[n.next_waypoint].time <= now {
                let w = n.waypoints[n.next_waypoint];
                n.kin = n.kin.with_velocity(w.speed, w.heading);
                n.next_waypoint += 1;
                changed = true;
            }
            if changed {
                let detail = Detail::new()
                    .with("speed", n.kin.speed)
                    .with("heading", n.kin.heading);
                self.emit(Some(id), "VELOCITY", detail);
            }
        }
        if self.tick_time(k + 1) < self.duration {
            self.queue
                .push(self.tick_time(k + 1), EventKind::MotionTick, Payload::Tick(k + 1));
        }
    }

    fn data_emit(&mut self, flow: usize) {
        let f = self.workload[flow];
        if !self.alive(f.source) {
            return;
        }
        let send = f.rate > 0.0;
        self.with_protocol(f.source, |p, v| {
            p.on_data_emit(f.destination, send, v)
                .expect("validated flows never target their own source")
        });
        if send {
            let jitter = if f.jitter > 0.0 {
                self.rng.gen::<f64>() * f.jitter
            } else {
                0.0
            };
            let next = self.now + 1.0 / f.rate + jitter;
            if next <= self.duration {
                self.queue.push(next, EventKind::DataEmit, Payload::Data { flow });
            }
        }
    }

    fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        self.now = self.duration;
        for i in 0..self.phys.len() {
            let n = &self.phys[i];
            let detail = Detail::new()
                .with("node", n.id)
                .with("initial", n.initial)
                .with("residual", n.energy.residual)
                .with("pending", n.energy.window_consumed);
            self.emit(None, "ENERGY_FINAL", detail);
        }
        self.emit(None, "RUN_END", Detail::new().with("events", self.processed));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ControlKind, ControlMessage, RoundKey, Route, RouteStatus};

    fn ev(time: f64, kind: EventKind) -> (f64, EventKind) {
        (time, kind)
    }

    #[test]
    fn queue_orders_by_time_kind_seq() {
        let mut q = EventQueue::default();
        q.push(5.0, EventKind::WaitTimer, Payload::Tick(0));
        q.push(5.0, EventKind::DataEmit, Payload::Tick(1));
        q.push(5.0, EventKind::Delivery, Payload::Tick(2));
        q.push(1.0, EventKind::MotionTick, Payload::Tick(3));
        q.push(5.0, EventKind::Delivery, Payload::Tick(4));
        q.push(5.0, EventKind::WindowClose, Payload::Tick(5));
        q.push(5.0, EventKind::SampleTick, Payload::Tick(6));
        let mut got = Vec::new();
        while let Some(e) = q.pop() {
            let Payload::Tick(tag) = e.payload else { unreachable!() };
            got.push((ev(e.time, e.kind), tag));
        }
        let tags: Vec<u64> = got.iter().map(|g| g.1).collect();
        assert_eq!(tags, vec![3, 2, 4, 0, 5, 6, 1]);
    }

    fn rrep_for(path: &[NodeId]) -> Packet {
        Packet::Control(ControlMessage {
            kind: ControlKind::Rrep,
            route: Route {
                key: RoundKey {
                    source: path[0],
                    destination: *path.last().unwrap(),
                    request_id: 1,
                },
                path: path.to_vec(),
                bandwidth: 1.0,
                status: RouteStatus::Primary,
            },
            reporter: *path.last().unwrap(),
        })
    }

    #[test]
    fn figure4_broadcast_reaches_all_neighbors() {
        let s = Scenario::figure4();
        let mut e = Engine::new(&s).unwrap();
        let before = e.pending_events();
        e.broadcast(1, rrep_for(&[1, 2]), &[2, 4]);
        assert_eq!(e.pending_events() - before, 3);
        let mut receivers = Vec::new();
        while let Some(ev) = e.queue.pop() {
            if let Payload::Delivery { to, addressed, .. } = ev.payload {
                receivers.push((to, addressed));
            }
        }
        assert_eq!(receivers, vec![(2, true), (4, true), (7, false)]);
    }

    #[test]
    fn isolated_sender_pays_only_tx() {
        let mut s = Scenario::figure4();
        s.nodes.push(crate::scenario::NodeSpec::new(50, 5000.0, 5000.0, 10.0));
        let mut e = Engine::new(&s).unwrap();
        let before = e.pending_events();
        e.broadcast(50, rrep_for(&[50, 1]), &[]);
        assert_eq!(e.pending_events(), before);
        assert!((e.energy(50).unwrap().residual - (10.0 - s.energy.tx_cost)).abs() < 1e-12);
    }

    #[test]
    fn unicast_cost_partition() {
        let s = Scenario::figure4();
        let mut e = Engine::new(&s).unwrap();
        // 4 sends to 1; 2, 5 and 8 are also in range of 4
        e.unicast(4, 1, rrep_for(&[1, 4]));
        let mut addressed = Vec::new();
        while e.queue.peek_time() == Some(0.0) {
            let ev = e.queue.pop().unwrap();
            if let Payload::Delivery { from, to, packet, addressed: a } = ev.payload {
                e.now = ev.time;
                e.deliver(from, to, &packet, a);
                addressed.push((to, a));
            } else {
                break;
            }
        }
        assert_eq!(addressed, vec![(1, true), (2, false), (5, false), (8, false)]);
        let cfg = s.energy;
        let spent = |id| 100.0 - e.energy(id).unwrap().residual;
        assert!((spent(4) - cfg.tx_cost).abs() < 1e-12);
        assert!((spent(1) - cfg.rx_cost).abs() < 1e-12);
        for id in [2, 5, 8] {
            assert!((spent(id) - cfg.overhear_cost).abs() < 1e-12);
        }
        assert_eq!(spent(3), 0.0);
    }

    #[test]
    fn dead_sender_is_suppressed() {
        let mut s = Scenario::figure4();
        s.nodes.iter_mut().find(|n| n.id == 2).unwrap().energy = 0.0;
        let mut e = Engine::new(&s).unwrap();
        let before = e.pending_events();
        e.broadcast(2, rrep_for(&[1, 2]), &[1]);
        assert_eq!(e.pending_events(), before);
        assert_eq!(e.trace().last().unwrap().event, "TX_SUPPRESSED");
    }

    #[test]
    fn empty_workload_only_ticks() {
        let mut s = Scenario::figure4();
        s.workload.clear();
        let out = run(&s).unwrap();
        let c = &out.report.counts;
        assert_eq!((c.rreq, c.rrep, c.nodeoff, c.routedisable), (0, 0, 0, 0));
        assert!(out.trace.iter().all(|r| matches!(
            r.event.as_str(),
            "NODE_INIT" | "ENERGY_SAMPLE" | "ENERGY_FINAL" | "RUN_END"
        )));
    }

    #[test]
    fn invalid_scenario_never_runs() {
        let mut s = Scenario::figure4();
        s.protocol.wait_period = -1.0;
        assert!(run(&s).is_err());
    }
}
