//! The simulated network: hosts, switches, flows, Scout channels and the
//! event loop that drives them.

use crate::config::{CdfSource, ExperimentConfig, WorkloadSpec};
use crate::engine::Scheduler;
use crate::error::RunError;
use crate::metrics::{self, GoodputCounter};
use crate::packet::{FlowId, Packet, PacketKind, Priority, RouteId};
use crate::port::{EnqueueOutcome, PortStats};
use crate::scout::{self, ChannelId, ScoutChannel, ScoutScope, ScoutScopeKind, ScoutSignal};
use crate::time::SimTime;
use crate::topology::{LinkId, NodeId, NodeKind, PathInfo, Topology, TopologySpec};
use crate::transport::dwtcp::{compute_d_t, IpgOutcome};
use crate::transport::sender::AckOutcome;
use crate::transport::{
    CongestionControl, DctcpFlowState, DwtcpFlowState, FlowEvent, FlowEventKind, Protocol, RenoFlowState, ScoutCoefficient,
    TcpReceiver, TcpSender,
};
use crate::workload::{self, FlowSizeCdf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
enum Event {
    TxDone(LinkId),
    Arrive { link: LinkId, pkt: Packet },
    FlowStart(usize),
    FlowStop(usize),
    Rto { flow: usize, at: SimTime },
    ScoutTick(usize),
    ScoutDelayCheck { chan: usize, seq: u64 },
    ScoutLossCheck { chan: usize, seq: u64 },
    UdpEmit(usize),
    Sample,
    SetLinkRate { link: LinkId, bps: u64 },
}

/// A TCP flow as planned before the run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TcpFlowPlan {
    pub src: NodeId,
    pub dst: NodeId,
    pub start: SimTime,
    pub stop: Option<SimTime>,
    pub size: Option<u64>,
    /// Keep a goodput series for this flow.
    pub monitored: bool,
}

#[derive(Debug)]
struct TcpFlow {
    plan: TcpFlowPlan,
    fwd: RouteId,
    rev: RouteId,
    path: PathInfo,
    sender: Option<TcpSender>,
    receiver: TcpReceiver,
    channel: Option<usize>,
    rto_event_at: Option<SimTime>,
    goodput: Option<GoodputCounter>,
}

#[derive(Debug)]
struct UdpSource {
    route: RouteId,
    start: SimTime,
    stop: Option<SimTime>,
    start_bps: f64,
    slope: f64,
    max_bps: Option<f64>,
    pkt_bytes: u32,
    poisson: bool,
    rng: ChaCha8Rng,
    sent_pkts: u64,
    received_bytes: u64,
}

impl UdpSource {
    fn rate_at(&self, now: SimTime) -> f64 {
        let dt = now.saturating_sub(self.start).as_secs_f64();
        let r = self.start_bps + self.slope * dt;
        match self.max_bps {
            Some(m) => r.min(m),
            None => r,
        }
    }
}

#[derive(Debug)]
enum FlowSlot {
    Tcp(Box<TcpFlow>),
    Udp(Box<UdpSource>),
}

#[derive(Debug)]
struct ChannelSlot {
    chan: ScoutChannel,
    rev: RouteId,
    d_t: SimTime,
    loss_horizon: SimTime,
    /// Grant coefficient for per-datapath channels.
    alpha: ScoutCoefficient,
    ipg_t: SimTime,
    ticking: bool,
    stop: Option<SimTime>,
    rtt_sum_ns: u128,
    rtt_max: SimTime,
    /// `d_s` sampled at every send opportunity once a first ACK exists.
    ds_sum_ns: u128,
    ds_samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QueueSample {
    pub t_ns: u64,
    pub port: u32,
    pub qlen_pkts: usize,
    pub qlen_lpq_bytes: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DropRecord {
    pub t_ns: u64,
    pub port: u32,
    pub priority: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoutTraceEvent {
    Sent,
    Acked,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScoutTraceRow {
    pub t_ns: u64,
    pub channel_id: u32,
    pub event: ScoutTraceEvent,
    pub rtt_ns: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSummary {
    pub flow_id: u32,
    pub src: u32,
    pub dst: u32,
    pub size: Option<u64>,
    pub start: SimTime,
    /// Scheduled stop of a long-lived flow.
    pub stop: Option<SimTime>,
    pub finish: Option<SimTime>,
    pub timeouts: u64,
    pub retransmits: u64,
    pub acked_bytes: u64,
    pub base_rtt: SimTime,
    pub bottleneck_bps: u64,
    pub slowdown: Option<f64>,
    #[serde(skip)]
    pub goodput: Option<GoodputCounter>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UdpSummary {
    pub flow_id: u32,
    pub sent_pkts: u64,
    pub received_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub channel_id: u32,
    pub probe: bool,
    pub sent: u64,
    pub acked: u64,
    pub lost: u64,
    pub mean_rtt_ns: Option<f64>,
    pub max_rtt_ns: u64,
    /// Mean Scout delay seen at the channel's send opportunities.
    pub mean_d_s_ns: Option<f64>,
    pub d_t_ns: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortReport {
    pub link: u32,
    pub line_rate_bps: u64,
    pub mean_hpq_pkts: f64,
    pub stats: PortStats,
    /// Packets still queued at the end, per priority (high, low).
    pub resident: [u64; 2],
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub end: SimTime,
    pub events: u64,
    pub flows: Vec<FlowSummary>,
    pub udp: Vec<UdpSummary>,
    pub channels: Vec<ChannelSummary>,
    pub queue_trace: Vec<QueueSample>,
    pub drops: Vec<DropRecord>,
    pub flow_events: Vec<FlowEvent>,
    pub scout_trace: Vec<ScoutTraceRow>,
    pub bottleneck: Option<PortReport>,
    pub monitored: Vec<PortReport>,
    /// Every port in the topology, indexed by link id.
    pub ports: Vec<PortReport>,
    /// Total switch-port drops per priority (high, low).
    pub switch_drops: [u64; 2],
    /// Set when the event budget ran out before the configured end.
    pub aborted_at: Option<SimTime>,
}

impl RunOutput {
    pub fn first_drop(&self, port: u32, priority: Priority) -> Option<SimTime> {
        let tag = priority_tag(priority);
        self.drops
            .iter()
            .find(|d| d.port == port && d.priority == tag)
            .map(|d| SimTime::from_nanos(d.t_ns))
    }

    /// Mean sampled HPQ length of `port` over `[from, to)`.
    pub fn mean_queue(&self, port: u32, from: SimTime, to: SimTime) -> Option<f64> {
        let v: Vec<f64> = self
            .queue_trace
            .iter()
            .filter(|s| s.port == port && s.t_ns >= from.as_nanos() && s.t_ns < to.as_nanos())
            .map(|s| s.qlen_pkts as f64)
            .collect();
        metrics::mean(&v)
    }

    /// Per-flow goodput (bits/s) over `[from, to)` for monitored flows.
    pub fn flow_rates(&self, from: SimTime, to: SimTime) -> Vec<f64> {
        self.flows
            .iter()
            .filter_map(|f| f.goodput.as_ref())
            .map(|g| g.rate_between(from, to))
            .collect()
    }

    /// Rates of monitored flows active for the whole of `[from, to)`.
    pub fn active_flow_rates(&self, from: SimTime, to: SimTime) -> Vec<f64> {
        self.flows
            .iter()
            .filter(|f| f.start <= from && f.stop.is_none_or(|s| s >= to) && f.finish.is_none_or(|t| t >= to))
            .filter_map(|f| f.goodput.as_ref())
            .map(|g| g.rate_between(from, to))
            .collect()
    }
}

fn priority_tag(p: Priority) -> &'static str {
    match p {
        Priority::High => "high",
        Priority::Low => "low",
    }
}

pub struct World {
    cfg: ExperimentConfig,
    sched: Scheduler<Event>,
    topo: Topology,
    flows: Vec<FlowSlot>,
    channels: Vec<ChannelSlot>,
    datapath: BTreeMap<(NodeId, NodeId), usize>,
    next_pkt_id: u64,
    queue_trace: Vec<QueueSample>,
    drops: Vec<DropRecord>,
    flow_events: Vec<FlowEvent>,
    scout_trace: Vec<ScoutTraceRow>,
    sample_interval: Option<SimTime>,
    end: SimTime,
}

impl World {
    /// Builds the network and schedules the configured workload.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<World, RunError> {
        cfg.validate()?;
        if cfg.scout.ipg_variant && cfg.scout.scope == ScoutScopeKind::PerDatapath {
            return Err(crate::error::ConfigError::Invalid {
                field: "scout.ipg_variant".into(),
                reason: "only supported with per-flow Scouts".into(),
            }
            .into());
        }
        let topo = Topology::build(&cfg.topology, &cfg.buffers);
        let mut w = World {
            cfg: cfg.clone(),
            sched: Scheduler::new(),
            topo,
            flows: Vec::new(),
            channels: Vec::new(),
            datapath: BTreeMap::new(),
            next_pkt_id: 0,
            queue_trace: Vec::new(),
            drops: Vec::new(),
            flow_events: Vec::new(),
            scout_trace: Vec::new(),
            sample_interval: None,
            end: cfg.duration(),
        };
        for plan in plan_tcp_flows(cfg, &w.topo)? {
            w.add_tcp_flow(plan);
        }
        if let WorkloadSpec::Udp { sources } = &cfg.workload {
            for (i, s) in sources.iter().enumerate() {
                let (src, dst) = w.endpoints(s.src, s.dst);
                let route = w.topo.route(src, dst).expect("hosts are connected");
                let idx = w.flows.len();
                w.flows.push(FlowSlot::Udp(Box::new(UdpSource {
                    route,
                    start: SimTime::from_nanos(s.start_ns),
                    stop: s.stop_ns.map(SimTime::from_nanos),
                    start_bps: s.start_bps,
                    slope: s.slope_bps_per_s,
                    max_bps: s.max_bps,
                    pkt_bytes: s.pkt_bytes,
                    poisson: s.poisson,
                    rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64)),
                    sent_pkts: 0,
                    received_bytes: 0,
                })));
                w.sched.schedule(SimTime::from_nanos(s.start_ns), Event::UdpEmit(idx));
            }
        }
        for p in &cfg.probes {
            let (src, dst) = w.endpoints(p.src, p.dst);
            let interval = (p.interval_ns > 0).then(|| SimTime::from_nanos(p.interval_ns));
            let c = w.open_channel(ScoutScope::Probe { src, dst }, src, dst, interval);
            w.channels[c].stop = p.stop_ns.map(SimTime::from_nanos);
            w.channels[c].ticking = true;
            w.sched.schedule(SimTime::from_nanos(p.start_ns), Event::ScoutTick(c));
        }
        if let (Some(b), false) = (w.topo.bottleneck(), cfg.rate_schedule.is_empty()) {
            for step in &cfg.rate_schedule {
                w.sched.schedule(SimTime::from_nanos(step.at_ns), Event::SetLinkRate { link: b, bps: step.bps });
            }
        }
        if cfg.recording.queue_sample_ns > 0 {
            w.sample_interval = Some(SimTime::from_nanos(cfg.recording.queue_sample_ns));
            w.sched.schedule(SimTime::ZERO, Event::Sample);
        }
        Ok(w)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    fn endpoints(&self, src: usize, dst: usize) -> (NodeId, NodeId) {
        (self.topo.senders()[src], self.topo.receivers()[dst])
    }

    fn add_tcp_flow(&mut self, plan: TcpFlowPlan) {
        let fwd = self.topo.route(plan.src, plan.dst).expect("hosts are connected");
        let rev = self.topo.route(plan.dst, plan.src).expect("hosts are connected");
        let path = self.topo.path_info(plan.src, plan.dst).expect("hosts are connected");
        let idx = self.flows.len();
        let goodput = plan
            .monitored
            .then(|| GoodputCounter::new(SimTime::from_nanos(self.cfg.recording.goodput_bucket_ns)));
        self.sched.schedule(plan.start, Event::FlowStart(idx));
        if let Some(stop) = plan.stop {
            self.sched.schedule(stop, Event::FlowStop(idx));
        }
        self.flows.push(FlowSlot::Tcp(Box::new(TcpFlow {
            plan,
            fwd,
            rev,
            path,
            sender: None,
            receiver: TcpReceiver::new(),
            channel: None,
            rto_event_at: None,
            goodput,
        })));
    }

    fn open_channel(&mut self, scope: ScoutScope, src: NodeId, dst: NodeId, interval: Option<SimTime>) -> usize {
        let fwd = self.topo.route(src, dst).expect("hosts are connected");
        let rev = self.topo.route(dst, src).expect("hosts are connected");
        let path = self.topo.path_info(src, dst).expect("hosts are connected");
        let d = &self.cfg.dwtcp;
        let d_t = compute_d_t(path.base_rtt, d.k, self.cfg.transport.pkt_bytes, path.bottleneck_bps);
        let interval = interval.unwrap_or(path.base_rtt);
        let id = self.channels.len();
        let ipg_t = SimTime::from_nanos(
            (d_t.as_nanos() as u128 * interval.as_nanos() as u128 / path.base_rtt.as_nanos().max(1) as u128) as u64,
        );
        self.channels.push(ChannelSlot {
            chan: ScoutChannel::new(ChannelId(id as u32), scope, src, dst, fwd, interval, d.scout_bytes),
            rev,
            d_t,
            loss_horizon: d_t.mul_f64(self.cfg.scout.loss_horizon_factor),
            alpha: ScoutCoefficient::new(d.alpha_init, d.alpha_max),
            ipg_t,
            ticking: false,
            stop: None,
            rtt_sum_ns: 0,
            rtt_max: SimTime::ZERO,
            ds_sum_ns: 0,
            ds_samples: 0,
        });
        id
    }

    fn pkt_id(&mut self) -> u64 {
        self.next_pkt_id += 1;
        self.next_pkt_id
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Runs to the configured duration; exhausting the event budget is an
    /// error.
    pub fn run(self) -> Result<RunOutput, RunError> {
        let budget = self.cfg.max_events;
        let out = self.run_partial();
        match out.aborted_at {
            Some(at) => Err(RunError::EventBudget {
                budget,
                at_ns: at.as_nanos(),
            }),
            None => Ok(out),
        }
    }

    /// Runs to the configured duration or until the event budget is spent,
    /// returning whatever was recorded.
    pub fn run_partial(mut self) -> RunOutput {
        let budget = self.cfg.max_events;
        let end = self.end;
        let mut aborted_at = None;
        while let Some((_, ev)) = self.sched.pop_until(end) {
            if self.sched.fired() > budget {
                aborted_at = Some(self.now());
                break;
            }
            self.handle(ev);
        }
        self.finish(aborted_at)
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::TxDone(link) => {
                self.topo.link_mut(link).port.finish();
                self.try_start(link);
            }
            Event::Arrive { link, pkt } => self.arrive(link, pkt),
            Event::FlowStart(i) => self.start_flow(i),
            Event::FlowStop(i) => self.stop_flow(i),
            Event::Rto { flow, at } => self.on_rto(flow, at),
            Event::ScoutTick(c) => self.scout_tick(c),
            Event::ScoutDelayCheck { chan, seq } => self.scout_delay_check(chan, seq),
            Event::ScoutLossCheck { chan, seq } => self.scout_loss_check(chan, seq),
            Event::UdpEmit(i) => self.udp_emit(i),
            Event::Sample => self.sample(),
            Event::SetLinkRate { link, bps } => self.topo.link_mut(link).port.set_line_rate(bps),
        }
    }

    fn try_start(&mut self, link: LinkId) {
        let now = self.now();
        let l = self.topo.link_mut(link);
        if let Some((pkt, done)) = l.port.try_start(now) {
            let prop = l.propagation_delay;
            self.sched.schedule(done, Event::TxDone(link));
            self.sched.schedule(done + prop, Event::Arrive { link, pkt });
        }
    }

    fn send_on(&mut self, link: LinkId, pkt: Packet) {
        let now = self.now();
        let prio = pkt.priority;
        match self.topo.link_mut(link).port.enqueue(pkt, now) {
            EnqueueOutcome::Accepted => self.try_start(link),
            EnqueueOutcome::Dropped => self.drops.push(DropRecord {
                t_ns: now.as_nanos(),
                port: link.0,
                priority: priority_tag(prio),
            }),
        }
    }

    /// Injects a packet at its source host.
    fn inject(&mut self, pkt: Packet) {
        let first = self.topo.route_links(pkt.route)[0];
        self.send_on(first, pkt);
    }

    fn arrive(&mut self, link: LinkId, mut pkt: Packet) {
        let node = self.topo.link(link).dst;
        pkt.hop += 1;
        match self.topo.node_kind(node) {
            NodeKind::Switch => {
                let next = self.topo.route_links(pkt.route)[pkt.hop as usize];
                debug_assert_eq!(self.topo.link(next).src, node);
                self.send_on(next, pkt);
            }
            NodeKind::Host => self.deliver(pkt),
        }
    }

    fn deliver(&mut self, pkt: Packet) {
        match pkt.kind {
            PacketKind::Data => self.on_data(pkt),
            PacketKind::DataAck => self.on_data_ack(pkt),
            PacketKind::Scout => {
                let c = pkt.flow_id.0 as usize;
                let rev = self.channels[c].rev;
                let id = self.pkt_id();
                let ack = scout::reflect(&pkt, id, rev).expect("Scout kind checked");
                self.inject(ack);
            }
            PacketKind::ScoutAck => self.on_scout_ack(pkt),
        }
    }

    fn on_data(&mut self, pkt: Packet) {
        let ack_bytes = self.cfg.transport.ack_bytes;
        let idx = pkt.flow_id.0 as usize;
        let ack = match &mut self.flows[idx] {
            FlowSlot::Udp(u) => {
                u.received_bytes += pkt.size as u64;
                return;
            }
            FlowSlot::Tcp(f) => {
                let cum = f.receiver.on_data(pkt.seq, pkt.payload);
                (cum, f.rev)
            }
        };
        let id = self.pkt_id();
        let a = Packet::data_ack(id, pkt.flow_id, ack.0, ack_bytes, pkt.send_ts, pkt.ecn_marked, ack.1);
        self.inject(a);
    }

    fn log(&mut self, flow: usize, event: FlowEventKind, d_s: Option<SimTime>) {
        if !self.cfg.recording.flow_events {
            return;
        }
        let now = self.now();
        if let FlowSlot::Tcp(f) = &self.flows[flow] {
            if let Some(s) = &f.sender {
                self.flow_events.push(FlowEvent {
                    time_ns: now.as_nanos(),
                    flow_id: flow as u32,
                    event,
                    w_bytes: s.cc.window(),
                    alpha: s.cc.alpha(),
                    d_s_ns: d_s.map(SimTime::as_nanos),
                });
            }
        }
    }

    fn tcp(&mut self, idx: usize) -> &mut TcpFlow {
        match &mut self.flows[idx] {
            FlowSlot::Tcp(f) => f,
            FlowSlot::Udp(_) => panic!("flow {idx} is not TCP"),
        }
    }

    fn start_flow(&mut self, idx: usize) {
        let now = self.now();
        let cfg = &self.cfg;
        let l = cfg.transport.pkt_bytes;
        let w_init = cfg.transport.w_init_bytes as f64;
        let seg = l as f64;
        let cc = {
            let FlowSlot::Tcp(f) = &self.flows[idx] else { unreachable!() };
            match cfg.protocol {
                Protocol::Newreno => CongestionControl::Newreno(RenoFlowState::new(w_init, seg)),
                Protocol::Dctcp => {
                    CongestionControl::Dctcp(DctcpFlowState::new(w_init, seg, cfg.dctcp.g, cfg.dctcp.initial_ewma))
                }
                Protocol::Dwtcp => CongestionControl::Dwtcp(DwtcpFlowState::new(
                    &cfg.dwtcp,
                    w_init,
                    l,
                    f.path.base_rtt,
                    f.path.bottleneck_bps,
                    now,
                )),
            }
        };
        let rto = cfg.transport.rto_policy();
        let scouts = cfg.protocol == Protocol::Dwtcp && cfg.scout.enabled;
        let scope = cfg.scout.scope;
        let interval = (cfg.scout.interval_ns > 0).then(|| SimTime::from_nanos(cfg.scout.interval_ns));
        let w_init_bytes = cfg.transport.w_init_bytes;
        let f = self.tcp(idx);
        f.sender = Some(TcpSender::new(FlowId(idx as u32), cc, l, f.plan.size, rto));
        let eligible = f.plan.size.is_none_or(|s| scout::is_scout_eligible(s, w_init_bytes));
        let (src, dst) = (f.plan.src, f.plan.dst);
        if scouts && eligible {
            let c = match scope {
                ScoutScopeKind::PerFlow => self.open_channel(ScoutScope::PerFlow(FlowId(idx as u32)), src, dst, interval),
                ScoutScopeKind::PerDatapath => match self.datapath.get(&(src, dst)) {
                    Some(&c) => c,
                    None => {
                        let c = self.open_channel(ScoutScope::PerDatapath { src, dst }, src, dst, interval);
                        self.datapath.insert((src, dst), c);
                        c
                    }
                },
            };
            self.channels[c].chan.add_flow(FlowId(idx as u32));
            self.tcp(idx).channel = Some(c);
            if !self.channels[c].ticking {
                self.channels[c].ticking = true;
                self.sched.schedule(now, Event::ScoutTick(c));
            }
        }
        self.pump(idx);
    }

    fn stop_flow(&mut self, idx: usize) {
        let now = self.now();
        let f = self.tcp(idx);
        if let Some(s) = &mut f.sender {
            s.stop(now);
            if s.is_complete() {
                self.complete(idx);
            }
        }
    }

    fn complete(&mut self, idx: usize) {
        let f = self.tcp(idx);
        f.rto_event_at = None;
        if let Some(c) = f.channel.take() {
            self.channels[c].chan.remove_flow(FlowId(idx as u32));
        }
    }

    /// Sends whatever the window allows and keeps the retransmission timer armed.
    fn pump(&mut self, idx: usize) {
        let now = self.now();
        let mut out = Vec::new();
        let f = self.tcp(idx);
        let fwd = f.fwd;
        let Some(s) = f.sender.as_mut() else { return };
        while let Some(seg) = s.next_segment(now) {
            out.push((seg, s.wire_size(seg.payload)));
        }
        for (seg, size) in out {
            let id = self.pkt_id();
            self.inject(Packet::data(id, FlowId(idx as u32), seg.seq, seg.payload, size, now, fwd));
        }
        self.arm_rto(idx);
    }

    fn arm_rto(&mut self, idx: usize) {
        let f = self.tcp(idx);
        let Some(deadline) = f.sender.as_ref().and_then(|s| s.rto_deadline()) else {
            return;
        };
        if f.rto_event_at.is_none_or(|at| at > deadline) {
            f.rto_event_at = Some(deadline);
            self.sched.schedule(deadline, Event::Rto { flow: idx, at: deadline });
        }
    }

    fn on_rto(&mut self, idx: usize, at: SimTime) {
        let now = self.now();
        let f = self.tcp(idx);
        if f.rto_event_at != Some(at) {
            return;
        }
        f.rto_event_at = None;
        let Some(s) = f.sender.as_mut() else { return };
        if s.on_timeout(now) {
            self.log(idx, FlowEventKind::Timeout, None);
            self.pump(idx);
        } else {
            self.arm_rto(idx);
        }
    }

    fn on_data_ack(&mut self, pkt: Packet) {
        let now = self.now();
        let idx = pkt.flow_id.0 as usize;
        let f = self.tcp(idx);
        let Some(s) = f.sender.as_mut() else { return };
        let out = s.on_ack(pkt.seq, pkt.send_ts, pkt.ecn_echo, now);
        match out {
            AckOutcome::Advanced {
                acked_bytes,
                window_cut,
                completed,
            } => {
                if let Some(g) = &mut f.goodput {
                    g.record(now, acked_bytes);
                }
                self.log(idx, if window_cut { FlowEventKind::Decrease } else { FlowEventKind::Ack }, None);
                if completed {
                    self.complete(idx);
                } else {
                    self.pump(idx);
                }
            }
            AckOutcome::Duplicate { fast_retransmit } => {
                if fast_retransmit {
                    self.log(idx, FlowEventKind::Loss, None);
                    self.pump(idx);
                }
            }
            AckOutcome::Stale => {}
        }
    }

    fn scout_tick(&mut self, c: usize) {
        let now = self.now();
        let slot = &mut self.channels[c];
        let stopped = slot.stop.is_some_and(|s| now >= s);
        if stopped || !slot.chan.is_live() {
            slot.ticking = false;
            return;
        }
        if let Some(d_s) = slot.chan.d_s(now) {
            slot.ds_sum_ns += d_s.as_nanos() as u128;
            slot.ds_samples += 1;
        }
        self.next_pkt_id += 1;
        let id = self.next_pkt_id;
        let slot = &mut self.channels[c];
        if let Some(pkt) = slot.chan.maybe_emit_scout(now, id) {
            let seq = pkt.seq;
            let (d_t, horizon) = (slot.d_t, slot.loss_horizon);
            if self.cfg.recording.scout_trace {
                self.scout_trace.push(ScoutTraceRow {
                    t_ns: now.as_nanos(),
                    channel_id: c as u32,
                    event: ScoutTraceEvent::Sent,
                    rtt_ns: None,
                });
            }
            self.inject(pkt);
            self.sched
                .schedule(now + d_t + SimTime::from_nanos(1), Event::ScoutDelayCheck { chan: c, seq });
            self.sched.schedule(now + horizon, Event::ScoutLossCheck { chan: c, seq });
        }
        let next = self.channels[c].chan.next_send_ts();
        self.sched.schedule(next, Event::ScoutTick(c));
    }

    fn channel_flows(&self, c: usize) -> Vec<usize> {
        self.channels[c].chan.active_flows().iter().map(|f| f.0 as usize).collect()
    }

    fn scout_delay_check(&mut self, c: usize, seq: u64) {
        let now = self.now();
        let slot = &self.channels[c];
        if !slot.chan.is_outstanding(seq) {
            return;
        }
        let Some(d_s) = slot.chan.d_s(now) else { return };
        if d_s <= slot.d_t {
            return;
        }
        if self.cfg.scout.ipg_variant {
            let since = slot.chan.last_ack_at().unwrap_or(SimTime::ZERO);
            let ipg_s = now.saturating_sub(since);
            let ipg_t = slot.ipg_t;
            for f in self.channel_flows(c) {
                self.apply_ipg(f, d_s, ipg_s, ipg_t, None);
            }
            return;
        }
        for (f, sig) in scout::distribute_signal(self.channels[c].chan.active_flows(), ScoutSignal::Busy(d_s)) {
            self.deliver_signal(f.0 as usize, sig, None);
        }
    }

    fn scout_loss_check(&mut self, c: usize, seq: u64) {
        self.scout_lost(c, seq);
    }

    fn scout_lost(&mut self, c: usize, seq: u64) {
        let now = self.now();
        let slot = &mut self.channels[c];
        if !slot.chan.declare_lost(seq) {
            return;
        }
        slot.alpha.halve();
        if self.cfg.recording.scout_trace {
            self.scout_trace.push(ScoutTraceRow {
                t_ns: now.as_nanos(),
                channel_id: c as u32,
                event: ScoutTraceEvent::Lost,
                rtt_ns: None,
            });
        }
        for (f, sig) in scout::distribute_signal(self.channels[c].chan.active_flows(), ScoutSignal::Loss) {
            self.deliver_signal(f.0 as usize, sig, None);
        }
    }

    fn on_scout_ack(&mut self, pkt: Packet) {
        let now = self.now();
        let c = pkt.flow_id.0 as usize;
        if self.cfg.scout.order_loss_inference && self.channels[c].chan.is_outstanding(pkt.seq) {
            for older in self.channels[c].chan.overtaken_by(pkt.seq) {
                self.scout_lost(c, older);
            }
        }
        let slot = &mut self.channels[c];
        let prev_ack = slot.chan.last_ack_at();
        let Some(m) = slot.chan.on_ack(pkt.seq, now) else { return };
        slot.rtt_sum_ns += m.rtt.as_nanos() as u128;
        slot.rtt_max = slot.rtt_max.max(m.rtt);
        if self.cfg.recording.scout_trace {
            self.scout_trace.push(ScoutTraceRow {
                t_ns: now.as_nanos(),
                channel_id: c as u32,
                event: ScoutTraceEvent::Acked,
                rtt_ns: Some(m.rtt.as_nanos()),
            });
        }
        let slot = &mut self.channels[c];
        let d_s = slot.chan.d_s(now).unwrap_or(m.rtt);
        if self.cfg.scout.ipg_variant {
            let ipg_t = slot.ipg_t;
            let ipg_s = prev_ack.map_or(ipg_t, |p| now.saturating_sub(p));
            for f in self.channel_flows(c) {
                self.apply_ipg(f, d_s, ipg_s, ipg_t, Some(m.send_ts));
            }
            return;
        }
        let signal = if d_s <= slot.d_t {
            let grant = slot.alpha.value() * slot.chan.scout_bytes as f64;
            slot.alpha.double();
            ScoutSignal::BandwidthGrant(grant)
        } else {
            ScoutSignal::Busy(d_s)
        };
        let per_flow = matches!(slot.chan.scope, ScoutScope::PerFlow(_));
        for (f, sig) in scout::distribute_signal(self.channels[c].chan.active_flows(), signal) {
            let sig = match (sig, per_flow) {
                // Per-flow channels grant from the flow's own coefficient.
                (ScoutSignal::BandwidthGrant(_), true) => ScoutSignal::BandwidthGrant(f64::NAN),
                (s, _) => s,
            };
            self.deliver_signal(f.0 as usize, sig, Some(m.send_ts));
        }
    }

    fn deliver_signal(&mut self, idx: usize, sig: ScoutSignal, scout_send_ts: Option<SimTime>) {
        let now = self.now();
        let f = self.tcp(idx);
        let Some(dw) = f.sender.as_mut().and_then(|s| s.cc.as_dwtcp_mut()) else {
            return;
        };
        match sig {
            ScoutSignal::BandwidthGrant(bytes) => {
                let send_ts = scout_send_ts.unwrap_or(now);
                if bytes.is_nan() {
                    dw.on_scout_ack(send_ts, now);
                } else {
                    dw.apply_grant(bytes);
                    dw.last_scout_send_ts = Some(send_ts);
                    dw.last_scout_ack_ts = Some(now);
                }
                self.log(idx, FlowEventKind::ScoutAck, None);
                self.pump(idx);
            }
            ScoutSignal::Busy(d_s) => {
                if dw.on_scout_delayed(d_s, now).is_some() {
                    self.log(idx, FlowEventKind::Decrease, Some(d_s));
                }
            }
            ScoutSignal::Loss => dw.on_scout_loss(),
        }
    }

    fn apply_ipg(&mut self, idx: usize, d_s: SimTime, ipg_s: SimTime, ipg_t: SimTime, acked: Option<SimTime>) {
        let now = self.now();
        let f = self.tcp(idx);
        let Some(dw) = f.sender.as_mut().and_then(|s| s.cc.as_dwtcp_mut()) else {
            return;
        };
        if let Some(send_ts) = acked {
            dw.last_scout_send_ts = Some(send_ts);
            dw.last_scout_ack_ts = Some(now);
        }
        match dw.decrease_ipg_variant(d_s, ipg_s, ipg_t, now) {
            IpgOutcome::Increased => {
                if acked.is_some() {
                    dw.alpha.double();
                }
                self.log(idx, FlowEventKind::ScoutAck, None);
                self.pump(idx);
            }
            IpgOutcome::Decreased { .. } => self.log(idx, FlowEventKind::Decrease, Some(d_s)),
            IpgOutcome::Gated => {}
        }
    }

    fn udp_emit(&mut self, idx: usize) {
        let now = self.now();
        let id = self.pkt_id();
        let FlowSlot::Udp(u) = &mut self.flows[idx] else { unreachable!() };
        if u.stop.is_some_and(|s| now >= s) {
            return;
        }
        let rate = u.rate_at(now);
        let size = u.pkt_bytes;
        let route = u.route;
        let gap_s = if rate > 0.0 { size as f64 * 8.0 / rate } else { 1e-3 };
        let gap_s = if u.poisson {
            let e: f64 = Exp1.sample(&mut u.rng);
            gap_s * e
        } else {
            gap_s
        };
        let emit = rate > 0.0;
        if emit {
            u.sent_pkts += 1;
        }
        self.sched
            .schedule(now + SimTime::from_secs_f64(gap_s).max(SimTime::from_nanos(1)), Event::UdpEmit(idx));
        if emit {
            let pkt = Packet::data(id, FlowId(idx as u32), 0, size, size, now, route);
            self.inject(pkt);
        }
    }

    fn sample(&mut self) {
        let now = self.now();
        for &l in self.topo.monitored_ports() {
            let p = &self.topo.link(l).port;
            self.queue_trace.push(QueueSample {
                t_ns: now.as_nanos(),
                port: l.0,
                qlen_pkts: p.hpq_len(),
                qlen_lpq_bytes: p.lpq_bytes(),
            });
        }
        if let Some(iv) = self.sample_interval {
            if now + iv <= self.end {
                self.sched.schedule(now + iv, Event::Sample);
            }
        }
    }

    fn port_report(&mut self, l: LinkId) -> PortReport {
        let end = self.end;
        let port = &mut self.topo.link_mut(l).port;
        PortReport {
            link: l.0,
            line_rate_bps: port.line_rate_bps(),
            mean_hpq_pkts: port.mean_hpq_occupancy(end),
            stats: port.stats.clone(),
            resident: port.resident(),
        }
    }

    fn finish(mut self, aborted_at: Option<SimTime>) -> RunOutput {
        let bottleneck = self.topo.bottleneck().map(|b| self.port_report(b));
        let monitored_ids: Vec<LinkId> = self.topo.monitored_ports().to_vec();
        let monitored = monitored_ids.into_iter().map(|l| self.port_report(l)).collect();
        let ports = (0..self.topo.links.len() as u32).map(|l| self.port_report(LinkId(l))).collect();
        let mut switch_drops = [0u64; 2];
        for link in &self.topo.links {
            if self.topo.node_kind(link.src) == NodeKind::Switch {
                switch_drops[0] += link.port.stats.dropped[0];
                switch_drops[1] += link.port.stats.dropped[1];
            }
        }
        let mut flows = Vec::new();
        let mut udp = Vec::new();
        for (i, slot) in self.flows.into_iter().enumerate() {
            match slot {
                FlowSlot::Tcp(f) => {
                    let f = *f;
                    let (finish, timeouts, retransmits, acked) = match &f.sender {
                        Some(s) => (s.completed_at(), s.stats.timeouts, s.stats.retransmits, s.snd_una()),
                        None => (None, 0, 0, 0),
                    };
                    let slowdown = match (finish, f.plan.size) {
                        (Some(t), Some(size)) => Some(metrics::slowdown(t - f.plan.start, size, &f.path)),
                        _ => None,
                    };
                    flows.push(FlowSummary {
                        flow_id: i as u32,
                        src: f.plan.src.0,
                        dst: f.plan.dst.0,
                        size: f.plan.size,
                        start: f.plan.start,
                        stop: f.plan.stop,
                        finish,
                        timeouts,
                        retransmits,
                        acked_bytes: acked,
                        base_rtt: f.path.base_rtt,
                        bottleneck_bps: f.path.bottleneck_bps,
                        slowdown,
                        goodput: f.goodput,
                    });
                }
                FlowSlot::Udp(u) => udp.push(UdpSummary {
                    flow_id: i as u32,
                    sent_pkts: u.sent_pkts,
                    received_bytes: u.received_bytes,
                }),
            }
        }
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(i, s)| ChannelSummary {
                channel_id: i as u32,
                probe: matches!(s.chan.scope, ScoutScope::Probe { .. }),
                sent: s.chan.stats.sent,
                acked: s.chan.stats.acked,
                lost: s.chan.stats.lost,
                mean_rtt_ns: (s.chan.stats.acked > 0).then(|| s.rtt_sum_ns as f64 / s.chan.stats.acked as f64),
                max_rtt_ns: s.rtt_max.as_nanos(),
                mean_d_s_ns: (s.ds_samples > 0).then(|| s.ds_sum_ns as f64 / s.ds_samples as f64),
                d_t_ns: s.d_t.as_nanos(),
            })
            .collect();
        RunOutput {
            end: self.end,
            events: self.sched.fired(),
            flows,
            udp,
            channels,
            queue_trace: self.queue_trace,
            drops: self.drops,
            flow_events: self.flow_events,
            scout_trace: self.scout_trace,
            bottleneck,
            monitored,
            ports,
            switch_drops,
            aborted_at,
        }
    }
}

/// Expands the workload into concrete TCP flows.
pub fn plan_tcp_flows(cfg: &ExperimentConfig, topo: &Topology) -> Result<Vec<TcpFlowPlan>, RunError> {
    let senders = topo.senders();
    let receivers = topo.receivers();
    let ns = |n: u64| SimTime::from_nanos(n);
    let plans = match &cfg.workload {
        WorkloadSpec::LongFlows { flows } => flows
            .iter()
            .map(|f| TcpFlowPlan {
                src: senders[f.src],
                dst: receivers[f.dst],
                start: ns(f.start_ns),
                stop: f.stop_ns.map(ns),
                size: f.size_bytes,
                monitored: true,
            })
            .collect(),
        WorkloadSpec::Burst {
            background_flows,
            bursting_flows,
            period_ns,
            min_bytes,
            max_bytes,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut v: Vec<TcpFlowPlan> = (0..*background_flows)
                .map(|i| TcpFlowPlan {
                    src: senders[i],
                    dst: receivers[i],
                    start: SimTime::ZERO,
                    stop: None,
                    size: None,
                    monitored: true,
                })
                .collect();
            let mut t = 0;
            while t < cfg.duration_ns {
                for j in 0..*bursting_flows {
                    let k = background_flows + j;
                    v.push(TcpFlowPlan {
                        src: senders[k],
                        dst: receivers[k],
                        start: ns(t),
                        stop: None,
                        size: Some(rng.random_range(*min_bytes..=*max_bytes)),
                        monitored: false,
                    });
                }
                t += period_ns;
            }
            v
        }
        WorkloadSpec::Poisson { cdf, load, arrivals_ns } => {
            let cdf = match cdf {
                CdfSource::Builtin { name } => FlowSizeCdf::builtin(name)?,
                CdfSource::File { path } => FlowSizeCdf::load(std::path::Path::new(path))?,
            };
            let hosts = topo.hosts();
            let host_bps = match &cfg.topology {
                TopologySpec::Dumbbell(d) => d.access_bps,
                TopologySpec::LeafSpine(l) => l.edge_bps,
            };
            workload::all_to_all(&cdf, hosts.len(), *load, host_bps as f64, ns(*arrivals_ns), cfg.seed)
                .into_iter()
                .map(|a| TcpFlowPlan {
                    src: hosts[a.src_index],
                    dst: hosts[a.dst_index],
                    start: a.start,
                    stop: None,
                    size: Some(a.size),
                    monitored: false,
                })
                .collect()
        }
        WorkloadSpec::Udp { .. } => Vec::new(),
    };
    Ok(plans)
}
