//! Nodes, links and static routing for the dumbbell and leaf-spine layouts.

use crate::packet::RouteId;
use crate::port::{PortConfig, PriorityPort};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Host,
    Switch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    Dumbbell,
    LeafSpine,
}

/// Unidirectional link; the output port lives at the `src` end.
#[derive(Clone, Debug)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub propagation_delay: SimTime,
    pub port: PriorityPort,
}

/// Output-port buffers. Switch ports share one setting; host NICs get the
/// same LPQ size, their own HPQ size, and never mark. ECN marks are only
/// acted on by DCTCP senders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchBuffers {
    pub hpq_cap_pkts: usize,
    pub lpq_cap_bytes: u32,
    pub ecn_threshold_pkts: Option<usize>,
    pub host_hpq_cap_pkts: usize,
}

impl Default for SwitchBuffers {
    fn default() -> Self {
        SwitchBuffers {
            hpq_cap_pkts: 250,
            lpq_cap_bytes: 640,
            ecn_threshold_pkts: Some(65),
            host_hpq_cap_pkts: 250,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DumbbellSpec {
    pub senders: usize,
    pub receivers: usize,
    pub access_bps: u64,
    pub bottleneck_bps: u64,
    pub access_delay_ns: u64,
    pub bottleneck_delay_ns: u64,
}

impl Default for DumbbellSpec {
    /// 10 Gb/s everywhere with a 100 µs propagation round trip
    /// (2 × (10 + 30 + 10) µs).
    fn default() -> Self {
        DumbbellSpec {
            senders: 10,
            receivers: 10,
            access_bps: 10_000_000_000,
            bottleneck_bps: 10_000_000_000,
            access_delay_ns: 10_000,
            bottleneck_delay_ns: 30_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeafSpineSpec {
    pub leaves: usize,
    pub spines: usize,
    pub hosts_per_leaf: usize,
    pub edge_bps: u64,
    pub core_bps: u64,
    /// Per-link delay; inter-leaf paths cross four links each way.
    pub link_delay_ns: u64,
}

impl Default for LeafSpineSpec {
    fn default() -> Self {
        LeafSpineSpec {
            leaves: 4,
            spines: 2,
            hosts_per_leaf: 4,
            edge_bps: 10_000_000_000,
            core_bps: 40_000_000_000,
            link_delay_ns: 12_500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Dumbbell(DumbbellSpec),
    LeafSpine(LeafSpineSpec),
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Dumbbell(DumbbellSpec::default())
    }
}

/// Zero-load properties of a host-to-host path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathInfo {
    /// Propagation-only round trip.
    pub base_rtt: SimTime,
    /// Slowest link rate on the forward path at build time.
    pub bottleneck_bps: u64,
    pub hops: usize,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub kind: TopologyKind,
    nodes: Vec<NodeKind>,
    pub links: Vec<Link>,
    hosts: Vec<NodeId>,
    /// Senders then receivers for the dumbbell; leaf-major for leaf-spine.
    routes: Vec<Vec<LinkId>>,
    route_index: HashMap<(NodeId, NodeId), RouteId>,
    link_index: HashMap<(NodeId, NodeId), LinkId>,
    bottleneck: Option<LinkId>,
    monitored: Vec<LinkId>,
    dumbbell_split: Option<usize>,
}

impl Topology {
    fn empty(kind: TopologyKind) -> Self {
        Topology {
            kind,
            nodes: Vec::new(),
            links: Vec::new(),
            hosts: Vec::new(),
            routes: Vec::new(),
            route_index: HashMap::new(),
            link_index: HashMap::new(),
            bottleneck: None,
            monitored: Vec::new(),
            dumbbell_split: None,
        }
    }

    fn add_node(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(kind);
        if kind == NodeKind::Host {
            self.hosts.push(id);
        }
        id
    }

    fn add_link(&mut self, src: NodeId, dst: NodeId, delay: SimTime, cfg: PortConfig) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(Link {
            src,
            dst,
            propagation_delay: delay,
            port: PriorityPort::new(cfg),
        });
        let prev = self.link_index.insert((src, dst), id);
        assert!(prev.is_none(), "duplicate link {src:?}->{dst:?}");
        id
    }

    fn add_duplex(&mut self, a: NodeId, b: NodeId, bps: u64, delay: SimTime, buffers: &SwitchBuffers) -> (LinkId, LinkId) {
        let ab = self.add_link(a, b, delay, self.port_cfg(a, bps, buffers));
        let ba = self.add_link(b, a, delay, self.port_cfg(b, bps, buffers));
        (ab, ba)
    }

    fn port_cfg(&self, owner: NodeId, bps: u64, buffers: &SwitchBuffers) -> PortConfig {
        match self.nodes[owner.0 as usize] {
            NodeKind::Host => PortConfig {
                hpq_cap_pkts: buffers.host_hpq_cap_pkts,
                lpq_cap_bytes: buffers.lpq_cap_bytes,
                line_rate_bps: bps,
                ecn_threshold_pkts: None,
            },
            NodeKind::Switch => PortConfig {
                hpq_cap_pkts: buffers.hpq_cap_pkts,
                lpq_cap_bytes: buffers.lpq_cap_bytes,
                line_rate_bps: bps,
                ecn_threshold_pkts: buffers.ecn_threshold_pkts,
            },
        }
    }

    fn add_route(&mut self, path: &[NodeId]) {
        let links: Vec<LinkId> = path
            .windows(2)
            .map(|w| self.link_index[&(w[0], w[1])])
            .collect();
        let id = RouteId(self.routes.len() as u32);
        self.routes.push(links);
        let (src, dst) = (path[0], *path.last().unwrap());
        self.route_index.insert((src, dst), id);
    }

    /// Installs `path` and its reverse so both directions share the same
    /// node sequence.
    fn add_symmetric_route(&mut self, path: &[NodeId]) {
        self.add_route(path);
        let rev: Vec<NodeId> = path.iter().rev().copied().collect();
        self.add_route(&rev);
    }

    pub fn build(spec: &TopologySpec, buffers: &SwitchBuffers) -> Self {
        match spec {
            TopologySpec::Dumbbell(d) => Self::dumbbell(d, buffers),
            TopologySpec::LeafSpine(l) => Self::leaf_spine(l, buffers),
        }
    }

    pub fn dumbbell(spec: &DumbbellSpec, buffers: &SwitchBuffers) -> Self {
        assert!(spec.senders > 0 && spec.receivers > 0);
        let mut t = Topology::empty(TopologyKind::Dumbbell);
        let senders: Vec<NodeId> = (0..spec.senders).map(|_| t.add_node(NodeKind::Host)).collect();
        let receivers: Vec<NodeId> = (0..spec.receivers).map(|_| t.add_node(NodeKind::Host)).collect();
        let left = t.add_node(NodeKind::Switch);
        let right = t.add_node(NodeKind::Switch);
        let access = SimTime::from_nanos(spec.access_delay_ns);
        for &h in &senders {
            t.add_duplex(h, left, spec.access_bps, access, buffers);
        }
        for &h in &receivers {
            t.add_duplex(h, right, spec.access_bps, access, buffers);
        }
        let (fwd, _) = t.add_duplex(
            left,
            right,
            spec.bottleneck_bps,
            SimTime::from_nanos(spec.bottleneck_delay_ns),
            buffers,
        );
        t.bottleneck = Some(fwd);
        t.monitored = vec![fwd];
        t.dumbbell_split = Some(spec.senders);

        for (i, &a) in senders.iter().enumerate() {
            for &b in &senders[i + 1..] {
                t.add_symmetric_route(&[a, left, b]);
            }
            for &b in &receivers {
                t.add_symmetric_route(&[a, left, right, b]);
            }
        }
        for (i, &a) in receivers.iter().enumerate() {
            for &b in &receivers[i + 1..] {
                t.add_symmetric_route(&[a, right, b]);
            }
        }
        t
    }

    pub fn leaf_spine(spec: &LeafSpineSpec, buffers: &SwitchBuffers) -> Self {
        assert!(spec.leaves > 0 && spec.spines > 0 && spec.hosts_per_leaf > 0);
        let mut t = Topology::empty(TopologyKind::LeafSpine);
        let delay = SimTime::from_nanos(spec.link_delay_ns);
        let hosts: Vec<NodeId> = (0..spec.leaves * spec.hosts_per_leaf)
            .map(|_| t.add_node(NodeKind::Host))
            .collect();
        let leaves: Vec<NodeId> = (0..spec.leaves).map(|_| t.add_node(NodeKind::Switch)).collect();
        let spines: Vec<NodeId> = (0..spec.spines).map(|_| t.add_node(NodeKind::Switch)).collect();
        let leaf_of = |h: usize| h / spec.hosts_per_leaf;
        for (i, &h) in hosts.iter().enumerate() {
            let (_, down) = t.add_duplex(h, leaves[leaf_of(i)], spec.edge_bps, delay, buffers);
            t.monitored.push(down);
        }
        for &l in &leaves {
            for &s in &spines {
                t.add_duplex(l, s, spec.core_bps, delay, buffers);
            }
        }
        for a in 0..hosts.len() {
            for b in a + 1..hosts.len() {
                let (la, lb) = (leaf_of(a), leaf_of(b));
                if la == lb {
                    t.add_symmetric_route(&[hosts[a], leaves[la], hosts[b]]);
                } else {
                    // Symmetric in (a, b), so both directions use the same spine.
                    let spine = spines[(a + b) % spec.spines];
                    t.add_symmetric_route(&[hosts[a], leaves[la], spine, leaves[lb], hosts[b]]);
                }
            }
        }
        t
    }

    pub fn hosts(&self) -> &[NodeId] {
        &self.hosts
    }

    /// Dumbbell sender hosts (left side).
    pub fn senders(&self) -> &[NodeId] {
        match self.dumbbell_split {
            Some(n) => &self.hosts[..n],
            None => &self.hosts,
        }
    }

    /// Dumbbell receiver hosts (right side).
    pub fn receivers(&self) -> &[NodeId] {
        match self.dumbbell_split {
            Some(n) => &self.hosts[n..],
            None => &self.hosts,
        }
    }

    pub fn node_kind(&self, n: NodeId) -> NodeKind {
        self.nodes[n.0 as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn route(&self, src: NodeId, dst: NodeId) -> Option<RouteId> {
        self.route_index.get(&(src, dst)).copied()
    }

    pub fn route_links(&self, r: RouteId) -> &[LinkId] {
        &self.routes[r.0 as usize]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut Link {
        &mut self.links[id.0 as usize]
    }

    /// The dumbbell's left-to-right core link.
    pub fn bottleneck(&self) -> Option<LinkId> {
        self.bottleneck
    }

    /// Ports whose queues are traced: the dumbbell bottleneck, or every
    /// leaf-to-host downlink.
    pub fn monitored_ports(&self) -> &[LinkId] {
        &self.monitored
    }

    pub fn path_info(&self, src: NodeId, dst: NodeId) -> Option<PathInfo> {
        let fwd = self.route_links(self.route(src, dst)?);
        let rev = self.route_links(self.route(dst, src)?);
        let prop: u64 = fwd
            .iter()
            .chain(rev.iter())
            .map(|&l| self.link(l).propagation_delay.as_nanos())
            .sum();
        let bottleneck_bps = fwd
            .iter()
            .map(|&l| self.link(l).port.line_rate_bps())
            .min()
            .unwrap_or(u64::MAX);
        Some(PathInfo {
            base_rtt: SimTime::from_nanos(prop),
            bottleneck_bps,
            hops: fwd.len(),
        })
    }

    /// Node sequence visited by a route, starting at its source host.
    pub fn route_nodes(&self, r: RouteId) -> Vec<NodeId> {
        let links = self.route_links(r);
        let mut nodes = vec![self.link(links[0]).src];
        nodes.extend(links.iter().map(|&l| self.link(l).dst));
        nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dumbbell_rtt_is_100us() {
        let t = Topology::dumbbell(&DumbbellSpec::default(), &SwitchBuffers::default());
        let (s, r) = (t.senders()[0], t.receivers()[3]);
        let info = t.path_info(s, r).unwrap();
        assert_eq!(info.base_rtt, SimTime::from_micros(100));
        assert_eq!(info.bottleneck_bps, 10_000_000_000);
        assert_eq!(info.hops, 3);
        let b = t.bottleneck().unwrap();
        assert!(t.route_links(t.route(s, r).unwrap()).contains(&b));
    }

    #[test]
    fn routes_are_symmetric() {
        for spec in [
            TopologySpec::Dumbbell(DumbbellSpec::default()),
            TopologySpec::LeafSpine(LeafSpineSpec::default()),
        ] {
            let t = Topology::build(&spec, &SwitchBuffers::default());
            for &a in t.hosts() {
                for &b in t.hosts() {
                    if a == b {
                        continue;
                    }
                    let f = t.route_nodes(t.route(a, b).unwrap());
                    let mut r = t.route_nodes(t.route(b, a).unwrap());
                    r.reverse();
                    assert_eq!(f, r);
                }
            }
        }
    }

    #[test]
    fn leaf_spine_default_shape() {
        let t = Topology::leaf_spine(&LeafSpineSpec::default(), &SwitchBuffers::default());
        assert_eq!(t.hosts().len(), 16);
        let hs = t.hosts();
        let inter = t.path_info(hs[0], hs[15]).unwrap();
        assert_eq!(inter.base_rtt, SimTime::from_micros(100));
        assert_eq!(inter.hops, 4);
        assert_eq!(inter.bottleneck_bps, 10_000_000_000);
        let intra = t.path_info(hs[0], hs[1]).unwrap();
        assert_eq!(intra.hops, 2);
        assert_eq!(t.monitored_ports().len(), 16);
    }

    #[test]
    fn host_ports_do_not_mark() {
        let buffers = SwitchBuffers {
            ecn_threshold_pkts: Some(65),
            ..SwitchBuffers::default()
        };
        let t = Topology::dumbbell(&DumbbellSpec::default(), &buffers);
        let s = t.senders()[0];
        let first = t.route_links(t.route(s, t.receivers()[0]).unwrap())[0];
        assert_eq!(t.link(first).port.config().ecn_threshold_pkts, None);
        let b = t.bottleneck().unwrap();
        assert_eq!(t.link(b).port.config().ecn_threshold_pkts, Some(65));
    }
}
