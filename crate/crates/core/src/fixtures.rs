//! Small hand-built configurations with known answers.
//!
//! All use rate 1, latency 1 and one-flit buffers unless stated, so a
//! three-flit packet spreads over three nodes.

use crate::netcalc::int;
use crate::platform::{xy_route, Config, Flow, FlowId, NocModel, NodeParams};

fn unit_mesh(width: u32, height: u32, buffer: u64) -> NocModel {
    NocModel::uniform(width, height, NodeParams::new(int(1), int(1), buffer))
}

fn routed(noc: &NocModel, id: FlowId, src: (u32, u32), dst: (u32, u32), len: u64, period: u64, burst: u64) -> Flow {
    Flow {
        id,
        src,
        dst,
        len,
        period,
        burst,
        jitter: int(0),
        vc: 0,
        path: xy_route(noc, src, dst).expect("fixture route"),
    }
}

/// Three flows on one VC (len 3, rate 0.05). Flow 1 runs east along row 0
/// into flow 2's first node; flow 2 turns north at column 5 where flow 3
/// starts. Flow 3 can block flow 1 only through flow 2.
pub fn subpath_chain(burst: u64) -> Config {
    let noc = unit_mesh(6, 4, 1);
    let flows = vec![
        routed(&noc, 1, (0, 0), (3, 0), 3, 60, burst),
        routed(&noc, 2, (2, 0), (5, 1), 3, 60, burst),
        routed(&noc, 3, (5, 0), (5, 3), 3, 60, burst),
    ];
    Config::new(noc, flows, vec![0]).expect("fixture ids")
}

/// Like [`subpath_chain`] but flow 2 ends one router further north and
/// flow 3 starts at (5,1), beyond the reach of one packet of flow 2 spread
/// from flow 1. Only back-to-back packets of flow 2 connect them.
pub fn cpq_chain(burst: u64) -> Config {
    let noc = unit_mesh(6, 7, 1);
    let flows = vec![
        routed(&noc, 1, (0, 0), (3, 0), 3, 60, burst),
        routed(&noc, 2, (2, 0), (5, 2), 3, 60, burst),
        routed(&noc, 3, (5, 1), (5, 6), 3, 60, burst),
    ];
    Config::new(noc, flows, vec![0]).expect("fixture ids")
}

/// One flow over four nodes, len 3.
pub fn isolated_flow() -> Config {
    let noc = unit_mesh(4, 1, 1);
    let flows = vec![routed(&noc, 1, (0, 0), (3, 0), 3, 60, 1)];
    Config::new(noc, flows, vec![0]).expect("fixture ids")
}

/// Source and destination cores of the twelve-flow 6x6 configuration used
/// for buffer and packet length sweeps. Flow 1 is the usual flow of interest.
pub const LADDER_FLOWS: [((u32, u32), (u32, u32)); 12] = [
    ((0, 5), (5, 4)),
    ((1, 5), (2, 3)),
    ((2, 5), (3, 2)),
    ((3, 5), (4, 3)),
    ((5, 5), (5, 1)),
    ((2, 4), (2, 1)),
    ((2, 2), (2, 0)),
    ((3, 4), (3, 1)),
    ((3, 3), (3, 0)),
    ((4, 4), (4, 1)),
    ((4, 2), (4, 0)),
    ((5, 2), (5, 0)),
];

/// The twelve-flow 6x6 configuration, one VC, uniform length and period.
pub fn ladder(len: u64, period: u64, buffer: u64) -> Config {
    let noc = unit_mesh(6, 6, buffer);
    let flows = LADDER_FLOWS
        .iter()
        .enumerate()
        .map(|(i, (s, d))| routed(&noc, i as FlowId + 1, *s, *d, len, period, 1))
        .collect();
    Config::new(noc, flows, vec![0]).expect("fixture ids")
}

/// 4x4 mesh, latency 3, four VCs. Flows are coloured greedily so that no two
/// flows sharing a node use the same VC.
pub fn exclusive_vc_mesh() -> Config {
    let mut noc = NocModel::uniform(4, 4, NodeParams::new(int(1), int(3), 2));
    noc.vc_count = 4;
    let pairs = [
        ((0, 0), (3, 0)),
        ((1, 0), (1, 3)),
        ((3, 3), (0, 3)),
        ((0, 2), (3, 1)),
        ((2, 3), (2, 0)),
        ((0, 1), (2, 2)),
        ((3, 0), (3, 3)),
        ((1, 2), (0, 0)),
        ((2, 1), (3, 2)),
        ((0, 3), (1, 1)),
    ];
    let mut flows: Vec<Flow> = pairs
        .iter()
        .enumerate()
        .map(|(i, (s, d))| routed(&noc, i as FlowId + 1, *s, *d, 4, 200, 1))
        .collect();
    for i in 0..flows.len() {
        let used: Vec<u32> = flows[..i]
            .iter()
            .filter(|g| g.path.iter().any(|n| flows[i].path.contains(n)))
            .map(|g| g.vc)
            .collect();
        flows[i].vc = (0..).find(|v| !used.contains(v)).expect("free vc");
        assert!(flows[i].vc < noc.vc_count, "fixture needs more VCs");
    }
    Config::new(noc, flows, vec![0, 1, 2, 3]).expect("fixture ids")
}
