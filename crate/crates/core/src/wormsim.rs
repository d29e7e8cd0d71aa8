//! Flit-level wormhole simulator with virtual channels.
//!
//! Every router output owns one input queue per VC holding at most `B` flits.
//! A queue is allocated to a single packet from the moment its head is
//! granted until its tail leaves. Outputs serve their queues by fixed VC
//! priority, one flit per slot, and a flit sent at cycle `t` is usable
//! downstream at `t + T`. The `T`-cycle pipeline carries its flits in flight
//! on top of the `B` buffered ones, so a lone packet streams at full rate
//! whatever the buffer size. Outputs are visited downstream first so a slot
//! freed in one cycle can be refilled in the same cycle.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::Write;

use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::AnalysisReport;
use crate::netcalc::Rational;
use crate::platform::{Config, FlowId, NodeId};

/// Activations every flow gets at least, when no horizon is given.
const MIN_ACTIVATIONS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSchedule {
    pub seed: u64,
    #[serde(default = "one_run")]
    pub runs: u64,
    /// Last cycle at which packets may be released.
    #[serde(default)]
    pub horizon: Option<u64>,
    /// Per-flow release offsets in config order; drawn from the seed if absent.
    #[serde(default)]
    pub offsets: Option<Vec<u64>>,
}

fn one_run() -> u64 {
    1
}

impl TrafficSchedule {
    pub fn new(seed: u64, runs: u64) -> Self {
        Self {
            seed,
            runs,
            horizon: None,
            offsets: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("deadlock: nothing moved for {window} cycles up to cycle {cycle} with {pending} flits pending")]
    DeadlockDetected { cycle: u64, window: u64, pending: u64 },
    #[error("node {node}: {reason}")]
    Unsupported { node: NodeId, reason: String },
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("flow {flow} exceeded its bound in run {run} (seed {seed}): {observed} > {bound}; {summary}")]
    SafetyViolation {
        flow: FlowId,
        run: u64,
        seed: u64,
        observed: u64,
        bound: f64,
        summary: String,
    },
    #[error("no bound for flow {0}")]
    MissingBound(FlowId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    /// Flit moved from the source queue into the first router.
    Inject,
    Send,
    /// Flit reached the destination core.
    Deliver,
    /// Ready flit blocked by a full or foreign downstream queue.
    Stall,
    /// Ready flit with room downstream that lost the output this cycle.
    Wait,
    /// Queue allocated to the flow at the end of the cycle.
    Hold,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::Inject => "inject",
            TraceKind::Send => "send",
            TraceKind::Deliver => "deliver",
            TraceKind::Stall => "stall",
            TraceKind::Wait => "wait",
            TraceKind::Hold => "hold",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub node: NodeId,
    pub vc: u32,
    pub flow: FlowId,
    pub kind: TraceKind,
}

pub fn write_trace<W: Write>(events: &[TraceEvent], out: W) -> Result<(), csv::Error> {
    #[derive(Serialize)]
    struct Row {
        cycle: u64,
        node: String,
        vc: u32,
        flow: FlowId,
        event: TraceKind,
    }
    let mut writer = csv::Writer::from_writer(out);
    for e in events {
        writer.serialize(Row {
            cycle: e.cycle,
            node: e.node.to_string(),
            vc: e.vc,
            flow: e.flow,
            event: e.kind,
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimResult {
    /// Per packet, release to delivery of its tail flit, in cycles.
    pub delays: BTreeMap<FlowId, Vec<u64>>,
    pub injected: BTreeMap<FlowId, u64>,
    pub delivered: BTreeMap<FlowId, u64>,
    /// Packets released but not delivered when the run stopped.
    pub undelivered: u64,
    pub cycles: u64,
}

impl SimResult {
    pub fn max_delay(&self, flow: FlowId) -> Option<u64> {
        self.delays.get(&flow).and_then(|d| d.iter().copied().max())
    }
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    flow: usize,
    packet: u64,
    /// Index in the flow's path of the queue holding the flit.
    hop: usize,
    head: bool,
    tail: bool,
    ready: u64,
}

#[derive(Debug, Default)]
struct Queue {
    flits: VecDeque<Flit>,
    owner: Option<(usize, u64)>,
    /// Flow granted last, for round-robin allocation.
    last_grant: Option<usize>,
}

#[derive(Debug)]
struct Output {
    node: NodeId,
    latency: u64,
    /// Rate as `credit_in / credit_cost` flits per cycle.
    credit_in: u64,
    credit_cost: u64,
    credits: u64,
    buffer: usize,
    /// VC indices, highest priority first.
    vc_order: Vec<usize>,
    queues: Vec<Queue>,
    /// Queues of other outputs whose packets continue here.
    feeders: Vec<usize>,
    /// Flows whose first hop is this output.
    sources: Vec<usize>,
}

struct Packet {
    seq: u64,
    release: u64,
    sent: u64,
}

struct FlowState {
    id: FlowId,
    vc: usize,
    len: u64,
    route: Vec<usize>,
    pending: VecDeque<Packet>,
}

struct Network<'t> {
    outputs: Vec<Output>,
    order: Vec<usize>,
    flows: Vec<FlowState>,
    trace: Option<&'t mut Vec<TraceEvent>>,
    result: SimResult,
    in_network: u64,
    moved: bool,
}

fn as_u64(value: &Rational, node: NodeId, what: &str) -> Result<u64, SimError> {
    if !value.is_integer() || value < &Rational::one() {
        return Err(SimError::Unsupported {
            node,
            reason: format!("{what} {value} is not a positive whole number of cycles"),
        });
    }
    value.to_integer().to_u64().ok_or_else(|| SimError::Unsupported {
        node,
        reason: format!("{what} too large"),
    })
}

fn rate_credits(rate: &Rational, node: NodeId) -> Result<(u64, u64), SimError> {
    if rate <= &Rational::zero() || rate > &Rational::one() {
        return Err(SimError::Unsupported {
            node,
            reason: format!("rate {rate} outside (0, 1] flit/cycle"),
        });
    }
    let num = rate.numer().to_u64();
    let den = rate.denom().to_u64();
    match (num, den) {
        (Some(n), Some(d)) => Ok((n, d)),
        _ => Err(SimError::Unsupported {
            node,
            reason: "rate denominator too large".into(),
        }),
    }
}

/// Outputs ordered so that every output comes before the ones feeding it.
fn downstream_first(outputs: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut indegree = vec![0usize; outputs];
    let mut next = vec![Vec::new(); outputs];
    for &(from, to) in edges {
        // reversed: visit `to` before `from`
        next[to].push(from);
        indegree[from] += 1;
    }
    let mut ready: VecDeque<usize> = (0..outputs).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(outputs);
    while let Some(i) = ready.pop_front() {
        order.push(i);
        for &j in &next[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push_back(j);
            }
        }
    }
    // cyclic channel dependencies: append the rest in index order
    let mut placed = vec![false; outputs];
    for &i in &order {
        placed[i] = true;
    }
    order.extend((0..outputs).filter(|&i| !placed[i]));
    order
}

/// Release cycles of every packet of every flow for one run.
fn releases(config: &Config, schedule: &TrafficSchedule, run: u64) -> Result<(Vec<Vec<u64>>, u64), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    rng.set_stream(run);
    if let Some(offsets) = &schedule.offsets {
        if offsets.len() != config.flows.len() {
            return Err(SimError::BadSchedule(format!(
                "{} offsets for {} flows",
                offsets.len(),
                config.flows.len()
            )));
        }
    }
    let horizon = schedule.horizon.unwrap_or_else(|| {
        config
            .flows
            .iter()
            .map(|f| MIN_ACTIVATIONS * f.burst * f.period + f.period)
            .max()
            .unwrap_or(0)
    });
    let mut all = Vec::with_capacity(config.flows.len());
    for (i, f) in config.flows.iter().enumerate() {
        if f.period == 0 || f.burst == 0 {
            return Err(SimError::BadSchedule(format!("flow {} has no period or burst", f.id)));
        }
        let offset = match &schedule.offsets {
            Some(o) if o[i] >= f.period => {
                return Err(SimError::BadSchedule(format!("offset of flow {} not below its period", f.id)))
            }
            Some(o) => o[i],
            None => rng.random_range(0..f.period),
        };
        let jitter = f.jitter.floor().to_integer().to_u64().unwrap_or(0);
        let mut times = Vec::new();
        let mut start = offset;
        while start <= horizon {
            let release = start + if jitter > 0 { rng.random_range(0..=jitter) } else { 0 };
            times.extend(std::iter::repeat_n(release, f.burst as usize));
            start += f.burst * f.period;
        }
        times.sort_unstable();
        all.push(times);
    }
    Ok((all, horizon))
}

impl<'t> Network<'t> {
    fn build(config: &Config, trace: Option<&'t mut Vec<TraceEvent>>) -> Result<Self, SimError> {
        let vc_slots = config
            .flows
            .iter()
            .map(|f| f.vc as usize + 1)
            .max()
            .unwrap_or(0)
            .max(config.noc.vc_count as usize);
        let mut vc_order: Vec<usize> = (0..vc_slots).collect();
        vc_order.sort_by_key(|&v| (config.priority_rank(v as u32), v));

        let mut index: HashMap<NodeId, usize> = HashMap::new();
        let mut outputs = Vec::new();
        let mut flows = Vec::with_capacity(config.flows.len());
        let mut edges = Vec::new();
        for (fi, f) in config.flows.iter().enumerate() {
            let mut route = Vec::with_capacity(f.path.len());
            for node in &f.path {
                let i = match index.get(node) {
                    Some(&i) => i,
                    None => {
                        let p = config.noc.params(node);
                        let (credit_in, credit_cost) = rate_credits(&p.rate, *node)?;
                        if p.buffer == 0 {
                            return Err(SimError::Unsupported {
                                node: *node,
                                reason: "zero buffer".into(),
                            });
                        }
                        outputs.push(Output {
                            node: *node,
                            latency: as_u64(&p.latency, *node, "latency")?,
                            credit_in,
                            credit_cost,
                            credits: credit_cost,
                            buffer: p.buffer as usize,
                            vc_order: vc_order.clone(),
                            queues: (0..vc_slots).map(|_| Queue::default()).collect(),
                            feeders: Vec::new(),
                            sources: Vec::new(),
                        });
                        index.insert(*node, outputs.len() - 1);
                        outputs.len() - 1
                    }
                };
                if let Some(&prev) = route.last() {
                    edges.push((prev, i));
                }
                route.push(i);
            }
            if let Some(&first) = route.first() {
                outputs[first].sources.push(fi);
            }
            flows.push(FlowState {
                id: f.id,
                vc: f.vc as usize,
                len: f.len,
                route,
                pending: VecDeque::new(),
            });
        }
        edges.sort_unstable();
        edges.dedup();
        for &(from, to) in &edges {
            outputs[to].feeders.push(from);
        }
        let order = downstream_first(outputs.len(), &edges);
        let mut result = SimResult::default();
        for f in &flows {
            result.delays.insert(f.id, Vec::new());
            result.injected.insert(f.id, 0);
            result.delivered.insert(f.id, 0);
        }
        Ok(Self {
            outputs,
            order,
            flows,
            trace,
            result,
            in_network: 0,
            moved: false,
        })
    }

    fn log(&mut self, cycle: u64, output: usize, vc: usize, flow: usize, kind: TraceKind) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TraceEvent {
                cycle,
                node: self.outputs[output].node,
                vc: vc as u32,
                flow: self.flows[flow].id,
                kind,
            });
        }
    }

    /// Whether `flit`, at the front of a queue of `output`, may leave.
    fn downstream_accepts(&self, output: usize, flit: &Flit) -> bool {
        let route = &self.flows[flit.flow].route;
        let Some(&next) = route.get(flit.hop + 1) else {
            return true;
        };
        let out = &self.outputs[next];
        let q = &out.queues[self.flows[flit.flow].vc];
        let room = out.buffer + self.outputs[output].latency as usize - 1;
        q.owner == Some((flit.flow, flit.packet)) && q.flits.len() < room
    }

    fn serve(&mut self, output: usize, now: u64) {
        {
            let out = &mut self.outputs[output];
            out.credits = (out.credits + out.credit_in).min(out.credit_cost);
        }
        let mut granted = None;
        let vcs = self.outputs[output].vc_order.clone();
        for vc in vcs {
            let Some(flit) = self.outputs[output].queues[vc].flits.front().copied() else {
                continue;
            };
            if flit.ready > now {
                continue;
            }
            if !self.downstream_accepts(output, &flit) {
                self.log(now, output, vc, flit.flow, TraceKind::Stall);
                continue;
            }
            let out = &self.outputs[output];
            if granted.is_none() && out.credits >= out.credit_cost {
                granted = Some(vc);
            } else {
                self.log(now, output, vc, flit.flow, TraceKind::Wait);
            }
        }
        let Some(vc) = granted else {
            return;
        };
        let latency = self.outputs[output].latency;
        let out = &mut self.outputs[output];
        out.credits -= out.credit_cost;
        let queue = &mut out.queues[vc];
        let mut flit = queue.flits.pop_front().expect("granted front flit");
        if flit.tail {
            queue.owner = None;
        }
        self.moved = true;
        self.log(now, output, vc, flit.flow, TraceKind::Send);
        let arrival = now + latency;
        match self.flows[flit.flow].route.get(flit.hop + 1).copied() {
            Some(next) => {
                flit.hop += 1;
                flit.ready = arrival;
                self.outputs[next].queues[vc].flits.push_back(flit);
            }
            None => {
                self.in_network -= 1;
                let id = self.flows[flit.flow].id;
                *self.result.delivered.get_mut(&id).expect("known flow") += 1;
                self.log(now, output, vc, flit.flow, TraceKind::Deliver);
                if flit.tail {
                    let state = &mut self.flows[flit.flow];
                    let release = state
                        .pending
                        .iter()
                        .position(|p| p.seq == flit.packet)
                        .map(|i| state.pending.remove(i).expect("indexed").release)
                        .expect("delivered packet is tracked");
                    self.result.delays.get_mut(&id).expect("known flow").push(arrival - release);
                }
            }
        }
    }

    /// Grants free queues of `output` to one waiting head flit each.
    fn allocate(&mut self, output: usize, now: u64) {
        for vc in 0..self.outputs[output].queues.len() {
            if self.outputs[output].queues[vc].owner.is_some() {
                continue;
            }
            let mut candidates: Vec<(usize, u64)> = Vec::new();
            for &feeder in &self.outputs[output].feeders {
                if let Some(flit) = self.outputs[feeder].queues[vc].flits.front() {
                    let next = self.flows[flit.flow].route.get(flit.hop + 1);
                    if flit.head && flit.ready <= now && next == Some(&output) {
                        candidates.push((flit.flow, flit.packet));
                    }
                }
            }
            for &fi in &self.outputs[output].sources {
                let f = &self.flows[fi];
                if f.vc != vc {
                    continue;
                }
                // the front packet still waiting to enter the network
                if let Some(p) = f.pending.iter().find(|p| p.sent < f.len) {
                    if p.sent == 0 && p.release <= now {
                        candidates.push((fi, p.seq));
                    }
                }
            }
            if candidates.is_empty() {
                continue;
            }
            candidates.sort_unstable();
            let queue = &mut self.outputs[output].queues[vc];
            let pick = queue
                .last_grant
                .and_then(|last| candidates.iter().find(|c| c.0 > last))
                .or(candidates.first())
                .copied()
                .expect("non-empty");
            queue.owner = Some(pick);
            queue.last_grant = Some(pick.0);
        }
    }

    fn inject(&mut self, now: u64) {
        for fi in 0..self.flows.len() {
            let f = &self.flows[fi];
            let Some(&first) = f.route.first() else {
                continue;
            };
            let vc = f.vc;
            let len = f.len;
            let Some(p) = f.pending.iter().find(|p| p.sent < len) else {
                continue;
            };
            if p.release > now {
                continue;
            }
            let (seq, sent) = (p.seq, p.sent);
            let out = &self.outputs[first];
            let queue = &out.queues[vc];
            if queue.owner != Some((fi, seq)) || queue.flits.len() >= out.buffer {
                self.log(now, first, vc, fi, TraceKind::Stall);
                continue;
            }
            self.outputs[first].queues[vc].flits.push_back(Flit {
                flow: fi,
                packet: seq,
                hop: 0,
                head: sent == 0,
                tail: sent + 1 == len,
                ready: now + 1,
            });
            let state = &mut self.flows[fi];
            state
                .pending
                .iter_mut()
                .find(|p| p.seq == seq)
                .expect("front packet")
                .sent += 1;
            self.in_network += 1;
            self.moved = true;
            let id = state.id;
            *self.result.injected.get_mut(&id).expect("known flow") += 1;
            self.log(now, first, vc, fi, TraceKind::Inject);
        }
    }

    fn log_holds(&mut self, now: u64) {
        if self.trace.is_none() {
            return;
        }
        for o in 0..self.outputs.len() {
            for vc in 0..self.outputs[o].queues.len() {
                if let Some((flow, _)) = self.outputs[o].queues[vc].owner {
                    self.log(now, o, vc, flow, TraceKind::Hold);
                }
            }
        }
    }

    fn queued_at_source(&self, now: u64) -> bool {
        self.flows
            .iter()
            .any(|f| f.pending.iter().any(|p| p.sent < f.len && p.release <= now))
    }
}

fn deadlock_window(config: &Config) -> u64 {
    let mut nodes: Vec<NodeId> = config.flows.iter().flat_map(|f| f.path.iter().copied()).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let span: u64 = nodes
        .iter()
        .map(|n| {
            let p = config.noc.params(n);
            let latency = p.latency.ceil().to_integer().to_u64().unwrap_or(1);
            let slot = (Rational::one() / &p.rate).ceil().to_integer().to_u64().unwrap_or(1);
            latency + slot
        })
        .sum();
    10 * span.max(1)
}

/// One run of `schedule`, numbered `run` for the offset and jitter draws.
pub fn simulate_run(
    config: &Config,
    schedule: &TrafficSchedule,
    run: u64,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<SimResult, SimError> {
    let (times, _) = releases(config, schedule, run)?;
    let mut net = Network::build(config, trace)?;
    let mut upcoming: Vec<VecDeque<u64>> = times.into_iter().map(VecDeque::from).collect();
    let mut seq = vec![0u64; net.flows.len()];
    let window = deadlock_window(config);
    let mut now = 0u64;
    let mut idle_since = 0u64;

    loop {
        for (fi, queue) in upcoming.iter_mut().enumerate() {
            while queue.front().is_some_and(|&t| t <= now) {
                let release = queue.pop_front().expect("checked");
                net.flows[fi].pending.push_back(Packet {
                    seq: seq[fi],
                    release,
                    sent: 0,
                });
                seq[fi] += 1;
            }
        }

        net.moved = false;
        for i in 0..net.order.len() {
            let output = net.order[i];
            net.serve(output, now);
            net.allocate(output, now);
        }
        net.inject(now);
        net.log_holds(now);

        let busy = net.in_network > 0 || net.queued_at_source(now);
        if net.moved || !busy {
            idle_since = now;
        } else if now - idle_since >= window {
            return Err(SimError::DeadlockDetected {
                cycle: now,
                window,
                pending: net.in_network,
            });
        }

        let more = upcoming.iter().filter_map(|q| q.front()).min().copied();
        if !busy && net.flows.iter().all(|f| f.pending.is_empty()) {
            match more {
                // nothing in flight: skip to the next release
                Some(t) => {
                    now = t.max(now + 1);
                    idle_since = now;
                }
                None => break,
            }
        } else {
            now += 1;
        }
    }

    net.result.undelivered = net.flows.iter().map(|f| f.pending.len() as u64).sum();
    net.result.cycles = now;
    Ok(net.result)
}

/// Run 0 of `schedule`.
pub fn simulate(config: &Config, schedule: &TrafficSchedule) -> Result<SimResult, SimError> {
    simulate_run(config, schedule, 0, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTightness {
    pub flow: FlowId,
    pub max_delay: u64,
    pub bound: f64,
    /// Largest observed delay over the bound.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tightness {
    pub flows: Vec<FlowTightness>,
    pub runs: u64,
}

impl Tightness {
    pub fn mean_tau(&self) -> f64 {
        if self.flows.is_empty() {
            return 0.0;
        }
        self.flows.iter().map(|f| f.tau).sum::<f64>() / self.flows.len() as f64
    }

    pub fn max_tau(&self) -> f64 {
        self.flows.iter().map(|f| f.tau).fold(0.0, f64::max)
    }
}

/// `D_f` of every analysed flow of `report`.
pub fn report_bounds(report: &AnalysisReport) -> BTreeMap<FlowId, Rational> {
    report.flows.iter().map(|a| (a.flow, a.bound.delay.clone())).collect()
}

fn stall_summary(config: &Config, schedule: &TrafficSchedule, run: u64, flow: FlowId) -> String {
    let mut events = Vec::new();
    if simulate_run(config, schedule, run, Some(&mut events)).is_err() {
        return "trace unavailable".into();
    }
    let mut stalls: BTreeMap<NodeId, u64> = BTreeMap::new();
    for e in events.iter().filter(|e| e.flow == flow) {
        if matches!(e.kind, TraceKind::Stall | TraceKind::Wait) {
            *stalls.entry(e.node).or_default() += 1;
        }
    }
    let mut top: Vec<_> = stalls.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let parts: Vec<String> = top.iter().take(4).map(|(n, c)| format!("{n} x{c}")).collect();
    format!("blocked cycles by node: {}", if parts.is_empty() { "none".into() } else { parts.join(", ") })
}

/// Runs `schedule.runs` seeded runs in parallel and compares the worst
/// observed delay of every flow with its bound.
pub fn tightness_sweep_with(
    config: &Config,
    bounds: &BTreeMap<FlowId, Rational>,
    schedule: &TrafficSchedule,
) -> Result<Tightness, SimError> {
    for f in &config.flows {
        if !bounds.contains_key(&f.id) {
            return Err(SimError::MissingBound(f.id));
        }
    }
    let outcomes: Vec<Result<SimResult, SimError>> = (0..schedule.runs)
        .into_par_iter()
        .map(|run| simulate_run(config, schedule, run, None))
        .collect();
    let mut worst: BTreeMap<FlowId, u64> = config.flows.iter().map(|f| (f.id, 0)).collect();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        let result = outcome?;
        for (flow, delays) in &result.delays {
            let Some(&observed) = delays.iter().max() else {
                continue;
            };
            let bound = &bounds[flow];
            if Rational::from_integer(observed.into()) > *bound {
                return Err(SimError::SafetyViolation {
                    flow: *flow,
                    run: run as u64,
                    seed: schedule.seed,
                    observed,
                    bound: crate::netcalc::to_f64(bound),
                    summary: stall_summary(config, schedule, run as u64, *flow),
                });
            }
            let w = worst.get_mut(flow).expect("known flow");
            *w = (*w).max(observed);
        }
    }
    let flows = worst
        .into_iter()
        .map(|(flow, max_delay)| {
            let bound = crate::netcalc::to_f64(&bounds[&flow]);
            FlowTightness {
                flow,
                max_delay,
                bound,
                tau: if bound > 0.0 { max_delay as f64 / bound } else { 0.0 },
            }
        })
        .collect();
    Ok(Tightness {
        flows,
        runs: schedule.runs,
    })
}

pub fn tightness_sweep(config: &Config, report: &AnalysisReport, schedule: &TrafficSchedule) -> Result<Tightness, SimError> {
    tightness_sweep_with(config, &report_bounds(report), schedule)
}
