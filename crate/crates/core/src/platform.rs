//! Mesh platform, flows and configuration documents.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::netcalc::{int, parse_rational, ArrivalCurve, Rational};

pub type FlowId = u32;

/// Output direction of a router. `y` grows northward, `x` eastward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    North,
    South,
    East,
    West,
    Local,
}

impl Port {
    pub fn letter(self) -> char {
        match self {
            Port::North => 'N',
            Port::South => 'S',
            Port::East => 'E',
            Port::West => 'W',
            Port::Local => 'L',
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Port {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "north" => Ok(Port::North),
            "s" | "south" => Ok(Port::South),
            "e" | "east" => Ok(Port::East),
            "w" | "west" => Ok(Port::West),
            "l" | "local" => Ok(Port::Local),
            _ => Err(format!("unknown port {s:?}")),
        }
    }
}

impl Serialize for Port {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.letter().to_string())
    }
}

impl<'de> Deserialize<'de> for Port {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

/// A router output: the unit of contention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub x: u32,
    pub y: u32,
    pub port: Port,
}

impl NodeId {
    pub fn new(x: u32, y: u32, port: Port) -> Self {
        Self { x, y, port }
    }

    pub fn router(&self) -> (u32, u32) {
        (self.x, self.y)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})-{}", self.x, self.y, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeParams {
    pub rate: Rational,
    pub latency: Rational,
    /// Flits per VC.
    pub buffer: u64,
}

impl NodeParams {
    pub fn new(rate: Rational, latency: Rational, buffer: u64) -> Self {
        Self { rate, latency, buffer }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NocModel {
    pub width: u32,
    pub height: u32,
    pub default_params: NodeParams,
    pub overrides: BTreeMap<NodeId, NodeParams>,
    pub flit_size: u64,
    pub vc_count: u32,
}

impl NocModel {
    pub fn uniform(width: u32, height: u32, params: NodeParams) -> Self {
        Self {
            width,
            height,
            default_params: params,
            overrides: BTreeMap::new(),
            flit_size: 1,
            vc_count: 1,
        }
    }

    pub fn params(&self, node: &NodeId) -> &NodeParams {
        self.overrides.get(node).unwrap_or(&self.default_params)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    pub fn flit_size(&self) -> Rational {
        int(self.flit_size as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: FlowId,
    pub src: (u32, u32),
    pub dst: (u32, u32),
    /// Maximum packet length in flits.
    pub len: u64,
    /// Period in cycles.
    pub period: u64,
    /// Packets released per activation.
    pub burst: u64,
    pub jitter: Rational,
    pub vc: u32,
    pub path: Vec<NodeId>,
}

impl Flow {
    pub fn rho(&self) -> Rational {
        Rational::new((self.len as i64).into(), (self.period as i64).into())
    }

    /// `burst * len + jitter * rho`.
    pub fn sigma(&self) -> Rational {
        int((self.burst * self.len) as i64) + &self.jitter * self.rho()
    }

    /// Burst of a single packet, `len + jitter * rho`.
    pub fn packet_sigma(&self) -> Rational {
        int(self.len as i64) + &self.jitter * self.rho()
    }

    pub fn arrival_curve(&self) -> ArrivalCurve {
        ArrivalCurve::new(self.sigma(), self.rho())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("core ({0},{1}) is outside the grid")]
    OutOfGrid(u32, u32),
    #[error("source and destination are both ({0},{1})")]
    Degenerate(u32, u32),
}

/// Dimension-ordered route: all X hops, then all Y hops, then the local port.
pub fn xy_route(model: &NocModel, src: (u32, u32), dst: (u32, u32)) -> Result<Vec<NodeId>, RouteError> {
    for (x, y) in [src, dst] {
        if !model.contains(x, y) {
            return Err(RouteError::OutOfGrid(x, y));
        }
    }
    if src == dst {
        return Err(RouteError::Degenerate(src.0, src.1));
    }
    Ok(xy_path(src, dst))
}

fn xy_path(src: (u32, u32), dst: (u32, u32)) -> Vec<NodeId> {
    let (mut x, mut y) = src;
    let mut path = Vec::new();
    while x != dst.0 {
        if x < dst.0 {
            path.push(NodeId::new(x, y, Port::East));
            x += 1;
        } else {
            path.push(NodeId::new(x, y, Port::West));
            x -= 1;
        }
    }
    while y != dst.1 {
        if y < dst.1 {
            path.push(NodeId::new(x, y, Port::North));
            y += 1;
        } else {
            path.push(NodeId::new(x, y, Port::South));
            y -= 1;
        }
    }
    path.push(NodeId::new(x, y, Port::Local));
    path
}

pub fn base_latency(flow: &Flow, model: &NocModel) -> Rational {
    flow.path
        .iter()
        .fold(Rational::zero(), |acc, n| acc + &model.params(n).latency)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid number {0:?}")]
    Number(String),
    #[error("flow id {0} appears more than once")]
    DuplicateFlowId(FlowId),
    #[error("flow {flow}: {source}")]
    Route {
        flow: FlowId,
        #[source]
        source: RouteError,
    },
}

/// Flow set on a platform, with lookup tables used by the analyses.
#[derive(Debug, Clone)]
pub struct Config {
    pub noc: NocModel,
    pub flows: Vec<Flow>,
    /// VC indices from highest to lowest priority.
    pub priorities: Vec<u32>,
    by_id: HashMap<FlowId, usize>,
    crossing: HashMap<NodeId, Vec<FlowId>>,
    positions: HashMap<FlowId, HashMap<NodeId, usize>>,
}

impl Config {
    pub fn new(noc: NocModel, flows: Vec<Flow>, priorities: Vec<u32>) -> Result<Self, ConfigError> {
        let mut by_id = HashMap::new();
        for (i, f) in flows.iter().enumerate() {
            if by_id.insert(f.id, i).is_some() {
                return Err(ConfigError::DuplicateFlowId(f.id));
            }
        }
        let mut crossing: HashMap<NodeId, Vec<FlowId>> = HashMap::new();
        let mut positions = HashMap::new();
        for f in &flows {
            let mut pos = HashMap::new();
            for (i, n) in f.path.iter().enumerate() {
                pos.entry(*n).or_insert(i);
            }
            for n in pos.keys() {
                crossing.entry(*n).or_default().push(f.id);
            }
            positions.insert(f.id, pos);
        }
        for ids in crossing.values_mut() {
            ids.sort_unstable();
        }
        Ok(Self {
            noc,
            flows,
            priorities,
            by_id,
            crossing,
            positions,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        raw.into_config()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawConfig::from_config(self)).expect("config serializes")
    }

    pub fn flow(&self, id: FlowId) -> Option<&Flow> {
        self.by_id.get(&id).map(|&i| &self.flows[i])
    }

    /// Ids of flows whose path contains `node`, ascending.
    pub fn flows_at(&self, node: &NodeId) -> &[FlowId] {
        self.crossing.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Index of `node` in the path of flow `id`.
    pub fn position(&self, id: FlowId, node: &NodeId) -> Option<usize> {
        self.positions.get(&id).and_then(|p| p.get(node)).copied()
    }

    pub fn crosses(&self, id: FlowId, node: &NodeId) -> bool {
        self.position(id, node).is_some()
    }

    /// Smaller rank means higher priority. Unlisted VCs rank below listed ones.
    pub fn priority_rank(&self, vc: u32) -> usize {
        match self.priorities.iter().position(|&v| v == vc) {
            Some(p) => p,
            None => self.priorities.len() + vc as usize,
        }
    }

    pub fn flow_ids(&self) -> Vec<FlowId> {
        self.flows.iter().map(|f| f.id).collect()
    }

    /// Copy with every node buffer set to `buffer`.
    pub fn with_uniform_buffer(&self, buffer: u64) -> Config {
        let mut noc = self.noc.clone();
        noc.default_params.buffer = buffer;
        for p in noc.overrides.values_mut() {
            p.buffer = buffer;
        }
        Config::new(noc, self.flows.clone(), self.priorities.clone()).expect("ids unchanged")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("node {node}: load {load} exceeds rate {rate}")]
    OverUtilization {
        node: NodeId,
        load: Rational,
        rate: Rational,
    },
    #[error("flows {first} and {second} meet again after diverging")]
    Reconvergence { first: FlowId, second: FlowId },
    #[error("flow {flow}: node {node} is outside the grid")]
    OutOfGrid { flow: FlowId, node: NodeId },
    #[error("flow {flow}: source equals destination")]
    Degenerate { flow: FlowId },
    #[error("flow {flow}: {reason}")]
    BadFlow { flow: FlowId, reason: String },
    #[error("platform: {0}")]
    BadPlatform(String),
}

/// Returns every violated model assumption; empty means valid.
pub fn validate(config: &Config) -> Vec<Violation> {
    let mut out = Vec::new();
    let noc = &config.noc;
    if noc.vc_count == 0 {
        out.push(Violation::BadPlatform("vc_count must be at least 1".into()));
    }
    if noc.flit_size == 0 {
        out.push(Violation::BadPlatform("flit_size must be at least 1".into()));
    }
    let check_params = |what: String, p: &NodeParams, out: &mut Vec<Violation>| {
        if !p.rate.is_positive() || p.latency.is_negative() || p.buffer == 0 {
            out.push(Violation::BadPlatform(format!("{what}: need rate > 0, latency >= 0, buffer >= 1")));
        }
    };
    check_params("default".into(), &noc.default_params, &mut out);
    for (n, p) in &noc.overrides {
        if !noc.contains(n.x, n.y) {
            out.push(Violation::BadPlatform(format!("override {n} is outside the grid")));
        }
        check_params(format!("override {n}"), p, &mut out);
    }

    for f in &config.flows {
        if f.src == f.dst {
            out.push(Violation::Degenerate { flow: f.id });
        }
        let bad = |reason: &str| Violation::BadFlow {
            flow: f.id,
            reason: reason.to_string(),
        };
        if f.len == 0 || f.period == 0 || f.burst == 0 {
            out.push(bad("len, period and burst must be positive"));
        }
        if f.jitter.is_negative() {
            out.push(bad("negative jitter"));
        }
        if f.vc >= noc.vc_count {
            out.push(bad("vc index exceeds vc_count"));
        }
        if f.path.is_empty() {
            out.push(bad("empty path"));
            continue;
        }
        for n in &f.path {
            if !noc.contains(n.x, n.y) {
                out.push(Violation::OutOfGrid { flow: f.id, node: *n });
            }
        }
        if f.path[0].router() != f.src {
            out.push(bad("path does not start at the source router"));
        }
        let last = f.path[f.path.len() - 1];
        if last.router() != f.dst || last.port != Port::Local {
            out.push(bad("path does not end at the destination local port"));
        }
        if f.path[..f.path.len() - 1].iter().any(|n| n.port == Port::Local) {
            out.push(bad("local port before the end of the path"));
        }
        let distinct: HashSet<_> = f.path.iter().collect();
        if distinct.len() != f.path.len() {
            out.push(bad("path visits a node twice"));
        }
    }

    let mut nodes: Vec<_> = config.crossing.keys().copied().collect();
    nodes.sort();
    for node in nodes {
        let load = config
            .flows_at(&node)
            .iter()
            .map(|id| config.flow(*id).expect("indexed").rho())
            .fold(Rational::zero(), |a, b| a + b);
        let rate = noc.params(&node).rate.clone();
        if load > rate {
            out.push(Violation::OverUtilization { node, load, rate });
        }
    }

    for (i, a) in config.flows.iter().enumerate() {
        for b in &config.flows[i + 1..] {
            if !shares_one_segment(config, a, b) {
                out.push(Violation::Reconvergence {
                    first: a.id,
                    second: b.id,
                });
            }
        }
    }
    out
}

/// True when the shared nodes of `a` and `b` form one contiguous run in both paths.
fn shares_one_segment(config: &Config, a: &Flow, b: &Flow) -> bool {
    let pairs: Vec<(usize, usize)> = a
        .path
        .iter()
        .enumerate()
        .filter_map(|(ia, n)| config.position(b.id, n).map(|ib| (ia, ib)))
        .collect();
    pairs.windows(2).all(|w| w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)
}

/// Exact number accepted as a JSON number or as a `"a/b"` string.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Exact(Rational);

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let text = match &value {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => return Err(D::Error::custom(format!("expected a number, got {other}"))),
        };
        parse_rational(&text)
            .map(Exact)
            .ok_or_else(|| D::Error::custom(format!("invalid number {text:?}")))
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = &self.0;
        if v.is_integer() {
            if let Some(i) = v.to_integer().to_i64() {
                return s.serialize_i64(i);
            }
        }
        if terminating_decimal(v) {
            if let Some(f) = v.to_f64() {
                if parse_rational(&serde_json::Number::from_f64(f).map(|n| n.to_string()).unwrap_or_default()).as_ref()
                    == Some(v)
                {
                    return s.serialize_f64(f);
                }
            }
        }
        s.serialize_str(&format!("{}/{}", v.numer(), v.denom()))
    }
}

fn terminating_decimal(v: &Rational) -> bool {
    let mut d = v.denom().clone();
    for p in [2u32, 5] {
        let p = p.into();
        while d.is_multiple_of(&p) {
            d /= &p;
        }
    }
    d.is_one()
}

fn one_u64() -> u64 {
    1
}

fn one_u32() -> u32 {
    1
}

fn zero_exact() -> Exact {
    Exact(Rational::zero())
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    rate: Exact,
    latency: Exact,
    buffer: u64,
}

#[derive(Serialize, Deserialize)]
struct RawOverride {
    x: u32,
    y: u32,
    port: Port,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latency: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    buffer: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawNoc {
    width: u32,
    height: u32,
    default: RawParams,
    #[serde(default)]
    overrides: Vec<RawOverride>,
    #[serde(default = "one_u64")]
    flit_size: u64,
    #[serde(default = "one_u32")]
    vc_count: u32,
}

#[derive(Serialize, Deserialize)]
struct RawFlow {
    id: FlowId,
    src: [u32; 2],
    dst: [u32; 2],
    len: u64,
    period: u64,
    #[serde(default = "one_u64")]
    burst: u64,
    #[serde(default = "zero_exact")]
    jitter: Exact,
    #[serde(default)]
    vc: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<Vec<(u32, u32, Port)>>,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    noc: RawNoc,
    flows: Vec<RawFlow>,
    #[serde(default)]
    priorities: Vec<u32>,
}

impl RawConfig {
    fn into_config(self) -> Result<Config, ConfigError> {
        let d = self.noc.default;
        let default_params = NodeParams::new(d.rate.0, d.latency.0, d.buffer);
        let mut overrides = BTreeMap::new();
        for o in self.noc.overrides {
            let params = NodeParams {
                rate: o.rate.map(|r| r.0).unwrap_or_else(|| default_params.rate.clone()),
                latency: o.latency.map(|r| r.0).unwrap_or_else(|| default_params.latency.clone()),
                buffer: o.buffer.unwrap_or(default_params.buffer),
            };
            overrides.insert(NodeId::new(o.x, o.y, o.port), params);
        }
        let noc = NocModel {
            width: self.noc.width,
            height: self.noc.height,
            default_params,
            overrides,
            flit_size: self.noc.flit_size,
            vc_count: self.noc.vc_count,
        };
        let mut flows = Vec::with_capacity(self.flows.len());
        for f in self.flows {
            let src = (f.src[0], f.src[1]);
            let dst = (f.dst[0], f.dst[1]);
            let path = match f.path {
                Some(nodes) => nodes.into_iter().map(|(x, y, p)| NodeId::new(x, y, p)).collect(),
                None => xy_route(&noc, src, dst).map_err(|source| ConfigError::Route { flow: f.id, source })?,
            };
            flows.push(Flow {
                id: f.id,
                src,
                dst,
                len: f.len,
                period: f.period,
                burst: f.burst,
                jitter: f.jitter.0,
                vc: f.vc,
                path,
            });
        }
        Config::new(noc, flows, self.priorities)
    }

    fn from_config(config: &Config) -> Self {
        let noc = &config.noc;
        let params = |p: &NodeParams| RawParams {
            rate: Exact(p.rate.clone()),
            latency: Exact(p.latency.clone()),
            buffer: p.buffer,
        };
        RawConfig {
            noc: RawNoc {
                width: noc.width,
                height: noc.height,
                default: params(&noc.default_params),
                overrides: noc
                    .overrides
                    .iter()
                    .map(|(n, p)| RawOverride {
                        x: n.x,
                        y: n.y,
                        port: n.port,
                        rate: Some(Exact(p.rate.clone())),
                        latency: Some(Exact(p.latency.clone())),
                        buffer: Some(p.buffer),
                    })
                    .collect(),
                flit_size: noc.flit_size,
                vc_count: noc.vc_count,
            },
            flows: config
                .flows
                .iter()
                .map(|f| {
                    let routed = f.src != f.dst
                        && noc.contains(f.src.0, f.src.1)
                        && noc.contains(f.dst.0, f.dst.1)
                        && xy_path(f.src, f.dst) == f.path;
                    RawFlow {
                        id: f.id,
                        src: [f.src.0, f.src.1],
                        dst: [f.dst.0, f.dst.1],
                        len: f.len,
                        period: f.period,
                        burst: f.burst,
                        jitter: Exact(f.jitter.clone()),
                        vc: f.vc,
                        path: (!routed).then(|| f.path.iter().map(|n| (n.x, n.y, n.port)).collect()),
                    }
                })
                .collect(),
            priorities: config.priorities.clone(),
        }
    }
}
