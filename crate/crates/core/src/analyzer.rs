//! End-to-end delay bounds: direct blocking, recursive service curves and
//! the choice of indirect blocking method.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_traits::Zero;
use rayon::prelude::*;

use crate::bata::{bata_ib_set, bata_indirect_latency, BurstOracle, IbSet};
use crate::error::AnalysisError;
use crate::gbata::{construct_ib_graph, extract_ib_set, gbata_indirect_latency};
use crate::interference::{convergence, db_set, priority_view, PriorityView, Subpath};
use crate::netcalc::{output_curve, pmoo_leftover, to_f64, PmooNode, Rational, ServiceCurve, Unstable};
use crate::platform::{Config, Flow, FlowId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Bata,
    Gbata,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bata => "BATA",
            Method::Gbata => "GBATA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "bata" => Ok(Method::Bata),
            "gbata" => Ok(Method::Gbata),
            _ => Err(format!("unknown method {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub method: Method,
    /// Charge the largest same-priority packet at every node in `T_lp`
    /// instead of one flit per node crossed by lower priority traffic.
    pub strict_tlp: bool,
}

impl AnalysisOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            strict_tlp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundDecomposition {
    pub t_p: Rational,
    pub t_hp: Rational,
    pub t_sp: Rational,
    pub t_lp: Rational,
    pub t_ib: Rational,
    pub rate: Rational,
    /// Initial burst of the flow.
    pub sigma: Rational,
    pub delay: Rational,
    pub method: Method,
    /// False for BATA, whose bound assumes no back-to-back packets.
    pub cpq_safe: bool,
}

impl BoundDecomposition {
    pub fn t_db(&self) -> Rational {
        &self.t_hp + &self.t_sp + &self.t_lp
    }

    pub fn delay_f64(&self) -> f64 {
        to_f64(&self.delay)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub n_e2e: u64,
    pub n_iter: u64,
    /// Interferers dropped because their curve was being computed up the stack.
    pub cycle_cuts: u64,
    pub dt_total: Duration,
    pub dt_ib: Duration,
    pub dt_e2e: Duration,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.n_e2e += other.n_e2e;
        self.n_iter += other.n_iter;
        self.cycle_cuts += other.cycle_cuts;
        self.dt_total += other.dt_total;
        self.dt_ib += other.dt_ib;
        self.dt_e2e += other.dt_e2e;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowAnalysis {
    pub flow: FlowId,
    pub bound: BoundDecomposition,
    pub counters: Counters,
    pub db: Vec<FlowId>,
    pub ib: IbSet,
    /// Vertices of the top-level interference graph (G-BATA only).
    pub graph_vertices: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub method: Method,
    pub flows: Vec<FlowAnalysis>,
    pub errors: Vec<(FlowId, AnalysisError)>,
}

impl AnalysisReport {
    pub fn flow(&self, id: FlowId) -> Option<&FlowAnalysis> {
        self.flows.iter().find(|f| f.flow == id)
    }

    pub fn totals(&self) -> Counters {
        let mut c = Counters::default();
        for f in &self.flows {
            c.merge(&f.counters);
        }
        c
    }

    /// Average direct blocking index over analysed flows.
    pub fn mean_db_index(&self) -> f64 {
        mean(self.flows.iter().map(|f| f.db.len()))
    }

    /// Average indirect blocking index over analysed flows.
    pub fn mean_ib_index(&self) -> f64 {
        mean(self.flows.iter().map(|f| f.ib.len()))
    }
}

fn mean(values: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = values.fold((0usize, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Components of the bound over `path[..len]` of one flow.
#[derive(Debug, Clone)]
struct Parts {
    rate: Rational,
    t_p: Rational,
    t_hp: Rational,
    t_sp: Rational,
    t_lp: Rational,
    t_ib: Rational,
    ib: IbSet,
    graph_vertices: Option<usize>,
}

impl Parts {
    fn curve(&self) -> ServiceCurve {
        ServiceCurve {
            rate: self.rate.clone(),
            latency: &self.t_p + &self.t_hp + &self.t_sp + &self.t_lp + &self.t_ib,
        }
    }
}

/// One analysis of one flow of interest; owns its memo table and counters.
struct Engine<'a> {
    config: &'a Config,
    options: AnalysisOptions,
    memo: HashMap<(FlowId, usize), ServiceCurve>,
    /// `(flow, prefix length)` of the curves being computed.
    active: HashSet<(FlowId, usize)>,
    views: HashMap<FlowId, PriorityView>,
    n_e2e: u64,
    n_iter: u64,
    cycle_cuts: u64,
    dt_ib: Duration,
}

impl<'a> Engine<'a> {
    fn new(config: &'a Config, options: AnalysisOptions) -> Self {
        Self {
            config,
            options,
            memo: HashMap::new(),
            active: HashSet::new(),
            views: HashMap::new(),
            n_e2e: 0,
            n_iter: 0,
            cycle_cuts: 0,
            dt_ib: Duration::ZERO,
        }
    }

    fn flow(&self, id: FlowId) -> Result<&'a Flow, AnalysisError> {
        self.config.flow(id).ok_or(AnalysisError::UnknownFlow(id))
    }

    fn view(&mut self, f: &Flow) -> PriorityView {
        let config = self.config;
        self.views
            .entry(f.id)
            .or_insert_with(|| priority_view(f, config))
            .clone()
    }

    /// Service curve of `id` over the first `len` nodes of its path, or
    /// `None` when that curve is itself still being computed. The caller then
    /// leaves the interferer out; the curves built meanwhile are memoized as is.
    fn e2e(&mut self, id: FlowId, len: usize) -> Result<Option<ServiceCurve>, AnalysisError> {
        self.n_e2e += 1;
        if let Some(curve) = self.memo.get(&(id, len)) {
            return Ok(Some(curve.clone()));
        }
        if self.active.contains(&(id, len)) {
            self.cycle_cuts += 1;
            return Ok(None);
        }
        let curve = self.frame(id, len)?.curve();
        self.memo.insert((id, len), curve.clone());
        Ok(Some(curve))
    }

    fn frame(&mut self, id: FlowId, len: usize) -> Result<Parts, AnalysisError> {
        self.active.insert((id, len));
        let parts = self.compute(id, len);
        self.active.remove(&(id, len));
        parts
    }

    fn compute(&mut self, id: FlowId, len: usize) -> Result<Parts, AnalysisError> {
        let config = self.config;
        let f = self.flow(id)?;
        let prefix = &f.path[..len];
        let view = self.view(f);
        let flit = config.noc.flit_size();

        let shp = view.shp();
        let mut servers = Vec::with_capacity(prefix.len());
        let mut t_p = Rational::zero();
        for r in prefix {
            let params = config.noc.params(r);
            t_p += &params.latency;
            servers.push(PmooNode {
                node: Some(*r),
                rate: params.rate.clone(),
                latency: params.latency.clone(),
                cross_rate: self.load_at(r, |j| shp.contains(&j)),
                blocking: Rational::zero(),
            });
        }
        let rate = pmoo_leftover(&servers, &[])?.rate;
        if f.rho() > rate {
            let at = servers
                .iter()
                .min_by(|a, b| (&a.rate - &a.cross_rate).cmp(&(&b.rate - &b.cross_rate)))
                .and_then(|s| s.node);
            return Err(Unstable {
                node: at,
                residual: &rate - f.rho(),
            }
            .into());
        }

        // Largest packet that can hold node r against f, per node of the prefix.
        let lp_here = |r: &NodeId| config.flows_at(r).iter().any(|j| view.lp.contains(j));
        let slp_len: Vec<Rational> = prefix
            .iter()
            .map(|r| {
                let sp_max = config
                    .flows_at(r)
                    .iter()
                    .filter(|j| view.sp.contains(j))
                    .map(|j| config.flow(*j).expect("indexed flow").len)
                    .max()
                    .unwrap_or(0);
                let sp_max = Rational::from_integer((sp_max as i64).into());
                if lp_here(r) && flit > sp_max {
                    flit.clone()
                } else {
                    sp_max
                }
            })
            .collect();

        let mut t_hp = Rational::zero();
        let mut t_sp = Rational::zero();
        for i in db_set(id, prefix, config) {
            let is_hp = view.hp.contains(&i);
            if !is_hp && !view.sp.contains(&i) {
                continue;
            }
            let other = self.flow(i)?;
            let cv = convergence(&other.path, prefix).expect("interferer crosses the prefix");
            let Some(burst) = self.burst_at(i, config.position(i, &cv).expect("cv on path"))? else {
                continue;
            };
            let shared = prefix
                .iter()
                .zip(&slp_len)
                .filter(|(r, _)| config.crosses(i, r))
                .map(|(r, l)| {
                    let p = config.noc.params(r);
                    &p.latency + l / &p.rate
                })
                .fold(Rational::zero(), |a, b| a + b);
            let term = (burst + other.rho() * shared) / &rate;
            if is_hp {
                t_hp += term;
            } else {
                t_sp += term;
            }
        }

        let mut t_lp = Rational::zero();
        for (r, l) in prefix.iter().zip(&slp_len) {
            let per_node = if self.options.strict_tlp {
                l.clone()
            } else if lp_here(r) {
                flit.clone()
            } else {
                Rational::zero()
            };
            t_lp += per_node / &config.noc.params(r).rate;
        }

        let (t_ib, ib, graph_vertices) = self.indirect(f, len)?;
        Ok(Parts {
            rate,
            t_p,
            t_hp,
            t_sp,
            t_lp,
            t_ib,
            ib,
            graph_vertices,
        })
    }

    fn load_at(&self, r: &NodeId, include: impl Fn(FlowId) -> bool) -> Rational {
        self.config
            .flows_at(r)
            .iter()
            .filter(|j| include(**j))
            .map(|j| self.config.flow(*j).expect("indexed flow").rho())
            .fold(Rational::zero(), |a, b| a + b)
    }

    fn indirect(&mut self, f: &Flow, len: usize) -> Result<(Rational, IbSet, Option<usize>), AnalysisError> {
        let config = self.config;
        let started = Instant::now();
        match self.options.method {
            Method::Bata => {
                let (ib, iterations) = bata_ib_set(f, &f.path[..len], config, &Default::default());
                self.dt_ib += started.elapsed();
                self.n_iter += iterations as u64;
                let t_ib = bata_indirect_latency(&ib, config, self)?;
                Ok((t_ib, ib, None))
            }
            Method::Gbata => {
                let (graph, calls) = construct_ib_graph(Subpath::new(f.id, 0, len), config);
                let ib = extract_ib_set(&graph, f, config);
                self.dt_ib += started.elapsed();
                self.n_iter += calls as u64;
                let t_ib = gbata_indirect_latency(&ib, config, self)?;
                Ok((t_ib, ib, Some(graph.len())))
            }
        }
    }
}

impl BurstOracle for Engine<'_> {
    /// Burst on entry to `path[index]`: the initial curve pushed through the
    /// service of the nodes before it.
    fn burst_at(&mut self, flow: FlowId, index: usize) -> Result<Option<Rational>, AnalysisError> {
        let f = self.flow(flow)?;
        if index == 0 {
            return Ok(Some(f.sigma()));
        }
        let Some(curve) = self.e2e(flow, index)? else {
            return Ok(None);
        };
        let out = output_curve(&f.arrival_curve(), &curve).map_err(|mut e| {
            e.node = Some(f.path[index - 1]);
            e
        })?;
        Ok(Some(out.sigma))
    }
}

/// Bound on the delay of flow `id` across its whole path.
pub fn analyze_flow(config: &Config, id: FlowId, options: AnalysisOptions) -> Result<FlowAnalysis, AnalysisError> {
    let started = Instant::now();
    let f = config.flow(id).ok_or(AnalysisError::UnknownFlow(id))?;
    let mut engine = Engine::new(config, options);
    engine.n_e2e += 1;
    let parts = engine.frame(id, f.path.len())?;
    let sigma = f.sigma();
    let delay = &sigma / &parts.rate + &parts.t_hp + &parts.t_sp + &parts.t_lp + &parts.t_ib + &parts.t_p;
    let dt_total = started.elapsed();
    Ok(FlowAnalysis {
        flow: id,
        bound: BoundDecomposition {
            t_p: parts.t_p,
            t_hp: parts.t_hp,
            t_sp: parts.t_sp,
            t_lp: parts.t_lp,
            t_ib: parts.t_ib,
            rate: parts.rate,
            sigma,
            delay,
            method: options.method,
            cpq_safe: options.method == Method::Gbata,
        },
        counters: Counters {
            n_e2e: engine.n_e2e,
            n_iter: engine.n_iter,
            cycle_cuts: engine.cycle_cuts,
            dt_total,
            dt_ib: engine.dt_ib,
            dt_e2e: dt_total.saturating_sub(engine.dt_ib),
        },
        db: db_set(id, &f.path, config),
        ib: parts.ib,
        graph_vertices: parts.graph_vertices,
    })
}

/// Service curve of `id` over `path[..len]`, with the counters of that computation.
pub fn end_to_end_service_curve(
    config: &Config,
    id: FlowId,
    len: usize,
    options: AnalysisOptions,
) -> Result<(ServiceCurve, Counters), AnalysisError> {
    let mut engine = Engine::new(config, options);
    let curve = engine.e2e(id, len)?.expect("empty stack cannot cut");
    Ok((
        curve,
        Counters {
            n_e2e: engine.n_e2e,
            n_iter: engine.n_iter,
            cycle_cuts: engine.cycle_cuts,
            dt_ib: engine.dt_ib,
            ..Counters::default()
        },
    ))
}

/// Direct blocking terms `(T_hp, T_sp, T_lp, R_f)` of a whole path.
pub fn direct_blocking_latency(
    config: &Config,
    id: FlowId,
    options: AnalysisOptions,
) -> Result<(Rational, Rational, Rational, Rational), AnalysisError> {
    let a = analyze_flow(config, id, options)?;
    Ok((a.bound.t_hp, a.bound.t_sp, a.bound.t_lp, a.bound.rate))
}

/// Analyses every flow; `jobs` bounds the worker threads when given.
pub fn analyze_all(config: &Config, options: AnalysisOptions, jobs: Option<usize>) -> AnalysisReport {
    let run = || -> Vec<Result<FlowAnalysis, (FlowId, AnalysisError)>> {
        config
            .flows
            .par_iter()
            .map(|f| analyze_flow(config, f.id, options).map_err(|e| (f.id, e)))
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    };
    let mut report = AnalysisReport {
        method: options.method,
        flows: Vec::new(),
        errors: Vec::new(),
    };
    for r in results {
        match r {
            Ok(a) => report.flows.push(a),
            Err(e) => report.errors.push(e),
        }
    }
    report
}

/// `D_f <= P_f` for each analysed flow.
pub fn schedulability_check(report: &AnalysisReport, config: &Config) -> Vec<(FlowId, bool)> {
    report
        .flows
        .iter()
        .map(|a| {
            let period = config.flow(a.flow).map(|f| f.period).unwrap_or(0);
            (a.flow, a.bound.delay <= Rational::from_integer((period as i64).into()))
        })
        .collect()
}
