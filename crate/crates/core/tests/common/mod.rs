//! Strategies and property checks shared by the property suite and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use noc_timing::analyzer::{analyze_flow, AnalysisOptions, Method};
use noc_timing::bata::bata_ib_set;
use noc_timing::gbata::construct_ib_graph;
use noc_timing::generate::{generate, GeneratorSpec};
use noc_timing::interference::{db_set, priority_view, spread_index, Subpath};
use noc_timing::netcalc::{backlog_bound, horizontal_deviation, int, output_curve, rat, ArrivalCurve, Rational, ServiceCurve};
use noc_timing::platform::{NodeParams, Port};
use noc_timing::wormsim::{simulate_run, TrafficSchedule};
use noc_timing::Config;

pub const CASES: u32 = 100;

/// Small positive rational `n / d`.
pub fn small_rational(max_num: i64) -> impl Strategy<Value = Rational> {
    (1..=max_num, 1..=8i64).prop_map(|(n, d)| rat(n, d))
}

pub fn service_curve() -> impl Strategy<Value = ServiceCurve> {
    ((1..=8i64, 1..=8i64), 0..=12i64).prop_map(|((n, d), t)| {
        // rates in (0, 1]
        let (n, d) = if n > d { (d, n) } else { (n, d) };
        ServiceCurve::new(rat(n, d), int(t))
    })
}

/// Leaky bucket with a rate well below any generated service rate.
pub fn arrival_curve() -> impl Strategy<Value = ArrivalCurve> {
    (small_rational(40), 1..=20i64).prop_map(|(sigma, n)| ArrivalCurve::new(sigma, rat(n, 200)))
}

#[derive(Debug, Clone)]
pub struct MeshCase {
    pub seed: u64,
    pub flows: usize,
    pub side: u32,
    pub buffer: u64,
    pub max_len: u64,
}

impl MeshCase {
    pub fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            flows: self.flows,
            width: self.side,
            height: self.side,
            node: NodeParams::new(int(1), int(1), self.buffer),
            len: (1, self.max_len),
            period: (60, 240),
            seed: self.seed,
            ..GeneratorSpec::default()
        }
    }

    pub fn config(&self) -> Option<Config> {
        generate(&self.spec()).ok()
    }
}

pub fn mesh_case(max_flows: usize) -> impl Strategy<Value = MeshCase> {
    (any::<u64>(), 1..=max_flows, 3..=6u32, 1..=4u64, 1..=6u64).prop_map(|(seed, flows, side, buffer, max_len)| MeshCase {
        seed,
        flows,
        side,
        buffer,
        max_len,
    })
}

pub fn concat_is_associative_and_commutative(
    a: &ServiceCurve,
    b: &ServiceCurve,
    c: &ServiceCurve,
) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.concat(b).concat(c), a.concat(&b.concat(c)));
    prop_assert_eq!(a.concat(b), b.concat(a));
    Ok(())
}

/// Pushing a flow through two servers in turn gives the same output curve
/// as pushing it through their concatenation.
pub fn output_composes(alpha: &ArrivalCurve, a: &ServiceCurve, b: &ServiceCurve) -> Result<(), TestCaseError> {
    let staged = output_curve(&output_curve(alpha, a).unwrap(), b).unwrap();
    let whole = output_curve(alpha, &a.concat(b)).unwrap();
    prop_assert_eq!(staged, whole);
    Ok(())
}

/// Delay grows with the burst and shrinks with more service; the
/// concatenated server never does worse than paying each hop separately.
pub fn delay_is_monotone(alpha: &ArrivalCurve, a: &ServiceCurve, b: &ServiceCurve, extra: &Rational) -> Result<(), TestCaseError> {
    let base = horizontal_deviation(alpha, a).unwrap().cycles;
    let burstier = ArrivalCurve::new(&alpha.sigma + extra, alpha.rho.clone());
    prop_assert!(horizontal_deviation(&burstier, a).unwrap().cycles >= base);
    prop_assert!(backlog_bound(&burstier, a).unwrap() >= backlog_bound(alpha, a).unwrap());
    prop_assert!(output_curve(&burstier, a).unwrap().sigma >= output_curve(alpha, a).unwrap().sigma);
    let slower = ServiceCurve::new(a.rate.clone(), &a.latency + extra);
    prop_assert!(horizontal_deviation(alpha, &slower).unwrap().cycles >= base);

    let first = horizontal_deviation(alpha, a).unwrap().cycles;
    let after = output_curve(alpha, a).unwrap();
    let second = horizontal_deviation(&after, b).unwrap().cycles;
    let whole = horizontal_deviation(alpha, &a.concat(b)).unwrap().cycles;
    prop_assert!(whole <= first + second);

    let t = extra.clone();
    prop_assert!(a.value_at(&(&t + int(1))) >= a.value_at(&t));
    prop_assert!(alpha.value_at(&(&t + int(1))) >= alpha.value_at(&t));
    Ok(())
}

/// Bigger buffers never spread a packet over more nodes, and a packet never
/// spreads past the end of its path.
pub fn spread_index_is_monotone(case: &MeshCase) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    let bigger = cfg.with_uniform_buffer(case.buffer + 1);
    for f in &cfg.flows {
        for i in 0..f.path.len() {
            let small = spread_index(f, i, &cfg.noc);
            let large = spread_index(f, i, &bigger.noc);
            prop_assert!(large <= small);
            prop_assert!(small >= 1);
            prop_assert!(i + small <= f.path.len());
        }
    }
    let roomy = cfg.with_uniform_buffer(case.max_len);
    for f in &cfg.flows {
        for i in 0..f.path.len() {
            prop_assert_eq!(spread_index(f, i, &roomy.noc), 1);
        }
    }
    Ok(())
}

/// The foi and its direct same-priority blockers never appear in its BATA
/// IB set, and no (flow, start) pair appears twice.
pub fn bata_ib_set_is_well_formed(case: &MeshCase) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    for f in &cfg.flows {
        let (ib, _) = bata_ib_set(f, &f.path, &cfg, &Default::default());
        let view = priority_view(f, &cfg);
        let direct: Vec<_> = db_set(f.id, &f.path, &cfg).into_iter().filter(|i| view.sp.contains(i)).collect();
        let flows = ib.flows();
        prop_assert!(!flows.contains(&f.id));
        prop_assert!(direct.iter().all(|i| !flows.contains(i)));
        let keys: HashSet<(u32, usize)> = ib.entries.iter().map(|s| (s.flow, s.start)).collect();
        prop_assert_eq!(keys.len(), ib.len());
        for s in &ib.entries {
            prop_assert!(s.len >= 1 && s.start + s.len <= cfg.flow(s.flow).unwrap().path.len());
        }
    }
    Ok(())
}

pub fn db_is_symmetric(case: &MeshCase) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    for f in &cfg.flows {
        let db = db_set(f.id, &f.path, &cfg);
        prop_assert!(!db.contains(&f.id));
        for g in &cfg.flows {
            if g.id == f.id {
                continue;
            }
            let back = db_set(g.id, &g.path, &cfg).contains(&f.id);
            prop_assert_eq!(db.contains(&g.id), back, "flows {} and {}", f.id, g.id);
        }
    }
    Ok(())
}

pub fn graph_edges_are_symmetric(case: &MeshCase) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    let bound = 1 + cfg.flows.iter().map(|f| f.path.len()).sum::<usize>();
    for f in &cfg.flows {
        let (graph, _) = construct_ib_graph(Subpath::whole(f), &cfg);
        prop_assert!(graph.len() <= bound);
        prop_assert!(graph.root().dependencies.is_empty());
        prop_assert_eq!(&construct_ib_graph(Subpath::whole(f), &cfg).0, &graph);
        for (i, v) in graph.vertices.iter().enumerate() {
            for &d in &v.dependencies {
                prop_assert!(graph.vertices[d].dependents.contains(&i));
            }
            for &d in &v.dependents {
                prop_assert!(graph.vertices[d].dependencies.contains(&i));
            }
        }
    }
    Ok(())
}

fn short_schedule(seed: u64) -> TrafficSchedule {
    TrafficSchedule {
        seed,
        runs: 1,
        horizon: Some(600),
        offsets: None,
    }
}

pub fn simulator_is_deterministic(case: &MeshCase, run: u64) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    let schedule = short_schedule(case.seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let a = simulate_run(&cfg, &schedule, run, Some(&mut first)).unwrap();
    let b = simulate_run(&cfg, &schedule, run, Some(&mut second)).unwrap();
    prop_assert_eq!(&a, &b);
    prop_assert_eq!(first, second);
    Ok(())
}

pub fn simulator_conserves_flits(case: &MeshCase, run: u64) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    let r = simulate_run(&cfg, &short_schedule(case.seed), run, None).unwrap();
    prop_assert_eq!(r.undelivered, 0);
    prop_assert_eq!(&r.injected, &r.delivered);
    for f in &cfg.flows {
        let packets = r.delays[&f.id].len() as u64;
        prop_assert!(packets >= 1);
        prop_assert_eq!(packets * f.len, r.delivered[&f.id]);
        prop_assert!(r.delays[&f.id].iter().all(|&d| d > 0));
    }
    Ok(())
}

/// The reported delay is the sum of its parts.
pub fn decomposition_adds_up(case: &MeshCase) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    for method in [Method::Bata, Method::Gbata] {
        for f in &cfg.flows {
            let b = analyze_flow(&cfg, f.id, AnalysisOptions::new(method)).unwrap().bound;
            let sum = &b.sigma / &b.rate + &b.t_p + &b.t_hp + &b.t_sp + &b.t_lp + &b.t_ib;
            prop_assert_eq!(b.delay, sum);
        }
    }
    Ok(())
}

/// Making one flow burstier or faster never lowers any bound.
pub fn bounds_grow_with_load(case: &MeshCase, pick: usize) -> Result<(), TestCaseError> {
    let Some(cfg) = case.config() else {
        return Ok(());
    };
    let idx = pick % cfg.flows.len();
    let mut flows = cfg.flows.clone();
    flows[idx].burst += 1;
    flows[idx].period = flows[idx].period * 9 / 10;
    let heavier = Config::new(cfg.noc.clone(), flows, cfg.priorities.clone()).unwrap();
    if !noc_timing::validate(&heavier).is_empty() {
        return Ok(());
    }
    for f in &cfg.flows {
        let before = analyze_flow(&cfg, f.id, AnalysisOptions::new(Method::Gbata)).unwrap().bound.delay;
        let after = analyze_flow(&heavier, f.id, AnalysisOptions::new(Method::Gbata));
        // heavier cross traffic may exhaust the residual rate
        if let Ok(after) = after {
            prop_assert!(after.bound.delay >= before, "flow {}", f.id);
        }
    }
    Ok(())
}

/// Two XY routes share at most one contiguous run of nodes.
pub fn xy_routes_never_reconverge(side: u32, a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> Result<(), TestCaseError> {
    let noc = noc_timing::NocModel::uniform(side, side, NodeParams::new(int(1), int(1), 1));
    let route = |(sx, sy, dx, dy): (u32, u32, u32, u32)| {
        noc_timing::platform::xy_route(&noc, (sx % side, sy % side), (dx % side, dy % side)).ok()
    };
    let (Some(p), Some(q)) = (route(a), route(b)) else {
        return Ok(());
    };
    let shared: Vec<usize> = p.iter().enumerate().filter(|(_, n)| q.contains(n)).map(|(i, _)| i).collect();
    prop_assert!(shared.windows(2).all(|w| w[1] == w[0] + 1));
    let (sx, sy, dx, dy) = (a.0 % side, a.1 % side, a.2 % side, a.3 % side);
    prop_assert_eq!(p.len() as u32, sx.abs_diff(dx) + sy.abs_diff(dy) + 1);
    prop_assert_eq!(p.last().unwrap().port, Port::Local);
    Ok(())
}
