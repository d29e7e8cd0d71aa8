use std::collections::BTreeSet;

use noc_timing::analyzer::{analyze_all, schedulability_check, AnalysisOptions, Method};
use noc_timing::fixtures::{isolated_flow, ladder};
use noc_timing::generate::{generate, GeneratorSpec, Paradigm};
use noc_timing::netcalc::int;
use noc_timing::{Config, NodeId};

fn mean_db_index(paradigm: Paradigm) -> f64 {
    let mut total = 0.0;
    for seed in 0..20 {
        let cfg = generate(&GeneratorSpec {
            paradigm,
            flows: 32,
            seed,
            ..GeneratorSpec::default()
        })
        .unwrap();
        let db: usize = cfg
            .flows
            .iter()
            .map(|f| cfg.flows.iter().filter(|g| g.id != f.id && g.path.iter().any(|n| f.path.contains(n))).count())
            .sum();
        total += db as f64 / cfg.flows.len() as f64;
    }
    total / 20.0
}

#[test]
fn quadrants_crowd_more_than_uniform() {
    let quadrant = mean_db_index(Paradigm::Quadrant);
    let uniform = mean_db_index(Paradigm::Uniform);
    assert!(quadrant > uniform, "quadrant {quadrant} vs uniform {uniform}");
}

/// Indirect blockers of `foi` found by repeated sweeps over every flow until
/// nothing new turns up. Single-VC configs only.
fn brute_ib(cfg: &Config, foi: u32) -> BTreeSet<(u32, usize)> {
    let f = cfg.flow(foi).unwrap();
    let spread = |k: u32, start: usize| -> Vec<NodeId> {
        let g = cfg.flow(k).unwrap();
        let mut held = 0;
        let mut nodes = Vec::new();
        for n in &g.path[start..] {
            nodes.push(*n);
            held += cfg.noc.params(n).buffer;
            if held >= g.len {
                break;
            }
        }
        nodes
    };
    let tail_after = |k: u32, reference: &[NodeId]| -> Option<usize> {
        let g = cfg.flow(k).unwrap();
        let last = (0..g.path.len()).rev().find(|&i| reference.contains(&g.path[i]))?;
        (last + 1 < g.path.len()).then_some(last + 1)
    };
    let crosses = |k: u32, nodes: &[NodeId]| cfg.flow(k).unwrap().path.iter().any(|n| nodes.contains(n));
    let direct: BTreeSet<u32> = cfg.flows.iter().map(|g| g.id).filter(|&k| k != foi && crosses(k, &f.path)).collect();

    let mut frontier: Vec<(u32, usize)> = direct.iter().filter_map(|&k| tail_after(k, &f.path).map(|s| (k, s))).collect();
    let mut found = BTreeSet::new();
    while let Some((owner, start)) = frontier.pop() {
        let nodes = spread(owner, start);
        for g in &cfg.flows {
            if g.id == foi || g.id == owner || direct.contains(&g.id) || !crosses(g.id, &nodes) {
                continue;
            }
            if let Some(s) = tail_after(g.id, &nodes) {
                if found.insert((g.id, s)) {
                    frontier.push((g.id, s));
                }
            }
        }
    }
    found
}

#[test]
fn congestion_indexes_match_enumeration() {
    let cfg = generate(&GeneratorSpec {
        flows: 16,
        seed: 3,
        ..GeneratorSpec::default()
    })
    .unwrap();
    let report = analyze_all(&cfg, AnalysisOptions::new(Method::Bata), None);
    assert!(report.errors.is_empty());
    let mut db_total = 0;
    let mut ib_total = 0;
    for a in &report.flows {
        let f = cfg.flow(a.flow).unwrap();
        let db: Vec<u32> = cfg
            .flows
            .iter()
            .filter(|g| g.id != f.id && g.path.iter().any(|n| f.path.contains(n)))
            .map(|g| g.id)
            .collect();
        assert_eq!(a.db, db, "flow {}", a.flow);
        let ib: BTreeSet<(u32, usize)> = a.ib.entries.iter().map(|s| (s.flow, s.start)).collect();
        assert_eq!(ib, brute_ib(&cfg, a.flow), "flow {}", a.flow);
        db_total += db.len();
        ib_total += ib.len();
    }
    let n = report.flows.len() as f64;
    assert_eq!(report.mean_db_index(), db_total as f64 / n);
    assert_eq!(report.mean_ib_index(), ib_total as f64 / n);
    assert!(ib_total > 0, "fixture should exercise indirect blocking");
}

/// Bigger buffers shorten subpaths: BATA sees fewer blockers, while G-BATA
/// splits chains of queued packets into more, shorter terms.
#[test]
fn buffer_growth_moves_the_methods_apart() {
    let delay = |method, buffer| {
        let report = analyze_all(&ladder(16, 400, buffer), AnalysisOptions::new(method), None);
        report.flows[0].bound.delay.clone()
    };
    assert!(delay(Method::Bata, 16) < delay(Method::Bata, 1));
    assert!(delay(Method::Gbata, 16) > delay(Method::Gbata, 1));
}

#[test]
fn schedulable_against_period() {
    let cfg = isolated_flow();
    let report = analyze_all(&cfg, AnalysisOptions::new(Method::Gbata), None);
    assert_eq!(report.flows[0].bound.delay, int(7));
    assert_eq!(schedulability_check(&report, &cfg), vec![(1, true)]);

    let mut flows = cfg.flows.clone();
    flows[0].period = 5;
    let tight = Config::new(cfg.noc.clone(), flows, cfg.priorities.clone()).unwrap();
    let report = analyze_all(&tight, AnalysisOptions::new(Method::Gbata), None);
    assert_eq!(report.flows[0].bound.delay, int(7));
    assert_eq!(schedulability_check(&report, &tight), vec![(1, false)]);
}
