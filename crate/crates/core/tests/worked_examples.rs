use noc_timing::analyzer::{analyze_flow, end_to_end_service_curve, AnalysisOptions, Method};
use noc_timing::bata::{bata_ib_set, bata_indirect_latency, vc_service_curve, InitialBurst};
use noc_timing::fixtures::{cpq_chain, isolated_flow, subpath_chain};
use noc_timing::gbata::{construct_ib_graph, extract_ib_set, gbata_indirect_latency};
use noc_timing::interference::{db_set, subpath_relative, Subpath};
use noc_timing::netcalc::{int, output_curve, rat, to_f64, Rational, ServiceCurve};
use noc_timing::{Config, NodeId, Port};

fn close(actual: &Rational, expected: f64) {
    let a = to_f64(actual);
    assert!((a - expected).abs() < 1e-9, "{a} != {expected}");
}

fn bata() -> AnalysisOptions {
    AnalysisOptions::new(Method::Bata)
}

fn gbata() -> AnalysisOptions {
    AnalysisOptions::new(Method::Gbata)
}

/// The burst chain, recomputed independently with closed forms.
mod oracle {
    use super::*;

    pub fn chain() -> (Rational, Rational, Rational) {
        let (r, t, rho, sigma, l) = (int(1), int(1), rat(1, 20), int(3), int(3));
        let s1 = &sigma + int(2) * &rho * &t;
        let left = &r - &rho;
        let s2 = &sigma + &rho * (int(3) * &t + (&s1 + &rho * (&t + &l / &r)) / &left);
        let s3 = &sigma + &rho * (&t + (&s2 + &rho * (&t + &l / &r)) / &left);
        (s1, s2, s3)
    }
}

#[test]
fn direct_blocking_single_packet() {
    let cfg = subpath_chain(1);
    let a = analyze_flow(&cfg, 1, bata()).unwrap();
    close(&(a.bound.t_p.clone() + a.bound.t_db()), 7.368421053);
    assert_eq!(a.bound.t_p, int(4));
    assert_eq!(a.bound.t_hp, int(0));
    assert_eq!(a.bound.t_lp, int(0));
    assert_eq!(a.bound.rate, rat(19, 20));
    // exact value: 4 + 3.2 / 0.95
    assert_eq!(&a.bound.t_p + a.bound.t_db(), int(4) + rat(16, 5) / rat(19, 20));
}

#[test]
fn direct_blocking_two_packet_burst() {
    let cfg = cpq_chain(2);
    for opts in [bata(), gbata()] {
        let a = analyze_flow(&cfg, 1, opts).unwrap();
        close(&(a.bound.t_p.clone() + a.bound.t_db()), 10.526315789);
    }
}

#[test]
fn burst_chain_and_indirect_latency() {
    let cfg = subpath_chain(1);
    let (s1, s2, s3) = oracle::chain();
    close(&s1, 3.1);
    close(&s2, 3.323684211);
    close(&s3, 3.235457064);

    let (beta1, _) = end_to_end_service_curve(&cfg, 1, 2, bata()).unwrap();
    assert_eq!(beta1, ServiceCurve::new(int(1), int(2)));
    let f1 = cfg.flow(1).unwrap();
    assert_eq!(output_curve(&f1.arrival_curve(), &beta1).unwrap().sigma, s1);

    let (beta2, _) = end_to_end_service_curve(&cfg, 2, 3, bata()).unwrap();
    assert_eq!(beta2, ServiceCurve::new(rat(19, 20), int(3) + rat(33, 10) / rat(19, 20)));
    assert_eq!(output_curve(&cfg.flow(2).unwrap().arrival_curve(), &beta2).unwrap().sigma, s2);

    let (beta3, _) = end_to_end_service_curve(&cfg, 3, 1, bata()).unwrap();
    close(&beta3.latency, 1.0 + 3.709141275);
    assert_eq!(output_curve(&cfg.flow(3).unwrap().arrival_curve(), &beta3).unwrap().sigma, s3);

    let a = analyze_flow(&cfg, 1, bata()).unwrap();
    assert_eq!(a.bound.t_ib, int(3) + &s3);
    close(&a.bound.t_ib, 6.235457064);
    // top-level call plus three upstream calls
    assert_eq!(a.counters.n_e2e, 4);
}

#[test]
fn ib_sets_on_chain_fixture() {
    let cfg = subpath_chain(1);
    let f1 = cfg.flow(1).unwrap();
    let (ib, iterations) = bata_ib_set(f1, &f1.path, &cfg, &Default::default());
    let s_b = Subpath::new(3, 1, 3);
    assert_eq!(ib.entries, vec![s_b]);
    assert_eq!(iterations, 2);
    assert_eq!(
        s_b.nodes(&cfg),
        &[NodeId::new(5, 1, Port::North), NodeId::new(5, 2, Port::North), NodeId::new(5, 3, Port::Local)]
    );
    let s_a = subpath_relative(cfg.flow(2).unwrap(), &f1.path, &cfg.noc).unwrap();
    assert_eq!(s_a, Subpath::new(2, 1, 3));
    assert_eq!(db_set(1, &f1.path, &cfg), vec![2]);
    assert_eq!(db_set(2, s_a.nodes(&cfg), &cfg), vec![3]);
}

fn cpq_vertices(cfg: &Config) -> Vec<Subpath> {
    let f1 = cfg.flow(1).unwrap();
    let (graph, _) = construct_ib_graph(Subpath::whole(f1), cfg);
    graph.vertices.iter().map(|v| v.path).collect()
}

#[test]
fn ib_sets_on_cpq_fixture() {
    let cfg = cpq_chain(2);
    let f1 = cfg.flow(1).unwrap();
    let (ib, _) = bata_ib_set(f1, &f1.path, &cfg, &Default::default());
    assert!(ib.is_empty());

    let s_a = Subpath::new(2, 1, 3);
    let s_b = Subpath::new(2, 4, 2);
    let s_c = Subpath::new(3, 1, 3);
    let s_d = Subpath::new(3, 4, 2);
    assert_eq!(cpq_vertices(&cfg), vec![Subpath::whole(f1), s_a, s_b, s_c, s_d]);

    let (graph, calls) = construct_ib_graph(Subpath::whole(f1), &cfg);
    assert_eq!(calls, 5);
    for (i, v) in graph.vertices.iter().enumerate() {
        let expected: Vec<usize> = if i == 0 { vec![] } else { vec![i - 1] };
        assert_eq!(v.dependencies, expected);
    }
    let ib = extract_ib_set(&graph, f1, &cfg);
    assert_eq!(ib.entries, vec![s_c, s_d]);
    assert_eq!(
        s_c.nodes(&cfg).iter().map(|n| n.router()).collect::<Vec<_>>(),
        vec![(5, 2), (5, 3), (5, 4)]
    );

    let t_ib = gbata_indirect_latency(&ib, &cfg, &mut InitialBurst(&cfg)).unwrap();
    assert_eq!(t_ib, int(11));
    let a = analyze_flow(&cfg, 1, gbata()).unwrap();
    assert_eq!(a.bound.t_ib, int(11));
    let b = analyze_flow(&cfg, 1, bata()).unwrap();
    assert_eq!(b.bound.t_ib, int(0));
    assert_eq!(a.ib.len(), 2);
    assert_eq!(b.ib.len(), 0);
}

#[test]
fn dot_export_chain() {
    let cfg = cpq_chain(2);
    let (graph, _) = construct_ib_graph(Subpath::whole(cfg.flow(1).unwrap()), &cfg);
    let dot = graph.to_dot();
    for label in ["1:0+4", "2:1+3", "2:4+2", "3:1+3", "3:4+2"] {
        assert!(dot.contains(&format!("\"{label}\"")), "{dot}");
    }
    for edge in ["v1 -> v0", "v2 -> v1", "v3 -> v2", "v4 -> v3"] {
        assert!(dot.contains(edge), "{dot}");
    }
}

#[test]
fn indirect_latency_closed_forms() {
    let cfg = subpath_chain(1);
    let sub = Subpath::new(3, 1, 3);
    let curve = vc_service_curve(cfg.flow(3).unwrap(), &sub, &cfg, &mut InitialBurst(&cfg)).unwrap();
    assert_eq!(curve, ServiceCurve::new(int(1), int(3)));
    let ib = noc_timing::bata::IbSet { entries: vec![sub] };
    assert_eq!(bata_indirect_latency(&ib, &cfg, &mut InitialBurst(&cfg)).unwrap(), int(6));
    assert_eq!(gbata_indirect_latency(&ib, &cfg, &mut InitialBurst(&cfg)).unwrap(), int(6));
    let empty = noc_timing::bata::IbSet::default();
    assert_eq!(bata_indirect_latency(&empty, &cfg, &mut InitialBurst(&cfg)).unwrap(), int(0));
}

#[test]
fn isolated_flow_bound() {
    let cfg = isolated_flow();
    for opts in [bata(), gbata()] {
        let a = analyze_flow(&cfg, 1, opts).unwrap();
        assert_eq!(a.bound.delay, int(7));
        assert_eq!(a.counters.n_e2e, 1);
        let (beta, _) = end_to_end_service_curve(&cfg, 1, 4, opts).unwrap();
        assert_eq!(beta, ServiceCurve::new(int(1), int(4)));
    }
}

/// Bigger buffers can add an indirect blocker. With one-flit buffers flow 2
/// spreads down to (0,2) where flow 3 ends, so flow 3 never leaves the
/// spread. With two-flit buffers the spread stops at (0,3) and flow 3's
/// last hop becomes a subpath of its own.
#[test]
fn ib_set_can_grow_with_buffers() {
    use noc_timing::platform::{xy_route, Flow, NocModel, NodeParams};
    let noc = NocModel::uniform(5, 5, NodeParams::new(int(1), int(1), 1));
    let flow = |id, src, dst, len| Flow {
        id,
        src,
        dst,
        len,
        period: 100,
        burst: 1,
        jitter: int(0),
        vc: 0,
        path: xy_route(&noc, src, dst).unwrap(),
    };
    let flows = vec![flow(1, (2, 4), (0, 4), 3), flow(2, (2, 4), (0, 2), 3), flow(3, (1, 3), (0, 2), 1)];
    let cfg = Config::new(noc.clone(), flows, vec![0]).unwrap();
    let f1 = cfg.flow(1).unwrap();
    assert!(bata_ib_set(f1, &f1.path, &cfg, &Default::default()).0.is_empty());
    let roomy = cfg.with_uniform_buffer(2);
    let (ib, _) = bata_ib_set(f1, &f1.path, &roomy, &Default::default());
    assert_eq!(ib.entries, vec![Subpath::new(3, 2, 1)]);
}
