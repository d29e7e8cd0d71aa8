//! Interference-graph indirect blocking analysis. Safe when packets of one
//! flow queue back to back.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::Zero;

use crate::bata::{check_drain, vc_service_curve, BurstOracle, IbSet};
use crate::error::AnalysisError;
use crate::interference::{db_set, subpath_relative, Subpath};
use crate::netcalc::Rational;
use crate::platform::{Config, Flow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    /// The flow is `path.flow`.
    pub path: Subpath,
    /// Vertices this one was computed from.
    pub dependencies: Vec<usize>,
    /// Vertices computed from this one.
    pub dependents: Vec<usize>,
}

/// Dependency graph of subpaths; vertex 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IbGraph {
    pub vertices: Vec<Vertex>,
    index: HashMap<Subpath, usize>,
}

impl IbGraph {
    fn with_root(root: Subpath) -> Self {
        Self {
            vertices: vec![Vertex {
                path: root,
                dependencies: Vec::new(),
                dependents: Vec::new(),
            }],
            index: HashMap::from([(root, 0)]),
        }
    }

    pub fn root(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn find(&self, path: &Subpath) -> Option<usize> {
        self.index.get(path).copied()
    }

    /// Inserts `path` as a dependent of vertex `parent`, merging with an
    /// existing vertex of the same key. Returns the index and whether it is new.
    fn add_vertex(&mut self, path: Subpath, parent: usize) -> (usize, bool) {
        let (at, fresh) = match self.index.get(&path) {
            Some(&at) => (at, false),
            None => {
                let at = self.vertices.len();
                self.vertices.push(Vertex {
                    path,
                    dependencies: Vec::new(),
                    dependents: Vec::new(),
                });
                self.index.insert(path, at);
                (at, true)
            }
        };
        if !self.vertices[at].dependencies.contains(&parent) {
            self.vertices[at].dependencies.push(parent);
            self.vertices[parent].dependents.push(at);
        }
        (at, fresh)
    }

    /// Vertices labelled `flow:start+len`, edges from dependent to dependency.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ib_graph {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "  v{i} [label=\"{}:{}+{}\"];", v.path.flow, v.path.start, v.path.len);
        }
        for (i, v) in self.vertices.iter().enumerate() {
            for d in &v.dependencies {
                let _ = writeln!(out, "  v{i} -> v{d};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// For each vertex path, the subpaths of every same-VC flow relative to it,
/// including the vertex's own flow. Returns `(frontier position, subpath)`.
pub fn get_next_vertices(frontier: &[Subpath], config: &Config) -> Vec<(usize, Subpath)> {
    let mut out = Vec::new();
    for (at, v) in frontier.iter().enumerate() {
        let owner = config.flow(v.flow).expect("indexed flow");
        let rank = config.priority_rank(owner.vc);
        let nodes = v.nodes(config);
        let mut candidates = db_set(owner.id, nodes, config);
        candidates.push(owner.id);
        candidates.sort_unstable();
        for k in candidates {
            let flow = config.flow(k).expect("indexed flow");
            if config.priority_rank(flow.vc) != rank {
                continue;
            }
            if let Some(sub) = subpath_relative(flow, nodes, &config.noc) {
                out.push((at, sub));
            }
        }
    }
    out
}

/// Breadth-first closure from `root`. Returns the graph and the number of
/// `get_next_vertices` calls.
pub fn construct_ib_graph(root: Subpath, config: &Config) -> (IbGraph, usize) {
    let mut graph = IbGraph::with_root(root);
    let mut frontier = vec![0usize];
    let mut calls = 0;
    while !frontier.is_empty() {
        let paths: Vec<Subpath> = frontier.iter().map(|&i| graph.vertices[i].path).collect();
        calls += 1;
        let mut fresh = Vec::new();
        for (at, sub) in get_next_vertices(&paths, config) {
            let (index, new) = graph.add_vertex(sub, frontier[at]);
            if new {
                fresh.push(index);
            }
        }
        frontier = fresh;
    }
    (graph, calls)
}

/// Non-root vertices whose flow neither is `f` nor directly blocks `f` on the root path.
pub fn extract_ib_set(graph: &IbGraph, f: &Flow, config: &Config) -> IbSet {
    let mut excluded = db_set(f.id, graph.root().path.nodes(config), config);
    excluded.push(f.id);
    IbSet {
        entries: graph.vertices[1..]
            .iter()
            .map(|v| v.path)
            .filter(|p| !excluded.contains(&p.flow))
            .collect(),
    }
}

/// Sum over the set of one packet of each flow drained at its VC service rate.
/// The oracle is only consulted for higher priority traffic on the subpaths.
pub fn gbata_indirect_latency(ib: &IbSet, config: &Config, oracle: &mut dyn BurstOracle) -> Result<Rational, AnalysisError> {
    let mut total = Rational::zero();
    for sub in &ib.entries {
        let k = config.flow(sub.flow).ok_or(AnalysisError::UnknownFlow(sub.flow))?;
        let curve = vc_service_curve(k, sub, config, oracle)?;
        check_drain(k, sub, &curve, config)?;
        total += k.packet_sigma() / &curve.rate + &curve.latency;
    }
    Ok(total)
}
