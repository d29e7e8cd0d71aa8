//! Subpath fixed-point indirect blocking analysis, valid when a flow never
//! has two packets queued back to back in the network.

use std::collections::{BTreeSet, HashSet, VecDeque};

use num_traits::Zero;

use crate::error::AnalysisError;
use crate::interference::{convergence, db_set, priority_view, subpath_relative, Subpath};
use crate::netcalc::{pmoo_leftover, PmooInterferer, PmooNode, Rational, ServiceCurve, Unstable};
use crate::platform::{Config, Flow, FlowId, NodeId};

/// Supplies the burst of a flow on entry to `path[index]`.
///
/// `Ok(None)` means the flow is excluded from the current propagation because
/// its own curve is being computed further up the recursion.
pub trait BurstOracle {
    fn burst_at(&mut self, flow: FlowId, index: usize) -> Result<Option<Rational>, AnalysisError>;
}

/// Oracle that ignores upstream interference and returns each flow's initial burst.
#[derive(Debug, Clone, Copy)]
pub struct InitialBurst<'a>(pub &'a Config);

impl BurstOracle for InitialBurst<'_> {
    fn burst_at(&mut self, flow: FlowId, _index: usize) -> Result<Option<Rational>, AnalysisError> {
        self.0
            .flow(flow)
            .map(|f| Some(f.sigma()))
            .ok_or(AnalysisError::UnknownFlow(flow))
    }
}

/// Ordered `(flow, subpath)` pairs; the flow is `Subpath::flow`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IbSet {
    pub entries: Vec<Subpath>,
}

impl IbSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flows(&self) -> BTreeSet<FlowId> {
        self.entries.iter().map(|s| s.flow).collect()
    }
}

/// Returns the indirect blocking set of `f` over `restrict` and the number of
/// worklist iterations.
pub fn bata_ib_set(f: &Flow, restrict: &[NodeId], config: &Config, to_ignore: &BTreeSet<FlowId>) -> (IbSet, usize) {
    let view = priority_view(f, config);
    let direct: BTreeSet<FlowId> = db_set(f.id, restrict, config)
        .into_iter()
        .filter(|i| view.sp.contains(i))
        .collect();

    let mut pending = VecDeque::new();
    for id in direct.iter().filter(|i| !to_ignore.contains(i)) {
        let flow = config.flow(*id).expect("indexed flow");
        if let Some(sub) = subpath_relative(flow, restrict, &config.noc) {
            pending.push_back(sub);
        }
    }

    let mut ib = IbSet::default();
    let mut seen: HashSet<(FlowId, usize)> = HashSet::new();
    let mut iterations = 0;
    while let Some(current) = pending.pop_front() {
        iterations += 1;
        let owner = config.flow(current.flow).expect("indexed flow");
        let owner_view = priority_view(owner, config);
        let nodes = current.nodes(config);
        for k in db_set(owner.id, nodes, config) {
            if !owner_view.sp.contains(&k) || k == f.id || direct.contains(&k) {
                continue;
            }
            let flow = config.flow(k).expect("indexed flow");
            if let Some(sub) = subpath_relative(flow, nodes, &config.noc) {
                if seen.insert((k, sub.start)) {
                    ib.entries.push(sub);
                    pending.push_back(sub);
                }
            }
        }
    }
    (ib, iterations)
}

/// Service left to flow `k` on its own VC over `sub`: higher priority VCs
/// take rate, lower priority VCs cost one flit per node.
pub fn vc_service_curve(
    k: &Flow,
    sub: &Subpath,
    config: &Config,
    oracle: &mut dyn BurstOracle,
) -> Result<ServiceCurve, AnalysisError> {
    let view = priority_view(k, config);
    let nodes = sub.nodes(config);
    let flit = config.noc.flit_size();
    let lp_blocking = |r: &NodeId| -> Rational {
        if config.flows_at(r).iter().any(|j| view.lp.contains(j)) {
            &flit / &config.noc.params(r).rate
        } else {
            Rational::zero()
        }
    };

    let mut servers = Vec::with_capacity(nodes.len());
    for r in nodes {
        let params = config.noc.params(r);
        let cross_rate = config
            .flows_at(r)
            .iter()
            .filter(|j| view.hp.contains(j))
            .map(|j| config.flow(*j).expect("indexed flow").rho())
            .fold(Rational::zero(), |a, b| a + b);
        servers.push(PmooNode {
            node: Some(*r),
            rate: params.rate.clone(),
            latency: params.latency.clone(),
            cross_rate,
            blocking: lp_blocking(r),
        });
    }

    let mut interferers = Vec::new();
    for i in db_set(k.id, nodes, config) {
        if !view.hp.contains(&i) {
            continue;
        }
        let flow = config.flow(i).expect("indexed flow");
        let cv = convergence(&flow.path, nodes).expect("interferer crosses the subpath");
        let Some(burst) = oracle.burst_at(i, config.position(i, &cv).expect("cv on path"))? else {
            continue;
        };
        let shared_latency = nodes
            .iter()
            .filter(|r| config.crosses(i, r))
            .map(|r| &config.noc.params(r).latency + lp_blocking(r))
            .fold(Rational::zero(), |a, b| a + b);
        interferers.push(PmooInterferer {
            burst,
            rho: flow.rho(),
            shared_latency,
        });
    }
    Ok(pmoo_leftover(&servers, &interferers)?)
}

/// Sum over the set of each flow's propagated burst drained at its VC service rate.
pub fn bata_indirect_latency(ib: &IbSet, config: &Config, oracle: &mut dyn BurstOracle) -> Result<Rational, AnalysisError> {
    let mut total = Rational::zero();
    for sub in &ib.entries {
        let k = config.flow(sub.flow).ok_or(AnalysisError::UnknownFlow(sub.flow))?;
        let Some(sigma) = oracle.burst_at(k.id, sub.start)? else {
            continue;
        };
        let curve = vc_service_curve(k, sub, config, oracle)?;
        check_drain(k, sub, &curve, config)?;
        total += sigma / &curve.rate + &curve.latency;
    }
    Ok(total)
}

/// A flow faster than the rate left to it on a subpath has no finite bound there.
pub(crate) fn check_drain(k: &Flow, sub: &Subpath, curve: &ServiceCurve, config: &Config) -> Result<(), AnalysisError> {
    let rho = k.rho();
    if rho > curve.rate {
        return Err(Unstable {
            node: sub.nodes(config).first().copied(),
            residual: &curve.rate - rho,
        }
        .into());
    }
    Ok(())
}
