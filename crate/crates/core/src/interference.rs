//! Structural interference: spread indexes, relative subpaths, blocking sets.

use std::collections::BTreeSet;

use crate::platform::{Config, Flow, FlowId, NocModel, NodeId};

/// Contiguous section `path[start..start + len]` of a flow's path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subpath {
    pub flow: FlowId,
    pub start: usize,
    pub len: usize,
}

impl Subpath {
    pub fn new(flow: FlowId, start: usize, len: usize) -> Self {
        Self { flow, start, len }
    }

    pub fn whole(flow: &Flow) -> Self {
        Self::new(flow.id, 0, flow.path.len())
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// # Panics
    /// If the flow is unknown or the range exceeds its path.
    pub fn nodes<'a>(&self, config: &'a Config) -> &'a [NodeId] {
        let flow = config.flow(self.flow).expect("subpath of a known flow");
        &flow.path[self.start..self.end()]
    }
}

/// Number of consecutive buffers from `path[i]` needed to hold one packet,
/// truncated at the end of the path.
pub fn spread_index(flow: &Flow, i: usize, model: &NocModel) -> usize {
    let mut held = 0u64;
    for (count, node) in flow.path[i..].iter().enumerate() {
        held += model.params(node).buffer;
        if flow.len <= held {
            return count + 1;
        }
    }
    flow.path.len() - i
}

/// Index in `pk` of the last node of `pk` that also lies in `reference`.
pub fn last_shared(pk: &[NodeId], reference: &[NodeId]) -> Option<usize> {
    pk.iter().rposition(|n| reference.contains(n))
}

/// Last node of `pk` shared with `pl`.
pub fn divergence(pk: &[NodeId], pl: &[NodeId]) -> Option<NodeId> {
    last_shared(pk, pl).map(|i| pk[i])
}

/// First node of `pf` shared with `pi`.
pub fn convergence(pi: &[NodeId], pf: &[NodeId]) -> Option<NodeId> {
    pf.iter().find(|n| pi.contains(n)).copied()
}

/// Section of `k`'s path, just past its last node in `reference`, over which a
/// stalled packet of `k` can spread.
pub fn subpath_relative(k: &Flow, reference: &[NodeId], model: &NocModel) -> Option<Subpath> {
    let first = last_shared(&k.path, reference)? + 1;
    if first >= k.path.len() {
        return None;
    }
    Some(Subpath::new(k.id, first, spread_index(k, first, model)))
}

/// Flows other than `f` crossing at least one node of `restrict`, ascending.
pub fn db_set(f: FlowId, restrict: &[NodeId], config: &Config) -> Vec<FlowId> {
    let set: BTreeSet<FlowId> = restrict
        .iter()
        .flat_map(|n| config.flows_at(n).iter().copied())
        .filter(|&i| i != f)
        .collect();
    set.into_iter().collect()
}

/// Other flows split by VC priority relative to one flow.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorityView {
    pub hp: BTreeSet<FlowId>,
    pub sp: BTreeSet<FlowId>,
    pub lp: BTreeSet<FlowId>,
}

impl PriorityView {
    pub fn slp(&self) -> BTreeSet<FlowId> {
        self.sp.union(&self.lp).copied().collect()
    }

    pub fn shp(&self) -> BTreeSet<FlowId> {
        self.sp.union(&self.hp).copied().collect()
    }
}

pub fn priority_view(f: &Flow, config: &Config) -> PriorityView {
    let own = config.priority_rank(f.vc);
    let mut view = PriorityView::default();
    for other in &config.flows {
        if other.id == f.id {
            continue;
        }
        let rank = config.priority_rank(other.vc);
        let set = match rank.cmp(&own) {
            std::cmp::Ordering::Less => &mut view.hp,
            std::cmp::Ordering::Equal => &mut view.sp,
            std::cmp::Ordering::Greater => &mut view.lp,
        };
        set.insert(other.id);
    }
    view
}
