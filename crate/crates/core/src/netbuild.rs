//! Per-period signed networks and their positive core.

use std::collections::BTreeSet;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{ActorRegistry, Event};

/// Dense signed adjacency for one period. Entries are in `{-1, 0, +1}`
/// and the diagonal is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedNetwork {
    pub period_index: usize,
    node_ids: Arc<[String]>,
    adjacency: Vec<i8>,
    /// Nodes that took part in at least one event of the period.
    active: Vec<bool>,
}

impl SignedNetwork {
    /// Builds a network from an explicit sign matrix (row-major, `n*n`).
    pub fn from_signs(
        period_index: usize,
        node_ids: Arc<[String]>,
        adjacency: Vec<i8>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if adjacency.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} adjacency entries for {n} nodes",
                adjacency.len()
            )));
        }
        if adjacency.iter().any(|s| !(-1..=1).contains(s)) {
            return Err(Error::InvalidArgument("adjacency entries must be -1, 0 or +1".into()));
        }
        if (0..n).any(|i| adjacency[i * n + i] != 0) {
            return Err(Error::InvalidArgument("adjacency diagonal must be zero".into()));
        }
        let mut active = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                if adjacency[i * n + j] != 0 {
                    active[i] = true;
                    active[j] = true;
                }
            }
        }
        Ok(Self {
            period_index,
            node_ids,
            adjacency,
            active,
        })
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &Arc<[String]> {
        &self.node_ids
    }

    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> i8 {
        self.adjacency[i * self.n() + j]
    }

    pub fn adjacency(&self) -> &[i8] {
        &self.adjacency
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    /// Fractions of positive and negative entries among the `n(n-1)`
    /// off-diagonal pairs.
    pub fn dyad_fractions(&self) -> (f64, f64) {
        let n = self.n();
        if n < 2 {
            return (0.0, 0.0);
        }
        let (mut pos, mut neg) = (0usize, 0usize);
        for &s in &self.adjacency {
            match s {
                1 => pos += 1,
                -1 => neg += 1,
                _ => {}
            }
        }
        let pairs = (n * (n - 1)) as f64;
        (pos as f64 / pairs, neg as f64 / pairs)
    }
}

/// Sign-of-sum network: `A_ij = sign(sum of weights i -> j)`, with
/// `sign(0) = 0`.
pub fn build_network(
    bucket: &[Event],
    registry: &ActorRegistry,
    period_index: usize,
) -> SignedNetwork {
    build_network_shared(bucket, registry.names().into(), period_index)
}

/// Like [`build_network`] but reuses an already shared node list.
pub fn build_network_shared(
    bucket: &[Event],
    node_ids: Arc<[String]>,
    period_index: usize,
) -> SignedNetwork {
    let n = node_ids.len();
    let mut sums = vec![0.0f64; n * n];
    let mut active = vec![false; n];
    for ev in bucket {
        sums[ev.source * n + ev.target] += ev.weight;
        active[ev.source] = true;
        active[ev.target] = true;
    }
    let adjacency = sums
        .iter()
        .map(|&s| {
            if s > 0.0 {
                1
            } else if s < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();
    SignedNetwork {
        period_index,
        node_ids,
        adjacency,
        active,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreResult {
    pub core: BTreeSet<usize>,
    pub periphery: BTreeSet<usize>,
}

/// Largest strongly connected component of the positive-edge digraph, ties
/// broken by smallest member index, plus the nodes with a positive edge
/// into it.
pub fn positive_scc(net: &SignedNetwork) -> CoreResult {
    let n = net.n();
    if n == 0 {
        return CoreResult {
            core: BTreeSet::new(),
            periphery: BTreeSet::new(),
        };
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    for _ in 0..n {
        graph.add_node(());
    }
    for i in 0..n {
        for j in 0..n {
            if net.sign(i, j) == 1 {
                graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), ());
            }
        }
    }
    let core: BTreeSet<usize> = tarjan_scc(&graph)
        .into_iter()
        .map(|comp| comp.into_iter().map(NodeIndex::index).collect::<BTreeSet<_>>())
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then_with(|| b.first().cmp(&a.first()))
        })
        .unwrap_or_default();
    let periphery = (0..n)
        .filter(|i| !core.contains(i))
        .filter(|&i| core.iter().any(|&c| net.sign(i, c) == 1))
        .collect();
    CoreResult { core, periphery }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreMode {
    /// Union of per-period cores over nodes active in every period.
    UnionOfCores,
    /// Caller-supplied actor identifiers.
    FixedList(Vec<String>),
}

pub fn stable_core(nets: &[SignedNetwork], mode: &CoreMode) -> Result<BTreeSet<usize>> {
    let first = nets
        .first()
        .ok_or_else(|| Error::InvalidArgument("stable core needs at least one network".into()))?;
    match mode {
        CoreMode::FixedList(names) => names
            .iter()
            .map(|name| {
                first
                    .node_ids()
                    .iter()
                    .position(|id| id == name)
                    .ok_or_else(|| Error::UnknownNode(name.clone()))
            })
            .collect(),
        CoreMode::UnionOfCores => {
            let mut union = BTreeSet::new();
            for net in nets {
                union.extend(positive_scc(net).core);
            }
            union.retain(|&i| nets.iter().all(|net| net.is_active(i)));
            Ok(union)
        }
    }
}

/// Induced subnetwork on `nodes`, in ascending index order.
pub fn restrict(net: &SignedNetwork, nodes: &BTreeSet<usize>) -> Result<SignedNetwork> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("cannot restrict to an empty node set".into()));
    }
    let n = net.n();
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownNode(format!("index {bad}")));
    }
    let keep: Vec<usize> = nodes.iter().copied().collect();
    let node_ids: Arc<[String]> = keep.iter().map(|&i| net.node_ids[i].clone()).collect();
    let mut adjacency = Vec::with_capacity(keep.len() * keep.len());
    for &i in &keep {
        for &j in &keep {
            adjacency.push(net.sign(i, j));
        }
    }
    let active = keep.iter().map(|&i| net.active[i]).collect();
    Ok(SignedNetwork {
        period_index: net.period_index,
        node_ids,
        adjacency,
        active,
    })
}
