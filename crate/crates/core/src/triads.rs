//! Sparse signed triads: codes, isomorphism classes, balance, and censuses.
//!
//! A triad on nodes `(i, j, k)` has six directed edges, each `-1`, `0` or
//! `+1`. Edges are read in the slot order
//! `(e_ij, e_ji, e_ik, e_ki, e_jk, e_kj)` and packed as base-3 digits with
//! `-1 -> 0`, `0 -> 1`, `+1 -> 2`, `e_ij` being the most significant digit.
//! So the all-null triad is `364` and the all-positive triad is `728`.
//!
//! Type ids `0..138` are assigned in ascending order of canonical code,
//! where the canonical code of a configuration is the minimum code over the
//! six relabelings of its nodes.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netbuild::SignedNetwork;

pub const NUM_CODES: usize = 729;
pub const NUM_TYPES: usize = 138;

/// Node pairs of the six edge slots, with nodes `i = 0, j = 1, k = 2`.
pub const EDGE_SLOTS: [(usize, usize); 6] = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

pub const NODE_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

const POW3: [u16; 6] = [243, 81, 27, 9, 3, 1];

/// Slot index of the directed edge `(a, b)`.
#[inline]
fn slot_of(a: usize, b: usize) -> usize {
    match (a, b) {
        (0, 1) => 0,
        (1, 0) => 1,
        (0, 2) => 2,
        (2, 0) => 3,
        (1, 2) => 4,
        (2, 1) => 5,
        _ => unreachable!("not an edge between distinct triad nodes"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TriadCode(u16);

impl TriadCode {
    pub const ALL_NULL: TriadCode = TriadCode(364);
    pub const ALL_POSITIVE: TriadCode = TriadCode(728);
    pub const ALL_NEGATIVE: TriadCode = TriadCode(0);

    pub fn new(code: u16) -> Result<Self> {
        if usize::from(code) < NUM_CODES {
            Ok(Self(code))
        } else {
            Err(Error::InvalidArgument(format!("triad code {code} out of range 0..=728")))
        }
    }

    /// Packs six edge signs given in slot order.
    pub fn from_signs(signs: [i8; 6]) -> Result<Self> {
        let mut code = 0u16;
        for (s, p) in signs.iter().zip(POW3) {
            if !(-1..=1).contains(s) {
                return Err(Error::InvalidArgument(format!("edge sign {s} not in {{-1, 0, 1}}")));
            }
            code += (*s + 1) as u16 * p;
        }
        Ok(Self(code))
    }

    pub fn signs(self) -> [i8; 6] {
        let mut out = [0i8; 6];
        let mut c = self.0;
        for s in out.iter_mut().rev() {
            *s = (c % 3) as i8 - 1;
            c /= 3;
        }
        out
    }

    pub fn value(self) -> u16 {
        self.0
    }

    /// The configuration after moving node `a` to position `perm[a]`.
    pub fn permuted(self, perm: [usize; 3]) -> TriadCode {
        let signs = self.signs();
        let mut out = [0i8; 6];
        for (slot, &(a, b)) in EDGE_SLOTS.iter().enumerate() {
            out[slot_of(perm[a], perm[b])] = signs[slot];
        }
        let mut code = 0u16;
        for (s, p) in out.iter().zip(POW3) {
            code += (*s + 1) as u16 * p;
        }
        TriadCode(code)
    }

    /// Sign of the directed edge `a -> b` between triad nodes.
    pub fn edge(self, a: usize, b: usize) -> i8 {
        self.signs()[slot_of(a, b)]
    }

    pub fn is_complete(self) -> bool {
        self.signs().iter().all(|&s| s != 0)
    }
}

/// Minimum code over the six node relabelings.
pub fn canonicalize(code: TriadCode) -> TriadCode {
    NODE_PERMUTATIONS
        .iter()
        .map(|&p| code.permuted(p))
        .min()
        .expect("six permutations")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceModel {
    Classical,
    Clustering,
    Transitivity,
}

impl BalanceModel {
    pub const ALL: [BalanceModel; 3] = [
        BalanceModel::Classical,
        BalanceModel::Clustering,
        BalanceModel::Transitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BalanceModel::Classical => "classical",
            BalanceModel::Clustering => "clustering",
            BalanceModel::Transitivity => "transitivity",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for BalanceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(BalanceModel::Classical),
            "clustering" => Ok(BalanceModel::Clustering),
            "transitivity" => Ok(BalanceModel::Transitivity),
            other => Err(Error::InvalidArgument(format!("unknown balance model {other:?}"))),
        }
    }
}

/// Checks every ordered role assignment `(i, k, j)` of the three nodes.
/// A violation is a premise on `e_ik, e_kj` that holds while
/// `e_ij != e_ik * e_kj`.
pub fn classify_balance(code: TriadCode, model: BalanceModel) -> bool {
    let signs = code.signs();
    let e = |a: usize, b: usize| signs[slot_of(a, b)];
    NODE_PERMUTATIONS.iter().all(|&[i, k, j]| {
        let (ik, kj, ij) = (e(i, k), e(k, j), e(i, j));
        let premise = match model {
            BalanceModel::Classical => ik != 0 && kj != 0,
            BalanceModel::Clustering => ik != 0 && kj != 0 && (ik > 0 || kj > 0),
            BalanceModel::Transitivity => ik > 0 && kj > 0,
        };
        !premise || ij == ik * kj
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriadTypeTable {
    pub(crate) canonical: Vec<TriadCode>,
    pub(crate) type_of: Vec<u8>,
    pub(crate) orbit_size: Vec<usize>,
    pub(crate) balanced: Vec<[bool; 3]>,
}

impl TriadTypeTable {
    /// Shared, lazily built table.
    pub fn global() -> &'static TriadTypeTable {
        static TABLE: OnceLock<TriadTypeTable> = OnceLock::new();
        TABLE.get_or_init(build_type_table)
    }

    pub fn num_types(&self) -> usize {
        self.canonical.len()
    }

    pub fn canonical_codes(&self) -> &[TriadCode] {
        &self.canonical
    }

    pub fn canonical(&self, type_id: usize) -> TriadCode {
        self.canonical[type_id]
    }

    #[inline]
    pub fn type_of(&self, code: TriadCode) -> usize {
        usize::from(self.type_of[usize::from(code.0)])
    }

    pub fn orbit_size(&self, type_id: usize) -> usize {
        self.orbit_size[type_id]
    }

    pub fn is_balanced(&self, type_id: usize, model: BalanceModel) -> bool {
        self.balanced[type_id][model.index()]
    }

    pub fn balanced_count(&self, model: BalanceModel) -> usize {
        (0..self.num_types()).filter(|&t| self.is_balanced(t, model)).count()
    }

    pub fn complete_count(&self) -> usize {
        self.canonical.iter().filter(|c| c.is_complete()).count()
    }
}

/// Enumerates all 729 codes and groups them into isomorphism classes.
///
/// Panics if the class count is not 138, which would mean the encoding or
/// the permutation action is broken.
pub fn build_type_table() -> TriadTypeTable {
    let canon: Vec<TriadCode> = (0..NUM_CODES as u16).map(|c| canonicalize(TriadCode(c))).collect();
    let mut canonical: Vec<TriadCode> = canon.clone();
    canonical.sort_unstable();
    canonical.dedup();
    assert_eq!(
        canonical.len(),
        NUM_TYPES,
        "triad enumeration produced {} classes",
        canonical.len()
    );
    let mut type_of = vec![0u8; NUM_CODES];
    let mut orbit_size = vec![0usize; NUM_TYPES];
    for (code, c) in canon.iter().enumerate() {
        let t = canonical.binary_search(c).expect("canonical code listed");
        type_of[code] = t as u8;
        orbit_size[t] += 1;
    }
    let balanced = canonical
        .iter()
        .map(|&c| BalanceModel::ALL.map(|m| classify_balance(c, m)))
        .collect();
    TriadTypeTable {
        canonical,
        type_of,
        orbit_size,
        balanced,
    }
}

/// Code of the triple `(i, j, k)` read from a network.
#[inline]
pub fn triple_code(net: &SignedNetwork, i: usize, j: usize, k: usize) -> TriadCode {
    let d = |a: usize, b: usize| (net.sign(a, b) + 1) as u16;
    TriadCode(
        d(i, j) * 243 + d(j, i) * 81 + d(i, k) * 27 + d(k, i) * 9 + d(j, k) * 3 + d(k, j),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusVector {
    pub period_index: usize,
    pub counts: Vec<u64>,
}

impl CensusVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn check_nodes(net: &SignedNetwork, nodes: &[usize]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a census needs at least 3 nodes, got {}",
            nodes.len()
        )));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= net.n()) {
        return Err(Error::UnknownNode(format!("index {bad}")));
    }
    Ok(())
}

fn for_each_triple(nodes: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let m = nodes.len();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                f(nodes[a], nodes[b], nodes[c]);
            }
        }
    }
}

/// Counts every unordered triple of `nodes` by triad type.
pub fn census(net: &SignedNetwork, nodes: &[usize]) -> Result<CensusVector> {
    check_nodes(net, nodes)?;
    let table = TriadTypeTable::global();
    let mut counts = vec![0u64; table.num_types()];
    for_each_triple(nodes, |i, j, k| {
        counts[table.type_of(triple_code(net, i, j, k))] += 1;
    });
    Ok(CensusVector {
        period_index: net.period_index,
        counts,
    })
}

/// Square matrix of type-to-type transition counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub from_period: usize,
    pub to_period: usize,
    pub dim: usize,
    pub counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(from_period: usize, to_period: usize, dim: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} counts for a {dim}x{dim} matrix",
                counts.len()
            )));
        }
        Ok(Self {
            from_period,
            to_period,
            dim,
            counts,
        })
    }

    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[u64] {
        &self.counts[from * self.dim..(from + 1) * self.dim]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.dim];
        for row in self.counts.chunks_exact(self.dim) {
            for (o, &c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Type changes of every unordered triple of `nodes` between two networks
/// over the same registry.
pub fn transition_counts(
    net_t: &SignedNetwork,
    net_t1: &SignedNetwork,
    nodes: &[usize],
) -> Result<TransitionCounts> {
    if net_t.node_ids() != net_t1.node_ids() {
        return Err(Error::RegistryMismatch);
    }
    check_nodes(net_t, nodes)?;
    let table = TriadTypeTable::global();
    let dim = table.num_types();
    let mut counts = vec![0u64; dim * dim];
    for_each_triple(nodes, |i, j, k| {
        let from = table.type_of(triple_code(net_t, i, j, k));
        let to = table.type_of(triple_code(net_t1, i, j, k));
        counts[from * dim + to] += 1;
    });
    Ok(TransitionCounts {
        from_period: net_t.period_index,
        to_period: net_t1.period_index,
        dim,
        counts,
    })
}

pub fn proportion(census: &CensusVector) -> Result<Vec<f64>> {
    let total = census.total();
    if total == 0 {
        return Err(Error::InvalidArgument("census is all zero".into()));
    }
    let total = total as f64;
    Ok(census.counts.iter().map(|&c| c as f64 / total).collect())
}

/// Probability mass on types balanced under `model`.
pub fn balanced_share(prop: &[f64], table: &TriadTypeTable, model: BalanceModel) -> f64 {
    prop.iter()
        .enumerate()
        .filter(|&(t, _)| table.is_balanced(t, model))
        .map(|(_, p)| p)
        .sum()
}

/// The `k` types with the largest total counts, ties by smaller id.
pub fn top_types(counts: &[u64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..counts.len()).collect();
    ids.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}
