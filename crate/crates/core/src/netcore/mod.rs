//! Transactions, aggregated networks and the transforms applied to them
//! before inference.
//!
//! An [`AggregatedNetwork`] is a dense `N x N` matrix: the networks handled
//! here have at most a few hundred banks, and every block-model quantity is
//! a sum over ordered node pairs anyway.

mod calendar;
mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calendar::{
    add_trading_days, is_trading_day, next_trading_day, schedule, AggregationWindow, Span,
};
pub use io::{ingest, read_edge_list, read_transactions, write_edge_list, write_edge_list_to};

#[derive(Error, Debug)]
pub enum NetError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: volume must be positive, got {volume}")]
    NonPositiveVolume { line: u64, volume: f64 },
    #[error("line {line}: lender and borrower are the same bank `{bank}`")]
    SelfLoan { line: u64, bank: BankId },
    #[error("transaction dated {date} lies outside window {window}")]
    OutsideWindow {
        date: NaiveDate,
        window: AggregationWindow,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Opaque bank identifier. Whitespace is not allowed so that identifiers
/// survive the edge-list roster line unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BankId(pub String);

impl BankId {
    pub fn new(id: impl Into<String>) -> Self {
        BankId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BankId {
    fn from(s: &str) -> Self {
        BankId(s.to_string())
    }
}

/// One overnight interbank loan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub date: NaiveDate,
    pub lender: BankId,
    pub borrower: BankId,
    /// Euros, strictly positive.
    pub volume: f64,
    pub domestic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    DirectedWeighted,
    DirectedBinary,
    UndirectedWeighted,
    UndirectedBinary,
}

impl NetworkKind {
    pub fn is_directed(self) -> bool {
        matches!(self, NetworkKind::DirectedWeighted | NetworkKind::DirectedBinary)
    }

    pub fn is_binary(self) -> bool {
        matches!(self, NetworkKind::DirectedBinary | NetworkKind::UndirectedBinary)
    }

    fn with(directed: bool, binary: bool) -> Self {
        match (directed, binary) {
            (true, false) => NetworkKind::DirectedWeighted,
            (true, true) => NetworkKind::DirectedBinary,
            (false, false) => NetworkKind::UndirectedWeighted,
            (false, true) => NetworkKind::UndirectedBinary,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::DirectedWeighted => "directed-weighted",
            NetworkKind::DirectedBinary => "directed-binary",
            NetworkKind::UndirectedWeighted => "undirected-weighted",
            NetworkKind::UndirectedBinary => "undirected-binary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "directed-weighted" => Some(NetworkKind::DirectedWeighted),
            "directed-binary" => Some(NetworkKind::DirectedBinary),
            "undirected-weighted" => Some(NetworkKind::UndirectedWeighted),
            "undirected-binary" => Some(NetworkKind::UndirectedBinary),
            _ => None,
        }
    }
}

/// Transforms already applied to a network, oldest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Binarized,
    Symmetrized,
    Discretized,
}

impl Transform {
    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Binarized => "binarized",
            Transform::Symmetrized => "symmetrized",
            Transform::Discretized => "discretized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binarized" => Some(Transform::Binarized),
            "symmetrized" => Some(Transform::Symmetrized),
            "discretized" => Some(Transform::Discretized),
            _ => None,
        }
    }
}

/// Directed or undirected weighted adjacency over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedNetwork {
    nodes: Vec<BankId>,
    weights: Vec<f64>,
    kind: NetworkKind,
    window: Option<AggregationWindow>,
    lineage: Vec<Transform>,
}

/// Shorthand used throughout the crate.
pub type Network = AggregatedNetwork;

impl AggregatedNetwork {
    /// Build from a row-major `N x N` weight matrix, checking the kind's
    /// invariants (zero diagonal, non-negative, symmetric, binary).
    pub fn from_dense(
        nodes: Vec<BankId>,
        weights: Vec<f64>,
        kind: NetworkKind,
    ) -> Result<Self, NetError> {
        let n = nodes.len();
        if weights.len() != n * n {
            return Err(NetError::Invalid(format!(
                "{} weights for {} nodes",
                weights.len(),
                n
            )));
        }
        let distinct: BTreeSet<&BankId> = nodes.iter().collect();
        if distinct.len() != n {
            return Err(NetError::Invalid("duplicate bank identifiers".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(NetError::Invalid(format!("weight ({i},{j}) = {w}")));
                }
                if i == j && w != 0.0 {
                    return Err(NetError::Invalid(format!("self-loop at node {i}")));
                }
                if kind.is_binary() && w != 0.0 && w != 1.0 {
                    return Err(NetError::Invalid(format!(
                        "binary network has weight {w} at ({i},{j})"
                    )));
                }
                if !kind.is_directed() && w != weights[j * n + i] {
                    return Err(NetError::Invalid(format!(
                        "undirected network is asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(AggregatedNetwork {
            nodes,
            weights,
            kind,
            window: None,
            lineage: Vec::new(),
        })
    }

    /// Network with no links.
    pub fn empty(nodes: Vec<BankId>, kind: NetworkKind) -> Self {
        let n = nodes.len();
        AggregatedNetwork {
            nodes,
            weights: vec![0.0; n * n],
            kind,
            window: None,
            lineage: Vec::new(),
        }
    }

    /// Nodes named `b000`, `b001`, ... in index order.
    pub fn synthetic_ids(n: usize) -> Vec<BankId> {
        let width = n.saturating_sub(1).to_string().len().max(3);
        (0..n).map(|i| BankId(format!("b{i:0width$}"))).collect()
    }

    pub fn with_window(mut self, window: Option<AggregationWindow>) -> Self {
        self.window = window;
        self
    }

    pub(crate) fn with_lineage(mut self, lineage: Vec<Transform>) -> Self {
        self.lineage = lineage;
        self
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[BankId] {
        &self.nodes
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn window(&self) -> Option<AggregationWindow> {
        self.window
    }

    pub fn lineage(&self) -> &[Transform] {
        &self.lineage
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.nodes.len() + j]
    }

    pub fn index_of(&self, bank: &BankId) -> Option<usize> {
        self.nodes.iter().position(|b| b == bank)
    }

    /// True when every weight is a non-negative integer.
    pub fn has_integer_weights(&self) -> bool {
        self.weights.iter().all(|w| w.fract() == 0.0)
    }

    /// Number of non-zero entries (ordered pairs). For undirected networks
    /// use [`AggregatedNetwork::link_count`].
    pub fn nonzero_entries(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Links as counted by the kind: ordered pairs when directed, unordered
    /// pairs when undirected.
    pub fn link_count(&self) -> usize {
        let nz = self.nonzero_entries();
        if self.kind.is_directed() {
            nz
        } else {
            nz / 2
        }
    }

    pub fn out_degree(&self, i: usize) -> usize {
        let n = self.n();
        self.weights[i * n..(i + 1) * n]
            .iter()
            .filter(|&&w| w > 0.0)
            .count()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.n()).filter(|&i| self.weight(i, j) > 0.0).count()
    }

    /// Total degree on the undirected view (`A + A^T > 0`).
    pub fn total_degree(&self, i: usize) -> usize {
        (0..self.n())
            .filter(|&j| j != i && (self.weight(i, j) > 0.0 || self.weight(j, i) > 0.0))
            .count()
    }

    pub fn out_strength(&self, i: usize) -> f64 {
        let n = self.n();
        self.weights[i * n..(i + 1) * n].iter().sum()
    }

    pub fn in_strength(&self, j: usize) -> f64 {
        (0..self.n()).map(|i| self.weight(i, j)).sum()
    }

    /// Subgraph induced on `keep` (indices into this network), in the given
    /// order.
    pub fn induced(&self, keep: &[usize]) -> AggregatedNetwork {
        let k = keep.len();
        let mut weights = vec![0.0; k * k];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                weights[a * k + b] = self.weight(i, j);
            }
        }
        AggregatedNetwork {
            nodes: keep.iter().map(|&i| self.nodes[i].clone()).collect(),
            weights,
            kind: self.kind,
            window: self.window,
            lineage: self.lineage.clone(),
        }
    }

    /// Subgraph induced on the named banks; unknown banks are an error.
    pub fn induced_by_ids(&self, keep: &[BankId]) -> Result<AggregatedNetwork, NetError> {
        let idx = keep
            .iter()
            .map(|b| {
                self.index_of(b)
                    .ok_or_else(|| NetError::Invalid(format!("bank `{b}` not in network")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.induced(&idx))
    }
}

/// Sum volumes lender -> borrower over one window. Nodes are the banks
/// active in the window, sorted by identifier.
pub fn aggregate(
    txs: &[Transaction],
    window: AggregationWindow,
) -> Result<AggregatedNetwork, NetError> {
    let mut banks = BTreeSet::new();
    for tx in txs {
        if !window.contains(tx.date) {
            return Err(NetError::OutsideWindow {
                date: tx.date,
                window,
            });
        }
        banks.insert(tx.lender.clone());
        banks.insert(tx.borrower.clone());
    }
    let nodes: Vec<BankId> = banks.into_iter().collect();
    let index: BTreeMap<&BankId, usize> = nodes.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let n = nodes.len();
    let mut weights = vec![0.0; n * n];
    for tx in txs {
        let i = index[&tx.lender];
        let j = index[&tx.borrower];
        weights[i * n + j] += tx.volume;
    }
    Ok(AggregatedNetwork {
        nodes,
        weights,
        kind: NetworkKind::DirectedWeighted,
        window: Some(window),
        lineage: Vec::new(),
    })
}

/// Split a transaction stream into contiguous windows of `span` and
/// aggregate each. Windows without activity are kept as empty networks so
/// that the returned sequence indexes the calendar.
pub fn aggregate_schedule(
    txs: &[Transaction],
    span: Span,
) -> Result<Vec<AggregatedNetwork>, NetError> {
    let (Some(first), Some(last)) = (
        txs.iter().map(|t| t.date).min(),
        txs.iter().map(|t| t.date).max(),
    ) else {
        return Ok(Vec::new());
    };
    let windows = schedule(first, last, span);
    let mut buckets: Vec<Vec<Transaction>> = vec![Vec::new(); windows.len()];
    for tx in txs {
        // Windows are sorted by start; the owning window is the last one
        // starting on or before the date.
        let k = windows.partition_point(|w| w.start <= tx.date);
        if k == 0 {
            return Err(NetError::OutsideWindow {
                date: tx.date,
                window: windows[0],
            });
        }
        buckets[k - 1].push(tx.clone());
    }
    windows
        .iter()
        .zip(buckets)
        .map(|(w, b)| aggregate(&b, *w))
        .collect()
}

/// `A_ij = 1{W_ij > 0}`.
pub fn binarize(net: &AggregatedNetwork) -> AggregatedNetwork {
    let weights = net
        .weights
        .iter()
        .map(|&w| if w > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let mut lineage = net.lineage.clone();
    if !net.kind.is_binary() {
        lineage.push(Transform::Binarized);
    }
    AggregatedNetwork {
        nodes: net.nodes.clone(),
        weights,
        kind: NetworkKind::with(net.kind.is_directed(), true),
        window: net.window,
        lineage,
    }
}

/// Binary: `A'_ij = 1{A_ij + A_ji > 0}`. Weighted: `W' = W + W^T`.
/// Undirected input is returned unchanged.
pub fn symmetrize(net: &AggregatedNetwork) -> AggregatedNetwork {
    if !net.kind.is_directed() {
        return net.clone();
    }
    let n = net.n();
    let binary = net.kind.is_binary();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let s = net.weight(i, j) + net.weight(j, i);
            weights[i * n + j] = if binary && s > 0.0 { 1.0 } else { s };
        }
    }
    let mut lineage = net.lineage.clone();
    lineage.push(Transform::Symmetrized);
    AggregatedNetwork {
        nodes: net.nodes.clone(),
        weights,
        kind: NetworkKind::with(false, binary),
        window: net.window,
        lineage,
    }
}

/// Logarithmic volume discretization `W = floor(log_c(1 + V))` with
/// `c = 1 + min{V > 0}`.
pub fn discretize_weights(net: &AggregatedNetwork) -> Result<AggregatedNetwork, NetError> {
    let min_positive = net
        .weights
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() {
        return Err(NetError::Degenerate(
            "cannot discretize a network without positive volumes".into(),
        ));
    }
    let base = 1.0 + min_positive;
    let weights = net
        .weights
        .iter()
        .map(|&v| if v > 0.0 { log_floor(base, 1.0 + v) } else { 0.0 })
        .collect();
    let mut lineage = net.lineage.clone();
    lineage.push(Transform::Discretized);
    Ok(AggregatedNetwork {
        nodes: net.nodes.clone(),
        weights,
        kind: net.kind,
        window: net.window,
        lineage,
    })
}

/// `floor(log_base(x))` for `x >= base > 1`, corrected for rounding of the
/// floating-point ratio at exact powers.
fn log_floor(base: f64, x: f64) -> f64 {
    let mut k = (x.ln() / base.ln()).floor();
    if base.powf(k + 1.0) <= x {
        k += 1.0;
    } else if k > 0.0 && base.powf(k) > x {
        k -= 1.0;
    }
    k.max(0.0)
}

/// Links over possible links, using the kind's pair convention.
pub fn density(net: &AggregatedNetwork) -> Result<f64, NetError> {
    let n = net.n();
    if n < 2 {
        return Err(NetError::Degenerate(format!("density needs N >= 2, got {n}")));
    }
    let possible = if net.kind.is_directed() {
        n * (n - 1)
    } else {
        n * (n - 1) / 2
    };
    Ok(net.link_count() as f64 / possible as f64)
}

/// Total weight over the number of links.
pub fn volume_per_link(net: &AggregatedNetwork) -> Result<f64, NetError> {
    let links = net.nonzero_entries();
    if links == 0 {
        return Err(NetError::Degenerate("network has no links".into()));
    }
    let total: f64 = net.weights.iter().sum();
    Ok(total / links as f64)
}
