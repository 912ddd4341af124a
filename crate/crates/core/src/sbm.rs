//! Stochastic block model ensembles.
//!
//! Two ensembles share the same block structure: the Bernoulli ensemble for
//! binary networks (one independent link per ordered pair) and the Poisson
//! ensemble for integer weights, read as multi-edge counts. Pairs are always
//! ordered and self-pairs are excluded, so a block `r` has `n_r (n_r - 1)`
//! internal pairs and `n_r n_s` pairs towards block `s != r`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

use crate::netcore::{AggregatedNetwork, NetworkKind};
use crate::seed;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SbmError {
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Which likelihood the block model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Bernoulli,
    Poisson,
}

impl Ensemble {
    /// Bernoulli for binary networks, Poisson for integer weights.
    pub fn for_network(net: &AggregatedNetwork) -> Result<Self, SbmError> {
        if net.kind().is_binary() {
            Ok(Ensemble::Bernoulli)
        } else if net.has_integer_weights() {
            Ok(Ensemble::Poisson)
        } else {
            Err(SbmError::Contract(
                "weighted networks must be discretized to integers first".into(),
            ))
        }
    }
}

/// Zero-based block label per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockAssignment {
    labels: Vec<usize>,
    m: usize,
}

impl BlockAssignment {
    pub fn new(labels: Vec<usize>, m: usize) -> Result<Self, SbmError> {
        if m == 0 {
            return Err(SbmError::Contract("block count must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&g| g >= m) {
            return Err(SbmError::Contract(format!("label {bad} out of range for m = {m}")));
        }
        Ok(BlockAssignment { labels, m })
    }

    /// Every node in block 0.
    pub fn single_block(n: usize) -> Self {
        BlockAssignment {
            labels: vec![0; n],
            m: 1,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.m];
        for &g in &self.labels {
            s[g] += 1;
        }
        s
    }

    /// Permute block labels: node in block `r` moves to block `perm[r]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        BlockAssignment {
            labels: self.labels.iter().map(|&g| perm[g]).collect(),
            m: self.m,
        }
    }

    /// Blocks renumbered in order of first appearance.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.m];
        let mut next = 0;
        for &g in &self.labels {
            if map[g] == usize::MAX {
                map[g] = next;
                next += 1;
            }
        }
        for slot in map.iter_mut() {
            if *slot == usize::MAX {
                *slot = next;
                next += 1;
            }
        }
        self.relabeled(&map)
    }

    /// Bipartition where each node takes the label in `bits` (bit `i` set
    /// puts node `i` in block 1). Used by exhaustive enumerations.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        BlockAssignment {
            labels: (0..n).map(|i| ((bits >> i) & 1) as usize).collect(),
            m: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffinityMode {
    BernoulliProbability,
    PoissonRate,
}

/// `m x m` block affinity, row = source block, column = target block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    mode: AffinityMode,
    entries: Vec<Vec<f64>>,
}

impl AffinityMatrix {
    pub fn new(mode: AffinityMode, entries: Vec<Vec<f64>>) -> Result<Self, SbmError> {
        let m = entries.len();
        if m == 0 || entries.iter().any(|row| row.len() != m) {
            return Err(SbmError::Contract("affinity matrix must be square and non-empty".into()));
        }
        for &p in entries.iter().flatten() {
            let ok = match mode {
                AffinityMode::BernoulliProbability => (0.0..=1.0).contains(&p),
                AffinityMode::PoissonRate => p >= 0.0 && p.is_finite(),
            };
            if !ok {
                return Err(SbmError::Contract(format!("affinity entry {p} invalid for {mode:?}")));
            }
        }
        Ok(AffinityMatrix { mode, entries })
    }

    pub fn bernoulli(entries: Vec<Vec<f64>>) -> Result<Self, SbmError> {
        Self::new(AffinityMode::BernoulliProbability, entries)
    }

    pub fn poisson(entries: Vec<Vec<f64>>) -> Result<Self, SbmError> {
        Self::new(AffinityMode::PoissonRate, entries)
    }

    pub fn mode(&self) -> AffinityMode {
        self.mode
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.entries[r][s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Same matrix with blocks permuted as in [`BlockAssignment::relabeled`].
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let m = self.m();
        let mut entries = vec![vec![0.0; m]; m];
        for r in 0..m {
            for s in 0..m {
                entries[perm[r]][perm[s]] = self.entries[r][s];
            }
        }
        AffinityMatrix {
            mode: self.mode,
            entries,
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SbmError> {
        Self::new(
            self.mode,
            self.entries
                .iter()
                .map(|row| row.iter().map(|p| p * factor).collect())
                .collect(),
        )
    }
}

/// Number of ordered node pairs between blocks of the given sizes.
#[inline]
pub fn pair_count(r: usize, s: usize, sizes: &[u64]) -> u64 {
    if r == s {
        sizes[r] * sizes[r].saturating_sub(1)
    } else {
        sizes[r] * sizes[s]
    }
}

/// Block-to-block link (or multi-edge) counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCounts {
    m: usize,
    sizes: Vec<u64>,
    e: Vec<u64>,
}

impl EdgeCounts {
    pub fn new(sizes: Vec<u64>, e: Vec<u64>) -> Result<Self, SbmError> {
        let m = sizes.len();
        if e.len() != m * m {
            return Err(SbmError::Contract(format!("{} counts for {m} blocks", e.len())));
        }
        Ok(EdgeCounts { m, sizes, e })
    }

    /// Tally an integer-weighted (or binary) network under an assignment.
    pub fn from_network(net: &AggregatedNetwork, g: &BlockAssignment) -> Result<Self, SbmError> {
        check_dims(net, g)?;
        let m = g.m();
        let mut e = vec![0u64; m * m];
        let labels = g.labels();
        for i in 0..net.n() {
            for j in 0..net.n() {
                let w = net.weight(i, j);
                if w > 0.0 {
                    if w.fract() != 0.0 {
                        return Err(SbmError::Contract(format!("non-integer weight {w}")));
                    }
                    e[labels[i] * m + labels[j]] += w as u64;
                }
            }
        }
        let sizes = g.sizes().into_iter().map(|s| s as u64).collect();
        Ok(EdgeCounts { m, sizes, e })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn e(&self, r: usize, s: usize) -> u64 {
        self.e[r * self.m + s]
    }

    pub fn pair_counts(&self, r: usize, s: usize) -> u64 {
        pair_count(r, s, &self.sizes)
    }

    pub fn total(&self) -> u64 {
        self.e.iter().sum()
    }
}

fn check_dims(net: &AggregatedNetwork, g: &BlockAssignment) -> Result<(), SbmError> {
    if net.n() != g.n() {
        return Err(SbmError::Contract(format!(
            "network has {} nodes, assignment has {}",
            net.n(),
            g.n()
        )));
    }
    Ok(())
}

/// `-x ln x - (1-x) ln(1-x)` with `H(0) = H(1) = 0`.
#[inline]
pub fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.ln();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).ln();
    }
    h
}

/// Microcanonical entropy over a block matrix given as raw slices; shared
/// by [`entropy`] and the MCMC so both evaluate the same sum in the same
/// order.
pub(crate) fn block_entropy(ensemble: Ensemble, m: usize, sizes: &[u64], e: &[u64]) -> f64 {
    let mut s = 0.0;
    for r in 0..m {
        for t in 0..m {
            let pairs = pair_count(r, t, sizes);
            if pairs == 0 {
                continue;
            }
            let ers = e[r * m + t] as f64;
            let pairs = pairs as f64;
            s += match ensemble {
                Ensemble::Bernoulli => pairs * binary_entropy(ers / pairs),
                // -max_lambda [e ln(lambda) - pairs * lambda], lambda = e / pairs
                Ensemble::Poisson => {
                    if ers > 0.0 {
                        ers - ers * (ers / pairs).ln()
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    s
}

/// `S = sum_rs pairs_rs H(e_rs / pairs_rs)`.
pub fn entropy(counts: &EdgeCounts) -> Result<f64, SbmError> {
    for r in 0..counts.m {
        for s in 0..counts.m {
            if counts.e(r, s) > counts.pair_counts(r, s) {
                return Err(SbmError::Contract(format!(
                    "e[{r}][{s}] = {} exceeds {} pairs",
                    counts.e(r, s),
                    counts.pair_counts(r, s)
                )));
            }
        }
    }
    Ok(block_entropy(Ensemble::Bernoulli, counts.m, &counts.sizes, &counts.e))
}

/// Negative maximized Poisson log-likelihood of an integer-weighted network
/// under block counts: the weighted analogue of [`entropy`].
/// `log_factorials` is `sum_ij ln(W_ij!)`, which does not depend on the
/// assignment.
pub fn poisson_entropy(counts: &EdgeCounts, log_factorials: f64) -> f64 {
    block_entropy(Ensemble::Poisson, counts.m, &counts.sizes, &counts.e) + log_factorials
}

/// `sum_ij ln(W_ij!)`.
pub fn log_factorial_sum(net: &AggregatedNetwork) -> f64 {
    net.weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| ln_factorial(w as u64))
        .sum()
}

/// Log-probability of a binary network under the Bernoulli SBM. Impossible
/// observations (a link where `p = 0`, a gap where `p = 1`) give `-inf`.
pub fn bernoulli_loglik(
    a: &AggregatedNetwork,
    g: &BlockAssignment,
    p: &AffinityMatrix,
) -> Result<f64, SbmError> {
    check_dims(a, g)?;
    if p.mode() != AffinityMode::BernoulliProbability {
        return Err(SbmError::Contract("affinity must hold probabilities".into()));
    }
    if p.m() != g.m() {
        return Err(SbmError::Contract("affinity and assignment disagree on m".into()));
    }
    let labels = g.labels();
    let mut ll = 0.0;
    for i in 0..a.n() {
        for j in 0..a.n() {
            if i == j {
                continue;
            }
            let pij = p.get(labels[i], labels[j]);
            let linked = a.weight(i, j) > 0.0;
            let term = match (linked, pij) {
                (true, x) if x == 0.0 => return Ok(f64::NEG_INFINITY),
                (false, x) if x == 1.0 => return Ok(f64::NEG_INFINITY),
                (true, x) => x.ln(),
                (false, x) => (1.0 - x).ln(),
            };
            ll += term;
        }
    }
    Ok(ll)
}

/// Log-probability of an integer-weighted network under the Poisson SBM.
pub fn poisson_loglik(
    w: &AggregatedNetwork,
    g: &BlockAssignment,
    p: &AffinityMatrix,
) -> Result<f64, SbmError> {
    check_dims(w, g)?;
    if p.mode() != AffinityMode::PoissonRate {
        return Err(SbmError::Contract("affinity must hold Poisson rates".into()));
    }
    if p.m() != g.m() {
        return Err(SbmError::Contract("affinity and assignment disagree on m".into()));
    }
    let labels = g.labels();
    let mut ll = 0.0;
    for i in 0..w.n() {
        for j in 0..w.n() {
            if i == j {
                continue;
            }
            let x = w.weight(i, j);
            if x < 0.0 || x.fract() != 0.0 {
                return Err(SbmError::Contract(format!("weight {x} is not a count")));
            }
            let rate = p.get(labels[i], labels[j]);
            if x > 0.0 {
                if rate == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                ll += x * rate.ln() - ln_factorial(x as u64);
            }
            ll -= rate;
        }
    }
    Ok(ll)
}

/// Maximum-likelihood affinity at a fixed assignment: links (or total
/// weight) between blocks over the number of ordered pairs, 0 where a block
/// pair has no node pairs.
pub fn mle_affinity(net: &AggregatedNetwork, g: &BlockAssignment) -> Result<AffinityMatrix, SbmError> {
    check_dims(net, g)?;
    let m = g.m();
    let labels = g.labels();
    let mut total = vec![0.0; m * m];
    for i in 0..net.n() {
        for j in 0..net.n() {
            total[labels[i] * m + labels[j]] += net.weight(i, j);
        }
    }
    let sizes: Vec<u64> = g.sizes().into_iter().map(|s| s as u64).collect();
    let entries = (0..m)
        .map(|r| {
            (0..m)
                .map(|s| {
                    let pairs = pair_count(r, s, &sizes);
                    if pairs == 0 {
                        0.0
                    } else {
                        total[r * m + s] / pairs as f64
                    }
                })
                .collect()
        })
        .collect();
    let mode = if net.kind().is_binary() {
        AffinityMode::BernoulliProbability
    } else {
        AffinityMode::PoissonRate
    };
    AffinityMatrix::new(mode, entries)
}

/// Draw a directed network from the SBM.
///
/// Seed contract: one ChaCha8 stream from `seed` (stream 0); ordered pairs
/// are visited row-major, skipping the diagonal. The Bernoulli ensemble
/// consumes one uniform `f64` per pair; the Poisson ensemble one Poisson
/// draw per pair with a positive rate.
pub fn sample(g: &BlockAssignment, p: &AffinityMatrix, seed: u64) -> Result<AggregatedNetwork, SbmError> {
    if p.m() != g.m() {
        return Err(SbmError::Contract("affinity and assignment disagree on m".into()));
    }
    let n = g.n();
    let labels = g.labels();
    let mut rng = seed::stream(seed, 0);
    let mut weights = vec![0.0; n * n];
    let kind = match p.mode() {
        AffinityMode::BernoulliProbability => NetworkKind::DirectedBinary,
        AffinityMode::PoissonRate => NetworkKind::DirectedWeighted,
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p.get(labels[i], labels[j]);
            weights[i * n + j] = match p.mode() {
                AffinityMode::BernoulliProbability => {
                    if rng.random::<f64>() < pij {
                        1.0
                    } else {
                        0.0
                    }
                }
                AffinityMode::PoissonRate => {
                    if pij > 0.0 {
                        Poisson::new(pij)
                            .map_err(|e| SbmError::Contract(e.to_string()))?
                            .sample(&mut rng)
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    AggregatedNetwork::from_dense(AggregatedNetwork::synthetic_ids(n), weights, kind)
        .map_err(|e| SbmError::Contract(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::BankId;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<BankId> {
        AggregatedNetwork::synthetic_ids(n)
    }

    fn binary(n: usize, links: &[(usize, usize)]) -> AggregatedNetwork {
        let mut w = vec![0.0; n * n];
        for &(i, j) in links {
            w[i * n + j] = 1.0;
        }
        AggregatedNetwork::from_dense(ids(n), w, NetworkKind::DirectedBinary).unwrap()
    }

    fn random_binary(n: usize, density: f64, seed: u64) -> AggregatedNetwork {
        let g = BlockAssignment::single_block(n);
        sample(&g, &AffinityMatrix::bernoulli(vec![vec![density]]).unwrap(), seed).unwrap()
    }

    // Pair-enumeration oracle, written independently of the library loops.
    fn bernoulli_oracle(a: &AggregatedNetwork, labels: &[usize], p: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (i, &gi) in labels.iter().enumerate() {
            for (j, &gj) in labels.iter().enumerate() {
                if i != j {
                    let q = p[gi][gj];
                    total += if a.weight(i, j) == 1.0 { q.ln() } else { (1.0 - q).ln() };
                }
            }
        }
        total
    }

    #[test]
    fn bernoulli_two_nodes_half() {
        let p = AffinityMatrix::bernoulli(vec![vec![0.5]]).unwrap();
        for links in [vec![], vec![(0, 1)], vec![(0, 1), (1, 0)]] {
            let a = binary(2, &links);
            let ll = bernoulli_loglik(&a, &BlockAssignment::single_block(2), &p).unwrap();
            assert!((ll - 2.0 * 0.5f64.ln()).abs() < 1e-12);
            assert!((ll + 1.38629).abs() < 1e-5);
        }
    }

    #[test]
    fn bernoulli_certainty() {
        let n = 4;
        let links: Vec<_> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let a = binary(n, &links);
        let p = AffinityMatrix::bernoulli(vec![vec![1.0]]).unwrap();
        assert_eq!(bernoulli_loglik(&a, &BlockAssignment::single_block(n), &p).unwrap(), 0.0);
        let missing = binary(n, &links[1..]);
        assert_eq!(
            bernoulli_loglik(&missing, &BlockAssignment::single_block(n), &p).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn bernoulli_matches_enumeration_oracle() {
        let g = BlockAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let p = vec![vec![0.3, 0.7], vec![0.05, 0.9]];
        let aff = AffinityMatrix::bernoulli(p.clone()).unwrap();
        for seed in 0..20 {
            let a = random_binary(4, 0.5, seed);
            let ll = bernoulli_loglik(&a, &g, &aff).unwrap();
            assert!((ll - bernoulli_oracle(&a, g.labels(), &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn bernoulli_dimension_mismatch() {
        let a = binary(3, &[]);
        let p = AffinityMatrix::bernoulli(vec![vec![0.5]]).unwrap();
        assert!(bernoulli_loglik(&a, &BlockAssignment::single_block(4), &p).is_err());
    }

    #[test]
    fn poisson_empty_and_single() {
        let g = BlockAssignment::new(vec![0, 1, 1], 2).unwrap();
        let rates = vec![vec![0.2, 0.4], vec![1.5, 0.1]];
        let p = AffinityMatrix::poisson(rates.clone()).unwrap();
        let w = AggregatedNetwork::empty(ids(3), NetworkKind::DirectedWeighted);
        let expected: f64 = -(0.4 + 0.4 + 1.5 + 1.5 + 0.1 + 0.1);
        assert!((poisson_loglik(&w, &g, &p).unwrap() - expected).abs() < 1e-12);

        let one = AggregatedNetwork::from_dense(ids(2), vec![0.0, 1.0, 0.0, 0.0], NetworkKind::DirectedWeighted)
            .unwrap();
        let g1 = BlockAssignment::single_block(2);
        let p1 = AffinityMatrix::poisson(vec![vec![1.0]]).unwrap();
        // ln 1 - 1 - ln 1! for the linked pair, -1 for the empty one.
        assert!((poisson_loglik(&one, &g1, &p1).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_rejects_non_integer() {
        let w = AggregatedNetwork::from_dense(ids(2), vec![0.0, 1.5, 0.0, 0.0], NetworkKind::DirectedWeighted)
            .unwrap();
        let p = AffinityMatrix::poisson(vec![vec![1.0]]).unwrap();
        assert!(poisson_loglik(&w, &BlockAssignment::single_block(2), &p).is_err());
    }

    #[test]
    fn mle_complete_bipartite() {
        // nodes 0,1 in block 0 send to nodes 2,3 in block 1
        let a = binary(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]);
        let g = BlockAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let p = mle_affinity(&a, &g).unwrap();
        assert_eq!(p.rows(), &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let empty = mle_affinity(&binary(4, &[]), &g).unwrap();
        assert!(empty.rows().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn mle_matches_pair_census() {
        let g = BlockAssignment::new(vec![0, 1, 0, 1, 1, 0], 2).unwrap();
        for seed in 0..10 {
            let a = random_binary(6, 0.4, 100 + seed);
            let p = mle_affinity(&a, &g).unwrap();
            for r in 0..2 {
                for s in 0..2 {
                    let (mut links, mut pairs) = (0, 0);
                    for i in 0..6 {
                        for j in 0..6 {
                            if i != j && g.labels()[i] == r && g.labels()[j] == s {
                                pairs += 1;
                                links += a.weight(i, j) as usize;
                            }
                        }
                    }
                    assert_eq!(p.get(r, s), links as f64 / pairs as f64);
                }
            }
        }
    }

    #[test]
    fn mle_is_a_likelihood_maximum() {
        let g = BlockAssignment::new(vec![0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let a = random_binary(7, 0.45, 3);
        let p = mle_affinity(&a, &g).unwrap();
        let best = bernoulli_loglik(&a, &g, &p).unwrap();
        for r in 0..2 {
            for s in 0..2 {
                for eps in [-1e-3, 1e-3] {
                    let mut rows = p.rows().to_vec();
                    rows[r][s] = (rows[r][s] + eps).clamp(0.0, 1.0);
                    let q = AffinityMatrix::bernoulli(rows).unwrap();
                    assert!(bernoulli_loglik(&a, &g, &q).unwrap() <= best);
                }
            }
        }
    }

    #[test]
    fn entropy_closed_forms() {
        let zero = EdgeCounts::new(vec![2, 2], vec![0; 4]).unwrap();
        assert_eq!(entropy(&zero).unwrap(), 0.0);
        let half = EdgeCounts::new(vec![2, 2], vec![0, 2, 0, 0]).unwrap();
        assert!((entropy(&half).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((entropy(&half).unwrap() - 2.77259).abs() < 1e-5);
        let full = EdgeCounts::new(vec![2, 2], vec![0, 4, 0, 0]).unwrap();
        assert_eq!(entropy(&full).unwrap(), 0.0);
        let over = EdgeCounts::new(vec![2, 2], vec![3, 0, 0, 0]).unwrap();
        assert!(entropy(&over).is_err());
    }

    #[test]
    fn entropy_tracks_log_microcanonical_count() {
        // Single block of 30 nodes: pairs = 870. Stirling regime.
        let pairs: u64 = 30 * 29;
        for e in [50u64, 150, 300, 435] {
            let counts = EdgeCounts::new(vec![30], vec![e]).unwrap();
            let s = entropy(&counts).unwrap();
            let ln_choose = statrs::function::factorial::ln_binomial(pairs, e);
            assert!(((s - ln_choose) / ln_choose).abs() < 0.05, "e = {e}");
        }
    }

    #[test]
    fn sample_extremes_and_determinism() {
        let g = BlockAssignment::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        let zero = AffinityMatrix::bernoulli(vec![vec![0.0; 2]; 2]).unwrap();
        assert_eq!(sample(&g, &zero, 1).unwrap().nonzero_entries(), 0);
        let one = AffinityMatrix::bernoulli(vec![vec![1.0; 2]; 2]).unwrap();
        assert_eq!(sample(&g, &one, 1).unwrap().nonzero_entries(), 20);
        let half = AffinityMatrix::bernoulli(vec![vec![0.5; 2]; 2]).unwrap();
        assert_eq!(sample(&g, &half, 9).unwrap(), sample(&g, &half, 9).unwrap());
        let rate = AffinityMatrix::poisson(vec![vec![2.0; 2]; 2]).unwrap();
        let w = sample(&g, &rate, 4).unwrap();
        assert!(w.has_integer_weights());
        assert_eq!(w.kind(), NetworkKind::DirectedWeighted);
    }

    #[test]
    fn sample_frequencies_match_table_affinity() {
        // Borrowers (45) then lenders (30); rows/cols in that order.
        let p = vec![vec![0.0116, 0.0020], vec![0.23, 0.037]];
        let mut labels = vec![0; 45];
        labels.extend(vec![1; 30]);
        let g = BlockAssignment::new(labels, 2).unwrap();
        let aff = AffinityMatrix::bernoulli(p.clone()).unwrap();
        let draws = 1000;
        let mut links = [[0.0f64; 2]; 2];
        for seed in 0..draws {
            let net = sample(&g, &aff, seed).unwrap();
            let counts = EdgeCounts::from_network(&net, &g).unwrap();
            for r in 0..2 {
                for s in 0..2 {
                    links[r][s] += counts.e(r, s) as f64;
                }
            }
        }
        let sizes = [45u64, 30];
        for r in 0..2 {
            for s in 0..2 {
                let pairs = pair_count(r, s, &sizes) as f64 * draws as f64;
                let freq = links[r][s] / pairs;
                let se = (p[r][s] * (1.0 - p[r][s]) / pairs).sqrt();
                assert!((freq - p[r][s]).abs() < 3.0 * se, "({r},{s}) freq {freq}");
            }
        }
    }

    #[test]
    fn mle_converges_with_size() {
        let p = vec![vec![0.3, 0.1], vec![0.05, 0.2]];
        let aff = AffinityMatrix::bernoulli(p.clone()).unwrap();
        let err_at = |n: usize| {
            let g = BlockAssignment::new((0..n).map(|i| i % 2).collect(), 2).unwrap();
            let est = mle_affinity(&sample(&g, &aff, 11).unwrap(), &g).unwrap();
            let mut worst: f64 = 0.0;
            for r in 0..2 {
                for s in 0..2 {
                    let pairs = pair_count(r, s, &[(n / 2) as u64, (n / 2) as u64]) as f64;
                    let se = (p[r][s] * (1.0 - p[r][s]) / pairs).sqrt();
                    worst = worst.max((est.get(r, s) - p[r][s]).abs() / se);
                }
            }
            worst
        };
        // Errors stay within a few standard errors at every size.
        for n in [20, 80, 320] {
            assert!(err_at(n) < 4.0);
        }
    }

    proptest! {
        #[test]
        fn poisson_and_bernoulli_agree_for_small_rates(
            seed in 0u64..500, rate in 1e-4f64..1e-2,
        ) {
            let n = 5;
            let a = random_binary(n, 0.3, seed);
            let g = BlockAssignment::single_block(n);
            let lb = bernoulli_loglik(&a, &g, &AffinityMatrix::bernoulli(vec![vec![rate]]).unwrap()).unwrap();
            let w = AggregatedNetwork::from_dense(ids(n), a.weights().to_vec(), NetworkKind::DirectedWeighted).unwrap();
            let lp = poisson_loglik(&w, &g, &AffinityMatrix::poisson(vec![vec![rate]]).unwrap()).unwrap();
            // Linked pairs differ by exactly `rate`; empty pairs by O(rate^2).
            let links = a.nonzero_entries() as f64;
            let empty = (n * (n - 1)) as f64 - links;
            prop_assert!((lb - lp).abs() <= links * rate + empty * rate * rate + 1e-12);
        }

        #[test]
        fn entropy_invariant_under_block_swap(seed in 0u64..200, bits in 0u64..128) {
            let a = random_binary(7, 0.35, seed);
            let g = BlockAssignment::from_bits(7, bits);
            let s1 = entropy(&EdgeCounts::from_network(&a, &g).unwrap()).unwrap();
            let s2 = entropy(&EdgeCounts::from_network(&a, &g.relabeled(&[1, 0])).unwrap()).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}
