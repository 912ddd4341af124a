//! Description-length minimization over block assignments.
//!
//! [`mcmc_minimize`] searches assignments with `m` blocks for the lowest
//! microcanonical entropy with a Metropolis chain over single-node moves.
//! [`select_model`] compares the best one- and two-block descriptions by
//! their description length `S + L`, where the model cost is
//!
//! ```text
//! L(m, K, N) = ln C(m^2 + K - 1, K) + N ln m
//! ```
//!
//! for `K` links (or multi-edges) among `N` nodes.
//!
//! Move proposals follow the neighbour-block heuristic: pick a random
//! neighbour `j` of the moving node, then move to block `s` with probability
//! proportional to `e_ts + e_st + eps` where `t` is the block of `j`.
//! Restart 0 starts from a degree split (highest out-degrees first); the
//! others start from uniform random labels. Every restart walks the anneal
//! schedule and finishes with a zero-temperature refinement from its best
//! state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::AggregatedNetwork;
use crate::sbm::{self, block_entropy, AffinityMatrix, BlockAssignment, Ensemble, SbmError};
use crate::seed;

/// Smoothing of the neighbour-block proposal.
const PROPOSAL_EPSILON: f64 = 1.0;

/// Entropy changes smaller than this are treated as ties.
const ENTROPY_TOL: f64 = 1e-10;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum InferenceError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sbm(#[from] SbmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub max_blocks: usize,
    pub restarts: usize,
    pub sweeps_per_restart: usize,
    /// Inverse temperatures, walked in order; sweeps are split evenly.
    pub anneal_schedule: Vec<f64>,
    pub seed: u64,
    /// Two-block fits whose smaller block holds at most this fraction of
    /// the nodes count as a single block.
    pub small_block_fraction: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            max_blocks: 2,
            restarts: 8,
            sweeps_per_restart: 40,
            anneal_schedule: vec![1.0, 2.0, 4.0, 8.0],
            seed: 0,
            small_block_fraction: 0.05,
        }
    }
}

impl InferenceConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.restarts == 0 {
            return Err(InferenceError::Config("restarts must be at least 1".into()));
        }
        if self.max_blocks == 0 {
            return Err(InferenceError::Config("max_blocks must be at least 1".into()));
        }
        if !(self.small_block_fraction > 0.0 && self.small_block_fraction < 0.5) {
            return Err(InferenceError::Config(
                "small_block_fraction must lie in (0, 0.5)".into(),
            ));
        }
        if self.anneal_schedule.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(InferenceError::Config(
                "anneal schedule needs finite non-negative inverse temperatures".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub assignment: BlockAssignment,
    pub entropy: f64,
    pub model_cost: f64,
    pub description_length: f64,
    /// Maximum-likelihood affinity at `assignment`.
    pub affinity: AffinityMatrix,
    pub effective_blocks: usize,
}

impl InferenceResult {
    pub fn m(&self) -> usize {
        self.assignment.m()
    }
}

/// Minimization output with the best-so-far entropy after every sweep of
/// the winning restart (the final entry follows the greedy refinement).
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub assignment: BlockAssignment,
    pub entropy: f64,
    pub best_trace: Vec<f64>,
}

/// Sparse view of an integer-weighted network.
struct Adjacency {
    n: usize,
    out: Vec<Vec<(usize, u64)>>,
    inc: Vec<Vec<(usize, u64)>>,
    neighbors: Vec<Vec<usize>>,
    total: u64,
    log_factorials: f64,
    ensemble: Ensemble,
}

impl Adjacency {
    fn new(net: &AggregatedNetwork) -> Result<Self, InferenceError> {
        let ensemble = Ensemble::for_network(net)?;
        let n = net.n();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        let mut neighbors = vec![Vec::new(); n];
        let mut total = 0;
        for i in 0..n {
            for j in 0..n {
                let w = net.weight(i, j);
                if w > 0.0 {
                    let w = w as u64;
                    out[i].push((j, w));
                    inc[j].push((i, w));
                    total += w;
                }
                if i != j && (w > 0.0 || net.weight(j, i) > 0.0) {
                    neighbors[i].push(j);
                }
            }
        }
        let log_factorials = match ensemble {
            Ensemble::Bernoulli => 0.0,
            Ensemble::Poisson => sbm::log_factorial_sum(net),
        };
        Ok(Adjacency {
            n,
            out,
            inc,
            neighbors,
            total,
            log_factorials,
            ensemble,
        })
    }
}

struct Chain<'a> {
    adj: &'a Adjacency,
    m: usize,
    labels: Vec<usize>,
    sizes: Vec<u64>,
    e: Vec<u64>,
    entropy: f64,
    trial_sizes: Vec<u64>,
    trial_e: Vec<u64>,
    out_to: Vec<u64>,
    in_from: Vec<u64>,
}

impl<'a> Chain<'a> {
    fn new(adj: &'a Adjacency, m: usize, labels: Vec<usize>) -> Self {
        let mut sizes = vec![0u64; m];
        for &g in &labels {
            sizes[g] += 1;
        }
        let mut e = vec![0u64; m * m];
        for i in 0..adj.n {
            for &(j, w) in &adj.out[i] {
                e[labels[i] * m + labels[j]] += w;
            }
        }
        let entropy = block_entropy(adj.ensemble, m, &sizes, &e);
        Chain {
            adj,
            m,
            labels,
            trial_sizes: sizes.clone(),
            trial_e: e.clone(),
            sizes,
            e,
            entropy,
            out_to: vec![0; m],
            in_from: vec![0; m],
        }
    }

    fn tally(&mut self, i: usize) {
        self.out_to.iter_mut().for_each(|x| *x = 0);
        self.in_from.iter_mut().for_each(|x| *x = 0);
        for &(j, w) in &self.adj.out[i] {
            self.out_to[self.labels[j]] += w;
        }
        for &(j, w) in &self.adj.inc[i] {
            self.in_from[self.labels[j]] += w;
        }
    }

    /// Entropy after moving node `i` to block `s`, staged in the trial
    /// buffers. Requires a prior [`Chain::tally`] of `i`.
    fn trial(&mut self, i: usize, s: usize) -> f64 {
        let m = self.m;
        let r = self.labels[i];
        self.trial_e.copy_from_slice(&self.e);
        self.trial_sizes.copy_from_slice(&self.sizes);
        for t in 0..m {
            self.trial_e[r * m + t] -= self.out_to[t];
            self.trial_e[t * m + r] -= self.in_from[t];
        }
        for t in 0..m {
            self.trial_e[s * m + t] += self.out_to[t];
            self.trial_e[t * m + s] += self.in_from[t];
        }
        self.trial_sizes[r] -= 1;
        self.trial_sizes[s] += 1;
        block_entropy(self.adj.ensemble, m, &self.trial_sizes, &self.trial_e)
    }

    fn commit(&mut self, i: usize, s: usize, entropy: f64) {
        std::mem::swap(&mut self.e, &mut self.trial_e);
        std::mem::swap(&mut self.sizes, &mut self.trial_sizes);
        self.labels[i] = s;
        self.entropy = entropy;
    }

    fn propose<R: Rng>(&self, i: usize, rng: &mut R) -> usize {
        let m = self.m;
        let nb = &self.adj.neighbors[i];
        if nb.is_empty() {
            return rng.random_range(0..m);
        }
        let t = self.labels[nb[rng.random_range(0..nb.len())]];
        let weight = |s: usize| (self.e[t * m + s] + self.e[s * m + t]) as f64;
        let k_t: f64 = (0..m).map(weight).sum();
        let eps = PROPOSAL_EPSILON * m as f64;
        if rng.random::<f64>() * (k_t + eps) < eps {
            return rng.random_range(0..m);
        }
        let mut x = rng.random::<f64>() * k_t;
        for s in 0..m {
            x -= weight(s);
            if x < 0.0 {
                return s;
            }
        }
        m - 1
    }

    /// Move every node to its best block until no move lowers the entropy.
    fn refine(&mut self) {
        loop {
            let mut improved = false;
            for i in 0..self.adj.n {
                self.tally(i);
                let r = self.labels[i];
                let mut best = (r, self.entropy);
                for s in 0..self.m {
                    if s == r {
                        continue;
                    }
                    let h = self.trial(i, s);
                    if h < best.1 - ENTROPY_TOL {
                        best = (s, h);
                    }
                }
                if best.0 != r {
                    let h = self.trial(i, best.0);
                    self.commit(i, best.0, h);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }
}

struct RestartOutcome {
    labels: Vec<usize>,
    entropy: f64,
    trace: Vec<f64>,
}

fn degree_split(adj: &Adjacency, m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..adj.n).collect();
    order.sort_by(|&a, &b| adj.out[b].len().cmp(&adj.out[a].len()).then(a.cmp(&b)));
    let mut labels = vec![0; adj.n];
    let per_block = adj.n.div_ceil(m);
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = (rank / per_block).min(m - 1);
    }
    labels
}

fn run_restart(adj: &Adjacency, m: usize, cfg: &InferenceConfig, restart: usize) -> RestartOutcome {
    let mut rng = seed::stream(cfg.seed, restart as u64);
    let labels = if restart == 0 {
        degree_split(adj, m)
    } else {
        (0..adj.n).map(|_| rng.random_range(0..m)).collect()
    };
    let mut chain = Chain::new(adj, m, labels);
    let mut best_labels = chain.labels.clone();
    let mut best = chain.entropy;
    let mut trace = Vec::with_capacity(cfg.sweeps_per_restart + 1);

    let stages = cfg.anneal_schedule.len().max(1);
    for sweep in 0..cfg.sweeps_per_restart {
        let beta = cfg
            .anneal_schedule
            .get(sweep * stages / cfg.sweeps_per_restart.max(1))
            .copied()
            .unwrap_or(1.0);
        for _ in 0..adj.n {
            let i = rng.random_range(0..adj.n);
            let s = chain.propose(i, &mut rng);
            if s == chain.labels[i] {
                continue;
            }
            chain.tally(i);
            let h = chain.trial(i, s);
            let delta = h - chain.entropy;
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                chain.commit(i, s, h);
                if chain.entropy < best - ENTROPY_TOL {
                    best = chain.entropy;
                    best_labels.copy_from_slice(&chain.labels);
                }
            }
        }
        trace.push(best);
    }

    // Integer block counts make the rebuilt entropy equal `best` exactly.
    let mut polished = Chain::new(adj, m, best_labels);
    polished.refine();
    trace.push(polished.entropy);
    RestartOutcome {
        labels: polished.labels,
        entropy: polished.entropy,
        trace,
    }
}

/// Lowest-entropy `m`-block assignment found; see the module docs.
pub fn mcmc_minimize(
    net: &AggregatedNetwork,
    m: usize,
    cfg: &InferenceConfig,
) -> Result<BlockAssignment, InferenceError> {
    Ok(mcmc_minimize_traced(net, m, cfg)?.assignment)
}

pub fn mcmc_minimize_traced(
    net: &AggregatedNetwork,
    m: usize,
    cfg: &InferenceConfig,
) -> Result<MinimizeOutcome, InferenceError> {
    cfg.validate()?;
    let adj = Adjacency::new(net)?;
    minimize(&adj, m, cfg)
}

fn minimize(adj: &Adjacency, m: usize, cfg: &InferenceConfig) -> Result<MinimizeOutcome, InferenceError> {
    if m == 0 {
        return Err(InferenceError::Contract("m must be at least 1".into()));
    }
    if adj.n < m {
        return Err(InferenceError::Contract(format!(
            "{} nodes cannot fill {m} blocks",
            adj.n
        )));
    }
    if m == 1 {
        let chain = Chain::new(adj, 1, vec![0; adj.n]);
        let entropy = chain.entropy + adj.log_factorials;
        return Ok(MinimizeOutcome {
            assignment: BlockAssignment::single_block(adj.n),
            entropy,
            best_trace: vec![entropy],
        });
    }
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(adj, m, cfg, r))
        .collect();
    // Lowest entropy wins; ties go to the lowest restart index.
    let best = outcomes
        .into_iter()
        .reduce(|a, b| if b.entropy < a.entropy { b } else { a })
        .expect("at least one restart");
    let assignment = BlockAssignment::new(best.labels, m)?.canonical();
    Ok(MinimizeOutcome {
        assignment,
        entropy: best.entropy + adj.log_factorials,
        best_trace: best.trace.into_iter().map(|s| s + adj.log_factorials).collect(),
    })
}

/// `ln C(q + k - 1, k)`: the number of ways to spread `k` edges over `q`
/// block pairs.
pub fn ln_multiset_choose(q: u64, k: u64) -> f64 {
    (1..q).map(|i| ((k + i) as f64 / i as f64).ln()).sum()
}

/// `L = ln C(m^2 + K - 1, K) + N ln m`.
pub fn model_cost(m: usize, edges: u64, n: usize) -> f64 {
    ln_multiset_choose((m * m) as u64, edges) + n as f64 * (m as f64).ln()
}

/// Blocks holding more than `fraction * N` nodes, at least 1.
pub fn effective_blocks(assignment: &BlockAssignment, fraction: f64) -> usize {
    let limit = fraction * assignment.n() as f64;
    assignment
        .sizes()
        .into_iter()
        .filter(|&s| s as f64 > limit + 1e-9)
        .count()
        .max(1)
}

/// Fit `m = 1 ..= max_blocks` and keep the smallest description length;
/// ties keep the smaller `m`.
pub fn select_model(net: &AggregatedNetwork, cfg: &InferenceConfig) -> Result<InferenceResult, InferenceError> {
    cfg.validate()?;
    if net.n() < 2 {
        return Err(InferenceError::Contract(format!(
            "model selection needs at least 2 nodes, got {}",
            net.n()
        )));
    }
    let adj = Adjacency::new(net)?;
    let mut best: Option<(BlockAssignment, f64, f64)> = None;
    for m in 1..=cfg.max_blocks.min(net.n()) {
        let fit = minimize(&adj, m, cfg)?;
        let cost = model_cost(m, adj.total, adj.n);
        let dl = fit.entropy + cost;
        let better = match &best {
            None => true,
            Some((_, s, l)) => dl < s + l,
        };
        if better {
            best = Some((fit.assignment, fit.entropy, cost));
        }
    }
    let (assignment, entropy, model_cost) = best.expect("m = 1 always fits");
    let affinity = sbm::mle_affinity(net, &assignment)?;
    let effective_blocks = effective_blocks(&assignment, cfg.small_block_fraction);
    Ok(InferenceResult {
        description_length: entropy + model_cost,
        assignment,
        entropy,
        model_cost,
        affinity,
        effective_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::NetworkKind;
    use crate::sbm::{sample, EdgeCounts};
    use proptest::prelude::*;

    fn random_binary(n: usize, density: f64, seed: u64) -> AggregatedNetwork {
        sample(
            &BlockAssignment::single_block(n),
            &AffinityMatrix::bernoulli(vec![vec![density]]).unwrap(),
            seed,
        )
        .unwrap()
    }

    fn planted(sizes: &[usize], p: Vec<Vec<f64>>, seed: u64) -> (AggregatedNetwork, BlockAssignment) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &k)| vec![b; k]).collect();
        let g = BlockAssignment::new(labels, sizes.len()).unwrap();
        let net = sample(&g, &AffinityMatrix::bernoulli(p).unwrap(), seed).unwrap();
        (net, g)
    }

    // Exhaustive oracle over all 2^N bipartitions, with its own pair loop
    // and entropy formula.
    fn brute_force_min_entropy(net: &AggregatedNetwork) -> f64 {
        let n = net.n();
        let h = |x: f64| {
            let mut v = 0.0;
            if x > 0.0 {
                v -= x * x.ln();
            }
            if x < 1.0 {
                v -= (1.0 - x) * (1.0 - x).ln();
            }
            v
        };
        let mut best = f64::INFINITY;
        for bits in 0u64..(1 << n) {
            let label = |i: usize| ((bits >> i) & 1) as usize;
            let mut links = [[0.0f64; 2]; 2];
            let mut pairs = [[0.0f64; 2]; 2];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        pairs[label(i)][label(j)] += 1.0;
                        links[label(i)][label(j)] += net.weight(i, j);
                    }
                }
            }
            let mut s = 0.0;
            for r in 0..2 {
                for t in 0..2 {
                    if pairs[r][t] > 0.0 {
                        s += pairs[r][t] * h(links[r][t] / pairs[r][t]);
                    }
                }
            }
            best = best.min(s);
        }
        best
    }

    fn entropy_of(net: &AggregatedNetwork, g: &BlockAssignment) -> f64 {
        sbm::entropy(&EdgeCounts::from_network(net, g).unwrap()).unwrap()
    }

    #[test]
    fn single_block_needs_no_search() {
        let net = random_binary(6, 0.3, 1);
        let g = mcmc_minimize(&net, 1, &InferenceConfig::default()).unwrap();
        assert_eq!(g, BlockAssignment::single_block(6));
    }

    #[test]
    fn too_few_nodes() {
        let net = random_binary(1, 0.3, 1);
        assert!(matches!(
            mcmc_minimize(&net, 2, &InferenceConfig::default()),
            Err(InferenceError::Contract(_))
        ));
    }

    #[test]
    fn perfect_bipartite_recovered_every_seed() {
        let (net, truth) = planted(&[10, 10], vec![vec![0.0, 1.0], vec![0.0, 0.0]], 0);
        for seed in 0..100 {
            let cfg = InferenceConfig::default().with_seed(seed);
            let g = mcmc_minimize(&net, 2, &cfg).unwrap();
            assert!(
                g == truth || g == truth.relabeled(&[1, 0]),
                "seed {seed}: {:?}",
                g.labels()
            );
        }
    }

    #[test]
    fn eight_nodes_reach_exhaustive_minimum() {
        for seed in 0..20 {
            let net = random_binary(8, 0.35, 1000 + seed);
            let g = mcmc_minimize(&net, 2, &InferenceConfig::default().with_seed(seed)).unwrap();
            let oracle = brute_force_min_entropy(&net);
            assert!((entropy_of(&net, &g) - oracle).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn best_trace_never_increases() {
        let (net, _) = planted(&[20, 15], vec![vec![0.05, 0.4], vec![0.1, 0.05]], 5);
        let out = mcmc_minimize_traced(&net, 2, &InferenceConfig::default().with_seed(3)).unwrap();
        assert!(out.best_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*out.best_trace.last().unwrap(), out.entropy);
        assert!((entropy_of(&net, &out.assignment) - out.entropy).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_thread_pools() {
        let (net, _) = planted(&[25, 20], vec![vec![0.02, 0.3], vec![0.01, 0.05]], 8);
        let cfg = InferenceConfig {
            restarts: 6,
            ..InferenceConfig::default().with_seed(42)
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| select_model(&net, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(8));
    }

    #[test]
    fn model_cost_values() {
        assert_eq!(model_cost(1, 100, 50), 0.0);
        // C(K + 3, 3) for m = 2
        let k = 10u64;
        let expected = ((13.0 * 12.0 * 11.0) / 6.0f64).ln() + 20.0 * 2f64.ln();
        assert!((model_cost(2, k, 20) - expected).abs() < 1e-12);
    }

    #[test]
    fn dense_planted_bipartite_selects_two_blocks() {
        // Average 2010 affinity with a 5x signal boost.
        let p = vec![vec![0.058, 0.010], vec![1.0, 0.185]];
        let (net, _) = planted(&[45, 30], p, 17);
        let res = select_model(&net, &InferenceConfig::default().with_seed(1)).unwrap();
        assert_eq!(res.m(), 2);
        assert_eq!(res.effective_blocks, 2);
        assert!((res.description_length - res.entropy - res.model_cost).abs() < 1e-9);
    }

    #[test]
    fn uniform_random_net_is_one_block() {
        let mut single = 0;
        for seed in 0..200 {
            let net = random_binary(75, 0.1, 5000 + seed);
            let res = select_model(&net, &InferenceConfig::default().with_seed(seed)).unwrap();
            if res.effective_blocks == 1 {
                single += 1;
            }
        }
        assert!(single >= 190, "{single}/200 one-block verdicts");
    }

    #[test]
    fn tiny_block_collapses_at_five_percent() {
        let mut labels = vec![0; 38];
        labels.extend([1, 1]);
        let g = BlockAssignment::new(labels, 2).unwrap();
        assert_eq!(effective_blocks(&g, 0.05), 1);
        let mut labels = vec![0; 37];
        labels.extend([1, 1, 1]);
        assert_eq!(effective_blocks(&BlockAssignment::new(labels, 2).unwrap(), 0.05), 2);
    }

    #[test]
    fn planted_two_node_block_is_one_effective_block() {
        // Two hubs lending to everyone among 40 banks.
        let p = vec![vec![0.0, 0.9], vec![0.02, 0.02]];
        let (net, _) = planted(&[2, 38], p, 4);
        let res = select_model(&net, &InferenceConfig::default()).unwrap();
        assert_eq!(res.m(), 2);
        assert_eq!(res.effective_blocks, 1);
    }

    #[test]
    fn poisson_inference_on_weighted_network() {
        let labels: Vec<usize> = (0..30).map(|i| usize::from(i >= 18)).collect();
        let g = BlockAssignment::new(labels, 2).unwrap();
        let rates = AffinityMatrix::poisson(vec![vec![0.05, 0.02], vec![2.0, 0.1]]).unwrap();
        let net = sample(&g, &rates, 2).unwrap();
        let res = select_model(&net, &InferenceConfig::default()).unwrap();
        assert_eq!(res.effective_blocks, 2);
        assert!(res.assignment == g || res.assignment == g.relabeled(&[1, 0]));
        // entropy is the negative maximized Poisson log-likelihood
        let ll = sbm::poisson_loglik(&net, &res.assignment, &res.affinity).unwrap();
        assert!((res.entropy + ll).abs() < 1e-8);
    }

    #[test]
    fn non_integer_weights_rejected() {
        let net = AggregatedNetwork::from_dense(
            AggregatedNetwork::synthetic_ids(2),
            vec![0.0, 0.5, 0.0, 0.0],
            NetworkKind::DirectedWeighted,
        )
        .unwrap();
        assert!(select_model(&net, &InferenceConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = InferenceConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = InferenceConfig {
            small_block_fraction: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn label_swap_leaves_entropy_unchanged(seed in 0u64..1000, bits in 0u64..1024) {
            let net = random_binary(10, 0.3, seed);
            let g = BlockAssignment::from_bits(10, bits);
            let a = entropy_of(&net, &g);
            let b = entropy_of(&net, &g.relabeled(&[1, 0]));
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn small_networks_match_brute_force(seed in 0u64..10_000, n in 3usize..=8, d in 0.1f64..0.7) {
            let net = random_binary(n, d, seed);
            let g = mcmc_minimize(&net, 2, &InferenceConfig::default().with_seed(seed)).unwrap();
            prop_assert!((entropy_of(&net, &g) - brute_force_min_entropy(&net)).abs() < 1e-9);
        }
    }
}
