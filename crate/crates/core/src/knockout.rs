//! Degree-mutation experiments between a structured and an unstructured
//! network over the same banks.
//!
//! For a pair `(a, b)` the banks active in both form the common set; `C` and
//! `D` are `a` and `b` induced on it. Banks are ranked by how much their
//! `(k_in, k_out)` changes between `a` and `b`, and their links in `C` are
//! replaced by their links in `D` one bank at a time (out-row and in-column
//! together) until the inferred structure becomes random. The banks
//! substituted up to that point form the pair's critical set.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{label_structure, ClassifyError, Structure, StructureLabel};
use crate::inference::{select_model, InferenceConfig, InferenceError};
use crate::netcore::{AggregatedNetwork, BankId, NetError};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Error, Debug)]
pub enum KnockoutError {
    #[error("degenerate pair: {0}")]
    Degenerate(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPair {
    pub a: AggregatedNetwork,
    pub b: AggregatedNetwork,
    common: Vec<BankId>,
}

impl NetworkPair {
    pub fn new(a: AggregatedNetwork, b: AggregatedNetwork) -> Self {
        let active = |net: &AggregatedNetwork| -> BTreeSet<BankId> {
            (0..net.n())
                .filter(|&i| net.total_degree(i) > 0)
                .map(|i| net.nodes()[i].clone())
                .collect()
        };
        let common = active(&a).intersection(&active(&b)).cloned().collect();
        NetworkPair { a, b, common }
    }

    /// Banks with non-zero degree in both networks, sorted.
    pub fn common(&self) -> &[BankId] {
        &self.common
    }
}

/// `a` induced on the common banks.
pub fn restrict_common(pair: &NetworkPair) -> Result<AggregatedNetwork, KnockoutError> {
    if pair.common.is_empty() {
        return Err(KnockoutError::Degenerate("no bank is active in both networks".into()));
    }
    Ok(pair.a.induced_by_ids(&pair.common)?)
}

fn restrict_b(pair: &NetworkPair) -> Result<AggregatedNetwork, KnockoutError> {
    if pair.common.is_empty() {
        return Err(KnockoutError::Degenerate("no bank is active in both networks".into()));
    }
    Ok(pair.b.induced_by_ids(&pair.common)?)
}

/// Euclidean distance between `(k_in, k_out)` of `bank` in `a` and in `b`.
pub fn delta_k(a: &AggregatedNetwork, b: &AggregatedNetwork, bank: &BankId) -> Result<f64, KnockoutError> {
    let (Some(i), Some(j)) = (a.index_of(bank), b.index_of(bank)) else {
        return Err(KnockoutError::Contract(format!("bank {bank} missing from the pair")));
    };
    let d_in = a.in_degree(i) as f64 - b.in_degree(j) as f64;
    let d_out = a.out_degree(i) as f64 - b.out_degree(j) as f64;
    Ok(d_in.hypot(d_out))
}

/// Replace the out-row and in-column of node `i` in `net` with those of
/// `source` (same roster).
pub fn substitute(net: &AggregatedNetwork, source: &AggregatedNetwork, i: usize) -> AggregatedNetwork {
    let n = net.n();
    let mut w = net.weights().to_vec();
    for j in 0..n {
        w[i * n + j] = source.weight(i, j);
        w[j * n + i] = source.weight(j, i);
    }
    AggregatedNetwork::from_dense(net.nodes().to_vec(), w, net.kind()).expect("rows of a valid network")
}

pub fn infer_label(net: &AggregatedNetwork, cfg: &InferenceConfig) -> Result<StructureLabel, KnockoutError> {
    Ok(label_structure(&select_model(net, cfg)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutationPath {
    /// Common banks by decreasing `delta_k`, ties by id.
    pub order: Vec<BankId>,
    pub delta_k: Vec<f64>,
    /// Shortest prefix of `order` whose substitution yields a random label.
    pub critical: Vec<BankId>,
}

struct PreparedPair {
    c: AggregatedNetwork,
    d: AggregatedNetwork,
}

fn prepare(pair: &NetworkPair, cfg: &InferenceConfig) -> Result<PreparedPair, KnockoutError> {
    let c = restrict_common(pair)?;
    let d = restrict_b(pair)?;
    let lc = infer_label(&c, cfg)?;
    if lc.value != Structure::Bipartite {
        return Err(KnockoutError::Precondition(format!(
            "restricted first network is {:?}, not bipartite",
            lc.value
        )));
    }
    let ld = infer_label(&d, cfg)?;
    if ld.value != Structure::Random {
        return Err(KnockoutError::Precondition(format!(
            "restricted second network is {:?}, not random",
            ld.value
        )));
    }
    Ok(PreparedPair { c, d })
}

/// Substitute banks of `order` (indices into the common roster) until the
/// label is random; returns how many were needed.
fn substitutions_to_random(
    prepared: &PreparedPair,
    order: &[usize],
    cfg: &InferenceConfig,
) -> Result<usize, KnockoutError> {
    let mut current = prepared.c.clone();
    for (k, &i) in order.iter().enumerate() {
        current = substitute(&current, &prepared.d, i);
        if infer_label(&current, cfg)?.value == Structure::Random {
            return Ok(k + 1);
        }
    }
    Err(KnockoutError::Contract(
        "substituting every bank did not reach a random label".into(),
    ))
}

pub fn mutation_path(pair: &NetworkPair, cfg: &InferenceConfig) -> Result<MutationPath, KnockoutError> {
    let prepared = prepare(pair, cfg)?;
    let mut ranked: Vec<(usize, f64)> = pair
        .common
        .iter()
        .enumerate()
        .map(|(i, bank)| Ok((i, delta_k(&pair.a, &pair.b, bank)?)))
        .collect::<Result<_, KnockoutError>>()?;
    // common is sorted by id, so a stable sort keeps id order on ties
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
    let order: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    let count = substitutions_to_random(&prepared, &order, cfg)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| pair.common[i].clone()).collect::<Vec<_>>();
    Ok(MutationPath {
        order: ids(&order),
        delta_k: ranked.iter().map(|r| r.1).collect(),
        critical: ids(&order[..count]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub pair: usize,
    pub common_size: usize,
    pub critical: Vec<BankId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedPair {
    pub pair: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankScore {
    pub bank: BankId,
    /// Fraction of valid pairs with the bank in the critical set.
    pub score: f64,
    pub critical_in: usize,
    pub common_in: usize,
    /// Never in the common set of a valid pair.
    pub absent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnockoutMetadata {
    pub substitution: &'static str,
    pub conflicts: &'static str,
    pub order: &'static str,
    pub inference: InferenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnockoutReport {
    pub valid_pairs: usize,
    pub pairs: Vec<PairOutcome>,
    pub excluded: Vec<ExcludedPair>,
    /// Sorted by decreasing score, ties by id.
    pub scores: Vec<BankScore>,
    pub metadata: KnockoutMetadata,
}

impl KnockoutReport {
    pub fn score_of(&self, bank: &BankId) -> Option<f64> {
        self.scores.iter().find(|s| &s.bank == bank).map(|s| s.score)
    }

    /// Counts of present banks per score bin; bin `k` covers
    /// `[k/10, (k+1)/10)`, the last bin also holds 1.
    pub fn histogram(&self) -> [usize; HISTOGRAM_BINS] {
        let mut h = [0; HISTOGRAM_BINS];
        for s in self.scores.iter().filter(|s| !s.absent) {
            let k = ((s.score * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            h[k] += 1;
        }
        h
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lower", "bin_upper", "count"])?;
        for (k, count) in self.histogram().iter().enumerate() {
            w.write_record([
                format!("{:.1}", k as f64 / HISTOGRAM_BINS as f64),
                format!("{:.1}", (k + 1) as f64 / HISTOGRAM_BINS as f64),
                count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run [`mutation_path`] on every pair with the same inference settings,
/// excluding pairs that fail its preconditions, and score each bank.
pub fn structural_score(pairs: &[NetworkPair], cfg: &InferenceConfig) -> Result<KnockoutReport, KnockoutError> {
    let paths: Vec<Result<MutationPath, KnockoutError>> =
        pairs.par_iter().map(|p| mutation_path(p, cfg)).collect();

    let mut outcomes = Vec::new();
    let mut excluded = Vec::new();
    let mut tally: BTreeMap<BankId, (usize, usize)> = BTreeMap::new();
    for p in pairs {
        for bank in p.a.nodes().iter().chain(p.b.nodes()) {
            tally.entry(bank.clone()).or_default();
        }
    }
    for (k, (pair, path)) in pairs.iter().zip(paths).enumerate() {
        match path {
            Ok(path) => {
                for bank in &pair.common {
                    tally.get_mut(bank).expect("registered").1 += 1;
                }
                for bank in &path.critical {
                    tally.get_mut(bank).expect("registered").0 += 1;
                }
                outcomes.push(PairOutcome {
                    pair: k,
                    common_size: pair.common.len(),
                    critical: path.critical,
                });
            }
            Err(e @ (KnockoutError::Precondition(_) | KnockoutError::Degenerate(_))) => {
                excluded.push(ExcludedPair {
                    pair: k,
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    if outcomes.is_empty() {
        return Err(KnockoutError::Precondition("no pair satisfies the preconditions".into()));
    }
    let valid = outcomes.len();
    let mut scores: Vec<BankScore> = tally
        .into_iter()
        .map(|(bank, (critical_in, common_in))| BankScore {
            bank,
            score: critical_in as f64 / valid as f64,
            critical_in,
            common_in,
            absent: common_in == 0,
        })
        .collect();
    scores.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.bank.cmp(&y.bank)));
    Ok(KnockoutReport {
        valid_pairs: valid,
        pairs: outcomes,
        excluded,
        scores,
        metadata: KnockoutMetadata {
            substitution: "out-row and in-column replaced together, within the common banks",
            conflicts: "an edge takes the second network's value once either endpoint is substituted",
            order: "decreasing delta_k, ties by bank id",
            inference: cfg.clone(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub pair: usize,
    /// Highest-score banks substituted before the label turned random.
    pub count: usize,
}

/// Repeat the substitution on each valid pair in decreasing score order.
pub fn score_ordered_validation(
    pairs: &[NetworkPair],
    report: &KnockoutReport,
    cfg: &InferenceConfig,
) -> Result<Vec<ValidationOutcome>, KnockoutError> {
    let rank: BTreeMap<&BankId, usize> = report.scores.iter().enumerate().map(|(r, s)| (&s.bank, r)).collect();
    report
        .pairs
        .par_iter()
        .map(|outcome| {
            let pair = pairs
                .get(outcome.pair)
                .ok_or_else(|| KnockoutError::Contract(format!("pair {} not supplied", outcome.pair)))?;
            let prepared = prepare(pair, cfg)?;
            let mut order: Vec<usize> = (0..pair.common.len()).collect();
            order.sort_by_key(|&i| rank.get(&pair.common[i]).copied().unwrap_or(usize::MAX));
            Ok(ValidationOutcome {
                pair: outcome.pair,
                count: substitutions_to_random(&prepared, &order, cfg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::NetworkKind;
    use crate::sbm::{sample, AffinityMatrix, BlockAssignment};
    use proptest::prelude::*;

    fn net(names: &[&str], edges: &[(usize, usize)]) -> AggregatedNetwork {
        let n = names.len();
        let mut w = vec![0.0; n * n];
        for &(i, j) in edges {
            w[i * n + j] = 1.0;
        }
        AggregatedNetwork::from_dense(names.iter().map(|s| BankId::new(*s)).collect(), w, NetworkKind::DirectedBinary)
            .unwrap()
    }

    fn random_binary(n: usize, p: f64, seed: u64) -> AggregatedNetwork {
        sample(
            &BlockAssignment::single_block(n),
            &AffinityMatrix::bernoulli(vec![vec![p]]).unwrap(),
            seed,
        )
        .unwrap()
    }

    fn bipartite(seed: u64) -> AggregatedNetwork {
        let labels: Vec<usize> = (0..30).map(|i| usize::from(i < 8)).collect();
        let g = BlockAssignment::new(labels, 2).unwrap();
        let p = AffinityMatrix::bernoulli(vec![vec![0.03, 0.0], vec![0.7, 0.0]]).unwrap();
        sample(&g, &p, seed).unwrap()
    }

    #[test]
    fn delta_k_arithmetic() {
        let a = net(&["X", "Y", "Z"], &[(1, 0), (2, 0)]);
        let b = net(&["X", "Y", "Z"], &[(0, 1), (0, 2)]);
        let d = delta_k(&a, &b, &BankId::new("X")).unwrap();
        assert!((d - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(delta_k(&a, &a, &BankId::new("X")).unwrap(), 0.0);
        assert!(matches!(delta_k(&a, &b, &BankId::new("Q")), Err(KnockoutError::Contract(_))));
    }

    #[test]
    fn delta_k_matches_recount() {
        let a = random_binary(12, 0.3, 1);
        let b = random_binary(12, 0.3, 2);
        for (i, bank) in a.nodes().iter().enumerate() {
            let kin = |g: &AggregatedNetwork| (0..12).filter(|&j| g.weight(j, i) != 0.0).count() as f64;
            let kout = |g: &AggregatedNetwork| (0..12).filter(|&j| g.weight(i, j) != 0.0).count() as f64;
            let want = ((kin(&a) - kin(&b)).powi(2) + (kout(&a) - kout(&b)).powi(2)).sqrt();
            assert_eq!(delta_k(&a, &b, bank).unwrap(), want);
        }
    }

    #[test]
    fn common_set_and_restriction() {
        let a = net(&["X", "Y", "Z"], &[(0, 1), (1, 2), (2, 0)]);
        let pair = NetworkPair::new(a.clone(), a.clone());
        assert_eq!(restrict_common(&pair).unwrap(), a);

        // Z is idle in b
        let b = net(&["X", "Y", "Z"], &[(0, 1)]);
        let pair = NetworkPair::new(a.clone(), b);
        assert_eq!(pair.common(), &[BankId::new("X"), BankId::new("Y")]);
        let c = restrict_common(&pair).unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(c.weight(0, 1), 1.0);
        assert_eq!(c.nonzero_entries(), 1);

        let empty = NetworkPair::new(a, net(&["X", "Y", "Z"], &[]));
        assert!(matches!(restrict_common(&empty), Err(KnockoutError::Degenerate(_))));
    }

    #[test]
    fn restriction_matches_induced_oracle() {
        let a = random_binary(15, 0.2, 5);
        let mut bw = random_binary(15, 0.2, 6).weights().to_vec();
        // silence b000 and b007 in b
        for &k in &[0usize, 7] {
            for j in 0..15 {
                bw[k * 15 + j] = 0.0;
                bw[j * 15 + k] = 0.0;
            }
        }
        let b = AggregatedNetwork::from_dense(a.nodes().to_vec(), bw, NetworkKind::DirectedBinary).unwrap();
        let pair = NetworkPair::new(a.clone(), b);
        let c = restrict_common(&pair).unwrap();
        for (x, bx) in c.nodes().iter().enumerate() {
            for (y, by) in c.nodes().iter().enumerate() {
                let i = a.index_of(bx).unwrap();
                let j = a.index_of(by).unwrap();
                assert_eq!(c.weight(x, y), a.weight(i, j));
            }
        }
        assert!(c.index_of(&BankId::new("b000")).is_none());
    }

    #[test]
    fn substitution_is_idempotent_and_telescopes() {
        let c = random_binary(10, 0.3, 10);
        let d = random_binary(10, 0.3, 11);
        let once = substitute(&c, &d, 3);
        assert_eq!(substitute(&once, &d, 3), once);
        let full = (0..10).rev().fold(c.clone(), |acc, i| substitute(&acc, &d, i));
        assert_eq!(full, d);
    }

    #[test]
    fn identical_pair_fails_precondition() {
        let a = bipartite(3);
        let pair = NetworkPair::new(a.clone(), a);
        assert!(matches!(
            mutation_path(&pair, &InferenceConfig::default()),
            Err(KnockoutError::Precondition(_))
        ));
    }

    #[test]
    fn fully_random_target_reaches_random() {
        let a = bipartite(4);
        let b = random_binary(30, 0.05, 5);
        let pair = NetworkPair::new(a, b);
        let cfg = InferenceConfig::default();
        let path = mutation_path(&pair, &cfg).unwrap();
        assert!(!path.critical.is_empty() && path.critical.len() <= pair.common().len());
        assert!(path.delta_k.windows(2).all(|w| w[0] >= w[1]));

        // the prefix one shorter still carries structure
        let prepared = prepare(&pair, &cfg).unwrap();
        let idx: Vec<usize> = path
            .critical
            .iter()
            .map(|b| pair.common().iter().position(|c| c == b).unwrap())
            .collect();
        let shorter = idx[..idx.len() - 1]
            .iter()
            .fold(prepared.c.clone(), |acc, &i| substitute(&acc, &prepared.d, i));
        assert_ne!(infer_label(&shorter, &cfg).unwrap().value, Structure::Random);
    }

    fn report_with(scores: &[(&str, f64, usize)]) -> KnockoutReport {
        KnockoutReport {
            valid_pairs: 60,
            pairs: Vec::new(),
            excluded: Vec::new(),
            scores: scores
                .iter()
                .map(|&(b, s, common)| BankScore {
                    bank: BankId::new(b),
                    score: s,
                    critical_in: (s * 60.0) as usize,
                    common_in: common,
                    absent: common == 0,
                })
                .collect(),
            metadata: KnockoutMetadata {
                substitution: "",
                conflicts: "",
                order: "",
                inference: InferenceConfig::default(),
            },
        }
    }

    #[test]
    fn histogram_bins() {
        let r = report_with(&[("A", 0.5, 60), ("B", 1.0, 60), ("C", 0.0, 60), ("D", 0.0, 0), ("E", 0.05, 60)]);
        let h = r.histogram();
        assert_eq!(h[0], 2);
        assert_eq!(h[5], 1);
        assert_eq!(h[9], 1);
        assert_eq!(h.iter().sum::<usize>(), 4);
        let mut buf = Vec::new();
        r.write_histogram_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_lower,bin_upper,count\n0.0,0.1,2\n"));
    }

    #[test]
    fn score_is_critical_fraction() {
        // 30 of 60 pairs
        let r = report_with(&[("A", 30.0 / 60.0, 60)]);
        assert_eq!(r.score_of(&BankId::new("A")), Some(0.5));
    }

    #[test]
    fn structural_score_flags_absent_banks() {
        let a = bipartite(8);
        let mut bw = random_binary(30, 0.05, 9).weights().to_vec();
        for j in 0..30 {
            bw[29 * 30 + j] = 0.0;
            bw[j * 30 + 29] = 0.0;
        }
        let b = AggregatedNetwork::from_dense(a.nodes().to_vec(), bw, NetworkKind::DirectedBinary).unwrap();
        let pairs = vec![NetworkPair::new(a.clone(), b), NetworkPair::new(a.clone(), a)];
        let cfg = InferenceConfig::default();
        let report = structural_score(&pairs, &cfg).unwrap();
        assert_eq!(report.valid_pairs, 1);
        assert_eq!(report.excluded.len(), 1);
        let idle = report.scores.iter().find(|s| s.bank == BankId::new("b029")).unwrap();
        assert!(idle.absent && idle.score == 0.0);
        assert!(report.scores.iter().all(|s| (0.0..=1.0).contains(&s.score)));

        let counts = score_ordered_validation(&pairs, &report, &cfg).unwrap();
        assert_eq!(counts.len(), 1);
        assert!(counts[0].count >= 1 && counts[0].count <= 29);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn substitution_order_is_irrelevant_for_the_endpoint(seed in 0u64..1000, rot in 0usize..8) {
            let c = random_binary(8, 0.4, seed);
            let d = random_binary(8, 0.4, seed + 1);
            let full = (0..8).map(|k| (k + rot) % 8).fold(c, |acc, i| substitute(&acc, &d, i));
            prop_assert_eq!(full, d);
        }
    }
}
