//! Structure labels, affinity ranking tests and census tables.
//!
//! A two-block affinity `p` is labelled by comparing the mean cross term
//! `x = (p_01 + p_10) / 2` with the diagonal:
//!
//! * `x` above both diagonal entries: bipartite;
//! * `x` strictly between them: core-periphery, the core being the block
//!   with the larger diagonal entry;
//! * otherwise (including every tie): modular.
//!
//! One effective block is always labelled random.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::inference::InferenceResult;
use crate::netcore::{AggregatedNetwork, AggregationWindow, BankId, Span};
use crate::sbm::{AffinityMatrix, BlockAssignment};

#[derive(Error, Debug)]
pub enum ClassifyError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Bipartite,
    CorePeriphery,
    Modular,
    Random,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Bipartite,
        Structure::CorePeriphery,
        Structure::Modular,
        Structure::Random,
    ];

    /// Single-letter code used in census tables.
    pub fn code(self) -> &'static str {
        match self {
            Structure::Bipartite => "B",
            Structure::CorePeriphery => "C",
            Structure::Modular => "M",
            Structure::Random => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructureLabel {
    pub value: Structure,
    /// Set for core-periphery only.
    pub core_block: Option<usize>,
}

impl StructureLabel {
    pub fn random() -> Self {
        StructureLabel {
            value: Structure::Random,
            core_block: None,
        }
    }

    fn plain(value: Structure) -> Self {
        StructureLabel {
            value,
            core_block: None,
        }
    }
}

/// Label a two-block affinity matrix.
pub fn label_affinity(p: &AffinityMatrix) -> Result<StructureLabel, ClassifyError> {
    if p.m() != 2 {
        return Err(ClassifyError::Unsupported(format!(
            "labels are defined for 2 blocks, got {}",
            p.m()
        )));
    }
    let (d0, d1) = (p.get(0, 0), p.get(1, 1));
    let x = (p.get(0, 1) + p.get(1, 0)) / 2.0;
    let (lo, hi) = (d0.min(d1), d0.max(d1));
    Ok(if x > hi {
        StructureLabel::plain(Structure::Bipartite)
    } else if lo < x && x < hi {
        StructureLabel {
            value: Structure::CorePeriphery,
            core_block: Some(if d0 > d1 { 0 } else { 1 }),
        }
    } else {
        StructureLabel::plain(Structure::Modular)
    })
}

pub fn label_structure(result: &InferenceResult) -> Result<StructureLabel, ClassifyError> {
    match (result.effective_blocks, result.m()) {
        (1, _) => Ok(StructureLabel::random()),
        (2, 2) => label_affinity(&result.affinity),
        (k, m) => Err(ClassifyError::Unsupported(format!(
            "{k} effective blocks out of {m}"
        ))),
    }
}

/// Reorder a two-block fit so block 0 is the borrower side ("B") and block
/// 1 the lender side ("L"), the latter having the larger total
/// out-strength. Equal strengths keep the input order.
pub fn align_roles(
    net: &AggregatedNetwork,
    assignment: &BlockAssignment,
    affinity: &AffinityMatrix,
) -> Result<(BlockAssignment, AffinityMatrix), ClassifyError> {
    if assignment.m() != 2 || affinity.m() != 2 || assignment.n() != net.n() {
        return Err(ClassifyError::Contract(
            "role alignment needs a two-block fit of this network".into(),
        ));
    }
    let mut strength = [0.0; 2];
    for (i, &g) in assignment.labels().iter().enumerate() {
        strength[g] += net.out_strength(i);
    }
    if strength[0] > strength[1] {
        Ok((assignment.relabeled(&[1, 0]), affinity.relabeled(&[1, 0])))
    } else {
        Ok((assignment.clone(), affinity.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    /// Entry `(r, s)` with the larger sample mean.
    pub higher: (usize, usize),
    pub lower: (usize, usize),
    pub mean_difference: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    /// The four entries by decreasing sample mean.
    pub ordering: Vec<(usize, usize)>,
    pub means: Vec<f64>,
    /// Adjacent pairs of `ordering`.
    pub comparisons: Vec<RankComparison>,
}

/// Paired one-sided t-tests between adjacent entries of the mean ordering.
///
/// A zero mean difference gives `p = 1`; zero variance with a non-zero
/// mean gives `p = 0`.
pub fn rank_test(affinities: &[AffinityMatrix]) -> Result<RankTest, ClassifyError> {
    let n = affinities.len();
    if n < 2 {
        return Err(ClassifyError::Contract(format!(
            "rank test needs at least 2 matrices, got {n}"
        )));
    }
    if affinities.iter().any(|p| p.m() != 2) {
        return Err(ClassifyError::Unsupported("rank test needs 2x2 matrices".into()));
    }
    let cells = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mean_of = |(r, s): (usize, usize)| affinities.iter().map(|p| p.get(r, s)).sum::<f64>() / n as f64;
    let mut ordering = cells.to_vec();
    ordering.sort_by(|&a, &b| mean_of(b).total_cmp(&mean_of(a)));
    let means = ordering.iter().map(|&c| mean_of(c)).collect();

    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
    let comparisons = ordering
        .windows(2)
        .map(|w| {
            let (hi, lo) = (w[0], w[1]);
            let d: Vec<f64> = affinities.iter().map(|p| p.get(hi.0, hi.1) - p.get(lo.0, lo.1)).collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let (t, p) = if mean == 0.0 {
                (0.0, 1.0)
            } else if d.iter().all(|&x| x == d[0]) {
                (f64::INFINITY.copysign(mean), if mean > 0.0 { 0.0 } else { 1.0 })
            } else {
                let t = mean / (var / n as f64).sqrt();
                (t, dist.sf(t))
            };
            RankComparison {
                higher: hi,
                lower: lo,
                mean_difference: mean,
                t_statistic: t,
                p_value: p,
            }
        })
        .collect();
    Ok(RankTest {
        ordering,
        means,
        comparisons,
    })
}

/// JSON form of an inference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub assignment: Vec<usize>,
    pub m: usize,
    pub effective_blocks: usize,
    pub entropy: f64,
    pub model_cost: f64,
    pub description_length: f64,
    pub affinity: AffinityMatrix,
    pub label: StructureLabel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<BankId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<AggregationWindow>,
}

impl ResultRecord {
    pub fn new(result: &InferenceResult, net: &AggregatedNetwork) -> Result<Self, ClassifyError> {
        Ok(ResultRecord {
            assignment: result.assignment.labels().to_vec(),
            m: result.m(),
            effective_blocks: result.effective_blocks,
            entropy: result.entropy,
            model_cost: result.model_cost,
            description_length: result.description_length,
            affinity: result.affinity.clone(),
            label: label_structure(result)?,
            nodes: net.nodes().to_vec(),
            window: net.window(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRow {
    pub year: i32,
    pub scale: Span,
    pub windows: usize,
    /// Window counts in `Structure::ALL` order.
    pub counts: [usize; 4],
    /// Integer percentages summing to exactly 100.
    pub percent: [u32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusTable {
    pub rows: Vec<CensusRow>,
}

/// Largest-remainder rounding of `counts` to integer percentages summing
/// to 100; ties in the remainder go to the earlier column. All-zero counts
/// give all-zero percentages.
pub(crate) fn largest_remainder(counts: &[usize]) -> Vec<u32> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let mut out: Vec<u32> = counts.iter().map(|c| (100 * c / total) as u32).collect();
    let rem: Vec<usize> = counts.iter().map(|c| 100 * c % total).collect();
    let short = 100 - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &k in order.iter().take(short as usize) {
        out[k] += 1;
    }
    out
}

fn percentages(counts: &[usize; 4]) -> [u32; 4] {
    let v = largest_remainder(counts);
    [v[0], v[1], v[2], v[3]]
}

/// Percentage of windows per label, grouped by (year of window start, span).
pub fn structure_census(results: &[(AggregationWindow, StructureLabel)]) -> CensusTable {
    let mut groups: BTreeMap<(i32, Span), [usize; 4]> = BTreeMap::new();
    for (w, label) in results {
        let k = Structure::ALL.iter().position(|s| *s == label.value).expect("known label");
        groups.entry((w.year(), w.span)).or_default()[k] += 1;
    }
    CensusTable {
        rows: groups
            .into_iter()
            .map(|((year, scale), counts)| CensusRow {
                year,
                scale,
                windows: counts.iter().sum(),
                counts,
                percent: percentages(&counts),
            })
            .collect(),
    }
}

impl CensusTable {
    /// CSV with columns `year,scale,B,C,M,R`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ClassifyError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| ClassifyError::Io(e.into());
        w.write_record(["year", "scale", "B", "C", "M", "R"]).map_err(io)?;
        for row in &self.rows {
            let mut rec = vec![row.year.to_string(), row.scale.to_string()];
            rec.extend(row.percent.iter().map(u32::to_string));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(e: [[f64; 2]; 2]) -> AffinityMatrix {
        AffinityMatrix::bernoulli(e.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn window(date: &str, span: Span) -> AggregationWindow {
        AggregationWindow::new(date.parse().unwrap(), span)
    }

    #[test]
    fn table_two_affinity_is_bipartite() {
        let l = label_affinity(&p([[0.0116, 0.0020], [0.23, 0.037]])).unwrap();
        assert_eq!(l.value, Structure::Bipartite);
    }

    #[test]
    fn modular_and_core_periphery() {
        assert_eq!(label_affinity(&p([[0.9, 0.1], [0.1, 0.8]])).unwrap().value, Structure::Modular);
        let cp = label_affinity(&p([[0.9, 0.5], [0.5, 0.1]])).unwrap();
        assert_eq!(cp.value, Structure::CorePeriphery);
        assert_eq!(cp.core_block, Some(0));
        let cp = label_affinity(&p([[0.1, 0.5], [0.5, 0.9]])).unwrap();
        assert_eq!(cp.core_block, Some(1));
    }

    #[test]
    fn ties_resolve_to_modular() {
        assert_eq!(label_affinity(&p([[0.5, 0.5], [0.5, 0.5]])).unwrap().value, Structure::Modular);
        assert_eq!(label_affinity(&p([[0.5, 0.5], [0.5, 0.1]])).unwrap().value, Structure::Modular);
        assert_eq!(label_affinity(&p([[0.3, 0.1], [0.1, 0.1]])).unwrap().value, Structure::Modular);
    }

    #[test]
    fn three_blocks_unsupported() {
        let q = AffinityMatrix::bernoulli(vec![vec![0.1; 3]; 3]).unwrap();
        assert!(matches!(label_affinity(&q), Err(ClassifyError::Unsupported(_))));
    }

    #[test]
    fn identical_matrices_degenerate_variance() {
        let q = p([[0.1, 0.2], [0.3, 0.4]]);
        let t = rank_test(&[q.clone(), q.clone(), q]).unwrap();
        assert_eq!(t.ordering, vec![(1, 1), (1, 0), (0, 1), (0, 0)]);
        assert!(t.comparisons.iter().all(|c| c.p_value == 0.0));
    }

    #[test]
    fn opposite_orderings_give_p_one() {
        let a = p([[0.1, 0.3], [0.2, 0.0]]);
        let b = p([[0.3, 0.1], [0.2, 0.0]]);
        let t = rank_test(&[a, b]).unwrap();
        let c = &t.comparisons[0];
        assert_eq!(c.mean_difference, 0.0);
        assert_eq!(c.p_value, 1.0);
    }

    #[test]
    fn rank_test_needs_two() {
        assert!(matches!(rank_test(&[p([[0.0; 2]; 2])]), Err(ClassifyError::Contract(_))));
    }

    #[test]
    fn t_test_matches_hand_computation() {
        // differences (0,0)-(1,1): 0.3, 0.1, 0.2 -> mean 0.2, sd 0.1, t = 2 sqrt(3)
        let mats = [
            p([[0.5, 0.0], [0.0, 0.2]]),
            p([[0.4, 0.0], [0.0, 0.3]]),
            p([[0.45, 0.0], [0.0, 0.25]]),
        ];
        let t = rank_test(&mats).unwrap();
        let c = &t.comparisons[0];
        assert_eq!((c.higher, c.lower), ((0, 0), (1, 1)));
        assert!((c.t_statistic - 2.0 * 3f64.sqrt()).abs() < 1e-9);
        // Student t with 2 dof: sf(t) = (1 - t / sqrt(t^2 + 2)) / 2
        let tv = c.t_statistic;
        assert!((c.p_value - 0.5 * (1.0 - tv / (tv * tv + 2.0).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn role_alignment_puts_lender_second() {
        // node 0 lends to 1 and 2
        let net = AggregatedNetwork::from_dense(
            AggregatedNetwork::synthetic_ids(3),
            vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            crate::netcore::NetworkKind::DirectedBinary,
        )
        .unwrap();
        let g = BlockAssignment::new(vec![0, 1, 1], 2).unwrap();
        let aff = crate::sbm::mle_affinity(&net, &g).unwrap();
        let (g2, aff2) = align_roles(&net, &g, &aff).unwrap();
        assert_eq!(g2.labels(), &[1, 0, 0]);
        assert_eq!(aff2.get(1, 0), 1.0);
    }

    #[test]
    fn census_rows() {
        let b = StructureLabel::plain(Structure::Bipartite);
        let r = StructureLabel::random();
        let all_b: Vec<_> = (0..10).map(|_| (window("2010-01-04", Span::Week), b)).collect();
        let t = structure_census(&all_b);
        assert_eq!(t.rows[0].percent, [100, 0, 0, 0]);

        let mixed = vec![
            (window("2011-01-03", Span::Day), b),
            (window("2011-01-04", Span::Day), b),
            (window("2011-01-05", Span::Day), r),
            (window("2011-01-06", Span::Day), r),
        ];
        let t = structure_census(&mixed);
        assert_eq!(t.rows[0].percent, [50, 0, 0, 50]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "year,scale,B,C,M,R\n2011,day,50,0,0,50\n");
    }

    #[test]
    fn largest_remainder_thirds() {
        assert_eq!(percentages(&[1, 1, 1, 0]), [34, 33, 33, 0]);
        assert_eq!(percentages(&[0, 0, 0, 0]), [0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn label_is_swap_invariant(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
            let q = p([[a, b], [c, d]]);
            let l1 = label_affinity(&q).unwrap();
            let l2 = label_affinity(&q.relabeled(&[1, 0])).unwrap();
            prop_assert_eq!(l1.value, l2.value);
            prop_assert_eq!(l1.core_block, l2.core_block.map(|k| 1 - k));
        }

        #[test]
        fn label_is_scale_invariant(a in 0.0f64..0.5, b in 0.0f64..0.5, c in 0.0f64..0.5, d in 0.0f64..0.5, k in 0.01f64..2.0) {
            let q = p([[a, b], [c, d]]);
            let l1 = label_affinity(&q).unwrap();
            let l2 = label_affinity(&q.scaled(k).unwrap()).unwrap();
            prop_assert_eq!(l1, l2);
        }

        #[test]
        fn census_percent_sums_to_hundred(counts in proptest::array::uniform4(0usize..50)) {
            let pc = percentages(&counts);
            if counts.iter().sum::<usize>() > 0 {
                prop_assert_eq!(pc.iter().sum::<u32>(), 100);
            }
        }
    }
}
