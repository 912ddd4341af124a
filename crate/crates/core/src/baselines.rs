//! Classical core-periphery detectors.
//!
//! * Discrete model: minimize `Z(C)`, the number of missing links inside
//!   the core plus present links inside the periphery. Sorting by degree
//!   is exact for it since `Z(C) = E + c(c-1)/2 - sum of degrees in C`.
//! * Continuous rank-one fits `A_ij ~ u_i u_j` and `A_ij ~ u_i v_j` over
//!   off-diagonal entries, by alternating exact coordinate updates.
//! * Tiering: discrete model on directed links, with a unit penalty for each
//!   core node lacking in-links and for each lacking out-links.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::netcore::AggregatedNetwork;
use crate::seed;

pub const MAX_SWEEPS: usize = 10_000;
pub const OBJECTIVE_TOL: f64 = 1e-10;
const RANDOM_STARTS: u64 = 24;
const TIERING_RESTARTS: u64 = 20;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BaselineError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no convergence after {sweeps} sweeps (objective {})", best.objective)]
    Convergence { best: CorenessVectors, sweeps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreAssignment {
    /// Sorted node indices.
    pub core: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorenessVectors {
    pub u: Vec<f64>,
    /// In-coreness, asymmetric fit only.
    pub v: Option<Vec<f64>>,
    pub objective: f64,
}

fn require_binary(a: &AggregatedNetwork) -> Result<(), BaselineError> {
    if a.weights().iter().any(|&w| w != 0.0 && w != 1.0) {
        return Err(BaselineError::Contract("binary adjacency required".into()));
    }
    Ok(())
}

fn require_symmetric_binary(a: &AggregatedNetwork) -> Result<(), BaselineError> {
    require_binary(a)?;
    let n = a.n();
    for i in 0..n {
        for j in (i + 1)..n {
            if a.weight(i, j) != a.weight(j, i) {
                return Err(BaselineError::Contract("symmetric adjacency required".into()));
            }
        }
    }
    Ok(())
}

fn membership(n: usize, core: &[usize]) -> Result<Vec<bool>, BaselineError> {
    let mut in_core = vec![false; n];
    for &v in core {
        if v >= n {
            return Err(BaselineError::Contract(format!("node {v} out of range")));
        }
        in_core[v] = true;
    }
    Ok(in_core)
}

/// `Z(C)` over unordered pairs.
pub fn discrete_cp_score(a: &AggregatedNetwork, core: &[usize]) -> Result<u64, BaselineError> {
    require_symmetric_binary(a)?;
    let in_core = membership(a.n(), core)?;
    let mut z = 0;
    for i in 0..a.n() {
        for j in (i + 1)..a.n() {
            let linked = a.weight(i, j) != 0.0;
            match (in_core[i], in_core[j]) {
                (true, true) if !linked => z += 1,
                (false, false) if linked => z += 1,
                _ => {}
            }
        }
    }
    Ok(z)
}

/// Largest prefix `s` of the degree ordering with `k_s > s - 1`; ties in
/// degree keep the lower index first.
pub fn discrete_cp_degree_sort(a: &AggregatedNetwork) -> Result<CoreAssignment, BaselineError> {
    require_symmetric_binary(a)?;
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.out_degree(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| degree[y].cmp(&degree[x]).then(x.cmp(&y)));
    let s = order
        .iter()
        .enumerate()
        .take_while(|&(rank, &v)| degree[v] > rank)
        .count();
    let mut core = order[..s].to_vec();
    core.sort_unstable();
    let score = discrete_cp_score(a, &core)? as f64;
    Ok(CoreAssignment { core, score })
}

fn symmetric_objective(a: &AggregatedNetwork, u: &[f64]) -> f64 {
    let n = a.n();
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                f += (a.weight(i, j) - u[i] * u[j]).powi(2);
            }
        }
    }
    f
}

fn asymmetric_objective(a: &AggregatedNetwork, u: &[f64], v: &[f64]) -> f64 {
    let n = a.n();
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                f += (a.weight(i, j) - u[i] * v[j]).powi(2);
            }
        }
    }
    f
}

/// Best of `starts` runs of `solve`; a start that hits the sweep cap only
/// wins when no start converged.
fn best_of<F>(starts: Vec<Vec<f64>>, solve: F) -> Result<CorenessVectors, BaselineError>
where
    F: Fn(Vec<f64>) -> (CorenessVectors, bool) + Sync + Send,
{
    let runs: Vec<(CorenessVectors, bool)> = starts.into_par_iter().map(solve).collect();
    let pick = |converged: bool| {
        runs.iter()
            .filter(|r| r.1 == converged)
            .map(|r| &r.0)
            .reduce(|a, b| if b.objective < a.objective { b } else { a })
            .cloned()
    };
    match pick(true) {
        Some(best) => Ok(best),
        None => Err(BaselineError::Convergence {
            best: pick(false).expect("at least one start"),
            sweeps: MAX_SWEEPS,
        }),
    }
}

fn random_starts(n: usize, salt: u64) -> Vec<Vec<f64>> {
    (0..RANDOM_STARTS)
        .map(|k| {
            let mut rng = seed::stream(salt, k);
            (0..n).map(|_| rng.random::<f64>()).collect()
        })
        .collect()
}

fn power_vector(a: &AggregatedNetwork, transpose: bool) -> Vec<f64> {
    let n = a.n();
    let mut x = vec![1.0; n];
    for _ in 0..200 {
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = if transpose { a.weight(j, i) } else { a.weight(i, j) };
                y[i] += w * x[j];
            }
            // shift keeps the iteration away from bipartite oscillation
            y[i] += x[i];
        }
        let norm = y.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; n];
        }
        x = y.into_iter().map(|t| t / norm).collect();
    }
    x
}

/// Rank-one fit `A_ij ~ u_i u_j` on a symmetric adjacency, with `sum u >= 0`.
pub fn symmetric_continuous(a: &AggregatedNetwork) -> Result<CorenessVectors, BaselineError> {
    require_symmetric_binary(a)?;
    let n = a.n();
    let mut starts = vec![(0..n).map(|i| a.out_degree(i) as f64 / n.max(1) as f64).collect(), power_vector(a, false)];
    starts.extend(random_starts(n, 0x5359_4d4d));

    best_of(starts, |mut u| {
        let mut f = symmetric_objective(a, &u);
        for _ in 0..MAX_SWEEPS {
            for i in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        num += a.weight(i, j) * u[j];
                        den += u[j] * u[j];
                    }
                }
                u[i] = if den > 0.0 { num / den } else { 0.0 };
            }
            let next = symmetric_objective(a, &u);
            let done = (f - next).abs() < OBJECTIVE_TOL;
            f = next;
            if done {
                return (gauge_symmetric(u, f), true);
            }
        }
        (gauge_symmetric(u, f), false)
    })
}

fn gauge_symmetric(mut u: Vec<f64>, objective: f64) -> CorenessVectors {
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    CorenessVectors { u, v: None, objective }
}

/// Rank-one fit `A_ij ~ u_i v_j` (`u` out-coreness, `v` in-coreness) with
/// `|u| = |v|` and `sum u >= 0`.
pub fn asymmetric_continuous(a: &AggregatedNetwork) -> Result<CorenessVectors, BaselineError> {
    require_binary(a)?;
    let n = a.n();
    let mut starts = vec![
        (0..n).map(|i| a.out_degree(i) as f64 / n.max(1) as f64).collect(),
        power_vector(a, false),
    ];
    starts.extend(random_starts(n, 0x4153_594d));

    best_of(starts, |mut u| {
        let mut v = vec![0.0; n];
        let mut f = f64::INFINITY;
        for _ in 0..MAX_SWEEPS {
            for j in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    if i != j {
                        num += a.weight(i, j) * u[i];
                        den += u[i] * u[i];
                    }
                }
                v[j] = if den > 0.0 { num / den } else { 0.0 };
            }
            for i in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        num += a.weight(i, j) * v[j];
                        den += v[j] * v[j];
                    }
                }
                u[i] = if den > 0.0 { num / den } else { 0.0 };
            }
            let next = asymmetric_objective(a, &u, &v);
            let done = (f - next).abs() < OBJECTIVE_TOL;
            f = next;
            if done {
                return (gauge_asymmetric(u, v, f), true);
            }
        }
        (gauge_asymmetric(u, v, f), false)
    })
}

fn gauge_asymmetric(mut u: Vec<f64>, mut v: Vec<f64>, objective: f64) -> CorenessVectors {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu > 0.0 && nv > 0.0 {
        let c = (nv / nu).sqrt();
        u.iter_mut().for_each(|x| *x *= c);
        v.iter_mut().for_each(|x| *x /= c);
    }
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
    CorenessVectors {
        u,
        v: Some(v),
        objective,
    }
}

/// Tiering error of a candidate core on a directed binary network.
pub fn tiering_error(a: &AggregatedNetwork, core: &[usize]) -> Result<u64, BaselineError> {
    require_binary(a)?;
    let in_core = membership(a.n(), core)?;
    Ok(Tiering::new(a).error(&in_core))
}

struct Tiering {
    n: usize,
    adj: Vec<bool>,
    /// Penalty a node pays when in the core: no in-links plus no out-links.
    isolation: Vec<i64>,
}

impl Tiering {
    fn new(a: &AggregatedNetwork) -> Self {
        let n = a.n();
        let adj = a.weights().iter().map(|&w| w != 0.0).collect();
        let isolation = (0..n)
            .map(|i| i64::from(a.in_degree(i) == 0) + i64::from(a.out_degree(i) == 0))
            .collect();
        Tiering { n, adj, isolation }
    }

    fn linked(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    fn error(&self, in_core: &[bool]) -> u64 {
        let mut e = 0;
        for i in 0..self.n {
            if in_core[i] {
                e += self.isolation[i] as u64;
            }
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                match (in_core[i], in_core[j]) {
                    (true, true) if !self.linked(i, j) => e += 1,
                    (false, false) if self.linked(i, j) => e += 1,
                    _ => {}
                }
            }
        }
        e
    }

    /// Change in error when node `v` switches side.
    fn flip_delta(&self, in_core: &[bool], v: usize) -> i64 {
        let mut core_missing = 0i64;
        let mut periphery_present = 0i64;
        for u in 0..self.n {
            if u == v {
                continue;
            }
            let links = i64::from(self.linked(u, v)) + i64::from(self.linked(v, u));
            if in_core[u] {
                core_missing += 2 - links;
            } else {
                periphery_present += links;
            }
        }
        let joining = core_missing - periphery_present + self.isolation[v];
        if in_core[v] {
            -joining
        } else {
            joining
        }
    }

    /// Best-improvement descent over single flips and core/periphery swaps.
    fn descend(&self, in_core: &mut [bool]) {
        loop {
            let mut best: (i64, Option<(usize, Option<usize>)>) = (0, None);
            for v in 0..self.n {
                let d = self.flip_delta(in_core, v);
                if d < best.0 {
                    best = (d, Some((v, None)));
                }
            }
            let core: Vec<usize> = (0..self.n).filter(|&v| in_core[v]).collect();
            for v in core {
                let dv = self.flip_delta(in_core, v);
                in_core[v] = false;
                for w in (0..self.n).filter(|&w| w != v && !in_core[w]) {
                    let d = dv + self.flip_delta(in_core, w);
                    if d < best.0 {
                        best = (d, Some((v, Some(w))));
                    }
                }
                in_core[v] = true;
            }
            match best.1 {
                None => return,
                Some((v, w)) => {
                    in_core[v] = !in_core[v];
                    if let Some(w) = w {
                        in_core[w] = !in_core[w];
                    }
                }
            }
        }
    }
}

/// Core minimizing the tiering error, by local search from one degree-based
/// and several random starts. Ties prefer the smaller, then
/// lexicographically first, core.
pub fn tiering_cp(a: &AggregatedNetwork) -> Result<CoreAssignment, BaselineError> {
    require_binary(a)?;
    let t = Tiering::new(a);
    let n = a.n();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (std::cmp::Reverse(a.in_degree(i).min(a.out_degree(i))), i));

    let mut best: Option<(u64, Vec<usize>)> = None;
    for restart in 0..TIERING_RESTARTS {
        let mut in_core = vec![false; n];
        if restart == 0 {
            for &i in &by_degree[..n / 4] {
                in_core[i] = true;
            }
        } else {
            let mut rng = seed::stream(0x5449_4552, restart);
            in_core.iter_mut().for_each(|x| *x = rng.random::<bool>());
        }
        t.descend(&mut in_core);
        let err = t.error(&in_core);
        let core: Vec<usize> = (0..n).filter(|&i| in_core[i]).collect();
        let better = match &best {
            None => true,
            Some((e, c)) => (err, core.len(), &core) < (*e, c.len(), c),
        };
        if better {
            best = Some((err, core));
        }
    }
    let (err, core) = best.unwrap_or((0, Vec::new()));
    Ok(CoreAssignment {
        core,
        score: err as f64,
    })
}

/// Planted core-periphery ensemble on undirected binary graphs; nodes
/// `0..core_size` form the core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorePeripheryParams {
    pub n: usize,
    pub core_size: usize,
    pub p_core: f64,
    pub p_cross: f64,
    pub p_periphery: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasPoint {
    pub candidate_size: usize,
    pub mean_z: f64,
    pub stderr_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub points: Vec<BiasPoint>,
    /// Smallest candidate size attaining the minimum mean.
    pub argmin: usize,
}

impl BiasCurve {
    /// Relative underestimation `(c* - argmin) / c*`.
    pub fn relative_underestimate(&self, core_size: usize) -> f64 {
        (core_size as f64 - self.argmin as f64) / core_size as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate_size", "mean_Z", "stderr_Z"])?;
        for p in &self.points {
            w.write_record([p.candidate_size.to_string(), p.mean_z.to_string(), p.stderr_z.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample the planted ensemble and average `Z` over the nested candidates
/// `{0..k}` for every `k` in `0..=n`. Sample `s` uses stream `s` of `seed`.
pub fn expected_z_bias(params: CorePeripheryParams, samples: usize, seed: u64) -> Result<BiasCurve, BaselineError> {
    let CorePeripheryParams {
        n,
        core_size,
        p_core,
        p_cross,
        p_periphery,
    } = params;
    if core_size > n || samples == 0 {
        return Err(BaselineError::Contract("need core_size <= n and samples >= 1".into()));
    }
    if !(p_core > p_cross && p_cross > p_periphery) || p_periphery < 0.0 || p_core > 1.0 {
        return Err(BaselineError::Contract(
            "need 1 >= p_core > p_cross > p_periphery >= 0".into(),
        ));
    }
    let curves: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::stream(seed, s);
            let mut degree = vec![0i64; n];
            let mut edges = 0i64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = match (i < core_size, j < core_size) {
                        (true, true) => p_core,
                        (false, false) => p_periphery,
                        _ => p_cross,
                    };
                    if rng.random::<f64>() < p {
                        degree[i] += 1;
                        degree[j] += 1;
                        edges += 1;
                    }
                }
            }
            // Z({0..k}) = E + k(k-1)/2 - sum of the first k degrees
            let mut z = Vec::with_capacity(n + 1);
            let mut acc = edges;
            z.push(acc as f64);
            for (k, d) in degree.iter().enumerate() {
                acc += k as i64 - d;
                z.push(acc as f64);
            }
            z
        })
        .collect();

    let m = samples as f64;
    let points: Vec<BiasPoint> = (0..=n)
        .map(|k| {
            let mean = curves.iter().map(|c| c[k]).sum::<f64>() / m;
            let var = if samples > 1 {
                curves.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            BiasPoint {
                candidate_size: k,
                mean_z: mean,
                stderr_z: (var / m).sqrt(),
            }
        })
        .collect();
    let argmin = points
        .iter()
        .reduce(|a, b| if b.mean_z < a.mean_z { b } else { a })
        .map(|p| p.candidate_size)
        .unwrap_or(0);
    Ok(BiasCurve { points, argmin })
}
