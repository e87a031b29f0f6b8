//! Spatial and temporal aggregation retrieval.
//!
//! Temporal aggregations come from k-medoids (PAM: greedy BUILD plus
//! best-improvement SWAP) over either raw period vectors, PCA projections
//! of them, or the autoencoder's pooled latents. Spatial aggregations come
//! from a vote over the per-period soft assignment matrices, optionally
//! weighted by representative-day weights. All tie-breaks go to the lowest
//! index, so every routine here is deterministic.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::TrainedAutoencoder;
use crate::graph::NodeCatalog;
use crate::matrix::{symmetric_eigen, Matrix};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("input error: {0}")]
    Input(String),
}

/// Euclidean distance; the default dissimilarity for Eq-style clustering.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A set of representative periods with weights and the period-to-
/// representative mapping. Medoids are original periods; weights count the
/// periods each medoid represents and always sum to the period count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalAggregation {
    pub k: usize,
    /// Representative period indices, ascending.
    pub medoids: Vec<usize>,
    /// Cluster sizes, parallel to `medoids`.
    pub weights: Vec<usize>,
    /// For each period, the original index of its representative.
    pub phi: Vec<usize>,
}

impl TemporalAggregation {
    /// Every period represents itself with weight one.
    pub fn identity(periods: usize) -> Self {
        TemporalAggregation {
            k: periods,
            medoids: (0..periods).collect(),
            weights: vec![1; periods],
            phi: (0..periods).collect(),
        }
    }

    pub fn periods(&self) -> usize {
        self.phi.len()
    }

    /// Position of a medoid in `medoids`, by original period index.
    pub fn medoid_position(&self, period: usize) -> Option<usize> {
        self.medoids.iter().position(|&m| m == period)
    }

    /// Members of the cluster of `medoids[position]`.
    pub fn cluster_members(&self, position: usize) -> Vec<usize> {
        let medoid = self.medoids[position];
        self.phi
            .iter()
            .enumerate()
            .filter(|(_, &rep)| rep == medoid)
            .map(|(t, _)| t)
            .collect()
    }

    fn validate(&self) -> Result<(), AggregateError> {
        let total: usize = self.weights.iter().sum();
        if total != self.phi.len() {
            return Err(AggregateError::Input(format!(
                "weights sum to {} but there are {} periods",
                total,
                self.phi.len()
            )));
        }
        for (&m, _) in self.medoids.iter().zip(&self.weights) {
            if self.phi.get(m) != Some(&m) {
                return Err(AggregateError::Input(format!(
                    "medoid {} does not represent itself",
                    m
                )));
            }
        }
        Ok(())
    }
}

/// Raw PAM output before it is wrapped in a [`TemporalAggregation`].
#[derive(Debug, Clone)]
pub struct Clustering {
    pub medoids: Vec<usize>,
    /// Point index -> position in `medoids`.
    pub assignment: Vec<usize>,
    pub objective: f64,
    /// Objective after BUILD and after each applied SWAP.
    pub objective_trace: Vec<f64>,
}

/// Distance matrix wrapper used by the PAM internals.
struct DistMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Greedy BUILD with a forced first medoid: add the point with the largest
/// cost reduction until `k` medoids are selected. Ties go to the lowest
/// index.
fn build_from(dist: &DistMatrix, k: usize, first: usize) -> Vec<usize> {
    let n = dist.n;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|j| dist.get(first, j)).collect();
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let gain: f64 = (0..n).map(|j| (nearest[j] - dist.get(c, j)).max(0.0)).sum();
            if best.map_or(true, |(_, g)| gain > g + 1e-12) {
                best = Some((c, gain));
            }
        }
        let (c, _) = best.unwrap();
        medoids.push(c);
        for j in 0..n {
            nearest[j] = nearest[j].min(dist.get(c, j));
        }
    }
    medoids
}

/// Farthest-first traversal start: repeatedly add the point farthest from
/// the current medoid set.
fn farthest_from(dist: &DistMatrix, k: usize, first: usize) -> Vec<usize> {
    let n = dist.n;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|j| dist.get(first, j)).collect();
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            if best.map_or(true, |(_, g)| nearest[c] > g + 1e-12) {
                best = Some((c, nearest[c]));
            }
        }
        let (c, _) = best.unwrap();
        medoids.push(c);
        for j in 0..n {
            nearest[j] = nearest[j].min(dist.get(c, j));
        }
    }
    medoids
}

struct SwapResult {
    medoids: Vec<usize>,
    assignment: Vec<usize>,
    objective: f64,
    trace: Vec<f64>,
}

/// Best-improvement SWAP descent to a local optimum. O(n) per candidate
/// via nearest / second-nearest caching.
fn swap_descent(dist: &DistMatrix, mut medoids: Vec<usize>) -> SwapResult {
    let n = dist.n;
    medoids.sort_unstable();

    let assign = |medoids: &[usize]| -> (Vec<usize>, Vec<f64>, Vec<f64>, f64) {
        let mut a = vec![0usize; n];
        let mut near = vec![f64::INFINITY; n];
        let mut second = vec![f64::INFINITY; n];
        for j in 0..n {
            for (pos, &m) in medoids.iter().enumerate() {
                let dm = dist.get(j, m);
                // A medoid always belongs to its own cluster.
                let wins = if j == m {
                    true
                } else {
                    dm < near[j] && medoids[a[j]] != j
                };
                if wins {
                    second[j] = near[j];
                    near[j] = dm;
                    a[j] = pos;
                } else if dm < second[j] {
                    second[j] = dm;
                }
            }
        }
        let obj = near.iter().sum();
        (a, near, second, obj)
    };

    let (mut assignment, mut near, mut second, mut objective) = assign(&medoids);
    let mut trace = vec![objective];

    loop {
        let mut best: Option<(usize, usize, f64)> = None; // (medoid pos, candidate, delta)
        for pos in 0..medoids.len() {
            let m = medoids[pos];
            for c in 0..n {
                if medoids.contains(&c) {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let dc = dist.get(j, c);
                    if medoids[assignment[j]] == m {
                        delta += dc.min(second[j]) - near[j];
                    } else if dc < near[j] {
                        delta += dc - near[j];
                    }
                }
                let better = match best {
                    None => delta < -1e-12,
                    Some((_, _, bd)) => delta < bd - 1e-12,
                };
                if better {
                    best = Some((pos, c, delta));
                }
            }
        }
        match best {
            Some((pos, c, _)) => {
                medoids[pos] = c;
                medoids.sort_unstable();
                let (a2, n2, s2, obj2) = assign(&medoids);
                debug_assert!(obj2 <= objective + 1e-9, "swap increased the objective");
                assignment = a2;
                near = n2;
                second = s2;
                objective = obj2;
                trace.push(objective);
            }
            None => break,
        }
    }

    SwapResult {
        medoids,
        assignment,
        objective,
        trace,
    }
}

/// Instances up to this size run the SWAP descent from every BUILD and
/// farthest-first seed; larger ones use a fixed-size seed portfolio.
const FULL_PORTFOLIO_LIMIT: usize = 64;

/// PAM k-medoids under the given dissimilarity.
///
/// Each run is a greedy-BUILD (or farthest-first) initialization followed
/// by exhaustive best-improvement SWAP to a local optimum. A single BUILD
/// start can stall in a local optimum even on ten points, so the descent
/// is repeated from a deterministic portfolio of seeds (every point on
/// small instances, a spread of total-distance quantiles on large ones)
/// and the best local optimum is returned. Fully deterministic: seed order
/// is fixed and all ties break toward the lowest index.
pub fn kmedoids(
    points: &[Vec<f64>],
    k: usize,
    metric: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<Clustering, AggregateError> {
    let n = points.len();
    if n == 0 {
        return Err(AggregateError::Parameter("no points to cluster".into()));
    }
    if k == 0 || k > n {
        return Err(AggregateError::Parameter(format!(
            "k = {} must be in 1..={}",
            k, n
        )));
    }

    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = metric(&points[i], &points[j]);
            d[i * n + j] = dij;
            d[j * n + i] = dij;
        }
    }
    let dist = DistMatrix { n, d };

    let seeds: Vec<usize> = if n <= FULL_PORTFOLIO_LIMIT {
        (0..n).collect()
    } else {
        // The classic BUILD first medoid plus quantiles of the
        // total-distance ranking.
        let mut totals: Vec<(f64, usize)> = (0..n)
            .map(|i| ((0..n).map(|j| dist.get(i, j)).sum(), i))
            .collect();
        totals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let picks = 8.min(n);
        let mut seeds: Vec<usize> = (0..picks)
            .map(|q| totals[q * (n - 1) / picks.max(1)].1)
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
    };

    let mut best: Option<SwapResult> = None;
    for &seed in &seeds {
        for start in [build_from(&dist, k, seed), farthest_from(&dist, k, seed)] {
            let result = swap_descent(&dist, start);
            let wins = match &best {
                None => true,
                Some(b) => {
                    result.objective < b.objective - 1e-12
                        || (result.objective < b.objective + 1e-12 && result.medoids < b.medoids)
                }
            };
            if wins {
                best = Some(result);
            }
        }
    }
    let best = best.unwrap();

    Ok(Clustering {
        medoids: best.medoids,
        assignment: best.assignment,
        objective: best.objective,
        objective_trace: best.trace,
    })
}

fn clustering_to_temporal(clustering: &Clustering) -> TemporalAggregation {
    let k = clustering.medoids.len();
    let mut weights = vec![0usize; k];
    let mut phi = vec![0usize; clustering.assignment.len()];
    for (t, &pos) in clustering.assignment.iter().enumerate() {
        weights[pos] += 1;
        phi[t] = clustering.medoids[pos];
    }
    let agg = TemporalAggregation {
        k,
        medoids: clustering.medoids.clone(),
        weights,
        phi,
    };
    debug_assert!(agg.validate().is_ok());
    agg
}

/// Cluster the flattened pooled latents `Z` of a trained model into `k`
/// representative periods. The latent vectors have length `d' * |N'|`.
pub fn temporal_from_latents(
    model: &TrainedAutoencoder,
    k: usize,
) -> Result<TemporalAggregation, AggregateError> {
    let points: Vec<Vec<f64>> = model.latents.iter().map(|z| z.to_flat()).collect();
    if points.is_empty() {
        return Err(AggregateError::Input("model has no per-period latents".into()));
    }
    Ok(clustering_to_temporal(&kmedoids(&points, k, euclidean)?))
}

/// Baselines that cluster the observed period vectors directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// k-medoids on the raw vectors.
    Raw,
    /// Project onto the top principal components first.
    Pca(usize),
}

/// Raw or PCA-projected k-medoids over flattened period vectors.
pub fn temporal_baseline(
    data: &[Vec<f64>],
    k: usize,
    mode: BaselineMode,
) -> Result<TemporalAggregation, AggregateError> {
    let clustering = match mode {
        BaselineMode::Raw => kmedoids(data, k, euclidean)?,
        BaselineMode::Pca(dim) => {
            let projected = pca_project(data, dim)?;
            kmedoids(&projected, k, euclidean)?
        }
    };
    Ok(clustering_to_temporal(&clustering))
}

/// Project mean-centered data onto its top `dim` principal components.
///
/// Works through the Gram matrix (periods x periods), so the cost scales
/// with the number of periods rather than the feature dimension. Rank-
/// deficient data keeps only the components that exist.
pub fn pca_project(data: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>, AggregateError> {
    let t = data.len();
    if t == 0 {
        return Err(AggregateError::Input("no data to project".into()));
    }
    let d = data[0].len();
    if data.iter().any(|row| row.len() != d) {
        return Err(AggregateError::Input("ragged data rows".into()));
    }
    if dim > d {
        return Err(AggregateError::Parameter(format!(
            "pca dimension {} exceeds data dimension {}",
            dim, d
        )));
    }
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / t as f64;
        }
    }
    let mut centered = Matrix::zeros(t, d);
    for (r, row) in data.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            centered.set(r, c, v - mean[c]);
        }
    }
    // Gram trick: X = U S V^T, so X X^T = U S^2 U^T and the principal
    // coordinates are the columns of U S.
    let gram = centered.matmul(&centered.transpose());
    let (eigenvalues, vectors) = symmetric_eigen(&gram);
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..t.min(dim))
        .filter(|&i| eigenvalues[i] > 1e-12 * lambda_max.max(1.0))
        .collect();
    let mut out = vec![Vec::with_capacity(keep.len()); t];
    for &comp in &keep {
        let scale = eigenvalues[comp].sqrt();
        for (r, row) in out.iter_mut().enumerate() {
            row.push(vectors.get(r, comp) * scale);
        }
    }
    Ok(out)
}

/// A node-to-group mapping with dense group ids starting at zero; every
/// group is non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialAggregation {
    pub node_to_group: Vec<usize>,
    pub group_count: usize,
}

impl SpatialAggregation {
    /// Renumber arbitrary group labels densely (ascending label order).
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut labels: Vec<usize> = raw.to_vec();
        labels.sort_unstable();
        labels.dedup();
        let node_to_group = raw
            .iter()
            .map(|g| labels.binary_search(g).unwrap())
            .collect();
        SpatialAggregation {
            node_to_group,
            group_count: labels.len(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SpatialAggregation {
            node_to_group: (0..n).collect(),
            group_count: n,
        }
    }

    /// Group nodes that share a label (the label-level baseline). Nodes
    /// without a label each get their own group.
    pub fn from_labels(labels: &[Option<String>]) -> Self {
        let mut keys: Vec<String> = labels.iter().flatten().cloned().collect();
        keys.sort();
        keys.dedup();
        let mut unlabeled = keys.len();
        let raw: Vec<usize> = labels
            .iter()
            .map(|l| match l {
                Some(l) => keys.iter().position(|k| k == l).unwrap(),
                None => {
                    unlabeled += 1;
                    unlabeled - 1
                }
            })
            .collect();
        SpatialAggregation::from_assignment(&raw)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        self.node_to_group
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == group)
            .map(|(n, _)| n)
            .collect()
    }

    /// Split every group that mixes node classes into one group per class,
    /// ordered by (original group, catalog class order). The result never
    /// mixes classes, as the planning-model aggregation requires.
    pub fn class_pure(&self, catalog: &NodeCatalog) -> SpatialAggregation {
        let class_index: Vec<usize> = catalog
            .nodes()
            .iter()
            .map(|n| catalog.classes().iter().position(|c| *c == n.class).unwrap())
            .collect();
        let n_classes = catalog.classes().len();
        let raw: Vec<usize> = self
            .node_to_group
            .iter()
            .zip(&class_index)
            .map(|(&g, &c)| g * n_classes + c)
            .collect();
        SpatialAggregation::from_assignment(&raw)
    }
}

fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn vote_with_weights(assignments: &[Matrix], period_weight: &[f64]) -> SpatialAggregation {
    let n = assignments[0].rows();
    let g = assignments[0].cols();
    let mut votes = vec![0.0; n * g];
    for (s, &w) in assignments.iter().zip(period_weight) {
        for node in 0..n {
            votes[node * g + argmax_row(s.row(node))] += w;
        }
    }
    let raw: Vec<usize> = (0..n).map(|node| argmax_row(&votes[node * g..(node + 1) * g])).collect();
    SpatialAggregation::from_assignment(&raw)
}

/// Majority vote of per-period hard assignments (argmax of each `S` row).
/// Ties break toward the lowest group index; empty groups are pruned and
/// the rest renumbered densely.
pub fn spatial_vote(assignments: &[Matrix]) -> Result<SpatialAggregation, AggregateError> {
    if assignments.is_empty() {
        return Err(AggregateError::Input("no assignment matrices".into()));
    }
    let shape = assignments[0].shape();
    if assignments.iter().any(|s| s.shape() != shape) {
        return Err(AggregateError::Input("assignment shapes differ".into()));
    }
    Ok(vote_with_weights(assignments, &vec![1.0; assignments.len()]))
}

/// Vote where each period's ballot is weighted by the representative-day
/// weight of its temporal cluster. Uniform weights reduce to
/// [`spatial_vote`].
pub fn weighted_spatial_vote(
    assignments: &[Matrix],
    temporal: &TemporalAggregation,
) -> Result<SpatialAggregation, AggregateError> {
    if assignments.is_empty() {
        return Err(AggregateError::Input("no assignment matrices".into()));
    }
    if temporal.periods() != assignments.len() {
        return Err(AggregateError::Input(format!(
            "temporal aggregation covers {} periods, got {} assignments",
            temporal.periods(),
            assignments.len()
        )));
    }
    let shape = assignments[0].shape();
    if assignments.iter().any(|s| s.shape() != shape) {
        return Err(AggregateError::Input("assignment shapes differ".into()));
    }
    let weights: Vec<f64> = (0..assignments.len())
        .map(|t| {
            let medoid = temporal.phi[t];
            let pos = temporal.medoid_position(medoid).unwrap();
            temporal.weights[pos] as f64
        })
        .collect();
    Ok(vote_with_weights(assignments, &weights))
}

/// Seeded class-pure random grouping with `groups_per_class[c]` non-empty
/// groups inside class `c`; a baseline for comparing learned groupings.
pub fn random_grouping(
    catalog: &NodeCatalog,
    groups_per_class: &[usize],
    seed: u64,
) -> Result<SpatialAggregation, AggregateError> {
    if groups_per_class.len() != catalog.classes().len() {
        return Err(AggregateError::Parameter(format!(
            "{} group counts for {} classes",
            groups_per_class.len(),
            catalog.classes().len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = vec![0usize; catalog.len()];
    let mut base = 0;
    for (class, &k) in catalog.classes().iter().zip(groups_per_class) {
        let range = catalog.class_range(class).unwrap();
        if k == 0 || k > range.len() {
            return Err(AggregateError::Parameter(format!(
                "class {:?} cannot form {} groups from {} nodes",
                class,
                k,
                range.len()
            )));
        }
        // Guarantee non-empty groups: the first k members seed distinct
        // groups, the rest land uniformly.
        let mut order: Vec<usize> = range.clone().collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for (i, &node) in order.iter().enumerate() {
            let g = if i < k { i } else { rng.gen_range(0..k) };
            raw[node] = base + g;
        }
        base += k;
    }
    Ok(SpatialAggregation::from_assignment(&raw))
}

/// Adjusted Rand index between two labelings; 1.0 means identical
/// partitions up to relabeling, 0.0 is chance-level agreement.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![0usize; ka * kb];
    for (&x, &y) in a.iter().zip(b.iter()) {
        table[x * kb + y] += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().map(|&x| choose2(x)).sum();
    let sum_a: f64 = (0..ka)
        .map(|i| choose2((0..kb).map(|j| table[i * kb + j]).sum()))
        .sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// The combined artifact written to JSON: a node-keyed spatial map plus
/// the temporal medoids, weights, and period mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatioTemporalAggregation {
    pub spatial: BTreeMap<String, usize>,
    pub temporal: TemporalAggregation,
}

impl SpatioTemporalAggregation {
    pub fn new(
        catalog: &NodeCatalog,
        spatial: &SpatialAggregation,
        temporal: TemporalAggregation,
    ) -> Self {
        let spatial_map = catalog
            .nodes()
            .iter()
            .zip(&spatial.node_to_group)
            .map(|(node, &g)| (node.id.clone(), g))
            .collect();
        SpatioTemporalAggregation {
            spatial: spatial_map,
            temporal,
        }
    }

    pub fn spatial_for(&self, catalog: &NodeCatalog) -> Result<SpatialAggregation, AggregateError> {
        let raw: Result<Vec<usize>, _> = catalog
            .nodes()
            .iter()
            .map(|n| {
                self.spatial
                    .get(&n.id)
                    .copied()
                    .ok_or_else(|| AggregateError::Input(format!("no group for node {:?}", n.id)))
            })
            .collect();
        Ok(SpatialAggregation::from_assignment(&raw?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AggregateError> {
        serde_json::from_str(text).map_err(|e| AggregateError::Input(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points_1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    /// Exhaustive k-medoids optimum for small instances.
    fn brute_force_objective(points: &[Vec<f64>], k: usize) -> f64 {
        fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
            let mut out = Vec::new();
            let mut current = Vec::new();
            fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if cur.len() == k {
                    out.push(cur.clone());
                    return;
                }
                for i in start..n {
                    cur.push(i);
                    rec(i + 1, n, k, cur, out);
                    cur.pop();
                }
            }
            rec(0, n, k, &mut current, &mut out);
            out
        }
        combos(points.len(), k)
            .into_iter()
            .map(|medoids| {
                points
                    .iter()
                    .map(|p| {
                        medoids
                            .iter()
                            .map(|&m| euclidean(p, &points[m]))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn kmedoids_k_equals_n_is_zero_cost() {
        let pts = points_1d(&[1.0, 5.0, 9.0]);
        let c = kmedoids(&pts, 3, euclidean).unwrap();
        assert_eq!(c.objective, 0.0);
        assert_eq!(c.medoids, vec![0, 1, 2]);
    }

    #[test]
    fn kmedoids_two_pairs_on_the_line() {
        let pts = points_1d(&[0.0, 0.1, 10.0, 10.1]);
        let c = kmedoids(&pts, 2, euclidean).unwrap();
        // Brute force over all medoid pairs gives 0.2.
        assert!((c.objective - 0.2).abs() < 1e-12);
        assert!((brute_force_objective(&pts, 2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn kmedoids_objective_trace_non_increasing() {
        let mut state = 5_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 10.0
        };
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..12).map(|_| vec![next(), next()]).collect();
            let c = kmedoids(&pts, 3, euclidean).unwrap();
            for w in c.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn kmedoids_matches_brute_force_on_small_instances() {
        let mut state = 11_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 4.0
        };
        for trial in 0..50 {
            let n = 5 + (trial % 6);
            let k = 1 + (trial % 3);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![next(), next()]).collect();
            let c = kmedoids(&pts, k, euclidean).unwrap();
            let best = brute_force_objective(&pts, k);
            assert!(
                (c.objective - best).abs() <= 1e-9,
                "trial {}: PAM {} vs brute force {}",
                trial,
                c.objective,
                best
            );
        }
    }

    #[test]
    fn kmedoids_rejects_bad_k() {
        let pts = points_1d(&[1.0, 2.0]);
        assert!(kmedoids(&pts, 3, euclidean).is_err());
        assert!(kmedoids(&pts, 0, euclidean).is_err());
    }

    #[test]
    fn identical_points_collapse_to_single_medoid() {
        let pts = points_1d(&[2.0, 2.0, 2.0, 2.0]);
        let agg = temporal_baseline(&pts, 1, BaselineMode::Raw).unwrap();
        assert_eq!(agg.medoids.len(), 1);
        assert_eq!(agg.weights, vec![4]);
        assert_eq!(agg.phi, vec![agg.medoids[0]; 4]);
    }

    #[test]
    fn temporal_weights_sum_to_period_count() {
        let pts = points_1d(&[0.0, 0.2, 0.1, 7.0, 7.3, 7.1, 3.0]);
        let agg = temporal_baseline(&pts, 3, BaselineMode::Raw).unwrap();
        assert_eq!(agg.weights.iter().sum::<usize>(), 7);
        for (&m, _) in agg.medoids.iter().zip(&agg.weights) {
            assert_eq!(agg.phi[m], m);
        }
    }

    #[test]
    fn pca_full_dimension_preserves_clustering() {
        let data = vec![
            vec![0.0, 1.0, 5.0],
            vec![0.1, 1.1, 5.0],
            vec![4.0, -2.0, 5.0],
            vec![4.1, -2.2, 5.0],
        ];
        let raw = temporal_baseline(&data, 2, BaselineMode::Raw).unwrap();
        let pca = temporal_baseline(&data, 2, BaselineMode::Pca(3)).unwrap();
        assert_eq!(raw.phi, pca.phi);
        // Pairwise distances survive the full-rank projection.
        let projected = pca_project(&data, 3).unwrap();
        for i in 0..data.len() {
            for j in 0..data.len() {
                let orig = euclidean(&data[i], &data[j]);
                let proj = euclidean(&projected[i], &projected[j]);
                assert!((orig - proj).abs() < 1e-8, "{} vs {}", orig, proj);
            }
        }
    }

    #[test]
    fn pca_on_one_dimensional_data_is_identity_up_to_sign() {
        let data = points_1d(&[1.0, 2.0, 4.0]);
        let projected = pca_project(&data, 1).unwrap();
        let mean = 7.0 / 3.0;
        let expected: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|x| x - mean).collect();
        let sign = if projected[0][0] * expected[0] >= 0.0 { 1.0 } else { -1.0 };
        for (p, e) in projected.iter().zip(&expected) {
            assert!((p[0] - sign * e).abs() < 1e-9);
        }
    }

    #[test]
    fn spatial_vote_majority_and_tiebreak() {
        let hard = |rows: &[usize], g: usize| {
            let mut m = Matrix::zeros(rows.len(), g);
            for (r, &c) in rows.iter().enumerate() {
                m.set(r, c, 1.0);
            }
            m
        };
        // All periods identical and hard: the vote equals that assignment.
        let s = hard(&[0, 0, 1], 2);
        let agg = spatial_vote(&[s.clone(), s.clone(), s.clone()]).unwrap();
        assert_eq!(agg.node_to_group, vec![0, 0, 1]);

        // Node with 60% of periods in group 1 goes to group 1.
        let periods = vec![
            hard(&[1, 0, 1], 2),
            hard(&[1, 0, 1], 2),
            hard(&[1, 0, 1], 2),
            hard(&[0, 0, 1], 2),
            hard(&[0, 0, 1], 2),
        ];
        let agg = spatial_vote(&periods).unwrap();
        assert_eq!(agg.node_to_group[0], 1);

        // 50/50 tie between groups 0 and 2 resolves to the lower group.
        let periods = vec![hard(&[0], 3), hard(&[2], 3)];
        let agg = spatial_vote(&periods).unwrap();
        assert_eq!(agg.node_to_group, vec![0]);
        assert_eq!(agg.group_count, 1);
    }

    #[test]
    fn vote_prunes_empty_groups_densely() {
        let mut s = Matrix::zeros(3, 4);
        s.set(0, 3, 1.0);
        s.set(1, 1, 1.0);
        s.set(2, 3, 1.0);
        let agg = spatial_vote(&[s]).unwrap();
        assert_eq!(agg.group_count, 2);
        assert_eq!(agg.node_to_group, vec![1, 0, 1]);
    }

    #[test]
    fn vote_invariant_under_consistent_relabeling() {
        let mut state = 77_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as f64 / u64::MAX as f64
        };
        let assignments: Vec<Matrix> = (0..6)
            .map(|_| {
                let mut s = Matrix::zeros(5, 3);
                for r in 0..5 {
                    let mut row: Vec<f64> = (0..3).map(|_| next() + 0.01).collect();
                    let sum: f64 = row.iter().sum();
                    for (c, v) in row.drain(..).enumerate() {
                        s.set(r, c, v / sum);
                    }
                }
                s
            })
            .collect();
        let base = spatial_vote(&assignments).unwrap();
        // Permute columns by a fixed permutation and permute back.
        let perm = [2usize, 0, 1];
        let permuted: Vec<Matrix> = assignments
            .iter()
            .map(|s| {
                let mut p = Matrix::zeros(5, 3);
                for r in 0..5 {
                    for c in 0..3 {
                        p.set(r, perm[c], s.get(r, c));
                    }
                }
                let mut back = Matrix::zeros(5, 3);
                for r in 0..5 {
                    for c in 0..3 {
                        back.set(r, c, p.get(r, perm[c]));
                    }
                }
                back
            })
            .collect();
        let round = spatial_vote(&permuted).unwrap();
        assert_eq!(base, round);
    }

    #[test]
    fn weighted_vote_reduces_to_plain_with_uniform_weights() {
        let mut s1 = Matrix::zeros(2, 2);
        s1.set(0, 0, 0.9);
        s1.set(0, 1, 0.1);
        s1.set(1, 1, 0.8);
        s1.set(1, 0, 0.2);
        let mut s2 = Matrix::zeros(2, 2);
        s2.set(0, 1, 0.6);
        s2.set(0, 0, 0.4);
        s2.set(1, 1, 0.7);
        s2.set(1, 0, 0.3);
        let assignments = vec![s1, s2];

        let plain = spatial_vote(&assignments).unwrap();
        // Two singleton clusters: weights are uniform.
        let temporal = TemporalAggregation::identity(2);
        let weighted = weighted_spatial_vote(&assignments, &temporal).unwrap();
        assert_eq!(plain, weighted);

        // A single cluster also reduces to the plain vote.
        let single = TemporalAggregation {
            k: 1,
            medoids: vec![0],
            weights: vec![2],
            phi: vec![0, 0],
        };
        let weighted = weighted_spatial_vote(&assignments, &single).unwrap();
        assert_eq!(plain, weighted);
    }

    #[test]
    fn dominant_weight_flips_marginal_node() {
        // Node 0 anchors group 0 in every period; node 1 is marginal,
        // voting group 0 three times and group 1 twice.
        let period = |marginal: usize| {
            let mut m = Matrix::zeros(2, 2);
            m.set(0, 0, 1.0);
            m.set(1, marginal, 1.0);
            m
        };
        let assignments = vec![period(0), period(0), period(0), period(1), period(1)];
        let plain = spatial_vote(&assignments).unwrap();
        assert_eq!(plain.node_to_group, vec![0, 0]);

        // Cluster the two group-1 periods together (ballot weight 2 each)
        // and leave the group-0 periods in singleton clusters: node 1's
        // tallies become group 0 = 3, group 1 = 4, flipping the node.
        let temporal = TemporalAggregation {
            k: 4,
            medoids: vec![0, 1, 2, 3],
            weights: vec![1, 1, 1, 2],
            phi: vec![0, 1, 2, 3, 3],
        };
        let weighted = weighted_spatial_vote(&assignments, &temporal).unwrap();
        assert_eq!(weighted.node_to_group, vec![0, 1]);
    }

    #[test]
    fn class_pure_splits_mixed_groups() {
        use crate::graph::{CatalogNode, NodeCatalog};
        let catalog = NodeCatalog::new(vec![
            CatalogNode { id: "p1".into(), class: "power".into(), x: 0.0, y: 0.0, region: None },
            CatalogNode { id: "p2".into(), class: "power".into(), x: 1.0, y: 0.0, region: None },
            CatalogNode { id: "g1".into(), class: "gas".into(), x: 0.0, y: 1.0, region: None },
        ])
        .unwrap();
        // One group containing everything.
        let agg = SpatialAggregation::from_assignment(&[0, 0, 0]);
        let pure = agg.class_pure(&catalog);
        assert_eq!(pure.group_count, 2);
        assert_eq!(pure.node_to_group, vec![0, 0, 1]);
    }

    #[test]
    fn label_grouping_and_identity() {
        let labels = vec![
            Some("ma".to_string()),
            Some("ct".to_string()),
            Some("ma".to_string()),
            None,
        ];
        let agg = SpatialAggregation::from_labels(&labels);
        assert_eq!(agg.group_count, 3);
        assert_eq!(agg.node_to_group[0], agg.node_to_group[2]);
        assert_ne!(agg.node_to_group[0], agg.node_to_group[1]);

        let id = SpatialAggregation::identity(4);
        assert_eq!(id.group_count, 4);
    }

    #[test]
    fn adjusted_rand_index_extremes() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!(ari.abs() < 0.5);
    }

    #[test]
    fn aggregation_artifact_roundtrips() {
        use crate::graph::{CatalogNode, NodeCatalog};
        let catalog = NodeCatalog::new(vec![
            CatalogNode { id: "a".into(), class: "power".into(), x: 0.0, y: 0.0, region: None },
            CatalogNode { id: "b".into(), class: "power".into(), x: 1.0, y: 0.0, region: None },
        ])
        .unwrap();
        let spatial = SpatialAggregation::from_assignment(&[0, 1]);
        let temporal = TemporalAggregation::identity(3);
        let artifact = SpatioTemporalAggregation::new(&catalog, &spatial, temporal);
        let json = artifact.to_json();
        let back = SpatioTemporalAggregation::from_json(&json).unwrap();
        assert_eq!(artifact, back);
        assert_eq!(back.spatial_for(&catalog).unwrap(), spatial);
    }

    #[test]
    fn random_grouping_is_class_pure_and_seeded() {
        use crate::graph::{CatalogNode, NodeCatalog};
        let nodes: Vec<CatalogNode> = (0..6)
            .map(|i| CatalogNode {
                id: format!("p{}", i),
                class: if i < 4 { "power".into() } else { "gas".into() },
                x: i as f64,
                y: 0.0,
                region: None,
            })
            .collect();
        let catalog = NodeCatalog::new(nodes).unwrap();
        let a = random_grouping(&catalog, &[2, 1], 9).unwrap();
        let b = random_grouping(&catalog, &[2, 1], 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.group_count, 3);
        // Gas nodes share one group, never mixed with power.
        assert_eq!(a.node_to_group[4], a.node_to_group[5]);
        assert!(!a.node_to_group[..4].contains(&a.node_to_group[4]));
    }
}
