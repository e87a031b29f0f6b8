//! Node catalog, affinity matrix, and renormalized graph Laplacian.
//!
//! Affinities between nodes are Gaussian kernels of a pluggable distance
//! metric, `A[n][m] = exp(-dist(n,m)^2 / sigma^2)`, with `sigma` either
//! given or taken as the standard deviation of all pairwise distances.
//! Graph convolutions then propagate along `L = D~^{-1/2} A~ D~^{-1/2}`
//! with `A~ = I + A` and `D~ = I + D`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("input error: {0}")]
    Input(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("catalog read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog parse failed: {0}")]
    Csv(#[from] csv::Error),
}

/// One network node: identifier, class label, planar coordinates, and an
/// optional region label used by label-level baseline aggregations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogNode {
    pub id: String,
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub region: Option<String>,
}

/// Ordered list of nodes shared by every matrix in the pipeline. The order
/// is fixed at construction: nodes are grouped by class (classes in first-
/// appearance order) and keep their file order within a class.
#[derive(Debug, Clone)]
pub struct NodeCatalog {
    nodes: Vec<CatalogNode>,
    classes: Vec<String>,
    /// Half-open row range of each class in `nodes`, parallel to `classes`.
    class_ranges: Vec<std::ops::Range<usize>>,
}

impl NodeCatalog {
    pub fn new(mut nodes: Vec<CatalogNode>) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Input("catalog has no nodes".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id.clone()) {
                return Err(GraphError::Input(format!("duplicate node id {:?}", n.id)));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(GraphError::Input(format!(
                    "non-finite coordinates for node {:?}",
                    n.id
                )));
            }
        }
        let mut classes: Vec<String> = Vec::new();
        for n in &nodes {
            if !classes.contains(&n.class) {
                classes.push(n.class.clone());
            }
        }
        // Stable sort keeps the within-class file order.
        nodes.sort_by_key(|n| classes.iter().position(|c| *c == n.class).unwrap());
        let mut class_ranges = Vec::with_capacity(classes.len());
        let mut start = 0;
        for class in &classes {
            let len = nodes[start..].iter().take_while(|n| n.class == *class).count();
            class_ranges.push(start..start + len);
            start += len;
        }
        Ok(NodeCatalog {
            nodes,
            classes,
            class_ranges,
        })
    }

    /// Read a catalog from CSV with header `id,class,x,y[,region]`.
    pub fn from_csv(path: &Path) -> Result<Self, GraphError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (id_c, class_c, x_c, y_c) = match (col("id"), col("class"), col("x"), col("y")) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => {
                return Err(GraphError::Input(format!(
                    "catalog {} must have columns id,class,x,y",
                    path.display()
                )))
            }
        };
        let region_c = col("region");
        let mut nodes = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |idx: usize| -> Result<f64, GraphError> {
                record[idx].parse::<f64>().map_err(|_| {
                    GraphError::Input(format!(
                        "catalog row {}: {:?} is not a number",
                        line + 2,
                        &record[idx]
                    ))
                })
            };
            nodes.push(CatalogNode {
                id: record[id_c].to_string(),
                class: record[class_c].to_string(),
                x: parse(x_c)?,
                y: parse(y_c)?,
                region: region_c.map(|c| record[c].to_string()).filter(|r| !r.is_empty()),
            });
        }
        NodeCatalog::new(nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[CatalogNode] {
        &self.nodes
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_range(&self, class: &str) -> Option<std::ops::Range<usize>> {
        self.classes
            .iter()
            .position(|c| c == class)
            .map(|i| self.class_ranges[i].clone())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn class_of(&self, index: usize) -> &str {
        &self.nodes[index].class
    }
}

/// Distance metric between two catalog nodes.
pub type Metric = dyn Fn(&CatalogNode, &CatalogNode) -> f64;

pub fn euclidean(a: &CatalogNode, b: &CatalogNode) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Scale parameter for the Gaussian affinity kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    /// Standard deviation of the pairwise distances in the network.
    Auto,
    Fixed(f64),
}

/// Symmetric nonnegative affinity matrix with zero diagonal; self-affinity
/// enters through the identity term of the renormalization.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    a: Matrix,
    sigma: f64,
}

impl AffinityMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn from_matrix(a: Matrix, sigma: f64) -> Result<Self, GraphError> {
        if a.rows() != a.cols() {
            return Err(GraphError::Input("affinity matrix must be square".into()));
        }
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                if (a.get(r, c) - a.get(c, r)).abs() > 1e-12 {
                    return Err(GraphError::Input("affinity matrix must be symmetric".into()));
                }
                if a.get(r, c) < 0.0 {
                    return Err(GraphError::Input("affinity entries must be nonnegative".into()));
                }
            }
        }
        Ok(AffinityMatrix { a, sigma })
    }
}

/// Gaussian affinities over the catalog under the given metric.
pub fn build_affinity(
    catalog: &NodeCatalog,
    metric: &Metric,
    sigma: Sigma,
) -> Result<AffinityMatrix, GraphError> {
    let n = catalog.len();
    if n < 2 {
        return Err(GraphError::Input("affinity needs at least 2 nodes".into()));
    }
    let mut dists = Matrix::zeros(n, n);
    let mut pair_distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric(&catalog.nodes()[i], &catalog.nodes()[j]);
            if !d.is_finite() {
                return Err(GraphError::Input(format!(
                    "non-finite distance between {:?} and {:?}",
                    catalog.nodes()[i].id,
                    catalog.nodes()[j].id
                )));
            }
            dists.set(i, j, d);
            dists.set(j, i, d);
            pair_distances.push(d);
        }
    }
    let sigma = match sigma {
        Sigma::Fixed(s) => {
            if s <= 0.0 {
                return Err(GraphError::Parameter(format!("sigma must be positive, got {}", s)));
            }
            s
        }
        Sigma::Auto => {
            let mean = pair_distances.iter().sum::<f64>() / pair_distances.len() as f64;
            let var = pair_distances
                .iter()
                .map(|d| (d - mean).powi(2))
                .sum::<f64>()
                / pair_distances.len() as f64;
            let s = var.sqrt();
            if s <= 0.0 {
                return Err(GraphError::Parameter(
                    "pairwise distances are all equal; provide sigma explicitly".into(),
                ));
            }
            s
        }
    };
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = dists.get(i, j);
                a.set(i, j, (-(d * d) / (sigma * sigma)).exp());
            }
        }
    }
    Ok(AffinityMatrix { a, sigma })
}

/// `L = D~^{-1/2} A~ D~^{-1/2}` together with its building blocks.
#[derive(Debug, Clone)]
pub struct RenormalizedLaplacian {
    pub laplacian: Matrix,
    pub a_tilde: Matrix,
    /// Diagonal of `D~ = I + D`; every entry is at least 1.
    pub d_tilde: Vec<f64>,
}

pub fn renormalized_laplacian(affinity: &AffinityMatrix) -> RenormalizedLaplacian {
    let a = affinity.matrix();
    let n = a.rows();
    let mut a_tilde = a.clone();
    let mut d_tilde = vec![0.0; n];
    for i in 0..n {
        a_tilde.set(i, i, a.get(i, i) + 1.0);
        d_tilde[i] = 1.0 + (0..n).map(|j| a.get(i, j)).sum::<f64>();
    }
    let mut laplacian = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            laplacian.set(
                i,
                j,
                a_tilde.get(i, j) / (d_tilde[i].sqrt() * d_tilde[j].sqrt()),
            );
        }
    }
    RenormalizedLaplacian {
        laplacian,
        a_tilde,
        d_tilde,
    }
}

impl RenormalizedLaplacian {
    pub fn d_tilde_matrix(&self) -> Matrix {
        let n = self.d_tilde.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, self.d_tilde[i]);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, class: &str, x: f64, y: f64) -> CatalogNode {
        CatalogNode {
            id: id.into(),
            class: class.into(),
            x,
            y,
            region: None,
        }
    }

    fn catalog(nodes: Vec<CatalogNode>) -> NodeCatalog {
        NodeCatalog::new(nodes).unwrap()
    }

    #[test]
    fn catalog_groups_by_class_and_rejects_duplicates() {
        let c = catalog(vec![
            node("p1", "power", 0.0, 0.0),
            node("g1", "gas", 1.0, 0.0),
            node("p2", "power", 2.0, 0.0),
        ]);
        assert_eq!(c.classes(), &["power".to_string(), "gas".to_string()]);
        assert_eq!(c.class_range("power"), Some(0..2));
        assert_eq!(c.class_range("gas"), Some(2..3));
        assert_eq!(c.nodes()[1].id, "p2");

        let dup = NodeCatalog::new(vec![
            node("a", "power", 0.0, 0.0),
            node("a", "power", 1.0, 0.0),
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn coincident_nodes_have_unit_affinity() {
        let c = catalog(vec![
            node("a", "power", 1.0, 1.0),
            node("b", "power", 1.0, 1.0),
            node("c", "power", 4.0, 5.0),
        ]);
        let aff = build_affinity(&c, &euclidean, Sigma::Fixed(2.0)).unwrap();
        assert!((aff.matrix().get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(aff.matrix().get(0, 0), 0.0);
    }

    #[test]
    fn affinity_at_sigma_distance_is_exp_minus_one() {
        let c = catalog(vec![node("a", "power", 0.0, 0.0), node("b", "power", 2.0, 0.0)]);
        let aff = build_affinity(&c, &euclidean, Sigma::Fixed(2.0)).unwrap();
        assert!((aff.matrix().get(0, 1) - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn affinity_is_symmetric_on_random_node_sets() {
        let mut state = 42_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 10.0
        };
        for trial in 0..50 {
            let nodes: Vec<CatalogNode> = (0..6)
                .map(|i| node(&format!("n{}-{}", trial, i), "power", next(), next()))
                .collect();
            let c = catalog(nodes);
            let aff = build_affinity(&c, &euclidean, Sigma::Auto).unwrap();
            let m = aff.matrix();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    assert_eq!(m.get(i, j), m.get(j, i));
                    assert!((0.0..=1.0).contains(&m.get(i, j)));
                }
            }
        }
    }

    #[test]
    fn sigma_auto_matches_hand_computation() {
        // Three collinear nodes: pairwise distances 1, 1, 2.
        let c = catalog(vec![
            node("a", "power", 0.0, 0.0),
            node("b", "power", 1.0, 0.0),
            node("c", "power", 2.0, 0.0),
        ]);
        let aff = build_affinity(&c, &euclidean, Sigma::Auto).unwrap();
        let mean = (1.0 + 1.0 + 2.0) / 3.0;
        let var = ((1.0_f64 - mean).powi(2) * 2.0 + (2.0 - mean).powi(2)) / 3.0;
        assert!((aff.sigma() - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_rejected() {
        let c = catalog(vec![node("a", "power", 0.0, 0.0), node("b", "power", 1.0, 0.0)]);
        assert!(build_affinity(&c, &euclidean, Sigma::Fixed(0.0)).is_err());
    }

    #[test]
    fn laplacian_of_isolated_nodes_is_identity() {
        let aff = AffinityMatrix::from_matrix(Matrix::zeros(3, 3), 1.0).unwrap();
        let lap = renormalized_laplacian(&aff);
        assert!(lap.laplacian.sub(&Matrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn laplacian_two_nodes_full_affinity() {
        // A12 = 1: D~ = diag(2,2), A~ = [[1,1],[1,1]], L = [[0.5,0.5],[0.5,0.5]].
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let aff = AffinityMatrix::from_matrix(a, 1.0).unwrap();
        let lap = renormalized_laplacian(&aff);
        let expected = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(lap.laplacian.sub(&expected).max_abs() < 1e-15);
        assert_eq!(lap.d_tilde, vec![2.0, 2.0]);
    }

    /// Dominant eigenvalue magnitude by power iteration; independent check
    /// of the spectral radius bound.
    fn spectral_radius(m: &Matrix) -> f64 {
        let n = m.rows();
        let mut v = Matrix::filled(n, 1, 1.0 / (n as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = m.matmul(&v);
            let norm = w.frobenius_norm();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.scale(1.0 / norm);
            lambda = norm;
        }
        lambda
    }

    #[test]
    fn laplacian_symmetric_with_spectral_radius_at_most_one() {
        let mut state = 7_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 10.0
        };
        for trial in 0..20 {
            let nodes: Vec<CatalogNode> = (0..5)
                .map(|i| node(&format!("t{}-{}", trial, i), "power", next(), next()))
                .collect();
            let c = catalog(nodes);
            let aff = build_affinity(&c, &euclidean, Sigma::Auto).unwrap();
            let lap = renormalized_laplacian(&aff);
            let l = &lap.laplacian;
            assert!(l.sub(&l.transpose()).max_abs() < 1e-12);
            assert!(spectral_radius(l) <= 1.0 + 1e-9);
            for &d in &lap.d_tilde {
                assert!(d >= 1.0);
            }
        }
    }
}
