//! Neighborhood graphs over data columns and their Laplacians.
//!
//! Three graphs regularize the label predictions: a within-class graph that
//! pulls same-class points together, a between-class graph that pushes
//! different-class points apart, and a global graph obtained by propagating
//! strong (same-label neighbor) similarity along the kNN structure.
//!
//! All matrices are dense; the expected scale is up to a few thousand
//! points.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::config::GraphConfig;
use crate::error::{Error, Result};
use crate::linalg;

/// Labels as optional 1-based class ids, one entry per point.
pub type Labels = [Option<usize>];

/// Squared pairwise distances between points.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    values: DMatrix<f64>,
}

impl PairwiseDistances {
    /// Squared Euclidean distances between the columns of `x`.
    pub fn from_points(x: &DMatrix<f64>) -> Result<Self> {
        linalg::check_finite(x, "points")?;
        Ok(PairwiseDistances {
            values: linalg::pairwise_sq_distances(x),
        })
    }

    /// Wrap an externally computed squared-distance matrix. Entries are
    /// validated for shape and finiteness; slightly negative values from
    /// roundoff are clamped to zero and the diagonal is forced to zero.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "pairwise distances".into(),
                expected: "square matrix".into(),
                got: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        linalg::check_finite(&values, "pairwise distances")?;
        let mut values = values;
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for i in 0..values.nrows() {
            values[(i, i)] = 0.0;
        }
        Ok(PairwiseDistances { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// A weighted graph over the data points.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    weights: DMatrix<f64>,
}

impl AffinityGraph {
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::DimensionMismatch {
                context: "affinity graph".into(),
                expected: "square matrix".into(),
                got: format!("{}x{}", weights.nrows(), weights.ncols()),
            });
        }
        linalg::check_finite(&weights, "affinity weights")?;
        Ok(AffinityGraph { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// A symmetric nonnegative similarity matrix.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
    threshold_applied: bool,
}

impl SimilarityMatrix {
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "similarity matrix".into(),
                expected: "square matrix".into(),
                got: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        linalg::check_finite(&values, "similarity values")?;
        Ok(SimilarityMatrix {
            values,
            threshold_applied: false,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn threshold_applied(&self) -> bool {
        self.threshold_applied
    }

    /// Symmetrize and zero out entries strictly below `delta`. Applying this
    /// twice with the same `delta` gives the same result as applying it once.
    pub fn thresholded(&self, delta: f64) -> SimilarityMatrix {
        let mut values = linalg::symmetrize(&self.values);
        for v in values.iter_mut() {
            if *v < delta {
                *v = 0.0;
            }
        }
        SimilarityMatrix {
            values,
            threshold_applied: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianSource {
    Within,
    Between,
    Global,
    Combined,
}

/// Graph Laplacian `L = Deg - A` with `Deg_ii = sum_j A_ij`.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
    pub source: LaplacianSource,
}

/// Count labeled members per class; rejects the invalid class id 0.
fn class_sizes(labels: &Labels) -> Result<BTreeMap<usize, usize>> {
    let mut sizes = BTreeMap::new();
    for (i, lab) in labels.iter().enumerate() {
        if let Some(c) = lab {
            if *c == 0 {
                return Err(Error::InvalidLabels(format!(
                    "point {i} has class id 0; class ids are 1-based"
                )));
            }
            *sizes.entry(*c).or_insert(0) += 1;
        }
    }
    Ok(sizes)
}

fn check_labels_len(n: usize, labels: &Labels) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "labels".into(),
            expected: format!("{n} entries"),
            got: format!("{}", labels.len()),
        });
    }
    Ok(())
}

/// Symmetric 0/1 kNN affinity: `A_ij = 1` when either point is among the
/// `num_neighbors` nearest neighbors of the other. Distance ties are broken
/// by the lower point index.
pub fn knn_affinity(dist: &PairwiseDistances, cfg: &GraphConfig) -> Result<AffinityGraph> {
    cfg.validate()?;
    let n = dist.n();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "kNN graph needs at least 2 points, got {n}"
        )));
    }
    if cfg.num_neighbors >= n {
        return Err(Error::InvalidConfig(format!(
            "num_neighbors ({}) must be smaller than the number of points ({n})",
            cfg.num_neighbors
        )));
    }
    let d2 = dist.values();
    let mut weights = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for j in 0..n {
        order.clear();
        order.extend((0..n).filter(|&i| i != j));
        order.sort_by(|&a, &b| {
            d2[(a, j)]
                .partial_cmp(&d2[(b, j)])
                .expect("distances are finite")
                .then(a.cmp(&b))
        });
        for &i in order.iter().take(cfg.num_neighbors) {
            weights[(i, j)] = 1.0;
            weights[(j, i)] = 1.0;
        }
    }
    Ok(AffinityGraph { weights })
}

/// Within-class affinity. Edges between labeled same-class points get
/// `A_ij/n_y + beta_w*A_ij` where `n_y` counts labeled members of the class;
/// every other neighbor pair gets `beta_w*A_ij`; non-edges stay 0.
pub fn within_class_affinity(
    a: &AffinityGraph,
    labels: &Labels,
    cfg: &GraphConfig,
) -> Result<AffinityGraph> {
    let n = a.n();
    check_labels_len(n, labels)?;
    let sizes = class_sizes(labels)?;
    let base = a.weights();
    let mut weights = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let aij = base[(i, j)];
            if aij == 0.0 {
                continue;
            }
            weights[(i, j)] = match (labels[i], labels[j]) {
                (Some(ci), Some(cj)) if ci == cj => aij / sizes[&ci] as f64 + cfg.beta_w * aij,
                _ => cfg.beta_w * aij,
            };
        }
    }
    Ok(AffinityGraph { weights })
}

/// Between-class affinity. For labeled pairs the class comparison decides:
/// same class gives `A_ij*(1/n - 1/n_y) - beta_b*A_ij`, different classes
/// give `A_ij/n`. Pairs involving an unlabeled point get `-beta_b*A_ij` on
/// edges. Non-edges stay 0.
pub fn between_class_affinity(
    a: &AffinityGraph,
    labels: &Labels,
    cfg: &GraphConfig,
) -> Result<AffinityGraph> {
    let n = a.n();
    check_labels_len(n, labels)?;
    let sizes = class_sizes(labels)?;
    let nf = n as f64;
    let base = a.weights();
    let mut weights = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let aij = base[(i, j)];
            if aij == 0.0 {
                continue;
            }
            weights[(i, j)] = match (labels[i], labels[j]) {
                (Some(ci), Some(cj)) if ci == cj => {
                    aij * (1.0 / nf - 1.0 / sizes[&ci] as f64) - cfg.beta_b * aij
                }
                (Some(_), Some(_)) => aij / nf,
                _ => -cfg.beta_b * aij,
            };
        }
    }
    Ok(AffinityGraph { weights })
}

/// Strong similarity: 1 on edges whose endpoints are labeled with the same
/// class, 0 elsewhere, zero diagonal.
pub fn strong_similarity(a: &AffinityGraph, labels: &Labels) -> Result<SimilarityMatrix> {
    let n = a.n();
    check_labels_len(n, labels)?;
    class_sizes(labels)?;
    let base = a.weights();
    let mut values = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i == j || base[(i, j)] == 0.0 {
                continue;
            }
            if let (Some(ci), Some(cj)) = (labels[i], labels[j]) {
                if ci == cj {
                    values[(i, j)] = 1.0;
                }
            }
        }
    }
    Ok(SimilarityMatrix {
        values,
        threshold_applied: false,
    })
}

/// Spread strong similarity along the graph.
///
/// With `T = Deg^{-1} A` and `P0` equal to `G` with unit diagonal, the
/// fixed point of `P <- (1-gamma)*P0 + gamma*T*P` is
/// `P* = (1-gamma)*(I - gamma*T)^{-1}*P0`, computed here by a linear solve.
/// The result is symmetrized and entries below `cfg.delta` are zeroed.
pub fn propagate_similarity(
    a: &AffinityGraph,
    g: &SimilarityMatrix,
    cfg: &GraphConfig,
) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let n = a.n();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            context: "similarity propagation".into(),
            expected: format!("{n}x{n} similarity"),
            got: format!("{}x{}", g.n(), g.n()),
        });
    }
    let gamma = cfg.propagation_mixing;
    let weights = a.weights();
    let mut p0 = g.values().clone();
    for i in 0..n {
        p0[(i, i)] = 1.0;
    }
    // system matrix I - gamma*T, with T = Deg^{-1} A
    let mut system = DMatrix::zeros(n, n);
    for i in 0..n {
        let degree: f64 = weights.row(i).iter().sum();
        if degree == 0.0 {
            return Err(Error::DegenerateGraph { node: i });
        }
        for j in 0..n {
            let t = weights[(i, j)] / degree;
            system[(i, j)] = if i == j { 1.0 - gamma * t } else { -gamma * t };
        }
    }
    let rhs = (1.0 - gamma) * p0;
    let p_star = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonFinite("similarity propagation solve".into()))?;
    let unthresholded = SimilarityMatrix {
        values: p_star,
        threshold_applied: false,
    };
    Ok(unthresholded.thresholded(cfg.delta))
}

/// `L = Deg - A` for any square weight matrix.
pub fn laplacian(weights: &DMatrix<f64>, source: LaplacianSource) -> Laplacian {
    let n = weights.nrows();
    let mut matrix = -weights.clone();
    for i in 0..n {
        let degree: f64 = weights.row(i).iter().sum();
        matrix[(i, i)] = degree - weights[(i, i)];
    }
    Laplacian { matrix, source }
}

/// Weighted combination `beta1*Lg + beta2*Lw - beta3*Lb`. The result keeps
/// zero row sums but may be indefinite.
pub fn combined_laplacian(
    global: &Laplacian,
    within: &Laplacian,
    between: &Laplacian,
    beta1: f64,
    beta2: f64,
    beta3: f64,
) -> Result<Laplacian> {
    let shape = global.matrix.shape();
    if within.matrix.shape() != shape || between.matrix.shape() != shape {
        return Err(Error::DimensionMismatch {
            context: "combined laplacian".into(),
            expected: format!("{}x{}", shape.0, shape.1),
            got: format!(
                "{}x{} and {}x{}",
                within.matrix.nrows(),
                within.matrix.ncols(),
                between.matrix.nrows(),
                between.matrix.ncols()
            ),
        });
    }
    Ok(Laplacian {
        matrix: beta1 * &global.matrix + beta2 * &within.matrix - beta3 * &between.matrix,
        source: LaplacianSource::Combined,
    })
}

/// The three per-graph Laplacians used to regularize label predictions.
#[derive(Debug, Clone)]
pub struct LaplacianSet {
    pub global: Laplacian,
    pub within: Laplacian,
    pub between: Laplacian,
}

impl LaplacianSet {
    /// Build all three graphs from pairwise distances and labels.
    pub fn build(dist: &PairwiseDistances, labels: &Labels, cfg: &GraphConfig) -> Result<Self> {
        let a = knn_affinity(dist, cfg)?;
        let aw = within_class_affinity(&a, labels, cfg)?;
        let ab = between_class_affinity(&a, labels, cfg)?;
        let g = strong_similarity(&a, labels)?;
        let p = propagate_similarity(&a, &g, cfg)?;
        Ok(LaplacianSet {
            global: laplacian(p.values(), LaplacianSource::Global),
            within: laplacian(aw.weights(), LaplacianSource::Within),
            between: laplacian(ab.weights(), LaplacianSource::Between),
        })
    }

    pub fn combined(&self, beta1: f64, beta2: f64, beta3: f64) -> Result<Laplacian> {
        combined_laplacian(&self.global, &self.within, &self.between, beta1, beta2, beta3)
    }
}
