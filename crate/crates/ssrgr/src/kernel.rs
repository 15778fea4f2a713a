//! Kernel matrices and kernel-space neighborhood graphs.

use nalgebra::DMatrix;

use crate::config::{GraphConfig, KernelConfig, KernelKind};
use crate::error::{Error, Result};
use crate::graphs::{Labels, LaplacianSet, PairwiseDistances};
use crate::linalg;

/// Symmetric positive semi-definite Gram matrix over a fixed point set.
#[derive(Debug, Clone)]
pub struct KernelGram {
    values: DMatrix<f64>,
}

impl KernelGram {
    /// Ingests a precomputed Gram matrix, checking symmetry and
    /// positive semi-definiteness (smallest eigenvalue above -1e-6).
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "kernel matrix".into(),
                expected: format!("square, got {} rows", values.nrows()),
                got: format!("{} cols", values.ncols()),
            });
        }
        linalg::check_finite(&values, "kernel matrix")?;
        let scale = linalg::max_abs(&values).max(1.0);
        let asym = linalg::max_abs(&(&values - values.transpose()));
        if asym > 1e-8 * scale {
            return Err(Error::InvalidKernel(format!(
                "matrix is not symmetric (max |K - K^T| = {asym:.3e})"
            )));
        }
        let sym = linalg::symmetrize(&values);
        let eig = sym.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig < -1e-6 {
            return Err(Error::InvalidKernel(format!(
                "matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { values: sym })
    }

    /// Wraps values produced by a kernel evaluation in this module; the
    /// construction guarantees symmetry, so no eigenvalue check is run.
    pub(crate) fn trusted(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Squared distance between points i and j in the feature space the
    /// kernel embeds into: K_ii - 2 K_ij + K_jj.
    pub fn feature_distance_sq(&self, i: usize, j: usize) -> f64 {
        (self.values[(i, i)] - 2.0 * self.values[(i, j)] + self.values[(j, j)]).max(0.0)
    }

    /// All pairwise feature-space squared distances.
    pub fn feature_distances(&self) -> PairwiseDistances {
        let n = self.n();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.feature_distance_sq(i, j);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        PairwiseDistances::from_matrix(d).expect("distances built symmetric and finite")
    }
}

/// Gaussian kernel K(x, y) = exp(-|x - y|^2 / sigma^2) over the columns of x.
pub fn gaussian_kernel(x: &DMatrix<f64>, sigma: f64) -> Result<KernelGram> {
    linalg::check_finite(x, "kernel input")?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kernel bandwidth must be positive and finite, got {sigma}"
        )));
    }
    let d2 = linalg::pairwise_sq_distances(x);
    let inv = 1.0 / (sigma * sigma);
    let values = d2.map(|v| (-v * inv).exp());
    Ok(KernelGram::trusted(linalg::symmetrize(&values)))
}

/// Linear kernel K = X^T X.
pub fn linear_kernel(x: &DMatrix<f64>) -> Result<KernelGram> {
    linalg::check_finite(x, "kernel input")?;
    let values = x.tr_mul(x);
    Ok(KernelGram::trusted(linalg::symmetrize(&values)))
}

/// Bandwidth from the median of pairwise squared distances: sigma^2 equals
/// the median, so sigma is its square root.
pub fn median_sigma(x: &DMatrix<f64>) -> Result<f64> {
    linalg::check_finite(x, "kernel input")?;
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "bandwidth selection needs at least two points".into(),
        ));
    }
    let d2 = linalg::pairwise_sq_distances(x);
    let mut vals = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            vals.push(d2[(i, j)]);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len();
    let median = if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::InvalidConfig(
            "median pairwise distance is zero; cannot choose a bandwidth".into(),
        ));
    }
    Ok(median.sqrt())
}

/// Builds the Gram matrix requested by the kernel configuration. Returns the
/// resolved bandwidth for Gaussian kernels (None for linear).
pub fn build_kernel(x: &DMatrix<f64>, cfg: &KernelConfig) -> Result<(KernelGram, Option<f64>)> {
    cfg.validate()?;
    match cfg.kind {
        KernelKind::Gaussian => {
            let sigma = match cfg.sigma {
                Some(s) => s,
                None => median_sigma(x)?,
            };
            Ok((gaussian_kernel(x, sigma)?, Some(sigma)))
        }
        KernelKind::Linear => Ok((linear_kernel(x)?, None)),
    }
}

/// Kernel values between the training columns and one new point, as a column
/// vector kappa with kappa_i = K(x_i, x_new).
pub fn kernel_cross_column(
    x_train: &DMatrix<f64>,
    x_new: &nalgebra::DVector<f64>,
    kind: KernelKind,
    sigma: f64,
) -> Result<nalgebra::DVector<f64>> {
    linalg::check_finite(x_train, "kernel input")?;
    if !x_new.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("kernel query point".into()));
    }
    if x_new.len() != x_train.nrows() {
        return Err(Error::DimensionMismatch {
            context: "kernel query point".into(),
            expected: format!("{} rows", x_train.nrows()),
            got: format!("{} rows", x_new.len()),
        });
    }
    let n = x_train.ncols();
    let mut out = nalgebra::DVector::zeros(n);
    match kind {
        KernelKind::Gaussian => {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "kernel bandwidth must be positive and finite, got {sigma}"
                )));
            }
            let inv = 1.0 / (sigma * sigma);
            for i in 0..n {
                let d2 = (x_train.column(i) - x_new).norm_squared();
                out[i] = (-d2 * inv).exp();
            }
        }
        KernelKind::Linear => {
            for i in 0..n {
                out[i] = x_train.column(i).dot(x_new);
            }
        }
    }
    Ok(out)
}

/// Neighborhood graphs and Laplacians computed from kernel feature-space
/// distances instead of Euclidean ones.
pub fn kernel_graphs(gram: &KernelGram, labels: &Labels, cfg: &GraphConfig) -> Result<LaplacianSet> {
    let dist = gram.feature_distances();
    LaplacianSet::build(&dist, labels, cfg)
}
