use crate::error::{Error, Result};

/// Settings for graph construction and similarity propagation.
#[derive(Debug, Clone)]
pub struct GraphConfig {
    /// Neighborhood size k for the kNN affinity.
    pub num_neighbors: usize,
    /// Extra weight added to neighbor edges in the within-class graph.
    pub beta_w: f64,
    /// Weight subtracted on neighbor edges in the between-class graph.
    pub beta_b: f64,
    /// Mixing coefficient of the similarity propagation, strictly in (0, 1).
    pub propagation_mixing: f64,
    /// Entries of the propagated similarity below this value are zeroed.
    pub delta: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            num_neighbors: 5,
            beta_w: 0.2,
            beta_b: 0.2,
            propagation_mixing: 0.5,
            delta: 1e-4,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_neighbors == 0 {
            return Err(Error::InvalidConfig("num_neighbors must be at least 1".into()));
        }
        if !(self.propagation_mixing > 0.0 && self.propagation_mixing < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "propagation_mixing must lie strictly in (0, 1), got {}",
                self.propagation_mixing
            )));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delta must be finite and nonnegative, got {}",
                self.delta
            )));
        }
        if !self.beta_w.is_finite() || self.beta_w < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta_w must be finite and nonnegative, got {}",
                self.beta_w
            )));
        }
        if !self.beta_b.is_finite() || self.beta_b < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta_b must be finite and nonnegative, got {}",
                self.beta_b
            )));
        }
        Ok(())
    }
}

/// Settings for the ADMM l1 solvers.
#[derive(Debug, Clone)]
pub struct AdmmConfig {
    /// Augmented Lagrangian penalty, must be positive.
    pub rho: f64,
    /// l1 weight.
    pub lambda: f64,
    /// Number of ADMM cycles per call.
    pub max_iters: usize,
    /// Residual tolerance for early termination (max-abs of the primal and
    /// dual residuals). Zero disables early termination.
    pub tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            lambda: 1.2,
            max_iters: 1,
            tol: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Weights and sizes for the joint sparse coding / classification model.
///
/// `linear_defaults` and `kernel_defaults` carry the settings used for the
/// reference experiments; they differ only in `lambda`, `alpha` and `gamma`.
#[derive(Debug, Clone)]
pub struct HyperParams {
    /// l1 weight on the sparse codes.
    pub lambda: f64,
    /// Weight of the classifier fidelity term, must be positive.
    pub alpha: f64,
    /// Weight of the labeled-column consistency term.
    pub gamma: f64,
    /// Weight of the global manifold graph.
    pub beta1: f64,
    /// Weight of the within-class graph.
    pub beta2: f64,
    /// Weight of the between-class graph.
    pub beta3: f64,
    /// Number of dictionary atoms.
    pub dict_size: usize,
    /// Outer alternating iterations.
    pub outer_iters: usize,
    /// Ridge weight used when initializing the classifier.
    pub ridge_mu: f64,
    /// Seed for every random draw made during fitting.
    pub seed: u64,
    /// Normalize data columns to unit l2 norm on ingestion.
    pub normalize: bool,
    /// Stop outer iterations when the relative objective change drops below
    /// this value. Zero disables early stopping.
    pub early_stop_tol: f64,
    pub graph: GraphConfig,
    pub admm: AdmmConfig,
}

impl HyperParams {
    pub fn linear_defaults() -> Self {
        HyperParams {
            lambda: 1.2,
            alpha: 0.2,
            gamma: 0.06,
            beta1: 1.0,
            beta2: 1.0,
            beta3: 0.1,
            dict_size: 40,
            outer_iters: 15,
            ridge_mu: 1.0,
            seed: 0,
            normalize: true,
            early_stop_tol: 1e-6,
            graph: GraphConfig::default(),
            admm: AdmmConfig::default(),
        }
    }

    pub fn kernel_defaults() -> Self {
        HyperParams {
            lambda: 0.003,
            alpha: 0.07,
            gamma: 0.0003,
            ..HyperParams::linear_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.dict_size == 0 {
            return Err(Error::InvalidConfig("dict_size must be at least 1".into()));
        }
        if !(self.ridge_mu.is_finite() && self.ridge_mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ridge_mu must be positive, got {}",
                self.ridge_mu
            )));
        }
        if !(self.early_stop_tol.is_finite() && self.early_stop_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "early_stop_tol must be nonnegative, got {}",
                self.early_stop_tol
            )));
        }
        self.graph.validate()?;
        self.admm.validate()?;
        Ok(())
    }
}

/// Kernel selection for the kernelized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    Linear,
}

/// Kernel settings. A missing `sigma` means the Gaussian bandwidth is chosen
/// by the median heuristic over pairwise squared distances.
#[derive(Debug, Clone)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub sigma: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::Gaussian,
            sigma: None,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "kernel sigma must be positive and finite, got {s}"
                )));
            }
        }
        Ok(())
    }
}
