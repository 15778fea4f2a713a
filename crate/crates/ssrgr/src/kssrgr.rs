//! The kernel estimator. The dictionary lives in the feature space the
//! kernel embeds into, parametrized as D = phi(X) B with a coefficient
//! matrix B over the training points, so every update works on the Gram
//! matrix alone. The minimized objective is
//!
//! Tr((I - BS)^T K (I - BS)) + lambda |S|_1 + alpha |H - WS|^2
//!   + Tr(H L~ H^T) + gamma Tr((H - F) U (H - F)^T)
//!
//! with L~ built from kernel feature-space distances and the dictionary
//! constraint B_j^T K B_j <= 1 per column.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{AdmmConfig, HyperParams, KernelConfig, KernelKind};
use crate::data::normalize_columns;
use crate::error::{Error, Result};
use crate::graphs::{Labels, Laplacian};
use crate::kernel::{self, KernelGram};
use crate::linalg;
use crate::solvers::{self, AdmmState};
use crate::ssrgr::{solve_label_stationarity, LabelConstraint};

/// Learned state of the kernel estimator. `coeffs` is the dictionary
/// coefficient matrix B; the Gram matrix it was trained on is kept so the
/// model can code new points.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub coeffs: DMatrix<f64>,
    pub codes: DMatrix<f64>,
    pub classifier: DMatrix<f64>,
    pub labels_pred: DMatrix<f64>,
    pub gram: KernelGram,
}

#[derive(Debug, Clone)]
pub struct KernelFitResult {
    pub model: KernelModel,
    pub objective_trace: Vec<f64>,
    /// Bandwidth actually used when the configuration asked for a Gaussian
    /// kernel without fixing one.
    pub resolved_sigma: Option<f64>,
}

/// Classifier update under unit column-norm bounds: min |H - WS|_F^2 with
/// |W_m|^2 <= 1 for every column m. The alpha factor scales the objective
/// without moving the constrained minimizer, so the solve drops it.
pub fn update_classifier(
    codes: &DMatrix<f64>,
    labels_pred: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "classifier update needs alpha > 0, got {alpha}"
        )));
    }
    solvers::constrained_least_squares(labels_pred, codes, 1.0)
}

/// Soft label update for the kernel objective: the stationary point
/// H (2 alpha I + L~ + L~^T + 2 gamma U) = 2 alpha W S + 2 gamma F U.
pub fn update_labels_kernel(
    classifier: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    lap: &Laplacian,
    lc: &LabelConstraint,
    alpha: f64,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let n = codes.ncols();
    if lap.matrix.nrows() != n || lc.n() != n {
        return Err(Error::DimensionMismatch {
            context: "kernel label update".into(),
            expected: format!("{n} points"),
            got: format!(
                "laplacian {}x{}, constraint {}",
                lap.matrix.nrows(),
                lap.matrix.ncols(),
                lc.n()
            ),
        });
    }
    let l = &lap.matrix;
    let mut system = l + l.transpose();
    for j in 0..n {
        system[(j, j)] += 2.0 * alpha + 2.0 * gamma * lc.u()[j];
    }
    let mut rhs = classifier * codes * (2.0 * alpha);
    for j in 0..n {
        if lc.u()[j] == 1.0 {
            for i in 0..lc.class_count() {
                rhs[(i, j)] += 2.0 * gamma * lc.f()[(i, j)];
            }
        }
    }
    solve_label_stationarity(&system, &rhs)
}

/// Value of the kernel objective at the given model state.
pub fn kernel_objective(
    model: &KernelModel,
    lap: &Laplacian,
    lc: &LabelConstraint,
    hp: &HyperParams,
) -> f64 {
    let n = model.gram.n();
    let h = &model.labels_pred;
    let residual = DMatrix::identity(n, n) - &model.coeffs * &model.codes;
    let fidelity = (model.gram.values() * &residual)
        .component_mul(&residual)
        .sum();
    let sparsity = hp.lambda * linalg::l1_norm(&model.codes);
    let consistency = hp.alpha * linalg::frob_sq(&(h - &model.classifier * &model.codes));
    let smoothness = (h * &lap.matrix).component_mul(h).sum();
    let mut anchoring = 0.0;
    for j in 0..lc.n() {
        if lc.u()[j] == 1.0 {
            anchoring += (h.column(j) - lc.f().column(j)).norm_squared();
        }
    }
    fidelity + sparsity + consistency + smoothness + hp.gamma * anchoring
}

fn initialize_kernel(
    gram: &KernelGram,
    lc: &LabelConstraint,
    hp: &HyperParams,
) -> Result<KernelModel> {
    let n = gram.n();
    let k = hp.dict_size;
    if lc.labeled_count() == 0 {
        return Err(Error::InvalidLabels("no labeled points".into()));
    }
    lc.require_all_classes()?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let kv = gram.values();
    let mut coeffs = DMatrix::zeros(n, k);
    let set_unit_column = |coeffs: &mut DMatrix<f64>, j: usize, idx: usize| {
        let kii = kv[(idx, idx)];
        coeffs[(idx, j)] = if kii > 0.0 { 1.0 / kii.sqrt() } else { 1.0 };
    };
    if k <= n {
        let picks = rand::seq::index::sample(&mut rng, n, k);
        for (j, idx) in picks.iter().enumerate() {
            set_unit_column(&mut coeffs, j, idx);
        }
    } else {
        for j in 0..n {
            set_unit_column(&mut coeffs, j, j);
        }
        for j in n..k {
            let mut col = DVector::zeros(n);
            for r in 0..n {
                col[r] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            let norm_sq = (kv * &col).dot(&col);
            if norm_sq > 1.0 {
                col /= norm_sq.sqrt();
            }
            coeffs.column_mut(j).copy_from(&col);
        }
    }

    let init_cfg = AdmmConfig {
        rho: hp.admm.rho,
        lambda: hp.lambda,
        max_iters: 100,
        tol: 1e-8,
    };
    let no_classifier = DMatrix::zeros(0, k);
    let no_labels = DMatrix::zeros(0, n);
    let mut codes =
        solvers::kernel_lasso_admm(gram, &coeffs, &no_classifier, &no_labels, 0.0, &init_cfg)?;
    for _ in 0..4 {
        coeffs = solvers::kernel_dictionary_update(&codes, gram, 1.0)?;
        codes =
            solvers::kernel_lasso_admm(gram, &coeffs, &no_classifier, &no_labels, 0.0, &init_cfg)?;
    }

    let c = lc.class_count();
    let mut labels_pred = lc.f().clone();
    for j in 0..n {
        if lc.u()[j] == 0.0 {
            for i in 0..c {
                labels_pred[(i, j)] = rng.gen::<f64>();
            }
        }
    }

    let mut ridge = codes.clone() * codes.transpose() * hp.alpha;
    for i in 0..k {
        ridge[(i, i)] += hp.ridge_mu;
    }
    let rhs = &codes * labels_pred.transpose() * hp.alpha;
    let classifier = Cholesky::new(ridge)
        .ok_or_else(|| Error::NonFinite("classifier ridge system".into()))?
        .solve(&rhs)
        .transpose();

    Ok(KernelModel {
        coeffs,
        codes,
        classifier,
        labels_pred,
        gram: gram.clone(),
    })
}

/// Runs the alternating kernel optimization on a precomputed Gram matrix.
pub fn fit_kernel_gram(
    gram: &KernelGram,
    labels: &Labels,
    class_count: usize,
    hp: &HyperParams,
) -> Result<KernelFitResult> {
    hp.validate()?;
    if labels.len() != gram.n() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            gram.n()
        )));
    }
    let lc = LabelConstraint::new(labels, class_count)?;
    let laps = kernel::kernel_graphs(gram, labels, &hp.graph)?;
    let lap = laps.combined(hp.beta1, hp.beta2, hp.beta3)?;

    let mut model = initialize_kernel(gram, &lc, hp)?;
    let admm_cfg = AdmmConfig {
        lambda: hp.lambda,
        ..hp.admm
    };
    let mut state = AdmmState::from_codes(model.codes.clone());
    let mut trace = Vec::with_capacity(hp.outer_iters);
    for _ in 0..hp.outer_iters {
        model.coeffs = solvers::kernel_dictionary_update(&model.codes, gram, 1.0)?;
        solvers::kernel_lasso_admm_warm(
            gram,
            &model.coeffs,
            &model.classifier,
            &model.labels_pred,
            hp.alpha,
            &admm_cfg,
            &mut state,
        )?;
        model.codes = state.s.clone();
        model.classifier = update_classifier(&model.codes, &model.labels_pred, hp.alpha)?;
        model.labels_pred = update_labels_kernel(
            &model.classifier,
            &model.codes,
            &lap,
            &lc,
            hp.alpha,
            hp.gamma,
        )?;

        let obj = kernel_objective(&model, &lap, &lc, hp);
        if !obj.is_finite() {
            return Err(Error::NonFinite("kernel objective value".into()));
        }
        trace.push(obj);
        let t = trace.len();
        if t >= 2 && hp.early_stop_tol > 0.0 {
            let prev = trace[t - 2];
            if (prev - obj).abs() <= hp.early_stop_tol * prev.abs().max(1e-12) {
                break;
            }
        }
    }
    Ok(KernelFitResult {
        model,
        objective_trace: trace,
        resolved_sigma: None,
    })
}

/// Builds the requested kernel over the data columns (after optional column
/// normalization) and fits on the resulting Gram matrix.
pub fn fit_kernel(
    x: &DMatrix<f64>,
    labels: &Labels,
    class_count: usize,
    hp: &HyperParams,
    kcfg: &KernelConfig,
) -> Result<KernelFitResult> {
    hp.validate()?;
    linalg::check_finite(x, "training data")?;
    let xw = if hp.normalize {
        normalize_columns(x)?
    } else {
        x.clone()
    };
    let (gram, resolved_sigma) = kernel::build_kernel(&xw, kcfg)?;
    let mut result = fit_kernel_gram(&gram, labels, class_count, hp)?;
    result.resolved_sigma = resolved_sigma;
    Ok(result)
}

/// Codes one unseen point against the kernel dictionary (run to
/// convergence) and returns the per-class scores of the code. `x_train`
/// must be the matrix the model was fitted on, in the same column order,
/// after any normalization applied at fit time; `sigma` is the resolved
/// bandwidth for Gaussian kernels and is ignored for linear ones.
pub fn inductive_scores_kernel(
    model: &KernelModel,
    x_train: &DMatrix<f64>,
    x_new: &DVector<f64>,
    kind: KernelKind,
    sigma: f64,
    hp: &HyperParams,
) -> Result<DVector<f64>> {
    if x_train.ncols() != model.gram.n() {
        return Err(Error::DimensionMismatch {
            context: "kernel prediction training data".into(),
            expected: format!("{} columns", model.gram.n()),
            got: format!("{} columns", x_train.ncols()),
        });
    }
    if !x_new.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("prediction input".into()));
    }
    let column = if hp.normalize {
        let norm = x_new.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn { index: 0 });
        }
        x_new / norm
    } else {
        x_new.clone()
    };
    let kappa = kernel::kernel_cross_column(x_train, &column, kind, sigma)?;
    let cfg = AdmmConfig {
        rho: hp.admm.rho,
        lambda: hp.lambda,
        max_iters: hp.admm.max_iters.max(2000),
        tol: 1e-10,
    };
    let code = solvers::kernel_code_column(&model.gram, &model.coeffs, &kappa, &cfg)?;
    let scores = &model.classifier * code;
    Ok(scores)
}

/// Class id of one unseen point: the row index of its largest score.
pub fn predict_inductive_kernel(
    model: &KernelModel,
    x_train: &DMatrix<f64>,
    x_new: &DVector<f64>,
    kind: KernelKind,
    sigma: f64,
    hp: &HyperParams,
) -> Result<usize> {
    let scores = inductive_scores_kernel(model, x_train, x_new, kind, sigma, hp)?;
    Ok(linalg::argmax(scores.iter().copied()).unwrap_or(0) + 1)
}
