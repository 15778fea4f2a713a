//! The linear estimator: joint learning of a dictionary, sparse codes, a
//! linear classifier on the codes, and a soft label matrix over all points.
//!
//! The objective being minimized alternately is
//!
//! |X - DS|^2 + lambda |S|_1 + alpha |H - WS|^2 + Tr(H L H^T)
//!   + gamma Tr((H - F) U (H - F)^T)
//!
//! with column-norm bounds on the dictionary and classifier, where L is the
//! weighted combination of the three neighborhood Laplacians, F holds the
//! known labels one-hot, and U masks the labeled columns.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{AdmmConfig, HyperParams};
use crate::data::normalize_columns;
use crate::error::{Error, Result};
use crate::graphs::{Labels, Laplacian, LaplacianSet, PairwiseDistances};
use crate::linalg;
use crate::solvers::{self, AdmmState, Dictionary};

/// Known-label matrix F (one-hot columns) and labeled-column mask U.
#[derive(Debug, Clone)]
pub struct LabelConstraint {
    f: DMatrix<f64>,
    u: DVector<f64>,
    class_count: usize,
    labels: Vec<Option<usize>>,
}

impl LabelConstraint {
    pub fn new(labels: &Labels, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::InvalidLabels("need at least one class".into()));
        }
        let n = labels.len();
        let mut f = DMatrix::zeros(class_count, n);
        let mut u = DVector::zeros(n);
        for (j, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                if *c == 0 || *c > class_count {
                    return Err(Error::InvalidLabels(format!(
                        "point {j} has class {c}, valid ids are 1..={class_count}"
                    )));
                }
                f[(c - 1, j)] = 1.0;
                u[j] = 1.0;
            }
        }
        Ok(Self {
            f,
            u,
            class_count,
            labels: labels.to_vec(),
        })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Errors unless every class id up to class_count appears among the
    /// labeled points.
    pub fn require_all_classes(&self) -> Result<()> {
        for class in 1..=self.class_count {
            if !self.labels.contains(&Some(class)) {
                return Err(Error::InvalidLabels(format!(
                    "class {class} has no labeled points"
                )));
            }
        }
        Ok(())
    }
}

/// Learned state of the linear estimator.
#[derive(Debug, Clone)]
pub struct SsrgrModel {
    pub dictionary: Dictionary,
    pub codes: DMatrix<f64>,
    pub classifier: DMatrix<f64>,
    pub labels_pred: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: SsrgrModel,
    pub objective_trace: Vec<f64>,
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>, bottom_scale: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows())
        .copy_from(&(bottom * bottom_scale));
    out
}

/// Seeded starting point: dictionary atoms drawn from data columns, codes
/// from a few unconstrained sparse-coding alternations, labels one-hot where
/// known and uniform noise elsewhere, classifier from ridge regression of
/// the labels onto the codes.
pub fn initialize(x: &DMatrix<f64>, lc: &LabelConstraint, hp: &HyperParams) -> Result<SsrgrModel> {
    hp.validate()?;
    linalg::check_finite(x, "training data")?;
    let n = x.ncols();
    let d = x.nrows();
    let k = hp.dict_size;
    if lc.n() != n {
        return Err(Error::DimensionMismatch {
            context: "label constraint".into(),
            expected: format!("{n} columns"),
            got: format!("{} columns", lc.n()),
        });
    }
    if lc.labeled_count() == 0 {
        return Err(Error::InvalidLabels("no labeled points".into()));
    }
    lc.require_all_classes()?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut atoms = DMatrix::zeros(d, k);
    if k <= n {
        let picks = rand::seq::index::sample(&mut rng, n, k);
        for (j, idx) in picks.iter().enumerate() {
            atoms.column_mut(j).copy_from(&x.column(idx));
        }
    } else {
        for j in 0..n {
            atoms.column_mut(j).copy_from(&x.column(j));
        }
        for j in n..k {
            for r in 0..d {
                atoms[(r, j)] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
    }
    for j in 0..k {
        let norm = atoms.column(j).norm();
        if norm > 0.0 {
            atoms.column_mut(j).scale_mut(1.0 / norm);
        }
    }

    let init_cfg = AdmmConfig {
        rho: hp.admm.rho,
        lambda: hp.lambda,
        max_iters: 100,
        tol: 1e-8,
    };
    let mut codes = solvers::lasso_admm(x, &atoms, &init_cfg)?;
    for _ in 0..4 {
        atoms = solvers::lagrange_dual_dictionary(x, &codes, 1.0)?.atoms;
        codes = solvers::lasso_admm(x, &atoms, &init_cfg)?;
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

    // ridge regression of the label guesses onto the codes
    let mut ridge = codes.clone() * codes.transpose() * hp.alpha;
    for i in 0..k {
        ridge[(i, i)] += hp.ridge_mu;
    }
    let rhs = &codes * labels_pred.transpose() * hp.alpha;
    let classifier = Cholesky::new(ridge)
        .ok_or_else(|| Error::NonFinite("classifier ridge system".into()))?
        .solve(&rhs)
        .transpose();

    Ok(SsrgrModel {
        dictionary: Dictionary {
            atoms,
            norm_bound: 1.0,
        },
        codes,
        classifier,
        labels_pred,
    })
}

/// Joint dictionary/classifier update: stacks the data over the scaled soft
/// labels, solves one norm-constrained least-squares problem for the stacked
/// dictionary, and splits the result back apart. The stacked column-norm
/// bound is 1 + alpha.
pub fn update_dictionary_classifier(
    x: &DMatrix<f64>,
    labels_pred: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    alpha: f64,
) -> Result<(Dictionary, DMatrix<f64>)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "joint update needs alpha > 0, got {alpha}"
        )));
    }
    let d = x.nrows();
    let c = labels_pred.nrows();
    let root = alpha.sqrt();
    let stacked_target = stack_rows(x, labels_pred, root);
    let stacked = solvers::lagrange_dual_dictionary(&stacked_target, codes, 1.0 + alpha)?;
    let atoms = stacked.atoms.rows(0, d).into_owned();
    let classifier = stacked.atoms.rows(d, c).into_owned() / root;
    Ok((
        Dictionary {
            atoms,
            norm_bound: 1.0 + alpha,
        },
        classifier,
    ))
}

pub(crate) fn solve_label_stationarity(
    system: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = system.nrows();
    let lu = system.clone().lu();
    let inv_est = linalg::sym_inv_one_norm_est(&lu, n).ok_or_else(|| {
        Error::IndefiniteLaplacian {
            detail: "label system is singular".into(),
        }
    })?;
    let cond = linalg::one_norm(system) * inv_est;
    if cond > 1e12 {
        return Err(Error::IndefiniteLaplacian {
            detail: format!("label system condition estimate {cond:.3e}"),
        });
    }
    let ht = lu
        .solve(&rhs.transpose())
        .ok_or_else(|| Error::IndefiniteLaplacian {
            detail: "label system solve failed".into(),
        })?;
    let h = ht.transpose();
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("label update".into()));
    }
    let residual = linalg::frob_norm(&(&h * system - rhs));
    let h_norm = linalg::frob_norm(&h);
    if residual > 1e-8 * h_norm {
        return Err(Error::IndefiniteLaplacian {
            detail: format!(
                "label update residual {residual:.3e} exceeds 1e-8 * |H| = {:.3e}",
                1e-8 * h_norm
            ),
        });
    }
    Ok(h)
}

/// Soft label update: the closed-form stationary point of the objective in
/// H, namely H (alpha I + (L + L^T)/2 + gamma U) = alpha W S + gamma F U.
pub fn update_labels(
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
            context: "label update".into(),
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
    let mut system = (l + l.transpose()) * 0.5;
    for j in 0..n {
        system[(j, j)] += alpha + gamma * lc.u()[j];
    }
    let mut rhs = classifier * codes * alpha;
    for j in 0..n {
        if lc.u()[j] == 1.0 {
            for i in 0..lc.class_count() {
                rhs[(i, j)] += gamma * lc.f()[(i, j)];
            }
        }
    }
    solve_label_stationarity(&system, &rhs)
}

/// Value of the full objective at the given model state.
pub fn objective(
    x: &DMatrix<f64>,
    model: &SsrgrModel,
    lap: &Laplacian,
    lc: &LabelConstraint,
    hp: &HyperParams,
) -> f64 {
    let h = &model.labels_pred;
    let fidelity = linalg::frob_sq(&(x - &model.dictionary.atoms * &model.codes));
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

/// Runs the full alternating optimization on one dataset.
pub fn fit(
    x: &DMatrix<f64>,
    labels: &Labels,
    class_count: usize,
    hp: &HyperParams,
) -> Result<FitResult> {
    hp.validate()?;
    linalg::check_finite(x, "training data")?;
    if labels.len() != x.ncols() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            x.ncols()
        )));
    }
    let xw = if hp.normalize {
        normalize_columns(x)?
    } else {
        x.clone()
    };
    let lc = LabelConstraint::new(labels, class_count)?;
    let dist = PairwiseDistances::from_points(&xw)?;
    let laps = LaplacianSet::build(&dist, labels, &hp.graph)?;
    let lap = laps.combined(hp.beta1, hp.beta2, hp.beta3)?;

    let mut model = initialize(&xw, &lc, hp)?;
    let admm_cfg = AdmmConfig {
        lambda: hp.lambda,
        ..hp.admm
    };
    let mut state = AdmmState::from_codes(model.codes.clone());
    let mut trace = Vec::with_capacity(hp.outer_iters);
    for _ in 0..hp.outer_iters {
        let (dict, classifier) =
            update_dictionary_classifier(&xw, &model.labels_pred, &model.codes, hp.alpha)?;
        model.dictionary = dict;
        model.classifier = classifier;

        let root = hp.alpha.sqrt();
        let stacked_target = stack_rows(&xw, &model.labels_pred, root);
        let stacked_dict = stack_rows(&model.dictionary.atoms, &model.classifier, root);
        solvers::lasso_admm_warm(&stacked_target, &stacked_dict, &admm_cfg, &mut state)?;
        model.codes = state.s.clone();

        model.labels_pred = update_labels(
            &model.classifier,
            &model.codes,
            &lap,
            &lc,
            hp.alpha,
            hp.gamma,
        )?;

        let obj = objective(&xw, &model, &lap, &lc, hp);
        if !obj.is_finite() {
            return Err(Error::NonFinite("objective value".into()));
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
    Ok(FitResult {
        model,
        objective_trace: trace,
    })
}

/// Hard labels for the points the model was fitted on: the row of the
/// largest soft label score per column, as 1-based class ids. Ties go to the
/// lower class id.
pub fn predict_transductive(labels_pred: &DMatrix<f64>) -> Vec<usize> {
    (0..labels_pred.ncols())
        .map(|j| linalg::argmax(labels_pred.column(j).iter().copied()).unwrap_or(0) + 1)
        .collect()
}

/// Codes one unseen point over the learned dictionary (run to convergence)
/// and returns the per-class scores of the code.
pub fn inductive_scores(
    model: &SsrgrModel,
    x_new: &DVector<f64>,
    hp: &HyperParams,
) -> Result<DVector<f64>> {
    if !x_new.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("prediction input".into()));
    }
    if x_new.len() != model.dictionary.atoms.nrows() {
        return Err(Error::DimensionMismatch {
            context: "prediction input".into(),
            expected: format!("{} rows", model.dictionary.atoms.nrows()),
            got: format!("{} rows", x_new.len()),
        });
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
    let cfg = AdmmConfig {
        rho: hp.admm.rho,
        lambda: hp.lambda,
        max_iters: hp.admm.max_iters.max(2000),
        tol: 1e-10,
    };
    let data = DMatrix::from_column_slice(column.len(), 1, column.as_slice());
    let s = solvers::lasso_admm(&data, &model.dictionary.atoms, &cfg)?;
    let scores = &model.classifier * s;
    Ok(DVector::from_column_slice(scores.as_slice()))
}

/// Class id of one unseen point: the row index of its largest score.
pub fn predict_inductive(
    model: &SsrgrModel,
    x_new: &DVector<f64>,
    hp: &HyperParams,
) -> Result<usize> {
    let scores = inductive_scores(model, x_new, hp)?;
    Ok(linalg::argmax(scores.iter().copied()).unwrap_or(0) + 1)
}
