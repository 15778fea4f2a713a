//! Sparse coding and dictionary optimization kernels.
//!
//! Two workhorses live here. An ADMM loop for l1-regularized quadratic
//! problems handles every sparse-code update (plain lasso, the joint
//! feature/label coding step, and the kernel-space variant), and a projected
//! Newton ascent on Lagrange multipliers handles every column-norm
//! constrained least-squares update (dictionary, kernel dictionary,
//! classifier).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::config::AdmmConfig;
use crate::error::{Error, Result};
use crate::kernel::KernelGram;
use crate::linalg;

/// Scalar shrinkage: moves x toward zero by t, clamping at zero.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Iterates of the splitting S = Z with scaled multiplier y, kept between
/// calls so outer loops can warm-start the coding step.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub s: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl AdmmState {
    pub fn zeros(k: usize, n: usize) -> Self {
        Self {
            s: DMatrix::zeros(k, n),
            z: DMatrix::zeros(k, n),
            y: DMatrix::zeros(k, n),
        }
    }

    /// Starts from a known code matrix with the splitting already agreed.
    pub fn from_codes(codes: DMatrix<f64>) -> Self {
        let y = DMatrix::zeros(codes.nrows(), codes.ncols());
        Self {
            s: codes.clone(),
            z: codes,
            y,
        }
    }
}

/// ADMM cycles on min_S Tr(S^T P S) - 2 Tr(C^T S) + lambda |S|_1 with P
/// positive semi-definite. Each cycle thresholds Z, solves the regularized
/// normal equations for S, and takes a dual step on y. Runs cfg.max_iters
/// cycles, stopping early when both primal and dual residuals drop below
/// cfg.tol (when cfg.tol > 0).
pub(crate) fn quad_l1_admm(
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    cfg: &AdmmConfig,
    state: &mut AdmmState,
) -> Result<()> {
    cfg.validate()?;
    let k = p.nrows();
    let n = c.ncols();
    if p.ncols() != k {
        return Err(Error::DimensionMismatch {
            context: "ADMM quadratic term".into(),
            expected: format!("{k}x{k}"),
            got: format!("{}x{}", p.nrows(), p.ncols()),
        });
    }
    if c.nrows() != k {
        return Err(Error::DimensionMismatch {
            context: "ADMM linear term".into(),
            expected: format!("{k} rows"),
            got: format!("{} rows", c.nrows()),
        });
    }
    if state.s.shape() != (k, n) || state.z.shape() != (k, n) || state.y.shape() != (k, n) {
        return Err(Error::DimensionMismatch {
            context: "ADMM state".into(),
            expected: format!("{k}x{n}"),
            got: format!("{}x{}", state.s.nrows(), state.s.ncols()),
        });
    }
    let mut m = p * 2.0;
    for i in 0..k {
        m[(i, i)] += cfg.rho;
    }
    let chol = Cholesky::new(m).ok_or_else(|| {
        Error::NonFinite("ADMM normal equations could not be factorized".into())
    })?;
    let thr = cfg.lambda / cfg.rho;
    for _ in 0..cfg.max_iters {
        let z_prev = state.z.clone();
        state.z = &state.s + &state.y / cfg.rho;
        state.z.apply(|v| *v = soft_threshold(*v, thr));
        let mut rhs = c * 2.0;
        rhs += cfg.rho * &state.z - &state.y;
        chol.solve_mut(&mut rhs);
        state.s = rhs;
        state.y += cfg.rho * (&state.s - &state.z);
        if cfg.tol > 0.0 {
            let primal = linalg::max_abs(&(&state.s - &state.z));
            let dual = cfg.rho * linalg::max_abs(&(&state.z - &z_prev));
            if primal <= cfg.tol && dual <= cfg.tol {
                break;
            }
        }
    }
    if !state.s.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("ADMM iterate diverged".into()));
    }
    Ok(())
}

/// Sparse codes of data columns over a fixed dictionary:
/// min_S |data - dict S|_F^2 + lambda |S|_1, starting from zero.
pub fn lasso_admm(
    data: &DMatrix<f64>,
    dict: &DMatrix<f64>,
    cfg: &AdmmConfig,
) -> Result<DMatrix<f64>> {
    let mut state = AdmmState::zeros(dict.ncols(), data.ncols());
    lasso_admm_warm(data, dict, cfg, &mut state)?;
    Ok(state.s)
}

/// Same problem as [`lasso_admm`] but continues from the given state.
pub fn lasso_admm_warm(
    data: &DMatrix<f64>,
    dict: &DMatrix<f64>,
    cfg: &AdmmConfig,
    state: &mut AdmmState,
) -> Result<()> {
    linalg::check_finite(data, "coding data")?;
    linalg::check_finite(dict, "coding dictionary")?;
    if dict.nrows() != data.nrows() {
        return Err(Error::DimensionMismatch {
            context: "coding dictionary".into(),
            expected: format!("{} rows", data.nrows()),
            got: format!("{} rows", dict.nrows()),
        });
    }
    let p = dict.tr_mul(dict);
    let c = dict.tr_mul(data);
    quad_l1_admm(&p, &c, cfg, state)
}

/// Kernel-space sparse coding with a classifier consistency term:
/// min_S Tr((I - BS)^T K (I - BS)) + lambda |S|_1 + alpha |H - WS|_F^2.
pub fn kernel_lasso_admm(
    gram: &KernelGram,
    coeffs: &DMatrix<f64>,
    classifier: &DMatrix<f64>,
    labels: &DMatrix<f64>,
    alpha: f64,
    cfg: &AdmmConfig,
) -> Result<DMatrix<f64>> {
    let mut state = AdmmState::zeros(coeffs.ncols(), gram.n());
    kernel_lasso_admm_warm(gram, coeffs, classifier, labels, alpha, cfg, &mut state)?;
    Ok(state.s)
}

/// Same problem as [`kernel_lasso_admm`] but continues from the given state.
pub fn kernel_lasso_admm_warm(
    gram: &KernelGram,
    coeffs: &DMatrix<f64>,
    classifier: &DMatrix<f64>,
    labels: &DMatrix<f64>,
    alpha: f64,
    cfg: &AdmmConfig,
    state: &mut AdmmState,
) -> Result<()> {
    linalg::check_finite(coeffs, "kernel coding coefficients")?;
    linalg::check_finite(classifier, "kernel coding classifier")?;
    linalg::check_finite(labels, "kernel coding labels")?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "coding weight alpha must be nonnegative and finite, got {alpha}"
        )));
    }
    let n = gram.n();
    let k = coeffs.ncols();
    if coeffs.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "kernel coding coefficients".into(),
            expected: format!("{n} rows"),
            got: format!("{} rows", coeffs.nrows()),
        });
    }
    if classifier.ncols() != k || labels.ncols() != n || labels.nrows() != classifier.nrows() {
        return Err(Error::DimensionMismatch {
            context: "kernel coding classifier/labels".into(),
            expected: format!("classifier cx{k}, labels cx{n}"),
            got: format!(
                "classifier {}x{}, labels {}x{}",
                classifier.nrows(),
                classifier.ncols(),
                labels.nrows(),
                labels.ncols()
            ),
        });
    }
    let kb = gram.values() * coeffs;
    let mut p = coeffs.tr_mul(&kb);
    let mut c = kb.transpose();
    if alpha > 0.0 {
        p += alpha * classifier.tr_mul(classifier);
        c += alpha * classifier.tr_mul(labels);
    }
    quad_l1_admm(&p, &c, cfg, state)
}

/// Codes one out-of-sample point against a kernel dictionary. kappa holds
/// the kernel values between the training points and the new point.
pub fn kernel_code_column(
    gram: &KernelGram,
    coeffs: &DMatrix<f64>,
    kappa: &DVector<f64>,
    cfg: &AdmmConfig,
) -> Result<DVector<f64>> {
    if kappa.len() != gram.n() {
        return Err(Error::DimensionMismatch {
            context: "kernel query values".into(),
            expected: format!("{} rows", gram.n()),
            got: format!("{} rows", kappa.len()),
        });
    }
    linalg::check_finite(coeffs, "kernel coding coefficients")?;
    if !kappa.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("kernel query values".into()));
    }
    let kb = gram.values() * coeffs;
    let p = coeffs.tr_mul(&kb);
    let c = DMatrix::from_column_slice(coeffs.ncols(), 1, coeffs.tr_mul(kappa).as_slice());
    let mut state = AdmmState::zeros(coeffs.ncols(), 1);
    quad_l1_admm(&p, &c, cfg, &mut state)?;
    Ok(DVector::from_column_slice(state.s.as_slice()))
}

/// Dictionary with the column-norm bound it was fitted under.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub atoms: DMatrix<f64>,
    pub norm_bound: f64,
}

impl Dictionary {
    /// Largest squared column norm; feasible when this is <= norm_bound.
    pub fn max_col_norm_sq(&self) -> f64 {
        (0..self.atoms.ncols())
            .map(|j| self.atoms.column(j).norm_squared())
            .fold(0.0, f64::max)
    }
}

/// Maximizes the dual of min |target - M codes|_F^2 subject to per-column
/// quadratic constraints, returning V = (G + diag(multipliers))^{-1} where
/// G = codes codes^T. The column constraint for index j evaluates to
/// (V Q V)_jj <= bound, with Q the problem-specific quadratic form. Ascent
/// runs projected Newton steps from zero multipliers, clamping at zero.
fn constrained_ls_dual(g: &DMatrix<f64>, q: &DMatrix<f64>, bound: f64) -> Result<DMatrix<f64>> {
    let k = g.nrows();
    if q.nrows() != k || q.ncols() != k || g.ncols() != k {
        return Err(Error::DimensionMismatch {
            context: "dual ascent".into(),
            expected: format!("{k}x{k}"),
            got: format!("{}x{}", q.nrows(), q.ncols()),
        });
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "norm bound must be positive and finite, got {bound}"
        )));
    }
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let shifted_inverse = |lam: &DVector<f64>| -> Option<DMatrix<f64>> {
        let mut m = g.clone();
        for i in 0..k {
            m[(i, i)] += lam[i];
        }
        Cholesky::new(m).map(|c| c.inverse())
    };
    let dual_value = |v: &DMatrix<f64>, lam: &DVector<f64>| -> f64 {
        -(v * q).trace() - bound * lam.sum()
    };

    // G can be singular when some atoms go unused; a tiny positive floor on
    // the multipliers keeps the shifted matrix factorizable.
    let mut floor = 0.0_f64;
    let mut lam = DVector::zeros(k);
    let mut v = loop {
        match shifted_inverse(&lam) {
            Some(v) => break v,
            None => {
                floor = if floor == 0.0 {
                    1e-12 * (1.0 + g.trace().abs() / k as f64)
                } else {
                    floor * 100.0
                };
                if floor > 1e20 {
                    return Err(Error::NonFinite(
                        "constrained update could not factorize the code Gram matrix".into(),
                    ));
                }
                for i in 0..k {
                    lam[i] = lam[i].max(floor);
                }
            }
        }
    };

    let kkt_tol = 1e-9 * bound.max(1.0);
    let mut val = dual_value(&v, &lam);
    for _ in 0..200 {
        let phi = &v * q * &v;
        let grad = DVector::from_fn(k, |j, _| phi[(j, j)] - bound);
        let mut kkt = 0.0_f64;
        for j in 0..k {
            if lam[j] > floor + 1e-300 {
                kkt = kkt.max(grad[j].abs());
            } else {
                kkt = kkt.max(grad[j].max(0.0));
            }
        }
        if kkt <= kkt_tol {
            break;
        }

        // Coordinates pinned at the lower bound with a descent gradient stay
        // fixed; the Newton system runs on the free set only. The dual
        // Hessian is -2 (phi .* V), and the Schur product of two PSD
        // matrices stays PSD, so the regularized system below is definite.
        let free: Vec<usize> = (0..k)
            .filter(|&j| lam[j] > floor + 1e-300 || grad[j] > 0.0)
            .collect();
        if free.is_empty() {
            break;
        }
        let nf = free.len();
        let mut hess = DMatrix::zeros(nf, nf);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                hess[(a, b)] = 2.0 * phi[(i, j)] * v[(i, j)];
            }
        }
        let reg = 1e-12 * (1.0 + hess.diagonal().amax());
        for i in 0..nf {
            hess[(i, i)] += reg;
        }
        let grad_free = DVector::from_fn(nf, |a, _| grad[free[a]]);
        let dir_free = match Cholesky::new(hess) {
            Some(c) => c.solve(&grad_free),
            None => grad_free * (1.0 / (1.0 + g.diagonal().amax())),
        };
        let mut dir = DVector::zeros(k);
        for (a, &j) in free.iter().enumerate() {
            dir[j] = dir_free[a];
        }

        let mut accepted = false;
        let mut t = 1.0_f64;
        for _ in 0..60 {
            let mut lam_new = &lam + t * &dir;
            lam_new.apply(|x| *x = x.max(floor));
            if let Some(v_new) = shifted_inverse(&lam_new) {
                let val_new = dual_value(&v_new, &lam_new);
                let gain = grad.dot(&(&lam_new - &lam));
                let ok = if gain > 0.0 {
                    val_new >= val + 1e-4 * gain
                } else {
                    val_new > val
                };
                if ok {
                    lam = lam_new;
                    v = v_new;
                    val = val_new;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(v)
}

/// Solves min_M |target - M codes|_F^2 with squared column norms of M
/// bounded, via the multiplier ascent above. Shared by the dictionary and
/// classifier updates.
pub(crate) fn constrained_least_squares(
    target: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    bound: f64,
) -> Result<DMatrix<f64>> {
    linalg::check_finite(target, "constrained update target")?;
    linalg::check_finite(codes, "constrained update codes")?;
    if target.ncols() != codes.ncols() {
        return Err(Error::DimensionMismatch {
            context: "constrained update".into(),
            expected: format!("{} columns", target.ncols()),
            got: format!("{} columns", codes.ncols()),
        });
    }
    let g = codes * codes.transpose();
    let ts = target * codes.transpose();
    let q = ts.tr_mul(&ts);
    let v = constrained_ls_dual(&g, &q, bound)?;
    Ok(ts * v)
}

/// Dictionary update for fixed codes: min_D |data - D codes|_F^2 subject to
/// |D_j|^2 <= norm_bound for every column j.
pub fn lagrange_dual_dictionary(
    data: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    norm_bound: f64,
) -> Result<Dictionary> {
    let atoms = constrained_least_squares(data, codes, norm_bound)?;
    Ok(Dictionary {
        atoms,
        norm_bound,
    })
}

/// Kernel dictionary update: the dictionary is parametrized as a coefficient
/// matrix B over the training points, minimizing the kernel-space residual
/// Tr((I - BS)^T K (I - BS)) subject to B_j^T K B_j <= norm_bound.
pub fn kernel_dictionary_update(
    codes: &DMatrix<f64>,
    gram: &KernelGram,
    norm_bound: f64,
) -> Result<DMatrix<f64>> {
    linalg::check_finite(codes, "kernel dictionary codes")?;
    if codes.ncols() != gram.n() {
        return Err(Error::DimensionMismatch {
            context: "kernel dictionary codes".into(),
            expected: format!("{} columns", gram.n()),
            got: format!("{} columns", codes.ncols()),
        });
    }
    let g = codes * codes.transpose();
    let q = linalg::symmetrize(&(codes * gram.values() * codes.transpose()));
    let v = constrained_ls_dual(&g, &q, norm_bound)?;
    Ok(codes.tr_mul(&v))
}
