//! Independent reference implementations the acceptance suite checks the
//! library against, plus small shared helpers. Everything here is written
//! from the problem statements directly, avoiding the library's own
//! algorithms: sparse coding via proximal gradient, constrained dictionary
//! fitting via projected gradient, propagation via fixed-point iteration,
//! stationarity via finite differences.

use nalgebra::DMatrix;
use ssrgr::linalg;

pub fn lasso_objective(
    data: &DMatrix<f64>,
    dict: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    lambda: f64,
) -> f64 {
    linalg::frob_sq(&(data - dict * codes)) + lambda * linalg::l1_norm(codes)
}

/// Proximal-gradient (ISTA) solver for min |X - DS|_F^2 + lambda |S|_1,
/// iterated until the relative objective change drops below `tol`.
pub fn prox_grad_lasso(
    data: &DMatrix<f64>,
    dict: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
) -> DMatrix<f64> {
    let gram = dict.tr_mul(dict);
    let lip = 2.0 * gram.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let step = 1.0 / lip;
    let shrink = lambda * step;
    let dtx = dict.tr_mul(data);
    let mut s = DMatrix::zeros(dict.ncols(), data.ncols());
    let mut prev_obj = lasso_objective(data, dict, &s, lambda);
    for _ in 0..200_000 {
        let grad = 2.0 * (&gram * &s - &dtx);
        let mut next = &s - step * grad;
        next.apply(|v| {
            *v = if *v > shrink {
                *v - shrink
            } else if *v < -shrink {
                *v + shrink
            } else {
                0.0
            }
        });
        s = next;
        let obj = lasso_objective(data, dict, &s, lambda);
        if (prev_obj - obj).abs() <= tol * prev_obj.abs().max(1.0) {
            break;
        }
        prev_obj = obj;
    }
    s
}

pub fn dict_objective(data: &DMatrix<f64>, codes: &DMatrix<f64>, dict: &DMatrix<f64>) -> f64 {
    linalg::frob_sq(&(data - dict * codes))
}

fn project_columns(dict: &mut DMatrix<f64>, bound: f64) {
    for j in 0..dict.ncols() {
        let norm_sq = dict.column(j).norm_squared();
        if norm_sq > bound {
            let scale = (bound / norm_sq).sqrt();
            dict.column_mut(j).scale_mut(scale);
        }
    }
}

/// Projected-gradient solver for min |X - DS|_F^2 with squared column norms
/// of D bounded: 500 iterations starting from step 1e-3, with backtracking.
/// The step doubles after every accepted move and halves until a move
/// decreases the objective, so it settles near the inverse curvature and the
/// iteration converges instead of crawling at the base step.
pub fn projected_grad_dictionary(
    data: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    bound: f64,
) -> DMatrix<f64> {
    let mut dict = DMatrix::zeros(data.nrows(), codes.nrows());
    let mut obj = dict_objective(data, codes, &dict);
    let mut step = 1e-3;
    for _ in 0..500 {
        let grad = 2.0 * (&dict * codes - data) * codes.transpose();
        step *= 2.0;
        loop {
            let mut cand = &dict - step * &grad;
            project_columns(&mut cand, bound);
            let cand_obj = dict_objective(data, codes, &cand);
            if cand_obj <= obj || step < 1e-14 {
                dict = cand;
                obj = cand_obj;
                break;
            }
            step *= 0.5;
        }
    }
    dict
}

/// Fixed-point propagation: P <- (1-mixing) P0 + mixing T P for `steps`
/// rounds, then the same symmetrize-and-threshold tail as the closed form.
pub fn propagation_iteration(
    affinity: &DMatrix<f64>,
    init: &DMatrix<f64>,
    mixing: f64,
    delta: f64,
    steps: usize,
) -> DMatrix<f64> {
    let n = affinity.nrows();
    let mut transition = affinity.clone();
    for i in 0..n {
        let degree: f64 = affinity.row(i).sum();
        assert!(degree > 0.0, "oracle given an isolated node");
        for j in 0..n {
            transition[(i, j)] /= degree;
        }
    }
    let mut p = init.clone();
    for _ in 0..steps {
        p = (1.0 - mixing) * init + mixing * &transition * p;
    }
    let mut sym = (&p + p.transpose()) * 0.5;
    sym.apply(|v| {
        if *v < delta {
            *v = 0.0;
        }
    });
    sym
}

/// Central finite-difference gradient of a scalar function of a matrix.
pub fn fd_gradient(f: impl Fn(&DMatrix<f64>) -> f64, at: &DMatrix<f64>, step: f64) -> DMatrix<f64> {
    let mut grad = DMatrix::zeros(at.nrows(), at.ncols());
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let mut plus = at.clone();
            plus[(i, j)] += step;
            let mut minus = at.clone();
            minus[(i, j)] -= step;
            grad[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * step);
        }
    }
    grad
}

/// The terms of either full objective that involve H, as a function of H.
pub fn label_objective(
    h: &DMatrix<f64>,
    classifier: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    lap: &DMatrix<f64>,
    known: &DMatrix<f64>,
    mask: &[f64],
    alpha: f64,
    gamma: f64,
) -> f64 {
    let consistency = alpha * linalg::frob_sq(&(h - classifier * codes));
    let smoothness = (h * lap).component_mul(h).sum();
    let mut anchoring = 0.0;
    for (j, &u) in mask.iter().enumerate() {
        if u == 1.0 {
            anchoring += (h.column(j) - known.column(j)).norm_squared();
        }
    }
    consistency + smoothness + gamma * anchoring
}

/// Fraction of positions where predictions match the reference labels,
/// restricted to the given indices.
pub fn accuracy_on(pred: &[usize], truth: &[Option<usize>], indices: &[usize]) -> f64 {
    let hits = indices
        .iter()
        .filter(|&&i| Some(pred[i]) == truth[i])
        .count();
    hits as f64 / indices.len() as f64
}

/// Prints the one-line verdict for an acceptance criterion and panics with
/// the collected details when anything failed.
pub fn report(criterion: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("[PASS] {criterion}");
    } else {
        println!("[FAIL] {criterion}");
        panic!("{criterion}:\n  {}", failures.join("\n  "));
    }
}

/// Pushes a failure message when the elapsed time exceeds the budget.
pub fn check_budget(
    failures: &mut Vec<String>,
    started: std::time::Instant,
    budget: std::time::Duration,
) {
    let elapsed = started.elapsed();
    if elapsed > budget {
        failures.push(format!("runtime {elapsed:.2?} exceeded budget {budget:.2?}"));
    }
}
