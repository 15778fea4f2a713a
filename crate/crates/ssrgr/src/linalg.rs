//! Small dense linear algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn check_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

pub fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn frob_norm(m: &DMatrix<f64>) -> f64 {
    frob_sq(m).sqrt()
}

pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        best = best.max(m.column(j).iter().map(|v| v.abs()).sum());
    }
    best
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Squared Euclidean distances between the columns of `x`.
///
/// The diagonal is exactly zero and tiny negative values from cancellation
/// are clamped to zero.
pub fn pairwise_sq_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut out = DMatrix::zeros(n, n);
    let sq: Vec<f64> = (0..n).map(|j| x.column(j).norm_squared()).collect();
    for j in 0..n {
        for i in (j + 1)..n {
            let dot = x.column(i).dot(&x.column(j));
            let d2 = (sq[i] + sq[j] - 2.0 * dot).max(0.0);
            out[(i, j)] = d2;
            out[(j, i)] = d2;
        }
    }
    out
}

/// Index of the largest entry, lowest index winning ties.
pub fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match best {
            None => best = Some((i, v)),
            Some((_, bv)) if v > bv => best = Some((i, v)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

/// Estimate of the 1-norm of the inverse of a symmetric matrix given its LU
/// factorization (Hager's method, a handful of solves).
pub fn sym_inv_one_norm_est(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0_f64;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
        if y_norm > est {
            est = y_norm;
        }
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = lu.solve(&xi)?;
        let mut jmax = 0;
        let mut zmax = 0.0_f64;
        for (j, v) in z.iter().enumerate() {
            if v.abs() > zmax {
                zmax = v.abs();
                jmax = j;
            }
        }
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[jmax] = 1.0;
    }
    Some(est)
}
