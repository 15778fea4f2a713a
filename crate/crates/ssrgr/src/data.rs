//! Datasets, file formats, label splits, and synthetic benchmarks.
//!
//! A dataset stores feature vectors as matrix columns together with
//! per-point labels. A label of `None` marks a point as unlabeled; class
//! ids are 1-based. Two on-disk formats are supported: a whitespace text
//! format and a binary format that round-trips floats exactly.

use std::io::{Read as _, Write as _};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

const BINARY_MAGIC: &[u8; 4] = b"SSRD";
const BINARY_VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<Option<usize>>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<Option<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        linalg::check_finite(&features, "dataset features")?;
        if labels.len() != features.ncols() {
            return Err(Error::InvalidLabels(format!(
                "{} labels for {} points",
                labels.len(),
                features.ncols()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                if *c == 0 || *c > class_count {
                    return Err(Error::InvalidLabels(format!(
                        "point {i} has class {c}, valid ids are 1..={class_count}"
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            class_count,
        })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Copy of the dataset with labels kept only on the given points.
    pub fn with_labels_masked(&self, keep_labeled: &[usize]) -> Result<Self> {
        let mut labels = vec![None; self.n()];
        for &i in keep_labeled {
            if i >= self.n() {
                return Err(Error::InvalidSplit(format!(
                    "index {i} out of range for {} points",
                    self.n()
                )));
            }
            labels[i] = self.labels[i];
        }
        Dataset::new(self.features.clone(), labels, self.class_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Text,
    Binary,
}

impl DataFormat {
    /// Picks the format from a file extension: .txt is text, anything else
    /// binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => DataFormat::Text,
            _ => DataFormat::Binary,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn class_count_from_labels(labels: &[Option<usize>]) -> usize {
    labels.iter().flatten().copied().max().unwrap_or(0)
}

fn load_text(path: &Path) -> Result<Dataset> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(parse_err(
            path,
            1,
            "header must be: <rows> <cols> <has_labels>",
        ));
    }
    let rows: usize = head[0]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad row count"))?;
    let cols: usize = head[1]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad column count"))?;
    let has_labels = match head[2] {
        "0" => false,
        "1" => true,
        _ => return Err(parse_err(path, 1, "has_labels flag must be 0 or 1")),
    };
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, 1, "matrix dimensions must be positive"));
    }

    let mut features = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, r + 2, format!("missing feature row {r}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != cols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {cols} values, found {}", vals.len()),
            ));
        }
        for (c, tok) in vals.iter().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad number '{tok}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, idx + 1, format!("non-finite value '{tok}'")));
            }
            features[(r, c)] = v;
        }
    }

    let labels = if has_labels {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, rows + 2, "missing label row"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != cols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {cols} labels, found {}", toks.len()),
            ));
        }
        let mut labels = Vec::with_capacity(cols);
        for tok in toks {
            let v: usize = tok
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad label '{tok}'")))?;
            labels.push(if v == 0 { None } else { Some(v) });
        }
        labels
    } else {
        vec![None; cols]
    };

    let class_count = class_count_from_labels(&labels);
    Dataset::new(features, labels, class_count)
}

fn save_text(ds: &Dataset, path: &Path) -> Result<()> {
    let has_labels = ds.labels.iter().any(|l| l.is_some());
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {}\n",
        ds.dim(),
        ds.n(),
        if has_labels { 1 } else { 0 }
    ));
    for r in 0..ds.dim() {
        let row: Vec<String> = (0..ds.n())
            .map(|c| format!("{:?}", ds.features[(r, c)]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    if has_labels {
        let row: Vec<String> = ds
            .labels
            .iter()
            .map(|l| l.unwrap_or(0).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|_| parse_err(path, 0, "file too short for header"))?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(parse_err(path, 0, "bad magic bytes"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != BINARY_VERSION {
        return Err(parse_err(path, 0, format!("unsupported version {version}")));
    }
    let flags = u16::from_le_bytes([header[6], header[7]]);
    let has_labels = flags & 1 != 0;
    let rows = u32::from_le_bytes([header[8], header[9], header[10], header[11]]) as usize;
    let cols = u32::from_le_bytes([header[12], header[13], header[14], header[15]]) as usize;
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, 0, "matrix dimensions must be positive"));
    }

    let mut body = Vec::new();
    file.read_to_end(&mut body)?;
    let expect = 8 * rows * cols + if has_labels { 8 * cols } else { 0 };
    if body.len() != expect {
        return Err(parse_err(
            path,
            0,
            format!("expected {expect} payload bytes, found {}", body.len()),
        ));
    }

    let mut features = DMatrix::zeros(rows, cols);
    let mut off = 0;
    for r in 0..rows {
        for c in 0..cols {
            let v = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(parse_err(path, 0, format!("non-finite value at ({r},{c})")));
            }
            features[(r, c)] = v;
            off += 8;
        }
    }

    let labels = if has_labels {
        let mut labels = Vec::with_capacity(cols);
        for c in 0..cols {
            let v = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
            off += 8;
            if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
                return Err(parse_err(path, 0, format!("bad label {v} for point {c}")));
            }
            let id = v as usize;
            labels.push(if id == 0 { None } else { Some(id) });
        }
        labels
    } else {
        vec![None; cols]
    };

    let class_count = class_count_from_labels(&labels);
    Dataset::new(features, labels, class_count)
}

fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    let has_labels = ds.labels.iter().any(|l| l.is_some());
    let mut out = Vec::with_capacity(16 + 8 * ds.dim() * ds.n());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(has_labels as u16).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.n() as u32).to_le_bytes());
    for r in 0..ds.dim() {
        for c in 0..ds.n() {
            out.extend_from_slice(&ds.features[(r, c)].to_le_bytes());
        }
    }
    if has_labels {
        for l in &ds.labels {
            out.extend_from_slice(&(l.unwrap_or(0) as f64).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Text => load_text(path),
        DataFormat::Binary => load_binary(path),
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Text => save_text(ds, path),
        DataFormat::Binary => save_binary(ds, path),
    }
}

/// How to pick the labeled subset of a dataset.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub labeled_per_class: usize,
    pub seed: u64,
    pub shuffle: bool,
}

/// Splits point indices into a labeled and an unlabeled part, taking
/// `labeled_per_class` labeled points from every class. Classes are
/// processed in ascending id order; within a class the input order is kept
/// unless shuffling is requested. Points whose input label is absent always
/// land in the unlabeled part. Both returned index lists are ascending.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if spec.labeled_per_class == 0 {
        return Err(Error::InvalidSplit("labeled_per_class must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labeled = Vec::new();
    for class in 1..=ds.class_count {
        let mut members: Vec<usize> = (0..ds.n())
            .filter(|&i| ds.labels[i] == Some(class))
            .collect();
        if members.len() < spec.labeled_per_class {
            return Err(Error::InvalidSplit(format!(
                "class {class} has {} labeled points, need {}",
                members.len(),
                spec.labeled_per_class
            )));
        }
        if spec.shuffle {
            members.shuffle(&mut rng);
        }
        labeled.extend_from_slice(&members[..spec.labeled_per_class]);
    }
    labeled.sort_unstable();
    let unlabeled: Vec<usize> = (0..ds.n()).filter(|i| !labeled.contains(i)).collect();
    Ok((labeled, unlabeled))
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::check_finite(x, "normalization input")?;
    let mut out = x.clone();
    for j in 0..out.ncols() {
        let norm = out.column(j).norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
        out.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(out)
}

/// Projects columns to `target_dim` dimensions with a seeded Gaussian matrix
/// scaled by 1/sqrt(target_dim). With `identity_bypass` set and a target
/// equal to the input dimension, the data is returned unchanged.
pub fn random_projection(
    x: &DMatrix<f64>,
    target_dim: usize,
    seed: u64,
    identity_bypass: bool,
) -> Result<DMatrix<f64>> {
    linalg::check_finite(x, "projection input")?;
    if target_dim == 0 {
        return Err(Error::InvalidConfig("projection dimension must be positive".into()));
    }
    if identity_bypass && target_dim == x.nrows() {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut proj = DMatrix::zeros(target_dim, x.nrows());
    for r in 0..target_dim {
        for c in 0..x.nrows() {
            let g: f64 = rng.sample(StandardNormal);
            proj[(r, c)] = g * scale;
        }
    }
    Ok(proj * x)
}

/// Gaussian class clusters with means at scaled basis vectors, so every pair
/// of class means is the same distance apart. All points carry labels.
pub fn synthetic_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidConfig("blobs need at least two classes".into()));
    }
    if per_class == 0 {
        return Err(Error::InvalidConfig("blobs need at least one point per class".into()));
    }
    if dim < classes {
        return Err(Error::InvalidConfig(format!(
            "blobs need dim >= classes, got dim {dim} for {classes} classes"
        )));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "blob spread must be nonnegative and finite, got {spread}"
        )));
    }
    let n = classes * per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for class in 0..classes {
        for _ in 0..per_class {
            for r in 0..dim {
                let g: f64 = rng.sample(StandardNormal);
                let mean = if r == class { 1.0 } else { 0.0 };
                features[(r, col)] = mean + spread * g;
            }
            labels.push(Some(class + 1));
            col += 1;
        }
    }
    Dataset::new(features, labels, classes)
}

/// Two concentric circles in the plane with radii 1 and 2, one class each,
/// with Gaussian noise added after placing points at seeded uniform angles.
pub fn synthetic_circles(per_class: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if per_class < 10 {
        return Err(Error::InvalidConfig(format!(
            "circles need at least 10 points per class, got {per_class}"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "circle noise must be nonnegative and finite, got {noise}"
        )));
    }
    let n = 2 * per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(2, n);
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for (class, radius) in [(1usize, 1.0f64), (2, 2.0)] {
        for _ in 0..per_class {
            let angle = rng.gen::<f64>() * std::f64::consts::TAU;
            let gx: f64 = rng.sample(StandardNormal);
            let gy: f64 = rng.sample(StandardNormal);
            features[(0, col)] = radius * angle.cos() + noise * gx;
            features[(1, col)] = radius * angle.sin() + noise * gy;
            labels.push(Some(class));
            col += 1;
        }
    }
    Dataset::new(features, labels, 2)
}
