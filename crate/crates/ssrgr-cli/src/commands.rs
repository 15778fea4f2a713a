//! The four batch commands. Each one is a plain function returning its
//! report, so the binary and the tests share the same entry points.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ssrgr::config::HyperParams;
use ssrgr::data::{self, DataFormat, Dataset};
use ssrgr::kernel::KernelGram;
use ssrgr::kssrgr as kssr;
use ssrgr::ssrgr as ssr;
use ssrgr::Error;

use crate::config::{KernelChoice, Mode, RunConfig};
use crate::model_io::{self, ModelPayload, SavedModel};
use crate::report::{AblateReport, AblateRow, ClassAccuracy, EvalReport, RunReport};
use crate::CliError;

fn load_run_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let format = cfg.format.unwrap_or_else(|| DataFormat::from_path(&cfg.data));
    Ok(data::load_dataset(&cfg.data, format)?)
}

fn known_indices(ds: &Dataset) -> Vec<usize> {
    (0..ds.n()).filter(|&i| ds.labels[i].is_some()).collect()
}

/// Applies the configured split, if any. Returns the training dataset and
/// the indices accuracy is measured on: the labels the split held out, or
/// every labeled point when nothing was held out.
fn apply_split(ds: &Dataset, cfg: &RunConfig) -> Result<(Dataset, Vec<usize>), CliError> {
    match &cfg.split {
        Some(spec) => {
            let (labeled, _) = data::split(ds, spec)?;
            let train = ds.with_labels_masked(&labeled)?;
            let held_out: Vec<usize> = (0..ds.n())
                .filter(|&i| ds.labels[i].is_some() && train.labels[i].is_none())
                .collect();
            let eval = if held_out.is_empty() {
                known_indices(ds)
            } else {
                held_out
            };
            Ok((train, eval))
        }
        None => Ok((ds.clone(), known_indices(ds))),
    }
}

fn accuracy_stats(
    pred: &[usize],
    truth: &[Option<usize>],
    indices: &[usize],
    class_count: usize,
) -> (Option<f64>, Vec<ClassAccuracy>) {
    if indices.is_empty() {
        return (None, Vec::new());
    }
    let mut evaluated = vec![0usize; class_count];
    let mut correct = vec![0usize; class_count];
    let mut total_correct = 0usize;
    for &i in indices {
        let t = truth[i].expect("evaluation index has a label");
        evaluated[t - 1] += 1;
        if pred[i] == t {
            correct[t - 1] += 1;
            total_correct += 1;
        }
    }
    let per_class = (0..class_count)
        .filter(|&c| evaluated[c] > 0)
        .map(|c| ClassAccuracy {
            class: c + 1,
            evaluated: evaluated[c],
            correct: correct[c],
            accuracy: correct[c] as f64 / evaluated[c] as f64,
        })
        .collect();
    (
        Some(total_correct as f64 / indices.len() as f64),
        per_class,
    )
}

struct Fitted {
    payload: ModelPayload,
    trace: Vec<f64>,
    x_train: DMatrix<f64>,
}

impl Fitted {
    fn labels_pred(&self) -> &DMatrix<f64> {
        match &self.payload {
            ModelPayload::Linear(m) => &m.labels_pred,
            ModelPayload::Kernel { model, .. } => &model.labels_pred,
        }
    }
}

fn stored_columns(features: &DMatrix<f64>, hp: &HyperParams) -> Result<DMatrix<f64>, CliError> {
    if hp.normalize {
        Ok(data::normalize_columns(features)?)
    } else {
        Ok(features.clone())
    }
}

fn fit_for(cfg: &RunConfig, train: &Dataset, hp: &HyperParams) -> Result<Fitted, CliError> {
    match cfg.mode {
        Mode::Linear => {
            let r = ssr::fit(&train.features, &train.labels, train.class_count, hp)?;
            Ok(Fitted {
                payload: ModelPayload::Linear(r.model),
                trace: r.objective_trace,
                x_train: stored_columns(&train.features, hp)?,
            })
        }
        Mode::Kernel => match &cfg.kernel {
            KernelChoice::Builtin(kcfg) => {
                let r = kssr::fit_kernel(&train.features, &train.labels, train.class_count, hp, kcfg)?;
                Ok(Fitted {
                    payload: ModelPayload::Kernel {
                        model: r.model,
                        resolved_sigma: r.resolved_sigma,
                    },
                    trace: r.objective_trace,
                    x_train: stored_columns(&train.features, hp)?,
                })
            }
            KernelChoice::Precomputed(path) => {
                let gram_ds = data::load_dataset(path, DataFormat::from_path(path))?;
                if gram_ds.dim() != gram_ds.n() {
                    return Err(CliError::Lib(Error::DimensionMismatch {
                        context: "precomputed kernel matrix".into(),
                        expected: "a square matrix".into(),
                        got: format!("{} x {}", gram_ds.dim(), gram_ds.n()),
                    }));
                }
                if gram_ds.n() != train.n() {
                    return Err(CliError::Lib(Error::DimensionMismatch {
                        context: "precomputed kernel matrix".into(),
                        expected: format!("{} columns to match the dataset", train.n()),
                        got: format!("{}", gram_ds.n()),
                    }));
                }
                let gram = KernelGram::from_matrix(gram_ds.features)?;
                let r = kssr::fit_kernel_gram(&gram, &train.labels, train.class_count, hp)?;
                Ok(Fitted {
                    payload: ModelPayload::Kernel {
                        model: r.model,
                        resolved_sigma: None,
                    },
                    trace: r.objective_trace,
                    // No feature vectors exist in this mode, so nothing is
                    // stored to code new points against.
                    x_train: DMatrix::zeros(0, 0),
                })
            }
        },
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let ds = load_run_dataset(cfg)?;
    let (train, eval_indices) = apply_split(&ds, cfg)?;
    let started = Instant::now();
    let fitted = fit_for(cfg, &train, &cfg.hyper)?;
    let wall_clock_seconds = started.elapsed().as_secs_f64();
    let pred = ssr::predict_transductive(fitted.labels_pred());
    let (transductive_accuracy, per_class_accuracy) =
        accuracy_stats(&pred, &ds.labels, &eval_indices, ds.class_count);
    let resolved_sigma = match &fitted.payload {
        ModelPayload::Kernel { resolved_sigma, .. } => *resolved_sigma,
        ModelPayload::Linear(_) => None,
    };
    let report = RunReport {
        mode: cfg.mode.as_str().to_string(),
        seed: cfg.hyper.seed,
        wall_clock_seconds,
        outer_iterations: fitted.trace.len(),
        objective_trace: fitted.trace.clone(),
        transductive_accuracy,
        per_class_accuracy,
        resolved_sigma,
        config: cfg.echo(),
    };
    let saved = SavedModel {
        payload: fitted.payload,
        x_train: fitted.x_train,
        config_echo: cfg.echo(),
    };
    model_io::save_model(&saved, &cfg.out_model)?;
    crate::write_atomic(&cfg.out_report, crate::report::to_json(&report).as_bytes())?;
    Ok(report)
}

/// Bit-exact match of a query against the stored training columns, after
/// the same normalization the fit applied. A hit means the query is a
/// training point, so its stored label column is authoritative.
fn lookup_training_column(
    saved: &SavedModel,
    run: &RunConfig,
    col: &DVector<f64>,
) -> Option<usize> {
    let x = &saved.x_train;
    if x.nrows() == 0 || x.ncols() == 0 {
        return None;
    }
    let target = if run.hyper.normalize {
        let single = DMatrix::from_column_slice(col.len(), 1, col.as_slice());
        match data::normalize_columns(&single) {
            Ok(m) => m.column(0).into_owned(),
            Err(_) => return None,
        }
    } else {
        col.clone()
    };
    (0..x.ncols()).find(|&t| {
        (0..x.nrows()).all(|i| x[(i, t)].to_bits() == target[i].to_bits())
    })
}

fn scores_for(
    saved: &SavedModel,
    run: &RunConfig,
    col: &DVector<f64>,
) -> Result<DVector<f64>, CliError> {
    if let Some(t) = lookup_training_column(saved, run, col) {
        return Ok(saved.labels_pred().column(t).into_owned());
    }
    match &saved.payload {
        ModelPayload::Linear(m) => Ok(ssr::inductive_scores(m, col, &run.hyper)?),
        ModelPayload::Kernel {
            model,
            resolved_sigma,
        } => {
            let (kind, cfg_sigma) = match &run.kernel {
                KernelChoice::Builtin(k) => (k.kind, k.sigma),
                KernelChoice::Precomputed(_) => {
                    return Err(CliError::Lib(Error::InvalidKernel(
                        "the model was trained on a precomputed kernel matrix and cannot \
                         code new feature vectors"
                            .into(),
                    )))
                }
            };
            let sigma = resolved_sigma.or(cfg_sigma).unwrap_or(0.0);
            Ok(kssr::inductive_scores_kernel(
                model,
                &saved.x_train,
                col,
                kind,
                sigma,
                &run.hyper,
            )?)
        }
    }
}

/// Classifies every column of a dataset file with a saved model, writing one
/// line per point: the class id followed by the per-class scores. A file
/// with no content yields an empty predictions file.
pub fn cmd_predict(model_path: &Path, data_path: &Path, out: &Path) -> Result<usize, CliError> {
    let meta = std::fs::metadata(data_path).map_err(Error::from)?;
    if meta.len() == 0 {
        crate::write_atomic(out, b"")?;
        return Ok(0);
    }
    let saved = model_io::load_model(model_path)?;
    let run = RunConfig::from_echo(&saved.config_echo)?;
    let ds = data::load_dataset(data_path, DataFormat::from_path(data_path))?;
    if matches!(&saved.payload, ModelPayload::Kernel { .. })
        && matches!(&run.kernel, KernelChoice::Precomputed(_))
    {
        return Err(CliError::Lib(Error::InvalidKernel(
            "the model was trained on a precomputed kernel matrix and cannot code new \
             feature vectors"
                .into(),
        )));
    }
    let dim = saved.x_train.nrows();
    if ds.dim() != dim {
        return Err(CliError::Lib(Error::DimensionMismatch {
            context: "prediction dataset".into(),
            expected: format!("{dim} features as in the model"),
            got: format!("{} features", ds.dim()),
        }));
    }
    let mut lines = String::new();
    for j in 0..ds.n() {
        let col = ds.features.column(j).into_owned();
        let scores = scores_for(&saved, &run, &col)?;
        let class = ssrgr::linalg::argmax(scores.iter().copied()).unwrap_or(0) + 1;
        lines.push_str(&class.to_string());
        for v in scores.iter() {
            lines.push(' ');
            lines.push_str(&format!("{v:?}"));
        }
        lines.push('\n');
    }
    crate::write_atomic(out, lines.as_bytes())?;
    Ok(ds.n())
}

/// Reads one class id per line: the first whitespace-separated token, so
/// predictions files (class followed by scores) work directly. Blank lines
/// and lines starting with '#' are skipped.
fn read_label_file(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let mut out = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok = line.split_whitespace().next().expect("non-empty line");
        let mk_err = |msg: String| {
            CliError::Lib(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg,
            })
        };
        let id: usize = tok
            .parse()
            .map_err(|_| mk_err(format!("expected a class id, got \"{tok}\"")))?;
        if id == 0 {
            return Err(mk_err("class ids start at 1".into()));
        }
        out.push(id);
    }
    Ok(out)
}

pub fn cmd_eval(pred_path: &Path, truth_path: &Path) -> Result<EvalReport, CliError> {
    let pred = read_label_file(pred_path)?;
    let truth = read_label_file(truth_path)?;
    if pred.len() != truth.len() {
        return Err(CliError::Lib(Error::DimensionMismatch {
            context: "evaluation inputs".into(),
            expected: format!("{} predictions to match the truth file", truth.len()),
            got: format!("{}", pred.len()),
        }));
    }
    let classes = pred.iter().chain(truth.iter()).copied().max().unwrap_or(0);
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        confusion[t - 1][p - 1] += 1;
    }
    let mut per_class = Vec::new();
    let mut total_correct = 0usize;
    for t in 0..classes {
        let evaluated: usize = confusion[t].iter().sum();
        let correct = confusion[t][t];
        total_correct += correct;
        if evaluated > 0 {
            per_class.push(ClassAccuracy {
                class: t + 1,
                evaluated,
                correct,
                accuracy: correct as f64 / evaluated as f64,
            });
        }
    }
    let accuracy = if pred.is_empty() {
        1.0
    } else {
        total_correct as f64 / pred.len() as f64
    };
    Ok(EvalReport {
        samples: pred.len(),
        accuracy,
        per_class,
        confusion,
    })
}

fn parse_patterns(s: &str) -> Result<Vec<(bool, bool, bool, String)>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let bits: Vec<char> = part.chars().collect();
        if bits.len() != 3 || bits.iter().any(|c| *c != '0' && *c != '1') {
            return Err(CliError::usage(format!(
                "pattern \"{part}\" must be three 0/1 digits selecting beta1, beta2, beta3"
            )));
        }
        out.push((bits[0] == '1', bits[1] == '1', bits[2] == '1', part.to_string()));
    }
    Ok(out)
}

/// Re-trains the configured run once per pattern, keeping the split fixed,
/// with each pattern zeroing the graph weights whose digit is 0.
pub fn cmd_ablate(cfg: &RunConfig, patterns: &str) -> Result<AblateReport, CliError> {
    let pats = parse_patterns(patterns)?;
    let ds = load_run_dataset(cfg)?;
    let (train, eval_indices) = apply_split(&ds, cfg)?;
    let mut rows = Vec::new();
    for (b1, b2, b3, pattern) in pats {
        let hp = HyperParams {
            beta1: if b1 { cfg.hyper.beta1 } else { 0.0 },
            beta2: if b2 { cfg.hyper.beta2 } else { 0.0 },
            beta3: if b3 { cfg.hyper.beta3 } else { 0.0 },
            ..cfg.hyper.clone()
        };
        let started = Instant::now();
        let fitted = fit_for(cfg, &train, &hp)?;
        let wall_clock_seconds = started.elapsed().as_secs_f64();
        let pred = ssr::predict_transductive(fitted.labels_pred());
        let (transductive_accuracy, _) =
            accuracy_stats(&pred, &ds.labels, &eval_indices, ds.class_count);
        rows.push(AblateRow {
            pattern,
            beta1: hp.beta1,
            beta2: hp.beta2,
            beta3: hp.beta3,
            transductive_accuracy,
            wall_clock_seconds,
        });
    }
    Ok(AblateReport {
        mode: cfg.mode.as_str().to_string(),
        seed: cfg.hyper.seed,
        rows,
    })
}
