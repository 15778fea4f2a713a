//! Run configuration.
//!
//! A run is described by a TOML file with one section per concern. Every key
//! is optional unless noted; missing keys fall back to the defaults of the
//! selected mode.
//!
//! ```toml
//! [run]
//! mode = "linear"            # or "kernel"
//! data = "train.txt"         # required
//! format = "auto"            # "auto" (by extension), "text", "binary"
//! out_model = "model.ssrm"
//! out_report = "report.json"
//!
//! [split]                    # optional; omit to use the file's labels as-is
//! labeled_per_class = 5      # required when the section is present
//! seed = 0
//! shuffle = true
//!
//! [hyper]
//! lambda = 1.2
//! alpha = 0.2
//! gamma = 0.06
//! beta1 = 1.0
//! beta2 = 1.0
//! beta3 = 0.1
//! dict_size = 40
//! outer_iters = 15
//! ridge_mu = 1.0
//! seed = 0
//! normalize = true
//! early_stop_tol = 1e-6
//!
//! [graph]
//! num_neighbors = 5
//! beta_w = 0.2
//! beta_b = 0.2
//! propagation_mixing = 0.5
//! delta = 1e-4
//!
//! [admm]
//! rho = 1.0
//! max_iters = 1
//! tol = 1e-6
//!
//! [kernel]                   # read only in kernel mode
//! kind = "gaussian"          # "gaussian", "linear", "precomputed"
//! sigma = 0.5                # omit for the median heuristic
//! matrix = "gram.txt"        # required for kind = "precomputed"
//! ```
//!
//! `hyper.lambda`, `hyper.alpha` and `hyper.gamma` default to 1.2 / 0.2 /
//! 0.06 in linear mode and 0.003 / 0.07 / 0.0003 in kernel mode; all other
//! defaults are mode-independent.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssrgr::config::{HyperParams, KernelConfig, KernelKind};
use ssrgr::data::{DataFormat, SplitSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Linear,
    Kernel,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, CliError> {
        match s {
            "linear" => Ok(Mode::Linear),
            "kernel" => Ok(Mode::Kernel),
            other => Err(CliError::usage(format!(
                "mode must be \"linear\" or \"kernel\", got \"{other}\""
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::Kernel => "kernel",
        }
    }
}

/// Kernel selection as the CLI sees it: either a kernel the library can
/// evaluate on feature vectors, or a precomputed Gram matrix loaded from a
/// square matrix file (dataset container without labels, n x n).
#[derive(Debug, Clone)]
pub enum KernelChoice {
    Builtin(KernelConfig),
    Precomputed(PathBuf),
}

/// A fully resolved run: every default applied, every override folded in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub data: PathBuf,
    pub format: Option<DataFormat>,
    pub out_model: PathBuf,
    pub out_report: PathBuf,
    pub split: Option<SplitSpec>,
    pub hyper: HyperParams,
    pub kernel: KernelChoice,
}

/// Command-line flags that take precedence over the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RawRun,
    split: Option<RawSplit>,
    #[serde(default)]
    hyper: RawHyper,
    #[serde(default)]
    graph: RawGraph,
    #[serde(default)]
    admm: RawAdmm,
    #[serde(default)]
    kernel: RawKernel,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<String>,
    data: Option<PathBuf>,
    format: Option<String>,
    out_model: Option<PathBuf>,
    out_report: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    labeled_per_class: usize,
    seed: Option<u64>,
    shuffle: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyper {
    lambda: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    beta3: Option<f64>,
    dict_size: Option<usize>,
    outer_iters: Option<usize>,
    ridge_mu: Option<f64>,
    seed: Option<u64>,
    normalize: Option<bool>,
    early_stop_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    num_neighbors: Option<usize>,
    beta_w: Option<f64>,
    beta_b: Option<f64>,
    propagation_mixing: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmm {
    rho: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    kind: Option<String>,
    sigma: Option<f64>,
    matrix: Option<PathBuf>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mode = match overrides.mode.as_deref().or(raw.run.mode.as_deref()) {
        Some(s) => Mode::parse(s)?,
        None => Mode::Linear,
    };
    let data = raw
        .run
        .data
        .ok_or_else(|| CliError::usage("config is missing run.data (path to the dataset)"))?;
    let format = match raw.run.format.as_deref() {
        None | Some("auto") => None,
        Some("text") => Some(DataFormat::Text),
        Some("binary") => Some(DataFormat::Binary),
        Some(other) => {
            return Err(CliError::usage(format!(
                "run.format must be \"auto\", \"text\" or \"binary\", got \"{other}\""
            )))
        }
    };

    let mut hyper = match mode {
        Mode::Linear => HyperParams::linear_defaults(),
        Mode::Kernel => HyperParams::kernel_defaults(),
    };
    let h = raw.hyper;
    if let Some(v) = h.lambda {
        hyper.lambda = v;
    }
    if let Some(v) = h.alpha {
        hyper.alpha = v;
    }
    if let Some(v) = h.gamma {
        hyper.gamma = v;
    }
    if let Some(v) = h.beta1 {
        hyper.beta1 = v;
    }
    if let Some(v) = h.beta2 {
        hyper.beta2 = v;
    }
    if let Some(v) = h.beta3 {
        hyper.beta3 = v;
    }
    if let Some(v) = h.dict_size {
        hyper.dict_size = v;
    }
    if let Some(v) = h.outer_iters {
        hyper.outer_iters = v;
    }
    if let Some(v) = h.ridge_mu {
        hyper.ridge_mu = v;
    }
    if let Some(v) = h.seed {
        hyper.seed = v;
    }
    if let Some(v) = h.normalize {
        hyper.normalize = v;
    }
    if let Some(v) = h.early_stop_tol {
        hyper.early_stop_tol = v;
    }
    let g = raw.graph;
    if let Some(v) = g.num_neighbors {
        hyper.graph.num_neighbors = v;
    }
    if let Some(v) = g.beta_w {
        hyper.graph.beta_w = v;
    }
    if let Some(v) = g.beta_b {
        hyper.graph.beta_b = v;
    }
    if let Some(v) = g.propagation_mixing {
        hyper.graph.propagation_mixing = v;
    }
    if let Some(v) = g.delta {
        hyper.graph.delta = v;
    }
    let a = raw.admm;
    if let Some(v) = a.rho {
        hyper.admm.rho = v;
    }
    if let Some(v) = a.max_iters {
        hyper.admm.max_iters = v;
    }
    if let Some(v) = a.tol {
        hyper.admm.tol = v;
    }
    if let Some(seed) = overrides.seed {
        hyper.seed = seed;
    }

    let kernel = match raw.kernel.kind.as_deref() {
        None | Some("gaussian") => {
            if raw.kernel.matrix.is_some() {
                return Err(CliError::usage(
                    "kernel.matrix is only meaningful with kernel.kind = \"precomputed\"",
                ));
            }
            KernelChoice::Builtin(KernelConfig {
                kind: KernelKind::Gaussian,
                sigma: raw.kernel.sigma,
            })
        }
        Some("linear") => {
            if raw.kernel.matrix.is_some() {
                return Err(CliError::usage(
                    "kernel.matrix is only meaningful with kernel.kind = \"precomputed\"",
                ));
            }
            KernelChoice::Builtin(KernelConfig {
                kind: KernelKind::Linear,
                sigma: raw.kernel.sigma,
            })
        }
        Some("precomputed") => {
            let matrix = raw.kernel.matrix.ok_or_else(|| {
                CliError::usage("kernel.kind = \"precomputed\" needs kernel.matrix (path)")
            })?;
            KernelChoice::Precomputed(matrix)
        }
        Some(other) => {
            return Err(CliError::usage(format!(
                "kernel.kind must be \"gaussian\", \"linear\" or \"precomputed\", got \"{other}\""
            )))
        }
    };

    let split = raw.split.map(|s| SplitSpec {
        labeled_per_class: s.labeled_per_class,
        seed: s.seed.unwrap_or(0),
        shuffle: s.shuffle.unwrap_or(true),
    });

    let out_model = overrides
        .out
        .clone()
        .or(raw.run.out_model)
        .unwrap_or_else(|| PathBuf::from("model.ssrm"));
    let out_report = raw
        .run
        .out_report
        .unwrap_or_else(|| PathBuf::from("report.json"));

    Ok(RunConfig {
        mode,
        data,
        format,
        out_model,
        out_report,
        split,
        hyper,
        kernel,
    })
}

#[derive(Serialize)]
struct EchoRun {
    mode: String,
    data: String,
    format: String,
    out_model: String,
    out_report: String,
}

#[derive(Serialize)]
struct EchoSplit {
    labeled_per_class: usize,
    seed: u64,
    shuffle: bool,
}

#[derive(Serialize)]
struct EchoHyper {
    lambda: f64,
    alpha: f64,
    gamma: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    dict_size: usize,
    outer_iters: usize,
    ridge_mu: f64,
    seed: u64,
    normalize: bool,
    early_stop_tol: f64,
}

#[derive(Serialize)]
struct EchoGraph {
    num_neighbors: usize,
    beta_w: f64,
    beta_b: f64,
    propagation_mixing: f64,
    delta: f64,
}

#[derive(Serialize)]
struct EchoAdmm {
    rho: f64,
    max_iters: usize,
    tol: f64,
}

#[derive(Serialize)]
struct EchoKernel {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<String>,
}

#[derive(Serialize)]
struct Echo {
    run: EchoRun,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<EchoSplit>,
    hyper: EchoHyper,
    graph: EchoGraph,
    admm: EchoAdmm,
    kernel: EchoKernel,
}

impl RunConfig {
    /// Renders the resolved run as config-file text, with every value
    /// explicit. Parsing the echo back yields the same run, which is how
    /// saved models carry their settings.
    pub fn echo(&self) -> String {
        let hp = &self.hyper;
        let (kernel_kind, kernel_sigma, kernel_matrix) = match &self.kernel {
            KernelChoice::Builtin(k) => (
                match k.kind {
                    KernelKind::Gaussian => "gaussian",
                    KernelKind::Linear => "linear",
                },
                k.sigma,
                None,
            ),
            KernelChoice::Precomputed(p) => ("precomputed", None, Some(p.display().to_string())),
        };
        let echo = Echo {
            run: EchoRun {
                mode: self.mode.as_str().to_string(),
                data: self.data.display().to_string(),
                format: match self.format {
                    None => "auto".to_string(),
                    Some(DataFormat::Text) => "text".to_string(),
                    Some(DataFormat::Binary) => "binary".to_string(),
                },
                out_model: self.out_model.display().to_string(),
                out_report: self.out_report.display().to_string(),
            },
            split: self.split.as_ref().map(|s| EchoSplit {
                labeled_per_class: s.labeled_per_class,
                seed: s.seed,
                shuffle: s.shuffle,
            }),
            hyper: EchoHyper {
                lambda: hp.lambda,
                alpha: hp.alpha,
                gamma: hp.gamma,
                beta1: hp.beta1,
                beta2: hp.beta2,
                beta3: hp.beta3,
                dict_size: hp.dict_size,
                outer_iters: hp.outer_iters,
                ridge_mu: hp.ridge_mu,
                seed: hp.seed,
                normalize: hp.normalize,
                early_stop_tol: hp.early_stop_tol,
            },
            graph: EchoGraph {
                num_neighbors: hp.graph.num_neighbors,
                beta_w: hp.graph.beta_w,
                beta_b: hp.graph.beta_b,
                propagation_mixing: hp.graph.propagation_mixing,
                delta: hp.graph.delta,
            },
            admm: EchoAdmm {
                rho: hp.admm.rho,
                max_iters: hp.admm.max_iters,
                tol: hp.admm.tol,
            },
            kernel: EchoKernel {
                kind: kernel_kind.to_string(),
                sigma: kernel_sigma,
                matrix: kernel_matrix,
            },
        };
        toml::to_string(&echo).expect("resolved config serializes")
    }

    /// Parses text produced by `echo`, typically read back from a model file.
    pub fn from_echo(text: &str) -> Result<RunConfig, CliError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| CliError::usage(format!("stored config: {e}")))?;
        resolve(raw, &Overrides::default())
    }
}
