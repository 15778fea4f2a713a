//! Report types, serialized as pretty JSON so external tools can pick up
//! traces and accuracy tables without parsing log text.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ClassAccuracy {
    pub class: usize,
    pub evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub outer_iterations: usize,
    pub objective_trace: Vec<f64>,
    /// Accuracy of the transductive predictions on evaluable points, or
    /// null when the dataset offers nothing to score against.
    pub transductive_accuracy: Option<f64>,
    pub per_class_accuracy: Vec<ClassAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved_sigma: Option<f64>,
    /// The fully resolved run settings, as config-file text.
    pub config: String,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    /// confusion[t][p] counts samples of true class t+1 predicted as p+1.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize)]
pub struct AblateRow {
    pub pattern: String,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub transductive_accuracy: Option<f64>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct AblateReport {
    pub mode: String,
    pub seed: u64,
    pub rows: Vec<AblateRow>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
