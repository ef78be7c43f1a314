use serde::Serialize;

/// Outcome of one estimation run: point estimates plus convergence metadata.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// Model identifier ("static", "rank", "iv", "dyn").
    pub model: String,
    /// Parameter names, parallel to `estimates`.
    pub names: Vec<String>,
    /// Point estimates.
    pub estimates: Vec<f64>,
    /// Objective value at the reported optimum (θ-dependent terms only).
    pub objective: f64,
    pub converged: bool,
    /// Per-parameter flag: the estimate sits on a box bound.
    pub at_boundary: Vec<bool>,
    /// Plug-in asymptotic standard errors, when an information matrix exists.
    pub std_errors: Option<Vec<f64>>,
    pub iterations: usize,
}

impl EstimateReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimates[i])
    }
}
