//! Run reports written next to every recovered reward table.

use mirl_core::mirl::Recovery;
use mirl_core::solvers::qp::QpStatus;
use mirl_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mirl,
    Irl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mirl => "mirl",
            Method::Irl => "irl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub layout: String,
    pub n_unknowns: usize,
    pub n_constraints: usize,
    /// `optimal`, `inaccurate`, `infeasible`, `max_iter` or `error`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub kkt_residual: Option<f64>,
    pub max_violation: Option<f64>,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    pub ridge: Option<f64>,
    /// Smallest signed slack of the constraints at the recovered rewards.
    pub constraints_min_residual: Option<f64>,
    pub config_hash: String,
    /// Left out of pipeline outputs, which must not depend on timing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn status_name(status: QpStatus) -> &'static str {
    match status {
        QpStatus::Optimal => "optimal",
        QpStatus::Inaccurate => "inaccurate",
        QpStatus::Infeasible => "infeasible",
        QpStatus::MaxIter => "max_iter",
    }
}

impl RunReport {
    pub fn from_recovery(
        method: Method,
        rec: &Recovery,
        n_constraints: usize,
        config_hash: String,
        wall_time_s: Option<f64>,
    ) -> Self {
        let sol = &rec.solution;
        Self {
            method,
            layout: rec.rewards.layout().name().to_string(),
            n_unknowns: rec.rewards.len(),
            n_constraints,
            status: status_name(sol.status).to_string(),
            detail: None,
            kkt_residual: Some(sol.kkt_residual),
            max_violation: Some(sol.max_violation),
            iterations: Some(sol.iterations),
            objective: Some(sol.objective),
            ridge: Some(sol.ridge),
            constraints_min_residual: Some(rec.constraints_min_residual),
            config_hash,
            wall_time_s,
        }
    }

    /// Report for a recovery that produced no rewards.
    pub fn from_error(
        method: Method,
        layout: &str,
        n_unknowns: usize,
        err: &Error,
        config_hash: String,
        wall_time_s: Option<f64>,
    ) -> Self {
        let status = match err {
            Error::QpFailed { status, .. } => status,
            _ => "error",
        };
        Self {
            method,
            layout: layout.to_string(),
            n_unknowns,
            n_constraints: 0,
            status: status.to_string(),
            detail: Some(err.to_string()),
            kkt_residual: None,
            max_violation: None,
            iterations: None,
            objective: None,
            ridge: None,
            constraints_min_residual: None,
            config_hash,
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
