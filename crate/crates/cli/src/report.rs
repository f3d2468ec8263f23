//! Machine-readable JSON reports.

use nlks_core::continuation::Termination;
use nlks_core::diagnostics::{BranchDiagnostics, IdentityReport, SmallEpsReport};
use nlks_core::Branch;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckJson {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub pass: bool,
    pub vacuous: bool,
}

impl From<&IdentityReport<f64>> for CheckJson {
    fn from(r: &IdentityReport<f64>) -> Self {
        Self {
            name: r.name.clone(),
            lhs: r.lhs,
            rhs: r.rhs,
            rel_error: r.rel_error,
            pass: r.pass,
            vacuous: r.vacuous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallEpsJson {
    pub window: usize,
    pub eps_from: f64,
    pub eps_to: f64,
    pub seminorm_trend: &'static str,
    pub sup_trend: &'static str,
    pub consistent_with: &'static str,
}

impl From<&SmallEpsReport<f64>> for SmallEpsJson {
    fn from(r: &SmallEpsReport<f64>) -> Self {
        Self {
            window: r.window,
            eps_from: r.eps_range.0,
            eps_to: r.eps_range.1,
            seminorm_trend: r.seminorm_trend.as_str(),
            sup_trend: r.sup_trend.as_str(),
            consistent_with: r.consistent_with.as_str(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchJson {
    pub label: String,
    pub file: Option<String>,
    pub k: Option<usize>,
    pub termination: Option<&'static str>,
    pub points: usize,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub checks: Vec<CheckJson>,
    pub small_eps: Option<SmallEpsJson>,
    pub error: Option<String>,
    pub pass: bool,
}

impl BranchJson {
    pub fn from_diagnostics(label: String, file: Option<String>, branch: &Branch, d: &BranchDiagnostics<f64>) -> Self {
        let mut checks = vec![
            CheckJson::from(&d.energy_identity),
            CheckJson::from(&d.eps_window.window),
        ];
        if let Some(c) = &d.eps_window.coverage {
            checks.push(c.into());
        }
        checks.push((&d.apriori_hs).into());
        checks.push((&d.hs_window).into());
        Self {
            label,
            file,
            k: branch.seed.as_ref().map(|b| b.k),
            termination: Some(branch.termination.as_str()),
            points: branch.points.len(),
            eps_min: d.eps_window.min_eps,
            eps_max: d.eps_window.max_eps,
            checks,
            small_eps: d.small_eps.as_ref().map(Into::into),
            error: None,
            pass: d.pass(),
        }
    }

    pub fn failed(label: String, k: Option<usize>, termination: Option<Termination>, error: String) -> Self {
        Self {
            label,
            file: None,
            k,
            termination: termination.map(|t| t.as_str()),
            points: 0,
            eps_min: None,
            eps_max: None,
            checks: Vec::new(),
            small_eps: None,
            error: Some(error),
            pass: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub branches: Vec<BranchJson>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionJson {
    pub index: usize,
    pub eps: f64,
    pub file: Option<String>,
    pub samples: usize,
    pub final_time: Option<f64>,
    pub final_l2: Option<f64>,
    pub max_energy_balance_residual: Option<f64>,
    pub probe: Option<&'static str>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveReport {
    pub runs: Vec<EvolutionJson>,
    pub pass: bool,
}
