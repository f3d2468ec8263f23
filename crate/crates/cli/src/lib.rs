//! Library side of the `nlks` binary, kept separate so the commands can be
//! driven from tests.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use nlks_core::bifurcation::{seed_from_bifurcation, BifurcationPoint};
use nlks_core::continuation::{trace_branch, BranchSeed, KsProblem, Termination};
use nlks_core::diagnostics::diagnose_branch;
use nlks_core::evolution::{energy_balance_residual, evolve as integrate, stability_probe, StabilityVerdict};
use nlks_core::io::{emit_diagram, read_branch, write_branch, write_profile};
use nlks_core::steady::newton_solve;
use nlks_core::{Branch, BranchPoint, Field, Params};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::{BranchJson, EvolutionJson, EvolveReport, RunReport};

pub const OUTPUT_DIR_ENV: &str = "NLKS_OUTPUT_DIR";

/// Points per profile file.
const PROFILE_POINTS: usize = 512;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unreadable input; exit code 1.
    Config(String),
    /// A diagnostic or computation failed; exit code 2.
    Diagnostic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Diagnostic(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Diagnostic(m) => write!(f, "diagnostic failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Diagnostic(format!("{}: {e}", path.display()))
}

fn write_json<S: serde::Serialize>(value: &S, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

/// Outcome of a command that produced a report.
#[derive(Debug)]
pub struct Outcome<R> {
    pub report: R,
    pub report_path: Option<PathBuf>,
    pub pass: bool,
}

impl<R> Outcome<R> {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

fn trivial_branch(cfg: &RunConfig) -> Branch {
    let problem = KsProblem::new(cfg.r, cfg.s, cfg.modes).expect("validated exponents");
    let lo = cfg.continuation.eps_floor.max(1e-3);
    let hi = 1.1f64.max(lo);
    let n = 56;
    let points = (0..n)
        .map(|i| {
            let eps = hi - (hi - lo) * i as f64 / (n - 1) as f64;
            BranchPoint::measure(&problem, eps, Field::zeros(cfg.modes), hi - eps)
        })
        .collect();
    Branch { r: cfg.r, s: cfg.s, seed: None, points, termination: Termination::LeftDomain }
}

fn trace_one(cfg: &RunConfig, k: usize, t0: f64) -> nlks_core::Result<Branch> {
    let bp = BifurcationPoint::new(k, cfg.r, cfg.s)?;
    let seed = seed_from_bifurcation(&bp, t0, cfg.modes);
    let cont = cfg.continuation_config();
    let p = Params::new(cfg.r, cfg.s, seed.eps)?;
    let out = newton_solve(&p, &seed.u, &cont.newton)?;
    trace_branch(cfg.r, cfg.s, &BranchSeed { u: out.u, ..seed }, Some(bp), &cont)
}

fn profile_indices(n: usize, count: usize) -> Vec<usize> {
    match (n, count) {
        (0, _) | (_, 0) => Vec::new(),
        (_, 1) => vec![n - 1],
        _ => {
            let mut v: Vec<usize> = (0..count).map(|j| j * (n - 1) / (count - 1)).collect();
            v.dedup();
            v
        }
    }
}

/// `run <config>`: trace every configured half-branch, write branch,
/// profile and diagram files, then run the diagnostics.
pub fn run(config_path: &Path, output_override: Option<&Path>) -> Result<Outcome<RunReport>, CliError> {
    let cfg = RunConfig::load(config_path).map_err(|e| CliError::Config(e.0))?;
    let out_dir = cfg.resolved_output_dir(output_override);
    fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;

    let tasks: Vec<(usize, f64)> = cfg
        .branches
        .iter()
        .flat_map(|b| b.direction.signs().iter().map(move |sg| (b.k, sg * b.t0.abs())))
        .collect();
    let traced: Vec<_> = tasks.par_iter().map(|&(k, t0)| trace_one(&cfg, k, t0)).collect();

    let mut reports = Vec::new();
    let mut diagram = vec![trivial_branch(&cfg)];
    write_branch(&diagram[0], &out_dir.join("branch_trivial.csv")).map_err(|e| io_failure(&out_dir, e))?;
    for (&(k, t0), result) in tasks.iter().zip(traced) {
        let tag = format!("k{k}_{}", if t0 > 0.0 { "pos" } else { "neg" });
        let label = format!("C{k}{}", if t0 > 0.0 { "+" } else { "-" });
        let branch = match result {
            Ok(b) => b,
            Err(e) => {
                reports.push(BranchJson::failed(label, Some(k), None, e.to_string()));
                continue;
            }
        };
        let file = out_dir.join(format!("branch_{tag}.csv"));
        write_branch(&branch, &file).map_err(|e| io_failure(&file, e))?;
        for (j, idx) in profile_indices(branch.points.len(), cfg.profiles_per_branch).into_iter().enumerate() {
            let path = out_dir.join(format!("profile_{tag}_{j}.csv"));
            write_profile(&branch.points[idx].u, PROFILE_POINTS, &path).map_err(|e| io_failure(&path, e))?;
        }
        let json = match diagnose_branch(&branch) {
            Ok(d) => BranchJson::from_diagnostics(label, Some(file.display().to_string()), &branch, &d),
            Err(e) => BranchJson::failed(label, Some(k), Some(branch.termination), e.to_string()),
        };
        reports.push(json);
        diagram.push(branch);
    }
    emit_diagram(&diagram, &out_dir.join("diagram")).map_err(|e| io_failure(&out_dir, e))?;

    let pass = reports.iter().all(|r| r.pass);
    let report = RunReport { r: Some(cfg.r), s: Some(cfg.s), branches: reports, pass };
    let report_path = out_dir.join("report.json");
    write_json(&report, &report_path)?;
    Ok(Outcome { report, report_path: Some(report_path), pass })
}

fn load_branches(files: &[PathBuf]) -> Result<Vec<Branch>, CliError> {
    if files.is_empty() {
        return Err(CliError::Config("no branch files given".into()));
    }
    files
        .iter()
        .map(|f| read_branch(f).map_err(|e| CliError::Config(format!("{}: {e}", f.display()))))
        .collect()
}

/// `diagnose <branch-file...>`: rerun the diagnostics on stored branches.
pub fn diagnose(files: &[PathBuf], output_override: Option<&Path>) -> Result<Outcome<RunReport>, CliError> {
    let branches = load_branches(files)?;
    let mut reports = Vec::new();
    for (file, branch) in files.iter().zip(&branches) {
        let label = file.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let json = match diagnose_branch(branch) {
            Ok(d) => BranchJson::from_diagnostics(label, Some(file.display().to_string()), branch, &d),
            Err(e) => BranchJson::failed(label, branch.seed.as_ref().map(|b| b.k), Some(branch.termination), e.to_string()),
        };
        reports.push(json);
    }
    let pass = reports.iter().all(|r| r.pass);
    let report = RunReport { r: None, s: None, branches: reports, pass };
    let report_path = match output_override {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let p = dir.join("diagnose_report.json");
            write_json(&report, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok(Outcome { report, report_path, pass })
}

/// `diagram <branch-file...> --out <path>`.
pub fn diagram(files: &[PathBuf], out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let branches = load_branches(files)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    emit_diagram(&branches, out).map_err(|e| io_failure(out, e))
}

/// `evolve <config>`: run every `[[evolution]]` entry of the config.
pub fn evolve(config_path: &Path, output_override: Option<&Path>) -> Result<Outcome<EvolveReport>, CliError> {
    let cfg = RunConfig::load(config_path).map_err(|e| CliError::Config(e.0))?;
    if cfg.evolution.is_empty() {
        return Err(CliError::Config("evolution: no runs configured".into()));
    }
    let out_dir = cfg.resolved_output_dir(output_override);
    fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;

    let mut runs = Vec::new();
    for (i, entry) in cfg.evolution.iter().enumerate() {
        let p = Params::new(cfg.r, cfg.s, entry.eps).map_err(|e| CliError::Config(format!("evolution[{i}].eps: {e}")))?;
        let u0 = Field::new(entry.initial.clone())
            .map(|f| f.resized(cfg.modes))
            .unwrap_or_else(|_| Field::zeros(cfg.modes));
        let mut json = EvolutionJson {
            index: i,
            eps: entry.eps,
            file: None,
            samples: 0,
            final_time: None,
            final_l2: None,
            max_energy_balance_residual: None,
            probe: None,
            error: None,
        };
        match integrate(&p, &u0, entry.t_end, entry.dt, entry.sample_every) {
            Ok(traj) => {
                let residual = energy_balance_residual(&traj);
                let path = out_dir.join(format!("trajectory_{i}.csv"));
                let mut text = String::from("t,l2_sq,hr_sq,hs_sq,energy_balance\n");
                for (j, (t, e)) in traj.times.iter().zip(&traj.energies).enumerate() {
                    let bal = if j == 0 { None } else { residual.get(j - 1) };
                    let bal = bal.map_or_else(String::new, |b| b.to_string());
                    text.push_str(&format!("{t},{},{},{},{bal}\n", e.0, e.1, e.2));
                }
                fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
                let final_path = out_dir.join(format!("trajectory_{i}_final.csv"));
                write_profile(traj.final_state(), PROFILE_POINTS, &final_path).map_err(|e| io_failure(&final_path, e))?;
                json.file = Some(path.display().to_string());
                json.samples = traj.times.len();
                json.final_time = traj.times.last().copied();
                json.final_l2 = Some(traj.final_state().l2_norm());
                json.max_energy_balance_residual = residual.iter().copied().reduce(f64::max);
            }
            Err(e) => json.error = Some(e.to_string()),
        }
        if let Some(amp) = entry.probe_amplitude {
            match stability_probe(&p, &Field::zeros(cfg.modes), amp, entry.t_end, entry.dt, cfg.seed) {
                Ok(v) => {
                    json.probe = Some(match v {
                        StabilityVerdict::Returns => "returns",
                        StabilityVerdict::Departs => "departs",
                        StabilityVerdict::Inconclusive => "inconclusive",
                    })
                }
                Err(e) => json.error = Some(e.to_string()),
            }
        }
        runs.push(json);
    }
    let pass = runs.iter().all(|r| r.error.is_none());
    let report = EvolveReport { runs, pass };
    let report_path = out_dir.join("evolve_report.json");
    write_json(&report, &report_path)?;
    Ok(Outcome { report, report_path: Some(report_path), pass })
}
