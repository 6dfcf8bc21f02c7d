//! Serializable run configuration and report schema.
//!
//! The JSON report has the stable top-level keys
//! {config, result, errors, history, timings, meta}; CSV output is one row
//! per iteration for single runs and one row per table entry for studies
//! and sweeps.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use gkb_core::problems::ErrorReport;
use gkb_core::{SolveReport, TerminationReason};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub nx: usize,
    pub ny: usize,
    pub equilibrate: String,
    pub gkb: GkbOptions,
    pub inner: InnerOptions,
    pub threads: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GkbOptions {
    pub nu: f64,
    pub tol: f64,
    pub delay: usize,
    pub maxit: usize,
    pub monitor: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InnerOptions {
    pub kind: String,
    pub tol: f64,
    pub maxit: usize,
    pub ssor_omega: f64,
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub experiment: &'static str,
    pub threads: usize,
    pub problem_kind: String,
}

#[derive(Debug, Serialize)]
pub struct ResultSummary {
    pub converged: bool,
    pub iterations: usize,
    pub termination_reason: TerminationReason,
    pub certified_step: Option<usize>,
    pub final_lower_bound: Option<f64>,
    pub inner_iterations_total: usize,
}

#[derive(Debug, Serialize)]
pub struct HistoryRow {
    pub step: usize,
    pub zeta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Serialize, Default)]
pub struct Timings {
    pub assembly_s: f64,
    pub setup_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub config: RunConfig,
    pub result: ResultSummary,
    pub errors: Option<ErrorReport>,
    pub history: Vec<HistoryRow>,
    pub timings: Timings,
    pub meta: Meta,
}

impl BenchReport {
    pub fn new(
        config: RunConfig,
        report: &SolveReport,
        errors: Option<ErrorReport>,
        timings: Timings,
        problem_kind: String,
        threads: usize,
    ) -> Self {
        let history = (0..report.iterations)
            .map(|k| HistoryRow {
                step: k + 1,
                zeta: report.zeta_history[k],
                alpha: report.alpha_history[k],
                beta: report.beta_history[k],
                inner_iterations: report.inner_iterations_per_step.get(k).copied().unwrap_or(0),
            })
            .collect();
        let result = ResultSummary {
            converged: report.converged,
            iterations: report.iterations,
            termination_reason: report.termination_reason,
            certified_step: report.certified_step,
            final_lower_bound: report.final_lower_bound(),
            inner_iterations_total: report.inner_iterations_per_step.iter().sum(),
        };
        Self {
            config,
            result,
            errors,
            history,
            timings,
            meta: Meta {
                schema_version: SCHEMA_VERSION,
                tool_version: env!("CARGO_PKG_VERSION"),
                experiment: "single-run",
                threads,
                problem_kind,
            },
        }
    }

    pub fn assert_finite(&self) {
        for row in &self.history {
            assert!(
                row.zeta.is_finite() && row.alpha.is_finite() && row.beta.is_finite(),
                "non-finite value in iteration history"
            );
        }
        if let Some(e) = &self.errors {
            assert!(e.err2_u.is_finite() && e.err2_p.is_finite() && e.errm_u.is_finite());
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,zeta,alpha,beta,inner_iterations\n");
        for row in &self.history {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{}\n",
                row.step, row.zeta, row.alpha, row.beta, row.inner_iterations
            ));
        }
        out
    }
}

/// Study and sweep reports share the envelope {config, rows, meta}.
#[derive(Debug, Serialize)]
pub struct TableReport<R: Serialize> {
    pub config: RunConfig,
    pub rows: Vec<R>,
    pub meta: Meta,
}

pub fn write_text(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trips_through_json() {
        let cfg = RunConfig {
            problem: "poiseuille".into(),
            nx: 64,
            ny: 32,
            equilibrate: "auto".into(),
            gkb: GkbOptions {
                nu: 10.0,
                tol: 1e-6,
                delay: 5,
                maxit: 1000,
                monitor: false,
            },
            inner: InnerOptions {
                kind: "cholesky".into(),
                tol: 1e-7,
                maxit: 100_000,
                ssor_omega: 1.0,
            },
            threads: 0,
            seed: 42,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
