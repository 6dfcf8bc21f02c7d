use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use gkb_core::problems::{
    self, assemble_poiseuille_with, assemble_stokes_q2p1_with, export_instance, load_instance,
    solve_instance, InstanceSolve, ProblemInstance,
};
use gkb_core::{CgConfig, GkbConfig, InnerSolverChoice, PrecondKind};

use crate::args::{
    EquilibrateOpt, FormatOpt, InnerOpt, NuSweepArgs, OutputArgs, ProblemArgs, RunArgs,
    ScalingArgs, SolverArgs, StudyArgs,
};
use crate::report::{
    BenchReport, Meta, RunConfig, TableReport, Timings, write_text, SCHEMA_VERSION,
};

/// Exit code for a solver that ran but did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 3;

pub fn build_instance(args: &ProblemArgs) -> Result<ProblemInstance> {
    let inst = match args.problem.as_str() {
        "poiseuille" => {
            let eq = !matches!(args.equilibrate, EquilibrateOpt::Off);
            assemble_poiseuille_with(args.nx, args.ny, eq)?
        }
        "stokes-q2p1" => {
            let eq = matches!(args.equilibrate, EquilibrateOpt::On);
            assemble_stokes_q2p1_with(args.nx, args.ny, eq)?
        }
        path => {
            if !std::path::Path::new(path).exists() {
                bail!(
                    "unknown problem '{path}': expected poiseuille, stokes-q2p1, \
                     or the path of an instance sidecar"
                );
            }
            load_instance(path).with_context(|| format!("loading instance from {path}"))?
        }
    };
    Ok(inst)
}

pub fn gkb_config(args: &SolverArgs, nu_default: f64) -> GkbConfig {
    GkbConfig {
        nu: args.gkb_nu.unwrap_or(nu_default),
        tol: args.gkb_tol,
        delay: args.gkb_delay,
        maxit: args.gkb_maxit,
        monitor: args.gkb_monitor,
        ..GkbConfig::default()
    }
}

pub fn inner_choice(args: &SolverArgs) -> InnerSolverChoice {
    let tol = args.inner_tol.unwrap_or(args.gkb_tol / 10.0);
    match args.inner {
        InnerOpt::Cholesky => InnerSolverChoice::Cholesky,
        InnerOpt::CgJacobi => InnerSolverChoice::Cg(CgConfig {
            tol,
            maxit: args.inner_maxit,
            preconditioner: PrecondKind::Jacobi,
        }),
        InnerOpt::CgSsor => InnerSolverChoice::Cg(CgConfig {
            tol,
            maxit: args.inner_maxit,
            preconditioner: PrecondKind::Ssor(args.ssor_omega),
        }),
    }
}

pub fn run_config(problem: &ProblemArgs, solver: &SolverArgs, nu: f64) -> RunConfig {
    RunConfig {
        problem: problem.problem.clone(),
        nx: problem.nx,
        ny: problem.ny,
        equilibrate: format!("{:?}", problem.equilibrate).to_lowercase(),
        gkb: crate::report::GkbOptions {
            nu,
            tol: solver.gkb_tol,
            delay: solver.gkb_delay,
            maxit: solver.gkb_maxit,
            monitor: solver.gkb_monitor,
        },
        inner: crate::report::InnerOptions {
            kind: match solver.inner {
                InnerOpt::Cholesky => "cholesky".into(),
                InnerOpt::CgJacobi => "cg-jacobi".into(),
                InnerOpt::CgSsor => "cg-ssor".into(),
            },
            tol: solver.inner_tol.unwrap_or(solver.gkb_tol / 10.0),
            maxit: solver.inner_maxit,
            ssor_omega: solver.ssor_omega,
        },
        threads: solver.threads,
        seed: solver.seed,
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

fn solve_timed(
    inst: &ProblemInstance,
    cfg: &GkbConfig,
    choice: InnerSolverChoice,
    threads: usize,
) -> Result<(InstanceSolve, f64)> {
    let started = Instant::now();
    let out = in_pool(threads, || solve_instance(inst, cfg, choice))?;
    Ok((out, started.elapsed().as_secs_f64()))
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let total = Instant::now();
    let assembly_started = Instant::now();
    let inst = build_instance(&args.problem)?;
    let assembly_s = assembly_started.elapsed().as_secs_f64();

    if let Some(dir) = &args.export_mm {
        export_instance(&inst, dir)
            .with_context(|| format!("exporting instance to {}", dir.display()))?;
    }

    let cfg = gkb_config(&args.solver, inst.nu_default);
    let choice = inner_choice(&args.solver);
    let (out, wall) = solve_timed(&inst, &cfg, choice, args.solver.threads)?;

    let config = run_config(&args.problem, &args.solver, cfg.nu);
    let timings = Timings {
        assembly_s,
        setup_s: out.setup_seconds,
        solve_s: out.report.solve_seconds,
        total_s: total.elapsed().as_secs_f64(),
    };
    let _ = wall;
    let converged = out.report.converged;
    let report = BenchReport::new(
        config,
        &out.report,
        out.errors,
        timings,
        format!("{:?}", inst.mesh.kind),
        args.solver.threads,
    );
    report.assert_finite();
    emit(&report, &args.output, |r| r.to_csv())?;
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Serialize)]
pub struct StudyRow {
    pub nx: usize,
    pub ny: usize,
    pub dof: usize,
    pub dof_m: usize,
    pub dof_a: usize,
    pub iterations: Option<usize>,
    pub err2_u: Option<f64>,
    pub err2_p: Option<f64>,
    pub errm_u: Option<f64>,
    /// log2(err(h) / err(h/2)) against the previous row
    pub observed_order_u: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

pub fn cmd_convergence_study(args: &StudyArgs) -> Result<i32> {
    let sizes = parse_sizes(&args.sizes)?;
    if sizes.is_empty() {
        bail!("convergence study needs at least one size");
    }
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut prev_err: Option<f64> = None;
    for (nx, ny) in sizes {
        let started = Instant::now();
        let mut problem = args.problem.clone();
        problem.nx = nx;
        problem.ny = ny;
        let row = match build_instance(&problem) {
            Ok(inst) => {
                let cfg = gkb_config(&args.solver, inst.nu_default);
                let choice = inner_choice(&args.solver);
                match solve_timed(&inst, &cfg, choice, args.solver.threads) {
                    Ok((out, _)) => {
                        let err = out.errors;
                        let order = match (prev_err, err.map(|e| e.err2_u)) {
                            (Some(p), Some(c)) if c > 0.0 => Some((p / c).log2()),
                            _ => None,
                        };
                        prev_err = err.map(|e| e.err2_u);
                        StudyRow {
                            nx,
                            ny,
                            dof: inst.dof_total(),
                            dof_m: inst.system.nrows_primal(),
                            dof_a: inst.system.ncols_constraint(),
                            iterations: Some(out.report.iterations),
                            err2_u: err.map(|e| e.err2_u),
                            err2_p: err.map(|e| e.err2_p),
                            errm_u: err.map(|e| e.errm_u),
                            observed_order_u: order,
                            seconds: started.elapsed().as_secs_f64(),
                            error: None,
                        }
                    }
                    Err(e) => failed_row(nx, ny, started.elapsed().as_secs_f64(), e.to_string()),
                }
            }
            Err(e) => failed_row(nx, ny, started.elapsed().as_secs_f64(), e.to_string()),
        };
        rows.push(row);
    }

    let config = run_config(&args.problem, &args.solver, args.solver.gkb_nu.unwrap_or(0.0));
    let table = TableReport {
        config,
        meta: meta_for(&args.problem, &args.solver, "convergence-study"),
        rows,
    };
    emit(&table, &args.output, study_csv)?;
    Ok(0)
}

fn failed_row(nx: usize, ny: usize, seconds: f64, error: String) -> StudyRow {
    StudyRow {
        nx,
        ny,
        dof: 0,
        dof_m: 0,
        dof_a: 0,
        iterations: None,
        err2_u: None,
        err2_p: None,
        errm_u: None,
        observed_order_u: None,
        seconds,
        error: Some(error),
    }
}

fn study_csv(table: &TableReport<StudyRow>) -> String {
    let mut out = String::from(
        "nx,ny,dof,dof_m,dof_a,iterations,err2_u,err2_p,errm_u,observed_order_u,seconds,error\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{}\n",
            r.nx,
            r.ny,
            r.dof,
            r.dof_m,
            r.dof_a,
            opt(r.iterations),
            opt_e(r.err2_u),
            opt_e(r.err2_p),
            opt_e(r.errm_u),
            opt_e(r.observed_order_u),
            r.seconds,
            r.error.clone().unwrap_or_default()
        ));
    }
    out
}

pub fn cmd_nu_sweep(args: &NuSweepArgs) -> Result<i32> {
    let inst = build_instance(&args.problem)?;
    let cfg = gkb_config(&args.solver, inst.nu_default);
    let choice = inner_choice(&args.solver);
    let rows = in_pool(args.solver.threads, || {
        problems::nu_sweep(&inst, &args.nus, &cfg, choice)
    });
    let config = run_config(&args.problem, &args.solver, cfg.nu);
    let table = TableReport {
        config,
        meta: meta_for(&args.problem, &args.solver, "nu-sweep"),
        rows,
    };
    emit(&table, &args.output, |t| {
        let mut out =
            String::from("nu,iterations,converged,err2_u,err2_p,errm_u,lower_bound,seconds,error\n");
        for r in &t.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{}\n",
                r.nu,
                opt(r.iterations),
                opt(r.converged),
                opt_e(r.errors.map(|e| e.err2_u)),
                opt_e(r.errors.map(|e| e.err2_p)),
                opt_e(r.errors.map(|e| e.errm_u)),
                opt_e(r.lower_bound),
                r.seconds,
                r.error_message.clone().unwrap_or_default()
            ));
        }
        out
    })?;
    Ok(0)
}

#[derive(Debug, Serialize)]
pub struct ScalingRow {
    pub threads: usize,
    pub iterations: Option<usize>,
    pub seconds: f64,
    pub speedup: f64,
    pub error: Option<String>,
}

pub fn cmd_scaling_sweep(args: &ScalingArgs) -> Result<i32> {
    if args.threads_list.is_empty() {
        bail!("scaling sweep needs at least one thread count");
    }
    if args.threads_list.windows(2).any(|w| w[0] > w[1]) || args.threads_list[0] == 0 {
        bail!("thread counts must be ascending and >= 1");
    }
    let inst = build_instance(&args.problem)?;
    let cfg = gkb_config(&args.solver, inst.nu_default);
    let choice = inner_choice(&args.solver);

    let mut rows: Vec<ScalingRow> = Vec::new();
    let mut base_time: Option<f64> = None;
    for &threads in &args.threads_list {
        match solve_timed(&inst, &cfg, choice, threads) {
            Ok((out, wall)) => {
                let base = *base_time.get_or_insert(wall);
                rows.push(ScalingRow {
                    threads,
                    iterations: Some(out.report.iterations),
                    seconds: wall,
                    speedup: base / wall,
                    error: None,
                });
            }
            Err(e) => rows.push(ScalingRow {
                threads,
                iterations: None,
                seconds: 0.0,
                speedup: 0.0,
                error: Some(e.to_string()),
            }),
        }
    }

    // determinism contract: iteration counts equal across thread counts
    let counts: Vec<_> = rows.iter().filter_map(|r| r.iterations).collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        bail!("iteration counts varied across thread counts: {counts:?}");
    }

    let config = run_config(&args.problem, &args.solver, cfg.nu);
    let table = TableReport {
        config,
        meta: meta_for(&args.problem, &args.solver, "thread-scaling-shared-memory"),
        rows,
    };
    emit(&table, &args.output, |t| {
        let mut out = String::from("threads,iterations,seconds,speedup,error\n");
        for r in &t.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.3},{}\n",
                r.threads,
                opt(r.iterations),
                r.seconds,
                r.speedup,
                r.error.clone().unwrap_or_default()
            ));
        }
        out
    })?;
    Ok(0)
}

fn meta_for(problem: &ProblemArgs, solver: &SolverArgs, experiment: &'static str) -> Meta {
    Meta {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment,
        threads: solver.threads,
        problem_kind: problem.problem.clone(),
    }
}

fn parse_sizes(sizes: &[String]) -> Result<Vec<(usize, usize)>> {
    sizes
        .iter()
        .map(|s| {
            let (nx, ny) = s
                .split_once(['x', 'X'])
                .with_context(|| format!("size '{s}' is not of the form NXxNY"))?;
            Ok((
                nx.trim().parse().with_context(|| format!("bad nx in '{s}'"))?,
                ny.trim().parse().with_context(|| format!("bad ny in '{s}'"))?,
            ))
        })
        .collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_e(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

fn emit<T: Serialize>(
    value: &T,
    output: &OutputArgs,
    to_csv: impl Fn(&T) -> String,
) -> Result<()> {
    let text = match output.format {
        FormatOpt::Json => serde_json::to_string_pretty(value)?,
        FormatOpt::Csv => to_csv(value),
    };
    write_text(&text, output.output.as_deref())
}
