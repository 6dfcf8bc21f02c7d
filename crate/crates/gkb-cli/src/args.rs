use clap::{Args, Parser, Subcommand, ValueEnum};

/// Saddle-point solver benchmarks via generalized Golub-Kahan
/// bidiagonalization.
#[derive(Parser, Debug)]
#[command(name = "gkb", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble (or load) one problem, solve it, and write a report.
    Run(RunArgs),
    /// Solve a mesh-refinement sequence and report errors with observed
    /// convergence orders.
    ConvergenceStudy(StudyArgs),
    /// One solve per augmentation parameter, mirroring the nu study tables.
    NuSweep(NuSweepArgs),
    /// Repeat one solve over worker-thread counts (shared-memory scaling).
    ScalingSweep(ScalingArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Built-in problem (poiseuille, stokes-q2p1) or the path of a
    /// MatrixMarket instance sidecar (instance.json)
    #[arg(long, default_value = "poiseuille")]
    pub problem: String,

    /// Cells in x (built-in problems)
    #[arg(long, default_value_t = 64)]
    pub nx: usize,

    /// Cells in y (built-in problems)
    #[arg(long, default_value_t = 32)]
    pub ny: usize,

    /// Block equilibration: auto follows the per-problem default
    #[arg(long, value_enum, default_value_t = EquilibrateOpt::Auto)]
    pub equilibrate: EquilibrateOpt,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Augmentation parameter nu (0 keeps the original (1,1)-block)
    #[arg(long = "gkb-nu")]
    pub gkb_nu: Option<f64>,

    /// Outer stopping tolerance tau
    #[arg(long = "gkb-tol", default_value_t = 1e-6)]
    pub gkb_tol: f64,

    /// Delay d of the lower-bound stopping rule
    #[arg(long = "gkb-delay", default_value_t = 5)]
    pub gkb_delay: usize,

    /// Outer iteration limit
    #[arg(long = "gkb-maxit", default_value_t = 1000)]
    pub gkb_maxit: usize,

    /// Print the lower bound estimate per iteration on standard error
    #[arg(long = "gkb-monitor", default_value_t = false)]
    pub gkb_monitor: bool,

    /// Inner solver for the SPD systems
    #[arg(long, value_enum, default_value_t = InnerOpt::Cholesky)]
    pub inner: InnerOpt,

    /// Inner relative tolerance tau_in (default: gkb-tol / 10)
    #[arg(long = "inner-tol")]
    pub inner_tol: Option<f64>,

    /// Inner iteration limit
    #[arg(long = "inner-maxit", default_value_t = 100_000)]
    pub inner_maxit: usize,

    /// Relaxation factor for cg-ssor
    #[arg(long = "ssor-omega", default_value_t = 1.0)]
    pub ssor_omega: f64,

    /// Worker threads (0 = all available cores)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,

    /// Seed echoed into reports for randomized diagnostics
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Report destination (stdout when omitted)
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,

    /// Report format
    #[arg(long, value_enum, default_value_t = FormatOpt::Json)]
    pub format: FormatOpt,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Export the assembled system (MatrixMarket + sidecar) before solving
    #[arg(long = "export-mm")]
    pub export_mm: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Mesh sizes as NXxNY, e.g. 32x16,64x32,128x64
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<String>,
}

#[derive(Args, Debug)]
pub struct NuSweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Augmentation parameters to sweep
    #[arg(long, value_delimiter = ',', required = true)]
    pub nus: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Ascending worker-thread counts, e.g. 1,2,4
    #[arg(long = "threads-list", value_delimiter = ',', required = true)]
    pub threads_list: Vec<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibrateOpt {
    Auto,
    On,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerOpt {
    Cholesky,
    CgJacobi,
    CgSsor,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatOpt {
    Json,
    Csv,
}
