use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use aoi_core::artifact::{Artifact, FullArtifact, ReducedArtifact};
use aoi_core::experiments::{
    beta_sweep, improvements, write_improvements_csv, write_sweep_outputs, ExperimentSpec,
};
use aoi_core::sim::{
    myopic_policy, policy_from_table, reduced_policy_adapter, simulate, write_metrics_csv,
    MetricsRow, NeverTransmit, Policy, SimOptions,
};
use aoi_core::solver::bellman_backup;
use aoi_core::special_case::{
    build_reduced_model, extract_psi, solve_reduced, write_decision_grid_csv,
};
use aoi_core::structure::{
    check_threshold_structure, check_value_monotonicity, extract_thresholds,
    write_policy_slice_csv, SliceAxis, DEFAULT_SLACK,
};
use aoi_core::{relative_value_iteration, Error, Kernel, SolveOptions, SystemConfig};

#[derive(Parser)]
#[command(
    name = "aoi",
    version,
    about = "Optimal AoI/energy scheduling of correlated IoT devices"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Step size of the damped update; 1 is plain relative value iteration.
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions<f64> {
        SolveOptions::default()
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_damping(self.damping)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full MDP and write an artifact.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Check the threshold structure of a solved artifact.
    VerifyStructure {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        /// Free slice axis: `a<n>` (type-I age) or `h<n>` (channel index).
        #[arg(long, requires = "slice_out")]
        slice: Option<String>,
        /// Index of the state the slice passes through.
        #[arg(long, default_value_t = 0)]
        base_state: usize,
        #[arg(long)]
        slice_out: Option<PathBuf>,
        /// Decision grid of a reduced artifact.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Solve the reduced MDP of an all-type-II system and write an artifact.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Simulate a policy on the artifact's system.
    Simulate {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyKind::Optimal)]
        policy: PolicyKind,
        #[arg(long, default_value_t = 50_000)]
        slots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
    },
    /// Weighting-factor sweep of optimal against myopic scheduling.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Optimal,
    Myopic,
    Never,
}

impl PolicyKind {
    fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Myopic => "myopic",
            PolicyKind::Never => "never",
        }
    }
}

/// Raised when a structure check finds violations.
#[derive(Debug)]
struct StructureViolation(usize);

impl std::fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} structure violations", self.0)
    }
}

impl std::error::Error for StructureViolation {}

/// One or more sweep points failed to converge.
#[derive(Debug)]
struct PartialSweep(usize);

impl std::fmt::Display for PartialSweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} sweep points failed; see failures.csv", self.0)
    }
}

impl std::error::Error for PartialSweep {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<StructureViolation>().is_some() {
        return 4;
    }
    if err.downcast_ref::<PartialSweep>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NonConvergence { .. }) => 3,
        Some(Error::Io(_)) | Some(Error::Csv(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn read_to_string(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn solve_summary(
    out: &mut impl Write,
    kind: &str,
    states: usize,
    iterations: usize,
    final_span: f64,
    theta: f64,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "states", "iterations", "final_span", "theta"])?;
    w.write_record([
        kind.to_string(),
        states.to_string(),
        iterations.to_string(),
        final_span.to_string(),
        theta.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn parse_axis(s: &str) -> anyhow::Result<SliceAxis> {
    let (head, rest) = s.split_at(s.len().min(1));
    match (head, rest.parse::<usize>()) {
        ("a", Ok(n)) => Ok(SliceAxis::DeviceAge(n)),
        ("h", Ok(n)) => Ok(SliceAxis::Channel(n)),
        _ => bail!(Error::Validation {
            path: "slice".into(),
            message: format!("expected a<n> or h<n>, got `{s}`"),
        }),
    }
}

fn run(cli: Cli, out: &mut impl Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            config,
            out: path,
            solver,
        } => {
            let cfg = SystemConfig::<f64>::from_json_str(&read_to_string(&config)?)?;
            let opts = solver.options();
            let kernel = Kernel::new(&cfg)?;
            let sol = relative_value_iteration(&kernel, &opts)?;
            log::info!(
                "solved {} states in {} iterations ({:?})",
                kernel.space().len(),
                sol.report.iterations,
                sol.report.wall_time
            );
            Artifact::Full(FullArtifact::new(&cfg, &opts, &sol)?).write(&path)?;
            solve_summary(
                out,
                "full",
                kernel.space().len(),
                sol.report.iterations,
                sol.report.final_span,
                sol.value.theta,
            )
        }
        Command::Reduce {
            config,
            out: path,
            solver,
        } => {
            let cfg = SystemConfig::<f64>::from_json_str(&read_to_string(&config)?)?;
            let opts = solver.options();
            let model = build_reduced_model(&cfg)?;
            let sol = solve_reduced(&model, &opts)?;
            Artifact::Reduced(ReducedArtifact::new(&cfg, &opts, &model, &sol)?).write(&path)?;
            solve_summary(
                out,
                "reduced",
                model.len(),
                sol.report.iterations,
                sol.report.final_span,
                sol.value.theta,
            )
        }
        Command::VerifyStructure {
            artifact,
            slack,
            slice,
            base_state,
            slice_out,
            grid_out,
        } => match Artifact::read(&artifact)? {
            Artifact::Full(full) => {
                let kernel = full.kernel()?;
                let space = kernel.space();
                let policy = full.policy_table();
                let backup = bellman_backup(&kernel, &full.values);
                let thresholds = extract_thresholds(space, &backup.q);
                let mut report = check_threshold_structure(space, &policy, &thresholds, slack);
                report.value_monotonicity_violations =
                    check_value_monotonicity(space, &full.values, slack);
                if let (Some(axis), Some(path)) = (slice, slice_out) {
                    if base_state >= space.len() {
                        bail!(Error::Validation {
                            path: "base_state".into(),
                            message: format!("state {base_state} out of range"),
                        });
                    }
                    let file = fs::File::create(&path)
                        .with_context(|| format!("writing {}", path.display()))?;
                    write_policy_slice_csv(
                        file,
                        space,
                        kernel.actions(),
                        &policy,
                        &space.state(base_state),
                        parse_axis(&axis)?,
                    )?;
                }
                report.write_summary_csv(&mut *out)?;
                let total = report.value_monotonicity_violations.len()
                    + report.upward_closure_violations.len()
                    + report.channel_monotonicity_violations.len()
                    + report.threshold_consistency_violations.len();
                if total > 0 {
                    bail!(StructureViolation(total));
                }
                Ok(())
            }
            Artifact::Reduced(reduced) => {
                let model = reduced.model()?;
                let sol = reduced.solution();
                let report = extract_psi(&model, &sol, slack);
                if let Some(path) = grid_out {
                    let file = fs::File::create(&path)
                        .with_context(|| format!("writing {}", path.display()))?;
                    write_decision_grid_csv(file, &model, &sol)?;
                }
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(["ch_index", "c_h", "psi"])?;
                for (c, (psi, value)) in report.psi.iter().zip(model.ch_values()).enumerate() {
                    w.write_record([
                        c.to_string(),
                        value.to_string(),
                        psi.map_or("inf".to_string(), |p| p.to_string()),
                    ])?;
                }
                w.flush()?;
                let total = report.closure_violations.len() + report.monotonicity_violations.len();
                if total > 0 {
                    bail!(StructureViolation(total));
                }
                Ok(())
            }
        },
        Command::Simulate {
            artifact,
            policy,
            slots,
            seed,
            burn_in,
        } => {
            let artifact = Artifact::read(&artifact)?;
            let cfg = match &artifact {
                Artifact::Full(a) => a.config()?,
                Artifact::Reduced(a) => a.config()?,
            };
            let mut chosen: Box<dyn Policy> = match (policy, &artifact) {
                (PolicyKind::Optimal, Artifact::Full(a)) => {
                    a.kernel()?;
                    Box::new(policy_from_table(&cfg, a.policy_table())?)
                }
                (PolicyKind::Optimal, Artifact::Reduced(a)) => {
                    Box::new(reduced_policy_adapter(&cfg, &a.model()?, &a.solution())?)
                }
                (PolicyKind::Myopic, _) => Box::new(myopic_policy(&cfg)),
                (PolicyKind::Never, _) => Box::new(NeverTransmit),
            };
            let opts = SimOptions::new(slots, seed).with_burn_in(burn_in);
            let metrics = simulate(&cfg, &mut *chosen, opts)?;
            let row = MetricsRow {
                policy: policy.name().to_string(),
                beta: cfg.uniform_weight(),
                metrics,
            };
            write_metrics_csv(&mut *out, &[row])?;
            Ok(())
        }
        Command::Sweep { spec, out: dir } => {
            let spec = ExperimentSpec::from_json_str(&read_to_string(&spec)?)?;
            let outcome = beta_sweep(&spec)?;
            write_sweep_outputs(&dir, &spec, &outcome)?;
            write_improvements_csv(&mut *out, &improvements(&outcome.rows))?;
            if !outcome.failures.is_empty() {
                bail!(PartialSweep(outcome.failures.len()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
