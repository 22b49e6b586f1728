//! Command line front end. Kept as a library module so tests can drive the
//! exact code path the binary runs, byte for byte.

use crate::bench::{run_experiment, write_csv, BenchError, ExperimentSpec};
use crate::gpa::{learn_gpa, load_gpa, save_gpa, solve_with_gpa, GpaError};
use crate::heuristics::HeuristicKind;
use crate::ppddl::ground::{ground, GroundError, GroundSsp};
use crate::ppddl::{parse_domain, parse_problem, ParseError};
use crate::solvers::{solve, SolveError, SolveResult, SolverConfig, SolverId};
use crate::ssp::{
    evaluate_policy, load_policy, save_policy, Policy, PolicyError, PolicyHeader, POLICY_FORMAT,
    POLICY_VERSION,
};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Gpa(#[from] GpaError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "gpa-plan", version, about = "Probabilistic planning with generalized policy automata")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve one instance and optionally write the policy to a file.
    Plan(PlanArgs),
    /// Learn an automaton from previously written policy files.
    LearnGpa(LearnGpaArgs),
    /// Solve one instance with a learned automaton in the loop.
    AccelPlan(AccelPlanArgs),
    /// Run a train/test experiment described by a TOML file.
    Bench(BenchArgs),
    /// Simulate a stored policy and report cost statistics.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// vi, lao, lrtdp, or soft-flares
    #[arg(long, default_value = "lrtdp")]
    solver: String,
    /// ff, hadd, or zero
    #[arg(long, default_value = "ff")]
    heuristic: String,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-solve wall clock budget in seconds
    #[arg(long)]
    timeout_s: Option<f64>,
}

impl SolveArgs {
    fn solver(&self) -> Result<SolverId, CliError> {
        SolverId::from_str(&self.solver).map_err(CliError::Usage)
    }

    fn config(&self) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig {
            epsilon: self.epsilon,
            seed: self.seed,
            heuristic: HeuristicKind::from_str(&self.heuristic).map_err(CliError::Usage)?,
            ..SolverConfig::default()
        };
        cfg.time_limit = self.timeout_s.map(std::time::Duration::from_secs_f64);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[command(flatten)]
    solve: SolveArgs,
    domain: PathBuf,
    problem: PathBuf,
    /// Write the policy here
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnGpaArgs {
    /// Policy files produced by `plan -o`
    #[arg(long, required = true, num_args = 1..)]
    policies: Vec<PathBuf>,
    /// Write the automaton here
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct AccelPlanArgs {
    /// Automaton file produced by `learn-gpa`
    #[arg(long)]
    gpa: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
    domain: PathBuf,
    problem: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment description (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Write the results CSV here (falls back to the spec's output field)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Policy file produced by `plan -o`
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 100)]
    horizon: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Problem file the policy was computed for
    problem: PathBuf,
}

fn load_instance(domain: &Path, problem: &Path) -> Result<GroundSsp, CliError> {
    let dom = parse_domain(&std::fs::read_to_string(domain)?)?;
    let prob = parse_problem(&std::fs::read_to_string(problem)?, &dom)?;
    Ok(ground(&dom, &prob)?)
}

/// Resolve a path stored inside a policy file: as given if it exists, then
/// relative to the policy file's own directory.
fn resolve_stored(policy_path: &Path, stored: &str) -> PathBuf {
    let direct = PathBuf::from(stored);
    if direct.exists() {
        return direct;
    }
    match policy_path.parent() {
        Some(dir) => dir.join(stored),
        None => direct,
    }
}

fn report(out: &mut impl std::io::Write, r: &SolveResult, label: &str) -> std::io::Result<()> {
    writeln!(
        out,
        "{label}: V(s0) = {:.6}, converged = {}, backups = {}, states = {}, time = {:.3}s",
        r.v_s0,
        r.converged,
        r.stats.backups,
        r.stats.states_expanded,
        r.stats.wall_time.as_secs_f64()
    )
}

fn write_policy_file(
    path: &Path,
    ssp: &GroundSsp,
    result: &SolveResult,
    solve_args: &SolveArgs,
    domain: &Path,
    problem: &Path,
) -> Result<(), CliError> {
    let header = PolicyHeader {
        format: POLICY_FORMAT.to_string(),
        version: POLICY_VERSION,
        problem: ssp.problem_name().to_string(),
        domain_file: domain.display().to_string(),
        problem_file: problem.display().to_string(),
        solver: solve_args.solver.clone(),
        heuristic: solve_args.heuristic.clone(),
        seed: solve_args.seed,
        epsilon: solve_args.epsilon,
        converged: result.converged,
        v_s0: result.v_s0,
    };
    save_policy(path, ssp, &result.policy, &header)?;
    Ok(())
}

pub fn run<I, T>(argv: I, out: &mut impl std::io::Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.cmd {
        Cmd::Plan(args) => {
            let ssp = load_instance(&args.domain, &args.problem)?;
            let result = solve(&ssp, args.solve.solver()?, &args.solve.config()?)?;
            report(out, &result, "plan")?;
            if let Some(path) = &args.output {
                write_policy_file(path, &ssp, &result, &args.solve, &args.domain, &args.problem)?;
                writeln!(out, "policy written to {}", path.display())?;
            }
            Ok(())
        }
        Cmd::LearnGpa(args) => {
            let mut solved: Vec<(GroundSsp, Policy)> = Vec::with_capacity(args.policies.len());
            for path in &args.policies {
                let header = peek_header(path)?;
                let domain = resolve_stored(path, &header.domain_file);
                let problem = resolve_stored(path, &header.problem_file);
                let ssp = load_instance(&domain, &problem)?;
                let (_, policy) = load_policy(path, &ssp)?;
                solved.push((ssp, policy));
            }
            let pairs: Vec<(&GroundSsp, &Policy)> = solved.iter().map(|(s, p)| (s, p)).collect();
            let gpa = learn_gpa(&pairs)?;
            let dom = solved
                .first()
                .map(|(s, _)| s.domain())
                .ok_or_else(|| CliError::Usage("no policies given".into()))?;
            save_gpa(&args.output, &gpa, dom)?;
            writeln!(
                out,
                "learned automaton with {} states and {} edges from {} policies, written to {}",
                gpa.num_vertices(),
                gpa.num_edges(),
                args.policies.len(),
                args.output.display()
            )?;
            Ok(())
        }
        Cmd::AccelPlan(args) => {
            let ssp = load_instance(&args.domain, &args.problem)?;
            let gpa = load_gpa(&args.gpa, ssp.domain())?;
            let acc = solve_with_gpa(&ssp, &gpa, args.solve.solver()?, &args.solve.config()?)?;
            report(out, &acc.result, "accel-plan")?;
            writeln!(
                out,
                "constrained phase {}",
                if acc.used_constrained { "produced the policy" } else { "fell back" }
            )?;
            if let Some(path) = &args.output {
                write_policy_file(
                    path,
                    &ssp,
                    &acc.result,
                    &args.solve,
                    &args.domain,
                    &args.problem,
                )?;
                writeln!(out, "policy written to {}", path.display())?;
            }
            Ok(())
        }
        Cmd::Bench(args) => {
            let text = std::fs::read_to_string(&args.spec)?;
            let spec = ExperimentSpec::parse(&text)?;
            let root = args.spec.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
            let rows = run_experiment(&spec, &root)?;
            let csv = write_csv(&rows);
            let target = args
                .output
                .clone()
                .or_else(|| spec.output.as_ref().map(|o| root.join(o)));
            match target {
                Some(path) => {
                    std::fs::write(&path, &csv)?;
                    writeln!(out, "{} rows written to {}", rows.len(), path.display())?;
                }
                None => write!(out, "{csv}")?,
            }
            Ok(())
        }
        Cmd::Eval(args) => {
            let header = peek_header(&args.policy)?;
            let domain = resolve_stored(&args.policy, &header.domain_file);
            let ssp = load_instance(&domain, &args.problem)?;
            let (_, policy) = load_policy(&args.policy, &ssp)?;
            let stats = evaluate_policy(&ssp, &policy, args.trials, args.horizon, args.seed);
            writeln!(
                out,
                "eval: trials = {}, cost = {:.4} +- {:.4}, goal rate = {:.4}",
                stats.trials, stats.mean, stats.std_dev, stats.goal_rate
            )?;
            Ok(())
        }
    }
}

/// Read just the header line of a policy file.
fn peek_header(path: &Path) -> Result<PolicyHeader, CliError> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let mut first = String::new();
    std::io::BufReader::new(file).read_line(&mut first)?;
    let header: PolicyHeader = serde_json::from_str(first.trim_end())
        .map_err(|e| CliError::Usage(format!("{} is not a policy file: {e}", path.display())))?;
    Ok(header)
}
