//! Scenario-driven front end: loads JSON scenarios, runs the solver and the
//! Monte-Carlo harness, and writes bit-stable CSV/JSON outputs.

pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use thiserror::Error;

use lieddp::harness::{monte_carlo, MonteCarloStats, Nominal, NoiseModel};
use lieddp::registry::Registry;
use lieddp::solver::{goal_error, SolveResult, Solver, Status};

use output::{
    convergence_csv, export_trajectory, montecarlo_csv, to_json, write_file, ModeComparison, MonteCarloSummary, NominalFile,
    Summary,
};
pub use scenario::{load_scenario, parse_scenario, Built, Scenario};

pub const NOMINAL_FILE: &str = "nominal.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    #[error("invalid `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("bad nominal file: {0}")]
    Nominal(String),

    #[error("solver failed: {0}")]
    Solver(#[from] lieddp::Error),
}

impl CliError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        CliError::Field { field: field.to_string(), message: message.into() }
    }

    /// Process exit code for an error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(lieddp::Error::Divergence { .. } | lieddp::Error::IllConditioned { .. }) => 3,
            CliError::Solver(lieddp::Error::EmptyStats) => 3,
            _ => 1,
        }
    }
}

pub fn status_exit_code(status: Status) -> i32 {
    match status {
        Status::Converged => 0,
        Status::MaxIters => 2,
        Status::Diverged | Status::IllConditioned => 3,
    }
}

/// Command-line overrides applied on top of the scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub jacobian: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McMode {
    Open,
    Feedback,
}

impl McMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(McMode::Open),
            "fb" => Some(McMode::Feedback),
            _ => None,
        }
    }

    pub fn file_tag(self) -> &'static str {
        match self {
            McMode::Open => "open",
            McMode::Feedback => "fb",
        }
    }
}

pub fn build(scenario: &Scenario, overrides: &Overrides) -> Result<Built, CliError> {
    let registry = Registry::default();
    let mut built = scenario.build(&registry)?;
    if let Some(j) = &overrides.jacobian {
        registry.jacobian(j).map_err(|e| CliError::field("--jacobian", e.to_string()))?;
        built.config.jacobian = j.clone();
    }
    if let (Some(seed), Some(noise)) = (overrides.seed, built.noise.as_mut()) {
        noise.base_seed = seed;
    }
    Ok(built)
}

pub fn solve_scenario(scenario: &Scenario, overrides: &Overrides) -> Result<(Built, SolveResult), CliError> {
    let built = build(scenario, overrides)?;
    let solver = Solver::new(built.problem.clone(), built.config.clone(), &Registry::default())?;
    let result = solver.solve()?;
    Ok((built, result))
}

pub fn summarize(scenario: &Scenario, built: &Built, result: &SolveResult) -> Result<Summary, CliError> {
    let p = &built.problem;
    let n = p.group.dim();
    let last = result.trajectory.states.last().expect("trajectory has a terminal state");
    let dx = goal_error(p.group.as_ref(), &p.goal, last)?;
    Ok(Summary {
        scenario: scenario.name.clone().unwrap_or_default(),
        status: result.status.as_str().to_string(),
        final_cost: result.final_cost,
        inner_iterations: result.inner_iterations(),
        outer_iterations: result.outer.len(),
        max_inner_per_outer: result.outer.iter().map(|o| o.inner_iterations).max().unwrap_or(0),
        max_violation: result.max_violation,
        terminal_config_error: dx.rows(0, n).norm(),
        terminal_twist_error: dx.rows(n, n).norm(),
        jacobian: built.config.jacobian.clone(),
        message: result.message.clone(),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Solves a scenario and writes `trajectory.csv`, `convergence.csv`,
/// `summary.json` and the nominal used by Monte-Carlo runs.
pub fn run_solve(scenario: &Scenario, overrides: &Overrides, out_dir: &Path) -> Result<(Summary, Status), CliError> {
    create_dir(out_dir)?;
    let (built, result) = solve_scenario(scenario, overrides)?;
    export_trajectory(&result.trajectory, &out_dir.join("trajectory.csv"))?;
    write_file(&out_dir.join("convergence.csv"), &convergence_csv(&result.iterations))?;
    let nominal = NominalFile::new(built.problem.group.as_ref(), &result.trajectory, &result.policy);
    write_file(&out_dir.join(NOMINAL_FILE), &to_json(&nominal))?;
    let summary = summarize(scenario, &built, &result)?;
    write_file(&out_dir.join("summary.json"), &to_json(&summary))?;
    Ok((summary, result.status))
}

pub fn read_nominal(dir: &Path) -> Result<NominalFile, CliError> {
    let path = dir.join(NOMINAL_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e} (run `solve` first)", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Nominal(e.to_string()))
}

/// Monte-Carlo statistics of a solved nominal.
pub fn montecarlo_stats(
    built: &Built,
    nominal: &NominalFile,
    samples: usize,
    mode: McMode,
    full_state: bool,
) -> Result<(MonteCarloStats, NoiseModel), CliError> {
    let p = &built.problem;
    let noise = built.noise.ok_or_else(|| CliError::field("noise", "Monte-Carlo runs need a noise model"))?;
    let (traj, policy) = nominal.restore(p.group.as_ref(), p.model.input_dim())?;
    let nominal = Nominal { trajectory: &traj, policy: &policy };
    let name = match (mode, full_state) {
        (McMode::Open, _) => "open",
        (McMode::Feedback, true) => "fb",
        (McMode::Feedback, false) => "fb_config",
    };
    let exec = Registry::default().mode(name)?;
    let stats = monte_carlo(p.group.as_ref(), p.model.as_ref(), nominal, &noise, samples, exec.as_ref(), built.config_update)?;
    Ok((stats, noise))
}

/// Runs the Monte-Carlo harness on the nominal stored in `nominal_dir` and
/// writes `mc_<mode>.csv` plus `mc_<mode>.json`. Once both modes exist in
/// `out_dir`, `mc_comparison.json` is (re)written as well.
pub fn run_montecarlo(
    scenario: &Scenario,
    overrides: &Overrides,
    nominal_dir: &Path,
    samples: Option<usize>,
    mode: McMode,
    out_dir: &Path,
) -> Result<MonteCarloSummary, CliError> {
    let built = build(scenario, overrides)?;
    let nominal = read_nominal(nominal_dir)?;
    let samples = samples
        .or(built.samples)
        .ok_or_else(|| CliError::field("noise.samples", "sample count missing (pass --samples)"))?;
    if samples < 2 {
        return Err(CliError::field("--samples", "must be at least 2"));
    }
    create_dir(out_dir)?;
    let (stats, noise) = montecarlo_stats(&built, &nominal, samples, mode, scenario.full_state_feedback)?;
    let tag = mode.file_tag();
    write_file(&out_dir.join(format!("mc_{tag}.csv")), &montecarlo_csv(&stats))?;
    let summary = MonteCarloSummary {
        mode: stats.mode.clone(),
        samples: stats.sample_count,
        dropped: stats.dropped,
        sigma_w: noise.sigma_w,
        seed: noise.base_seed,
        terminal_trace: stats.terminal_trace(),
    };
    write_file(&out_dir.join(format!("mc_{tag}.json")), &to_json(&summary))?;
    write_comparison(out_dir)?;
    Ok(summary)
}

fn read_mc_summary(path: PathBuf) -> Option<MonteCarloSummary> {
    serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()
}

fn write_comparison(out_dir: &Path) -> Result<(), CliError> {
    let open = read_mc_summary(out_dir.join("mc_open.json"));
    let fb = read_mc_summary(out_dir.join("mc_fb.json"));
    if let (Some(open), Some(fb)) = (open, fb) {
        let cmp = ModeComparison {
            open_terminal_trace: open.terminal_trace,
            fb_terminal_trace: fb.terminal_trace,
            ratio: fb.terminal_trace / open.terminal_trace,
        };
        write_file(&out_dir.join("mc_comparison.json"), &to_json(&cmp))?;
    }
    Ok(())
}
