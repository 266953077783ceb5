//! Command-line entry points.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use fedbatch::adjoint::{check_maximization, integrate_adjoint, ExtremalRecord};
use fedbatch::dynamics::{productivity, simulate, DynamicsError, Trajectory};
use fedbatch::io::{self, CsvError};
use fedbatch::lp::{local_surrogate, solve_fba, LpError, MetabolicNetwork, Pins};
use fedbatch::optimizer::{
    optimize_feed, optimize_oxygen, refine_to_bang, FeedProblem, Objective, OptimizationSetup, OptimizeError,
    OxygenShooting,
};
use fedbatch::oxygen::{
    check_prop2, dh_du3, homogeneous_determinant, integrate_oxygen_adjoint, simulate_oxygen, singular_u3,
    terminal_u3, OxygenRecord, SingularU3,
};
use fedbatch::scenario::{load_json, load_network, load_scenario, Mode, Scenario, ScenarioError};
use fedbatch::schedule::{ControlSchedule, ScheduleError};
use fedbatch::singular::{check_hypotheses, detect_singular_arcs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Invalid(m) => CliError::Validation(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Simulation { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fedbatch", version, about = "Fed-batch bioreactor simulation and optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Surrogate,
    Lp,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario document (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario step (h).
    #[arg(long)]
    step: Option<f64>,
    /// Metabolic model; defaults to whichever the scenario provides.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the state equations and write trajectory.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Feed schedule CSV; defaults to the scenario's fixed schedule, then u = (0.5, 0.5).
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Optimize the feed (or oxygen) schedule.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Optimization setup (JSON).
        #[arg(long)]
        setup: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Costates, maximum-condition check and singular-arc report for a trajectory.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
        /// Schedule CSV; otherwise controls come from the trajectory.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Oxygen-control analysis on the reduced system.
    Oxygen {
        #[command(flatten)]
        common: Common,
        /// Optional setup with objective terminal-ethanol to optimize u3 first.
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sanity report for a network document.
    CheckNetwork {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random pin samples.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { common, schedule } => cmd_simulate(&common, schedule.as_deref()),
        Command::Optimize { common, setup, seed } => cmd_optimize(&common, &setup, seed),
        Command::Analyze { common, trajectory, schedule } => cmd_analyze(&common, &trajectory, schedule.as_deref()),
        Command::Oxygen { common, setup, seed } => cmd_oxygen(&common, setup.as_deref(), seed),
        Command::CheckNetwork { network, out, seed, samples } => cmd_check_network(&network, out.as_deref(), seed, samples),
    }
}

fn prepare(common: &Common) -> Result<(Scenario, Mode), CliError> {
    let mut sc = load_scenario(&common.scenario)?;
    if let Some(h) = common.step {
        sc = sc.with_step(h)?;
    }
    let mode = match common.mode {
        Some(ModeArg::Surrogate) => Mode::Surrogate,
        Some(ModeArg::Lp) => Mode::Lp,
        None => sc.default_mode(),
    };
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", common.out.display())))?;
    Ok((sc, mode))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let p = dir.join(name);
    File::create(&p)
        .map(BufWriter::new)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display())))
}

fn open(p: &Path) -> Result<File, CliError> {
    File::open(p).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))
}

fn write_report(dir: &Path, report: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(dir.join("report.json"), text + "\n")
        .map_err(|e| CliError::Validation(format!("cannot write report.json: {e}")))
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Surrogate => "surrogate",
        Mode::Lp => "lp",
    }
}

fn feed_schedule(sc: &Scenario, path: Option<&Path>) -> Result<ControlSchedule, CliError> {
    let s = match path {
        Some(p) => io::read_schedule(open(p)?)?,
        None => match &sc.fixed_schedule {
            Some(s) => s.clone(),
            None => ControlSchedule::uniform(sc.t_final, 1, 0.5, 0.5)?,
        },
    };
    if (s.t_final() - sc.t_final).abs() > 1e-12 * sc.t_final {
        return Err(CliError::Validation(format!("schedule ends at {} h, scenario at {} h", s.t_final(), sc.t_final)));
    }
    Ok(s)
}

fn trajectory_summary(traj: &Trajectory) -> Value {
    json!({
        "samples": traj.len(),
        "location_events": traj.events.len(),
        "final_time_h": traj.t_final(),
        "final_state": traj.final_state().as_slice(),
        "productivity": productivity(traj).ok(),
    })
}

fn write_trajectory_files(dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    io::write_trajectory(create(dir, "trajectory.csv")?, traj)?;
    io::write_events(create(dir, "events.csv")?, &traj.events)?;
    Ok(())
}

fn cmd_simulate(common: &Common, schedule: Option<&Path>) -> Result<(), CliError> {
    let (sc, mode) = prepare(common)?;
    let sys = sc.bioreactor(mode)?;
    let sched = feed_schedule(&sc, schedule)?;
    let traj = simulate(&sys, &sc.x0, &sched, sc.t_final, sc.step)?;
    write_trajectory_files(&common.out, &traj)?;
    io::write_schedule(create(&common.out, "schedule.csv")?, &sched)?;
    write_report(&common.out, &json!({ "command": "simulate", "mode": mode_name(mode), "step_h": sc.step, "trajectory": trajectory_summary(&traj) }))
}

fn extremal_summary(rec: &ExtremalRecord, sched: &ControlSchedule, sc: &Scenario) -> Result<Value, CliError> {
    let max = check_maximization(rec, sched);
    let (spread, bound) = rec.hamiltonian_spread();
    let singular = detect_singular_arcs(rec, &sc.kinetic);
    let surrogate = sc.surrogate()?;
    Ok(json!({
        "eps_sw": max.eps_sw,
        "maximization": {
            "samples": max.samples,
            "violations": max.violations,
            "violation_fraction": max.violation_fraction(),
        },
        "hamiltonian_spread": { "spread": spread, "bound": bound },
        "hypotheses": check_hypotheses(&surrogate),
        "singular": singular,
    }))
}

fn cmd_optimize(common: &Common, setup_path: &Path, seed: u64) -> Result<(), CliError> {
    let setup: OptimizationSetup = load_json(setup_path)?;
    if setup.objective == Objective::TerminalEthanol {
        return oxygen_run(common, Some(setup), seed);
    }
    let (sc, mode) = prepare(common)?;
    let sys = sc.bioreactor(mode)?;
    let problem = FeedProblem { system: &sys, x0: sc.x0, t_final: sc.t_final, step: sc.step };
    let opt = optimize_feed(&problem, &setup)?;
    let refined = refine_to_bang(&opt.schedule, &opt.record);
    let refined_value = problem.objective(
        &refined.schedule.u1().iter().chain(refined.schedule.u2()).copied().collect::<Vec<_>>(),
    );
    io::write_schedule(create(&common.out, "schedule.csv")?, &opt.schedule)?;
    io::write_schedule(create(&common.out, "schedule_bang.csv")?, &refined.schedule)?;
    write_trajectory_files(&common.out, &opt.record.trajectory)?;
    io::write_extremal(create(&common.out, "extremal.csv")?, &opt.record)?;
    let report = json!({
        "command": "optimize",
        "mode": mode_name(mode),
        "seed": seed,
        "setup": setup,
        "value": opt.value,
        "iterations": opt.ascent.iterations,
        "evaluations": opt.ascent.evaluations,
        "converged": opt.ascent.converged,
        "history": opt.ascent.history,
        "refined": {
            "value": refined_value.ok(),
            "singular_suspect": refined.singular_suspect,
        },
        "trajectory": trajectory_summary(&opt.record.trajectory),
        "diagnostics": extremal_summary(&opt.record, &opt.schedule, &sc)?,
    });
    write_report(&common.out, &report)
}

fn cmd_analyze(common: &Common, trajectory: &Path, schedule: Option<&Path>) -> Result<(), CliError> {
    let (sc, mode) = prepare(common)?;
    let sys = sc.bioreactor(mode)?;
    let mut traj = io::read_trajectory(open(trajectory)?)?;
    let sched = match schedule {
        Some(p) => {
            let s = io::read_schedule(open(p)?)?;
            traj.controls = traj.times.windows(2).map(|w| s.at(0.5 * (w[0] + w[1]))).collect();
            s
        }
        None => ControlSchedule::new(
            traj.times.clone(),
            traj.controls.iter().map(|u| u[0]).collect(),
            traj.controls.iter().map(|u| u[1]).collect(),
            None,
        )?,
    };
    let rec = integrate_adjoint(&sys, &traj)?;
    io::write_extremal(create(&common.out, "extremal.csv")?, &rec)?;
    let report = json!({
        "command": "analyze",
        "mode": mode_name(mode),
        "trajectory": trajectory_summary(&traj),
        "diagnostics": extremal_summary(&rec, &sched, &sc)?,
    });
    write_report(&common.out, &report)
}

fn cmd_oxygen(common: &Common, setup: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let setup = setup.map(load_json::<OptimizationSetup>).transpose()?;
    oxygen_run(common, setup, seed)
}

fn oxygen_summary(sc: &Scenario, rec: &OxygenRecord) -> Result<Value, CliError> {
    let prob = sc.oxygen_problem()?;
    let (k, sigma) = (&prob.kinetics, &prob.sigma);
    let n = rec.trajectory.times.len();
    let eps = rec.switching_tolerance();
    let (mut increasing, mut decreasing, mut flat, mut attainable, mut below, mut above) = (0, 0, 0, 0, 0, 0);
    for i in 0..n {
        let d = rec.dh_du3[i];
        if d > eps {
            increasing += 1;
        } else if d < -eps {
            decreasing += 1;
        } else {
            flat += 1;
        }
        let l = &rec.covectors[i];
        match singular_u3(k, sigma, l[2], l[3], rec.mu_t[i], rec.ve_t[i]) {
            Ok(SingularU3::Attainable(_)) => attainable += 1,
            Ok(SingularU3::Unattainable(fedbatch::oxygen::Side::Below)) => below += 1,
            Ok(SingularU3::Unattainable(fedbatch::oxygen::Side::Above)) => above += 1,
            Err(_) => {}
        }
    }
    let ve_f = rec.ve_t[n - 1];
    let x6_f = rec.trajectory.states[n - 1][3];
    let terminal_slopes: Vec<f64> = (0..=10)
        .map(|i| dh_du3(k, sigma, x6_f, 1.0, 0.0, i as f64 / 10.0, rec.mu_t[n - 1], ve_f))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let rule = terminal_u3(ve_f);
    let rule_consistent = if ve_f > 0.0 { terminal_slopes.iter().all(|d| *d <= 0.0) } else { true };
    let ratios: Vec<f64> = rec
        .trajectory
        .states
        .iter()
        .filter_map(|x| homogeneous_determinant(k, x).ok().and_then(|r| r.1))
        .collect();
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(json!({
        "terminal_ethanol": rec.trajectory.states[n - 1][2],
        "eps_sw": eps,
        "dh_du3_sign": { "positive": increasing, "negative": decreasing, "within_tolerance": flat },
        "singular_u3": { "attainable": attainable, "below_range": below, "above_range": above },
        "terminal_rule": { "ve_tilde": ve_f, "u3": rule, "consistent": rule_consistent },
        "determinant_ratio": if ratios.is_empty() { Value::Null } else { json!([rmin, rmax]) },
        "prop2": check_prop2(&prob, rec),
    }))
}

fn oxygen_run(common: &Common, setup: Option<OptimizationSetup>, seed: u64) -> Result<(), CliError> {
    let (sc, _) = prepare(common)?;
    let prob = sc.oxygen_problem()?;
    let x0 = sc.reduced_x0();
    let feed = feed_schedule(&sc, None)?;
    let (rec, schedule, optimization) = match setup {
        Some(setup) => {
            let shoot = OxygenShooting { problem: &prob, x0, feed: &feed, t_final: sc.t_final, step: sc.step };
            let opt = optimize_oxygen(&shoot, &setup)?;
            let summary = json!({
                "setup": setup,
                "value": opt.value,
                "u3": opt.u3,
                "iterations": opt.ascent.iterations,
                "evaluations": opt.ascent.evaluations,
                "converged": opt.ascent.converged,
                "history": opt.ascent.history,
            });
            (opt.record, opt.schedule, summary)
        }
        None => {
            let sched = match feed.u3() {
                Some(_) => feed.clone(),
                None => feed.clone().with_u3(vec![0.0; feed.intervals()])?,
            };
            let traj = simulate_oxygen(&prob, &x0, &sched, sc.t_final, sc.step)?;
            (integrate_oxygen_adjoint(&prob, &traj)?, sched, Value::Null)
        }
    };
    io::write_schedule(create(&common.out, "schedule.csv")?, &schedule)?;
    io::write_oxygen(create(&common.out, "oxygen.csv")?, &rec)?;
    let report = json!({
        "command": "oxygen",
        "seed": seed,
        "optimization": optimization,
        "analysis": oxygen_summary(&sc, &rec)?,
    });
    write_report(&common.out, &report)
}

fn network_report(net: &MetabolicNetwork, seed: u64, samples: usize) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ub = net.upper_bounds();
    let (ug, uz) = (ub[net.idx_g()], ub[net.idx_z()]);
    let uo = net.idx_o().map_or(0.0, |i| ub[i]);
    let (mut optimal, mut other, mut degenerate, mut positive_yields) = (0usize, 0usize, 0usize, 0usize);
    let (mut mu_range, mut ve_range) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    let mut bases = std::collections::BTreeSet::new();
    for _ in 0..samples {
        let pins = Pins::new(rng.gen::<f64>() * ug, rng.gen::<f64>() * uz, rng.gen::<f64>() * uo);
        match solve_fba(net, pins) {
            Ok(out) if out.is_optimal() => {
                optimal += 1;
                mu_range = [mu_range[0].min(out.mu), mu_range[1].max(out.mu)];
                ve_range = [ve_range[0].min(out.v_e), ve_range[1].max(out.v_e)];
                bases.insert(out.basis_id.to_string());
                match local_surrogate(net, pins) {
                    Ok(s) if s.has_positive_yields() => positive_yields += 1,
                    Err(LpError::Degenerate { .. }) => degenerate += 1,
                    _ => {}
                }
            }
            _ => other += 1,
        }
    }
    let (mu_max, ve_max) = net.output_bounds();
    json!({
        "reactions": net.reactions(),
        "fluxes": net.fluxes(),
        "seed": seed,
        "samples": samples,
        "optimal": optimal,
        "not_optimal": other,
        "degenerate": degenerate,
        "positive_yield_surrogates": positive_yields,
        "distinct_bases": bases.len(),
        "mu_range": if optimal > 0 { json!(mu_range) } else { Value::Null },
        "ve_range": if optimal > 0 { json!(ve_range) } else { Value::Null },
        "output_bounds": { "mu_max": mu_max, "ve_max": ve_max },
    })
}

fn cmd_check_network(path: &Path, out: Option<&Path>, seed: u64, samples: usize) -> Result<(), CliError> {
    let net = load_network(path)?;
    let report = network_report(&net, seed, samples);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
        write_report(dir, &report)?;
    }
    Ok(())
}
