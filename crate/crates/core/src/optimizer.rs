//! Direct single shooting over piecewise-constant schedules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjoint::{integrate_adjoint, ExtremalRecord};
use crate::dynamics::{productivity, simulate, Bioreactor, DynamicsError, State7};
use crate::oxygen::{integrate_oxygen_adjoint, simulate_oxygen, OxygenProblem, OxygenRecord, State5};
use crate::schedule::{ControlSchedule, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `x5(t_f)/(x1(t_f) + x2(t_f))` over `(u1, u2)`.
    Productivity,
    /// `x5(t_f)` over `u3` with the feed fixed.
    TerminalEthanol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    ProjectedGradient,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSetup {
    pub knots: usize,
    pub objective: Objective,
    #[serde(default = "default_search")]
    pub search: Search,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_search() -> Search {
    Search::ProjectedGradient
}
fn default_iterations() -> usize {
    200
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_fd_step() -> f64 {
    1e-4
}

impl OptimizationSetup {
    pub fn new(knots: usize, objective: Objective) -> Self {
        Self {
            knots,
            objective,
            search: default_search(),
            max_iterations: default_iterations(),
            tolerance: default_tolerance(),
            fd_step: default_fd_step(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.knots == 0 {
            return Err(OptimizeError::Setup("setup.knots must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(OptimizeError::Setup("setup.tolerance must be > 0".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(OptimizeError::Setup("setup.fd_step must lie in (0, 0.5)".into()));
        }
        if self.max_iterations == 0 {
            return Err(OptimizeError::Setup("setup.max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("{0}")]
    Setup(String),
    #[error("simulation failed at iterate {iterate:?}: {source}")]
    Simulation { iterate: Vec<f64>, source: DynamicsError },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Outcome of the box-constrained ascent on `[0, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after each accepted iterate, starting with the initial one.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Finite-difference gradient, central in the interior and one-sided where
/// a bound is within `d`.
pub fn fd_gradient<F, E>(f: &F, x: &[f64], fx: f64, d: f64) -> Result<Vec<f64>, (Vec<f64>, E)>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let eval = |v: f64| {
                let mut y = x.to_vec();
                y[i] = v;
                f(&y).map_err(|e| (y, e))
            };
            if x[i] + d > 1.0 {
                Ok((fx - eval(x[i] - d)?) / d)
            } else if x[i] - d < 0.0 {
                Ok((eval(x[i] + d)? - fx) / d)
            } else {
                Ok((eval(x[i] + d)? - eval(x[i] - d)?) / (2.0 * d))
            }
        })
        .collect()
}

/// Projected gradient ascent with Armijo backtracking.
pub fn projected_gradient<F, E>(f: &F, x0: Vec<f64>, setup: &OptimizationSetup) -> Result<Ascent, (Vec<f64>, E)>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    let mut x = x0;
    project(&mut x);
    let mut fx = f(&x).map_err(|e| (x.clone(), e))?;
    let mut out = Ascent { x: Vec::new(), value: fx, history: vec![fx], iterations: 0, evaluations: 1, converged: false };
    let mut reach = 0.25;
    for _ in 0..setup.max_iterations {
        out.iterations += 1;
        let g = fd_gradient(f, &x, fx, setup.fd_step)?;
        out.evaluations += 2 * x.len();
        let mut stationary = x.clone();
        stationary.iter_mut().zip(&g).for_each(|(v, gi)| *v += gi);
        project(&mut stationary);
        let pg = stationary.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if pg < setup.tolerance {
            out.converged = true;
            break;
        }
        let gmax = g
            .iter()
            .zip(&x)
            .filter(|(gi, xi)| !((**xi <= 0.0 && **gi < 0.0) || (**xi >= 1.0 && **gi > 0.0)))
            .map(|(gi, _)| gi.abs())
            .fold(0.0, f64::max);
        let mut accepted = None;
        for _ in 0..40 {
            let alpha = reach / gmax;
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + alpha * gi).collect();
            project(&mut y);
            let fy = f(&y).map_err(|e| (y.clone(), e))?;
            out.evaluations += 1;
            let predicted: f64 = g.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
            if fy >= fx + 1e-4 * predicted && fy > fx {
                accepted = Some((y, fy));
                break;
            }
            reach *= 0.5;
        }
        let Some((y, fy)) = accepted else {
            out.converged = true;
            break;
        };
        x = y;
        fx = fy;
        out.history.push(fx);
        reach = (2.0 * reach).min(1.0);
    }
    out.x = x;
    out.value = fx;
    Ok(out)
}

/// Compass search along coordinates with a halving step.
pub fn coordinate_descent<F, E>(f: &F, x0: Vec<f64>, setup: &OptimizationSetup) -> Result<Ascent, (Vec<f64>, E)>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    let mut x = x0;
    project(&mut x);
    let mut fx = f(&x).map_err(|e| (x.clone(), e))?;
    let mut out = Ascent { x: Vec::new(), value: fx, history: vec![fx], iterations: 0, evaluations: 1, converged: false };
    let mut delta = 0.25;
    for _ in 0..setup.max_iterations {
        out.iterations += 1;
        let mut improved = false;
        for i in 0..x.len() {
            let trials: Vec<Vec<f64>> = [delta, -delta]
                .iter()
                .map(|s| {
                    let mut y = x.clone();
                    y[i] = (y[i] + s).clamp(0.0, 1.0);
                    y
                })
                .filter(|y| y[i] != x[i])
                .collect();
            let values = trials
                .par_iter()
                .map(|y| f(y).map_err(|e| (y.clone(), e)))
                .collect::<Result<Vec<_>, _>>()?;
            out.evaluations += trials.len();
            if let Some((k, &fy)) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
                if fy > fx {
                    x = trials[k].clone();
                    fx = fy;
                    out.history.push(fx);
                    improved = true;
                }
            }
        }
        if !improved {
            delta *= 0.5;
            if delta < setup.tolerance {
                out.converged = true;
                break;
            }
        }
    }
    out.x = x;
    out.value = fx;
    Ok(out)
}

fn ascend<F, E>(f: &F, x0: Vec<f64>, setup: &OptimizationSetup) -> Result<Ascent, (Vec<f64>, E)>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    match setup.search {
        Search::ProjectedGradient => projected_gradient(f, x0, setup),
        Search::CoordinateDescent => coordinate_descent(f, x0, setup),
    }
}

/// Shooting problem for productivity over `(u1, u2)`.
#[derive(Debug, Clone)]
pub struct FeedProblem<'a> {
    pub system: &'a Bioreactor,
    pub x0: State7,
    pub t_final: f64,
    pub step: f64,
}

impl FeedProblem<'_> {
    /// Decision vector `[u1_0..u1_{N-1}, u2_0..u2_{N-1}]` to schedule.
    pub fn schedule(&self, v: &[f64]) -> Result<ControlSchedule, ScheduleError> {
        let n = v.len() / 2;
        ControlSchedule::from_values(self.t_final, v[..n].to_vec(), v[n..].to_vec())
    }

    pub fn objective(&self, v: &[f64]) -> Result<f64, DynamicsError> {
        let sched = self.schedule(v).map_err(|e| DynamicsError::Invalid(e.to_string()))?;
        productivity(&simulate(self.system, &self.x0, &sched, self.t_final, self.step)?)
    }
}

#[derive(Debug, Clone)]
pub struct FeedOptimum {
    pub schedule: ControlSchedule,
    pub value: f64,
    pub ascent: Ascent,
    pub record: ExtremalRecord,
}

/// Maximizes productivity starting from `u ≡ 0.5`.
pub fn optimize_feed(problem: &FeedProblem, setup: &OptimizationSetup) -> Result<FeedOptimum, OptimizeError> {
    let start = ControlSchedule::uniform(problem.t_final, setup.knots.max(1), 0.5, 0.5)?;
    optimize_feed_from(problem, setup, &start)
}

pub fn optimize_feed_from(
    problem: &FeedProblem,
    setup: &OptimizationSetup,
    start: &ControlSchedule,
) -> Result<FeedOptimum, OptimizeError> {
    setup.validate()?;
    if setup.objective != Objective::Productivity {
        return Err(OptimizeError::Setup("feed optimization needs objective = productivity".into()));
    }
    if !(problem.x0[0] + problem.x0[1] > 0.0) {
        return Err(OptimizeError::Setup("productivity needs x1(0) + x2(0) > 0".into()));
    }
    if start.intervals() != setup.knots {
        return Err(OptimizeError::Setup(format!(
            "initial schedule has {} intervals, setup.knots = {}",
            start.intervals(),
            setup.knots
        )));
    }
    let x0: Vec<f64> = start.u1().iter().chain(start.u2()).copied().collect();
    let f = |v: &[f64]| problem.objective(v);
    let ascent = ascend(&f, x0, setup).map_err(|(iterate, source)| OptimizeError::Simulation { iterate, source })?;
    let schedule = problem.schedule(&ascent.x)?;
    let simulation_error = |source| OptimizeError::Simulation { iterate: ascent.x.clone(), source };
    let traj = simulate(problem.system, &problem.x0, &schedule, problem.t_final, problem.step).map_err(simulation_error)?;
    let record = integrate_adjoint(problem.system, &traj).map_err(simulation_error)?;
    Ok(FeedOptimum { value: ascent.value, schedule, ascent, record })
}

/// `∂ψ/∂u_{i,k} = ∫ φ_i dt` over knot interval `k`, trapezoidal in the
/// samples. Layout matches the decision vector.
pub fn adjoint_gradient(rec: &ExtremalRecord, sched: &ControlSchedule) -> Vec<f64> {
    let n = sched.intervals();
    let mut g = vec![0.0; 2 * n];
    let times = &rec.trajectory.times;
    for j in 0..times.len() - 1 {
        let k = sched.interval_at(0.5 * (times[j] + times[j + 1]));
        let dt = times[j + 1] - times[j];
        g[k] += 0.5 * dt * (rec.phi1[j] + rec.phi1[j + 1]);
        g[n + k] += 0.5 * dt * (rec.phi2[j] + rec.phi2[j + 1]);
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedSchedule {
    pub schedule: ControlSchedule,
    /// Per interval, whether `u1`, `u2` were left untouched.
    pub singular_suspect: Vec<[bool; 2]>,
}

/// Sets each knot value to the bang law when the switching function keeps
/// one sign outside `ε_sw` over the whole interval.
pub fn refine_to_bang(sched: &ControlSchedule, rec: &ExtremalRecord) -> RefinedSchedule {
    refine_to_bang_with(sched, rec, rec.switching_tolerance())
}

pub fn refine_to_bang_with(sched: &ControlSchedule, rec: &ExtremalRecord, eps_sw: f64) -> RefinedSchedule {
    let n = sched.intervals();
    let knots = sched.knots();
    let times = &rec.trajectory.times;
    let mut u = [sched.u1().to_vec(), sched.u2().to_vec()];
    let mut suspect = vec![[true; 2]; n];
    for k in 0..n {
        let idx: Vec<usize> = (0..times.len()).filter(|&j| times[j] >= knots[k] && times[j] <= knots[k + 1]).collect();
        for (c, phi) in [&rec.phi1, &rec.phi2].into_iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            if idx.iter().all(|&j| phi[j] > eps_sw) {
                u[c][k] = 1.0;
                suspect[k][c] = false;
            } else if idx.iter().all(|&j| phi[j] < -eps_sw) {
                u[c][k] = 0.0;
                suspect[k][c] = false;
            }
        }
    }
    let [u1, u2] = u;
    let schedule = sched.with_feeds(u1, u2).expect("bang values stay admissible");
    RefinedSchedule { schedule, singular_suspect: suspect }
}

/// Shooting problem for `x5(t_f)` over `u3`, feed fixed.
#[derive(Debug, Clone)]
pub struct OxygenShooting<'a> {
    pub problem: &'a OxygenProblem,
    pub x0: State5,
    pub feed: &'a ControlSchedule,
    pub t_final: f64,
    pub step: f64,
}

impl OxygenShooting<'_> {
    /// Feed schedule carrying `u3` on `N` equal intervals; knots are merged.
    pub fn schedule(&self, u3: &[f64]) -> Result<ControlSchedule, ScheduleError> {
        let n = u3.len();
        let mut knots: Vec<f64> = (0..=n).map(|k| self.t_final * k as f64 / n as f64).collect();
        knots.extend_from_slice(self.feed.knots());
        knots.retain(|t| *t <= self.t_final);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * self.t_final);
        let mids: Vec<f64> = knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let pick = |t: f64| ((t / self.t_final * n as f64) as usize).min(n - 1);
        ControlSchedule::new(
            knots,
            mids.iter().map(|&t| self.feed.at(t)[0]).collect(),
            mids.iter().map(|&t| self.feed.at(t)[1]).collect(),
            Some(mids.iter().map(|&t| u3[pick(t)]).collect()),
        )
    }

    pub fn objective(&self, u3: &[f64]) -> Result<f64, DynamicsError> {
        let sched = self.schedule(u3).map_err(|e| DynamicsError::Invalid(e.to_string()))?;
        let traj = simulate_oxygen(self.problem, &self.x0, &sched, self.t_final, self.step)?;
        Ok(traj.states.last().map_or(0.0, |x| x[2]))
    }
}

#[derive(Debug, Clone)]
pub struct OxygenOptimum {
    pub u3: Vec<f64>,
    pub schedule: ControlSchedule,
    pub value: f64,
    pub ascent: Ascent,
    pub record: OxygenRecord,
}

/// Maximizes terminal ethanol over `u3` starting from `u3 ≡ 0.5`.
pub fn optimize_oxygen(shoot: &OxygenShooting, setup: &OptimizationSetup) -> Result<OxygenOptimum, OptimizeError> {
    setup.validate()?;
    if setup.objective != Objective::TerminalEthanol {
        return Err(OptimizeError::Setup("oxygen optimization needs objective = terminal-ethanol".into()));
    }
    let f = |v: &[f64]| shoot.objective(v);
    let ascent = ascend(&f, vec![0.5; setup.knots], setup)
        .map_err(|(iterate, source)| OptimizeError::Simulation { iterate, source })?;
    let schedule = shoot.schedule(&ascent.x)?;
    let simulation_error = |source| OptimizeError::Simulation { iterate: ascent.x.clone(), source };
    let traj = simulate_oxygen(shoot.problem, &shoot.x0, &schedule, shoot.t_final, shoot.step).map_err(simulation_error)?;
    let record = integrate_oxygen_adjoint(shoot.problem, &traj).map_err(simulation_error)?;
    Ok(OxygenOptimum { u3: ascent.x.clone(), value: ascent.value, schedule, ascent, record })
}
