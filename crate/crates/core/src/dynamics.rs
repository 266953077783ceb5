//! Seven-state fed-batch model
//!
//! ```text
//! x1' = u1                 x2' = u2
//! x3' = F·u1 − v_g·x6      x4' = F·u2 − v_z·x6
//! x5' = v_e·x6             x6' = μ·x6             x7' = F
//! ```
//!
//! with `x3..x6` the culture masses of glucose, xylose, ethanol and biomass,
//! `x7` the volume and `x1`, `x2` the cumulative feeds. `μ` and `v_e` come
//! either from an affine surrogate in `(v_g, v_z)` or from the flux-balance
//! LP solved at the current uptake rates.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::kinetics::{KineticParams, KineticsError, Rate, ScaledPoint};
use crate::lp::{BasisId, FbaSolver, LpError, LpStatus, MetabolicNetwork, Pins};
use crate::ode::{rk4_step, time_grid};
use crate::schedule::ControlSchedule;
use crate::surrogate::SurrogateCoeffs;

pub type State7 = SVector<f64, 7>;
pub type Covector7 = SVector<f64, 7>;
pub type Matrix7 = SMatrix<f64, 7, 7>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP is {status:?} at t = {time} h, state {state:?}")]
    Coupling { time: f64, state: [f64; 7], status: LpStatus },
    #[error("x{component} = {value:e} at t = {time} h left the admissible domain; retry with a smaller step")]
    Domain { time: f64, component: usize, value: f64 },
    #[error("x1 + x2 = {0} must be positive to evaluate productivity")]
    Region(f64),
}

/// Source of the growth rate and ethanol flux.
#[derive(Debug, Clone, PartialEq)]
pub enum Metabolism {
    Surrogate(SurrogateCoeffs),
    Network(MetabolicNetwork),
}

/// Everything needed to evaluate the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Bioreactor {
    pub kinetics: KineticParams,
    /// Volume feed rate `F` (L·h⁻¹).
    pub feed_rate: f64,
    pub metabolism: Metabolism,
    /// Dissolved oxygen used for the oxygen pin of the LP (g·L⁻¹).
    pub oxygen: f64,
}

/// Uptake rates and metabolic outputs at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluxes {
    pub v_g: f64,
    pub v_z: f64,
    pub mu: f64,
    pub v_e: f64,
    pub basis: Option<BasisId>,
}

fn point(x: &State7) -> ScaledPoint {
    ScaledPoint::new(x[2], x[3], x[4], x[6])
}

/// Concentrations `(V, X, G, Z, E)` of the untransformed model.
pub fn concentrations(x: &State7) -> [f64; 5] {
    let v = x[6];
    [v, x[5] / v, x[2] / v, x[3] / v, x[4] / v]
}

/// State-dependent evaluator; holds the LP solver used for warm starts.
pub struct Evaluator<'a> {
    sys: &'a Bioreactor,
    solver: Option<FbaSolver>,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a Bioreactor) -> Self {
        let solver = match &sys.metabolism {
            Metabolism::Network(net) => Some(FbaSolver::new(net.clone())),
            Metabolism::Surrogate(_) => None,
        };
        Self { sys, solver }
    }

    pub fn system(&self) -> &Bioreactor {
        self.sys
    }

    fn pins(&self, x: &State7) -> Result<Pins, KineticsError> {
        let k = &self.sys.kinetics;
        Ok(Pins::new(k.v_g_scaled(x[2], x[4], x[6])?, k.v_z_scaled(x[2], x[3], x[4], x[6])?, k.v_o(self.sys.oxygen)?))
    }

    pub fn fluxes(&mut self, t: f64, x: &State7) -> Result<Fluxes, DynamicsError> {
        let pins = self.pins(x)?;
        match &self.sys.metabolism {
            Metabolism::Surrogate(s) => Ok(Fluxes {
                v_g: pins.v_g,
                v_z: pins.v_z,
                mu: s.mu(pins.v_g, pins.v_z),
                v_e: s.v_e(pins.v_g, pins.v_z),
                basis: None,
            }),
            Metabolism::Network(_) => {
                let solver = self.solver.as_mut().expect("network model owns a solver");
                let out = solver.solve_warm(&pins)?;
                if !out.is_optimal() {
                    return Err(DynamicsError::Coupling { time: t, state: (*x).into(), status: out.status });
                }
                Ok(Fluxes { v_g: pins.v_g, v_z: pins.v_z, mu: out.mu, v_e: out.v_e, basis: Some(out.basis_id) })
            }
        }
    }

    /// Drift field `F0` at `x`.
    pub fn drift(&mut self, t: f64, x: &State7) -> Result<State7, DynamicsError> {
        let fl = self.fluxes(t, x)?;
        Ok(drift_from(x, &fl, self.sys.feed_rate))
    }

    /// `f(x, u) = F0 + u1·F1 + u2·F2`.
    pub fn rhs(&mut self, t: f64, x: &State7, u: [f64; 2]) -> Result<State7, DynamicsError> {
        let [f1, f2] = control_fields(self.sys.feed_rate);
        Ok(self.drift(t, x)? + f1 * u[0] + f2 * u[1])
    }

    /// Affine model of `(μ, v_e)` in the LP basis active at `x`, or the
    /// surrogate itself.
    pub fn local_coeffs(&mut self, x: &State7) -> Result<SurrogateCoeffs, DynamicsError> {
        match &self.sys.metabolism {
            Metabolism::Surrogate(s) => Ok(*s),
            Metabolism::Network(_) => {
                let pins = self.pins(x)?;
                let solver = self.solver.as_mut().expect("network model owns a solver");
                Ok(solver.sensitivity(&pins, true)?.1)
            }
        }
    }
}

fn drift_from(x: &State7, fl: &Fluxes, feed: f64) -> State7 {
    State7::from([0.0, 0.0, -fl.v_g * x[5], -fl.v_z * x[5], fl.v_e * x[5], fl.mu * x[5], feed])
}

/// The constant control fields `F1 = (1,0,F,0,0,0,0)`, `F2 = (0,1,0,F,0,0,0)`.
pub fn control_fields(feed: f64) -> [State7; 2] {
    [
        State7::from([1.0, 0.0, feed, 0.0, 0.0, 0.0, 0.0]),
        State7::from([0.0, 1.0, 0.0, feed, 0.0, 0.0, 0.0]),
    ]
}

/// `(F0, F1, F2)` at `x`.
pub fn vector_fields(sys: &Bioreactor, x: &State7) -> Result<[State7; 3], DynamicsError> {
    let f0 = Evaluator::new(sys).drift(0.0, x)?;
    let [f1, f2] = control_fields(sys.feed_rate);
    Ok([f0, f1, f2])
}

/// `F0` for a fixed affine model.
pub fn affine_drift(k: &KineticParams, s: &SurrogateCoeffs, feed: f64, x: &State7) -> Result<State7, KineticsError> {
    let v_g = k.v_g_scaled(x[2], x[4], x[6])?;
    let v_z = k.v_z_scaled(x[2], x[3], x[4], x[6])?;
    let fl = Fluxes { v_g, v_z, mu: s.mu(v_g, v_z), v_e: s.v_e(v_g, v_z), basis: None };
    Ok(drift_from(x, &fl, feed))
}

/// Jacobian of `F0` for a fixed affine model. Controls do not enter since
/// `F1`, `F2` are constant.
pub fn affine_jacobian(k: &KineticParams, s: &SurrogateCoeffs, x: &State7) -> Result<Matrix7, KineticsError> {
    let p = point(x);
    let g = k.partials(p, Rate::Glucose)?;
    let z = k.partials(p, Rate::Xylose)?;
    let x6 = x[5];
    let mut j = Matrix7::zeros();
    // state slots of the four kinetic arguments
    let cols = [2, 3, 4, 6];
    let (dg, dz) = (g.as_array(), z.as_array());
    for (c, &col) in cols.iter().enumerate() {
        let dmu = s.a1 * dg[c] + s.a2 * dz[c];
        let dve = s.b1 * dg[c] + s.b2 * dz[c];
        j[(2, col)] = -x6 * dg[c];
        j[(3, col)] = -x6 * dz[c];
        j[(4, col)] = x6 * dve;
        j[(5, col)] = x6 * dmu;
    }
    j[(2, 5)] = -g.value;
    j[(3, 5)] = -z.value;
    j[(4, 5)] = s.v_e(g.value, z.value);
    j[(5, 5)] = s.mu(g.value, z.value);
    Ok(j)
}

/// Basis change detected inside a step.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationEvent {
    pub time: f64,
    pub from: BasisId,
    pub to: BasisId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State7>,
    pub mu: Vec<f64>,
    pub v_e: Vec<f64>,
    pub basis: Vec<Option<BasisId>>,
    /// Control used on `[times[k], times[k+1]]`; one fewer entry than `times`.
    pub controls: Vec<[f64; 2]>,
    pub events: Vec<LocationEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &State7 {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }
}

/// Undershoot tolerance for nonnegative components.
pub fn state_tolerance(x0: &State7) -> f64 {
    1e-8 * (1.0 + x0.norm())
}

/// Whether `x` lies in the admissible initial domain `x1..x6 >= 0, x7 > 0`.
pub fn in_domain(x: &State7) -> bool {
    x.iter().all(|v| v.is_finite()) && x.iter().take(6).all(|v| *v >= 0.0) && x[6] > 0.0
}

/// Fixed-step RK4 integration on the union of `h`-multiples and the
/// schedule knots. `x7` is advanced analytically. In network mode basis
/// changes are located by bisection and become samples.
pub fn simulate(
    sys: &Bioreactor,
    x0: &State7,
    sched: &ControlSchedule,
    t_f: f64,
    h: f64,
) -> Result<Trajectory, DynamicsError> {
    if !(h > 0.0) || !(t_f > 0.0) || !h.is_finite() || !t_f.is_finite() {
        return Err(DynamicsError::Invalid(format!("need t_f > 0 and h > 0 (got t_f = {t_f}, h = {h})")));
    }
    if !in_domain(x0) {
        return Err(DynamicsError::Invalid(format!("initial state {:?} is outside the domain", x0.as_slice())));
    }
    if sched.t_final() < t_f * (1.0 - 1e-12) {
        return Err(DynamicsError::Invalid(format!(
            "schedule ends at {} h before t_f = {t_f} h",
            sched.t_final()
        )));
    }
    let feed = sys.feed_rate;
    let x7_0 = x0[6];
    let eps = state_tolerance(x0);
    let grid = time_grid(t_f, h, sched.knots());
    let mut ev = Evaluator::new(sys);
    let network = matches!(sys.metabolism, Metabolism::Network(_));

    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        mu: Vec::with_capacity(grid.len()),
        v_e: Vec::with_capacity(grid.len()),
        basis: Vec::with_capacity(grid.len()),
        controls: Vec::with_capacity(grid.len()),
        events: Vec::new(),
    };
    let fl = ev.fluxes(0.0, x0)?;
    traj.push_sample(0.0, x0, fl);

    let mut x = *x0;
    let mut t = 0.0;
    for &t_next in &grid[1..] {
        let u = sched.at(0.5 * (t + t_next));
        while t < t_next {
            let step = |t0: f64, y: &State7, dt: f64, ev: &mut Evaluator| {
                let mut y1 = rk4_step(t0, y, dt, |s, z: &State7| {
                    let mut z = *z;
                    z[6] = x7_0 + feed * s;
                    ev.rhs(s, &z, u)
                })?;
                y1[6] = x7_0 + feed * (t0 + dt);
                Ok::<_, DynamicsError>(y1)
            };
            let mut x_new = step(t, &x, t_next - t, &mut ev)?;
            let mut t_new = t_next;
            let mut fl = ev.fluxes(t_new, &x_new)?;
            let from = traj.basis.last().cloned().flatten();
            if network && fl.basis != from {
                // shrink the step to the first sub-step whose end lies in a new basis
                let (mut lo, mut hi) = (0.0, t_next - t);
                while hi - lo > h * 1e-3 {
                    let mid = 0.5 * (lo + hi);
                    let y = step(t, &x, mid, &mut ev)?;
                    if ev.fluxes(t + mid, &y)?.basis == from {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if hi < t_next - t {
                    t_new = t + hi;
                    x_new = step(t, &x, hi, &mut ev)?;
                    fl = ev.fluxes(t_new, &x_new)?;
                }
                if let (Some(a), Some(b)) = (from, fl.basis.clone()) {
                    if a != b {
                        traj.events.push(LocationEvent { time: t_new, from: a, to: b });
                    }
                }
            }
            check_domain(t_new, &x_new, eps)?;
            traj.controls.push(u);
            traj.push_sample(t_new, &clamp(&x_new, eps), fl);
            x = x_new;
            t = t_new;
        }
    }
    Ok(traj)
}

fn check_domain(t: f64, x: &State7, eps: f64) -> Result<(), DynamicsError> {
    match x.iter().take(6).position(|v| !(*v >= -eps)) {
        Some(i) => Err(DynamicsError::Domain { time: t, component: i + 1, value: x[i] }),
        None => Ok(()),
    }
}

fn clamp(x: &State7, eps: f64) -> State7 {
    let mut y = *x;
    for v in y.iter_mut().take(6) {
        if *v < 0.0 && *v >= -eps {
            *v = 0.0;
        }
    }
    y
}

impl Trajectory {
    fn push_sample(&mut self, t: f64, x: &State7, fl: Fluxes) {
        self.times.push(t);
        self.states.push(*x);
        self.mu.push(fl.mu);
        self.v_e.push(fl.v_e);
        self.basis.push(fl.basis);
    }
}

/// `ψ = x5 / (x1 + x2)` at a state.
pub fn psi(x: &State7) -> Result<f64, DynamicsError> {
    let d = x[0] + x[1];
    if d > 0.0 {
        Ok(x[4] / d)
    } else {
        Err(DynamicsError::Region(d))
    }
}

/// Ethanol produced per unit of substrate feed at the final sample.
pub fn productivity(traj: &Trajectory) -> Result<f64, DynamicsError> {
    psi(traj.final_state())
}

/// A constant `C` with `|f(x, u)| <= C (1 + |x|)` on the nonnegative domain
/// for all controls in the unit square.
pub fn sublinear_constant(sys: &Bioreactor) -> f64 {
    let k = &sys.kinetics;
    let (mu_max, ve_max) = match &sys.metabolism {
        Metabolism::Surrogate(s) => (
            s.a1.abs() * k.v_gmax + s.a2.abs() * k.v_zmax + s.mu_bar.abs(),
            s.b1.abs() * k.v_gmax + s.b2.abs() * k.v_zmax + s.v_bar.abs(),
        ),
        Metabolism::Network(net) => net.output_bounds(),
    };
    let growth = k.v_gmax + k.v_zmax + mu_max + ve_max;
    (2.0 + 3.0 * sys.feed_rate.abs()).max(growth)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn kinetics() -> KineticParams {
        KineticParams {
            v_omax: 8.0,
            v_gmax: 10.5,
            v_zmax: 6.0,
            k_o: 0.003,
            k_g: 0.5,
            k_z: 0.4,
            k_ie_g: 10.0,
            k_ie_z: 7.0,
            k_ig: 0.35,
        }
    }

    pub(crate) fn surrogate() -> SurrogateCoeffs {
        SurrogateCoeffs { a1: 0.05, a2: 0.03, b1: 1.6, b2: 1.2, mu_bar: 0.02, v_bar: 0.1 }
    }

    pub(crate) fn reactor(s: SurrogateCoeffs) -> Bioreactor {
        Bioreactor { kinetics: kinetics(), feed_rate: 0.4, metabolism: Metabolism::Surrogate(s), oxygen: 0.0 }
    }

    #[test]
    fn control_fields_are_constant() {
        let sys = reactor(surrogate());
        let x = State7::from([0.1, 0.2, 3.0, 2.0, 0.5, 1.0, 2.0]);
        let [_, f1, f2] = vector_fields(&sys, &x).unwrap();
        assert_eq!(f1.as_slice(), &[1.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f2.as_slice(), &[0.0, 1.0, 0.0, 0.4, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn no_biomass_leaves_only_volume_drift() {
        let sys = reactor(surrogate());
        let x = State7::from([0.1, 0.2, 3.0, 2.0, 0.5, 0.0, 2.0]);
        let [f0, ..] = vector_fields(&sys, &x).unwrap();
        assert_eq!(f0.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4]);
    }

    #[test]
    fn drift_matches_termwise_assembly() {
        let sys = reactor(surrogate());
        let k = kinetics();
        let s = surrogate();
        let x = State7::from([0.3, 0.2, 4.0, 1.5, 0.7, 0.9, 2.5]);
        let [f0, ..] = vector_fields(&sys, &x).unwrap();
        let g = k.v_g(4.0 / 2.5, 0.7 / 2.5).unwrap();
        let z = k.v_z(4.0 / 2.5, 1.5 / 2.5, 0.7 / 2.5).unwrap();
        let expect = [0.0, 0.0, -g * 0.9, -z * 0.9, (s.b1 * g + s.b2 * z + s.v_bar) * 0.9, (s.a1 * g + s.a2 * z + s.mu_bar) * 0.9, 0.4];
        for (a, b) in f0.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn decoupled_linear_growth() {
        let s = SurrogateCoeffs { mu_bar: 0.0, v_bar: 0.0, ..surrogate() };
        let sys = reactor(s);
        let x0 = State7::from([0.0, 0.0, 1.0, 0.5, 0.2, 0.0, 1.0]);
        let sched = ControlSchedule::uniform(2.0, 1, 1.0, 0.0).unwrap();
        let tr = simulate(&sys, &x0, &sched, 2.0, 0.1).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x[2] - (1.0 + 0.4 * t)).abs() < 1e-12);
            assert!((x[0] - t).abs() < 1e-12);
            assert_eq!((x[3], x[4], x[5]), (0.5, 0.2, 0.0));
        }
    }

    #[test]
    fn zero_feed_zero_substrate() {
        let sys = reactor(surrogate());
        let x0 = State7::from([1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0]);
        let sched = ControlSchedule::uniform(1.0, 1, 0.0, 0.0).unwrap();
        let tr = simulate(&sys, &x0, &sched, 1.0, 0.05).unwrap();
        let x = tr.final_state();
        assert_eq!((x[2], x[3]), (0.0, 0.0));
        // x6 = 0.5·exp(mu_bar·t) so x5 gains v_bar·∫x6
        let s = surrogate();
        let expect = 0.5 * s.v_bar / s.mu_bar * ((s.mu_bar).exp() - 1.0);
        assert!((x[4] - expect).abs() < 1e-10, "{}", x[4]);
    }

    #[test]
    fn volume_is_affine_and_grid_has_knots() {
        let sys = reactor(surrogate());
        let x0 = State7::from([0.5, 0.5, 2.0, 1.0, 0.0, 0.3, 1.5]);
        let sched = ControlSchedule::new(vec![0.0, 0.37, 1.0], vec![1.0, 0.2], vec![0.0, 0.6], None).unwrap();
        let tr = simulate(&sys, &x0, &sched, 1.0, 0.1).unwrap();
        assert!(tr.times.contains(&0.37));
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert_eq!(x[6], 1.5 + 0.4 * t);
        }
        assert_eq!(tr.controls.len() + 1, tr.len());
    }

    #[test]
    fn productivity_values() {
        let mut x = State7::from([1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(psi(&x).unwrap(), 0.0);
        x[4] = 3.0;
        let a = psi(&x).unwrap();
        x[4] = 6.0;
        assert_eq!(psi(&x).unwrap(), 2.0 * a);
        x[0] = 0.0;
        x[1] = 0.0;
        assert!(matches!(psi(&x), Err(DynamicsError::Region(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let k = kinetics();
        let s = surrogate();
        let x = State7::from([0.3, 0.2, 4.0, 1.5, 0.7, 0.9, 2.5]);
        let j = affine_jacobian(&k, &s, &x).unwrap();
        for c in 0..7 {
            let d = 1e-6 * (1.0 + x[c].abs());
            let mut xp = x;
            let mut xm = x;
            xp[c] += d;
            xm[c] -= d;
            let fd = (affine_drift(&k, &s, 0.4, &xp).unwrap() - affine_drift(&k, &s, 0.4, &xm).unwrap()) / (2.0 * d);
            for r in 0..7 {
                assert!((fd[r] - j[(r, c)]).abs() < 1e-7 * (1.0 + j[(r, c)].abs()), "({r},{c})");
            }
        }
    }
}
