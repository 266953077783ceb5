//! Oxygen as a third control on the reduced state `(x3, x4, x5, x6, x7)`.
//!
//! Growth and ethanol secretion are modulated by `σ(u3)`:
//! `μ = μ̃·σ(u3)`, `v_e = ṽ_e/σ(u3)`, with `μ̃`, `ṽ_e` the affine
//! surrogate in the uptake rates and `σ = α + β·v_o(u3)`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::kinetics::{KineticParams, KineticsError, Rate, ScaledPoint};
use crate::ode::{hermite, rk4_step, time_grid};
use crate::schedule::ControlSchedule;
use crate::surrogate::SurrogateCoeffs;

pub type State5 = SVector<f64, 5>;
pub type Covector5 = SVector<f64, 5>;
type Matrix5 = SMatrix<f64, 5, 5>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OxygenError {
    #[error("sigma.{field} must be > 0 (got {value})")]
    InvalidSigma { field: &'static str, value: f64 },
    #[error("u3 = {0} outside [0, 1]")]
    ControlRange(f64),
    #[error("sigma value {value} outside [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("singular oxygen control needs l5·l6 > 0 and positive mu, v_e (got l5 = {l5}, l6 = {l6})")]
    Precondition { l5: f64, l6: f64 },
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// `σ(u3) = α + β·v_o(u3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SigmaParams {
    pub fn validate(&self) -> Result<(), OxygenError> {
        if !(self.alpha > 0.0) {
            return Err(OxygenError::InvalidSigma { field: "alpha", value: self.alpha });
        }
        if !(self.beta > 0.0) {
            return Err(OxygenError::InvalidSigma { field: "beta", value: self.beta });
        }
        Ok(())
    }

    /// `σ(0)`.
    pub fn lower(&self) -> f64 {
        self.alpha
    }

    /// `lim σ(u3)` as `u3 → ∞`.
    pub fn limit(&self, k: &KineticParams) -> f64 {
        self.alpha + self.beta * k.v_omax
    }

    pub fn sigma(&self, k: &KineticParams, u3: f64) -> Result<f64, OxygenError> {
        if !(0.0..=1.0).contains(&u3) {
            return Err(OxygenError::ControlRange(u3));
        }
        Ok(self.alpha + self.beta * k.v_o(u3)?)
    }

    pub fn sigma_prime(&self, k: &KineticParams, u3: f64) -> f64 {
        let d = k.k_o + u3;
        self.beta * k.v_omax * k.k_o / (d * d)
    }

    /// Inverse of `σ` on `[σ(0), σ(1)]`.
    pub fn sigma_inverse(&self, k: &KineticParams, s: f64) -> Result<f64, OxygenError> {
        let lo = self.alpha;
        let hi = self.sigma(k, 1.0)?;
        let tol = 1e-12 * hi;
        if !(s >= lo - tol && s <= hi + tol) {
            return Err(OxygenError::Range { value: s, lo, hi });
        }
        let v_o = ((s - self.alpha) / self.beta).max(0.0);
        Ok((k.k_o * v_o / (k.v_omax - v_o)).clamp(0.0, 1.0))
    }
}

/// `∂H/∂u3 = x6·σ'(u3)·(−λ5·ṽ_e/σ² + λ6·μ̃)`.
pub fn dh_du3(
    k: &KineticParams,
    sigma: &SigmaParams,
    x6: f64,
    l5: f64,
    l6: f64,
    u3: f64,
    mu_t: f64,
    ve_t: f64,
) -> Result<f64, OxygenError> {
    let s = sigma.sigma(k, u3)?;
    Ok(x6 * sigma.sigma_prime(k, u3) * (-l5 * ve_t / (s * s) + l6 * mu_t))
}

/// Magnitude used to judge `∂H/∂u3 ≈ 0`.
pub fn dh_du3_scale(k: &KineticParams, sigma: &SigmaParams, x6: f64, l5: f64, l6: f64, u3: f64, mu_t: f64, ve_t: f64) -> f64 {
    let s = sigma.sigma(k, u3.clamp(0.0, 1.0)).unwrap_or(sigma.alpha);
    x6.abs() * sigma.sigma_prime(k, u3) * ((l5 * ve_t).abs() / (s * s) + (l6 * mu_t).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularU3 {
    Attainable(f64),
    Unattainable(Side),
}

/// `u3 = σ⁻¹(√(λ5·ṽ_e/(λ6·μ̃)))` when the root lies in `[σ(0), σ(1)]`.
pub fn singular_u3(
    k: &KineticParams,
    sigma: &SigmaParams,
    l5: f64,
    l6: f64,
    mu_t: f64,
    ve_t: f64,
) -> Result<SingularU3, OxygenError> {
    let ratio = (l5 * ve_t) / (l6 * mu_t);
    if !(l5 * l6 > 0.0) || !(ratio > 0.0) || !ratio.is_finite() {
        return Err(OxygenError::Precondition { l5, l6 });
    }
    let target = ratio.sqrt();
    let lo = sigma.lower();
    let hi = sigma.sigma(k, 1.0)?;
    let tol = 1e-12 * hi;
    if target < lo - tol {
        Ok(SingularU3::Unattainable(Side::Below))
    } else if target > hi + tol {
        Ok(SingularU3::Unattainable(Side::Above))
    } else {
        Ok(SingularU3::Attainable(sigma.sigma_inverse(k, target.clamp(lo, hi))?))
    }
}

/// Maximizer of `H` at the final time, where `λ = (0, 0, 1, 0, 0)`.
pub fn terminal_u3(ve_t: f64) -> f64 {
    if ve_t > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Reduced system with fixed feed schedule and oxygen control `u3`.
#[derive(Debug, Clone, PartialEq)]
pub struct OxygenProblem {
    pub kinetics: KineticParams,
    pub feed_rate: f64,
    pub surrogate: SurrogateCoeffs,
    pub sigma: SigmaParams,
}

/// Rates at a reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFluxes {
    pub v_g: f64,
    pub v_z: f64,
    pub mu_t: f64,
    pub ve_t: f64,
}

impl OxygenProblem {
    pub fn fluxes(&self, x: &State5) -> Result<ReducedFluxes, KineticsError> {
        let k = &self.kinetics;
        let v_g = k.v_g_scaled(x[0], x[2], x[4])?;
        let v_z = k.v_z_scaled(x[0], x[1], x[2], x[4])?;
        Ok(ReducedFluxes { v_g, v_z, mu_t: self.surrogate.mu(v_g, v_z), ve_t: self.surrogate.v_e(v_g, v_z) })
    }

    /// Right-hand side with controls `(u1, u2, u3)`.
    pub fn rhs(&self, x: &State5, u: [f64; 3]) -> Result<State5, OxygenError> {
        let fl = self.fluxes(x)?;
        let s = self.sigma.sigma(&self.kinetics, u[2])?;
        let f = self.feed_rate;
        Ok(State5::from([
            f * u[0] - fl.v_g * x[3],
            f * u[1] - fl.v_z * x[3],
            fl.ve_t * x[3] / s,
            fl.mu_t * x[3] * s,
            f,
        ]))
    }

    pub fn hamiltonian(&self, x: &State5, lam: &Covector5, u: [f64; 3]) -> Result<f64, OxygenError> {
        Ok(lam.dot(&self.rhs(x, u)?))
    }

    pub fn jacobian(&self, x: &State5, u3: f64) -> Result<Matrix5, OxygenError> {
        let k = &self.kinetics;
        let p = ScaledPoint::new(x[0], x[1], x[2], x[4]);
        let g = k.partials(p, Rate::Glucose)?;
        let z = k.partials(p, Rate::Xylose)?;
        let sg = self.sigma.sigma(k, u3)?;
        let s = &self.surrogate;
        let x6 = x[3];
        let mut j = Matrix5::zeros();
        let (dg, dz) = (g.as_array(), z.as_array());
        for (c, col) in [0usize, 1, 2, 4].into_iter().enumerate() {
            j[(0, col)] = -x6 * dg[c];
            j[(1, col)] = -x6 * dz[c];
            j[(2, col)] = x6 * (s.b1 * dg[c] + s.b2 * dz[c]) / sg;
            j[(3, col)] = x6 * (s.a1 * dg[c] + s.a2 * dz[c]) * sg;
        }
        j[(0, 3)] = -g.value;
        j[(1, 3)] = -z.value;
        j[(2, 3)] = s.v_e(g.value, z.value) / sg;
        j[(3, 3)] = s.mu(g.value, z.value) * sg;
        Ok(j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OxygenTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<State5>,
    /// `(u1, u2, u3)` on `[times[k], times[k+1]]`.
    pub controls: Vec<[f64; 3]>,
}

/// Fixed-step RK4 for the reduced system. `u3` defaults to zero when the
/// schedule carries none.
pub fn simulate_oxygen(
    prob: &OxygenProblem,
    x0: &State5,
    sched: &ControlSchedule,
    t_f: f64,
    h: f64,
) -> Result<OxygenTrajectory, DynamicsError> {
    if !(h > 0.0) || !(t_f > 0.0) {
        return Err(DynamicsError::Invalid(format!("need t_f > 0 and h > 0 (got t_f = {t_f}, h = {h})")));
    }
    if x0.iter().take(4).any(|v| !(*v >= 0.0)) || !(x0[4] > 0.0) {
        return Err(DynamicsError::Invalid(format!("initial state {:?} is outside the domain", x0.as_slice())));
    }
    let grid = time_grid(t_f, h, sched.knots());
    let eps = 1e-8 * (1.0 + x0.norm());
    let (x7_0, f) = (x0[4], prob.feed_rate);
    let mut out = OxygenTrajectory { times: vec![0.0], states: vec![*x0], controls: Vec::new() };
    let mut x = *x0;
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        let [u1, u2] = sched.at(mid);
        let u = [u1, u2, sched.u3_at(mid).unwrap_or(0.0)];
        let mut y = rk4_step(t0, &x, t1 - t0, |t, z: &State5| {
            let mut z = *z;
            z[4] = x7_0 + f * t;
            prob.rhs(&z, u).map_err(|e| match e {
                OxygenError::Kinetics(k) => DynamicsError::Kinetics(k),
                other => DynamicsError::Invalid(other.to_string()),
            })
        })?;
        y[4] = x7_0 + f * t1;
        if let Some(i) = y.iter().take(4).position(|v| !(*v >= -eps)) {
            return Err(DynamicsError::Domain { time: t1, component: i + 3, value: y[i] });
        }
        x = y;
        let mut shown = y;
        shown.iter_mut().take(4).for_each(|v| *v = v.max(0.0));
        out.times.push(t1);
        out.states.push(shown);
        out.controls.push(u);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OxygenRecord {
    pub trajectory: OxygenTrajectory,
    pub covectors: Vec<Covector5>,
    pub dh_du3: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub mu_t: Vec<f64>,
    pub ve_t: Vec<f64>,
}

impl OxygenRecord {
    pub fn switching_tolerance(&self) -> f64 {
        1e-6 * self.covectors.last().map_or(0.0, |l| l.norm())
    }
}

fn lift(e: OxygenError) -> DynamicsError {
    match e {
        OxygenError::Kinetics(k) => DynamicsError::Kinetics(k),
        other => DynamicsError::Invalid(other.to_string()),
    }
}

/// Backward costate integration from `λ(t_f) = (0, 0, 1, 0, 0)`.
pub fn integrate_oxygen_adjoint(prob: &OxygenProblem, traj: &OxygenTrajectory) -> Result<OxygenRecord, DynamicsError> {
    let n = traj.times.len();
    if n < 2 {
        return Err(DynamicsError::Invalid("trajectory needs at least two samples".into()));
    }
    let mut covectors = vec![Covector5::zeros(); n];
    covectors[n - 1] = Covector5::from([0.0, 0.0, 1.0, 0.0, 0.0]);
    for k in (0..n - 1).rev() {
        let u = traj.controls[k];
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let (x0, x1) = (traj.states[k], traj.states[k + 1]);
        let d0 = prob.rhs(&x0, u).map_err(lift)?;
        let d1 = prob.rhs(&x1, u).map_err(lift)?;
        covectors[k] = rk4_step(t1, &covectors[k + 1], t0 - t1, |t, l: &Covector5| {
            let x = hermite(t0, &x0, &d0, t1, &x1, &d1, t);
            Ok::<_, DynamicsError>(-(prob.jacobian(&x, u[2]).map_err(lift)?.transpose() * l))
        })?;
    }
    let mut rec = OxygenRecord {
        trajectory: traj.clone(),
        covectors,
        dh_du3: Vec::with_capacity(n),
        hamiltonian: Vec::with_capacity(n),
        mu_t: Vec::with_capacity(n),
        ve_t: Vec::with_capacity(n),
    };
    for k in 0..n {
        let u = traj.controls[k.min(n - 2)];
        let x = &traj.states[k];
        let l = &rec.covectors[k];
        let fl = prob.fluxes(x)?;
        rec.dh_du3.push(dh_du3(&prob.kinetics, &prob.sigma, x[3], l[2], l[3], u[2], fl.mu_t, fl.ve_t).map_err(lift)?);
        rec.hamiltonian.push(prob.hamiltonian(x, l, u).map_err(lift)?);
        rec.mu_t.push(fl.mu_t);
        rec.ve_t.push(fl.ve_t);
    }
    Ok(rec)
}

/// Determinant of the homogeneous system in `(λ3, λ4)`
/// `∂v_g/∂x5·λ3 + ∂v_z/∂x5·λ4 = 0`, `v_g·λ3 + v_z·λ4 = 0`, and its ratio to
/// `x3·x4·(k_ie_g − k_ie_z)` (`None` where that product vanishes).
pub fn homogeneous_determinant(k: &KineticParams, x: &State5) -> Result<(f64, Option<f64>), KineticsError> {
    let p = ScaledPoint::new(x[0], x[1], x[2], x[4]);
    let g = k.partials(p, Rate::Glucose)?;
    let z = k.partials(p, Rate::Xylose)?;
    let det = g.d_x5 * z.value - z.d_x5 * g.value;
    let reference = x[0] * x[1] * (k.k_ie_g - k.k_ie_z);
    Ok((det, (reference != 0.0).then(|| det / reference)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prop2Branch {
    /// `x3 ≡ 0` with `λ4 ≡ 0`.
    GlucoseEmpty,
    /// `x4 ≡ 0` with `λ3 ≡ 0`.
    XyloseEmpty,
    /// Both substrates present somewhere on the arc.
    BothPresent,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Arc {
    pub t_start: f64,
    pub t_end: f64,
    pub branch: Prop2Branch,
    /// Smallest and largest determinant ratio where `x3·x4 > 0`.
    pub determinant_ratio: Option<[f64; 2]>,
    pub lambda7_drift: f64,
    /// `max |λ4|` on the glucose branch, `max |λ3|` on the xylose branch.
    pub vanishing_component_max: f64,
    /// Relative mismatch of the surviving component against the
    /// exponential solution of its linear ODE.
    pub ode_residual: Option<f64>,
    /// Relative mismatch against `λ(a)·∫₀ᵗ x6·∂v/∂x ds`.
    pub integral_form_residual: Option<f64>,
    /// Both substrates present force `λ ≡ 0`, contradicting `λ5(t_f) = 1`.
    pub contradiction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Report {
    pub inhibition_constants_differ: bool,
    pub substrate_present: bool,
    pub glucose_zero_intervals: usize,
    pub xylose_zero_intervals: usize,
    pub eps_sw: f64,
    pub arcs: Vec<Prop2Arc>,
    pub notes: Vec<String>,
}

/// Maximal runs of `pred` after merging gaps shorter than `hysteresis`.
fn zero_runs(mask: &[bool], hysteresis: usize) -> Vec<(usize, usize)> {
    let mut filled = mask.to_vec();
    let mut k = 0;
    while k < mask.len() {
        if !mask[k] {
            let start = k;
            while k < mask.len() && !mask[k] {
                k += 1;
            }
            if start > 0 && k < mask.len() && k - start <= hysteresis {
                filled[start..k].iter_mut().for_each(|v| *v = true);
            }
        } else {
            k += 1;
        }
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k < filled.len() {
        if filled[k] {
            let s = k;
            while k + 1 < filled.len() && filled[k + 1] {
                k += 1;
            }
            out.push((s, k));
        }
        k += 1;
    }
    out
}

fn trapezoid(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; f.len()];
    for i in 1..f.len() {
        acc[i] = acc[i - 1] + 0.5 * (times[i] - times[i - 1]) * (f[i] + f[i - 1]);
    }
    acc
}

/// Checks on arcs where `λ5` and `λ6` both vanish.
pub fn check_prop2(prob: &OxygenProblem, rec: &OxygenRecord) -> Prop2Report {
    let k = &prob.kinetics;
    let times = &rec.trajectory.times;
    let states = &rec.trajectory.states;
    let n = times.len();
    let eps_state = 1e-8 * (1.0 + states.first().map_or(0.0, |x| x.norm()));
    let eps_sw = rec.switching_tolerance().max(f64::MIN_POSITIVE);
    let g0: Vec<bool> = states.iter().map(|x| x[0].abs() <= eps_state).collect();
    let z0: Vec<bool> = states.iter().map(|x| x[1].abs() <= eps_state).collect();
    let mut report = Prop2Report {
        inhibition_constants_differ: k.k_ie_g != k.k_ie_z,
        substrate_present: (1..n.saturating_sub(1)).all(|i| states[i][0] + states[i][1] > 0.0),
        glucose_zero_intervals: zero_runs(&g0, 2).len(),
        xylose_zero_intervals: zero_runs(&z0, 2).len(),
        eps_sw,
        arcs: Vec::new(),
        notes: Vec::new(),
    };
    if !report.inhibition_constants_differ {
        report.notes.push("k_ie_g equals k_ie_z; the determinant vanishes identically".into());
    }
    if !report.substrate_present {
        report.notes.push("x3 + x4 vanishes inside the horizon".into());
    }
    let null: Vec<bool> = rec.covectors.iter().map(|l| l[2].abs() <= eps_sw && l[3].abs() <= eps_sw).collect();
    for (a, b) in zero_runs(&null, 0).into_iter().filter(|(a, b)| b - a >= 2) {
        let span = a..=b;
        let l7: Vec<f64> = rec.covectors[span.clone()].iter().map(|l| l[4]).collect();
        let lambda7_drift = l7.iter().copied().fold(f64::NEG_INFINITY, f64::max) - l7.iter().copied().fold(f64::INFINITY, f64::min);
        let ratios: Vec<f64> = span
            .clone()
            .filter(|&i| states[i][0] * states[i][1] > eps_state * eps_state)
            .filter_map(|i| homogeneous_determinant(k, &states[i]).ok().and_then(|r| r.1))
            .collect();
        let determinant_ratio = (!ratios.is_empty()).then(|| {
            [ratios.iter().copied().fold(f64::INFINITY, f64::min), ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
        });
        let all_g0 = g0[span.clone()].iter().all(|v| *v);
        let all_z0 = z0[span.clone()].iter().all(|v| *v);
        let both = span.clone().any(|i| states[i][0] > eps_state && states[i][1] > eps_state);
        let (branch, surviving, vanishing, rate) = if all_g0 {
            (Prop2Branch::GlucoseEmpty, 0, 1, Rate::Glucose)
        } else if all_z0 {
            (Prop2Branch::XyloseEmpty, 1, 0, Rate::Xylose)
        } else if both {
            (Prop2Branch::BothPresent, 0, 1, Rate::Glucose)
        } else {
            (Prop2Branch::Unclassified, 0, 1, Rate::Glucose)
        };
        let vanishing_component_max = rec.covectors[span.clone()].iter().map(|l| l[vanishing].abs()).fold(0.0, f64::max);
        let (mut ode_residual, mut integral_form_residual) = (None, None);
        if matches!(branch, Prop2Branch::GlucoseEmpty | Prop2Branch::XyloseEmpty) {
            let slope: Option<Vec<f64>> = (0..=b)
                .map(|i| {
                    let x = &states[i];
                    let p = ScaledPoint::new(x[0], x[1], x[2], x[4]);
                    k.partials(p, rate).ok().map(|d| x[3] * if rate == Rate::Glucose { d.d_x3 } else { d.d_x4 })
                })
                .collect();
            if let Some(slope) = slope {
                let cum = trapezoid(&times[..=b], &slope);
                let la = rec.covectors[a][surviving];
                let scale = rec.covectors[span.clone()].iter().map(|l| l[surviving].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                let mut ode = 0.0f64;
                let mut integral = 0.0f64;
                for i in span.clone() {
                    let actual = rec.covectors[i][surviving];
                    ode = ode.max((actual - la * (cum[i] - cum[a]).exp()).abs() / scale);
                    integral = integral.max((actual - la * cum[i]).abs() / scale);
                }
                ode_residual = Some(ode);
                integral_form_residual = Some(integral);
            }
        }
        report.arcs.push(Prop2Arc {
            t_start: times[a],
            t_end: times[b],
            branch,
            determinant_ratio,
            lambda7_drift,
            vanishing_component_max,
            ode_residual,
            integral_form_residual,
            contradiction: both,
        });
    }
    if report.arcs.iter().any(|a| a.integral_form_residual.is_some()) {
        report.notes.push(
            "surviving costate checked against both the exponential ODE solution and the integral form; \
             the two disagree in general"
                .into(),
        );
    }
    report
}
