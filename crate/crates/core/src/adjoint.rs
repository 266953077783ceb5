//! Costate equations, switching functions and the maximization check.

use crate::dynamics::{
    affine_drift, affine_jacobian, control_fields, Bioreactor, Covector7, DynamicsError, Evaluator, State7,
    Trajectory,
};
use crate::ode::{hermite, rk4_step};
use crate::schedule::ControlSchedule;
use crate::surrogate::SurrogateCoeffs;

/// `∇ψ` at the final state, `ψ = x5/(x1 + x2)`.
pub fn transversality(x: &State7) -> Result<Covector7, DynamicsError> {
    let d = x[0] + x[1];
    if !(d > 0.0) {
        return Err(DynamicsError::Region(d));
    }
    let l1 = -x[4] / (d * d);
    Ok(Covector7::from([l1, l1, 0.0, 0.0, 1.0 / d, 0.0, 0.0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalRecord {
    pub trajectory: Trajectory,
    pub feed_rate: f64,
    pub covectors: Vec<Covector7>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    /// `H` with the right-continuous control at each sample.
    pub hamiltonian: Vec<f64>,
    /// `H` at both ends of each sample interval, using that interval's control.
    pub interval_hamiltonian: Vec<[f64; 2]>,
    /// Affine metabolic model used on each sample interval.
    pub coeffs: Vec<SurrogateCoeffs>,
}

impl ExtremalRecord {
    /// Default switching tolerance `1e-6·|λ(t_f)|`.
    pub fn switching_tolerance(&self) -> f64 {
        1e-6 * self.covectors.last().map_or(0.0, |l| l.norm())
    }

    /// Largest spread of `H` over any stretch of constant control, together
    /// with the bound `1e-5·(1 + |H(0)|)`.
    pub fn hamiltonian_spread(&self) -> (f64, f64) {
        let controls = &self.trajectory.controls;
        let mut worst = 0.0f64;
        let mut k = 0;
        while k < controls.len() {
            let mut end = k;
            while end + 1 < controls.len() && controls[end + 1] == controls[k] {
                end += 1;
            }
            let vals = self.interval_hamiltonian[k..=end].iter().flatten();
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            worst = worst.max(hi - lo);
            k = end + 1;
        }
        (worst, 1e-5 * (1.0 + self.hamiltonian.first().map_or(0.0, |h| h.abs())))
    }
}

/// Backward RK4 of `λ' = −(∂F0/∂x)ᵀ λ` over the trajectory samples, with
/// states between samples taken from cubic Hermite interpolation. Network
/// models use the basis sensitivity at each interval's midpoint.
pub fn integrate_adjoint(sys: &Bioreactor, traj: &Trajectory) -> Result<ExtremalRecord, DynamicsError> {
    let n = traj.len();
    if n < 2 || traj.controls.len() + 1 != n {
        return Err(DynamicsError::Invalid("trajectory needs at least two samples and one control per interval".into()));
    }
    for k in 0..n - 1 {
        if traj.basis[k] != traj.basis[k + 1] && !traj.events.iter().any(|e| e.time == traj.times[k + 1]) {
            return Err(DynamicsError::Invalid(format!(
                "basis changes between t = {} and t = {} h without a location event; integrate per location",
                traj.times[k],
                traj.times[k + 1]
            )));
        }
    }
    let k_par = &sys.kinetics;
    let feed = sys.feed_rate;
    let [f1, f2] = control_fields(feed);
    let mut ev = Evaluator::new(sys);
    let coeffs = (0..n - 1)
        .map(|k| ev.local_coeffs(&((traj.states[k] + traj.states[k + 1]) * 0.5)))
        .collect::<Result<Vec<_>, _>>()?;

    let lam_f = transversality(traj.final_state())?;
    let mut covectors = vec![Covector7::zeros(); n];
    covectors[n - 1] = lam_f;
    let mut interval_hamiltonian = vec![[0.0; 2]; n - 1];
    for k in (0..n - 1).rev() {
        let s = &coeffs[k];
        let u = traj.controls[k];
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let (x0, x1) = (traj.states[k], traj.states[k + 1]);
        let g = f1 * u[0] + f2 * u[1];
        let d0 = affine_drift(k_par, s, feed, &x0)? + g;
        let d1 = affine_drift(k_par, s, feed, &x1)? + g;
        let lam1 = covectors[k + 1];
        let mut lam0 = rk4_step(t1, &lam1, t0 - t1, |t, l: &Covector7| {
            let x = hermite(t0, &x0, &d0, t1, &x1, &d1, t);
            Ok::<_, DynamicsError>(-(affine_jacobian(k_par, s, &x)?.transpose() * l))
        })?;
        lam0[0] = lam_f[0];
        lam0[1] = lam_f[1];
        covectors[k] = lam0;
        interval_hamiltonian[k] = [lam0.dot(&d0), lam1.dot(&d1)];
    }

    let phi1 = covectors.iter().map(|l| l[0] + feed * l[2]).collect();
    let phi2 = covectors.iter().map(|l| l[1] + feed * l[3]).collect();
    let hamiltonian = (0..n).map(|k| interval_hamiltonian[k.min(n - 2)][usize::from(k == n - 1)]).collect();
    Ok(ExtremalRecord {
        trajectory: traj.clone(),
        feed_rate: feed,
        covectors,
        phi1,
        phi2,
        hamiltonian,
        interval_hamiltonian,
        coeffs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizationReport {
    pub samples: usize,
    pub violations: usize,
    pub eps_sw: f64,
    /// `u_i = (1 + sign φ_i)/2` per sample, `None` inside the tolerance band.
    pub bang_law: Vec<[Option<f64>; 2]>,
    pub violating_samples: Vec<usize>,
}

impl MaximizationReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.violating_samples.len() as f64 / self.samples as f64
        }
    }
}

fn bang(phi: f64, eps: f64) -> Option<f64> {
    (phi.abs() > eps).then(|| if phi > 0.0 { 1.0 } else { 0.0 })
}

/// Compares the schedule with the bang law implied by the switching
/// functions. `violations` counts offending (sample, control) pairs.
pub fn check_maximization(rec: &ExtremalRecord, sched: &ControlSchedule) -> MaximizationReport {
    check_maximization_with(rec, sched, rec.switching_tolerance())
}

pub fn check_maximization_with(rec: &ExtremalRecord, sched: &ControlSchedule, eps_sw: f64) -> MaximizationReport {
    let mut report = MaximizationReport {
        samples: rec.phi1.len(),
        violations: 0,
        eps_sw,
        bang_law: Vec::with_capacity(rec.phi1.len()),
        violating_samples: Vec::new(),
    };
    for (k, &t) in rec.trajectory.times.iter().enumerate() {
        let u = sched.at(t);
        let law = [bang(rec.phi1[k], eps_sw), bang(rec.phi2[k], eps_sw)];
        let bad = law.iter().zip(u).filter(|(b, ui)| b.is_some_and(|b| (b - ui).abs() > 1e-12)).count();
        if bad > 0 {
            report.violations += bad;
            report.violating_samples.push(k);
        }
        report.bang_law.push(law);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, tests::*};
    use crate::kinetics::KineticParams;

    #[test]
    fn transversality_examples() {
        let l = transversality(&State7::from([0.5, 0.5, 1.0, 1.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let l = transversality(&State7::from([1.5, 0.5, 1.0, 1.0, 4.0, 1.0, 1.0])).unwrap();
        assert_eq!(l.as_slice(), &[-1.0, -1.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn transversality_is_gradient_of_psi() {
        let x = State7::from([0.7, 0.4, 2.0, 1.0, 3.1, 1.0, 1.0]);
        let l = transversality(&x).unwrap();
        for i in 0..7 {
            let d = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += d;
            xm[i] -= d;
            let fd = (xp[4] / (xp[0] + xp[1]) - xm[4] / (xm[0] + xm[1])) / (2.0 * d);
            assert!((fd - l[i]).abs() < 1e-6, "{i}");
        }
    }

    #[test]
    fn constant_metabolism_only_moves_l6() {
        let mut sys = reactor(SurrogateCoeffs { a1: 0.0, a2: 0.0, b1: 0.0, b2: 0.0, mu_bar: 0.1, v_bar: 0.3 });
        sys.kinetics = KineticParams { v_gmax: 0.0, v_zmax: 0.0, ..sys.kinetics };
        let x0 = State7::from([0.5, 0.5, 2.0, 1.0, 0.0, 0.5, 1.0]);
        let sched = ControlSchedule::uniform(1.0, 1, 0.5, 0.5).unwrap();
        let tr = simulate(&sys, &x0, &sched, 1.0, 0.05).unwrap();
        let rec = integrate_adjoint(&sys, &tr).unwrap();
        let last = rec.covectors.last().unwrap();
        for l in &rec.covectors {
            for i in [2, 3, 4, 6] {
                assert!((l[i] - last[i]).abs() < 1e-14);
            }
        }
        assert!((rec.covectors[0][5] - last[5]).abs() > 1e-3);
    }

    #[test]
    fn l1_l2_identity_and_phi_reassembly() {
        let sys = reactor(surrogate());
        let x0 = State7::from([0.2, 0.1, 3.0, 2.0, 0.0, 0.4, 1.0]);
        let sched = ControlSchedule::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0], vec![0.3, 1.0], None).unwrap();
        let tr = simulate(&sys, &x0, &sched, 2.0, 0.02).unwrap();
        let rec = integrate_adjoint(&sys, &tr).unwrap();
        let xf = tr.final_state();
        let l1 = -xf[4] / (xf[0] + xf[1]).powi(2);
        for (k, l) in rec.covectors.iter().enumerate() {
            assert_eq!((l[0], l[1]), (l1, l1));
            assert_eq!(rec.phi1[k], l[0] + 0.4 * l[2]);
            assert_eq!(rec.phi2[k], l[1] + 0.4 * l[3]);
        }
        let (spread, bound) = rec.hamiltonian_spread();
        assert!(spread <= bound, "{spread} > {bound}");
    }

    #[test]
    fn maximization_flags() {
        let sys = reactor(surrogate());
        let x0 = State7::from([0.2, 0.1, 3.0, 2.0, 0.0, 0.4, 1.0]);
        let sched = ControlSchedule::uniform(1.0, 1, 1.0, 0.0).unwrap();
        let tr = simulate(&sys, &x0, &sched, 1.0, 0.05).unwrap();
        let mut rec = integrate_adjoint(&sys, &tr).unwrap();
        let eps = rec.switching_tolerance();
        rec.phi1.iter_mut().for_each(|p| *p = 10.0 * eps + 1.0);
        rec.phi2.iter_mut().for_each(|p| *p = -1.0);
        assert_eq!(check_maximization(&rec, &sched).violations, 0);
        let off = ControlSchedule::uniform(1.0, 1, 0.0, 0.0).unwrap();
        let r = check_maximization(&rec, &off);
        assert_eq!(r.violating_samples.len(), rec.phi1.len());
    }
}
