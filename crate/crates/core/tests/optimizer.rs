mod common;

use common::*;
use fedbatch::adjoint::integrate_adjoint;
use fedbatch::dynamics::{simulate, State7};
use fedbatch::optimizer::{adjoint_gradient, optimize_feed, refine_to_bang, FeedProblem, Objective, OptimizationSetup};
use fedbatch::surrogate::SurrogateCoeffs;

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let sys = reactor(kinetics(), surrogate(), 0.2);
    let x0 = State7::from([0.2, 0.2, 3.0, 2.0, 0.0, 0.3, 1.0]);
    let problem = FeedProblem { system: &sys, x0, t_final: 6.0, step: 0.01 };
    let v = [0.3, 0.6, 0.2, 0.7, 0.4, 0.5];
    let sched = problem.schedule(&v).unwrap();
    let rec = integrate_adjoint(&sys, &simulate(&sys, &x0, &sched, 6.0, 0.01).unwrap()).unwrap();
    let g = adjoint_gradient(&rec, &sched);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..v.len() {
        let (mut p, mut m) = (v, v);
        p[i] += 1e-5;
        m[i] -= 1e-5;
        let fd = (problem.objective(&p).unwrap() - problem.objective(&m).unwrap()) / 2e-5;
        assert!((g[i] - fd).abs() <= 1e-3 * scale, "component {i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn bang_refinement_keeps_objective() {
    let s = SurrogateCoeffs { v_bar: 0.0, ..surrogate() };
    let sys = reactor(kinetics(), s, 0.2);
    let x0 = State7::from([0.01, 0.01, 0.0, 0.0, 0.0, 0.3, 1.0]);
    let problem = FeedProblem { system: &sys, x0, t_final: 10.0, step: 0.05 };
    let setup = OptimizationSetup { max_iterations: 60, ..OptimizationSetup::new(4, Objective::Productivity) };
    let opt = optimize_feed(&problem, &setup).unwrap();
    assert!(opt.ascent.history.windows(2).all(|w| w[1] >= w[0]));
    let refined = refine_to_bang(&opt.schedule, &opt.record);
    let v: Vec<f64> = refined.schedule.u1().iter().chain(refined.schedule.u2()).copied().collect();
    let refined_value = problem.objective(&v).unwrap();
    assert!(refined_value >= opt.value - 1e-4, "{refined_value} vs {}", opt.value);
    for (k, flags) in refined.singular_suspect.iter().enumerate() {
        for (i, suspect) in flags.iter().enumerate() {
            let u = if i == 0 { refined.schedule.u1()[k] } else { refined.schedule.u2()[k] };
            assert!(*suspect || u == 0.0 || u == 1.0);
        }
    }
}
