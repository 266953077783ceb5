use std::path::Path;

use fedbatch::oxygen::{check_prop2, integrate_oxygen_adjoint, simulate_oxygen, terminal_u3};
use fedbatch::scenario::load_scenario;

#[test]
fn oxygen_scenario_extremal_is_consistent() {
    let sc = load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/oxygen.json")).unwrap();
    let prob = sc.oxygen_problem().unwrap();
    let sched = sc.fixed_schedule.clone().unwrap();
    let traj = simulate_oxygen(&prob, &sc.reduced_x0(), &sched, sc.t_final, sc.step).unwrap();
    let x7 = traj.states.iter().map(|x| x[4]);
    for (t, v) in traj.times.iter().zip(x7) {
        assert_eq!(v, sc.x0[6] + sc.feed_rate * t);
    }
    let rec = integrate_oxygen_adjoint(&prob, &traj).unwrap();
    let last = rec.covectors.last().unwrap();
    assert_eq!(last.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    let ve = *rec.ve_t.last().unwrap();
    assert!(ve > 0.0);
    assert_eq!(terminal_u3(ve), 0.0);
    let report = check_prop2(&prob, &rec);
    assert!(report.inhibition_constants_differ);
}
