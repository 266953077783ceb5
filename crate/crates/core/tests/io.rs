mod common;

use common::*;
use fedbatch::dynamics::simulate;
use fedbatch::io::{read_schedule, read_trajectory, write_schedule, write_trajectory};

#[test]
fn trajectory_csv_round_trips_exactly() {
    let case = smooth_cases(41, 1).pop().unwrap();
    let traj = simulate(&case.system, &case.x0, &case.schedule, case.t_final, 0.05).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &traj).unwrap();
    let back = read_trajectory(buf.as_slice()).unwrap();
    assert_eq!(back.times, traj.times);
    assert_eq!(back.states, traj.states);
    assert_eq!(back.controls, traj.controls);
    assert_eq!(back.mu, traj.mu);
}

#[test]
fn schedule_csv_round_trips_exactly() {
    let mut r = rng(42);
    let sched = random_schedule(&mut r, 7.5, 6);
    let mut buf = Vec::new();
    write_schedule(&mut buf, &sched).unwrap();
    assert_eq!(read_schedule(buf.as_slice()).unwrap(), sched);
}
