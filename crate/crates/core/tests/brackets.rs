mod common;

use common::*;
use fedbatch::dynamics::State7;
use fedbatch::singular::{bracket_terms, doubly_singular_covector, f0_f0_f2_closed_form};

#[test]
fn analytic_brackets_match_nested_differences() {
    let mut r = rng(21);
    for _ in 0..40 {
        let k = random_kinetics(&mut r);
        let s = random_surrogate(&mut r);
        let feed = uniform(&mut r, 0.1, 1.0);
        let x = random_interior_state(&mut r);
        let lam = State7::from_fn(|_, _| uniform(&mut r, -1.0, 1.0));
        let t = bracket_terms(&k, &s, feed, &x, &lam).unwrap();
        let (a, b) = fd_second_brackets(&k, &s, feed, &x, &lam);
        let unit = |i: usize| State7::from_fn(|j, _| f64::from(u8::from(i == j)));
        let scale: (f64, f64) = (0..7).fold((0.0, 0.0), |acc, i| {
            let (ua, ub) = fd_second_brackets(&k, &s, feed, &x, &unit(i));
            (acc.0 + (lam[i] * ua).abs(), acc.1 + (lam[i] * ub).abs())
        });
        assert!((t.f1_f0_f1 - a).abs() <= 1e-5 * scale.0.max(1e-12), "{} vs {a}", t.f1_f0_f1);
        assert!((t.f0_f0_f2 - b).abs() <= 1e-5 * scale.1.max(1e-12), "{} vs {b}", t.f0_f0_f2);
    }
}

#[test]
fn closed_form_matches_nested_differences_on_candidate_covector() {
    let mut r = rng(22);
    for _ in 0..40 {
        let k = random_kinetics(&mut r);
        let s = random_surrogate(&mut r);
        let feed = uniform(&mut r, 0.1, 1.0);
        let x = random_interior_state(&mut r);
        let l_bar = uniform(&mut r, 0.5, 2.0);
        let lam = doubly_singular_covector(&k, &s, feed, &x, l_bar, 0.3).unwrap();
        let closed = f0_f0_f2_closed_form(&k, &s, feed, &x, l_bar, l_bar);
        let (_, b) = fd_second_brackets(&k, &s, feed, &x, &lam);
        let scale: f64 = (0..7)
            .map(|i| (lam[i] * fd_second_brackets(&k, &s, feed, &x, &State7::from_fn(|j, _| f64::from(u8::from(i == j)))).1).abs())
            .sum();
        assert!((closed - b).abs() <= 1e-5 * scale, "{closed} vs {b}");
    }
}
