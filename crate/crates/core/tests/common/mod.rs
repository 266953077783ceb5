//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use fedbatch::dynamics::{affine_drift, simulate, Bioreactor, Metabolism, State7};
use fedbatch::kinetics::KineticParams;
use fedbatch::lp::MetabolicNetwork;
use fedbatch::schedule::ControlSchedule;
use fedbatch::singular::check_hypotheses;
use fedbatch::surrogate::SurrogateCoeffs;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.gen::<f64>()
}

pub fn kinetics() -> KineticParams {
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

pub fn surrogate() -> SurrogateCoeffs {
    SurrogateCoeffs { a1: 0.05, a2: 0.03, b1: 1.6, b2: 1.2, mu_bar: 0.02, v_bar: 0.1 }
}

pub fn random_kinetics(r: &mut ChaCha8Rng) -> KineticParams {
    loop {
        let k = KineticParams {
            v_omax: uniform(r, 2.0, 12.0),
            v_gmax: uniform(r, 1.0, 12.0),
            v_zmax: uniform(r, 1.0, 8.0),
            k_o: uniform(r, 0.001, 0.05),
            k_g: uniform(r, 0.1, 2.0),
            k_z: uniform(r, 0.1, 2.0),
            k_ie_g: uniform(r, 2.0, 20.0),
            k_ie_z: uniform(r, 2.0, 20.0),
            k_ig: uniform(r, 0.1, 2.0),
        };
        if (k.k_ie_g - k.k_ie_z).abs() > 0.5 {
            return k;
        }
    }
}

/// Positive yields with all three nondegeneracy quantities away from zero.
pub fn random_surrogate(r: &mut ChaCha8Rng) -> SurrogateCoeffs {
    loop {
        let s = SurrogateCoeffs {
            a1: uniform(r, 0.01, 0.1),
            a2: uniform(r, 0.01, 0.1),
            b1: uniform(r, 0.5, 2.0),
            b2: uniform(r, 0.5, 2.0),
            mu_bar: uniform(r, 0.005, 0.05),
            v_bar: uniform(r, 0.0, 0.2),
        };
        let h = check_hypotheses(&s);
        if h.holds() && h.quantities.iter().all(|q| q.value.abs() > 1e-3 * q.scale) {
            return s;
        }
    }
}

pub fn random_interior_state(r: &mut ChaCha8Rng) -> State7 {
    State7::from([
        uniform(r, 0.05, 2.0),
        uniform(r, 0.05, 2.0),
        uniform(r, 0.1, 5.0),
        uniform(r, 0.1, 5.0),
        uniform(r, 0.0, 5.0),
        uniform(r, 0.1, 2.0),
        uniform(r, 0.5, 3.0),
    ])
}

pub fn reactor(k: KineticParams, s: SurrogateCoeffs, feed: f64) -> Bioreactor {
    Bioreactor { kinetics: k, feed_rate: feed, metabolism: Metabolism::Surrogate(s), oxygen: 0.0 }
}

/// Random piecewise-constant schedule on `n` equal intervals.
pub fn random_schedule(r: &mut ChaCha8Rng, t_f: f64, n: usize) -> ControlSchedule {
    let u1 = (0..n).map(|_| r.gen::<f64>()).collect();
    let u2 = (0..n).map(|_| r.gen::<f64>()).collect();
    ControlSchedule::from_values(t_f, u1, u2).unwrap()
}

/// A smooth surrogate run used by the integrator and adjoint oracles.
pub struct Case {
    pub system: Bioreactor,
    pub x0: State7,
    pub schedule: ControlSchedule,
    pub t_final: f64,
}

/// Scenarios whose substrates stay well away from zero.
pub fn smooth_cases(seed: u64, count: usize) -> Vec<Case> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let k = random_kinetics(&mut r);
            let s = random_surrogate(&mut r);
            let feed = uniform(&mut r, 0.2, 0.6);
            let x0 = State7::from([
                uniform(&mut r, 0.1, 0.5),
                uniform(&mut r, 0.1, 0.5),
                uniform(&mut r, 4.0, 8.0),
                uniform(&mut r, 4.0, 8.0),
                uniform(&mut r, 0.0, 1.0),
                uniform(&mut r, 0.05, 0.2),
                uniform(&mut r, 1.0, 2.0),
            ]);
            let t_final = 2.0;
            let schedule = random_schedule(&mut r, t_final, 4);
            Case { system: reactor(k, s, feed), x0, schedule, t_final }
        })
        .collect()
}

/// Central finite difference of the sampled flow along `dir`.
pub fn flow_derivative(case: &Case, h: f64, dir: &State7, eps: f64) -> Vec<State7> {
    let run = |x0: State7| simulate(&case.system, &x0, &case.schedule, case.t_final, h).unwrap();
    let p = run(case.x0 + dir * eps);
    let m = run(case.x0 - dir * eps);
    p.states.iter().zip(&m.states).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
}

// ---------------------------------------------------------------------------
// Lie brackets by nested central differences of the vector fields.

fn drift(k: &KineticParams, s: &SurrogateCoeffs, feed: f64, x: &State7) -> State7 {
    affine_drift(k, s, feed, x).unwrap()
}

fn directional(f: &dyn Fn(&State7) -> State7, x: &State7, v: &State7, eps: f64) -> State7 {
    (f(&(x + v * eps)) - f(&(x - v * eps))) / (2.0 * eps)
}

/// `[X, Y] = DY·X − DX·Y` from `directional` derivatives.
pub fn fd_bracket(f: &dyn Fn(&State7) -> State7, g: &dyn Fn(&State7) -> State7, x: &State7, eps: f64) -> State7 {
    directional(g, x, &f(x), eps) - directional(f, x, &g(x), eps)
}

/// `(⟨λ,[F1,[F0,F1]]⟩, ⟨λ,[F0,[F0,F2]]⟩)` by nested differences.
pub fn fd_second_brackets(
    k: &KineticParams,
    s: &SurrogateCoeffs,
    feed: f64,
    x: &State7,
    lam: &State7,
) -> (f64, f64) {
    let f0 = |y: &State7| drift(k, s, feed, y);
    let f1 = |_: &State7| State7::from([1.0, 0.0, feed, 0.0, 0.0, 0.0, 0.0]);
    let f2 = |_: &State7| State7::from([0.0, 1.0, 0.0, feed, 0.0, 0.0, 0.0]);
    let e1 = 1e-4;
    let e2 = 1e-4;
    let f0f1 = |y: &State7| fd_bracket(&f0, &f1, y, e1);
    let f0f2 = |y: &State7| fd_bracket(&f0, &f2, y, e1);
    let a = fd_bracket(&f1, &f0f1, x, e2);
    let b = fd_bracket(&f0, &f0f2, x, e2);
    (lam.dot(&a), lam.dot(&b))
}

// ---------------------------------------------------------------------------
// Exact rational vertex enumeration for the two-stage flux balance LP.

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Integer network with a feasible interior flux by construction.
#[derive(Debug, Clone)]
pub struct IntNetwork {
    pub s: Vec<Vec<i64>>,
    /// Objective weights in halves.
    pub w_halves: Vec<i64>,
    pub ub: Vec<i64>,
    pub idx_g: usize,
    pub idx_z: usize,
    pub idx_o: Option<usize>,
    pub idx_e: usize,
    pub pins: [i64; 3],
}

impl IntNetwork {
    pub fn network(&self) -> MetabolicNetwork {
        MetabolicNetwork::new(
            self.s.iter().map(|r| r.iter().map(|v| *v as f64).collect()).collect(),
            self.w_halves.iter().map(|v| *v as f64 / 2.0).collect(),
            self.ub.iter().map(|v| *v as f64).collect(),
            self.idx_g,
            self.idx_z,
            self.idx_o,
            self.idx_e,
        )
        .unwrap()
    }
}

/// Random network with `n <= 8` fluxes and `r <= 4` metabolites. A sink
/// column makes a random integer flux `v*` feasible.
pub fn random_int_network(rg: &mut ChaCha8Rng) -> IntNetwork {
    loop {
        let r = rg.gen_range(1..=4);
        let n = rg.gen_range(4.max(r + 2)..=8);
        let aerobic = rg.gen_bool(0.5);
        let (idx_g, idx_z, idx_e) = (0, 1, n - 2);
        let idx_o = aerobic.then_some(2).filter(|&o| o < idx_e);
        let ub: Vec<i64> = (0..n).map(|_| rg.gen_range(1..=6)).collect();
        let v_star: Vec<i64> = ub.iter().map(|u| rg.gen_range(0..=*u)).collect();
        let mut s: Vec<Vec<i64>> = (0..r).map(|_| (0..n).map(|_| rg.gen_range(-2..=2)).collect()).collect();
        let sink = n - 1;
        for row in s.iter_mut() {
            row[sink] = 0;
        }
        let mut v = v_star.clone();
        v[sink] = 1;
        let mut ub = ub;
        ub[sink] = ub[sink].max(1);
        for row in s.iter_mut() {
            let acc: i64 = (0..sink).map(|j| row[j] * v[j]).sum();
            row[sink] = -acc;
        }
        let w_halves = (0..n).map(|_| rg.gen_range(0..=2)).collect();
        let zero_col = |j: usize| s.iter().all(|row| row[j] == 0);
        if [idx_g, idx_z, idx_e].iter().chain(idx_o.iter()).any(|&j| zero_col(j)) {
            continue;
        }
        let pins = [v[idx_g], v[idx_z], idx_o.map_or(0, |o| v[o])];
        return IntNetwork { s, w_halves, ub, idx_g, idx_z, idx_o, idx_e, pins };
    }
}

/// Unique solution of `M·y = b` if `M` has full column rank and the system
/// is consistent.
fn solve_exact(m: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<Q>> = m.iter().zip(b).map(|(r, bi)| r.iter().cloned().chain([bi.clone()]).collect()).collect();
    let mut pivot_row = 0;
    for c in 0..cols {
        let p = (pivot_row..rows).find(|&i| !a[i][c].is_zero())?;
        a.swap(pivot_row, p);
        let inv = a[pivot_row][c].recip();
        for v in a[pivot_row].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != pivot_row && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..=cols {
                    let d = &f * &a[pivot_row][j];
                    a[i][j] = &a[i][j] - d;
                }
            }
        }
        pivot_row += 1;
    }
    if a[pivot_row..].iter().any(|r| !r[cols].is_zero()) {
        return None;
    }
    Some((0..cols).map(|c| a[c][cols].clone()).collect())
}

/// `(μ*, v_e*)`: the largest weighted flux over all vertices, then the
/// largest ethanol flux among vertices attaining it.
pub fn vertex_oracle(net: &IntNetwork) -> Option<(Q, Q)> {
    let n = net.ub.len();
    let mut fixed: Vec<Option<Q>> = vec![None; n];
    fixed[net.idx_g] = Some(q(net.pins[0]));
    fixed[net.idx_z] = Some(q(net.pins[1]));
    if let Some(o) = net.idx_o {
        fixed[o] = Some(q(net.pins[2]));
    }
    let open: Vec<usize> = (0..n).filter(|j| fixed[*j].is_none()).collect();
    let mut vertices: Vec<Vec<Q>> = Vec::new();
    let combos = 3usize.pow(open.len() as u32);
    for code in 0..combos {
        let mut c = code;
        let mut v = fixed.clone();
        let mut free = Vec::new();
        for &j in &open {
            match c % 3 {
                0 => v[j] = Some(Q::zero()),
                1 => v[j] = Some(q(net.ub[j])),
                _ => free.push(j),
            }
            c /= 3;
        }
        let m: Vec<Vec<Q>> = net.s.iter().map(|row| free.iter().map(|&j| q(row[j])).collect()).collect();
        let rhs: Vec<Q> = net
            .s
            .iter()
            .map(|row| {
                -(0..n).filter(|j| !free.contains(j)).map(|j| q(row[j]) * v[j].clone().unwrap()).fold(Q::zero(), |a, b| a + b)
            })
            .collect();
        let sol = if free.is_empty() {
            rhs.iter().all(Q::is_zero).then(Vec::new)
        } else {
            solve_exact(&m, &rhs)
        };
        let Some(sol) = sol else { continue };
        for (j, val) in free.iter().zip(sol) {
            v[*j] = Some(val);
        }
        let v: Vec<Q> = v.into_iter().map(Option::unwrap).collect();
        if v.iter().zip(&net.ub).all(|(x, u)| !x.is_negative() && *x <= q(*u)) {
            vertices.push(v);
        }
    }
    let half = Q::new(BigInt::one(), BigInt::from(2));
    let obj = |v: &Vec<Q>| {
        v.iter().zip(&net.w_halves).map(|(x, w)| x * q(*w) * &half).fold(Q::zero(), |a, b| a + b)
    };
    let mu = vertices.iter().map(obj).max()?;
    let ve = vertices.iter().filter(|v| obj(v) == mu).map(|v| v[net.idx_e].clone()).max()?;
    Some((mu, ve))
}

/// Simplest rational within `tol` of `x` (continued-fraction convergents).
pub fn reconstruct(x: f64, tol: f64) -> Q {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = Q::new(h1.clone(), k1.clone());
        if (approx.to_f64().unwrap() - x).abs() <= tol {
            return approx;
        }
        let frac = y - a;
        if frac == 0.0 {
            break;
        }
        y = 1.0 / frac;
    }
    Q::new(h1, k1)
}
