//! Singular-arc analysis for the affine metabolic model.
//!
//! Lie brackets follow `[X, Y] = DY·X − DX·Y`. Because `F1`, `F2` are
//! constant, every bracket below reduces to first and second partials of
//! `F0`, which are assembled from the kinetic jets.

use nalgebra::Matrix2;
use serde::Serialize;
use thiserror::Error;

use crate::adjoint::ExtremalRecord;
use crate::dynamics::{Covector7, Matrix7, State7};
use crate::kinetics::{KineticParams, KineticsError, Rate, ScaledPoint};
use crate::surrogate::SurrogateCoeffs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error("2x2 system is singular (det = {det:e}, scale = {scale:e})")]
    SingularMatrix { det: f64, scale: f64 },
    #[error("b1·mu_bar − a1·v_bar = {0:e} vanishes")]
    Hypothesis(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    pub name: &'static str,
    pub value: f64,
    pub scale: f64,
    pub near_zero: bool,
}

impl Quantity {
    fn new(name: &'static str, value: f64, scale: f64) -> Self {
        Self { name, value, scale, near_zero: value.abs() < 1e-10 * scale.max(f64::MIN_POSITIVE) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub yields_positive: bool,
    pub quantities: [Quantity; 3],
}

impl HypothesisCheck {
    pub fn holds(&self) -> bool {
        self.yields_positive && self.quantities.iter().all(|q| !q.near_zero)
    }
}

/// Positivity of the yields and the three nondegeneracy quantities
/// `a1·b2 − a2·b1`, `(b1 − b2)·μ̄ + (a2 − a1)·v̄`, `b1·μ̄ − a1·v̄`.
pub fn check_hypotheses(s: &SurrogateCoeffs) -> HypothesisCheck {
    let SurrogateCoeffs { a1, a2, b1, b2, mu_bar, v_bar } = *s;
    HypothesisCheck {
        yields_positive: s.has_positive_yields(),
        quantities: [
            Quantity::new("a1*b2 - a2*b1", a1 * b2 - a2 * b1, (a1 * b2).abs() + (a2 * b1).abs()),
            Quantity::new(
                "(b1 - b2)*mu_bar + (a2 - a1)*v_bar",
                (b1 - b2) * mu_bar + (a2 - a1) * v_bar,
                (b1.abs() + b2.abs()) * mu_bar.abs() + (a1.abs() + a2.abs()) * v_bar.abs(),
            ),
            Quantity::new("b1*mu_bar - a1*v_bar", b1 * mu_bar - a1 * v_bar, (b1 * mu_bar).abs() + (a1 * v_bar).abs()),
        ],
    }
}

/// First and second partials of `F0` in all seven coordinates.
struct DriftJet {
    f0: State7,
    jac: Matrix7,
    hess: [Matrix7; 7],
}

const SLOTS: [usize; 4] = [2, 3, 4, 6];

fn drift_jet(k: &KineticParams, s: &SurrogateCoeffs, feed: f64, x: &State7) -> Result<DriftJet, KineticsError> {
    let p = ScaledPoint::new(x[2], x[3], x[4], x[6]);
    let g = k.jet(p, Rate::Glucose)?;
    let z = k.jet(p, Rate::Xylose)?;
    // F0_r = x6·(cg·v_g + cz·v_z + c0) for r = 2..5
    let rows = [
        (2, -1.0, 0.0, 0.0),
        (3, 0.0, -1.0, 0.0),
        (4, s.b1, s.b2, s.v_bar),
        (5, s.a1, s.a2, s.mu_bar),
    ];
    let x6 = x[5];
    let mut f0 = State7::zeros();
    f0[6] = feed;
    let mut jac = Matrix7::zeros();
    let mut hess = [Matrix7::zeros(); 7];
    for (r, cg, cz, c0) in rows {
        let rho = cg * g.value + cz * z.value + c0;
        f0[r] = x6 * rho;
        jac[(r, 5)] = rho;
        for a in 0..4 {
            let d = cg * g.grad[a] + cz * z.grad[a];
            jac[(r, SLOTS[a])] = x6 * d;
            hess[r][(5, SLOTS[a])] = d;
            hess[r][(SLOTS[a], 5)] = d;
            for b in 0..4 {
                hess[r][(SLOTS[a], SLOTS[b])] = x6 * (cg * g.hess[a][b] + cz * z.hess[a][b]);
            }
        }
    }
    Ok(DriftJet { f0, jac, hess })
}

/// Pairings of `λ` with the second-order brackets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketTerms {
    pub f1_f0_f1: f64,
    pub f2_f0_f1: f64,
    pub f1_f0_f2: f64,
    pub f2_f0_f2: f64,
    pub f0_f0_f1: f64,
    pub f0_f0_f2: f64,
}

/// `⟨λ,[Fi,[F0,Fj]]⟩` and `⟨λ,[F0,[F0,Fk]]⟩` for `i, j, k ∈ {1, 2}`.
pub fn bracket_terms(
    k: &KineticParams,
    s: &SurrogateCoeffs,
    feed: f64,
    x: &State7,
    lam: &Covector7,
) -> Result<BracketTerms, KineticsError> {
    let jet = drift_jet(k, s, feed, x)?;
    // [Fi,[F0,Fj]] = −F²·∂i'∂j' F0 with i' = 2 for F1, 3 for F2
    let mixed = |i: usize, j: usize| -feed * feed * (0..7).map(|r| lam[r] * jet.hess[r][(i, j)]).sum::<f64>();
    let drift2 = |c: usize| {
        // Y = [F0, Fk] = −F·∂c F0, DY = −F·∂c(DF0)
        let y = jet.jac.column(c) * -feed;
        let mut total = 0.0;
        for r in 0..7 {
            let dy_f0: f64 = (0..7).map(|m| -feed * jet.hess[r][(m, c)] * jet.f0[m]).sum();
            let j_y: f64 = (0..7).map(|m| jet.jac[(r, m)] * y[m]).sum();
            total += lam[r] * (dy_f0 - j_y);
        }
        total
    };
    Ok(BracketTerms {
        f1_f0_f1: mixed(2, 2),
        f2_f0_f1: mixed(3, 2),
        f1_f0_f2: mixed(2, 3),
        f2_f0_f2: mixed(3, 3),
        f0_f0_f1: drift2(2),
        f0_f0_f2: drift2(3),
    })
}

/// Closed form of `⟨λ,[F0,[F0,F2]]⟩` when `(λ5, λ6)` solve the doubly
/// singular system with constants `λ̄3`, `λ̄4`:
///
/// `a2·F·k_ie_z·k_ig·k_z·v_zmax·x6·x7³·((b1·λ̄4 − b2·λ̄3)·μ̄ + (a2·λ̄3 − a1·λ̄4)·v̄)
///  / ((a2·b1 − a1·b2)(x5 + k_ie_z·x7)(x3 + k_ig·x7)(x4 + k_z·x7)²)`.
pub fn f0_f0_f2_closed_form(k: &KineticParams, s: &SurrogateCoeffs, feed: f64, x: &State7, l3: f64, l4: f64) -> f64 {
    let SurrogateCoeffs { a1, a2, b1, b2, mu_bar, v_bar } = *s;
    let (x3, x4, x5, x6, x7) = (x[2], x[3], x[4], x[5], x[6]);
    let num = a2 * feed * k.k_ie_z * k.k_ig * k.k_z * k.v_zmax * x6 * x7.powi(3)
        * ((b1 * l4 - b2 * l3) * mu_bar + (a2 * l3 - a1 * l4) * v_bar);
    let den = (a2 * b1 - a1 * b2) * (x5 + k.k_ie_z * x7) * (x3 + k.k_ig * x7) * (x4 + k.k_z * x7).powi(2);
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L56 {
    pub l5: f64,
    pub l6: f64,
    pub det: f64,
}

/// Solves
/// `[∂v_e/∂x3  ∂μ/∂x3; ∂v_e/∂x4  ∂μ/∂x4]·(λ5, λ6) = (λ̄3·∂v_g/∂x3 + λ̄4·∂v_z/∂x3, λ̄4·∂v_z/∂x4)`.
pub fn solve_l5_l6(
    k: &KineticParams,
    s: &SurrogateCoeffs,
    x: &State7,
    l3: f64,
    l4: f64,
) -> Result<L56, SingularError> {
    let p = ScaledPoint::new(x[2], x[3], x[4], x[6]);
    let g = k.partials(p, Rate::Glucose)?;
    let z = k.partials(p, Rate::Xylose)?;
    let ve3 = s.b1 * g.d_x3 + s.b2 * z.d_x3;
    let ve4 = s.b2 * z.d_x4;
    let mu3 = s.a1 * g.d_x3 + s.a2 * z.d_x3;
    let mu4 = s.a2 * z.d_x4;
    let m = Matrix2::new(ve3, mu3, ve4, mu4);
    let det = m.determinant();
    let scale = (ve3 * mu4).abs() + (mu3 * ve4).abs();
    if !(det.abs() >= 1e-12 * scale) || scale == 0.0 {
        return Err(SingularError::SingularMatrix { det, scale });
    }
    let rhs = nalgebra::Vector2::new(l3 * g.d_x3 + l4 * z.d_x3, l4 * z.d_x4);
    let sol = m.lu().solve(&rhs).ok_or(SingularError::SingularMatrix { det, scale })?;
    Ok(L56 { l5: sol[0], l6: sol[1], det })
}

/// Covector of a doubly singular candidate: `λ1 = λ2 = −F·λ̄`, `λ3 = λ4 = λ̄`,
/// `(λ5, λ6)` from [`solve_l5_l6`], and the given `λ7`.
pub fn doubly_singular_covector(
    k: &KineticParams,
    s: &SurrogateCoeffs,
    feed: f64,
    x: &State7,
    l_bar: f64,
    l7: f64,
) -> Result<Covector7, SingularError> {
    let sol = solve_l5_l6(k, s, x, l_bar, l_bar)?;
    Ok(Covector7::from([-feed * l_bar, -feed * l_bar, l_bar, l_bar, sol.l5, sol.l6, l7]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantCovectors {
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
}

/// Constant `(λ̄4, λ̄5, λ̄6)` on a `φ1`-singular arc with `c ≡ 0`.
pub fn constant_covectors(s: &SurrogateCoeffs, l3: f64) -> Result<ConstantCovectors, SingularError> {
    let den = s.b1 * s.mu_bar - s.a1 * s.v_bar;
    let scale = (s.b1 * s.mu_bar).abs() + (s.a1 * s.v_bar).abs();
    if !(den.abs() > 1e-14 * scale) {
        return Err(SingularError::Hypothesis(den));
    }
    Ok(ConstantCovectors {
        l5: l3 * s.mu_bar / den,
        l6: -l3 * s.v_bar / den,
        l4: l3 * (s.b2 * s.mu_bar - s.a2 * s.v_bar) / den,
    })
}

/// Residuals `λ̄3 − b1·λ5 − a1·λ6`, `v̄·λ5 + μ̄·λ6`, `λ4 − b2·λ5 − a2·λ6`.
pub fn constant_covector_residuals(s: &SurrogateCoeffs, l3: f64, c: &ConstantCovectors) -> [f64; 3] {
    [
        l3 - s.b1 * c.l5 - s.a1 * c.l6,
        s.v_bar * c.l5 + s.mu_bar * c.l6,
        c.l4 - s.b2 * c.l5 - s.a2 * c.l6,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CCoefficient {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

/// `c = −2F²·x6·x7²·(A/(x3 + k_g·x7) + x4·B/(x3 + k_ig·x7))` with
/// `A = k_g·k_ie_g·v_gmax·(λ3 − b1·λ5 − a1·λ6)/((x3 + k_g·x7)²(x5 + k_ie_g·x7))` and
/// `B = k_ie_z·k_ig·v_zmax·(−λ4 + b2·λ5 + a2·λ6)/((x5 + k_ie_z·x7)(x3 + k_ig·x7)²(x4 + k_z·x7))`.
pub fn c_coefficient(
    k: &KineticParams,
    s: &SurrogateCoeffs,
    feed: f64,
    x: &State7,
    lam: &Covector7,
) -> Result<CCoefficient, KineticsError> {
    let p = ScaledPoint::new(x[2], x[3], x[4], x[6]);
    k.partials(p, Rate::Glucose)?;
    let (x3, x4, x5, x6, x7) = (x[2], x[3], x[4], x[5], x[6]);
    let (l3, l4, l5, l6) = (lam[2], lam[3], lam[4], lam[5]);
    let sat_g = x3 + k.k_g * x7;
    let inh_g = x3 + k.k_ig * x7;
    let a = k.k_g * k.k_ie_g * k.v_gmax * (l3 - s.b1 * l5 - s.a1 * l6) / (sat_g * sat_g * (x5 + k.k_ie_g * x7));
    let b = k.k_ie_z * k.k_ig * k.v_zmax * (-l4 + s.b2 * l5 + s.a2 * l6)
        / ((x5 + k.k_ie_z * x7) * inh_g * inh_g * (x4 + k.k_z * x7));
    let c = -2.0 * feed * feed * x6 * x7 * x7 * (a / sat_g + x4 * b / inh_g);
    Ok(CCoefficient { c, a, b })
}

/// Feedback `u1 = −(u2·⟨λ,[F2,[F0,F1]]⟩ + ⟨λ,[F0,[F0,F1]]⟩)/⟨λ,[F1,[F0,F1]]⟩`,
/// `None` where the denominator vanishes.
pub fn singular_u1(t: &BracketTerms, u2: f64) -> Option<f64> {
    (t.f1_f0_f1 != 0.0).then(|| -(u2 * t.f2_f0_f1 + t.f0_f0_f1) / t.f1_f0_f1)
}

/// Right-hand side of `λ4' = κ·(λ4 − b2·λ5 − a2·λ6)` on arcs with `x4 ≡ 0`,
/// `κ = k_ie_z·k_ig·v_zmax·x6·x7/(k_z(x5 + k_ie_z·x7)(x3 + k_ig·x7))`.
pub fn lambda4_rate_on_empty_xylose(k: &KineticParams, s: &SurrogateCoeffs, x: &State7, l4: f64, l5: f64, l6: f64) -> f64 {
    let (x3, x5, x6, x7) = (x[2], x[4], x[5], x[6]);
    let kappa = k.k_ie_z * k.k_ig * k.v_zmax * x6 * x7 / (k.k_z * (x5 + k.k_ie_z * x7) * (x3 + k.k_ig * x7));
    kappa * (l4 - s.b2 * l5 - s.a2 * l6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcKind {
    Phi1,
    Phi2,
    BothCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// Smallest `|⟨λ̄,[F0,[F0,F2]]⟩|` along the arc.
    pub min_abs_value: f64,
    pub threshold: f64,
    pub excludes_arc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularArc {
    pub t_start: f64,
    pub t_end: f64,
    pub kind: ArcKind,
    pub first_sample: usize,
    pub last_sample: usize,
    /// Range of the doubly singular system determinant along the arc.
    pub determinant_range: Option<[f64; 2]>,
    pub c_trace: Vec<f64>,
    pub constants: Option<ConstantCovectors>,
    pub certificate: Option<Certificate>,
    pub hypotheses: HypothesisCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularReport {
    pub eps_sw: f64,
    pub arcs: Vec<SingularArc>,
    /// Windows with frequent sign changes of a switching function.
    pub suspected_chattering: Vec<[f64; 2]>,
}

fn runs(mask: &[bool], min_steps: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < mask.len() {
        if mask[k] {
            let start = k;
            while k + 1 < mask.len() && mask[k + 1] {
                k += 1;
            }
            if k - start >= min_steps {
                out.push((start, k));
            }
        }
        k += 1;
    }
    out
}

fn chattering(phi: &[f64], times: &[f64], eps: f64) -> Vec<[f64; 2]> {
    let signs: Vec<i8> = phi.iter().map(|p| if *p > eps { 1 } else if *p < -eps { -1 } else { 0 }).collect();
    let changes: Vec<usize> = (1..signs.len())
        .filter(|&k| {
            let prev = signs[..k].iter().rev().find(|s| **s != 0);
            signs[k] != 0 && prev.is_some_and(|p| *p != signs[k])
        })
        .collect();
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (i, &start) in changes.iter().enumerate() {
        let end = changes[i..].iter().take_while(|&&c| c < start + 100).count();
        if end > 20 {
            let last = changes[i + end - 1];
            let span = [times[start - 1], times[last]];
            match out.last_mut() {
                Some(prev) if prev[1] >= span[0] => prev[1] = prev[1].max(span[1]),
                _ => out.push(span),
            }
        }
    }
    out
}

/// Maximal intervals where switching functions stay within `eps_sw`.
pub fn detect_singular_arcs(rec: &ExtremalRecord, k: &KineticParams) -> SingularReport {
    detect_singular_arcs_with(rec, k, rec.switching_tolerance())
}

pub fn detect_singular_arcs_with(rec: &ExtremalRecord, k: &KineticParams, eps_sw: f64) -> SingularReport {
    let times = &rec.trajectory.times;
    let feed = rec.feed_rate;
    let m1: Vec<bool> = rec.phi1.iter().map(|p| p.abs() <= eps_sw).collect();
    let m2: Vec<bool> = rec.phi2.iter().map(|p| p.abs() <= eps_sw).collect();
    let both: Vec<bool> = m1.iter().zip(&m2).map(|(a, b)| *a && *b).collect();
    let mut found: Vec<(usize, usize, ArcKind)> = runs(&both, 3).into_iter().map(|(a, b)| (a, b, ArcKind::BothCandidate)).collect();
    let covered = |k: usize, found: &[(usize, usize, ArcKind)]| found.iter().any(|(a, b, _)| (*a..=*b).contains(&k));
    for (mask, kind) in [(&m1, ArcKind::Phi1), (&m2, ArcKind::Phi2)] {
        let own: Vec<bool> = (0..mask.len()).map(|i| mask[i] && !covered(i, &found)).collect();
        let extra: Vec<_> = runs(&own, 2).into_iter().map(|(a, b)| (a, b, kind)).collect();
        found.extend(extra);
    }
    found.sort_by_key(|f| f.0);

    let l_f = rec.covectors.last().copied().unwrap_or_else(Covector7::zeros);
    let l_bar = -l_f[0] / feed;
    let arcs = found
        .into_iter()
        .map(|(a, b, kind)| {
            let s = rec.coeffs[a.min(rec.coeffs.len() - 1)];
            let hypotheses = check_hypotheses(&s);
            let states = &rec.trajectory.states[a..=b];
            let dets: Vec<f64> = states
                .iter()
                .filter_map(|x| solve_l5_l6(k, &s, x, l_bar, l_bar).ok().map(|r| r.det))
                .collect();
            let determinant_range = (!dets.is_empty()).then(|| {
                [dets.iter().copied().fold(f64::INFINITY, f64::min), dets.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
            });
            let c_trace = if kind == ArcKind::BothCandidate {
                Vec::new()
            } else {
                (a..=b)
                    .filter_map(|i| c_coefficient(k, &s, feed, &rec.trajectory.states[i], &rec.covectors[i]).ok().map(|c| c.c))
                    .collect()
            };
            let constants = (kind == ArcKind::Phi1).then(|| constant_covectors(&s, rec.covectors[a][2]).ok()).flatten();
            let certificate = (kind == ArcKind::BothCandidate && hypotheses.holds()).then(|| {
                let min_abs_value = states
                    .iter()
                    .map(|x| f0_f0_f2_closed_form(k, &s, feed, x, l_bar, l_bar).abs())
                    .fold(f64::INFINITY, f64::min);
                let threshold = 1e3 * eps_sw;
                Certificate { min_abs_value, threshold, excludes_arc: min_abs_value > threshold }
            });
            SingularArc {
                t_start: times[a],
                t_end: times[b],
                kind,
                first_sample: a,
                last_sample: b,
                determinant_range,
                c_trace,
                constants,
                certificate,
                hypotheses,
            }
        })
        .collect();
    let mut suspected_chattering = chattering(&rec.phi1, times, eps_sw);
    suspected_chattering.extend(chattering(&rec.phi2, times, eps_sw));
    SingularReport { eps_sw, arcs, suspected_chattering }
}
