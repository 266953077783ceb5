use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simplex::{self, StandardLp, SimplexResult, Termination, FEAS_TOL, PIVOT_TOL};
use crate::surrogate::SurrogateCoeffs;

/// Feasibility tolerance on the row-normalized problem.
pub const EPS_FEAS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network.dims: S has {rows}x{cols} entries but dims say {r}x{n}")]
    Shape { rows: usize, cols: usize, r: usize, n: usize },
    #[error("network.{field} has length {len}, expected {n}")]
    Length { field: &'static str, len: usize, n: usize },
    #[error("network.w[{index}] = {value} is outside [0, 1]")]
    Weight { index: usize, value: f64 },
    #[error("network.v_upper[{index}] = {value} must be >= 0")]
    UpperBound { index: usize, value: f64 },
    #[error("network.{field} = {index} is out of range 1..={n}")]
    IndexRange { field: &'static str, index: usize, n: usize },
    #[error("network flux indices must be pairwise distinct")]
    IndexClash,
    #[error("network.S column {index} referenced by {field} is all zero")]
    ZeroColumn { field: &'static str, index: usize },
    #[error("network contains a non-finite entry")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("operation requires optimal LP outcomes")]
    NotOptimal,
    #[error("LP is {0:?} at the requested pins")]
    Status(LpStatus),
    #[error("optimal basis {basis} is degenerate; tied bases: {}", fmt_bases(.tied))]
    Degenerate { basis: BasisId, tied: Vec<BasisId> },
    #[error("pin values must be finite")]
    InvalidPins,
    #[error("simplex pivot limit exceeded")]
    PivotLimit,
    #[error("optimal basis matrix is numerically singular")]
    SingularBasis,
}

fn fmt_bases(b: &[BasisId]) -> String {
    b.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Sorted list of basic columns. Flux `j` is column `j`; the upper-bound
/// slack of flux `j` is column `n + j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct BasisId(pub Vec<usize>);

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("-"))
    }
}

impl std::str::FromStr for BasisId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(BasisId(Vec::new()));
        }
        s.split('-').map(str::parse).collect::<Result<Vec<_>, _>>().map(BasisId)
    }
}

/// Pinned exchange fluxes: glucose, xylose and oxygen uptake.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pins {
    pub v_g: f64,
    pub v_z: f64,
    pub v_o: f64,
}

impl Pins {
    pub fn new(v_g: f64, v_z: f64, v_o: f64) -> Self {
        Self { v_g, v_z, v_o }
    }
}

/// Stoichiometric network. Indices are zero-based in memory and one-based in
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct MetabolicNetwork {
    s: Vec<Vec<f64>>,
    w: Vec<f64>,
    v_upper: Vec<f64>,
    idx_g: usize,
    idx_z: usize,
    idx_o: Option<usize>,
    idx_e: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub r: usize,
    pub n: usize,
}

/// On-disk layout of a network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub dims: Dims,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub v_upper: Vec<f64>,
    pub idx_g: usize,
    pub idx_z: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx_o: Option<usize>,
    pub idx_e: usize,
}

impl TryFrom<NetworkFile> for MetabolicNetwork {
    type Error = NetworkError;

    fn try_from(f: NetworkFile) -> Result<Self, Self::Error> {
        if f.s.len() != f.dims.r || f.s.iter().any(|row| row.len() != f.dims.n) {
            return Err(NetworkError::Shape {
                rows: f.s.len(),
                cols: f.s.first().map_or(0, Vec::len),
                r: f.dims.r,
                n: f.dims.n,
            });
        }
        let n = f.dims.n;
        let one_based = |field: &'static str, i: usize| {
            if (1..=n).contains(&i) {
                Ok(i - 1)
            } else {
                Err(NetworkError::IndexRange { field, index: i, n })
            }
        };
        let idx_g = one_based("idx_g", f.idx_g)?;
        let idx_z = one_based("idx_z", f.idx_z)?;
        let idx_o = f.idx_o.map(|i| one_based("idx_o", i)).transpose()?;
        let idx_e = one_based("idx_e", f.idx_e)?;
        MetabolicNetwork::new(f.s, f.w, f.v_upper, idx_g, idx_z, idx_o, idx_e)
    }
}

impl From<MetabolicNetwork> for NetworkFile {
    fn from(net: MetabolicNetwork) -> Self {
        NetworkFile {
            dims: Dims { r: net.s.len(), n: net.w.len() },
            s: net.s,
            w: net.w,
            v_upper: net.v_upper,
            idx_g: net.idx_g + 1,
            idx_z: net.idx_z + 1,
            idx_o: net.idx_o.map(|i| i + 1),
            idx_e: net.idx_e + 1,
        }
    }
}

impl MetabolicNetwork {
    /// Builds and validates a network; `idx_*` are zero-based.
    pub fn new(
        s: Vec<Vec<f64>>,
        w: Vec<f64>,
        v_upper: Vec<f64>,
        idx_g: usize,
        idx_z: usize,
        idx_o: Option<usize>,
        idx_e: usize,
    ) -> Result<Self, NetworkError> {
        let n = w.len();
        if let Some(bad) = s.iter().find(|row| row.len() != n) {
            return Err(NetworkError::Shape { rows: s.len(), cols: bad.len(), r: s.len(), n });
        }
        if v_upper.len() != n {
            return Err(NetworkError::Length { field: "v_upper", len: v_upper.len(), n });
        }
        if s.iter().flatten().chain(&w).chain(&v_upper).any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite);
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(NetworkError::Weight { index: index + 1, value });
        }
        if let Some((index, &value)) = v_upper.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(NetworkError::UpperBound { index: index + 1, value });
        }
        let mut named = vec![("idx_g", idx_g), ("idx_z", idx_z), ("idx_e", idx_e)];
        if let Some(o) = idx_o {
            named.push(("idx_o", o));
        }
        for &(field, i) in &named {
            if i >= n {
                return Err(NetworkError::IndexRange { field, index: i + 1, n });
            }
        }
        for (a, &(_, i)) in named.iter().enumerate() {
            if named[a + 1..].iter().any(|&(_, j)| j == i) {
                return Err(NetworkError::IndexClash);
            }
        }
        for &(field, i) in &named {
            if s.iter().all(|row| row[i] == 0.0) {
                return Err(NetworkError::ZeroColumn { field, index: i + 1 });
            }
        }
        Ok(Self { s, w, v_upper, idx_g, idx_z, idx_o, idx_e })
    }

    pub fn reactions(&self) -> usize {
        self.s.len()
    }

    pub fn fluxes(&self) -> usize {
        self.w.len()
    }

    pub fn stoichiometry(&self) -> &[Vec<f64>] {
        &self.s
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.v_upper
    }

    pub fn idx_g(&self) -> usize {
        self.idx_g
    }

    pub fn idx_z(&self) -> usize {
        self.idx_z
    }

    pub fn idx_o(&self) -> Option<usize> {
        self.idx_o
    }

    pub fn idx_e(&self) -> usize {
        self.idx_e
    }

    fn pinned(&self, pins: &Pins) -> Vec<(usize, f64)> {
        let mut out = vec![(self.idx_g, pins.v_g), (self.idx_z, pins.v_z)];
        if let Some(o) = self.idx_o {
            out.push((o, pins.v_o));
        }
        out
    }

    /// Largest possible growth rate and ethanol flux over the flux box.
    pub fn output_bounds(&self) -> (f64, f64) {
        let mu: f64 = self.w.iter().zip(&self.v_upper).map(|(w, u)| w * u).sum();
        (mu, self.v_upper[self.idx_e])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub mu: f64,
    pub v_e: f64,
    pub flux: Vec<f64>,
    pub basis_id: BasisId,
    pub status: LpStatus,
}

impl LpOutcome {
    fn failed(status: LpStatus) -> Self {
        Self { mu: f64::NAN, v_e: f64::NAN, flux: Vec::new(), basis_id: BasisId::default(), status }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Standard-form data for one pin setting.
struct Formulation {
    lp: StandardLp,
    free: Vec<usize>,
    /// Per balance row: `(scale·sign)` applied to the original row.
    row_scale: Vec<f64>,
    pinned: Vec<(usize, f64)>,
}

impl Formulation {
    fn column_id(&self, c: usize, n: usize) -> usize {
        let nf = self.free.len();
        if c < nf {
            self.free[c]
        } else {
            n + self.free[c - nf]
        }
    }
}

/// Reusable solver with a warm-start basis. Not for concurrent use; create
/// one per thread.
#[derive(Debug, Clone)]
pub struct FbaSolver {
    net: MetabolicNetwork,
    last_basis: Option<Vec<usize>>,
}

struct Solved {
    outcome: LpOutcome,
    form: Formulation,
    result: Option<SimplexResult>,
}

impl FbaSolver {
    pub fn new(net: MetabolicNetwork) -> Self {
        Self { net, last_basis: None }
    }

    pub fn network(&self) -> &MetabolicNetwork {
        &self.net
    }

    fn formulate(&self, pins: &Pins) -> Result<Option<Formulation>, LpError> {
        let net = &self.net;
        let n = net.fluxes();
        let mut pinned = net.pinned(pins);
        for (j, p) in pinned.iter_mut() {
            if !p.is_finite() {
                return Err(LpError::InvalidPins);
            }
            let tol = EPS_FEAS * (1.0 + net.v_upper[*j]);
            if *p < -tol || *p > net.v_upper[*j] + tol {
                return Ok(None);
            }
            *p = p.clamp(0.0, net.v_upper[*j]);
        }
        let free: Vec<usize> = (0..n).filter(|j| pinned.iter().all(|(k, _)| k != j)).collect();
        let nf = free.len();
        let mut a = Vec::with_capacity(net.reactions() + nf);
        let mut b = Vec::with_capacity(net.reactions() + nf);
        let mut row_scale = Vec::with_capacity(net.reactions());
        for row in &net.s {
            let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
            let mut r = vec![0.0; 2 * nf];
            for (c, &j) in free.iter().enumerate() {
                r[c] = scale * row[j];
            }
            let rhs: f64 = -pinned.iter().map(|&(k, p)| row[k] * p).sum::<f64>() * scale;
            a.push(r);
            b.push(rhs);
            row_scale.push(scale);
        }
        for (c, &j) in free.iter().enumerate() {
            let mut r = vec![0.0; 2 * nf];
            r[c] = 1.0;
            r[nf + c] = 1.0;
            a.push(r);
            b.push(net.v_upper[j]);
        }
        let mut growth = vec![0.0; 2 * nf];
        let mut ethanol = vec![0.0; 2 * nf];
        for (c, &j) in free.iter().enumerate() {
            growth[c] = net.w[j];
            if j == net.idx_e {
                ethanol[c] = 1.0;
            }
        }
        Ok(Some(Formulation {
            lp: StandardLp { a, b, objectives: vec![growth, ethanol] },
            free,
            row_scale,
            pinned,
        }))
    }

    fn run(&mut self, pins: &Pins, warm: bool) -> Result<Solved, LpError> {
        let Some(form) = self.formulate(pins)? else {
            return Ok(Solved {
                outcome: LpOutcome::failed(LpStatus::Infeasible),
                form: self.formulate(&Pins::default())?.expect("zero pins are always admissible"),
                result: None,
            });
        };
        let warm_result = match (&self.last_basis, warm) {
            (Some(basis), true) => simplex::solve_from_basis(&form.lp, basis),
            _ => None,
        };
        let result = warm_result.unwrap_or_else(|| simplex::solve(&form.lp));
        let status = match result.termination {
            Termination::Optimal => LpStatus::Optimal,
            Termination::Infeasible => LpStatus::Infeasible,
            Termination::Unbounded => LpStatus::Unbounded,
            Termination::PivotLimit => return Err(LpError::PivotLimit),
        };
        if status != LpStatus::Optimal {
            return Ok(Solved { outcome: LpOutcome::failed(status), form, result: Some(result) });
        }
        let n = self.net.fluxes();
        let mut flux = vec![0.0; n];
        for (c, &j) in form.free.iter().enumerate() {
            flux[j] = result.x[c];
        }
        for &(j, p) in &form.pinned {
            flux[j] = p;
        }
        let mu = self.net.w.iter().zip(&flux).map(|(w, v)| w * v).sum();
        let v_e = flux[self.net.idx_e];
        let mut ids: Vec<usize> = result.basis.iter().map(|&c| form.column_id(c, n)).collect();
        ids.sort_unstable();
        self.last_basis = if result.rows.len() == form.lp.b.len() { Some(result.basis.clone()) } else { None };
        Ok(Solved {
            outcome: LpOutcome { mu, v_e, flux, basis_id: BasisId(ids), status },
            form,
            result: Some(result),
        })
    }

    /// Cold solve; the basis returned is a deterministic function of the pins.
    pub fn solve(&mut self, pins: &Pins) -> Result<LpOutcome, LpError> {
        Ok(self.run(pins, false)?.outcome)
    }

    /// Solve starting from the previous optimal basis when it is still
    /// primal feasible.
    pub fn solve_warm(&mut self, pins: &Pins) -> Result<LpOutcome, LpError> {
        Ok(self.run(pins, true)?.outcome)
    }

    /// Affine sensitivity of `(mu, v_e)` to the glucose and xylose pins in
    /// the optimal basis found at `pins`, without checking degeneracy.
    pub fn sensitivity(&mut self, pins: &Pins, warm: bool) -> Result<(LpOutcome, SurrogateCoeffs), LpError> {
        let solved = self.run(pins, warm)?;
        if !solved.outcome.is_optimal() {
            return Err(LpError::Status(solved.outcome.status));
        }
        let coeffs = self.basis_sensitivity(&solved, pins)?;
        Ok((solved.outcome, coeffs))
    }

    fn basis_sensitivity(&self, solved: &Solved, pins: &Pins) -> Result<SurrogateCoeffs, LpError> {
        let result = solved.result.as_ref().ok_or(LpError::NotOptimal)?;
        let form = &solved.form;
        let net = &self.net;
        let m = result.rows.len();
        let nf = form.free.len();
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| form.lp.a[result.rows[i]][result.basis[k]]);
        let lu = basis_matrix.lu();
        let reactions = net.reactions();
        let derivative = |pin: usize| -> Result<(f64, f64), LpError> {
            let rhs = DVector::from_fn(m, |i, _| {
                let row = result.rows[i];
                if row < reactions {
                    -form.row_scale[row] * net.s[row][pin]
                } else {
                    0.0
                }
            });
            let d = lu.solve(&rhs).ok_or(LpError::SingularBasis)?;
            let mut d_mu = net.w[pin];
            let mut d_ve = 0.0;
            for (k, &c) in result.basis.iter().enumerate() {
                if c < nf {
                    let j = form.free[c];
                    d_mu += net.w[j] * d[k];
                    if j == net.idx_e {
                        d_ve += d[k];
                    }
                }
            }
            Ok((d_mu, d_ve))
        };
        let (a1, b1) = derivative(net.idx_g)?;
        let (a2, b2) = derivative(net.idx_z)?;
        let out = &solved.outcome;
        let (pg, pz) = (
            form.pinned.iter().find(|p| p.0 == net.idx_g).map_or(pins.v_g, |p| p.1),
            form.pinned.iter().find(|p| p.0 == net.idx_z).map_or(pins.v_z, |p| p.1),
        );
        Ok(SurrogateCoeffs {
            a1,
            a2,
            b1,
            b2,
            mu_bar: out.mu - a1 * pg - a2 * pz,
            v_bar: out.v_e - b1 * pg - b2 * pz,
        })
    }

    fn tied_bases(&self, solved: &Solved) -> Vec<BasisId> {
        let Some(result) = solved.result.as_ref() else {
            return Vec::new();
        };
        let n = self.net.fluxes();
        let width = solved.form.lp.a.first().map_or(0, Vec::len);
        let scale = 1.0 + solved.form.lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut tied = Vec::new();
        for (i, row) in result.tableau.iter().enumerate() {
            if row[row.len() - 1].abs() > FEAS_TOL * scale {
                continue;
            }
            for j in 0..width {
                if !result.basis.contains(&j) && row[j].abs() > 1e3 * PIVOT_TOL {
                    let mut alt: Vec<usize> = result.basis.clone();
                    alt[i] = j;
                    let mut ids: Vec<usize> = alt.iter().map(|&c| solved.form.column_id(c, n)).collect();
                    ids.sort_unstable();
                    let id = BasisId(ids);
                    if !tied.contains(&id) {
                        tied.push(id);
                    }
                }
            }
        }
        tied
    }
}

/// Two-stage flux balance: maximize `w·v`, then maximize the ethanol flux
/// over the optimal face.
pub fn solve_fba(net: &MetabolicNetwork, pins: Pins) -> Result<LpOutcome, LpError> {
    FbaSolver::new(net.clone()).solve(&pins)
}

/// Whether two optimal outcomes sit in different optimal bases.
pub fn basis_changed(prev: &LpOutcome, next: &LpOutcome) -> Result<bool, LpError> {
    if !prev.is_optimal() || !next.is_optimal() {
        return Err(LpError::NotOptimal);
    }
    Ok(prev.basis_id != next.basis_id)
}

/// Affine model of `(mu, v_e)` in `(v_g, v_z)` valid around `pins`.
/// Fails when the optimal basis is primal degenerate.
pub fn local_surrogate(net: &MetabolicNetwork, pins: Pins) -> Result<SurrogateCoeffs, LpError> {
    let mut solver = FbaSolver::new(net.clone());
    let solved = solver.run(&pins, false)?;
    if !solved.outcome.is_optimal() {
        return Err(LpError::Status(solved.outcome.status));
    }
    let tied = solver.tied_bases(&solved);
    if !tied.is_empty() {
        return Err(LpError::Degenerate { basis: solved.outcome.basis_id.clone(), tied });
    }
    solver.basis_sensitivity(&solved, &pins)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Glucose and xylose merge into one pool that splits into biomass
    /// (capped at 5) and ethanol.
    pub(crate) fn toy() -> MetabolicNetwork {
        MetabolicNetwork::new(
            vec![vec![1.0, 1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0, -1.0]],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![10.0, 10.0, 20.0, 5.0, 20.0],
            0,
            1,
            None,
            4,
        )
        .unwrap()
    }

    #[test]
    fn zero_box_gives_zero_outputs() {
        let net = MetabolicNetwork::new(
            vec![vec![1.0, -1.0, 1.0, -1.0]],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0; 4],
            0,
            1,
            Some(2),
            3,
        )
        .unwrap();
        let out = solve_fba(&net, Pins::default()).unwrap();
        assert!(out.is_optimal());
        assert_eq!(out.mu, 0.0);
        assert_eq!(out.v_e, 0.0);
    }

    #[test]
    fn pin_above_bound_is_infeasible() {
        let out = solve_fba(&toy(), Pins::new(10.5, 0.0, 0.0)).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        assert!(basis_changed(&out, &out).is_err());
    }

    #[test]
    fn toy_network_values() {
        // Frozen from vertex enumeration: mu = min(5, g + z), v_e = max(0, g + z - 5).
        for (g, z, mu, ve) in [(1.0, 2.0, 3.0, 0.0), (4.0, 3.0, 5.0, 2.0), (10.0, 10.0, 5.0, 15.0)] {
            let out = solve_fba(&toy(), Pins::new(g, z, 0.0)).unwrap();
            assert!((out.mu - mu).abs() < 1e-12, "{g} {z}: {}", out.mu);
            assert!((out.v_e - ve).abs() < 1e-12, "{g} {z}: {}", out.v_e);
        }
    }

    #[test]
    fn basis_changes_across_kink() {
        let net = toy();
        let below = solve_fba(&net, Pins::new(2.0, 1.0, 0.0)).unwrap();
        let above = solve_fba(&net, Pins::new(4.5, 1.0, 0.0)).unwrap();
        assert!(!basis_changed(&below, &below).unwrap());
        assert!(basis_changed(&below, &above).unwrap());
    }

    #[test]
    fn repeated_solves_are_deterministic() {
        let net = toy();
        let a = solve_fba(&net, Pins::new(3.3, 0.4, 0.0)).unwrap();
        let b = solve_fba(&net, Pins::new(3.3, 0.4, 0.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_of_toy_regions() {
        let net = toy();
        let below = local_surrogate(&net, Pins::new(1.0, 1.5, 0.0)).unwrap();
        assert!((below.a1 - 1.0).abs() < 1e-12 && (below.a2 - 1.0).abs() < 1e-12);
        assert!(below.b1.abs() < 1e-12 && below.b2.abs() < 1e-12);
        let above = local_surrogate(&net, Pins::new(4.0, 3.0, 0.0)).unwrap();
        assert!(above.a1.abs() < 1e-12 && (above.mu_bar - 5.0).abs() < 1e-12);
        assert!((above.b1 - 1.0).abs() < 1e-12 && (above.v_bar + 5.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_reports_degeneracy_at_kink() {
        match local_surrogate(&toy(), Pins::new(3.0, 2.0, 0.0)) {
            Err(LpError::Degenerate { tied, .. }) => assert!(!tied.is_empty()),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn network_validation() {
        let bad_w = MetabolicNetwork::new(vec![vec![1.0, -1.0, -1.0]], vec![0.0, 2.0, 0.0], vec![1.0; 3], 0, 1, None, 2);
        assert!(matches!(bad_w, Err(NetworkError::Weight { index: 2, .. })));
        let clash = MetabolicNetwork::new(vec![vec![1.0, -1.0, -1.0]], vec![0.0; 3], vec![1.0; 3], 0, 0, None, 2);
        assert_eq!(clash, Err(NetworkError::IndexClash));
        let zero = MetabolicNetwork::new(vec![vec![1.0, 0.0, -1.0]], vec![0.0; 3], vec![1.0; 3], 0, 1, None, 2);
        assert!(matches!(zero, Err(NetworkError::ZeroColumn { field: "idx_z", .. })));
    }

    #[test]
    fn network_file_round_trip_is_one_based() {
        let json = serde_json::to_string(&toy()).unwrap();
        assert!(json.contains("\"idx_e\":5"));
        let back: MetabolicNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(back, toy());
    }

    #[test]
    fn warm_start_agrees_with_cold() {
        let mut solver = FbaSolver::new(toy());
        solver.solve(&Pins::new(1.0, 1.0, 0.0)).unwrap();
        let warm = solver.solve_warm(&Pins::new(1.2, 1.1, 0.0)).unwrap();
        let cold = solve_fba(&toy(), Pins::new(1.2, 1.1, 0.0)).unwrap();
        assert_eq!(warm.basis_id, cold.basis_id);
        assert!((warm.mu - cold.mu).abs() < 1e-12);
    }
}
