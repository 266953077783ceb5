//! Michaelis–Menten uptake kinetics for oxygen, glucose and xylose.
//!
//! Each rate is available in concentration form (`v_g(G, E)`) and in
//! volume-scaled form (`v_g_scaled(x3, x5, x7)`), where `x3 = V·G`,
//! `x4 = V·Z`, `x5 = V·E` and `x7 = V`. The scaled forms are evaluated as
//! products of saturation and inhibition factors, and their first and second
//! partial derivatives are assembled from the closed-form derivatives of
//! those factors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible culture volume for the scaled rates.
pub const EPS_VOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("kinetic.{field} must be > 0 (got {value})")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("{name} must be >= 0 (got {value})")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("culture volume x7 = {0} is below the admissible minimum")]
    VolumeTooSmall(f64),
    #[error("non-positive kinetic denominator at x = ({x3}, {x4}, {x5}, {x7})")]
    DegenerateDenominator { x3: f64, x4: f64, x5: f64, x7: f64 },
}

/// Parameters of the three uptake laws.
///
/// Rates are in mmol·gDW⁻¹·h⁻¹, half-saturation and inhibition constants in
/// g·L⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub v_omax: f64,
    pub v_gmax: f64,
    pub v_zmax: f64,
    pub k_o: f64,
    pub k_g: f64,
    pub k_z: f64,
    pub k_ie_g: f64,
    pub k_ie_z: f64,
    pub k_ig: f64,
}

/// Which scaled uptake rate a derivative request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Glucose,
    Xylose,
}

/// Arguments of the scaled rates: the mass/volume components `x3, x4, x5, x7`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPoint {
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub x7: f64,
}

impl ScaledPoint {
    pub fn new(x3: f64, x4: f64, x5: f64, x7: f64) -> Self {
        Self { x3, x4, x5, x7 }
    }
}

/// Value and gradient of a scaled rate with respect to `(x3, x4, x5, x7)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGradient {
    pub value: f64,
    pub d_x3: f64,
    pub d_x4: f64,
    pub d_x5: f64,
    pub d_x7: f64,
}

impl RateGradient {
    /// Gradient as an array ordered `(x3, x4, x5, x7)`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.d_x3, self.d_x4, self.d_x5, self.d_x7]
    }
}

/// Value, gradient and Hessian of a scaled rate in the variables
/// `(x3, x4, x5, x7)`, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateJet {
    pub value: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

impl RateJet {
    fn constant(c: f64) -> Self {
        Self { value: c, grad: [0.0; 4], hess: [[0.0; 4]; 4] }
    }

    fn mul(&self, other: &RateJet) -> RateJet {
        let mut out = RateJet::constant(self.value * other.value);
        for i in 0..4 {
            out.grad[i] = self.grad[i] * other.value + self.value * other.grad[i];
            for j in 0..4 {
                out.hess[i][j] = self.hess[i][j] * other.value
                    + self.grad[i] * other.grad[j]
                    + self.grad[j] * other.grad[i]
                    + self.value * other.hess[i][j];
            }
        }
        out
    }
}

// Variable slots in RateJet.
const X3: usize = 0;
const X4: usize = 1;
const X5: usize = 2;
const X7: usize = 3;

/// `y / (k·x7 + y)` with its first and second derivatives in `(y, x7)`.
fn saturation(y: f64, x7: f64, k: f64, slot: usize) -> RateJet {
    let p = k * x7 + y;
    let p2 = p * p;
    let p3 = p2 * p;
    let mut jet = RateJet::constant(y / p);
    jet.grad[slot] = k * x7 / p2;
    jet.grad[X7] = -k * y / p2;
    jet.hess[slot][slot] = -2.0 * k * x7 / p3;
    let cross = k * (y - k * x7) / p3;
    jet.hess[slot][X7] = cross;
    jet.hess[X7][slot] = cross;
    jet.hess[X7][X7] = 2.0 * k * k * y / p3;
    jet
}

/// `x7 / (x7 + y/k)` with its first and second derivatives in `(y, x7)`.
fn inhibition(y: f64, x7: f64, k: f64, slot: usize) -> RateJet {
    let q = x7 + y / k;
    let q2 = q * q;
    let q3 = q2 * q;
    let mut jet = RateJet::constant(x7 / q);
    jet.grad[slot] = -x7 / (k * q2);
    jet.grad[X7] = (y / k) / q2;
    jet.hess[slot][slot] = 2.0 * x7 / (k * k * q3);
    let cross = (x7 - y / k) / (k * q3);
    jet.hess[slot][X7] = cross;
    jet.hess[X7][slot] = cross;
    jet.hess[X7][X7] = -2.0 * (y / k) / q3;
    jet
}

fn positive(field: &'static str, value: f64) -> Result<(), KineticsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(KineticsError::InvalidParameter { field, value })
    }
}

fn nonnegative(name: &'static str, value: f64) -> Result<(), KineticsError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(KineticsError::NegativeInput { name, value })
    }
}

impl KineticParams {
    pub fn validate(&self) -> Result<(), KineticsError> {
        positive("v_omax", self.v_omax)?;
        positive("v_gmax", self.v_gmax)?;
        positive("v_zmax", self.v_zmax)?;
        positive("k_o", self.k_o)?;
        positive("k_g", self.k_g)?;
        positive("k_z", self.k_z)?;
        positive("k_ie_g", self.k_ie_g)?;
        positive("k_ie_z", self.k_ie_z)?;
        positive("k_ig", self.k_ig)?;
        Ok(())
    }

    /// Oxygen uptake `v_omax · O/(k_o + O)`.
    pub fn v_o(&self, o: f64) -> Result<f64, KineticsError> {
        nonnegative("O", o)?;
        Ok(self.v_omax * o / (self.k_o + o))
    }

    /// Glucose uptake with ethanol inhibition.
    pub fn v_g(&self, g: f64, e: f64) -> Result<f64, KineticsError> {
        nonnegative("G", g)?;
        nonnegative("E", e)?;
        Ok(self.v_gmax * (g / (self.k_g + g)) * (1.0 / (1.0 + e / self.k_ie_g)))
    }

    /// Xylose uptake with ethanol and glucose inhibition.
    pub fn v_z(&self, g: f64, z: f64, e: f64) -> Result<f64, KineticsError> {
        nonnegative("G", g)?;
        nonnegative("Z", z)?;
        nonnegative("E", e)?;
        Ok(self.v_zmax
            * (z / (self.k_z + z))
            * (1.0 / (1.0 + e / self.k_ie_z))
            * (1.0 / (1.0 + g / self.k_ig)))
    }

    fn check_scaled(&self, p: &ScaledPoint) -> Result<(), KineticsError> {
        if !(p.x7 > EPS_VOL) {
            return Err(KineticsError::VolumeTooSmall(p.x7));
        }
        let denominators = [
            self.k_g * p.x7 + p.x3,
            self.k_z * p.x7 + p.x4,
            p.x7 + p.x5 / self.k_ie_g,
            p.x7 + p.x5 / self.k_ie_z,
            p.x7 + p.x3 / self.k_ig,
        ];
        if denominators.iter().all(|d| *d > 0.0) {
            Ok(())
        } else {
            Err(KineticsError::DegenerateDenominator { x3: p.x3, x4: p.x4, x5: p.x5, x7: p.x7 })
        }
    }

    /// `v_gmax · x3·x7 / ((k_g·x7 + x3)(x7 + x5/k_ie_g))`.
    pub fn v_g_scaled(&self, x3: f64, x5: f64, x7: f64) -> Result<f64, KineticsError> {
        let p = ScaledPoint::new(x3, 0.0, x5, x7);
        self.check_scaled(&p)?;
        Ok(self.v_gmax * (x3 / (self.k_g * x7 + x3)) * (x7 / (x7 + x5 / self.k_ie_g)))
    }

    /// `v_zmax · x4·x7² / ((k_z·x7 + x4)(x7 + x3/k_ig)(x7 + x5/k_ie_z))`.
    pub fn v_z_scaled(&self, x3: f64, x4: f64, x5: f64, x7: f64) -> Result<f64, KineticsError> {
        let p = ScaledPoint::new(x3, x4, x5, x7);
        self.check_scaled(&p)?;
        Ok(self.v_zmax
            * (x4 / (self.k_z * x7 + x4))
            * (x7 / (x7 + x3 / self.k_ig))
            * (x7 / (x7 + x5 / self.k_ie_z)))
    }

    /// Closed-form first partials of a scaled rate.
    pub fn partials(&self, p: ScaledPoint, rate: Rate) -> Result<RateGradient, KineticsError> {
        self.check_scaled(&p)?;
        let ScaledPoint { x3, x4, x5, x7 } = p;
        match rate {
            Rate::Glucose => {
                let sat = self.k_g * x7 + x3;
                let inh = x7 + x5 / self.k_ie_g;
                let value = self.v_gmax * (x3 / sat) * (x7 / inh);
                Ok(RateGradient {
                    value,
                    d_x3: self.v_gmax * (self.k_g * x7 / (sat * sat)) * (x7 / inh),
                    d_x4: 0.0,
                    d_x5: -value / (self.k_ie_g * inh),
                    d_x7: value * (1.0 / x7 - self.k_g / sat - 1.0 / inh),
                })
            }
            Rate::Xylose => {
                let sat = self.k_z * x7 + x4;
                let glc = x7 + x3 / self.k_ig;
                let eth = x7 + x5 / self.k_ie_z;
                let value = self.v_zmax * (x4 / sat) * (x7 / glc) * (x7 / eth);
                Ok(RateGradient {
                    value,
                    d_x3: -value / (self.k_ig * glc),
                    d_x4: self.v_zmax * (self.k_z * x7 / (sat * sat)) * (x7 / glc) * (x7 / eth),
                    d_x5: -value / (self.k_ie_z * eth),
                    d_x7: value * (2.0 / x7 - self.k_z / sat - 1.0 / glc - 1.0 / eth),
                })
            }
        }
    }

    /// Value, gradient and Hessian of a scaled rate.
    pub fn jet(&self, p: ScaledPoint, rate: Rate) -> Result<RateJet, KineticsError> {
        self.check_scaled(&p)?;
        let ScaledPoint { x3, x4, x5, x7 } = p;
        let jet = match rate {
            Rate::Glucose => RateJet::constant(self.v_gmax)
                .mul(&saturation(x3, x7, self.k_g, X3))
                .mul(&inhibition(x5, x7, self.k_ie_g, X5)),
            Rate::Xylose => RateJet::constant(self.v_zmax)
                .mul(&saturation(x4, x7, self.k_z, X4))
                .mul(&inhibition(x3, x7, self.k_ig, X3))
                .mul(&inhibition(x5, x7, self.k_ie_z, X5)),
        };
        Ok(jet)
    }
}
