use serde::{Deserialize, Serialize};

/// Affine model of growth rate and ethanol flux in the glucose and xylose
/// uptake rates:
///
/// `mu = a1·v_g + a2·v_z + mu_bar`, `v_e = b1·v_g + b2·v_z + v_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub mu_bar: f64,
    pub v_bar: f64,
}

impl SurrogateCoeffs {
    pub fn mu(&self, v_g: f64, v_z: f64) -> f64 {
        self.a1 * v_g + self.a2 * v_z + self.mu_bar
    }

    pub fn v_e(&self, v_g: f64, v_z: f64) -> f64 {
        self.b1 * v_g + self.b2 * v_z + self.v_bar
    }

    /// Whether `a1, a2, b1, b2, mu_bar` are all strictly positive.
    pub fn has_positive_yields(&self) -> bool {
        [self.a1, self.a2, self.b1, self.b2, self.mu_bar].iter().all(|v| *v > 0.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.a1, self.a2, self.b1, self.b2, self.mu_bar, self.v_bar]
            .iter()
            .all(|v| v.is_finite())
    }
}
