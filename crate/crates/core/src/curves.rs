//! DOE-2 style performance curves.

use serde::{Deserialize, Serialize};

/// `c0 + c1·x + c2·x² + c3·y + c4·y² + c5·x·y`
///
/// For chiller curves `x` is the chilled water supply temperature and `y`
/// the condenser water supply temperature, both in °F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquadratic {
    pub coefficients: [f64; 6],
}

impl Biquadratic {
    /// Builds the absolute-form curve from coefficients written around a
    /// reference point `(x0, y0)`, i.e. in powers of `x − x0` and `y − y0`.
    pub fn centered(x0: f64, y0: f64, c: [f64; 6]) -> Self {
        let [a, b, cc, d, e, f] = c;
        Self {
            coefficients: [
                a - b * x0 + cc * x0 * x0 - d * y0 + e * y0 * y0 + f * x0 * y0,
                b - 2.0 * cc * x0 - f * y0,
                cc,
                d - 2.0 * e * y0 - f * x0,
                e,
                f,
            ],
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let [c0, c1, c2, c3, c4, c5] = self.coefficients;
        c0 + c1 * x + c2 * x * x + c3 * y + c4 * y * y + c5 * x * y
    }
}

/// `c0 + c1·x + c2·x²`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub coefficients: [f64; 3],
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coefficients;
        c0 + x * (c1 + x * c2)
    }
}

/// `c0 + c1·x + c2·x² + c3·x³`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub coefficients: [f64; 4],
}

impl Cubic {
    pub const CUBE_LAW: Cubic = Cubic {
        coefficients: [0.0, 0.0, 0.0, 1.0],
    };

    pub fn eval(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coefficients;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.coefficients;
        c1 + x * (2.0 * c2 + x * 3.0 * c3)
    }
}
