//! Two-component spin-1/2 algebra in the σ_z basis.
//!
//! Measurement axes live in the x–z plane, `n̂ = cosθ ẑ + sinθ x̂`, so every
//! σₙ is a real symmetric matrix and its eigenspinors are real.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for "normalized" checks throughout the crate.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpinorError {
    #[error("spinor has zero norm")]
    ZeroNorm,
    #[error("spinor component is not finite")]
    NonFinite,
    #[error("axis angle must be finite, got {0}")]
    NonFiniteAxis(f64),
}

/// A spinor `c₊ χ₊z + c₋ χ₋z`. Not normalized unless built so.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Spinor {
    c_plus: Complex64,
    c_minus: Complex64,
}

impl Spinor {
    pub fn new(c_plus: Complex64, c_minus: Complex64) -> Result<Self, SpinorError> {
        if !(c_plus.is_finite() && c_minus.is_finite()) {
            return Err(SpinorError::NonFinite);
        }
        let s = Self { c_plus, c_minus };
        if s.norm_sqr() <= 0.0 {
            return Err(SpinorError::ZeroNorm);
        }
        Ok(s)
    }

    /// Real-amplitude constructor, the common case for x–z plane states.
    pub fn real(c_plus: f64, c_minus: f64) -> Result<Self, SpinorError> {
        Self::new(Complex64::new(c_plus, 0.0), Complex64::new(c_minus, 0.0))
    }

    /// χ₊z
    pub fn up_z() -> Self {
        Self {
            c_plus: Complex64::new(1.0, 0.0),
            c_minus: Complex64::new(0.0, 0.0),
        }
    }

    /// χ₋z
    pub fn down_z() -> Self {
        Self {
            c_plus: Complex64::new(0.0, 0.0),
            c_minus: Complex64::new(1.0, 0.0),
        }
    }

    pub fn c_plus(&self) -> Complex64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> Complex64 {
        self.c_minus
    }

    pub fn components(&self) -> [Complex64; 2] {
        [self.c_plus, self.c_minus]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_plus.norm_sqr() + self.c_minus.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Returns the unit-norm spinor along the same ray, keeping the phase.
    pub fn normalize(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self {
            c_plus: self.c_plus / n,
            c_minus: self.c_minus / n,
        }
    }

    /// Multiplies both components by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        Self {
            c_plus: self.c_plus * p,
            c_minus: self.c_minus * p,
        }
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Spinor) -> Complex64 {
        self.c_plus.conj() * other.c_plus + self.c_minus.conj() * other.c_minus
    }

    pub fn scale(&self, a: Complex64) -> [Complex64; 2] {
        [self.c_plus * a, self.c_minus * a]
    }

    /// Rotates the global phase so the first nonzero component is real and
    /// non-negative. Components below 1e-14 in magnitude count as zero.
    pub fn canonical_phase(&self) -> Self {
        let lead = if self.c_plus.norm() > 1e-14 {
            self.c_plus
        } else {
            self.c_minus
        };
        let r = lead.norm();
        if r == 0.0 {
            return *self;
        }
        let rot = lead.conj() / r;
        let fix = |c: Complex64| {
            let c = c * rot;
            // Avoid -0.0 leaking into serialized output.
            Complex64::new(c.re + 0.0, c.im + 0.0)
        };
        Self {
            c_plus: fix(self.c_plus),
            c_minus: fix(self.c_minus),
        }
    }
}

impl From<Spinor> for [f64; 4] {
    fn from(s: Spinor) -> Self {
        [s.c_plus.re, s.c_plus.im, s.c_minus.re, s.c_minus.im]
    }
}

impl TryFrom<[f64; 4]> for Spinor {
    type Error = SpinorError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        Spinor::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
    }
}

impl fmt::Display for Spinor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.c_plus, self.c_minus)
    }
}

/// Direction `n̂ = cosθ ẑ + sinθ x̂`, with θ canonicalized into `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MeasurementAxis {
    theta: f64,
}

impl MeasurementAxis {
    pub fn new(theta: f64) -> Result<Self, SpinorError> {
        if !theta.is_finite() {
            return Err(SpinorError::NonFiniteAxis(theta));
        }
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Ok(Self { theta: t + 0.0 })
    }

    pub fn z() -> Self {
        Self { theta: 0.0 }
    }

    pub fn x() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unit vector as (x, z) components.
    pub fn direction(&self) -> (f64, f64) {
        (self.theta.sin(), self.theta.cos())
    }

    /// Rows of σₙ = [[cosθ, sinθ], [sinθ, −cosθ]].
    pub fn sigma(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[c, s], [s, -c]]
    }

    /// Short human label: `z`, `x`, `-z`, `-x`, or the angle in radians.
    pub fn label(&self) -> String {
        const NAMED: [(f64, &str); 4] = [
            (0.0, "z"),
            (std::f64::consts::FRAC_PI_2, "x"),
            (std::f64::consts::PI, "-z"),
            (3.0 * std::f64::consts::FRAC_PI_2, "-x"),
        ];
        for (t, name) in NAMED {
            if (self.theta - t).abs() < 1e-12 {
                return name.to_string();
            }
        }
        format!("theta={:.6}", self.theta)
    }
}

impl Default for MeasurementAxis {
    fn default() -> Self {
        Self::z()
    }
}

/// Unit eigenvectors `(χ₊n, χ₋n)` of σₙ for eigenvalues +1 and −1.
pub fn eigenspinors(axis: MeasurementAxis) -> (Spinor, Spinor) {
    let (s, c) = (axis.theta() / 2.0).sin_cos();
    let plus = Spinor {
        c_plus: Complex64::new(c, 0.0),
        c_minus: Complex64::new(s, 0.0),
    };
    let minus = Spinor {
        c_plus: Complex64::new(-s, 0.0),
        c_minus: Complex64::new(c, 0.0),
    };
    (plus.canonical_phase(), minus.canonical_phase())
}

/// Coefficients `(c₊n, c₋n)` with `s = c₊n χ₊n + c₋n χ₋n`.
///
/// `s` is expected to be normalized; the result is then normalized too.
pub fn decompose(s: &Spinor, axis: MeasurementAxis) -> (Complex64, Complex64) {
    let (plus, minus) = eigenspinors(axis);
    (plus.inner(s), minus.inner(s))
}

/// Rebuilds a spinor from device-basis coefficients.
pub fn recompose(
    c_plus_n: Complex64,
    c_minus_n: Complex64,
    axis: MeasurementAxis,
) -> [Complex64; 2] {
    let (plus, minus) = eigenspinors(axis);
    let p = plus.scale(c_plus_n);
    let m = minus.scale(c_minus_n);
    [p[0] + m[0], p[1] + m[1]]
}

/// Born probabilities `(|c₊n|², |c₋n|²)`.
pub fn born_probabilities(s: &Spinor, axis: MeasurementAxis) -> (f64, f64) {
    let (a, b) = decompose(s, axis);
    (a.norm_sqr(), b.norm_sqr())
}
