//! Stationary two-component wave for one pass through a delta-function
//! Stern-Gerlach magnet, and the spinor guidance velocity it induces.
//!
//! Coordinates are device-local: `y` runs along the beam, `z` along the
//! field gradient (the device axis n̂). Units are ħ = m = 1, so a plane wave
//! `e^{iky}` moves with velocity `k`.
//!
//! Upstream (`y < 0`) the packet is a top-hat of width `w`:
//!
//! ```text
//! Ψ = e^{iky} (a₊ χ₊n + a₋ χ₋n),            |z| ≤ w/2
//! ```
//!
//! Downstream the two components pick up opposite transverse momenta ±κ and
//! slide apart as bands of width `w` with edges of slope ±κ/k′:
//!
//! ```text
//! Ψ = e^{ik′y} (e^{+iκz} a₊ χ₊n [up band] + e^{−iκz} a₋ χ₋n [down band])
//! ```
//!
//! Matching at `y = 0` to first order in κw gives C = A and a reflected
//! amplitude B = ±iκC. The reflected wave is small in the gentle-field limit
//! and is not simulated.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spinor::{self, MeasurementAxis, Spinor, NORM_TOLERANCE};

/// ‖Ψ‖² below this means the particle has left the wave's support.
pub const ZERO_AMPLITUDE: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveFieldError {
    #[error("invalid device: {0}")]
    InvalidDevice(String),
    #[error("device amplitudes not normalized: |a+|^2 + |a-|^2 = {0}")]
    NotNormalized(f64),
    #[error("zero wave amplitude at (y={y}, z={z}); trajectory left the packet support")]
    ZeroAmplitude { y: f64, z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Standard,
    Reversed,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Standard => "standard",
            Polarity::Reversed => "reversed",
        })
    }
}

/// Accuracy conditions of the delta-function model. They are reported,
/// never enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidityWarning {
    /// κ/k > 0.1: the impulse is not small compared to the beam momentum.
    StrongImpulse { kappa_over_k: f64 },
    /// κw > 0.1: the packet is not narrow compared to 1/κ.
    WidePacket { kappa_w: f64 },
}

impl fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityWarning::StrongImpulse { kappa_over_k } => {
                write!(
                    f,
                    "kappa/k = {kappa_over_k} exceeds 0.1; field is not gentle"
                )
            }
            ValidityWarning::WidePacket { kappa_w } => {
                write!(
                    f,
                    "kappa*w = {kappa_w} exceeds 0.1; packet is not narrow compared to 1/kappa"
                )
            }
        }
    }
}

/// One Stern-Gerlach apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceConfig {
    #[serde(serialize_with = "ser_axis")]
    axis: MeasurementAxis,
    polarity: Polarity,
    w: f64,
    k: f64,
    kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_length: Option<f64>,
}

fn ser_axis<S: serde::Serializer>(axis: &MeasurementAxis, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(axis.theta())
}

impl DeviceConfig {
    pub fn new(
        axis: MeasurementAxis,
        polarity: Polarity,
        w: f64,
        k: f64,
        kappa: f64,
    ) -> Result<Self, WaveFieldError> {
        let bad = |m: &str| Err(WaveFieldError::InvalidDevice(m.to_string()));
        if !(w.is_finite() && w > 0.0) {
            return bad("w must be finite and > 0");
        }
        if !(k.is_finite() && k > 0.0) {
            return bad("k must be finite and > 0");
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return bad("kappa must be finite and > 0");
        }
        if kappa >= k {
            return bad("kappa must be < k");
        }
        Ok(Self {
            axis,
            polarity,
            w,
            k,
            kappa,
            packet_length: None,
        })
    }

    /// Builds the device from the magnet strength: κ = m μ b / (ħ² k), ħ = 1.
    pub fn from_physical(
        axis: MeasurementAxis,
        polarity: Polarity,
        w: f64,
        k: f64,
        mass: f64,
        mu: f64,
        b: f64,
    ) -> Result<Self, WaveFieldError> {
        Self::new(axis, polarity, w, k, mass * mu * b / k)
    }

    pub fn with_packet_length(mut self, length: f64) -> Self {
        self.packet_length = Some(length);
        self
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    pub fn with_axis(mut self, axis: MeasurementAxis) -> Self {
        self.axis = axis;
        self
    }

    pub fn axis(&self) -> MeasurementAxis {
        self.axis
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn packet_length(&self) -> Option<f64> {
        self.packet_length
    }

    /// k′ = √(k² − κ²), from energy conservation across the magnet.
    pub fn k_prime(&self) -> f64 {
        (self.k * self.k - self.kappa * self.kappa).sqrt()
    }

    /// Edge slope κ/k′ of the deflected bands.
    pub fn spread(&self) -> f64 {
        self.kappa / self.k_prime()
    }

    /// Length of the overlap triangle along y: w k′ / (2κ).
    pub fn overlap_length(&self) -> f64 {
        self.w * self.k_prime() / (2.0 * self.kappa)
    }

    /// Transverse extent `[lo, hi]` of the up-deflected band at `y ≥ 0`.
    pub fn upper_band(&self, y: f64) -> (f64, f64) {
        let shift = self.spread() * y;
        (-0.5 * self.w + shift, 0.5 * self.w + shift)
    }

    pub fn lower_band(&self, y: f64) -> (f64, f64) {
        let shift = self.spread() * y;
        (-0.5 * self.w - shift, 0.5 * self.w - shift)
    }

    pub fn warnings(&self) -> Vec<ValidityWarning> {
        let mut out = Vec::new();
        let ratio = self.kappa / self.k;
        if ratio > 0.1 {
            out.push(ValidityWarning::StrongImpulse {
                kappa_over_k: ratio,
            });
        }
        let kw = self.kappa * self.w;
        if kw > 0.1 {
            out.push(ValidityWarning::WidePacket { kappa_w: kw });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Incident,
    Overlap,
    #[serde(rename = "upper")]
    UpperBranch,
    #[serde(rename = "lower")]
    LowerBranch,
    Vacuum,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Incident => "incident",
            Region::Overlap => "overlap",
            Region::UpperBranch => "upper",
            Region::LowerBranch => "lower",
            Region::Vacuum => "vacuum",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Region of the (y, z) plane for device `d`. Edges are inclusive, and a
/// point on several edges goes to the first of Overlap, UpperBranch,
/// LowerBranch, Incident.
pub fn classify_region(y: f64, z: f64, d: &DeviceConfig) -> Region {
    if y < 0.0 {
        return if z.abs() <= 0.5 * d.w {
            Region::Incident
        } else {
            Region::Vacuum
        };
    }
    let (ulo, uhi) = d.upper_band(y);
    let (llo, lhi) = d.lower_band(y);
    let in_up = ulo <= z && z <= uhi;
    let in_down = llo <= z && z <= lhi;
    match (in_up, in_down) {
        (true, true) => Region::Overlap,
        (true, false) => Region::UpperBranch,
        (false, true) => Region::LowerBranch,
        (false, false) => Region::Vacuum,
    }
}

/// Guidance law dX/dt = Im(Ψ†∇Ψ)/Ψ†Ψ with the spin index summed, given Ψ
/// and its two partial derivatives at a point.
pub fn guidance_velocity(
    psi: [Complex64; 2],
    d_dy: [Complex64; 2],
    d_dz: [Complex64; 2],
) -> Option<(f64, f64)> {
    let rho: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if rho < ZERO_AMPLITUDE {
        return None;
    }
    let current = |g: [Complex64; 2]| (psi[0].conj() * g[0] + psi[1].conj() * g[1]).im;
    Some((current(d_dy) / rho, current(d_dz) / rho))
}

/// Wave for one passage, carrying the input spinor's amplitudes in the
/// device eigenbasis. Overall amplitude is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveField {
    device: DeviceConfig,
    a_plus: Complex64,
    a_minus: Complex64,
    basis: (Spinor, Spinor),
}

/// A plane-wave term `coef · e^{i(q_y y + q_z z)} · spinor`.
struct Term {
    coef: Complex64,
    spinor: Spinor,
    q_y: f64,
    q_z: f64,
}

impl WaveField {
    /// `a_plus` multiplies the component deflected toward +z.
    pub fn new(
        device: DeviceConfig,
        a_plus: Complex64,
        a_minus: Complex64,
    ) -> Result<Self, WaveFieldError> {
        let n = a_plus.norm_sqr() + a_minus.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(WaveFieldError::NotNormalized(n));
        }
        Ok(Self {
            device,
            a_plus,
            a_minus,
            basis: spinor::eigenspinors(device.axis()),
        })
    }

    /// Decomposes `s` in the device basis. Polarity is not applied here.
    pub fn from_spinor(device: DeviceConfig, s: &Spinor) -> Result<Self, WaveFieldError> {
        let (a, b) = spinor::decompose(s, device.axis());
        Self::new(device, a, b)
    }

    pub fn device(&self) -> &DeviceConfig {
        &self.device
    }

    pub fn a_plus(&self) -> Complex64 {
        self.a_plus
    }

    pub fn a_minus(&self) -> Complex64 {
        self.a_minus
    }

    /// |a₊|² − |a₋|², the drift fraction inside the overlap.
    pub fn imbalance(&self) -> f64 {
        self.a_plus.norm_sqr() - self.a_minus.norm_sqr()
    }

    fn terms(&self, y: f64, z: f64) -> [Option<Term>; 2] {
        let d = &self.device;
        let (plus, minus) = self.basis;
        let kp = d.k_prime();
        let up = Term {
            coef: self.a_plus,
            spinor: plus,
            q_y: kp,
            q_z: d.kappa,
        };
        let down = Term {
            coef: self.a_minus,
            spinor: minus,
            q_y: kp,
            q_z: -d.kappa,
        };
        match classify_region(y, z, d) {
            Region::Vacuum => [None, None],
            Region::Incident => [
                Some(Term {
                    coef: self.a_plus,
                    spinor: plus,
                    q_y: d.k,
                    q_z: 0.0,
                }),
                Some(Term {
                    coef: self.a_minus,
                    spinor: minus,
                    q_y: d.k,
                    q_z: 0.0,
                }),
            ],
            Region::Overlap => [Some(up), Some(down)],
            Region::UpperBranch => [Some(up), None],
            Region::LowerBranch => [None, Some(down)],
        }
    }

    /// Ψ(y, z) and its y/z derivatives, components in the σ_z basis.
    pub fn psi_with_gradient(&self, y: f64, z: f64) -> [[Complex64; 2]; 3] {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = [[zero; 2]; 3];
        for t in self.terms(y, z).into_iter().flatten() {
            let phase = Complex64::from_polar(1.0, t.q_y * y + t.q_z * z);
            let amp = t.coef * phase;
            let comps = t.spinor.scale(amp);
            for i in 0..2 {
                out[0][i] += comps[i];
                out[1][i] += comps[i] * Complex64::new(0.0, t.q_y);
                out[2][i] += comps[i] * Complex64::new(0.0, t.q_z);
            }
        }
        out
    }

    pub fn psi(&self, y: f64, z: f64) -> [Complex64; 2] {
        self.psi_with_gradient(y, z)[0]
    }

    pub fn density(&self, y: f64, z: f64) -> f64 {
        self.psi(y, z).iter().map(|c| c.norm_sqr()).sum()
    }

    /// Guidance velocity (v_y, v_z) from the closed-form Ψ and ∇Ψ.
    pub fn velocity(&self, y: f64, z: f64) -> Result<(f64, f64), WaveFieldError> {
        let [psi, dy, dz] = self.psi_with_gradient(y, z);
        guidance_velocity(psi, dy, dz).ok_or(WaveFieldError::ZeroAmplitude { y, z })
    }

    /// Constant velocity of each region: (k, 0) upstream, (k′, κ(|a₊|²−|a₋|²))
    /// in the overlap and (k′, ±κ) in the separated branches.
    pub fn region_velocity(&self, region: Region) -> Option<(f64, f64)> {
        let d = &self.device;
        match region {
            Region::Incident => Some((d.k, 0.0)),
            Region::Overlap => Some((d.k_prime(), d.kappa * self.imbalance())),
            Region::UpperBranch => Some((d.k_prime(), d.kappa)),
            Region::LowerBranch => Some((d.k_prime(), -d.kappa)),
            Region::Vacuum => None,
        }
    }
}
