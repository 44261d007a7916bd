//! Two spin-1/2 particles with entangled spin, each passing its own
//! Stern-Gerlach device.
//!
//! Spatial packets only serve as branch bookkeeping. Whichever particle is
//! measured first moves through its device with the overlap drift set by its
//! marginal weights W± (the spin sum taken over the partner's index too).
//! After it lands in a branch, the partner is guided by its conditional
//! spinor, obtained by projecting the joint spin state on the first
//! particle's outcome eigenspinor.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apparatus::{self, ApparatusError, OutcomeLabel, Sign};
use crate::ensemble;
use crate::spinor::{self, MeasurementAxis, Spinor, NORM_TOLERANCE};
use crate::trajectory::{self, Branch, TrajectoryError, TrajectoryRecord};
use crate::wavefield::{DeviceConfig, Polarity, WaveField, WaveFieldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntangledError {
    #[error("two-particle amplitudes not normalized: sum |a|^2 = {0}")]
    NotNormalized(f64),
    #[error("state is not a product state (|det| = {0})")]
    NotProduct(f64),
    #[error("measured branch carries no amplitude")]
    EmptyBranch,
    #[error("scenario needs n > 0")]
    EmptyEnsemble,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Apparatus(#[from] ApparatusError),
}

impl From<WaveFieldError> for EntangledError {
    fn from(e: WaveFieldError) -> Self {
        EntangledError::Trajectory(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Particle {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Particle {
    pub fn other(self) -> Self {
        match self {
            Particle::One => Particle::Two,
            Particle::Two => Particle::One,
        }
    }
}

/// Joint spin amplitudes `a(s₁, s₂)` in the z⊗z basis; index 0 is `+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoParticleSpinState {
    amps: [[Complex64; 2]; 2],
}

impl TwoParticleSpinState {
    pub fn new(amps: [[Complex64; 2]; 2]) -> Result<Self, EntangledError> {
        let n: f64 = amps.iter().flatten().map(|a| a.norm_sqr()).sum();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(EntangledError::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    /// χ¹ ⊗ χ² for normalized single-particle spinors.
    pub fn product(first: &Spinor, second: &Spinor) -> Self {
        let (a, b) = (first.components(), second.components());
        Self {
            amps: [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]],
        }
    }

    pub fn amps(&self) -> [[Complex64; 2]; 2] {
        self.amps
    }

    pub fn amp(&self, s1: Sign, s2: Sign) -> Complex64 {
        self.amps[idx(s1)][idx(s2)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes `b(σ₁, σ₂)` in the eigenbases of σ_{n₁} ⊗ σ_{n₂}.
    pub fn in_basis(&self, axis1: MeasurementAxis, axis2: MeasurementAxis) -> [[Complex64; 2]; 2] {
        let (p1, m1) = spinor::eigenspinors(axis1);
        let (p2, m2) = spinor::eigenspinors(axis2);
        let b1 = [p1.components(), m1.components()];
        let b2 = [p2.components(), m2.components()];
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, e1) in b1.iter().enumerate() {
            for (j, e2) in b2.iter().enumerate() {
                for (c1, row) in e1.iter().zip(&self.amps) {
                    for (c2, a) in e2.iter().zip(row) {
                        out[i][j] += c1.conj() * c2.conj() * a;
                    }
                }
            }
        }
        out
    }

    /// Quantum joint probabilities `P(σ₁, σ₂)` for spin measurements along
    /// the two axes.
    pub fn joint_probabilities(
        &self,
        axis1: MeasurementAxis,
        axis2: MeasurementAxis,
    ) -> [[f64; 2]; 2] {
        let b = self.in_basis(axis1, axis2);
        [
            [b[0][0].norm_sqr(), b[0][1].norm_sqr()],
            [b[1][0].norm_sqr(), b[1][1].norm_sqr()],
        ]
    }
}

fn idx(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

/// (χ¹₊z χ²₋z − χ¹₋z χ²₊z)/√2
pub fn singlet() -> TwoParticleSpinState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Complex64::new(0.0, 0.0);
    TwoParticleSpinState {
        amps: [
            [zero, Complex64::new(h, 0.0)],
            [Complex64::new(-h, 0.0), zero],
        ],
    }
}

/// Spin weights `(W₊, W₋)` of `particle` along `axis`, summed over the
/// partner's spin index.
pub fn marginal_weights(
    state: &TwoParticleSpinState,
    particle: Particle,
    axis: MeasurementAxis,
) -> (f64, f64) {
    let (plus, minus) = spinor::eigenspinors(axis);
    let weight = |e: &Spinor| -> f64 {
        let e = e.components();
        (0..2)
            .map(|other| {
                let amp: Complex64 = (0..2)
                    .map(|s| {
                        let a = match particle {
                            Particle::One => state.amps[s][other],
                            Particle::Two => state.amps[other][s],
                        };
                        e[s].conj() * a
                    })
                    .sum();
                amp.norm_sqr()
            })
            .sum()
    };
    (weight(&plus), weight(&minus))
}

/// Spinor of the partner of `measured` once `measured` is known to be in
/// spin state `e`, normalized with the eigenspinor phase convention.
fn project_partner(
    state: &TwoParticleSpinState,
    measured: Particle,
    e: &Spinor,
) -> Result<Spinor, EntangledError> {
    let e = e.components();
    let mut c = [Complex64::new(0.0, 0.0); 2];
    for (other, slot) in c.iter_mut().enumerate() {
        for (s, es) in e.iter().enumerate() {
            let a = match measured {
                Particle::One => state.amps[s][other],
                Particle::Two => state.amps[other][s],
            };
            *slot += es.conj() * a;
        }
    }
    Spinor::new(c[0], c[1])
        .map(|s| s.normalize().canonical_phase())
        .map_err(|_| EntangledError::EmptyBranch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstMeasurement {
    pub particle: Particle,
    pub branch: Branch,
    pub label: OutcomeLabel,
    pub collapsed: TwoParticleSpinState,
    pub record: TrajectoryRecord,
}

/// Measures `particle` before its partner. The overlap drift is κ(W₊ − W₋)
/// in the device basis; the partner's spin collapses onto the conditional
/// spinor for the observed outcome.
pub fn first_measurement(
    state: &TwoParticleSpinState,
    particle: Particle,
    device: &DeviceConfig,
    z0: f64,
) -> Result<FirstMeasurement, EntangledError> {
    let (w_plus, w_minus) = marginal_weights(state, particle, device.axis());
    // Renormalize away rounding so the wavefield's norm check holds.
    let total = w_plus + w_minus;
    let (a, b) = (
        Complex64::new((w_plus / total).sqrt(), 0.0),
        Complex64::new((w_minus / total).sqrt(), 0.0),
    );
    let field = match device.polarity() {
        Polarity::Standard => WaveField::new(*device, a, b)?,
        Polarity::Reversed => WaveField::new(*device, b, a)?,
    };
    let (y0, y1) = apparatus::passage_span(device);
    let record = trajectory::propagate_analytic(z0, &field, y0, y1)?;
    let branch = record.exit_branch;
    let label = apparatus::label_outcome(branch, device);
    let (plus, minus) = spinor::eigenspinors(device.axis());
    let own = match label.sign {
        Sign::Plus => plus,
        Sign::Minus => minus,
    };
    let partner = project_partner(state, particle, &own)?;
    let collapsed = match particle {
        Particle::One => TwoParticleSpinState::product(&own, &partner),
        Particle::Two => TwoParticleSpinState::product(&partner, &own),
    };
    Ok(FirstMeasurement {
        particle,
        branch,
        label,
        collapsed,
        record,
    })
}

/// Spinor guiding `particle` in a product state.
pub fn conditional_spinor(
    collapsed: &TwoParticleSpinState,
    particle: Particle,
) -> Result<Spinor, EntangledError> {
    let a = collapsed.amps;
    let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).norm();
    if det > 1e-10 {
        return Err(EntangledError::NotProduct(det));
    }
    let line = |i: usize| -> [Complex64; 2] {
        match particle {
            Particle::Two => a[i],
            Particle::One => [a[0][i], a[1][i]],
        }
    };
    let norm = |v: [Complex64; 2]| v[0].norm_sqr() + v[1].norm_sqr();
    let best = if norm(line(0)) >= norm(line(1)) {
        line(0)
    } else {
        line(1)
    };
    Spinor::new(best[0], best[1])
        .map(|s| s.normalize().canonical_phase())
        .map_err(|_| EntangledError::NotProduct(det))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementOrder {
    #[default]
    Particle1First,
    Particle2First,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub state: TwoParticleSpinState,
    /// `None` when Alice removes her device.
    pub device1: Option<DeviceConfig>,
    pub device2: DeviceConfig,
    pub order: MeasurementOrder,
    pub z0_1: f64,
    pub z0_2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub outcome1: Option<OutcomeLabel>,
    pub outcome2: OutcomeLabel,
    pub record1: Option<TrajectoryRecord>,
    pub record2: TrajectoryRecord,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, EntangledError> {
    let Some(device1) = cfg.device1 else {
        let m2 = first_measurement(&cfg.state, Particle::Two, &cfg.device2, cfg.z0_2)?;
        return Ok(ScenarioResult {
            outcome1: None,
            outcome2: m2.label,
            record1: None,
            record2: m2.record,
        });
    };
    match cfg.order {
        MeasurementOrder::Particle1First => {
            let m1 = first_measurement(&cfg.state, Particle::One, &device1, cfg.z0_1)?;
            let guide = conditional_spinor(&m1.collapsed, Particle::Two)?;
            let p2 = apparatus::pass_device(&guide, cfg.z0_2, &cfg.device2)?;
            Ok(ScenarioResult {
                outcome1: Some(m1.label),
                outcome2: p2.label,
                record1: Some(m1.record),
                record2: p2.record,
            })
        }
        MeasurementOrder::Particle2First => {
            let m2 = first_measurement(&cfg.state, Particle::Two, &cfg.device2, cfg.z0_2)?;
            let guide = conditional_spinor(&m2.collapsed, Particle::One)?;
            let p1 = apparatus::pass_device(&guide, cfg.z0_1, &device1)?;
            Ok(ScenarioResult {
                outcome1: Some(p1.label),
                outcome2: m2.label,
                record1: Some(p1.record),
                record2: m2.record,
            })
        }
    }
}

/// Joint outcome counts over an ensemble; positions of particle 1 and 2 are
/// drawn from streams 0 and 1. `cfg.z0_1` and `cfg.z0_2` are ignored.
pub fn run_scenario_ensemble(
    cfg: &ScenarioConfig,
    n: u64,
    seed: u64,
) -> Result<BTreeMap<(Option<Sign>, Sign), u64>, EntangledError> {
    let mut counts = BTreeMap::new();
    let w1 = cfg.device1.map_or(cfg.device2.w(), |d| d.w());
    for i in 0..n {
        let mut c = cfg.clone();
        c.z0_1 = ensemble::transverse_position(seed, 0, i, w1);
        c.z0_2 = ensemble::transverse_position(seed, 1, i, cfg.device2.w());
        let r = run_scenario(&c)?;
        *counts
            .entry((r.outcome1.map(|l| l.sign), r.outcome2.sign))
            .or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub theta1: f64,
    pub theta2: f64,
    pub n: u64,
    /// Mean of sign₁·sign₂.
    #[serde(rename = "E")]
    pub e: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of ⟨sign₁ sign₂⟩ for the singlet over every
/// (θ₁, θ₂) pair, particle 1 measured first. `geometry` supplies w, k, κ;
/// its axis and polarity are replaced.
pub fn correlation_sweep(
    theta1_list: &[f64],
    theta2_list: &[f64],
    n: u64,
    seed: u64,
    geometry: &DeviceConfig,
) -> Result<Vec<CorrelationRow>, EntangledError> {
    if n == 0 {
        return Err(EntangledError::EmptyEnsemble);
    }
    let state = singlet();
    let mut rows = Vec::with_capacity(theta1_list.len() * theta2_list.len());
    let mut pair = 0u64;
    for &theta1 in theta1_list {
        for &theta2 in theta2_list {
            let base = geometry.with_polarity(Polarity::Standard);
            let d1 = base.with_axis(
                MeasurementAxis::new(theta1)
                    .map_err(|_| TrajectoryError::InvalidRange(format!("theta1 {theta1}")))?,
            );
            let d2 = base.with_axis(
                MeasurementAxis::new(theta2)
                    .map_err(|_| TrajectoryError::InvalidRange(format!("theta2 {theta2}")))?,
            );
            let mut sum = 0i64;
            for i in 0..n {
                let cfg = ScenarioConfig {
                    state,
                    device1: Some(d1),
                    device2: d2,
                    order: MeasurementOrder::Particle1First,
                    z0_1: ensemble::transverse_position(seed, 2 * pair, i, d1.w()),
                    z0_2: ensemble::transverse_position(seed, 2 * pair + 1, i, d2.w()),
                };
                let r = run_scenario(&cfg)?;
                let s1 = r.outcome1.expect("device 1 present").sign.value();
                sum += (s1 * r.outcome2.sign.value()) as i64;
            }
            let e = sum as f64 / n as f64;
            let stderr = ((1.0 - e * e).max(0.0) / n as f64).sqrt();
            rows.push(CorrelationRow {
                theta1,
                theta2,
                n,
                e,
                stderr,
            });
            pair += 1;
        }
    }
    Ok(rows)
}

/// |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)| from four correlations.
pub fn chsh(e_ab: f64, e_abp: f64, e_apb: f64, e_apbp: f64) -> f64 {
    (e_ab - e_abp + e_apb + e_apbp).abs()
}
