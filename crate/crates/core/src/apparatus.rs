//! Stern-Gerlach devices as black boxes with two output ports, and chains
//! of them with post-selection.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spinor::{self, MeasurementAxis, Spinor};
use crate::trajectory::{self, Branch, TrajectoryError, TrajectoryRecord};
use crate::wavefield::{DeviceConfig, Polarity, WaveField, WaveFieldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApparatusError {
    #[error("invalid experiment chain: {0}")]
    Config(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

impl From<WaveFieldError> for ApparatusError {
    fn from(e: WaveFieldError) -> Self {
        ApparatusError::Trajectory(e.into())
    }
}

/// Spin value along a measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeLabel {
    pub axis: MeasurementAxis,
    pub sign: Sign,
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.axis.label())
    }
}

/// Calibration of a device: which spin value a deflection direction counts
/// as. A reversed-polarity magnet sends spin-down particles up.
pub fn label_outcome(branch: Branch, d: &DeviceConfig) -> OutcomeLabel {
    let sign = match (branch, d.polarity()) {
        (Branch::Upper, Polarity::Standard) | (Branch::Lower, Polarity::Reversed) => Sign::Plus,
        (Branch::Lower, Polarity::Standard) | (Branch::Upper, Polarity::Reversed) => Sign::Minus,
    };
    OutcomeLabel {
        axis: d.axis(),
        sign,
    }
}

/// Port that carries particles labelled `sign`.
pub fn port_for(sign: Sign, d: &DeviceConfig) -> Branch {
    match (sign, d.polarity()) {
        (Sign::Plus, Polarity::Standard) | (Sign::Minus, Polarity::Reversed) => Branch::Upper,
        _ => Branch::Lower,
    }
}

/// Canonical wavefield for spinor `s` in device `d`: the amplitude that is
/// deflected toward +z always sits in the `a_plus` slot, so a reversed
/// device swaps the device-basis amplitudes.
pub fn deflection_field(s: &Spinor, d: &DeviceConfig) -> Result<WaveField, WaveFieldError> {
    let (a, b) = spinor::decompose(s, d.axis());
    match d.polarity() {
        Polarity::Standard => WaveField::new(*d, a, b),
        Polarity::Reversed => WaveField::new(*d, b, a),
    }
}

/// Entry and exit planes used for every passage through `d`.
pub fn passage_span(d: &DeviceConfig) -> (f64, f64) {
    let dy = d.overlap_length();
    (-0.5 * dy, 1.5 * dy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub branch: Branch,
    pub label: OutcomeLabel,
    /// Spinor of the wave component that now surrounds the particle.
    pub post_spinor: Spinor,
    pub record: TrajectoryRecord,
}

pub fn pass_device(s: &Spinor, z0: f64, d: &DeviceConfig) -> Result<Passage, ApparatusError> {
    let field = deflection_field(s, d)?;
    let (y0, y1) = passage_span(d);
    let record = trajectory::propagate_analytic(z0, &field, y0, y1)?;
    let branch = record.exit_branch;
    let label = label_outcome(branch, d);
    let (plus, minus) = spinor::eigenspinors(d.axis());
    let post_spinor = match label.sign {
        Sign::Plus => plus,
        Sign::Minus => minus,
    };
    Ok(Passage {
        branch,
        label,
        post_spinor,
        record,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    KeepUpperPort,
    KeepLowerPort,
    MeasureBoth,
}

impl Selection {
    fn kept(self) -> Option<Branch> {
        match self {
            Selection::KeepUpperPort => Some(Branch::Upper),
            Selection::KeepLowerPort => Some(Branch::Lower),
            Selection::MeasureBoth => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub device: DeviceConfig,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentChain {
    stages: Vec<Stage>,
    input: Spinor,
}

impl ExperimentChain {
    pub fn new(stages: Vec<Stage>, input: Spinor) -> Result<Self, ApparatusError> {
        if stages.is_empty() {
            return Err(ApparatusError::Config("chain has no stages".into()));
        }
        if let Some(i) = stages[..stages.len() - 1]
            .iter()
            .position(|s| s.selection == Selection::MeasureBoth)
        {
            return Err(ApparatusError::Config(format!(
                "stage {i} measures both ports; only the last stage may"
            )));
        }
        if !input.is_normalized() {
            return Err(ApparatusError::Config(format!(
                "input spinor is not normalized (norm^2 = {})",
                input.norm_sqr()
            )));
        }
        Ok(Self { stages, input })
    }

    /// A single measuring device.
    pub fn single(device: DeviceConfig, input: Spinor) -> Result<Self, ApparatusError> {
        Self::new(
            vec![Stage {
                device,
                selection: Selection::MeasureBoth,
            }],
            input,
        )
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn input(&self) -> &Spinor {
        &self.input
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// How a particle's transverse coordinate is chosen at each stage after the
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransverseMode {
    /// A fresh coordinate per stage (taken from the supplied samples).
    #[default]
    Fresh,
    /// The exit position within the branch, re-centred on the next packet.
    /// Only meaningful when every stage measures along the same axis.
    CarryThrough,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainOutcome {
    Completed(Vec<(usize, OutcomeLabel)>),
    /// The particle left the post-selected beam at `stage`.
    Discarded {
        stage: usize,
        labels: Vec<(usize, OutcomeLabel)>,
    },
}

impl ChainOutcome {
    pub fn is_discarded(&self) -> bool {
        matches!(self, ChainOutcome::Discarded { .. })
    }

    pub fn labels(&self) -> &[(usize, OutcomeLabel)] {
        match self {
            ChainOutcome::Completed(l) => l,
            ChainOutcome::Discarded { labels, .. } => labels,
        }
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.labels().iter().map(|(_, l)| l.sign).collect()
    }
}

pub fn run_chain(
    chain: &ExperimentChain,
    transverse_samples: &[f64],
) -> Result<ChainOutcome, ApparatusError> {
    run_chain_with_mode(chain, transverse_samples, TransverseMode::Fresh)
}

/// Runs one particle through the chain. In `Fresh` mode one sample per stage
/// is required; in `CarryThrough` mode only the first is used.
pub fn run_chain_with_mode(
    chain: &ExperimentChain,
    transverse_samples: &[f64],
    mode: TransverseMode,
) -> Result<ChainOutcome, ApparatusError> {
    let needed = match mode {
        TransverseMode::Fresh => chain.len(),
        TransverseMode::CarryThrough => 1,
    };
    if transverse_samples.len() < needed {
        return Err(ApparatusError::Config(format!(
            "need {needed} transverse samples, got {}",
            transverse_samples.len()
        )));
    }
    if mode == TransverseMode::CarryThrough {
        let axis = chain.stages[0].device.axis();
        if chain.stages.iter().any(|s| s.device.axis() != axis) {
            return Err(ApparatusError::Config(
                "carry-through transverse mode needs every stage on the same axis".into(),
            ));
        }
    }

    let mut spin = *chain.input();
    let mut z0 = transverse_samples[0];
    let mut labels = Vec::with_capacity(chain.len());
    for (i, stage) in chain.stages.iter().enumerate() {
        let passage = pass_device(&spin, z0, &stage.device)?;
        labels.push((i, passage.label));
        if let Some(kept) = stage.selection.kept() {
            if kept != passage.branch {
                return Ok(ChainOutcome::Discarded { stage: i, labels });
            }
        }
        spin = passage.post_spinor;
        if let Some(next) = chain.stages.get(i + 1) {
            z0 = match mode {
                TransverseMode::Fresh => transverse_samples[i + 1],
                TransverseMode::CarryThrough => {
                    carry_position(&passage, &stage.device, &next.device)
                }
            };
        }
    }
    Ok(ChainOutcome::Completed(labels))
}

/// Maps the exit height within a branch band onto the next incident packet.
fn carry_position(p: &Passage, from: &DeviceConfig, to: &DeviceConfig) -> f64 {
    let end = p.record.end();
    let centre = match p.branch {
        Branch::Upper => from.spread() * end.y,
        Branch::Lower => -from.spread() * end.y,
    };
    let half = 0.5 * to.w();
    ((end.z - centre) * to.w() / from.w()).clamp(-half, half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn sg(axis: MeasurementAxis, polarity: Polarity) -> DeviceConfig {
        DeviceConfig::new(axis, polarity, 1.0, 100.0, 5.0).unwrap()
    }

    fn plus_x() -> Spinor {
        Spinor::real(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap()
    }

    #[test]
    fn labels_follow_polarity() {
        let z = sg(MeasurementAxis::z(), Polarity::Standard);
        let zr = sg(MeasurementAxis::z(), Polarity::Reversed);
        assert_eq!(label_outcome(Branch::Upper, &z).sign, Sign::Plus);
        assert_eq!(label_outcome(Branch::Lower, &z).sign, Sign::Minus);
        assert_eq!(label_outcome(Branch::Upper, &zr).sign, Sign::Minus);
        assert_eq!(label_outcome(Branch::Lower, &zr).sign, Sign::Plus);
        for d in [z, zr] {
            for s in [Sign::Plus, Sign::Minus] {
                assert_eq!(label_outcome(port_for(s, &d), &d).sign, s);
            }
        }
    }

    #[test]
    fn eigenstate_passes_unchanged() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        for z0 in [-0.5, -0.1, 0.3, 0.5] {
            let p = pass_device(&Spinor::up_z(), z0, &d).unwrap();
            assert_eq!(p.label.sign, Sign::Plus);
            assert_eq!(p.post_spinor, Spinor::up_z());
        }
    }

    #[test]
    fn plus_x_through_standard_and_reversed() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        let dr = sg(MeasurementAxis::z(), Polarity::Reversed);
        let p = pass_device(&plus_x(), 0.2, &d).unwrap();
        assert_eq!((p.branch, p.label.sign), (Branch::Upper, Sign::Plus));
        assert_eq!(p.post_spinor, Spinor::up_z());
        let p = pass_device(&plus_x(), 0.2, &dr).unwrap();
        assert_eq!((p.branch, p.label.sign), (Branch::Upper, Sign::Minus));
        assert_eq!(p.post_spinor, Spinor::down_z());
    }

    #[test]
    fn up_z_through_x_device() {
        let d = sg(MeasurementAxis::x(), Polarity::Standard);
        let p = pass_device(&Spinor::up_z(), 0.2, &d).unwrap();
        assert_eq!(p.label.sign, Sign::Plus);
        assert_eq!(p.label.axis, MeasurementAxis::x());
        assert_abs_diff_eq!(p.post_spinor.c_plus().re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.post_spinor.c_minus().re, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn reversed_label_is_swapped_amplitude_label_negated() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        let dr = sg(MeasurementAxis::z(), Polarity::Reversed);
        for i in 0..=12 {
            let angle = i as f64 * std::f64::consts::PI / 12.0;
            let s = Spinor::real(angle.cos(), angle.sin()).unwrap();
            let swapped = Spinor::real(angle.sin(), angle.cos()).unwrap();
            for j in 0..=20 {
                let z0 = -0.5 + j as f64 * 0.05;
                let rev = pass_device(&s, z0, &dr).unwrap();
                let std_swapped = pass_device(&swapped, z0, &d).unwrap();
                assert_eq!(rev.branch, std_swapped.branch);
                assert_eq!(rev.label.sign, std_swapped.label.sign.flip());
            }
        }
    }

    #[test]
    fn chain_validation() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        assert!(ExperimentChain::new(vec![], Spinor::up_z()).is_err());
        let both = Stage {
            device: d,
            selection: Selection::MeasureBoth,
        };
        let keep = Stage {
            device: d,
            selection: Selection::KeepUpperPort,
        };
        assert!(ExperimentChain::new(vec![both, keep], Spinor::up_z()).is_err());
        assert!(ExperimentChain::new(vec![keep, keep], Spinor::up_z()).is_ok());
        assert!(ExperimentChain::new(vec![both], Spinor::real(1.0, 1.0).unwrap()).is_err());
        let chain = ExperimentChain::new(vec![keep, both], Spinor::up_z()).unwrap();
        assert!(matches!(
            run_chain(&chain, &[0.0]),
            Err(ApparatusError::Config(_))
        ));
    }

    #[test]
    fn repeated_z_measurement_of_survivor() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        let chain = ExperimentChain::new(
            vec![
                Stage {
                    device: d,
                    selection: Selection::KeepUpperPort,
                },
                Stage {
                    device: d,
                    selection: Selection::MeasureBoth,
                },
            ],
            plus_x(),
        )
        .unwrap();
        for z0 in [-0.4, 0.1, 0.4] {
            for z1 in [-0.5, 0.0, 0.5] {
                match run_chain(&chain, &[z0, z1]).unwrap() {
                    ChainOutcome::Completed(l) => {
                        assert_eq!(l[1].1.sign, Sign::Plus);
                        assert!(z0 >= 0.0);
                    }
                    ChainOutcome::Discarded { stage, .. } => {
                        assert_eq!(stage, 0);
                        assert!(z0 < 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn single_stage_threshold_at_minus_sixth() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        let s = Spinor::real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap();
        let chain = ExperimentChain::single(d, s).unwrap();
        for j in 0..=100 {
            let z0 = -0.5 + j as f64 * 0.01;
            if (z0 + 1.0 / 6.0).abs() < 1e-9 {
                continue;
            }
            let out = run_chain(&chain, &[z0]).unwrap();
            assert_eq!(out.signs()[0] == Sign::Plus, z0 > -1.0 / 6.0, "z0={z0}");
        }
    }

    #[test]
    fn carry_through_requires_single_axis() {
        let chain = ExperimentChain::new(
            vec![
                Stage {
                    device: sg(MeasurementAxis::z(), Polarity::Standard),
                    selection: Selection::KeepUpperPort,
                },
                Stage {
                    device: sg(MeasurementAxis::x(), Polarity::Standard),
                    selection: Selection::MeasureBoth,
                },
            ],
            Spinor::up_z(),
        )
        .unwrap();
        assert!(run_chain_with_mode(&chain, &[0.0], TransverseMode::CarryThrough).is_err());
    }

    #[test]
    fn carry_through_maps_exit_band_onto_packet() {
        let d = sg(MeasurementAxis::z(), Polarity::Standard);
        let s = Spinor::real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap();
        let zc = -1.0 / 6.0;
        // Upper exits: z0 in [zc, 1/2] maps affinely onto [-1/2, 1/2].
        let lo = carry_position(&pass_device(&s, zc + 1e-12, &d).unwrap(), &d, &d);
        let hi = carry_position(&pass_device(&s, 0.5, &d).unwrap(), &d, &d);
        assert_abs_diff_eq!(lo, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-9);
        let mid = carry_position(&pass_device(&s, (zc + 0.5) / 2.0, &d).unwrap(), &d, &d);
        assert_abs_diff_eq!(mid, 0.0, epsilon = 1e-9);
    }
}
