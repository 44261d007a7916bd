//! Experiment configuration files.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers
//! (a TOML subset); chain stages repeat as `[[stage]]`. Unknown keys are
//! rejected. Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `n` | 100000 |
//! | `seed` | 42 |
//! | `out` | `out` |
//! | `plot`, `particles_csv` | false |
//! | `transverse_mode` | `fresh` |
//! | `axis_theta` | 0 |
//! | `polarity` | `standard` |
//! | `w` | 1 |
//! | `k` | 100 |
//! | `kappa` | 5 (or `m·mu·b/k` when `m`, `mu`, `b` are all given) |
//! | `selection` | `measure_both` |
//! | `scenario.state` | `singlet` |
//! | `scenario.order` | `particle1_first` |
//! | `scenario.alice_present` | true |
//! | `trajectories.count` | 9 |
//! | `trajectories.numeric` | false |
//! | `trajectories.dt` | `1e-4 · w / k` |
//!
//! Spinors are written either as four reals `[re c+, im c+, re c-, im c-]`
//! or as one of `"+z"`, `"-z"`, `"+x"`, `"-x"`. Two-particle states are
//! `"singlet"` or eight reals: re/im of a(+,+), a(+,-), a(-,+), a(-,-).

use std::fmt;

use num_complex::Complex64;
use pilotwave_core::apparatus::{ExperimentChain, Selection, Stage, TransverseMode};
use pilotwave_core::entangled::{self, MeasurementOrder, ScenarioConfig, TwoParticleSpinState};
use pilotwave_core::spinor::{MeasurementAxis, Spinor};
use pilotwave_core::wavefield::{DeviceConfig, Polarity};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Single,
    Chain,
    Entangled,
    Sweep,
    Trajectories,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Single => "single",
            Kind::Chain => "chain",
            Kind::Entangled => "entangled",
            Kind::Sweep => "sweep",
            Kind::Trajectories => "trajectories",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpinorSpec {
    Named(String),
    Components([f64; 4]),
}

impl SpinorSpec {
    pub fn to_spinor(&self) -> Result<Spinor, String> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            SpinorSpec::Named(name) => match name.as_str() {
                "+z" => Ok(Spinor::up_z()),
                "-z" => Ok(Spinor::down_z()),
                "+x" => Spinor::real(h, h).map_err(|e| e.to_string()),
                "-x" => Spinor::real(h, -h).map_err(|e| e.to_string()),
                other => Err(format!(
                    "unknown spinor name {other:?} (use +z, -z, +x, -x or four reals)"
                )),
            },
            SpinorSpec::Components(c) => Spinor::try_from(*c).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes([f64; 8]),
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Named("singlet".into())
    }
}

impl StateSpec {
    pub fn to_state(&self) -> Result<TwoParticleSpinState, String> {
        match self {
            StateSpec::Named(name) if name == "singlet" => Ok(entangled::singlet()),
            StateSpec::Named(other) => Err(format!(
                "unknown state {other:?} (use \"singlet\" or eight reals)"
            )),
            StateSpec::Amplitudes(v) => {
                let c = |i: usize| Complex64::new(v[2 * i], v[2 * i + 1]);
                TwoParticleSpinState::new([[c(0), c(1)], [c(2), c(3)]]).map_err(|e| e.to_string())
            }
        }
    }
}

fn default_n() -> u64 {
    100_000
}
fn default_seed() -> u64 {
    42
}
fn default_out() -> String {
    "out".into()
}
fn default_w() -> f64 {
    1.0
}
fn default_k() -> f64 {
    100.0
}
fn default_true() -> bool {
    true
}
fn default_count() -> usize {
    9
}

/// Geometry and calibration of one device, as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    #[serde(default)]
    pub axis_theta: f64,
    #[serde(default)]
    pub polarity: Polarity,
    #[serde(default = "default_w")]
    pub w: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_length: Option<f64>,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            axis_theta: 0.0,
            polarity: Polarity::Standard,
            w: default_w(),
            k: default_k(),
            kappa: None,
            m: None,
            mu: None,
            b: None,
            packet_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    #[serde(flatten)]
    pub device: DeviceSpec,
    #[serde(default = "default_selection")]
    pub selection: SelectionSpec,
}

fn default_selection() -> SelectionSpec {
    SelectionSpec::MeasureBoth
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSpec {
    KeepUpper,
    KeepLower,
    MeasureBoth,
}

impl From<SelectionSpec> for Selection {
    fn from(s: SelectionSpec) -> Self {
        match s {
            SelectionSpec::KeepUpper => Selection::KeepUpperPort,
            SelectionSpec::KeepLower => Selection::KeepLowerPort,
            SelectionSpec::MeasureBoth => Selection::MeasureBoth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub spinor: SpinorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub order: MeasurementOrder,
    #[serde(default = "default_true")]
    pub alice_present: bool,
    #[serde(default)]
    pub theta1: f64,
    #[serde(default)]
    pub theta2: f64,
    #[serde(default)]
    pub polarity1: Polarity,
    #[serde(default)]
    pub polarity2: Polarity,
    #[serde(default = "default_w")]
    pub w: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Fixed start positions; when both are given a single scenario run is
    /// reported alongside the ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub numeric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_end: Option<f64>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            count: default_count(),
            numeric: false,
            dt: None,
            y_start: None,
            y_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub particles_csv: bool,
    #[serde(default)]
    pub transverse_mode: TransverseMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceSpec>,
    #[serde(default, rename = "stage", skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySpec>,
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.into(),
        message: message.into(),
    }
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be finite, got {v}")))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, col)
}

/// Parses and validates a config file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        CliError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses the config file at `path`.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// Renders a config in the same format `parse_config` reads.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config types always serialize")
}

impl DeviceSpec {
    pub fn to_device(&self, section: &str) -> Result<DeviceConfig, CliError> {
        let key = |k: &str| format!("{section}.{k}");
        let theta = finite(&key("axis_theta"), self.axis_theta)?;
        let w = finite(&key("w"), self.w)?;
        let k = finite(&key("k"), self.k)?;
        let kappa = resolve_kappa(section, self.kappa, (self.m, self.mu, self.b), k)?;
        if w <= 0.0 {
            return Err(invalid(key("w"), "w must be > 0"));
        }
        if k <= 0.0 {
            return Err(invalid(key("k"), "k must be > 0"));
        }
        let axis =
            MeasurementAxis::new(theta).map_err(|e| invalid(key("axis_theta"), e.to_string()))?;
        let d = DeviceConfig::new(axis, self.polarity, w, k, kappa)
            .map_err(|e| invalid(key("kappa"), e.to_string()))?;
        Ok(match self.packet_length {
            Some(l) => d.with_packet_length(finite(&key("packet_length"), l)?),
            None => d,
        })
    }
}

fn resolve_kappa(
    section: &str,
    kappa: Option<f64>,
    physical: (Option<f64>, Option<f64>, Option<f64>),
    k: f64,
) -> Result<f64, CliError> {
    let key = format!("{section}.kappa");
    let kappa = match (kappa, physical) {
        (Some(_), (Some(_), _, _) | (_, Some(_), _) | (_, _, Some(_))) => {
            return Err(invalid(key, "give either kappa or m, mu, b, not both"))
        }
        (Some(v), _) => v,
        (None, (Some(m), Some(mu), Some(b))) => m * mu * b / k,
        (None, (None, None, None)) => 5.0,
        (None, _) => {
            return Err(invalid(
                format!("{section}.m"),
                "m, mu and b must be given together",
            ))
        }
    };
    let kappa = finite(&key, kappa)?;
    if kappa <= 0.0 {
        return Err(invalid(key, "kappa must be > 0"));
    }
    if kappa >= k {
        return Err(invalid(key, "kappa must be < k"));
    }
    Ok(kappa)
}

impl ScenarioSpec {
    fn devices(&self) -> Result<(DeviceConfig, DeviceConfig), CliError> {
        let base = DeviceSpec {
            w: self.w,
            k: self.k,
            kappa: self.kappa,
            ..DeviceSpec::default()
        };
        let d1 = DeviceSpec {
            axis_theta: self.theta1,
            polarity: self.polarity1,
            ..base.clone()
        }
        .to_device("scenario")?;
        let d2 = DeviceSpec {
            axis_theta: self.theta2,
            polarity: self.polarity2,
            ..base
        }
        .to_device("scenario")?;
        Ok((d1, d2))
    }

    pub fn to_scenario(&self) -> Result<ScenarioConfig, CliError> {
        let state = self
            .state
            .to_state()
            .map_err(|m| invalid("scenario.state", m))?;
        let (d1, d2) = self.devices()?;
        Ok(ScenarioConfig {
            state,
            device1: self.alice_present.then_some(d1),
            device2: d2,
            order: self.order,
            z0_1: self.z0_1.unwrap_or(0.0),
            z0_2: self.z0_2.unwrap_or(0.0),
        })
    }

    /// Geometry template (w, k, κ) for correlation sweeps.
    pub fn geometry(&self) -> Result<DeviceConfig, CliError> {
        Ok(self.devices()?.0)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 && matches!(self.kind, Kind::Sweep) {
            return Err(invalid("n", "n must be > 0 for sweeps"));
        }
        match self.kind {
            Kind::Single | Kind::Trajectories => {
                self.input_spinor()?;
                self.device()?;
            }
            Kind::Chain => {
                self.chain()?;
            }
            Kind::Entangled => {
                let sc = self.scenario.as_ref().ok_or_else(|| {
                    invalid(
                        "scenario",
                        "kind = \"entangled\" needs a [scenario] section",
                    )
                })?;
                let cfg = sc.to_scenario()?;
                for (key, z, w) in [
                    ("scenario.z0_1", sc.z0_1, cfg.device2.w()),
                    ("scenario.z0_2", sc.z0_2, cfg.device2.w()),
                ] {
                    if let Some(z) = z {
                        if finite(key, z)?.abs() > 0.5 * w {
                            return Err(invalid(
                                key,
                                format!("must lie within the packet, |z0| <= {}", 0.5 * w),
                            ));
                        }
                    }
                }
                if sc.z0_1.is_some() != sc.z0_2.is_some() {
                    return Err(invalid(
                        "scenario.z0_1",
                        "z0_1 and z0_2 must be given together",
                    ));
                }
            }
            Kind::Sweep => {
                self.sweep_spec()?;
            }
        }
        if let Some(t) = &self.trajectories {
            if t.count == 0 {
                return Err(invalid("trajectories.count", "count must be > 0"));
            }
            if let Some(dt) = t.dt {
                if finite("trajectories.dt", dt)? <= 0.0 {
                    return Err(invalid("trajectories.dt", "dt must be > 0"));
                }
            }
            if let Some(y) = t.y_start {
                if finite("trajectories.y_start", y)? >= 0.0 {
                    return Err(invalid("trajectories.y_start", "y_start must be < 0"));
                }
            }
            if let Some(y) = t.y_end {
                let d = self.device()?;
                if finite("trajectories.y_end", y)? <= d.overlap_length() {
                    return Err(invalid(
                        "trajectories.y_end",
                        format!(
                            "y_end must exceed the overlap length {}",
                            d.overlap_length()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn input_spinor(&self) -> Result<Spinor, CliError> {
        let input = self.input.as_ref().ok_or_else(|| {
            invalid(
                "input",
                format!("kind = \"{}\" needs an [input] section", self.kind),
            )
        })?;
        let s = input
            .spinor
            .to_spinor()
            .map_err(|m| invalid("input.spinor", m))?;
        if !s.is_normalized() {
            return Err(invalid(
                "input.spinor",
                format!(
                    "spinor must be normalized, |c+|^2 + |c-|^2 = {}",
                    s.norm_sqr()
                ),
            ));
        }
        Ok(s)
    }

    pub fn device(&self) -> Result<DeviceConfig, CliError> {
        self.device.clone().unwrap_or_default().to_device("device")
    }

    pub fn chain(&self) -> Result<ExperimentChain, CliError> {
        if self.stages.is_empty() {
            return Err(invalid(
                "stage",
                "kind = \"chain\" needs at least one [[stage]]",
            ));
        }
        let mut stages = Vec::with_capacity(self.stages.len());
        for (i, st) in self.stages.iter().enumerate() {
            let device = st.device.to_device(&format!("stage[{i}]"))?;
            stages.push(Stage {
                device,
                selection: st.selection.into(),
            });
        }
        ExperimentChain::new(stages, self.input_spinor()?)
            .map_err(|e| invalid("stage", e.to_string()))
    }

    /// Chain for `single` (one measuring device) or `chain` configs.
    pub fn experiment_chain(&self) -> Result<ExperimentChain, CliError> {
        match self.kind {
            Kind::Chain => self.chain(),
            _ => ExperimentChain::single(self.device()?, self.input_spinor()?)
                .map_err(|e| invalid("device", e.to_string())),
        }
    }

    pub fn sweep_spec(&self) -> Result<&SweepSpec, CliError> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| invalid("sweep", "sweeps need a [sweep] section"))?;
        for (key, list) in [("sweep.theta1", &sw.theta1), ("sweep.theta2", &sw.theta2)] {
            if list.is_empty() {
                return Err(invalid(key, "needs at least one angle"));
            }
            for &t in list {
                finite(key, t)?;
            }
        }
        Ok(sw)
    }

    /// Geometry for sweeps: the [scenario] block if present, else [device].
    pub fn sweep_geometry(&self) -> Result<DeviceConfig, CliError> {
        match &self.scenario {
            Some(sc) => sc.geometry(),
            None => self.device(),
        }
    }
}
