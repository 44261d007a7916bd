//! Executes a parsed config and writes its output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use pilotwave_core::apparatus::{self, ChainOutcome, ExperimentChain, Sign};
use pilotwave_core::ensemble::{self, BornReport, BornRow, RunStats};
use pilotwave_core::entangled::{self, MeasurementOrder};
use pilotwave_core::spinor::MeasurementAxis;
use pilotwave_core::trajectory::{self, Branch, TrajectoryRecord};
use pilotwave_core::wavefield::DeviceConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, TrajectorySpec};
use crate::svg::emit_svg;
use crate::{CliError, EXIT_BORN_FAIL, EXIT_OK};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub alice_present: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// False when some frequency is more than 4 standard errors from its
    /// prediction.
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub headline: String,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_BORN_FAIL
        }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), CliError>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        fill(&mut w)?;
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Simulation(e.to_string()))?;
        self.write(
            name,
            &String::from_utf8(bytes).expect("csv output is utf-8"),
        )
    }
}

/// Runs `cfg` with `overrides` applied.
pub fn run(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<RunSummary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(n) = overrides.n {
        cfg.n = n;
    }
    if let Some(out) = &overrides.out {
        cfg.out = out.display().to_string();
    }
    cfg.plot |= overrides.plot;
    if let (Some(present), Some(sc)) = (overrides.alice_present, cfg.scenario.as_mut()) {
        sc.alice_present = present;
    }
    cfg.validate()?;

    let mut out = Output::new(PathBuf::from(&cfg.out))?;
    let (pass, headline) = match cfg.kind {
        Kind::Single | Kind::Chain => run_chain(&cfg, &mut out)?,
        Kind::Trajectories => run_trajectories(&cfg, &mut out)?,
        Kind::Entangled => run_entangled(&cfg, &mut out)?,
        Kind::Sweep => run_sweep(&cfg, &mut out)?,
    };
    Ok(RunSummary {
        pass,
        files: out.files,
        headline,
    })
}

fn warnings(devices: &[DeviceConfig]) -> Vec<String> {
    let mut w: Vec<String> = devices
        .iter()
        .flat_map(|d| d.warnings())
        .map(|w| w.to_string())
        .collect();
    w.dedup();
    w
}

fn chain_devices(chain: &ExperimentChain) -> Vec<DeviceConfig> {
    chain.stages().iter().map(|s| s.device).collect()
}

fn outcome_text(chain: &ExperimentChain, out: &ChainOutcome) -> String {
    match out {
        ChainOutcome::Completed(_) => ensemble::sequence_labels(chain, &out.signs()).join(" "),
        ChainOutcome::Discarded { stage, .. } => format!("discarded@{}", stage + 1),
    }
}

fn run_chain(cfg: &ExperimentConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let chain = cfg.experiment_chain()?;
    let mut counts: BTreeMap<Vec<Sign>, u64> = BTreeMap::new();
    let mut n_discarded = 0;
    let mut particles = Vec::new();
    for i in 0..cfg.n {
        let (z0s, outcome) = ensemble::simulate_particle(&chain, cfg.seed, i, cfg.transverse_mode)?;
        if cfg.particles_csv {
            particles.push((i, z0s, outcome_text(&chain, &outcome)));
        }
        match outcome {
            ChainOutcome::Completed(_) => *counts.entry(outcome.signs()).or_insert(0) += 1,
            ChainOutcome::Discarded { .. } => n_discarded += 1,
        }
    }
    let stats = RunStats {
        counts,
        n_total: cfg.n,
        n_discarded,
        seed: cfg.seed,
    };
    let report = ensemble::compare_to_born(&stats, &chain);

    let mut summary = json!({
        "kind": cfg.kind.to_string(),
        "seed": cfg.seed,
        "transverse_mode": cfg.transverse_mode,
        "n_total": stats.n_total,
        "n_discarded": stats.n_discarded,
        "n_survivors": report.n_survivors,
        "survival": report.survival,
        "outcomes": report.outcomes,
        "pass": report.pass,
        "warnings": warnings(&chain_devices(&chain)),
    });
    if cfg.kind == Kind::Single {
        let field = apparatus::deflection_field(chain.input(), &chain.stages()[0].device)?;
        summary["critical_geometry"] = serde_json::to_value(trajectory::critical_geometry(&field))?;
    }
    out.json("summary.json", &summary)?;

    if cfg.particles_csv {
        out.csv("particles.csv", |w| {
            let mut header = vec!["index".to_string()];
            header.extend((1..=chain.len()).map(|j| format!("z0_{j}")));
            header.push("outcome".into());
            w.write_record(&header)?;
            for (i, z0s, text) in &particles {
                let mut rec = vec![i.to_string()];
                rec.extend(z0s.iter().map(|z| format!("{z:.16e}")));
                rec.push(text.clone());
                w.write_record(&rec)?;
            }
            Ok(())
        })?;
    }
    Ok((report.pass, headline(&report)))
}

fn headline(report: &BornReport) -> String {
    let rows: Vec<String> = report
        .survival
        .iter()
        .chain(&report.outcomes)
        .map(|r| {
            format!(
                "{} {:.5} (Born {:.5}, z {:+.2})",
                r.labels.join(" "),
                r.freq,
                r.predicted,
                r.z
            )
        })
        .collect();
    format!(
        "{} particles, {} survived: {}",
        report.n_total,
        report.n_survivors,
        rows.join("; ")
    )
}

/// Evenly spaced start heights, one at the centre of each of `count` cells.
pub fn start_grid(count: usize, w: f64) -> Vec<f64> {
    (0..count)
        .map(|i| -0.5 * w + (i as f64 + 0.5) * w / count as f64)
        .collect()
}

fn run_trajectories(cfg: &ExperimentConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let d = cfg.device()?;
    let input = cfg.input_spinor()?;
    let field = apparatus::deflection_field(&input, &d)?;
    let spec = cfg.trajectories.clone().unwrap_or_default();
    let TrajectorySpec { count, numeric, .. } = spec;
    let (default_start, default_end) = apparatus::passage_span(&d);
    let span = (
        spec.y_start.unwrap_or(default_start),
        spec.y_end.unwrap_or(default_end),
    );
    let dt = spec.dt.unwrap_or(1e-4 * d.w() / d.k());

    let records: Vec<TrajectoryRecord> = start_grid(count, d.w())
        .into_iter()
        .map(|z0| {
            if numeric {
                trajectory::propagate_numeric(z0, &field, dt, span.0, span.1)
            } else {
                trajectory::propagate_analytic(z0, &field, span.0, span.1)
            }
        })
        .collect::<Result<_, _>>()?;

    out.csv("trajectories.csv", |w| {
        w.write_record(["traj_id", "t", "y", "z", "region", "branch"])?;
        for (id, rec) in records.iter().enumerate() {
            for b in &rec.breakpoints {
                w.write_record([
                    id.to_string(),
                    format!("{:.16e}", b.t),
                    format!("{:.16e}", b.y),
                    format!("{:.16e}", b.z),
                    b.region.as_str().to_string(),
                    rec.exit_branch.as_str().to_string(),
                ])?;
            }
        }
        Ok(())
    })?;

    let geometry = trajectory::critical_geometry(&field);
    let critical = (geometry.z_critical.abs() < 0.5 * d.w())
        .then(|| trajectory::propagate_analytic(geometry.z_critical, &field, span.0, span.1))
        .transpose()?;
    let upper = records
        .iter()
        .filter(|r| r.exit_branch == Branch::Upper)
        .count();
    let rows: Vec<Value> = records
        .iter()
        .enumerate()
        .map(|(id, r)| {
            json!({
                "traj_id": id,
                "z0": r.z0,
                "exit_branch": r.exit_branch,
                "label": apparatus::label_outcome(r.exit_branch, &d).to_string(),
                "near_critical": r.near_critical,
            })
        })
        .collect();
    let summary = json!({
        "kind": cfg.kind.to_string(),
        "integrator": if numeric { "numeric" } else { "analytic" },
        "dt": numeric.then_some(dt),
        "y_start": span.0,
        "y_end": span.1,
        "critical_geometry": geometry,
        "upper": upper,
        "lower": records.len() - upper,
        "trajectories": rows,
        "warnings": warnings(&[d]),
    });
    out.json("summary.json", &summary)?;
    if cfg.plot {
        out.write(
            "trajectories.svg",
            &emit_svg(&d, &records, critical.as_ref(), span),
        )?;
    }
    Ok((
        true,
        format!(
            "{} trajectories: {} upper, {} lower; z_critical {:.6}",
            records.len(),
            upper,
            records.len() - upper,
            geometry.z_critical
        ),
    ))
}

fn sign_label(sign: Sign, axis: MeasurementAxis) -> String {
    format!("{}{}", sign.symbol(), axis.label())
}

const SIGNS: [Sign; 2] = [Sign::Plus, Sign::Minus];

fn run_entangled(cfg: &ExperimentConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let spec = cfg.scenario.as_ref().expect("validated");
    let sc = spec.to_scenario()?;
    let axis2 = sc.device2.axis();
    let joint = sc
        .state
        .joint_probabilities(sc.device1.map_or(MeasurementAxis::z(), |d| d.axis()), axis2);

    let fixed = match (spec.z0_1, spec.z0_2) {
        (Some(_), Some(_)) => {
            let r = entangled::run_scenario(&sc)?;
            Some(json!({
                "z0_1": sc.z0_1,
                "z0_2": sc.z0_2,
                "outcome1": r.outcome1.map(|l| l.to_string()),
                "outcome2": r.outcome2.to_string(),
                "sign1": r.outcome1.map(|l| l.sign.value()),
                "sign2": r.outcome2.sign.value(),
            }))
        }
        _ => None,
    };

    let counts = entangled::run_scenario_ensemble(&sc, cfg.n, cfg.seed)?;
    let mut rows = Vec::new();
    match sc.device1 {
        Some(d1) => {
            for (i, &s1) in SIGNS.iter().enumerate() {
                for (j, &s2) in SIGNS.iter().enumerate() {
                    let count = counts.get(&(Some(s1), s2)).copied().unwrap_or(0);
                    let labels = vec![sign_label(s1, d1.axis()), sign_label(s2, axis2)];
                    rows.push(BornRow::new(labels, count, cfg.n, joint[i][j]));
                }
            }
        }
        None => {
            for (j, &s2) in SIGNS.iter().enumerate() {
                let count = counts.get(&(None, s2)).copied().unwrap_or(0);
                let labels = vec!["absent".to_string(), sign_label(s2, axis2)];
                rows.push(BornRow::new(
                    labels,
                    count,
                    cfg.n,
                    joint[0][j] + joint[1][j],
                ));
            }
        }
    }
    let pass = cfg.n == 0 || rows.iter().all(|r| r.pass);
    let correlation = sc.device1.filter(|_| cfg.n > 0).map(|_| {
        let sum: i64 = counts
            .iter()
            .map(|(&(s1, s2), &c)| (s1.map_or(0, Sign::value) * s2.value()) as i64 * c as i64)
            .sum();
        sum as f64 / cfg.n as f64
    });
    let summary = json!({
        "kind": cfg.kind.to_string(),
        "seed": cfg.seed,
        "n": cfg.n,
        "alice_present": sc.device1.is_some(),
        "order": sc.order,
        "fixed": fixed,
        "joint": rows,
        "E": correlation,
        "pass": pass,
        "warnings": warnings(&[sc.device1, Some(sc.device2)].into_iter().flatten().collect::<Vec<_>>()),
    });
    out.json("summary.json", &summary)?;
    let order = match sc.order {
        MeasurementOrder::Particle1First => "particle 1 first",
        MeasurementOrder::Particle2First => "particle 2 first",
    };
    let mut headline = format!("{} pairs, {order}", cfg.n);
    if let Some(f) = &fixed {
        headline.push_str(&format!(
            "; fixed run: particle 1 {}, particle 2 {}",
            f["outcome1"].as_str().unwrap_or("not measured"),
            f["outcome2"].as_str().unwrap_or_default()
        ));
    }
    if let Some(e) = correlation {
        headline.push_str(&format!("; E = {e:.5}"));
    }
    Ok((pass, headline))
}

#[derive(Serialize)]
struct SweepRow {
    theta1: f64,
    theta2: f64,
    n: u64,
    #[serde(rename = "E")]
    e: f64,
    stderr: f64,
    predicted: f64,
    z: f64,
    pass: bool,
}

fn run_sweep(cfg: &ExperimentConfig, out: &mut Output) -> Result<(bool, String), CliError> {
    let spec = cfg.sweep_spec()?;
    let geometry = cfg.sweep_geometry()?;
    let rows =
        entangled::correlation_sweep(&spec.theta1, &spec.theta2, cfg.n, cfg.seed, &geometry)?;
    out.csv("sweep.csv", |w| {
        for r in &rows {
            w.serialize(r)?;
        }
        Ok(())
    })?;

    let checked: Vec<SweepRow> = rows
        .iter()
        .map(|r| {
            let predicted = -(r.theta1 - r.theta2).cos();
            let sd = ((1.0 - predicted * predicted).max(0.0) / r.n as f64).sqrt();
            let diff = r.e - predicted;
            let z = if sd > 0.0 {
                diff / sd
            } else if diff.abs() <= 1e-12 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            SweepRow {
                theta1: r.theta1,
                theta2: r.theta2,
                n: r.n,
                e: r.e,
                stderr: r.stderr,
                predicted,
                z,
                pass: z.abs() <= 4.0,
            }
        })
        .collect();
    let pass = checked.iter().all(|r| r.pass);
    let chsh = (spec.theta1.len() == 2 && spec.theta2.len() == 2)
        .then(|| entangled::chsh(rows[0].e, rows[1].e, rows[2].e, rows[3].e));
    let summary = json!({
        "kind": "sweep",
        "seed": cfg.seed,
        "n": cfg.n,
        "rows": checked,
        "chsh": chsh,
        "pass": pass,
        "warnings": warnings(&[geometry]),
    });
    out.json("summary.json", &summary)?;
    let mut headline = format!("{} angle pairs at n = {}", rows.len(), cfg.n);
    if let Some(s) = chsh {
        headline.push_str(&format!("; CHSH = {s:.5}"));
    }
    Ok((pass, headline))
}
