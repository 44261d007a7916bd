//! Particle paths through one device.
//!
//! The guidance field is constant inside each region, so the exact path is
//! piecewise linear: it is built by intersecting straight segments with the
//! region edges ([`propagate_analytic`]). [`propagate_numeric`] integrates
//! the same motion with RK4 sampling [`WaveField::velocity`], which makes it
//! an independent check on the closed-form velocity evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wavefield::{classify_region, Region, WaveField, WaveFieldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error(
        "initial position z0={z0} is outside the incident packet (|z0| must be <= {half_width})"
    )]
    OutsidePacket { z0: f64, half_width: f64 },
    #[error("invalid propagation range: {0}")]
    InvalidRange(String),
    #[error("time step must be finite and > 0, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Field(#[from] WaveFieldError),
}

/// Which downstream sub-beam the particle ends up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub fn region(self) -> Region {
        match self {
            Branch::Upper => Region::UpperBranch,
            Branch::Lower => Region::LowerBranch,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A path vertex. `region` is where the particle is heading from here on
/// (for the last vertex, where it ends).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub breakpoints: Vec<Breakpoint>,
    pub exit_branch: Branch,
    pub z0: f64,
    /// Set by the numeric integrator when the start lies within 10·dt·k of
    /// the critical line, or when the particle had to be resolved at the
    /// apex of the overlap triangle.
    pub near_critical: bool,
}

impl TrajectoryRecord {
    pub fn end(&self) -> Breakpoint {
        *self
            .breakpoints
            .last()
            .expect("records always hold at least two points")
    }

    /// Position at time `t`, linearly interpolated and clamped to the record.
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let pts = &self.breakpoints;
        let first = pts[0];
        if t <= first.t {
            return (first.y, first.z);
        }
        let idx = pts.partition_point(|p| p.t <= t);
        if idx >= pts.len() {
            let last = self.end();
            return (last.y, last.z);
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        let frac = (t - a.t) / (b.t - a.t);
        (a.y + frac * (b.y - a.y), a.z + frac * (b.z - a.z))
    }
}

/// The trajectory that ends exactly at the apex of the overlap triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalGeometry {
    /// Length of the overlap triangle along y, w k′/(2κ).
    pub delta_y: f64,
    /// dz/dy inside the overlap, (|a₊|² − |a₋|²) κ/k′.
    pub slope: f64,
    /// Start height of the critical trajectory.
    pub z_critical: f64,
    /// Fraction of the packet width above the critical line.
    pub p_plus_geometric: f64,
}

pub fn critical_geometry(f: &WaveField) -> CriticalGeometry {
    let d = f.device();
    let delta_y = d.overlap_length();
    let slope = f.imbalance() * d.spread();
    let z_critical = -slope * delta_y;
    let p_plus_geometric = (0.5 + slope * delta_y / d.w()).clamp(0.0, 1.0);
    debug_assert!((p_plus_geometric - f.a_plus().norm_sqr()).abs() <= 1e-12);
    CriticalGeometry {
        delta_y,
        slope,
        z_critical,
        p_plus_geometric,
    }
}

/// Branch for a particle that reaches the apex exactly. Upper, unless the
/// upper band carries no wave at all.
pub fn tie_branch(f: &WaveField) -> Branch {
    if f.a_plus().norm_sqr() == 0.0 {
        Branch::Lower
    } else {
        Branch::Upper
    }
}

fn check_inputs(z0: f64, f: &WaveField, y_start: f64, y_end: f64) -> Result<(), TrajectoryError> {
    let half = 0.5 * f.device().w();
    if !(z0.is_finite() && z0.abs() <= half) {
        return Err(TrajectoryError::OutsidePacket {
            z0,
            half_width: half,
        });
    }
    if !(y_start.is_finite() && y_start < 0.0) {
        return Err(TrajectoryError::InvalidRange(format!(
            "y_start must be < 0, got {y_start}"
        )));
    }
    let dy = f.device().overlap_length();
    if !(y_end.is_finite() && y_end > dy) {
        return Err(TrajectoryError::InvalidRange(format!(
            "y_end must exceed the overlap length {dy}, got {y_end}"
        )));
    }
    Ok(())
}

/// Exact piecewise-linear path from `(y_start, z0)` to the plane `y_end`.
/// Time starts at 0 on the plane `y_start`.
pub fn propagate_analytic(
    z0: f64,
    f: &WaveField,
    y_start: f64,
    y_end: f64,
) -> Result<TrajectoryRecord, TrajectoryError> {
    check_inputs(z0, f, y_start, y_end)?;
    let d = f.device();
    let (k, kp, kappa, half) = (d.k(), d.k_prime(), d.kappa(), 0.5 * d.w());
    let vz = kappa * f.imbalance();

    let mut pts = Vec::with_capacity(4);
    pts.push(Breakpoint {
        t: 0.0,
        y: y_start,
        z: z0,
        region: Region::Incident,
    });
    let t_magnet = -y_start / k;
    pts.push(Breakpoint {
        t: t_magnet,
        y: 0.0,
        z: z0,
        region: Region::Overlap,
    });

    // The overlap edges close in on the particle at rates κ ± vz. Compare
    // the two hitting times by cross-multiplying so no rate is divided by
    // before we know it is nonzero.
    let gap_up = half - z0;
    let gap_down = z0 + half;
    let lhs = gap_up * (kappa - vz);
    let rhs = gap_down * (kappa + vz);
    let branch = if lhs < rhs {
        Branch::Upper
    } else if lhs > rhs {
        Branch::Lower
    } else {
        tie_branch(f)
    };
    let in_overlap = match branch {
        Branch::Upper => gap_up / (kappa + vz),
        Branch::Lower => gap_down / (kappa - vz),
    };

    let (t_exit, y_exit, z_exit) = if in_overlap > 0.0 {
        let exit = (t_magnet + in_overlap, kp * in_overlap, z0 + vz * in_overlap);
        pts.push(Breakpoint {
            t: exit.0,
            y: exit.1,
            z: exit.2,
            region: branch.region(),
        });
        exit
    } else {
        pts[1].region = branch.region();
        (t_magnet, 0.0, z0)
    };

    let dt = (y_end - y_exit) / kp;
    let vz_branch = match branch {
        Branch::Upper => kappa,
        Branch::Lower => -kappa,
    };
    pts.push(Breakpoint {
        t: t_exit + dt,
        y: y_end,
        z: z_exit + vz_branch * dt,
        region: branch.region(),
    });

    Ok(TrajectoryRecord {
        breakpoints: pts,
        exit_branch: branch,
        z0,
        near_critical: false,
    })
}

/// Smallest step the numeric integrator refines to at a region edge, as a
/// fraction of `dt`.
const MIN_STEP_FRACTION: f64 = 1.0 / (1u64 << 30) as f64;

/// Overlap half-width (relative to w) below which a particle leaving the
/// overlap is treated as sitting on the apex. Accumulated rounding over a
/// full passage stays well below this.
const APEX_TOLERANCE: f64 = 1e-9;

struct Stepper<'a> {
    f: &'a WaveField,
    /// Branch imposed after the particle was resolved at the overlap apex.
    forced: Option<Branch>,
}

impl Stepper<'_> {
    fn region(&self, y: f64, z: f64) -> Region {
        let r = classify_region(y, z, self.f.device());
        match (r, self.forced) {
            (Region::Vacuum, Some(b)) => b.region(),
            _ => r,
        }
    }

    fn velocity(&self, y: f64, z: f64) -> Result<(f64, f64), WaveFieldError> {
        match self.f.velocity(y, z) {
            Err(WaveFieldError::ZeroAmplitude { .. }) if self.forced.is_some() => Ok(self
                .f
                .region_velocity(self.forced.unwrap().region())
                .expect("branch regions have a velocity")),
            other => other,
        }
    }

    /// One RK4 step. Returns the end point and whether every stage stayed in
    /// the starting region.
    fn step(&self, y: f64, z: f64, h: f64) -> Result<((f64, f64), bool), WaveFieldError> {
        let start = self.region(y, z);
        let mut same = true;
        let k1 = self.velocity(y, z)?;
        let p2 = (y + 0.5 * h * k1.0, z + 0.5 * h * k1.1);
        same &= self.region(p2.0, p2.1) == start;
        let k2 = self.velocity(p2.0, p2.1)?;
        let p3 = (y + 0.5 * h * k2.0, z + 0.5 * h * k2.1);
        same &= self.region(p3.0, p3.1) == start;
        let k3 = self.velocity(p3.0, p3.1)?;
        let p4 = (y + h * k3.0, z + h * k3.1);
        same &= self.region(p4.0, p4.1) == start;
        let k4 = self.velocity(p4.0, p4.1)?;
        let end = (
            y + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            z + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
        same &= self.region(end.0, end.1) == start;
        Ok((end, same))
    }
}

/// Fixed-step RK4 integration of dX/dt = v(X), halving the step whenever a
/// stage would straddle a region edge.
pub fn propagate_numeric(
    z0: f64,
    f: &WaveField,
    dt: f64,
    y_start: f64,
    y_end: f64,
) -> Result<TrajectoryRecord, TrajectoryError> {
    check_inputs(z0, f, y_start, y_end)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TrajectoryError::InvalidStep(dt));
    }
    let d = f.device();
    let crit = critical_geometry(f);
    let mut near_critical = (z0 - crit.z_critical).abs() <= 10.0 * dt * d.k();
    let h_min = dt * MIN_STEP_FRACTION;

    let mut stepper = Stepper { f, forced: None };
    let (mut t, mut y, mut z) = (0.0, y_start, z0);
    let mut pts = vec![Breakpoint {
        t,
        y,
        z,
        region: stepper.region(y, z),
    }];
    let y_tol = 1e-12 * y_end.abs().max(1.0);

    while y_end - y > y_tol {
        let vy = stepper.velocity(y, z)?.0;
        let mut h = dt.min((y_end - y) / vy);
        let (ny, nz) = loop {
            match stepper.step(y, z, h) {
                Ok((p, true)) => break p,
                Ok((p, false)) if h <= h_min => {
                    // Straddling an edge at the resolution floor. If the
                    // overlap has shrunk to nothing here, the particle is
                    // sitting on the apex and the tie rule decides.
                    let half_overlap = 0.5 * d.w() - d.spread() * y;
                    if stepper.forced.is_none()
                        && stepper.region(y, z) == Region::Overlap
                        && half_overlap.abs() <= APEX_TOLERANCE * d.w()
                    {
                        stepper.forced = Some(tie_branch(f));
                        near_critical = true;
                        continue;
                    }
                    break p;
                }
                Ok(_) => h *= 0.5,
                Err(WaveFieldError::ZeroAmplitude { .. }) if h > h_min => h *= 0.5,
                Err(WaveFieldError::ZeroAmplitude { .. }) if stepper.forced.is_none() => {
                    stepper.forced = Some(tie_branch(f));
                    near_critical = true;
                }
                Err(e) => return Err(e.into()),
            }
        };
        if stepper.forced.is_none() && classify_region(ny, nz, d) == Region::Vacuum {
            stepper.forced = Some(tie_branch(f));
            near_critical = true;
        }
        // A particle resolved at the apex rides the near edge of its band.
        let nz = match stepper.forced {
            Some(Branch::Upper) => nz.max(d.upper_band(ny).0),
            Some(Branch::Lower) => nz.min(d.lower_band(ny).1),
            None => nz,
        };
        t += h;
        y = ny;
        z = nz;
        pts.push(Breakpoint {
            t,
            y,
            z,
            region: stepper.region(y, z),
        });
    }

    let exit_branch = match pts.last().map(|p| p.region) {
        Some(Region::UpperBranch) => Branch::Upper,
        Some(Region::LowerBranch) => Branch::Lower,
        _ => stepper.forced.unwrap_or_else(|| tie_branch(f)),
    };
    Ok(TrajectoryRecord {
        breakpoints: pts,
        exit_branch,
        z0,
        near_critical,
    })
}
