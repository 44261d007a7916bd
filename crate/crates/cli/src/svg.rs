//! Plain SVG plots of the beam geometry and trajectories.
//!
//! Output depends only on the inputs; numbers are printed with a fixed
//! number of decimals so reruns are byte-identical.

use std::fmt::Write;

use pilotwave_core::trajectory::{Branch, TrajectoryRecord};
use pilotwave_core::wavefield::DeviceConfig;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 20.0;

struct Frame {
    y0: f64,
    y1: f64,
    z0: f64,
    z1: f64,
}

impl Frame {
    fn x(&self, y: f64) -> f64 {
        MARGIN + (y - self.y0) / (self.y1 - self.y0) * (WIDTH - 2.0 * MARGIN)
    }

    // SVG rows grow downwards, z grows upwards.
    fn row(&self, z: f64) -> f64 {
        MARGIN + (self.z1 - z) / (self.z1 - self.z0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn point(&self, y: f64, z: f64) -> String {
        format!("{:.3},{:.3}", self.x(y), self.row(z))
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .map(|&(y, z)| self.point(y, z))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Draws the incident beam, both deflected bands, the overlap triangle and
/// one polyline per trajectory over `y_start..y_end`. `critical`, if given,
/// is drawn dashed on top.
pub fn emit_svg(
    device: &DeviceConfig,
    trajectories: &[TrajectoryRecord],
    critical: Option<&TrajectoryRecord>,
    (y_start, y_end): (f64, f64),
) -> String {
    let half = 0.5 * device.w();
    let reach = half + device.spread() * y_end.max(0.0);
    let frame = Frame {
        y0: y_start,
        y1: y_end,
        z0: -reach,
        z1: reach,
    };
    let dy = device.overlap_length();

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    )
    .unwrap();

    let y_mag = 0.0f64.max(y_start);
    let incident = [
        (y_start, -half),
        (y_mag, -half),
        (y_mag, half),
        (y_start, half),
    ];
    let (u0, u1) = (device.upper_band(y_end), device.upper_band(y_mag));
    let upper = [(y_mag, u1.0), (y_end, u0.0), (y_end, u0.1), (y_mag, u1.1)];
    let (l0, l1) = (device.lower_band(y_end), device.lower_band(y_mag));
    let lower = [(y_mag, l1.0), (y_end, l0.0), (y_end, l0.1), (y_mag, l1.1)];
    let overlap = [(0.0, -half), (dy.min(y_end), 0.0), (0.0, half)];

    for (pts, fill) in [
        (&incident[..], "#dde6f0"),
        (&upper[..], "#f0e0d0"),
        (&lower[..], "#d8ecd8"),
    ] {
        writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="0.7" stroke="none"/>"#,
            frame.points(pts)
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<polygon points="{}" fill="#c8b8e0" stroke="#6a5a8a" stroke-width="1"/>"##,
        frame.points(&overlap)
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{x:.3}" y1="{a:.3}" x2="{x:.3}" y2="{b:.3}" stroke="#444444" stroke-width="1" stroke-dasharray="2,3"/>"##,
        x = frame.x(0.0),
        a = frame.row(frame.z1),
        b = frame.row(frame.z0),
    )
    .unwrap();

    for rec in trajectories {
        let colour = match rec.exit_branch {
            Branch::Upper => "#b03020",
            Branch::Lower => "#206030",
        };
        let pts: Vec<(f64, f64)> = rec.breakpoints.iter().map(|b| (b.y, b.z)).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#,
            frame.points(&pts)
        )
        .unwrap();
    }
    if let Some(rec) = critical {
        let pts: Vec<(f64, f64)> = rec.breakpoints.iter().map(|b| (b.y, b.z)).collect();
        writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#000000" stroke-width="1.6" stroke-dasharray="6,4"/>"##,
            frame.points(&pts)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
