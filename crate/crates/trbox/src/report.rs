//! Persistent outputs: records CSV, curves CSV, and SVG staircase plots.
//!
//! Formats are pinned so reruns with the same inputs are byte-identical:
//!
//! * records: `pb,start,scaling,status,it,fe,final_residual,wall_ms,seed`
//! * curves:  `scaling,metric,tau,fraction` (one breakpoint per line)
//!
//! Fields containing commas or quotes (scaling ids do) are double-quoted in
//! the usual CSV fashion.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::bench::RunRecord;
use crate::dogleg::SolveStatus;
use crate::profile::ProfileCurve;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to write")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

pub const RECORDS_HEADER: &str = "pb,start,scaling,status,it,fe,final_residual,wall_ms,seed";
pub const CURVES_HEADER: &str = "scaling,metric,tau,fraction";

fn quote_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Split one CSV line honoring double-quoted fields.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if in_quotes => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            }
            '"' => in_quotes = true,
            ',' if !in_quotes => fields.push(std::mem::take(&mut field)),
            c => field.push(c),
        }
    }
    fields.push(field);
    fields
}

/// Write benchmark records; schema above, one line per record.
pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<(), ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut out = String::new();
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:e},{},{}",
            r.pb,
            r.start,
            quote_field(&r.scaling_id),
            r.status,
            r.it,
            r.fe,
            r.final_residual,
            r.wall_ms,
            r.seed
        );
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read records written by [`write_records_csv`].
pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RECORDS_HEADER => {}
        _ => {
            return Err(ReportError::Parse {
                path: path.display().to_string(),
                line: 1,
                message: format!("expected header `{RECORDS_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        let fail = |message: String| ReportError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message,
        };
        if fields.len() != 9 {
            return Err(fail(format!("expected 9 fields, got {}", fields.len())));
        }
        let status = SolveStatus::parse(&fields[3])
            .ok_or_else(|| fail(format!("unknown status `{}`", fields[3])))?;
        let num = |i: usize| -> Result<f64, ReportError> {
            fields[i].parse::<f64>().map_err(|_| fail(format!("bad number `{}`", fields[i])))
        };
        records.push(RunRecord {
            pb: fields[0].parse().map_err(|_| fail(format!("bad pb `{}`", fields[0])))?,
            start: fields[1].parse().map_err(|_| fail(format!("bad start `{}`", fields[1])))?,
            scaling_id: fields[2].clone(),
            status,
            it: num(4)?,
            fe: num(5)?,
            final_residual: num(6)?,
            wall_ms: num(7)?,
            seed: fields[8].parse().map_err(|_| fail(format!("bad seed `{}`", fields[8])))?,
        });
    }
    Ok(records)
}

/// Write profile curves, one breakpoint per line; `metadata` lines (such as
/// the nested reconstruction rule) go in `#`-prefixed lines above the
/// header.
pub fn write_curves_csv(
    path: &Path,
    curves: &[ProfileCurve],
    metadata: Option<&str>,
) -> Result<(), ReportError> {
    if curves.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut out = String::new();
    if let Some(meta) = metadata {
        let _ = writeln!(out, "# {meta}");
    }
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for c in curves {
        for &(tau, fraction) in &c.breakpoints {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                quote_field(&c.scaling_id),
                c.metric.as_str(),
                tau,
                fraction
            );
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Render curves as an SVG staircase plot with a log2 tau axis.
pub fn write_profile_svg(
    path: &Path,
    curves: &[ProfileCurve],
    title: &str,
) -> Result<(), ReportError> {
    if curves.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let tau_max = curves
        .iter()
        .flat_map(|c| c.breakpoints.iter().map(|&(t, _)| t))
        .fold(2.0f64, f64::max);
    let log_max = tau_max.log2().ceil().max(1.0);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |tau: f64| MARGIN_LEFT + tau.log2() / log_max * plot_w;
    let y_of = |f: f64| MARGIN_TOP + (1.0 - f) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        title
    );

    // Axes and gridlines: tau ticks at powers of two, fraction ticks at
    // quarters.
    let mut tick = 1.0f64;
    while tick.log2() <= log_max {
        let x = x_of(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            MARGIN_TOP + plot_h + 18.0,
            tick
        );
        tick *= 2.0;
    }
    for q in 0..=4 {
        let f = q as f64 / 4.0;
        let y = y_of(f);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="12">{f:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT, MARGIN_TOP
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">performance ratio tau (log2 scale)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );

    // Step-after staircases.
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        let mut last_y = y_of(curve.breakpoints.first().map_or(0.0, |&(_, f)| f));
        for (j, &(tau, fraction)) in curve.breakpoints.iter().enumerate() {
            let x = x_of(tau.max(1.0));
            let y = y_of(fraction);
            if j == 0 {
                let _ = write!(points, "{x:.2},{y:.2} ");
            } else {
                let _ = write!(points, "{x:.2},{last_y:.2} {x:.2},{y:.2} ");
            }
            last_y = y;
        }
        let _ = write!(points, "{:.2},{last_y:.2}", x_of(tau_max));
        let _ = writeln!(
            svg,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        // Legend row.
        let ly = MARGIN_TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            MARGIN_LEFT + 10.0,
            MARGIN_LEFT + 34.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            MARGIN_LEFT + 40.0,
            ly + 4.0,
            curve.scaling_id
        );
    }
    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg).map_err(|e| io_err(path, e))
}

/// Problem listing line: `pb,name,dim,box_lo,box_hi,status`, comma-bearing
/// names quoted.
pub fn registry_lines() -> Vec<String> {
    crate::problems::REGISTRY
        .iter()
        .map(|e| {
            let (lo, hi) = match e.bounds {
                Some((l, u)) => (format!("{l}"), format!("{u}")),
                None => ("-".to_string(), "-".to_string()),
            };
            format!(
                "{},{},{},{},{},{}",
                e.pb,
                quote_field(e.name),
                e.dim,
                lo,
                hi,
                e.status.as_str()
            )
        })
        .collect()
}
