//! CSV, JSON and SVG writers for [`ExperimentReport`].
//!
//! CSV layout: `schema_version, kind, field, label, status, h, extent, rel_tol`,
//! then one column per entry of `columns`, then `error`. Missing values are
//! empty cells. An empty report yields the header line only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::ExperimentReport;
use crate::spec::OutputFormat;
use crate::LabError;

const FIXED_COLUMNS: [&str; 8] = ["schema_version", "kind", "field", "label", "status", "h", "extent", "rel_tol"];

fn status_str<T: serde::Serialize>(s: &T) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn csv_header(report: &ExperimentReport) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(report.columns.iter().cloned())
        .chain(std::iter::once("error".to_string()))
        .collect()
}

pub fn write_csv_to<W: std::io::Write>(report: &ExperimentReport, w: W) -> Result<(), LabError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header(report))?;
    for row in &report.rows {
        let mut rec = vec![
            report.schema_version.to_string(),
            report.kind.as_str().to_string(),
            row.field.clone(),
            row.label.clone(),
            status_str(&row.status),
            row.h.to_string(),
            row.extent.to_string(),
            row.rel_tol.to_string(),
        ];
        rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.push(row.error.clone().unwrap_or_default());
        wr.write_record(rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv(report: &ExperimentReport, path: &Path) -> Result<(), LabError> {
    write_csv_to(report, std::fs::File::create(path)?)
}

pub fn to_json(report: &ExperimentReport) -> Result<String, LabError> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn from_json(s: &str) -> Result<ExperimentReport, LabError> {
    Ok(serde_json::from_str(s)?)
}

pub fn write_json(report: &ExperimentReport, path: &Path) -> Result<(), LabError> {
    std::fs::write(path, to_json(report)?)?;
    Ok(())
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: [f64; 4] = [70.0, 220.0, 30.0, 50.0]; // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-log plot of every series with its fitted line dashed.
pub fn render_svg(report: &ExperimentReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .series
        .iter()
        .flat_map(|s| s.xs.iter().zip(&s.ys).map(|(x, y)| (*x, *y)))
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, WIDTH / 2.0, report.kind.as_str());
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no positive data</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let lx = |v: f64| v.log10();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(lx(*x)), b.max(lx(*x)), c.min(lx(*y)), d.max(lx(*y))),
    );
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (x0, x1, y0, y1) = (x0.floor(), x1.ceil(), y0.floor(), y1.ceil());
    let pw = WIDTH - MARGIN[0] - MARGIN[1];
    let ph = HEIGHT - MARGIN[2] - MARGIN[3];
    let sx = |x: f64| MARGIN[0] + (lx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN[2] + (y1 - lx(y)) / (y1 - y0) * ph;
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#,
        MARGIN[0], MARGIN[2]
    );
    for e in x0 as i32..=x1 as i32 {
        let x = sx(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"##,
            MARGIN[2],
            MARGIN[2] + ph,
            MARGIN[2] + ph + 16.0
        );
    }
    for e in y0 as i32..=y1 as i32 {
        let y = sy(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            MARGIN[0],
            MARGIN[0] + pw,
            MARGIN[0] - 6.0,
            y + 4.0
        );
    }
    for (k, s) in report.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let good: Vec<(f64, f64)> = s
            .xs
            .iter()
            .zip(&s.ys)
            .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| (*x, *y))
            .collect();
        if good.is_empty() {
            continue;
        }
        let line: Vec<String> = good.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, line.join(" "));
        for (x, y) in &good {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(*x), sy(*y));
        }
        let mut legend = format!("{} / {}", s.field, s.name);
        if let Some(fit) = report
            .fits
            .iter()
            .find(|f| f.series == s.name && f.field == s.field)
            .and_then(|f| f.power_law())
        {
            let (a, b) = (good.first().unwrap().0, good.last().unwrap().0);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6,4"/>"#,
                sx(a),
                sy(fit.predict(a)),
                sx(b),
                sy(fit.predict(b))
            );
            let _ = write!(legend, " (slope {:.3})", fit.exponent);
        }
        let ly = MARGIN[2] + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - MARGIN[1] + 10.0,
            ly - 9.0,
            WIDTH - MARGIN[1] + 24.0,
            ly,
            escape(&legend)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(report: &ExperimentReport, path: &Path) -> Result<(), LabError> {
    std::fs::write(path, render_svg(report))?;
    Ok(())
}

/// Writes `<kind>.<ext>` for each requested format into `dir`.
pub fn emit(report: &ExperimentReport, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>, LabError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for f in formats {
        let (ext, write): (&str, fn(&ExperimentReport, &Path) -> Result<(), LabError>) = match f {
            OutputFormat::Csv => ("csv", write_csv),
            OutputFormat::Json => ("json", write_json),
            OutputFormat::Svg => ("svg", write_svg),
        };
        let path = dir.join(format!("{}.{ext}", report.kind.as_str()));
        write(report, &path)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{Environment, Row, RowStatus, Series};
    use crate::spec::ExperimentKind;

    fn report() -> ExperimentReport {
        let env = Environment {
            version: "0".into(),
            seed: 0,
            rel_tol: 1e-9,
            preconditioner: "mean_coefficient".into(),
            c_box: 8.0,
            p: 4.0,
        };
        ExperimentReport::new(ExperimentKind::CorrectorGrowth, &["T", "norm"], env)
    }

    #[test]
    fn empty_report_has_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("schema_version,kind,field"));
        assert!(text.trim_end().ends_with("T,norm,error"));
    }

    #[test]
    fn missing_values_are_empty_cells() {
        let mut r = report();
        r.rows.push(Row {
            field: "f".into(),
            label: "a,b".into(),
            status: RowStatus::Ok,
            error: None,
            h: 0.5,
            extent: 4.0,
            rel_tol: 1e-9,
            values: vec![Some(2.0), None],
        });
        let mut buf = Vec::new();
        write_csv_to(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "1,corrector_growth,f,\"a,b\",ok,0.5,4,0.000000001,2,,");
    }

    #[test]
    fn svg_contains_series_and_dashed_fit() {
        let mut r = report();
        r.push_fit(
            "growth",
            Series {
                name: "s".into(),
                field: "f".into(),
                xs: vec![1.0, 2.0, 4.0],
                ys: vec![1.0, 2.0, 4.0],
            },
        );
        let svg = render_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("slope 1.000"));
        assert!(render_svg(&report()).contains("no positive data"));
    }
}
