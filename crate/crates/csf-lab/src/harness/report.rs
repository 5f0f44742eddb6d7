//! Human-readable run summaries and SVG line plots, rendered purely from the
//! CSV artifacts of a finished run (no recomputation).

use crate::csf::MetricRow;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Parse a metrics.csv written by the training loop.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MissingData(format!("{} is empty", path.display())))?;
    if header != crate::csf::METRICS_HEADER {
        return Err(Error::InvalidConfig(format!(
            "unexpected metrics header: {header}"
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::InvalidConfig(format!("bad metrics row: {line}")));
        }
        let f = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad number in metrics row: {line}")))
        };
        rows.push(MetricRow {
            step: fields[0]
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("bad step in metrics row: {line}")))?,
            loss: f(1)?,
            pos_logit_mean: f(2)?,
            log_partition: f(3)?,
            accuracy: f(4)?,
            r2_state: f(5)?,
            r2_diff: f(6)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingData(format!(
            "{} holds no metric rows",
            path.display()
        )));
    }
    Ok(rows)
}

/// Parse a coverage.csv written by the rollout source.
pub fn read_coverage_csv(path: &Path) -> Result<Vec<(u64, usize)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (step, occupied) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidConfig(format!("bad coverage row: {line}")))?;
        out.push((
            step.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad coverage step: {line}")))?,
            occupied
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad coverage count: {line}")))?,
        ));
    }
    Ok(out)
}

/// One named series for the line plot.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 54.0;
const SERIES_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal standalone SVG line plot. The x axis spans exactly the data's
/// step range; NaN points are dropped.
pub fn svg_line_plot(title: &str, x_label: &str, series: &[Series]) -> Result<String> {
    let cleaned: Vec<(usize, Vec<(f64, f64)>)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                i,
                s.points
                    .iter()
                    .copied()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let all: Vec<(f64, f64)> = cleaned.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::MissingData("nothing to plot".into()));
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);

    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN + (x - x_min) / (x_max - x_min) * (PLOT_W - 2.0 * MARGIN);
        let py = PLOT_H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (PLOT_H - 2.0 * MARGIN);
        (px, py)
    };

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    )
    .unwrap();
    write!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>").unwrap();
    write!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        PLOT_W / 2.0,
        xml_escape(title)
    )
    .unwrap();

    // axes
    let (x0, y0) = (MARGIN, PLOT_H - MARGIN);
    write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>",
        PLOT_W - MARGIN
    )
    .unwrap();
    write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{MARGIN}\" stroke=\"black\"/>"
    )
    .unwrap();
    // axis range labels: x spans exactly the data range
    for (value, x_px, anchor) in [(x_min, x0, "start"), (x_max, PLOT_W - MARGIN, "end")] {
        write!(
            svg,
            "<text x=\"{x_px}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{value}</text>",
            y0 + 18.0
        )
        .unwrap();
    }
    for (value, y_px) in [(y_lo, y0), (y_hi, MARGIN)] {
        write!(
            svg,
            "<text x=\"{}\" y=\"{y_px}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{value:.4}</text>",
            x0 - 6.0
        )
        .unwrap();
    }
    write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        PLOT_W / 2.0,
        PLOT_H - 12.0,
        xml_escape(x_label)
    )
    .unwrap();

    for (i, points) in &cleaned {
        if points.is_empty() {
            continue;
        }
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            PLOT_W - MARGIN + 4.0,
            MARGIN + 16.0 * *i as f64,
            xml_escape(series[*i].name)
        )
        .unwrap();
    }
    svg.push_str("</svg>");
    Ok(svg)
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render summary.txt and the loss/R^2/coverage SVG plots from a finished
/// run directory. Pure rendering: reads only the CSV artifacts.
pub fn emit_report(run_dir: &Path) -> Result<()> {
    let metrics = read_metrics_csv(&run_dir.join("metrics.csv"))?;
    let steps: Vec<f64> = metrics.iter().map(|r| r.step as f64).collect();

    let loss_svg = svg_line_plot(
        "contrastive loss",
        "step",
        &[Series {
            name: "loss",
            points: steps.iter().copied().zip(metrics.iter().map(|r| r.loss)).collect(),
        }],
    )?;
    std::fs::write(run_dir.join("loss.svg"), loss_svg)?;

    let r2_svg = svg_line_plot(
        "linear identifiability (held-out R^2)",
        "step",
        &[
            Series {
                name: "r2_state",
                points: steps
                    .iter()
                    .copied()
                    .zip(metrics.iter().map(|r| r.r2_state))
                    .collect(),
            },
            Series {
                name: "r2_diff",
                points: steps
                    .iter()
                    .copied()
                    .zip(metrics.iter().map(|r| r.r2_diff))
                    .collect(),
            },
        ],
    )?;
    std::fs::write(run_dir.join("r2.svg"), r2_svg)?;

    let coverage_path = run_dir.join("coverage.csv");
    if coverage_path.exists() {
        let coverage = read_coverage_csv(&coverage_path)?;
        if !coverage.is_empty() {
            let svg = svg_line_plot(
                "state coverage (occupied cells)",
                "step",
                &[Series {
                    name: "occupied",
                    points: coverage.iter().map(|&(s, c)| (s as f64, c as f64)).collect(),
                }],
            )?;
            std::fs::write(run_dir.join("coverage.svg"), svg)?;
        }
    }

    let last = metrics.last().unwrap();
    let mut summary = String::new();
    writeln!(summary, "run summary ({})", run_dir.display()).unwrap();
    writeln!(summary, "  rows:        {}", metrics.len()).unwrap();
    writeln!(summary, "  final step:  {}", last.step).unwrap();
    writeln!(summary, "  loss:        {:.6}", last.loss).unwrap();
    writeln!(summary, "  accuracy:    {:.4}", last.accuracy).unwrap();
    writeln!(summary, "  r2_state:    {:.4}", last.r2_state).unwrap();
    writeln!(summary, "  r2_diff:     {:.4}", last.r2_diff).unwrap();
    std::fs::write(run_dir.join("summary.txt"), summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal XML well-formedness check: tags balance and nest properly.
    /// Independent of the SVG writer (a plain text scanner).
    fn xml_well_formed(text: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let Some(end_rel) = rest[start..].find('>') else {
                return false;
            };
            let tag = &rest[start + 1..start + end_rel];
            rest = &rest[start + end_rel + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                match stack.pop() {
                    Some(open) if open == name => {}
                    _ => return false,
                }
            } else if !tag.ends_with('/') {
                let name: String = tag.split_whitespace().next().unwrap_or("").to_string();
                if name.is_empty() {
                    return false;
                }
                stack.push(name);
            }
        }
        stack.is_empty()
    }

    #[test]
    fn svg_plot_is_well_formed_and_spans_the_step_range() {
        let series = [Series {
            name: "loss",
            points: vec![(0.0, 5.5), (500.0, 2.0), (1000.0, 1.0)],
        }];
        let svg = svg_line_plot("loss", "step", &series).unwrap();
        assert!(xml_well_formed(&svg), "svg failed the well-formedness check");
        assert!(svg.contains(">0<"), "x-min label missing");
        assert!(svg.contains(">1000<"), "x-max label missing");
    }

    #[test]
    fn svg_plot_rejects_empty_and_all_nan_series() {
        assert!(svg_line_plot("x", "step", &[]).is_err());
        let series = [Series {
            name: "nanified",
            points: vec![(0.0, f64::NAN), (1.0, f64::NAN)],
        }];
        assert!(svg_line_plot("x", "step", &series).is_err());
    }

    #[test]
    fn metrics_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            MetricRow {
                step: 0,
                loss: 5.545,
                pos_logit_mean: 0.01,
                log_partition: 5.5,
                accuracy: 0.004,
                r2_state: f64::NAN,
                r2_diff: f64::NAN,
            },
            MetricRow {
                step: 500,
                loss: 1.25,
                pos_logit_mean: 4.0,
                log_partition: 5.2,
                accuracy: 0.36,
                r2_state: 0.91,
                r2_diff: 0.97,
            },
        ];
        let path = dir.path().join("metrics.csv");
        let mut buf = Vec::new();
        crate::csf::write_metrics_csv(&mut buf, &rows).unwrap();
        std::fs::write(&path, buf).unwrap();
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].step, 500);
        assert_eq!(back[1].r2_diff, 0.97);
        assert!(back[0].r2_state.is_nan());
    }

    #[test]
    fn emit_report_needs_metrics() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(dir.path()).is_err());
        // empty metrics file is also an error
        std::fs::write(
            dir.path().join("metrics.csv"),
            format!("{}\n", crate::csf::METRICS_HEADER),
        )
        .unwrap();
        assert!(emit_report(dir.path()).is_err());
    }

    #[test]
    fn emit_report_writes_plots_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            MetricRow {
                step: 0,
                loss: 5.5,
                pos_logit_mean: 0.0,
                log_partition: 5.5,
                accuracy: 0.004,
                r2_state: 0.1,
                r2_diff: 0.05,
            },
            MetricRow {
                step: 100,
                loss: 2.0,
                pos_logit_mean: 3.0,
                log_partition: 5.0,
                accuracy: 0.2,
                r2_state: 0.8,
                r2_diff: 0.9,
            },
        ];
        let mut buf = Vec::new();
        crate::csf::write_metrics_csv(&mut buf, &rows).unwrap();
        std::fs::write(dir.path().join("metrics.csv"), buf).unwrap();
        std::fs::write(dir.path().join("coverage.csv"), "step,occupied_cells\n0,10\n100,55\n")
            .unwrap();
        emit_report(dir.path()).unwrap();
        for file in ["loss.svg", "r2.svg", "coverage.svg", "summary.txt"] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        let svg = std::fs::read_to_string(dir.path().join("r2.svg")).unwrap();
        assert!(xml_well_formed(&svg));
        assert!(svg.contains(">0<") && svg.contains(">100<"));
    }
}
