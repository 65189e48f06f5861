use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentKind, Method};
use crate::harness::run::{Condition, ResultRow, ResultTable};

#[derive(Debug, Serialize)]
struct TimingRow<'a> {
    experiment: &'a str,
    phantom: &'a str,
    size: usize,
    views: usize,
    method: &'a str,
    condition: &'a str,
    seed: u64,
    wall_time_s: f64,
}

/// Aggregate over phantoms and seeds for one plotted point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub condition: Condition,
    /// `size` or `views`
    pub axis: String,
    pub value: usize,
    pub method: Method,
    pub count: usize,
    pub rmse_mean: f64,
    /// Sample (n - 1) variance; 0 for a single observation.
    pub rmse_var_sample: f64,
    pub ssim_mean: f64,
    pub ssim_var_sample: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn axis_of(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Underdetermined => "views",
        _ => "size",
    }
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(ExperimentKind, Condition, usize, Method), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let value = match r.experiment {
            ExperimentKind::Underdetermined => r.views,
            _ => r.size,
        };
        let g = groups.entry((r.experiment, r.condition, value, r.method)).or_default();
        g.0.push(r.rmse);
        g.1.push(r.ssim);
    }
    groups
        .into_iter()
        .map(|((experiment, condition, value, method), (rm, ss))| {
            let (rmse_mean, rmse_var_sample) = mean_var(&rm);
            let (ssim_mean, ssim_var_sample) = mean_var(&ss);
            SummaryRow {
                experiment,
                condition,
                axis: axis_of(experiment).to_string(),
                value,
                method,
                count: rm.len(),
                rmse_mean,
                rmse_var_sample,
                ssim_mean,
                ssim_var_sample,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut empty = true;
    for r in rows {
        w.serialize(r)?;
        empty = false;
    }
    if empty {
        w.write_record(header)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "experiment",
    "phantom",
    "size",
    "views",
    "method",
    "condition",
    "seed",
    "rmse",
    "ssim",
    "residual",
];

pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(path.as_ref(), rows, &RESULT_COLUMNS)
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Write `results.csv`, `timings.csv`, `summary.csv`, `errors.csv`,
/// `stability.csv` (noise experiments) and one RMSE and one SSIM plot per
/// experiment and condition. Returns the written paths.
pub fn emit_report(table: &ResultTable, outdir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let outdir = outdir.as_ref();
    if table.rows.is_empty() && table.failures.is_empty() {
        return Err(Error::InvalidValue("nothing to report".into()));
    }
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::new();

    let path = outdir.join("results.csv");
    write_results_csv(&table.rows, &path)?;
    written.push(path);

    let path = outdir.join("timings.csv");
    let timings = table.rows.iter().map(|r| TimingRow {
        experiment: r.experiment.name(),
        phantom: r.phantom.name(),
        size: r.size,
        views: r.views,
        method: r.method.name(),
        condition: r.condition.name(),
        seed: r.seed,
        wall_time_s: r.wall_time,
    });
    write_csv(&path, timings, &[])?;
    written.push(path);

    let summary = summarize(&table.rows);
    let path = outdir.join("summary.csv");
    write_csv(&path, &summary, &[])?;
    written.push(path);

    let path = outdir.join("errors.csv");
    write_csv(
        &path,
        &table.failures,
        &["experiment", "phantom", "size", "views", "method", "condition", "seed", "reason"],
    )?;
    written.push(path);

    if table.rows.iter().any(|r| r.experiment == ExperimentKind::NoiseEval) {
        let path = outdir.join("stability.csv");
        write_csv(&path, &table.stability, &["phantom", "size", "views", "method", "seed", "ratio"])?;
        written.push(path);
    }

    let mut plots: BTreeMap<(ExperimentKind, Condition), Vec<&SummaryRow>> = BTreeMap::new();
    for s in &summary {
        plots.entry((s.experiment, s.condition)).or_default().push(s);
    }
    for ((kind, cond), rows) in plots {
        for metric in [Metric::Rmse, Metric::Ssim] {
            let path = outdir.join(format!("{}_{}_{}.svg", kind.name(), cond.name(), metric.name()));
            let title = format!("{} ({}): {}", kind.name(), cond.name(), metric.name());
            let svg = render_svg(&title, axis_of(kind), metric, &rows);
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy)]
enum Metric {
    Rmse,
    Ssim,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Ssim => "ssim",
        }
    }

    fn of(self, s: &SummaryRow) -> (f64, f64) {
        match self {
            Metric::Rmse => (s.rmse_mean, s.rmse_var_sample),
            Metric::Ssim => (s.ssim_mean, s.ssim_var_sample),
        }
    }
}

const COLOURS: [&str; 5] = ["#d62728", "#9467bd", "#1f77b4", "#2ca02c", "#ff7f0e"];

fn colour(m: Method) -> &'static str {
    COLOURS[Method::ALL.iter().position(|&x| x == m).unwrap_or(0)]
}

/// Mean with a +-variance bar per x value, one polyline per method. X values
/// are spaced evenly since sizes and view counts are roughly geometric.
fn render_svg(title: &str, axis: &str, metric: Metric, rows: &[&SummaryRow]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 130.0, 40.0, 50.0);
    let mut xs: Vec<usize> = rows.iter().map(|r| r.value).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for r in rows {
        let (m, v) = metric.of(r);
        lo = lo.min(m - v);
        hi = hi.max(m + v);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: usize| {
        let i = xs.iter().position(|&v| v == x).unwrap_or(0) as f64;
        if xs.len() == 1 {
            left + pw / 2.0
        } else {
            left + pw * i / (xs.len() - 1) as f64
        }
    };
    let py = |y: f64| top + ph * (1.0 - (y - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"  <rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"  <text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"  <path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for &x in &xs {
        let _ = writeln!(
            s,
            r#"  <text x="{:.2}" y="{}" text-anchor="middle">{x}</text>"#,
            px(x),
            top + ph + 18.0
        );
    }
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            left - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(s, r#"  <text x="{}" y="{}" text-anchor="middle">{axis}</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"  <text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        metric.name()
    );

    let mut by_method: BTreeMap<Method, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(r.method).or_default().push(r);
    }
    for (k, (method, mut pts)) in by_method.into_iter().enumerate() {
        pts.sort_by_key(|r| r.value);
        let c = colour(method);
        let _ = writeln!(s, r#"  <g class="method" data-method="{}">"#, method.name());
        let points: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.value), py(metric.of(r).0)))
            .collect();
        let _ = writeln!(
            s,
            r#"    <polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            points.join(" ")
        );
        for r in &pts {
            let (m, v) = metric.of(r);
            let x = px(r.value);
            let _ = writeln!(
                s,
                r#"    <line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}"/>"#,
                py(m - v),
                py(m + v)
            );
            let _ = writeln!(s, r#"    <circle cx="{x:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, py(m));
        }
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"    <line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"    <text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, method.name());
        let _ = writeln!(s, "  </g>");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PhantomSpec;

    fn row(method: Method, size: usize, seed: u64, rmse: f64) -> ResultRow {
        ResultRow {
            experiment: ExperimentKind::SizeSweep,
            phantom: PhantomSpec::Foam,
            size,
            views: size,
            method,
            condition: Condition::Clean,
            seed,
            rmse,
            ssim: 1.0 - rmse / 3.0,
            residual: rmse * 0.1,
            wall_time: 0.25,
        }
    }

    fn table(rows: Vec<ResultRow>) -> ResultTable {
        ResultTable {
            rows,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&table(vec![row(Method::Qa, 4, 1, 0.0)]), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = (0..6)
            .map(|i| row(Method::ALL[i % 5], 4 << (i % 2), i as u64, 0.1 * i as f64 + 1.0 / 3.0))
            .collect();
        emit_report(&table(rows.clone()), dir.path()).unwrap();
        let back = read_results_csv(dir.path().join("results.csv")).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!((a.method, a.size, a.seed, a.phantom), (b.method, b.size, b.seed, b.phantom));
            assert!((a.rmse - b.rmse).abs() <= 1e-12);
            assert!((a.ssim - b.ssim).abs() <= 1e-12);
            assert!((a.residual - b.residual).abs() <= 1e-12);
        }
    }

    #[test]
    fn svg_has_polyline_per_method() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row(Method::Qa, 4, 1, 0.0),
            row(Method::Qa, 8, 1, 0.1),
            row(Method::Fbp, 4, 1, 0.4),
            row(Method::Fbp, 8, 1, 0.5),
            row(Method::Fbp, 8, 2, 0.7),
        ];
        emit_report(&table(rows), dir.path()).unwrap();
        let svg = fs::read_to_string(dir.path().join("size_sweep_clean_rmse.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(r#"data-method="qa""#) && svg.contains(r#"data-method="fbp""#));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn summary_uses_sample_variance() {
        let rows = vec![row(Method::Sart, 4, 1, 1.0), row(Method::Sart, 4, 2, 3.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].rmse_mean, 2.0);
        assert_eq!(s[0].rmse_var_sample, 2.0);
        assert_eq!(s[0].count, 2);
    }

    #[test]
    fn empty_table_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&ResultTable::default(), dir.path()).is_err());
    }
}
