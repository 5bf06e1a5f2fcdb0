//! SVG box plots and scatter plots, each written next to a CSV of the data
//! it draws. Output depends only on the inputs, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::acoustic::{write_cov_csv, AcousticReport, Measure};
use crate::error::{Result, StatsError};
use crate::regression::{ols_regression, Regression};
use crate::scores::{Question, ScoreTable};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 72.0;
const BAND_SAMPLES: usize = 48;

/// One rendered figure and the CSV behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub csv: String,
    /// Data rows in `csv`.
    pub rows: usize,
}

/// Five-number summary used for one box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// Quartiles and 1.5 IQR whiskers; `None` for empty input.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let whisker_lo = v.iter().copied().find(|x| *x >= q1 - 1.5 * iqr).unwrap_or(q1);
        let whisker_hi = v.iter().rev().copied().find(|x| *x <= q3 + 1.5 * iqr).unwrap_or(q3);
        Some(Self { q1, median, q3, whisker_lo, whisker_hi })
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn y_axis(svg: &mut String, ys: &Scale, label: &str) {
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#, HEIGHT - BOTTOM);
    for t in ys.ticks() {
        let y = ys.map(t);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 4.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(label)
    );
}

fn x_axis(svg: &mut String, xs: &Scale, label: &str) {
    let base = HEIGHT - BOTTOM;
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#, WIDTH - RIGHT);
    for t in xs.ticks() {
        let x = xs.map(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, base + 4.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.3}</text>"#, base + 18.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 16.0, escape(label));
}

/// One box per group, in the given order.
pub fn box_plot(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> Result<Plot> {
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    if all.is_empty() {
        return Err(StatsError::Empty("box plot data"));
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ys = Scale::new(lo, hi, HEIGHT - BOTTOM, TOP);
    let slot = (WIDTH - LEFT - RIGHT) / groups.len() as f64;
    let half = (slot * 0.3).min(40.0);

    let mut svg = String::new();
    open(&mut svg, title);
    y_axis(&mut svg, &ys, y_label);
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, HEIGHT - BOTTOM, WIDTH - RIGHT, HEIGHT - BOTTOM);

    let mut csv = String::from("system,score\n");
    let mut rows = 0;
    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="end" transform="rotate(-45 {cx:.2} {:.2})">{}</text>"#,
            HEIGHT - BOTTOM + 14.0,
            HEIGHT - BOTTOM + 14.0,
            escape(name)
        );
        for v in values {
            let _ = writeln!(csv, "{},{v}", csv_field(name));
            rows += 1;
        }
        let Some(b) = BoxStats::of(values) else { continue };
        let (y1, ym, y3) = (ys.map(b.q1), ys.map(b.median), ys.map(b.q3));
        let _ = writeln!(svg, r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{y1:.2}" stroke="black"/>"#, ys.map(b.whisker_lo));
        let _ = writeln!(svg, r#"<line class="whisker" x1="{cx:.2}" y1="{y3:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, ys.map(b.whisker_hi));
        let _ = writeln!(
            svg,
            r##"<rect class="box" x="{:.2}" y="{y3:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            2.0 * half,
            (y1 - y3).max(0.0)
        );
        let _ = writeln!(svg, r#"<line class="median" x1="{:.2}" y1="{ym:.2}" x2="{:.2}" y2="{ym:.2}" stroke="black" stroke-width="2"/>"#, cx - half, cx + half);
        for v in values.iter().filter(|v| **v < b.whisker_lo || **v > b.whisker_hi) {
            let _ = writeln!(svg, r#"<circle class="outlier" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, ys.map(*v));
        }
    }
    svg.push_str("</svg>\n");
    Ok(Plot { svg, csv, rows })
}

/// A labelled scatter point; `highlight` points are drawn as plus marks.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub highlight: bool,
}

/// Scatter plot with an optional fitted line and confidence band drawn over
/// the x range of the non-highlighted points.
pub fn scatter_plot(title: &str, x_label: &str, y_label: &str, points: &[Point], fit: Option<&Regression>) -> Result<Plot> {
    if points.is_empty() {
        return Err(StatsError::Empty("scatter data"));
    }
    let fold = |f: fn(&Point) -> f64| {
        points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (x0, x1) = fold(|p| p.x);
    let (mut y0, mut y1) = fold(|p| p.y);
    let fitted: Vec<&Point> = points.iter().filter(|p| !p.highlight).collect();
    let span = fitted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let band: Vec<(f64, f64, f64)> = match fit {
        Some(f) if span.0 <= span.1 => (0..=BAND_SAMPLES)
            .map(|i| {
                let x = span.0 + (span.1 - span.0) * i as f64 / BAND_SAMPLES as f64;
                let (lo, hi) = f.band(x);
                (x, lo, hi)
            })
            .collect(),
        _ => Vec::new(),
    };
    for &(_, lo, hi) in &band {
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    let xs = Scale::new(x0, x1, LEFT, WIDTH - RIGHT);
    let ys = Scale::new(y0, y1, HEIGHT - BOTTOM, TOP);

    let mut svg = String::new();
    open(&mut svg, title);
    y_axis(&mut svg, &ys, y_label);
    x_axis(&mut svg, &xs, x_label);

    if let (Some(f), false) = (fit, band.is_empty()) {
        let mut pts = String::new();
        for &(x, _, hi) in &band {
            let _ = write!(pts, "{:.2},{:.2} ", xs.map(x), ys.map(hi));
        }
        for &(x, lo, _) in band.iter().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", xs.map(x), ys.map(lo));
        }
        let _ = writeln!(svg, r##"<polygon class="band" points="{}" fill="#fdae6b" fill-opacity="0.4" stroke="none"/>"##, pts.trim_end());
        let _ = writeln!(
            svg,
            r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d94801" stroke-width="2"/>"##,
            xs.map(span.0),
            ys.map(f.predict(span.0)),
            xs.map(span.1),
            ys.map(f.predict(span.1))
        );
    }

    let mut csv = String::from("label,x,y,highlight\n");
    for p in points {
        let (cx, cy) = (xs.map(p.x), ys.map(p.y));
        if p.highlight {
            let _ = writeln!(
                svg,
                r#"<path class="point reference" d="M{:.2} {cy:.2}H{:.2}M{cx:.2} {:.2}V{:.2}" stroke="red" stroke-width="2"><title>{}</title></path>"#,
                cx - 5.0,
                cx + 5.0,
                cy - 5.0,
                cy + 5.0,
                escape(&p.label)
            );
        } else {
            let _ = writeln!(
                svg,
                r#"<circle class="point" cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="steelblue"><title>{}</title></circle>"#,
                escape(&p.label)
            );
        }
        let _ = writeln!(csv, "{},{},{},{}", csv_field(&p.label), p.x, p.y, p.highlight);
    }
    svg.push_str("</svg>\n");
    Ok(Plot { svg, csv, rows: points.len() })
}

/// What [`emit_plots`] draws.
#[derive(Debug, Clone, Default)]
pub struct PlotInputs<'a> {
    /// Normalised scores.
    pub scores: Option<&'a ScoreTable>,
    /// Systems and their order; defaults to every system in `scores`.
    pub systems: Option<Vec<String>>,
    /// Questions to draw; empty means all four.
    pub questions: Vec<Question>,
    pub acoustic: Option<&'a AcousticReport>,
}

fn write_plot(dir: &Path, stem: &str, plot: &Plot, out: &mut Vec<PathBuf>) -> Result<()> {
    for (ext, body) in [("svg", &plot.svg), ("csv", &plot.csv)] {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(())
}

/// Score box plots per question, question-vs-question scatter plots, and
/// acoustic-measure-vs-score scatter plots. Returns every file written.
pub fn emit_plots(dir: &Path, inputs: &PlotInputs<'_>) -> Result<Vec<PathBuf>> {
    if inputs.scores.is_none_or(|s| s.is_empty()) && inputs.acoustic.is_none_or(|a| a.rows.is_empty()) {
        return Err(StatsError::Empty("plot results"));
    }
    std::fs::create_dir_all(dir)?;
    let questions = if inputs.questions.is_empty() { Question::ALL.to_vec() } else { inputs.questions.clone() };
    let mut out = Vec::new();

    if let Some(table) = inputs.scores.filter(|s| !s.is_empty()) {
        let systems = inputs.systems.clone().unwrap_or_else(|| table.systems());
        for &q in &questions {
            let groups: Vec<(String, Vec<f64>)> = systems.iter().map(|s| (s.clone(), table.scores(s, q))).collect();
            if groups.iter().all(|(_, v)| v.is_empty()) {
                continue;
            }
            let plot = box_plot(&format!("Normalised scores, {q}"), "score", &groups)?;
            write_plot(dir, &format!("scores_{q}"), &plot, &mut out)?;
        }
        for (i, &qa) in questions.iter().enumerate() {
            for &qb in &questions[i + 1..] {
                let mut answers: BTreeMap<(&str, &str), (&str, Option<f64>, Option<f64>)> = BTreeMap::new();
                for r in table.records().iter().filter(|r| systems.contains(&r.system)) {
                    let e = answers.entry((r.listener.as_str(), r.story.as_str())).or_insert((r.system.as_str(), None, None));
                    if r.question == qa {
                        e.1 = Some(r.score);
                    } else if r.question == qb {
                        e.2 = Some(r.score);
                    }
                }
                let points: Vec<Point> = answers
                    .values()
                    .filter_map(|(s, a, b)| Some(Point { label: s.to_string(), x: (*a)?, y: (*b)?, highlight: false }))
                    .collect();
                if points.is_empty() {
                    continue;
                }
                let x: Vec<f64> = points.iter().map(|p| p.x).collect();
                let y: Vec<f64> = points.iter().map(|p| p.y).collect();
                let fit = ols_regression(&x, &y).ok();
                let plot = scatter_plot(&format!("{qa} vs {qb}"), &qa.to_string(), &qb.to_string(), &points, fit.as_ref())?;
                write_plot(dir, &format!("questions_{qa}_{qb}"), &plot, &mut out)?;
            }
        }
    }

    if let Some(report) = inputs.acoustic {
        for measure in Measure::ALL {
            for &q in &questions {
                let points: Vec<Point> = report
                    .rows
                    .iter()
                    .filter_map(|r| {
                        let y = *r.mean_scores.get(&q)?;
                        Some(Point { label: r.system.clone(), x: r.value(measure), y, highlight: r.system == report.reference })
                    })
                    .collect();
                if points.is_empty() {
                    continue;
                }
                let fit = report.associations.iter().find(|a| a.measure == measure && a.question == q).and_then(|a| a.regression);
                let plot = scatter_plot(&format!("{} vs mean score, {q}", measure.name()), measure.name(), "mean score", &points, fit.as_ref())?;
                write_plot(dir, &format!("{}_{q}", measure.name()), &plot, &mut out)?;
            }
        }
        let path = dir.join("acoustic_cov.csv");
        write_cov_csv(&report.entries(), std::fs::File::create(&path)?)?;
        out.push(path);
    }
    Ok(out)
}
