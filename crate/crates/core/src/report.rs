//! Plot-ready series and deterministic SVG rendering of ECDF plots, ECDF
//! difference plots, and rank histograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dist::binom_quantile;
use crate::error::{Error, Result};
use crate::single::ConfidenceBands;
use crate::transform::EcdfTrajectory;

pub const PLOT_SCHEMA: &str = "plot-data/1";

const WIDTH: f64 = 600.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 55.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Ecdf,
    EcdfDiff,
    RankHist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub counts: Vec<u64>,
    /// Per-bin interval for the count, shared by all bins.
    pub lower: u64,
    pub upper: u64,
    pub expected: f64,
    pub alpha: f64,
}

impl RankHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

/// Equal-width right-closed histogram of values in `[0, 1]`
/// with a pointwise binomial interval `Bin(n, 1/bins)` at `alpha/2` and
/// `1 - alpha/2`.
pub fn rank_hist(u: &[f64], bins: usize, alpha: f64) -> Result<RankHistogram> {
    if bins < 2 {
        return Err(Error::InvalidBins(bins));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let mut counts = vec![0u64; bins];
    for &v in u {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("{v} outside [0, 1]")));
        }
        // right-closed bins (k/b, (k+1)/b]; the guard keeps exact multiples
        // of 1/bins in the bin they close, and 0 joins the first bin
        let b = ((v * bins as f64 - 1e-9).ceil().max(1.0) as usize - 1).min(bins - 1);
        counts[b] += 1;
    }
    let n = u.len() as u64;
    let p = 1.0 / bins as f64;
    Ok(RankHistogram {
        counts,
        lower: binom_quantile(alpha / 2.0, n, p)?,
        upper: binom_quantile(1.0 - alpha / 2.0, n, p)?,
        expected: n as f64 * p,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    /// Values at `z_0 = 0, z_1, ..., z_K`.
    pub y: Vec<f64>,
}

/// Band and trajectories on the grid with the `z_0 = 0` anchor prepended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub series: Vec<Series>,
}

impl PlotSeries {
    fn shift(&self, sign: f64) -> PlotSeries {
        let apply =
            |v: &[f64]| -> Vec<f64> { v.iter().zip(&self.x).map(|(y, z)| y + sign * z).collect() };
        PlotSeries {
            x: self.x.clone(),
            lower: apply(&self.lower),
            upper: apply(&self.upper),
            series: self
                .series
                .iter()
                .map(|s| Series {
                    label: s.label.clone(),
                    y: apply(&s.y),
                })
                .collect(),
        }
    }

    /// Add the diagonal back to a difference series.
    pub fn undo_diff(&self) -> PlotSeries {
        self.shift(1.0)
    }
}

fn default_label(i: usize) -> String {
    format!("chain {}", i + 1)
}

/// ECDF series of each trajectory with the band, on the shared grid.
pub fn ecdf_series(
    bands: &ConfidenceBands,
    trajectories: &[EcdfTrajectory],
    labels: &[String],
) -> Result<PlotSeries> {
    let mut x = vec![0.0];
    x.extend_from_slice(bands.grid.points());
    let with_anchor = |v: Vec<f64>| {
        let mut out = vec![0.0];
        out.extend(v);
        out
    };
    let mut series = Vec::with_capacity(trajectories.len());
    for (i, t) in trajectories.iter().enumerate() {
        bands.check_grid(t)?;
        series.push(Series {
            label: labels.get(i).cloned().unwrap_or_else(|| default_label(i)),
            y: with_anchor(t.values()),
        });
    }
    Ok(PlotSeries {
        x,
        lower: with_anchor(bands.lower()),
        upper: with_anchor(bands.upper()),
        series,
    })
}

/// Subtract the uniform CDF `z_i` from every band limit and series value.
pub fn diff_transform(
    bands: &ConfidenceBands,
    trajectories: &[EcdfTrajectory],
) -> Result<PlotSeries> {
    Ok(ecdf_series(bands, trajectories, &[])?.shift(-1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<ConfidenceBands>,
    pub trajectories: Vec<EcdfTrajectory>,
    pub labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<RankHistogram>,
}

impl PlotSpec {
    pub fn ecdf(
        bands: ConfidenceBands,
        trajectories: Vec<EcdfTrajectory>,
        difference: bool,
    ) -> Result<Self> {
        for t in &trajectories {
            bands.check_grid(t)?;
        }
        Ok(PlotSpec {
            kind: if difference {
                PlotKind::EcdfDiff
            } else {
                PlotKind::Ecdf
            },
            title: String::new(),
            bands: Some(bands),
            labels: (0..trajectories.len()).map(default_label).collect(),
            trajectories,
            histogram: None,
        })
    }

    pub fn rank_hist(histogram: RankHistogram) -> Self {
        PlotSpec {
            kind: PlotKind::RankHist,
            title: String::new(),
            bands: None,
            trajectories: Vec::new(),
            labels: Vec::new(),
            histogram: Some(histogram),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    fn series(&self) -> Result<Option<PlotSeries>> {
        let Some(bands) = &self.bands else {
            return Ok(None);
        };
        let s = ecdf_series(bands, &self.trajectories, &self.labels)?;
        Ok(Some(match self.kind {
            PlotKind::EcdfDiff => s.shift(-1.0),
            _ => s,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub schema: String,
    pub kind: PlotKind,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<PlotSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<RankHistogram>,
}

pub fn plot_data(spec: &PlotSpec) -> Result<PlotData> {
    Ok(PlotData {
        schema: PLOT_SCHEMA.to_string(),
        kind: spec.kind,
        title: spec.title.clone(),
        gamma: spec.bands.as_ref().map(|b| b.gamma),
        series: spec.series()?,
        histogram: spec.histogram.clone(),
    })
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round `v` up to a multiple of `step`.
fn ceil_to(v: f64, step: f64) -> f64 {
    (v / step - 1e-9).ceil() * step
}

fn axes(out: &mut String, f: &Frame, xticks: &[f64], yticks: &[f64], xdec: usize, ydec: usize) {
    let (l, r) = (f.px(f.x0), f.px(f.x1));
    let (b, t) = (f.py(f.y0), f.py(f.y1));
    out.push_str("<g class=\"axes\" stroke=\"#000000\" stroke-width=\"1\" fill=\"none\">\n");
    let _ = writeln!(out, "<path d=\"M{l:.2},{t:.2} V{b:.2} H{r:.2}\"/>");
    for &x in xticks {
        let _ = writeln!(out, "<path d=\"M{:.2},{b:.2} v5\"/>", f.px(x));
    }
    for &y in yticks {
        let _ = writeln!(out, "<path d=\"M{l:.2},{:.2} h-5\"/>", f.py(y));
    }
    out.push_str("</g>\n");
    out.push_str(
        "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n",
    );
    for &x in xticks {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x:.xdec$}</text>",
            f.px(x),
            b + 18.0
        );
    }
    for &y in yticks {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{y:.ydec$}</text>",
            l - 8.0,
            f.py(y) + 4.0
        );
    }
    out.push_str("</g>\n");
}

fn header(out: &mut String, title: &str, kind: PlotKind) {
    let kind = match kind {
        PlotKind::Ecdf => "ecdf",
        PlotKind::EcdfDiff => "ecdf_diff",
        PlotKind::RankHist => "rank_hist",
    };
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" data-kind=\"{kind}\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    if !title.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            WIDTH / 2.0,
            escape(title)
        );
    }
}

fn render_curves(out: &mut String, s: &PlotSeries, kind: PlotKind) {
    let (y0, y1, yticks, ydec) = if kind == PlotKind::EcdfDiff {
        let peak = s
            .lower
            .iter()
            .chain(&s.upper)
            .chain(s.series.iter().flat_map(|c| c.y.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let m = ceil_to(peak.max(0.01), 0.05);
        (-m, m, vec![-m, -m / 2.0, 0.0, m / 2.0, m], 3)
    } else {
        (0.0, 1.0, vec![0.0, 0.25, 0.5, 0.75, 1.0], 2)
    };
    let f = Frame {
        x0: 0.0,
        x1: 1.0,
        y0,
        y1,
    };
    axes(out, &f, &[0.0, 0.25, 0.5, 0.75, 1.0], &yticks, 2, ydec);

    let mut points = String::new();
    for (x, y) in s.x.iter().zip(&s.upper) {
        let _ = write!(points, "{:.2},{:.2} ", f.px(*x), f.py(*y));
    }
    for (x, y) in s.x.iter().zip(&s.lower).rev() {
        let _ = write!(points, "{:.2},{:.2} ", f.px(*x), f.py(*y));
    }
    let _ = writeln!(
        out,
        "<polygon class=\"band\" points=\"{}\" fill=\"#4682b4\" fill-opacity=\"0.25\" stroke=\"#4682b4\" stroke-width=\"0.8\"/>",
        points.trim_end()
    );
    if kind == PlotKind::EcdfDiff {
        let _ = writeln!(
            out,
            "<path class=\"reference\" d=\"M{:.2},{:.2} H{:.2}\" stroke=\"#888888\" stroke-dasharray=\"4 3\" fill=\"none\"/>",
            f.px(0.0),
            f.py(0.0),
            f.px(1.0)
        );
    } else {
        let _ = writeln!(
            out,
            "<path class=\"reference\" d=\"M{:.2},{:.2} L{:.2},{:.2}\" stroke=\"#888888\" stroke-dasharray=\"4 3\" fill=\"none\"/>",
            f.px(0.0),
            f.py(0.0),
            f.px(1.0),
            f.py(1.0)
        );
    }
    for (i, c) in s.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = format!("M{:.2},{:.2}", f.px(s.x[0]), f.py(c.y[0]));
        for (x, y) in s.x.iter().zip(&c.y).skip(1) {
            let _ = write!(d, " H{:.2} V{:.2}", f.px(*x), f.py(*y));
        }
        let _ = writeln!(
            out,
            "<path class=\"trajectory\" data-chain=\"{i}\" d=\"{d}\" stroke=\"{color}\" stroke-width=\"1.5\" fill=\"none\"/>"
        );
    }
    if !s.series.is_empty() {
        out.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n");
        for (i, c) in s.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = TOP + 12.0 + 14.0 * i as f64;
            let x = WIDTH - RIGHT - 90.0;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"3\" fill=\"{color}\"/>",
                y - 4.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{y:.2}\">{}</text>",
                x + 14.0,
                escape(&c.label)
            );
        }
        out.push_str("</g>\n");
    }
}

fn render_hist(out: &mut String, h: &RankHistogram) {
    let bins = h.bins();
    let top = h.counts.iter().copied().max().unwrap_or(0).max(h.upper) as f64;
    let step = if top <= 10.0 {
        2.0
    } else {
        ceil_to(top / 5.0, 5.0)
    };
    let y1 = ceil_to(top * 1.1, step).max(step);
    let yticks: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&v| v <= y1 + 1e-9)
        .collect();
    let f = Frame {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1,
    };
    axes(out, &f, &[0.0, 0.25, 0.5, 0.75, 1.0], &yticks, 2, 0);
    let (l, r) = (f.px(0.0), f.px(1.0));
    let (lo, hi) = (f.py(h.lower as f64), f.py(h.upper as f64));
    let _ = writeln!(
        out,
        "<polygon class=\"band\" points=\"{l:.2},{hi:.2} {r:.2},{hi:.2} {r:.2},{lo:.2} {l:.2},{lo:.2}\" fill=\"#4682b4\" fill-opacity=\"0.25\" stroke=\"#4682b4\" stroke-width=\"0.8\"/>"
    );
    out.push_str("<g class=\"bars\" fill=\"#7f7f7f\" fill-opacity=\"0.6\" stroke=\"#ffffff\" stroke-width=\"0.5\">\n");
    for (b, &c) in h.counts.iter().enumerate() {
        let x = f.px(b as f64 / bins as f64);
        let w = f.px((b + 1) as f64 / bins as f64) - x;
        let y = f.py(c as f64);
        let _ = writeln!(
            out,
            "<rect class=\"bar\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{:.2}\"/>",
            f.py(0.0) - y
        );
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<path class=\"reference\" d=\"M{l:.2},{:.2} H{r:.2}\" stroke=\"#888888\" stroke-dasharray=\"4 3\" fill=\"none\"/>",
        f.py(h.expected)
    );
}

/// Deterministic SVG 1.1 document for the plot.
pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    let mut out = String::new();
    header(&mut out, &spec.title, spec.kind);
    match spec.kind {
        PlotKind::RankHist => {
            let h = spec
                .histogram
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("rank histogram plot without data".into()))?;
            render_hist(&mut out, h);
        }
        kind => {
            let s = spec
                .series()?
                .ok_or_else(|| Error::InvalidInput("ECDF plot without bands".into()))?;
            render_curves(&mut out, &s, kind);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single::bands_from_gamma;
    use crate::transform::{ecdf_eval, EvaluationGrid};

    fn diagonal(n: usize) -> (ConfidenceBands, EcdfTrajectory) {
        let g = EvaluationGrid::uniform(n).unwrap();
        let u: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        (bands_from_gamma(n, &g, 0.05).unwrap(), ecdf_eval(&u, &g))
    }

    #[test]
    fn diagonal_difference_is_zero() {
        let (b, t) = diagonal(20);
        let d = diff_transform(&b, &[t]).unwrap();
        assert!(d.series[0].y.iter().all(|v| v.abs() < 1e-15));
        for i in 1..d.x.len() - 1 {
            assert!(d.lower[i] <= 0.0 && d.upper[i] >= 0.0);
        }
    }

    #[test]
    fn diff_round_trip() {
        let (b, t) = diagonal(13);
        let plain = ecdf_series(&b, std::slice::from_ref(&t), &[]).unwrap();
        let back = diff_transform(&b, &[t]).unwrap().undo_diff();
        for (a, c) in plain.series[0].y.iter().zip(&back.series[0].y) {
            assert!((a - c).abs() <= 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_detected() {
        let (b, _) = diagonal(10);
        let other = ecdf_eval(&[0.5], &EvaluationGrid::uniform(4).unwrap());
        assert!(matches!(
            diff_transform(&b, &[other]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn histogram_examples() {
        let u: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let h = rank_hist(&u, 10, 0.05).unwrap();
        assert!(h.counts.iter().all(|&c| c == 10));
        let h = rank_hist(&[1.0, 0.0], 4, 0.05).unwrap();
        assert_eq!(h.counts, vec![1, 0, 0, 1]);
        assert!(matches!(
            rank_hist(&[0.5], 1, 0.05),
            Err(Error::InvalidBins(1))
        ));
    }

    #[test]
    fn histogram_interval_scales() {
        let width = |n: usize| {
            let h = rank_hist(&vec![0.5; n], 10, 0.05).unwrap();
            assert!(h.lower as f64 <= h.expected && h.expected <= h.upper as f64);
            (h.upper - h.lower) as f64 / n as f64
        };
        let ratio = width(100) / width(400);
        assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn svg_structure() {
        let (b, t) = diagonal(10);
        let svg =
            render_svg(&PlotSpec::ecdf(b.clone(), vec![t.clone(); 4], false).unwrap()).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("viewBox=\"0 0 600 400\""));
        assert_eq!(svg.matches("class=\"band\"").count(), 1);
        assert_eq!(svg.matches("class=\"trajectory\"").count(), 4);
        assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());
        let empty = render_svg(&PlotSpec::ecdf(b, vec![], true).unwrap()).unwrap();
        assert_eq!(empty.matches("class=\"trajectory\"").count(), 0);
        assert_eq!(empty.matches("class=\"band\"").count(), 1);
    }

    #[test]
    fn svg_escapes_text() {
        let (b, t) = diagonal(5);
        let spec = PlotSpec::ecdf(b, vec![t], false)
            .unwrap()
            .with_title("a < b & c")
            .with_labels(vec!["\"x\"".into()]);
        let svg = render_svg(&spec).unwrap();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains("&quot;x&quot;"));
    }

    #[test]
    fn plot_data_schema() {
        let (b, t) = diagonal(5);
        let d = plot_data(&PlotSpec::ecdf(b, vec![t], true).unwrap()).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"schema\":\"plot-data/1\""));
        assert!(json.contains("\"kind\":\"ecdf_diff\""));
    }
}
