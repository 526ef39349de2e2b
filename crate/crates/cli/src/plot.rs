//! Deterministic SVG line plots of sweep summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::sweep::{summarize, SweepRecord};

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    LatentMmd,
    LatentJs,
    LatentTv,
    ReconW1,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::LatentMmd, Column::LatentJs, Column::LatentTv, Column::ReconW1];

    pub fn name(self) -> &'static str {
        match self {
            Column::LatentMmd => "latent_mmd",
            Column::LatentJs => "latent_js",
            Column::LatentTv => "latent_tv",
            Column::ReconW1 => "recon_w1",
        }
    }

    pub fn value(self, r: &SweepRecord) -> f64 {
        match self {
            Column::LatentMmd => r.latent_mmd,
            Column::LatentJs => r.latent_js,
            Column::LatentTv => r.latent_tv,
            Column::ReconW1 => r.recon_w1,
        }
    }
}

/// Multiplier applied to each loss before averaging.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correction {
    None,
    SqrtN,
    N,
}

impl Correction {
    pub fn apply(self, r: &SweepRecord, v: f64) -> f64 {
        match self {
            Correction::None => v,
            Correction::SqrtN => r.times_sqrt_n(v),
            Correction::N => r.times_n(v),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Correction::None => "",
            Correction::SqrtN => "_x_sqrt_n",
            Correction::N => "_x_n",
        }
    }
}

/// `Losses`: mean ± sd of every loss column. `Corrected`: the latent
/// columns multiplied by `√n` and by `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Losses,
    Corrected,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "losses" => Ok(PlotKind::Losses),
            "corrected" => Ok(PlotKind::Corrected),
            _ => Err(format!("unknown plot kind `{}` (losses, corrected)", s)),
        }
    }
}

/// `(x, mean, sd)` points of one curve, sorted by `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub title: String,
    pub x_label: String,
    /// Logarithmic x axis; needs positive `x`.
    pub log_x: bool,
    pub points: Vec<(f64, f64, f64)>,
}

pub fn series(records: &[SweepRecord], column: Column, correction: Correction) -> Series {
    let points = summarize(records, |r| correction.apply(r, column.value(r)))
        .into_iter()
        .map(|(n, m, sd, _)| (n as f64, m, sd))
        .collect();
    Series {
        title: format!("{}{}", column.name(), correction.suffix()),
        x_label: "n".into(),
        log_x: true,
        points,
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e6 || v.abs() < 1e-3 {
        format!("{:.2e}", v)
    } else {
        format!("{:.4}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders one curve with error bars.
pub fn render_svg(s: &Series) -> CliResult<String> {
    if s.points.is_empty() {
        return Err(CliError::config(format!("nothing to plot for {}", s.title)));
    }
    if s.log_x && s.points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(CliError::config(format!("log axis needs positive x in {}", s.title)));
    }
    let xs: Vec<f64> = s.points.iter().map(|p| if s.log_x { p.0.ln() } else { p.0 }).collect();
    let (xmin, xmax) = (xs[0], xs[xs.len() - 1]);
    let lo = s.points.iter().map(|p| p.1 - p.2).fold(f64::INFINITY, f64::min);
    let hi = s.points.iter().map(|p| p.1 + p.2).fold(f64::NEG_INFINITY, f64::max);
    let (ymin, ymax) = if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| if xmax > xmin { LEFT + (x - xmin) / (xmax - xmin) * pw } else { LEFT + pw / 2.0 };
    let py = |y: f64| TOP + (ymax - y) / (ymax - ymin) * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        s.title
    );
    let _ = writeln!(
        o,
        r#"<path d="M{l:.2},{t:.2} L{l:.2},{b:.2} L{r:.2},{b:.2}" stroke="black" fill="none"/>"#,
        l = LEFT,
        t = TOP,
        b = TOP + ph,
        r = LEFT + pw
    );
    for i in 0..=4 {
        let y = ymin + (ymax - ymin) * i as f64 / 4.0;
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(y) + 4.0,
            fmt_num(y)
        );
    }
    for (p, x) in s.points.iter().zip(&xs) {
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(*x),
            TOP + ph + 18.0,
            fmt_num(p.0)
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0,
        s.x_label
    );
    if s.points.len() > 1 {
        let pts: Vec<String> = s.points.iter().zip(&xs).map(|(p, x)| format!("{:.2},{:.2}", px(*x), py(p.1))).collect();
        let _ = writeln!(o, r##"<polyline points="{}" stroke="#1f77b4" fill="none"/>"##, pts.join(" "));
    }
    for (p, x) in s.points.iter().zip(&xs) {
        let cx = px(*x);
        if p.2 > 0.0 {
            let _ = writeln!(
                o,
                r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#1f77b4"/>"##,
                py(p.1 - p.2),
                py(p.1 + p.2),
                cx = cx
            );
        }
        let _ = writeln!(o, r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f77b4"/>"##, cx, py(p.1));
    }
    o.push_str("</svg>\n");
    Ok(o)
}

/// Writes one SVG per curve of `kind` into `out_dir`; returns the paths.
pub fn emit_plots(records: &[SweepRecord], kind: PlotKind, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(CliError::config("sweep csv has no rows"));
    }
    let curves: Vec<Series> = match kind {
        PlotKind::Losses => Column::ALL.iter().map(|&c| series(records, c, Correction::None)).collect(),
        PlotKind::Corrected => [Column::LatentMmd, Column::LatentJs, Column::LatentTv]
            .iter()
            .flat_map(|&c| [series(records, c, Correction::SqrtN), series(records, c, Correction::N)])
            .collect(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut paths = Vec::new();
    for s in curves {
        let path = out_dir.join(format!("{}.svg", s.title));
        std::fs::write(&path, render_svg(&s)?).map_err(|e| CliError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, mmd: f64) -> SweepRecord {
        SweepRecord {
            n,
            run: 0,
            seed: 0,
            latent_mmd: mmd,
            latent_js: mmd,
            latent_tv: mmd,
            recon_w1: mmd,
            recon_mse: mmd,
            seconds: 0.0,
        }
    }

    #[test]
    fn single_point_renders_one_marker() {
        let svg = render_svg(&series(&[rec(1000, 0.1)], Column::LatentMmd, Correction::None)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn corrected_means_are_scaled_raw_means() {
        let recs = [rec(100, 0.3), rec(100, 0.5), rec(400, 0.2)];
        let raw = series(&recs, Column::LatentMmd, Correction::None);
        let cor = series(&recs, Column::LatentMmd, Correction::SqrtN);
        for (a, b) in raw.points.iter().zip(&cor.points) {
            assert!((a.1 * a.0.sqrt() - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plots(&[], PlotKind::Losses, dir.path()).is_err());
    }
}
