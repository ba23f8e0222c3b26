//! Self-contained SVG plots: the sweep frontier and the chunk trace.

use std::fmt::Write as _;

use simulmt_core::{Chunk, SweepResult};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#555555", "#9467bd"];
const CHUNK_FILLS: [&str; 2] = ["#cfe2f3", "#fce5cd"];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Doc {
    body: String,
}

impl Doc {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">
<title>{}</title>
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
"#,
            escape(title)
        );
        Doc { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size:.1}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Linear map from data range to pixel range.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn axes(doc: &mut Doc, x: Scale, y: Scale, x_label: &str, y_label: &str) {
    let axis = r#"stroke="black" stroke-width="1""#;
    doc.line(x.px_lo, y.px_lo, x.px_hi, y.px_lo, axis);
    doc.line(x.px_lo, y.px_lo, x.px_lo, y.px_hi, axis);
    for t in ticks(x.lo, x.hi) {
        let px = x.map(t);
        doc.line(px, y.px_lo, px, y.px_lo + 5.0, axis);
        doc.text(px, y.px_lo + 18.0, 11.0, "middle", &tick_label(t));
    }
    for t in ticks(y.lo, y.hi) {
        let py = y.map(t);
        doc.line(x.px_lo - 5.0, py, x.px_lo, py, axis);
        doc.text(x.px_lo - 8.0, py + 4.0, 11.0, "end", &tick_label(t));
    }
    doc.text((x.px_lo + x.px_hi) / 2.0, y.px_lo + 38.0, 13.0, "middle", x_label);
    let (cx, cy) = (x.px_lo - 45.0, (y.px_lo + y.px_hi) / 2.0);
    let _ = writeln!(
        doc.body,
        r#"<text x="{cx:.2}" y="{cy:.2}" font-size="13.0" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
        escape(y_label)
    );
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Triangle,
    Star,
    Diamond,
    Circle,
    Square,
}

impl Marker {
    pub fn for_label(label: &str) -> Marker {
        match label {
            "worse" => Marker::Triangle,
            "diff" => Marker::Star,
            "entropy" => Marker::Diamond,
            "greedy" => Marker::Circle,
            _ => Marker::Square,
        }
    }

    fn draw(self, cx: f64, cy: f64, r: f64, color: &str) -> String {
        let style = format!(r#"fill="{color}" fill-opacity="0.8" stroke="{color}""#);
        let points = |pts: Vec<(f64, f64)>| {
            pts.iter()
                .map(|(x, y)| format!("{:.2},{:.2}", cx + x, cy + y))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            Marker::Triangle => format!(
                r#"<polygon points="{}" {style}/>"#,
                points(vec![(0.0, -r), (0.866 * r, 0.5 * r), (-0.866 * r, 0.5 * r)])
            ),
            Marker::Diamond => format!(
                r#"<polygon points="{}" {style}/>"#,
                points(vec![(0.0, -r), (r, 0.0), (0.0, r), (-r, 0.0)])
            ),
            Marker::Star => {
                let pts = (0..10)
                    .map(|k| {
                        let rad = if k % 2 == 0 { r * 1.2 } else { r * 0.5 };
                        let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
                        (rad * a.cos(), rad * a.sin())
                    })
                    .collect();
                format!(r#"<polygon points="{}" {style}/>"#, points(pts))
            }
            Marker::Circle => format!(r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" {style}/>"#),
            Marker::Square => format!(
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
                cx - r,
                cy - r,
                2.0 * r,
                2.0 * r
            ),
        }
    }
}

/// Points not dominated by another point with lower (or equal) delay and
/// higher (or equal) BLEU, sorted by delay.
fn frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in sorted {
        if out.last().is_none_or(|last| p.1 > last.1) {
            out.push(p);
        }
    }
    out
}

/// Scatter of (mean τ, BLEU) with one marker shape per criterion, the
/// consecutive baselines at τ = 1 and a dashed frontier per criterion.
pub fn frontier_svg(rows: &[SweepResult], title: &str) -> String {
    let mut doc = Doc::new(title);
    let min_tau = rows.iter().map(|r| r.mean_tau).fold(1.0, f64::min);
    let x_lo = ((min_tau * 10.0).floor() / 10.0 - 0.05).max(0.0);
    let (b_lo, b_hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.bleu), hi.max(r.bleu))
        });
    let pad = ((b_hi - b_lo) * 0.1).max(1.0);
    let x = Scale { lo: x_lo, hi: 1.05, px_lo: 90.0, px_hi: 640.0 };
    let y = Scale {
        lo: (b_lo - pad).max(0.0),
        hi: (b_hi + pad).min(100.0).max(b_lo + 1.0),
        px_lo: 520.0,
        px_hi: 60.0,
    };
    doc.text(WIDTH / 2.0, 32.0, 16.0, "middle", title);
    axes(&mut doc, x, y, "mean delay τ", "BLEU");

    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.label == *label)
            .map(|r| (r.mean_tau, r.bleu))
            .collect();
        let front = frontier(&pts);
        if front.len() > 1 {
            let path = front
                .iter()
                .map(|(t, b)| format!("{:.2},{:.2}", x.map(*t), y.map(*b)))
                .collect::<Vec<_>>()
                .join(" ");
            doc.raw(&format!(
                r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-dasharray="5,4"/>"#
            ));
        }
        let marker = Marker::for_label(label);
        for (t, b) in &pts {
            doc.raw(&marker.draw(x.map(*t), y.map(*b), 6.0, color));
        }
        // Legend.
        let ly = 80.0 + 24.0 * i as f64;
        doc.raw(&marker.draw(675.0, ly, 6.0, color));
        doc.text(690.0, ly + 4.0, 12.0, "start", label);
    }
    doc.finish()
}

/// Alternating-highlight source/target chunks above a step plot of `s′(t)`.
pub fn trace_svg(
    source: &[String],
    target: &[String],
    chunks: &[Chunk],
    s_prime: &[usize],
    title: &str,
) -> String {
    let mut doc = Doc::new(title);
    doc.text(WIDTH / 2.0, 28.0, 16.0, "middle", title);

    let rows = [("source", source, 70.0), ("target", target, 170.0)];
    for (name, toks, top) in rows {
        doc.text(20.0, top + 22.0, 12.0, "start", name);
        let cell = (680.0 / toks.len().max(1) as f64).min(60.0);
        let font = (cell * 0.3).clamp(6.0, 12.0);
        for (i, tok) in toks.iter().enumerate() {
            let left = 90.0 + cell * i as f64;
            let chunk = chunks.iter().position(|c| {
                let range = if name == "source" { &c.source } else { &c.target };
                range.contains(&i)
            });
            let fill = chunk.map_or("#eeeeee", |k| CHUNK_FILLS[k % 2]);
            doc.raw(&format!(
                r#"<rect x="{left:.2}" y="{top:.2}" width="{w:.2}" height="34" fill="{fill}" stroke="white"/>"#,
                w = cell
            ));
            doc.text(left + cell / 2.0, top + 21.0, font, "middle", tok);
        }
    }
    // Connect each chunk pair.
    let src_cell = (680.0 / source.len().max(1) as f64).min(60.0);
    let tgt_cell = (680.0 / target.len().max(1) as f64).min(60.0);
    for c in chunks {
        let sx = 90.0 + src_cell * (c.source.start + c.source.end) as f64 / 2.0;
        let tx = 90.0 + tgt_cell * (c.target.start + c.target.end) as f64 / 2.0;
        doc.line(sx, 104.0, tx, 170.0, r##"stroke="#888888" stroke-dasharray="2,3""##);
    }

    // Step plot of s′(t).
    let n_src = source.len().max(1) as f64;
    let n_tgt = s_prime.len().max(1) as f64;
    let x = Scale { lo: 0.0, hi: n_tgt, px_lo: 90.0, px_hi: 740.0 };
    let y = Scale { lo: 0.0, hi: n_src, px_lo: 540.0, px_hi: 260.0 };
    axes(&mut doc, x, y, "target position t", "s′(t)");
    if !s_prime.is_empty() {
        let mut pts = Vec::new();
        for (t, &sp) in s_prime.iter().enumerate() {
            pts.push(format!("{:.2},{:.2}", x.map(t as f64), y.map(sp as f64)));
            pts.push(format!("{:.2},{:.2}", x.map(t as f64 + 1.0), y.map(sp as f64)));
        }
        doc.raw(&format!(
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            PALETTE[0]
        ));
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(12.3, 97.0), vec![20.0, 40.0, 60.0, 80.0]);
    }

    #[test]
    fn labels_are_trimmed() {
        assert_eq!(tick_label(0.6000000000000001), "0.6");
        assert_eq!(tick_label(20.0), "20");
    }

    #[test]
    fn escaping() {
        assert_eq!(escape("<eos> & \"x\""), "&lt;eos&gt; &amp; &quot;x&quot;");
    }

    #[test]
    fn frontier_keeps_non_dominated_points() {
        let f = frontier(&[(0.5, 10.0), (0.6, 9.0), (0.7, 20.0), (0.7, 15.0), (0.9, 30.0)]);
        assert_eq!(f, vec![(0.5, 10.0), (0.7, 20.0), (0.9, 30.0)]);
    }
}
