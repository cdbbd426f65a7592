use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, SymMatrix};
use crate::manifold::{Element, Point};

const CELL: f64 = 24.0;
const GAP: f64 = 16.0;
const FACTORS_PER_ROW: usize = 5;

/// Glyph grid options. `layout` is `(rows, cols)` of the components inside one factor;
/// `scale` maps `sqrt(eigenvalue)` to pixels. Both default to automatic choices.
#[derive(Debug, Clone, Default)]
pub struct GlyphOptions {
    pub layout: Option<(usize, usize)>,
    pub scale: Option<f64>,
    /// Embedded as an XML comment.
    pub comment: String,
}

/// Fractional anisotropy `sqrt(3/2) ||lambda - mean|| / ||lambda||`.
pub fn fractional_anisotropy(lambda: &[f64]) -> f64 {
    let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    let dev: f64 = lambda.iter().map(|l| (l - mean).powi(2)).sum();
    let norm: f64 = lambda.iter().map(|l| l * l).sum();
    if norm == 0.0 {
        return 0.0;
    }
    ((1.5 * dev / norm).sqrt()).clamp(0.0, 1.0)
}

/// Blue (0) to red (1) ramp.
pub fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

/// Semi-axes (unscaled square roots of the eigenvalues, major first) and rotation in
/// degrees of the leading 2x2 block.
pub fn ellipse_of(s: &SymMatrix) -> (f64, f64, f64) {
    let (a, b, c) = (s.get(0, 0), s.get(0, 1), s.get(1, 1));
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = (mean + rad).max(0.0);
    let l2 = (mean - rad).max(0.0);
    let angle = 0.5 * (2.0 * b).atan2(a - c);
    (l1.sqrt(), l2.sqrt(), angle.to_degrees())
}

/// Fixed-precision number with negative zero folded into zero.
fn num(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.3}")
}

fn components(p: &Point) -> Result<Vec<&SymMatrix>> {
    p.parts()
        .iter()
        .map(|e| match e {
            Element::Sym(s) if s.order() >= 2 => Ok(s),
            _ => Err(Error::InvalidLayout("glyphs need SPD components of order at least 2".into())),
        })
        .collect()
}

fn resolve_layout(m: usize, layout: Option<(usize, usize)>) -> Result<(usize, usize)> {
    match layout {
        Some((r, c)) if r * c >= m && r > 0 && c > 0 => Ok((r, c)),
        Some((r, c)) => Err(Error::InvalidLayout(format!("{r}x{c} grid cannot hold {m} glyphs"))),
        None => {
            let side = (m as f64).sqrt().round() as usize;
            if side * side == m {
                Ok((side, side))
            } else {
                Err(Error::InvalidLayout(format!("{m} components is not a perfect square; pass a layout")))
            }
        }
    }
}

/// Renders each point as a grid of ellipse glyphs, one `<g>` per point.
pub fn render_glyphs(points: &[Point], opts: &GlyphOptions) -> Result<String> {
    let comps: Vec<Vec<&SymMatrix>> = points.iter().map(components).collect::<Result<_>>()?;
    let m = comps.first().map_or(1, |c| c.len());
    if comps.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidLayout("points have differing component counts".into()));
    }
    let (rows, cols) = resolve_layout(m, opts.layout)?;
    let scale = match opts.scale {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidInput(format!("glyph scale must be positive, got {s}"))),
        None => {
            let largest = comps.iter().flatten().map(|s| ellipse_of(s).0).fold(0.0, f64::max);
            if largest > 0.0 {
                0.45 * CELL / largest
            } else {
                1.0
            }
        }
    };

    let panel_w = cols as f64 * CELL;
    let panel_h = rows as f64 * CELL;
    let per_row = FACTORS_PER_ROW.min(points.len().max(1));
    let panel_rows = points.len().div_ceil(per_row).max(1);
    let width = GAP + per_row as f64 * (panel_w + GAP);
    let height = GAP + panel_rows as f64 * (panel_h + GAP);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let comment = opts.comment.replace("--", "- -");
    let _ = writeln!(out, "<!-- {comment} -->");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    for (k, glyphs) in comps.iter().enumerate() {
        let ox = GAP + (k % per_row) as f64 * (panel_w + GAP);
        let oy = GAP + (k / per_row) as f64 * (panel_h + GAP);
        let _ = writeln!(out, r#"  <g id="factor-{k}" transform="translate({},{})">"#, num(ox), num(oy));
        let _ = writeln!(
            out,
            r##"    <rect x="0" y="0" width="{}" height="{}" fill="none" stroke="#999999" stroke-width="0.5"/>"##,
            num(panel_w),
            num(panel_h)
        );
        for (c, s) in glyphs.iter().enumerate() {
            let cx = (c % cols) as f64 * CELL + 0.5 * CELL;
            let cy = (c / cols) as f64 * CELL + 0.5 * CELL;
            let (a, b, angle) = ellipse_of(s);
            let fa = fractional_anisotropy(eig_sym(s)?.values.as_slice().expect("contiguous"));
            let _ = writeln!(
                out,
                r#"    <ellipse cx="{}" cy="{}" rx="{}" ry="{}" transform="rotate({} {} {})" fill="{}"/>"#,
                num(cx),
                num(cy),
                num(a * scale),
                num(b * scale),
                num(angle),
                num(cx),
                num(cy),
                ramp_color(fa)
            );
        }
        let _ = writeln!(out, "  </g>");
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}
