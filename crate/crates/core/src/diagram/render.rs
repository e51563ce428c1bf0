use std::fmt::Write;

use super::{layout, palette_rgb, BBox, DiagramError, DiagramSchema, Layout, Shape};

/// Pixels per canvas unit.
pub const PX_PER_UNIT: f64 = 40.0;
const FONT_PX: f64 = 12.0;
const BADGE_PX: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedDiagram {
    pub svg: String,
    pub layout: Layout,
    /// Plotting code the diagram came from, when one was used.
    pub source: Option<String>,
}

/// Advance width of a glyph as a fraction of the font size. A fixed table
/// keeps output independent of installed fonts.
fn glyph_width(c: char) -> f64 {
    match c {
        'i' | 'j' | 'l' | '.' | ',' | ':' | ';' | '\'' | '!' | '|' => 0.28,
        'f' | 't' | 'r' | ' ' | '-' | '(' | ')' => 0.36,
        'm' | 'w' | 'M' | 'W' => 0.83,
        'A'..='Z' => 0.67,
        '0'..='9' => 0.56,
        _ => 0.55,
    }
}

pub fn text_width(text: &str, font_px: f64) -> f64 {
    text.chars().map(glyph_width).sum::<f64>() * font_px
}

fn escape(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            c => o.push(c),
        }
    }
    o
}

fn text_el(out: &mut String, x: f64, y: f64, size: f64, fill: &str, text: &str) {
    let _ = writeln!(
        out,
        "    <text x=\"{x:.3}\" y=\"{y:.3}\" font-family=\"monospace\" font-size=\"{size:.3}\" \
         text-anchor=\"middle\" textLength=\"{:.3}\" lengthAdjust=\"spacingAndGlyphs\" fill=\"{fill}\">{}</text>",
        text_width(text, size),
        escape(text)
    );
}

/// Render a schema to SVG. Output depends only on the schema: element order
/// follows the object order and every number is printed with three decimals.
pub fn render(schema: &DiagramSchema) -> Result<RenderedDiagram, DiagramError> {
    let layout = layout(schema)?;
    let (cw, ch) = schema.canvas;
    let width = cw * PX_PER_UNIT;
    let height = ch * PX_PER_UNIT;
    // Canvas units are y-up; SVG is y-down.
    let px = |b: &BBox| (b.x * PX_PER_UNIT, (ch - b.y - b.h) * PX_PER_UNIT, b.w * PX_PER_UNIT, b.h * PX_PER_UNIT);
    let mut svg = String::new();
    let _ = writeln!(svg, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.3}\" height=\"{height:.3}\" viewBox=\"0 0 {width:.3} {height:.3}\">"
    );
    let _ = writeln!(svg, "  <title>{}</title>", escape(&schema.title));
    let _ = writeln!(svg, "  <rect x=\"0.000\" y=\"0.000\" width=\"{width:.3}\" height=\"{height:.3}\" fill=\"#ffffff\"/>");
    let _ = writeln!(svg, "  <g id=\"objects\">");
    for (o, (_, b)) in schema.objects.iter().zip(&layout.boxes) {
        let fill = palette_rgb(&o.color).unwrap_or("#000000");
        let (x, y, w, h) = px(b);
        let _ = writeln!(svg, "   <g id=\"{}\">", escape(&o.id));
        let stroke = "stroke=\"#000000\" stroke-width=\"1.000\"";
        match o.shape {
            Shape::Square | Shape::Rectangle => {
                let _ = writeln!(
                    svg,
                    "    <rect x=\"{x:.3}\" y=\"{y:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"{fill}\" {stroke}/>"
                );
            }
            Shape::Circle => {
                let _ = writeln!(
                    svg,
                    "    <ellipse cx=\"{:.3}\" cy=\"{:.3}\" rx=\"{:.3}\" ry=\"{:.3}\" fill=\"{fill}\" {stroke}/>",
                    x + w / 2.0,
                    y + h / 2.0,
                    w / 2.0,
                    h / 2.0
                );
            }
            Shape::Line => {
                let _ = writeln!(
                    svg,
                    "    <line x1=\"{x:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{fill}\" stroke-width=\"2.000\"/>",
                    y + h / 2.0,
                    x + w,
                    y + h / 2.0
                );
            }
            Shape::Triangle => {
                let _ = writeln!(
                    svg,
                    "    <polygon points=\"{:.3},{y:.3} {:.3},{:.3} {x:.3},{:.3}\" fill=\"{fill}\" {stroke}/>",
                    x + w / 2.0,
                    x + w,
                    y + h,
                    y + h
                );
            }
            Shape::LabelOnly => {}
        }
        let cx = x + w / 2.0;
        let cy = y + h / 2.0;
        let label_fill = if o.shape == Shape::LabelOnly { fill } else { "#000000" };
        text_el(&mut svg, cx, cy + FONT_PX / 3.0, FONT_PX, label_fill, &o.label);
        if let Some(status) = &o.status {
            text_el(&mut svg, cx, cy + FONT_PX / 3.0 + BADGE_PX + 2.0, BADGE_PX, "#000000", status);
        }
        let _ = writeln!(svg, "   </g>");
    }
    let _ = writeln!(svg, "  </g>");
    let _ = writeln!(svg, "</svg>");
    Ok(RenderedDiagram {
        svg,
        layout,
        source: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schema_renders_an_empty_group() {
        let r = render(&DiagramSchema::empty("nothing")).unwrap();
        assert!(r.svg.contains("<g id=\"objects\">\n  </g>"));
        assert!(r.layout.boxes.is_empty());
    }

    #[test]
    fn text_is_escaped_and_measured_by_the_table() {
        assert!((text_width("ii", 10.0) - 5.6).abs() < 1e-9);
        assert_eq!(escape("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
    }
}
