use std::fmt::Write;

use nalgebra::Vector3;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Series {
    pub label: String,
    pub positions: Vec<Vector3<f64>>,
    pub dashed: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Top-down view (x to the right, z up) with a shared, equal-aspect scale.
pub fn render_svg(series: &[Series]) -> String {
    let points = series.iter().flat_map(|s| s.positions.iter());
    let (mut min_x, mut max_x, mut min_z, mut max_z) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_z = min_z.min(p.z);
        max_z = max_z.max(p.z);
    }
    if !min_x.is_finite() {
        (min_x, max_x, min_z, max_z) = (0.0, 1.0, 0.0, 1.0);
    }
    let span = (max_x - min_x).max(max_z - min_z).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let cx = 0.5 * (min_x + max_x);
    let cz = 0.5 * (min_z + max_z);
    let to_px = |p: &Vector3<f64>| {
        (
            SIZE / 2.0 + (p.x - cx) * scale,
            SIZE / 2.0 - (p.z - cz) * scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">x [m] (scale bar {:.1} m)</text>"#,
        SIZE / 2.0,
        SIZE - 15.0,
        span / 5.0
    );
    let bar = span / 5.0 * scale;
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="2"/>"#,
        SIZE - 30.0,
        MARGIN + bar,
        SIZE - 30.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = if s.dashed {
            "black"
        } else {
            COLORS[i % COLORS.len()]
        };
        let dash = if s.dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let pts: Vec<String> = s
            .positions
            .iter()
            .map(|p| {
                let (x, y) = to_px(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="20" y1="{ly}" x2="50" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="56" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Vec<Vector3<f64>> {
        (0..n).map(|i| Vector3::new(0.0, 0.0, i as f64)).collect()
    }

    #[test]
    fn one_polyline_with_every_frame() {
        let svg = render_svg(&[Series {
            label: "a".into(),
            positions: line(17),
            dashed: false,
        }]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(pts.split(' ').count(), 17);
    }

    #[test]
    fn ground_truth_is_dashed_and_output_is_stable() {
        let s = [
            Series {
                label: "est".into(),
                positions: line(5),
                dashed: false,
            },
            Series {
                label: "gt <1>".into(),
                positions: line(5),
                dashed: true,
            },
        ];
        let svg = render_svg(&s);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains("gt &lt;1&gt;"));
        assert_eq!(svg, render_svg(&s));
    }

    #[test]
    fn equal_aspect() {
        let pts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(10.0, 0.0, 0.0),
            Vector3::new(10.0, 0.0, 5.0),
        ];
        let svg = render_svg(&[Series {
            label: "a".into(),
            positions: pts,
            dashed: false,
        }]);
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let xy: Vec<(f64, f64)> = pts
            .split(' ')
            .map(|p| {
                let mut it = p.split(',').map(|v| v.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        let dx = xy[1].0 - xy[0].0;
        let dz = xy[1].1 - xy[2].1;
        assert!((dx / dz - 2.0).abs() < 1e-3);
    }
}
