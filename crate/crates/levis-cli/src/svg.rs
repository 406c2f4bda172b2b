//! Static SVG rendering of a ball union: axis-aligned squares for ℓ∞ balls,
//! diamonds for ℓ1, circles (ellipses under anisotropic scaling) for ℓ2.
//! Unions over more than two dimensions are drawn as a 2-D slice through two
//! chosen coordinates.

use levis_core::net::{InputBox, Norm};
use levis_core::search::BallUnion;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const PAD: f64 = 24.0;

struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn of(bbox: &InputBox, dims: (usize, usize)) -> Self {
        let (i, j) = dims;
        let wx = (bbox.upper()[i] - bbox.lower()[i]).max(1e-12);
        let wy = (bbox.upper()[j] - bbox.lower()[j]).max(1e-12);
        Frame {
            x0: bbox.lower()[i],
            y0: bbox.lower()[j],
            sx: (WIDTH - 2.0 * PAD) / wx,
            sy: (HEIGHT - 2.0 * PAD) / wy,
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) * self.sx
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - PAD - (y - self.y0) * self.sy
    }
}

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

/// Render the union over the box; `dims` selects the two plotted coordinates
/// (all others are implicitly fixed, matching how the slice was produced).
pub fn render_union(union: &BallUnion, bbox: &InputBox, dims: (usize, usize)) -> String {
    let f = Frame::of(bbox, dims);
    let (i, j) = dims;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        fmt(f.px(bbox.lower()[i])),
        fmt(f.py(bbox.upper()[j])),
        fmt((bbox.upper()[i] - bbox.lower()[i]) * f.sx),
        fmt((bbox.upper()[j] - bbox.lower()[j]) * f.sy),
    ));
    for ub in &union.balls {
        let (cx, cy) = (ub.ball.center[i], ub.ball.center[j]);
        let r = ub.ball.radius;
        let style = "fill=\"#e4572e\" fill-opacity=\"0.22\" stroke=\"#b23a13\" stroke-width=\"1\"";
        match ub.ball.norm {
            Norm::LInf => {
                out.push_str(&format!(
                    "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" {style}/>\n",
                    fmt(f.px(cx - r)),
                    fmt(f.py(cy + r)),
                    fmt(2.0 * r * f.sx),
                    fmt(2.0 * r * f.sy),
                ));
            }
            Norm::L1 => {
                out.push_str(&format!(
                    "  <polygon points=\"{},{} {},{} {},{} {},{}\" {style}/>\n",
                    fmt(f.px(cx + r)),
                    fmt(f.py(cy)),
                    fmt(f.px(cx)),
                    fmt(f.py(cy + r)),
                    fmt(f.px(cx - r)),
                    fmt(f.py(cy)),
                    fmt(f.px(cx)),
                    fmt(f.py(cy - r)),
                ));
            }
            Norm::L2 => {
                out.push_str(&format!(
                    "  <ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" {style}/>\n",
                    fmt(f.px(cx)),
                    fmt(f.py(cy)),
                    fmt(r * f.sx),
                    fmt(r * f.sy),
                ));
            }
        }
        out.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#13315c\"/>\n",
            fmt(f.px(cx)),
            fmt(f.py(cy)),
        ));
        if let Some(w) = &ub.ball.witness {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"2.2\" fill=\"none\" stroke=\"#8c1c13\" stroke-width=\"1.2\"/>\n",
                fmt(f.px(w[i])),
                fmt(f.py(w[j])),
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use levis_core::net::Ball;
    use levis_core::search::UnionBall;
    use ndarray::array;

    fn one_ball_union(norm: Norm) -> BallUnion {
        BallUnion {
            balls: vec![UnionBall {
                ball: Ball::new(array![1.0, 2.0], 0.5, norm, Some(array![1.5, 2.0])).unwrap(),
                parent: None,
                theta_deg: 90.0,
                delta: vec![0.0, 0.0],
                seed: 0,
            }],
        }
    }

    #[test]
    fn shape_primitive_matches_the_norm() {
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let svg = render_union(&one_ball_union(Norm::LInf), &bbox, (0, 1));
        assert!(svg.matches("<rect").count() == 2, "box outline + square");
        assert!(!svg.contains("<polygon") && !svg.contains("<ellipse"));

        let svg = render_union(&one_ball_union(Norm::L1), &bbox, (0, 1));
        assert!(svg.contains("<polygon"));

        let svg = render_union(&one_ball_union(Norm::L2), &bbox, (0, 1));
        assert!(svg.contains("<ellipse"));
        // Square box: circle radii match in both axes.
        assert!(svg.contains("rx=\"74.000\"") && svg.contains("ry=\"74.000\""));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let svg = render_union(&one_ball_union(Norm::L2), &bbox, (0, 1));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
