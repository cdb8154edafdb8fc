//! Deterministic SVG rendering of a world and an executed trajectory.
//!
//! Trajectory segments are colored by linear speed on a blue (0) to red
//! (v_max) gradient. 3-D worlds render as a top-down projection with a
//! warning annotation.

use std::fs;
use std::path::Path;

use bow_core::world::{Obstacle, World};

use crate::error::BenchError;

pub struct PlotSample {
    pub position: Vec<f64>,
    pub speed: f64,
}

const SCALE: f64 = 40.0; // px per meter
const PAD: f64 = 0.5; // meters

fn speed_color(speed: f64, v_max: f64) -> String {
    let t = if v_max > 0.0 { (speed / v_max).clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

pub fn emit_plot(
    world: &World<f64>,
    samples: &[PlotSample],
    v_max: f64,
    path: &Path,
) -> Result<(), BenchError> {
    let min = &world.bounds.min;
    let max = &world.bounds.max;
    let width = (max[0] - min[0] + 2.0 * PAD) * SCALE;
    let height = (max[1] - min[1] + 2.0 * PAD) * SCALE;
    // SVG y grows downward; flip the world's y.
    let tx = |x: f64| (x - min[0] + PAD) * SCALE;
    let ty = |y: f64| (max[1] - y + PAD) * SCALE;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.3} {height:.3}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n",
        tx(min[0]),
        ty(max[1]),
        (max[0] - min[0]) * SCALE,
        (max[1] - min[1]) * SCALE
    ));

    let projected = world.dimension == 3;
    for obstacle in &world.obstacles {
        match obstacle {
            Obstacle::Circle { center, radius } => {
                svg.push_str(&format!(
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"#222222\"/>\n",
                    tx(center[0]),
                    ty(center[1]),
                    radius * SCALE
                ));
            }
            Obstacle::Sphere { center, radius } => {
                svg.push_str(&format!(
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"#222222\" fill-opacity=\"0.6\"/>\n",
                    tx(center[0]),
                    ty(center[1]),
                    radius * SCALE
                ));
            }
            Obstacle::Box { min: bmin, max: bmax } => {
                svg.push_str(&format!(
                    "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#222222\"/>\n",
                    tx(bmin[0]),
                    ty(bmax[1]),
                    (bmax[0] - bmin[0]) * SCALE,
                    (bmax[1] - bmin[1]) * SCALE
                ));
            }
            Obstacle::Polygon { vertices } => {
                let points: Vec<String> = vertices
                    .iter()
                    .map(|v| format!("{:.3},{:.3}", tx(v[0]), ty(v[1])))
                    .collect();
                svg.push_str(&format!(
                    "<polygon points=\"{}\" fill=\"#2e7d32\"/>\n",
                    points.join(" ")
                ));
            }
        }
    }

    if let Some(start) = &world.start {
        svg.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"6\" fill=\"none\" stroke=\"#00aa00\" stroke-width=\"2\"/>\n",
            tx(start[0]),
            ty(start[1])
        ));
    }
    if let Some(goal) = &world.goal {
        svg.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"6\" fill=\"none\" stroke=\"#cc0000\" stroke-width=\"2\"/>\n",
            tx(goal[0]),
            ty(goal[1])
        ));
    }

    if samples.len() == 1 {
        let p = &samples[0];
        svg.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"{}\"/>\n",
            tx(p.position[0]),
            ty(p.position[1]),
            speed_color(p.speed, v_max)
        ));
    } else {
        for pair in samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let color = speed_color(0.5 * (a.speed + b.speed), v_max);
            svg.push_str(&format!(
                "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{color}\" stroke-width=\"3\" stroke-linecap=\"round\"/>\n",
                tx(a.position[0]),
                ty(a.position[1]),
                tx(b.position[0]),
                ty(b.position[1])
            ));
        }
    }

    if projected {
        svg.push_str(&format!(
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"monospace\" font-size=\"14\" fill=\"#cc0000\">top-down projection of a 3-D world</text>\n",
            8.0, 18.0
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}
