//! Synthetic sensors: an orthographic top-down depth-like camera and a
//! per-finger taxel pressure image.

use super::contact::{chord, GraspContact, FINGER_HEIGHT, FINGER_THICKNESS, FINGER_WIDTH};
use super::WorldState;
use crate::domain::{Raster, ARENA_HALF_WIDTH, HEIGHT_SCALE, TACTILE_SIZE, VISION_SIZE};
use crate::geometry::{self, Vec2};

/// Width of one vision pixel, meters.
pub const PIXEL_PITCH: f64 = 2.0 * ARENA_HALF_WIDTH / VISION_SIZE as f64;
const SUPERSAMPLE: usize = 4;
const FINGER_INTENSITY: f32 = 1.0;
/// Pressure at which a taxel reads 1 - 1/e.
const PRESSURE_SCALE: f64 = 1.0e5;
/// Lateral subsamples per taxel column when measuring penetration.
const COLUMN_SAMPLES: usize = 5;

/// Rasterizes convex polygons (world coordinates) over the arena. Later
/// polygons are painted over earlier ones, weighted by pixel coverage.
pub fn rasterize(shapes: &[(Vec<Vec2>, f32)]) -> Raster {
    let mut out = Raster::zeros(VISION_SIZE, VISION_SIZE);
    let sub = PIXEL_PITCH / SUPERSAMPLE as f64;
    let to_col = |x: f64| (x + ARENA_HALF_WIDTH) / PIXEL_PITCH;
    let to_row = |y: f64| (ARENA_HALF_WIDTH - y) / PIXEL_PITCH;
    let clamp_idx = |v: f64| (v.max(0.0) as usize).min(VISION_SIZE - 1);
    for (poly, intensity) in shapes {
        if poly.len() < 3 {
            continue;
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in poly {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if x1 < -ARENA_HALF_WIDTH || x0 > ARENA_HALF_WIDTH || y1 < -ARENA_HALF_WIDTH || y0 > ARENA_HALF_WIDTH {
            continue;
        }
        for row in clamp_idx(to_row(y1).floor())..=clamp_idx(to_row(y0).floor()) {
            for col in clamp_idx(to_col(x0).floor())..=clamp_idx(to_col(x1).floor()) {
                let mut hits = 0;
                for i in 0..SUPERSAMPLE {
                    for j in 0..SUPERSAMPLE {
                        let x = -ARENA_HALF_WIDTH + col as f64 * PIXEL_PITCH + (j as f64 + 0.5) * sub;
                        let y = ARENA_HALF_WIDTH - row as f64 * PIXEL_PITCH - (i as f64 + 0.5) * sub;
                        if geometry::contains_convex(poly, Vec2::new(x, y)) {
                            hits += 1;
                        }
                    }
                }
                if hits > 0 {
                    let cover = hits as f32 / (SUPERSAMPLE * SUPERSAMPLE) as f32;
                    let old = out.get(row, col);
                    out.set(row, col, old * (1.0 - cover) + intensity * cover);
                }
            }
        }
    }
    out
}

/// Finger outlines in world coordinates at the current aperture.
fn finger_polygons(w: &WorldState) -> [Vec<Vec2>; 2] {
    let g = Vec2::new(w.gripper.x, w.gripper.y);
    let half = 0.5 * w.aperture;
    let t = 0.5 * FINGER_WIDTH;
    let rect = |s0: f64, s1: f64| -> Vec<Vec2> {
        [Vec2::new(s0, -t), Vec2::new(s1, -t), Vec2::new(s1, t), Vec2::new(s0, t)]
            .iter()
            .map(|&p| p.rotate(w.gripper.yaw) + g)
            .collect()
    };
    [rect(-half - FINGER_THICKNESS, -half), rect(half, half + FINGER_THICKNESS)]
}

/// Top-down 64x64 view: background 0, object shaded by its height, fingers
/// at full intensity.
pub fn render_vision(w: &WorldState) -> Raster {
    let shade = (0.2 + 0.6 * (w.object.height / HEIGHT_SCALE)).min(0.9) as f32;
    let [left, right] = finger_polygons(w);
    rasterize(&[(w.footprint_world(), shade), (left, FINGER_INTENSITY), (right, FINGER_INTENSITY)])
}

/// Gel penetration across one finger's taxel columns; column 0 is at the
/// finger's own left edge as seen from its face.
fn column_penetration(c: &GraspContact, left: bool) -> Vec<f64> {
    let band = geometry::clip_band(&c.footprint, 0.5 * FINGER_WIDTH);
    let (s_min, s_max) = band
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let dt = FINGER_WIDTH / TACTILE_SIZE as f64;
    let touch = if left { c.left.first_touch } else { c.right.first_touch };
    (0..TACTILE_SIZE)
        .map(|j| {
            let lo = -0.5 * FINGER_WIDTH + j as f64 * dt;
            let mut pen: f64 = 0.0;
            for k in 0..COLUMN_SAMPLES {
                let t = lo + (k as f64 + 0.5) * dt / COLUMN_SAMPLES as f64;
                let t = if left { t } else { -t };
                if let Some((a, b)) = chord(&c.footprint, t) {
                    let gap = if left { a - s_min } else { s_max - b };
                    pen = pen.max(c.indentation - gap);
                }
            }
            // The first-touch point is always indented, however narrow the patch.
            let t_touch = if left { touch } else { -touch };
            if t_touch >= lo && t_touch < lo + dt {
                pen = c.indentation;
            }
            pen.max(0.0)
        })
        .collect()
}

fn finger_taxels(w: &WorldState, c: &GraspContact, left: bool) -> Raster {
    let mut out = Raster::zeros(TACTILE_SIZE, TACTILE_SIZE);
    let pen = column_penetration(c, left);
    let dt = FINGER_WIDTH / TACTILE_SIZE as f64;
    let total: f64 = pen.iter().sum::<f64>() * dt * c.overlap;
    if total <= 0.0 {
        return out;
    }
    let force = w.commanded_force;
    let row_h = FINGER_HEIGHT / TACTILE_SIZE as f64;
    let raw: Vec<f64> = pen
        .iter()
        .map(|&p| 1.0 - (-(force * p / total) / PRESSURE_SCALE).exp())
        .collect();
    // Compliant objects spread the imprint laterally.
    let radius = (3.0 * w.object.compliance).round() as usize;
    let blurred: Vec<f64> = (0..TACTILE_SIZE)
        .map(|j| {
            let a = j.saturating_sub(radius);
            let b = (j + radius).min(TACTILE_SIZE - 1);
            raw[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    // Surface texture imprint; rougher (higher-friction) surfaces show more contrast.
    let texture = 0.5 * w.object.friction.min(1.0);
    for r in 0..TACTILE_SIZE {
        let cover = ((c.overlap - r as f64 * row_h) / row_h).clamp(0.0, 1.0);
        if cover == 0.0 {
            break;
        }
        for (j, &v) in blurred.iter().enumerate() {
            let tex = if (r + j) % 2 == 0 { 1.0 } else { 1.0 - texture };
            out.set(r, j, (v * cover * tex).clamp(0.0, 1.0) as f32);
        }
    }
    out
}

/// Background-subtracted taxel images for the left and right finger. Row 0
/// is at the fingertip; a finger out of contact reads exactly zero.
pub fn render_tactile(w: &WorldState) -> (Raster, Raster) {
    let zero = || Raster::zeros(TACTILE_SIZE, TACTILE_SIZE);
    match &w.contact {
        Some(c) if w.fingers_closed => {
            let left = if w.in_contact[0] { finger_taxels(w, c, true) } else { zero() };
            let right = if w.in_contact[1] { finger_taxels(w, c, false) } else { zero() };
            (left, right)
        }
        _ => (zero(), zero()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rectangle;

    #[test]
    fn empty_arena_is_black() {
        assert!(rasterize(&[]).is_zero());
    }

    #[test]
    fn translation_shifts_blob() {
        let sq = rectangle(0.03, 0.03);
        let shifted: Vec<Vec2> = sq.iter().map(|&p| p + Vec2::new(5.0 * PIXEL_PITCH, 0.0)).collect();
        let a = rasterize(&[(sq, 0.5)]).centroid().unwrap();
        let b = rasterize(&[(shifted, 0.5)]).centroid().unwrap();
        assert!((b.1 - a.1 - 5.0).abs() < 1e-6);
        assert!((b.0 - a.0).abs() < 1e-6);
    }
}
