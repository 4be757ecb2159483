//! Planar geometry for convex footprints: clipping, enclosing circles, hulls.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rigid planar transform: rotate by `yaw`, then translate by `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Placement {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.yaw) + Vec2::new(self.x, self.y)
    }

    pub fn apply_all(&self, pts: &[Vec2]) -> Vec<Vec2> {
        pts.iter().map(|&p| self.apply(p)).collect()
    }
}

/// Signed area, positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..n {
        a += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * a
}

/// Area centroid of a simple polygon. Falls back to the vertex mean for
/// degenerate input.
pub fn centroid(poly: &[Vec2]) -> Vec2 {
    let area = signed_area(poly);
    let n = poly.len();
    if area.abs() < 1e-18 {
        let sum = poly.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
        return sum * (1.0 / n.max(1) as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Vec2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// True when `poly` is a strictly convex counterclockwise polygon.
pub fn is_convex_ccw(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly) <= 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        (b - a).cross(c - b) > 0.0
    })
}

/// Monotone-chain convex hull, counterclockwise, collinear points dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - b) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Point-in-convex-polygon test (boundary counts as inside).
pub fn contains_convex(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b - a).cross(p - a) >= -1e-15
    })
}

/// Sutherland-Hodgman clip of a convex polygon against the half-plane
/// `dot(n, p) <= c`.
pub fn clip_half_plane(poly: &[Vec2], n: Vec2, c: f64) -> Vec<Vec2> {
    let len = poly.len();
    let mut out = Vec::with_capacity(len + 2);
    for i in 0..len {
        let p = poly[i];
        let q = poly[(i + 1) % len];
        let dp = n.dot(p) - c;
        let dq = n.dot(q) - c;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Intersection of a convex polygon with the horizontal band `|y| <= half_width`.
pub fn clip_band(poly: &[Vec2], half_width: f64) -> Vec<Vec2> {
    let upper = clip_half_plane(poly, Vec2::new(0.0, 1.0), half_width);
    if upper.len() < 3 {
        return Vec::new();
    }
    let both = clip_half_plane(&upper, Vec2::new(0.0, -1.0), half_width);
    if both.len() < 3 || signed_area(&both).abs() < 1e-14 {
        return Vec::new();
    }
    both
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: Vec2) -> bool {
        p.dist(self.center) <= self.radius * (1.0 + 1e-12) + 1e-15
    }

    pub fn from_two(a: Vec2, b: Vec2) -> Circle {
        let center = (a + b) * 0.5;
        Circle {
            center,
            radius: a.dist(b) * 0.5,
        }
    }

    /// Circumcircle; `None` for (near-)collinear points.
    pub fn circumscribe(a: Vec2, b: Vec2, c: Vec2) -> Option<Circle> {
        let bx = b - a;
        let cx = c - a;
        let d = 2.0 * bx.cross(cx);
        if d.abs() < 1e-18 {
            return None;
        }
        let b2 = bx.dot(bx);
        let c2 = cx.dot(cx);
        let ux = (cx.y * b2 - bx.y * c2) / d;
        let uy = (bx.x * c2 - cx.x * b2) / d;
        let center = a + Vec2::new(ux, uy);
        Some(Circle {
            center,
            radius: center.dist(a).max(center.dist(b)).max(center.dist(c)),
        })
    }
}

/// Smallest circle enclosing all points (Welzl, iterative form).
///
/// Points are visited in input order; footprints have a handful of
/// vertices, so the expected-linear shuffle is unnecessary and skipping it
/// keeps the result independent of any RNG.
pub fn min_enclosing_circle(points: &[Vec2]) -> Circle {
    assert!(!points.is_empty(), "enclosing circle of an empty point set");
    let mut c = Circle {
        center: points[0],
        radius: 0.0,
    };
    for i in 1..points.len() {
        if c.contains(points[i]) {
            continue;
        }
        c = Circle {
            center: points[i],
            radius: 0.0,
        };
        for j in 0..i {
            if c.contains(points[j]) {
                continue;
            }
            c = Circle::from_two(points[i], points[j]);
            for k in 0..j {
                if c.contains(points[k]) {
                    continue;
                }
                c = Circle::circumscribe(points[i], points[j], points[k])
                    .unwrap_or_else(|| widest_pair(&[points[i], points[j], points[k]]));
            }
        }
    }
    c
}

fn widest_pair(pts: &[Vec2]) -> Circle {
    let mut best = Circle::from_two(pts[0], pts[0]);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let c = Circle::from_two(pts[i], pts[j]);
            if c.radius > best.radius {
                best = c;
            }
        }
    }
    best
}

/// Regular polygon with `n` vertices on a circle of `radius`, first vertex at `phase`.
pub fn regular_polygon(n: usize, radius: f64, phase: f64) -> Vec<Vec2> {
    (0..n)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

pub fn rectangle(width: f64, depth: f64) -> Vec<Vec2> {
    let (hx, hy) = (width * 0.5, depth * 0.5);
    vec![
        Vec2::new(-hx, -hy),
        Vec2::new(hx, -hy),
        Vec2::new(hx, hy),
        Vec2::new(-hx, hy),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force over all pairs and triples: the smallest candidate
    /// circle that contains every point.
    fn brute_force_circle(pts: &[Vec2]) -> Circle {
        let mut best: Option<Circle> = None;
        let mut consider = |c: Circle| {
            if pts.iter().all(|&p| c.contains(p)) && best.map_or(true, |b| c.radius < b.radius) {
                best = Some(c);
            }
        };
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                consider(Circle::from_two(pts[i], pts[j]));
                for k in j + 1..pts.len() {
                    if let Some(c) = Circle::circumscribe(pts[i], pts[j], pts[k]) {
                        consider(c);
                    }
                }
            }
        }
        best.expect("at least two points")
    }

    #[test]
    fn square_circle_is_circumcircle() {
        let sq = rectangle(1.0, 1.0);
        let c = min_enclosing_circle(&sq);
        assert!(c.center.norm() < 1e-12);
        assert!((c.radius - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);

        let sq = rectangle(0.04, 0.04);
        let c = min_enclosing_circle(&sq);
        assert!((c.radius - 0.04 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn triangle_matches_brute_force() {
        let tri = regular_polygon(3, 0.03, 0.3);
        let c = min_enclosing_circle(&tri);
        let b = brute_force_circle(&tri);
        assert!((c.radius - 0.03).abs() < 1e-12);
        assert!(c.center.dist(b.center) < 1e-12);
        assert!((c.radius - b.radius).abs() < 1e-12);
    }

    #[test]
    fn obtuse_triangle_uses_longest_side() {
        let tri = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.1)];
        let c = min_enclosing_circle(&tri);
        assert!((c.radius - 0.5).abs() < 1e-12);
        assert!(c.center.dist(Vec2::new(0.5, 0.0)) < 1e-12);
    }

    #[test]
    fn clip_band_of_square() {
        let sq = rectangle(0.1, 0.1);
        let clipped = clip_band(&sq, 0.01);
        assert!((signed_area(&clipped) - 0.1 * 0.02).abs() < 1e-15);
        assert!(clip_band(&sq.iter().map(|&p| p + Vec2::new(0.0, 0.2)).collect::<Vec<_>>(), 0.01).is_empty());
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(0.5, 0.0),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(is_convex_ccw(&h));
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec2>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..12)
            .prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn welzl_agrees_with_brute_force(pts in arb_points()) {
            let c = min_enclosing_circle(&pts);
            let b = brute_force_circle(&pts);
            prop_assert!(pts.iter().all(|&p| c.contains(p)));
            prop_assert!((c.radius - b.radius).abs() < 1e-9);
        }

        #[test]
        fn enclosing_circle_translates(pts in arb_points(), tx in -1.0f64..1.0, ty in -1.0f64..1.0) {
            let c = min_enclosing_circle(&pts);
            let moved: Vec<Vec2> = pts.iter().map(|&p| p + Vec2::new(tx, ty)).collect();
            let m = min_enclosing_circle(&moved);
            prop_assert!((m.radius - c.radius).abs() < 1e-9);
            prop_assert!(m.center.dist(c.center + Vec2::new(tx, ty)) < 1e-9);
        }
    }
}
