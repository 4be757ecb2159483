//! Object specifications and the built-in parametric object libraries.

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A convex prism standing on the floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    /// Footprint in the object frame, meters, counterclockwise.
    pub vertices: Vec<[f64; 2]>,
    pub height: f64,
    /// Kilograms.
    pub mass: f64,
    /// Center of mass in the object frame; `com[2]` is height above the floor.
    pub com: [f64; 3],
    /// Coulomb coefficient between the object and the finger pads.
    pub friction: f64,
    /// 0 is rigid, 1 is very soft.
    pub compliance: f64,
}

impl ObjectSpec {
    pub fn footprint(&self) -> Vec<Vec2> {
        self.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect()
    }

    pub fn com_xy(&self) -> Vec2 {
        Vec2::new(self.com[0], self.com[1])
    }

    /// Largest vertex distance from the object-frame origin.
    pub fn reach(&self) -> f64 {
        self.footprint().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidObject {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        let fp = self.footprint();
        if fp.len() < 3 {
            return bad("footprint needs at least 3 vertices");
        }
        if fp.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return bad("non-finite vertex");
        }
        if !geometry::is_convex_ccw(&fp) {
            return bad("footprint must be convex, counterclockwise, with positive area");
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return bad("height must be positive");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return bad("friction must be positive");
        }
        if !(0.0..=1.0).contains(&self.compliance) {
            return bad("compliance must lie in [0, 1]");
        }
        if !(0.0..=self.height).contains(&self.com[2]) {
            return bad("com height outside the prism");
        }
        if !geometry::contains_convex(&fp, self.com_xy()) {
            return bad("com outside the footprint");
        }
        Ok(())
    }
}

/// Which built-in library to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSet {
    Train,
    Easy,
    Hard,
}

impl ObjectSet {
    pub fn parse(s: &str) -> Option<ObjectSet> {
        match s {
            "train" => Some(ObjectSet::Train),
            "easy" => Some(ObjectSet::Easy),
            "hard" => Some(ObjectSet::Hard),
            _ => None,
        }
    }

    pub fn objects(self) -> Vec<ObjectSpec> {
        match self {
            ObjectSet::Train => training_objects(),
            ObjectSet::Easy => easy_objects(),
            ObjectSet::Hard => hard_objects(),
        }
    }
}

pub fn load_library(path: &Path) -> Result<Vec<ObjectSpec>> {
    let text = std::fs::read_to_string(path)?;
    let specs: Vec<ObjectSpec> = serde_json::from_str(&text)?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

pub fn save_library(path: &Path, specs: &[ObjectSpec]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(specs)?)?;
    Ok(())
}

/// Resolves a built-in set name or a library file path.
pub fn resolve_objects(name_or_path: &str) -> Result<Vec<ObjectSpec>> {
    match ObjectSet::parse(name_or_path) {
        Some(set) => Ok(set.objects()),
        None => load_library(Path::new(name_or_path)),
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Box { aspect: (f64, f64) },
    Regular(usize),
    Triangle { skew: (f64, f64) },
    Irregular(usize),
}

struct Family {
    shape: Shape,
    size: (f64, f64),
    height: (f64, f64),
    mass: (f64, f64),
    friction: (f64, f64),
    compliance: (f64, f64),
    com_offset: f64,
}

fn build(prefix: &str, index: usize, f: &Family, r: &mut impl Rng) -> ObjectSpec {
    let size = r.gen_range(f.size.0..=f.size.1);
    let (raw, label) = match f.shape {
        Shape::Box { aspect } => {
            let a = r.gen_range(aspect.0..=aspect.1);
            let w = 2.0 * size / (1.0 + a * a).sqrt();
            (geometry::rectangle(w * a, w), "box".to_string())
        }
        Shape::Regular(n) => (
            geometry::regular_polygon(n, size, r.gen_range(0.0..std::f64::consts::TAU)),
            format!("{n}gon"),
        ),
        Shape::Triangle { skew } => {
            // Apex angle varies; base vertices fixed on a circle.
            let s = r.gen_range(skew.0..=skew.1);
            let pts = vec![
                Vec2::new(size, 0.0),
                Vec2::new(-size * 0.5, size * s),
                Vec2::new(-size * 0.5, -size * 0.866),
            ];
            (geometry::convex_hull(&pts), "tri".to_string())
        }
        Shape::Irregular(n) => {
            let mut hull = Vec::new();
            while hull.len() < 4 {
                let pts: Vec<Vec2> = (0..n)
                    .map(|_| {
                        let a = r.gen_range(0.0..std::f64::consts::TAU);
                        let rad = size * r.gen_range(0.55..=1.0);
                        Vec2::new(rad * a.cos(), rad * a.sin() * r.gen_range(0.7..=1.0))
                    })
                    .collect();
                hull = geometry::convex_hull(&pts);
            }
            (hull, "hull".to_string())
        }
    };
    // Re-center on the area centroid so the pose origin is the footprint centroid.
    let c = geometry::centroid(&raw);
    let fp: Vec<Vec2> = raw.iter().map(|&p| p - c).collect();
    let height = r.gen_range(f.height.0..=f.height.1);
    let mass = r.gen_range(f.mass.0..=f.mass.1);
    let friction = r.gen_range(f.friction.0..=f.friction.1);
    let compliance = r.gen_range(f.compliance.0..=f.compliance.1);
    let com = if f.com_offset > 0.0 {
        // Shrink toward the centroid until the offset point is safely inside.
        let a = r.gen_range(0.0..std::f64::consts::TAU);
        let mut off = Vec2::new(a.cos(), a.sin()) * (f.com_offset * size * r.gen_range(0.3..=1.0));
        while !geometry::contains_convex(&fp, off * 1.2) {
            off = off * 0.5;
        }
        off
    } else {
        Vec2::ZERO
    };
    let com_z = height * r.gen_range(0.3..=0.6);
    ObjectSpec {
        name: format!("{prefix}-{index:02}-{label}"),
        vertices: fp.iter().map(|p| [p.x, p.y]).collect(),
        height,
        mass,
        com: [com.x, com.y, com_z],
        friction,
        compliance,
    }
}

fn generate(prefix: &str, families: &[Family], counts: &[usize], seed: u64) -> Vec<ObjectSpec> {
    let mut r = rng::child_rng(seed, rng::stream::LIBRARY, 0);
    let mut out = Vec::new();
    for (f, &n) in families.iter().zip(counts) {
        for _ in 0..n {
            let idx = out.len();
            out.push(build(prefix, idx, f, &mut r));
        }
    }
    out
}

const LIBRARY_SEED: u64 = 20_180_517;

/// Forty-eight training objects: boxes, regular polygons, triangles and
/// irregular hulls spanning 10-400 g and friction 0.2-0.8.
pub fn training_objects() -> Vec<ObjectSpec> {
    let base = |shape, size: (f64, f64), com_offset| Family {
        shape,
        size,
        height: (0.03, 0.12),
        mass: (0.01, 0.40),
        friction: (0.2, 0.8),
        compliance: (0.0, 0.6),
        com_offset,
    };
    let families = [
        base(Shape::Box { aspect: (1.0, 1.5) }, (0.022, 0.036), 0.0),
        base(Shape::Regular(6), (0.020, 0.034), 0.0),
        base(Shape::Regular(5), (0.020, 0.034), 0.0),
        base(Shape::Regular(8), (0.020, 0.034), 0.0),
        base(Shape::Triangle { skew: (0.7, 1.0) }, (0.022, 0.034), 0.15),
        base(Shape::Irregular(7), (0.022, 0.036), 0.2),
    ];
    generate("train", &families, &[12, 6, 6, 6, 6, 12], LIBRARY_SEED)
}

/// Held-out "easy" objects: regular shapes, grippy, light to medium weight.
pub fn easy_objects() -> Vec<ObjectSpec> {
    let base = |shape, size: (f64, f64)| Family {
        shape,
        size,
        height: (0.04, 0.11),
        mass: (0.03, 0.20),
        friction: (0.5, 0.8),
        compliance: (0.0, 0.3),
        com_offset: 0.0,
    };
    let families = [
        base(Shape::Box { aspect: (1.55, 1.8) }, (0.028, 0.036)),
        base(Shape::Regular(7), (0.024, 0.032)),
        base(Shape::Regular(10), (0.024, 0.032)),
        base(Shape::Regular(4), (0.022, 0.030)),
    ];
    generate("easy", &families, &[2, 2, 2, 2], LIBRARY_SEED + 1)
}

/// Held-out "hard" objects: irregular or triangular, slippery, heavy,
/// compliant, with off-center mass.
pub fn hard_objects() -> Vec<ObjectSpec> {
    let base = |shape, size: (f64, f64)| Family {
        shape,
        size,
        height: (0.04, 0.11),
        mass: (0.22, 0.38),
        friction: (0.2, 0.3),
        compliance: (0.3, 0.6),
        com_offset: 0.3,
    };
    let families = [
        base(Shape::Irregular(6), (0.024, 0.034)),
        base(Shape::Triangle { skew: (0.5, 0.7) }, (0.024, 0.032)),
        base(Shape::Irregular(9), (0.024, 0.034)),
    ];
    generate("hard", &families, &[3, 2, 3], LIBRARY_SEED + 2)
}
