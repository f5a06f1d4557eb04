//! Labeled synthetic indoor scenes whose class boundaries follow the geometry.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud_io::PointCloud;
use crate::Vec3;

pub const CLASS_NAMES: [&str; 6] = ["floor", "ceiling", "wall", "box", "pillar", "ball"];
pub const FLOOR: i32 = 0;
pub const CEILING: i32 = 1;
pub const WALL: i32 = 2;
pub const BOX: i32 = 3;
pub const PILLAR: i32 = 4;
pub const BALL: i32 = 5;

const BASE_COLORS: [Vec3; 6] = [
    [0.55, 0.45, 0.35],
    [0.9, 0.9, 0.85],
    [0.75, 0.75, 0.7],
    [0.6, 0.3, 0.2],
    [0.4, 0.45, 0.6],
    [0.2, 0.6, 0.3],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub points: usize,
    /// Room extent along x, y, z in meters.
    pub room: Vec3,
    pub boxes: usize,
    pub pillars: usize,
    pub balls: usize,
    /// Standard deviation of the positional noise in meters.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig { points: 100_000, room: [10.0, 8.0, 3.0], boxes: 8, pillars: 3, balls: 5, noise: 0.003, seed: 0 }
    }
}

impl SceneConfig {
    pub fn with_points(points: usize, seed: u64) -> Self {
        SceneConfig { points, seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// Axis-aligned rectangle: origin, two edge vectors.
    Rect { origin: Vec3, u: Vec3, v: Vec3 },
    /// Lateral surface of a vertical cylinder.
    Cylinder { base: Vec3, radius: f64, height: f64 },
    Sphere { center: Vec3, radius: f64 },
}

impl Shape {
    fn area(&self) -> f64 {
        match *self {
            Shape::Rect { u, v, .. } => crate::util::norm(&u) * crate::util::norm(&v),
            Shape::Cylinder { radius, height, .. } => 2.0 * std::f64::consts::PI * radius * height,
            Shape::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match *self {
            Shape::Rect { origin, u, v } => {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                [0, 1, 2].map(|d| origin[d] + a * u[d] + b * v[d])
            }
            Shape::Cylinder { base, radius, height } => {
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                [base[0] + radius * t.cos(), base[1] + radius * t.sin(), base[2] + rng.gen_range(0.0..height)]
            }
            Shape::Sphere { center, radius } => {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - z * z).sqrt();
                [center[0] + radius * r * t.cos(), center[1] + radius * r * t.sin(), center[2] + radius * z]
            }
        }
    }
}

struct Part {
    shape: Shape,
    label: i32,
    color: Vec3,
}

/// Five visible faces of a box standing on the floor.
fn box_faces(min: Vec3, size: Vec3) -> Vec<Shape> {
    let [x, y, z] = min;
    let [a, b, c] = size;
    vec![
        Shape::Rect { origin: [x, y, z + c], u: [a, 0.0, 0.0], v: [0.0, b, 0.0] },
        Shape::Rect { origin: [x, y, z], u: [a, 0.0, 0.0], v: [0.0, 0.0, c] },
        Shape::Rect { origin: [x, y + b, z], u: [a, 0.0, 0.0], v: [0.0, 0.0, c] },
        Shape::Rect { origin: [x, y, z], u: [0.0, b, 0.0], v: [0.0, 0.0, c] },
        Shape::Rect { origin: [x + a, y, z], u: [0.0, b, 0.0], v: [0.0, 0.0, c] },
    ]
}

fn jitter(base: Vec3, rng: &mut ChaCha8Rng, amount: f64) -> Vec3 {
    base.map(|c| (c + rng.gen_range(-amount..amount)).clamp(0.0, 1.0))
}

/// Room with floor, ceiling, walls, boxes, pillars and balls, sampled
/// uniformly by area. Labels are the primitive classes in [`CLASS_NAMES`]
/// and colors are per-class with per-object and per-point variation.
pub fn room_scene(config: &SceneConfig) -> PointCloud {
    let mut rng = crate::util::rng(config.seed);
    let [w, d, h] = config.room;
    let mut parts = Vec::new();
    let add = |parts: &mut Vec<Part>, shape: Shape, label: i32, rng: &mut ChaCha8Rng| {
        let color = jitter(BASE_COLORS[label as usize], rng, 0.05);
        parts.push(Part { shape, label, color });
    };
    add(&mut parts, Shape::Rect { origin: [0.0; 3], u: [w, 0.0, 0.0], v: [0.0, d, 0.0] }, FLOOR, &mut rng);
    add(&mut parts, Shape::Rect { origin: [0.0, 0.0, h], u: [w, 0.0, 0.0], v: [0.0, d, 0.0] }, CEILING, &mut rng);
    for wall in [
        Shape::Rect { origin: [0.0; 3], u: [w, 0.0, 0.0], v: [0.0, 0.0, h] },
        Shape::Rect { origin: [0.0, d, 0.0], u: [w, 0.0, 0.0], v: [0.0, 0.0, h] },
        Shape::Rect { origin: [0.0; 3], u: [0.0, d, 0.0], v: [0.0, 0.0, h] },
        Shape::Rect { origin: [w, 0.0, 0.0], u: [0.0, d, 0.0], v: [0.0, 0.0, h] },
    ] {
        add(&mut parts, wall, WALL, &mut rng);
    }
    let margin = 0.6;
    for _ in 0..config.boxes {
        let size = [rng.gen_range(0.5..1.6), rng.gen_range(0.5..1.2), rng.gen_range(0.4..1.1)];
        let min = [rng.gen_range(margin..w - margin - size[0]), rng.gen_range(margin..d - margin - size[1]), 0.0];
        let color = jitter(BASE_COLORS[BOX as usize], &mut rng, 0.08);
        for f in box_faces(min, size) {
            parts.push(Part { shape: f, label: BOX, color });
        }
    }
    for _ in 0..config.pillars {
        let radius = rng.gen_range(0.15..0.3);
        let base = [rng.gen_range(margin..w - margin), rng.gen_range(margin..d - margin), 0.0];
        add(&mut parts, Shape::Cylinder { base, radius, height: h }, PILLAR, &mut rng);
    }
    for _ in 0..config.balls {
        let radius = rng.gen_range(0.15..0.35);
        let center = [rng.gen_range(margin..w - margin), rng.gen_range(margin..d - margin), radius];
        add(&mut parts, Shape::Sphere { center, radius }, BALL, &mut rng);
    }

    let total: f64 = parts.iter().map(|p| p.shape.area()).sum();
    let mut counts: Vec<usize> =
        parts.iter().map(|p| (config.points as f64 * p.shape.area() / total).floor() as usize).collect();
    let missing = config.points - counts.iter().sum::<usize>();
    for i in 0..missing {
        let k = i % counts.len();
        counts[k] += 1;
    }

    let noise = Normal::new(0.0, config.noise.max(0.0)).expect("finite noise");
    let color_noise = Normal::new(0.0, 0.03).expect("finite noise");
    let mut cloud = PointCloud { radiometry_dim: 3, labels: Some(Vec::with_capacity(config.points)), ..Default::default() };
    cloud.positions.reserve(config.points);
    cloud.radiometry.reserve(3 * config.points);
    for (part, &n) in parts.iter().zip(&counts) {
        for _ in 0..n {
            let p = part.shape.sample(&mut rng);
            cloud.positions.push(p.map(|c| c + noise.sample(&mut rng)));
            cloud.radiometry.extend(part.color.map(|c| (c + color_noise.sample(&mut rng)).clamp(0.0, 1.0)));
            cloud.labels.as_mut().unwrap().push(part.label);
        }
    }
    cloud
}
