//! Axis-aligned boxes, balls and segment checks in 3D.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Point = Vector3<f64>;

pub fn point(x: f64, y: f64, z: f64) -> Point {
    Vector3::new(x, y, z)
}

/// Closed axis-aligned box: the boundary counts as inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Point {
        point(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    /// Closed boxes intersect when they share at least one point.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] <= self.max[i])
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        Aabb {
            min: [self.min[0] - margin, self.min[1] - margin, self.min[2] - margin],
            max: [self.max[0] + margin, self.max[1] + margin, self.max[2] + margin],
        }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    /// Whether the closed segment `a -> b` touches the box (slab test).
    pub fn segment_hits(&self, a: &Point, b: &Point) -> bool {
        self.segment_entry(a, b).is_some()
    }

    /// Smallest `t` in `[0, 1]` with `a + t (b - a)` in the box.
    pub fn segment_entry(&self, a: &Point, b: &Point) -> Option<f64> {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for i in 0..3 {
            if d[i] == 0.0 {
                if a[i] < self.min[i] || a[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let mut lo = (self.min[i] - a[i]) / d[i];
            let mut hi = (self.max[i] - a[i]) / d[i];
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Closed ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &Point) -> bool {
        (p - self.center_point()).norm() <= self.radius
    }

    pub fn center_point(&self) -> Point {
        point(self.center[0], self.center[1], self.center[2])
    }

    /// Smallest `t` in `[0, 1]` with `a + t (b - a)` in the ball.
    pub fn segment_entry(&self, a: &Point, b: &Point) -> Option<f64> {
        let c = self.center_point();
        let d = b - a;
        let f = a - c;
        if f.norm() <= self.radius {
            return Some(0.0);
        }
        let qa = d.norm_squared();
        if qa == 0.0 {
            return None;
        }
        let qb = 2.0 * f.dot(&d);
        let qc = f.norm_squared() - self.radius * self.radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let t = (-qb - disc.sqrt()) / (2.0 * qa);
        (0.0..=1.0).contains(&t).then_some(t)
    }
}

/// Arc length along `path` until it first enters a region, given the
/// region's per-segment entry parameter.
pub fn arc_to_region(path: &[Point], entry: impl Fn(&Point, &Point) -> Option<f64>) -> Option<f64> {
    let mut acc = 0.0;
    for w in path.windows(2) {
        let len = (w[1] - w[0]).norm();
        if let Some(t) = entry(&w[0], &w[1]) {
            return Some(acc + t * len);
        }
        acc += len;
    }
    None
}

pub fn to_point(a: &[f64; 3]) -> Point {
    point(a[0], a[1], a[2])
}

/// Samples `a -> b` at spacing at most `resolution` (endpoints included)
/// and checks every sample with `free`.
pub fn segment_free(a: &Point, b: &Point, resolution: f64, free: impl Fn(&Point) -> bool) -> bool {
    let length = (b - a).norm();
    let pieces = (length / resolution).ceil().max(1.0) as usize;
    (0..=pieces).all(|i| free(&(a + (b - a) * (i as f64 / pieces as f64))))
}

/// `n` unit directions: equal azimuths in the plane for `dims == 2`,
/// a Fibonacci-sphere layout otherwise.
pub fn equally_spaced_directions(n: usize, dims: usize) -> Vec<Point> {
    if dims == 2 {
        return (0..n)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                point(theta.cos(), theta.sin(), 0.0)
            })
            .collect();
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64;
            point(r * theta.cos(), r * theta.sin(), z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_counts_as_inside() {
        let b = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        assert!(b.contains(&point(1.0, 0.5, 0.0)));
        assert!(!b.contains(&point(1.0 + 1e-12, 0.5, 0.0)));
    }

    #[test]
    fn touching_boxes_intersect() {
        let a = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let b = Aabb::new([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let c = Aabb::new([1.5, 0.0, 0.0], [2.0, 1.0, 1.0]);
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
    }

    #[test]
    fn directions_are_unit_and_distinct() {
        for dims in [2, 3] {
            let d = equally_spaced_directions(16, dims);
            assert_eq!(d.len(), 16);
            for (i, u) in d.iter().enumerate() {
                assert!((u.norm() - 1.0).abs() < 1e-12);
                for v in &d[i + 1..] {
                    assert!((u - v).norm() > 0.1);
                }
            }
        }
        let planar = equally_spaced_directions(16, 2);
        assert!(planar.iter().all(|u| u.z == 0.0));
    }

    #[test]
    fn slab_test_agrees_with_dense_sampling() {
        let b = Aabb::new([1.0, 1.0, 0.0], [2.0, 3.0, 1.0]);
        let cases = [
            (point(0.0, 0.0, 0.5), point(3.0, 4.0, 0.5), true),
            (point(0.0, 0.0, 0.5), point(3.0, 0.5, 0.5), false),
            (point(2.0, 0.0, 0.5), point(2.0, 5.0, 0.5), true),
            (point(0.0, 4.0, 0.5), point(0.9, 0.0, 0.5), false),
            (point(1.5, 2.0, 0.5), point(1.6, 2.0, 0.5), true),
        ];
        for (a, c, expected) in cases {
            assert_eq!(b.segment_hits(&a, &c), expected, "{a:?} -> {c:?}");
            assert_eq!(!segment_free(&a, &c, 1e-3, |p| !b.contains(p)), expected);
        }
    }

    #[test]
    fn entry_parameters() {
        let b = Aabb::new([2.0, -1.0, -1.0], [3.0, 1.0, 1.0]);
        assert_eq!(b.segment_entry(&point(0.0, 0.0, 0.0), &point(4.0, 0.0, 0.0)), Some(0.5));
        let ball = Ball {
            center: [5.0, 0.0, 0.0],
            radius: 1.0,
        };
        let t = ball
            .segment_entry(&point(0.0, 0.0, 0.0), &point(10.0, 0.0, 0.0))
            .unwrap();
        assert!((t - 0.4).abs() < 1e-12);
        assert_eq!(ball.segment_entry(&point(0.0, 2.0, 0.0), &point(10.0, 2.0, 0.0)), None);
        let path = [point(0.0, 0.0, 0.0), point(0.0, 3.0, 0.0), point(10.0, 3.0, 0.0)];
        let arc = arc_to_region(&path, |a, c| b.segment_entry(a, c));
        assert_eq!(arc, None);
        let path = [point(0.0, 0.0, 0.0), point(1.0, 0.0, 0.0), point(10.0, 0.0, 0.0)];
        let arc = arc_to_region(&path, |a, c| b.segment_entry(a, c)).unwrap();
        assert!((arc - 2.0).abs() < 1e-12);
    }

    #[test]
    fn segment_check_detects_blocking_box() {
        let wall = Aabb::new([4.0, -1.0, -1.0], [5.0, 1.0, 1.0]);
        let free = |p: &Point| !wall.contains(p);
        assert!(!segment_free(&point(0.0, 0.0, 0.0), &point(10.0, 0.0, 0.0), 0.25, free));
        assert!(segment_free(&point(0.0, 2.0, 0.0), &point(10.0, 2.0, 0.0), 0.25, free));
    }
}
