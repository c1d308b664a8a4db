//! Polygon features and exact polygon/rectangle intersection areas.

use num_traits::Float;

use crate::error::{bail, Result};
use crate::task::LandUse;

/// Axis-aligned rectangle `[min_x, max_x] x [min_y, max_y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Float> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Rect { min_x, min_y, max_x, max_y }
    }

    pub fn area(&self) -> T {
        (self.max_x - self.min_x) * (self.max_y - self.min_y)
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.min_x >= self.min_x && other.max_x <= self.max_x && other.min_y >= self.min_y && other.max_y <= self.max_y
    }

    pub fn intersects(&self, other: &Rect<T>) -> bool {
        other.min_x < self.max_x && other.max_x > self.min_x && other.min_y < self.max_y && other.max_y > self.min_y
    }

    pub fn bounding(points: &[[T; 2]]) -> Option<Self> {
        let first = points.first()?;
        let init = Rect::new(first[0], first[1], first[0], first[1]);
        Some(points.iter().fold(init, |r, p| {
            Rect::new(r.min_x.min(p[0]), r.min_y.min(p[1]), r.max_x.max(p[0]), r.max_y.max(p[1]))
        }))
    }
}

/// Signed shoelace area; positive for counterclockwise rings. A repeated
/// closing vertex contributes nothing.
pub fn shoelace_area<T: Float>(points: &[[T; 2]]) -> T {
    let n = points.len();
    if n < 3 {
        return T::zero();
    }
    let mut twice = T::zero();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice = twice + (a[0] * b[1] - b[0] * a[1]);
    }
    twice / (T::one() + T::one())
}

#[derive(Clone, Copy)]
enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

fn clip_edge<T: Float>(points: &[[T; 2]], edge: Edge, bound: T) -> Vec<[T; 2]> {
    let inside = |p: &[T; 2]| match edge {
        Edge::Left => p[0] >= bound,
        Edge::Right => p[0] <= bound,
        Edge::Bottom => p[1] >= bound,
        Edge::Top => p[1] <= bound,
    };
    let cross = |a: &[T; 2], b: &[T; 2]| -> [T; 2] {
        match edge {
            Edge::Left | Edge::Right => {
                let t = (bound - a[0]) / (b[0] - a[0]);
                [bound, a[1] + t * (b[1] - a[1])]
            }
            Edge::Bottom | Edge::Top => {
                let t = (bound - a[1]) / (b[1] - a[1]);
                [a[0] + t * (b[0] - a[0]), bound]
            }
        }
    };
    let mut out = Vec::with_capacity(points.len() + 4);
    let n = points.len();
    for i in 0..n {
        let cur = &points[i];
        let prev = &points[(i + n - 1) % n];
        match (inside(prev), inside(cur)) {
            (true, true) => out.push(*cur),
            (true, false) => out.push(cross(prev, cur)),
            (false, true) => {
                out.push(cross(prev, cur));
                out.push(*cur);
            }
            (false, false) => {}
        }
    }
    out
}

fn open_ring<T: Float>(ring: &[[T; 2]]) -> &[[T; 2]] {
    match ring {
        [first, .., last] if ring.len() > 1 && first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

/// Sutherland-Hodgman clip of a ring against the four sides of `rect`.
/// For concave rings the result may contain zero-width bridges along the
/// rectangle border; they do not change the enclosed area.
pub fn clip_to_rect<T: Float>(ring: &[[T; 2]], rect: &Rect<T>) -> Vec<[T; 2]> {
    let mut pts = open_ring(ring).to_vec();
    for (edge, bound) in [
        (Edge::Left, rect.min_x),
        (Edge::Right, rect.max_x),
        (Edge::Bottom, rect.min_y),
        (Edge::Top, rect.max_y),
    ] {
        if pts.len() < 3 {
            return Vec::new();
        }
        pts = clip_edge(&pts, edge, bound);
    }
    pts
}

/// Area of `ring ∩ rect` for a simple counterclockwise ring; 0 for
/// degenerate rings.
pub fn clip_area<T: Float>(ring: &[[T; 2]], rect: &Rect<T>) -> T {
    let ring = open_ring(ring);
    let Some(bbox) = Rect::bounding(ring) else {
        return T::zero();
    };
    if !rect.intersects(&bbox) {
        return T::zero();
    }
    let area = if rect.contains_rect(&bbox) {
        shoelace_area(ring)
    } else {
        shoelace_area(&clip_to_rect(ring, rect))
    };
    area.max(T::zero())
}

/// Attributes carried by each kind of polygon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureKind {
    Building { floors: u32 },
    Block { population: f64 },
    LandUse { class: LandUse },
}

/// A polygon with a single closed counterclockwise exterior ring.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonFeature {
    ring: Vec<[f64; 2]>,
    pub kind: FeatureKind,
}

impl PolygonFeature {
    pub fn new(ring: Vec<[f64; 2]>, kind: FeatureKind) -> Result<Self> {
        if ring.len() < 4 {
            bail!(InvalidArgument, "ring needs at least 4 points, got {}", ring.len());
        }
        if ring.first() != ring.last() {
            bail!(InvalidArgument, "ring is not closed");
        }
        if ring.iter().flatten().any(|v| !v.is_finite()) {
            bail!(InvalidArgument, "ring has non-finite coordinates");
        }
        if shoelace_area(&ring) < 0.0 {
            bail!(InvalidArgument, "ring is clockwise");
        }
        match kind {
            FeatureKind::Building { floors: 0 } => bail!(InvalidArgument, "building needs at least one floor"),
            FeatureKind::Block { population } if !(population >= 0.0 && population.is_finite()) => {
                bail!(InvalidArgument, "block population {population} must be finite and non-negative")
            }
            _ => {}
        }
        Ok(PolygonFeature { ring, kind })
    }

    /// Axis-aligned rectangle feature, counterclockwise.
    pub fn rectangle(rect: Rect<f64>, kind: FeatureKind) -> Result<Self> {
        Self::new(
            vec![
                [rect.min_x, rect.min_y],
                [rect.max_x, rect.min_y],
                [rect.max_x, rect.max_y],
                [rect.min_x, rect.max_y],
                [rect.min_x, rect.min_y],
            ],
            kind,
        )
    }

    pub fn ring(&self) -> &[[f64; 2]] {
        &self.ring
    }

    pub fn area(&self) -> f64 {
        shoelace_area(&self.ring)
    }

    pub fn bbox(&self) -> Rect<f64> {
        Rect::bounding(&self.ring).expect("ring is non-empty")
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= 0.0
    }
}

/// Area of the part of `polygon` inside `cell`.
pub fn clip_polygon_area(polygon: &PolygonFeature, cell: &Rect<f64>) -> f64 {
    clip_area(polygon.ring(), cell)
}

/// Even-odd point-in-polygon test.
pub fn point_in_ring(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    let ring = open_ring(ring);
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> Vec<[f64; 2]> {
        vec![[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side], [x0, y0]]
    }

    fn building(ring: Vec<[f64; 2]>) -> PolygonFeature {
        PolygonFeature::new(ring, FeatureKind::Building { floors: 1 }).unwrap()
    }

    #[test]
    fn contained_square() {
        let cell = Rect::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(clip_polygon_area(&building(square(2.0, 3.0, 1.0)), &cell), 1.0);
    }

    #[test]
    fn half_inside_rectangle() {
        let cell = Rect::new(0.0, 0.0, 10.0, 10.0);
        let r = PolygonFeature::rectangle(Rect::new(9.0, 4.0, 11.0, 5.0), FeatureKind::Building { floors: 1 }).unwrap();
        assert!((clip_polygon_area(&r, &cell) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_and_covering() {
        let cell = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(clip_polygon_area(&building(square(5.0, 5.0, 1.0)), &cell), 0.0);
        assert!((clip_polygon_area(&building(square(-1.0, -1.0, 3.0)), &cell) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concave_polygon_across_cell() {
        // U shape: 3x3 square minus the 1x2 notch at the top middle; area 7
        let u = vec![[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [2.0, 3.0], [2.0, 1.0], [1.0, 1.0], [1.0, 3.0], [0.0, 3.0], [0.0, 0.0]];
        let p = building(u);
        assert!((p.area() - 7.0).abs() < 1e-12);
        // top strip y in [2,3] holds two 1x1 prongs
        let strip = Rect::new(-1.0, 2.0, 4.0, 3.0);
        assert!((clip_polygon_area(&p, &strip) - 2.0).abs() < 1e-12);
        let right = Rect::new(1.5, -1.0, 4.0, 4.0);
        assert!((clip_polygon_area(&p, &right) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ring_has_zero_area() {
        let flat = PolygonFeature::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 0.0]],
            FeatureKind::Block { population: 10.0 },
        )
        .unwrap();
        assert!(flat.is_degenerate());
        assert_eq!(clip_polygon_area(&flat, &Rect::new(-1.0, -1.0, 3.0, 3.0)), 0.0);
    }

    #[test]
    fn invalid_rings_rejected() {
        let kind = FeatureKind::Building { floors: 1 };
        assert!(PolygonFeature::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], kind).is_err());
        assert!(PolygonFeature::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], kind).is_err());
        let mut cw = square(0.0, 0.0, 1.0);
        cw.reverse();
        assert!(PolygonFeature::new(cw, kind).is_err());
        assert!(PolygonFeature::new(square(0.0, 0.0, 1.0), FeatureKind::Building { floors: 0 }).is_err());
        assert!(PolygonFeature::new(square(0.0, 0.0, 1.0), FeatureKind::Block { population: -1.0 }).is_err());
    }

    #[test]
    fn point_in_ring_basics() {
        let s = square(0.0, 0.0, 2.0);
        assert!(point_in_ring(&s, [1.0, 1.0]));
        assert!(!point_in_ring(&s, [3.0, 1.0]));
    }

    #[test]
    fn generic_over_f32() {
        let ring: Vec<[f32; 2]> = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let a = clip_area(&ring, &Rect::new(1.0f32, 1.0, 3.0, 3.0));
        assert!((a - 1.0).abs() < 1e-6);
    }
}
