//! Planar geometry shared by every model.

/// 2-D vector in meters (positions) or meters per second (velocities).
pub type Vec2 = glam::DVec2;

/// Euclidean distance between two points.
pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (a - b).length()
}

/// z-component of the cross product `a × b`.
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Unit vector of `v`, or `fallback` when `v` is zero.
pub fn unit_or(v: Vec2, fallback: Vec2) -> Vec2 {
    let len = v.length();
    if len > 0.0 {
        v / len
    } else {
        fallback
    }
}

/// Closest point to `p` on the segment `a`–`b`.
pub fn nearest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.length_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = (p - a).dot(ab) / len2;
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    if cross(ab, p - a) == 0.0 {
        return p;
    }
    a + ab * t
}

/// Axis-aligned rectangle. Membership is half-open: `[min, max)` on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Half-open containment, so adjacent rectangles never share a point.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x < self.max.x && p.y >= self.min.y && p.y < self.max.y
    }

    /// Closed containment, used for scene bounds.
    pub fn contains_closed(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// A polyline obstacle: wall, column outline or door jamb.
///
/// A polyline whose last vertex repeats the first is treated as a closed
/// outline with an interior.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub vertices: Vec<Vec2>,
    pub charge: f64,
}

fn default_obstacle_charge() -> f64 {
    1.0
}

impl Obstacle {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Obstacle {
            vertices,
            charge: default_obstacle_charge(),
        }
    }

    pub fn segment(a: Vec2, b: Vec2) -> Self {
        Obstacle::new(vec![a, b])
    }

    /// Closed axis-aligned box outline.
    pub fn rectangle(min: Vec2, max: Vec2) -> Self {
        Obstacle::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
            min,
        ])
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge = charge;
        self
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.len() >= 4 && self.vertices.first() == self.vertices.last()
    }

    /// Even-odd point-in-polygon test; always false for open polylines.
    pub fn contains(&self, p: Vec2) -> bool {
        if !self.is_closed() {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Point on the polyline closest to `p`. Ties go to the lowest segment index.
    pub fn nearest_point(&self, p: Vec2) -> Vec2 {
        let mut best = self.vertices[0];
        let mut best_d2 = f64::INFINITY;
        for (a, b) in self.segments() {
            let q = nearest_point_on_segment(p, a, b);
            let d2 = (p - q).length_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
        best
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        distance(p, self.nearest_point(p))
    }
}

/// Free-function form of [`Obstacle::nearest_point`].
pub fn nearest_point_on_obstacle(p: Vec2, obstacle: &Obstacle) -> Vec2 {
    obstacle.nearest_point(p)
}

/// Pushes a disc of `radius` centred at `p` out of `obstacle`.
///
/// Returns the corrected centre and the outward surface normal, or `None`
/// when the disc does not penetrate. `previous` breaks the tie when the
/// centre lies exactly on the polyline.
pub fn project_out(
    p: Vec2,
    radius: f64,
    obstacle: &Obstacle,
    previous: Vec2,
) -> Option<(Vec2, Vec2)> {
    let q = obstacle.nearest_point(p);
    let inside = obstacle.contains(p);
    let d = distance(p, q);
    if !inside && d >= radius {
        return None;
    }
    let normal = if inside {
        unit_or(q - p, Vec2::X)
    } else if d > 0.0 {
        (p - q) / d
    } else {
        unit_or(previous - q, Vec2::X)
    };
    Some((q + normal * radius, normal))
}
