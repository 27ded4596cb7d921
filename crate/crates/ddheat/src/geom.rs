//! Small 2D vector helpers shared across modules.

/// A point or vector in the plane.
pub type Pt = [f64; 2];

#[inline]
pub fn sub(a: Pt, b: Pt) -> Pt {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Pt, b: Pt) -> Pt {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Pt, s: f64) -> Pt {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Pt, b: Pt) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Pt) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Pt, b: Pt) -> f64 {
    norm(sub(a, b))
}

/// Rotate a vector by -90 degrees: maps the unit tangent of an edge to the
/// normal convention used for global H(div) edge degrees of freedom.
#[inline]
pub fn rot_normal(t: Pt) -> Pt {
    [t[1], -t[0]]
}

/// Twice the signed area of the triangle (a, b, c); positive when
/// counterclockwise.
#[inline]
pub fn signed_area2(a: Pt, b: Pt, c: Pt) -> f64 {
    cross(sub(b, a), sub(c, a))
}

#[inline]
pub fn midpoint(a: Pt, b: Pt) -> Pt {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}
