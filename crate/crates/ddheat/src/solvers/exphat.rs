//! Manufactured verification problem on the unit square centered at the
//! origin: a sharply peaked exponential times a cosine hat,
//! T(x, y) = exp(-100 (x^2 + y^2)) cos(pi x) cos(pi y), with k = 1.
//!
//! The source term is f = -lap T (conservation law div q = f with
//! q = -grad T), derived analytically and cross-checked against a central
//! finite-difference Laplacian in the tests.

use crate::geom::Pt;
use std::f64::consts::PI;

pub fn temperature(p: Pt) -> f64 {
    let (x, y) = (p[0], p[1]);
    (-100.0 * (x * x + y * y)).exp() * (PI * x).cos() * (PI * y).cos()
}

pub fn gradient(p: Pt) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let e = (-100.0 * (x * x + y * y)).exp();
    let (cx, sx) = ((PI * x).cos(), (PI * x).sin());
    let (cy, sy) = ((PI * y).cos(), (PI * y).sin());
    [
        e * (-200.0 * x * cx - PI * sx) * cy,
        e * (-200.0 * y * cy - PI * sy) * cx,
    ]
}

/// Exact flux with k = 1: q = -grad T.
pub fn flux(p: Pt) -> [f64; 2] {
    let g = gradient(p);
    [-g[0], -g[1]]
}

pub fn laplacian(p: Pt) -> f64 {
    let (x, y) = (p[0], p[1]);
    let e = (-100.0 * (x * x + y * y)).exp();
    let (cx, sx) = ((PI * x).cos(), (PI * x).sin());
    let (cy, sy) = ((PI * y).cos(), (PI * y).sin());
    let dxx = e * cy * ((40000.0 * x * x - 200.0 - PI * PI) * cx + 400.0 * PI * x * sx);
    let dyy = e * cx * ((40000.0 * y * y - 200.0 - PI * PI) * cy + 400.0 * PI * y * sy);
    dxx + dyy
}

/// Source term of the conservation law div q = f.
pub fn source(p: Pt) -> f64 {
    -laplacian(p)
}
