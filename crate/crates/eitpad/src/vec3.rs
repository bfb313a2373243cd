//! Minimal 3-vector arithmetic on `[f64; 3]`.
//!
//! The mesh stores plain coordinate triples; these free functions keep the
//! geometry code readable without pulling a linear-algebra type into every
//! signature. 2-D meshes simply carry z = 0.

pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Normalize, returning `None` for (near-)zero input instead of NaN.
#[inline]
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n <= f64::EPSILON * 64.0 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Remove from `v` its component along the unit vector `n`.
#[inline]
pub fn reject(v: Vec3, n: Vec3) -> Vec3 {
    sub(v, scale(n, dot(v, n)))
}

/// Any unit vector orthogonal to the unit vector `n` (deterministic choice).
pub fn any_tangent(n: Vec3) -> Vec3 {
    // Pick the world axis least aligned with n, then Gram-Schmidt it.
    let axis = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
        [1.0, 0.0, 0.0]
    } else if n[1].abs() <= n[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    normalize(reject(axis, n)).expect("axis least aligned with n cannot vanish")
}
