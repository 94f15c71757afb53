//! Quadrature rules on the reference triangle and interval.

/// Degree-2 triangle rule: barycentric points and weights summing to 1.
pub(crate) const TRI_DEG2: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Three-point Gauss–Legendre rule on `[0, 1]` (exact to degree 5).
pub(crate) fn gauss3_unit() -> [(f64, f64); 3] {
    let d = 0.5 * (3.0f64 / 5.0).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// Physical point for barycentric coordinates `l` on triangle `p`.
pub(crate) fn bary_point(p: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Gradients of the barycentric coordinates of a positively oriented triangle.
pub(crate) fn bary_gradients(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = |a: usize, b: usize| [(p[a][1] - p[b][1]) / two_area, (p[b][0] - p[a][0]) / two_area];
    [g(1, 2), g(2, 0), g(0, 1)]
}
