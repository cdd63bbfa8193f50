use super::Shape;

/// Degree of membership of `x` in `shape`, always in `[0, 1]`.
///
/// Triangles and trapezoids are piecewise linear with vertical edges where
/// adjacent parameters coincide (shoulders). A triangle with `a == b == c`
/// behaves as a singleton at `b`.
pub fn membership(shape: &Shape, x: f64) -> f64 {
    let mu = match *shape {
        Shape::Triangular { a, b, c } => {
            if x == b {
                1.0
            } else if x <= a || x >= c {
                0.0
            } else if x < b {
                (x - a) / (b - a)
            } else {
                (c - x) / (c - b)
            }
        }
        Shape::Trapezoidal { a, b, c, d } => {
            if (b..=c).contains(&x) {
                1.0
            } else if x <= a || x >= d {
                0.0
            } else if x < b {
                (x - a) / (b - a)
            } else {
                (d - x) / (d - c)
            }
        }
        Shape::Gaussian { mean, sigma } => {
            if sigma > 0.0 {
                let z = x - mean;
                (-(z * z) / (2.0 * sigma * sigma)).exp()
            } else if x == mean {
                1.0
            } else {
                0.0
            }
        }
        Shape::Singleton { value } => {
            if x == value {
                1.0
            } else {
                0.0
            }
        }
    };
    if mu.is_nan() {
        0.0
    } else {
        mu.clamp(0.0, 1.0)
    }
}
