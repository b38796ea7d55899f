use crate::{Point, Vector};

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Unnormalized normal `(b - a) x (c - a)`.
pub fn triangle_normal(a: &Point, b: &Point, c: &Point) -> Vector {
    (b - a).cross(&(c - a))
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Moller-Trumbore without back-face culling. Returns the ray parameter of
/// the hit when it is greater than `t_min`.
pub fn ray_triangle(origin: &Point, dir: &Vector, a: &Point, b: &Point, c: &Point, t_min: f64) -> Option<f64> {
    // small slack on the barycentric bounds keeps shared edges watertight
    const SLACK: f64 = 1e-12;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(-SLACK..=1.0 + SLACK).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < -SLACK || u + v > 1.0 + SLACK {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    (t > t_min).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_point_regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let q = |x, y, z| closest_point_on_triangle(&Point::new(x, y, z), &a, &b, &c);
        assert!((q(0.2, 0.2, 1.0) - Point::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert_eq!(q(-1.0, -1.0, 0.0), a);
        assert_eq!(q(2.0, -0.5, 0.0), b);
        assert_eq!(q(0.5, -1.0, 0.0), Point::new(0.5, 0.0, 0.0));
        let on_hyp = q(1.0, 1.0, 0.0);
        assert!((on_hyp - Point::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ray_hits_both_windings() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let o = Point::new(0.25, 0.25, 2.0);
        let d = Vector::new(0.0, 0.0, -1.0);
        assert_eq!(ray_triangle(&o, &d, &a, &b, &c, 0.0), Some(2.0));
        assert_eq!(ray_triangle(&o, &d, &a, &c, &b, 0.0), Some(2.0));
        assert_eq!(ray_triangle(&o, &-d, &a, &b, &c, 0.0), None);
        let miss = Point::new(0.8, 0.8, 2.0);
        assert_eq!(ray_triangle(&miss, &d, &a, &b, &c, 0.0), None);
    }
}
