//! Geometric primitives in 3-space: circumcircles, balls, power distance,
//! bisector planes and angles.
//!
//! Everything here is a pure function of floating point inputs. Angles are
//! computed with `atan2(|a x b|, a . b)` so they stay accurate near 0 and pi.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A triangle is degenerate when `area < DEGENERACY_RATIO * longest_edge^2`.
pub const DEGENERACY_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate triangle (area {area:e}, longest edge {longest_edge:e})")]
    DegenerateTriangle { area: f64, longest_edge: f64 },
    #[error("cannot shrink ball of radius {radius} by {amount}")]
    NegativeRadius { radius: f64, amount: f64 },
    #[error("balls have coincident centers")]
    CoincidentCenters,
    #[error("vector has zero or non-finite length")]
    ZeroVector,
}

/// A point (or free vector) in 3-space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Free vectors share the point representation.
pub type Vector3 = Point3;

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(self, o: Self) -> f64 {
        (self - o).norm_squared()
    }

    #[inline]
    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn normalized(self) -> Result<UnitVector3, GeometryError> {
        UnitVector3::new(self)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Self) -> Self {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn div(self, s: f64) -> Self {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Self {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// A vector of unit Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3(Vector3);

impl UnitVector3 {
    pub fn new(v: Vector3) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::ZeroVector);
        }
        Ok(UnitVector3(v / n))
    }

    #[inline]
    pub fn as_vector(self) -> Vector3 {
        self.0
    }

    #[inline]
    pub fn dot(self, v: Vector3) -> f64 {
        self.0.dot(v)
    }

    /// Angle in `[0, pi]` to another direction.
    pub fn angle_to(self, other: UnitVector3) -> f64 {
        angle_between(self.0, other.0)
    }
}

impl Neg for UnitVector3 {
    type Output = UnitVector3;
    fn neg(self) -> Self {
        UnitVector3(-self.0)
    }
}

/// Angle in `[0, pi]` between two nonzero vectors.
pub fn angle_between(a: Vector3, b: Vector3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point3,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point3, radius: f64) -> Self {
        debug_assert!(radius >= 0.0 && radius.is_finite());
        Ball { center, radius }
    }

    /// Power distance `|c - x|^2 - r^2`: negative strictly inside, zero on the
    /// boundary.
    #[inline]
    pub fn power(&self, x: Point3) -> f64 {
        self.center.distance_squared(x) - self.radius * self.radius
    }
}

/// Power distance of `x` to `b`.
#[inline]
pub fn power_distance(b: &Ball, x: Point3) -> f64 {
    b.power(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Point3,
    pub normal: UnitVector3,
}

impl Plane {
    /// Signed distance along the plane normal.
    pub fn signed_distance(&self, x: Point3) -> f64 {
        self.normal.dot(x - self.point)
    }
}

/// Ordered triangle; orientation follows the right-hand rule on `(b - a, c - a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Point3,
    pub b: Point3,
    pub c: Point3,
}

impl Triangle {
    pub const fn new(a: Point3, b: Point3, c: Point3) -> Self {
        Triangle { a, b, c }
    }

    pub fn vertices(&self) -> [Point3; 3] {
        [self.a, self.b, self.c]
    }

    /// Twice the signed area vector.
    pub fn area_vector(&self) -> Vector3 {
        (self.b - self.a).cross(self.c - self.a)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.area_vector().norm()
    }

    pub fn edge_lengths_squared(&self) -> [f64; 3] {
        [
            self.a.distance_squared(self.b),
            self.b.distance_squared(self.c),
            self.c.distance_squared(self.a),
        ]
    }

    pub fn is_degenerate(&self) -> bool {
        self.check_nondegenerate().is_err()
    }

    pub fn check_nondegenerate(&self) -> Result<(), GeometryError> {
        let longest_sq = self.edge_lengths_squared().into_iter().fold(0.0, f64::max);
        let area = self.area();
        if !(area.is_finite() && area >= DEGENERACY_RATIO * longest_sq && area > 0.0) {
            return Err(GeometryError::DegenerateTriangle {
                area,
                longest_edge: longest_sq.sqrt(),
            });
        }
        Ok(())
    }
}

/// Circumcenter and circumradius of a triangle in 3-space.
pub fn circumcenter_radius(t: &Triangle) -> Result<(Point3, f64), GeometryError> {
    t.check_nondegenerate()?;
    let ab = t.b - t.a;
    let ac = t.c - t.a;
    let n = ab.cross(ac);
    let offset = (n.cross(ab) * ac.norm_squared() + ac.cross(n) * ab.norm_squared())
        / (2.0 * n.norm_squared());
    Ok((t.a + offset, offset.norm()))
}

/// Circumradius only.
pub fn circumradius(t: &Triangle) -> Result<f64, GeometryError> {
    circumcenter_radius(t).map(|(_, r)| r)
}

/// Smallest ball with the triangle's vertices on its boundary.
pub fn diametric_ball(t: &Triangle) -> Result<Ball, GeometryError> {
    let (c, r) = circumcenter_radius(t)?;
    Ok(Ball::new(c, r))
}

/// Right-hand-rule unit normal.
pub fn triangle_normal(t: &Triangle) -> Result<UnitVector3, GeometryError> {
    t.check_nondegenerate()?;
    UnitVector3::new(t.area_vector())
}

/// Circumscribing ball whose center is the circumcenter moved by `beta`
/// along the triangle normal. Its radius is `sqrt(rho^2 + beta^2)`.
pub fn beta_ball(t: &Triangle, beta: f64) -> Result<Ball, GeometryError> {
    let (c, rho) = circumcenter_radius(t)?;
    let n = triangle_normal(t)?;
    Ok(Ball::new(
        c + n.as_vector() * beta,
        (rho * rho + beta * beta).sqrt(),
    ))
}

/// Same center, radius reduced by `alpha`.
pub fn shrunk_ball(b: &Ball, alpha: f64) -> Result<Ball, GeometryError> {
    if alpha > b.radius {
        return Err(GeometryError::NegativeRadius {
            radius: b.radius,
            amount: alpha,
        });
    }
    Ok(Ball::new(b.center, b.radius - alpha))
}

/// Shrink amount `rho + beta - sqrt(rho^2 + beta^2)` for which the shrunk
/// diametric ball sits inside the lens of the `beta`- and `(-beta)`-balls.
pub fn lens_shrink_amount(rho: f64, beta: f64) -> f64 {
    rho + beta - (rho * rho + beta * beta).sqrt()
}

/// Plane of equal power distance to two balls.
pub fn bisector_plane(b1: &Ball, b2: &Ball) -> Result<Plane, GeometryError> {
    let d = b2.center - b1.center;
    let len = d.norm();
    if len.is_nan() || len <= 0.0 {
        return Err(GeometryError::CoincidentCenters);
    }
    let normal = UnitVector3::new(d)?;
    let t = (len * len + b1.radius * b1.radius - b2.radius * b2.radius) / (2.0 * len);
    Ok(Plane {
        point: b1.center + normal.as_vector() * t,
        normal,
    })
}

/// Angle in `[0, pi]` between the oriented normals of two triangles.
pub fn dihedral_angle(t1: &Triangle, t2: &Triangle) -> Result<f64, GeometryError> {
    let n1 = triangle_normal(t1)?;
    let n2 = triangle_normal(t2)?;
    Ok(n1.angle_to(n2))
}

/// Circumradius over shortest edge length.
pub fn aspect_ratio(t: &Triangle) -> Result<f64, GeometryError> {
    let rho = circumradius(t)?;
    let shortest = t
        .edge_lengths_squared()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(rho / shortest.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn right() -> Triangle {
        Triangle::new(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0))
    }

    fn equilateral() -> Triangle {
        Triangle::new(
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(0.5, 3f64.sqrt() / 2.0, 0.0),
        )
    }

    /// Circumcenter via Cramer's rule on the three linear conditions
    /// (two equidistance equations plus the plane equation).
    fn circumcenter_oracle(t: &Triangle) -> (Point3, f64) {
        let rows = [
            (t.b - t.a) * 2.0,
            (t.c - t.a) * 2.0,
            (t.b - t.a).cross(t.c - t.a),
        ];
        let rhs = [
            t.b.norm_squared() - t.a.norm_squared(),
            t.c.norm_squared() - t.a.norm_squared(),
            rows[2].dot(t.a),
        ];
        let det = |m: [Point3; 3]| m[0].dot(m[1].cross(m[2]));
        let d = det(rows);
        let col = |k: usize| {
            let mut m = rows;
            for (i, row) in m.iter_mut().enumerate() {
                let mut a = row.to_array();
                a[k] = rhs[i];
                *row = a.into();
            }
            det(m) / d
        };
        let c = p(col(0), col(1), col(2));
        (c, c.distance(t.a))
    }

    #[test]
    fn circumcenter_of_right_triangle_is_hypotenuse_midpoint() {
        let (c, r) = circumcenter_radius(&right()).unwrap();
        assert_relative_eq!(c.x, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.y, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.z, 0.0, epsilon = 1e-15);
        assert_relative_eq!(r, SQRT_2 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn equilateral_circumradius() {
        let r = circumradius(&equilateral()).unwrap();
        assert_relative_eq!(r, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn collinear_is_degenerate() {
        let t = Triangle::new(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0));
        assert!(matches!(
            circumcenter_radius(&t),
            Err(GeometryError::DegenerateTriangle { .. })
        ));
        assert!(diametric_ball(&t).is_err());
        assert!(triangle_normal(&t).is_err());
    }

    #[test]
    fn diametric_ball_vertices_on_boundary() {
        let b = diametric_ball(&right()).unwrap();
        assert_relative_eq!(b.radius, SQRT_2 / 2.0, epsilon = 1e-15);
        for v in right().vertices() {
            assert!(power_distance(&b, v).abs() < 1e-15);
        }
        assert_eq!(beta_ball(&right(), 0.0).unwrap(), b);
    }

    #[test]
    fn beta_ball_radius_identity() {
        // A right triangle with hypotenuse 6 has circumradius 3.
        let t = Triangle::new(p(-3.0, 0.0, 0.0), p(3.0, 0.0, 0.0), p(0.0, 3.0, 0.0));
        assert_relative_eq!(circumradius(&t).unwrap(), 3.0, epsilon = 1e-14);
        let b = beta_ball(&t, 4.0).unwrap();
        assert_relative_eq!(b.radius, 5.0, epsilon = 1e-14);
        assert_relative_eq!(b.center.z, 4.0, epsilon = 1e-14);
        assert_eq!(b.radius, beta_ball(&t, -4.0).unwrap().radius);
    }

    #[test]
    fn shrink() {
        let b = Ball::new(p(1.0, 2.0, 3.0), 3.0);
        assert_eq!(shrunk_ball(&b, 2.0).unwrap(), Ball::new(b.center, 1.0));
        assert_eq!(shrunk_ball(&b, 0.0).unwrap(), b);
        assert!(matches!(
            shrunk_ball(&b, 3.5),
            Err(GeometryError::NegativeRadius { .. })
        ));
        assert_relative_eq!(lens_shrink_amount(3.0, 4.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn power_distance_examples() {
        let b = Ball::new(Point3::ORIGIN, 1.0);
        assert_eq!(power_distance(&b, p(2.0, 0.0, 0.0)), 3.0);
        assert_eq!(power_distance(&b, p(0.0, 1.0, 0.0)), 0.0);
        assert_eq!(power_distance(&b, Point3::ORIGIN), -1.0);
    }

    #[test]
    fn bisector_examples() {
        let b1 = Ball::new(Point3::ORIGIN, 1.0);
        let b2 = Ball::new(p(2.0, 0.0, 0.0), 1.0);
        let pl = bisector_plane(&b1, &b2).unwrap();
        assert_relative_eq!(pl.point.x, 1.0);
        assert_relative_eq!(pl.normal.as_vector().x, 1.0);
        let x = p(1.0, 5.0, 0.0);
        assert_eq!(pl.signed_distance(x), 0.0);
        assert_eq!(b1.power(x), 25.0);
        assert_eq!(b2.power(x), 25.0);

        let b3 = Ball::new(Point3::ORIGIN, 2.0);
        let b4 = Ball::new(p(4.0, 0.0, 0.0), 1.0);
        let pl = bisector_plane(&b3, &b4).unwrap();
        // Hand solve: x^2 - 4 = (x - 4)^2 - 1  =>  8x = 19.
        assert_relative_eq!(pl.point.x, 19.0 / 8.0, epsilon = 1e-15);
        assert_relative_eq!(pl.point.x, 2.375, epsilon = 1e-15);

        assert_eq!(
            bisector_plane(&b1, &Ball::new(Point3::ORIGIN, 3.0)),
            Err(GeometryError::CoincidentCenters)
        );
    }

    #[test]
    fn normals_follow_vertex_order() {
        let n = triangle_normal(&right()).unwrap().as_vector();
        assert_eq!(n, p(0.0, 0.0, 1.0));
        let t = right();
        let rev = Triangle::new(t.a, t.c, t.b);
        assert_eq!(
            triangle_normal(&rev).unwrap().as_vector(),
            p(0.0, 0.0, -1.0)
        );
    }

    #[test]
    fn dihedral_examples() {
        let t = right();
        assert_eq!(dihedral_angle(&t, &t).unwrap(), 0.0);
        let rev = Triangle::new(t.a, t.c, t.b);
        assert_relative_eq!(dihedral_angle(&t, &rev).unwrap(), PI, epsilon = 1e-15);
        let wall = Triangle::new(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 0.0, 1.0));
        assert_relative_eq!(
            dihedral_angle(&t, &wall).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn aspect_ratio_examples() {
        assert_relative_eq!(
            aspect_ratio(&equilateral()).unwrap(),
            1.0 / 3f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            aspect_ratio(&right()).unwrap(),
            SQRT_2 / 2.0,
            epsilon = 1e-15
        );
        let thin = Triangle::new(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 0.01, 0.0));
        let (_, rho) = circumcenter_oracle(&thin);
        let shortest = (0.25f64 + 0.0001).sqrt();
        let expected = rho / shortest;
        // rho = (0.25 + 0.0001) / 0.02 = 12.505, so the ratio is about 25.
        assert_relative_eq!(rho, 12.505, epsilon = 1e-9);
        assert_relative_eq!(aspect_ratio(&thin).unwrap(), expected, max_relative = 1e-12);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -10.0..10.0f64
    }

    fn point() -> impl Strategy<Value = Point3> {
        (coord(), coord(), coord()).prop_map(|(x, y, z)| p(x, y, z))
    }

    fn triangle() -> impl Strategy<Value = Triangle> {
        (point(), point(), point())
            .prop_map(|(a, b, c)| Triangle::new(a, b, c))
            .prop_filter("non-degenerate", |t| {
                t.area() > 1e-3 * t.edge_lengths_squared().into_iter().fold(0.0, f64::max)
            })
    }

    proptest! {
        #[test]
        fn circumcenter_equidistant_and_coplanar(t in triangle()) {
            let (c, r) = circumcenter_radius(&t).unwrap();
            for v in t.vertices() {
                prop_assert!((c.distance(v) - r).abs() <= 1e-9 * r);
            }
            let n = triangle_normal(&t).unwrap();
            prop_assert!(n.dot(c - t.a).abs() <= 1e-9 * r);
            let (co, ro) = circumcenter_oracle(&t);
            prop_assert!(co.distance(c) <= 1e-8 * r);
            prop_assert!((ro - r).abs() <= 1e-8 * r);
        }

        #[test]
        fn normal_is_perpendicular(t in triangle()) {
            let n = triangle_normal(&t).unwrap();
            let e1 = t.b - t.a;
            let e2 = t.c - t.a;
            prop_assert!(n.dot(e1).abs() <= 1e-12 * e1.norm());
            prop_assert!(n.dot(e2).abs() <= 1e-12 * e2.norm());
        }

        #[test]
        fn beta_balls_mirror(t in triangle(), beta in -20.0..20.0f64) {
            let (c, rho) = circumcenter_radius(&t).unwrap();
            let up = beta_ball(&t, beta).unwrap();
            let down = beta_ball(&t, -beta).unwrap();
            prop_assert!((up.radius - (rho * rho + beta * beta).sqrt()).abs() <= 1e-12 * up.radius);
            prop_assert_eq!(up.radius, down.radius);
            // Mirror through the triangle plane: midpoint of the centers is c.
            let mid = (up.center + down.center) * 0.5;
            prop_assert!(mid.distance(c) <= 1e-9 * (rho + beta.abs()));
            for v in t.vertices() {
                prop_assert!(up.power(v).abs() <= 1e-9 * up.radius * up.radius);
            }
        }

        #[test]
        fn bisector_points_have_equal_power(
            c1 in point(), c2 in point(), r1 in 0.0..5.0f64, r2 in 0.0..5.0f64,
            samples in proptest::collection::vec((coord(), coord()), 100)
        ) {
            prop_assume!(c1.distance(c2) > 1e-3);
            let b1 = Ball::new(c1, r1);
            let b2 = Ball::new(c2, r2);
            let pl = bisector_plane(&b1, &b2).unwrap();
            let n = pl.normal.as_vector();
            let helper = if n.x.abs() < 0.9 { p(1.0, 0.0, 0.0) } else { p(0.0, 1.0, 0.0) };
            let u = n.cross(helper).normalized().unwrap().as_vector();
            let w = n.cross(u);
            let scale = (r1 * r1).max(r2 * r2).max(1.0);
            for (s, t) in samples {
                let x = pl.point + u * s + w * t;
                let diff = (b1.power(x) - b2.power(x)).abs();
                // Power values grow with |x|^2, so the round-off budget does too.
                prop_assert!(diff <= 1e-9 * scale.max(x.norm_squared()));
            }
        }

        #[test]
        fn lens_contains_shrunk_diametric_ball(
            t in triangle(), beta in 0.0..20.0f64,
            dirs in proptest::collection::vec((point(), 0.0..1.0f64), 50)
        ) {
            let d = diametric_ball(&t).unwrap();
            let alpha = lens_shrink_amount(d.radius, beta);
            prop_assert!(alpha <= beta + 1e-12);
            let shrunk = shrunk_ball(&d, alpha).unwrap();
            let up = beta_ball(&t, beta).unwrap();
            let down = beta_ball(&t, -beta).unwrap();
            for (dir, frac) in dirs {
                let Ok(u) = dir.normalized() else { continue };
                let x = shrunk.center + u.as_vector() * (shrunk.radius * frac);
                let tol = 1e-9 * up.radius * up.radius;
                prop_assert!(up.power(x) <= tol);
                prop_assert!(down.power(x) <= tol);
            }
        }
    }
}
