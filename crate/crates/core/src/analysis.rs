//! Density measurements and brute-force conformance checks.
//!
//! The reach `gamma` is always an input, taken from the reference surface or
//! supplied by the caller; it is never estimated from the mesh.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, lens_shrink_amount, Point3};
use crate::mesh::{FaceId, TriangleMesh, VertexId};
use crate::surface::{SurfaceError, SurfaceModel};

/// Vertices farther than this multiple of `gamma` from the surface are
/// rejected by [`density_report`].
pub const OFF_SURFACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("vertex {vertex} is {distance:e} away from the surface")]
    VertexOffSurface { vertex: VertexId, distance: f64 },
    #[error("mesh has a degenerate face {0}")]
    DegenerateFace(FaceId),
    #[error("reach must be positive, got {0}")]
    BadReach(f64),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    /// Largest circumradius over `gamma`.
    pub epsilon: f64,
    /// Closest vertex pair over `epsilon * gamma`.
    pub delta: f64,
    pub max_radius: f64,
    pub min_distance: f64,
    pub max_aspect_ratio: f64,
    /// Largest angle between the normals of adjacent faces, in radians.
    pub max_dihedral: f64,
    /// Largest angle between a face normal and the surface normal at one of
    /// its vertices, in radians.
    pub max_normal_deviation: f64,
    pub orientation_consistent: bool,
    pub gamma_used: f64,
    pub vertices: usize,
    pub faces: usize,
}

/// Measures `mesh` against `surf`. `gamma` overrides the surface's reach.
pub fn density_report(
    mesh: &TriangleMesh,
    surf: &SurfaceModel,
    gamma: Option<f64>,
) -> Result<DensityReport, AnalysisError> {
    let gamma = gamma.unwrap_or_else(|| surf.reach());
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(AnalysisError::BadReach(gamma));
    }
    let mut normals = Vec::with_capacity(mesh.vertex_count());
    for v in mesh.vertices() {
        let x = mesh.position(v);
        let distance = surf.signed_distance(x)?.abs();
        if distance > OFF_SURFACE_TOLERANCE * gamma {
            return Err(AnalysisError::VertexOffSurface {
                vertex: v,
                distance,
            });
        }
        normals.push(surf.normal(x)?);
    }

    let mut max_radius: f64 = 0.0;
    let mut max_aspect_ratio: f64 = 0.0;
    let mut max_normal_deviation: f64 = 0.0;
    for f in mesh.faces() {
        let t = mesh.face_triangle(f);
        let rho = geometry::circumradius(&t).map_err(|_| AnalysisError::DegenerateFace(f))?;
        max_radius = max_radius.max(rho);
        max_aspect_ratio =
            max_aspect_ratio.max(geometry::aspect_ratio(&t).unwrap_or(f64::INFINITY));
        let n = mesh
            .face_normal(f)
            .map_err(|_| AnalysisError::DegenerateFace(f))?;
        for v in mesh.face_vertices(f) {
            max_normal_deviation = max_normal_deviation.max(n.angle_to(normals[v.index()]));
        }
    }
    let max_dihedral = mesh
        .edges()
        .map(|e| mesh.edge_dihedral(e).unwrap_or(std::f64::consts::PI))
        .fold(0.0, f64::max);
    let min_distance = closest_pair_distance(&mesh.positions().collect::<Vec<_>>());
    let epsilon = max_radius / gamma;
    Ok(DensityReport {
        epsilon,
        delta: min_distance / (epsilon * gamma),
        max_radius,
        min_distance,
        max_aspect_ratio,
        max_dihedral,
        max_normal_deviation,
        orientation_consistent: max_normal_deviation <= FRAC_PI_2,
        gamma_used: gamma,
        vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
    })
}

/// Distance between the closest pair of points; infinite for fewer than two.
pub fn closest_pair_distance(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return f64::INFINITY;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let diag = (hi - lo).norm();
    if diag == 0.0 {
        return 0.0;
    }
    // Cell size near the typical spacing of points on a surface; any pair
    // closer than the cell size sits in adjacent cells.
    let mut cell = diag / (points.len() as f64).sqrt();
    loop {
        let key = |p: &Point3| {
            [
                ((p.x - lo.x) / cell).floor() as i64,
                ((p.y - lo.y) / cell).floor() as i64,
                ((p.z - lo.z) / cell).floor() as i64,
            ]
        };
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(key(p)).or_default().push(i);
        }
        let mut best2 = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                            continue;
                        };
                        for &j in bucket {
                            if j > i {
                                best2 = best2.min(p.distance_squared(points[j]));
                            }
                        }
                    }
                }
            }
        }
        if best2 <= cell * cell {
            return best2.sqrt();
        }
        cell *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ConformanceMode {
    Gabriel,
    /// Every diametric ball shrunk by `min(alpha, rho)`.
    AlphaGabriel {
        alpha: f64,
    },
    /// Each face's ball shrunk by `rho + beta - sqrt(rho^2 + beta^2)`.
    LensShrunk {
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformanceViolation {
    pub face: FaceId,
    /// Deepest offending vertex.
    pub witness: VertexId,
    /// Power distance of the witness to the tested ball, negated and divided
    /// by the face's squared circumradius.
    pub penetration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub mode: ConformanceMode,
    pub tolerance: f64,
    pub violations: Vec<ConformanceViolation>,
    pub pass: bool,
    pub faces_checked: usize,
}

/// Every diametric ball is free of vertices (up to the relative margin `tau`).
pub fn gabriel_check(mesh: &TriangleMesh, tau: f64) -> ConformanceReport {
    shrunk_ball_check(mesh, tau, ConformanceMode::Gabriel, |_| 0.0)
}

/// Every diametric ball shrunk by `alpha` (clamped to the face's
/// circumradius) is free of vertices.
pub fn alpha_gabriel_check(mesh: &TriangleMesh, alpha: f64, tau: f64) -> ConformanceReport {
    shrunk_ball_check(mesh, tau, ConformanceMode::AlphaGabriel { alpha }, |rho| {
        alpha.min(rho)
    })
}

/// Shrinks each face's ball by the amount that fits it inside the
/// `beta`-lens. If no face is `beta`-stabbed, this check passes.
pub fn lens_shrunk_check(mesh: &TriangleMesh, beta: f64, tau: f64) -> ConformanceReport {
    shrunk_ball_check(mesh, tau, ConformanceMode::LensShrunk { beta }, |rho| {
        lens_shrink_amount(rho, beta).min(rho)
    })
}

fn shrunk_ball_check(
    mesh: &TriangleMesh,
    tau: f64,
    mode: ConformanceMode,
    shrink: impl Fn(f64) -> f64 + Sync,
) -> ConformanceReport {
    let positions: Vec<Point3> = mesh.positions().collect();
    let faces: Vec<FaceId> = mesh.faces().collect();
    let violations: Vec<ConformanceViolation> = faces
        .par_iter()
        .filter_map(|&f| {
            let ball = mesh.face_ball(f).ok()?;
            let rho2 = ball.radius * ball.radius;
            let r = ball.radius - shrink(ball.radius);
            if r <= 0.0 {
                return None;
            }
            let r2 = r * r;
            let limit = -tau * r2;
            let own = mesh.face_vertices(f);
            let c = ball.center;
            let mut best: Option<(f64, usize)> = None;
            for (i, p) in positions.iter().enumerate() {
                let dx = p.x - c.x;
                let dx2 = dx * dx;
                if dx2 >= r2 {
                    continue;
                }
                let pow = dx2 + (p.y - c.y).powi(2) + (p.z - c.z).powi(2) - r2;
                if pow < limit && best.is_none_or(|(b, _)| pow < b) {
                    if own.contains(&VertexId(i as u32)) {
                        continue;
                    }
                    best = Some((pow, i));
                }
            }
            best.map(|(pow, i)| ConformanceViolation {
                face: f,
                witness: VertexId(i as u32),
                penetration: -pow / rho2,
            })
        })
        .collect();
    ConformanceReport {
        mode,
        tolerance: tau,
        pass: violations.is_empty(),
        violations,
        faces_checked: faces.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
    /// Whether the mesh satisfies the hypothesis under which the bound holds.
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalAudit {
    pub epsilon: f64,
    pub checks: Vec<BoundCheck>,
}

impl NormalAudit {
    pub fn pass(&self) -> bool {
        self.checks.iter().filter(|c| c.applicable).all(|c| c.pass)
    }
}

/// Compares observed normal deviations with the bounds that hold for dense
/// triangulations:
///
/// * surface normals at the ends of an edge of length `e * gamma` differ by at
///   most `e / (1 - e)` (for `e <= 1/3`), checked edge by edge;
/// * a face normal and the surface normal at any of its vertices differ by at
///   most `7 epsilon` (for `epsilon < 0.1`);
/// * adjacent face normals differ by at most `14 epsilon` (same hypothesis).
pub fn normal_bound_audit(
    mesh: &TriangleMesh,
    surf: &SurfaceModel,
    gamma: Option<f64>,
) -> Result<NormalAudit, AnalysisError> {
    let report = density_report(mesh, surf, gamma)?;
    let gamma = report.gamma_used;
    let eps = report.epsilon;

    let mut edge_observed: f64 = 0.0;
    let mut edge_bound: f64 = 0.0;
    let mut edge_pass = true;
    let mut edge_applicable = true;
    for e in mesh.edges() {
        let [a, b] = mesh.edge_vertices(e);
        let (x, y) = (mesh.position(a), mesh.position(b));
        let e_eps = x.distance(y) / gamma;
        let angle = surf.normal(x)?.angle_to(surf.normal(y)?);
        let bound = e_eps / (1.0 - e_eps);
        edge_observed = edge_observed.max(angle);
        edge_bound = edge_bound.max(bound);
        if e_eps > 1.0 / 3.0 {
            edge_applicable = false;
        } else if angle > bound {
            edge_pass = false;
        }
    }
    let small = eps < 0.1;
    Ok(NormalAudit {
        epsilon: eps,
        checks: vec![
            BoundCheck {
                name: "edge_normal_variation",
                observed: edge_observed,
                bound: edge_bound,
                pass: edge_pass,
                applicable: edge_applicable,
            },
            BoundCheck {
                name: "face_vs_vertex_normal",
                observed: report.max_normal_deviation,
                bound: 7.0 * eps,
                pass: report.max_normal_deviation <= 7.0 * eps,
                applicable: small,
            },
            BoundCheck {
                name: "dihedral",
                observed: report.max_dihedral,
                bound: 14.0 * eps,
                pass: report.max_dihedral <= 14.0 * eps,
                applicable: small,
            },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::{icosahedron, octahedron};
    use crate::predicates::{brute_force_stab_scan, fixtures, TAU};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn build(data: (Vec<Point3>, Vec<[usize; 3]>)) -> TriangleMesh {
        TriangleMesh::build(&data.0, &data.1).unwrap()
    }

    #[test]
    fn icosahedron_density() {
        let m = build(icosahedron());
        let surf = SurfaceModel::sphere(1.0).unwrap();
        let r = density_report(&m, &surf, None).unwrap();
        // Edge of the icosahedron inscribed in the unit sphere.
        let edge = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert_relative_eq!(edge, 1.05146, epsilon = 1e-5);
        assert_relative_eq!(r.min_distance, edge, epsilon = 1e-12);
        assert_relative_eq!(r.epsilon, edge / 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.epsilon, 0.60706, epsilon = 1e-5);
        assert!(r.orientation_consistent);
        assert_eq!(r.gamma_used, 1.0);
        let r2 = density_report(&m, &surf, Some(2.0)).unwrap();
        assert_relative_eq!(r2.epsilon, r.epsilon / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reversed_face_breaks_orientation() {
        let (pos, mut tris) = octahedron();
        let surf = SurfaceModel::sphere(1.0).unwrap();
        assert!(
            density_report(&build((pos.clone(), tris.clone())), &surf, None)
                .unwrap()
                .orientation_consistent
        );
        // Reversing one face alone is not a valid mesh, so reverse them all.
        for t in &mut tris {
            t.swap(1, 2);
        }
        let r = density_report(&build((pos, tris)), &surf, None).unwrap();
        assert!(!r.orientation_consistent);
    }

    #[test]
    fn off_surface_vertices_are_rejected() {
        let (mut pos, tris) = octahedron();
        pos[0] = Point3::new(1.001, 0.0, 0.0);
        let err = density_report(
            &build((pos, tris)),
            &SurfaceModel::sphere(1.0).unwrap(),
            None,
        );
        assert!(matches!(
            err,
            Err(AnalysisError::VertexOffSurface {
                vertex: VertexId(0),
                ..
            })
        ));
    }

    #[test]
    fn gabriel_examples() {
        let m = build(octahedron());
        assert!(gabriel_check(&m, TAU).pass);
        let m = build(fixtures::stabbed_quad());
        let r = gabriel_check(&m, TAU);
        assert!(!r.pass);
        let v = r.violations.iter().find(|v| v.face == FaceId(0)).unwrap();
        assert_eq!(v.witness, VertexId(3));
        // -pow / rho^2 with |c - s| = 0.34375.
        let rho2 = 0.25 + 0.24375f64.powi(2);
        assert_relative_eq!(
            v.penetration,
            (rho2 - 0.34375f64.powi(2)) / rho2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn alpha_levels() {
        let m = build(fixtures::stabbed_quad());
        assert_eq!(
            alpha_gabriel_check(&m, 0.0, TAU).violations,
            gabriel_check(&m, TAU).violations
        );
        let max_rho = m
            .faces()
            .map(|f| m.face_radius(f).unwrap())
            .fold(0.0, f64::max);
        assert!(alpha_gabriel_check(&m, max_rho, TAU).pass);
        assert!(alpha_gabriel_check(&m, 1e9, TAU).pass);
        assert!(lens_shrunk_check(&m, 0.0, TAU).violations == gabriel_check(&m, TAU).violations);
    }

    #[test]
    fn gabriel_agrees_with_stab_scan() {
        for data in [
            fixtures::stabbed_quad(),
            fixtures::pulled_octahedron(0.3),
            fixtures::pulled_octahedron(0.9),
            icosahedron(),
        ] {
            let m = build(data);
            let g = gabriel_check(&m, TAU);
            let s = brute_force_stab_scan(&m, TAU);
            assert_eq!(g.pass, s.is_empty());
            let gf: Vec<_> = g.violations.iter().map(|v| (v.face, v.witness)).collect();
            let sf: Vec<_> = s.iter().map(|r| (r.face.id, r.witness)).collect();
            assert_eq!(gf, sf);
        }
    }

    #[test]
    fn audit_on_octahedron_flags_inapplicable_bounds() {
        let m = build(octahedron());
        let a = normal_bound_audit(&m, &SurfaceModel::sphere(1.0).unwrap(), None).unwrap();
        assert_eq!(a.checks.len(), 3);
        assert!(a.checks.iter().all(|c| !c.applicable));
    }

    #[test]
    fn audit_on_giant_sphere_goes_to_zero() {
        // A small icosphere patch scaled onto a huge sphere: epsilon -> 0.
        let m = crate::surface::icosphere(1.0, 3).unwrap();
        let surf = SurfaceModel::sphere(1.0).unwrap();
        let small = normal_bound_audit(&m, &surf, None).unwrap();
        let huge = normal_bound_audit(&m, &surf, Some(1e6)).unwrap();
        assert!(huge.epsilon < 1e-6);
        // The reach override only rescales epsilon; angles are geometric.
        assert_eq!(small.checks[2].observed, huge.checks[2].observed);
        let m = crate::surface::icosphere(1.0, 6).unwrap();
        let fine = normal_bound_audit(&m, &surf, None).unwrap();
        assert!(fine.pass());
        for (c, f) in small.checks.iter().zip(&fine.checks) {
            assert!(f.observed < c.observed / 4.0, "{}", c.name);
        }
    }

    fn brute_closest(points: &[Point3]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                best = best.min(points[i].distance(points[j]));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn closest_pair_matches_brute_force(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -1e-3..1e-3f64), 2..60)
        ) {
            let pts: Vec<Point3> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
            prop_assert_eq!(closest_pair_distance(&pts), brute_closest(&pts));
        }

        #[test]
        fn alpha_check_is_monotone(a1 in 0.0..1.5f64, a2 in 0.0..1.5f64, top in 0.0..0.95f64) {
            let m = build(fixtures::pulled_octahedron(top));
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            if alpha_gabriel_check(&m, lo, TAU).pass {
                prop_assert!(alpha_gabriel_check(&m, hi, TAU).pass);
            }
        }
    }

    #[test]
    fn closest_pair_edge_cases() {
        assert_eq!(closest_pair_distance(&[]), f64::INFINITY);
        assert_eq!(closest_pair_distance(&[Point3::ORIGIN]), f64::INFINITY);
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(closest_pair_distance(&[p, p]), 0.0);
        // One isolated close pair among far-apart points.
        let mut pts: Vec<Point3> = (0..50)
            .map(|i| Point3::new(i as f64, (i * i % 7) as f64, 0.0))
            .collect();
        pts.push(Point3::new(10.0, 3.0 + 1e-7, 0.0));
        assert_eq!(closest_pair_distance(&pts), brute_closest(&pts));
    }
}
