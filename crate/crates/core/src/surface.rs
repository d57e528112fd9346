//! Analytic reference surfaces and dense test triangulations on them.
//!
//! Spheres are meshed by geodesic subdivision of the icosahedron, tori by a
//! structured `(u, v)` grid. Both get a small seeded tangential jitter so
//! that no four vertices are cocircular, which would leave flips undecided.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU as TWO_PI};
use thiserror::Error;

use crate::analysis::closest_pair_distance;
use crate::geometry::{self, Point3, UnitVector3};
use crate::mesh::{canonical_rotation, EdgeId, FlipRecord, MeshError, TriangleMesh, VertexId};
use crate::predicates::{self, TAU};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("point {0:?} lies on the medial axis")]
    OnMedialAxis(Point3),
    #[error("unachievable spec: {0}")]
    UnachievableSpec(String),
    #[error("could only apply {done} of {requested} perturbation flips")]
    CannotPerturb { done: usize, requested: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceModel {
    /// Sphere of the given radius centered at the origin.
    Sphere { radius: f64 },
    /// Torus around the z axis.
    Torus { major: f64, minor: f64 },
}

impl SurfaceModel {
    pub fn sphere(radius: f64) -> Result<Self, SurfaceError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SurfaceError::InvalidSurface(format!(
                "sphere radius {radius}"
            )));
        }
        Ok(SurfaceModel::Sphere { radius })
    }

    /// Requires `major > 2 * minor`, which makes the reach equal to `minor`.
    pub fn torus(major: f64, minor: f64) -> Result<Self, SurfaceError> {
        if !(minor > 0.0 && major.is_finite() && major > 2.0 * minor) {
            return Err(SurfaceError::InvalidSurface(format!(
                "torus needs major > 2 * minor > 0, got major {major}, minor {minor}"
            )));
        }
        Ok(SurfaceModel::Torus { major, minor })
    }

    /// Distance from the surface to its medial axis.
    pub fn reach(&self) -> f64 {
        match *self {
            SurfaceModel::Sphere { radius } => radius,
            // Medial axis: the core circle (distance minor) and the z axis
            // (distance at least major - minor > minor).
            SurfaceModel::Torus { minor, .. } => minor,
        }
    }

    /// Nearest point of the medial axis component that `x` is measured from.
    fn core_point(&self, x: Point3) -> Result<Point3, SurfaceError> {
        match *self {
            SurfaceModel::Sphere { .. } => Ok(Point3::ORIGIN),
            SurfaceModel::Torus { major, .. } => {
                let rxy = x.x.hypot(x.y);
                if rxy == 0.0 {
                    return Err(SurfaceError::OnMedialAxis(x));
                }
                Ok(Point3::new(major * x.x / rxy, major * x.y / rxy, 0.0))
            }
        }
    }

    fn tube_radius(&self) -> f64 {
        match *self {
            SurfaceModel::Sphere { radius } => radius,
            SurfaceModel::Torus { minor, .. } => minor,
        }
    }

    /// Outward unit normal at the surface point nearest to `x`.
    pub fn normal(&self, x: Point3) -> Result<UnitVector3, SurfaceError> {
        let c = self.core_point(x)?;
        (x - c)
            .normalized()
            .map_err(|_| SurfaceError::OnMedialAxis(x))
    }

    /// Closest surface point to `x`.
    pub fn project(&self, x: Point3) -> Result<Point3, SurfaceError> {
        let c = self.core_point(x)?;
        let n = self.normal(x)?;
        Ok(c + n.as_vector() * self.tube_radius())
    }

    /// Positive outside, negative inside.
    pub fn signed_distance(&self, x: Point3) -> Result<f64, SurfaceError> {
        let c = self.core_point(x)?;
        Ok((x - c).norm() - self.tube_radius())
    }
}

/// Parameters for [`make_dense_mesh`] and [`generate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// Target density: every circumradius at most `epsilon * reach`.
    pub epsilon: f64,
    /// Target uniformity: vertices more than `delta * epsilon * reach` apart.
    /// On a torus, zero requests a grid graded 2:1 along `u`.
    pub delta: f64,
    pub seed: u64,
    /// Random anti-Delaunay flips applied by [`generate`].
    pub perturb_flips: usize,
    /// Mesh to radius `epsilon * reach / headroom`, leaving room for
    /// perturbation flips that enlarge faces.
    pub headroom: f64,
    /// Tangential jitter as a fraction of the local grid spacing.
    pub jitter: f64,
}

impl GenSpec {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        GenSpec {
            epsilon,
            delta,
            seed,
            perturb_flips: 0,
            headroom: 1.0,
            jitter: 0.15,
        }
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let bad = |m: String| Err(SurfaceError::UnachievableSpec(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1), got {}", self.delta));
        }
        if !(self.headroom >= 1.0 && self.headroom.is_finite()) {
            return bad(format!(
                "headroom must be at least 1, got {}",
                self.headroom
            ));
        }
        if !(0.0..=0.3).contains(&self.jitter) {
            return bad(format!("jitter must lie in [0, 0.3], got {}", self.jitter));
        }
        Ok(())
    }

    fn target_radius(&self, surf: &SurfaceModel) -> f64 {
        self.epsilon * surf.reach() / self.headroom
    }
}

/// A generated mesh together with the perturbation flips applied to it.
#[derive(Debug, Clone)]
pub struct Generated {
    pub mesh: TriangleMesh,
    pub perturbation: Vec<FlipRecord>,
}

/// Dense mesh followed by `spec.perturb_flips` anti-Delaunay flips.
pub fn generate(surf: &SurfaceModel, spec: &GenSpec) -> Result<Generated, SurfaceError> {
    let mut mesh = make_dense_mesh(surf, spec)?;
    let max_radius = spec.epsilon * surf.reach();
    let perturbation = perturb_anti_delaunay(&mut mesh, spec.perturb_flips, spec.seed, max_radius)?;
    Ok(Generated { mesh, perturbation })
}

/// Builds a triangulation of `surf` with every circumradius at most
/// `spec.epsilon * reach / spec.headroom` and vertices more than
/// `spec.delta * spec.epsilon * reach` apart.
pub fn make_dense_mesh(surf: &SurfaceModel, spec: &GenSpec) -> Result<TriangleMesh, SurfaceError> {
    spec.validate()?;
    let target = spec.target_radius(surf);
    let mesh = match *surf {
        SurfaceModel::Sphere { radius } => {
            let mut freq = ((0.6 * radius / target).floor() as usize).max(1);
            loop {
                let m = jittered_sphere(radius, freq, spec.jitter, spec.seed)?;
                if max_circumradius(&m) <= target {
                    break m;
                }
                freq += 1;
            }
        }
        SurfaceModel::Torus { major, minor } => {
            let graded = spec.delta == 0.0;
            // A right-triangle split of an `s x s` cell has radius s / sqrt 2;
            // jitter enlarges it, which the loop below corrects.
            let s = target * std::f64::consts::SQRT_2;
            let stretch = if graded { 1.5 } else { 1.0 };
            let mut nu = ((TWO_PI * (major + minor) * stretch / s).ceil() as usize).max(6);
            let mut nv = ((TWO_PI * minor / s).ceil() as usize).max(3);
            loop {
                let m = torus_grid(major, minor, nu, nv, graded, spec.jitter, spec.seed)?;
                if max_circumradius(&m) <= target {
                    break m;
                }
                nu = nu + nu / 32 + 1;
                nv = nv + nv / 32 + 1;
            }
        }
    };
    let floor = spec.delta * spec.epsilon * surf.reach();
    let closest = closest_pair_distance(&mesh.positions().collect::<Vec<_>>());
    if closest <= floor {
        return Err(SurfaceError::UnachievableSpec(format!(
            "closest vertex pair {closest:e} is not above delta * epsilon * reach = {floor:e}"
        )));
    }
    Ok(mesh)
}

fn max_circumradius(mesh: &TriangleMesh) -> f64 {
    mesh.faces()
        .map(|f| mesh.face_radius(f).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

/// Frequency-`freq` geodesic subdivision of the unit icosahedron, before
/// projection: positions on the icosahedron's faces.
fn subdivided_icosahedron(freq: usize) -> (Vec<Point3>, Vec<[usize; 3]>) {
    #[derive(Hash, PartialEq, Eq)]
    enum Key {
        Corner(usize),
        Edge(usize, usize, usize),
        Inner(usize, usize, usize),
    }
    let (corners, faces) = crate::mesh::fixtures::icosahedron();
    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut pos = Vec::new();
    let mut tris = Vec::new();
    for (fi, &[a, b, c]) in faces.iter().enumerate() {
        let mut local = HashMap::new();
        for i in 0..=freq {
            for j in 0..=freq - i {
                let w = [(a, freq - i - j), (b, i), (c, j)];
                let nonzero: Vec<_> = w.iter().filter(|x| x.1 > 0).collect();
                let key = match nonzero.as_slice() {
                    [only] => Key::Corner(only.0),
                    [x, y] => {
                        let (lo, hi) = if x.0 < y.0 { (x, y) } else { (y, x) };
                        Key::Edge(lo.0, hi.0, hi.1)
                    }
                    _ => Key::Inner(fi, i, j),
                };
                let id = *ids.entry(key).or_insert_with(|| {
                    let p = w
                        .iter()
                        .fold(Point3::ORIGIN, |acc, &(v, k)| acc + corners[v] * k as f64)
                        / freq as f64;
                    pos.push(p);
                    pos.len() - 1
                });
                local.insert((i, j), id);
            }
        }
        for i in 0..freq {
            for j in 0..freq - i {
                tris.push([local[&(i, j)], local[&(i + 1, j)], local[&(i, j + 1)]]);
                if i + j + 1 < freq {
                    tris.push([
                        local[&(i + 1, j)],
                        local[&(i + 1, j + 1)],
                        local[&(i, j + 1)],
                    ]);
                }
            }
        }
    }
    (pos, tris)
}

/// Recursive-subdivision icosphere of the given level (frequency `2^level`),
/// vertices on the sphere, no jitter.
pub fn icosphere(radius: f64, level: u32) -> Result<TriangleMesh, SurfaceError> {
    let (pos, tris) = subdivided_icosahedron(1 << level);
    let pos: Vec<Point3> = pos.iter().map(|&p| p / p.norm() * radius).collect();
    Ok(TriangleMesh::build(&pos, &tris)?)
}

/// Smallest icosphere level whose largest circumradius is at most
/// `epsilon * radius`.
pub fn icosphere_level_for(radius: f64, epsilon: f64) -> Result<u32, SurfaceError> {
    for level in 0..=10 {
        let m = icosphere(radius, level)?;
        if max_circumradius(&m) <= epsilon * radius {
            return Ok(level);
        }
    }
    Err(SurfaceError::UnachievableSpec(format!(
        "epsilon {epsilon} needs more than 10 levels"
    )))
}

/// Unit vector tangent basis at unit vector `n`.
fn tangent_basis(n: Point3) -> (Point3, Point3) {
    let helper = if n.x.abs() < 0.9 {
        Point3::new(1.0, 0.0, 0.0)
    } else {
        Point3::new(0.0, 1.0, 0.0)
    };
    let t1 = n.cross(helper);
    let t1 = t1 / t1.norm();
    (t1, n.cross(t1))
}

fn jittered_sphere(
    radius: f64,
    freq: usize,
    jitter: f64,
    seed: u64,
) -> Result<TriangleMesh, SurfaceError> {
    let (pos, tris) = subdivided_icosahedron(freq);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Edge length of the unit icosahedron is about 1.0515.
    let spacing = 1.0515 / freq as f64;
    let pos: Vec<Point3> = pos
        .iter()
        .map(|&p| {
            let n = p / p.norm();
            let (t1, t2) = tangent_basis(n);
            // Uniform in the disk of radius jitter * spacing.
            let r = jitter * spacing * rng.gen::<f64>().sqrt();
            let a = rng.gen::<f64>() * TWO_PI;
            let q = n + t1 * (r * a.cos()) + t2 * (r * a.sin());
            q / q.norm() * radius
        })
        .collect();
    let mut mesh = TriangleMesh::build(&pos, &tris)?;
    make_locally_convex(&mut mesh);
    Ok(mesh)
}

/// Flips every reflex edge until the surface is locally convex. For points
/// on a sphere this yields the convex hull, whose faces have empty diametric
/// balls.
fn make_locally_convex(mesh: &mut TriangleMesh) {
    let reflex = |m: &TriangleMesh, e: EdgeId| {
        let [p, q] = m.edge_vertices(e);
        let [r, s] = m.edge_apexes(e);
        let (p, q, r, s) = (m.position(p), m.position(q), m.position(r), m.position(s));
        let n = (q - p).cross(r - p);
        let scale = (q - p).norm() * (r - p).norm() * (s - p).norm();
        n.dot(s - p) > 1e-12 * scale
    };
    let mut stack: Vec<EdgeId> = mesh.edges().collect();
    let mut budget = 10 * mesh.edge_count() * mesh.edge_count();
    while let Some(e) = stack.pop() {
        if budget == 0 {
            break;
        }
        if !reflex(mesh, e) {
            continue;
        }
        let handle = mesh.edge_handle(e);
        if mesh.flip_edge(handle).is_ok() {
            budget -= 1;
            for f in mesh.edge_faces(e) {
                stack.extend(mesh.face_edges(f).into_iter().filter(|&x| x != e));
            }
        }
    }
}

/// Inverse of `W(u) = 1.5 u - sin(u) / 2` on `[0, 2 pi]`, the cumulative
/// weight of `w(u) = 1 + (1 - cos u) / 2`.
fn graded_u(target: f64) -> f64 {
    let mut u = target / 1.5;
    for _ in 0..60 {
        let f = 1.5 * u - 0.5 * u.sin() - target;
        let step = f / (1.5 - 0.5 * u.cos());
        u -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    u
}

fn torus_point(major: f64, minor: f64, u: f64, v: f64) -> Point3 {
    let a = major + minor * v.cos();
    Point3::new(a * u.cos(), a * u.sin(), minor * v.sin())
}

fn torus_grid(
    major: f64,
    minor: f64,
    nu: usize,
    nv: usize,
    graded: bool,
    jitter: f64,
    seed: u64,
) -> Result<TriangleMesh, SurfaceError> {
    let us: Vec<f64> = (0..=nu)
        .map(|i| {
            let t = i as f64 / nu as f64;
            if graded {
                graded_u(3.0 * PI * t)
            } else {
                TWO_PI * t
            }
        })
        .collect();
    let dv = TWO_PI / nv as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let du = us[i + 1] - us[i];
            let du_prev = if i == 0 {
                us[nu] - us[nu - 1]
            } else {
                us[i] - us[i - 1]
            };
            let half = 0.5 * du.min(du_prev);
            let u = us[i] + jitter * half * rng.gen_range(-1.0..1.0);
            let v = j as f64 * dv + jitter * 0.5 * dv * rng.gen_range(-1.0..1.0);
            pos.push(torus_point(major, minor, u, v));
        }
    }
    let id = |i: usize, j: usize| (j % nv) * nu + (i % nu);
    let radius = |vs: [usize; 3]| {
        let t = geometry::Triangle::new(pos[vs[0]], pos[vs[1]], pos[vs[2]]);
        geometry::circumradius(&t).unwrap_or(f64::INFINITY)
    };
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let ac = radius([a, b, c]).max(radius([a, c, d]));
            let bd = radius([a, b, d]).max(radius([b, c, d]));
            if ac <= bd {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    Ok(TriangleMesh::build(&pos, &tris)?)
}

/// Applies `k` random flips, each keeping both new circumradii at most
/// `max_radius` and leaving at least one of the two new faces locally
/// stabbed. Returns the records of the flips, in order.
pub fn perturb_anti_delaunay(
    mesh: &mut TriangleMesh,
    k: usize,
    seed: u64,
    max_radius: f64,
) -> Result<Vec<FlipRecord>, SurfaceError> {
    let mut records = Vec::with_capacity(k);
    if k == 0 {
        return Ok(records);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<EdgeId> = mesh.edges().collect();
    order.shuffle(&mut rng);
    let mut touched = vec![false; mesh.edge_count()];
    for e in order {
        if records.len() == k {
            break;
        }
        if touched[e.index()] {
            continue;
        }
        let handle = mesh.edge_handle(e);
        if mesh.check_flip(handle).is_err() {
            continue;
        }
        let [p, q] = mesh.edge_vertices(e);
        let [r, s] = mesh.edge_apexes(e);
        let new_max = [[r, p, s], [s, q, r]]
            .into_iter()
            .map(|vs: [VertexId; 3]| {
                geometry::circumradius(&mesh.triangle(canonical_rotation(vs)))
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        if new_max > max_radius {
            continue;
        }
        let rec = mesh.flip_edge(handle).expect("flip guards checked");
        let stabbed = mesh
            .edge_faces(e)
            .into_iter()
            .any(|f| predicates::is_locally_stabbed(mesh, f, TAU).is_some());
        if !stabbed {
            mesh.flip_edge(rec.edge).expect("flipping back is legal");
            continue;
        }
        // Keep later picks from undoing or stacking on this one.
        for f in mesh.edge_faces(e) {
            for x in mesh.face_edges(f) {
                touched[x.index()] = true;
            }
        }
        records.push(rec);
    }
    if records.len() < k {
        return Err(SurfaceError::CannotPerturb {
            done: records.len(),
            requested: k,
        });
    }
    Ok(records)
}
