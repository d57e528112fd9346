//! Stabbing and flippability predicates.
//!
//! A vertex stabs a ball when it lies strictly inside it. A face is stabbed
//! when some mesh vertex stabs its diametric ball, locally stabbed when the
//! stabbing vertex is one of its three neighbor apexes, and `beta`-stabbed
//! when a vertex lies inside both its `beta`- and `(-beta)`-balls.
//!
//! "Strictly inside" carries a relative margin: a vertex stabs a ball of
//! radius `R` only when its power distance is below `-tau * R^2`.
//!
//! For the lens test we use the identity
//! `pow(B(+-beta), x) = pow(D, x) -+ 2 beta h`, where `h` is the signed height
//! of `x` above the face plane, so `x` is in both balls iff
//! `pow(D, x) + 2 beta |h| < 0`. At `beta = 0` this is exactly the diametric
//! ball test. The brute-force scans evaluate the balls directly instead.

use serde::Serialize;

use crate::geometry::{self, Ball, Point3, UnitVector3};
use crate::mesh::{EdgeId, FaceHandle, FaceId, HalfEdgeId, TriangleMesh, VertexId};

/// Default relative strict-inside margin.
pub const TAU: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabKind {
    Stabbed,
    LocallyStabbed,
    BetaStabbed { beta: f64 },
    LocallyBetaStabbed { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabReport {
    pub face: FaceHandle,
    pub witness: VertexId,
    pub kind: StabKind,
    /// Power distance of the witness to the face's diametric ball.
    pub power: f64,
}

/// Geometry of one face needed by the predicates.
#[derive(Debug, Clone, Copy)]
pub struct FaceGeometry {
    pub ball: Ball,
    pub normal: UnitVector3,
}

impl FaceGeometry {
    pub fn of(mesh: &TriangleMesh, f: FaceId) -> Option<Self> {
        let t = mesh.face_triangle(f);
        let ball = geometry::diametric_ball(&t).ok()?;
        let normal = geometry::triangle_normal(&t).ok()?;
        Some(FaceGeometry { ball, normal })
    }

    /// `max(pow(beta-ball, x), pow(-beta-ball, x))`.
    #[inline]
    pub fn lens_power(&self, x: Point3, beta: f64) -> f64 {
        let d = x - self.ball.center;
        let pow = d.norm_squared() - self.ball.radius * self.ball.radius;
        if beta == 0.0 {
            pow
        } else {
            pow + 2.0 * beta * self.normal.dot(d).abs()
        }
    }

    /// Squared radius of the `beta`-ball.
    #[inline]
    pub fn lens_radius_squared(&self, beta: f64) -> f64 {
        self.ball.radius * self.ball.radius + beta * beta
    }

    /// Does `x` lie strictly inside the lens (the diametric ball at `beta = 0`)?
    #[inline]
    pub fn stabbed_by(&self, x: Point3, beta: f64, tau: f64) -> bool {
        self.lens_power(x, beta) < -tau * self.lens_radius_squared(beta)
    }
}

/// Uniform grid over the mesh bounding box mapping cells to vertices.
///
/// Vertices never move, so the grid stays correct after any number of flips;
/// the cell size only affects how many candidates a query visits.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    origin: Point3,
    cell: f64,
    dims: [usize; 3],
    cells: Vec<Vec<VertexId>>,
    built_for_radius: f64,
}

impl SpatialIndex {
    /// Builds a grid with cell size twice the largest circumradius.
    pub fn build(mesh: &TriangleMesh) -> Self {
        let max_rho = mesh
            .faces()
            .filter_map(|f| mesh.face_radius(f).ok())
            .fold(0.0, f64::max);
        Self::with_cell_size(mesh, 2.0 * max_rho, max_rho)
    }

    fn with_cell_size(mesh: &TriangleMesh, cell: f64, built_for_radius: f64) -> Self {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for p in mesh.positions() {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        let extent = hi - lo;
        let span = extent.x.max(extent.y).max(extent.z);
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            span.max(1.0)
        };
        // Keep the grid at most a few cells per vertex.
        let budget = (8 * mesh.vertex_count()).max(64) as f64;
        loop {
            let count = |e: f64| (e / cell).floor() + 1.0;
            if count(extent.x) * count(extent.y) * count(extent.z) <= budget {
                break;
            }
            cell *= 1.5;
        }
        let dims = [extent.x, extent.y, extent.z].map(|e| (e / cell).floor() as usize + 1);
        let mut index = SpatialIndex {
            origin: lo,
            cell,
            dims,
            cells: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
            built_for_radius,
        };
        for v in mesh.vertices() {
            let c = index.cell_of(mesh.position(v));
            let flat = index.flat(c);
            index.cells[flat].push(v);
        }
        index
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// True once the largest circumradius has halved since the grid was built.
    pub fn needs_rebuild(&self, current_max_radius: f64) -> bool {
        current_max_radius <= 0.5 * self.built_for_radius
    }

    fn axis_cell(&self, value: f64, axis: usize) -> isize {
        let o = [self.origin.x, self.origin.y, self.origin.z][axis];
        ((value - o) / self.cell).floor() as isize
    }

    fn cell_of(&self, p: Point3) -> [usize; 3] {
        let a = p.to_array();
        let mut out = [0; 3];
        for k in 0..3 {
            out[k] = self.axis_cell(a[k], k).clamp(0, self.dims[k] as isize - 1) as usize;
        }
        out
    }

    #[inline]
    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Calls `visit` for every vertex whose cell overlaps the ball's bounding
    /// box: a superset of the vertices inside the ball.
    pub fn for_each_candidate(&self, ball: &Ball, mut visit: impl FnMut(VertexId)) {
        let c = ball.center.to_array();
        let mut range = [(0usize, 0usize); 3];
        for k in 0..3 {
            let lo = self.axis_cell(c[k] - ball.radius, k);
            let hi = self.axis_cell(c[k] + ball.radius, k);
            let max = self.dims[k] as isize - 1;
            if hi < 0 || lo > max {
                return;
            }
            range[k] = (lo.max(0) as usize, hi.min(max) as usize);
        }
        for z in range[2].0..=range[2].1 {
            for y in range[1].0..=range[1].1 {
                for x in range[0].0..=range[0].1 {
                    for &v in &self.cells[self.flat([x, y, z])] {
                        visit(v);
                    }
                }
            }
        }
    }

    /// Candidate vertices for `ball`, in cell order.
    pub fn query(&self, ball: &Ball) -> Vec<VertexId> {
        let mut out = Vec::new();
        self.for_each_candidate(ball, |v| out.push(v));
        out
    }

    /// Number of vertices stored; equals the mesh vertex count.
    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn better(candidate: (f64, VertexId), best: Option<(f64, VertexId)>) -> bool {
    match best {
        None => true,
        Some((score, v)) => candidate.0 < score || (candidate.0 == score && candidate.1 < v),
    }
}

fn report(
    mesh: &TriangleMesh,
    f: FaceId,
    geom: &FaceGeometry,
    best: Option<(f64, VertexId)>,
    kind: StabKind,
) -> Option<StabReport> {
    best.map(|(_, witness)| StabReport {
        face: mesh.face_handle(f),
        witness,
        kind,
        power: geom.ball.power(mesh.position(witness)),
    })
}

/// Deepest vertex (by lens power) among `candidates` that stabs face `f`.
fn deepest<I: IntoIterator<Item = VertexId>>(
    mesh: &TriangleMesh,
    f: FaceId,
    geom: &FaceGeometry,
    beta: f64,
    tau: f64,
    candidates: I,
) -> Option<(f64, VertexId)> {
    let own = mesh.face_vertices(f);
    let limit = -tau * geom.lens_radius_squared(beta);
    let mut best = None;
    for v in candidates {
        if own.contains(&v) {
            continue;
        }
        let score = geom.lens_power(mesh.position(v), beta);
        if score < limit && better((score, v), best) {
            best = Some((score, v));
        }
    }
    best
}

/// Is face `f`'s diametric ball stabbed by any vertex? Returns the witness of
/// minimum power distance.
pub fn is_stabbed(
    mesh: &TriangleMesh,
    f: FaceId,
    index: &SpatialIndex,
    tau: f64,
) -> Option<StabReport> {
    is_beta_stabbed(mesh, f, 0.0, index, tau)
}

/// Like [`is_stabbed`], restricted to the three neighbor apexes of `f`.
pub fn is_locally_stabbed(mesh: &TriangleMesh, f: FaceId, tau: f64) -> Option<StabReport> {
    is_locally_beta_stabbed(mesh, f, 0.0, tau)
}

/// Is some vertex inside both the `beta`- and `(-beta)`-balls of `f`?
pub fn is_beta_stabbed(
    mesh: &TriangleMesh,
    f: FaceId,
    beta: f64,
    index: &SpatialIndex,
    tau: f64,
) -> Option<StabReport> {
    let geom = FaceGeometry::of(mesh, f)?;
    let mut candidates = Vec::new();
    index.for_each_candidate(&geom.ball, |v| candidates.push(v));
    let best = deepest(mesh, f, &geom, beta, tau, candidates);
    let kind = if beta == 0.0 {
        StabKind::Stabbed
    } else {
        StabKind::BetaStabbed { beta }
    };
    report(mesh, f, &geom, best, kind)
}

pub fn is_locally_beta_stabbed(
    mesh: &TriangleMesh,
    f: FaceId,
    beta: f64,
    tau: f64,
) -> Option<StabReport> {
    let geom = FaceGeometry::of(mesh, f)?;
    let best = deepest(mesh, f, &geom, beta, tau, mesh.neighbor_vertices(f));
    let kind = if beta == 0.0 {
        StabKind::LocallyStabbed
    } else {
        StabKind::LocallyBetaStabbed { beta }
    };
    report(mesh, f, &geom, best, kind)
}

/// Does the apex across half-edge `h` stab (the `beta`-lens of) `h`'s face?
pub fn apex_stabs(mesh: &TriangleMesh, h: HalfEdgeId, beta: f64, tau: f64) -> bool {
    let f = mesh.half_edge_face(h);
    let apex = mesh.apex(mesh.twin(h));
    if mesh.face_vertices(f).contains(&apex) {
        return false;
    }
    match FaceGeometry::of(mesh, f) {
        Some(g) => g.stabbed_by(mesh.position(apex), beta, tau),
        None => false,
    }
}

/// An edge `pq` between `pqr` and `pqs` is flippable when `s` stabs `pqr` or
/// `r` stabs `pqs` (lens of width `beta`; `beta = 0` is the diametric ball).
pub fn is_edge_flippable(mesh: &TriangleMesh, e: EdgeId, beta: f64, tau: f64) -> bool {
    let h = mesh.edge_half_edge(e);
    apex_stabs(mesh, h, beta, tau) || apex_stabs(mesh, mesh.twin(h), beta, tau)
}

/// Every edge incident to a face that is locally stabbed through that edge.
pub fn flippable_edges(mesh: &TriangleMesh, tau: f64) -> Vec<EdgeId> {
    beta_flippable_edges(mesh, 0.0, tau)
}

pub fn beta_flippable_edges(mesh: &TriangleMesh, beta: f64, tau: f64) -> Vec<EdgeId> {
    mesh.edges()
        .filter(|&e| is_edge_flippable(mesh, e, beta, tau))
        .collect()
}

/// Cheap exact rejection: a point outside the ball's x-extent has
/// non-negative power distance to it.
#[inline]
fn outside_slab(ball: &Ball, x: Point3) -> bool {
    let dx = x.x - ball.center.x;
    dx * dx >= ball.radius * ball.radius
}

/// Exhaustive O(V F) scan: one report per stabbed face with its minimum-power
/// witness, in face order.
pub fn brute_force_stab_scan(mesh: &TriangleMesh, tau: f64) -> Vec<StabReport> {
    let positions: Vec<Point3> = mesh.positions().collect();
    let mut out = Vec::new();
    for f in mesh.faces() {
        let Ok(ball) = mesh.face_ball(f) else {
            continue;
        };
        let own = mesh.face_vertices(f);
        let limit = -tau * ball.radius * ball.radius;
        let mut best: Option<(f64, VertexId)> = None;
        for (i, &x) in positions.iter().enumerate() {
            if outside_slab(&ball, x) {
                continue;
            }
            let v = VertexId(i as u32);
            if own.contains(&v) {
                continue;
            }
            let pow = ball.power(x);
            if pow < limit && better((pow, v), best) {
                best = Some((pow, v));
            }
        }
        if let Some((power, witness)) = best {
            out.push(StabReport {
                face: mesh.face_handle(f),
                witness,
                kind: StabKind::Stabbed,
                power,
            });
        }
    }
    out
}

/// Exhaustive scan for `beta`-stabbed faces using the two balls directly.
pub fn brute_force_beta_scan(mesh: &TriangleMesh, beta: f64, tau: f64) -> Vec<StabReport> {
    let positions: Vec<Point3> = mesh.positions().collect();
    let mut out = Vec::new();
    for f in mesh.faces() {
        let t = mesh.face_triangle(f);
        let (Ok(up), Ok(down), Ok(d)) = (
            geometry::beta_ball(&t, beta),
            geometry::beta_ball(&t, -beta),
            geometry::diametric_ball(&t),
        ) else {
            continue;
        };
        let own = mesh.face_vertices(f);
        let limit = -tau * up.radius * up.radius;
        let mut best: Option<(f64, VertexId)> = None;
        for (i, &x) in positions.iter().enumerate() {
            if outside_slab(&up, x) || outside_slab(&down, x) {
                continue;
            }
            let v = VertexId(i as u32);
            if own.contains(&v) {
                continue;
            }
            let score = up.power(x).max(down.power(x));
            if score < limit && better((score, v), best) {
                best = Some((score, v));
            }
        }
        if let Some((_, witness)) = best {
            out.push(StabReport {
                face: mesh.face_handle(f),
                witness,
                kind: StabKind::BetaStabbed { beta },
                power: d.power(mesh.position(witness)),
            });
        }
    }
    out
}

/// Small hand-built meshes with known stabbing structure.
pub mod fixtures {
    use crate::geometry::Point3;

    /// Planar quad `p=(0,0,0), q=(1,0,0), r=(0.5,0.8,0), s=(0.5,-0.1,0)` with
    /// faces `pqr` (index 0) and `qps` (index 1), closed by an apex below the
    /// plane. `s` stabs `pqr` and `r` stabs `pqs`.
    pub fn stabbed_quad() -> (Vec<Point3>, Vec<[usize; 3]>) {
        let pos = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, 0.8, 0.0),
            Point3::new(0.5, -0.1, 0.0),
            Point3::new(0.5, 0.3, -1.0),
        ];
        let tris = vec![
            [0, 1, 2],
            [1, 0, 3],
            [2, 1, 4],
            [0, 2, 4],
            [3, 0, 4],
            [1, 3, 4],
        ];
        (pos, tris)
    }

    /// Octahedron whose top vertex is pulled down to `(0, 0, top)`.
    pub fn pulled_octahedron(top: f64) -> (Vec<Point3>, Vec<[usize; 3]>) {
        let (mut pos, tris) = crate::mesh::fixtures::octahedron();
        pos[4] = Point3::new(0.0, 0.0, top);
        (pos, tris)
    }
}
