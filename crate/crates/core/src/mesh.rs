//! Closed, oriented, manifold triangle meshes stored as half-edges.
//!
//! Half-edges are allocated in twin pairs: edge `e` owns half-edges `2e` and
//! `2e + 1`. The twin link is still stored explicitly so that [`TriangleMesh::validate`]
//! can check it like every other pointer.
//!
//! Flips are pure pointer surgery on the six half-edges and two faces of the
//! quad. Vertices never move and nothing is allocated, so vertex, edge and face
//! counts are fixed after construction. Edge and face slots are reused by a
//! flip; each slot carries a generation counter that is bumped whenever its
//! meaning changes, which lets callers holding an [`EdgeHandle`] or
//! [`FaceHandle`] detect that it went stale.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, dihedral_angle, Ball, GeometryError, Point3, Triangle, UnitVector3};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfEdgeId(pub u32);

macro_rules! index_impls {
    ($($t:ty),*) => {$(
        impl $t {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    )*};
}
index_impls!(VertexId, EdgeId, FaceId, HalfEdgeId);

/// Vertex handles never go stale: vertices are neither added nor removed.
pub type VertexHandle = VertexId;

/// An edge slot together with the generation it was observed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeHandle {
    pub id: EdgeId,
    pub generation: u32,
}

/// A face slot together with the generation it was observed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceHandle {
    pub id: FaceId,
    pub generation: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("face {face} references vertex {index}, but there are only {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },
    #[error("vertex {vertex} has a non-finite position")]
    NonFinitePosition { vertex: usize },
    #[error("faces {first} and {second} share all three vertices")]
    DuplicateFace { first: usize, second: usize },
    #[error("edge ({u}, {v}) has {count} incident faces")]
    NonManifoldEdge { u: usize, v: usize, count: usize },
    #[error("edge ({u}, {v}) is on an open boundary")]
    OpenBoundary { u: usize, v: usize },
    #[error("faces sharing edge ({u}, {v}) traverse it in the same direction")]
    InconsistentOrientation { u: usize, v: usize },
    #[error("vertex {vertex} has a non-manifold neighborhood")]
    NonManifoldVertex { vertex: usize },
    #[error("vertex {vertex} is not used by any face")]
    UnreferencedVertex { vertex: usize },
    #[error("mesh has no faces")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlipError {
    #[error("edge handle {0:?} is stale")]
    StaleHandle(EdgeHandle),
    #[error("vertices {r} and {s} are already joined by an edge")]
    EdgeExists { r: VertexId, s: VertexId },
    #[error("flip would create a degenerate triangle")]
    WouldDegenerate,
}

/// What an edge flip did. Vertex names follow the quad convention: the edge
/// `pq` shared by `pqr` and `pqs` was replaced by `rs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    /// Handle of the new edge `rs`.
    pub edge: EdgeHandle,
    pub p: VertexId,
    pub q: VertexId,
    pub r: VertexId,
    pub s: VertexId,
    /// Circumradii of `pqr` and `pqs`.
    pub old_radii: [f64; 2],
    /// Circumradii of `prs` and `qrs`.
    pub new_radii: [f64; 2],
    /// Angle between the oriented normals of `pqr` and `pqs` before the flip.
    pub dihedral_before: f64,
}

impl FlipRecord {
    pub fn old_max_radius(&self) -> f64 {
        self.old_radii[0].max(self.old_radii[1])
    }

    pub fn new_max_radius(&self) -> f64 {
        self.new_radii[0].max(self.new_radii[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HalfEdge {
    origin: u32,
    twin: u32,
    next: u32,
    face: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Vertex {
    position: Point3,
    normal: Option<UnitVector3>,
    half_edge: u32,
}

/// Half-edge triangle mesh of a closed oriented 2-manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vertex>,
    half_edges: Vec<HalfEdge>,
    face_half_edge: Vec<u32>,
    edge_generation: Vec<u32>,
    face_generation: Vec<u32>,
}

/// A single invariant violation reported by [`TriangleMesh::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    BadIndex,
    TwinNotInvolution,
    TwinNotPaired,
    TwinSameDirection,
    FaceNotTriangle,
    FaceMismatch,
    VertexHalfEdge,
    NonManifoldVertex,
    DuplicateEdge,
    DuplicateFace,
    DegenerateFace,
    Euler,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// (face, local corner, origin vertex) of one directed edge.
type EdgeUse = (usize, usize, usize);

impl TriangleMesh {
    /// Builds a mesh from positions and vertex-index triples, establishing all
    /// invariants or failing with the first problem found.
    pub fn build(positions: &[Point3], triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = positions.len();
        for (i, p) in positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(MeshError::NonFinitePosition { vertex: i });
            }
        }
        let mut seen_faces: HashMap<[usize; 3], usize> = HashMap::with_capacity(triangles.len());
        for (f, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        face: f,
                        index: i,
                        count: nv,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(MeshError::RepeatedVertex { face: f });
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(&first) = seen_faces.get(&key) {
                return Err(MeshError::DuplicateFace { first, second: f });
            }
            seen_faces.insert(key, f);
        }

        // Undirected edge -> its directed occurrences.
        let mut edge_uses: HashMap<(usize, usize), Vec<EdgeUse>> =
            HashMap::with_capacity(triangles.len() * 3 / 2);
        let mut edge_order: Vec<(usize, usize)> = Vec::with_capacity(triangles.len() * 3 / 2);
        for (f, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let uses = edge_uses.entry(key).or_insert_with(|| {
                    edge_order.push(key);
                    Vec::new()
                });
                uses.push((f, k, a));
            }
        }
        // Report errors in a deterministic order.
        for &(u, v) in &edge_order {
            let uses = &edge_uses[&(u, v)];
            match uses.len() {
                1 => return Err(MeshError::OpenBoundary { u, v }),
                2 => {
                    if uses[0].2 == uses[1].2 {
                        return Err(MeshError::InconsistentOrientation { u, v });
                    }
                }
                n => return Err(MeshError::NonManifoldEdge { u, v, count: n }),
            }
        }

        let nf = triangles.len();
        let mut corner_half_edge = vec![NONE; nf * 3];
        let mut half_edges = vec![
            HalfEdge {
                origin: NONE,
                twin: NONE,
                next: NONE,
                face: NONE
            };
            edge_order.len() * 2
        ];
        for (e, key) in edge_order.iter().enumerate() {
            let uses = &edge_uses[key];
            for (slot, &(f, k, from)) in uses.iter().enumerate() {
                let h = 2 * e + slot;
                corner_half_edge[3 * f + k] = h as u32;
                half_edges[h].origin = from as u32;
                half_edges[h].face = f as u32;
                half_edges[h].twin = (h ^ 1) as u32;
            }
        }
        for f in 0..nf {
            for k in 0..3 {
                let h = corner_half_edge[3 * f + k] as usize;
                half_edges[h].next = corner_half_edge[3 * f + (k + 1) % 3];
            }
        }
        let face_half_edge: Vec<u32> = (0..nf).map(|f| corner_half_edge[3 * f]).collect();

        let mut vertices: Vec<Vertex> = positions
            .iter()
            .map(|&position| Vertex {
                position,
                normal: None,
                half_edge: NONE,
            })
            .collect();
        let mut outgoing = vec![0usize; nv];
        for (h, he) in half_edges.iter().enumerate() {
            let v = he.origin as usize;
            outgoing[v] += 1;
            if vertices[v].half_edge == NONE {
                vertices[v].half_edge = h as u32;
            }
        }
        let mesh = TriangleMesh {
            vertices,
            edge_generation: vec![0; half_edges.len() / 2],
            half_edges,
            face_half_edge,
            face_generation: vec![0; nf],
        };
        for (v, &count) in outgoing.iter().enumerate() {
            if count == 0 {
                return Err(MeshError::UnreferencedVertex { vertex: v });
            }
            if mesh.vertex_fan_len(v as u32) != count {
                return Err(MeshError::NonManifoldVertex { vertex: v });
            }
        }
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.half_edges.len() / 2
    }

    pub fn face_count(&self) -> usize {
        self.face_half_edge.len()
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = VertexId> {
        (0..self.vertices.len() as u32).map(VertexId)
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = EdgeId> {
        (0..self.edge_count() as u32).map(EdgeId)
    }

    pub fn faces(&self) -> impl ExactSizeIterator<Item = FaceId> {
        (0..self.face_count() as u32).map(FaceId)
    }

    #[inline]
    pub fn position(&self, v: VertexId) -> Point3 {
        self.vertices[v.index()].position
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = Point3> + '_ {
        self.vertices.iter().map(|v| v.position)
    }

    pub fn vertex_normal(&self, v: VertexId) -> Option<UnitVector3> {
        self.vertices[v.index()].normal
    }

    pub fn set_vertex_normal(&mut self, v: VertexId, normal: Option<UnitVector3>) {
        self.vertices[v.index()].normal = normal;
    }

    #[inline]
    fn he(&self, h: u32) -> &HalfEdge {
        &self.half_edges[h as usize]
    }

    #[inline]
    pub fn twin(&self, h: HalfEdgeId) -> HalfEdgeId {
        HalfEdgeId(self.he(h.0).twin)
    }

    #[inline]
    pub fn next(&self, h: HalfEdgeId) -> HalfEdgeId {
        HalfEdgeId(self.he(h.0).next)
    }

    #[inline]
    pub fn origin(&self, h: HalfEdgeId) -> VertexId {
        VertexId(self.he(h.0).origin)
    }

    #[inline]
    pub fn half_edge_face(&self, h: HalfEdgeId) -> FaceId {
        FaceId(self.he(h.0).face)
    }

    #[inline]
    pub fn edge_of(&self, h: HalfEdgeId) -> EdgeId {
        EdgeId(h.0 / 2)
    }

    #[inline]
    pub fn edge_half_edge(&self, e: EdgeId) -> HalfEdgeId {
        HalfEdgeId(2 * e.0)
    }

    #[inline]
    pub fn face_half_edge(&self, f: FaceId) -> HalfEdgeId {
        HalfEdgeId(self.face_half_edge[f.index()])
    }

    /// The three half-edges of a face, starting at its stored half-edge.
    #[inline]
    pub fn face_half_edges(&self, f: FaceId) -> [HalfEdgeId; 3] {
        let h0 = self.face_half_edge[f.index()];
        let h1 = self.he(h0).next;
        let h2 = self.he(h1).next;
        [HalfEdgeId(h0), HalfEdgeId(h1), HalfEdgeId(h2)]
    }

    #[inline]
    pub fn face_vertices(&self, f: FaceId) -> [VertexId; 3] {
        self.face_half_edges(f).map(|h| self.origin(h))
    }

    /// Face vertices rotated so the smallest vertex id comes first. Geometry is
    /// always evaluated in this order so a face's radius does not depend on
    /// which half-edge happens to be stored for it.
    #[inline]
    pub fn canonical_face_vertices(&self, f: FaceId) -> [VertexId; 3] {
        canonical_rotation(self.face_vertices(f))
    }

    pub fn face_edges(&self, f: FaceId) -> [EdgeId; 3] {
        self.face_half_edges(f).map(|h| self.edge_of(h))
    }

    pub fn triangle(&self, vs: [VertexId; 3]) -> Triangle {
        Triangle::new(
            self.position(vs[0]),
            self.position(vs[1]),
            self.position(vs[2]),
        )
    }

    #[inline]
    pub fn face_triangle(&self, f: FaceId) -> Triangle {
        self.triangle(self.canonical_face_vertices(f))
    }

    pub fn face_ball(&self, f: FaceId) -> Result<Ball, GeometryError> {
        geometry::diametric_ball(&self.face_triangle(f))
    }

    pub fn face_radius(&self, f: FaceId) -> Result<f64, GeometryError> {
        geometry::circumradius(&self.face_triangle(f))
    }

    pub fn face_normal(&self, f: FaceId) -> Result<UnitVector3, GeometryError> {
        geometry::triangle_normal(&self.face_triangle(f))
    }

    /// Both endpoints of an edge, in the direction of its even half-edge.
    pub fn edge_vertices(&self, e: EdgeId) -> [VertexId; 2] {
        let h = self.edge_half_edge(e);
        [self.origin(h), self.origin(self.twin(h))]
    }

    /// The two faces incident to an edge.
    pub fn edge_faces(&self, e: EdgeId) -> [FaceId; 2] {
        let h = self.edge_half_edge(e);
        [self.half_edge_face(h), self.half_edge_face(self.twin(h))]
    }

    /// Vertex of the face on `h`'s side that is not on `h`.
    #[inline]
    pub fn apex(&self, h: HalfEdgeId) -> VertexId {
        self.origin(self.next(self.next(h)))
    }

    /// Opposite vertices `[r, s]`: `r` is the apex on the even half-edge's face,
    /// `s` the apex across.
    pub fn edge_apexes(&self, e: EdgeId) -> [VertexId; 2] {
        let h = self.edge_half_edge(e);
        [self.apex(h), self.apex(self.twin(h))]
    }

    /// Angle between the oriented normals of the two faces at `e`.
    pub fn edge_dihedral(&self, e: EdgeId) -> Result<f64, GeometryError> {
        let [f0, f1] = self.edge_faces(e);
        dihedral_angle(&self.face_triangle(f0), &self.face_triangle(f1))
    }

    /// For each half-edge of `f` (in stored order), the apex of the face on
    /// the other side.
    pub fn neighbor_vertices(&self, f: FaceId) -> [VertexId; 3] {
        self.face_half_edges(f).map(|h| self.apex(self.twin(h)))
    }

    pub fn edge_handle(&self, e: EdgeId) -> EdgeHandle {
        EdgeHandle {
            id: e,
            generation: self.edge_generation[e.index()],
        }
    }

    pub fn face_handle(&self, f: FaceId) -> FaceHandle {
        FaceHandle {
            id: f,
            generation: self.face_generation[f.index()],
        }
    }

    pub fn is_edge_live(&self, h: EdgeHandle) -> bool {
        self.edge_generation.get(h.id.index()) == Some(&h.generation)
    }

    pub fn is_face_live(&self, h: FaceHandle) -> bool {
        self.face_generation.get(h.id.index()) == Some(&h.generation)
    }

    /// Outgoing half-edges of `v`, rotating through adjacent faces.
    pub fn outgoing(&self, v: VertexId) -> impl Iterator<Item = HalfEdgeId> + '_ {
        let start = self.vertices[v.index()].half_edge;
        let mut cur = Some(start);
        let mut steps = 0usize;
        let limit = self.half_edges.len();
        std::iter::from_fn(move || {
            let h = cur?;
            steps += 1;
            let prev = self.he(self.he(h).next).next;
            let nxt = self.he(prev).twin;
            cur = if nxt == start || steps > limit {
                None
            } else {
                Some(nxt)
            };
            Some(HalfEdgeId(h))
        })
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.outgoing(v).count()
    }

    fn vertex_fan_len(&self, v: u32) -> usize {
        self.outgoing(VertexId(v)).count()
    }

    /// Edge joining `u` and `v`, if any.
    pub fn find_edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.outgoing(u)
            .find(|&h| self.origin(self.twin(h)) == v)
            .map(|h| self.edge_of(h))
    }

    /// Flips the edge `pq` shared by `pqr` and `pqs` into `rs`.
    ///
    /// Rejects the flip when `rs` already exists or when either new triangle
    /// would be degenerate. On success the two face slots now hold `prs` and
    /// `qrs`, and the generations of the edge and both faces are bumped.
    pub fn flip_edge(&mut self, edge: EdgeHandle) -> Result<FlipRecord, FlipError> {
        if !self.is_edge_live(edge) {
            return Err(FlipError::StaleHandle(edge));
        }
        let e = edge.id;
        let h0 = 2 * e.0;
        let h1 = h0 + 1;
        let a1 = self.he(h0).next;
        let a2 = self.he(a1).next;
        let b1 = self.he(h1).next;
        let b2 = self.he(b1).next;
        let p = self.he(h0).origin;
        let q = self.he(h1).origin;
        let r = self.he(a2).origin;
        let s = self.he(b2).origin;
        let (vp, vq, vr, vs) = (VertexId(p), VertexId(q), VertexId(r), VertexId(s));

        let new_radii = self.flip_guard(vp, vq, vr, vs)?;
        let fa = self.he(h0).face;
        let fb = self.he(h1).face;
        let t_pqr = self.face_triangle(FaceId(fa));
        let t_pqs = self.face_triangle(FaceId(fb));
        let old_radii = [
            geometry::circumradius(&t_pqr).unwrap_or(f64::INFINITY),
            geometry::circumradius(&t_pqs).unwrap_or(f64::INFINITY),
        ];
        let dihedral_before = dihedral_angle(&t_pqr, &t_pqs).unwrap_or(std::f64::consts::PI);

        // Face A becomes s -> r -> p, face B becomes r -> s -> q.
        let hs = &mut self.half_edges;
        hs[h0 as usize] = HalfEdge {
            origin: s,
            twin: h1,
            next: a2,
            face: fa,
        };
        hs[a2 as usize].next = b1;
        hs[b1 as usize].next = h0;
        hs[b1 as usize].face = fa;
        hs[h1 as usize] = HalfEdge {
            origin: r,
            twin: h0,
            next: b2,
            face: fb,
        };
        hs[b2 as usize].next = a1;
        hs[a1 as usize].next = h1;
        hs[a1 as usize].face = fb;
        self.face_half_edge[fa as usize] = h0;
        self.face_half_edge[fb as usize] = h1;
        if self.vertices[p as usize].half_edge == h0 {
            self.vertices[p as usize].half_edge = b1;
        }
        if self.vertices[q as usize].half_edge == h1 {
            self.vertices[q as usize].half_edge = a1;
        }
        self.edge_generation[e.index()] = self.edge_generation[e.index()].wrapping_add(1);
        self.face_generation[fa as usize] = self.face_generation[fa as usize].wrapping_add(1);
        self.face_generation[fb as usize] = self.face_generation[fb as usize].wrapping_add(1);

        Ok(FlipRecord {
            edge: self.edge_handle(e),
            p: vp,
            q: vq,
            r: vr,
            s: vs,
            old_radii,
            new_radii,
            dihedral_before,
        })
    }

    /// Would [`flip_edge`](Self::flip_edge) succeed on `edge`? Does not mutate.
    pub fn check_flip(&self, edge: EdgeHandle) -> Result<(), FlipError> {
        if !self.is_edge_live(edge) {
            return Err(FlipError::StaleHandle(edge));
        }
        let h = self.edge_half_edge(edge.id);
        let t = self.twin(h);
        let [r, s] = self.edge_apexes(edge.id);
        self.flip_guard(self.origin(h), self.origin(t), r, s)
            .map(|_| ())
    }

    /// Guards shared by [`check_flip`](Self::check_flip) and
    /// [`flip_edge`](Self::flip_edge); returns the radii of `prs` and `qrs`.
    fn flip_guard(
        &self,
        p: VertexId,
        q: VertexId,
        r: VertexId,
        s: VertexId,
    ) -> Result<[f64; 2], FlipError> {
        if r == s || self.find_edge(r, s).is_some() {
            return Err(FlipError::EdgeExists { r, s });
        }
        let t_prs = self.triangle(canonical_rotation([r, p, s]));
        let t_qrs = self.triangle(canonical_rotation([s, q, r]));
        match (
            geometry::circumradius(&t_prs),
            geometry::circumradius(&t_qrs),
        ) {
            (Ok(a), Ok(b)) => Ok([a, b]),
            _ => Err(FlipError::WouldDegenerate),
        }
    }

    /// Exhaustively checks every structural invariant; empty iff valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, detail: String| out.push(Violation { kind, detail });
        let nh = self.half_edges.len() as u32;
        let nv = self.vertices.len() as u32;
        let nf = self.face_half_edge.len() as u32;

        for (i, he) in self.half_edges.iter().enumerate() {
            if he.origin >= nv || he.twin >= nh || he.next >= nh || he.face >= nf {
                push(
                    ViolationKind::BadIndex,
                    format!("half-edge {i} has an out-of-range link"),
                );
            }
        }
        if !out.is_empty() {
            return out;
        }
        let mut push = |kind, detail: String| out.push(Violation { kind, detail });

        for h in 0..nh {
            let he = self.he(h);
            if self.he(he.twin).twin != h {
                push(
                    ViolationKind::TwinNotInvolution,
                    format!("twin(twin({h})) != {h}"),
                );
            }
            if he.twin != (h ^ 1) {
                push(
                    ViolationKind::TwinNotPaired,
                    format!("half-edge {h} has twin {}", he.twin),
                );
            }
            let tw = self.he(he.twin);
            if tw.origin != self.he(he.next).origin || he.origin == tw.origin {
                push(
                    ViolationKind::TwinSameDirection,
                    format!("half-edge {h} and its twin do not run opposite"),
                );
            }
            let n3 = self.he(self.he(he.next).next).next;
            if n3 != h {
                push(
                    ViolationKind::FaceNotTriangle,
                    format!("next^3({h}) = {n3}"),
                );
            }
            let f = he.face;
            if self.he(he.next).face != f {
                push(
                    ViolationKind::FaceMismatch,
                    format!("half-edge {h} and its next differ in face"),
                );
            }
        }
        for f in 0..nf {
            let h = self.face_half_edge[f as usize];
            if h >= nh || self.he(h).face != f {
                push(
                    ViolationKind::FaceMismatch,
                    format!("face {f} points at foreign half-edge"),
                );
            }
        }

        let mut used = vec![0usize; nv as usize];
        for he in &self.half_edges {
            used[he.origin as usize] += 1;
        }
        for v in 0..nv {
            let h = self.vertices[v as usize].half_edge;
            if h >= nh || self.he(h).origin != v {
                push(
                    ViolationKind::VertexHalfEdge,
                    format!("vertex {v} has a foreign half-edge"),
                );
                continue;
            }
            if self.vertex_fan_len(v) != used[v as usize] {
                push(
                    ViolationKind::NonManifoldVertex,
                    format!("vertex {v} fan does not cover its star"),
                );
            }
        }

        let mut edge_keys = HashSet::with_capacity(self.edge_count());
        for e in self.edges() {
            let [u, v] = self.edge_vertices(e);
            if !edge_keys.insert((u.min(v), u.max(v))) {
                push(
                    ViolationKind::DuplicateEdge,
                    format!("vertices {u} and {v} joined twice"),
                );
            }
        }
        let mut face_keys = HashSet::with_capacity(self.face_count());
        for f in self.faces() {
            let mut key = self.face_vertices(f);
            if key[0] == key[1] || key[1] == key[2] || key[0] == key[2] {
                push(
                    ViolationKind::DegenerateFace,
                    format!("face {f} repeats a vertex"),
                );
            }
            key.sort_unstable();
            if !face_keys.insert(key) {
                push(
                    ViolationKind::DuplicateFace,
                    format!("face {f} duplicates another face"),
                );
            }
        }

        for (component, (v, e, f)) in self.component_counts().into_iter().enumerate() {
            let chi = v as i64 - e as i64 + f as i64;
            if chi > 2 || chi % 2 != 0 {
                push(
                    ViolationKind::Euler,
                    format!("component {component}: V - E + F = {chi} is not 2 - 2g"),
                );
            }
        }
        out
    }

    /// `(V, E, F)` per connected component, ordered by smallest vertex.
    pub fn component_counts(&self) -> Vec<(usize, usize, usize)> {
        let nv = self.vertices.len();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in self.edges() {
            let [u, v] = self.edge_vertices(e);
            let (a, b) = (find(&mut parent, u.index()), find(&mut parent, v.index()));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut counts: Vec<(usize, usize, usize)> = Vec::new();
        let mut comp_of = |parent: &mut Vec<usize>, v: usize, counts: &mut Vec<_>| {
            let root = find(parent, v);
            *slot.entry(root).or_insert_with(|| {
                counts.push((0, 0, 0));
                counts.len() - 1
            })
        };
        for v in 0..nv {
            let c = comp_of(&mut parent, v, &mut counts);
            counts[c].0 += 1;
        }
        for e in self.edges() {
            let c = comp_of(&mut parent, self.edge_vertices(e)[0].index(), &mut counts);
            counts[c].1 += 1;
        }
        for f in self.faces() {
            let c = comp_of(&mut parent, self.face_vertices(f)[0].index(), &mut counts);
            counts[c].2 += 1;
        }
        counts
    }

    /// Euler characteristic of the whole mesh.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    /// Positions and triangles in face order, suitable for writing to disk.
    pub fn to_indexed(&self) -> (Vec<Point3>, Vec<[usize; 3]>) {
        let positions = self.positions().collect();
        let tris = self
            .faces()
            .map(|f| self.face_vertices(f).map(|v| v.index()))
            .collect();
        (positions, tris)
    }

    /// Triangles as sorted vertex triples, sorted; equal for meshes with the
    /// same connectivity regardless of face order.
    pub fn connectivity_signature(&self) -> Vec<[u32; 3]> {
        let mut tris: Vec<[u32; 3]> = self
            .faces()
            .map(|f| {
                let mut t = self.face_vertices(f).map(|v| v.0);
                t.sort_unstable();
                t
            })
            .collect();
        tris.sort_unstable();
        tris
    }

    #[cfg(test)]
    pub(crate) fn corrupt_twin(&mut self, h: usize, twin: u32) {
        self.half_edges[h].twin = twin;
    }
}

/// Rotates a vertex triple so its smallest id is first, keeping cyclic order.
#[inline]
pub fn canonical_rotation(vs: [VertexId; 3]) -> [VertexId; 3] {
    if vs[0] <= vs[1] && vs[0] <= vs[2] {
        vs
    } else if vs[1] <= vs[2] {
        [vs[1], vs[2], vs[0]]
    } else {
        [vs[2], vs[0], vs[1]]
    }
}

/// Small closed meshes used throughout the tests.
pub mod fixtures {
    use crate::geometry::Point3;

    pub fn tetrahedron() -> (Vec<Point3>, Vec<[usize; 3]>) {
        let s = 1.0 / 3f64.sqrt();
        let pos = vec![
            Point3::new(s, s, s),
            Point3::new(s, -s, -s),
            Point3::new(-s, s, -s),
            Point3::new(-s, -s, s),
        ];
        let tris = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        (pos, tris)
    }

    pub fn octahedron() -> (Vec<Point3>, Vec<[usize; 3]>) {
        let pos = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 0.0, -1.0),
        ];
        let tris = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        (pos, tris)
    }

    /// Regular icosahedron inscribed in the unit sphere, outward orientation.
    pub fn icosahedron() -> (Vec<Point3>, Vec<[usize; 3]>) {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let pos = raw
            .iter()
            .map(|&a| {
                let p = Point3::from(a);
                p / p.norm()
            })
            .collect();
        let tris = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        (pos, tris)
    }
}
