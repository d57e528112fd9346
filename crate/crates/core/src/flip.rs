//! The edge-flip loop.
//!
//! Edges are flipped while any edge is flippable: the apex across it lies
//! strictly inside the diametric ball (or, in conservative mode, the
//! `beta`-lens) of the face on the other side. Candidates are processed from
//! a queue; stale entries are dropped lazily when popped.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::mesh::{EdgeHandle, EdgeId, FaceId, FlipError, FlipRecord, TriangleMesh};
use crate::predicates::{self, TAU};

/// Relative slack allowed by the per-flip radius check.
pub const RADIUS_GROWTH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FlipMode {
    Full,
    Conservative { beta: f64 },
}

impl FlipMode {
    pub fn beta(self) -> f64 {
        match self {
            FlipMode::Full => 0.0,
            FlipMode::Conservative { beta } => beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipOrder {
    /// Edge whose larger incident circumradius is biggest goes first.
    LargestRadiusFirst,
    Fifo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipConfig {
    pub mode: FlipMode,
    pub order: FlipOrder,
    /// Flip budget; `None` means `10 * E^2`.
    pub max_flips: Option<u64>,
    pub monitor_lexicographic: bool,
    pub tolerance: f64,
    /// Cross-check the queue against a global scan every this many flips.
    pub rescan_interval: Option<u64>,
}

impl Default for FlipConfig {
    fn default() -> Self {
        FlipConfig {
            mode: FlipMode::Full,
            order: FlipOrder::LargestRadiusFirst,
            max_flips: None,
            monitor_lexicographic: true,
            tolerance: TAU,
            rescan_interval: if cfg!(debug_assertions) {
                Some(1000)
            } else {
                None
            },
        }
    }
}

impl FlipConfig {
    pub fn conservative(beta: f64) -> Self {
        FlipConfig {
            mode: FlipMode::Conservative { beta },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let beta = self.mode.beta();
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(ConfigError::NegativeBeta(beta));
        }
        if self.max_flips == Some(0) {
            return Err(ConfigError::ZeroBudget);
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(ConfigError::BadTolerance(self.tolerance));
        }
        if self.rescan_interval == Some(0) {
            return Err(ConfigError::ZeroRescanInterval);
        }
        Ok(())
    }

    /// The flip budget for a mesh with `edges` edges.
    pub fn budget(&self, edges: usize) -> u64 {
        self.max_flips.unwrap_or_else(|| {
            let e = edges as u64;
            e.saturating_mul(e).saturating_mul(10).max(1)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("beta must be a finite non-negative number, got {0}")]
    NegativeBeta(f64),
    #[error("max_flips must be positive")]
    ZeroBudget,
    #[error("tolerance must be a finite non-negative number, got {0}")]
    BadTolerance(f64),
    #[error("rescan interval must be positive")]
    ZeroRescanInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipStatus {
    Converged,
    CapReached,
    /// Flippable edges remain but every one was refused by a flip guard.
    GuardStalled,
    /// The lexicographic monitor caught a non-decreasing flip; the run stopped.
    MonitorViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorFailure {
    /// The sorted radius sequence did not strictly decrease.
    NotLexicographicallySmaller,
    /// The largest circumradius of the mesh grew.
    MaxRadiusIncreased { before: f64, after: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorEvent {
    /// Zero-based index of the offending flip.
    pub flip: u64,
    pub record: FlipRecord,
    pub failure: MonitorFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GuardCounts {
    pub edge_exists: u64,
    pub would_degenerate: u64,
}

impl GuardCounts {
    pub fn total(&self) -> u64 {
        self.edge_exists + self.would_degenerate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipLog {
    pub mode: FlipMode,
    pub order: FlipOrder,
    pub records: Vec<FlipRecord>,
    pub flips: u64,
    pub guard_rejections: GuardCounts,
    /// Largest pre-flip angle between the normals of the two flipped faces.
    pub max_dihedral: f64,
    pub status: FlipStatus,
    pub monitor_events: Vec<MonitorEvent>,
    /// Flips with pre-flip dihedral below a right angle.
    pub radius_checked: u64,
    /// Of those, flips whose new max radius exceeded the old one.
    pub radius_increases: Vec<FlipRecord>,
    pub rescans: u64,
    /// Flippable edges a global rescan found that the queue did not hold.
    pub rescan_misses: u64,
    pub initial_max_radius: f64,
    pub final_max_radius: f64,
}

impl FlipLog {
    pub fn converged(&self) -> bool {
        self.status == FlipStatus::Converged
    }
}

/// Circumradii of all faces, sorted in descending order.
pub fn radius_sequence(mesh: &TriangleMesh) -> Vec<f64> {
    let mut radii: Vec<f64> = mesh
        .faces()
        .map(|f| mesh.face_radius(f).unwrap_or(f64::INFINITY))
        .collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii
}

/// Lexicographic comparison of two descending sequences.
pub fn compare_sequences(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn sorted_pair(r: [f64; 2]) -> [f64; 2] {
    if r[0].total_cmp(&r[1]) == Ordering::Less {
        [r[1], r[0]]
    } else {
        r
    }
}

/// Did replacing radii `old` by `new` make the sorted sequence strictly
/// smaller? Only the two pairs matter: the first position where the
/// sequences differ is decided by the largest of the four values that is not
/// shared, which comparing the descending pairs finds.
pub fn flip_decreases_sequence(old: [f64; 2], new: [f64; 2]) -> bool {
    let (a, b) = (sorted_pair(old), sorted_pair(new));
    match b[0].total_cmp(&a[0]) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => b[1].total_cmp(&a[1]) == Ordering::Less,
    }
}

/// Multiset of face radii keyed by their bit pattern (radii are non-negative,
/// so bit order is numeric order).
#[derive(Debug, Default)]
struct RadiusMultiset {
    counts: BTreeMap<u64, u32>,
}

impl RadiusMultiset {
    fn insert(&mut self, r: f64) {
        *self.counts.entry(r.to_bits()).or_insert(0) += 1;
    }

    fn remove(&mut self, r: f64) {
        let key = r.to_bits();
        if let Some(c) = self.counts.get_mut(&key) {
            *c -= 1;
            if *c == 0 {
                self.counts.remove(&key);
            }
        }
    }

    fn max(&self) -> f64 {
        self.counts
            .keys()
            .next_back()
            .map_or(0.0, |&k| f64::from_bits(k))
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    seq: u64,
    edge: EdgeHandle,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Max-heap: bigger key first, then earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Queue {
    Heap(BinaryHeap<Entry>),
    Fifo(VecDeque<Entry>),
}

impl Queue {
    fn push(&mut self, e: Entry) {
        match self {
            Queue::Heap(h) => h.push(e),
            Queue::Fifo(q) => q.push_back(e),
        }
    }

    fn pop(&mut self) -> Option<Entry> {
        match self {
            Queue::Heap(h) => h.pop(),
            Queue::Fifo(q) => q.pop_front(),
        }
    }
}

fn edge_key(mesh: &TriangleMesh, e: EdgeId) -> f64 {
    let [a, b] = mesh.edge_faces(e);
    let ra = mesh.face_radius(a).unwrap_or(f64::INFINITY);
    let rb = mesh.face_radius(b).unwrap_or(f64::INFINITY);
    ra.max(rb)
}

struct Engine<'m> {
    mesh: &'m mut TriangleMesh,
    beta: f64,
    tau: f64,
    queue: Queue,
    seq: u64,
    /// Key and generation of the live queue entry for each edge, if any.
    queued: Vec<Option<(u32, u64)>>,
    /// Generation at which each edge was last refused by a guard.
    rejected: Vec<Option<u32>>,
}

impl Engine<'_> {
    fn flippable(&self, e: EdgeId) -> bool {
        predicates::is_edge_flippable(self.mesh, e, self.beta, self.tau)
    }

    /// Queues `e` if it is flippable and not already queued in this state.
    fn examine(&mut self, e: EdgeId) {
        if !self.flippable(e) {
            return;
        }
        let handle = self.mesh.edge_handle(e);
        let key = edge_key(self.mesh, e);
        let state = (handle.generation, key.to_bits());
        if self.queued[e.index()] == Some(state) {
            return;
        }
        self.queued[e.index()] = Some(state);
        self.queue.push(Entry {
            key,
            seq: self.seq,
            edge: handle,
        });
        self.seq += 1;
    }

    fn is_rejected(&self, e: EdgeId) -> bool {
        self.rejected[e.index()] == Some(self.mesh.edge_handle(e).generation)
    }

    /// Queues every flippable edge; returns how many were not already queued
    /// and not parked by a guard.
    fn global_scan(&mut self) -> u64 {
        let mut missed = 0;
        for e in predicates::beta_flippable_edges(self.mesh, self.beta, self.tau) {
            if self.is_rejected(e) {
                continue;
            }
            let state = (
                self.mesh.edge_handle(e).generation,
                edge_key(self.mesh, e).to_bits(),
            );
            if self.queued[e.index()] != Some(state) {
                missed += 1;
            }
            self.examine(e);
        }
        missed
    }

    /// Edges whose surroundings changed in the flip that produced `rec`.
    fn neighborhood(&self, rec: &FlipRecord) -> Vec<EdgeId> {
        let [fa, fb] = self.mesh.edge_faces(rec.edge.id);
        let mut faces: Vec<FaceId> = vec![fa, fb];
        for f in [fa, fb] {
            for h in self.mesh.face_half_edges(f) {
                faces.push(self.mesh.half_edge_face(self.mesh.twin(h)));
            }
        }
        let mut edges: Vec<EdgeId> = faces
            .iter()
            .flat_map(|&f| self.mesh.face_edges(f))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Runs the flip loop with the given configuration.
pub fn mesh_flip(mesh: &mut TriangleMesh, cfg: &FlipConfig) -> Result<FlipLog, ConfigError> {
    mesh_flip_with(mesh, cfg, |_| {})
}

/// Conservative variant: only edges whose apex lies in the `beta`-lens.
pub fn mesh_flip_conservative(
    mesh: &mut TriangleMesh,
    beta: f64,
    cfg: &FlipConfig,
) -> Result<FlipLog, ConfigError> {
    let cfg = FlipConfig {
        mode: FlipMode::Conservative { beta },
        ..cfg.clone()
    };
    mesh_flip(mesh, &cfg)
}

/// Like [`mesh_flip`], calling `on_flip` after every executed flip.
pub fn mesh_flip_with(
    mesh: &mut TriangleMesh,
    cfg: &FlipConfig,
    mut on_flip: impl FnMut(&FlipRecord),
) -> Result<FlipLog, ConfigError> {
    cfg.validate()?;
    let budget = cfg.budget(mesh.edge_count());

    let mut radii = RadiusMultiset::default();
    for f in mesh.faces() {
        radii.insert(mesh.face_radius(f).unwrap_or(f64::INFINITY));
    }
    let initial_max_radius = radii.max();

    let mut log = FlipLog {
        mode: cfg.mode,
        order: cfg.order,
        records: Vec::new(),
        flips: 0,
        guard_rejections: GuardCounts::default(),
        max_dihedral: 0.0,
        status: FlipStatus::Converged,
        monitor_events: Vec::new(),
        radius_checked: 0,
        radius_increases: Vec::new(),
        rescans: 0,
        rescan_misses: 0,
        initial_max_radius,
        final_max_radius: initial_max_radius,
    };

    let edge_count = mesh.edge_count();
    let mut engine = Engine {
        mesh,
        beta: cfg.mode.beta(),
        tau: cfg.tolerance,
        queue: match cfg.order {
            FlipOrder::LargestRadiusFirst => Queue::Heap(BinaryHeap::new()),
            FlipOrder::Fifo => Queue::Fifo(VecDeque::new()),
        },
        seq: 0,
        queued: vec![None; edge_count],
        rejected: vec![None; edge_count],
    };
    for e in engine.mesh.edges() {
        engine.examine(e);
    }

    'outer: loop {
        while let Some(entry) = engine.queue.pop() {
            let e = entry.edge.id;
            if !engine.mesh.is_edge_live(entry.edge)
                || engine.queued[e.index()] != Some((entry.edge.generation, entry.key.to_bits()))
            {
                continue;
            }
            engine.queued[e.index()] = None;
            if !engine.flippable(e) {
                continue;
            }
            if let Err(err) = engine.mesh.check_flip(entry.edge) {
                match err {
                    FlipError::EdgeExists { .. } => log.guard_rejections.edge_exists += 1,
                    FlipError::WouldDegenerate => log.guard_rejections.would_degenerate += 1,
                    FlipError::StaleHandle(_) => unreachable!("handle checked live"),
                }
                engine.rejected[e.index()] = Some(entry.edge.generation);
                continue;
            }
            if log.flips >= budget {
                log.status = FlipStatus::CapReached;
                break 'outer;
            }
            let rec = engine
                .mesh
                .flip_edge(entry.edge)
                .expect("flip guards checked");
            let index = log.flips;
            log.flips += 1;
            log.max_dihedral = log.max_dihedral.max(rec.dihedral_before);
            if rec.dihedral_before < FRAC_PI_2 {
                log.radius_checked += 1;
                if rec.new_max_radius() > rec.old_max_radius() * (1.0 + RADIUS_GROWTH_SLACK) {
                    log.radius_increases.push(rec);
                }
            }

            let before = radii.max();
            for r in rec.old_radii {
                radii.remove(r);
            }
            for r in rec.new_radii {
                radii.insert(r);
            }
            if cfg.monitor_lexicographic {
                let after = radii.max();
                let failure = if !flip_decreases_sequence(rec.old_radii, rec.new_radii) {
                    Some(MonitorFailure::NotLexicographicallySmaller)
                } else if after > before {
                    Some(MonitorFailure::MaxRadiusIncreased { before, after })
                } else {
                    None
                };
                if let Some(failure) = failure {
                    log.monitor_events.push(MonitorEvent {
                        flip: index,
                        record: rec,
                        failure,
                    });
                }
            }
            on_flip(&rec);
            log.records.push(rec);
            if !log.monitor_events.is_empty() {
                log.status = FlipStatus::MonitorViolation;
                break 'outer;
            }

            for n in engine.neighborhood(&rec) {
                // A changed neighborhood lifts any earlier guard refusal.
                engine.rejected[n.index()] = None;
                engine.examine(n);
            }

            if let Some(every) = cfg.rescan_interval {
                if log.flips.is_multiple_of(every) {
                    log.rescans += 1;
                    log.rescan_misses += engine.global_scan();
                }
            }
        }

        // The queue is empty: confirm with a global scan.
        if engine.global_scan() == 0 {
            let stalled = predicates::beta_flippable_edges(engine.mesh, engine.beta, engine.tau)
                .into_iter()
                .any(|e| engine.is_rejected(e));
            log.status = if stalled {
                FlipStatus::GuardStalled
            } else {
                FlipStatus::Converged
            };
            break;
        }
    }

    log.final_max_radius = radii.max();
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::mesh::fixtures::{icosahedron, octahedron};
    use crate::mesh::VertexId;
    use crate::predicates::{brute_force_stab_scan, fixtures, flippable_edges};
    use proptest::prelude::*;

    fn build(data: (Vec<Point3>, Vec<[usize; 3]>)) -> TriangleMesh {
        TriangleMesh::build(&data.0, &data.1).unwrap()
    }

    /// Closed slab: an `(n+1) x (n+1)` grid of points `warp(i, j)` on top,
    /// the same grid two units lower underneath, and vertical walls. Top cell
    /// `(i, j)` is split along the diagonal from `(i, j)` to `(i+1, j+1)`.
    fn slab(n: usize, warp: impl Fn(usize, usize) -> Point3) -> (Vec<Point3>, Vec<[usize; 3]>) {
        let k = (n + 1) * (n + 1);
        let top = |i: usize, j: usize| j * (n + 1) + i;
        let bot = |i: usize, j: usize| k + top(i, j);
        let mut pos = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                pos.push(warp(i, j));
            }
        }
        for j in 0..=n {
            for i in 0..=n {
                pos.push(warp(i, j) + Point3::new(0.0, 0.0, -2.0));
            }
        }
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                tris.push([top(i, j), top(i + 1, j), top(i + 1, j + 1)]);
                tris.push([top(i, j), top(i + 1, j + 1), top(i, j + 1)]);
                tris.push([bot(i, j), bot(i + 1, j + 1), bot(i + 1, j)]);
                tris.push([bot(i, j), bot(i, j + 1), bot(i + 1, j + 1)]);
            }
        }
        // Boundary ring of the top grid, counter-clockwise seen from above.
        let mut ring = Vec::new();
        ring.extend((0..n).map(|i| (i, 0)));
        ring.extend((0..n).map(|j| (n, j)));
        ring.extend((1..=n).rev().map(|i| (i, n)));
        ring.extend((1..=n).rev().map(|j| (0, j)));
        for w in 0..ring.len() {
            let (a, b) = (ring[w], ring[(w + 1) % ring.len()]);
            let (ta, tb) = (top(a.0, a.1), top(b.0, b.1));
            let (ba, bb) = (bot(a.0, a.1), bot(b.0, b.1));
            tris.push([tb, ta, ba]);
            tris.push([tb, ba, bb]);
        }
        (pos, tris)
    }

    #[test]
    fn regular_solids_need_no_flips() {
        for data in [octahedron(), icosahedron()] {
            let mut m = build(data);
            let before = m.connectivity_signature();
            let log = mesh_flip(&mut m, &FlipConfig::default()).unwrap();
            assert_eq!(log.status, FlipStatus::Converged);
            assert_eq!(log.flips, 0);
            assert_eq!(m.connectivity_signature(), before);
        }
    }

    #[test]
    fn octahedron_radius_sequence_is_flat() {
        let m = build(octahedron());
        let seq = radius_sequence(&m);
        assert_eq!(seq.len(), 8);
        assert!(seq.iter().all(|&r| r == seq[0]));
    }

    #[test]
    fn single_stabbed_quad_in_a_grid() {
        // Regular grid with alternating diagonals is cocircular everywhere;
        // shear each cell slightly so every diagonal is the Delaunay one,
        // then squash one cell so its diagonal becomes illegal.
        let n = 6;
        let (mut pos, tris) = slab(n, |i, j| {
            Point3::new(i as f64 - 0.1 * j as f64, j as f64, 0.0)
        });
        let mesh = build((pos.clone(), tris.clone()));
        assert!(
            flippable_edges(&mesh, TAU).is_empty(),
            "baseline not Delaunay"
        );

        // Cell (2, 2): diagonal from (2,2) to (3,3). Pull (3,2) toward (2,3).
        let id = |i: usize, j: usize| j * (n + 1) + i;
        pos[id(3, 2)] = Point3::new(2.6, 2.15, 0.0);
        let mut m = build((pos, tris));
        let diag = m
            .find_edge(VertexId(id(2, 2) as u32), VertexId(id(3, 3) as u32))
            .unwrap();
        assert_eq!(flippable_edges(&m, TAU), vec![diag]);
        let [fa, fb] = m.edge_faces(diag);
        let old = [m.face_radius(fa).unwrap(), m.face_radius(fb).unwrap()];

        let log = mesh_flip(&mut m, &FlipConfig::default()).unwrap();
        assert_eq!(log.status, FlipStatus::Converged);
        assert_eq!(log.flips, 1);
        let rec = log.records[0];
        assert_eq!(rec.edge.id, diag);
        let rs = [rec.r, rec.s];
        assert!(rs.contains(&VertexId(id(3, 2) as u32)) && rs.contains(&VertexId(id(2, 3) as u32)));
        let old_max = old[0].max(old[1]);
        for f in m.edge_faces(diag) {
            assert!(m.face_radius(f).unwrap() <= old_max);
        }
        assert!(brute_force_stab_scan(&m, TAU).is_empty());
        assert!(m.validate().is_empty());
    }

    #[test]
    fn pulled_octahedron_converges_to_gabriel() {
        let mut m = build(fixtures::pulled_octahedron(0.3));
        let log = mesh_flip(&mut m, &FlipConfig::default()).unwrap();
        assert!(log.flips >= 1);
        assert!(m.validate().is_empty());
        match log.status {
            FlipStatus::Converged => assert!(flippable_edges(&m, TAU).is_empty()),
            FlipStatus::GuardStalled => {
                assert!(log.guard_rejections.total() > 0);
                assert!(!flippable_edges(&m, TAU).is_empty());
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn beta_zero_matches_full_mode() {
        let run = |cfg: FlipConfig| {
            let mut m = build(fixtures::pulled_octahedron(0.3));
            let log = mesh_flip(&mut m, &cfg).unwrap();
            (log.records, log.status, m.connectivity_signature())
        };
        assert_eq!(
            run(FlipConfig::default()),
            run(FlipConfig::conservative(0.0))
        );
    }

    #[test]
    fn huge_beta_flips_nothing() {
        let mut m = build(fixtures::pulled_octahedron(0.3));
        let log = mesh_flip_conservative(&mut m, 1e6, &FlipConfig::default()).unwrap();
        assert_eq!(log.flips, 0);
        assert_eq!(log.status, FlipStatus::Converged);
    }

    #[test]
    fn cap_stops_the_loop() {
        let mut m = build(fixtures::pulled_octahedron(0.3));
        let needed = mesh_flip(&mut m.clone(), &FlipConfig::default())
            .unwrap()
            .flips;
        assert!(needed >= 1);
        let cfg = FlipConfig {
            max_flips: Some(needed),
            ..FlipConfig::default()
        };
        assert_ne!(
            mesh_flip(&mut m.clone(), &cfg).unwrap().status,
            FlipStatus::CapReached
        );
        if needed >= 2 {
            let cfg = FlipConfig {
                max_flips: Some(1),
                ..FlipConfig::default()
            };
            let log = mesh_flip(&mut m, &cfg).unwrap();
            assert_eq!(log.status, FlipStatus::CapReached);
            assert_eq!(log.flips, 1);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut m = build(octahedron());
        let bad = [
            FlipConfig::conservative(-1.0),
            FlipConfig::conservative(f64::NAN),
            FlipConfig {
                max_flips: Some(0),
                ..FlipConfig::default()
            },
            FlipConfig {
                tolerance: -1.0,
                ..FlipConfig::default()
            },
            FlipConfig {
                rescan_interval: Some(0),
                ..FlipConfig::default()
            },
        ];
        for cfg in bad {
            assert!(mesh_flip(&mut m, &cfg).is_err());
        }
    }

    #[test]
    fn default_budget_is_ten_e_squared() {
        assert_eq!(FlipConfig::default().budget(12), 1440);
    }

    #[test]
    fn multiset_tracks_maximum() {
        let mut s = RadiusMultiset::default();
        for r in [1.0, 3.0, 3.0, 2.0] {
            s.insert(r);
        }
        assert_eq!(s.max(), 3.0);
        s.remove(3.0);
        assert_eq!(s.max(), 3.0);
        s.remove(3.0);
        assert_eq!(s.max(), 2.0);
    }

    /// Full-sequence oracle for the pairwise shortcut.
    fn oracle_decreases(rest: &[f64], old: [f64; 2], new: [f64; 2]) -> bool {
        let mut a: Vec<f64> = rest.iter().copied().chain(old).collect();
        let mut b: Vec<f64> = rest.iter().copied().chain(new).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        b.sort_by(|x, y| y.total_cmp(x));
        compare_sequences(&b, &a) == Ordering::Less
    }

    proptest! {
        #[test]
        fn pairwise_monitor_matches_full_sort(
            rest in proptest::collection::vec(0u8..6, 0..8),
            old in (0u8..6, 0u8..6),
            new in (0u8..6, 0u8..6),
        ) {
            // Small integer radii make ties common.
            let rest: Vec<f64> = rest.into_iter().map(f64::from).collect();
            let old = [f64::from(old.0), f64::from(old.1)];
            let new = [f64::from(new.0), f64::from(new.1)];
            prop_assert_eq!(flip_decreases_sequence(old, new), oracle_decreases(&rest, old, new));
        }
    }
}
