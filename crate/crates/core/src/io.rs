//! OFF and OBJ reading and writing, plus report serialization.
//!
//! Only triangles are accepted; polygons are rejected rather than fanned,
//! since fanning would silently choose adjacency. Coordinates are written
//! with 17 significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{ConformanceMode, ConformanceReport, DensityReport, NormalAudit};
use crate::flip::FlipLog;
use crate::geometry::Point3;
use crate::mesh::{FlipRecord, MeshError, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Off => "off",
            MeshFormat::Obj => "obj",
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: face has {vertices} vertices, only triangles are supported")]
    NonTriangleFace { line: usize, vertices: usize },
    #[error("line {line}: vertex index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("cannot tell the mesh format of {0}")]
    UnknownFormat(PathBuf),
    #[error("cannot access {path}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Raw mesh data as read from a file; indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFile {
    pub format: MeshFormat,
    pub positions: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl MeshFile {
    pub fn from_mesh(mesh: &TriangleMesh, format: MeshFormat) -> Self {
        let (positions, triangles) = mesh.to_indexed();
        MeshFile {
            format,
            positions,
            triangles,
        }
    }

    pub fn into_mesh(self) -> Result<TriangleMesh, MeshError> {
        TriangleMesh::build(&self.positions, &self.triangles)
    }

    pub fn to_text(&self) -> String {
        match self.format {
            MeshFormat::Off => write_off(&self.positions, &self.triangles),
            MeshFormat::Obj => write_obj(&self.positions, &self.triangles),
        }
    }
}

/// Cursor over whitespace-separated tokens that remembers positions.
struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
    next: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    items.push((s, &text[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            items.push((s, &text[s..]));
        }
        Tokens {
            line,
            items,
            next: 0,
        }
    }

    fn error(&self, column: usize, message: impl Into<String>) -> IoError {
        IoError::Parse {
            line: self.line,
            column: column + 1,
            message: message.into(),
        }
    }

    fn end_column(&self) -> usize {
        self.items.last().map_or(0, |(c, t)| c + t.len())
    }

    fn take(&mut self, what: &str) -> Result<(usize, &'a str), IoError> {
        let item = self
            .items
            .get(self.next)
            .copied()
            .ok_or_else(|| self.error(self.end_column(), format!("expected {what}")))?;
        self.next += 1;
        Ok(item)
    }

    fn float(&mut self) -> Result<f64, IoError> {
        let (col, tok) = self.take("a number")?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.error(col, format!("invalid number {tok:?}")))?;
        if !v.is_finite() {
            return Err(self.error(col, format!("non-finite coordinate {tok:?}")));
        }
        Ok(v)
    }

    fn count(&mut self, what: &str) -> Result<usize, IoError> {
        let (col, tok) = self.take(what)?;
        tok.parse()
            .map_err(|_| self.error(col, format!("invalid {what} {tok:?}")))
    }

    fn remaining(&self) -> usize {
        self.items.len() - self.next
    }

    fn finish(&self) -> Result<(), IoError> {
        match self.items.get(self.next) {
            None => Ok(()),
            Some(&(col, tok)) => Err(self.error(col, format!("unexpected token {tok:?}"))),
        }
    }
}

/// Non-empty, comment-stripped lines with their one-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        (!l.trim().is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_off(text: &str) -> Result<MeshFile, IoError> {
    let mut lines = content_lines(text);
    let eof = |what: &str| IoError::Parse {
        line: text.lines().count().max(1),
        column: 1,
        message: format!("unexpected end of file, expected {what}"),
    };
    let (n, l) = lines.next().ok_or_else(|| eof("OFF header"))?;
    let mut header = Tokens::new(n, l);
    let (col, magic) = header.take("OFF header")?;
    if magic != "OFF" {
        return Err(header.error(col, format!("expected OFF header, found {magic:?}")));
    }
    // Counts may share the header line.
    let mut counts = if header.remaining() > 0 {
        header
    } else {
        let (n, l) = lines.next().ok_or_else(|| eof("vertex and face counts"))?;
        Tokens::new(n, l)
    };
    let nv = counts.count("vertex count")?;
    let nf = counts.count("face count")?;
    if counts.remaining() > 0 {
        counts.count("edge count")?;
    }
    counts.finish()?;

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| eof("a vertex"))?;
        let mut t = Tokens::new(n, l);
        positions.push(Point3::new(t.float()?, t.float()?, t.float()?));
        t.finish()?;
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| eof("a face"))?;
        let mut t = Tokens::new(n, l);
        let k = t.count("face size")?;
        if k != 3 {
            return Err(IoError::NonTriangleFace {
                line: n,
                vertices: k,
            });
        }
        let mut tri = [0; 3];
        for slot in &mut tri {
            let (col, tok) = t.take("a vertex index")?;
            let idx: i64 = tok
                .parse()
                .map_err(|_| t.error(col, format!("invalid index {tok:?}")))?;
            if idx < 0 || idx as usize >= nv {
                return Err(IoError::IndexOutOfRange {
                    line: n,
                    index: idx,
                    vertex_count: nv,
                });
            }
            *slot = idx as usize;
        }
        // Trailing color values are allowed by the format; ignore them.
        triangles.push(tri);
    }
    if let Some((n, l)) = lines.next() {
        return Err(Tokens::new(n, l).error(0, "trailing data after the last face"));
    }
    Ok(MeshFile {
        format: MeshFormat::Off,
        positions,
        triangles,
    })
}

pub fn parse_obj(text: &str) -> Result<MeshFile, IoError> {
    let mut positions = Vec::new();
    let mut faces: Vec<(usize, [i64; 3])> = Vec::new();
    for (n, l) in content_lines(text) {
        let mut t = Tokens::new(n, l);
        let (_, kind) = t.take("a record")?;
        match kind {
            "v" => {
                positions.push(Point3::new(t.float()?, t.float()?, t.float()?));
                // An optional weight may follow.
                if t.remaining() > 0 {
                    t.float()?;
                }
                t.finish()?;
            }
            "f" => {
                let k = t.remaining();
                if k != 3 {
                    return Err(IoError::NonTriangleFace {
                        line: n,
                        vertices: k,
                    });
                }
                let mut tri = [0i64; 3];
                for slot in &mut tri {
                    let (col, tok) = t.take("a vertex index")?;
                    let head = tok.split('/').next().unwrap_or("");
                    *slot = head
                        .parse()
                        .map_err(|_| t.error(col, format!("invalid index {tok:?}")))?;
                    if *slot == 0 {
                        return Err(t.error(col, "OBJ indices start at 1"));
                    }
                }
                faces.push((n, tri));
            }
            // Normals, texture coordinates, groups and materials carry no
            // connectivity.
            _ => {}
        }
    }
    let nv = positions.len();
    let mut triangles = Vec::with_capacity(faces.len());
    for (line, tri) in faces {
        let mut out = [0; 3];
        for (slot, &idx) in out.iter_mut().zip(&tri) {
            // Negative indices count back from the end.
            let zero_based = if idx > 0 { idx - 1 } else { nv as i64 + idx };
            if zero_based < 0 || zero_based as usize >= nv {
                return Err(IoError::IndexOutOfRange {
                    line,
                    index: idx,
                    vertex_count: nv,
                });
            }
            *slot = zero_based as usize;
        }
        triangles.push(out);
    }
    Ok(MeshFile {
        format: MeshFormat::Obj,
        positions,
        triangles,
    })
}

fn coord(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

fn point(out: &mut String, p: Point3) {
    coord(out, p.x);
    out.push(' ');
    coord(out, p.y);
    out.push(' ');
    coord(out, p.z);
}

pub fn write_off(positions: &[Point3], triangles: &[[usize; 3]]) -> String {
    let mut out = String::new();
    writeln!(out, "OFF\n{} {} 0", positions.len(), triangles.len()).unwrap();
    for &p in positions {
        point(&mut out, p);
        out.push('\n');
    }
    for t in triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    out
}

pub fn write_obj(positions: &[Point3], triangles: &[[usize; 3]]) -> String {
    let mut out = String::new();
    for &p in positions {
        out.push_str("v ");
        point(&mut out, p);
        out.push('\n');
    }
    for t in triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

/// Reads a mesh, choosing the parser by extension (or the `OFF` header).
pub fn read_mesh(path: &Path) -> Result<MeshFile, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let format = MeshFormat::from_path(path).or_else(|| {
        content_lines(&text)
            .next()
            .and_then(|(_, l)| l.trim().starts_with("OFF").then_some(MeshFormat::Off))
    });
    match format {
        Some(MeshFormat::Off) => parse_off(&text),
        Some(MeshFormat::Obj) => parse_obj(&text),
        None => Err(IoError::UnknownFormat(path.to_path_buf())),
    }
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<(), IoError> {
    write_atomic(path, MeshFile::from_mesh(mesh, format).to_text().as_bytes())
}

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let file_err = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(file_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        file_err(e)
    })
}

/// Pretty JSON for any report.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// One line per flip, as streamed by the command-line tool.
pub fn flip_record_text(index: u64, r: &FlipRecord) -> String {
    format!(
        "flip {index}: edge {} ({} {}) -> ({} {}) radii [{:.6e} {:.6e}] -> [{:.6e} {:.6e}] dihedral {:.6}",
        r.edge.id,
        r.p,
        r.q,
        r.r,
        r.s,
        r.old_radii[0],
        r.old_radii[1],
        r.new_radii[0],
        r.new_radii[1],
        r.dihedral_before
    )
}

pub fn flip_record_json(index: u64, r: &FlipRecord) -> String {
    let mut v = serde_json::to_value(r).expect("records serialize");
    v["index"] = index.into();
    v.to_string()
}

pub fn density_text(r: &DensityReport) -> String {
    format!(
        "vertices {}\nfaces {}\ngamma {}\nepsilon {:.9}\ndelta {:.9}\nmax_radius {:.9e}\n\
         min_distance {:.9e}\nmax_aspect_ratio {:.6}\nmax_dihedral {:.6}\n\
         max_normal_deviation {:.6}\norientation_consistent {}\n",
        r.vertices,
        r.faces,
        r.gamma_used,
        r.epsilon,
        r.delta,
        r.max_radius,
        r.min_distance,
        r.max_aspect_ratio,
        r.max_dihedral,
        r.max_normal_deviation,
        r.orientation_consistent
    )
}

pub fn audit_text(a: &NormalAudit) -> String {
    let mut out = String::new();
    for c in &a.checks {
        writeln!(
            out,
            "bound {} observed {:.6} bound {:.6} {}{}",
            c.name,
            c.observed,
            c.bound,
            if c.pass { "pass" } else { "FAIL" },
            if c.applicable {
                ""
            } else {
                " (hypothesis not met)"
            }
        )
        .unwrap();
    }
    out
}

pub fn conformance_text(r: &ConformanceReport) -> String {
    let mut out = String::new();
    match r.mode {
        ConformanceMode::Gabriel => writeln!(out, "mode gabriel"),
        ConformanceMode::AlphaGabriel { alpha } => {
            writeln!(out, "mode alpha_gabriel alpha {alpha}")
        }
        ConformanceMode::LensShrunk { beta } => writeln!(out, "mode lens_shrunk beta {beta}"),
    }
    .unwrap();
    writeln!(out, "faces_checked {}", r.faces_checked).unwrap();
    writeln!(out, "violations {}", r.violations.len()).unwrap();
    for v in &r.violations {
        writeln!(
            out,
            "violation face {} witness {} penetration {:.6e}",
            v.face, v.witness, v.penetration
        )
        .unwrap();
    }
    writeln!(out, "result {}", if r.pass { "pass" } else { "fail" }).unwrap();
    out
}

pub fn flip_summary_text(log: &FlipLog) -> String {
    format!(
        "status {}\nflips {}\nguard_rejections {} (edge_exists {}, would_degenerate {})\n\
         max_dihedral {:.6}\nmonitor_violations {}\nradius_checked {}\n\
         radius_increases {}\nrescan_misses {}\nmax_radius {:.9e} -> {:.9e}\n",
        serde_json::to_value(log.status)
            .expect("status serializes")
            .as_str()
            .unwrap_or("?"),
        log.flips,
        log.guard_rejections.total(),
        log.guard_rejections.edge_exists,
        log.guard_rejections.would_degenerate,
        log.max_dihedral,
        log.monitor_events.len(),
        log.radius_checked,
        log.radius_increases.len(),
        log.rescan_misses,
        log.initial_max_radius,
        log.final_max_radius,
    )
}
