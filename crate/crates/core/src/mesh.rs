//! Labeled triangle meshes: validation, Wavefront OBJ I/O, and the label
//! sidecar format (one part id per vertex line).

use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::path::Path;

/// Number of semantic body-part labels; part ids are 1..=14 with 0 reserved
/// for background in label images.
pub const PART_COUNT: u8 = 14;
pub const BACKGROUND_LABEL: u8 = 0;

/// Minimum triangle area treated as non-degenerate (m²).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh with a semantic part id per vertex.
#[derive(Debug, Clone)]
pub struct LabeledMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<u8>,
}

impl LabeledMesh {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let mesh = LabeledMesh { vertices, triangles, labels };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.vertices.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} vertices", self.labels.len(), self.vertices.len()),
            ));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if *l == BACKGROUND_LABEL || *l > PART_COUNT {
                return Err(Error::invalid(
                    format!("labels[{i}]"),
                    format!("part id {l} outside 1..={PART_COUNT}"),
                ));
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::NonFinite { context: format!("vertex {i}") });
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= self.vertices.len() {
                    return Err(Error::invalid(
                        format!("triangle {t}"),
                        format!("vertex index {v} out of range"),
                    ));
                }
            }
            if self.triangle_area(t) <= MIN_TRIANGLE_AREA {
                return Err(Error::invalid(format!("triangle {t}"), "degenerate (zero area)"));
            }
        }
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let ab = self.vertices[b] - self.vertices[a];
        let ac = self.vertices[c] - self.vertices[a];
        0.5 * ab.cross(&ac).norm()
    }

    /// Undirected one-ring adjacency derived from the triangles, sorted and
    /// deduplicated per vertex.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Reads a Wavefront OBJ (v/f records; `f` may carry `/vt/vn` suffixes) plus
/// its label sidecar.
pub fn read_obj_with_labels(obj_path: &Path, labels_path: &Path) -> Result<LabeledMesh> {
    let obj_text = std::fs::read_to_string(obj_path).map_err(|e| Error::Io {
        path: obj_path.display().to_string(),
        source: e,
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in obj_text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    *c = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            path: obj_path.display().to_string(),
                            message: format!("line {}: malformed vertex", lineno + 1),
                        })?;
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        first.parse::<i64>().ok().and_then(|i| {
                            if i > 0 {
                                Some((i - 1) as usize)
                            } else {
                                // Negative indices count from the end.
                                let n = vertices.len() as i64;
                                let j = n + i;
                                (j >= 0).then_some(j as usize)
                            }
                        })
                    })
                    .collect::<Option<Vec<usize>>>()
                    .ok_or_else(|| Error::Parse {
                        path: obj_path.display().to_string(),
                        message: format!("line {}: malformed face", lineno + 1),
                    })?;
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        path: obj_path.display().to_string(),
                        message: format!("line {}: face needs at least 3 vertices", lineno + 1),
                    });
                }
                // Fan-triangulate polygons.
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }

    let label_text = std::fs::read_to_string(labels_path).map_err(|e| Error::Io {
        path: labels_path.display().to_string(),
        source: e,
    })?;
    let labels: Vec<u8> = label_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, l)| {
            l.trim().parse::<u8>().map_err(|_| Error::Parse {
                path: labels_path.display().to_string(),
                message: format!("line {}: expected a part id", lineno + 1),
            })
        })
        .collect::<Result<_>>()?;
    LabeledMesh::new(vertices, triangles, labels)
}

/// Writes the mesh as OBJ plus the label sidecar. Float formatting uses the
/// shortest round-trip representation, so write→read is value-exact.
pub fn write_obj_with_labels(
    mesh: &LabeledMesh,
    obj_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    let mut obj = String::new();
    for v in &mesh.vertices {
        obj.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        obj.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    std::fs::write(obj_path, obj).map_err(|e| Error::Io {
        path: obj_path.display().to_string(),
        source: e,
    })?;
    let mut lab = String::new();
    for l in &mesh.labels {
        lab.push_str(&format!("{l}\n"));
    }
    std::fs::write(labels_path, lab).map_err(|e| Error::Io {
        path: labels_path.display().to_string(),
        source: e,
    })
}
