//! Semantic-guided mesh deformation: semantic-map contour extraction,
//! contour-to-vertex control-point matching, and the local-global
//! as-rigid-as-possible solve.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::linalg::{ordered_bandwidth, reverse_cuthill_mckee, BandedSpd};
use crate::mesh::{LabeledMesh, BACKGROUND_LABEL, PART_COUNT};
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

/// A semantic boundary pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub pixel: Vector2<f64>,
    pub label: u8,
}

/// A mesh vertex pinned to a target世界 position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub vertex: usize,
    pub target: Vector3<f64>,
}

/// Per-pixel part-id grid (row-major, ids 0..=14 with 0 = background).
#[derive(Debug, Clone)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(
                "label image",
                format!("{}×{} grid needs {} entries, got {}", width, height, width * height, data.len()),
            ));
        }
        for (i, &l) in data.iter().enumerate() {
            if l > PART_COUNT {
                return Err(Error::invalid(
                    "label image",
                    format!("pixel {i} has part id {l} outside 0..={PART_COUNT}"),
                ));
            }
        }
        Ok(LabelImage { width, height, data })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Boundary pixels of each labeled region: a non-background pixel is on the
/// contour when any 4-neighbor carries a different label (off-image counts as
/// background). Row-major scan order, subsampled per label by `stride`.
pub fn extract_contours(image: &LabelImage, stride: usize) -> Vec<ContourPoint> {
    let stride = stride.max(1);
    let mut per_label: Vec<Vec<ContourPoint>> = vec![Vec::new(); PART_COUNT as usize + 1];
    for y in 0..image.height {
        for x in 0..image.width {
            let l = image.at(x, y);
            if l == BACKGROUND_LABEL {
                continue;
            }
            let neighbor = |dx: isize, dy: isize| -> u8 {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= image.width as isize || ny >= image.height as isize {
                    BACKGROUND_LABEL
                } else {
                    image.at(nx as usize, ny as usize)
                }
            };
            let boundary = neighbor(-1, 0) != l
                || neighbor(1, 0) != l
                || neighbor(0, -1) != l
                || neighbor(0, 1) != l;
            if boundary {
                per_label[l as usize].push(ContourPoint {
                    pixel: Vector2::new(x as f64, y as f64),
                    label: l,
                });
            }
        }
    }
    let mut out = Vec::new();
    for points in per_label {
        out.extend(points.into_iter().step_by(stride));
    }
    out
}

/// Outcome of control-point matching: the selected controls plus the number
/// of contour points skipped for lack of a same-label vertex.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub controls: Vec<ControlPoint>,
    pub skipped: usize,
}

/// For each contour point, picks the same-label vertex whose projection is
/// nearest (ties → lowest vertex index). The control target is the contour
/// pixel back-projected at the chosen vertex's current camera-frame depth.
/// Later contour points overwrite earlier selections of the same vertex.
pub fn match_control_points(
    mesh: &LabeledMesh,
    camera: &Camera,
    contours: &[ContourPoint],
) -> Result<MatchOutcome> {
    let mut projected = Vec::with_capacity(mesh.vertices.len());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let p_cam = camera.to_camera_frame(v);
        if p_cam.z <= crate::camera::MIN_DEPTH {
            return Err(Error::BehindCamera { frame: 0, joint: i, z: p_cam.z });
        }
        projected.push((camera.project_world(v)?, p_cam.z));
    }
    let mut assignment: std::collections::BTreeMap<usize, Vector3<f64>> =
        std::collections::BTreeMap::new();
    let mut skipped = 0usize;
    for c in contours {
        let mut best: Option<(f64, usize)> = None;
        for (i, v) in mesh.labels.iter().enumerate() {
            if *v != c.label {
                continue;
            }
            let d = (projected[i].0 - c.pixel).norm_squared();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        match best {
            Some((_, vertex)) => {
                let depth = projected[vertex].1;
                let target = camera.back_project(&c.pixel, depth);
                assignment.insert(vertex, target);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{} contour points had no same-label vertex", skipped);
    }
    Ok(MatchOutcome {
        controls: assignment
            .into_iter()
            .map(|(vertex, target)| ControlPoint { vertex, target })
            .collect(),
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArapConfig {
    /// Local-global iterations.
    pub iterations: usize,
    /// Stop early when the relative energy change drops below this.
    pub tolerance: f64,
    /// Soft-constraint penalty weight for control vertices.
    pub penalty: f64,
    /// Use uniform edge weights instead of cotangents.
    pub uniform_weights: bool,
}

impl Default for ArapConfig {
    fn default() -> Self {
        ArapConfig { iterations: 10, tolerance: 1e-6, penalty: 1e4, uniform_weights: false }
    }
}

/// ARAP solve result: the deformed mesh and the total objective after each
/// local-global iteration (ARAP energy plus the control penalty), starting
/// with the initial value.
#[derive(Debug, Clone)]
pub struct ArapOutcome {
    pub mesh: LabeledMesh,
    pub energy_trace: Vec<f64>,
}

struct EdgeWeights {
    /// Per-vertex neighbor lists with symmetric weights.
    neighbors: Vec<Vec<(usize, f64)>>,
}

fn cotangent_weights(mesh: &LabeledMesh, uniform: bool) -> EdgeWeights {
    let n = mesh.vertices.len();
    let mut map: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    let mut add = |a: usize, b: usize, w: f64| {
        *map[a].entry(b).or_insert(0.0) += w;
    };
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (i, j, opp) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let w = if uniform {
                0.5 // halves sum to 1 per edge side
            } else {
                let u = mesh.vertices[i] - mesh.vertices[opp];
                let v = mesh.vertices[j] - mesh.vertices[opp];
                // cot of the angle at `opp`, halved per the standard stencil.
                0.5 * u.dot(&v) / u.cross(&v).norm().max(1e-12)
            };
            add(i, j, w);
            add(j, i, w);
        }
    }
    let neighbors = map
        .into_iter()
        .map(|m| {
            m.into_iter()
                // Clamp for numerical safety: obtuse triangles can drive a
                // summed cotangent weight negative.
                .map(|(j, w)| (j, w.max(1e-8)))
                .collect()
        })
        .collect();
    EdgeWeights { neighbors }
}

fn arap_energy(
    rest: &[Vector3<f64>],
    current: &[Vector3<f64>],
    rotations: &[Matrix3<f64>],
    weights: &EdgeWeights,
    controls: &[ControlPoint],
    penalty: f64,
) -> f64 {
    let mut e = 0.0;
    for (i, nbrs) in weights.neighbors.iter().enumerate() {
        for &(j, w) in nbrs {
            let d = (current[i] - current[j]) - rotations[i] * (rest[i] - rest[j]);
            e += w * d.norm_squared();
        }
    }
    for c in controls {
        e += penalty * (current[c.vertex] - c.target).norm_squared();
    }
    e
}

/// Best-fit rotation of vertex i's one-ring (Kabsch with reflection fix).
fn fit_rotation(
    rest: &[Vector3<f64>],
    current: &[Vector3<f64>],
    i: usize,
    nbrs: &[(usize, f64)],
) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for &(j, w) in nbrs {
        let ep = rest[i] - rest[j];
        let eq = current[i] - current[j];
        s += w * ep * eq.transpose();
    }
    let svd = s.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        // Flip the singular direction with the smallest singular value.
        let mut v = vt.transpose();
        v.column_mut(2).neg_mut();
        r = v * u.transpose();
    }
    r
}

/// Best-fit rigid motion of the control pairs (Kabsch), used to pre-align
/// the mesh before the alternation. Requires three well-spread controls;
/// returns None when the rotation is underdetermined.
fn control_rigid_fit(rest: &[Vector3<f64>], controls: &[ControlPoint]) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    if controls.len() < 3 {
        return None;
    }
    let k = controls.len() as f64;
    let mut c_rest = Vector3::zeros();
    let mut c_tgt = Vector3::zeros();
    for c in controls {
        c_rest += rest[c.vertex];
        c_tgt += c.target;
    }
    c_rest /= k;
    c_tgt /= k;
    let mut s = Matrix3::zeros();
    for c in controls {
        s += (rest[c.vertex] - c_rest) * (c.target - c_tgt).transpose();
    }
    let svd = s.svd(true, true);
    if svd.singular_values[1] < 1e-12 {
        // Collinear controls leave the rotation underdetermined.
        return None;
    }
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut v = vt.transpose();
        v.column_mut(2).neg_mut();
        r = v * u.transpose();
    }
    Some((r, c_tgt - r * c_rest))
}

/// Local-global ARAP with soft control constraints.
///
/// The mesh is pre-aligned by the controls' best-fit rigid motion (so rigid
/// control sets start at their zero-energy solution), then alternates. Local
/// step: per-vertex best-fit rotations via 3×3 SVD. Global step: one banded
/// Cholesky solve per coordinate of the cotangent Laplacian plus the control
/// penalty (factored once; the matrix is constant across iterations). With no
/// controls at all the null space is fixed by anchoring vertex 0 to its rest
/// position. The reported objective is non-increasing per iteration.
pub fn arap_solve(
    mesh: &LabeledMesh,
    controls: &[ControlPoint],
    config: &ArapConfig,
) -> Result<ArapOutcome> {
    mesh.validate()?;
    let n = mesh.vertices.len();
    for (k, c) in controls.iter().enumerate() {
        if c.vertex >= n {
            return Err(Error::invalid(
                format!("controls[{k}]"),
                format!("vertex {} out of range", c.vertex),
            ));
        }
        if !(c.target.x.is_finite() && c.target.y.is_finite() && c.target.z.is_finite()) {
            return Err(Error::NonFinite { context: format!("controls[{k}]") });
        }
    }
    let anchored: Vec<ControlPoint> = if controls.is_empty() {
        vec![ControlPoint { vertex: 0, target: mesh.vertices[0] }]
    } else {
        controls.to_vec()
    };

    let weights = cotangent_weights(mesh, config.uniform_weights);
    let rest = &mesh.vertices;

    // Assemble L + penalty·C once, reordered by RCM for a narrow band.
    let adjacency = mesh.adjacency();
    let perm = reverse_cuthill_mckee(&adjacency);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let bandwidth = ordered_bandwidth(&adjacency, &perm);
    let mut sys = BandedSpd::zeros(n, bandwidth);
    for (i, nbrs) in weights.neighbors.iter().enumerate() {
        for &(j, w) in nbrs {
            sys.add(inv[i], inv[i], w);
            if inv[j] <= inv[i] {
                sys.add(inv[i], inv[j], -w);
            }
        }
    }
    for c in &anchored {
        let p = inv[c.vertex];
        sys.add(p, p, config.penalty);
    }
    sys.cholesky().map_err(|_| Error::SingularSystem { context: "ARAP global step".into() })?;

    let (mut current, mut rotations) = match control_rigid_fit(rest, &anchored) {
        Some((r, t)) => (
            rest.iter().map(|p| r * p + t).collect::<Vec<_>>(),
            vec![r; n],
        ),
        None => (mesh.vertices.clone(), vec![Matrix3::identity(); n]),
    };
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut energy = arap_energy(rest, &current, &rotations, &weights, &anchored, config.penalty);
    if !energy.is_finite() {
        return Err(Error::NonFinite { context: "ARAP energy".into() });
    }
    trace.push(energy);

    for _ in 0..config.iterations {
        // Local step: per-vertex rotation fit (parallel).
        rotations = (0..n)
            .into_par_iter()
            .map(|i| fit_rotation(rest, &current, i, &weights.neighbors[i]))
            .collect();

        // Global step: solve per coordinate.
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, nbrs) in weights.neighbors.iter().enumerate() {
            let mut b = Vector3::zeros();
            for &(j, w) in nbrs {
                b += (w * 0.5) * ((rotations[i] + rotations[j]) * (rest[i] - rest[j]));
            }
            let p = inv[i];
            rhs[0][p] = b.x;
            rhs[1][p] = b.y;
            rhs[2][p] = b.z;
        }
        for c in &anchored {
            let p = inv[c.vertex];
            rhs[0][p] += config.penalty * c.target.x;
            rhs[1][p] += config.penalty * c.target.y;
            rhs[2][p] += config.penalty * c.target.z;
        }
        for r in rhs.iter_mut() {
            sys.solve_in_place(r);
        }
        for i in 0..n {
            let p = inv[i];
            current[i] = Vector3::new(rhs[0][p], rhs[1][p], rhs[2][p]);
        }

        let next = arap_energy(rest, &current, &rotations, &weights, &anchored, config.penalty);
        if !next.is_finite() {
            return Err(Error::NonFinite { context: "ARAP energy".into() });
        }
        let rel_change = (energy - next).abs() / energy.abs().max(1e-30);
        energy = next;
        trace.push(energy);
        if rel_change < config.tolerance {
            break;
        }
    }

    let mut out = mesh.clone();
    out.vertices = current;
    Ok(ArapOutcome { mesh: out, energy_trace: trace })
}
