//! Piecewise-linear reconstruction of the zero level set on the background
//! mesh, together with the surface parts, the interior surface edges and the
//! quadrature rules living on them.
//!
//! Each hexahedron is split into six Kuhn tetrahedra sharing the diagonal from
//! its lowest to its highest corner. Because that split is translation
//! invariant, neighboring cells triangulate their common face identically and
//! the extracted surface is watertight across cell boundaries. Surface points
//! are keyed by the lattice edge they lie on, so matching segments across a
//! face is exact.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::{Error, Result};
use crate::levelset::LevelSet;
use crate::mesh::{ActiveMesh, BackgroundMesh};
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Vertex values closer to zero than this (times `h`) are pushed to the positive side.
pub const VERTEX_SNAP_TOL: f64 = 1e-12;
/// Triangles with area below this (times `h^2`) are discarded.
pub const SLIVER_AREA_TOL: f64 = 1e-14;

/// Kuhn tetrahedra as local corner indices `a + 2 b + 4 c`.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// A lattice edge, identified by its two global vertex indices in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey(pub usize, pub usize);

impl EdgeKey {
    fn new(a: usize, b: usize) -> Self {
        if a < b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }
}

/// A boundary segment of a surface triangle, identified by its end points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct SegmentKey(EdgeKey, EdgeKey);

impl SegmentKey {
    fn new(a: EdgeKey, b: EdgeKey) -> Self {
        if a < b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GeometryOptions {
    /// Polynomial degree integrated exactly by every rule.
    pub quadrature_degree: usize,
    /// Replace surface integrals over the facets by integrals over the exact
    /// surface: lifted points, exact normals and the area element of the
    /// closest point map. Off by default.
    pub lifted_quadrature: bool,
}

impl GeometryOptions {
    /// Default rules of degree `2k + 2` for polynomial degree `k`.
    pub fn for_degree(k: usize) -> Self {
        Self {
            quadrature_degree: 2 * k + 2,
            lifted_quadrature: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceTriangle<T> {
    pub vertices: [Vec3<T>; 3],
    /// Unit normal pointing towards `phi > 0`.
    pub normal: Vec3<T>,
    pub area: T,
    keys: [EdgeKey; 3],
}

/// Surface quadrature point with the data every surface integral needs.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint<T> {
    pub x: Vec3<T>,
    pub weight: T,
    /// Normal defining the tangential projector at this point.
    pub normal: Vec3<T>,
    /// Closest point `p(x)` on the exact surface.
    pub lifted: Vec3<T>,
}

/// Surface part `K = Gamma_h ∩ T` of one active cell.
#[derive(Clone, Debug)]
pub struct SurfacePatch<T> {
    /// Background cell index.
    pub cell: usize,
    pub triangles: Vec<SurfaceTriangle<T>>,
    pub points: Vec<SurfacePoint<T>>,
}

impl<T: Real> SurfacePatch<T> {
    pub fn area(&self) -> T {
        self.triangles.iter().map(|t| t.area).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EdgePoint<T> {
    pub x: Vec3<T>,
    pub weight: T,
    pub lifted: Vec3<T>,
}

/// Interior edge `E = K+ ∩ K-` lying on the interior face `face`.
///
/// Index 0 of the per-side arrays refers to the `plus` cell of the face.
#[derive(Clone, Debug)]
pub struct SurfaceEdge<T> {
    pub face: usize,
    /// Active cell indices `[plus, minus]`.
    pub cells: [usize; 2],
    pub endpoints: [Vec3<T>; 2],
    /// Outward co-normals `n_E^+`, `n_E^-`.
    pub conormals: [Vec3<T>; 2],
    /// Normals of the owning facets.
    pub normals: [Vec3<T>; 2],
    pub points: Vec<EdgePoint<T>>,
}

impl<T: Real> SurfaceEdge<T> {
    pub fn length(&self) -> T {
        (self.endpoints[1] - self.endpoints[0]).norm()
    }
}

/// Counters for configurations the reconstruction had to discard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReconstructionStats {
    pub dropped_slivers: usize,
    /// Face segments whose partner belonged to a discarded sliver.
    pub sliver_segments: usize,
    /// Face segments on the boundary of the background box.
    pub open_segments: usize,
}

/// Everything the discretization needs to know about `Gamma_h`.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry<T> {
    mesh: BackgroundMesh<T>,
    levelset: LevelSet<T>,
    active: ActiveMesh,
    patches: Vec<SurfacePatch<T>>,
    edges: Vec<SurfaceEdge<T>>,
    options: GeometryOptions,
    stats: ReconstructionStats,
}

/// Level set values at the lattice vertices, with the near-zero snap applied.
pub fn vertex_values<T: Real>(levelset: &LevelSet<T>, mesh: &BackgroundMesh<T>) -> Vec<T> {
    let snap = T::lit(VERTEX_SNAP_TOL) * mesh.h();
    (0..mesh.num_vertices())
        .map(|v| {
            let phi = levelset.value(mesh.vertex_position(mesh.vertex_coords(v)));
            if phi.abs() < snap {
                snap
            } else {
                phi
            }
        })
        .collect()
}

fn corner_vertices<T: Real>(mesh: &BackgroundMesh<T>, cell: usize) -> [usize; 8] {
    let c = mesh.cell_coords(cell);
    let mut out = [0; 8];
    for (local, slot) in out.iter_mut().enumerate() {
        let ijk = [c[0] + (local & 1), c[1] + ((local >> 1) & 1), c[2] + ((local >> 2) & 1)];
        *slot = mesh.vertex_index(ijk);
    }
    out
}

/// Point where the linear interpolant vanishes on lattice edge `key`.
/// Computed from the canonically ordered end points so every cell sharing
/// the edge gets bit-identical coordinates.
fn edge_point<T: Real>(mesh: &BackgroundMesh<T>, values: &[T], key: EdgeKey) -> Vec3<T> {
    let (a, b) = (key.0, key.1);
    let xa = mesh.vertex_position(mesh.vertex_coords(a));
    let xb = mesh.vertex_position(mesh.vertex_coords(b));
    let t = values[a] / (values[a] - values[b]);
    xa + (xb - xa) * t
}

/// Raw triangles of the zero level set of the piecewise-linear interpolant
/// inside one background cell, before sliver removal.
fn cell_triangles<T: Real>(
    mesh: &BackgroundMesh<T>,
    values: &[T],
    cell: usize,
) -> Vec<SurfaceTriangle<T>> {
    let corners = corner_vertices(mesh, cell);
    let mut out = Vec::new();
    for tet in KUHN_TETS {
        let verts = tet.map(|l| corners[l]);
        let negative: Vec<usize> = (0..4).filter(|&i| values[verts[i]] < T::zero()).collect();
        let positive: Vec<usize> = (0..4).filter(|&i| values[verts[i]] >= T::zero()).collect();
        let pos = |i: usize| mesh.vertex_position(mesh.vertex_coords(verts[i]));
        // A positive minus a negative vertex orients the normal towards phi > 0.
        let orient = match (positive.first(), negative.first()) {
            (Some(&p), Some(&n)) => pos(p) - pos(n),
            _ => continue,
        };
        let key = |i: usize, j: usize| EdgeKey::new(verts[i], verts[j]);
        let mut polys: Vec<[EdgeKey; 3]> = Vec::new();
        match negative.len() {
            1 | 3 => {
                let (lone, others) = if negative.len() == 1 {
                    (negative[0], positive.clone())
                } else {
                    (positive[0], negative.clone())
                };
                polys.push([key(lone, others[0]), key(lone, others[1]), key(lone, others[2])]);
            }
            2 => {
                let (a, b) = (negative[0], negative[1]);
                let (c, d) = (positive[0], positive[1]);
                // Cyclic quad ac -> ad -> bd -> bc, split along its shorter diagonal.
                let quad = [key(a, c), key(a, d), key(b, d), key(b, c)];
                let p = quad.map(|k| edge_point(mesh, values, k));
                if (p[2] - p[0]).norm_squared() <= (p[3] - p[1]).norm_squared() {
                    polys.push([quad[0], quad[1], quad[2]]);
                    polys.push([quad[0], quad[2], quad[3]]);
                } else {
                    polys.push([quad[0], quad[1], quad[3]]);
                    polys.push([quad[1], quad[2], quad[3]]);
                }
            }
            _ => continue,
        }
        for keys in polys {
            let vertices = keys.map(|k| edge_point(mesh, values, k));
            let cross = (vertices[1] - vertices[0]).cross(vertices[2] - vertices[0]);
            let area = T::lit(0.5) * cross.norm();
            let mut normal = cross.normalized().unwrap_or_else(Vec3::zero);
            if normal.dot(orient) < T::zero() {
                normal = -normal;
            }
            out.push(SurfaceTriangle {
                vertices,
                normal,
                area,
                keys,
            });
        }
    }
    out
}

/// Reconstruction of `Gamma_h ∩ T` for a single background cell, with slivers removed.
pub fn reconstruct_cell<T: Real>(
    levelset: &LevelSet<T>,
    mesh: &BackgroundMesh<T>,
    cell: usize,
) -> Vec<SurfaceTriangle<T>> {
    let corners = corner_vertices(mesh, cell);
    let snap = T::lit(VERTEX_SNAP_TOL) * mesh.h();
    let mut values = vec![T::zero(); mesh.num_vertices()];
    for &v in &corners {
        let phi = levelset.value(mesh.vertex_position(mesh.vertex_coords(v)));
        values[v] = if phi.abs() < snap { snap } else { phi };
    }
    let min_area = T::lit(SLIVER_AREA_TOL) * mesh.h() * mesh.h();
    cell_triangles(mesh, &values, cell)
        .into_iter()
        .filter(|t| t.area >= min_area)
        .collect()
}

/// Face of `cell` containing both lattice edges, as `(axis, upper side)`.
fn shared_cell_face<T: Real>(
    mesh: &BackgroundMesh<T>,
    cell: usize,
    a: EdgeKey,
    b: EdgeKey,
) -> Option<(usize, bool)> {
    let c = mesh.cell_coords(cell);
    let coords = [a.0, a.1, b.0, b.1].map(|v| mesh.vertex_coords(v));
    for axis in 0..3 {
        for (upper, level) in [(false, c[axis]), (true, c[axis] + 1)] {
            if coords.iter().all(|v| v[axis] == level) {
                return Some((axis, upper));
            }
        }
    }
    None
}

fn conormal<T: Real>(tri: &SurfaceTriangle<T>, a: Vec3<T>, b: Vec3<T>, opposite: Vec3<T>) -> Vec3<T> {
    let m = tri
        .normal
        .cross(b - a)
        .normalized()
        .unwrap_or_else(Vec3::zero);
    let mid = (a + b) * T::lit(0.5);
    if (mid - opposite).dot(m) < T::zero() {
        -m
    } else {
        m
    }
}

struct PendingSegment {
    cell: usize,
    triangle: usize,
    /// Positions of the segment end points within the triangle.
    corners: [usize; 2],
    face: usize,
}

impl<T: Real> SurfaceGeometry<T> {
    /// Reconstructs `Gamma_h`, extracts the active mesh and builds all
    /// surface and edge quadrature rules.
    pub fn build(
        levelset: LevelSet<T>,
        mesh: BackgroundMesh<T>,
        options: GeometryOptions,
    ) -> Result<Self> {
        let values = vertex_values(&levelset, &mesh);
        let h = mesh.h();
        let min_area = T::lit(SLIVER_AREA_TOL) * h * h;
        let mut stats = ReconstructionStats::default();

        let mut kept: Vec<(usize, Vec<SurfaceTriangle<T>>)> = Vec::new();
        let mut dropped_segments: BTreeSet<SegmentKey> = BTreeSet::new();
        for cell in 0..mesh.num_cells() {
            let corners = corner_vertices(&mesh, cell);
            let any_neg = corners.iter().any(|&v| values[v] < T::zero());
            let any_pos = corners.iter().any(|&v| values[v] >= T::zero());
            if !(any_neg && any_pos) {
                continue;
            }
            let (good, slivers): (Vec<_>, Vec<_>) = cell_triangles(&mesh, &values, cell)
                .into_iter()
                .partition(|t| t.area >= min_area);
            stats.dropped_slivers += slivers.len();
            for t in &slivers {
                for e in 0..3 {
                    dropped_segments.insert(SegmentKey::new(t.keys[e], t.keys[(e + 1) % 3]));
                }
            }
            if !good.is_empty() {
                kept.push((cell, good));
            }
        }

        let active = ActiveMesh::from_cells(&mesh, kept.iter().map(|(c, _)| *c).collect())?;
        let degree = options.quadrature_degree;

        let mut patches = Vec::with_capacity(kept.len());
        for (cell, triangles) in kept {
            let mut points = Vec::new();
            for tri in &triangles {
                let rule = QuadratureRule::triangle(tri.vertices, degree)?;
                for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                    let lifted = levelset.closest_point(x)?;
                    let mut point = SurfacePoint {
                        x,
                        weight: w,
                        normal: tri.normal,
                        lifted,
                    };
                    if options.lifted_quadrature {
                        point.weight = w * lifted_area_element(&levelset, tri, x, h)?;
                        point.normal = levelset.extended_normal(lifted)?;
                    }
                    points.push(point);
                }
            }
            patches.push(SurfacePatch {
                cell,
                triangles,
                points,
            });
        }

        // Match face segments of neighboring patches.
        let mut pending: BTreeMap<SegmentKey, PendingSegment> = BTreeMap::new();
        let mut matched: Vec<(usize, PendingSegment, PendingSegment)> = Vec::new();
        for (local, patch) in patches.iter().enumerate() {
            for (ti, tri) in patch.triangles.iter().enumerate() {
                for e in 0..3 {
                    let (i, j) = (e, (e + 1) % 3);
                    let Some((axis, upper)) =
                        shared_cell_face(&mesh, patch.cell, tri.keys[i], tri.keys[j])
                    else {
                        continue;
                    };
                    let key = SegmentKey::new(tri.keys[i], tri.keys[j]);
                    let neighbor = mesh
                        .neighbor(patch.cell, axis, upper)
                        .and_then(|nb| active.local_index(nb));
                    let Some(neighbor) = neighbor else {
                        if mesh.neighbor(patch.cell, axis, upper).is_none() {
                            stats.open_segments += 1;
                            continue;
                        }
                        if dropped_segments.contains(&key) {
                            stats.sliver_segments += 1;
                            continue;
                        }
                        return Err(Error::UnmatchedSegment {
                            cell: patch.cell,
                            face: axis * 2 + usize::from(upper),
                        });
                    };
                    let face = active
                        .face_between(local, neighbor)
                        .expect("neighboring active cells share a face");
                    let seg = PendingSegment {
                        cell: local,
                        triangle: ti,
                        corners: [i, j],
                        face,
                    };
                    match pending.remove(&key) {
                        Some(other) => {
                            if other.face != face {
                                return Err(Error::UnmatchedSegment {
                                    cell: patch.cell,
                                    face,
                                });
                            }
                            matched.push((face, other, seg));
                        }
                        None => {
                            pending.insert(key, seg);
                        }
                    }
                }
            }
        }
        for (key, seg) in pending {
            if dropped_segments.contains(&key) {
                stats.sliver_segments += 1;
            } else {
                return Err(Error::UnmatchedSegment {
                    cell: active.cell(seg.cell),
                    face: seg.face,
                });
            }
        }

        matched.sort_by_key(|(face, a, _)| (*face, a.cell, a.triangle, a.corners));
        let mut edges = Vec::with_capacity(matched.len());
        for (face, s0, s1) in matched {
            let plus_cell = active.faces()[face].plus;
            let (sp, sm) = if s0.cell == plus_cell { (s0, s1) } else { (s1, s0) };
            let tri_p = &patches[sp.cell].triangles[sp.triangle];
            let tri_m = &patches[sm.cell].triangles[sm.triangle];
            let a = tri_p.vertices[sp.corners[0]];
            let b = tri_p.vertices[sp.corners[1]];
            let opp_p = tri_p.vertices[3 - sp.corners[0] - sp.corners[1]];
            let opp_m = tri_m.vertices[3 - sm.corners[0] - sm.corners[1]];
            let rule = QuadratureRule::segment(a, b, degree)?;
            let mut points = Vec::with_capacity(rule.len());
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                points.push(EdgePoint {
                    x,
                    weight: w,
                    lifted: levelset.closest_point(x)?,
                });
            }
            edges.push(SurfaceEdge {
                face,
                cells: [sp.cell, sm.cell],
                endpoints: [a, b],
                conormals: [conormal(tri_p, a, b, opp_p), conormal(tri_m, a, b, opp_m)],
                normals: [tri_p.normal, tri_m.normal],
                points,
            });
        }

        Ok(Self {
            mesh,
            levelset,
            active,
            patches,
            edges,
            options,
            stats,
        })
    }

    pub fn mesh(&self) -> &BackgroundMesh<T> {
        &self.mesh
    }

    pub fn levelset(&self) -> &LevelSet<T> {
        &self.levelset
    }

    pub fn active(&self) -> &ActiveMesh {
        &self.active
    }

    /// Surface patch of active cell `local`.
    pub fn patch(&self, local: usize) -> &SurfacePatch<T> {
        &self.patches[local]
    }

    pub fn patches(&self) -> &[SurfacePatch<T>] {
        &self.patches
    }

    pub fn edges(&self) -> &[SurfaceEdge<T>] {
        &self.edges
    }

    pub fn options(&self) -> GeometryOptions {
        self.options
    }

    pub fn stats(&self) -> ReconstructionStats {
        self.stats
    }

    pub fn h(&self) -> T {
        self.mesh.h()
    }

    /// Lower corner and size of active cell `local`.
    pub fn cell_box(&self, local: usize) -> (Vec3<T>, Vec3<T>) {
        (
            self.mesh.cell_origin(self.active.cell(local)),
            self.mesh.cell_size(),
        )
    }

    /// Tensor Gauss rule on the full active cell.
    pub fn volume_quadrature(&self, local: usize, degree: usize) -> Result<QuadratureRule<T>> {
        let (origin, size) = self.cell_box(local);
        QuadratureRule::cell(origin, size, degree)
    }

    /// Tensor Gauss rule on the full interior face.
    pub fn face_quadrature(&self, face: usize, degree: usize) -> Result<QuadratureRule<T>> {
        let f = self.active.faces()[face];
        let (mut origin, size) = self.cell_box(f.plus);
        origin[f.axis] += size[f.axis];
        QuadratureRule::face(origin, size, f.axis, degree)
    }

    /// Total area of `Gamma_h`.
    pub fn area(&self) -> T {
        self.patches.iter().map(|p| p.area()).sum()
    }

    /// Sum of surface quadrature weights (equals `area` unless lifted).
    pub fn quadrature_area(&self) -> T {
        self.patches
            .iter()
            .flat_map(|p| p.points.iter())
            .map(|q| q.weight)
            .sum()
    }

    /// `max |phi(x_q)|` over surface quadrature points.
    pub fn max_levelset_at_points(&self) -> T {
        self.patches
            .iter()
            .flat_map(|p| p.points.iter())
            .map(|q| self.levelset.value(q.x).abs())
            .fold(T::zero(), T::max)
    }

    /// `max |n_K - grad(phi) / |grad(phi)||` over surface quadrature points.
    pub fn max_normal_deviation(&self) -> Result<T> {
        let mut worst = T::zero();
        for patch in &self.patches {
            for tri in &patch.triangles {
                let centroid = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) * T::lit(1.0 / 3.0);
                let n = self.levelset.extended_normal(centroid)?;
                worst = worst.max((tri.normal - n).norm());
            }
            for q in &patch.points {
                let n = self.levelset.extended_normal(q.x)?;
                worst = worst.max((q.normal - n).norm());
            }
        }
        Ok(worst)
    }

    /// `max |n_E^+ + n_E^-|`, the co-planarity defect of the co-normals.
    pub fn max_conormal_defect(&self) -> T {
        self.edges
            .iter()
            .map(|e| (e.conormals[0] + e.conormals[1]).norm())
            .fold(T::zero(), T::max)
    }

    /// Writes the reconstructed surface as one triangle per line
    /// (`x0 y0 z0 x1 y1 z1 x2 y2 z2`).
    pub fn write_triangle_soup(&self, mut out: impl Write) -> Result<()> {
        for patch in &self.patches {
            for tri in &patch.triangles {
                let v = tri.vertices.map(|x| x.cast::<f64>());
                writeln!(
                    out,
                    "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    v[0].x, v[0].y, v[0].z, v[1].x, v[1].y, v[1].z, v[2].x, v[2].y, v[2].z
                )?;
            }
        }
        Ok(())
    }
}

/// Area element of the closest point map restricted to the facet plane.
fn lifted_area_element<T: Real>(
    levelset: &LevelSet<T>,
    tri: &SurfaceTriangle<T>,
    x: Vec3<T>,
    h: T,
) -> Result<T> {
    let t1 = (tri.vertices[1] - tri.vertices[0])
        .normalized()
        .ok_or(Error::NonFinite("facet tangent"))?;
    let t2 = tri.normal.cross(t1);
    let eps = T::lit(1e-5) * h;
    let two_eps = eps + eps;
    let d1 = (levelset.closest_point(x + t1 * eps)? - levelset.closest_point(x - t1 * eps)?)
        * (T::one() / two_eps);
    let d2 = (levelset.closest_point(x + t2 * eps)? - levelset.closest_point(x - t2 * eps)?)
        * (T::one() / two_eps);
    Ok(d1.cross(d2).norm())
}
