//! Simplicial meshes of compact spacelike `m`-submanifolds of `R^{n,1}`.
//!
//! A mesh is a list of vertices in ambient coordinates plus a list of
//! `m`-simplices. Construction validates that every simplex is genuinely
//! spacelike (its Minkowski Gram matrix is positive definite), that the
//! complex is a manifold with boundary, and precomputes the topology and
//! per-simplex geometry everything else relies on.

mod curvature;
mod frame;

pub use curvature::{
    hessian_identity_check, is_mean_convex, second_fundamental_form, AmbientScalar,
    CoordinateHeight, CurvatureData, FitContext, HalfMinkowskiSquare,
};
pub(crate) use curvature::mean_convexity_violation;
pub use frame::{maximal_slope, normal_frame, NormalFrame};

use crate::lorentz::{mink_inner, mink_norm, AmbientMap, MinkVec};
use crate::Error;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative eigenvalue threshold below which a simplex counts as degenerate:
/// the Gram matrix must satisfy `λ_min > SPACELIKE_EIG_TOL · (max edge
/// Euclidean length)²`. Near-lightlike simplices have a Gram eigenvalue that
/// collapses while their Euclidean extent does not, so they are caught here.
pub const SPACELIKE_EIG_TOL: f64 = 1e-10;

/// Cached geometry of one simplex.
#[derive(Debug, Clone)]
pub struct SimplexGeometry {
    /// Edge vectors `V_i - V_0`, `i = 1..=m`.
    pub edges: Vec<MinkVec>,
    /// Inverse of the induced Gram matrix.
    pub ginv: DMatrix<f64>,
    /// Induced m-volume `√(det G) / m!`.
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct SpacelikeMesh {
    n: usize,
    m: usize,
    vertices: Vec<MinkVec>,
    simplices: Vec<Vec<usize>>,
    geometry: Vec<SimplexGeometry>,
    vertex_simplices: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    boundary_faces: Vec<Vec<usize>>,
    is_boundary: Vec<bool>,
    boundary_vertices: Vec<usize>,
    lumped_area: Vec<f64>,
    lumped_boundary: Vec<f64>,
    boundary_conormals: Vec<Option<MinkVec>>,
}

/// Serialized form; `vertices` are ambient coordinates `(x0, ..., xn)` and
/// `simplices` are vertex index lists of length `m + 1`. Boundary data is
/// not stored: it is re-derived from the simplicial topology on load.
#[derive(Debug, Serialize, Deserialize)]
struct MeshFile {
    n: usize,
    m: usize,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<usize>>,
}

impl SpacelikeMesh {
    pub fn new(
        n: usize,
        m: usize,
        vertices: Vec<MinkVec>,
        simplices: Vec<Vec<usize>>,
    ) -> Result<Self, Error> {
        if m < 1 || m > n {
            return Err(Error::DimensionMismatch(format!(
                "need 1 <= m <= n for a spacelike m-submanifold, got m = {m}, n = {n}"
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.dim() != n + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "vertex {i} has {} coordinates, expected {}",
                    v.dim(),
                    n + 1
                )));
            }
            if v.0.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parse(format!("vertex {i} has non-finite coordinates")));
            }
        }
        let nv = vertices.len();
        for (s, simplex) in simplices.iter().enumerate() {
            if simplex.len() != m + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "simplex {s} has {} vertices, expected {}",
                    simplex.len(),
                    m + 1
                )));
            }
            for &idx in simplex {
                if idx >= nv {
                    return Err(Error::DimensionMismatch(format!(
                        "simplex {s} references vertex {idx}, mesh has {nv}"
                    )));
                }
            }
            let mut sorted = simplex.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != m + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "simplex {s} repeats a vertex: {simplex:?}"
                )));
            }
        }

        let geometry = simplices
            .iter()
            .enumerate()
            .map(|(s, simplex)| simplex_geometry(&vertices, simplex, m, s))
            .collect::<Result<Vec<_>, _>>()?;

        // manifold-with-boundary check: every (m-1)-face in at most two simplices
        let mut face_count: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for simplex in &simplices {
            for drop in 0..simplex.len() {
                let mut face: Vec<usize> = simplex
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != drop)
                    .map(|(_, &v)| v)
                    .collect();
                face.sort_unstable();
                *face_count.entry(face).or_insert(0) += 1;
            }
        }
        for (face, count) in &face_count {
            if *count > 2 {
                return Err(Error::NonManifold(face.clone()));
            }
        }
        let boundary_faces: Vec<Vec<usize>> = face_count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(f, _)| f.clone())
            .collect();

        let mut is_boundary = vec![false; nv];
        for face in &boundary_faces {
            for &v in face {
                is_boundary[v] = true;
            }
        }
        let boundary_vertices: Vec<usize> =
            (0..nv).filter(|&v| is_boundary[v]).collect();

        let mut vertex_simplices = vec![Vec::new(); nv];
        for (s, simplex) in simplices.iter().enumerate() {
            for &v in simplex {
                vertex_simplices[v].push(s);
            }
        }

        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for simplex in &simplices {
            for &a in simplex {
                for &b in simplex {
                    if a != b && !neighbors[a].contains(&b) {
                        neighbors[a].push(b);
                    }
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let mut lumped_area = vec![0.0; nv];
        for (simplex, geo) in simplices.iter().zip(&geometry) {
            let share = geo.volume / (m + 1) as f64;
            for &v in simplex {
                lumped_area[v] += share;
            }
        }

        let mut mesh = SpacelikeMesh {
            n,
            m,
            vertices,
            simplices,
            geometry,
            vertex_simplices,
            neighbors,
            boundary_faces,
            is_boundary,
            boundary_vertices,
            lumped_area,
            lumped_boundary: vec![0.0; nv],
            boundary_conormals: vec![None; nv],
        };
        mesh.compute_boundary_measures()?;
        mesh.compute_conormals()?;
        Ok(mesh)
    }

    fn compute_boundary_measures(&mut self) -> Result<(), Error> {
        let m = self.m;
        for face in &self.boundary_faces {
            let measure = if m == 1 {
                1.0 // counting measure on 0-dimensional boundary
            } else {
                let geo = simplex_geometry(&self.vertices, face, m - 1, usize::MAX)
                    .map_err(|_| Error::NotSpacelike("degenerate boundary face".into()))?;
                geo.volume
            };
            for &v in face {
                self.lumped_boundary[v] += measure / m as f64;
            }
        }
        Ok(())
    }

    /// Outward unit conormal at each boundary vertex: the direction away
    /// from the centroid of the vertex's interior neighbors, projected onto
    /// the vertex tangent plane and normalized.
    fn compute_conormals(&mut self) -> Result<(), Error> {
        for &v in &self.boundary_vertices.clone() {
            let tangent = frame::vertex_tangent_basis(self, v)?;
            let inward: Vec<usize> = self.neighbors[v]
                .iter()
                .copied()
                .filter(|&w| !self.is_boundary[w])
                .collect();
            let pool = if inward.is_empty() {
                &self.neighbors[v]
            } else {
                &inward
            };
            let mut centroid = MinkVec::zeros(self.n + 1);
            for &w in pool {
                centroid = centroid.add(&self.vertices[w]);
            }
            centroid = centroid.scale(1.0 / pool.len() as f64);
            let outward = self.vertices[v].sub(&centroid);
            let mut eta = MinkVec::zeros(self.n + 1);
            for t in &tangent {
                eta = eta.axpy(mink_inner(&outward, t), t);
            }
            let norm = mink_norm(&eta);
            if norm < 1e-12 * outward.euclid_norm().max(1e-300) {
                // outward direction happens to be normal; any tangent works
                eta = tangent[0].clone();
            } else {
                eta = eta.scale(1.0 / norm);
            }
            self.boundary_conormals[v] = Some(eta);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn vertex(&self, i: usize) -> &MinkVec {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[MinkVec] {
        &self.vertices
    }

    pub fn simplex(&self, s: usize) -> &[usize] {
        &self.simplices[s]
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn geometry(&self, s: usize) -> &SimplexGeometry {
        &self.geometry[s]
    }

    pub fn vertex_simplices(&self, v: usize) -> &[usize] {
        &self.vertex_simplices[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(move |&v| !self.is_boundary[v])
    }

    pub fn boundary_faces(&self) -> &[Vec<usize>] {
        &self.boundary_faces
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary_faces.is_empty()
    }

    /// Lumped vertex measure `A_v = Σ_{S ∋ v} |S| / (m+1)`.
    pub fn lumped_area(&self, v: usize) -> f64 {
        self.lumped_area[v]
    }

    /// Lumped boundary measure of a vertex (zero for interior vertices).
    pub fn lumped_boundary(&self, v: usize) -> f64 {
        self.lumped_boundary[v]
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.lumped_boundary.iter().sum()
    }

    pub fn boundary_conormal(&self, v: usize) -> Option<&MinkVec> {
        self.boundary_conormals[v].as_ref()
    }

    /// Mean induced edge length; the `h` entering resolution-scaled
    /// tolerances.
    pub fn mean_edge_length(&self) -> f64 {
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0.0;
        let mut count = 0usize;
        for simplex in &self.simplices {
            for i in 0..simplex.len() {
                for j in (i + 1)..simplex.len() {
                    let key = (simplex[i].min(simplex[j]), simplex[i].max(simplex[j]));
                    if seen.insert(key) {
                        total += mink_norm(&self.vertices[key.1].sub(&self.vertices[key.0]));
                        count += 1;
                    }
                }
            }
        }
        total / count.max(1) as f64
    }

    /// Per-coordinate bounding interval of the vertex set.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n + 1];
        for v in &self.vertices {
            for (b, &c) in bounds.iter_mut().zip(&v.0) {
                b.0 = b.0.min(c);
                b.1 = b.1.max(c);
            }
        }
        bounds
    }

    /// Euclidean diagonal of the bounding box; the `diam` used when choosing
    /// blow-down radii `r = k · diam`.
    pub fn diameter_euclid(&self) -> f64 {
        self.bounding_box()
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Applies an ambient linear map to every vertex and revalidates.
    pub fn transform(&self, map: &AmbientMap) -> Result<SpacelikeMesh, Error> {
        SpacelikeMesh::new(
            self.n,
            self.m,
            self.vertices.iter().map(|v| map.apply(v)).collect(),
            self.simplices.clone(),
        )
    }

    /// Gradient of a piecewise-linear scalar on simplex `s`, as an ambient
    /// tangent vector: `∇φ = Σ_{ij} G^{ij} (φ_j - φ_0) E_i`.
    pub fn face_gradient(&self, s: usize, values: &[f64]) -> MinkVec {
        let simplex = &self.simplices[s];
        let geo = &self.geometry[s];
        let deltas = DVector::from_iterator(
            self.m,
            simplex[1..]
                .iter()
                .map(|&v| values[v] - values[simplex[0]]),
        );
        let coeffs = &geo.ginv * deltas;
        let mut grad = MinkVec::zeros(self.n + 1);
        for (i, edge) in geo.edges.iter().enumerate() {
            grad = grad.axpy(coeffs[i], edge);
        }
        grad
    }

    pub fn to_json_string(&self) -> Result<String, Error> {
        let file = MeshFile {
            n: self.n,
            m: self.m,
            vertices: self.vertices.iter().map(|v| v.0.clone()).collect(),
            simplices: self.simplices.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(s: &str) -> Result<SpacelikeMesh, Error> {
        let file: MeshFile = serde_json::from_str(s)?;
        SpacelikeMesh::new(
            file.n,
            file.m,
            file.vertices.into_iter().map(MinkVec).collect(),
            file.simplices,
        )
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<SpacelikeMesh, Error> {
        SpacelikeMesh::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn simplex_geometry(
    vertices: &[MinkVec],
    simplex: &[usize],
    dim: usize,
    label: usize,
) -> Result<SimplexGeometry, Error> {
    let base = &vertices[simplex[0]];
    let edges: Vec<MinkVec> = simplex[1..].iter().map(|&v| vertices[v].sub(base)).collect();
    let mut gram = DMatrix::zeros(dim, dim);
    let mut max_edge_sq: f64 = 0.0;
    for i in 0..dim {
        for j in i..dim {
            let val = mink_inner(&edges[i], &edges[j]);
            gram[(i, j)] = val;
            gram[(j, i)] = val;
        }
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let d = edges[i].sub(&edges[j]);
            max_edge_sq = max_edge_sq.max(d.0.iter().map(|c| c * c).sum());
        }
        max_edge_sq = max_edge_sq.max(edges[i].0.iter().map(|c| c * c).sum());
    }
    let eig = gram.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = SPACELIKE_EIG_TOL * max_edge_sq;
    if !(min_eig > threshold) {
        return Err(Error::NonSpacelikeSimplex {
            simplex: label,
            min_eig,
            threshold,
        });
    }
    let det: f64 = eig.eigenvalues.iter().product();
    let factorial: f64 = (1..=dim).map(|k| k as f64).product();
    let volume = det.sqrt() / factorial;
    let ginv = gram
        .try_inverse()
        .ok_or(Error::NonSpacelikeSimplex {
            simplex: label,
            min_eig,
            threshold,
        })?;
    Ok(SimplexGeometry {
        edges,
        ginv,
        volume,
    })
}

/// Induced metric (Minkowski Gram matrix of the edge vectors) of simplex
/// `s`; errors if the simplex fails the spacelike test.
pub fn induced_metric(mesh: &SpacelikeMesh, s: usize) -> Result<DMatrix<f64>, Error> {
    let simplex = mesh.simplex(s);
    let base = mesh.vertex(simplex[0]);
    let m = mesh.m();
    let edges: Vec<MinkVec> = simplex[1..].iter().map(|&v| mesh.vertex(v).sub(base)).collect();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let val = mink_inner(&edges[i], &edges[j]);
            gram[(i, j)] = val;
            gram[(j, i)] = val;
        }
    }
    // meshes are validated on construction, but re-check so callers can use
    // this on candidate simplices after a transform
    let min_eig = gram
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig <= 0.0 {
        return Err(Error::NonSpacelikeSimplex {
            simplex: s,
            min_eig,
            threshold: 0.0,
        });
    }
    Ok(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mv(coords: &[f64]) -> MinkVec {
        MinkVec(coords.to_vec())
    }

    /// Two flat triangles sharing an edge, in the x0 = 0 plane of R^{2,1}.
    fn flat_quad() -> SpacelikeMesh {
        SpacelikeMesh::new(
            2,
            2,
            vec![
                mv(&[0.0, 0.0, 0.0]),
                mv(&[0.0, 1.0, 0.0]),
                mv(&[0.0, 0.0, 1.0]),
                mv(&[0.0, 1.0, 1.0]),
            ],
            vec![vec![0, 1, 2], vec![1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn induced_metric_flat_right_triangle() {
        let mesh = flat_quad();
        let g = induced_metric(&mesh, 0).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0);
        assert_relative_eq!(g[(1, 1)], 1.0);
        assert_relative_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn induced_metric_of_tilted_graph_triangle() {
        // graph x0 = 0.5 x1 over the unit legs
        let mesh = SpacelikeMesh::new(
            2,
            2,
            vec![
                mv(&[0.0, 0.0, 0.0]),
                mv(&[0.5, 1.0, 0.0]),
                mv(&[0.0, 0.0, 1.0]),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let g = induced_metric(&mesh, 0).unwrap();
        assert_relative_eq!(g[(0, 0)], 0.75);
        assert_relative_eq!(g[(1, 1)], 1.0);
        assert_relative_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn lightlike_edge_is_rejected() {
        let err = SpacelikeMesh::new(
            2,
            2,
            vec![
                mv(&[0.0, 0.0, 0.0]),
                mv(&[1.0, 1.0, 0.0]),
                mv(&[0.0, 0.0, 1.0]),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonSpacelikeSimplex { .. }));
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let err = SpacelikeMesh::new(
            2,
            2,
            vec![
                mv(&[0.0, 0.0, 0.0]),
                mv(&[0.0, 1.0, 0.0]),
                mv(&[0.0, 0.0, 1.0]),
                mv(&[0.0, 1.0, 1.0]),
                mv(&[0.0, -1.0, 1.0]),
            ],
            vec![vec![0, 1, 2], vec![1, 3, 2], vec![1, 4, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonManifold(_)));
    }

    #[test]
    fn boundary_of_two_triangles() {
        let mesh = flat_quad();
        assert_eq!(mesh.boundary_vertices(), &[0, 1, 2, 3]);
        assert_eq!(mesh.boundary_faces().len(), 4);
        assert_relative_eq!(mesh.total_area(), 1.0);
        assert_relative_eq!(mesh.boundary_measure(), 4.0);
    }

    #[test]
    fn lumped_areas_sum_to_total() {
        let mesh = flat_quad();
        let total: f64 = (0..mesh.num_vertices()).map(|v| mesh.lumped_area(v)).sum();
        assert_relative_eq!(total, mesh.total_area(), epsilon = 1e-14);
    }

    #[test]
    fn face_gradient_of_linear_function_is_exact() {
        let mesh = flat_quad();
        // φ = 2 x1 - 3 x2 sampled at vertices
        let values: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|v| 2.0 * v.0[1] - 3.0 * v.0[2])
            .collect();
        for s in 0..mesh.num_simplices() {
            let g = mesh.face_gradient(s, &values);
            assert_relative_eq!(g.0[1], 2.0, epsilon = 1e-12);
            assert_relative_eq!(g.0[2], -3.0, epsilon = 1e-12);
            assert_relative_eq!(g.0[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mesh = SpacelikeMesh::new(
            2,
            2,
            vec![
                mv(&[0.0, 0.1 + 0.2, 0.0]), // deliberately non-representable sum
                mv(&[1e-308, 1.0, -0.0]),
                mv(&[0.0, 0.3333333333333333, 1.0]),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let text = mesh.to_json_string().unwrap();
        let back = SpacelikeMesh::from_json_str(&text).unwrap();
        assert_eq!(back.num_vertices(), mesh.num_vertices());
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            for (x, y) in a.0.iter().zip(&b.0) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(mesh.simplices(), back.simplices());
    }

    #[test]
    fn transform_by_boost_keeps_mesh_valid() {
        let mesh = flat_quad();
        let boost = AmbientMap::boost(3, 1, 0.5).unwrap();
        let boosted = mesh.transform(&boost).unwrap();
        assert_eq!(boosted.num_simplices(), 2);
        // induced areas are boost-invariant
        assert_relative_eq!(boosted.total_area(), 1.0, epsilon = 1e-12);
    }
}
