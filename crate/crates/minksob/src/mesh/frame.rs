//! Per-vertex orthonormal frames: spacelike tangent basis, spacelike unit
//! normals, and the past-pointing unit timelike normal.

use super::SpacelikeMesh;
use crate::lorentz::{mink_inner, MinkVec};
use crate::Error;
use nalgebra::DMatrix;

/// Ratio `λ_m / λ_1` of the tangent scatter spectrum below which the vertex
/// star no longer determines an m-dimensional tangent plane.
const SCATTER_RATIO_TOL: f64 = 1e-8;

/// Minkowski-orthonormal frame at every vertex. `tangent[v]` holds `m`
/// spacelike unit vectors spanning the estimated tangent plane,
/// `spacelike_normals[v]` holds `n - m` spacelike unit normals, and `nu[v]`
/// is the unique past-pointing unit timelike normal. All pairs are
/// Minkowski-orthogonal.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub tangent: Vec<Vec<MinkVec>>,
    pub spacelike_normals: Vec<Vec<MinkVec>>,
    pub nu: Vec<MinkVec>,
}

/// Tangent plane at a vertex from the scatter of incident face tangent
/// projectors, Gram-Schmidt-orthonormalized in the Minkowski metric.
pub(crate) fn vertex_tangent_basis(
    mesh: &SpacelikeMesh,
    v: usize,
) -> Result<Vec<MinkVec>, Error> {
    let dim = mesh.n() + 1;
    let m = mesh.m();
    let mut scatter = DMatrix::<f64>::zeros(dim, dim);
    for &s in mesh.vertex_simplices(v) {
        let geo = mesh.geometry(s);
        // vol * Σ_ij G^{ij} E_i E_j^T : PSD with column space = face tangent
        for i in 0..m {
            for j in 0..m {
                let w = geo.volume * geo.ginv[(i, j)];
                for a in 0..dim {
                    for b in 0..dim {
                        scatter[(a, b)] += w * geo.edges[i].0[a] * geo.edges[j].0[b];
                    }
                }
            }
        }
    }
    let eig = scatter.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) || eig.eigenvalues[order[m - 1]] <= SCATTER_RATIO_TOL * top {
        return Err(Error::DegenerateVertexStar(v));
    }
    let mut basis: Vec<MinkVec> = Vec::with_capacity(m);
    for &k in order.iter().take(m) {
        let mut w = MinkVec(eig.eigenvectors.column(k).iter().cloned().collect());
        for u in &basis {
            w = w.axpy(-mink_inner(&w, u), u);
        }
        let q = mink_inner(&w, &w);
        if q <= 1e-10 * w.euclid_norm().powi(2).max(1e-300) {
            return Err(Error::DegenerateVertexStar(v));
        }
        basis.push(w.scale(1.0 / q.sqrt()));
    }
    Ok(basis)
}

/// Builds the full normal frame: tangent bases from face scatter, spacelike
/// normals by Minkowski Gram-Schmidt over the spatial coordinate axes
/// (skipping axes whose residual is degenerate or non-spacelike), and the
/// timelike normal as the unique past-pointing unit complement. Spacelike
/// normal signs are aligned across neighboring vertices by breadth-first
/// propagation.
pub fn normal_frame(mesh: &SpacelikeMesh) -> Result<NormalFrame, Error> {
    let nv = mesh.num_vertices();
    let n = mesh.n();
    let m = mesh.m();
    let dim = n + 1;
    let mut tangent = Vec::with_capacity(nv);
    let mut spacelike_normals = Vec::with_capacity(nv);
    let mut nu = Vec::with_capacity(nv);

    for v in 0..nv {
        let tbasis = vertex_tangent_basis(mesh, v)?;
        let mut units: Vec<MinkVec> = tbasis.clone();
        let mut normals: Vec<MinkVec> = Vec::with_capacity(n - m);
        for axis in 1..dim {
            if normals.len() == n - m {
                break;
            }
            let mut w = MinkVec::zeros(dim);
            w.0[axis] = 1.0;
            for u in &units {
                w = w.axpy(-mink_inner(&w, u), u);
            }
            let q = mink_inner(&w, &w);
            // a residual that is tiny lies in the span already; a timelike
            // residual belongs to the slot of the timelike normal
            if q <= 1e-8 {
                continue;
            }
            let unit = w.scale(1.0 / q.sqrt());
            normals.push(unit.clone());
            units.push(unit);
        }
        if normals.len() != n - m {
            return Err(Error::DegenerateVertexStar(v));
        }

        // complement of n spacelike units: Euclidean kernel of rows (J u_k)
        let mut b = DMatrix::<f64>::zeros(dim, dim);
        for u in &units {
            let mut row = u.0.clone();
            row[0] = -row[0];
            for a in 0..dim {
                for c in 0..dim {
                    b[(a, c)] += row[a] * row[c];
                }
            }
        }
        let eig = b.symmetric_eigen();
        let mut min_k = 0;
        for k in 1..dim {
            if eig.eigenvalues[k] < eig.eigenvalues[min_k] {
                min_k = k;
            }
        }
        let mut w = MinkVec(eig.eigenvectors.column(min_k).iter().cloned().collect());
        for u in &units {
            w = w.axpy(-mink_inner(&w, u), u);
        }
        let q = mink_inner(&w, &w);
        if q >= -1e-12 {
            return Err(Error::DegenerateVertexStar(v));
        }
        let mut timelike = w.scale(1.0 / (-q).sqrt());
        if timelike.0[0] > 0.0 {
            timelike = timelike.scale(-1.0);
        }
        tangent.push(tbasis);
        spacelike_normals.push(normals);
        nu.push(timelike);
    }

    // sign alignment of spacelike normals across the mesh
    if n > m {
        let mut visited = vec![false; nv];
        for root in 0..nv {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(p) = queue.pop_front() {
                for &w in mesh.neighbors(p) {
                    if visited[w] {
                        continue;
                    }
                    visited[w] = true;
                    for slot in 0..(n - m) {
                        let dot: f64 = spacelike_normals[w][slot]
                            .0
                            .iter()
                            .zip(&spacelike_normals[p][slot].0)
                            .map(|(a, b)| a * b)
                            .sum();
                        if dot < 0.0 {
                            spacelike_normals[w][slot] =
                                spacelike_normals[w][slot].scale(-1.0);
                        }
                    }
                    queue.push_back(w);
                }
            }
        }
    }

    Ok(NormalFrame {
        tangent,
        spacelike_normals,
        nu,
    })
}

/// Largest time dilation `max_v |ν_0(v)|` of the frame. Always `>= 1` for a
/// genuine unit timelike field; values below `1 - 1e-9` indicate a broken
/// frame and error out, values within roundoff of 1 are clamped up.
pub fn maximal_slope(frame: &NormalFrame) -> Result<f64, Error> {
    let mut tau: f64 = 0.0;
    for nu in &frame.nu {
        tau = tau.max(-nu.0[0]);
    }
    if tau < 1.0 - 1e-9 {
        return Err(Error::SlopeBelowOne(tau));
    }
    Ok(tau.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::AmbientMap;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mv(coords: &[f64]) -> MinkVec {
        MinkVec(coords.to_vec())
    }

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

    fn check_orthonormal(mesh: &SpacelikeMesh, frame: &NormalFrame, tol: f64) {
        for v in 0..mesh.num_vertices() {
            let mut units: Vec<&MinkVec> = frame.tangent[v].iter().collect();
            units.extend(frame.spacelike_normals[v].iter());
            for (i, a) in units.iter().enumerate() {
                for (j, b) in units.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(mink_inner(a, b), want, epsilon = tol);
                }
                assert_relative_eq!(mink_inner(a, &frame.nu[v]), 0.0, epsilon = tol);
            }
            assert_relative_eq!(
                mink_inner(&frame.nu[v], &frame.nu[v]),
                -1.0,
                epsilon = tol
            );
            assert!(frame.nu[v].0[0] < 0.0);
        }
    }

    #[test]
    fn flat_plane_frame() {
        let mesh = flat_quad();
        let frame = normal_frame(&mesh).unwrap();
        check_orthonormal(&mesh, &frame, 1e-12);
        for v in 0..mesh.num_vertices() {
            assert_relative_eq!(frame.nu[v].0[0], -1.0, epsilon = 1e-12);
            assert_relative_eq!(frame.nu[v].0[1], 0.0, epsilon = 1e-12);
            assert_relative_eq!(frame.nu[v].0[2], 0.0, epsilon = 1e-12);
        }
        assert_relative_eq!(maximal_slope(&frame).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tilted_graph_frame_and_slope() {
        // x0 = 0.5 x1: ν = (-1, -0.5, 0)/sqrt(0.75), τ = 1/sqrt(0.75)
        let k = 0.5;
        let verts: Vec<MinkVec> = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
        ]
        .iter()
        .map(|&[x1, x2]| mv(&[k * x1, x1, x2]))
        .collect();
        let mesh =
            SpacelikeMesh::new(2, 2, verts, vec![vec![0, 1, 2], vec![1, 3, 2]]).unwrap();
        let frame = normal_frame(&mesh).unwrap();
        check_orthonormal(&mesh, &frame, 1e-12);
        let s = (1.0f64 - k * k).sqrt();
        for v in 0..mesh.num_vertices() {
            assert_relative_eq!(frame.nu[v].0[0], -1.0 / s, epsilon = 1e-12);
            assert_relative_eq!(frame.nu[v].0[1], -k / s, epsilon = 1e-12);
        }
        assert_relative_eq!(
            maximal_slope(&frame).unwrap(),
            1.0 / s,
            epsilon = 1e-12
        );
    }

    #[test]
    fn circle_in_higher_codimension() {
        // unit circle in the {x0 = 0, x3 = 0} plane of R^{3,1}
        let nseg = 64;
        let mut verts = Vec::new();
        let mut segs = Vec::new();
        for k in 0..nseg {
            let th = 2.0 * std::f64::consts::PI * k as f64 / nseg as f64;
            verts.push(mv(&[0.0, th.cos(), th.sin(), 0.0]));
            segs.push(vec![k, (k + 1) % nseg]);
        }
        let mesh = SpacelikeMesh::new(3, 1, verts, segs).unwrap();
        assert!(!mesh.has_boundary());
        let frame = normal_frame(&mesh).unwrap();
        check_orthonormal(&mesh, &frame, 1e-9);
        for v in 0..mesh.num_vertices() {
            // one spacelike normal is radial, the other is e3; ν = -e0
            assert_relative_eq!(frame.nu[v].0[0], -1.0, epsilon = 1e-9);
            let radial = &frame.spacelike_normals[v][0];
            let x = mesh.vertex(v);
            let along = radial.0[1] * x.0[1] + radial.0[2] * x.0[2];
            assert_relative_eq!(along.abs(), 1.0, epsilon = 1e-6);
            assert_relative_eq!(frame.spacelike_normals[v][1].0[3].abs(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn boosted_flat_plane_slope_is_gamma() {
        let v = 0.6;
        let gamma = 1.0 / (1.0f64 - v * v).sqrt();
        let mesh = flat_quad()
            .transform(&AmbientMap::boost(3, 1, v).unwrap())
            .unwrap();
        let frame = normal_frame(&mesh).unwrap();
        check_orthonormal(&mesh, &frame, 1e-10);
        assert_relative_eq!(maximal_slope(&frame).unwrap(), gamma, epsilon = 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn frame_stays_orthonormal_under_isometries(
            speed in -0.8f64..0.8,
            angle in 0.0f64..6.283,
        ) {
            let map = AmbientMap::boost(3, 1, speed).unwrap()
                .compose(&AmbientMap::rotation(3, 1, 2, angle).unwrap());
            let mesh = flat_quad().transform(&map).unwrap();
            let frame = normal_frame(&mesh).unwrap();
            check_orthonormal(&mesh, &frame, 1e-9);
        }
    }
}
