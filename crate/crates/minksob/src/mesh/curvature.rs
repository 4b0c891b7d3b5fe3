//! Pointwise curvature and Hessian recovery by weighted quadratic fits over
//! vertex stencils.
//!
//! Sign convention: the Gauss formula is written `∇̄_Y Z = ∇_Y Z - h(Y, Z)`,
//! so on the unit hyperboloid (past normal `ν = -X`) the second fundamental
//! form is `h(E_i, E_j) = δ_ij ν` and the mean curvature vector is `H = nν`.

use super::{NormalFrame, SpacelikeMesh};
use crate::lorentz::{mink_inner, MinkVec};
use crate::Error;
use nalgebra::{DMatrix, DVector};

/// Weighted least-squares stencil for quadratic fits around one vertex.
///
/// Neighbor offsets are expressed in the vertex tangent frame and rescaled
/// by the mean offset length, so the fitted linear and quadratic
/// coefficients must be unscaled by `scale` and `scale²` respectively.
#[derive(Debug, Clone)]
pub struct FitStencil {
    pub neighbors: Vec<usize>,
    pinv: DMatrix<f64>,
    sqrt_w: Vec<f64>,
    scale: f64,
}

/// Per-vertex fit stencils for a fixed mesh and frame.
#[derive(Debug, Clone)]
pub struct FitContext {
    stencils: Vec<FitStencil>,
    m: usize,
}

fn quad_columns(m: usize) -> usize {
    m + m * (m + 1) / 2
}

impl FitContext {
    pub fn new(mesh: &SpacelikeMesh, frame: &NormalFrame) -> Result<FitContext, Error> {
        let m = mesh.m();
        let needed = quad_columns(m);
        let mut stencils = Vec::with_capacity(mesh.num_vertices());
        for v in 0..mesh.num_vertices() {
            let mut ring: Vec<usize> = mesh.neighbors(v).to_vec();
            if ring.len() < needed + 1 {
                // one-sided or sparse star: widen to the two-ring
                let mut extra: Vec<usize> = Vec::new();
                for &w in mesh.neighbors(v) {
                    for &z in mesh.neighbors(w) {
                        if z != v && !ring.contains(&z) && !extra.contains(&z) {
                            extra.push(z);
                        }
                    }
                }
                extra.sort_unstable();
                ring.extend(extra);
            }
            if ring.len() < needed {
                return Err(Error::InsufficientNeighbors {
                    vertex: v,
                    got: ring.len(),
                    needed,
                });
            }
            let tangent = &frame.tangent[v];
            let base = mesh.vertex(v);
            let coords: Vec<Vec<f64>> = ring
                .iter()
                .map(|&w| {
                    let delta = mesh.vertex(w).sub(base);
                    tangent.iter().map(|t| mink_inner(&delta, t)).collect()
                })
                .collect();
            let scale = coords
                .iter()
                .map(|xi| xi.iter().map(|c| c * c).sum::<f64>().sqrt())
                .sum::<f64>()
                / ring.len() as f64;
            if !(scale > 0.0) {
                return Err(Error::DegenerateVertexStar(v));
            }
            let k = ring.len();
            let mut design = DMatrix::zeros(k, needed);
            let mut sqrt_w = Vec::with_capacity(k);
            for (row, xi) in coords.iter().enumerate() {
                let hat: Vec<f64> = xi.iter().map(|c| c / scale).collect();
                let r2: f64 = hat.iter().map(|c| c * c).sum();
                let sw = (-r2).exp().sqrt();
                sqrt_w.push(sw);
                for (i, &c) in hat.iter().enumerate() {
                    design[(row, i)] = sw * c;
                }
                let mut col = m;
                for i in 0..m {
                    for j in i..m {
                        design[(row, col)] = sw * hat[i] * hat[j];
                        col += 1;
                    }
                }
            }
            let pinv = design
                .pseudo_inverse(1e-12)
                .map_err(|_| Error::DegenerateVertexStar(v))?;
            stencils.push(FitStencil {
                neighbors: ring,
                pinv,
                sqrt_w,
                scale,
            });
        }
        Ok(FitContext { stencils, m })
    }

    pub fn stencil(&self, v: usize) -> &FitStencil {
        &self.stencils[v]
    }

    /// Fits `δ ≈ Σ g_i ξ_i + ½ Σ H_ij ξ_i ξ_j` from per-neighbor deviations
    /// (one per stencil neighbor, deviation from the value at the vertex).
    /// Returns the gradient and symmetric Hessian in the tangent frame.
    pub fn fit(&self, v: usize, deltas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let stencil = &self.stencils[v];
        assert_eq!(deltas.len(), stencil.neighbors.len());
        let m = self.m;
        let rhs = DVector::from_iterator(
            deltas.len(),
            deltas.iter().zip(&stencil.sqrt_w).map(|(d, w)| d * w),
        );
        let c = &stencil.pinv * rhs;
        let grad: Vec<f64> = (0..m).map(|i| c[i] / stencil.scale).collect();
        let s2 = stencil.scale * stencil.scale;
        let mut hess = DMatrix::zeros(m, m);
        let mut col = m;
        for i in 0..m {
            for j in i..m {
                if i == j {
                    hess[(i, i)] = 2.0 * c[col] / s2;
                } else {
                    hess[(i, j)] = c[col] / s2;
                    hess[(j, i)] = c[col] / s2;
                }
                col += 1;
            }
        }
        (grad, hess)
    }

    /// Fit of a scalar sampled at all mesh vertices.
    pub fn fit_scalar(&self, v: usize, values: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let deltas: Vec<f64> = self.stencils[v]
            .neighbors
            .iter()
            .map(|&w| values[w] - values[v])
            .collect();
        self.fit(v, &deltas)
    }
}

/// Second fundamental form and mean curvature at every vertex, expressed in
/// the vertex normal frame.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    /// `h_comps[v][k]` is the m×m coefficient matrix of `h` along the k-th
    /// frame normal; spacelike normals first, `ν` last.
    pub h_comps: Vec<Vec<DMatrix<f64>>>,
    /// `H = tr_g h` as an ambient vector.
    pub mean_curvature: Vec<MinkVec>,
    /// Projection of `H` onto the spacelike normal bundle.
    pub h_perp1: Vec<MinkVec>,
    /// Projection of `H` onto the line spanned by `ν`.
    pub h_perp2: Vec<MinkVec>,
}

impl CurvatureData {
    /// `⟨y, h_ij(v)⟩` for `y = Σ_α y_α e_α + t ν` given in frame
    /// coordinates (`y_frame = [y_1, ..., y_{n-m}, t]`).
    pub fn pairing(&self, v: usize, y_frame: &[f64]) -> DMatrix<f64> {
        let comps = &self.h_comps[v];
        assert_eq!(y_frame.len(), comps.len());
        let m = comps[0].nrows();
        let mut out = DMatrix::zeros(m, m);
        let last = comps.len() - 1;
        for (k, c) in comps.iter().enumerate() {
            // ⟨e_α, e_α⟩ = 1, ⟨ν, ν⟩ = -1
            let sign = if k == last { -1.0 } else { 1.0 };
            out += c * (sign * y_frame[k]);
        }
        out
    }
}

/// Fits the second fundamental form from the normal deviations of stencil
/// neighbors: for each frame normal `N`, the deviation coefficient of a
/// neighbor is its expansion coefficient along `N`, and `h^N = -(fitted
/// Hessian)`.
pub fn second_fundamental_form(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    ctx: &FitContext,
) -> Result<CurvatureData, Error> {
    let nv = mesh.num_vertices();
    let dim = mesh.n() + 1;
    let mut h_comps = Vec::with_capacity(nv);
    let mut mean_curvature = Vec::with_capacity(nv);
    let mut h_perp1 = Vec::with_capacity(nv);
    let mut h_perp2 = Vec::with_capacity(nv);
    for v in 0..nv {
        let stencil = ctx.stencil(v);
        let base = mesh.vertex(v);
        let deltas: Vec<MinkVec> = stencil
            .neighbors
            .iter()
            .map(|&w| mesh.vertex(w).sub(base))
            .collect();
        let mut normals: Vec<&MinkVec> = frame.spacelike_normals[v].iter().collect();
        normals.push(&frame.nu[v]);
        let last = normals.len() - 1;
        let mut comps = Vec::with_capacity(normals.len());
        let mut hvec = MinkVec::zeros(dim);
        let mut p1 = MinkVec::zeros(dim);
        let mut p2 = MinkVec::zeros(dim);
        for (k, normal) in normals.iter().enumerate() {
            // expansion coefficient along ν carries a sign: v = ... - ⟨v,ν⟩ν
            let sign = if k == last { -1.0 } else { 1.0 };
            let coeffs: Vec<f64> = deltas
                .iter()
                .map(|d| sign * mink_inner(d, normal))
                .collect();
            let (_, q) = ctx.fit(v, &coeffs);
            let h_n = -q;
            let trace = h_n.trace();
            hvec = hvec.axpy(trace, normal);
            if k == last {
                p2 = p2.axpy(trace, normal);
            } else {
                p1 = p1.axpy(trace, normal);
            }
            comps.push(h_n);
        }
        h_comps.push(comps);
        mean_curvature.push(hvec);
        h_perp1.push(p1);
        h_perp2.push(p2);
    }
    Ok(CurvatureData {
        h_comps,
        mean_curvature,
        h_perp1,
        h_perp2,
    })
}

/// First vertex violating mean convexity, with its mean curvature vector.
/// A vertex passes if `H` vanishes to tolerance or is timelike and
/// past-pointing. Hypersurfaces only.
pub(crate) fn mean_convexity_violation(
    mesh: &SpacelikeMesh,
    curv: &CurvatureData,
    tol: f64,
) -> Result<Option<(usize, Vec<f64>)>, Error> {
    if mesh.m() != mesh.n() {
        return Err(Error::WrongCodimension {
            expected: mesh.n(),
            got: mesh.m(),
        });
    }
    for v in 0..mesh.num_vertices() {
        let h = &curv.mean_curvature[v];
        if h.euclid_norm() <= tol {
            continue;
        }
        if mink_inner(h, h) < -tol && h.0[0] < 0.0 {
            continue;
        }
        return Ok(Some((v, h.0.clone())));
    }
    Ok(None)
}

/// Whether every vertex has vanishing or past-timelike mean curvature.
/// Errors with `WrongCodimension` unless `m = n`.
pub fn is_mean_convex(
    mesh: &SpacelikeMesh,
    curv: &CurvatureData,
    tol: f64,
) -> Result<bool, Error> {
    Ok(mean_convexity_violation(mesh, curv, tol)?.is_none())
}

/// A scalar on ambient space with explicit first and second coordinate
/// partials, used to exercise the Hessian decomposition.
pub trait AmbientScalar {
    fn value(&self, x: &MinkVec) -> f64;
    /// Coordinate partials `(∂_0 w, ..., ∂_n w)`.
    fn partials(&self, x: &MinkVec) -> MinkVec;
    /// Coordinate second partials, `(n+1) × (n+1)`.
    fn second_partials(&self, x: &MinkVec) -> DMatrix<f64>;
}

/// The coordinate function `w = x0`.
pub struct CoordinateHeight;

impl AmbientScalar for CoordinateHeight {
    fn value(&self, x: &MinkVec) -> f64 {
        x.0[0]
    }
    fn partials(&self, x: &MinkVec) -> MinkVec {
        let mut g = MinkVec::zeros(x.dim());
        g.0[0] = 1.0;
        g
    }
    fn second_partials(&self, x: &MinkVec) -> DMatrix<f64> {
        DMatrix::zeros(x.dim(), x.dim())
    }
}

/// `w = ½⟨X, X⟩` with the Minkowski square.
pub struct HalfMinkowskiSquare;

impl AmbientScalar for HalfMinkowskiSquare {
    fn value(&self, x: &MinkVec) -> f64 {
        0.5 * mink_inner(x, x)
    }
    fn partials(&self, x: &MinkVec) -> MinkVec {
        let mut g = x.clone();
        g.0[0] = -g.0[0];
        g
    }
    fn second_partials(&self, x: &MinkVec) -> DMatrix<f64> {
        let mut d = DMatrix::identity(x.dim(), x.dim());
        d[(0, 0)] = -1.0;
        d
    }
}

/// Compares the fitted intrinsic Hessian of `w|_Σ` against the ambient
/// identity `∇²_ij w = (D²w)(E_i, E_j) - ⟨h_ij, ∇̄w⟩`, where `∇̄w` is the
/// index-raised ambient gradient. Returns the worst relative deviation over
/// interior vertices, measured in the Frobenius norm against the size of
/// the two right-hand terms.
pub fn hessian_identity_check<W: AmbientScalar>(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    ctx: &FitContext,
    w: &W,
) -> Result<f64, Error> {
    let values: Vec<f64> = mesh.vertices().iter().map(|x| w.value(x)).collect();
    let m = mesh.m();
    let mut worst: f64 = 0.0;
    let mut any = false;
    for v in mesh.interior_vertices() {
        any = true;
        let (_, fitted) = ctx.fit_scalar(v, &values);
        let x = mesh.vertex(v);
        let d2 = w.second_partials(x);
        let mut grad_bar = w.partials(x);
        grad_bar.0[0] = -grad_bar.0[0];
        let tangent = &frame.tangent[v];
        let mut restricted = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for a in 0..d2.nrows() {
                    for b in 0..d2.ncols() {
                        acc += tangent[i].0[a] * d2[(a, b)] * tangent[j].0[b];
                    }
                }
                restricted[(i, j)] = acc;
            }
        }
        let mut pairing = DMatrix::zeros(m, m);
        let mut normals: Vec<&MinkVec> = frame.spacelike_normals[v].iter().collect();
        normals.push(&frame.nu[v]);
        for (k, normal) in normals.iter().enumerate() {
            let coeff = mink_inner(normal, &grad_bar);
            pairing += &curv.h_comps[v][k] * coeff;
        }
        let rhs = &restricted - &pairing;
        let diff = (&fitted - &rhs).norm();
        let scale = (restricted.norm() + pairing.norm()).max(1e-8);
        worst = worst.max(diff / scale);
    }
    if !any {
        return Err(Error::DimensionMismatch(
            "hessian_identity_check needs interior vertices".into(),
        ));
    }
    Ok(worst)
}
