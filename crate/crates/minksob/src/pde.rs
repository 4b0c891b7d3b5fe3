//! The weighted Neumann problem `div(f ∇u) = m f^{m/(m-1)} - S` with unit
//! boundary flux, discretized by piecewise-linear finite elements.
//!
//! All integrals on the right-hand side use the same lumped vertex
//! quadrature as [`normalize_density`], so for a normalized density the
//! discrete compatibility defect of the singular Neumann system vanishes to
//! rounding, not merely to discretization order.

use crate::lorentz::{mink_inner, mink_norm, MinkVec};
use crate::mesh::{CurvatureData, FitContext, NormalFrame, SpacelikeMesh};
use crate::{Error, Variant};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Gate on the compatibility defect `|Σ b_i| / Σ |b_i|` of the
    /// assembled load before mean projection.
    pub compat_tol: f64,
    /// Target relative residual for the conjugate-gradient solve.
    pub rel_tol: f64,
    /// Iteration cap; `None` picks `50 √V + 1000`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            compat_tol: 1e-8,
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeumannSolution {
    /// Vertex values of the potential, gauged to lumped-area mean zero.
    pub u: Vec<f64>,
    /// Density the system was assembled with (normalized in
    /// [`solve_neumann`], verbatim in [`solve_neumann_with_source`]).
    pub f: Vec<f64>,
    /// Vertex values of the source `S` (empty for custom right-hand sides).
    pub source: Vec<f64>,
    /// Normalization constant `λ` of the input density; 1 means the input
    /// was already normalized.
    pub lambda: f64,
    pub compat_defect: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn check_density(values: &[f64], nv: usize) -> Result<(), Error> {
    if values.len() != nv {
        return Err(Error::DimensionMismatch(format!(
            "density has {} values for {} vertices",
            values.len(),
            nv
        )));
    }
    for &f in values {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::NonpositiveDensity(f));
        }
    }
    Ok(())
}

/// Area-weighted average of the incident face gradients of a
/// piecewise-linear vertex field; one ambient vector per vertex.
pub fn vertex_field_gradients(mesh: &SpacelikeMesh, values: &[f64]) -> Vec<MinkVec> {
    let dim = mesh.n() + 1;
    (0..mesh.num_vertices())
        .map(|v| {
            let mut acc = MinkVec::zeros(dim);
            let mut total = 0.0;
            for &s in mesh.vertex_simplices(v) {
                let w = mesh.geometry(s).volume;
                acc = acc.axpy(w, &mesh.face_gradient(s, values));
                total += w;
            }
            if total > 0.0 {
                acc.scale(1.0 / total)
            } else {
                acc
            }
        })
        .collect()
}

/// Components of an ambient vector in the vertex tangent frame; this is
/// also the Minkowski-orthogonal projection onto the tangent plane.
pub fn tangent_components(frame: &NormalFrame, v: usize, vec: &MinkVec) -> Vec<f64> {
    frame.tangent[v].iter().map(|t| mink_inner(vec, t)).collect()
}

/// Vertex values of the variant's source term:
/// `|∇f|`, `√(|∇f|² + f²‖H‖²)`, or `√(|∇f|² + f²(‖H^⊥1‖² + ‖H^⊥2‖²))`.
/// One-homogeneous in `f` by construction.
pub fn source_term(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    variant: Variant,
    f: &[f64],
) -> Result<Vec<f64>, Error> {
    variant.check_dims(mesh.m(), mesh.n())?;
    check_density(f, mesh.num_vertices())?;
    let grads = vertex_field_gradients(mesh, f);
    let mut out = Vec::with_capacity(mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        let comps = tangent_components(frame, v, &grads[v]);
        let grad_sq: f64 = comps.iter().map(|c| c * c).sum();
        let s = match variant {
            Variant::Thm11 => grad_sq.sqrt(),
            Variant::Thm12 => {
                let hn = mink_norm(&curv.mean_curvature[v]);
                (grad_sq + f[v] * f[v] * hn * hn).sqrt()
            }
            Variant::Thm13 => {
                let h1 = mink_norm(&curv.h_perp1[v]);
                let h2 = mink_norm(&curv.h_perp2[v]);
                (grad_sq + f[v] * f[v] * (h1 * h1 + h2 * h2)).sqrt()
            }
        };
        out.push(s);
    }
    Ok(out)
}

struct NormalizationParts {
    boundary_integral: f64,
    source_integral: f64,
    power_integral: f64,
}

fn normalization_parts(
    mesh: &SpacelikeMesh,
    f: &[f64],
    source: &[f64],
) -> Result<NormalizationParts, Error> {
    let m = mesh.m() as f64;
    let power = m / (m - 1.0);
    let mut boundary_integral = 0.0;
    let mut source_integral = 0.0;
    let mut power_integral = 0.0;
    for v in 0..mesh.num_vertices() {
        boundary_integral += mesh.lumped_boundary(v) * f[v];
        source_integral += mesh.lumped_area(v) * source[v];
        power_integral += mesh.lumped_area(v) * f[v].powf(power);
    }
    if !power_integral.is_finite() || power_integral <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    Ok(NormalizationParts {
        boundary_integral,
        source_integral,
        power_integral,
    })
}

/// Rescales `f` so that its normalization constant becomes exactly 1 in the
/// lumped quadrature, and returns the constant `λ` of the input:
/// `λ^{1/(m-1)} = (∫_∂Σ f + ∫_Σ S(f)) / (m ∫_Σ f^{m/(m-1)})`.
pub fn normalize_density(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    variant: Variant,
    f: &[f64],
) -> Result<(Vec<f64>, f64), Error> {
    if !mesh.has_boundary() {
        return Err(Error::EmptyBoundary);
    }
    let source = source_term(mesh, frame, curv, variant, f)?;
    let parts = normalization_parts(mesh, f, &source)?;
    let m = mesh.m() as f64;
    let root = (parts.boundary_integral + parts.source_integral) / (m * parts.power_integral);
    if !root.is_finite() || root <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    let lambda = root.powf(m - 1.0);
    let scaled: Vec<f64> = f.iter().map(|&x| root.powf(m - 1.0) * x).collect();
    Ok((scaled, lambda))
}

/// Residual `|λ^{1/(m-1)}(f̃) - 1|` after normalizing: the scaling identity
/// holds exactly in the shared quadrature, so this is rounding-level for
/// any admissible density.
pub fn normalization_identity_check(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    variant: Variant,
    f: &[f64],
) -> Result<f64, Error> {
    let (scaled, _) = normalize_density(mesh, frame, curv, variant, f)?;
    let source = source_term(mesh, frame, curv, variant, &scaled)?;
    let parts = normalization_parts(mesh, &scaled, &source)?;
    let m = mesh.m() as f64;
    let root = (parts.boundary_integral + parts.source_integral) / (m * parts.power_integral);
    Ok((root - 1.0).abs())
}

struct Csr {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    fn entry_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let span = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        let k = span.binary_search(&c).expect("entry in sparsity pattern");
        &mut self.values[self.row_ptr[r] + k]
    }
}

fn assemble_stiffness(mesh: &SpacelikeMesh, f: &[f64]) -> Csr {
    let nv = mesh.num_vertices();
    let m = mesh.m();
    let mut row_ptr = Vec::with_capacity(nv + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for v in 0..nv {
        let mut cols: Vec<usize> = mesh.neighbors(v).to_vec();
        cols.push(v);
        cols.sort_unstable();
        col_idx.extend_from_slice(&cols);
        row_ptr.push(col_idx.len());
    }
    let mut csr = Csr {
        row_ptr,
        col_idx,
        values: vec![0.0; 0],
    };
    csr.values = vec![0.0; csr.col_idx.len()];

    let dim = mesh.n() + 1;
    for s in 0..mesh.num_simplices() {
        let simplex = mesh.simplex(s);
        let geo = mesh.geometry(s);
        let fbar: f64 = simplex.iter().map(|&v| f[v]).sum::<f64>() / (m + 1) as f64;
        // ∇φ_i = Σ_j G^{ij} E_j for i >= 1, ∇φ_0 = -Σ_i ∇φ_i
        let mut grads: Vec<MinkVec> = Vec::with_capacity(m + 1);
        grads.push(MinkVec::zeros(dim));
        for i in 0..m {
            let mut g = MinkVec::zeros(dim);
            for j in 0..m {
                g = g.axpy(geo.ginv[(i, j)], &geo.edges[j]);
            }
            grads.push(g);
        }
        let mut g0 = MinkVec::zeros(dim);
        for g in &grads[1..] {
            g0 = g0.sub(g);
        }
        grads[0] = g0;
        let w = fbar * geo.volume;
        for a in 0..=m {
            for b in 0..=m {
                *csr.entry_mut(simplex[a], simplex[b]) +=
                    w * mink_inner(&grads[a], &grads[b]);
            }
        }
    }
    csr
}

/// Preconditioned conjugate gradients on the singular Neumann system; the
/// residual is re-projected onto mean zero every iteration to keep the
/// constant kernel from drifting. Deterministic and single-threaded.
fn pcg(
    csr: &Csr,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize), Error> {
    let nv = b.len();
    let mut diag = vec![0.0; nv];
    for r in 0..nv {
        for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
            if csr.col_idx[k] == r {
                diag[r] = csr.values[k];
            }
        }
    }
    let project = |v: &mut [f64]| {
        let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm(&r);
    if bnorm == 0.0 {
        return Ok((vec![0.0; nv], 0.0, 0));
    }
    let target = rel_tol * bnorm;
    let mut x = vec![0.0; nv];
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d.max(1e-300)).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; nv];
    for iter in 1..=max_iter {
        csr.mul(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 {
            return Err(Error::SolverDiverged {
                residual: norm(&r) / bnorm,
                iterations: iter,
                target: rel_tol,
            });
        }
        let alpha = rz / pq;
        for i in 0..nv {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        project(&mut r);
        let rnorm = norm(&r);
        if rnorm <= target {
            return Ok((x, rnorm / bnorm, iter));
        }
        for i in 0..nv {
            z[i] = r[i] / diag[i].max(1e-300);
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..nv {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        residual: norm(&r) / bnorm,
        iterations: max_iter,
        target: rel_tol,
    })
}

/// Assembles loads `b_i = -g_i A_i + f_i B_i` (lumped interior and boundary
/// quadrature), gates on the compatibility defect, solves, and gauges `u`
/// to lumped-area mean zero.
fn assemble_and_solve(
    mesh: &SpacelikeMesh,
    f: &[f64],
    g: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, f64, f64, usize), Error> {
    let nv = mesh.num_vertices();
    let mut b = vec![0.0; nv];
    for v in 0..nv {
        b[v] = -g[v] * mesh.lumped_area(v) + f[v] * mesh.lumped_boundary(v);
    }
    let total: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
    let compat_defect = total.abs() / scale;
    if compat_defect > opts.compat_tol {
        return Err(Error::IncompatibleSystem {
            defect: compat_defect,
            tolerance: opts.compat_tol,
        });
    }
    let csr = assemble_stiffness(mesh, f);
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| 50 * (nv as f64).sqrt() as usize + 1000);
    let (mut u, residual, iterations) = pcg(&csr, &b, opts.rel_tol, max_iter)?;
    let total_area: f64 = (0..nv).map(|v| mesh.lumped_area(v)).sum();
    let mean: f64 = (0..nv).map(|v| mesh.lumped_area(v) * u[v]).sum::<f64>() / total_area;
    for x in &mut u {
        *x -= mean;
    }
    Ok((u, compat_defect, residual, iterations))
}

/// Solves the variant's Neumann problem for the given density. The density
/// is normalized internally, which makes the discrete system compatible to
/// rounding; the returned `lambda` is the input's normalization constant.
pub fn solve_neumann(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    variant: Variant,
    density: &[f64],
    opts: &SolveOptions,
) -> Result<NeumannSolution, Error> {
    if !mesh.has_boundary() {
        return Err(Error::EmptyBoundary);
    }
    check_density(density, mesh.num_vertices())?;
    let (f, lambda) = normalize_density(mesh, frame, curv, variant, density)?;
    let source = source_term(mesh, frame, curv, variant, &f)?;
    let m = mesh.m() as f64;
    let power = m / (m - 1.0);
    let g: Vec<f64> = f
        .iter()
        .zip(&source)
        .map(|(&fi, &si)| m * fi.powf(power) - si)
        .collect();
    let (u, compat_defect, residual_norm, iterations) =
        assemble_and_solve(mesh, &f, &g, opts)?;
    Ok(NeumannSolution {
        u,
        f,
        source,
        lambda,
        compat_defect,
        residual_norm,
        iterations,
    })
}

/// Solves `div(f ∇u) = g` with unit boundary flux for a caller-supplied
/// right-hand side, without normalizing. Meant for manufactured solutions,
/// whose discrete compatibility defect is only O(h²); the gate should be
/// relaxed accordingly via `opts.compat_tol`.
pub fn solve_neumann_with_source(
    mesh: &SpacelikeMesh,
    f: &[f64],
    g: &[f64],
    opts: &SolveOptions,
) -> Result<NeumannSolution, Error> {
    if !mesh.has_boundary() {
        return Err(Error::EmptyBoundary);
    }
    check_density(f, mesh.num_vertices())?;
    if g.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} values for {} vertices",
            g.len(),
            mesh.num_vertices()
        )));
    }
    let (u, compat_defect, residual_norm, iterations) =
        assemble_and_solve(mesh, f, g, opts)?;
    Ok(NeumannSolution {
        u,
        f: f.to_vec(),
        source: Vec::new(),
        lambda: 1.0,
        compat_defect,
        residual_norm,
        iterations,
    })
}

/// Intrinsic Hessian of the potential at a vertex, from the same quadratic
/// fit stencils used for curvature.
pub fn hessian_of_u(ctx: &FitContext, v: usize, u: &[f64]) -> DMatrix<f64> {
    ctx.fit_scalar(v, u).1
}
