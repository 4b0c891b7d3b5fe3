//! The transport construction: comparison cones and their volumes, the
//! pencil region `A_r`, the admissible set `B_r`, the transport map `Φ_r`,
//! and the Jacobian determinant bound that drives the volume comparison.

use crate::lorentz::{mink_inner, mink_norm, unit_ball_volume, CausalClass, MinkVec};
use crate::mesh::{CurvatureData, FitContext, NormalFrame, SpacelikeMesh};
use crate::pde::{tangent_components, vertex_field_gradients, NeumannSolution};
use crate::{Error, Variant};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Checks the slope parameter and clamps roundoff-level dips below 1.
pub fn effective_tau(tau: f64) -> Result<f64, Error> {
    if !tau.is_finite() || tau < 1.0 - 1e-9 {
        return Err(Error::SlopeBelowOne(tau));
    }
    Ok(tau.max(1.0))
}

/// Blow-down volume constant `C̃`: the common value of `|A_r| / r^{n+1}`
/// for the extremal configurations of slope `τ`. The codimension and
/// divergence variants carry the extra factor `2^{-n}` of their half-width
/// regions.
pub fn asymptotic_constant(variant: Variant, n: usize, tau: f64) -> Result<f64, Error> {
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "asymptotic constant needs n >= 2, got n = {n}"
        )));
    }
    let tau = effective_tau(tau)?;
    let root = (tau * tau - 1.0).max(0.0).sqrt();
    let base = unit_ball_volume(n)?
        / ((n + 1) as f64 * tau * (tau + root).powi(n as i32));
    Ok(match variant {
        Variant::Thm11 => base,
        Variant::Thm12 | Variant::Thm13 => base / 2f64.powi(n as i32),
    })
}

/// The comparison cone over the slope-`τ` configuration, described by three
/// distinguished generators and the companion normal they pair to `-scale`
/// with. Its Lebesgue volume equals the blow-down constant.
#[derive(Debug, Clone)]
pub struct ConeData {
    /// Past unit timelike generator `scale · (-τ, -√(τ²-1), 0, ...)`.
    pub unit_timelike_vertex: MinkVec,
    /// Generator on the time axis, `scale · (-1/τ, 0, ...)`.
    pub axis_vertex: MinkVec,
    /// Lightlike generator `scale · (-(τ-√(τ²-1)), τ-√(τ²-1), 0, ...)`.
    pub lightlike_vertex: MinkVec,
    /// Unit timelike normal `(-τ, -√(τ²-1), 0, ...)` of the supporting
    /// configuration.
    pub companion_normal: MinkVec,
    /// Lebesgue volume of the cone (doubled for the two-sided variants).
    pub volume: f64,
}

pub fn cone_vertices(variant: Variant, n: usize, tau: f64) -> Result<ConeData, Error> {
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "cone construction needs n >= 2, got n = {n}"
        )));
    }
    let tau = effective_tau(tau)?;
    let root = (tau * tau - 1.0).max(0.0).sqrt();
    let scale = variant.region_scale();
    let dim = n + 1;
    let mut a = MinkVec::zeros(dim);
    a.0[0] = -tau * scale;
    a.0[1] = -root * scale;
    let mut b = MinkVec::zeros(dim);
    b.0[0] = -scale / tau;
    let mut c = MinkVec::zeros(dim);
    c.0[0] = -(tau - root) * scale;
    c.0[1] = (tau - root) * scale;
    let mut normal = MinkVec::zeros(dim);
    normal.0[0] = -tau;
    normal.0[1] = -root;
    let doubling = match variant {
        Variant::Thm11 => 1.0,
        Variant::Thm12 | Variant::Thm13 => 2.0,
    };
    let volume = doubling * scale.powi(dim as i32) * unit_ball_volume(n)?
        * (tau - root).powi(n as i32)
        / (tau * (n + 1) as f64);
    Ok(ConeData {
        unit_timelike_vertex: a,
        axis_vertex: b,
        lightlike_vertex: c,
        companion_normal: normal,
        volume,
    })
}

/// Per-vertex data of the region `A_r`, flattened for the sampling loop:
/// for every vertex the block `[X | d | T_1 .. T_m | e_1 .. e_{n-m}]`,
/// where `d` is the slab direction (normalized mean curvature when it is
/// appreciably nonzero, otherwise `ν`; always `ν` for the codimension
/// variant).
#[derive(Debug, Clone)]
pub struct RegionData {
    variant: Variant,
    dim: usize,
    m: usize,
    num_normals: usize,
    stride: usize,
    data: Vec<f64>,
    bbox: Vec<(f64, f64)>,
}

/// `-⟨H, H⟩ > this` counts as genuinely curved when picking the slab
/// direction.
const SLAB_CURVATURE_TOL: f64 = 1e-8;

impl RegionData {
    pub fn new(
        mesh: &SpacelikeMesh,
        frame: &NormalFrame,
        curv: &CurvatureData,
        variant: Variant,
    ) -> Result<RegionData, Error> {
        variant.check_dims(mesh.m(), mesh.n())?;
        if variant == Variant::Thm11 {
            if let Some((vertex, h)) =
                crate::mesh::mean_convexity_violation(mesh, curv, SLAB_CURVATURE_TOL)?
            {
                return Err(Error::MeanConvexityViolated { vertex, h });
            }
        }
        let dim = mesh.n() + 1;
        let m = mesh.m();
        let num_normals = match variant {
            Variant::Thm13 => mesh.n() - m,
            _ => 0,
        };
        let stride = dim * (2 + m + num_normals);
        let mut data = Vec::with_capacity(stride * mesh.num_vertices());
        for v in 0..mesh.num_vertices() {
            data.extend_from_slice(&mesh.vertex(v).0);
            let d = match variant {
                Variant::Thm13 => frame.nu[v].clone(),
                _ => {
                    let h = &curv.mean_curvature[v];
                    if h.euclid_norm() > SLAB_CURVATURE_TOL {
                        h.scale(1.0 / mink_norm(h))
                    } else {
                        frame.nu[v].clone()
                    }
                }
            };
            data.extend_from_slice(&d.0);
            for t in &frame.tangent[v] {
                data.extend_from_slice(&t.0);
            }
            if num_normals > 0 {
                for e in &frame.spacelike_normals[v] {
                    data.extend_from_slice(&e.0);
                }
            }
        }
        Ok(RegionData {
            variant,
            dim,
            m,
            num_normals,
            stride,
            data,
            bbox: mesh.bounding_box(),
        })
    }

    /// Axis-aligned sampling box: the mesh bounding box inflated by `r` in
    /// every coordinate.
    pub fn sample_box(&self, r: f64) -> Vec<(f64, f64)> {
        self.bbox.iter().map(|&(lo, hi)| (lo - r, hi + r)).collect()
    }

    /// Membership in `A_r`: the slab and lateral conditions must hold at
    /// every vertex.
    pub fn contains(&self, r: f64, p: &[f64]) -> bool {
        debug_assert_eq!(p.len(), self.dim);
        let (slab_lo, slab_hi, lat_max) = match self.variant {
            Variant::Thm11 => (-r, 0.0, r * r),
            Variant::Thm12 | Variant::Thm13 => (-r / 2.0, r / 2.0, r * r / 4.0),
        };
        let dim = self.dim;
        for block in self.data.chunks_exact(self.stride) {
            let x = &block[..dim];
            let d = &block[dim..2 * dim];
            let s = mdot(p, x, d);
            if s < slab_lo || s > slab_hi {
                return false;
            }
            let mut lat = 0.0;
            for k in 0..(self.m + self.num_normals) {
                let w = &block[(2 + k) * dim..(3 + k) * dim];
                let c = mdot(p, x, w);
                lat += c * c;
            }
            if lat >= lat_max {
                return false;
            }
        }
        true
    }
}

/// `⟨p - x, w⟩` without allocating.
#[inline]
fn mdot(p: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let mut acc = -(p[0] - x[0]) * w[0];
    for k in 1..p.len() {
        acc += (p[k] - x[k]) * w[k];
    }
    acc
}

#[derive(Debug, Clone)]
pub struct VolumeEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub ci99: (f64, f64),
    pub hits: u64,
    pub samples: u64,
    pub box_volume: f64,
}

const CHUNK: u64 = 4096;

/// Monte Carlo volume of `A_r`. Sampling is chunked with one counter-mode
/// stream per chunk, so the result depends only on `seed` and `samples`,
/// not on the number of worker threads.
pub fn estimate_volume_a(
    region: &RegionData,
    r: f64,
    samples: u64,
    seed: u64,
) -> Result<VolumeEstimate, Error> {
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let bounds = region.sample_box(r);
    let box_volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut p = vec![0.0; region.dim];
            let mut hits = 0u64;
            for _ in 0..count {
                for (pi, &(lo, hi)) in p.iter_mut().zip(&bounds) {
                    *pi = rng.gen_range(lo..hi);
                }
                if region.contains(r, &p) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let n = samples as f64;
    let phat = hits as f64 / n;
    let se = (phat * (1.0 - phat) / n).sqrt();
    let estimate = box_volume * phat;
    let std_error = box_volume * se;
    let z95 = 1.959964;
    let z99 = 2.575829;
    Ok(VolumeEstimate {
        estimate,
        std_error,
        ci95: (estimate - z95 * std_error, estimate + z95 * std_error),
        ci99: (estimate - z99 * std_error, estimate + z99 * std_error),
        hits,
        samples,
        box_volume,
    })
}

/// Rejection-samples `count` points of `A_r` from the sampling box.
pub fn sample_region_points(
    region: &RegionData,
    r: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, Error> {
    if count == 0 {
        return Err(Error::ZeroSamples);
    }
    let bounds = region.sample_box(r);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 20_000usize.saturating_mul(count);
    let mut p = vec![0.0; region.dim];
    for _ in 0..max_attempts {
        for (pi, &(lo, hi)) in p.iter_mut().zip(&bounds) {
            *pi = rng.gen_range(lo..hi);
        }
        if region.contains(r, &p) {
            out.push(p.clone());
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(Error::ZeroSamples)
}

/// Normal-bundle coordinates of a point `y` over a vertex: coefficients
/// along the spacelike normals plus the coefficient `t` along `ν`, so that
/// `y = Σ_α spatial_α e_α + t ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalCoordinates {
    pub spatial: Vec<f64>,
    pub t: f64,
}

impl NormalCoordinates {
    pub fn along_nu(t: f64) -> Self {
        NormalCoordinates {
            spatial: Vec::new(),
            t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetBoundOutcome {
    /// `det(∇²u + ⟨y, h⟩ + g/r)` at the sample.
    pub lhs: f64,
    /// `(f^{1/(m-1)} + 1/r)^m` at the sample.
    pub rhs: f64,
    /// Relative excess `max(lhs/rhs - 1, 0)`.
    pub excess: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct InclusionWitness {
    pub vertex: usize,
    pub y: NormalCoordinates,
    /// `|Φ_r(x̄, ȳ) - p|_euclid / r`; the stationarity defect of the
    /// discrete minimizer.
    pub transport_error: f64,
}

/// Everything needed to evaluate the transport map and its Jacobian on top
/// of a solved Neumann problem.
pub struct TransportContext<'a> {
    mesh: &'a SpacelikeMesh,
    frame: &'a NormalFrame,
    curv: &'a CurvatureData,
    variant: Variant,
    f: Vec<f64>,
    u: Vec<f64>,
    grad_u: Vec<Vec<f64>>,
    hess_u: Vec<DMatrix<f64>>,
    mean_edge: f64,
}

impl<'a> TransportContext<'a> {
    pub fn new(
        mesh: &'a SpacelikeMesh,
        frame: &'a NormalFrame,
        curv: &'a CurvatureData,
        fit: &FitContext,
        variant: Variant,
        solution: &NeumannSolution,
    ) -> Result<Self, Error> {
        variant.check_dims(mesh.m(), mesh.n())?;
        if variant == Variant::Thm11 {
            if let Some((vertex, h)) =
                crate::mesh::mean_convexity_violation(mesh, curv, SLAB_CURVATURE_TOL)?
            {
                return Err(Error::MeanConvexityViolated { vertex, h });
            }
        }
        let grads = vertex_field_gradients(mesh, &solution.u);
        let grad_u: Vec<Vec<f64>> = (0..mesh.num_vertices())
            .map(|v| tangent_components(frame, v, &grads[v]))
            .collect();
        let hess_u: Vec<DMatrix<f64>> = (0..mesh.num_vertices())
            .map(|v| fit.fit_scalar(v, &solution.u).1)
            .collect();
        Ok(TransportContext {
            mesh,
            frame,
            curv,
            variant,
            f: solution.f.clone(),
            u: solution.u.clone(),
            grad_u,
            hess_u,
            mean_edge: mesh.mean_edge_length(),
        })
    }

    pub fn mesh(&self) -> &SpacelikeMesh {
        self.mesh
    }

    pub fn gradient(&self, v: usize) -> &[f64] {
        &self.grad_u[v]
    }

    fn y_dims_ok(&self, y: &NormalCoordinates) -> bool {
        y.spatial.len() == self.mesh.n() - self.mesh.m()
            || (self.variant != Variant::Thm13 && y.spatial.is_empty())
    }

    /// Membership of `(x, y)` in the admissible parameter set `U`:
    /// interior vertex, gradient small enough, `y` inside the variant's
    /// normal slab.
    pub fn in_u(&self, v: usize, y: &NormalCoordinates) -> bool {
        self.in_u_with_tol(v, y, 0.0)
    }

    fn in_u_with_tol(&self, v: usize, y: &NormalCoordinates, tol: f64) -> bool {
        if self.mesh.is_boundary_vertex(v) || !self.y_dims_ok(y) {
            return false;
        }
        let gsq: f64 = self.grad_u[v].iter().map(|c| c * c).sum();
        match self.variant {
            Variant::Thm11 => {
                y.t >= -tol && y.t <= 1.0 + tol && gsq < 1.0 + tol
            }
            Variant::Thm12 => {
                y.t.abs() <= 0.5 + tol && gsq < 0.25 + tol
            }
            Variant::Thm13 => {
                let ysq: f64 = y.spatial.iter().map(|c| c * c).sum();
                y.t.abs() <= 0.5 + tol && gsq + ysq < 0.25 + tol
            }
        }
    }

    /// `M = ∇²u + ⟨y, h⟩ + g/r` in the vertex tangent frame.
    pub fn shape_matrix(&self, v: usize, y: &NormalCoordinates, r: f64) -> DMatrix<f64> {
        let m = self.mesh.m();
        let mut y_frame = y.spatial.clone();
        y_frame.push(y.t);
        let mut mat = self.hess_u[v].clone() + self.curv.pairing(v, &y_frame);
        for i in 0..m {
            mat[(i, i)] += 1.0 / r;
        }
        mat
    }

    fn min_eig(mat: &DMatrix<f64>) -> f64 {
        mat.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    fn max_abs(mat: &DMatrix<f64>) -> f64 {
        mat.iter().cloned().map(f64::abs).fold(0.0, f64::max)
    }

    /// `B_r` adds positive semidefiniteness of the shape matrix to `U`.
    pub fn in_b_r(&self, v: usize, y: &NormalCoordinates, r: f64) -> bool {
        if !self.in_u(v, y) {
            return false;
        }
        let mat = self.shape_matrix(v, y, r);
        Self::min_eig(&mat) >= -1e-8 * Self::max_abs(&mat).max(1e-300)
    }

    /// Ambient vector of the normal coordinates at a vertex.
    pub fn y_ambient(&self, v: usize, y: &NormalCoordinates) -> MinkVec {
        let mut out = MinkVec::zeros(self.mesh.n() + 1);
        for (alpha, &c) in y.spatial.iter().enumerate() {
            out = out.axpy(c, &self.frame.spacelike_normals[v][alpha]);
        }
        out.axpy(y.t, &self.frame.nu[v])
    }

    /// `Φ_r(x, y) = X + r (∇u + y)`.
    pub fn transport_map(&self, v: usize, y: &NormalCoordinates, r: f64) -> MinkVec {
        let mut step = self.y_ambient(v, y);
        for (i, t) in self.frame.tangent[v].iter().enumerate() {
            step = step.axpy(self.grad_u[v][i], t);
        }
        self.mesh.vertex(v).add(&step.scale(r))
    }

    /// Jacobian factor `r^{m+1} det(M)` of the transport.
    pub fn jacobian(&self, v: usize, y: &NormalCoordinates, r: f64) -> f64 {
        let mat = self.shape_matrix(v, y, r);
        r.powi(self.mesh.m() as i32 + 1) * mat.determinant()
    }

    /// The pointwise determinant bound `det(M) ≤ (f^{1/(m-1)} + 1/r)^m`,
    /// allowed a relative slack of twice the mean edge length for the
    /// Hessian and curvature fits. Errors if the sample is not in `B_r`.
    pub fn det_bound_check(
        &self,
        v: usize,
        y: &NormalCoordinates,
        r: f64,
    ) -> Result<DetBoundOutcome, Error> {
        if !self.in_u(v, y) {
            return Err(Error::NotInBr {
                vertex: v,
                reason: "outside the admissible parameter set".into(),
            });
        }
        let mat = self.shape_matrix(v, y, r);
        if Self::min_eig(&mat) < -1e-8 * Self::max_abs(&mat).max(1e-300) {
            return Err(Error::NotInBr {
                vertex: v,
                reason: "shape matrix not positive semidefinite".into(),
            });
        }
        let m = self.mesh.m() as f64;
        let lhs = mat.determinant();
        let rhs = (self.f[v].powf(1.0 / (m - 1.0)) + 1.0 / r).powf(m);
        let tol = 2.0 * self.mean_edge;
        let excess = (lhs / rhs - 1.0).max(0.0);
        Ok(DetBoundOutcome {
            lhs,
            rhs,
            excess,
            ok: lhs <= rhs * (1.0 + tol),
        })
    }

    /// Draws `(vertex, y)` samples uniformly from the parameter boxes and
    /// keeps those in `B_r`.
    pub fn sample_b_r(
        &self,
        r: f64,
        count: usize,
        seed: u64,
    ) -> Result<Vec<(usize, NormalCoordinates)>, Error> {
        if count == 0 {
            return Err(Error::ZeroSamples);
        }
        let interior: Vec<usize> = self.mesh.interior_vertices().collect();
        if interior.is_empty() {
            return Err(Error::ZeroSamples);
        }
        let codim = self.mesh.n() - self.mesh.m();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let max_attempts = 20_000usize.saturating_mul(count);
        for _ in 0..max_attempts {
            let v = interior[rng.gen_range(0..interior.len())];
            let y = match self.variant {
                Variant::Thm11 => NormalCoordinates::along_nu(rng.gen_range(0.0..1.0)),
                Variant::Thm12 => NormalCoordinates::along_nu(rng.gen_range(-0.5..0.5)),
                Variant::Thm13 => NormalCoordinates {
                    spatial: (0..codim).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                    t: rng.gen_range(-0.5..0.5),
                },
            };
            if self.in_b_r(v, &y, r) {
                out.push((v, y));
                if out.len() == count {
                    return Ok(out);
                }
            }
        }
        Err(Error::ZeroSamples)
    }

    /// Finds the transport preimage of an ambient point by minimizing
    /// `F(x) = r u(x) + ½⟨p - X(x), p - X(x)⟩` over the vertices. The
    /// minimizer must be interior and its normal coordinates must land in
    /// `B_r` (with a fit-level relaxation of the eigenvalue floor).
    pub fn inclusion_check(&self, r: f64, p: &[f64]) -> Result<InclusionWitness, Error> {
        let pvec = MinkVec(p.to_vec());
        let mut best = 0usize;
        let mut best_val = f64::INFINITY;
        for v in 0..self.mesh.num_vertices() {
            let diff = pvec.sub(self.mesh.vertex(v));
            let val = r * self.u[v] + 0.5 * mink_inner(&diff, &diff);
            if val < best_val {
                best_val = val;
                best = v;
            }
        }
        if self.mesh.is_boundary_vertex(best) {
            return Err(Error::BoundaryMinimizer(best));
        }
        let diff = pvec.sub(self.mesh.vertex(best)).scale(1.0 / r);
        let spatial: Vec<f64> = self.frame.spacelike_normals[best]
            .iter()
            .map(|e| mink_inner(&diff, e))
            .collect();
        let t = -mink_inner(&diff, &self.frame.nu[best]);
        let y = NormalCoordinates { spatial, t };
        if !self.in_u_with_tol(best, &y, 1e-9) {
            return Err(Error::WitnessOutsideBr {
                vertex: best,
                reason: "minimizer leaves the admissible parameter set".into(),
            });
        }
        let mat = self.shape_matrix(best, &y, r);
        if Self::min_eig(&mat) < -self.mean_edge * Self::max_abs(&mat).max(1e-300) {
            return Err(Error::WitnessOutsideBr {
                vertex: best,
                reason: "shape matrix indefinite beyond fit tolerance".into(),
            });
        }
        let image = self.transport_map(best, &y, r);
        let transport_error = image.sub(&pvec).euclid_norm() / r;
        Ok(InclusionWitness {
            vertex: best,
            y,
            transport_error,
        })
    }

    /// Right-hand side of the volume comparison:
    /// `∫_Σ (f^{1/(m-1)} + 1/r)^m dμ` in the lumped quadrature.
    pub fn transport_bound_rhs(&self, r: f64) -> f64 {
        let m = self.mesh.m() as f64;
        (0..self.mesh.num_vertices())
            .map(|v| {
                self.mesh.lumped_area(v)
                    * (self.f[v].powf(1.0 / (m - 1.0)) + 1.0 / r).powf(m)
            })
            .sum()
    }
}

/// Classifies the cone generators for reporting.
pub fn causal_classes_of_cone(cone: &ConeData) -> [CausalClass; 3] {
    [
        cone.unit_timelike_vertex.causal_class(),
        cone.axis_vertex.causal_class(),
        cone.lightlike_vertex.causal_class(),
    ]
}
