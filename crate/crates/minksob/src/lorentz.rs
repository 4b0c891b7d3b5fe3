//! Minkowski space `R^{n,1}` primitives.
//!
//! Coordinates are ordered `(x0, x1, ..., xn)` with metric
//! `ḡ = -dx0² + dx1² + ... + dxn²`, so the inner product of `a` and `b` is
//! `-a0·b0 + Σ_{i≥1} ai·bi`. Throughout the crate `‖v‖` denotes
//! `√(σ(v)⟨v,v⟩) = √|⟨v,v⟩|` where `σ` is the causal sign, so norms of
//! timelike vectors are real and positive.

use crate::Error;
use serde::{Deserialize, Serialize};

/// Causal type of a vector, decided up to a tolerance on `⟨v,v⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Lightlike,
}

/// A vector of `R^{n,1}` stored as `(x0, x1, ..., xn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkVec(pub Vec<f64>);

impl MinkVec {
    pub fn zeros(ambient_dim: usize) -> Self {
        MinkVec(vec![0.0; ambient_dim])
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn add(&self, rhs: &MinkVec) -> MinkVec {
        MinkVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, rhs: &MinkVec) -> MinkVec {
        MinkVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> MinkVec {
        MinkVec(self.0.iter().map(|a| a * s).collect())
    }

    pub fn axpy(&self, s: f64, rhs: &MinkVec) -> MinkVec {
        MinkVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn euclid_norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn causal_class(&self) -> CausalClass {
        let tol = 1e-10 * self.0.iter().map(|a| a * a).sum::<f64>();
        causal_class(self, tol)
    }
}

/// `⟨a, b⟩ = -a0·b0 + Σ_{i≥1} ai·bi`.
///
/// Panics on mismatched dimensions; that is a programming error, not a data
/// error.
pub fn mink_inner(a: &MinkVec, b: &MinkVec) -> f64 {
    mink_inner_slices(&a.0, &b.0)
}

/// Slice form of [`mink_inner`] for allocation-free hot loops.
#[inline]
pub fn mink_inner_slices(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(
        a.len(),
        b.len(),
        "mink_inner: dimension mismatch ({} vs {})",
        a.len(),
        b.len()
    );
    let mut acc = -a[0] * b[0];
    for i in 1..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// `‖v‖ = √|⟨v,v⟩|`; real for every causal class, zero on the light cone.
pub fn mink_norm(v: &MinkVec) -> f64 {
    mink_inner(v, v).abs().sqrt()
}

/// Classifies `v` by the sign of `⟨v,v⟩` against an absolute tolerance.
///
/// The default tolerance used by [`MinkVec::causal_class`] scales with the
/// squared Euclidean norm so that classification is scale-covariant.
pub fn causal_class(v: &MinkVec, tol: f64) -> CausalClass {
    let q = mink_inner(v, v);
    if q > tol {
        CausalClass::Spacelike
    } else if q < -tol {
        CausalClass::Timelike
    } else {
        CausalClass::Lightlike
    }
}

/// Volume `ω_k = π^{k/2} / Γ(k/2 + 1)` of the unit ball in `R^k`.
///
/// Computed through the recurrence `ω_k = 2π/k · ω_{k-2}` seeded with
/// `ω_0 = 1`, `ω_1 = 2`, which avoids the gamma function entirely.
pub fn unit_ball_volume(k: usize) -> Result<f64, Error> {
    if k < 1 {
        return Err(Error::DimensionMismatch(
            "unit_ball_volume needs k >= 1".into(),
        ));
    }
    let mut even = 1.0; // ω_0
    let mut odd = 2.0; // ω_1
    for j in 2..=k {
        let next = 2.0 * std::f64::consts::PI / j as f64 * if j % 2 == 0 { even } else { odd };
        if j % 2 == 0 {
            even = next;
        } else {
            odd = next;
        }
    }
    Ok(if k % 2 == 0 { even } else { odd })
}

/// Dense `(n+1)×(n+1)` transform acting on ambient vectors; used for boosts
/// and spatial rotations in tests and in the isometry-invariance checks.
#[derive(Debug, Clone)]
pub struct AmbientMap {
    pub dim: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl AmbientMap {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        AmbientMap { dim, entries }
    }

    /// Lorentz boost of rapidity `atanh(v)` mixing `x0` with spatial axis
    /// `axis` (1-based among the spatial coordinates, so `axis = 1` is `x1`).
    pub fn boost(dim: usize, axis: usize, velocity: f64) -> Result<Self, Error> {
        if axis < 1 || axis >= dim {
            return Err(Error::DimensionMismatch(format!(
                "boost axis {axis} out of range for ambient dimension {dim}"
            )));
        }
        if velocity.abs() >= 1.0 {
            return Err(Error::Parse(format!(
                "boost velocity must satisfy |v| < 1, got {velocity}"
            )));
        }
        let gamma = 1.0 / (1.0 - velocity * velocity).sqrt();
        let mut map = AmbientMap::identity(dim);
        map.entries[0] = gamma;
        map.entries[axis] = gamma * velocity;
        map.entries[axis * dim] = gamma * velocity;
        map.entries[axis * dim + axis] = gamma;
        Ok(map)
    }

    /// Spatial rotation by `angle` in the plane of spatial axes `i`, `j`
    /// (1-based among the spatial coordinates).
    pub fn rotation(dim: usize, i: usize, j: usize, angle: f64) -> Result<Self, Error> {
        if i < 1 || j < 1 || i >= dim || j >= dim || i == j {
            return Err(Error::DimensionMismatch(format!(
                "rotation axes ({i}, {j}) out of range for ambient dimension {dim}"
            )));
        }
        let (s, c) = angle.sin_cos();
        let mut map = AmbientMap::identity(dim);
        map.entries[i * dim + i] = c;
        map.entries[i * dim + j] = -s;
        map.entries[j * dim + i] = s;
        map.entries[j * dim + j] = c;
        Ok(map)
    }

    pub fn apply(&self, v: &MinkVec) -> MinkVec {
        assert_eq!(v.dim(), self.dim, "AmbientMap::apply: dimension mismatch");
        let mut out = vec![0.0; self.dim];
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = &self.entries[r * self.dim..(r + 1) * self.dim];
            *out_r = row.iter().zip(&v.0).map(|(m, x)| m * x).sum();
        }
        MinkVec(out)
    }

    /// `self ∘ rhs`: applies `rhs` first.
    pub fn compose(&self, rhs: &AmbientMap) -> AmbientMap {
        assert_eq!(self.dim, rhs.dim, "AmbientMap::compose: dimension mismatch");
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.entries[r * d + k] * rhs.entries[k * d + c];
                }
                entries[r * d + c] = acc;
            }
        }
        AmbientMap { dim: d, entries }
    }
}
