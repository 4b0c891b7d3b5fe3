//! Desk-scale verification of the Sobolev-type inequalities: the sharp
//! constants, quadrature evaluation of both sides on a mesh, and randomized
//! sweeps over surface and density families.

use crate::abp::effective_tau;
use crate::generators::{density_from_spec, surface_from_spec};
use crate::lorentz::unit_ball_volume;
use crate::mesh::{
    maximal_slope, normal_frame, second_fundamental_form, CurvatureData, FitContext, NormalFrame,
    SpacelikeMesh,
};
use crate::pde::source_term;
use crate::{Error, Variant};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sharp constant of the inequality for intrinsic dimension `m`, ambient
/// spatial dimension `n`, slope bound `τ`.
pub fn constant_c(variant: Variant, n: usize, m: usize, tau: f64) -> Result<f64, Error> {
    variant.check_dims(m, n)?;
    let tau = effective_tau(tau)?;
    let root = (tau * tau - 1.0).max(0.0).sqrt();
    let wn = unit_ball_volume(n)?;
    let nf = n as f64;
    let mf = m as f64;
    Ok(match variant {
        Variant::Thm11 => {
            nf * wn.powf(1.0 / nf)
                * (nf + 1.0).powf(-1.0 / nf)
                * tau.powf(-1.0 / nf)
                / (tau + root)
        }
        Variant::Thm12 => {
            0.5 * nf * wn.powf(1.0 / nf)
                * (nf + 1.0).powf(-1.0 / nf)
                * tau.powf(-1.0 / nf)
                / (tau + root)
        }
        Variant::Thm13 => {
            mf * 2f64.powf(-nf / mf)
                * (nf + 1.0).powf(-1.0 / mf)
                * wn.powf(1.0 / mf)
                * tau.powf(-1.0 / mf)
                * (tau + root).powf(-nf / mf)
        }
    })
}

/// Slack of the verified inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Margins {
    /// `lhs - rhs`; nonnegative when the inequality holds.
    pub absolute: f64,
    /// `lhs/rhs - 1`.
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    /// `∫_Σ S dμ + ∫_∂Σ f`, the gradient-plus-boundary side.
    pub lhs: f64,
    /// `C · (∫_Σ f^{m/(m-1)} dμ)^{(m-1)/m}`.
    pub rhs: f64,
    pub ratio: f64,
    pub constant: f64,
    pub mesh_spec: Option<String>,
    pub density_spec: Option<String>,
    pub resolution: Option<f64>,
    pub seed: Option<u64>,
    pub margins: Margins,
}

impl VerificationReport {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }

    pub fn holds_within(&self, tolerance: f64) -> bool {
        self.ratio >= 1.0 - tolerance
    }
}

/// Evaluates both sides of the inequality in the lumped vertex quadrature.
/// Purely geometric: no boundary value problem is solved here. The slope
/// constant is the mesh's own maximal normal slope.
pub fn evaluate_inequality(
    mesh: &SpacelikeMesh,
    frame: &NormalFrame,
    curv: &CurvatureData,
    variant: Variant,
    f: &[f64],
) -> Result<VerificationReport, Error> {
    variant.check_dims(mesh.m(), mesh.n())?;
    if !mesh.has_boundary() {
        return Err(Error::EmptyBoundary);
    }
    if variant == Variant::Thm11 {
        if let Some((vertex, h)) = crate::mesh::mean_convexity_violation(mesh, curv, 1e-8)? {
            return Err(Error::MeanConvexityViolated { vertex, h });
        }
    }
    let tau = maximal_slope(frame)?;
    let source = source_term(mesh, frame, curv, variant, f)?;
    let mut lhs = 0.0;
    let mut power = 0.0;
    let m = mesh.m() as f64;
    let exponent = m / (m - 1.0);
    for v in 0..mesh.num_vertices() {
        lhs += source[v] * mesh.lumped_area(v) + f[v] * mesh.lumped_boundary(v);
        power += f[v].powf(exponent) * mesh.lumped_area(v);
    }
    let constant = constant_c(variant, mesh.n(), mesh.m(), tau)?;
    let rhs = constant * power.powf(1.0 / exponent);
    Ok(VerificationReport {
        variant,
        n: mesh.n(),
        m: mesh.m(),
        tau,
        lhs,
        rhs,
        ratio: lhs / rhs,
        constant,
        mesh_spec: None,
        density_spec: None,
        resolution: None,
        seed: None,
        margins: Margins {
            absolute: lhs - rhs,
            relative: lhs / rhs - 1.0,
        },
    })
}

/// Convenience wrapper: builds the mesh and density from spec strings,
/// derives the frame and curvature, and evaluates the inequality.
pub fn verify_specs(
    variant: Variant,
    mesh_spec: &str,
    density_spec: &str,
    h: f64,
) -> Result<VerificationReport, Error> {
    let mesh = surface_from_spec(mesh_spec, h)?;
    let frame = normal_frame(&mesh)?;
    let fit = FitContext::new(&mesh, &frame)?;
    let curv = second_fundamental_form(&mesh, &frame, &fit)?;
    let f = density_from_spec(density_spec, &mesh)?;
    let mut report = evaluate_inequality(&mesh, &frame, &curv, variant, &f)?;
    report.mesh_spec = Some(mesh_spec.to_string());
    report.density_spec = Some(density_spec.to_string());
    report.resolution = Some(h);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzTrial {
    pub trial: usize,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub variant: Variant,
    pub trials: usize,
    pub tolerance: f64,
    /// Trial indices whose ratio fell below `1 - tolerance`.
    pub violations: Vec<usize>,
    pub worst_ratio: f64,
    pub results: Vec<FuzzTrial>,
}

fn draw_surface_spec(variant: Variant, rng: &mut ChaCha12Rng) -> String {
    match variant {
        Variant::Thm13 => {
            let r = rng.gen_range(0.5..1.5);
            format!("codim_disk:r={r}")
        }
        Variant::Thm11 | Variant::Thm12 => {
            let kinds = if variant == Variant::Thm12 { 4 } else { 3 };
            match rng.gen_range(0..kinds) {
                0 => {
                    let r = rng.gen_range(0.5..1.5);
                    format!("flat_disk:r={r}")
                }
                1 => {
                    let r = rng.gen_range(0.7..1.3);
                    let k = rng.gen_range(0.0..0.6);
                    format!("tilted_disk:r={r},k={k}")
                }
                2 => {
                    let d = rng.gen_range(0.3..1.2);
                    format!("cap:d={d}")
                }
                _ => {
                    let r = rng.gen_range(0.8..1.2);
                    let eps = rng.gen_range(0.1..0.6);
                    let seed = rng.gen::<u32>();
                    format!("random_graph:r={r},eps={eps},seed={seed}")
                }
            }
        }
    }
}

fn draw_density_spec(rng: &mut ChaCha12Rng) -> String {
    match rng.gen_range(0..3) {
        0 => {
            let c = rng.gen_range(0.5..2.0);
            format!("constant:c={c}")
        }
        1 => {
            let floor = rng.gen_range(0.3..1.0);
            let w = rng.gen_range(0.3..1.0);
            format!("radial_bump:floor={floor},w={w}")
        }
        _ => {
            let floor = rng.gen_range(0.5..1.0);
            let seed = rng.gen::<u32>();
            format!("random_trig:floor={floor},seed={seed}")
        }
    }
}

/// Randomized sweep: `trials` independently drawn surface/density pairs for
/// the variant, each evaluated at resolution `h`. Trial `i` uses stream `i`
/// of the base seed, so the sweep is reproducible and order-independent.
pub fn fuzz(
    variant: Variant,
    trials: usize,
    h: f64,
    seed: u64,
    tolerance: f64,
) -> Result<FuzzSummary, Error> {
    let mut results: Vec<FuzzTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mesh_spec = draw_surface_spec(variant, &mut rng);
            let density_spec = draw_density_spec(&mut rng);
            let mut report = verify_specs(variant, &mesh_spec, &density_spec, h)?;
            report.seed = Some(seed);
            Ok(FuzzTrial { trial, report })
        })
        .collect::<Result<_, Error>>()?;
    results.sort_by_key(|t| t.trial);
    let violations: Vec<usize> = results
        .iter()
        .filter(|t| !t.report.holds_within(tolerance))
        .map(|t| t.trial)
        .collect();
    let worst_ratio = results
        .iter()
        .map(|t| t.report.ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(FuzzSummary {
        variant,
        trials,
        tolerance,
        violations,
        worst_ratio,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abp::asymptotic_constant;
    use crate::generators::{flat_disk, octahedron, spacelike_graph};
    use crate::lorentz::AmbientMap;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_matches_volume_identity() {
        // C = m · C̃^{1/m} across variants and parameter grid
        for variant in Variant::ALL {
            for &n in &[2usize, 3, 4] {
                let ms: Vec<usize> = match variant {
                    Variant::Thm13 => (2..n).collect(),
                    _ => vec![n],
                };
                for m in ms {
                    for &tau in &[1.0, 1.2, 2.0, 5.0] {
                        let c = constant_c(variant, n, m, tau).unwrap();
                        let ctilde = asymptotic_constant(variant, n, tau).unwrap();
                        let identity = m as f64 * ctilde.powf(1.0 / m as f64);
                        assert!(
                            (c - identity).abs() <= 1e-12 * c,
                            "{variant} n={n} m={m} tau={tau}: {c} vs {identity}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn frozen_constant_values() {
        assert_relative_eq!(
            constant_c(Variant::Thm11, 2, 2, 1.0).unwrap(),
            2.0 * (PI / 3.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            constant_c(Variant::Thm12, 2, 2, 1.0).unwrap(),
            (PI / 3.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            constant_c(Variant::Thm13, 3, 2, 1.0).unwrap(),
            2f64.powf(-1.5) * (4.0 * PI / 3.0).sqrt(),
            max_relative = 1e-14
        );
        assert!(matches!(
            constant_c(Variant::Thm13, 3, 3, 1.0),
            Err(Error::WrongCodimension { .. })
        ));
        assert!(matches!(
            constant_c(Variant::Thm11, 2, 2, 0.5),
            Err(Error::SlopeBelowOne(_))
        ));
    }

    #[test]
    fn flat_disk_ratios_hit_the_closed_forms() {
        // constant density on the unit disk: ratio = perimeter / (C √area)
        let report = verify_specs(Variant::Thm11, "flat_disk:r=1", "constant:c=1", 0.05).unwrap();
        assert_relative_eq!(report.ratio, 3f64.sqrt(), max_relative = 0.01);
        assert!(report.holds());
        assert_relative_eq!(report.tau, 1.0, epsilon = 1e-12);
        let report = verify_specs(Variant::Thm12, "flat_disk:r=1", "constant:c=1", 0.05).unwrap();
        assert_relative_eq!(report.ratio, 2.0 * 3f64.sqrt(), max_relative = 0.01);
        let report = verify_specs(Variant::Thm13, "codim_disk:r=1", "constant:c=1", 0.05).unwrap();
        let expected = 2.0 * PI / (constant_c(Variant::Thm13, 3, 2, 1.0).unwrap() * PI.sqrt());
        assert_relative_eq!(report.ratio, expected, max_relative = 0.015);
    }

    #[test]
    fn hypothesis_violations_are_flagged() {
        let mesh = octahedron(1.0).unwrap();
        let frame = normal_frame(&mesh).unwrap();
        let fit = FitContext::new(&mesh, &frame).unwrap();
        let curv = second_fundamental_form(&mesh, &frame, &fit).unwrap();
        let f = vec![1.0; mesh.num_vertices()];
        let err = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm13, &f).unwrap_err();
        assert!(matches!(err, Error::EmptyBoundary));
        assert!(err.is_hypothesis_violation());

        let mesh = spacelike_graph(1.0, 0.25, 1.8, 0.1).unwrap();
        let frame = normal_frame(&mesh).unwrap();
        let fit = FitContext::new(&mesh, &frame).unwrap();
        let curv = second_fundamental_form(&mesh, &frame, &fit).unwrap();
        let f = vec![1.0; mesh.num_vertices()];
        let err = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm11, &f).unwrap_err();
        assert!(err.is_hypothesis_violation());
        // the same surface is admissible for the divergence variant
        let report = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm12, &f).unwrap();
        assert!(report.holds());
    }

    #[test]
    fn density_scaling_leaves_the_ratio_fixed() {
        let mesh = flat_disk(1.0, 0.1).unwrap();
        let frame = normal_frame(&mesh).unwrap();
        let fit = FitContext::new(&mesh, &frame).unwrap();
        let curv = second_fundamental_form(&mesh, &frame, &fit).unwrap();
        let f = density_from_spec("radial_bump:floor=0.5,w=0.5", &mesh).unwrap();
        let scaled: Vec<f64> = f.iter().map(|x| 7.3 * x).collect();
        let a = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm11, &f).unwrap();
        let b = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm11, &scaled).unwrap();
        assert_relative_eq!(a.ratio, b.ratio, max_relative = 1e-12);
    }

    #[test]
    fn rotation_and_boost_covariance() {
        let mesh = flat_disk(1.0, 0.1).unwrap();
        let frame = normal_frame(&mesh).unwrap();
        let fit = FitContext::new(&mesh, &frame).unwrap();
        let curv = second_fundamental_form(&mesh, &frame, &fit).unwrap();
        let f = density_from_spec("radial_bump:floor=0.5,w=0.5", &mesh).unwrap();
        let base = evaluate_inequality(&mesh, &frame, &curv, Variant::Thm11, &f).unwrap();

        let rot = AmbientMap::rotation(3, 1, 2, 0.7).unwrap();
        let rotated = mesh.transform(&rot).unwrap();
        let rframe = normal_frame(&rotated).unwrap();
        let rfit = FitContext::new(&rotated, &rframe).unwrap();
        let rcurv = second_fundamental_form(&rotated, &rframe, &rfit).unwrap();
        let r = evaluate_inequality(&rotated, &rframe, &rcurv, Variant::Thm11, &f).unwrap();
        assert_relative_eq!(r.ratio, base.ratio, max_relative = 1e-8);
        assert_relative_eq!(r.tau, base.tau, epsilon = 1e-10);

        // a boost raises the slope and shrinks the constant; the inequality
        // still holds for the boosted surface
        let boost = AmbientMap::boost(3, 1, 0.4).unwrap();
        let boosted = mesh.transform(&boost).unwrap();
        let bframe = normal_frame(&boosted).unwrap();
        let bfit = FitContext::new(&boosted, &bframe).unwrap();
        let bcurv = second_fundamental_form(&boosted, &bframe, &bfit).unwrap();
        let b = evaluate_inequality(&boosted, &bframe, &bcurv, Variant::Thm11, &f).unwrap();
        let gamma = 1.0 / (1.0 - 0.4f64 * 0.4).sqrt();
        assert_relative_eq!(b.tau, gamma, max_relative = 1e-6);
        assert!(b.holds());
        assert!(b.constant < base.constant);
    }

    #[test]
    fn fuzz_runs_clean_and_is_deterministic() {
        for variant in Variant::ALL {
            let summary = fuzz(variant, 8, 0.1, 42, 0.5).unwrap();
            assert_eq!(summary.trials, 8);
            assert!(summary.violations.is_empty(), "{:?}", summary.violations);
            assert!(summary.worst_ratio >= 1.0, "worst {}", summary.worst_ratio);
            let trials: Vec<usize> = summary.results.iter().map(|t| t.trial).collect();
            assert_eq!(trials, (0..8).collect::<Vec<_>>());
            let again = fuzz(variant, 8, 0.1, 42, 0.5).unwrap();
            for (a, b) in summary.results.iter().zip(&again.results) {
                assert_eq!(a.report.ratio.to_bits(), b.report.ratio.to_bits());
                assert_eq!(a.report.mesh_spec, b.report.mesh_spec);
            }
        }
    }

    #[test]
    fn report_serializes_round_trip() {
        let report = verify_specs(Variant::Thm11, "flat_disk:r=1", "constant:c=1", 0.2).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"variant\":\"thm1.1\""));
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.ratio.to_bits(), report.ratio.to_bits());
        assert_eq!(back.mesh_spec.as_deref(), Some("flat_disk:r=1"));
    }
}
