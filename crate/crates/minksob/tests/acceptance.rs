//! Acceptance gate: every primary claim of the construction checked at its
//! stated tolerance, one PASS/FAIL line per criterion.

use minksob::abp::{
    asymptotic_constant, estimate_volume_a, sample_region_points, RegionData, TransportContext,
};
use minksob::generators::{codim_disk, flat_disk, hyperboloid_cap, surface_from_spec};
use minksob::lorentz::AmbientMap;
use minksob::mesh::{
    hessian_identity_check, normal_frame, second_fundamental_form,
    CoordinateHeight, CurvatureData, FitContext, HalfMinkowskiSquare, NormalFrame, SpacelikeMesh,
};
use minksob::pde::{solve_neumann, solve_neumann_with_source, SolveOptions};
use minksob::verify::{constant_c, evaluate_inequality, fuzz, verify_specs};
use minksob::Variant;
use std::f64::consts::PI;
use std::time::Instant;

const SEED: u64 = 17;

fn report(criterion: &str, ok: bool, detail: &str) {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion}: {detail}");
}

struct Geo {
    mesh: SpacelikeMesh,
    frame: NormalFrame,
    fit: FitContext,
    curv: CurvatureData,
}

fn geo(mesh: SpacelikeMesh) -> Geo {
    let frame = normal_frame(&mesh).unwrap();
    let fit = FitContext::new(&mesh, &frame).unwrap();
    let curv = second_fundamental_form(&mesh, &frame, &fit).unwrap();
    Geo {
        mesh,
        frame,
        fit,
        curv,
    }
}

fn lumped_l2(mesh: &SpacelikeMesh, values: &[f64]) -> f64 {
    (0..mesh.num_vertices())
        .map(|v| mesh.lumped_area(v) * values[v] * values[v])
        .sum::<f64>()
        .sqrt()
}

#[test]
fn criterion_1_constant_identity() {
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    for variant in Variant::ALL {
        for n in [2usize, 3, 4] {
            let ms: Vec<usize> = match variant {
                Variant::Thm13 => (2..n).collect(),
                _ => vec![n],
            };
            for m in ms {
                for tau in [1.0, 1.2, 2.0, 5.0] {
                    let c = constant_c(variant, n, m, tau).unwrap();
                    let identity =
                        m as f64 * asymptotic_constant(variant, n, tau).unwrap().powf(1.0 / m as f64);
                    worst = worst.max((c - identity).abs() / c);
                    checks += 1;
                }
            }
        }
    }
    report(
        "criterion 1",
        worst <= 1e-12,
        &format!("C = m*Ctilde^(1/m) over {checks} combinations, worst rel dev {worst:.3e}"),
    );
}

#[test]
fn criterion_2_flat_disk_volume_window() {
    let t0 = Instant::now();
    let g = geo(flat_disk(1.0, 0.1).unwrap());
    let region = RegionData::new(&g.mesh, &g.frame, &g.curv, Variant::Thm11).unwrap();
    let floor = asymptotic_constant(Variant::Thm11, 2, 1.0).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for r in [20.0, 50.0] {
        let est = estimate_volume_a(&region, r, 1_000_000, SEED).unwrap();
        let scale = r.powi(3);
        let scaled = est.estimate / scale;
        let lo99 = est.ci99.0 / scale;
        ok &= lo99 >= floor;
        ok &= (0.9 * PI..=1.05 * PI).contains(&scaled);
        details.push(format!("r={r}: scaled {scaled:.4} (99% lo {lo99:.4})"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    report(
        "criterion 2",
        ok,
        &format!(
            "flat disk |A_r|/r^3 in [0.9pi, 1.05pi] and above {floor:.4}; {}; {secs:.1}s",
            details.join("; ")
        ),
    );
}

#[test]
fn criterion_3_cap_volume_lower_bound() {
    let t0 = Instant::now();
    let g = geo(hyperboloid_cap(1.0, 0.1).unwrap());
    let region = RegionData::new(&g.mesh, &g.frame, &g.curv, Variant::Thm12).unwrap();
    let r = 50.0 * g.mesh.diameter_euclid();
    let est = estimate_volume_a(&region, r, 1_000_000, SEED).unwrap();
    let tau = 1.0f64.cosh();
    let closed = 0.25 * PI / (3.0 * tau * (tau + 1.0f64.sinh()).powi(2));
    let library = asymptotic_constant(Variant::Thm12, 2, tau).unwrap();
    let frozen_ok = (closed - library).abs() <= 1e-12 * closed;
    let scaled = est.estimate / r.powi(3);
    let rel_ci = 2.575829 * est.std_error / est.estimate;
    let eps = rel_ci + 0.05;
    let secs = t0.elapsed().as_secs_f64();
    let ok = frozen_ok && scaled >= (1.0 - eps) * closed && secs < 120.0;
    report(
        "criterion 3",
        ok,
        &format!(
            "cap |A_r|/r^3 = {scaled:.4} >= (1-{eps:.3})*{closed:.5} at r = 50 diam; {secs:.1}s"
        ),
    );
}

#[test]
fn criterion_4_manufactured_solution_convergence() {
    // constant source g = 2 on the unit disk has the radial square profile
    // as exact solution; the lumped quadrature leaves an O(h^2) defect, so
    // the consistency gate is relaxed for this run only
    let opts = SolveOptions {
        compat_tol: 0.05,
        ..SolveOptions::default()
    };
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mesh = flat_disk(1.0, h).unwrap();
        let f = vec![1.0; mesh.num_vertices()];
        let grhs = vec![2.0; mesh.num_vertices()];
        let sol = solve_neumann_with_source(&mesh, &f, &grhs, &opts).unwrap();
        let total: f64 = (0..mesh.num_vertices()).map(|v| mesh.lumped_area(v)).sum();
        let mut exact: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|x| 0.5 * (x.0[1] * x.0[1] + x.0[2] * x.0[2]))
            .collect();
        let mean: f64 = (0..mesh.num_vertices())
            .map(|v| mesh.lumped_area(v) * exact[v])
            .sum::<f64>()
            / total;
        for e in &mut exact {
            *e -= mean;
        }
        let diff: Vec<f64> = sol.u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        errors.push(lumped_l2(&mesh, &diff));
    }
    let order1 = (errors[0] / errors[1]).log2();
    let order2 = (errors[1] / errors[2]).log2();
    let order_ok = order1 >= 1.8 && order2 >= 1.8;

    // the normalized density path balances the system to rounding level
    let mut defects = Vec::new();
    for (variant, spec) in [(Variant::Thm11, "flat_disk:r=1"), (Variant::Thm12, "cap:d=1")] {
        let g = geo(surface_from_spec(spec, 0.025).unwrap());
        let f = vec![1.0; g.mesh.num_vertices()];
        let sol = solve_neumann(
            &g.mesh,
            &g.frame,
            &g.curv,
            variant,
            &f,
            &SolveOptions::default(),
        )
        .unwrap();
        defects.push(sol.compat_defect);
    }
    let defect_ok = defects.iter().all(|d| *d < 1e-10);
    report(
        "criterion 4",
        order_ok && defect_ok,
        &format!(
            "L2 orders {order1:.2}, {order2:.2} (errors {:.2e}, {:.2e}, {:.2e}); normalized defects {:.1e}, {:.1e}",
            errors[0], errors[1], errors[2], defects[0], defects[1]
        ),
    );
}

#[test]
fn criterion_5_hessian_identity_on_the_cap() {
    let mut height = Vec::new();
    let mut quad = Vec::new();
    for h in [0.05, 0.025] {
        let g = geo(hyperboloid_cap(1.0, h).unwrap());
        height
            .push(hessian_identity_check(&g.mesh, &g.frame, &g.curv, &g.fit, &CoordinateHeight).unwrap());
        quad.push(
            hessian_identity_check(&g.mesh, &g.frame, &g.curv, &g.fit, &HalfMinkowskiSquare)
                .unwrap(),
        );
    }
    // the coordinate height is ambient-linear, so the shared fit stencil
    // reproduces its identity exactly and the residual sits at conditioning
    // level; require a decrease only above that floor
    let floor = 1e-9;
    let decreasing = |e: &Vec<f64>| e[1] < e[0] || e[1] < floor;
    let ok = height[1] < 0.05 && quad[1] < 0.05 && decreasing(&height) && decreasing(&quad);
    report(
        "criterion 5",
        ok,
        &format!(
            "worst rel dev at h=0.025: height {:.2e}, half-square {:.2e} (h=0.05: {:.2e}, {:.2e})",
            height[1], quad[1], height[0], quad[0]
        ),
    );
}

#[test]
fn criterion_6_transport_inclusion_witnesses() {
    let t0 = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, mesh) in [
        ("flat disk", flat_disk(1.0, 0.05).unwrap()),
        ("cap", hyperboloid_cap(1.0, 0.05).unwrap()),
    ] {
        let g = geo(mesh);
        let f = vec![1.0; g.mesh.num_vertices()];
        let sol = solve_neumann(
            &g.mesh,
            &g.frame,
            &g.curv,
            Variant::Thm11,
            &f,
            &SolveOptions::default(),
        )
        .unwrap();
        let ctx =
            TransportContext::new(&g.mesh, &g.frame, &g.curv, &g.fit, Variant::Thm11, &sol)
                .unwrap();
        let region = RegionData::new(&g.mesh, &g.frame, &g.curv, Variant::Thm11).unwrap();
        let r = 20.0 * g.mesh.diameter_euclid();
        let points = sample_region_points(&region, r, 1000, SEED).unwrap();
        let good = points
            .iter()
            .filter(|p| {
                ctx.inclusion_check(r, p)
                    .map(|w| w.transport_error <= 0.05)
                    .unwrap_or(false)
            })
            .count();
        ok &= good >= 950;
        details.push(format!("{name}: {good}/1000 witnesses"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    report(
        "criterion 6",
        ok,
        &format!("{}; {secs:.1}s", details.join("; ")),
    );
}

#[test]
fn criterion_7_determinant_bound_on_b_r() {
    let mut details = Vec::new();
    let mut ok = true;
    for (variant, mesh) in [
        (Variant::Thm11, flat_disk(1.0, 0.05).unwrap()),
        (Variant::Thm12, hyperboloid_cap(1.0, 0.05).unwrap()),
        (Variant::Thm13, codim_disk(1.0, 0.05).unwrap()),
    ] {
        let g = geo(mesh);
        let f = vec![1.0; g.mesh.num_vertices()];
        let sol = solve_neumann(&g.mesh, &g.frame, &g.curv, variant, &f, &SolveOptions::default())
            .unwrap();
        let ctx =
            TransportContext::new(&g.mesh, &g.frame, &g.curv, &g.fit, variant, &sol).unwrap();
        let r = 20.0 * g.mesh.diameter_euclid();
        let samples = ctx.sample_b_r(r, 10_000, SEED).unwrap();
        let mut passes = 0usize;
        let mut worst_excess: f64 = 0.0;
        for (v, y) in &samples {
            let outcome = ctx.det_bound_check(*v, y, r).unwrap();
            if outcome.ok {
                passes += 1;
            }
            worst_excess = worst_excess.max(outcome.excess);
        }
        ok &= passes >= 9_900 && worst_excess < 0.5;
        details.push(format!(
            "{variant}: {passes}/10000, worst excess {worst_excess:.3}"
        ));
    }
    report("criterion 7", ok, &details.join("; "));
}

#[test]
fn criterion_8_frozen_ratios_at_fine_resolution() {
    let r1 = verify_specs(Variant::Thm11, "flat_disk:r=1", "constant:c=1", 0.025)
        .unwrap()
        .ratio;
    let r2 = verify_specs(Variant::Thm12, "flat_disk:r=1", "constant:c=1", 0.025)
        .unwrap()
        .ratio;
    let r3 = verify_specs(Variant::Thm13, "codim_disk:r=1", "constant:c=1", 0.025)
        .unwrap()
        .ratio;
    let e1 = 3f64.sqrt();
    let e2 = 2.0 * 3f64.sqrt();
    let e3 = 2.0 * PI / (2f64.powf(-1.5) * (4.0 * PI / 3.0).sqrt() * PI.sqrt());
    let frozen_ok = (e3 - 4.8989).abs() < 1e-4;
    let ok = frozen_ok
        && (r1 / e1 - 1.0).abs() < 0.02
        && (r2 / e2 - 1.0).abs() < 0.02
        && (r3 / e3 - 1.0).abs() < 0.03;
    report(
        "criterion 8",
        ok,
        &format!(
            "ratios {r1:.4} (exp {e1:.4}), {r2:.4} (exp {e2:.4}), {r3:.4} (exp {e3:.4})"
        ),
    );
}

#[test]
fn criterion_9_randomized_sweeps_run_clean() {
    let t0 = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for variant in Variant::ALL {
        let summary = fuzz(variant, 100, 0.05, SEED, 0.5).unwrap();
        ok &= summary.violations.is_empty();
        details.push(format!(
            "{variant}: {} trials, worst ratio {:.3}",
            summary.trials, summary.worst_ratio
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    report(
        "criterion 9",
        ok,
        &format!("{}; {secs:.0}s", details.join("; ")),
    );
}

#[test]
fn criterion_10_symmetry_invariances() {
    let g = geo(flat_disk(1.0, 0.05).unwrap());
    let f: Vec<f64> = g
        .mesh
        .vertices()
        .iter()
        .map(|x| 0.5 + (-(x.0[1] * x.0[1] + x.0[2] * x.0[2]) / 0.25).exp())
        .collect();
    let base = evaluate_inequality(&g.mesh, &g.frame, &g.curv, Variant::Thm11, &f).unwrap();

    let scaled: Vec<f64> = f.iter().map(|x| 417.0 * x).collect();
    let s = evaluate_inequality(&g.mesh, &g.frame, &g.curv, Variant::Thm11, &scaled).unwrap();
    let scale_dev = (s.ratio / base.ratio - 1.0).abs();

    let rot = AmbientMap::rotation(3, 1, 2, 1.1).unwrap();
    let gr = geo(g.mesh.transform(&rot).unwrap());
    let r = evaluate_inequality(&gr.mesh, &gr.frame, &gr.curv, Variant::Thm11, &f).unwrap();
    let rot_dev = (r.ratio / base.ratio - 1.0).abs();

    let boost = AmbientMap::boost(3, 1, 0.3).unwrap();
    let gb = geo(g.mesh.transform(&boost).unwrap());
    let b = evaluate_inequality(&gb.mesh, &gb.frame, &gb.curv, Variant::Thm11, &f).unwrap();
    let gamma = 1.0 / (1.0 - 0.09f64).sqrt();
    let tau_dev = (b.tau / gamma - 1.0).abs();
    let boost_ok = b.holds() && tau_dev < 1e-6;

    let ok = scale_dev < 1e-10 && rot_dev < 1e-8 && boost_ok;
    report(
        "criterion 10",
        ok,
        &format!(
            "density scaling dev {scale_dev:.1e}, rotation dev {rot_dev:.1e}, boosted tau dev {tau_dev:.1e}, boosted ratio {:.3}",
            b.ratio
        ),
    );
}

#[test]
fn supplementary_transport_chain_bound() {
    // the full chain: the measured region volume is controlled by the
    // transported mass r^{n+1} * integral of (f^{1/(m-1)} + 1/r)^m
    let mut details = Vec::new();
    let mut ok = true;
    for (variant, mesh, r_factor) in [
        (Variant::Thm11, flat_disk(1.0, 0.1).unwrap(), 20.0),
        (Variant::Thm12, hyperboloid_cap(1.0, 0.1).unwrap(), 20.0),
        (Variant::Thm13, codim_disk(1.0, 0.1).unwrap(), 20.0),
    ] {
        let g = geo(mesh);
        let f = vec![1.0; g.mesh.num_vertices()];
        let sol = solve_neumann(&g.mesh, &g.frame, &g.curv, variant, &f, &SolveOptions::default())
            .unwrap();
        let ctx =
            TransportContext::new(&g.mesh, &g.frame, &g.curv, &g.fit, variant, &sol).unwrap();
        let region = RegionData::new(&g.mesh, &g.frame, &g.curv, variant).unwrap();
        let r = r_factor * g.mesh.diameter_euclid();
        let est = estimate_volume_a(&region, r, 300_000, SEED).unwrap();
        let power = g.mesh.n() as i32 + 1;
        let bound = r.powi(power) * ctx.transport_bound_rhs(r);
        let rel_ci = 2.575829 * est.std_error / est.estimate.max(1e-300);
        let slack = 1.0 + rel_ci + 0.05;
        ok &= est.estimate <= slack * bound;
        details.push(format!(
            "{variant}: |A_r| {:.3e} <= {:.3e}",
            est.estimate, bound
        ));
    }
    report("supplementary chain", ok, &details.join("; "));
}
