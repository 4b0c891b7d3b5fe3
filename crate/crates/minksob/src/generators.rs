//! Mesh and density generators for the test surfaces, plus the `kind:k=v`
//! spec-string parser the CLI uses.

use crate::lorentz::MinkVec;
use crate::mesh::SpacelikeMesh;
use crate::Error;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Triangulated disk in the plane: concentric rings with `6j` vertices on
/// ring `j`, stitched by angle. `ring_radius[j-1]` is the radius of ring `j`;
/// radii must be strictly increasing.
fn ring_disk(ring_radius: &[f64]) -> (Vec<[f64; 2]>, Vec<Vec<usize>>) {
    let nr = ring_radius.len();
    let mut pts = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize; nr + 1];
    for j in 1..=nr {
        ring_start[j] = pts.len();
        let k = 6 * j;
        let r = ring_radius[j - 1];
        for i in 0..k {
            let th = 2.0 * PI * i as f64 / k as f64;
            pts.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut tris = Vec::new();
    if nr >= 1 {
        let s = ring_start[1];
        for i in 0..6 {
            tris.push(vec![0, s + i, s + (i + 1) % 6]);
        }
    }
    for j in 1..nr {
        let a0 = ring_start[j];
        let an = 6 * j;
        let b0 = ring_start[j + 1];
        let bn = 6 * (j + 1);
        let (mut ia, mut ib) = (0usize, 0usize);
        // advance whichever ring's next vertex comes first in angle
        while ia < an || ib < bn {
            let next_a = if ia < an {
                (ia + 1) as f64 / an as f64
            } else {
                f64::INFINITY
            };
            let next_b = if ib < bn {
                (ib + 1) as f64 / bn as f64
            } else {
                f64::INFINITY
            };
            if next_b <= next_a {
                tris.push(vec![a0 + ia % an, b0 + ib % bn, b0 + (ib + 1) % bn]);
                ib += 1;
            } else {
                tris.push(vec![a0 + ia % an, b0 + ib % bn, a0 + (ia + 1) % an]);
                ia += 1;
            }
        }
    }
    (pts, tris)
}

fn check_positive(name: &str, value: f64) -> Result<(), Error> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Parse(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

fn rings(extent: f64, h: f64) -> usize {
    ((extent / h).ceil() as usize).max(1)
}

/// Lifts a planar disk triangulation through `x0 = φ(x1, x2)` into `R^{2,1}`.
fn lift_graph(
    radius: f64,
    h: f64,
    phi: &dyn Fn(f64, f64) -> f64,
) -> Result<SpacelikeMesh, Error> {
    check_positive("radius", radius)?;
    check_positive("h", h)?;
    let nr = rings(radius, h);
    let radii: Vec<f64> = (1..=nr).map(|j| radius * j as f64 / nr as f64).collect();
    let (pts, tris) = ring_disk(&radii);
    let verts = pts
        .iter()
        .map(|&[x, y]| MinkVec(vec![phi(x, y), x, y]))
        .collect();
    SpacelikeMesh::new(2, 2, verts, tris)
}

/// Flat round disk of the given radius in the `{x0 = 0}` slice of `R^{2,1}`.
pub fn flat_disk(radius: f64, h: f64) -> Result<SpacelikeMesh, Error> {
    lift_graph(radius, h, &|_, _| 0.0)
}

/// Geodesic cap of the unit hyperboloid `{x0 = √(1+|x|²)}` out to geodesic
/// radius `depth`; rings are equally spaced in geodesic distance.
pub fn hyperboloid_cap(depth: f64, h: f64) -> Result<SpacelikeMesh, Error> {
    check_positive("depth", depth)?;
    check_positive("h", h)?;
    let nr = rings(depth, h);
    let radii: Vec<f64> = (1..=nr)
        .map(|j| (depth * j as f64 / nr as f64).sinh())
        .collect();
    let (pts, tris) = ring_disk(&radii);
    let verts = pts
        .iter()
        .map(|&[x, y]| MinkVec(vec![(1.0 + x * x + y * y).sqrt(), x, y]))
        .collect();
    SpacelikeMesh::new(2, 2, verts, tris)
}

/// Disk graph `x0 = slope · x1`; a uniformly tilted spacelike plane.
pub fn tilted_disk(radius: f64, slope: f64, h: f64) -> Result<SpacelikeMesh, Error> {
    if slope.abs() > 1.0 - 1e-3 {
        return Err(Error::NotSpacelike(format!(
            "tilted disk slope {slope} too close to lightlike"
        )));
    }
    lift_graph(radius, h, &|x, _| slope * x)
}

/// Disk graph `x0 = amp · sin(freq x1) cos(freq x2)`; the gradient bound
/// `√2 · amp · freq` must stay below 1.
pub fn spacelike_graph(
    radius: f64,
    amp: f64,
    freq: f64,
    h: f64,
) -> Result<SpacelikeMesh, Error> {
    let bound = (2.0f64).sqrt() * amp.abs() * freq.abs();
    if bound > 0.95 {
        return Err(Error::NotSpacelike(format!(
            "graph slope bound {bound:.3} exceeds 0.95"
        )));
    }
    lift_graph(radius, h, &|x, y| amp * (freq * x).sin() * (freq * y).cos())
}

/// Flat disk in the `{x0 = 0, x3 = 0}` plane of `R^{3,1}`: a codimension-two
/// surface with `n = 3`, `m = 2`.
pub fn codim_disk(radius: f64, h: f64) -> Result<SpacelikeMesh, Error> {
    check_positive("radius", radius)?;
    check_positive("h", h)?;
    let nr = rings(radius, h);
    let radii: Vec<f64> = (1..=nr).map(|j| radius * j as f64 / nr as f64).collect();
    let (pts, tris) = ring_disk(&radii);
    let verts = pts
        .iter()
        .map(|&[x, y]| MinkVec(vec![0.0, x, y, 0.0]))
        .collect();
    SpacelikeMesh::new(3, 2, verts, tris)
}

/// Seeded random trigonometric graph over a disk. The coefficients are
/// rescaled so the analytic slope bound `Σ |a_t| |k_t|` equals `eps`.
pub fn random_graph(
    radius: f64,
    eps: f64,
    seed: u64,
    h: f64,
) -> Result<SpacelikeMesh, Error> {
    if !(eps > 0.0) || eps > 0.9 {
        return Err(Error::NotSpacelike(format!(
            "random graph slope budget must lie in (0, 0.9], got {eps}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let terms = 4;
    let mut amps = Vec::with_capacity(terms);
    let mut waves = Vec::with_capacity(terms);
    let mut phases = Vec::with_capacity(terms);
    for _ in 0..terms {
        amps.push(rng.gen_range(0.2..1.0));
        waves.push([rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        phases.push(rng.gen_range(0.0..2.0 * PI));
    }
    let budget: f64 = amps
        .iter()
        .zip(&waves)
        .map(|(a, k): (&f64, &[f64; 2])| a * (k[0] * k[0] + k[1] * k[1]).sqrt())
        .sum();
    let rescale = eps / budget.max(1e-12);
    for a in &mut amps {
        *a *= rescale;
    }
    lift_graph(radius, h, &move |x, y| {
        (0..terms)
            .map(|t| amps[t] * (waves[t][0] * x + waves[t][1] * y + phases[t]).sin())
            .sum()
    })
}

/// Boundaryless test surface: the octahedron `|x1|+|x2|+|x3| = radius` in
/// the `{x0 = 0}` slice of `R^{3,1}`.
pub fn octahedron(radius: f64) -> Result<SpacelikeMesh, Error> {
    check_positive("radius", radius)?;
    let r = radius;
    let verts = vec![
        MinkVec(vec![0.0, r, 0.0, 0.0]),
        MinkVec(vec![0.0, -r, 0.0, 0.0]),
        MinkVec(vec![0.0, 0.0, r, 0.0]),
        MinkVec(vec![0.0, 0.0, -r, 0.0]),
        MinkVec(vec![0.0, 0.0, 0.0, r]),
        MinkVec(vec![0.0, 0.0, 0.0, -r]),
    ];
    let tris = vec![
        vec![0, 2, 4],
        vec![2, 1, 4],
        vec![1, 3, 4],
        vec![3, 0, 4],
        vec![2, 0, 5],
        vec![1, 2, 5],
        vec![3, 1, 5],
        vec![0, 3, 5],
    ];
    SpacelikeMesh::new(3, 2, verts, tris)
}

fn split_spec(spec: &str) -> Result<(&str, BTreeMap<String, String>), Error> {
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k.trim(), r),
        None => (spec.trim(), ""),
    };
    if kind.is_empty() {
        return Err(Error::Parse(format!("empty spec kind in {spec:?}")));
    }
    let mut map = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((kind, map))
}

fn take_f64(map: &mut BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, Error> {
    match map.remove(key) {
        None => Ok(default),
        Some(s) => s
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("invalid number for {key}: {s:?}"))),
    }
}

fn take_u64(map: &mut BTreeMap<String, String>, key: &str, default: u64) -> Result<u64, Error> {
    match map.remove(key) {
        None => Ok(default),
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("invalid integer for {key}: {s:?}"))),
    }
}

fn reject_unknown(kind: &str, map: &BTreeMap<String, String>) -> Result<(), Error> {
    if let Some(key) = map.keys().next() {
        return Err(Error::Parse(format!("unknown key {key:?} for {kind}")));
    }
    Ok(())
}

/// Builds a mesh from a `kind:key=val,...` spec string. An `h` key in the
/// string overrides `default_h`.
pub fn surface_from_spec(spec: &str, default_h: f64) -> Result<SpacelikeMesh, Error> {
    let (kind, mut map) = split_spec(spec)?;
    let h = take_f64(&mut map, "h", default_h)?;
    let mesh = match kind {
        "flat_disk" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            reject_unknown(kind, &map)?;
            flat_disk(r, h)
        }
        "cap" => {
            let d = take_f64(&mut map, "d", 1.0)?;
            reject_unknown(kind, &map)?;
            hyperboloid_cap(d, h)
        }
        "tilted_disk" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            let k = take_f64(&mut map, "k", 0.3)?;
            reject_unknown(kind, &map)?;
            tilted_disk(r, k, h)
        }
        "graph" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            let a = take_f64(&mut map, "a", 0.3)?;
            let k = take_f64(&mut map, "k", 1.0)?;
            reject_unknown(kind, &map)?;
            spacelike_graph(r, a, k, h)
        }
        "codim_disk" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            reject_unknown(kind, &map)?;
            codim_disk(r, h)
        }
        "random_graph" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            let eps = take_f64(&mut map, "eps", 0.5)?;
            let seed = take_u64(&mut map, "seed", 0)?;
            reject_unknown(kind, &map)?;
            random_graph(r, eps, seed, h)
        }
        "octahedron" => {
            let r = take_f64(&mut map, "r", 1.0)?;
            reject_unknown(kind, &map)?;
            octahedron(r)
        }
        other => Err(Error::Parse(format!("unknown surface kind {other:?}"))),
    }?;
    Ok(mesh)
}

/// Evaluates a density spec at every mesh vertex. Densities are strictly
/// positive by construction or the spec is rejected.
pub fn density_from_spec(spec: &str, mesh: &SpacelikeMesh) -> Result<Vec<f64>, Error> {
    let (kind, mut map) = split_spec(spec)?;
    match kind {
        "constant" => {
            let c = take_f64(&mut map, "c", 1.0)?;
            reject_unknown(kind, &map)?;
            if !(c > 0.0) {
                return Err(Error::NonpositiveDensity(c));
            }
            Ok(vec![c; mesh.num_vertices()])
        }
        "radial_bump" => {
            let floor = take_f64(&mut map, "floor", 0.5)?;
            let width = take_f64(&mut map, "w", 0.5)?;
            reject_unknown(kind, &map)?;
            if !(floor > 0.0) {
                return Err(Error::NonpositiveDensity(floor));
            }
            check_positive("w", width)?;
            let dim = mesh.n() + 1;
            let mut centroid = vec![0.0; dim];
            for v in mesh.vertices() {
                for (c, x) in centroid.iter_mut().zip(&v.0) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= mesh.num_vertices() as f64;
            }
            Ok(mesh
                .vertices()
                .iter()
                .map(|v| {
                    let d2: f64 = v
                        .0
                        .iter()
                        .zip(&centroid)
                        .map(|(x, c)| (x - c) * (x - c))
                        .sum();
                    floor + (-d2 / (width * width)).exp()
                })
                .collect())
        }
        "random_trig" => {
            let floor = take_f64(&mut map, "floor", 0.5)?;
            let seed = take_u64(&mut map, "seed", 0)?;
            reject_unknown(kind, &map)?;
            if !(floor > 0.0) {
                return Err(Error::NonpositiveDensity(floor));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = mesh.n();
            let terms = 3;
            let mut amps: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..0.6)).collect();
            let total: f64 = amps.iter().sum();
            if total > 1.2 {
                let s = 1.2 / total;
                for a in &mut amps {
                    *a *= s;
                }
            }
            let waves: Vec<Vec<f64>> = (0..terms)
                .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let phases: Vec<f64> =
                (0..terms).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
            Ok(mesh
                .vertices()
                .iter()
                .map(|v| {
                    let g: f64 = (0..terms)
                        .map(|t| {
                            let dot: f64 = waves[t]
                                .iter()
                                .zip(&v.0[1..])
                                .map(|(k, x)| k * x)
                                .sum();
                            amps[t] * (dot + phases[t]).cos()
                        })
                        .sum();
                    floor + g.exp()
                })
                .collect())
        }
        other => Err(Error::Parse(format!("unknown density kind {other:?}"))),
    }
}
