//! Generators for the example measure families used throughout verification,
//! plus the perturbation helper for stability tests.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Specification of an example measure family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Uniform grid quadrature of an n-plane patch in R^dim, node weight
    /// grid_step^n.
    PlanePatch {
        dim: usize,
        n: usize,
        extent: f64,
        grid_step: f64,
    },
    /// Graph of a random lip_const-Lipschitz function over an n-grid,
    /// embedded in coordinate n. lip_const = 0 degenerates to a plane.
    LipschitzGraph {
        dim: usize,
        n: usize,
        lip_const: f64,
        extent: f64,
        grid_step: f64,
    },
    /// The planar four-corner Cantor set with contraction 1/4 (s = 1),
    /// 4^generation corner points of weight 4^{-generation}.
    CantorFourCorner { generation: u32 },
    /// Corner Cantor set in R^dim with 2^dim children per cell and the given
    /// contraction ratio in (0, 1/2); s = dim·log 2 / log(1/ratio).
    CantorSelfSimilar {
        dim: usize,
        contraction_ratio: f64,
        generation: u32,
    },
    /// Σ_{e ∈ E} f(e)·H^k|_{V+e} realized by grid quadrature on each
    /// translated k-plane patch (V = span of the first k coordinates).
    /// `translates` lists (e, f(e)); E must be symmetric: for x, y ∈ E the
    /// reflection 2y − x must again lie in E (with matching density) whenever
    /// it falls inside the bounding box of E.
    PhiSymmetricExample {
        dim: usize,
        k: usize,
        translates: Vec<(Vec<f64>, f64)>,
        extent: f64,
        grid_step: f64,
    },
}

/// Axis counts for a symmetric grid of the given extent and step: nodes at
/// −extent/2, −extent/2 + step, …; count = floor(extent/step) + 1.
fn grid_axis(extent: f64, grid_step: f64) -> Vec<f64> {
    let count = (extent / grid_step).floor() as usize + 1;
    let half = (count - 1) as f64 * grid_step / 2.0;
    (0..count).map(|i| i as f64 * grid_step - half).collect()
}

fn grid_points(n: usize, extent: f64, grid_step: f64) -> Vec<Vec<f64>> {
    let axis = grid_axis(extent, grid_step);
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for base in &out {
            for &a in &axis {
                let mut p = base.clone();
                p.push(a);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Deterministically generates a measure of the given family.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<DiscreteMeasure> {
    let mut mu = match spec {
        GeneratorSpec::PlanePatch {
            dim,
            n,
            extent,
            grid_step,
        } => {
            check_patch_params(*dim, *n, *extent, *grid_step)?;
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let w = grid_step.powi(*n as i32);
            for g in grid_points(*n, *extent, *grid_step) {
                coords.extend_from_slice(&g);
                coords.extend(std::iter::repeat(0.0).take(dim - n));
                weights.push(w);
            }
            DiscreteMeasure::new(*dim, *n as f64, coords, weights)?
        }
        GeneratorSpec::LipschitzGraph {
            dim,
            n,
            lip_const,
            extent,
            grid_step,
        } => {
            check_patch_params(*dim, *n, *extent, *grid_step)?;
            if *n + 1 > *dim {
                return Err(Error::Validation(
                    "graph needs one normal direction: require n + 1 <= dim".into(),
                ));
            }
            if *lip_const < 0.0 {
                return Err(Error::Validation("lip_const must be >= 0".into()));
            }
            let height = LipschitzHeight::random(*n, *extent, seed);
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let w = grid_step.powi(*n as i32);
            for g in grid_points(*n, *extent, *grid_step) {
                coords.extend_from_slice(&g);
                coords.push(lip_const * height.eval(&g));
                coords.extend(std::iter::repeat(0.0).take(dim - n - 1));
                weights.push(w);
            }
            DiscreteMeasure::new(*dim, *n as f64, coords, weights)?
        }
        GeneratorSpec::CantorFourCorner { generation } => {
            cantor(2, 0.25, *generation)?
        }
        GeneratorSpec::CantorSelfSimilar {
            dim,
            contraction_ratio,
            generation,
        } => {
            if !(*contraction_ratio > 0.0 && *contraction_ratio < 0.5) {
                return Err(Error::Validation(
                    "contraction ratio must lie in (0, 1/2)".into(),
                ));
            }
            cantor(*dim, *contraction_ratio, *generation)?
        }
        GeneratorSpec::PhiSymmetricExample {
            dim,
            k,
            translates,
            extent,
            grid_step,
        } => {
            check_patch_params(*dim, *k, *extent, *grid_step)?;
            validate_translates(*dim, translates, *extent)?;
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let base_w = grid_step.powi(*k as i32);
            for (e, f) in translates {
                for g in grid_points(*k, *extent, *grid_step) {
                    for j in 0..*dim {
                        let inplane = if j < *k { g[j] } else { 0.0 };
                        coords.push(e[j] + inplane);
                    }
                    weights.push(f * base_w);
                }
            }
            DiscreteMeasure::new(*dim, *k as f64, coords, weights)?
        }
    };
    mu.metadata.insert(
        "generator".into(),
        serde_json::to_value(spec).expect("spec serialization"),
    );
    mu.metadata.insert("seed".into(), serde_json::json!(seed));
    Ok(mu)
}

fn check_patch_params(dim: usize, n: usize, extent: f64, grid_step: f64) -> Result<()> {
    if dim < 2 || n == 0 || n >= dim {
        return Err(Error::Validation(format!(
            "need 0 < n < dim with dim >= 2, got n={n}, dim={dim}"
        )));
    }
    if !(extent > 0.0) || !(grid_step > 0.0) || grid_step > extent {
        return Err(Error::Validation(
            "extent and grid_step must be positive with grid_step <= extent".into(),
        ));
    }
    Ok(())
}

fn validate_translates(dim: usize, translates: &[(Vec<f64>, f64)], extent: f64) -> Result<()> {
    if translates.is_empty() {
        return Err(Error::Validation("translate set must be nonempty".into()));
    }
    for (e, f) in translates {
        if e.len() != dim {
            return Err(Error::Validation("translate of wrong dimension".into()));
        }
        if !(*f > 0.0) {
            return Err(Error::Validation("translate density must be positive".into()));
        }
    }
    // Bounding box of E, the "declared extent" of the translate structure.
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (e, _) in translates {
        for j in 0..dim {
            lo[j] = lo[j].min(e[j]);
            hi[j] = hi[j].max(e[j]);
        }
    }
    let tol = 1e-9 * extent.max(1.0);
    // x, y ∈ E ⇒ 2y − x ∈ E (same density) whenever the reflection stays in
    // the bounding box of E.
    for (x, fx) in translates {
        for (y, _) in translates {
            let refl: Vec<f64> = (0..dim).map(|j| 2.0 * y[j] - x[j]).collect();
            let inside = (0..dim).all(|j| refl[j] >= lo[j] - tol && refl[j] <= hi[j] + tol);
            if !inside {
                continue;
            }
            let hit = translates.iter().find(|(e, _)| {
                (0..dim).all(|j| (e[j] - refl[j]).abs() <= tol)
            });
            match hit {
                Some((_, fr)) if (fr - fx).abs() <= 1e-12 * fx.abs().max(1.0) => {}
                Some(_) => {
                    return Err(Error::Validation(
                        "translate densities are not symmetric under point reflection".into(),
                    ))
                }
                None => {
                    return Err(Error::Validation(
                        "translate set is not symmetric: missing reflection 2y - x".into(),
                    ))
                }
            }
        }
    }
    Ok(())
}

/// Corner Cantor construction: 2^dim similarity maps x ↦ ρx + c(1−ρ) for
/// c ∈ {0,1}^dim, iterated `generation` times from the origin.
fn cantor(dim: usize, ratio: f64, generation: u32) -> Result<DiscreteMeasure> {
    if dim < 2 {
        return Err(Error::Validation("cantor family needs dim >= 2".into()));
    }
    let children = 1usize << dim;
    let count = children.pow(generation);
    if count > 1 << 22 {
        return Err(Error::Validation("cantor generation too large".into()));
    }
    let s = dim as f64 * std::f64::consts::LN_2 / (1.0 / ratio).ln();
    let mut pts: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for level in 0..generation {
        let scale = ratio.powi(level as i32) * (1.0 - ratio);
        let mut next = Vec::with_capacity(pts.len() * children);
        for p in &pts {
            for c in 0..children {
                let mut q = p.clone();
                for j in 0..dim {
                    if c >> j & 1 == 1 {
                        q[j] += scale;
                    }
                }
                next.push(q);
            }
        }
        pts = next;
    }
    // (2^dim)^{-generation} is an exact dyadic rational: the total mass is 1
    // exactly under compensated summation.
    let w = (children as f64).powi(-(generation as i32));
    let mut coords = Vec::with_capacity(pts.len() * dim);
    for p in &pts {
        coords.extend_from_slice(p);
    }
    DiscreteMeasure::new(dim, s, coords, vec![w; pts.len()])
}

/// A 1-Lipschitz height function: normalized sum of sinusoids with bounded
/// total gradient.
struct LipschitzHeight {
    // (amplitude, wave vector, phase); Σ |amplitude|·|wave| ≤ 1.
    waves: Vec<(f64, Vec<f64>, f64)>,
}

impl LipschitzHeight {
    fn random(n: usize, extent: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c69_7073_6368_6974);
        let count = 4;
        let mut raw = Vec::with_capacity(count);
        let mut total = 0.0;
        for _ in 0..count {
            let a: f64 = rng.gen_range(0.2..1.0);
            let freq = rng.gen_range(1.0..3.0) * std::f64::consts::TAU / extent;
            let mut k: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            for v in &mut k {
                *v *= freq / norm;
            }
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            total += a * freq;
            raw.push((a, k, phase));
        }
        // Normalize so the gradient bound Σ a_i |k_i| equals 1 exactly.
        for (a, _, _) in &mut raw {
            *a /= total;
        }
        LipschitzHeight { waves: raw }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.waves
            .iter()
            .map(|(a, k, p)| {
                let dot: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
                a * (dot + p).sin()
            })
            .sum()
    }
}

/// Displaces every point by an independent uniform vector of norm ≤ magnitude.
/// Weights are unchanged; caches are recomputed.
pub fn perturb(mu: &DiscreteMeasure, magnitude: f64, seed: u64) -> Result<DiscreteMeasure> {
    if magnitude < 0.0 {
        return Err(Error::Domain("perturbation magnitude must be >= 0".into()));
    }
    if magnitude == 0.0 {
        return Ok(mu.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = mu.dim();
    let mut coords = mu.coords().to_vec();
    for i in 0..mu.len() {
        // Uniform in the ball: gaussian direction, radius u^{1/d}.
        let dir: Vec<f64> = (0..d)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (-2.0 * u1.ln()).sqrt() * u2.cos()
            })
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let radius = magnitude * rng.gen_range(0.0f64..1.0).powf(1.0 / d as f64);
        for j in 0..d {
            coords[i * d + j] += radius * dir[j] / norm;
        }
    }
    mu.with_coords(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::dist;

    #[test]
    fn plane_patch_counts_and_mass() {
        let spec = GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 1.0,
            grid_step: 0.01,
        };
        let mu = generate(&spec, 0).unwrap();
        assert_eq!(mu.len(), 101);
        assert!((mu.total_mass() - 1.01).abs() < 1e-12);
        // Collinear: second coordinate identically zero.
        for i in 0..mu.len() {
            assert_eq!(mu.point(i)[1], 0.0);
        }
    }

    #[test]
    fn four_corner_cantor_mass_exact() {
        let mu = generate(&GeneratorSpec::CantorFourCorner { generation: 2 }, 0).unwrap();
        assert_eq!(mu.len(), 16);
        assert_eq!(mu.weight(0), 1.0 / 16.0);
        assert_eq!(mu.total_mass(), 1.0);
        assert_eq!(mu.s(), 1.0);
    }

    #[test]
    fn self_similar_cantor_dimension() {
        let mu = generate(
            &GeneratorSpec::CantorSelfSimilar {
                dim: 2,
                contraction_ratio: 0.3,
                generation: 3,
            },
            0,
        )
        .unwrap();
        assert_eq!(mu.len(), 64);
        assert_eq!(mu.total_mass(), 1.0);
        let s = 2.0 * std::f64::consts::LN_2 / (1.0f64 / 0.3).ln();
        assert!((mu.s() - s).abs() < 1e-15);
        assert!(mu.s() > 1.0 && mu.s() < 2.0);
    }

    #[test]
    fn zero_slope_graph_is_flat() {
        let spec = GeneratorSpec::LipschitzGraph {
            dim: 3,
            n: 2,
            lip_const: 0.0,
            extent: 1.0,
            grid_step: 0.25,
        };
        let mu = generate(&spec, 7).unwrap();
        for i in 0..mu.len() {
            assert_eq!(mu.point(i)[2], 0.0);
        }
    }

    #[test]
    fn graph_respects_lipschitz_bound() {
        let spec = GeneratorSpec::LipschitzGraph {
            dim: 2,
            n: 1,
            lip_const: 0.3,
            extent: 1.0,
            grid_step: 0.02,
        };
        let mu = generate(&spec, 42).unwrap();
        for i in 0..mu.len() {
            for j in (i + 1)..mu.len() {
                let dx = (mu.point(i)[0] - mu.point(j)[0]).abs();
                let dh = (mu.point(i)[1] - mu.point(j)[1]).abs();
                assert!(dh <= 0.3 * dx + 1e-12, "graph violates Lipschitz bound");
            }
        }
    }

    #[test]
    fn generators_deterministic() {
        let spec = GeneratorSpec::LipschitzGraph {
            dim: 2,
            n: 1,
            lip_const: 0.5,
            extent: 2.0,
            grid_step: 0.1,
        };
        let a = generate(&spec, 3).unwrap();
        let b = generate(&spec, 3).unwrap();
        assert_eq!(a.coords(), b.coords());
        let c = generate(&spec, 4).unwrap();
        assert_ne!(a.coords(), c.coords());
    }

    #[test]
    fn phi_symmetric_validation() {
        // Two parallel planes: reflections leave the bounding box, valid.
        let ok = GeneratorSpec::PhiSymmetricExample {
            dim: 3,
            k: 1,
            translates: vec![(vec![0.0, 0.0, 0.0], 1.0), (vec![0.0, 0.0, 1.0], 1.0)],
            extent: 1.0,
            grid_step: 0.25,
        };
        assert!(generate(&ok, 0).is_ok());
        // Three translates with the middle reflection missing: invalid.
        let bad = GeneratorSpec::PhiSymmetricExample {
            dim: 3,
            k: 1,
            translates: vec![
                (vec![0.0, 0.0, 0.0], 1.0),
                (vec![0.0, 0.0, 1.0], 1.0),
                (vec![0.0, 0.0, 3.0], 1.0),
            ],
            extent: 1.0,
            grid_step: 0.25,
        };
        assert!(generate(&bad, 0).is_err());
        // Symmetric set, asymmetric densities: invalid.
        let bad_density = GeneratorSpec::PhiSymmetricExample {
            dim: 3,
            k: 1,
            translates: vec![
                (vec![0.0, 0.0, 0.0], 1.0),
                (vec![0.0, 0.0, 1.0], 2.0),
                (vec![0.0, 0.0, 2.0], 3.0),
            ],
            extent: 1.0,
            grid_step: 0.25,
        };
        assert!(generate(&bad_density, 0).is_err());
    }

    #[test]
    fn perturb_contract() {
        let spec = GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 1.0,
            grid_step: 0.1,
        };
        let mu = generate(&spec, 0).unwrap();
        let same = perturb(&mu, 0.0, 5).unwrap();
        assert_eq!(same.coords(), mu.coords());
        let moved = perturb(&mu, 0.01, 5).unwrap();
        let again = perturb(&mu, 0.01, 5).unwrap();
        assert_eq!(moved.coords(), again.coords());
        for i in 0..mu.len() {
            assert!(dist(mu.point(i), moved.point(i)) <= 0.01 + 1e-15);
        }
        assert_eq!(moved.weights(), mu.weights());
    }
}
