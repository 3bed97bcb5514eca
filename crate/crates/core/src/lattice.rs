//! Dyadic lattices and cubes with their associated balls and smooth weights.
//!
//! Convention: cubes at level k have side 2^k and are half-open,
//! [2^k m, 2^k (m+1)) + origin, so every point lies in exactly one cube per
//! level. The base cube at level 0 with index (−1,…,−1)+… matches
//! Q_0 = origin + (−1/2, 1/2)^d only up to the half-open shift; geometric
//! quantities (centre, ball, weight) never depend on the open/half-open
//! choice.
//!
//! Each cube carries the ball B_Q = B(x_Q, 4√d·ℓ(Q)) and the weight
//! φ_Q(x) = φ(|x − x_Q|/(2√d·ℓ(Q))), giving the chain
//! 3Q ⊂ B(x_Q, 2√d ℓ) ⊂ {φ_Q = 1} ⊂ supp(φ_Q) ⊂ B_Q.

use crate::bump::bump;
use crate::error::{Error, Result};
use crate::measure::{dist2, DiscreteMeasure};
use crate::sum::CompensatedSum;
use std::collections::BTreeMap;

/// A dyadic lattice: the standard grid shifted by `origin`.
#[derive(Debug, Clone)]
pub struct DyadicLattice {
    origin: Vec<f64>,
}

impl DyadicLattice {
    pub fn new(origin: Vec<f64>) -> Self {
        DyadicLattice { origin }
    }

    pub fn standard(dim: usize) -> Self {
        DyadicLattice {
            origin: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// The unique cube at `level` containing `x` (half-open convention).
    pub fn containing_cube(&self, x: &[f64], level: i32) -> DyadicCube {
        let side = exp2i(level);
        let index = (0..self.dim())
            .map(|j| ((x[j] - self.origin[j]) / side).floor() as i64)
            .collect();
        DyadicCube { level, index }
    }

    pub fn center(&self, q: &DyadicCube) -> Vec<f64> {
        let side = exp2i(q.level);
        (0..self.dim())
            .map(|j| self.origin[j] + side * (q.index[j] as f64 + 0.5))
            .collect()
    }

    /// Half-open membership test.
    pub fn cube_contains(&self, q: &DyadicCube, x: &[f64]) -> bool {
        let side = exp2i(q.level);
        (0..self.dim()).all(|j| {
            let lo = self.origin[j] + side * q.index[j] as f64;
            x[j] >= lo && x[j] < lo + side
        })
    }

    /// φ_Q scaled to the dilated cube `factor`·Q (factor 1 gives φ_Q itself;
    /// factor 3 gives φ_{3Q}, supported in 3B_Q).
    pub fn phi_dilated(&self, q: &DyadicCube, x: &[f64], factor: f64) -> f64 {
        let c = self.center(q);
        let d = self.dim() as f64;
        let scale = 2.0 * d.sqrt() * factor * exp2i(q.level);
        bump(dist2(&c, x).sqrt() / scale)
    }

    /// φ_Q(x) = φ(|x − x_Q| / (2√d ℓ(Q))).
    pub fn phi(&self, q: &DyadicCube, x: &[f64]) -> f64 {
        self.phi_dilated(q, x, 1.0)
    }

    /// True when some coordinate of `x` lies within 1e−12·ℓ(Q) of a face of
    /// the containing cube: the half-open tie-break is numerically fragile
    /// there and reports should flag it.
    pub fn near_face(&self, q: &DyadicCube, x: &[f64]) -> bool {
        let side = exp2i(q.level);
        (0..self.dim()).any(|j| {
            let t = (x[j] - self.origin[j]) / side - q.index[j] as f64;
            t < 1e-12 || t > 1.0 - 1e-12
        })
    }
}

/// A dyadic cube: level k (side 2^k) and integer index vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        exp2i(self.level)
    }

    /// Radius of B_Q = B(x_Q, 4√d ℓ(Q)).
    pub fn ball_radius(&self, dim: usize) -> f64 {
        4.0 * (dim as f64).sqrt() * self.side()
    }
}

#[inline]
pub fn exp2i(level: i32) -> f64 {
    (level as f64).exp2()
}

/// [q1 : q2] = |log2(ℓ(q1)/ℓ(q2))|.
pub fn cube_ratio(q1: &DyadicCube, q2: &DyadicCube) -> f64 {
    (q1.level - q2.level).abs() as f64
}

/// I_μ(Q) = Σ_i w_i φ_Q(x_i), compensated in point index order.
pub fn smoothed_cube_mass(mu: &DiscreteMeasure, lat: &DyadicLattice, q: &DyadicCube) -> f64 {
    let c = lat.center(q);
    let d = mu.dim() as f64;
    let scale = 2.0 * d.sqrt() * q.side();
    let mut s = CompensatedSum::new();
    for i in 0..mu.len() {
        s.add(mu.weight(i) * bump(dist2(&c, mu.point(i)).sqrt() / scale));
    }
    s.total()
}

/// μ(Q): plain mass of the half-open cube.
pub fn cube_mass(mu: &DiscreteMeasure, lat: &DyadicLattice, q: &DyadicCube) -> f64 {
    let mut s = CompensatedSum::new();
    for i in 0..mu.len() {
        if lat.cube_contains(q, mu.point(i)) {
            s.add(mu.weight(i));
        }
    }
    s.total()
}

/// D_{μ,n}(Q) = I_μ(Q) / ℓ(Q)^n.
pub fn density(mu: &DiscreteMeasure, lat: &DyadicLattice, q: &DyadicCube, n: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("density exponent must be > 0, got {n}")));
    }
    Ok(smoothed_cube_mass(mu, lat, q) / q.side().powf(n))
}

/// The default level range for a measure: ⌈log2 min_sep⌉ .. ⌈log2 diam⌉ + 1,
/// the only scales where a discrete measure carries information.
pub fn default_levels(mu: &DiscreteMeasure) -> Result<(i32, i32)> {
    if !mu.diam().is_finite() || mu.diam() <= 0.0 || !mu.min_sep().is_finite() {
        return Err(Error::Degenerate(
            "default level range needs at least two distinct points".into(),
        ));
    }
    let lo = mu.min_sep().log2().ceil() as i32;
    let hi = mu.diam().log2().ceil() as i32 + 1;
    Ok((lo, hi))
}

/// All cubes in the level range with I_μ(Q) > 0, in canonical
/// (level, index) order.
///
/// A cube is charged iff some atom lies strictly inside B_Q (φ_Q > 0 needs
/// |x − x_Q| < 4√d ℓ). For each point the index window of such cubes is
/// enumerated with per-coordinate and partial-distance pruning; contributions
/// accumulate per cube in point index order, so the per-cube mass is
/// bitwise equal to `smoothed_cube_mass`.
pub fn charged_cubes(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    level_min: i32,
    level_max: i32,
) -> Result<Vec<(DyadicCube, f64)>> {
    if level_min > level_max {
        return Err(Error::Domain(format!(
            "empty level range {level_min}..{level_max}"
        )));
    }
    let d = mu.dim();
    let sqrt_d = (d as f64).sqrt();
    let mut out = Vec::new();
    for level in level_min..=level_max {
        let side = exp2i(level);
        let radius = 4.0 * sqrt_d * side;
        let mut acc: BTreeMap<Vec<i64>, CompensatedSum> = BTreeMap::new();
        for i in 0..mu.len() {
            let p = mu.point(i);
            let w = mu.weight(i);
            // Recursive window walk over candidate indices with pruning on
            // the partial squared centre distance.
            let mut idx = vec![0i64; d];
            walk_window(lat, p, level, radius, 0, 0.0, &mut idx, &mut |index, dist2c| {
                let phi = bump(dist2c.sqrt() / (2.0 * sqrt_d * side));
                if phi > 0.0 {
                    acc.entry(index.to_vec())
                        .or_insert_with(CompensatedSum::new)
                        .add(w * phi);
                }
            });
        }
        for (index, s) in acc {
            let mass = s.total();
            if mass > 0.0 {
                out.push((DyadicCube { level, index }, mass));
            }
        }
    }
    Ok(out)
}

/// Enumerates cube indices at `level` whose centre lies within `radius` of
/// `p`, calling `f(index, squared distance)` for each.
pub(crate) fn walk_window(
    lat: &DyadicLattice,
    p: &[f64],
    level: i32,
    radius: f64,
    coord: usize,
    partial: f64,
    idx: &mut Vec<i64>,
    f: &mut dyn FnMut(&[i64], f64),
) {
    let d = lat.dim();
    if coord == d {
        f(idx, partial);
        return;
    }
    let side = exp2i(level);
    let rel = (p[coord] - lat.origin()[coord]) / side - 0.5;
    let lo = (rel - radius / side).ceil() as i64 - 1;
    let hi = (rel + radius / side).floor() as i64 + 1;
    for m in lo..=hi {
        // Same float expression as the direct centre-distance computation,
        // so accumulated masses are bitwise identical to a direct sum.
        let off = p[coord] - (lat.origin()[coord] + side * (m as f64 + 0.5));
        let next = partial + off * off;
        // Slightly widened prune margin: the φ > 0 test downstream decides,
        // so the window only needs to be a superset.
        if next < radius * radius * 1.000001 {
            idx[coord] = m;
            walk_window(lat, p, level, radius, coord + 1, next, idx, f);
        }
    }
}

/// Containment mode for `ball_containments`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainmentMode {
    /// B_{Q′} ⊃ B_Q: |x_{Q′} − x_Q| + 4√d ℓ(Q) ≤ 4√d ℓ(Q′).
    Contains,
    /// ½B_{Q′} ⊃ B_Q: |x_{Q′} − x_Q| + 4√d ℓ(Q) ≤ 2√d ℓ(Q′).
    HalfContains,
    /// 3B_big ⊃ 3B_small: |x_b − x_s| + 12√d ℓ(Q_s) ≤ 12√d ℓ(Q_b).
    TripleInTriple,
}

/// Exact containment test between cube balls of the same lattice.
///
/// The centre difference is a dyadic rational (the origin cancels), so the
/// comparison |Δ| ≤ √d·(integer) reduces to an exact integer comparison
/// Σ u² ≤ d·(integer)² after scaling by 2^{min level − 1}.
pub fn ball_containments(q_small: &DyadicCube, q_big: &DyadicCube, mode: ContainmentMode) -> bool {
    let d = q_small.index.len();
    assert_eq!(d, q_big.index.len());
    let kmin = q_small.level.min(q_big.level);
    let a = (q_big.level - kmin) as u32;
    let b = (q_small.level - kmin) as u32;
    assert!(a <= 60 && b <= 60, "level span too large for exact arithmetic");
    // u_j = Δ_j / 2^{kmin−1}; L, L' are the sides in the same unit.
    let mut sum_u2: i128 = 0;
    for j in 0..d {
        let u = (1i128 << a) * (2 * q_big.index[j] as i128 + 1)
            - (1i128 << b) * (2 * q_small.index[j] as i128 + 1);
        sum_u2 += u * u;
    }
    let l_small = 1i128 << (b + 1);
    let l_big = 1i128 << (a + 1);
    let slack = match mode {
        // 4√d(L' − L) ≥ |Δ|/unit
        ContainmentMode::Contains => 4 * (l_big - l_small),
        // √d(2L' − 4L) ≥ |Δ|/unit
        ContainmentMode::HalfContains => 2 * l_big - 4 * l_small,
        // 12√d(L' − L) ≥ |Δ|/unit
        ContainmentMode::TripleInTriple => 12 * (l_big - l_small),
    };
    if slack < 0 {
        return false;
    }
    sum_u2 <= d as i128 * slack * slack
}

/// Exact test that 3B_{Q1} and 3B_{Q2} are disjoint:
/// |x_{Q1} − x_{Q2}| ≥ 12√d (ℓ(Q1) + ℓ(Q2)), by the same integer reduction
/// as `ball_containments`.
pub fn triple_balls_disjoint(q1: &DyadicCube, q2: &DyadicCube) -> bool {
    let d = q1.index.len();
    assert_eq!(d, q2.index.len());
    let kmin = q1.level.min(q2.level);
    let a = (q1.level - kmin) as u32;
    let b = (q2.level - kmin) as u32;
    assert!(a <= 60 && b <= 60, "level span too large for exact arithmetic");
    let mut sum_u2: i128 = 0;
    for j in 0..d {
        let u = (1i128 << a) * (2 * q1.index[j] as i128 + 1)
            - (1i128 << b) * (2 * q2.index[j] as i128 + 1);
        sum_u2 += u * u;
    }
    let need = 12 * ((1i128 << (a + 1)) + (1i128 << (b + 1)));
    sum_u2 >= d as i128 * need * need
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_measure(seed: u64, n: usize, dim: usize) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        DiscreteMeasure::new(dim, 0.7 * dim as f64, coords, weights).unwrap()
    }

    #[test]
    fn cube_ratio_examples() {
        let q5 = DyadicCube { level: 5, index: vec![0, 0] };
        let q2 = DyadicCube { level: 2, index: vec![0, 0] };
        assert_eq!(cube_ratio(&q5, &q5), 0.0);
        assert_eq!(cube_ratio(&q5, &q2), 3.0);
        assert_eq!(cube_ratio(&q2, &q5), 3.0);
    }

    #[test]
    fn containing_cube_is_half_open() {
        let lat = DyadicLattice::standard(2);
        let q = lat.containing_cube(&[0.0, 0.0], 0);
        assert_eq!(q.index, vec![0, 0]);
        let q = lat.containing_cube(&[-1e-9, 0.5], 0);
        assert_eq!(q.index, vec![-1, 0]);
        assert!(lat.cube_contains(&lat.containing_cube(&[0.3, 0.7], -2), &[0.3, 0.7]));
    }

    #[test]
    fn chain_of_inclusions_sampled() {
        // φ_Q = 1 inside B(x_Q, 2√d ℓ), φ_Q = 0 outside B_Q: exact.
        let lat = DyadicLattice::new(vec![0.125, -0.5]);
        let q = DyadicCube { level: -1, index: vec![3, -2] };
        let c = lat.center(&q);
        let sd = 2.0f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let x = [
                c[0] + rng.gen_range(-8.0..8.0) * q.side(),
                c[1] + rng.gen_range(-8.0..8.0) * q.side(),
            ];
            let r = dist2(&c, &x).sqrt();
            let phi = lat.phi(&q, &x);
            if r <= 2.0 * sd * q.side() {
                assert_eq!(phi, 1.0);
            }
            if r >= 4.0 * sd * q.side() {
                assert_eq!(phi, 0.0);
            }
            assert!((0.0..=1.0).contains(&phi));
        }
        // 3Q ⊂ B(x_Q, 2√d ℓ): cube corner distance (3ℓ/2)√d ≤ 2√d ℓ.
        let corner = [c[0] + 1.5 * q.side(), c[1] + 1.5 * q.side()];
        assert!(dist2(&c, &corner).sqrt() <= 2.0 * sd * q.side());
    }

    #[test]
    fn smoothed_mass_examples() {
        let lat = DyadicLattice::standard(2);
        let q = DyadicCube { level: 0, index: vec![0, 0] };
        let c = lat.center(&q);
        let at_center =
            DiscreteMeasure::new(2, 1.0, vec![c[0], c[1]], vec![1.0]).unwrap();
        assert_eq!(smoothed_cube_mass(&at_center, &lat, &q), 1.0);
        // Atom outside B_Q contributes 0.
        let far = DiscreteMeasure::new(
            2,
            1.0,
            vec![c[0] + 20.0, c[1]],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(smoothed_cube_mass(&far, &lat, &q), 0.0);
    }

    #[test]
    fn density_examples() {
        let lat = DyadicLattice::standard(2);
        let q0 = DyadicCube { level: 0, index: vec![0, 0] };
        let c = lat.center(&q0);
        let mu = DiscreteMeasure::new(2, 1.0, vec![c[0], c[1]], vec![1.0]).unwrap();
        assert_eq!(density(&mu, &lat, &q0, 1.0).unwrap(), 1.0);
        let q1 = lat.containing_cube(&c, 1);
        assert_eq!(density(&mu, &lat, &q1, 1.0).unwrap(), 0.5);
        assert!(density(&mu, &lat, &q0, 0.0).is_err());
    }

    #[test]
    fn density_sandwich_on_random_clouds() {
        // μ(Q)/ℓ^s ≤ D ≤ μ(B_Q)/ℓ^s.
        let lat = DyadicLattice::standard(2);
        for seed in 0..5 {
            let mu = random_measure(seed, 60, 2);
            for (q, mass) in charged_cubes(&mu, &lat, -2, 1).unwrap() {
                let s = mu.s();
                let d_val = mass / q.side().powf(s);
                let lo = cube_mass(&mu, &lat, &q) / q.side().powf(s);
                let c = lat.center(&q);
                let hi = mu.ball_mass(&c, q.ball_radius(2) + 1e-12).unwrap()
                    / q.side().powf(s);
                assert!(lo <= d_val + 1e-12 && d_val <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn charged_cubes_match_brute_force() {
        let lat = DyadicLattice::new(vec![0.3, -0.1]);
        for seed in [0, 1] {
            let mu = random_measure(seed, 40, 2);
            let got = charged_cubes(&mu, &lat, -1, 2).unwrap();
            // Brute force over a bounding index window.
            let mut expected = Vec::new();
            for level in -1..=2 {
                let side = exp2i(level);
                let r = 4.0 * 2.0f64.sqrt() * side;
                let window = (r / side).ceil() as i64 + 2;
                let mut bounds = vec![(i64::MAX, i64::MIN); 2];
                for i in 0..mu.len() {
                    for j in 0..2 {
                        let m = ((mu.point(i)[j] - lat.origin()[j]) / side).floor() as i64;
                        bounds[j].0 = bounds[j].0.min(m - window);
                        bounds[j].1 = bounds[j].1.max(m + window);
                    }
                }
                for mx in bounds[0].0..=bounds[0].1 {
                    for my in bounds[1].0..=bounds[1].1 {
                        let q = DyadicCube { level, index: vec![mx, my] };
                        let mass = smoothed_cube_mass(&mu, &lat, &q);
                        if mass > 0.0 {
                            expected.push((q, mass));
                        }
                    }
                }
            }
            assert_eq!(got.len(), expected.len());
            for ((qa, ma), (qb, mb)) in got.iter().zip(&expected) {
                assert_eq!(qa, qb);
                assert_eq!(ma, mb, "charged-cube mass must equal direct sum bitwise");
            }
        }
    }

    #[test]
    fn charged_cubes_single_atom_count() {
        let lat = DyadicLattice::standard(2);
        let mu = DiscreteMeasure::new(2, 1.0, vec![0.2, 0.2], vec![1.0]).unwrap();
        let cubes = charged_cubes(&mu, &lat, 0, 0).unwrap();
        assert!(!cubes.is_empty());
        let bound = (8.0 * 2.0f64.sqrt() + 2.0).powi(2);
        assert!((cubes.len() as f64) <= bound);
        assert!(charged_cubes(&mu, &lat, 1, 0).is_err());
    }

    #[test]
    fn containment_examples() {
        let q = DyadicCube { level: 0, index: vec![0, 0] };
        assert!(!ball_containments(&q, &q, ContainmentMode::HalfContains));
        assert!(ball_containments(&q, &q, ContainmentMode::TripleInTriple));
        // Concentric-ish ancestor 8 levels up: radii 2√d·256 vs required
        // |Δ| + 4√d; holds comfortably.
        let anc = DyadicCube { level: 8, index: vec![0, 0] };
        assert!(ball_containments(&q, &anc, ContainmentMode::HalfContains));
        assert!(ball_containments(&q, &anc, ContainmentMode::TripleInTriple));
        // Far-away big cube: fails.
        let far = DyadicCube { level: 3, index: vec![100, 0] };
        assert!(!ball_containments(&q, &far, ContainmentMode::HalfContains));
    }

    #[test]
    fn containment_matches_float_check_off_boundary() {
        let lat = DyadicLattice::standard(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let qs = DyadicCube {
                level: rng.gen_range(-3..3),
                index: (0..3).map(|_| rng.gen_range(-6..6)).collect(),
            };
            let qb = DyadicCube {
                level: rng.gen_range(-3..6),
                index: (0..3).map(|_| rng.gen_range(-6..6)).collect(),
            };
            let cs = lat.center(&qs);
            let cb = lat.center(&qb);
            let dd = dist2(&cs, &cb).sqrt();
            let sd = 3.0f64.sqrt();
            for (mode, lhs, rhs) in [
                (
                    ContainmentMode::HalfContains,
                    dd + 4.0 * sd * qs.side(),
                    2.0 * sd * qb.side(),
                ),
                (
                    ContainmentMode::TripleInTriple,
                    dd + 12.0 * sd * qs.side(),
                    12.0 * sd * qb.side(),
                ),
            ] {
                // Skip near-ties where float evaluation is ambiguous.
                if (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0) {
                    continue;
                }
                assert_eq!(ball_containments(&qs, &qb, mode), lhs <= rhs);
            }
        }
    }

    #[test]
    fn default_levels_span_support() {
        let mu = generate(&GeneratorSpec::CantorFourCorner { generation: 3 }, 0).unwrap();
        let (lo, hi) = default_levels(&mu).unwrap();
        assert!(lo < hi);
        assert!(exp2i(lo) >= mu.min_sep() / 2.0);
        assert!(exp2i(hi) >= mu.diam());
        let single = DiscreteMeasure::new(2, 1.0, vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(default_levels(&single).is_err());
    }

    #[test]
    fn near_face_flag() {
        let lat = DyadicLattice::standard(2);
        let q = lat.containing_cube(&[1e-15, 0.5], 0);
        assert!(lat.near_face(&q, &[1e-15, 0.5]));
        assert!(!lat.near_face(&q, &[0.5, 0.5]));
    }
}
