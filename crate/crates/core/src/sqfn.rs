//! The vector-field kernel and square-function machinery.
//!
//! The field at (x, t) is Σ_i w_i f_i (x − x_i)/t^{s+1} φ(|x − x_i|/t);
//! the profile vanishes at argument 2, so only atoms within distance 2t
//! contribute. Scale integrals use midpoint quadrature on a log-uniform
//! t grid; the integrand is smooth in log t for the fixed profile.

use crate::bump::bump;
use crate::error::{Error, Result};
use crate::lattice::{charged_cubes, DyadicCube, DyadicLattice};
use crate::measure::{dist, DiscreteMeasure};
use crate::sum::CompensatedSum;
use std::collections::HashMap;

/// Adds atom i's field contribution at (x, t) to the per-coordinate sums.
/// Both the direct and the hashed evaluation call this exact expression in
/// atom index order, so they agree bitwise (a zero contribution is an exact
/// additive identity for the compensated sums).
#[inline]
fn add_contribution(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    i: usize,
    x: &[f64],
    t: f64,
    inv_t_pow: f64,
    acc: &mut [CompensatedSum],
) {
    let y = mu.point(i);
    let r = dist(x, y);
    let phi = bump(r / t);
    let factor = mu.weight(i) * f.map_or(1.0, |v| v[i]) * phi * inv_t_pow;
    for k in 0..x.len() {
        acc[k].add(factor * (x[k] - y[k]));
    }
}

/// Direct O(N) field evaluation with optional per-atom density values.
pub fn field_with(mu: &DiscreteMeasure, f: Option<&[f64]>, x: &[f64], t: f64) -> Vec<f64> {
    assert!(t > 0.0, "field needs t > 0");
    let inv_t_pow = t.powf(-(mu.s() + 1.0));
    let mut acc: Vec<CompensatedSum> = (0..mu.dim()).map(|_| CompensatedSum::new()).collect();
    for i in 0..mu.len() {
        add_contribution(mu, f, i, x, t, inv_t_pow, &mut acc);
    }
    acc.into_iter().map(|s| s.total()).collect()
}

/// Field with density ≡ 1.
pub fn field(mu: &DiscreteMeasure, x: &[f64], t: f64) -> Vec<f64> {
    field_with(mu, None, x, t)
}

/// Spatial hash over cells of side 2t. A query visits the 3^d neighboring
/// cells; any atom within the support radius 2t lies in one of them, and the
/// remaining visited atoms contribute exact zeros, so the hashed sum equals
/// the direct sum bit for bit.
pub struct FieldCache<'a> {
    mu: &'a DiscreteMeasure,
    t: f64,
    inv_t_pow: f64,
    cell: f64,
    grid: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> FieldCache<'a> {
    pub fn new(mu: &'a DiscreteMeasure, t: f64) -> Self {
        assert!(t > 0.0, "field cache needs t > 0");
        let cell = 2.0 * t;
        let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..mu.len() {
            let key: Vec<i64> = mu.point(i).iter().map(|&c| (c / cell).floor() as i64).collect();
            grid.entry(key).or_default().push(i);
        }
        FieldCache {
            mu,
            t,
            inv_t_pow: t.powf(-(mu.s() + 1.0)),
            cell,
            grid,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn field_with(&self, f: Option<&[f64]>, x: &[f64]) -> Vec<f64> {
        let d = self.mu.dim();
        let base: Vec<i64> = x.iter().map(|&c| (c / self.cell).floor() as i64).collect();
        let mut idxs: Vec<usize> = Vec::new();
        let mut key = vec![0i64; d];
        let mut offsets = vec![-1i64; d];
        loop {
            for k in 0..d {
                key[k] = base[k] + offsets[k];
            }
            if let Some(cell) = self.grid.get(&key) {
                idxs.extend_from_slice(cell);
            }
            // Odometer over the 3^d neighbor offsets.
            let mut carry = 0;
            while carry < d {
                offsets[carry] += 1;
                if offsets[carry] <= 1 {
                    break;
                }
                offsets[carry] = -1;
                carry += 1;
            }
            if carry == d {
                break;
            }
        }
        idxs.sort_unstable();
        let mut acc: Vec<CompensatedSum> = (0..d).map(|_| CompensatedSum::new()).collect();
        for &i in &idxs {
            add_contribution(self.mu, f, i, x, self.t, self.inv_t_pow, &mut acc);
        }
        acc.into_iter().map(|s| s.total()).collect()
    }

    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        self.field_with(None, x)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&c| c * c).sum()
}

/// Midpoint nodes of a log-uniform grid over [t_min, t_max]; each node
/// carries weight ln(t_max/t_min)/count.
pub(crate) fn log_nodes(t_min: f64, t_max: f64, nodes_per_octave: usize) -> (Vec<f64>, f64) {
    let octaves = (t_max / t_min).log2();
    let count = ((octaves * nodes_per_octave as f64).ceil() as usize).max(1);
    let dl = (t_max / t_min).ln() / count as f64;
    let nodes = (0..count)
        .map(|j| t_min * ((j as f64 + 0.5) * dl).exp())
        .collect();
    (nodes, dl)
}

/// Pointwise square-function value (∫ |field|² dt/t)^{1/2} at x over the
/// truncated scale range, by midpoint log-t quadrature. The flag trips when
/// doubling the node density moves the value by more than 1e−3 relative.
pub fn sqfn_apply(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    x: &[f64],
    t_min: f64,
    t_max: f64,
    nodes_per_octave: usize,
) -> Result<(f64, bool)> {
    if !(t_min > 0.0 && t_min < t_max) {
        return Err(Error::Domain("scale range requires 0 < t_min < t_max".into()));
    }
    if nodes_per_octave < 4 {
        return Err(Error::Domain("need at least 4 quadrature nodes per octave".into()));
    }
    let eval = |npo: usize| -> f64 {
        let (nodes, dl) = log_nodes(t_min, t_max, npo);
        let mut acc = CompensatedSum::new();
        for &t in &nodes {
            acc.add(norm2(&field_with(mu, f, x, t)) * dl);
        }
        acc.total().max(0.0).sqrt()
    };
    let coarse = eval(nodes_per_octave);
    let fine = eval(2 * nodes_per_octave);
    let flag = (coarse - fine).abs() > 1e-3 * fine.max(f64::MIN_POSITIVE);
    Ok((coarse, flag))
}

/// One cube's squared scale-integral record.
#[derive(Debug, Clone)]
pub struct ConstituentRecord {
    pub cube: DyadicCube,
    pub a_param: f64,
    /// Σ over atoms of the open ball A·B_Q of w·∫_{ℓ/A}^{Aℓ} |field|² dt/t.
    pub value: f64,
    pub t_nodes: usize,
    pub quad_flag: bool,
}

/// Quadrature nodes anchored at ℓ: t = ℓ·2^{(j+0.5)/npo} for integer j with
/// t inside [ℓ/A, Aℓ]. Anchoring makes the node set nested as A grows, so
/// the value is nondecreasing in A at fixed node density.
fn anchored_nodes(ell: f64, a: f64, npo: usize) -> (Vec<f64>, f64) {
    let span = a.log2() * npo as f64;
    let j_min = (-span - 0.5).ceil() as i64;
    let j_max = (span - 0.5).floor() as i64;
    let dl = std::f64::consts::LN_2 / npo as f64;
    let nodes = (j_min..=j_max)
        .map(|j| ell * 2f64.powf((j as f64 + 0.5) / npo as f64))
        .collect();
    (nodes, dl)
}

/// S^A(Q) with density f ≡ 1: outer sum over atoms in the open ball A·B_Q,
/// inner log-t quadrature of |field|² over [ℓ/A, Aℓ].
pub fn constituent(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    a: f64,
    nodes_per_octave: usize,
) -> Result<ConstituentRecord> {
    if !(a > 1.0) {
        return Err(Error::Domain("constituent needs A > 1".into()));
    }
    if nodes_per_octave < 4 {
        return Err(Error::Domain("need at least 4 quadrature nodes per octave".into()));
    }
    let center = lat.center(q);
    let ell = q.side();
    let radius = a * q.ball_radius(mu.dim());
    let atoms: Vec<usize> = (0..mu.len())
        .filter(|&i| dist(&center, mu.point(i)) < radius)
        .collect();
    let eval = |npo: usize| -> f64 {
        let (nodes, dl) = anchored_nodes(ell, a, npo);
        // One shared spatial index per scale, reused for every atom.
        let mut acc = CompensatedSum::new();
        for &t in &nodes {
            let cache = FieldCache::new(mu, t);
            let mut shell = CompensatedSum::new();
            for &i in &atoms {
                shell.add(mu.weight(i) * norm2(&cache.field(mu.point(i))));
            }
            acc.add(shell.total() * dl);
        }
        acc.total().max(0.0)
    };
    let value = eval(nodes_per_octave);
    let fine = eval(2 * nodes_per_octave);
    let quad_flag = (value - fine).abs() > 1e-3 * fine.max(f64::MIN_POSITIVE);
    let (nodes, _) = anchored_nodes(ell, a, nodes_per_octave);
    Ok(ConstituentRecord {
        cube: q.clone(),
        a_param: a,
        value,
        t_nodes: nodes.len(),
        quad_flag,
    })
}

/// Max over probe points of the number of level-`level` cubes whose dilated
/// ball A·B_Q contains the probe. Bounded by (8√d·A + 2)^d.
pub fn overlap_census(
    lat: &DyadicLattice,
    level: i32,
    a: f64,
    probes: &[Vec<f64>],
) -> Result<usize> {
    if !(a >= 1.0) {
        return Err(Error::Domain("overlap census needs A >= 1".into()));
    }
    let d = lat.dim();
    let side = crate::lattice::exp2i(level);
    let radius = a * 4.0 * (d as f64).sqrt() * side;
    let mut max_count = 0usize;
    for x in probes {
        if x.len() != d {
            return Err(Error::Validation("probe point of wrong dimension".into()));
        }
        // Index window: cube centres with |x − x_Q| < radius lie within
        // radius+side/2 per coordinate.
        let lo: Vec<i64> = (0..d)
            .map(|k| ((x[k] - lat.origin()[k] - radius) / side).floor() as i64 - 1)
            .collect();
        let hi: Vec<i64> = (0..d)
            .map(|k| ((x[k] - lat.origin()[k] + radius) / side).floor() as i64 + 1)
            .collect();
        let mut count = 0usize;
        let mut idx = lo.clone();
        'outer: loop {
            let mut d2 = 0.0;
            for k in 0..d {
                let c = lat.origin()[k] + side * (idx[k] as f64 + 0.5);
                d2 += (x[k] - c) * (x[k] - c);
            }
            if d2.sqrt() < radius {
                count += 1;
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
                if k == d {
                    break 'outer;
                }
            }
        }
        max_count = max_count.max(count);
    }
    Ok(max_count)
}

/// Theoretical ceiling for the overlap census.
pub fn overlap_bound(dim: usize, a: f64) -> f64 {
    (8.0 * (dim as f64).sqrt() * a + 2.0).powi(dim as i32)
}

/// Checks that the expected squared norm of the randomized multi-scale
/// operator equals the sum of single-scale squared norms: with independent
/// mean-zero ±1 signs the cross terms cancel exactly. Returns the absolute
/// identity defect over exhaustive enumeration of all 2^{2k0+1} sign
/// patterns.
pub fn randomized_decomposition_check(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    t: f64,
    k0: u32,
) -> Result<f64> {
    if !(1.0..2.0).contains(&t) {
        return Err(Error::Domain("base scale t must lie in [1, 2)".into()));
    }
    if k0 > 4 {
        return Err(Error::Refused(
            "sign-pattern enumeration beyond k0 = 4 is exponential; refusing".into(),
        ));
    }
    let d = mu.dim();
    let scales = 2 * k0 as usize + 1;
    // Per-atom, per-scale field vectors v[i][k].
    let mut v: Vec<Vec<Vec<f64>>> = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let mut per_scale = Vec::with_capacity(scales);
        for kk in 0..scales {
            let k = kk as i32 - k0 as i32;
            per_scale.push(field_with(mu, f, mu.point(i), crate::lattice::exp2i(k) * t));
        }
        v.push(per_scale);
    }
    // Sum of single-scale squared norms.
    let mut single = CompensatedSum::new();
    for (i, per_scale) in v.iter().enumerate() {
        for vk in per_scale {
            single.add(mu.weight(i) * norm2(vk));
        }
    }
    // Expectation over all sign patterns.
    let patterns = 1usize << scales;
    let mut expect = CompensatedSum::new();
    for pat in 0..patterns {
        let mut pattern_norm = CompensatedSum::new();
        for (i, per_scale) in v.iter().enumerate() {
            let mut combined = vec![0.0f64; d];
            for (kk, vk) in per_scale.iter().enumerate() {
                let sign = if pat >> kk & 1 == 1 { 1.0 } else { -1.0 };
                for c in 0..d {
                    combined[c] += sign * vk[c];
                }
            }
            pattern_norm.add(mu.weight(i) * norm2(&combined));
        }
        expect.add(pattern_norm.total() / patterns as f64);
    }
    Ok((expect.total() - single.total()).abs())
}

/// Comparison of the square-function norm for the multiplicatively convolved
/// profile against the bound factor·(norm for the plain profile over the
/// dilated scale range).
#[derive(Debug, Clone)]
pub struct ConvCompareReport {
    /// ‖S(f)‖ for the convolved profile over [t_min, t_max].
    pub lhs: f64,
    /// ‖S(f)‖ for the plain profile over [t_min·u_min, t_max·u_max].
    pub rhs: f64,
    /// ∫ u^{s+1} g(u) du/u for the atomic mixing density g.
    pub factor: f64,
    /// factor·rhs − lhs; nonnegative up to quadrature error.
    pub slack: f64,
}

/// The mixing density g is atomic: a list of (u, mass) with u > 0, mass ≥ 0.
/// The convolved profile satisfies ψ_g(r/t) = Σ_j (a_j/u_j)·ψ(r/(t·u_j)),
/// so its field is Σ_j a_j·u_j^s·field(x, t·u_j) exactly; no profile
/// quadrature is needed.
pub fn conv_bump_compare(
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    g: &[(f64, f64)],
    t_min: f64,
    t_max: f64,
    nodes_per_octave: usize,
) -> Result<ConvCompareReport> {
    if g.is_empty() {
        return Err(Error::Domain("mixing density must have at least one atom".into()));
    }
    for &(u, a) in g {
        if !(u > 0.0) || !(a >= 0.0) {
            return Err(Error::Domain("mixing density needs u > 0 and mass >= 0".into()));
        }
    }
    if !(t_min > 0.0 && t_min < t_max) {
        return Err(Error::Domain("scale range requires 0 < t_min < t_max".into()));
    }
    let s = mu.s();
    let factor: f64 = g.iter().map(|&(u, a)| a * u.powf(s)).sum();
    let u_min = g.iter().map(|&(u, _)| u).fold(f64::INFINITY, f64::min);
    let u_max = g.iter().map(|&(u, _)| u).fold(0.0, f64::max);

    let norm_of = |mixed: bool, lo: f64, hi: f64| -> f64 {
        let (nodes, dl) = log_nodes(lo, hi, nodes_per_octave);
        let mut acc = CompensatedSum::new();
        for &t in &nodes {
            let mut shell = CompensatedSum::new();
            for i in 0..mu.len() {
                let x = mu.point(i);
                let v = if mixed {
                    let mut out = vec![0.0f64; mu.dim()];
                    for &(u, a) in g {
                        let base = field_with(mu, f, x, t * u);
                        let c = a * u.powf(s);
                        for k in 0..out.len() {
                            out[k] += c * base[k];
                        }
                    }
                    out
                } else {
                    field_with(mu, f, x, t)
                };
                shell.add(mu.weight(i) * norm2(&v));
            }
            acc.add(shell.total() * dl);
        }
        acc.total().max(0.0).sqrt()
    };
    let lhs = norm_of(true, t_min, t_max);
    let rhs = norm_of(false, t_min * u_min, t_max * u_max);
    Ok(ConvCompareReport {
        lhs,
        rhs,
        factor,
        slack: factor * rhs - lhs,
    })
}

/// Per-level testing functional: constituents of the restriction μ|P summed
/// over its charged cubes at each level, normalized by μ(P).
#[derive(Debug, Clone)]
pub struct IndicatorNorm {
    pub per_level: Vec<(i32, f64)>,
    pub total: f64,
    /// μ(P), the normalizer.
    pub mass: f64,
}

pub fn indicator_norm(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    p: &DyadicCube,
    a: f64,
    level_min: i32,
    level_max: i32,
    nodes_per_octave: usize,
) -> Result<IndicatorNorm> {
    let idxs: Vec<usize> = (0..mu.len())
        .filter(|&i| lat.cube_contains(p, mu.point(i)))
        .collect();
    if idxs.is_empty() {
        return Err(Error::Empty("indicator test needs mu(P) > 0".into()));
    }
    let mut coords = Vec::with_capacity(idxs.len() * mu.dim());
    let mut weights = Vec::with_capacity(idxs.len());
    for &i in &idxs {
        coords.extend_from_slice(mu.point(i));
        weights.push(mu.weight(i));
    }
    let restricted = DiscreteMeasure::new(mu.dim(), mu.s(), coords, weights)?;
    let mass = restricted.total_mass();
    let mut per_level = Vec::new();
    let mut total = CompensatedSum::new();
    for level in level_min..=level_max {
        let cubes = charged_cubes(&restricted, lat, level, level)?;
        let mut level_sum = CompensatedSum::new();
        for (q, _) in &cubes {
            let rec = constituent(&restricted, lat, q, a, nodes_per_octave)?;
            level_sum.add(rec.value);
        }
        let v = level_sum.total() / mass;
        per_level.push((level, v));
        total.add(v);
    }
    Ok(IndicatorNorm {
        per_level,
        total: total.total(),
        mass,
    })
}
