//! Continuous multiscale energies of discrete measures in exact closed form.
//!
//! For an atomic measure the ball mass r ↦ μ(B(x,r)) is a step function, so
//! the scale integral ∫ (μ(B(x,r))/r^s)² dr/r splits at the sorted distances
//! from x into intervals where the integrand is an explicit power of r. The
//! same holds for the flatness-weighted variant: between breakpoints the
//! least-squares residual of the ball is constant. No quadrature is involved.

use crate::coeffs::beta_cube;
use crate::error::{Error, Result};
use crate::lattice::{charged_cubes, DyadicCube, DyadicLattice};
use crate::measure::{dist, DiscreteMeasure};
use crate::sum::CompensatedSum;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Which energy integrand to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// Squared density ratio (μ(B(x,r))/r^s)², any real s.
    Wolff,
    /// Density ratio modulated by the squared ball flatness coefficient;
    /// requires integer s.
    Jones,
}

/// Result of an exact energy computation.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub kind: EnergyKind,
    /// Total energy, mass units: the outer integral is against dμ.
    pub total: f64,
    /// Per-atom contributions in atom index order; sums to `total`.
    pub per_atom: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    /// Distinct ball-mass breakpoints inside (r_min, r_max), over all atoms.
    pub breakpoint_count: usize,
}

/// Optional cube restriction: atoms outside the half-open cube are dropped
/// from both the outer integral and the ball masses.
pub type Region<'a> = Option<(&'a DyadicLattice, &'a DyadicCube)>;

fn region_indices(mu: &DiscreteMeasure, region: Region) -> Vec<usize> {
    match region {
        None => (0..mu.len()).collect(),
        Some((lat, q)) => (0..mu.len())
            .filter(|&i| lat.cube_contains(q, mu.point(i)))
            .collect(),
    }
}

/// Sorted (distance, mass jump) pairs from x to the selected atoms, ties
/// merged. The result is independent of tie order because equal distances
/// collapse into a single jump.
fn breakpoints(mu: &DiscreteMeasure, idxs: &[usize], x: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = idxs
        .iter()
        .map(|&j| (dist(x, mu.point(j)), mu.weight(j)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (d, w) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == d => last.1 += w,
            _ => merged.push((d, w)),
        }
    }
    merged
}

/// ∫_a^b r^{−p−1} dr = (a^{−p} − b^{−p})/p for p > 0; b may be +∞.
fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    (a.powf(-p) - b.powf(-p)) / p
}

/// Per-atom scale integral of (μ(B)/r^s)² dr/r in closed form, without the
/// outer weight. Returns (value, breakpoints strictly inside the range).
fn wolff_scale_integral(
    mu: &DiscreteMeasure,
    idxs: &[usize],
    x: &[f64],
    r_min: f64,
    r_max: f64,
) -> (f64, usize) {
    let s = mu.s();
    let bps = breakpoints(mu, idxs, x);
    let mut acc = CompensatedSum::new();
    let mut mass = 0.0;
    let mut interior = 0usize;
    for (j, &(d, w)) in bps.iter().enumerate() {
        // Open balls: on r in (d_j, d_{j+1}] the mass includes the jump at d_j.
        mass += w;
        if d > r_min && d < r_max {
            interior += 1;
        }
        let hi = bps.get(j + 1).map_or(f64::INFINITY, |&(d2, _)| d2);
        let a = d.max(r_min);
        let b = hi.min(r_max);
        if a < b && mass > 0.0 {
            acc.add(mass * mass * power_integral(a, b, 2.0 * s));
        }
    }
    (acc.total(), interior)
}

/// Sum of the k smallest eigenvalues of a symmetric matrix, clamped at 0.
fn smallest_eigen_sum(m: &DMatrix<f64>, k: usize) -> f64 {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev[..k].iter().map(|&v| v.max(0.0)).sum::<f64>().max(0.0)
}

/// Per-atom scale integral of β(B(x,r))²(μ(B)/r^s)² dr/r. Between
/// breakpoints both the ball mass m and the least-squares residual S are
/// constant and the integrand is S·m·r^{−2s−3}. The second-moment sums are
/// accumulated incrementally; the eigenproblem is re-solved per breakpoint.
fn jones_scale_integral(
    mu: &DiscreteMeasure,
    idxs: &[usize],
    x: &[f64],
    n: usize,
    r_min: f64,
    r_max: f64,
) -> (f64, usize) {
    let s = mu.s();
    let d = mu.dim();
    // Atoms sorted by distance, grouped at ties.
    let mut order: Vec<(f64, usize)> = idxs.iter().map(|&j| (dist(x, mu.point(j)), j)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));

    let mut acc = CompensatedSum::new();
    let mut mass = 0.0f64;
    let mut swp = vec![0.0f64; d];
    let mut swpp = DMatrix::<f64>::zeros(d, d);
    let mut interior = 0usize;
    let mut i = 0usize;
    while i < order.len() {
        let dcur = order[i].0;
        // Absorb the whole tie group at this distance.
        while i < order.len() && order[i].0 == dcur {
            let j = order[i].1;
            let w = mu.weight(j);
            let p = mu.point(j);
            mass += w;
            for a in 0..d {
                swp[a] += w * p[a];
                for b in 0..d {
                    swpp[(a, b)] += w * p[a] * p[b];
                }
            }
            i += 1;
        }
        if dcur > r_min && dcur < r_max {
            interior += 1;
        }
        let hi = order.get(i).map_or(f64::INFINITY, |&(d2, _)| d2);
        let a = dcur.max(r_min);
        let b = hi.min(r_max);
        if a < b && mass > 0.0 {
            // Central second moment from the running sums.
            let mut m = swpp.clone();
            for r in 0..d {
                for c in 0..d {
                    m[(r, c)] -= swp[r] * swp[c] / mass;
                }
            }
            let mut res = smallest_eigen_sum(&m, d - n);
            // Forming the central moment from uncentered sums cancels
            // catastrophically when the true residual is 0 (e.g. two atoms,
            // line fit); anything below noise level relative to the
            // uncentered scale is an exact zero.
            let noise = 1e-13 * swpp.trace();
            if res < noise {
                res = 0.0;
            }
            if res > 0.0 {
                acc.add(res * mass * power_integral(a, b, 2.0 * s + 2.0));
            }
        }
    }
    (acc.total(), interior)
}

fn check_range(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min > 0.0) {
        return Err(Error::Domain("truncation requires r_min > 0".into()));
    }
    if !(r_max > r_min) {
        return Err(Error::Domain("truncation requires r_max > r_min".into()));
    }
    Ok(())
}

/// Jones computations need an integer s; returns it as the plane dimension.
pub fn integer_s(mu: &DiscreteMeasure) -> Result<usize> {
    let s = mu.s();
    if s.fract() != 0.0 {
        return Err(Error::Domain(format!(
            "flatness-weighted energy needs integer s, got {s}; use the plain density energy"
        )));
    }
    Ok(s as usize)
}

/// W(μ|region) over scales [r_min, r_max], exact.
pub fn wolff_exact(
    mu: &DiscreteMeasure,
    region: Region,
    r_min: f64,
    r_max: f64,
) -> Result<EnergyReport> {
    check_range(r_min, r_max)?;
    let idxs = region_indices(mu, region);
    let parts: Vec<(f64, usize)> = idxs
        .par_iter()
        .map(|&i| {
            let (v, bp) = wolff_scale_integral(mu, &idxs, mu.point(i), r_min, r_max);
            (mu.weight(i) * v, bp)
        })
        .collect();
    let mut total = CompensatedSum::new();
    let mut breakpoint_count = 0;
    let mut per_atom = Vec::with_capacity(parts.len());
    for &(v, bp) in &parts {
        total.add(v);
        per_atom.push(v);
        breakpoint_count += bp;
    }
    Ok(EnergyReport {
        kind: EnergyKind::Wolff,
        total: total.total(),
        per_atom,
        r_min,
        r_max,
        breakpoint_count,
    })
}

/// J(μ|region) over scales [r_min, r_max], exact. Requires integer s.
pub fn jones_exact(
    mu: &DiscreteMeasure,
    region: Region,
    r_min: f64,
    r_max: f64,
) -> Result<EnergyReport> {
    check_range(r_min, r_max)?;
    let n = integer_s(mu)?;
    if n == 0 || n >= mu.dim() {
        return Err(Error::Domain("integer s must satisfy 0 < s < dim".into()));
    }
    let idxs = region_indices(mu, region);
    let parts: Vec<(f64, usize)> = idxs
        .par_iter()
        .map(|&i| {
            let (v, bp) = jones_scale_integral(mu, &idxs, mu.point(i), n, r_min, r_max);
            (mu.weight(i) * v, bp)
        })
        .collect();
    let mut total = CompensatedSum::new();
    let mut breakpoint_count = 0;
    let mut per_atom = Vec::with_capacity(parts.len());
    for &(v, bp) in &parts {
        total.add(v);
        per_atom.push(v);
        breakpoint_count += bp;
    }
    Ok(EnergyReport {
        kind: EnergyKind::Jones,
        total: total.total(),
        per_atom,
        r_min,
        r_max,
        breakpoint_count,
    })
}

/// Dyadic energy sum with per-cube breakdown.
#[derive(Debug, Clone)]
pub struct DyadicEnergy {
    pub kind: EnergyKind,
    pub total: f64,
    /// (cube, term) in canonical (level, index) order.
    pub per_cube: Vec<(DyadicCube, f64)>,
}

/// Σ over charged cubes of D(Q)²·I(Q) (plain) or β(Q)²·D(Q)²·I(Q)
/// (flatness-weighted), with D(Q) = I(Q)/ℓ(Q)^s.
pub fn dyadic_energy_sum(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    kind: EnergyKind,
    level_min: i32,
    level_max: i32,
) -> Result<DyadicEnergy> {
    let s = mu.s();
    let n = match kind {
        EnergyKind::Wolff => 0,
        EnergyKind::Jones => integer_s(mu)?,
    };
    let cubes = charged_cubes(mu, lat, level_min, level_max)?;
    let terms: Vec<(DyadicCube, f64)> = cubes
        .into_par_iter()
        .map(|(q, mass)| {
            let ell = q.side();
            let dens = mass / ell.powf(s);
            let term = match kind {
                EnergyKind::Wolff => dens * dens * mass,
                EnergyKind::Jones => {
                    let beta = beta_cube(mu, lat, &q, n)
                        .expect("charged cube has positive smoothed mass")
                        .value;
                    beta * beta * dens * dens * mass
                }
            };
            (q, term)
        })
        .collect();
    let mut total = CompensatedSum::new();
    for (_, t) in &terms {
        total.add(*t);
    }
    Ok(DyadicEnergy {
        kind,
        total: total.total(),
        per_cube: terms,
    })
}

/// Pinned constant for the pointwise octave-vs-cube comparison, derived from
/// the containment chain: for r in (2^{k−1}, 2^k] and Q the containing cube
/// at level k, B(x,r) lies in the plateau of φ_Q, so μ(B) ≤ I(Q), the ball
/// residual is at most the cube residual, and (ℓ/r)² ≤ 4; the exact octave
/// integral of r^{−2s−1} then yields these closed forms.
pub fn domination_constant(kind: EnergyKind, s: f64) -> f64 {
    match kind {
        EnergyKind::Wolff => (2.0f64.powf(2.0 * s) - 1.0) / (2.0 * s),
        EnergyKind::Jones => (2.0f64.powf(2.0 * s + 2.0) - 4.0) / (2.0 * s),
    }
}

/// Outcome of the pointwise dyadic-domination check.
#[derive(Debug, Clone)]
pub struct DominationReport {
    pub kind: EnergyKind,
    /// max over (atom, octave) of octave integral / dyadic majorant.
    pub max_ratio: f64,
    pub argmax_atom: usize,
    pub argmax_level: i32,
    /// The pinned theoretical bound for this kind and s.
    pub pinned_bound: f64,
    /// (atom, octave) pairs evaluated with a nonzero integral.
    pub checked: usize,
    /// Pairs where both sides were zero.
    pub vacuous: usize,
}

/// For every atom x and octave (2^{k−1}, 2^k] with k in [level_min,
/// level_max], compares the exact continuous octave integral against the
/// dyadic majorant Σ_{ℓ(Q)=2^k} term(Q)·φ_Q(x). Errors if a majorant
/// vanishes while the integral does not.
pub fn verify_dyadic_domination(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    kind: EnergyKind,
    level_min: i32,
    level_max: i32,
) -> Result<DominationReport> {
    let s = mu.s();
    let n = match kind {
        EnergyKind::Wolff => 0,
        EnergyKind::Jones => integer_s(mu)?,
    };
    let all: Vec<usize> = (0..mu.len()).collect();
    let mut max_ratio = 0.0f64;
    let mut argmax_atom = 0usize;
    let mut argmax_level = level_min;
    let mut checked = 0usize;
    let mut vacuous = 0usize;
    for level in level_min..=level_max {
        let cubes = charged_cubes(mu, lat, level, level)?;
        // Per-cube majorant coefficients, independent of x.
        let coeffs: Vec<(&DyadicCube, f64)> = cubes
            .iter()
            .map(|(q, mass)| {
                let ell = q.side();
                let dens = mass / ell.powf(s);
                let term = match kind {
                    EnergyKind::Wolff => dens * dens,
                    EnergyKind::Jones => {
                        let beta = beta_cube(mu, lat, q, n)
                            .expect("charged cube has positive smoothed mass")
                            .value;
                        beta * beta * dens * dens
                    }
                };
                (q, term)
            })
            .collect();
        let lo = crate::lattice::exp2i(level - 1);
        let hi = crate::lattice::exp2i(level);
        for i in 0..mu.len() {
            let x = mu.point(i);
            let (integral, _) = match kind {
                EnergyKind::Wolff => wolff_scale_integral(mu, &all, x, lo, hi),
                EnergyKind::Jones => jones_scale_integral(mu, &all, x, n, lo, hi),
            };
            let mut majorant = CompensatedSum::new();
            for (q, term) in &coeffs {
                let phi = lat.phi(q, x);
                if phi > 0.0 {
                    majorant.add(term * phi);
                }
            }
            let majorant = majorant.total();
            if integral == 0.0 {
                vacuous += 1;
                continue;
            }
            if majorant == 0.0 {
                return Err(Error::HypothesisViolated(format!(
                    "octave integral {integral} at atom {i}, level {level} has zero majorant"
                )));
            }
            checked += 1;
            let ratio = integral / majorant;
            if ratio > max_ratio {
                max_ratio = ratio;
                argmax_atom = i;
                argmax_level = level;
            }
        }
    }
    Ok(DominationReport {
        kind,
        max_ratio,
        argmax_atom,
        argmax_level,
        pinned_bound: domination_constant(kind, s),
        checked,
        vacuous,
    })
}

/// Result of sweeping the per-cube Carleson ratio.
#[derive(Debug, Clone)]
pub struct CarlesonReport {
    pub kind: EnergyKind,
    /// sup over charged cubes P of energy(μ|P over P) / μ(P).
    pub sup_ratio: f64,
    pub argmax: Option<DyadicCube>,
    /// (cube, ratio) for every charged cube with atoms, canonical order.
    pub per_cube: Vec<(DyadicCube, f64)>,
}

/// Restricts μ to each charged cube, computes the energy of the restriction
/// over the cube, and normalizes by the restricted mass. The plain energy is
/// truncated below at 2·min_sep (it diverges at scale 0 for atoms); the
/// flatness-weighted integrand vanishes below the separation scale on its
/// own, so its truncation at min_sep/2 is lossless.
pub fn carleson_sweep(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    kind: EnergyKind,
    level_min: i32,
    level_max: i32,
) -> Result<CarlesonReport> {
    if kind == EnergyKind::Jones {
        integer_s(mu)?;
    }
    let r_min = match kind {
        EnergyKind::Wolff => 2.0 * mu.min_sep(),
        EnergyKind::Jones => 0.5 * mu.min_sep(),
    };
    if !r_min.is_finite() || r_min <= 0.0 {
        return Err(Error::Degenerate(
            "carleson sweep needs at least two distinct atoms".into(),
        ));
    }
    let cubes = charged_cubes(mu, lat, level_min, level_max)?;
    let rows: Vec<Option<(DyadicCube, f64)>> = cubes
        .into_par_iter()
        .map(|(q, _)| {
            let restricted: f64 = (0..mu.len())
                .filter(|&i| lat.cube_contains(&q, mu.point(i)))
                .map(|i| mu.weight(i))
                .sum();
            if restricted <= 0.0 {
                // Charged through the smoothed profile only: μ(P) = 0.
                return None;
            }
            let report = match kind {
                EnergyKind::Wolff => wolff_exact(mu, Some((lat, &q)), r_min, f64::INFINITY),
                EnergyKind::Jones => jones_exact(mu, Some((lat, &q)), r_min, f64::INFINITY),
            }
            .expect("range checked above");
            Some((q, report.total / restricted))
        })
        .collect();
    let mut per_cube = Vec::new();
    let mut sup_ratio = 0.0f64;
    let mut argmax = None;
    for row in rows.into_iter().flatten() {
        if row.1 > sup_ratio {
            sup_ratio = row.1;
            argmax = Some(row.0.clone());
        }
        per_cube.push(row);
    }
    Ok(CarlesonReport {
        kind,
        sup_ratio,
        argmax,
        per_cube,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorSpec};
    use crate::lattice::exp2i;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_measure(seed: u64, n: usize, s: f64, d: usize) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        DiscreteMeasure::new(d, s, coords, weights).unwrap()
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let fa = f(a);
        let fm = f(m);
        let fb = f(b);
        fn step(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    /// Numeric oracle: integrates the directly-evaluated integrand between
    /// breakpoints, with endpoints nudged inward to dodge the open-ball jump.
    fn oracle_energy(mu: &DiscreteMeasure, kind: EnergyKind, r_min: f64, r_max: f64) -> f64 {
        let s = mu.s();
        let n = if kind == EnergyKind::Jones { mu.s() as usize } else { 0 };
        let mut total = 0.0;
        for i in 0..mu.len() {
            let x = mu.point(i);
            let mut cuts: Vec<f64> = (0..mu.len())
                .map(|j| dist(x, mu.point(j)))
                .filter(|&d| d > r_min && d < r_max)
                .collect();
            cuts.push(r_min);
            cuts.push(r_max);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            let integrand = |r: f64| -> f64 {
                let mut pts: Vec<&[f64]> = Vec::new();
                let mut ws: Vec<f64> = Vec::new();
                for j in 0..mu.len() {
                    if dist(x, mu.point(j)) < r {
                        pts.push(mu.point(j));
                        ws.push(mu.weight(j));
                    }
                }
                let m: f64 = ws.iter().sum();
                if m == 0.0 {
                    return 0.0;
                }
                match kind {
                    EnergyKind::Wolff => m * m * r.powf(-2.0 * s - 1.0),
                    EnergyKind::Jones => {
                        let res = crate::coeffs::optimal_plane_weighted(&pts, &ws, n)
                            .map(|(_, res, _)| res)
                            .unwrap_or(0.0);
                        res * m * r.powf(-2.0 * s - 3.0)
                    }
                }
            };
            let mut atom_val = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let pad = (b - a) * 1e-9;
                atom_val += adaptive_simpson(&integrand, a + pad, b - pad, 1e-12, 30);
            }
            total += mu.weight(i) * atom_val;
        }
        total
    }

    #[test]
    fn wolff_single_atom_closed_form() {
        let mu = DiscreteMeasure::new(2, 1.5, vec![0.3, -0.2], vec![2.0]).unwrap();
        let s = 1.5;
        let (a, b) = (0.5, 4.0);
        let rep = wolff_exact(&mu, None, a, b).unwrap();
        let expected = 2.0 * 4.0 * (a.powf(-2.0 * s) - b.powf(-2.0 * s)) / (2.0 * s);
        assert!((rep.total - expected).abs() < 1e-14 * expected);
        assert_eq!(rep.breakpoint_count, 0);
    }

    #[test]
    fn wolff_infinite_tail_converges() {
        let mu = random_measure(1, 20, 1.3, 2);
        let rep = wolff_exact(&mu, None, 0.05, f64::INFINITY).unwrap();
        assert!(rep.total.is_finite() && rep.total > 0.0);
        // Tail beyond the diameter is the constant-mass closed form.
        let big = 10.0 * mu.diam();
        let head = wolff_exact(&mu, None, 0.05, big).unwrap().total;
        let m = mu.total_mass();
        let s = mu.s();
        let tail: f64 = (0..mu.len())
            .map(|i| mu.weight(i) * m * m * big.powf(-2.0 * s) / (2.0 * s))
            .sum();
        assert!((rep.total - (head + tail)).abs() < 1e-10 * rep.total);
    }

    #[test]
    fn wolff_matches_quadrature_oracle() {
        let mu = random_measure(7, 50, 1.4, 2);
        let (a, b) = (0.01, 5.0);
        let exact = wolff_exact(&mu, None, a, b).unwrap().total;
        let oracle = oracle_energy(&mu, EnergyKind::Wolff, a, b);
        assert!(
            (exact - oracle).abs() < 1e-6 * exact,
            "exact={exact} oracle={oracle}"
        );
    }

    #[test]
    fn jones_matches_quadrature_oracle_on_cantor() {
        let mu = generate(&GeneratorSpec::CantorFourCorner { generation: 3 }, 0).unwrap();
        let (a, b) = (1e-3, 4.0);
        let exact = jones_exact(&mu, None, a, b).unwrap().total;
        let oracle = oracle_energy(&mu, EnergyKind::Jones, a, b);
        assert!(
            (exact - oracle).abs() < 1e-5 * exact,
            "exact={exact} oracle={oracle}"
        );
    }

    #[test]
    fn range_monotonicity_exact() {
        let mu = random_measure(3, 25, 1.2, 2);
        let inner = wolff_exact(&mu, None, 0.2, 2.0).unwrap().total;
        let outer = wolff_exact(&mu, None, 0.1, 3.0).unwrap().total;
        assert!(inner <= outer);
        let mu_j = random_measure(4, 25, 1.0, 2);
        let inner = jones_exact(&mu_j, None, 0.2, 2.0).unwrap().total;
        let outer = jones_exact(&mu_j, None, 0.1, 3.0).unwrap().total;
        assert!(inner <= outer);
    }

    #[test]
    fn restriction_monotonicity() {
        let lat = DyadicLattice::standard(2);
        let q = DyadicCube { level: 0, index: vec![0, 0] };
        for (seed, s) in [(11u64, 1.4f64), (12, 1.0)] {
            let mu = random_measure(seed, 40, s, 2);
            let full = if s.fract() == 0.0 {
                jones_exact(&mu, None, 0.05, 10.0).unwrap()
            } else {
                wolff_exact(&mu, None, 0.05, 10.0).unwrap()
            };
            let restricted = if s.fract() == 0.0 {
                jones_exact(&mu, Some((&lat, &q)), 0.05, 10.0).unwrap()
            } else {
                wolff_exact(&mu, Some((&lat, &q)), 0.05, 10.0).unwrap()
            };
            // μ|Q energy over Q never exceeds the μ energy integrated over Q.
            let full_over_q: f64 = (0..mu.len())
                .filter(|&i| lat.cube_contains(&q, mu.point(i)))
                .map(|i| full.per_atom[i])
                .sum();
            assert!(restricted.total <= full_over_q + 1e-12);
        }
    }

    #[test]
    fn jones_plane_measure_is_zero() {
        let mu = generate(
            &GeneratorSpec::PlanePatch { dim: 2, n: 1, extent: 1.0, grid_step: 0.1 },
            0,
        )
        .unwrap();
        let rep = jones_exact(&mu, None, 0.01, 100.0).unwrap();
        assert!(rep.total < 1e-20, "total = {}", rep.total);
    }

    #[test]
    fn jones_vanishes_below_separation() {
        let mu = random_measure(5, 10, 1.0, 2);
        let rep = jones_exact(&mu, None, mu.min_sep() * 1e-6, mu.min_sep()).unwrap();
        assert_eq!(rep.total, 0.0);
    }

    #[test]
    fn jones_requires_integer_s() {
        let mu = random_measure(6, 5, 1.5, 2);
        assert!(jones_exact(&mu, None, 0.1, 1.0).is_err());
    }

    #[test]
    fn dyadic_sum_plane_jones_zero_and_widening() {
        let mu = generate(
            &GeneratorSpec::PlanePatch { dim: 2, n: 1, extent: 1.0, grid_step: 0.1 },
            0,
        )
        .unwrap();
        let lat = DyadicLattice::standard(2);
        let e = dyadic_energy_sum(&mu, &lat, EnergyKind::Jones, -3, 2).unwrap();
        assert!(e.total < 1e-18);
        let mu_r = random_measure(8, 20, 1.3, 2);
        let narrow = dyadic_energy_sum(&mu_r, &lat, EnergyKind::Wolff, -2, 1).unwrap();
        let wide = dyadic_energy_sum(&mu_r, &lat, EnergyKind::Wolff, -3, 2).unwrap();
        assert!(narrow.total <= wide.total);
    }

    #[test]
    fn dyadic_sum_single_atom_matches_direct() {
        let w = 1.7;
        let p = [0.37, -0.21];
        let mu = DiscreteMeasure::new(2, 1.25, vec![p[0], p[1]], vec![w]).unwrap();
        let lat = DyadicLattice::standard(2);
        let k = -1;
        let e = dyadic_energy_sum(&mu, &lat, EnergyKind::Wolff, k, k).unwrap();
        // Direct: Σ over nearby cubes of (wφ)²/ℓ^{2s}·(wφ).
        let side = exp2i(k);
        let sd = 2.0f64.sqrt();
        let mut expected = 0.0;
        for mx in -20i64..20 {
            for my in -20i64..20 {
                let cx = (mx as f64 + 0.5) * side;
                let cy = (my as f64 + 0.5) * side;
                let d = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
                let phi = crate::bump::bump(d / (2.0 * sd * side));
                let mass = w * phi;
                if mass > 0.0 {
                    expected += (mass / side.powf(1.25)).powi(2) * mass;
                }
            }
        }
        assert!((e.total - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn domination_single_atom_hand_value() {
        let w = 2.0;
        let p = [0.3, 0.4];
        let s = 1.5;
        let mu = DiscreteMeasure::new(2, s, vec![p[0], p[1]], vec![w]).unwrap();
        let lat = DyadicLattice::standard(2);
        let k = 0;
        let rep = verify_dyadic_domination(&mu, &lat, EnergyKind::Wolff, k, k).unwrap();
        // integral/majorant = [(2^{2s}−1)/(2s)] / Σφ³ for one atom.
        let side = exp2i(k);
        let sd = 2.0f64.sqrt();
        let mut sum_phi3 = 0.0;
        for mx in -20i64..20 {
            for my in -20i64..20 {
                let cx = (mx as f64 + 0.5) * side;
                let cy = (my as f64 + 0.5) * side;
                let d = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
                sum_phi3 += crate::bump::bump(d / (2.0 * sd * side)).powi(3);
            }
        }
        let expected = domination_constant(EnergyKind::Wolff, s) / sum_phi3;
        assert!(
            (rep.max_ratio - expected).abs() < 1e-10 * expected,
            "ratio {} vs {}",
            rep.max_ratio,
            expected
        );
        assert!(rep.max_ratio <= rep.pinned_bound);
    }

    #[test]
    fn domination_plane_jones_vacuous() {
        let mu = generate(
            &GeneratorSpec::PlanePatch { dim: 2, n: 1, extent: 1.0, grid_step: 0.1 },
            0,
        )
        .unwrap();
        let lat = DyadicLattice::standard(2);
        let rep = verify_dyadic_domination(&mu, &lat, EnergyKind::Jones, -2, 1).unwrap();
        assert_eq!(rep.max_ratio, 0.0);
        assert_eq!(rep.checked, 0);
    }

    #[test]
    fn domination_random_measures_within_pinned_bound() {
        let lat = DyadicLattice::standard(2);
        for seed in 0..100u64 {
            let s = if seed % 2 == 0 { 1.3 } else { 1.0 };
            let kind = if seed % 2 == 0 { EnergyKind::Wolff } else { EnergyKind::Jones };
            let mu = random_measure(100 + seed, 30, s, 2);
            let (lo, hi) = crate::lattice::default_levels(&mu).unwrap();
            let rep = verify_dyadic_domination(&mu, &lat, kind, lo, hi).unwrap();
            assert!(
                rep.max_ratio <= rep.pinned_bound,
                "seed {seed}: ratio {} exceeds bound {}",
                rep.max_ratio,
                rep.pinned_bound
            );
        }
    }

    #[test]
    fn carleson_plane_jones_zero() {
        let mu = generate(
            &GeneratorSpec::PlanePatch { dim: 2, n: 1, extent: 1.0, grid_step: 0.1 },
            0,
        )
        .unwrap();
        let lat = DyadicLattice::standard(2);
        let rep = carleson_sweep(&mu, &lat, EnergyKind::Jones, -3, 1).unwrap();
        assert!(rep.sup_ratio < 1e-18);
    }

    #[test]
    fn carleson_cantor_finite_and_positive() {
        let mu = generate(&GeneratorSpec::CantorFourCorner { generation: 3 }, 0).unwrap();
        let lat = DyadicLattice::standard(2);
        let (lo, hi) = crate::lattice::default_levels(&mu).unwrap();
        let rep = carleson_sweep(&mu, &lat, EnergyKind::Jones, lo, hi).unwrap();
        assert!(rep.sup_ratio.is_finite() && rep.sup_ratio > 0.0);
        assert!(rep.argmax.is_some());
    }
}
