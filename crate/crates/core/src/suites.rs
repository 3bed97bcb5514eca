//! Named verification suites: each runs a batch of quantitative checks on
//! generated fixtures and random instances and reports one row per check,
//! with the measured value, its threshold, and where the threshold comes
//! from. The calibrated thresholds live in the checked-in calibration file.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calibration::calibration;
use crate::coeffs::{
    alpha_cube, beta_cube, optimal_plane_weighted, witness_constant, AffinePlane, AlphaOpts,
};
use crate::energy::{carleson_sweep, verify_dyadic_domination, EnergyKind};
use crate::error::{Error, Result};
use crate::filters::{
    best_subset_exact, best_subset_greedy, c_inner, c_prune_ceiling, densbetadoub_check,
    find_bunch_below, g_down, pruning_check, up_filter, verify_bunch, verify_down_lemmas,
    verify_up_lemma, FilterConfig,
};
use crate::generate::{generate, perturb, GeneratorSpec};
use crate::lattice::{charged_cubes, cube_mass, smoothed_cube_mass, DyadicLattice};
use crate::measure::DiscreteMeasure;
use crate::sqfn::{
    conv_bump_compare, overlap_bound, overlap_census, randomized_decomposition_check,
};
use crate::symmetry::{
    growth_identity_check, mattila_preiss_residual, symmetry_defect, SymmetryConfig,
};

/// Where a threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exact inequality; zero tolerance.
    Exact,
    /// Closed-form constant pinned once from the derivation.
    Pinned,
    /// Derived bound with an explicit numerical tolerance.
    Derived,
    /// Regression value measured once and checked into calibration.toml.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check's premise never fired; distinct from a pass.
    Vacuous,
}

/// One check: a measured scalar against a threshold.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub provenance: Provenance,
    pub verdict: Verdict,
}

impl CheckRow {
    fn le(name: &str, measured: f64, threshold: f64, provenance: Provenance) -> Self {
        let verdict = if measured <= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckRow {
            name: name.into(),
            measured,
            threshold,
            provenance,
            verdict,
        }
    }

    fn ge(name: &str, measured: f64, threshold: f64, provenance: Provenance) -> Self {
        let verdict = if measured >= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckRow {
            name: name.into(),
            measured,
            threshold,
            provenance,
            verdict,
        }
    }

    /// Regression equality within a relative tolerance.
    fn close(name: &str, measured: f64, pinned: f64, rel_tol: f64) -> Self {
        let verdict = if (measured - pinned).abs() <= rel_tol * pinned.abs().max(1e-12) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckRow {
            name: name.into(),
            measured,
            threshold: pinned,
            provenance: Provenance::Calibrated,
            verdict,
        }
    }

    fn vacuous(name: &str, measured: f64, threshold: f64, provenance: Provenance) -> Self {
        CheckRow {
            name: name.into(),
            measured,
            threshold,
            provenance,
            verdict: Verdict::Vacuous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }
}

pub const SUITE_NAMES: &[&str] = &[
    "sandwich",
    "eigen_plane",
    "beta_alpha",
    "dyadic_domination",
    "overlap",
    "sign_decomposition",
    "conv_bound",
    "symmetry",
    "growth_identity",
    "filters",
    "pruning",
    "trends",
];

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let rows = match name {
        "sandwich" => suite_sandwich(seed)?,
        "eigen_plane" => suite_eigen_plane(seed)?,
        "beta_alpha" => suite_beta_alpha(seed)?,
        "dyadic_domination" => suite_dyadic_domination(seed)?,
        "overlap" => suite_overlap(seed)?,
        "sign_decomposition" => suite_sign_decomposition(seed)?,
        "conv_bound" => suite_conv_bound(seed)?,
        "symmetry" => suite_symmetry(seed)?,
        "growth_identity" => suite_growth_identity(seed)?,
        "filters" => suite_filters(seed)?,
        "pruning" => suite_pruning(seed)?,
        "trends" => suite_trends(seed)?,
        _ => {
            return Err(Error::Validation(format!(
                "unknown suite {name:?}; known suites: {}",
                SUITE_NAMES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.into(),
        seed,
        rows,
    })
}

pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    SUITE_NAMES.iter().map(|n| run_suite(n, seed)).collect()
}

/// Random weighted cloud in [-1,1]^dim.
fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, n_pts: usize, s: f64) -> DiscreteMeasure {
    let mut coords = Vec::with_capacity(dim * n_pts);
    let mut weights = Vec::with_capacity(n_pts);
    for _ in 0..n_pts {
        for _ in 0..dim {
            coords.push(rng.gen_range(-1.0..1.0));
        }
        weights.push(rng.gen_range(0.5..1.5) / n_pts as f64);
    }
    DiscreteMeasure::new(dim, s, coords, weights).expect("valid random cloud")
}

fn three_line_translates() -> Vec<(Vec<f64>, f64)> {
    vec![
        (vec![0.0, -0.5], 1.0),
        (vec![0.0, 0.0], 1.0),
        (vec![0.0, 0.5], 1.0),
    ]
}

/// One representative of every generator family.
fn family_fixtures() -> Result<Vec<DiscreteMeasure>> {
    let specs = vec![
        GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 2.0,
            grid_step: 0.125,
        },
        GeneratorSpec::PlanePatch {
            dim: 3,
            n: 2,
            extent: 1.0,
            grid_step: 0.25,
        },
        GeneratorSpec::LipschitzGraph {
            dim: 2,
            n: 1,
            lip_const: 0.3,
            extent: 2.0,
            grid_step: 0.125,
        },
        GeneratorSpec::CantorFourCorner { generation: 3 },
        GeneratorSpec::CantorSelfSimilar {
            dim: 2,
            contraction_ratio: 0.3,
            generation: 3,
        },
        GeneratorSpec::PhiSymmetricExample {
            dim: 2,
            k: 1,
            translates: three_line_translates(),
            extent: 2.0,
            grid_step: 0.125,
        },
    ];
    specs.iter().map(|sp| generate(sp, 1)).collect()
}

fn suite_sandwich(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measures = family_fixtures()?;
    for i in 0..20 {
        let dim = 2 + (i % 2);
        let n_pts = 20 + 9 * i;
        let s = 0.5 + 0.9 * rng.gen_range(0.0..1.0) * (dim as f64 - 0.6);
        measures.push(random_cloud(&mut rng, dim, n_pts, s));
    }
    let mut ball_violation = f64::NEG_INFINITY;
    let mut cube_violation = f64::NEG_INFINITY;
    for mu in &measures {
        let d = mu.dim();
        let diam = mu.diam();
        let centers: Vec<usize> = (0..mu.len().min(5)).collect();
        for &i in &centers {
            let x = mu.point(i).to_vec();
            for frac in [0.05, 0.2, 0.7] {
                let r = frac * diam;
                if !(r > 0.0) {
                    continue;
                }
                let inner = mu.ball_mass(&x, r)?;
                let mid = mu.smoothed_mass(&x, r)?;
                let outer = mu.ball_mass(&x, 2.0 * r)?;
                ball_violation = ball_violation.max(inner - mid).max(mid - outer);
            }
        }
        let lat = DyadicLattice::standard(d);
        let level = diam.log2().ceil() as i32;
        for (q, _) in charged_cubes(mu, &lat, level - 1, level)?.iter().take(200) {
            let inner = cube_mass(mu, &lat, q);
            let mid = smoothed_cube_mass(mu, &lat, q);
            let outer = mu.ball_mass(&lat.center(q), q.ball_radius(d))?;
            cube_violation = cube_violation.max(inner - mid).max(mid - outer);
        }
    }
    Ok(vec![
        CheckRow::le("ball_sandwich_violation", ball_violation, 0.0, Provenance::Exact),
        CheckRow::le("cube_chain_violation", cube_violation, 0.0, Provenance::Exact),
    ])
}

fn random_unit_basis(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = (0..d).map(|k| v[k] * b[k]).sum();
            for k in 0..d {
                v[k] -= dot * b[k];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return None;
        }
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    Some(basis)
}

fn suite_eigen_plane(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroid_gap = 0.0f64;
    let mut optimality_gap = f64::NEG_INFINITY;
    for i in 0..50 {
        let d = 2 + (i % 2);
        let n = 1 + if d == 3 { i % 2 } else { 0 };
        let mu = random_cloud(&mut rng, d, 20 + (i % 30), 1.0);
        let pts: Vec<&[f64]> = (0..mu.len()).map(|j| mu.point(j)).collect();
        let ws = mu.weights().to_vec();
        let (plane, eigen_res, mass) = optimal_plane_weighted(&pts, &ws, n)?;
        let mut centroid = vec![0.0f64; d];
        for (p, &w) in pts.iter().zip(&ws) {
            for k in 0..d {
                centroid[k] += w * p[k];
            }
        }
        for c in &mut centroid {
            *c /= mass;
        }
        // Total weighted spread; the natural squared length scale.
        let scale2: f64 = pts
            .iter()
            .zip(&ws)
            .map(|(p, &w)| {
                w * (0..d).map(|k| (p[k] - centroid[k]).powi(2)).sum::<f64>()
            })
            .sum();
        let scale = (scale2 / mass).sqrt();
        centroid_gap = centroid_gap.max(plane.distance(&centroid) / scale.max(1e-300));
        for _ in 0..500 {
            let basis = match random_unit_basis(&mut rng, d, n) {
                Some(b) => b,
                None => continue,
            };
            let cand = AffinePlane {
                base: centroid.clone(),
                basis,
            };
            let cand_res: f64 = pts
                .iter()
                .zip(&ws)
                .map(|(p, &w)| w * cand.distance(p).powi(2))
                .sum();
            optimality_gap = optimality_gap.max((eigen_res - cand_res) / scale2.max(1e-300));
        }
    }
    Ok(vec![
        CheckRow::le("centroid_on_plane", centroid_gap, 1e-10, Provenance::Derived),
        CheckRow::le(
            "eigen_beats_sampled_planes",
            optimality_gap,
            1e-10,
            Provenance::Derived,
        ),
    ])
}

fn suite_beta_alpha(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measures: Vec<DiscreteMeasure> = Vec::new();
    for _ in 0..6 {
        measures.push(random_cloud(&mut rng, 2, 30, 1.0));
    }
    measures.push(generate(
        &GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 2.0,
            grid_step: 0.125,
        },
        1,
    )?);
    measures.push(generate(
        &GeneratorSpec::LipschitzGraph {
            dim: 2,
            n: 1,
            lip_const: 0.3,
            extent: 2.0,
            grid_step: 0.125,
        },
        1,
    )?);
    let n = 1usize;
    let mut interval_violation = f64::NEG_INFINITY;
    let mut witness_ratio = f64::NEG_INFINITY;
    let mut checked = 0usize;
    'outer: for (mi, mu) in measures.iter().enumerate() {
        let lat = DyadicLattice::standard(mu.dim());
        let cw = witness_constant(mu.dim());
        for (q, _) in charged_cubes(mu, &lat, -1, 0)? {
            // Only cubes actually holding atoms; pure smoothed charge gives
            // near-degenerate transport instances.
            if !(0..mu.len()).any(|i| lat.cube_contains(&q, mu.point(i))) {
                continue;
            }
            let beta = beta_cube(mu, &lat, &q, n)?;
            let opts = AlphaOpts {
                quad_step: Some(q.side() / 16.0),
                plane_candidates: 2,
                refine_iters: 3,
                seed: seed ^ (mi as u64),
            };
            let alpha = alpha_cube(mu, &lat, &q, n, &opts)?;
            interval_violation = interval_violation.max(alpha.lower - alpha.upper);
            let denom = cw * (alpha.upper + alpha.quad_error_bound);
            if denom > 1e-16 {
                witness_ratio = witness_ratio.max(beta.value * beta.value / denom);
            }
            checked += 1;
            if checked >= 30 {
                break 'outer;
            }
        }
    }
    let mut rows = vec![CheckRow::le(
        "alpha_interval_order",
        interval_violation,
        0.0,
        Provenance::Exact,
    )];
    if witness_ratio.is_finite() {
        rows.push(CheckRow::le(
            "beta_sq_le_cw_alpha",
            witness_ratio,
            1.0,
            Provenance::Derived,
        ));
    } else {
        rows.push(CheckRow::vacuous("beta_sq_le_cw_alpha", 0.0, 1.0, Provenance::Derived));
    }
    rows.push(CheckRow::ge(
        "cubes_checked",
        checked as f64,
        30.0,
        Provenance::Derived,
    ));
    Ok(rows)
}

fn suite_dyadic_domination(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut checked_pairs = 0usize;
    for i in 0..100 {
        let d = 2 + (i % 2);
        let (kind, s) = if i % 2 == 0 {
            // Non-integer exponents for the plain density energy.
            (EnergyKind::Wolff, 0.55 + 0.8 * rng.gen_range(0.0..1.0))
        } else {
            (EnergyKind::Jones, 1.0)
        };
        let mu = random_cloud(&mut rng, d, 40, s);
        let lat = DyadicLattice::standard(d);
        let rep = verify_dyadic_domination(&mu, &lat, kind, -2, 1)?;
        worst = worst.max(rep.max_ratio / rep.pinned_bound);
        checked_pairs += rep.checked;
    }
    Ok(vec![
        CheckRow::le("octave_ratio_vs_pinned", worst, 1.0, Provenance::Pinned),
        CheckRow::ge("pairs_checked", checked_pairs as f64, 100.0, Provenance::Derived),
    ])
}

fn suite_overlap(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for d in [2usize, 3] {
        let probes: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..d).map(|_| rng.gen_range(0.0..4.0)).collect())
            .collect();
        let lat = DyadicLattice::standard(d);
        let mut worst = 0.0f64;
        for a in [1.0, 2.0, 4.0] {
            let census = overlap_census(&lat, 0, a, &probes)?;
            worst = worst.max(census as f64 / overlap_bound(d, a));
        }
        rows.push(CheckRow::le(
            &format!("census_vs_bound_d{d}"),
            worst,
            1.0,
            Provenance::Pinned,
        ));
    }
    Ok(rows)
}

fn suite_sign_decomposition(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let s = 0.8 + rng.gen_range(0.0..1.0);
        let mu = random_cloud(&mut rng, 2, 25, s);
        let t = 1.0 + 0.9 * rng.gen_range(0.0..1.0);
        let k0 = 1 + (i % 3) as u32;
        worst = worst.max(randomized_decomposition_check(&mu, None, t, k0)?);
    }
    Ok(vec![CheckRow::le(
        "expectation_identity_defect",
        worst,
        1e-12,
        Provenance::Derived,
    )])
}

fn suite_conv_bound(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut nonzero = 0usize;
    for _ in 0..20 {
        let s = 0.6 + rng.gen_range(0.0..1.2);
        let mu = random_cloud(&mut rng, 2, 25, s);
        let g = vec![
            (rng.gen_range(0.5..1.0), rng.gen_range(0.2..1.0)),
            (rng.gen_range(1.0..2.0), rng.gen_range(0.2..1.0)),
        ];
        let rep = conv_bump_compare(&mu, None, &g, 0.5, 2.0, 6)?;
        if rep.lhs > 0.0 {
            worst = worst.max((rep.lhs - rep.factor * rep.rhs) / rep.lhs);
            nonzero += 1;
        }
    }
    let mut rows = Vec::new();
    if nonzero > 0 {
        rows.push(CheckRow::le(
            "conv_norm_vs_moment_bound",
            worst,
            1e-6,
            Provenance::Derived,
        ));
    } else {
        rows.push(CheckRow::vacuous(
            "conv_norm_vs_moment_bound",
            0.0,
            1e-6,
            Provenance::Derived,
        ));
    }
    rows.push(CheckRow::ge("nonzero_instances", nonzero as f64, 15.0, Provenance::Derived));
    Ok(rows)
}

/// Symmetric three-line fixture and a sampling plan over interior middle-line
/// atoms.
fn three_line_fixture(grid_step: f64) -> Result<(DiscreteMeasure, SymmetryConfig)> {
    let extent = 4.0;
    let mu = generate(
        &GeneratorSpec::PhiSymmetricExample {
            dim: 2,
            k: 1,
            translates: three_line_translates(),
            extent,
            grid_step,
        },
        1,
    )?;
    let mut samples = Vec::new();
    let mut boundary = Vec::new();
    for i in 0..mu.len() {
        let p = mu.point(i);
        if p[1] == 0.0 && p[0].abs() <= 0.2 {
            samples.push(i);
            boundary.push(extent / 2.0 - p[0].abs());
        }
    }
    let config = SymmetryConfig::new(
        2,
        1.0,
        3000.0,
        vec![0.2, 0.4, 0.8],
        samples,
        boundary,
    )?;
    Ok((mu, config))
}

fn suite_symmetry(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();

    let (coarse_mu, coarse_cfg) = three_line_fixture(0.1)?;
    let (fine_mu, fine_cfg) = three_line_fixture(0.05)?;
    let coarse = symmetry_defect(&coarse_mu, &coarse_cfg)?;
    let fine = symmetry_defect(&fine_mu, &fine_cfg)?;
    rows.push(CheckRow::le(
        "symmetric_defect_machine_level",
        coarse.max_defect.max(fine.max_defect),
        1e-12,
        Provenance::Derived,
    ));
    let noise = 1e-12;
    if coarse.max_defect < noise && fine.max_defect < noise {
        // Both defects sit at rounding level: the grid discretization of a
        // palindromic translate family is exactly symmetric at interior
        // middle-line samples, so there is no refinement trend to observe.
        rows.push(CheckRow::vacuous(
            "defect_halves_under_refinement",
            coarse.max_defect / fine.max_defect.max(f64::MIN_POSITIVE),
            2.0,
            Provenance::Derived,
        ));
    } else {
        let ratio = coarse.max_defect / fine.max_defect.max(f64::MIN_POSITIVE);
        let verdict_ok = (1.5..=2.5).contains(&ratio);
        rows.push(if verdict_ok {
            CheckRow::le("defect_halves_under_refinement", ratio, 2.5, Provenance::Derived)
        } else {
            CheckRow {
                name: "defect_halves_under_refinement".into(),
                measured: ratio,
                threshold: 2.0,
                provenance: Provenance::Derived,
                verdict: Verdict::Fail,
            }
        });
    }

    let perturbed = perturb(&fine_mu, 1e-3, seed.wrapping_add(7))?;
    let control = symmetry_defect(&perturbed, &fine_cfg)?;
    rows.push(CheckRow::ge(
        "asymmetric_control_ratio",
        control.max_defect / fine.max_defect.max(1e-15),
        10.0,
        Provenance::Derived,
    ));

    // Line fixture for the two-point residual; lambda = 1, threshold above
    // (1000*sqrt(2))^1.
    let line = generate(
        &GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 20.0,
            grid_step: 0.05,
        },
        1,
    )?;
    let line_cfg = SymmetryConfig::new(2, 1.0, 2000.0, vec![1.0], vec![0], vec![10.0])?;
    let origin = [0.0, 0.0];
    let at_origin =
        mattila_preiss_residual(&line, &origin, &origin, 0.4, 5, 1.0, &line_cfg)?;
    rows.push(CheckRow::le(
        "residual_at_origin",
        at_origin.sup_residual,
        1e-15,
        Provenance::Exact,
    ));

    let x = [0.05, 0.0];
    let radii = [0.2, 0.4, 0.8];
    let res: Vec<f64> = radii
        .iter()
        .map(|&r| {
            mattila_preiss_residual(&line, &origin, &x, r, 5, 1.0, &line_cfg)
                .map(|rep| rep.sup_residual)
        })
        .collect::<Result<_>>()?;
    if res.iter().all(|&v| v < 1e-15) {
        rows.push(CheckRow::vacuous(
            "residual_decreasing_in_r",
            res[0],
            1.0,
            Provenance::Derived,
        ));
    } else {
        let mut worst = 0.0f64;
        for w in res.windows(2) {
            worst = worst.max(w[1] / w[0].max(f64::MIN_POSITIVE));
        }
        rows.push(CheckRow::le(
            "residual_decreasing_in_r",
            worst,
            1.0,
            Provenance::Derived,
        ));
    }
    Ok(rows)
}

fn suite_growth_identity(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measures = family_fixtures()?;
    for _ in 0..5 {
        let d = 2 + (rng.gen_range(0..2) as usize);
        measures.push(random_cloud(&mut rng, d, 40, 1.2));
    }
    let mut worst = 0.0f64;
    for mu in &measures {
        let diam = mu.diam();
        let mass = mu.total_mass();
        for i in 0..mu.len().min(3) {
            let origin = mu.point(i).to_vec();
            for frac in [0.3, 1.0] {
                let r = frac * diam;
                let defect = growth_identity_check(mu, &origin, r)?;
                worst = worst.max(defect * r / (mass * diam));
            }
        }
    }
    Ok(vec![CheckRow::le(
        "growth_identity_defect",
        worst,
        1e-12,
        Provenance::Derived,
    )])
}

/// Down-filter lemma checks for one fixture; returns (rows, dominated-energy
/// fraction of the finer generation). The retained fraction is 0 on these
/// fixtures (every coarse cube is dominated), so the nontrivial regression
/// quantity is how much finer-generation energy the bunches engage.
fn down_filter_case(
    tag: &str,
    mu: &DiscreteMeasure,
    g_levels: (i32, i32),
    gp_levels: (i32, i32),
    cfg: &FilterConfig,
) -> Result<(Vec<CheckRow>, f64)> {
    let lat = DyadicLattice::standard(mu.dim());
    let g: Vec<_> = charged_cubes(mu, &lat, g_levels.0, g_levels.1)?
        .into_iter()
        .map(|(q, _)| q)
        .collect();
    let gp: Vec<_> = charged_cubes(mu, &lat, gp_levels.0, gp_levels.1)?
        .into_iter()
        .map(|(q, _)| q)
        .collect();
    let rep = verify_down_lemmas(mu, &lat, &g, &gp, cfg)?;
    let mut rows = vec![
        CheckRow::le(
            &format!("{tag}_dominated_le_majorant"),
            rep.dominated_sum,
            rep.majorant,
            Provenance::Exact,
        ),
        CheckRow::le(
            &format!("{tag}_inner_sum_vs_pinned"),
            rep.inner_sup,
            c_inner(mu.dim(), cfg.eps),
            Provenance::Pinned,
        ),
    ];
    // Re-verify every claimed bunch from scratch.
    let mut reverify_failures = 0usize;
    let mut dominated = 0usize;
    for row in g_down(mu, &lat, &g, &gp, cfg)? {
        if row.dominated {
            dominated += 1;
            match find_bunch_below(mu, &lat, &row.cube, &gp, cfg)? {
                Some(bunch) => {
                    if verify_bunch(mu, &lat, &row.cube, &bunch.cubes, cfg).is_err() {
                        reverify_failures += 1;
                    }
                }
                None => reverify_failures += 1,
            }
        }
    }
    rows.push(CheckRow::le(
        &format!("{tag}_bunch_reverify_failures"),
        reverify_failures as f64,
        0.0,
        Provenance::Exact,
    ));
    rows.push(CheckRow::ge(
        &format!("{tag}_dominated_cubes"),
        dominated as f64,
        1.0,
        Provenance::Derived,
    ));
    Ok((rows, rep.dominated_ratio))
}

fn suite_filters(seed: u64) -> Result<Vec<CheckRow>> {
    let cal = calibration()?;
    let mut rows = Vec::new();

    // Four-corner Cantor, generation 5 (1024 atoms, s = 1).
    let cantor = generate(&GeneratorSpec::CantorFourCorner { generation: 5 }, 1)?;
    let cfg1 = FilterConfig::defaults(1.0)?;
    let (cantor_rows, cantor_ratio) =
        down_filter_case("cantor5", &cantor, (-1, 0), (-3, -2), &cfg1)?;
    rows.extend(cantor_rows);
    rows.push(CheckRow::close(
        "cantor5_dominated_ratio_regression",
        cantor_ratio,
        cal.down_filter.cantor5_dominated_ratio,
        1e-6,
    ));

    // Lipschitz graph fixture; the generator seed is fixed so the calibrated
    // regression value refers to a reproducible measure.
    let graph = generate(
        &GeneratorSpec::LipschitzGraph {
            dim: 2,
            n: 1,
            lip_const: 0.3,
            extent: 2.0,
            grid_step: 0.03125,
        },
        11,
    )?;
    let (graph_rows, graph_ratio) = down_filter_case("graph", &graph, (-1, 0), (-4, -2), &cfg1)?;
    rows.extend(graph_rows);
    rows.push(CheckRow::close(
        "graph_dominated_ratio_regression",
        graph_ratio,
        cal.down_filter.graph_dominated_ratio,
        1e-6,
    ));

    // From-above filter on a non-integer-s self-similar Cantor set.
    let selfsim = generate(
        &GeneratorSpec::CantorSelfSimilar {
            dim: 2,
            contraction_ratio: 0.3,
            generation: 4,
        },
        1,
    )?;
    let cfg_ss = FilterConfig::defaults(selfsim.s())?;
    let lat2 = DyadicLattice::standard(2);
    let up_rows = up_filter(&selfsim, &lat2, &cfg_ss, -7, 0)?;
    let up_rep = verify_up_lemma(&selfsim, &lat2, &up_rows, &cfg_ss)?;
    rows.push(CheckRow::le(
        "up_dominated_le_majorant",
        up_rep.dominated_sum,
        up_rep.majorant,
        Provenance::Exact,
    ));
    rows.push(CheckRow::ge(
        "up_bracket_within_pinned",
        if up_rep.bracket_ok { 1.0 } else { 0.0 },
        1.0,
        Provenance::Pinned,
    ));

    // Greedy never beats the exact branch-and-bound selection.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1ec7);
    let mut greedy_excess = f64::NEG_INFINITY;
    for _ in 0..40 {
        let k = rng.gen_range(6..=20);
        let mut gains: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let vols: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mut conflict = vec![vec![false; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                if rng.gen_range(0.0..1.0) < 0.3 {
                    conflict[a][b] = true;
                    conflict[b][a] = true;
                }
            }
        }
        let exact: f64 = best_subset_exact(&gains, &conflict)
            .iter()
            .map(|&i| gains[i])
            .sum();
        let greedy: f64 = best_subset_greedy(&gains, &vols, &conflict)
            .iter()
            .map(|&i| gains[i])
            .sum();
        greedy_excess = greedy_excess.max(greedy - exact);
    }
    rows.push(CheckRow::le(
        "greedy_le_exact",
        greedy_excess,
        1e-12,
        Provenance::Exact,
    ));

    // Density/flatness doubling display along ancestors of up-filter
    // survivors on a perturbed line.
    let base = generate(
        &GeneratorSpec::PlanePatch {
            dim: 2,
            n: 1,
            extent: 2.0,
            grid_step: 0.02,
        },
        1,
    )?;
    let line = perturb(&base, 1e-4, 3)?;
    let line_rows = up_filter(&line, &lat2, &cfg1, -5, -2)?;
    let mut doub_failures = 0usize;
    let mut doub_checked = 0usize;
    for r in line_rows.iter().filter(|r| r.in_up && r.upsilon > 0.0).take(5) {
        for row in densbetadoub_check(&line, &lat2, &r.cube, &cfg1, -2)? {
            if !(row.mono_ok && row.lower_ok && row.upper_ok && row.beta_ok.unwrap_or(true)) {
                doub_failures += 1;
            }
            doub_checked += 1;
        }
    }
    rows.push(CheckRow::le(
        "doubling_display_failures",
        doub_failures as f64,
        0.0,
        Provenance::Derived,
    ));
    rows.push(CheckRow::ge(
        "doubling_display_checked",
        doub_checked as f64,
        1.0,
        Provenance::Derived,
    ));
    Ok(rows)
}

fn suite_pruning(seed: u64) -> Result<Vec<CheckRow>> {
    let cal = calibration()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0f64;
    let mut max_ceiling_frac = 0.0f64;
    let mut pointwise_failures = 0usize;
    let mut branch_failures = 0usize;
    let mut pointwise_checked_total = 0usize;
    let big_r = 1.0;
    for i in 0..50 {
        let d = 2 + (i % 2);
        let n = 1 + if d == 3 { i % 2 } else { 0 };
        let s = n as f64 + 0.3 * rng.gen_range(0.0..1.0);
        let n_pts = 50;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for j in 0..n_pts {
            // A few atoms sit well off the plane so the strip complement is
            // nonempty and the pointwise field bound actually fires.
            let outlier = j >= n_pts - 5;
            for k in 0..d {
                if k < n {
                    coords.push(rng.gen_range(-0.9..0.9));
                } else if outlier && k == n {
                    let mag = rng.gen_range(0.1..0.25);
                    coords.push(if rng.gen_range(0.0..1.0) < 0.5 { mag } else { -mag });
                } else {
                    coords.push(rng.gen_range(-0.005..0.005));
                }
            }
            weights.push(rng.gen_range(0.5..1.5));
        }
        let mu = DiscreteMeasure::new(d, s, coords, weights)?;
        let mut basis = Vec::new();
        for j in 0..n {
            let mut v = vec![0.0; d];
            v[j] = 1.0;
            basis.push(v);
        }
        let plane = AffinePlane {
            base: vec![0.0; d],
            basis,
        };
        // Hypothesis budget measured from the instance itself, with margin.
        let origin = vec![0.0; d];
        let ball = mu.ball_mass(&origin, big_r)?;
        let mut hyp = 0.0f64;
        for j in 0..mu.len() {
            let p = mu.point(j);
            let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 10.0 * big_r {
                let dv = plane.distance(p) / big_r;
                hyp += mu.weight(j) * dv * dv;
            }
        }
        let beta = (hyp / ball).sqrt() * 1.2 + 1e-9;
        let rep = pruning_check(&mu, &plane, big_r, beta, cal.pruning.delta, 8)?;
        if rep.mass_conditions_ok && !rep.pointwise_ok {
            pointwise_failures += 1;
        }
        pointwise_checked_total += rep.pointwise_checked;
        if !(rep.branch_energy || rep.branch_tail) {
            branch_failures += 1;
        }
        if rep.lhs > 0.0 && rep.rhs > 0.0 {
            max_ratio = max_ratio.max(rep.ratio);
            max_ceiling_frac = max_ceiling_frac.max(rep.ratio / c_prune_ceiling(s));
        }
    }
    Ok(vec![
        CheckRow::le(
            "pointwise_bound_failures",
            pointwise_failures as f64,
            0.0,
            Provenance::Exact,
        ),
        CheckRow::ge(
            "pointwise_checks_ran",
            pointwise_checked_total as f64,
            1.0,
            Provenance::Derived,
        ),
        CheckRow::le(
            "branch_dichotomy_failures",
            branch_failures as f64,
            0.0,
            Provenance::Derived,
        ),
        CheckRow::le("ratio_vs_ceiling", max_ceiling_frac, 1.0, Provenance::Derived),
        CheckRow::le(
            "ratio_vs_calibrated",
            max_ratio,
            cal.pruning.c_prune,
            Provenance::Calibrated,
        ),
    ])
}

fn suite_trends(_seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let lat = DyadicLattice::standard(2);

    // Four-corner Cantor: flatness-weighted energy per unit mass grows
    // log-like with generation (one new block of scales per generation).
    let mut vals = Vec::new();
    for g in 3..=6 {
        let mu = generate(&GeneratorSpec::CantorFourCorner { generation: g }, 1)?;
        vals.push(carleson_sweep(&mu, &lat, EnergyKind::Jones, -2, 0)?.sup_ratio);
    }
    let incs: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    rows.push(CheckRow::ge(
        "cantor_jones_increasing",
        incs.iter().cloned().fold(f64::INFINITY, f64::min),
        1e-9,
        Provenance::Derived,
    ));
    let mut inc_spread = 1.0f64;
    for w in incs.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            inc_spread = inc_spread.max(w[1] / w[0]).max(w[0] / w[1]);
        }
    }
    rows.push(CheckRow::le(
        "cantor_jones_increment_spread",
        inc_spread,
        2.0,
        Provenance::Derived,
    ));

    // Lipschitz graph under one 2x refinement: bounded, Carleson-consistent.
    let mut graph_vals = Vec::new();
    for step in [0.0625, 0.03125] {
        let mu = generate(
            &GeneratorSpec::LipschitzGraph {
                dim: 2,
                n: 1,
                lip_const: 0.3,
                extent: 2.0,
                grid_step: step,
            },
            11,
        )?;
        graph_vals.push(carleson_sweep(&mu, &lat, EnergyKind::Jones, -2, 0)?.sup_ratio);
    }
    let graph_ratio = graph_vals[1] / graph_vals[0].max(f64::MIN_POSITIVE);
    rows.push(CheckRow::le(
        "graph_refinement_ratio_upper",
        graph_ratio,
        2.0,
        Provenance::Derived,
    ));
    rows.push(CheckRow::ge(
        "graph_refinement_ratio_lower",
        graph_ratio,
        0.5,
        Provenance::Derived,
    ));

    // Non-integer-s self-similar Cantor: density energy per unit mass grows
    // with generation.
    let mut ss_vals = Vec::new();
    for g in 2..=4 {
        let mu = generate(
            &GeneratorSpec::CantorSelfSimilar {
                dim: 2,
                contraction_ratio: 0.3,
                generation: g,
            },
            1,
        )?;
        ss_vals.push(carleson_sweep(&mu, &lat, EnergyKind::Wolff, -2, 0)?.sup_ratio);
    }
    rows.push(CheckRow::ge(
        "selfsim_wolff_increasing",
        ss_vals
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min),
        1e-9,
        Provenance::Derived,
    ));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("no_such_suite", 0).is_err());
    }

    #[test]
    fn suite_names_all_dispatch() {
        // Cheap structural check: every name is distinct.
        let mut names = SUITE_NAMES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), SUITE_NAMES.len());
    }

    #[test]
    fn sandwich_suite_passes() {
        let rep = run_suite("sandwich", 0).unwrap();
        assert!(rep.passed(), "rows: {:?}", rep.rows);
    }

    #[test]
    fn overlap_suite_passes() {
        let rep = run_suite("overlap", 0).unwrap();
        assert!(rep.passed(), "rows: {:?}", rep.rows);
    }

    #[test]
    fn sign_decomposition_suite_passes() {
        let rep = run_suite("sign_decomposition", 0).unwrap();
        assert!(rep.passed(), "rows: {:?}", rep.rows);
    }

    #[test]
    fn growth_identity_suite_passes() {
        let rep = run_suite("growth_identity", 0).unwrap();
        assert!(rep.passed(), "rows: {:?}", rep.rows);
    }

    #[test]
    fn symmetry_suite_passes_with_vacuous_refinement_row() {
        let rep = run_suite("symmetry", 0).unwrap();
        assert!(rep.passed(), "rows: {:?}", rep.rows);
        let refinement = rep
            .rows
            .iter()
            .find(|r| r.name == "defect_halves_under_refinement")
            .unwrap();
        assert_eq!(refinement.verdict, Verdict::Vacuous);
    }
}
