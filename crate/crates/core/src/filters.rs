//! Lattice filters: domination from below by bunches of finer cubes,
//! domination from above by a cube function, the low-dimensional-density
//! cube set, their summation lemmas, and the pruning check with its
//! alternative. Also the squash map that stretches a measure away from a
//! plane.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::coeffs::{beta_cube, AffinePlane};
use crate::error::{Error, Result};
use crate::lattice::{
    ball_containments, cube_ratio, density, smoothed_cube_mass, triple_balls_disjoint,
    ContainmentMode, DyadicCube, DyadicLattice,
};
use crate::measure::{dist, DiscreteMeasure};
use crate::sqfn::{field, log_nodes};
use crate::sum::CompensatedSum;

/// Cube functional used by the from-above filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsilonKind {
    /// β(Q)·D(Q); only meaningful for integer s.
    BetaTimesDensity,
    /// D(Q).
    Density,
}

/// Shared filter parameters.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub s: f64,
    /// n = ⌈s⌉ − 1, the reduced dimension for the low-density filter.
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub m: u32,
    pub upsilon: UpsilonKind,
}

fn is_integer(s: f64) -> bool {
    (s - s.round()).abs() < 1e-12
}

impl FilterConfig {
    pub fn new(s: f64, eps: f64, delta: f64, m: u32, upsilon: UpsilonKind) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::Validation("s must be positive".into()));
        }
        if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Validation("eps and delta must lie in (0,1)".into()));
        }
        if m == 0 {
            return Err(Error::Validation("ancestor depth M must be positive".into()));
        }
        let n = s.ceil() as usize - 1;
        if !(n as f64 + 2.0 * delta + eps < s) {
            return Err(Error::Validation(format!(
                "need n + 2*delta + eps < s; got {} + {} + {} vs {s}",
                n,
                2.0 * delta,
                eps
            )));
        }
        if !(s + 2.0 * eps < s.floor() + 1.0) {
            return Err(Error::Validation(format!(
                "need s + 2*eps < floor(s) + 1; got {} vs {}",
                s + 2.0 * eps,
                s.floor() + 1.0
            )));
        }
        if upsilon == UpsilonKind::BetaTimesDensity && !is_integer(s) {
            return Err(Error::Validation(
                "the beta-weighted cube functional requires integer s".into(),
            ));
        }
        Ok(FilterConfig { s, n, eps, delta, m, upsilon })
    }

    /// Recorded defaults: eps = 0.05, delta = 0.4·(s − n − eps), M = 6,
    /// the functional flavor chosen by whether s is an integer.
    pub fn defaults(s: f64) -> Result<Self> {
        let eps = 0.05;
        if !(s > eps) {
            return Err(Error::Validation("s too small for default parameters".into()));
        }
        let n = s.ceil() - 1.0;
        let delta = 0.4 * (s - n - eps);
        let upsilon = if is_integer(s) {
            UpsilonKind::BetaTimesDensity
        } else {
            UpsilonKind::Density
        };
        FilterConfig::new(s, eps, delta, 6, upsilon)
    }
}

/// I_μ(Q) and D_μ(Q) = I_μ(Q)/ℓ(Q)^s for a cube.
fn cube_stats(mu: &DiscreteMeasure, lat: &DyadicLattice, q: &DyadicCube) -> (f64, f64) {
    let i = smoothed_cube_mass(mu, lat, q);
    (i, i / q.side().powf(mu.s()))
}

/// A certified dominating bunch for some cube Q: finer cubes of strictly
/// higher density (condition 1), with disjoint triple balls (2) contained in
/// 3B_Q (3), whose discounted quadratic gain exceeds D(Q)²I(Q) (4).
#[derive(Debug, Clone)]
pub struct DominationBunch {
    pub cubes: Vec<DyadicCube>,
    pub gain: f64,
    pub target: f64,
    /// True when the disjoint-ball selection was solved exactly.
    pub exact: bool,
}

/// Re-verify all four bunch conditions from scratch. No trust is placed in
/// the search that produced the bunch.
pub fn verify_bunch(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    cubes: &[DyadicCube],
    cfg: &FilterConfig,
) -> Result<()> {
    if cubes.is_empty() {
        return Err(Error::HypothesisViolated("empty bunch".into()));
    }
    let (iq, dq) = cube_stats(mu, lat, q);
    let mut gain = CompensatedSum::new();
    for (a, qa) in cubes.iter().enumerate() {
        if qa == q {
            return Err(Error::HypothesisViolated("trivial bunch member".into()));
        }
        let m = cube_ratio(q, qa);
        let (ia, da) = cube_stats(mu, lat, qa);
        if !(da > (cfg.eps * m).exp2() * dq) {
            return Err(Error::HypothesisViolated(format!(
                "density growth fails for member {a}"
            )));
        }
        if !ball_containments(qa, q, ContainmentMode::TripleInTriple) {
            return Err(Error::HypothesisViolated(format!(
                "triple ball of member {a} escapes 3B_Q"
            )));
        }
        for qb in &cubes[a + 1..] {
            if !triple_balls_disjoint(qa, qb) {
                return Err(Error::HypothesisViolated(
                    "triple balls of bunch members overlap".into(),
                ));
            }
        }
        gain.add(da * da * (-2.0 * cfg.eps * m).exp2() * ia);
    }
    if !(gain.total() > dq * dq * iq) {
        return Err(Error::HypothesisViolated("bunch gain does not exceed target".into()));
    }
    Ok(())
}

/// Exact maximum-gain selection among pairwise-compatible candidates.
/// Indices are pre-sorted by gain descending; prunes on suffix totals.
pub(crate) fn best_subset_exact(gains: &[f64], conflict: &[Vec<bool>]) -> Vec<usize> {
    let k = gains.len();
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + gains[i];
    }
    let mut best = Vec::new();
    let mut best_gain = 0.0;
    let mut chosen: Vec<usize> = Vec::new();
    fn rec(
        i: usize,
        cur: f64,
        gains: &[f64],
        conflict: &[Vec<bool>],
        suffix: &[f64],
        chosen: &mut Vec<usize>,
        best: &mut Vec<usize>,
        best_gain: &mut f64,
    ) {
        if cur > *best_gain {
            *best_gain = cur;
            *best = chosen.clone();
        }
        if i == gains.len() || cur + suffix[i] <= *best_gain {
            return;
        }
        if chosen.iter().all(|&j| !conflict[j][i]) {
            chosen.push(i);
            rec(i + 1, cur + gains[i], gains, conflict, suffix, chosen, best, best_gain);
            chosen.pop();
        }
        rec(i + 1, cur, gains, conflict, suffix, chosen, best, best_gain);
    }
    rec(0, 0.0, gains, conflict, &suffix, &mut chosen, &mut best, &mut best_gain);
    best
}

/// Greedy selection by gain density (gain per cube volume) followed by
/// swap improvement: any compatible candidate is inserted, and a candidate
/// replaces up to two conflicting members when it carries more gain.
pub(crate) fn best_subset_greedy(gains: &[f64], vols: &[f64], conflict: &[Vec<bool>]) -> Vec<usize> {
    let k = gains.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        (gains[b] / vols[b]).partial_cmp(&(gains[a] / vols[a])).unwrap().then(a.cmp(&b))
    });
    let mut selected = vec![false; k];
    loop {
        let mut changed = false;
        for &c in &order {
            if selected[c] {
                continue;
            }
            let conflicts: Vec<usize> =
                (0..k).filter(|&j| selected[j] && conflict[j][c]).collect();
            if conflicts.is_empty() {
                selected[c] = true;
                changed = true;
            } else if conflicts.len() <= 2
                && gains[c] > conflicts.iter().map(|&j| gains[j]).sum::<f64>()
            {
                for &j in &conflicts {
                    selected[j] = false;
                }
                selected[c] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..k).filter(|&i| selected[i]).collect()
}

/// Threshold above which the disjoint-ball selection falls back to the
/// greedy heuristic.
pub const EXACT_SEARCH_LIMIT: usize = 24;

/// Search for a bunch of candidate cubes dominating `q` from below.
/// Absence of a bunch is a normal result. Any returned bunch has been
/// independently re-verified.
pub fn find_bunch_below(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    candidates: &[DyadicCube],
    cfg: &FilterConfig,
) -> Result<Option<DominationBunch>> {
    let (iq, dq) = cube_stats(mu, lat, q);
    let target = dq * dq * iq;

    let mut seen: BTreeMap<&DyadicCube, ()> = BTreeMap::new();
    let mut survivors: Vec<(&DyadicCube, f64, f64)> = Vec::new();
    let mut sup_d = dq;
    for c in candidates {
        if c == q || seen.insert(c, ()).is_some() {
            continue;
        }
        let (ic, dc) = cube_stats(mu, lat, c);
        sup_d = sup_d.max(dc);
        let m = cube_ratio(q, c);
        if dc > (cfg.eps * m).exp2() * dq
            && ball_containments(c, q, ContainmentMode::TripleInTriple)
        {
            let g = dc * dc * (-2.0 * cfg.eps * m).exp2() * ic;
            if g > 0.0 {
                survivors.push((c, g, c.side().powi(mu.dim() as i32)));
            }
        }
    }
    if survivors.is_empty() {
        return Ok(None);
    }
    // Any participant's level gap is limited by its density surplus.
    if dq > 0.0 {
        let window = (sup_d / dq).log2() / cfg.eps;
        for (c, _, _) in &survivors {
            assert!(cube_ratio(q, c) <= window + 1e-9, "candidate outside the level window");
        }
    }

    survivors.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
    let gains: Vec<f64> = survivors.iter().map(|t| t.1).collect();
    let vols: Vec<f64> = survivors.iter().map(|t| t.2).collect();
    let conflict: Vec<Vec<bool>> = (0..survivors.len())
        .map(|i| {
            (0..survivors.len())
                .map(|j| i != j && !triple_balls_disjoint(survivors[i].0, survivors[j].0))
                .collect()
        })
        .collect();

    let exact = survivors.len() <= EXACT_SEARCH_LIMIT;
    let picked = if exact {
        best_subset_exact(&gains, &conflict)
    } else {
        best_subset_greedy(&gains, &vols, &conflict)
    };
    let gain: f64 = {
        let mut s = CompensatedSum::new();
        for &i in &picked {
            s.add(gains[i]);
        }
        s.total()
    };
    if !(gain > target) {
        return Ok(None);
    }
    let cubes: Vec<DyadicCube> = picked.iter().map(|&i| survivors[i].0.clone()).collect();
    verify_bunch(mu, lat, q, &cubes, cfg)?;
    Ok(Some(DominationBunch { cubes, gain, target, exact }))
}

/// Per-cube outcome of the from-below filter.
#[derive(Debug, Clone)]
pub struct DownRow {
    pub cube: DyadicCube,
    pub dominated: bool,
    /// False when the bunch search used the greedy fallback; an undominated
    /// verdict is then heuristic (a bunch could exist that the greedy
    /// search missed).
    pub exact: bool,
    pub gain: f64,
    pub target: f64,
}

/// The from-below filter: rows for every Q in `g`, with `dominated = false`
/// marking membership in the filtered set. Candidates are drawn from
/// `g_prime`; the trivial bunch {Q} is excluded.
pub fn g_down(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    g: &[DyadicCube],
    g_prime: &[DyadicCube],
    cfg: &FilterConfig,
) -> Result<Vec<DownRow>> {
    g.par_iter()
        .map(|q| {
            let (iq, dq) = cube_stats(mu, lat, q);
            match find_bunch_below(mu, lat, q, g_prime, cfg)? {
                Some(b) => Ok(DownRow {
                    cube: q.clone(),
                    dominated: true,
                    exact: b.exact,
                    gain: b.gain,
                    target: b.target,
                }),
                None => Ok(DownRow {
                    cube: q.clone(),
                    dominated: false,
                    exact: g_prime.len() <= EXACT_SEARCH_LIMIT + 1,
                    gain: 0.0,
                    target: dq * dq * iq,
                }),
            }
        })
        .collect()
}

/// Pinned bound for the discounted ancestor sum
/// Σ_{Q: 3B_Q ⊃ 3B_P} 2^{−2ε[Q:P]}: at each level gap the number of cubes
/// whose triple ball can contain 3B_P is at most (24√d + 2)^d.
pub fn c_inner(dim: usize, eps: f64) -> f64 {
    (24.0 * (dim as f64).sqrt() + 2.0).powi(dim as i32) / (1.0 - (-2.0 * eps).exp2())
}

/// Both summation-lemma ratios for the from-below filter, together with the
/// proof's explicit majorant and its pinned inner-sum bound.
#[derive(Debug, Clone)]
pub struct DownLemmaReport {
    /// Σ over undominated cubes of D²I.
    pub down_sum: f64,
    /// Σ over all of `g` of D²I.
    pub g_sum: f64,
    /// down_sum / g_sum (the retained fraction; NaN when vacuous).
    pub down_ratio: f64,
    /// Σ over dominated cubes of D²I.
    pub dominated_sum: f64,
    /// Σ over `g_prime` of D²I.
    pub g_prime_sum: f64,
    /// dominated_sum / g_prime_sum (NaN when vacuous).
    pub dominated_ratio: f64,
    /// Σ_{P∈g_prime} D(P)²I(P)·[Σ_{Q∈g: 3B_Q ⊃ 3B_P} 2^{−2ε[Q:P]}].
    pub majorant: f64,
    /// Largest inner discounted ancestor sum over P.
    pub inner_sup: f64,
    /// Pinned bound for the inner sum.
    pub inner_bound: f64,
    pub vacuous: bool,
    /// True if any membership verdict used the greedy fallback.
    pub heuristic: bool,
}

/// Compute both sides of the two summation lemmas and the proof majorant.
pub fn verify_down_lemmas(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    g: &[DyadicCube],
    g_prime: &[DyadicCube],
    cfg: &FilterConfig,
) -> Result<DownLemmaReport> {
    let rows = g_down(mu, lat, g, g_prime, cfg)?;
    let mut down_sum = CompensatedSum::new();
    let mut g_sum = CompensatedSum::new();
    let mut dominated_sum = CompensatedSum::new();
    let mut heuristic = false;
    for r in &rows {
        let (i, d) = cube_stats(mu, lat, &r.cube);
        g_sum.add(d * d * i);
        if r.dominated {
            dominated_sum.add(d * d * i);
        } else {
            down_sum.add(d * d * i);
        }
        heuristic |= !r.exact;
    }
    let mut g_prime_sum = CompensatedSum::new();
    let mut majorant = CompensatedSum::new();
    let mut inner_sup = 0.0f64;
    for p in g_prime {
        let (ip, dp) = cube_stats(mu, lat, p);
        g_prime_sum.add(dp * dp * ip);
        let mut inner = CompensatedSum::new();
        for q in g {
            if ball_containments(p, q, ContainmentMode::TripleInTriple) {
                inner.add((-2.0 * cfg.eps * cube_ratio(q, p)).exp2());
            }
        }
        inner_sup = inner_sup.max(inner.total());
        majorant.add(dp * dp * ip * inner.total());
    }
    let vacuous = !(g_sum.total() > 0.0) || !(g_prime_sum.total() > 0.0);
    Ok(DownLemmaReport {
        down_sum: down_sum.total(),
        g_sum: g_sum.total(),
        down_ratio: down_sum.total() / g_sum.total(),
        dominated_sum: dominated_sum.total(),
        g_prime_sum: g_prime_sum.total(),
        dominated_ratio: dominated_sum.total() / g_prime_sum.total(),
        majorant: majorant.total(),
        inner_sup,
        inner_bound: c_inner(mu.dim(), cfg.eps),
        vacuous,
        heuristic,
    })
}

/// Enumerate lattice cubes at `level` whose center lies within `radius` of
/// `x`, by scanning the exact index window coordinate-wise.
fn cubes_near(
    lat: &DyadicLattice,
    x: &[f64],
    level: i32,
    radius: f64,
) -> Vec<DyadicCube> {
    let d = lat.dim();
    let ell = crate::lattice::exp2i(level);
    let mut lo = vec![0i64; d];
    let mut span = vec![0i64; d];
    for j in 0..d {
        let rel = (x[j] - lat.origin()[j]) / ell;
        lo[j] = (rel - radius / ell - 0.5).floor() as i64;
        span[j] = ((rel + radius / ell - 0.5).ceil() as i64 - lo[j]).max(0) + 1;
    }
    let mut out = Vec::new();
    let mut idx = lo.clone();
    'outer: loop {
        let q = DyadicCube { level, index: idx.clone() };
        if dist(&lat.center(&q), x) <= radius {
            out.push(q);
        }
        for j in 0..d {
            idx[j] += 1;
            if idx[j] < lo[j] + span[j] {
                continue 'outer;
            }
            idx[j] = lo[j];
        }
        break;
    }
    out
}

/// The set of charged cubes Q in the level range whose (n+δ)-density is not
/// beaten by any cube Q′ with B_{Q′} ⊃ B_Q and level gap at most M.
/// Exact membership: ancestor levels are enumerated exhaustively.
pub fn d_m_set(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    cfg: &FilterConfig,
    level_min: i32,
    level_max: i32,
) -> Result<Vec<DyadicCube>> {
    let charged = crate::lattice::charged_cubes(mu, lat, level_min, level_max)?;
    let p = cfg.n as f64 + cfg.delta;
    let mut out = Vec::new();
    'cube: for (q, _) in &charged {
        let own = density(mu, lat, q, p)?;
        let xq = lat.center(q);
        for m in 1..=cfg.m as i32 {
            let level = q.level + m;
            // B_{Q′} ⊃ B_Q forces |x_{Q′} − x_Q| ≤ 4√d(ℓ′ − ℓ) < 4√d ℓ′.
            let reach = 4.0 * (mu.dim() as f64).sqrt() * crate::lattice::exp2i(level);
            for anc in cubes_near(lat, &xq, level, reach) {
                if ball_containments(q, &anc, ContainmentMode::Contains)
                    && density(mu, lat, &anc, p)? > own * (1.0 + 1e-12)
                {
                    continue 'cube;
                }
            }
        }
        out.push(q.clone());
    }
    Ok(out)
}

/// Per-cube outcome of the from-above filter.
#[derive(Debug, Clone)]
pub struct UpRow {
    pub cube: DyadicCube,
    pub upsilon: f64,
    /// True when no cube in the range dominates this one from above.
    pub in_up: bool,
}

fn upsilon_value(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    cfg: &FilterConfig,
) -> Result<f64> {
    let (_, d) = cube_stats(mu, lat, q);
    match cfg.upsilon {
        UpsilonKind::Density => Ok(d),
        UpsilonKind::BetaTimesDensity => {
            let beta = match beta_cube(mu, lat, q, cfg.s.round() as usize) {
                Ok(b) => b.value,
                Err(Error::UndefinedBeta(_)) => 0.0,
                Err(e) => return Err(e),
            };
            Ok(beta * d)
        }
    }
}

/// The from-above filter over the charged cubes of the level range:
/// Q′ dominates Q when ½B_{Q′} ⊃ B_Q and Υ(Q′) > 2^{ε[Q′:Q]}Υ(Q); rows mark
/// the cubes with no dominator. Exact enumeration over the range.
pub fn up_filter(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    cfg: &FilterConfig,
    level_min: i32,
    level_max: i32,
) -> Result<Vec<UpRow>> {
    let charged = crate::lattice::charged_cubes(mu, lat, level_min, level_max)?;
    let ups: Vec<f64> = charged
        .iter()
        .map(|(q, _)| upsilon_value(mu, lat, q, cfg))
        .collect::<Result<_>>()?;
    let rows = charged
        .iter()
        .enumerate()
        .map(|(i, (q, _))| {
            let dominated = charged.iter().enumerate().any(|(j, (qp, _))| {
                i != j
                    && ball_containments(q, qp, ContainmentMode::HalfContains)
                    && ups[j] > (cfg.eps * cube_ratio(qp, q)).exp2() * ups[i]
            });
            UpRow { cube: q.clone(), upsilon: ups[i], in_up: !dominated }
        })
        .collect();
    Ok(rows)
}

/// Pinned overlap count for the from-above majorant: at a fixed level, the
/// number of cubes whose ball can sit inside ½B_P is at most (8√d + 2)^d.
pub fn c_up(dim: usize) -> f64 {
    (8.0 * (dim as f64).sqrt() + 2.0).powi(dim as i32)
}

/// Summation-lemma report for the from-above filter.
#[derive(Debug, Clone)]
pub struct UpLemmaReport {
    /// Σ over surviving cubes of Υ²I.
    pub up_sum: f64,
    /// Σ over all rows of Υ²I.
    pub total_sum: f64,
    pub ratio: f64,
    /// Σ over dominated cubes of Υ²I.
    pub dominated_sum: f64,
    /// Σ_{P surviving} Σ_{m≥1} 2^{−2εm} Υ(P)² [Σ_{ℓ(Q)=2^{−m}ℓ(P), B_Q ⊂ ½B_P} I(Q)].
    pub majorant: f64,
    /// True when every bracketed mass sum stayed below c_up·I(P).
    pub bracket_ok: bool,
    pub vacuous: bool,
}

/// Compute both sides of the from-above summation lemma and the proof's
/// majorant, exactly over the given rows.
pub fn verify_up_lemma(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    rows: &[UpRow],
    cfg: &FilterConfig,
) -> Result<UpLemmaReport> {
    let mut up_sum = CompensatedSum::new();
    let mut total_sum = CompensatedSum::new();
    let mut dominated_sum = CompensatedSum::new();
    for r in rows {
        let (i, _) = cube_stats(mu, lat, &r.cube);
        let v = r.upsilon * r.upsilon * i;
        total_sum.add(v);
        if r.in_up {
            up_sum.add(v);
        } else {
            dominated_sum.add(v);
        }
    }
    let mut majorant = CompensatedSum::new();
    let mut bracket_ok = true;
    let cup = c_up(mu.dim());
    for p in rows.iter().filter(|r| r.in_up) {
        let (ip, _) = cube_stats(mu, lat, &p.cube);
        let mut by_gap: BTreeMap<i32, CompensatedSum> = BTreeMap::new();
        for q in rows {
            let m = p.cube.level - q.cube.level;
            if m >= 1 && ball_containments(&q.cube, &p.cube, ContainmentMode::HalfContains) {
                let (iq, _) = cube_stats(mu, lat, &q.cube);
                by_gap.entry(m).or_insert_with(CompensatedSum::new).add(iq);
            }
        }
        for (m, bracket) in &by_gap {
            bracket_ok &= bracket.total() <= cup * ip * (1.0 + 1e-12);
            majorant.add(
                (-2.0 * cfg.eps * *m as f64).exp2() * p.upsilon * p.upsilon * bracket.total(),
            );
        }
    }
    let vacuous = !(total_sum.total() > 0.0);
    Ok(UpLemmaReport {
        up_sum: up_sum.total(),
        total_sum: total_sum.total(),
        ratio: up_sum.total() / total_sum.total(),
        dominated_sum: dominated_sum.total(),
        majorant: majorant.total(),
        bracket_ok,
        vacuous,
    })
}

/// One ancestor's verdicts for the density/beta doubling consequences of
/// from-above survival.
#[derive(Debug, Clone)]
pub struct DoubRow {
    pub ancestor: DyadicCube,
    /// I(Q′) ≥ I(Q), the monotonicity used by the lower density bound.
    pub mono_ok: bool,
    /// (ℓ/ℓ′)^s D(Q) ≤ D(Q′).
    pub lower_ok: bool,
    /// D(Q′) ≤ (ℓ′/ℓ)^{s+2ε} D(Q).
    pub upper_ok: bool,
    /// β(Q′) ≤ (ℓ′/ℓ)^{s+ε} β(Q); None when the β branch is skipped.
    pub beta_ok: Option<bool>,
}

/// For a cube surviving the from-above filter (with the β-weighted
/// functional), check the three doubling inequalities against every lattice
/// cube Q′ in the level range with ½B_{Q′} ⊃ B_q.
pub fn densbetadoub_check(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    cfg: &FilterConfig,
    level_max: i32,
) -> Result<Vec<DoubRow>> {
    let (iq, dq) = cube_stats(mu, lat, q);
    let beta_q = if cfg.upsilon == UpsilonKind::BetaTimesDensity {
        match beta_cube(mu, lat, q, cfg.s.round() as usize) {
            Ok(b) => Some(b.value),
            Err(Error::UndefinedBeta(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let beta_branch = matches!(beta_q, Some(b) if b > 0.0);
    let xq = lat.center(q);
    let mut out = Vec::new();
    // ½B_{Q′} ⊃ B_Q needs 2√d ℓ′ ≥ 4√d ℓ, so the gap is at least 2.
    for level in (q.level + 2)..=level_max {
        let reach = 2.0 * (mu.dim() as f64).sqrt() * crate::lattice::exp2i(level);
        for anc in cubes_near(lat, &xq, level, reach) {
            if !ball_containments(q, &anc, ContainmentMode::HalfContains) {
                continue;
            }
            let (ia, da) = cube_stats(mu, lat, &anc);
            let ratio = anc.side() / q.side();
            let slack = 1.0 + 1e-9;
            let mono_ok = ia >= iq / slack;
            let lower_ok = ratio.powf(-cfg.s) * dq <= da * slack;
            let upper_ok = da <= ratio.powf(cfg.s + 2.0 * cfg.eps) * dq * slack;
            let beta_ok = if beta_branch {
                let ba = match beta_cube(mu, lat, &anc, cfg.s.round() as usize) {
                    Ok(b) => b.value,
                    Err(Error::UndefinedBeta(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                Some(ba <= ratio.powf(cfg.s + cfg.eps) * beta_q.unwrap() * slack)
            } else {
                None
            };
            out.push(DoubRow { ancestor: anc, mono_ok, lower_ok, upper_ok, beta_ok });
        }
    }
    Ok(out)
}

/// Derivation ceiling for the pruning ratio: the pointwise field bound
/// |field| ≥ |z_x|·m/(8t^{s+1}) over t ∈ (3R,4R) integrates to at least
/// (z m)²/(64·(4R)^{2s+2})·ln(4/3), so LHS/RHS ≤ 64·4^{2s+2}/ln(4/3).
pub fn c_prune_ceiling(s: f64) -> f64 {
    64.0 * 4.0f64.powf(2.0 * s + 2.0) / (4.0f64 / 3.0).ln()
}

/// Outcome of the pruning inequality and its alternative.
#[derive(Debug, Clone)]
pub struct PruningReport {
    /// Measured hypothesis value (must be ≤ β²).
    pub hypothesis: f64,
    /// (μ(B(0,R))/R^s)² ∫_{B(0,2R)∖strip} (dist/R)² dμ.
    pub lhs: f64,
    /// ∫_{B(0,2R)} ∫_{3R}^{4R} |field|² dt/t dμ.
    pub rhs: f64,
    /// lhs / rhs (NaN when both vanish).
    pub ratio: f64,
    /// Number of (atom, scale, hyperplane) pointwise checks performed.
    pub pointwise_checked: usize,
    /// All pointwise field bounds held whenever the mass conditions did.
    pub pointwise_ok: bool,
    /// The two mass conditions of the derivation held for every hyperplane.
    pub mass_conditions_ok: bool,
    /// Tail ∫_{B(0,2R)∖L_{3β(d−n_L)R}} (dist/R)² dμ for the alternative.
    pub tail: f64,
    /// Alternative branch one: rhs ≥ Δ·β²·(m/R^s)²·m.
    pub branch_energy: bool,
    /// Alternative branch two: tail ≤ (d−n_L)³·ceiling·Δ·β²·m.
    pub branch_tail: bool,
    pub delta: f64,
}

/// Orthonormal complement of the plane's tangent frame.
fn normal_frame(plane: &AffinePlane) -> Vec<Vec<f64>> {
    let d = plane.dim();
    let mut frame: Vec<Vec<f64>> = plane.basis.clone();
    let mut normals = Vec::new();
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for u in &frame {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            frame.push(v.clone());
            normals.push(v);
        }
    }
    normals
}

/// Check the pruning inequality for a measure concentrated near a plane,
/// including the derivation's pointwise field bound, and report which branch
/// of the alternative holds at the given `delta`. Refuses when the flatness
/// hypothesis fails.
pub fn pruning_check(
    mu: &DiscreteMeasure,
    plane: &AffinePlane,
    r: f64,
    beta: f64,
    delta: f64,
    nodes_per_octave: usize,
) -> Result<PruningReport> {
    plane.validate()?;
    if plane.dim() != mu.dim() {
        return Err(Error::Validation("plane dimension mismatch".into()));
    }
    if !(r > 0.0 && beta > 0.0 && delta > 0.0) {
        return Err(Error::Domain("R, beta and delta must be positive".into()));
    }
    let origin = vec![0.0; mu.dim()];
    let mass = mu.ball_mass(&origin, r)?;
    if !(mass > 0.0) {
        return Err(Error::HypothesisViolated("no mass in B(0,R)".into()));
    }
    let s = mu.s();
    let codim = mu.dim() - plane.basis.len();

    let mut hyp = CompensatedSum::new();
    for i in 0..mu.len() {
        let x = mu.point(i);
        if dist(x, &origin) < 10.0 * r {
            let h = plane.distance(x) / r;
            hyp.add(mu.weight(i) * h * h);
        }
    }
    let hypothesis = hyp.total() / mass;
    if hypothesis > beta * beta {
        return Err(Error::HypothesisViolated(format!(
            "flatness hypothesis fails: {hypothesis} > beta^2 = {}",
            beta * beta
        )));
    }

    let mut lhs = CompensatedSum::new();
    let mut tail = CompensatedSum::new();
    for i in 0..mu.len() {
        let x = mu.point(i);
        if dist(x, &origin) >= 2.0 * r {
            continue;
        }
        let h = plane.distance(x);
        if h > 3.0 * beta * r {
            lhs.add(mu.weight(i) * (h / r) * (h / r));
        }
        if h > 3.0 * beta * codim as f64 * r {
            tail.add(mu.weight(i) * (h / r) * (h / r));
        }
    }
    let density_sq = (mass / r.powf(s)) * (mass / r.powf(s));
    let lhs = density_sq * lhs.total();

    let (nodes, dl) = log_nodes(3.0 * r, 4.0 * r, nodes_per_octave.max(4));
    let mut rhs = CompensatedSum::new();
    for i in 0..mu.len() {
        let x = mu.point(i);
        if dist(x, &origin) >= 2.0 * r {
            continue;
        }
        let mut inner = CompensatedSum::new();
        for &t in &nodes {
            let f = field(mu, x, t);
            inner.add(f.iter().map(|a| a * a).sum::<f64>() * dl);
        }
        rhs.add(mu.weight(i) * inner.total());
    }
    let rhs = rhs.total();

    // Pointwise derivation check, one hyperplane per normal direction.
    let normals = normal_frame(plane);
    let mut pointwise_checked = 0usize;
    let mut pointwise_ok = true;
    let mut mass_conditions_ok = true;
    for e in &normals {
        let z = |x: &[f64]| -> f64 {
            x.iter().zip(&plane.base).zip(e).map(|((a, b), c)| (a - b) * c).sum()
        };
        for sign in [1.0f64, -1.0] {
            // Chebyshev strip condition and the far-tail first moment.
            let mut strip = CompensatedSum::new();
            let mut tail_moment = CompensatedSum::new();
            for i in 0..mu.len() {
                let x = mu.point(i);
                let zx = sign * z(x);
                if dist(x, &origin) < r && zx >= 2.0 * beta * r {
                    strip.add(mu.weight(i));
                }
                if dist(x, &origin) < 10.0 * r && zx > 3.0 * beta * r {
                    tail_moment.add(mu.weight(i) * zx);
                }
            }
            let conds = strip.total() <= mass / 4.0 + 1e-15 * mass
                && tail_moment.total() <= beta * r * mass / 3.0 + 1e-15 * mass;
            mass_conditions_ok &= conds;
            if !conds {
                continue;
            }
            for i in 0..mu.len() {
                let x = mu.point(i);
                let zx = sign * z(x);
                if dist(x, &origin) >= 2.0 * r || zx <= 3.0 * beta * r {
                    continue;
                }
                for &t in &nodes {
                    // Unnormalized field: Σ w (x−y) φ(|x−y|/t).
                    let mut num = vec![CompensatedSum::new(); mu.dim()];
                    for j in 0..mu.len() {
                        let y = mu.point(j);
                        let phi = crate::bump::bump(dist(x, y) / t);
                        if phi > 0.0 {
                            for (k, acc) in num.iter_mut().enumerate() {
                                acc.add(mu.weight(j) * (x[k] - y[k]) * phi);
                            }
                        }
                    }
                    let comp: f64 =
                        num.iter().zip(e).map(|(a, c)| a.total() * c).sum::<f64>() * sign;
                    pointwise_checked += 1;
                    pointwise_ok &= comp.abs() >= zx * mass / 8.0 * (1.0 - 1e-12);
                }
            }
        }
    }

    let branch_energy = rhs >= delta * beta * beta * density_sq * mass;
    let branch_tail =
        tail.total() <= (codim as f64).powi(3) * c_prune_ceiling(s) * delta * beta * beta * mass;
    Ok(PruningReport {
        hypothesis,
        lhs,
        rhs,
        ratio: lhs / rhs,
        pointwise_checked,
        pointwise_ok,
        mass_conditions_ok,
        tail: tail.total(),
        branch_energy,
        branch_tail,
        delta,
    })
}

/// Stretch a measure away from a plane: in the plane-adapted frame each
/// atom's normal coordinates are divided by `beta`, tangential coordinates
/// and weights unchanged. The image of an atom at distance h from the plane
/// lies at distance h/beta.
pub fn squash(mu: &DiscreteMeasure, plane: &AffinePlane, beta: f64) -> Result<DiscreteMeasure> {
    plane.validate()?;
    if plane.dim() != mu.dim() {
        return Err(Error::Validation("plane dimension mismatch".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain("squash parameter must be positive".into()));
    }
    let normals = normal_frame(plane);
    let d = mu.dim();
    let mut coords = Vec::with_capacity(mu.len() * d);
    for i in 0..mu.len() {
        let x = mu.point(i);
        let mut img = plane.project(x);
        for e in &normals {
            let c: f64 = x.iter().zip(&plane.base).zip(e).map(|((a, b), u)| (a - b) * u).sum();
            for (k, u) in e.iter().enumerate() {
                img[k] += (c / beta) * u;
            }
        }
        coords.extend_from_slice(&img);
    }
    DiscreteMeasure::new(d, mu.s(), coords, mu.weights().to_vec())
}
