//! Flatness coefficients: β numbers (ball and cube flavors) via weighted
//! eigendecomposition, and transportation α coefficients via an exact
//! Kantorovich-dual solve against plane quadrature.

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::lattice::{DyadicCube, DyadicLattice};
use crate::measure::{dist, DiscreteMeasure};
use crate::sum::CompensatedSum;
use crate::transport::{solve_inner_sup, LpNode};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An affine n-plane: base point plus n orthonormal basis vectors.
#[derive(Debug, Clone)]
pub struct AffinePlane {
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffinePlane {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Verifies pairwise orthogonality and unit norms to 1e−12.
    pub fn validate(&self) -> Result<()> {
        for (i, u) in self.basis.iter().enumerate() {
            if u.len() != self.base.len() {
                return Err(Error::Validation("basis vector of wrong dimension".into()));
            }
            let nrm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("basis vector {i} not unit")));
            }
            for (j, v) in self.basis.iter().enumerate().skip(i + 1) {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                if dot.abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "basis vectors {i},{j} not orthogonal"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Orthogonal projection of x onto the plane.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.base.clone();
        for u in &self.basis {
            let dot: f64 = (0..d).map(|j| (x[j] - self.base[j]) * u[j]).sum();
            for j in 0..d {
                out[j] += dot * u[j];
            }
        }
        out
    }

    /// Euclidean distance from x to the plane.
    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(x, &self.project(x))
    }
}

/// Result of a β computation.
#[derive(Debug, Clone)]
pub struct BetaResult {
    /// The dimensionless coefficient.
    pub value: f64,
    pub plane: AffinePlane,
    /// Mass used in the normalization (μ(B) or I_μ(Q)).
    pub normalizer: f64,
    /// Length scale used (r or ℓ(Q)).
    pub scale: f64,
    /// Weighted squared-distance residual: value²·normalizer·scale².
    pub residual: f64,
}

/// Weighted least-squares plane fit.
///
/// Returns the optimal n-plane through the weighted centroid (top-n
/// eigenvectors of the weighted second-moment matrix) together with the
/// residual Σ w·dist² (the sum of the d−n smallest eigenvalues) and the
/// total weight.
pub fn optimal_plane_weighted(
    points: &[&[f64]],
    weights: &[f64],
    n: usize,
) -> Result<(AffinePlane, f64, f64)> {
    assert_eq!(points.len(), weights.len());
    if points.is_empty() {
        return Err(Error::Degenerate("plane fit needs at least one point".into()));
    }
    let d = points[0].len();
    if n == 0 || n >= d {
        return Err(Error::Domain(format!("plane dimension must satisfy 0 < n < {d}")));
    }
    let mut mass = CompensatedSum::new();
    for &w in weights {
        mass.add(w);
    }
    let mass = mass.total();
    if !(mass > 0.0) {
        return Err(Error::Degenerate("plane fit needs positive total weight".into()));
    }
    let mut centroid = vec![0.0; d];
    for (p, &w) in points.iter().zip(weights) {
        for j in 0..d {
            centroid[j] += w * p[j];
        }
    }
    for c in &mut centroid {
        *c /= mass;
    }
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += w * (p[a] - centroid[a]) * (p[b] - centroid[b]);
            }
        }
    }
    let trace = m.trace();
    let eig = m.symmetric_eigen();
    // Sort eigenpairs by eigenvalue, descending.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let basis: Vec<Vec<f64>> = order[..n]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let mut residual: f64 = order[n..]
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .sum();
    // Eigen noise on an exactly-degenerate configuration reads as a spurious
    // positive residual; below machine level relative to the total spread it
    // is an exact zero.
    if residual < 1e-14 * trace {
        residual = 0.0;
    }
    Ok((
        AffinePlane {
            base: centroid,
            basis,
        },
        residual,
        mass,
    ))
}

/// Best-fit plane for an explicit weighted point list.
pub fn optimal_plane(points: &[Vec<f64>], weights: &[f64], n: usize) -> Result<AffinePlane> {
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    Ok(optimal_plane_weighted(&refs, weights, n)?.0)
}

/// β_μ(B(x,r)) (optionally of the restriction μ|Q when `restrict` is given):
/// value² = residual / (μ(B)·r²), plane through the weighted centroid.
pub fn beta_ball(
    mu: &DiscreteMeasure,
    x: &[f64],
    r: f64,
    n: usize,
    restrict: Option<(&DyadicLattice, &DyadicCube)>,
) -> Result<BetaResult> {
    if !(r > 0.0) {
        return Err(Error::Domain("ball radius must be positive".into()));
    }
    let mut pts: Vec<&[f64]> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for i in 0..mu.len() {
        let p = mu.point(i);
        if dist(x, p) < r {
            if let Some((lat, q)) = restrict {
                if !lat.cube_contains(q, p) {
                    continue;
                }
            }
            pts.push(p);
            ws.push(mu.weight(i));
        }
    }
    if pts.is_empty() {
        return Err(Error::UndefinedBeta(
            "empty ball: beta undefined (distinct from zero)".into(),
        ));
    }
    let (plane, residual, mass) = optimal_plane_weighted(&pts, &ws, n)?;
    Ok(BetaResult {
        value: (residual / (mass * r * r)).sqrt(),
        plane,
        normalizer: mass,
        scale: r,
        residual,
    })
}

/// β_{μ,n}(Q): eigen fit with weights w_i·φ_Q(x_i), normalizer I_μ(Q),
/// scale ℓ(Q).
pub fn beta_cube(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    n: usize,
) -> Result<BetaResult> {
    let mut pts: Vec<&[f64]> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for i in 0..mu.len() {
        let phi = lat.phi(q, mu.point(i));
        if phi > 0.0 {
            pts.push(mu.point(i));
            ws.push(mu.weight(i) * phi);
        }
    }
    if pts.is_empty() {
        return Err(Error::UndefinedBeta("I_mu(Q) = 0: beta undefined".into()));
    }
    let (plane, residual, mass) = optimal_plane_weighted(&pts, &ws, n)?;
    let ell = q.side();
    Ok(BetaResult {
        value: (residual / (mass * ell * ell)).sqrt(),
        plane,
        normalizer: mass,
        scale: ell,
        residual,
    })
}

/// Quadrature nodes of the plane restricted to supp(φ_Q): an n-dimensional
/// grid in the plane frame with spacing `step`, anchored at the projection of
/// x_Q, keeping nodes with φ_Q > 0. Returned in lexicographic offset order.
pub fn plane_quadrature_nodes(
    lat: &DyadicLattice,
    q: &DyadicCube,
    plane: &AffinePlane,
    step: f64,
) -> Vec<Vec<f64>> {
    let d = plane.dim();
    let center = lat.center(q);
    let anchor = plane.project(&center);
    let radius = q.ball_radius(d);
    let perp = dist(&center, &anchor);
    let mut out = Vec::new();
    if perp >= radius {
        return out;
    }
    let in_radius = (radius * radius - perp * perp).sqrt();
    let span = (in_radius / step).ceil() as i64 + 1;
    let n = plane.n();
    let mut offs = vec![0i64; n];
    fn rec(
        coord: usize,
        n: usize,
        span: i64,
        step: f64,
        in_radius: f64,
        partial: f64,
        offs: &mut Vec<i64>,
        plane: &AffinePlane,
        anchor: &[f64],
        lat: &DyadicLattice,
        q: &DyadicCube,
        out: &mut Vec<Vec<f64>>,
    ) {
        if coord == n {
            let d = plane.dim();
            let mut node = anchor.to_vec();
            for (u, &m) in plane.basis.iter().zip(offs.iter()) {
                for j in 0..d {
                    node[j] += m as f64 * step * u[j];
                }
            }
            if lat.phi(q, &node) > 0.0 {
                out.push(node);
            }
            return;
        }
        for m in -span..=span {
            let v = m as f64 * step;
            let next = partial + v * v;
            if next <= in_radius * in_radius * 1.000001 {
                offs[coord] = m;
                rec(
                    coord + 1,
                    n,
                    span,
                    step,
                    in_radius,
                    next,
                    offs,
                    plane,
                    anchor,
                    lat,
                    q,
                    out,
                );
            }
        }
    }
    rec(
        0, n, span, step, in_radius, 0.0, &mut offs, plane, &anchor, lat, q, &mut out,
    );
    out
}

/// I_{H^n|L}(Q): grid quadrature of φ_Q on the plane.
pub fn plane_smoothed_mass(
    lat: &DyadicLattice,
    q: &DyadicCube,
    plane: &AffinePlane,
    step: f64,
) -> f64 {
    let cell = step.powi(plane.n() as i32);
    let mut acc = CompensatedSum::new();
    for node in plane_quadrature_nodes(lat, q, plane, step) {
        acc.add(cell * lat.phi(q, &node));
    }
    acc.total()
}

/// ϑ_{μ,L} = I_μ(Q) / I_{H^n|L}(Q) with the denominator by grid quadrature.
pub fn vartheta(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    plane: &AffinePlane,
    quad_step: f64,
) -> Result<f64> {
    let i_mu = crate::lattice::smoothed_cube_mass(mu, lat, q);
    let i_h = plane_smoothed_mass(lat, q, plane, quad_step);
    if !(i_h > 0.0) {
        return Err(Error::Degenerate(
            "plane misses supp(phi_Q): I_{H|L}(Q) = 0".into(),
        ));
    }
    Ok(i_mu / i_h)
}

/// Options for the α computation.
#[derive(Debug, Clone)]
pub struct AlphaOpts {
    /// Plane-quadrature spacing; default ℓ(Q)/64.
    pub quad_step: Option<f64>,
    /// Number of random restart candidates beyond the eigen seed.
    pub plane_candidates: usize,
    /// Local-search iterations around the best candidate.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for AlphaOpts {
    fn default() -> Self {
        AlphaOpts {
            quad_step: None,
            plane_candidates: 3,
            refine_iters: 6,
            seed: 0,
        }
    }
}

/// Result of an α computation: a certified interval for the inner sup at the
/// best candidate plane (the outer infimum over planes is non-convex, so
/// only an upper bound for it is claimed).
#[derive(Debug, Clone)]
pub struct AlphaResult {
    pub upper: f64,
    pub lower: f64,
    pub plane: AffinePlane,
    pub theta: f64,
    pub quad_step: f64,
    pub quad_error_bound: f64,
    /// Set when the plane local search was still improving at its last step.
    pub search_converged: bool,
    pub node_count: usize,
}

/// Witness Lipschitz constant C_w(d): the function
/// f = (dist(·,L)/ℓ)²·φ_{3Q} has ‖f‖_Lip ≤ C_w/ℓ on 3B_Q, from
/// |∇f| ≤ 2·(13√d)/ℓ + (13√d)²·‖φ′‖_∞/(6√d·ℓ).
pub fn witness_constant(dim: usize) -> f64 {
    let sd = (dim as f64).sqrt();
    let phi_sup = BumpProfile::new().sup_deriv_abs();
    26.0 * sd + 169.0 / 6.0 * sd * phi_sup
}

/// α_{μ,n}(Q): transportation coefficient via the exact Kantorovich-dual
/// solve on μ atoms plus plane-quadrature nodes.
pub fn alpha_cube(
    mu: &DiscreteMeasure,
    lat: &DyadicLattice,
    q: &DyadicCube,
    n: usize,
    opts: &AlphaOpts,
) -> Result<AlphaResult> {
    let d = mu.dim();
    let ell = q.side();
    let step = opts.quad_step.unwrap_or(ell / 64.0);
    if !(step > 0.0) {
        return Err(Error::Domain("quad_step must be positive".into()));
    }
    let center = lat.center(q);
    let sd = (d as f64).sqrt();

    // Atoms charging Q, with the LP objective coefficient +w·φ_Q.
    let mut atom_nodes: Vec<LpNode> = Vec::new();
    for i in 0..mu.len() {
        let phi = lat.phi(q, mu.point(i));
        if phi > 0.0 {
            atom_nodes.push(LpNode {
                pos: mu.point(i).to_vec(),
                c: mu.weight(i) * phi,
                b: support_bound(mu.point(i), &center, sd, ell),
            });
        }
    }
    if atom_nodes.is_empty() {
        return Err(Error::UndefinedBeta("I_mu(Q) = 0: alpha undefined".into()));
    }

    // Seed plane: β-optimal plane, translated so its nearest point to x_Q
    // lies inside ¼B_Q = B(x_Q, √d ℓ).
    let beta = beta_cube(mu, lat, q, n)?;
    let seed_plane = pull_into_quarter_ball(&beta.plane, &center, sd * ell);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xa1fa);
    let evaluate = |plane: &AffinePlane| -> Option<(f64, f64, usize)> {
        let i_h = plane_smoothed_mass(lat, q, plane, step);
        if !(i_h > 0.0) {
            return None;
        }
        let theta = beta_like_mass(&atom_nodes) / i_h;
        let cell = step.powi(n as i32);
        let mut nodes = atom_nodes.clone();
        for node in plane_quadrature_nodes(lat, q, plane, step) {
            let phi = lat.phi(q, &node);
            let b = support_bound(&node, &center, sd, ell);
            nodes.push(LpNode {
                pos: node,
                c: -theta * cell * phi,
                b,
            });
        }
        let count = nodes.len();
        Some((solve_inner_sup(&nodes, ell), theta, count))
    };

    let mut best_plane = seed_plane.clone();
    let (mut best_val, mut best_theta, mut best_nodes) =
        evaluate(&seed_plane).ok_or_else(|| {
            Error::Degenerate("seed plane misses supp(phi_Q) after projection".into())
        })?;

    // Random restarts.
    for _ in 0..opts.plane_candidates {
        let cand = random_plane_near(&seed_plane, &center, sd * ell, 0.5, &mut rng);
        if let Some((v, th, cnt)) = evaluate(&cand) {
            if v < best_val {
                best_val = v;
                best_theta = th;
                best_nodes = cnt;
                best_plane = cand;
            }
        }
    }
    // Local refinement with shrinking step.
    let mut improved_last = false;
    for iter in 0..opts.refine_iters {
        let scale = 0.3 * 0.7f64.powi(iter as i32);
        let cand = random_plane_near(&best_plane, &center, sd * ell, scale, &mut rng);
        if let Some((v, th, cnt)) = evaluate(&cand) {
            if v < best_val {
                best_val = v;
                best_theta = th;
                best_nodes = cnt;
                best_plane = cand;
                improved_last = iter + 1 == opts.refine_iters;
            }
        }
    }

    // Discretization error of the dual objective: Lip(φ_Q·f) ≤ (6‖φ′‖_∞+1)/ℓ,
    // midpoint-cell diameter √n·step, applied to the ϑ-weighted plane mass.
    let phi_sup = BumpProfile::new().sup_deriv_abs();
    let plane_mass = plane_smoothed_mass(lat, q, &best_plane, step);
    let quad_error_bound = best_theta
        * plane_mass
        * ((6.0 * phi_sup + 1.0) / ell)
        * (n as f64).sqrt()
        * step;

    // Witness lower bound at the best plane: f = (dist/ℓ)²φ_{3Q}/C_w is
    // feasible and integrates to zero against the exact H^n|L side.
    let c_w = witness_constant(d);
    let mut wsum = CompensatedSum::new();
    for nd in &atom_nodes {
        let dl = best_plane.distance(&nd.pos);
        wsum.add(nd.c * (dl / ell) * (dl / ell));
    }
    let upper = best_val + quad_error_bound;
    let lower = (wsum.total() / c_w).min(upper).max(0.0);

    Ok(AlphaResult {
        upper,
        lower,
        plane: best_plane,
        theta: best_theta,
        quad_step: step,
        quad_error_bound,
        search_converged: !improved_last,
        node_count: best_nodes,
    })
}

fn beta_like_mass(atom_nodes: &[LpNode]) -> f64 {
    let mut s = CompensatedSum::new();
    for nd in atom_nodes {
        s.add(nd.c);
    }
    s.total()
}

/// |f(p)| ≤ dist(p, R^d∖3B_Q)/ℓ for functions supported in
/// 3B_Q = B(x_Q, 12√d ℓ).
fn support_bound(p: &[f64], center: &[f64], sqrt_d: f64, ell: f64) -> f64 {
    ((12.0 * sqrt_d * ell - dist(p, center)) / ell).max(0.0)
}

/// Translates the plane so its nearest point to `center` lies within
/// `limit` of it (strictly inside, with a small safety factor).
fn pull_into_quarter_ball(plane: &AffinePlane, center: &[f64], limit: f64) -> AffinePlane {
    let proj = plane.project(center);
    let gap = dist(&proj, center);
    let target = 0.999 * limit;
    if gap <= target {
        return plane.clone();
    }
    let t = 1.0 - target / gap;
    let d = plane.dim();
    let mut out = plane.clone();
    for j in 0..d {
        out.base[j] += t * (center[j] - proj[j]);
    }
    out
}

/// A deterministic random perturbation of a plane: base jitter inside the
/// quarter ball and a small frame rotation, re-orthonormalized.
fn random_plane_near(
    plane: &AffinePlane,
    center: &[f64],
    limit: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> AffinePlane {
    let d = plane.dim();
    let n = plane.n();
    // Perturb and re-orthonormalize the frame (Gram-Schmidt).
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for u in &plane.basis {
        let mut v: Vec<f64> = u
            .iter()
            .map(|&x| x + scale * rng.gen_range(-1.0..1.0))
            .collect();
        for w in &basis {
            let dot: f64 = v.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            for j in 0..d {
                v[j] -= dot * w[j];
            }
        }
        let nrm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < 1e-12 {
            return plane.clone();
        }
        for x in &mut v {
            *x /= nrm;
        }
        basis.push(v);
    }
    let mut base = plane.project(center);
    for j in 0..d {
        base[j] += scale * limit * rng.gen_range(-1.0..1.0);
    }
    let cand = AffinePlane { base, basis };
    pull_into_quarter_ball(&cand, center, limit)
}
