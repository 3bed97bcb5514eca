//! Exact solver for the inner Lipschitz-dual problem
//!
//!   maximize Σ_p c_p f(p)
//!   subject to |f(p) − f(q)| ≤ d(p,q) and |f(p)| ≤ b(p)
//!
//! where d is the Euclidean metric scaled by 1/ℓ and b is 1-Lipschitz with
//! respect to d (distance to the complement of a ball, scaled the same way).
//!
//! Under these assumptions the feasible set equals the set of 1-Lipschitz
//! functions for the metric closure D(p,q) = min(d(p,q), b(p)+b(q)) that
//! vanish at an added ground node with D(p,ground) = b(p). By linear
//! programming duality the optimum equals the cost of a minimum-cost
//! transportation plan moving the positive part of c to the negative part,
//! with the ground node able to absorb or emit mass at cost b(p). That
//! transportation problem is solved exactly by successive shortest paths
//! with potentials.

use crate::sum::CompensatedSum;
use std::collections::HashMap;

/// One node of the dual instance.
#[derive(Debug, Clone)]
pub struct LpNode {
    pub pos: Vec<f64>,
    /// Objective coefficient (mass-valued, either sign).
    pub c: f64,
    /// Bound |f| ≤ b at this node; must be 1-Lipschitz w.r.t. the metric.
    pub b: f64,
}

/// Exact optimum of the inner sup. `ell` scales distances: d(p,q) = |p−q|/ell.
///
/// Returns 0 when no node has a nonzero coefficient (f ≡ 0 optimal).
pub fn solve_inner_sup(nodes: &[LpNode], ell: f64) -> f64 {
    assert!(ell > 0.0);
    let mut sources: Vec<usize> = Vec::new();
    let mut sinks: Vec<usize> = Vec::new();
    for (i, nd) in nodes.iter().enumerate() {
        debug_assert!(nd.b >= 0.0);
        if nd.c > 0.0 {
            sources.push(i);
        } else if nd.c < 0.0 {
            sinks.push(i);
        }
    }
    if sources.is_empty() && sinks.is_empty() {
        return 0.0;
    }

    let metric = |i: usize, j: usize| -> f64 {
        let a = &nodes[i];
        let bnode = &nodes[j];
        let mut d2 = 0.0;
        for k in 0..a.pos.len() {
            let d = a.pos[k] - bnode.pos[k];
            d2 += d * d;
        }
        (d2.sqrt() / ell).min(a.b + bnode.b)
    };

    // Bipartite transportation with a ground row/column. Source m = ground
    // emitter, sink k = ground absorber; cost(ground, ground) = 0.
    let m = sources.len();
    let k = sinks.len();
    let total_supply: f64 = sources.iter().map(|&i| nodes[i].c).sum();
    let total_demand: f64 = sinks.iter().map(|&j| -nodes[j].c).sum();
    let mut supply: Vec<f64> = sources.iter().map(|&i| nodes[i].c).collect();
    supply.push(total_demand);
    let mut demand: Vec<f64> = sinks.iter().map(|&j| -nodes[j].c).collect();
    demand.push(total_supply);

    let cost = |si: usize, tj: usize| -> f64 {
        match (si == m, tj == k) {
            (true, true) => 0.0,
            (true, false) => nodes[sinks[tj]].b,
            (false, true) => nodes[sources[si]].b,
            (false, false) => metric(sources[si], sinks[tj]),
        }
    };

    let ns = m + 1;
    let nt = k + 1;
    let mut flow: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pi_s = vec![0.0f64; ns];
    let mut pi_t = vec![0.0f64; nt];

    let eps = {
        // Scale-aware tolerance for "exhausted" supplies.
        let scale: f64 = total_supply + total_demand;
        (scale.max(1.0)) * 1e-15
    };

    let max_iters = 1000 * (ns + nt) + 1000;
    let mut iters = 0;
    loop {
        if supply.iter().all(|&s| s <= eps) {
            break;
        }
        iters += 1;
        assert!(iters <= max_iters, "transportation solver failed to converge");

        // Multi-source Dijkstra on the residual network with reduced costs.
        // Vertices: 0..ns sources, ns..ns+nt sinks.
        let nv = ns + nt;
        let mut dist = vec![f64::INFINITY; nv];
        let mut prev: Vec<Option<usize>> = vec![None; nv];
        let mut done = vec![false; nv];
        for (si, &s) in supply.iter().enumerate() {
            if s > eps {
                dist[si] = 0.0;
            }
        }
        let mut target: Option<usize> = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= ns && demand[u - ns] > eps {
                target = Some(u);
                break;
            }
            if u < ns {
                // Forward arcs source u -> every sink.
                for tj in 0..nt {
                    let v = ns + tj;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost(u, tj) + pi_s[u] - pi_t[tj]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = Some(u);
                    }
                }
            } else {
                // Backward arcs along positive flow: sink -> source.
                let tj = u - ns;
                for si in 0..ns {
                    if done[si] {
                        continue;
                    }
                    if let Some(&f) = flow.get(&(si, tj)) {
                        if f > eps {
                            let rc = (pi_t[tj] - pi_s[si] - cost(si, tj)).max(0.0);
                            if dist[u] + rc < dist[si] {
                                dist[si] = dist[u] + rc;
                                prev[si] = Some(u);
                            }
                        }
                    }
                }
            }
        }
        // All remaining demand can be below eps while a supply entry keeps a
        // rounding residue; that leftover mass is dust, stop augmenting.
        let Some(target) = target else { break };

        // Potentials update (Johnson): cap at the target distance.
        let dt = dist[target];
        for si in 0..ns {
            pi_s[si] += dist[si].min(dt);
        }
        for tj in 0..nt {
            pi_t[tj] += dist[ns + tj].min(dt);
        }

        // Trace the path and find the bottleneck.
        let mut path = vec![target];
        let mut v = target;
        while let Some(p) = prev[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        let start = path[0];
        debug_assert!(start < ns);
        let mut bottleneck = supply[start].min(demand[target - ns]);
        for w in path.windows(2) {
            if w[0] >= ns {
                // backward arc sink -> source
                let f = flow[&(w[1], w[0] - ns)];
                bottleneck = bottleneck.min(f);
            }
        }
        // Apply augmentation.
        supply[start] -= bottleneck;
        demand[target - ns] -= bottleneck;
        for w in path.windows(2) {
            if w[0] < ns {
                *flow.entry((w[0], w[1] - ns)).or_insert(0.0) += bottleneck;
            } else {
                let f = flow.get_mut(&(w[1], w[0] - ns)).unwrap();
                *f -= bottleneck;
                if *f <= eps {
                    flow.remove(&(w[1], w[0] - ns));
                }
            }
        }
    }

    // Objective: total transport cost, summed in deterministic key order.
    let mut keys: Vec<(usize, usize)> = flow.keys().copied().collect();
    keys.sort_unstable();
    let mut acc = CompensatedSum::new();
    for (si, tj) in keys {
        acc.add(flow[&(si, tj)] * cost(si, tj));
    }
    acc.total().max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(pos: &[f64], c: f64, b: f64) -> LpNode {
        LpNode {
            pos: pos.to_vec(),
            c,
            b,
        }
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let nodes = vec![node(&[0.0, 0.0], 0.0, 1.0)];
        assert_eq!(solve_inner_sup(&nodes, 1.0), 0.0);
    }

    #[test]
    fn single_positive_mass_pays_its_bound() {
        // One unit of excess mass at a node with |f| ≤ b: optimum = c·b
        // (take f = b at the node).
        let nodes = vec![node(&[0.0, 0.0], 2.0, 0.75)];
        assert!((solve_inner_sup(&nodes, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_node_transport_distance() {
        // Unit mass moving distance 0.5 with generous bounds: cost 0.5.
        let nodes = vec![
            node(&[0.0, 0.0], 1.0, 10.0),
            node(&[0.5, 0.0], -1.0, 10.0),
        ];
        assert!((solve_inner_sup(&nodes, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_route_caps_cost() {
        // Moving directly costs 1.0 but via the boundary only b_p+b_q = 0.3.
        let nodes = vec![
            node(&[0.0, 0.0], 1.0, 0.1),
            node(&[1.0, 0.0], -1.0, 0.2),
        ];
        assert!((solve_inner_sup(&nodes, 1.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_excess_goes_to_ground() {
        // Supply 2, demand 1 at distance 0.1; excess unit pays its bound.
        let nodes = vec![
            node(&[0.0, 0.0], 2.0, 0.5),
            node(&[0.1, 0.0], -1.0, 0.5),
        ];
        let v = solve_inner_sup(&nodes, 1.0);
        assert!((v - (0.1 + 0.5)).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn ell_scales_distances() {
        let nodes = vec![
            node(&[0.0, 0.0], 1.0, 100.0),
            node(&[1.0, 0.0], -1.0, 100.0),
        ];
        assert!((solve_inner_sup(&nodes, 4.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn value_is_feasible_upper_bound_for_sampled_f() {
        // Randomized feasible functions never beat the reported optimum.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 6;
            let nodes: Vec<LpNode> = (0..n)
                .map(|_| {
                    node(
                        &[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.0..1.5),
                    )
                })
                .collect();
            let opt = solve_inner_sup(&nodes, 1.0);
            for _ in 0..200 {
                // Project a random vector onto the feasible polytope by
                // iterated constraint enforcement.
                let mut f: Vec<f64> = nodes
                    .iter()
                    .map(|nd| rng.gen_range(-nd.b..=nd.b.max(1e-12)))
                    .collect();
                for _ in 0..50 {
                    for i in 0..n {
                        f[i] = f[i].clamp(-nodes[i].b, nodes[i].b);
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let mut d2 = 0.0;
                            for k in 0..2 {
                                let d = nodes[i].pos[k] - nodes[j].pos[k];
                                d2 += d * d;
                            }
                            let dij = d2.sqrt();
                            if f[i] - f[j] > dij {
                                f[i] = f[j] + dij;
                            }
                            if f[j] - f[i] > dij {
                                f[i] = f[j] - dij;
                            }
                        }
                    }
                }
                // Keep only genuinely feasible samples.
                let mut feasible = f
                    .iter()
                    .zip(&nodes)
                    .all(|(fi, nd)| fi.abs() <= nd.b + 1e-9);
                'pairs: for i in 0..n {
                    for j in 0..n {
                        let mut d2 = 0.0;
                        for k in 0..2 {
                            let d = nodes[i].pos[k] - nodes[j].pos[k];
                            d2 += d * d;
                        }
                        if (f[i] - f[j]).abs() > d2.sqrt() + 1e-9 {
                            feasible = false;
                            break 'pairs;
                        }
                    }
                }
                if !feasible {
                    continue;
                }
                let val: f64 = f.iter().zip(&nodes).map(|(fi, nd)| fi * nd.c).sum();
                assert!(val <= opt + 1e-8, "feasible value {val} exceeds optimum {opt}");
            }
        }
    }
}
