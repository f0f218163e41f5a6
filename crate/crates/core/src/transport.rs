//! Exact computation of the boundary-vanishing W1 variant.
//!
//! The distance is the supremum of |∫ψ dμ − ∫ψ dν| over 1-Lipschitz ψ
//! supported in the closed unit ball (so ψ vanishes on the sphere). For
//! discrete measures this equals a min-cost transportation problem under the
//! shortcut ground metric
//!
//!   d(x, y) = min(|x − y|, (1 − |x|)+ + (1 − |y|)+),
//!
//! realized by one aggregated boundary node reachable from any point p at
//! cost (1 − |p|)+. A value assignment on the support extends to an
//! admissible ψ exactly when it is 1-Lipschitz for this metric with the
//! boundary pinned at 0 (McShane extension), which is what the dual LP in
//! [`crate::duallp`] checks independently.
//!
//! The solver is a dense transportation simplex over the bipartite graph of
//! the two supports plus the boundary row/column; masses and costs stay in
//! f64 and optimality is certified by the complementary-slackness check in
//! [`TransportResult::verify`].

use crate::error::{Error, Result};
use crate::geometry::{dist, norm};
use crate::measure::{BallQuery, PointMeasure};

const MASS_TOL: f64 = 1e-9;
const RC_TOL: f64 = 1e-12;

/// A pair of measures whose restrictions to the open unit ball are
/// probability measures.
#[derive(Debug, Clone)]
pub struct TransportPair {
    pub mu: PointMeasure,
    pub nu: PointMeasure,
}

impl TransportPair {
    pub fn new(mu: PointMeasure, nu: PointMeasure) -> Result<Self> {
        let unit = BallQuery::new(vec![0.0; mu.dim()], 1.0);
        let m_mu = mu.ball_mass(&unit);
        let m_nu = nu.ball_mass(&unit);
        if (m_mu - 1.0).abs() > MASS_TOL || (m_nu - 1.0).abs() > MASS_TOL {
            return Err(Error::MassMismatch { mu: m_mu, nu: m_nu });
        }
        Ok(TransportPair { mu, nu })
    }
}

/// One arc of an optimal plan; index -1 denotes the boundary node.
#[derive(Debug, Clone, Copy)]
pub struct PlanArc {
    pub from: i64,
    pub to: i64,
    pub mass: f64,
    pub cost: f64,
}

/// An optimal transport plan with its dual witness.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub cost: f64,
    pub plan: Vec<PlanArc>,
    /// Potential per mu point: an admissible ψ value (boundary pinned at 0).
    pub dual_mu: Vec<f64>,
    /// Potential per nu point.
    pub dual_nu: Vec<f64>,
}

impl TransportResult {
    /// Checks marginals, cost consistency, and dual admissibility.
    pub fn verify(&self, pair: &TransportPair, tol: f64) -> bool {
        let mut mu_out = vec![0.0; pair.mu.len()];
        let mut nu_in = vec![0.0; pair.nu.len()];
        let mut total = 0.0;
        for a in &self.plan {
            if a.from >= 0 {
                mu_out[a.from as usize] += a.mass;
            }
            if a.to >= 0 {
                nu_in[a.to as usize] += a.mass;
            }
            total += a.mass * a.cost;
        }
        let marg_ok = mu_out
            .iter()
            .enumerate()
            .all(|(i, &m)| (m - pair.mu.weight(i)).abs() <= tol)
            && nu_in
                .iter()
                .enumerate()
                .all(|(j, &m)| (m - pair.nu.weight(j)).abs() <= tol);
        let dual_value: f64 = (0..pair.mu.len())
            .map(|i| self.dual_mu[i] * pair.mu.weight(i))
            .sum::<f64>()
            - (0..pair.nu.len())
                .map(|j| self.dual_nu[j] * pair.nu.weight(j))
                .sum::<f64>();
        marg_ok && (total - self.cost).abs() <= tol && (dual_value - self.cost).abs() <= tol.max(1e-7)
    }

    /// Dumps the plan as CSV (i, j, mass, cost); -1 denotes the boundary.
    pub fn plan_csv(&self) -> String {
        let mut s = String::from("i,j,mass,cost\n");
        for a in &self.plan {
            s.push_str(&format!("{},{},{},{}\n", a.from, a.to, a.mass, a.cost));
        }
        s
    }
}

#[inline]
fn boundary_cost(p: &[f64]) -> f64 {
    (1.0 - norm(p)).max(0.0)
}

/// Shortcut ground metric used throughout.
pub fn ground_cost(x: &[f64], y: &[f64]) -> f64 {
    dist(x, y).min(boundary_cost(x) + boundary_cost(y))
}

/// W1 between the pair via the boundary-augmented transportation problem.
pub fn w1_boundary(pair: &TransportPair) -> Result<TransportResult> {
    let m = pair.mu.len();
    let n = pair.nu.len();
    // supplies: mu weights plus one boundary unit; demands likewise, with the
    // last demand balancing the totals exactly
    let mut supply: Vec<f64> = (0..m).map(|i| pair.mu.weight(i)).collect();
    supply.push(1.0);
    let mut demand: Vec<f64> = (0..n).map(|j| pair.nu.weight(j)).collect();
    let supply_total: f64 = supply.iter().sum();
    let demand_partial: f64 = demand.iter().sum();
    demand.push(supply_total - demand_partial);
    if *demand.last().unwrap() <= 0.0 {
        return Err(Error::MassMismatch { mu: supply_total - 1.0, nu: demand_partial });
    }

    let rows = m + 1;
    let cols = n + 1;
    let mut cost = vec![0.0f64; rows * cols];
    for i in 0..m {
        let xi = pair.mu.point(i);
        let bi = boundary_cost(xi);
        for j in 0..n {
            cost[i * cols + j] = dist(xi, pair.nu.point(j));
        }
        cost[i * cols + n] = bi;
    }
    for j in 0..n {
        cost[m * cols + j] = boundary_cost(pair.nu.point(j));
    }
    cost[m * cols + n] = 0.0;

    let flow = transportation_simplex(&supply, &demand, &cost, cols)?;

    let mut plan = Vec::new();
    let mut total = 0.0;
    for (&(i, j), &f) in flow.arcs.iter().zip(&flow.flows) {
        if f <= 0.0 {
            continue;
        }
        let c = cost[i * cols + j];
        // drop the synthetic boundary-to-boundary arc from the reported plan
        if i == m && j == n {
            continue;
        }
        total += f * c;
        plan.push(PlanArc {
            from: if i == m { -1 } else { i as i64 },
            to: if j == n { -1 } else { j as i64 },
            mass: f,
            cost: c,
        });
    }

    // dual witness with the boundary pinned at 0: psi_mu[i] = u[i] + v[n],
    // psi_nu[j] = -(v[j] + u[m]); these satisfy the Lipschitz box constraints
    // up to simplex tolerance
    let dual_mu: Vec<f64> = (0..m).map(|i| flow.u[i] + flow.v[n]).collect();
    let dual_nu: Vec<f64> = (0..n).map(|j| -(flow.v[j] + flow.u[m])).collect();

    Ok(TransportResult { cost: total, plan, dual_mu, dual_nu })
}

struct FlowSolution {
    arcs: Vec<(usize, usize)>,
    flows: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Dense transportation simplex. `cost` is row-major rows x cols; supplies
/// and demands must balance exactly. Returns basic arcs with flows and the
/// optimal potentials.
fn transportation_simplex(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    cols: usize,
) -> Result<FlowSolution> {
    let rows = supply.len();
    debug_assert_eq!(demand.len(), cols);

    // north-west corner start: a spanning tree with rows+cols-1 basic arcs
    let mut arcs: Vec<(usize, usize)> = Vec::with_capacity(rows + cols - 1);
    let mut flows: Vec<f64> = Vec::with_capacity(rows + cols - 1);
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut i = 0;
        let mut j = 0;
        while i < rows && j < cols {
            let f = s[i].min(d[j]);
            arcs.push((i, j));
            flows.push(f);
            s[i] -= f;
            d[j] -= f;
            let row_done = s[i] <= d[j];
            if row_done && i + 1 < rows {
                i += 1;
            } else if !row_done && j + 1 < cols {
                j += 1;
            } else if i + 1 == rows && j + 1 < cols {
                j += 1;
            } else if j + 1 == cols && i + 1 < rows {
                i += 1;
            } else {
                break;
            }
        }
        debug_assert_eq!(arcs.len(), rows + cols - 1);
    }

    let nodes = rows + cols;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (a, &(i, j)) in arcs.iter().enumerate() {
        adj[i].push(a);
        adj[rows + j].push(a);
    }

    let mut u = vec![0.0f64; rows];
    let mut v = vec![0.0f64; cols];
    let max_iters = 200 * (rows + cols);
    let mut bland_mode = false;

    for iter in 0..max_iters {
        // potentials from the tree: u[i] + v[j] = c[i][j] on basic arcs
        {
            let mut seen = vec![false; nodes];
            let mut stack = vec![0usize];
            u[0] = 0.0;
            seen[0] = true;
            while let Some(node) = stack.pop() {
                for &a in &adj[node] {
                    let (i, j) = arcs[a];
                    let (from, to) = (i, rows + j);
                    let other = if node == from { to } else { from };
                    if seen[other] {
                        continue;
                    }
                    seen[other] = true;
                    if other >= rows {
                        v[other - rows] = cost[i * cols + j] - u[i];
                    } else {
                        u[other] = cost[i * cols + j] - v[j];
                    }
                    stack.push(other);
                }
            }
        }

        // entering arc
        let mut enter: Option<(usize, usize)> = None;
        if bland_mode {
            'outer: for i in 0..rows {
                for j in 0..cols {
                    if cost[i * cols + j] - u[i] - v[j] < -RC_TOL {
                        enter = Some((i, j));
                        break 'outer;
                    }
                }
            }
        } else {
            let mut best = -RC_TOL;
            for i in 0..rows {
                let base = i * cols;
                let ui = u[i];
                for j in 0..cols {
                    let rc = cost[base + j] - ui - v[j];
                    if rc < best {
                        best = rc;
                        enter = Some((i, j));
                    }
                }
            }
        }
        let (ei, ej) = match enter {
            Some(e) => e,
            None => {
                return Ok(FlowSolution { arcs, flows, u, v });
            }
        };

        // cycle: the entering arc plus the tree path between its endpoints.
        // Pushing theta along (ei -> ej) and walking the path starting at the
        // row node ei, arcs traversed row->col lose theta and arcs traversed
        // col->row gain theta.
        let path = tree_path(&arcs, &adj, rows, nodes, ei, rows + ej);
        let mut theta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        let mut node = ei;
        for &a in &path {
            let (i, j) = arcs[a];
            let forward = node == i; // traversing row -> col
            if forward && flows[a] < theta {
                theta = flows[a];
                leave = Some(a);
            }
            node = if node == i { rows + j } else { i };
        }
        let leave = match leave {
            Some(l) => l,
            None => {
                // a balanced transportation cycle always has a shrinking arc
                return Err(Error::MassMismatch { mu: f64::NAN, nu: f64::NAN });
            }
        };

        let mut node = ei;
        for &a in &path {
            let (i, j) = arcs[a];
            let forward = node == i;
            if forward {
                flows[a] -= theta;
            } else {
                flows[a] += theta;
            }
            node = if node == i { rows + j } else { i };
        }

        // replace the leaving arc by the entering one
        let (li, lj) = arcs[leave];
        adj[li].retain(|&a| a != leave);
        adj[rows + lj].retain(|&a| a != leave);
        arcs[leave] = (ei, ej);
        flows[leave] = theta;
        adj[ei].push(leave);
        adj[rows + ej].push(leave);

        if iter == max_iters / 2 {
            bland_mode = true;
        }
    }
    // reaching the cap means cycling; the Bland fallback should have
    // terminated, so report the current (feasible, near-optimal) solution
    Ok(FlowSolution { arcs, flows, u, v })
}

/// Output of [`radial_cdf_gap`].
#[derive(Debug, Clone)]
pub struct CdfGap {
    /// Exact integral of |F - G| over t in (0,1).
    pub integral_gap: f64,
    /// Maximal radius intervals in (0, 1/2) where the ball-mass discrepancy
    /// stays below the Chebyshev threshold.
    pub good_set: Vec<(f64, f64)>,
    /// Total length of (0, 1/2) minus the good set.
    pub complement_length: f64,
}

/// CDF control: with phi(z) = min(1, 2|z - c|), F(t) = mu(phi < t) and
/// G(t) = nu(phi < t), computes the exact piecewise-constant integral of
/// |F - G| and the good radius set where |mu(B(c,s)) - nu(B(c,s))| stays
/// below (2/eps) * W1.
pub fn radial_cdf_gap(pair: &TransportPair, phi_center: &[f64], eps: f64) -> Result<CdfGap> {
    if norm(phi_center) >= 0.5 {
        return Err(Error::ScaleConstraintViolated {
            msg: format!("phi center must lie in B(0,1/2), |c| = {}", norm(phi_center)),
        });
    }
    let w1 = w1_boundary(pair)?.cost;
    let threshold = 2.0 * w1 / eps;

    // events: jump +w at t = phi(z) for mu, -w for nu; only atoms in the
    // closed unit ball matter (phi = 1 outside contributes no jump below 1)
    let mut events: Vec<(f64, f64)> = Vec::new();
    for i in 0..pair.mu.len() {
        let t = (2.0 * dist(pair.mu.point(i), phi_center)).min(1.0);
        if t < 1.0 {
            events.push((t, pair.mu.weight(i)));
        }
    }
    for j in 0..pair.nu.len() {
        let t = (2.0 * dist(pair.nu.point(j), phi_center)).min(1.0);
        if t < 1.0 {
            events.push((t, -pair.nu.weight(j)));
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut integral = 0.0;
    let mut diff = 0.0f64; // F - G on the current interval
    let mut t_prev = 0.0;
    let mut k = 0;
    // good set tracked in s = t/2 over (0, 1/2)
    let mut good: Vec<(f64, f64)> = Vec::new();
    let push_good = |a: f64, b: f64, good: &mut Vec<(f64, f64)>| {
        if b <= a {
            return;
        }
        if let Some(last) = good.last_mut() {
            if (a - last.1).abs() < 1e-15 {
                last.1 = b;
                return;
            }
        }
        good.push((a, b));
    };
    while t_prev < 1.0 {
        let t_next = if k < events.len() { events[k].0.min(1.0) } else { 1.0 };
        if t_next > t_prev {
            integral += diff.abs() * (t_next - t_prev);
            if diff.abs() <= threshold {
                push_good(t_prev / 2.0, t_next / 2.0, &mut good);
            }
            t_prev = t_next;
        }
        if k >= events.len() {
            break;
        }
        // fold all events at this t
        while k < events.len() && events[k].0 <= t_prev {
            diff += events[k].1;
            k += 1;
        }
    }
    let good_len: f64 = good.iter().map(|(a, b)| b - a).sum();
    Ok(CdfGap { integral_gap: integral, good_set: good, complement_length: 0.5 - good_len })
}

/// Unique tree path between two nodes, returned as the arc sequence walked
/// starting at `from`. Column j is node `rows + j`.
fn tree_path(
    arcs: &[(usize, usize)],
    adj: &[Vec<usize>],
    rows: usize,
    nodes: usize,
    from: usize,
    to: usize,
) -> Vec<usize> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes]; // (parent node, arc)
    let mut seen = vec![false; nodes];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(node) = stack.pop() {
        if node == to {
            break;
        }
        for &a in &adj[node] {
            let (i, j) = arcs[a];
            let other = if node == i { rows + j } else { i };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            prev[other] = Some((node, a));
            stack.push(other);
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (p, a) = prev[node].expect("basis is a spanning tree");
        path.push(a);
        node = p;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PointMeasure;

    fn dirac(p: Vec<f64>) -> PointMeasure {
        let d = p.len();
        PointMeasure::new(d, vec![p], vec![1.0], None).unwrap()
    }

    fn pair(mu: PointMeasure, nu: PointMeasure) -> TransportPair {
        TransportPair::new(mu, nu).unwrap()
    }

    #[test]
    fn identical_measures_cost_zero() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
        let m = PointMeasure::new(2, pts, vec![0.2; 5], None).unwrap();
        let p = pair(m.clone(), m);
        let r = w1_boundary(&p).unwrap();
        assert!(r.cost.abs() < 1e-12);
        assert!(r.verify(&p, 1e-9));
    }

    #[test]
    fn interior_dirac_pair() {
        let p = pair(dirac(vec![0.0, 0.0]), dirac(vec![0.3, 0.0]));
        let r = w1_boundary(&p).unwrap();
        assert!((r.cost - 0.3).abs() < 1e-9, "cost = {}", r.cost);
        assert!(r.verify(&p, 1e-9));
    }

    #[test]
    fn near_boundary_shortcut() {
        // |q| = |q'| = 0.95, |q - q'| = 0.5: via the boundary 0.05 + 0.05
        let a = 0.95f64;
        let x = vec![(a * a - 0.0625f64).sqrt(), 0.25];
        let y = vec![(a * a - 0.0625f64).sqrt(), -0.25];
        assert!((crate::geometry::dist(&x, &y) - 0.5).abs() < 1e-12);
        let p = pair(dirac(x), dirac(y));
        let r = w1_boundary(&p).unwrap();
        assert!((r.cost - 0.1).abs() < 1e-9, "cost = {}", r.cost);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let m = dirac(vec![0.0]);
        let bad = PointMeasure::new(1, vec![vec![0.0]], vec![0.5], None).unwrap();
        assert!(matches!(
            TransportPair::new(m, bad),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_and_diameter_bound() {
        let mut s = 11u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 1.6 - 0.8
        };
        for _ in 0..10 {
            let pts_a: Vec<Vec<f64>> = (0..6).map(|_| vec![next() * 0.7, next() * 0.7]).collect();
            let pts_b: Vec<Vec<f64>> = (0..8).map(|_| vec![next() * 0.7, next() * 0.7]).collect();
            let ma = PointMeasure::new(2, pts_a, vec![1.0 / 6.0; 6], None).unwrap();
            let mb = PointMeasure::new(2, pts_b, vec![1.0 / 8.0; 8], None).unwrap();
            let ab = w1_boundary(&pair(ma.clone(), mb.clone())).unwrap().cost;
            let ba = w1_boundary(&pair(mb, ma)).unwrap().cost;
            assert!((ab - ba).abs() < 1e-9);
            assert!(ab <= 2.0);
        }
    }

    #[test]
    fn cdf_gap_zero_for_equal_measures() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.05]).collect();
        let m = PointMeasure::new(1, pts, vec![0.2; 5], None).unwrap();
        let p = pair(m.clone(), m);
        let g = radial_cdf_gap(&p, &[0.0], 0.1).unwrap();
        assert!(g.integral_gap.abs() < 1e-12);
        assert!(g.complement_length < 1e-12);
        assert_eq!(g.good_set.len(), 1);
    }

    #[test]
    fn cdf_gap_bounded_by_twice_w1() {
        let mu = dirac(vec![0.1, 0.0]);
        let nu = dirac(vec![-0.2, 0.1]);
        let p = pair(mu, nu);
        let w1 = w1_boundary(&p).unwrap().cost;
        for eps in [0.1, 0.3] {
            let g = radial_cdf_gap(&p, &[0.05, 0.05], eps).unwrap();
            assert!(g.integral_gap <= 2.0 * w1 + 1e-9);
            assert!(g.complement_length <= eps + 1e-9);
        }
    }

    #[test]
    fn plan_csv_marks_boundary() {
        let p = pair(dirac(vec![0.99, 0.0]), dirac(vec![-0.99, 0.0]));
        let r = w1_boundary(&p).unwrap();
        assert!((r.cost - 0.02).abs() < 1e-9);
        let csv = r.plan_csv();
        assert!(csv.contains("-1"));
        assert!(csv.starts_with("i,j,mass,cost"));
    }
}
