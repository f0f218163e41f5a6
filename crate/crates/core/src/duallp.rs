//! Independent dual oracle for the boundary-vanishing W1.
//!
//! Solves the LP
//!
//!   max |sum_i psi_i (mu_i - nu_i)|
//!   s.t. |psi_i - psi_j| <= |z_i - z_j|   for all support pairs,
//!        |psi_i|         <= (1 - |z_i|)+  for all support points,
//!
//! with a bounded-variable tableau simplex over a growing working set of
//! pair constraints (violated rows are added until none remain, so the
//! returned value is the exact LP optimum). This route never touches the
//! flow solver in [`crate::transport`]; the two are compared in tests as a
//! primal-dual exactness check.

use crate::error::{Error, Result};
use crate::geometry::{dist, norm};
use crate::transport::TransportPair;

/// Default cap on the combined support size (the LP has O(N^2) constraints).
pub const N_LP: usize = 400;

const TOL: f64 = 1e-9;

/// Exact dual LP value for the pair. Fails with `TooLarge` when the combined
/// support exceeds `cap`.
pub fn w1_dual_oracle(pair: &TransportPair, cap: usize) -> Result<f64> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut obj: Vec<f64> = Vec::new();
    for i in 0..pair.mu.len() {
        points.push(pair.mu.point(i).to_vec());
        obj.push(pair.mu.weight(i));
    }
    for j in 0..pair.nu.len() {
        points.push(pair.nu.point(j).to_vec());
        obj.push(-pair.nu.weight(j));
    }
    let n = points.len();
    if n > cap {
        return Err(Error::TooLarge { size: n, cap });
    }

    // the feasible set is symmetric under psi -> -psi, so the absolute value
    // in the objective is attained by a single maximization
    let upper: Vec<f64> = points.iter().map(|p| (1.0 - norm(p)).max(0.0)).collect();
    let lower: Vec<f64> = upper.iter().map(|u| -u).collect();

    let mut rows: Vec<(usize, usize, f64)> = Vec::new(); // psi_a - psi_b <= d
    let mut in_set = std::collections::HashSet::new();

    // seed with each point's few nearest neighbors; the cutting loop adds the rest
    for a in 0..n {
        let mut ds: Vec<(f64, usize)> = (0..n)
            .filter(|&b| b != a)
            .map(|b| (dist(&points[a], &points[b]), b))
            .collect();
        ds.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        for &(d, b) in ds.iter().take(3) {
            let key = (a.min(b), a.max(b));
            if in_set.insert(key) {
                rows.push((key.0, key.1, d));
            }
        }
    }

    let mut psi;
    loop {
        psi = solve_working_set(&obj, &lower, &upper, &rows)?;
        // scan all pairs for violated constraints
        let mut violated: Vec<(f64, usize, usize, f64)> = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if in_set.contains(&(a, b)) {
                    continue;
                }
                let d = dist(&points[a], &points[b]);
                let v = (psi[a] - psi[b]).abs() - d;
                if v > TOL {
                    violated.push((v, a, b, d));
                }
            }
        }
        if violated.is_empty() {
            break;
        }
        violated.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
        for &(_, a, b, d) in violated.iter().take(2 * n.max(16)) {
            in_set.insert((a, b));
            rows.push((a, b, d));
        }
    }
    Ok(obj.iter().zip(&psi).map(|(c, p)| c * p).sum::<f64>().abs())
}

/// Bounded-variable primal simplex for
///   max c.psi  s.t.  psi_a - psi_b <= d and psi_b - psi_a <= d per row,
///                    lower <= psi <= upper.
/// Starts at psi = lower, which satisfies every pair row.
fn solve_working_set(
    obj: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: &[(usize, usize, f64)],
) -> Result<Vec<f64>> {
    let n = obj.len();
    let m = 2 * rows.len();
    let total = n + m; // structural + slack variables

    // tableau rows: constraint coefficients over structural columns; slack
    // columns start as the identity
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for &(a, b, d) in rows {
        let mut r1 = vec![0.0; total];
        r1[a] = 1.0;
        r1[b] = -1.0;
        let mut r2 = vec![0.0; total];
        r2[a] = -1.0;
        r2[b] = 1.0;
        rhs.push(d);
        rhs.push(d);
        tab.push(r1);
        tab.push(r2);
    }
    for (k, row) in tab.iter_mut().enumerate() {
        row[n + k] = 1.0;
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Status {
        Basic(usize), // row index
        AtLower,
        AtUpper,
    }
    let lb = |j: usize| if j < n { lower[j] } else { 0.0 };
    let ub = |j: usize| if j < n { upper[j] } else { f64::INFINITY };

    let mut status: Vec<Status> = (0..total)
        .map(|j| if j < n { Status::AtLower } else { Status::Basic(usize::MAX) })
        .collect();
    let mut basis: Vec<usize> = (0..m).map(|k| n + k).collect();
    for (k, &b) in basis.iter().enumerate() {
        status[b] = Status::Basic(k);
    }
    // basic values at psi = lower
    let mut xb: Vec<f64> = (0..m)
        .map(|k| {
            let mut v = rhs[k];
            for j in 0..n {
                v -= tab[k][j] * lower[j];
            }
            v
        })
        .collect();

    // reduced cost row (slacks cost 0)
    let mut red: Vec<f64> = (0..total).map(|j| if j < n { obj[j] } else { 0.0 }).collect();

    let max_iters = 400 * (m + n + 1);
    let mut bland = false;
    for iter in 0..max_iters {
        if iter == max_iters / 2 {
            bland = true;
        }
        // entering variable
        let mut enter: Option<(usize, bool)> = None; // (var, increasing)
        let mut best = TOL;
        for j in 0..total {
            match status[j] {
                Status::AtLower if red[j] > TOL => {
                    if bland {
                        enter = Some((j, true));
                        break;
                    }
                    if red[j] > best {
                        best = red[j];
                        enter = Some((j, true));
                    }
                }
                Status::AtUpper if red[j] < -TOL => {
                    if bland {
                        enter = Some((j, false));
                        break;
                    }
                    if -red[j] > best {
                        best = -red[j];
                        enter = Some((j, false));
                    }
                }
                _ => {}
            }
        }
        let (je, increasing) = match enter {
            Some(e) => e,
            None => {
                // assemble the solution
                let mut psi = vec![0.0; n];
                for j in 0..n {
                    psi[j] = match status[j] {
                        Status::Basic(k) => xb[k],
                        Status::AtLower => lower[j],
                        Status::AtUpper => upper[j],
                    };
                }
                return Ok(psi);
            }
        };

        // ratio test; sign of basic change: xb -= dir * t * col
        let dir = if increasing { 1.0 } else { -1.0 };
        let mut t_max = ub(je) - lb(je); // bound flip distance
        let mut leave: Option<usize> = None; // row index
        for k in 0..m {
            let a = dir * tab[k][je];
            if a > 1e-12 {
                let slack = xb[k] - lb(basis[k]);
                let t = slack / a;
                if t < t_max - 1e-15 {
                    t_max = t;
                    leave = Some(k);
                }
            } else if a < -1e-12 {
                let room = ub(basis[k]) - xb[k];
                if room.is_finite() {
                    let t = room / (-a);
                    if t < t_max - 1e-15 {
                        t_max = t;
                        leave = Some(k);
                    }
                }
            }
        }
        if t_max.is_infinite() {
            // cannot happen: psi is boxed
            return Err(Error::ScaleConstraintViolated { msg: "unbounded dual LP".into() });
        }
        let t = t_max.max(0.0);

        // update basic values
        for k in 0..m {
            xb[k] -= dir * t * tab[k][je];
        }

        match leave {
            None => {
                // bound flip
                status[je] = if increasing { Status::AtUpper } else { Status::AtLower };
            }
            Some(kl) => {
                let jl = basis[kl];
                // leaving variable lands on the bound it hit
                let a = dir * tab[kl][je];
                status[jl] = if a > 0.0 { Status::AtLower } else { Status::AtUpper };
                // pivot je into row kl
                let piv = tab[kl][je];
                let inv = 1.0 / piv;
                for v in tab[kl].iter_mut() {
                    *v *= inv;
                }
                let enter_value = if increasing { lb(je) + t } else { ub(je) - t };
                xb[kl] = enter_value;
                // row elimination touches only the tableau; basic values are
                // tracked incrementally by the direction step above
                let pivot_row = tab[kl].clone();
                for k in 0..m {
                    if k == kl {
                        continue;
                    }
                    let f = tab[k][je];
                    if f != 0.0 {
                        for (vk, vp) in tab[k].iter_mut().zip(&pivot_row) {
                            *vk -= f * vp;
                        }
                    }
                }
                let f = red[je];
                if f != 0.0 {
                    for (rj, vp) in red.iter_mut().zip(&pivot_row) {
                        *rj -= f * vp;
                    }
                }
                basis[kl] = je;
                status[je] = Status::Basic(kl);
            }
        }
    }
    Err(Error::ScaleConstraintViolated { msg: "dual LP failed to converge".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PointMeasure;
    use crate::transport::w1_boundary;

    fn dirac(p: Vec<f64>) -> PointMeasure {
        let d = p.len();
        PointMeasure::new(d, vec![p], vec![1.0], None).unwrap()
    }

    #[test]
    fn equal_measures_give_zero() {
        let m = dirac(vec![0.2, 0.1]);
        let p = TransportPair::new(m.clone(), m).unwrap();
        let v = w1_dual_oracle(&p, N_LP).unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn interior_dirac_pair_matches_witness() {
        let p = TransportPair::new(dirac(vec![0.0, 0.0]), dirac(vec![0.3, 0.0])).unwrap();
        let v = w1_dual_oracle(&p, N_LP).unwrap();
        assert!((v - 0.3).abs() < 1e-9, "dual value {v}");
    }

    #[test]
    fn primal_dual_equality_on_random_pairs() {
        let mut s = 3u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 1.8 - 0.9
        };
        for t in 0..20 {
            let na = 3 + (t % 5);
            let nb = 2 + (t % 7);
            let pa: Vec<Vec<f64>> = (0..na).map(|_| vec![next() * 0.75, next() * 0.75]).collect();
            let pb: Vec<Vec<f64>> = (0..nb).map(|_| vec![next() * 0.75, next() * 0.75]).collect();
            let ma = PointMeasure::new(2, pa, vec![1.0 / na as f64; na], None).unwrap();
            let mb = PointMeasure::new(2, pb, vec![1.0 / nb as f64; nb], None).unwrap();
            let pair = TransportPair::new(ma, mb).unwrap();
            let primal = w1_boundary(&pair).unwrap().cost;
            let dual = w1_dual_oracle(&pair, N_LP).unwrap();
            assert!(
                (primal - dual).abs() < 1e-6,
                "instance {t}: primal {primal} dual {dual}"
            );
        }
    }

    #[test]
    fn cap_is_enforced() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64) * 0.01]).collect();
        let m = PointMeasure::new(1, pts, vec![1.0 / 30.0; 30], None).unwrap();
        let p = TransportPair::new(m.clone(), m).unwrap();
        assert!(matches!(
            w1_dual_oracle(&p, 40),
            Err(Error::TooLarge { size: 60, cap: 40 })
        ));
    }
}
