//! Small dense vector helpers and affine planes.
//!
//! Planes are stored as a base point plus an orthonormal frame; a plane of
//! dimension 0 is a single point and a plane of dimension n is all of space.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Modified Gram-Schmidt. Returns `None` when the rows are numerically
/// rank-deficient (pivot below 1e-10 after projection).
pub fn orthonormalize(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut v = row.clone();
        for e in &out {
            let c = dot(&v, e);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= c * ei;
            }
        }
        // second pass for numerical orthogonality
        for e in &out {
            let c = dot(&v, e);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= c * ei;
            }
        }
        let n = norm(&v);
        if n < 1e-10 {
            return None;
        }
        out.push(scale(&v, 1.0 / n));
    }
    Some(out)
}

/// A d-dimensional affine plane in R^n: base point plus orthonormal frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinePlane {
    pub base: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl AffinePlane {
    /// Builds a plane, orthonormalizing the given spanning rows.
    pub fn new(base: Vec<f64>, raw_frame: &[Vec<f64>]) -> Option<Self> {
        let frame = orthonormalize(raw_frame)?;
        Some(AffinePlane { base, frame })
    }

    pub fn point(base: Vec<f64>) -> Self {
        AffinePlane { base, frame: Vec::new() }
    }

    /// The full ambient space through the origin.
    pub fn full(n: usize) -> Self {
        let frame = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        AffinePlane { base: vec![0.0; n], frame }
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    /// Coordinates of the projection of `p` in the frame, relative to `base`.
    pub fn local_coords(&self, p: &[f64]) -> Vec<f64> {
        let rel = sub(p, &self.base);
        self.frame.iter().map(|e| dot(&rel, e)).collect()
    }

    /// Ambient point for local frame coordinates.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (c, e) in coords.iter().zip(&self.frame) {
            for (pi, ei) in p.iter_mut().zip(e) {
                *pi += c * ei;
            }
        }
        p
    }

    pub fn closest_point(&self, p: &[f64]) -> Vec<f64> {
        self.embed(&self.local_coords(p))
    }

    pub fn dist_to(&self, p: &[f64]) -> f64 {
        dist(p, &self.closest_point(p))
    }

    /// Point of the plane nearest to the origin.
    pub fn anchor(&self) -> Vec<f64> {
        self.closest_point(&vec![0.0; self.ambient_dim()])
    }

    /// Distance from the origin to the plane.
    pub fn dist_origin(&self) -> f64 {
        norm(&self.anchor())
    }

    /// Same plane re-based at its anchor (canonical base point).
    pub fn rebased_at_anchor(&self) -> Self {
        AffinePlane { base: self.anchor(), frame: self.frame.clone() }
    }

    /// Maps a plane expressed in rescaled ball coordinates (ball `B(x,r)`
    /// mapped to the unit ball) back to absolute coordinates.
    pub fn to_absolute(&self, center: &[f64], radius: f64) -> Self {
        let base = add(center, &scale(&self.base, radius));
        AffinePlane { base, frame: self.frame.clone() }
    }

    /// Requires the plane to meet the unit ball.
    pub fn require_meets_unit_ball(&self) -> Result<()> {
        let d = self.dist_origin();
        if self.dim() == self.ambient_dim() {
            return Ok(());
        }
        if d >= 1.0 {
            return Err(Error::PlaneMissesBall { dist: d });
        }
        Ok(())
    }
}

/// Operator-norm distance between the orthogonal projections onto the two
/// spanned subspaces (the parallel vector spaces; base points are ignored).
pub fn projector_gap(a: &AffinePlane, b: &AffinePlane) -> f64 {
    let n = a.ambient_dim();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for e in &a.frame {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += e[i] * e[j];
            }
        }
    }
    for e in &b.frame {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= e[i] * e[j];
            }
        }
    }
    let eig = m.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Weighted principal plane: weighted mean as base, top-d eigenvectors of the
/// weighted covariance as frame. Falls back to coordinate axes on degenerate
/// input.
pub fn pca_plane(points: &[&[f64]], weights: &[f64], d: usize) -> AffinePlane {
    let n = points[0].len();
    let wsum: f64 = weights.iter().sum();
    let mut mean = vec![0.0; n];
    for (p, &w) in points.iter().zip(weights) {
        for (m, &x) in mean.iter_mut().zip(*p) {
            *m += w * x;
        }
    }
    for m in mean.iter_mut() {
        *m /= wsum;
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (p, &w) in points.iter().zip(weights) {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += w * (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let rows: Vec<Vec<f64>> = order
        .iter()
        .take(d)
        .map(|&k| (0..n).map(|i| eig.eigenvectors[(i, k)]).collect())
        .collect();
    match AffinePlane::new(mean.clone(), &rows) {
        Some(p) => p,
        None => {
            let axes: Vec<Vec<f64>> = (0..d)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect();
            AffinePlane { base: mean, frame: axes }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_frames() {
        let rows = vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]];
        let f = orthonormalize(&rows).unwrap();
        assert!((norm(&f[0]) - 1.0).abs() < 1e-12);
        assert!((norm(&f[1]) - 1.0).abs() < 1e-12);
        assert!(dot(&f[0], &f[1]).abs() < 1e-12);
    }

    #[test]
    fn anchor_is_closest_to_origin() {
        let plane =
            AffinePlane::new(vec![0.5, 1.0], &[vec![1.0, 0.0]]).unwrap();
        let a = plane.anchor();
        assert!((a[0]).abs() < 1e-12);
        assert!((a[1] - 1.0).abs() < 1e-12);
        assert!((plane.dist_origin() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_gap_matches_sine_of_angle() {
        for phi in [0.1f64, 0.4, 1.0] {
            let a = AffinePlane::new(vec![0.0, 0.0], &[vec![1.0, 0.0]]).unwrap();
            let b =
                AffinePlane::new(vec![0.0, 0.0], &[vec![phi.cos(), phi.sin()]])
                    .unwrap();
            assert!((projector_gap(&a, &b) - phi.sin().abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_recovers_a_line() {
        let pts: Vec<Vec<f64>> =
            (0..20).map(|i| vec![i as f64 * 0.1, 2.0 + i as f64 * 0.2]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let w = vec![1.0; pts.len()];
        let plane = pca_plane(&refs, &w, 1);
        let dir = &plane.frame[0];
        let expect = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        let c = (dir[0] * expect[0] + dir[1] * expect[1]).abs();
        assert!(c > 1.0 - 1e-9);
    }
}
