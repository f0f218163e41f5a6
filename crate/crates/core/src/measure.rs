//! Finite weighted point measures: ball masses, rescaled local views,
//! doubling statistics, atom detection.
//!
//! A `PointMeasure` stands for a Radon measure at a fixed resolution; every
//! ball query uses the open-ball convention with exact comparisons, so points
//! sitting exactly on a sphere are outside.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::KdTree;

/// A ball query `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQuery {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallQuery {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        BallQuery { center, radius }
    }
}

/// Estimated doubling behavior over a sampled scale band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingStats {
    /// Largest sampled ratio mass(B(x,2r)) / mass(B(x,r)).
    pub c_delta: f64,
    /// Exponent with (2 c_delta)^eta = 2.
    pub eta: f64,
    /// Dyadic exponents (k_min, k_max) of the sampled band, radii in
    /// [2^-k_max, 2^-k_min].
    pub scale_range: (i32, i32),
}

impl DoublingStats {
    pub fn from_c_delta(c_delta: f64, scale_range: (i32, i32)) -> Self {
        let eta = std::f64::consts::LN_2 / (2.0 * c_delta).ln();
        DoublingStats { c_delta, eta, scale_range }
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// A finite weighted point set in R^n. Immutable after construction; all
/// operations are pure, so values can be shared freely across workers.
#[derive(Debug, Clone)]
pub struct PointMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    label: Option<String>,
    tree: KdTree,
    total_mass: f64,
    resolution_floor: f64,
}

impl PointMeasure {
    /// Builds a measure from raw points, merging exactly-coincident points by
    /// summing their weights. Weights must be strictly positive and finite.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>, label: Option<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure { index: 0, msg: "ambient dimension must be >= 1".into() });
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure {
                index: points.len().min(weights.len()),
                msg: format!("{} points but {} weights", points.len(), weights.len()),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidMeasure { index: 0, msg: "measure has no points".into() });
        }
        let mut coords: Vec<f64> = Vec::with_capacity(points.len() * dim);
        let mut merged_w: Vec<f64> = Vec::with_capacity(points.len());
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, (p, &w)) in points.iter().zip(&weights).enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidMeasure {
                    index: i,
                    msg: format!("point has {} coordinates, expected {}", p.len(), dim),
                });
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidMeasure { index: i, msg: "non-finite coordinate".into() });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidMeasure { index: i, msg: format!("weight {w} is not strictly positive and finite") });
            }
            let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
            match seen.get(&key) {
                Some(&j) => merged_w[j] += w,
                None => {
                    seen.insert(key, merged_w.len());
                    coords.extend_from_slice(p);
                    merged_w.push(w);
                }
            }
        }
        let total_mass: f64 = merged_w.iter().sum();
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::InvalidMeasure { index: 0, msg: "total mass must be finite and positive".into() });
        }
        let tree = KdTree::build(dim, &coords);
        let resolution_floor = tree.min_pairwise_distance();
        Ok(PointMeasure { dim, coords, weights: merged_w, label, tree, total_mass, resolution_floor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Minimum pairwise distance among support points (0 for singletons).
    pub fn resolution_floor(&self) -> f64 {
        self.resolution_floor
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Smallest scale at which multiscale diagnostics are meaningful.
    pub fn scale_floor(&self) -> f64 {
        4.0 * self.resolution_floor
    }

    pub fn require_scale(&self, scale: f64) -> Result<()> {
        if scale < self.scale_floor() {
            return Err(Error::ResolutionTooFine { scale, floor: self.resolution_floor });
        }
        Ok(())
    }

    /// Support membership within tolerance `resolution_floor / 2`.
    pub fn require_in_support(&self, x: &[f64]) -> Result<()> {
        let tol = (self.resolution_floor / 2.0).max(1e-12);
        match self.tree.nearest(x) {
            Some((_, d)) if d <= tol => Ok(()),
            _ => Err(Error::NotInSupport { point: x.to_vec(), tol }),
        }
    }

    /// Mass of the open ball.
    pub fn ball_mass(&self, q: &BallQuery) -> f64 {
        self.tree
            .within_open_ball(&q.center, q.radius)
            .into_iter()
            .map(|i| self.weights[i])
            .sum()
    }

    /// Indices of support points strictly inside the ball.
    pub fn ball_indices(&self, q: &BallQuery) -> Vec<usize> {
        let mut v = self.tree.within_open_ball(&q.center, q.radius);
        v.sort_unstable();
        v
    }

    /// The rescaled view: points `(p - center)/radius` for |p - center| <
    /// radius * r_keep, weights divided by the open-ball mass of `q`. The
    /// restriction of the result to the open unit ball has total mass 1.
    pub fn restrict_rescale(&self, q: &BallQuery, r_keep: f64) -> Result<PointMeasure> {
        let mass = self.ball_mass(q);
        if mass <= 0.0 {
            return Err(Error::EmptyBall { center: q.center.clone(), radius: q.radius });
        }
        let keep = self.tree.within_open_ball(&q.center, q.radius * r_keep);
        let mut idx = keep;
        idx.sort_unstable();
        let mut points = Vec::with_capacity(idx.len());
        let mut weights = Vec::with_capacity(idx.len());
        for i in idx {
            let p = self.point(i);
            points.push(
                p.iter().zip(&q.center).map(|(a, c)| (a - c) / q.radius).collect::<Vec<f64>>(),
            );
            weights.push(self.weights[i] / mass);
        }
        PointMeasure::new(self.dim, points, weights, None)
    }

    /// Largest sampled doubling ratio over `centers x radii`. Radii are the
    /// dyadic band [2^-k_max, 2^-k_min]; each sampled small ball must contain
    /// at least `n_min` points.
    pub fn doubling_constant(
        &self,
        centers: &[Vec<f64>],
        scale_range: (i32, i32),
        n_min: usize,
    ) -> Result<DoublingStats> {
        let (k_min, k_max) = scale_range;
        let mut c = 1.0f64;
        for x in centers {
            self.require_in_support(x)?;
            for k in k_min..=k_max {
                let r = 2.0f64.powi(-k);
                self.require_scale(r)?;
                let small = BallQuery::new(x.clone(), r);
                let count = self.tree.within_open_ball(x, r).len();
                if count < n_min {
                    return Err(Error::ResolutionTooFine { scale: r, floor: self.resolution_floor });
                }
                let m1 = self.ball_mass(&small);
                let m2 = self.ball_mass(&BallQuery::new(x.clone(), 2.0 * r));
                if m1 > 0.0 {
                    c = c.max(m2 / m1);
                }
            }
        }
        Ok(DoublingStats::from_c_delta(c, scale_range))
    }

    /// Support points whose ball of radius `scale_floor` contains only
    /// themselves, with their masses.
    pub fn detect_atoms(&self, scale_floor: f64) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let p = self.point(i);
            let alone = match self.tree.nearest_where(p, |j| j != i) {
                Some((_, d)) => d >= scale_floor,
                None => true,
            };
            if alone {
                out.push((p.to_vec(), self.weights[i]));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let points: Vec<Vec<f64>> = (0..self.len()).map(|i| self.point(i).to_vec()).collect();
        let j = MeasureJson {
            dim: self.dim,
            points,
            weights: self.weights.clone(),
            label: self.label.clone(),
        };
        serde_json::to_string_pretty(&j).expect("measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: MeasureJson = serde_json::from_str(s)?;
        PointMeasure::new(j.dim, j.points, j.weights, j.label)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }
}

/// Greedy grid aggregation: snaps points to a lattice of step `step`,
/// merging masses at cell centers. Used to cap transport support sizes; the
/// induced transport perturbation is at most `step * sqrt(n) / 2`.
pub fn aggregate_to_grid(m: &PointMeasure, step: f64) -> PointMeasure {
    let dim = m.dim();
    let mut cells: HashMap<Vec<i64>, (Vec<f64>, f64)> = HashMap::new();
    let mut order: Vec<Vec<i64>> = Vec::new();
    for i in 0..m.len() {
        let p = m.point(i);
        let key: Vec<i64> = p.iter().map(|x| (x / step).round() as i64).collect();
        let w = m.weight(i);
        match cells.get_mut(&key) {
            Some((c, cw)) => {
                for (cj, pj) in c.iter_mut().zip(p) {
                    *cj += w * pj;
                }
                *cw += w;
            }
            None => {
                order.push(key.clone());
                cells.insert(key, (p.iter().map(|x| x * w).collect(), w));
            }
        }
    }
    let mut points = Vec::with_capacity(order.len());
    let mut weights = Vec::with_capacity(order.len());
    for key in order {
        let (c, w) = &cells[&key];
        points.push(c.iter().map(|x| x / w).collect::<Vec<f64>>());
        weights.push(*w);
    }
    PointMeasure::new(dim, points, weights, m.label().map(|s| s.to_string()))
        .expect("aggregation preserves validity")
}

/// Caps the support size by coarsening the aggregation grid until it fits.
pub fn cap_support(m: &PointMeasure, max_points: usize, initial_step: f64) -> PointMeasure {
    if m.len() <= max_points {
        return m.clone();
    }
    let mut step = initial_step.max(1e-6);
    loop {
        let agg = aggregate_to_grid(m, step);
        if agg.len() <= max_points {
            return agg;
        }
        step *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mass_at(p: Vec<f64>) -> PointMeasure {
        let dim = p.len();
        PointMeasure::new(dim, vec![p], vec![1.0], None).unwrap()
    }

    #[test]
    fn single_atom_ball_masses() {
        let m = unit_mass_at(vec![0.0, 0.0, 0.0]);
        assert_eq!(m.ball_mass(&BallQuery::new(vec![0.0, 0.0, 0.0], 1.0)), 1.0);
        // open-ball boundary exclusion
        assert_eq!(m.ball_mass(&BallQuery::new(vec![1.0, 0.0, 0.0], 1.0)), 0.0);
    }

    #[test]
    fn monte_carlo_ball_volume() {
        // uniform 1000-point sample of [-1,1]^2 with total mass 2^2; the unit
        // ball catches ~pi of it
        let mut s = 7u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let pts: Vec<Vec<f64>> = (0..1000).map(|_| vec![next(), next()]).collect();
        let w = vec![4.0 / 1000.0; 1000];
        let m = PointMeasure::new(2, pts, w, None).unwrap();
        let vol = m.ball_mass(&BallQuery::new(vec![0.0, 0.0], 1.0));
        assert!((vol - std::f64::consts::PI).abs() < 0.25, "vol = {vol}");
    }

    #[test]
    fn coincident_points_merge() {
        let m = PointMeasure::new(
            1,
            vec![vec![0.5], vec![0.5], vec![1.0]],
            vec![1.0, 2.0, 3.0],
            None,
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.ball_mass(&BallQuery::new(vec![0.5], 0.1)), 3.0);
        assert_eq!(m.total_mass(), 6.0);
    }

    #[test]
    fn rescale_normalizes() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1]).collect();
        let m = PointMeasure::new(1, pts, vec![2.0; 10], None).unwrap();
        let q = BallQuery::new(vec![0.45], 2.0);
        let v = m.restrict_rescale(&q, 1.0).unwrap();
        assert!((v.ball_mass(&BallQuery::new(vec![0.0], 1.0)) - 1.0).abs() < 1e-12);
        // idempotent in law: rescaling the rescaled view by the unit ball
        let v2 = v.restrict_rescale(&BallQuery::new(vec![0.0], 1.0), 1.0).unwrap();
        assert_eq!(v.len(), v2.len());
        for i in 0..v.len() {
            assert!((v.weight(i) - v2.weight(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_ball_is_an_error() {
        let m = unit_mass_at(vec![0.0]);
        let e = m.restrict_rescale(&BallQuery::new(vec![5.0], 0.5), 1.0);
        assert!(matches!(e, Err(Error::EmptyBall { .. })));
    }

    #[test]
    fn doubling_eta_identity() {
        let s = DoublingStats::from_c_delta(2.0, (0, 4));
        assert!((s.eta - 0.5).abs() < 1e-12);
        let s = DoublingStats::from_c_delta(7.3, (0, 4));
        assert!(((2.0 * s.c_delta).powf(s.eta) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_sample_doubles_like_d1() {
        let pts: Vec<Vec<f64>> = (-400..=400).map(|i| vec![i as f64 / 100.0, 0.0]).collect();
        let m = PointMeasure::new(2, pts, vec![0.01; 801], None).unwrap();
        let stats = m
            .doubling_constant(&[vec![0.0, 0.0]], (0, 2), 4)
            .unwrap();
        assert!(stats.c_delta < 2.3, "c_delta = {}", stats.c_delta);
        assert!(stats.c_delta > 1.8);
    }

    #[test]
    fn atoms_in_a_chain() {
        // atoms at 2^-j with a uniform clump near -1
        let mut pts: Vec<Vec<f64>> = (0..8).map(|j| vec![2.0f64.powi(-j)]).collect();
        let mut w: Vec<f64> = (0..8).map(|j| 4.0f64.powi(-j)).collect();
        for i in 0..50 {
            pts.push(vec![-1.0 - i as f64 * 1e-4]);
            w.push(1e-4);
        }
        let m = PointMeasure::new(1, pts, w, None).unwrap();
        let atoms = m.detect_atoms(1e-3);
        assert_eq!(atoms.len(), 8);
    }

    #[test]
    fn json_round_trip() {
        let m = PointMeasure::new(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 2.0], Some("t".into())).unwrap();
        let m2 = PointMeasure::from_json(&m.to_json()).unwrap();
        assert_eq!(m2.len(), 2);
        assert_eq!(m2.label(), Some("t"));
        assert_eq!(m2.weight(1), 2.0);
    }

    #[test]
    fn loader_reports_first_violation() {
        let bad = r#"{"dim": 2, "points": [[0.0, 1.0], [1.0]], "weights": [1.0, 1.0]}"#;
        match PointMeasure::from_json(bad) {
            Err(Error::InvalidMeasure { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected InvalidMeasure, got {other:?}"),
        }
    }
}
