//! Flat reference measures and the Wasserstein flatness numbers.
//!
//! `alpha_d` measures, for one location and scale, the W1 distance from the
//! rescaled local measure to the nearest normalized flat measure over a
//! d-plane meeting B(0,1/2). The plane search is a multi-start simplex
//! descent seeded by the local principal plane; the reported value is the
//! optimizer's best, which the surrounding theory tolerates up to a factor 2.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, norm, projector_gap, sub, AffinePlane};
use crate::measure::{cap_support, BallQuery, PointMeasure};
use crate::transport::{ground_cost, w1_boundary, TransportPair, TransportResult};

/// Search options for the plane optimizer.
#[derive(Debug, Clone)]
pub struct AlphaOptions {
    /// Lattice step of the flat reference measure; None picks a per-d default.
    pub grid_step: Option<f64>,
    /// Random restarts after the principal-plane and warm starts.
    pub n_rand_starts: usize,
    /// Support cap for the rescaled local measure (grid aggregation beyond).
    pub max_support: usize,
    /// Cost-evaluation cap per simplex descent.
    pub nm_max_evals: usize,
    /// Stop a descent when a sweep improves the cost by less than this.
    pub nm_tol: f64,
    pub seed: u64,
    /// Plane from a neighboring scale, in rescaled coordinates.
    pub warm_start: Option<AffinePlane>,
    /// Stop the multistart once a value at or below this is found (0 = off).
    pub early_accept: f64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            grid_step: None,
            n_rand_starts: 8,
            max_support: 160,
            nm_max_evals: 100,
            nm_tol: 1e-4,
            seed: 0,
            warm_start: None,
            early_accept: 0.0,
        }
    }
}

/// Default flat-measure lattice step per plane dimension. Dimensions 2 and
/// up use coarser grids to keep the transport supports tractable.
pub fn default_grid_step(d: usize) -> f64 {
    match d {
        0 | 1 => 0.02,
        2 => 0.1,
        _ => 0.22,
    }
}

/// Outcome of a flatness evaluation at one (center, radius, d).
#[derive(Debug, Clone)]
pub struct AlphaResult {
    /// The achieved W1 value, in [0, 2].
    pub value: f64,
    /// Best plane found, in rescaled coordinates (the unit-ball frame).
    pub plane: AffinePlane,
    /// Normalization constant of the flat measure, in [1, 2^d].
    pub c_v: f64,
    pub transport: TransportResult,
    pub restarts_used: usize,
}

#[derive(Serialize)]
struct AlphaJson<'a> {
    value: f64,
    plane_base: &'a [f64],
    plane_frame: &'a [Vec<f64>],
    c_v: f64,
    restarts: usize,
}

impl AlphaResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&AlphaJson {
            value: self.value,
            plane_base: &self.plane.base,
            plane_frame: &self.plane.frame,
            c_v: self.c_v,
            restarts: self.restarts_used,
        })
        .expect("alpha result serializes")
    }
}

/// c_V for a plane at distance t from the origin under the normalization
/// H^d(unit d-ball) = 1: the slice of the unit ball is a d-ball of radius
/// sqrt(1 - t^2).
pub fn flat_normalization(d: usize, dist_origin: f64) -> f64 {
    if d == 0 {
        return 1.0;
    }
    (1.0 - dist_origin * dist_origin).powf(-(d as f64) / 2.0)
}

/// Lattice sample of the flat measure on `plane` inside the unit ball, cell
/// weights proportional to intersected cell measure, total open-ball mass
/// exactly 1. Returns the measure and c_V.
pub fn flat_measure(plane: &AffinePlane, grid_step: f64) -> Result<(PointMeasure, f64)> {
    let n = plane.ambient_dim();
    let d = plane.dim();
    let t = plane.dist_origin();
    if d < n && t >= 1.0 {
        return Err(Error::PlaneMissesBall { dist: t });
    }
    let c_v = flat_normalization(d, if d == n { 0.0 } else { t });
    if d == 0 {
        let m = PointMeasure::new(n, vec![plane.base.clone()], vec![1.0], None)?;
        return Ok((m, c_v));
    }

    let anchored = plane.rebased_at_anchor();
    let slice_radius = if d == n { 1.0 } else { (1.0 - t * t).sqrt() };
    let h = grid_step;
    let kmax = (slice_radius / h).ceil() as i64;

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut index = vec![-kmax; d];
    'cells: loop {
        let coords: Vec<f64> = index.iter().map(|&k| k as f64 * h).collect();
        let rho2: f64 = coords.iter().map(|c| c * c).sum();
        if rho2 < slice_radius * slice_radius {
            let w = cell_weight(&coords, h, slice_radius, d);
            if w > 0.0 {
                let p = anchored.embed(&coords);
                if norm(&p) < 1.0 {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
        for i in 0..d {
            index[i] += 1;
            if index[i] <= kmax {
                continue 'cells;
            }
            index[i] = -kmax;
        }
        break;
    }
    if points.is_empty() {
        return Err(Error::PlaneMissesBall { dist: t });
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let m = PointMeasure::new(n, points, weights, None)?;
    Ok((m, c_v))
}

/// Measure of the cell around `coords` intersected with the slice disk of
/// radius `r`: exact interval length for d = 1, subgrid fraction otherwise.
fn cell_weight(coords: &[f64], h: f64, r: f64, d: usize) -> f64 {
    if d == 1 {
        let lo = (coords[0] - h / 2.0).max(-r);
        let hi = (coords[0] + h / 2.0).min(r);
        return (hi - lo).max(0.0);
    }
    let center_norm: f64 = coords.iter().map(|c| c * c).sum::<f64>();
    let reach = h * (d as f64).sqrt() / 2.0;
    if center_norm.sqrt() + reach < r {
        return h.powi(d as i32);
    }
    const SUB: usize = 4;
    let total = SUB.pow(d as u32);
    let mut inside = 0usize;
    let mut idx = vec![0usize; d];
    loop {
        let mut s = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            let off = ((k as f64 + 0.5) / SUB as f64 - 0.5) * h;
            let c = coords[i] + off;
            s += c * c;
        }
        if s < r * r {
            inside += 1;
        }
        let mut done = true;
        for v in idx.iter_mut() {
            *v += 1;
            if *v < SUB {
                done = false;
                break;
            }
            *v = 0;
        }
        if done {
            break;
        }
    }
    h.powi(d as i32) * inside as f64 / total as f64
}

/// Drops atoms outside the open unit ball and renormalizes the rest to mass 1.
fn normalize_unit_ball(m: &PointMeasure) -> Result<PointMeasure> {
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for i in 0..m.len() {
        let p = m.point(i);
        if norm(p) < 1.0 {
            pts.push(p.to_vec());
            ws.push(m.weight(i));
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyBall { center: vec![0.0; m.dim()], radius: 1.0 });
    }
    let total: f64 = ws.iter().sum();
    for w in ws.iter_mut() {
        *w /= total;
    }
    PointMeasure::new(m.dim(), pts, ws, None)
}

/// Rescaled local view with support capped for transport.
fn local_view(mu: &PointMeasure, q: &BallQuery, opts: &AlphaOptions) -> Result<PointMeasure> {
    mu.require_in_support(&q.center)?;
    mu.require_scale(q.radius)?;
    let local = mu.restrict_rescale(q, 1.0)?;
    let capped = cap_support(&local, opts.max_support, 0.01);
    normalize_unit_ball(&capped)
}

// --- Nelder-Mead simplex descent --------------------------------------------

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    {
        let v = f(x0);
        evals += 1;
        simplex.push((x0.to_vec(), v));
    }
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        evals += 1;
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);
    let mut last_sweep_best = simplex[0].1;
    let mut since_check = 0usize;

    while evals < max_evals {
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> =
            (0..n).map(|i| centroid[i] + (centroid[i] - worst.0[i])).collect();
        let fr = f(&reflect);
        evals += 1;
        if fr < simplex[0].1 {
            let expand: Vec<f64> =
                (0..n).map(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i])).collect();
            let fe = f(&expand);
            evals += 1;
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> =
                (0..n).map(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i])).collect();
            let fc = f(&contract);
            evals += 1;
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, bi) in entry.0.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    let v = f(&entry.0);
                    evals += 1;
                    entry.1 = v;
                }
            }
        }
        order(&mut simplex);
        since_check += 1;
        if since_check >= n + 1 {
            if last_sweep_best - simplex[0].1 < tol {
                break;
            }
            last_sweep_best = simplex[0].1;
            since_check = 0;
        }
    }
    (simplex[0].0.clone(), simplex[0].1)
}

// --- plane parameterization --------------------------------------------------

fn encode_plane(plane: &AffinePlane) -> Vec<f64> {
    let mut p = plane.base.clone();
    for row in &plane.frame {
        p.extend_from_slice(row);
    }
    p
}

fn decode_plane(params: &[f64], n: usize, d: usize) -> Option<AffinePlane> {
    let base = params[..n].to_vec();
    let rows: Vec<Vec<f64>> =
        (0..d).map(|i| params[n + i * n..n + (i + 1) * n].to_vec()).collect();
    AffinePlane::new(base, &rows)
}

/// Slides a plane parallel to itself until its anchor is inside B(0, 0.45).
fn make_feasible(plane: AffinePlane) -> AffinePlane {
    let a = plane.anchor();
    let t = norm(&a);
    if t < 0.45 || t == 0.0 {
        return plane;
    }
    let shift: Vec<f64> = a.iter().map(|x| x * (1.0 - 0.45 / t)).collect();
    AffinePlane { base: sub(&plane.base, &shift), frame: plane.frame }
}

const PENALTY_BASE: f64 = 2.5;

/// W1 against a Dirac mass: the optimal plan is separable, so the cost is a
/// weighted sum of shortcut distances.
fn dirac_cost(local: &PointMeasure, b: &[f64]) -> f64 {
    (0..local.len()).map(|i| local.weight(i) * ground_cost(local.point(i), b)).sum()
}

/// Flatness number for a fixed plane dimension d.
pub fn alpha_d(
    mu: &PointMeasure,
    q: &BallQuery,
    d: usize,
    opts: &AlphaOptions,
) -> Result<AlphaResult> {
    let n = mu.dim();
    assert!(d <= n, "plane dimension exceeds ambient dimension");
    let local = local_view(mu, q, opts)?;
    let h = opts.grid_step.unwrap_or_else(|| default_grid_step(d));

    if d == 0 {
        return alpha_dirac(&local, opts);
    }

    if d == n {
        let plane = AffinePlane::full(n);
        let (flat, c_v) = flat_measure(&plane, h)?;
        let pair = TransportPair::new(local, flat)?;
        let transport = w1_boundary(&pair)?;
        return Ok(AlphaResult { value: transport.cost, plane, c_v, transport, restarts_used: 1 });
    }

    let refs: Vec<&[f64]> = (0..local.len()).map(|i| local.point(i)).collect();
    let pca = make_feasible(crate::geometry::pca_plane(&refs, local.weights(), d));

    let mut starts: Vec<AffinePlane> = vec![pca.clone()];
    if let Some(w) = &opts.warm_start {
        if w.dim() == d {
            starts.push(make_feasible(w.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((d as u64) << 32) ^ 0x9e37_79b9);
    for _ in 0..opts.n_rand_starts {
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let rows: Vec<Vec<f64>> =
            (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Some(p) = AffinePlane::new(base, &rows) {
            starts.push(make_feasible(p));
        }
    }

    let mut cost_fn = |params: &[f64]| -> f64 {
        let plane = match decode_plane(params, n, d) {
            Some(p) => p,
            None => return PENALTY_BASE + 1.0,
        };
        let t = plane.dist_origin();
        if t >= 0.5 {
            return PENALTY_BASE + t;
        }
        let (flat, _) = match flat_measure(&plane, h) {
            Ok(f) => f,
            Err(_) => return PENALTY_BASE + 1.0,
        };
        let pair = match TransportPair::new(local.clone(), flat) {
            Ok(p) => p,
            Err(_) => return PENALTY_BASE + 1.0,
        };
        match w1_boundary(&pair) {
            Ok(r) => r.cost,
            Err(_) => PENALTY_BASE + 1.0,
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restarts_used = 0usize;
    for plane in &starts {
        restarts_used += 1;
        let x0 = encode_plane(plane);
        let (x, v) = nelder_mead(&mut cost_fn, &x0, 0.15, opts.nm_max_evals, opts.nm_tol);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((x, v));
        }
        if opts.early_accept > 0.0 && best.as_ref().unwrap().1 <= opts.early_accept {
            break;
        }
    }
    let (bx, _) = best.expect("at least one start");
    let plane = decode_plane(&bx, n, d).map(make_feasible).unwrap_or(pca);
    let (flat, c_v) = flat_measure(&plane, h)?;
    let pair = TransportPair::new(local, flat)?;
    let transport = w1_boundary(&pair)?;
    Ok(AlphaResult { value: transport.cost, plane, c_v, transport, restarts_used })
}

fn alpha_dirac(local: &PointMeasure, opts: &AlphaOptions) -> Result<AlphaResult> {
    let n = local.dim();
    let mut centroid = vec![0.0; n];
    let total: f64 = local.weights().iter().sum();
    for i in 0..local.len() {
        for (c, x) in centroid.iter_mut().zip(local.point(i)) {
            *c += local.weight(i) * x / total;
        }
    }
    let t = norm(&centroid);
    if t > 0.45 {
        for c in centroid.iter_mut() {
            *c *= 0.45 / t;
        }
    }
    let mut cost_fn = |b: &[f64]| -> f64 {
        let t = norm(b);
        if t >= 0.5 {
            return PENALTY_BASE + t;
        }
        dirac_cost(local, b)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xd1ac);
    let mut starts = vec![centroid];
    for _ in 0..opts.n_rand_starts.min(4) {
        starts.push((0..n).map(|_| rng.gen_range(-0.3..0.3)).collect());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restarts_used = 0usize;
    for s in &starts {
        restarts_used += 1;
        let (x, v) = nelder_mead(&mut cost_fn, s, 0.1, opts.nm_max_evals, opts.nm_tol);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((x, v));
        }
        if opts.early_accept > 0.0 && best.as_ref().unwrap().1 <= opts.early_accept {
            break;
        }
    }
    let (bx, _) = best.expect("at least one start");
    let plane = AffinePlane::point(bx);
    let (flat, c_v) = flat_measure(&plane, 0.02)?;
    let pair = TransportPair::new(local.clone(), flat)?;
    let transport = w1_boundary(&pair)?;
    Ok(AlphaResult { value: transport.cost, plane, c_v, transport, restarts_used })
}

/// Minimum of alpha_d over d = 0..=n; ties within 1e-6 go to the smaller d.
pub fn alpha_min(
    mu: &PointMeasure,
    q: &BallQuery,
    opts: &AlphaOptions,
) -> Result<(AlphaResult, usize)> {
    let n = mu.dim();
    let mut best: Option<(AlphaResult, usize)> = None;
    for d in 0..=n {
        let mut o = opts.clone();
        if let Some(w) = &opts.warm_start {
            if w.dim() != d {
                o.warm_start = None;
            }
        }
        let r = alpha_d(mu, q, d, &o)?;
        match &best {
            Some((b, _)) if r.value >= b.value - 1e-6 => {}
            _ => best = Some((r, d)),
        }
    }
    Ok(best.expect("n >= 0"))
}

/// Averaged or sup distance to the best d-plane meeting B(x, r/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaMode {
    Avg,
    Sup,
}

pub fn beta(
    mu: &PointMeasure,
    q: &BallQuery,
    d: usize,
    mode: BetaMode,
    opts: &AlphaOptions,
) -> Result<f64> {
    let n = mu.dim();
    assert!(d >= 1 && d <= n);
    if d == n {
        return Ok(0.0);
    }
    let mut o = opts.clone();
    o.max_support = o.max_support.max(400);
    let local = local_view(mu, q, &o)?;
    let refs: Vec<&[f64]> = (0..local.len()).map(|i| local.point(i)).collect();

    let score = |plane: &AffinePlane| -> f64 {
        match mode {
            BetaMode::Avg => (0..local.len())
                .map(|i| local.weight(i) * plane.dist_to(local.point(i)))
                .sum(),
            BetaMode::Sup => (0..local.len())
                .map(|i| plane.dist_to(local.point(i)))
                .fold(0.0f64, f64::max),
        }
    };
    let mut cost_fn = |params: &[f64]| -> f64 {
        let plane = match decode_plane(params, n, d) {
            Some(p) => p,
            None => return PENALTY_BASE + 1.0,
        };
        let t = plane.dist_origin();
        if t >= 0.5 {
            return PENALTY_BASE + t;
        }
        score(&plane)
    };
    let mut starts = vec![make_feasible(crate::geometry::pca_plane(&refs, local.weights(), d))];
    if let Some(w) = &opts.warm_start {
        if w.dim() == d {
            starts.push(make_feasible(w.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xbe7a);
    for _ in 0..opts.n_rand_starts {
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let rows: Vec<Vec<f64>> =
            (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Some(p) = AffinePlane::new(base, &rows) {
            starts.push(make_feasible(p));
        }
    }
    let mut best = f64::INFINITY;
    for plane in &starts {
        let (_, v) =
            nelder_mead(&mut cost_fn, &encode_plane(plane), 0.15, opts.nm_max_evals, opts.nm_tol);
        best = best.min(v);
    }
    Ok(best)
}

/// Max over a grid on `plane` within B(0, 1/2) of the distance to the local
/// support, in rescaled units. The plane comes from an [`AlphaResult`] at the
/// same query and is given in rescaled coordinates.
pub fn hole_distance(mu: &PointMeasure, q: &BallQuery, plane: &AffinePlane) -> Result<f64> {
    let local = mu.restrict_rescale(q, 1.0)?;
    let t = plane.dist_origin();
    if t >= 0.5 {
        return Err(Error::PlaneMissesBall { dist: t });
    }
    if plane.dim() == 0 {
        let (_, dn) = local.tree().nearest(&plane.base).expect("nonempty");
        return Ok(dn);
    }
    let anchored = plane.rebased_at_anchor();
    let d = plane.dim();
    let radius = (0.25 - t * t).sqrt();
    let h = (local.resolution_floor()).max(0.02);
    let kmax = (radius / h).ceil() as i64;
    let mut worst = 0.0f64;
    let mut index = vec![-kmax; d];
    'grid: loop {
        let coords: Vec<f64> = index.iter().map(|&k| k as f64 * h).collect();
        if coords.iter().map(|c| c * c).sum::<f64>() < radius * radius {
            let p = anchored.embed(&coords);
            if norm(&p) < 0.5 {
                if let Some((_, dn)) = local.tree().nearest(&p) {
                    worst = worst.max(dn);
                }
            }
        }
        for i in 0..d {
            index[i] += 1;
            if index[i] <= kmax {
                continue 'grid;
            }
            index[i] = -kmax;
        }
        break;
    }
    Ok(worst)
}

/// Mutual deviation and angle between planes found at two nested scales.
#[derive(Debug, Clone, Copy)]
pub struct PlaneDrift {
    /// Max over the fine-scale plane within B(x, 2r) of the distance to the
    /// coarse-scale plane.
    pub max_dev_rt: f64,
    /// The symmetric quantity.
    pub max_dev_tr: f64,
    /// Operator-norm distance of the two orthogonal projections.
    pub angle: f64,
}

pub fn plane_drift(
    coarse: &AlphaResult,
    q_coarse: &BallQuery,
    fine: &AlphaResult,
    q_fine: &BallQuery,
) -> Result<PlaneDrift> {
    let r = q_coarse.radius;
    let t = q_fine.radius;
    let sep = dist(&q_coarse.center, &q_fine.center);
    if !(t <= r && sep + t / 2.0 < r) {
        return Err(Error::ScaleConstraintViolated {
            msg: format!("need t <= r and |x-y| + t/2 < r (r={r}, t={t}, |x-y|={sep})"),
        });
    }
    let w_coarse = coarse.plane.to_absolute(&q_coarse.center, r);
    let w_fine = fine.plane.to_absolute(&q_fine.center, t);

    let dev = |from: &AffinePlane, to: &AffinePlane| -> f64 {
        if from.dim() == 0 {
            return if dist(&from.base, &q_coarse.center) < 2.0 * r {
                to.dist_to(&from.base)
            } else {
                0.0
            };
        }
        let center_proj = from.local_coords(&q_coarse.center);
        let off = from.dist_to(&q_coarse.center);
        let r2 = 2.0 * r;
        if off >= r2 {
            return 0.0;
        }
        let radius = (r2 * r2 - off * off).sqrt();
        let d = from.dim();
        let h = radius / 10.0;
        let kmax = (radius / h).ceil() as i64;
        let mut worst = 0.0f64;
        let mut index = vec![-kmax; d];
        'grid: loop {
            let local: Vec<f64> = index
                .iter()
                .zip(&center_proj)
                .map(|(&k, c)| c + k as f64 * h)
                .collect();
            let p = from.embed(&local);
            if dist(&p, &q_coarse.center) < r2 {
                worst = worst.max(to.dist_to(&p));
            }
            for i in 0..d {
                index[i] += 1;
                if index[i] <= kmax {
                    continue 'grid;
                }
                index[i] = -kmax;
            }
            break;
        }
        worst
    };

    Ok(PlaneDrift {
        max_dev_rt: dev(&w_fine, &w_coarse),
        max_dev_tr: dev(&w_coarse, &w_fine),
        angle: projector_gap(&coarse.plane, &fine.plane),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_sample(n_pts: usize, half: f64) -> PointMeasure {
        // node grid including the endpoints and, for odd counts, the origin
        assert!(n_pts % 2 == 1);
        let step = 2.0 * half / (n_pts - 1) as f64;
        let pts: Vec<Vec<f64>> =
            (0..n_pts).map(|i| vec![-half + i as f64 * step, 0.0]).collect();
        PointMeasure::new(2, pts, vec![step; n_pts], None).unwrap()
    }

    #[test]
    fn flat_measure_central_line() {
        let plane = AffinePlane::new(vec![0.0, 0.0], &[vec![1.0, 0.0]]).unwrap();
        let (m, c_v) = flat_measure(&plane, 0.05).unwrap();
        assert!((c_v - 1.0).abs() < 1e-12);
        let unit = BallQuery::new(vec![0.0, 0.0], 1.0);
        assert!((m.ball_mass(&unit) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_normalization_matches_slice_formula() {
        // c_v = 2^d at distance sqrt(3)/2
        let t = 3.0f64.sqrt() / 2.0;
        for d in 1..=3usize {
            let c = flat_normalization(d, t);
            assert!((c - 2.0f64.powi(d as i32)).abs() < 1e-9, "d={d}: {c}");
        }
        // and 2/sqrt(3) at distance 1/2 for d = 1
        assert!((flat_normalization(1, 0.5) - 2.0 / 3.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn flat_measure_off_center_line_mass() {
        let plane = AffinePlane::new(vec![0.0, 0.5], &[vec![1.0, 0.0]]).unwrap();
        let (m, c_v) = flat_measure(&plane, 0.02).unwrap();
        assert!((c_v - flat_normalization(1, 0.5)).abs() < 1e-12);
        let unit = BallQuery::new(vec![0.0, 0.0], 1.0);
        assert!((m.ball_mass(&unit) - 1.0).abs() < 1e-12);
        // all atoms on the plane, inside the ball
        for i in 0..m.len() {
            assert!((m.point(i)[1] - 0.5).abs() < 1e-12);
            assert!(norm(m.point(i)) < 1.0);
        }
    }

    #[test]
    fn alpha_zero_for_dirac_at_origin() {
        let m = PointMeasure::new(2, vec![vec![0.0, 0.0]], vec![1.0], None).unwrap();
        let q = BallQuery::new(vec![0.0, 0.0], 1.0);
        let r = alpha_d(&m, &q, 0, &AlphaOptions::default()).unwrap();
        assert!(r.value < 1e-9, "alpha_0 = {}", r.value);
        assert!(norm(&r.plane.base) < 1e-6);
    }

    #[test]
    fn alpha_small_on_flat_line() {
        let m = line_sample(81, 1.2);
        let q = BallQuery::new(vec![0.0, 0.0], 1.0);
        let mut opts = AlphaOptions::default();
        opts.n_rand_starts = 2;
        let r = alpha_d(&m, &q, 1, &opts).unwrap();
        assert!(r.value < 0.05, "alpha_1 = {}", r.value);
        assert!(r.c_v >= 1.0 && r.c_v <= 2.0);
        // the found line is nearly horizontal
        assert!(r.plane.frame[0][1].abs() < 0.1);
    }

    #[test]
    fn alpha_min_picks_dimension_one_for_a_line() {
        let m = line_sample(81, 1.2);
        let q = BallQuery::new(vec![0.0, 0.0], 1.0);
        let mut opts = AlphaOptions::default();
        opts.n_rand_starts = 2;
        let (_, d) = alpha_min(&m, &q, &opts).unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn beta_zero_on_collinear_support() {
        let m = line_sample(81, 1.2);
        let q = BallQuery::new(vec![0.0, 0.0], 1.0);
        let mut opts = AlphaOptions::default();
        opts.n_rand_starts = 2;
        let avg = beta(&m, &q, 1, BetaMode::Avg, &opts).unwrap();
        let sup = beta(&m, &q, 1, BetaMode::Sup, &opts).unwrap();
        assert!(avg < 5e-3, "avg = {avg}");
        assert!(sup < 5e-2, "sup = {sup}");
        assert!(avg <= sup + 1e-9);
    }

    #[test]
    fn hole_distance_sees_a_gap() {
        // two half-lines with a hole in the middle
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        let step = 0.02;
        let mut x = -1.2f64;
        while x < 1.2 {
            if x.abs() > 0.3 {
                pts.push(vec![x, 0.0]);
                ws.push(step);
            }
            x += step;
        }
        let m = PointMeasure::new(2, pts, ws, None).unwrap();
        let q = BallQuery::new(vec![0.35, 0.0], 1.0);
        let plane = AffinePlane::new(vec![-0.35, 0.0], &[vec![1.0, 0.0]]).unwrap();
        let hd = hole_distance(&m, &q, &plane).unwrap();
        assert!(hd > 0.1, "hole distance = {hd}");
        // flat measure on its own support has only grid-scale holes
        let q0 = BallQuery::new(vec![-0.8, 0.0], 0.35);
        let plane0 = AffinePlane::new(vec![0.0, 0.0], &[vec![1.0, 0.0]]).unwrap();
        let hd0 = hole_distance(&m, &q0, &plane0).unwrap();
        assert!(hd0 < 0.1, "flat hole distance = {hd0}");
    }

    #[test]
    fn plane_drift_identical_planes() {
        let m = line_sample(81, 1.2);
        let qc = BallQuery::new(vec![0.0, 0.0], 1.0);
        let qf = BallQuery::new(vec![0.1, 0.0], 0.5);
        let mut opts = AlphaOptions::default();
        opts.n_rand_starts = 1;
        let rc = alpha_d(&m, &qc, 1, &opts).unwrap();
        let rf = alpha_d(&m, &qf, 1, &opts).unwrap();
        let drift = plane_drift(&rc, &qc, &rf, &qf).unwrap();
        assert!(drift.angle < 0.15, "angle = {}", drift.angle);
        assert!(drift.max_dev_rt < 0.2 && drift.max_dev_tr < 0.2);
    }

    #[test]
    fn plane_drift_rejects_bad_scales() {
        let m = line_sample(41, 1.2);
        let q = BallQuery::new(vec![0.0, 0.0], 0.5);
        let opts = AlphaOptions::default();
        let r = alpha_d(&m, &q, 1, &opts).unwrap();
        let qfar = BallQuery::new(vec![0.9, 0.0], 0.5);
        let rfar = alpha_d(&m, &qfar, 1, &opts).unwrap();
        assert!(matches!(
            plane_drift(&r, &q, &rfar, &qfar),
            Err(Error::ScaleConstraintViolated { .. })
        ));
    }
}
