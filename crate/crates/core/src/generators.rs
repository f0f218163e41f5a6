//! Deterministic generators for the example measure family used as the
//! test corpus: Dirac chains, strings of spheres, oceans of circles, the
//! broom, Haar-product densities, and Riesz products.
//!
//! All mass bookkeeping is exact at construction time; truncations of the
//! infinite constructions are documented per generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::PointMeasure;

/// Volume of the unit d-ball (Lebesgue).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Hausdorff measure of the sphere of radius `r` in R^n under the
/// normalization H^d(unit d-ball) = 1: surface area divided by the volume of
/// the unit (n-1)-ball.
pub fn normalized_sphere_area(n: usize, r: f64) -> f64 {
    let area = n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1);
    area / unit_ball_volume(n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainVariant {
    /// Atoms at 2^-j with mass 4^-j.
    Geometric,
    /// Atoms at 1/log(j) with gap masses, plus a uniform sample of (-1, 0].
    Slow,
}

/// Dirac chain on the line. The geometric variant places atoms at 2^-j with
/// mass 4^-j for j = 0..=j_max. The slow variant places atoms at
/// x_j = 1/log(j), j = 3..=j_max, with mass x_j - x_{j+1} and a closing atom
/// of mass x_{j_max} at x_{j_max}, so closed balls around 0 carry exactly
/// x_j of atomic mass; a Lebesgue sample of (-1, 0] is added.
pub fn gen_dirac_chain(variant: ChainVariant, j_max: usize) -> PointMeasure {
    assert!(j_max >= 2);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    match variant {
        ChainVariant::Geometric => {
            for j in 0..=j_max {
                pts.push(vec![2.0f64.powi(-(j as i32))]);
                ws.push(4.0f64.powi(-(j as i32)));
            }
        }
        ChainVariant::Slow => {
            let x = |j: usize| 1.0 / (j as f64).ln();
            for j in 3..j_max {
                pts.push(vec![x(j)]);
                ws.push(x(j) - x(j + 1));
            }
            pts.push(vec![x(j_max)]);
            ws.push(x(j_max));
            // continuum part: cells covering (-1, 0]
            let cells = 200usize;
            let step = 1.0 / cells as f64;
            for i in 0..cells {
                pts.push(vec![-(i as f64 + 0.5) * step]);
                ws.push(step);
            }
        }
    }
    PointMeasure::new(1, pts, ws, Some(format!("dirac_chain_{variant:?}"))).expect("valid chain")
}

/// Quasi-uniform points on the sphere of radius `r` around `center`:
/// Fibonacci spiral for n = 3, seeded normalized Gaussians otherwise.
fn sphere_points(n: usize, center: &[f64], r: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    if n == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for i in 0..count {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            out.push(vec![
                center[0] + r * rho * th.cos(),
                center[1] + r * rho * th.sin(),
                center[2] + r * z,
            ]);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let mut v: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
            let nn = crate::geometry::norm(&v).max(1e-12);
            for (vi, c) in v.iter_mut().zip(center) {
                *vi = c + r * *vi / nn;
            }
            out.push(v);
        }
    }
    out
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// String of spheres: spheres of radius eps/10 centered at j*eps*e1 for
/// j = 0..count, each carrying mass eps^(2-n) times the normalized sphere
/// area, so balls of radius r >> eps grow like c*r.
pub fn gen_string_of_spheres(
    n: usize,
    epsilon: f64,
    count: usize,
    pts_per_sphere: usize,
) -> PointMeasure {
    assert!(n >= 3);
    let r = epsilon / 10.0;
    let sphere_mass = epsilon.powi(2 - n as i32) * normalized_sphere_area(n, r);
    let w = sphere_mass / pts_per_sphere as f64;
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for j in 0..count {
        let mut center = vec![0.0; n];
        center[0] = j as f64 * epsilon;
        for p in sphere_points(n, &center, r, pts_per_sphere, 991 + j as u64) {
            pts.push(p);
            ws.push(w);
        }
    }
    PointMeasure::new(n, pts, ws, Some(format!("spheres_eps{epsilon}"))).expect("valid spheres")
}

/// Ocean of circles: circles of radius eps/10 in the (e1,e2)-plane centered
/// on the eps-lattice within [-box_half, box_half]^n, each with mass
/// eps^(n-1) times the normalized circumference.
pub fn gen_ocean_of_circles(
    n: usize,
    epsilon: f64,
    box_half: f64,
    pts_per_circle: usize,
) -> PointMeasure {
    assert!(n >= 2);
    let r = epsilon / 10.0;
    // normalized H^1 halves lengths (the unit interval has measure 1)
    let circle_mass = epsilon.powi(n as i32 - 1) * std::f64::consts::PI * r;
    let w = circle_mass / pts_per_circle as f64;
    let kmax = (box_half / epsilon).floor() as i64;
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    let mut index = vec![-kmax; n];
    'lattice: loop {
        let center: Vec<f64> = index.iter().map(|&k| k as f64 * epsilon).collect();
        for i in 0..pts_per_circle {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / pts_per_circle as f64;
            let mut p = center.clone();
            p[0] += r * th.cos();
            p[1] += r * th.sin();
            pts.push(p);
            ws.push(w);
        }
        for i in 0..n {
            index[i] += 1;
            if index[i] <= kmax {
                continue 'lattice;
            }
            index[i] = -kmax;
        }
        break;
    }
    PointMeasure::new(n, pts, ws, Some(format!("ocean_eps{epsilon}"))).expect("valid ocean")
}

/// The four-letter alphabet of planar offsets used by the broom.
const BROOM_ALPHABET: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];

/// Broom measure in R^3: for k = 0..=k_max, the 4^k vertical segments
/// E_k x [rho^(k+1), rho^k] carry 4^-k times linear Lebesgue measure;
/// `cell` is the sample spacing along segments (defaults to the height of
/// the finest generation when passed 0). The optional stick is {0} x [1, 2]
/// with unit linear density.
pub fn gen_broom(rho: f64, k_max: usize, stick: bool, cell: f64) -> PointMeasure {
    assert!(rho > 0.0 && rho < 0.5);
    let cell = if cell > 0.0 { cell } else { rho.powi(k_max as i32 + 1) * (1.0 - rho) };
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for k in 0..=k_max {
        let z_lo = rho.powi(k as i32 + 1);
        let z_hi = rho.powi(k as i32);
        let len = z_hi - z_lo;
        let m = ((len / cell).ceil() as usize).max(2);
        let seg_mass = 4.0f64.powi(-(k as i32)) * len;
        let w = seg_mass / m as f64;
        let dz = len / m as f64;
        // enumerate E_k in lexicographic digit order
        let count = 4usize.pow(k as u32);
        for code in 0..count {
            let mut x = 0.0;
            let mut y = 0.0;
            let mut c = code;
            for j in 1..=k {
                let digit = c % 4;
                c /= 4;
                let (ex, ey) = BROOM_ALPHABET[digit];
                let f = rho.powi(j as i32);
                x += f * ex;
                y += f * ey;
            }
            for i in 0..m {
                pts.push(vec![x, y, z_lo + (i as f64 + 0.5) * dz]);
                ws.push(w);
            }
        }
    }
    if stick {
        let m = ((1.0 / cell).ceil() as usize).clamp(50, 2000);
        let dz = 1.0 / m as f64;
        for i in 0..m {
            pts.push(vec![0.0, 0.0, 1.0 + (i as f64 + 0.5) * dz]);
            ws.push(dz);
        }
    }
    PointMeasure::new(3, pts, ws, Some(format!("broom_rho{rho}_k{k_max}"))).expect("valid broom")
}

/// Per-segment bookkeeping for the broom, used by tests: exact segment mass
/// is 4^-k (rho^k - rho^(k+1)).
pub fn broom_segment_mass(rho: f64, k: usize) -> f64 {
    4.0f64.powi(-(k as i32)) * (rho.powi(k as i32) - rho.powi(k as i32 + 1))
}

/// Haar product density on [0,1): G_N = prod over levels k = 0..=N of
/// (1 + a_k h_I) across the dyadic intervals of size 2^-k, represented as
/// weighted points at cell centers of the 2^-(N+2) grid.
pub fn gen_haar_product(a: &[f64], depth: usize) -> PointMeasure {
    assert!(a.len() > depth, "need a coefficient per level 0..=depth");
    assert!(a.iter().all(|x| x.abs() < 1.0));
    let cells = 1usize << (depth + 2);
    let step = 1.0 / cells as f64;
    let mut pts = Vec::with_capacity(cells);
    let mut ws = Vec::with_capacity(cells);
    for i in 0..cells {
        let x = (i as f64 + 0.5) * step;
        let mut g = 1.0;
        for (k, &ak) in a.iter().enumerate().take(depth + 1) {
            // right half of the level-k dyadic interval gets +1
            let right = ((x * 2.0f64.powi(k as i32 + 1)).floor() as i64) % 2 == 1;
            g *= if right { 1.0 + ak } else { 1.0 - ak };
        }
        pts.push(vec![x]);
        ws.push(g * step);
    }
    PointMeasure::new(1, pts, ws, Some(format!("haar_n{depth}"))).expect("valid haar")
}

/// Riesz product density F_N(x) = prod_k (1 + alpha_k cos(3^k x)) sampled on
/// a uniform grid of [0, 2pi); the grid integrates the trigonometric
/// polynomial exactly once it out-resolves the top frequency, giving total
/// mass 2pi.
pub fn gen_riesz_product(alpha: &[f64], grid: usize) -> PointMeasure {
    assert!(alpha.iter().all(|x| x.abs() < 1.0));
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut pts = Vec::with_capacity(grid);
    let mut ws = Vec::with_capacity(grid);
    for i in 0..grid {
        let x = i as f64 * step;
        let mut f = 1.0;
        for (k, &ak) in alpha.iter().enumerate() {
            f *= 1.0 + ak * (3.0f64.powi(k as i32 + 1) * x).cos();
        }
        if f > 1e-300 {
            pts.push(vec![x]);
            ws.push(f * step);
        }
    }
    PointMeasure::new(1, pts, ws, Some("riesz".into())).expect("valid riesz")
}

/// A parsed generator request, as accepted by the CLI `gen` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ExampleSpec {
    DiracChain { variant: ChainVariant, j_max: usize },
    Spheres { n: usize, epsilon: f64, count: usize, pts_per_sphere: usize },
    Ocean { n: usize, epsilon: f64, box_half: f64, pts_per_circle: usize },
    Broom { rho: f64, k_max: usize, stick: bool, cell: f64 },
    Haar { a: Vec<f64>, depth: usize },
    Riesz { alpha: Vec<f64>, grid: usize },
}

impl ExampleSpec {
    pub fn generate(&self) -> Result<PointMeasure> {
        Ok(match self {
            ExampleSpec::DiracChain { variant, j_max } => gen_dirac_chain(*variant, *j_max),
            ExampleSpec::Spheres { n, epsilon, count, pts_per_sphere } => {
                gen_string_of_spheres(*n, *epsilon, *count, *pts_per_sphere)
            }
            ExampleSpec::Ocean { n, epsilon, box_half, pts_per_circle } => {
                gen_ocean_of_circles(*n, *epsilon, *box_half, *pts_per_circle)
            }
            ExampleSpec::Broom { rho, k_max, stick, cell } => {
                gen_broom(*rho, *k_max, *stick, *cell)
            }
            ExampleSpec::Haar { a, depth } => gen_haar_product(a, *depth),
            ExampleSpec::Riesz { alpha, grid } => gen_riesz_product(alpha, *grid),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BallQuery;

    #[test]
    fn geometric_chain_closed_ball_masses() {
        let j_max = 10;
        let m = gen_dirac_chain(ChainVariant::Geometric, j_max);
        for j in 0..=j_max {
            let xj = 2.0f64.powi(-(j as i32));
            // closed ball: nudge an open ball just past the radius
            let mass = m.ball_mass(&BallQuery::new(vec![0.0], xj * (1.0 + 1e-12)));
            let expect: f64 = (j..=j_max).map(|i| 4.0f64.powi(-(i as i32))).sum();
            assert!((mass - expect).abs() < 1e-15, "j={j}: {mass} vs {expect}");
        }
        let atoms = m.detect_atoms(1e-6);
        assert_eq!(atoms.len(), j_max + 1);
        assert!(atoms.iter().all(|(p, _)| p[0] > 0.0));
    }

    #[test]
    fn slow_chain_ball_mass_identity() {
        let m = gen_dirac_chain(ChainVariant::Slow, 40);
        let x = |j: usize| 1.0 / (j as f64).ln();
        for j in [3usize, 10, 25] {
            let xj = x(j);
            // atomic part only: restrict to positive coordinates
            let mass: f64 = (0..m.len())
                .filter(|&i| m.point(i)[0] > 0.0 && m.point(i)[0] <= xj * (1.0 + 1e-12))
                .map(|i| m.weight(i))
                .sum();
            assert!((mass - xj).abs() < 1e-12, "j={j}: {mass} vs {xj}");
        }
    }

    #[test]
    fn sphere_mass_identity() {
        let eps = 0.1;
        let m = gen_string_of_spheres(3, eps, 5, 64);
        // per-sphere mass: eps^-1 * 4 r^2 with r = eps/10
        let expect = eps.powi(-1) * 4.0 * (eps / 10.0).powi(2);
        let per_sphere: f64 = (0..64).map(|i| m.weight(i)).sum();
        assert!((per_sphere - expect).abs() < 1e-6 * expect);
        // linear growth at scales >> eps: mass of B(center, R) ~ c R
        let q1 = m.ball_mass(&BallQuery::new(vec![0.2, 0.0, 0.0], 0.15));
        let q2 = m.ball_mass(&BallQuery::new(vec![0.2, 0.0, 0.0], 0.3));
        assert!(q2 / q1 > 1.4 && q2 / q1 < 2.6, "ratio {}", q2 / q1);
    }

    #[test]
    fn ocean_unit_ball_mass_order_one() {
        let m = gen_ocean_of_circles(2, 0.25, 1.5, 24);
        let mass = m.ball_mass(&BallQuery::new(vec![0.0, 0.0], 1.0));
        assert!(mass > 0.15 && mass < 3.0, "mass {mass}");
    }

    #[test]
    fn broom_segment_masses_exact() {
        let rho = 0.3;
        let k_max = 3;
        let m = gen_broom(rho, k_max, false, 0.0);
        let total: f64 = m.weights().iter().sum();
        let expect: f64 = (0..=k_max)
            .map(|k| 4.0f64.powi(k as i32) * broom_segment_mass(rho, k))
            .sum();
        assert!((total - expect).abs() < 1e-12);
        // push-forward to the vertical axis is Lebesgue on (rho^(k_max+1), 1)
        assert!((total - (1.0 - rho.powi(k_max as i32 + 1))).abs() < 1e-12);
    }

    #[test]
    fn haar_product_integrates_to_one() {
        for (a, n) in [(0.0, 6usize), (0.5, 6), (0.9, 8)] {
            let coeffs = vec![a; n + 1];
            let m = gen_haar_product(&coeffs, n);
            let total: f64 = m.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "a={a}: {total}");
        }
        // uniform when all coefficients vanish
        let m = gen_haar_product(&vec![0.0; 7], 6);
        let w0 = m.weight(0);
        assert!(m.weights().iter().all(|w| (w - w0).abs() < 1e-15));
    }

    #[test]
    fn haar_degenerates_with_large_coefficients() {
        let m = gen_haar_product(&vec![0.9; 9], 8);
        let wmin = m.weights().iter().cloned().fold(f64::INFINITY, f64::min);
        let wmax = m.weights().iter().cloned().fold(0.0f64, f64::max);
        assert!(wmax / wmin > 1e8, "ratio {}", wmax / wmin);
    }

    #[test]
    fn riesz_total_mass_two_pi() {
        let m = gen_riesz_product(&[0.5, 0.5, 0.5], 2048);
        let total: f64 = m.weights().iter().sum();
        assert!((total - 2.0 * std::f64::consts::PI).abs() < 1e-9, "{total}");
        let m0 = gen_riesz_product(&[0.0, 0.0], 512);
        let w0 = m0.weight(0);
        assert!(m0.weights().iter().all(|w| (w - w0).abs() < 1e-15));
    }
}
