use super::{grid::NearestGrid, surface::DEFAULT_PROJECTION_TOL, LevelSetSurface, PointCloud};
use crate::{Error, Result, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Candidate-pool farthest insertion: per accepted point, draw k
    /// projected candidates and keep the one maximizing the minimum
    /// distance to the points accepted so far.
    FarthestPoint,
    /// Plain projected rejection sampling.
    Random,
    /// Half the budget restricted to |x| < 1, the rest unconstrained.
    Irregular,
}

fn draw_projected(
    surface: &LevelSetSurface,
    rng: &mut ChaCha8Rng,
    accept: &dyn Fn(Vec3) -> bool,
) -> Result<Vec3> {
    let (lo, hi) = surface.sample_box;
    for _ in 0..10_000 {
        let x = Vec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        if let Ok(p) = surface.project(x, DEFAULT_PROJECTION_TOL) {
            if surface.in_region(p) && accept(p) {
                return Ok(p);
            }
        }
    }
    Err(Error::Sampling(format!(
        "projection retry budget exhausted on {}",
        surface.name
    )))
}

pub(crate) fn min_dist(accepted: &[Vec3], x: Vec3) -> f64 {
    accepted
        .iter()
        .map(|p| (p - x).norm())
        .fold(f64::INFINITY, f64::min)
}

fn place_points(
    surface: &LevelSetSurface,
    n: usize,
    mode: SamplingMode,
    candidates_per_point: usize,
    rng: &mut ChaCha8Rng,
    accept: &dyn Fn(Vec3) -> bool,
) -> Result<Vec<Vec3>> {
    let mut accepted: Vec<Vec3> = Vec::with_capacity(n);
    while accepted.len() < n {
        let next = match mode {
            SamplingMode::Random | SamplingMode::Irregular => {
                draw_projected(surface, rng, accept)?
            }
            SamplingMode::FarthestPoint => {
                let k = candidates_per_point.max(1);
                let mut best = draw_projected(surface, rng, accept)?;
                let mut best_d = min_dist(&accepted, best);
                for _ in 1..k {
                    let c = draw_projected(surface, rng, accept)?;
                    let d = min_dist(&accepted, c);
                    if d > best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            }
        };
        accepted.push(next);
    }
    Ok(accepted)
}

/// Generate `n` points on the surface. Deterministic for a given seed.
pub fn sample_surface(
    surface: &LevelSetSurface,
    n: usize,
    mode: SamplingMode,
    candidates_per_point: usize,
    seed: u64,
) -> Result<PointCloud> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = match mode {
        SamplingMode::Irregular => {
            let mut half = place_points(
                surface,
                n / 2,
                SamplingMode::Random,
                candidates_per_point,
                &mut rng,
                &|p| p.x.abs() < 1.0,
            )?;
            half.extend(place_points(
                surface,
                n - n / 2,
                SamplingMode::Random,
                candidates_per_point,
                &mut rng,
                &|_| true,
            )?);
            half
        }
        m => place_points(surface, n, m, candidates_per_point, &mut rng, &|_| true)?,
    };
    let points = positions
        .into_iter()
        .map(|p| {
            let (normal, kappa) = surface.normal_and_curvature(p)?;
            Ok(super::SurfacePoint {
                position: p,
                normal,
                curvature_sum: Some(kappa),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        n_interior: points.len(),
        n_boundary: 0,
        points,
        seed,
    })
}

/// Convenience wrapper for the oversampled-in-|x| mode.
pub fn sample_surface_irregular(
    surface: &LevelSetSurface,
    n: usize,
    seed: u64,
) -> Result<PointCloud> {
    sample_surface(surface, n, SamplingMode::Irregular, 1, seed)
}

/// Scattered points in the flat unit disk (z = 0).
pub fn sample_disk(
    n: usize,
    mode: SamplingMode,
    candidates_per_point: usize,
    seed: u64,
) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let x = rng.gen_range(-1.0..1.0);
        let y = rng.gen_range(-1.0..1.0);
        if x * x + y * y < 1.0 {
            return Vec3::new(x, y, 0.0);
        }
    };
    let mut accepted: Vec<Vec3> = Vec::with_capacity(n);
    while accepted.len() < n {
        let next = match mode {
            SamplingMode::FarthestPoint => {
                let mut best = draw(&mut rng);
                let mut best_d = min_dist(&accepted, best);
                for _ in 1..candidates_per_point.max(1) {
                    let c = draw(&mut rng);
                    let d = min_dist(&accepted, c);
                    if d > best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            }
            _ => draw(&mut rng),
        };
        accepted.push(next);
    }
    accepted
}

/// Max over probes of the distance to the nearest cloud point: a lower bound
/// on the true fill distance.
pub fn fill_distance_of_points(cloud: &[Vec3], probes: &[Vec3]) -> f64 {
    let grid = NearestGrid::new(cloud.to_vec());
    probes
        .iter()
        .map(|p| grid.min_distance(*p))
        .fold(0.0, f64::max)
}

pub fn fill_distance_estimate(
    cloud: &PointCloud,
    surface: &LevelSetSurface,
    probe_count: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec3> = (0..probe_count)
        .map(|_| draw_projected(surface, &mut rng, &|_| true))
        .collect::<Result<_>>()?;
    let positions: Vec<Vec3> = cloud.positions().collect();
    Ok(fill_distance_of_points(&positions, &probes))
}
