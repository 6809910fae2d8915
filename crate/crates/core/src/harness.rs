//! Experiment registry and convergence-study driver.
//!
//! Each experiment integrates a known quantity at a sequence of cloud sizes
//! and reports relative errors against a pinned reference together with
//! fill-distance-based convergence orders. Results go to a stable CSV
//! schema so studies can be replayed and diffed.

use crate::fourier::{BoxDomain, FourierBasis, WeightMode};
use crate::geometry::{
    builtin_surface, fill_distance_estimate, fill_distance_of_points, planar_split_boundary,
    sample_disk, sample_surface, voronoi_partition, LevelSetSurface, PointCloud, SamplingMode,
    SurfacePoint,
};
use crate::integrators::{
    disk_log_flux, method1_ratio, method1_ratio_vpath, method2_integral,
    paraboloid_singular_flux, Subdomain, DEFAULT_CIRCLE_NODES,
};
use crate::linsolve::DEFAULT_RANK_TOLERANCE;
use crate::operators::LbVariant;
use crate::{Error, Parallelism, Result, Vec3};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::time::Instant;

/// Column header of every results CSV. Version 1; the schema-check test
/// parses emitted files against this exact header.
pub const CSV_HEADER: &str =
    "experiment,n_points,seed,estimate,reference,rel_error,h_max,order_est,wall_ms";

/// Boundary nodes used for planar-split experiments.
pub const SPLIT_BOUNDARY_NODES: usize = 2000;

/// Quadrature nodes per Voronoi face.
pub const VORONOI_FACE_NODES: usize = 100;

/// Seeds used by the Voronoi area experiment.
pub const VORONOI_SEED_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    AvgX2,
    VoronoiArea,
    PlanarArea,
    DiskLog,
    ParaboloidSingular,
    SphereSanity,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::AvgX2 => "avg_x2",
            Experiment::VoronoiArea => "voronoi_area",
            Experiment::PlanarArea => "planar_area",
            Experiment::DiskLog => "disk_log",
            Experiment::ParaboloidSingular => "paraboloid_singular",
            Experiment::SphereSanity => "sphere_sanity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightModeConfig {
    Separable,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverConfig {
    VPath,
    PhiPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingConfig {
    FarthestPoint,
    Random,
    Irregular,
}

impl From<SamplingConfig> for SamplingMode {
    fn from(s: SamplingConfig) -> SamplingMode {
        match s {
            SamplingConfig::FarthestPoint => SamplingMode::FarthestPoint,
            SamplingConfig::Random => SamplingMode::Random,
            SamplingConfig::Irregular => SamplingMode::Irregular,
        }
    }
}

/// Serializable box description: center, side lengths, and dimension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub center: [f64; 3],
    pub side_lengths: [f64; 3],
    pub dim: usize,
}

impl BoxConfig {
    pub fn to_domain(self) -> BoxDomain {
        BoxDomain::new(
            Vec3::new(self.center[0], self.center[1], self.center[2]),
            Vec3::new(
                self.side_lengths[0],
                self.side_lengths[1],
                self.side_lengths[2],
            ),
            self.dim,
        )
    }
}

/// Full description of one convergence study. JSON field names match the
/// struct fields except `T` (the weight period) and `box`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub surface: String,
    pub n_points: Vec<usize>,
    pub q: f64,
    #[serde(rename = "T")]
    pub t_period: f64,
    #[serde(rename = "box")]
    pub box_domain: BoxConfig,
    pub modes_per_axis: usize,
    pub weight_mode: WeightModeConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    pub sampling: SamplingConfig,
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points.is_empty() {
            return Err(Error::Config("n_points must be non-empty".into()));
        }
        if !self.n_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_points must be strictly increasing".into()));
        }
        if !(self.q > 0.0) || !(self.t_period > 0.0) {
            return Err(Error::Config("q and T must be positive".into()));
        }
        if self.modes_per_axis == 0 {
            return Err(Error::Config("modes_per_axis must be at least 1".into()));
        }
        let expected_dim = match self.experiment {
            Experiment::DiskLog => 2,
            _ => 3,
        };
        if self.box_domain.dim != expected_dim {
            return Err(Error::Config(format!(
                "{} needs a {}-dimensional box",
                self.experiment.label(),
                expected_dim
            )));
        }
        Ok(())
    }

    fn basis(&self) -> FourierBasis {
        FourierBasis::new(
            self.box_domain.to_domain(),
            self.modes_per_axis,
            self.q,
            self.t_period,
            match self.weight_mode {
                WeightModeConfig::Separable => WeightMode::Separable,
                WeightModeConfig::Joint => WeightMode::Joint,
            },
        )
    }

    fn solver_choice(&self) -> crate::integrators::SolverChoice {
        match self.solver {
            SolverConfig::VPath => crate::integrators::SolverChoice::VPath {
                rank_tolerance: DEFAULT_RANK_TOLERANCE,
            },
            SolverConfig::PhiPath => crate::integrators::SolverChoice::PhiPath,
        }
    }
}

/// One line of a convergence study. `order_estimate` compares against the
/// previous successful row; the first row has none. Failed rows carry the
/// error text and NaN numerics.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub experiment: String,
    pub n_points: usize,
    pub seed: u64,
    pub estimate: f64,
    pub reference: f64,
    pub rel_error: f64,
    pub h_max: f64,
    pub order_estimate: Option<f64>,
    pub wall_ms: u128,
    pub error: Option<String>,
}

/// Pinned reference values per (experiment, surface).
pub fn reference_value(experiment: Experiment, surface: &str) -> Result<f64> {
    let four_pi = 4.0 * std::f64::consts::PI;
    match experiment {
        Experiment::AvgX2 => match surface {
            "genus_two" => Ok(2.45884),
            _ => Err(Error::Config(format!(
                "no avg_x2 reference for surface {surface}"
            ))),
        },
        Experiment::VoronoiArea | Experiment::PlanarArea => match surface {
            "genus_two" => Ok(46.6189676876957),
            "sphere" => Ok(four_pi),
            _ => Err(Error::Config(format!(
                "no area reference for surface {surface}"
            ))),
        },
        Experiment::DiskLog => Ok(0.25),
        Experiment::ParaboloidSingular => Ok(-0.634060518),
        Experiment::SphereSanity => Ok(four_pi),
    }
}

/// Per-step convergence orders `p_k = ln(e_{k-1}/e_k) / ln(h_{k-1}/h_k)`.
/// The first entry is absent, as is any entry whose error pair is not
/// strictly positive (converged to the reference) or whose h pair is equal.
pub fn estimate_order(errors: &[f64], h_values: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), h_values.len());
    let mut out = vec![None; errors.len()];
    for k in 1..errors.len() {
        let (e0, e1) = (errors[k - 1], errors[k]);
        let (h0, h1) = (h_values[k - 1], h_values[k]);
        if e0 > 0.0 && e1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1 {
            out[k] = Some((e0 / e1).ln() / (h0 / h1).ln());
        }
    }
    out
}

/// Least-squares slope of `ln e` against `ln h` over rows with positive
/// errors; `None` with fewer than two usable rows.
pub fn fitted_order(errors: &[f64], h_values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(h_values)
        .filter(|&(&e, &h)| e > 0.0 && h > 0.0)
        .map(|(&e, &h)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    Some(sxy / sxx)
}

const H_PROBE_COUNT: usize = 4000;
const H_PROBE_SEED: u64 = 0x5eed_0f11;

fn surface_cloud(cfg: &ExperimentConfig, surface: &LevelSetSurface, n: usize) -> Result<PointCloud> {
    let candidates = match cfg.sampling {
        SamplingConfig::FarthestPoint => 10,
        _ => 1,
    };
    sample_surface(surface, n, cfg.sampling.into(), candidates, cfg.seed)
}

fn split_by_plane(cloud: &PointCloud) -> (Vec<SurfacePoint>, Vec<SurfacePoint>) {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for p in &cloud.points {
        if p.position.z >= 0.0 {
            upper.push(p.clone());
        } else {
            lower.push(p.clone());
        }
    }
    (upper, lower)
}

fn planar_area_estimate(
    cfg: &ExperimentConfig,
    surface: &LevelSetSurface,
    n: usize,
    par: Parallelism,
) -> Result<(f64, f64)> {
    let cloud = surface_cloud(cfg, surface, n)?;
    let h_max = fill_distance_estimate(&cloud, surface, H_PROBE_COUNT, H_PROBE_SEED)?;
    let (upper, lower) = split_by_plane(&cloud);
    let boundary = planar_split_boundary(
        surface,
        Vec3::new(0.0, 0.0, 1.0),
        0.0,
        SPLIT_BOUNDARY_NODES,
        cfg.seed ^ 0xb0b0,
    )?;
    let normals: Vec<Vec3> = boundary
        .nodes
        .iter()
        .map(|&x| Ok(surface.normal_and_curvature(x)?.0))
        .collect::<Result<_>>()?;
    let make = |points: Vec<SurfacePoint>, boundary: crate::BoundaryQuadrature| Subdomain {
        f_values: vec![1.0; points.len()],
        boundary_surface_normals: Some(normals.clone()),
        points,
        boundary,
    };
    let subs = [
        make(upper, boundary.clone()),
        make(lower, boundary.flipped()),
    ];
    let basis = cfg.basis();
    let res = method2_integral(
        &subs,
        LbVariant::WithCurvature,
        &basis,
        cfg.solver_choice(),
        par,
    )?;
    Ok((res.integral, h_max))
}

/// Side of the frame a rescaled Voronoi patch lives in; the basis box is
/// twice this so the patch sits well inside the period cell.
const PATCH_FRAME: f64 = 1.0;

fn voronoi_area_estimate(
    cfg: &ExperimentConfig,
    surface: &LevelSetSurface,
    n: usize,
    par: Parallelism,
) -> Result<(f64, f64)> {
    let cloud = surface_cloud(cfg, surface, n)?;
    let h_max = fill_distance_estimate(&cloud, surface, H_PROBE_COUNT, H_PROBE_SEED)?;
    let seed_cloud = sample_surface(
        surface,
        VORONOI_SEED_COUNT,
        SamplingMode::FarthestPoint,
        10,
        cfg.seed ^ 0x5eed,
    )?;
    let seeds: Vec<Vec3> = seed_cloud.positions().collect();
    let decomposition = voronoi_partition(
        surface,
        &cloud,
        &seeds,
        VORONOI_FACE_NODES,
        cfg.seed ^ 0xface,
    )?;
    let basis = FourierBasis::new(
        BoxDomain::cube(Vec3::zeros(), 2.0 * PATCH_FRAME, 3),
        cfg.modes_per_axis,
        cfg.q,
        cfg.t_period,
        match cfg.weight_mode {
            WeightModeConfig::Separable => WeightMode::Separable,
            WeightModeConfig::Joint => WeightMode::Joint,
        },
    );
    // Each cell is solved in its own rescaled frame: translate the patch to
    // the origin and shrink by sigma so it fits in [-1/2, 1/2]^3 times
    // PATCH_FRAME. Under x -> (x - c)/sigma the surface Laplacian picks up
    // sigma^2, curvature sums pick up sigma, and boundary weights shrink by
    // sigma, so the rescaled flux equals the original subintegral directly.
    let subs: Vec<Subdomain> = decomposition
        .cells
        .iter()
        .map(|cell| {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            let mut track = |x: Vec3| {
                lo = lo.inf(&x);
                hi = hi.sup(&x);
            };
            for &i in &cell.member_indices {
                track(cloud.points[i].position);
            }
            for &x in &cell.boundary.nodes {
                track(x);
            }
            let c = (lo + hi) / 2.0;
            let sigma = ((hi - lo).max() / PATCH_FRAME).max(1e-12);
            let points: Vec<SurfacePoint> = cell
                .member_indices
                .iter()
                .map(|&i| {
                    let p = &cloud.points[i];
                    SurfacePoint {
                        position: (p.position - c) / sigma,
                        normal: p.normal,
                        curvature_sum: p.curvature_sum.map(|k| k * sigma),
                    }
                })
                .collect();
            let mut boundary = cell.boundary.clone();
            let mut normals = Vec::with_capacity(boundary.len());
            for k in 0..boundary.len() {
                normals.push(surface.normal_and_curvature(boundary.nodes[k])?.0);
                boundary.nodes[k] = (boundary.nodes[k] - c) / sigma;
                boundary.weights[k] /= sigma;
            }
            Ok(Subdomain {
                f_values: vec![sigma * sigma; points.len()],
                points,
                boundary,
                boundary_surface_normals: Some(normals),
            })
        })
        .collect::<Result<_>>()?;
    let res = method2_integral(
        &subs,
        LbVariant::WithCurvature,
        &basis,
        cfg.solver_choice(),
        par,
    )?;
    Ok((res.integral, h_max))
}

fn avg_x2_estimate(
    cfg: &ExperimentConfig,
    surface: &LevelSetSurface,
    n: usize,
    par: Parallelism,
) -> Result<(f64, f64)> {
    let cloud = surface_cloud(cfg, surface, n)?;
    let h_max = fill_distance_estimate(&cloud, surface, H_PROBE_COUNT, H_PROBE_SEED)?;
    let f_values: Vec<f64> = cloud.points.iter().map(|p| p.position.x.powi(2)).collect();
    let g_values = vec![1.0; cloud.points.len()];
    let basis = cfg.basis();
    let estimate = match cfg.solver {
        SolverConfig::PhiPath => {
            method1_ratio(
                &cloud.points,
                &f_values,
                &g_values,
                LbVariant::NeumannPair,
                &basis,
                None,
                None,
                par,
            )?
            .ratio
        }
        SolverConfig::VPath => method1_ratio_vpath(
            &cloud.points,
            &f_values,
            &g_values,
            LbVariant::NeumannPair,
            &basis,
            DEFAULT_RANK_TOLERANCE,
            par,
        )?,
    };
    Ok((estimate, h_max))
}

fn disk_log_estimate(cfg: &ExperimentConfig, n: usize, par: Parallelism) -> Result<(f64, f64)> {
    let candidates = match cfg.sampling {
        SamplingConfig::FarthestPoint => 10,
        _ => 1,
    };
    let points = sample_disk(n, cfg.sampling.into(), candidates, cfg.seed);
    let probes = sample_disk(H_PROBE_COUNT, SamplingMode::Random, 1, H_PROBE_SEED);
    let h_max = fill_distance_of_points(&points, &probes);
    let estimate = disk_log_flux(
        &points,
        Vec3::zeros(),
        &cfg.basis(),
        DEFAULT_CIRCLE_NODES,
        true,
        DEFAULT_RANK_TOLERANCE,
        par,
    )?;
    Ok((estimate, h_max))
}

fn paraboloid_estimate(
    cfg: &ExperimentConfig,
    surface: &LevelSetSurface,
    n: usize,
    par: Parallelism,
) -> Result<(f64, f64)> {
    let cloud = surface_cloud(cfg, surface, n)?;
    let h_max = fill_distance_estimate(&cloud, surface, H_PROBE_COUNT, H_PROBE_SEED)?;
    let estimate = paraboloid_singular_flux(
        &cloud.points,
        Vec3::new(0.0, 0.0, 1.0),
        &cfg.basis(),
        DEFAULT_CIRCLE_NODES,
        true,
        DEFAULT_RANK_TOLERANCE,
        par,
    )?;
    Ok((estimate, h_max))
}

fn run_one(
    cfg: &ExperimentConfig,
    surface: Option<&LevelSetSurface>,
    n: usize,
    par: Parallelism,
) -> Result<(f64, f64)> {
    match cfg.experiment {
        Experiment::AvgX2 => avg_x2_estimate(cfg, surface.unwrap(), n, par),
        Experiment::VoronoiArea => voronoi_area_estimate(cfg, surface.unwrap(), n, par),
        Experiment::PlanarArea | Experiment::SphereSanity => {
            planar_area_estimate(cfg, surface.unwrap(), n, par)
        }
        Experiment::DiskLog => disk_log_estimate(cfg, n, par),
        Experiment::ParaboloidSingular => paraboloid_estimate(cfg, surface.unwrap(), n, par),
    }
}

fn rows_for(
    cfg: &ExperimentConfig,
    label: &str,
    reference: f64,
    estimates: Vec<(usize, Result<(f64, f64)>, u128)>,
) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = estimates
        .into_iter()
        .map(|(n, outcome, wall_ms)| match outcome {
            Ok((estimate, h_max)) => ConvergenceRow {
                experiment: label.to_string(),
                n_points: n,
                seed: cfg.seed,
                estimate,
                reference,
                rel_error: (estimate - reference).abs() / reference.abs(),
                h_max,
                order_estimate: None,
                wall_ms,
                error: None,
            },
            Err(e) => ConvergenceRow {
                experiment: label.to_string(),
                n_points: n,
                seed: cfg.seed,
                estimate: f64::NAN,
                reference,
                rel_error: f64::NAN,
                h_max: f64::NAN,
                order_estimate: None,
                wall_ms,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let ok: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].error.is_none()).collect();
    let errs: Vec<f64> = ok.iter().map(|&i| rows[i].rel_error).collect();
    let hs: Vec<f64> = ok.iter().map(|&i| rows[i].h_max).collect();
    for (slot, p) in ok.iter().zip(estimate_order(&errs, &hs)) {
        rows[*slot].order_estimate = p;
    }
    rows
}

/// Run the configured convergence study: one row per cloud size, written to
/// `output_path` and returned. A failing size is recorded in its row and the
/// remaining sizes still run. Deterministic for a fixed config apart from
/// the wall-clock column.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let par = Parallelism::auto();
    let surface = match cfg.experiment {
        Experiment::DiskLog => None,
        _ => Some(builtin_surface(&cfg.surface)?),
    };
    let reference = reference_value(cfg.experiment, &cfg.surface)?;
    let mut estimates = Vec::with_capacity(cfg.n_points.len());
    for &n in &cfg.n_points {
        let start = Instant::now();
        let outcome = run_one(cfg, surface.as_ref(), n, par);
        estimates.push((n, outcome, start.elapsed().as_millis()));
    }
    let mut rows = rows_for(cfg, cfg.experiment.label(), reference, estimates);
    // the cloud-average baseline the ratio method is compared against
    if cfg.experiment == Experiment::AvgX2 {
        let surface = surface.as_ref().unwrap();
        let mut baseline = Vec::with_capacity(cfg.n_points.len());
        for &n in &cfg.n_points {
            let start = Instant::now();
            let outcome = (|| {
                let cloud = surface_cloud(cfg, surface, n)?;
                let h = fill_distance_estimate(&cloud, surface, H_PROBE_COUNT, H_PROBE_SEED)?;
                let mean = cloud
                    .points
                    .iter()
                    .map(|p| p.position.x.powi(2))
                    .sum::<f64>()
                    / cloud.points.len() as f64;
                Ok((mean, h))
            })();
            baseline.push((n, outcome, start.elapsed().as_millis()));
        }
        rows.extend(rows_for(cfg, "avg_x2_cloud_average", reference, baseline));
    }
    write_rows_csv(&cfg.output_path, &rows)?;
    Ok(rows)
}

/// Write rows in the versioned CSV schema. Failed rows keep the schema (NaN
/// numerics) and are preceded by a `#` comment carrying the error text.
pub fn write_rows_csv(path: &str, rows: &[ConvergenceRow]) -> Result<()> {
    if let Some(dir) = std::path::Path::new(path).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        if let Some(err) = &r.error {
            writeln!(w, "# {} n_points={} failed: {}", r.experiment, r.n_points, err)?;
        }
        let order = r
            .order_estimate
            .map(|p| format!("{p:.16e}"))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.experiment,
            r.n_points,
            r.seed,
            r.estimate,
            r.reference,
            r.rel_error,
            r.h_max,
            order,
            r.wall_ms
        )?;
    }
    Ok(())
}

/// Parse a results CSV back into rows, checking the schema. Comment lines
/// attach their error text to the following row.
pub fn read_rows_csv(path: &str) -> Result<Vec<ConvergenceRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty results CSV".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header: {header}")));
    }
    let mut rows = Vec::new();
    let mut pending_error: Option<String> = None;
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            pending_error = Some(rest.trim().to_string());
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("ragged CSV row: {line}")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
        };
        rows.push(ConvergenceRow {
            experiment: f[0].to_string(),
            n_points: f[1]
                .parse()
                .map_err(|e| Error::Config(format!("bad n_points: {e}")))?,
            seed: f[2]
                .parse()
                .map_err(|e| Error::Config(format!("bad seed: {e}")))?,
            estimate: num(f[3])?,
            reference: num(f[4])?,
            rel_error: num(f[5])?,
            h_max: num(f[6])?,
            order_estimate: if f[7].is_empty() { None } else { Some(num(f[7])?) },
            wall_ms: f[8]
                .parse()
                .map_err(|e| Error::Config(format!("bad wall_ms: {e}")))?,
            error: pending_error.take(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_estimate_first_order() {
        let p = estimate_order(&[1e-1, 5e-2], &[0.2, 0.1]);
        assert_eq!(p[0], None);
        assert_relative_eq!(p[1].unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn order_estimate_log2_of_100() {
        let p = estimate_order(&[1e-2, 1e-4], &[0.2, 0.1]);
        assert_relative_eq!(p[1].unwrap(), 100.0f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn order_estimate_area_table_step() {
        // a published step of the planar-area study: error drops from
        // 2.1475e-2 to 9.5340e-4 as the cloud doubles (h shrinks by sqrt 2)
        let h = [1.0, 1.0 / 2.0f64.sqrt()];
        let p = estimate_order(&[2.1475e-2, 9.5340e-4], &h);
        assert_relative_eq!(p[1].unwrap(), 8.987, epsilon = 1e-3);
    }

    #[test]
    fn order_estimate_absent_on_zero_error() {
        let p = estimate_order(&[1e-2, 0.0, 1e-3], &[0.4, 0.2, 0.1]);
        assert_eq!(p, vec![None, None, None]);
    }

    #[test]
    fn fitted_order_matches_exact_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|&x: &f64| 3.0 * x.powf(2.5)).collect();
        assert_relative_eq!(fitted_order(&e, &h).unwrap(), 2.5, epsilon = 1e-12);
    }

    fn sample_config() -> String {
        r#"{
            "experiment": "disk_log",
            "surface": "disk",
            "n_points": [50, 100],
            "q": 4.0,
            "T": 10.0,
            "box": {"center": [0,0,0], "side_lengths": [4,4,1], "dim": 2},
            "modes_per_axis": 8,
            "weight_mode": "separable",
            "solver": "v_path",
            "seed": 7,
            "sampling": "random",
            "output_path": "/tmp/out.csv"
        }"#
        .to_string()
    }

    #[test]
    fn config_round_trip_and_unknown_key_rejection() {
        let cfg = ExperimentConfig::from_json(&sample_config()).unwrap();
        assert_eq!(cfg.experiment, Experiment::DiskLog);
        assert_eq!(cfg.t_period, 10.0);
        assert_eq!(cfg.box_domain.dim, 2);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"T\":") && text.contains("\"box\":"));
        let again = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(again.n_points, cfg.n_points);

        let bad = sample_config().replace("\"seed\": 7,", "\"seed\": 7, \"bogus\": 1,");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn config_rejects_unsorted_sizes() {
        let bad = sample_config().replace("[50, 100]", "[100, 50]");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_including_failed_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![
            ConvergenceRow {
                experiment: "disk_log".into(),
                n_points: 100,
                seed: 3,
                estimate: 0.251,
                reference: 0.25,
                rel_error: 0.004,
                h_max: 0.2,
                order_estimate: None,
                wall_ms: 12,
                error: None,
            },
            ConvergenceRow {
                experiment: "disk_log".into(),
                n_points: 200,
                seed: 3,
                estimate: f64::NAN,
                reference: 0.25,
                rel_error: f64::NAN,
                h_max: f64::NAN,
                order_estimate: Some(3.2),
                wall_ms: 20,
                error: Some("kernel matrix is numerically indefinite".into()),
            },
        ];
        write_rows_csv(path.to_str().unwrap(), &rows).unwrap();
        let back = read_rows_csv(path.to_str().unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].n_points, 100);
        assert_eq!(back[0].order_estimate, None);
        assert_relative_eq!(back[0].estimate, 0.251);
        assert!(back[1].estimate.is_nan());
        assert!(back[1].error.as_ref().unwrap().contains("indefinite"));
        assert_relative_eq!(back[1].order_estimate.unwrap(), 3.2);
    }

    #[test]
    fn disk_study_runs_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
        let mut cfg = ExperimentConfig::from_json(&sample_config()).unwrap();
        cfg.n_points = vec![40, 80];
        cfg.output_path = out("a.csv");
        let rows = run_convergence(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert!(r.rel_error < 0.05, "rel_error {}", r.rel_error);
            assert!(r.h_max > 0.0);
            // stored fields recompute the error column
            assert_relative_eq!(
                r.rel_error,
                (r.estimate - r.reference).abs() / r.reference.abs(),
                epsilon = 1e-15
            );
        }
        cfg.output_path = out("b.csv");
        let again = run_convergence(&cfg).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
            assert_eq!(a.h_max.to_bits(), b.h_max.to_bits());
        }
        let text_a = std::fs::read_to_string(out("a.csv")).unwrap();
        assert!(text_a.starts_with(CSV_HEADER));
    }
}
