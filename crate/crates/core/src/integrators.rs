//! The two surface-integration methods, meshfree line integrals, and the
//! singular-integral drivers.
//!
//! Method 1 estimates the ratio of two integrals from the kernel quotient
//! `g' Phi^{-1} f / g' Phi^{-1} g` over surface-Laplacian constraint rows.
//! Method 2 solves `lap_S u = f` per subdomain with no boundary conditions
//! and reduces the integral to conormal boundary flux via the divergence
//! theorem. Singular integrands are handled by augmenting the trial space
//! with a matched singular factor and integrating the flux of the combined
//! solution over a circle rule.

use crate::fourier::{assemble_phi, assemble_system, FourierBasis};
use crate::geometry::{BoundaryQuadrature, SurfacePoint};
use crate::linsolve::{cholesky_with_jitter, min_norm_solve, MinNormSolution};
use crate::operators::{
    lb_functional, lb_neumann_pair, Functional, LbVariant, SingularAugmentation, SingularKind,
};
use crate::{Error, Parallelism, Result, Vec3};
use ndarray::Array1;
use ndarray_linalg::SolveC;

/// Constraint rows encoding `lap_S u = f_val` at one surface point.
pub fn lb_rows(p: &SurfacePoint, f_val: f64, variant: LbVariant) -> Result<Vec<(Functional, f64)>> {
    match variant {
        LbVariant::WithCurvature => Ok(vec![(lb_functional(p)?, f_val)]),
        LbVariant::NeumannPair => {
            let (second, neumann) = lb_neumann_pair(p);
            Ok(vec![(second, f_val), (neumann, 0.0)])
        }
    }
}

#[derive(Debug, Clone)]
pub struct Method1Result {
    /// the ratio estimate for `int f / int g`
    pub ratio: f64,
    /// per-point integration weights; only when `int g` was supplied
    pub weights: Option<Vec<f64>>,
    /// `(||v_g||_H, ||v_f||_H)` diagnostics
    pub solution_norms: (f64, f64),
}

/// Kernel-quotient ratio estimate. `f_values`/`g_values` are the integrand
/// samples at the cloud points; `boundary` adds zero conormal-derivative
/// rows for surfaces with boundary. Weights (one per cloud point) are
/// emitted when the true `int g` is supplied; they satisfy `w . g = int g`
/// by construction.
pub fn method1_ratio(
    points: &[SurfacePoint],
    f_values: &[f64],
    g_values: &[f64],
    variant: LbVariant,
    basis: &FourierBasis,
    integral_of_g: Option<f64>,
    boundary: Option<&BoundaryQuadrature>,
    par: Parallelism,
) -> Result<Method1Result> {
    assert_eq!(points.len(), f_values.len());
    assert_eq!(points.len(), g_values.len());
    if g_values.iter().all(|&g| g == 0.0) {
        return Err(Error::Config("g vanishes on the whole cloud".into()));
    }
    // value rows carry the integrand samples; auxiliary rows carry zeros
    let mut functionals = Vec::new();
    let mut f_hat = Vec::new();
    let mut g_hat = Vec::new();
    let mut value_rows = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let rows = lb_rows(p, f_values[i], variant)?;
        for (k, (func, target)) in rows.into_iter().enumerate() {
            if k == 0 {
                value_rows.push(functionals.len());
                g_hat.push(g_values[i]);
            } else {
                g_hat.push(0.0);
            }
            f_hat.push(target);
            functionals.push(func);
        }
    }
    if let Some(b) = boundary {
        for (node, conormal) in b.nodes.iter().zip(&b.conormals) {
            functionals.push(Functional::directional(*node, *conormal)?);
            f_hat.push(0.0);
            g_hat.push(0.0);
        }
    }
    let (phi, _) = assemble_phi(basis, &functionals, par)?;
    let factor = cholesky_with_jitter(&phi)?;
    let f_hat = Array1::from_vec(f_hat);
    let g_hat = Array1::from_vec(g_hat);
    let beta_g = factor.solvec(&g_hat)?;
    let beta_f = factor.solvec(&f_hat)?;
    let denom = beta_g.dot(&g_hat);
    if denom <= 0.0 {
        return Err(Error::IllConditioned);
    }
    let num = beta_g.dot(&f_hat);
    let weights = integral_of_g.map(|ig| {
        value_rows
            .iter()
            .map(|&r| ig * beta_g[r] / denom)
            .collect()
    });
    Ok(Method1Result {
        ratio: num / denom,
        weights,
        solution_norms: (denom.sqrt(), beta_f.dot(&f_hat).max(0.0).sqrt()),
    })
}

/// Two-solve cross-check of the same ratio on the modal path:
/// `(v_g, v_f)_H / ||v_g||^2` from two independent minimum-norm solves.
pub fn method1_ratio_vpath(
    points: &[SurfacePoint],
    f_values: &[f64],
    g_values: &[f64],
    variant: LbVariant,
    basis: &FourierBasis,
    rank_tolerance: f64,
    par: Parallelism,
) -> Result<f64> {
    let build = |values: &[f64]| -> Result<Vec<(Functional, f64)>> {
        let mut rows = Vec::new();
        for (p, &v) in points.iter().zip(values) {
            rows.extend(lb_rows(p, v, variant)?);
        }
        Ok(rows)
    };
    let sys_g = assemble_system(basis, &build(g_values)?, None, par)?;
    let sys_f = assemble_system(basis, &build(f_values)?, None, par)?;
    let sol_g = min_norm_solve(&sys_g, rank_tolerance)?;
    let sol_f = min_norm_solve(&sys_f, rank_tolerance)?;
    let (a_g, a_f) = match (&sol_g.representation, &sol_f.representation) {
        (
            crate::linsolve::Representation::Modal(a),
            crate::linsolve::Representation::Modal(b),
        ) => (a, b),
        _ => unreachable!("v-path solutions are modal"),
    };
    let inner: f64 = a_g.iter().zip(a_f.iter()).map(|(x, y)| (x.conj() * y).re).sum();
    let norm2 = sol_g.solution_norm.powi(2);
    if norm2 <= 0.0 {
        return Err(Error::IllConditioned);
    }
    Ok(inner / norm2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    VPath { rank_tolerance: f64 },
    PhiPath,
}

/// One subdomain for Method 2: its collocation points with integrand
/// samples, and the closed boundary quadrature with outward conormals.
/// Surface normals at the boundary nodes (when available) select the
/// tangentially projected flux form; the unprojected `grad u . c` is
/// identical because conormals are tangent to the surface.
#[derive(Debug, Clone)]
pub struct Subdomain {
    pub points: Vec<SurfacePoint>,
    pub f_values: Vec<f64>,
    pub boundary: BoundaryQuadrature,
    pub boundary_surface_normals: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone)]
pub struct Method2Result {
    pub integral: f64,
    pub per_subdomain: Vec<(usize, f64)>,
    pub solution_norm: f64,
}

/// Flux of the collocation solution of `lap_S u = f` through the subdomain
/// boundary. Returns `(flux integral, solution norm)`.
pub fn method2_subdomain_flux(
    sub: &Subdomain,
    variant: LbVariant,
    basis: &FourierBasis,
    solver: SolverChoice,
    par: Parallelism,
) -> Result<(f64, f64)> {
    assert_eq!(sub.points.len(), sub.f_values.len());
    if sub.boundary.is_empty() {
        return Err(Error::EmptySystem);
    }
    let mut rows = Vec::new();
    for (p, &fv) in sub.points.iter().zip(&sub.f_values) {
        rows.extend(lb_rows(p, fv, variant)?);
    }
    let solution: MinNormSolution = match solver {
        SolverChoice::VPath { rank_tolerance } => {
            let sys = assemble_system(basis, &rows, None, par)?;
            min_norm_solve(&sys, rank_tolerance)?
        }
        SolverChoice::PhiPath => crate::linsolve::phi_solve(basis, &rows, par)?,
    };
    // batch gradient probes: three coordinate derivatives per boundary node
    let mut probes = Vec::with_capacity(3 * sub.boundary.len());
    for node in &sub.boundary.nodes {
        for a in 0..3 {
            let mut e = Vec3::zeros();
            e[a] = 1.0;
            probes.push(Functional::directional(*node, e)?);
        }
    }
    let grads = solution.evaluate(&probes)?;
    let mut flux = 0.0;
    for k in 0..sub.boundary.len() {
        let g = Vec3::new(grads[3 * k], grads[3 * k + 1], grads[3 * k + 2]);
        let g_s = match &sub.boundary_surface_normals {
            Some(normals) => g - normals[k] * normals[k].dot(&g),
            None => g,
        };
        flux += sub.boundary.weights[k] * g_s.dot(&sub.boundary.conormals[k]);
    }
    Ok((flux, solution.solution_norm))
}

/// Divergence-theorem integral: sum of boundary fluxes over subdomains.
pub fn method2_integral(
    subdomains: &[Subdomain],
    variant: LbVariant,
    basis: &FourierBasis,
    solver: SolverChoice,
    par: Parallelism,
) -> Result<Method2Result> {
    let mut per_subdomain = Vec::with_capacity(subdomains.len());
    let mut norm2 = 0.0;
    for (id, sub) in subdomains.iter().enumerate() {
        let (flux, norm) =
            method2_subdomain_flux(sub, variant, basis, solver, par).map_err(|e| {
                Error::Subdomain {
                    id,
                    source: Box::new(e),
                }
            })?;
        per_subdomain.push((id, flux));
        norm2 += norm * norm;
    }
    Ok(Method2Result {
        integral: per_subdomain.iter().map(|&(_, v)| v).sum(),
        per_subdomain,
        solution_norm: norm2.sqrt(),
    })
}

/// Scattered points on an open curve with unit tangents and the two
/// endpoints (which must be members of the node set).
#[derive(Debug, Clone)]
pub struct CurveCloud {
    pub nodes: Vec<Vec3>,
    pub tangents: Vec<Vec3>,
    pub endpoints: (Vec3, Vec3),
}

/// `int_C f ds` as `u(b) - u(a)` where `t . grad u = f` along the curve.
pub fn line_integral_meshfree(
    curve: &CurveCloud,
    f_values: &[f64],
    basis: &FourierBasis,
    rank_tolerance: f64,
    par: Parallelism,
) -> Result<f64> {
    assert_eq!(curve.nodes.len(), f_values.len());
    let member = |x: Vec3| curve.nodes.iter().any(|&n| (n - x).norm() < 1e-12);
    if !member(curve.endpoints.0) || !member(curve.endpoints.1) {
        return Err(Error::EndpointMissing);
    }
    let rows: Vec<(Functional, f64)> = curve
        .nodes
        .iter()
        .zip(&curve.tangents)
        .zip(f_values)
        .map(|((&x, &t), &fv)| Ok((Functional::directional(x, t)?, fv)))
        .collect::<Result<_>>()?;
    let sys = assemble_system(basis, &rows, None, par)?;
    let sol = min_norm_solve(&sys, rank_tolerance)?;
    let ends = sol.evaluate(&[
        Functional::eval(curve.endpoints.1),
        Functional::eval(curve.endpoints.0),
    ])?;
    Ok(ends[0] - ends[1])
}

/// `n` evenly spaced nodes on the circle of radius `r` about `center` in
/// the z = `center.z` plane.
pub fn uniform_circle_nodes(center: Vec3, radius: f64, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            center + Vec3::new(radius * t.cos(), radius * t.sin(), 0.0)
        })
        .collect()
}

/// Trapezoid rule on a uniformly sampled circle: mean of the samples times
/// the circumference. Rejects nodes that are not a uniform circle.
pub fn trapezoid_circle(nodes: &[Vec3], samples: &[f64]) -> Result<f64> {
    assert_eq!(nodes.len(), samples.len());
    if nodes.len() < 3 {
        return Err(Error::ComponentTooSmall);
    }
    let center = nodes.iter().sum::<Vec3>() / nodes.len() as f64;
    let radii: Vec<f64> = nodes.iter().map(|n| (n - center).norm()).collect();
    let r = radii.iter().sum::<f64>() / radii.len() as f64;
    if radii.iter().any(|&ri| (ri - r).abs() > 1e-10 * r) {
        return Err(Error::NonuniformSpacing);
    }
    let gap = (nodes[1] - nodes[0]).norm();
    for k in 0..nodes.len() {
        let next = (k + 1) % nodes.len();
        if ((nodes[next] - nodes[k]).norm() - gap).abs() > 1e-10 * r {
            return Err(Error::NonuniformSpacing);
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(mean * 2.0 * std::f64::consts::PI * r)
}

/// Number of circle nodes used by the singular-flux drivers by default.
pub const DEFAULT_CIRCLE_NODES: usize = 1000;

/// Integral of `-(1/2pi) ln|x - x0|` over the unit disk: solve the Poisson
/// problem with a log-matched augmented trial space and integrate the
/// radial flux of the combined solution over the unit circle.
pub fn disk_log_flux(
    points: &[Vec3],
    x0: Vec3,
    basis: &FourierBasis,
    n_boundary: usize,
    augmented: bool,
    rank_tolerance: f64,
    par: Parallelism,
) -> Result<f64> {
    let rows: Vec<(Functional, f64)> = points
        .iter()
        .filter(|&&x| (x - x0).norm() > 1e-10)
        .map(|&x| {
            let r = (x - x0).norm();
            (
                Functional::laplacian(x, 2),
                -r.ln() / (2.0 * std::f64::consts::PI),
            )
        })
        .collect();
    let aug = augmented.then(|| SingularAugmentation::new(SingularKind::LogSquared, x0));
    let sys = assemble_system(basis, &rows, aug, par)?;
    let sol = min_norm_solve(&sys, rank_tolerance)?;
    let nodes = uniform_circle_nodes(Vec3::zeros(), 1.0, n_boundary);
    let probes: Vec<Functional> = nodes
        .iter()
        .map(|&n| Functional::directional(n, n))
        .collect::<Result<_>>()?;
    let flux = sol.evaluate(&probes)?;
    trapezoid_circle(&nodes, &flux)
}

/// Integral of `-(1/4pi)/|x - x0|` over the paraboloid cap z = 1 - x^2 - y^2,
/// z >= 0, with the singular point at the apex. The boundary is the unit
/// circle in z = 0 with outward conormal (x, y, -2)/sqrt(5).
pub fn paraboloid_singular_flux(
    points: &[SurfacePoint],
    x0: Vec3,
    basis: &FourierBasis,
    n_boundary: usize,
    augmented: bool,
    rank_tolerance: f64,
    par: Parallelism,
) -> Result<f64> {
    let rows: Vec<(Functional, f64)> = points
        .iter()
        .filter(|p| (p.position - x0).norm() > 1e-10)
        .map(|p| {
            let r = (p.position - x0).norm();
            Ok((
                lb_functional(p)?,
                -1.0 / (4.0 * std::f64::consts::PI * r),
            ))
        })
        .collect::<Result<_>>()?;
    let aug = augmented.then(|| SingularAugmentation::new(SingularKind::InverseDistance, x0));
    let sys = assemble_system(basis, &rows, aug, par)?;
    let sol = min_norm_solve(&sys, rank_tolerance)?;
    let nodes = uniform_circle_nodes(Vec3::zeros(), 1.0, n_boundary);
    let probes: Vec<Functional> = nodes
        .iter()
        .map(|&n| {
            let conormal = Vec3::new(n.x, n.y, -2.0) / 5.0f64.sqrt();
            Functional::directional(n, conormal)
        })
        .collect::<Result<_>>()?;
    let flux = sol.evaluate(&probes)?;
    trapezoid_circle(&nodes, &flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{BoxDomain, WeightMode};
    use crate::geometry::{sample_disk, sample_surface, SamplingMode};
    use approx::assert_relative_eq;

    fn basis_2d(n: usize) -> FourierBasis {
        FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            n,
            3.0,
            10.0,
            WeightMode::Separable,
        )
    }

    fn basis_3d(n: usize, side: f64) -> FourierBasis {
        FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), side, 3),
            n,
            3.0,
            10.0,
            WeightMode::Separable,
        )
    }

    #[test]
    fn trapezoid_circle_basics() {
        let nodes = uniform_circle_nodes(Vec3::new(0.5, -1.0, 0.0), 2.0, 64);
        let ones = vec![1.0; 64];
        assert_relative_eq!(
            trapezoid_circle(&nodes, &ones).unwrap(),
            4.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
        let cos: Vec<f64> = (0..64)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 64.0).cos())
            .collect();
        assert!(trapezoid_circle(&nodes, &cos).unwrap().abs() < 1e-12);
        let cos2: Vec<f64> = cos.iter().map(|c| c * c).collect();
        // mean 1/2 on radius 2 -> 2 pi
        assert_relative_eq!(
            trapezoid_circle(&nodes, &cos2).unwrap(),
            2.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
        let mut bad = nodes.clone();
        bad[3] *= 1.001;
        assert!(matches!(
            trapezoid_circle(&bad, &ones),
            Err(Error::NonuniformSpacing)
        ));
    }

    fn quarter_circle(n: usize) -> CurveCloud {
        let nodes: Vec<Vec3> = (0..n)
            .map(|i| {
                let t = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let tangents = nodes.iter().map(|p| Vec3::new(-p.y, p.x, 0.0)).collect();
        CurveCloud {
            endpoints: (nodes[0], nodes[n - 1]),
            nodes,
            tangents,
        }
    }

    #[test]
    fn line_integral_arclength_is_quarter_circumference() {
        let curve = quarter_circle(40);
        let f = vec![1.0; 40];
        let got =
            line_integral_meshfree(&curve, &f, &basis_2d(12), 1e-12, Parallelism::Sequential)
                .unwrap();
        assert_relative_eq!(got, std::f64::consts::FRAC_PI_2, epsilon = 1e-6);
    }

    #[test]
    fn line_integral_gradient_theorem() {
        let curve = quarter_circle(30);
        // f = t . grad F for F = x y
        let f: Vec<f64> = curve
            .nodes
            .iter()
            .zip(&curve.tangents)
            .map(|(x, t)| t.dot(&Vec3::new(x.y, x.x, 0.0)))
            .collect();
        let got =
            line_integral_meshfree(&curve, &f, &basis_2d(10), 1e-12, Parallelism::Sequential)
                .unwrap();
        let (a, b) = curve.endpoints;
        assert_relative_eq!(got, b.x * b.y - a.x * a.y, epsilon = 1e-8);
    }

    #[test]
    fn line_integral_requires_endpoints_in_cloud() {
        let mut curve = quarter_circle(20);
        curve.endpoints.1 = Vec3::new(0.0, 1.1, 0.0);
        let f = vec![1.0; 20];
        assert!(matches!(
            line_integral_meshfree(&curve, &f, &basis_2d(8), 1e-12, Parallelism::Sequential),
            Err(Error::EndpointMissing)
        ));
    }

    #[test]
    fn line_integral_spiral_matches_dense_quadrature() {
        // spiral arc gamma(t) = (cos t, sin t, t/5), t in [0, 2]
        let gamma = |t: f64| Vec3::new(t.cos(), t.sin(), t / 5.0);
        let dgamma = |t: f64| Vec3::new(-t.sin(), t.cos(), 0.2);
        let f = |x: Vec3| (1.3 * x.x).sin() + x.y * x.z;
        let n = 60;
        let ts: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
        let nodes: Vec<Vec3> = ts.iter().map(|&t| gamma(t)).collect();
        let tangents: Vec<Vec3> = ts.iter().map(|&t| dgamma(t).normalize()).collect();
        let curve = CurveCloud {
            endpoints: (nodes[0], nodes[n - 1]),
            nodes: nodes.clone(),
            tangents,
        };
        let f_values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        let got = line_integral_meshfree(
            &curve,
            &f_values,
            &basis_3d(8, 4.0),
            1e-12,
            Parallelism::Sequential,
        )
        .unwrap();
        // dense composite trapezoid of the parametrized integral
        let m = 100_000;
        let mut oracle = 0.0;
        for i in 0..m {
            let t0 = 2.0 * i as f64 / m as f64;
            let t1 = 2.0 * (i + 1) as f64 / m as f64;
            let v0 = f(gamma(t0)) * dgamma(t0).norm();
            let v1 = f(gamma(t1)) * dgamma(t1).norm();
            oracle += 0.5 * (v0 + v1) * (t1 - t0);
        }
        assert!((got - oracle).abs() < 1e-6, "got {got}, oracle {oracle}");
    }

    fn sphere_cloud(n: usize, seed: u64) -> Vec<SurfacePoint> {
        let s = crate::geometry::sphere(1.0);
        sample_surface(&s, n, SamplingMode::FarthestPoint, 10, seed)
            .unwrap()
            .points
    }

    #[test]
    fn method1_algebraic_identities() {
        let points = sphere_cloud(40, 1);
        let basis = basis_3d(4, 4.0);
        let g: Vec<f64> = points.iter().map(|p| 1.0 + 0.3 * p.position.x).collect();
        let f: Vec<f64> = points
            .iter()
            .map(|p| p.position.y * p.position.y + 0.5)
            .collect();
        let base = method1_ratio(
            &points,
            &f,
            &g,
            LbVariant::NeumannPair,
            &basis,
            None,
            None,
            Parallelism::Sequential,
        )
        .unwrap()
        .ratio;
        let run = |fv: &[f64], gv: &[f64]| {
            method1_ratio(
                &points,
                fv,
                gv,
                LbVariant::NeumannPair,
                &basis,
                None,
                None,
                Parallelism::Sequential,
            )
            .unwrap()
            .ratio
        };
        // f = g -> 1, f = 2g -> 2
        assert_relative_eq!(run(&g, &g), 1.0, epsilon = 1e-12);
        let g2: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(run(&g2, &g), 2.0, epsilon = 1e-12);
        // scaling invariances
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        assert_relative_eq!(run(&f3, &g), 3.0 * base, epsilon = 1e-11, max_relative = 1e-11);
        let g5: Vec<f64> = g.iter().map(|v| 5.0 * v).collect();
        assert_relative_eq!(run(&f, &g5), base / 5.0, epsilon = 1e-11, max_relative = 1e-11);
        // shift f -> f + 2 g
        let fshift: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + 2.0 * b).collect();
        assert_relative_eq!(run(&fshift, &g), base + 2.0, epsilon = 1e-11, max_relative = 1e-11);
    }

    #[test]
    fn method1_weights_reproduce_g_integral() {
        let points = sphere_cloud(40, 2);
        let basis = basis_3d(4, 4.0);
        let g = vec![1.0; points.len()];
        let f: Vec<f64> = points.iter().map(|p| p.position.z + 1.5).collect();
        let area = 4.0 * std::f64::consts::PI;
        let res = method1_ratio(
            &points,
            &f,
            &g,
            LbVariant::NeumannPair,
            &basis,
            Some(area),
            None,
            Parallelism::Sequential,
        )
        .unwrap();
        let w = res.weights.unwrap();
        let wg: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert_relative_eq!(wg, area, epsilon = 1e-12 * area);
        // w . f is the ratio times int g by the same identity
        let wf: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert_relative_eq!(wf, res.ratio * area, epsilon = 1e-10);
    }

    #[test]
    fn method1_paths_agree() {
        let points = sphere_cloud(30, 3);
        let basis = basis_3d(4, 4.0);
        let g = vec![1.0; points.len()];
        let f: Vec<f64> = points
            .iter()
            .map(|p| p.position.x * p.position.x)
            .collect();
        let quotient = method1_ratio(
            &points,
            &f,
            &g,
            LbVariant::NeumannPair,
            &basis,
            None,
            None,
            Parallelism::Sequential,
        )
        .unwrap()
        .ratio;
        let two_solve = method1_ratio_vpath(
            &points,
            &f,
            &g,
            LbVariant::NeumannPair,
            &basis,
            1e-12,
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(quotient, two_solve, epsilon = 1e-6, max_relative = 1e-6);
    }

    /// Hemisphere with f = lap_S z = -2z: the divergence theorem gives the
    /// equatorial flux of z, which is -2 pi analytically.
    #[test]
    fn method2_hemisphere_divergence_oracle() {
        let s = crate::geometry::sphere(1.0);
        let cloud = sample_surface(&s, 600, SamplingMode::FarthestPoint, 10, 4).unwrap();
        let points: Vec<SurfacePoint> = cloud
            .points
            .into_iter()
            .filter(|p| p.position.z > 0.02)
            .collect();
        let f_values: Vec<f64> = points.iter().map(|p| -2.0 * p.position.z).collect();
        let n_b = 200;
        let nodes = uniform_circle_nodes(Vec3::zeros(), 1.0, n_b);
        let normals: Vec<Vec3> = nodes.clone();
        let boundary = BoundaryQuadrature {
            conormals: vec![Vec3::new(0.0, 0.0, -1.0); n_b],
            weights: vec![2.0 * std::f64::consts::PI / n_b as f64; n_b],
            piece_ids: vec![0; n_b],
            nodes,
        };
        let sub = Subdomain {
            points,
            f_values,
            boundary,
            boundary_surface_normals: Some(normals),
        };
        let basis = basis_3d(8, 4.0);
        let (flux, _) = method2_subdomain_flux(
            &sub,
            LbVariant::WithCurvature,
            &basis,
            SolverChoice::VPath {
                rank_tolerance: 1e-12,
            },
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(flux, -2.0 * std::f64::consts::PI, epsilon = 2e-4);
        // projected and unprojected flux agree: conormals are tangent
        let mut unprojected = sub.clone();
        unprojected.boundary_surface_normals = None;
        let (flux2, _) = method2_subdomain_flux(
            &unprojected,
            LbVariant::WithCurvature,
            &basis,
            SolverChoice::VPath {
                rank_tolerance: 1e-12,
            },
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(flux, flux2, epsilon = 1e-10);
    }

    #[test]
    fn method2_hemispheres_sum_to_sphere_area() {
        let s = crate::geometry::sphere(1.0);
        let cloud = sample_surface(&s, 500, SamplingMode::FarthestPoint, 10, 5).unwrap();
        let n_b = 200;
        let nodes = uniform_circle_nodes(Vec3::zeros(), 1.0, n_b);
        let upper_boundary = BoundaryQuadrature {
            conormals: vec![Vec3::new(0.0, 0.0, -1.0); n_b],
            weights: vec![2.0 * std::f64::consts::PI / n_b as f64; n_b],
            piece_ids: vec![0; n_b],
            nodes,
        };
        let split = |keep: &dyn Fn(f64) -> bool| -> Vec<SurfacePoint> {
            cloud
                .points
                .iter()
                .filter(|p| keep(p.position.z))
                .cloned()
                .collect()
        };
        let upper = split(&|z| z > 0.02);
        let lower = split(&|z| z < -0.02);
        let subs = [
            Subdomain {
                f_values: vec![1.0; upper.len()],
                points: upper,
                boundary: upper_boundary.clone(),
                boundary_surface_normals: None,
            },
            Subdomain {
                f_values: vec![1.0; lower.len()],
                points: lower,
                boundary: upper_boundary.flipped(),
                boundary_surface_normals: None,
            },
        ];
        let basis = basis_3d(6, 4.0);
        let res = method2_integral(
            &subs,
            LbVariant::WithCurvature,
            &basis,
            SolverChoice::VPath {
                rank_tolerance: 1e-12,
            },
            Parallelism::Sequential,
        )
        .unwrap();
        for &(_, flux) in &res.per_subdomain {
            assert_relative_eq!(flux, 2.0 * std::f64::consts::PI, epsilon = 2e-3);
        }
        assert_relative_eq!(
            res.integral,
            4.0 * std::f64::consts::PI,
            epsilon = 4e-3
        );
    }

    #[test]
    fn disk_log_known_values() {
        // closed form: 1/4 - |x0|^2 / 4
        let points = sample_disk(300, SamplingMode::FarthestPoint, 10, 7);
        let basis = basis_2d(15);
        let at_origin = disk_log_flux(
            &points,
            Vec3::zeros(),
            &basis,
            400,
            true,
            1e-12,
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(at_origin, 0.25, epsilon = 1e-3);
        let offset = disk_log_flux(
            &points,
            Vec3::new(0.5, 0.0, 0.0),
            &basis,
            400,
            true,
            1e-12,
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(offset, 3.0 / 16.0, epsilon = 1e-3);
        // without augmentation the smooth space cannot resolve the kernel
        let naive = disk_log_flux(
            &points,
            Vec3::zeros(),
            &basis,
            400,
            false,
            1e-12,
            Parallelism::Sequential,
        )
        .unwrap();
        assert!((naive - 0.25).abs() > (at_origin - 0.25).abs());
    }

    #[test]
    fn method1_rejects_zero_g() {
        let points = sphere_cloud(10, 8);
        let z = vec![0.0; 10];
        let f = vec![1.0; 10];
        assert!(method1_ratio(
            &points,
            &f,
            &z,
            LbVariant::NeumannPair,
            &basis_3d(3, 4.0),
            None,
            None,
            Parallelism::Sequential,
        )
        .is_err());
    }

    #[test]
    fn method2_additivity_on_smooth_data() {
        // split the upper hemisphere into x > 0 and x < 0 halves; interface
        // fluxes cancel so the sum matches the single-domain result
        let s = crate::geometry::sphere(1.0);
        let cloud = sample_surface(&s, 400, SamplingMode::FarthestPoint, 10, 6).unwrap();
        let upper: Vec<SurfacePoint> = cloud
            .points
            .into_iter()
            .filter(|p| p.position.z > 0.02)
            .collect();
        let f = |p: &SurfacePoint| -2.0 * p.position.z;
        let basis = basis_3d(6, 4.0);
        let n_b = 160;
        let equator = uniform_circle_nodes(Vec3::zeros(), 1.0, n_b);
        let whole = Subdomain {
            f_values: upper.iter().map(f).collect(),
            points: upper.clone(),
            boundary: BoundaryQuadrature {
                conormals: vec![Vec3::new(0.0, 0.0, -1.0); n_b],
                weights: vec![2.0 * std::f64::consts::PI / n_b as f64; n_b],
                piece_ids: vec![0; n_b],
                nodes: equator.clone(),
            },
            boundary_surface_normals: None,
        };
        // meridian interface x = 0, z > 0: nodes along it, conormal +-x
        let n_m = 80;
        let meridian: Vec<Vec3> = (0..n_m)
            .map(|i| {
                let t = std::f64::consts::PI * (i as f64 + 0.5) / n_m as f64;
                Vec3::new(0.0, t.cos(), t.sin())
            })
            .collect();
        let m_w = std::f64::consts::PI / n_m as f64;
        let half = |sign: f64| -> Subdomain {
            let pts: Vec<SurfacePoint> = upper
                .iter()
                .filter(|p| sign * p.position.x > 0.0)
                .cloned()
                .collect();
            let eq_nodes: Vec<Vec3> = equator
                .iter()
                .cloned()
                .filter(|n| sign * n.x > 0.0)
                .collect();
            let mut nodes = eq_nodes.clone();
            let mut conormals = vec![Vec3::new(0.0, 0.0, -1.0); eq_nodes.len()];
            let mut weights = vec![2.0 * std::f64::consts::PI / n_b as f64; eq_nodes.len()];
            nodes.extend(meridian.iter().cloned());
            conormals.extend(std::iter::repeat(Vec3::new(-sign, 0.0, 0.0)).take(n_m));
            weights.extend(std::iter::repeat(m_w).take(n_m));
            Subdomain {
                f_values: pts.iter().map(f).collect(),
                points: pts,
                boundary: BoundaryQuadrature {
                    piece_ids: vec![0; nodes.len()],
                    nodes,
                    conormals,
                    weights,
                },
                boundary_surface_normals: None,
            }
        };
        let solver = SolverChoice::VPath {
            rank_tolerance: 1e-12,
        };
        let one = method2_integral(
            &[whole],
            LbVariant::WithCurvature,
            &basis,
            solver,
            Parallelism::Sequential,
        )
        .unwrap();
        let two = method2_integral(
            &[half(1.0), half(-1.0)],
            LbVariant::WithCurvature,
            &basis,
            solver,
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(one.integral, two.integral, epsilon = 5e-3);
    }

    #[test]
    fn method1_with_boundary_rows_runs() {
        // hemisphere with conormal rows at the equator: int z / int 1
        let s = crate::geometry::sphere(1.0);
        let cloud = sample_surface(&s, 300, SamplingMode::FarthestPoint, 10, 9).unwrap();
        let points: Vec<SurfacePoint> = cloud
            .points
            .into_iter()
            .filter(|p| p.position.z > 0.02)
            .collect();
        let n_b = 100;
        let nodes = uniform_circle_nodes(Vec3::zeros(), 1.0, n_b);
        let boundary = BoundaryQuadrature {
            conormals: vec![Vec3::new(0.0, 0.0, -1.0); n_b],
            weights: vec![2.0 * std::f64::consts::PI / n_b as f64; n_b],
            piece_ids: vec![0; n_b],
            nodes,
        };
        let g = vec![1.0; points.len()];
        let f: Vec<f64> = points.iter().map(|p| p.position.z).collect();
        let res = method1_ratio(
            &points,
            &f,
            &g,
            LbVariant::NeumannPair,
            &basis_3d(5, 4.0),
            None,
            Some(&boundary),
            Parallelism::Sequential,
        )
        .unwrap();
        // int z over hemisphere = pi, area = 2 pi -> ratio 1/2
        assert_relative_eq!(res.ratio, 0.5, epsilon = 2e-2);
    }
}
