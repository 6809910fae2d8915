use crate::{Error, Mat3, Result, Vec3};
use std::sync::Arc;

/// A twice-differentiable scalar field on R^3 with analytic derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: Vec3) -> f64;
    fn gradient(&self, x: Vec3) -> Vec3;
    fn hessian(&self, x: Vec3) -> Mat3;
}

/// An implicit surface: the zero level set of a scalar field, restricted to
/// an optional region predicate (for surfaces with boundary).
#[derive(Clone)]
pub struct LevelSetSurface {
    pub name: String,
    field: Arc<dyn ScalarField>,
    /// Axis-aligned box that encloses the surface; used to seed sampling.
    pub sample_box: (Vec3, Vec3),
    region: Option<Arc<dyn Fn(Vec3) -> bool + Send + Sync>>,
}

impl std::fmt::Debug for LevelSetSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelSetSurface")
            .field("name", &self.name)
            .field("sample_box", &self.sample_box)
            .finish()
    }
}

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 50;

impl LevelSetSurface {
    pub fn new(name: impl Into<String>, field: Arc<dyn ScalarField>, lo: Vec3, hi: Vec3) -> Self {
        LevelSetSurface {
            name: name.into(),
            field,
            sample_box: (lo, hi),
            region: None,
        }
    }

    pub fn with_region(mut self, region: Arc<dyn Fn(Vec3) -> bool + Send + Sync>) -> Self {
        self.region = Some(region);
        self
    }

    pub fn value(&self, x: Vec3) -> f64 {
        self.field.value(x)
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        self.field.gradient(x)
    }

    pub fn hessian(&self, x: Vec3) -> Mat3 {
        self.field.hessian(x)
    }

    pub fn in_region(&self, x: Vec3) -> bool {
        self.region.as_ref().map_or(true, |r| r(x))
    }

    /// Newton projection along the gradient direction: x <- x - phi grad/|grad|^2.
    pub fn project(&self, x: Vec3, tol: f64) -> Result<Vec3> {
        let mut y = x;
        for _ in 0..MAX_NEWTON_ITERS {
            let phi = self.value(y);
            if phi.abs() <= tol {
                return Ok(y);
            }
            let g = self.gradient(y);
            let g2 = g.norm_squared();
            if g2 == 0.0 || !g2.is_finite() {
                return Err(Error::DegeneratePoint(y));
            }
            y -= g * (phi / g2);
        }
        let residual = self.value(y).abs();
        if residual <= tol {
            Ok(y)
        } else {
            Err(Error::ProjectionFailed { last: y, residual })
        }
    }

    /// Unit normal and curvature sum (divergence of the unit normal field):
    /// kappa = (lap phi - n^T D^2phi n) / |grad phi|.
    pub fn normal_and_curvature(&self, x: Vec3) -> Result<(Vec3, f64)> {
        let g = self.gradient(x);
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            return Err(Error::DegeneratePoint(x));
        }
        let n = g / gn;
        let h = self.hessian(x);
        let kappa = (h.trace() - (n.transpose() * h * n)[(0, 0)]) / gn;
        Ok((n, kappa))
    }

    /// Project `x` and package the result with normal and curvature.
    pub fn surface_point(&self, x: Vec3, tol: f64) -> Result<super::SurfacePoint> {
        let p = self.project(x, tol)?;
        let (normal, kappa) = self.normal_and_curvature(p)?;
        Ok(super::SurfacePoint {
            position: p,
            normal,
            curvature_sum: Some(kappa),
        })
    }
}

struct Sphere {
    radius: f64,
}

impl ScalarField for Sphere {
    fn value(&self, x: Vec3) -> f64 {
        x.norm_squared() - self.radius * self.radius
    }
    fn gradient(&self, x: Vec3) -> Vec3 {
        2.0 * x
    }
    fn hessian(&self, _x: Vec3) -> Mat3 {
        Mat3::identity() * 2.0
    }
}

struct PlaneZ;

impl ScalarField for PlaneZ {
    fn value(&self, x: Vec3) -> f64 {
        x.z
    }
    fn gradient(&self, _x: Vec3) -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }
    fn hessian(&self, _x: Vec3) -> Mat3 {
        Mat3::zeros()
    }
}

/// Genus-two surface:
/// phi = 1/(4((x-1)^2+y^2)) + 1/(4((x+1)^2+y^2)) + x^2/10 + y^2/4 + z^2 - 1.
struct GenusTwo;

impl GenusTwo {
    // value, gradient and hessian of 1/(4 r^2) with r^2 = (x-a)^2 + y^2
    fn pole(x: f64, y: f64, a: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let dx = x - a;
        let u = dx * dx + y * y;
        let v = 0.25 / u;
        let gx = -dx / (2.0 * u * u);
        let gy = -y / (2.0 * u * u);
        let hxx = -0.5 / (u * u) + 2.0 * dx * dx / (u * u * u);
        let hyy = -0.5 / (u * u) + 2.0 * y * y / (u * u * u);
        let hxy = 2.0 * dx * y / (u * u * u);
        (v, [gx, gy], [[hxx, hxy], [hxy, hyy]])
    }
}

impl ScalarField for GenusTwo {
    fn value(&self, p: Vec3) -> f64 {
        let (v1, _, _) = Self::pole(p.x, p.y, 1.0);
        let (v2, _, _) = Self::pole(p.x, p.y, -1.0);
        v1 + v2 + p.x * p.x / 10.0 + p.y * p.y / 4.0 + p.z * p.z - 1.0
    }
    fn gradient(&self, p: Vec3) -> Vec3 {
        let (_, g1, _) = Self::pole(p.x, p.y, 1.0);
        let (_, g2, _) = Self::pole(p.x, p.y, -1.0);
        Vec3::new(
            g1[0] + g2[0] + p.x / 5.0,
            g1[1] + g2[1] + p.y / 2.0,
            2.0 * p.z,
        )
    }
    fn hessian(&self, p: Vec3) -> Mat3 {
        let (_, _, h1) = Self::pole(p.x, p.y, 1.0);
        let (_, _, h2) = Self::pole(p.x, p.y, -1.0);
        let mut h = Mat3::zeros();
        h[(0, 0)] = h1[0][0] + h2[0][0] + 0.2;
        h[(1, 1)] = h1[1][1] + h2[1][1] + 0.5;
        h[(2, 2)] = 2.0;
        h[(0, 1)] = h1[0][1] + h2[0][1];
        h[(1, 0)] = h[(0, 1)];
        h
    }
}

/// Paraboloid patch z = 1 - x^2 - y^2 with z >= 0.
struct Paraboloid;

impl ScalarField for Paraboloid {
    fn value(&self, x: Vec3) -> f64 {
        x.z + x.x * x.x + x.y * x.y - 1.0
    }
    fn gradient(&self, x: Vec3) -> Vec3 {
        Vec3::new(2.0 * x.x, 2.0 * x.y, 1.0)
    }
    fn hessian(&self, _x: Vec3) -> Mat3 {
        let mut h = Mat3::zeros();
        h[(0, 0)] = 2.0;
        h[(1, 1)] = 2.0;
        h
    }
}

/// Built-in surfaces addressable by name from configs and the CLI.
pub fn builtin_surface(name: &str) -> Result<LevelSetSurface> {
    match name {
        "sphere" => Ok(sphere(1.0)),
        "genus_two" => Ok(genus_two()),
        "paraboloid" => Ok(paraboloid()),
        "plane_z" => Ok(LevelSetSurface::new(
            "plane_z",
            Arc::new(PlaneZ),
            Vec3::new(-1.0, -1.0, -0.5),
            Vec3::new(1.0, 1.0, 0.5),
        )),
        _ => Err(Error::Config(format!("unknown surface: {name}"))),
    }
}

pub fn sphere(radius: f64) -> LevelSetSurface {
    let m = 1.2 * radius;
    LevelSetSurface::new(
        "sphere",
        Arc::new(Sphere { radius }),
        Vec3::new(-m, -m, -m),
        Vec3::new(m, m, m),
    )
}

pub fn genus_two() -> LevelSetSurface {
    LevelSetSurface::new(
        "genus_two",
        Arc::new(GenusTwo),
        Vec3::new(-3.5, -2.2, -1.2),
        Vec3::new(3.5, 2.2, 1.2),
    )
}

pub fn paraboloid() -> LevelSetSurface {
    LevelSetSurface::new(
        "paraboloid",
        Arc::new(Paraboloid),
        Vec3::new(-1.1, -1.1, -0.1),
        Vec3::new(1.1, 1.1, 1.1),
    )
    .with_region(Arc::new(|x: Vec3| x.z >= 0.0))
}
