//! Implicit surfaces, point-cloud generation, and surface decomposition.

mod grid;
mod planar;
mod sampling;
mod surface;
mod voronoi;

pub use grid::NearestGrid;
pub use planar::{
    open_chain_weights, planar_split_boundary, project_to_plane_curve, trio_rule, trio_weights,
    ArcKind, TrioRule,
};
pub use sampling::{
    fill_distance_estimate, fill_distance_of_points, sample_disk, sample_surface,
    sample_surface_irregular, SamplingMode,
};
pub use surface::{
    builtin_surface, genus_two, paraboloid, sphere, LevelSetSurface, ScalarField,
};
pub use voronoi::{voronoi_partition, VoronoiCell, VoronoiDecomposition};

use crate::{Error, Result, Vec3};
use std::io::{BufRead, Write};

/// A point on a surface with its unit normal and, optionally, the sum of
/// principal curvatures at that point.
#[derive(Debug, Clone)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub curvature_sum: Option<f64>,
}

/// Scattered points on a surface. The first `n_interior` points are interior
/// collocation points, the remaining `n_boundary` lie on the boundary.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<SurfacePoint>,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub seed: u64,
}

impl PointCloud {
    pub fn interior(&self) -> &[SurfacePoint] {
        &self.points[..self.n_interior]
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(|p| p.position)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let with_kappa = self.points.iter().all(|p| p.curvature_sum.is_some());
        if with_kappa {
            writeln!(w, "x,y,z,nx,ny,nz,kappa")?;
        } else {
            writeln!(w, "x,y,z,nx,ny,nz")?;
        }
        for p in &self.points {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z
            )?;
            if with_kappa {
                write!(w, ",{:.16e}", p.curvature_sum.unwrap())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, seed: u64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty point-cloud CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let with_kappa = match cols.as_slice() {
            ["x", "y", "z", "nx", "ny", "nz"] => false,
            ["x", "y", "z", "nx", "ny", "nz", "kappa"] => true,
            _ => return Err(Error::Config(format!("bad point-cloud header: {header}"))),
        };
        let mut points = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .trim()
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad number in cloud CSV: {e}")))?;
            if v.len() != cols.len() {
                return Err(Error::Config("ragged row in cloud CSV".into()));
            }
            points.push(SurfacePoint {
                position: Vec3::new(v[0], v[1], v[2]),
                normal: Vec3::new(v[3], v[4], v[5]),
                curvature_sum: if with_kappa { Some(v[6]) } else { None },
            });
        }
        let n = points.len();
        Ok(PointCloud {
            points,
            n_interior: n,
            n_boundary: 0,
            seed,
        })
    }
}

/// Quadrature nodes on a boundary curve: positions, outward conormals
/// (tangent to the surface, normal to the curve), weights, and a label per
/// node identifying the curve component (closed loop or face arc) the node
/// belongs to.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<Vec3>,
    pub conormals: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub piece_ids: Vec<usize>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same rule with all conormals flipped (the opposite side of a split).
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.conormals {
            *c = -*c;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,z,cx,cy,cz,weight,piece_id")?;
        for i in 0..self.nodes.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.nodes[i].x,
                self.nodes[i].y,
                self.nodes[i].z,
                self.conormals[i].x,
                self.conormals[i].y,
                self.conormals[i].z,
                self.weights[i],
                self.piece_ids[i]
            )?;
        }
        Ok(())
    }
}
