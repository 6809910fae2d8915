use crate::Vec3;
use std::collections::HashMap;

/// Uniform-grid nearest-neighbour accelerator for scattered 3D points.
pub struct NearestGrid {
    points: Vec<Vec3>,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    cell: f64,
    origin: Vec3,
}

impl NearestGrid {
    pub fn new(points: Vec<Vec3>) -> Self {
        assert!(!points.is_empty());
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let extent = (hi - lo).amax().max(1e-12);
        // aim for O(1) points per cell
        let cell = extent / (points.len() as f64).cbrt().ceil().max(1.0);
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry(Self::key_of(*p, lo, cell))
                .or_default()
                .push(i);
        }
        NearestGrid {
            points,
            cells,
            cell,
            origin: lo,
        }
    }

    fn key_of(p: Vec3, origin: Vec3, cell: f64) -> (i64, i64, i64) {
        (
            ((p.x - origin.x) / cell).floor() as i64,
            ((p.y - origin.y) / cell).floor() as i64,
            ((p.z - origin.z) / cell).floor() as i64,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and distance of the nearest stored point.
    pub fn nearest(&self, x: Vec3) -> (usize, f64) {
        let key = Self::key_of(x, self.origin, self.cell);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut shell: i64 = 0;
        loop {
            let mut any = false;
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs() != shell && dy.abs() != shell && dz.abs() != shell {
                            continue; // only the outer shell
                        }
                        if let Some(idxs) =
                            self.cells.get(&(key.0 + dx, key.1 + dy, key.2 + dz))
                        {
                            any = true;
                            for &i in idxs {
                                let d = (self.points[i] - x).norm();
                                if d < best.1 {
                                    best = (i, d);
                                }
                            }
                        }
                    }
                }
            }
            // a point in shell k+1 is at least k*cell away
            if best.1 <= shell as f64 * self.cell {
                return best;
            }
            shell += 1;
            // past all occupied cells: done
            if !any && best.0 != usize::MAX && shell as f64 * self.cell > 4.0 * best.1 + self.cell
            {
                return best;
            }
            if shell > 4 * (self.cells.len() as i64 + 2) {
                return best; // safety net; cannot happen for non-empty grids
            }
        }
    }

    pub fn min_distance(&self, x: Vec3) -> f64 {
        self.nearest(x).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let grid = NearestGrid::new(pts.clone());
        for _ in 0..200 {
            let q = Vec3::new(
                rng.gen_range(-0.5..1.5),
                rng.gen_range(-0.5..1.5),
                rng.gen_range(-0.5..1.5),
            );
            let brute = pts
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            let (_, d) = grid.nearest(q);
            assert!((d - brute).abs() < 1e-12);
        }
    }
}
