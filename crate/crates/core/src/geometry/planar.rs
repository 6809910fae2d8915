use super::{BoundaryQuadrature, LevelSetSurface};
use crate::{Error, Result, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CURVE_NEWTON_ITERS: usize = 60;

/// Project `x` onto the curve S intersect {p.x = c} by Gauss-Newton on the
/// stacked constraints (phi, p.x - c).
pub fn project_to_plane_curve(
    surface: &LevelSetSurface,
    x: Vec3,
    plane_normal: Vec3,
    offset: f64,
    tol: f64,
) -> Result<Vec3> {
    let p = plane_normal.normalize();
    let mut y = x;
    for _ in 0..CURVE_NEWTON_ITERS {
        let r0 = surface.value(y);
        let r1 = p.dot(&y) - offset;
        if r0.abs() <= tol && r1.abs() <= tol {
            return Ok(y);
        }
        let g = surface.gradient(y);
        // J = [g; p], step = J^T (J J^T)^{-1} r
        let a = g.norm_squared();
        let b = g.dot(&p);
        let d = 1.0; // p is unit
        let det = a * d - b * b;
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::DegeneratePoint(y));
        }
        let l0 = (d * r0 - b * r1) / det;
        let l1 = (a * r1 - b * r0) / det;
        y -= g * l0 + p * l1;
    }
    let residual = surface.value(y).abs().max((p.dot(&y) - offset).abs());
    Err(Error::ProjectionFailed { last: y, residual })
}

#[derive(Debug, Clone, Copy)]
pub enum ArcKind {
    Circle { center: Vec3, radius: f64 },
    Line,
}

/// Quadrature rule for one trio (y, y1, y2): weights exact for quadratics in
/// the arc parameter on the circle (or line) through the three points, over
/// the span from y1 to y2.
#[derive(Debug, Clone, Copy)]
pub struct TrioRule {
    /// weights for (y, y1, y2)
    pub weights: [f64; 3],
    /// arc parameters of (y, y1, y2); theta on circles, signed distance on lines
    pub params: [f64; 3],
    pub kind: ArcKind,
}

/// Integral of the quadratic Lagrange basis on `nodes` over [a, b].
fn lagrange_weights(nodes: [f64; 3], a: f64, b: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for i in 0..3 {
        let (tj, tk) = match i {
            0 => (nodes[1], nodes[2]),
            1 => (nodes[0], nodes[2]),
            _ => (nodes[0], nodes[1]),
        };
        let ti = nodes[i];
        let denom = (ti - tj) * (ti - tk);
        let int = (b.powi(3) - a.powi(3)) / 3.0 - (tj + tk) * (b * b - a * a) / 2.0
            + tj * tk * (b - a);
        w[i] = int / denom;
    }
    w
}

impl TrioRule {
    /// Weights for the trio's three nodes integrating only over the sub-span
    /// between member nodes `a` and `b` (indices into (y, y1, y2)).
    pub fn partial_weights(&self, a: usize, b: usize) -> [f64; 3] {
        let lo = self.params[a].min(self.params[b]);
        let hi = self.params[a].max(self.params[b]);
        let mut w = lagrange_weights(self.params, lo, hi);
        if let ArcKind::Circle { radius, .. } = self.kind {
            for wi in &mut w {
                *wi *= radius;
            }
        }
        w
    }
}

pub fn trio_rule(y: Vec3, y1: Vec3, y2: Vec3) -> TrioRule {
    let a = y1 - y;
    let b = y2 - y;
    let cross = a.cross(&b);
    let sin2 = cross.norm_squared() / (a.norm_squared() * b.norm_squared());
    if sin2 < 1e-14 {
        // collinear: signed-distance parametrization toward y1
        let dir = a.normalize();
        let s1 = a.dot(&dir);
        let s2 = b.dot(&dir);
        let lo = s1.min(s2).min(0.0);
        let hi = s1.max(s2).max(0.0);
        let w = lagrange_weights([0.0, s1, s2], lo, hi);
        return TrioRule {
            weights: w,
            params: [0.0, s1, s2],
            kind: ArcKind::Line,
        };
    }
    // circumcenter of the triangle (y, y1, y2)
    let center =
        y + (a.norm_squared() * b - b.norm_squared() * a).cross(&cross) / (2.0 * cross.norm_squared());
    let radius = (y - center).norm();
    let e1 = (y - center) / radius;
    let m = cross.normalize();
    let e2 = m.cross(&e1);
    let theta = |x: Vec3| {
        let d = x - center;
        d.dot(&e2).atan2(d.dot(&e1))
    };
    let t1 = theta(y1);
    let t2 = theta(y2);
    // the span normally straddles theta = 0; for one-sided trios (open ends,
    // corner stubs) extend it to cover the centre node as well
    let lo = t1.min(t2).min(0.0);
    let hi = t1.max(t2).max(0.0);
    let mut w = lagrange_weights([0.0, t1, t2], lo, hi);
    for wi in &mut w {
        *wi *= radius; // arclength element R dtheta
    }
    TrioRule {
        weights: w,
        params: [0.0, t1, t2],
        kind: ArcKind::Circle { center, radius },
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.0[ri] = rj;
        }
    }
}

/// For each node: its nearest neighbour and the nearest node on the opposite
/// side, so the trio straddles the centre node.
fn build_trios(nodes: &[Vec3]) -> Result<Vec<(usize, usize, usize)>> {
    let n = nodes.len();
    if n < 3 {
        return Err(Error::ComponentTooSmall);
    }
    let mut trios = Vec::with_capacity(n);
    for j in 0..n {
        let mut j1 = usize::MAX;
        let mut d1 = f64::INFINITY;
        for k in 0..n {
            if k == j {
                continue;
            }
            let d = (nodes[k] - nodes[j]).norm();
            if d < d1 {
                d1 = d;
                j1 = k;
            }
        }
        let v1 = nodes[j] - nodes[j1];
        let mut j2 = usize::MAX;
        let mut d2 = f64::INFINITY;
        for k in 0..n {
            if k == j || k == j1 {
                continue;
            }
            if v1.dot(&(nodes[j] - nodes[k])) < 0.0 {
                let d = (nodes[k] - nodes[j]).norm();
                if d < d2 {
                    d2 = d;
                    j2 = k;
                }
            }
        }
        if j2 == usize::MAX {
            // extreme corner node with everything on one side: fall back to
            // the second-nearest node so the trio is still well defined
            let mut d2 = f64::INFINITY;
            for k in 0..n {
                if k == j || k == j1 {
                    continue;
                }
                let d = (nodes[k] - nodes[j]).norm();
                if d < d2 {
                    d2 = d;
                    j2 = k;
                }
            }
        }
        trios.push((j, j1, j2));
    }
    Ok(trios)
}

/// Per-node weights over closed curve(s): half the node's own-trio weight
/// plus half the weights it receives as a flank of neighbouring trios.
/// Also returns the connected-component label of each node.
pub fn trio_weights(nodes: &[Vec3]) -> Result<(Vec<f64>, Vec<usize>)> {
    let trios = build_trios(nodes)?;
    let mut weights = vec![0.0; nodes.len()];
    let mut uf = UnionFind::new(nodes.len());
    let mut density_warnings = 0usize;
    for &(j, j1, j2) in &trios {
        let rule = trio_rule(nodes[j], nodes[j1], nodes[j2]);
        weights[j] += 0.5 * rule.weights[0];
        weights[j1] += 0.5 * rule.weights[1];
        weights[j2] += 0.5 * rule.weights[2];
        uf.union(j, j1);
        uf.union(j, j2);
        if let ArcKind::Circle { radius, .. } = rule.kind {
            let nn = (nodes[j1] - nodes[j]).norm();
            if nn > 0.25 * radius {
                density_warnings += 1;
            }
        }
    }
    if density_warnings > 0 {
        log::warn!(
            "{density_warnings} trios have nearest-neighbour spacing above a quarter \
             of the local curve radius; trios may hop between curve components"
        );
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut piece_ids = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let r = uf.find(i);
        let next = label_of_root.len();
        piece_ids.push(*label_of_root.entry(r).or_insert(next));
    }
    Ok((weights, piece_ids))
}

/// Per-node weights over an open arc whose nodes are already ordered along
/// the curve, endpoints included. Each interior segment averages the two
/// consecutive-node trios covering it; the end segments use their single
/// covering trio. Exact for quadratics in the arc parameter per trio.
pub fn open_chain_weights(nodes: &[Vec3]) -> Result<Vec<f64>> {
    let m = nodes.len();
    if m < 2 {
        return Err(Error::ComponentTooSmall);
    }
    let mut weights = vec![0.0; m];
    if m == 2 {
        let h = (nodes[1] - nodes[0]).norm() / 2.0;
        return Ok(vec![h, h]);
    }
    for i in 1..m - 1 {
        // rule node order is (anchor i, previous, next)
        let rule = trio_rule(nodes[i], nodes[i - 1], nodes[i + 1]);
        let left_scale = if i == 1 { 1.0 } else { 0.5 };
        let right_scale = if i == m - 2 { 1.0 } else { 0.5 };
        let left = rule.partial_weights(1, 0);
        let right = rule.partial_weights(0, 2);
        for (slot, t) in [(i, 0), (i - 1, 1), (i + 1, 2)] {
            weights[slot] += left_scale * left[t] + right_scale * right[t];
        }
    }
    Ok(weights)
}

/// Boundary quadrature on the closed planar curve(s) S intersect
/// {p.x = offset}. Conormals are oriented outward from the subdomain on the
/// positive side of the plane; call `flipped()` for the other side.
pub fn planar_split_boundary(
    surface: &LevelSetSurface,
    plane_normal: Vec3,
    offset: f64,
    n_boundary: usize,
    seed: u64,
) -> Result<BoundaryQuadrature> {
    let p = plane_normal.normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = surface.sample_box;
    let draw = |rng: &mut ChaCha8Rng| -> Result<Vec3> {
        for _ in 0..10_000 {
            let x = Vec3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            );
            if let Ok(y) = project_to_plane_curve(surface, x, p, offset, 1e-12) {
                if surface.in_region(y) {
                    return Ok(y);
                }
            }
        }
        Err(Error::Sampling(format!(
            "could not hit the plane curve on {}",
            surface.name
        )))
    };
    // farthest-point insertion for even spacing along the curve(s)
    let candidates = 15;
    let mut nodes: Vec<Vec3> = Vec::with_capacity(n_boundary);
    while nodes.len() < n_boundary {
        let mut best = draw(&mut rng)?;
        let mut best_d = super::sampling::min_dist(&nodes, best);
        for _ in 1..candidates {
            let c = draw(&mut rng)?;
            let d = super::sampling::min_dist(&nodes, c);
            if d > best_d {
                best = c;
                best_d = d;
            }
        }
        nodes.push(best);
    }
    let (weights, piece_ids) = trio_weights(&nodes)?;
    let mut conormals = Vec::with_capacity(nodes.len());
    for &y in &nodes {
        let (n_s, _) = surface.normal_and_curvature(y)?;
        let t = n_s.cross(&p).normalize();
        let mut c = t.cross(&n_s).normalize();
        if c.dot(&p) > 0.0 {
            c = -c; // outward from the positive-side subdomain
        }
        conormals.push(c);
    }
    Ok(BoundaryQuadrature {
        nodes,
        conormals,
        weights,
        piece_ids,
    })
}
