use super::planar::{open_chain_weights, project_to_plane_curve, trio_weights};
use super::{BoundaryQuadrature, LevelSetSurface, PointCloud};
use crate::{Error, Mat3, Result, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// One cell of a surface Voronoi decomposition.
#[derive(Debug, Clone)]
pub struct VoronoiCell {
    pub seed_index: usize,
    pub seed: Vec3,
    /// indices into the cloud of the points assigned to this cell
    pub member_indices: Vec<usize>,
    /// seed indices of the cells sharing a boundary face with this one
    pub neighbours: Vec<usize>,
    /// quadrature over the full closed cell boundary, conormals pointing
    /// away from the cell's own seed
    pub boundary: BoundaryQuadrature,
}

#[derive(Debug, Clone)]
pub struct VoronoiDecomposition {
    pub cells: Vec<VoronoiCell>,
}

fn nearest_two(seeds: &[Vec3], x: Vec3) -> (usize, usize) {
    let mut i0 = 0;
    let mut i1 = usize::MAX;
    let mut d0 = f64::INFINITY;
    let mut d1 = f64::INFINITY;
    for (i, s) in seeds.iter().enumerate() {
        let d = (s - x).norm_squared();
        if d < d0 {
            d1 = d0;
            i1 = i0;
            d0 = d;
            i0 = i;
        } else if d < d1 {
            d1 = d;
            i1 = i;
        }
    }
    (i0, i1)
}

/// Sample scattered points on the shared face of seeds (i, j): the part of
/// the curve S intersect bisector(s_i, s_j) whose nearest seeds are i and j.
fn sample_face(
    surface: &LevelSetSurface,
    seeds: &[Vec3],
    i: usize,
    j: usize,
    nodes_per_face: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec3>> {
    let p = (seeds[j] - seeds[i]).normalize();
    let offset = p.dot(&((seeds[i] + seeds[j]) / 2.0));
    let (lo, hi) = surface.sample_box;
    let mut pool: Vec<Vec3> = Vec::new();
    let budget = 300 * nodes_per_face;
    for draw in 0..budget {
        if pool.len() >= 12 * nodes_per_face {
            break;
        }
        // a pair with no shared face never fills the pool; bail out early
        if draw == budget / 10 && pool.is_empty() {
            break;
        }
        let x = Vec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        let y = match project_to_plane_curve(surface, x, p, offset, 1e-12) {
            Ok(y) => y,
            Err(_) => continue,
        };
        if !surface.in_region(y) {
            continue;
        }
        let d_own = (y - seeds[i]).norm_squared();
        let mut on_face = true;
        for (k, s) in seeds.iter().enumerate() {
            if k != i && k != j && (y - s).norm_squared() < d_own - 1e-9 {
                on_face = false;
                break;
            }
        }
        if on_face {
            pool.push(y);
        }
    }
    if pool.len() < 4 {
        // the candidate pair shares no (or a vanishing) face
        return Ok(Vec::new());
    }
    // farthest-point subset of the pool for even spacing along the face
    let n = nodes_per_face.min(pool.len());
    let mut chosen: Vec<Vec3> = vec![pool[0]];
    let mut dist: Vec<f64> = pool.iter().map(|q| (q - pool[0]).norm()).collect();
    while chosen.len() < n {
        let (best, _) = dist
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (k, &d)| if d > acc.1 { (k, d) } else { acc });
        chosen.push(pool[best]);
        for (k, q) in pool.iter().enumerate() {
            dist[k] = dist[k].min((q - pool[best]).norm());
        }
    }
    Ok(chosen)
}

/// Newton solve for a triple junction: the surface point equidistant to
/// seeds i, j and k (and no closer to any other seed; callers check that).
fn triple_corner(
    surface: &LevelSetSurface,
    seeds: &[Vec3],
    i: usize,
    j: usize,
    k: usize,
    guess: Vec3,
) -> Option<Vec3> {
    let (si, sj, sk) = (seeds[i], seeds[j], seeds[k]);
    let mut y = guess;
    for _ in 0..80 {
        let f = Vec3::new(
            surface.value(y),
            (y - si).norm_squared() - (y - sj).norm_squared(),
            (y - si).norm_squared() - (y - sk).norm_squared(),
        );
        if f.amax() < 1e-11 {
            return Some(y);
        }
        // the bisector constraints are affine, so those Jacobian rows are
        // the constant seed differences
        let jac = Mat3::from_rows(&[
            surface.gradient(y).transpose(),
            (2.0 * (sj - si)).transpose(),
            (2.0 * (sk - si)).transpose(),
        ]);
        let step = jac.lu().solve(&f)?;
        y -= step;
        if !(y.x.is_finite() && y.y.is_finite() && y.z.is_finite()) {
            return None;
        }
    }
    None
}

/// The corner points of face (i, j): triple junctions with each other seed
/// that actually lie on the Voronoi diagram.
fn face_corners(
    surface: &LevelSetSurface,
    seeds: &[Vec3],
    i: usize,
    j: usize,
    face_nodes: &[Vec3],
) -> Vec<Vec3> {
    let mut corners: Vec<Vec3> = Vec::new();
    for k in 0..seeds.len() {
        if k == i || k == j {
            continue;
        }
        // the face node where seed k comes closest to co-nearest is the
        // natural starting guess for the junction with k
        let guess = face_nodes.iter().copied().min_by(|&a, &b| {
            let margin = |y: Vec3| (y - seeds[k]).norm_squared() - (y - seeds[i]).norm_squared();
            margin(a).total_cmp(&margin(b))
        });
        let Some(guess) = guess else { continue };
        let Some(y) = triple_corner(surface, seeds, i, j, k, guess) else {
            continue;
        };
        if !surface.in_region(y) {
            continue;
        }
        let d_own = (y - seeds[i]).norm_squared();
        let on_diagram = seeds
            .iter()
            .enumerate()
            .all(|(m, s)| m == i || m == j || m == k || (y - s).norm_squared() > d_own - 1e-9);
        if on_diagram && corners.iter().all(|c| (c - y).norm() > 1e-7) {
            corners.push(y);
        }
    }
    corners
}

/// Order `interior` along the arc from `start` to `end` by nearest-neighbour
/// chaining; `None` when the result has a suspicious gap (mis-ordered chain
/// or a face broken into several arcs).
fn chain_between(start: Vec3, end: Vec3, interior: &[Vec3]) -> Option<Vec<Vec3>> {
    let mut remaining = interior.to_vec();
    let mut chain = Vec::with_capacity(interior.len() + 2);
    chain.push(start);
    let mut cur = start;
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(t, &p)| (t, (p - cur).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        cur = remaining.remove(idx);
        chain.push(cur);
    }
    chain.push(end);
    let mut gaps: Vec<f64> = chain.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    if gaps[gaps.len() - 1] > 5.0 * median {
        return None;
    }
    Some(chain)
}

/// Per-face quadrature: corner-aware when the face is a single arc between
/// two resolved triple junctions, a closed-loop trio rule when the face has
/// no corners, `None` (fall back to the combined-loop rule) otherwise.
fn face_quadrature(
    surface: &LevelSetSurface,
    seeds: &[Vec3],
    i: usize,
    j: usize,
    sampled: Vec<Vec3>,
) -> (Vec<Vec3>, Option<Vec<f64>>) {
    let corners = face_corners(surface, seeds, i, j, &sampled);
    match corners.len() {
        0 => {
            let weights = trio_weights(&sampled).ok().map(|(w, _)| w);
            (sampled, weights)
        }
        2 => match chain_between(corners[0], corners[1], &sampled) {
            Some(chain) => {
                let weights = open_chain_weights(&chain).ok();
                (chain, weights)
            }
            None => (sampled, None),
        },
        _ => (sampled, None),
    }
}

/// Decompose the surface into Voronoi cells of `seeds`, with a closed
/// boundary quadrature per cell. Cloud points are assigned to their nearest
/// seed; candidate adjacencies come from the two nearest seeds of each cloud
/// point; each shared face is sampled once and reused by both cells with
/// opposite conormal orientation.
pub fn voronoi_partition(
    surface: &LevelSetSurface,
    cloud: &PointCloud,
    seeds: &[Vec3],
    nodes_per_face: usize,
    rng_seed: u64,
) -> Result<VoronoiDecomposition> {
    assert!(seeds.len() >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); seeds.len()];
    for (idx, pnt) in cloud.points.iter().enumerate() {
        let (i0, _) = nearest_two(seeds, pnt.position);
        members[i0].push(idx);
    }
    // every pair is a face candidate: short edges can have no cloud point
    // whose two nearest seeds are that pair, so adjacency cannot be read
    // off the cloud. Pairs without a face are rejected cheaply above.
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            pairs.insert((i, j));
        }
    }
    // faces, sampled and weighted once per adjacent pair; per-face weights
    // are corner-aware, and if any face cannot be resolved into arcs every
    // cell falls back to the combined closed-loop rule
    let mut faces: Vec<((usize, usize), Vec<Vec3>, Option<Vec<f64>>)> = Vec::new();
    for &(i, j) in &pairs {
        let sampled = sample_face(surface, seeds, i, j, nodes_per_face, &mut rng)?;
        if !sampled.is_empty() {
            let (nodes, weights) = face_quadrature(surface, seeds, i, j, sampled);
            faces.push(((i, j), nodes, weights));
        }
    }
    let per_face_resolved = faces.iter().all(|(_, _, w)| w.is_some());
    let mut cells = Vec::with_capacity(seeds.len());
    for (ci, seed) in seeds.iter().enumerate() {
        if members[ci].is_empty() {
            return Err(Error::DegenerateCell(ci));
        }
        let mut nodes: Vec<Vec3> = Vec::new();
        let mut face_normals: Vec<Vec3> = Vec::new();
        let mut neighbours = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut piece_ids: Vec<usize> = Vec::new();
        for ((i, j), face_nodes, face_weights) in &faces {
            if *i == ci || *j == ci {
                neighbours.push(if *i == ci { *j } else { *i });
                let p = (seeds[*j] - seeds[*i]).normalize();
                nodes.extend_from_slice(face_nodes);
                face_normals.extend(std::iter::repeat(p).take(face_nodes.len()));
                if per_face_resolved {
                    weights.extend_from_slice(face_weights.as_ref().unwrap());
                    let face_id = neighbours.len() - 1;
                    piece_ids.extend(std::iter::repeat(face_id).take(face_nodes.len()));
                }
            }
        }
        if nodes.len() < 3 {
            return Err(Error::DegenerateCell(ci));
        }
        if !per_face_resolved {
            let (w, p) = trio_weights(&nodes)?;
            weights = w;
            piece_ids = p;
        }
        let mut conormals = Vec::with_capacity(nodes.len());
        for (&y, &p) in nodes.iter().zip(&face_normals) {
            let (n_s, _) = surface.normal_and_curvature(y)?;
            // conormal = tangent-plane direction normal to the local curve,
            // oriented away from the cell's own seed
            let t = n_s.cross(&p).normalize();
            let mut c = t.cross(&n_s).normalize();
            let v = y - seed;
            let v_t = v - n_s * v.dot(&n_s);
            if c.dot(&v_t) < 0.0 {
                c = -c;
            }
            conormals.push(c);
        }
        cells.push(VoronoiCell {
            seed_index: ci,
            seed: *seed,
            member_indices: std::mem::take(&mut members[ci]),
            neighbours,
            boundary: BoundaryQuadrature {
                nodes,
                conormals,
                weights,
                piece_ids,
            },
        });
    }
    Ok(VoronoiDecomposition { cells })
}
