//! Point-anchored differential functionals and singular trial augmentation.
//!
//! A [`Functional`] is a finite sum `sum_a c_a D^a` of partial derivatives
//! evaluated at a fixed anchor; constraint rows of the collocation systems
//! are built from these. The surface Laplacian is expressed through ambient
//! derivatives and the point's normal (and optionally curvature), so it fits
//! the same form.

use crate::geometry::{ScalarField, SurfacePoint};
use crate::{Complex, Error, Mat3, Result, Vec3};

/// `sum_a c_a D^a` anchored at a point; multi-indices are ambient `[ax, ay, az]`.
#[derive(Debug, Clone)]
pub struct Functional {
    pub anchor: Vec3,
    pub terms: Vec<(f64, [usize; 3])>,
}

fn order(alpha: [usize; 3]) -> usize {
    alpha[0] + alpha[1] + alpha[2]
}

impl Functional {
    /// Point evaluation.
    pub fn eval(anchor: Vec3) -> Self {
        Functional {
            anchor,
            terms: vec![(1.0, [0, 0, 0])],
        }
    }

    /// Directional derivative along `v` (not necessarily unit).
    pub fn directional(anchor: Vec3, v: Vec3) -> Result<Self> {
        if v.norm_squared() == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let mut terms = Vec::new();
        for a in 0..3 {
            if v[a] != 0.0 {
                let mut alpha = [0, 0, 0];
                alpha[a] = 1;
                terms.push((v[a], alpha));
            }
        }
        Ok(Functional { anchor, terms })
    }

    /// Ambient Laplacian in the first `dim` coordinates.
    pub fn laplacian(anchor: Vec3, dim: usize) -> Self {
        assert!((2..=3).contains(&dim));
        let mut terms = Vec::new();
        for a in 0..dim {
            let mut alpha = [0, 0, 0];
            alpha[a] = 2;
            terms.push((1.0, alpha));
        }
        Functional { anchor, terms }
    }

    pub fn from_terms(anchor: Vec3, terms: Vec<(f64, [usize; 3])>) -> Self {
        Functional { anchor, terms }.merged()
    }

    /// Combine duplicate multi-indices and drop zero coefficients.
    fn merged(mut self) -> Self {
        self.terms.sort_by_key(|&(_, a)| a);
        let mut out: Vec<(f64, [usize; 3])> = Vec::with_capacity(self.terms.len());
        for (c, a) in self.terms.drain(..) {
            match out.last_mut() {
                Some((cl, al)) if *al == a => *cl += c,
                _ => out.push((c, a)),
            }
        }
        out.retain(|&(c, _)| c != 0.0);
        self.terms = out;
        self
    }

    /// Highest derivative order appearing.
    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|&(_, a)| order(a)).max().unwrap_or(0)
    }

    /// `sum_a c_a (i w)^a`; the plane-wave anchor factor `e^{i w . x}` is
    /// applied separately during system assembly.
    pub fn symbol(&self, omega: Vec3) -> Complex {
        let mut total = Complex::new(0.0, 0.0);
        for &(c, alpha) in &self.terms {
            let mut term = Complex::new(c, 0.0);
            for a in 0..3 {
                for _ in 0..alpha[a] {
                    term *= Complex::new(0.0, omega[a]);
                }
            }
            total += term;
        }
        total
    }

    /// Apply to a twice-differentiable field. Terms above second order are
    /// not representable through (value, gradient, hessian) and panic.
    pub fn apply(&self, f: &dyn ScalarField) -> f64 {
        let x = self.anchor;
        let mut val = None;
        let mut grad = None;
        let mut hess: Option<Mat3> = None;
        let mut total = 0.0;
        for &(c, alpha) in &self.terms {
            let d = match order(alpha) {
                0 => *val.get_or_insert_with(|| f.value(x)),
                1 => {
                    let g = grad.get_or_insert_with(|| f.gradient(x));
                    let a = alpha.iter().position(|&k| k == 1).unwrap();
                    g[a]
                }
                2 => {
                    let h = hess.get_or_insert_with(|| f.hessian(x));
                    match alpha {
                        [2, 0, 0] => h[(0, 0)],
                        [0, 2, 0] => h[(1, 1)],
                        [0, 0, 2] => h[(2, 2)],
                        [1, 1, 0] => h[(0, 1)],
                        [1, 0, 1] => h[(0, 2)],
                        [0, 1, 1] => h[(1, 2)],
                        _ => unreachable!(),
                    }
                }
                n => panic!("cannot apply order-{n} term through a hessian"),
            };
            total += c * d;
        }
        total
    }
}

/// Which constraint-row shape encodes the surface Laplacian at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbVariant {
    /// single row using the curvature sum
    WithCurvature,
    /// curvature-free row plus an explicit zero-Neumann row
    NeumannPair,
}

/// Surface Laplacian `lap u - kappa dn u - n^T D2u n` as one functional.
/// Requires the curvature sum at the point.
pub fn lb_functional(p: &SurfacePoint) -> Result<Functional> {
    let kappa = p.curvature_sum.ok_or(Error::MissingCurvature)?;
    let n = p.normal;
    let mut terms = Vec::new();
    for a in 0..3 {
        let mut alpha = [0, 0, 0];
        alpha[a] = 2;
        terms.push((1.0 - n[a] * n[a], alpha));
    }
    // a mixed coefficient multiplies the cross derivative once
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let mut alpha = [0, 0, 0];
        alpha[a] = 1;
        alpha[b] = 1;
        terms.push((-2.0 * n[a] * n[b], alpha));
    }
    for a in 0..3 {
        let mut alpha = [0, 0, 0];
        alpha[a] = 1;
        terms.push((-kappa * n[a], alpha));
    }
    Ok(Functional::from_terms(p.position, terms))
}

/// Curvature-free alternative: the pair (`lap - n^T D2 n`, `n . grad`).
/// Constraining the second member to zero makes the first act as the
/// surface Laplacian without needing kappa.
pub fn lb_neumann_pair(p: &SurfacePoint) -> (Functional, Functional) {
    let n = p.normal;
    let mut terms = Vec::new();
    for a in 0..3 {
        let mut alpha = [0, 0, 0];
        alpha[a] = 2;
        terms.push((1.0 - n[a] * n[a], alpha));
    }
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let mut alpha = [0, 0, 0];
        alpha[a] = 1;
        alpha[b] = 1;
        terms.push((-2.0 * n[a] * n[b], alpha));
    }
    let second = Functional::from_terms(p.position, terms);
    let neumann = Functional::directional(p.position, n).expect("unit normal");
    (second, neumann)
}

/// Closed-form singular factors multiplying the smooth trial space near an
/// integrable singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    /// `s = R^2 ln(R^2)`, matching a logarithmic source in the plane
    LogSquared,
    /// `s = |x - x0|`, matching a 1/R source on a surface through x0
    InverseDistance,
}

#[derive(Debug, Clone, Copy)]
pub struct SingularAugmentation {
    pub kind: SingularKind,
    pub center: Vec3,
}

impl SingularAugmentation {
    pub fn new(kind: SingularKind, center: Vec3) -> Self {
        SingularAugmentation { kind, center }
    }

    pub fn value(&self, x: Vec3) -> f64 {
        let w = x - self.center;
        match self.kind {
            SingularKind::LogSquared => {
                let r2 = w.norm_squared();
                r2 * r2.ln()
            }
            SingularKind::InverseDistance => w.norm(),
        }
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        let w = x - self.center;
        match self.kind {
            SingularKind::LogSquared => 2.0 * w * (w.norm_squared().ln() + 1.0),
            SingularKind::InverseDistance => w / w.norm(),
        }
    }

    pub fn hessian(&self, x: Vec3) -> Mat3 {
        let w = x - self.center;
        match self.kind {
            SingularKind::LogSquared => {
                let r2 = w.norm_squared();
                4.0 * w * w.transpose() / r2 + 2.0 * (r2.ln() + 1.0) * Mat3::identity()
            }
            SingularKind::InverseDistance => {
                let r = w.norm();
                let what = w / r;
                (Mat3::identity() - what * what.transpose()) / r
            }
        }
    }

    /// `D^beta s` at `x` for `|beta| <= 2`.
    fn derivative(&self, x: Vec3, beta: [usize; 3]) -> f64 {
        match order(beta) {
            0 => self.value(x),
            1 => {
                let a = beta.iter().position(|&k| k == 1).unwrap();
                self.gradient(x)[a]
            }
            2 => {
                let h = self.hessian(x);
                match beta {
                    [2, 0, 0] => h[(0, 0)],
                    [0, 2, 0] => h[(1, 1)],
                    [0, 0, 2] => h[(2, 2)],
                    [1, 1, 0] => h[(0, 1)],
                    [1, 0, 1] => h[(0, 2)],
                    [0, 1, 1] => h[(1, 2)],
                    _ => unreachable!(),
                }
            }
            n => panic!("singular factor derivatives implemented up to order 2, got {n}"),
        }
    }

    /// Rewrite `L(s u)` as a functional acting on the smooth part `u`, via
    /// the Leibniz rule with the derivatives of `s` frozen at the anchor.
    pub fn product_functional(&self, f: &Functional) -> Result<Functional> {
        if (f.anchor - self.center).norm_squared() == 0.0 {
            return Err(Error::SingularAnchor);
        }
        let mut terms = Vec::new();
        for &(c, alpha) in &f.terms {
            // all beta <= alpha componentwise
            for bx in 0..=alpha[0] {
                for by in 0..=alpha[1] {
                    for bz in 0..=alpha[2] {
                        let beta = [bx, by, bz];
                        let binom = binom3(alpha, beta);
                        let ds = self.derivative(f.anchor, beta);
                        let rest = [alpha[0] - bx, alpha[1] - by, alpha[2] - bz];
                        terms.push((c * binom * ds, rest));
                    }
                }
            }
        }
        Ok(Functional::from_terms(f.anchor, terms))
    }
}

fn binom3(alpha: [usize; 3], beta: [usize; 3]) -> f64 {
    fn choose(n: usize, k: usize) -> f64 {
        match (n, k) {
            (_, 0) => 1.0,
            (2, 1) => 2.0,
            (n, k) if n == k => 1.0,
            _ => 1.0, // orders above 2 never reach here
        }
    }
    choose(alpha[0], beta[0]) * choose(alpha[1], beta[1]) * choose(alpha[2], beta[2])
}
