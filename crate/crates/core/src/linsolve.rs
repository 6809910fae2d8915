//! Minimum-norm solution of the collocation constraints.
//!
//! Two routes to the same interpolant: the V-path does a rank-revealing SVD
//! of the constraint matrix and returns modal coefficients; the Phi-path
//! factorizes the symmetric kernel matrix `Phi = V V*` and keeps the dual
//! vector `beta`, evaluating through cross-kernel rows so the (possibly
//! enormous) mode grid is never materialized.

use crate::fourier::{assemble_phi, assemble_system, phi_cross, ConstraintSystem, FourierBasis};
use crate::operators::{Functional, SingularAugmentation};
use crate::{Complex, Error, Parallelism, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{cholesky::*, JobSvd, SVDDC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    VPath,
    PhiPath,
}

#[derive(Debug, Clone)]
pub enum Representation {
    /// coefficients over the columns of V (modes, then augmented modes)
    Modal(Array1<Complex>),
    /// dual variables of the kernel system `Phi beta = f`
    Kernel(Array1<f64>),
}

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub representation: Representation,
    pub residual_norm: f64,
    /// `||u||_H`; equals `||a||_2` on the V-path
    pub solution_norm: f64,
    pub rank_estimate: usize,
    pub path: SolvePath,
    pub basis: FourierBasis,
    pub functionals: Vec<Functional>,
    pub augmentation: Option<SingularAugmentation>,
}

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Minimum-norm least-squares solve of `V a = f` by divide-and-conquer SVD,
/// truncating singular values below `rank_tolerance` times the largest.
pub fn min_norm_solve(system: &ConstraintSystem, rank_tolerance: f64) -> Result<MinNormSolution> {
    assert!(rank_tolerance > 0.0);
    let v = &system.matrix;
    if v.nrows() == 0 {
        return Err(Error::EmptySystem);
    }
    let (u, sigma, vt) = v.svddc(JobSvd::Some)?;
    let u = u.expect("left singular vectors requested");
    let vt = vt.expect("right singular vectors requested");
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let rank = sigma
        .iter()
        .take_while(|&&s| s > rank_tolerance * smax && s > 0.0)
        .count();
    let f: Array1<Complex> = system.targets.mapv(|t| Complex::new(t, 0.0));
    let mut a = Array1::from_elem(v.ncols(), Complex::new(0.0, 0.0));
    for i in 0..rank {
        let mut coef = Complex::new(0.0, 0.0);
        for j in 0..v.nrows() {
            coef += u[(j, i)].conj() * f[j];
        }
        coef /= sigma[i];
        for (c, slot) in a.iter_mut().enumerate() {
            *slot += coef * vt[(i, c)].conj();
        }
    }
    let mut residual2 = 0.0;
    for j in 0..v.nrows() {
        let mut row = Complex::new(0.0, 0.0);
        for c in 0..v.ncols() {
            row += v[(j, c)] * a[c];
        }
        residual2 += (row - f[j]).norm_sqr();
    }
    let solution_norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(MinNormSolution {
        representation: Representation::Modal(a),
        residual_norm: residual2.sqrt(),
        solution_norm,
        rank_estimate: rank,
        path: SolvePath::VPath,
        basis: system.basis.clone(),
        functionals: system.functionals.clone(),
        augmentation: system.augmentation,
    })
}

/// Cholesky with a diagonal jitter ladder: retries with the diagonal scaled
/// by (1 + eps) for growing eps before giving up.
pub fn cholesky_with_jitter(
    phi: &Array2<f64>,
) -> Result<CholeskyFactorized<ndarray::OwnedRepr<f64>>> {
    for eps in [0.0, 1e-14, 1e-12, 1e-10] {
        let mut m = phi.clone();
        if eps > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] *= 1.0 + eps;
            }
        }
        if let Ok(f) = m.factorizec_into(UPLO::Lower) {
            return Ok(f);
        }
    }
    Err(Error::IllConditioned)
}

/// Kernel-path solve: factorize `Phi` and keep `beta` with the functional
/// list for later cross-kernel evaluation.
pub fn phi_solve(
    basis: &FourierBasis,
    rows: &[(Functional, f64)],
    par: Parallelism,
) -> Result<MinNormSolution> {
    let functionals: Vec<Functional> = rows.iter().map(|(f, _)| f.clone()).collect();
    let targets: Array1<f64> = rows.iter().map(|&(_, t)| t).collect();
    let (phi, _ops) = assemble_phi(basis, &functionals, par)?;
    let factor = cholesky_with_jitter(&phi)?;
    let beta = factor.solvec(&targets)?;
    let phi_beta = phi.dot(&beta);
    let residual_norm = (&phi_beta - &targets)
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt();
    let norm2 = beta.dot(&phi_beta);
    Ok(MinNormSolution {
        representation: Representation::Kernel(beta),
        residual_norm,
        solution_norm: norm2.max(0.0).sqrt(),
        rank_estimate: phi.nrows(),
        path: SolvePath::PhiPath,
        basis: basis.clone(),
        functionals,
        augmentation: None,
    })
}

impl MinNormSolution {
    /// Apply probe functionals to the solution.
    pub fn evaluate(&self, probes: &[Functional]) -> Result<Vec<f64>> {
        match &self.representation {
            Representation::Modal(a) => {
                let rows: Vec<(Functional, f64)> =
                    probes.iter().map(|p| (p.clone(), 0.0)).collect();
                let sys = assemble_system(
                    &self.basis,
                    &rows,
                    self.augmentation,
                    Parallelism::auto(),
                )?;
                Ok((0..probes.len())
                    .map(|j| {
                        let mut acc = Complex::new(0.0, 0.0);
                        for c in 0..sys.n_cols() {
                            acc += sys.matrix[(j, c)] * a[c];
                        }
                        acc.re
                    })
                    .collect())
            }
            Representation::Kernel(beta) => {
                for p in probes {
                    if !self.basis.domain.contains(p.anchor) {
                        return Err(Error::AnchorOutsideBox(p.anchor));
                    }
                }
                probes
                    .iter()
                    .map(|p| {
                        let cross = phi_cross(&self.basis, p, &self.functionals)?;
                        Ok(cross.dot(beta))
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{BoxDomain, FourierBasis, WeightMode};
    use crate::Vec3;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dummy_system(matrix: Array2<Complex>, targets: Vec<f64>) -> ConstraintSystem {
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            0,
            1.0,
            1.0,
            WeightMode::Separable,
        );
        ConstraintSystem {
            basis,
            functionals: vec![Functional::eval(Vec3::zeros()); matrix.nrows()],
            targets: targets.into(),
            augmentation: None,
            matrix,
        }
    }

    #[test]
    fn minimal_norm_completions() {
        let sys = dummy_system(
            ndarray::arr2(&[[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]]),
            vec![1.0],
        );
        let sol = min_norm_solve(&sys, 1e-12).unwrap();
        let a = match &sol.representation {
            Representation::Modal(a) => a.clone(),
            _ => unreachable!(),
        };
        assert_relative_eq!(a[0].re, 1.0, epsilon = 1e-14);
        assert!(a[1].norm() < 1e-14);
        assert_relative_eq!(sol.solution_norm, 1.0, epsilon = 1e-14);
        assert!(sol.residual_norm < 1e-14);

        // symmetric split
        let sys = dummy_system(
            ndarray::arr2(&[[Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)]]),
            vec![2.0],
        );
        let sol = min_norm_solve(&sys, 1e-12).unwrap();
        let a = match &sol.representation {
            Representation::Modal(a) => a.clone(),
            _ => unreachable!(),
        };
        assert_relative_eq!(a[0].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a[1].re, 1.0, epsilon = 1e-14);
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<Complex> {
        Array2::from_shape_fn((r, c), |_| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn matches_pseudoinverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..5 {
            let m = random_matrix(&mut rng, 8, 30);
            let targets: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sys = dummy_system(m.clone(), targets.clone());
            let sol = min_norm_solve(&sys, 1e-12).unwrap();
            let a = match &sol.representation {
                Representation::Modal(a) => a.clone(),
                _ => unreachable!(),
            };
            // independent oracle: nalgebra SVD pseudoinverse
            let na = nalgebra::DMatrix::from_fn(8, 30, |i, j| m[(i, j)]);
            let pinv = na.svd(true, true).pseudo_inverse(1e-12).unwrap();
            let fvec =
                nalgebra::DVector::from_iterator(8, targets.iter().map(|&t| Complex::new(t, 0.0)));
            let oracle = &pinv * fvec;
            let diff: f64 = (0..30).map(|c| (a[c] - oracle[c]).norm_sqr()).sum::<f64>().sqrt();
            assert!(
                diff <= 1e-10 * sol.solution_norm.max(1.0),
                "trial {trial}: gap {diff}"
            );
        }
    }

    #[test]
    fn adding_null_vectors_never_shrinks_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let r = rng.gen_range(3..8);
            let c = r + rng.gen_range(3..10);
            let m = random_matrix(&mut rng, r, c);
            let targets: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sys = dummy_system(m.clone(), targets);
            let sol = min_norm_solve(&sys, 1e-12).unwrap();
            let a = match &sol.representation {
                Representation::Modal(a) => a.clone(),
                _ => unreachable!(),
            };
            // independent null vectors: random vectors projected off the
            // row space (spanned by the conjugated rows of V^H)
            let na = nalgebra::DMatrix::from_fn(r, c, |i, j| m[(i, j)]);
            let svd = na.clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            for _ in 0..3 {
                let mut null: Vec<Complex> = (0..c)
                    .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                for k in 0..vt.nrows() {
                    let basis_vec: Vec<Complex> = (0..c).map(|j| vt[(k, j)].conj()).collect();
                    let proj: Complex =
                        (0..c).map(|j| basis_vec[j].conj() * null[j]).sum();
                    for j in 0..c {
                        null[j] -= proj * basis_vec[j];
                    }
                }
                // sanity: really in the null space of V
                let image = &na * nalgebra::DVector::from_vec(null.clone());
                assert!(image.norm() < 1e-10 * na.norm());
                let inner: Complex = (0..c).map(|j| a[j].conj() * null[j]).sum();
                // minimality <=> solution orthogonal to the null space
                assert!(inner.norm() < 1e-10, "null-space leakage {}", inner.norm());
            }
        }
    }

    #[test]
    fn norm_monotone_under_constraint_nesting() {
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            4,
            2.0,
            8.0,
            WeightMode::Separable,
        );
        let g = |x: Vec3| (1.3 * x.x).sin() * (0.7 * x.y).cos() + 0.3 * x.x;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let pool: Vec<Vec3> = (0..16)
                .map(|_| Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), 0.0))
                .collect();
            let mut prev = 0.0;
            for n in [4, 8, 12, 16] {
                let rows: Vec<(Functional, f64)> = pool[..n]
                    .iter()
                    .map(|&x| (Functional::eval(x), g(x)))
                    .collect();
                let sys =
                    assemble_system(&basis, &rows, None, Parallelism::Sequential).unwrap();
                let sol = min_norm_solve(&sys, 1e-12).unwrap();
                assert!(sol.residual_norm < 1e-10, "constraints not interpolated");
                assert!(
                    sol.solution_norm >= prev - 1e-10,
                    "norm dropped: {} -> {}",
                    prev,
                    sol.solution_norm
                );
                prev = sol.solution_norm;
            }
        }
    }

    #[test]
    fn deterministic_in_sequential_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(&mut rng, 6, 20);
        let targets: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = dummy_system(m, targets);
        let a = min_norm_solve(&sys, 1e-12).unwrap();
        let b = min_norm_solve(&sys, 1e-12).unwrap();
        match (&a.representation, &b.representation) {
            (Representation::Modal(x), Representation::Modal(y)) => assert_eq!(x, y),
            _ => unreachable!(),
        }
        assert_eq!(a.residual_norm.to_bits(), b.residual_norm.to_bits());
    }

    #[test]
    fn residual_is_recomputable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // inconsistent overdetermined system: nonzero residual
        let m = random_matrix(&mut rng, 10, 4);
        let targets: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = dummy_system(m.clone(), targets.clone());
        let sol = min_norm_solve(&sys, 1e-12).unwrap();
        let a = match &sol.representation {
            Representation::Modal(a) => a.clone(),
            _ => unreachable!(),
        };
        let mut res2 = 0.0;
        for j in 0..10 {
            let mut row = Complex::new(-targets[j], 0.0);
            for c in 0..4 {
                row += m[(j, c)] * a[c];
            }
            res2 += row.norm_sqr();
        }
        assert_relative_eq!(res2.sqrt(), sol.residual_norm, epsilon = 1e-12);
        assert!(sol.residual_norm > 1e-3);
    }

    fn interpolation_rows(
        rng: &mut ChaCha8Rng,
        n: usize,
        g: impl Fn(Vec3) -> f64,
    ) -> Vec<(Functional, f64)> {
        (0..n)
            .map(|_| {
                let x = Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), 0.0);
                (Functional::eval(x), g(x))
            })
            .collect()
    }

    #[test]
    fn phi_path_agrees_with_v_path() {
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            5,
            2.0,
            8.0,
            WeightMode::Separable,
        );
        let g = |x: Vec3| (x.x - 0.3).cos() * (0.5 * x.y).sin();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = interpolation_rows(&mut rng, 10, g);
        let kernel = phi_solve(&basis, &rows, Parallelism::Sequential).unwrap();
        let sys = assemble_system(&basis, &rows, None, Parallelism::Sequential).unwrap();
        let modal = min_norm_solve(&sys, 1e-12).unwrap();
        let probes: Vec<Functional> = (0..50)
            .map(|_| {
                Functional::eval(Vec3::new(
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(-1.5..1.5),
                    0.0,
                ))
            })
            .collect();
        let pk = kernel.evaluate(&probes).unwrap();
        let pm = modal.evaluate(&probes).unwrap();
        for (a, b) in pk.iter().zip(&pm) {
            assert!((a - b).abs() < 1e-6, "phi {a} vs v {b}");
        }
        assert_relative_eq!(
            kernel.solution_norm,
            modal.solution_norm,
            epsilon = 1e-6,
            max_relative = 1e-6
        );
    }

    #[test]
    fn phi_path_zero_data_and_replay() {
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            4,
            2.0,
            8.0,
            WeightMode::Separable,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zero_rows = interpolation_rows(&mut rng, 8, |_| 0.0);
        let sol = phi_solve(&basis, &zero_rows, Parallelism::Sequential).unwrap();
        assert_eq!(sol.solution_norm, 0.0);
        let rows = interpolation_rows(&mut rng, 8, |x| x.x + x.y * x.y);
        let sol = phi_solve(&basis, &rows, Parallelism::Sequential).unwrap();
        let probes: Vec<Functional> = rows.iter().map(|(f, _)| f.clone()).collect();
        let vals = sol.evaluate(&probes).unwrap();
        for ((_, t), v) in rows.iter().zip(&vals) {
            assert!((t - v).abs() < 1e-8, "replay {v} vs target {t}");
        }
    }

    #[test]
    fn directional_probe_matches_finite_difference() {
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), 4.0, 2),
            4,
            2.0,
            8.0,
            WeightMode::Separable,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows = interpolation_rows(&mut rng, 12, |x| (x.x * 0.9).sin() + x.y);
        let sys = assemble_system(&basis, &rows, None, Parallelism::Sequential).unwrap();
        let sol = min_norm_solve(&sys, 1e-12).unwrap();
        let x = Vec3::new(0.21, -0.4, 0.0);
        let v = Vec3::new(0.6, 0.8, 0.0);
        let h = 1e-6;
        let pts = [
            Functional::eval(x + h * v),
            Functional::eval(x - h * v),
            Functional::directional(x, v).unwrap(),
        ];
        let out = sol.evaluate(&pts).unwrap();
        let fd = (out[0] - out[1]) / (2.0 * h);
        assert!((fd - out[2]).abs() < 1e-6, "fd {fd} vs probe {}", out[2]);
    }

    #[test]
    fn jitter_ladder_rejects_indefinite_matrices() {
        let phi = ndarray::arr2(&[[1.0, 0.0], [0.0, -1.0]]);
        assert!(matches!(
            cholesky_with_jitter(&phi),
            Err(Error::IllConditioned)
        ));
    }

    #[test]
    fn empty_system_is_an_error() {
        let sys = dummy_system(Array2::zeros((0, 5)), vec![]);
        assert!(matches!(min_norm_solve(&sys, 1e-12), Err(Error::EmptySystem)));
    }
}
