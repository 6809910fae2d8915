//! Weighted truncated Fourier trial space on a bounding box.
//!
//! Trial functions are `d_n^{-1/2} e^{i w_n . x}` with per-mode smoothness
//! weights `d_n`; a constraint row applies a [`Functional`] to every trial
//! function, which reduces to multiplying the plane wave by the functional's
//! Fourier symbol. Two derived objects matter downstream: the constraint
//! matrix `V` (row per functional) and the kernel matrix `Phi = V V*`, which
//! in separable weight mode factors into per-axis one-dimensional sums and
//! is assembled without ever enumerating the full mode grid.

use crate::operators::{Functional, SingularAugmentation};
use crate::{Complex, Error, Parallelism, Result, Vec3};
use ndarray::{Array1, Array2};
#[cfg(feature = "parallel")]
use ndarray::parallel::prelude::*;

/// Axis-aligned box domain; `dim` is 2 or 3 (2D problems live in z = 0).
#[derive(Debug, Clone, Copy)]
pub struct BoxDomain {
    pub center: Vec3,
    pub side_lengths: Vec3,
    pub dim: usize,
}

impl BoxDomain {
    pub fn new(center: Vec3, side_lengths: Vec3, dim: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        for a in 0..dim {
            assert!(side_lengths[a] > 0.0);
        }
        BoxDomain {
            center,
            side_lengths,
            dim,
        }
    }

    pub fn cube(center: Vec3, side: f64, dim: usize) -> Self {
        Self::new(center, Vec3::new(side, side, side), dim)
    }

    /// Strict interior test on the active axes.
    pub fn contains(&self, x: Vec3) -> bool {
        (0..self.dim).all(|a| (x[a] - self.center[a]).abs() < self.side_lengths[a] / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `d_n` is a product of per-axis factors; enables the fast kernel path.
    Separable,
    /// `d_n` depends on the Euclidean norm of the full frequency vector.
    Joint,
}

#[derive(Debug, Clone)]
pub struct FourierBasis {
    pub domain: BoxDomain,
    /// frequencies per axis are `2 pi k / L`, k = -N..N
    pub modes_per_axis: usize,
    pub q: f64,
    pub t_period: f64,
    pub weight_mode: WeightMode,
    /// uniform multiplier on every d_n; only used to test scale invariances
    pub d_scale: f64,
}

impl FourierBasis {
    pub fn new(
        domain: BoxDomain,
        modes_per_axis: usize,
        q: f64,
        t_period: f64,
        weight_mode: WeightMode,
    ) -> Self {
        assert!(q > 0.0 && t_period > 0.0);
        FourierBasis {
            domain,
            modes_per_axis,
            q,
            t_period,
            weight_mode,
            d_scale: 1.0,
        }
    }

    pub fn modes_1d(&self) -> usize {
        2 * self.modes_per_axis + 1
    }

    pub fn n_modes(&self) -> usize {
        self.modes_1d().pow(self.domain.dim as u32)
    }

    pub fn omega(&self, axis: usize, k: i64) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.domain.side_lengths[axis]
    }

    fn weight_base(&self) -> f64 {
        (self.q * (2.0 * std::f64::consts::PI / self.t_period).sqrt()).exp()
    }

    /// Per-axis weight factor in separable mode.
    pub fn weight_1d(&self, omega: f64) -> f64 {
        let b = self.weight_base() + (self.q * omega.abs().sqrt()).exp();
        b * b
    }

    /// Full-mode weight `d_n` in either mode (includes `d_scale`).
    pub fn weight(&self, k: [i64; 3]) -> f64 {
        match self.weight_mode {
            WeightMode::Separable => {
                let mut d = self.d_scale;
                for a in 0..self.domain.dim {
                    d *= self.weight_1d(self.omega(a, k[a]));
                }
                d
            }
            WeightMode::Joint => {
                let mut n2 = 0.0;
                for a in 0..self.domain.dim {
                    let w = self.omega(a, k[a]);
                    n2 += w * w;
                }
                let b = self.weight_base() + (self.q * n2.sqrt().sqrt()).exp();
                self.d_scale * b * b
            }
        }
    }

    /// Mode grid in axis-major order (k_x slowest). Inactive axes carry k=0.
    pub fn modes(&self) -> Vec<[i64; 3]> {
        let n = self.modes_per_axis as i64;
        let dim = self.domain.dim;
        let mut out = Vec::with_capacity(self.n_modes());
        let range = |active: bool| if active { -n..=n } else { 0..=0 };
        for kx in range(true) {
            for ky in range(true) {
                for kz in range(dim == 3) {
                    out.push([kx, ky, kz]);
                }
            }
        }
        out
    }

    fn omega_vec(&self, k: [i64; 3]) -> Vec3 {
        let mut w = Vec3::zeros();
        for a in 0..self.domain.dim {
            w[a] = self.omega(a, k[a]);
        }
        w
    }
}

/// `sum_k (i w_k)^p (-i w_k)^q d_k^{-1} e^{i w_k delta}` over one axis.
pub fn kernel_1d(freqs: &[f64], weights: &[f64], p: usize, q: usize, delta: f64) -> Complex {
    assert!(p <= 2 && q <= 2);
    assert_eq!(freqs.len(), weights.len());
    let ip = I_POWERS[(4 + p - q) % 4];
    let mut acc = Complex::new(0.0, 0.0);
    for (&w, &d) in freqs.iter().zip(weights) {
        acc += w.powi((p + q) as i32) / d * Complex::from_polar(1.0, w * delta);
    }
    ip * acc
}

const I_POWERS: [Complex; 4] = [
    Complex::new(1.0, 0.0),
    Complex::new(0.0, 1.0),
    Complex::new(-1.0, 0.0),
    Complex::new(0.0, -1.0),
];

fn i_power(n: isize) -> Complex {
    I_POWERS[n.rem_euclid(4) as usize]
}

/// The assembled constraint matrix for a list of (functional, target) rows.
/// When augmented, the column block doubles: the second half applies each
/// functional to `s * basis` via the Leibniz-expanded product functionals.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub basis: FourierBasis,
    pub functionals: Vec<Functional>,
    pub targets: Array1<f64>,
    pub augmentation: Option<SingularAugmentation>,
    pub matrix: Array2<Complex>,
}

impl ConstraintSystem {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }
}

/// Per-axis phase tables `e^{i w_k x_a}` for one anchor.
fn phase_tables(basis: &FourierBasis, x: Vec3) -> Vec<Vec<Complex>> {
    let n = basis.modes_per_axis as i64;
    (0..basis.domain.dim)
        .map(|a| {
            (-n..=n)
                .map(|k| Complex::from_polar(1.0, basis.omega(a, k) * x[a]))
                .collect()
        })
        .collect()
}

/// Fill one row: `symbol(w_n) d_n^{-1/2} e^{i w_n . anchor}` per mode.
fn fill_row(
    basis: &FourierBasis,
    f: &Functional,
    dinv_sqrt: &[f64],
    modes: &[[i64; 3]],
    out: &mut [Complex],
) {
    let phases = phase_tables(basis, f.anchor);
    let n = basis.modes_per_axis as i64;
    for (m, (&k, slot)) in modes.iter().zip(out.iter_mut()).enumerate() {
        let mut phase = Complex::new(1.0, 0.0);
        for (a, pa) in phases.iter().enumerate() {
            phase *= pa[(k[a] + n) as usize];
        }
        *slot = f.symbol(basis.omega_vec(k)) * phase * dinv_sqrt[m];
    }
}

/// Assemble `V` (and the augmented block if requested).
pub fn assemble_system(
    basis: &FourierBasis,
    rows: &[(Functional, f64)],
    augmentation: Option<SingularAugmentation>,
    par: Parallelism,
) -> Result<ConstraintSystem> {
    if rows.is_empty() {
        return Err(Error::EmptySystem);
    }
    for (f, _) in rows {
        if !basis.domain.contains(f.anchor) {
            return Err(Error::AnchorOutsideBox(f.anchor));
        }
    }
    let product_rows: Option<Vec<Functional>> = match &augmentation {
        Some(aug) => Some(
            rows.iter()
                .map(|(f, _)| aug.product_functional(f))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let modes = basis.modes();
    let dinv_sqrt: Vec<f64> = modes.iter().map(|&k| basis.weight(k).powf(-0.5)).collect();
    let n_modes = modes.len();
    let n_cols = n_modes * if augmentation.is_some() { 2 } else { 1 };
    let mut matrix = Array2::from_elem((rows.len(), n_cols), Complex::new(0.0, 0.0));

    let fill = |j: usize, row: &mut [Complex]| {
        fill_row(basis, &rows[j].0, &dinv_sqrt, &modes, &mut row[..n_modes]);
        if let Some(products) = &product_rows {
            // the augmentation block keeps the same weights (d-tilde = d)
            fill_row(basis, &products[j], &dinv_sqrt, &modes, &mut row[n_modes..]);
        }
    };
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            matrix
                .outer_iter_mut()
                .into_par_iter()
                .enumerate()
                .for_each(|(j, mut row)| fill(j, row.as_slice_mut().unwrap()));
        }
        _ => {
            for (j, mut row) in matrix.outer_iter_mut().enumerate() {
                fill(j, row.as_slice_mut().unwrap());
            }
        }
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(ConstraintSystem {
        basis: basis.clone(),
        functionals: rows.iter().map(|(f, _)| f.clone()).collect(),
        targets: rows.iter().map(|&(_, t)| t).collect(),
        augmentation,
        matrix,
    })
}

/// Precomputed per-axis tables `w^t / d_a(w)` for t = 0..4, plus the phase
/// recurrence parameters, shared by all kernel entries.
struct KernelTables {
    /// tab[axis][t][mode index]
    tab: Vec<[Vec<f64>; 5]>,
    omega_step: Vec<f64>,
}

impl KernelTables {
    fn new(basis: &FourierBasis) -> Self {
        let n = basis.modes_per_axis as i64;
        let mut tab = Vec::new();
        let mut omega_step = Vec::new();
        for a in 0..basis.domain.dim {
            let mut axis: [Vec<f64>; 5] = Default::default();
            for k in -n..=n {
                let w = basis.omega(a, k);
                let dinv = 1.0 / basis.weight_1d(w);
                let mut pw = dinv;
                for t in 0..5 {
                    axis[t].push(pw);
                    pw *= w;
                }
            }
            tab.push(axis);
            omega_step.push(basis.omega(a, 1));
        }
        KernelTables { tab, omega_step }
    }

    /// `S_t(delta_a)` for all t in one sweep; counts 2N+1 kernel terms per axis.
    fn axis_sums(&self, axis: usize, n1d: usize, delta: f64) -> [Complex; 5] {
        let step = Complex::from_polar(1.0, self.omega_step[axis] * delta);
        let half = (n1d / 2) as f64;
        let mut z = Complex::from_polar(1.0, -half * self.omega_step[axis] * delta);
        let mut s = [Complex::new(0.0, 0.0); 5];
        let t0 = &self.tab[axis][0];
        let t1 = &self.tab[axis][1];
        let t2 = &self.tab[axis][2];
        let t3 = &self.tab[axis][3];
        let t4 = &self.tab[axis][4];
        for idx in 0..n1d {
            s[0] += t0[idx] * z;
            s[1] += t1[idx] * z;
            s[2] += t2[idx] * z;
            s[3] += t3[idx] * z;
            s[4] += t4[idx] * z;
            z *= step;
        }
        s
    }
}

fn kernel_entry(
    basis: &FourierBasis,
    tables: &KernelTables,
    fj: &Functional,
    fl: &Functional,
    ops: &mut u64,
) -> f64 {
    let dim = basis.domain.dim;
    let n1d = basis.modes_1d();
    let delta = fj.anchor - fl.anchor;
    let mut s = [[Complex::new(0.0, 0.0); 5]; 3];
    for (a, sa) in s.iter_mut().enumerate().take(dim) {
        *sa = tables.axis_sums(a, n1d, delta[a]);
        *ops += n1d as u64;
    }
    let mut acc = Complex::new(0.0, 0.0);
    for &(ca, alpha) in &fj.terms {
        let oa = (alpha[0] + alpha[1] + alpha[2]) as isize;
        for &(cb, beta) in &fl.terms {
            let ob = (beta[0] + beta[1] + beta[2]) as isize;
            // derivatives along inactive axes annihilate every mode
            if (dim..3).any(|a| alpha[a] + beta[a] > 0) {
                continue;
            }
            let mut prod = (ca * cb) * i_power(oa - ob);
            for (a, sa) in s.iter().enumerate().take(dim) {
                prod *= sa[alpha[a] + beta[a]];
            }
            acc += prod;
        }
    }
    acc.re / basis.d_scale
}

/// Kernel matrix `Phi = V V*`, real symmetric. In separable mode each entry
/// is a sum over functional term pairs of products of per-axis 1-D kernel
/// sums, touching `m (2N+1)` terms per entry instead of `(2N+1)^m`. Joint
/// mode falls back to forming `V` and multiplying. Returns the matrix and
/// the number of 1-D kernel terms touched.
pub fn assemble_phi(
    basis: &FourierBasis,
    functionals: &[Functional],
    par: Parallelism,
) -> Result<(Array2<f64>, u64)> {
    if functionals.is_empty() {
        return Err(Error::EmptySystem);
    }
    let nf = functionals.len();
    match basis.weight_mode {
        WeightMode::Separable => {
            let tables = KernelTables::new(basis);
            // lower triangle per row, then mirrored
            let row_of = |j: usize| -> (Vec<f64>, u64) {
                let mut ops = 0u64;
                let row = (0..=j)
                    .map(|l| {
                        kernel_entry(basis, &tables, &functionals[j], &functionals[l], &mut ops)
                    })
                    .collect();
                (row, ops)
            };
            let rows: Vec<(Vec<f64>, u64)> = match par {
                #[cfg(feature = "parallel")]
                Parallelism::Parallel => (0..nf).into_par_iter().map(row_of).collect(),
                _ => (0..nf).map(row_of).collect(),
            };
            let mut phi = Array2::zeros((nf, nf));
            let mut ops = 0u64;
            for (j, (row, o)) in rows.into_iter().enumerate() {
                ops += o;
                for (l, v) in row.into_iter().enumerate() {
                    phi[(j, l)] = v;
                    phi[(l, j)] = v;
                }
            }
            Ok((phi, ops))
        }
        WeightMode::Joint => {
            let rows: Vec<(Functional, f64)> =
                functionals.iter().map(|f| (f.clone(), 0.0)).collect();
            let sys = assemble_system(basis, &rows, None, par)?;
            let v = &sys.matrix;
            let mut phi = Array2::zeros((nf, nf));
            let mut ops = 0u64;
            for j in 0..nf {
                for l in 0..=j {
                    let mut acc = Complex::new(0.0, 0.0);
                    for m in 0..v.ncols() {
                        acc += v[(j, m)] * v[(l, m)].conj();
                    }
                    ops += v.ncols() as u64;
                    phi[(j, l)] = acc.re;
                    phi[(l, j)] = acc.re;
                }
            }
            Ok((phi, ops))
        }
    }
}

/// Cross-kernel row between one probe functional and the system functionals:
/// used to evaluate kernel-represented solutions. Separable mode only.
pub fn phi_cross(
    basis: &FourierBasis,
    probe: &Functional,
    functionals: &[Functional],
) -> Result<Array1<f64>> {
    if basis.weight_mode != WeightMode::Separable {
        return Err(Error::Config(
            "cross-kernel evaluation requires separable weights".into(),
        ));
    }
    let tables = KernelTables::new(basis);
    let mut ops = 0u64;
    Ok(functionals
        .iter()
        .map(|f| kernel_entry(basis, &tables, probe, f, &mut ops))
        .collect())
}
