// SPDX-License-Identifier: Apache-2.0

//! Spectral decompositions, Cholesky and norms.
//!
//! Hermitian problems go through nalgebra's tridiagonal QR iteration; general
//! matrices through its complex Schur form, after which each eigenvalue
//! cluster gets an orthonormal basis of its (generalized) eigenspace from the
//! null space of `(M - λI)^m`.

use nalgebra::{DMatrix, Schur, SymmetricEigen, SVD};
use serde::Serialize;

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues closer than this (relative to `max(1, ||M||_max)`) are merged
/// into one cluster before subspace extraction.
pub const CLUSTER_TOL: f64 = 1e-7;

/// A run of columns in [`EigenSystem::vectors`] spanning the invariant
/// subspace of one eigenvalue cluster.
#[derive(Debug, Clone, Serialize)]
pub struct EigenBlock {
    /// Mean of the merged eigenvalues.
    pub value: C64,
    pub start: usize,
    pub len: usize,
    /// True when `(M - λI)` itself annihilates the block (no Jordan structure).
    pub semisimple: bool,
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<C64>,
    /// Basis columns, aligned with `eigenvalues`.
    pub vectors: ComplexMatrix,
    pub residual: f64,
    pub blocks: Vec<EigenBlock>,
}

impl EigenSystem {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Real parts, for Hermitian results.
    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eig(m: &ComplexMatrix, tol: f64) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let sym = m.hermiticity_residual();
    if sym > tol {
        return Err(Error::NotHermitian { residual: sym });
    }
    let sys = hermitian_eig_unchecked(m)?;
    let scale = m.max_abs().max(1.0);
    if sys.residual > tol * scale {
        return Err(Error::NoConvergence {
            context: format!("hermitian_eig residual {:.3e} above {:.1e}", sys.residual, tol * scale),
        });
    }
    Ok(sys)
}

/// Hermitian eigensolver after symmetrisation, without the input check.
pub(crate) fn hermitian_eig_unchecked(m: &ComplexMatrix) -> Result<EigenSystem> {
    let n = m.rows();
    let h = m.hermitian_part();
    ensure_finite(h.inner())?;
    let eig = SymmetricEigen::try_new(h.inner().clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::NoConvergence { context: format!("hermitian_eig on {n}x{n} matrix") })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<C64> = order.iter().map(|&k| C64::new(eig.eigenvalues[k], 0.0)).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let residual = pair_residual(m, &eigenvalues, &vectors);
    let blocks = (0..n).map(|k| EigenBlock { value: eigenvalues[k], start: k, len: 1, semisimple: true }).collect();
    Ok(EigenSystem { eigenvalues, vectors, residual, blocks })
}

fn pair_residual(m: &ComplexMatrix, values: &[C64], vectors: &ComplexMatrix) -> f64 {
    let mv = m * vectors;
    (0..values.len())
        .map(|j| (0..m.rows()).map(|i| (mv.get(i, j) - values[j] * vectors.get(i, j)).norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Sort key giving "peripheral first": modulus descending, then phase ascending.
/// Moduli are compared on a 1e-10 grid so that roundoff cannot reorder
/// eigenvalues of equal modulus.
pub fn peripheral_order_key(z: C64) -> (i64, f64) {
    let modulus = (z.norm() * 1e10).round() as i64;
    let phase = if z.norm() == 0.0 {
        0.0
    } else if z.im.abs() <= 1e-14 * z.norm() {
        if z.re < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        z.arg()
    };
    (-modulus, phase)
}

fn key_cmp(a: C64, b: C64) -> std::cmp::Ordering {
    let (ma, pa) = peripheral_order_key(a);
    let (mb, pb) = peripheral_order_key(b);
    ma.cmp(&mb).then(pa.total_cmp(&pb))
}

/// Overflow inside a decomposition shows up as non-finite entries.
fn ensure_finite(m: &DMatrix<C64>) -> Result<()> {
    match m.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(k) => Err(Error::NonFinite { row: k % m.nrows(), col: k / m.nrows() }),
        None => Ok(()),
    }
}

/// Full spectrum with multiplicity plus an invariant-subspace basis per
/// eigenvalue cluster. Clusters appear in peripheral-first order.
pub fn general_eig(m: &ComplexMatrix, tol: f64) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(EigenSystem {
            eigenvalues: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
            residual: 0.0,
            blocks: vec![],
        });
    }
    ensure_finite(m.inner())?;
    let scale = m.max_abs().max(1.0);
    // deflation at machine epsilon can stall on nearly scalar matrices; the
    // invariant-subspace residual below still guards the relaxed attempts
    let schur = [1.0, 16.0, 256.0, 4096.0]
        .iter()
        .find_map(|f| Schur::try_new(m.inner() / C64::from(scale), f * f64::EPSILON, MAX_SWEEPS))
        .ok_or_else(|| Error::NoConvergence { context: format!("Schur form of {n}x{n} matrix") })?;
    let (_, t) = schur.unpack();
    ensure_finite(&t)?;
    let raw: Vec<C64> = (0..n).map(|k| t[(k, k)] * scale).collect();

    let clusters = cluster(&raw, CLUSTER_TOL * scale);

    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(clusters.len());
    let mut residual: f64 = 0.0;
    for members in clusters {
        let mut vals: Vec<C64> = members.iter().map(|&k| raw[k]).collect();
        vals.sort_by(|a, b| key_cmp(*a, *b));
        let mean = vals.iter().sum::<C64>() / vals.len() as f64;
        let (basis, semisimple) = cluster_basis(m, mean, vals.len(), scale);
        let r = invariant_residual(m, &basis);
        residual = if r.is_nan() { f64::INFINITY } else { residual.max(r) };
        blocks.push(EigenBlock { value: mean, start: eigenvalues.len(), len: vals.len(), semisimple });
        eigenvalues.extend(vals);
        columns.extend(basis.columns());
    }
    if residual > tol * scale {
        return Err(Error::NoConvergence {
            context: format!("general_eig invariant-subspace residual {residual:.3e} above {:.1e}", tol * scale),
        });
    }
    Ok(EigenSystem { eigenvalues, vectors: ComplexMatrix::from_columns(n, &columns), residual, blocks })
}

/// Groups indices whose values lie within `tol` of each other (transitively),
/// ordered peripheral-first by cluster mean.
fn cluster(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups.sort_by(|a, b| {
        let ma = a.iter().map(|&k| values[k]).sum::<C64>() / a.len() as f64;
        let mb = b.iter().map(|&k| values[k]).sum::<C64>() / b.len() as f64;
        key_cmp(ma, mb)
    });
    groups
}

/// Orthonormal basis of the generalized eigenspace of `lambda` with the given
/// algebraic multiplicity.
fn cluster_basis(m: &ComplexMatrix, lambda: C64, mult: usize, scale: f64) -> (ComplexMatrix, bool) {
    let n = m.rows();
    let shifted = (m.inner() - DMatrix::<C64>::identity(n, n) * lambda) / C64::from(scale);
    let (basis, sigma) = smallest_right_singular(&shifted, mult);
    if sigma <= 1e-6 {
        return (basis, true);
    }
    let mut power = shifted.clone();
    for _ in 1..mult {
        power = &power * &shifted;
    }
    let (basis, _) = smallest_right_singular(&power, mult);
    (basis, false)
}

/// The `k` right singular vectors with smallest singular values, and the
/// largest of those `k` singular values.
fn smallest_right_singular(a: &DMatrix<C64>, k: usize) -> (ComplexMatrix, f64) {
    let n = a.ncols();
    let svd = SVD::new_unordered(a.clone(), false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let pick = &order[..k];
    let sigma = pick.iter().map(|&i| svd.singular_values[i]).fold(0.0, f64::max);
    let basis = ComplexMatrix::from_fn(n, k, |i, j| v_t[(pick[j], i)].conj());
    (basis, sigma)
}

/// Max column norm of `M V - V (V† M V)` for orthonormal `V`.
pub(crate) fn invariant_residual(m: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    if v.cols() == 0 {
        return 0.0;
    }
    let mv = m * v;
    let proj = &(v * &v.adjoint()) * &mv;
    let diff = &mv - &proj;
    (0..diff.cols()).map(|j| diff.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

/// Lower-triangular `L` with `L L† = M`.
pub fn cholesky(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let n = m.rows();
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut pivot = m.get(j, j).re;
        for k in 0..j {
            pivot -= l[j * n + k].norm_sqr();
        }
        if pivot.is_nan() || pivot <= tol {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let diag = pivot.sqrt();
        l[j * n + j] = C64::new(diag, 0.0);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / diag;
        }
    }
    ComplexMatrix::new(n, n, l)
}

/// Largest singular value, from the top eigenvalue of `M† M`.
pub fn operator_norm(m: &ComplexMatrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let unit = m.scale_real(1.0 / scale);
    let gram = &unit.adjoint() * &unit;
    ensure_finite(gram.inner())?;
    let sys = hermitian_eig_unchecked(&gram)?;
    let top = sys.eigenvalues.last().map_or(0.0, |z| z.re);
    Ok(scale * top.max(0.0).sqrt())
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let svd = SVD::new_unordered(m.inner().clone(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis for the column span of `m`, rank decided at `tol`.
pub fn orthonormal_span(m: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    if m.cols() == 0 {
        return ComplexMatrix::zeros(m.rows(), 0);
    }
    let proj = m * &m.adjoint();
    let sys = hermitian_eig_unchecked(&proj).expect("projector eigensystem");
    let top = sys.eigenvalues.last().map_or(0.0, |z| z.re).max(1.0);
    let keep: Vec<usize> = (0..sys.eigenvalues.len()).rev().filter(|&k| sys.eigenvalues[k].re > tol * top).collect();
    let cols: Vec<Vec<C64>> = keep.iter().map(|&k| sys.vectors.column(k)).collect();
    ComplexMatrix::from_columns(m.rows(), &cols)
}

/// Orthonormal basis for the orthogonal complement of the span of the
/// orthonormal columns `v`.
pub fn orthogonal_complement(v: &ComplexMatrix) -> ComplexMatrix {
    let n = v.rows();
    let proj = &ComplexMatrix::identity(n) - &(v * &v.adjoint());
    let sys = hermitian_eig_unchecked(&proj).expect("projector eigensystem");
    let cols: Vec<Vec<C64>> =
        (0..n).rev().filter(|&k| sys.eigenvalues[k].re > 0.5).map(|k| sys.vectors.column(k)).collect();
    ComplexMatrix::from_columns(n, &cols)
}

/// Sines of the principal angles between the spans of two orthonormal
/// column sets of equal width; `None` when the widths differ.
pub fn principal_angle_sines(a: &ComplexMatrix, b: &ComplexMatrix) -> Option<Vec<f64>> {
    if a.cols() != b.cols() || a.rows() != b.rows() {
        return None;
    }
    if a.cols() == 0 {
        return Some(vec![]);
    }
    let residual = b - &(a * &(&a.adjoint() * b));
    let mut sines = singular_values(&residual);
    sines.truncate(a.cols());
    Some(sines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_is_an_error_not_a_panic() {
        let m = ComplexMatrix::from_real(2, 2, &[1e308, 1e308, 1e308, 1e308]).unwrap();
        assert!(matches!(general_eig(&m, 1e-8), Err(Error::NonFinite { .. })));
        let big = ComplexMatrix::from_real(2, 2, &[5e307, 5e307, 5e307, 5e307]).unwrap();
        assert!((operator_norm(&big).unwrap() / 1e308 - 1.0).abs() < 1e-12);
        let h = ComplexMatrix::from_real(2, 2, &[1e308, 1.7e308, 1.7e308, 1e308]).unwrap();
        assert!(matches!(hermitian_eig(&h, 1e-9), Err(Error::NonFinite { .. })));
    }
    use crate::numerics::sampling::{random_gaussian, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_eigenvalues() {
        let sys = hermitian_eig(&ComplexMatrix::identity(3), 1e-12).unwrap();
        assert_eq!(sys.real_eigenvalues(), vec![1.0, 1.0, 1.0]);
        assert_eq!(sys.residual, 0.0);
    }

    #[test]
    fn pauli_x_eigenvalues() {
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let ev = hermitian_eig(&x, 1e-12).unwrap().real_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn not_hermitian_is_rejected() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m, 1e-9), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hermitian_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 8);
        let sys = hermitian_eig(&h, 1e-9).unwrap();
        let v = &sys.vectors;
        let rebuilt = &(v * &ComplexMatrix::from_diagonal(&sys.eigenvalues)) * &v.adjoint();
        assert!(rebuilt.max_diff(&h) < 1e-10);
        assert!((&v.adjoint() * v).max_diff(&ComplexMatrix::identity(8)) < 1e-10);
        let ev = sys.real_eigenvalues();
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nilpotent_jordan_block() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let sys = general_eig(&m, 1e-9).unwrap();
        assert!(sys.eigenvalues.iter().all(|z| z.norm() < 1e-12));
        assert_eq!(sys.blocks.len(), 1);
        assert!(!sys.blocks[0].semisimple);
        // the true eigenvector is e1; the generalized space is everything
        let ker = &m * &sys.vectors;
        let rank = orthonormal_span(&ker, 1e-12).cols();
        assert_eq!(rank, 1);
        let e1_coeff = ker.column(0)[0].norm().max(ker.column(1)[0].norm());
        assert!(e1_coeff > 0.0);
    }

    #[test]
    fn diagonal_spectrum_peripheral_first() {
        let theta: f64 = 0.7;
        let m = ComplexMatrix::from_diagonal(&[c(0.5, 0.0), C64::from_polar(1.0, theta)]);
        let sys = general_eig(&m, 1e-9).unwrap();
        assert!((sys.eigenvalues[0] - C64::from_polar(1.0, theta)).norm() < 1e-14);
        assert!((sys.eigenvalues[1] - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn general_eig_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_gaussian(&mut rng, 6, 6);
        let a = general_eig(&m, 1e-9).unwrap();
        let b = general_eig(&m, 1e-9).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&ComplexMatrix::identity(3), 0.0).unwrap(), ComplexMatrix::identity(3));
        let l = cholesky(&ComplexMatrix::from_real_diagonal(&[4.0, 9.0]), 0.0).unwrap();
        assert!(l.max_diff(&ComplexMatrix::from_real_diagonal(&[2.0, 3.0])) < 1e-15);
    }

    #[test]
    fn cholesky_reports_pivot() {
        let m = ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 2.0]);
        assert!(matches!(cholesky(&m, 1e-12), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        let r = ComplexMatrix::from_real(2, 2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((operator_norm(&r).unwrap() - 2.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = crate::numerics::sampling::haar_unitary(&mut rng, 5);
        assert!((operator_norm(&u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_and_angles() {
        let v = ComplexMatrix::from_columns(3, &[vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]]);
        let w = orthogonal_complement(&v);
        assert_eq!(w.cols(), 2);
        assert!((&v.adjoint() * &w).max_abs() < 1e-14);
        let s = principal_angle_sines(&v, &v).unwrap();
        assert!(s[0] < 1e-7);
    }
}
