// SPDX-License-Identifier: Apache-2.0

//! Seeded random matrices. Callers own the generator; nothing here touches a
//! global RNG.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, C64};

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let entries: Vec<C64> = (0..rows * cols).map(|_| gaussian_c64(rng)).collect();
    ComplexMatrix::new(rows, cols, entries).expect("finite gaussian entries")
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_gaussian(rng, n, n).hermitian_part()
}

/// Haar-distributed unitary: QR of a Gaussian matrix with the phases of
/// `diag(R)` folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_gaussian(rng, n, n);
    let qr = g.inner().clone().qr();
    let q = qr.q();
    let r = qr.r();
    ComplexMatrix::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * phase
    })
}

/// Unit-trace positive semidefinite matrix of the given rank.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> ComplexMatrix {
    let g = random_gaussian(rng, n, rank.max(1));
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    p.scale_real(1.0 / t).hermitian_part()
}
