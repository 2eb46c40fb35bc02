// SPDX-License-Identifier: Apache-2.0

//! States on `M_d`, the GNS space of a faithful state, and the operators
//! that live on it.
//!
//! Matrix units `E_ij` are ordered row-major (`μ = i·d + j`). The Gram matrix
//! `G_{μν} = ω(E_μ† E_ν)` is factored as `G = L L†` and vectors are carried in
//! the ω-orthonormal coordinates `c = L† vec(X)`. An operator `M` acting on
//! `vec(X)` becomes `L† M L^{-†}` in those coordinates, so adjoints, norms and
//! unitarity are ordinary matrix notions there.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    cholesky, hermitian_eig, hermitian_eig_unchecked, operator_norm, vec_inner, vec_norm, ComplexMatrix, C64,
};

/// Default cut-off on `λ_min(ρ)` below which a state is treated as not faithful.
pub const FAITHFUL_THRESHOLD: f64 = 1e-10;

/// A state `ω(A) = Tr(ρ A)` on `M_d`.
#[derive(Debug, Clone)]
pub struct State {
    rho: ComplexMatrix,
    min_eigenvalue: f64,
    faithful_threshold: f64,
}

impl State {
    /// Validates a density matrix: Hermitian and unit trace within 1e-10, no
    /// eigenvalue below -1e-12.
    pub fn from_density(rho: ComplexMatrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(violation(format!("density matrix must be square, got {}x{}", rho.rows(), rho.cols())));
        }
        let herm = rho.hermiticity_residual();
        if herm > 1e-10 {
            return Err(violation(format!("density matrix must be Hermitian within 1e-10 (residual {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(violation(format!("trace must be 1 within 1e-10 (found {:.12})", tr.re)));
        }
        let rho = rho.hermitian_part();
        let min_eigenvalue = hermitian_eig_unchecked(&rho)?.eigenvalues[0].re;
        if min_eigenvalue < -1e-12 {
            return Err(violation(format!("density matrix has negative eigenvalue {min_eigenvalue:.3e}")));
        }
        Ok(Self { rho, min_eigenvalue, faithful_threshold: FAITHFUL_THRESHOLD })
    }

    /// The normalized trace `I/d`.
    pub fn tracial(d: usize) -> Self {
        Self {
            rho: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            min_eigenvalue: 1.0 / d as f64,
            faithful_threshold: FAITHFUL_THRESHOLD,
        }
    }

    pub fn with_faithful_threshold(mut self, threshold: f64) -> Self {
        self.faithful_threshold = threshold;
        self
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn faithful_threshold(&self) -> f64 {
        self.faithful_threshold
    }

    pub fn is_faithful(&self) -> bool {
        self.min_eigenvalue > self.faithful_threshold
    }

    pub(crate) fn require_faithful(&self) -> Result<()> {
        if self.is_faithful() {
            Ok(())
        } else {
            Err(Error::NotFaithful { min_eigenvalue: self.min_eigenvalue, threshold: self.faithful_threshold })
        }
    }
}

fn violation(message: String) -> Error {
    Error::InvariantViolation { path: "state".into(), message }
}

/// `Tr(ρ A)`.
pub fn expectation(state: &State, a: &ComplexMatrix) -> Result<C64> {
    let d = state.dim();
    if a.rows() != d || a.cols() != d {
        return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", a.rows(), a.cols())));
    }
    let rho = state.rho();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += rho.get(i, j) * a.get(j, i);
        }
    }
    Ok(acc)
}

/// Thermal state `e^{-βH} / Tr e^{-βH}`.
///
/// Built from the spectral decomposition of `H` with the ground energy
/// shifted to zero, so large `β` underflows gracefully instead of
/// overflowing.
pub fn gibbs_state(h: &ComplexMatrix, beta: f64) -> Result<State> {
    if !beta.is_finite() {
        return Err(Error::BadParam(format!("beta must be finite, got {beta}")));
    }
    let sys = hermitian_eig(h, 1e-10)?;
    let energies = sys.real_eigenvalues();
    let e0 = energies[0];
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<C64> = weights.iter().map(|w| C64::new(w / z, 0.0)).collect();
    let v = &sys.vectors;
    let rho = (&(v * &ComplexMatrix::from_diagonal(&probs)) * &v.adjoint()).hermitian_part();
    let min_eigenvalue = probs.iter().fold(f64::INFINITY, |m, p| m.min(p.re));
    Ok(State { rho, min_eigenvalue, faithful_threshold: FAITHFUL_THRESHOLD })
}

/// The GNS Hilbert space of a faithful state on `M_d`.
#[derive(Debug, Clone)]
pub struct GnsSpace {
    d: usize,
    state: State,
    gram: ComplexMatrix,
    chol: ComplexMatrix,
    chol_adj: ComplexMatrix,
    chol_adj_inv: ComplexMatrix,
    omega_vec: Vec<C64>,
    modular: ComplexMatrix,
}

/// A vector of the GNS space in ω-orthonormal coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct VectorInGns {
    pub coords: Vec<C64>,
    /// The matrix `A` with this vector equal to `π_ω(A)Ω`, when known.
    #[serde(skip)]
    pub source: Option<ComplexMatrix>,
}

impl VectorInGns {
    pub fn norm(&self) -> f64 {
        vec_norm(&self.coords)
    }
}

/// Builds `(H, π_ω, Ω)` together with the modular operator `Δ: X ↦ ρXρ⁻¹`.
pub fn build_gns(state: &State) -> Result<GnsSpace> {
    state.require_faithful()?;
    let d = state.dim();
    let rho = state.rho();
    let n = d * d;
    // ω(E_ij† E_kl) = ω(E_ji E_kl) = δ_ik ρ_lj
    let gram = ComplexMatrix::from_fn(n, n, |mu, nu| {
        let (i, j) = (mu / d, mu % d);
        let (k, l) = (nu / d, nu % d);
        if i == k {
            rho.get(l, j)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let chol = cholesky(&gram, 0.0).map_err(|_| Error::NotFaithful {
        min_eigenvalue: state.min_eigenvalue(),
        threshold: state.faithful_threshold(),
    })?;
    let chol_adj = chol.adjoint();
    let chol_inv = chol
        .lower_triangular_inverse()
        .ok_or(Error::NotFaithful { min_eigenvalue: state.min_eigenvalue(), threshold: state.faithful_threshold() })?;
    let chol_adj_inv = chol_inv.adjoint();
    let omega_vec = chol_adj.apply(&ComplexMatrix::identity(d).vec_row_major());

    let sys = hermitian_eig_unchecked(rho)?;
    let inv_vals: Vec<C64> = sys.eigenvalues.iter().map(|z| C64::new(1.0 / z.re, 0.0)).collect();
    let rho_inv = &(&sys.vectors * &ComplexMatrix::from_diagonal(&inv_vals)) * &sys.vectors.adjoint();
    // vec(A X B) = (A ⊗ Bᵀ) vec(X) in row-major vectorisation
    let modular_vec = rho.kron(&rho_inv.transpose());
    let modular = &(&chol_adj * &modular_vec) * &chol_adj_inv;

    Ok(GnsSpace { d, state: state.clone(), gram, chol, chol_adj, chol_adj_inv, omega_vec, modular })
}

impl GnsSpace {
    /// Matrix dimension `d` of the underlying algebra.
    pub fn algebra_dim(&self) -> usize {
        self.d
    }

    /// The state the space was built from.
    pub fn state(&self) -> &State {
        &self.state
    }

    /// Hilbert-space dimension `d²`.
    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn gram(&self) -> &ComplexMatrix {
        &self.gram
    }

    pub fn chol(&self) -> &ComplexMatrix {
        &self.chol
    }

    /// Coordinates of the cyclic vector `Ω = 𝟙`.
    pub fn omega(&self) -> &[C64] {
        &self.omega_vec
    }

    /// Matrix of `Δ` in ω-orthonormal coordinates.
    pub fn modular(&self) -> &ComplexMatrix {
        &self.modular
    }

    fn check_square(&self, a: &ComplexMatrix) -> Result<()> {
        if a.rows() != self.d || a.cols() != self.d {
            return Err(Error::dims(format!("{0}x{0}", self.d), format!("{}x{}", a.rows(), a.cols())));
        }
        Ok(())
    }

    pub(crate) fn check_operator(&self, t: &ComplexMatrix) -> Result<()> {
        let n = self.dim();
        if t.rows() != n || t.cols() != n {
            return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", t.rows(), t.cols())));
        }
        Ok(())
    }

    /// ω-orthonormal coordinates of `π_ω(A)Ω`.
    pub fn coords_of(&self, a: &ComplexMatrix) -> Result<Vec<C64>> {
        self.check_square(a)?;
        Ok(self.chol_adj.apply(&a.vec_row_major()))
    }

    pub fn vector(&self, a: &ComplexMatrix) -> Result<VectorInGns> {
        Ok(VectorInGns { coords: self.coords_of(a)?, source: Some(a.clone()) })
    }

    /// The matrix `A` with `π_ω(A)Ω` equal to the given coordinates.
    pub fn matrix_of(&self, coords: &[C64]) -> ComplexMatrix {
        ComplexMatrix::unvec_row_major(self.d, &self.chol_adj_inv.apply(coords))
    }

    /// `⟨AΩ, BΩ⟩ = ω(A†B)` through the coordinates.
    pub fn inner(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
        Ok(vec_inner(&self.coords_of(a)?, &self.coords_of(b)?))
    }

    /// Conjugates a `d²×d²` operator on `vec(X)` into ω-orthonormal coordinates.
    pub fn transport(&self, op_on_vec: &ComplexMatrix) -> ComplexMatrix {
        &(&self.chol_adj * op_on_vec) * &self.chol_adj_inv
    }

    /// Inverse of [`transport`](Self::transport).
    pub fn pullback(&self, op_in_coords: &ComplexMatrix) -> ComplexMatrix {
        &(&self.chol_adj_inv * op_in_coords) * &self.chol_adj
    }

    /// `π_ω(A)`: the matrix of `X ↦ AX`.
    pub fn left_representation(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_square(a)?;
        Ok(self.transport(&a.kron(&ComplexMatrix::identity(self.d))))
    }

    /// The commutant action `X ↦ XB`.
    pub fn right_representation(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_square(b)?;
        Ok(self.transport(&ComplexMatrix::identity(self.d).kron(&b.transpose())))
    }

    /// `‖TΔ − ΔT‖` for an operator given in ω-orthonormal coordinates.
    pub fn modular_commutator_norm(&self, t: &ComplexMatrix) -> Result<f64> {
        self.check_operator(t)?;
        let comm = &(t * &self.modular) - &(&self.modular * t);
        operator_norm(&comm)
    }
}
