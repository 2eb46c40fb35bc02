// SPDX-License-Identifier: Apache-2.0

//! Heisenberg-picture linear maps on `M_d`, their positivity hierarchy, the
//! ω-adjoint `τ^β` and the detailed balance II verdict.
//!
//! A map is stored by its transfer matrix in the row-major matrix-unit basis:
//! `vec(τ(X)) = transfer · vec(X)`. The Choi matrix is the reshuffle
//! `C = Σ_ij E_ij ⊗ τ(E_ij)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{build_gns, expectation, GnsSpace, State};
use crate::error::{Error, Result};
use crate::numerics::sampling::{gaussian_c64, random_gaussian};
use crate::numerics::{hermitian_eig_unchecked, operator_norm, ComplexMatrix, C64, DEFAULT_TOL};

/// Choi eigenvalues at or above this count as positive.
pub const CP_TOL: f64 = 1e-10;

/// `‖τ(𝟙) − 𝟙‖_max` at or below this counts as unital.
pub const UNITAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UnitalFlag {
    pub unital: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CpFlag {
    pub cp: bool,
    pub min_choi_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchwarzFlag {
    pub passed: bool,
    pub worst_margin: f64,
}

/// A linear map `τ` on `M_d` in the Heisenberg picture.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    d: usize,
    transfer: ComplexMatrix,
    choi: ComplexMatrix,
    unital: UnitalFlag,
    cp: CpFlag,
    schwarz: Option<SchwarzFlag>,
}

impl SuperOperator {
    /// Builds a map from its transfer matrix (`d² × d²`).
    pub fn from_transfer(d: usize, transfer: ComplexMatrix) -> Result<Self> {
        let n = d * d;
        if transfer.rows() != n || transfer.cols() != n {
            return Err(Error::dims(format!("{n}x{n} transfer"), format!("{}x{}", transfer.rows(), transfer.cols())));
        }
        let choi = reshuffle(d, &transfer);
        let id = ComplexMatrix::identity(d);
        let image = ComplexMatrix::unvec_row_major(d, &transfer.apply(&id.vec_row_major()));
        let residual = image.max_diff(&id);
        let cp = cp_flag(&choi)?;
        Ok(Self {
            d,
            transfer,
            choi,
            unital: UnitalFlag { unital: residual <= UNITAL_TOL, residual },
            cp,
            schwarz: None,
        })
    }

    /// Builds a map from its Choi matrix `Σ_ij E_ij ⊗ τ(E_ij)`.
    pub fn from_choi(d: usize, choi: ComplexMatrix) -> Result<Self> {
        let n = d * d;
        if choi.rows() != n || choi.cols() != n {
            return Err(Error::dims(format!("{n}x{n} Choi"), format!("{}x{}", choi.rows(), choi.cols())));
        }
        Self::from_transfer(d, unreshuffle(d, &choi))
    }

    /// `τ(A) = Σ_i K_i† A K_i`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let first = kraus.first().ok_or(Error::EmptyKrausList)?;
        let d = first.rows();
        for k in kraus {
            if k.rows() != d || k.cols() != d {
                return Err(Error::dims(format!("{d}x{d} Kraus operator"), format!("{}x{}", k.rows(), k.cols())));
            }
        }
        let n = d * d;
        let mut transfer = ComplexMatrix::zeros(n, n);
        for k in kraus {
            // vec(K† A K) = (K† ⊗ Kᵀ) vec(A)
            transfer = &transfer + &k.adjoint().kron(&k.transpose());
        }
        Self::from_transfer(d, transfer)
    }

    /// Builds the transfer matrix by applying `f` to every matrix unit.
    pub fn from_fn(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        let n = d * d;
        let cols: Vec<Vec<C64>> = (0..n).map(|nu| f(&ComplexMatrix::unit(d, nu / d, nu % d)).vec_row_major()).collect();
        Self::from_transfer(d, ComplexMatrix::from_columns(n, &cols))
    }

    pub fn identity(d: usize) -> Self {
        Self::from_transfer(d, ComplexMatrix::identity(d * d)).expect("identity map")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn transfer(&self) -> &ComplexMatrix {
        &self.transfer
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn unital(&self) -> UnitalFlag {
        self.unital
    }

    pub fn cp(&self) -> CpFlag {
        self.cp
    }

    pub fn schwarz(&self) -> Option<SchwarzFlag> {
        self.schwarz
    }

    /// Returns a copy carrying the result of a sampled Schwarz check.
    pub fn with_schwarz(&self, state: &State, samples: usize, seed: u64) -> Result<Self> {
        let margin = schwarz_check(self, state, samples, seed)?;
        let mut out = self.clone();
        out.schwarz = Some(SchwarzFlag { passed: margin >= -DEFAULT_TOL, worst_margin: margin });
        Ok(out)
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        if a.rows() != self.d || a.cols() != self.d {
            return Err(Error::dims(format!("{0}x{0}", self.d), format!("{}x{}", a.rows(), a.cols())));
        }
        Ok(ComplexMatrix::unvec_row_major(self.d, &self.transfer.apply(&a.vec_row_major())))
    }

    /// Schrödinger-picture dual `τ*`, defined by `Tr(τ*(ρ) A) = Tr(ρ τ(A))`.
    pub fn dual_apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.d || rho.cols() != self.d {
            return Err(Error::dims(format!("{0}x{0}", self.d), format!("{}x{}", rho.rows(), rho.cols())));
        }
        // Tr(ρ X) = vec(ρᵀ) · vec(X), so vec(τ*(ρ)ᵀ) = transferᵀ vec(ρᵀ)
        let v = self.transfer.transpose().apply(&rho.transpose().vec_row_major());
        Ok(ComplexMatrix::unvec_row_major(self.d, &v).transpose())
    }

    fn require_unital(&self, stage: &str) -> Result<()> {
        if self.unital.unital {
            Ok(())
        } else {
            Err(Error::NotUnital { residual: self.unital.residual, stage: stage.into() })
        }
    }
}

/// Transfer to Choi layout: `C[(i,k),(j,l)] = T[(k,l),(i,j)]`.
fn reshuffle(d: usize, t: &ComplexMatrix) -> ComplexMatrix {
    let n = d * d;
    ComplexMatrix::from_fn(n, n, |row, col| {
        let (i, k) = (row / d, row % d);
        let (j, l) = (col / d, col % d);
        t.get(k * d + l, i * d + j)
    })
}

/// Inverse of [`reshuffle`].
fn unreshuffle(d: usize, c: &ComplexMatrix) -> ComplexMatrix {
    let n = d * d;
    ComplexMatrix::from_fn(n, n, |row, col| {
        let (k, l) = (row / d, row % d);
        let (i, j) = (col / d, col % d);
        c.get(i * d + k, j * d + l)
    })
}

fn cp_flag(choi: &ComplexMatrix) -> Result<CpFlag> {
    let herm = choi.hermiticity_residual();
    let min_eig = hermitian_eig_unchecked(choi)?.eigenvalues[0].re;
    Ok(CpFlag { cp: herm <= CP_TOL && min_eig >= -CP_TOL, min_choi_eigenvalue: min_eig })
}

/// The Choi matrix `Σ_ij E_ij ⊗ τ(E_ij)`.
pub fn choi_of(op: &SuperOperator) -> ComplexMatrix {
    op.choi.clone()
}

/// `(λ_min(C) ≥ −1e−10, λ_min(C))`; a non-Hermitian Choi matrix is never CP.
pub fn cp_check(op: &SuperOperator) -> (bool, f64) {
    (op.cp.cp, op.cp.min_choi_eigenvalue)
}

/// Applies `τ_k` entrywise to random positive elements of `M_k(M_d)` and
/// returns the most negative eigenvalue seen.
///
/// Samples are `(1 − δ)vv† + δ𝟙/(kd)` with `v` Gaussian and `δ = 1e−3`, so
/// every input is strictly positive. A negative return certifies that `τ` is
/// not `k`-positive; a nonnegative one is only evidence.
pub fn k_positivity_sample(op: &SuperOperator, k: usize, samples: usize, seed: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::BadParam("k must be at least 1".into()));
    }
    let d = op.d;
    let n = k * d;
    let delta = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let v: Vec<C64> = (0..n).map(|_| gaussian_c64(&mut rng)).collect();
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let x = ComplexMatrix::from_fn(n, n, |i, j| {
            let pure = v[i] * v[j].conj() / norm_sq * (1.0 - delta);
            if i == j {
                pure + C64::new(delta / n as f64, 0.0)
            } else {
                pure
            }
        });
        let mut image = ComplexMatrix::zeros(n, n);
        for bi in 0..k {
            for bj in 0..k {
                let block = ComplexMatrix::from_fn(d, d, |i, j| x.get(bi * d + i, bj * d + j));
                let mapped = op.apply(&block)?;
                image = &image
                    + &ComplexMatrix::from_fn(n, n, |i, j| {
                        if i / d == bi && j / d == bj {
                            mapped.get(i % d, j % d)
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    });
            }
        }
        let min_eig = hermitian_eig_unchecked(&image)?.eigenvalues[0].re;
        worst = worst.min(min_eig);
    }
    Ok(if samples == 0 { 0.0 } else { worst })
}

/// Minimum over random `A` (normalised to `φ(A†A) = 1`) of
/// `φ(A†A) − φ(τ(A)†τ(A))`. At or above `−1e−9` the check passes.
pub fn schwarz_check(op: &SuperOperator, state: &State, samples: usize, seed: u64) -> Result<f64> {
    let d = op.d;
    if state.dim() != d {
        return Err(Error::dims(format!("state of dimension {d}"), format!("dimension {}", state.dim())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let raw = random_gaussian(&mut rng, d, d);
        let scale = expectation(state, &(&raw.adjoint() * &raw))?.re;
        if scale <= 0.0 {
            continue;
        }
        let a = raw.scale_real(1.0 / scale.sqrt());
        let ta = op.apply(&a)?;
        let before = expectation(state, &(&a.adjoint() * &a))?.re;
        let after = expectation(state, &(&ta.adjoint() * &ta))?.re;
        worst = worst.min(before - after);
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// `‖τ*(ρ) − ρ‖_max`.
pub fn invariance_residual(op: &SuperOperator, state: &State) -> Result<f64> {
    Ok(op.dual_apply(state.rho())?.max_diff(state.rho()))
}

/// The map `τ^β` with `ω(A†τ(B)) = ω(τ^β(A†)B)` for all `A, B`.
///
/// Let `S` be the adjoint of `τ` for `⟨X, Y⟩ = ω(X†Y)`; then
/// `τ^β(Y) = S(Y†)†`.
pub fn omega_adjoint(op: &SuperOperator, gns: &GnsSpace) -> Result<SuperOperator> {
    let d = op.d;
    if gns.algebra_dim() != d {
        return Err(Error::dims(format!("GNS space of M_{d}"), format!("M_{}", gns.algebra_dim())));
    }
    let t = gns.transport(&op.transfer);
    let s_vec = gns.pullback(&t.adjoint());
    SuperOperator::from_fn(d, |y| {
        let y_dag = y.adjoint();
        ComplexMatrix::unvec_row_major(d, &s_vec.apply(&y_dag.vec_row_major())).adjoint()
    })
}

/// `max_{μ,ν} |ω(E_μ† τ(E_ν)) − ω(τ^β(E_μ†) E_ν)|`, computed with traces
/// directly so it does not share the GNS route of [`omega_adjoint`].
pub fn defining_identity_residual(op: &SuperOperator, beta: &SuperOperator, state: &State) -> Result<f64> {
    let d = op.d;
    let n = d * d;
    let rho = state.rho();
    let units: Vec<ComplexMatrix> = (0..n).map(|mu| ComplexMatrix::unit(d, mu / d, mu % d)).collect();
    let tau_units: Vec<ComplexMatrix> = units.iter().map(|e| op.apply(e)).collect::<Result<_>>()?;
    let beta_adj_units: Vec<ComplexMatrix> = units.iter().map(|e| beta.apply(&e.adjoint())).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for mu in 0..n {
        let left = rho * &units[mu].adjoint();
        let right = rho * &beta_adj_units[mu];
        for nu in 0..n {
            let lhs = trace_product(&left, &tau_units[nu]);
            let rhs = trace_product(&right, &units[nu]);
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let d = a.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a.get(i, j) * b.get(j, i);
        }
    }
    acc
}

/// How strongly the positivity of a map has been established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityEvidence {
    /// Choi matrix positive semidefinite.
    CpCertified,
    /// No violation found by sampling `k = 1`.
    Sampled,
    /// A positive input was mapped to a non-positive output.
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DbVerdict {
    #[serde(rename = "DB_II_holds")]
    Holds,
    #[serde(rename = "DB_II_fails")]
    Fails,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

#[derive(Debug, Clone, Copy)]
pub struct DbOptions {
    pub tol: f64,
    pub positivity_samples: usize,
    pub seed: u64,
}

impl Default for DbOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, positivity_samples: 200, seed: 0 }
    }
}

/// Outcome of a detailed balance II check together with the consequence
/// diagnostics (invariance, contraction norm, modular commutator).
#[derive(Debug, Clone, Serialize)]
pub struct DbReport {
    pub tol: f64,
    pub tau_unital_residual: f64,
    pub invariance_residual: f64,
    pub identity_residual: f64,
    #[serde(skip)]
    pub beta_map: SuperOperator,
    pub beta_unital_residual: f64,
    pub beta_cp_min_eig: f64,
    /// Present only when the Choi test failed and sampling was used.
    pub beta_sampled_margin: Option<f64>,
    pub beta_positivity: PositivityEvidence,
    pub contraction_norm: f64,
    pub modular_commutator: f64,
    pub verdict: DbVerdict,
}

pub fn detailed_balance_check(op: &SuperOperator, state: &State) -> Result<DbReport> {
    detailed_balance_check_with(op, state, &DbOptions::default())
}

/// Builds `τ^β` and decides detailed balance II.
///
/// Holds when the defining identity, unitality of `τ^β`, invariance of `ω`
/// and some positivity evidence for `τ^β` all check out. When `τ` itself is
/// not unital the triple is not a dynamical system and the verdict is
/// indeterminate.
pub fn detailed_balance_check_with(op: &SuperOperator, state: &State, opts: &DbOptions) -> Result<DbReport> {
    let gns = build_gns(state)?;
    let beta = omega_adjoint(op, &gns)?;
    let identity_residual = defining_identity_residual(op, &beta, state)?;
    let invariance = invariance_residual(op, state)?;
    let (beta_cp, beta_min_eig) = cp_check(&beta);
    let (beta_positivity, beta_sampled_margin) = if beta_cp {
        (PositivityEvidence::CpCertified, None)
    } else {
        let margin = k_positivity_sample(&beta, 1, opts.positivity_samples, opts.seed)?;
        let level = if margin >= -CP_TOL { PositivityEvidence::Sampled } else { PositivityEvidence::Violated };
        (level, Some(margin))
    };
    let t = gns.transport(op.transfer());
    let contraction_norm = operator_norm(&t)?;
    let modular_commutator = gns.modular_commutator_norm(&t)?;
    let beta_unital = beta.unital().residual;

    let verdict = if !op.unital().unital {
        DbVerdict::Indeterminate
    } else if identity_residual <= opts.tol
        && beta_unital <= opts.tol
        && invariance <= opts.tol
        && beta_positivity != PositivityEvidence::Violated
    {
        DbVerdict::Holds
    } else {
        DbVerdict::Fails
    };
    Ok(DbReport {
        tol: opts.tol,
        tau_unital_residual: op.unital().residual,
        invariance_residual: invariance,
        identity_residual,
        beta_map: beta,
        beta_unital_residual: beta_unital,
        beta_cp_min_eig: beta_min_eig,
        beta_sampled_margin,
        beta_positivity,
        contraction_norm,
        modular_commutator,
        verdict,
    })
}

/// `T_ω`: the transfer matrix in ω-orthonormal coordinates, after checking
/// that `ω` is invariant and that the result is a contraction.
pub fn build_contraction(op: &SuperOperator, gns: &GnsSpace) -> Result<ComplexMatrix> {
    build_contraction_with_tol(op, gns, DEFAULT_TOL)
}

pub fn build_contraction_with_tol(op: &SuperOperator, gns: &GnsSpace, tol: f64) -> Result<ComplexMatrix> {
    if gns.algebra_dim() != op.d {
        return Err(Error::dims(format!("GNS space of M_{}", op.d), format!("M_{}", gns.algebra_dim())));
    }
    op.require_unital("build_contraction")?;
    let residual = invariance_residual(op, gns.state())?;
    if residual > tol {
        return Err(Error::NotInvariant { residual, tol });
    }
    let t = gns.transport(&op.transfer);
    let norm = operator_norm(&t)?;
    if norm > 1.0 + tol {
        return Err(Error::ContractionViolation { norm, tol });
    }
    Ok(t)
}

/// `a ∘ b`: apply `b`, then `a`.
pub fn compose(a: &SuperOperator, b: &SuperOperator) -> Result<SuperOperator> {
    if a.d != b.d {
        return Err(Error::dims(format!("M_{}", a.d), format!("M_{}", b.d)));
    }
    SuperOperator::from_transfer(a.d, &a.transfer * &b.transfer)
}

/// `τⁿ` by repeated squaring; `τ⁰` is the identity.
pub fn power(op: &SuperOperator, n: u64) -> Result<SuperOperator> {
    SuperOperator::from_transfer(op.d, op.transfer.pow(n))
}
