// SPDX-License-Identifier: Apache-2.0

//! Splitting `M_d = A₁ ⊕ A₂` into a reversible part (the peripheral
//! eigenspace pulled back to matrices) and a decaying part, and the check
//! that every decaying element has vanishing expectation.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{expectation, GnsSpace, State};
use crate::channels::{
    build_contraction, cp_check, detailed_balance_check, invariance_residual, schwarz_check, DbVerdict, SuperOperator,
};
use crate::error::{Error, Result};
use crate::numerics::{
    general_eig, orthogonal_complement, orthonormal_span, singular_values, vec_norm, ComplexMatrix, C64, DEFAULT_TOL,
};
use crate::stability::{peripheral_basis, stability_horizon, unitary_subspace, PERIPHERAL_TOL};

const SCHWARZ_SAMPLES: usize = 100;
const HORIZON_CAP: u64 = 1_000_000;

/// How `A₂` was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// ω-orthogonal complement of `A₁`.
    OmegaOrthogonal,
    /// Span of the non-peripheral generalized eigenvectors of the transfer
    /// matrix. Agrees with the ω-orthogonal choice when ω is invariant and
    /// the GNS realisation is a contraction; otherwise it need not.
    SpectralComplement,
}

/// Results of the hypothesis checks the obstruction argument relies on.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisSnapshot {
    pub tol: f64,
    pub unital: bool,
    pub unital_residual: f64,
    pub cp: bool,
    pub invariance_residual: f64,
    pub db_verdict: DbVerdict,
    pub schwarz_margin: f64,
}

impl HypothesisSnapshot {
    pub fn invariant(&self) -> bool {
        self.invariance_residual <= self.tol
    }

    pub fn schwarz(&self) -> bool {
        self.schwarz_margin >= -self.tol
    }

    /// Human-readable list of the checks that did not pass.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.unital {
            out.push(format!("unitality (residual {:.3e})", self.unital_residual));
        }
        if !self.invariant() {
            out.push(format!("invariance (residual {:.3e} > {:.1e})", self.invariance_residual, self.tol));
        }
        if self.db_verdict != DbVerdict::Holds {
            out.push(format!("detailed balance ({:?})", self.db_verdict));
        }
        if !self.schwarz() {
            out.push(format!("Schwarz inequality (margin {:.3e})", self.schwarz_margin));
        }
        out
    }
}

pub fn hypothesis_snapshot(op: &SuperOperator, state: &State, seed: u64) -> Result<HypothesisSnapshot> {
    let invariance = invariance_residual(op, state)?;
    let db = detailed_balance_check(op, state)?;
    Ok(HypothesisSnapshot {
        tol: DEFAULT_TOL,
        unital: op.unital().unital,
        unital_residual: op.unital().residual,
        cp: cp_check(op).0,
        invariance_residual: invariance,
        db_verdict: db.verdict,
        schwarz_margin: schwarz_check(op, state, SCHWARZ_SAMPLES, seed)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureCheck {
    pub is_algebra: bool,
    /// Worst relative distance of `B_iB_j` from `span(A₁)`.
    pub product_residual: f64,
    pub adjoint_residual: f64,
    /// Distance of `𝟙` from `span(A₁)`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reversibility {
    pub reversible: bool,
    /// `max |σ − 1|` over singular values of the restriction.
    pub isometry_residual: f64,
    pub min_singular_value: f64,
    /// `max ‖τ(B_iB_j) − τ(B_i)τ(B_j)‖_max`; reported, not required.
    pub multiplicativity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCheck {
    pub verified: bool,
    pub horizon: u64,
    /// Times the horizon was doubled past its default to absorb transient
    /// growth from non-normal blocks.
    pub escalations: u32,
    /// `‖TᴺBΩ‖/‖BΩ‖` per basis element.
    pub ratios: Vec<f64>,
    pub slowest_exponent: Option<f64>,
    pub non_decaying: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub kind: CandidateKind,
    pub tol: f64,
    pub a1_basis: Vec<ComplexMatrix>,
    pub a2_basis: Vec<ComplexMatrix>,
    pub closure: ClosureCheck,
    pub reversibility: Reversibility,
    pub decay: Option<DecayCheck>,
    /// `max |⟨B_iΩ, C_jΩ⟩|` over `A₁ × A₂`.
    pub orthogonality_residual: f64,
    /// Component of `τ(A₁)` outside `A₁`.
    pub a1_leak: f64,
    /// Component of `τ(A₂)` inside `A₁`, measured against the orthogonal
    /// projection for the ω-orthogonal kind.
    pub a2_leak: f64,
    pub complement_spectral_radius: f64,
    pub hypotheses: HypothesisSnapshot,
    #[serde(skip)]
    a1_coords: ComplexMatrix,
    #[serde(skip)]
    a2_coords: ComplexMatrix,
    #[serde(skip)]
    dynamics: ComplexMatrix,
}

impl Decomposition {
    pub fn a1_dim(&self) -> usize {
        self.a1_basis.len()
    }

    pub fn a2_dim(&self) -> usize {
        self.a2_basis.len()
    }

    /// Relative distance of `BΩ` from `span(A₂)Ω`.
    pub fn a2_membership_residual(&self, gns: &GnsSpace, b: &ComplexMatrix) -> Result<f64> {
        distance_to_span(&self.a2_coords, &gns.coords_of(b)?)
    }

    /// Relative distance of `BΩ` from `span(A₁)Ω`.
    pub fn a1_membership_residual(&self, gns: &GnsSpace, b: &ComplexMatrix) -> Result<f64> {
        distance_to_span(&self.a1_coords, &gns.coords_of(b)?)
    }

    /// Orthonormal ω-coordinates spanning `A₁Ω`.
    pub fn a1_coords(&self) -> &ComplexMatrix {
        &self.a1_coords
    }

    pub fn a2_coords(&self) -> &ComplexMatrix {
        &self.a2_coords
    }
}

/// `‖(I − VV†)x‖/‖x‖` for orthonormal `V`; 0 for `x = 0`.
fn distance_to_span(v: &ComplexMatrix, x: &[C64]) -> Result<f64> {
    let norm = vec_norm(x);
    if norm == 0.0 {
        return Ok(0.0);
    }
    if v.cols() == 0 {
        return Ok(1.0);
    }
    let proj = v.apply(&v.adjoint().apply(x));
    let diff: Vec<C64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
    Ok(vec_norm(&diff) / norm)
}

fn pull_back_columns(gns: &GnsSpace, coords: &ComplexMatrix) -> Vec<ComplexMatrix> {
    coords.columns().iter().map(|c| gns.matrix_of(c)).collect()
}

fn closure_check(gns: &GnsSpace, basis: &[ComplexMatrix], v: &ComplexMatrix, tol: f64) -> Result<ClosureCheck> {
    let identity_residual = distance_to_span(v, gns.omega())?;
    let product_residual = (0..basis.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for b in basis {
                worst = worst.max(distance_to_span(v, &gns.coords_of(&(&basis[i] * b))?)?);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let adjoint_residual = basis
        .iter()
        .map(|b| distance_to_span(v, &gns.coords_of(&b.adjoint())?))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(ClosureCheck {
        is_algebra: product_residual <= tol && adjoint_residual <= tol && identity_residual <= tol,
        product_residual,
        adjoint_residual,
        identity_residual,
    })
}

fn reversibility_check(
    op: &SuperOperator,
    t: &ComplexMatrix,
    v: &ComplexMatrix,
    basis: &[ComplexMatrix],
    tol: f64,
) -> Result<Reversibility> {
    let restricted = &(&v.adjoint() * t) * v;
    let sv = singular_values(&restricted);
    let isometry_residual = sv.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let min_singular_value = sv.last().copied().unwrap_or(1.0);
    let images: Vec<ComplexMatrix> = basis.iter().map(|b| op.apply(b)).collect::<Result<_>>()?;
    let mut multiplicativity_residual: f64 = 0.0;
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let lhs = op.apply(&(bi * bj))?;
            multiplicativity_residual = multiplicativity_residual.max(lhs.max_diff(&(&images[i] * &images[j])));
        }
    }
    Ok(Reversibility {
        reversible: isometry_residual <= tol.max(1e-8),
        isometry_residual,
        min_singular_value,
        multiplicativity_residual,
    })
}

/// `A₁`: matrices whose GNS vectors span the peripheral eigenspace of `T_ω`.
/// The returned decomposition has an empty `A₂` until
/// [`decaying_part`] completes it.
pub fn reversible_part(op: &SuperOperator, gns: &GnsSpace, tol: f64) -> Result<Decomposition> {
    let t = build_contraction(op, gns)?;
    let split = unitary_subspace(&t, PERIPHERAL_TOL)?;
    let a1_basis = pull_back_columns(gns, &split.h1_basis);
    let closure = closure_check(gns, &a1_basis, &split.h1_basis, tol)?;
    let reversibility = reversibility_check(op, &t, &split.h1_basis, &a1_basis, tol)?;
    let hypotheses = hypothesis_snapshot(op, gns.state(), 0)?;
    Ok(Decomposition {
        kind: CandidateKind::OmegaOrthogonal,
        tol,
        a1_basis,
        a2_basis: Vec::new(),
        closure,
        reversibility,
        decay: None,
        orthogonality_residual: 0.0,
        a1_leak: split.coupling_residual,
        a2_leak: split.complement_invariance_residual,
        complement_spectral_radius: split.complement_spectral_radius,
        hypotheses,
        a1_coords: split.h1_basis,
        a2_coords: split.complement_basis,
        dynamics: t,
    })
}

fn verify_decay(t: &ComplexMatrix, w: &ComplexMatrix, r: f64, horizon: Option<u64>, tol: f64) -> DecayCheck {
    let mut n = horizon.unwrap_or_else(|| stability_horizon(r, tol));
    let mut escalations = 0;
    loop {
        let tn = t.pow(n);
        let ratios: Vec<f64> = w
            .columns()
            .iter()
            .map(|c| {
                let norm = vec_norm(c);
                if norm == 0.0 {
                    0.0
                } else {
                    vec_norm(&tn.apply(c)) / norm
                }
            })
            .collect();
        let non_decaying: Vec<usize> = (0..ratios.len()).filter(|&k| ratios[k] > tol).collect();
        let can_escalate = horizon.is_none() && n < HORIZON_CAP;
        if non_decaying.is_empty() || !can_escalate {
            let slowest_exponent = ratios.iter().filter(|x| **x > 0.0).map(|x| x.ln() / n as f64).reduce(f64::max);
            return DecayCheck {
                verified: non_decaying.is_empty(),
                horizon: n,
                escalations,
                ratios,
                slowest_exponent,
                non_decaying,
            };
        }
        n = (2 * n).min(HORIZON_CAP);
        escalations += 1;
    }
}

/// Completes a decomposition from [`reversible_part`] with `A₂ = A₁^⊥`
/// (ω-orthogonal complement) and verifies `‖TᴺBΩ‖ ≤ tol·‖BΩ‖`.
///
/// Without an explicit horizon, `N = ceil(log(tol)/log(r))` for the
/// complement spectral radius `r`, doubled while transients keep some
/// element above tolerance (capped at 10⁶).
pub fn decaying_part(
    op: &SuperOperator,
    gns: &GnsSpace,
    partial: Decomposition,
    horizon: Option<u64>,
    tol: f64,
) -> Result<Decomposition> {
    if partial.dynamics.rows() != gns.dim() || op.dim() != gns.algebra_dim() {
        return Err(Error::InconsistentInputs("decomposition was built for a different system".into()));
    }
    let mut dec = partial;
    dec.a2_basis = pull_back_columns(gns, &dec.a2_coords);
    dec.orthogonality_residual = (&dec.a1_coords.adjoint() * &dec.a2_coords).max_abs();
    let decay = verify_decay(&dec.dynamics, &dec.a2_coords, dec.complement_spectral_radius, horizon, tol);
    if !decay.verified {
        return Err(Error::DecayFailure { indices: decay.non_decaying.clone(), horizon: decay.horizon });
    }
    dec.decay = Some(decay);
    Ok(dec)
}

/// [`reversible_part`] followed by [`decaying_part`].
pub fn decompose(op: &SuperOperator, gns: &GnsSpace, horizon: Option<u64>, tol: f64) -> Result<Decomposition> {
    let partial = reversible_part(op, gns, tol)?;
    decaying_part(op, gns, partial, horizon, tol)
}

/// A candidate decomposition that needs neither invariance nor contraction:
/// `A₁` is the peripheral eigenspace of the transfer matrix and `A₂` the sum
/// of its other generalized eigenspaces, both expressed in the GNS
/// coordinates of `state`.
pub fn spectral_candidate(op: &SuperOperator, gns: &GnsSpace, horizon: Option<u64>, tol: f64) -> Result<Decomposition> {
    if op.dim() != gns.algebra_dim() {
        return Err(Error::dims(format!("M_{}", gns.algebra_dim()), format!("M_{}", op.dim())));
    }
    let t = gns.transport(op.transfer());
    let sys = general_eig(&t, 1e-8)?;
    let (a1_coords, _) = peripheral_basis(&t, PERIPHERAL_TOL)?;
    let mut rest = Vec::new();
    let mut r: f64 = 0.0;
    for block in sys.blocks.iter().filter(|b| b.value.norm() < 1.0 - PERIPHERAL_TOL) {
        r = r.max(block.value.norm());
        for k in block.start..block.start + block.len {
            rest.push(sys.vectors.column(k));
        }
    }
    let a2_coords = orthonormal_span(&ComplexMatrix::from_columns(t.rows(), &rest), 1e-10);
    if a1_coords.cols() + a2_coords.cols() != t.rows() {
        return Err(Error::NoConvergence { context: "generalized eigenspaces do not span the whole space".into() });
    }
    let a1_basis = pull_back_columns(gns, &a1_coords);
    let a2_basis = pull_back_columns(gns, &a2_coords);
    let closure = closure_check(gns, &a1_basis, &a1_coords, tol)?;
    let reversibility = reversibility_check(op, &t, &a1_coords, &a1_basis, tol)?;
    let hypotheses = hypothesis_snapshot(op, gns.state(), 0)?;
    let a1_out = orthogonal_complement(&a1_coords);
    let a1_leak = (&(&a1_out.adjoint() * &t) * &a1_coords).max_abs();
    let a2_leak = if a2_coords.cols() == 0 {
        0.0
    } else {
        let a2_out = orthogonal_complement(&a2_coords);
        (&(&a2_out.adjoint() * &t) * &a2_coords).max_abs()
    };
    let decay = verify_decay(&t, &a2_coords, r, horizon, tol);
    if !decay.verified {
        return Err(Error::DecayFailure { indices: decay.non_decaying.clone(), horizon: decay.horizon });
    }
    Ok(Decomposition {
        kind: CandidateKind::SpectralComplement,
        tol,
        a1_basis,
        a2_basis,
        closure,
        reversibility,
        decay: Some(decay),
        orthogonality_residual: (&a1_coords.adjoint() * &a2_coords).max_abs(),
        a1_leak,
        a2_leak,
        complement_spectral_radius: r,
        hypotheses,
        a1_coords,
        a2_coords,
        dynamics: t,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionFinding {
    pub index: usize,
    pub abs_expectation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub tol: f64,
    pub kind: CandidateKind,
    pub findings: Vec<ObstructionFinding>,
    pub max_abs_expectation: f64,
    /// `sup |ω(B)|` over `B ∈ A₂` with `‖BΩ‖ = 1`, independent of the basis.
    pub sup_abs_expectation: f64,
    pub fired: bool,
    /// Hypothesis checks that failed for this system.
    pub failed_hypotheses: Vec<String>,
    /// Fired although every hypothesis check passed.
    pub unexplained: bool,
}

/// Decay together with recurrence forces `A₂ ⊆ ker ω`; lists the basis
/// elements of `A₂` that violate this and the hypotheses that failed.
pub fn obstruction_check(dec: &Decomposition, state: &State, tol: f64) -> Result<ObstructionReport> {
    let findings = dec
        .a2_basis
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let abs_expectation = expectation(state, b)?.norm();
            Ok(ObstructionFinding { index, abs_expectation, flagged: abs_expectation > tol })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_expectation = findings.iter().map(|f| f.abs_expectation).fold(0.0, f64::max);
    // ω(B_k) = ⟨Ω, B_kΩ⟩ and the B_kΩ are orthonormal, so the supremum is
    // the norm of Ω projected onto A₂Ω
    let sup_abs_expectation = findings.iter().map(|f| f.abs_expectation.powi(2)).sum::<f64>().sqrt();
    let fired = findings.iter().any(|f| f.flagged) || sup_abs_expectation > tol;
    let failed_hypotheses = dec.hypotheses.failures();
    Ok(ObstructionReport {
        tol,
        kind: dec.kind,
        unexplained: fired && failed_hypotheses.is_empty(),
        findings,
        max_abs_expectation,
        sup_abs_expectation,
        fired,
        failed_hypotheses,
    })
}
