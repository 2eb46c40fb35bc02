// SPDX-License-Identifier: Apache-2.0

//! Asymptotic projections `P = lim T†ⁿTⁿ`, `Q = lim TⁿT†ⁿ`, the splitting of
//! a contraction into its unitary part and a completely non-unitary rest,
//! and spectral stability verdicts.

use serde::{Deserialize, Serialize};

use crate::algebra::VectorInGns;
use crate::error::{Error, Result};
use crate::numerics::{
    general_eig, invariant_residual, operator_norm, orthogonal_complement, orthonormal_span, principal_angle_sines,
    vec_norm, ComplexMatrix, C64,
};

pub const PERIPHERAL_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: u32 = 60;
pub const CONTRACTION_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-8;
const HORIZON_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    IteratedSquaring,
    Spectral,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticProjections {
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
    /// Number of squarings performed.
    pub iterations: u32,
    /// Last step deltas for `P` and `Q` in max-norm.
    pub residuals: (f64, f64),
    /// The deltas stalled at the rounding floor before reaching `tol`; the
    /// result is accepted against [`PROJECTION_FLOOR`] instead.
    pub floor_reached: bool,
    pub method: ProjectionMethod,
    /// `‖P_iter − P_spectral‖_max`.
    pub spectral_agreement: f64,
}

fn require_contraction(t: &ComplexMatrix) -> Result<f64> {
    if !t.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", t.rows(), t.cols())));
    }
    let norm = operator_norm(t)?;
    if norm > 1.0 + CONTRACTION_TOL {
        return Err(Error::NotContraction { reason: format!("operator norm {norm} exceeds 1") });
    }
    Ok(norm)
}

/// Orthonormal basis of the span of eigenvectors with `|λ| ≥ 1 − ptol`,
/// together with those eigenvalues.
///
/// Jordan structure on the unit circle is impossible for a contraction and
/// is reported as [`Error::NotContraction`].
pub fn peripheral_basis(t: &ComplexMatrix, ptol: f64) -> Result<(ComplexMatrix, Vec<C64>)> {
    let sys = general_eig(t, 1e-8)?;
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for block in sys.blocks.iter().filter(|b| b.value.norm() >= 1.0 - ptol) {
        if !block.semisimple {
            return Err(Error::NotContraction {
                reason: format!("Jordan block at unimodular eigenvalue {}", block.value),
            });
        }
        for k in block.start..block.start + block.len {
            cols.push(sys.vectors.column(k));
            values.push(sys.eigenvalues[k]);
        }
    }
    let raw = ComplexMatrix::from_columns(t.rows(), &cols);
    let basis = orthonormal_span(&raw, 1e-10);
    if basis.cols() != cols.len() {
        return Err(Error::NotContraction { reason: "peripheral eigenvectors are linearly dependent".into() });
    }
    Ok((basis, values))
}

/// Step delta below which a stalled squaring sequence is still accepted.
///
/// Rounding moves unimodular eigenvalues off the circle by a few ulps and
/// every squaring doubles that excess, so for slowly mixing maps the deltas
/// bottom out above a tight `tol` and then grow.
pub const PROJECTION_FLOOR: f64 = 1e-9;

struct Iterated {
    p: ComplexMatrix,
    q: ComplexMatrix,
    iterations: u32,
    deltas: (f64, f64),
    floor_reached: bool,
}

fn iterate_projections(t: &ComplexMatrix, tol: f64, max_iter: u32) -> Result<Iterated> {
    let mut m = t.clone();
    let mut p = &m.adjoint() * &m;
    let mut q = &m * &m.adjoint();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for k in 1..=max_iter {
        m = &m * &m;
        let p_next = &m.adjoint() * &m;
        let q_next = &m * &m.adjoint();
        let deltas = (p_next.max_diff(&p), q_next.max_diff(&q));
        if !(deltas.0.is_finite() && deltas.1.is_finite()) {
            break;
        }
        if deltas.0 <= tol && deltas.1 <= tol {
            return Ok(Iterated { p: p_next, q: q_next, iterations: k, deltas, floor_reached: false });
        }
        let worse = deltas.0.max(deltas.1) > last.0.max(last.1);
        if worse && last.0.max(last.1) <= PROJECTION_FLOOR {
            return Ok(Iterated { p, q, iterations: k - 1, deltas: last, floor_reached: true });
        }
        last = deltas;
        p = p_next;
        q = q_next;
    }
    Err(Error::NoConvergence {
        context: format!(
            "asymptotic projections after {max_iter} squarings, last deltas {:.3e} / {:.3e}",
            last.0, last.1
        ),
    })
}

/// `P` and `Q` by repeated squaring `T^{2^k}`, cross-checked against the
/// projection onto the peripheral eigenspace.
pub fn asymptotic_projections(t: &ComplexMatrix, tol: f64, max_iter: u32) -> Result<AsymptoticProjections> {
    require_contraction(t)?;
    let (iterated, spectral) =
        rayon::join(|| iterate_projections(t, tol, max_iter), || peripheral_basis(t, PERIPHERAL_TOL));
    let it = iterated?;
    let (v, _) = spectral?;
    let p_spec = &v * &v.adjoint();
    Ok(AsymptoticProjections {
        spectral_agreement: it.p.max_diff(&p_spec).max(it.q.max_diff(&p_spec)),
        p: it.p,
        q: it.q,
        iterations: it.iterations,
        residuals: it.deltas,
        floor_reached: it.floor_reached,
        method: ProjectionMethod::IteratedSquaring,
    })
}

/// The projection onto the peripheral eigenspace, used for both `P` and `Q`.
pub fn spectral_projections(t: &ComplexMatrix) -> Result<AsymptoticProjections> {
    require_contraction(t)?;
    let (v, _) = peripheral_basis(t, PERIPHERAL_TOL)?;
    let p = &v * &v.adjoint();
    Ok(AsymptoticProjections {
        q: p.clone(),
        p,
        iterations: 0,
        residuals: (0.0, 0.0),
        floor_reached: false,
        method: ProjectionMethod::Spectral,
        spectral_agreement: 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Splitting {
    pub h1_basis: ComplexMatrix,
    pub complement_basis: ComplexMatrix,
    pub peripheral_eigenvalues: Vec<C64>,
    pub t_on_h1: ComplexMatrix,
    pub t_on_complement: ComplexMatrix,
    /// `W†TV`: leakage from H₁ into its complement.
    pub coupling: ComplexMatrix,
    pub coupling_residual: f64,
    /// Leakage from the complement into H₁.
    pub complement_invariance_residual: f64,
    pub unitary_residual: f64,
    pub complement_spectral_radius: f64,
    pub reassembly_residual: f64,
    pub orthogonality_residual: f64,
}

impl Splitting {
    pub fn h1_dim(&self) -> usize {
        self.h1_basis.cols()
    }

    pub fn complement_dim(&self) -> usize {
        self.complement_basis.cols()
    }
}

/// Splits a contraction into `H₁` (peripheral eigenspace, where `T` is
/// unitary) and `H₁⊥`.
pub fn unitary_subspace(t: &ComplexMatrix, tol: f64) -> Result<Splitting> {
    require_contraction(t)?;
    let n = t.rows();
    let (v, peripheral_eigenvalues) = peripheral_basis(t, tol)?;
    let w = orthogonal_complement(&v);
    let (va, wa) = (v.adjoint(), w.adjoint());
    let t_on_h1 = &(&va * t) * &v;
    let t_on_complement = &(&wa * t) * &w;
    let coupling = &(&wa * t) * &v;
    let back = &(&va * t) * &w;
    let unitary_residual = (&t_on_h1.adjoint() * &t_on_h1).max_diff(&ComplexMatrix::identity(v.cols()));
    if unitary_residual > UNITARY_TOL {
        return Err(Error::NotContraction {
            reason: format!("restriction to the peripheral subspace is not unitary (residual {unitary_residual:.3e})"),
        });
    }
    let complement_spectral_radius =
        if w.cols() == 0 { 0.0 } else { general_eig(&t_on_complement, 1e-8)?.spectral_radius() };
    // reassemble T from the four blocks in the (V, W) frame
    let frame = ComplexMatrix::from_fn(n, n, |i, j| if j < v.cols() { v.get(i, j) } else { w.get(i, j - v.cols()) });
    let blocks = ComplexMatrix::from_fn(n, n, |i, j| {
        let k = v.cols();
        match (i < k, j < k) {
            (true, true) => t_on_h1.get(i, j),
            (true, false) => back.get(i, j - k),
            (false, true) => coupling.get(i - k, j),
            (false, false) => t_on_complement.get(i - k, j - k),
        }
    });
    let reassembled = &(&frame * &blocks) * &frame.adjoint();
    Ok(Splitting {
        coupling_residual: coupling.max_abs(),
        complement_invariance_residual: invariant_residual(t, &w),
        reassembly_residual: reassembled.max_diff(t),
        orthogonality_residual: (&va * &w).max_abs(),
        h1_basis: v,
        complement_basis: w,
        peripheral_eigenvalues,
        t_on_h1,
        t_on_complement,
        coupling,
        unitary_residual,
        complement_spectral_radius,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PqReport {
    pub tol: f64,
    pub p_minus_q: f64,
    pub idempotency_residual: f64,
    pub rank_p: usize,
    pub h1_dim: usize,
    /// Largest principal-angle sine between `range(P)` and `H₁`.
    pub range_angle: f64,
    pub pq_projection_onto_h1: bool,
    pub jointly_stable_on_complement: bool,
    /// True when the two sides of the equivalence agree.
    pub biconditional_holds: bool,
}

/// Checks "P = Q is a projection onto H₁" against strong stability of `T`
/// and `T†` on `H₁⊥`.
pub fn pq_criterion(proj: &AsymptoticProjections, split: &Splitting, tol: f64) -> Result<PqReport> {
    let n = split.h1_basis.rows();
    if proj.p.rows() != n || proj.q.rows() != n {
        return Err(Error::InconsistentInputs(format!(
            "projections act on dimension {} but the splitting on {n}",
            proj.p.rows()
        )));
    }
    let p = &proj.p;
    let p_minus_q = p.max_diff(&proj.q);
    let idempotency_residual = (p * p).max_diff(p);
    let range = orthonormal_span(p, 0.5);
    let rank_p = range.cols();
    let h1_dim = split.h1_dim();
    let range_angle = match principal_angle_sines(&range, &split.h1_basis) {
        Some(s) => s.into_iter().fold(0.0, f64::max),
        None => 1.0,
    };
    let pq_projection_onto_h1 =
        p_minus_q <= tol && idempotency_residual <= tol && rank_p == h1_dim && range_angle <= tol.max(1e-7);
    // T and T† restricted to H₁⊥ share the spectral radius up to conjugation
    let jointly_stable_on_complement = split.complement_spectral_radius < 1.0 - PERIPHERAL_TOL;
    Ok(PqReport {
        tol,
        p_minus_q,
        idempotency_residual,
        rank_p,
        h1_dim,
        range_angle,
        pq_projection_onto_h1,
        jointly_stable_on_complement,
        biconditional_holds: pq_projection_onto_h1 == jointly_stable_on_complement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorStability {
    pub stable: bool,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// `log(‖Tᴺf‖/‖f‖)/N`; absent when either norm vanishes.
    pub exponent: Option<f64>,
}

/// `‖Tᴺf‖ ≤ tol·‖f‖` per vector.
pub fn strong_stability_check(t: &ComplexMatrix, vectors: &[VectorInGns], n: u64, tol: f64) -> Vec<VectorStability> {
    let tn = t.pow(n);
    vectors
        .iter()
        .map(|f| {
            let initial_norm = f.norm();
            let final_norm = vec_norm(&tn.apply(&f.coords));
            let exponent =
                (initial_norm > 0.0 && final_norm > 0.0 && n > 0).then(|| (final_norm / initial_norm).ln() / n as f64);
            VectorStability { stable: final_norm <= tol * initial_norm, initial_norm, final_norm, exponent }
        })
        .collect()
}

/// `ceil(log(tol)/log(r))`, capped at 10⁶; 1 when `r = 0`.
pub fn stability_horizon(r: f64, tol: f64) -> u64 {
    if r <= 0.0 {
        return 1;
    }
    if r >= 1.0 {
        return HORIZON_CAP;
    }
    let n = (tol.ln() / r.ln()).ceil();
    if n.is_finite() {
        (n.max(1.0) as u64).min(HORIZON_CAP)
    } else {
        HORIZON_CAP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    StronglyStable,
    UnitaryPartPresent,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepCrossCheck {
    pub delta: f64,
    pub step_spectral_radius: f64,
    pub step_verdict: StabilityVerdict,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub mode: TimeMode,
    pub tol: f64,
    pub eigenvalues: Vec<C64>,
    pub peripheral: Vec<C64>,
    /// Spectral abscissa (continuous) or spectral radius (discrete).
    pub spectral_bound: f64,
    pub verdict: StabilityVerdict,
    pub residual_spectrum_note: String,
    /// Verdict of the residual-spectrum reading alone, which is satisfied
    /// vacuously in finite dimension.
    pub residual_spectrum_reading: StabilityVerdict,
    pub readings_disagree: bool,
    pub step_check: Option<StepCrossCheck>,
}

const RESIDUAL_NOTE: &str = "finite dimension: the residual spectrum is empty and the spectrum is finite, \
so the residual-spectrum condition and the countability condition both hold vacuously; \
the operative criterion is the absence of peripheral point spectrum";

const DISAGREE_NOTE: &str = " | the two readings disagree here: the residual-spectrum reading predicts strong \
stability, while peripheral eigenvalues show a non-decaying part; this tool reports both and does not decide \
which reading is intended";

fn classify(eigenvalues: &[C64], mode: TimeMode, tol: f64) -> (Vec<C64>, f64, StabilityVerdict) {
    let (peripheral, bound, unbounded): (Vec<C64>, f64, bool) = match mode {
        TimeMode::Continuous => {
            let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            (eigenvalues.iter().copied().filter(|z| z.re.abs() <= tol).collect(), abscissa, abscissa > tol)
        }
        TimeMode::Discrete => {
            let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
            (eigenvalues.iter().copied().filter(|z| z.norm() >= 1.0 - tol).collect(), radius, radius > 1.0 + tol)
        }
    };
    let verdict = if unbounded {
        StabilityVerdict::Indeterminate
    } else if peripheral.is_empty() {
        StabilityVerdict::StronglyStable
    } else {
        StabilityVerdict::UnitaryPartPresent
    };
    (peripheral, bound, verdict)
}

/// Spectral stability of a generator (continuous) or step matrix (discrete).
pub fn spectral_stability_test(m: &ComplexMatrix, mode: TimeMode, tol: f64) -> Result<SpectralReport> {
    let sys = general_eig(m, 1e-8)?;
    let eigenvalues = sys.eigenvalues.clone();
    let (peripheral, spectral_bound, verdict) = classify(&eigenvalues, mode, tol);
    let step_check = match mode {
        TimeMode::Discrete => None,
        TimeMode::Continuous => {
            let delta = 1.0 / sys.spectral_radius().max(1.0);
            let step = m.scale_real(delta).exp();
            let step_eigs = general_eig(&step, 1e-8)?.eigenvalues;
            let (_, step_spectral_radius, step_verdict) = classify(&step_eigs, TimeMode::Discrete, tol * delta);
            Some(StepCrossCheck { delta, step_spectral_radius, step_verdict, consistent: step_verdict == verdict })
        }
    };
    let readings_disagree = verdict == StabilityVerdict::UnitaryPartPresent;
    let mut residual_spectrum_note = RESIDUAL_NOTE.to_string();
    if readings_disagree {
        residual_spectrum_note.push_str(DISAGREE_NOTE);
    }
    Ok(SpectralReport {
        mode,
        tol,
        eigenvalues,
        peripheral,
        spectral_bound,
        verdict,
        residual_spectrum_note,
        residual_spectrum_reading: StabilityVerdict::StronglyStable,
        readings_disagree,
        step_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_gns;
    use crate::channels::build_contraction;
    use crate::models::{dephasing, depolarizing, mixture_of_unitaries};
    use crate::numerics::sampling::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn contraction_of(model: crate::models::Model) -> ComplexMatrix {
        let (op, state) = model;
        build_contraction(&op, &build_gns(&state).unwrap()).unwrap()
    }

    #[test]
    fn unitary_projections() {
        let u = haar_unitary(&mut ChaCha8Rng::seed_from_u64(2), 4);
        let proj = asymptotic_projections(&u, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert!(proj.p.max_diff(&ComplexMatrix::identity(4)) < 1e-12);
        assert!(proj.q.max_diff(&ComplexMatrix::identity(4)) < 1e-12);
        assert_eq!(proj.iterations, 1);
        assert!(proj.spectral_agreement < 1e-7);
    }

    #[test]
    fn diagonal_projections() {
        let t = ComplexMatrix::from_real_diagonal(&[1.0, 0.5]);
        let proj = asymptotic_projections(&t, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let expected = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        assert!(proj.p.max_diff(&expected) < 1e-12);
        assert!(proj.q.max_diff(&expected) < 1e-12);
    }

    #[test]
    fn depolarizing_projections_rank_one_onto_omega() {
        let state = crate::algebra::State::tracial(2);
        let gns = build_gns(&state).unwrap();
        let t = contraction_of(depolarizing(2, 0.5).unwrap());
        let proj = asymptotic_projections(&t, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let w = gns.omega();
        let omega_proj = ComplexMatrix::from_fn(4, 4, |i, j| w[i] * w[j].conj());
        assert!(proj.p.max_diff(&omega_proj) < 1e-12);
        assert!(proj.q.max_diff(&omega_proj) < 1e-12);
        assert!(proj.spectral_agreement < 1e-7);
    }

    #[test]
    fn expansion_is_refused() {
        let t = ComplexMatrix::from_real_diagonal(&[1.01, 0.2]);
        assert!(matches!(asymptotic_projections(&t, 1e-12, 60), Err(Error::NotContraction { .. })));
        assert!(matches!(unitary_subspace(&t, 1e-7), Err(Error::NotContraction { .. })));
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let t = ComplexMatrix::from_real_diagonal(&[1.0, 0.999]);
        assert!(matches!(iterate_projections(&t, 1e-12, 2), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn slow_mode_with_rounding_drift_stops_at_the_floor() {
        // peripheral eigenvalue lands a few ulps outside the circle next to a
        // mode at 0.997; squaring to 1e-12 would overflow instead
        let (op, state) = mixture_of_unitaries(2, 2, 4899485944150833232).unwrap();
        let t = build_contraction(&op, &build_gns(&state).unwrap()).unwrap();
        let proj = asymptotic_projections(&t, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert!(proj.p.max_abs().is_finite());
        assert!(proj.residuals.0 <= PROJECTION_FLOOR);
        assert!(proj.spectral_agreement <= 1e-7, "{}", proj.spectral_agreement);
    }

    #[test]
    fn overflowing_powers_are_not_convergence() {
        let t = ComplexMatrix::from_real_diagonal(&[1.5, 0.5]);
        assert!(iterate_projections(&t, 1e-12, DEFAULT_MAX_ITER).is_err());
    }

    #[test]
    fn splitting_unitary_is_whole_space() {
        let u = haar_unitary(&mut ChaCha8Rng::seed_from_u64(8), 3);
        let s = unitary_subspace(&u, PERIPHERAL_TOL).unwrap();
        assert_eq!(s.h1_dim(), 3);
        assert_eq!(s.complement_dim(), 0);
        assert!(s.unitary_residual < 1e-10);
    }

    #[test]
    fn splitting_depolarizing() {
        for p in [0.2, 0.5, 0.9] {
            let t = contraction_of(depolarizing(3, p).unwrap());
            let s = unitary_subspace(&t, PERIPHERAL_TOL).unwrap();
            assert_eq!(s.h1_dim(), 1);
            assert_eq!(s.complement_dim(), 8);
            assert!((s.complement_spectral_radius - (1.0 - p)).abs() < 1e-10);
            assert!(s.reassembly_residual < 1e-9);
            assert!(s.coupling_residual < 1e-8);
        }
    }

    #[test]
    fn splitting_dephasing() {
        let state = crate::algebra::State::tracial(2);
        let gns = build_gns(&state).unwrap();
        let t = contraction_of(dephasing(2, None).unwrap());
        let s = unitary_subspace(&t, PERIPHERAL_TOL).unwrap();
        assert_eq!(s.h1_dim(), 2);
        assert!(s.t_on_complement.max_abs() < 1e-12);
        // complement spans the off-diagonal units
        let off: Vec<Vec<C64>> =
            [(0, 1), (1, 0)].iter().map(|&(i, j)| gns.coords_of(&ComplexMatrix::unit(2, i, j)).unwrap()).collect();
        let off = orthonormal_span(&ComplexMatrix::from_columns(4, &off), 1e-12);
        let sines = principal_angle_sines(&off, &s.complement_basis).unwrap();
        assert!(sines.iter().all(|x| *x < 1e-10));
    }

    #[test]
    fn pq_on_normal_and_unitary() {
        let t = contraction_of(depolarizing(2, 0.5).unwrap());
        let proj = asymptotic_projections(&t, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let split = unitary_subspace(&t, PERIPHERAL_TOL).unwrap();
        let r = pq_criterion(&proj, &split, 1e-9).unwrap();
        assert!(r.pq_projection_onto_h1 && r.jointly_stable_on_complement && r.biconditional_holds);

        let u = haar_unitary(&mut ChaCha8Rng::seed_from_u64(4), 3);
        let proj = asymptotic_projections(&u, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let split = unitary_subspace(&u, PERIPHERAL_TOL).unwrap();
        let r = pq_criterion(&proj, &split, 1e-9).unwrap();
        assert!(r.pq_projection_onto_h1 && r.biconditional_holds);
    }

    #[test]
    fn pq_on_non_normal_block() {
        let t = ComplexMatrix::from_rows(&[
            vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, 0.3)],
        ])
        .unwrap();
        assert!(operator_norm(&t).unwrap() <= 1.0);
        let proj = asymptotic_projections(&t, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let split = unitary_subspace(&t, PERIPHERAL_TOL).unwrap();
        let r = pq_criterion(&proj, &split, 1e-9).unwrap();
        assert_eq!(r.h1_dim, 1);
        assert!(r.pq_projection_onto_h1);
        assert!(r.jointly_stable_on_complement);
        assert!(r.biconditional_holds);
        // the oracle: e₂e₂† directly
        let e2 = ComplexMatrix::from_real_diagonal(&[0.0, 0.0, 1.0]);
        assert!(proj.p.max_diff(&e2) < 1e-12);
    }

    #[test]
    fn pq_detects_mismatched_inputs() {
        let proj = asymptotic_projections(&ComplexMatrix::identity(2), 1e-12, 60).unwrap();
        let split = unitary_subspace(&ComplexMatrix::identity(3), PERIPHERAL_TOL).unwrap();
        assert!(matches!(pq_criterion(&proj, &split, 1e-9), Err(Error::InconsistentInputs(_))));
    }

    #[test]
    fn strong_stability_examples() {
        let vecs = vec![
            VectorInGns { coords: vec![c(1.0, 0.0), c(0.0, 2.0)], source: None },
            VectorInGns { coords: vec![c(0.0, 0.0), c(0.0, 0.0)], source: None },
        ];
        let r = strong_stability_check(&ComplexMatrix::zeros(2, 2), &vecs, 1, 1e-9);
        assert!(r.iter().all(|v| v.stable));

        let u = haar_unitary(&mut ChaCha8Rng::seed_from_u64(6), 2);
        let r = strong_stability_check(&u, &vecs[..1], 100, 1e-9);
        assert!(!r[0].stable);
        assert!(r[0].exponent.unwrap().abs() < 1e-12);

        let p = 0.4;
        let t = contraction_of(depolarizing(2, p).unwrap());
        let split = unitary_subspace(&t, PERIPHERAL_TOL).unwrap();
        let comp: Vec<VectorInGns> =
            split.complement_basis.columns().into_iter().map(|coords| VectorInGns { coords, source: None }).collect();
        let n = stability_horizon(1.0 - p, 1e-9);
        let r = strong_stability_check(&t, &comp, n, 1e-9);
        for v in r {
            assert!(v.stable);
            let e = v.exponent.unwrap();
            assert!((e - (1.0 - p).ln()).abs() < 1e-7, "exponent {e} vs {}", (1.0 - p).ln());
        }
    }

    #[test]
    fn horizon_formula() {
        assert_eq!(stability_horizon(0.0, 1e-9), 1);
        assert_eq!(stability_horizon(0.5, 1e-9), 30);
        assert_eq!(stability_horizon(1.0, 1e-9), 1_000_000);
        assert_eq!(stability_horizon(1.0 - 1e-12, 1e-9), 1_000_000);
    }

    #[test]
    fn spectral_continuous_examples() {
        let r =
            spectral_stability_test(&ComplexMatrix::identity(2).scale_real(-1.0), TimeMode::Continuous, 1e-7).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::StronglyStable);
        assert!(r.peripheral.is_empty());
        assert!(!r.readings_disagree);
        assert!(r.step_check.as_ref().unwrap().consistent);

        let l = ComplexMatrix::from_diagonal(&[c(0.0, 1.0)]);
        let r = spectral_stability_test(&l, TimeMode::Continuous, 1e-7).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::UnitaryPartPresent);
        assert_eq!(r.peripheral.len(), 1);
        assert!(r.readings_disagree);
        assert!(r.residual_spectrum_note.contains("residual spectrum is empty"));
        assert!(r.step_check.unwrap().consistent);

        let r = spectral_stability_test(&ComplexMatrix::identity(1), TimeMode::Continuous, 1e-7).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::Indeterminate);
    }

    #[test]
    fn spectral_discrete_examples() {
        let (op, _) = depolarizing(2, 0.5).unwrap();
        let r = spectral_stability_test(op.transfer(), TimeMode::Discrete, 1e-7).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::UnitaryPartPresent);
        assert_eq!(r.peripheral.len(), 1);
        assert!((r.peripheral[0] - c(1.0, 0.0)).norm() < 1e-12);
        let r = spectral_stability_test(&ComplexMatrix::from_real_diagonal(&[0.9, -0.3]), TimeMode::Discrete, 1e-7)
            .unwrap();
        assert_eq!(r.verdict, StabilityVerdict::StronglyStable);
        assert!(r.spectral_bound < 1.0 - 1e-7);
    }

    #[test]
    fn discrete_verdict_matches_power_decay() {
        let t = ComplexMatrix::from_rows(&[vec![c(0.6, 0.1), c(0.3, 0.0)], vec![c(0.0, 0.0), c(-0.4, 0.2)]]).unwrap();
        let r = spectral_stability_test(&t, TimeMode::Discrete, 1e-7).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::StronglyStable);
        let tol = 1e-9;
        // the non-normal part adds a polynomial prefactor; pad the horizon
        let n = 2 * stability_horizon(r.spectral_bound, tol);
        let basis: Vec<VectorInGns> = ComplexMatrix::identity(2)
            .columns()
            .into_iter()
            .map(|coords| VectorInGns { coords, source: None })
            .collect();
        assert!(strong_stability_check(&t, &basis, n, tol).iter().all(|v| v.stable));
    }

    #[test]
    fn iterated_and_spectral_agree_on_random_channels() {
        for seed in 0..10 {
            let t = contraction_of(mixture_of_unitaries(2, 2, seed).unwrap());
            let proj = asymptotic_projections(&t, 1e-12, DEFAULT_MAX_ITER).unwrap();
            assert!(proj.spectral_agreement < 1e-7, "seed {seed}: {}", proj.spectral_agreement);
            let spec = spectral_projections(&t).unwrap();
            assert!(spec.p.max_diff(&proj.p) < 1e-7);
        }
    }
}
