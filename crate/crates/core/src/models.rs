// SPDX-License-Identifier: Apache-2.0

//! Built-in channel families with known closed forms, each paired with its
//! canonical invariant faithful state.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::algebra::{expectation, gibbs_state, State};
use crate::channels::SuperOperator;
use crate::error::{Error, Result};
use crate::numerics::sampling::haar_unitary;
use crate::numerics::{ComplexMatrix, C64};

pub type Model = (SuperOperator, State);

/// `τ(A) = (1−p)A + p·Tr(A)/d·𝟙` with the tracial state.
pub fn depolarizing(d: usize, p: f64) -> Result<Model> {
    if d < 2 {
        return Err(Error::BadParam(format!("depolarizing needs d >= 2, got {d}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadParam(format!("depolarizing p must lie in [0, 1], got {p}")));
    }
    let n = d * d;
    let id_vec = ComplexMatrix::identity(d).vec_row_major();
    let transfer = ComplexMatrix::from_fn(n, n, |r, c| {
        let keep = if r == c { 1.0 - p } else { 0.0 };
        C64::new(keep, 0.0) + id_vec[r] * id_vec[c] * (p / d as f64)
    });
    Ok((SuperOperator::from_transfer(d, transfer)?, State::tracial(d)))
}

/// Pinching onto the diagonal of `basis` (the standard basis when `None`),
/// with the tracial state.
pub fn dephasing(d: usize, basis: Option<&ComplexMatrix>) -> Result<Model> {
    if d < 1 {
        return Err(Error::BadParam("dephasing needs d >= 1".into()));
    }
    let u = match basis {
        Some(u) => {
            check_unitary(u, d)?;
            u.clone()
        }
        None => ComplexMatrix::identity(d),
    };
    let projectors: Vec<ComplexMatrix> = (0..d)
        .map(|k| {
            let col = u.column(k);
            ComplexMatrix::from_fn(d, d, |i, j| col[i] * col[j].conj())
        })
        .collect();
    Ok((SuperOperator::from_kraus(&projectors)?, State::tracial(d)))
}

fn check_unitary(u: &ComplexMatrix, d: usize) -> Result<()> {
    if u.rows() != d || u.cols() != d {
        return Err(Error::dims(format!("{d}x{d} unitary"), format!("{}x{}", u.rows(), u.cols())));
    }
    let residual = (&u.adjoint() * u).max_diff(&ComplexMatrix::identity(d));
    if residual > 1e-10 {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// `τ(A) = U†AU` with the tracial state.
pub fn unitary_model(u: &ComplexMatrix) -> Result<Model> {
    let d = u.rows();
    let weights = vec![1.0 / d as f64; d];
    unitary_model_with_weights(u, &weights)
}

/// `τ(A) = U†AU` paired with `ρ = Σ_k w_k |u_k⟩⟨u_k|` over an eigenbasis of
/// `U`, which commutes with `U` by construction.
pub fn unitary_model_with_weights(u: &ComplexMatrix, weights: &[f64]) -> Result<Model> {
    let d = u.rows();
    check_unitary(u, d)?;
    if weights.len() != d {
        return Err(Error::BadParam(format!("expected {d} weights, got {}", weights.len())));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| w.is_nan() || *w <= 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::BadParam("weights must be positive and sum to 1".into()));
    }
    let eig = crate::numerics::general_eig(u, 1e-9)?;
    // eigenvectors of a normal matrix; orthonormalise within each block
    let v = &eig.vectors;
    let probs: Vec<C64> = weights.iter().map(|&w| C64::new(w, 0.0)).collect();
    let rho = (&(v * &ComplexMatrix::from_diagonal(&probs)) * &v.adjoint()).hermitian_part();
    let state = State::from_density(rho)?;
    Ok((SuperOperator::from_kraus(std::slice::from_ref(u))?, state))
}

/// `U = diag(1, e^{iθ}, e^{2iθ}, …)` with the tracial state.
pub fn rotation(d: usize, theta: f64) -> Result<Model> {
    if d < 2 {
        return Err(Error::BadParam(format!("rotation needs d >= 2, got {d}")));
    }
    let phases: Vec<C64> = (0..d).map(|k| C64::from_polar(1.0, k as f64 * theta)).collect();
    unitary_model(&ComplexMatrix::from_diagonal(&phases))
}

/// `τ(A) = Σ_i p_i U_i† A U_i` with Haar unitaries (QR of Gaussian matrices)
/// and weights uniform on the simplex (normalised exponentials). DB II holds
/// for the tracial state: the ω-adjoint is `Σ_i p_i U_i A U_i†`.
pub fn mixture_of_unitaries(d: usize, count: usize, seed: u64) -> Result<Model> {
    if count == 0 {
        return Err(Error::BadParam("mixture_of_unitaries needs count >= 1".into()));
    }
    if d < 1 {
        return Err(Error::BadParam("mixture_of_unitaries needs d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitaries: Vec<ComplexMatrix> = (0..count).map(|_| haar_unitary(&mut rng, d)).collect();
    let raw: Vec<f64> = (0..count).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    let kraus: Vec<ComplexMatrix> = unitaries.iter().zip(&raw).map(|(u, w)| u.scale_real((w / total).sqrt())).collect();
    Ok((SuperOperator::from_kraus(&kraus)?, State::tracial(d)))
}

fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<State> {
    let state = gibbs_state(h, beta)?;
    if !state.is_faithful() {
        return Err(Error::BadParam(format!(
            "beta = {beta} puts the Gibbs state below the faithfulness threshold (min eigenvalue {:.3e})",
            state.min_eigenvalue()
        )));
    }
    Ok(state)
}

/// Heisenberg dual of the generalized amplitude-damping channel whose fixed
/// point is `Gibbs(σ_z, β)`.
///
/// The Kraus operators are the jump operators `σ±` weighted by the thermal
/// populations plus the diagonal no-jump parts, so the channel is covariant
/// under the modular group of the fixed state.
pub fn thermal_qubit(beta: f64, gamma: f64) -> Result<Model> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadParam(format!("thermal_qubit gamma must lie in (0, 1), got {gamma}")));
    }
    let state = thermal_state(&sigma_z(), beta)?;
    let q0 = state.rho().get(0, 0).re;
    let q1 = state.rho().get(1, 1).re;
    let keep = (1.0 - gamma).sqrt();
    let jump = gamma.sqrt();
    let kraus = [
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, keep])?.scale_real(q0.sqrt()),
        ComplexMatrix::from_real(2, 2, &[0.0, jump, 0.0, 0.0])?.scale_real(q0.sqrt()),
        ComplexMatrix::from_real(2, 2, &[keep, 0.0, 0.0, 1.0])?.scale_real(q1.sqrt()),
        ComplexMatrix::from_real(2, 2, &[0.0, 0.0, jump, 0.0])?.scale_real(q1.sqrt()),
    ];
    Ok((SuperOperator::from_kraus(&kraus)?, state))
}

/// Spin-like Hamiltonian `diag(d−1, d−3, …, −(d−1))`; `σ_z` for `d = 2`.
pub fn spin_hamiltonian(d: usize) -> ComplexMatrix {
    let diag: Vec<f64> = (0..d).map(|k| (d as f64 - 1.0) - 2.0 * k as f64).collect();
    ComplexMatrix::from_real_diagonal(&diag)
}

/// Negative control: `τ(X) = (1−p)Xᵀ + p·ω(X)𝟙` with `ω = Gibbs(H_spin, β)`.
///
/// Positive and unital for every `p ∈ [0, 1]`, never completely positive for
/// `p < 1`, and `ω` is invariant. For `β ≠ 0` the transpose stretches the
/// GNS norm, so small `p` gives a map whose GNS realisation is not a
/// contraction.
pub fn transpose_mix(d: usize, p: f64, beta: f64) -> Result<Model> {
    if d < 2 {
        return Err(Error::BadParam(format!("transpose_mix needs d >= 2, got {d}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadParam(format!("transpose_mix p must lie in [0, 1], got {p}")));
    }
    let state = thermal_state(&spin_hamiltonian(d), beta)?;
    let s = state.clone();
    let op = SuperOperator::from_fn(d, move |x| {
        let w = expectation(&s, x).expect("square unit");
        &x.transpose().scale_real(1.0 - p) + &ComplexMatrix::identity(d).scale(w * p)
    })?;
    Ok((op, state))
}

/// A model reference as it appears in a system specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
}

/// Catalogue entry: a model name with its parameters and defaults.
#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub params: Vec<(&'static str, Option<f64>)>,
    pub summary: &'static str,
}

pub fn list_models() -> Vec<ModelInfo> {
    vec![
        ModelInfo { name: "depolarizing", params: vec![("p", None)], summary: "(1-p)A + p Tr(A)/d 1, tracial state" },
        ModelInfo { name: "dephasing", params: vec![], summary: "pinching onto the standard diagonal, tracial state" },
        ModelInfo {
            name: "rotation",
            params: vec![("theta", None)],
            summary: "conjugation by diag(1, e^{i theta}, ...), tracial state",
        },
        ModelInfo {
            name: "mixture_of_unitaries",
            params: vec![("count", Some(4.0)), ("seed", Some(0.0))],
            summary: "random convex mixture of Haar unitaries, tracial state",
        },
        ModelInfo {
            name: "thermal_qubit",
            params: vec![("beta", None), ("gamma", None)],
            summary: "generalized amplitude damping fixing Gibbs(sigma_z, beta); d = 2",
        },
        ModelInfo {
            name: "transpose_mix",
            params: vec![("p", Some(0.0)), ("beta", Some(0.0))],
            summary: "(1-p) transpose + p omega(.)1 with Gibbs state; positive, not CP",
        },
    ]
}

fn take_params(spec: &ModelSpec) -> Result<BTreeMap<&'static str, f64>> {
    let info = list_models()
        .into_iter()
        .find(|m| m.name == spec.name)
        .ok_or_else(|| Error::BadParam(format!("unknown model '{}'", spec.name)))?;
    for key in spec.params.keys() {
        if !info.params.iter().any(|(k, _)| k == key) {
            return Err(Error::BadParam(format!("model '{}' has no parameter '{key}'", spec.name)));
        }
    }
    let mut out = BTreeMap::new();
    for (key, default) in info.params {
        match spec.params.get(key).copied().or(default) {
            Some(v) if v.is_finite() => {
                out.insert(key, v);
            }
            Some(v) => return Err(Error::BadParam(format!("parameter '{key}' must be finite, got {v}"))),
            None => return Err(Error::BadParam(format!("model '{}' requires parameter '{key}'", spec.name))),
        }
    }
    Ok(out)
}

fn as_count(name: &str, v: f64) -> Result<u64> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::BadParam(format!("parameter '{name}' must be a nonnegative integer, got {v}")));
    }
    Ok(v as u64)
}

/// Instantiates a catalogue model.
pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    let p = take_params(spec)?;
    let d = spec.dim;
    match spec.name.as_str() {
        "depolarizing" => depolarizing(d, p["p"]),
        "dephasing" => dephasing(d, None),
        "rotation" => rotation(d, p["theta"]),
        "mixture_of_unitaries" => {
            mixture_of_unitaries(d, as_count("count", p["count"])? as usize, as_count("seed", p["seed"])?)
        }
        "thermal_qubit" => {
            if d != 2 {
                return Err(Error::BadParam(format!("thermal_qubit is a qubit model, dimension {d} requested")));
            }
            thermal_qubit(p["beta"], p["gamma"])
        }
        "transpose_mix" => transpose_mix(d, p["p"], p["beta"]),
        other => Err(Error::BadParam(format!("unknown model '{other}'"))),
    }
}
