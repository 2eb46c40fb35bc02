// SPDX-License-Identifier: Apache-2.0

//! Correlation sequences `c_n = Re φ(A†τⁿ(A))`, their recurrence sets and
//! gap statistics, and the GNS norm sequence `‖TⁿaΩ‖`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{expectation, GnsSpace, State};
use crate::channels::SuperOperator;
use crate::error::{Error, Result};
use crate::numerics::{vec_inner, vec_norm, ComplexMatrix, C64};

pub const DEFAULT_STEPS: u64 = 5000;
/// Slack used when deciding membership `c_n ≥ |φ(A)|² − ε`.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;
const BASE_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub values: Vec<f64>,
    pub abs_expectation_sq: f64,
    pub base: f64,
    pub horizon: u64,
}

fn check_observable(d: usize, a: &ComplexMatrix) -> Result<()> {
    if a.rows() != d || a.cols() != d {
        return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", a.rows(), a.cols())));
    }
    Ok(())
}

/// Iterates the transfer matrix on `vec(A)`; `c_n = Re Tr(ρA† τⁿ(A))`.
///
/// `state` need not be the GNS state; any invariant state is accepted.
pub fn correlation_sequence(op: &SuperOperator, state: &State, a: &ComplexMatrix, n: u64) -> Result<CorrelationSeries> {
    let d = op.dim();
    check_observable(d, a)?;
    if state.dim() != d {
        return Err(Error::dims(format!("state of dimension {d}"), format!("{}", state.dim())));
    }
    if n < 1 {
        return Err(Error::BadParam("horizon must be at least 1".into()));
    }
    // Tr(M X) = vec(Mᵀ) · vec(X)
    let weight = (state.rho() * &a.adjoint()).transpose().vec_row_major();
    let t = op.transfer();
    let mut v = a.vec_row_major();
    let mut values = Vec::with_capacity(n as usize + 1);
    for step in 0..=n {
        let c: C64 = weight.iter().zip(&v).map(|(w, x)| w * x).sum();
        values.push(c.re);
        if step < n {
            v = t.apply(&v);
        }
    }
    let base = expectation(state, &(&a.adjoint() * a))?.re;
    if (values[0] - base).abs() > BASE_CHECK_TOL * base.abs().max(1.0) {
        return Err(Error::NoConvergence { context: format!("c_0 = {} disagrees with φ(A†A) = {base}", values[0]) });
    }
    let mean = expectation(state, a)?;
    Ok(CorrelationSeries { values, abs_expectation_sq: mean.norm_sqr(), base, horizon: n })
}

/// Same series through GNS inner products `Re⟨aΩ, TⁿaΩ⟩`, valid for `φ = ω`.
pub fn correlation_sequence_gns(
    t: &ComplexMatrix,
    gns: &GnsSpace,
    a: &ComplexMatrix,
    n: u64,
) -> Result<CorrelationSeries> {
    gns.check_operator(t)?;
    let x = gns.coords_of(a)?;
    let mut v = x.clone();
    let mut values = Vec::with_capacity(n as usize + 1);
    for step in 0..=n {
        values.push(vec_inner(&x, &v).re);
        if step < n {
            v = t.apply(&v);
        }
    }
    let mean = vec_inner(gns.omega(), &x);
    Ok(CorrelationSeries { base: values[0], values, abs_expectation_sq: mean.norm_sqr(), horizon: n })
}

/// Several observables against the same channel; fans out over the rayon pool.
pub fn correlation_sequences(
    op: &SuperOperator,
    state: &State,
    observables: &[ComplexMatrix],
    n: u64,
) -> Vec<Result<CorrelationSeries>> {
    observables.par_iter().map(|a| correlation_sequence(op, state, a, n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSet {
    pub epsilon: f64,
    pub threshold: f64,
    pub horizon: u64,
    pub indices: Vec<u64>,
    /// Largest gap between consecutive members of `{0} ∪ indices ∪ {N}`.
    pub max_gap: u64,
    pub gap_histogram: BTreeMap<u64, u64>,
}

impl RecurrenceSet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.indices.binary_search(&n).is_ok()
    }
}

fn gap_statistics(indices: &[u64], horizon: u64) -> (u64, BTreeMap<u64, u64>) {
    let mut marks = Vec::with_capacity(indices.len() + 2);
    marks.push(0);
    marks.extend_from_slice(indices);
    marks.push(horizon);
    marks.dedup();
    let mut hist = BTreeMap::new();
    let mut max_gap = 0;
    for w in marks.windows(2) {
        let g = w[1] - w[0];
        max_gap = max_gap.max(g);
        *hist.entry(g).or_insert(0) += 1;
    }
    (max_gap, hist)
}

/// Indices with `c_n ≥ |φ(A)|² − ε`, with their gap statistics.
pub fn recurrence_set(series: &CorrelationSeries, epsilon: f64) -> RecurrenceSet {
    recurrence_set_window(series, epsilon, series.horizon)
}

/// As [`recurrence_set`], restricted to `n ≤ window`.
pub fn recurrence_set_window(series: &CorrelationSeries, epsilon: f64, window: u64) -> RecurrenceSet {
    let horizon = window.min(series.horizon);
    let threshold = series.abs_expectation_sq - epsilon;
    let indices: Vec<u64> = series.values[..=horizon as usize]
        .iter()
        .enumerate()
        .filter(|(_, c)| **c >= threshold - MEMBERSHIP_SLACK)
        .map(|(n, _)| n as u64)
        .collect();
    let (max_gap, gap_histogram) = gap_statistics(&indices, horizon);
    RecurrenceSet { epsilon, threshold, horizon, indices, max_gap, gap_histogram }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityEvidence {
    Saturating,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProbe {
    pub epsilon: f64,
    /// `(N, max_gap)` per window.
    pub windows: Vec<(u64, u64)>,
    pub evidence: DensityEvidence,
}

/// Recomputes `max_gap` over nested windows. Saturation is reported as
/// evidence of relative density, never as a proof of it.
pub fn gap_stability_probe(
    op: &SuperOperator,
    state: &State,
    a: &ComplexMatrix,
    epsilon: f64,
    windows: &[u64],
) -> Result<GapProbe> {
    if windows.is_empty() || windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadParam("windows must be nonempty and strictly ascending".into()));
    }
    let series = correlation_sequence(op, state, a, *windows.last().unwrap())?;
    Ok(gap_probe_from_series(&series, epsilon, windows))
}

pub fn gap_probe_from_series(series: &CorrelationSeries, epsilon: f64, windows: &[u64]) -> GapProbe {
    let rows: Vec<(u64, u64)> =
        windows.iter().map(|&w| (w, recurrence_set_window(series, epsilon, w).max_gap)).collect();
    let evidence = match rows.as_slice() {
        [.., (n_prev, g_prev), (_, g_last)] => {
            if g_last > g_prev {
                DensityEvidence::Growing
            } else if g_last == g_prev && 2 * g_last <= *n_prev {
                DensityEvidence::Saturating
            } else {
                DensityEvidence::Inconclusive
            }
        }
        _ => DensityEvidence::Inconclusive,
    };
    GapProbe { epsilon, windows: rows, evidence }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSequence {
    pub values: Vec<f64>,
    pub lower_bound: f64,
    pub terminal: f64,
    /// Set when `terminal + 1e−6 < lower_bound`.
    pub bound_violated: bool,
    pub max_ratio: f64,
    /// Worst violation of `‖aΩ‖‖TⁿaΩ‖ ≥ |⟨aΩ,TⁿaΩ⟩| ≥ Re⟨aΩ,TⁿaΩ⟩`; 0 when it holds.
    pub cauchy_schwarz_residual: f64,
}

const RATIO_TOL: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-6;

/// `‖TⁿaΩ‖` for `n = 0..N` with the lower bound `|ω(A)|²/‖aΩ‖`.
pub fn norm_sequence(t: &ComplexMatrix, gns: &GnsSpace, a: &ComplexMatrix, n: u64) -> Result<NormSequence> {
    gns.check_operator(t)?;
    let x = gns.coords_of(a)?;
    let x_norm = vec_norm(&x);
    let mut v = x.clone();
    let mut values = Vec::with_capacity(n as usize + 1);
    let mut max_ratio: f64 = 0.0;
    let mut cs: f64 = 0.0;
    for step in 0..=n {
        let norm = vec_norm(&v);
        let ip = vec_inner(&x, &v);
        cs = cs.max(ip.norm() - x_norm * norm).max(ip.re - ip.norm());
        if let Some(&prev) = values.last() {
            let prev: f64 = prev;
            if prev > 0.0 {
                max_ratio = max_ratio.max(norm / prev);
            }
            if norm > prev * (1.0 + RATIO_TOL) + 1e-14 {
                return Err(Error::ContractionViolation { norm: norm / prev.max(f64::MIN_POSITIVE), tol: RATIO_TOL });
            }
        }
        values.push(norm);
        if step < n {
            v = t.apply(&v);
        }
    }
    let mean = vec_inner(gns.omega(), &x).norm();
    let lower_bound = if x_norm > 0.0 { mean * mean / x_norm } else { 0.0 };
    let terminal = *values.last().unwrap();
    Ok(NormSequence {
        values,
        lower_bound,
        terminal,
        bound_violated: terminal + BOUND_SLACK < lower_bound,
        max_ratio,
        cauchy_schwarz_residual: cs.max(0.0),
    })
}
