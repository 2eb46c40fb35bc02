// SPDX-License-Identifier: Apache-2.0

//! The analysis pipeline: hypothesis checks, GNS construction, detailed
//! balance, contraction, recurrence, stability, decomposition and the
//! obstruction check. A failed stage is recorded and only its dependents
//! are skipped.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{build_gns, GnsSpace};
use crate::channels::{
    build_contraction_with_tol, cp_check, detailed_balance_check_with, invariance_residual, omega_adjoint,
    schwarz_check, DbOptions, DbVerdict, PositivityEvidence,
};
use crate::decomposition::{decompose, obstruction_check, spectral_candidate, Decomposition, ObstructionReport};
use crate::error::{Error, ErrorClass, Result};
use crate::numerics::{operator_norm, vec_norm, ComplexMatrix, C64};
use crate::recurrence::{correlation_sequence, gap_probe_from_series, norm_sequence, recurrence_set, GapProbe};
use crate::stability::{
    asymptotic_projections, pq_criterion, spectral_stability_test, stability_horizon, strong_stability_check,
    unitary_subspace, PqReport, SpectralReport, TimeMode, DEFAULT_MAX_ITER, PERIPHERAL_TOL, PROJECTION_FLOOR,
};

use super::spec::{resolve, System, SystemSpec};

const CP_TOL: f64 = 1e-10;
const COMMUTATOR_TOL: f64 = 1e-8;
const NORM_BOUND_SLACK: f64 = 1e-6;

/// Analyses that can be requested on their own; prerequisites always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Recurrence,
    Stability,
    Decomposition,
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub steps: u64,
    pub epsilon: f64,
    pub tol: f64,
    pub seed: u64,
    /// Windows for the gap probe; defaults to `steps/100, steps/10, steps`.
    pub windows: Option<Vec<u64>>,
    pub include_timing: bool,
    /// Include the matrix units `E_ij` as observables.
    pub default_observables: bool,
    pub extra_observables: Vec<(String, ComplexMatrix)>,
    pub only: Option<Section>,
    /// Decay horizon for the decomposition; derived from the spectrum when absent.
    pub horizon: Option<u64>,
    pub samples: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            steps: 5000,
            epsilon: 0.01,
            tol: 1e-9,
            seed: 0,
            windows: None,
            include_timing: false,
            default_observables: true,
            extra_observables: Vec::new(),
            only: None,
            horizon: None,
            samples: 200,
        }
    }
}

impl AnalysisOptions {
    fn windows(&self) -> Vec<u64> {
        let mut w = self.windows.clone().unwrap_or_else(|| vec![self.steps / 100, self.steps / 10, self.steps]);
        w.retain(|n| *n >= 1 && *n <= self.steps);
        w.sort_unstable();
        w.dedup();
        if w.is_empty() {
            w.push(self.steps);
        }
        w
    }

    /// Rejects option values no stage can work with. The error path names
    /// the offending option.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvariantViolation {
                    path: name.into(),
                    message: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("tol", self.tol)?;
        if self.steps < 1 {
            return Err(Error::InvariantViolation { path: "steps".into(), message: "must be at least 1".into() });
        }
        if self.horizon == Some(0) {
            return Err(Error::InvariantViolation { path: "horizon".into(), message: "must be at least 1".into() });
        }
        Ok(())
    }

    fn wants(&self, s: Section) -> bool {
        self.only.is_none_or(|o| o == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

/// A measured value with the tolerance it is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Self { value, relation: Relation::AtMost, tolerance, pass: value <= tolerance }
    }

    pub fn at_least(value: f64, tolerance: f64) -> Self {
        Self { value, relation: Relation::AtLeast, tolerance, pass: value >= tolerance }
    }

    pub fn above(value: f64, tolerance: f64) -> Self {
        Self { value, relation: Relation::Above, tolerance, pass: value > tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub kind: &'static str,
    pub class: &'static str,
    pub message: String,
    #[serde(skip)]
    pub error_class: ErrorClass,
}

impl StageError {
    fn new(stage: &str, e: &Error) -> Self {
        let error_class = e.class();
        Self {
            stage: stage.into(),
            kind: e.kind(),
            class: class_name(error_class),
            message: e.to_string(),
            error_class,
        }
    }
}

pub fn class_name(c: ErrorClass) -> &'static str {
    match c {
        ErrorClass::InvalidSpec => "invalid_spec",
        ErrorClass::Numerical => "numerical",
        ErrorClass::Precondition => "precondition",
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Stage<T> {
    Ok { result: T },
    Skipped { reason: String },
    Failed { error: StageError },
}

impl<T> Stage<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Stage::Ok { result } => Some(result),
            _ => None,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, Stage::Failed { .. })
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Stage::Skipped { reason: reason.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisChecks {
    pub unitality: Check,
    pub cp_min_choi_eigenvalue: Check,
    pub schwarz_margin: Check,
    pub schwarz_samples: usize,
    pub invariance: Check,
    pub faithfulness: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct GnsSummary {
    pub hilbert_dim: usize,
    pub omega_norm_residual: Check,
    pub cholesky_residual: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct DbSection {
    pub verdict: DbVerdict,
    pub identity_residual: Check,
    pub tau_unital: Check,
    pub beta_unital: Check,
    pub invariance: Check,
    pub beta_positivity: PositivityEvidence,
    pub beta_cp_min_eigenvalue: Check,
    pub beta_sampled_margin: Option<Check>,
    pub contraction_norm: Check,
    pub modular_commutator: Check,
    /// `(τ^β)^β` against `τ`; equal exactly when `τ` commutes with the
    /// modular operator.
    pub double_adjoint: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSection {
    pub norm: Check,
    pub modular_commutator: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSummary {
    pub initial: f64,
    pub terminal: f64,
    pub lower_bound: f64,
    /// `terminal − lower_bound`, which must stay above `−1e−6`.
    pub bound_margin: Check,
    pub max_ratio: Check,
    pub cauchy_schwarz: Check,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableRecurrence {
    pub name: String,
    pub base: f64,
    pub abs_expectation_sq: f64,
    pub threshold: f64,
    pub set_size: usize,
    pub max_gap: u64,
    pub gap_histogram: BTreeMap<u64, u64>,
    pub min_value: f64,
    pub terminal_value: f64,
    pub probe: GapProbe,
    /// Empty recurrence set although detailed balance holds.
    pub empty_set_red_flag: bool,
    pub norm: Option<NormSummary>,
    pub norm_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceSection {
    pub epsilon: f64,
    pub steps: u64,
    pub windows: Vec<u64>,
    pub observables: Vec<ObservableRecurrence>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSummary {
    pub iterations: u32,
    pub p_step_delta: Check,
    pub q_step_delta: Check,
    pub spectral_agreement: Check,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingSummary {
    pub h1_dim: usize,
    pub complement_dim: usize,
    pub peripheral_eigenvalues: Vec<C64>,
    pub unitary_residual: Check,
    pub coupling: Check,
    pub complement_invariance: Check,
    pub reassembly: Check,
    pub orthogonality: Check,
    pub complement_spectral_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplementStability {
    pub horizon: u64,
    pub vectors: usize,
    pub stable: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySection {
    pub projections: ProjectionSummary,
    pub splitting: SplittingSummary,
    pub pq: PqReport,
    pub spectrum: SpectralReport,
    pub complement_stability: ComplementStability,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSection {
    pub orthogonality: Check,
    pub a1_leak: Check,
    pub a2_leak: Check,
    pub identity_in_a1: Check,
    pub note: String,
    pub decomposition: Decomposition,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptionsEcho {
    pub steps: u64,
    pub epsilon: f64,
    pub tol: f64,
    pub windows: Vec<u64>,
    pub horizon: Option<u64>,
    pub samples: usize,
    pub only: Option<Section>,
}

/// One correlation series for CSV export.
#[derive(Debug, Clone)]
pub struct SeriesArtifact {
    pub name: String,
    pub values: Vec<f64>,
    pub in_set: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub tool_version: &'static str,
    pub seed: u64,
    pub options: OptionsEcho,
    pub spec_echo: SystemSpec,
    pub hypothesis_checks: Stage<HypothesisChecks>,
    pub gns: Stage<GnsSummary>,
    pub db_report: Stage<DbSection>,
    pub contraction: Stage<ContractionSection>,
    pub recurrence_results: Stage<RecurrenceSection>,
    pub stability_results: Stage<StabilitySection>,
    pub decomposition_results: Stage<DecompositionSection>,
    pub obstruction: Stage<ObstructionReport>,
    /// Stage wall-clock milliseconds; only present when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
    pub failures: Vec<StageError>,
    #[serde(skip)]
    pub series: Vec<SeriesArtifact>,
}

impl AnalysisReport {
    /// Class of the first failed stage, if any.
    pub fn failure_class(&self) -> Option<ErrorClass> {
        self.failures.first().map(|f| f.error_class)
    }
}

struct Timer {
    enabled: bool,
    marks: BTreeMap<String, f64>,
}

impl Timer {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.marks.insert(name.into(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }
}

fn into_stage<T>(name: &str, r: Result<T>, failures: &mut Vec<StageError>) -> Stage<T> {
    match r {
        Ok(result) => Stage::Ok { result },
        Err(e) => {
            let err = StageError::new(name, &e);
            failures.push(err.clone());
            Stage::Failed { error: err }
        }
    }
}

fn hypothesis_stage(sys: &System, opts: &AnalysisOptions) -> Result<HypothesisChecks> {
    let op = &sys.op;
    let (_, min_eig) = cp_check(op);
    Ok(HypothesisChecks {
        unitality: Check::at_most(op.unital().residual, crate::channels::UNITAL_TOL),
        cp_min_choi_eigenvalue: Check::at_least(min_eig, -CP_TOL),
        schwarz_margin: Check::at_least(schwarz_check(op, &sys.state, opts.samples, opts.seed)?, -opts.tol),
        schwarz_samples: opts.samples,
        invariance: Check::at_most(invariance_residual(op, &sys.state)?, opts.tol),
        faithfulness: Check::above(sys.state.min_eigenvalue(), sys.state.faithful_threshold()),
    })
}

fn gns_stage(gns: &GnsSpace) -> GnsSummary {
    let chol = gns.chol();
    GnsSummary {
        hilbert_dim: gns.dim(),
        omega_norm_residual: Check::at_most((vec_norm(gns.omega()) - 1.0).abs(), 1e-12),
        cholesky_residual: Check::at_most((chol * &chol.adjoint()).max_diff(gns.gram()), 1e-12),
    }
}

fn db_stage(sys: &System, gns: &GnsSpace, opts: &AnalysisOptions) -> Result<DbSection> {
    let db_opts = DbOptions { tol: opts.tol, positivity_samples: opts.samples, seed: opts.seed };
    let r = detailed_balance_check_with(&sys.op, &sys.state, &db_opts)?;
    let back = omega_adjoint(&r.beta_map, gns)?;
    Ok(DbSection {
        verdict: r.verdict,
        identity_residual: Check::at_most(r.identity_residual, r.tol),
        tau_unital: Check::at_most(r.tau_unital_residual, r.tol),
        beta_unital: Check::at_most(r.beta_unital_residual, r.tol),
        invariance: Check::at_most(r.invariance_residual, r.tol),
        beta_positivity: r.beta_positivity,
        beta_cp_min_eigenvalue: Check::at_least(r.beta_cp_min_eig, -CP_TOL),
        beta_sampled_margin: r.beta_sampled_margin.map(|m| Check::at_least(m, -CP_TOL)),
        contraction_norm: Check::at_most(r.contraction_norm, 1.0 + r.tol),
        modular_commutator: Check::at_most(r.modular_commutator, COMMUTATOR_TOL),
        double_adjoint: Check::at_most(back.transfer().max_diff(sys.op.transfer()), r.tol),
    })
}

fn contraction_stage(
    sys: &System,
    gns: &GnsSpace,
    opts: &AnalysisOptions,
) -> Result<(ComplexMatrix, ContractionSection)> {
    let t = build_contraction_with_tol(&sys.op, gns, opts.tol)?;
    let section = ContractionSection {
        norm: Check::at_most(operator_norm(&t)?, 1.0 + opts.tol),
        modular_commutator: Check::at_most(gns.modular_commutator_norm(&t)?, COMMUTATOR_TOL),
    };
    Ok((t, section))
}

fn observables(sys: &System, opts: &AnalysisOptions) -> Vec<(String, ComplexMatrix)> {
    let d = sys.op.dim();
    let mut out = Vec::new();
    if opts.default_observables {
        for i in 0..d {
            for j in 0..d {
                out.push((format!("E_{i}_{j}"), ComplexMatrix::unit(d, i, j)));
            }
        }
    }
    out.extend(sys.observables.iter().cloned());
    out.extend(opts.extra_observables.iter().cloned());
    out
}

type RecurrenceOut = (ObservableRecurrence, SeriesArtifact);

fn recurrence_one(
    sys: &System,
    name: &str,
    a: &ComplexMatrix,
    contraction: Option<(&ComplexMatrix, &GnsSpace)>,
    db_holds: bool,
    opts: &AnalysisOptions,
    windows: &[u64],
) -> Result<RecurrenceOut> {
    let series = correlation_sequence(&sys.op, &sys.state, a, opts.steps)?;
    let set = recurrence_set(&series, opts.epsilon);
    let probe = gap_probe_from_series(&series, opts.epsilon, windows);
    let (norm, norm_error) = match contraction {
        Some((t, gns)) => match norm_sequence(t, gns, a, opts.steps) {
            Ok(ns) => (
                Some(NormSummary {
                    initial: ns.values[0],
                    terminal: ns.terminal,
                    lower_bound: ns.lower_bound,
                    bound_margin: Check::at_least(ns.terminal - ns.lower_bound, -NORM_BOUND_SLACK),
                    max_ratio: Check::at_most(ns.max_ratio, 1.0 + 1e-9),
                    cauchy_schwarz: Check::at_most(ns.cauchy_schwarz_residual, 1e-10),
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("no verified contraction".into())),
    };
    let mut in_set = vec![false; series.values.len()];
    for &n in &set.indices {
        in_set[n as usize] = true;
    }
    let summary = ObservableRecurrence {
        name: name.into(),
        base: series.base,
        abs_expectation_sq: series.abs_expectation_sq,
        threshold: set.threshold,
        set_size: set.indices.len(),
        max_gap: set.max_gap,
        gap_histogram: set.gap_histogram.clone(),
        min_value: series.values.iter().copied().fold(f64::INFINITY, f64::min),
        terminal_value: *series.values.last().unwrap(),
        probe,
        empty_set_red_flag: db_holds && set.indices.is_empty(),
        norm,
        norm_error,
    };
    Ok((summary, SeriesArtifact { name: name.into(), values: series.values, in_set }))
}

fn recurrence_stage(
    sys: &System,
    contraction: Option<(&ComplexMatrix, &GnsSpace)>,
    db_holds: bool,
    opts: &AnalysisOptions,
) -> Result<(RecurrenceSection, Vec<SeriesArtifact>)> {
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Error::BadParam(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    if opts.steps < 1 {
        return Err(Error::BadParam("steps must be at least 1".into()));
    }
    let windows = opts.windows();
    let obs = observables(sys, opts);
    let results: Vec<RecurrenceOut> = obs
        .par_iter()
        .map(|(name, a)| recurrence_one(sys, name, a, contraction, db_holds, opts, &windows))
        .collect::<Result<_>>()?;
    let (summaries, series): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((RecurrenceSection { epsilon: opts.epsilon, steps: opts.steps, windows, observables: summaries }, series))
}

const STABILITY_NOTE: &str = "finite dimension: weak, strong and uniform stability coincide, \
the residual spectrum is empty and stability is decided by the peripheral point spectrum";

fn projection_tol(opts: &AnalysisOptions) -> f64 {
    opts.tol.clamp(1e-14, 1e-12)
}

fn stability_stage(t: &ComplexMatrix, opts: &AnalysisOptions) -> Result<StabilitySection> {
    let proj = asymptotic_projections(t, projection_tol(opts), DEFAULT_MAX_ITER)?;
    let step_tol = if proj.floor_reached { PROJECTION_FLOOR } else { projection_tol(opts) };
    let split = unitary_subspace(t, PERIPHERAL_TOL)?;
    let pq = pq_criterion(&proj, &split, opts.tol.max(1e-9))?;
    let spectrum = spectral_stability_test(t, TimeMode::Discrete, PERIPHERAL_TOL)?;
    let horizon = stability_horizon(split.complement_spectral_radius, opts.tol);
    let vectors: Vec<crate::algebra::VectorInGns> = split
        .complement_basis
        .columns()
        .into_iter()
        .map(|coords| crate::algebra::VectorInGns { coords, source: None })
        .collect();
    let verdicts = strong_stability_check(t, &vectors, horizon, opts.tol.max(1e-9) * 10.0);
    Ok(StabilitySection {
        projections: ProjectionSummary {
            iterations: proj.iterations,
            p_step_delta: Check::at_most(proj.residuals.0, step_tol),
            q_step_delta: Check::at_most(proj.residuals.1, step_tol),
            spectral_agreement: Check::at_most(proj.spectral_agreement, 1e-7),
            p: proj.p,
            q: proj.q,
        },
        splitting: SplittingSummary {
            h1_dim: split.h1_dim(),
            complement_dim: split.complement_dim(),
            peripheral_eigenvalues: split.peripheral_eigenvalues.clone(),
            unitary_residual: Check::at_most(split.unitary_residual, 1e-8),
            coupling: Check::at_most(split.coupling_residual, 1e-8),
            complement_invariance: Check::at_most(split.complement_invariance_residual, 1e-8),
            reassembly: Check::at_most(split.reassembly_residual, 1e-9),
            orthogonality: Check::at_most(split.orthogonality_residual, 1e-10),
            complement_spectral_radius: split.complement_spectral_radius,
        },
        pq,
        spectrum,
        complement_stability: ComplementStability {
            horizon,
            vectors: verdicts.len(),
            stable: verdicts.iter().filter(|v| v.stable).count(),
        },
        note: STABILITY_NOTE,
    })
}

fn decomposition_stage(
    sys: &System,
    gns: &GnsSpace,
    have_contraction: bool,
    opts: &AnalysisOptions,
) -> Result<DecompositionSection> {
    let (dec, note) = if have_contraction {
        (
            decompose(&sys.op, gns, opts.horizon, opts.tol)?,
            "A2 is the omega-orthogonal complement of the reversible part".to_string(),
        )
    } else {
        (
            spectral_candidate(&sys.op, gns, opts.horizon, opts.tol)?,
            "no verified contraction: A2 is the span of the non-peripheral generalized eigenvectors \
             of the transfer matrix"
                .to_string(),
        )
    };
    let identity = dec.a1_membership_residual(gns, &ComplexMatrix::identity(sys.op.dim()))?;
    Ok(DecompositionSection {
        orthogonality: Check::at_most(dec.orthogonality_residual, 1e-9),
        a1_leak: Check::at_most(dec.a1_leak, 1e-8),
        a2_leak: Check::at_most(dec.a2_leak, 1e-8),
        identity_in_a1: Check::at_most(identity, 1e-9),
        note,
        decomposition: dec,
    })
}

/// Resolves `spec` and runs every stage. Only an invalid spec is an error;
/// stage failures are recorded in the report.
pub fn run_analysis(spec: &SystemSpec, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    opts.validate()?;
    let sys = resolve(spec)?;
    Ok(run_system(&sys, opts))
}

pub fn run_system(sys: &System, opts: &AnalysisOptions) -> AnalysisReport {
    let mut timer = Timer { enabled: opts.include_timing, marks: BTreeMap::new() };
    let mut failures = Vec::new();

    let hypothesis_checks =
        into_stage("hypothesis_checks", timer.run("hypothesis_checks", || hypothesis_stage(sys, opts)), &mut failures);

    let gns_result = timer.run("gns", || build_gns(&sys.state));
    let gns_space = gns_result.as_ref().ok().cloned();
    let gns = into_stage("gns", gns_result.map(|g| gns_stage(&g)), &mut failures);

    let no_gns = "GNS construction failed";
    let (db_report, contraction, t) = match &gns_space {
        None => (Stage::skipped(no_gns), Stage::skipped(no_gns), None),
        Some(g) => {
            let db = into_stage("db_report", timer.run("db_report", || db_stage(sys, g, opts)), &mut failures);
            let c = timer.run("contraction", || contraction_stage(sys, g, opts));
            let t = c.as_ref().ok().map(|(t, _)| t.clone());
            (db, into_stage("contraction", c.map(|(_, s)| s), &mut failures), t)
        }
    };
    let db_holds = db_report.ok().is_some_and(|d| d.verdict == DbVerdict::Holds);

    let mut series = Vec::new();
    let recurrence_results = if opts.wants(Section::Recurrence) {
        let pair = t.as_ref().zip(gns_space.as_ref());
        let r = timer.run("recurrence", || recurrence_stage(sys, pair, db_holds, opts));
        into_stage(
            "recurrence",
            r.map(|(section, s)| {
                series = s;
                section
            }),
            &mut failures,
        )
    } else {
        Stage::skipped("not requested")
    };

    let stability_results = match (&t, opts.wants(Section::Stability)) {
        (_, false) => Stage::skipped("not requested"),
        (None, true) => Stage::skipped("no verified contraction"),
        (Some(t), true) => into_stage("stability", timer.run("stability", || stability_stage(t, opts)), &mut failures),
    };

    let (decomposition_results, obstruction) = match (&gns_space, opts.wants(Section::Decomposition)) {
        (_, false) => (Stage::skipped("not requested"), Stage::skipped("not requested")),
        (None, true) => (Stage::skipped(no_gns), Stage::skipped(no_gns)),
        (Some(g), true) => {
            let d = timer.run("decomposition", || decomposition_stage(sys, g, t.is_some(), opts));
            let obstruction = match &d {
                Ok(section) => into_stage(
                    "obstruction",
                    timer.run("obstruction", || obstruction_check(&section.decomposition, &sys.state, 1e-8)),
                    &mut failures,
                ),
                Err(_) => Stage::skipped("decomposition failed"),
            };
            // a decay failure is a finding about the system, reported as such
            let d = match d {
                Err(e @ Error::DecayFailure { .. }) => {
                    let err = StageError::new("decomposition", &e);
                    Stage::Failed { error: err }
                }
                other => into_stage("decomposition", other, &mut failures),
            };
            (d, obstruction)
        }
    };

    AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: opts.seed,
        options: OptionsEcho {
            steps: opts.steps,
            epsilon: opts.epsilon,
            tol: opts.tol,
            windows: opts.windows(),
            horizon: opts.horizon,
            samples: opts.samples,
            only: opts.only,
        },
        spec_echo: sys.spec.clone(),
        hypothesis_checks,
        gns,
        db_report,
        contraction,
        recurrence_results,
        stability_results,
        decomposition_results,
        obstruction,
        timing: opts.include_timing.then_some(timer.marks),
        failures,
        series,
    }
}
