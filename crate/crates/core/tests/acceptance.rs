// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line; any FAIL exits nonzero.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qrecur::algebra::{build_gns, expectation, State};
use qrecur::channels::{
    build_contraction, cp_check, defining_identity_residual, detailed_balance_check, invariance_residual,
    k_positivity_sample, omega_adjoint, DbVerdict, SuperOperator,
};
use qrecur::decomposition::{decompose, obstruction_check};
use qrecur::io::{emit, parse_spec, run_analysis, to_json_string, AnalysisOptions, Format, Stage};
use qrecur::models::{depolarizing, mixture_of_unitaries, rotation, thermal_qubit, transpose_mix};
use qrecur::numerics::sampling::{haar_unitary, random_gaussian};
use qrecur::numerics::{operator_norm, ComplexMatrix, C64};
use qrecur::recurrence::{correlation_sequence, norm_sequence, recurrence_set, recurrence_set_window};
use qrecur::stability::{
    asymptotic_projections, pq_criterion, spectral_stability_test, unitary_subspace, StabilityVerdict, TimeMode,
    DEFAULT_MAX_ITER, PERIPHERAL_TOL,
};
use qrecur::Error;

type Outcome = Result<String, String>;

fn fail(msg: impl Into<String>) -> String {
    msg.into()
}

fn err(context: &str) -> impl Fn(Error) -> String + '_ {
    move |e| format!("{context}: {e}")
}

struct Named {
    label: String,
    op: SuperOperator,
    state: State,
}

/// 50 seeded mixtures of unitaries over d ∈ {2, 3, 4} and the thermal qubit grid.
fn db_systems() -> Vec<Named> {
    let mut out = Vec::new();
    for seed in 0..50u64 {
        let d = 2 + (seed % 3) as usize;
        let count = 2 + (seed % 4) as usize;
        let (op, state) = mixture_of_unitaries(d, count, seed).expect("valid parameters");
        out.push(Named { label: format!("mixture(d={d}, count={count}, seed={seed})"), op, state });
    }
    for beta in [0.0, 0.5, 1.0, 2.0] {
        for gamma in [0.1, 0.3, 0.7] {
            let (op, state) = thermal_qubit(beta, gamma).expect("valid parameters");
            out.push(Named { label: format!("thermal_qubit(beta={beta}, gamma={gamma})"), op, state });
        }
    }
    out
}

fn worst(values: impl Iterator<Item = (f64, String)>) -> (f64, String) {
    values.fold((f64::NEG_INFINITY, String::new()), |acc, v| if v.0 > acc.0 { v } else { acc })
}

fn criterion_1(systems: &[Named]) -> Outcome {
    let rows: Vec<Result<[f64; 5], String>> = systems
        .par_iter()
        .map(|s| {
            let gns = build_gns(&s.state).map_err(err(&s.label))?;
            let db = detailed_balance_check(&s.op, &s.state).map_err(err(&s.label))?;
            let t = build_contraction(&s.op, &gns).map_err(err(&s.label))?;
            let beta = omega_adjoint(&s.op, &gns).map_err(err(&s.label))?;
            let back = omega_adjoint(&beta, &gns).map_err(err(&s.label))?;
            Ok([
                invariance_residual(&s.op, &s.state).map_err(err(&s.label))?,
                operator_norm(&t).map_err(err(&s.label))? - 1.0,
                gns.modular_commutator_norm(&t).map_err(err(&s.label))?,
                defining_identity_residual(&s.op, &beta, &s.state).map_err(err(&s.label))?.max(db.identity_residual),
                back.transfer().max_diff(s.op.transfer()),
            ])
        })
        .collect();
    let rows: Vec<[f64; 5]> = rows.into_iter().collect::<Result<_, _>>()?;
    let limits = [1e-9, 1e-9, 1e-8, 1e-9, 1e-9];
    let names = ["invariance", "norm - 1", "modular commutator", "defining identity", "double adjoint"];
    for (k, name) in names.iter().enumerate() {
        let (value, label) = worst(rows.iter().zip(systems).map(|(r, s)| (r[k], s.label.clone())));
        if value > limits[k] {
            return Err(fail(format!("{name} {value:.3e} > {:.0e} on {label}", limits[k])));
        }
    }
    let maxima: Vec<String> = (0..5)
        .map(|k| format!("{}={:.1e}", names[k], rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    Ok(format!("{} systems; max {}", systems.len(), maxima.join(", ")))
}

fn random_observable(state: &State, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    loop {
        let a = random_gaussian(rng, state.dim(), state.dim());
        if expectation(state, &a).expect("square").norm() > 0.05 {
            return a;
        }
    }
}

fn criterion_2(systems: &[Named]) -> Outcome {
    const N: u64 = 5000;
    let empties: Vec<String> = systems
        .par_iter()
        .enumerate()
        .map(|(k, s)| -> Result<Vec<String>, String> {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
            let mut bad = Vec::new();
            for j in 0..10 {
                let a = random_observable(&s.state, &mut rng);
                let series = correlation_sequence(&s.op, &s.state, &a, N).map_err(err(&s.label))?;
                let set = recurrence_set(&series, 0.01 * series.base);
                if set.indices.is_empty() {
                    bad.push(format!("{} observable {j}", s.label));
                }
            }
            Ok(bad)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    if let Some(first) = empties.first() {
        return Err(fail(format!("{} empty recurrence sets, first: {first}", empties.len())));
    }

    let theta = 2.0 * PI * (5f64.sqrt() - 1.0) / 2.0;
    let (op, state) = rotation(2, theta).map_err(err("rotation"))?;
    let a = ComplexMatrix::unit(2, 0, 1);
    let series = correlation_sequence(&op, &state, &a, 100_000).map_err(err("rotation"))?;
    let eps = 0.01 * series.base;
    let gaps: Vec<u64> =
        [1_000u64, 10_000, 100_000].iter().map(|&w| recurrence_set_window(&series, eps, w).max_gap).collect();
    if gaps.iter().any(|g| *g != gaps[0]) {
        return Err(fail(format!("golden rotation max_gap varies across windows: {gaps:?}")));
    }
    Ok(format!("{} observables all recur; golden rotation max_gap {} at 1e3/1e4/1e5", systems.len() * 10, gaps[0]))
}

fn criterion_3() -> Outcome {
    let (op, state) = depolarizing(2, 0.5).map_err(err("depolarizing"))?;
    let a = ComplexMatrix::unit(2, 0, 0);
    let series = correlation_sequence(&op, &state, &a, 50).map_err(err("series"))?;
    let dev = series
        .values
        .iter()
        .enumerate()
        .map(|(n, c)| (c - (0.25 + 0.25 * 0.5f64.powi(n as i32))).abs())
        .fold(0.0, f64::max);
    if dev > 1e-12 {
        return Err(fail(format!("c_n deviates from 1/4 + (1/4)(1/2)^n by {dev:.3e} > 1e-12")));
    }
    let gns = build_gns(&state).map_err(err("gns"))?;
    let t = build_contraction(&op, &gns).map_err(err("contraction"))?;
    let norms = norm_sequence(&t, &gns, &a, 200).map_err(err("norm sequence"))?;
    let bound = 0.25 / 0.5f64.sqrt();
    let terminal_err = (norms.terminal - 0.5).abs();
    let bound_err = (norms.lower_bound - bound).abs();
    if terminal_err > 1e-6 || bound_err > 1e-6 || norms.terminal < norms.lower_bound - 1e-6 {
        return Err(fail(format!(
            "terminal {:.12} (target 0.5), lower bound {:.12} (target {bound:.12})",
            norms.terminal, norms.lower_bound
        )));
    }
    Ok(format!("max |c_n - closed form| {dev:.1e}; terminal norm {:.12} >= {:.12}", norms.terminal, norms.lower_bound))
}

fn block_contraction(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ComplexMatrix {
    let v = haar_unitary(rng, n);
    let u = haar_unitary(rng, k.max(1));
    let g = random_gaussian(rng, n - k, n - k);
    let c = g.scale_real(0.9 / operator_norm(&g).expect("finite").max(1e-300));
    let block = ComplexMatrix::from_fn(n, n, |i, j| match (i < k, j < k) {
        (true, true) => u.get(i, j),
        (false, false) => c.get(i - k, j - k),
        _ => C64::new(0.0, 0.0),
    });
    &(&v * &block) * &v.adjoint()
}

fn criterion_4() -> Outcome {
    let mut cases: Vec<(String, ComplexMatrix)> = Vec::new();
    for seed in 0..50u64 {
        let d = 2 + (seed % 2) as usize;
        let count = 1 + (seed % 4) as usize;
        let (op, state) = mixture_of_unitaries(d, count, 500 + seed).map_err(err("mixture"))?;
        let gns = build_gns(&state).map_err(err("gns"))?;
        let t = build_contraction(&op, &gns).map_err(err("contraction"))?;
        cases.push((format!("channel(d={d}, count={count}, seed={})", 500 + seed), t));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for j in 0..50usize {
        let n = [3, 4, 6, 8, 9][j % 5];
        let k = j % n;
        cases.push((format!("direct(n={n}, unitary block={k}, #{j})"), block_contraction(&mut rng, n, k)));
    }
    let results: Vec<Result<(f64, f64), String>> = cases
        .par_iter()
        .map(|(label, t)| {
            let proj = asymptotic_projections(t, 1e-12, DEFAULT_MAX_ITER).map_err(err(label))?;
            let split = unitary_subspace(t, PERIPHERAL_TOL).map_err(err(label))?;
            let pq = pq_criterion(&proj, &split, 1e-9).map_err(err(label))?;
            if proj.spectral_agreement > 1e-7 {
                return Err(format!("{label}: iterated vs spectral P differ by {:.3e}", proj.spectral_agreement));
            }
            if !pq.biconditional_holds {
                return Err(format!("{label}: P = Q biconditional fails ({pq:?})"));
            }
            if split.reassembly_residual > 1e-9 {
                return Err(format!("{label}: reassembly residual {:.3e}", split.reassembly_residual));
            }
            Ok((proj.spectral_agreement, split.reassembly_residual))
        })
        .collect();
    let ok: Vec<(f64, f64)> = results.into_iter().collect::<Result<_, _>>()?;
    let agree = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let reassembly = ok.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(format!("{} contractions; max P disagreement {agree:.1e}, max reassembly {reassembly:.1e}", ok.len()))
}

fn criterion_5(systems: &[Named]) -> Outcome {
    let sups: Vec<Result<Option<f64>, String>> = systems
        .par_iter()
        .map(|s| {
            let db = detailed_balance_check(&s.op, &s.state).map_err(err(&s.label))?;
            if db.verdict != DbVerdict::Holds {
                return Ok(None);
            }
            let gns = build_gns(&s.state).map_err(err(&s.label))?;
            let dec = decompose(&s.op, &gns, None, 1e-9).map_err(err(&s.label))?;
            let obs = obstruction_check(&dec, &s.state, 1e-8).map_err(err(&s.label))?;
            let value = obs.max_abs_expectation.max(obs.sup_abs_expectation);
            if value > 1e-8 || obs.fired {
                return Err(format!("{}: |omega(B)| reaches {value:.3e} on A2", s.label));
            }
            Ok(Some(value))
        })
        .collect();
    let verified: Vec<f64> = results_flat(sups)?;
    if verified.is_empty() {
        return Err(fail("no DB-verified systems"));
    }

    let b = 0.3f64.atanh();
    let doc = format!(
        r#"{{"dimension":2,"state":{{"type":"gibbs","hamiltonian":[[[1,0],[0,0]],[[0,0],[-1,0]]],"beta":{b}}},
            "channel":{{"type":"model","name":"depolarizing","params":{{"p":0.5}}}}}}"#
    );
    let spec = parse_spec(&doc).map_err(err("adversarial spec"))?;
    let report = run_analysis(&spec, &AnalysisOptions { steps: 100, ..Default::default() })
        .map_err(err("adversarial analysis"))?;
    let obs = report.obstruction.ok().ok_or_else(|| fail("adversarial obstruction stage did not run"))?;
    let invariance = report.hypothesis_checks.ok().ok_or_else(|| fail("hypothesis stage missing"))?.invariance;
    let cross = obs.failed_hypotheses.iter().any(|h| h.starts_with("invariance"));
    if !obs.fired || !cross || invariance.pass {
        return Err(fail(format!(
            "adversarial case: fired={}, cross-referenced={cross}, invariance check pass={}",
            obs.fired, invariance.pass
        )));
    }
    let sup = verified.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "{} DB systems with sup|omega(B)| <= {sup:.1e}; adversarial fires at {:.3} and cites invariance residual {:.3e}",
        verified.len(),
        obs.sup_abs_expectation,
        invariance.value
    ))
}

fn results_flat(items: Vec<Result<Option<f64>, String>>) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in items {
        if let Some(v) = item? {
            out.push(v);
        }
    }
    Ok(out)
}

fn criterion_6() -> Outcome {
    let (op, _) = transpose_mix(2, 0.0, 0.0).map_err(err("transpose"))?;
    let (cp, min_choi) = cp_check(&op);
    let two = k_positivity_sample(&op, 2, 200, 6).map_err(err("2-positivity"))?;
    if cp || two >= 0.0 {
        return Err(fail(format!("transpose: cp={cp}, 2-positivity witness {two:.3e}")));
    }

    let pure = State::from_density(ComplexMatrix::unit(2, 0, 0)).map_err(err("pure state"))?;
    match build_gns(&pure) {
        Err(Error::NotFaithful { .. }) => {}
        other => return Err(fail(format!("pure state GNS gave {other:?}"))),
    }

    let l = ComplexMatrix::identity(2).scale(C64::new(0.0, 1.0));
    let r = spectral_stability_test(&l, TimeMode::Continuous, PERIPHERAL_TOL).map_err(err("i*1"))?;
    let stable = r.verdict == StabilityVerdict::StronglyStable;
    if stable || r.residual_spectrum_reading != StabilityVerdict::StronglyStable || !r.readings_disagree {
        return Err(fail(format!(
            "L = i*1: verdict {:?}, residual reading {:?}",
            r.verdict, r.residual_spectrum_reading
        )));
    }
    if !r.residual_spectrum_note.contains("disagree") {
        return Err(fail("L = i*1: note on the two readings missing"));
    }
    Ok(format!(
        "transpose min Choi eigenvalue {min_choi:.3}, 2-positivity witness {two:.3}; NotFaithful raised; \
         L = i*1 verdict {:?} with note attached",
        r.verdict
    ))
}

fn render(spec_doc: &str, opts: &AnalysisOptions, threads: usize) -> Result<(String, Vec<Vec<u8>>), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let spec = parse_spec(spec_doc).map_err(err("spec"))?;
        let report = run_analysis(&spec, opts).map_err(err("analysis"))?;
        let json = to_json_string(&report).map_err(err("json"))?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let files = emit(&report, Format::CsvSeries, dir.path()).map_err(err("csv"))?;
        let csv = files.iter().map(|p| std::fs::read(p).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        Ok((json, csv))
    })
}

fn criterion_7() -> Outcome {
    let specs = [
        r#"{"dimension":2,"channel":{"type":"model","name":"thermal_qubit","params":{"beta":1,"gamma":0.3}}}"#,
        r#"{"dimension":3,"channel":{"type":"model","name":"mixture_of_unitaries","params":{"count":3,"seed":11}}}"#,
    ];
    let opts = AnalysisOptions { seed: 42, ..Default::default() };
    let mut bytes = 0;
    for doc in specs {
        let first = render(doc, &opts, 1)?;
        for threads in [1, 4] {
            if render(doc, &opts, threads)? != first {
                return Err(fail(format!("output differs on rerun with {threads} threads")));
            }
        }
        if matches!(
            parse_spec(doc).ok().and_then(|s| run_analysis(&s, &opts).ok()).map(|r| r.recurrence_results),
            Some(Stage::Failed { .. }) | None
        ) {
            return Err(fail("analysis did not complete"));
        }
        bytes += first.0.len() + first.1.iter().map(Vec::len).sum::<usize>();
    }
    Ok(format!("{} specs x 3 runs (1 and 4 threads) byte-identical, {bytes} bytes each", specs.len()))
}

fn main() -> ExitCode {
    let systems = db_systems();
    let criteria: [(&str, &dyn Fn() -> Outcome); 7] = [
        ("detailed balance consequences", &|| criterion_1(&systems)),
        ("recurrence (Khintchin) suite", &|| criterion_2(&systems)),
        ("depolarizing closed form", &criterion_3),
        ("stability splitting suite", &criterion_4),
        ("obstruction suite", &|| criterion_5(&systems)),
        ("negative controls", &criterion_6),
        ("determinism", &criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} [{secs:.1}s] {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{secs:.1}s] {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
