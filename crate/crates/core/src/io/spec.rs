// SPDX-License-Identifier: Apache-2.0

//! System specification documents: strict parsing with located errors, and
//! resolution into a channel, a state and a list of observables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{gibbs_state, State};
use crate::channels::SuperOperator;
use crate::error::{Error, Result};
use crate::models::{build_model, ModelSpec};
use crate::numerics::{ComplexMatrix, C64};

/// Trace and Hermiticity tolerance applied to matrices in a document.
pub const SPEC_TOL: f64 = 1e-9;

/// A matrix as row-major nested arrays of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Tracial,
    Gibbs,
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(rename = "type")]
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Kraus,
    Choi,
    Transfer,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(rename = "type")]
    pub kind: ChannelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dimension: usize,
    /// Defaults to the model's paired state for model channels and to the
    /// tracial state otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    pub channel: ChannelSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<ObservableSpec>,
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::InvariantViolation { path: path.into(), message: message.into() }
}

fn located<T: serde::de::DeserializeOwned>(document: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(document);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse { path: if path == "." { "$".into() } else { path }, message: e.inner().to_string() }
    })
}

/// Parses and validates a document. Unknown keys anywhere are rejected.
pub fn parse_spec(document: &str) -> Result<SystemSpec> {
    let spec: SystemSpec = located(document)?;
    validate(&spec)?;
    Ok(spec)
}

/// Parses a standalone square matrix in the document encoding.
pub fn parse_matrix(document: &str) -> Result<ComplexMatrix> {
    let m: MatrixSpec = located(document)?;
    if m.is_empty() {
        return Err(violation("$", "matrix must have at least one row"));
    }
    to_matrix("$", &m, m.len())
}

pub fn to_matrix(path: &str, m: &MatrixSpec, rows: usize) -> Result<ComplexMatrix> {
    if m.len() != rows {
        return Err(violation(path, format!("expected {rows} rows, found {}", m.len())));
    }
    let mut entries = Vec::with_capacity(rows * rows);
    for (i, row) in m.iter().enumerate() {
        if row.len() != rows {
            return Err(violation(format!("{path}[{i}]"), format!("expected {rows} columns, found {}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(violation(format!("{path}[{i}][{j}]"), "entries must be finite"));
            }
            entries.push(C64::new(z[0], z[1]));
        }
    }
    ComplexMatrix::new(rows, rows, entries)
}

pub fn from_matrix(m: &ComplexMatrix) -> MatrixSpec {
    m.to_rows().into_iter().map(|row| row.into_iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn hermitian(path: &str, m: &ComplexMatrix) -> Result<()> {
    let r = m.hermiticity_residual();
    if r > SPEC_TOL {
        return Err(violation(path, format!("matrix must be Hermitian within 1e-9 (residual {r:.3e})")));
    }
    Ok(())
}

fn require<'a, T>(field: &'a Option<T>, path: &str, what: &str) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| violation(path, format!("{what} is required for this type")))
}

fn forbid<T>(field: &Option<T>, path: &str) -> Result<()> {
    if field.is_some() {
        return Err(violation(path, "field is not allowed for this type"));
    }
    Ok(())
}

fn validate_state(d: usize, s: &StateSpec) -> Result<()> {
    match s.kind {
        StateKind::Tracial => {
            forbid(&s.hamiltonian, "state.hamiltonian")?;
            forbid(&s.beta, "state.beta")?;
            forbid(&s.rho, "state.rho")?;
        }
        StateKind::Gibbs => {
            forbid(&s.rho, "state.rho")?;
            let h = to_matrix("state.hamiltonian", require(&s.hamiltonian, "state.hamiltonian", "hamiltonian")?, d)?;
            hermitian("state.hamiltonian", &h)?;
            let beta = *require(&s.beta, "state.beta", "beta")?;
            if !beta.is_finite() {
                return Err(violation("state.beta", "beta must be finite"));
            }
        }
        StateKind::Matrix => {
            forbid(&s.hamiltonian, "state.hamiltonian")?;
            forbid(&s.beta, "state.beta")?;
            let rho = to_matrix("state.rho", require(&s.rho, "state.rho", "rho")?, d)?;
            hermitian("state.rho", &rho)?;
            let tr = rho.trace();
            if (tr - C64::new(1.0, 0.0)).norm() > SPEC_TOL {
                return Err(violation("state.rho", format!("trace must be 1 within 1e-9 (found {})", tr.re)));
            }
        }
    }
    Ok(())
}

fn validate_channel(d: usize, c: &ChannelSpec) -> Result<()> {
    let others = |keep: &str| -> Result<()> {
        if keep != "kraus" {
            forbid(&c.kraus, "channel.kraus")?;
        }
        if keep != "choi" {
            forbid(&c.choi, "channel.choi")?;
        }
        if keep != "transfer" {
            forbid(&c.transfer, "channel.transfer")?;
        }
        if keep != "model" {
            forbid(&c.name, "channel.name")?;
            forbid(&c.params, "channel.params")?;
        }
        Ok(())
    };
    match c.kind {
        ChannelKind::Kraus => {
            others("kraus")?;
            let list = require(&c.kraus, "channel.kraus", "kraus")?;
            if list.is_empty() {
                return Err(violation("channel.kraus", "Kraus list must not be empty"));
            }
            for (k, m) in list.iter().enumerate() {
                to_matrix(&format!("channel.kraus[{k}]"), m, d)?;
            }
        }
        ChannelKind::Choi => {
            others("choi")?;
            to_matrix("channel.choi", require(&c.choi, "channel.choi", "choi")?, d * d)?;
        }
        ChannelKind::Transfer => {
            others("transfer")?;
            to_matrix("channel.transfer", require(&c.transfer, "channel.transfer", "transfer")?, d * d)?;
        }
        ChannelKind::Model => {
            others("model")?;
            require(&c.name, "channel.name", "name")?;
        }
    }
    Ok(())
}

/// Structural checks that need no linear algebra beyond traces.
pub fn validate(spec: &SystemSpec) -> Result<()> {
    let d = spec.dimension;
    if d < 1 {
        return Err(violation("dimension", "dimension must be at least 1"));
    }
    if let Some(s) = &spec.state {
        validate_state(d, s)?;
    }
    validate_channel(d, &spec.channel)?;
    let mut seen = std::collections::BTreeSet::new();
    for (k, o) in spec.observables.iter().enumerate() {
        if !seen.insert(o.name.as_str()) {
            return Err(violation(format!("observables[{k}].name"), format!("duplicate observable name '{}'", o.name)));
        }
        to_matrix(&format!("observables[{k}].matrix"), &o.matrix, d)?;
    }
    Ok(())
}

/// A spec turned into the objects the analyses consume.
#[derive(Debug, Clone)]
pub struct System {
    pub spec: SystemSpec,
    pub op: SuperOperator,
    pub state: State,
    pub observables: Vec<(String, ComplexMatrix)>,
}

fn model_error(e: Error) -> Error {
    match e {
        Error::BadParam(msg) => violation("channel.params", msg),
        Error::NotUnitary { residual } => {
            violation("channel.params", format!("model basis is not unitary (residual {residual:.3e})"))
        }
        other => other,
    }
}

fn resolve_state(d: usize, s: &StateSpec) -> Result<State> {
    let located = |path: &'static str| {
        move |e: Error| match e {
            Error::InvariantViolation { message, .. } => violation(path, message),
            Error::BadParam(message) => violation(path, message),
            other => other,
        }
    };
    match s.kind {
        StateKind::Tracial => Ok(State::tracial(d)),
        StateKind::Gibbs => {
            let h = to_matrix("state.hamiltonian", s.hamiltonian.as_ref().expect("validated"), d)?;
            gibbs_state(&h.hermitian_part(), s.beta.expect("validated")).map_err(located("state.beta"))
        }
        StateKind::Matrix => {
            let rho = to_matrix("state.rho", s.rho.as_ref().expect("validated"), d)?.hermitian_part();
            // accepted at the document tolerance, then normalised exactly
            let tr = rho.trace().re;
            State::from_density(rho.scale_real(1.0 / tr)).map_err(located("state.rho"))
        }
    }
}

/// Builds the channel, state and observables of a validated spec.
pub fn resolve(spec: &SystemSpec) -> Result<System> {
    validate(spec)?;
    let d = spec.dimension;
    let c = &spec.channel;
    let (op, model_state) = match c.kind {
        ChannelKind::Kraus => {
            let list = c.kraus.as_ref().expect("validated");
            let mats = list
                .iter()
                .enumerate()
                .map(|(k, m)| to_matrix(&format!("channel.kraus[{k}]"), m, d))
                .collect::<Result<Vec<_>>>()?;
            (SuperOperator::from_kraus(&mats)?, None)
        }
        ChannelKind::Choi => {
            let m = to_matrix("channel.choi", c.choi.as_ref().expect("validated"), d * d)?;
            (SuperOperator::from_choi(d, m)?, None)
        }
        ChannelKind::Transfer => {
            let m = to_matrix("channel.transfer", c.transfer.as_ref().expect("validated"), d * d)?;
            (SuperOperator::from_transfer(d, m)?, None)
        }
        ChannelKind::Model => {
            let model = ModelSpec {
                name: c.name.clone().expect("validated"),
                params: c.params.clone().unwrap_or_default(),
                dim: d,
            };
            let (op, state) = build_model(&model).map_err(model_error)?;
            (op, Some(state))
        }
    };
    let state = match (&spec.state, model_state) {
        (Some(s), _) => resolve_state(d, s)?,
        (None, Some(s)) => s,
        (None, None) => State::tracial(d),
    };
    let observables = spec
        .observables
        .iter()
        .enumerate()
        .map(|(k, o)| Ok((o.name.clone(), to_matrix(&format!("observables[{k}].matrix"), &o.matrix, d)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(System { spec: spec.clone(), op, state, observables })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEPOL: &str = r#"{"dimension":2,"state":{"type":"tracial"},"channel":{"type":"model","name":"depolarizing","params":{"p":0.5}}}"#;

    fn err_of(doc: &str) -> Error {
        parse_spec(doc).and_then(|s| resolve(&s).map(|_| s)).unwrap_err()
    }

    #[test]
    fn accepts_model_spec() {
        let spec = parse_spec(DEPOL).unwrap();
        let sys = resolve(&spec).unwrap();
        assert_eq!(sys.op.dim(), 2);
        assert!(sys.op.unital().unital);
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let doc = r#"{"dimension":2,"state":{"type":"gibbs","hamiltonian":[[[1,0],[0,0]],[[0,0],[-1,0]]],"bata":1},
            "channel":{"type":"model","name":"depolarizing","params":{"p":0.5}}}"#;
        match parse_spec(doc).unwrap_err() {
            Error::Parse { path, message } => {
                assert_eq!(path, "state.bata");
                assert!(message.contains("unknown field"), "{message}");
            }
            e => panic!("{e:?}"),
        }
        let doc = r#"{"dimension":2,"channel":{"type":"model","name":"depolarizing"},"extra":1}"#;
        assert!(matches!(parse_spec(doc).unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn located_type_errors() {
        let doc = r#"{"dimension":2,"channel":{"type":"kraus","kraus":[
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[0,0]],[["x",0],[1,0]]]]}}"#;
        match parse_spec(doc).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "channel.kraus[2][1][0][0]"),
            e => panic!("{e:?}"),
        }
        let doc = r#"{"dimension":2,"channel":{"type":"kraus","kraus":[[[[1,0],[0,0]],[[0,0],[1,0,3]]]]}}"#;
        match parse_spec(doc).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "channel.kraus[0][1][1]"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_bad_trace() {
        let doc = r#"{"dimension":2,"state":{"type":"matrix","rho":[[[0.5,0],[0,0]],[[0,0],[0.4,0]]]},
            "channel":{"type":"model","name":"depolarizing","params":{"p":0.5}}}"#;
        match err_of(doc) {
            Error::InvariantViolation { path, message } => {
                assert_eq!(path, "state.rho");
                assert!(message.starts_with("trace must be 1 within 1e-9"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_shape_errors() {
        let doc = r#"{"dimension":2,"channel":{"type":"transfer","transfer":[[[1,0]]]}}"#;
        match err_of(doc) {
            Error::InvariantViolation { path, .. } => assert_eq!(path, "channel.transfer"),
            e => panic!("{e:?}"),
        }
        let doc = r#"{"dimension":2,"channel":{"type":"kraus","kraus":[]}}"#;
        assert!(matches!(err_of(doc), Error::InvariantViolation { .. }));
        let doc = r#"{"dimension":2,"channel":{"type":"kraus","choi":[]}}"#;
        assert!(matches!(err_of(doc), Error::InvariantViolation { .. }));
    }

    #[test]
    fn non_hermitian_hamiltonian() {
        let doc = r#"{"dimension":2,"state":{"type":"gibbs","hamiltonian":[[[1,0],[1,0]],[[0,0],[-1,0]]],"beta":1},
            "channel":{"type":"model","name":"dephasing"}}"#;
        match err_of(doc) {
            Error::InvariantViolation { path, .. } => assert_eq!(path, "state.hamiltonian"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn bad_model_params_are_spec_errors() {
        let doc = r#"{"dimension":2,"channel":{"type":"model","name":"depolarizing","params":{"p":1.5}}}"#;
        match err_of(doc) {
            Error::InvariantViolation { path, .. } => assert_eq!(path, "channel.params"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn non_unital_kraus_is_accepted_and_flagged() {
        // Σ K†K = diag(1.64, 0.36)
        let doc = r#"{"dimension":2,"channel":{"type":"kraus","kraus":[
            [[[1,0],[0,0]],[[0,0],[0.6,0]]],
            [[[0,0],[0,0]],[[0.8,0],[0,0]]]]}}"#;
        let sys = resolve(&parse_spec(doc).unwrap()).unwrap();
        assert!(!sys.op.unital().unital);
    }

    #[test]
    fn standalone_matrix() {
        let m = parse_matrix("[[[0,1],[0,0]],[[0,0],[0,1]]]").unwrap();
        assert_eq!(m.get(1, 1), C64::new(0.0, 1.0));
        assert!(matches!(parse_matrix("[[[0,1]],[[0,0]]]"), Err(Error::InvariantViolation { .. })));
        assert!(matches!(parse_matrix("[]"), Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn default_state_follows_model() {
        let doc =
            r#"{"dimension":2,"channel":{"type":"model","name":"thermal_qubit","params":{"beta":1,"gamma":0.3}}}"#;
        let sys = resolve(&parse_spec(doc).unwrap()).unwrap();
        assert!((sys.state.rho().get(0, 0).re - (-1f64).exp() / (2.0 * 1f64.cosh())).abs() < 1e-12);
    }

    #[test]
    fn spec_round_trips() {
        let doc = r#"{"dimension":2,"state":{"type":"matrix","rho":[[[0.6,0],[0,0]],[[0,0],[0.4,0]]]},
            "channel":{"type":"kraus","kraus":[[[[1,0],[0,0]],[[0,0],[1,0]]]]},
            "observables":[{"name":"z","matrix":[[[1,0],[0,0]],[[0,0],[-1,0]]]}]}"#;
        let spec = parse_spec(doc).unwrap();
        let again = parse_spec(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again);
        let sys = resolve(&spec).unwrap();
        assert_eq!(sys.observables[0].0, "z");
    }
}
