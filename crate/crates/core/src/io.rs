//! JSON formats.
//!
//! Complex entries are `[re, im]` pairs or plain numbers. A decoherence
//! functional is `{"labels": [...], "matrix": [[entry, ...], ...]}`; labels
//! may be omitted (16×16 matrices then get the joint-outcome labels, other
//! sizes are numbered). A classical measure is `{"labels", "weights"}`. A
//! structured model lists its atoms as
//! `{"alpha": "a", "i": 1, "beta": "b'", "j": -1, "c": "c0"}` together with
//! `weights` or `matrix` in the same order.
//!
//! Every decoder returns [`QmtError::Parse`] (with line and column when the
//! JSON itself is malformed) or a validation error; none panics.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::epr::{atom_label, joint_space, Setting, SettingPair, SignPattern, N_ATOMS};
use crate::error::{QmtError, Result};
use crate::linalg::ComplexMatrix;
use crate::measure::{ClassicalMeasure, DecoherenceFunctional, Measure, SampleSpace};
use crate::quantum::{pure_density, validate_density, SpinDirections};
use crate::screening::{cell, ModelMeasure, StructuredModel};

/// Largest matrix side accepted by the decoders.
pub const MAX_IO_ATOMS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn parse_err(e: serde_json::Error) -> QmtError {
    QmtError::Parse(e.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<Entry>>) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(QmtError::Parse("matrix is empty".into()));
    }
    if n > MAX_IO_ATOMS {
        return Err(QmtError::Parse(format!(
            "matrix has {n} rows, limit {MAX_IO_ATOMS}"
        )));
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(QmtError::Parse(format!(
            "row {r} has {} entries, expected {n}",
            row.len()
        )));
    }
    let data: Vec<Complex64> = rows.into_iter().flatten().map(Entry::value).collect();
    let m = ComplexMatrix::from_fn(n, n, |r, c| data[r * n + c]);
    if !m.is_finite() {
        return Err(QmtError::NonFinite);
    }
    Ok(m)
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| {
            (0..m.cols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

fn default_space(n: usize) -> Result<std::sync::Arc<SampleSpace>> {
    if n == N_ATOMS {
        Ok(joint_space())
    } else {
        SampleSpace::numbered(n)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DfFile {
    labels: Option<Vec<String>>,
    matrix: Vec<Vec<Entry>>,
}

/// A decoded matrix file before any axiom is checked: the labels (defaulted
/// when absent) and a square, finite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrix {
    pub labels: Vec<String>,
    pub matrix: ComplexMatrix,
}

pub fn parse_matrix(text: &str) -> Result<RawMatrix> {
    let f: DfFile = serde_json::from_str(text).map_err(parse_err)?;
    let matrix = matrix_from_rows(f.matrix)?;
    let n = matrix.rows();
    let labels = match f.labels {
        Some(labels) if labels.len() != n => {
            return Err(QmtError::Parse(format!(
                "{} labels for a {n}x{n} matrix",
                labels.len()
            )));
        }
        Some(labels) => labels,
        None => default_space(n)?.labels().to_vec(),
    };
    Ok(RawMatrix { labels, matrix })
}

/// Decode a decoherence functional. Hermiticity and the diagonal are
/// validated; normalisation is not required.
pub fn parse_df(text: &str) -> Result<DecoherenceFunctional> {
    let raw = parse_matrix(text)?;
    DecoherenceFunctional::new(&SampleSpace::new(raw.labels)?, raw.matrix)
}

pub fn df_to_json(df: &DecoherenceFunctional) -> Value {
    json!({
        "labels": df.space().labels(),
        "matrix": matrix_to_rows(df.matrix()),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassicalFile {
    labels: Option<Vec<String>>,
    weights: Vec<f64>,
}

pub fn parse_classical(text: &str) -> Result<ClassicalMeasure> {
    let f: ClassicalFile = serde_json::from_str(text).map_err(parse_err)?;
    let n = f.weights.len();
    if n == 0 || n > MAX_IO_ATOMS {
        return Err(QmtError::Parse(format!(
            "{n} weights (expected 1..={MAX_IO_ATOMS})"
        )));
    }
    let space = match f.labels {
        Some(labels) => {
            if labels.len() != n {
                return Err(QmtError::Parse(format!(
                    "{} labels for {n} weights",
                    labels.len()
                )));
            }
            SampleSpace::new(labels)?
        }
        None => default_space(n)?,
    };
    ClassicalMeasure::new(&space, f.weights)
}

pub fn classical_to_json(m: &ClassicalMeasure) -> Value {
    json!({ "labels": m.space().labels(), "weights": m.weights() })
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AtomSpec {
    alpha: String,
    i: i64,
    beta: String,
    j: i64,
    c: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    past: Option<Vec<String>>,
    atoms: Vec<AtomSpec>,
    weights: Option<Vec<f64>>,
    matrix: Option<Vec<Vec<Entry>>>,
}

fn outcome_bit(v: i64) -> Result<usize> {
    match v {
        1 => Ok(0),
        -1 => Ok(1),
        _ => Err(QmtError::Parse(format!("outcome must be 1 or -1, got {v}"))),
    }
}

pub fn parse_model(text: &str) -> Result<StructuredModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(parse_err)?;
    let n = f.atoms.len();
    if n == 0 || n % 16 != 0 || n > MAX_IO_ATOMS {
        return Err(QmtError::Parse(format!(
            "a structured model needs 16·|C| atoms (at most {MAX_IO_ATOMS}), got {n}"
        )));
    }
    let past = match f.past {
        Some(p) => p,
        None => {
            let mut seen = Vec::new();
            for a in &f.atoms {
                if !seen.contains(&a.c) {
                    seen.push(a.c.clone());
                }
            }
            seen
        }
    };
    let nc = past.len();
    if nc * 16 != n {
        return Err(QmtError::Parse(format!("{n} atoms for {nc} past cells")));
    }
    let past_index: HashMap<&str, usize> = past
        .iter()
        .enumerate()
        .map(|(k, c)| (c.as_str(), k))
        .collect();
    if past_index.len() != nc {
        return Err(QmtError::Parse("duplicate past labels".into()));
    }
    // perm[k] = canonical index of the k-th listed atom
    let mut perm = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    for (k, a) in f.atoms.iter().enumerate() {
        let alpha: Setting = a.alpha.parse()?;
        let beta: Setting = a.beta.parse()?;
        let pair = SettingPair::new(alpha, beta).map_err(|_| {
            QmtError::Parse(format!(
                "atom {k}: {alpha}, {beta} is not an (A, B) setting pair"
            ))
        })?;
        let c = *past_index
            .get(a.c.as_str())
            .ok_or_else(|| QmtError::Parse(format!("atom {k}: unknown past label {:?}", a.c)))?;
        let x = cell(pair.alpha, outcome_bit(a.i)?, pair.beta, outcome_bit(a.j)?) * nc + c;
        if std::mem::replace(&mut taken[x], true) {
            return Err(QmtError::Parse(format!("atom {k} is listed twice")));
        }
        perm.push(x);
    }
    match (f.weights, f.matrix) {
        (Some(w), None) => {
            if w.len() != n {
                return Err(QmtError::Parse(format!(
                    "{} weights for {n} atoms",
                    w.len()
                )));
            }
            let mut canon = vec![0.0; n];
            for (k, v) in w.into_iter().enumerate() {
                canon[perm[k]] = v;
            }
            StructuredModel::classical(past, canon)
        }
        (None, Some(rows)) => {
            let m = matrix_from_rows(rows)?;
            if m.rows() != n {
                return Err(QmtError::Parse(format!(
                    "{}x{} matrix for {n} atoms",
                    m.rows(),
                    m.rows()
                )));
            }
            let mut canon = ComplexMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    canon[(perm[r], perm[c])] = m[(r, c)];
                }
            }
            StructuredModel::quantal(past, canon)
        }
        _ => Err(QmtError::Parse(
            "give exactly one of \"weights\" or \"matrix\"".into(),
        )),
    }
}

pub fn model_to_json(m: &StructuredModel) -> Value {
    let nc = m.n_past();
    let mut atoms = Vec::with_capacity(16 * nc);
    for x in 0..16 * nc {
        let (cl, c) = (x / nc, x % nc);
        let a = [Setting::A, Setting::APrime][cl >> 3];
        let b = [Setting::B, Setting::BPrime][cl >> 1 & 1];
        let sign = |bit: usize| if bit == 0 { 1 } else { -1 };
        atoms.push(AtomSpec {
            alpha: a.name().into(),
            i: sign(cl >> 2 & 1),
            beta: b.name().into(),
            j: sign(cl & 1),
            c: m.past()[c].clone(),
        });
    }
    match m.measure() {
        ModelMeasure::Classical(mu) => {
            json!({ "past": m.past(), "atoms": atoms, "weights": mu.weights() })
        }
        ModelMeasure::Quantal(df) => {
            json!({ "past": m.past(), "atoms": atoms, "matrix": matrix_to_rows(df.matrix()) })
        }
    }
}

pub fn parse_directions(text: &str) -> Result<SpinDirections> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct F {
        a: [f64; 3],
        a_prime: [f64; 3],
        b: [f64; 3],
        b_prime: [f64; 3],
    }
    let f: F = serde_json::from_str(text).map_err(parse_err)?;
    SpinDirections::new(f.a, f.a_prime, f.b, f.b_prime)
}

pub fn directions_to_json(d: &SpinDirections) -> Value {
    serde_json::to_value(d).expect("plain arrays serialise")
}

/// A preparation: a pure state vector or a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Pure(Vec<Complex64>),
    Density(ComplexMatrix),
}

impl StateSpec {
    pub fn density(&self) -> Result<ComplexMatrix> {
        match self {
            StateSpec::Pure(v) => pure_density(v),
            StateSpec::Density(m) => Ok(m.clone()),
        }
    }
}

/// `{"state": [entry, ...]}` or `{"density": [[entry, ...], ...]}`; the state
/// must be normalised and the density matrix a valid one.
pub fn parse_state(text: &str) -> Result<StateSpec> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct F {
        state: Option<Vec<Entry>>,
        density: Option<Vec<Vec<Entry>>>,
    }
    let f: F = serde_json::from_str(text).map_err(parse_err)?;
    match (f.state, f.density) {
        (Some(v), None) => {
            if v.is_empty() || v.len() > MAX_IO_ATOMS {
                return Err(QmtError::Parse(format!("state of length {}", v.len())));
            }
            let v: Vec<Complex64> = v.into_iter().map(Entry::value).collect();
            pure_density(&v)?;
            Ok(StateSpec::Pure(v))
        }
        (None, Some(rows)) => {
            let m = matrix_from_rows(rows)?;
            validate_density(&m)?;
            Ok(StateSpec::Density(m))
        }
        _ => Err(QmtError::Parse(
            "give exactly one of \"state\" or \"density\"".into(),
        )),
    }
}

pub fn state_to_json(s: &StateSpec) -> Value {
    match s {
        StateSpec::Pure(v) => {
            json!({ "state": v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>() })
        }
        StateSpec::Density(m) => json!({ "density": matrix_to_rows(m) }),
    }
}

/// A sign pattern, bare (`+-++`, `ab'-`) or as a JSON string.
pub fn parse_pattern(text: &str) -> Result<SignPattern> {
    let t = text.trim();
    if t.starts_with('"') {
        let s: String = serde_json::from_str(t).map_err(parse_err)?;
        s.trim().parse()
    } else {
        t.parse()
    }
}

/// Joint-space label helper for reports.
pub fn joint_labels() -> Vec<String> {
    (0..N_ATOMS).map(atom_label).collect()
}
