//! Finite sample spaces, events, classical measures and decoherence
//! functionals, together with the interference hierarchy and the weak and
//! strong positivity checks.
//!
//! A decoherence functional is stored as its `n×n` atom matrix
//! `matrix[(x, y)] = D(x; y)`. Values on events come from the biadditive
//! extension `D(X; Y) = Σ_{x∈X, y∈Y} D(x; y)`, so additivity holds by
//! construction.
//!
//! Strong positivity is checked on the atom matrix only. For any finite
//! collection of events `X_1..X_m` with 0/1 incidence matrix `A`
//! (`A_ix = 1` iff `x ∈ X_i`), the matrix `D(X_i; X_j)` equals `A M A†`, so it
//! is positive semidefinite whenever `M` is; conversely the singletons are
//! themselves such a collection.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QmtError, Result};
use crate::linalg::{hermitian_eigen_blocked, ComplexMatrix, C0};
use crate::subsets::{self, MAX_SCAN_ATOMS};

/// Absolute tolerance for Hermiticity and normalisation.
pub const AXIOM_TOL: f64 = 1e-10;
/// μ(X) below `-WEAK_VIOLATION_TOL` counts as a violation.
pub const WEAK_VIOLATION_TOL: f64 = 1e-10;
/// Largest space accepted by [`measure_level`].
pub const MAX_LEVEL_ATOMS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleSpace {
    labels: Vec<String>,
}

impl SampleSpace {
    pub fn new(labels: Vec<String>) -> Result<Arc<Self>> {
        if labels.is_empty() {
            return Err(QmtError::InvalidSpace(
                "a sample space needs at least one atom".into(),
            ));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(QmtError::InvalidSpace(
                "atom labels must be distinct".into(),
            ));
        }
        Ok(Arc::new(Self { labels }))
    }

    /// Atoms labelled `"0"`, `"1"`, ...
    pub fn numbered(n: usize) -> Result<Arc<Self>> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn n_atoms(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, atom: usize) -> &str {
        &self.labels[atom]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn same_space(a: &Arc<SampleSpace>, b: &Arc<SampleSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A subset of a sample space, stored as a bitset over atoms.
#[derive(Clone, PartialEq, Eq)]
pub struct Event {
    space: Arc<SampleSpace>,
    bits: Vec<u64>,
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.atoms().map(|a| self.space.label(a)).collect();
        write!(f, "Event{labels:?}")
    }
}

impl Event {
    fn words(n: usize) -> usize {
        n.div_ceil(64)
    }

    pub fn empty(space: &Arc<SampleSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            bits: vec![0; Self::words(space.n_atoms())],
        }
    }

    pub fn full(space: &Arc<SampleSpace>) -> Self {
        let mut e = Self::empty(space);
        for a in 0..space.n_atoms() {
            e.insert(a);
        }
        e
    }

    pub fn from_atoms(
        space: &Arc<SampleSpace>,
        atoms: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut e = Self::empty(space);
        for a in atoms {
            if a >= space.n_atoms() {
                return Err(QmtError::InvalidSpace(format!(
                    "atom {a} out of range for a {}-atom space",
                    space.n_atoms()
                )));
            }
            e.insert(a);
        }
        Ok(e)
    }

    pub fn from_labels<'a>(
        space: &Arc<SampleSpace>,
        labels: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let atoms = labels
            .into_iter()
            .map(|l| {
                space
                    .index_of(l)
                    .ok_or_else(|| QmtError::InvalidSpace(format!("unknown atom label {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_atoms(space, atoms)
    }

    /// Event from the low bits of `mask`; bits at or beyond `n_atoms` are an error.
    pub fn from_mask(space: &Arc<SampleSpace>, mask: u64) -> Result<Self> {
        let n = space.n_atoms();
        if n < 64 && mask >> n != 0 {
            return Err(QmtError::InvalidSpace(format!(
                "mask {mask:#x} has bits beyond {n} atoms"
            )));
        }
        let mut e = Self::empty(space);
        e.bits[0] = mask;
        Ok(e)
    }

    pub fn from_predicate(space: &Arc<SampleSpace>, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut e = Self::empty(space);
        for a in 0..space.n_atoms() {
            if keep(a) {
                e.insert(a);
            }
        }
        e
    }

    fn insert(&mut self, atom: usize) {
        self.bits[atom / 64] |= 1 << (atom % 64);
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn contains(&self, atom: usize) -> bool {
        atom < self.space.n_atoms() && self.bits[atom / 64] >> (atom % 64) & 1 == 1
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.space.n_atoms()).filter(move |&a| self.contains(a))
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// The low 64 bits; `None` when the space has more than 64 atoms.
    pub fn mask(&self) -> Option<u64> {
        (self.space.n_atoms() <= 64).then(|| self.bits[0])
    }

    fn check(&self, other: &Self) -> Result<()> {
        if same_space(&self.space, &other.space) {
            Ok(())
        } else {
            Err(QmtError::SpaceMismatch)
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    pub fn is_disjoint(&self, other: &Self) -> Result<bool> {
        self.check(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| a & b == 0))
    }

    pub fn complement(&self) -> Self {
        Self::from_predicate(&self.space, |a| !self.contains(a))
    }
}

/// Anything that assigns a real measure to events of a finite space.
pub trait Measure {
    fn space(&self) -> &Arc<SampleSpace>;

    fn measure(&self, event: &Event) -> Result<f64>;

    /// Row-major matrix whose subset double-sums give μ: the diagonal of the
    /// weights for a classical measure, `Re D` for a decoherence functional.
    fn real_form(&self) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalMeasure {
    space: Arc<SampleSpace>,
    weights: Vec<f64>,
}

impl ClassicalMeasure {
    pub fn new(space: &Arc<SampleSpace>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.n_atoms() {
            return Err(QmtError::DimensionMismatch {
                expected: space.n_atoms(),
                got: weights.len(),
            });
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(QmtError::InvalidMeasure(format!(
                "weight {w} on atom {i} is negative or not finite"
            )));
        }
        Ok(Self {
            space: Arc::clone(space),
            weights,
        })
    }

    /// As [`ClassicalMeasure::new`] but also requiring total weight 1.
    pub fn normalized(space: &Arc<SampleSpace>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(space, weights)?;
        if !m.is_normalized() {
            return Err(QmtError::InvalidMeasure(format!(
                "total weight {} is not 1",
                m.total()
            )));
        }
        Ok(m)
    }

    pub fn uniform(space: &Arc<SampleSpace>) -> Self {
        let n = space.n_atoms();
        Self {
            space: Arc::clone(space),
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= AXIOM_TOL
    }
}

impl Measure for ClassicalMeasure {
    fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    fn measure(&self, event: &Event) -> Result<f64> {
        if !same_space(&self.space, event.space()) {
            return Err(QmtError::SpaceMismatch);
        }
        Ok(event.atoms().map(|a| self.weights[a]).sum())
    }

    fn real_form(&self) -> Vec<f64> {
        let n = self.weights.len();
        let mut re = vec![0.0; n * n];
        for (i, w) in self.weights.iter().enumerate() {
            re[i * n + i] = *w;
        }
        re
    }
}

/// `μ(x | y) = μ(x ∩ y) / μ(y)`; undefined (an error) when μ(y) ≤ 1e-12.
pub fn conditional_mu(m: &ClassicalMeasure, x: &Event, y: &Event) -> Result<f64> {
    let my = m.measure(y)?;
    if my <= 1e-12 {
        return Err(QmtError::ConditionUndefined { measure: my });
    }
    Ok(m.measure(&x.intersection(y)?)? / my)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceFunctional {
    space: Arc<SampleSpace>,
    matrix: ComplexMatrix,
}

impl DecoherenceFunctional {
    /// Validates shape, finiteness, Hermiticity and real non-negative diagonal.
    pub fn new(space: &Arc<SampleSpace>, matrix: ComplexMatrix) -> Result<Self> {
        let df = Self::hermitian(space, matrix)?;
        let tol = AXIOM_TOL * df.scale();
        for x in 0..df.n_atoms() {
            let d = df.matrix[(x, x)].re;
            if d < -tol {
                return Err(QmtError::Axiom(format!(
                    "D({0};{0}) = {d:.3e} is negative",
                    space.label(x)
                )));
            }
        }
        Ok(df)
    }

    /// Validates shape, finiteness, Hermiticity and a real diagonal, but not
    /// the sign of the diagonal. For auditing candidates whose positivity is
    /// itself under test.
    pub fn hermitian(space: &Arc<SampleSpace>, matrix: ComplexMatrix) -> Result<Self> {
        let n = space.n_atoms();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(QmtError::Shape(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_finite() {
            return Err(QmtError::NonFinite);
        }
        let tol = AXIOM_TOL * matrix.max_abs().max(1.0);
        let defect = matrix.hermiticity_defect();
        if defect > tol {
            return Err(QmtError::NotHermitian { defect });
        }
        Ok(Self {
            space: Arc::clone(space),
            matrix,
        })
    }

    /// As [`DecoherenceFunctional::new`] but also requiring D(Ω; Ω) = 1.
    pub fn normalized(space: &Arc<SampleSpace>, matrix: ComplexMatrix) -> Result<Self> {
        let df = Self::new(space, matrix)?;
        let total = df.total();
        if (total.re - 1.0).abs() > AXIOM_TOL || total.im.abs() > AXIOM_TOL {
            return Err(QmtError::Axiom(format!("D(Ω;Ω) = {total} is not 1")));
        }
        Ok(df)
    }

    /// Diagonal embedding of a classical measure.
    pub fn from_classical(m: &ClassicalMeasure) -> Self {
        Self {
            space: Arc::clone(&m.space),
            matrix: ComplexMatrix::diagonal(&m.weights),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn n_atoms(&self) -> usize {
        self.space.n_atoms()
    }

    pub fn entry(&self, x: usize, y: usize) -> Complex64 {
        self.matrix[(x, y)]
    }

    /// `max(1, ‖M‖_max)`, the scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.matrix.max_abs().max(1.0)
    }

    /// D(Ω; Ω).
    pub fn total(&self) -> Complex64 {
        self.matrix.as_slice().iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        let t = self.total();
        (t.re - 1.0).abs() <= AXIOM_TOL && t.im.abs() <= AXIOM_TOL
    }

    /// Biadditive extension `D(X; Y)`.
    pub fn pair(&self, x: &Event, y: &Event) -> Result<Complex64> {
        if !same_space(&self.space, x.space()) || !same_space(&self.space, y.space()) {
            return Err(QmtError::SpaceMismatch);
        }
        let ys: Vec<usize> = y.atoms().collect();
        let mut total = C0;
        for a in x.atoms() {
            for &b in &ys {
                total += self.matrix[(a, b)];
            }
        }
        Ok(total)
    }

    /// The quantal measure `μ(X) = D(X; X)`; the imaginary part cancels by
    /// Hermiticity and is discarded.
    pub fn mu(&self, x: &Event) -> Result<f64> {
        Ok(self.pair(x, x)?.re)
    }
}

impl Measure for DecoherenceFunctional {
    fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    fn measure(&self, event: &Event) -> Result<f64> {
        self.mu(event)
    }

    fn real_form(&self) -> Vec<f64> {
        self.matrix.as_slice().iter().map(|z| z.re).collect()
    }
}

/// `μ(X) = D(X; X)`.
pub fn mu(df: &DecoherenceFunctional, x: &Event) -> Result<f64> {
    df.mu(x)
}

/// `D(X; Y)` by biadditive extension from atoms.
pub fn df_pair(df: &DecoherenceFunctional, x: &Event, y: &Event) -> Result<Complex64> {
    df.pair(x, y)
}

/// `I_k(X_1..X_k) = Σ_{∅≠S⊆{1..k}} (−1)^{k−|S|} μ(⊔_{i∈S} X_i)` for pairwise
/// disjoint events.
pub fn interference<M: Measure + ?Sized>(m: &M, events: &[Event]) -> Result<f64> {
    if events.is_empty() {
        return Err(QmtError::InvalidMeasure(
            "interference needs at least one event".into(),
        ));
    }
    for e in events {
        if !same_space(m.space(), e.space()) {
            return Err(QmtError::SpaceMismatch);
        }
    }
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            if !a.is_disjoint(b)? {
                return Err(QmtError::NotDisjoint);
            }
        }
    }
    let k = events.len();
    let mut total = 0.0;
    for s in 1u64..(1 << k) {
        let mut union = Event::empty(m.space());
        for (i, e) in events.iter().enumerate() {
            if s >> i & 1 == 1 {
                union = union.union(e)?;
            }
        }
        let sign = if (k - s.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * m.measure(&union)?;
    }
    Ok(total)
}

/// Outcome of [`measure_level`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    /// Smallest `k ≤ kmax` with `I_{k+1} ≡ 0`; `None` means above `kmax`.
    pub level: Option<usize>,
    /// `(k, max |I_k|)` for every order examined.
    pub max_interference: Vec<(usize, f64)>,
    /// Whether `I_{k+2}` also vanished once `I_{k+1}` did.
    pub hierarchy_holds: bool,
    pub tolerance: f64,
}

/// Largest |I_k| over every unordered k-tuple of disjoint nonempty events,
/// from a table of μ over all masks.
fn max_interference_from_table(table: &[f64], n: usize, k: usize) -> f64 {
    // Atoms get a block label 0 (unused) or 1..=k, with labels introduced in
    // increasing order so each unordered tuple appears once.
    fn recurse(
        atom: usize,
        n: usize,
        k: usize,
        used: usize,
        blocks: &mut Vec<u64>,
        table: &[f64],
        worst: &mut f64,
    ) {
        if n - atom < k - used {
            return;
        }
        if atom == n {
            let mut total = 0.0;
            for s in 1u64..(1 << k) {
                let mut union = 0u64;
                for (i, b) in blocks.iter().enumerate() {
                    if s >> i & 1 == 1 {
                        union |= b;
                    }
                }
                let sign = if (k - s.count_ones() as usize) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                total += sign * table[union as usize];
            }
            *worst = worst.max(total.abs());
            return;
        }
        recurse(atom + 1, n, k, used, blocks, table, worst);
        for b in 0..used.min(k) {
            blocks[b] |= 1 << atom;
            recurse(atom + 1, n, k, used, blocks, table, worst);
            blocks[b] &= !(1 << atom);
        }
        if used < k {
            blocks[used] |= 1 << atom;
            recurse(atom + 1, n, k, used + 1, blocks, table, worst);
            blocks[used] &= !(1 << atom);
        }
    }
    if k > n {
        return 0.0;
    }
    let mut blocks = vec![0u64; k];
    let mut worst = 0.0;
    recurse(0, n, k, 0, &mut blocks, table, &mut worst);
    worst
}

/// Smallest level `k ≤ kmax` for which `I_{k+1}` vanishes on every disjoint
/// `(k+1)`-tuple of nonempty events, checked exhaustively (n ≤ 12). Also
/// confirms that `I_{k+2}` then vanishes as well.
pub fn measure_level<M: Measure + ?Sized>(m: &M, kmax: usize) -> Result<LevelReport> {
    let n = m.space().n_atoms();
    if n > MAX_LEVEL_ATOMS {
        return Err(QmtError::SpaceTooLarge {
            n_atoms: n,
            limit: MAX_LEVEL_ATOMS,
        });
    }
    if kmax == 0 {
        return Err(QmtError::InvalidMeasure("kmax must be at least 1".into()));
    }
    let table = subsets::measure_table(&m.real_form(), n);
    let scale = table.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tolerance = 1e-12 * scale;
    let mut max_interference = Vec::new();
    let max_for = |k: usize, out: &mut Vec<(usize, f64)>| {
        if let Some(&(_, v)) = out.iter().find(|(kk, _)| *kk == k) {
            return v;
        }
        let v = max_interference_from_table(&table, n, k);
        out.push((k, v));
        v
    };
    for k in 1..=kmax {
        if max_for(k + 1, &mut max_interference) <= tolerance {
            let hierarchy_holds = max_for(k + 2, &mut max_interference) <= tolerance;
            return Ok(LevelReport {
                level: Some(k),
                max_interference,
                hierarchy_holds,
                tolerance,
            });
        }
    }
    Ok(LevelReport {
        level: None,
        max_interference,
        hierarchy_holds: true,
        tolerance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivityKind {
    Weak,
    Strong,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Lexicographically least violating subset (smallest mask).
    Subset {
        mask: u64,
        atoms: Vec<usize>,
        mu: f64,
    },
    /// Most negative eigenvalue with its eigenvector.
    Eigen { value: f64, vector: Vec<Complex64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub kind: PositivityKind,
    pub holds: bool,
    pub witness: Option<Witness>,
    /// True when some nonempty subset (weak) or eigenvalue (strong) is zero
    /// within tolerance while positivity holds.
    pub boundary: bool,
    /// Minimum μ over nonempty subsets, or the smallest eigenvalue.
    pub minimum: f64,
    /// Subset mask attaining the minimum (weak only).
    pub minimum_mask: Option<u64>,
    /// Zero subsets (weak) or zero eigenvalues (strong).
    pub zero_count: u64,
    pub violations: u64,
    pub tolerance: f64,
    /// Ascending eigenvalues (strong only).
    pub spectrum: Option<Vec<f64>>,
}

fn mask_atoms(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&a| mask >> a & 1 == 1).collect()
}

/// μ(X) ≥ 0 for every nonempty subset, by a Gray-code scan of all `2^n − 1`
/// subsets (n ≤ 24).
pub fn check_weak_positivity(df: &DecoherenceFunctional) -> Result<PositivityReport> {
    check_weak_positivity_with(df, WEAK_VIOLATION_TOL, subsets::default_threads())
}

pub fn check_weak_positivity_with(
    df: &DecoherenceFunctional,
    tol: f64,
    threads: usize,
) -> Result<PositivityReport> {
    let n = df.n_atoms();
    if n > MAX_SCAN_ATOMS {
        return Err(QmtError::SpaceTooLarge {
            n_atoms: n,
            limit: MAX_SCAN_ATOMS,
        });
    }
    let s = subsets::scan(&df.real_form(), n, tol, tol, threads);
    let holds = s.violations == 0;
    Ok(PositivityReport {
        kind: PositivityKind::Weak,
        holds,
        witness: s.first_violator.map(|(mask, mu)| Witness::Subset {
            mask,
            atoms: mask_atoms(mask, n),
            mu,
        }),
        boundary: holds && s.zero_subsets > 0,
        minimum: s.min_mu,
        minimum_mask: Some(s.min_mask),
        zero_count: s.zero_subsets,
        violations: s.violations,
        tolerance: tol,
        spectrum: None,
    })
}

/// Eigenvalue zero-classification tolerance `1e-10·max(1, ‖M‖_max)`.
pub fn default_zero_tol(df: &DecoherenceFunctional) -> f64 {
    1e-10 * df.scale()
}

/// Positive semidefiniteness of the atom matrix.
pub fn check_strong_positivity(df: &DecoherenceFunctional) -> Result<PositivityReport> {
    check_strong_positivity_with(df, default_zero_tol(df))
}

pub fn check_strong_positivity_with(
    df: &DecoherenceFunctional,
    tol: f64,
) -> Result<PositivityReport> {
    let eig = hermitian_eigen_blocked(df.matrix())?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    let violations = eig.values.iter().filter(|&&v| v < -tol).count() as u64;
    let zero_count = eig.values.iter().filter(|v| v.abs() <= tol).count() as u64;
    let holds = violations == 0;
    Ok(PositivityReport {
        kind: PositivityKind::Strong,
        holds,
        witness: (!holds).then(|| Witness::Eigen {
            value: min,
            vector: eig.vector(0),
        }),
        boundary: holds && zero_count > 0,
        minimum: min,
        minimum_mask: None,
        zero_count,
        violations,
        tolerance: tol,
        spectrum: Some(eig.values),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Signature {
    pub fn from_values(values: &[f64], tol: f64) -> Self {
        Self {
            negative: values.iter().filter(|&&v| v < -tol).count(),
            zero: values.iter().filter(|v| v.abs() <= tol).count(),
            positive: values.iter().filter(|&&v| v > tol).count(),
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.negative, self.zero, self.positive)
    }
}

/// Counts of eigenvalues below `-tol`, within `±tol`, above `tol`.
pub fn eigensignature(df: &DecoherenceFunctional, tol: f64) -> Result<Signature> {
    let eig = hermitian_eigen_blocked(df.matrix())?;
    Ok(Signature::from_values(&eig.values, tol))
}
