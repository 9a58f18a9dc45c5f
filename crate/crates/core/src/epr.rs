//! The EPRB scenario on the 16-atom joint space of outcome quadruples
//! `(i, i′, j, j′)`: marginals, experimental probabilities, correlators and
//! the CHSH quantity.
//!
//! Atom index is `8·b(i) + 4·b(i′) + 2·b(j) + b(j′)` with `b(+1) = 0`,
//! `b(−1) = 1`, so `"++++"` is atom 0 and `"----"` atom 15. Setting pairs are
//! always enumerated `(a,b), (a′,b), (a,b′), (a′,b′)`.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{QmtError, Result};
use crate::linalg::ComplexMatrix;
use crate::measure::{ClassicalMeasure, DecoherenceFunctional, Measure, SampleSpace, AXIOM_TOL};

pub const N_ATOMS: usize = 16;
/// Absolute tolerance on marginal off-diagonals.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Slack allowed on the CHSH and Tsirelson bounds.
pub const BOUND_TOL: f64 = 1e-9;
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// `+1 → 0`, `−1 → 1`.
pub fn bit(sign: i8) -> usize {
    usize::from(sign < 0)
}

/// `0 → +1`, `1 → −1`.
pub fn sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn atom_index(i: i8, ip: i8, j: i8, jp: i8) -> usize {
    8 * bit(i) + 4 * bit(ip) + 2 * bit(j) + bit(jp)
}

pub fn atom_label(atom: usize) -> String {
    (0..4)
        .map(|k| if atom >> (3 - k) & 1 == 0 { '+' } else { '-' })
        .collect()
}

/// Parses `"+-+-"`; the Unicode minus sign is accepted too.
pub fn parse_atom_label(label: &str) -> Option<usize> {
    let mut atom = 0;
    let mut count = 0;
    for ch in label.chars() {
        let b = match ch {
            '+' => 0,
            '-' | '\u{2212}' => 1,
            _ => return None,
        };
        atom = atom << 1 | b;
        count += 1;
    }
    (count == 4).then_some(atom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Setting {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "a'")]
    APrime,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "b'")]
    BPrime,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::APrime, Setting::B, Setting::BPrime];

    /// Bit position of this setting's outcome within an atom index.
    pub fn shift(self) -> usize {
        match self {
            Setting::A => 3,
            Setting::APrime => 2,
            Setting::B => 1,
            Setting::BPrime => 0,
        }
    }

    /// Outcome (±1) of this setting in the given atom.
    pub fn outcome(self, atom: usize) -> f64 {
        sign(atom >> self.shift() & 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::A => "a",
            Setting::APrime => "a'",
            Setting::B => "b",
            Setting::BPrime => "b'",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = QmtError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" => Ok(Setting::A),
            "a'" | "a\u{2032}" | "ap" => Ok(Setting::APrime),
            "b" => Ok(Setting::B),
            "b'" | "b\u{2032}" | "bp" => Ok(Setting::BPrime),
            other => Err(QmtError::Parse(format!("unknown setting {other:?}"))),
        }
    }
}

/// One of the four `(α, β)` combinations, `α ∈ {a, a′}`, `β ∈ {b, b′}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingPair {
    /// 0 for a, 1 for a′.
    pub alpha: usize,
    /// 0 for b, 1 for b′.
    pub beta: usize,
}

impl SettingPair {
    pub const AB: SettingPair = SettingPair { alpha: 0, beta: 0 };
    pub const APB: SettingPair = SettingPair { alpha: 1, beta: 0 };
    pub const ABP: SettingPair = SettingPair { alpha: 0, beta: 1 };
    pub const APBP: SettingPair = SettingPair { alpha: 1, beta: 1 };
    pub const ALL: [SettingPair; 4] = [Self::AB, Self::APB, Self::ABP, Self::APBP];

    pub fn new(alpha: Setting, beta: Setting) -> Result<Self> {
        let alpha = match alpha {
            Setting::A => 0,
            Setting::APrime => 1,
            other => return Err(QmtError::Parse(format!("{other} is not an A-side setting"))),
        };
        let beta = match beta {
            Setting::B => 0,
            Setting::BPrime => 1,
            other => return Err(QmtError::Parse(format!("{other} is not a B-side setting"))),
        };
        Ok(Self { alpha, beta })
    }

    pub fn alpha_setting(self) -> Setting {
        [Setting::A, Setting::APrime][self.alpha]
    }

    pub fn beta_setting(self) -> Setting {
        [Setting::B, Setting::BPrime][self.beta]
    }

    /// Position in [`SettingPair::ALL`].
    pub fn index(self) -> usize {
        self.alpha + 2 * self.beta
    }

    /// Marginal cell `2·b(i) + b(j)` that an atom falls in for this pair.
    pub fn cell(self, atom: usize) -> usize {
        let i = atom >> self.alpha_setting().shift() & 1;
        let j = atom >> self.beta_setting().shift() & 1;
        2 * i + j
    }

    pub fn name(self) -> String {
        format!("{}{}", self.alpha_setting(), self.beta_setting())
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SettingPair {
    type Err = QmtError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('\u{2032}', "'");
        SettingPair::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| QmtError::Parse(format!("unknown setting pair {s:?}")))
    }
}

/// The canonical 16-atom joint space.
#[derive(Clone, Debug)]
pub struct EprScenario {
    space: Arc<SampleSpace>,
}

impl EprScenario {
    pub fn new() -> Self {
        static SPACE: OnceLock<Arc<SampleSpace>> = OnceLock::new();
        let space = SPACE.get_or_init(|| {
            SampleSpace::new((0..N_ATOMS).map(atom_label).collect())
                .expect("canonical labels are distinct")
        });
        Self {
            space: Arc::clone(space),
        }
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }
}

impl Default for EprScenario {
    fn default() -> Self {
        Self::new()
    }
}

/// Shared canonical space.
pub fn joint_space() -> Arc<SampleSpace> {
    Arc::clone(EprScenario::new().space())
}

fn check_joint(n: usize) -> Result<()> {
    if n != N_ATOMS {
        return Err(QmtError::DimensionMismatch {
            expected: N_ATOMS,
            got: n,
        });
    }
    Ok(())
}

/// `p[α][β][b(i)][b(j)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentalProbabilities {
    p: [[[[f64; 2]; 2]; 2]; 2],
}

impl ExperimentalProbabilities {
    /// Validates finiteness, entries ≥ −1e-10 and block sums of 1 within 1e-9.
    pub fn new(p: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        let out = Self { p };
        for pair in SettingPair::ALL {
            let block = out.block(pair);
            if block.iter().flatten().any(|v| !v.is_finite()) {
                return Err(QmtError::NonFinite);
            }
            if let Some(v) = block.iter().flatten().find(|&&v| v < -AXIOM_TOL) {
                return Err(QmtError::InvalidMeasure(format!(
                    "negative probability {v} in block {pair}"
                )));
            }
            let total: f64 = block.iter().flatten().sum();
            if (total - 1.0).abs() > MARGINAL_TOL {
                return Err(QmtError::InvalidMeasure(format!(
                    "block {pair} sums to {total}"
                )));
            }
        }
        Ok(out)
    }

    /// Constant 1/4, uncorrelated fair outcomes.
    pub fn uniform() -> Self {
        Self {
            p: [[[[0.25; 2]; 2]; 2]; 2],
        }
    }

    pub fn from_blocks(blocks: [[[f64; 2]; 2]; 4]) -> Result<Self> {
        Self::new(Self::from_raw(blocks).p)
    }

    /// Blocks in setting-pair order without validation, for audits of
    /// candidates that may not be valid measures.
    pub fn from_raw(blocks: [[[f64; 2]; 2]; 4]) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for (pair, block) in SettingPair::ALL.into_iter().zip(blocks) {
            p[pair.alpha][pair.beta] = block;
        }
        Self { p }
    }

    pub fn get(&self, pair: SettingPair, i: i8, j: i8) -> f64 {
        self.p[pair.alpha][pair.beta][bit(i)][bit(j)]
    }

    pub fn block(&self, pair: SettingPair) -> [[f64; 2]; 2] {
        self.p[pair.alpha][pair.beta]
    }

    pub fn raw(&self) -> &[[[[f64; 2]; 2]; 2]; 2] {
        &self.p
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.p.iter().flatten().flatten().flatten();
        let b = other.p.iter().flatten().flatten().flatten();
        a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

impl Serialize for ExperimentalProbabilities {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        for pair in SettingPair::ALL {
            map.serialize_entry(&pair.name(), &self.block(pair))?;
        }
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalBlock {
    pub pair: SettingPair,
    /// 4×4, row and column index `2·b(i) + b(j)`.
    pub block: ComplexMatrix,
}

impl MarginalBlock {
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    worst = worst.max(self.block[(r, c)].norm());
                }
            }
        }
        worst
    }

    pub fn diagonal(&self) -> [[f64; 2]; 2] {
        [
            [self.block[(0, 0)].re, self.block[(1, 1)].re],
            [self.block[(2, 2)].re, self.block[(3, 3)].re],
        ]
    }
}

impl Serialize for MarginalBlock {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| [self.block[(r, c)].re, self.block[(r, c)].im])
                    .collect()
            })
            .collect();
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("pair", &self.pair.name())?;
        map.serialize_entry("block", &rows)?;
        map.end()
    }
}

/// `D_αβ(ij; kl) = Σ D(x; y)` over atoms `x` with outcomes `(i, j)` and `y`
/// with outcomes `(k, l)` for the chosen pair.
pub fn marginal(df: &DecoherenceFunctional, pair: SettingPair) -> Result<MarginalBlock> {
    check_joint(df.n_atoms())?;
    let mut block = ComplexMatrix::zeros(4, 4);
    let cells: Vec<usize> = (0..N_ATOMS).map(|a| pair.cell(a)).collect();
    for x in 0..N_ATOMS {
        for y in 0..N_ATOMS {
            block[(cells[x], cells[y])] += df.entry(x, y);
        }
    }
    Ok(MarginalBlock { pair, block })
}

pub fn marginals(df: &DecoherenceFunctional) -> Result<[MarginalBlock; 4]> {
    Ok([
        marginal(df, SettingPair::AB)?,
        marginal(df, SettingPair::APB)?,
        marginal(df, SettingPair::ABP)?,
        marginal(df, SettingPair::APBP)?,
    ])
}

/// The 16 diagonal marginal values, after checking every marginal is diagonal.
pub fn experimental_probabilities(df: &DecoherenceFunctional) -> Result<ExperimentalProbabilities> {
    experimental_probabilities_with(df, MARGINAL_TOL)
}

pub fn experimental_probabilities_with(
    df: &DecoherenceFunctional,
    tol: f64,
) -> Result<ExperimentalProbabilities> {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for m in marginals(df)? {
        let off = m.max_off_diagonal();
        if off > tol {
            return Err(QmtError::MarginalsNotDiagonal {
                pair: m.pair.name(),
                max_off_diagonal: off,
            });
        }
        p[m.pair.alpha][m.pair.beta] = m.diagonal();
    }
    ExperimentalProbabilities::new(p)
}

/// `X(α, β) = Σ_ij i·j·p(α_i, β_j)`.
pub fn correlator(p: &ExperimentalProbabilities, pair: SettingPair) -> f64 {
    let b = p.block(pair);
    b[0][0] - b[0][1] - b[1][0] + b[1][1]
}

pub fn correlators(p: &ExperimentalProbabilities) -> [f64; 4] {
    SettingPair::ALL.map(|pair| correlator(p, pair))
}

/// Signs `(s_ab, s_a′b, s_ab′, s_a′b′)` with product −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignPattern {
    signs: [i8; 4],
}

impl SignPattern {
    pub fn new(signs: [i8; 4]) -> Result<Self> {
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(QmtError::InvalidPattern(format!(
                "signs must be ±1, got {signs:?}"
            )));
        }
        if signs.iter().map(|&s| i32::from(s)).product::<i32>() != -1 {
            return Err(QmtError::InvalidPattern(format!(
                "{} has an even number of minus signs",
                Self { signs }
            )));
        }
        Ok(Self { signs })
    }

    /// Exactly one sign differs from the rest, sitting on `pair`.
    pub fn odd_one_out(pair: SettingPair, overall: i8) -> Self {
        let mut signs = [overall; 4];
        signs[pair.index()] = -overall;
        Self { signs }
    }

    /// All eight admissible patterns: the odd sign's position in pair order
    /// (outer) times the overall sign `+` then `−` (inner).
    pub fn all() -> [SignPattern; 8] {
        let mut out = [Self { signs: [1; 4] }; 8];
        for (k, pair) in SettingPair::ALL.into_iter().enumerate() {
            out[2 * k] = Self::odd_one_out(pair, 1);
            out[2 * k + 1] = Self::odd_one_out(pair, -1);
        }
        out
    }

    pub fn signs(&self) -> [i8; 4] {
        self.signs
    }

    pub fn sign(&self, pair: SettingPair) -> f64 {
        f64::from(self.signs[pair.index()])
    }

    pub fn negated(&self) -> Self {
        Self {
            signs: self.signs.map(|s| -s),
        }
    }

    /// Pair carrying the sign that differs from the other three.
    pub fn odd_pair(&self) -> SettingPair {
        let minus = self.signs.iter().filter(|&&s| s < 0).count();
        let odd = if minus == 1 { -1 } else { 1 };
        SettingPair::ALL[self.signs.iter().position(|&s| s == odd).unwrap_or(0)]
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.signs {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl Serialize for SignPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for SignPattern {
    type Err = QmtError;

    /// Accepts four signs (`"+-++"`, `"(+,-,+,+)"`) or a pair followed by the
    /// odd sign (`"ab-"` is one minus on `ab`, `"a'b'+"` one plus on `a′b′`).
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ',' | ' '))
            .map(|c| match c {
                '\u{2212}' => '-',
                '\u{2032}' => '\'',
                c => c,
            })
            .collect();
        if t.len() == 4 && t.chars().all(|c| c == '+' || c == '-') {
            let mut signs = [1i8; 4];
            for (k, c) in t.chars().enumerate() {
                signs[k] = if c == '+' { 1 } else { -1 };
            }
            return Self::new(signs);
        }
        if let Some(last) = t.chars().last() {
            if last == '+' || last == '-' {
                let pair: SettingPair = t[..t.len() - 1]
                    .parse()
                    .map_err(|_| QmtError::InvalidPattern(format!("cannot parse pattern {s:?}")))?;
                return Ok(Self::odd_one_out(pair, if last == '-' { 1 } else { -1 }));
            }
        }
        Err(QmtError::InvalidPattern(format!(
            "cannot parse pattern {s:?}"
        )))
    }
}

/// `Q = Σ_pairs s_αβ·X(α, β)`.
pub fn chsh_q(p: &ExperimentalProbabilities, pattern: SignPattern) -> f64 {
    SettingPair::ALL
        .into_iter()
        .map(|pair| pattern.sign(pair) * correlator(p, pair))
        .sum()
}

/// Signed Q for every admissible pattern, in [`SignPattern::all`] order.
pub fn q_by_pattern(p: &ExperimentalProbabilities) -> Vec<(SignPattern, f64)> {
    SignPattern::all()
        .into_iter()
        .map(|s| (s, chsh_q(p, s)))
        .collect()
}

/// Pattern maximising |Q|; the first in enumeration order wins ties.
pub fn max_chsh_q(p: &ExperimentalProbabilities) -> (SignPattern, f64) {
    let mut best = (SignPattern::all()[0], f64::NEG_INFINITY);
    for (s, q) in q_by_pattern(p) {
        if q.abs() > best.1 {
            best = (s, q.abs());
        }
    }
    best
}

/// Probabilities of a classical measure on the joint space, by summing out
/// the unselected outcomes.
pub fn classical_joint_marginals(mu_hat: &ClassicalMeasure) -> Result<ExperimentalProbabilities> {
    check_joint(mu_hat.space().n_atoms())?;
    if !mu_hat.is_normalized() {
        return Err(QmtError::InvalidMeasure(format!(
            "total weight {} is not 1",
            mu_hat.total()
        )));
    }
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for pair in SettingPair::ALL {
        for atom in 0..N_ATOMS {
            let c = pair.cell(atom);
            p[pair.alpha][pair.beta][c / 2][c % 2] += mu_hat.weight(atom);
        }
    }
    ExperimentalProbabilities::new(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub q_max: f64,
    pub pattern: SignPattern,
    pub chshb_satisfied: bool,
    pub tsirelson_satisfied: bool,
    pub tol: f64,
}

pub fn check_bounds(p: &ExperimentalProbabilities) -> BoundsReport {
    check_bounds_with(p, BOUND_TOL)
}

pub fn check_bounds_with(p: &ExperimentalProbabilities, tol: f64) -> BoundsReport {
    let (pattern, q_max) = max_chsh_q(p);
    BoundsReport {
        q_max,
        pattern,
        chshb_satisfied: q_max <= 2.0 + tol,
        tsirelson_satisfied: q_max <= TSIRELSON + tol,
        tol,
    }
}

/// One-sided outcome marginals computed from each pairing:
/// `a[α][β][b(i)] = Σ_j p(α_i, β_j)`, `b[β][α][b(j)] = Σ_i p(α_i, β_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OneSidedMarginals {
    pub a: [[[f64; 2]; 2]; 2],
    pub b: [[[f64; 2]; 2]; 2],
}

impl OneSidedMarginals {
    /// Largest disagreement between the two pairings of the same outcome.
    pub fn signaling_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..2 {
            for o in 0..2 {
                worst = worst.max((self.a[s][0][o] - self.a[s][1][o]).abs());
                worst = worst.max((self.b[s][0][o] - self.b[s][1][o]).abs());
            }
        }
        worst
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.a
            .iter()
            .chain(self.b.iter())
            .flatten()
            .flatten()
            .copied()
    }
}

pub fn one_sided_marginals(p: &ExperimentalProbabilities) -> OneSidedMarginals {
    let mut a = [[[0.0; 2]; 2]; 2];
    let mut b = [[[0.0; 2]; 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            let block = p.p[al][be];
            for o in 0..2 {
                a[al][be][o] = block[o][0] + block[o][1];
                b[be][al][o] = block[0][o] + block[1][o];
            }
        }
    }
    OneSidedMarginals { a, b }
}

/// `Σ_j p(α_i, b_j) = Σ_j p(α_i, b′_j)` and likewise on the B side.
pub fn check_nonsignaling(p: &ExperimentalProbabilities) -> bool {
    check_nonsignaling_with(p, MARGINAL_TOL)
}

pub fn check_nonsignaling_with(p: &ExperimentalProbabilities, tol: f64) -> bool {
    one_sided_marginals(p).signaling_defect() <= tol
}

/// Diagonal functional of a classical measure on the joint space, convenient
/// for feeding classical data through the quantal pipeline.
pub fn classical_df(mu_hat: &ClassicalMeasure) -> Result<DecoherenceFunctional> {
    check_joint(mu_hat.space().n_atoms())?;
    Ok(DecoherenceFunctional::from_classical(mu_hat))
}
