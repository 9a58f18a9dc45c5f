//! Linear programs over decoherence functionals on the 16-atom joint space:
//! maximise Q under Hermiticity, normalisation, diagonal marginals and weak
//! positivity. Weak positivity has 65 535 constraints; they are generated
//! lazily from the exact subset scanner.
//!
//! A problem `max cᵀx, Ex = b, Gx ≤ h` (x free) is solved through its dual
//! `min bᵀy + hᵀz, Eᵀy + Gᵀz = c, z ≥ 0`, so every added cut is a new dual
//! column and re-optimisation starts from the previous basis. The primal
//! solution is read off the simplex multipliers.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::epr::{
    joint_space, marginals, max_chsh_q, one_sided_marginals, q_by_pattern,
    ExperimentalProbabilities, OneSidedMarginals, Setting, SettingPair, SignPattern, N_ATOMS,
    TSIRELSON,
};
use crate::error::{QmtError, Result};
use crate::linalg::{hermitian_eigen, ComplexMatrix};
use crate::measure::{
    check_strong_positivity, check_weak_positivity_with, default_zero_tol, eigensignature,
    DecoherenceFunctional, PositivityReport, Signature, WEAK_VIOLATION_TOL,
};
use crate::simplex::{Column, Outcome, Simplex};
use crate::subsets;

/// Feasibility tolerance for separation and the final audit.
pub const LP_TOL: f64 = 1e-9;
/// Size of the full weak-positivity family on the joint space.
pub const WEAK_FAMILY_SIZE: u64 = (1 << N_ATOMS) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Option<Sense>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn eq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            sense: None,
            rhs,
        }
    }

    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            sense: Some(Sense::Le),
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            sense: Some(Sense::Ge),
            rhs,
        }
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.lhs(x) - self.rhs;
        match self.sense {
            None => v.abs(),
            Some(Sense::Le) => v.max(0.0),
            Some(Sense::Ge) => (-v).max(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpMode {
    /// 136 variables: the diagonal and the real parts above it.
    Real,
    /// 256 variables: adds the imaginary parts above the diagonal.
    Complex,
}

impl std::str::FromStr for LpMode {
    type Err = QmtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Self::Real),
            "complex" => Ok(Self::Complex),
            _ => Err(QmtError::Parse(format!(
                "unknown LP mode {s:?} (expected real or complex)"
            ))),
        }
    }
}

impl fmt::Display for LpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Real => "real",
            Self::Complex => "complex",
        })
    }
}

/// Map between LP variables and the entries of a Hermitian 16×16 matrix.
/// Variables are the 16 diagonal entries, then `Re D(x;y)` for x < y in
/// row-major order, then (complex mode) `Im D(x;y)` in the same order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixLayout {
    pub mode: LpMode,
}

const N_PAIRS: usize = N_ATOMS * (N_ATOMS - 1) / 2;

fn pair_offset(x: usize, y: usize) -> usize {
    debug_assert!(x < y);
    x * (2 * N_ATOMS - x - 1) / 2 + (y - x - 1)
}

impl MatrixLayout {
    pub fn n_vars(&self) -> usize {
        match self.mode {
            LpMode::Real => N_ATOMS + N_PAIRS,
            LpMode::Complex => N_ATOMS + 2 * N_PAIRS,
        }
    }

    pub fn diag(&self, x: usize) -> usize {
        x
    }

    pub fn re(&self, x: usize, y: usize) -> usize {
        N_ATOMS + pair_offset(x.min(y), x.max(y))
    }

    pub fn im(&self, x: usize, y: usize) -> Option<usize> {
        match self.mode {
            LpMode::Real => None,
            LpMode::Complex => Some(N_ATOMS + N_PAIRS + pair_offset(x.min(y), x.max(y))),
        }
    }

    pub fn names(&self) -> Vec<String> {
        let l = crate::epr::atom_label;
        let mut v: Vec<String> = (0..N_ATOMS).map(|x| format!("D[{}]", l(x))).collect();
        for x in 0..N_ATOMS {
            for y in x + 1..N_ATOMS {
                v.push(format!("Re[{},{}]", l(x), l(y)));
            }
        }
        if self.mode == LpMode::Complex {
            for x in 0..N_ATOMS {
                for y in x + 1..N_ATOMS {
                    v.push(format!("Im[{},{}]", l(x), l(y)));
                }
            }
        }
        v
    }

    pub fn to_matrix(&self, vars: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(N_ATOMS, N_ATOMS);
        for x in 0..N_ATOMS {
            m[(x, x)] = Complex64::new(vars[x], 0.0);
            for y in x + 1..N_ATOMS {
                let im = self.im(x, y).map_or(0.0, |k| vars[k]);
                let z = Complex64::new(vars[self.re(x, y)], im);
                m[(x, y)] = z;
                m[(y, x)] = z.conj();
            }
        }
        m
    }

    /// Linear form of `μ(X) = Σ_{x,y∈X} Re D(x;y)`.
    pub fn mu_row(&self, mask: u64) -> Vec<(usize, f64)> {
        let atoms: Vec<usize> = (0..N_ATOMS).filter(|&x| mask >> x & 1 == 1).collect();
        let mut row = Vec::with_capacity(atoms.len() * (atoms.len() + 1) / 2);
        for (k, &x) in atoms.iter().enumerate() {
            row.push((self.diag(x), 1.0));
            for &y in &atoms[k + 1..] {
                row.push((self.re(x, y), 2.0));
            }
        }
        row
    }

    /// Linear forms of `Re D(X;Y)` and `Im D(X;Y)` for disjoint X, Y.
    fn cross_rows(
        &self,
        xs: &[usize],
        ys: &[usize],
    ) -> (Vec<(usize, f64)>, Option<Vec<(usize, f64)>>) {
        let mut re = Vec::new();
        let mut im = Vec::new();
        for &x in xs {
            for &y in ys {
                re.push((self.re(x, y), 1.0));
                if let Some(k) = self.im(x, y) {
                    im.push((k, if x < y { 1.0 } else { -1.0 }));
                }
            }
        }
        (re, (self.mode == LpMode::Complex).then_some(im))
    }

    /// Linear form of `v†Dv`.
    pub fn quadratic_row(&self, v: &[Complex64]) -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        for x in 0..N_ATOMS {
            row.push((self.diag(x), v[x].norm_sqr()));
            for y in x + 1..N_ATOMS {
                let w = v[x].conj() * v[y];
                row.push((self.re(x, y), 2.0 * w.re));
                if let Some(k) = self.im(x, y) {
                    row.push((k, -2.0 * w.im));
                }
            }
        }
        row
    }
}

fn cell_atoms(pair: SettingPair, bi: usize, bj: usize) -> Vec<usize> {
    let (sa, sb) = (pair.alpha_setting().shift(), pair.beta_setting().shift());
    (0..N_ATOMS)
        .filter(|&x| x >> sa & 1 == bi && x >> sb & 1 == bj)
        .collect()
}

fn mask_of(atoms: &[usize]) -> u64 {
    atoms.iter().fold(0, |m, &x| m | 1 << x)
}

/// Constraints generated on demand rather than listed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LazyFamily {
    /// μ(X) ≥ 0 for every nonempty subset of the joint space.
    WeakPositivity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpProblem {
    pub variables: Vec<String>,
    /// Maximised.
    pub objective: Vec<f64>,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
    pub layout: Option<MatrixLayout>,
    pub lazy: Option<LazyFamily>,
    pub pattern: Option<SignPattern>,
}

impl LpProblem {
    pub fn new(variables: Vec<String>, objective: Vec<f64>) -> Result<Self> {
        if variables.len() != objective.len() {
            return Err(QmtError::DimensionMismatch {
                expected: variables.len(),
                got: objective.len(),
            });
        }
        Ok(Self {
            variables,
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            layout: None,
            lazy: None,
            pattern: None,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add(&mut self, c: LinearConstraint) -> Result<()> {
        if let Some(&(j, _)) = c.coeffs.iter().find(|(j, _)| *j >= self.n_vars()) {
            return Err(QmtError::Lp(format!(
                "constraint refers to variable {j} of {}",
                self.n_vars()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(QmtError::NonFinite);
        }
        if c.sense.is_none() {
            self.equalities.push(c);
        } else {
            self.inequalities.push(c);
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.objective.len() != n {
            return Err(QmtError::DimensionMismatch {
                expected: n,
                got: self.objective.len(),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(QmtError::NonFinite);
        }
        for c in self.equalities.iter().chain(&self.inequalities) {
            if c.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) || !c.rhs.is_finite() {
                return Err(QmtError::Lp("malformed constraint".into()));
            }
        }
        if self.equalities.iter().any(|c| c.sense.is_some())
            || self.inequalities.iter().any(|c| c.sense.is_none())
        {
            return Err(QmtError::Lp(
                "constraint listed under the wrong kind".into(),
            ));
        }
        if self.lazy.is_some() && self.layout.is_none() {
            return Err(QmtError::Lp("lazy constraints need a matrix layout".into()));
        }
        Ok(())
    }

    /// Largest violation of the listed constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// Q under `pattern` as a linear form on the layout's variables.
pub fn q_row(layout: &MatrixLayout, pattern: SignPattern) -> Vec<f64> {
    let mut c = vec![0.0; layout.n_vars()];
    for pair in SettingPair::ALL {
        let s = pattern.sign(pair);
        for bi in 0..2 {
            for bj in 0..2 {
                let sign = if bi == bj { s } else { -s };
                for (j, a) in layout.mu_row(mask_of(&cell_atoms(pair, bi, bj))) {
                    c[j] += sign * a;
                }
            }
        }
    }
    c
}

/// Maximise Q under `pattern` over Hermitian, normalised decoherence
/// functionals on the joint space with diagonal marginals and weak
/// positivity. The listed inequalities are the starting cuts (singletons,
/// pairs and the 16 setting cells); the rest of the weak-positivity family is
/// lazy.
pub fn build_max_q_lp(pattern: SignPattern, mode: LpMode) -> LpProblem {
    let layout = MatrixLayout { mode };
    let mut p = LpProblem {
        variables: layout.names(),
        objective: q_row(&layout, pattern),
        equalities: Vec::new(),
        inequalities: Vec::new(),
        layout: Some(layout),
        lazy: Some(LazyFamily::WeakPositivity),
        pattern: Some(pattern),
    };
    p.equalities.push(LinearConstraint::eq(
        layout.mu_row(mask_of(&(0..N_ATOMS).collect::<Vec<_>>())),
        1.0,
    ));
    for pair in SettingPair::ALL {
        let cells: Vec<Vec<usize>> = (0..4).map(|k| cell_atoms(pair, k >> 1, k & 1)).collect();
        for u in 0..4 {
            for v in u + 1..4 {
                let (re, im) = layout.cross_rows(&cells[u], &cells[v]);
                p.equalities.push(LinearConstraint::eq(re, 0.0));
                if let Some(im) = im {
                    p.equalities.push(LinearConstraint::eq(im, 0.0));
                }
            }
        }
    }
    for x in 0..N_ATOMS {
        p.inequalities
            .push(LinearConstraint::ge(layout.mu_row(1 << x), 0.0));
    }
    for x in 0..N_ATOMS {
        for y in x + 1..N_ATOMS {
            p.inequalities
                .push(LinearConstraint::ge(layout.mu_row(1 << x | 1 << y), 0.0));
        }
    }
    for pair in SettingPair::ALL {
        for k in 0..4 {
            let mask = mask_of(&cell_atoms(pair, k >> 1, k & 1));
            p.inequalities
                .push(LinearConstraint::ge(layout.mu_row(mask), 0.0));
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LpOptions {
    /// Most-violated subsets added per round.
    pub cuts_per_round: usize,
    pub max_rounds: usize,
    pub max_pivots: usize,
    pub tol: f64,
    pub threads: usize,
    /// Also cut off negative eigenvectors, approximating strong positivity.
    /// Convergence is slow and the dense cuts eventually stall the simplex, so
    /// pair this with a small `max_rounds` (see [`LpOptions::strong_diagnostic`]).
    pub eigen_cuts: bool,
    /// Relative objective perturbation against degeneracy (0 disables it).
    pub perturbation: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            cuts_per_round: 64,
            max_rounds: 500,
            max_pivots: 2_000_000,
            tol: LP_TOL,
            threads: subsets::default_threads(),
            eigen_cuts: false,
            perturbation: 1e-9,
        }
    }
}

impl LpOptions {
    /// Eigenvector cuts with a 25-round cap.
    pub fn strong_diagnostic() -> Self {
        Self {
            eigen_cuts: true,
            max_rounds: 25,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub objective: f64,
    /// Smallest μ over all nonempty subsets of the candidate.
    pub min_mu: f64,
    pub min_eigenvalue: f64,
    pub cuts_added: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalCheck {
    pub min_mu: f64,
    pub min_mask: u64,
    pub subsets: u64,
    pub max_equality_residual: f64,
    pub max_listed_violation: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Simplex pivots over all rounds.
    pub iterations: usize,
    pub rounds: usize,
    pub cuts_generated: usize,
    pub history: Vec<RoundRecord>,
    /// The relaxation optimum never rose when cuts were added.
    pub monotone: bool,
    /// Every candidate with Q above the Tsirel'son bound had a negative eigenvalue.
    pub contrapositive_holds: bool,
    pub final_check: Option<FinalCheck>,
    #[serde(skip)]
    pub layout: Option<MatrixLayout>,
}

impl LpSolution {
    fn terminal(status: LpStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: vec![0.0; n],
            iterations,
            rounds: 0,
            cuts_generated: 0,
            history: Vec::new(),
            monotone: true,
            contrapositive_holds: true,
            final_check: None,
            layout: None,
        }
    }

    pub fn matrix(&self) -> Option<ComplexMatrix> {
        self.layout.map(|l| l.to_matrix(&self.x))
    }

    pub fn decoherence_functional(&self) -> Result<DecoherenceFunctional> {
        let m = self
            .matrix()
            .ok_or_else(|| QmtError::Lp("solution has no matrix layout".into()))?;
        DecoherenceFunctional::hermitian(&joint_space(), m)
    }
}

fn dual_columns(cons: &[LinearConstraint]) -> Vec<Column> {
    let mut cols = Vec::new();
    for c in cons {
        match c.sense {
            None => {
                cols.push(Column {
                    entries: c.coeffs.clone(),
                    cost: c.rhs,
                });
                cols.push(Column {
                    entries: c.coeffs.iter().map(|&(j, a)| (j, -a)).collect(),
                    cost: -c.rhs,
                });
            }
            Some(Sense::Le) => cols.push(Column {
                entries: c.coeffs.clone(),
                cost: c.rhs,
            }),
            Some(Sense::Ge) => cols.push(Column {
                entries: c.coeffs.iter().map(|&(j, a)| (j, -a)).collect(),
                cost: -c.rhs,
            }),
        }
    }
    cols
}

/// Whether the primal constraints admit any point, by the dual with a zero
/// objective (unbounded exactly when the primal is infeasible).
fn primal_feasible(p: &LpProblem, opts: &LpOptions) -> Result<bool> {
    let mut cols = dual_columns(&p.equalities);
    cols.extend(dual_columns(&p.inequalities));
    let mut s = Simplex::new(vec![0.0; p.n_vars()], cols, opts.max_pivots);
    Ok(s.solve()? != Outcome::Unbounded)
}

/// Solve `p`. Lazy weak-positivity constraints are generated round by round
/// from the exact subset scan until no subset has μ below `-tol`; the final
/// candidate is then re-checked against the whole family.
pub fn solve_lp(p: &LpProblem, opts: &LpOptions) -> Result<LpSolution> {
    p.validate()?;
    let n = p.n_vars();
    let mut cols = dual_columns(&p.equalities);
    let ineq = dual_columns(&p.inequalities);
    let rhs = perturbed(&p.objective, &ineq, opts.perturbation);
    cols.extend(ineq);
    let mut simplex = Simplex::new(rhs, cols, opts.max_pivots);

    let mut history = Vec::new();
    let mut monotone = true;
    let mut contrapositive = true;
    let mut cuts_generated = 0;
    let mut previous = f64::INFINITY;
    let mut round = 0;
    loop {
        match simplex.solve()? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Ok(LpSolution::terminal(
                    LpStatus::Infeasible,
                    n,
                    simplex.pivots,
                ))
            }
            Outcome::Infeasible => {
                let status = if primal_feasible(p, opts)? {
                    LpStatus::Unbounded
                } else {
                    LpStatus::Infeasible
                };
                return Ok(LpSolution::terminal(status, n, simplex.pivots));
            }
        }
        let x = simplex.multipliers();
        let objective = p.objective_value(&x);
        let relaxed = simplex.objective();
        if relaxed > previous + 1e-9 * previous.abs().max(1.0) {
            monotone = false;
        }
        previous = relaxed;

        let (Some(layout), Some(LazyFamily::WeakPositivity)) = (p.layout, p.lazy) else {
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                objective,
                x,
                iterations: simplex.pivots,
                rounds: 0,
                cuts_generated: 0,
                history,
                monotone,
                contrapositive_holds: contrapositive,
                final_check: None,
                layout: p.layout,
            });
        };

        let m = layout.to_matrix(&x);
        let re: Vec<f64> = m.as_slice().iter().map(|z| z.re).collect();
        let violated =
            subsets::most_violated(&re, N_ATOMS, opts.tol, opts.cuts_per_round, opts.threads);
        let eig = hermitian_eigen(&m)?;
        let min_eig = eig.values[0];
        let q = p.pattern.map_or(objective, |pat| {
            let diag = |mask: u64| subsets::subset_measure(&re, N_ATOMS, mask);
            let mut q = 0.0;
            for pair in SettingPair::ALL {
                for bi in 0..2 {
                    for bj in 0..2 {
                        let s = if bi == bj { 1.0 } else { -1.0 };
                        q += pat.sign(pair) * s * diag(mask_of(&cell_atoms(pair, bi, bj)));
                    }
                }
            }
            q
        });
        if q.abs() > TSIRELSON + 1e-9 && min_eig >= -default_zero_tol_for(&m) {
            contrapositive = false;
        }

        let mut new_cols: Vec<Column> = violated
            .iter()
            .map(|&(mask, _)| {
                let row = layout.mu_row(mask);
                Column {
                    entries: row.into_iter().map(|(j, a)| (j, -a)).collect(),
                    cost: 0.0,
                }
            })
            .collect();
        if opts.eigen_cuts {
            let mut vectors: Vec<Vec<Complex64>> = Vec::new();
            for (k, &v) in eig.values.iter().enumerate() {
                if v < -opts.tol {
                    vectors.push(eig.vector(k));
                }
            }
            // Negative directions of the Gram matrix of the four setting
            // vectors χ(s₊) − χ(s₋); these are the cuts that bring Q down.
            let gram = hermitian_eigen(&setting_gram(&m))?;
            for (k, &v) in gram.values.iter().enumerate() {
                if v < -opts.tol {
                    let w = gram.vector(k);
                    vectors.push(
                        (0..N_ATOMS)
                            .map(|x| (0..4).map(|s| w[s] * Setting::ALL[s].outcome(x)).sum())
                            .collect(),
                    );
                }
            }
            for v in vectors {
                new_cols.push(Column {
                    entries: layout
                        .quadratic_row(&v)
                        .into_iter()
                        .map(|(j, a)| (j, -a))
                        .collect(),
                    cost: 0.0,
                });
            }
        }
        let min_mu = violated.first().map_or_else(
            || subsets::scan(&re, N_ATOMS, opts.tol, opts.tol, opts.threads).min_mu,
            |&(_, mu)| mu,
        );
        history.push(RoundRecord {
            round,
            objective,
            min_mu,
            min_eigenvalue: min_eig,
            cuts_added: new_cols.len(),
        });
        round += 1;

        if new_cols.is_empty() || round >= opts.max_rounds {
            let full = subsets::scan(&re, N_ATOMS, opts.tol, opts.tol, opts.threads);
            let eq_res = p
                .equalities
                .iter()
                .map(|c| c.violation(&x))
                .fold(0.0, f64::max);
            let listed = p.max_violation(&x);
            let verified =
                new_cols.is_empty() && full.min_mu >= -opts.tol && eq_res <= 1e-8 && listed <= 1e-8;
            let final_check = FinalCheck {
                min_mu: full.min_mu,
                min_mask: full.min_mask,
                subsets: full.subsets,
                max_equality_residual: eq_res,
                max_listed_violation: listed,
                verified,
            };
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                objective,
                x,
                iterations: simplex.pivots,
                rounds: round,
                cuts_generated,
                history,
                monotone,
                contrapositive_holds: contrapositive,
                final_check: Some(final_check),
                layout: Some(layout),
            });
        }
        cuts_generated += new_cols.len();
        simplex.add_columns(new_cols);
    }
}

/// Dual right-hand side `c + Σ_k w_k·g_k` over the listed inequality
/// columns, with deterministic weights `w_k ∈ [eps, 2·eps)`. The shifted point
/// is a positive combination of existing columns, so the dual stays feasible
/// (the primal stays bounded), and because the starting cuts span every
/// coordinate the shift is generic enough to leave no degenerate vertex. The
/// primal point is read from the basis multipliers, so it remains exactly
/// feasible; its objective is below the perturbed one by at most
/// `Σ_k w_k·|slack_k|`.
fn perturbed(c: &[f64], cols: &[Column], eps: f64) -> Vec<f64> {
    let mut b = c.to_vec();
    if eps == 0.0 {
        return b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for col in cols {
        let w = eps * (1.0 + rng.gen::<f64>());
        for &(j, a) in &col.entries {
            b[j] += w * a;
        }
    }
    b
}

/// `G[s][t] = D(χ(s₊) − χ(s₋); χ(t₊) − χ(t₋))` for the settings a, a′, b, b′.
pub fn setting_gram(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(4, 4, |s, t| {
        let mut g = Complex64::new(0.0, 0.0);
        for x in 0..N_ATOMS {
            for y in 0..N_ATOMS {
                g += m[(x, y)] * (Setting::ALL[s].outcome(x) * Setting::ALL[t].outcome(y));
            }
        }
        g
    })
}

fn default_zero_tol_for(m: &ComplexMatrix) -> f64 {
    1e-10 * m.max_abs().max(1.0)
}

/// The weakly positive Q = 4 example: diagonal 1/2 at −−−−, +−+−, +−−+,
/// −+−+ and ten real off-diagonal entries ±1/4 (with their mirror images).
pub fn section5_example() -> DecoherenceFunctional {
    let at = |s: &str| crate::epr::parse_atom_label(s).expect("fixed label");
    let mut m = ComplexMatrix::zeros(N_ATOMS, N_ATOMS);
    for s in ["----", "+-+-", "+--+", "-+-+"] {
        m[(at(s), at(s))] = Complex64::new(0.5, 0.0);
    }
    let entries = [
        ("---+", "----", -1.0),
        ("+-+-", "+---", -1.0),
        ("-+-+", "-+--", 1.0),
        ("---+", "++--", 1.0),
        ("+--+", "++--", -1.0),
        ("-+-+", "++--", -1.0),
        ("+--+", "+-+-", 1.0),
        ("+--+", "---+", -1.0),
        ("-+-+", "---+", -1.0),
        ("-+-+", "+--+", 1.0),
    ];
    for (x, y, s) in entries {
        let v = Complex64::new(s / 4.0, 0.0);
        m[(at(x), at(y))] = v;
        m[(at(y), at(x))] = v;
    }
    DecoherenceFunctional::new(&joint_space(), m).expect("the example is Hermitian")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateAudit {
    pub hermiticity_defect: f64,
    pub hermitian: bool,
    pub total: f64,
    pub normalized: bool,
    pub max_marginal_off_diagonal: f64,
    pub marginals_diagonal: bool,
    pub weak: PositivityReport,
    pub strong: PositivityReport,
    pub signature: Signature,
    pub pattern: SignPattern,
    pub q: f64,
    pub q_by_pattern: Vec<(SignPattern, f64)>,
    pub max_q: (SignPattern, f64),
    pub signaling_defect: f64,
    pub one_sided: OneSidedMarginals,
    /// Q above the Tsirel'son bound only together with a strong-positivity failure.
    pub consistent_with_tsirelson: bool,
    pub tol: f64,
}

/// Audit a 16×16 candidate: axioms, marginals, both positivity notions, Q for
/// every pattern, non-signalling and one-sided marginals.
pub fn verify_candidate(m: &ComplexMatrix, pattern: SignPattern) -> Result<CandidateAudit> {
    verify_candidate_with(m, pattern, LP_TOL)
}

pub fn verify_candidate_with(
    m: &ComplexMatrix,
    pattern: SignPattern,
    tol: f64,
) -> Result<CandidateAudit> {
    if m.rows() != N_ATOMS || m.cols() != N_ATOMS {
        return Err(QmtError::DimensionMismatch {
            expected: N_ATOMS,
            got: m.rows(),
        });
    }
    if !m.is_finite() {
        return Err(QmtError::NonFinite);
    }
    let defect = m.hermiticity_defect();
    // Audit the Hermitian part so the remaining checks are well defined.
    let herm = (m + &m.adjoint()).scale(Complex64::new(0.5, 0.0));
    let df = DecoherenceFunctional::hermitian(&joint_space(), herm)?;
    let total = df.total().re;
    let blocks = marginals(&df)?;
    let max_off = blocks
        .iter()
        .map(|b| b.max_off_diagonal())
        .fold(0.0, f64::max);
    let mut diag = [[[0.0; 2]; 2]; 4];
    for (k, b) in blocks.iter().enumerate() {
        diag[k] = b.diagonal();
    }
    let probs = ExperimentalProbabilities::from_raw(diag);
    let weak = check_weak_positivity_with(&df, WEAK_VIOLATION_TOL, subsets::default_threads())?;
    let strong = check_strong_positivity(&df)?;
    let signature = eigensignature(&df, default_zero_tol(&df))?;
    let q = crate::epr::chsh_q(&probs, pattern);
    let max_q = max_chsh_q(&probs);
    let one_sided = one_sided_marginals(&probs);
    Ok(CandidateAudit {
        hermiticity_defect: defect,
        hermitian: defect <= 1e-10,
        total,
        normalized: (total - 1.0).abs() <= 1e-10,
        max_marginal_off_diagonal: max_off,
        marginals_diagonal: max_off <= tol,
        consistent_with_tsirelson: max_q.1.abs() <= TSIRELSON + tol || !strong.holds,
        weak,
        strong,
        signature,
        pattern,
        q,
        q_by_pattern: q_by_pattern(&probs),
        max_q,
        signaling_defect: one_sided.signaling_defect(),
        one_sided,
        tol,
    })
}
