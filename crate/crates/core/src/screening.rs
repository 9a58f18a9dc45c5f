//! Screening off: structured models with settings, outcomes and past cells,
//! the classical and quantal screening conditions, the joint measure built
//! from a screening model, and the augmented models that realise a joint
//! measure causally.
//!
//! Atoms are tuples `(α, i, β, j, c)`; the index is
//! `(8α + 4·b(i) + 2β + b(j))·|C| + c` with α = 0 for a, 1 for a′ and
//! likewise for β.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::epr::{
    atom_label, experimental_probabilities, joint_space, ExperimentalProbabilities, Setting,
    SettingPair, N_ATOMS,
};
use crate::error::{QmtError, Result};
use crate::linalg::{ComplexMatrix, C0};
use crate::measure::{
    check_strong_positivity, default_zero_tol, ClassicalMeasure, DecoherenceFunctional, Event,
    Measure, SampleSpace,
};

/// Default residual tolerance for every screening condition.
pub const SCREENING_TOL: f64 = 1e-10;
/// Measures at or below this are treated as zero when conditioning.
pub const ZERO_MEASURE: f64 = 1e-12;

/// Index of the 16 setting/outcome cells `8α + 4·b(i) + 2β + b(j)`.
pub fn cell(alpha: usize, bi: usize, beta: usize, bj: usize) -> usize {
    8 * alpha + 4 * bi + 2 * beta + bj
}

/// `μ(α ∩ β)` for the four setting pairs, in setting-pair order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SettingWeights {
    w: [f64; 4],
}

impl SettingWeights {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(QmtError::InvalidWeight(format!(
                "setting weights must be positive, got {w:?}"
            )));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(QmtError::InvalidWeight(format!(
                "setting weights sum to {total}"
            )));
        }
        Ok(Self { w })
    }

    /// `μ(α ∩ β) = μ_A(α)·μ_B(β)`.
    pub fn product(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        let mut w = [0.0; 4];
        for pair in SettingPair::ALL {
            w[pair.index()] = a[pair.alpha] * b[pair.beta];
        }
        Self::new(w)
    }

    pub fn uniform() -> Self {
        Self { w: [0.25; 4] }
    }

    pub fn get(&self, pair: SettingPair) -> f64 {
        self.w[pair.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.w
    }

    /// `μ(α)` for α = a, a′.
    pub fn alpha_marginal(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for pair in SettingPair::ALL {
            m[pair.alpha] += self.get(pair);
        }
        m
    }

    /// `μ(β)` for β = b, b′.
    pub fn beta_marginal(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for pair in SettingPair::ALL {
            m[pair.beta] += self.get(pair);
        }
        m
    }

    /// Largest `|μ(α∩β) − μ(α)μ(β)|`.
    pub fn product_defect(&self) -> f64 {
        let (a, b) = (self.alpha_marginal(), self.beta_marginal());
        SettingPair::ALL
            .iter()
            .map(|&p| (self.get(p) - a[p.alpha] * b[p.beta]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelMeasure {
    Classical(ClassicalMeasure),
    Quantal(DecoherenceFunctional),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredModel {
    space: Arc<SampleSpace>,
    past: Vec<String>,
    measure: ModelMeasure,
}

fn model_space(past: &[String]) -> Result<Arc<SampleSpace>> {
    if past.is_empty() {
        return Err(QmtError::InvalidModel(
            "at least one past cell is required".into(),
        ));
    }
    let mut labels = Vec::with_capacity(16 * past.len());
    for cell_index in 0..16 {
        let (alpha, bi, beta, bj) = (
            cell_index >> 3,
            cell_index >> 2 & 1,
            cell_index >> 1 & 1,
            cell_index & 1,
        );
        let a = [Setting::A, Setting::APrime][alpha];
        let b = [Setting::B, Setting::BPrime][beta];
        let s = |bit: usize| if bit == 0 { '+' } else { '-' };
        for c in past {
            labels.push(format!("{a}{}{b}{}|{c}", s(bi), s(bj)));
        }
    }
    SampleSpace::new(labels).map_err(|e| QmtError::InvalidModel(format!("past labels: {e}")))
}

impl StructuredModel {
    pub fn classical(past: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let space = model_space(&past)?;
        let measure = ClassicalMeasure::new(&space, weights)?;
        Ok(Self {
            space,
            past,
            measure: ModelMeasure::Classical(measure),
        })
    }

    /// Weights from `f(pair, b(i), b(j), c)`.
    pub fn classical_from_fn(
        past: Vec<String>,
        mut f: impl FnMut(SettingPair, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let nc = past.len();
        let mut w = vec![0.0; 16 * nc];
        for pair in SettingPair::ALL {
            for bi in 0..2 {
                for bj in 0..2 {
                    for c in 0..nc {
                        w[cell(pair.alpha, bi, pair.beta, bj) * nc + c] = f(pair, bi, bj, c);
                    }
                }
            }
        }
        Self::classical(past, w)
    }

    pub fn quantal(past: Vec<String>, matrix: ComplexMatrix) -> Result<Self> {
        let space = model_space(&past)?;
        let df = DecoherenceFunctional::new(&space, matrix)?;
        Ok(Self {
            space,
            past,
            measure: ModelMeasure::Quantal(df),
        })
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn past(&self) -> &[String] {
        &self.past
    }

    pub fn n_past(&self) -> usize {
        self.past.len()
    }

    pub fn measure(&self) -> &ModelMeasure {
        &self.measure
    }

    pub fn atom(&self, pair: SettingPair, bi: usize, bj: usize, c: usize) -> usize {
        cell(pair.alpha, bi, pair.beta, bj) * self.past.len() + c
    }

    /// The same model seen as a decoherence functional (diagonal when classical).
    pub fn decoherence_functional(&self) -> DecoherenceFunctional {
        match &self.measure {
            ModelMeasure::Classical(m) => DecoherenceFunctional::from_classical(m),
            ModelMeasure::Quantal(d) => d.clone(),
        }
    }

    fn event(&self, keep: impl Fn(usize, usize, usize, usize, usize) -> bool) -> Event {
        let nc = self.past.len();
        Event::from_predicate(&self.space, |x| {
            let (cl, c) = (x / nc, x % nc);
            keep(cl >> 3, cl >> 2 & 1, cl >> 1 & 1, cl & 1, c)
        })
    }

    fn mu(&self, e: &Event) -> f64 {
        match &self.measure {
            ModelMeasure::Classical(m) => m.measure(e),
            ModelMeasure::Quantal(d) => d.mu(e),
        }
        .expect("events are built on the model's own space")
    }

    /// Setting weights implied by the model.
    pub fn setting_weights(&self) -> Result<SettingWeights> {
        let mut w = [0.0; 4];
        let total = self.mu(&Event::full(&self.space));
        for pair in SettingPair::ALL {
            w[pair.index()] =
                self.mu(&self.event(|a, _, b, _, _| a == pair.alpha && b == pair.beta)) / total;
        }
        SettingWeights::new(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub residual: f64,
    pub holds: bool,
    pub skipped: bool,
}

impl Condition {
    fn check(name: &str, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            holds: residual <= tol,
            skipped: false,
        }
    }

    fn skipped(name: &str) -> Self {
        Self {
            name: name.into(),
            residual: 0.0,
            holds: true,
            skipped: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScreeningOptions {
    pub tol: f64,
    /// Treat the four setting pairs as separately conditioned tables and skip
    /// every condition that needs probabilities of the settings themselves.
    pub minimalist: bool,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            tol: SCREENING_TOL,
            minimalist: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub conditions: Vec<Condition>,
    /// Number of past-cell pairs where `D(c; c̄)` vanishes but the block of
    /// setting/outcome entries does not (quantal only).
    pub degenerate_past_pairs: usize,
    pub holds: bool,
}

impl ScreeningReport {
    fn new(conditions: Vec<Condition>, degenerate_past_pairs: usize) -> Self {
        let holds = conditions.iter().all(|c| c.holds);
        Self {
            conditions,
            degenerate_past_pairs,
            holds,
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.conditions
            .iter()
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}

/// Classical weights as `w[α][b(i)][β][b(j)][c]`.
struct Table {
    nc: usize,
    w: Vec<f64>,
}

impl Table {
    fn get(&self, a: usize, i: usize, b: usize, j: usize, c: usize) -> f64 {
        self.w[cell(a, i, b, j) * self.nc + c]
    }

    fn past(&self, c: usize) -> f64 {
        (0..16).map(|k| self.w[k * self.nc + c]).sum()
    }

    /// `μ(α_i ∩ c)`.
    fn a_out(&self, a: usize, i: usize, c: usize) -> f64 {
        let mut s = 0.0;
        for b in 0..2 {
            for j in 0..2 {
                s += self.get(a, i, b, j, c);
            }
        }
        s
    }

    /// `μ(β_j ∩ c)`.
    fn b_out(&self, b: usize, j: usize, c: usize) -> f64 {
        let mut s = 0.0;
        for a in 0..2 {
            for i in 0..2 {
                s += self.get(a, i, b, j, c);
            }
        }
        s
    }

    /// `μ(α ∩ β ∩ c)`.
    fn pair_past(&self, a: usize, b: usize, c: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += self.get(a, i, b, j, c);
            }
        }
        s
    }
}

fn classical_table(m: &StructuredModel) -> Result<Table> {
    match &m.measure {
        ModelMeasure::Classical(mu) => Ok(Table {
            nc: m.n_past(),
            w: mu.weights().to_vec(),
        }),
        ModelMeasure::Quantal(_) => {
            Err(QmtError::InvalidModel("expected a classical model".into()))
        }
    }
}

/// Outcome screening, setting screening, staged factorisation, setting-pair
/// independence from the past and setting independence, each with its worst
/// residual. In minimalist mode only the per-table factorisation and the
/// locality of one-sided conditionals are checked.
pub fn check_classical_screening(m: &StructuredModel) -> Result<ScreeningReport> {
    check_classical_screening_with(m, ScreeningOptions::default())
}

pub fn check_classical_screening_with(
    m: &StructuredModel,
    opts: ScreeningOptions,
) -> Result<ScreeningReport> {
    let t = classical_table(m)?;
    let nc = t.nc;
    let total: f64 = t.w.iter().sum();
    let mut mu_c = vec![0.0; nc];
    for (c, slot) in mu_c.iter_mut().enumerate() {
        *slot = t.past(c);
        if *slot <= ZERO_MEASURE {
            return Err(QmtError::ConditionUndefined { measure: *slot });
        }
    }
    let tol = opts.tol;

    if opts.minimalist {
        let mut factor: f64 = 0.0;
        let mut local: f64 = 0.0;
        for c in 0..nc {
            let mut pa = [[[0.0; 2]; 2]; 2];
            let mut pb = [[[0.0; 2]; 2]; 2];
            for pair in SettingPair::ALL {
                let (a, b) = (pair.alpha, pair.beta);
                let z = t.pair_past(a, b, c);
                if z <= ZERO_MEASURE {
                    continue;
                }
                for i in 0..2 {
                    pa[a][b][i] = (t.get(a, i, b, 0, c) + t.get(a, i, b, 1, c)) / z;
                    pb[b][a][i] = (t.get(a, 0, b, i, c) + t.get(a, 1, b, i, c)) / z;
                }
                for i in 0..2 {
                    for j in 0..2 {
                        factor = factor
                            .max((t.get(a, i, b, j, c) / z - pa[a][b][i] * pb[b][a][j]).abs());
                    }
                }
            }
            for s in 0..2 {
                for o in 0..2 {
                    if t.pair_past(s, 0, c) > ZERO_MEASURE && t.pair_past(s, 1, c) > ZERO_MEASURE {
                        local = local.max((pa[s][0][o] - pa[s][1][o]).abs());
                    }
                    if t.pair_past(0, s, c) > ZERO_MEASURE && t.pair_past(1, s, c) > ZERO_MEASURE {
                        local = local.max((pb[s][0][o] - pb[s][1][o]).abs());
                    }
                }
            }
        }
        return Ok(ScreeningReport::new(
            vec![
                Condition::check("conditional_factorization", factor, tol),
                Condition::check("local_marginals", local, tol),
                Condition::skipped("outcome_screening"),
                Condition::skipped("setting_screening"),
                Condition::skipped("staged_factorization"),
                Condition::skipped("setting_pair_independence"),
                Condition::skipped("setting_independence"),
            ],
            0,
        ));
    }

    let mut outcome: f64 = 0.0;
    let mut setting: f64 = 0.0;
    let mut staged: f64 = 0.0;
    let mut pair_indep: f64 = 0.0;
    let mut indep: f64 = 0.0;
    let mu_pair: Vec<f64> = SettingPair::ALL
        .iter()
        .map(|p| {
            (0..nc)
                .map(|c| t.pair_past(p.alpha, p.beta, c))
                .sum::<f64>()
                / total
        })
        .collect();
    let mut mu_alpha = [0.0; 2];
    let mut mu_beta = [0.0; 2];
    for p in SettingPair::ALL {
        mu_alpha[p.alpha] += mu_pair[p.index()];
        mu_beta[p.beta] += mu_pair[p.index()];
    }
    for c in 0..nc {
        let mc = mu_c[c];
        let alpha_c = [0, 1].map(|a| t.a_out(a, 0, c) + t.a_out(a, 1, c));
        let beta_c = [0, 1].map(|b| t.b_out(b, 0, c) + t.b_out(b, 1, c));
        for a in 0..2 {
            indep = indep.max((alpha_c[a] / mc - mu_alpha[a]).abs());
        }
        for b in 0..2 {
            indep = indep.max((beta_c[b] / mc - mu_beta[b]).abs());
        }
        for pair in SettingPair::ALL {
            let (a, b) = (pair.alpha, pair.beta);
            let abc = t.pair_past(a, b, c);
            setting = setting.max((abc / mc - (alpha_c[a] / mc) * (beta_c[b] / mc)).abs());
            pair_indep = pair_indep.max((abc / total - mu_pair[pair.index()] * mc / total).abs());
            for i in 0..2 {
                for j in 0..2 {
                    let joint = t.get(a, i, b, j, c);
                    let (ai, bj) = (t.a_out(a, i, c), t.b_out(b, j, c));
                    outcome = outcome.max((joint / mc - (ai / mc) * (bj / mc)).abs());
                    if abc > ZERO_MEASURE && alpha_c[a] > ZERO_MEASURE && beta_c[b] > ZERO_MEASURE {
                        staged =
                            staged.max((joint / abc - (ai / alpha_c[a]) * (bj / beta_c[b])).abs());
                    }
                }
            }
        }
    }
    Ok(ScreeningReport::new(
        vec![
            Condition::check("outcome_screening", outcome, tol),
            Condition::check("setting_screening", setting, tol),
            Condition::check("staged_factorization", staged, tol),
            Condition::check("setting_pair_independence", pair_indep, tol),
            Condition::check("setting_independence", indep, tol),
        ],
        0,
    ))
}

/// Joint measure on the 16-atom space from the maximal independence ansatz
/// `μ̂(ii′jj′) = Σ_c μ(a_i|a∩c) μ(a′_{i′}|a′∩c) μ(b_j|b∩c) μ(b′_{j′}|b′∩c) μ(c)`.
pub fn joint_from_screening(m: &StructuredModel) -> Result<ClassicalMeasure> {
    let report = check_classical_screening(m)?;
    if !report.holds {
        let worst = report
            .conditions
            .iter()
            .find(|c| !c.holds)
            .map(|c| c.name.clone())
            .unwrap_or_default();
        return Err(QmtError::InvalidModel(format!(
            "model does not screen off ({worst} fails)"
        )));
    }
    let t = classical_table(m)?;
    let total: f64 = t.w.iter().sum();
    let mut w = vec![0.0; N_ATOMS];
    for c in 0..t.nc {
        let mc = t.past(c) / total;
        let mut cond_a = [[0.0; 2]; 2];
        let mut cond_b = [[0.0; 2]; 2];
        for s in 0..2 {
            let za = t.a_out(s, 0, c) + t.a_out(s, 1, c);
            let zb = t.b_out(s, 0, c) + t.b_out(s, 1, c);
            if za <= ZERO_MEASURE || zb <= ZERO_MEASURE {
                return Err(QmtError::ConditionUndefined {
                    measure: za.min(zb),
                });
            }
            for o in 0..2 {
                cond_a[s][o] = t.a_out(s, o, c) / za;
                cond_b[s][o] = t.b_out(s, o, c) / zb;
            }
        }
        for (x, slot) in w.iter_mut().enumerate() {
            let (i, ip, j, jp) = (x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1);
            *slot += cond_a[0][i] * cond_a[1][ip] * cond_b[0][j] * cond_b[1][jp] * mc;
        }
    }
    ClassicalMeasure::new(&joint_space(), w)
}

/// `p(α_i, β_j) = μ(α_i ∩ β_j) / μ(α ∩ β)`, using the quantal measure of the
/// events when the model is quantal.
pub fn conditional_experimental_probabilities(
    m: &StructuredModel,
) -> Result<ExperimentalProbabilities> {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for pair in SettingPair::ALL {
        let (a, b) = (pair.alpha, pair.beta);
        let z = m.mu(&m.event(|x, _, y, _, _| x == a && y == b));
        if z <= ZERO_MEASURE {
            return Err(QmtError::InvalidWeight(format!(
                "setting pair {pair} has measure {z:.3e}"
            )));
        }
        for i in 0..2 {
            for j in 0..2 {
                p[a][b][i][j] =
                    m.mu(&m.event(|x, ii, y, jj, _| x == a && ii == i && y == b && jj == j)) / z;
            }
        }
    }
    ExperimentalProbabilities::new(p)
}

fn check_product_weights(w: &SettingWeights) -> Result<()> {
    let defect = w.product_defect();
    if defect > 1e-12 {
        return Err(QmtError::InvalidWeight(format!(
            "setting weights must factorise as μ(α)μ(β) (defect {defect:.3e})"
        )));
    }
    Ok(())
}

fn past_labels(kept: &[usize]) -> Vec<String> {
    kept.iter().map(|&k| atom_label(k)).collect()
}

/// Augmented classical model with the joint outcomes of positive weight as
/// past cells:
/// `μ̃(α_i ∩ β_j ∩ {K}) = μ(α∩β)·μ̂(K)·[i = K_α]·[j = K_β]`.
pub fn augment_classical(mu_hat: &ClassicalMeasure, w: &SettingWeights) -> Result<StructuredModel> {
    if mu_hat.space().n_atoms() != N_ATOMS {
        return Err(QmtError::DimensionMismatch {
            expected: N_ATOMS,
            got: mu_hat.space().n_atoms(),
        });
    }
    if !mu_hat.is_normalized() {
        return Err(QmtError::InvalidMeasure(format!(
            "total weight {} is not 1",
            mu_hat.total()
        )));
    }
    check_product_weights(w)?;
    let kept: Vec<usize> = (0..N_ATOMS).filter(|&k| mu_hat.weight(k) > 0.0).collect();
    StructuredModel::classical_from_fn(past_labels(&kept), |pair, bi, bj, c| {
        let k = kept[c];
        let ka = k >> pair.alpha_setting().shift() & 1;
        let kb = k >> pair.beta_setting().shift() & 1;
        if bi == ka && bj == kb {
            w.get(pair) * mu_hat.weight(k)
        } else {
            0.0
        }
    })
}

/// Augmented quantal model: entries diagonal in the settings,
/// `D̃(α_i β_j K; α_m β_n P) = μ(α∩β)·[i=K_α][j=K_β][m=P_α][n=P_β]·D̂(K; P)`.
pub fn augment_quantal(
    df_hat: &DecoherenceFunctional,
    w: &SettingWeights,
) -> Result<StructuredModel> {
    if df_hat.n_atoms() != N_ATOMS {
        return Err(QmtError::DimensionMismatch {
            expected: N_ATOMS,
            got: df_hat.n_atoms(),
        });
    }
    check_product_weights(w)?;
    let strong = check_strong_positivity(df_hat)?;
    if !strong.holds {
        return Err(QmtError::NotStronglyPositive {
            eigenvalue: strong.minimum,
        });
    }
    experimental_probabilities(df_hat)?;
    // A vanishing diagonal entry forces the whole row to vanish.
    let zero = default_zero_tol(df_hat);
    let kept: Vec<usize> = (0..N_ATOMS)
        .filter(|&k| df_hat.entry(k, k).re > zero)
        .collect();
    let nc = kept.len();
    let n = 16 * nc;
    let mut m = ComplexMatrix::zeros(n, n);
    for pair in SettingPair::ALL {
        let (sa, sb) = (pair.alpha_setting().shift(), pair.beta_setting().shift());
        let weight = w.get(pair);
        for (ck, &k) in kept.iter().enumerate() {
            let x = cell(pair.alpha, k >> sa & 1, pair.beta, k >> sb & 1) * nc + ck;
            for (cp, &p) in kept.iter().enumerate() {
                let y = cell(pair.alpha, p >> sa & 1, pair.beta, p >> sb & 1) * nc + cp;
                m[(x, y)] = df_hat.entry(k, p) * weight;
            }
        }
    }
    StructuredModel::quantal(past_labels(&kept), m)
}

/// Quantal screening: the cross-product identity for every pair of settings
/// (including settings that differ between the two arguments) and past
/// cells; the 2×2 minors of each past-pair block; a rank-one factorisation
/// certificate of each block; setting independence; and vanishing of entries
/// off-diagonal in the settings.
pub fn check_quantal_screening(m: &StructuredModel) -> Result<ScreeningReport> {
    check_quantal_screening_with(m, ScreeningOptions::default())
}

pub fn check_quantal_screening_with(
    m: &StructuredModel,
    opts: ScreeningOptions,
) -> Result<ScreeningReport> {
    let df = m.decoherence_functional();
    let nc = m.n_past();
    let tol = opts.tol;
    // Coarse sums: D(c; c̄), D(α_i c; ᾱ_k c̄) and D(β_j c; β̄_l c̄). A-events
    // and B-events are indexed 2α + b(i) (resp. 2β + b(j)).
    let mut dc = vec![C0; nc * nc];
    let mut da = vec![C0; 16 * nc * nc];
    let mut db = vec![C0; 16 * nc * nc];
    let mut off_setting: f64 = 0.0;
    let split = |x: usize| {
        let (cl, c) = (x / nc, x % nc);
        (cl >> 2, cl & 3, c)
    };
    let n = df.n_atoms();
    for x in 0..n {
        let (ax, bx, cx) = split(x);
        for y in 0..n {
            let v = df.entry(x, y);
            if v == C0 {
                continue;
            }
            let (ay, by, cy) = split(y);
            dc[cx * nc + cy] += v;
            da[((ax * 4 + ay) * nc + cx) * nc + cy] += v;
            db[((bx * 4 + by) * nc + cx) * nc + cy] += v;
            if ax >> 1 != ay >> 1 || bx >> 1 != by >> 1 {
                off_setting = off_setting.max(v.norm());
            }
        }
    }

    let mut screening: f64 = 0.0;
    let mut minors: f64 = 0.0;
    let mut factor: f64 = 0.0;
    let mut degenerate = 0;
    let scale = df.scale();
    for c in 0..nc {
        for cb in 0..nc {
            let d_cc = dc[c * nc + cb];
            // block[(A, Ā)][(B, B̄)] = D(A B c; Ā B̄ c̄)
            let mut block = [[C0; 16]; 16];
            for ea in 0..4 {
                for eb in 0..4 {
                    let x = (ea * 4 + eb) * nc + c;
                    for fa in 0..4 {
                        for fb in 0..4 {
                            let y = (fa * 4 + fb) * nc + cb;
                            block[ea * 4 + fa][eb * 4 + fb] = df.entry(x, y);
                        }
                    }
                }
            }
            let same_setting =
                |r: usize, s: usize| (r >> 3 == (r >> 1) & 1) && (s >> 3 == (s >> 1) & 1);
            for r in 0..16 {
                for s in 0..16 {
                    if opts.minimalist && !same_setting(r, s) {
                        continue;
                    }
                    let lhs = block[r][s] * d_cc;
                    let rhs = da[(r * nc + c) * nc + cb] * db[(s * nc + c) * nc + cb];
                    screening = screening.max((lhs - rhs).norm());
                }
            }
            for r1 in 0..16 {
                for r2 in r1 + 1..16 {
                    for s1 in 0..16 {
                        for s2 in s1 + 1..16 {
                            let det = block[r1][s1] * block[r2][s2] - block[r2][s1] * block[r1][s2];
                            minors = minors.max(det.norm());
                        }
                    }
                }
            }
            let (res, nonzero) = rank_one_residual(&block);
            factor = factor.max(res);
            if d_cc.norm() <= tol * scale && nonzero {
                degenerate += 1;
            }
        }
    }

    let mut conditions = vec![
        Condition::check("quantal_screening", screening, tol),
        Condition::check("product_minors", minors, tol),
        Condition::check("product_factorization", factor, tol),
    ];
    if opts.minimalist {
        conditions.push(Condition::skipped("setting_independence"));
        conditions.push(Condition::skipped("setting_diagonality"));
    } else {
        let mu_a = [0, 1].map(|a| m.mu(&m.event(|x, _, _, _, _| x == a)));
        let mu_b = [0, 1].map(|b| m.mu(&m.event(|_, _, y, _, _| y == b)));
        let mut indep: f64 = 0.0;
        for pair in SettingPair::ALL {
            let (a, b) = (pair.alpha, pair.beta);
            for c in 0..nc {
                for cb in 0..nc {
                    let mut s = C0;
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                for l in 0..2 {
                                    s += df.entry(
                                        cell(a, i, b, j) * nc + c,
                                        cell(a, k, b, l) * nc + cb,
                                    );
                                }
                            }
                        }
                    }
                    indep = indep.max((s - dc[c * nc + cb] * (mu_a[a] * mu_b[b])).norm());
                }
            }
        }
        conditions.push(Condition::check("setting_independence", indep, tol));
        conditions.push(Condition::check("setting_diagonality", off_setting, tol));
    }
    Ok(ScreeningReport::new(conditions, degenerate))
}

/// `max |M − f gᵀ|` for the rank-one factorisation through the largest entry,
/// and whether the block has any nonzero entry.
fn rank_one_residual(block: &[[Complex64; 16]; 16]) -> (f64, bool) {
    let mut best = (0, 0, 0.0);
    for (r, row) in block.iter().enumerate() {
        for (s, v) in row.iter().enumerate() {
            if v.norm() > best.2 {
                best = (r, s, v.norm());
            }
        }
    }
    if best.2 == 0.0 {
        return (0.0, false);
    }
    let (pr, ps) = (best.0, best.1);
    let pivot = block[pr][ps];
    let mut worst: f64 = 0.0;
    for (r, row) in block.iter().enumerate() {
        for (s, v) in row.iter().enumerate() {
            let approx = block[r][ps] * block[pr][s] / pivot;
            worst = worst.max((v - approx).norm());
        }
    }
    (worst, true)
}

/// A random model that screens off by construction: product setting weights,
/// `|C|` past cells with random weights, and outcomes drawn independently on
/// each side given the local setting and the past cell.
pub fn random_screening_model<R: Rng + ?Sized>(
    rng: &mut R,
    n_past: usize,
) -> Result<StructuredModel> {
    let wa = rng.gen_range(0.1..0.9);
    let wb = rng.gen_range(0.1..0.9);
    let w = SettingWeights::product([wa, 1.0 - wa], [wb, 1.0 - wb])?;
    let mut mu_c: Vec<f64> = (0..n_past).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = mu_c.iter().sum();
    mu_c.iter_mut().for_each(|v| *v /= total);
    let pa: Vec<[f64; 2]> = (0..n_past)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let pb: Vec<[f64; 2]> = (0..n_past)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let past = (0..n_past).map(|c| format!("c{c}")).collect();
    StructuredModel::classical_from_fn(past, |pair, bi, bj, c| {
        let p_i = pa[c][pair.alpha];
        let p_j = pb[c][pair.beta];
        let fi = if bi == 0 { p_i } else { 1.0 - p_i };
        let fj = if bj == 0 { p_j } else { 1.0 - p_j };
        w.get(pair) * mu_c[c] * fi * fj
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epr::{classical_joint_marginals, max_chsh_q};
    use crate::quantum::{d_sym, random_commuting_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_past() -> Vec<String> {
        vec!["c".into()]
    }

    #[test]
    fn product_measure_screens_off() {
        let m = StructuredModel::classical_from_fn(
            vec!["c0".into(), "c1".into()],
            |pair, bi, bj, c| {
                let sa = [0.4, 0.6][pair.alpha] * [0.3, 0.7][bi];
                let sb = [0.5, 0.5][pair.beta] * [0.9, 0.1][bj];
                sa * sb * [0.25, 0.75][c]
            },
        )
        .unwrap();
        let r = check_classical_screening(&m).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.max_residual() < 1e-15);
    }

    #[test]
    fn past_dependent_correlation_violates_outcome_screening() {
        // Given c0 the outcomes are perfectly correlated, given c1 anticorrelated.
        let m =
            StructuredModel::classical_from_fn(vec!["c0".into(), "c1".into()], |_, bi, bj, c| {
                let agree = bi == bj;
                let w = if (c == 0) == agree { 0.5 } else { 0.0 };
                0.25 * 0.5 * w
            })
            .unwrap();
        let r = check_classical_screening(&m).unwrap();
        assert!(!r.holds);
        // μ(α_i β_j | c) = 1/8 or 0 against μ(α_i|c) μ(β_j|c) = 1/16.
        assert!((r.condition("outcome_screening").unwrap().residual - 1.0 / 16.0).abs() < 1e-15);
        assert!(r.condition("setting_independence").unwrap().holds);
    }

    #[test]
    fn zero_past_cell_is_an_error() {
        let m = StructuredModel::classical_from_fn(vec!["c0".into(), "c1".into()], |_, _, _, c| {
            if c == 0 {
                1.0 / 16.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(matches!(
            check_classical_screening(&m),
            Err(QmtError::ConditionUndefined { .. })
        ));
    }

    #[test]
    fn deterministic_past_gives_point_mass() {
        // Outcomes forced to (+, −, −, +) for (a, a′, b, b′).
        let forced = [0usize, 1, 1, 0];
        let m = StructuredModel::classical_from_fn(single_past(), |pair, bi, bj, _| {
            let ok = bi == forced[pair.alpha] && bj == forced[2 + pair.beta];
            if ok {
                0.25
            } else {
                0.0
            }
        })
        .unwrap();
        let mu = joint_from_screening(&m).unwrap();
        let target = 8 * forced[0] + 4 * forced[1] + 2 * forced[2] + forced[3];
        for x in 0..16 {
            assert_eq!(mu.weight(x), if x == target { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn bernoulli_product_joint() {
        let q = 0.3;
        let m = StructuredModel::classical_from_fn(single_past(), |_, bi, bj, _| {
            let f = |b: usize| if b == 0 { q } else { 1.0 - q };
            0.25 * f(bi) * f(bj)
        })
        .unwrap();
        let mu = joint_from_screening(&m).unwrap();
        for x in 0usize..16 {
            let plus = 4 - x.count_ones() as i32;
            let want = q.powi(plus) * (1.0 - q).powi(4 - plus);
            assert!((mu.weight(x) - want).abs() < 1e-15);
        }
    }

    /// Oracle: brute-force conditionals from the raw weights.
    #[test]
    fn random_model_marginals_match_conditionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n_past in 1..=4 {
            let m = random_screening_model(&mut rng, n_past).unwrap();
            let mu = joint_from_screening(&m).unwrap();
            let from_joint = classical_joint_marginals(&mu).unwrap();
            let ModelMeasure::Classical(cm) = m.measure() else {
                unreachable!()
            };
            for pair in SettingPair::ALL {
                let mut z = 0.0;
                let mut num = [[0.0; 2]; 2];
                for bi in 0..2 {
                    for bj in 0..2 {
                        for c in 0..n_past {
                            let v = cm.weight(m.atom(pair, bi, bj, c));
                            num[bi][bj] += v;
                            z += v;
                        }
                    }
                }
                for bi in 0..2 {
                    for bj in 0..2 {
                        let want = num[bi][bj] / z;
                        let got = from_joint.block(pair)[bi][bj];
                        assert!((want - got).abs() < 1e-12);
                    }
                }
            }
            assert!(max_chsh_q(&from_joint).1 <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn non_screening_model_has_no_joint() {
        let m =
            StructuredModel::classical_from_fn(vec!["c0".into(), "c1".into()], |_, bi, bj, c| {
                if (c == 0) == (bi == bj) {
                    1.0 / 16.0
                } else {
                    0.0
                }
            })
            .unwrap();
        assert!(joint_from_screening(&m).is_err());
    }

    #[test]
    fn augmenting_uniform_and_point_mass() {
        let s = joint_space();
        let uniform = ClassicalMeasure::uniform(&s);
        let m = augment_classical(&uniform, &SettingWeights::uniform()).unwrap();
        assert!(check_classical_screening(&m).unwrap().holds);
        let mut w = vec![0.0; 16];
        w[9] = 1.0;
        let point = ClassicalMeasure::new(&s, w).unwrap();
        let m = augment_classical(
            &point,
            &SettingWeights::product([0.2, 0.8], [0.6, 0.4]).unwrap(),
        )
        .unwrap();
        assert!(check_classical_screening(&m).unwrap().holds);
        let p = conditional_experimental_probabilities(&m).unwrap();
        assert_eq!(p, classical_joint_marginals(&point).unwrap());
    }

    #[test]
    fn non_product_weights_rejected() {
        let w = SettingWeights::new([0.4, 0.1, 0.1, 0.4]).unwrap();
        assert!(w.product_defect() > 0.1);
        let uniform = ClassicalMeasure::uniform(&joint_space());
        assert!(matches!(
            augment_classical(&uniform, &w),
            Err(QmtError::InvalidWeight(_))
        ));
        assert!(SettingWeights::new([0.5, 0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn round_trip_preserves_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_screening_model(&mut rng, 3).unwrap();
        let before = conditional_experimental_probabilities(&m).unwrap();
        let mu = joint_from_screening(&m).unwrap();
        let aug = augment_classical(&mu, &m.setting_weights().unwrap()).unwrap();
        assert!(check_classical_screening(&aug).unwrap().holds);
        let after = conditional_experimental_probabilities(&aug).unwrap();
        assert!(before.max_abs_diff(&after) < 1e-12);
    }

    #[test]
    fn minimalist_mode_skips_setting_conditions() {
        // Settings correlated with the past: fails setting independence but
        // each setting table still factorises.
        let m = StructuredModel::classical_from_fn(
            vec!["c0".into(), "c1".into()],
            |pair, bi, bj, c| {
                let ws = if (pair.alpha == 0) == (c == 0) {
                    0.4
                } else {
                    0.1
                };
                ws * 0.25 * [0.5, 0.5][bi] * [0.2, 0.8][bj]
            },
        )
        .unwrap();
        assert!(!check_classical_screening(&m).unwrap().holds);
        let r = check_classical_screening_with(
            &m,
            ScreeningOptions {
                minimalist: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.holds);
        assert!(r.condition("setting_independence").unwrap().skipped);
    }

    #[test]
    fn diagonal_embedding_passes_quantal_screening() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_screening_model(&mut rng, 2).unwrap();
        let q =
            StructuredModel::quantal(m.past().to_vec(), m.decoherence_functional().into_matrix())
                .unwrap();
        let r = check_quantal_screening(&q).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn augmented_d_sym_screens_off() {
        let df = d_sym();
        let m = augment_quantal(&df, &SettingWeights::uniform()).unwrap();
        let r = check_quantal_screening(&m).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.max_residual() < 1e-10);
        assert!(
            check_strong_positivity(&m.decoherence_functional())
                .unwrap()
                .holds
        );
        let p = conditional_experimental_probabilities(&m).unwrap();
        assert!(p.max_abs_diff(&experimental_probabilities(&df).unwrap()) < 1e-12);
    }

    #[test]
    fn augment_quantal_of_diagonal_matches_classical() {
        let w: Vec<f64> = (1..=16).map(|k| k as f64 / 136.0).collect();
        let mu = ClassicalMeasure::new(&joint_space(), w).unwrap();
        let weights = SettingWeights::product([0.3, 0.7], [0.5, 0.5]).unwrap();
        let q = augment_quantal(&DecoherenceFunctional::from_classical(&mu), &weights).unwrap();
        let c = augment_classical(&mu, &weights).unwrap();
        let ModelMeasure::Classical(cm) = c.measure() else {
            unreachable!()
        };
        let dq = q.decoherence_functional();
        for x in 0..256 {
            assert!((dq.entry(x, x).re - cm.weight(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn random_quantal_model_violates_screening() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 32;
        let g = ComplexMatrix::from_fn(n, 3, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &g * &g.adjoint();
        let q = StructuredModel::quantal(vec!["c0".into(), "c1".into()], m).unwrap();
        let r = check_quantal_screening(&q).unwrap();
        assert!(!r.holds);
        assert!(r.condition("quantal_screening").unwrap().residual > 1e-3);
    }

    #[test]
    fn augment_quantal_requires_joint_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (_, _, df) = random_commuting_model(&mut rng).unwrap();
        assert!(augment_quantal(&df, &SettingWeights::uniform()).is_ok());
        let s = joint_space();
        let mut bad = ComplexMatrix::diagonal(&[1.0 / 16.0; 16]);
        bad[(0, 8)] = Complex64::new(0.03, 0.0);
        bad[(8, 0)] = Complex64::new(0.03, 0.0);
        let bad = DecoherenceFunctional::new(&s, bad).unwrap();
        assert!(matches!(
            augment_quantal(&bad, &SettingWeights::uniform()),
            Err(QmtError::MarginalsNotDiagonal { .. })
        ));
    }

    #[test]
    fn zero_setting_weight_is_an_error() {
        let m = StructuredModel::classical_from_fn(single_past(), |pair, _, _, _| {
            if pair == SettingPair::APBP {
                0.0
            } else {
                1.0 / 12.0
            }
        })
        .unwrap();
        assert!(matches!(
            conditional_experimental_probabilities(&m),
            Err(QmtError::InvalidWeight(_))
        ));
        let u = StructuredModel::classical_from_fn(single_past(), |_, _, _, _| 1.0 / 16.0).unwrap();
        assert_eq!(
            conditional_experimental_probabilities(&u).unwrap(),
            ExperimentalProbabilities::uniform()
        );
    }
}
