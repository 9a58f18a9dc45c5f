//! Revised primal simplex on `min cᵀu, A u = b, u ≥ 0` with a dense explicit
//! basis inverse. Columns can be appended between solves; the current basis
//! stays primal feasible, so re-optimisation is a warm start.
//!
//! Phase I starts from one artificial per row. Artificials never re-enter,
//! and in phase II an artificial still basic is treated as fixed at zero.

use crate::error::{QmtError, Result};

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching from Dantzig to Bland. The
/// objective perturbation keeps such runs rare, and Bland's rule is slow.
const DEGENERATE_RUN: usize = 5_000;

#[derive(Clone, Debug)]
pub(crate) struct Column {
    pub entries: Vec<(usize, f64)>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Basic {
    Col(usize),
    /// Artificial for a row, with its ±1 coefficient.
    Art(usize, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct Simplex {
    m: usize,
    b: Vec<f64>,
    cols: Vec<Column>,
    basis: Vec<Basic>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pub pivots: usize,
    since_refactor: usize,
    max_pivots: usize,
    phase_one_done: bool,
}

impl Simplex {
    pub fn new(b: Vec<f64>, cols: Vec<Column>, max_pivots: usize) -> Self {
        let m = b.len();
        let mut binv = vec![0.0; m * m];
        let mut basis = Vec::with_capacity(m);
        let mut xb = Vec::with_capacity(m);
        for (r, &v) in b.iter().enumerate() {
            let s = if v < 0.0 { -1.0 } else { 1.0 };
            binv[r * m + r] = s;
            basis.push(Basic::Art(r, s));
            xb.push(v.abs());
        }
        let in_basis = vec![false; cols.len()];
        Self {
            m,
            b,
            cols,
            basis,
            in_basis,
            binv,
            xb,
            pivots: 0,
            since_refactor: 0,
            max_pivots,
            phase_one_done: false,
        }
    }

    pub fn add_columns(&mut self, cols: impl IntoIterator<Item = Column>) {
        for c in cols {
            self.cols.push(c);
            self.in_basis.push(false);
        }
    }

    fn cost(&self, basic: Basic, phase_one: bool) -> f64 {
        match (basic, phase_one) {
            (Basic::Art(..), true) => 1.0,
            (Basic::Art(..), false) => 0.0,
            (Basic::Col(_), true) => 0.0,
            (Basic::Col(j), false) => self.cols[j].cost,
        }
    }

    /// `π = B⁻ᵀ c_B`.
    fn duals(&self, phase_one: bool) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &basic) in self.basis.iter().enumerate() {
            let c = self.cost(basic, phase_one);
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (p, v) in pi.iter_mut().zip(row) {
                    *p += c * v;
                }
            }
        }
        pi
    }

    /// Multipliers of the final phase II basis.
    pub fn multipliers(&self) -> Vec<f64> {
        self.duals(false)
    }

    pub fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&basic, &v)| self.cost(basic, false) * v)
            .sum()
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (i, a) in alpha.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            *a = col.iter().map(|&(r, v)| row[r] * v).sum();
        }
        alpha
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let theta = self.xb[r] / piv;
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for (v, p) in self.binv[i * m..(i + 1) * m].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.xb[i] -= f * theta;
        }
        self.xb[r] = theta;
        if let Basic::Col(j) = self.basis[r] {
            self.in_basis[j] = false;
        }
        self.basis[r] = Basic::Col(entering);
        self.in_basis[entering] = true;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Rebuild `B⁻¹` from the basis columns by Gauss–Jordan elimination with
    /// partial pivoting, then recompute the basic values.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &basic) in self.basis.iter().enumerate() {
            match basic {
                Basic::Col(j) => {
                    for &(r, v) in &self.cols[j].entries {
                        a[r * m + k] += v;
                    }
                }
                Basic::Art(r, s) => a[r * m + k] = s,
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let p = (col..m)
                .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
                .unwrap_or(col);
            if a[p * m + col].abs() < 1e-14 {
                // Keep the updated inverse; a singular refactorisation means
                // the basis drifted and the product-form inverse is the better
                // estimate.
                self.since_refactor = 0;
                return;
            }
            if p != col {
                for k in 0..m {
                    a.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for i in 0..m {
                if i != col {
                    let f = a[i * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[i * m + k] -= f * a[col * m + k];
                            inv[i * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&self.b).map(|(x, y)| x * y).sum();
        }
        self.since_refactor = 0;
    }

    fn run(&mut self, phase_one: bool) -> Result<Outcome> {
        let m = self.m;
        let mut bland = false;
        let mut degenerate = 0;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(QmtError::Lp(format!(
                    "pivot cap of {} exceeded",
                    self.max_pivots
                )));
            }
            let pi = self.duals(phase_one);
            let mut entering: Option<(usize, f64)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if self.in_basis[j] {
                    continue;
                }
                let c = if phase_one { 0.0 } else { col.cost };
                let d = c - col.entries.iter().map(|&(r, v)| pi[r] * v).sum::<f64>();
                if d < -OPT_TOL {
                    match entering {
                        None => entering = Some((j, d)),
                        Some((_, best)) if !bland && d < best => entering = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((j, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(&self.cols[j].entries);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = alpha[i];
                let ratio = match self.basis[i] {
                    Basic::Art(..) if !phase_one => {
                        if a.abs() > PIVOT_TOL {
                            0.0
                        } else {
                            continue;
                        }
                    }
                    _ => {
                        if a > PIVOT_TOL {
                            self.xb[i].max(0.0) / a
                        } else {
                            continue;
                        }
                    }
                };
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let better = if ratio < best - 1e-12 {
                            true
                        } else if ratio <= best + 1e-12 {
                            if bland {
                                self.order(i) < self.order(k)
                            } else {
                                alpha[i].abs() > alpha[k].abs()
                            }
                        } else {
                            false
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if matches!(self.basis[r], Basic::Art(..)) && !phase_one {
                self.xb[r] = 0.0;
            }
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.pivot(r, j, &alpha);
        }
    }

    /// Index used by Bland's rule: columns first, then artificials by row.
    fn order(&self, row: usize) -> usize {
        match self.basis[row] {
            Basic::Col(j) => j,
            Basic::Art(r, _) => self.cols.len() + r,
        }
    }

    /// Run phase I if it has not succeeded yet, then phase II.
    pub fn solve(&mut self) -> Result<Outcome> {
        if !self.phase_one_done {
            self.run(true)?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(b, _)| matches!(b, Basic::Art(..)))
                .map(|(_, v)| v.max(0.0))
                .sum();
            if infeas > PHASE1_TOL {
                return Ok(Outcome::Infeasible);
            }
            self.phase_one_done = true;
        }
        self.run(false)
    }
}
