//! The inner-product space of a strongly positive decoherence functional.
//!
//! Null vectors are quotiented out by spectral truncation: with
//! `M = U Λ U†` and `r` eigenvalues above the zero tolerance, the atom vectors
//! are the columns of `E = Λ_r^{1/2} U_r†`, so `⟨x|y⟩ = (E†E)_{xy} = D(x; y)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::epr::{
    chsh_q, experimental_probabilities, ExperimentalProbabilities, Setting, SettingPair,
    SignPattern, N_ATOMS, TSIRELSON,
};
use crate::error::{QmtError, Result};
use crate::linalg::{hermitian_eigen_blocked, inner as raw_inner, norm, ComplexMatrix, C0};
use crate::measure::{default_zero_tol, DecoherenceFunctional};

/// Agreement tolerance for reconstructed inner products and correlators.
pub const GNS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnsVector {
    pub coords: Vec<Complex64>,
}

impl GnsVector {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.iter().any(|z| !z.is_finite()) {
            return Err(QmtError::NonFinite);
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|z| z * s).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnsSpace {
    source: DecoherenceFunctional,
    embedding: ComplexMatrix,
    kept: Vec<f64>,
    spectrum: Vec<f64>,
    zero_tol: f64,
}

impl GnsSpace {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// `r×n`; column `x` is the atom vector `|x⟩`.
    pub fn embedding(&self) -> &ComplexMatrix {
        &self.embedding
    }

    pub fn kept_eigenvalues(&self) -> &[f64] {
        &self.kept
    }

    /// Full ascending spectrum of the source matrix.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn source(&self) -> &DecoherenceFunctional {
        &self.source
    }

    pub fn atom_vector(&self, x: usize) -> GnsVector {
        GnsVector {
            coords: self.embedding.column(x),
        }
    }

    /// `‖E†E − D‖_max`.
    pub fn reconstruction_error(&self) -> f64 {
        (&self.embedding.adjoint() * &self.embedding).max_abs_diff(self.source.matrix())
    }

    /// `Σ_x c_x |x⟩`.
    pub fn combination(&self, coeffs: &[f64]) -> Result<GnsVector> {
        let n = self.source.n_atoms();
        if coeffs.len() != n {
            return Err(QmtError::DimensionMismatch {
                expected: n,
                got: coeffs.len(),
            });
        }
        let mut coords = vec![C0; self.rank()];
        for (x, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (k, z) in coords.iter_mut().enumerate() {
                    *z += self.embedding[(k, x)] * c;
                }
            }
        }
        GnsVector::new(coords)
    }
}

/// Builds the space with zero tolerance `1e-10·max(1, ‖D‖_max)`.
pub fn gns_construct_default(df: &DecoherenceFunctional) -> Result<GnsSpace> {
    gns_construct(df, default_zero_tol(df))
}

/// Eigenvalues in `[−zero_tol, zero_tol]` are treated as zero; anything below
/// `−zero_tol` means the functional is not strongly positive.
pub fn gns_construct(df: &DecoherenceFunctional, zero_tol: f64) -> Result<GnsSpace> {
    let eig = hermitian_eigen_blocked(df.matrix())?;
    if let Some(&min) = eig.values.first() {
        if min < -zero_tol {
            return Err(QmtError::NotStronglyPositive { eigenvalue: min });
        }
    }
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k] > zero_tol)
        .collect();
    // Largest eigenvalues first.
    let keep: Vec<usize> = keep.into_iter().rev().collect();
    let n = df.n_atoms();
    let embedding = ComplexMatrix::from_fn(keep.len(), n, |r, x| {
        let k = keep[r];
        eig.vectors[(x, k)].conj() * eig.values[k].sqrt()
    });
    Ok(GnsSpace {
        source: df.clone(),
        embedding,
        kept: keep.iter().map(|&k| eig.values[k]).collect(),
        spectrum: eig.values,
        zero_tol,
    })
}

/// `⟨u|v⟩`, conjugate-linear in `u`.
pub fn inner(space: &GnsSpace, u: &GnsVector, v: &GnsVector) -> Result<Complex64> {
    for w in [u, v] {
        if w.dim() != space.rank() {
            return Err(QmtError::DimensionMismatch {
                expected: space.rank(),
                got: w.dim(),
            });
        }
    }
    Ok(raw_inner(&u.coords, &v.coords))
}

/// `‖u + v‖ + ‖u − v‖`, at most `2√2` for unit vectors.
pub fn norm_sum(u: &GnsVector, v: &GnsVector) -> f64 {
    u.add(v).norm() + u.sub(v).norm()
}

fn joint_probabilities(space: &GnsSpace) -> Result<ExperimentalProbabilities> {
    let n = space.source.n_atoms();
    if n != N_ATOMS {
        return Err(QmtError::DimensionMismatch {
            expected: N_ATOMS,
            got: n,
        });
    }
    experimental_probabilities(&space.source)
}

/// `|α⟩ = Σ_x α(x)|x⟩` with `α(x) = ±1` the outcome of the setting in atom
/// `x`. Refused unless every marginal of the source is diagonal.
pub fn setting_vector(space: &GnsSpace, setting: Setting) -> Result<GnsVector> {
    joint_probabilities(space)?;
    setting_vector_unchecked(space, setting)
}

fn setting_vector_unchecked(space: &GnsSpace, setting: Setting) -> Result<GnsVector> {
    let coeffs: Vec<f64> = (0..N_ATOMS).map(|x| setting.outcome(x)).collect();
    space.combination(&coeffs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternQ {
    pub pattern: SignPattern,
    /// `Σ s_αβ ⟨α|β⟩` (real part).
    pub q_inner: f64,
    /// Q from the experimental probabilities.
    pub q_probabilities: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TsirelsonCertificate {
    /// Norms of `|a⟩, |a′⟩, |b⟩, |b′⟩`.
    pub setting_norms: [f64; 4],
    /// Real parts of `⟨α|β⟩` in setting-pair order.
    pub inner_correlators: [f64; 4],
    /// Largest imaginary part among the `⟨α|β⟩`.
    pub max_imaginary: f64,
    /// Real part of `⟨a|a′⟩`, not constrained by anything; reported only.
    pub a_a_prime: f64,
    pub q_by_pattern: Vec<PatternQ>,
    pub max_abs_q: f64,
    /// `‖a + a′‖ + ‖a − a′‖`.
    pub norm_bound: f64,
    /// `2√2 − max |Q|`.
    pub bound_margin: f64,
    /// Largest gap between the two ways of computing Q.
    pub max_q_disagreement: f64,
    pub holds: bool,
}

/// Recomputes every CHSH combination from inner products of setting vectors
/// and checks it against the probabilities, the unit norms, and the chain
/// `|Q| ≤ ‖a + a′‖ + ‖a − a′‖ ≤ 2√2`.
pub fn tsirelson_certificate(space: &GnsSpace) -> Result<TsirelsonCertificate> {
    let p = joint_probabilities(space)?;
    let v: Vec<GnsVector> = Setting::ALL
        .iter()
        .map(|&s| setting_vector_unchecked(space, s))
        .collect::<Result<_>>()?;
    let (a, ap, b, bp) = (&v[0], &v[1], &v[2], &v[3]);
    let setting_norms = [a.norm(), ap.norm(), b.norm(), bp.norm()];
    let mut inner_correlators = [0.0; 4];
    let mut max_imaginary: f64 = 0.0;
    for pair in SettingPair::ALL {
        let alpha = if pair.alpha == 0 { a } else { ap };
        let beta = if pair.beta == 0 { b } else { bp };
        let z = inner(space, alpha, beta)?;
        inner_correlators[pair.index()] = z.re;
        max_imaginary = max_imaginary.max(z.im.abs());
    }
    let mut q_by_pattern = Vec::new();
    let mut max_abs_q: f64 = 0.0;
    let mut max_q_disagreement: f64 = 0.0;
    for pattern in SignPattern::all() {
        let q_inner: f64 = SettingPair::ALL
            .iter()
            .map(|&pair| pattern.sign(pair) * inner_correlators[pair.index()])
            .sum();
        let q_probabilities = chsh_q(&p, pattern);
        max_abs_q = max_abs_q.max(q_inner.abs());
        max_q_disagreement = max_q_disagreement.max((q_inner - q_probabilities).abs());
        q_by_pattern.push(PatternQ {
            pattern,
            q_inner,
            q_probabilities,
        });
    }
    let norm_bound = norm_sum(a, ap);
    let holds = max_q_disagreement <= GNS_TOL
        && max_imaginary <= GNS_TOL
        && setting_norms.iter().all(|n| (n - 1.0).abs() <= GNS_TOL)
        && norm_bound <= TSIRELSON + GNS_TOL
        && max_abs_q <= norm_bound + GNS_TOL;
    Ok(TsirelsonCertificate {
        setting_norms,
        inner_correlators,
        max_imaginary,
        a_a_prime: inner(space, a, ap)?.re,
        q_by_pattern,
        max_abs_q,
        norm_bound,
        bound_margin: TSIRELSON - max_abs_q,
        max_q_disagreement,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epr::{correlators, joint_space};
    use crate::measure::SampleSpace;
    use crate::quantum::{d_sym, df_sym_closed_form};
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_gives_orthonormal_atoms() {
        let s = SampleSpace::numbered(4).unwrap();
        let df = DecoherenceFunctional::new(&s, ComplexMatrix::identity(4)).unwrap();
        let g = gns_construct_default(&df).unwrap();
        assert_eq!(g.rank(), 4);
        for x in 0..4 {
            for y in 0..4 {
                let z = inner(&g, &g.atom_vector(x), &g.atom_vector(y)).unwrap();
                assert!((z - c(if x == y { 1.0 } else { 0.0 })).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_atoms_are_collinear() {
        let s = SampleSpace::numbered(3).unwrap();
        let v = vec![c(0.5), Complex64::new(0.0, 0.5), c(-0.5)];
        let df = DecoherenceFunctional::new(&s, ComplexMatrix::outer(&v, &v)).unwrap();
        let g = gns_construct_default(&df).unwrap();
        assert_eq!(g.rank(), 1);
        assert!(g.reconstruction_error() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_refused() {
        let s = SampleSpace::numbered(2).unwrap();
        let m = ComplexMatrix::from_rows(vec![
            vec![c(1.0), Complex64::new(0.0, 2.0)],
            vec![Complex64::new(0.0, -2.0), c(1.0)],
        ])
        .unwrap();
        let df = DecoherenceFunctional::new(&s, m).unwrap();
        assert!(matches!(
            gns_construct_default(&df),
            Err(QmtError::NotStronglyPositive { .. })
        ));
    }

    #[test]
    fn d_sym_space_is_four_dimensional() {
        let g = gns_construct_default(&d_sym()).unwrap();
        assert_eq!(g.rank(), 4);
        assert!(g.reconstruction_error() < 1e-9);
        // Standard geometry differs from the closed form by relabelling a′.
        for x in 0..16 {
            for y in 0..16 {
                let z = inner(&g, &g.atom_vector(x), &g.atom_vector(y)).unwrap() * 256.0;
                assert!((z - c(256.0 * df_sym_closed_form(x ^ 4, y ^ 4))).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn inner_is_hermitian_and_checks_dimension() {
        let g = gns_construct_default(&d_sym()).unwrap();
        let u = GnsVector::new(vec![
            c(0.3),
            Complex64::new(0.1, -0.7),
            c(0.0),
            Complex64::new(-1.0, 2.0),
        ])
        .unwrap();
        let v = GnsVector::new(vec![
            Complex64::new(0.2, 0.2),
            c(1.0),
            Complex64::new(0.0, -1.0),
            c(0.5),
        ])
        .unwrap();
        assert!((inner(&g, &u, &v).unwrap() - inner(&g, &v, &u).unwrap().conj()).norm() < 1e-15);
        let e = GnsVector::new(vec![c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        assert_eq!(inner(&g, &e, &e).unwrap(), c(1.0));
        let short = GnsVector::new(vec![c(1.0)]).unwrap();
        assert!(inner(&g, &short, &e).is_err());
    }

    #[test]
    fn norm_sum_extremes() {
        let x = GnsVector::new(vec![c(1.0), c(0.0)]).unwrap();
        let y = GnsVector::new(vec![c(0.0), c(1.0)]).unwrap();
        assert!((norm_sum(&x, &y) - 2.0 * SQRT_2).abs() < 1e-15);
        assert_eq!(norm_sum(&x, &x), 2.0);
    }

    #[test]
    fn setting_vectors_of_d_sym() {
        let df = d_sym();
        let g = gns_construct_default(&df).unwrap();
        let a = setting_vector(&g, Setting::A).unwrap();
        let b = setting_vector(&g, Setting::B).unwrap();
        assert!((inner(&g, &a, &a).unwrap().re - 1.0).abs() < 1e-9);
        assert!((inner(&g, &a, &b).unwrap().re + FRAC_1_SQRT_2).abs() < 1e-9);
        let cert = tsirelson_certificate(&g).unwrap();
        assert!(cert.holds);
        assert!(cert.bound_margin.abs() < 1e-9);
        let p = experimental_probabilities(&df).unwrap();
        for (x, y) in cert.inner_correlators.iter().zip(correlators(&p)) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn setting_vector_refuses_undecohered_marginals() {
        let mut m = ComplexMatrix::diagonal(&[1.0 / 16.0; 16]);
        m[(0, 8)] = c(0.02);
        m[(8, 0)] = c(0.02);
        let df = DecoherenceFunctional::new(&joint_space(), m).unwrap();
        let g = gns_construct_default(&df).unwrap();
        assert!(matches!(
            setting_vector(&g, Setting::A),
            Err(QmtError::MarginalsNotDiagonal { .. })
        ));
    }
}
