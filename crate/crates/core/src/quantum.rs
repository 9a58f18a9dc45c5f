//! Joint decoherence functionals from two-qubit quantum mechanics.
//!
//! Basis `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩` with A the left tensor factor. For an atom
//! `x = (i, i′, j, j′)` a class operator `C_x` is assembled from the four
//! projectors and `D(x; y) = Tr(C_x ρ C_y†)`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::epr::{joint_space, Setting, N_ATOMS};
use crate::error::{QmtError, Result};
use crate::linalg::{hermitian_eigen, norm, ComplexMatrix, C0, C1};
use crate::measure::DecoherenceFunctional;

pub const PROJECTOR_TOL: f64 = 1e-10;
pub const DIRECTION_TOL: f64 = 1e-12;

pub fn pauli() -> [ComplexMatrix; 3] {
    let i = Complex64::i();
    [
        ComplexMatrix::from_rows(vec![vec![C0, C1], vec![C1, C0]]).unwrap(),
        ComplexMatrix::from_rows(vec![vec![C0, -i], vec![i, C0]]).unwrap(),
        ComplexMatrix::from_rows(vec![vec![C1, C0], vec![C0, -C1]]).unwrap(),
    ]
}

/// `n·σ` for a real 3-vector.
pub fn n_dot_sigma(n: [f64; 3]) -> ComplexMatrix {
    let s = pauli();
    let mut out = ComplexMatrix::zeros(2, 2);
    for k in 0..3 {
        out = &out + &s[k].scale(Complex64::new(n[k], 0.0));
    }
    out
}

fn dot(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn check_unit(n: [f64; 3]) -> Result<()> {
    if n.iter().any(|c| !c.is_finite()) || (dot(n, n).sqrt() - 1.0).abs() > DIRECTION_TOL {
        return Err(QmtError::InvalidDirection(format!(
            "{n:?} is not a unit vector"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinDirections {
    pub a: [f64; 3],
    pub a_prime: [f64; 3],
    pub b: [f64; 3],
    pub b_prime: [f64; 3],
}

impl SpinDirections {
    pub fn new(a: [f64; 3], a_prime: [f64; 3], b: [f64; 3], b_prime: [f64; 3]) -> Result<Self> {
        let d = Self {
            a,
            a_prime,
            b,
            b_prime,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for n in [self.a, self.a_prime, self.b, self.b_prime] {
            check_unit(n)?;
        }
        Ok(())
    }

    pub fn get(&self, s: Setting) -> [f64; 3] {
        match s {
            Setting::A => self.a,
            Setting::APrime => self.a_prime,
            Setting::B => self.b,
            Setting::BPrime => self.b_prime,
        }
    }

    pub fn dot(&self, u: Setting, v: Setting) -> f64 {
        dot(self.get(u), self.get(v))
    }
}

/// a = x̂, a′ = ŷ, b = (x̂+ŷ)/√2, b′ = (x̂−ŷ)/√2, so that
/// a·b = a·b′ = a′·b = −a′·b′ = 1/√2 and a·a′ = b·b′ = 0.
pub fn standard_directions() -> SpinDirections {
    SpinDirections {
        a: [1.0, 0.0, 0.0],
        a_prime: [0.0, 1.0, 0.0],
        b: [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0],
        b_prime: [FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0],
    }
}

/// The geometry the closed form [`df_sym_closed_form`] is written for: the
/// standard one with a′ reversed (a′·b = −1/√2, a′·b′ = +1/√2). Reversing a′
/// only swaps the labels of its two outcomes.
pub fn closed_form_directions() -> SpinDirections {
    SpinDirections {
        a_prime: [0.0, -1.0, 0.0],
        ..standard_directions()
    }
}

/// `(|↑↓⟩ − |↓↑⟩)/√2`.
pub fn singlet_state() -> Vec<Complex64> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    vec![C0, h, -h, C0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// `(1 ± n·σ)/2` on one qubit, tensored with the identity on the other.
pub fn spin_projector(n: [f64; 3], outcome: i8, side: Side) -> Result<ComplexMatrix> {
    check_unit(n)?;
    if outcome != 1 && outcome != -1 {
        return Err(QmtError::InvalidProjectors(format!(
            "outcome must be ±1, got {outcome}"
        )));
    }
    let half = Complex64::new(0.5, 0.0);
    let p = (&ComplexMatrix::identity(2)
        + &n_dot_sigma(n).scale(Complex64::new(f64::from(outcome), 0.0)))
        .scale(half);
    Ok(match side {
        Side::A => p.kron(&ComplexMatrix::identity(2)),
        Side::B => ComplexMatrix::identity(2).kron(&p),
    })
}

/// Two-outcome projector pairs for each of the four settings, indexed by
/// outcome bit (0 for +1, 1 for −1).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorFamily {
    dim: usize,
    a: [[ComplexMatrix; 2]; 2],
    b: [[ComplexMatrix; 2]; 2],
}

impl ProjectorFamily {
    /// `a[α][b(i)]`, `b[β][b(j)]`; α = 0 is a, 1 is a′ (likewise for β).
    pub fn new(a: [[ComplexMatrix; 2]; 2], b: [[ComplexMatrix; 2]; 2]) -> Result<Self> {
        let dim = a[0][0].rows();
        let all = a.iter().chain(b.iter()).flatten();
        for p in all.clone() {
            if !p.is_square() || p.rows() != dim {
                return Err(QmtError::InvalidProjectors(format!(
                    "expected {dim}x{dim} projectors"
                )));
            }
            if !p.is_finite() {
                return Err(QmtError::NonFinite);
            }
            if p.hermiticity_defect() > PROJECTOR_TOL {
                return Err(QmtError::InvalidProjectors(
                    "projector is not Hermitian".into(),
                ));
            }
            if (p * p).max_abs_diff(p) > PROJECTOR_TOL {
                return Err(QmtError::InvalidProjectors(
                    "projector is not idempotent".into(),
                ));
            }
        }
        let id = ComplexMatrix::identity(dim);
        for pair in a.iter().chain(b.iter()) {
            if (&pair[0] + &pair[1]).max_abs_diff(&id) > PROJECTOR_TOL {
                return Err(QmtError::InvalidProjectors(
                    "outcome projectors do not sum to the identity".into(),
                ));
            }
        }
        for pa in a.iter().flatten() {
            for pb in b.iter().flatten() {
                if pa.commutator(pb).max_abs() > PROJECTOR_TOL {
                    return Err(QmtError::InvalidProjectors(
                        "A-side and B-side projectors do not commute".into(),
                    ));
                }
            }
        }
        Ok(Self { dim, a, b })
    }

    /// Spin projectors along the given directions on two qubits.
    pub fn from_directions(dirs: &SpinDirections) -> Result<Self> {
        let side_pair = |n: [f64; 3], side: Side| -> Result<[ComplexMatrix; 2]> {
            Ok([spin_projector(n, 1, side)?, spin_projector(n, -1, side)?])
        };
        Self::new(
            [
                side_pair(dirs.a, Side::A)?,
                side_pair(dirs.a_prime, Side::A)?,
            ],
            [
                side_pair(dirs.b, Side::B)?,
                side_pair(dirs.b_prime, Side::B)?,
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projector(&self, s: Setting, outcome_bit: usize) -> &ComplexMatrix {
        match s {
            Setting::A => &self.a[0][outcome_bit],
            Setting::APrime => &self.a[1][outcome_bit],
            Setting::B => &self.b[0][outcome_bit],
            Setting::BPrime => &self.b[1][outcome_bit],
        }
    }

    /// `C_x = B(j, j′)·A(i, i′)` where
    /// `A = λ_A P^{a′}_{i′} P^a_i + (1−λ_A) P^a_i P^{a′}_{i′}` and B likewise.
    fn class_operators(&self, lambda_a: f64, lambda_b: f64) -> Vec<ComplexMatrix> {
        let mix = |first: &ComplexMatrix, second: &ComplexMatrix, l: f64| {
            // l weights "second after first"
            let forward = second * first;
            if l == 1.0 {
                return forward;
            }
            let backward = first * second;
            &forward.scale(Complex64::new(l, 0.0)) + &backward.scale(Complex64::new(1.0 - l, 0.0))
        };
        let mut a_parts = Vec::with_capacity(4);
        for i in 0..2 {
            for ip in 0..2 {
                a_parts.push(mix(&self.a[0][i], &self.a[1][ip], lambda_a));
            }
        }
        let mut b_parts = Vec::with_capacity(4);
        for j in 0..2 {
            for jp in 0..2 {
                b_parts.push(mix(&self.b[0][j], &self.b[1][jp], lambda_b));
            }
        }
        (0..N_ATOMS)
            .map(|x| &b_parts[x & 3] * &a_parts[x >> 2])
            .collect()
    }
}

/// Checks a density matrix: square, finite, Hermitian, unit trace, PSD (all
/// within 1e-10).
pub fn validate_density(rho: &ComplexMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(QmtError::InvalidDensity(
            "density matrix must be square".into(),
        ));
    }
    if !rho.is_finite() {
        return Err(QmtError::NonFinite);
    }
    if rho.hermiticity_defect() > PROJECTOR_TOL {
        return Err(QmtError::InvalidDensity("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > PROJECTOR_TOL || tr.im.abs() > PROJECTOR_TOL {
        return Err(QmtError::InvalidDensity(format!("trace {tr} is not 1")));
    }
    let eig = hermitian_eigen(rho)?;
    if let Some(&min) = eig.values.first() {
        if min < -PROJECTOR_TOL {
            return Err(QmtError::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
    }
    Ok(())
}

/// `|ψ⟩⟨ψ|` after checking ψ has unit norm.
pub fn pure_density(state: &[Complex64]) -> Result<ComplexMatrix> {
    if state.iter().any(|z| !z.is_finite()) {
        return Err(QmtError::NonFinite);
    }
    let n = norm(state);
    if (n - 1.0).abs() > PROJECTOR_TOL {
        return Err(QmtError::InvalidDensity(format!("state norm {n} is not 1")));
    }
    Ok(ComplexMatrix::outer(state, state))
}

fn df_from_class_operators(
    rho: &ComplexMatrix,
    ops: &[ComplexMatrix],
) -> Result<DecoherenceFunctional> {
    // Tr(C_x ρ C_y†) = Σ_mn (C_x ρ)_mn conj((C_y)_mn)
    let left: Vec<ComplexMatrix> = ops.iter().map(|c| c * rho).collect();
    let matrix = ComplexMatrix::from_fn(N_ATOMS, N_ATOMS, |x, y| {
        left[x]
            .as_slice()
            .iter()
            .zip(ops[y].as_slice())
            .map(|(l, c)| l * c.conj())
            .sum()
    });
    DecoherenceFunctional::new(&joint_space(), matrix)
}

fn check_lambda(l: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&l) {
        return Err(QmtError::InvalidWeight(format!(
            "ordering weight {l} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// General form: density matrix, commuting projector families and the two
/// ordering weights. λ = 1 on a side puts the primed projector to the left.
pub fn build_df_convex_rho(
    rho: &ComplexMatrix,
    families: &ProjectorFamily,
    lambda_a: f64,
    lambda_b: f64,
) -> Result<DecoherenceFunctional> {
    check_lambda(lambda_a)?;
    check_lambda(lambda_b)?;
    validate_density(rho)?;
    if rho.rows() != families.dim() {
        return Err(QmtError::DimensionMismatch {
            expected: families.dim(),
            got: rho.rows(),
        });
    }
    df_from_class_operators(rho, &families.class_operators(lambda_a, lambda_b))
}

/// `D(x; y) = ⟨ψ| P^a_k P^{a′}_{k′} P^b_l P^{b′}_{l′} P^{b′}_{j′} P^b_j P^{a′}_{i′} P^a_i |ψ⟩`.
pub fn build_df_ordered(
    state: &[Complex64],
    dirs: &SpinDirections,
) -> Result<DecoherenceFunctional> {
    build_df_convex(state, dirs, 1.0, 1.0)
}

/// Each side's pair of projectors replaced by half their anticommutator.
pub fn build_df_sym(state: &[Complex64], dirs: &SpinDirections) -> Result<DecoherenceFunctional> {
    build_df_convex(state, dirs, 0.5, 0.5)
}

pub fn build_df_convex(
    state: &[Complex64],
    dirs: &SpinDirections,
    lambda_a: f64,
    lambda_b: f64,
) -> Result<DecoherenceFunctional> {
    if state.len() != 4 {
        return Err(QmtError::DimensionMismatch {
            expected: 4,
            got: state.len(),
        });
    }
    let rho = pure_density(state)?;
    build_df_convex_rho(
        &rho,
        &ProjectorFamily::from_directions(dirs)?,
        lambda_a,
        lambda_b,
    )
}

/// `D(x; y) = Tr(P^{b′}_{j′} P^b_j P^{a′}_{i′} P^a_i ρ P^a_k P^{a′}_{k′} P^b_l P^{b′}_{l′})`.
pub fn build_df_commuting(
    rho: &ComplexMatrix,
    families: &ProjectorFamily,
) -> Result<DecoherenceFunctional> {
    build_df_convex_rho(rho, families, 1.0, 1.0)
}

/// Closed-form `D̂_sym(x; y)` for the singlet in [`closed_form_directions`]:
/// `256·D = (1+ik+i′k′)(1+jl+j′l′) + (ik′−i′k)(jl′−j′l)
///        − (i+k)(j+l+j′+l′)/√2 + (i′+k′)(j+l−j′−l′)/√2`.
pub fn df_sym_closed_form(x: usize, y: usize) -> f64 {
    let o = |atom: usize, s: Setting| s.outcome(atom);
    let (i, ip, j, jp) = (
        o(x, Setting::A),
        o(x, Setting::APrime),
        o(x, Setting::B),
        o(x, Setting::BPrime),
    );
    let (k, kp, l, lp) = (
        o(y, Setting::A),
        o(y, Setting::APrime),
        o(y, Setting::B),
        o(y, Setting::BPrime),
    );
    let v = (1.0 + i * k + ip * kp) * (1.0 + j * l + jp * lp)
        + (i * kp - ip * k) * (j * lp - jp * l)
        - FRAC_1_SQRT_2 * (i + k) * (j + l + jp + lp)
        + FRAC_1_SQRT_2 * (ip + kp) * (j + l - jp - lp);
    v / 256.0
}

pub fn df_sym_closed_form_matrix() -> ComplexMatrix {
    ComplexMatrix::from_fn(N_ATOMS, N_ATOMS, |x, y| {
        Complex64::new(df_sym_closed_form(x, y), 0.0)
    })
}

/// `D̂_sym` for the singlet and [`standard_directions`].
pub fn d_sym() -> DecoherenceFunctional {
    build_df_sym(&singlet_state(), &standard_directions())
        .expect("singlet and standard directions are valid")
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = dot(v, v).sqrt();
        if n > 1e-6 {
            return v.map(|c| c / n);
        }
    }
}

pub fn random_directions<R: Rng + ?Sized>(rng: &mut R) -> SpinDirections {
    SpinDirections {
        a: random_unit_vector(rng),
        a_prime: random_unit_vector(rng),
        b: random_unit_vector(rng),
        b_prime: random_unit_vector(rng),
    }
}

/// `G G† / Tr` for a `d×rank` complex Gaussian `G`; rank drawn uniformly
/// from `1..=d`, so pure states occur too.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let rank = rng.gen_range(1..=d);
    let g = ComplexMatrix::from_fn(d, rank, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    let mut rho = rho.scale(Complex64::new(1.0 / tr, 0.0));
    // Exact Hermiticity after rounding.
    for r in 0..d {
        rho[(r, r)].im = 0.0;
        for c in r + 1..d {
            rho[(c, r)] = rho[(r, c)].conj();
        }
    }
    rho
}

/// A random commuting-projector model: density matrix, directions and the
/// joint functional they produce.
pub fn random_commuting_model<R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<(ComplexMatrix, SpinDirections, DecoherenceFunctional)> {
    let rho = random_density_matrix(rng, 4);
    let dirs = random_directions(rng);
    let df = build_df_commuting(&rho, &ProjectorFamily::from_directions(&dirs)?)?;
    Ok((rho, dirs, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epr::{experimental_probabilities, marginals, max_chsh_q, SettingPair};
    use crate::measure::{
        check_strong_positivity, eigensignature, interference, measure_level, mu, Event,
        SampleSpace,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    const H: f64 = FRAC_1_SQRT_2;

    #[test]
    fn standard_direction_geometry() {
        let d = standard_directions();
        d.validate().unwrap();
        use Setting::*;
        assert_eq!(d.dot(A, APrime), 0.0);
        assert!(d.dot(B, BPrime).abs() < 1e-16);
        assert!((d.dot(A, B) - H).abs() < 1e-15);
        assert!((d.dot(A, BPrime) - H).abs() < 1e-15);
        assert!((d.dot(APrime, B) - H).abs() < 1e-15);
        assert!((d.dot(APrime, BPrime) + H).abs() < 1e-15);
        let c = closed_form_directions();
        assert!((c.dot(APrime, B) + H).abs() < 1e-15);
        assert!((c.dot(APrime, BPrime) - H).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(SpinDirections::new(
            [1.0, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0]
        )
        .is_err());
        assert!(spin_projector([0.0, 0.0, 2.0], 1, Side::A).is_err());
        assert!(spin_projector([0.0, 0.0, 1.0], 0, Side::A).is_err());
    }

    #[test]
    fn singlet_properties() {
        let psi = singlet_state();
        assert!((norm(&psi) - 1.0).abs() < 1e-15);
        let id = ComplexMatrix::identity(2);
        for s in pauli() {
            let total = &s.kron(&id) + &id.kron(&s);
            assert!(total.mul_vec(&psi).iter().all(|z| z.norm() < 1e-12));
            let expect = crate::linalg::inner(&psi, &s.kron(&id).mul_vec(&psi));
            assert!(expect.norm() < 1e-15);
        }
    }

    #[test]
    fn projector_properties() {
        let z = spin_projector([0.0, 0.0, 1.0], 1, Side::A).unwrap();
        assert_eq!(z, ComplexMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0]));
        let n = [0.6, 0.0, 0.8];
        let sum =
            &spin_projector(n, 1, Side::B).unwrap() + &spin_projector(n, -1, Side::B).unwrap();
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
        let pa = spin_projector([H, H, 0.0], -1, Side::A).unwrap();
        let pb = spin_projector(n, 1, Side::B).unwrap();
        assert_eq!(pa.commutator(&pb).max_abs(), 0.0);
    }

    #[test]
    fn family_rejects_non_commuting_sides() {
        let d = standard_directions();
        let a = |n| {
            [
                spin_projector(n, 1, Side::A).unwrap(),
                spin_projector(n, -1, Side::A).unwrap(),
            ]
        };
        // B-side built on the A qubit does not commute with a.
        assert!(matches!(
            ProjectorFamily::new([a(d.a), a(d.a_prime)], [a(d.b), a(d.b_prime)]),
            Err(QmtError::InvalidProjectors(_))
        ));
    }

    #[test]
    fn symmetrized_matches_closed_form() {
        let m = build_df_sym(&singlet_state(), &closed_form_directions()).unwrap();
        assert!(m.matrix().max_abs_diff(&df_sym_closed_form_matrix()) < 1e-12);
        // In the standard geometry the a′ outcome labels are swapped.
        let std = d_sym();
        let flip = |x: usize| x ^ 4;
        let mut worst: f64 = 0.0;
        for x in 0..16 {
            for y in 0..16 {
                worst =
                    worst.max((std.entry(x, y).re - df_sym_closed_form(flip(x), flip(y))).abs());
                worst = worst.max(std.entry(x, y).im.abs());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn closed_form_values() {
        // All +1: 3·3 + 0 − 2·4/√2 + 2·0/√2 = 9 − 8/√2; all −1: (−2)(−4) gives the same.
        let v = (9.0 - 8.0 / SQRT_2) / 256.0;
        assert!((df_sym_closed_form(0, 0) - v).abs() < 1e-16);
        assert!((df_sym_closed_form(15, 15) - v).abs() < 1e-16);
        let df = d_sym();
        let s = joint_space();
        let e = Event::from_atoms(&s, [15]).unwrap();
        assert!((mu(&df, &e).unwrap() - v).abs() < 1e-15);
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(df_sym_closed_form(x, y), df_sym_closed_form(y, x));
            }
        }
    }

    #[test]
    fn d_sym_signature_and_marginals() {
        let df = d_sym();
        assert!(df.is_normalized());
        let tol = 1e-8 * df.scale();
        assert_eq!(eigensignature(&df, tol).unwrap().as_tuple(), (0, 12, 4));
        let p = experimental_probabilities(&df).unwrap();
        for pair in SettingPair::ALL {
            let s = if pair == SettingPair::APBP { -1.0 } else { 1.0 };
            for i in [1i8, -1] {
                for j in [1i8, -1] {
                    let want = (1.0 - s * f64::from(i * j) * H) / 4.0;
                    assert!((p.get(pair, i, j) - want).abs() < 1e-12);
                }
            }
        }
        let (pattern, q) = max_chsh_q(&p);
        assert!((q - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(pattern.to_string(), "+++-");
    }

    /// Oracle: the nonzero spectrum of the Gram matrix `⟨C_y ψ|C_x ψ⟩` equals
    /// the spectrum of the 4×4 frame operator `S = Σ_x |C_x ψ⟩⟨C_x ψ|`; compare
    /// power sums Tr(S^k) with Σ λ^k.
    #[test]
    fn scaled_d_sym_spectrum_matches_frame_operator() {
        let fam = ProjectorFamily::from_directions(&standard_directions()).unwrap();
        let psi = singlet_state();
        let ops = fam.class_operators(0.5, 0.5);
        let mut frame = ComplexMatrix::zeros(4, 4);
        for c in &ops {
            let u = c.mul_vec(&psi);
            frame = &frame + &ComplexMatrix::outer(&u, &u);
        }
        let frame = frame.scale(Complex64::new(256.0, 0.0));
        let scaled = d_sym().matrix().scale(Complex64::new(256.0, 0.0));
        let eig = hermitian_eigen(&scaled).unwrap();
        assert_eq!(eig.values.iter().filter(|v| v.abs() < 1e-8).count(), 12);
        let positive: Vec<f64> = eig.values.iter().copied().filter(|&v| v > 1e-8).collect();
        assert_eq!(positive.len(), 4);
        assert!((positive.iter().sum::<f64>() - scaled.trace().re).abs() < 1e-9);
        let mut power = ComplexMatrix::identity(4);
        for k in 1..=4 {
            power = &power * &frame;
            let want = power.trace().re;
            let got: f64 = positive.iter().map(|v| v.powi(k)).sum();
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "k={k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn ordered_builder_properties() {
        let df = build_df_ordered(&singlet_state(), &standard_directions()).unwrap();
        assert!(df.is_normalized());
        assert!(check_strong_positivity(&df).unwrap().holds);
        let p = experimental_probabilities(&df).unwrap();
        let sym = experimental_probabilities(&d_sym()).unwrap();
        assert!(p.max_abs_diff(&sym) < 1e-12);
        for i in [1i8, -1] {
            for j in [1i8, -1] {
                assert!(
                    (p.get(SettingPair::AB, i, j) - (1.0 - f64::from(i * j) * H) / 4.0).abs()
                        < 1e-12
                );
            }
        }
    }

    /// Σ over i′, j′ (bra) and k, l′ (ket) leaves (i, j; k′, l), which
    /// vanishes unless j = l.
    #[test]
    fn ordered_mixed_marginal_decoheres_in_b() {
        let df = build_df_ordered(&singlet_state(), &standard_directions()).unwrap();
        let mut block = [[[[Complex64::new(0.0, 0.0); 2]; 2]; 2]; 2];
        for x in 0..16 {
            for y in 0..16 {
                let (i, j) = (x >> 3 & 1, x >> 1 & 1);
                let (kp, l) = (y >> 2 & 1, y >> 1 & 1);
                block[i][j][kp][l] += df.entry(x, y);
            }
        }
        for i in 0..2 {
            for kp in 0..2 {
                for j in 0..2 {
                    assert!(block[i][j][kp][1 - j].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn commuting_builder_matches_ordered_for_pure_singlet() {
        let dirs = standard_directions();
        let rho = pure_density(&singlet_state()).unwrap();
        let a =
            build_df_commuting(&rho, &ProjectorFamily::from_directions(&dirs).unwrap()).unwrap();
        let b = build_df_ordered(&singlet_state(), &dirs).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn maximally_mixed_state_is_uncorrelated() {
        let rho = ComplexMatrix::diagonal(&[0.25; 4]);
        let df = build_df_commuting(
            &rho,
            &ProjectorFamily::from_directions(&standard_directions()).unwrap(),
        )
        .unwrap();
        let p = experimental_probabilities(&df).unwrap();
        assert!(max_chsh_q(&p).1 < 1e-15);
    }

    #[test]
    fn convex_family_endpoints() {
        let psi = singlet_state();
        let d = standard_directions();
        let half = build_df_convex(&psi, &d, 0.5, 0.5).unwrap();
        assert!(
            half.matrix()
                .max_abs_diff(build_df_sym(&psi, &d).unwrap().matrix())
                < 1e-12
        );
        let one = build_df_convex(&psi, &d, 1.0, 1.0).unwrap();
        assert!(
            one.matrix()
                .max_abs_diff(build_df_ordered(&psi, &d).unwrap().matrix())
                < 1e-12
        );
        let mid = build_df_convex(&psi, &d, 0.3, 0.7).unwrap();
        assert!(check_strong_positivity(&mid).unwrap().holds);
        for m in marginals(&mid).unwrap() {
            assert!(m.max_off_diagonal() < 1e-9);
        }
        assert!(build_df_convex(&psi, &d, 1.2, 0.5).is_err());
    }

    #[test]
    fn invalid_states_rejected() {
        let d = standard_directions();
        assert!(build_df_sym(&[C1, C1, C0, C0], &d).is_err());
        assert!(build_df_sym(&[C1, C0], &d).is_err());
        let bad = ComplexMatrix::diagonal(&[1.5, -0.5, 0.0, 0.0]);
        assert!(matches!(
            validate_density(&bad),
            Err(QmtError::InvalidDensity(_))
        ));
    }

    #[test]
    fn random_models_are_valid_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (rho, _, df) = random_commuting_model(&mut rng).unwrap();
            validate_density(&rho).unwrap();
            assert!((df.total().re - 1.0).abs() < 1e-10);
            let p = experimental_probabilities(&df).unwrap();
            assert!(max_chsh_q(&p).1 <= 2.0 * SQRT_2 + 1e-9);
        }
    }

    #[test]
    fn d_sym_obeys_level_two_sum_rules() {
        let df = d_sym();
        let s = joint_space();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let labels: Vec<u8> = (0..16).map(|_| rng.gen_range(0..4)).collect();
            let ev = |k: u8| Event::from_predicate(&s, |a| labels[a] == k);
            let i3 = interference(&df, &[ev(1), ev(2), ev(3)]).unwrap();
            assert!(i3.abs() < 1e-12);
        }
        // Restrictions to eight atoms are small enough for the exhaustive level check.
        for start in [0usize, 4, 8] {
            let atoms: Vec<usize> = (start..start + 8).collect();
            let sub = ComplexMatrix::from_fn(8, 8, |r, c| df.entry(atoms[r], atoms[c]));
            let sub = DecoherenceFunctional::new(&SampleSpace::numbered(8).unwrap(), sub).unwrap();
            let r = measure_level(&sub, 3).unwrap();
            assert!(r.level.is_some_and(|k| k <= 2));
            assert!(r.hierarchy_holds);
        }
    }
}
