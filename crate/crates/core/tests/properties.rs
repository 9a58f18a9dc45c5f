use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use qmt_core::epr::{
    check_nonsignaling, classical_df, classical_joint_marginals, correlator,
    experimental_probabilities, joint_space, marginals, max_chsh_q, ExperimentalProbabilities,
    SettingPair, N_ATOMS, TSIRELSON,
};
use qmt_core::gns::{gns_construct_default, inner, norm_sum, setting_vector, GnsVector};
use qmt_core::linalg::hermitian_eigen;
use qmt_core::quantum::random_commuting_model;
use qmt_core::screening::{
    augment_classical, augment_quantal, check_classical_screening, check_quantal_screening,
    conditional_experimental_probabilities, joint_from_screening, random_screening_model,
    SettingWeights,
};
use qmt_core::subsets::measure_table;
use qmt_core::{
    check_strong_positivity, check_weak_positivity, interference, ClassicalMeasure, Complex64,
    ComplexMatrix, DecoherenceFunctional, Event, Measure, SampleSpace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G†` for a random complex `n×k` matrix `G`, scaled so the entries sum to 1
/// when that sum is not tiny.
fn random_psd(r: &mut ChaCha8Rng, n: usize, k: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, k, |_, _| {
        Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    });
    let m = &g * &g.adjoint();
    let total: Complex64 = m.as_slice().iter().sum();
    if total.re > 1e-3 {
        m.scale(Complex64::new(1.0 / total.re, 0.0))
    } else {
        m
    }
}

fn random_df(seed: u64, n: usize) -> DecoherenceFunctional {
    let mut r = rng(seed);
    let k = r.gen_range(1..=n);
    let m = random_psd(&mut r, n, k);
    DecoherenceFunctional::new(&SampleSpace::numbered(n).unwrap(), m).unwrap()
}

fn random_classical_hat(seed: u64) -> ClassicalMeasure {
    let mut r = rng(seed);
    let mut w: Vec<f64> = (0..N_ATOMS).map(|_| r.gen::<f64>().powi(3)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    ClassicalMeasure::normalized(&joint_space(), w).unwrap()
}

/// Three disjoint events from a random colouring of the atoms; colour 3 is unused.
fn disjoint_events(space: &std::sync::Arc<SampleSpace>, colours: &[u8]) -> Vec<Event> {
    (0..3u8)
        .map(|k| Event::from_predicate(space, |a| colours[a % colours.len()] % 4 == k))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_is_hermitian_and_biadditive(seed in any::<u64>(), n in 2usize..=8, xm in any::<u64>(), ym in any::<u64>(), zm in any::<u64>()) {
        let df = random_df(seed, n);
        let space = df.space().clone();
        let full = (1u64 << n) - 1;
        let z = Event::from_mask(&space, zm & full).unwrap();
        let x = Event::from_mask(&space, xm & full).unwrap();
        // Y disjoint from X.
        let y = Event::from_mask(&space, ym & full & !(xm & full)).unwrap();
        let xz = df.pair(&x, &z).unwrap();
        let zx = df.pair(&z, &x).unwrap();
        prop_assert!((xz - zx.conj()).norm() < 1e-12);
        let lhs = df.pair(&x.union(&y).unwrap(), &z).unwrap();
        let rhs = xz + df.pair(&y, &z).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn strong_positivity_implies_weak(seed in any::<u64>(), n in 1usize..=10) {
        let df = random_df(seed, n);
        let strong = check_strong_positivity(&df).unwrap();
        prop_assert!(strong.holds);
        prop_assert!(check_weak_positivity(&df).unwrap().holds);
    }

    #[test]
    fn quantal_measures_have_no_third_order_interference(seed in any::<u64>(), n in 3usize..=8, colours in prop::collection::vec(any::<u8>(), 8)) {
        let df = random_df(seed, n);
        let ev = disjoint_events(df.space(), &colours);
        prop_assume!(ev.iter().all(|e| !e.is_empty()));
        prop_assert!(interference(&df, &ev).unwrap().abs() < 1e-12);
    }

    #[test]
    fn classical_measures_have_no_second_order_interference(w in prop::collection::vec(0.0f64..1.0, 2..=8), split in any::<u64>()) {
        let n = w.len();
        let m = ClassicalMeasure::new(&SampleSpace::numbered(n).unwrap(), w).unwrap();
        let space = m.space().clone();
        let x = Event::from_predicate(&space, |a| split >> a & 1 == 1);
        let y = x.complement();
        prop_assume!(!x.is_empty() && !y.is_empty());
        prop_assert!(interference(&m, &[x, y]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eigen_trace_and_orthonormality(seed in any::<u64>(), n in 1usize..=16) {
        let mut r = rng(seed);
        let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
        let h = &g + &g.adjoint();
        let eig = hermitian_eigen(&h).unwrap();
        let sum: f64 = eig.values.iter().sum();
        prop_assert!((sum - h.trace().re).abs() < 1e-10);
        let u = &eig.vectors;
        let gram = &u.adjoint() * u;
        prop_assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-10);
    }

    #[test]
    fn gray_table_matches_double_sum(seed in any::<u64>(), n in 1usize..=8) {
        let df = random_df(seed, n);
        let re = df.real_form();
        let table = measure_table(&re, n);
        for mask in 0u64..1 << n {
            let atoms: Vec<usize> = (0..n).filter(|&a| mask >> a & 1 == 1).collect();
            let naive: f64 = atoms.iter().flat_map(|&x| atoms.iter().map(move |&y| (x, y))).map(|(x, y)| re[x * n + y]).sum();
            prop_assert!((table[mask as usize] - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_joint_obeys_chshb(seed in any::<u64>()) {
        let (_, q) = max_chsh_q(&classical_joint_marginals(&random_classical_hat(seed)).unwrap());
        prop_assert!(q <= 2.0 + 1e-9);
    }

    #[test]
    fn diagonal_embedding_commutes_with_marginals(seed in any::<u64>()) {
        let mu = random_classical_hat(seed);
        let via_df = experimental_probabilities(&classical_df(&mu).unwrap()).unwrap();
        prop_assert_eq!(via_df, classical_joint_marginals(&mu).unwrap());
    }

    #[test]
    fn correlator_survives_joint_relabelling(seed in any::<u64>(), k in 0usize..4) {
        let p = classical_joint_marginals(&random_classical_hat(seed)).unwrap();
        let mut blocks = [[[0.0; 2]; 2]; 4];
        for pair in SettingPair::ALL {
            let b = p.block(pair);
            blocks[pair.index()] = if pair.index() == k { [[b[1][1], b[1][0]], [b[0][1], b[0][0]]] } else { b };
        }
        let q = ExperimentalProbabilities::from_blocks(blocks).unwrap();
        for pair in SettingPair::ALL {
            prop_assert!((correlator(&p, pair) - correlator(&q, pair)).abs() < 1e-15);
        }
    }

    #[test]
    fn quantum_models_respect_tsirelson(seed in any::<u64>()) {
        let (_, _, df) = random_commuting_model(&mut rng(seed)).unwrap();
        prop_assert!((df.total().re - 1.0).abs() < 1e-10);
        prop_assert!(check_strong_positivity(&df).unwrap().holds);
        for m in marginals(&df).unwrap() {
            prop_assert!(m.max_off_diagonal() <= 1e-9);
        }
        let p = experimental_probabilities(&df).unwrap();
        prop_assert!(check_nonsignaling(&p));
        prop_assert!(max_chsh_q(&p).1 <= TSIRELSON + 1e-9);
    }

    #[test]
    fn setting_vectors_reproduce_correlators(seed in any::<u64>()) {
        let (_, _, df) = random_commuting_model(&mut rng(seed)).unwrap();
        let space = gns_construct_default(&df).unwrap();
        let p = experimental_probabilities(&df).unwrap();
        for pair in SettingPair::ALL {
            let u = setting_vector(&space, pair.alpha_setting()).unwrap();
            let v = setting_vector(&space, pair.beta_setting()).unwrap();
            prop_assert!((u.norm() - 1.0).abs() < 1e-9 && (v.norm() - 1.0).abs() < 1e-9);
            let ip = inner(&space, &u, &v).unwrap();
            prop_assert!((ip.re - correlator(&p, pair)).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_vector_norm_sum_bound(seed in any::<u64>(), d in 1usize..=8) {
        let mut r = rng(seed);
        let mut unit = || {
            let v: Vec<Complex64> = (0..d).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            GnsVector::new(v.into_iter().map(|z| z / n).collect()).unwrap()
        };
        let (u, v) = (unit(), unit());
        prop_assert!(norm_sum(&u, &v) <= 2.0 * SQRT_2 + 1e-12);
    }

    #[test]
    fn gns_rank_ignores_atom_order(seed in any::<u64>(), n in 2usize..=10, shuffle in any::<u64>()) {
        let df = random_df(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng(shuffle);
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let m = df.matrix();
        let pm = ComplexMatrix::from_fn(n, n, |x, y| m[(perm[x], perm[y])]);
        let permuted = DecoherenceFunctional::new(df.space(), pm).unwrap();
        let a = gns_construct_default(&df).unwrap();
        let b = gns_construct_default(&permuted).unwrap();
        prop_assert_eq!(a.rank(), b.rank());
        prop_assert!(a.reconstruction_error() < 1e-9 && b.reconstruction_error() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn screening_round_trip(seed in any::<u64>(), n_past in 1usize..=4) {
        let model = random_screening_model(&mut rng(seed), n_past).unwrap();
        prop_assert!(check_classical_screening(&model).unwrap().holds);
        let mu_hat = joint_from_screening(&model).unwrap();
        let joint = classical_joint_marginals(&mu_hat).unwrap();
        let cond = conditional_experimental_probabilities(&model).unwrap();
        prop_assert!(joint.max_abs_diff(&cond) < 1e-12);
        prop_assert!(max_chsh_q(&joint).1 <= 2.0 + 1e-9);
        let w = model.setting_weights().unwrap();
        let back = augment_classical(&mu_hat, &w).unwrap();
        prop_assert!(check_classical_screening(&back).unwrap().holds);
        let again = conditional_experimental_probabilities(&back).unwrap();
        prop_assert!(again.max_abs_diff(&joint) < 1e-12);
    }

    #[test]
    fn quantal_augmentation_screens_off(seed in any::<u64>(), wa in 0.05f64..0.95, wb in 0.05f64..0.95) {
        let (_, _, df) = random_commuting_model(&mut rng(seed)).unwrap();
        let w = SettingWeights::product([wa, 1.0 - wa], [wb, 1.0 - wb]).unwrap();
        let model = augment_quantal(&df, &w).unwrap();
        let report = check_quantal_screening(&model).unwrap();
        prop_assert!(report.holds, "{:?}", report);
        prop_assert!(report.max_residual() < 1e-10);
        prop_assert!(check_strong_positivity(&model.decoherence_functional()).unwrap().holds);
    }
}
