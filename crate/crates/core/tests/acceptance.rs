//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::time::{Duration, Instant};

use qmt_core::epr::{
    classical_joint_marginals, correlators, experimental_probabilities, joint_space, marginals,
    max_chsh_q, SignPattern, N_ATOMS, TSIRELSON,
};
use qmt_core::gns::{gns_construct_default, tsirelson_certificate};
use qmt_core::lp::{
    build_max_q_lp, section5_example, solve_lp, verify_candidate, LpMode, LpOptions, LpStatus,
};
use qmt_core::measure::measure_level;
use qmt_core::quantum::{
    build_df_commuting, build_df_sym, closed_form_directions, d_sym, df_sym_closed_form,
    pure_density, random_commuting_model, singlet_state, standard_directions, ProjectorFamily,
};
use qmt_core::screening::{
    augment_classical, augment_quantal, check_classical_screening, check_quantal_screening,
    conditional_experimental_probabilities, joint_from_screening, random_screening_model,
    SettingWeights,
};
use qmt_core::{
    check_strong_positivity, check_weak_positivity, eigensignature, ClassicalMeasure, Complex64,
    ComplexMatrix, DecoherenceFunctional, SampleSpace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x9e37_79b9;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (
        e < limit,
        format!("{:.3}s (limit {}s)", e.as_secs_f64(), limit.as_secs()),
    )
}

fn closed_form_equation() -> Outcome {
    let t = Instant::now();
    let built = build_df_sym(&singlet_state(), &closed_form_directions()).unwrap();
    let mut worst: f64 = 0.0;
    for x in 0..N_ATOMS {
        for y in 0..N_ATOMS {
            let d = built.entry(x, y) - Complex64::new(df_sym_closed_form(x, y), 0.0);
            worst = worst.max(d.norm());
        }
    }
    let (fast, time) = within(t, Duration::from_secs(1));
    outcome(
        worst < 1e-12 && fast,
        format!("max |Δ| = {worst:.2e} over 256 entries, {time}"),
    )
}

fn sym_spectrum() -> Outcome {
    let t = Instant::now();
    let df = d_sym();
    let sig = eigensignature(&df, 1e-8 * df.matrix().max_abs()).unwrap();
    let rank = gns_construct_default(&df).unwrap().rank();
    let (fast, time) = within(t, Duration::from_secs(1));
    outcome(
        sig.as_tuple() == (0, 12, 4) && rank == 4 && fast,
        format!("signature {:?}, GNS rank {rank}, {time}", sig.as_tuple()),
    )
}

fn tsirelson_saturation() -> Outcome {
    let df = build_df_sym(&singlet_state(), &standard_directions()).unwrap();
    let p = experimental_probabilities(&df).unwrap();
    let (pattern, q) = max_chsh_q(&p);
    let expected: SignPattern = "+++-".parse().unwrap();
    let cert = tsirelson_certificate(&gns_construct_default(&df).unwrap()).unwrap();
    let corr = correlators(&p);
    let gap = cert
        .inner_correlators
        .iter()
        .zip(corr)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        (q - TSIRELSON).abs() < 1e-10 && pattern == expected && gap < 1e-9,
        format!("max Q = {q:.12} under {pattern}, inner products vs correlators {gap:.1e}"),
    )
}

fn q4_example_audit() -> Outcome {
    let t = Instant::now();
    let df = section5_example();
    let audit = verify_candidate(df.matrix(), "+-++".parse().unwrap()).unwrap();
    let halves = audit.one_sided.values().all(|v| (v - 0.5).abs() < 1e-12);
    let (fast, time) = within(t, Duration::from_secs(5));
    let ok = audit.hermitian
        && audit.normalized
        && audit.marginals_diagonal
        && audit.weak.holds
        && !audit.strong.holds
        && audit.signature.as_tuple() == (4, 8, 4)
        && audit.q == 4.0
        && halves
        && fast;
    outcome(
        ok,
        format!(
            "weak {} over {} subsets, strong {}, signature {:?}, Q = {}, one-sided 1/2: {halves}, {time}",
            audit.weak.holds,
            (1u64 << N_ATOMS) - 1,
            audit.strong.holds,
            audit.signature.as_tuple(),
            audit.q
        ),
    )
}

fn sym_weak_interior() -> Outcome {
    let t = Instant::now();
    let report = check_weak_positivity(&d_sym()).unwrap();
    let (fast, time) = within(t, Duration::from_secs(5));
    outcome(
        report.holds && report.minimum > 0.0 && fast,
        format!(
            "min μ = {:.6e} at mask {:#06x}, {}",
            report.minimum,
            report.minimum_mask.unwrap_or(0),
            time
        ),
    )
}

fn lp_reproduction() -> Outcome {
    let t = Instant::now();
    let opts = LpOptions::default();
    let mut worst: f64 = 0.0;
    let mut all_verified = true;
    for pattern in SignPattern::all() {
        let sol = solve_lp(&build_max_q_lp(pattern, LpMode::Real), &opts).unwrap();
        worst = worst.max((sol.objective - 4.0).abs());
        let verified =
            sol.status == LpStatus::Optimal && sol.final_check.as_ref().is_some_and(|f| f.verified);
        all_verified &= verified && sol.monotone && sol.contrapositive_holds;
    }
    let (fast, time) = within(t, Duration::from_secs(60));
    outcome(
        worst < 1e-6 && all_verified && fast,
        format!("8 patterns, max |Q − 4| = {worst:.2e}, all verified: {all_verified}, {time}"),
    )
}

fn classical_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let space = joint_space();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let w: Vec<f64> = (0..N_ATOMS).map(|_| rng.gen::<f64>().powi(4)).collect();
        let mu = ClassicalMeasure::new(
            &space,
            w.iter().map(|v| v / w.iter().sum::<f64>()).collect(),
        )
        .unwrap();
        worst = worst.max(max_chsh_q(&classical_joint_marginals(&mu).unwrap()).1);
    }
    let mut w = vec![0.0; N_ATOMS];
    w[0] = 0.5;
    w[N_ATOMS - 1] = 0.5;
    let extreme =
        max_chsh_q(&classical_joint_marginals(&ClassicalMeasure::new(&space, w).unwrap()).unwrap())
            .1;
    outcome(
        worst <= 2.0 + 1e-9 && extreme == 2.0,
        format!("1000 measures, max Q = {worst:.12}; ½(++++)+½(−−−−) gives Q = {extreme}"),
    )
}

fn quantum_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_q = f64::NEG_INFINITY;
    let mut worst_off: f64 = 0.0;
    for _ in 0..200 {
        let (_, _, df) = random_commuting_model(&mut rng).unwrap();
        for m in marginals(&df).unwrap() {
            worst_off = worst_off.max(m.max_off_diagonal());
        }
        worst_q = worst_q.max(max_chsh_q(&experimental_probabilities(&df).unwrap()).1);
    }
    let rho = pure_density(&singlet_state()).unwrap();
    let fam = ProjectorFamily::from_directions(&standard_directions()).unwrap();
    let singlet = build_df_commuting(&rho, &fam).unwrap();
    let (pattern, q) = max_chsh_q(&experimental_probabilities(&singlet).unwrap());
    let singlet_ok = (q - TSIRELSON).abs() < 1e-10 && pattern.to_string() == "+++-";
    outcome(
        worst_q <= TSIRELSON + 1e-9 && worst_off <= 1e-9 && singlet_ok,
        format!("200 models, max Q = {worst_q:.12}, max off-diagonal {worst_off:.1e}; singlet Q = {q:.12} under {pattern}"),
    )
}

fn screening_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut forward: f64 = 0.0;
    let mut backward: f64 = 0.0;
    let mut screens = true;
    for k in 0..100 {
        let model = random_screening_model(&mut rng, 1 + k % 4).unwrap();
        let mu_hat = joint_from_screening(&model).unwrap();
        let joint = classical_joint_marginals(&mu_hat).unwrap();
        forward = forward
            .max(joint.max_abs_diff(&conditional_experimental_probabilities(&model).unwrap()));
        let back = augment_classical(&mu_hat, &model.setting_weights().unwrap()).unwrap();
        screens &= check_classical_screening(&back).unwrap().holds;
        backward = backward.max(
            conditional_experimental_probabilities(&back)
                .unwrap()
                .max_abs_diff(&joint),
        );
    }
    outcome(
        forward <= 1e-12 && backward <= 1e-12 && screens,
        format!("100 models, forward {forward:.1e}, backward {backward:.1e}, augmented models screen off: {screens}"),
    )
}

fn quantal_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut dfs = vec![d_sym()];
    for _ in 0..50 {
        dfs.push(random_commuting_model(&mut rng).unwrap().2);
    }
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (k, df) in dfs.iter().enumerate() {
        let w = if k == 0 {
            SettingWeights::uniform()
        } else {
            let (a, b) = (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
            SettingWeights::product([a, 1.0 - a], [b, 1.0 - b]).unwrap()
        };
        let model = augment_quantal(df, &w).unwrap();
        let report = check_quantal_screening(&model).unwrap();
        for name in ["quantal_screening", "setting_independence"] {
            let c = report.condition(name).unwrap();
            worst = worst.max(c.residual);
            ok &= c.holds && !c.skipped && c.residual < 1e-10;
        }
        ok &= check_strong_positivity(&model.decoherence_functional())
            .unwrap()
            .holds;
    }
    outcome(
        ok,
        format!(
            "D̂_sym and 50 random models, max residual {worst:.1e}, all strongly positive: {ok}"
        ),
    )
}

fn level_hierarchy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut classical_i2: f64 = 0.0;
    let mut quantal_i3: f64 = 0.0;
    let mut hierarchy = true;
    for n in 2..=8 {
        for _ in 0..3 {
            let space = SampleSpace::numbered(n).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let r = measure_level(&ClassicalMeasure::new(&space, w).unwrap(), 3).unwrap();
            classical_i2 = classical_i2.max(lookup(&r.max_interference, 2));
            hierarchy &= r.level == Some(1) && r.hierarchy_holds;

            let k = rng.gen_range(1..=n);
            let g = ComplexMatrix::from_fn(n, k, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let df = DecoherenceFunctional::new(&space, &g * &g.adjoint()).unwrap();
            let r = measure_level(&df, 3).unwrap();
            if n >= 3 {
                quantal_i3 = quantal_i3.max(lookup(&r.max_interference, 3));
            }
            hierarchy &= r.level.is_some_and(|l| l <= 2) && r.hierarchy_holds;
        }
    }
    outcome(
        classical_i2 <= 1e-12 && quantal_i3 <= 1e-12 && hierarchy,
        format!("n = 2..8, max |I_2| classical {classical_i2:.1e}, max |I_3| quantal {quantal_i3:.1e}, I_4 follows: {hierarchy}"),
    )
}

fn lookup(table: &[(usize, f64)], k: usize) -> f64 {
    table
        .iter()
        .find(|(kk, _)| *kk == k)
        .map_or(0.0, |&(_, v)| v)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        (
            "closed form equals projector construction",
            closed_form_equation,
        ),
        ("D̂_sym spectrum and GNS rank", sym_spectrum),
        ("Tsirel'son saturation", tsirelson_saturation),
        ("Q = 4 example audit", q4_example_audit),
        ("D̂_sym weak-positivity interior", sym_weak_interior),
        ("LP reproduction", lp_reproduction),
        ("classical CHSHB suite", classical_bound),
        ("quantum Tsirel'son suite", quantum_bound),
        ("classical screening round trip", screening_round_trip),
        ("quantal screening construction", quantal_construction),
        ("level hierarchy", level_hierarchy),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
        failed += usize::from(!o.ok);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
