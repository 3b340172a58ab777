use dyadic_core::linalg::{expm_generator, DenseMatrix};
use dyadic_core::{
    build_q_matrix, forward_with_integral, h_minus_one_drift, h_minus_one_functional, regularity_bound,
    solve_forward, truncated_stationary, Boundary, ModelParams, MomentVector, SobolevIndex, TruncationSpec,
};
use proptest::prelude::*;

// Reference values below were computed with 60-digit arithmetic (mpmath
// expm of the dense generator), independently of this crate.

const ABS14: [f64; 14] = [
    0.45582971120535015,
    0.13425823608539069,
    0.034790770384304782,
    0.0087735551934932974,
    0.002198116203933294,
    0.00054982284032882693,
    0.00013747259355135916,
    3.4367728480929933e-5,
    8.5904308493949554e-6,
    2.1460388693847926e-6,
    5.3493665422990448e-7,
    1.3216083745532901e-7,
    3.1466867018443987e-8,
    6.2933734423631793e-9,
];

const CONS14: [f64; 14] = [
    0.45915129038883226,
    0.14799991182945629,
    0.057834063312368457,
    0.036136989185913963,
    0.031148015315026243,
    0.030022299235383875,
    0.029771966116444733,
    0.029717196474232105,
    0.029705459641991453,
    0.029703014444700916,
    0.029702525404122313,
    0.029702433708966252,
    0.029702418426438567,
    0.029702416516122569,
];

const FORCED_ABS8: [f64; 8] = [
    0.25142795143583429,
    0.058201349425634606,
    0.01424373555640035,
    0.0035391514953163277,
    0.00088099943481827233,
    0.0002175859464893581,
    5.1802079257966238e-5,
    1.03602503308148e-5,
];

const FORCED_CONS6: [f64; 6] = [
    0.36637253554802343,
    0.21391442512664789,
    0.18452655703228278,
    0.17904239435016786,
    0.17812911595867864,
    0.1780149719841994,
];

const LAM15_ABS10: [f64; 10] = [
    0.093088434501527495,
    0.12372429662705678,
    0.086661521859653479,
    0.046543866042539259,
    0.022364636053913623,
    0.010200879213228801,
    0.0045021462331193496,
    0.0019115374559620314,
    0.00074920705340020125,
    0.00023070624191670577,
];

fn final_state(lambda: f64, sigma: f64, trunc: TruncationSpec, u0: MomentVector, t: f64) -> Vec<f64> {
    let params = ModelParams::new(lambda, sigma).unwrap();
    let q = build_q_matrix(&params, &trunc).unwrap();
    let sol = solve_forward(&q, &u0, sigma, t, 4).unwrap();
    assert!(sol.self_check < 1e-8, "self check {}", sol.self_check);
    sol.last().as_slice().to_vec()
}

fn assert_rel(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (n, (g, w)) in got.iter().zip(want).enumerate() {
        let rel = (g - w).abs() / w.abs();
        assert!(rel < tol, "mode {}: {g:e} vs {w:e} (rel {rel:e})", n + 1);
    }
}

#[test]
fn absorbing_unforced_matches_reference() {
    let u = final_state(2.0, 0.0, TruncationSpec::absorbing(14).unwrap(), MomentVector::unit(14, 1).unwrap(), 0.25);
    assert_rel(&u, &ABS14, 1e-9);
    let total: f64 = u.iter().sum();
    assert!((total - 0.63658349356228425).abs() < 1e-12);
}

#[test]
fn conservative_unforced_matches_reference() {
    let u = final_state(2.0, 0.0, TruncationSpec::conservative(14).unwrap(), MomentVector::unit(14, 1).unwrap(), 0.25);
    assert_rel(&u, &CONS14, 1e-9);
    assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-13);
}

#[test]
fn forced_runs_match_reference() {
    let u = final_state(2.0, 1.0, TruncationSpec::absorbing(8).unwrap(), MomentVector::zeros(8), 0.5);
    assert_rel(&u, &FORCED_ABS8, 1e-9);

    let u = final_state(2.0, 1.0, TruncationSpec::conservative(6).unwrap(), MomentVector::unit(6, 2).unwrap(), 0.3);
    assert_rel(&u, &FORCED_CONS6, 1e-9);
    assert!((u.iter().sum::<f64>() - 1.3).abs() < 1e-13);
}

#[test]
fn other_lambda_matches_reference() {
    let u = final_state(1.5, 0.0, TruncationSpec::absorbing(10).unwrap(), MomentVector::unit(10, 3).unwrap(), 0.4);
    assert_rel(&u, &LAM15_ABS10, 1e-9);
}

#[test]
fn large_absorbing_truncation_survival() {
    // N = 40 resolves the survival mass of the infinite system at t = 1 to
    // far below double precision.
    let u = final_state(2.0, 0.0, TruncationSpec::absorbing(40).unwrap(), MomentVector::unit(40, 1).unwrap(), 1.0);
    let total: f64 = u.iter().sum();
    assert!((total - 0.080302961553715087).abs() < 1e-12, "{total}");
}

#[test]
fn truncated_stationary_closed_form() {
    for &(lambda, sigma, n) in &[(2.0, 1.0, 8usize), (2.0, 0.3, 16), (1.5, 2.0, 12), (3.0, 1.0, 5)] {
        let params = ModelParams::new(lambda, sigma).unwrap();
        let q = build_q_matrix(&params, &TruncationSpec::absorbing(n).unwrap()).unwrap();
        let s = truncated_stationary(&q, sigma).unwrap();
        let r = 1.0 / (lambda * lambda);
        for m in 1..=n {
            let full = sigma * sigma * r.powi(m as i32) / (1.0 - r);
            let want = full * (1.0 - r.powi((n + 1 - m) as i32));
            let rel = (s.mode(m) - want).abs() / want;
            assert!(rel < 1e-12, "lambda {lambda} n {n} mode {m}: rel {rel:e}");
        }
    }
}

#[test]
fn truncated_stationary_rejects_conservative() {
    let params = ModelParams::new(2.0, 1.0).unwrap();
    let q = build_q_matrix(&params, &TruncationSpec::conservative(6).unwrap()).unwrap();
    assert!(truncated_stationary(&q, 1.0).is_err());
}

#[test]
fn generator_rows() {
    let params = ModelParams::new(2.0, 0.0).unwrap();
    let cons = build_q_matrix(&params, &TruncationSpec::conservative(9).unwrap()).unwrap();
    for s in cons.row_sums() {
        assert_eq!(s, 0.0);
    }
    let abs = build_q_matrix(&params, &TruncationSpec::absorbing(9).unwrap()).unwrap();
    let sums = abs.row_sums();
    for s in &sums[..8] {
        assert_eq!(*s, 0.0);
    }
    assert_eq!(sums[8], -(4f64.powi(9)));
    assert_eq!(abs.entry(1, 2), 4.0);
    assert_eq!(abs.entry(2, 1), 4.0);
    assert_eq!(abs.entry(1, 1), -4.0);
    assert_eq!(abs.entry(3, 3), -(16.0 + 64.0));
}

#[test]
fn integral_satisfies_the_equation() {
    // u(h) - u(0) = (int u) Pi + sigma^2 h e_1
    let params = ModelParams::new(2.0, 0.7).unwrap();
    for boundary in [Boundary::Absorbing, Boundary::Conservative] {
        let trunc = TruncationSpec::new(10, boundary).unwrap();
        let q = build_q_matrix(&params, &trunc).unwrap();
        let u0 = MomentVector::new(vec![0.2, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.1, 0.0, 0.0]).unwrap();
        let h = 0.3;
        let (u, integral) = forward_with_integral(&q, &u0, 0.7, h).unwrap();
        let mut rhs = q.apply(&integral);
        rhs[0] += 0.49 * h;
        for n in 0..10 {
            let lhs = u.as_slice()[n] - u0.as_slice()[n];
            assert!((lhs - rhs[n]).abs() < 1e-10 * (1.0 + lhs.abs()), "{boundary:?} mode {}", n + 1);
        }
        let direct = solve_forward(&q, &u0, 0.7, h, 1).unwrap();
        for (a, b) in u.as_slice().iter().zip(direct.last().as_slice()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn h_minus_one_drift_is_the_derivative() {
    let params = ModelParams::new(2.0, 0.0).unwrap();
    let q = build_q_matrix(&params, &TruncationSpec::absorbing(8).unwrap()).unwrap();
    let u = MomentVector::new(vec![1.0, 2.0, 0.5, 0.0, 0.0, 0.3, 0.0, 4.0]).unwrap();
    let du = q.apply(u.as_slice());
    let mut derivative = 0.0;
    for (n, d) in du.iter().enumerate() {
        derivative += d / 4f64.powi(n as i32 + 1);
    }
    assert!((h_minus_one_drift(&u, &params) - derivative).abs() < 1e-12);
    let f = h_minus_one_functional(&u, &params).unwrap();
    assert!((f - (0.25 + 2.0 / 16.0 + 0.5 / 64.0 + 0.3 / 4096.0 + 4.0 / 65536.0)).abs() < 1e-15);
}

#[test]
fn regularity_bound_unit_profile() {
    // ubar = e_1, beta = 0: sum_j k_{max(1,j)}^{-2} / (1 - 1/4) -> (1/4)/(3/4) / (3/4) = 4/9
    let params = ModelParams::new(2.0, 1.0).unwrap();
    let b = regularity_bound(&MomentVector::unit(1, 1).unwrap(), SobolevIndex::new(0.0).unwrap(), &params, 60).unwrap();
    assert!((b.value - 4.0 / 9.0).abs() < 1e-15, "{}", b.value);
    assert!(!b.divergent);
    let b = regularity_bound(&MomentVector::unit(1, 1).unwrap(), SobolevIndex::new(1.0).unwrap(), &params, 60).unwrap();
    assert!(b.divergent);
    assert!((b.last_term - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn forward_rejects_bad_input() {
    let params = ModelParams::new(2.0, 1.0).unwrap();
    let q = build_q_matrix(&params, &TruncationSpec::absorbing(4).unwrap()).unwrap();
    assert!(solve_forward(&q, &MomentVector::zeros(3), 1.0, 1.0, 2).is_err());
    assert!(solve_forward(&q, &MomentVector::zeros(4), 1.0, -1.0, 2).is_err());
    assert!(solve_forward(&q, &MomentVector::zeros(4), 1.0, 1.0, 0).is_err());
    assert!(MomentVector::new(vec![1.0, -0.5]).is_err());
}

#[test]
fn two_state_generator_exponential() {
    let (a, b, t) = (3.0, 0.5, 0.7);
    let mut g = DenseMatrix::zeros(2);
    g[(0, 0)] = -a * t;
    g[(0, 1)] = a * t;
    g[(1, 0)] = b * t;
    g[(1, 1)] = -b * t;
    let p = expm_generator(&g).unwrap();
    let decay = (-(a + b) * t).exp();
    let p00 = (b + a * decay) / (a + b);
    let p11 = (a + b * decay) / (a + b);
    assert!((p[(0, 0)] - p00).abs() < 1e-15);
    assert!((p[(0, 1)] - (1.0 - p00)).abs() < 1e-15);
    assert!((p[(1, 1)] - p11).abs() < 1e-15);
}

#[test]
fn stiff_generator_rows_stay_stochastic() {
    let params = ModelParams::new(2.0, 0.0).unwrap();
    let q = build_q_matrix(&params, &TruncationSpec::conservative(30).unwrap()).unwrap();
    let g = q.to_dense();
    let p = expm_generator(&g).unwrap();
    for i in 0..30 {
        let mut s = 0.0;
        for j in 0..30 {
            assert!(p[(i, j)] >= 0.0);
            s += p[(i, j)];
        }
        assert!((s - 1.0).abs() < 1e-13, "row {i}: {s}");
    }
}

fn profile(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conservative_mass_law(
        lambda in 1.2..3.0f64,
        sigma in 0.0..2.0f64,
        n in 3usize..20,
        t in 0.01..2.0f64,
        seed_profile in profile(20),
    ) {
        let params = ModelParams::new(lambda, sigma).unwrap();
        let q = build_q_matrix(&params, &TruncationSpec::conservative(n).unwrap()).unwrap();
        let u0 = MomentVector::new(seed_profile[..n].to_vec()).unwrap();
        let sol = solve_forward(&q, &u0, sigma, t, 3).unwrap();
        let want = u0.total() + sigma * sigma * t;
        prop_assert!((sol.last().total() - want).abs() <= 1e-11 * (1.0 + want));
        for v in sol.last().as_slice() {
            prop_assert!(*v >= 0.0);
        }
    }

    #[test]
    fn absorbing_mass_decreases_without_forcing(
        lambda in 1.2..3.0f64,
        n in 3usize..20,
        t in 0.01..1.0f64,
        seed_profile in profile(20),
    ) {
        let params = ModelParams::new(lambda, 0.0).unwrap();
        let q = build_q_matrix(&params, &TruncationSpec::absorbing(n).unwrap()).unwrap();
        let u0 = MomentVector::new(seed_profile[..n].to_vec()).unwrap();
        let sol = solve_forward(&q, &u0, 0.0, t, 8).unwrap();
        for pair in sol.states.windows(2) {
            prop_assert!(pair[1].total() <= pair[0].total() * (1.0 + 1e-13) + 1e-300);
        }
    }

    #[test]
    fn transition_function_is_symmetric(
        lambda in 1.2..3.0f64,
        n in 3usize..16,
        i in 1usize..16,
        j in 1usize..16,
        t in 0.01..1.0f64,
        absorbing in any::<bool>(),
    ) {
        let (i, j) = (1 + (i - 1) % n, 1 + (j - 1) % n);
        let params = ModelParams::new(lambda, 0.0).unwrap();
        let boundary = if absorbing { Boundary::Absorbing } else { Boundary::Conservative };
        let q = build_q_matrix(&params, &TruncationSpec::new(n, boundary).unwrap()).unwrap();
        let from_i = solve_forward(&q, &MomentVector::unit(n, i).unwrap(), 0.0, t, 1).unwrap();
        let from_j = solve_forward(&q, &MomentVector::unit(n, j).unwrap(), 0.0, t, 1).unwrap();
        let (a, b) = (from_i.last().mode(j), from_j.last().mode(i));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b) + 1e-300, "{} vs {}", a, b);
    }

    #[test]
    fn forcing_enters_linearly_in_sigma_squared(
        sigma in 0.1..3.0f64,
        n in 3usize..14,
        t in 0.05..1.0f64,
        absorbing in any::<bool>(),
    ) {
        let boundary = if absorbing { Boundary::Absorbing } else { Boundary::Conservative };
        let trunc = TruncationSpec::new(n, boundary).unwrap();
        let one = ModelParams::new(2.0, 1.0).unwrap();
        let q = build_q_matrix(&one, &trunc).unwrap();
        let base = solve_forward(&q, &MomentVector::zeros(n), 1.0, t, 2).unwrap();
        let scaled = solve_forward(&q, &MomentVector::zeros(n), sigma, t, 2).unwrap();
        for (a, b) in base.last().as_slice().iter().zip(scaled.last().as_slice()) {
            prop_assert!((a * sigma * sigma - b).abs() <= 1e-12 * b.abs() + 1e-300);
        }
    }
}
