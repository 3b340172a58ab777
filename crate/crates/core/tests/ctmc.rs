use dyadic_core::ctmc::{
    cap_bias_bound, estimate_survival_grid, expected_lifetime, expected_occupation, holding_rate, jump_up_probability,
    never_visit_probability, simulate_chain, survival_threshold, survival_upper_bound,
};
use dyadic_core::stats::MeanEstimate;
use dyadic_core::ModelParams;
use proptest::prelude::*;

fn params(lambda: f64) -> ModelParams {
    ModelParams::new(lambda, 0.0).unwrap()
}

/// Dense Gauss-Jordan inverse, small matrices only.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

/// Green's function of the chain killed on leaving `1..=m`: entry `(i, j)`
/// is the expected time spent in `j` from `i`.
fn green(lambda: f64, m: usize) -> Vec<Vec<f64>> {
    let k2 = |n: usize| lambda.powi(2 * n as i32);
    let mut minus_q = vec![vec![0.0; m]; m];
    for s in 1..=m {
        let down = if s > 1 { k2(s - 1) } else { 0.0 };
        let up = k2(s);
        minus_q[s - 1][s - 1] = down + up;
        if s > 1 {
            minus_q[s - 1][s - 2] = -down;
        }
        if s < m {
            minus_q[s - 1][s] = -up;
        }
    }
    invert(minus_q)
}

#[test]
fn occupation_matches_greens_function() {
    for lambda in [2.0, 1.5] {
        let g = green(lambda, 40);
        for i in 1..=6u32 {
            for j in 1..=6u32 {
                let got = expected_occupation(i, j, &params(lambda)).unwrap();
                let want = g[i as usize - 1][j as usize - 1];
                assert!((got - want).abs() < 1e-9 * want, "lambda {lambda} ({i},{j}): {got} vs {want}");
            }
            let lifetime: f64 = g[i as usize - 1].iter().sum();
            let got = expected_lifetime(i, &params(lambda)).unwrap();
            assert!((got - lifetime).abs() < 1e-6 * lifetime, "lambda {lambda} i {i}: {got} vs {lifetime}");
        }
    }
    assert!((expected_lifetime(1, &params(2.0)).unwrap() - 4.0 / 9.0).abs() < 1e-15);
}

#[test]
fn never_visit_matches_gamblers_ruin() {
    // probability of reaching m before j, from i, for the embedded walk
    let lambda = 2.0;
    let theta = jump_up_probability(2, &params(lambda)).unwrap();
    assert!((theta - 0.8).abs() < 1e-15);
    let m = 80usize;
    for j in 1..=4usize {
        let mut h = vec![0.0; m + 1];
        h[m] = 1.0;
        for _ in 0..20000 {
            for s in j + 1..m {
                h[s] = theta * h[s + 1] + (1.0 - theta) * h[s - 1];
            }
        }
        for i in j + 1..j + 6 {
            let got = never_visit_probability(i as u32, j as u32, &params(lambda)).unwrap();
            assert!((got - h[i]).abs() < 1e-9, "({i},{j}): {got} vs {}", h[i]);
        }
    }
    assert_eq!(never_visit_probability(3, 5, &params(2.0)).unwrap(), 0.0);
    assert_eq!(never_visit_probability(4, 4, &params(2.0)).unwrap(), 0.0);
}

#[test]
fn rates_and_bounds() {
    let p = params(2.0);
    assert_eq!(holding_rate(1, &p).unwrap(), 4.0);
    assert_eq!(holding_rate(3, &p).unwrap(), 16.0 + 64.0);
    assert_eq!(jump_up_probability(1, &p).unwrap(), 1.0);
    assert!(holding_rate(0, &p).is_err());
    assert!((survival_threshold(&p) - 0.410_753_884_776_263_9).abs() < 1e-15);
    assert!((survival_upper_bound(1.0, &p).unwrap() - 0.226_965_862_970_815_03).abs() < 1e-15);
    assert!((survival_upper_bound(survival_threshold(&p), &p).unwrap() - 1.0).abs() < 1e-12);
    // bias bound: holding rate at the start times the expected lifetime from the cap
    let want = 4.0 * expected_lifetime(40, &p).unwrap();
    assert!((cap_bias_bound(1, 40, &p).unwrap() - want).abs() < 1e-30);
    assert!(cap_bias_bound(1, 40, &p).unwrap() < 1e-20);
}

#[test]
fn chain_paths_are_nearest_neighbour_walks() {
    let p = params(2.0);
    for index in 0..200 {
        let path = simulate_chain(2, f64::INFINITY, 30, 5, index, &p).unwrap();
        assert_eq!(path.visit_states[0], 2);
        for w in path.visit_states.windows(2) {
            assert_eq!(w[0].abs_diff(w[1]), 1);
            if w[0] == 1 {
                assert_eq!(w[1], 2);
            }
        }
        assert!(path.visit_states.iter().all(|&s| s >= 1));
        assert!(path.holding_times.iter().all(|&h| h > 0.0));
        assert!(path.exploded);
        let total: f64 = path.occupation.iter().sum();
        assert!((total - path.elapsed()).abs() < 1e-12 * (1.0 + total));
        let again = simulate_chain(2, f64::INFINITY, 30, 5, index, &p).unwrap();
        assert_eq!(path, again);
    }
}

#[test]
fn state_at_follows_the_holding_times() {
    let p = params(2.0);
    let path = simulate_chain(1, 10.0, 40, 3, 0, &p).unwrap();
    assert_eq!(path.state_at(0.0), Some(1));
    let first = path.holding_times[0];
    assert_eq!(path.state_at(0.999 * first), Some(1));
    if path.visit_states.len() > 1 {
        assert_eq!(path.state_at(first * 1.000001), Some(path.visit_states[1]));
    }
    if path.exploded {
        assert_eq!(path.state_at(path.elapsed() + 1.0), None);
    }
}

#[test]
fn first_holding_time_is_exponential() {
    let p = params(2.0);
    let first: Vec<f64> = (0..20_000)
        .map(|i| simulate_chain(1, f64::INFINITY, 40, 77, i, &p).unwrap().holding_times[0])
        .collect();
    let est = MeanEstimate::from_samples(&first);
    assert!(est.covers(0.25, 4.0, 0.0), "{} +- {}", est.mean, est.se);
    let squares: Vec<f64> = first.iter().map(|h| h * h).collect();
    let m2 = MeanEstimate::from_samples(&squares);
    assert!(m2.covers(2.0 * 0.0625, 4.0, 0.0), "{} +- {}", m2.mean, m2.se);
}

#[test]
fn survival_grid_is_monotone() {
    let p = params(2.0);
    let grid = [0.1, 0.2, 0.4, 0.8, 1.6];
    let est = estimate_survival_grid(1, &grid, &p, 2000, 13, 40).unwrap();
    for w in est.windows(2) {
        assert!(w[1].point <= w[0].point);
    }
    for e in &est {
        assert!(e.ci_low <= e.point && e.point <= e.ci_high);
    }
    assert!(estimate_survival_grid(1, &grid, &p, 10, 13, 40).is_err());
}

proptest! {
    #[test]
    fn closed_forms_are_consistent(lambda in 1.1..4.0f64, i in 1u32..12, j in 1u32..12) {
        let p = params(lambda);
        let pi = never_visit_probability(i, j, &p).unwrap();
        prop_assert!((0.0..1.0).contains(&pi));
        prop_assert!(never_visit_probability(i + 1, j, &p).unwrap() >= pi);
        let a = expected_occupation(i, j, &p).unwrap();
        let b = expected_occupation(j, i, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a);
        // visiting j at all, then the occupation from j
        let visit = 1.0 - pi;
        let from_j = expected_occupation(j, j, &p).unwrap();
        // 1 - pi cancels when i is far above j
        prop_assert!((a - visit * from_j).abs() <= 1e-12 * a + 4.0 * f64::EPSILON * from_j);
        prop_assert!(cap_bias_bound(i, i + 10, &p).unwrap() < cap_bias_bound(i, i + 5, &p).unwrap());
    }
}
