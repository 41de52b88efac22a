use proptest::prelude::*;
use rdx_core::theory::{
    admissible_p_threshold, bootstrap_sequence, cmr_interpolation_bound, dual_exponent_condition,
    gronwall_mass_bound, select_dual_exponent,
};

#[test]
fn bootstrap_diverges_above_threshold() {
    for n in 1..=3u32 {
        for lambda in 1..=4u32 {
            let threshold = admissible_p_threshold(n, lambda);
            let starts: Vec<f64> = if threshold > 0.0 {
                [1.01, 1.5, 2.0].iter().map(|f| f * threshold).collect()
            } else {
                vec![1.01, 1.5, 2.0]
            };
            for p0 in starts.into_iter().filter(|p| *p > 1.0) {
                let r = bootstrap_sequence(p0, n, lambda, 10_000).unwrap();
                assert!(r.diverged, "n={n} λ={lambda} p0={p0}");
                let k0 = r.k0.unwrap();
                assert_eq!(r.sequence.len(), k0 + 1);
                assert!(r.sequence.windows(2).all(|w| w[1] > w[0]));
                let nn = f64::from(n) + 2.0;
                let lam = f64::from(lambda);
                assert!(r.sequence[k0] / lam > nn / 2.0);
                assert!(r.sequence[..k0].iter().all(|p| p / lam <= nn / 2.0));
            }
        }
    }
}

#[test]
fn bootstrap_at_pole_jumps_to_infinity() {
    let r = bootstrap_sequence(1.5, 1, 1, 10).unwrap();
    assert_eq!(r.sequence, vec![1.5, f64::INFINITY]);
    assert_eq!(r.k0, Some(1));
}

#[test]
fn bootstrap_stalls_below_threshold() {
    // Below the fixed point the recursion decreases.
    let r = bootstrap_sequence(3.0, 2, 3, 50).unwrap();
    assert!(!r.diverged);
    assert!(!r.above_threshold);
    assert!(r.sequence[1] < r.sequence[0]);
}

#[test]
fn interpolation_bound_is_continuous() {
    for &(mr, c) in &[
        (0.5, 0.5),
        (1.0, 1.0),
        (2.0, 1.5),
        (1.0, 2.0),
        (1.5, 0.8),
        (3.0, 2.0),
    ] {
        let grid: Vec<f64> = (0..100)
            .map(|k| cmr_interpolation_bound(1.5 + 0.5 * k as f64 / 99.0, mr, c).unwrap())
            .collect();
        for w in grid.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05, "mr={mr} c={c}");
        }
        assert_eq!(grid[0], c);
        assert_eq!(grid[99], 1.0 / mr);
    }
}

proptest! {
    #[test]
    fn window_matches_condition(d_max in 0.05f64..20.0, c in 0.05f64..20.0, seed in 0.0f64..1.0) {
        let w = select_dual_exponent(d_max, c);
        // Ten points across [3/2, 2] with a random offset.
        for k in 0..10 {
            let p = 1.5 + 0.5 * ((k as f64 + seed) / 10.0).min(1.0);
            prop_assert_eq!(w.contains(p), dual_exponent_condition(p, d_max, c), "p′={}", p);
            if let Some(b) = w.branch_window {
                if b.contains(p) {
                    prop_assert!(w.contains(p));
                }
            }
        }
    }

    #[test]
    fn window_bound_below_one(d_max in 0.05f64..20.0, c in 0.05f64..20.0) {
        let w = select_dual_exponent(d_max, c);
        if let Some(win) = w.window {
            let lo = if win.lo_closed { win.lo } else { win.lo + 1e-9 };
            let hi = if win.hi_closed { win.hi } else { win.hi - 1e-9 };
            for k in 0..=10 {
                let p = lo + (hi - lo) * k as f64 / 10.0;
                if w.contains(p) {
                    let b = cmr_interpolation_bound(p, d_max / 2.0, c).unwrap();
                    prop_assert!(b < 1.0 + 1e-12, "p′={} bound={}", p, b);
                }
            }
        }
    }

    #[test]
    fn gronwall_monotone(
        c1 in 0.0f64..3.0, c2 in 0.0f64..3.0, m0 in 0.0f64..10.0, vol in 0.1f64..5.0,
        inflow in 0.0f64..3.0, t in 0.0f64..5.0, dt in 0.0f64..1.0, dm in 0.0f64..1.0,
    ) {
        let base = gronwall_mass_bound(c1, c2, m0, vol, inflow, t);
        prop_assert!(gronwall_mass_bound(c1, c2, m0, vol, inflow, t + dt) >= base);
        prop_assert!(gronwall_mass_bound(c1, c2, m0 + dm, vol, inflow, t) >= base);
        prop_assert!(gronwall_mass_bound(c1, c2 + dm, m0, vol, inflow, t) >= base);
        prop_assert!(gronwall_mass_bound(c1, c2, m0, vol, inflow + dm, t) >= base);
    }

    #[test]
    fn gronwall_small_c1_approaches_linear(c2 in 0.0f64..3.0, m0 in 0.0f64..10.0, t in 0.0f64..5.0) {
        let limit = gronwall_mass_bound(0.0, c2, m0, 1.0, 0.0, t);
        let near = gronwall_mass_bound(1e-9, c2, m0, 1.0, 0.0, t);
        prop_assert!((near - limit).abs() <= 1e-7 * (1.0 + limit));
    }
}
