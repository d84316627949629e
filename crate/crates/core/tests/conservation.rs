use std::collections::BTreeSet;
use std::f64::consts::PI;

use proptest::prelude::*;
use sfwm_core::gafit::six_mode_set;
use sfwm_core::processes::*;
use sfwm_core::{LpMode, Parity, Polarization};

/// Trapezoid rule on the product of azimuthal factors; exact for the
/// trigonometric polynomials involved when `n` exceeds the total order.
fn trapezoid_overlap(p: &ProcessSpec, n: usize) -> f64 {
    let g = |m: &LpMode, phi: f64| match (m.l, m.parity) {
        (0, _) => 1.0,
        (l, Parity::Even) => (l as f64 * phi).cos(),
        (l, Parity::Odd) => (l as f64 * phi).sin(),
    };
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            let phi = h * k as f64;
            p.modes().iter().map(|m| g(m, phi)).product::<f64>()
        })
        .sum::<f64>()
        * h
}

fn rule_says_viable(p: &ProcessSpec) -> bool {
    let q: i32 = p.pump1.parity.sign() * p.pump2.parity.sign() - p.signal.parity.sign() * p.idler.parity.sign();
    let l = [p.pump1.l, p.pump2.l, p.signal.l, p.idler.l].map(|v| v as i32);
    let some_zero = (0..8).any(|bits: i32| {
        let s = |b: i32, v: i32| if bits & b != 0 { -v } else { v };
        l[0] + s(4, l[1]) - s(2, l[2]) - s(1, l[3]) == 0
    });
    q == 0 && some_zero
}

fn quadruples(modes: &[LpMode]) -> Vec<ProcessSpec> {
    let mut out = Vec::new();
    for &a in modes {
        for &b in modes {
            for &s in modes {
                for &i in modes {
                    out.push(ProcessSpec::new(a, b, s, i));
                }
            }
        }
    }
    out
}

/// Checks the analytic overlap against quadrature and the selection rule
/// against the rule oracle; returns the rule-viable processes whose overlap
/// nonetheless vanishes.
fn check_against_oracle(modes: &[LpMode]) -> Vec<ProcessSpec> {
    let mut cancelled = Vec::new();
    for p in quadruples(modes) {
        let analytic = azimuthal_overlap(&p);
        let numeric = trapezoid_overlap(&p, 64);
        assert!((analytic - numeric).abs() < 1e-10, "{p}: {analytic} vs {numeric}");
        assert_eq!(conservation_report(&p).viable, rule_says_viable(&p), "{p}");
        if analytic != 0.0 {
            assert!(rule_says_viable(&p), "{p} has overlap {analytic} but breaks the rules");
        } else if rule_says_viable(&p) {
            cancelled.push(p);
        }
    }
    cancelled
}

#[test]
fn six_mode_overlaps_match_quadrature() {
    let started = std::time::Instant::now();
    assert!(check_against_oracle(&six_mode_set()).is_empty());
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn extended_overlaps_with_l2_match_quadrature() {
    let mut modes = six_mode_set();
    for polarization in [Polarization::X, Polarization::Y] {
        for parity in [Parity::Even, Parity::Odd] {
            modes.push(LpMode { l: 2, m: 1, polarization, parity });
        }
    }
    assert_eq!(quadruples(&modes).len(), 10_000);
    // With l = 2 the rules are necessary but no longer sufficient: sign
    // cancellations between vortex terms zero some rule-allowed overlaps,
    // e.g. cos φ sin φ cos 2φ sin 2φ.
    let cancelled = check_against_oracle(&modes);
    assert_eq!(cancelled.len(), 24 * 16);
    assert!(cancelled.contains(&"11ex+11ox->21ex+21ox".parse().unwrap()));
    assert!(cancelled.iter().all(|p| p.modes().iter().any(|m| m.l == 2)));
}

#[test]
fn single_parity_flip_forbids_six_mode_processes() {
    for p in quadruples(&six_mode_set()).into_iter().filter(|p| conservation_report(p).viable) {
        for which in 0..4 {
            let mut modes = p.modes();
            if modes[which].l == 0 {
                continue;
            }
            modes[which].parity = match modes[which].parity {
                Parity::Even => Parity::Odd,
                Parity::Odd => Parity::Even,
            };
            let flipped = ProcessSpec::new(modes[0], modes[1], modes[2], modes[3]);
            assert_ne!(delta_q(&flipped), 0);
            assert_eq!(azimuthal_overlap(&flipped), 0.0, "{flipped}");
        }
    }
}

#[test]
fn six_mode_counts_and_table() {
    let started = std::time::Instant::now();
    let modes = six_mode_set();
    let all = enumerate_processes(&modes, None).unwrap();
    assert_eq!(all.total_ordered, 1296);
    assert_eq!(all.filtered_ordered, 1296);
    let xx_yy = enumerate_processes(&modes, Some(PolarizationFilter::CrossXxYy)).unwrap();
    assert_eq!(xx_yy.filtered_ordered, 81);
    let viable: BTreeSet<ProcessSpec> = xx_yy.viable_processes().into_iter().collect();
    let table: BTreeSet<ProcessSpec> = [
        "01x+11ex->01y+11ey",
        "01x+11ox->01y+11oy",
        "01x+01x->01y+01y",
        "11ex+11ex->01y+01y",
        "11ox+11ox->01y+01y",
        "01x+01x->11ey+11ey",
        "01x+01x->11oy+11oy",
        "01x+11ex->11ey+01y",
        "01x+11ox->11oy+01y",
        "11ex+11ex->11ey+11ey",
        "11ex+11ex->11oy+11oy",
        "11ex+11ox->11ey+11oy",
        "11ex+11ox->11oy+11ey",
        "11ox+11ox->11ey+11ey",
        "11ox+11ox->11oy+11oy",
    ]
    .iter()
    .map(|s| s.parse::<ProcessSpec>().unwrap().canonical())
    .collect();
    assert_eq!(viable, table);
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

fn mode_strategy(max_l: u32) -> impl Strategy<Value = LpMode> {
    (0..=max_l, 1u32..3, any::<bool>(), any::<bool>()).prop_map(|(l, m, x, odd)| LpMode {
        l,
        m,
        polarization: if x { Polarization::X } else { Polarization::Y },
        parity: if odd && l > 0 { Parity::Odd } else { Parity::Even },
    })
}

fn process_strategy(max_l: u32) -> impl Strategy<Value = ProcessSpec> {
    (mode_strategy(max_l), mode_strategy(max_l), mode_strategy(max_l), mode_strategy(max_l))
        .prop_map(|(a, b, s, i)| ProcessSpec::new(a, b, s, i))
}

proptest! {
    #[test]
    fn nonzero_overlap_implies_conservation(p in process_strategy(4)) {
        let analytic = azimuthal_overlap(&p);
        prop_assert!((analytic - trapezoid_overlap(&p, 64)).abs() < 1e-10);
        if analytic != 0.0 {
            prop_assert!(conservation_report(&p).viable);
        }
    }

    #[test]
    fn pump_exchange_is_symmetric(p in process_strategy(3)) {
        prop_assert_eq!(azimuthal_overlap(&p), azimuthal_overlap(&p.swap_pumps()));
        prop_assert_eq!(conservation_report(&p).viable, conservation_report(&p.swap_pumps()).viable);
        prop_assert_eq!(delta_q(&p), delta_q(&p.swap_pumps()));
    }
}
