use proptest::prelude::*;
use sfwm_core::bessel::{bessel_j, bessel_k};
use sfwm_core::dispersion::*;
use sfwm_core::modefield::{radial_integral, TransverseField, DEFAULT_RADIAL_POINTS};
use sfwm_core::processes::{radial_overlap_with_points, ProcessSpec};
use sfwm_core::{FiberParams, LpMode, Parity, Polarization};

fn reference_fiber() -> FiberParams {
    FiberParams::new(1.45, 0.20, 2.38e-4, 4.57e-4, 0.145).unwrap()
}

fn wide_fiber() -> FiberParams {
    FiberParams::new(3.0, 0.20, 2.38e-4, 4.57e-4, 0.145).unwrap()
}

#[test]
fn sign_changes_match_guided_mode_count() {
    for (fiber, lambda) in [(reference_fiber(), 705.0), (wide_fiber(), 705.0), (wide_fiber(), 1000.0)] {
        let guided = guided_scalar_modes(&fiber, lambda).unwrap();
        for l in 0..4 {
            let expected = guided.iter().filter(|(gl, _)| *gl == l).count();
            assert_eq!(residual_sign_changes(&fiber, l, lambda, 2000).unwrap(), expected, "l={l} λ={lambda}");
        }
    }
}

#[test]
fn roots_are_ordered_and_bounded() {
    let fiber = wide_fiber();
    let guided = guided_scalar_modes(&fiber, 705.0).unwrap();
    assert!(guided.contains(&(0, 2)));
    let n1 = core_index(705.0, &fiber).unwrap();
    let n2 = cladding_index(705.0, fiber.cladding_material).unwrap();
    let mut previous = f64::INFINITY;
    for (l, m) in [(0, 1), (1, 1), (0, 2)] {
        let n0 = solve_lp_scalar_index(&fiber, l, m, 705.0).unwrap();
        assert!(n2 < n0 && n0 < n1);
        assert!(n0 < previous);
        previous = n0;
        assert!(characteristic_residual(&fiber, l, n0, 705.0).unwrap().abs() < 1e-9);
    }
}

#[test]
fn normalization_stable_under_grid_refinement() {
    for label in ["01x", "11ey"] {
        let sol = ModeSolution::solve(&reference_fiber(), &label.parse().unwrap(), 705.0).unwrap();
        let coarse = TransverseField::with_points(&sol, DEFAULT_RADIAL_POINTS).unwrap();
        let fine = TransverseField::with_points(&sol, 2 * DEFAULT_RADIAL_POINTS).unwrap();
        assert!(((coarse.normalization - fine.normalization) / fine.normalization).abs() < 1e-10);
    }
}

/// Closed-form Bessel integrals for `∫ F² r dr` over core and cladding.
fn analytic_radial_power(sol: &ModeSolution) -> f64 {
    let l = sol.mode.l as i32;
    let a = sol.core_radius_um;
    let (uu, ww) = (sol.u * a, sol.v * a);
    let core = 0.5 * a * a * (bessel_j(l, uu).powi(2) - bessel_j(l - 1, uu) * bessel_j(l + 1, uu));
    let scale = bessel_j(l, uu) / bessel_k(l, ww);
    let clad = 0.5 * a * a * scale * scale * (bessel_k((l - 1).abs(), ww) * bessel_k(l + 1, ww) - bessel_k(l, ww).powi(2));
    core + clad
}

#[test]
fn normalization_matches_closed_form() {
    for label in ["01x", "11ex", "11oy"] {
        let sol = ModeSolution::solve(&reference_fiber(), &label.parse().unwrap(), 705.0).unwrap();
        let field = TransverseField::new(&sol).unwrap();
        let azimuthal = if sol.mode.l == 0 { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
        let expected = (analytic_radial_power(&sol) * azimuthal).sqrt().recip();
        assert!(((field.normalization - expected) / expected).abs() < 1e-9, "{label}");
    }
}

#[test]
fn same_l_modes_are_orthogonal() {
    let fiber = wide_fiber();
    let a = TransverseField::new(&ModeSolution::solve(&fiber, &"01x".parse().unwrap(), 705.0).unwrap()).unwrap();
    let b = TransverseField::new(&ModeSolution::solve(&fiber, &"02x".parse().unwrap(), 705.0).unwrap()).unwrap();
    let r_max = a.integration_radius().max(b.integration_radius());
    let cross = radial_integral(fiber.core_radius_um, r_max, 1024, |r| a.radial(r) * b.radial(r));
    let self_a = radial_integral(fiber.core_radius_um, r_max, 1024, |r| a.radial(r).powi(2));
    assert!(cross.abs() < 1e-8 * self_a, "{cross} vs {self_a}");
}

#[test]
fn radial_overlap_converges() {
    for s in ["01x+11ex->01y+11ey", "01x+01x->01y+01y", "11ex+11ex->11oy+11oy"] {
        let p: ProcessSpec = s.parse().unwrap();
        let base = radial_overlap_with_points(&p, &reference_fiber(), 705.0, DEFAULT_RADIAL_POINTS).unwrap();
        let fine = radial_overlap_with_points(&p, &reference_fiber(), 705.0, 2 * DEFAULT_RADIAL_POINTS).unwrap();
        assert!(((base - fine) / fine).abs() < 1e-8, "{s}: {base} {fine}");
    }
}

fn any_mode() -> impl Strategy<Value = LpMode> {
    (0u32..2, any::<bool>(), any::<bool>()).prop_map(|(l, x, odd)| LpMode {
        l,
        m: 1,
        polarization: if x { Polarization::X } else { Polarization::Y },
        parity: if odd && l == 1 { Parity::Odd } else { Parity::Even },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfolding_offset_is_one_of_four(
        r0 in 1.2f64..2.5, na in 0.15f64..0.3, d in 0.0f64..5e-4, dp in 0.0f64..1e-3,
        lambda in 600.0f64..800.0, mode in any_mode(),
    ) {
        let fiber = FiberParams::new(r0, na, d, dp, 0.1).unwrap();
        prop_assume!(is_guided(&fiber, mode.l, mode.m, lambda));
        let sol = ModeSolution::solve(&fiber, &mode, lambda).unwrap();
        let offset = sol.n_eff - sol.n0;
        let allowed = [0.0, d, dp, d + dp];
        prop_assert!(allowed.iter().any(|a| (offset - a).abs() < 1e-15));
        let expected = if mode.polarization == Polarization::X { d } else { 0.0 }
            + if mode.parity == Parity::Odd { dp } else { 0.0 };
        prop_assert!((offset - expected).abs() < 1e-15);
    }

    #[test]
    fn transverse_parameters_satisfy_v_identity(
        r0 in 1.2f64..2.5, na in 0.15f64..0.3, lambda in 600.0f64..800.0, l in 0u32..2,
    ) {
        let fiber = FiberParams::new(r0, na, 1e-4, 2e-4, 0.1).unwrap();
        prop_assume!(is_guided(&fiber, l, 1, lambda));
        let mode = LpMode { l, m: 1, polarization: Polarization::Y, parity: Parity::Even };
        let sol = ModeSolution::solve(&fiber, &mode, lambda).unwrap();
        let k0 = vacuum_wavenumber(lambda);
        let lhs = sol.u * sol.u + sol.v * sol.v;
        let rhs = k0 * k0 * (sol.n1 * sol.n1 - sol.n2 * sol.n2);
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-10);
        prop_assert!(((sol.n1 * sol.n1 - sol.n2 * sol.n2) - na * na).abs() < 1e-12);
    }
}
