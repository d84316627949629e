//! Material dispersion, scalar LP eigenvalues and the birefringent unfolding
//! of effective indices.
//!
//! Wavelengths are in nm, transverse parameters `u`, `v` and wavenumbers in
//! 1/µm, angular frequencies in rad/s.

use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_zero, bessel_k_pair};
use crate::error::{Error, Result};
use crate::fiber::{CladdingMaterial, FiberParams, LpMode, Parity, Polarization};
use crate::modefield::RadialProfile;
use crate::quadrature::GaussLegendre;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const SILICA_MIN_NM: f64 = 200.0;
const SILICA_MAX_NM: f64 = 2500.0;

// Three-term Sellmeier coefficients for fused silica (B_i, C_i in µm).
const SILICA_B: [f64; 3] = [0.696_166_3, 0.407_942_6, 0.897_479_4];
const SILICA_C: [f64; 3] = [0.068_404_3, 0.116_241_4, 9.896_161];

pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

pub fn wavelength_nm(angular_frequency: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / angular_frequency * 1e9
}

/// Vacuum wavenumber `ω/c` in 1/µm.
pub fn vacuum_wavenumber(wavelength_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI / (wavelength_nm * 1e-3)
}

pub fn cladding_index(wavelength_nm: f64, material: CladdingMaterial) -> Result<f64> {
    match material {
        CladdingMaterial::FusedSilica => {
            if !(wavelength_nm > SILICA_MIN_NM && wavelength_nm < SILICA_MAX_NM) {
                return Err(Error::WavelengthOutOfRange {
                    wavelength_nm,
                    material: "fused silica",
                    min_nm: SILICA_MIN_NM,
                    max_nm: SILICA_MAX_NM,
                });
            }
            let l2 = (wavelength_nm * 1e-3).powi(2);
            let n2 = 1.0
                + SILICA_B
                    .iter()
                    .zip(SILICA_C)
                    .map(|(b, c)| b * l2 / (l2 - c * c))
                    .sum::<f64>();
            Ok(n2.sqrt())
        }
    }
}

/// Core index from the cladding index and a wavelength-independent NA.
pub fn core_index(wavelength_nm: f64, fiber: &FiberParams) -> Result<f64> {
    let n2 = cladding_index(wavelength_nm, fiber.cladding_material)?;
    Ok((n2 * n2 + fiber.na * fiber.na).sqrt())
}

/// Weakly guiding LP eigenvalue condition written without poles:
///
/// `U J_{l-1}(U) + W J_l(U) K_{l-1}(W) / K_l(W)`, with `J_{-1} = -J_1`
/// and `K_{-1} = K_1`. This equals `U J_l'(U) - J_l(U) W K_l'(W)/K_l(W)`,
/// i.e. continuity of `F'/F` at the core boundary.
pub fn characteristic_function(l: u32, u_norm: f64, w_norm: f64) -> f64 {
    let li = l as i32;
    let first = u_norm * bessel_j(li - 1, u_norm);
    if w_norm <= 0.0 {
        return first;
    }
    let (k_prev, k_cur) = bessel_k_pair(l, w_norm);
    first + w_norm * bessel_j(li, u_norm) * k_prev / k_cur
}

/// Residual of the eigenvalue condition at a trial scalar index `n0`.
pub fn characteristic_residual(fiber: &FiberParams, l: u32, n0: f64, wavelength_nm: f64) -> Result<f64> {
    let n1 = core_index(wavelength_nm, fiber)?;
    let n2 = cladding_index(wavelength_nm, fiber.cladding_material)?;
    let scale = vacuum_wavenumber(wavelength_nm) * fiber.core_radius_um;
    let u_norm = scale * (n1 * n1 - n0 * n0).max(0.0).sqrt();
    let w_norm = scale * (n0 * n0 - n2 * n2).max(0.0).sqrt();
    Ok(characteristic_function(l, u_norm, w_norm))
}

/// Interval of `U = u r₀` that contains the `LP_lm` eigenvalue.
fn u_bracket(l: u32, m: u32) -> (f64, f64) {
    let lower = match (l, m) {
        (0, 1) => 0.0,
        (0, _) => bessel_j_zero(1, m - 1),
        _ => bessel_j_zero(l - 1, m),
    };
    (lower, bessel_j_zero(l, m))
}

/// Cutoff normalized frequency of `LP_lm`.
pub fn cutoff_v_number(l: u32, m: u32) -> f64 {
    u_bracket(l, m).0
}

pub fn is_guided(fiber: &FiberParams, l: u32, m: u32, wavelength_nm: f64) -> bool {
    m >= 1 && fiber.v_number(wavelength_nm) > cutoff_v_number(l, m)
}

/// Scalar (pre-unfolding) effective index of `LP_lm`.
pub fn solve_lp_scalar_index(fiber: &FiberParams, l: u32, m: u32, wavelength_nm: f64) -> Result<f64> {
    Ok(solve_scalar(fiber, l, m, wavelength_nm)?.n0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScalarRoot {
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
    pub u_norm: f64,
}

pub(crate) fn solve_scalar(fiber: &FiberParams, l: u32, m: u32, wavelength_nm: f64) -> Result<ScalarRoot> {
    if m == 0 {
        return Err(Error::InvalidMode("radial index m must be >= 1".into()));
    }
    let n1 = core_index(wavelength_nm, fiber)?;
    let n2 = cladding_index(wavelength_nm, fiber.cladding_material)?;
    let scale = vacuum_wavenumber(wavelength_nm) * fiber.core_radius_um;
    let v = scale * fiber.na;
    let not_guided = Error::ModeNotGuided { l, m, wavelength_nm };
    let (lo, hi) = u_bracket(l, m);
    if v <= lo {
        return Err(not_guided);
    }
    let hi = hi.min(v);
    let f = |u: f64| characteristic_function(l, u, (v * v - u * u).max(0.0).sqrt());
    let u_norm = brent_root(f, lo, hi).ok_or(not_guided)?;
    let n0 = (n1 * n1 - (u_norm / scale).powi(2)).sqrt();
    if !(n0 > n2 && n0 < n1) {
        return Err(Error::ModeNotGuided { l, m, wavelength_nm });
    }
    Ok(ScalarRoot { n0, n1, n2, u_norm })
}

/// Bracketed root of a continuous function via Brent's method, iterated to
/// machine precision. `None` when `f(a)` and `f(b)` share a sign.
pub(crate) fn brent_root<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || (fa > 0.0) == (fb > 0.0) {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// Applies the polarization/parity birefringence offsets to a scalar index.
pub fn unfold_index(n0: f64, mode: &LpMode, fiber: &FiberParams) -> Result<f64> {
    mode.validate()?;
    let mut n = n0;
    if mode.polarization == Polarization::X {
        n += fiber.delta;
    }
    if mode.parity == Parity::Odd {
        n += fiber.delta_p;
    }
    Ok(n)
}

/// Offset `n_eff - n0` for a mode.
pub fn birefringence_offset(mode: &LpMode, fiber: &FiberParams) -> f64 {
    let mut offset = 0.0;
    if mode.polarization == Polarization::X {
        offset += fiber.delta;
    }
    if mode.parity == Parity::Odd {
        offset += fiber.delta_p;
    }
    offset
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub mode: LpMode,
    pub wavelength_nm: f64,
    pub core_radius_um: f64,
    pub n0: f64,
    pub n_eff: f64,
    pub n1: f64,
    pub n2: f64,
    /// Transverse parameters in 1/µm, from the scalar index.
    pub u: f64,
    pub v: f64,
    /// Propagation constant `n_eff ω/c` in 1/µm.
    pub k: f64,
}

impl ModeSolution {
    pub fn solve(fiber: &FiberParams, mode: &LpMode, wavelength_nm: f64) -> Result<Self> {
        mode.validate()?;
        let root = solve_scalar(fiber, mode.l, mode.m, wavelength_nm)?;
        let k0 = vacuum_wavenumber(wavelength_nm);
        let u = root.u_norm / fiber.core_radius_um;
        let v = k0 * (root.n0 * root.n0 - root.n2 * root.n2).sqrt();
        let n_eff = unfold_index(root.n0, mode, fiber)?;
        Ok(Self {
            mode: *mode,
            wavelength_nm,
            core_radius_um: fiber.core_radius_um,
            n0: root.n0,
            n_eff,
            n1: root.n1,
            n2: root.n2,
            u,
            v,
            k: n_eff * k0,
        })
    }
}

/// Propagation constant `k = n_eff ω/c` in 1/µm.
pub fn wavenumber(mode: &LpMode, fiber: &FiberParams, angular_frequency: f64) -> Result<f64> {
    if !(angular_frequency.is_finite() && angular_frequency > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "angular frequency must be positive, got {angular_frequency}"
        )));
    }
    let lambda = wavelength_nm(angular_frequency);
    let n0 = solve_lp_scalar_index(fiber, mode.l, mode.m, lambda)?;
    let n_eff = unfold_index(n0, mode, fiber)?;
    Ok(n_eff * angular_frequency / SPEED_OF_LIGHT * 1e-6)
}

/// Guided scalar `(l, m)` pairs, ordered by `l` then `m`.
pub fn guided_scalar_modes(fiber: &FiberParams, wavelength_nm: f64) -> Result<Vec<(u32, u32)>> {
    cladding_index(wavelength_nm, fiber.cladding_material)?;
    let mut out = Vec::new();
    let mut l = 0;
    while is_guided(fiber, l, 1, wavelength_nm) {
        let mut m = 1;
        while is_guided(fiber, l, m, wavelength_nm) {
            out.push((l, m));
            m += 1;
        }
        l += 1;
    }
    Ok(out)
}

/// All unfolded modes whose scalar mode is guided, in canonical order.
pub fn supported_modes(fiber: &FiberParams, wavelength_nm: f64) -> Result<Vec<LpMode>> {
    fiber.validate()?;
    let mut modes = Vec::new();
    for (l, m) in guided_scalar_modes(fiber, wavelength_nm)? {
        for polarization in [Polarization::X, Polarization::Y] {
            if l == 0 {
                modes.push(LpMode { l, m, polarization, parity: Parity::Even });
            } else {
                for parity in [Parity::Even, Parity::Odd] {
                    modes.push(LpMode { l, m, polarization, parity });
                }
            }
        }
    }
    modes.sort();
    Ok(modes)
}

/// Number of sign changes of the eigenvalue residual on a uniform interior
/// grid of `points` scalar indices in `(n₂, n₁)`.
pub fn residual_sign_changes(fiber: &FiberParams, l: u32, wavelength_nm: f64, points: usize) -> Result<usize> {
    let n1 = core_index(wavelength_nm, fiber)?;
    let n2 = cladding_index(wavelength_nm, fiber.cladding_material)?;
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for i in 0..points {
        let n0 = n2 + (n1 - n2) * (i as f64 + 0.5) / points as f64;
        let r = characteristic_residual(fiber, l, n0, wavelength_nm)?;
        if let Some(p) = prev {
            if (p > 0.0) != (r > 0.0) {
                count += 1;
            }
        }
        prev = Some(r);
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfdDefinition {
    /// `2 √(2 ∫F² r³ dr / ∫F² r dr)`: second moment of the near-field intensity.
    #[default]
    PetermannI,
    /// `2 √2 √(∫F² r dr / ∫F'² r dr)`.
    PetermannII,
}

/// Mode field diameter of `LP01` in µm.
pub fn mode_field_diameter(fiber: &FiberParams, wavelength_nm: f64, definition: MfdDefinition) -> Result<f64> {
    let mode = LpMode::fundamental_family(1, Polarization::Y);
    let sol = ModeSolution::solve(fiber, &mode, wavelength_nm)?;
    let profile = RadialProfile::new(&sol);
    let r0 = fiber.core_radius_um;
    let r_max = r0 + 40.0 / sol.v;
    let rule = GaussLegendre::cached(256);
    let integrate = |g: &dyn Fn(f64) -> f64| rule.integrate(0.0, r0, g) + rule.integrate(r0, r_max, g);
    let power = integrate(&|r| profile.value(r).powi(2) * r);
    let diameter = match definition {
        MfdDefinition::PetermannI => {
            let second = integrate(&|r| profile.value(r).powi(2) * r.powi(3));
            2.0 * (2.0 * second / power).sqrt()
        }
        MfdDefinition::PetermannII => {
            let slope = integrate(&|r| profile.derivative(r).powi(2) * r);
            2.0 * (2.0 * power / slope).sqrt()
        }
    };
    Ok(diameter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_fiber() -> FiberParams {
        FiberParams::new(1.45, 0.20, 2.38e-4, 4.57e-4, 0.145).unwrap()
    }

    #[test]
    fn silica_reference_values() {
        // regression constants from the Sellmeier coefficients above
        let n = cladding_index(1550.0, CladdingMaterial::FusedSilica).unwrap();
        assert!((n - 1.444_023_621_703_261).abs() < 1e-12);
        assert!((n - 1.4440).abs() < 5e-4);
        let n = cladding_index(705.0, CladdingMaterial::FusedSilica).unwrap();
        assert!(n > 1.45 && n < 1.46);
        assert!((n - 1.455_179_468_199_164_5).abs() < 1e-12);
    }

    #[test]
    fn silica_normal_dispersion_and_window() {
        let mut prev = f64::INFINITY;
        for i in 0..=120 {
            let n = cladding_index(400.0 + 10.0 * i as f64, CladdingMaterial::FusedSilica).unwrap();
            assert!(n < prev);
            prev = n;
        }
        for bad in [150.0, 200.0, 2500.0, 3000.0, f64::NAN] {
            assert!(matches!(
                cladding_index(bad, CladdingMaterial::FusedSilica),
                Err(Error::WavelengthOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn core_index_relations() {
        let fiber = FiberParams::new(1.45, 0.20, 0.0, 0.0, 0.1).unwrap();
        let n1 = core_index(705.0, &fiber).unwrap();
        let n2 = cladding_index(705.0, CladdingMaterial::FusedSilica).unwrap();
        assert_eq!(n1, (n2 * n2 + 0.04).sqrt());
        assert!(((n1 * n1 - n2 * n2) - 0.04).abs() / 0.04 < 1e-12);
        // zero index step limit
        let flat = FiberParams { na: 0.0, ..fiber };
        assert_eq!(core_index(705.0, &flat).unwrap(), n2);
        // first-order expansion
        let fiber = FiberParams { na: 0.167, ..fiber };
        let n1 = core_index(705.0, &fiber).unwrap();
        let approx = 0.167f64.powi(2) / (2.0 * n2);
        assert!(((n1 - n2) - approx).abs() / (n1 - n2) < 0.01);
    }

    #[test]
    fn lp11_cutoff_below_first_j0_zero() {
        // V = 2.3
        let r0 = 2.3 * 0.705 / (2.0 * std::f64::consts::PI * 0.2);
        let fiber = FiberParams::new(r0, 0.2, 0.0, 0.0, 0.1).unwrap();
        assert!(matches!(
            solve_lp_scalar_index(&fiber, 1, 1, 705.0),
            Err(Error::ModeNotGuided { l: 1, m: 1, .. })
        ));
        assert!(solve_lp_scalar_index(&fiber, 0, 1, 705.0).is_ok());
    }

    #[test]
    fn lp01_root_residual_and_bracket() {
        let fiber = reference_fiber();
        let n0 = solve_lp_scalar_index(&fiber, 0, 1, 705.0).unwrap();
        let n1 = core_index(705.0, &fiber).unwrap();
        let n2 = cladding_index(705.0, fiber.cladding_material).unwrap();
        assert!(n2 < n0 && n0 < n1);
        let r = characteristic_residual(&fiber, 0, n0, 705.0).unwrap();
        assert!(r.abs() < 1e-12, "residual {r}");
        // cross-checked against an independent scipy root of the same condition
        assert!((n0 - 1.463_031_678_420_129).abs() < 1e-10);
    }

    #[test]
    fn mode_ordering() {
        let fiber = reference_fiber();
        for lambda in [650.0, 705.0, 740.0] {
            let a = solve_lp_scalar_index(&fiber, 0, 1, lambda).unwrap();
            let b = solve_lp_scalar_index(&fiber, 1, 1, lambda).unwrap();
            assert!(a > b);
        }
    }

    #[test]
    fn unfolding_offsets() {
        let fiber = reference_fiber();
        let m: LpMode = "11ox".parse().unwrap();
        let n = unfold_index(1.45, &m, &fiber).unwrap();
        assert!((n - 1.450695).abs() < 1e-12);
        for (label, offset) in [
            ("01y", 0.0),
            ("01x", 2.38e-4),
            ("11ey", 0.0),
            ("11oy", 4.57e-4),
            ("11ex", 2.38e-4),
        ] {
            let mode: LpMode = label.parse().unwrap();
            assert_eq!(unfold_index(1.4512, &mode, &fiber).unwrap(), 1.4512 + offset);
        }
        let bad = LpMode { l: 0, m: 1, polarization: Polarization::X, parity: Parity::Odd };
        assert!(matches!(unfold_index(1.45, &bad, &fiber), Err(Error::InvalidMode(_))));
    }

    #[test]
    fn wavenumber_differences() {
        let fiber = reference_fiber();
        let w = angular_frequency(705.0);
        let k = |s: &str| wavenumber(&s.parse().unwrap(), &fiber, w).unwrap();
        let per_um = w / SPEED_OF_LIGHT * 1e-6;
        assert!((k("01x") - k("01y") - fiber.delta * per_um).abs() < 1e-12);
        assert!((k("11oy") - k("11ey") - fiber.delta_p * per_um).abs() < 1e-12);
        assert!(wavenumber(&"01x".parse().unwrap(), &fiber, 0.0).is_err());
    }

    #[test]
    fn supported_mode_counts() {
        let fiber = reference_fiber();
        let modes = supported_modes(&fiber, 705.0).unwrap();
        assert_eq!(modes.len(), 6);
        let single = FiberParams::new(1.0, 0.08, 0.0, 0.0, 0.1).unwrap();
        let modes = supported_modes(&single, 705.0).unwrap();
        assert_eq!(
            modes.iter().map(ToString::to_string).collect::<Vec<_>>(),
            vec!["01x", "01y"]
        );
        let wide = FiberParams::new(3.0, 0.2, 0.0, 0.0, 0.1).unwrap();
        for mode in supported_modes(&wide, 705.0).unwrap() {
            assert!(!(mode.l == 0 && mode.parity == Parity::Odd));
        }
    }

    #[test]
    fn mfd_reference_fibers() {
        let a = FiberParams::new(1.742, 0.167, 2.37e-4, 4.41e-4, 0.145).unwrap();
        let b = reference_fiber();
        let mfd_a = mode_field_diameter(&a, 705.0, MfdDefinition::PetermannI).unwrap();
        let mfd_b = mode_field_diameter(&b, 705.0, MfdDefinition::PetermannI).unwrap();
        assert!((mfd_a - 4.0).abs() / 4.0 < 0.10, "{mfd_a}");
        assert!((mfd_b - 3.27).abs() / 3.27 < 0.10, "{mfd_b}");
        // independent scipy quadrature of the same definitions
        assert!((mfd_b - 3.042_503_835).abs() < 1e-5, "{mfd_b}");
        let p2 = mode_field_diameter(&b, 705.0, MfdDefinition::PetermannII).unwrap();
        assert!((p2 - 2.993_112_725).abs() < 1e-5, "{p2}");
        assert!(mfd_a > 2.0 * a.core_radius_um);
    }
}
