//! Transverse LP field distributions `g(r, φ) = F(r) G(φ)`.

use std::f64::consts::PI;

use crate::bessel::{bessel_j, bessel_j_derivative, bessel_k, bessel_k_derivative};
use crate::dispersion::ModeSolution;
use crate::error::{Error, Result};
use crate::fiber::{LpMode, Parity};
use crate::quadrature::GaussLegendre;

/// Evanescent decay lengths kept beyond the core when truncating radial integrals.
pub const TAIL_DECAY_LENGTHS: f64 = 12.0;
/// Gauss–Legendre points per radial segment (core and cladding).
pub const DEFAULT_RADIAL_POINTS: usize = 1024;

/// Unnormalized radial factor: `J_l(u r)` in the core and the continuous
/// continuation `J_l(u r₀)/K_l(v r₀) · K_l(v r)` outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub l: u32,
    pub u: f64,
    pub v: f64,
    pub core_radius_um: f64,
    cladding_scale: f64,
}

impl RadialProfile {
    pub fn new(solution: &ModeSolution) -> Self {
        let l = solution.mode.l as i32;
        let r0 = solution.core_radius_um;
        let cladding_scale = bessel_j(l, solution.u * r0) / bessel_k(l, solution.v * r0);
        Self {
            l: solution.mode.l,
            u: solution.u,
            v: solution.v,
            core_radius_um: r0,
            cladding_scale,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let l = self.l as i32;
        if r < self.core_radius_um {
            bessel_j(l, self.u * r)
        } else {
            self.cladding_scale * bessel_k(l, self.v * r)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let l = self.l as i32;
        if r < self.core_radius_um {
            self.u * bessel_j_derivative(l, self.u * r)
        } else {
            self.cladding_scale * self.v * bessel_k_derivative(l, self.v * r)
        }
    }

    /// Core-side and cladding-side limits at `r₀`.
    pub fn boundary_limits(&self) -> (f64, f64) {
        let l = self.l as i32;
        let r0 = self.core_radius_um;
        (
            bessel_j(l, self.u * r0),
            self.cladding_scale * bessel_k(l, self.v * r0),
        )
    }

    /// Truncation radius for integrals of this profile.
    pub fn integration_radius(&self) -> f64 {
        self.core_radius_um + TAIL_DECAY_LENGTHS / self.v
    }
}

/// Unnormalized radial factor `F(r)` of a solved mode.
pub fn radial_field(solution: &ModeSolution, r: f64) -> f64 {
    RadialProfile::new(solution).value(r)
}

/// Azimuthal factor: `cos(lφ)` (even), `sin(lφ)` (odd), `1` for `l = 0`.
pub fn azimuthal_field(l: u32, parity: Parity, phi: f64) -> Result<f64> {
    match (l, parity) {
        (0, Parity::Even) => Ok(1.0),
        (0, Parity::Odd) => Err(Error::InvalidMode("G_0 is undefined for odd parity".into())),
        (_, Parity::Even) => Ok((l as f64 * phi).cos()),
        (_, Parity::Odd) => Ok((l as f64 * phi).sin()),
    }
}

/// `∫₀^{2π} G² dφ`.
pub fn azimuthal_power(l: u32) -> f64 {
    if l == 0 {
        2.0 * PI
    } else {
        PI
    }
}

/// Integrates `f(r) r` over `[0, r_max]`, split at the core boundary.
pub fn radial_integral<F: Fn(f64) -> f64>(r0: f64, r_max: f64, points: usize, f: F) -> f64 {
    let rule = GaussLegendre::cached(points);
    let g = |r: f64| f(r) * r;
    rule.integrate(0.0, r0, g) + rule.integrate(r0, r_max.max(r0), g)
}

/// Unit-power transverse field of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseField {
    pub mode: LpMode,
    pub solution: ModeSolution,
    pub profile: RadialProfile,
    /// Multiplies `F G` so that `∫|g|² dA = 1`.
    pub normalization: f64,
}

impl TransverseField {
    pub fn new(solution: &ModeSolution) -> Result<Self> {
        Self::with_points(solution, DEFAULT_RADIAL_POINTS)
    }

    pub fn with_points(solution: &ModeSolution, points: usize) -> Result<Self> {
        solution.mode.validate()?;
        let profile = RadialProfile::new(solution);
        let radial_power = radial_integral(
            profile.core_radius_um,
            profile.integration_radius(),
            points,
            |r| profile.value(r).powi(2),
        );
        let total = radial_power * azimuthal_power(solution.mode.l);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numerical(format!("field power {total} for {}", solution.mode)));
        }
        Ok(Self {
            mode: solution.mode,
            solution: *solution,
            profile,
            normalization: total.sqrt().recip(),
        })
    }

    /// Normalized radial factor.
    pub fn radial(&self, r: f64) -> f64 {
        self.normalization * self.profile.value(r)
    }

    pub fn evaluate(&self, r: f64, phi: f64) -> f64 {
        // validated at construction
        let g = azimuthal_field(self.mode.l, self.mode.parity, phi).unwrap_or(0.0);
        self.radial(r) * g
    }

    pub fn integration_radius(&self) -> f64 {
        self.profile.integration_radius()
    }
}

/// Plain-text `(r, φ, g)` grid for plotting.
pub fn field_grid(field: &TransverseField, r_max: f64, nr: usize, nphi: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(nr * nphi);
    for i in 0..nr {
        let r = r_max * i as f64 / (nr.max(2) - 1) as f64;
        for j in 0..nphi {
            let phi = 2.0 * PI * j as f64 / nphi as f64;
            out.push((r, phi, field.evaluate(r, phi)));
        }
    }
    out
}
