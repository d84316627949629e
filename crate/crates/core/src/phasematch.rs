//! Phase mismatch, phase-matching curves, joint spectral amplitudes and the
//! multi-process two-photon state.
//!
//! Mismatches are reported in 1/m and frequencies are angular (rad/s).

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{
    angular_frequency, birefringence_offset, brent_root, solve_lp_scalar_index, wavelength_nm,
    SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};
use crate::fiber::{FiberParams, LpMode};
use crate::processes::{normalized_overlaps, ProcessSpec};

/// Nonlinear (self/cross-phase modulation) term subtracted in the mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum NonlinearPhase {
    #[default]
    None,
    /// Fixed contribution in 1/m.
    Constant { per_m: f64 },
    /// `γ (W₁ + W₂)` with `γ` in 1/(W·m) and pump powers in W.
    Kerr { gamma: f64, pump1_w: f64, pump2_w: f64 },
}

impl NonlinearPhase {
    pub fn value(&self) -> f64 {
        match *self {
            NonlinearPhase::None => 0.0,
            NonlinearPhase::Constant { per_m } => per_m,
            NonlinearPhase::Kerr { gamma, pump1_w, pump2_w } => gamma * (pump1_w + pump2_w),
        }
    }
}

/// Memoizes scalar effective indices for one fiber, keyed by `(l, m, ω)`.
#[derive(Debug, Clone)]
pub struct WavenumberCache<'a> {
    fiber: &'a FiberParams,
    scalar: HashMap<(u32, u32, u64), Result<f64>>,
}

impl<'a> WavenumberCache<'a> {
    pub fn new(fiber: &'a FiberParams) -> Self {
        Self { fiber, scalar: HashMap::new() }
    }

    pub fn fiber(&self) -> &FiberParams {
        self.fiber
    }

    pub fn scalar_index(&mut self, l: u32, m: u32, omega: f64) -> Result<f64> {
        let fiber = self.fiber;
        self.scalar
            .entry((l, m, omega.to_bits()))
            .or_insert_with(|| {
                if !(omega.is_finite() && omega > 0.0) {
                    return Err(Error::InvalidArgument(format!("non-positive frequency {omega}")));
                }
                solve_lp_scalar_index(fiber, l, m, wavelength_nm(omega))
            })
            .clone()
    }

    /// Propagation constant in 1/m.
    pub fn k_per_m(&mut self, mode: &LpMode, omega: f64) -> Result<f64> {
        let n0 = self.scalar_index(mode.l, mode.m, omega)?;
        Ok((n0 + birefringence_offset(mode, self.fiber)) * omega / SPEED_OF_LIGHT)
    }

    /// `Δk` for pump frequencies `ω` and `ω_s + ω_i − ω`.
    pub fn mismatch(
        &mut self,
        process: &ProcessSpec,
        omega_pump: f64,
        omega_signal: f64,
        omega_idler: f64,
        nonlinear: NonlinearPhase,
    ) -> Result<f64> {
        let omega_pump2 = omega_signal + omega_idler - omega_pump;
        Ok(self.k_per_m(&process.pump1, omega_pump)? + self.k_per_m(&process.pump2, omega_pump2)?
            - self.k_per_m(&process.signal, omega_signal)?
            - self.k_per_m(&process.idler, omega_idler)?
            - nonlinear.value())
    }
}

/// Phase mismatch `Δk` in 1/m.
pub fn phase_mismatch(
    process: &ProcessSpec,
    fiber: &FiberParams,
    omega_pump: f64,
    omega_signal: f64,
    omega_idler: f64,
    nonlinear: NonlinearPhase,
) -> Result<f64> {
    WavenumberCache::new(fiber).mismatch(process, omega_pump, omega_signal, omega_idler, nonlinear)
}

/// Mismatch for spectrally degenerate pumps at `λ_p` with the idler fixed
/// by energy conservation.
pub fn degenerate_mismatch(
    cache: &mut WavenumberCache<'_>,
    process: &ProcessSpec,
    pump_nm: f64,
    signal_nm: f64,
    nonlinear: NonlinearPhase,
) -> Result<f64> {
    let wp = angular_frequency(pump_nm);
    let ws = angular_frequency(signal_nm);
    cache.mismatch(process, wp, ws, 2.0 * wp - ws, nonlinear)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmPoint {
    pub pump_wavelength_nm: f64,
    /// Wavelength of the photon in the process's signal mode.
    pub signal_wavelength_nm: f64,
    /// Wavelength of the photon in the process's idler mode.
    pub idler_wavelength_nm: f64,
    pub process: ProcessSpec,
    /// `|Δk|` at the root, 1/m.
    pub residual_per_m: f64,
}

impl PmPoint {
    /// Whether the signal-mode photon sits on the long-wavelength side.
    pub fn signal_above_pump(&self) -> bool {
        self.signal_wavelength_nm > self.pump_wavelength_nm
    }

    /// `|1/λ_s + 1/λ_i − 2/λ_p| · λ_p / 2`.
    pub fn energy_residual(&self) -> f64 {
        (1.0 / self.signal_wavelength_nm + 1.0 / self.idler_wavelength_nm - 2.0 / self.pump_wavelength_nm).abs()
            * self.pump_wavelength_nm
            / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmSearch {
    /// Half-width of the signal search window on each side of the pump, nm.
    pub window_nm: f64,
    /// Scan points per side.
    pub scan_points: usize,
    pub nonlinear: NonlinearPhase,
}

impl Default for PmSearch {
    fn default() -> Self {
        Self { window_nm: 150.0, scan_points: 10_000, nonlinear: NonlinearPhase::None }
    }
}

fn refine_root(
    cache: &mut WavenumberCache<'_>,
    process: &ProcessSpec,
    omega_pump: f64,
    lo: f64,
    hi: f64,
    nonlinear: NonlinearPhase,
) -> Option<(f64, f64)> {
    // Brent on ω_s; the cache is bypassed to keep it bounded
    let fiber = *cache.fiber();
    let f = |ws: f64| {
        WavenumberCache::new(&fiber)
            .mismatch(process, omega_pump, ws, 2.0 * omega_pump - ws, nonlinear)
            .unwrap_or(f64::NAN)
    };
    let ws = brent_root(f, lo.min(hi), lo.max(hi))?;
    let residual = f(ws);
    residual.is_finite().then_some((ws, residual.abs()))
}

/// Phase-matched signal/idler pairs at one pump wavelength.
pub fn pm_roots(fiber: &FiberParams, process: &ProcessSpec, pump_nm: f64, search: &PmSearch) -> Vec<PmPoint> {
    let mut cache = WavenumberCache::new(fiber);
    let wp = angular_frequency(pump_nm);
    let mut points = Vec::new();
    for side in [1.0, -1.0] {
        let mut prev: Option<(f64, f64)> = None;
        for k in 1..=search.scan_points {
            let lambda_s = pump_nm + side * search.window_nm * k as f64 / search.scan_points as f64;
            let ws = angular_frequency(lambda_s);
            let wi = 2.0 * wp - ws;
            let value = if wi > 0.0 {
                cache.mismatch(process, wp, ws, wi, search.nonlinear).ok()
            } else {
                None
            };
            match (prev, value) {
                (Some((w_prev, d_prev)), Some(d)) if (d_prev > 0.0) != (d > 0.0) => {
                    if let Some((root, residual)) = refine_root(&mut cache, process, wp, w_prev, ws, search.nonlinear) {
                        points.push(PmPoint {
                            pump_wavelength_nm: pump_nm,
                            signal_wavelength_nm: wavelength_nm(root),
                            idler_wavelength_nm: wavelength_nm(2.0 * wp - root),
                            process: *process,
                            residual_per_m: residual,
                        });
                    }
                }
                _ => {}
            }
            prev = value.map(|d| (ws, d));
        }
    }
    points.sort_by(|a, b| a.signal_wavelength_nm.total_cmp(&b.signal_wavelength_nm));
    points
}

/// Locus of `Δk = 0` over a range of (spectrally degenerate) pump wavelengths.
pub fn pm_curve(
    process: &ProcessSpec,
    fiber: &FiberParams,
    pump_range_nm: (f64, f64),
    n_points: usize,
    search: &PmSearch,
) -> Result<Vec<PmPoint>> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("need at least one pump wavelength".into()));
    }
    let (start, end) = pump_range_nm;
    let pumps: Vec<f64> = (0..n_points)
        .map(|i| {
            if n_points == 1 {
                start
            } else {
                start + (end - start) * i as f64 / (n_points - 1) as f64
            }
        })
        .collect();
    Ok(pumps
        .par_iter()
        .map(|&lp| pm_roots(fiber, process, lp, search))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Root of `Δk` nearest to a guessed signal wavelength, searched within
/// `half_window_nm` on the same side of the pump with geometrically growing
/// steps. Returns `(λ_s, λ_i)`.
pub fn nearest_phasematch(
    fiber: &FiberParams,
    process: &ProcessSpec,
    pump_nm: f64,
    signal_guess_nm: f64,
    half_window_nm: f64,
    nonlinear: NonlinearPhase,
) -> Option<(f64, f64)> {
    let mut cache = WavenumberCache::new(fiber);
    let wp = angular_frequency(pump_nm);
    let above = signal_guess_nm > pump_nm;
    let clamp = |l: f64| {
        if above {
            l.max(pump_nm + 1e-3)
        } else {
            l.min(pump_nm - 1e-3)
        }
    };
    let eval = |cache: &mut WavenumberCache<'_>, l: f64| {
        let ws = angular_frequency(l);
        cache.mismatch(process, wp, ws, 2.0 * wp - ws, nonlinear).ok()
    };
    let mut best: Option<f64> = None;
    for dir in [1.0, -1.0] {
        let mut prev_l = clamp(signal_guess_nm);
        let mut prev_v = eval(&mut cache, prev_l);
        let mut offset = 0.01;
        while offset <= half_window_nm {
            let l = clamp(signal_guess_nm + dir * offset);
            offset *= 1.2;
            if l == prev_l {
                break;
            }
            // beyond the nearest root found so far
            if best.is_some_and(|b| (l - signal_guess_nm).abs() > (b - signal_guess_nm).abs()) {
                break;
            }
            let v = eval(&mut cache, l);
            if let (Some(a), Some(b)) = (prev_v, v) {
                if (a > 0.0) != (b > 0.0) {
                    let found = refine_root(
                        &mut cache,
                        process,
                        wp,
                        angular_frequency(prev_l),
                        angular_frequency(l),
                        nonlinear,
                    );
                    if let Some((ws, _)) = found {
                        let ls = wavelength_nm(ws);
                        if best.is_none_or(|b| (ls - signal_guess_nm).abs() < (b - signal_guess_nm).abs()) {
                            best = Some(ls);
                        }
                    }
                    break;
                }
            }
            prev_l = l;
            prev_v = v;
        }
    }
    best.map(|ls| (ls, wavelength_nm(2.0 * wp - angular_frequency(ls))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpShape {
    Gaussian,
    Monochromatic,
}

/// Spectrally degenerate pump envelope `A(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpEnvelope {
    pub center_wavelength_nm: f64,
    /// FWHM of the amplitude envelope in wavelength.
    pub bandwidth_fwhm_nm: f64,
    pub shape: PumpShape,
}

impl PumpEnvelope {
    pub fn gaussian(center_wavelength_nm: f64, bandwidth_fwhm_nm: f64) -> Result<Self> {
        let pump = Self { center_wavelength_nm, bandwidth_fwhm_nm, shape: PumpShape::Gaussian };
        pump.validate()?;
        Ok(pump)
    }

    pub fn monochromatic(center_wavelength_nm: f64) -> Self {
        Self { center_wavelength_nm, bandwidth_fwhm_nm: 0.0, shape: PumpShape::Monochromatic }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength_nm.is_finite() && self.center_wavelength_nm > 0.0) {
            return Err(Error::InvalidArgument("pump wavelength must be positive".into()));
        }
        let ok = match self.shape {
            PumpShape::Monochromatic => self.bandwidth_fwhm_nm == 0.0,
            PumpShape::Gaussian => self.bandwidth_fwhm_nm.is_finite() && self.bandwidth_fwhm_nm > 0.0,
        };
        if !ok {
            return Err(Error::InvalidArgument(
                "pump bandwidth must be zero exactly for a monochromatic pump and positive otherwise".into(),
            ));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        angular_frequency(self.center_wavelength_nm)
    }

    /// Standard deviation of the Gaussian amplitude in angular frequency.
    pub fn sigma_omega(&self) -> f64 {
        let lambda = self.center_wavelength_nm * 1e-9;
        let fwhm_omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * self.bandwidth_fwhm_nm * 1e-9 / (lambda * lambda);
        fwhm_omega / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    pub fn amplitude(&self, omega: f64) -> f64 {
        match self.shape {
            PumpShape::Monochromatic => {
                if omega == self.center_omega() {
                    1.0
                } else {
                    0.0
                }
            }
            PumpShape::Gaussian => {
                let x = (omega - self.center_omega()) / self.sigma_omega();
                (-0.5 * x * x).exp()
            }
        }
    }
}

/// Uniform angular-frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAxis {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl FrequencyAxis {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if points < 2 || !(start.is_finite() && end.is_finite()) || start == end || start <= 0.0 || end <= 0.0 {
            return Err(Error::InvalidArgument("frequency axis needs >= 2 points over a positive, nonempty range".into()));
        }
        Ok(Self { start, end, points })
    }

    /// Axis spanning a wavelength interval (in either order), uniform in ω.
    pub fn from_wavelengths(a_nm: f64, b_nm: f64, points: usize) -> Result<Self> {
        let (wa, wb) = (angular_frequency(a_nm), angular_frequency(b_nm));
        Self::new(wa.min(wb), wa.max(wb), points)
    }

    /// Axis of `points` cells of width `step` centered on `center`.
    pub fn centered(center: f64, step: f64, points: usize) -> Result<Self> {
        let half = 0.5 * step * (points as f64 - 1.0);
        Self::new(center - half, center + half, points)
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.points - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step() * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    /// Index of the grid point nearest to `omega`, if within half a cell.
    pub fn nearest(&self, omega: f64) -> Option<usize> {
        let x = (omega - self.start) / self.step();
        let i = x.round();
        (i >= 0.0 && i <= (self.points - 1) as f64).then_some(i as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsaGrid {
    pub signal: FrequencyAxis,
    pub idler: FrequencyAxis,
}

/// Points in the pump-frequency integral.
pub const PUMP_QUADRATURE_POINTS: usize = 201;
/// Half-width of the pump integral in Gaussian standard deviations.
pub const PUMP_QUADRATURE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpectrum {
    pub process: ProcessSpec,
    pub signal_omega: Vec<f64>,
    pub idler_omega: Vec<f64>,
    /// Row-major `[signal][idler]`.
    pub amplitude: Vec<Complex64>,
    pub intensity: Vec<f64>,
    /// Set when no grid point satisfies `|L Δk| ≤ 2π` at the pump center.
    pub misses_phasematching: bool,
}

impl JointSpectrum {
    pub fn shape(&self) -> (usize, usize) {
        (self.signal_omega.len(), self.idler_omega.len())
    }

    pub fn intensity_at(&self, i: usize, j: usize) -> f64 {
        self.intensity[i * self.idler_omega.len() + j]
    }

    pub fn cell_area(&self) -> f64 {
        let ds = self.signal_omega.get(1).map_or(1.0, |w| w - self.signal_omega[0]);
        let di = self.idler_omega.get(1).map_or(1.0, |w| w - self.idler_omega[0]);
        (ds * di).abs()
    }

    /// `(row, column)` of the largest intensity.
    pub fn argmax(&self) -> (usize, usize) {
        let n = self.idler_omega.len();
        let (idx, _) = self
            .intensity
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (idx / n, idx % n)
    }

    /// Same spectrum with unit `Σ |f|² dω_s dω_i`.
    pub fn normalized(&self) -> Result<Self> {
        let total: f64 = self.intensity.iter().sum::<f64>() * self.cell_area();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Normalization(format!("joint spectrum of {} is identically zero", self.process)));
        }
        let scale = total.sqrt().recip();
        let amplitude: Vec<Complex64> = self.amplitude.iter().map(|a| a * scale).collect();
        let intensity = amplitude.iter().map(|a| a.norm_sqr()).collect();
        Ok(Self { amplitude, intensity, ..self.clone() })
    }

    /// `Σ_i |f|² dω_i` per signal frequency.
    pub fn signal_marginal(&self) -> Vec<f64> {
        let (ns, ni) = self.shape();
        let di = self.idler_omega.get(1).map_or(1.0, |w| w - self.idler_omega[0]).abs();
        (0..ns).map(|i| self.intensity[i * ni..(i + 1) * ni].iter().sum::<f64>() * di).collect()
    }

    /// `Σ_s |f|² dω_s` per idler frequency.
    pub fn idler_marginal(&self) -> Vec<f64> {
        let (ns, ni) = self.shape();
        let ds = self.signal_omega.get(1).map_or(1.0, |w| w - self.signal_omega[0]).abs();
        (0..ni).map(|j| (0..ns).map(|i| self.intensity[i * ni + j]).sum::<f64>() * ds).collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Uniform table of a mode's scalar index, cubically interpolated.
struct IndexTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl IndexTable {
    fn build(fiber: &FiberParams, mode: &LpMode, start: f64, end: f64, points: usize) -> Result<Self> {
        let step = (end - start) / (points - 1) as f64;
        let values = (0..points)
            .map(|i| solve_lp_scalar_index(fiber, mode.l, mode.m, wavelength_nm(start + step * i as f64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { start, step, values })
    }

    fn scalar(&self, omega: f64) -> Option<f64> {
        let x = (omega - self.start) / self.step;
        let n = self.values.len();
        if x < 0.0 || x > (n - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).clamp(1, n - 3);
        let t = x - i as f64;
        let [p0, p1, p2, p3] = [self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]];
        // four-point Lagrange on nodes -1, 0, 1, 2
        Some(
            -p0 * t * (t - 1.0) * (t - 2.0) / 6.0 + p1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
                - p2 * (t + 1.0) * t * (t - 2.0) / 2.0
                + p3 * (t + 1.0) * t * (t - 1.0) / 6.0,
        )
    }
}

/// Joint spectral amplitude `f(ω_s, ω_i) = ∫ dω A(ω) A(ω_s+ω_i−ω) sinc(L Δk / 2)`.
///
/// A monochromatic pump collapses the integral onto the energy-conserving
/// antidiagonal `ω_s + ω_i = 2ω_p`: each signal row carries
/// `sinc(L Δk(ω_p, ω_s, 2ω_p − ω_s)/2)` in the idler cell nearest to
/// `2ω_p − ω_s` and zero elsewhere.
pub fn jsa(
    process: &ProcessSpec,
    fiber: &FiberParams,
    pump: &PumpEnvelope,
    grid: &JsaGrid,
    nonlinear: NonlinearPhase,
) -> Result<JointSpectrum> {
    pump.validate()?;
    let signal_omega = grid.signal.values();
    let idler_omega = grid.idler.values();
    let (ns, ni) = (signal_omega.len(), idler_omega.len());
    let half_length = 0.5 * fiber.length_m;
    let wp = pump.center_omega();

    let mut cache = WavenumberCache::new(fiber);
    let k_signal: Vec<Option<f64>> = signal_omega.iter().map(|&w| cache.k_per_m(&process.signal, w).ok()).collect();
    let k_idler: Vec<Option<f64>> = idler_omega.iter().map(|&w| cache.k_per_m(&process.idler, w).ok()).collect();
    let offset2 = birefringence_offset(&process.pump2, fiber);
    let pump_k = |n0: f64, offset: f64, w: f64| (n0 + offset) * w / SPEED_OF_LIGHT;

    // phase-matching coverage at the pump center, for the warning flag
    let kp_center = cache.k_per_m(&process.pump1, wp)? + cache.k_per_m(&process.pump2, wp)?;

    let mut amplitude = vec![Complex64::new(0.0, 0.0); ns * ni];
    let mut covered = false;

    match pump.shape {
        PumpShape::Monochromatic => {
            for (i, &ws) in signal_omega.iter().enumerate() {
                let wi = 2.0 * wp - ws;
                let Some(j) = grid.idler.nearest(wi) else { continue };
                let (Some(ks), Ok(ki)) = (k_signal[i], cache.k_per_m(&process.idler, wi)) else { continue };
                let dk = kp_center - ks - ki - nonlinear.value();
                covered |= (fiber.length_m * dk).abs() <= 2.0 * std::f64::consts::PI;
                amplitude[i * ni + j] = Complex64::new(sinc(half_length * dk), 0.0);
            }
        }
        PumpShape::Gaussian => {
            let sigma = pump.sigma_omega();
            let span = PUMP_QUADRATURE_SIGMAS * sigma;
            let n = PUMP_QUADRATURE_POINTS;
            let h = 2.0 * span / (n - 1) as f64;
            // Simpson weights on the odd-sized uniform grid
            let nodes: Vec<(f64, f64)> = (0..n)
                .map(|q| {
                    let w = if q == 0 || q == n - 1 {
                        1.0
                    } else if q % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    (wp - span + h * q as f64, w * h / 3.0)
                })
                .collect();
            let mut k_pump1 = Vec::with_capacity(n);
            for &(w, _) in &nodes {
                k_pump1.push(cache.k_per_m(&process.pump1, w)?);
            }
            let table_half = 8.0 * sigma;
            let table = IndexTable::build(fiber, &process.pump2, wp - table_half, wp + table_half, 401)?;

            for (i, &ws) in signal_omega.iter().enumerate() {
                let Some(ks) = k_signal[i] else { continue };
                for (j, &wi) in idler_omega.iter().enumerate() {
                    let Some(ki) = k_idler[j] else { continue };
                    let sum = ws + wi;
                    if (sum - 2.0 * wp).abs() > 2.0 * table_half {
                        continue;
                    }
                    let center_dk = kp_center - ks - ki - nonlinear.value();
                    if (sum - 2.0 * wp).abs() <= h {
                        covered |= (fiber.length_m * center_dk).abs() <= 2.0 * std::f64::consts::PI;
                    }
                    let mut acc = 0.0;
                    for (q, &(w, weight)) in nodes.iter().enumerate() {
                        let w2 = sum - w;
                        let a2 = pump.amplitude(w2);
                        if a2 < 1e-16 {
                            continue;
                        }
                        let Some(n2) = table.scalar(w2) else { continue };
                        let dk = k_pump1[q] + pump_k(n2, offset2, w2) - ks - ki - nonlinear.value();
                        acc += weight * pump.amplitude(w) * a2 * sinc(half_length * dk);
                    }
                    amplitude[i * ni + j] = Complex64::new(acc, 0.0);
                }
            }
        }
    }

    let intensity = amplitude.iter().map(|a| a.norm_sqr()).collect();
    Ok(JointSpectrum {
        process: *process,
        signal_omega,
        idler_omega,
        amplitude,
        intensity,
        misses_phasematching: !covered,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateComponent {
    pub process: ProcessSpec,
    pub overlap: f64,
    pub pump_powers_w: (f64, f64),
    /// `c √(W₁W₂) O_j`, with `c = 2` for distinct pump modes when the
    /// multiplicity factor is enabled.
    pub weight: f64,
    pub spectrum: JointSpectrum,
}

/// Two-photon state as a weighted set of per-process normalized spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonState {
    pub components: Vec<StateComponent>,
    pub signal_omega: Vec<f64>,
    pub idler_omega: Vec<f64>,
    /// Incoherent sum over processes of `|weight|²` times each marginal.
    pub signal_marginal: Vec<f64>,
    pub idler_marginal: Vec<f64>,
}

impl TwoPhotonState {
    /// `Σ_j weight_j f̂_j` on the shared grid.
    pub fn composite_amplitude(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.signal_omega.len() * self.idler_omega.len()];
        for c in &self.components {
            for (o, a) in out.iter_mut().zip(&c.spectrum.amplitude) {
                *o += a * c.weight;
            }
        }
        out
    }

    /// `Σ_j |weight_j|² |f̂_j|²`.
    pub fn composite_intensity(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.signal_omega.len() * self.idler_omega.len()];
        for c in &self.components {
            let w2 = c.weight * c.weight;
            for (o, v) in out.iter_mut().zip(&c.spectrum.intensity) {
                *o += w2 * v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateOptions {
    pub pump_multiplicity: bool,
    pub nonlinear: NonlinearPhase,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self { pump_multiplicity: true, nonlinear: NonlinearPhase::None }
    }
}

/// Combines precomputed spectra with overlaps and pump powers.
pub fn combine_spectra(
    spectra: &[JointSpectrum],
    overlaps: &[f64],
    powers_w: &[(f64, f64)],
    pump_multiplicity: bool,
) -> Result<TwoPhotonState> {
    if spectra.is_empty() {
        return Err(Error::InvalidArgument("no processes".into()));
    }
    if overlaps.len() != spectra.len() || powers_w.len() != spectra.len() {
        return Err(Error::Shape(format!(
            "{} spectra, {} overlaps, {} power pairs",
            spectra.len(),
            overlaps.len(),
            powers_w.len()
        )));
    }
    let reference = &spectra[0];
    for s in spectra {
        if s.signal_omega != reference.signal_omega || s.idler_omega != reference.idler_omega {
            return Err(Error::Shape(format!("{} uses a different frequency grid", s.process)));
        }
    }
    let mut components = Vec::with_capacity(spectra.len());
    let mut signal_marginal = vec![0.0; reference.signal_omega.len()];
    let mut idler_marginal = vec![0.0; reference.idler_omega.len()];
    for ((spectrum, &overlap), &(w1, w2)) in spectra.iter().zip(overlaps).zip(powers_w) {
        if w1 < 0.0 || w2 < 0.0 {
            return Err(Error::InvalidArgument("pump powers must be non-negative".into()));
        }
        let multiplicity = if pump_multiplicity && !spectrum.process.degenerate_pumps() { 2.0 } else { 1.0 };
        let weight = multiplicity * (w1 * w2).sqrt() * overlap;
        let spectrum = spectrum.normalized()?;
        let w2sq = weight * weight;
        for (m, v) in signal_marginal.iter_mut().zip(spectrum.signal_marginal()) {
            *m += w2sq * v;
        }
        for (m, v) in idler_marginal.iter_mut().zip(spectrum.idler_marginal()) {
            *m += w2sq * v;
        }
        components.push(StateComponent {
            process: spectrum.process,
            overlap,
            pump_powers_w: (w1, w2),
            weight,
            spectrum,
        });
    }
    Ok(TwoPhotonState {
        components,
        signal_omega: reference.signal_omega.clone(),
        idler_omega: reference.idler_omega.clone(),
        signal_marginal,
        idler_marginal,
    })
}

/// Overlaps (normalized over `processes`), joint spectra on a common grid,
/// and their weighted combination.
pub fn assemble_state(
    processes: &[ProcessSpec],
    fiber: &FiberParams,
    pump: &PumpEnvelope,
    grid: &JsaGrid,
    powers_w: &[(f64, f64)],
    options: &StateOptions,
) -> Result<TwoPhotonState> {
    if powers_w.len() != processes.len() {
        return Err(Error::Shape(format!("{} processes but {} power pairs", processes.len(), powers_w.len())));
    }
    let overlaps: Vec<f64> = normalized_overlaps(processes, fiber, pump.center_wavelength_nm)?
        .into_iter()
        .map(|t| t.total)
        .collect();
    let spectra = processes
        .par_iter()
        .map(|p| jsa(p, fiber, pump, grid, options.nonlinear))
        .collect::<Result<Vec<_>>>()?;
    combine_spectra(&spectra, &overlaps, powers_w, options.pump_multiplicity)
}
