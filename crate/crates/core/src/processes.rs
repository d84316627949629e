//! SFWM process bookkeeping: enumeration of mode quadruples, OAM and parity
//! selection rules, and transverse mode overlaps.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::ModeSolution;
use crate::error::{Error, Result};
use crate::fiber::{FiberParams, LpMode, Parity, Polarization};
use crate::modefield::{radial_integral, TransverseField, DEFAULT_RADIAL_POINTS, TAIL_DECAY_LENGTHS};

/// Mode assignment for (pump 1, pump 2, signal, idler).
///
/// The signal is the long-wavelength photon (`λ > λ_p`) and the idler the
/// short-wavelength one. Pumps are unordered; [`ProcessSpec::canonical`]
/// sorts them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub pump1: LpMode,
    pub pump2: LpMode,
    pub signal: LpMode,
    pub idler: LpMode,
}

impl ProcessSpec {
    pub fn new(pump1: LpMode, pump2: LpMode, signal: LpMode, idler: LpMode) -> Self {
        Self { pump1, pump2, signal, idler }
    }

    pub fn canonical(self) -> Self {
        if self.pump2 < self.pump1 {
            Self { pump1: self.pump2, pump2: self.pump1, ..self }
        } else {
            self
        }
    }

    pub fn modes(&self) -> [LpMode; 4] {
        [self.pump1, self.pump2, self.signal, self.idler]
    }

    pub fn swap_outputs(self) -> Self {
        Self { signal: self.idler, idler: self.signal, ..self }
    }

    pub fn swap_pumps(self) -> Self {
        Self { pump1: self.pump2, pump2: self.pump1, ..self }
    }

    pub fn degenerate_pumps(&self) -> bool {
        self.pump1 == self.pump2
    }

    /// Pumps x-polarized and photon pair y-polarized.
    pub fn is_cross_polarized_xx_yy(&self) -> bool {
        self.pump1.polarization == Polarization::X
            && self.pump2.polarization == Polarization::X
            && self.signal.polarization == Polarization::Y
            && self.idler.polarization == Polarization::Y
    }
}

/// `p1+p2->s+i`, e.g. `01x+11ex->01y+11ey`.
impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}->{}+{}", self.pump1, self.pump2, self.signal, self.idler)
    }
}

impl FromStr for ProcessSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad process `{s}`, expected e.g. 01x+11ex->01y+11ey"));
        let (pumps, outputs) = s.split_once("->").ok_or_else(bad)?;
        let (p1, p2) = pumps.split_once('+').ok_or_else(bad)?;
        let (sig, idl) = outputs.split_once('+').ok_or_else(bad)?;
        Ok(Self::new(p1.parse()?, p2.parse()?, sig.parse()?, idl.parse()?))
    }
}

/// Parity non-conservation `q₁q₂ − q_s q_i`.
pub fn delta_q(process: &ProcessSpec) -> i32 {
    process.pump1.parity.sign() * process.pump2.parity.sign()
        - process.signal.parity.sign() * process.idler.parity.sign()
}

/// The eight signed sums `l₁ ± l₂ ± l_s ± l_i`. Bit 2, 1, 0 of the index
/// select a minus sign on `l₂`, `l_s`, `l_i` respectively; index 0 is `+++`
/// and index 7 is `---`.
pub fn delta_l_family(process: &ProcessSpec) -> [i32; 8] {
    let l = process.modes().map(|m| m.l as i32);
    let mut out = [0; 8];
    for (idx, slot) in out.iter_mut().enumerate() {
        let sign = |bit: usize| if idx & (1 << bit) != 0 { -1 } else { 1 };
        *slot = l[0] + sign(2) * l[1] + sign(1) * l[2] + sign(0) * l[3];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub delta_q: i32,
    pub delta_l_family: [i32; 8],
    pub viable: bool,
}

impl ConservationReport {
    pub fn min_abs_delta_l(&self) -> i32 {
        self.delta_l_family.iter().map(|d| d.abs()).min().unwrap_or(0)
    }
}

pub fn conservation_report(process: &ProcessSpec) -> ConservationReport {
    let dq = delta_q(process);
    let family = delta_l_family(process);
    ConservationReport {
        delta_q: dq,
        delta_l_family: family,
        viable: dq == 0 && family.contains(&0),
    }
}

/// `G` written as a sum of `c · exp(i n φ)` terms.
fn exponential_terms(mode: &LpMode) -> Vec<(i32, Complex64)> {
    let l = mode.l as i32;
    if l == 0 {
        return vec![(0, Complex64::new(1.0, 0.0))];
    }
    match mode.parity {
        Parity::Even => vec![(l, Complex64::new(0.5, 0.0)), (-l, Complex64::new(0.5, 0.0))],
        // sin(lφ) = (e^{ilφ} − e^{−ilφ}) / 2i
        Parity::Odd => vec![(l, Complex64::new(0.0, -0.5)), (-l, Complex64::new(0.0, 0.5))],
    }
}

/// Exact `∫₀^{2π} G₁ G₂ G_s* G_i* dφ`.
///
/// Each factor is expanded over its two subjacent vortices `e^{±ilφ}`; only
/// products whose charges sum to zero survive the integral.
pub fn azimuthal_overlap(process: &ProcessSpec) -> f64 {
    let [a, b, s, i] = process.modes().map(|m| exponential_terms(&m));
    // G is real, so conjugation of the output factors leaves it unchanged.
    let mut acc = Complex64::new(0.0, 0.0);
    for &(na, ca) in &a {
        for &(nb, cb) in &b {
            for &(ns, cs) in &s {
                for &(ni, ci) in &i {
                    if na + nb + ns + ni == 0 {
                        acc += ca * cb * cs * ci;
                    }
                }
            }
        }
    }
    debug_assert!(acc.im.abs() < 1e-12);
    2.0 * PI * acc.re
}

fn fields_for(
    modes: impl IntoIterator<Item = LpMode>,
    fiber: &FiberParams,
    wavelength_nm: f64,
    points: usize,
) -> Result<HashMap<(u32, u32), TransverseField>> {
    // the spatial profile depends only on (l, m); polarization and parity
    // enter through the azimuthal factor and the index offsets
    let mut fields = HashMap::new();
    for mode in modes {
        let key = (mode.l, mode.m);
        if fields.contains_key(&key) {
            continue;
        }
        let scalar = LpMode { l: mode.l, m: mode.m, polarization: Polarization::Y, parity: Parity::Even };
        let solution = ModeSolution::solve(fiber, &scalar, wavelength_nm)?;
        fields.insert(key, TransverseField::with_points(&solution, points)?);
    }
    Ok(fields)
}

fn radial_product(fields: &[&TransverseField; 4], points: usize) -> f64 {
    let r0 = fields[0].solution.core_radius_um;
    let v_min = fields.iter().map(|f| f.solution.v).fold(f64::INFINITY, f64::min);
    let r_max = r0 + TAIL_DECAY_LENGTHS / v_min;
    radial_integral(r0, r_max, points, |r| fields.iter().map(|f| f.radial(r)).product())
}

/// `∫ r F₁ F₂ F_s F_i dr` over unit-power normalized radial factors, all
/// evaluated at one reference wavelength.
pub fn radial_overlap(process: &ProcessSpec, fiber: &FiberParams, wavelength_nm: f64) -> Result<f64> {
    radial_overlap_with_points(process, fiber, wavelength_nm, DEFAULT_RADIAL_POINTS)
}

pub fn radial_overlap_with_points(
    process: &ProcessSpec,
    fiber: &FiberParams,
    wavelength_nm: f64,
    points: usize,
) -> Result<f64> {
    let fields = fields_for(process.modes(), fiber, wavelength_nm, points)?;
    let pick = |m: LpMode| &fields[&(m.l, m.m)];
    let quad = [pick(process.pump1), pick(process.pump2), pick(process.signal), pick(process.idler)];
    Ok(radial_product(&quad, points))
}

/// Unnormalized overlap `O_r · O_φ`; exactly zero for forbidden processes.
pub fn raw_overlap(process: &ProcessSpec, fiber: &FiberParams, wavelength_nm: f64) -> Result<f64> {
    let phi = azimuthal_overlap(process);
    if phi == 0.0 {
        return Ok(0.0);
    }
    Ok(radial_overlap(process, fiber, wavelength_nm)? * phi)
}

/// Overlap of one process together with its factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapTerms {
    pub azimuthal: f64,
    pub radial: f64,
    /// Normalized over the declared set: `Σ |total|² = 1`.
    pub total: f64,
}

/// Overlaps for a declared set of competing processes, rescaled so that
/// `Σ_j |O_j|² = 1` over the set.
pub fn normalized_overlaps(
    processes: &[ProcessSpec],
    fiber: &FiberParams,
    wavelength_nm: f64,
) -> Result<Vec<OverlapTerms>> {
    let fields = fields_for(
        processes.iter().flat_map(|p| p.modes()),
        fiber,
        wavelength_nm,
        DEFAULT_RADIAL_POINTS,
    )?;
    let raw: Vec<(f64, f64)> = processes
        .par_iter()
        .map(|p| {
            let phi = azimuthal_overlap(p);
            let pick = |m: LpMode| &fields[&(m.l, m.m)];
            let quad = [pick(p.pump1), pick(p.pump2), pick(p.signal), pick(p.idler)];
            let radial = radial_product(&quad, DEFAULT_RADIAL_POINTS);
            (phi, radial)
        })
        .collect();
    let norm: f64 = raw.iter().map(|(phi, r)| (phi * r).powi(2)).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Normalization(format!(
            "no process with nonzero overlap among {} candidates",
            processes.len()
        )));
    }
    Ok(raw
        .into_iter()
        .map(|(phi, radial)| OverlapTerms { azimuthal: phi, radial, total: phi * radial / norm })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationFilter {
    /// x-polarized pumps, y-polarized signal and idler.
    CrossXxYy,
}

impl PolarizationFilter {
    pub fn accepts(&self, process: &ProcessSpec) -> bool {
        match self {
            PolarizationFilter::CrossXxYy => process.is_cross_polarized_xx_yy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedProcess {
    pub process: ProcessSpec,
    pub conservation: ConservationReport,
    pub azimuthal_overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    /// Ordered quadruples over the mode list (`M⁴`).
    pub total_ordered: usize,
    /// Ordered quadruples passing the polarization filter.
    pub filtered_ordered: usize,
    /// Ordered quadruples passing the filter and the selection rules.
    pub viable_ordered: usize,
    /// Canonical (unordered pump pair) processes passing the filter.
    pub entries: Vec<EnumeratedProcess>,
}

impl Enumeration {
    pub fn viable(&self) -> impl Iterator<Item = &EnumeratedProcess> {
        self.entries.iter().filter(|e| e.conservation.viable)
    }

    pub fn viable_processes(&self) -> Vec<ProcessSpec> {
        self.viable().map(|e| e.process).collect()
    }
}

pub fn enumerate_processes(modes: &[LpMode], filter: Option<PolarizationFilter>) -> Result<Enumeration> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("empty mode list".into()));
    }
    for mode in modes {
        mode.validate()?;
    }
    let mut filtered_ordered = 0;
    let mut viable_ordered = 0;
    let mut canonical = BTreeSet::new();
    for &p1 in modes {
        for &p2 in modes {
            for &s in modes {
                for &i in modes {
                    let process = ProcessSpec::new(p1, p2, s, i);
                    if filter.is_some_and(|f| !f.accepts(&process)) {
                        continue;
                    }
                    filtered_ordered += 1;
                    if conservation_report(&process).viable {
                        viable_ordered += 1;
                    }
                    canonical.insert(process.canonical());
                }
            }
        }
    }
    let entries = canonical
        .into_iter()
        .map(|process| EnumeratedProcess {
            process,
            conservation: conservation_report(&process),
            azimuthal_overlap: azimuthal_overlap(&process),
        })
        .collect();
    Ok(Enumeration {
        total_ordered: modes.len().pow(4),
        filtered_ordered,
        viable_ordered,
        entries,
    })
}
