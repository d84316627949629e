//! Fiber and mode descriptors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cladding material, selecting the dispersion formula for `n₂(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CladdingMaterial {
    #[default]
    FusedSilica,
}

/// Step-index fiber with polarization (`delta`) and parity (`delta_p`)
/// birefringence offsets on the effective index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    /// Core radius in µm.
    pub core_radius_um: f64,
    pub na: f64,
    pub delta: f64,
    pub delta_p: f64,
    /// Fiber length in m.
    pub length_m: f64,
    #[serde(default)]
    pub cladding_material: CladdingMaterial,
}

pub const MAX_BIREFRINGENCE: f64 = 1e-2;

impl FiberParams {
    pub fn new(core_radius_um: f64, na: f64, delta: f64, delta_p: f64, length_m: f64) -> Result<Self> {
        let fiber = Self {
            core_radius_um,
            na,
            delta,
            delta_p,
            length_m,
            cladding_material: CladdingMaterial::FusedSilica,
        };
        fiber.validate()?;
        Ok(fiber)
    }

    /// Same fiber with the four fit parameters replaced.
    pub fn with_params(&self, core_radius_um: f64, na: f64, delta: f64, delta_p: f64) -> Self {
        Self {
            core_radius_um,
            na,
            delta,
            delta_p,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key, reason: &str| Err(Error::InvalidFiber { key, reason: reason.to_string() });
        if !(self.core_radius_um.is_finite() && self.core_radius_um > 0.0) {
            return bad("core_radius_um", "must be positive");
        }
        if !(self.na.is_finite() && self.na > 0.0 && self.na < 1.0) {
            return bad("na", "must lie in (0, 1)");
        }
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return bad("length_m", "must be positive");
        }
        if !(self.delta.is_finite() && self.delta.abs() < MAX_BIREFRINGENCE) {
            return bad("delta", "magnitude must be below 1e-2");
        }
        if !(self.delta_p.is_finite() && self.delta_p.abs() < MAX_BIREFRINGENCE) {
            return bad("delta_p", "magnitude must be below 1e-2");
        }
        Ok(())
    }

    /// Normalized frequency `V = 2π r₀ NA / λ`.
    pub fn v_number(&self, wavelength_nm: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.core_radius_um * self.na / (wavelength_nm * 1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// `q = +1` for even, `-1` for odd.
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// Unfolded LP mode `LP_lm^{pq}`.
///
/// Field order gives the canonical sort `(l, m, polarization, parity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LpMode {
    pub l: u32,
    pub m: u32,
    pub polarization: Polarization,
    pub parity: Parity,
}

impl LpMode {
    pub fn new(l: u32, m: u32, polarization: Polarization, parity: Parity) -> Result<Self> {
        let mode = Self { l, m, polarization, parity };
        mode.validate()?;
        Ok(mode)
    }

    /// `LP_0m` with the given polarization (parity is necessarily even).
    pub fn fundamental_family(m: u32, polarization: Polarization) -> Self {
        Self { l: 0, m, polarization, parity: Parity::Even }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidMode(format!("{self}: radial index m must be >= 1")));
        }
        if self.l == 0 && self.parity == Parity::Odd {
            return Err(Error::InvalidMode(format!(
                "LP0{}: l = 0 modes have even parity only",
                self.m
            )));
        }
        Ok(())
    }

    pub fn with_polarization(self, polarization: Polarization) -> Self {
        Self { polarization, ..self }
    }

    pub fn with_parity(self, parity: Parity) -> Self {
        Self { parity, ..self }
    }
}

/// Compact labels as used in mode tables: `01x`, `11ex`, `11oy`; indices
/// above 9 are written with a dot, e.g. `12.1ey`.
impl fmt::Display for LpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l < 10 && self.m < 10 {
            write!(f, "{}{}", self.l, self.m)?;
        } else {
            write!(f, "{}.{}", self.l, self.m)?;
        }
        if self.l > 0 {
            f.write_str(match self.parity {
                Parity::Even => "e",
                Parity::Odd => "o",
            })?;
        }
        f.write_str(match self.polarization {
            Polarization::X => "x",
            Polarization::Y => "y",
        })
    }
}

impl FromStr for LpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let raw = s.trim();
        let body = raw
            .strip_prefix("LP")
            .or_else(|| raw.strip_prefix("lp"))
            .unwrap_or(raw);
        let bad = || Error::Parse(format!("bad mode label `{raw}`"));
        let digits_end = body
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .ok_or_else(bad)?;
        let (indices, tail) = body.split_at(digits_end);
        let (l, m) = if let Some((a, b)) = indices.split_once('.') {
            (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)
        } else if indices.len() == 2 {
            (indices[..1].parse().map_err(|_| bad())?, indices[1..].parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        let (parity, pol) = match tail.len() {
            1 => (None, tail),
            2 => (Some(&tail[..1]), &tail[1..]),
            _ => return Err(bad()),
        };
        let polarization = match pol {
            "x" | "X" => Polarization::X,
            "y" | "Y" => Polarization::Y,
            _ => return Err(bad()),
        };
        let parity = match parity {
            None if l == 0 => Parity::Even,
            None => return Err(Error::Parse(format!("mode `{raw}` needs a parity (e/o)"))),
            Some("e") | Some("E") => Parity::Even,
            Some("o") | Some("O") => Parity::Odd,
            Some(_) => return Err(bad()),
        };
        LpMode::new(l, m, polarization, parity)
    }
}

impl Serialize for LpMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LpMode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
