use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::Grid1D;

fn default_core() -> f64 {
    1.0
}

/// External potential `V(q)`.
///
/// All families are even in `q` except tabulated ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum PotentialSpec {
    Free,
    /// `½ m ω² q²`.
    Harmonic {
        omega: f64,
    },
    /// `A [(q² + c²)^(κ/2) - c^κ]`: grows as `A |q|^κ`, smooth through a
    /// core of width `c`.
    PowerTail {
        amplitude: f64,
        exponent: f64,
        #[serde(default = "default_core")]
        core: f64,
    },
    /// `4ε[(σ/ρ)¹² - (σ/ρ)⁶]` with `ρ = |q| + 2^(1/6) σ`: the pair-potential
    /// well folded so its minimum `-ε` sits at the origin.
    LennardJonesLike {
        epsilon: f64,
        sigma: f64,
    },
    /// Values on an `N`-point periodic grid of extent `length`.
    Tabulated {
        length: f64,
        values: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn power_tail(amplitude: f64, exponent: f64) -> Self {
        PotentialSpec::PowerTail { amplitude, exponent, core: default_core() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and > 0, got {v}")))
            }
        };
        match self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Harmonic { omega } => positive("omega", *omega),
            PotentialSpec::PowerTail { amplitude, exponent, core } => {
                if !amplitude.is_finite() {
                    return Err(Error::param("amplitude", "must be finite"));
                }
                positive("exponent", *exponent)?;
                positive("core", *core)
            }
            PotentialSpec::LennardJonesLike { epsilon, sigma } => {
                positive("epsilon", *epsilon)?;
                positive("sigma", *sigma)
            }
            PotentialSpec::Tabulated { length, values } => {
                Grid1D::new(*length, values.len())?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("values", "tabulated potential must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Whether a normalizable stationary density exists.
    pub fn is_confining(&self) -> bool {
        match self {
            PotentialSpec::Free => false,
            PotentialSpec::Harmonic { omega } => *omega > 0.0,
            PotentialSpec::PowerTail { amplitude, exponent, .. } => *amplitude > 0.0 && *exponent > 0.0,
            // Any attractive 1-D well binds.
            PotentialSpec::LennardJonesLike { epsilon, .. } => *epsilon > 0.0,
            PotentialSpec::Tabulated { values, .. } => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                values.first().is_some_and(|edge| *edge > min)
            }
        }
    }

    /// Characteristic length used to pick analysis resolutions.
    pub fn length_scale(&self) -> f64 {
        match self {
            PotentialSpec::Free => 1.0,
            PotentialSpec::Harmonic { omega } => omega.sqrt().recip(),
            PotentialSpec::PowerTail { core, .. } => *core,
            PotentialSpec::LennardJonesLike { sigma, .. } => *sigma,
            PotentialSpec::Tabulated { length, values } => 16.0 * length / values.len() as f64,
        }
    }

    pub fn native_grid(&self) -> Option<Grid1D> {
        match self {
            PotentialSpec::Tabulated { length, values } => Grid1D::new(*length, values.len()).ok(),
            _ => None,
        }
    }

    pub fn value(&self, q: f64, mass: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Harmonic { omega } => 0.5 * mass * omega * omega * q * q,
            PotentialSpec::PowerTail { amplitude, exponent, core } => {
                amplitude * ((q * q + core * core).powf(0.5 * exponent) - core.powf(*exponent))
            }
            PotentialSpec::LennardJonesLike { epsilon, sigma } => {
                let s6 = (sigma / (q.abs() + lj_min(*sigma))).powi(6);
                4.0 * epsilon * (s6 * s6 - s6)
            }
            PotentialSpec::Tabulated { values, .. } => match self.native_grid() {
                Some(g) => g.interpolate(values, q),
                None => f64::NAN,
            },
        }
    }

    /// `dV/dq`.
    pub fn slope(&self, q: f64, mass: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Harmonic { omega } => mass * omega * omega * q,
            PotentialSpec::PowerTail { amplitude, exponent, core } => {
                amplitude * exponent * q * (q * q + core * core).powf(0.5 * exponent - 1.0)
            }
            PotentialSpec::LennardJonesLike { epsilon, sigma } => {
                let rho = q.abs() + lj_min(*sigma);
                let s6 = (sigma / rho).powi(6);
                q.signum() * 4.0 * epsilon * (-12.0 * s6 * s6 + 6.0 * s6) / rho
            }
            PotentialSpec::Tabulated { values, .. } => match self.native_grid() {
                Some(g) => {
                    let h = g.spacing();
                    (g.interpolate(values, q + 0.5 * h) - g.interpolate(values, q - 0.5 * h)) / h
                }
                None => f64::NAN,
            },
        }
    }

    /// `V` at every node.
    pub fn sample(&self, grid: &Grid1D, mass: f64) -> Vec<f64> {
        grid.nodes().into_iter().map(|q| self.value(q, mass)).collect()
    }

    /// `-dV/dq` at every node.
    pub fn force_field(&self, grid: &Grid1D, mass: f64) -> Vec<f64> {
        grid.nodes().into_iter().map(|q| -self.slope(q, mass)).collect()
    }
}

fn lj_min(sigma: f64) -> f64 {
    2f64.powf(1.0 / 6.0) * sigma
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Free => f.write_str("free"),
            PotentialSpec::Harmonic { omega } => write!(f, "harmonic:{omega}"),
            PotentialSpec::PowerTail { amplitude, exponent, core } => {
                write!(f, "power_tail:{amplitude},{exponent},{core}")
            }
            PotentialSpec::LennardJonesLike { epsilon, sigma } => write!(f, "lennard_jones_like:{epsilon},{sigma}"),
            PotentialSpec::Tabulated { length, values } => write!(f, "tabulated:{length}/{}", values.len()),
        }
    }
}

/// Parses `family[:p1,p2,...]`, e.g. `harmonic:1.0`, `power_tail:1,0.5`,
/// `power_tail:1,0.5,0.25`, `lj:5,1`, `free`. Tabulated potentials are
/// built from data, not strings.
impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::param("potential", format!("bad number in {s:?}: {e}")))?
        };
        let arity = |lo: usize, hi: usize| {
            if nums.len() < lo || nums.len() > hi {
                Err(Error::param("potential", format!("{family} takes {lo}..={hi} parameters, got {}", nums.len())))
            } else {
                Ok(())
            }
        };
        let spec = match family.trim() {
            "free" => {
                arity(0, 0)?;
                PotentialSpec::Free
            }
            "harmonic" => {
                arity(1, 1)?;
                PotentialSpec::Harmonic { omega: nums[0] }
            }
            "power_tail" | "power" => {
                arity(2, 3)?;
                PotentialSpec::PowerTail {
                    amplitude: nums[0],
                    exponent: nums[1],
                    core: nums.get(2).copied().unwrap_or_else(default_core),
                }
            }
            "lennard_jones_like" | "lj" => {
                arity(2, 2)?;
                PotentialSpec::LennardJonesLike { epsilon: nums[0], sigma: nums[1] }
            }
            other => return Err(Error::param("potential", format!("unknown family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
