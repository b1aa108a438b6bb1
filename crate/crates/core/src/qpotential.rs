//! Quantum potential, quantum force, the quantum energy functional, and the
//! range-of-interaction analysis of the quantum force.
//!
//! The potential is evaluated in amplitude form,
//! `V_qu = -(ħ²/2m) R''/R` with `R = sqrt(n)`. Derivatives are taken
//! spectrally on the raw amplitude; the density floor enters only through
//! the denominators, so the floor never introduces a kink that the spectral
//! derivative would smear across the domain.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{relax_ground_state, PotentialSpec, RelaxOptions};
use crate::error::{Error, Result};
use crate::noise::linear_slope;
use crate::spatial::{integrate_slice, spectral_derivatives, DensityField, Grid1D, ScalarField};

/// Default density floor relative to the density maximum.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Tail-to-head integral ratio above which the range integral is declared
/// divergent.
pub const DIVERGENCE_RATIO: f64 = 0.5;

/// Smallest usable `|dV_qu/dq|` at `q = λ_c`.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Upper integration limit as a fraction of the domain length.
pub const Q_MAX_FRACTION: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumParams {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for QuantumParams {
    fn default() -> Self {
        QuantumParams { hbar: 1.0, mass: 1.0 }
    }
}

impl QuantumParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let p = QuantumParams { hbar, mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::param("hbar", "must be finite and > 0"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::param("mass", "must be finite and > 0"));
        }
        Ok(())
    }

    /// `ħ²/2m`.
    pub fn stiffness(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

/// `RELATIVE_FLOOR × max(n)`.
pub fn default_floor(n: &DensityField) -> f64 {
    RELATIVE_FLOOR * n.max()
}

struct Amplitude {
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
    /// `max(R, sqrt(floor))`.
    denom: Vec<f64>,
}

fn amplitude_derivatives(n: &DensityField, floor: f64, need_third: bool) -> Amplitude {
    let r: Vec<f64> = n.values().iter().map(|v| v.sqrt()).collect();
    let orders: &[u32] = if need_third { &[1, 2, 3] } else { &[1, 2] };
    let mut d = spectral_derivatives(&r, n.grid(), orders).into_iter();
    let d1 = d.next().unwrap();
    let d2 = d.next().unwrap();
    let d3 = d.next().unwrap_or_default();
    let root = floor.sqrt();
    let denom = r.iter().map(|v| v.max(root)).collect();
    Amplitude { d1, d2, d3, denom }
}

fn check_floor(floor: f64) -> Result<()> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::param("floor", format!("must be positive, got {floor}")));
    }
    Ok(())
}

/// `V_qu = -(ħ²/2m) ∇²sqrt(n) / sqrt(max(n, floor))`.
pub fn quantum_potential(n: &DensityField, p: &QuantumParams, floor: f64) -> Result<ScalarField> {
    p.validate()?;
    check_floor(floor)?;
    let a = amplitude_derivatives(n, floor, false);
    let c = p.stiffness();
    let v = a.d2.iter().zip(&a.denom).map(|(d2, r)| -c * (d2 / r)).collect();
    ScalarField::new(*n.grid(), v)
}

/// `-∇V_qu`, with the default floor.
///
/// Evaluated pointwise as `(ħ²/2m)(R'''/R - R'' R'/R²)` so the force stays
/// local where the floor is active.
pub fn quantum_force(n: &DensityField, p: &QuantumParams) -> Result<ScalarField> {
    quantum_force_with_floor(n, p, default_floor(n))
}

pub fn quantum_force_with_floor(n: &DensityField, p: &QuantumParams, floor: f64) -> Result<ScalarField> {
    p.validate()?;
    check_floor(floor)?;
    let a = amplitude_derivatives(n, floor, true);
    let c = p.stiffness();
    let f = (0..n.values().len())
        .map(|j| {
            let r = a.denom[j];
            c * (a.d3[j] / r - a.d2[j] * a.d1[j] / (r * r))
        })
        .collect();
    ScalarField::new(*n.grid(), f)
}

/// `∫ n V_qu dq`.
pub fn quantum_energy(n: &DensityField, p: &QuantumParams) -> Result<f64> {
    let v = quantum_potential(n, p, default_floor(n))?;
    let nv: Vec<f64> = n.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    Ok(integrate_slice(&nv, n.grid()))
}

/// Range of interaction; `Divergent` when the range integral does not
/// converge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaQ {
    Finite(f64),
    Divergent,
}

impl LambdaQ {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LambdaQ::Finite(v) => Some(*v),
            LambdaQ::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, LambdaQ::Divergent)
    }
}

impl fmt::Display for LambdaQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaQ::Finite(v) => write!(f, "{v}"),
            LambdaQ::Divergent => f.write_str("DIVERGENT"),
        }
    }
}

impl Serialize for LambdaQ {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaQ::Finite(v) => s.serialize_f64(*v),
            LambdaQ::Divergent => s.serialize_str("DIVERGENT"),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaQ {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(LambdaQ::Finite(v)),
            Repr::Text(t) if t == "DIVERGENT" => Ok(LambdaQ::Divergent),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"DIVERGENT\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub lambda_q: LambdaQ,
    /// `∫_0^{q_max} |q⁻¹ dV_qu/dq| dq`.
    pub integral_value: f64,
    /// `λ_c⁻¹ |dV_qu/dq|` at `q = λ_c`.
    pub denominator: f64,
    /// Integral over `[q_max/2, q_max]` divided by the integral over `[0, q_max/2]`.
    pub tail_ratio: f64,
    /// Log-log slope of `|q⁻¹ dV_qu/dq|` over `[q_max/2, q_max]`.
    pub tail_exponent_estimate: f64,
    pub converged: bool,
    pub lambda_c: f64,
    pub q_max: f64,
}

/// Range of interaction of the quantum force on the positive half-line.
///
/// `dV_qu/dq` is taken with central differences so that poorly resolved
/// values beyond `q_max` cannot leak into the window.
pub fn interaction_range(v_qu: &ScalarField, lambda_c: f64, q_max: f64) -> Result<RangeReport> {
    let g = v_qu.grid();
    let h = g.spacing();
    if !(q_max > 2.0 * h && q_max < 0.5 * g.length() - h) {
        return Err(Error::param("q_max", format!("must lie inside (2h, L/2 - h), got {q_max}")));
    }
    if !(lambda_c > 0.0 && lambda_c < q_max) {
        return Err(Error::param("lambda_c", format!("must lie inside (0, q_max), got {lambda_c}")));
    }
    let v = v_qu.values();
    let n = v.len();
    let o = g.origin();
    let slope = |j: usize| (v[(j + 1) % n] - v[(j + n - 1) % n]) / (2.0 * h);

    let s = lambda_c / h;
    let j = s.floor() as usize;
    let w = s - j as f64;
    let force_at_lc = (1.0 - w) * slope(o + j) + w * slope(o + j + 1);
    if force_at_lc.abs() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(force_at_lc.abs()));
    }
    let denominator = force_at_lc.abs() / lambda_c;

    // Integrand on nodes 0..=m; at q = 0 it is the limit |V_qu''(0)|.
    let m = (q_max / h).floor() as usize;
    let integrand: Vec<f64> = (0..=m)
        .map(|i| {
            if i == 0 {
                ((v[o + 1] - 2.0 * v[o] + v[o - 1]) / (h * h)).abs()
            } else {
                (slope(o + i) / (i as f64 * h)).abs()
            }
        })
        .collect();
    let trapezoid = |a: usize, b: usize| -> f64 { (a..b).map(|i| 0.5 * h * (integrand[i] + integrand[i + 1])).sum() };
    let mid = m / 2;
    let head = trapezoid(0, mid);
    let tail = trapezoid(mid, m);
    let integral_value = head + tail;
    let tail_ratio = if head > 0.0 { tail / head } else { f64::INFINITY };
    let converged = tail_ratio <= DIVERGENCE_RATIO;

    let pts: Vec<(f64, f64)> =
        (mid.max(1)..=m).filter(|&i| integrand[i] > 0.0).map(|i| ((i as f64 * h).ln(), integrand[i].ln())).collect();
    let tail_exponent_estimate = if pts.len() >= 2 { linear_slope(&pts) } else { f64::NAN };

    Ok(RangeReport {
        lambda_q: if converged { LambdaQ::Finite(2.0 * integral_value / denominator) } else { LambdaQ::Divergent },
        integral_value,
        denominator,
        tail_ratio,
        tail_exponent_estimate,
        converged,
        lambda_c,
        q_max: m as f64 * h,
    })
}

#[derive(Clone, Debug, Default)]
pub struct TailOptions {
    /// Noise correlation length used in the denominator; defaults to the
    /// standard deviation of the relaxed density.
    pub lambda_c: Option<f64>,
    /// Analysis grid; sized automatically from the potential when absent.
    pub grid: Option<Grid1D>,
}

/// Everything [`classify_tail_with`] computed along the way.
#[derive(Clone, Debug)]
pub struct TailAnalysis {
    pub report: RangeReport,
    pub density: DensityField,
    pub v_qu: ScalarField,
}

/// Relaxes to the stationary density of `spec` and analyses its quantum force.
pub fn classify_tail(spec: &PotentialSpec, p: &QuantumParams) -> Result<RangeReport> {
    classify_tail_with(spec, p, &TailOptions::default()).map(|a| a.report)
}

pub fn classify_tail_with(spec: &PotentialSpec, p: &QuantumParams, opts: &TailOptions) -> Result<TailAnalysis> {
    p.validate()?;
    spec.validate()?;
    if !spec.is_confining() {
        return Err(Error::NonConfining(spec.to_string()));
    }
    let grid = match (opts.grid, spec.native_grid()) {
        (Some(g), _) => g,
        (None, Some(g)) => g,
        (None, None) => analysis_grid(spec, p, opts.lambda_c)?,
    };
    let psi = relax_ground_state(spec, p, &grid, &RelaxOptions::default())?;
    let density = psi.density();
    let v_qu = quantum_potential(&density, p, default_floor(&density))?;
    let lambda_c = opts.lambda_c.unwrap_or_else(|| density.variance().sqrt());
    let report = interaction_range(&v_qu, lambda_c, Q_MAX_FRACTION * grid.length())?;
    Ok(TailAnalysis { report, density, v_qu })
}

/// WKB decay exponent of the amplitude reached at `q_max`.
const TAIL_ACTION: f64 = 14.0;

/// Sizes a grid so the relaxed amplitude at `q_max = 0.45 L` has decayed by
/// about `exp(-TAIL_ACTION)`: small enough to approximate the infinite
/// domain, large enough that `V_qu` is still resolved there.
pub fn analysis_grid(spec: &PotentialSpec, p: &QuantumParams, lambda_c: Option<f64>) -> Result<Grid1D> {
    let v0 = spec.value(0.0, p.mass);
    let dq = 1e-3 * spec.length_scale();
    let mut action = 0.0;
    let mut q = 0.0;
    let mut prev = 0.0;
    while action < TAIL_ACTION {
        q += dq;
        let k = (2.0 * p.mass * (spec.value(q, p.mass) - v0).max(0.0)).sqrt() / p.hbar;
        action += 0.5 * dq * (prev + k);
        prev = k;
        if q > 1e6 * spec.length_scale() {
            return Err(Error::NonConfining(spec.to_string()));
        }
    }
    let q_max = q;
    let length = q_max / Q_MAX_FRACTION;
    // Resolve the local wavenumber at q_max, the potential's own scale and λ_c.
    let k_max = prev.max(1.0 / spec.length_scale());
    let mut h = (0.25 / k_max).min(spec.length_scale() / 16.0).min(length / 256.0);
    if let Some(lc) = lambda_c {
        h = h.min(lc / 8.0);
    }
    let points = ((length / h).ceil() as usize).next_power_of_two().clamp(256, 1 << 16);
    Grid1D::new(length, points)
}
