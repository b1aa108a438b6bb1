//! Periodic 1-D grids, the scalar / density / wave fields that live on them,
//! and the derivative and quadrature kernels shared by every other module.
//!
//! Nodes sit at `q_j = -L/2 + j h`, `j = 0..N`, so the origin is always a
//! grid node (N is even) and symmetric densities are centred on it.

use std::cell::RefCell;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 16;

/// Tolerance on the unit-mass invariant of densities and wavefunctions.
pub const NORM_TOLERANCE: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse (unnormalized) transforms of length `n`.
pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid1D {
    spacing: f64,
    points: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    #[serde(rename = "N")]
    points: usize,
    #[serde(rename = "L")]
    length: f64,
}

impl TryFrom<GridRepr> for Grid1D {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid1D::new(r.length, r.points)
    }
}

impl From<Grid1D> for GridRepr {
    fn from(g: Grid1D) -> Self {
        GridRepr { points: g.points, length: g.length() }
    }
}

impl Grid1D {
    /// Builds a periodic grid of `points` nodes over an extent `length`.
    ///
    /// The spacing is stored and the extent derived from it, so
    /// `spacing() * points() == length()` holds bit-exactly.
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if points < MIN_POINTS || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("point count must be even and >= {MIN_POINTS}, got {points}")));
        }
        Ok(Grid1D { spacing: length / points as f64, points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.spacing * self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - (self.points / 2) as f64) * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Index of the node at `q = 0`.
    pub fn origin(&self) -> usize {
        self.points / 2
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as isize;
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..n).map(|j| if j < n / 2 { j } else { j - n }).map(|j| j as f64 * dk).collect()
    }

    /// Maps `q` into `[-L/2, L/2)`; values already inside are returned
    /// unchanged.
    pub fn wrap(&self, q: f64) -> f64 {
        let l = self.length();
        let half = 0.5 * l;
        if (-half..half).contains(&q) {
            return q;
        }
        let w = (q + half).rem_euclid(l) - half;
        // Round-off can land exactly on the excluded end point.
        if w >= half {
            w - l
        } else {
            w
        }
    }

    /// Shortest signed periodic displacement equivalent to `dq`.
    pub fn min_image(&self, dq: f64) -> f64 {
        self.wrap(dq)
    }

    /// Periodic linear interpolation of nodal `values` at position `q`.
    pub fn interpolate(&self, values: &[f64], q: f64) -> f64 {
        debug_assert_eq!(values.len(), self.points);
        let s = (self.wrap(q) - self.node(0)) / self.spacing;
        let j = (s.floor() as isize).rem_euclid(self.points as isize) as usize;
        let w = s - s.floor();
        let k = (j + 1) % self.points;
        (1.0 - w) * values[j] + w * values[k]
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.points == other.points && self.spacing == other.spacing
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_len(grid: &Grid1D, len: usize) -> Result<()> {
    if len != grid.points() {
        return Err(Error::InvalidGrid(format!("field has {len} values but the grid has {} points", grid.points())));
    }
    Ok(())
}

/// A real field sampled on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid1D) -> Self {
        ScalarField { grid, values: vec![0.0; grid.points()] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, q: f64) -> f64 {
        self.grid.interpolate(&self.values, q)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `q,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "q,value")?;
        for (q, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{q},{v}")?;
        }
        Ok(())
    }
}

/// A nonnegative density normalized to unit mass under [`integrate`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    field: ScalarField,
}

impl DensityField {
    /// Accepts values that are already normalized.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        let field = ScalarField::new(grid, values)?;
        check_nonnegative(field.values())?;
        let mass = integrate_slice(field.values(), &grid);
        if (mass - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(mass));
        }
        Ok(DensityField { field })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: Grid1D, mut values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        check_finite(&values)?;
        check_nonnegative(&values)?;
        let mass = integrate_slice(&values, &grid);
        if !(mass > 0.0) {
            return Err(Error::NotNormalized(mass));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(DensityField { field: ScalarField { grid, values } })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn gaussian(grid: Grid1D, center: f64, sigma: f64) -> Result<Self> {
        Self::from_fn(grid, |q| {
            let d = grid.min_image(q - center);
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
    }

    pub fn uniform(grid: Grid1D) -> Self {
        let v = 1.0 / grid.length();
        DensityField { field: ScalarField { grid, values: vec![v; grid.points()] } }
    }

    pub fn grid(&self) -> &Grid1D {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn as_scalar(&self) -> &ScalarField {
        &self.field
    }

    pub fn max(&self) -> f64 {
        self.values().iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    /// `⟨q⟩` and `⟨q²⟩` about the origin (no periodic unwrapping).
    pub fn moments(&self) -> (f64, f64) {
        let g = self.grid();
        let h = g.spacing();
        self.values().iter().enumerate().fold((0.0, 0.0), |(m1, m2), (j, n)| {
            let q = g.node(j);
            (m1 + h * q * n, m2 + h * q * q * n)
        })
    }

    pub fn variance(&self) -> f64 {
        let (m1, m2) = self.moments();
        m2 - m1 * m1
    }

    /// Standardized fourth moment minus 3.
    pub fn excess_kurtosis(&self) -> f64 {
        let g = self.grid();
        let h = g.spacing();
        let (mean, _) = self.moments();
        let var = self.variance();
        let m4: f64 = self.values().iter().enumerate().map(|(j, n)| h * n * (g.node(j) - mean).powi(4)).sum();
        m4 / (var * var) - 3.0
    }

    /// `sqrt(∫ (a - b)² dq)`.
    pub fn l2_distance(&self, other: &DensityField) -> Result<f64> {
        if !self.grid().same_as(other.grid()) {
            return Err(Error::GridMismatch);
        }
        let h = self.grid().spacing();
        let s: f64 = self.values().iter().zip(other.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((h * s).sqrt())
    }

    pub fn l2_norm(&self) -> f64 {
        let h = self.grid().spacing();
        (h * self.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.field.write_csv(w)
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| *v < 0.0) {
        Some(index) => Err(Error::NegativeDensity { index, value: values[index] }),
        None => Ok(()),
    }
}

/// A complex amplitude with `∫ |ψ|² dq = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        let psi = Self::unchecked(grid, values)?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(psi)
    }

    pub fn normalized(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        let mut psi = Self::unchecked(grid, values)?;
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::NotNormalized(norm));
        }
        psi.scale(1.0 / norm.sqrt());
        Ok(psi)
    }

    fn unchecked(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(index) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(WaveField { grid, values })
    }

    /// Gaussian packet with density standard deviation `sigma` and mean
    /// momentum `hbar * wavenumber`.
    pub fn gaussian(grid: Grid1D, center: f64, sigma: f64, wavenumber: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        let values = grid
            .nodes()
            .into_iter()
            .map(|q| {
                let d = grid.min_image(q - center);
                Complex64::from_polar((-0.25 * d * d / (sigma * sigma)).exp(), wavenumber * d)
            })
            .collect();
        Self::normalized(grid, values)
    }

    /// Real nonnegative amplitude `sqrt(n)`.
    pub fn from_density(n: &DensityField) -> Self {
        let values = n.values().iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect();
        WaveField { grid: *n.grid(), values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<Complex64>) -> Self {
        WaveField { grid, values }
    }

    /// `∫ |ψ|² dq`.
    pub fn norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|z| *z *= s);
    }

    pub(crate) fn renormalize(&mut self) -> f64 {
        let norm = self.norm();
        self.scale(1.0 / norm.sqrt());
        norm
    }

    /// `|ψ|²` rescaled to unit mass (absorbs round-off drift).
    pub fn density(&self) -> DensityField {
        let values: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        let mass = integrate_slice(&values, &self.grid);
        DensityField { field: ScalarField { grid: self.grid, values: values.into_iter().map(|v| v / mass).collect() } }
    }

    /// `⟨ψ|φ⟩ = ∫ ψ* φ dq`.
    pub fn inner(&self, other: &WaveField) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.spacing())
    }

    pub fn l2_distance(&self, other: &WaveField) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.spacing()).sqrt())
    }

    /// Expected momentum `∫ ψ* (-iħ ∂_q) ψ dq`, spectrally.
    pub fn mean_momentum(&self, hbar: f64) -> f64 {
        let n = self.grid.points();
        let (fwd, _) = fft_pair(n);
        let mut buf = self.values.clone();
        fwd.process(&mut buf);
        let k = self.grid.wavenumbers();
        let p: f64 = buf.iter().zip(&k).map(|(c, k)| k * c.norm_sqr()).sum();
        // Parseval: Σ|ψ_j|² h = (h/N) Σ|c_k|².
        hbar * p * self.grid.spacing() / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Spectral,
    Central,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// `∂f/∂q` or `∂²f/∂q²` on the same grid.
pub fn derivative(f: &ScalarField, order: Order, scheme: Scheme) -> Result<ScalarField> {
    check_finite(f.values())?;
    let values = match scheme {
        Scheme::Spectral => {
            let power = match order {
                Order::First => 1,
                Order::Second => 2,
            };
            spectral_derivatives(f.values(), f.grid(), &[power]).pop().unwrap()
        }
        Scheme::Central => central_derivative(f.values(), f.grid(), order),
    };
    Ok(ScalarField { grid: *f.grid(), values })
}

/// Spectral derivatives of several orders from a single forward transform.
///
/// The Nyquist coefficient is dropped for odd orders so real input stays
/// real.
pub(crate) fn spectral_derivatives(values: &[f64], grid: &Grid1D, orders: &[u32]) -> Vec<Vec<f64>> {
    let n = grid.points();
    let (fwd, inv) = fft_pair(n);
    let mut spec: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let k = grid.wavenumbers();
    let scale = 1.0 / n as f64;
    orders
        .iter()
        .map(|&order| {
            let mut buf: Vec<Complex64> = spec
                .iter()
                .zip(&k)
                .enumerate()
                .map(|(j, (c, &kj))| {
                    if order % 2 == 1 && j == n / 2 {
                        return Complex64::new(0.0, 0.0);
                    }
                    c * Complex64::new(0.0, kj).powu(order)
                })
                .collect();
            inv.process(&mut buf);
            buf.into_iter().map(|c| c.re * scale).collect()
        })
        .collect()
}

fn central_derivative(values: &[f64], grid: &Grid1D, order: Order) -> Vec<f64> {
    let n = values.len();
    let h = grid.spacing();
    (0..n)
        .map(|j| {
            let l = values[(j + n - 1) % n];
            let r = values[(j + 1) % n];
            match order {
                Order::First => (r - l) / (2.0 * h),
                Order::Second => (r - 2.0 * values[j] + l) / (h * h),
            }
        })
        .collect()
}

/// Periodic rectangle rule `h Σ f_j`.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    check_finite(f.values())?;
    Ok(integrate_slice(f.values(), f.grid()))
}

pub(crate) fn integrate_slice(values: &[f64], grid: &Grid1D) -> f64 {
    grid.spacing() * values.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(Grid1D::new(10.0, 15).is_err());
        assert!(Grid1D::new(10.0, 8).is_err());
        assert!(Grid1D::new(-1.0, 64).is_err());
        let g = Grid1D::new(10.0, 64).unwrap();
        assert_eq!(g.spacing() * g.points() as f64, g.length());
        assert_eq!(g.node(g.origin()), 0.0);
    }

    #[test]
    fn spacing_times_points_is_exact_for_awkward_lengths() {
        for l in [0.1, 1.0 / 3.0, 7.77, 123.456] {
            let g = Grid1D::new(l, 96).unwrap();
            assert_eq!(g.spacing() * 96.0, g.length());
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let g = Grid1D::new(7.0, 64).unwrap();
        let w = 2.0 * PI / g.length();
        let f = ScalarField::from_fn(g, |q| (w * q).sin()).unwrap();
        let d = derivative(&f, Order::First, Scheme::Spectral).unwrap();
        let exact: Vec<f64> = g.nodes().iter().map(|q| w * (w * q).cos()).collect();
        assert!(max_err(d.values(), &exact) < 1e-10);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = Grid1D::new(5.0, 32).unwrap();
        let f = ScalarField::from_fn(g, |_| 3.25).unwrap();
        for scheme in [Scheme::Spectral, Scheme::Central] {
            let d = derivative(&f, Order::First, scheme).unwrap();
            assert!(d.max_abs() < 1e-14);
        }
    }

    #[test]
    fn second_derivative_of_gaussian_matches_symbolic() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let f = ScalarField::from_fn(g, |q| (-q * q / 2.0).exp()).unwrap();
        let d2 = derivative(&f, Order::Second, Scheme::Spectral).unwrap();
        let exact: Vec<f64> = g.nodes().iter().map(|q| (q * q - 1.0) * (-q * q / 2.0).exp()).collect();
        assert!(max_err(d2.values(), &exact) < 1e-8);
    }

    #[test]
    fn central_scheme_is_second_order() {
        let err = |n| {
            let g = Grid1D::new(2.0 * PI, n).unwrap();
            let f = ScalarField::from_fn(g, |q| q.sin()).unwrap();
            let d = derivative(&f, Order::Second, Scheme::Central).unwrap();
            let exact: Vec<f64> = g.nodes().iter().map(|q| -q.sin()).collect();
            max_err(d.values(), &exact)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = Grid1D::new(5.0, 32).unwrap();
        let mut v = vec![0.0; 32];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite { index: 3 })));
    }

    #[test]
    fn quadrature_examples() {
        let g = Grid1D::new(10.0, 64).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0).unwrap();
        assert!((integrate(&one).unwrap() - 10.0).abs() < 1e-12);

        let w = 2.0 * PI / g.length();
        let c = ScalarField::from_fn(g, |q| (w * q).cos()).unwrap();
        assert!(integrate(&c).unwrap().abs() < 1e-12);

        let g = Grid1D::new(40.0, 512).unwrap();
        let gauss = ScalarField::from_fn(g, |q| (-q * q / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        assert!((integrate(&gauss).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_invariants() {
        let g = Grid1D::new(20.0, 128).unwrap();
        let n = DensityField::gaussian(g, 0.0, 1.0).unwrap();
        assert!((integrate(n.as_scalar()).unwrap() - 1.0).abs() < 1e-12);
        assert!((n.variance() - 1.0).abs() < 1e-10);
        let mut v = n.values().to_vec();
        v[0] = -1e-3;
        assert!(matches!(DensityField::normalized(g, v), Err(Error::NegativeDensity { .. })));
        assert!(DensityField::new(g, vec![1.0; 128]).is_err());
    }

    #[test]
    fn wave_momentum_of_plane_wave_factor() {
        let g = Grid1D::new(40.0, 256).unwrap();
        let psi = WaveField::gaussian(g, 0.0, 1.0, 1.5).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!((psi.mean_momentum(1.0) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn interpolation_is_periodic_and_exact_on_nodes() {
        let g = Grid1D::new(4.0, 16).unwrap();
        let v: Vec<f64> = (0..16).map(|j| j as f64).collect();
        assert_eq!(g.interpolate(&v, g.node(5)), 5.0);
        assert!((g.interpolate(&v, g.node(15) + 0.5 * g.spacing()) - 7.5).abs() < 1e-12);
        assert!((g.interpolate(&v, g.node(3) + g.length()) - 3.0).abs() < 1e-12);
    }

    fn smooth_periodic(grid: Grid1D, coeffs: &[(f64, f64)]) -> ScalarField {
        let w = 2.0 * PI / grid.length();
        ScalarField::from_fn(grid, |q| {
            coeffs
                .iter()
                .enumerate()
                .map(|(m, (a, b))| {
                    let k = (m + 1) as f64 * w;
                    a * (k * q).cos() + b * (k * q).sin()
                })
                .sum::<f64>()
                .exp()
        })
        .unwrap()
    }

    proptest! {
        #[test]
        fn repeated_first_derivative_matches_second(
            coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
            length in 2.0f64..20.0,
        ) {
            let g = Grid1D::new(length, 128).unwrap();
            let f = smooth_periodic(g, &coeffs);
            let d1 = derivative(&f, Order::First, Scheme::Spectral).unwrap();
            let d11 = derivative(&d1, Order::First, Scheme::Spectral).unwrap();
            let d2 = derivative(&f, Order::Second, Scheme::Spectral).unwrap();
            let scale = 1.0f64.max(d2.max_abs());
            prop_assert!(max_err(d11.values(), d2.values()) < 1e-8 * scale);
        }

        #[test]
        fn integral_of_derivative_vanishes(
            coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
            length in 2.0f64..20.0,
        ) {
            let g = Grid1D::new(length, 128).unwrap();
            let f = smooth_periodic(g, &coeffs);
            for scheme in [Scheme::Spectral, Scheme::Central] {
                let d = derivative(&f, Order::First, scheme).unwrap();
                prop_assert!(integrate(&d).unwrap().abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn wrap_lands_in_the_domain(q in -1e4f64..1e4, length in 1.0f64..100.0) {
            let g = Grid1D::new(length, 64).unwrap();
            let w = g.wrap(q);
            prop_assert!(w >= -0.5 * g.length() && w < 0.5 * g.length());
            let turns = ((q - w) / g.length()).round();
            prop_assert!((q - w - turns * g.length()).abs() <= 1e-9 * q.abs().max(1.0));
            let d = g.min_image(q);
            prop_assert!(d.abs() <= 0.5 * g.length() * (1.0 + 1e-12));
        }
    }
}
