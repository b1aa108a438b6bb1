//! Spatially correlated, time-white density noise.
//!
//! Fields are synthesized spectrally on the periodic grid: the circulant
//! covariance built from the Gaussian kernel is diagonal in Fourier space, so
//! a white complex spectrum scaled by the square root of its eigenvalues and
//! transformed back has exactly the wrapped kernel as covariance. The mean
//! (k = 0) mode is removed, which makes every field integrate to zero and
//! lowers the whole covariance by the constant [`projection_offset`].

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::Fft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qpotential::QuantumParams;
use crate::spatial::{fft_pair, Grid1D, ScalarField};

pub const MIN_VALIDATION_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Noise amplitude Θ (temperature units).
    pub theta: f64,
    /// Boltzmann constant.
    #[serde(rename = "k")]
    pub boltzmann: f64,
    /// Density mobility μ̃.
    pub mobility: f64,
    /// Order-unity prefactor of the correlation length.
    #[serde(rename = "f")]
    pub correlation_factor: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { theta: 0.0, boltzmann: 1.0, mobility: 1.0, correlation_factor: 1.0, mass: 1.0, hbar: 1.0 }
    }
}

impl NoiseParams {
    pub fn new(theta: f64, qp: &QuantumParams) -> Self {
        NoiseParams { theta, mass: qp.mass, hbar: qp.hbar, ..Default::default() }
    }

    pub fn with_mobility(mut self, mobility: f64) -> Self {
        self.mobility = mobility;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::param("theta", format!("must be finite and >= 0, got {}", self.theta)));
        }
        for (name, v) in [
            ("k", self.boltzmann),
            ("mobility", self.mobility),
            ("f", self.correlation_factor),
            ("mass", self.mass),
            ("hbar", self.hbar),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `C(0) = kΘμ̃ / (2 λ_c²)`.
    pub fn variance_prefactor(&self, lambda_c: f64) -> f64 {
        self.boltzmann * self.theta * self.mobility / (2.0 * lambda_c * lambda_c)
    }

    /// Equal-time covariance of the noise at separation `delta`.
    pub fn kernel(&self, lambda_c: f64, delta: f64) -> f64 {
        let x = delta / lambda_c;
        self.variance_prefactor(lambda_c) * (-x * x).exp()
    }
}

/// `λ_c = f ħ / sqrt(2 m k Θ)`.
pub fn correlation_length(p: &NoiseParams) -> Result<f64> {
    p.validate()?;
    if p.theta == 0.0 {
        return Err(Error::InfiniteCorrelation);
    }
    Ok(p.correlation_factor * p.hbar / (2.0 * p.mass * p.boltzmann * p.theta).sqrt())
}

/// The constant by which zero-mean projection lowers the covariance at every
/// lag: the mean of the wrapped kernel over the grid.
pub fn projection_offset(grid: &Grid1D, p: &NoiseParams, lambda_c: f64) -> f64 {
    let n = grid.points();
    (0..n).map(|j| p.kernel(lambda_c, grid.min_image(j as f64 * grid.spacing()))).sum::<f64>() / n as f64
}

/// Where a field came from in the seed-stream address space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseOrigin {
    pub seed: u64,
    pub member: u64,
    pub step: u64,
}

/// One spatial realization of the equal-time noise.
///
/// `values` carry the kernel covariance. The density source of the
/// Euler–Maruyama update is `values / sqrt(dt)`, so the increment over one
/// step is `values * sqrt(dt)`.
#[derive(Clone, Debug)]
pub struct NoiseField {
    field: ScalarField,
    params: NoiseParams,
    lambda_c: Option<f64>,
    dt: f64,
    origin: Option<NoiseOrigin>,
}

impl NoiseField {
    pub fn grid(&self) -> &Grid1D {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn as_scalar(&self) -> &ScalarField {
        &self.field
    }

    pub fn params(&self) -> &NoiseParams {
        &self.params
    }

    /// `None` at Θ = 0.
    pub fn lambda_c(&self) -> Option<f64> {
        self.lambda_c
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin(&self) -> Option<NoiseOrigin> {
        self.origin
    }

    pub fn with_origin(mut self, origin: NoiseOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    /// The rate field `Y / sqrt(dt)` entering the continuity equation.
    pub fn source(&self) -> Vec<f64> {
        let s = 1.0 / self.dt.sqrt();
        self.values().iter().map(|v| v * s).collect()
    }

    /// Density increment over one step, `source * dt`.
    pub fn increment(&self) -> Vec<f64> {
        let s = self.dt.sqrt();
        self.values().iter().map(|v| v * s).collect()
    }
}

/// Precomputed spectral filter for repeated draws on one grid.
#[derive(Clone)]
pub struct NoiseSynth {
    grid: Grid1D,
    params: NoiseParams,
    lambda_c: Option<f64>,
    /// `sqrt(eigenvalue / N)` per Fourier mode; `None` at Θ = 0.
    filter: Option<Vec<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NoiseSynth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseSynth")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("lambda_c", &self.lambda_c)
            .finish()
    }
}

impl NoiseSynth {
    pub fn new(grid: Grid1D, params: NoiseParams) -> Result<Self> {
        params.validate()?;
        let (forward, inverse) = fft_pair(grid.points());
        if params.theta == 0.0 {
            return Ok(NoiseSynth { grid, params, lambda_c: None, filter: None, inverse });
        }
        let lambda_c = correlation_length(&params)?;
        if lambda_c < 2.0 * grid.spacing() {
            return Err(Error::UnresolvedCorrelation { lambda_c, spacing: grid.spacing() });
        }
        let n = grid.points();
        let mut spectrum: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(params.kernel(lambda_c, grid.min_image(j as f64 * grid.spacing())), 0.0))
            .collect();
        forward.process(&mut spectrum);
        let mut filter: Vec<f64> = spectrum.iter().map(|c| (c.re.max(0.0) / n as f64).sqrt()).collect();
        filter[0] = 0.0;
        Ok(NoiseSynth { grid, params, lambda_c: Some(lambda_c), filter: Some(filter), inverse })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn params(&self) -> &NoiseParams {
        &self.params
    }

    pub fn lambda_c(&self) -> Option<f64> {
        self.lambda_c
    }

    pub fn is_silent(&self) -> bool {
        self.filter.is_none()
    }

    /// Draws one zero-mean realization.
    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<NoiseField> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let values = match &self.filter {
            None => vec![0.0; self.grid.points()],
            Some(filter) => {
                let mut buf: Vec<Complex64> = filter
                    .iter()
                    .map(|a| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(a * re, a * im)
                    })
                    .collect();
                self.inverse.process(&mut buf);
                let mut v: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
                v
            }
        };
        Ok(NoiseField {
            field: ScalarField::new(self.grid, values)?,
            params: self.params,
            lambda_c: self.lambda_c,
            dt,
            origin: None,
        })
    }
}

/// Draws one noise field; see [`NoiseSynth`] for repeated draws.
pub fn sample_noise<R: Rng + ?Sized>(grid: &Grid1D, p: &NoiseParams, dt: f64, rng: &mut R) -> Result<NoiseField> {
    NoiseSynth::new(*grid, *p)?.sample(dt, rng)
}

/// Empirical equal-time covariance against the kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub samples: usize,
    /// Lags `m h` for `m = 0..=N/2`.
    pub lags: Vec<f64>,
    /// Sample covariance of the projected fields.
    pub empirical: Vec<f64>,
    /// Standard error of `empirical` across samples.
    pub stderr: Vec<f64>,
    /// The unprojected kernel.
    pub theoretical: Vec<f64>,
    /// Added to `empirical` before comparing with `theoretical`.
    pub projection_offset: f64,
    pub nominal_lambda_c: Option<f64>,
    pub fitted_lambda_c: Option<f64>,
    /// `max_m |empirical + offset - theoretical|`.
    pub max_abs_deviation: f64,
}

impl CovarianceReport {
    /// Empirical covariance with the projection offset added back.
    pub fn corrected(&self) -> Vec<f64> {
        self.empirical.iter().map(|c| c + self.projection_offset).collect()
    }

    /// Corrected covariance and its standard error, interpolated at `delta`.
    pub fn at(&self, delta: f64) -> (f64, f64) {
        let h = self.lags[1] - self.lags[0];
        let s = delta / h;
        let j = (s.floor() as usize).min(self.lags.len() - 2);
        let w = s - j as f64;
        let c = self.corrected();
        ((1.0 - w) * c[j] + w * c[j + 1], (1.0 - w) * self.stderr[j] + w * self.stderr[j + 1])
    }

    pub fn relative_error_at(&self, p: &NoiseParams, delta: f64) -> Option<f64> {
        let lc = self.nominal_lambda_c?;
        let expected = p.kernel(lc, delta);
        Some((self.at(delta).0 - expected).abs() / expected)
    }
}

/// Streaming accumulator behind [`validate_noise`].
///
/// Accumulators built over fixed index ranges and merged in index order give
/// the same result whatever the thread count.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator {
    grid: Grid1D,
    params: Option<NoiseParams>,
    lambda_c: Option<f64>,
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(grid: Grid1D) -> Self {
        let lags = grid.points() / 2 + 1;
        CovarianceAccumulator {
            grid,
            params: None,
            lambda_c: None,
            count: 0,
            sum: vec![0.0; lags],
            sum_sq: vec![0.0; lags],
        }
    }

    pub fn push(&mut self, y: &NoiseField) -> Result<()> {
        if !self.grid.same_as(y.grid()) {
            return Err(Error::GridMismatch);
        }
        match self.params {
            None => {
                self.params = Some(*y.params());
                self.lambda_c = y.lambda_c();
            }
            Some(p) if p != *y.params() => {
                return Err(Error::param("samples", "noise parameters differ between samples"));
            }
            _ => {}
        }
        let c = circular_autocovariance(y.values());
        for (m, v) in c.into_iter().take(self.sum.len()).enumerate() {
            self.sum[m] += v;
            self.sum_sq[m] += v * v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if other.count == 0 {
            return Ok(());
        }
        match (self.params, other.params) {
            (None, p) => {
                self.params = p;
                self.lambda_c = other.lambda_c;
            }
            (Some(a), Some(b)) if a != b => {
                return Err(Error::param("samples", "noise parameters differ between samples"));
            }
            _ => {}
        }
        for m in 0..self.sum.len() {
            self.sum[m] += other.sum[m];
            self.sum_sq[m] += other.sum_sq[m];
        }
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<CovarianceReport> {
        if self.count < MIN_VALIDATION_SAMPLES {
            return Err(Error::InsufficientSamples { need: MIN_VALIDATION_SAMPLES, got: self.count });
        }
        let s = self.count as f64;
        let h = self.grid.spacing();
        let lags: Vec<f64> = (0..self.sum.len()).map(|m| m as f64 * h).collect();
        let empirical: Vec<f64> = self.sum.iter().map(|v| v / s).collect();
        let stderr: Vec<f64> = self
            .sum_sq
            .iter()
            .zip(&empirical)
            .map(|(sq, mean)| ((sq / s - mean * mean).max(0.0) / (s - 1.0)).sqrt())
            .collect();
        let params = self.params.unwrap_or_default();
        let (theoretical, offset) = match self.lambda_c {
            Some(lc) => {
                (lags.iter().map(|d| params.kernel(lc, *d)).collect(), projection_offset(&self.grid, &params, lc))
            }
            None => (vec![0.0; lags.len()], 0.0),
        };
        let corrected: Vec<f64> = empirical.iter().map(|c| c + offset).collect();
        let max_abs_deviation = corrected.iter().zip(&theoretical).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let fitted_lambda_c = self.lambda_c.and_then(|lc| fit_correlation_length(&lags, &corrected, lc));
        Ok(CovarianceReport {
            samples: self.count,
            lags,
            empirical,
            stderr,
            theoretical,
            projection_offset: offset,
            nominal_lambda_c: self.lambda_c,
            fitted_lambda_c,
            max_abs_deviation,
        })
    }
}

/// `(1/N) Σ_j y_j y_{j+m}` for every lag, through the spectrum.
fn circular_autocovariance(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let (fwd, inv) = fft_pair(n);
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
    inv.process(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Least-squares fit of `ln C(δ) = a - δ²/λ²` over `δ <= 2 λ_nominal`.
fn fit_correlation_length(lags: &[f64], cov: &[f64], nominal: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        lags.iter().zip(cov).filter(|(d, c)| **d <= 2.0 * nominal && **c > 0.0).map(|(d, c)| (d * d, c.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let slope = linear_slope(&pts);
    (slope < 0.0).then(|| (-1.0 / slope).sqrt())
}

pub(crate) fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Covariance statistics of a sample set.
pub fn validate_noise(samples: &[NoiseField]) -> Result<CovarianceReport> {
    let first = samples.first().ok_or(Error::InsufficientSamples { need: MIN_VALIDATION_SAMPLES, got: 0 })?;
    let mut acc = CovarianceAccumulator::new(*first.grid());
    for y in samples {
        acc.push(y)?;
    }
    acc.finish()
}

/// Draws `count` fields from `seed` (member = sample index, step 0) and
/// accumulates their covariance in parallel, merging in index order.
pub fn sample_covariance(grid: &Grid1D, p: &NoiseParams, count: usize, seed: u64) -> Result<CovarianceReport> {
    const CHUNK: usize = 64;
    let synth = NoiseSynth::new(*grid, *p)?;
    let stream = crate::rng::SeedStream::new(seed);
    let chunks: Vec<Result<CovarianceAccumulator>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = CovarianceAccumulator::new(*grid);
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let mut rng = stream.rng(i as u64, 0);
                acc.push(&synth.sample(1.0, &mut rng)?)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = CovarianceAccumulator::new(*grid);
    for acc in chunks {
        total.merge(&acc?)?;
    }
    total.finish()
}
