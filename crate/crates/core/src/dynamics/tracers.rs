//! Bohmian tracer particles advected by `q̇ = p/m`, `ṗ = -∇(V + V_qu)`.
//!
//! Tracers are diagnostics: they read the density, never feed back into it.
//! Forces are tabulated on the grid and interpolated linearly to tracer
//! positions; positions advance with velocity Verlet (kick-drift-kick), which
//! needs the force field at both ends of each step.

use serde::{Deserialize, Serialize};

use super::potential::PotentialSpec;
use super::propagate::SimState;
use crate::error::{Error, Result};
use crate::qpotential::{default_floor, quantum_force_with_floor, QuantumParams};
use crate::spatial::{fft_pair, DensityField, Grid1D, WaveField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracerEnsemble {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Set once a tracer has visited density below the floor; its quantum
    /// force is unreliable from then on.
    pub flagged: Vec<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// At the density quantiles `(i + ½)/M`.
    #[default]
    Quantiles,
    /// Evenly over `[from, to]`.
    Uniform {
        from: f64,
        to: f64,
    },
    Positions(Vec<f64>),
}

impl TracerEnsemble {
    pub fn new(positions: Vec<f64>, momenta: Vec<f64>) -> Result<Self> {
        if positions.len() != momenta.len() {
            return Err(Error::param("tracers", "positions and momenta differ in length"));
        }
        if positions.iter().chain(&momenta).any(|v| !v.is_finite()) {
            return Err(Error::param("tracers", "non-finite tracer coordinate"));
        }
        let flagged = vec![false; positions.len()];
        Ok(TracerEnsemble { positions, momenta, flagged })
    }

    pub fn at_rest(positions: Vec<f64>) -> Result<Self> {
        let m = vec![0.0; positions.len()];
        Self::new(positions, m)
    }

    /// Places `count` tracers and gives each the local Bohm momentum of `psi`.
    pub fn place(psi: &WaveField, count: usize, placement: &Placement, qp: &QuantumParams) -> Result<Self> {
        let grid = psi.grid();
        let positions: Vec<f64> = match placement {
            Placement::Quantiles => density_quantiles(&psi.density(), count),
            Placement::Uniform { from, to } => (0..count)
                .map(
                    |i| if count == 1 { 0.5 * (from + to) } else { from + (to - from) * i as f64 / (count - 1) as f64 },
                )
                .collect(),
            Placement::Positions(p) => p.clone(),
        };
        let positions: Vec<f64> = positions.into_iter().map(|q| grid.wrap(q)).collect();
        let field = bohm_momentum(psi, qp);
        let momenta = positions.iter().map(|q| grid.interpolate(&field, *q)).collect();
        Self::new(positions, momenta)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.flagged.iter().enumerate().filter(|(_, f)| !**f).map(|(i, _)| i)
    }
}

fn density_quantiles(n: &DensityField, count: usize) -> Vec<f64> {
    let g = n.grid();
    let h = g.spacing();
    let mut out = Vec::with_capacity(count);
    let mut cum = 0.0;
    let mut target = 0;
    for (j, v) in n.values().iter().enumerate() {
        let next = cum + v * h;
        while target < count {
            let want = (target as f64 + 0.5) / count as f64;
            if want > next {
                break;
            }
            let w = if next > cum { (want - cum) / (next - cum) } else { 0.0 };
            out.push(g.node(j) - 0.5 * h + w * h);
            target += 1;
        }
        cum = next;
    }
    while out.len() < count {
        out.push(g.node(g.points() - 1));
    }
    out
}

/// Momentum field `ħ Im(ψ' / ψ)`; zero where `|ψ|²` is below the floor.
pub fn bohm_momentum(psi: &WaveField, qp: &QuantumParams) -> Vec<f64> {
    let grid = psi.grid();
    let n = grid.points();
    let (fwd, inv) = fft_pair(n);
    let mut buf = psi.values().to_vec();
    fwd.process(&mut buf);
    let k = grid.wavenumbers();
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= if j == n / 2 {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            num_complex::Complex64::new(0.0, k[j] / n as f64)
        };
    }
    inv.process(&mut buf);
    let max = psi.values().iter().fold(0.0, |m: f64, z| m.max(z.norm_sqr()));
    let floor = crate::qpotential::RELATIVE_FLOOR * max;
    psi.values()
        .iter()
        .zip(&buf)
        .map(|(z, d)| {
            let r2 = z.norm_sqr();
            if r2 > floor {
                qp.hbar * (z.conj() * d).im / r2
            } else {
                0.0
            }
        })
        .collect()
}

/// Tabulates the total force on tracers.
#[derive(Clone, Debug)]
pub struct ForceModel {
    grid: Grid1D,
    external: Vec<f64>,
    qp: QuantumParams,
    include_quantum: bool,
}

impl ForceModel {
    pub fn new(grid: Grid1D, spec: &PotentialSpec, qp: &QuantumParams) -> Self {
        ForceModel { grid, external: spec.force_field(&grid, qp.mass), qp: *qp, include_quantum: true }
    }

    /// Drops `-∇V_qu`, leaving only the external force.
    pub fn without_quantum_force(mut self) -> Self {
        self.include_quantum = false;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.qp.mass
    }

    pub fn external(&self) -> &[f64] {
        &self.external
    }

    /// Total force field for density `n` (ignored without the quantum term).
    pub fn field(&self, n: Option<&DensityField>) -> Result<Vec<f64>> {
        match (self.include_quantum, n) {
            (true, Some(n)) => {
                let fq = quantum_force_with_floor(n, &self.qp, default_floor(n))?;
                Ok(self.external.iter().zip(fq.values()).map(|(a, b)| a + b).collect())
            }
            (true, None) => Err(Error::param("density", "quantum force needs a density")),
            (false, _) => Ok(self.external.clone()),
        }
    }
}

/// One velocity-Verlet step in a force field that moves from `force_now` to
/// `force_next` over the step. Applies `extra_kick[i]` to the momentum of
/// tracer `i` at the midpoint when given.
pub fn verlet_step(
    ensemble: &mut TracerEnsemble,
    grid: &Grid1D,
    mass: f64,
    force_now: &[f64],
    force_next: &[f64],
    dt: f64,
    extra_kick: Option<&[f64]>,
) {
    for i in 0..ensemble.len() {
        let mut p = ensemble.momenta[i] + 0.5 * dt * grid.interpolate(force_now, ensemble.positions[i]);
        if let Some(k) = extra_kick {
            p += k[i];
        }
        let q = grid.wrap(ensemble.positions[i] + dt * p / mass);
        p += 0.5 * dt * grid.interpolate(force_next, q);
        ensemble.positions[i] = q;
        ensemble.momenta[i] = p;
    }
}

/// Flags tracers sitting where `n` is below its floor.
pub fn flag_low_density(ensemble: &mut TracerEnsemble, n: &DensityField) {
    let floor = default_floor(n);
    let g = n.grid();
    for i in 0..ensemble.len() {
        if g.interpolate(n.values(), ensemble.positions[i]) < floor {
            ensemble.flagged[i] = true;
        }
    }
}

/// Incremental tracer advance alongside a running simulation.
pub struct TracerTracker {
    model: ForceModel,
    force_now: Vec<f64>,
    pub ensemble: TracerEnsemble,
}

impl TracerTracker {
    pub fn new(model: ForceModel, ensemble: TracerEnsemble, initial: &DensityField) -> Result<Self> {
        let force_now = model.field(Some(initial))?;
        let mut ensemble = ensemble;
        flag_low_density(&mut ensemble, initial);
        Ok(TracerTracker { model, force_now, ensemble })
    }

    pub fn model(&self) -> &ForceModel {
        &self.model
    }

    /// Force field at the current time (as last evaluated).
    pub fn current_force(&self) -> &[f64] {
        &self.force_now
    }

    /// Advances by `dt` given the density at the end of the step.
    pub fn advance(&mut self, next: &DensityField, dt: f64) -> Result<()> {
        let force_next = self.model.field(Some(next))?;
        verlet_step(&mut self.ensemble, self.model.grid(), self.model.mass(), &self.force_now, &force_next, dt, None);
        flag_low_density(&mut self.ensemble, next);
        self.force_now = force_next;
        Ok(())
    }
}

/// Tracer snapshots aligned with `states` (which must be `dt` apart); the
/// first snapshot is `ensemble` itself.
pub fn trace_trajectories(
    states: &[SimState],
    ensemble: &TracerEnsemble,
    qp: &QuantumParams,
    v: &PotentialSpec,
    dt: f64,
) -> Result<Vec<TracerEnsemble>> {
    let first = states.first().ok_or(Error::param("states", "need at least one state"))?;
    let grid = *first.psi.grid();
    let mut tracker = TracerTracker::new(ForceModel::new(grid, v, qp), ensemble.clone(), &first.psi.density())?;
    let mut out = vec![tracker.ensemble.clone()];
    for s in &states[1..] {
        tracker.advance(&s.psi.density(), dt)?;
        out.push(tracker.ensemble.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{relax_ground_state, stability_bound, RelaxOptions, Stepper};

    fn run_states(grid: Grid1D, spec: &PotentialSpec, psi: WaveField, dt: f64, steps: usize) -> Vec<SimState> {
        let qp = QuantumParams::default();
        let mut stepper = Stepper::new(grid, spec, &qp, dt).unwrap();
        let mut s = SimState::new(psi);
        let mut out = vec![s.clone()];
        for _ in 0..steps {
            stepper.step_deterministic(&mut s);
            out.push(s.clone());
        }
        out
    }

    #[test]
    fn ground_state_tracer_at_centre_stays_put() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        let spec = PotentialSpec::Harmonic { omega: 1.0 };
        let psi = relax_ground_state(&spec, &qp, &g, &RelaxOptions::default()).unwrap();
        let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
        let states = run_states(g, &spec, psi, dt, 2000);
        let e = TracerEnsemble::at_rest(vec![0.0]).unwrap();
        let series = trace_trajectories(&states, &e, &qp, &spec, dt).unwrap();
        for snap in &series {
            assert!(snap.positions[0].abs() < 1e-8);
        }
    }

    #[test]
    fn free_packet_tracer_is_pushed_outward() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let qp = QuantumParams::default();
        let psi = WaveField::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        let dt = stability_bound(&g, &[0.0], &qp);
        let states = run_states(g, &PotentialSpec::Free, psi, dt, 500);
        let e = TracerEnsemble::at_rest(vec![1.0]).unwrap();
        let series = trace_trajectories(&states, &e, &qp, &PotentialSpec::Free, dt).unwrap();
        let last = series.last().unwrap();
        assert!(last.momenta[0] > 0.0);
        assert!(last.positions[0] > 1.0);
        // Early acceleration matches the Gaussian quantum force q / 4σ⁴.
        let p1 = series[1].momenta[0];
        assert!((p1 / dt - 0.25).abs() < 1e-3, "{}", p1 / dt);
    }

    #[test]
    fn coherent_state_tracer_follows_classical_orbit() {
        let g = Grid1D::new(20.0, 256).unwrap();
        let qp = QuantumParams::default();
        let spec = PotentialSpec::Harmonic { omega: 1.0 };
        let amp = 2.0;
        let psi = WaveField::gaussian(g, amp, 0.5f64.sqrt(), 0.0).unwrap();
        let dt = stability_bound(&g, &spec.sample(&g, 1.0), &qp);
        let steps = (2.0 * std::f64::consts::PI / dt).round() as usize;
        let states = run_states(g, &spec, psi.clone(), dt, steps);
        let e = TracerEnsemble::place(&psi, 1, &Placement::Positions(vec![amp]), &qp).unwrap();
        let series = trace_trajectories(&states, &e, &qp, &spec, dt).unwrap();
        for (k, snap) in series.iter().enumerate() {
            let t = k as f64 * dt;
            assert!((snap.positions[0] - amp * t.cos()).abs() < 1e-3 * amp, "t {t}");
        }
    }

    #[test]
    fn bohm_momentum_of_moving_packet() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let psi = WaveField::gaussian(g, 0.0, 1.0, 1.25).unwrap();
        let p = bohm_momentum(&psi, &QuantumParams::new(2.0, 1.0).unwrap());
        let mid = g.points() / 2;
        assert!(p[mid - 40..mid + 40].iter().all(|v| (v - 2.5).abs() < 1e-9));
    }

    #[test]
    fn quantile_placement_is_symmetric() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let psi = WaveField::gaussian(g, 0.0, 1.0, 0.0).unwrap();
        let e = TracerEnsemble::place(&psi, 4, &Placement::Quantiles, &QuantumParams::default()).unwrap();
        assert!((e.positions[0] + e.positions[3]).abs() < 1e-2);
        assert!((e.positions[1] + e.positions[2]).abs() < 1e-2);
        assert!(e.positions[0] < e.positions[1]);
    }

    #[test]
    fn tracers_in_empty_regions_are_flagged() {
        let g = Grid1D::new(40.0, 512).unwrap();
        let qp = QuantumParams::default();
        let psi = WaveField::gaussian(g, 0.0, 0.5, 0.0).unwrap();
        let dt = stability_bound(&g, &[0.0], &qp);
        let states = run_states(g, &PotentialSpec::Free, psi, dt, 3);
        let e = TracerEnsemble::at_rest(vec![0.0, 15.0]).unwrap();
        let series = trace_trajectories(&states, &e, &qp, &PotentialSpec::Free, dt).unwrap();
        let last = series.last().unwrap();
        assert_eq!(last.flagged, vec![false, true]);
        assert_eq!(last.active().collect::<Vec<_>>(), vec![0]);
    }
}
