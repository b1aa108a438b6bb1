//! Time evolution: the wavefunction stepper and Bohmian tracers.

mod potential;
mod propagate;
mod tracers;

pub use potential::PotentialSpec;
pub use propagate::{
    apply_density_kick, energy, kinetic_energy, potential_energy, relax_ground_state, stability_bound,
    step_deterministic, step_stochastic, RelaxOptions, SimState, SplitStep, Stepper, MAX_CLIP_FRACTION,
};
pub use tracers::{
    bohm_momentum, flag_low_density, trace_trajectories, verlet_step, ForceModel, Placement, TracerEnsemble,
    TracerTracker,
};
