"""Single-photon collective emission from emitter ensembles in a coupled-resonator waveguide.

Two independent solvers: an exact finite-chain propagator
(:mod:`wgqed.propagator`) and the closed-form residue/branch-cut solution for
the infinite chain (:mod:`wgqed.analytic`).
"""
__version__ = "0.1.0"

from .analytic import (  # noqa: E402
    amplitude_single_type,
    amplitude_two_type,
    bound_state_energies_single,
    bound_state_energies_two,
    excited_amplitude,
    green_side_limit,
    lattice_green_function,
    markovian_decay_rate,
    trapping_limit,
)
from .lattice import (  # noqa: E402
    EmitterSpecies,
    SystemSpec,
    WaveguideSpec,
    build_single_excitation_hamiltonian,
    density_of_states,
    dispersion,
    group_velocity,
    initial_state,
)
from .propagator import (  # noqa: E402
    EvolveOptions,
    TimeGrid,
    evolve,
    excited_amplitude_series,
    recurrence_horizon,
    simulate,
)
