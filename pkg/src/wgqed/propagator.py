"""Exact finite-chain time evolution of the single-excitation sector.

Amplitudes are reported in the frame rotating at the band centre
``omega_c``: multiply by ``exp(-1j * omega_c * t)`` for the lab frame.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from ._kernels import Stepper
from .errors import HorizonError, IntegratorError, SymmetryViolationError
from .lattice import build_single_excitation_hamiltonian, initial_state


@dataclass(frozen=True)
class TimeGrid:
    """``num_samples`` equally spaced times on ``[t_start, t_end]``.

    ``dt_internal=None`` lets the integrator pick its own step.
    """

    t_start: float
    t_end: float
    num_samples: int
    dt_internal: float = None

    def __post_init__(self):
        if not self.t_end > self.t_start >= 0:
            raise ValueError(f"need t_end > t_start >= 0, got [{self.t_start}, {self.t_end}]")
        if self.num_samples < 2:
            raise ValueError("num_samples must be >= 2")
        if self.dt_internal is not None and not self.dt_internal > 0:
            raise ValueError("dt_internal must be positive")

    @property
    def times(self):
        return np.linspace(self.t_start, self.t_end, self.num_samples)

    @property
    def spacing(self):
        return (self.t_end - self.t_start) / (self.num_samples - 1)


@dataclass(frozen=True)
class EvolveOptions:
    backend: str = "rk4"          # "rk4" or "chebyshev"
    dt_factor: float = 0.05       # dt = dt_factor / spectral-radius bound
    norm_tol: float = 1e-8        # allowed drift per unit time 1/(2J)
    allow_reflections: bool = False
    store_photons: bool = False
    symmetry_tol: float = 1e-10


@dataclass
class Trajectory:
    times: np.ndarray
    emitter_amps: np.ndarray            # (samples, num_emitters)
    excited_amp: dict                   # label -> complex series
    unexcited_amp: dict                 # label -> complex series (absent if no such emitters)
    norm_series: np.ndarray
    spread_metrics: np.ndarray
    photon_site_amps: np.ndarray = None
    frame_energy: float = 0.0
    dt_internal: float = None
    norm_tol: float = None
    symmetry_tol: float = 1e-10
    meta: dict = field(default_factory=dict)

    def lab_frame(self, series):
        return series * np.exp(-1j * self.frame_energy * self.times)


def recurrence_horizon(system, safety=0.9):
    """Time before the fastest wavefront (speed 2J) returns from the nearer wall."""
    wg = system.waveguide
    distance = min(wg.coupling_site, wg.num_sites - 1 - wg.coupling_site)
    return safety * 2 * distance / (2 * wg.hopping_J)


def step_bound(H):
    """Cheap bound on the spectral radius of ``H - omega_c``.

    ``max|diag - omega_c| + 2J + sqrt(sum_i M_i V_i^2)``: the three terms bound
    the diagonal, the chain hopping and the emitter star separately.
    """
    system = H.system
    wc = system.waveguide.omega_c
    diag = max(abs(s.omega_Omega - wc) for s in system.species)
    star = np.sqrt(sum(s.total_M * s.coupling_V ** 2 for s in system.species))
    return diag + 2 * system.waveguide.hopping_J + star


def _role_groups(layout, psi0, system):
    """Emitter index groups that share an amplitude by permutation symmetry."""
    excited, unexcited = {}, {}
    amps = psi0[:layout.num_emitters]
    for s in system.species:
        idx = np.arange(layout.slices[s.label].start, layout.slices[s.label].stop)
        on = idx[np.abs(amps[idx]) > 0]
        off = idx[np.abs(amps[idx]) == 0]
        if on.size:
            excited[s.label] = on
        if off.size:
            unexcited[s.label] = off
    return excited, unexcited


def _chebyshev_coeffs(tau, tol=1e-16):
    # exp(-i x tau) = sum_k (2 - delta_k0) (-i)^k J_k(tau) T_k(x)
    kmax = int(tau + 10 * tau ** (1 / 3) + 30)
    k = np.arange(kmax + 1)
    bessel = jv(k, tau)
    tail = np.nonzero(np.abs(bessel) > tol)[0]
    kmax = max(int(tail[-1]) + 2, 2) if tail.size else 2
    k = k[:kmax + 1]
    c = (2.0 - (k == 0)) * (-1j) ** k * bessel[:kmax + 1]
    return c


def evolve(H, psi0, grid, opts=None):
    """Propagate `psi0` under `H` and sample the emitter amplitudes on `grid`.

    Parameters
    ----------
    H : HamiltonianMatrix
    psi0 : StateVector
        Normalised initial state.
    grid : TimeGrid
    opts : EvolveOptions, optional

    Returns
    -------
    Trajectory
        Amplitudes in the frame rotating at ``omega_c``.

    Raises
    ------
    HorizonError
        ``grid.t_end`` exceeds :func:`recurrence_horizon` and reflections
        were not allowed.
    IntegratorError
        Norm drift exceeded ten times the declared tolerance.
    """
    opts = opts or EvolveOptions()
    system = H.system
    layout = H.layout
    wg = system.waveguide
    horizon = recurrence_horizon(system)
    if grid.t_end > horizon and not opts.allow_reflections:
        raise HorizonError(
            f"t_end={grid.t_end:g} exceeds the recurrence horizon {horizon:g}; "
            f"enlarge the chain (num_sites={wg.num_sites}) or allow reflections")

    psi = np.array(psi0.as_array(), dtype=complex)
    if abs(np.vdot(psi, psi).real - 1) > 1e-12:
        raise ValueError("initial state is not normalised")

    shifted = H.matrix - wg.omega_c * sp.identity(H.matrix.shape[0], dtype=complex, format="csr")
    rho = step_bound(H)
    h = grid.spacing
    dt_max = grid.dt_internal or opts.dt_factor / rho
    substeps = max(1, int(np.ceil(h / dt_max - 1e-12)))
    dt = h / substeps

    if opts.backend == "rk4":
        stepper = Stepper(shifted)

        def advance(vec, duration):
            n = max(1, int(np.ceil(duration / dt_max - 1e-12)))
            return stepper.rk4(vec, duration / n, n)

        def advance_sample(vec):
            return stepper.rk4(vec, dt, substeps)
    elif opts.backend == "chebyshev":
        half_width = rho * 1.01
        stepper = Stepper(shifted / half_width)
        coeff_cache = {}

        def advance(vec, duration):
            key = float(duration)
            if key not in coeff_cache:
                coeff_cache[key] = _chebyshev_coeffs(half_width * duration)
            vec[:] = stepper.chebyshev(vec, coeff_cache[key])
            return vec

        def advance_sample(vec):
            return advance(vec, h)

        dt = h
    else:
        raise ValueError(f"unknown backend {opts.backend!r}")

    times = grid.times
    ns = times.size
    ne = layout.num_emitters
    emitters = np.empty((ns, ne), dtype=complex)
    norms = np.empty(ns)
    photons = np.empty((ns, layout.num_sites), dtype=complex) if opts.store_photons else None

    if grid.t_start > 0:
        advance(psi, grid.t_start)
    two_j = 2 * wg.hopping_J
    for i in range(ns):
        if i:
            advance_sample(psi)
        emitters[i] = psi[:ne]
        norms[i] = np.vdot(psi, psi).real
        if photons is not None:
            photons[i] = psi[ne:]
        allowed = 10 * opts.norm_tol * max(times[i] * two_j, 1.0)
        if abs(norms[i] - 1) > allowed:
            raise IntegratorError(
                f"norm drift {abs(norms[i] - 1):.3e} at t={times[i]:g} exceeds {allowed:.3e}")

    excited_idx, unexcited_idx = _role_groups(layout, psi0.as_array(), system)
    spread = np.zeros(ns)
    for groups in (excited_idx, unexcited_idx):
        for idx in groups.values():
            block = emitters[:, idx]
            spread = np.maximum(spread, np.max(np.abs(block - block[:, :1]), axis=1))

    return Trajectory(
        times=times,
        emitter_amps=emitters,
        excited_amp={k: emitters[:, v[0]].copy() for k, v in excited_idx.items()},
        unexcited_amp={k: emitters[:, v[0]].copy() for k, v in unexcited_idx.items()},
        norm_series=norms,
        spread_metrics=spread,
        photon_site_amps=photons,
        frame_energy=wg.omega_c,
        dt_internal=dt,
        norm_tol=opts.norm_tol,
        symmetry_tol=opts.symmetry_tol,
        meta={"backend": opts.backend, "substeps": substeps if opts.backend == "rk4" else 1,
              "spectral_bound": rho, "horizon": horizon},
    )


def excited_amplitude_series(traj, label):
    """Common amplitude of the initially excited emitters of species `label`.

    Raises
    ------
    KeyError
        Species `label` had no excited emitters.
    SymmetryViolationError
        Same-role emitters disagree by more than the trajectory's tolerance.
    """
    if label not in traj.excited_amp:
        raise KeyError(f"species {label!r} has no initially excited emitters")
    worst = float(np.max(traj.spread_metrics))
    if worst > traj.symmetry_tol:
        raise SymmetryViolationError(
            f"same-role emitter amplitudes differ by {worst:.3e} > {traj.symmetry_tol:.1e}")
    return traj.excited_amp[label]


def simulate(system, grid, opts=None):
    """Build the Hamiltonian and initial state for `system` and evolve."""
    return evolve(build_single_excitation_hamiltonian(system), initial_state(system), grid, opts)
