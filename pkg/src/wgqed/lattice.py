"""Coupled-resonator waveguide with point-like emitter ensembles.

Energies are in raw units with hbar = 1. The chain has open ends; every
emitter couples to the single resonator at ``coupling_site``.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import InitialStateError, OutOfBandError


@dataclass(frozen=True)
class WaveguideSpec:
    """Tight-binding chain: band centre ``omega_c``, hopping ``hopping_J``.

    ``coupling_site`` defaults to the central site ``num_sites // 2``.
    """

    omega_c: float = 0.0
    hopping_J: float = 0.5
    num_sites: int = 2001
    coupling_site: int = None

    def __post_init__(self):
        if not self.hopping_J > 0:
            raise ValueError(f"hopping_J must be positive, got {self.hopping_J}")
        if int(self.num_sites) != self.num_sites or self.num_sites < 3:
            raise ValueError(f"num_sites must be an integer >= 3, got {self.num_sites}")
        if self.coupling_site is None:
            object.__setattr__(self, "coupling_site", int(self.num_sites) // 2)
        if not 0 <= self.coupling_site < self.num_sites:
            raise ValueError(
                f"coupling_site {self.coupling_site} outside [0, {self.num_sites})")

    @property
    def band(self):
        """``(lower, upper)`` edges of the scattering band."""
        return (self.omega_c - 2 * self.hopping_J, self.omega_c + 2 * self.hopping_J)


@dataclass(frozen=True)
class EmitterSpecies:
    """``total_M`` identical two-level emitters, ``excited_m`` of them excited at t=0."""

    label: str
    omega_Omega: float
    coupling_V: float
    total_M: int
    excited_m: int = 0

    def __post_init__(self):
        if self.total_M < 1:
            raise ValueError(f"species {self.label}: total_M must be >= 1")
        if not 0 <= self.excited_m <= self.total_M:
            raise ValueError(
                f"species {self.label}: excited_m={self.excited_m} "
                f"outside [0, total_M={self.total_M}]")
        if self.coupling_V < 0:
            raise ValueError(f"species {self.label}: coupling_V must be >= 0")


@dataclass(frozen=True)
class SystemSpec:
    waveguide: WaveguideSpec
    species: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        if not 1 <= len(self.species) <= 2:
            raise ValueError("one or two emitter species are supported")
        labels = [s.label for s in self.species]
        if len(set(labels)) != len(labels):
            raise ValueError(f"species labels must be unique, got {labels}")
        for s in self.species:
            if not np.isfinite(s.omega_Omega - self.waveguide.omega_c):
                raise ValueError(f"species {s.label}: detuning is not finite")

    def detuning(self, label=None):
        """Detuning ``Omega_i - omega_c`` of species `label` (default: first)."""
        return self.get(label).omega_Omega - self.waveguide.omega_c

    def get(self, label=None):
        if label is None:
            return self.species[0]
        for s in self.species:
            if s.label == label:
                return s
        raise KeyError(label)

    def excited_species(self):
        """The unique species carrying the initial excitation."""
        excited = [s for s in self.species if s.excited_m > 0]
        if not excited:
            raise InitialStateError("no emitter is excited at t=0")
        if len(excited) > 1:
            raise InitialStateError(
                "initial excitation spread over several species is not supported")
        return excited[0]

    @property
    def dimension(self):
        return self.waveguide.num_sites + sum(s.total_M for s in self.species)

    def with_species(self, index, **changes):
        """Copy with fields of species `index` replaced."""
        species = list(self.species)
        species[index] = replace(species[index], **changes)
        return replace(self, species=tuple(species))


class Layout:
    """Index map of the single-excitation basis.

    Emitters come first, grouped by species in declaration order, followed by
    the ``num_sites`` photon sites.
    """

    def __init__(self, system):
        self.slices = {}
        offset = 0
        for s in system.species:
            self.slices[s.label] = slice(offset, offset + s.total_M)
            offset += s.total_M
        self.num_emitters = offset
        self.num_sites = system.waveguide.num_sites
        self.dimension = offset + self.num_sites

    def emitter(self, label, j):
        sl = self.slices[label]
        if not 0 <= j < sl.stop - sl.start:
            raise IndexError(j)
        return sl.start + j

    def site(self, x):
        if not 0 <= x < self.num_sites:
            raise IndexError(x)
        return self.num_emitters + x


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Sparse Hermitian single-excitation Hamiltonian plus its index map."""

    matrix: sp.csr_matrix
    layout: Layout
    system: SystemSpec

    def spectral_radius_bound(self, shift=0.0):
        """Gershgorin-type bound on ``|E - shift|`` over the spectrum."""
        m = self.matrix
        diag = np.abs(m.diagonal() - shift)
        offdiag = abs(m - sp.diags(m.diagonal())).sum(axis=1).A1
        return float(np.max(diag + offdiag))

    @property
    def omega_c(self):
        return self.system.waveguide.omega_c

    def dense(self):
        return self.matrix.toarray()


@dataclass(frozen=True)
class StateVector:
    """Single-excitation amplitudes: emitters (species order) then photon sites."""

    emitter_amps: np.ndarray
    photon_amps: np.ndarray

    def as_array(self):
        return np.concatenate([self.emitter_amps, self.photon_amps]).astype(complex)

    @property
    def norm(self):
        return float(np.sum(np.abs(self.emitter_amps) ** 2)
                     + np.sum(np.abs(self.photon_amps) ** 2))

    @classmethod
    def from_array(cls, psi, layout):
        psi = np.asarray(psi, dtype=complex)
        return cls(psi[:layout.num_emitters].copy(), psi[layout.num_emitters:].copy())


def dispersion(k, wg):
    """Free-photon dispersion ``omega_c + 2 J cos k``."""
    return wg.omega_c + 2 * wg.hopping_J * np.cos(k)


def group_velocity(k, wg):
    """Group velocity ``d omega / dk = -2 J sin k`` in sites per unit time."""
    return -2 * wg.hopping_J * np.sin(k)


def density_of_states(delta, wg):
    r"""Density of states of the infinite chain per mode, per unit energy.

    .. math:: D(\Delta) = 1 / (\pi \sqrt{4J^2 - \Delta^2})

    Parameters
    ----------
    delta : float or ndarray
        Energy measured from the band centre.
    wg : WaveguideSpec

    Raises
    ------
    OutOfBandError
        If any ``|delta| >= 2J``; the density is singular at the edges and
        vanishes outside.
    """
    delta = np.asarray(delta, dtype=float)
    two_j = 2 * wg.hopping_J
    if np.any(np.abs(delta) >= two_j):
        raise OutOfBandError(f"|delta| must be < 2J = {two_j}")
    out = 1.0 / (np.pi * np.sqrt((two_j - delta) * (two_j + delta)))
    return out if out.ndim else float(out)


def build_single_excitation_hamiltonian(system):
    """Assemble the single-excitation block of the Hamiltonian.

    Diagonal: ``omega_c`` on photon sites, ``Omega_i`` on emitters of species
    ``i``. Off-diagonal: ``J`` between neighbouring sites (open chain) and
    ``V_i`` between each type-``i`` emitter and the coupling site.
    """
    wg = system.waveguide
    layout = Layout(system)
    n = layout.num_sites
    x0 = layout.site(wg.coupling_site)

    rows, cols, vals = [], [], []
    sites = layout.num_emitters + np.arange(n)
    rows.append(sites)
    cols.append(sites)
    vals.append(np.full(n, float(wg.omega_c)))
    rows += [sites[:-1], sites[1:]]
    cols += [sites[1:], sites[:-1]]
    vals += [np.full(n - 1, float(wg.hopping_J))] * 2
    for s in system.species:
        idx = np.arange(layout.slices[s.label].start, layout.slices[s.label].stop)
        rows.append(idx)
        cols.append(idx)
        vals.append(np.full(idx.size, float(s.omega_Omega)))
        if s.coupling_V != 0:
            hub = np.full(idx.size, x0)
            v = np.full(idx.size, float(s.coupling_V))
            rows += [idx, hub]
            cols += [hub, idx]
            vals += [v, v]

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(layout.dimension, layout.dimension)).tocsr()
    matrix = matrix.astype(complex)
    matrix.sort_indices()
    return HamiltonianMatrix(matrix=matrix, layout=layout, system=system)


def initial_state(system):
    """Uniform superposition over the first ``m`` emitters of the excited species."""
    excited = system.excited_species()
    layout = Layout(system)
    emitters = np.zeros(layout.num_emitters, dtype=complex)
    start = layout.slices[excited.label].start
    emitters[start:start + excited.excited_m] = 1.0 / np.sqrt(excited.excited_m)
    return StateVector(emitters, np.zeros(layout.num_sites, dtype=complex))
