"""Closed-form Laplace-domain solution for the infinite chain.

The excited-emitter amplitude splits into three parts:

* a dark-state term oscillating at the emitter frequency with constant
  magnitude ``(M - m) / (sqrt(m) M)``;
* one residue per photon-emitter bound state (real poles outside the band);
* a branch-cut integral over the scattering band that dies out at long times.

All amplitudes are returned in the frame rotating at ``omega_c`` (the same
frame as :mod:`wgqed.propagator`), so inside this module energies are
detunings from the band centre.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BranchCutError, InitialStateError, OutOfBandError, QuadratureError
from .lattice import EmitterSpecies, SystemSpec, density_of_states

GL_ORDER = 16
POLE_TOL = 1e-12          # residual, in units of 2J
ROOT_GRID = 10_000
INTEGRAND_GUARD = 1e8
DEGENERACY_TOL = 1e-12    # lines closer than this (units of 2J) count as equal


# --------------------------------------------------------------------------
# Lattice Green's function


def lattice_green_function(z, wg):
    r"""Local Green's function of the infinite chain at the coupling site.

    .. math:: F(z) = \frac{1}{N}\sum_k \frac{1}{z - \omega_k}
              \xrightarrow{N\to\infty} \frac{1}{\sqrt{(z-\omega_c)^2 - 4J^2}}

    with the branch fixed by ``F(z) ~ 1/z`` at large ``|z|``.

    Parameters
    ----------
    z : complex or ndarray
        Complex energy (``z = i s`` in terms of the Laplace variable).
    wg : WaveguideSpec

    Raises
    ------
    BranchCutError
        If any `z` lies on the band ``[omega_c - 2J, omega_c + 2J]``;
        use :func:`green_side_limit` there.
    """
    zt = np.asarray(z, dtype=complex) - wg.omega_c
    two_j = 2 * wg.hopping_J
    on_cut = (zt.imag == 0) & (np.abs(zt.real) <= two_j)
    if np.any(on_cut):
        raise BranchCutError("z lies on the band; use green_side_limit")
    out = _green(zt, two_j)
    return out if out.ndim else complex(out)


def _green(zt, two_j):
    # principal sqrt of 1 - (2J/z)^2 has its cut exactly on the band
    return 1.0 / (zt * np.sqrt(1.0 - (two_j / zt) ** 2))


def green_side_limit(E, side, wg):
    """``lim_{eta -> 0+} F(E + side * i eta)`` for `E` strictly inside the band.

    The real part vanishes identically for the 1D chain; the imaginary part
    is ``-side / sqrt(4J^2 - (E - omega_c)^2)``.
    """
    if side not in (1, -1, "+", "-"):
        raise ValueError(f"side must be +1 or -1, got {side!r}")
    sgn = 1 if side in (1, "+") else -1
    et = np.asarray(E, dtype=float) - wg.omega_c
    two_j = 2 * wg.hopping_J
    if np.any(np.abs(et) >= two_j):
        raise OutOfBandError(f"|E - omega_c| must be < 2J = {two_j}")
    out = np.asarray(-1j * sgn / np.sqrt((two_j - et) * (two_j + et)))
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# Result containers


@dataclass
class PoleSet:
    """Real poles of the bright-mode resolvent (bound-state energies).

    ``energies`` are lab-frame energies, ``derivative_at_pole`` the
    Laplace-domain derivative of the characteristic function at
    ``s = -iE`` and ``residues`` the coefficient of ``exp(-i (E - omega_c) t)``
    in the excited amplitude.
    """

    energies: np.ndarray
    derivative_at_pole: np.ndarray
    residues: np.ndarray
    dark_energy: float = None
    flags: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.energies)


@dataclass
class AmplitudeBreakdown:
    t: np.ndarray
    dark_term: np.ndarray
    bound_terms: np.ndarray        # (num_poles, len(t))
    branch_cut_term: np.ndarray
    total: np.ndarray
    poles: PoleSet = None

    @property
    def bound_sum(self):
        return self.bound_terms.sum(axis=0) if len(self.bound_terms) else np.zeros_like(self.total)


# --------------------------------------------------------------------------
# Pole finding


def _edge_root(func, sign_at_edge):
    """Root in ``kappa > 0`` of `func`, whose sign at ``kappa -> 0+`` is `sign_at_edge`."""
    lo = 1e-3
    while np.sign(func(lo)) != sign_at_edge:
        lo *= 1e-3
        if lo < 1e-300:
            return None
    hi = 1.0
    while np.sign(func(hi)) == sign_at_edge:
        hi *= 2.0
        if hi > 1e3:
            return None
    return brentq(func, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _single_poles(two_j, delta, g2):
    """Detunings of the two roots of ``E - delta - g2 F(E) = 0`` outside the band.

    `g2` is the collective coupling ``M V^2``. Each side is parameterised as
    ``E = +-2J cosh(kappa)`` and the equation multiplied by ``sinh(kappa)``.
    """
    roots = []
    for side in (-1, 1):
        def h(kappa, side=side):
            return (np.sinh(kappa) * (side * two_j * np.cosh(kappa) - delta)
                    - side * g2 / two_j)
        kappa = _edge_root(h, -side)
        if kappa is not None:
            roots.append((side * two_j * np.cosh(kappa), side * kappa))
    return roots


def _green_from_kappa(signed_kappa, two_j):
    """F and dF/dz at ``E = sign * 2J cosh|kappa|`` without the ``E^2 - 4J^2`` cancellation."""
    k = np.abs(signed_kappa)
    sgn = np.sign(signed_kappa)
    sh = two_j * np.sinh(k)
    return sgn / sh, -two_j * np.cosh(k) / sh ** 3


def _single_residues(delta, M, m, V, energies, g, dg):
    """Coefficients of the bound-state terms and ``[G1]'(s)`` at each pole.

    `g` and `dg` are ``F`` and ``dF/dz`` at the pole energies.
    """
    e = np.asarray(energies, dtype=float)
    g0_prime = 1.0 - M * V ** 2 * dg                  # dG0/ds at s = -iE
    g1_prime = -1j * (e - delta) * g0_prime
    # (s + i Omega + i (M - m) V^2 F) / (sqrt(m) [G1]'), s = -iE
    numer = -1j * ((e - delta) - (M - m) * V ** 2 * g)
    return numer / (np.sqrt(m) * g1_prime), g1_prime


def bound_state_energies_single(system):
    """Bound-state poles for a single emitter species.

    Returns a :class:`PoleSet` with exactly two energies (one above, one
    below the band) whenever ``V > 0``. For ``V = 0`` the only pole is the
    bare emitter line, present when it lies outside the band
    (``flags['decoupled']`` is set).
    """
    if len(system.species) != 1:
        raise ValueError("expected a single emitter species")
    s = system.species[0]
    wg = system.waveguide
    two_j = 2 * wg.hopping_J
    delta = s.omega_Omega - wg.omega_c
    m = max(s.excited_m, 1)
    dark = s.omega_Omega if s.total_M >= 2 else None

    if s.coupling_V == 0:
        energies = np.array([delta]) if abs(delta) > two_j else np.array([])
        return PoleSet(energies + wg.omega_c, np.zeros(energies.size, complex),
                       np.full(energies.size, np.sqrt(m) / s.total_M, complex),
                       dark, {"decoupled": True})

    g2 = s.total_M * s.coupling_V ** 2
    roots = _single_poles(two_j, delta, g2)
    det = np.array([e for e, _ in roots])
    g, dg = _green_from_kappa(np.array([k for _, k in roots]), two_j)
    residual = det - delta - g2 * g
    res, g1p = _single_residues(delta, s.total_M, m, s.coupling_V, det, g, dg)
    return PoleSet(det + wg.omega_c, g1p, res, dark,
                   {"max_residual": float(np.max(np.abs(residual))) / two_j if det.size else 0.0})


def _two_params(system):
    """Excited species first: ``(A, B)``."""
    a = system.excited_species()
    b = next(s for s in system.species if s is not a)
    return a, b


def _two_poles(two_j, dA, dB, gA, gB, npts=ROOT_GRID):
    """All sign-change roots of the two-species pole equation outside the band."""
    extent = 100 * max(gA, gB) / (two_j / 2) + 2 * max(abs(dA), abs(dB)) + two_j
    kappa_max = np.arccosh(1 + extent / two_j)
    grid = np.geomspace(1e-12, kappa_max, npts)
    roots = []
    for side in (1, -1):
        def d_hat(kappa, side=side):
            e = side * two_j * np.cosh(kappa)
            return (np.sinh(kappa) * (e - dA) * (e - dB)
                    - side / two_j * (gA * (e - dB) + gB * (e - dA)))
        vals = d_hat(grid)
        flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        for i in flips:
            k = brentq(d_hat, grid[i], grid[i + 1], xtol=1e-300,
                       rtol=4 * np.finfo(float).eps, maxiter=500)
            roots.append((side * two_j * np.cosh(k), side * k))
        roots += [(side * two_j * np.cosh(k), side * k) for k in grid[vals == 0]]
    return sorted(roots)


def bound_state_energies_two(system):
    """Bound-state poles for two emitter species (excited species first).

    Roots are located by sign changes of the (rescaled) real pole equation on
    a geometric grid on either side of the band, then refined by Brent's
    method. The set may be empty and its size changes with parameters.
    """
    if len(system.species) != 2:
        raise ValueError("expected two emitter species")
    a, b = _two_params(system)
    wg = system.waveguide
    two_j = 2 * wg.hopping_J
    dA, dB = a.omega_Omega - wg.omega_c, b.omega_Omega - wg.omega_c
    gA, gB = a.total_M * a.coupling_V ** 2, b.total_M * b.coupling_V ** 2
    roots = _two_poles(two_j, dA, dB, gA, gB)
    det = np.array([e for e, _ in roots])
    m = a.excited_m
    if det.size:
        g, dg = _green_from_kappa(np.array([k for _, k in roots]), two_j)
        d2 = (2 * det - dA - dB) - dg * (gA * (det - dB) + gB * (det - dA)) - g * (gA + gB)
        g2_prime = 1j * d2                                  # dG2/ds = i dG2/dz
        res = (det - dB) * m * a.coupling_V ** 2 * g / (np.sqrt(m) * (det - dA) * d2)
        residual = (det - dA) * (det - dB) - g * (gA * (det - dB) + gB * (det - dA))
    else:
        g2_prime = res = residual = np.array([], complex)
    dark = a.omega_Omega if a.total_M >= 2 else None
    return PoleSet(det + wg.omega_c, np.asarray(g2_prime, complex), np.asarray(res, complex),
                   dark, {"max_residual": float(np.max(np.abs(residual), initial=0.0)) / two_j})


def bound_state_energies(system):
    if len(system.species) == 1:
        return bound_state_energies_single(system)
    return bound_state_energies_two(system)


# --------------------------------------------------------------------------
# Branch-cut quadrature


def _gauss_legendre(order=GL_ORDER):
    return np.polynomial.legendre.leggauss(order)


def cut_nodes(t_max, two_j, resonances, order=GL_ORDER):
    """Nodes and weights in ``theta`` (``y = cos theta``) for the cut integral.

    Uniform panels (``max(64, 8 ceil(t_max 2J / pi))`` of them) resolve the
    ``exp(i 2J y t)`` oscillation; breakpoints graded geometrically towards
    each resonance resolve narrow peaks. A resonance is either ``y*`` or a
    pair ``(y*, width)`` with the peak half-width in ``theta``; grading then
    starts a decade below that width.
    """
    panels = max(64, 8 * int(np.ceil(t_max * two_j / np.pi)))
    edges = [np.linspace(0.0, np.pi, panels + 1)]
    for res in resonances:
        y, width = res if isinstance(res, tuple) else (res, 1e-6)
        start = float(np.clip(0.1 * width, 1e-15, 1e-7))
        grading = start * 2.0 ** np.arange(0, int(np.ceil(np.log2(np.pi / start))) + 1)
        theta = np.arccos(np.clip(y, -1.0, 1.0))
        edges += [theta + grading, theta - grading, [theta]]
    edges = np.unique(np.clip(np.concatenate(edges), 0.0, np.pi))
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-14])]
    x, w = _gauss_legendre(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _oscillatory_sum(values, nodes, weights, two_j, t, chunk=128):
    """``sum_n w_n values_n exp(i 2J cos(theta_n) t)`` for every `t`."""
    y = np.cos(nodes)
    vw = values * weights
    out = np.empty(t.size, dtype=complex)
    for start in range(0, t.size, chunk):
        tt = t[start:start + chunk]
        out[start:start + chunk] = np.exp(1j * two_j * np.outer(tt, y)) @ vw
    return out


def _cut_single(t, J, delta, M, m, V):
    """``int_{-1}^{1} 4 sqrt(m) V^2 J^2 sqrt(1-y^2) e^{i2Jyt} / (L(y) + pi M^2 V^4) dy``.

    With ``L(y) = 4 pi J^2 (1-y^2)(2Jy + delta)^2``; integrated in
    ``theta = arccos y`` where the integrand is smooth.
    """
    two_j = 2 * J
    y_star = -delta / two_j
    width = M * V ** 2 / (two_j ** 2 * max(1 - y_star ** 2, 1e-300))
    nodes, weights = cut_nodes(np.max(t, initial=0.0), two_j, [(y_star, width)])
    y = np.cos(nodes)
    s2 = np.sin(nodes) ** 2
    num = 4 * np.sqrt(m) * V ** 2 * J ** 2 * s2
    den = 4 * np.pi * J ** 2 * s2 * (two_j * y + delta) ** 2 + np.pi * M ** 2 * V ** 4
    return _oscillatory_sum(num / den, nodes, weights, two_j, t)


def cut_integrand_two(y, J, dA, dB, MA, mA, VA, MB, VB, combine=True):
    r"""Two-species cut integrand in ``y`` (without the ``e^{i2Jyt}`` factor).

    .. math:: \sum_{\alpha=\pm1} \frac{J (2Jy+\Omega_B) m_A V_A^2 f(y)}
              {\pi\sqrt{m_A}(2Jy+\Omega_A) Z_\alpha(y)}

    With ``combine=True`` the alpha-sum is carried out algebraically,
    ``sum_a 1/((2Jy+Omega_A) Z_a) = 2 b / (a^2 b^2 + c^2 f^2)``, which removes
    the apparent pole at ``2Jy + Omega_A = 0``. ``combine=False`` evaluates the
    two terms literally (used to check the cancellation).
    """
    two_j = 2 * J
    y = np.asarray(y, dtype=float)
    f = 1.0 / (two_j * np.sqrt(1 - y ** 2))
    a = two_j * y + dA
    b = two_j * y + dB
    c = a * MB * VB ** 2 + b * MA * VA ** 2
    pref = J * mA * VA ** 2 * f / (np.pi * np.sqrt(mA))
    if combine:
        return pref * b * 2 * b / (a ** 2 * b ** 2 + (c * f) ** 2)
    total = 0j
    for alpha in (1, -1):
        z = a * b + alpha * 1j * c * f
        total = total + pref * b / (a * z)
    return total


def _cut_two(t, J, dA, dB, MA, mA, VA, MB, VB):
    two_j = 2 * J
    gA, gB = MA * VA ** 2, MB * VB ** 2
    g = gA + gB
    # near-degenerate lines leave a peak of width ~ (dA - dB)^2 where c(y) = 0
    y_c = -(dA * gB + dB * gA) / (two_j * g)
    width_c = gA * gB * (dA - dB) ** 2 / g ** 3
    nodes, weights = cut_nodes(np.max(t, initial=0.0), two_j,
                               [-dA / two_j, -dB / two_j, (y_c, width_c)])
    y = np.cos(nodes)
    s = np.sin(nodes)
    a = two_j * y + dA
    b = two_j * y + dB
    c = a * MB * VB ** 2 + b * MA * VA ** 2
    # integrand(y) dy with dy = sin(theta) d(theta) and f sin(theta) = 1/(2J),
    # multiplied through by sin^2 so nothing is singular at the band edges
    num = mA * VA ** 2 * b ** 2 * s ** 2
    den = np.pi * np.sqrt(mA) * (a ** 2 * b ** 2 * s ** 2 + c ** 2 / two_j ** 2)
    vals = num / den
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > INTEGRAND_GUARD:
        raise QuadratureError(
            f"two-species cut integrand failed its magnitude guard; the emitter lines "
            f"are too close to resolve: |dA - dB| = {abs(dA - dB):.1e}")
    return _oscillatory_sum(vals, nodes, weights, two_j, t), float(np.sum(vals * weights))


# --------------------------------------------------------------------------
# Amplitudes


def _as_times(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    return t


def trapping_limit(m, M):
    """Long-time dark-state amplitude ``(M - m) / (sqrt(m) M)``."""
    if not 1 <= m <= M:
        raise ValueError(f"need 1 <= m <= M, got m={m}, M={M}")
    return (M - m) / (np.sqrt(m) * M)


def amplitude_single_type(system, t):
    """Exact excited-emitter amplitude for one emitter species.

    Parameters
    ----------
    system : SystemSpec
        Single species with ``excited_m >= 1``.
    t : float or array_like
        Times (``>= 0``).

    Returns
    -------
    AmplitudeBreakdown
    """
    if len(system.species) != 1:
        raise ValueError("expected a single emitter species")
    s = system.species[0]
    if s.excited_m < 1:
        raise InitialStateError("no emitter is excited at t=0")
    t = _as_times(t)
    wg = system.waveguide
    J = wg.hopping_J
    delta = s.omega_Omega - wg.omega_c
    M, m, V = s.total_M, s.excited_m, s.coupling_V

    dark = trapping_limit(m, M) * np.exp(-1j * delta * t)
    poles = bound_state_energies_single(system)
    det = poles.energies - wg.omega_c
    bound = poles.residues[:, None] * np.exp(-1j * np.outer(det, t))
    if V == 0:
        if abs(delta) <= 2 * J:
            # decoupled in-band emitter: the bright part is a bare phase
            bound = (np.sqrt(m) / M * np.exp(-1j * delta * t))[None, :]
        cut = np.zeros(t.size, complex)
    else:
        cut = _cut_single(t, J, delta, M, m, V)
    total = dark + bound.sum(axis=0) + cut
    return AmplitudeBreakdown(t, dark, bound, cut, total, poles)


def _coalesced(system):
    a, b = _two_params(system)
    merged = EmitterSpecies(a.label, a.omega_Omega, a.coupling_V,
                            a.total_M + b.total_M, a.excited_m)
    return SystemSpec(system.waveguide, (merged,))


def amplitude_two_type(system, t):
    """Exact amplitude of the excited species in a two-species system.

    Identical species (same frequency and coupling) are merged and handed to
    :func:`amplitude_single_type`, as is the case ``V_B = 0`` in which the
    unexcited species decouples.
    """
    if len(system.species) != 2:
        raise ValueError("expected two emitter species")
    a, b = _two_params(system)
    t = _as_times(t)
    if a.omega_Omega == b.omega_Omega and a.coupling_V == b.coupling_V:
        return amplitude_single_type(_coalesced(system), t)
    if b.coupling_V == 0 or a.coupling_V == 0:
        return amplitude_single_type(SystemSpec(system.waveguide, (a,)), t)
    if abs(a.omega_Omega - b.omega_Omega) <= DEGENERACY_TOL * 2 * system.waveguide.hopping_J:
        return _equal_frequency(system, t)

    wg = system.waveguide
    J = wg.hopping_J
    dA, dB = a.omega_Omega - wg.omega_c, b.omega_Omega - wg.omega_c
    dark = trapping_limit(a.excited_m, a.total_M) * np.exp(-1j * dA * t)
    poles = bound_state_energies_two(system)
    det = poles.energies - wg.omega_c
    bound = poles.residues[:, None] * np.exp(-1j * np.outer(det, t))
    cut, cut_at_zero = _cut_two(t, J, dA, dB, a.total_M, a.excited_m, a.coupling_V,
                                b.total_M, b.coupling_V)
    # the pieces must rebuild 1/sqrt(m) at t = 0
    defect = abs(trapping_limit(a.excited_m, a.total_M) + poles.residues.sum() + cut_at_zero
                 - 1 / np.sqrt(a.excited_m))
    poles.flags["completeness_error"] = float(defect)
    if defect > 1e-6:
        raise QuadratureError(
            f"branch-cut quadrature unresolved (t=0 defect {defect:.2e}); the emitter lines "
            f"are too close to separate: |dA - dB| = {abs(dA - dB):.1e}")
    total = dark + bound.sum(axis=0) + cut
    return AmplitudeBreakdown(t, dark, bound, cut, total, poles)


def _equal_frequency(system, t):
    """Both lines at the same frequency but with different couplings.

    Rotating the two symmetric modes into the combination that couples to
    the chain and the one that does not leaves a one-emitter bright problem
    with coupling ``sqrt(g_A + g_B)`` plus an extra dark phase.
    """
    a, b = _two_params(system)
    wg = system.waveguide
    gA, gB = a.total_M * a.coupling_V ** 2, b.total_M * b.coupling_V ** 2
    g = gA + gB
    m, MA = a.excited_m, a.total_M
    bright = amplitude_single_type(
        SystemSpec(wg, (EmitterSpecies(a.label, a.omega_Omega, np.sqrt(g), 1, 1),)), t)
    scale = np.sqrt(m) / MA
    phase = np.exp(-1j * (a.omega_Omega - wg.omega_c) * t)
    dark = (trapping_limit(m, MA) + scale * gB / g) * phase
    poles = bright.poles
    poles = PoleSet(poles.energies, poles.derivative_at_pole, scale * gA / g * poles.residues,
                    a.omega_Omega, {**poles.flags, "equal_frequency": True})
    bound = scale * gA / g * bright.bound_terms
    cut = scale * gA / g * bright.branch_cut_term
    return AmplitudeBreakdown(t, dark, bound, cut, dark + bound.sum(axis=0) + cut, poles)


def excited_amplitude(system, t):
    """Dispatch to the one- or two-species solution."""
    if len(system.species) == 1:
        return amplitude_single_type(system, t)
    return amplitude_two_type(system, t)


# --------------------------------------------------------------------------
# Markovian limit


@dataclass(frozen=True)
class MarkovianRate:
    value: float
    valid: bool

    def __float__(self):
        return self.value


def markovian_decay_rate(system, weak_coupling=0.1):
    """Golden-rule collective decay rate ``2 pi M V^2 D(delta)``.

    ``valid`` is True only inside the window ``|delta| < J`` and
    ``sqrt(M) V <= weak_coupling * 2J``, where emission is essentially
    exponential.
    """
    if len(system.species) != 1:
        raise ValueError("expected a single emitter species")
    s = system.species[0]
    wg = system.waveguide
    delta = s.omega_Omega - wg.omega_c
    rate = 2 * np.pi * s.total_M * s.coupling_V ** 2 * density_of_states(delta, wg)
    valid = (abs(delta) < wg.hopping_J
             and np.sqrt(s.total_M) * s.coupling_V <= weak_coupling * 2 * wg.hopping_J)
    return MarkovianRate(float(rate), bool(valid))
