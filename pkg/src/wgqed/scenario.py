"""Scenario files, batch runs, solver comparison and parameter sweeps.

A scenario is a flat ``key = value`` document; species entries use one level
of indexing (``species[0].M = 4``). Energies are ratios to ``2J`` and times
are in units of ``1/(2J)``; internally ``2J = 1`` and ``omega_c = 0``.

Example::

    name = fig2a_M4
    waveguide.J2 = 1.0
    waveguide.N = 2001
    species[0].delta_over_2J = 0.0
    species[0].V_over_2J = 0.07
    species[0].M = 4
    species[0].m = 2
    grid.t_max_2J = 300
    grid.samples = 601
    solvers = numeric, analytic
"""
import csv
import io
import itertools
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, analytic, propagator
from ._accel import backend_name
from .errors import HorizonError, ParseError
from .lattice import EmitterSpecies, SystemSpec, WaveguideSpec

SCHEMA_VERSION = "1"
SOLVERS = ("numeric", "analytic")
SERIES = ("abs_be", "re_be", "im_be", "norm", "dark_term", "bound_terms", "cut_term",
          "trapping_line")
ANALYTIC_ONLY = {"dark_term", "bound_terms", "cut_term"}
NUMERIC_ONLY = {"norm"}

HOLD_TOL = 0.02
OSC_MEAN_TOL = 0.05
OSC_AMPLITUDE_TOL = 0.1
PLATEAU_FRACTION = 0.2
ORACLE_TOL = 1e-2

_SPECIES_KEY = re.compile(r"^species\[(\d+)\]\.(\w+)$")
_SPECIES_FIELDS = {"label", "delta_over_2J", "V_over_2J", "M", "m"}
_TOP_KEYS = {"name", "waveguide.J2", "waveguide.N", "waveguide.x0", "grid.t_max_2J",
             "grid.samples", "solvers", "outputs", "output_path", "numeric.backend",
             "numeric.dt_factor"}
_REQUIRED = {"grid.t_max_2J", "grid.samples"}
_REQUIRED_SPECIES = {"delta_over_2J", "V_over_2J", "M", "m"}


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemSpec
    grid: propagator.TimeGrid
    solvers: tuple = SOLVERS
    outputs: tuple = None
    output_path: str = None
    name: str = "scenario"
    backend: str = "rk4"
    dt_factor: float = 0.05

    def __post_init__(self):
        if not self.solvers:
            raise ParseError("at least one solver is required", "solvers")
        if self.outputs is None:
            outs = [s for s in SERIES
                    if not (s in ANALYTIC_ONLY and "analytic" not in self.solvers)
                    and not (s in NUMERIC_ONLY and "numeric" not in self.solvers)]
            object.__setattr__(self, "outputs", tuple(outs))

    @property
    def excited(self):
        return self.system.excited_species()

    @property
    def predicted_plateau(self):
        s = self.excited
        return analytic.trapping_limit(s.excited_m, s.total_M)


@dataclass
class ComparisonReport:
    max_abs_deviation: float
    time_of_max: float
    plateau_estimate: float
    plateau_predicted: float
    plateau_error: float
    oscillation_amplitude: float
    law_status: str
    thresholds: dict = field(default_factory=lambda: {
        "holds": HOLD_TOL, "oscillatory_mean": OSC_MEAN_TOL,
        "oscillatory_amplitude": OSC_AMPLITUDE_TOL})

    def as_dict(self):
        return {k: getattr(self, k) for k in (
            "max_abs_deviation", "time_of_max", "plateau_estimate", "plateau_predicted",
            "plateau_error", "oscillation_amplitude", "law_status", "thresholds")}


# --------------------------------------------------------------------------
# Parsing and rendering


def _parse_lines(document):
    entries = {}
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ParseError("duplicate key", key)
        entries[key] = value
    return entries


def _number(entries, key, kind=float, default=None):
    if key not in entries:
        if default is None:
            raise ParseError("missing required key", key)
        return default
    try:
        value = kind(entries[key])
    except ValueError:
        raise ParseError(f"not a valid {kind.__name__}: {entries[key]!r}", key) from None
    if kind is float and not np.isfinite(value):
        raise ParseError("must be finite", key)
    return value


def _list(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_scenario(document):
    """Parse and validate a scenario document into a :class:`ScenarioConfig`.

    Raises
    ------
    ParseError
        Unknown or missing keys, invalid values, ``m > M`` or more than one
        excited species; ``err.key`` holds the offending key path.
    """
    entries = _parse_lines(document)
    species_entries = {}
    for key in entries:
        match = _SPECIES_KEY.match(key)
        if match:
            idx, fname = int(match.group(1)), match.group(2)
            if fname not in _SPECIES_FIELDS:
                raise ParseError("unknown key", key)
            species_entries.setdefault(idx, {})[fname] = key
        elif key not in _TOP_KEYS:
            raise ParseError("unknown key", key)
    for key in sorted(_REQUIRED):
        if key not in entries:
            raise ParseError("missing required key", key)
    if not species_entries:
        raise ParseError("missing required key", "species[0].M")
    if sorted(species_entries) != list(range(len(species_entries))):
        raise ParseError("species indices must be 0, 1, ...", "species")
    if len(species_entries) > 2:
        raise ParseError("at most two species are supported", "species")

    j2 = _number(entries, "waveguide.J2", float, 1.0)
    if j2 != 1.0:
        raise ParseError("energies are ratios of 2J; waveguide.J2 must be 1.0", "waveguide.J2")
    n_sites = _number(entries, "waveguide.N", int, 2001)
    x0 = _number(entries, "waveguide.x0", int, -1)
    try:
        wg = WaveguideSpec(0.0, 0.5, n_sites, None if x0 < 0 else x0)
    except ValueError as exc:
        raise ParseError(str(exc), "waveguide") from None

    species = []
    for idx in range(len(species_entries)):
        prefix = f"species[{idx}]."
        for fname in sorted(_REQUIRED_SPECIES):
            if prefix + fname not in entries:
                raise ParseError("missing required key", prefix + fname)
        label = entries.get(prefix + "label", "AB"[idx])
        M = _number(entries, prefix + "M", int)
        m = _number(entries, prefix + "m", int)
        if M < 1:
            raise ParseError("M must be >= 1", prefix + "M")
        if not 0 <= m <= M:
            raise ParseError(f"species {label}: m={m} must lie in [0, M={M}]", prefix + "m")
        V = _number(entries, prefix + "V_over_2J")
        if V < 0:
            raise ParseError("must be >= 0", prefix + "V_over_2J")
        species.append(EmitterSpecies(label, _number(entries, prefix + "delta_over_2J"), V, M, m))
    excited = [s.label for s in species if s.excited_m > 0]
    if len(excited) != 1:
        what = "no species is excited" if not excited else f"species {excited} are all excited"
        raise ParseError(f"exactly one species must be excited; {what}", "species")
    try:
        system = SystemSpec(wg, tuple(species))
    except ValueError as exc:
        raise ParseError(str(exc), "species") from None

    t_max = _number(entries, "grid.t_max_2J")
    samples = _number(entries, "grid.samples", int)
    try:
        grid = propagator.TimeGrid(0.0, t_max, samples)
    except ValueError as exc:
        raise ParseError(str(exc), "grid") from None

    solvers = _list(entries["solvers"]) if "solvers" in entries else SOLVERS
    for s in solvers:
        if s not in SOLVERS:
            raise ParseError(f"unknown solver {s!r}", "solvers")
    if not solvers:
        raise ParseError("at least one solver is required", "solvers")
    solvers = tuple(s for s in SOLVERS if s in solvers)
    outputs = None
    if "outputs" in entries:
        outputs = _list(entries["outputs"])
        for o in outputs:
            if o not in SERIES:
                raise ParseError(f"unknown series {o!r}", "outputs")
            if o in ANALYTIC_ONLY and "analytic" not in solvers:
                raise ParseError(f"series {o!r} requires the analytic solver", "outputs")
            if o in NUMERIC_ONLY and "numeric" not in solvers:
                raise ParseError(f"series {o!r} requires the numeric solver", "outputs")
        outputs = tuple(o for o in SERIES if o in outputs)

    backend = entries.get("numeric.backend", "rk4")
    if backend not in ("rk4", "chebyshev"):
        raise ParseError(f"unknown backend {backend!r}", "numeric.backend")
    dt_factor = _number(entries, "numeric.dt_factor", float, 0.05)
    if not dt_factor > 0:
        raise ParseError("must be positive", "numeric.dt_factor")
    return ScenarioConfig(system, grid, solvers, outputs, entries.get("output_path"),
                          entries.get("name", "scenario"), backend, dt_factor)


def render_scenario(cfg):
    """Serialise `cfg` back to the scenario document format."""
    wg = cfg.system.waveguide
    lines = [f"name = {cfg.name}",
             "waveguide.J2 = 1.0",
             f"waveguide.N = {wg.num_sites}",
             f"waveguide.x0 = {wg.coupling_site}"]
    for i, s in enumerate(cfg.system.species):
        lines += [f"species[{i}].label = {s.label}",
                  f"species[{i}].delta_over_2J = {s.omega_Omega!r}",
                  f"species[{i}].V_over_2J = {s.coupling_V!r}",
                  f"species[{i}].M = {s.total_M}",
                  f"species[{i}].m = {s.excited_m}"]
    lines += [f"grid.t_max_2J = {cfg.grid.t_end!r}",
              f"grid.samples = {cfg.grid.num_samples}",
              f"solvers = {', '.join(cfg.solvers)}",
              f"outputs = {', '.join(cfg.outputs)}",
              f"numeric.backend = {cfg.backend}",
              f"numeric.dt_factor = {cfg.dt_factor!r}"]
    if cfg.output_path:
        lines.append(f"output_path = {cfg.output_path}")
    return "\n".join(lines) + "\n"


def load_scenario(path):
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# Running


@dataclass
class RunResult:
    config: ScenarioConfig
    times: np.ndarray
    trajectory: propagator.Trajectory = None
    breakdown: analytic.AmplitudeBreakdown = None
    files: dict = field(default_factory=dict)

    def excited_series(self, solver=None):
        solver = solver or ("numeric" if self.trajectory is not None else "analytic")
        label = self.config.excited.label
        if solver == "numeric":
            return propagator.excited_amplitude_series(self.trajectory, label)
        return self.breakdown.total


def solve(cfg):
    """Run the enabled solvers without writing anything."""
    times = cfg.grid.times
    numeric = ana = None
    if "numeric" in cfg.solvers:
        opts = propagator.EvolveOptions(backend=cfg.backend, dt_factor=cfg.dt_factor)
        numeric = propagator.simulate(cfg.system, cfg.grid, opts)
    if "analytic" in cfg.solvers:
        ana = analytic.excited_amplitude(cfg.system, times)
    return RunResult(cfg, times, numeric, ana)


def _fmt(x):
    return f"{x:.17g}"


def _write_csv(path, header, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def _numeric_columns(result):
    cfg = result.config
    b = result.excited_series("numeric")
    header = ["t_2J", "re_be", "im_be", "abs_be"]
    cols = [result.times, b.real, b.imag, np.abs(b)]
    if "norm" in cfg.outputs:
        header.append("norm")
        cols.append(result.trajectory.norm_series)
    if "trapping_line" in cfg.outputs:
        header.append("trapping_line")
        cols.append(np.full(b.size, cfg.predicted_plateau))
    return header, cols


def _analytic_columns(result):
    cfg = result.config
    ab = result.breakdown
    b = ab.total
    header = ["t_2J", "re_be", "im_be", "abs_be"]
    cols = [result.times, b.real, b.imag, np.abs(b)]
    parts = (("dark_term", "dark", ab.dark_term), ("bound_terms", "bound", ab.bound_sum),
             ("cut_term", "cut", ab.branch_cut_term))
    for series, stem, values in parts:
        if series in cfg.outputs:
            header += [f"{stem}_re", f"{stem}_im"]
            cols += [values.real, values.imag]
    if "trapping_line" in cfg.outputs:
        header.append("trapping_line")
        cols.append(np.full(b.size, cfg.predicted_plateau))
    return header, cols


def metadata(result):
    cfg = result.config
    wg = cfg.system.waveguide
    meta = {
        "schema_version": SCHEMA_VERSION,
        "engine_version": __version__,
        "kernel_backend": backend_name(),
        "name": cfg.name,
        "units": {"energy": "2J", "time": "1/(2J)", "frame": "rotating at omega_c"},
        "scenario": render_scenario(cfg).splitlines(),
        "waveguide": {"N": wg.num_sites, "x0": wg.coupling_site, "J": wg.hopping_J,
                      "omega_c": wg.omega_c},
        "species": [{"label": s.label, "delta_over_2J": s.omega_Omega,
                     "V_over_2J": s.coupling_V, "M": s.total_M, "m": s.excited_m}
                    for s in cfg.system.species],
        "recurrence_horizon_2J": propagator.recurrence_horizon(cfg.system),
        "trapping_limit": cfg.predicted_plateau,
        "tolerances": {"pole_residual_2J": analytic.POLE_TOL,
                       "quadrature_gl_order": analytic.GL_ORDER,
                       "oracle": ORACLE_TOL},
    }
    if result.trajectory is not None:
        tr = result.trajectory
        meta["numeric"] = {"integrator": tr.meta["backend"], "dt_internal": tr.dt_internal,
                           "substeps_per_sample": tr.meta["substeps"],
                           "norm_tol_per_unit_time": tr.norm_tol,
                           "max_norm_drift": float(np.max(np.abs(tr.norm_series - 1))),
                           "max_symmetry_spread": float(np.max(tr.spread_metrics))}
    if result.breakdown is not None:
        poles = result.breakdown.poles
        meta["analytic"] = {"pole_energies_2J": [float(e) for e in poles.energies],
                            "pole_residues": [[float(r.real), float(r.imag)]
                                              for r in poles.residues],
                            "dark_energy_2J": poles.dark_energy}
    return meta


def run_scenario(cfg, out_dir=None):
    """Solve `cfg` and write ``<solver>.csv`` files plus ``metadata.json``.

    Output bytes depend only on the configuration (and the kernel backend).
    """
    result = solve(cfg)
    out = Path(out_dir or cfg.output_path or ".")
    out.mkdir(parents=True, exist_ok=True)
    if result.trajectory is not None:
        path = out / "numeric.csv"
        _write_csv(path, *_numeric_columns(result))
        result.files["numeric"] = path
    if result.breakdown is not None:
        path = out / "analytic.csv"
        _write_csv(path, *_analytic_columns(result))
        result.files["analytic"] = path
    path = out / "metadata.json"
    path.write_text(json.dumps(metadata(result), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    result.files["metadata"] = path
    return result


# --------------------------------------------------------------------------
# Comparison


def plateau(times, amplitude, fraction=PLATEAU_FRACTION):
    """Mean and half peak-to-peak of ``|amplitude|`` over the final `fraction` of the grid."""
    mag = np.abs(np.asarray(amplitude))
    t = np.asarray(times)
    window = mag[t >= t[0] + (1 - fraction) * (t[-1] - t[0]) - 1e-12]
    return float(window.mean()), float(0.5 * (window.max() - window.min()))


def law_status(error, oscillation):
    if error < HOLD_TOL:
        return "holds"
    if error < OSC_MEAN_TOL and oscillation < OSC_AMPLITUDE_TOL:
        return "oscillatory-holds"
    return "broken"


def report_from_series(times, reference, other, predicted):
    """Build a :class:`ComparisonReport`; `other` may be None (single solver)."""
    est, osc = plateau(times, reference)
    if other is not None:
        dev = np.abs(np.asarray(reference) - np.asarray(other))
        imax = int(np.argmax(dev))
        max_dev, t_max = float(dev[imax]), float(times[imax])
    else:
        max_dev, t_max = float("nan"), float("nan")
    err = abs(est - predicted)
    return ComparisonReport(max_dev, t_max, est, predicted, err, osc, law_status(err, osc))


def compare_solvers(cfg):
    """Run both solvers and compare them; the plateau is read from the numeric run."""
    horizon = propagator.recurrence_horizon(cfg.system)
    if cfg.grid.t_end > horizon:
        raise HorizonError(f"t_max_2J={cfg.grid.t_end:g} exceeds the recurrence horizon "
                           f"{horizon:g}; increase waveguide.N")
    both = replace(cfg, solvers=SOLVERS, outputs=None)
    result = solve(both)
    return report_from_series(result.times, result.excited_series("numeric"),
                              result.excited_series("analytic"), cfg.predicted_plateau)


# --------------------------------------------------------------------------
# Figure presets


def _single(name, delta, V, M, m, t_max, samples):
    wg = WaveguideSpec(0.0, 0.5, 2001, 1000)
    system = SystemSpec(wg, (EmitterSpecies("A", delta, V, M, m),))
    return ScenarioConfig(system, propagator.TimeGrid(0.0, t_max, samples), name=name)


def _double(name, VB, mA, t_max, samples):
    wg = WaveguideSpec(0.0, 0.5, 2001, 1000)
    system = SystemSpec(wg, (EmitterSpecies("A", 0.3, 0.1, 5, mA),
                             EmitterSpecies("B", 0.2, VB, 2, 0)))
    return ScenarioConfig(system, propagator.TimeGrid(0.0, t_max, samples), name=name)


FIGURES = ("fig1", "fig2a", "fig2b", "fig3a", "fig3b")


def figure_preset(name):
    """Named parameter families used for the standard plots.

    ``fig1``: ``m = M = 3``, ``V/2J = 0.08``, detunings ``{0, 0.5, 1.0, 1.25}``.
    ``fig2a``/``fig2b``: ``delta = 0``, ``V/2J = 0.07``, ``m = 2`` with
    ``M in {2, 3, 4, 6}`` and ``m = 3`` with ``M in {3, 4, 5, 8}``.
    ``fig3a``/``fig3b``: ``delta_A/2J = 0.3``, ``delta_B/2J = 0.2``,
    ``V_A/2J = 0.1``, ``M_A = 5``, ``M_B = 2``, ``m_A = 1..5`` and
    ``V_B/2J = 0.1`` or ``0.6``.

    Every preset uses ``N = 2001`` with the emitters at the central site and
    samples ``t 2J`` in ``[0, 600]`` at 1201 points, inside the recurrence
    horizon of 900 and long enough for the slowest ``m = M`` case to decay.
    """
    if name == "fig1":
        return [_single(f"fig1_delta{d:g}", d, 0.08, 3, 3, 600.0, 1201)
                for d in (0.0, 0.5, 1.0, 1.25)]
    if name == "fig2a":
        return [_single(f"fig2a_M{M}", 0.0, 0.07, M, 2, 600.0, 1201) for M in (2, 3, 4, 6)]
    if name == "fig2b":
        return [_single(f"fig2b_M{M}", 0.0, 0.07, M, 3, 600.0, 1201) for M in (3, 4, 5, 8)]
    if name in ("fig3a", "fig3b"):
        VB = 0.1 if name == "fig3a" else 0.6
        return [_double(f"{name}_mA{mA}", VB, mA, 600.0, 1201) for mA in range(1, 6)]
    raise KeyError(f"unknown figure preset {name!r}; choose from {', '.join(FIGURES)}")


# --------------------------------------------------------------------------
# Sweeps


def _config_entries(cfg):
    return _parse_lines(render_scenario(cfg))


def expand_axes(base, axes):
    """All configurations of the Cartesian product of `axes` (key -> values)."""
    keys = list(axes)
    points = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        entries = _config_entries(base)
        entries["outputs"] = ", ".join(base.outputs)
        for key, value in zip(keys, combo):
            if key not in entries and not _SPECIES_KEY.match(key) and key not in _TOP_KEYS:
                raise ParseError("sweep axis references an unknown key", key)
            entries[key] = str(value)
        points.append((dict(zip(keys, combo)), entries))
    return points


def _run_point(args):
    index, values, entries, out_dir = args
    row = {"point": index, **values}
    try:
        doc = "\n".join(f"{k} = {v}" for k, v in entries.items())
        cfg = parse_scenario(doc)
        if out_dir is not None:
            result = run_scenario(cfg, Path(out_dir) / f"point_{index:04d}")
        else:
            result = solve(cfg)
        solver = "numeric" if result.trajectory is not None else "analytic"
        rep = report_from_series(result.times, result.excited_series(solver), None,
                                 cfg.predicted_plateau)
        row.update(plateau_estimate=rep.plateau_estimate,
                   plateau_predicted=rep.plateau_predicted,
                   plateau_error=rep.plateau_error,
                   oscillation_amplitude=rep.oscillation_amplitude,
                   law_status=rep.law_status, error="")
    except Exception as exc:  # recorded per point, never aborts the sweep
        row.update(plateau_estimate=float("nan"), plateau_predicted=float("nan"),
                   plateau_error=float("nan"), oscillation_amplitude=float("nan"),
                   law_status="error", error=f"{type(exc).__name__}: {exc}")
    return row


SUMMARY_FIELDS = ("plateau_estimate", "plateau_predicted", "plateau_error",
                  "oscillation_amplitude", "law_status", "error")


def sweep(base, axes=None, jobs=1, out_dir=None, max_points=10_000):
    """Run every point of the parameter grid; returns one summary row per point.

    With ``jobs > 1`` points run in separate processes. Rows come back in
    grid order regardless of completion order. When `out_dir` is given each
    point writes into its own ``point_NNNN`` subdirectory and the summary is
    written to ``summary.csv``.
    """
    axes = dict(axes or {})
    points = expand_axes(base, axes)
    if len(points) > max_points:
        raise ValueError(f"sweep has {len(points)} points, limit is {max_points}")
    tasks = [(i, values, entries, out_dir) for i, (values, entries) in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]
    if out_dir is not None:
        write_summary(Path(out_dir) / "summary.csv", rows, list(axes))
    return rows


def write_summary(path, rows, axis_keys):
    header = ["point", *axis_keys, *SUMMARY_FIELDS]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[h]) if isinstance(row[h], float) else row[h] for h in header])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))
