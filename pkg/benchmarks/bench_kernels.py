"""Time the numba kernels against the numpy/scipy fallback.

Each backend runs in a fresh interpreter because the choice is made at
import time from ``WGQED_DISABLE_NUMBA``. The first call in each process is
excluded so numba compilation is not counted.

    python benchmarks/bench_kernels.py [--sites 2001] [--t-max 300] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from wgqed._accel import backend_name
from wgqed.lattice import EmitterSpecies, SystemSpec, WaveguideSpec
from wgqed.propagator import EvolveOptions, TimeGrid, simulate

sites, t_max, repeat = int(sys.argv[1]), float(sys.argv[2]), int(sys.argv[3])
system = SystemSpec(WaveguideSpec(0.0, 0.5, sites), (EmitterSpecies("A", 0.0, 0.07, 4, 2),))
grid = TimeGrid(0.0, t_max, 201)
out = {"kernels": backend_name()}
for integrator in ("rk4", "chebyshev"):
    opts = EvolveOptions(backend=integrator)
    simulate(system, TimeGrid(0.0, 1.0, 2), opts)          # warm-up / JIT
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        tr = simulate(system, grid, opts)
        best = min(best, time.perf_counter() - start)
    out[integrator] = {"seconds": best, "final": abs(tr.excited_amp["A"][-1])}
print(json.dumps(out))
"""


def run(disable, args):
    env = dict(os.environ, WGQED_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run(
        [sys.executable, "-c", CHILD, str(args.sites), str(args.t_max), str(args.repeat)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sites", type=int, default=2001)
    parser.add_argument("--t-max", type=float, default=300.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    results = {"numba": run(False, args), "numpy": run(True, args)}
    print(f"N={args.sites}, t_max*2J={args.t_max:g}, best of {args.repeat}")
    print(f"{'integrator':<12}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'|diff|':>10}")
    for integrator in ("rk4", "chebyshev"):
        fast, slow = results["numba"][integrator], results["numpy"][integrator]
        print(f"{integrator:<12}{fast['seconds']:>12.3f}{slow['seconds']:>12.3f}"
              f"{slow['seconds'] / fast['seconds']:>10.2f}"
              f"{abs(fast['final'] - slow['final']):>10.1e}")
    if results["numba"]["kernels"] != "numba":
        print("note: numba is unavailable here, both columns used the numpy path")


if __name__ == "__main__":
    main()
