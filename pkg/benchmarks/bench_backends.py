"""Compare the pure-numpy and numba kernel backends.

Times the hot numeric kernels head to head in one process, then
(optionally) times a full bundled scenario under each backend in
subprocesses, since the backend is chosen once at import time.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --repeats 30 --preset indoor_corridor
"""

import argparse
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from relaysim._kernels import numpy_impl

try:
    from relaysim._kernels import numba_impl
except ImportError:
    numba_impl = None


def make_workloads(rng):
    n_seg = 200
    a = rng.uniform(-20.0, 20.0, size=(n_seg, 2))
    b = a + rng.uniform(-6.0, 6.0, size=(n_seg, 2))
    ax, ay = a[:, 0].copy(), a[:, 1].copy()
    bx, by = b[:, 0].copy(), b[:, 1].copy()
    loss = rng.uniform(0.5, 12.0, size=n_seg)
    rays = np.linspace(-math.pi, math.pi, 64)
    scan_angles = np.linspace(-math.pi / 2, math.pi / 2, 49)
    scan_rssi = rng.uniform(-90.0, -25.0, size=49)
    grid = np.linspace(-1.48, 1.48, 171)
    offsets = rng.uniform(-math.pi, math.pi, size=4096)
    pitch = math.pi / 24
    return {
        "raycast_distances": lambda m: m.raycast_distances(
            0.0, 0.0, rays, ax, ay, bx, by, 10.0),
        "path_attenuation_db": lambda m: m.path_attenuation_db(
            -15.0, -3.0, 15.0, 3.0, ax, ay, bx, by, loss),
        "wca_reduce": lambda m: m.wca_reduce(scan_angles, scan_rssi, 10.0),
        "error_step_grid": lambda m: m.error_step_grid(
            grid, 12, pitch, 10.0, 10.0),
        "directional_gain_db": lambda m: m.directional_gain_db(offsets, 10.0),
    }


def best_ms(fn, repeats):
    return min(timeit.repeat(fn, number=1, repeat=repeats)) * 1e3


def bench_kernels(repeats):
    rng = np.random.default_rng(99)
    workloads = make_workloads(rng)
    print(f"{'kernel':<22}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, call in workloads.items():
        t_np = best_ms(lambda: call(numpy_impl), repeats)
        if numba_impl is None:
            print(f"{name:<22}{t_np:>10.4f}{'n/a':>10}{'n/a':>9}")
            continue
        call(numba_impl)  # compile outside the timed region
        t_nb = best_ms(lambda: call(numba_impl), repeats)
        print(f"{name:<22}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x")


def bench_preset(preset, repeats):
    snippet = (
        "import time, relaysim.metrics_cli as mc;"
        f"cfg = mc.load_scenario({preset!r});"
        "mc.run_scenario(cfg);"  # warm caches before timing
        "t0 = time.perf_counter();"
        f"[mc.run_scenario(cfg) for _ in range({repeats})];"
        f"print((time.perf_counter() - t0) / {repeats})"
    )
    print(f"\nfull run of '{preset}' (mean of {repeats}):")
    for backend in ("numpy", "numba") if numba_impl else ("numpy",):
        env = dict(os.environ, RELAYSIM_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", snippet], env=env,
                             capture_output=True, text=True, check=True)
        print(f"  {backend:<8}{float(out.stdout) * 1e3:>10.1f} ms")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50,
                        help="timing repetitions per kernel (best-of)")
    parser.add_argument("--preset", default=None,
                        help="also time a full scenario under each backend")
    parser.add_argument("--preset-repeats", type=int, default=3)
    args = parser.parse_args(argv)
    if numba_impl is None:
        print("numba not importable; reporting numpy backend only\n")
    bench_kernels(args.repeats)
    if args.preset:
        bench_preset(args.preset, args.preset_repeats)


if __name__ == "__main__":
    main()
