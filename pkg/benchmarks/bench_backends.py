"""Benchmark the compiled simulation kernels against the pure-Python ones.

Each kernel entry point runs on identical inputs through both backends;
the best-of-N wall-clock time per call and the resulting speedup are
printed as a table.  Outputs are also checked for bit identity first, so
a speedup never comes from computing something different.

Usage:
    python3 benchmarks/bench_backends.py [--repeat 5] [--steps 12000]
"""

import argparse
import math
import sys
import time

import numpy as np

from platestab import DisturbanceProfile, default_geometry, delay_steps
from platestab import _pure


def closed_loop_args(n, dt, plant_kind):
    """Argument tuple for the run_closed_loop kernels (both backends)."""
    geo = default_geometry()
    profile = DisturbanceProfile(
        kind="sine", pitch_amplitude=0.1, roll_amplitude=0.05, freq_low=0.5,
        freq_high=2.0, sweep_time=1.5,
    )
    dist = profile.samples(n, dt)
    rng = np.random.default_rng(5)
    noise = 0.01 * rng.standard_normal((n, 2))
    if plant_kind == 1:
        taus = [(2.9, 0.07, 0.47), (2.5, 0.05, 0.40), (1.0, 0.1, 0.5)]
        fg = [k for k, _, _ in taus]
        fa = [math.exp(-dt / tm) for _, _, tm in taus]
        fdelay = [delay_steps(td, dt) for _, td, _ in taus]
    else:
        fg, fa, fdelay = [0.0] * 3, [0.0] * 3, [0] * 3
    return (
        n,
        dt,
        [j.x for j in geo.joint_top],
        [j.y for j in geo.joint_top],
        [j.z for j in geo.joint_top],
        geo.base_height,
        plant_kind,
        geo.servo_home,
        600.0,
        0.02,
        0.0,
        180.0,
        geo.crank_length,
        geo.link_length,
        fg,
        fa,
        fdelay,
        [14.0, 14.0, 14.0],
        [900.0, 900.0, 900.0],
        [0.0, 0.0, 0.0],
        -45.0,
        45.0,
        dist,
        noise,
    )


def best_of(fn, args, repeat):
    best = math.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="compare the compiled and pure-Python simulation kernels"
    )
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions per kernel (best is kept)")
    parser.add_argument("--steps", type=int, default=12000,
                        help="simulation steps per call (12000 = 60 s at 200 Hz)")
    args = parser.parse_args(argv)
    if args.repeat < 1 or args.steps < 10:
        parser.error("--repeat must be >= 1 and --steps >= 10")

    try:
        from platestab import _core
    except ImportError:
        print("compiled extension is not available; nothing to compare", file=sys.stderr)
        return 1

    n, dt = args.steps, 0.005
    gain, dead, tau = 1.7, 0.08, 0.52
    alpha = math.exp(-dt / tau)
    delay = delay_steps(dead, dt)
    cases = [
        ("closed loop / mechanistic", "run_closed_loop", closed_loop_args(n, dt, 0)),
        ("closed loop / fopdt legs", "run_closed_loop", closed_loop_args(n, dt, 1)),
        ("fopdt open step", "fopdt_open_step", (gain, alpha, delay, 1.0, n)),
        ("fopdt closed p", "fopdt_closed_p", (gain, alpha, delay, 2.5, 1.0, n)),
        ("fopdt closed pid", "fopdt_closed_pid",
         (gain, alpha, delay, 4.0, 12.0, 0.05, dt, -1e6, 1e6, 1.0, n)),
    ]

    print(f"backend comparison, {n} steps per call, best of {args.repeat}\n")
    header = f"  {'kernel':28s} {'pure':>12s} {'compiled':>12s} {'speedup':>9s}"
    print(header)
    print("  " + "-" * (len(header) - 2))
    for label, name, call_args in cases:
        pure_fn = getattr(_pure, name)
        core_fn = getattr(_core, name)
        if not np.array_equal(pure_fn(*call_args), core_fn(*call_args)):
            print(f"  {label:28s} outputs differ between backends", file=sys.stderr)
            return 1
        t_pure = best_of(pure_fn, call_args, args.repeat)
        t_core = best_of(core_fn, call_args, args.repeat)
        print(f"  {label:28s} {1e3 * t_pure:9.2f} ms {1e3 * t_core:9.2f} ms "
              f"{t_pure / t_core:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
