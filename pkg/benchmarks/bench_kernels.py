"""Compiled kernels against their Python counterparts.

    python benchmarks/bench_kernels.py [--S 4] [--jmax 12] [--repeat 3]

Prints the best wall time of each kernel under both backends and the
speed-up.  The D-operator entries are also checked for agreement so a
fast but wrong build does not go unnoticed.
"""

import argparse
import time

import numpy as np

from magrotor import _pykernels
from magrotor.kernels import compiled_kernels
from magrotor.rotor import Rep2Basis


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cg_sweep(mod, top=8):
    def run():
        total = 0.0
        for tj1 in range(top + 1):
            for tj2 in range(top + 1):
                for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2):
                    for tm1 in range(-tj1, tj1 + 1, 2):
                        for tm2 in range(-tj2, tj2 + 1, 2):
                            if abs(tm1 + tm2) <= tJ:
                                total += mod.cg_float(tj1, tm1, tj2, tm2, tJ, tm1 + tm2)
        return total
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--S", type=int, default=4)
    ap.add_argument("--jmax", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if compiled_kernels is None:
        raise SystemExit("compiled kernels are not built (or MAGROTOR_PURE_PYTHON=1 is set)")

    basis = Rep2Basis(args.S, args.jmax)
    print(f"basis S={args.S} Jmax={args.jmax}: {basis.dim} states")
    entry_args = (basis.keys, basis.tJ, basis.tmJ, basis.tkJ, basis.tkS, 2, 2, 0, basis.key_base)
    cases = {
        "cg_float sweep": lambda mod: cg_sweep(mod),
        "state_keys": lambda mod: (lambda: mod.state_keys(basis.tJ, basis.tmJ, basis.tkJ, basis.tkS, basis.key_base)),
        "d_operator_entries": lambda mod: (lambda: mod.d_operator_entries(*entry_args)),
    }

    print(f"{'kernel':<22}{'python s':>12}{'compiled s':>12}{'speed-up':>10}")
    for name, make in cases.items():
        t_py, out_py = best_of(make(_pykernels), args.repeat)
        t_c, out_c = best_of(make(compiled_kernels), args.repeat)
        if name == "d_operator_entries":
            assert np.allclose(np.asarray(out_py[2]), np.asarray(out_c[2]), atol=1e-14)
        print(f"{name:<22}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>10.1f}")


if __name__ == "__main__":
    main()
