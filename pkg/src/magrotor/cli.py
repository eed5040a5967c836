"""magrotor command line.

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import ConfigError
from .hamiltonian import (FrequencySet, MagnetParams, build_exact_hamiltonian, build_quadratic_HG,
                          compute_frequencies, validity_report)
from .pipeline import SOURCES, run_bosonization_pipeline
from .rotor import Rep2Basis
from .spectra import bogoliubov_diagonalize, decoupled_comparison, reduced_model_comparison, sparse_lowest_eigs
from .trap import NonConfiningTrap, TrapParams
from .validation import SUITES

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get("MAGROTOR_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MAGROTOR_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("MAGROTOR_THREADS must be a positive integer")
    return n


def _ordered_map(fn: Callable, items: Sequence) -> list:
    """Map in parallel (bounded by MAGROTOR_THREADS), results in input order."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _num(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.17g}"


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv(header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _load(args) -> tuple[MagnetParams, TrapParams]:
    if not args.material or not args.trap:
        raise UsageError("--material and --trap are required for this command")
    for p in (args.material, args.trap):
        if not Path(p).is_file():
            raise UsageError(f"config file not found: {p}")
    return MagnetParams.from_file(args.material), TrapParams.from_file(args.trap)


def _freqs(args) -> FrequencySet:
    magnet, trap = _load(args)
    return compute_frequencies(magnet, trap, args.jref)


# ---------------------------------------------------------------------------
# commands

FREQ_COLUMNS = ["R_m", "w_L", "w_I", "w_D", "w_T", "w_z", "eta", "eta_prime", "S",
                "w_L>=w_I", "w_I>>w_D", "w_I>>w_T", "w_I>>w_z", "neglect_nonquadratic", "status"]


def cmd_frequencies(args) -> int:
    magnet, trap = _load(args)
    if args.radii is not None:
        radii = list(args.radii)
    elif args.points:
        radii = list(np.geomspace(args.rmin, args.rmax, args.points))
    else:
        radii = []
    if any(r <= 0 for r in radii):
        raise UsageError("radii must be positive")

    def row(R):
        try:
            f = compute_frequencies(magnet.with_radius(R), trap)
        except NonConfiningTrap:
            return [_num(R)] + ["nan"] * 8 + ["0"] * 5 + ["non-confining"]
        except ValueError as exc:
            return [_num(R)] + ["nan"] * 8 + ["0"] * 5 + [f"error: {exc}"]
        rep = validity_report(f)
        h = rep.hierarchy
        return [_num(R), _num(f.w_L), _num(f.w_I), _num(f.w_D), _num(f.w_T), _num(f.w_z), _num(f.eta),
                _num(f.eta_prime), _num(f.S), _num(h["w_L >= w_I"]), _num(h["w_I >> w_D"]), _num(h["w_I >> w_T"]),
                _num(h["w_I >> w_z"]), _num(rep.neglect_nonquadratic), "ok"]

    _write(_csv(FREQ_COLUMNS, _ordered_map(row, radii)), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = {}
    ok = True
    for name in names:
        kw = {"seed": args.seed} if name == "algebra" else {}
        if name == "commutators" and args.jmax is not None:
            kw["jmax"] = args.jmax
        checks = SUITES[name](**kw)
        results[name] = [c.to_dict() for c in checks]
        ok = ok and all(c.passed for c in checks)
    doc = {"schema": "magrotor.validate/1", "version": __version__, "seed": args.seed,
           "suites": results, "passed": ok}
    _write(_json(doc), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bosonize(args) -> int:
    res = run_bosonization_pipeline()
    report = res.report()
    dominant = {}
    for src in SOURCES:
        for reason in ("non-quadratic", "eta^2"):
            rows = res.dominant_dropped(src, reason)
            if rows:
                dominant.setdefault(src, {})[reason] = [
                    {"monomial": d.monomial, "coefficient": d.coefficient.to_text(), "degree": str(d.degree)}
                    for d in rows]
    doc = {"schema": "magrotor.bosonize/1", "version": __version__, "checks": report["checks"],
           "floors": report["floors"], "dominant_dropped": dominant,
           "passed": not res.failures()}
    if args.material or args.trap:
        f = _freqs(args)
        form = res.form(f)
        doc["numeric"] = {"frequencies": json.loads(f.to_json()),
                          "quadratic_form": {"modes": list(form.modes),
                                             "A_real": form.A.real.tolist(), "A_imag": form.A.imag.tolist(),
                                             "B_real": form.B.real.tolist(), "B_imag": form.B.imag.tolist()}}
    if args.full:
        doc["dropped"] = report["dropped"]
    _write(_json(doc), args.out)
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_spectrum(args) -> int:
    f = _freqs(args)
    modes = bogoliubov_diagonalize(build_quadratic_HG(f))
    doc = {"schema": "magrotor.spectrum/1", "version": __version__, "seed": args.seed,
           "frequencies": json.loads(f.to_json()), "normal_modes": modes.to_dict(),
           "validity": validity_report(f).to_dict()}
    if args.exact:
        if args.smax is None:
            raise UsageError("--exact needs --smax (the spin of the small exact model)")
        S = args.smax
        jmax = S + (args.jmax if args.jmax is not None else 4)
        cut = args.fock_cutoff if args.fock_cutoff is not None else 0
        small = f.replace(S=float(S), J_ref=float(S))
        basis = Rep2Basis(S, jmax)
        cutoffs = {m: cut for m in ("c_x", "c_y", "c_z")} if cut > 0 else None
        include = ("H0", "HI", "VD", "VP") if cutoffs else ("H0", "HI", "VD")
        H = build_exact_hamiltonian(small, basis, cutoffs, lamb_dicke_order=1 if cutoffs else 0, include=include)
        doc["exact"] = {"S": S, "Jmax": jmax, "fock_cutoff": cut, "dim": H.matrix.shape[0],
                        "lowest": [float(x) for x in sparse_lowest_eigs(H, min(args.count, H.matrix.shape[0]), seed=args.seed)]}
    _write(_json(doc), args.out)
    return EXIT_OK


COMPARE_COLUMNS = ["S", "mode", "exact_gap", "predicted", "relative_error", "tolerance", "overlap"]


def _compare_dims(S: float, extra: int) -> int:
    return int((extra + 1) * (2 * S + 1))


def cmd_compare(args) -> int:
    f = _freqs(args)
    spins = sorted(args.s)
    if args.smax is not None:
        spins = [s for s in spins if s <= args.smax]
    if any(s < 1 or (2 * s) % 1 for s in spins):
        raise UsageError("spins must be integers or half-integers >= 1")
    extra = args.jmax if args.jmax is not None else 6
    worst_dim = max((_compare_dims(s, extra) for s in spins), default=0)
    mem_mb = 3 * 16 * worst_dim ** 2 / 2 ** 20
    if mem_mb > args.max_memory_mb:
        sys.stderr.write(f"refusing: dense blocks need about {mem_mb:.0f} MB (limit {args.max_memory_mb} MB)\n")
        return EXIT_USAGE

    def run(S):
        if args.zero_couplings:
            return decoupled_comparison(f, S, extra)
        return reduced_model_comparison(f, S, extra)

    results = _ordered_map(run, spins)
    rows, ok = [], True
    for r in results:
        tol = 3 / math.sqrt(r.S)
        for mode in sorted(r.gaps):
            err = r.errors[mode]
            ok = ok and err <= tol
            rows.append([_num(r.S), mode, _num(r.gaps[mode]), _num(r.predicted[mode]), _num(err), _num(tol),
                         _num(r.overlaps[mode])])
    worst = [r.worst_error for r in results]
    trend = all(b < a for a, b in zip(worst, worst[1:]))
    if len(worst) > 1 and not args.zero_couplings:
        ok = ok and trend
    _write(_csv(COMPARE_COLUMNS, rows), args.out)
    summary = ", ".join(f"S={_num(r.S)}: {w:.3e}" for r, w in zip(results, worst))
    sys.stderr.write(f"worst relative error per S: {summary}; decreasing: {'yes' if trend else 'no'}\n")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--material", help="material config (radius_m, density_kg_m3, spin_per_atom, T_b_K, ...)")
    common.add_argument("--trap", help="trap config (B0_T, Bp_T_per_m, Bpp_T_per_m2)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for random sampling and iterative solvers")
    common.add_argument("--jmax", type=int, help="rotor cutoff above S (Jmax = S + JMAX); absolute for validate")
    common.add_argument("--smax", type=float, help="largest spin to use")
    common.add_argument("--fock-cutoff", type=int, help="largest centre-of-mass occupation kept")
    common.add_argument("--jref", type=float, help="reference J for the boson expansion (default S)")

    p = argparse.ArgumentParser(prog="magrotor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("frequencies", parents=[common], help="frequency table over a radius sweep (CSV)")
    f.add_argument("--radii", type=float, nargs="*", help="explicit radii in metres")
    f.add_argument("--rmin", type=float, default=1e-9)
    f.add_argument("--rmax", type=float, default=1e-7)
    f.add_argument("--points", type=int, default=0, help="log-spaced points between rmin and rmax")
    f.set_defaults(func=cmd_frequencies)

    v = sub.add_parser("validate", parents=[common], help="run self-check suites (JSON)")
    v.add_argument("--suite", choices=["all", *SUITES], default="all")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bosonize", parents=[common], help="symbolic boson expansion and coefficient checks (JSON)")
    b.add_argument("--full", action="store_true", help="include every dropped term")
    b.set_defaults(func=cmd_bosonize)

    s = sub.add_parser("spectrum", parents=[common], help="normal modes of the quadratic Hamiltonian (JSON)")
    s.add_argument("--exact", action="store_true", help="also diagonalise a small exact model")
    s.add_argument("--count", type=int, default=6)
    s.set_defaults(func=cmd_spectrum)

    c = sub.add_parser("compare", parents=[common], help="exact vs quadratic gaps, reduced angular model (CSV)")
    c.add_argument("--s", type=float, nargs="+", default=[10, 20, 40], help="spins to compare")
    c.add_argument("--zero-couplings", action="store_true", help="H0 only, against -Delta and w_I")
    c.add_argument("--max-memory-mb", type=float, default=4096.0)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        for name in ("jmax", "fock_cutoff"):
            val = getattr(args, name, None)
            if val is not None and val < 0:
                raise UsageError(f"--{name.replace('_', '-')} must be non-negative")
        return args.func(args)
    except (UsageError, ConfigError, NonConfiningTrap) as exc:
        sys.stderr.write(f"magrotor: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
