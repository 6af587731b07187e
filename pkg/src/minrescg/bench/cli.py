"""Command line entry point: ``minrescg solve | sweep | fetch | storage``.

Exit codes: 0 when every run converged, 1 when some solver failed, 2 on a
setup error (bad arguments, unreadable matrix, missing download, failed
preconditioner or deflation basis).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import FetchError, MatrixMarketError, MinresCGError, SpecError
from ..shiftreal.sweep import load_sweep_config, run_sweep, write_sweep_csv
from .experiment import PROFILES, RESULT_COLUMNS, ExperimentSpec, run_experiment, storage_vectors
from .fetch import KNOWN_MATRICES, fetch_matrix

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAILED, EXIT_SETUP = 0, 1, 2


def _split(values):
    out = []
    for v in values or []:
        out.extend(t for t in v.split(",") if t)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minrescg", description="Nested MINRES-CG solvers and benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run solver x preconditioner combinations on one matrix")
    s.add_argument("--matrix", required=True, help="Matrix Market path or collection id")
    s.add_argument("--shift", type=float, default=0.0, help="solve with A - shift*I")
    s.add_argument("--solver", action="append", required=True,
                   help="minres, cg, minres-cg, minres-cg-star, gmres:<m>, fgmres:<m1>:<m2>, bicgstab "
                        "(repeat or comma-separate)")
    s.add_argument("--precond", action="append", help="none, ilu0, milu:<tol>, ilut:<tol>, "
                   "ildlt:<lvl>:<tol>, ildlt-mod:<lvl>:<tol>, smw:<inner> (repeat or comma-separate)")
    s.add_argument("--profile", choices=sorted(PROFILES), default="suitesparse",
                   help="default tolerances and iteration cap")
    s.add_argument("--rtol", type=float, help="outer relative residual tolerance")
    s.add_argument("--itol", type=float, help="inner tolerance for nested schemes")
    s.add_argument("--maxit", type=int, help="maximum (total) iterations")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rhs", default="random", help="random, ones, or a text file with one entry per line")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--cache-dir", help="download and deflation-basis cache")
    s.add_argument("--out", required=True, help="output directory")

    w = sub.add_parser("sweep", help="solve over a grid of complex shifts")
    w.add_argument("--config", required=True, help="TOML sweep configuration")
    w.add_argument("--out", help="CSV path (overrides the config's output)")
    w.add_argument("--workers", type=int)

    f = sub.add_parser("fetch", help="download collection matrices into the cache")
    f.add_argument("ids", nargs="+", help=f"one or more of: {', '.join(i.name for i in KNOWN_MATRICES.values())}")
    f.add_argument("--cache-dir")
    f.add_argument("--offline", action="store_true", help="use the cache only")

    st = sub.add_parser("storage", help="auxiliary vector counts per solver")
    st.add_argument("--solver", action="append", required=True)
    st.add_argument("-k", type=int, help="number of deflation vectors for the nested schemes")
    return p


def _cmd_solve(args) -> int:
    rtol, itol, maxit = PROFILES[args.profile]
    spec = ExperimentSpec(
        matrix=args.matrix,
        solvers=_split(args.solver),
        preconds=_split(args.precond) or ["ilu0"],
        shift=args.shift,
        rhs=args.rhs,
        seed=args.seed,
        rel_tol=args.rtol if args.rtol is not None else rtol,
        inner_tol=args.itol if args.itol is not None else itol,
        max_iters=args.maxit if args.maxit is not None else maxit,
        out_dir=args.out,
        workers=args.workers,
        cache_dir=args.cache_dir,
    )
    rows, _ = run_experiment(spec)
    cols = RESULT_COLUMNS[:-1]
    table = [list(cols)] + [[str(v) for v in r.csv_values(with_time=False)] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(cols))]
    for line in table:
        print("  ".join(v.ljust(wd) for v, wd in zip(line, widths)).rstrip())
    for r in rows:
        if r.status == "setup":
            print(f"setup failure for {r.solver}/{r.precond}: {r.message}", file=sys.stderr)
    if any(r.status == "setup" for r in rows):
        return EXIT_SETUP
    return EXIT_OK if all(r.converged for r in rows) else EXIT_FAILED


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    out = args.out or cfg.output or "sweep.csv"
    rows = run_sweep(cfg)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out)
    ok = sum(r.converged for r in rows)
    print(f"{ok}/{len(rows)} shifts converged; wrote {out}")
    if any(r.status == "setup" for r in rows):
        return EXIT_SETUP
    return EXIT_OK if ok == len(rows) else EXIT_FAILED


def _cmd_fetch(args) -> int:
    for name in args.ids:
        print(fetch_matrix(name, args.cache_dir, offline=args.offline or None))
    return EXIT_OK


def _cmd_storage(args) -> int:
    for s in _split(args.solver):
        v = storage_vectors(s, args.k)
        print(f"{s}\t{'n/a' if v is None else v}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"solve": _cmd_solve, "sweep": _cmd_sweep, "fetch": _cmd_fetch, "storage": _cmd_storage}[args.command]
    try:
        return handler(args)
    except (SpecError, FetchError, MatrixMarketError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SETUP
    except (MinresCGError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SETUP


if __name__ == "__main__":
    sys.exit(main())
