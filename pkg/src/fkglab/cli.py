"""Command-line front end: ``fkg-lab {compute,verify,search,series,bench}``.

Every report is ``{"schema": ..., "config": ..., "result": ...}``.  The
config block records every effective setting that can change the result
(seed and caps included, even when defaulted).  ``--workers`` and
``--output`` are left out because they never change the content.

Exit codes: 0 success, 1 a property failed, 2 bad usage or input,
3 a cap or budget refusal.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from typing import Any, Sequence

from fkglab import codec, engine, series, verify
from fkglab.lattice import (
    GridFunction,
    GridIndicator,
    LatticeError,
    RectangleFamily,
    StaircaseSeq,
    random_staircase,
)
from fkglab.oracles import StaircaseOracle, oracle_for

log = logging.getLogger("fkglab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3


class InputError(ValueError):
    def __init__(self, path: str, msg: str) -> None:
        super().__init__(f"{path}: {msg}")
        self.path = path


# -- input parsing --------------------------------------------------------


def _parse_function(obj: Any, path: str):
    if not isinstance(obj, dict):
        raise InputError(path, "expected an object")
    try:
        if "a" in obj:
            return StaircaseSeq.from_json(obj)
        if "cells" in obj:
            return GridIndicator.from_json(obj)
        if "values" in obj:
            return GridFunction.from_json(obj)
    except KeyError as exc:
        raise InputError(path, f"missing field {exc.args[0]!r}") from None
    except (LatticeError, ValueError, TypeError) as exc:
        raise InputError(path, str(exc)) from None
    raise InputError(path, "expected a staircase {m, a}, indicator {m, cells} or grid function {m, values}")


def parse_functions(doc: Any) -> list | RectangleFamily:
    """Decode an input document into functions of one resolution, or a rectangle family."""
    if isinstance(doc, dict) and "rects" in doc:
        try:
            return RectangleFamily.from_json(doc)
        except (LatticeError, ValueError, KeyError, TypeError) as exc:
            raise InputError("$.rects", str(exc)) from None
    if isinstance(doc, dict) and "functions" in doc:
        items, prefix = doc["functions"], "$.functions"
    elif isinstance(doc, list):
        items, prefix = doc, "$"
    else:
        raise InputError("$", "expected {'functions': [...]}, a list of functions, or {'k', 'rects'}")
    if not isinstance(items, list) or not items:
        raise InputError(prefix, "expected a nonempty list of functions")
    fs = [_parse_function(obj, f"{prefix}[{i}]") for i, obj in enumerate(items)]
    m = fs[0].m
    for i, f in enumerate(fs):
        if f.m != m:
            raise InputError(f"{prefix}[{i}].m", f"mismatched resolution: m={f.m}, expected m={m}")
    return fs


def _load(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError("$", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise InputError("$", f"cannot read {path}: {exc.strerror}") from None


# -- output ---------------------------------------------------------------


def _config(args: argparse.Namespace, **extra) -> dict:
    skip = {"func", "output", "workers", "verbose"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["prng"] = verify.PRNG
    cfg["caps"] = {
        "naive": engine.NAIVE_CAP,
        "partition": engine.PARTITION_CAP,
        "series_n": series.EXTRACT_CAP,
    }
    cfg.update(extra)
    return cfg


def _emit(args: argparse.Namespace, result: Any, rows: list[list[str]] | None, **extra) -> None:
    cfg = _config(args, **extra)
    if args.format == "csv":
        if rows is None:
            raise InputError("$", "this command has no CSV form")
        text = "# config: " + json.dumps(cfg, sort_keys=True) + "\n" + verify.to_csv(rows)
    else:
        doc = {"schema": verify.SCHEMA, "config": cfg, "result": result}
        text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------


def cmd_compute(args: argparse.Namespace) -> int:
    fs = parse_functions(_load(args.input))
    if isinstance(fs, RectangleFamily):
        count = fs.n
    else:
        count = len(fs)
    if args.n is not None and args.n != count:
        if count == 1 and not isinstance(fs, RectangleFamily) and args.n >= 1:
            fs = fs * args.n
        else:
            raise InputError("$", f"--n {args.n} does not match the {count} functions in the input")
    oracle = oracle_for(fs)
    res = engine.en(oracle, args.backend)
    _emit(args, res.to_json(), [["value", "backend", "terms"], [codec.fmt(res.value), res.backend, str(res.terms)]])
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.all == (args.prop is not None):
        raise InputError("$", "give exactly one of --prop or --all")
    props = verify.PROPOSITIONS if args.all else (args.prop,)
    reports, refused = [], []
    for p in props:
        try:
            reports.append(verify.check_proposition(p, args.m, args.n, args.budget, args.seed, args.trials))
        except engine.CapExceeded as exc:
            if not args.all:
                raise
            refused.append({"prop": p, "refused": str(exc)})
    failed = any(not r.ok for r in reports)
    if args.all:
        summary = [{"prop": r.prop_id, "instances": r.instances_checked, "failures": len(r.failures)} for r in reports]
        result = {"summary": summary + refused, "reports": [r.to_json() for r in reports]}
        rows = [["prop", "instances", "failures"]] + [
            [s["prop"], str(s.get("instances", "")), str(s.get("failures", "refused"))] for s in summary + refused
        ]
    else:
        result = reports[0].to_json()
        rows = reports[0].csv_rows()
    _emit(args, result, rows)
    if failed:
        return EXIT_FAIL
    return EXIT_REFUSED if refused else EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    mode = args.mode
    if mode == "exhaustive":
        rep = verify.exhaustive_scan(args.m, args.n, args.target, args.budget, args.workers)
    elif mode == "kappa3":
        rep = verify.exhaustive_scan(args.m, 3, "kappa3", args.budget, args.workers)
    elif mode == "random":
        rep = verify.random_scan(args.m, args.n, args.trials, args.seed, args.workers)
    elif mode == "rectangle":
        rep = verify.rectangle_scan(args.k, args.n, args.trials, args.seed, args.workers)
    else:
        arg = verify.argmin_structure(args.m, args.n, args.budget)
        _emit(args, arg.to_json(), [["row", "tuple"]] + [["extremal", repr(t)] for t in arg.to_json()["extremal"]])
        return EXIT_OK if arg.all_constant else EXIT_FAIL
    log.info("scan finished in %.3fs", rep.elapsed)
    _emit(args, rep.to_json(), rep.csv_rows())
    # negative kappa3 values are the expected outcome, not a positivity violation
    if rep.target == "en" and rep.violations:
        return EXIT_FAIL
    if rep.extra.get("closed_form_mismatches"):
        return EXIT_FAIL
    return EXIT_OK


def _series_inputs(args: argparse.Namespace) -> list:
    fs = parse_functions(_load(args.input))
    if isinstance(fs, RectangleFamily):
        raise InputError("$", "series commands take grid functions, not rectangles")
    return fs


def cmd_series(args: argparse.Namespace) -> int:
    fs = _series_inputs(args)
    if args.mode == "gmean":
        F = series.GridSeries.one_minus({i: f for i, f in enumerate(fs, start=1)}, args.degree)
        cs = series.geometric_mean_coeffs(F, args.degree)
        result = {"degree": args.degree, "coeffs": [codec.fmt(c) for c in cs]}
        rows = [["j", "c_j"]] + [[str(j), codec.fmt(c)] for j, c in enumerate(cs, start=1)]
        _emit(args, result, rows)
        return EXIT_OK
    if args.n is not None and args.n != len(fs):
        raise InputError("$.functions", f"--n {args.n} does not match the {len(fs)} functions in the input")
    ks, N = series.primes_encoding(len(fs))
    coeff = series.extract_en_via_series(fs, max_n=args.max_n)
    direct = engine.en_partition(oracle_for(fs)).value
    result = {
        "exponents": ks,
        "degree": N,
        "coefficient": codec.fmt(coeff),
        "en_partition": codec.fmt(direct),
        "match": coeff == direct,
    }
    rows = [["degree", "coefficient", "en_partition", "match"], [str(N), codec.fmt(coeff), codec.fmt(direct), str(coeff == direct)]]
    _emit(args, result, rows)
    return EXIT_OK if coeff == direct else EXIT_FAIL


def _parse_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(text)]
    except ValueError:
        raise InputError("--n", f"expected N or LO..HI, got {text!r}") from None


def cmd_bench(args: argparse.Namespace) -> int:
    rng = random.Random(args.seed)
    rows = []
    if args.mode == "backends":
        rows.append(["backend", "n", "m", "terms", "seconds"])
        for n in _parse_range(args.n):
            fs = [random_staircase(args.m, rng) for _ in range(n)]
            for b in args.backend:
                oracle = StaircaseOracle(fs)
                t0 = time.perf_counter()
                try:
                    res = engine.en(oracle, b)
                except engine.CapExceeded:
                    rows.append([b, str(n), str(args.m), "refused", ""])
                    continue
                rows.append([b, str(n), str(args.m), str(res.terms), f"{time.perf_counter() - t0:.6f}"])
    else:
        n = _parse_range(args.n)[-1]
        fs = [random_staircase(args.m, rng) for _ in range(n)]
        t0 = time.perf_counter()
        table = StaircaseOracle(fs).warm()
        rows.append(["m", "n", "moments", "seconds"])
        rows.append([str(args.m), str(n), str(len(table) - 1), f"{time.perf_counter() - t0:.6f}"])
    header, body = rows[0], rows[1:]
    _emit(args, [dict(zip(header, r)) for r in body], rows)
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="parallel processes for scans; output is unaffected")
    p.add_argument("--budget", type=int, default=verify.DEFAULT_BUDGET, help="max evaluations before refusing")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fkg-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", parents=[_common()], help="evaluate E_n on an input file")
    p.add_argument("input")
    p.add_argument("--backend", choices=engine.BACKENDS, default="partition")
    p.add_argument("--n", type=int, help="repeat a single input function n times, or assert the count")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", parents=[_common()], help="check propositions exhaustively")
    p.add_argument("--prop", choices=verify.PROPOSITIONS)
    p.add_argument("--all", action="store_true")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", parents=[_common()], help="positivity scans and counterexample search")
    p.add_argument("mode", choices=("exhaustive", "random", "kappa3", "rectangle", "argmin"))
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--target", choices=verify.TARGETS, default="en")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("series", parents=[_common()], help="geometric-mean series and the primes encoding")
    p.add_argument("mode", choices=("gmean", "equiv"))
    p.add_argument("input")
    p.add_argument("--degree", type=int, default=6)
    p.add_argument("--n", type=int)
    p.add_argument("--max-n", type=int, default=series.EXTRACT_CAP)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("bench", parents=[_common()], help="timings")
    p.add_argument("mode", choices=("backends", "oracle"))
    p.add_argument("--n", default=None, help="N or LO..HI")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--backend", choices=engine.BACKENDS, action="append")
    p.set_defaults(func=cmd_bench, format=None)
    return parser


_SEARCH_DEFAULTS = {
    "exhaustive": {"m": 3, "n": 3},
    "kappa3": {"m": 2, "n": 3},
    "random": {"m": 10, "n": 6},
    "rectangle": {"n": 5},
    "argmin": {"m": 2, "n": 3},
}


def _fill_defaults(args: argparse.Namespace) -> None:
    if args.command == "search":
        for key, val in _SEARCH_DEFAULTS[args.mode].items():
            if getattr(args, key) is None:
                setattr(args, key, val)
        if args.mode == "kappa3":
            args.n = 3
            args.target = "kappa3"
        if args.mode == "rectangle":
            args.m = None
        else:
            args.k = None
    if args.command == "bench":
        if args.format is None:
            args.format = "csv"
        if args.mode == "backends":
            args.n = args.n or "6..9"
            args.m = args.m or 4
            args.backend = args.backend or list(engine.BACKENDS)
        else:
            args.n = args.n or "10"
            args.m = args.m or 50


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _fill_defaults(args)
    try:
        return args.func(args)
    except engine.CapExceeded as exc:
        print(f"fkg-lab: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except InputError as exc:
        print(f"fkg-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LatticeError, series.SeriesError, ValueError) as exc:
        print(f"fkg-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
