"""Command-line front end.

Exit status: 0 when every exact claim holds, 1 when one fails, 2 on a bad
configuration.
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

import numpy as np

from . import embeddings as emb
from . import paluszynski as pal
from .corpus import parse_corpus
from .grid import CubeFamily, Generator, Grid, load_grid_function, make_grid, parse_generator, sample_function, save_grid_function
from .norms import (
    bmo_norm,
    lipschitz_norm_diff,
    lipschitz_norm_osc,
    lp_norm,
    morrey_norm,
    norm_record,
    weak_lp_norm,
    weak_morrey_norm,
)
from .operators import commutator_apply, cz_apply, frac_integral

JOBS_ENV = "MORREYCZ_JOBS"


class ConfigError(ValueError):
    pass


# --- parsing helpers ---------------------------------------------------------------------


def parse_grid(text: str) -> Grid:
    """``1d:N[:lo:hi]`` or ``2d:N[:lo:hi]`` (square box, default ``[-2, 2]``)."""
    parts = text.split(":")
    if parts[0] not in ("1d", "2d") or len(parts) not in (2, 4):
        raise ConfigError(f"bad grid spec {text!r}; expected 1d:N[:lo:hi] or 2d:N[:lo:hi]")
    lo, hi = (float(parts[2]), float(parts[3])) if len(parts) == 4 else (-2.0, 2.0)
    return make_grid(int(parts[0][0]), lo, hi, int(parts[1]))


def parse_norm_spec(text: str) -> emb.NormSpec:
    """``kind:p[:q]``, e.g. ``morrey:4:2`` or ``weak_lp:3``."""
    kind, *nums = text.split(":")
    if not nums:
        raise ConfigError(f"bad norm spec {text!r}; expected kind:p[:q]")
    vals = [float(x) for x in nums]
    return emb.NormSpec(kind, vals[0], vals[1] if len(vals) > 1 else None)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    return max(1, int(os.environ.get(JOBS_ENV, "1")))


def _ordered_map(fn, items, jobs: int):
    """Map preserving input order, so output does not depend on the worker count."""
    if jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _corpus(args, grid: Grid) -> list[Generator]:
    return parse_corpus(args.corpus, grid)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _to_plain(obj.tolist())
    return obj


CSV_FIELDS = ("claim", "anchor", "function", "lhs", "rhs", "constant", "passed", "exact", "tolerance")


def _render(rows: list[dict], fmt: str) -> str:
    rows = _to_plain(rows)
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    fields = CSV_FIELDS if rows and "claim" in rows[0] else sorted({k for r in rows for k in r})
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        flat = dict(r)
        flat.setdefault("function", r.get("meta", {}).get("function", "") if isinstance(r.get("meta"), dict) else "")
        w.writerow({k: (json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v) for k, v in flat.items()})
    return buf.getvalue()


def _emit(rows: list[dict], args):
    text = _render(rows, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return text


def _finish_reports(reports: list[emb.Report], args) -> int:
    for r in reports:
        print(r.summary())
    _emit([r.to_json() for r in reports], args)
    exact_fail = [r for r in reports if r.exact and not r.passed]
    other_fail = [r for r in reports if not r.exact and not r.passed]
    print(f"{len(reports)} claims, {len(exact_fail)} exact failures, {len(other_fail)} empirical failures")
    return 1 if exact_fail else 0


# --- subcommands -------------------------------------------------------------------------------


def cmd_norm(args) -> int:
    grid = parse_grid(args.grid)
    f = sample_function(grid, args.function)
    family = CubeFamily.parse(args.family)
    n = args.norm
    cube = None
    if n == "lp":
        value = lp_norm(f, args.p)
    elif n == "weak_lp":
        value = weak_lp_norm(f, args.p)
    elif n == "morrey":
        value, cube = morrey_norm(f, args.p, args.q, family, with_cube=True)
    elif n == "weak_morrey":
        value, cube = weak_morrey_norm(f, args.p, args.q, family, with_cube=True)
    elif n == "bmo":
        value, cube = bmo_norm(f, family, with_cube=True)
    elif n == "lip_diff":
        value = lipschitz_norm_diff(f, args.alpha)
    else:
        q = None if args.q is None else (math.inf if args.q == math.inf else args.q)
        value, cube = lipschitz_norm_osc(f, args.alpha, q, family, with_cube=True)
    uses_p = n in ("lp", "weak_lp", "morrey", "weak_morrey")
    rec = norm_record(n, value, p=args.p if uses_p else None, q=args.q if n != "lp" and n != "weak_lp" else None,
                      alpha=args.alpha if n.startswith("lip") else None, family=family, cube=cube)
    rec["function"] = args.function
    sys.stdout.write(_render([rec], args.format))
    _emit([rec], args)
    return 0


def cmd_operator(args) -> int:
    if args.input:
        f = load_grid_function(args.input)
    else:
        if not (args.function and args.grid):
            raise ConfigError("give --input FILE or both --function and --grid")
        f = sample_function(parse_grid(args.grid), args.function)
    op = args.op or ("frac" if args.alpha is not None and not args.b else "commutator" if args.b else "cz")
    if op == "cz":
        out = cz_apply(args.kernel, f)
    elif op == "frac":
        if args.alpha is None:
            raise ConfigError("frac needs --alpha")
        out = frac_integral(args.alpha, f)
    else:
        if not args.b:
            raise ConfigError("commutator needs --b")
        out = commutator_apply(args.kernel, sample_function(f.grid, args.b), f)
    if args.output:
        save_grid_function(args.output, out)
    vals = out.values
    print(f"{op} on {f.grid.size} cells: max |value| = {float(np.max(np.abs(vals))):.6g}")
    return 0


def _verify_embedding(args, grid, family):
    corpus = _corpus(args, grid)

    def run(gen):
        return emb.verify_embedding(sample_function(grid, gen), args.p, args.q1, args.q2, family, function_id=gen.label())

    return _ordered_map(run, corpus, _jobs(args))


def _verify_chain(args, grid, family):
    corpus = _corpus(args, grid)

    def run(gen):
        return emb.verify_chain(sample_function(grid, gen), args.p, args.q1, args.q2, family, function_id=gen.label())

    return [r for rs in _ordered_map(run, corpus, _jobs(args)) for r in rs]


def _verify_domination(args, grid, family):
    if args.alpha is None or not args.b:
        raise ConfigError("domination needs --alpha and --b")
    b = sample_function(grid, args.b)
    lip = lipschitz_norm_diff(b, args.alpha)
    corpus = _corpus(args, grid)

    def run(gen):
        return emb.verify_pointwise_domination(b, args.alpha, sample_function(grid, gen), args.kernel, lip=lip,
                                               function_id=gen.label())

    return _ordered_map(run, corpus, _jobs(args))


def _verify_lemma31(args, grid, family):
    if args.alpha is None:
        raise ConfigError("lemma31 needs --alpha")
    symbols = [parse_generator(args.b)] if args.b else _corpus(args, grid)

    def run(gen):
        refined = sample_function(grid.refine(2), gen) if args.refine else None
        return emb.verify_lemma31(sample_function(grid, gen), args.alpha, family, args.c_star, refined=refined,
                                  function_id=gen.label())

    return _ordered_map(run, symbols, _jobs(args))


def _verify_operator_bound(args, grid, family):
    if args.op == "frac":
        if args.alpha is None:
            raise ConfigError("frac needs --alpha")
        op = emb.OperatorSpec("frac", alpha=args.alpha)
    else:
        if not args.b:
            raise ConfigError("commutator needs --b")
        op = emb.OperatorSpec("commutator", alpha=args.alpha, kernel=args.kernel, b=parse_generator(args.b))
    source = parse_norm_spec(args.source)
    target = parse_norm_spec(args.target)
    return [emb.verify_operator_bound(op, source, target, _corpus(args, grid), grid, family)]


def _verify_bmo_lower(args, grid, family):
    if not args.b or not args.cube:
        raise ConfigError("bmo-lower needs --b and --cube")
    cube = _floats(args.cube)
    if len(cube) != grid.dim + 1:
        raise ConfigError(f"--cube takes {grid.dim} center coordinates and a side length")
    x0, r = cube[:-1], cube[-1]
    z0 = _floats(args.z0) if args.z0 else [1.0] + [0.0] * (grid.dim - 1)
    expansion = pal.reciprocal_expansion(args.kernel, z0, args.M, args.margin, eps_rec=args.eps_rec)
    b = sample_function(grid, args.b)
    p = args.p
    return [
        pal.oscillation_identity_check(b, args.kernel, expansion, x0, r, eps_id=args.eps_id),
        pal.bmo_lower_bound(b, args.kernel, expansion, x0, r, p, args.q, eps_id=args.eps_id),
    ]


VERIFIERS = {
    "embedding": _verify_embedding,
    "chain": _verify_chain,
    "domination": _verify_domination,
    "lemma31": _verify_lemma31,
    "operator-bound": _verify_operator_bound,
    "bmo-lower": _verify_bmo_lower,
}


def _validate_verify(args):
    if args.claim in ("embedding", "chain"):
        if not 1 <= args.q1 < args.q2 <= args.p:
            raise ConfigError(f"need 1 <= q1 < q2 <= p, got p={args.p}, q1={args.q1}, q2={args.q2}")
        if args.claim == "chain" and not args.q2 < args.p:
            raise ConfigError("chain needs q2 < p")
    if args.alpha is not None and args.claim in ("domination", "lemma31") and not 0 < args.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")


def cmd_verify(args) -> int:
    _validate_verify(args)
    grid = parse_grid(args.grid)
    family = CubeFamily.parse(args.family)
    reports = VERIFIERS[args.claim](args, grid, family)
    return _finish_reports(reports, args)


def cmd_corpus(args) -> int:
    grid = parse_grid(args.grid)
    rows = [{"index": i, "generator": g.label()} for i, g in enumerate(_corpus(args, grid))]
    for r in rows:
        print(f"{r['index']:3d}  {r['generator']}")
    if args.out:
        _emit(rows, args)
    return 0


# --- argument parser ------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, grid_default: str | None = "1d:400"):
    p.add_argument("--grid", default=grid_default, help="1d:N[:lo:hi] or 2d:N[:lo:hi] (default box [-2, 2])")
    p.add_argument("--family", default="all", help="cube family: all | dyadic | sampled:SEED:COUNT")
    p.add_argument("--out", help="write the report to this file")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morreycz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    norm = sub.add_parser("norm", help="compute norms").add_subparsers(dest="action", required=True)
    nc = norm.add_parser("compute", help="compute one norm of a sampled function")
    _common(nc)
    nc.add_argument("--norm", required=True,
                    choices=("lp", "weak_lp", "morrey", "weak_morrey", "bmo", "lip_diff", "lip_osc"))
    nc.add_argument("--function", "--b", "--f", dest="function", required=True, help="generator, e.g. power:beta=0.3")
    nc.add_argument("--p", type=float, default=2.0)
    nc.add_argument("--q", type=float, help="second exponent (Morrey) or oscillation exponent; inf allowed")
    nc.add_argument("--alpha", type=float)
    nc.set_defaults(func=cmd_norm)

    op = sub.add_parser("operator", help="apply operators").add_subparsers(dest="action", required=True)
    oa = op.add_parser("apply", help="apply T, I_alpha or [b, T] to a grid function")
    oa.add_argument("--op", choices=("cz", "frac", "commutator"))
    oa.add_argument("--kernel", default="hilbert", help="hilbert | riesz1 | riesz2")
    oa.add_argument("--alpha", type=float)
    oa.add_argument("--b", help="commutator symbol generator")
    oa.add_argument("--input", help="grid function file (.csv or binary)")
    oa.add_argument("--function", help="generator to sample instead of --input")
    oa.add_argument("--grid", help="grid for --function")
    oa.add_argument("--output", help="write the result here (.csv or binary)")
    oa.set_defaults(func=cmd_operator)

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("claim", choices=tuple(VERIFIERS))
    _common(ver)
    ver.add_argument("--corpus", default="default", help="default[:SIZE[:SEED]] or gen1+gen2+...")
    ver.add_argument("--p", type=float, default=2.0)
    ver.add_argument("--q", type=float, help="inner exponent for bmo-lower (default (1+p)/2)")
    ver.add_argument("--q1", type=float, default=1.0)
    ver.add_argument("--q2", type=float, default=2.0)
    ver.add_argument("--alpha", type=float)
    ver.add_argument("--kernel", default="hilbert")
    ver.add_argument("--b", help="symbol generator for domination, lemma31, commutator bounds and bmo-lower")
    ver.add_argument("--op", choices=("frac", "commutator"), default="frac")
    ver.add_argument("--source", default="lp:2", help="source norm kind:p[:q]")
    ver.add_argument("--target", default="weak_lp:2", help="target norm kind:p[:q]")
    ver.add_argument("--c-star", type=float, default=10.0, help="equivalence bound for lemma31")
    ver.add_argument("--refine", action="store_true", help="lemma31: also check refinement stability")
    ver.add_argument("--cube", help="bmo-lower: center coordinates and side, e.g. 3,1")
    ver.add_argument("--z0", help="bmo-lower: expansion base point, comma separated")
    ver.add_argument("--M", type=int, help="bmo-lower: truncation (default: automatic)")
    ver.add_argument("--margin", type=float, default=1.9)
    ver.add_argument("--eps-rec", type=float, default=1e-6)
    ver.add_argument("--eps-id", type=float, default=1e-2)
    ver.add_argument("--jobs", type=int, help=f"worker threads (default ${JOBS_ENV} or 1)")
    ver.set_defaults(func=cmd_verify)

    corp = sub.add_parser("corpus", help="function corpora").add_subparsers(dest="action", required=True)
    cl = corp.add_parser("list", help="list corpus generators")
    _common(cl)
    cl.add_argument("--corpus", default="default")
    cl.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
