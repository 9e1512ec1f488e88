"""Command-line entry point: ``adiclab <command> [options]``.

Every command writes a JSON report (to ``--out`` or stdout) with sorted
keys, the echoed inputs and the library version. Exit status is 0 on
success, 1 when a verification fails and 2 on usage, parse or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .circle import dumps, max_gap
from .diffsets import (
    DEFAULT_RESOLUTION,
    LocalDiffParams,
    default_depth,
    difference_depth,
    difference_set,
    local_difference_set,
)
from .errors import AdicLabError
from .experiments import (
    AFFINE_LIMITATION,
    affine_embedding_search,
    check_map_dim_inequality,
    claim_full_circle,
    default_r_grid,
    default_t_grid,
    verify_transform_law,
)
from .maps import load_map, shipped_map
from .measures import (
    MAX_SAMPLES,
    PROXY_DISCLAIMER,
    cesaro_pushforward_samples,
    entropy_at_scale,
    histogram,
    markov_from_system,
    sample_measure,
)
from .symbolic import (
    PointSpec,
    classify,
    cover_at_depth,
    entropy_exact,
    load_system,
    shipped_system,
    word_counts,
)

MAX_DEPTH = 20
MAX_RESOLUTION = 2**24
MAX_COVER_LISTING = 4096

COMMANDS = (
    "entropy",
    "cover",
    "diffset",
    "localdiff",
    "transform-law",
    "full-circle",
    "prop-dim",
    "affine-search",
    "measure-dim",
    "classify",
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def _bounded_int(lo, hi, what):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} must be an integer, got {text!r}")
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"{what} must be in [{lo}, {hi}], got {v}")
        return v

    return conv


def parse_depths(text: str) -> list[int]:
    """``lo..hi``, ``lo..hi:step`` or a comma-separated list."""
    try:
        if ".." in text:
            rng, _, step = text.partition(":")
            lo, hi = (int(v) for v in rng.split(".."))
            out = list(range(lo, hi + 1, int(step) if step else 1))
        else:
            out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}")
    if not out or any(not 1 <= d <= MAX_DEPTH for d in out):
        raise argparse.ArgumentTypeError(f"depths must be non-empty and within [1, {MAX_DEPTH}]")
    return out


def _resolution(text):
    v = _bounded_int(2, MAX_RESOLUTION, "resolution")(text)
    return v


def _fraction(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad number {text!r}")


def _point(text):
    try:
        return PointSpec.parse(text)
    except AdicLabError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"adiclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="report path (default: stdout)")
    common.add_argument("--summary", action="store_true", help="also print a plain-text summary")
    common.add_argument("--jobs", type=_bounded_int(1, 256, "jobs"), default=1)
    common.add_argument("--timing", action="store_true", help="include wall time (breaks byte-determinism)")

    def add(name, help_, *, set_=True, map_=False):
        p = sub.add_parser(name, help=help_, parents=[common])
        if set_:
            p.add_argument("--set", required=True, dest="set_path", help="set definition (path or shipped name)")
        if map_:
            p.add_argument("--map", required=True, dest="map_path", help="map definition (path or shipped name)")
        return p

    def local_opts(p, depth=True):
        if depth:
            p.add_argument("--depth", type=_bounded_int(2, MAX_DEPTH, "depth"))
        p.add_argument("--resolution", type=_resolution, default=DEFAULT_RESOLUTION)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--guard", type=_bounded_int(1, MAX_DEPTH, "guard"))
        p.add_argument("--inner-scale", type=_bounded_int(1, MAX_DEPTH, "inner scale"))

    add("entropy", "exact entropy and dimension")
    add("classify", "finite / perfect / transitive")

    p = add("cover", "adic cover at a depth")
    p.add_argument("--depth", type=_bounded_int(0, MAX_DEPTH, "depth"), required=True)

    p = add("diffset", "outer approximation of X - X mod 1")
    p.add_argument("--depth", type=_bounded_int(1, MAX_DEPTH, "depth"))
    p.add_argument("--resolution", type=_resolution, default=DEFAULT_RESOLUTION)

    p = add("localdiff", "local difference set at a point")
    p.add_argument("--point", type=_point, required=True, help="eventually periodic digits, e.g. 2(0)")
    p.add_argument("--b", type=_bounded_int(2, 10**6, "b"))
    local_opts(p)

    p = add("transform-law", "transformation law under a smooth map", map_=True)
    p.add_argument("--point", type=_point, required=True)
    p.add_argument("--tol", type=float, default=0.02)
    local_opts(p)

    p = add("full-circle", "gap trend of the aggregate set in a second base")
    p.add_argument("--b", type=_bounded_int(2, 10**6, "b"), required=True)
    p.add_argument("--depths", type=parse_depths, required=True)
    p.add_argument("--resolution", type=_resolution, default=DEFAULT_RESOLUTION)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--guard", type=_bounded_int(1, MAX_DEPTH, "guard"), help="fixed guard (default: grows with depth)")
    p.add_argument("--rigorous", action="store_true", help="mark the full phase arc of every cylinder pair")

    p = add("prop-dim", "dimension inequality under a smooth map", map_=True)
    p.add_argument("--b", type=_bounded_int(2, 10**6, "b"), default=2)
    p.add_argument("--depths", type=parse_depths, required=True)
    p.add_argument("--resolution", type=_resolution, default=DEFAULT_RESOLUTION)

    p = add("affine-search", "refute affine self-embeddings over a grid")
    p.add_argument("--depth", type=_bounded_int(1, MAX_DEPTH, "depth"), default=10)
    p.add_argument("--max-q", type=_bounded_int(1, 64, "max-q"), default=9)
    p.add_argument("--t-count", type=_bounded_int(1, 10**5, "t-count"), default=729)

    p = add("measure-dim", "entropy-at-scale dimension of a Markov measure")
    p.add_argument("--weights", choices=("uniform", "parry"), default="uniform")
    p.add_argument("--map", dest="map_path", help="push forward through a map and average over T_a iterates")
    p.add_argument("--iterations", type=_bounded_int(1, 1000, "iterations"), default=12)
    p.add_argument("--depth", type=_bounded_int(1, MAX_DEPTH, "depth"), default=8)
    p.add_argument("--samples", type=_bounded_int(1, MAX_SAMPLES, "samples"), default=10**6)
    p.add_argument("--seed", type=int, default=0)
    return parser


# ---------------------------------------------------------------------------
# input resolution


def _resolve(path, loader, shipped, suffix):
    if os.path.exists(path):
        return loader(path)
    stem = os.path.basename(path)
    for ext in (suffix + ".json", suffix, ".json"):
        if stem.endswith(ext):
            stem = stem[: -len(ext)]
            break
    if os.sep not in path:
        try:
            return shipped(stem)
        except AdicLabError:
            pass
    return loader(path)  # raises a ParseError naming the missing file


def _load_set(path):
    return _resolve(path, load_system, shipped_system, ".set")


def _load_map(path):
    return _resolve(path, load_map, shipped_map, ".map")


def _params(args, a, b=None):
    depth = args.depth if args.depth is not None else default_depth(a)
    kw = dict(depth=depth, resolution=args.resolution, epsilon=args.epsilon)
    if args.guard is not None:
        kw["guard"] = args.guard
    if args.inner_scale is not None:
        kw["inner_scale"] = args.inner_scale
    return LocalDiffParams(**kw)


def _echo_params(p: LocalDiffParams):
    return {
        "depth": p.depth,
        "inner_scale": p.inner_scale,
        "guard": p.guard,
        "epsilon": p.epsilon,
        "resolution": p.resolution,
    }


# ---------------------------------------------------------------------------
# commands; each returns (results, status, summary lines)


def cmd_entropy(args):
    sys_ = _load_set(args.set_path)
    h, dim = entropy_exact(sys_)
    res = {"base": sys_.base, "entropy": h, "dimension": dim, "word_counts": word_counts(sys_, 12)}
    return res, "complete", [f"entropy {h:.12f}", f"dimension {dim:.12f}"]


def cmd_classify(args):
    sys_ = _load_set(args.set_path)
    c = classify(sys_)
    res = {"finite": c.finite, "perfect": c.perfect, "transitive": c.transitive}
    return res, "complete", [f"{k} {v}" for k, v in res.items()]


def cmd_cover(args):
    sys_ = _load_set(args.set_path)
    cov = cover_at_depth(sys_, args.depth)
    res = {"count": len(cov), "total_length": cov.total_length, "scale": cov.scale}
    if len(cov) <= MAX_COVER_LISTING:
        res["index"] = [int(j) for j in cov.index]
    else:
        res["index"] = None
        res["note"] = f"more than {MAX_COVER_LISTING} cylinders; listing omitted"
    return res, "complete", [f"cylinders {len(cov)}", f"total length {cov.total_length:.6g}"]


def cmd_diffset(args):
    sys_ = _load_set(args.set_path)
    M = args.resolution
    depth = args.depth if args.depth is not None else difference_depth(sys_.base, M)
    D = difference_set(cover_at_depth(sys_, depth), M, args.jobs)
    res = {
        "depth": depth,
        "resolution": M,
        "count": D.count,
        "max_gap": max_gap(D),
        "self_restricted": not D.is_full(),
        "circleset": dumps(D),
    }
    verdict = "self-restricted" if res["self_restricted"] else "no empty cell at this resolution"
    return res, "complete", [f"marked {D.count}/{M}", f"max gap {res['max_gap']:.6g}", verdict]


def cmd_localdiff(args):
    sys_ = _load_set(args.set_path)
    p = _params(args, sys_.base, args.b)
    F = local_difference_set(sys_, args.point, p, args.b, jobs=args.jobs)
    res = {
        "params": _echo_params(p),
        "b": args.b or sys_.base,
        "count": F.count,
        "max_gap": max_gap(F),
        "cells": [int(i) for i in F.indices()],
        "circleset": dumps(F),
    }
    return res, "complete", [f"marked {F.count}/{p.resolution}", f"max gap {res['max_gap']:.6g}"]


def cmd_transform_law(args):
    sys_ = _load_set(args.set_path)
    f = _load_map(args.map_path)
    p = _params(args, sys_.base)
    rep = verify_transform_law(sys_, f, args.point, p, args.tol, jobs=args.jobs)
    res = rep.to_dict()
    res["params"] = _echo_params(p)
    status = {"pass": "pass", "fail": "fail", "inconclusive": "inconclusive"}[rep.verdict]
    d = "n/a" if rep.distance is None else f"{rep.distance:.6g}"
    return res, status, [f"predicted shift {rep.shift_predicted:.6f}", f"distance {d}", f"verdict {rep.verdict}"]


def cmd_full_circle(args):
    sys_ = _load_set(args.set_path)
    rep = claim_full_circle(
        sys_, args.b, args.depths, args.resolution, guard=args.guard, epsilon=args.epsilon,
        rigorous=args.rigorous, jobs=args.jobs
    )
    res = rep.to_dict()
    ok = rep.vacuous or (rep.monotone and rep.mechanism_ok)
    lines = [f"depth {r['depth']:>2}  guard {r['guard']}  cells {r['count']:>7}  max gap {r['max_gap']:.6f}" for r in rep.rows]
    lines.append(f"non-increasing {rep.monotone}  mechanism {rep.mechanism_ok}" + ("  (vacuous)" if rep.vacuous else ""))
    return res, "pass" if ok else "fail", lines


def cmd_prop_dim(args):
    sys_ = _load_set(args.set_path)
    f = _load_map(args.map_path)
    rep = check_map_dim_inequality(sys_, f, args.depths, args.resolution, args.b, jobs=args.jobs)
    res = rep.to_dict()
    status = {"pass": "pass", "fail": "fail", "inconclusive": "inconclusive"}[rep.verdict]
    return res, status, [
        f"dim image {rep.dim_image}",
        f"dim source {rep.dim_source}",
        f"box dimension {rep.bdim:.6f}",
        f"verdict {rep.verdict}",
    ]


def cmd_affine_search(args):
    sys_ = _load_set(args.set_path)
    rs = [r for r in default_r_grid(args.max_q, sys_.base)]
    ts = default_t_grid(args.t_count)
    results = affine_embedding_search(sys_, rs, ts, args.depth, jobs=args.jobs)
    survivors = [r.to_dict() for r in results if r.passes]
    refuted = {}
    for r in results:
        if not r.passes:
            refuted[r.r] = max(refuted.get(r.r, 0), r.refuted_at)
    bad = [s for s in survivors if s["commensurable"] is False]
    res = {
        "depth": args.depth,
        "r_grid_size": len(rs),
        "t_grid_size": len(ts),
        "survivors": survivors,
        "max_refutation_depth": refuted,
        "incommensurable_survivors": len(bad),
        "limitation": AFFINE_LIMITATION,
    }
    lines = [f"{len(survivors)} surviving (r, t) pairs"] + [f"  r={s['r']} t={s['t']} commensurable={s['commensurable']}" for s in survivors]
    return res, "fail" if bad else "pass", lines


def cmd_measure_dim(args):
    sys_ = _load_set(args.set_path)
    mu = markov_from_system(sys_, args.weights)
    if args.samples < sys_.base**args.depth:
        raise UsageError(f"undersampled: {args.samples} samples for {sys_.base ** args.depth} cylinders")
    if args.map_path:
        f = _load_map(args.map_path)
        cloud = cesaro_pushforward_samples(mu, f, args.iterations, args.samples, args.seed, args.jobs)
    else:
        cloud = sample_measure(mu, args.samples, args.seed, args.jobs)
    est = entropy_at_scale(cloud, args.depth, sys_.base)
    res = {
        "measure_dimension": mu.dimension,
        "estimate": est.to_dict(),
        "margin": est.dimension - mu.dimension,
        "provenance": cloud.provenance,
        "histogram": histogram(cloud.points, args.depth, sys_.base).tolist(),
    }
    if args.map_path:
        res["disclaimer"] = PROXY_DISCLAIMER
    return res, "complete", [
        f"measure dimension {mu.dimension:.6f}",
        f"estimate {est.dimension:.6f} +/- {est.stderr:.2g}",
    ]


HANDLERS = {
    "entropy": cmd_entropy,
    "classify": cmd_classify,
    "cover": cmd_cover,
    "diffset": cmd_diffset,
    "localdiff": cmd_localdiff,
    "transform-law": cmd_transform_law,
    "full-circle": cmd_full_circle,
    "prop-dim": cmd_prop_dim,
    "affine-search": cmd_affine_search,
    "measure-dim": cmd_measure_dim,
}

# reported inputs; --jobs, --out, --summary and --timing do not change results
_NOT_ECHOED = {"command", "jobs", "out", "summary", "timing"}


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (Fraction, PointSpec)):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats, which JSON cannot carry."""
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def render_report(command, inputs, results, status, wall_time=None) -> str:
    doc = {
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "status": status,
        "results": results,
    }
    if wall_time is not None:
        doc["wall_time"] = wall_time
    doc = json.loads(json.dumps(doc, default=_json_default))
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def emit_report(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _fail(msg) -> int:
    print(f"adiclab: error: {msg}", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    t0 = time.perf_counter()
    try:
        results, status, lines = HANDLERS[args.command](args)
    except (AdicLabError, UsageError) as exc:
        return _fail(exc)
    except OSError as exc:
        return _fail(exc)
    wall = time.perf_counter() - t0 if args.timing else None
    text = render_report(args.command, inputs, results, status, wall)
    try:
        emit_report(text, args.out)
    except OSError as exc:
        return _fail(f"cannot write report: {exc}")
    if args.summary:
        out = sys.stdout if args.out else sys.stderr
        print(f"{args.command}: {status}", file=out)
        for line in lines:
            print(line, file=out)
    return 1 if status == "fail" else 0


if __name__ == "__main__":
    sys.exit(main())
