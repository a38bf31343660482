"""Command-line entry point.

Exit status: 0 on success, 1 when an input fails validation or a check does
not pass, 2 on usage errors (argparse).

Generator specs are ``kind`` or ``kind:arg,arg`` (positional arguments per
kind, see ``GEN_ARGS``) or a JSON object with a ``kind`` key. All randomness
comes from numpy's PCG64 seeded with ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import gridio
from .covering import (
    Selection,
    check_p1_slices,
    check_p2,
    cover_ratio,
    exp_functional_Q,
    greedy_select,
    overlap_norm_ratio,
    recmass_check,
)
from .grid import Grid, GridError, random_rects
from .operators import composition_maximal, cube_maximal, directional_maximal, strong_maximal
from .oracle import brute_cube_maximal, brute_strong_maximal
from .verify import (
    ENDPOINTS,
    covering_report,
    endpoint_sweep,
    extract_witnesses,
    lp_sweep,
    opnorm_sweep,
    overlap_report,
    sharpness_probe,
    young_report,
)
from .weights import (
    ap_star_constant,
    doubling_fit,
    epsilon_for_weight,
    generate_field,
    generate_weight,
    weight_profile,
)

log = logging.getLogger("strongmax")

GEN_ARGS = {
    "constant": ["value"],
    "power": ["alpha"],
    "checkerboard": ["a", "b"],
    "lognormal": ["sigma", "seed"],
    "spike": ["height"],
    "indicator": ["height"],
    "zero": [],
}

INEQUALITIES = ENDPOINTS + ("fs_lp", "opnorm", "young", "sharpness", "overlap", "covering")


class UsageError(Exception):
    pass


def parse_shape(text: str) -> tuple:
    try:
        shape = tuple(int(s) for s in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad shape {text!r}; expected e.g. 16x16") from None
    if not shape or any(s < 1 for s in shape):
        raise UsageError(f"bad shape {text!r}")
    return shape


def parse_floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x]


def parse_gen(text: str, seed: int) -> dict:
    """``kind:a,b`` or a JSON object into generator keyword arguments."""
    if text.lstrip().startswith("{"):
        spec = json.loads(text)
    else:
        kind, _, rest = text.partition(":")
        if kind not in GEN_ARGS:
            raise UsageError(f"unknown generator {kind!r}")
        values = parse_floats(rest)
        if len(values) > len(GEN_ARGS[kind]):
            raise UsageError(f"too many arguments for {kind}")
        spec = {"kind": kind, **dict(zip(GEN_ARGS[kind], values))}
    spec.setdefault("seed", seed)
    spec["seed"] = int(spec["seed"])
    return spec


def make_field(spec: dict, shape) -> Grid:
    spec = dict(spec)
    return generate_field(spec.pop("kind"), shape, **spec)


def make_weight(spec: dict, shape) -> Grid:
    spec = dict(spec)
    return generate_weight(spec.pop("kind"), shape, **spec)


def _write(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --- subcommands ------------------------------------------------------------


def cmd_gen(args) -> int:
    shape = parse_shape(args.shape)
    if (args.f is None) == (args.w is None):
        raise UsageError("gen needs exactly one of --f or --w")
    if args.f is not None:
        g, default = make_field(parse_gen(args.f, args.seed), shape), "f.grd"
    else:
        g, default = make_weight(parse_gen(args.w, args.seed), shape), "w.grd"
    gridio.save(g, args.out or default)
    return 0


def cmd_maximal(args) -> int:
    f = gridio.load(args.input)
    if args.family == "strong":
        w = gridio.load(args.weight) if args.weight else None
        g = strong_maximal(f, w).grid
    elif args.family == "cube":
        g = cube_maximal(f).grid
    elif args.family == "directional":
        g = directional_maximal(f, args.axis)
    else:
        order = [int(x) for x in args.order.split(",")] if args.order else None
        g = composition_maximal(f, order)
    gridio.save(g, args.out)
    return 0


def cmd_oracle(args) -> int:
    f = gridio.load(args.input)
    if args.family == "cube":
        g = brute_cube_maximal(f)
    else:
        g = brute_strong_maximal(f, gridio.load(args.weight) if args.weight else None)
    if args.out:
        gridio.save(g, args.out)
    if args.compare:
        other = gridio.load(args.compare)
        same = other.shape == g.shape and other.values.tobytes() == g.values.tobytes()
        diff = float(np.max(np.abs(other.values - g.values))) if other.shape == g.shape else float("inf")
        print(json.dumps({"identical": same, "max_abs_diff": diff}))
        return 0 if same else 1
    if not args.out:
        print(json.dumps(gridio.to_json(g)))
    return 0


def cmd_apconst(args) -> int:
    w = gridio.load(args.input)
    print(repr(ap_star_constant(w, args.p)))
    return 0


def cmd_profile(args) -> int:
    w = gridio.load(args.input)
    prof = weight_profile(w, parse_floats(args.p), args.samples, args.seed, args.safety)
    _write(json.dumps(prof.to_dict(), indent=2, sort_keys=True), args.out)
    return 0


def _epsilon(text: str, w: Grid, seed: int, safety: float) -> float:
    if text == "calibrated":
        return epsilon_for_weight(doubling_fit(w, 2000, seed), safety)
    return float(text)


def cmd_select(args) -> int:
    f = gridio.load(args.f)
    w = gridio.load(args.w) if args.w else Grid(np.ones(f.shape), f.cell_volume)
    eps = _epsilon(args.epsilon, w, args.seed, args.safety)
    rects = extract_witnesses(f, args.lam)
    if not rects:
        log.error("level set {M f > %g} is empty; nothing to select", args.lam)
        return 1
    sel = greedy_select(rects, eps, f.shape)
    _write(json.dumps(sel.to_dict(), sort_keys=True), args.out)
    return 0


def cmd_check(args) -> int:
    sel = Selection.from_dict(json.loads(Path(args.selection).read_text()))
    w = gridio.load(args.w) if args.w else Grid(np.ones(sel.shape))
    reports = [check_p2(sel)]
    if len(sel.shape) >= 2:
        reports.append(check_p1_slices(sel))
    reports.append(recmass_check(sel, w))
    out = {"checks": [r.to_dict() for r in reports]}
    out["overlap"] = {repr(p): overlap_norm_ratio(sel, w, p) for p in parse_floats(args.p)}
    out["cover_ratio"] = cover_ratio(sel, w)
    if len(sel.shape) >= 2:
        out["Q"] = {repr(t): exp_functional_Q(sel, w, t, args.delta) for t in parse_floats(args.theta)}
    _write(json.dumps(out, indent=2, sort_keys=True), args.out)
    return 0 if all(r.passed for r in reports) else 1


def cmd_verify(args) -> int:
    shape = parse_shape(args.shape)
    name = args.inequality
    fspec = parse_gen(args.f, args.seed)
    wspec = parse_gen(args.w, args.seed + 1)
    inputs = {"shape": list(shape), "f": fspec, "w": wspec, "seed": args.seed}
    if name in ENDPOINTS or name == "fs_lp":
        f = make_field(fspec, shape)
        w = None if name == "jmz" else make_weight(wspec, shape)
        if name == "jmz":
            inputs.pop("w")
        if name == "fs_lp":
            rep = lp_sweep(f, w, parse_floats(args.p), inputs)
        else:
            lams = None if args.lambda_sweep == "auto" else parse_floats(args.lambda_sweep)
            rep = endpoint_sweep(name, f, w, lams, inputs, threads=args.threads)
    elif name == "opnorm":
        inputs.pop("f")
        rep = opnorm_sweep(make_weight(wspec, shape), parse_floats(args.p), args.trials, args.seed, inputs)
    elif name == "young":
        rep = young_report(tuple(parse_floats(args.theta)), tuple(int(x) for x in parse_floats(args.n)))
    elif name == "sharpness":
        rep = sharpness_probe(parse_floats(args.N), shape, args.lam)
    else:
        w = make_weight(wspec, shape)
        rng = np.random.default_rng(args.seed)
        eps = _epsilon(args.epsilon, w, args.seed, args.safety)
        sel = greedy_select(random_rects(shape, args.rects, rng), eps, shape)
        inputs.pop("f")
        inputs.update(rects=args.rects, epsilon=eps)
        if name == "overlap":
            rep = overlap_report(sel, w, parse_floats(args.p), inputs)
        else:
            rep = covering_report(sel, w, parse_floats(args.theta), args.delta, inputs)
    log.info("%s: sup ratio %.6g in %d ms", name, rep.sup_ratio, rep.runtime_ms)
    _write(rep.to_json(timing=args.timing), args.out)
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())
    return 1 if rep.passed is False else 0


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strongmax", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a generated grid")
    p.add_argument("--shape", default="16x16")
    p.add_argument("--f", help="function generator spec")
    p.add_argument("--w", help="weight generator spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (.json for JSON, else GRD1)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("maximal", help="compute a maximal transform")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--family", choices=["strong", "cube", "directional", "composition"], default="strong")
    p.add_argument("--weight", help="weight grid for the weighted strong maximal")
    p.add_argument("--axis", type=int, default=0, help="0-based axis for --family directional")
    p.add_argument("--order", help="comma-separated axis order for --family composition")
    p.set_defaults(func=cmd_maximal)

    p = sub.add_parser("oracle", help="brute-force transform for cross-checks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--family", choices=["strong", "cube"], default="strong")
    p.add_argument("--weight")
    p.add_argument("--out")
    p.add_argument("--compare", help="grid to compare byte for byte against the oracle")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("apconst", help="strong A_p constant of a weight")
    p.add_argument("--in", dest="input", default="w.grd")
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_apconst)

    p = sub.add_parser("profile", help="full weight profile as JSON")
    p.add_argument("--in", dest="input", default="w.grd")
    p.add_argument("--p", default="4,2,1.5,1.25,1.1")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--safety", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("select", help="witness rectangles of {M f > lambda} through greedy selection")
    p.add_argument("--f", required=True)
    p.add_argument("--w")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--epsilon", default="calibrated", help="a number or 'calibrated' (from the doubling fit)")
    p.add_argument("--safety", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("check", help="sparseness, mass, overlap and Q checks on a selection")
    p.add_argument("--selection", required=True)
    p.add_argument("--w")
    p.add_argument("--p", default="2,4,8,16")
    p.add_argument("--theta", default="0.05,0.1")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify", help="run an inequality harness")
    p.add_argument("inequality", choices=INEQUALITIES)
    p.add_argument("--shape", default="16x16")
    p.add_argument("--f", default="spike:100")
    p.add_argument("--w", default="constant:1")
    p.add_argument("--lambda-sweep", default="auto")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--p", default="1.5,2,4")
    p.add_argument("--theta", default="0.5,1")
    p.add_argument("--n", default="2,3")
    p.add_argument("--N", default="100,1000,10000")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--epsilon", default="calibrated")
    p.add_argument("--safety", type=float, default=0.5)
    p.add_argument("--rects", type=int, default=50)
    p.add_argument("--trials", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="include runtime_ms in the JSON")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (GridError, OSError, json.JSONDecodeError, KeyError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
