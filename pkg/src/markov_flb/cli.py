"""Command-line front end.

Exit codes: 0 success, 1 failed verification, 2 input validation error,
3 every produced bound is vacuous.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import (
    CHANNEL_BOUNDS,
    ChannelQuery,
    SourceQuery,
    asymptotics,
    chan_bounds,
    src_achievability,
    src_converse,
    src_markov_bounds,
)
from .conversion import (
    RegularChannel,
    convert_markov_noise,
    decompose,
    iid_noise,
    markov_source_from_json,
    presets,
    regular_channel_from_json,
    to_conditional_additive,
)
from .errors import MarkovFLBError
from .oracle import SimConfig, empirical_varentropy, mc_hash_coding, worker_count
from .singleshot import TwoParam
from .transition import MarkovSource, transition_renyi
from .verify import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_VACUOUS = 0, 1, 2, 3
FIG1_PRESET = "gilbert_elliott:0.1,0.1,0.1,0.4"


class InputError(Exception):
    """Invalid command-line input."""


# ---------------------------------------------------------------------------
# parsing helpers


def parse_sweep(text: str) -> list[float]:
    """``start:step:stop`` (stop included within half a step) or a comma list."""
    text = str(text).strip()
    if ":" not in text:
        try:
            vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise InputError(f"bad number list {text!r}") from None
        if not vals or not all(math.isfinite(v) for v in vals):
            raise InputError(f"bad number list {text!r}")
        return sorted(vals)
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"sweep must be start:step:stop, got {text!r}")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise InputError(f"bad sweep {text!r}") from None
    if not all(math.isfinite(v) for v in (start, step, stop)) or step <= 0 or stop < start:
        raise InputError(f"sweep {text!r} must be finite and ordered with step > 0")
    count = int(math.floor((stop - start) / step + 0.5)) + 1
    return [round(start + i * step, 12) + 0.0 for i in range(count)]


def parse_ints(text: str) -> list[int]:
    vals = parse_sweep(text)
    if any(v != int(v) for v in vals):
        raise InputError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def parse_list(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _split_preset(spec: str) -> tuple[str, str]:
    name, _, params = spec.partition(":")
    return name, params


def load_input(args) -> object:
    """Preset object or JSON-defined object from the exclusive input flags."""
    preset = getattr(args, "preset", None)
    path = getattr(args, "input_json", None)
    if (preset is None) == (path is None):
        raise InputError("give exactly one of --preset or --json")
    if preset is not None:
        name, params = _split_preset(preset)
        return presets(name, params)
    with open(path) as fh:
        data = json.load(fh)
    if "group" in data:
        return regular_channel_from_json(data)
    return markov_source_from_json(data)


def load_source(args) -> MarkovSource:
    obj = load_input(args)
    if isinstance(obj, RegularChannel):
        return iid_noise(obj)
    return obj


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if isinstance(v, Fraction):
        return str(v)
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit(records: list[dict], fmt: str, out, columns: Optional[Sequence[str]] = None) -> None:
    if fmt == "json":
        json.dump(_jsonable(records), out, indent=2, sort_keys=False)
        out.write("\n")
        return
    cols = list(columns or [])
    for r in records:
        for k in r:
            if k not in cols:
                cols.append(k)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(r.get(c)) for c in cols])


def _ordered_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    items = list(items)
    workers = min(worker_count(threads), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def _kind_of(name: str):
    name = name.strip().lower()
    if name in ("lower", "upper"):
        return name
    if name.startswith("two:"):
        return TwoParam(float(name[4:]))
    raise InputError(f"unknown kind {name!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_measures(args) -> tuple[list[dict], list[str], int]:
    src = load_source(args)
    thetas = parse_sweep(args.theta)
    kinds = [(k, _kind_of(k)) for k in parse_list(args.kind)]

    def row(t):
        out = dict(theta=t)
        for label, kind in kinds:
            out[label] = transition_renyi(src, kind, t)
        return out
    recs = _ordered_map(row, thetas, args.threads)
    return recs, ["theta"] + [k for k, _ in kinds], EXIT_OK


SOURCE_THEOREMS = ("T5", "T6", "T7", "T8", "ach:spectrum", "ach:gallager", "ach:loose",
                   "conv:spectrum", "conv:hypothesis", "conv:exponential")

BOUND_COLUMNS = ["n", "R", "log_M", "bound", "role", "scale", "value", "probability", "vacuous",
                 "theta", "a", "s", "theta_tilde", "gamma", "error"]


def _source_bound(q: SourceQuery, name: str):
    if name.startswith("ach:"):
        return src_achievability(q, name[4:])
    if name.startswith("conv:"):
        return src_converse(q, name[5:], "auto" if name.endswith("exponential") else "marginal")
    return src_markov_bounds(q, name)


def _guarded(fn, base: dict) -> dict:
    try:
        return fn().record()
    except MarkovFLBError as exc:
        return dict(base, value=math.nan, error=f"{type(exc).__name__}: {exc}")


def cmd_bounds(args) -> tuple[list[dict], list[str], int]:
    src = load_source(args)
    ns = parse_ints(args.n)
    if args.target == "source":
        names = parse_list(args.theorems)
        for nm in names:
            if nm not in SOURCE_THEOREMS:
                raise InputError(f"unknown bound {nm!r}; choose from {', '.join(SOURCE_THEOREMS)}")
        if args.R is None:
            raise InputError("bounds source needs --R")
        rates = parse_sweep(args.R)
        jobs = [(n, R, nm) for n in ns for R in rates for nm in names]

        def run(job):
            n, R, nm = job
            base = dict(n=n, R=R, log_M=n * R, bound=nm)
            return _guarded(lambda: _source_bound(SourceQuery.at_rate(src, R, n), nm), base)
    else:
        names = parse_list(args.which)
        for nm in names:
            if nm not in CHANNEL_BOUNDS:
                raise InputError(f"unknown bound {nm!r}; choose from {', '.join(CHANNEL_BOUNDS)}")
        ks = parse_ints(args.k) if args.k is not None else [None]
        log_ms = parse_sweep(args.log_M) if args.log_M is not None else [None]
        jobs = [(n, k, lm, nm) for n in ns for k in ks for lm in log_ms for nm in names]

        def run(job):
            n, k, lm, nm = job
            base = dict(n=n, k=k, code_log_M=lm, bound=nm)

            def go():
                return chan_bounds(ChannelQuery(src, n, k=k, log_M=lm), nm)
            rec = _guarded(go, base)
            rec.update(k=k, code_log_M=lm)
            return rec
    recs = _ordered_map(run, jobs, args.threads)
    good = [r for r in recs if not r.get("error")]
    if not good:
        code = EXIT_INPUT
    elif all(r["vacuous"] for r in good):
        code = EXIT_VACUOUS
    else:
        code = EXIT_OK
    return recs, BOUND_COLUMNS, code


def cmd_exponents(args) -> tuple[list[dict], list[str], int]:
    src = load_source(args)
    if args.task == "md":
        vals = parse_sweep(args.delta)
        recs = [asymptotics(src, "md", delta=d) for d in vals]
        return recs, ["delta", "varentropy", "coefficient"], EXIT_OK
    if args.R is None:
        raise InputError("large-deviation exponents need --R")
    rates = parse_sweep(args.R)
    key = "R" if args.task == "ld_source" else "rate"
    recs = _ordered_map(lambda R: asymptotics(src, args.task, kind=args.kind, **{key: R}),
                        rates, args.threads)
    return recs, ["R", "kind", "achievability", "converse", "critical_rate", "coincide"], EXIT_OK


def cmd_second_order(args) -> tuple[list[dict], list[str], int]:
    src = load_source(args)
    recs = [asymptotics(src, "second_order", n=n, eps=e, role=args.role,
                        alphabet_size=args.alphabet_size)
            for n in parse_ints(args.n) for e in parse_sweep(args.eps)]
    return recs, ["n", "eps", "role", "log_M"], EXIT_OK


def cmd_convert(args) -> tuple[list[dict], list[str], int]:
    obj = load_input(args)
    if not isinstance(obj, RegularChannel):
        raise InputError("convert needs a regular-channel input (e.g. bes or bsc)")
    dec = decompose(obj, reverse=args.reverse)
    c = to_conditional_additive(obj, dec)
    rec = dict(
        outputs=list(obj.outputs),
        orbits=[[obj.outputs[b] for b in o] for o in dec.orbits],
        stabilizers=[[list(a) for a in s] for s in dec.stabilizers],
        p_y=list(c.p_y),
        p_x_given_y=[list(r) for r in c.p_x_given_y],
    )
    if args.markov is not None:
        with open(args.markov) as fh:
            spec = json.load(fh)
        src = convert_markov_noise(obj, spec["W"], spec.get("Q"))
        rec["pair_matrix"] = np.asarray(src.W.matrix).tolist()
        rec["assumption"] = src.level.name
    args.format = "json"
    return [rec], [], EXIT_OK


def cmd_verify(args) -> tuple[list[dict], list[str], int]:
    names = tuple(parse_list(args.suite))
    for nm in names:
        if nm != "all" and nm not in SUITES:
            raise InputError(f"unknown suite {nm!r}; choose from all, {', '.join(SUITES)}")
    report = run_suites(names, seed=args.seed, quick=args.quick)
    args.format = "json"
    return [report], [], EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_simulate(args) -> tuple[list[dict], list[str], int]:
    src = load_source(args)
    if args.what == "varentropy":
        est = empirical_varentropy(src, args.n, args.trials, args.seed, workers=args.threads)
        rec = dict(what="varentropy", n=args.n, trials=args.trials, seed=args.seed,
                   mean=est.value, stderr=est.stderr)
    else:
        if args.k is None:
            raise InputError("hash simulation needs --k")
        cfg = SimConfig(trials=args.trials, seed=args.seed, n=args.n, k=args.k, q=args.q,
                        tie_is_error=not args.ties_correct)
        est = mc_hash_coding(src, cfg, workers=args.threads)
        rec = dict(what="hash", n=args.n, k=args.k, q=args.q, trials=args.trials, seed=args.seed,
                   mean=est.value, stderr=est.stderr)
    return [rec], list(rec), EXIT_OK


def cmd_fig1(args) -> tuple[list[dict], list[str], int]:
    args.preset = args.preset or FIG1_PRESET
    args.input_json = None
    args.kind = "upper,lower"
    return cmd_measures(args)


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    """Accepts negative sweeps such as ``-0.9:0.05:3`` as option values."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self._negative_number_matcher = re.compile(r"^-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?([:,].*)?$")


def _add_common(p: argparse.ArgumentParser, inputs: bool = True) -> None:
    if inputs:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--preset", help="name:params, e.g. gilbert-elliott:0.1,0.1,0.1,0.4")
        g.add_argument("--json", dest="input_json", metavar="PATH", help="JSON input file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", "-o", metavar="PATH", help="write records here instead of stdout")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default MARKOV_FLB_THREADS)")
    p.add_argument("--config", metavar="PATH", help="JSON defaults merged under explicit flags")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="markov-flb",
                                 description="Finite-length bounds for Markov sources and channels.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measures", help="transition-matrix Renyi entropies over a theta sweep")
    _add_common(p)
    p.add_argument("--theta", default="-0.9:0.05:3", help="start:step:stop or list")
    p.add_argument("--kind", default="upper,lower", help="comma list of lower, upper, two:<theta'>")
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("bounds", help="finite-length source or channel bounds")
    p.add_argument("target", choices=("source", "channel"))
    _add_common(p)
    p.add_argument("--n", required=True, help="blocklength(s)")
    p.add_argument("--R", help="per-letter source rate sweep (nats)")
    p.add_argument("--theorems", default="T5,T6,T7,T8", help=f"source bounds: {','.join(SOURCE_THEOREMS)}")
    p.add_argument("--which", default="ach_T13,ach_T14,conv_T14c,conv_T16",
                   help=f"channel bounds: {','.join(CHANNEL_BOUNDS)}")
    p.add_argument("--k", help="code dimension(s) for channel achievability")
    p.add_argument("--log-M", dest="log_M", help="log codebook size(s) for channel converses")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("exponents", help="large- and moderate-deviation exponents")
    _add_common(p)
    p.add_argument("--task", choices=("ld_source", "ld_channel", "md"), default="ld_source")
    p.add_argument("--R", help="rate sweep; code rate for ld_channel")
    p.add_argument("--delta", default="0.1", help="moderate-deviation delta sweep")
    p.add_argument("--kind", choices=("lower", "upper"), default="upper")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("second-order", help="normal approximation of log M")
    _add_common(p)
    p.add_argument("--n", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--role", choices=("source", "channel"), default="source")
    p.add_argument("--alphabet-size", dest="alphabet_size", type=int, default=None)
    p.set_defaults(func=cmd_second_order)

    p = sub.add_parser("convert", help="regular channel to conditional additive channel")
    _add_common(p)
    p.add_argument("--markov", metavar="PATH", help='JSON {"W": [[...]], "Q": [...]} noise on B')
    p.add_argument("--reverse", action="store_true", help="reverse-lexicographic choices")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("verify", help="run property suites and print a JSON report")
    _add_common(p, inputs=False)
    p.add_argument("--suite", default="all", help=f"all or comma list of {','.join(SUITES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller sandwich suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo hash coding or varentropy")
    _add_common(p)
    p.add_argument("--what", choices=("hash", "varentropy"), default="hash")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ties-correct", action="store_true", help="count decoder ties as successes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig1", help="upper and lower measure curves of the reference Gilbert-Elliott chain")
    _add_common(p)
    p.add_argument("--theta", default="-0.9:0.05:3")
    p.set_defaults(func=cmd_fig1)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = ap.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps(dict(error="config", message=str(exc))), file=sys.stderr)
        return EXIT_INPUT
    try:
        recs, cols, code = args.func(args)
    except (InputError, MarkovFLBError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(json.dumps(dict(error=type(exc).__name__, message=str(exc))), file=sys.stderr)
        return EXIT_INPUT
    if args.command in ("verify", "convert") and args.format == "json":
        recs = recs[0]
    buf = io.StringIO()
    if isinstance(recs, dict):
        json.dump(_jsonable(recs), buf, indent=2)
        buf.write("\n")
    else:
        emit(recs, args.format, buf, cols)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
