"""Command-line front end: ``dpa analyze | simulate | compare``.

Exit codes: 0 success, 1 model or usage error, 2 analysis error,
3 comparison verdict ``fail``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction

from . import __version__
from .engine import build_prob_tree, makespan
from .errors import DpaError, ModelError, UnknownEvent, UnknownHistory, UnsupportedQuery
from .model import DpaModel, load_model, parse_rational
from .montecarlo import estimate
from .report import analysis_report, compare, comparison_doc, dumps, estimate_report

EXIT_OK, EXIT_INPUT, EXIT_ANALYSIS, EXIT_COMPARE = 0, 1, 2, 3
DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ModelError(f"environment variable {name} must be an integer, got {raw!r}")


def _parse_queries(items: list[str]) -> tuple[bool, list[tuple[str, str]]]:
    want_makespan = False
    precedes = []
    for q in items:
        if q == "makespan":
            want_makespan = True
        elif q == "histories":
            pass
        elif q.startswith("precedes:"):
            parts = q[len("precedes:"):].split(",")
            if len(parts) != 2 or not all(p.strip() for p in parts):
                raise UnsupportedQuery(f"precedes query needs two events 'a,b', got {q!r}")
            precedes.append((parts[0].strip(), parts[1].strip()))
        else:
            raise UnsupportedQuery(f"unknown query {q!r}")
    return want_makespan, precedes


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path: str, absolute_time: bool) -> tuple[DpaModel, DpaModel]:
    m = load_model(path)
    return m, (m.with_absolute_time() if absolute_time else m)


def cmd_analyze(args) -> int:
    want_makespan, precedes = _parse_queries(args.query or ["histories"])
    eps = parse_rational(args.prune_eps, "--prune-eps")
    if not 0 <= eps < 1:
        raise ModelError("--prune-eps must lie in [0, 1)")
    if args.cdf_grid < 1:
        raise ModelError("--cdf-grid must be positive")
    orig, m = _load(args.model, want_makespan)
    for a, b in precedes:
        m.parse_event(a), m.parse_event(b)
    tree = build_prob_tree(m, prune_eps=eps, workers=args.workers)
    ms = makespan(tree) if want_makespan else None
    doc = analysis_report(m, tree, precedes, ms, args.cdf_grid)
    doc["model"]["digest"] = orig.digest()
    _emit(dumps(doc), args.out)
    return EXIT_OK


def _sampling(args) -> tuple[int, int]:
    samples = args.samples if args.samples is not None else _env_int("DPA_SAMPLES", DEFAULT_SAMPLES)
    seed = args.seed if args.seed is not None else _env_int("DPA_SEED", DEFAULT_SEED)
    if samples < 1:
        raise ModelError("--samples must be >= 1")
    if seed < 0:
        raise ModelError("--seed must be >= 0")
    return samples, seed


def cmd_simulate(args) -> int:
    samples, seed = _sampling(args)
    m = load_model(args.model)
    est = estimate(m, samples, seed, workers=args.workers)
    _emit(dumps(estimate_report(m, est)), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    samples, seed = _sampling(args)
    orig = load_model(args.model)
    m = orig.with_absolute_time()
    tree = build_prob_tree(m, workers=args.workers)
    exact = tree.history_distribution()
    if args.inject_bias:
        first = min(exact)
        exact[first] += Fraction(args.inject_bias)
    est = estimate(orig, samples, seed, workers=args.workers)
    rep = compare(m, exact, est, makespan(tree))
    doc = comparison_doc(m, rep)
    doc["model"]["digest"] = orig.digest()
    _emit(dumps(doc), args.out)
    return EXIT_OK if rep.passed else EXIT_COMPARE


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpa", description="Exact analysis of acyclic duration probabilistic automata.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="exact probabilistic reachability analysis")
    a.add_argument("model")
    a.add_argument("--prune-eps", default="0", help="discard branches lighter than this (rational)")
    a.add_argument("--query", action="append",
                   help="makespan | precedes:A,B | histories (repeatable)")
    a.add_argument("--cdf-grid", type=int, default=101, help="points of the sampled makespan cdf")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    for name, func, text in (("simulate", cmd_simulate, "Monte Carlo estimate"),
                             ("compare", cmd_compare, "exact result versus Monte Carlo")):
        s = sub.add_parser(name, help=text)
        s.add_argument("model")
        s.add_argument("--samples", type=int, help="default: $DPA_SAMPLES or %d" % DEFAULT_SAMPLES)
        s.add_argument("--seed", type=int, help="default: $DPA_SEED or %d" % DEFAULT_SEED)
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--out")
        if name == "compare":
            # test hook: perturb the first exact probability to exercise the failure path
            s.add_argument("--inject-bias", default=None, help=argparse.SUPPRESS)
        s.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ModelError, UnsupportedQuery, UnknownEvent, UnknownHistory) as exc:
        print(f"dpa: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DpaError as exc:
        print(f"dpa: analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"dpa: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
