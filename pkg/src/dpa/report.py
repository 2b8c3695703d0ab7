"""JSON report documents for analysis, simulation and comparison."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .engine import MakespanResult, ProbTree, event_precedes
from .model import DpaModel
from .montecarlo import EstimateReport

Z_LIMIT = 4.0


def rat(q: Fraction) -> dict[str, Any]:
    """Exact ``"p/q"`` string alongside its nearest double."""
    return {"exact": str(q), "float": float(q)}


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def model_summary(m: DpaModel) -> dict[str, Any]:
    return {
        "digest": m.digest(),
        "processes": m.names,
        "scheduler": m.scheduler.policy,
    }


def makespan_doc(ms: MakespanResult, grid: int) -> dict[str, Any]:
    lo, hi = ms.support
    pieces = [
        {"interval": [str(a), str(b)], "density": repr(p)}
        for a, b, p in zip(ms.density.breaks, ms.density.breaks[1:], ms.density.polys)
    ]
    return {
        "expectation": rat(ms.expectation),
        "support": [str(lo), str(hi)],
        "mass": rat(ms.total),
        "cdf": [[float(t), float(f)] for t, f in ms.grid(grid)],
        "density_pieces": pieces,
    }


def analysis_report(m: DpaModel, tree: ProbTree, precedes: list[tuple[str, str]],
                    makespan: MakespanResult | None, grid: int) -> dict[str, Any]:
    hist = [
        {"history": m.history_label(h), "probability": rat(p)}
        for h, p in sorted(tree.history_distribution().items())
    ]
    doc: dict[str, Any] = {
        "kind": "analysis",
        "model": model_summary(m),
        "histories": hist,
        "prune_eps": str(tree.prune_eps),
        "discarded_mass": rat(tree.discarded_mass),
        "stats": tree.stats(),
        "queries": {},
    }
    if precedes:
        doc["queries"]["precedes"] = [
            {"a": a, "b": b, "probability": rat(event_precedes(tree, a, b))} for a, b in precedes
        ]
    if makespan is not None:
        doc["queries"]["makespan"] = makespan_doc(makespan, grid)
    return doc


def estimate_report(m: DpaModel, est: EstimateReport) -> dict[str, Any]:
    return {
        "kind": "simulation",
        "model": model_summary(m),
        "samples": est.samples,
        "seed": est.seed,
        "histories": [
            {"history": m.history_label(h), "count": e.count, "p": e.p, "se": e.se}
            for h, e in est.histories.items()
        ],
        "makespan": {"mean": est.makespan_mean, "variance": est.makespan_var,
                     "se": est.makespan_se},
        "ties": est.ties,
    }


@dataclass
class ComparisonRow:
    history: str
    exact: Fraction
    estimate: float
    se: float
    z: float

    @property
    def ok(self) -> bool:
        return abs(self.z) <= Z_LIMIT


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    makespan: ComparisonRow | None = None
    samples: int = 0
    seed: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        rows = self.rows + ([self.makespan] if self.makespan else [])
        return all(r.ok for r in rows)


def _z(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def compare(m: DpaModel, exact: dict, est: EstimateReport,
            makespan: MakespanResult | None = None) -> ComparisonReport:
    """Join exact and sampled history probabilities.

    The standard error uses the exact probability, so a history the engine
    rules out but the simulator produces gets an infinite z-score.
    """
    n = est.samples
    keys = sorted(set(exact) | set(est.histories))
    rows = []
    for h in keys:
        p = Fraction(exact.get(h, 0))
        got = est.histories[h].p if h in est.histories else 0.0
        se = math.sqrt(float(p) * (1 - float(p)) / n)
        rows.append(ComparisonRow(m.history_label(h), p, got, se, _z(got - float(p), se)))
    ms = None
    if makespan is not None:
        se = est.makespan_se
        ms = ComparisonRow("makespan.mean", makespan.expectation, est.makespan_mean, se,
                           _z(est.makespan_mean - float(makespan.expectation), se))
    return ComparisonReport(rows, ms, n, est.seed)


def _row_doc(r: ComparisonRow) -> dict[str, Any]:
    return {
        "exact": rat(r.exact),
        "estimate": r.estimate,
        "se": r.se,
        "z": r.z if math.isfinite(r.z) else ("inf" if r.z > 0 else "-inf"),
        "pass": r.ok,
    }


def comparison_doc(m: DpaModel, rep: ComparisonReport) -> dict[str, Any]:
    doc = {
        "kind": "comparison",
        "model": model_summary(m),
        "samples": rep.samples,
        "seed": rep.seed,
        "z_limit": Z_LIMIT,
        "histories": [dict(history=r.history, **_row_doc(r)) for r in rep.rows],
        "verdict": "pass" if rep.passed else "fail",
    }
    if rep.makespan is not None:
        doc["makespan_mean"] = _row_doc(rep.makespan)
    return doc
