"""Discrete-event simulator used as a statistical oracle for the exact engine.

Random numbers come from one Philox stream keyed by the seed.  Run ``r``
consumes the doubles at positions ``r*S .. r*S+S-1`` where ``S`` is the total
number of steps (one duration draw per step, process-major order), so every
run has its own deterministic sub-stream and any batch of runs can be
regenerated independently of how the work was split.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AnalysisError
from .model import DpaModel, Event, GlobalState, check_resources, scheduler_decision

log = logging.getLogger(__name__)

CHUNK = 1 << 16
_CLOCK_TOL = 1e-9


# ---------------------------------------------------------------------------
# random stream
# ---------------------------------------------------------------------------

def _step_index(m: DpaModel) -> dict[tuple[int, int], int]:
    out = {}
    for i, p in enumerate(m.processes):
        for j in range(p.k):
            out[(i, j)] = len(out)
    return out


def uniforms(seed: int, first_run: int, runs: int, width: int) -> np.ndarray:
    """Rows ``first_run .. first_run+runs-1`` of the run-major uniform stream."""
    bg = np.random.Philox(key=seed)
    offset = first_run * width
    bg.advance(offset // 4)
    gen = np.random.Generator(bg)
    skip = offset % 4
    raw = gen.random(skip + runs * width)
    return raw[skip:].reshape(runs, width)


def durations(m: DpaModel, seed: int, first_run: int, runs: int) -> np.ndarray:
    """Sampled durations, one column per step, each uniform on ``[lo, hi)``."""
    idx = _step_index(m)
    u = uniforms(seed, first_run, runs, len(idx))
    lo = np.empty(len(idx))
    span = np.empty(len(idx))
    for (i, j), c in idx.items():
        s = m.step(i, j)
        lo[c] = float(s.lo)
        span[c] = float(s.hi - s.lo)
    return lo + span * u


# ---------------------------------------------------------------------------
# single run (reference replay)
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    word: list[tuple[Event, float]]
    history: tuple[Event, ...]
    makespan: float
    durations: dict[tuple[int, int], float]
    ties: int = 0


def replay(m: DpaModel, y: Sequence[float]) -> RunRecord:
    """Run the DPA once with the given step durations (process-major order)."""
    idx = _step_index(m)
    dur = {key: float(y[c]) for key, c in idx.items()}
    q = GlobalState.initial(m)
    now = 0.0
    started: dict[int, float] = {}
    word: list[tuple[Event, float]] = []
    ties = 0
    while not q.is_final(m):
        starts = scheduler_decision(m, q)
        if starts:
            q = q.advance(e.proc for e in starts)
            check_resources(m, q)
            for e in starts:
                started[e.proc] = now
                word.append((e, now))
            continue
        due = {i: started[i] + dur[(i, q.step_of(i))] for i in q.active()}
        first = min(due.values())
        tied = [i for i in m.priority if due.get(i) == first]
        ties += len(tied) > 1
        i = tied[0]
        j = q.step_of(i)
        now = first
        if abs((now - started[i]) - dur[(i, j)]) > _CLOCK_TOL * max(1.0, now):
            raise AnalysisError(f"clock of process {i} disagrees with its duration at its end")
        word.append((Event("e", i, j), now))
        q = q.advance([i])
    return RunRecord(word, tuple(e for e, _ in word), now, dur, ties)


def sample_run(m: DpaModel, seed: int, run: int = 0) -> RunRecord:
    """Run number ``run`` of the stream keyed by ``seed``."""
    return replay(m, durations(m, seed, run, 1)[0])


# ---------------------------------------------------------------------------
# vectorized batches
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    durations: np.ndarray     # runs x steps
    histories: np.ndarray     # runs x events, codes into m.events()
    makespan: np.ndarray
    ties: int


def simulate_batch(m: DpaModel, seed: int, first_run: int, runs: int) -> Batch:
    idx = _step_index(m)
    y = durations(m, seed, first_run, runs)
    codes = {e: c for c, e in enumerate(m.events())}
    n = m.n
    ks = np.array([p.k for p in m.processes])
    radix = 2 * ks + 1
    weights = np.concatenate([[1], np.cumprod(radix)[:-1]]).astype(np.int64)

    locs = np.zeros((runs, n), dtype=np.int64)
    start = np.zeros((runs, n))
    now = np.zeros(runs)
    hist = np.full((runs, m.total_events()), -1, dtype=np.int64)
    ptr = np.zeros(runs, dtype=np.int64)
    ties = 0
    rows = np.arange(runs)
    for _ in range(m.total_events()):
        state = locs @ weights
        uniq, inverse = np.unique(state, return_inverse=True)
        inverse = inverse.reshape(-1)
        done = True
        for g, code in enumerate(uniq):
            sel = rows[inverse == g]
            q = GlobalState(tuple(int(v) for v in locs[sel[0]]))
            if q.is_final(m):
                continue
            done = False
            starts = scheduler_decision(m, q)
            if starts:
                check_resources(m, q.advance(e.proc for e in starts))
                for e in starts:
                    hist[sel, ptr[sel]] = codes[e]
                    ptr[sel] += 1
                    start[sel, e.proc] = now[sel]
                    locs[sel, e.proc] += 1
                continue
            active = [i for i in m.priority if q.is_active(i)]
            due = np.stack([start[sel, i] + y[sel, idx[(i, q.step_of(i))]] for i in active], axis=1)
            best = due.min(axis=1)
            ties += int(np.count_nonzero((due == best[:, None]).sum(axis=1) > 1))
            win = np.argmin(due, axis=1)       # first minimum = highest priority
            now[sel] = best
            for a, i in enumerate(active):
                mine = sel[win == a]
                if mine.size == 0:
                    continue
                col = idx[(i, q.step_of(i))]
                clk = now[mine] - start[mine, i]
                if np.any(np.abs(clk - y[mine, col]) > _CLOCK_TOL * np.maximum(1.0, now[mine])):
                    raise AnalysisError(f"clock of process {i} disagrees with its duration at its end")
                hist[mine, ptr[mine]] = codes[Event("e", i, q.step_of(i))]
                ptr[mine] += 1
                locs[mine, i] += 1
        if done:
            break
    return Batch(y, hist, now, ties)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass
class HistoryEstimate:
    count: int
    p: float
    se: float


@dataclass
class EstimateReport:
    samples: int
    seed: int
    histories: dict[tuple[Event, ...], HistoryEstimate]
    makespan_mean: float
    makespan_var: float
    ties: int
    cdf: list[tuple[float, float]] = field(default_factory=list)

    @property
    def makespan_se(self) -> float:
        return math.sqrt(self.makespan_var / self.samples)


@dataclass
class _Partial:
    counts: dict[tuple[int, ...], int]
    n: int
    mean: float
    m2: float
    ties: int
    below: np.ndarray


def _summarize(m: DpaModel, seed: int, first: int, runs: int, cdf_at: np.ndarray) -> _Partial:
    b = simulate_batch(m, seed, first, runs)
    uniq, counts = np.unique(b.histories, axis=0, return_counts=True)
    hc = {tuple(int(v) for v in row): int(c) for row, c in zip(uniq, counts)}
    mean = float(b.makespan.mean())
    m2 = float(((b.makespan - mean) ** 2).sum())
    below = (b.makespan[None, :] <= cdf_at[:, None]).sum(axis=1)
    return _Partial(hc, runs, mean, m2, b.ties, below)


def estimate(m: DpaModel, samples: int, seed: int, workers: int = 1,
             cdf_at: Sequence[float] = (), chunk: int = CHUNK) -> EstimateReport:
    """Monte Carlo estimate over ``samples`` runs.

    Work is cut into fixed chunks and merged in chunk order, so the report is
    identical for any number of workers.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    grid = np.asarray(list(cdf_at), dtype=float)
    spans = [(s, min(chunk, samples - s)) for s in range(0, samples, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sp: _summarize(m, seed, sp[0], sp[1], grid), spans))
    else:
        parts = [_summarize(m, seed, s, r, grid) for s, r in spans]

    counts: dict[tuple[int, ...], int] = {}
    n, mean, m2, ties = 0, 0.0, 0.0, 0
    below = np.zeros(len(grid), dtype=np.int64)
    for p in parts:
        for h, c in p.counts.items():
            counts[h] = counts.get(h, 0) + c
        # Chan et al. pairwise merge, in chunk order
        tot = n + p.n
        delta = p.mean - mean
        mean += delta * p.n / tot
        m2 += p.m2 + delta * delta * n * p.n / tot
        n = tot
        ties += p.ties
        below += p.below
    if ties:
        log.warning("%d exact ties between completion times (broken by priority)", ties)

    events = m.events()
    hist = {}
    for h in sorted(counts):
        c = counts[h]
        phat = c / samples
        hist[tuple(events[k] for k in h)] = HistoryEstimate(c, phat, math.sqrt(phat * (1 - phat) / samples))
    var = m2 / (samples - 1) if samples > 1 else 0.0
    cdf = [(float(t), int(k) / samples) for t, k in zip(grid, below)]
    return EstimateReport(samples, seed, hist, mean, var, ties, cdf)
