"""Duration probabilistic automata: processes, resources, scheduler, product.

Internally processes and steps are 0-based; event labels shown to users are
``<process>.s<j>`` / ``<process>.e<j>`` with 1-based ``j``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple

from .errors import DeadlockError, ModelError, ResourceViolation

log = logging.getLogger(__name__)

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_RATIONAL = re.compile(r"^\s*[+-]?(\d+(\.\d*)?|\.\d+)(/\d+)?\s*$")


@dataclass(frozen=True)
class Step:
    lo: Fraction
    hi: Fraction
    resources: tuple[tuple[str, int], ...] = ()

    @property
    def demands(self) -> dict[str, int]:
        return dict(self.resources)

    @property
    def mean(self) -> Fraction:
        return (self.lo + self.hi) / 2


@dataclass(frozen=True)
class SimpleDpa:
    name: str
    steps: tuple[Step, ...]

    @property
    def k(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Resource:
    name: str
    capacity: int


@dataclass(frozen=True)
class SchedulerSpec:
    policy: str = "liberal"
    order: tuple[str, ...] = ()


@dataclass(frozen=True)
class DpaModel:
    processes: tuple[SimpleDpa, ...]
    resources: tuple[Resource, ...] = ()
    scheduler: SchedulerSpec = SchedulerSpec()
    absolute_time_clock: bool = False

    @property
    def n(self) -> int:
        return len(self.processes)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.processes]

    @property
    def priority(self) -> list[int]:
        """Process indices in priority (and sequentialization) order."""
        if self.scheduler.order:
            pos = {name: i for i, name in enumerate(self.names)}
            return [pos[name] for name in self.scheduler.order]
        return list(range(self.n))

    def capacity(self) -> dict[str, int]:
        return {r.name: r.capacity for r in self.resources}

    def step(self, i: int, j: int) -> Step:
        return self.processes[i].steps[j]

    def with_absolute_time(self, flag: bool = True) -> "DpaModel":
        return DpaModel(self.processes, self.resources, self.scheduler, flag)

    def total_events(self) -> int:
        return 2 * sum(p.k for p in self.processes)

    def events(self) -> list["Event"]:
        out = []
        for i, p in enumerate(self.processes):
            for j in range(p.k):
                out.append(Event("s", i, j))
                out.append(Event("e", i, j))
        return out

    def label(self, ev: "Event") -> str:
        return f"{self.processes[ev.proc].name}.{ev.kind}{ev.step + 1}"

    def parse_event(self, text: str) -> "Event":
        m = re.fullmatch(r"(.+)\.([se])(\d+)", text.strip())
        if m:
            names = self.names
            if m.group(1) in names:
                i = names.index(m.group(1))
                j = int(m.group(3)) - 1
                if 0 <= j < self.processes[i].k:
                    return Event(m.group(2), i, j)
        from .errors import UnknownEvent
        raise UnknownEvent(text)

    def history_label(self, h: tuple["Event", ...]) -> str:
        return " ".join(self.label(e) for e in h)

    # --------------------------------------------------------- serialization
    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "processes": [
                {"name": p.name,
                 "steps": [{"lo": _fmt(s.lo), "hi": _fmt(s.hi), "resources": dict(s.resources)}
                           for s in p.steps]}
                for p in self.processes
            ],
            "resources": [{"name": r.name, "capacity": r.capacity} for r in self.resources],
            "scheduler": {"policy": self.scheduler.policy, "order": list(self.scheduler.order)},
            "options": {"absolute_time_clock": self.absolute_time_clock},
        }
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_rational(value: Any, path: str) -> Fraction:
    if isinstance(value, bool):
        raise ModelError("expected a number, got a boolean", path)
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str) and _RATIONAL.match(value):
        num, _, den = value.strip().partition("/")
        q = Fraction(num)
        if den:
            if int(den) == 0:
                raise ModelError("zero denominator", path)
            q /= int(den)
        return q
    raise ModelError(f"expected an integer, decimal or 'p/q' rational, got {value!r}", path)


def _expect(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise ModelError(message, path)


def parse_model(text: str) -> DpaModel:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(text, parse_float=lambda s: Fraction(s), parse_int=int)
    except json.JSONDecodeError as exc:
        raise ModelError(f"syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    return model_from_dict(doc)


def model_from_dict(doc: Any) -> DpaModel:
    _expect(isinstance(doc, dict), "model must be a JSON object", "$")
    unknown = set(doc) - {"processes", "resources", "scheduler", "options"}
    _expect(not unknown, f"unknown keys {sorted(unknown)}", "$")

    raw_res = doc.get("resources", [])
    _expect(isinstance(raw_res, list), "must be a list", "resources")
    resources = []
    for r_i, r in enumerate(raw_res):
        path = f"resources[{r_i}]"
        _expect(isinstance(r, dict), "must be an object", path)
        name = r.get("name")
        _expect(isinstance(name, str) and bool(_NAME.match(name)), "invalid resource name", path + ".name")
        cap = r.get("capacity")
        _expect(isinstance(cap, int) and not isinstance(cap, bool) and cap >= 1,
                "capacity must be a positive integer", path + ".capacity")
        _expect(name not in {x.name for x in resources}, f"duplicate resource {name!r}", path + ".name")
        resources.append(Resource(name, cap))
    capacity = {r.name: r.capacity for r in resources}

    raw_procs = doc.get("processes")
    _expect(isinstance(raw_procs, list) and len(raw_procs) >= 1, "at least one process required", "processes")
    processes = []
    for p_i, p in enumerate(raw_procs):
        path = f"processes[{p_i}]"
        _expect(isinstance(p, dict), "must be an object", path)
        name = p.get("name")
        _expect(isinstance(name, str) and bool(_NAME.match(name)), "invalid process name", path + ".name")
        _expect(name not in {x.name for x in processes}, f"duplicate process {name!r}", path + ".name")
        raw_steps = p.get("steps")
        _expect(isinstance(raw_steps, list) and len(raw_steps) >= 1, "at least one step required", path + ".steps")
        steps = []
        for s_i, s in enumerate(raw_steps):
            spath = f"{path}.steps[{s_i}]"
            _expect(isinstance(s, dict), "must be an object", spath)
            _expect("lo" in s and "hi" in s, "lo and hi are required", spath)
            lo = parse_rational(s["lo"], spath + ".lo")
            hi = parse_rational(s["hi"], spath + ".hi")
            _expect(lo >= 0, "lo must be nonnegative", spath + ".lo")
            _expect(lo < hi, f"invalid support: lo={lo} must be < hi={hi}", spath)
            demands = s.get("resources", {}) or {}
            _expect(isinstance(demands, dict), "must be an object", spath + ".resources")
            for rname, amount in demands.items():
                rpath = f"{spath}.resources.{rname}"
                _expect(rname in capacity, f"unknown resource {rname!r}", rpath)
                _expect(isinstance(amount, int) and not isinstance(amount, bool) and amount >= 0,
                        "demand must be a nonnegative integer", rpath)
                _expect(amount <= capacity[rname],
                        f"demand {amount} exceeds capacity {capacity[rname]} of {rname!r}", rpath)
            steps.append(Step(lo, hi, tuple(sorted((k, v) for k, v in demands.items() if v))))
        processes.append(SimpleDpa(name, tuple(steps)))

    raw_sched = doc.get("scheduler", {"policy": "liberal"})
    _expect(isinstance(raw_sched, dict), "must be an object", "scheduler")
    policy = raw_sched.get("policy", "liberal")
    _expect(policy in ("liberal", "priority"), f"unknown policy {policy!r}", "scheduler.policy")
    order = raw_sched.get("order")
    names = [p.name for p in processes]
    if order is None:
        _expect(policy == "liberal", "priority scheduler needs an order", "scheduler.order")
        order = []
    _expect(isinstance(order, list) and all(isinstance(o, str) for o in order),
            "order must be a list of process names", "scheduler.order")
    if order or policy == "priority":
        _expect(sorted(order) == sorted(names) and len(set(order)) == len(order),
                "order must list every process exactly once", "scheduler.order")

    raw_opts = doc.get("options", {}) or {}
    _expect(isinstance(raw_opts, dict), "must be an object", "options")
    abs_clock = raw_opts.get("absolute_time_clock", False)
    _expect(isinstance(abs_clock, bool), "must be a boolean", "options.absolute_time_clock")

    return DpaModel(tuple(processes), tuple(resources), SchedulerSpec(policy, tuple(order)), abs_clock)


def load_model(path: str) -> DpaModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


# ---------------------------------------------------------------------------
# discrete semantics
# ---------------------------------------------------------------------------

class Event(NamedTuple):
    kind: str   # "s" start or "e" end
    proc: int
    step: int


@dataclass(frozen=True)
class GlobalState:
    """Per-process location code: ``2j`` idle before step j, ``2j+1`` active in step j."""

    locs: tuple[int, ...]

    @classmethod
    def initial(cls, m: DpaModel) -> "GlobalState":
        return cls((0,) * m.n)

    def is_active(self, i: int) -> bool:
        return self.locs[i] % 2 == 1

    def step_of(self, i: int) -> int:
        return self.locs[i] // 2

    def active(self) -> list[int]:
        return [i for i, c in enumerate(self.locs) if c % 2 == 1]

    def waiting(self, m: DpaModel) -> list[int]:
        """Processes idle before a step that exists (start enabled)."""
        return [i for i, c in enumerate(self.locs) if c % 2 == 0 and c // 2 < m.processes[i].k]

    def is_final(self, m: DpaModel) -> bool:
        return all(c == 2 * m.processes[i].k for i, c in enumerate(self.locs))

    def usage(self, m: DpaModel) -> dict[str, int]:
        used: dict[str, int] = {}
        for i in self.active():
            for r, a in m.step(i, self.step_of(i)).resources:
                used[r] = used.get(r, 0) + a
        return used

    def advance(self, procs) -> "GlobalState":
        locs = list(self.locs)
        for i in procs:
            locs[i] += 1
        return GlobalState(tuple(locs))


class Transition(NamedTuple):
    kind: str                      # "start" or "end"
    events: tuple[Event, ...]      # alpha-ordered labels for a start, one event for an end
    target: GlobalState
    proc: int | None = None        # winner for an end transition


def scheduler_decision(m: DpaModel, q: GlobalState) -> list[Event]:
    """Start events chosen in ``q``, in sequentialization order."""
    waiting = set(q.waiting(m))
    if m.scheduler.policy == "liberal":
        chosen = [i for i in m.priority if i in waiting]
    else:
        cap = m.capacity()
        free = {r: cap[r] - u for r, u in q.usage(m).items()}
        for r in cap:
            free.setdefault(r, cap[r])
        chosen = []
        for i in m.priority:
            if i not in waiting:
                continue
            need = m.step(i, q.step_of(i)).resources
            if all(free[r] >= a for r, a in need):
                for r, a in need:
                    free[r] -= a
                chosen.append(i)
    if not chosen and not q.active() and not q.is_final(m):
        raise DeadlockError(f"scheduler starts nothing in non-final state {q.locs} with no active step")
    return [Event("s", i, q.step_of(i)) for i in chosen]


def check_resources(m: DpaModel, q: GlobalState) -> None:
    cap = m.capacity()
    for r, u in q.usage(m).items():
        if u > cap.get(r, u):
            raise ResourceViolation(f"resource {r!r} over capacity ({u} > {cap[r]}) in state {q.locs}")


def product_successors(m: DpaModel, q: GlobalState) -> list[Transition]:
    starts = scheduler_decision(m, q)
    if starts:
        target = q.advance(e.proc for e in starts)
        check_resources(m, target)
        if scheduler_decision_quiet(m, target):
            log.warning("scheduler issues a second start round in %s", target.locs)
        return [Transition("start", tuple(starts), target)]
    return [Transition("end", (Event("e", i, q.step_of(i)),), q.advance([i]), i) for i in q.active()]


def scheduler_decision_quiet(m: DpaModel, q: GlobalState) -> list[Event]:
    try:
        return scheduler_decision(m, q)
    except DeadlockError:
        return []
