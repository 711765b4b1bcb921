"""Black-box problem abstraction, FE ledger and grouping container."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

STAGES = (
    "additive_stage",
    "msvd_stage",
    "gss_stage",
    "gsvd_stage",
    "nvg_stage",
    "baseline",
    "optimization",
)


class BudgetExhausted(RuntimeError):
    """Raised when an evaluation would exceed the ledger budget."""


class NonFiniteObjective(ValueError):
    """Raised by decomposers when a probe returns NaN or inf."""


class FeLedger:
    """Per-stage fitness-evaluation counters with an optional hard budget.

    Increments are guarded by a lock so one ledger can be shared by
    independent runs in a thread pool.
    """

    def __init__(self, budget: int | None = None):
        if budget is not None and budget <= 0:
            raise ValueError("budget must be positive")
        self.budget = budget
        self._counts = dict.fromkeys(STAGES, 0)
        self._lock = threading.Lock()

    def charge(self, stage: str, n: int = 1) -> None:
        if stage not in self._counts:
            raise KeyError(f"unknown ledger stage {stage!r}")
        with self._lock:
            total = sum(self._counts.values())
            if self.budget is not None and total + n > self.budget:
                raise BudgetExhausted(
                    f"budget {self.budget} exhausted ({total} used, {n} requested)"
                )
            self._counts[stage] += n

    def __getitem__(self, stage: str) -> int:
        return self._counts[stage]

    def __getattr__(self, name: str) -> int:
        if name in STAGES:
            return self._counts[name]
        raise AttributeError(name)

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    @property
    def remaining(self) -> int | None:
        if self.budget is None:
            return None
        return self.budget - self.total

    def as_dict(self) -> dict[str, int]:
        d = dict(self._counts)
        d["total"] = self.total
        return d

    def __repr__(self) -> str:
        return f"FeLedger({self.as_dict()}, budget={self.budget})"


class ObjectiveProblem:
    """An n-dimensional box-bounded minimisation problem.

    All access to the objective goes through :meth:`evaluate`, which charges
    exactly one FE to the requested ledger stage. There is no caching.
    """

    def __init__(
        self,
        objective: Callable[[np.ndarray], float],
        lower_bounds,
        upper_bounds,
        ledger: FeLedger | None = None,
        name: str = "problem",
    ):
        lb = np.asarray(lower_bounds, dtype=float).copy()
        ub = np.asarray(upper_bounds, dtype=float).copy()
        if lb.ndim != 1 or lb.shape != ub.shape or lb.size == 0:
            raise ValueError("bounds must be 1-D vectors of equal, non-zero length")
        if not np.all(lb < ub):
            raise ValueError("lower bounds must be strictly below upper bounds")
        lb.flags.writeable = False
        ub.flags.writeable = False
        self._objective = objective
        self.lower_bounds = lb
        self.upper_bounds = ub
        self.ledger = ledger if ledger is not None else FeLedger()
        self.name = name

    @property
    def dimension(self) -> int:
        return self.lower_bounds.size

    @property
    def lb(self) -> np.ndarray:
        return self.lower_bounds

    @property
    def ub(self) -> np.ndarray:
        return self.upper_bounds

    @property
    def midpoint(self) -> np.ndarray:
        return (self.lower_bounds + self.upper_bounds) / 2.0

    def evaluate(self, point, stage: str = "optimization") -> float:
        x = np.asarray(point, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a vector of length {self.dimension}, got {x.shape}")
        self.ledger.charge(stage)
        return float(self._objective(x))

    def with_ledger(self, ledger: FeLedger) -> "ObjectiveProblem":
        """Same objective and bounds, fresh ledger (for independent runs)."""
        return ObjectiveProblem(self._objective, self.lower_bounds, self.upper_bounds, ledger, self.name)


def evaluate(problem: ObjectiveProblem, point, stage: str = "optimization") -> float:
    return problem.evaluate(point, stage)


@dataclass
class GroupingResult:
    """Output of every decomposer: three separable classes plus non-separable groups."""

    additively_separable: list[int] = field(default_factory=list)
    multiplicatively_separable: list[int] = field(default_factory=list)
    generally_separable: list[int] = field(default_factory=list)
    nonseparable_groups: list[list[int]] = field(default_factory=list)

    @property
    def separable(self) -> set[int]:
        return (
            set(self.additively_separable)
            | set(self.multiplicatively_separable)
            | set(self.generally_separable)
        )

    def validate(self, n: int) -> None:
        """Raise ValueError unless the sets partition {0, ..., n-1}."""
        parts = [
            self.additively_separable,
            self.multiplicatively_separable,
            self.generally_separable,
            *self.nonseparable_groups,
        ]
        seen: set[int] = set()
        for part in parts:
            s = set(part)
            if len(s) != len(part):
                raise ValueError("duplicate index inside one set")
            if seen & s:
                raise ValueError(f"sets overlap on {sorted(seen & s)}")
            seen |= s
        for g in self.nonseparable_groups:
            if not g:
                raise ValueError("empty non-separable group")
        if seen != set(range(n)):
            missing = sorted(set(range(n)) - seen)
            extra = sorted(seen - set(range(n)))
            raise ValueError(f"not a partition: missing={missing[:10]} extra={extra[:10]}")

    def canonical(self) -> "GroupingResult":
        """Sorted copy; groups ordered by their smallest member."""
        groups = sorted((sorted(g) for g in self.nonseparable_groups), key=lambda g: g[0])
        return GroupingResult(
            sorted(self.additively_separable),
            sorted(self.multiplicatively_separable),
            sorted(self.generally_separable),
            groups,
        )

    def to_json(self, ledger: FeLedger | None = None) -> dict:
        c = self.canonical()
        d = {
            "s1": [int(i) for i in c.additively_separable],
            "s2": [int(i) for i in c.multiplicatively_separable],
            "s3": [int(i) for i in c.generally_separable],
            "nonsep": [[int(i) for i in g] for g in c.nonseparable_groups],
        }
        if ledger is not None:
            d["ledger"] = ledger.as_dict()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GroupingResult":
        return cls(list(d["s1"]), list(d["s2"]), list(d["s3"]), [list(g) for g in d["nonsep"]])
