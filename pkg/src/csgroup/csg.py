"""Composite separability grouping.

Stages, in the order a variable meets them:

1. additive check (one-vs-rest finite difference on box corners),
2. multiplicative check (log-difference of halved-coordinate corner deltas),
3. golden-section search for the variable's independent minimum,
4. minimum-shift test against the other unresolved variables,
5. recursive grouping of what is left into non-separable groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import FeLedger, GroupingResult, NonFiniteObjective, ObjectiveProblem

UNIT_ROUNDOFF = np.finfo(float).eps / 2
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEGENERATE_FLOOR = 1e-300


def gamma(k: float) -> float:
    """Rounding-error growth factor k*u / (1 - k*u)."""
    ku = k * UNIT_ROUNDOFF
    return ku / (1.0 - ku)


@dataclass
class CsgConfig:
    """Tuning knobs.

    ``eps_gss`` is the absolute golden-section precision; when None it is
    ``eps_gss_rel * (ub[i] - lb[i])`` per coordinate. The first probe step of
    the minimum-shift tests is ``alpha * (ub[i] - lb[i])``.
    """

    eps_gss: float | None = None
    eps_gss_rel: float = 1e-7
    alpha: float = 1e-6
    halving_factor: float = 0.5
    eps1_scale: float = 1.0
    eps2_scale: float = 0.4
    eps2_floor: float = 1e-10
    nvg_seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 < self.halving_factor < 1.0:
            raise ValueError("halving_factor must lie in (0, 1)")
        if self.eps_gss is not None and self.eps_gss <= 0:
            raise ValueError("eps_gss must be positive")
        if not 0.0 < self.eps_gss_rel < 1.0:
            raise ValueError("eps_gss_rel must lie in (0, 1)")

    def gss_eps(self, problem: ObjectiveProblem, i: int) -> float:
        width = problem.ub[i] - problem.lb[i]
        if self.eps_gss is not None:
            if self.eps_gss >= width:
                raise ValueError("eps_gss must be smaller than every coordinate range")
            return self.eps_gss
        return self.eps_gss_rel * width

    def delta0(self, problem: ObjectiveProblem, i: int) -> float:
        return self.alpha * (problem.ub[i] - problem.lb[i])

    @classmethod
    def from_dict(cls, d: dict | None) -> "CsgConfig":
        return cls(**(d or {}))


class ContextArchive:
    """Rolling context vector plus one archived context row per variable.

    Rows that were never written stay at the box midpoint, so only written
    rows are stored.
    """

    def __init__(self, lb: np.ndarray, ub: np.ndarray):
        self.lb = lb
        self.ub = ub
        self.cv = (lb + ub) / 2.0
        self._rows: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        r = self._rows.get(i)
        return ((self.lb + self.ub) / 2.0) if r is None else r.copy()

    def record(self, i: int) -> None:
        self._rows[i] = self.cv.copy()

    def has_row(self, i: int) -> bool:
        return i in self._rows

    @property
    def c_arc(self) -> np.ndarray:
        n = self.cv.size
        m = np.tile((self.lb + self.ub) / 2.0, (n, 1))
        for i, r in self._rows.items():
            m[i] = r
        return m


def _eval(problem: ObjectiveProblem, x: np.ndarray, stage: str) -> float:
    v = problem.evaluate(x, stage)
    if not math.isfinite(v):
        raise NonFiniteObjective(f"objective returned {v} during {stage}")
    return v


# ---------------------------------------------------------------------------
# stage 1: additive separability


@dataclass
class Corners:
    """The four corner probes shared by the additive and multiplicative checks."""

    i: int
    x_ll: np.ndarray
    x_lu: np.ndarray
    x_ul: np.ndarray
    x_uu: np.ndarray
    f_ll: float
    f_lu: float
    f_ul: float
    f_uu: float

    @property
    def beta1(self) -> float:
        return abs((self.f_ul - self.f_ll) - (self.f_uu - self.f_lu))

    def eps1(self, scale: float = 1.0) -> float:
        n = self.x_ll.size
        mag = abs(self.f_ll) + abs(self.f_ul) + abs(self.f_lu) + abs(self.f_uu)
        return scale * gamma(math.sqrt(n) + 2.0) * mag


def additive_check(
    problem: ObjectiveProblem, i: int, cached: dict, stage: str = "additive_stage"
) -> Corners:
    """Evaluate the two corners that move coordinate ``i`` against the rest.

    ``cached`` holds ``f_ll`` and ``f_uu`` from the all-lower and all-upper
    corners. Exactly two evaluations are charged.
    """
    lb, ub = problem.lb, problem.ub
    x_lu = ub.copy()
    x_lu[i] = lb[i]
    x_ul = lb.copy()
    x_ul[i] = ub[i]
    f_lu = _eval(problem, x_lu, stage)
    f_ul = _eval(problem, x_ul, stage)
    return Corners(i, lb.copy(), x_lu, x_ul, ub.copy(), cached["f_ll"], f_lu, f_ul, cached["f_uu"])


# ---------------------------------------------------------------------------
# stage 2: multiplicative separability


@dataclass
class MsvdResult:
    beta2: float
    eps2: float
    degenerate: bool = False

    @property
    def multiplicative(self) -> bool:
        return not self.degenerate and self.beta2 < self.eps2


def msvd(
    problem: ObjectiveProblem,
    i: int,
    corners: Corners,
    halving_factor: float = 0.5,
    eps2_scale: float = 0.4,
    eps2_floor: float = 1e-10,
    stage: str = "msvd_stage",
) -> MsvdResult:
    """Multiplicative check reusing the additive-stage corners (4 new FEs).

    Each corner is re-evaluated with coordinate ``i`` scaled by
    ``halving_factor``; if coordinate ``i`` enters only through a product
    the log-ratio of the differences does not depend on the other corner.
    """
    pairs = []
    for x, f in (
        (corners.x_ll, corners.f_ll),
        (corners.x_ul, corners.f_ul),
        (corners.x_lu, corners.f_lu),
        (corners.x_uu, corners.f_uu),
    ):
        xp = x.copy()
        xp[i] = halving_factor * x[i]
        pairs.append((f, _eval(problem, xp, stage)))

    F = [f - fp for f, fp in pairs]
    g = gamma(math.sqrt(corners.x_ll.size) + 2.0)
    if min(abs(v) for v in F) < DEGENERATE_FLOOR:
        return MsvdResult(math.inf, 0.0, degenerate=True)
    F_ll, F_ul, F_lu, F_uu = F
    d1 = math.log(abs(F_ll)) - math.log(abs(F_ul))
    d2 = math.log(abs(F_lu)) - math.log(abs(F_uu))
    beta2 = abs(d1 - d2)
    # rounding in each difference F = f - f' propagates as err/|F| into its log
    propagated = sum(g * (abs(f) + abs(fp)) / abs(v) for (f, fp), v in zip(pairs, F))
    eps2 = eps2_scale * (propagated + g * (abs(d1) + abs(d2) + 1.0)) + eps2_floor
    return MsvdResult(beta2, eps2)


# ---------------------------------------------------------------------------
# stage 3: golden-section search


def gss_iteration_bound(width: float, eps: float) -> int:
    """Upper bound on golden-section iterations to shrink ``width`` below ``eps``."""
    if eps >= width:
        return 0
    return math.ceil(math.log(eps / width) / math.log(GOLDEN))


def golden_section(fun, a: float, b: float, eps: float, history: list | None = None) -> tuple[float, int]:
    """Minimise a 1-D function on [a, b].

    Stops when the bracket is narrower than ``eps`` or the two interior
    samples tie. Returns (bracket midpoint, iterations). If ``history`` is
    given, the bracket after every iteration is appended to it.
    """
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    it = 0
    while (b - a) >= eps and fc != fd:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
        it += 1
        if history is not None:
            history.append((a, b))
    return (a + b) / 2.0, it


def gss_minimize(
    problem: ObjectiveProblem, i: int, context, eps: float, stage: str = "gss_stage"
) -> float:
    """Independent minimum of coordinate ``i`` with everything else held at ``context``."""
    x = np.array(context, dtype=float)

    def fun(t):
        x[i] = t
        return _eval(problem, x, stage)

    xi, _ = golden_section(fun, float(problem.lb[i]), float(problem.ub[i]), eps)
    return xi


# ---------------------------------------------------------------------------
# stages 4-5: minimum-shift tests


def shift_probe(
    problem: ObjectiveProblem, x: np.ndarray, i: int, delta0: float, stage: str
) -> tuple[float, float | None, float | None]:
    """Probe coordinate ``i`` at x[i] -/+ delta around the context point ``x``.

    delta grows tenfold while a probe ties with f(x). A side whose probe
    would leave the box is dropped (its value stays None, or keeps its last
    in-box value); the loop ends when every remaining side differs from f(x)
    or both sides have left the box. Returns (f(x), f(x_l), f(x_r)).
    """
    lb, ub = problem.lb[i], problem.ub[i]
    fx = _eval(problem, x, stage)
    fl = fr = None
    open_l = open_r = True
    delta = delta0
    probe = x.copy()
    while True:
        open_l = open_l and x[i] - delta >= lb
        open_r = open_r and x[i] + delta <= ub
        if not (open_l or open_r):
            break
        if open_l:
            probe[i] = x[i] - delta
            fl = _eval(problem, probe, stage)
        if open_r:
            probe[i] = x[i] + delta
            fr = _eval(problem, probe, stage)
        delta *= 10.0
        if (not open_l or fl != fx) and (not open_r or fr != fx):
            break
    return fx, fl, fr


def _probe_lower(fx: float, fl: float | None, fr: float | None) -> bool:
    return (fl is not None and fl - fx < 0) or (fr is not None and fr - fx < 0)


def min_shifted(
    problem: ObjectiveProblem,
    i: int,
    movers: list[int],
    archive: ContextArchive,
    config: CsgConfig,
    stage: str,
) -> bool:
    """True when moving ``movers`` away from the archived context shifts the
    minimum of coordinate ``i``.

    The movers go to their upper bounds. A minimum pinned to a bound can hide
    a shift that points out of the box, so for those the test is repeated
    with the movers at their lower bounds.
    """
    x = archive.row(i)
    delta0 = config.delta0(problem, i)
    x[movers] = problem.ub[movers]
    if _probe_lower(*shift_probe(problem, x, i, delta0, stage)):
        return True
    if problem.lb[i] <= x[i] - delta0 and x[i] + delta0 <= problem.ub[i]:
        return False
    x[movers] = problem.lb[movers]
    return _probe_lower(*shift_probe(problem, x, i, delta0, stage))


def gsvd(
    problem: ObjectiveProblem,
    S,
    archive: ContextArchive,
    config: CsgConfig | None = None,
    stage: str = "gsvd_stage",
) -> list[int]:
    """Generally separable variables among ``S``.

    For each i, the archived context row is loaded, every other member of S
    is moved to its upper bound, and i is separable when neither probe
    around its archived minimum is lower.
    """
    config = config or CsgConfig()
    S = list(S)
    S3 = []
    for i in S:
        others = [j for j in S if j != i]
        if not min_shifted(problem, i, others, archive, config, stage):
            S3.append(i)
    return S3


def rgd(
    problem: ObjectiveProblem,
    i: int,
    groups: list[list[int]],
    archive: ContextArchive,
    config: CsgConfig | None = None,
    stage: str = "nvg_stage",
) -> list[list[int]]:
    """Groups among ``groups`` that interact with variable ``i`` (binary search)."""
    config = config or CsgConfig()
    if not groups:
        return []
    members = [j for g in groups for j in g]
    if not min_shifted(problem, i, members, archive, config, stage):
        return []
    if len(groups) == 1:
        return [groups[0]]
    half = (len(groups) + 1) // 2
    return rgd(problem, i, groups[:half], archive, config, stage) + rgd(
        problem, i, groups[half:], archive, config, stage
    )


def nvg(
    problem: ObjectiveProblem,
    V,
    archive: ContextArchive,
    config: CsgConfig | None = None,
    stage: str = "nvg_stage",
) -> list[list[int]]:
    """Group non-separable variables, merging every group a variable touches."""
    config = config or CsgConfig()
    V = sorted(V)
    if not V:
        return []
    if config.nvg_seed is not None:
        rng = np.random.default_rng(config.nvg_seed)
        first = V.pop(int(rng.integers(len(V))))
    else:
        first = V.pop(0)
    groups: list[list[int]] = [[first]]
    for i in V:
        hit = rgd(problem, i, groups, archive, config, stage)
        if not hit:
            groups.append([i])
        elif len(hit) == 1:
            hit[0].append(i)
        else:
            hit_ids = {id(g) for g in hit}
            merged = [j for g in hit for j in g] + [i]
            groups = [g for g in groups if id(g) not in hit_ids]
            groups.append(merged)
    return [sorted(g) for g in groups]


# ---------------------------------------------------------------------------


@dataclass
class CsgTrace:
    """Per-variable diagnostics kept alongside the grouping."""

    beta1: dict[int, float] = field(default_factory=dict)
    eps1: dict[int, float] = field(default_factory=dict)
    beta2: dict[int, float] = field(default_factory=dict)
    eps2: dict[int, float] = field(default_factory=dict)


def csg_decompose(
    problem: ObjectiveProblem, config: CsgConfig | None = None, trace: CsgTrace | None = None
) -> tuple[GroupingResult, FeLedger]:
    config = config or CsgConfig()
    n = problem.dimension
    lb, ub = problem.lb, problem.ub
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("bounds must be finite")
    archive = ContextArchive(lb, ub)
    S1, S2, rest = [], [], []

    cached = {
        "f_ll": _eval(problem, lb.copy(), "additive_stage"),
        "f_uu": _eval(problem, ub.copy(), "additive_stage"),
    }
    for i in range(n - 1, -1, -1):
        corners = additive_check(problem, i, cached)
        b1, e1 = corners.beta1, corners.eps1(config.eps1_scale)
        if trace is not None:
            trace.beta1[i], trace.eps1[i] = b1, e1
        if b1 < e1:
            S1.append(i)
            continue
        m = msvd(problem, i, corners, config.halving_factor, config.eps2_scale, config.eps2_floor)
        if trace is not None:
            trace.beta2[i], trace.eps2[i] = m.beta2, m.eps2
        if m.multiplicative:
            S2.append(i)
            continue
        archive.cv[i] = gss_minimize(problem, i, archive.cv, config.gss_eps(problem, i))
        archive.record(i)
        rest.append(i)

    rest.sort()
    S3 = gsvd(problem, rest, archive, config)
    s3 = set(S3)
    V = [i for i in rest if i not in s3]
    N = nvg(problem, V, archive, config) if V else []
    result = GroupingResult(sorted(S1), sorted(S2), sorted(S3), N)
    return result, problem.ledger
