"""Finite-difference baseline detectors: pairwise DG, an RDG-like recursive
set-set decomposer, and the DDG log-domain multiplicative pair check."""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .csg import gamma
from .problem import GroupingResult, ObjectiveProblem


class NonPositiveFitness(ValueError):
    """The log-domain check needs strictly positive objective values."""


def _threshold(n: int, values) -> float:
    return gamma(math.sqrt(n) + 2.0) * sum(abs(v) for v in values)


def _moved(problem: ObjectiveProblem, base: np.ndarray, idx) -> np.ndarray:
    x = base.copy()
    idx = list(idx)
    x[idx] = problem.ub[idx]
    return x


def _components(matrix: np.ndarray) -> GroupingResult:
    n = matrix.shape[0]
    k, labels = connected_components(csr_matrix(matrix), directed=False)
    members: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        members.setdefault(int(lab), []).append(i)
    result = GroupingResult()
    for g in sorted(members.values(), key=lambda g: g[0]):
        if len(g) == 1 and not matrix[g[0]].any():
            result.additively_separable.append(g[0])
        else:
            result.nonseparable_groups.append(g)
    return result


def _pair_probes(problem: ObjectiveProblem, stage: str):
    """Yield (p, q, f_ll, f_ul, f_lu, f_uu) over all pairs, others at lb.

    f(lb) and the n single moves are evaluated once; each pair adds two
    evaluations, so the total is 2*C(n, 2) + n + 1.
    """
    lb = problem.lb.copy()
    n = problem.dimension
    f0 = problem.evaluate(lb, stage)
    single = [problem.evaluate(_moved(problem, lb, [p]), stage) for p in range(n)]
    for p in range(n):
        for q in range(p + 1, n):
            f_lu = problem.evaluate(_moved(problem, lb, [q]), stage)
            f_uu = problem.evaluate(_moved(problem, lb, [p, q]), stage)
            yield p, q, f0, single[p], f_lu, f_uu


def dg_pairwise(
    problem: ObjectiveProblem, epsilon: float | None = None, stage: str = "baseline"
) -> tuple[np.ndarray, GroupingResult]:
    """Classic differential grouping over all pairs on box corners.

    ``epsilon=None`` uses the rounding-error threshold instead of a constant.
    Variables without interactions are reported as additively separable.
    """
    n = problem.dimension
    if n < 2:
        raise ValueError("dg_pairwise needs at least two variables")
    m = np.zeros((n, n), dtype=bool)
    for p, q, f_ll, f_ul, f_lu, f_uu in _pair_probes(problem, stage):
        diff = abs((f_ul - f_ll) - (f_uu - f_lu))
        eps = epsilon if epsilon is not None else _threshold(n, (f_ll, f_ul, f_lu, f_uu))
        if diff > eps:
            m[p, q] = m[q, p] = True
    return m, _components(m)


def rdg_set_interact(
    problem: ObjectiveProblem,
    X1,
    X2,
    base_point=None,
    magnitudes=None,
    stage: str = "baseline",
    cache: dict | None = None,
) -> bool:
    """Set-set interaction by one non-linearity check.

    Both sets are displaced by ``magnitudes`` (default: to the upper bound
    from ``base_point``, which defaults to lb). ``cache`` maps frozensets of
    displaced indices to objective values and is filled in place.
    """
    X1, X2 = list(X1), list(X2)
    if not X1 or not X2:
        return False
    if set(X1) & set(X2):
        raise ValueError("X1 and X2 must be disjoint")
    base = problem.lb.copy() if base_point is None else np.asarray(base_point, dtype=float).copy()
    step = (problem.ub - base) if magnitudes is None else np.asarray(magnitudes, dtype=float)
    cache = {} if cache is None else cache

    def f(idx):
        key = frozenset(idx)
        if key not in cache:
            x = base.copy()
            ii = list(idx)
            x[ii] += step[ii]
            cache[key] = problem.evaluate(x, stage)
        return cache[key]

    f0, f1, f2, f12 = f(()), f(X1), f(X2), f(X1 + X2)
    return abs((f12 - f2) - (f1 - f0)) > _threshold(problem.dimension, (f0, f1, f2, f12))


def rdg_like(problem: ObjectiveProblem, stage: str = "baseline") -> GroupingResult:
    """Recursive set-set grouping in the RDG style (not an RDG2 reproduction)."""
    n = problem.dimension
    cache: dict = {}

    def interacting(X1, X2):
        if not rdg_set_interact(problem, X1, X2, stage=stage, cache=cache):
            return []
        if len(X2) == 1:
            return list(X2)
        half = len(X2) // 2
        return interacting(X1, X2[:half]) + interacting(X1, X2[half:])

    result = GroupingResult()
    rest = list(range(n))
    while rest:
        X1 = [rest.pop(0)]
        while rest:
            found = interacting(X1, rest)
            if not found:
                break
            X1 += found
            fs = set(found)
            rest = [j for j in rest if j not in fs]
        if len(X1) == 1:
            result.additively_separable.append(X1[0])
        else:
            result.nonseparable_groups.append(sorted(X1))
    return result


def _log_cross(values) -> float:
    f_ll, f_ul, f_lu, f_uu = values
    if min(values) <= 0:
        raise NonPositiveFitness("log-domain check needs positive objective values")
    return abs((math.log(f_ul) - math.log(f_ll)) - (math.log(f_uu) - math.log(f_lu)))


def _log_threshold(n: int, values, scale: float = 10.0) -> float:
    logs = [abs(math.log(v)) for v in values]
    return scale * gamma(math.sqrt(n) + 2.0) * (sum(logs) + 4.0)


def ddg_pairwise_check(
    problem: ObjectiveProblem, p: int, q: int, stage: str = "baseline"
) -> bool:
    """True when p and q look multiplicatively separable (ln f additive in them)."""
    lb = problem.lb.copy()
    vals = (
        problem.evaluate(lb, stage),
        problem.evaluate(_moved(problem, lb, [p]), stage),
        problem.evaluate(_moved(problem, lb, [q]), stage),
        problem.evaluate(_moved(problem, lb, [p, q]), stage),
    )
    return _log_cross(vals) <= _log_threshold(problem.dimension, vals)


def ddg_decompose(problem: ObjectiveProblem, stage: str = "baseline") -> GroupingResult:
    """Pairwise DG plus the DDG log check on the same corner probes.

    A DG-interacting pair is forgiven when ln f is additive in it. Pairs
    where f is not positive keep their DG verdict. Isolated variables with
    at least one forgiven pair are reported multiplicatively separable.
    """
    n = problem.dimension
    inter = np.zeros((n, n), dtype=bool)
    forgiven = np.zeros(n, dtype=bool)
    for p, q, *vals in _pair_probes(problem, stage):
        if abs((vals[1] - vals[0]) - (vals[3] - vals[2])) <= _threshold(n, vals):
            continue
        try:
            mult = _log_cross(vals) <= _log_threshold(n, vals)
        except NonPositiveFitness:
            mult = False
        if mult:
            forgiven[p] = forgiven[q] = True
        else:
            inter[p, q] = inter[q, p] = True
    result = _components(inter)
    s1 = [i for i in result.additively_separable if not forgiven[i]]
    s2 = [i for i in result.additively_separable if forgiven[i]]
    result.additively_separable, result.multiplicatively_separable = s1, s2
    return result
