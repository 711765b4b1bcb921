"""Cooperative co-evolution with a SaNSDE-style DE subspecies per subcomponent."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .problem import BudgetExhausted, GroupingResult, ObjectiveProblem


@dataclass
class SansdeConfig:
    pop_size: int = 50
    p_init: float = 0.5
    fp_init: float = 0.5
    f_mu: float = 0.5
    f_sigma: float = 0.3
    cr_init: float = 0.5
    cr_sigma: float = 0.1
    learning_period: int = 50
    cr_period: int = 5

    def __post_init__(self):
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4 for rand/1 mutation")
        if self.learning_period < 1 or self.cr_period < 1:
            raise ValueError("adaptation periods must be >= 1")


def partition_separables(grouping: GroupingResult, cap: int = 50) -> list[list[int]]:
    """Chunk each separable class into pieces of at most ``cap``; keep every
    non-separable group whole."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    out: list[list[int]] = []
    for cls in (
        grouping.additively_separable,
        grouping.multiplicatively_separable,
        grouping.generally_separable,
    ):
        cls = list(cls)
        out.extend(cls[k : k + cap] for k in range(0, len(cls), cap))
    out.extend(list(g) for g in grouping.nonseparable_groups)
    return out


def random_grouping(n: int, group_size: int, seed) -> list[list[int]]:
    """Random permutation cut into groups of ``group_size`` (last may be short)."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    return [sorted(int(i) for i in perm[k : k + group_size]) for k in range(0, n, group_size)]


@dataclass
class Subcomponent:
    indices: np.ndarray
    population: np.ndarray
    fitnesses: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    # adaptation memory
    p: float = 0.5
    fp: float = 0.5
    cr_mean: float = 0.5
    ns: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=int))
    nf: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=int))
    fs: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=int))
    ff: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=int))
    cr_hits: list = field(default_factory=list)
    accepted: int = 0
    generations: int = 0


@dataclass
class CcState:
    context: np.ndarray
    best_fitness: float
    trace: list[tuple[int, float]] = field(default_factory=list)
    checkpoints: list[tuple[int, float]] = field(default_factory=list)
    subcomponents: list[Subcomponent] = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fe_count", "best_fitness"])
        for fe, f in self.trace:
            w.writerow([fe, f"{f:.5e}"])
        return buf.getvalue()


class _Runner:
    """Evaluates sub-solutions inside the context, keeping the context elitist
    and recording the trace and FE checkpoints."""

    def __init__(self, problem: ObjectiveProblem, state: CcState, checkpoints=()):
        self.problem = problem
        self.state = state
        self._pending = sorted(checkpoints)

    def _note_checkpoints(self):
        fe = self.problem.ledger.total
        while self._pending and self._pending[0] <= fe:
            self.state.checkpoints.append((self._pending.pop(0), self.state.best_fitness))

    def __call__(self, indices, values) -> float:
        x = self.state.context.copy()
        x[indices] = values
        f = self.problem.evaluate(x, "optimization")
        if f < self.state.best_fitness:
            self.state.context = x
            self.state.best_fitness = f
            self.state.trace.append((self.problem.ledger.total, f))
        self._note_checkpoints()
        return f

    def flush(self, budget: int):
        # nothing is evaluated after the run stops, so the final best holds
        # for every checkpoint not yet reached
        for c in self._pending:
            if c <= budget:
                self.state.checkpoints.append((c, self.state.best_fitness))
        self._pending = []


def _reflect(v, lb, ub):
    v = np.where(v < lb, 2 * lb - v, v)
    v = np.where(v > ub, 2 * ub - v, v)
    return np.clip(v, lb, ub)


def _success_ratio(ns, nf) -> float:
    """Two-option probability update; falls back to 0.5 with no evidence."""
    a = ns[0] * (ns[1] + nf[1])
    b = ns[1] * (ns[0] + nf[0])
    if a + b == 0:
        return 0.5
    return float(a / (a + b))


def sansde_generation(sub: Subcomponent, evaluate, rng, config: SansdeConfig | None = None) -> Subcomponent:
    """One SaNSDE-style generation; ``evaluate(indices, values)`` returns f.

    Trials are built from the parent population, then evaluated in order;
    offspring replace parents when not worse. Adaptation counters are
    updated in place on ``sub``.
    """
    cfg = config or SansdeConfig()
    pop, fit = sub.population, sub.fitnesses
    NP, d = pop.shape
    best = pop[int(np.argmin(fit))]
    # three distinct partners per individual, none equal to itself
    r = np.argsort(rng.random((NP, NP - 1)), axis=1)[:, :3]
    r += r >= np.arange(NP)[:, None]
    strat = (rng.random(NP) >= sub.p).astype(int)
    gauss = rng.random(NP) < sub.fp
    F = np.abs(np.where(gauss, rng.normal(cfg.f_mu, cfg.f_sigma, NP), rng.standard_cauchy(NP)))[:, None]
    CR = np.clip(rng.normal(sub.cr_mean, cfg.cr_sigma, NP), 0.0, 1.0)
    v = np.where(
        strat[:, None] == 0,
        pop[r[:, 0]] + F * (pop[r[:, 1]] - pop[r[:, 2]]),
        pop + F * (best - pop) + F * (pop[r[:, 0]] - pop[r[:, 1]]),
    )
    mask = rng.random((NP, d)) < CR[:, None]
    mask[np.arange(NP), rng.integers(d, size=NP)] = True
    trials = _reflect(np.where(mask, v, pop), sub.lb, sub.ub)
    for i in range(NP):
        fu = evaluate(sub.indices, trials[i])
        fk = 0 if gauss[i] else 1
        if fu <= fit[i]:
            if fu < fit[i]:
                sub.cr_hits.append((float(CR[i]), fit[i] - fu))
            pop[i], fit[i] = trials[i], fu
            sub.ns[strat[i]] += 1
            sub.fs[fk] += 1
            sub.accepted += 1
        else:
            sub.nf[strat[i]] += 1
            sub.ff[fk] += 1
    sub.generations += 1
    if sub.generations % cfg.cr_period == 0 and sub.cr_hits:
        crs = np.array([c for c, _ in sub.cr_hits])
        w = np.array([g for _, g in sub.cr_hits])
        sub.cr_mean = float(np.dot(crs, w) / w.sum()) if w.sum() > 0 else float(crs.mean())
        sub.cr_hits = []
    if sub.generations % cfg.learning_period == 0:
        sub.p = _success_ratio(sub.ns, sub.nf)
        sub.fp = _success_ratio(sub.fs, sub.ff)
        for arr in (sub.ns, sub.nf, sub.fs, sub.ff):
            arr[:] = 0
    return sub


def cc_optimize(
    problem: ObjectiveProblem,
    subcomponents,
    budget: int,
    seed,
    checkpoints=(),
    config: SansdeConfig | None = None,
) -> CcState:
    """Round-robin CC until the ledger cannot fit another full generation.

    ``budget`` caps the ledger total, so FEs already charged (for example by
    a decomposition) count against it. The context starts at the box
    midpoint and is updated as soon as any trial improves it.
    """
    cfg = config or SansdeConfig()
    subcomponents = [np.asarray(s, dtype=int) for s in subcomponents if len(s)]
    ckpts = list(checkpoints)
    if any(b <= a for a, b in zip(ckpts, ckpts[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if ckpts and ckpts[-1] > budget:
        raise ValueError("checkpoints must not exceed the budget")
    init_cost = 1 + cfg.pop_size * len(subcomponents)
    if problem.ledger.total + init_cost > budget:
        raise BudgetExhausted(
            f"budget {budget} cannot cover initialization ({init_cost} FEs after {problem.ledger.total} used)"
        )
    rng = np.random.default_rng(seed)
    context = problem.midpoint.copy()
    state = CcState(context, np.inf)
    run = _Runner(problem, state, ckpts)
    run(np.array([], dtype=int), np.array([]))  # f(midpoint)

    subs: list[Subcomponent] = []
    for idx in subcomponents:
        lb, ub = problem.lb[idx], problem.ub[idx]
        pop = lb + rng.random((cfg.pop_size, idx.size)) * (ub - lb)
        fit = np.array([run(idx, x) for x in pop])
        subs.append(
            Subcomponent(idx, pop, fit, lb, ub, p=cfg.p_init, fp=cfg.fp_init, cr_mean=cfg.cr_init)
        )

    done = False
    while not done:
        for sub in subs:
            if problem.ledger.total + cfg.pop_size > budget:
                done = True
                break
            sansde_generation(sub, run, rng, cfg)
    run.flush(budget)
    state.subcomponents = subs
    return state
