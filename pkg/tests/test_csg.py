import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csgroup.bms import build_bms, fig1_example
from csgroup.csg import (
    ContextArchive,
    CsgConfig,
    CsgTrace,
    additive_check,
    csg_decompose,
    golden_section,
    gss_iteration_bound,
    gss_minimize,
    gsvd,
    msvd,
    nvg,
    rgd,
)
from csgroup.problem import FeLedger, NonFiniteObjective, ObjectiveProblem

GOLDEN = (math.sqrt(5) - 1) / 2


def box(f, n, lo=-5.0, hi=5.0):
    return ObjectiveProblem(f, np.full(n, lo), np.full(n, hi))


def corners_for(p, i):
    cached = {"f_ll": p.evaluate(p.lb, "additive_stage"), "f_uu": p.evaluate(p.ub, "additive_stage")}
    return additive_check(p, i, cached)


def archived(p, idx, cfg=None):
    cfg = cfg or CsgConfig()
    a = ContextArchive(p.lb, p.ub)
    for i in idx:
        a.cv[i] = gss_minimize(p, i, a.cv, cfg.gss_eps(p, i))
        a.record(i)
    return a


# --- additive stage ---------------------------------------------------------


def test_beta1_additive_is_zero():
    p = box(lambda x: float(x[0] + x[1]), 2)
    c = corners_for(p, 0)
    assert c.beta1 == 0.0
    assert p.ledger.additive_stage == 4


def test_beta1_product_hand_value():
    p = box(lambda x: float(x[0] * x[1]), 2, 1.0, 2.0)
    assert corners_for(p, 0).beta1 == 1.0


def test_beta1_rastrigin_below_eps1():
    f = lambda x: float(np.sum(x * x - 10 * np.cos(2 * np.pi * x) + 10))
    p = box(f, 6, -5.12, 5.12)
    for i in range(6):
        c = corners_for(p, i)
        assert c.beta1 < c.eps1()


# --- multiplicative stage ---------------------------------------------------


def test_msvd_on_product_inside_sum():
    p = box(lambda x: float(x[0] + x[1] * x[2]), 3, 0.5, 5.0)
    c = corners_for(p, 1)
    before = p.ledger.total
    m = msvd(p, 1, c)
    assert p.ledger.total - before == 4
    assert m.beta2 == pytest.approx(0.0, abs=1e-12) and m.multiplicative


def test_msvd_rejects_composite():
    p = box(lambda x: math.sqrt(x[0] + x[1]), 2, 0.5, 5.0)
    m = msvd(p, 0, corners_for(p, 0))
    assert not m.multiplicative and m.beta2 > m.eps2


def test_msvd_degenerate_difference():
    # f does not depend on x0 at all, so every halved difference vanishes
    p = box(lambda x: float(x[1] ** 2), 2)
    m = msvd(p, 0, corners_for(p, 0))
    assert m.degenerate and not m.multiplicative


# --- golden section -----------------------------------------------------------


def test_gss_quadratic_and_bound():
    p = ObjectiveProblem(lambda x: float(x[0] ** 2), [-5.0], [10.0])
    assert abs(gss_minimize(p, 0, [0.0], 0.01)) < 0.01
    assert gss_iteration_bound(15, 0.01) == 16
    assert p.ledger.gss_stage <= 16 + 2


def test_gss_constant_stops_immediately():
    calls = []
    x, it = golden_section(lambda t: calls.append(t) or 1.0, 0.0, 1.0, 1e-6)
    assert it == 0 and len(calls) == 2 and x == 0.5


@given(
    a=st.floats(-1e3, 1e3),
    width=st.floats(1e-3, 1e3),
    rel=st.floats(1e-8, 0.5),
    frac=st.floats(0.0, 1.0),
)
def test_gss_bound_and_contraction(a, width, rel, frac):
    eps = rel * width
    m = a + frac * width
    seen = []

    def f(t):
        seen.append(t)
        return abs(t - m)

    hist = []
    x, it = golden_section(f, a, a + width, eps, hist)
    assert it <= gss_iteration_bound(width, eps)
    assert len(seen) == it + 2
    assert abs(x - m) <= eps + 1e-12 * max(1.0, abs(m))
    assert len(hist) == it
    for t, (lo, hi) in enumerate(hist, 1):
        assert hi - lo <= width * GOLDEN**t * (1 + 1e-9) + 1e-12 * max(1.0, abs(a))


# --- minimum-shift tests ------------------------------------------------------


def test_gsvd_empty_costs_nothing():
    p = box(lambda x: float(x @ x), 3)
    assert gsvd(p, [], ContextArchive(p.lb, p.ub)) == []
    assert p.ledger.total == 0


def test_rgd_hand_examples():
    p = box(lambda x: float((x[0] - x[1]) ** 2), 2)
    a = archived(p, [1])
    assert rgd(p, 1, [[0]], a) == [[0]]
    q = box(lambda x: float(x[0] ** 2 + x[1] ** 2), 2)
    assert rgd(q, 1, [[0]], archived(q, [1])) == []


def test_rgd_picks_groups_one_and_three():
    # x0 couples to groups {1,2} and {5,6}; {3,4} and {7} are independent
    def f(x):
        return float(
            (x[0] - x[1] - x[2]) ** 2
            + (x[0] - x[5] * 0.5 - x[6]) ** 2
            + (x[1] - x[2]) ** 2
            + (x[3] + x[4]) ** 2
            + (x[5] - x[6]) ** 2
            + x[7] ** 2
        )

    p = box(f, 8, -1, 1)
    a = archived(p, [0])
    groups = [[1, 2], [3, 4], [5, 6], [7]]
    assert rgd(p, 0, groups, a) == [[1, 2], [5, 6]]


def test_nvg_examples():
    p = box(lambda x: float((x[0] - x[1]) ** 2 + (x[2] - x[3]) ** 2), 4)
    assert nvg(p, [0, 1, 2, 3], archived(p, range(4))) == [[0, 1], [2, 3]]
    schw = lambda x: float(np.sum(np.cumsum(x) ** 2))
    q = box(schw, 4)
    assert nvg(q, [0, 1, 2, 3], archived(q, range(4))) == [[0, 1, 2, 3]]
    assert nvg(q, [2], archived(q, [2])) == [[2]]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_nvg_seed_order_does_not_change_groups(seed):
    inst = build_bms(13, 100, 0)
    g, _ = csg_decompose(inst.fresh_problem(), CsgConfig(nvg_seed=seed))
    assert sorted(g.nonseparable_groups) == sorted(inst.ground_truth.canonical().nonseparable_groups)


# --- full pipeline ------------------------------------------------------------


def test_fig1_and_trace():
    p, truth = fig1_example()
    tr = CsgTrace()
    g, ledger = csg_decompose(p, trace=tr)
    assert g.canonical() == truth.canonical()
    assert ledger.additive_stage == 2 + 2 * 7
    assert set(tr.beta1) == set(range(7))
    assert set(tr.beta2) == {1, 2, 3, 4, 5, 6}
    assert ledger.msvd_stage == 4 * len(tr.beta2)


def test_sphere_all_additive():
    p = box(lambda x: float(x @ x), 10)
    g, ledger = csg_decompose(p)
    assert g.additively_separable == list(range(10))
    assert not (g.multiplicatively_separable or g.generally_separable or g.nonseparable_groups)
    assert ledger.total == 22


def test_f1_d100_is_402():
    g, ledger = csg_decompose(build_bms(1, 100, 0).fresh_problem())
    assert (len(g.additively_separable), len(g.multiplicatively_separable)) == (50, 50)
    assert ledger.additive_stage + ledger.msvd_stage == 402 == ledger.total


def test_nonfinite_raises():
    p = box(lambda x: float("nan") if x[0] > 4 else float(x @ x), 2)
    with pytest.raises(NonFiniteObjective):
        csg_decompose(p)


def test_config_validation():
    with pytest.raises(ValueError):
        CsgConfig(alpha=0.0)
    with pytest.raises(ValueError):
        CsgConfig(halving_factor=1.0)
    with pytest.raises(ValueError):
        CsgConfig(eps_gss=20.0).gss_eps(box(lambda x: 0.0, 1), 0)
    with pytest.raises(TypeError):
        CsgConfig.from_dict({"bogus": 1})


@st.composite
def mixed_problem(draw):
    n = draw(st.integers(2, 7))
    kinds = draw(st.lists(st.sampled_from(["lin", "sq", "prod", "sqrt", "pair"]), min_size=n, max_size=n))
    cut = draw(st.permutations(list(range(n))))
    terms = [(k, [cut[i], cut[(i + 1) % n]] if k in ("prod", "sqrt", "pair") else [cut[i]]) for i, k in enumerate(kinds)]

    def f(x):
        v = 0.0
        for k, idx in terms:
            z = x[idx]
            v += {
                "lin": lambda: float(z.sum()),
                "sq": lambda: float(((z - 1.3) ** 2).sum()),
                "prod": lambda: float(np.prod(z)),
                "sqrt": lambda: math.sqrt(float(z.sum())),
                "pair": lambda: float((z.sum() - 2.0) ** 2),
            }[k]()
        return v

    return ObjectiveProblem(f, np.full(n, 0.5), np.full(n, 5.0))


@settings(max_examples=60, deadline=None)
@given(mixed_problem())
def test_partition_fe_and_determinism(p):
    n = p.dimension
    tr = CsgTrace()
    g, ledger = csg_decompose(p, trace=tr)
    g.validate(n)
    assert ledger.additive_stage == 2 + 2 * n
    assert ledger.msvd_stage == 4 * len(tr.beta2)
    reaching = len(tr.beta2) - len(g.multiplicatively_separable)
    assert ledger.gsvd_stage >= 3 * reaching
    bound = gss_iteration_bound(4.5, CsgConfig().gss_eps(p, 0)) + 2
    assert ledger.gss_stage <= bound * reaching
    g2, _ = csg_decompose(p.with_ledger(FeLedger()))
    assert g2 == g


# f10 with seeds 4 and 12: the last variable of the Rosenbrock chain has its
# archived minimum pinned beyond the upper bound whichever bound its
# neighbours are moved to, so no in-box probe can reveal the shift and it is
# reported generally separable. Every other (function, seed) pair is exact.
KNOWN_PINNED = {(10, 4), (10, 12)}


def test_class_soundness_over_seeds():
    misses = set()
    for seed in range(20):
        for fid in range(1, 16):
            inst = build_bms(fid, 100, seed)
            g = csg_decompose(inst.fresh_problem())[0].canonical()
            t = inst.ground_truth.canonical()
            assert set(t.additively_separable) <= set(g.additively_separable)
            assert set(t.multiplicatively_separable) <= set(g.multiplicatively_separable)
            assert set(t.generally_separable) <= set(g.generally_separable)
            if g != t:
                misses.add((fid, seed))
    assert misses == KNOWN_PINNED
