import numpy as np
import pytest

from csgroup.baselines import dg_pairwise
from csgroup.bms import (
    BASIS_NAMES,
    UnknownBasis,
    block_size,
    build_bms,
    fig1_example,
    make_basis,
    random_rotation,
)


def test_basis_values():
    assert make_basis("sphe")(np.zeros(4)) == 0.0
    assert make_basis("prodsqu")(np.zeros(4)) == 1.0
    assert make_basis("cone")([3.0, 4.0]) == 5.0
    assert make_basis("rast")(np.zeros(3)) == 0.0
    assert make_basis("rosen")(np.zeros(5)) == 0.0
    assert make_basis("schw")([1.0, 2.0]) == 1.0 + 9.0
    assert make_basis("logabs")(np.zeros(3)) == 0.0
    # 1/m exponent keeps the product at the per-factor geometric mean
    assert make_basis("prodsqu")(np.ones(4)) == pytest.approx(2.0)


def test_basis_errors():
    with pytest.raises(UnknownBasis):
        make_basis("nope")
    with pytest.raises(ValueError):
        make_basis("rot_rast")
    q = random_rotation(3, 0)
    b = make_basis("rot_rast", {"rotation": q})
    z = np.array([0.1, -0.2, 0.3])
    assert b(z) == pytest.approx(make_basis("rast")(q @ z))
    assert set(BASIS_NAMES) >= {"sphe", "elli", "rast", "rosen", "schw", "prodsqu", "prodras", "logabs", "cone"}


def test_random_rotation():
    assert abs(random_rotation(1, 3)[0, 0]) == 1.0
    q = random_rotation(5, 1)
    np.testing.assert_allclose(q.T @ q, np.eye(5), atol=1e-9)
    np.testing.assert_array_equal(q, random_rotation(5, 1))


@pytest.mark.parametrize(
    "fid,counts,groups",
    [
        (1, (500, 500, 0), []),
        (10, (250, 250, 250), [250]),
        (12, (250, 250, 250), [50] * 5),
        (15, (250, 250, 250), [50] * 5),
    ],
)
def test_ground_truth_sizes_1000(fid, counts, groups):
    gt = build_bms(fid, 1000, 0).ground_truth
    gt.validate(1000)
    got = (len(gt.additively_separable), len(gt.multiplicatively_separable), len(gt.generally_separable))
    assert got == counts
    assert [len(g) for g in gt.nonseparable_groups] == groups


@pytest.mark.parametrize("fid", range(1, 16))
def test_every_instance_partitions_and_is_deterministic(fid):
    a = build_bms(fid, 100, 4)
    a.ground_truth.validate(100)
    b = build_bms(fid, 100, 4)
    x = np.random.default_rng(0).uniform(-5, 5, 100)
    assert a.problem.evaluate(x) == b.problem.evaluate(x)
    np.testing.assert_array_equal(a.shift, b.shift)
    assert np.all(np.abs(a.shift) <= 2.5)
    assert sorted(a.permutation) == list(range(100))


@pytest.mark.parametrize("fid", range(1, 10))
def test_shift_gives_documented_minimum(fid):
    inst = build_bms(fid, 100, 2)
    assert inst.problem.evaluate(inst.shift) == pytest.approx(inst.optimum_value, abs=1e-12)
    x = inst.shift + np.random.default_rng(fid).normal(0, 0.1, 100)
    assert inst.problem.evaluate(x) > inst.optimum_value


def test_ground_truth_is_permuted_slices():
    inst = build_bms(7, 100, 0)
    perm = inst.permutation
    assert sorted(inst.ground_truth.additively_separable) == sorted(perm[:40].tolist())
    assert sorted(inst.ground_truth.multiplicatively_separable) == sorted(perm[40:70].tolist())
    assert sorted(inst.ground_truth.generally_separable) == sorted(perm[70:].tolist())


@pytest.mark.parametrize("fid", range(1, 16))
def test_dg_interactions_stay_inside_blocks(fid):
    inst = build_bms(fid, 20, 1)
    m, _ = dg_pairwise(inst.fresh_problem())
    gt = inst.ground_truth
    block = {}
    for k, g in enumerate(gt.nonseparable_groups):
        # f14/f15 wrap all blocks in one outer function: a single composite block
        block.update({i: ("n", 0 if fid in (14, 15) else k) for i in g})
    block.update({i: ("m",) for i in gt.multiplicatively_separable})
    block.update({i: ("c",) for i in gt.generally_separable})
    for p, q in zip(*np.nonzero(m)):
        assert p in block and block[p] == block.get(q), (p, q)


def test_block_size_and_errors():
    assert block_size(1000) == 50 and block_size(100) == 5
    with pytest.raises(ValueError):
        build_bms(16, 100)
    with pytest.raises(ValueError):
        build_bms(1, 30)


def test_fig1_values():
    p, truth = fig1_example()
    assert p.evaluate([0, 1, 1, 0, 0, 0, 0]) == 2.0
    assert p.evaluate([0, 1, 1, 1, 0, 1, 0]) == 2.0
    truth.validate(7)
